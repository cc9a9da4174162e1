//! End-to-end effective series of the three simulation strategies and the
//! walk-step ledger of the circuits they describe.
//!
//! The effective series depends only on the plan, so it can be shared across
//! Hamiltonians with the same `tau` and `epsilon`.

use serde::Serialize;

use crate::bessel::{self, BesselError};
use crate::correction::{self, CorrectionError, CorrectionResult};
use crate::hamiltonian::QueryLedger;
use crate::planner::{BaselinePlan, SegmentPlan};
use crate::series::LaurentSeries;

/// Remainder tolerance for summing the correction series.
pub const CORRECTION_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Uncorrected,
    Corrected1,
    Corrected2,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Uncorrected => "uncorrected",
            Algorithm::Corrected1 => "corrected1",
            Algorithm::Corrected2 => "corrected2",
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "uncorrected" => Some(Algorithm::Uncorrected),
            "corrected1" => Some(Algorithm::Corrected1),
            "corrected2" => Some(Algorithm::Corrected2),
            _ => None,
        }
    }
}

/// The series applied end to end, plus the diagnostics collected while
/// building it.
#[derive(Debug, Clone)]
pub struct PipelineSeries {
    pub effective: LaurentSeries,
    /// `s_norm(V_C V_oaa^r - V(zr))`, when a first round ran.
    pub first_residual: Option<f64>,
    /// `s_norm(V_C' (V_oaa')^{r'} - V(zrr'))`, when a second round ran.
    pub second_residual: Option<f64>,
    /// s-norm of the LCU padded to 2 before the final OAA round: `Ṽ_C`,
    /// `Ṽ_C'`, or `Ṽ` for the baseline.
    pub padded_lcu_s: f64,
    /// Largest alternating-symmetry defect over every series built.
    pub symmetry_defect: f64,
}

#[derive(Default)]
struct SymmetryTracker(f64);

impl SymmetryTracker {
    fn see(&mut self, s: &LaurentSeries) {
        self.0 = self.0.max(s.alternating_symmetry_defect());
    }
}

fn exact_segment(z: f64) -> Result<LaurentSeries, BesselError> {
    bessel::full_series(z, bessel::EXACT_SERIES_TOL)
}

struct FirstRound {
    v: LaurentSeries,
    vt: LaurentSeries,
    voaa_r: LaurentSeries,
    vc: CorrectionResult,
}

fn first_round(plan: &SegmentPlan, sym: &mut SymmetryTracker) -> Result<FirstRound, CorrectionError> {
    let spec = &plan.spec;
    let v = exact_segment(spec.z)?;
    let vt = bessel::segment_series(spec.z, spec.cutoff)?;
    let w = correction::w_first(&v, &vt);
    let mut vc = correction::correction_first(&w, spec.segments, CORRECTION_TOL, plan.n)?;
    correction::verify_first(&vt, &mut vc, spec.segments, spec.z)?;
    let voaa = correction::oaa_series(&vt);
    let voaa_r = voaa.powi(spec.segments as u32);
    for s in [&v, &vt, &w, &voaa, &vc.series, &vc.truncated] {
        sym.see(s);
    }
    Ok(FirstRound { v, vt, voaa_r, vc })
}

/// One round of correction: `G = Ṽ_C V_oaa^r`, then one OAA round on `G`.
pub fn corrected_single(plan: &SegmentPlan) -> Result<PipelineSeries, CorrectionError> {
    if plan.spec.trivial {
        return Ok(trivial());
    }
    let mut sym = SymmetryTracker::default();
    let first = first_round(plan, &mut sym)?;
    let g = first.vc.truncated.mul(&first.voaa_r);
    let effective = correction::oaa_series(&g);
    sym.see(&g);
    sym.see(&effective);
    Ok(PipelineSeries {
        effective,
        first_residual: Some(first.vc.residual),
        second_residual: None,
        padded_lcu_s: first.vc.truncated.s_norm(),
        symmetry_defect: sym.0,
    })
}

/// Two rounds: each compound segment is the OAA of `Ṽ' = Ṽ_C V_oaa^r`;
/// `r'` of them are corrected by `Ṽ_C'` and amplified once more.
pub fn corrected_double(plan: &SegmentPlan) -> Result<PipelineSeries, CorrectionError> {
    if plan.spec.trivial {
        return Ok(trivial());
    }
    let r_prime = plan
        .spec
        .compound_segments
        .ok_or(CorrectionError::InvalidRepetitions)?;
    let n_prime = plan.n_prime.ok_or(CorrectionError::InvalidRepetitions)?;
    let mut sym = SymmetryTracker::default();
    let first = first_round(plan, &mut sym)?;
    let chain = correction::second_round_chain(&first.vc, &first.v, &first.vt, plan.spec.segments)?;
    let mut vcp = correction::correction_second(&chain.w_prime, r_prime, CORRECTION_TOL, n_prime)?;
    let z_compound = plan.spec.z * plan.spec.segments as f64;
    correction::verify_second(&chain.vt_prime, &mut vcp, r_prime, z_compound)?;
    let voaa_prime = correction::oaa_series(&chain.vt_prime);
    let g = vcp.truncated.mul(&voaa_prime.powi(r_prime as u32));
    let effective = correction::oaa_series(&g);
    for s in [
        &chain.v_prime,
        &chain.vt_prime,
        &chain.delta_prime,
        &chain.w_prime,
        &vcp.series,
        &vcp.truncated,
        &voaa_prime,
        &g,
        &effective,
    ] {
        sym.see(s);
    }
    Ok(PipelineSeries {
        effective,
        first_residual: Some(first.vc.residual),
        second_residual: Some(vcp.residual),
        padded_lcu_s: vcp.truncated.s_norm(),
        symmetry_defect: sym.0,
    })
}

/// `r` amplified segments with no correction.
pub fn uncorrected(plan: &BaselinePlan) -> Result<PipelineSeries, CorrectionError> {
    if plan.spec.trivial {
        return Ok(trivial());
    }
    let vt = bessel::segment_series(plan.spec.z, plan.spec.cutoff)?;
    let voaa = correction::oaa_series(&vt);
    let effective = voaa.powi(plan.spec.segments as u32);
    let mut sym = SymmetryTracker::default();
    for s in [&vt, &voaa, &effective] {
        sym.see(s);
    }
    Ok(PipelineSeries {
        effective,
        first_residual: None,
        second_residual: None,
        padded_lcu_s: vt.s_norm(),
        symmetry_defect: sym.0,
    })
}

fn trivial() -> PipelineSeries {
    PipelineSeries {
        effective: LaurentSeries::one(),
        first_residual: None,
        second_residual: None,
        padded_lcu_s: 1.0,
        symmetry_defect: 0.0,
    }
}

fn charge_select(ledger: &mut QueryLedger, cutoff: u64) {
    ledger.charge_walk_steps(2 * cutoff);
    ledger.record_select(cutoff);
}

/// An OAA round costs three applications of its block.
fn charge_amplified(ledger: &mut QueryLedger, block: impl Fn(&mut QueryLedger)) {
    for _ in 0..3 {
        block(ledger);
    }
}

fn charge_compound(ledger: &mut QueryLedger, segments: u64, cutoff: u64, n: u64) {
    for _ in 0..segments {
        charge_amplified(ledger, |l| charge_select(l, cutoff));
    }
    charge_select(ledger, n);
}

/// Charges the walk steps of the circuit a corrected plan describes, one
/// `select(U)` at a time.
pub fn charge_corrected(ledger: &mut QueryLedger, plan: &SegmentPlan) {
    if plan.spec.trivial {
        return;
    }
    let (r, m, n) = (plan.spec.segments, plan.spec.cutoff, plan.n);
    match (plan.spec.compound_segments, plan.n_prime) {
        (Some(rp), Some(np)) => charge_amplified(ledger, |l| {
            for _ in 0..rp {
                charge_amplified(l, |l2| charge_compound(l2, r, m, n));
            }
            charge_select(l, np);
        }),
        _ => charge_amplified(ledger, |l| charge_compound(l, r, m, n)),
    }
}

/// Charges `r` amplified segments of the baseline.
pub fn charge_uncorrected(ledger: &mut QueryLedger, plan: &BaselinePlan) {
    if plan.spec.trivial {
        return;
    }
    for _ in 0..plan.spec.segments {
        charge_amplified(ledger, |l| charge_select(l, plan.spec.cutoff));
    }
}
