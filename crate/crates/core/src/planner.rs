//! Parameter selection for one and two rounds of correction, the constants
//! entering the tail bounds, and query-cost prediction.

use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::bessel::{self, BesselError, SegmentSpec};
use crate::hamiltonian::QUERIES_PER_WALK_STEP;

/// Largest per-segment cutoff the planner will consider.
pub const MAX_CUTOFF: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("infeasible plan: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Root of `e^{1 + 1/(2ζ)} = 2ζ`.
    pub zeta: f64,
    /// Root of `ζ'^5 (sqrt2 - 2ζ')^2 = 16 sqrt2` in `(1.4, 1.6)`.
    pub zeta_prime: f64,
}

pub fn zeta_equation(x: f64) -> f64 {
    (1.0 + 1.0 / (2.0 * x)).exp() - 2.0 * x
}

pub fn zeta_prime_equation(x: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    x.powi(5) * (s2 - 2.0 * x).powi(2) - 16.0 * s2
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

pub fn solve_constants() -> BoundConstants {
    static CONSTANTS: OnceLock<BoundConstants> = OnceLock::new();
    *CONSTANTS.get_or_init(|| BoundConstants {
        zeta: bisect(zeta_equation, 1.5, 2.2),
        zeta_prime: bisect(zeta_prime_equation, 1.4, 1.6),
    })
}

/// Bound values certifying a plan. Tails are upper bounds on discarded
/// coefficient mass; `_s` values bound the s-norm of the correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedBounds {
    pub lcu_s_bound: f64,
    pub first_tail_bound: f64,
    pub second_lcu_s_bound: Option<f64>,
    pub second_tail_bound: Option<f64>,
}

/// `ln` of `2^{r+1} (|z| ζ / M)^{N+1}`.
fn ln_first_tail(z: f64, cutoff: u64, r: u64, n: u64, zeta: f64) -> f64 {
    (r + 1) as f64 * std::f64::consts::LN_2
        + (n + 1) as f64 * (z.abs() * zeta / cutoff as f64).ln()
}

/// `ln` of `2^{r'} (|z| ζ ζ' 2^{1/M} / M)^{N'+1}`.
fn ln_second_tail(z: f64, cutoff: u64, r_prime: u64, n_prime: u64, c: &BoundConstants) -> f64 {
    let m = cutoff as f64;
    let base = z.abs().ln() + c.zeta.ln() + c.zeta_prime.ln() + std::f64::consts::LN_2 / m - m.ln();
    r_prime as f64 * std::f64::consts::LN_2 + (n_prime + 1) as f64 * base
}

/// `(1 - 2 x)^{-k}`, or an error when `1 - 2x <= 0`.
fn inverse_power(x: f64, k: u64, what: &str) -> Result<f64, PlanError> {
    let base = 1.0 - 2.0 * x;
    if base <= 0.0 {
        return Err(PlanError::Infeasible(format!("{what}: 1 - 2*tail = {base} <= 0")));
    }
    Ok((-(k as f64) * base.ln()).exp())
}

/// Evaluates every bound for `spec` with cutoffs `N` and (two rounds) `N'`.
pub fn certify_bounds(spec: &SegmentSpec, n: u64, n_prime: Option<u64>) -> Result<CertifiedBounds, PlanError> {
    let c = solve_constants();
    let r = spec.segments;
    let tail = bessel::tail_sum(spec.z, spec.cutoff)?;
    let lcu_s_bound = inverse_power(tail, r, "first-round correction")?;
    let first_tail_bound = ln_first_tail(spec.z, spec.cutoff, r, n, c.zeta).exp();
    let (second_lcu_s_bound, second_tail_bound) = match (spec.compound_segments, n_prime) {
        (Some(rp), Some(np)) => (
            Some(inverse_power(first_tail_bound, rp, "second-round correction")?),
            Some(ln_second_tail(spec.z, spec.cutoff, rp, np, &c).exp()),
        ),
        _ => (None, None),
    };
    Ok(CertifiedBounds {
        lcu_s_bound,
        first_tail_bound,
        second_lcu_s_bound,
        second_tail_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QueryPrediction {
    pub walk_steps: u64,
    pub queries: u64,
}

impl QueryPrediction {
    pub fn from_walk_steps(walk_steps: u64) -> Self {
        Self {
            walk_steps,
            queries: QUERIES_PER_WALK_STEP * walk_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentPlan {
    pub spec: SegmentSpec,
    /// First-round correction cutoff `N = 3 r M`.
    pub n: u64,
    /// Second-round correction cutoff `N' = 9 r r' M`.
    pub n_prime: Option<u64>,
    pub certified: CertifiedBounds,
    pub predicted_error: f64,
    pub predicted: QueryPrediction,
}

impl SegmentPlan {
    pub fn rounds(&self) -> u8 {
        if self.spec.compound_segments.is_some() {
            2
        } else {
            1
        }
    }

    pub fn predicted_queries(&self) -> u64 {
        self.predicted.queries
    }
}

/// Walk steps of the circuit a plan describes. One round:
/// `3 (r * 3 * 2M + 2N)`; two rounds: `3 (r' * 3 * (r * 3 * 2M + 2N) + 2N')`.
pub fn predicted_queries(plan: &SegmentPlan) -> QueryPrediction {
    if plan.spec.trivial {
        return QueryPrediction::from_walk_steps(0);
    }
    let spec = &plan.spec;
    let compound = spec.segments * 3 * 2 * spec.cutoff + 2 * plan.n;
    let steps = match (spec.compound_segments, plan.n_prime) {
        (Some(rp), Some(np)) => 3 * (rp * 3 * compound + 2 * np),
        _ => 3 * compound,
    };
    QueryPrediction::from_walk_steps(steps)
}

fn check_epsilon(epsilon: f64) -> Result<(), PlanError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(PlanError::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// `r <= ln2 / (2 Σ_{|m|>M} |J_m(z)|)`.
fn within_segment_cap(z: f64, cutoff: u64, r: u64) -> Result<bool, PlanError> {
    let tail = bessel::tail_sum(z, cutoff)?;
    Ok(tail == 0.0 || r as f64 <= std::f64::consts::LN_2 / (2.0 * tail))
}

fn trivial_plan(rounds: u8) -> Result<SegmentPlan, PlanError> {
    let spec = bessel::select_z(0.0, rounds, None)?;
    let n = 3 * spec.segments * spec.cutoff;
    let n_prime = spec
        .compound_segments
        .map(|rp| 9 * spec.segments * rp * spec.cutoff);
    let certified = certify_bounds(&spec, n, n_prime)?;
    let mut plan = SegmentPlan {
        spec,
        n,
        n_prime,
        certified,
        predicted_error: 0.0,
        predicted: QueryPrediction::from_walk_steps(0),
    };
    plan.predicted = predicted_queries(&plan);
    Ok(plan)
}

fn infeasible(what: &str, tau: f64, epsilon: f64) -> PlanError {
    PlanError::Infeasible(format!(
        "no cutoff M <= {MAX_CUTOFF} satisfies {what} for tau = {tau}, epsilon = {epsilon:e}"
    ))
}

/// One round of correction.
pub fn plan_single(tau: f64, epsilon: f64) -> Result<SegmentPlan, PlanError> {
    check_epsilon(epsilon)?;
    let mut spec = bessel::select_z(tau, 1, None)?;
    if spec.trivial {
        return trivial_plan(1);
    }
    let r = spec.segments;
    for cutoff in 2..=MAX_CUTOFF {
        spec.cutoff = cutoff;
        if !within_segment_cap(spec.z, cutoff, r)? {
            continue;
        }
        let n = 3 * r * cutoff;
        let Ok(certified) = certify_bounds(&spec, n, None) else {
            continue;
        };
        if certified.lcu_s_bound > 2.0 || certified.first_tail_bound > epsilon {
            continue;
        }
        let mut plan = SegmentPlan {
            spec,
            n,
            n_prime: None,
            certified,
            predicted_error: certified.first_tail_bound,
            predicted: QueryPrediction::from_walk_steps(0),
        };
        plan.predicted = predicted_queries(&plan);
        return Ok(plan);
    }
    Err(infeasible("the single-round constraints", tau, epsilon))
}

/// `ln` of the cap `(ln2 / 2^{r+2}) (M / (|z| ζ))^{3rM+1}` on `r'`.
fn ln_compound_cap(z: f64, cutoff: u64, r: u64, zeta: f64) -> f64 {
    std::f64::consts::LN_2.ln() - (r + 2) as f64 * std::f64::consts::LN_2
        + (3 * r * cutoff + 1) as f64 * (cutoff as f64 / (z.abs() * zeta)).ln()
}

/// Two rounds of correction with `r = max(1, ceil(log2 tau))`.
pub fn plan_double(tau: f64, epsilon: f64) -> Result<SegmentPlan, PlanError> {
    check_epsilon(epsilon)?;
    let mut spec = bessel::select_z(tau, 2, None)?;
    if spec.trivial {
        return trivial_plan(2);
    }
    let zeta = solve_constants().zeta;
    let r = spec.segments;
    let rp = spec.compound_segments.expect("two-round spec");
    for cutoff in 2..=MAX_CUTOFF {
        spec.cutoff = cutoff;
        if !within_segment_cap(spec.z, cutoff, r)? {
            continue;
        }
        if (rp as f64).ln() > ln_compound_cap(spec.z, cutoff, r, zeta) {
            continue;
        }
        let n = 3 * r * cutoff;
        let n_prime = 9 * r * rp * cutoff;
        let Ok(certified) = certify_bounds(&spec, n, Some(n_prime)) else {
            continue;
        };
        let second_sum = certified.second_lcu_s_bound.expect("two-round bounds");
        let second_tail = certified.second_tail_bound.expect("two-round bounds");
        if certified.lcu_s_bound > 2.0 || second_sum > 2.0 || second_tail > epsilon {
            continue;
        }
        let mut plan = SegmentPlan {
            spec,
            n,
            n_prime: Some(n_prime),
            certified,
            predicted_error: second_tail,
            predicted: QueryPrediction::from_walk_steps(0),
        };
        plan.predicted = predicted_queries(&plan);
        return Ok(plan);
    }
    Err(infeasible("the two-round constraints", tau, epsilon))
}

/// Uncorrected baseline: `r` segments with one OAA round each and a cutoff
/// chosen from the factorial tail bound at per-segment error `ε / r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselinePlan {
    pub spec: SegmentSpec,
    pub predicted_error: f64,
    pub predicted: QueryPrediction,
}

pub fn plan_uncorrected(tau: f64, epsilon: f64) -> Result<BaselinePlan, PlanError> {
    check_epsilon(epsilon)?;
    let mut spec = bessel::select_z(tau, 1, None)?;
    if spec.trivial {
        return Ok(BaselinePlan {
            spec,
            predicted_error: 0.0,
            predicted: QueryPrediction::from_walk_steps(0),
        });
    }
    let r = spec.segments;
    let per_segment = epsilon / r as f64;
    let cutoff = (1..=MAX_CUTOFF)
        .find(|&m| bessel::bessel_tail_bound(spec.z, m) <= per_segment)
        .ok_or_else(|| infeasible("the per-segment tail bound", tau, epsilon))?;
    spec.cutoff = cutoff;
    Ok(BaselinePlan {
        spec,
        predicted_error: r as f64 * bessel::bessel_tail_bound(spec.z, cutoff),
        predicted: QueryPrediction::from_walk_steps(r * 3 * 2 * cutoff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let c = solve_constants();
        assert!((c.zeta - 1.79556073833).abs() < 1e-10);
        assert!((c.zeta_prime - 1.52936613396).abs() < 1e-10);
        assert!(zeta_equation(c.zeta).abs() <= 1e-12);
        assert!(zeta_prime_equation(c.zeta_prime).abs() <= 1e-12);
    }

    #[test]
    fn tail_bound_direct_formula() {
        let spec = SegmentSpec {
            z: -0.8,
            cutoff: 2,
            segments: 3,
            compound_segments: None,
            trivial: false,
        };
        let b = certify_bounds(&spec, 18, None).unwrap();
        let zeta = solve_constants().zeta;
        let expect = 16.0 * (0.8 * zeta / 2.0f64).powi(19);
        assert!((b.first_tail_bound / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_argument_bounds() {
        let spec = bessel::select_z(0.0, 2, None).unwrap();
        let b = certify_bounds(&spec, 6, Some(18)).unwrap();
        assert_eq!(b.lcu_s_bound, 1.0);
        assert_eq!(b.first_tail_bound, 0.0);
        assert_eq!(b.second_lcu_s_bound, Some(1.0));
        assert_eq!(b.second_tail_bound, Some(0.0));
    }

    #[test]
    fn prediction_formula() {
        let plan = SegmentPlan {
            spec: SegmentSpec {
                z: -0.8,
                cutoff: 2,
                segments: 3,
                compound_segments: None,
                trivial: false,
            },
            n: 18,
            n_prime: None,
            certified: CertifiedBounds {
                lcu_s_bound: 1.0,
                first_tail_bound: 0.0,
                second_lcu_s_bound: None,
                second_tail_bound: None,
            },
            predicted_error: 0.0,
            predicted: QueryPrediction::from_walk_steps(0),
        };
        assert_eq!(predicted_queries(&plan), QueryPrediction { walk_steps: 216, queries: 864 });
        assert_eq!(plan_single(0.0, 0.1).unwrap().predicted_queries(), 0);
    }

    #[test]
    fn single_plans() {
        let p = plan_single(8.0, 1e-8).unwrap();
        assert_eq!((p.spec.segments, p.spec.cutoff, p.n), (8, 3, 72));
        assert_eq!(p.spec.z, -1.0);
        let p = plan_single(4.0, 1e-3).unwrap();
        let again = certify_bounds(&p.spec, p.n, None).unwrap();
        assert!(again.lcu_s_bound <= 2.0 && again.first_tail_bound <= 1e-3);
        let loose = plan_single(4.0, 1e-3).unwrap().n;
        let tight = plan_single(4.0, 1e-12).unwrap().n;
        assert!(tight >= loose);
        assert!(matches!(plan_single(1.0, 1.0), Err(PlanError::InvalidEpsilon(_))));
    }

    #[test]
    fn double_plans() {
        let p = plan_double(16.0, 1e-6).unwrap();
        assert_eq!(p.spec.segments, 4);
        assert!(p.certified.second_lcu_s_bound.unwrap() <= 2.0);
        assert_eq!(p.n_prime, Some(9 * 4 * p.spec.compound_segments.unwrap() * p.spec.cutoff));
        let p = plan_double(2.0, 0.5).unwrap();
        assert_eq!(p.spec.segments, 1);
        for tau in [2.0, 3.0, 5.5, 16.0, 32.0] {
            let p = plan_double(tau, 1e-4).unwrap();
            assert_eq!(p.spec.tau(), tau);
        }
    }

    #[test]
    fn baseline_plan() {
        let b = plan_uncorrected(8.0, 1e-8).unwrap();
        assert_eq!((b.spec.segments, b.spec.cutoff), (8, 9));
        assert_eq!(b.predicted.walk_steps, 8 * 6 * 9);
    }
}
