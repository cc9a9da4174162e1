//! Series-level correction: the OAA effective series, the defect series `W`,
//! the correction `V_C = (1 - W)^{-r}` and the second-round chain.
//!
//! All objects are Laurent series in the walk step, so products commute.

use num_complex::Complex64;
use thiserror::Error;

use crate::bessel::{self, BesselError};
use crate::series::LaurentSeries;

/// Mass tolerance for series treated as exact (`V`, `V_C`, `V_C'`).
pub const EXACT_MASS_TOL: f64 = 1e-16;
/// Mass tolerance for intermediate powers of `W`.
const POWER_MASS_TOL: f64 = 1e-20;
/// Agreement required between the two routes to `W` and to `W'`.
pub const ROUTE_TOL: f64 = 1e-12;
const MAX_TERMS: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectionError {
    #[error("s(W) = {0} >= 1; the correction series diverges")]
    Divergent(f64),
    #[error("correction series did not meet the remainder bound within {0} terms")]
    TooManyTerms(u64),
    #[error("repetition count must be positive")]
    InvalidRepetitions,
    #[error("the two expansions of {what} disagree by {defect:e}")]
    RouteMismatch { what: &'static str, defect: f64 },
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `(3/2) F - (1/2) F F^dag F`.
pub fn oaa_series(f: &LaurentSeries) -> LaurentSeries {
    let cubic = f.mul(&f.adjoint()).mul(f);
    LaurentSeries::combine(re(1.5), f, re(-0.5), &cubic)
}

/// `W = (1/2)(V^dag Δ - Δ^dag Ṽ + V^dag Δ V^dag Δ + V^dag Δ Δ^dag Ṽ)` with
/// `Δ = V - Ṽ`.
pub fn w_first(v: &LaurentSeries, vt: &LaurentSeries) -> LaurentSeries {
    let delta = v - vt;
    let vd = v.adjoint().mul(&delta);
    let dv = delta.adjoint().mul(vt);
    let sum = &(&(&vd - &dv) + &vd.mul(&vd)) + &vd.mul(&delta.adjoint()).mul(vt);
    sum.scale_real(0.5)
}

/// The same `W` written through `Ṽ` and `Δ` only, using `V^dag V = 1`.
pub fn w_first_expanded(vt: &LaurentSeries, delta: &LaurentSeries) -> LaurentSeries {
    let vtd = vt.adjoint();
    let dd = delta.adjoint();
    let d2 = delta.mul(delta);
    let terms = [
        vtd.mul(delta),
        -&dd.mul(vt),
        dd.mul(delta),
        vtd.mul(&vtd).mul(&d2),
        dd.mul(&dd).mul(&d2),
        vtd.mul(&dd).mul(&d2).scale_real(2.0),
        vtd.mul(vt).mul(delta).mul(&dd),
        vt.mul(delta).mul(&dd).mul(&dd),
    ];
    terms
        .iter()
        .fold(LaurentSeries::zero(), |acc, t| &acc + t)
        .scale_real(0.5)
}

/// `V_oaa^dag V_oaa` expanded around the identity through `Ṽ` and `Δ`.
pub fn oaa_gram_expanded(vt: &LaurentSeries, delta: &LaurentSeries) -> LaurentSeries {
    let vtd = vt.adjoint();
    let dd = delta.adjoint();
    let g = dd.mul(delta);
    let a = vtd.mul(delta);
    let b = dd.mul(vt);
    let terms = [
        (1.0, LaurentSeries::one()),
        (-1.5, g.clone()),
        (0.75, g.mul(&g)),
        (-0.25, g.powi(3)),
        (-0.75, &a.mul(&a) + &b.mul(&b)),
        (-0.25, &a.powi(3) + &b.powi(3)),
        (-0.75, g.mul(&(&b + &a))),
    ];
    terms
        .iter()
        .fold(LaurentSeries::zero(), |acc, (c, t)| &acc + &t.scale_real(*c))
}

/// A correction series and its truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    /// `V_C` (or `V_C'`) summed to the requested tolerance.
    pub series: LaurentSeries,
    /// `Ṽ_C`, the series truncated at the cutoff.
    pub truncated: LaurentSeries,
    pub s_total: f64,
    pub s_tail: f64,
    /// Highest power of `W` summed.
    pub k_terms: u64,
    /// s-norm of the defining-identity residual. Initially `(1-W)^r V_C - 1`;
    /// replaced by the Bessel identity residual once verified.
    pub residual: f64,
}

/// `Σ_k binom(r+k-1, r-1) W^k`, stopping at the smallest `K` whose remainder
/// bound `binom(r+K, r-1) s^{K+1} / (1 - s (r+K+1)/(K+2))` is at most `tol`.
/// The result is truncated at `cutoff`.
pub fn correction_first(
    w: &LaurentSeries,
    r: u64,
    tol: f64,
    cutoff: u64,
) -> Result<CorrectionResult, CorrectionError> {
    if r == 0 {
        return Err(CorrectionError::InvalidRepetitions);
    }
    let s = w.s_norm();
    if s >= 1.0 {
        return Err(CorrectionError::Divergent(s));
    }
    let rf = r as f64;
    let mut sum = LaurentSeries::one();
    let mut power = LaurentSeries::one();
    let mut binom = 1.0;
    let mut k = 0u64;
    loop {
        let kf = k as f64;
        let next_binom = binom * (rf + kf) / (kf + 1.0);
        let ratio = s * (rf + kf + 1.0) / (kf + 2.0);
        if ratio < 1.0 {
            let bound = next_binom * s.powi(k as i32 + 1) / (1.0 - ratio);
            if bound <= tol {
                break;
            }
        }
        if k >= MAX_TERMS {
            return Err(CorrectionError::TooManyTerms(MAX_TERMS));
        }
        k += 1;
        binom = next_binom;
        power = power.mul(w).truncate_to_mass(POWER_MASS_TOL);
        sum = &sum + &power.scale_real(binom);
    }
    let series = sum.truncate_to_mass(EXACT_MASS_TOL);
    let one_minus_w = &LaurentSeries::one() - w;
    let inversion = &one_minus_w.powi(r as u32).mul(&series) - &LaurentSeries::one();
    Ok(finish(series, cutoff, k, inversion.s_norm()))
}

fn finish(series: LaurentSeries, cutoff: u64, k_terms: u64, residual: f64) -> CorrectionResult {
    let truncated = series.truncate(cutoff);
    let s_total = series.s_norm();
    let s_tail = (s_total - truncated.s_norm()).max(0.0);
    CorrectionResult {
        series,
        truncated,
        s_total,
        s_tail,
        k_terms,
        residual,
    }
}

/// s-norm of `V_C V_oaa^r - V(zr)` with `V_oaa` built from `vt`. Stores the
/// value in `result.residual`.
pub fn verify_first(
    vt: &LaurentSeries,
    result: &mut CorrectionResult,
    r: u64,
    z: f64,
) -> Result<f64, CorrectionError> {
    let voaa = oaa_series(vt);
    let lhs = result.series.mul(&voaa.powi(r as u32));
    let target = bessel::full_series(z * r as f64, bessel::EXACT_SERIES_TOL)?;
    result.residual = (&lhs - &target).s_norm();
    Ok(result.residual)
}

/// The primed objects of the second round.
#[derive(Debug, Clone)]
pub struct SecondRound {
    /// `V' = V_C V_oaa^r`.
    pub v_prime: LaurentSeries,
    /// `Ṽ' = Ṽ_C V_oaa^r`.
    pub vt_prime: LaurentSeries,
    /// `Δ' = V' - Ṽ'`.
    pub delta_prime: LaurentSeries,
    /// `W'` built directly from `V'` and `Ṽ'`.
    pub w_prime: LaurentSeries,
    /// `W'` through `(V_oaa^dag V_oaa)^r` and `Δ_C`.
    pub w_prime_factored: LaurentSeries,
    /// `V_oaa^dag V_oaa` from its expansion around the identity.
    pub oaa_gram: LaurentSeries,
    pub route_defect: f64,
}

/// Builds the second-round chain from the first-round correction, the exact
/// segment `v` and its truncation `vt`. Fails if the two routes to `W'` (or
/// to `V_oaa^dag V_oaa`) disagree beyond [`ROUTE_TOL`].
pub fn second_round_chain(
    vc: &CorrectionResult,
    v: &LaurentSeries,
    vt: &LaurentSeries,
    r: u64,
) -> Result<SecondRound, CorrectionError> {
    let voaa = oaa_series(vt);
    let voaa_r = voaa.powi(r as u32);
    let v_prime = vc.series.mul(&voaa_r);
    let vt_prime = vc.truncated.mul(&voaa_r);
    let delta_prime = &v_prime - &vt_prime;
    let w_prime = w_first(&v_prime, &vt_prime);

    let delta = v - vt;
    let oaa_gram = oaa_gram_expanded(vt, &delta);
    let gram_defect = (&oaa_gram - &voaa.adjoint().mul(&voaa)).s_norm();
    if gram_defect > ROUTE_TOL {
        return Err(CorrectionError::RouteMismatch {
            what: "V_oaa^dag V_oaa",
            defect: gram_defect,
        });
    }
    let gram_r = oaa_gram.powi(r as u32);
    let dc = &vc.series - &vc.truncated;
    let vcd = vc.series.adjoint().mul(&dc);
    let linear = &vcd - &dc.adjoint().mul(&vc.truncated);
    let quadratic = &vcd.mul(&vcd) + &vcd.mul(&dc.adjoint()).mul(&vc.truncated);
    let w_prime_factored = (&gram_r.mul(&linear) + &gram_r.mul(&gram_r).mul(&quadratic)).scale_real(0.5);
    let route_defect = (&w_prime - &w_prime_factored).s_norm();
    if route_defect > ROUTE_TOL {
        return Err(CorrectionError::RouteMismatch {
            what: "W'",
            defect: route_defect,
        });
    }
    Ok(SecondRound {
        v_prime,
        vt_prime,
        delta_prime,
        w_prime,
        w_prime_factored,
        oaa_gram,
        route_defect,
    })
}

/// `V_C' = Σ_k binom(r'+k-1, r'-1) W'^k`, truncated at `cutoff` (`N'`).
pub fn correction_second(
    w_prime: &LaurentSeries,
    r_prime: u64,
    tol: f64,
    cutoff: u64,
) -> Result<CorrectionResult, CorrectionError> {
    correction_first(w_prime, r_prime, tol, cutoff)
}

/// s-norm of `V_C' (V_oaa')^{r'} - V(z r r')` with `V_oaa' = oaa(Ṽ')`.
pub fn verify_second(
    vt_prime: &LaurentSeries,
    result: &mut CorrectionResult,
    r_prime: u64,
    z_compound: f64,
) -> Result<f64, CorrectionError> {
    verify_first(vt_prime, result, r_prime, z_compound)
}
