//! Bessel weights for the walk-step series.
//!
//! `J_m(z)` for integer order and real argument, the truncated segment series
//! `Σ_{|m|<=M} J_m(z) U^m`, tail quantities, and the choice of the per-segment
//! argument `z` together with the segment counts.

use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::series::LaurentSeries;

/// Largest `|z|` accepted by [`bessel_j`].
pub const MAX_ARGUMENT: f64 = 1e3;

/// Default s-mass tolerance for "exact" (untruncated) Bessel series.
pub const EXACT_SERIES_TOL: f64 = 1e-16;

const POWER_SERIES_MAX_ARG: f64 = 2.0;
const TAIL_TERM_FLOOR: f64 = 1e-20;
const RESCALE_AT: f64 = 1e250;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesselError {
    #[error("Bessel argument {0} outside the supported range |z| <= 1000")]
    ArgumentOutOfRange(f64),
    #[error("evolution size tau must be finite and non-negative, got {0}")]
    NegativeTau(f64),
    #[error("rounds must be 1 or 2, got {0}")]
    InvalidRounds(u8),
    #[error("segment count hint must be at least 1")]
    InvalidSegmentHint,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// Truncation and repetition parameters for one simulation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegmentSpec {
    /// Bessel argument per segment, `z <= 0`.
    pub z: f64,
    /// Per-segment cutoff `M`.
    pub cutoff: u64,
    /// Segments per (compound) segment, `r`.
    pub segments: u64,
    /// Compound segments `r'` for two-round plans.
    pub compound_segments: Option<u64>,
    /// Set for `tau = 0`, where the evolution is the identity.
    pub trivial: bool,
}

impl SegmentSpec {
    /// Total number of elementary segments, `r` or `r r'`.
    pub fn total_segments(&self) -> u64 {
        self.segments * self.compound_segments.unwrap_or(1)
    }

    /// `-z r` or `-z r r'`.
    pub fn tau(&self) -> f64 {
        -self.z * self.total_segments() as f64
    }
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn parity_sign(n: u64) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Ascending series `Σ_k (-1)^k (x/2)^{n+2k} / (k! (n+k)!)`.
fn power_series(n: u64, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
        if term == 0.0 {
            return 0.0;
        }
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 0u64;
    loop {
        k += 1;
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || k > 200 {
            break;
        }
    }
    sum
}

fn miller_start(n: u64, x: f64) -> u64 {
    let base = (n as f64).max(x.ceil());
    let start = base + 20.0 + (60.0 * base).sqrt();
    2 * (start as u64).div_ceil(2)
}

/// Downward recurrence `J_{k-1} = (2k/x) J_k - J_{k+1}`, normalised with
/// `J_0 + 2 Σ_k J_{2k} = 1`. Returns `J_0..=J_n_max`.
fn miller_sequence(n_max: u64, x: f64) -> Vec<f64> {
    let start = miller_start(n_max, x);
    let mut out = vec![0.0; n_max as usize + 1];
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut k = start;
    loop {
        if k <= n_max {
            out[k as usize] = cur;
        }
        if k.is_multiple_of(2) {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = (2.0 * k as f64 / x) * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > RESCALE_AT {
            cur /= RESCALE_AT;
            next /= RESCALE_AT;
            norm /= RESCALE_AT;
            for v in out.iter_mut() {
                *v /= RESCALE_AT;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

fn j_nonnegative(n: u64, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= POWER_SERIES_MAX_ARG {
        power_series(n, x)
    } else {
        miller_sequence(n, x)[n as usize]
    }
}

/// `J_m(z)` for integer `m` and real `|z| <= 1000`.
///
/// Evaluated for `m, z >= 0` and mapped through `J_{-m}(z) = (-1)^m J_m(z)`
/// and `J_m(-z) = (-1)^m J_m(z)`, so both parity identities hold exactly.
pub fn bessel_j(m: i64, z: f64) -> Result<f64, BesselError> {
    if !z.is_finite() || z.abs() > MAX_ARGUMENT {
        return Err(BesselError::ArgumentOutOfRange(z));
    }
    let n = m.unsigned_abs();
    let mut v = j_nonnegative(n, z.abs());
    if m < 0 {
        v *= parity_sign(n);
    }
    if z < 0.0 {
        v *= parity_sign(n);
    }
    Ok(v)
}

/// `J_0(z)..=J_{n_max}(z)`, sharing one recurrence pass for large arguments.
fn bessel_sequence(n_max: u64, z: f64) -> Result<Vec<f64>, BesselError> {
    if !z.is_finite() || z.abs() > MAX_ARGUMENT {
        return Err(BesselError::ArgumentOutOfRange(z));
    }
    let x = z.abs();
    let mut seq = if x == 0.0 || x <= POWER_SERIES_MAX_ARG {
        (0..=n_max).map(|n| j_nonnegative(n, x)).collect()
    } else {
        miller_sequence(n_max, x)
    };
    if z < 0.0 {
        for (n, v) in seq.iter_mut().enumerate() {
            *v *= parity_sign(n as u64);
        }
    }
    Ok(seq)
}

/// The truncated segment series `Σ_{m=-M}^{M} J_m(z) U^m`.
pub fn segment_series(z: f64, cutoff: u64) -> Result<LaurentSeries, BesselError> {
    let seq = bessel_sequence(cutoff, z)?;
    let m = cutoff as i64;
    let coeffs = (-m..=m)
        .map(|k| {
            let n = k.unsigned_abs();
            let v = seq[n as usize];
            let v = if k < 0 { v * parity_sign(n) } else { v };
            Complex64::new(v, 0.0)
        })
        .collect();
    Ok(LaurentSeries::from_dense(-m, coeffs))
}

/// `4 |z/2|^{M+1} / (M+1)!`, an upper bound on `Σ_{|m|>M} |J_m(z)|`.
pub fn bessel_tail_bound(z: f64, cutoff: u64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let k = cutoff + 1;
    let ln = 4f64.ln() + k as f64 * (0.5 * z.abs()).ln() - ln_factorial(k);
    ln.exp()
}

/// Smallest cutoff whose [`bessel_tail_bound`] is at most `tol`.
pub fn full_series_cutoff(z: f64, tol: f64) -> Result<u64, BesselError> {
    if !(tol > 0.0) {
        return Err(BesselError::InvalidTolerance(tol));
    }
    if !z.is_finite() || z.abs() > MAX_ARGUMENT {
        return Err(BesselError::ArgumentOutOfRange(z));
    }
    let mut cutoff = 0;
    while bessel_tail_bound(z, cutoff) > tol {
        cutoff += 1;
    }
    Ok(cutoff)
}

/// The untruncated series `Σ_m J_m(z) U^m`, cut where the analytic tail bound
/// drops below `tol`.
pub fn full_series(z: f64, tol: f64) -> Result<LaurentSeries, BesselError> {
    segment_series(z, full_series_cutoff(z, tol)?)
}

/// `Σ_{|m|>M} |J_m(z)|`, summed until the terms fall below `1e-20`.
pub fn tail_sum(z: f64, cutoff: u64) -> Result<f64, BesselError> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let x = z.abs();
    // past max(M, x) the terms decay faster than geometrically
    let mut n_max = cutoff.max(x.ceil() as u64) + 16;
    loop {
        let seq = bessel_sequence(n_max, x)?;
        if seq[n_max as usize].abs() < TAIL_TERM_FLOOR {
            let sum: f64 = seq[(cutoff as usize + 1)..].iter().map(|v| v.abs()).sum();
            return Ok(2.0 * sum);
        }
        n_max *= 2;
    }
}

/// `Σ_m |J_m(z)|` over all integers.
pub fn full_abs_sum(z: f64) -> Result<f64, BesselError> {
    Ok(bessel_j(0, z)?.abs() + tail_sum(z, 0)?)
}

/// Largest `|z|` with `Σ_m |J_m(z)| <= 2`, by bisection; the returned value
/// is the feasible end of the final bracket.
pub fn z_cap() -> f64 {
    static CAP: OnceLock<f64> = OnceLock::new();
    *CAP.get_or_init(|| {
        let f = |z: f64| full_abs_sum(z).expect("argument in range") - 2.0;
        let (mut lo, mut hi) = (1.0, 1.2);
        debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    })
}

/// Chooses `z` and the segment counts so that `z r = -tau` (one round) or
/// `z r r' = -tau` (two rounds) with `|z| <= z_cap`.
///
/// Two-round plans use `r = r_hint`, defaulting to `max(1, ceil(log2 tau))`.
/// The cutoff is set to its minimum of 2; the planner raises it.
pub fn select_z(tau: f64, rounds: u8, r_hint: Option<u64>) -> Result<SegmentSpec, BesselError> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(BesselError::NegativeTau(tau));
    }
    if rounds != 1 && rounds != 2 {
        return Err(BesselError::InvalidRounds(rounds));
    }
    if r_hint == Some(0) {
        return Err(BesselError::InvalidSegmentHint);
    }
    let compound = |r| if rounds == 2 { Some(r) } else { None };
    if tau == 0.0 {
        return Ok(SegmentSpec {
            z: 0.0,
            cutoff: 2,
            segments: r_hint.filter(|_| rounds == 2).unwrap_or(1),
            compound_segments: compound(1),
            trivial: true,
        });
    }
    let cap = z_cap();
    if rounds == 1 {
        let r = ((tau / cap).ceil() as u64).max(1);
        return Ok(SegmentSpec {
            z: -tau / r as f64,
            cutoff: 2,
            segments: r,
            compound_segments: None,
            trivial: false,
        });
    }
    let r = r_hint.unwrap_or_else(|| default_inner_segments(tau));
    let r_prime = ((tau / (r as f64 * cap)).ceil() as u64).max(1);
    Ok(SegmentSpec {
        z: -tau / (r * r_prime) as f64,
        cutoff: 2,
        segments: r,
        compound_segments: Some(r_prime),
        trivial: false,
    })
}

/// `max(1, ceil(log2 tau))`, the inner segment count of two-round plans.
pub fn default_inner_segments(tau: f64) -> u64 {
    if tau <= 1.0 {
        1
    } else {
        (tau.log2().ceil() as u64).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ascending power series with an independent factorial evaluation.
    fn oracle_j(m: u64, z: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..60u64 {
            let num = (-1f64).powi(k as i32) * (z / 2.0).powi((m + 2 * k) as i32);
            let den: f64 = (1..=k).map(|i| i as f64).product::<f64>()
                * (1..=(m + k)).map(|i| i as f64).product::<f64>();
            sum += num / den;
        }
        sum
    }

    #[test]
    fn small_values() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(3, 0.0).unwrap(), 0.0);
        let j11 = bessel_j(1, 1.0).unwrap();
        assert!((j11 - oracle_j(1, 1.0)).abs() < 1e-15);
        assert!((j11 - 0.4400505857).abs() < 1e-10);
        let jm3 = bessel_j(-3, 2.0).unwrap();
        assert!((jm3 + oracle_j(3, 2.0)).abs() < 1e-15);
        assert!((jm3 + 0.1289432).abs() < 1e-7);
    }

    #[test]
    fn parity_is_exact() {
        for &z in &[0.3, 1.7, 2.5, 9.0, 31.0] {
            for m in 0..40i64 {
                let p = bessel_j(m, z).unwrap();
                let s = parity_sign(m as u64);
                assert_eq!(bessel_j(-m, z).unwrap(), s * p);
                assert_eq!(bessel_j(m, -z).unwrap(), s * p);
            }
        }
    }

    #[test]
    fn power_series_and_recurrence_agree_on_overlap() {
        for &x in &[0.5, 1.0, 1.5, 2.0] {
            let seq = miller_sequence(40, x);
            for n in 0..=40u64 {
                assert!((seq[n as usize] - power_series(n, x)).abs() < 1e-14, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn out_of_range_argument() {
        assert!(matches!(bessel_j(0, 1e4), Err(BesselError::ArgumentOutOfRange(_))));
        assert!(matches!(bessel_j(0, f64::NAN), Err(BesselError::ArgumentOutOfRange(_))));
    }

    #[test]
    fn segment_series_examples() {
        let s = segment_series(0.0, 5).unwrap();
        assert!(s.approx_eq(&LaurentSeries::one(), 0.0));

        let s = segment_series(-1.0, 2).unwrap();
        let expect = [
            (0, oracle_j(0, 1.0)),
            (-1, oracle_j(1, 1.0)),
            (1, -oracle_j(1, 1.0)),
            (-2, oracle_j(2, 1.0)),
            (2, oracle_j(2, 1.0)),
        ];
        for (m, v) in expect {
            assert!((s.coeff(m).re - v).abs() < 1e-15, "m={m}");
        }
        assert!((s.coeff(0).re - 0.76520).abs() < 1e-5);
        assert!((s.coeff(-1).re - 0.44005).abs() < 1e-5);
        assert!((s.coeff(2).re - 0.11490).abs() < 1e-5);
        assert!(s.check_alternating_symmetry(0.0));
    }

    #[test]
    fn tail_sum_examples() {
        assert_eq!(tail_sum(0.0, 4).unwrap(), 0.0);
        let oracle: f64 = 2.0 * (3..30).map(|m| oracle_j(m, 1.0).abs()).sum::<f64>();
        let t = tail_sum(-1.0, 2).unwrap();
        assert!((t - oracle).abs() < 1e-15);
        assert!((t - 0.0446).abs() < 1e-4);
    }

    #[test]
    fn tail_bound_examples() {
        assert!((bessel_tail_bound(-1.0, 2) - 4.0 * 0.125 / 6.0).abs() < 1e-15);
        assert_eq!(bessel_tail_bound(0.0, 3), 0.0);
    }

    #[test]
    fn full_series_examples() {
        assert!(full_series(0.0, 1e-16).unwrap().approx_eq(&LaurentSeries::one(), 0.0));
        let m_big = full_series_cutoff(-1.0, 1e-16).unwrap();
        assert!(m_big <= 20);
        assert!(tail_sum(-1.0, m_big).unwrap() <= 1e-16);
        assert!(matches!(full_series(-1.0, 0.0), Err(BesselError::InvalidTolerance(_))));
    }

    #[test]
    fn select_z_examples() {
        let spec = select_z(0.0, 1, None).unwrap();
        assert!(spec.trivial);
        assert_eq!((spec.z, spec.segments), (0.0, 1));

        let cap = z_cap();
        assert!(cap > 1.0 && cap < 1.2);
        assert!(full_abs_sum(cap).unwrap() <= 2.0);
        assert!(full_abs_sum(cap + 1e-9).unwrap() > 2.0);

        let spec = select_z(2.2, 1, None).unwrap();
        assert_eq!(spec.segments, 2);
        assert!((spec.z + 1.1).abs() < 1e-15);

        let spec = select_z(16.0, 2, None).unwrap();
        assert_eq!(spec.segments, 4);
        assert_eq!(spec.compound_segments, Some(4));
        assert!((spec.tau() - 16.0).abs() < 1e-12);

        assert!(matches!(select_z(-1.0, 1, None), Err(BesselError::NegativeTau(_))));
        assert!(matches!(select_z(1.0, 3, None), Err(BesselError::InvalidRounds(3))));
    }
}
