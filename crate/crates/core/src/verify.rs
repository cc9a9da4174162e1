//! Property suites shared by `walkcorr verify` and the acceptance tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms;
use crate::bessel::{self, SegmentSpec};
use crate::correction;
use crate::hamiltonian::{QueryLedger, SparseHamiltonian};
use crate::linalg;
use crate::planner;
use crate::runner::RunError;
use crate::series::{LaurentSeries, UnitaryStep};
use crate::walk::WalkSpace;

pub const SUITES: [&str; 5] = ["series", "bessel", "walk", "correction", "planner"];

/// Absolute slack for the s-functional laws.
pub const LAW_TOL: f64 = 1e-12;
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Multiplicative slack for first-order ("up to higher-order terms") bounds.
pub const FIRST_ORDER_SLACK: f64 = 1.05;
/// Multiplicative slack for asymptotic tail bounds.
pub const TAIL_SLACK: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(suite: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{:<10} {:<48} {:>12.4e} <= {:<10.3e} {}",
            self.suite,
            self.name,
            self.value,
            self.threshold,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

pub fn run_verify(suite: &str) -> Result<Vec<Check>, RunError> {
    let run = |s: &str| -> Vec<Check> {
        match s {
            "series" => suite_series(),
            "bessel" => suite_bessel(),
            "walk" => suite_walk(),
            "correction" => suite_correction(),
            _ => suite_planner(),
        }
    };
    match suite {
        "all" => Ok(SUITES.iter().flat_map(|s| run(s)).collect()),
        s if SUITES.contains(&s) => Ok(run(s)),
        other => Err(RunError::Config(format!(
            "unknown suite {other:?}; expected one of series, bessel, walk, correction, planner, all"
        ))),
    }
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// A random series with up to `max_len` terms starting within `±max_offset`.
pub fn random_series(rng: &mut ChaCha8Rng, max_len: usize, max_offset: i64) -> LaurentSeries {
    let len = rng.gen_range(1..=max_len);
    let lo = rng.gen_range(-max_offset..=max_offset);
    LaurentSeries::from_dense(lo, (0..len).map(|_| random_complex(rng)).collect())
}

/// Largest violations of subadditivity, disjoint-support additivity and
/// submultiplicativity of the s-functional over `pairs` random pairs.
pub fn s_norm_law_violations(pairs: usize, seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    for _ in 0..pairs {
        let f = random_series(&mut rng, 12, 8);
        let g = random_series(&mut rng, 12, 8);
        let (sf, sg) = (f.s_norm(), g.s_norm());
        worst[0] = worst[0].max((&f + &g).s_norm() - (sf + sg));
        // shift g past the support of f
        let (_, hi) = f.support().expect("nonzero");
        let (glo, _) = g.support().expect("nonzero");
        let shifted = g.mul(&LaurentSeries::monomial(hi + 1 - glo, Complex64::new(1.0, 0.0)));
        worst[1] = worst[1].max(((&f + &shifted).s_norm() - (sf + sg)).abs());
        worst[2] = worst[2].max(f.mul(&g).s_norm() - sf * sg);
    }
    worst
}

pub fn suite_series() -> Vec<Check> {
    let [sub, disjoint, submul] = s_norm_law_violations(1000, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut adjoint = 0.0f64;
    let mut symmetric_products = 0.0f64;
    for _ in 0..200 {
        let f = random_series(&mut rng, 10, 6);
        adjoint = adjoint.max((f.adjoint().s_norm() - f.s_norm()).abs());
        adjoint = adjoint.max(f.adjoint().adjoint().max_abs_diff(&f));
        let z1 = -rng.gen_range(0.0..1.1);
        let z2 = -rng.gen_range(0.0..1.1);
        let a = bessel::segment_series(z1, rng.gen_range(1..6)).expect("z in range");
        let b = bessel::segment_series(z2, rng.gen_range(1..6)).expect("z in range");
        let prod = &a.mul(&b.adjoint()).mul(&a) + &a.scale_real(0.5);
        symmetric_products = symmetric_products.max(prod.alternating_symmetry_defect());
    }
    vec![
        Check::at_most("series", "subadditivity (1000 pairs)", sub, LAW_TOL),
        Check::at_most("series", "disjoint-support additivity (1000 pairs)", disjoint, LAW_TOL),
        Check::at_most("series", "submultiplicativity (1000 pairs)", submul, LAW_TOL),
        Check::at_most("series", "adjoint preserves s and is an involution", adjoint, LAW_TOL),
        Check::at_most("series", "alternating symmetry closed under algebra", symmetric_products, SYMMETRY_TOL),
    ]
}

pub fn suite_bessel() -> Vec<Check> {
    let zs = [-0.1, -0.8, -1.0, -1.9, -2.0, -2.1, -3.5, -8.0, -20.0];
    let mut parity = 0.0f64;
    let mut normalisation = 0.0f64;
    let mut generating = 0.0f64;
    for &z in &zs {
        let full = bessel::full_series(z, bessel::EXACT_SERIES_TOL).expect("z in range");
        parity = parity.max(full.alternating_symmetry_defect());
        let mut even = 0.0;
        for k in 1..200 {
            even += bessel::bessel_j(2 * k, z).expect("z in range");
        }
        normalisation = normalisation.max((bessel::bessel_j(0, z).unwrap() + 2.0 * even - 1.0).abs());
        for theta in [0.3f64, 1.1, 2.5] {
            let mu = Complex64::from_polar(1.0, theta);
            let lhs: Complex64 = full.iter().map(|(m, c)| c * mu.powi(m as i32)).sum();
            let rhs = Complex64::from_polar(1.0, z * theta.sin());
            generating = generating.max((lhs - rhs).norm());
        }
    }
    let v = bessel::full_series(-0.8, bessel::EXACT_SERIES_TOL).unwrap();
    let addition = (&v.powi(3) - &bessel::full_series(-2.4, bessel::EXACT_SERIES_TOL).unwrap()).s_norm();
    let cap = bessel::z_cap();
    let cap_sum = (bessel::full_abs_sum(-cap).unwrap() - 2.0).abs();
    vec![
        Check::at_most("bessel", "parity J_{-m} = (-1)^m J_m", parity, 0.0),
        Check::at_most("bessel", "J_0 + 2 sum J_2k = 1", normalisation, 1e-13),
        Check::at_most("bessel", "generating function on the unit circle", generating, 1e-12),
        Check::at_most("bessel", "addition V(z)^3 = V(3z)", addition, 1e-10),
        Check::at_most("bessel", "sum |J_m(z_cap)| = 2", cap_sum, 1e-12),
    ]
}

/// `(n, d, seed)` triples of the acceptance grid. Combinations with
/// `d > 2^n` are skipped.
pub fn grid_parameters() -> Vec<(u32, usize, u64)> {
    let mut out = Vec::new();
    for n in 1..=3u32 {
        for d in [1usize, 2, 4] {
            if d > 1 << n {
                continue;
            }
            for seed in 1..=5u64 {
                out.push((n, d, seed));
            }
        }
    }
    out
}

pub fn grid_hamiltonians() -> Vec<SparseHamiltonian> {
    grid_parameters()
        .into_iter()
        .map(|(n, d, seed)| SparseHamiltonian::random_sparse(n, d, seed).expect("feasible grid point"))
        .collect()
}

/// Largest spectral-map residual and Bessel generating-function residual
/// for evolution `tau`.
pub fn spectral_identity(h: &SparseHamiltonian, tau: f64) -> Result<(f64, f64), RunError> {
    let walk = WalkSpace::build(h)?;
    let report = walk.verify_spectral_map(tau / walk.spectral_scale())?;
    Ok((report.max_residual(), report.max_bessel_residual()))
}

/// Dense invariants of the walk: `||T^dag T - 1||`, `||U^dag U - 1||`,
/// `||U - iS(2TT^dag - 1)||` and `||T^dag S T|_0 - H/(Xd)||`.
pub fn walk_invariants(h: &SparseHamiltonian) -> Result<[f64; 4], RunError> {
    let walk = WalkSpace::build(h)?;
    let t = walk.dense_t();
    let s = walk.dense_swap();
    let u = walk.dense_u();
    let w = walk.walk_dim();
    let id = DMatrix::<Complex64>::identity(w, w);
    let formula = &s * (&t * t.adjoint() * Complex64::new(2.0, 0.0) - &id) * Complex64::new(0.0, 1.0);
    let tst = t.adjoint() * &s * &t;
    let dim = h.dim();
    let block = DMatrix::from_fn(dim, dim, |a, b| tst[(2 * a, 2 * b)]);
    let target = h.to_dense() / Complex64::new(walk.spectral_scale(), 0.0);
    Ok([
        linalg::isometry_defect(&t),
        linalg::isometry_defect(&u),
        linalg::spectral_norm(&(u - formula)),
        linalg::spectral_norm(&(block - target)),
    ])
}

/// Compares the flagged blocks of `lcu_apply` and `oaa_apply` against the
/// series predictions `(F/s)(U) psi` and `oaa(F)(U) psi` on random cases
/// with `M <= 4` and `n <= 2`. Returns the largest deviations.
pub fn statevector_bridge(cases: usize, seed: u64) -> Result<(f64, f64), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lcu, mut oaa) = (0.0f64, 0.0f64);
    for case in 0..cases {
        let n = rng.gen_range(1..=2u32);
        let d = rng.gen_range(1..=(1usize << n));
        let h = SparseHamiltonian::random_sparse(n, d, seed.wrapping_mul(1000) + case as u64)?;
        let walk = WalkSpace::build(&h)?;
        let m = rng.gen_range(0..=4i64);
        let raw = LaurentSeries::from_dense(-m, (0..=2 * m).map(|_| random_complex(&mut rng)).collect());
        let f = raw.scale_real(rng.gen_range(0.2..2.0) / raw.s_norm());
        let psi = DVector::from_fn(walk.walk_dim(), |_, _| random_complex(&mut rng)).normalize();
        let col = DMatrix::from_column_slice(psi.len(), 1, psi.as_slice());
        let mut ledger = QueryLedger::new();

        let out = walk.lcu_apply(&f, &psi, &mut ledger)?;
        let predicted = f.scale_real(1.0 / f.s_norm()).eval_operator(&walk, &col)?;
        lcu = lcu.max((out.flagged - predicted.column(0)).norm());

        let out = walk.oaa_apply(&f, &psi, &mut ledger)?;
        let predicted = correction::oaa_series(&f).eval_operator(&walk, &col)?;
        oaa = oaa.max((out - predicted.column(0)).norm());
        // the walk itself agrees with its inverse
        let back = walk.apply_inverse(&walk.apply(&col));
        lcu = lcu.max((back - &col).norm());
    }
    Ok((lcu, oaa))
}

pub fn suite_walk() -> Vec<Check> {
    let hams = grid_hamiltonians();
    let mut inv = [0.0f64; 4];
    let (mut spectral, mut generating) = (0.0f64, 0.0f64);
    let mut failures = 0.0;
    for h in &hams {
        if h.qubits() <= 2 {
            match walk_invariants(h) {
                Ok(v) => (0..4).for_each(|i| inv[i] = inv[i].max(v[i])),
                Err(_) => failures += 1.0,
            }
        }
        match spectral_identity(h, 4.0) {
            Ok((a, b)) => {
                spectral = spectral.max(a);
                generating = generating.max(b);
            }
            Err(_) => failures += 1.0,
        }
    }
    let (lcu, oaa) = statevector_bridge(20, 11).unwrap_or((f64::INFINITY, f64::INFINITY));
    vec![
        Check::at_most("walk", "grid walks built without error", failures, 0.0),
        Check::at_most("walk", "T^dag T = 1", inv[0], 1e-12),
        Check::at_most("walk", "U^dag U = 1", inv[1], 1e-12),
        Check::at_most("walk", "U = iS(2TT^dag - 1)", inv[2], 1e-12),
        Check::at_most("walk", "T^dag S T block = H/(Xd)", inv[3], 1e-12),
        Check::at_most("walk", "spectral map residual", spectral, 1e-10),
        Check::at_most("walk", "Bessel identity at mapped eigenvalues", generating, 1e-10),
        Check::at_most("walk", "LCU flagged block vs series (20 cases)", lcu, 1e-12),
        Check::at_most("walk", "OAA flagged block vs series (20 cases)", oaa, 1e-12),
    ]
}

fn exact(z: f64) -> LaurentSeries {
    bessel::full_series(z, bessel::EXACT_SERIES_TOL).expect("z in range")
}

/// First-round correction for `(z, M, r)` with cutoff `N = 3rM`, verified
/// against the exact evolution over `r` segments.
pub fn first_round(z: f64, cutoff: u64, r: u64) -> Result<correction::CorrectionResult, RunError> {
    let v = exact(z);
    let vt = bessel::segment_series(z, cutoff)?;
    let w = correction::w_first(&v, &vt);
    let mut res = correction::correction_first(&w, r, algorithms::CORRECTION_TOL, 3 * r * cutoff)?;
    correction::verify_first(&vt, &mut res, r, z)?;
    Ok(res)
}

/// Result of the second round for `(z, M, r, r')`.
pub struct SecondRoundCheck {
    pub first: correction::CorrectionResult,
    pub second: correction::CorrectionResult,
    pub route_defect: f64,
    pub symmetry_defect: f64,
}

pub fn second_round(z: f64, cutoff: u64, r: u64, r_prime: u64) -> Result<SecondRoundCheck, RunError> {
    let v = exact(z);
    let vt = bessel::segment_series(z, cutoff)?;
    let first = first_round(z, cutoff, r)?;
    let chain = correction::second_round_chain(&first, &v, &vt, r)?;
    let mut second = correction::correction_second(
        &chain.w_prime,
        r_prime,
        algorithms::CORRECTION_TOL,
        9 * r * r_prime * cutoff,
    )?;
    correction::verify_second(&chain.vt_prime, &mut second, r_prime, z * r as f64)?;
    let symmetry_defect = [
        &chain.v_prime,
        &chain.vt_prime,
        &chain.delta_prime,
        &chain.w_prime,
        &second.series,
        &second.truncated,
    ]
    .iter()
    .map(|s| s.alternating_symmetry_defect())
    .fold(0.0, f64::max);
    Ok(SecondRoundCheck {
        first,
        second,
        route_defect: chain.route_defect,
        symmetry_defect,
    })
}

/// Worst ratios (computed / bound) of the first-round bounds on the
/// grid `z in {-0.4, -0.8, -1.0}`, `M in {2, 3, 4}`, `r in 1..=8`:
/// `[Σ|a_m|, |a_m| for |m| > M, tail beyond N = 3rM]`, plus the worst
/// symmetry defect and `W` route disagreement.
pub fn first_round_bound_grid() -> Result<[f64; 5], RunError> {
    let zeta = planner::solve_constants().zeta;
    let mut worst = [0.0f64; 5];
    for z in [-0.4, -0.8, -1.0] {
        let v = exact(z);
        for cutoff in 2..=4u64 {
            let vt = bessel::segment_series(z, cutoff)?;
            let delta = &v - &vt;
            let w = correction::w_first(&v, &vt);
            worst[4] = worst[4].max((&w - &correction::w_first_expanded(&vt, &delta)).s_norm());
            let tail = bessel::tail_sum(z, cutoff)?;
            let ln_x = (z.abs() * zeta / cutoff as f64).ln();
            for r in 1..=8u64 {
                let n = 3 * r * cutoff;
                let res = correction::correction_first(&w, r, algorithms::CORRECTION_TOL, n)?;
                let sum_bound = (1.0 - 2.0 * tail).powi(-(r as i32));
                worst[0] = worst[0].max(res.s_total / sum_bound);
                for (m, c) in res.series.iter() {
                    if m.unsigned_abs() > cutoff {
                        let bound = (r as f64 * std::f64::consts::LN_2 + m.unsigned_abs() as f64 * ln_x).exp();
                        worst[1] = worst[1].max(c.norm() / bound);
                    }
                }
                let spec = SegmentSpec {
                    z,
                    cutoff,
                    segments: r,
                    compound_segments: None,
                    trivial: false,
                };
                let tail_bound = planner::certify_bounds(&spec, n, None)?.first_tail_bound;
                worst[2] = worst[2].max(res.series.tail_mass(n) / tail_bound);
                worst[3] = worst[3]
                    .max(res.series.alternating_symmetry_defect())
                    .max(res.truncated.alternating_symmetry_defect());
            }
        }
    }
    Ok(worst)
}

/// Worst ratios for the second-round bounds on `z = -0.8`, `M in {2, 3}`,
/// `r, r' in {2, 3}`: `[Σ|a'_m| / (1 - 2 Σ_{|m|>N}|a_m|)^{-r'},
/// tail beyond N' / second-round tail bound]`, plus the worst route defect.
pub fn second_round_bound_grid() -> Result<[f64; 3], RunError> {
    let mut worst = [0.0f64; 3];
    for cutoff in 2..=3u64 {
        for r in 2..=3u64 {
            for rp in 2..=3u64 {
                let check = second_round(-0.8, cutoff, r, rp)?;
                let n = 3 * r * cutoff;
                let n_prime = 9 * r * rp * cutoff;
                let first_tail = check.first.series.tail_mass(n);
                let sum_bound = (1.0 - 2.0 * first_tail).powi(-(rp as i32));
                worst[0] = worst[0].max(check.second.s_total / sum_bound);
                let spec = SegmentSpec {
                    z: -0.8,
                    cutoff,
                    segments: r,
                    compound_segments: Some(rp),
                    trivial: false,
                };
                let tail_bound = planner::certify_bounds(&spec, n, Some(n_prime))?
                    .second_tail_bound
                    .expect("two-round bound");
                worst[1] = worst[1].max(check.second.series.tail_mass(n_prime) / tail_bound);
                worst[2] = worst[2].max(check.route_defect);
            }
        }
    }
    Ok(worst)
}

/// Largest first-round identity residual over `z in {-0.4, -0.8}`,
/// `M in {2, 3}`, `r in 1..=5`, and the largest symmetry defect seen.
pub fn correction_identity_grid() -> Result<(f64, f64), RunError> {
    let (mut resid, mut sym) = (0.0f64, 0.0f64);
    for z in [-0.4, -0.8] {
        for cutoff in 2..=3u64 {
            for r in 1..=5u64 {
                let res = first_round(z, cutoff, r)?;
                resid = resid.max(res.residual);
                sym = sym
                    .max(res.series.alternating_symmetry_defect())
                    .max(res.truncated.alternating_symmetry_defect());
            }
        }
    }
    Ok((resid, sym))
}

pub fn suite_correction() -> Vec<Check> {
    let mut checks = Vec::new();
    match correction_identity_grid() {
        Ok((resid, sym)) => {
            checks.push(Check::at_most("correction", "V_C V_oaa^r = V(zr) on grid", resid, 1e-8));
            checks.push(Check::at_most("correction", "symmetry of V_C and its truncation", sym, SYMMETRY_TOL));
        }
        Err(e) => checks.push(failed("correction", "first-round identity grid", &e)),
    }
    match second_round(-0.8, 2, 3, 2) {
        Ok(c) => {
            checks.push(Check::at_most("correction", "V_C' (V_oaa')^r' = V(zrr')", c.second.residual, 1e-6));
            checks.push(Check::at_most("correction", "second-round series symmetry", c.symmetry_defect, SYMMETRY_TOL));
        }
        Err(e) => checks.push(failed("correction", "second-round identity", &e)),
    }
    match first_round_bound_grid() {
        Ok(w) => {
            checks.push(Check::at_most("correction", "sum |a_m| / first-round bound", w[0], FIRST_ORDER_SLACK));
            checks.push(Check::at_most("correction", "|a_m| / coefficient decay bound", w[1], FIRST_ORDER_SLACK));
            checks.push(Check::at_most("correction", "tail beyond N / first-round tail bound", w[2], TAIL_SLACK));
            checks.push(Check::at_most("correction", "symmetry across bound grid", w[3], SYMMETRY_TOL));
            checks.push(Check::at_most("correction", "W: direct vs expanded form", w[4], correction::ROUTE_TOL));
        }
        Err(e) => checks.push(failed("correction", "first-round bound grid", &e)),
    }
    match second_round_bound_grid() {
        Ok(w) => {
            checks.push(Check::at_most("correction", "sum |a'_m| / second-round bound", w[0], TAIL_SLACK));
            checks.push(Check::at_most("correction", "tail beyond N' / second-round tail bound", w[1], TAIL_SLACK));
            checks.push(Check::at_most("correction", "W': direct vs factored form", w[2], correction::ROUTE_TOL));
        }
        Err(e) => checks.push(failed("correction", "second-round bound grid", &e)),
    }
    checks
}

fn failed(suite: &'static str, name: &str, err: &RunError) -> Check {
    let mut c = Check::at_most(suite, format!("{name}: {err}"), f64::INFINITY, 0.0);
    c.pass = false;
    c
}

/// `W(1/e)` by bisection on `w e^w = 1/e`.
pub fn lambert_w_inv_e() -> f64 {
    let target = (-1.0f64).exp();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The four constant checks: both residuals, agreement of `ζ` with
/// `1/(2 W(1/e))`, and `|ζ' - 1.52937|`.
pub fn constant_checks() -> [f64; 4] {
    let c = planner::solve_constants();
    [
        planner::zeta_equation(c.zeta).abs(),
        planner::zeta_prime_equation(c.zeta_prime).abs(),
        (c.zeta - 1.0 / (2.0 * lambert_w_inv_e())).abs(),
        (c.zeta_prime - 1.52937).abs(),
    ]
}

pub const SCALING_TAUS: [f64; 5] = [2.0, 4.0, 8.0, 16.0, 32.0];

/// Largest excess of single-round `M` over `2 ln τ / ln ln τ + 4` (τ ≥ 4)
/// and of double-round `M` over single-round `M`, at `ε = 1e-4`.
pub fn scaling_excess() -> Result<(f64, f64), RunError> {
    let (mut growth, mut double) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for tau in SCALING_TAUS {
        let single = planner::plan_single(tau, 1e-4)?;
        let two = planner::plan_double(tau, 1e-4)?;
        if tau >= 4.0 {
            let bound = 2.0 * tau.ln() / tau.ln().ln() + 4.0;
            growth = growth.max(single.spec.cutoff as f64 - bound);
        }
        double = double.max(two.spec.cutoff as f64 - single.spec.cutoff as f64);
    }
    Ok((growth, double))
}

pub fn suite_planner() -> Vec<Check> {
    let [zr, zpr, lambert, reference] = constant_checks();
    let mut checks = vec![
        Check::at_most("planner", "zeta residual", zr, 1e-12),
        Check::at_most("planner", "zeta' residual", zpr, 1e-12),
        Check::at_most("planner", "zeta vs 1/(2 W(1/e))", lambert, 1e-9),
        Check::at_most("planner", "zeta' vs 1.52937", reference, 5e-6),
    ];
    let mut violations = 0.0;
    let mut ledger_mismatch = 0.0;
    for tau in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        for eps in [1e-3, 1e-4, 1e-8] {
            for rounds in [1u8, 2] {
                let plan = if rounds == 1 {
                    planner::plan_single(tau, eps)
                } else {
                    planner::plan_double(tau, eps)
                };
                let Ok(plan) = plan else {
                    violations += 1.0;
                    continue;
                };
                let ok = planner::certify_bounds(&plan.spec, plan.n, plan.n_prime).is_ok_and(|b| {
                    let base = b.lcu_s_bound <= 2.0 && plan.n == 3 * plan.spec.segments * plan.spec.cutoff;
                    match (b.second_lcu_s_bound, b.second_tail_bound) {
                        (Some(s6), Some(t7)) => base && s6 <= 2.0 && t7 <= eps,
                        _ => base && b.first_tail_bound <= eps,
                    }
                }) && plan.predicted_error <= eps
                    && plan.spec.tau() == tau;
                if !ok {
                    violations += 1.0;
                }
                let mut ledger = QueryLedger::new();
                algorithms::charge_corrected(&mut ledger, &plan);
                if ledger.oracle_queries() != plan.predicted_queries() {
                    ledger_mismatch += 1.0;
                }
            }
        }
    }
    checks.push(Check::at_most("planner", "plans re-certify (36 plans)", violations, 0.0));
    checks.push(Check::at_most("planner", "ledger equals predicted queries", ledger_mismatch, 0.0));
    match scaling_excess() {
        Ok((growth, double)) => {
            checks.push(Check::at_most("planner", "single M <= 2 ln tau / ln ln tau + 4", growth, 0.0));
            checks.push(Check::at_most("planner", "double-round M <= single-round M", double, 0.0));
        }
        Err(e) => checks.push(failed("planner", "scaling grid", &e)),
    }
    checks
}
