//! Formal bilateral (Laurent) series in the walk step `U`.
//!
//! Every operator the algorithms build is a finite linear combination of
//! integer powers of a single unitary, so it is represented by its
//! coefficient sequence `F = Σ_m F_m U^m`. Products of such operators commute
//! and reduce to Cauchy convolution of the coefficients; the adjoint maps
//! `F_m` to `conj(F_{-m})`.
//!
//! Coefficients are stored densely over the support hull `[lo, lo + len)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Default per-coefficient absolute tolerance for [`LaurentSeries::approx_eq`].
pub const DEFAULT_EQ_TOL: f64 = 1e-14;

/// Magnitudes below this are dropped by [`LaurentSeries::prune`] when no
/// explicit threshold is given. Small enough that it never fires in practice.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-300;

const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("real evaluation point must be positive, got {0}")]
    Domain(f64),
    #[error("operator must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator is not unitary: ||U^dag U - I|| = {0:e}")]
    NotUnitary(f64),
    #[error("block has {block} rows but the operator acts on dimension {dim}")]
    Shape { dim: usize, block: usize },
}

/// A unitary that can be applied (and inverted) on a block of column vectors.
///
/// Dense matrices implement it directly; the walk operator implements it
/// through its sparse factors so that powers never materialise a matrix.
pub trait UnitaryStep {
    fn dim(&self) -> usize;
    fn apply(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64>;
    fn apply_inverse(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64>;
}

impl UnitaryStep for DMatrix<Complex64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self * block
    }

    fn apply_inverse(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.ad_mul(block)
    }
}

/// Finite-support series `Σ_m F_m U^m` with complex coefficients.
#[derive(Clone, Default, PartialEq)]
pub struct LaurentSeries {
    lo: i64,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

impl LaurentSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, Complex64::new(1.0, 0.0))
    }

    pub fn monomial(power: i64, c: Complex64) -> Self {
        Self::from_dense(power, vec![c])
    }

    /// Builds a series from a dense coefficient run starting at power `lo`.
    pub fn from_dense(lo: i64, coeffs: Vec<Complex64>) -> Self {
        let mut s = Self { lo, coeffs };
        s.trim_zero_ends();
        s
    }

    /// Builds a series from `(power, coefficient)` pairs; repeated powers add.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let Some(lo) = pairs.iter().map(|p| p.0).min() else {
            return Self::zero();
        };
        let hi = pairs.iter().map(|p| p.0).max().unwrap_or(lo);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (m, c) in pairs {
            coeffs[(m - lo) as usize] += c;
        }
        Self::from_dense(lo, coeffs)
    }

    /// Real-coefficient convenience constructor.
    pub fn from_real_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        Self::from_pairs(pairs.into_iter().map(|(m, c)| (m, Complex64::new(c, 0.0))))
    }

    fn trim_zero_ends(&mut self) {
        let zero = Complex64::new(0.0, 0.0);
        let lead = self.coeffs.iter().take_while(|c| **c == zero).count();
        if lead == self.coeffs.len() {
            self.coeffs.clear();
            self.lo = 0;
            return;
        }
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.lo += lead as i64;
        }
        while self.coeffs.last() == Some(&zero) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient at power `m`; exactly zero outside the stored hull.
    pub fn coeff(&self, m: i64) -> Complex64 {
        let idx = m - self.lo;
        if idx < 0 || idx >= self.coeffs.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// Inclusive `(lowest, highest)` stored power, `None` for the zero series.
    pub fn support(&self) -> Option<(i64, i64)> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some((self.lo, self.lo + self.coeffs.len() as i64 - 1))
        }
    }

    /// Largest `|m|` in the support (0 for the zero series).
    pub fn max_abs_power(&self) -> u64 {
        self.support()
            .map(|(lo, hi)| lo.unsigned_abs().max(hi.unsigned_abs()))
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.lo + i as i64, *c))
    }

    /// `alpha * f + beta * g`.
    pub fn combine(alpha: Complex64, f: &Self, beta: Complex64, g: &Self) -> Self {
        let (lo, hi) = match (f.support(), g.support()) {
            (None, None) => return Self::zero(),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => (a.0.min(b.0), a.1.max(b.1)),
        };
        let coeffs = (lo..=hi)
            .map(|m| alpha * f.coeff(m) + beta * g.coeff(m))
            .collect();
        Self::from_dense(lo, coeffs)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_dense(self.lo, self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Cauchy product over exponents, evaluated densely over the support hull.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let (a, b) = (&self.coeffs, &other.coeffs);
        let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for (o, y) in out[i..i + b.len()].iter_mut().zip(b) {
                *o += x * y;
            }
        }
        Self::from_dense(self.lo + other.lo, out)
    }

    /// `F^k` for `k >= 0`, by binary powering.
    pub fn powi(&self, k: u32) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// `(Σ c_m U^m)^dag = Σ conj(c_m) U^{-m}` for unitary `U`.
    pub fn adjoint(&self) -> Self {
        let Some((_, hi)) = self.support() else {
            return Self::zero();
        };
        Self::from_dense(-hi, self.coeffs.iter().rev().map(|c| c.conj()).collect())
    }

    /// Keeps exactly the coefficients with `|m| <= cutoff`.
    pub fn truncate(&self, cutoff: u64) -> Self {
        let Some((lo, hi)) = self.support() else {
            return Self::zero();
        };
        let c = cutoff.min(i64::MAX as u64) as i64;
        let (new_lo, new_hi) = (lo.max(-c), hi.min(c));
        if new_lo > new_hi {
            return Self::zero();
        }
        let start = (new_lo - lo) as usize;
        let end = (new_hi - lo) as usize + 1;
        Self::from_dense(new_lo, self.coeffs[start..end].to_vec())
    }

    /// The s-functional `Σ_m |F_m|`.
    pub fn s_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// `Σ_{|m| > cutoff} |F_m|`.
    pub fn tail_mass(&self, cutoff: u64) -> f64 {
        self.iter()
            .filter(|(m, _)| m.unsigned_abs() > cutoff)
            .map(|(_, c)| c.norm())
            .sum()
    }

    /// Truncates at the smallest symmetric cutoff whose discarded mass is at
    /// most `mass_tol`. Symmetric cutoffs preserve alternating symmetry.
    pub fn truncate_to_mass(&self, mass_tol: f64) -> Self {
        let max = self.max_abs_power();
        // mass at each |m|, accumulated from the outside in
        let mut by_abs = vec![0.0; max as usize + 1];
        for (m, c) in self.iter() {
            by_abs[m.unsigned_abs() as usize] += c.norm();
        }
        let mut dropped = 0.0;
        let mut cutoff = max;
        while cutoff > 0 {
            let next = dropped + by_abs[cutoff as usize];
            if next > mass_tol {
                break;
            }
            dropped = next;
            cutoff -= 1;
        }
        self.truncate(cutoff)
    }

    /// Coefficient-wise `|F_m|`.
    pub fn abs_series(&self) -> Self {
        Self::from_dense(
            self.lo,
            self.coeffs
                .iter()
                .map(|c| Complex64::new(c.norm(), 0.0))
                .collect(),
        )
    }

    /// Drops coefficients with magnitude below `threshold`. Opt-in only: no
    /// other operation prunes.
    pub fn prune(&self, threshold: f64) -> Self {
        Self::from_dense(
            self.lo,
            self.coeffs
                .iter()
                .map(|c| {
                    if c.norm() < threshold {
                        Complex64::new(0.0, 0.0)
                    } else {
                        *c
                    }
                })
                .collect(),
        )
    }

    /// `Σ_m F_m x^m` at a positive real point.
    pub fn eval_real(&self, x: f64) -> Result<Complex64, SeriesError> {
        if !(x > 0.0) {
            return Err(SeriesError::Domain(x));
        }
        let ln_x = x.ln();
        Ok(self
            .iter()
            .map(|(m, c)| c * (m as f64 * ln_x).exp())
            .sum())
    }

    /// Coefficient-wise comparison with an absolute tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// `max_m |F_m - G_m|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let diff = self - other;
        diff.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `c_{-n} = (-1)^n c_n` over the support.
    pub fn alternating_symmetry_defect(&self) -> f64 {
        self.iter()
            .map(|(n, c)| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                (self.coeff(-n) - c * sign).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn check_alternating_symmetry(&self, tol: f64) -> bool {
        self.alternating_symmetry_defect() <= tol
    }

    /// Applies `Σ_m F_m U^m` to `block` using incremental powering: at most
    /// `max m` forward and `max(-m)` inverse applications of the step.
    pub fn eval_operator<S: UnitaryStep + ?Sized>(
        &self,
        step: &S,
        block: &DMatrix<Complex64>,
    ) -> Result<DMatrix<Complex64>, SeriesError> {
        if block.nrows() != step.dim() {
            return Err(SeriesError::Shape {
                dim: step.dim(),
                block: block.nrows(),
            });
        }
        let mut acc = DMatrix::zeros(block.nrows(), block.ncols());
        let Some((lo, hi)) = self.support() else {
            return Ok(acc);
        };
        let c0 = self.coeff(0);
        if c0 != Complex64::new(0.0, 0.0) {
            acc += block * c0;
        }
        let mut fwd = block.clone();
        for m in 1..=hi.max(0) {
            fwd = step.apply(&fwd);
            let c = self.coeff(m);
            if c != Complex64::new(0.0, 0.0) {
                acc += &fwd * c;
            }
        }
        let mut back = block.clone();
        for m in 1..=(-lo).max(0) {
            back = step.apply_inverse(&back);
            let c = self.coeff(-m);
            if c != Complex64::new(0.0, 0.0) {
                acc += &back * c;
            }
        }
        Ok(acc)
    }

    /// `Σ_m F_m U^m` for a dense unitary `U`.
    pub fn eval_matrix(&self, u: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, SeriesError> {
        if u.nrows() != u.ncols() {
            return Err(SeriesError::NotSquare {
                rows: u.nrows(),
                cols: u.ncols(),
            });
        }
        let n = u.nrows();
        let deviation = (u.ad_mul(u) - DMatrix::<Complex64>::identity(n, n)).norm();
        if deviation > UNITARITY_TOL {
            return Err(SeriesError::NotUnitary(deviation));
        }
        self.eval_operator(u, &DMatrix::identity(n, n))
    }
}

impl Add for &LaurentSeries {
    type Output = LaurentSeries;
    fn add(self, rhs: &LaurentSeries) -> LaurentSeries {
        let one = Complex64::new(1.0, 0.0);
        LaurentSeries::combine(one, self, one, rhs)
    }
}

impl Sub for &LaurentSeries {
    type Output = LaurentSeries;
    fn sub(self, rhs: &LaurentSeries) -> LaurentSeries {
        LaurentSeries::combine(Complex64::new(1.0, 0.0), self, Complex64::new(-1.0, 0.0), rhs)
    }
}

impl Neg for &LaurentSeries {
    type Output = LaurentSeries;
    fn neg(self) -> LaurentSeries {
        self.scale_real(-1.0)
    }
}

impl Mul for &LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: &LaurentSeries) -> LaurentSeries {
        LaurentSeries::mul(self, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> Complex64 {
        c(1.0, 0.0)
    }

    fn real(pairs: &[(i64, f64)]) -> LaurentSeries {
        LaurentSeries::from_real_pairs(pairs.iter().copied())
    }

    #[test]
    fn combine_examples() {
        let a = real(&[(0, 1.0)]);
        assert!(LaurentSeries::combine(one(), &a, one(), &a).approx_eq(&real(&[(0, 2.0)]), 0.0));

        let f = real(&[(-1, 0.5), (1, -0.5)]);
        let merged = LaurentSeries::combine(one(), &f, one(), &a);
        assert!(merged.approx_eq(&real(&[(-1, 0.5), (0, 1.0), (1, -0.5)]), 0.0));

        let g = real(&[(-3, 0.25), (2, 1.5)]);
        let zero = LaurentSeries::combine(one(), &g, -one(), &g);
        assert!(zero.is_zero());
        assert_eq!(zero.s_norm(), 0.0);
    }

    #[test]
    fn mul_examples() {
        let u = real(&[(1, 1.0)]);
        let u_inv = real(&[(-1, 1.0)]);
        assert!(u.mul(&u_inv).approx_eq(&LaurentSeries::one(), 0.0));

        let f = real(&[(-1, 1.0), (1, 1.0)]);
        assert!(f.mul(&f).approx_eq(&real(&[(-2, 1.0), (0, 2.0), (2, 1.0)]), 0.0));

        let p = real(&[(0, 1.0), (1, -1.0)]);
        let q = real(&[(-1, 1.0), (0, 1.0)]);
        let pq = p.mul(&q);
        assert!(pq.approx_eq(&real(&[(-1, 1.0), (1, -1.0)]), 0.0));
        assert_eq!(pq.coeff(0), c(0.0, 0.0));
        assert_eq!(pq.s_norm(), 2.0);
        assert!(pq.s_norm() <= p.s_norm() * q.s_norm());
    }

    #[test]
    fn adjoint_examples() {
        let f = LaurentSeries::monomial(1, c(0.0, 1.0));
        assert!(f.adjoint().approx_eq(&LaurentSeries::monomial(-1, c(0.0, -1.0)), 0.0));
        let g = LaurentSeries::monomial(0, c(2.0, -3.0));
        assert!(g.adjoint().approx_eq(&LaurentSeries::monomial(0, c(2.0, 3.0)), 0.0));
    }

    #[test]
    fn truncate_examples() {
        let f = real(&[(0, 1.0), (5, 0.1)]);
        assert!(f.truncate(3).approx_eq(&real(&[(0, 1.0)]), 0.0));
        let g = real(&[(-2, 0.5), (0, 0.75), (4, 1.0)]);
        assert!(g.truncate(0).approx_eq(&real(&[(0, 0.75)]), 0.0));
        assert!(real(&[(7, 1.0)]).truncate(3).is_zero());
    }

    #[test]
    fn s_norm_examples() {
        assert_eq!(real(&[(0, 1.0)]).s_norm(), 1.0);
        let f = LaurentSeries::from_pairs([(-2, c(0.0, 3.0)), (2, c(-4.0, 0.0))]);
        assert_eq!(f.s_norm(), 7.0);
    }

    #[test]
    fn abs_series_examples() {
        let f = LaurentSeries::monomial(1, c(0.0, -1.0));
        assert!(f.abs_series().approx_eq(&real(&[(1, 1.0)]), 0.0));
        let g = real(&[(-1, 0.3), (2, 0.7)]);
        assert!(g.abs_series().approx_eq(&g, 0.0));
    }

    #[test]
    fn eval_real_examples() {
        let f = real(&[(-1, 1.0), (1, 1.0)]);
        assert!((f.eval_real(2.0).unwrap() - c(2.5, 0.0)).norm() < 1e-15);
        let k = LaurentSeries::monomial(0, c(0.3, -0.2));
        assert_eq!(k.eval_real(17.0).unwrap(), c(0.3, -0.2));
        assert_eq!(f.eval_real(0.0), Err(SeriesError::Domain(0.0)));
        assert_eq!(f.eval_real(-1.0), Err(SeriesError::Domain(-1.0)));
    }

    #[test]
    fn eval_matrix_examples() {
        let u = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0, 1.0), c(0.0, -1.0)]));
        let id = LaurentSeries::one().eval_matrix(&u).unwrap();
        assert!((id - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);
        let sq = real(&[(2, 1.0)]).eval_matrix(&u).unwrap();
        assert!((sq + DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);

        let rect = DMatrix::<Complex64>::zeros(2, 3);
        assert!(matches!(
            LaurentSeries::one().eval_matrix(&rect),
            Err(SeriesError::NotSquare { rows: 2, cols: 3 })
        ));
        let not_unitary = DMatrix::<Complex64>::identity(2, 2) * c(2.0, 0.0);
        assert!(matches!(
            LaurentSeries::one().eval_matrix(&not_unitary),
            Err(SeriesError::NotUnitary(_))
        ));
    }

    #[test]
    fn alternating_symmetry_examples() {
        let f = LaurentSeries::from_pairs([(-1, c(-0.3, 0.1)), (1, c(0.3, -0.1))]);
        assert!(f.check_alternating_symmetry(0.0));
        assert!(!real(&[(-2, 1.0), (2, -1.0)]).check_alternating_symmetry(1e-12));
        // one-sided support violates unless the coefficient vanishes
        assert!(!real(&[(1, 0.5)]).check_alternating_symmetry(1e-12));
    }

    #[test]
    fn truncate_to_mass_keeps_symmetric_cutoff() {
        let f = real(&[(-3, 1e-20), (-1, 0.5), (0, 1.0), (1, -0.5), (3, -1e-20)]);
        let t = f.truncate_to_mass(1e-16);
        assert_eq!(t.support(), Some((-1, 1)));
        assert!(f.truncate_to_mass(0.0).approx_eq(&f, 0.0));
    }

    #[test]
    fn powi_matches_repeated_mul() {
        let f = real(&[(-1, 0.25), (0, 0.5), (2, -0.125)]);
        let mut rep = LaurentSeries::one();
        for _ in 0..5 {
            rep = rep.mul(&f);
        }
        assert!(f.powi(5).approx_eq(&rep, 1e-15));
        assert!(f.powi(0).approx_eq(&LaurentSeries::one(), 0.0));
    }
}
