//! The quantum-walk step `U = iS(2TT^dag - 1)` built from a sparse
//! Hamiltonian, and statevector simulation of one LCU segment with and
//! without a round of oblivious amplitude amplification.
//!
//! Basis ordering of the doubled space is `|j1>|b1>|j2>|b2>`, so the flat
//! index is `(2 j1 + b1) * 2D + (2 j2 + b2)` with `D = 2^n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::bessel::{self, BesselError};
use crate::hamiltonian::{QueryLedger, SparseHamiltonian};
use crate::linalg;
use crate::series::{LaurentSeries, SeriesError, UnitaryStep};

/// Largest Hamiltonian dimension the walk is built for (walk dimension 16384).
pub const MAX_DIM: usize = 64;

const ISOMETRY_TOL: f64 = 1e-12;
const S_NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("Hamiltonian dimension {0} exceeds the supported maximum of 64")]
    DimensionOverflow(usize),
    #[error("Hamiltonian is zero; its evolution is the identity")]
    Degenerate,
    #[error("diagonal entry H[{row},{row}] = {value} is negative and cannot be encoded by the walk")]
    NegativeDiagonal { row: usize, value: f64 },
    #[error("walk construction failed validation: {0}")]
    Invariant(String),
    #[error("series has no terms")]
    ZeroSeries,
    #[error("s-norm {0} exceeds 2; one round of amplitude amplification cannot absorb it")]
    SNormTooLarge(f64),
    #[error("state has length {got}, expected {expected}")]
    StateShape { expected: usize, got: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

/// `T`, `S` and `U` for one Hamiltonian, stored through their sparse factors.
#[derive(Debug, Clone)]
pub struct WalkSpace {
    hamiltonian: SparseHamiltonian,
    scale: f64,
    /// `2D` columns of `T`, each a sparse list over the `4D^2` walk basis.
    t_columns: Vec<Vec<(usize, Complex64)>>,
    /// The register swap as a permutation (an involution).
    swap: Vec<usize>,
}

fn register(j: usize, b: usize) -> usize {
    2 * j + b
}

/// `sqrt(conj(H_jl) / X)` on the principal branch. On the negative real axis
/// the branch is fixed by the sign of `l - j`, so that the roots stored for
/// `(j, l)` and `(l, j)` always multiply back to `H_jl`.
fn entry_root(j: usize, l: usize, h: Complex64, scale: f64) -> Complex64 {
    let w = h.conj() / scale;
    if w.im == 0.0 && w.re < 0.0 {
        let r = (-w.re).sqrt();
        if j < l {
            Complex64::new(0.0, r)
        } else {
            Complex64::new(0.0, -r)
        }
    } else {
        w.sqrt()
    }
}

impl WalkSpace {
    /// Builds `T` from the states `phi_{j1} = |0>|1>` and
    /// `phi_{j0} = d^{-1/2} Σ_{l in F_j} |l> [sqrt(H*_jl/X)|0> + sqrt(1-|H_jl|/X)|1>]`
    /// with `X = ||H||_max`. Rows with fewer than `d` nonzeros are padded with
    /// unused columns carrying zero weight on `|0>`.
    pub fn build(hamiltonian: &SparseHamiltonian) -> Result<Self, WalkError> {
        let dim = hamiltonian.dim();
        if dim > MAX_DIM {
            return Err(WalkError::DimensionOverflow(dim));
        }
        if hamiltonian.is_zero() {
            return Err(WalkError::Degenerate);
        }
        for j in 0..dim {
            let v = hamiltonian.oracle_h(j, j).re;
            if v < 0.0 {
                return Err(WalkError::NegativeDiagonal { row: j, value: v });
            }
        }
        let scale = hamiltonian.max_norm();
        let d = hamiltonian.sparseness();
        let reg_dim = 2 * dim;
        let norm = 1.0 / (d as f64).sqrt();

        let mut t_columns = Vec::with_capacity(reg_dim);
        for j in 0..dim {
            // b = 0
            let row = hamiltonian.row(j);
            let mut slots: Vec<(usize, Complex64)> = row.to_vec();
            let mut filler = (0..dim).filter(|k| row.binary_search_by_key(k, |e| e.0).is_err());
            while slots.len() < d {
                let k = filler.next().expect("d <= dim leaves room for padding");
                slots.push((k, Complex64::new(0.0, 0.0)));
            }
            let base = register(j, 0) * reg_dim;
            let mut col = Vec::with_capacity(2 * d);
            for (l, h) in slots {
                let amp0 = entry_root(j, l, h, scale) * norm;
                let amp1 = (1.0 - h.norm() / scale).max(0.0).sqrt() * norm;
                if amp0 != Complex64::new(0.0, 0.0) {
                    col.push((base + register(l, 0), amp0));
                }
                if amp1 != 0.0 {
                    col.push((base + register(l, 1), Complex64::new(amp1, 0.0)));
                }
            }
            t_columns.push(col);
            // b = 1
            t_columns.push(vec![(
                register(j, 1) * reg_dim + register(0, 1),
                Complex64::new(1.0, 0.0),
            )]);
        }
        let swap = (0..reg_dim * reg_dim)
            .map(|i| (i % reg_dim) * reg_dim + i / reg_dim)
            .collect();
        let walk = Self {
            hamiltonian: hamiltonian.clone(),
            scale,
            t_columns,
            swap,
        };
        walk.validate()?;
        Ok(walk)
    }

    fn validate(&self) -> Result<(), WalkError> {
        // columns of T have disjoint supports (distinct first register), so
        // T^dag T = I reduces to unit column norms
        for (c, col) in self.t_columns.iter().enumerate() {
            let n2: f64 = col.iter().map(|(_, v)| v.norm_sqr()).sum();
            if (n2 - 1.0).abs() > ISOMETRY_TOL {
                return Err(WalkError::Invariant(format!(
                    "column {c} of T has squared norm {n2}"
                )));
            }
        }
        // probe U^dag U on a fixed block
        let w = self.walk_dim();
        let probe = DMatrix::from_fn(w, 2, |i, j| {
            Complex64::new(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i * 5 + j) % 7) as f64 - 3.0)
        });
        let back = self.apply_inverse(&self.apply(&probe));
        let defect = (&back - &probe).norm() / probe.norm();
        if defect > ISOMETRY_TOL {
            return Err(WalkError::Invariant(format!("U^dag U deviates by {defect:e}")));
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> &SparseHamiltonian {
        &self.hamiltonian
    }

    /// `X = ||H||_max`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `X d`, the normalisation that maps the spectrum of `H` into `[-1, 1]`.
    pub fn spectral_scale(&self) -> f64 {
        self.scale * self.hamiltonian.sparseness() as f64
    }

    /// Dimension `4 D^2` of the walk space.
    pub fn walk_dim(&self) -> usize {
        self.swap.len()
    }

    fn t_dag(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.t_columns.len(), block.ncols());
        for (c, col) in self.t_columns.iter().enumerate() {
            for &(i, v) in col {
                let vc = v.conj();
                for k in 0..block.ncols() {
                    out[(c, k)] += vc * block[(i, k)];
                }
            }
        }
        out
    }

    fn t_apply(&self, small: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.walk_dim(), small.ncols());
        for (c, col) in self.t_columns.iter().enumerate() {
            for &(i, v) in col {
                for k in 0..small.ncols() {
                    out[(i, k)] += v * small[(c, k)];
                }
            }
        }
        out
    }

    fn swap_rows(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        DMatrix::from_fn(block.nrows(), block.ncols(), |i, k| block[(self.swap[i], k)])
    }

    /// `(2TT^dag - 1) v`.
    fn reflect(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.t_apply(&self.t_dag(block)) * Complex64::new(2.0, 0.0) - block
    }

    /// Dense `T`, shape `4D^2 x 2D`.
    pub fn dense_t(&self) -> DMatrix<Complex64> {
        self.t_apply(&DMatrix::identity(self.t_columns.len(), self.t_columns.len()))
    }

    /// Dense `S`.
    pub fn dense_swap(&self) -> DMatrix<Complex64> {
        let w = self.walk_dim();
        self.swap_rows(&DMatrix::identity(w, w))
    }

    /// Dense `U`.
    pub fn dense_u(&self) -> DMatrix<Complex64> {
        let w = self.walk_dim();
        self.apply(&DMatrix::identity(w, w))
    }

    /// `T (psi ⊗ |0>_{b1})` for each column of `psi` (shape `D x k`).
    pub fn embed(&self, psi: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut small = DMatrix::zeros(self.t_columns.len(), psi.ncols());
        for j in 0..psi.nrows() {
            for k in 0..psi.ncols() {
                small[(register(j, 0), k)] = psi[(j, k)];
            }
        }
        self.t_apply(&small)
    }

    /// `ι^dag T^dag` applied to walk-space columns: the `b1 = 0` block.
    pub fn project(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let small = self.t_dag(block);
        let dim = self.hamiltonian.dim();
        DMatrix::from_fn(dim, block.ncols(), |j, k| small[(register(j, 0), k)])
    }

    /// `ι^dag T^dag F(U) T ι`, charging `2 max|m|` walk steps.
    pub fn effective_operator(
        &self,
        series: &LaurentSeries,
        ledger: &mut QueryLedger,
    ) -> Result<DMatrix<Complex64>, WalkError> {
        let dim = self.hamiltonian.dim();
        let start = self.embed(&DMatrix::identity(dim, dim));
        let evolved = series.eval_operator(self, &start)?;
        ledger.charge_walk_steps(2 * series.max_abs_power());
        Ok(self.project(&evolved))
    }

    /// Checks, for every eigenpair of `H`, that `T|λ>|0>` lies in the span of
    /// the `U` eigenvectors with eigenvalues `μ± = ±exp(±i asin(λ/Xd))`, via
    /// the residual `||(U - μ+)(U - μ-) v||`. Also evaluates the Bessel
    /// generating-function identity at `t`.
    pub fn verify_spectral_map(&self, t: f64) -> Result<SpectralReport, WalkError> {
        let (values, vectors) = linalg::hermitian_eigen(&self.hamiltonian.to_dense());
        let xd = self.spectral_scale();
        let z = -t * xd;
        let series = bessel::full_series(z, bessel::EXACT_SERIES_TOL)?;
        let mut entries = Vec::with_capacity(values.len());
        for (i, &lambda) in values.iter().enumerate() {
            let ratio = (lambda / xd).clamp(-1.0, 1.0);
            let theta = ratio.asin();
            let mu_plus = Complex64::from_polar(1.0, theta);
            let mu_minus = -Complex64::from_polar(1.0, -theta);
            let v = self.embed(&DMatrix::from_column_slice(vectors.nrows(), 1, vectors.column(i).into_owned().as_slice()));
            let uv = self.apply(&v);
            let uuv = self.apply(&uv);
            let residual = (uuv - uv * (mu_plus + mu_minus) + &v * (mu_plus * mu_minus)).norm() / v.norm();
            let target = Complex64::from_polar(1.0, -lambda * t);
            let bessel_residual = [mu_plus, mu_minus]
                .iter()
                .map(|mu| (eval_at_point(&series, *mu) - target).norm())
                .fold(0.0, f64::max);
            entries.push(SpectralEntry {
                lambda,
                mu_plus,
                mu_minus,
                residual,
                coalesced: (mu_plus - mu_minus).norm() < 1e-8,
                bessel_residual,
            });
        }
        Ok(SpectralReport { entries })
    }

    /// One LCU block-encoding of `F`: prepare, `select(U)`, unprepare, keep
    /// the ancilla-zero block. Charges `2M` walk steps.
    pub fn lcu_apply(
        &self,
        series: &LaurentSeries,
        psi: &DVector<Complex64>,
        ledger: &mut QueryLedger,
    ) -> Result<LcuOutcome, WalkError> {
        self.check_state(psi)?;
        let reg = LcuRegister::new(series, false)?;
        let mut state = DMatrix::zeros(self.walk_dim(), reg.ancilla_dim);
        state.set_column(0, psi);
        let state = reg.block_encode(self, &state, ledger);
        Ok(LcuOutcome {
            flagged: state.column(0).into_owned(),
            s: reg.s_value,
            full_state: DVector::from_column_slice(state.as_slice()),
        })
    }

    /// The LCU of `F` padded to `s = 2`, followed by one round of oblivious
    /// amplitude amplification `-W (1-2P) W^dag (1-2P) W`. Returns the
    /// flagged block, `(3/2) F - (1/2) F F^dag F` applied to `psi`.
    /// Charges `3 * 2M` walk steps.
    pub fn oaa_apply(
        &self,
        series: &LaurentSeries,
        psi: &DVector<Complex64>,
        ledger: &mut QueryLedger,
    ) -> Result<DVector<Complex64>, WalkError> {
        self.check_state(psi)?;
        let s = series.s_norm();
        if s > 2.0 + S_NORM_SLACK {
            return Err(WalkError::SNormTooLarge(s));
        }
        let reg = LcuRegister::new(series, true)?;
        let mut state = DMatrix::zeros(self.walk_dim(), reg.ancilla_dim);
        state.set_column(0, psi);
        let reflect_zero = |mut st: DMatrix<Complex64>| {
            st.column_mut(0).scale_mut(-1.0);
            st
        };
        let state = reg.block_encode(self, &state, ledger);
        let state = reflect_zero(state);
        let state = reg.block_encode_adjoint(self, &state, ledger);
        let state = reflect_zero(state);
        let state = reg.block_encode(self, &state, ledger);
        Ok(-state.column(0).into_owned())
    }

    fn check_state(&self, psi: &DVector<Complex64>) -> Result<(), WalkError> {
        if psi.len() != self.walk_dim() {
            return Err(WalkError::StateShape {
                expected: self.walk_dim(),
                got: psi.len(),
            });
        }
        Ok(())
    }
}

impl UnitaryStep for WalkSpace {
    fn dim(&self) -> usize {
        self.walk_dim()
    }

    /// `U v = i S (2TT^dag - 1) v`.
    fn apply(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.swap_rows(&self.reflect(block)) * Complex64::new(0.0, 1.0)
    }

    /// `U^dag v = -i (2TT^dag - 1) S v`.
    fn apply_inverse(&self, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.reflect(&self.swap_rows(block)) * Complex64::new(0.0, -1.0)
    }
}

fn eval_at_point(series: &LaurentSeries, mu: Complex64) -> Complex64 {
    series.iter().map(|(m, c)| c * mu.powi(m as i32)).sum()
}

#[derive(Debug, Clone)]
pub struct SpectralEntry {
    pub lambda: f64,
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
    /// `||(U - μ+)(U - μ-) T|λ,0>||`.
    pub residual: f64,
    /// `|λ| = Xd`, where the two eigenvalues coincide.
    pub coalesced: bool,
    /// `max_± |Σ_m J_m(-tXd) μ±^m - e^{-iλt}|`.
    pub bessel_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub entries: Vec<SpectralEntry>,
}

impl SpectralReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn max_bessel_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.bessel_residual).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct LcuOutcome {
    /// Walk-space block flagged by the ancilla reference state.
    pub flagged: DVector<Complex64>,
    pub s: f64,
    /// Full register, ancilla-major: index `a * walk_dim + w`.
    pub full_state: DVector<Complex64>,
}

/// Ancilla state preparation for the LCU of one series.
///
/// The prepare side loads `sqrt(F_m)/sqrt(s)` and the unprepare side is the
/// adjoint of a preparation loading the conjugate amplitudes, so the flagged
/// block carries `F_m / s` including its phase.
#[derive(Debug, Clone)]
pub struct LcuRegister {
    /// `2M + 1`, doubled when the padding qubit is engaged.
    pub ancilla_dim: usize,
    pub chi: DVector<Complex64>,
    pub s_value: f64,
    cutoff: u64,
    prepare: DMatrix<Complex64>,
    unprepare_source: DMatrix<Complex64>,
}

/// A unitary whose first column is `x` (unit norm), via a phased Householder
/// reflection.
fn completing_unitary(x: &DVector<Complex64>) -> DMatrix<Complex64> {
    let n = x.len();
    let phase = if x[0].norm() > 0.0 {
        x[0] / x[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut y = DVector::zeros(n);
    y[0] = phase;
    let w = x - &y;
    let ww = w.norm_squared();
    let h = if ww < 1e-30 {
        DMatrix::identity(n, n)
    } else {
        DMatrix::identity(n, n) - (&w * w.adjoint()) * Complex64::new(2.0 / ww, 0.0)
    };
    h * phase
}

impl LcuRegister {
    pub fn new(series: &LaurentSeries, pad_to_two: bool) -> Result<Self, WalkError> {
        let s = series.s_norm();
        if series.is_zero() || s == 0.0 {
            return Err(WalkError::ZeroSeries);
        }
        let cutoff = series.max_abs_power();
        let m = cutoff as i64;
        let inv = 1.0 / s.sqrt();
        let chi = DVector::from_iterator(
            2 * cutoff as usize + 1,
            (-m..=m).map(|k| series.coeff(k).sqrt() * inv),
        );
        let chi_conj = chi.map(|c| c.conj());
        let mut prepare = completing_unitary(&chi);
        let mut unprepare_source = completing_unitary(&chi_conj);
        if pad_to_two {
            // rotated on the prepare side only, so the flagged block picks up s/2
            let keep = (s / 2.0).min(1.0);
            let pad = DVector::from_vec(vec![
                Complex64::new(keep, 0.0),
                Complex64::new((1.0 - keep * keep).sqrt(), 0.0),
            ]);
            prepare = completing_unitary(&pad).kronecker(&prepare);
            unprepare_source = DMatrix::<Complex64>::identity(2, 2).kronecker(&unprepare_source);
        }
        Ok(Self {
            ancilla_dim: prepare.nrows(),
            chi,
            s_value: s,
            cutoff,
            prepare,
            unprepare_source,
        })
    }

    fn select_width(&self) -> usize {
        2 * self.cutoff as usize + 1
    }

    /// `select(U)` (or its adjoint) as a ladder of `M` controlled steps each
    /// way. Ancilla column `a` encodes `m = (a mod (2M+1)) - M`.
    fn select(&self, walk: &WalkSpace, state: &mut DMatrix<Complex64>, adjoint: bool, ledger: &mut QueryLedger) {
        let width = self.select_width();
        let m = self.cutoff as i64;
        let power = |a: usize| (a % width) as i64 - m;
        for k in 1..=m {
            for forward in [true, false] {
                let cols: Vec<usize> = (0..self.ancilla_dim)
                    .filter(|&a| if forward { power(a) >= k } else { power(a) <= -k })
                    .collect();
                let block = DMatrix::from_columns(
                    &cols.iter().map(|&a| state.column(a).into_owned()).collect::<Vec<_>>(),
                );
                let step_forward = forward != adjoint;
                let out = if step_forward {
                    walk.apply(&block)
                } else {
                    walk.apply_inverse(&block)
                };
                for (i, &a) in cols.iter().enumerate() {
                    state.set_column(a, &out.column(i));
                }
            }
        }
        ledger.charge_walk_steps(2 * self.cutoff);
        ledger.record_select(self.cutoff);
    }

    /// `W = B_R^dag select(U) B_L` acting on the ancilla (column) index.
    fn block_encode(
        &self,
        walk: &WalkSpace,
        state: &DMatrix<Complex64>,
        ledger: &mut QueryLedger,
    ) -> DMatrix<Complex64> {
        let mut st = state * self.prepare.transpose();
        self.select(walk, &mut st, false, ledger);
        st * self.unprepare_source.map(|c| c.conj())
    }

    /// `W^dag = B_L^dag select(U)^dag B_R`.
    fn block_encode_adjoint(
        &self,
        walk: &WalkSpace,
        state: &DMatrix<Complex64>,
        ledger: &mut QueryLedger,
    ) -> DMatrix<Complex64> {
        let mut st = state * self.unprepare_source.transpose();
        self.select(walk, &mut st, true, ledger);
        st * self.prepare.map(|c| c.conj())
    }
}
