//! Sparse Hermitian Hamiltonians behind the position/value oracle pair, plus
//! the query ledger.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Oracle queries charged per application of the walk step (or its inverse):
/// `T` and `T^dag` each make one position and one value query.
pub const QUERIES_PER_WALK_STEP: u64 = 4;

/// Largest qubit count accepted by the generator.
pub const MAX_GENERATED_QUBITS: u32 = 6;

const MAX_LOADED_QUBITS: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("entry ({row}, {col}) breaks Hermiticity")]
    NotHermitian { row: usize, col: usize },
    #[error("row {row} has {count} nonzeros, more than the sparseness d = {d}")]
    Sparsity { row: usize, count: usize, d: usize },
    #[error("duplicate entry ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("entry ({row}, {col}) outside a {dim}x{dim} matrix")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("entry ({row}, {col}) has a non-finite value")]
    NonFinite { row: usize, col: usize },
    #[error("malformed Hamiltonian document: {0}")]
    Malformed(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("row {row} has {count} nonzeros; index l = {l} is out of range")]
    OracleIndex { row: usize, l: usize, count: usize },
}

/// A `d`-sparse Hermitian matrix on `n` qubits.
///
/// Rows are stored sorted by column with explicit zeros removed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    n: u32,
    d: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
    max_norm: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianDoc {
    n: u32,
    d: usize,
    entries: Vec<EntryDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

impl SparseHamiltonian {
    /// Builds a Hamiltonian from upper-triangle entries `(row, col, value)` with
    /// `row <= col`; the lower triangle is filled by conjugation.
    pub fn from_upper<I>(n: u32, d: usize, entries: I) -> Result<Self, HamiltonianError>
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        Self::validate(n, d, entries, true)
    }

    fn validate<I>(n: u32, d: usize, entries: I, upper_only: bool) -> Result<Self, HamiltonianError>
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        if n > MAX_LOADED_QUBITS {
            return Err(HamiltonianError::InvalidParameters(format!(
                "n = {n} exceeds {MAX_LOADED_QUBITS} qubits"
            )));
        }
        let dim = 1usize << n;
        if d == 0 || d > dim {
            return Err(HamiltonianError::InvalidParameters(format!(
                "sparseness d = {d} must lie in 1..={dim}"
            )));
        }
        let mut upper: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        let mut lower: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (row, col, v) in entries {
            if row >= dim || col >= dim {
                return Err(HamiltonianError::IndexOutOfRange { row, col, dim });
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(HamiltonianError::NonFinite { row, col });
            }
            if row == col && v.im != 0.0 {
                return Err(HamiltonianError::NotHermitian { row, col });
            }
            if row > col && upper_only {
                return Err(HamiltonianError::Malformed(format!(
                    "entry ({row}, {col}) is below the diagonal"
                )));
            }
            let target = if row <= col { &mut upper } else { &mut lower };
            if target.insert((row, col), v).is_some() {
                return Err(HamiltonianError::Duplicate { row, col });
            }
        }
        // lower-triangle entries are redundant but must agree with the upper
        for (&(row, col), v) in &lower {
            let mirrored = upper
                .get(&(col, row))
                .copied()
                .unwrap_or(Complex64::new(0.0, 0.0));
            if *v != mirrored.conj() {
                return Err(HamiltonianError::NotHermitian { row, col });
            }
        }
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (&(row, col), &v) in &upper {
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            rows[row].push((col, v));
            if row != col {
                rows[col].push((row, v.conj()));
            }
        }
        for (row, entries) in rows.iter_mut().enumerate() {
            entries.sort_by_key(|e| e.0);
            if entries.len() > d {
                return Err(HamiltonianError::Sparsity {
                    row,
                    count: entries.len(),
                    d,
                });
            }
        }
        let max_norm = rows
            .iter()
            .flatten()
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        Ok(Self { n, d, rows, max_norm })
    }

    /// Reads the JSON document format `{"n", "d", "entries": [{row, col, re, im}]}`.
    pub fn load(text: &str) -> Result<Self, HamiltonianError> {
        let doc: HamiltonianDoc =
            serde_json::from_str(text).map_err(|e| HamiltonianError::Malformed(e.to_string()))?;
        Self::validate(
            doc.n,
            doc.d,
            doc.entries
                .into_iter()
                .map(|e| (e.row, e.col, Complex64::new(e.re, e.im))),
            false,
        )
    }

    /// Writes the upper triangle (`row <= col`) as a JSON document.
    pub fn save(&self) -> String {
        let entries = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(row, entries)| {
                entries
                    .iter()
                    .filter(move |(col, _)| row <= *col)
                    .map(move |&(col, v)| EntryDoc {
                        row,
                        col,
                        re: v.re,
                        im: v.im,
                    })
            })
            .collect();
        let doc = HamiltonianDoc {
            n: self.n,
            d: self.d,
            entries,
        };
        serde_json::to_string_pretty(&doc).expect("document serialises")
    }

    /// Seeded random Hermitian matrix with at most `d` nonzeros per row.
    ///
    /// Off-diagonal magnitudes are drawn from `[0.1, 1]` with uniform phase;
    /// diagonal entries are real and non-negative, in `[0, 1)`.
    pub fn random_sparse(n: u32, d: usize, seed: u64) -> Result<Self, HamiltonianError> {
        if n > MAX_GENERATED_QUBITS {
            return Err(HamiltonianError::InvalidParameters(format!(
                "generator supports at most {MAX_GENERATED_QUBITS} qubits, got {n}"
            )));
        }
        let dim = 1usize << n;
        if d == 0 || d > dim {
            return Err(HamiltonianError::InvalidParameters(format!(
                "sparseness d = {d} infeasible for dimension {dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs: Vec<(usize, usize)> = (0..dim)
            .flat_map(|j| (j..dim).map(move |k| (j, k)))
            .collect();
        pairs.shuffle(&mut rng);
        let mut degree = vec![0usize; dim];
        let mut entries = Vec::new();
        for (j, k) in pairs {
            if j == k {
                if degree[j] < d && rng.gen_bool(0.5) {
                    degree[j] += 1;
                    entries.push((j, j, Complex64::new(rng.gen_range(0.0..1.0), 0.0)));
                }
            } else if degree[j] < d && degree[k] < d {
                degree[j] += 1;
                degree[k] += 1;
                let mag = rng.gen_range(0.1..=1.0);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                entries.push((j, k, Complex64::from_polar(mag, phase)));
            }
        }
        if entries.is_empty() {
            entries.push((0, 0, Complex64::new(1.0, 0.0)));
        }
        Self::from_upper(n, d, entries)
    }

    pub fn from_dense(n: u32, d: usize, h: &DMatrix<Complex64>) -> Result<Self, HamiltonianError> {
        let dim = 1usize << n;
        if h.nrows() != dim || h.ncols() != dim {
            return Err(HamiltonianError::InvalidParameters(format!(
                "matrix is {}x{}, expected {dim}x{dim}",
                h.nrows(),
                h.ncols()
            )));
        }
        let entries = (0..dim).flat_map(|j| (0..dim).map(move |k| (j, k, h[(j, k)])));
        Self::validate(n, d, entries.filter(|e| e.2 != Complex64::new(0.0, 0.0)), false)
    }

    pub fn qubits(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn sparseness(&self) -> usize {
        self.d
    }

    /// `max_{j,k} |H_jk|`.
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    /// Nonzeros of row `j`, ascending by column.
    pub fn row(&self, j: usize) -> &[(usize, Complex64)] {
        &self.rows[j]
    }

    /// Column of the `l`-th (1-based) nonzero in row `j`.
    pub fn oracle_f(&self, j: usize, l: usize) -> Result<usize, HamiltonianError> {
        let row = self.rows.get(j).ok_or(HamiltonianError::IndexOutOfRange {
            row: j,
            col: 0,
            dim: self.dim(),
        })?;
        if l == 0 || l > row.len() {
            return Err(HamiltonianError::OracleIndex {
                row: j,
                l,
                count: row.len(),
            });
        }
        Ok(row[l - 1].0)
    }

    /// `H_jk`, zero when the entry is absent.
    pub fn oracle_h(&self, j: usize, k: usize) -> Complex64 {
        self.rows[j]
            .binary_search_by_key(&k, |e| e.0)
            .map(|i| self.rows[j][i].1)
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for (j, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                h[(j, k)] = v;
            }
        }
        h
    }

    pub fn is_zero(&self) -> bool {
        self.max_norm == 0.0
    }
}

/// Walk-step and oracle-query counters.
///
/// Not synchronised: each experiment owns its ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    walk_steps: u64,
    oracle_queries: u64,
    lcu_selects: Vec<u64>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_walk_steps(&mut self, steps: u64) {
        self.walk_steps += steps;
        self.oracle_queries += QUERIES_PER_WALK_STEP * steps;
    }

    /// Records one `select(U)` with cutoff `cutoff` (its `2 * cutoff` walk steps
    /// are charged separately).
    pub fn record_select(&mut self, cutoff: u64) {
        self.lcu_selects.push(cutoff);
    }

    pub fn walk_steps(&self) -> u64 {
        self.walk_steps
    }

    pub fn oracle_queries(&self) -> u64 {
        self.oracle_queries
    }

    pub fn lcu_selects(&self) -> &[u64] {
        &self.lcu_selects
    }

    /// Folds another ledger's counts into this one.
    pub fn absorb(&mut self, other: &QueryLedger) {
        self.charge_walk_steps(other.walk_steps);
        self.lcu_selects.extend_from_slice(&other.lcu_selects);
    }
}
