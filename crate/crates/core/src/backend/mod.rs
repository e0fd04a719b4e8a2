//! Dense linear algebra behind one interface: Cholesky factorization of the
//! correlation matrix with a jitter fallback, triangular solves, and an
//! operation ledger that counts the expensive steps of every session.
//!
//! Two CPU engines are always present. `reference` is the unblocked
//! sequential algorithm; `parallel` is a right-looking blocked Cholesky whose
//! panel and trailing updates run on the rayon pool. `accelerated` is a
//! reserved identifier and is rejected at construction in this build.

mod blocked;
mod reference;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array2, ArrayView2};

use crate::correlation::{
    build_corr_matrix, build_corr_matrix_par, CorrelationMatrix, PairwisePowers,
};
use crate::error::{GpError, Result};
use crate::real::{dot_lanes, dot_seq, Real};
use crate::types::{Hyperparameters, Precision};

/// Diagonal inflations tried in order until the factorization succeeds.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

pub const DEFAULT_BLOCK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackendKind {
    Reference,
    Parallel,
    Accelerated,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Reference => "reference",
            BackendKind::Parallel => "parallel",
            BackendKind::Accelerated => "accelerated",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reference" => Ok(BackendKind::Reference),
            "parallel" => Ok(BackendKind::Parallel),
            "accelerated" => Ok(BackendKind::Accelerated),
            other => Err(GpError::UnknownBackend(other.to_string())),
        }
    }
}

/// Cholesky factor `L` of `R + jitter_used * I`, stored as a dense row-major
/// lower-triangular matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationFactor<T> {
    lower: Array2<T>,
    log_det: f64,
    jitter_used: f64,
}

impl<T: Real> CorrelationFactor<T> {
    /// Wraps a lower-triangular factor; the diagonal must be strictly positive.
    pub fn from_lower(lower: Array2<T>, jitter_used: f64) -> Result<Self> {
        let (r, c) = lower.dim();
        if r != c {
            return Err(GpError::DimensionMismatch(format!("{r}x{c} factor is not square")));
        }
        for i in 0..r {
            if !(lower[[i, i]] > T::zero()) {
                return Err(GpError::NotPositiveDefinite { pivot: i, last_jitter: jitter_used });
            }
            for j in i + 1..r {
                if lower[[i, j]] != T::zero() {
                    return Err(GpError::DimensionMismatch(format!(
                        "factor has a nonzero above the diagonal at ({i}, {j})"
                    )));
                }
            }
        }
        let log_det = 2.0 * (0..r).map(|i| lower[[i, i]].to_f64().ln()).sum::<f64>();
        Ok(Self { lower, log_det, jitter_used })
    }

    pub fn n(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> ArrayView2<'_, T> {
        self.lower.view()
    }

    /// `log |R + jitter_used * I|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    fn data(&self) -> &[T] {
        self.lower.as_slice().expect("factor is contiguous")
    }
}

/// Snapshot of a ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LedgerCounts {
    pub r_builds: u64,
    pub factorizations: u64,
    pub triangular_solves: u64,
}

#[derive(Debug, Default)]
pub struct OpLedger {
    r_builds: AtomicU64,
    factorizations: AtomicU64,
    triangular_solves: AtomicU64,
}

impl OpLedger {
    pub fn snapshot(&self) -> LedgerCounts {
        LedgerCounts {
            r_builds: self.r_builds.load(Ordering::SeqCst),
            factorizations: self.factorizations.load(Ordering::SeqCst),
            triangular_solves: self.triangular_solves.load(Ordering::SeqCst),
        }
    }

    pub fn reset(&self) {
        self.r_builds.store(0, Ordering::SeqCst);
        self.factorizations.store(0, Ordering::SeqCst);
        self.triangular_solves.store(0, Ordering::SeqCst);
    }

    fn add_r_build(&self) {
        self.r_builds.fetch_add(1, Ordering::SeqCst);
    }

    fn add_factorization(&self) {
        self.factorizations.fetch_add(1, Ordering::SeqCst);
    }

    fn add_solves(&self, k: u64) {
        self.triangular_solves.fetch_add(k, Ordering::SeqCst);
    }
}

/// A compute session: engine choice, working precision and the ledger of
/// operations performed through it.
#[derive(Debug)]
pub struct Backend {
    kind: BackendKind,
    precision: Precision,
    block: usize,
    ledger: OpLedger,
}

impl Backend {
    pub fn new(kind: BackendKind, precision: Precision) -> Result<Self> {
        if kind == BackendKind::Accelerated {
            return Err(GpError::BackendUnavailable(kind.name().into()));
        }
        Ok(Self { kind, precision, block: DEFAULT_BLOCK, ledger: OpLedger::default() })
    }

    pub fn from_name(name: &str, precision: Precision) -> Result<Self> {
        Self::new(name.parse()?, precision)
    }

    pub fn reference(precision: Precision) -> Self {
        Self::new(BackendKind::Reference, precision).expect("reference backend is always built")
    }

    pub fn parallel(precision: Precision) -> Self {
        Self::new(BackendKind::Parallel, precision).expect("parallel backend is always built")
    }

    /// Panel width of the blocked engine; ignored by `reference`.
    pub fn with_block(mut self, block: usize) -> Self {
        self.block = block.max(1);
        self
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn ledger(&self) -> LedgerCounts {
        self.ledger.snapshot()
    }

    pub fn reset_ledger(&self) {
        self.ledger.reset()
    }

    fn is_parallel(&self) -> bool {
        self.kind != BackendKind::Reference
    }

    pub fn build_correlation<T: Real>(
        &self,
        x: ArrayView2<'_, f64>,
        params: &Hyperparameters,
    ) -> Result<CorrelationMatrix<T>> {
        self.ledger.add_r_build();
        if self.is_parallel() {
            build_corr_matrix_par(x, params)
        } else {
            build_corr_matrix(x, params)
        }
    }

    /// Builds `R` from precomputed pairwise powers; counted like
    /// [`Backend::build_correlation`].
    pub fn correlation_from_table<T: Real>(
        &self,
        table: &PairwisePowers<T>,
        params: &Hyperparameters,
    ) -> Result<CorrelationMatrix<T>> {
        self.ledger.add_r_build();
        if self.is_parallel() {
            table.correlation_par(params)
        } else {
            table.correlation(params)
        }
    }

    /// Cholesky factorization of `R + jitter * I`, trying each rung of
    /// [`JITTER_LADDER`] in turn. Counts as one factorization.
    pub fn factorize<T: Real>(&self, r: &CorrelationMatrix<T>) -> Result<CorrelationFactor<T>> {
        self.ledger.add_factorization();
        let n = r.n();
        let floor = pivot_floor::<T>(n);
        let source = r.values().as_standard_layout();
        let source = source.as_slice().expect("standard layout");
        let mut work = vec![T::zero(); n * n];
        let mut last = (0, 0.0);
        for &jitter in &JITTER_LADDER {
            work.copy_from_slice(source);
            let jt = T::from_f64(jitter);
            for i in 0..n {
                work[i * n + i] = work[i * n + i] + jt;
            }
            let outcome = match self.kind {
                BackendKind::Reference => reference::cholesky_in_place(&mut work, n, floor),
                _ => blocked::cholesky_in_place(&mut work, n, self.block, floor),
            };
            match outcome {
                Ok(()) => {
                    for i in 0..n {
                        for v in &mut work[i * n + i + 1..(i + 1) * n] {
                            *v = T::zero();
                        }
                    }
                    let lower = Array2::from_shape_vec((n, n), work).expect("n*n buffer");
                    let log_det =
                        2.0 * (0..n).map(|i| lower[[i, i]].to_f64().ln()).sum::<f64>();
                    return Ok(CorrelationFactor { lower, log_det, jitter_used: jitter });
                }
                Err(pivot) => last = (pivot, jitter),
            }
        }
        Err(GpError::NotPositiveDefinite { pivot: last.0, last_jitter: last.1 })
    }

    fn check_len<T>(f: &CorrelationFactor<T>, b: &[T]) -> Result<()>
    where
        T: Real,
    {
        if b.len() != f.n() {
            return Err(GpError::LengthMismatch { expected: f.n(), actual: b.len() });
        }
        Ok(())
    }

    /// Forward substitution `L u = b`. One triangular solve.
    pub fn solve_lower<T: Real>(&self, f: &CorrelationFactor<T>, b: &[T]) -> Result<Vec<T>> {
        Self::check_len(f, b)?;
        self.ledger.add_solves(1);
        let mut u = b.to_vec();
        self.forward(f, &mut u);
        Ok(u)
    }

    /// Back substitution `L^T x = b`. One triangular solve.
    pub fn solve_upper<T: Real>(&self, f: &CorrelationFactor<T>, b: &[T]) -> Result<Vec<T>> {
        Self::check_len(f, b)?;
        self.ledger.add_solves(1);
        let mut x = b.to_vec();
        self.backward(f, &mut x);
        Ok(x)
    }

    /// Solves `(R + jitter_used * I) x = b`. Two triangular solves.
    pub fn solve_full<T: Real>(&self, f: &CorrelationFactor<T>, b: &[T]) -> Result<Vec<T>> {
        Self::check_len(f, b)?;
        self.ledger.add_solves(2);
        let mut x = b.to_vec();
        self.forward(f, &mut x);
        self.backward(f, &mut x);
        Ok(x)
    }

    fn forward<T: Real>(&self, f: &CorrelationFactor<T>, b: &mut [T]) {
        match self.kind {
            BackendKind::Reference => reference::forward_solve(f.data(), f.n(), b),
            _ => blocked::forward_solve(f.data(), f.n(), self.block, b),
        }
    }

    fn backward<T: Real>(&self, f: &CorrelationFactor<T>, b: &mut [T]) {
        match self.kind {
            BackendKind::Reference => reference::backward_solve(f.data(), f.n(), b),
            _ => blocked::backward_solve(f.data(), f.n(), self.block, b),
        }
    }

    /// Inner product with this engine's summation order.
    pub fn dot<T: Real>(&self, a: &[T], b: &[T]) -> T {
        match self.kind {
            BackendKind::Reference => dot_seq(a, b),
            _ => dot_lanes(a, b),
        }
    }
}

/// Pivots at or below `n * eps` are treated as a loss of positive
/// definiteness; anything smaller is indistinguishable from rounding noise.
pub fn pivot_floor<T: Real>(n: usize) -> T {
    T::epsilon() * T::from_f64(n.max(1) as f64)
}
