//! Profile likelihood of the constant-mean GP and the GA-driven fit.
//!
//! For a factor `R = L L^T` write `u = L^-1 Y` and `v = L^-1 1`. Then
//! `mu_hat = v'u / v'v`, and the quadratic form of the residual is
//! `Q = u'u - 2 mu v'u + mu^2 v'v`. The objective is
//! `log|R| + n log Q`, which is `-2 log L` up to additive constants.
//! One evaluation costs one `R` build, one factorization and two triangular
//! solves (three when the cancellation guard falls back to solving for the
//! residual directly).

use std::sync::Mutex;

use ndarray::ArrayView2;

use crate::backend::{Backend, BackendKind, CorrelationFactor};
use crate::correlation::{build_corr_matrix, PairwisePowers};
use crate::error::{GpError, Result};
use crate::optimizer::{ga_minimize, golden_polish, GaTrace};
use crate::real::Real;
use crate::types::{Dataset, FitConfig, Hyperparameters, Precision};

/// One evaluation of the profile objective.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileEval {
    pub theta: Vec<f64>,
    /// `+inf` when no rung of the jitter ladder gave a usable factor.
    pub neg2_log_lik: f64,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub jitter_used: f64,
}

impl ProfileEval {
    fn failed(theta: &[f64]) -> Self {
        Self {
            theta: theta.to_vec(),
            neg2_log_lik: f64::INFINITY,
            mu_hat: f64::NAN,
            sigma2_hat: f64::NAN,
            jitter_used: f64::NAN,
        }
    }
}

/// Closed-form `mu_hat` from two forward solves.
pub fn mu_hat<T: Real>(backend: &Backend, factor: &CorrelationFactor<T>, y: &[T]) -> Result<T> {
    let u = backend.solve_lower(factor, y)?;
    let v = backend.solve_lower(factor, &vec![T::one(); y.len()])?;
    let vv = backend.dot(&v, &v);
    if !(vv > T::zero()) {
        return Err(GpError::DegenerateDenominator(vv.to_f64()));
    }
    Ok(backend.dot(&v, &u) / vv)
}

/// `sigma2_hat = (Y - mu 1)' R^-1 (Y - mu 1) / n` from one forward solve.
pub fn sigma2_hat<T: Real>(
    backend: &Backend,
    factor: &CorrelationFactor<T>,
    y: &[T],
    mu: T,
) -> Result<T> {
    let resid: Vec<T> = y.iter().map(|&v| v - mu).collect();
    let w = backend.solve_lower(factor, &resid)?;
    Ok(backend.dot(&w, &w) / T::from_f64(y.len() as f64))
}

/// `sigma2_hat` from the inner products of `u = L^-1 Y` and `v = L^-1 1`.
pub fn sigma2_hat_from_products<T: Real>(uu: T, uv: T, vv: T, mu: T, n: usize) -> T {
    let two = T::one() + T::one();
    (uu - two * mu * uv + mu * mu * vv) / T::from_f64(n as f64)
}

struct Plugins {
    mu: f64,
    sigma2: f64,
}

fn plugins<T: Real>(backend: &Backend, factor: &CorrelationFactor<T>, y: &[T]) -> Result<Plugins> {
    let n = y.len();
    let u = backend.solve_lower(factor, y)?;
    let v = backend.solve_lower(factor, &vec![T::one(); n])?;
    let (uu, uv, vv) = (backend.dot(&u, &u), backend.dot(&v, &u), backend.dot(&v, &v));
    if !(vv > T::zero()) || !vv.is_finite() {
        return Err(GpError::DegenerateDenominator(vv.to_f64()));
    }
    let mu = uv / vv;
    let mut sigma2 = sigma2_hat_from_products(uu, uv, vv, mu, n);
    // The product form cancels badly when the residual is tiny next to Y.
    let guard = T::from_f64(64.0) * T::epsilon() * uu / T::from_f64(n as f64);
    if !(sigma2 > guard) {
        sigma2 = sigma2_hat(backend, factor, y, mu)?;
    }
    Ok(Plugins { mu: mu.to_f64(), sigma2: sigma2.to_f64().max(0.0) })
}

/// `log|R| + n log(n sigma2)`, with the quadratic form floored at the
/// smallest normal double so a constant response stays finite.
fn objective_value(log_det: f64, n: usize, sigma2: f64) -> f64 {
    let nf = n as f64;
    let qf = (nf * sigma2).max(f64::MIN_POSITIVE);
    log_det + nf * qf.ln()
}

/// Factor of a fitted model in the precision it was computed in.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelFactor {
    Single(CorrelationFactor<f32>),
    Double(CorrelationFactor<f64>),
}

impl ModelFactor {
    pub fn precision(&self) -> Precision {
        match self {
            ModelFactor::Single(_) => Precision::Single,
            ModelFactor::Double(_) => Precision::Double,
        }
    }

    pub fn log_det(&self) -> f64 {
        match self {
            ModelFactor::Single(f) => f.log_det(),
            ModelFactor::Double(f) => f.log_det(),
        }
    }

    pub fn jitter_used(&self) -> f64 {
        match self {
            ModelFactor::Single(f) => f.jitter_used(),
            ModelFactor::Double(f) => f.jitter_used(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelFactor::Single(f) => f.n(),
            ModelFactor::Double(f) => f.n(),
        }
    }
}

trait IntoModelFactor: Real {
    fn wrap(f: CorrelationFactor<Self>) -> ModelFactor;
}

impl IntoModelFactor for f64 {
    fn wrap(f: CorrelationFactor<f64>) -> ModelFactor {
        ModelFactor::Double(f)
    }
}

impl IntoModelFactor for f32 {
    fn wrap(f: CorrelationFactor<f32>) -> ModelFactor {
        ModelFactor::Single(f)
    }
}

struct State<T> {
    table: PairwisePowers<T>,
    y: Vec<T>,
}

enum Tables {
    Single(State<f32>),
    Double(State<f64>),
}

/// The profile objective bound to one dataset, configuration and session.
/// Pairwise distance powers are computed once up front.
pub struct ProfileObjective<'a> {
    dataset: &'a Dataset,
    cfg: &'a FitConfig,
    backend: &'a Backend,
    tables: Tables,
}

fn check_pairing(cfg: &FitConfig, backend: &Backend) -> Result<()> {
    if cfg.precision != backend.precision() {
        return Err(GpError::InvalidConfig(format!(
            "configuration asks for {} precision but the backend runs in {}",
            cfg.precision,
            backend.precision()
        )));
    }
    if cfg.backend != backend.kind() {
        return Err(GpError::InvalidConfig(format!(
            "configuration names backend `{}` but `{}` was supplied",
            cfg.backend,
            backend.kind()
        )));
    }
    Ok(())
}

impl<'a> ProfileObjective<'a> {
    pub fn new(dataset: &'a Dataset, cfg: &'a FitConfig, backend: &'a Backend) -> Result<Self> {
        check_pairing(cfg, backend)?;
        cfg.hyperparameters(vec![0.0; dataset.d()])?;
        let tables = match backend.precision() {
            Precision::Double => Tables::Double(State {
                table: PairwisePowers::new(dataset.inputs(), cfg.p)?,
                y: dataset.outputs().to_vec(),
            }),
            Precision::Single => Tables::Single(State {
                table: PairwisePowers::new(dataset.inputs(), cfg.p)?,
                y: dataset.outputs().iter().map(|&v| v as f32).collect(),
            }),
        };
        Ok(Self { dataset, cfg, backend, tables })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn evaluate(&self, theta: &[f64]) -> ProfileEval {
        self.evaluate_with_factor(theta).0
    }

    /// Evaluates the objective and hands back the factor it used.
    pub fn evaluate_with_factor(&self, theta: &[f64]) -> (ProfileEval, Option<ModelFactor>) {
        let params = match self.cfg.hyperparameters(theta.to_vec()) {
            Ok(p) if p.dim() == self.dataset.d() => p,
            _ => return (ProfileEval::failed(theta), None),
        };
        let out = match &self.tables {
            Tables::Double(s) => self.run(s, &params),
            Tables::Single(s) => self.run(s, &params),
        };
        out.unwrap_or_else(|_| (ProfileEval::failed(theta), None))
    }

    fn run<T: IntoModelFactor>(
        &self,
        state: &State<T>,
        params: &Hyperparameters,
    ) -> Result<(ProfileEval, Option<ModelFactor>)> {
        let r = self.backend.correlation_from_table(&state.table, params)?;
        let factor = self.backend.factorize(&r)?;
        let est = plugins(self.backend, &factor, &state.y)?;
        let n = state.y.len();
        let value = objective_value(factor.log_det(), n, est.sigma2);
        let eval = ProfileEval {
            theta: params.theta.clone(),
            neg2_log_lik: if value.is_nan() { f64::INFINITY } else { value },
            mu_hat: est.mu,
            sigma2_hat: est.sigma2,
            jitter_used: factor.jitter_used(),
        };
        Ok((eval, Some(T::wrap(factor))))
    }
}

/// `-2 log L` (up to constants) at `theta`. Failures surface as `+inf`.
pub fn neg2_log_profile(
    theta: &[f64],
    dataset: &Dataset,
    cfg: &FitConfig,
    backend: &Backend,
) -> Result<ProfileEval> {
    if theta.len() != dataset.d() {
        return Err(GpError::DimensionMismatch(format!(
            "theta has {} entries for {} input dimensions",
            theta.len(),
            dataset.d()
        )));
    }
    Ok(ProfileObjective::new(dataset, cfg, backend)?.evaluate(theta))
}

/// A fitted emulator. Immutable once built.
#[derive(Clone, Debug)]
pub struct GpModel {
    dataset: Dataset,
    params: Hyperparameters,
    mu_hat: f64,
    sigma2_hat: f64,
    neg2_log_lik: f64,
    factor: ModelFactor,
    alpha: Vec<f64>,
    backend: BackendKind,
    evaluations: usize,
    trace: GaTrace,
}

impl GpModel {
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn params(&self) -> &Hyperparameters {
        &self.params
    }

    pub fn theta(&self) -> &[f64] {
        &self.params.theta
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    pub fn neg2_log_lik(&self) -> f64 {
        self.neg2_log_lik
    }

    pub fn factor(&self) -> &ModelFactor {
        &self.factor
    }

    pub fn jitter_used(&self) -> f64 {
        self.factor.jitter_used()
    }

    pub fn precision(&self) -> Precision {
        self.factor.precision()
    }

    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    /// `R^-1 (Y - mu_hat 1)`, widened to f64.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Objective evaluations spent producing this model.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn trace(&self) -> &GaTrace {
        &self.trace
    }

    /// Builds the model at a fixed `theta` with a single factorization.
    pub fn at_theta(
        dataset: &Dataset,
        cfg: &FitConfig,
        backend: &Backend,
        theta: &[f64],
    ) -> Result<Self> {
        let objective = ProfileObjective::new(dataset, cfg, backend)?;
        let (eval, factor) = objective.evaluate_with_factor(theta);
        let factor = factor.ok_or(GpError::NotPositiveDefinite {
            pivot: 0,
            last_jitter: *crate::backend::JITTER_LADDER.last().expect("non-empty ladder"),
        })?;
        Self::assemble(dataset, cfg, backend, eval, factor, 1, GaTrace::default())
    }

    fn assemble(
        dataset: &Dataset,
        cfg: &FitConfig,
        backend: &Backend,
        eval: ProfileEval,
        factor: ModelFactor,
        evaluations: usize,
        trace: GaTrace,
    ) -> Result<Self> {
        let alpha = match &factor {
            ModelFactor::Double(f) => {
                let resid: Vec<f64> = dataset.outputs().iter().map(|&y| y - eval.mu_hat).collect();
                backend.solve_full(f, &resid)?
            }
            ModelFactor::Single(f) => {
                let mu = eval.mu_hat as f32;
                let resid: Vec<f32> =
                    dataset.outputs().iter().map(|&y| y as f32 - mu).collect();
                backend.solve_full(f, &resid)?.into_iter().map(f64::from).collect()
            }
        };
        Ok(Self {
            dataset: dataset.clone(),
            params: cfg.hyperparameters(eval.theta)?,
            mu_hat: eval.mu_hat,
            sigma2_hat: eval.sigma2_hat,
            neg2_log_lik: eval.neg2_log_lik,
            factor,
            alpha,
            backend: backend.kind(),
            evaluations,
            trace,
        })
    }

    /// `max_i |(R alpha)_i - (y_i - mu_hat)|`, with `R` rebuilt in double
    /// precision including the jitter that was applied.
    pub fn alpha_residual(&self) -> Result<f64> {
        let r = build_corr_matrix::<f64>(self.dataset.inputs(), &self.params)?;
        let jitter = self.jitter_used();
        let n = self.dataset.n();
        let y = self.dataset.outputs();
        let mut worst = 0.0f64;
        for i in 0..n {
            let row = r.values().row(i);
            let ra: f64 = row.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>()
                + jitter * self.alpha[i];
            worst = worst.max((ra - (y[i] - self.mu_hat)).abs());
        }
        Ok(worst)
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.dataset.inputs()
    }
}

fn decode(z: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    z.iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| 10f64.powf(v).clamp(lo, hi))
        .collect()
}

fn log_bounds(bounds: &[(f64, f64)]) -> Vec<(f64, f64)> {
    bounds.iter().map(|&(lo, hi)| (lo.log10(), hi.log10())).collect()
}

#[derive(Default)]
struct BestCache {
    value: f64,
    entries: Vec<(Vec<f64>, ProfileEval, ModelFactor)>,
}

/// Fits `theta` by minimizing the profile objective with the GA over
/// `log10(theta)` inside `cfg.theta_bounds`. Uses exactly
/// `population * generations` objective evaluations; the factor of the best
/// evaluation is kept, so no refactorization happens at the end.
pub fn fit_gp(dataset: &Dataset, cfg: &FitConfig, backend: &Backend) -> Result<GpModel> {
    cfg.validate(dataset.d())?;
    let bounds = cfg.theta_bounds.resolve(dataset.d())?;
    let search = log_bounds(&bounds);
    let objective = ProfileObjective::new(dataset, cfg, backend)?;
    let cache = Mutex::new(BestCache { value: f64::INFINITY, entries: Vec::new() });

    let ga_cfg = crate::optimizer::GaConfig { seed: cfg.seed, ..cfg.ga.clone() };
    let outcome = ga_minimize(
        |z| {
            let theta = decode(z, &bounds);
            let (eval, factor) = objective.evaluate_with_factor(&theta);
            let value = eval.neg2_log_lik;
            if let Some(factor) = factor {
                let mut best = cache.lock().expect("cache lock");
                if value < best.value {
                    best.value = value;
                    best.entries.clear();
                }
                if value == best.value && !best.entries.iter().any(|(t, _, _)| *t == theta) {
                    best.entries.push((theta, eval, factor));
                }
            }
            value
        },
        &search,
        &ga_cfg,
    )?;
    if !outcome.best_value.is_finite() && outcome.best_value > 0.0 {
        return Err(GpError::AllInfinitePopulation);
    }
    let theta = decode(&outcome.best_point, &bounds);
    let evaluations = outcome.trace.evaluations();
    let cached = cache
        .into_inner()
        .expect("cache lock")
        .entries
        .into_iter()
        .find(|(t, _, _)| *t == theta);
    match cached {
        Some((_, eval, factor)) => {
            GpModel::assemble(dataset, cfg, backend, eval, factor, evaluations, outcome.trace)
        }
        None => {
            log::warn!("best factor missing from cache; refactorizing at theta = {theta:?}");
            let (eval, factor) = objective.evaluate_with_factor(&theta);
            let factor = factor.ok_or(GpError::AllInfinitePopulation)?;
            GpModel::assemble(dataset, cfg, backend, eval, factor, evaluations, outcome.trace)
        }
    }
}

/// Evaluations used by [`refine_fit`].
pub const REFINE_BUDGET: usize = 20;
/// Half-width of the per-coordinate search window, in log10(theta).
pub const REFINE_RADIUS: f64 = 0.25;

/// Double-precision coordinate-wise golden-section polish around the fitted
/// `theta`. Spends [`REFINE_BUDGET`] evaluations, plus one factorization for
/// the returned model when the polish found a better point. `backend` must
/// run in double precision.
pub fn refine_fit(model: &GpModel, cfg: &FitConfig, backend: &Backend) -> Result<GpModel> {
    if backend.precision() != Precision::Double {
        return Err(GpError::InvalidConfig("refinement runs in double precision".into()));
    }
    let dcfg = FitConfig { precision: Precision::Double, backend: backend.kind(), ..cfg.clone() };
    let dataset = model.dataset();
    let bounds = dcfg.theta_bounds.resolve(dataset.d())?;
    let search = log_bounds(&bounds);
    let objective = ProfileObjective::new(dataset, &dcfg, backend)?;
    let start: Vec<f64> = model.theta().iter().map(|t| t.log10()).collect();
    let start_value = objective.evaluate(model.theta()).neg2_log_lik;
    let (best, _) = golden_polish(
        |z| objective.evaluate(&decode(z, &bounds)).neg2_log_lik,
        &start,
        start_value,
        &search,
        REFINE_BUDGET - 1,
        REFINE_RADIUS,
    )?;
    let theta = decode(&best, &bounds);
    let mut refined = GpModel::at_theta(dataset, &dcfg, backend, &theta)?;
    refined.evaluations = model.evaluations + REFINE_BUDGET;
    refined.trace = model.trace.clone();
    Ok(refined)
}
