//! Hyperparameter optimization of a change-surface model.

use std::fmt;
use std::time::Instant;

use crate::error::Result;
use crate::grid::{GridDataset, Observations};
use crate::kron::CgConfig;
use crate::logdet::{WeylStrategy, DEFAULT_DENSE_CAP};
use crate::model::{central_difference, nlml_bound, nlml_exact_grad, response_mean, ChangeSurfaceModel};
use crate::optim::{minimize, LbfgsConfig, Termination};
use crate::scalar::Real;

/// Objective minimized by [`fit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    /// Dense NLML with analytic gradients.
    Exact,
    /// Weyl-bounded NLML on a complete grid, central-difference gradients.
    Bounded(WeylStrategy),
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitMode::Exact => write!(f, "exact"),
            FitMode::Bounded(s) => write!(f, "bounded-{s}"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum TrainingData<'a, T: Real> {
    Points(&'a Observations<T>),
    Grid(&'a GridDataset<T>),
}

impl<T: Real> TrainingData<'_, T> {
    fn y(&self) -> &[T] {
        match self {
            TrainingData::Points(o) => &o.y,
            TrainingData::Grid(g) => g.y(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub mode: FitMode,
    pub optimizer: LbfgsConfig,
    pub dense_cap: usize,
    pub cg: CgConfig,
    /// Relative central-difference step for bounded mode.
    pub fd_step: f64,
    /// Reset the response offset to the training mean before fitting.
    pub center: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: FitMode::Exact,
            optimizer: LbfgsConfig::default(),
            dense_cap: DEFAULT_DENSE_CAP,
            // finite differences of the bound need a tightly solved quadratic term
            cg: CgConfig { tol: 1e-10, max_iter: 2000 },
            fd_step: 1e-5,
            center: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub objective: f64,
    pub initial_objective: f64,
    /// Accepted objective values, non-increasing.
    pub trace: Vec<f64>,
    pub mode: FitMode,
    pub wall_seconds: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Value (and gradient) of the selected objective at packed parameters.
pub fn objective<T: Real>(
    model: &ChangeSurfaceModel<T>,
    data: TrainingData<'_, T>,
    config: &FitConfig,
    params: &[T],
) -> Result<(T, Vec<T>)> {
    let m = model.with_params(params)?;
    match (config.mode, data) {
        (FitMode::Exact, TrainingData::Points(obs)) => nlml_exact_grad(&m, obs, config.dense_cap),
        (FitMode::Exact, TrainingData::Grid(grid)) => nlml_exact_grad(&m, &grid.observations(), config.dense_cap),
        (FitMode::Bounded(strategy), TrainingData::Grid(grid)) => {
            let eval = |p: &[T]| -> Result<T> { Ok(nlml_bound(&model.with_params(p)?, grid, strategy, &config.cg)?.value) };
            let value = eval(params)?;
            let grad = central_difference(eval, params, config.fd_step)?;
            Ok((value, grad))
        }
        (FitMode::Bounded(_), TrainingData::Points(_)) => Err(crate::error::Error::IncompleteGrid(
            "bounded objective needs a complete grid".into(),
        )),
    }
}

/// Quasi-Newton descent on the selected objective.
pub fn fit<T: Real>(
    model: &ChangeSurfaceModel<T>,
    data: TrainingData<'_, T>,
    config: &FitConfig,
) -> Result<(ChangeSurfaceModel<T>, FitReport)> {
    let start = Instant::now();
    let mut base = model.clone();
    if config.center {
        base.y_offset = response_mean(data.y());
    }
    let x0 = base.pack();
    let result = minimize(|p| objective(&base, data, config, p), &x0, &config.optimizer)?;
    let fitted = base.with_params(&result.x)?;
    let trace: Vec<f64> = result.trace.iter().map(|v| v.as_f64()).collect();
    let report = FitReport {
        objective: result.value.as_f64(),
        initial_objective: trace[0],
        trace,
        mode: config.mode,
        wall_seconds: start.elapsed().as_secs_f64(),
        converged: result.termination.converged(),
        iterations: result.iterations,
        evaluations: result.evaluations,
        termination: result.termination,
    };
    Ok((fitted, report))
}
