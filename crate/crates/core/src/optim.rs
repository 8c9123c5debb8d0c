//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when `‖g‖_∞ ≤ grad_tol`.
    pub grad_tol: f64,
    /// Stop when an accepted step improves the objective by less than
    /// `rel_tol · max(1, |f|)`.
    pub rel_tol: f64,
    /// Largest parameter change of the very first step.
    pub first_step: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            memory: 10,
            grad_tol: 1e-5,
            rel_tol: 1e-9,
            first_step: 1.0,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    ObjectiveStalled,
    MaxIterations,
    LineSearchFailure,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::GradientTolerance | Termination::ObjectiveStalled)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::GradientTolerance => "gradient-tolerance",
            Termination::ObjectiveStalled => "objective-stalled",
            Termination::MaxIterations => "max-iterations",
            Termination::LineSearchFailure => "line-search-failure",
        })
    }
}

#[derive(Clone, Debug)]
pub struct OptimResult<T: Real> {
    pub x: Vec<T>,
    pub value: T,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Minimizes `f`, which returns the objective and its gradient.
///
/// Evaluations that fail or return non-finite values are treated as `+∞`
/// and shrink the step; the initial point must evaluate.
pub fn minimize<T: Real>(
    mut f: impl FnMut(&[T]) -> Result<(T, Vec<T>)>,
    x0: &[T],
    config: &LbfgsConfig,
) -> Result<OptimResult<T>> {
    let mut evaluations = 1;
    let (mut fx, mut g) = f(x0)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("objective is not finite at the starting point".into()));
    }
    let mut x = x0.to_vec();
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(config.memory);
    let grad_tol = T::lit(config.grad_tol);
    let inf_norm = |v: &[T]| v.iter().fold(T::zero(), |m, &x| if x.abs() > m { x.abs() } else { m });

    for iter in 0..config.max_iter {
        if inf_norm(&g) <= grad_tol {
            return Ok(finish(x, fx, trace, iter, evaluations, Termination::GradientTolerance));
        }
        let mut d = direction(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            history.clear();
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = if history.is_empty() {
            let big = inf_norm(&d);
            let cap = T::lit(config.first_step);
            if big > cap {
                cap / big
            } else {
                T::one()
            }
        } else {
            T::one()
        };

        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let trial: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a + step * b).collect();
            evaluations += 1;
            if let Ok((ft, gt)) = f(&trial) {
                let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
                if finite && ft <= fx + T::lit(config.armijo) * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        let Some((xn, fnew, gn)) = accepted else {
            return Ok(finish(x, fx, trace, iter, evaluations, Termination::LineSearchFailure));
        };

        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::lit(1e-10) * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        trace.push(fx);
        let scale = if fx.abs() > T::one() { fx.abs() } else { T::one() };
        if improvement <= T::lit(config.rel_tol) * scale {
            return Ok(finish(x, fx, trace, iter + 1, evaluations, Termination::ObjectiveStalled));
        }
    }
    Ok(finish(x, fx, trace, config.max_iter, evaluations, Termination::MaxIterations))
}

fn finish<T: Real>(
    x: Vec<T>,
    value: T,
    trace: Vec<T>,
    iterations: usize,
    evaluations: usize,
    termination: Termination,
) -> OptimResult<T> {
    OptimResult { x, value, trace, iterations, evaluations, termination }
}

/// Two-loop recursion: `−H g`.
fn direction<T: Real>(g: &[T], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.into_iter().map(|v| -v).collect()
}
