//! Stationary base kernels: RBF and the per-dimension spectral mixture.
//!
//! Both kernels are products of one-dimensional factors, which is what makes
//! the Kronecker decomposition of grid covariances possible. Each factor is
//! an even function of the coordinate difference.
//!
//! Flat parameter layout (per dimension, in order):
//! * spectral mixture: for each component `ln weight, mean, ln var`;
//! * RBF: `ln length_scale`, plus `ln signal_var` on dimension 0.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{mismatch, Error, Result};
use crate::scalar::Real;

/// Relative diagonal jitter applied to factors before eigendecomposition.
pub const FACTOR_JITTER: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RbfParams<T: Real> {
    pub length_scales: Vec<T>,
    pub signal_var: T,
}

/// One Gaussian component of a one-dimensional spectral density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmComponent<T: Real> {
    pub weight: T,
    /// Spectral mean, in cycles per input unit.
    pub mean: T,
    /// Spectral variance, in (cycles per input unit)².
    pub var: T,
}

/// Product of one-dimensional spectral mixtures, `dims[d]` holding the
/// components of dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmParams<T: Real> {
    pub dims: Vec<Vec<SmComponent<T>>>,
}

impl<T: Real> SmParams<T> {
    /// `q` identical components per dimension, weights summing to `scale`
    /// on the first dimension and to one elsewhere.
    pub fn uniform(dims: usize, q: usize, scale: T, var: T) -> Self {
        let dims = (0..dims)
            .map(|d| {
                let total = if d == 0 { scale } else { T::one() };
                (0..q)
                    .map(|c| SmComponent {
                        weight: total / T::from_count(q),
                        mean: T::from_count(c) * var.sqrt(),
                        var,
                    })
                    .collect()
            })
            .collect();
        Self { dims }
    }

    pub fn components(&self) -> usize {
        self.dims.first().map_or(0, Vec::len)
    }
}

/// Covariance definition for one regime.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec<T: Real> {
    Rbf(RbfParams<T>),
    SpectralMixture(SmParams<T>),
}

impl<T: Real> KernelSpec<T> {
    pub fn dims(&self) -> usize {
        match self {
            KernelSpec::Rbf(p) => p.length_scales.len(),
            KernelSpec::SpectralMixture(p) => p.dims.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: T| v.is_finite() && v > T::zero();
        match self {
            KernelSpec::Rbf(p) => {
                if p.length_scales.is_empty() {
                    return Err(Error::InvalidParameter("RBF kernel without dimensions".into()));
                }
                if !p.length_scales.iter().all(|&l| finite_pos(l)) || !finite_pos(p.signal_var) {
                    return Err(Error::InvalidParameter(
                        "RBF length-scales and signal variance must be positive".into(),
                    ));
                }
            }
            KernelSpec::SpectralMixture(p) => {
                if p.dims.is_empty() {
                    return Err(Error::InvalidParameter("SM kernel without dimensions".into()));
                }
                for (d, comps) in p.dims.iter().enumerate() {
                    if comps.is_empty() {
                        return Err(Error::InvalidParameter(format!("SM dimension {d} has no components")));
                    }
                    let ok = comps.iter().all(|c| {
                        c.weight.is_finite() && c.weight >= T::zero() && c.mean.is_finite() && finite_pos(c.var)
                    });
                    if !ok || !comps.iter().any(|c| c.weight > T::zero()) {
                        return Err(Error::InvalidParameter(format!(
                            "SM dimension {d}: weights must be nonnegative with one positive, variances positive"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Value of the dimension-`d` factor at coordinate difference `delta`.
    pub fn factor_value(&self, d: usize, delta: T) -> T {
        match self {
            KernelSpec::Rbf(p) => {
                let l = p.length_scales[d];
                let v = (-(delta * delta) / (T::lit(2.0) * l * l)).exp();
                if d == 0 {
                    p.signal_var * v
                } else {
                    v
                }
            }
            KernelSpec::SpectralMixture(p) => {
                let two_pi = T::lit(2.0 * PI);
                let two_pi2 = T::lit(2.0 * PI * PI);
                p.dims[d].iter().fold(T::zero(), |acc, c| {
                    acc + c.weight * (two_pi * delta * c.mean).cos() * (-two_pi2 * delta * delta * c.var).exp()
                })
            }
        }
    }

    /// `k(x, x′)` as the product of the per-dimension factors.
    pub fn eval(&self, xa: &[T], xb: &[T]) -> T {
        debug_assert_eq!(xa.len(), self.dims());
        xa.iter()
            .zip(xb)
            .enumerate()
            .fold(T::one(), |acc, (d, (&a, &b))| acc * self.factor_value(d, a - b))
    }

    /// `k(x, x)`.
    pub fn variance(&self) -> T {
        (0..self.dims()).fold(T::one(), |acc, d| acc * self.factor_value(d, T::zero()))
    }

    /// Number of packed parameters owned by dimension `d`.
    pub fn dim_param_count(&self, d: usize) -> usize {
        match self {
            KernelSpec::Rbf(_) => {
                if d == 0 {
                    2
                } else {
                    1
                }
            }
            KernelSpec::SpectralMixture(p) => 3 * p.dims[d].len(),
        }
    }

    pub fn n_params(&self) -> usize {
        (0..self.dims()).map(|d| self.dim_param_count(d)).sum()
    }

    pub fn pack_into(&self, out: &mut Vec<T>) {
        match self {
            KernelSpec::Rbf(p) => {
                for (d, &l) in p.length_scales.iter().enumerate() {
                    out.push(l.ln());
                    if d == 0 {
                        out.push(p.signal_var.ln());
                    }
                }
            }
            KernelSpec::SpectralMixture(p) => {
                for comps in &p.dims {
                    for c in comps {
                        out.push(c.weight.ln());
                        out.push(c.mean);
                        out.push(c.var.ln());
                    }
                }
            }
        }
    }

    pub fn pack(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        self.pack_into(&mut out);
        out
    }

    /// Reads this kernel's parameters from the front of `params`, keeping
    /// the current shape; returns the number consumed.
    pub fn unpack(&mut self, params: &[T]) -> Result<usize> {
        let need = self.n_params();
        if params.len() < need {
            return Err(mismatch(format!("kernel needs {need} parameters, got {}", params.len())));
        }
        let mut it = params.iter().copied();
        let mut next = || it.next().expect("length checked");
        match self {
            KernelSpec::Rbf(p) => {
                for d in 0..p.length_scales.len() {
                    p.length_scales[d] = next().exp();
                    if d == 0 {
                        p.signal_var = next().exp();
                    }
                }
            }
            KernelSpec::SpectralMixture(p) => {
                for comps in &mut p.dims {
                    for c in comps.iter_mut() {
                        c.weight = next().exp();
                        c.mean = next();
                        c.var = next().exp();
                    }
                }
            }
        }
        Ok(need)
    }

    /// Value of the dimension-`d` factor together with its derivatives
    /// with respect to that dimension's packed parameters (written to `out`,
    /// of length [`dim_param_count`](Self::dim_param_count)).
    pub fn factor_grad(&self, d: usize, delta: T, out: &mut [T]) -> T {
        match self {
            KernelSpec::Rbf(p) => {
                let l = p.length_scales[d];
                let r2 = delta * delta / (l * l);
                let base = (-r2 / T::lit(2.0)).exp();
                let v = if d == 0 { p.signal_var * base } else { base };
                out[0] = v * r2;
                if d == 0 {
                    out[1] = v;
                }
                v
            }
            KernelSpec::SpectralMixture(p) => {
                let two_pi = T::lit(2.0 * PI);
                let two_pi2 = T::lit(2.0 * PI * PI);
                let mut total = T::zero();
                for (q, c) in p.dims[d].iter().enumerate() {
                    let arg = two_pi * delta * c.mean;
                    let decay = (-two_pi2 * delta * delta * c.var).exp();
                    let cosv = arg.cos();
                    let term = c.weight * cosv * decay;
                    total += term;
                    out[3 * q] = term;
                    out[3 * q + 1] = -c.weight * two_pi * delta * arg.sin() * decay;
                    out[3 * q + 2] = -term * two_pi2 * delta * delta * c.var;
                }
                total
            }
        }
    }
}

/// Dimension-`d` factor evaluated between two coordinate lists.
pub fn factor_matrix<T: Real>(spec: &KernelSpec<T>, d: usize, a: &[T], b: &[T]) -> DMatrix<T> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| spec.factor_value(d, a[i] - b[j]))
}

/// Dense `|xa| × |xb|` kernel matrix; points are rows.
pub fn eval_dense<T: Real>(spec: &KernelSpec<T>, xa: &DMatrix<T>, xb: &DMatrix<T>) -> Result<DMatrix<T>> {
    let dims = spec.dims();
    if xa.ncols() != dims || xb.ncols() != dims {
        return Err(mismatch(format!(
            "kernel has {dims} dimensions, points have {} and {}",
            xa.ncols(),
            xb.ncols()
        )));
    }
    Ok(DMatrix::from_fn(xa.nrows(), xb.nrows(), |i, j| {
        (0..dims).fold(T::one(), |acc, d| acc * spec.factor_value(d, xa[(i, d)] - xb[(j, d)]))
    }))
}

/// Per-dimension factors whose Kronecker product is the kernel matrix on
/// the full grid spanned by `axes` (axis 0 slowest).
pub fn eval_factors<T: Real>(spec: &KernelSpec<T>, axes: &[Vec<T>]) -> Result<Vec<DMatrix<T>>> {
    if axes.len() != spec.dims() {
        return Err(mismatch(format!("kernel has {} dimensions, grid has {}", spec.dims(), axes.len())));
    }
    Ok(axes.iter().enumerate().map(|(d, ax)| factor_matrix(spec, d, ax, ax)).collect())
}

/// Adds `FACTOR_JITTER × max diagonal` to the diagonal of a factor.
pub fn add_factor_jitter<T: Real>(factor: &mut DMatrix<T>) {
    let scale = factor.diagonal().iter().fold(T::zero(), |m, &v| if v > m { v } else { m });
    let jitter = T::lit(FACTOR_JITTER) * scale;
    for i in 0..factor.nrows() {
        factor[(i, i)] += jitter;
    }
}
