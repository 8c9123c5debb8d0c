//! Weighting functions `w_i(x)` and the softmax warp that turns them into
//! change-surface weights `σ(w_i(x))`.
//!
//! Random-kitchen-sink weights are evaluated as
//! `w(x) = Σ_i a_i cos(ω_iᵀ(x − c) + b_i)`, where the origin `c` is a fixed
//! centring point (a reparameterisation of the phases that keeps frequency
//! gradients well scaled on raw inputs such as calendar years).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::error::{mismatch, Error, Result};
use crate::scalar::Real;

/// Default number of random-kitchen-sink features.
pub const DEFAULT_FEATURES: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct RksWeight<T: Real> {
    /// Feature coefficients, length `m`.
    pub a: Vec<T>,
    /// Frequencies, `m × D`.
    pub omega: DMatrix<T>,
    /// Phases in `[0, 2π)`, length `m`.
    pub b: Vec<T>,
    /// Prior variance scale of the coefficients.
    pub sigma0: T,
    /// Squared prior length-scales, length `D`.
    pub lambda: Vec<T>,
    /// Input origin, length `D`.
    pub center: Vec<T>,
}

impl<T: Real> RksWeight<T> {
    pub fn features(&self) -> usize {
        self.a.len()
    }

    pub fn dims(&self) -> usize {
        self.omega.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.a.len();
        let d = self.lambda.len();
        if m == 0 || self.omega.nrows() != m || self.b.len() != m || self.omega.ncols() != d || self.center.len() != d {
            return Err(mismatch("inconsistent RKS weight shapes"));
        }
        let two_pi = T::two_pi();
        if self.b.iter().any(|&b| !(b >= T::zero() && b < two_pi)) {
            return Err(Error::InvalidParameter("RKS phases must lie in [0, 2π)".into()));
        }
        if self.lambda.iter().any(|&l| !(l > T::zero() && l.is_finite())) {
            return Err(Error::InvalidParameter("RKS length-scales must be positive".into()));
        }
        let finite = self.a.iter().chain(self.omega.iter()).chain(self.center.iter()).all(|v| v.is_finite());
        if !finite || !self.sigma0.is_finite() {
            return Err(Error::InvalidParameter("non-finite RKS parameter".into()));
        }
        Ok(())
    }

    fn phase(&self, i: usize, x: &[T]) -> T {
        let mut arg = self.b[i];
        for d in 0..self.dims() {
            arg += self.omega[(i, d)] * (x[d] - self.center[d]);
        }
        arg
    }

    pub fn eval(&self, x: &[T]) -> T {
        (0..self.features()).fold(T::zero(), |acc, i| acc + self.a[i] * self.phase(i, x).cos())
    }

    /// Packed frequencies are `ω · 2π l_d`, standard normal under the prior.
    fn omega_scale(&self, d: usize) -> T {
        T::two_pi() * self.lambda[d].sqrt()
    }

    pub fn n_params(&self) -> usize {
        self.features() * (2 + self.dims())
    }

    /// Layout: `a` (m), standardized `ω` (m × D, row-major), `b` (m).
    pub fn pack_into(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.a);
        for i in 0..self.features() {
            for d in 0..self.dims() {
                out.push(self.omega[(i, d)] * self.omega_scale(d));
            }
        }
        out.extend_from_slice(&self.b);
    }

    /// Phases are wrapped back into `[0, 2π)`.
    pub fn unpack(&mut self, p: &[T]) -> Result<usize> {
        let need = self.n_params();
        if p.len() < need {
            return Err(mismatch(format!("RKS weight needs {need} parameters, got {}", p.len())));
        }
        let (m, dims) = (self.features(), self.dims());
        self.a.copy_from_slice(&p[..m]);
        for i in 0..m {
            for d in 0..dims {
                self.omega[(i, d)] = p[m + i * dims + d] / self.omega_scale(d);
            }
        }
        let two_pi = T::two_pi();
        for (b, &v) in self.b.iter_mut().zip(&p[m + m * dims..need]) {
            let mut w = v % two_pi;
            if w < T::zero() {
                w += two_pi;
            }
            if w >= two_pi {
                w = T::zero();
            }
            *b = w;
        }
        Ok(need)
    }

    /// Value at `x` and its derivatives with respect to the packed
    /// parameters.
    pub fn grad(&self, x: &[T], out: &mut [T]) -> T {
        let (m, dims) = (self.features(), self.dims());
        let mut value = T::zero();
        for i in 0..m {
            let arg = self.phase(i, x);
            let (s, c) = (arg.sin(), arg.cos());
            value += self.a[i] * c;
            out[i] = c;
            for d in 0..dims {
                out[m + i * dims + d] = -self.a[i] * s * (x[d] - self.center[d]) / self.omega_scale(d);
            }
            out[m + m * dims + i] = -self.a[i] * s;
        }
        value
    }

    /// `|w(x)| ≤ √(2/m) Σ|a_i|` scaled back to this representation, i.e.
    /// `Σ|a_i|`.
    pub fn bound(&self) -> T {
        self.a.iter().fold(T::zero(), |acc, &a| acc + a.abs())
    }
}

/// Explicit polynomial weight `w(x) = Σ_k β_kᵀ x^k` (powers elementwise).
/// The constant block contributes `Σ_d β_0d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyWeight<T: Real> {
    /// `coeffs[k]` is the D-vector `β_k`.
    pub coeffs: Vec<Vec<T>>,
}

impl<T: Real> PolyWeight<T> {
    /// `β_0 + β_1ᵀ x`.
    pub fn linear(intercept: T, slope: Vec<T>) -> Self {
        let mut b0 = vec![T::zero(); slope.len()];
        if let Some(first) = b0.first_mut() {
            *first = intercept;
        }
        Self { coeffs: vec![b0, slope] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn dims(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        if d == 0 || self.coeffs.iter().any(|c| c.len() != d) {
            return Err(mismatch("polynomial coefficient blocks must share one dimension"));
        }
        if self.coeffs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite polynomial coefficient".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[T]) -> T {
        let mut total = T::zero();
        for (k, block) in self.coeffs.iter().enumerate() {
            for (d, &beta) in block.iter().enumerate() {
                total += beta * x[d].powi(k as i32);
            }
        }
        total
    }

    pub fn n_params(&self) -> usize {
        self.coeffs.len() * self.dims()
    }

    pub fn pack_into(&self, out: &mut Vec<T>) {
        for block in &self.coeffs {
            out.extend_from_slice(block);
        }
    }

    pub fn unpack(&mut self, p: &[T]) -> Result<usize> {
        let need = self.n_params();
        if p.len() < need {
            return Err(mismatch(format!("polynomial needs {need} parameters, got {}", p.len())));
        }
        let d = self.dims();
        for (k, block) in self.coeffs.iter_mut().enumerate() {
            block.copy_from_slice(&p[k * d..(k + 1) * d]);
        }
        Ok(need)
    }

    pub fn grad(&self, x: &[T], out: &mut [T]) -> T {
        let d = self.dims();
        for k in 0..self.coeffs.len() {
            for e in 0..d {
                out[k * d + e] = x[e].powi(k as i32);
            }
        }
        self.eval(x)
    }
}

/// One regime's weighting function.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightFunction<T: Real> {
    Rks(RksWeight<T>),
    Poly(PolyWeight<T>),
    /// Identically zero; used as the softmax reference regime.
    Zero,
}

impl<T: Real> WeightFunction<T> {
    pub fn eval(&self, x: &[T]) -> T {
        match self {
            WeightFunction::Rks(w) => w.eval(x),
            WeightFunction::Poly(w) => w.eval(x),
            WeightFunction::Zero => T::zero(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            WeightFunction::Rks(w) => w.n_params(),
            WeightFunction::Poly(w) => w.n_params(),
            WeightFunction::Zero => 0,
        }
    }

    pub fn pack_into(&self, out: &mut Vec<T>) {
        match self {
            WeightFunction::Rks(w) => w.pack_into(out),
            WeightFunction::Poly(w) => w.pack_into(out),
            WeightFunction::Zero => {}
        }
    }

    pub fn unpack(&mut self, p: &[T]) -> Result<usize> {
        match self {
            WeightFunction::Rks(w) => w.unpack(p),
            WeightFunction::Poly(w) => w.unpack(p),
            WeightFunction::Zero => Ok(0),
        }
    }

    /// Value at `x`; derivatives with respect to the packed parameters go
    /// to `out`.
    pub fn grad(&self, x: &[T], out: &mut [T]) -> T {
        match self {
            WeightFunction::Rks(w) => w.grad(x, out),
            WeightFunction::Poly(w) => w.grad(x, out),
            WeightFunction::Zero => T::zero(),
        }
    }

    fn dims(&self) -> Option<usize> {
        match self {
            WeightFunction::Rks(w) => Some(w.dims()),
            WeightFunction::Poly(w) => Some(w.dims()),
            WeightFunction::Zero => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            WeightFunction::Rks(w) => w.validate(),
            WeightFunction::Poly(w) => w.validate(),
            WeightFunction::Zero => Ok(()),
        }
    }
}

/// The `r` weighting functions of a change-surface model.
///
/// A single regime is allowed and yields the constant weight one (the plain
/// stationary model).
#[derive(Clone, Debug, PartialEq)]
pub struct ChangeSurface<T: Real> {
    weights: Vec<WeightFunction<T>>,
}

impl<T: Real> ChangeSurface<T> {
    pub fn new(weights: Vec<WeightFunction<T>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("change surface needs at least one regime".into()));
        }
        let mut dims = None;
        for w in &weights {
            w.validate()?;
            if let Some(d) = w.dims() {
                if dims.is_some_and(|e| e != d) {
                    return Err(mismatch("weight functions disagree on input dimension"));
                }
                dims = Some(d);
            }
        }
        Ok(Self { weights })
    }

    /// Single-regime surface (weight one everywhere).
    pub fn single() -> Self {
        Self { weights: vec![WeightFunction::Zero] }
    }

    pub fn regimes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[WeightFunction<T>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [WeightFunction<T>] {
        &mut self.weights
    }

    /// Input dimension, if any weight function fixes one.
    pub fn dims(&self) -> Option<usize> {
        self.weights.iter().find_map(WeightFunction::dims)
    }

    /// Raw weights `w_i(x)`.
    pub fn raw(&self, x: &[T]) -> Vec<T> {
        self.weights.iter().map(|w| w.eval(x)).collect()
    }

    /// Warped weights `σ(w_i(x))`.
    pub fn probs(&self, x: &[T]) -> Vec<T> {
        softmax(&self.raw(x))
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(WeightFunction::n_params).sum()
    }

    pub fn pack_into(&self, out: &mut Vec<T>) {
        for w in &self.weights {
            w.pack_into(out);
        }
    }

    pub fn unpack(&mut self, p: &[T]) -> Result<usize> {
        let mut used = 0;
        for w in &mut self.weights {
            used += w.unpack(&p[used..])?;
        }
        Ok(used)
    }
}

/// Numerically safe softmax (max-subtracted).
pub fn softmax<T: Real>(w: &[T]) -> Vec<T> {
    let Some(&first) = w.first() else { return Vec::new() };
    let max = w.iter().copied().fold(first, |m, v| if v > m { v } else { m });
    let exps: Vec<T> = w.iter().map(|&v| (v - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |acc, &e| acc + e);
    exps.into_iter().map(|e| e / total).collect()
}

/// `warp(surface, x)[i][p] = σ(w_i(x_p))`; points are rows of `x`.
pub fn warp<T: Real>(surface: &ChangeSurface<T>, x: &DMatrix<T>) -> Vec<Vec<T>> {
    let r = surface.regimes();
    let mut out = vec![Vec::with_capacity(x.nrows()); r];
    let mut point = vec![T::zero(); x.ncols()];
    for p in 0..x.nrows() {
        for (d, v) in point.iter_mut().enumerate() {
            *v = x[(p, d)];
        }
        for (i, s) in surface.probs(&point).into_iter().enumerate() {
            out[i].push(s);
        }
    }
    out
}

/// RKS feature matrix `√(2/m) cos(ω_iᵀ x + b_i)`, `|x| × m`.
pub fn rks_features<T: Real>(x: &DMatrix<T>, omega: &DMatrix<T>, b: &[T]) -> Result<DMatrix<T>> {
    let m = omega.nrows();
    if b.len() != m || omega.ncols() != x.ncols() {
        return Err(mismatch(format!(
            "features: omega is {}×{}, {} phases, points have {} columns",
            m,
            omega.ncols(),
            b.len(),
            x.ncols()
        )));
    }
    let scale = (T::lit(2.0) / T::from_count(m)).sqrt();
    Ok(DMatrix::from_fn(x.nrows(), m, |p, i| {
        let mut arg = b[i];
        for d in 0..x.ncols() {
            arg += omega[(i, d)] * x[(p, d)];
        }
        scale * arg.cos()
    }))
}

/// Draws a weight function from the RKS prior:
/// `a ~ N(0, σ₀/m I)`, `ω_i ~ N(0, Λ⁻¹/(4π²))`, `b ~ U[0, 2π)`.
pub fn sample_rks_prior<T: Real, R: Rng + ?Sized>(
    m: usize,
    lambda: &[T],
    sigma0: T,
    center: &[T],
    rng: &mut R,
) -> RksWeight<T> {
    assert!(m >= 1, "at least one RKS feature");
    assert_eq!(lambda.len(), center.len());
    let dims = lambda.len();
    let a_sd = (sigma0.as_f64() / m as f64).sqrt();
    let a = (0..m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(a_sd * z)
        })
        .collect();
    let omega = DMatrix::from_fn(m, dims, |_, d| {
        let sd = 1.0 / (2.0 * PI * lambda[d].as_f64().sqrt());
        let z: f64 = Normal::new(0.0, sd).expect("positive sd").sample(rng);
        T::lit(z)
    });
    // drawn row-major would be nicer for reproducibility across shapes, but
    // from_fn fills column-major; keep it, the order is fixed either way
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let b = (0..m)
        .map(|_| {
            let v = T::lit(phase.sample(rng));
            if v >= T::two_pi() {
                T::zero()
            } else {
                v
            }
        })
        .collect();
    RksWeight { a, omega, b, sigma0, lambda: lambda.to_vec(), center: center.to_vec() }
}

/// Characteristics of `σ(w_1)` along one time line.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSummary<T: Real> {
    /// Coordinates of the non-time axes identifying the slice.
    pub slice: Vec<T>,
    /// First 0.5 crossing, `None` when the surface never crosses.
    pub midpoint: Option<T>,
    /// `0.5 / (t_0.75 − t_0.25)`.
    pub slope: Option<T>,
    /// `|t_0.9 − t_0.1|`.
    pub transition: Option<T>,
    /// Number of 0.5 crossings along the line.
    pub crossings: usize,
}

impl<T: Real> SliceSummary<T> {
    pub fn no_crossing(&self) -> bool {
        self.midpoint.is_none()
    }
}

/// First location where the piecewise-linear interpolant of `values`
/// crosses `level`, in increasing `times` order.
pub fn first_crossing<T: Real>(times: &[T], values: &[T], level: T) -> Option<T> {
    for k in 1..times.len() {
        let (v0, v1) = (values[k - 1] - level, values[k] - level);
        if v0 == T::zero() {
            return Some(times[k - 1]);
        }
        if (v0 < T::zero()) != (v1 < T::zero()) || v1 == T::zero() {
            let frac = v0 / (v0 - v1);
            return Some(times[k - 1] + frac * (times[k] - times[k - 1]));
        }
    }
    None
}

fn count_crossings<T: Real>(values: &[T], level: T) -> usize {
    values.windows(2).filter(|w| (w[0] > level) != (w[1] > level)).count()
}

/// Midpoint, slope and 0.1→0.9 transition width of `σ(w_1)` along
/// `time_axis`, for each slice given as the coordinates of the other axes.
pub fn surface_summary<T: Real>(
    surface: &ChangeSurface<T>,
    time_axis: usize,
    times: &[T],
    slices: &[Vec<T>],
) -> Result<Vec<SliceSummary<T>>> {
    if surface.regimes() != 2 {
        return Err(Error::InvalidParameter("surface summary needs exactly two regimes".into()));
    }
    let dims = surface.dims().unwrap_or(slices.first().map_or(1, |s| s.len() + 1));
    if time_axis >= dims {
        return Err(mismatch(format!("time axis {time_axis} outside {dims} dimensions")));
    }
    let mut out = Vec::with_capacity(slices.len());
    for slice in slices {
        if slice.len() + 1 != dims {
            return Err(mismatch("slice coordinates must cover every non-time axis"));
        }
        let values: Vec<T> = times
            .iter()
            .map(|&t| {
                let mut x = slice.clone();
                x.insert(time_axis, t);
                surface.probs(&x)[0]
            })
            .collect();
        out.push(line_summary(slice.clone(), times, &values));
    }
    Ok(out)
}

/// Summary of one already-evaluated line.
pub fn line_summary<T: Real>(slice: Vec<T>, times: &[T], values: &[T]) -> SliceSummary<T> {
    let at = |level: f64| first_crossing(times, values, T::lit(level));
    let midpoint = at(0.5);
    let slope = match (at(0.25), at(0.75)) {
        (Some(lo), Some(hi)) if hi != lo => Some(T::lit(0.5) / (hi - lo)),
        _ => None,
    };
    let transition = match (at(0.1), at(0.9)) {
        (Some(lo), Some(hi)) => Some((hi - lo).abs()),
        _ => None,
    };
    SliceSummary { slice, midpoint, slope, transition, crossings: count_crossings(values, T::lit(0.5)) }
}
