//! The change-surface Gaussian process.
//!
//! `k(x, x′) = Σ_i σ_i(x) k_i(x, x′) σ_i(x′)` with `σ` the softmax over the
//! weighting functions, plus i.i.d. Gaussian noise. Responses are modelled
//! after subtracting a fixed offset (the training mean when fitted).

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::dense::Cholesky;
use crate::error::{mismatch, Error, Result};
use crate::grid::{GridDataset, Observations};
use crate::kernels::{eval_dense, eval_factors, KernelSpec};
use crate::kron::{cg_solve, kron_vec, CgConfig, KronOperator, KronTerm};
use crate::logdet::{term_spectra, weyl_logdet, WeylStrategy, DEFAULT_DENSE_CAP};
use crate::scalar::{dot, Real};
use crate::warp::{warp, ChangeSurface};

#[derive(Clone, Debug, PartialEq)]
pub struct ChangeSurfaceModel<T: Real> {
    pub surface: ChangeSurface<T>,
    /// One kernel per regime.
    pub kernels: Vec<KernelSpec<T>>,
    pub noise_var: T,
    pub y_offset: T,
}

impl<T: Real> ChangeSurfaceModel<T> {
    pub fn new(surface: ChangeSurface<T>, kernels: Vec<KernelSpec<T>>, noise_var: T) -> Result<Self> {
        let model = Self { surface, kernels, noise_var, y_offset: T::zero() };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.len() != self.surface.regimes() {
            return Err(mismatch(format!(
                "{} kernels for {} regimes",
                self.kernels.len(),
                self.surface.regimes()
            )));
        }
        let dims = self.kernels[0].dims();
        for k in &self.kernels {
            k.validate()?;
            if k.dims() != dims {
                return Err(mismatch("regime kernels disagree on input dimension"));
            }
        }
        if self.surface.dims().is_some_and(|d| d != dims) {
            return Err(mismatch("weighting functions and kernels disagree on input dimension"));
        }
        if !(self.noise_var > T::zero() && self.noise_var.is_finite()) {
            return Err(Error::InvalidParameter("noise variance must be positive".into()));
        }
        Ok(())
    }

    pub fn regimes(&self) -> usize {
        self.kernels.len()
    }

    pub fn dims(&self) -> usize {
        self.kernels[0].dims()
    }

    /// Layout: every kernel in regime order, then the weighting functions,
    /// then `ln σ²`.
    pub fn n_params(&self) -> usize {
        self.kernels.iter().map(KernelSpec::n_params).sum::<usize>() + self.surface.n_params() + 1
    }

    pub fn pack(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        for k in &self.kernels {
            k.pack_into(&mut out);
        }
        self.surface.pack_into(&mut out);
        out.push(self.noise_var.ln());
        out
    }

    pub fn unpack(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(mismatch(format!("model has {} parameters, got {}", self.n_params(), p.len())));
        }
        let mut used = 0;
        for k in &mut self.kernels {
            used += k.unpack(&p[used..])?;
        }
        used += self.surface.unpack(&p[used..])?;
        self.noise_var = p[used].exp();
        Ok(())
    }

    /// Copy with parameters `p`.
    pub fn with_params(&self, p: &[T]) -> Result<Self> {
        let mut m = self.clone();
        m.unpack(p)?;
        m.validate()?;
        Ok(m)
    }

    /// Softmax weights per regime at every observation.
    pub fn scales(&self, points: &DMatrix<T>) -> Vec<Vec<T>> {
        warp(&self.surface, points)
    }

    fn check_points(&self, points: &DMatrix<T>) -> Result<()> {
        if points.ncols() != self.dims() {
            return Err(mismatch(format!("model has {} dimensions, points have {}", self.dims(), points.ncols())));
        }
        Ok(())
    }

    /// Noise-free covariance between two point sets.
    pub fn cross_cov(&self, xa: &DMatrix<T>, xb: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_points(xa)?;
        self.check_points(xb)?;
        let (sa, sb) = (self.scales(xa), self.scales(xb));
        let mut out = DMatrix::zeros(xa.nrows(), xb.nrows());
        for (i, k) in self.kernels.iter().enumerate() {
            let ki = eval_dense(k, xa, xb)?;
            for q in 0..xb.nrows() {
                for p in 0..xa.nrows() {
                    out[(p, q)] += sa[i][p] * ki[(p, q)] * sb[i][q];
                }
            }
        }
        Ok(out)
    }

    /// Prior variance `k(x, x)` at each point.
    pub fn prior_var(&self, points: &DMatrix<T>) -> Vec<T> {
        let s = self.scales(points);
        (0..points.nrows())
            .map(|p| {
                self.kernels.iter().enumerate().fold(T::zero(), |acc, (i, k)| acc + s[i][p] * s[i][p] * k.variance())
            })
            .collect()
    }
}

/// Per-regime, per-dimension factor values over the distinct coordinates.
struct FactorTables<T: Real> {
    /// `values[i][d]` is `|axes_d| × |axes_d|`.
    values: Vec<Vec<DMatrix<T>>>,
}

impl<T: Real> FactorTables<T> {
    fn new(model: &ChangeSurfaceModel<T>, axes: &[Vec<T>]) -> Self {
        let values = model
            .kernels
            .iter()
            .map(|k| {
                axes.iter()
                    .enumerate()
                    .map(|(d, ax)| DMatrix::from_fn(ax.len(), ax.len(), |a, b| k.factor_value(d, ax[a] - ax[b])))
                    .collect()
            })
            .collect();
        Self { values }
    }

    #[inline]
    fn kernel(&self, i: usize, ip: &[usize], iq: &[usize]) -> T {
        self.values[i].iter().enumerate().fold(T::one(), |acc, (d, f)| acc * f[(ip[d], iq[d])])
    }
}

/// Noise-free training covariance; errors past `cap` points.
pub fn composite_dense<T: Real>(model: &ChangeSurfaceModel<T>, obs: &Observations<T>, cap: usize) -> Result<DMatrix<T>> {
    model.check_points(&obs.points)?;
    let n = obs.len();
    if n > cap {
        return Err(Error::SizeCap { size: n, cap });
    }
    let tables = FactorTables::new(model, &obs.axes);
    let s = model.scales(&obs.points);
    let mut k = DMatrix::zeros(n, n);
    for q in 0..n {
        for p in q..n {
            let v = (0..model.regimes()).fold(T::zero(), |acc, i| {
                acc + s[i][p] * s[i][q] * tables.kernel(i, &obs.index[p], &obs.index[q])
            });
            k[(p, q)] = v;
            k[(q, p)] = v;
        }
    }
    Ok(k)
}

fn centred<T: Real>(model: &ChangeSurfaceModel<T>, y: &[T]) -> Vec<T> {
    y.iter().map(|&v| v - model.y_offset).collect()
}

fn half_log_2pi<T: Real>(n: usize) -> T {
    T::lit(0.5 * n as f64 * (2.0 * PI).ln())
}

fn factor_noisy<T: Real>(model: &ChangeSurfaceModel<T>, obs: &Observations<T>, cap: usize) -> Result<Cholesky<T>> {
    let mut k = composite_dense(model, obs, cap)?;
    for i in 0..obs.len() {
        k[(i, i)] += model.noise_var;
    }
    Cholesky::new(k)
}

/// Exact negative log marginal likelihood
/// `½ rᵀK⁻¹r + ½ log|K| + (n/2) log 2π` with `K` including noise.
pub fn nlml_exact<T: Real>(model: &ChangeSurfaceModel<T>, obs: &Observations<T>, cap: usize) -> Result<T> {
    let chol = factor_noisy(model, obs, cap)?;
    let r = centred(model, &obs.y);
    let z = chol.forward(&r);
    let half = T::lit(0.5);
    Ok(half * z.dot(&z) + half * chol.log_det() + half_log_2pi(obs.len()))
}

/// Exact NLML and its gradient with respect to [`ChangeSurfaceModel::pack`].
pub fn nlml_exact_grad<T: Real>(
    model: &ChangeSurfaceModel<T>,
    obs: &Observations<T>,
    cap: usize,
) -> Result<(T, Vec<T>)> {
    let n = obs.len();
    let chol = factor_noisy(model, obs, cap)?;
    let r = centred(model, &obs.y);
    let alpha = chol.solve(&r);
    let half = T::lit(0.5);
    let value = half * dot(&r, alpha.as_slice()) + half * chol.log_det() + half_log_2pi(n);

    // W = K⁻¹ − ααᵀ, so that ∂NLML/∂θ = ½ tr(W ∂K)
    let mut w = chol.inverse();
    w.ger(-T::one(), &alpha, &alpha, T::one());

    let r_count = model.regimes();
    let dims = model.dims();
    let tables = FactorTables::new(model, &obs.axes);
    let s = model.scales(&obs.points);

    // reduced[i][d][a, b] = Σ_{p,q: idx=a,b} W_pq s_i(p) s_i(q) Π_{e≠d} F_ie
    let mut reduced: Vec<Vec<DMatrix<T>>> = (0..r_count)
        .map(|_| obs.axes.iter().map(|ax| DMatrix::zeros(ax.len(), ax.len())).collect())
        .collect();
    // u[i][p] = Σ_q W_pq K_i,pq s_i(q)
    let mut u = vec![vec![T::zero(); n]; r_count];
    let mut f = vec![T::zero(); dims];
    let mut prefix = vec![T::one(); dims + 1];
    for i in 0..r_count {
        let fi = &tables.values[i];
        let (si, ui, red) = (&s[i], &mut u[i], &mut reduced[i]);
        for q in 0..n {
            let iq = &obs.index[q];
            let sq = si[q];
            let wcol = w.column(q);
            for p in 0..n {
                let ip = &obs.index[p];
                for d in 0..dims {
                    f[d] = fi[d][(ip[d], iq[d])];
                    prefix[d + 1] = prefix[d] * f[d];
                }
                let kval = prefix[dims];
                let wpq = wcol[p];
                ui[p] += wpq * kval * sq;
                let ws = wpq * si[p] * sq;
                let mut suffix = T::one();
                for d in (0..dims).rev() {
                    red[d][(ip[d], iq[d])] += ws * prefix[d] * suffix;
                    suffix *= f[d];
                }
            }
        }
    }

    let mut grad = Vec::with_capacity(model.n_params());
    let mut buf = Vec::new();
    for (i, k) in model.kernels.iter().enumerate() {
        for (d, ax) in obs.axes.iter().enumerate() {
            let m = k.dim_param_count(d);
            buf.resize(m, T::zero());
            let mut g = vec![T::zero(); m];
            let red = &reduced[i][d];
            for b in 0..ax.len() {
                for a in 0..ax.len() {
                    let t = red[(a, b)];
                    if t == T::zero() {
                        continue;
                    }
                    k.factor_grad(d, ax[a] - ax[b], &mut buf);
                    for j in 0..m {
                        g[j] += t * buf[j];
                    }
                }
            }
            grad.extend(g.into_iter().map(|v| half * v));
        }
    }

    // surface: Σ_p ∂σ_i(p) u_i(p), with ∂σ_i/∂w_j = σ_i(δ_ij − σ_j)
    let mut point = vec![T::zero(); dims];
    let weights = model.surface.weights();
    let offsets: Vec<usize> = weights
        .iter()
        .scan(0, |acc, wf| {
            let o = *acc;
            *acc += wf.n_params();
            Some(o)
        })
        .collect();
    let mut g_surface = vec![T::zero(); model.surface.n_params()];
    let mut gw = Vec::new();
    for p in 0..n {
        for (d, v) in point.iter_mut().enumerate() {
            *v = obs.points[(p, d)];
        }
        let mix = (0..r_count).fold(T::zero(), |acc, i| acc + u[i][p] * s[i][p]);
        for (j, wf) in weights.iter().enumerate() {
            let m = wf.n_params();
            if m == 0 {
                continue;
            }
            let coef = s[j][p] * (u[j][p] - mix);
            gw.resize(m, T::zero());
            wf.grad(&point, &mut gw);
            for (t, &g) in gw.iter().enumerate() {
                g_surface[offsets[j] + t] += coef * g;
            }
        }
    }
    grad.extend(g_surface);

    let trace = (0..n).fold(T::zero(), |acc, p| acc + w[(p, p)]);
    grad.push(half * model.noise_var * trace);
    Ok((value, grad))
}

/// Kronecker operator of the model on a complete grid.
pub fn build_operator<T: Real>(model: &ChangeSurfaceModel<T>, grid: &GridDataset<T>) -> Result<KronOperator<T>> {
    let points = grid.points();
    model.check_points(&points)?;
    let scales = model.scales(&points);
    let mut terms = Vec::with_capacity(model.regimes());
    for (k, scale) in model.kernels.iter().zip(scales) {
        terms.push(KronTerm { scale, factors: eval_factors(k, grid.axes())? });
    }
    KronOperator::new(terms, model.noise_var)
}

#[derive(Clone, Debug)]
pub struct BoundEvaluation<T: Real> {
    /// Upper bound on the NLML.
    pub value: T,
    pub log_det: T,
    pub quad: T,
    pub cg_iterations: usize,
    pub converged: bool,
}

/// NLML with the log determinant replaced by its Weyl upper bound and the
/// quadratic term solved by conjugate gradients.
pub fn nlml_bound<T: Real>(
    model: &ChangeSurfaceModel<T>,
    grid: &GridDataset<T>,
    strategy: WeylStrategy,
    cg: &CgConfig,
) -> Result<BoundEvaluation<T>> {
    let op = build_operator(model, grid)?;
    let r = centred(model, grid.y());
    let sol = cg_solve(&op, &r, cg)?;
    let quad = dot(&r, &sol.x);
    let log_det = weyl_logdet(&term_spectra(&op)?, model.noise_var, strategy)?;
    let half = T::lit(0.5);
    Ok(BoundEvaluation {
        value: half * quad + half * log_det + half_log_2pi(grid.len()),
        log_det,
        quad,
        cg_iterations: sol.iterations,
        converged: sol.converged,
    })
}

#[derive(Clone, Debug)]
pub struct Prediction<T: Real> {
    pub mean: Vec<T>,
    /// Latent (noise-free) predictive variance, when requested.
    pub var: Option<Vec<T>>,
}

/// Dense posterior at `test` given training observations.
pub fn predict<T: Real>(
    model: &ChangeSurfaceModel<T>,
    train: &Observations<T>,
    test: &DMatrix<T>,
    with_var: bool,
) -> Result<Prediction<T>> {
    predict_capped(model, train, test, with_var, DEFAULT_DENSE_CAP)
}

pub fn predict_capped<T: Real>(
    model: &ChangeSurfaceModel<T>,
    train: &Observations<T>,
    test: &DMatrix<T>,
    with_var: bool,
    cap: usize,
) -> Result<Prediction<T>> {
    let chol = factor_noisy(model, train, cap)?;
    let alpha = chol.solve(&centred(model, &train.y));
    let kstar = model.cross_cov(test, &train.points)?;
    let mean: Vec<T> = (&kstar * &alpha).iter().map(|&v| v + model.y_offset).collect();
    let var = with_var.then(|| {
        let v = chol.forward_mat(kstar.transpose());
        model
            .prior_var(test)
            .into_iter()
            .enumerate()
            .map(|(t, kss)| {
                let reduce = v.column(t).norm_squared();
                let out = kss - reduce;
                if out > T::zero() {
                    out
                } else {
                    T::zero()
                }
            })
            .collect()
    });
    Ok(Prediction { mean, var })
}

/// Posterior on a complete training grid using conjugate gradients and
/// Kronecker cross-covariances (one extra solve per test point for the
/// variance).
pub fn predict_grid<T: Real>(
    model: &ChangeSurfaceModel<T>,
    grid: &GridDataset<T>,
    test: &DMatrix<T>,
    with_var: bool,
    cg: &CgConfig,
) -> Result<Prediction<T>> {
    model.check_points(test)?;
    let op = build_operator(model, grid)?;
    let alpha = cg_solve(&op, &centred(model, grid.y()), cg)?.x;
    let train_scales = model.scales(&grid.points());
    let test_scales = model.scales(test);
    let n = grid.len();
    let mut mean = Vec::with_capacity(test.nrows());
    let mut var = with_var.then(Vec::new);
    let prior = model.prior_var(test);
    for t in 0..test.nrows() {
        let mut kstar = vec![T::zero(); n];
        for (i, k) in model.kernels.iter().enumerate() {
            let per_dim: Vec<Vec<T>> = grid
                .axes()
                .iter()
                .enumerate()
                .map(|(d, ax)| ax.iter().map(|&a| k.factor_value(d, test[(t, d)] - a)).collect())
                .collect();
            let row = kron_vec(&per_dim);
            let st = test_scales[i][t];
            for ((ks, kv), &sq) in kstar.iter_mut().zip(row).zip(&train_scales[i]) {
                *ks += st * kv * sq;
            }
        }
        mean.push(dot(&kstar, &alpha) + model.y_offset);
        if let Some(v) = var.as_mut() {
            let sol = cg_solve(&op, &kstar, cg)?;
            let reduce = dot(&kstar, &sol.x);
            let out = prior[t] - reduce;
            v.push(if out > T::zero() { out } else { T::zero() });
        }
    }
    Ok(Prediction { mean, var })
}

/// `‖y − ŷ‖² / ‖y − ȳ_train‖²`.
pub fn nmse<T: Real>(y_test: &[T], y_pred: &[T], train_mean: T) -> Result<T> {
    if y_test.len() != y_pred.len() {
        return Err(mismatch(format!("{} targets, {} predictions", y_test.len(), y_pred.len())));
    }
    let num = y_test.iter().zip(y_pred).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    let den = y_test.iter().fold(T::zero(), |acc, &a| acc + (a - train_mean) * (a - train_mean));
    if !(den > T::zero()) {
        return Err(Error::DegenerateDenominator("nmse"));
    }
    Ok(num / den)
}

/// Convenience: dense NLML gradient by central differences, used for
/// checking and for objectives without analytic derivatives.
pub fn central_difference<T: Real>(
    mut f: impl FnMut(&[T]) -> Result<T>,
    x: &[T],
    rel_step: f64,
) -> Result<Vec<T>> {
    let mut xp = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = T::lit(rel_step) * (T::one() + x[j].abs());
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp)?;
        xp[j] = orig - h;
        let fm = f(&xp)?;
        xp[j] = orig;
        g.push((fp - fm) / (h + h));
    }
    Ok(g)
}

/// Mean of a response vector (the offset used by fitting).
pub fn response_mean<T: Real>(y: &[T]) -> T {
    crate::scalar::mean(y)
}
