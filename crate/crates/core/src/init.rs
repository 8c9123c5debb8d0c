//! Initialization of weighting functions and spectral mixture kernels.
//!
//! Weighting functions are chosen by a random search over RKS prior draws
//! under a simplified model with RBF regime kernels; spectral mixture
//! components are then fitted to the empirical spectrum of the data in each
//! regime's dominance region.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig, FitMode, TrainingData};
use crate::grid::{component_rng, Observations};
use crate::kernels::{KernelSpec, RbfParams, SmComponent, SmParams};
use crate::logdet::DEFAULT_DENSE_CAP;
use crate::model::{nlml_exact, ChangeSurfaceModel};
use crate::optim::LbfgsConfig;
use crate::scalar::{mean, std_dev, Real};
use crate::warp::{sample_rks_prior, ChangeSurface, WeightFunction};

#[derive(Clone, Debug)]
pub struct InitConfig {
    /// Candidate weighting-function draws.
    pub g: usize,
    /// RBF hyperparameter draws per candidate.
    pub h: usize,
    /// Optimizer iterations for each candidate.
    pub partial_iters: usize,
    /// Optimizer iterations for the winning candidate.
    pub final_iters: usize,
    /// Spectral mixture components per dimension.
    pub q: usize,
    /// RKS features per weighting function.
    pub m: usize,
    /// Regimes.
    pub r: usize,
    pub seed: u64,
    /// Transform sorted line values instead of coordinate-ordered ones.
    pub sort_line: bool,
    /// Use `σ_q²` rather than `σ_q` for the spectral variances.
    pub v_as_variance: bool,
    /// Points used by the weighting-function search (all when `None`).
    pub subsample: Option<usize>,
    pub samples_per_line: usize,
    pub dense_cap: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            g: 10,
            h: 10,
            partial_iters: 30,
            final_iters: 200,
            q: 3,
            m: 5,
            r: 2,
            seed: 0,
            sort_line: false,
            v_as_variance: false,
            subsample: Some(500),
            samples_per_line: 64,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl InitConfig {
    fn validate(&self) -> Result<()> {
        if self.g == 0 || self.h == 0 || self.partial_iters == 0 || self.q == 0 || self.m == 0 || self.r == 0 {
            return Err(Error::InvalidParameter("g, h, partial_iters, q, m and r must be at least 1".into()));
        }
        Ok(())
    }
}

/// Default priors derived from the data.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPriors<T: Real> {
    /// `(range_d / 2)²`.
    pub lambda: Vec<T>,
    /// `std(y)`.
    pub sigma0: T,
    /// `mean(|y − ȳ|) / 10`.
    pub noise_std: T,
    pub ranges: Vec<T>,
    pub center: Vec<T>,
}

pub fn data_priors<T: Real>(obs: &Observations<T>) -> Result<DataPriors<T>> {
    let sd = std_dev(&obs.y);
    if !(sd > T::zero()) {
        return Err(Error::DegenerateData("responses have zero variance".into()));
    }
    let ybar = mean(&obs.y);
    let abs_dev: Vec<T> = obs.y.iter().map(|&v| (v - ybar).abs()).collect();
    let mut ranges = Vec::new();
    let mut center = Vec::new();
    for ax in &obs.axes {
        let (lo, hi) = (ax[0], ax[ax.len() - 1]);
        let range = hi - lo;
        // single-coordinate dimensions get a unit range
        ranges.push(if range > T::zero() { range } else { T::one() });
        center.push((lo + hi) / T::lit(2.0));
    }
    let half = T::lit(0.5);
    Ok(DataPriors {
        lambda: ranges.iter().map(|&r| (r * half) * (r * half)).collect(),
        sigma0: sd,
        noise_std: mean(&abs_dev) / T::lit(10.0),
        ranges,
        center,
    })
}

/// One RBF hyperparameter draw of one candidate.
#[derive(Clone, Debug)]
pub struct CandidateDraw {
    pub candidate: usize,
    pub draw: usize,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct WeightInit<T: Real> {
    pub model: ChangeSurfaceModel<T>,
    /// Every sampled candidate/RBF combination with its NLML.
    pub draws: Vec<CandidateDraw>,
    /// NLML of each candidate after the abbreviated optimization.
    pub partial: Vec<f64>,
    pub winner: usize,
    pub final_objective: f64,
    pub subsample: Vec<usize>,
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn exact_config(iters: usize, cap: usize) -> FitConfig {
    FitConfig {
        mode: FitMode::Exact,
        optimizer: LbfgsConfig { max_iter: iters, ..LbfgsConfig::default() },
        dense_cap: cap,
        center: false,
        ..FitConfig::default()
    }
}

/// Random search over weighting functions with RBF regime kernels.
pub fn init_weights<T: Real>(obs: &Observations<T>, cfg: &InitConfig) -> Result<WeightInit<T>> {
    cfg.validate()?;
    let priors = data_priors(obs)?;
    let subsample: Vec<usize> = match cfg.subsample {
        Some(k) if k < obs.len() => {
            let mut idx = sample_indices(&mut component_rng(cfg.seed, 10), obs.len(), k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..obs.len()).collect(),
    };
    let sub = obs.select(&subsample);
    let var_y = (priors.sigma0 * priors.sigma0).as_f64();
    let noise_var = {
        let v = priors.noise_std * priors.noise_std;
        if v > T::zero() {
            v
        } else {
            T::lit(1e-4 * var_y)
        }
    };
    let y_offset = mean(&obs.y);

    let mut draws = Vec::with_capacity(cfg.g * cfg.h);
    let mut partial = Vec::with_capacity(cfg.g);
    let mut best: Option<(f64, usize, ChangeSurfaceModel<T>)> = None;
    for c in 0..cfg.g {
        let mut rng = component_rng(cfg.seed, 100 + c as u64);
        let mut weights: Vec<WeightFunction<T>> = (0..cfg.r.saturating_sub(1))
            .map(|_| WeightFunction::Rks(sample_rks_prior(cfg.m, &priors.lambda, priors.sigma0, &priors.center, &mut rng)))
            .collect();
        weights.push(WeightFunction::Zero);
        let surface = ChangeSurface::new(weights)?;

        let mut best_draw: Option<(f64, ChangeSurfaceModel<T>)> = None;
        for dh in 0..cfg.h {
            let kernels = (0..cfg.r)
                .map(|_| {
                    let length_scales =
                        priors.ranges.iter().map(|&r| T::lit(log_uniform(&mut rng, 0.05, 1.0)) * r).collect();
                    let signal_var = T::lit(var_y * log_uniform(&mut rng, 0.1, 2.0));
                    KernelSpec::Rbf(RbfParams { length_scales, signal_var })
                })
                .collect();
            let mut model = ChangeSurfaceModel::new(surface.clone(), kernels, noise_var)?;
            model.y_offset = y_offset;
            let value = nlml_exact(&model, &sub, cfg.dense_cap).map(|v| v.as_f64()).unwrap_or(f64::INFINITY);
            draws.push(CandidateDraw { candidate: c, draw: dh, objective: value });
            if best_draw.as_ref().is_none_or(|(b, _)| value < *b) {
                best_draw = Some((value, model));
            }
        }
        let (start_value, start) = best_draw.expect("h ≥ 1");
        let (value, model) = if start_value.is_finite() {
            let (m, rep) = fit(&start, TrainingData::Points(&sub), &exact_config(cfg.partial_iters, cfg.dense_cap))?;
            (rep.objective, m)
        } else {
            (start_value, start)
        };
        partial.push(value);
        if best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            best = Some((value, c, model));
        }
    }
    let (win_value, winner, model) = best.expect("g ≥ 1");
    if !win_value.is_finite() {
        return Err(Error::DegenerateData("no candidate weighting function gave a finite likelihood".into()));
    }
    let (model, rep) = fit(&model, TrainingData::Points(&sub), &exact_config(cfg.final_iters, cfg.dense_cap))?;
    Ok(WeightInit { model, draws, partial, winner, final_objective: rep.objective, subsample })
}

/// Groups observations into lines along `d`: points sharing every other
/// coordinate, each line ordered by its coordinate along `d`.
fn lines_along<T: Real>(obs: &Observations<T>, d: usize, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for p in 0..obs.len() {
        if !mask[p] {
            continue;
        }
        let mut key = obs.index[p].clone();
        key.remove(d);
        groups.entry(key).or_default().push(p);
    }
    groups
        .into_values()
        .map(|mut line| {
            line.sort_by_key(|&p| obs.index[p][d]);
            line
        })
        .collect()
}

/// Frequency samples (cycles per input unit) drawn from the normalized
/// power spectrum of every line along `d` with at least two masked points.
///
/// Masked points on a line are treated as evenly spaced at the line's mean
/// spacing; only the one-sided bins `0..=L/2` are used.
pub fn empirical_spectrum<T: Real, R: Rng + ?Sized>(
    obs: &Observations<T>,
    mask: &[bool],
    d: usize,
    sort_line: bool,
    samples_per_line: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    let offset = mean(&obs.y).as_f64();
    let mut planner = FftPlanner::<f64>::new();
    let mut out = Vec::new();
    let mut any = false;
    for line in lines_along(obs, d, mask) {
        let len = line.len();
        if len < 2 {
            continue;
        }
        any = true;
        let first = obs.points[(line[0], d)].as_f64();
        let last = obs.points[(line[len - 1], d)].as_f64();
        let spacing = (last - first) / (len - 1) as f64;
        let mut values: Vec<f64> = line.iter().map(|&p| obs.y[p].as_f64() - offset).collect();
        if sort_line {
            values.sort_by(f64::total_cmp);
        }
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        planner.plan_fft_forward(len).process(&mut buf);
        let bins = len / 2 + 1;
        let mut power: Vec<f64> = buf[..bins].iter().map(|c| c.norm_sqr()).collect();
        if power.iter().all(|&p| p == 0.0) {
            power[0] = 1.0;
        }
        let dist = WeightedIndex::new(&power).expect("non-negative power with positive total");
        let freq = |k: usize| if spacing > 0.0 { k as f64 / (len as f64 * spacing) } else { 0.0 };
        for _ in 0..samples_per_line.min(len) {
            out.push(T::lit(freq(dist.sample(rng))));
        }
    }
    if !any {
        return Err(Error::EmptyRegime { regime: usize::MAX, dim: d });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gmm1D<T: Real> {
    pub weights: Vec<T>,
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct GmmFit<T: Real> {
    pub gmm: Gmm1D<T>,
    /// Log-likelihood after every EM iteration of the final run.
    pub loglik: Vec<f64>,
    pub reseeds: usize,
    /// A component kept collapsing onto the variance floor.
    pub degenerate: bool,
    /// Fewer distinct samples than components; components were split.
    pub split: bool,
}

const GMM_MAX_ITER: usize = 500;
const GMM_TOL: f64 = 1e-10;
const GMM_RESEEDS: usize = 3;

fn normal_logpdf(x: f64, mu: f64, var: f64) -> f64 {
    -0.5 * ((x - mu) * (x - mu) / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
}

fn kmeanspp<R: Rng + ?Sized>(xs: &[f64], q: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = vec![xs[rng.random_range(0..xs.len())]];
    while centers.len() < q {
        let d2: Vec<f64> = xs
            .iter()
            .map(|&x| centers.iter().map(|&c| (x - c) * (x - c)).fold(f64::INFINITY, f64::min))
            .collect();
        match WeightedIndex::new(&d2) {
            Ok(dist) => centers.push(xs[dist.sample(rng)]),
            Err(_) => centers.push(xs[rng.random_range(0..xs.len())]),
        }
    }
    centers
}

/// Expectation–maximization for a one-dimensional Gaussian mixture with
/// k-means++ seeding and a variance floor.
pub fn fit_gmm1d<T: Real, R: Rng + ?Sized>(samples: &[T], q: usize, var_floor: f64, rng: &mut R) -> Result<GmmFit<T>> {
    if q == 0 {
        return Err(Error::InvalidParameter("mixture needs at least one component".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|v| v.as_f64()).collect();
    if xs.is_empty() || xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("mixture samples must be finite and non-empty".into()));
    }
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let q_eff = q.min(distinct.len());
    let n = xs.len() as f64;
    let total_mean = xs.iter().sum::<f64>() / n;
    let total_var = (xs.iter().map(|x| (x - total_mean).powi(2)).sum::<f64>() / n).max(var_floor);

    let (mut weights, mut means, mut vars, loglik, reseeds, degenerate) = if q_eff == 1 {
        let ll = xs.iter().map(|&x| normal_logpdf(x, total_mean, total_var)).sum::<f64>();
        (vec![1.0], vec![total_mean], vec![total_var], vec![ll], 0, false)
    } else {
        em(&xs, q_eff, var_floor, total_var, rng)
    };
    // split the heaviest component until q are present
    while weights.len() < q {
        let j = (0..weights.len()).max_by(|&a, &b| weights[a].total_cmp(&weights[b])).expect("non-empty");
        weights[j] /= 2.0;
        weights.push(weights[j]);
        means.push(means[j]);
        vars.push(vars[j]);
    }
    let gmm = Gmm1D {
        weights: weights.iter().map(|&v| T::lit(v)).collect(),
        means: means.iter().map(|&v| T::lit(v)).collect(),
        stds: vars.iter().map(|&v| T::lit(v.sqrt())).collect(),
    };
    Ok(GmmFit { gmm, loglik, reseeds, degenerate, split: q_eff < q })
}

type EmState = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, usize, bool);

fn em<R: Rng + ?Sized>(xs: &[f64], q: usize, floor: f64, init_var: f64, rng: &mut R) -> EmState {
    let n = xs.len();
    let mut means = kmeanspp(xs, q, rng);
    let mut vars = vec![init_var; q];
    let mut weights = vec![1.0 / q as f64; q];
    let mut reseeds = 0;
    let mut degenerate = false;
    let mut trace = Vec::new();
    let mut resp = vec![0.0; n * q];
    'restart: loop {
        trace.clear();
        for _ in 0..GMM_MAX_ITER {
            // E step (log-sum-exp per sample)
            let mut ll = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let row = &mut resp[i * q..(i + 1) * q];
                let mut mx = f64::NEG_INFINITY;
                for j in 0..q {
                    row[j] = weights[j].ln() + normal_logpdf(x, means[j], vars[j]);
                    mx = mx.max(row[j]);
                }
                let s: f64 = row.iter().map(|v| (v - mx).exp()).sum();
                let lse = mx + s.ln();
                ll += lse;
                row.iter_mut().for_each(|v| *v = (*v - lse).exp());
            }
            let converged = trace.last().is_some_and(|&prev: &f64| (ll - prev).abs() <= GMM_TOL * ll.abs().max(1.0));
            trace.push(ll);
            if converged {
                break 'restart;
            }
            // M step
            for j in 0..q {
                let nj: f64 = (0..n).map(|i| resp[i * q + j]).sum();
                if nj <= 1e-12 {
                    if reseeds < GMM_RESEEDS {
                        reseeds += 1;
                        means[j] = kmeanspp(xs, 1, rng)[0];
                        vars[j] = init_var;
                        weights = vec![1.0 / q as f64; q];
                        continue 'restart;
                    }
                    degenerate = true;
                    weights[j] = 1e-12;
                    continue;
                }
                let mu = (0..n).map(|i| resp[i * q + j] * xs[i]).sum::<f64>() / nj;
                let var = (0..n).map(|i| resp[i * q + j] * (xs[i] - mu).powi(2)).sum::<f64>() / nj;
                if var < floor {
                    if reseeds < GMM_RESEEDS {
                        reseeds += 1;
                        let others: Vec<f64> = means.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &m)| m).collect();
                        // reseed away from the other components
                        let d2: Vec<f64> = xs
                            .iter()
                            .map(|&x| others.iter().map(|&c| (x - c).powi(2)).fold(f64::INFINITY, f64::min))
                            .collect();
                        means[j] = match WeightedIndex::new(&d2) {
                            Ok(dist) => xs[dist.sample(rng)],
                            Err(_) => xs[rng.random_range(0..n)],
                        };
                        vars[j] = init_var;
                        weights = vec![1.0 / q as f64; q];
                        continue 'restart;
                    }
                    degenerate = true;
                }
                weights[j] = nj / n as f64;
                means[j] = mu;
                vars[j] = var.max(floor);
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        break;
    }
    (weights, means, vars, trace, reseeds, degenerate)
}

/// Diagnostics of the spectral initialization of one regime and dimension.
#[derive(Clone, Debug)]
pub struct SpectralInit<T: Real> {
    pub regime: usize,
    pub dim: usize,
    pub gmm: GmmFit<T>,
    pub samples: usize,
    /// The regime dominated no usable line; the full data was used.
    pub fallback: bool,
}

/// Spectral mixture parameters per regime from the empirical spectra of
/// each regime's dominance region.
///
/// Every dimension gets `ω_q = std(y) φ_q`, `m_q = μ_q` and `v_q = σ_q`
/// (or `σ_q²` with `v_as_variance`).
pub fn init_sm<T: Real>(
    obs: &Observations<T>,
    surface: &ChangeSurface<T>,
    cfg: &InitConfig,
) -> Result<(Vec<SmParams<T>>, Vec<SpectralInit<T>>)> {
    let sd = std_dev(&obs.y);
    if !(sd > T::zero()) {
        return Err(Error::DegenerateData("responses have zero variance".into()));
    }
    let priors = data_priors(obs)?;
    let scales = crate::warp::warp(surface, &obs.points);
    let mut params = Vec::with_capacity(surface.regimes());
    let mut diags = Vec::new();
    for (i, s) in scales.iter().enumerate() {
        let mask: Vec<bool> =
            if surface.regimes() == 1 { vec![true; obs.len()] } else { s.iter().map(|&v| v > T::lit(0.5)).collect() };
        let mut dims = Vec::with_capacity(obs.dims());
        for d in 0..obs.dims() {
            let mut rng: ChaCha8Rng = component_rng(cfg.seed, 1000 + (i * 64 + d) as u64);
            let (samples, fallback) =
                match empirical_spectrum(obs, &mask, d, cfg.sort_line, cfg.samples_per_line, &mut rng) {
                    Ok(s) => (s, false),
                    Err(Error::EmptyRegime { .. }) => {
                        let all = vec![true; obs.len()];
                        match empirical_spectrum(obs, &all, d, cfg.sort_line, cfg.samples_per_line, &mut rng) {
                            Ok(s) => (s, true),
                            Err(Error::EmptyRegime { dim, .. }) => return Err(Error::EmptyRegime { regime: i, dim }),
                            Err(e) => return Err(e),
                        }
                    }
                    Err(e) => return Err(e),
                };
            // a quarter of the fundamental frequency of the axis
            let floor = (0.25 / priors.ranges[d].as_f64()).powi(2);
            let g = fit_gmm1d(&samples, cfg.q, floor, &mut rng)?;
            let comps = (0..cfg.q)
                .map(|c| {
                    let phi = g.gmm.weights[c];
                    let sigma = g.gmm.stds[c];
                    SmComponent {
                        weight: sd * phi,
                        mean: g.gmm.means[c],
                        var: if cfg.v_as_variance { sigma * sigma } else { sigma },
                    }
                })
                .collect();
            dims.push(comps);
            diags.push(SpectralInit { regime: i, dim: d, samples: samples.len(), gmm: g, fallback });
        }
        params.push(SmParams { dims });
    }
    Ok((params, diags))
}

#[derive(Clone, Debug)]
pub struct Initialization<T: Real> {
    /// Spectral mixture model ready for the joint fit.
    pub model: ChangeSurfaceModel<T>,
    pub weights: WeightInit<T>,
    pub spectral: Vec<SpectralInit<T>>,
}

impl<T: Real> Initialization<T> {
    /// Plain-text summary of the initialization.
    pub fn report(&self) -> String {
        let w = &self.weights;
        let mut s = String::new();
        let _ = writeln!(s, "weighting-function search: {} candidates x {} draws", w.partial.len(), w.draws.len() / w.partial.len().max(1));
        let _ = writeln!(s, "subsample size: {}", w.subsample.len());
        for (c, p) in w.partial.iter().enumerate() {
            let best = w.draws.iter().filter(|d| d.candidate == c).map(|d| d.objective).fold(f64::INFINITY, f64::min);
            let mark = if c == w.winner { " *" } else { "" };
            let _ = writeln!(s, "candidate {c}: best draw nlml {best:.6}, after partial fit {p:.6}{mark}");
        }
        let _ = writeln!(s, "winner {} final nlml {:.6}", w.winner, w.final_objective);
        let _ = writeln!(s, "noise variance {:e}", self.model.noise_var);
        for sp in &self.spectral {
            let _ = write!(
                s,
                "regime {} dim {}: {} samples{}{}{} |",
                sp.regime,
                sp.dim,
                sp.samples,
                if sp.fallback { ", full-data fallback" } else { "" },
                if sp.gmm.degenerate { ", degenerate component" } else { "" },
                if sp.gmm.split { ", split components" } else { "" },
            );
            for c in 0..sp.gmm.gmm.weights.len() {
                let _ = write!(
                    s,
                    " (phi {:.4}, mu {:.4}, sigma {:.4})",
                    sp.gmm.gmm.weights[c], sp.gmm.gmm.means[c], sp.gmm.gmm.stds[c]
                );
            }
            s.push('\n');
        }
        s
    }
}

/// Full pipeline: weighting-function search, then spectral mixture kernels
/// fitted in each regime's dominance region.
pub fn initialize<T: Real>(obs: &Observations<T>, cfg: &InitConfig) -> Result<Initialization<T>> {
    let weights = init_weights(obs, cfg)?;
    let (sm, spectral) = init_sm(obs, &weights.model.surface, cfg)?;
    let kernels = sm.into_iter().map(KernelSpec::SpectralMixture).collect();
    let mut model = ChangeSurfaceModel::new(weights.model.surface.clone(), kernels, weights.model.noise_var)?;
    model.y_offset = weights.model.y_offset;
    Ok(Initialization { model, weights, spectral })
}
