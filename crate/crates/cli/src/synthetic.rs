//! Synthetic two-regime recovery: held-out NMSE over restarts, with an
//! optional single-regime spectral mixture ablation.

use std::fmt::Write as _;
use std::time::Instant;

use changesurface::fit::TrainingData;
use changesurface::grid::{component_rng, generate_synthetic, minority_share, split, write_csv, GridDataset, SyntheticTruth};
use changesurface::io::save_model;
use changesurface::model::{nmse, predict_capped, response_mean};
use rand::seq::index::sample;

use crate::{csv_writer, finish, init_and_fit, opt, parallel_map, plots, write_text, CliError, Fitted, Result, RunConfig};

/// Default training points in each exact-likelihood fit.
pub const DEFAULT_FIT_SUBSAMPLE: usize = 800;
pub const DEFAULT_MAX_ITER: usize = 300;
/// Dataset seeds tried after the root seed before giving up.
const DATASET_SEARCH: u64 = 1000;

#[derive(Clone, Debug)]
pub struct RestartResult {
    pub restart: usize,
    /// `changesurface` or `sm` (single regime).
    pub model: &'static str,
    pub seed: u64,
    pub nmse: f64,
    /// Exact NLML on the shared fit subsample.
    pub nlml: f64,
    /// Share of grid cells on the correct side of `σ = 0.5`, up to relabeling.
    pub surface_accuracy: Option<f64>,
    pub iterations: usize,
    pub termination: String,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticResult {
    pub dataset_seed: u64,
    pub minority_share: f64,
    pub restarts: Vec<RestartResult>,
    pub mean_nmse: f64,
    pub mean_nmse_sm: Option<f64>,
    /// Change-surface restart with the lowest NLML.
    pub best: usize,
    pub surface_accuracy: f64,
}

impl SyntheticResult {
    /// Single-regime NMSE over change-surface NMSE.
    pub fn nmse_ratio(&self) -> Option<f64> {
        self.mean_nmse_sm.map(|sm| sm / self.mean_nmse)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset_seed = {}", self.dataset_seed);
        let _ = writeln!(s, "minority_share = {}", self.minority_share);
        let _ = writeln!(s, "restarts = {}", self.restarts.iter().filter(|r| r.model == "changesurface").count());
        let _ = writeln!(s, "mean_nmse = {}", self.mean_nmse);
        let _ = writeln!(s, "mean_nmse_sm = {}", opt(self.mean_nmse_sm));
        let _ = writeln!(s, "nmse_ratio = {}", opt(self.nmse_ratio()));
        let _ = writeln!(s, "best_restart = {}", self.best);
        let _ = write!(s, "surface_accuracy = {}", self.surface_accuracy);
        s
    }
}

/// First dataset seed at or after `seed` whose true surface gives the
/// minority regime at least `min_share` of the grid.
pub fn dataset_seed(cfg: &RunConfig) -> Result<(u64, GridDataset<f64>, SyntheticTruth<f64>)> {
    for s in cfg.seed..cfg.seed.saturating_add(DATASET_SEARCH) {
        let (data, truth) = generate_synthetic::<f64>(cfg.grid, cfg.grid, s)?;
        if minority_share(&truth.surface) >= cfg.min_share {
            return Ok((s, data, truth));
        }
    }
    Err(CliError::Usage(format!("no synthetic dataset with minority share ≥ {} near seed {}", cfg.min_share, cfg.seed)))
}

fn accuracy(fitted: &[f64], truth: &[f64]) -> f64 {
    let agree = fitted.iter().zip(truth).filter(|(a, b)| (**a > 0.5) == (**b > 0.5)).count() as f64;
    let acc = agree / truth.len() as f64;
    acc.max(1.0 - acc)
}

pub fn run_synthetic(cfg: &RunConfig) -> Result<SyntheticResult> {
    let (data_seed, data, truth) = dataset_seed(cfg)?;
    let sp = split(data.len(), cfg.test_frac, data_seed)?;
    let train = data.subset(&sp.train_idx);
    let test = data.subset(&sp.test_idx);
    let train_mean = response_mean(&train.y);

    let k = cfg.fit_subsample.unwrap_or(DEFAULT_FIT_SUBSAMPLE).min(train.len());
    let mut idx = sample(&mut component_rng(cfg.seed, 20), train.len(), k).into_vec();
    idx.sort_unstable();
    let sub = train.select(&idx);
    let max_iter = cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    let grid_points = data.points();

    let mut jobs: Vec<(&'static str, usize)> = (0..cfg.restarts).map(|k| ("changesurface", k)).collect();
    if cfg.ablation {
        jobs.extend((0..cfg.restarts).map(|k| ("sm", k)));
    }
    let outcomes = parallel_map(jobs.len(), |j| -> Result<(RestartResult, Fitted, Vec<f64>)> {
        let (kind, k) = jobs[j];
        let start = Instant::now();
        let seed = cfg.seed + k as u64;
        let r = if kind == "sm" { 1 } else { cfg.r };
        let fitted = init_and_fit(&train, TrainingData::Points(&sub), cfg, seed, r, max_iter)?;
        let pred = predict_capped(&fitted.model, &train, &test.points, false, cfg.dense_cap)?;
        let surface = if r == 2 { Some(fitted.model.scales(&grid_points).swap_remove(0)) } else { None };
        let result = RestartResult {
            restart: k,
            model: kind,
            seed,
            nmse: nmse(&test.y, &pred.mean, train_mean)?,
            nlml: fitted.report.objective,
            surface_accuracy: surface.as_ref().map(|s| accuracy(s, &truth.surface)),
            iterations: fitted.report.iterations,
            termination: fitted.report.termination.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok((result, fitted, pred.mean))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mean_of = |kind: &str| {
        let v: Vec<f64> = outcomes.iter().filter(|o| o.0.model == kind).map(|o| o.0.nmse).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let best_of = |kind: &str| {
        outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| o.0.model == kind)
            .min_by(|a, b| a.1 .0.nlml.total_cmp(&b.1 .0.nlml))
            .map(|(i, _)| i)
    };
    let best = best_of("changesurface").expect("at least one restart");
    let best_sm = best_of("sm");
    let result = SyntheticResult {
        dataset_seed: data_seed,
        minority_share: minority_share(&truth.surface),
        restarts: outcomes.iter().map(|o| o.0.clone()).collect(),
        mean_nmse: mean_of("changesurface").expect("at least one restart"),
        mean_nmse_sm: mean_of("sm"),
        best: outcomes[best].0.restart,
        surface_accuracy: outcomes[best].0.surface_accuracy.unwrap_or(f64::NAN),
    };

    // bundle
    let out = &cfg.out;
    write_csv(out.join("data.csv"), &data)?;
    let best_fit = &outcomes[best].1;
    let fitted_surface = if cfg.r == 2 { Some(best_fit.model.scales(&grid_points).swap_remove(0)) } else { None };
    for (name, values) in [("surface_true.csv", Some(&truth.surface)), ("surface_pred.csv", fitted_surface.as_ref())] {
        if let Some(values) = values {
            let mut labels = data.labels().to_vec();
            labels.truncate(2);
            labels.push("sigma".into());
            write_csv(out.join(name), &GridDataset::new(data.axes().to_vec(), values.clone(), labels)?)?;
        }
    }
    let path = out.join("predictions.csv");
    let mut w = csv_writer(&path, &["x1", "x2", "y", "mean", "mean_sm"])?;
    for t in 0..test.len() {
        let sm = best_sm.map(|b| outcomes[b].2[t]);
        w.write_record([
            test.points[(t, 0)].to_string(),
            test.points[(t, 1)].to_string(),
            test.y[t].to_string(),
            outcomes[best].2[t].to_string(),
            opt(sm),
        ])?;
    }
    finish(w, &path)?;

    let path = out.join("restarts.csv");
    let mut w = csv_writer(&path, &["restart", "model", "seed", "nmse", "nlml", "surface_accuracy", "iterations", "termination"])?;
    for r in &result.restarts {
        w.write_record([
            r.restart.to_string(),
            r.model.to_string(),
            r.seed.to_string(),
            r.nmse.to_string(),
            r.nlml.to_string(),
            opt(r.surface_accuracy),
            r.iterations.to_string(),
            r.termination.clone(),
        ])?;
    }
    finish(w, &path)?;

    let path = out.join("timings.csv");
    let mut w = csv_writer(&path, &["restart", "model", "seconds"])?;
    for r in &result.restarts {
        w.write_record([r.restart.to_string(), r.model.to_string(), r.seconds.to_string()])?;
    }
    finish(w, &path)?;

    save_model(out.join("model.txt"), &best_fit.model)?;
    write_text(&out.join("init_report.txt"), &best_fit.init.report())?;
    write_text(&out.join("fit_report.txt"), &crate::fit_report_text(&best_fit.report))?;
    write_text(&out.join("summary.txt"), &(result.summary() + "\n"))?;
    write_text(&out.join("plot_synthetic.py"), plots::SYNTHETIC)?;
    Ok(result)
}
