//! Two-regime fit to yearly coal-mining disaster counts.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use changesurface::fit::TrainingData;
use changesurface::grid::{load_csv, write_csv};
use changesurface::io::save_model;
use changesurface::warp::{line_summary, SliceSummary};
use nalgebra::DMatrix;

use crate::{csv_writer, finish, init_and_fit, opt, parallel_map, plots, write_text, Fitted, Result, RunConfig};

pub const DEFAULT_DATA: &str = "data/coal.csv";
pub const DEFAULT_MAX_ITER: usize = 2000;
/// Resolution of the reported σ series, in years.
pub const STEP: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    /// Year where σ(w₁) crosses 0.5.
    pub midpoint: Option<f64>,
    /// Years between the 0.1 and 0.9 crossings.
    pub transition: Option<f64>,
    pub crossings: usize,
    pub nlml: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct CoalResult {
    pub seeds: Vec<SeedResult>,
    pub years: Vec<f64>,
    /// σ(w₁) on `years`, per seed.
    pub sigma: Vec<Vec<f64>>,
    /// Seed index with the lowest NLML.
    pub best: usize,
}

impl CoalResult {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.seeds {
            let _ = writeln!(
                s,
                "seed {}: midpoint {} transition {} crossings {} nlml {}",
                r.seed,
                r.midpoint.map_or("none".into(), |v| format!("{v:.2}")),
                r.transition.map_or("none".into(), |v| format!("{v:.2}")),
                r.crossings,
                r.nlml
            );
        }
        let _ = write!(s, "best seed {}", self.seeds[self.best].seed);
        s
    }
}

pub fn run_coal(cfg: &RunConfig) -> Result<CoalResult> {
    let path = cfg.data.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DATA));
    let data = load_csv::<f64>(&path, 1)?;
    let obs = data.observations();
    let axis = &data.axes()[0];
    let (first, last) = (axis[0], axis[axis.len() - 1]);
    let steps = ((last - first) / STEP).round() as usize;
    let years: Vec<f64> = (0..=steps).map(|i| first + i as f64 * STEP).collect();
    let points = DMatrix::from_column_slice(years.len(), 1, &years);
    let max_iter = cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER);

    let outcomes = parallel_map(cfg.restarts, |k| -> Result<(SeedResult, Fitted, Vec<f64>)> {
        let start = Instant::now();
        let seed = cfg.seed + k as u64;
        let fitted = init_and_fit(&obs, TrainingData::Points(&obs), cfg, seed, cfg.r, max_iter)?;
        let sigma = fitted.model.scales(&points).swap_remove(0);
        let SliceSummary { midpoint, transition, crossings, .. } = line_summary(vec![], &years, &sigma);
        let r = SeedResult {
            seed,
            midpoint,
            transition,
            crossings,
            nlml: fitted.report.objective,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok((r, fitted, sigma))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let best = (0..outcomes.len()).min_by(|&a, &b| outcomes[a].0.nlml.total_cmp(&outcomes[b].0.nlml)).expect("restarts ≥ 1");

    let out = &cfg.out;
    write_csv(out.join("data.csv"), &data)?;
    let p = out.join("surface.csv");
    let mut w = csv_writer(&p, &["seed", "year", "sigma"])?;
    for (r, _, sigma) in &outcomes {
        for (y, s) in years.iter().zip(sigma) {
            w.write_record([r.seed.to_string(), y.to_string(), s.to_string()])?;
        }
    }
    finish(w, &p)?;
    let p = out.join("summary.csv");
    let mut w = csv_writer(&p, &["seed", "midpoint", "transition", "crossings", "nlml"])?;
    for (r, _, _) in &outcomes {
        w.write_record([r.seed.to_string(), opt(r.midpoint), opt(r.transition), r.crossings.to_string(), r.nlml.to_string()])?;
    }
    finish(w, &p)?;
    let p = out.join("timings.csv");
    let mut w = csv_writer(&p, &["seed", "seconds"])?;
    for (r, _, _) in &outcomes {
        w.write_record([r.seed.to_string(), r.seconds.to_string()])?;
    }
    finish(w, &p)?;

    let best_fit = &outcomes[best].1;
    save_model(out.join("model.txt"), &best_fit.model)?;
    write_text(&out.join("init_report.txt"), &best_fit.init.report())?;
    write_text(&out.join("fit_report.txt"), &crate::fit_report_text(&best_fit.report))?;
    write_text(&out.join("plot_coal.py"), plots::COAL)?;

    let result = CoalResult {
        seeds: outcomes.iter().map(|o| o.0.clone()).collect(),
        years,
        sigma: outcomes.into_iter().map(|o| o.2).collect(),
        best,
    };
    write_text(&out.join("summary.txt"), &(result.summary() + "\n"))?;
    Ok(result)
}
