//! Log-determinant bound benchmark: ratio to the exact value and cost.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use changesurface::logdet::{benchmark_bounds, BenchmarkConfig, BenchmarkRow, WeylStrategy};

use crate::{csv_writer, finish, plots, write_text, Result, RunConfig};

pub const DEFAULT_GREEDY: usize = 40;

/// Cost growth of one strategy between consecutive sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    pub kernels: usize,
    pub strategy: String,
    pub n: usize,
    pub next_n: usize,
    /// `time(next_n) / time(n)`.
    pub time_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
    pub scaling: Vec<Scaling>,
}

impl BenchmarkResult {
    /// Ratio-to-exact of every strategy at the largest size.
    pub fn plateau(&self) -> Vec<(usize, String, f64)> {
        let n = self.rows.iter().map(|r| r.n).max().unwrap_or(0);
        self.rows.iter().filter(|r| r.n == n && r.strategy != "dense").map(|r| (r.kernels, r.strategy.clone(), r.ratio)).collect()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (k, strategy, ratio) in self.plateau() {
            let _ = writeln!(s, "{k} kernels, {strategy}: ratio to exact {ratio:.4} at the largest size");
        }
        for sc in &self.scaling {
            let _ = writeln!(s, "{} kernels, {}: time({})/time({}) = {:.2}", sc.kernels, sc.strategy, sc.next_n, sc.n, sc.time_ratio);
        }
        s.trim_end().to_string()
    }
}

pub fn run_benchmark_logdet(cfg: &RunConfig) -> Result<BenchmarkResult> {
    let greedy_window = match cfg.strategy {
        Some(WeylStrategy::Greedy(s)) => s,
        _ => DEFAULT_GREEDY,
    };
    let bc = BenchmarkConfig {
        sizes: cfg.sizes.clone(),
        greedy_window,
        seed: cfg.seed,
        dense_cap: cfg.dense_cap,
        ..BenchmarkConfig::default()
    };
    let rows = benchmark_bounds(&bc)?;

    let mut by_series: BTreeMap<(usize, String), Vec<(usize, f64)>> = BTreeMap::new();
    for r in &rows {
        by_series.entry((r.kernels, r.strategy.clone())).or_default().push((r.n, r.seconds));
    }
    let mut scaling = Vec::new();
    for ((kernels, strategy), mut pts) in by_series {
        pts.sort_by_key(|p| p.0);
        for w in pts.windows(2) {
            scaling.push(Scaling {
                kernels,
                strategy: strategy.clone(),
                n: w[0].0,
                next_n: w[1].0,
                time_ratio: w[1].1 / w[0].1,
            });
        }
    }

    let out = &cfg.out;
    let p = out.join("benchmark.csv");
    let mut w = csv_writer(&p, &["n", "kernels", "strategy", "logdet", "exact", "ratio"])?;
    for r in &rows {
        w.write_record([
            r.n.to_string(),
            r.kernels.to_string(),
            r.strategy.clone(),
            r.logdet_value.to_string(),
            r.exact_value.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    finish(w, &p)?;
    let p = out.join("timings.csv");
    let mut w = csv_writer(&p, &["n", "kernels", "strategy", "seconds"])?;
    for r in &rows {
        w.write_record([r.n.to_string(), r.kernels.to_string(), r.strategy.clone(), r.seconds.to_string()])?;
    }
    finish(w, &p)?;
    let p = out.join("scaling.csv");
    let mut w = csv_writer(&p, &["kernels", "strategy", "n", "next_n", "time_ratio"])?;
    for s in &scaling {
        w.write_record([s.kernels.to_string(), s.strategy.clone(), s.n.to_string(), s.next_n.to_string(), s.time_ratio.to_string()])?;
    }
    finish(w, &p)?;
    write_text(&out.join("plot_benchmark.py"), plots::BENCHMARK)?;
    let result = BenchmarkResult { rows, scaling };
    write_text(&out.join("summary.txt"), &(result.summary() + "\n"))?;
    Ok(result)
}
