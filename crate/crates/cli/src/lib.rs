//! End-to-end experiments over the `changesurface` library.
//!
//! Every command writes into `--out`; see `docs/formats.md` for the files.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use changesurface::fit::{fit, FitConfig, FitMode, FitReport, TrainingData};
use changesurface::grid::Observations;
use changesurface::init::{initialize, InitConfig, Initialization};
use changesurface::model::ChangeSurfaceModel;
use changesurface::optim::LbfgsConfig;
use clap::Parser;
use thiserror::Error;

pub mod bench;
pub mod coal;
pub mod config;
pub mod fitting;
pub mod plots;
pub mod synthetic;

pub use config::{Cli, Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pipeline(#[from] changesurface::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for usage errors, 1 for everything that failed while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, A>(args: I) -> ExitCode
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match cli.into_config().and_then(|cfg| run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `changesurface --help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    match cfg.command {
        Command::Synthetic => synthetic::run_synthetic(cfg).map(|r| println!("{}", r.summary())),
        Command::Coal => coal::run_coal(cfg).map(|r| println!("{}", r.summary())),
        Command::Fit => fitting::run_fit(cfg).map(|r| println!("final nlml {}", r.report.objective)),
        Command::Predict => fitting::run_predict(cfg).map(|p| println!("{} predictions written", p.mean.len())),
        Command::BenchmarkLogdet => bench::run_benchmark_logdet(cfg).map(|b| println!("{}", b.summary())),
    }
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// CSV writer with a header row.
pub(crate) fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub(crate) fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Empty field for a missing value.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Runs `f(0..n)` on a small worker pool, results in index order.
pub(crate) fn parallel_map<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every index ran")).collect()
}

/// Initialization settings for one restart.
pub(crate) fn init_config(cfg: &RunConfig, seed: u64, r: usize) -> InitConfig {
    InitConfig {
        g: if r == 1 { 1 } else { cfg.g },
        h: cfg.h,
        partial_iters: cfg.partial_iters,
        q: cfg.q,
        m: cfg.m,
        r,
        seed,
        sort_line: cfg.sort_line,
        v_as_variance: cfg.v_as_variance,
        dense_cap: cfg.dense_cap,
        ..InitConfig::default()
    }
}

pub(crate) fn fit_config(cfg: &RunConfig, max_iter: usize) -> FitConfig {
    FitConfig {
        mode: cfg.strategy.map_or(FitMode::Exact, FitMode::Bounded),
        optimizer: LbfgsConfig { max_iter, ..LbfgsConfig::default() },
        dense_cap: cfg.dense_cap,
        ..FitConfig::default()
    }
}

pub struct Fitted {
    pub model: ChangeSurfaceModel<f64>,
    pub init: Initialization<f64>,
    pub report: FitReport,
}

/// Both initialization stages on `obs`, then the joint fit on `data`.
pub(crate) fn init_and_fit(
    obs: &Observations<f64>,
    data: TrainingData<'_, f64>,
    cfg: &RunConfig,
    seed: u64,
    r: usize,
    max_iter: usize,
) -> Result<Fitted> {
    let init = initialize(obs, &init_config(cfg, seed, r))?;
    let (model, report) = fit(&init.model, data, &fit_config(cfg, max_iter))?;
    Ok(Fitted { model, init, report })
}

/// Plain-text fit report (no wall-clock time, so reruns match).
pub fn fit_report_text(report: &FitReport) -> String {
    let mode = match report.mode {
        FitMode::Exact => "exact".to_string(),
        FitMode::Bounded(s) => format!("bounded {s}"),
    };
    let trace: Vec<String> = report.trace.iter().map(f64::to_string).collect();
    format!(
        "mode = {mode}\ninitial_objective = {}\nobjective = {}\niterations = {}\nevaluations = {}\nconverged = {}\ntermination = {}\ntrace = {}\n",
        report.initial_objective,
        report.objective,
        report.iterations,
        report.evaluations,
        report.converged,
        report.termination,
        trace.join(" ")
    )
}
