//! Run configuration: defaults, then an optional `key = value` file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use changesurface::logdet::{WeylStrategy, DEFAULT_DENSE_CAP};
use clap::{Args, Parser, Subcommand};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Synthetic,
    Coal,
    Fit,
    Predict,
    BenchmarkLogdet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Input grid CSV (fit, predict, coal).
    pub data: Option<PathBuf>,
    /// Input columns of `data`; defaults to all but the last.
    pub dims: Option<usize>,
    /// Serialized model for predict.
    pub model: Option<PathBuf>,
    /// Query points for predict (CSV, one column per input); defaults to the
    /// training inputs.
    pub points: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub r: usize,
    pub q: usize,
    pub m: usize,
    /// `None` fits the exact likelihood; otherwise the Weyl-bounded one.
    pub strategy: Option<WeylStrategy>,
    pub dense_cap: usize,
    pub test_frac: f64,
    pub sort_line: bool,
    pub with_var: bool,
    pub time_axis: Option<usize>,
    pub restarts: usize,
    /// Synthetic grid side length.
    pub grid: usize,
    /// Smallest accepted minority-regime share of a synthetic dataset.
    pub min_share: f64,
    /// Also fit the single-regime spectral mixture model (synthetic).
    pub ablation: bool,
    /// Training points used by the exact-likelihood fit.
    pub fit_subsample: Option<usize>,
    pub max_iter: Option<usize>,
    pub g: usize,
    pub h: usize,
    pub partial_iters: usize,
    pub v_as_variance: bool,
    /// Benchmark sizes.
    pub sizes: Vec<usize>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            data: None,
            dims: None,
            model: None,
            points: None,
            seed: 0,
            out: PathBuf::from("out"),
            r: 2,
            q: 3,
            m: 5,
            strategy: None,
            dense_cap: DEFAULT_DENSE_CAP,
            test_frac: 0.1,
            sort_line: false,
            with_var: false,
            time_axis: None,
            restarts: 10,
            grid: 50,
            min_share: 0.2,
            ablation: true,
            fit_subsample: None,
            max_iter: None,
            g: 10,
            h: 10,
            partial_iters: 30,
            v_as_variance: false,
            sizes: vec![256, 512, 1024, 2048, 4096],
        }
    }

    /// Sets one option from its textual form; keys use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let bad = |what: &str| CliError::Usage(format!("bad value {value:?} for `{key}` ({what})"));
        macro_rules! num {
            ($what:expr) => {
                value.parse().map_err(|_| bad($what))?
            };
        }
        let flag = || match value {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(bad("expected true or false")),
        };
        match key.as_str() {
            "data" => self.data = Some(PathBuf::from(value)),
            "dims" => self.dims = Some(num!("positive integer")),
            "model" => self.model = Some(PathBuf::from(value)),
            "points" => self.points = Some(PathBuf::from(value)),
            "seed" => self.seed = num!("unsigned integer"),
            "out" => self.out = PathBuf::from(value),
            "r" => self.r = num!("positive integer"),
            "q" => self.q = num!("positive integer"),
            "m" => self.m = num!("positive integer"),
            "strategy" => self.strategy = Some(value.parse().map_err(|e: changesurface::Error| bad(&e.to_string()))?),
            "dense-cap" => self.dense_cap = num!("positive integer"),
            "test-frac" => self.test_frac = num!("fraction"),
            "sort-line" => self.sort_line = flag()?,
            "with-var" => self.with_var = flag()?,
            "time-axis" => self.time_axis = Some(num!("axis index")),
            "restarts" => self.restarts = num!("positive integer"),
            "grid" => self.grid = num!("positive integer"),
            "min-share" => self.min_share = num!("fraction"),
            "ablation" => self.ablation = flag()?,
            "fit-subsample" => self.fit_subsample = Some(num!("positive integer")),
            "max-iter" => self.max_iter = Some(num!("positive integer")),
            "g" => self.g = num!("positive integer"),
            "h" => self.h = num!("positive integer"),
            "partial-iters" => self.partial_iters = num!("positive integer"),
            "v-as-variance" => self.v_as_variance = flag()?,
            "sizes" => {
                self.sizes = value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad("comma-separated sizes")))
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a configuration file: one `key = value` per line, `#` comments.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("r", self.r),
            ("q", self.q),
            ("m", self.m),
            ("restarts", self.restarts),
            ("g", self.g),
            ("h", self.h),
            ("partial-iters", self.partial_iters),
            ("dense-cap", self.dense_cap),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Usage(format!("`{k}` must be at least 1")));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return Err(CliError::Usage(format!("test-frac {} outside (0, 1)", self.test_frac)));
        }
        if self.grid < 2 {
            return Err(CliError::Usage("grid needs at least 2 points per side".into()));
        }
        if self.command == Command::Predict && self.model.is_none() {
            return Err(CliError::Usage("predict needs --model".into()));
        }
        if matches!(self.command, Command::Fit | Command::Predict) && self.data.is_none() {
            return Err(CliError::Usage("fit and predict need --data".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "changesurface", version, about = "Gaussian process change-surface experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum CommandArg {
    /// Synthetic 2-D recovery experiment with held-out NMSE.
    Synthetic,
    /// Change region of the yearly coal-mining disaster counts.
    Coal,
    /// Initialize and fit a model to a grid CSV.
    Fit,
    /// Posterior predictions (and slice summaries) from a saved model.
    Predict,
    /// Accuracy and cost of the log-determinant bounds.
    BenchmarkLogdet,
}

#[derive(Debug, Args)]
pub struct Flags {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dims: Option<usize>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub points: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of regimes.
    #[arg(long, global = true)]
    pub r: Option<usize>,
    /// Spectral mixture components per dimension.
    #[arg(long, global = true)]
    pub q: Option<usize>,
    /// Random features per weighting function.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// exact, middle or greedy:S; selects the bounded objective.
    #[arg(long, global = true)]
    pub strategy: Option<WeylStrategy>,
    #[arg(long, global = true)]
    pub dense_cap: Option<usize>,
    #[arg(long, global = true)]
    pub test_frac: Option<f64>,
    /// Sort each line's responses before the spectral transform.
    #[arg(long, global = true)]
    pub sort_line: bool,
    /// Also write predictive variances.
    #[arg(long, global = true)]
    pub with_var: bool,
    /// Axis treated as time by the slice summaries.
    #[arg(long, global = true)]
    pub time_axis: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub fit_subsample: Option<usize>,
    /// Comma-separated benchmark sizes.
    #[arg(long, global = true)]
    pub sizes: Option<String>,
}

impl Cli {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let command = match self.command {
            CommandArg::Synthetic => Command::Synthetic,
            CommandArg::Coal => Command::Coal,
            CommandArg::Fit => Command::Fit,
            CommandArg::Predict => Command::Predict,
            CommandArg::BenchmarkLogdet => Command::BenchmarkLogdet,
        };
        let mut cfg = RunConfig::new(command);
        let f = self.flags;
        if let Some(path) = &f.config {
            cfg.apply_file(path)?;
        }
        macro_rules! over {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { cfg.$field = v; } )* };
        }
        over!(seed, out, r, q, m, dense_cap, test_frac, restarts);
        macro_rules! some {
            ($($field:ident),*) => { $( if f.$field.is_some() { cfg.$field = f.$field; } )* };
        }
        some!(data, dims, model, points, strategy, time_axis, max_iter, fit_subsample);
        cfg.sort_line |= f.sort_line;
        cfg.with_var |= f.with_var;
        if let Some(s) = f.sizes {
            cfg.set("sizes", &s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
