//! Generic `fit` and `predict` over a grid CSV.

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use changesurface::fit::TrainingData;
use changesurface::grid::{component_rng, load_csv, GridDataset};
use changesurface::io::{load_model, save_model};
use changesurface::kron::CgConfig;
use changesurface::model::{predict_capped, predict_grid, Prediction};
use changesurface::warp::surface_summary;
use changesurface::Error;
use nalgebra::DMatrix;
use rand::seq::index::sample;

use crate::{csv_writer, finish, init_and_fit, opt, plots, write_text, CliError, Fitted, Result, RunConfig};

pub const DEFAULT_MAX_ITER: usize = 500;

/// Input columns of a CSV: all but the last.
fn header_dims(path: &Path) -> Result<usize> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let cols = csv::Reader::from_reader(file).headers()?.len();
    if cols < 2 {
        return Err(Error::DimensionMismatch(format!("{} needs inputs and a response", path.display())).into());
    }
    Ok(cols - 1)
}

pub fn load_grid(cfg: &RunConfig) -> Result<GridDataset<f64>> {
    let path = cfg.data.as_deref().ok_or_else(|| CliError::Usage("missing --data".into()))?;
    let dims = match cfg.dims {
        Some(d) => d,
        None => header_dims(path)?,
    };
    Ok(load_csv(path, dims)?)
}

pub fn run_fit(cfg: &RunConfig) -> Result<Fitted> {
    let start = Instant::now();
    let data = load_grid(cfg)?;
    let obs = data.observations();
    let max_iter = cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    let fitted = match (cfg.strategy, cfg.fit_subsample) {
        (Some(_), _) => init_and_fit(&obs, TrainingData::Grid(&data), cfg, cfg.seed, cfg.r, max_iter)?,
        (None, Some(k)) if k < obs.len() => {
            let mut idx = sample(&mut component_rng(cfg.seed, 20), obs.len(), k).into_vec();
            idx.sort_unstable();
            let sub = obs.select(&idx);
            init_and_fit(&obs, TrainingData::Points(&sub), cfg, cfg.seed, cfg.r, max_iter)?
        }
        (None, _) => init_and_fit(&obs, TrainingData::Points(&obs), cfg, cfg.seed, cfg.r, max_iter)?,
    };
    let out = &cfg.out;
    save_model(out.join("model.txt"), &fitted.model)?;
    write_text(&out.join("init_report.txt"), &fitted.init.report())?;
    write_text(&out.join("fit_report.txt"), &crate::fit_report_text(&fitted.report))?;
    let p = out.join("timings.csv");
    let mut w = csv_writer(&p, &["stage", "seconds"])?;
    w.write_record(["fit", &fitted.report.wall_seconds.to_string()])?;
    w.write_record(["total", &start.elapsed().as_secs_f64().to_string()])?;
    finish(w, &p)?;
    Ok(fitted)
}

/// Query points: the first `dims` columns of a headed CSV.
fn read_points(path: &Path, dims: usize) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let mut flat = Vec::new();
    let mut rows = 0;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < dims {
            return Err(CliError::Pipeline(Error::DimensionMismatch(format!(
                "line {} has {} columns, the model needs {dims}",
                r + 2,
                rec.len()
            ))));
        }
        for field in rec.iter().take(dims) {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => flat.push(v),
                _ => return Err(CliError::Pipeline(Error::NonNumeric { line: r + 2, value: field.to_string() })),
            }
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, dims, &flat))
}

/// Every combination of coordinates of the axes other than `time_axis`.
fn slices(data: &GridDataset<f64>, time_axis: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for (d, ax) in data.axes().iter().enumerate() {
        if d == time_axis {
            continue;
        }
        out = out.into_iter().flat_map(|s| ax.iter().map(move |&v| [s.clone(), vec![v]].concat())).collect();
    }
    out
}

fn labels(data: &GridDataset<f64>) -> Vec<String> {
    if data.labels().is_empty() {
        (0..data.dims()).map(|d| format!("x{d}")).collect()
    } else {
        data.labels()[..data.dims()].to_vec()
    }
}

pub fn run_predict(cfg: &RunConfig) -> Result<Prediction<f64>> {
    let model = load_model::<f64>(cfg.model.as_deref().ok_or_else(|| CliError::Usage("missing --model".into()))?)?;
    let cfg_dims = RunConfig { dims: Some(cfg.dims.unwrap_or(model.dims())), ..cfg.clone() };
    let data = load_grid(&cfg_dims)?;
    let test = match &cfg.points {
        Some(p) => read_points(p, model.dims())?,
        None => data.points(),
    };
    let pred = if data.len() <= cfg.dense_cap {
        predict_capped(&model, &data.observations(), &test, cfg.with_var, cfg.dense_cap)?
    } else {
        predict_grid(&model, &data, &test, cfg.with_var, &CgConfig { tol: 1e-8, max_iter: 5000 })?
    };

    let out = &cfg.out;
    let names = labels(&data);
    let p = out.join("predictions.csv");
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push("mean");
    if cfg.with_var {
        header.push("var");
    }
    let mut w = csv_writer(&p, &header)?;
    for t in 0..test.nrows() {
        let mut rec: Vec<String> = test.row(t).iter().map(f64::to_string).collect();
        rec.push(pred.mean[t].to_string());
        if let Some(v) = &pred.var {
            rec.push(v[t].to_string());
        }
        w.write_record(&rec)?;
    }
    finish(w, &p)?;

    if let Some(axis) = cfg.time_axis {
        if axis >= data.dims() {
            return Err(CliError::Usage(format!("time axis {axis} outside {} dimensions", data.dims())));
        }
        let summary = surface_summary(&model.surface, axis, &data.axes()[axis], &slices(&data, axis))?;
        let p = out.join("slices.csv");
        let mut header: Vec<&str> =
            names.iter().enumerate().filter(|(d, _)| *d != axis).map(|(_, s)| s.as_str()).collect();
        header.extend(["midpoint", "slope", "transition", "crossings"]);
        let mut w = csv_writer(&p, &header)?;
        for s in &summary {
            let mut rec: Vec<String> = s.slice.iter().map(f64::to_string).collect();
            rec.extend([opt(s.midpoint), opt(s.slope), opt(s.transition), s.crossings.to_string()]);
            w.write_record(&rec)?;
        }
        finish(w, &p)?;
        write_text(&out.join("plot_slices.py"), plots::SLICES)?;
    }
    Ok(pred)
}
