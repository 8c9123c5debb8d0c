use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use changesurface::grid::{load_csv, write_csv, GridDataset};
use changesurface::io::{load_model, save_model};
use changesurface::kernels::{KernelSpec, RbfParams};
use changesurface::model::{nmse, predict_capped, ChangeSurfaceModel};
use changesurface::warp::{ChangeSurface, PolyWeight, WeightFunction};
use changesurface_cli::bench::run_benchmark_logdet;
use changesurface_cli::fitting::{run_fit, run_predict};
use changesurface_cli::{run, Cli, CliError, Command, RunConfig};
use clap::Parser;
use tempfile::TempDir;

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_changesurface"))
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().expect("binary runs").status.code().expect("exit code")
}

fn smooth_grid(dir: &Path, n1: usize, n2: usize) -> PathBuf {
    let a: Vec<f64> = (0..n1).map(|i| i as f64 / (n1 - 1) as f64).collect();
    let b: Vec<f64> = (0..n2).map(|i| i as f64 / (n2 - 1) as f64).collect();
    let y = a.iter().flat_map(|&u| b.iter().map(move |&v| (3.0 * u).sin() + (2.0 * v).cos())).collect();
    let g = GridDataset::new(vec![a, b], y, vec!["u".into(), "v".into(), "y".into()]).unwrap();
    let path = dir.join("grid.csv");
    write_csv(&path, &g).unwrap();
    path
}

fn small(command: Command, out: &Path) -> RunConfig {
    RunConfig {
        out: out.to_path_buf(),
        g: 2,
        h: 2,
        partial_iters: 3,
        max_iter: Some(40),
        ..RunConfig::new(command)
    }
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("run.conf");
    fs::write(&file, "# defaults for this run\nseed = 3\nmax_iter = 77\nstrategy = greedy:12\n\nmin-share = 0.3\n").unwrap();
    let parse = |extra: &[&str]| {
        let mut args = vec!["changesurface", "synthetic", "--config", file.to_str().unwrap()];
        args.extend_from_slice(extra);
        Cli::try_parse_from(args).unwrap().into_config()
    };
    let cfg = parse(&[]).unwrap();
    assert_eq!((cfg.seed, cfg.max_iter, cfg.min_share), (3, Some(77), 0.3));
    assert_eq!(cfg.strategy.unwrap().to_string(), "greedy:12");
    let cfg = parse(&["--seed", "9", "--strategy", "middle"]).unwrap();
    assert_eq!((cfg.seed, cfg.max_iter), (9, Some(77)));
    assert_eq!(cfg.strategy.unwrap().to_string(), "middle");
    // untouched keys keep their defaults
    assert_eq!((cfg.r, cfg.q, cfg.m, cfg.restarts), (2, 3, 5, 10));

    fs::write(&file, "colour = blue\n").unwrap();
    let err = parse(&[]).unwrap_err();
    assert!(matches!(err, CliError::Usage(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(exit_code(&["fit", "--bogus"]), 2);
    assert_eq!(exit_code(&["fit", "--strategy", "sideways", "--out", out]), 2);
    assert_eq!(exit_code(&["fit", "--out", out]), 2);
    assert_eq!(exit_code(&["predict", "--data", "x.csv", "--out", out]), 2);
    assert_eq!(exit_code(&["fit", "--data", "/nonexistent/grid.csv", "--out", out]), 1);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b,y\n0,0,1\n0,1,oops\n").unwrap();
    assert_eq!(exit_code(&["fit", "--data", bad.to_str().unwrap(), "--out", out]), 1);
    assert_eq!(exit_code(&["benchmark-logdet", "--sizes", "16", "--out", out]), 0);
}

#[test]
fn fit_then_predict_interpolates_and_reloads() {
    let dir = TempDir::new().unwrap();
    let data = smooth_grid(dir.path(), 8, 8);
    let fit_out = dir.path().join("fit");
    let cfg = RunConfig { data: Some(data.clone()), ..small(Command::Fit, &fit_out) };
    fs::create_dir_all(&fit_out).unwrap();
    let fitted = run_fit(&cfg).unwrap();
    for f in ["model.txt", "init_report.txt", "fit_report.txt", "timings.csv"] {
        assert!(fit_out.join(f).exists(), "{f}");
    }
    assert!(fitted.report.objective <= fitted.report.initial_objective);

    let pred_out = dir.path().join("pred");
    let pcfg = RunConfig {
        data: Some(data.clone()),
        model: Some(fit_out.join("model.txt")),
        with_var: true,
        ..small(Command::Predict, &pred_out)
    };
    fs::create_dir_all(&pred_out).unwrap();
    let pred = run_predict(&pcfg).unwrap();
    let grid = load_csv::<f64>(&data, 2).unwrap();
    let ybar = grid.y().iter().sum::<f64>() / grid.len() as f64;
    let err = nmse(grid.y(), &pred.mean, ybar).unwrap();
    assert!(err < 1e-3, "training-point NMSE {err}");

    // the saved model predicts exactly what the in-memory one does
    let direct = predict_capped(&fitted.model, &grid.observations(), &grid.points(), true, 4096).unwrap();
    assert_eq!(direct.mean, pred.mean);
    assert_eq!(direct.var, pred.var);
    assert_eq!(load_model::<f64>(fit_out.join("model.txt")).unwrap(), fitted.model);

    let mut rd = csv::Reader::from_path(pred_out.join("predictions.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["u", "v", "mean", "var"]);
    assert_eq!(rd.records().count(), 64);
}

#[test]
fn predict_at_query_points() {
    let dir = TempDir::new().unwrap();
    let data = smooth_grid(dir.path(), 5, 6);
    let model = ChangeSurfaceModel::new(
        ChangeSurface::single(),
        vec![KernelSpec::Rbf(RbfParams { length_scales: vec![0.4, 0.5], signal_var: 1.0 })],
        1e-4,
    )
    .unwrap();
    let model_path = dir.path().join("model.txt");
    save_model(&model_path, &model).unwrap();
    let points = dir.path().join("points.csv");
    fs::write(&points, "u,v,ignored\n0.1,0.2,x\n0.55,0.9,y\n").unwrap();
    let cfg = RunConfig {
        data: Some(data),
        model: Some(model_path),
        points: Some(points),
        ..RunConfig::new(Command::Predict)
    };
    let out = TempDir::new().unwrap();
    let pred = run_predict(&RunConfig { out: out.path().to_path_buf(), ..cfg }).unwrap();
    assert_eq!(pred.mean.len(), 2);
    for (m, (u, v)) in pred.mean.iter().zip([(0.1f64, 0.2f64), (0.55, 0.9)]) {
        assert!((m - ((3.0 * u).sin() + (2.0 * v).cos())).abs() < 0.05, "{m} at ({u}, {v})");
    }
}

/// Three-dimensional grid with a planar change surface whose 0.5 level
/// sits at `t = 0.3 + 0.2 a + 0.1 b`.
fn planar_3d(dir: &Path) -> (PathBuf, PathBuf) {
    let ax = |n: usize| -> Vec<f64> { (0..n).map(|i| i as f64 / (n - 1) as f64).collect() };
    let (a, b, t) = (ax(4), ax(3), ax(21));
    let mut y = Vec::new();
    for &u in &a {
        for &v in &b {
            for &s in &t {
                y.push((4.0 * s).sin() + u - v);
            }
        }
    }
    let grid = GridDataset::new(vec![a, b, t], y, vec!["a".into(), "b".into(), "t".into(), "y".into()]).unwrap();
    let data = dir.join("cube.csv");
    write_csv(&data, &grid).unwrap();
    // w₁ = 20 (t − 0.3 − 0.2a − 0.1b)
    let weight = PolyWeight { coeffs: vec![vec![-6.0, 0.0, 0.0], vec![-4.0, -2.0, 20.0]] };
    let model = ChangeSurfaceModel::new(
        ChangeSurface::new(vec![WeightFunction::Poly(weight), WeightFunction::Zero]).unwrap(),
        vec![
            KernelSpec::Rbf(RbfParams { length_scales: vec![0.5, 0.5, 0.3], signal_var: 1.0 }),
            KernelSpec::Rbf(RbfParams { length_scales: vec![1.0, 1.0, 0.6], signal_var: 0.5 }),
        ],
        0.01,
    )
    .unwrap();
    let path = dir.join("model.txt");
    save_model(&path, &model).unwrap();
    (data, path)
}

#[test]
fn slice_summaries_on_a_cube() {
    let dir = TempDir::new().unwrap();
    let (data, model) = planar_3d(dir.path());
    let out = dir.path().join("out");
    let cfg = RunConfig {
        data: Some(data),
        model: Some(model),
        time_axis: Some(2),
        ..RunConfig::new(Command::Predict)
    };
    run(&RunConfig { out: out.clone(), ..cfg.clone() }).unwrap();
    assert!(out.join("plot_slices.py").exists());
    let mut rd = csv::Reader::from_path(out.join("slices.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["a", "b", "midpoint", "slope", "transition", "crossings"]);
    let rows: Vec<Vec<f64>> =
        rd.records().map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let (a, b) = (row[0], row[1]);
        let mid = 0.3 + 0.2 * a + 0.1 * b;
        // linear interpolation of a logistic between grid samples
        assert!((row[2] - mid).abs() < 0.01, "midpoint {} expected {mid}", row[2]);
        // σ(w₁) rises along t: 0.5 / (2 ln 3 / 20)
        assert!((row[3] - 5.0 / 3f64.ln()).abs() < 0.3, "slope {}", row[3]);
        // logistic 0.1→0.9 width is 2 ln 9 / 20
        assert!((row[4] - 2.0 * 9f64.ln() / 20.0).abs() < 0.05);
        assert_eq!(row[5], 1.0);
    }

    // a time axis outside the grid is a usage error
    let bad = RunConfig { time_axis: Some(3), out: dir.path().join("bad"), ..cfg };
    assert!(matches!(run(&bad), Err(CliError::Usage(_))));
}

fn bundle(dir: &Path, skip: &[&str]) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !skip.contains(&p.file_name().unwrap().to_str().unwrap()))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn tiny_synthetic(out: &Path, seed: u64) -> RunConfig {
    RunConfig {
        seed,
        grid: 12,
        restarts: 2,
        fit_subsample: Some(60),
        max_iter: Some(10),
        ..small(Command::Synthetic, out)
    }
}

#[test]
fn same_seed_same_bundle() {
    let dir = TempDir::new().unwrap();
    let runs: Vec<_> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("synthetic{k}"));
            run(&tiny_synthetic(&out, 4)).unwrap();
            bundle(&out, &["timings.csv"])
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    for f in ["data.csv", "model.txt", "predictions.csv", "restarts.csv", "summary.txt", "surface_pred.csv", "surface_true.csv"] {
        assert!(names.contains(&f), "{f} missing");
    }
    let other = dir.path().join("synthetic-other");
    run(&tiny_synthetic(&other, 5)).unwrap();
    assert_ne!(bundle(&other, &["timings.csv"]), runs[0]);

    let coal_data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/coal.csv");
    let runs: Vec<_> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("coal{k}"));
            let cfg = RunConfig { data: Some(coal_data.clone()), restarts: 2, ..small(Command::Coal, &out) };
            run(&cfg).unwrap();
            bundle(&out, &["timings.csv"])
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn synthetic_surfaces_cover_the_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = RunConfig {
        grid: 50,
        restarts: 1,
        ablation: false,
        fit_subsample: Some(60),
        max_iter: Some(3),
        g: 1,
        h: 1,
        partial_iters: 1,
        ..small(Command::Synthetic, dir.path())
    };
    run(&cfg).unwrap();
    for f in ["surface_true.csv", "surface_pred.csv"] {
        let s = load_csv::<f64>(dir.path().join(f), 2).unwrap();
        assert_eq!(s.len(), 2500);
        assert_eq!(s.labels(), ["x1", "x2", "sigma"]);
        assert!(s.y().iter().all(|v| (0.0..=1.0).contains(v)), "{f}");
    }
    let data = load_csv::<f64>(dir.path().join("data.csv"), 2).unwrap();
    assert_eq!(data.shape(), [50, 50]);
    let mut rd = csv::Reader::from_path(dir.path().join("predictions.csv")).unwrap();
    assert_eq!(rd.records().count(), 250);
    assert!(fs::read_to_string(dir.path().join("summary.txt")).unwrap().contains("mean_nmse_sm = \n"));
}

#[test]
fn fiedler_rows_only_for_two_kernels() {
    let dir = TempDir::new().unwrap();
    let cfg = RunConfig { sizes: vec![36, 64], ..RunConfig::new(Command::BenchmarkLogdet) };
    let res = run_benchmark_logdet(&RunConfig { out: dir.path().to_path_buf(), ..cfg }).unwrap();
    assert!(res.rows.iter().filter(|r| r.strategy == "fiedler").all(|r| r.kernels == 2));
    assert_eq!(res.rows.iter().filter(|r| r.strategy == "fiedler").count(), 2);
    for r in res.rows.iter().filter(|r| r.strategy != "dense") {
        assert!(r.logdet_value >= r.exact_value - 1e-8 * r.exact_value.abs(), "{r:?}");
    }
    let mut rd = csv::Reader::from_path(dir.path().join("benchmark.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["n", "kernels", "strategy", "logdet", "exact", "ratio"]);
    // 2 kernels: dense + 3 Weyl + Fiedler; 3 kernels: dense + 3 Weyl
    assert_eq!(rd.records().count(), 2 * (5 + 4));
}
