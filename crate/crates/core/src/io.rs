//! Plain-text model files.
//!
//! One record per line, values separated by spaces, floats written with the
//! shortest representation that parses back to the same bits. See
//! `docs/formats.md` for the layout.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, RbfParams, SmComponent, SmParams};
use crate::model::ChangeSurfaceModel;
use crate::scalar::Real;
use crate::warp::{ChangeSurface, PolyWeight, RksWeight, WeightFunction};

pub const MODEL_HEADER: &str = "changesurface-model v1";

fn join<T: Real>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn model_to_string<T: Real>(model: &ChangeSurfaceModel<T>) -> String {
    let mut out = vec![
        MODEL_HEADER.to_string(),
        format!("dims {}", model.dims()),
        format!("regimes {}", model.regimes()),
        format!("noise_var {}", model.noise_var),
        format!("y_offset {}", model.y_offset),
    ];
    for k in &model.kernels {
        match k {
            KernelSpec::Rbf(p) => {
                out.push("kernel rbf".into());
                out.push(format!("length_scales {}", join(p.length_scales.iter().copied())));
                out.push(format!("signal_var {}", p.signal_var));
            }
            KernelSpec::SpectralMixture(p) => {
                out.push(format!("kernel sm {}", p.components()));
                for comps in &p.dims {
                    out.push(format!("dim {}", join(comps.iter().flat_map(|c| [c.weight, c.mean, c.var]))));
                }
            }
        }
    }
    for w in model.surface.weights() {
        match w {
            WeightFunction::Rks(w) => {
                out.push(format!("weight rks {}", w.features()));
                out.push(format!("a {}", join(w.a.iter().copied())));
                out.push(format!("omega {}", join(w.omega.transpose().iter().copied())));
                out.push(format!("b {}", join(w.b.iter().copied())));
                out.push(format!("sigma0 {}", w.sigma0));
                out.push(format!("lambda {}", join(w.lambda.iter().copied())));
                out.push(format!("center {}", join(w.center.iter().copied())));
            }
            WeightFunction::Poly(w) => {
                out.push(format!("weight poly {}", w.degree()));
                out.push(format!("coeffs {}", join(w.coeffs.iter().flatten().copied())));
            }
            WeightFunction::Zero => out.push("weight zero".into()),
        }
    }
    out.push("end".into());
    out.join("\n") + "\n"
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate() }
    }

    /// Next non-blank, non-comment line as `(line number, tokens)`.
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok((i + 1, line.split_whitespace().collect()));
        }
        Err(Error::Format("unexpected end of file".into()))
    }

    /// Values of a line that must start with `key`.
    fn record<T: Real>(&mut self, key: &str) -> Result<Vec<T>> {
        let (line, tokens) = self.next()?;
        if tokens[0] != key {
            return Err(Error::Format(format!("line {line}: expected `{key}`, found `{}`", tokens[0])));
        }
        tokens[1..]
            .iter()
            .map(|t| t.parse::<T>().map_err(|_| Error::Format(format!("line {line}: bad number `{t}`"))))
            .collect()
    }

    fn scalar<T: Real>(&mut self, key: &str) -> Result<T> {
        let v = self.record::<T>(key)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::Format(format!("`{key}` takes one value, got {}", v.len()))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (line, tokens) = self.next()?;
        if tokens[0] != key || tokens.len() != 2 {
            return Err(Error::Format(format!("line {line}: expected `{key} <count>`")));
        }
        count(line, tokens.get(1), key)
    }

    fn vector<T: Real>(&mut self, key: &str, len: usize) -> Result<Vec<T>> {
        let v = self.record::<T>(key)?;
        if v.len() != len {
            return Err(Error::Format(format!("`{key}` needs {len} values, got {}", v.len())));
        }
        Ok(v)
    }
}

fn count(line: usize, token: Option<&&str>, what: &str) -> Result<usize> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("line {line}: missing or bad {what}")))
}

pub fn model_from_str<T: Real>(text: &str) -> Result<ChangeSurfaceModel<T>> {
    let mut lines = Lines::new(text);
    let (_, header) = lines.next()?;
    if header.join(" ") != MODEL_HEADER {
        return Err(Error::Format(format!("expected header `{MODEL_HEADER}`")));
    }
    let dims = lines.count("dims")?;
    let regimes = lines.count("regimes")?;
    if dims == 0 || regimes == 0 {
        return Err(Error::Format("dims and regimes must be positive".into()));
    }
    let noise_var = lines.scalar::<T>("noise_var")?;
    let y_offset = lines.scalar::<T>("y_offset")?;

    let mut kernels = Vec::with_capacity(regimes);
    for _ in 0..regimes {
        let (line, tokens) = lines.next()?;
        match (tokens.first(), tokens.get(1)) {
            (Some(&"kernel"), Some(&"rbf")) => {
                let length_scales = lines.vector("length_scales", dims)?;
                let signal_var = lines.scalar("signal_var")?;
                kernels.push(KernelSpec::Rbf(RbfParams { length_scales, signal_var }));
            }
            (Some(&"kernel"), Some(&"sm")) => {
                let q = count(line, tokens.get(2), "component count")?;
                let dims = (0..dims)
                    .map(|_| {
                        let v = lines.vector::<T>("dim", 3 * q)?;
                        Ok(v.chunks(3).map(|c| SmComponent { weight: c[0], mean: c[1], var: c[2] }).collect())
                    })
                    .collect::<Result<_>>()?;
                kernels.push(KernelSpec::SpectralMixture(SmParams { dims }));
            }
            _ => return Err(Error::Format(format!("line {line}: expected a kernel record"))),
        }
    }

    let mut weights = Vec::with_capacity(regimes);
    for _ in 0..regimes {
        let (line, tokens) = lines.next()?;
        match (tokens.first(), tokens.get(1)) {
            (Some(&"weight"), Some(&"rks")) => {
                let m = count(line, tokens.get(2), "feature count")?;
                let a = lines.vector("a", m)?;
                let omega = DMatrix::from_row_slice(m, dims, &lines.vector::<T>("omega", m * dims)?);
                let b = lines.vector("b", m)?;
                let sigma0 = lines.scalar("sigma0")?;
                let lambda = lines.vector("lambda", dims)?;
                let center = lines.vector("center", dims)?;
                weights.push(WeightFunction::Rks(RksWeight { a, omega, b, sigma0, lambda, center }));
            }
            (Some(&"weight"), Some(&"poly")) => {
                let degree = count(line, tokens.get(2), "degree")?;
                let flat = lines.vector::<T>("coeffs", (degree + 1) * dims)?;
                weights.push(WeightFunction::Poly(PolyWeight { coeffs: flat.chunks(dims).map(<[T]>::to_vec).collect() }));
            }
            (Some(&"weight"), Some(&"zero")) => weights.push(WeightFunction::Zero),
            _ => return Err(Error::Format(format!("line {line}: expected a weight record"))),
        }
    }
    let (line, tokens) = lines.next()?;
    if tokens != ["end"] {
        return Err(Error::Format(format!("line {line}: expected `end`")));
    }
    if let Ok((line, _)) = lines.next() {
        return Err(Error::Format(format!("line {line}: content after `end`")));
    }
    let mut model = ChangeSurfaceModel::new(ChangeSurface::new(weights)?, kernels, noise_var)?;
    model.y_offset = y_offset;
    if model.dims() != dims {
        return Err(Error::Format(format!("declared {dims} dims, parameters have {}", model.dims())));
    }
    Ok(model)
}

pub fn save_model<T: Real>(path: impl AsRef<Path>, model: &ChangeSurfaceModel<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_string(model)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<ChangeSurfaceModel<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    model_from_str(&text)
}
