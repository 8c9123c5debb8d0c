//! Cartesian-product grid data, CSV ingestion, splits and the synthetic
//! two-regime generator.
//!
//! Flattened grid order is lexicographic with axis 0 varying slowest.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{mismatch, Error, Result};
use crate::kernels::{eval_factors, KernelSpec, RbfParams};
use crate::kron::{kron_matvec, unravel};
use crate::scalar::{std_dev, Real};
use crate::warp::{softmax, PolyWeight};

/// Independent generator for one named component of a seeded run.
pub fn component_rng(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridDataset<T: Real> {
    axes: Vec<Vec<T>>,
    y: Vec<T>,
    labels: Vec<String>,
}

impl<T: Real> GridDataset<T> {
    /// `labels` may be empty, else one per axis plus one for the response.
    pub fn new(axes: Vec<Vec<T>>, y: Vec<T>, labels: Vec<String>) -> Result<Self> {
        if axes.is_empty() {
            return Err(mismatch("grid needs at least one axis"));
        }
        for (d, ax) in axes.iter().enumerate() {
            if ax.is_empty() {
                return Err(mismatch(format!("axis {d} is empty")));
            }
            if ax.iter().any(|v| !v.is_finite()) || ax.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidParameter(format!("axis {d} must be finite and strictly increasing")));
            }
        }
        let n: usize = axes.iter().map(Vec::len).product();
        if y.len() != n {
            return Err(mismatch(format!("grid has {n} cells, {} responses given", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite response".into()));
        }
        if !labels.is_empty() && labels.len() != axes.len() + 1 {
            return Err(mismatch("labels must name every axis and the response"));
        }
        Ok(Self { axes, y, labels })
    }

    pub fn axes(&self) -> &[Vec<T>] {
        &self.axes
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        unravel(flat, &self.shape())
    }

    pub fn point(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&i, ax)| ax[i]).collect()
    }

    /// All grid points as rows, in flat order.
    pub fn points(&self) -> DMatrix<T> {
        self.points_at(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn points_at(&self, idx: &[usize]) -> DMatrix<T> {
        let mut out = DMatrix::zeros(idx.len(), self.dims());
        for (r, &flat) in idx.iter().enumerate() {
            for (d, v) in self.point(flat).into_iter().enumerate() {
                out[(r, d)] = v;
            }
        }
        out
    }

    /// Training view over a subset of cells.
    pub fn subset(&self, idx: &[usize]) -> Observations<T> {
        let shape = self.shape();
        let index: Vec<Vec<usize>> = idx.iter().map(|&f| unravel(f, &shape)).collect();
        Observations {
            points: self.points_at(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            axes: self.axes.clone(),
            index,
        }
    }

    pub fn observations(&self) -> Observations<T> {
        self.subset(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Same axes, new responses.
    pub fn with_y(&self, y: Vec<T>) -> Result<Self> {
        Self::new(self.axes.clone(), y, self.labels.clone())
    }
}

/// Scattered observations with per-dimension coordinate tables.
///
/// `axes[d]` holds the distinct coordinates along dimension `d` and
/// `index[p][d]` locates point `p` in it, so per-dimension kernel factors
/// need only be evaluated once per pair of distinct coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations<T: Real> {
    pub points: DMatrix<T>,
    pub y: Vec<T>,
    pub axes: Vec<Vec<T>>,
    pub index: Vec<Vec<usize>>,
}

impl<T: Real> Observations<T> {
    pub fn from_points(points: DMatrix<T>, y: Vec<T>) -> Result<Self> {
        if points.nrows() != y.len() {
            return Err(mismatch(format!("{} points but {} responses", points.nrows(), y.len())));
        }
        let dims = points.ncols();
        let mut axes = Vec::with_capacity(dims);
        let mut index = vec![vec![0; dims]; y.len()];
        for d in 0..dims {
            let mut ax: Vec<T> = points.column(d).iter().copied().collect();
            if ax.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coordinate".into()));
            }
            ax.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            ax.dedup();
            for (p, row) in index.iter_mut().enumerate() {
                let v = points[(p, d)];
                row[d] = ax.partition_point(|&a| a < v);
            }
            axes.push(ax);
        }
        Ok(Self { points, y, axes, index })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, p: usize) -> Vec<T> {
        self.points.row(p).iter().copied().collect()
    }

    /// Rows `idx`, re-indexed against the same coordinate tables.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            points: DMatrix::from_fn(idx.len(), self.dims(), |r, d| self.points[(idx[r], d)]),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            axes: self.axes.clone(),
            index: idx.iter().map(|&i| self.index[i].clone()).collect(),
        }
    }
}

/// Reads a grid from CSV: a header, `dims` input columns, one response.
pub fn load_csv<T: Real>(path: impl AsRef<Path>, dims: usize) -> Result<GridDataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let labels: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if labels.len() != dims + 1 {
        return Err(mismatch(format!("expected {} columns, header has {}", dims + 1, labels.len())));
    }
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() != dims + 1 {
            return Err(mismatch(format!("line {line} has {} columns, expected {}", record.len(), dims + 1)));
        }
        let row = record
            .iter()
            .map(|field| match field.parse::<T>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumeric { line, value: field.to_string() }),
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    grid_from_rows(rows, dims, labels)
}

fn grid_from_rows<T: Real>(rows: Vec<Vec<T>>, dims: usize, labels: Vec<String>) -> Result<GridDataset<T>> {
    let mut axes = Vec::with_capacity(dims);
    for d in 0..dims {
        let mut ax: Vec<T> = rows.iter().map(|r| r[d]).collect();
        ax.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        ax.dedup();
        axes.push(ax);
    }
    let n: usize = axes.iter().map(Vec::len).product();
    if rows.len() != n {
        return Err(Error::IncompleteGrid(format!("{} rows for a grid of {n} cells", rows.len())));
    }
    let mut y: Vec<Option<T>> = vec![None; n];
    for row in &rows {
        let flat = (0..dims).fold(0, |acc, d| acc * axes[d].len() + axes[d].partition_point(|&a| a < row[d]));
        if y[flat].replace(row[dims]).is_some() {
            let coords: Vec<String> = row[..dims].iter().map(|v| v.to_string()).collect();
            return Err(Error::IncompleteGrid(format!("duplicate cell ({})", coords.join(", "))));
        }
    }
    // equal counts and no duplicates imply every cell is filled
    let y = y.into_iter().map(|v| v.expect("complete grid")).collect();
    GridDataset::new(axes, y, labels)
}

/// Writes a grid in the format read by [`load_csv`].
pub fn write_csv<T: Real>(path: impl AsRef<Path>, data: &GridDataset<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let labels = if data.labels().is_empty() {
        let mut l: Vec<String> = (0..data.dims()).map(|d| format!("x{d}")).collect();
        l.push("y".into());
        l
    } else {
        data.labels().to_vec()
    };
    w.write_record(&labels)?;
    for flat in 0..data.len() {
        let mut rec: Vec<String> = data.point(flat).iter().map(|v| v.to_string()).collect();
        rec.push(data.y()[flat].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainTestSplit {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

/// Uniform random split; `round(test_frac · n)` cells are held out.
pub fn split(n: usize, test_frac: f64, seed: u64) -> Result<TrainTestSplit> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::DegenerateSplit(format!("test fraction {test_frac} outside (0, 1)")));
    }
    let n_test = (test_frac * n as f64).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::DegenerateSplit(format!("{n_test} of {n} cells held out")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_idx = idx[..n_test].to_vec();
    let mut train_idx = idx[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok(TrainTestSplit { train_idx, test_idx, seed })
}

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub n1: usize,
    pub n2: usize,
    /// `(length-scale, signal variance)` per regime, length-scales as a
    /// fraction of the unit range.
    pub regimes: [(f64, f64); 2],
    /// Noise standard deviation relative to `std(f)`.
    pub noise_frac: f64,
    /// Variance of every polynomial coefficient.
    pub beta_var: f64,
    pub degree: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { n1: 50, n2: 50, regimes: [(0.1, 1.0), (0.3, 0.5)], noise_frac: 0.05, beta_var: 3.0, degree: 3 }
    }
}

/// Generating quantities behind a synthetic dataset.
#[derive(Clone, Debug)]
pub struct SyntheticTruth<T: Real> {
    /// `σ(w₁(x))` per grid cell.
    pub surface: Vec<T>,
    pub weight: PolyWeight<T>,
    pub kernels: [KernelSpec<T>; 2],
    pub latents: [Vec<T>; 2],
    /// Noise-free blended signal.
    pub signal: Vec<T>,
    pub noise_std: T,
}

pub fn generate_synthetic<T: Real>(n1: usize, n2: usize, seed: u64) -> Result<(GridDataset<T>, SyntheticTruth<T>)> {
    generate_synthetic_with(&SyntheticConfig { n1, n2, ..SyntheticConfig::default() }, seed)
}

/// Two independent RBF draws on `[0,1]²`, blended by `σ(w_poly)` against a
/// zero reference weight, plus Gaussian noise.
pub fn generate_synthetic_with<T: Real>(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<(GridDataset<T>, SyntheticTruth<T>)> {
    if config.n1 < 2 || config.n2 < 2 {
        return Err(Error::InvalidParameter("synthetic grid needs at least 2 points per axis".into()));
    }
    let axis = |len: usize| (0..len).map(|i| i as f64 / (len - 1) as f64).collect::<Vec<f64>>();
    let axes = vec![axis(config.n1), axis(config.n2)];
    let n = config.n1 * config.n2;

    let mut coef_rng = component_rng(seed, 1);
    let coef = Normal::new(0.0, config.beta_var.sqrt()).expect("positive variance");
    let coeffs: Vec<Vec<f64>> =
        (0..=config.degree).map(|_| vec![coef.sample(&mut coef_rng), coef.sample(&mut coef_rng)]).collect();
    let weight = PolyWeight { coeffs };

    let mut latents = Vec::with_capacity(2);
    let mut kernels = Vec::with_capacity(2);
    for (i, &(ell, var)) in config.regimes.iter().enumerate() {
        let spec = KernelSpec::Rbf(RbfParams { length_scales: vec![ell, ell], signal_var: var });
        // symmetric square root of each factor: Q diag(√λ)
        let roots: Vec<DMatrix<f64>> = eval_factors(&spec, &axes)?
            .into_iter()
            .map(|f| {
                let eig = f.symmetric_eigen();
                let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
            })
            .collect();
        let mut rng = component_rng(seed, 2 + i as u64);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        latents.push(kron_matvec(&roots, &z)?);
        kernels.push(spec);
    }

    let mut surface = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    for flat in 0..n {
        let (a, b) = (flat / config.n2, flat % config.n2);
        let s = softmax(&[weight.eval(&[axes[0][a], axes[1][b]]), 0.0])[0];
        surface.push(s);
        signal.push(s * latents[0][flat] + (1.0 - s) * latents[1][flat]);
    }
    let noise_std = config.noise_frac * std_dev(&signal);
    let mut noise_rng = component_rng(seed, 4);
    let y: Vec<f64> = signal
        .iter()
        .map(|&f| f + noise_std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut noise_rng))
        .collect();

    let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    let conv_spec = |s: &KernelSpec<f64>| match s {
        KernelSpec::Rbf(p) => KernelSpec::Rbf(RbfParams { length_scales: conv(&p.length_scales), signal_var: T::lit(p.signal_var) }),
        KernelSpec::SpectralMixture(_) => unreachable!("synthetic regimes are RBF"),
    };
    let labels = vec!["x1".to_string(), "x2".to_string(), "y".to_string()];
    let data = GridDataset::new(axes.iter().map(|a| conv(a)).collect(), conv(&y), labels)?;
    let truth = SyntheticTruth {
        surface: conv(&surface),
        weight: PolyWeight { coeffs: weight.coeffs.iter().map(|c| conv(c)).collect() },
        kernels: [conv_spec(&kernels[0]), conv_spec(&kernels[1])],
        latents: [conv(&latents[0]), conv(&latents[1])],
        signal: conv(&signal),
        noise_std: T::lit(noise_std),
    };
    Ok((data, truth))
}

/// Fraction of cells on the minority side of `σ = 0.5`.
pub fn minority_share<T: Real>(surface: &[T]) -> f64 {
    if surface.is_empty() {
        return 0.0;
    }
    let above = surface.iter().filter(|&&s| s > T::lit(0.5)).count();
    above.min(surface.len() - above) as f64 / surface.len() as f64
}
