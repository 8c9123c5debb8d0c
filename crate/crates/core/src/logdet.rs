//! Log-determinant bounds for sums of positive semidefinite matrices.
//!
//! For Hermitian `A`, `B` with descending eigenvalues `α`, `β`, the sum
//! `M = A + B` satisfies `μ_{i+j−1} ≤ α_i + β_j`. Each strategy picks, for
//! every output index, which admissible pair bounds it; sums of more than two
//! matrices are handled by folding pairwise in the given order.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dense::Cholesky;
use crate::error::{mismatch, Error, Result};
use crate::kernels::{add_factor_jitter, eval_factors, KernelSpec, RbfParams};
use crate::kron::{kron_eigvals, scaled_term_spectrum, EigenSpectrum, KronOperator, KronTerm};
use crate::scalar::Real;
use crate::warp::softmax;

/// Default size cap for dense reference computations.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Pairing rule for the Weyl bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeylStrategy {
    /// Best pair for every output index, `O(n²)`.
    Exact,
    /// `i = j` for odd (one-based) output index, `i = j + 1` otherwise, `O(n)`.
    Middle,
    /// Best pair among `2s + 1` candidates centred on the previous choice,
    /// `O(sn)`; `s ≥ n/2` searches every pair.
    Greedy(usize),
}

impl fmt::Display for WeylStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeylStrategy::Exact => write!(f, "exact"),
            WeylStrategy::Middle => write!(f, "middle"),
            WeylStrategy::Greedy(s) => write!(f, "greedy:{s}"),
        }
    }
}

impl FromStr for WeylStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(WeylStrategy::Exact),
            "middle" => Ok(WeylStrategy::Middle),
            other => {
                let width = other
                    .strip_prefix("greedy:")
                    .and_then(|w| w.parse::<usize>().ok())
                    .filter(|&w| w >= 1)
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("unknown strategy {s:?} (exact, middle, greedy:S with S ≥ 1)"))
                    })?;
                Ok(WeylStrategy::Greedy(width))
            }
        }
    }
}

/// Zero-based middle pair for output index `k`: `i = ⌈k/2⌉`, `j = k − i`.
fn middle(k: usize) -> usize {
    k.div_ceil(2)
}

/// Elementwise upper bound on the spectrum of `A + B`.
pub fn weyl_pairwise<T: Real>(
    alpha: &EigenSpectrum<T>,
    beta: &EigenSpectrum<T>,
    strategy: WeylStrategy,
) -> Result<EigenSpectrum<T>> {
    let n = alpha.len();
    if beta.len() != n {
        return Err(mismatch(format!("spectra of length {n} and {}", beta.len())));
    }
    let (a, b) = (alpha.values(), beta.values());
    let pair = |i: usize, k: usize| a[i] + b[k - i];
    let mut out = Vec::with_capacity(n);
    match strategy {
        WeylStrategy::Exact => {
            for k in 0..n {
                let best = (1..=k).fold(pair(0, k), |m, i| {
                    let v = pair(i, k);
                    if v < m {
                        v
                    } else {
                        m
                    }
                });
                out.push(best);
            }
        }
        WeylStrategy::Middle => out.extend((0..n).map(|k| pair(middle(k), k))),
        WeylStrategy::Greedy(s) => {
            let mut prev = 0usize;
            for k in 0..n {
                // a window of 2s + 1 candidates around the previous choice,
                // slid back inside [0, k] when it hits either end
                let width = 2 * s;
                let lo = prev.saturating_sub(s).min(k.saturating_sub(width));
                let hi = (lo + width).min(k);
                // the middle pair is always a candidate, so greedy never loses to it
                let mid = middle(k);
                let (mut best_i, mut best) = (mid, pair(mid, k));
                for i in lo..=hi {
                    let v = pair(i, k);
                    if v < best || (v == best && i < best_i) {
                        best = v;
                        best_i = i;
                    }
                }
                out.push(best);
                prev = best_i;
            }
        }
    }
    Ok(EigenSpectrum::new(out).expect("sums of finite values"))
}

/// `Σ_l log(μ̂_l + σ²)` for the pairwise-folded bound `μ̂` of the sum.
pub fn weyl_logdet<T: Real>(spectra: &[EigenSpectrum<T>], noise_var: T, strategy: WeylStrategy) -> Result<T> {
    let (first, rest) = spectra.split_first().ok_or_else(|| mismatch("no spectra to bound"))?;
    let mut acc = first.clone();
    for s in rest {
        acc = weyl_pairwise(&acc, s, strategy)?;
    }
    sum_logs(acc.values().iter().map(|&v| v + noise_var))
}

fn sum_logs<T: Real>(values: impl Iterator<Item = T>) -> Result<T> {
    let mut total = T::zero();
    for (l, v) in values.enumerate() {
        if !(v > T::zero()) {
            return Err(Error::NonPositive(l));
        }
        total += v.ln();
    }
    Ok(total)
}

/// `Σ_i log(α_i + β_{n−i+1} + σ²)`; only defined for two matrices.
pub fn fiedler_logdet<T: Real>(alpha: &EigenSpectrum<T>, beta: &EigenSpectrum<T>, noise_var: T) -> Result<T> {
    let n = alpha.len();
    if beta.len() != n {
        return Err(mismatch(format!("spectra of length {n} and {}", beta.len())));
    }
    let (a, b) = (alpha.values(), beta.values());
    sum_logs((0..n).map(|i| a[i] + b[n - 1 - i] + noise_var))
}

/// `log |Σ_i M_i + σ² I|` by Cholesky of the assembled sum.
pub fn exact_logdet_dense<T: Real>(matrices: &[DMatrix<T>], noise_var: T, cap: usize) -> Result<T> {
    let first = matrices.first().ok_or_else(|| mismatch("no matrices"))?;
    let n = first.nrows();
    if n > cap {
        return Err(Error::SizeCap { size: n, cap });
    }
    if matrices.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(mismatch("matrices must share one square shape"));
    }
    let mut sum = DMatrix::identity(n, n) * noise_var;
    for m in matrices {
        sum += m;
    }
    Ok(Cholesky::new(sum)?.log_det())
}

/// Bound spectra of every term of a Kronecker operator: eigenvalues of each
/// term's factors, multiplied through by its sorted squared scales.
///
/// Factors are jittered before their eigendecomposition, which can only
/// raise the bound.
pub fn term_spectra<T: Real>(op: &KronOperator<T>) -> Result<Vec<EigenSpectrum<T>>> {
    op.terms()
        .iter()
        .map(|t| {
            let mut factors = t.factors.clone();
            factors.iter_mut().for_each(add_factor_jitter);
            scaled_term_spectrum(&t.scale, &kron_eigvals(&factors))
        })
        .collect()
}

/// `n₁ × n₂` grid with `n₁` the largest divisor of `n` not above `√n`.
pub fn grid_shape(n: usize) -> (usize, usize) {
    let mut n1 = (n as f64).sqrt().floor() as usize;
    while n1 > 1 && n % n1 != 0 {
        n1 -= 1;
    }
    let n1 = n1.max(1);
    (n1, n / n1)
}

fn linspace(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![0.0];
    }
    (0..len).map(|i| i as f64 / (len - 1) as f64).collect()
}

/// Sum of `r` diagonally scaled RBF Kronecker terms on a 2-D unit grid of
/// `n` points, with scales from a softmax of random linear weights.
///
/// `random_kernels` draws length-scales in `[0.05, 0.5]` and variances in
/// `[0.2, 2]`; otherwise the fixed regimes `(0.1, 1.0)`, `(0.3, 0.5)`,
/// `(0.2, 0.75)`, … are used.
pub fn synthetic_operator<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    noise_var: f64,
    random_kernels: bool,
    rng: &mut R,
) -> Result<KronOperator<f64>> {
    let (n1, n2) = grid_shape(n);
    let axes = vec![linspace(n1), linspace(n2)];
    let coef = Normal::new(0.0, 3f64.sqrt()).expect("valid sd");
    let betas: Vec<[f64; 3]> =
        (0..r).map(|_| [coef.sample(rng), coef.sample(rng), coef.sample(rng)]).collect();
    let mut scales = vec![Vec::with_capacity(n); r];
    for &x0 in &axes[0] {
        for &x1 in &axes[1] {
            let w: Vec<f64> = betas.iter().map(|b| b[0] + b[1] * x0 + b[2] * x1).collect();
            for (i, s) in softmax(&w).into_iter().enumerate() {
                scales[i].push(s);
            }
        }
    }
    let fixed = [(0.1, 1.0), (0.3, 0.5), (0.2, 0.75)];
    let mut terms = Vec::with_capacity(r);
    for (i, scale) in scales.into_iter().enumerate() {
        let (ell, var) = if random_kernels {
            (rng.random_range(0.05..0.5), rng.random_range(0.2..2.0))
        } else {
            fixed[i % fixed.len()]
        };
        let spec = KernelSpec::Rbf(RbfParams { length_scales: vec![ell, ell], signal_var: var });
        terms.push(KronTerm { scale, factors: eval_factors(&spec, &axes)? });
    }
    KronOperator::new(terms, noise_var)
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub sizes: Vec<usize>,
    pub kernels: Vec<usize>,
    pub greedy_window: usize,
    pub noise_var: f64,
    pub seed: u64,
    /// Each timed call is repeated until this many seconds have elapsed.
    pub min_seconds: f64,
    pub dense_cap: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            sizes: vec![256, 512, 1024, 2048, 4096],
            kernels: vec![2, 3],
            greedy_window: 40,
            noise_var: 1e-2,
            seed: 0,
            min_seconds: 0.02,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub n: usize,
    pub kernels: usize,
    pub strategy: String,
    pub logdet_value: f64,
    pub exact_value: f64,
    pub ratio: f64,
    pub seconds: f64,
}

/// Mean wall time of `f` over enough repetitions to fill `min_seconds`.
fn time_it<V>(min_seconds: f64, mut f: impl FnMut() -> V) -> (V, f64) {
    let start = Instant::now();
    let mut value = f();
    let mut reps = 1u32;
    while start.elapsed().as_secs_f64() < min_seconds {
        value = f();
        reps += 1;
    }
    (value, start.elapsed().as_secs_f64() / f64::from(reps))
}

/// Ratio and timing of every bound against the dense log determinant.
///
/// Timings for the Weyl and Fiedler rows cover only the pairing and
/// summation, after the factor eigendecompositions.
pub fn benchmark_bounds(config: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for &r in &config.kernels {
        for &n in &config.sizes {
            if n > config.dense_cap {
                return Err(Error::SizeCap { size: n, cap: config.dense_cap });
            }
            let op = synthetic_operator(n, r, config.noise_var, false, &mut rng)?;
            let spectra = term_spectra(&op)?;
            let dense = op.to_dense();
            let (exact, exact_secs) = time_it(0.0, || Cholesky::new(dense.clone()).map(|c| c.log_det()));
            let exact = exact?;
            let mut push = |strategy: String, value: f64, seconds: f64| {
                rows.push(BenchmarkRow {
                    n,
                    kernels: r,
                    strategy,
                    logdet_value: value,
                    exact_value: exact,
                    ratio: value / exact,
                    seconds,
                })
            };
            push("dense".into(), exact, exact_secs);
            for strategy in
                [WeylStrategy::Exact, WeylStrategy::Middle, WeylStrategy::Greedy(config.greedy_window)]
            {
                let (v, secs) =
                    time_it(config.min_seconds, || weyl_logdet(&spectra, config.noise_var, strategy));
                push(format!("weyl-{strategy}"), v?, secs);
            }
            if r == 2 {
                let (v, secs) =
                    time_it(config.min_seconds, || fiedler_logdet(&spectra[0], &spectra[1], config.noise_var));
                push("fiedler".into(), v?, secs);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[f64]) -> EigenSpectrum<f64> {
        EigenSpectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn middle_on_diagonal_pair() {
        let b = weyl_pairwise(&spec(&[2.0, 1.0]), &spec(&[4.0, 3.0]), WeylStrategy::Middle).unwrap();
        assert_eq!(b.values(), &[6.0, 5.0]);
    }

    #[test]
    fn zero_partner_is_exact() {
        let a = spec(&[5.0, 3.0, 2.0, 0.5]);
        let z = spec(&[0.0; 4]);
        for s in [WeylStrategy::Exact, WeylStrategy::Greedy(1)] {
            assert_eq!(weyl_pairwise(&a, &z, s).unwrap(), a);
        }
        // the fixed middle pairing cannot reach the zero partner's tail
        let m = weyl_pairwise(&a, &z, WeylStrategy::Middle).unwrap();
        assert!(m.values().iter().zip(a.values()).all(|(x, y)| x >= y));
        let f = fiedler_logdet(&a, &z, 0.0).unwrap();
        let expected: f64 = a.values().iter().map(|v| v.ln()).sum();
        assert!((f - expected).abs() < 1e-14);
    }

    #[test]
    fn fiedler_on_diagonal_pair() {
        let f = fiedler_logdet(&spec(&[2.0, 1.0]), &spec(&[4.0, 3.0]), 0.0).unwrap();
        assert!((f - 25f64.ln()).abs() < 1e-14);
        let a = spec(&[3.0, 2.0, 1.0]);
        let f = fiedler_logdet(&a, &a, 0.0).unwrap();
        assert!((f - (4f64.ln() * 3.0)).abs() < 1e-14);
    }

    #[test]
    fn single_spectrum_with_noise() {
        let v = weyl_logdet(&[spec(&[2.0, 1.0])], 0.5, WeylStrategy::Middle).unwrap();
        assert!((v - (2.5f64.ln() + 1.5f64.ln())).abs() < 1e-14);
        assert!(matches!(
            weyl_logdet(&[spec(&[2.0, 0.0])], 0.0, WeylStrategy::Exact),
            Err(Error::NonPositive(1))
        ));
    }

    #[test]
    fn dense_reference_values() {
        let id = DMatrix::<f64>::identity(3, 3);
        let v = exact_logdet_dense(&[id.clone(), id.clone()], 0.0, 10).unwrap();
        assert!((v - 3.0 * 2f64.ln()).abs() < 1e-14);
        let z = DMatrix::<f64>::zeros(4, 4);
        let v = exact_logdet_dense(&[z], 0.3, 10).unwrap();
        assert!((v - 4.0 * 0.3f64.ln()).abs() < 1e-14);
        assert!(matches!(exact_logdet_dense(&[id], 0.0, 2), Err(Error::SizeCap { size: 3, cap: 2 })));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("exact".parse::<WeylStrategy>().unwrap(), WeylStrategy::Exact);
        assert_eq!("Middle".parse::<WeylStrategy>().unwrap(), WeylStrategy::Middle);
        assert_eq!("greedy:40".parse::<WeylStrategy>().unwrap(), WeylStrategy::Greedy(40));
        assert!("greedy:0".parse::<WeylStrategy>().is_err());
        assert!("fast".parse::<WeylStrategy>().is_err());
        assert_eq!(WeylStrategy::Greedy(7).to_string(), "greedy:7");
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(64), (8, 8));
        assert_eq!(grid_shape(1024), (32, 32));
        assert_eq!(grid_shape(2048), (32, 64));
        assert_eq!(grid_shape(13), (1, 13));
    }
}
