//! Kronecker-structured linear algebra.
//!
//! Grid vectors are stored with axis 0 varying slowest, so `v[i₀ n₁…n_D + … + i_D]`
//! and `(F₁ ⊗ … ⊗ F_D) v` is the usual Kronecker product.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{mismatch, Error, Result};
use crate::scalar::{dot, Real};

fn check_factors<T: Real>(factors: &[DMatrix<T>], len: usize) -> Result<()> {
    if factors.is_empty() {
        return Err(mismatch("no Kronecker factors"));
    }
    if let Some(f) = factors.iter().find(|f| !f.is_square()) {
        return Err(mismatch(format!("non-square factor {}×{}", f.nrows(), f.ncols())));
    }
    let n: usize = factors.iter().map(|f| f.nrows()).product();
    if n != len {
        return Err(mismatch(format!("factors span {n} entries, vector has {len}")));
    }
    Ok(())
}

/// `(F₁ ⊗ … ⊗ F_D) v` in `O(n Σ n_d)`.
pub fn kron_matvec<T: Real>(factors: &[DMatrix<T>], v: &[T]) -> Result<Vec<T>> {
    check_factors(factors, v.len())?;
    let n = v.len();
    let mut cur = v.to_vec();
    let mut next = vec![T::zero(); n];
    let mut post = n;
    for f in factors {
        let nd = f.nrows();
        post /= nd;
        let block = nd * post;
        // each block, read column-major as post × n_d, is M with M[q, i] = v[i, q];
        // the axis product is then M Fᵀ
        for (src, dst) in cur.chunks_exact(block).zip(next.chunks_exact_mut(block)) {
            let m = DMatrixView::from_slice(src, post, nd);
            let mut out = DMatrixViewMut::from_slice(dst, post, nd);
            out.gemm(T::one(), &m, &f.transpose(), T::zero());
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `⊗_d v_d` for vectors.
pub fn kron_vec<T: Real>(vectors: &[Vec<T>]) -> Vec<T> {
    let mut out = vec![T::one()];
    for v in vectors {
        let mut next = Vec::with_capacity(out.len() * v.len());
        for &a in &out {
            next.extend(v.iter().map(|&b| a * b));
        }
        out = next;
    }
    out
}

/// Diagonal of `F₁ ⊗ … ⊗ F_D`.
pub fn kron_diag<T: Real>(factors: &[DMatrix<T>]) -> Vec<T> {
    let diags: Vec<Vec<T>> = factors.iter().map(|f| f.diagonal().iter().copied().collect()).collect();
    kron_vec(&diags)
}

/// Splits a flat grid index into per-axis indices (axis 0 slowest).
pub fn unravel(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; sizes.len()];
    for d in (0..sizes.len()).rev() {
        idx[d] = flat % sizes[d];
        flat /= sizes[d];
    }
    idx
}

/// Row `flat` of `F₁ ⊗ … ⊗ F_D`.
pub fn kron_row<T: Real>(factors: &[DMatrix<T>], flat: usize) -> Vec<T> {
    let sizes: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let idx = unravel(flat, &sizes);
    let rows: Vec<Vec<T>> = factors.iter().zip(&idx).map(|(f, &i)| f.row(i).iter().copied().collect()).collect();
    kron_vec(&rows)
}

/// Dense `F₁ ⊗ … ⊗ F_D`.
pub fn kron_dense<T: Real>(factors: &[DMatrix<T>]) -> DMatrix<T> {
    factors.iter().skip(1).fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// One regime's contribution `S K Sᵀ` with `S = diag(scale)` and `K = ⊗_d F_d`.
#[derive(Clone, Debug)]
pub struct KronTerm<T: Real> {
    pub scale: Vec<T>,
    pub factors: Vec<DMatrix<T>>,
}

/// `Σ_i S_i K_i S_i + σ² I`.
#[derive(Clone, Debug)]
pub struct KronOperator<T: Real> {
    terms: Vec<KronTerm<T>>,
    noise_var: T,
    n: usize,
}

impl<T: Real> KronOperator<T> {
    /// Scale entries must lie in `[0, 1]` (softmax weights can underflow
    /// to exactly zero far from a regime).
    pub fn new(terms: Vec<KronTerm<T>>, noise_var: T) -> Result<Self> {
        let first = terms.first().ok_or_else(|| mismatch("operator needs at least one term"))?;
        let n = first.scale.len();
        for t in &terms {
            check_factors(&t.factors, n)?;
            if t.scale.len() != n {
                return Err(mismatch(format!("scale length {} differs from {n}", t.scale.len())));
            }
            if t.scale.iter().any(|&s| !(s >= T::zero() && s <= T::one())) {
                return Err(Error::InvalidParameter("scale entries must lie in [0, 1]".into()));
            }
        }
        if !(noise_var >= T::zero()) {
            return Err(Error::InvalidParameter("noise variance must be non-negative".into()));
        }
        Ok(Self { terms, noise_var, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[KronTerm<T>] {
        &self.terms
    }

    pub fn noise_var(&self) -> T {
        self.noise_var
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.n {
            return Err(mismatch(format!("operator of size {} applied to vector of {}", self.n, v.len())));
        }
        let mut out: Vec<T> = v.iter().map(|&x| x * self.noise_var).collect();
        let mut scaled = vec![T::zero(); self.n];
        for t in &self.terms {
            for ((s, &x), &w) in scaled.iter_mut().zip(v).zip(&t.scale) {
                *s = x * w;
            }
            let kv = kron_matvec(&t.factors, &scaled)?;
            for ((o, k), &w) in out.iter_mut().zip(kv).zip(&t.scale) {
                *o += w * k;
            }
        }
        Ok(out)
    }

    /// `Σ_i s_i² diag(K_i) + σ²`.
    pub fn diagonal(&self) -> Vec<T> {
        let mut out = vec![self.noise_var; self.n];
        for t in &self.terms {
            for ((o, k), &s) in out.iter_mut().zip(kron_diag(&t.factors)).zip(&t.scale) {
                *o += s * s * k;
            }
        }
        out
    }

    /// Row `flat` of the noise-free operator.
    pub fn signal_row(&self, flat: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for t in &self.terms {
            let row = kron_row(&t.factors, flat);
            let si = t.scale[flat];
            for ((o, k), &s) in out.iter_mut().zip(row).zip(&t.scale) {
                *o += si * k * s;
            }
        }
        out
    }

    /// Dense assembly; intended for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<T> {
        let mut out = DMatrix::identity(self.n, self.n) * self.noise_var;
        for t in &self.terms {
            let k = kron_dense(&t.factors);
            out += DMatrix::from_fn(self.n, self.n, |i, j| t.scale[i] * k[(i, j)] * t.scale[j]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgConfig {
    /// Relative residual target `‖Ax − b‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 1000 }
    }
}

#[derive(Clone, Debug)]
pub struct CgSolution<T: Real> {
    /// Best iterate found (smallest residual).
    pub x: Vec<T>,
    pub iterations: usize,
    pub rel_residual: T,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn cg_solve<T: Real>(op: &KronOperator<T>, rhs: &[T], config: &CgConfig) -> Result<CgSolution<T>> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(mismatch(format!("rhs of length {} for operator of size {n}", rhs.len())));
    }
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == T::zero() {
        return Ok(CgSolution { x: vec![T::zero(); n], iterations: 0, rel_residual: T::zero(), converged: true });
    }
    let tol = T::lit(config.tol);
    let inv_diag: Vec<T> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let mut x = vec![T::zero(); n];
    let mut r = rhs.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&a, &b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut best = (T::one(), x.clone());
    for it in 1..=config.max_iter {
        let ap = op.matvec(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            // loss of positive definiteness (or exact breakdown)
            return Ok(CgSolution { x: best.1, iterations: it, rel_residual: best.0, converged: false });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / b_norm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= tol {
            return Ok(CgSolution { x, iterations: it, rel_residual: rel, converged: true });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(CgSolution { x: best.1, iterations: config.max_iter, rel_residual: best.0, converged: false })
}

/// Descending-sorted, finite eigenvalue list.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSpectrum<T: Real>(Vec<T>);

impl<T: Real> EigenSpectrum<T> {
    /// Sorts into descending order; rejects non-finite values.
    pub fn new(mut values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite eigenvalue".into()));
        }
        values.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        Ok(Self(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

/// Eigenvalues of a symmetric matrix, clamped at zero from below.
pub fn sym_eigvals<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    m.clone().symmetric_eigenvalues().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

/// All products of factor eigenvalues, sorted descending.
pub fn kron_eigvals<T: Real>(factors: &[DMatrix<T>]) -> EigenSpectrum<T> {
    let per: Vec<Vec<T>> = factors.iter().map(sym_eigvals).collect();
    EigenSpectrum::new(kron_vec(&per)).expect("eigenvalues of finite symmetric factors are finite")
}

/// Bound spectrum of `S K S` from sorted products `s_(l)² k_(l)`.
pub fn scaled_term_spectrum<T: Real>(s: &[T], kern: &EigenSpectrum<T>) -> Result<EigenSpectrum<T>> {
    if s.len() != kern.len() {
        return Err(mismatch(format!("{} scales for a spectrum of {}", s.len(), kern.len())));
    }
    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scale"));
    EigenSpectrum::new(sorted.iter().zip(kern.values()).map(|(&a, &k)| a * a * k).collect())
}
