use changesurface::grid::GridDataset;
use changesurface::kernels::{eval_dense, eval_factors, KernelSpec, RbfParams};
use changesurface::kron::{cg_solve, kron_eigvals, kron_matvec, CgConfig, KronOperator, KronTerm};
use changesurface::model::{build_operator, composite_dense, ChangeSurfaceModel};
use changesurface::warp::{ChangeSurface, PolyWeight, WeightFunction};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.01
}

/// Kronecker product by explicit index arithmetic, axis 0 slowest.
fn kron_by_index(factors: &[DMatrix<f64>]) -> DMatrix<f64> {
    let sizes: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let n: usize = sizes.iter().product();
    let digits = |mut flat: usize| {
        let mut out = vec![0; sizes.len()];
        for d in (0..sizes.len()).rev() {
            out[d] = flat % sizes[d];
            flat /= sizes[d];
        }
        out
    };
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (digits(i), digits(j));
        factors.iter().enumerate().map(|(d, f)| f[(a[d], b[d])]).product()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matvec_matches_dense_product(seed in 0u64..10_000, shape in proptest::collection::vec(1usize..5, 1..4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors: Vec<DMatrix<f64>> = shape.iter().map(|&l| random_psd(&mut rng, l)).collect();
        let n: usize = shape.iter().product();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = kron_matvec(&factors, &v).unwrap();
        let want = kron_by_index(&factors) * DVector::from_column_slice(&v);
        for (a, b) in got.iter().zip(want.iter()) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn eigenvalues_match_dense(seed in 0u64..10_000, shape in proptest::collection::vec(1usize..5, 1..4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors: Vec<DMatrix<f64>> = shape.iter().map(|&l| random_psd(&mut rng, l)).collect();
        let got = kron_eigvals(&factors);
        let mut want: Vec<f64> = kron_by_index(&factors).symmetric_eigen().eigenvalues.iter().copied().collect();
        want.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(got.len(), want.len());
        for (a, b) in got.values().iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-9 * want[0].max(1.0));
        }
    }

    #[test]
    fn operator_is_symmetric(seed in 0u64..10_000, r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [3usize, 4];
        let n = 12;
        let terms = (0..r)
            .map(|_| KronTerm {
                scale: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
                factors: shape.iter().map(|&l| random_psd(&mut rng, l)).collect(),
            })
            .collect();
        let op = KronOperator::new(terms, 0.1).unwrap();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uav: f64 = u.iter().zip(op.matvec(&v).unwrap()).map(|(a, b)| a * b).sum();
        let vau: f64 = v.iter().zip(op.matvec(&u).unwrap()).map(|(a, b)| a * b).sum();
        prop_assert!((uav - vau).abs() < 1e-12 * (1.0 + uav.abs()));
    }
}

fn two_regime_model() -> (GridDataset<f64>, ChangeSurfaceModel<f64>) {
    let axes = vec![(0..6).map(|i| i as f64 / 5.0).collect(), (0..6).map(|i| 1.0 + i as f64 / 2.5).collect()];
    let grid = GridDataset::new(axes, (0..36).map(|i| (i as f64 * 0.7).sin()).collect(), vec![]).unwrap();
    let surface = ChangeSurface::new(vec![
        WeightFunction::Poly(PolyWeight { coeffs: vec![vec![-1.0, 0.3], vec![2.0, -0.4]] }),
        WeightFunction::Zero,
    ])
    .unwrap();
    let kernels = vec![
        KernelSpec::Rbf(RbfParams { length_scales: vec![0.2, 0.9], signal_var: 1.3 }),
        KernelSpec::Rbf(RbfParams { length_scales: vec![0.6, 0.4], signal_var: 0.5 }),
    ];
    (grid, ChangeSurfaceModel::new(surface, kernels, 0.07).unwrap())
}

#[test]
fn structured_operator_matches_composite_assembly() {
    let (grid, model) = two_regime_model();
    let op = build_operator(&model, &grid).unwrap();
    let mut dense = composite_dense(&model, &grid.observations(), 100).unwrap();
    for i in 0..36 {
        dense[(i, i)] += model.noise_var;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let v: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = &dense * DVector::from_column_slice(&v);
        for (a, b) in op.matvec(&v).unwrap().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
    // constant weights → every scale entry is 0.5
    let flat = ChangeSurface::new(vec![WeightFunction::Zero, WeightFunction::Zero]).unwrap();
    let half = ChangeSurfaceModel::new(flat, model.kernels.clone(), 0.07).unwrap();
    for t in build_operator(&half, &grid).unwrap().terms() {
        assert!(t.scale.iter().all(|&s| s == 0.5));
    }
}

#[test]
fn cg_matches_dense_solve() {
    let (grid, model) = two_regime_model();
    let op = build_operator(&model, &grid).unwrap();
    let dense = op.to_dense();
    let rhs: Vec<f64> = (0..36).map(|i| (i as f64).cos()).collect();
    let want = dense.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&rhs));
    let sol = cg_solve(&op, &rhs, &CgConfig { tol: 1e-12, max_iter: 500 }).unwrap();
    assert!(sol.converged);
    for (a, b) in sol.x.iter().zip(want.iter()) {
        assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
    }
    // an iteration cap too small for convergence still returns the best iterate
    let short = cg_solve(&op, &rhs, &CgConfig { tol: 1e-14, max_iter: 2 }).unwrap();
    assert!(!short.converged);
    assert!(short.rel_residual.is_finite() && short.rel_residual < 1.0);
}

#[test]
fn dense_grid_kernel_oracle() {
    // the grid factors against pointwise evaluation of one regime
    let (grid, model) = two_regime_model();
    let factors = eval_factors(&model.kernels[0], grid.axes()).unwrap();
    let points = grid.points();
    let dense = eval_dense(&model.kernels[0], &points, &points).unwrap();
    assert!((kron_by_index(&factors) - dense).abs().max() < 1e-12);
}
