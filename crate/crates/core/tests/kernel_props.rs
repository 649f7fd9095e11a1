mod common;

use common::{brute_force_hsic, empirical_quantile, normal_matrix};
use hsic_sis::kernel::{center, gram, hsic, hsic_pair, hsic_raw, hsic_scalar_raw, KernelSpec};
use hsic_sis::rng;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn matrix(n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(-3.0f64..3.0, n * d)
        .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
}

fn paired(max_n: usize) -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (2..=max_n).prop_flat_map(|n| (matrix(n, 1), matrix(n, 2)))
}

proptest! {
    #[test]
    fn frobenius_form_matches_dense_trace((u, v) in paired(10)) {
        let spec = KernelSpec::gaussian(2.0);
        let k = gram(u.view(), &spec).unwrap();
        let lc = center(&gram(v.view(), &spec).unwrap());
        let fast = hsic_raw(&k, &lc).unwrap();
        let oracle = brute_force_hsic(&u, &v, 2.0, 2.0);
        prop_assert!((fast - oracle).abs() < 1e-12, "{fast} vs {oracle}");
        let fused = hsic_scalar_raw(u.column(0).as_slice_memory_order().unwrap(), &spec, &lc).unwrap();
        prop_assert!((fused - oracle).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments((u, v) in paired(12)) {
        let spec = KernelSpec::default();
        let a = hsic_pair(u.view(), v.view(), &spec, &spec).unwrap();
        let b = hsic_pair(v.view(), u.view(), &spec, &spec).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn raw_value_nonnegative((u, v) in paired(12)) {
        for spec in [KernelSpec::gaussian(2.0), KernelSpec::laplacian(1.0)] {
            let k = gram(u.view(), &spec).unwrap();
            let lc = center(&gram(v.view(), &spec).unwrap());
            prop_assert!(hsic_raw(&k, &lc).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn joint_permutation_invariance((u, v) in paired(12), seed in any::<u64>()) {
        let spec = KernelSpec::default();
        let mut order: Vec<usize> = (0..u.nrows()).collect();
        order.shuffle(&mut rng::stream(seed, 0));
        let up = u.select(Axis(0), &order);
        let vp = v.select(Axis(0), &order);
        let a = hsic_pair(u.view(), v.view(), &spec, &spec).unwrap();
        let b = hsic_pair(up.view(), vp.view(), &spec, &spec).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn constant_response_gives_exact_zero(u in matrix(7, 1), c in -5.0f64..5.0) {
        let v = Array2::from_elem((7, 2), c);
        for spec in [KernelSpec::gaussian(2.0), KernelSpec::linear(), KernelSpec::laplacian(0.5)] {
            prop_assert_eq!(hsic_pair(u.view(), v.view(), &spec, &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn centered_rows_and_columns_sum_to_zero(v in matrix(9, 2)) {
        let lc = center(&gram(v.view(), &KernelSpec::default()).unwrap());
        for s in lc.values().sum_axis(Axis(0)).iter().chain(lc.values().sum_axis(Axis(1)).iter()) {
            prop_assert!(s.abs() < 1e-10);
        }
        let again = lc.recenter();
        for (a, b) in again.values().iter().zip(lc.values().iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_invariants(v in (2usize..30).prop_flat_map(|n| matrix(n, 3))) {
        for spec in [KernelSpec::gaussian(2.0), KernelSpec::laplacian(1.5)] {
            let g = gram(v.view(), &spec).unwrap();
            let m = g.values();
            let n = m.nrows();
            for i in 0..n {
                prop_assert_eq!(m[[i, i]], 1.0);
                for j in 0..n {
                    prop_assert_eq!(m[[i, j]], m[[j, i]]);
                    prop_assert!(m[[i, j]] > 0.0 && m[[i, j]] <= 1.0);
                }
            }
        }
    }
}

#[test]
fn gram_is_positive_semidefinite() {
    let mut r = rng::stream(42, 0);
    for n in [2usize, 5, 17, 50] {
        for d in [1usize, 2, 4] {
            let pts = normal_matrix(&mut r, n, d);
            for spec in [KernelSpec::gaussian(2.0), KernelSpec::laplacian(1.0)] {
                let g = gram(pts.view(), &spec).unwrap();
                let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g.values()[[i, j]]);
                let min = m.symmetric_eigenvalues().min();
                assert!(min >= -1e-9, "n={n} d={d} {spec}: min eigenvalue {min}");
            }
        }
    }
}

#[test]
fn self_dependence_is_positive() {
    let mut r = rng::stream(5, 0);
    let u = normal_matrix(&mut r, 30, 1);
    let spec = KernelSpec::default();
    assert!(hsic_pair(u.view(), u.view(), &spec, &spec).unwrap() > 1e-3);
}

#[test]
fn three_point_case_against_dense_products() {
    let u = Array2::from_shape_vec((3, 1), vec![0.3, -1.2, 2.0]).unwrap();
    let v = Array2::from_shape_vec((3, 1), vec![1.1, 0.4, -0.6]).unwrap();
    let spec = KernelSpec::gaussian(2.0);
    let k = gram(u.view(), &spec).unwrap();
    let lc = center(&gram(v.view(), &spec).unwrap());
    let oracle = brute_force_hsic(&u, &v, 2.0, 2.0);
    assert!((hsic(&k, &lc).unwrap() - oracle).abs() < 1e-12);
}

/// Independent samples: the statistic behaves like a draw from its own
/// permutation null.
#[test]
fn independent_samples_sit_inside_permutation_null() {
    let spec = KernelSpec::default();
    let n = 200;
    let draws = 40;
    let perms = 500;
    let mut below = 0;
    for draw in 0..draws {
        let mut r = rng::stream(1000 + draw, 0);
        let u = normal_matrix(&mut r, n, 1);
        let v = normal_matrix(&mut r, n, 1);
        let k = gram(u.view(), &spec).unwrap();
        let lv = gram(v.view(), &spec).unwrap();
        let lc = center(&lv);
        let stat = hsic(&k, &lc).unwrap();
        let uc = u.column(0).to_vec();
        let mut null = Vec::with_capacity(perms);
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..perms {
            order.shuffle(&mut r);
            // permuting u is equivalent to permuting v
            let permuted: Vec<f64> = order.iter().map(|&i| uc[i]).collect();
            null.push(hsic_scalar_raw(&permuted, &spec, &lc).unwrap().max(0.0));
        }
        let q99 = empirical_quantile(&null, 0.99);
        let med = empirical_quantile(&null, 0.5);
        assert!(med >= 0.0 && med <= q99);
        if stat < q99 {
            below += 1;
        }
    }
    assert!(below as f64 >= 0.95 * draws as f64, "{below}/{draws} below the 99th percentile");
}
