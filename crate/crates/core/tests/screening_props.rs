mod common;

use common::{empirical_quantile, normal_matrix};
use hsic_sis::evaluate::min_model_size;
use hsic_sis::kernel::KernelSpec;
use hsic_sis::rng;
use hsic_sis::screening::{
    dc_utility, hsic_utilities, rank_utilities, screen, standardize, SurvivalDataset,
};
use hsic_sis::simgen::{calibrated_scale, generate_replication, CensoringCase, Model, SimScenario};
use ndarray::{concatenate, Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_dataset(seed: u64, n: usize, p: usize) -> SurvivalDataset {
    let mut r = rng::stream(seed, 0);
    let z = normal_matrix(&mut r, n, p);
    let times: Vec<f64> = (0..n).map(|_| r.random_range(0.1..5.0)).collect();
    let mut status: Vec<bool> = (0..n).map(|_| r.random_bool(0.7)).collect();
    status[0] = true;
    status[1] = false;
    SurvivalDataset::new(times, status, z).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn standardized_columns_have_unit_moments(
        times in proptest::collection::vec(0.0f64..100.0, 3..40),
        seed in any::<u64>(),
    ) {
        let n = times.len();
        prop_assume!(times.iter().any(|t| *t != times[0]));
        let mut r = rng::stream(seed, 0);
        let mut status: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        status[0] = true;
        status[1] = false;
        let s = standardize(&times, &status).unwrap();
        for col in s.y.columns() {
            let m = col.sum() / n as f64;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            prop_assert!(m.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn joint_row_permutation_leaves_utilities_unchanged(seed in any::<u64>()) {
        let d = random_dataset(seed, 25, 6);
        let mut order: Vec<usize> = (0..25).collect();
        order.shuffle(&mut rng::stream(seed, 1));
        let dp = d.permute_rows(&order).unwrap();
        let spec = KernelSpec::default();
        let a = hsic_utilities(&d, &spec, &spec).unwrap();
        let b = hsic_utilities(&dp, &spec, &spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let a = dc_utility(&d).unwrap();
        let b = dc_utility(&dp).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ranking_invariant_to_positive_scaling(
        omega in proptest::collection::vec(0.0f64..1.0, 1..60),
        c in 1e-3f64..1e3,
    ) {
        let scaled: Vec<f64> = omega.iter().map(|w| w * c).collect();
        let r = rank_utilities(&omega);
        prop_assert_eq!(&r, &rank_utilities(&scaled));
        for w in r.windows(2) {
            prop_assert!(omega[w[0]] >= omega[w[1]]);
        }
    }

    #[test]
    fn model_size_matches_prefix_scan(
        p in 1usize..100,
        seed in any::<u64>(),
        frac in 0.0f64..1.0,
    ) {
        let mut r = rng::stream(seed, 0);
        let mut ranking: Vec<usize> = (0..p).collect();
        ranking.shuffle(&mut r);
        let m = ((frac * p as f64) as usize).clamp(1, p);
        let mut active: Vec<usize> = (0..p).collect();
        active.shuffle(&mut r);
        active.truncate(m);
        let brute = (1..=p)
            .find(|&len| active.iter().all(|k| ranking[..len].contains(k)))
            .unwrap();
        prop_assert_eq!(min_model_size(&ranking, &active).unwrap(), brute);
    }
}

#[test]
fn screening_is_deterministic_across_thread_counts() {
    let d = random_dataset(3, 60, 300);
    let spec = KernelSpec::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| screen(&d, &spec, &spec, None).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert!(a.omega.iter().zip(&b.omega).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(a, run(1));
}

#[test]
fn dc_recovers_a_copy_of_the_time() {
    let n = 200;
    let mut r = rng::stream(8, 0);
    let times: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
    // one censored subject keeps Δ* almost constant
    let mut status = vec![true; n];
    status[0] = false;
    let y = standardize(&times, &status).unwrap();
    let z = y.y.column(0).to_owned().insert_axis(Axis(1));
    let d = SurvivalDataset::new(times, status, z).unwrap();
    let v = dc_utility(&d).unwrap()[0];
    // The binary column caps the value below 1 (about 0.99 here, 0.96 when
    // half the subjects are censored).
    assert!(v >= 0.98, "{v}");
}

#[test]
fn dc_null_sits_inside_permutation_null() {
    let n = 100;
    let draws = 40;
    let mut below = 0;
    for draw in 0..draws {
        let d = random_dataset(500 + draw, n, 1);
        let stat = dc_utility(&d).unwrap()[0];
        let mut r = rng::stream(900 + draw, 0);
        let base = d.covariates().column(0).to_vec();
        let null: Vec<f64> = (0..200)
            .map(|_| {
                let mut z = base.clone();
                z.shuffle(&mut r);
                let z = Array2::from_shape_vec((n, 1), z).unwrap();
                let dp = SurvivalDataset::new(d.times().to_vec(), d.status().to_vec(), z).unwrap();
                dc_utility(&dp).unwrap()[0]
            })
            .collect();
        if stat < empirical_quantile(&null, 0.99) {
            below += 1;
        }
    }
    assert!(below as f64 >= 0.95 * draws as f64, "{below}/{draws}");
}

#[test]
fn constant_covariate_ranks_behind_informative_ones() {
    let d = random_dataset(12, 40, 4);
    let z = concatenate(Axis(1), &[d.covariates(), Array2::from_elem((40, 1), 3.0).view()]).unwrap();
    let d = SurvivalDataset::new(d.times().to_vec(), d.status().to_vec(), z).unwrap();
    let spec = KernelSpec::default();
    let r = screen(&d, &spec, &spec, Some(2)).unwrap();
    assert_eq!(r.omega[4], 0.0);
    assert_eq!(*r.ranking.last().unwrap(), 4);
}

/// Active covariates dominate the bulk of inactive ones in every replication.
#[test]
fn example1_signal_dominance() {
    let sc = SimScenario::new(Model::CoxPh, 2000, CensoringCase::RandomUniform, 0.2, 2024);
    let scale = calibrated_scale(&sc).unwrap();
    let spec = KernelSpec::default();
    for rep in 0..50 {
        let g = generate_replication(&sc, scale, rep).unwrap();
        let omega = hsic_utilities(&g.dataset, &spec, &spec).unwrap();
        let min_active = g.active_set.iter().map(|&k| omega[k]).fold(f64::INFINITY, f64::min);
        let mut inactive: Vec<f64> = (5..sc.p).map(|k| omega[k]).collect();
        inactive.sort_by(f64::total_cmp);
        let median = inactive[inactive.len() / 2];
        assert!(min_active > median, "rep {rep}: {min_active} <= {median}");
    }
}
