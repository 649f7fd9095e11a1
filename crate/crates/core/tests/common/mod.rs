#![allow(dead_code)]

//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's HSIC or sampling code paths.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `(n-1)^-2 tr(K H L H)` by explicit dense products.
pub fn brute_force_hsic(u: &Array2<f64>, v: &Array2<f64>, gamma_u: f64, gamma_v: f64) -> f64 {
    let n = u.nrows();
    let kern = |m: &Array2<f64>, i: usize, j: usize, g: f64| {
        let sq: f64 = m
            .row(i)
            .iter()
            .zip(m.row(j).iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        (-sq / (2.0 * g * g)).exp()
    };
    let k = Array2::from_shape_fn((n, n), |(i, j)| kern(u, i, j, gamma_u));
    let l = Array2::from_shape_fn((n, n), |(i, j)| kern(v, i, j, gamma_v));
    let h = Array2::from_shape_fn((n, n), |(i, j)| {
        (if i == j { 1.0 } else { 0.0 }) - 1.0 / n as f64
    });
    let khlh = k.dot(&h).dot(&l).dot(&h);
    let tr: f64 = (0..n).map(|i| khlh[[i, i]]).sum();
    tr / ((n - 1) as f64).powi(2)
}

pub fn normal_matrix<R: Rng>(rng: &mut R, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| StandardNormal.sample(rng))
}

/// Kolmogorov distribution survival function `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS p-value against a continuous CDF (Stephens' correction).
pub fn ks_pvalue(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub fn mean_sd(a: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let m = a.iter().sum::<f64>() / n;
    let v = a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Empirical quantile by nearest rank on a copy.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}
