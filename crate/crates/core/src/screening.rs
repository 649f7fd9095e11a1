//! Marginal screening of covariates against the standardized censored
//! response `(X*, Δ*)`.
//!
//! Covariate indices are 0-based in the API; rank positions are 1-based
//! (position 1 is the strongest covariate).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{self, CenteredGram, KernelSpec};

/// Observed times, event indicators and an `n × p` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    status: Vec<bool>,
    covariates: Array2<f64>,
}

impl SurvivalDataset {
    pub fn new(times: Vec<f64>, status: Vec<bool>, covariates: Array2<f64>) -> Result<Self> {
        let n = times.len();
        if status.len() != n || covariates.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} times, {} status values, {} covariate rows",
                n,
                status.len(),
                covariates.nrows()
            )));
        }
        if n < 3 {
            return Err(Error::TooFewSamples { min: 3, got: n });
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Validation(format!(
                "time at row {} is {}, expected a finite non-negative value",
                i + 1,
                times[i]
            )));
        }
        if let Some(((i, j), v)) = covariates.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "covariate z{} at row {} is {}",
                j + 1,
                i + 1,
                v
            )));
        }
        Ok(SurvivalDataset {
            times,
            status,
            covariates,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn censoring_rate(&self) -> f64 {
        self.status.iter().filter(|s| !**s).count() as f64 / self.n() as f64
    }

    /// Returns the dataset with rows reordered so that row `i` is old row
    /// `order[i]`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        SurvivalDataset::new(
            order.iter().map(|&i| self.times[i]).collect(),
            order.iter().map(|&i| self.status[i]).collect(),
            self.covariates.select(Axis(0), order),
        )
    }

    /// Copy with every covariate column scaled to mean 0 and sample sd 1.
    /// Constant columns are only centered.
    pub fn with_standardized_covariates(&self) -> Self {
        let mut z = self.covariates.clone();
        for mut column in z.columns_mut() {
            let (mean, sd) = mean_sd(column.view());
            column.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { v - mean });
        }
        SurvivalDataset {
            times: self.times.clone(),
            status: self.status.clone(),
            covariates: z,
        }
    }
}

/// Sample mean and standard deviation (denominator `n - 1`).
fn mean_sd(v: ArrayView1<'_, f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// The `n × 2` response `(X*, Δ*)` and the moments used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedResponse {
    pub y: Array2<f64>,
    pub mu_x: f64,
    pub sd_x: f64,
    pub mu_d: f64,
    pub sd_d: f64,
}

pub fn standardize(times: &[f64], status: &[bool]) -> Result<StandardizedResponse> {
    let n = times.len();
    if status.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} times but {} status values",
            n,
            status.len()
        )));
    }
    if n < 3 {
        return Err(Error::TooFewSamples { min: 3, got: n });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite);
    }
    let delta: Vec<f64> = status.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
    let (mu_d, sd_d) = mean_sd(ArrayView1::from(&delta));
    if sd_d == 0.0 {
        return Err(Error::DegenerateStatus);
    }
    let (mu_x, sd_x) = mean_sd(ArrayView1::from(times));
    if sd_x == 0.0 || !sd_x.is_finite() {
        return Err(Error::DegenerateTimes);
    }
    let mut y = Array2::zeros((n, 2));
    for i in 0..n {
        y[[i, 0]] = (times[i] - mu_x) / sd_x;
        y[[i, 1]] = (delta[i] - mu_d) / sd_d;
    }
    Ok(StandardizedResponse {
        y,
        mu_x,
        sd_x,
        mu_d,
        sd_d,
    })
}

/// `floor(n / ln n)`, the conventional screening model size.
pub fn default_cutoff(n: usize) -> usize {
    let nf = n as f64;
    ((nf / nf.ln()).floor() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Hsic,
    Dc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Hsic => "hsic",
            Method::Dc => "dc",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hsic" => Ok(Method::Hsic),
            "dc" => Ok(Method::Dc),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    pub method: Method,
    /// Utility of each covariate, by covariate index.
    pub omega: Vec<f64>,
    /// Covariate indices ordered by decreasing utility.
    pub ranking: Vec<usize>,
    /// The first `d_n` entries of `ranking`.
    pub selected: Vec<usize>,
    pub d_n: usize,
    pub spec_z: KernelSpec,
    pub spec_y: KernelSpec,
}

impl ScreenResult {
    /// 1-based rank position of every covariate.
    pub fn rank_positions(&self) -> Vec<usize> {
        rank_positions(&self.ranking)
    }
}

/// Inverts a ranking into 1-based positions indexed by covariate.
pub fn rank_positions(ranking: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; ranking.len()];
    for (r, &k) in ranking.iter().enumerate() {
        pos[k] = r + 1;
    }
    pos
}

/// Orders covariates by decreasing utility, ties by ascending index.
pub fn rank_utilities(omega: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..omega.len()).collect();
    idx.sort_by(|&a, &b| omega[b].total_cmp(&omega[a]).then(a.cmp(&b)));
    idx
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

fn resolve_cutoff(d_n: Option<usize>, n: usize, p: usize) -> Result<usize> {
    let d = d_n.unwrap_or_else(|| default_cutoff(n).min(p));
    if d == 0 || d > p {
        return Err(Error::BadCutoff { d_n: d, p });
    }
    Ok(d)
}

fn finish(
    method: Method,
    omega: Vec<f64>,
    d_n: usize,
    spec_z: KernelSpec,
    spec_y: KernelSpec,
) -> ScreenResult {
    let ranking = rank_utilities(&omega);
    let selected = ranking[..d_n].to_vec();
    ScreenResult {
        method,
        omega,
        ranking,
        selected,
        d_n,
        spec_z,
        spec_y,
    }
}

/// Centered response Gram shared by every covariate.
pub fn response_gram(data: &SurvivalDataset, spec_y: &KernelSpec) -> Result<CenteredGram> {
    let resp = standardize(data.times(), data.status())?;
    Ok(kernel::center(&kernel::gram(resp.y.view(), spec_y)?))
}

/// HSIC utilities `ω_k = HSIC(Z_k, Ŷ)` for every covariate, computed in
/// parallel on the current rayon pool. Output order is fixed by covariate
/// index, so results do not depend on the thread count.
pub fn hsic_utilities(
    data: &SurvivalDataset,
    spec_z: &KernelSpec,
    spec_y: &KernelSpec,
) -> Result<Vec<f64>> {
    spec_z.validate()?;
    let lc = response_gram(data, spec_y)?;
    let z = data.covariates();
    (0..data.p())
        .into_par_iter()
        .map(|k| {
            let column = z.column(k).to_vec();
            if is_constant(&column) {
                return Ok(0.0);
            }
            kernel::hsic_scalar_raw(&column, spec_z, &lc).map(|v| v.max(0.0))
        })
        .collect()
}

/// Ranks all covariates by HSIC utility and keeps the top `d_n`
/// (`floor(n / ln n)` when `None`).
pub fn screen(
    data: &SurvivalDataset,
    spec_z: &KernelSpec,
    spec_y: &KernelSpec,
    d_n: Option<usize>,
) -> Result<ScreenResult> {
    if data.p() == 0 {
        return Err(Error::EmptyCovariates);
    }
    let d_n = resolve_cutoff(d_n, data.n(), data.p())?;
    let omega = hsic_utilities(data, spec_z, spec_y)?;
    Ok(finish(Method::Hsic, omega, d_n, *spec_z, *spec_y))
}

/// Same ranking procedure driven by distance correlation utilities.
pub fn screen_dc(data: &SurvivalDataset, d_n: Option<usize>) -> Result<ScreenResult> {
    if data.p() == 0 {
        return Err(Error::EmptyCovariates);
    }
    let d_n = resolve_cutoff(d_n, data.n(), data.p())?;
    let omega = dc_utility(data)?;
    Ok(finish(
        Method::Dc,
        omega,
        d_n,
        KernelSpec::default(),
        KernelSpec::default(),
    ))
}

/// Dispatches on `method`.
pub fn screen_with(
    method: Method,
    data: &SurvivalDataset,
    spec_z: &KernelSpec,
    spec_y: &KernelSpec,
    d_n: Option<usize>,
) -> Result<ScreenResult> {
    match method {
        Method::Hsic => screen(data, spec_z, spec_y, d_n),
        Method::Dc => screen_dc(data, d_n),
    }
}

/// Double-centered pairwise distance matrix.
fn centered_distances<F: Fn(usize, usize) -> f64>(n: usize, dist: F) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(i, j);
            a[[i, j]] = d;
            a[[j, i]] = d;
        }
    }
    let nf = n as f64;
    let row_means = a.sum_axis(Axis(1)) / nf;
    let grand = row_means.sum() / nf;
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] += grand - row_means[i] - row_means[j];
        }
    }
    a
}

fn frob(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Empirical distance correlation of each covariate with `(X*, Δ*)`.
pub fn dc_utility(data: &SurvivalDataset) -> Result<Vec<f64>> {
    if data.p() == 0 {
        return Err(Error::EmptyCovariates);
    }
    let resp = standardize(data.times(), data.status())?;
    let n = data.n();
    let y = &resp.y;
    let b = centered_distances(n, |i, j| {
        let dx = y[[i, 0]] - y[[j, 0]];
        let dd = y[[i, 1]] - y[[j, 1]];
        (dx * dx + dd * dd).sqrt()
    });
    let var_y = frob(&b, &b);
    let z = data.covariates();
    (0..data.p())
        .into_par_iter()
        .map(|k| {
            let column = z.column(k).to_vec();
            if is_constant(&column) || var_y <= 0.0 {
                return Ok(0.0);
            }
            let a = centered_distances(n, |i, j| (column[i] - column[j]).abs());
            let var_z = frob(&a, &a);
            let cov = frob(&a, &b).max(0.0);
            if var_z <= 0.0 {
                return Ok(0.0);
            }
            Ok((cov / (var_z * var_y).sqrt()).sqrt().min(1.0))
        })
        .collect()
}
