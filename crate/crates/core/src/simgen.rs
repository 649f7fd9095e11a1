//! Synthetic right-censored survival data.
//!
//! Covariates are `N_p(0, Σ)` with `Σ_ij = ρ^|i-j|`, drawn row by row with
//! the AR(1) recursion. Event times come from one of three models and are
//! censored by `C ~ Unif(0, τ)` (random) or `C ~ Unif(0, c·|Z1 - Z2|)`
//! (informative). The scale `τ` or `c` is calibrated by Monte Carlo
//! bisection to hit a target censoring rate.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{OnceLock, RwLock};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;
use crate::screening::SurvivalDataset;

/// Monte Carlo sample size used to calibrate censoring scales.
pub const DEFAULT_CALIBRATION_SAMPLES: usize = 100_000;

/// Accepted distance between the calibrated and target censoring rate.
pub const CALIBRATION_TOLERANCE: f64 = 0.005;

/// Bisection step limit.
pub const MAX_BISECTION_STEPS: usize = 200;

const COX_COEF: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Proportional hazards with baseline hazard `(t - 0.5)^2`.
    CoxPh,
    /// `log T = (2 + sin z1)^2 + (1 + z5)^3 + 3 z10^2 + z1 z10 + ε`.
    NonlinearInteraction,
    /// `H(T) = -βᵀz + ε` with `H(t) = log(0.5 (e^{2t} - 1))`.
    Transformation,
}

impl Model {
    pub fn default_rho(self) -> f64 {
        match self {
            Model::CoxPh | Model::NonlinearInteraction => 0.8,
            Model::Transformation => 0.5,
        }
    }

    /// 0-based indices of the covariates the survival time depends on.
    pub fn active_set(self) -> Vec<usize> {
        match self {
            Model::CoxPh => vec![0, 1, 2, 3, 4],
            Model::NonlinearInteraction => vec![0, 4, 9],
            Model::Transformation => vec![0, 1, 8, 9],
        }
    }

    /// Smallest covariate count the model formula needs.
    pub fn min_p(self) -> usize {
        match self {
            Model::CoxPh => 5,
            _ => 10,
        }
    }

    /// Nonzero coefficients of the linear predictor as `(index, value)`.
    pub fn coefficients(self) -> Vec<(usize, f64)> {
        match self {
            Model::CoxPh => (0..5).map(|k| (k, COX_COEF)).collect(),
            Model::NonlinearInteraction => Vec::new(),
            Model::Transformation => vec![(0, -1.0), (1, -0.9), (8, 0.8), (9, 1.0)],
        }
    }

    /// Dense coefficient vector of length `p`.
    pub fn beta(self, p: usize) -> Vec<f64> {
        let mut beta = vec![0.0; p];
        for (k, b) in self.coefficients() {
            if k < p {
                beta[k] = b;
            }
        }
        beta
    }

    fn short(self) -> &'static str {
        match self {
            Model::CoxPh => "ex1",
            Model::NonlinearInteraction => "ex2",
            Model::Transformation => "ex3",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::CoxPh => "cox",
            Model::NonlinearInteraction => "nonlinear",
            Model::Transformation => "transformation",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cox" | "coxph" | "ex1" => Ok(Model::CoxPh),
            "nonlinear" | "nonlinear_interaction" | "ex2" => Ok(Model::NonlinearInteraction),
            "transformation" | "ex3" => Ok(Model::Transformation),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CensoringCase {
    /// `C ~ Unif(0, τ)`.
    RandomUniform,
    /// `C ~ Unif(0, c·|Z1 - Z2|)`.
    InformativeZ12,
}

impl CensoringCase {
    fn letter(self) -> &'static str {
        match self {
            CensoringCase::RandomUniform => "a",
            CensoringCase::InformativeZ12 => "b",
        }
    }
}

impl fmt::Display for CensoringCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CensoringCase::RandomUniform => "random",
            CensoringCase::InformativeZ12 => "informative",
        })
    }
}

impl FromStr for CensoringCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "a" | "random_uniform" => Ok(CensoringCase::RandomUniform),
            "informative" | "b" | "informative_z12" => Ok(CensoringCase::InformativeZ12),
            other => Err(Error::Config(format!("unknown censoring case '{other}'"))),
        }
    }
}

/// One simulation setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub censoring: CensoringCase,
    pub target_cr: f64,
    pub rho: f64,
    pub seed: u64,
    /// Store `ln(1 + t)` instead of raw times. Only matters for the
    /// nonlinear model, whose raw times can overflow.
    pub log_time: bool,
    pub n_cal: usize,
}

impl SimScenario {
    /// `n = 200` and the model's default correlation.
    pub fn new(model: Model, p: usize, censoring: CensoringCase, target_cr: f64, seed: u64) -> Self {
        SimScenario {
            model,
            n: 200,
            p,
            censoring,
            target_cr,
            rho: model.default_rho(),
            seed,
            log_time: false,
            n_cal: DEFAULT_CALIBRATION_SAMPLES,
        }
    }

    /// Short identifier such as `ex1-p2000-a-cr20`.
    pub fn id(&self) -> String {
        format!(
            "{}-p{}-{}-cr{}",
            self.model.short(),
            self.p,
            self.censoring.letter(),
            (self.target_cr * 100.0).round() as i64
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!("n = {} (need at least 3)", self.n)));
        }
        if self.p < self.model.min_p() {
            return Err(Error::Config(format!(
                "model {} needs p >= {}, got {}",
                self.model,
                self.model.min_p(),
                self.p
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::BadRho(self.rho));
        }
        if self.n_cal < 10_000 {
            return Err(Error::Config(format!(
                "calibration sample {} below 10000",
                self.n_cal
            )));
        }
        Ok(())
    }
}

/// A simulated dataset plus the latent quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub dataset: SurvivalDataset,
    pub true_times: Vec<f64>,
    pub censor_times: Vec<f64>,
    /// 0-based active covariate indices.
    pub active_set: Vec<usize>,
    pub censoring_scale: f64,
}

/// Fills `row` with one draw of the stationary AR(1) Gaussian sequence.
fn fill_ar1_row<R: Rng + ?Sized>(row: &mut [f64], rho: f64, rng: &mut R) {
    let innov = (1.0 - rho * rho).sqrt();
    let mut prev = 0.0;
    for (k, slot) in row.iter_mut().enumerate() {
        let e: f64 = StandardNormal.sample(rng);
        prev = if k == 0 { e } else { rho * prev + innov * e };
        *slot = prev;
    }
}

/// `n × p` matrix whose rows are i.i.d. `N_p(0, Σ)`, `Σ_ij = ρ^|i-j|`.
pub fn sample_ar1_normal<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rho: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::BadRho(rho));
    }
    let mut z = Array2::zeros((n, p));
    for mut row in z.rows_mut() {
        fill_ar1_row(row.as_slice_mut().expect("row-major"), rho, rng);
    }
    Ok(z)
}

fn linear_predictor(z: &[f64], beta: &[f64]) -> f64 {
    z.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Exponential(1) by inversion of an open-interval uniform.
fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    -u.ln()
}

/// Inverts `Λ0(T) exp(η) = e` for `Λ0(t) = ((t - 0.5)^3 + 0.125) / 3`.
pub fn cox_time(e: f64, eta: f64) -> f64 {
    (0.5 + (3.0 * e * (-eta).exp() - 0.125).cbrt()).max(0.0)
}

/// Cumulative baseline hazard of the Cox model.
pub fn cox_cumulative_baseline(t: f64) -> f64 {
    let s = t - 0.5;
    (s * s * s + 0.125) / 3.0
}

pub fn sample_cox_time<R: Rng + ?Sized>(z: &[f64], beta: &[f64], rng: &mut R) -> f64 {
    cox_time(standard_exponential(rng), linear_predictor(z, beta))
}

/// `log T` of the nonlinear interaction model; `z` needs 10 coordinates.
pub fn nonlinear_log_time(z: &[f64], eps: f64) -> f64 {
    let (z1, z5, z10) = (z[0], z[4], z[9]);
    let a = 2.0 + z1.sin();
    let b = 1.0 + z5;
    a * a + b * b * b + 3.0 * z10 * z10 + z1 * z10 + eps
}

pub fn sample_nonlinear_time<R: Rng + ?Sized>(z: &[f64], rng: &mut R) -> Result<f64> {
    let eps: f64 = StandardNormal.sample(rng);
    let lt = nonlinear_log_time(z, eps);
    let t = lt.exp();
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::TimeOverflow(lt))
    }
}

/// `H(t) = log(0.5 (e^{2t} - 1))` for `t > 0`.
pub fn transformation_h(t: f64) -> f64 {
    0.5f64.ln() + (2.0 * t).exp_m1().ln()
}

/// `H^{-1}(w) = 0.5 log(1 + 2 e^w)`, positive for every real `w`.
pub fn transformation_h_inv(w: f64) -> f64 {
    if w > 30.0 {
        0.5 * (w + 2f64.ln() + (0.5 * (-w).exp()).ln_1p())
    } else {
        0.5 * (2.0 * w.exp()).ln_1p()
    }
}

pub fn sample_transformation_time<R: Rng + ?Sized>(z: &[f64], beta: &[f64], rng: &mut R) -> f64 {
    let eps: f64 = StandardNormal.sample(rng);
    transformation_h_inv(-linear_predictor(z, beta) + eps)
}

/// Draws `log T` for one subject. Working on the log scale keeps the
/// nonlinear model finite; the other models never overflow.
fn sample_log_time<R: Rng + ?Sized>(model: Model, z: &[f64], beta: &[f64], rng: &mut R) -> f64 {
    match model {
        Model::CoxPh => sample_cox_time(z, beta, rng).ln(),
        Model::NonlinearInteraction => {
            let eps: f64 = StandardNormal.sample(rng);
            nonlinear_log_time(z, eps)
        }
        Model::Transformation => sample_transformation_time(z, beta, rng).ln(),
    }
}

/// Multiplier of the censoring scale for one subject.
fn censoring_weight(case: CensoringCase, z: &[f64]) -> f64 {
    match case {
        CensoringCase::RandomUniform => 1.0,
        CensoringCase::InformativeZ12 => (z[0] - z[1]).abs(),
    }
}

/// Draws `n_cal` subjects and returns, for each, the log threshold
/// `log T - log U - log w`: the subject is censored iff the log censoring
/// scale falls below it.
fn censoring_thresholds<R: Rng + ?Sized>(scenario: &SimScenario, n_cal: usize, rng: &mut R) -> Vec<f64> {
    let m = scenario.p.min(10);
    let beta = scenario.model.beta(m);
    let mut z = vec![0.0; m];
    (0..n_cal)
        .map(|_| {
            fill_ar1_row(&mut z, scenario.rho, rng);
            let lt = sample_log_time(scenario.model, &z, &beta, rng);
            let u: f64 = Open01.sample(rng);
            lt - u.ln() - censoring_weight(scenario.censoring, &z).ln()
        })
        .collect()
}

fn rate_at(thresholds: &[f64], log_scale: f64) -> f64 {
    thresholds.iter().filter(|&&r| r > log_scale).count() as f64 / thresholds.len() as f64
}

/// Censoring rate produced by `scale` on `n_eval` fresh draws.
pub fn censoring_rate_at<R: Rng + ?Sized>(
    scenario: &SimScenario,
    scale: f64,
    n_eval: usize,
    rng: &mut R,
) -> f64 {
    rate_at(&censoring_thresholds(scenario, n_eval, rng), scale.ln())
}

/// Finds the censoring scale (`τ` or `c`) whose Monte Carlo censoring
/// rate over `n_cal` draws is within [`CALIBRATION_TOLERANCE`] of the
/// target. Bisects on `log(scale)`; the rate is non-increasing in it.
pub fn calibrate_censoring<R: Rng + ?Sized>(
    scenario: &SimScenario,
    n_cal: usize,
    rng: &mut R,
) -> Result<f64> {
    let target = scenario.target_cr;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InfeasibleTarget {
            target,
            reason: "target must lie in (0, 1)".into(),
        });
    }
    if n_cal == 0 {
        return Err(Error::Config("empty calibration sample".into()));
    }
    let thresholds = censoring_thresholds(scenario, n_cal, rng);
    let finite = thresholds.iter().copied().filter(|r| r.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    if !min.is_finite() {
        return Err(Error::InfeasibleTarget {
            target,
            reason: "no finite censoring thresholds".into(),
        });
    }
    let (mut lo, mut hi) = (min - 1.0, max + 1.0);
    let (rate_lo, rate_hi) = (rate_at(&thresholds, lo), rate_at(&thresholds, hi));
    if !(rate_lo >= target && rate_hi <= target) {
        return Err(Error::InfeasibleTarget {
            target,
            reason: format!("attainable rates span [{rate_hi}, {rate_lo}]"),
        });
    }
    let resolution = 1.0 / n_cal as f64;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let rate = rate_at(&thresholds, mid);
        if (rate - target).abs() <= resolution || hi - lo < 1e-12 {
            if (rate - target).abs() <= CALIBRATION_TOLERANCE {
                return Ok(mid.exp());
            }
            break;
        }
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (rate_at(&thresholds, mid) - target).abs() <= CALIBRATION_TOLERANCE {
        Ok(mid.exp())
    } else {
        Err(Error::NoConvergence {
            steps: MAX_BISECTION_STEPS,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CalibrationKey {
    model: Model,
    p: usize,
    censoring: CensoringCase,
    target_bits: u64,
    rho_bits: u64,
    seed: u64,
    n_cal: usize,
}

fn calibration_cache() -> &'static RwLock<HashMap<CalibrationKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CalibrationKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Calibrated scale for `scenario`, drawn from its calibration stream and
/// memoized for the life of the process.
pub fn calibrated_scale(scenario: &SimScenario) -> Result<f64> {
    scenario.validate()?;
    let key = CalibrationKey {
        model: scenario.model,
        p: scenario.p.min(10),
        censoring: scenario.censoring,
        target_bits: scenario.target_cr.to_bits(),
        rho_bits: scenario.rho.to_bits(),
        seed: scenario.seed,
        n_cal: scenario.n_cal,
    };
    if let Some(&s) = calibration_cache().read().expect("cache poisoned").get(&key) {
        return Ok(s);
    }
    let mut rng = rng::stream(scenario.seed, rng::CALIBRATION_STREAM);
    let scale = calibrate_censoring(scenario, scenario.n_cal, &mut rng)?;
    calibration_cache()
        .write()
        .expect("cache poisoned")
        .insert(key, scale);
    Ok(scale)
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Simulates one dataset with a known censoring scale.
pub fn generate_with_scale<R: Rng + ?Sized>(
    scenario: &SimScenario,
    scale: f64,
    rng: &mut R,
) -> Result<GeneratedData> {
    scenario.validate()?;
    let (n, p) = (scenario.n, scenario.p);
    let beta = scenario.model.beta(p);
    let mut z = Array2::zeros((n, p));
    let mut times = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    let mut true_times = Vec::with_capacity(n);
    let mut censor_times = Vec::with_capacity(n);
    for mut row in z.rows_mut() {
        let row = row.as_slice_mut().expect("row-major");
        fill_ar1_row(row, scenario.rho, rng);
        let lt = sample_log_time(scenario.model, row, &beta, rng);
        let u: f64 = Open01.sample(rng);
        let c = u * scale * censoring_weight(scenario.censoring, row);
        let t = lt.exp();
        // ties count as observed events
        let event = if t.is_finite() { t <= c } else { lt <= c.ln() };
        if scenario.log_time {
            true_times.push(softplus(lt));
            censor_times.push(c.ln_1p());
            times.push(if event { softplus(lt) } else { c.ln_1p() });
        } else {
            if !t.is_finite() {
                return Err(Error::TimeOverflow(lt));
            }
            true_times.push(t);
            censor_times.push(c);
            times.push(if event { t } else { c });
        }
        status.push(event);
    }
    Ok(GeneratedData {
        dataset: SurvivalDataset::new(times, status, z)?,
        true_times,
        censor_times,
        active_set: scenario.model.active_set(),
        censoring_scale: scale,
    })
}

/// Replication `rep` of `scenario`, using the shared calibrated scale.
pub fn generate_replication(scenario: &SimScenario, scale: f64, rep: u64) -> Result<GeneratedData> {
    let mut rng = rng::stream(scenario.seed, rep);
    generate_with_scale(scenario, scale, &mut rng)
}

/// Calibrates (cached) and simulates replication 0 of `scenario`.
pub fn generate(scenario: &SimScenario) -> Result<GeneratedData> {
    let scale = calibrated_scale(scenario)?;
    generate_replication(scenario, scale, 0)
}
