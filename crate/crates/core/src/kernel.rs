//! Kernels, Gram matrices, double centering and the empirical HSIC.
//!
//! Points are passed as an `n × d` view, one sample per row. The HSIC
//! estimate is the biased V-statistic `(n-1)^-2 tr(K H L H)`, evaluated as
//! the Frobenius inner product `<K, HLH>` so the response side is centered
//! once and every covariate costs `O(n^2)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Largest sample count accepted when materializing an `n × n` matrix.
pub const DEFAULT_SAMPLE_CAP: usize = 10_000;

/// Bandwidth used on both sides unless configured otherwise.
pub const DEFAULT_GAMMA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Gaussian,
    Linear,
    Laplacian,
}

impl KernelFamily {
    pub fn needs_bandwidth(self) -> bool {
        !matches!(self, KernelFamily::Linear)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Linear => "linear",
            KernelFamily::Laplacian => "laplacian",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelFamily::Gaussian),
            "linear" => Ok(KernelFamily::Linear),
            "laplacian" | "laplace" => Ok(KernelFamily::Laplacian),
            other => Err(Error::Config(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A kernel family together with its bandwidth.
///
/// * Gaussian: `exp(-||x - y||^2 / (2 gamma^2))`
/// * Laplacian: `exp(-||x - y||_1 / gamma)`
/// * Linear: `<x, y>` (gamma ignored)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub gamma: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::gaussian(DEFAULT_GAMMA)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.family.needs_bandwidth() {
            write!(f, "{}(gamma={})", self.family, self.gamma)
        } else {
            write!(f, "{}", self.family)
        }
    }
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            gamma,
        }
    }

    pub fn laplacian(gamma: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Laplacian,
            gamma,
        }
    }

    pub fn linear() -> Self {
        KernelSpec {
            family: KernelFamily::Linear,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family.needs_bandwidth() && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::BadBandwidth(self.gamma));
        }
        Ok(())
    }

    /// Evaluates `k(x, y)`. Slices must have equal length.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * self.gamma * self.gamma)).exp()
            }
            KernelFamily::Laplacian => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-l1 / self.gamma).exp()
            }
            KernelFamily::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }

    /// Kernel value for two scalars; used on the covariate hot path.
    #[inline]
    fn eval_scalar(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        match self.family {
            KernelFamily::Gaussian => (-d * d / (2.0 * self.gamma * self.gamma)).exp(),
            KernelFamily::Laplacian => (-d.abs() / self.gamma).exp(),
            KernelFamily::Linear => x * y,
        }
    }
}

/// Symmetric `n × n` matrix of kernel evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Array2<f64>,
}

impl GramMatrix {
    /// Wraps an existing square symmetric matrix.
    pub fn from_matrix(values: Array2<f64>) -> Result<Self> {
        check_square(&values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = values.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if values[[i, j]] != values[[j, i]] {
                    return Err(Error::DimensionMismatch(format!(
                        "Gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GramMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

/// A Gram matrix after double centering, `H L H` with `H = I - J/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredGram {
    values: Array2<f64>,
}

impl CenteredGram {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Re-centers an already centered matrix. `H` is idempotent, so this
    /// returns the same matrix up to roundoff.
    pub fn recenter(&self) -> CenteredGram {
        CenteredGram {
            values: double_center(&self.values),
        }
    }
}

fn check_square(m: &Array2<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() < 2 {
        return Err(Error::TooFewSamples {
            min: 2,
            got: m.nrows(),
        });
    }
    Ok(())
}

fn check_points(points: &ArrayView2<'_, f64>, cap: usize) -> Result<()> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { min: 2, got: n });
    }
    if n > cap {
        return Err(Error::TooManySamples { got: n, cap });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Builds the Gram matrix of `points` (one sample per row).
pub fn gram(points: ArrayView2<'_, f64>, spec: &KernelSpec) -> Result<GramMatrix> {
    gram_capped(points, spec, DEFAULT_SAMPLE_CAP)
}

/// As [`gram`], with an explicit bound on the sample count.
pub fn gram_capped(
    points: ArrayView2<'_, f64>,
    spec: &KernelSpec,
    cap: usize,
) -> Result<GramMatrix> {
    spec.validate()?;
    check_points(&points, cap)?;
    let n = points.nrows();
    let rows: Vec<Vec<f64>> = points.outer_iter().map(|r| r.to_vec()).collect();
    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        values[[i, i]] = spec.eval(&rows[i], &rows[i]);
        for j in (i + 1)..n {
            let k = spec.eval(&rows[i], &rows[j]);
            values[[i, j]] = k;
            values[[j, i]] = k;
        }
    }
    Ok(GramMatrix { values })
}

fn double_center(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows() as f64;
    let row_means = m.sum_axis(Axis(1)) / n;
    let col_means = m.sum_axis(Axis(0)) / n;
    let grand = row_means.sum() / n;
    let mut out = m.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = *v - row_means[i] - col_means[j] + grand;
    }
    // Average with the transpose so symmetry holds exactly.
    let dim = out.nrows();
    for i in 0..dim {
        for j in (i + 1)..dim {
            let s = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = s;
            out[[j, i]] = s;
        }
    }
    out
}

/// Computes `H L H` with `H[i][j] = [i == j] - 1/n`.
pub fn center(l: &GramMatrix) -> CenteredGram {
    CenteredGram {
        values: double_center(&l.values),
    }
}

/// Unclamped `(n-1)^-2 <K, Lc>_F`. Roundoff can make it slightly negative.
pub fn hsic_raw(k: &GramMatrix, lc: &CenteredGram) -> Result<f64> {
    if k.n() != lc.n() {
        return Err(Error::DimensionMismatch(format!(
            "K is {0}x{0} but centered L is {1}x{1}",
            k.n(),
            lc.n()
        )));
    }
    let n = k.n() as f64;
    let dot: f64 = k
        .values
        .iter()
        .zip(lc.values.iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(dot / ((n - 1.0) * (n - 1.0)))
}

/// Empirical HSIC, clamped at zero.
pub fn hsic(k: &GramMatrix, lc: &CenteredGram) -> Result<f64> {
    hsic_raw(k, lc).map(|v| v.max(0.0))
}

/// `hsic(gram(u), center(gram(v)))`.
pub fn hsic_pair(
    u: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
    spec_u: &KernelSpec,
    spec_v: &KernelSpec,
) -> Result<f64> {
    if u.nrows() != v.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "u has {} samples, v has {}",
            u.nrows(),
            v.nrows()
        )));
    }
    let k = gram(u, spec_u)?;
    let l = gram(v, spec_v)?;
    // A constant Gram on either side centers to exactly zero.
    if all_rows_equal(&u) || all_rows_equal(&v) {
        return Ok(0.0);
    }
    hsic(&k, &center(&l))
}

fn all_rows_equal(points: &ArrayView2<'_, f64>) -> bool {
    let first = points.row(0);
    points.outer_iter().all(|r| r == first)
}

/// Unclamped HSIC of scalar samples `u` against a pre-centered response
/// Gram, without materializing `K`. Exploits the symmetry of `Lc` so each
/// off-diagonal kernel value is evaluated once.
pub fn hsic_scalar_raw(u: &[f64], spec: &KernelSpec, lc: &CenteredGram) -> Result<f64> {
    spec.validate()?;
    let n = u.len();
    if n != lc.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples against a {1}x{1} centered Gram",
            n,
            lc.n()
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let l = lc.values();
    let mut diag = 0.0;
    let mut off = 0.0;
    match spec.family {
        KernelFamily::Gaussian => {
            let scale = -1.0 / (2.0 * spec.gamma * spec.gamma);
            for i in 0..n {
                let ui = u[i];
                let row = l.row(i);
                let row = row.as_slice().expect("centered Gram is standard layout");
                diag += row[i];
                let mut acc = 0.0;
                for j in (i + 1)..n {
                    let d = ui - u[j];
                    acc += (scale * d * d).exp() * row[j];
                }
                off += acc;
            }
        }
        _ => {
            for i in 0..n {
                diag += spec.eval_scalar(u[i], u[i]) * l[[i, i]];
                let mut acc = 0.0;
                for j in (i + 1)..n {
                    acc += spec.eval_scalar(u[i], u[j]) * l[[i, j]];
                }
                off += acc;
            }
        }
    }
    let nf = n as f64;
    Ok((diag + 2.0 * off) / ((nf - 1.0) * (nf - 1.0)))
}
