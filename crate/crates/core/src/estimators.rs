//! Covariance estimators for Monte Carlo output.
//!
//! * [`sample_covariance`]: `Λ_n`, the (n-1)-denominator covariance of the draws.
//! * [`mbm`]: multivariate batch means `Σ_n`, estimating the asymptotic
//!   covariance in the Markov chain CLT.
//! * [`ubm_diag`]: the per-component batch means variances `σ²_{n,i}`.
//!
//! When the batch size does not divide `n`, the trailing `n - a_n b_n` rows
//! are dropped, both for the batch means and for the centering mean.

use serde::{Deserialize, Serialize};

use crate::chain::ChainMatrix;
use crate::error::{domain, Error, Result};
use crate::linalg::Matrix;

/// How the batch size `b_n` grows with the chain length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchPolicy {
    /// `b_n = ⌊n^ν⌋`, ν in (0, 1).
    Exponent(f64),
    /// Constant batch size, capped at `⌊n/2⌋`.
    Fixed(usize),
}

impl Default for BatchPolicy {
    fn default() -> Self {
        BatchPolicy::Exponent(0.5)
    }
}

impl BatchPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BatchPolicy::Exponent(nu) if nu > 0.0 && nu < 1.0 => Ok(()),
            BatchPolicy::Exponent(nu) => Err(domain(format!("batch exponent must lie in (0, 1), got {nu}"))),
            BatchPolicy::Fixed(b) if b >= 1 => Ok(()),
            BatchPolicy::Fixed(_) => Err(domain("fixed batch size must be at least 1")),
        }
    }

    pub fn batch_size(&self, n: usize) -> usize {
        batch_size(n, *self)
    }
}

/// Batch size for a chain of length `n`, always at least 1.
pub fn batch_size(n: usize, policy: BatchPolicy) -> usize {
    match policy {
        BatchPolicy::Exponent(nu) => {
            let nf = n as f64;
            let mut b = nf.powf(nu).floor();
            // powf can land just below an exact integer root
            if (b + 1.0).powf(1.0 / nu) <= nf * (1.0 + 1e-12) {
                b += 1.0;
            }
            (b as usize).max(1)
        }
        BatchPolicy::Fixed(b) => b.min((n / 2).max(1)).max(1),
    }
}

/// Which estimator produced a [`CovEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMethod {
    Mbm,
    Sample,
    UbmDiag,
}

/// A symmetric `p x p` covariance estimate with its log-determinant.
///
/// `log_det` is `None` when the matrix is not positive definite; that is a
/// normal state at small `n`, not an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub matrix: Matrix,
    pub method: CovMethod,
    /// `a_n`; zero for the sample covariance.
    pub batch_count: usize,
    /// `b_n`; zero for the sample covariance.
    pub batch_size: usize,
    /// Rows that entered the estimate.
    pub n_used: usize,
    pub log_det: Option<f64>,
}

impl CovEstimate {
    pub fn p(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.log_det.is_some()
    }

    pub fn require_log_det(&self) -> Result<f64> {
        self.log_det.ok_or(Error::NotPositiveDefinite)
    }
}

/// Log-determinant via Cholesky; `Ok(None)` when the matrix is not positive
/// definite.
pub fn log_det(matrix: &Matrix) -> Result<Option<f64>> {
    if !matrix.is_square() {
        return Err(domain("log_det requires a square matrix"));
    }
    if matrix.relative_asymmetry() > 1e-8 {
        return Err(domain("log_det requires a symmetric matrix"));
    }
    Ok(matrix.cholesky().map(|c| c.log_det()))
}

/// `Λ_n`: sample covariance with denominator `n - 1`.
///
/// Accumulates co-moments with Welford updates in a single pass.
pub fn sample_covariance(chain: &ChainMatrix) -> Result<CovEstimate> {
    let (n, p) = (chain.n(), chain.p());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "sample covariance needs at least 2 rows, got {n}"
        )));
    }
    let mut mean = vec![0.0; p];
    let mut comoment = Matrix::zeros(p, p);
    let mut delta = vec![0.0; p];
    for (t, row) in chain.rows().enumerate() {
        let k = (t + 1) as f64;
        for i in 0..p {
            delta[i] = row[i] - mean[i];
            mean[i] += delta[i] / k;
        }
        for i in 0..p {
            let after = row[i] - mean[i];
            for j in i..p {
                comoment[(i, j)] += after * delta[j];
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    let mut matrix = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = comoment[(i, j)] * scale;
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    let log_det = if p < n { matrix.cholesky().map(|c| c.log_det()) } else { None };
    Ok(CovEstimate {
        matrix,
        method: CovMethod::Sample,
        batch_count: 0,
        batch_size: 0,
        n_used: n,
        log_det,
    })
}

struct BatchMeans {
    /// Row-major `a x p` batch means, centered at the retained-row mean.
    centered: Vec<f64>,
    count: usize,
}

fn centered_batch_means(chain: &ChainMatrix, b: usize) -> Result<BatchMeans> {
    if b == 0 {
        return Err(domain("batch size must be at least 1"));
    }
    let (n, p) = (chain.n(), chain.p());
    let a = n / b;
    if a < 2 {
        return Err(Error::InsufficientData(format!(
            "batch means need at least 2 batches: n = {n}, b_n = {b}"
        )));
    }
    let mut means = vec![0.0; a * p];
    for (k, batch) in means.chunks_exact_mut(p).enumerate() {
        for t in k * b..(k + 1) * b {
            for (m, v) in batch.iter_mut().zip(chain.row(t)) {
                *m += v;
            }
        }
        batch.iter_mut().for_each(|m| *m /= b as f64);
    }
    let mut grand = vec![0.0; p];
    for batch in means.chunks_exact(p) {
        for (g, m) in grand.iter_mut().zip(batch) {
            *g += m;
        }
    }
    grand.iter_mut().for_each(|g| *g /= a as f64);
    for batch in means.chunks_exact_mut(p) {
        for (m, g) in batch.iter_mut().zip(&grand) {
            *m -= g;
        }
    }
    Ok(BatchMeans { centered: means, count: a })
}

/// `Σ_n`: multivariate batch means with batch size `b`.
pub fn mbm(chain: &ChainMatrix, b: usize) -> Result<CovEstimate> {
    let p = chain.p();
    let bm = centered_batch_means(chain, b)?;
    let a = bm.count;
    let mut matrix = Matrix::zeros(p, p);
    for batch in bm.centered.chunks_exact(p) {
        for i in 0..p {
            let di = batch[i];
            for j in i..p {
                matrix[(i, j)] += di * batch[j];
            }
        }
    }
    let scale = b as f64 / (a - 1) as f64;
    for i in 0..p {
        for j in i..p {
            let v = matrix[(i, j)] * scale;
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    let log_det = if a > p { matrix.cholesky().map(|c| c.log_det()) } else { None };
    Ok(CovEstimate {
        matrix,
        method: CovMethod::Mbm,
        batch_count: a,
        batch_size: b,
        n_used: a * b,
        log_det,
    })
}

/// [`mbm`] with the batch size taken from a policy.
pub fn mbm_with_policy(chain: &ChainMatrix, policy: BatchPolicy) -> Result<CovEstimate> {
    policy.validate()?;
    mbm(chain, batch_size(chain.n(), policy))
}

/// Univariate batch means variances, one per component.
pub fn ubm_diag(chain: &ChainMatrix, b: usize) -> Result<Vec<f64>> {
    let p = chain.p();
    let bm = centered_batch_means(chain, b)?;
    let scale = b as f64 / (bm.count - 1) as f64;
    let mut out = vec![0.0; p];
    for batch in bm.centered.chunks_exact(p) {
        for (o, d) in out.iter_mut().zip(batch) {
            *o += d * d;
        }
    }
    Ok(out.into_iter().map(|v| v * scale).collect())
}

/// (n-1)-denominator variance of each component.
pub fn sample_variances(chain: &ChainMatrix) -> Result<Vec<f64>> {
    let (n, p) = (chain.n(), chain.p());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "sample variance needs at least 2 rows, got {n}"
        )));
    }
    let mut mean = vec![0.0; p];
    let mut m2 = vec![0.0; p];
    for (t, row) in chain.rows().enumerate() {
        let k = (t + 1) as f64;
        for i in 0..p {
            let d = row[i] - mean[i];
            mean[i] += d / k;
            m2[i] += d * (row[i] - mean[i]);
        }
    }
    Ok(m2.into_iter().map(|v| v / (n - 1) as f64).collect())
}
