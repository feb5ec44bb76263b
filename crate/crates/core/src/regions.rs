//! Confidence regions for the Monte Carlo estimate `θ_n`.
//!
//! The ellipsoid is `{θ : n (θ_n - θ)ᵀ Σ_n⁻¹ (θ_n - θ) < T²}` with the
//! Hotelling cutoff `T² = p(a_n - 1)/(a_n - p) · F_{1-α; p, a_n - p}`.
//! Volumes are kept in log space so large `p` neither underflows nor
//! overflows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::{column_means, ChainMatrix, MeanVector};
use crate::error::{domain, Error, Result};
use crate::estimators::{batch_size, mbm, ubm_diag, BatchPolicy, CovEstimate};
use crate::linalg::Cholesky;
use crate::special::{log_gamma, quantile, DistSpec};

/// Scaled-F Hotelling cutoff for `a_n` batches in dimension `p`.
pub fn hotelling_cutoff(alpha: f64, p: usize, batch_count: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("α must lie in (0, 1), got {alpha}")));
    }
    if p == 0 {
        return Err(domain("p must be at least 1"));
    }
    if batch_count <= p {
        return Err(Error::InsufficientBatches {
            batches: batch_count,
            dim: p,
        });
    }
    let (a, pf) = (batch_count as f64, p as f64);
    let f = quantile(DistSpec::f(pf, a - pf), 1.0 - alpha)?;
    Ok(pf * (a - 1.0) / (a - pf) * f)
}

/// Log of the unit-ball volume factor `2π^{p/2} / (pΓ(p/2))`.
pub fn log_unit_ball_volume(p: usize) -> f64 {
    let pf = p as f64;
    std::f64::consts::LN_2 + 0.5 * pf * PI.ln() - pf.ln()
        - log_gamma(0.5 * pf).expect("p >= 1 gives a positive argument")
}

/// `log Vol = log(2π^{p/2}/(pΓ(p/2))) + (p/2) log(T²/n) + ½ log|Σ_n|`.
pub fn log_region_volume(n: usize, p: usize, cutoff: f64, log_det_sigma: f64) -> f64 {
    let pf = p as f64;
    log_unit_ball_volume(p) + 0.5 * pf * (cutoff.ln() - (n as f64).ln()) + 0.5 * log_det_sigma
}

/// An ellipsoidal confidence region around `θ_n`.
#[derive(Debug, Clone)]
pub struct ConfidenceRegion {
    pub center: MeanVector,
    pub shape: CovEstimate,
    pub n: usize,
    pub alpha: f64,
    pub cutoff: f64,
    pub log_volume: f64,
    chol: Cholesky,
}

/// Serializable summary of a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub batch_size: usize,
    pub batch_count: usize,
    pub cutoff: f64,
    pub log_volume: f64,
    pub volume_root: f64,
    pub center: Vec<f64>,
}

impl ConfidenceRegion {
    /// Region with the Hotelling cutoff implied by the shape's batch count.
    pub fn new(center: MeanVector, shape: CovEstimate, n: usize, alpha: f64) -> Result<Self> {
        let cutoff = hotelling_cutoff(alpha, shape.p(), shape.batch_count)?;
        Self::with_cutoff(center, shape, n, alpha, cutoff)
    }

    /// Region with an explicitly supplied cutoff.
    pub fn with_cutoff(center: MeanVector, shape: CovEstimate, n: usize, alpha: f64, cutoff: f64) -> Result<Self> {
        if center.len() != shape.p() {
            return Err(domain("center and shape dimensions differ"));
        }
        if !(cutoff > 0.0) {
            return Err(domain(format!("cutoff must be positive, got {cutoff}")));
        }
        let chol = shape.matrix.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let log_volume = log_region_volume(n, shape.p(), cutoff, chol.log_det());
        Ok(Self {
            center,
            shape,
            n,
            alpha,
            cutoff,
            log_volume,
            chol,
        })
    }

    /// mBM region from a chain, batch size from `policy`.
    pub fn from_chain(chain: &ChainMatrix, policy: BatchPolicy, alpha: f64) -> Result<Self> {
        policy.validate()?;
        let shape = mbm(chain, batch_size(chain.n(), policy))?;
        Self::new(column_means(chain), shape, chain.n(), alpha)
    }

    pub fn p(&self) -> usize {
        self.center.len()
    }

    /// `Vol^{1/p}`.
    pub fn volume_root(&self) -> f64 {
        (self.log_volume / self.p() as f64).exp()
    }

    /// `n (θ_n - θ)ᵀ Σ_n⁻¹ (θ_n - θ)` via a Cholesky solve.
    pub fn statistic(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.p() {
            return Err(domain(format!(
                "point has {} components, region has {}",
                point.len(),
                self.p()
            )));
        }
        let diff: Vec<f64> = self.center.0.iter().zip(point).map(|(c, x)| c - x).collect();
        Ok(self.n as f64 * self.chol.quad_form_inv(&diff))
    }

    /// Strict membership: boundary points are outside.
    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        Ok(self.statistic(point)? < self.cutoff)
    }

    /// Scheffé simultaneous interval `aᵀθ_n ± √(aᵀΣ_n a · T²/n)`.
    pub fn scheffe_interval(&self, direction: &[f64]) -> Result<(f64, f64)> {
        if direction.len() != self.p() {
            return Err(domain("direction has the wrong dimension"));
        }
        if direction.iter().all(|&v| v == 0.0) {
            return Err(domain("direction must be nonzero"));
        }
        let center: f64 = direction.iter().zip(&self.center.0).map(|(a, c)| a * c).sum();
        let sa = self.shape.matrix.mul_vec(direction);
        let quad: f64 = direction.iter().zip(&sa).map(|(a, s)| a * s).sum();
        let half = (quad * self.cutoff / self.n as f64).sqrt();
        Ok((center - half, center + half))
    }

    /// `resolution` points on the boundary of the two-dimensional region for
    /// components `(i, j)`, with the cutoff recomputed for dimension 2.
    pub fn ellipse_boundary(&self, i: usize, j: usize, resolution: usize) -> Result<Vec<(f64, f64)>> {
        let p = self.p();
        if i >= p || j >= p || i == j {
            return Err(domain(format!("ellipse components ({i}, {j}) invalid for p = {p}")));
        }
        if resolution == 0 {
            return Err(domain("resolution must be positive"));
        }
        let sub = self.shape.matrix.submatrix(&[i, j]);
        let chol = sub.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let cutoff = hotelling_cutoff(self.alpha, 2, self.shape.batch_count)?;
        let radius = (cutoff / self.n as f64).sqrt();
        let (ci, cj) = (self.center.0[i], self.center.0[j]);
        Ok((0..resolution)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / resolution as f64;
                let v = chol.lower_mul(&[angle.cos(), angle.sin()]);
                (ci + radius * v[0], cj + radius * v[1])
            })
            .collect())
    }

    pub fn summary(&self) -> RegionSummary {
        RegionSummary {
            n: self.n,
            p: self.p(),
            alpha: self.alpha,
            batch_size: self.shape.batch_size,
            batch_count: self.shape.batch_count,
            cutoff: self.cutoff,
            log_volume: self.log_volume,
            volume_root: self.volume_root(),
            center: self.center.0.clone(),
        }
    }
}

/// Component-wise rectangular region from univariate batch means, the
/// baseline the ellipsoid is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateBox {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub t_quantile: f64,
    pub bonferroni: bool,
}

impl UnivariateBox {
    /// Half-widths `t_* σ_{n,i}/√n`, with `t_*` the `1 - α/2` quantile of
    /// Student-t on `a_n - 1` degrees of freedom, or `1 - α/(2p)` under a
    /// Bonferroni correction.
    pub fn from_chain(chain: &ChainMatrix, b: usize, alpha: f64, bonferroni: bool) -> Result<Self> {
        let sigma2 = ubm_diag(chain, b)?;
        let a = chain.n() / b;
        let t = univariate_t_quantile(alpha, chain.p(), a, bonferroni)?;
        let root_n = (chain.n() as f64).sqrt();
        Ok(Self {
            center: column_means(chain).0,
            half_widths: sigma2.iter().map(|s| t * s.sqrt() / root_n).collect(),
            t_quantile: t,
            bonferroni,
        })
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        if point.len() != self.center.len() {
            return Err(domain("point has the wrong dimension"));
        }
        Ok(self
            .center
            .iter()
            .zip(point)
            .zip(&self.half_widths)
            .all(|((c, x), h)| (c - x).abs() < *h))
    }

    /// `(Π 2h_i)^{1/p}`.
    pub fn volume_root(&self) -> f64 {
        let p = self.half_widths.len() as f64;
        (self.half_widths.iter().map(|h| (2.0 * h).ln()).sum::<f64>() / p).exp()
    }
}

/// Student-t critical value for the univariate intervals.
pub fn univariate_t_quantile(alpha: f64, p: usize, batch_count: usize, bonferroni: bool) -> Result<f64> {
    if batch_count < 2 {
        return Err(Error::InsufficientBatches {
            batches: batch_count,
            dim: 1,
        });
    }
    let tail = if bonferroni { alpha / (2.0 * p as f64) } else { alpha / 2.0 };
    quantile(DistSpec::student_t((batch_count - 1) as f64), 1.0 - tail)
}
