//! Effective sample size.
//!
//! The multivariate ESS of a chain is `n (|Λ|/|Σ|)^{1/p}`: the number of
//! independent draws that would give the same generalized variance of the
//! mean. All determinant ratios are formed in log space.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::ChainMatrix;
use crate::error::{domain, Error, Result};
use crate::estimators::{
    batch_size, mbm, sample_covariance, sample_variances, ubm_diag, BatchPolicy, CovEstimate,
};
use crate::special::{log_gamma, quantile, DistSpec};

/// Multivariate and per-component ESS with the minimum-ESS threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub ess_multivariate: f64,
    /// `f64::INFINITY` for a component whose batch means variance is zero.
    pub ess_univariate: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub batch_size: usize,
    pub batch_count: usize,
    pub policy: BatchPolicy,
    pub alpha: f64,
    pub epsilon: f64,
    pub min_ess: f64,
    pub sufficient: bool,
}

/// `n exp((log|Λ_n| - log|Σ_n|)/p)`.
pub fn multivariate_ess(lambda_hat: &CovEstimate, sigma_hat: &CovEstimate, n: usize) -> Result<f64> {
    if lambda_hat.p() != sigma_hat.p() {
        return Err(domain("Λ_n and Σ_n dimensions differ"));
    }
    let ld_lambda = lambda_hat.require_log_det()?;
    let ld_sigma = sigma_hat.require_log_det()?;
    let p = lambda_hat.p() as f64;
    Ok(n as f64 * ((ld_lambda - ld_sigma) / p).exp())
}

/// `n λ²_{n,i} / σ²_{n,i}` per component.
pub fn univariate_ess(chain: &ChainMatrix, b: usize) -> Result<Vec<f64>> {
    let sigma2 = ubm_diag(chain, b)?;
    let lambda2 = sample_variances(chain)?;
    let n = chain.n() as f64;
    Ok(lambda2
        .iter()
        .zip(&sigma2)
        .map(|(&l, &s)| if s > 0.0 { n * l / s } else { f64::INFINITY })
        .collect())
}

/// Log of the dimension constant `2^{2/p} π / (p Γ(p/2))^{2/p}`.
fn log_threshold_constant(p: usize) -> Result<f64> {
    let pf = p as f64;
    Ok((2.0 / pf) * std::f64::consts::LN_2 + PI.ln() - (2.0 / pf) * (pf.ln() + log_gamma(0.5 * pf)?))
}

/// Minimum ESS `W_{p,α,ε} = 2^{2/p} π / (pΓ(p/2))^{2/p} · χ²_{1-α,p} / ε²`.
pub fn min_ess(p: usize, alpha: f64, eps: f64) -> Result<f64> {
    Ok(log_min_ess_unit(p, alpha)?.exp() / (eps_check(eps)? * eps))
}

fn eps_check(eps: f64) -> Result<f64> {
    if eps > 0.0 && eps.is_finite() {
        Ok(eps)
    } else {
        Err(domain(format!("tolerance ε must be positive, got {eps}")))
    }
}

/// `log W_{p,α,1}`.
fn log_min_ess_unit(p: usize, alpha: f64) -> Result<f64> {
    if p == 0 {
        return Err(domain("p must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("α must lie in (0, 1), got {alpha}")));
    }
    let chi2 = quantile(DistSpec::chi2(p as f64), 1.0 - alpha)?;
    Ok(log_threshold_constant(p)? + chi2.ln())
}

/// The precision ε whose threshold equals `ess`.
pub fn eps_from_ess(p: usize, alpha: f64, ess: f64) -> Result<f64> {
    if !(ess > 0.0) {
        return Err(domain(format!("ESS must be positive, got {ess}")));
    }
    Ok((0.5 * (log_min_ess_unit(p, alpha)? - ess.ln())).exp())
}

/// The same verdict as the relative standard deviation rule, restated as a
/// lower bound on ESS:
///
/// `ESS ≥ [ (2π^{p/2}/(pΓ(p/2)))^{1/p} · √cutoff + |Σ_n|^{-1/2p} n^{-1/2} ]² / ε²`.
///
/// Only meaningful for `n ≥ n*` with both estimates positive definite.
pub fn ess_meets_threshold(
    ess: f64,
    n: usize,
    p: usize,
    cutoff: f64,
    log_det_sigma: f64,
    eps: f64,
) -> Result<bool> {
    let pf = p as f64;
    let log_ball = std::f64::consts::LN_2 + 0.5 * pf * PI.ln() - pf.ln() - log_gamma(0.5 * pf)?;
    let lead = (log_ball / pf).exp() * cutoff.sqrt();
    let remainder = (-log_det_sigma / (2.0 * pf)).exp() / (n as f64).sqrt();
    let bound = (lead + remainder).powi(2) / (eps * eps);
    Ok(ess >= bound)
}

/// Full ESS diagnostics for a chain: batch size from `policy`, threshold at
/// `(alpha, epsilon)`.
pub fn ess_report(chain: &ChainMatrix, policy: BatchPolicy, alpha: f64, epsilon: f64) -> Result<EssReport> {
    policy.validate()?;
    let (n, p) = (chain.n(), chain.p());
    let b = batch_size(n, policy);
    let sigma = mbm(chain, b)?;
    if sigma.batch_count <= p {
        return Err(Error::InsufficientBatches {
            batches: sigma.batch_count,
            dim: p,
        });
    }
    let lambda = sample_covariance(chain)?;
    let ess_multivariate = multivariate_ess(&lambda, &sigma, n)?;
    let threshold = min_ess(p, alpha, epsilon)?;
    Ok(EssReport {
        ess_multivariate,
        ess_univariate: univariate_ess(chain, b)?,
        n,
        p,
        batch_size: b,
        batch_count: sigma.batch_count,
        policy,
        alpha,
        epsilon,
        min_ess: threshold,
        sufficient: ess_multivariate >= threshold,
    })
}
