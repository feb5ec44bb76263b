//! Sequential stopping rules.
//!
//! The relative standard deviation fixed-volume rule stops at the first
//! checkpoint `n ≥ n*` with
//!
//! ```text
//! Vol(C_α(n))^{1/p} + 1/n ≤ ε |Λ_n|^{1/2p}
//! ```
//!
//! The absolute variant replaces `|Λ_n|^{1/2p}` with 1, and the univariate
//! baselines apply a fixed-width test to every component. Checkpoints start
//! at `n*` and grow geometrically; every rule is re-evaluated on the full
//! retained chain.

use serde::{Deserialize, Serialize};

use crate::chain::ChainMatrix;
use crate::error::{domain, Error, Result};
use crate::ess::{min_ess, multivariate_ess, univariate_ess};
use crate::estimators::{batch_size, mbm, sample_covariance, sample_variances, ubm_diag, BatchPolicy};
use crate::regions::{hotelling_cutoff, log_region_volume, univariate_t_quantile};

/// Yardstick the region size is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingMetric {
    /// Multivariate, relative to `|Λ_n|^{1/2p}`.
    RelativeSd,
    /// Multivariate, absolute tolerance.
    Absolute,
    /// Per-component fixed width with a Bonferroni-corrected t quantile.
    UnivariateBonferroni,
    /// Per-component fixed width, no correction.
    UnivariateUncorrected,
}

impl StoppingMetric {
    pub fn is_multivariate(self) -> bool {
        matches!(self, StoppingMetric::RelativeSd | StoppingMetric::Absolute)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub n_star: usize,
    pub batch_policy: BatchPolicy,
    pub metric: StoppingMetric,
    /// Checkpoints grow by `⌈check_growth · n⌉` rows.
    pub check_growth: f64,
    pub n_max: usize,
    /// Upper bound on chain storage, `rows · p · 8` bytes.
    pub byte_budget: u64,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            alpha: 0.1,
            n_star: 1000,
            batch_policy: BatchPolicy::default(),
            metric: StoppingMetric::RelativeSd,
            check_growth: 0.10,
            n_max: 100_000_000,
            byte_budget: 8 << 30,
        }
    }
}

impl StoppingConfig {
    pub fn new(epsilon: f64, alpha: f64, n_star: usize) -> Self {
        Self {
            epsilon,
            alpha,
            n_star,
            ..Self::default()
        }
    }

    pub fn with_metric(mut self, metric: StoppingMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_policy(mut self, policy: BatchPolicy) -> Self {
        self.batch_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(domain(format!("ε must be positive, got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain(format!("α must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.check_growth > 0.0 && self.check_growth.is_finite()) {
            return Err(domain("check_growth must be positive"));
        }
        if self.n_max < 2 {
            return Err(domain("n_max must be at least 2"));
        }
        self.batch_policy.validate()
    }
}

/// Outcome of evaluating a rule at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: usize,
    pub verdict: bool,
    /// Multivariate ESS for the multivariate rules, smallest component ESS for
    /// the univariate ones; `None` when the estimates are not yet usable.
    pub ess: Option<f64>,
    /// Log-volume of the confidence region (ellipsoid or box).
    pub log_volume: Option<f64>,
}

impl Checkpoint {
    fn failed(n: usize) -> Self {
        Self {
            n,
            verdict: false,
            ess: None,
            log_volume: None,
        }
    }
}

/// Evaluates the configured rule on the whole chain.
pub fn evaluate(chain: &ChainMatrix, config: &StoppingConfig) -> Checkpoint {
    match config.metric {
        StoppingMetric::RelativeSd | StoppingMetric::Absolute => evaluate_multivariate(chain, config),
        StoppingMetric::UnivariateBonferroni => evaluate_univariate(chain, config, true),
        StoppingMetric::UnivariateUncorrected => evaluate_univariate(chain, config, false),
    }
}

fn evaluate_multivariate(chain: &ChainMatrix, config: &StoppingConfig) -> Checkpoint {
    let (n, p) = (chain.n(), chain.p());
    let b = batch_size(n, config.batch_policy);
    let Ok(sigma) = mbm(chain, b) else {
        return Checkpoint::failed(n);
    };
    let Ok(lambda) = sample_covariance(chain) else {
        return Checkpoint::failed(n);
    };
    let (Some(ld_sigma), Some(ld_lambda)) = (sigma.log_det, lambda.log_det) else {
        return Checkpoint::failed(n);
    };
    let Ok(cutoff) = hotelling_cutoff(config.alpha, p, sigma.batch_count) else {
        return Checkpoint::failed(n);
    };
    let pf = p as f64;
    let log_volume = log_region_volume(n, p, cutoff, ld_sigma);
    let ess = multivariate_ess(&lambda, &sigma, n).ok();
    let yardstick = match config.metric {
        StoppingMetric::Absolute => 1.0,
        _ => (ld_lambda / (2.0 * pf)).exp(),
    };
    let verdict = n >= config.n_star && (log_volume / pf).exp() + 1.0 / n as f64 <= config.epsilon * yardstick;
    Checkpoint {
        n,
        verdict,
        ess,
        log_volume: Some(log_volume),
    }
}

fn evaluate_univariate(chain: &ChainMatrix, config: &StoppingConfig, bonferroni: bool) -> Checkpoint {
    let (n, p) = (chain.n(), chain.p());
    let b = batch_size(n, config.batch_policy);
    let (Ok(sigma2), Ok(lambda2)) = (ubm_diag(chain, b), sample_variances(chain)) else {
        return Checkpoint::failed(n);
    };
    let Ok(t) = univariate_t_quantile(config.alpha, p, n / b, bonferroni) else {
        return Checkpoint::failed(n);
    };
    let root_n = (n as f64).sqrt();
    let widths: Vec<f64> = sigma2.iter().map(|s| 2.0 * t * s.sqrt() / root_n).collect();
    let verdict = n >= config.n_star
        && widths
            .iter()
            .zip(&lambda2)
            .all(|(w, l)| w + 1.0 / n as f64 <= config.epsilon * l.sqrt());
    let ess = univariate_ess(chain, b)
        .ok()
        .map(|v| v.into_iter().fold(f64::INFINITY, f64::min));
    let log_volume = widths.iter().map(|w| w.ln()).sum::<f64>();
    Checkpoint {
        n,
        verdict,
        ess,
        log_volume: log_volume.is_finite().then_some(log_volume),
    }
}

/// The relative standard deviation fixed-volume rule.
pub fn check_relative_sd(chain: &ChainMatrix, config: &StoppingConfig) -> bool {
    let config = StoppingConfig {
        metric: StoppingMetric::RelativeSd,
        ..config.clone()
    };
    evaluate(chain, &config).verdict
}

/// The fixed-volume rule with an absolute tolerance.
pub fn check_absolute(chain: &ChainMatrix, config: &StoppingConfig) -> bool {
    let config = StoppingConfig {
        metric: StoppingMetric::Absolute,
        ..config.clone()
    };
    evaluate(chain, &config).verdict
}

/// Component-wise relative fixed-width rule.
pub fn check_univariate(chain: &ChainMatrix, config: &StoppingConfig, bonferroni: bool) -> bool {
    evaluate_univariate(chain, config, bonferroni).verdict
}

/// Smallest `n` with `⌊n / b_n⌋ > p`, the first length at which the mBM
/// estimate can be positive definite.
pub fn n_pos(p: usize, policy: BatchPolicy) -> Result<usize> {
    policy.validate()?;
    const SCAN_LIMIT: usize = 50_000_000;
    (1..=SCAN_LIMIT)
        .find(|&n| n / batch_size(n, policy) > p)
        .ok_or_else(|| domain(format!("no n ≤ {SCAN_LIMIT} gives more than {p} batches under {policy:?}")))
}

/// `max(n_pos, ⌈W_{p,α,ε}⌉)`.
pub fn default_nstar(p: usize, alpha: f64, eps: f64, policy: BatchPolicy) -> Result<usize> {
    let bound = min_ess(p, alpha, eps)?.ceil();
    Ok(n_pos(p, policy)?.max(bound as usize))
}

/// Source of draws for the sequential driver.
pub trait ChainSampler {
    /// Dimension of each draw.
    fn dim(&self) -> usize;

    /// Appends `rows` further draws (row-major) to `out`.
    fn extend(&mut self, rows: usize, out: &mut Vec<f64>) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    CriterionMet,
    NMaxReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingResult {
    pub terminated: bool,
    pub n_final: usize,
    pub ess_at_termination: Option<f64>,
    pub log_volume: Option<f64>,
    pub reason: TerminationReason,
    pub checkpoints: usize,
}

/// A finished sequential run and the chain it produced.
#[derive(Debug, Clone)]
pub struct SequentialRun {
    pub result: StoppingResult,
    pub chain: ChainMatrix,
}

fn next_checkpoint(n: usize, growth: f64) -> usize {
    n + ((growth * n as f64).ceil() as usize).max(1)
}

/// Runs the sampler, evaluating the rule at `n*` and then at checkpoints
/// growing by `check_growth`, until the rule passes or `n_max` (or the byte
/// budget) is reached.
pub fn run_sequential<S: ChainSampler + ?Sized>(sampler: &mut S, config: &StoppingConfig) -> Result<SequentialRun> {
    run_sequential_with(sampler, config, |chain, cfg| evaluate(chain, cfg))
}

/// [`run_sequential`] with a caller-supplied rule.
pub fn run_sequential_with<S, R>(sampler: &mut S, config: &StoppingConfig, mut rule: R) -> Result<SequentialRun>
where
    S: ChainSampler + ?Sized,
    R: FnMut(&ChainMatrix, &StoppingConfig) -> Checkpoint,
{
    config.validate()?;
    let p = sampler.dim();
    if p == 0 {
        return Err(domain("sampler dimension must be at least 1"));
    }
    let budget_rows = (config.byte_budget / (8 * p as u64)).min(usize::MAX as u64) as usize;
    let limit = config.n_max.min(budget_rows);
    let start = config.n_star.max(2);
    if start > limit {
        return Err(Error::ChainTooLarge {
            rows: start,
            dim: p,
            budget: config.byte_budget,
        });
    }

    let mut buf = Vec::with_capacity(start * p);
    sampler.extend(start, &mut buf)?;
    if buf.len() != start * p {
        return Err(Error::Sampler(format!("sampler returned {} values, expected {}", buf.len(), start * p)));
    }
    let mut chain = ChainMatrix::new(start, p, buf)?;
    let mut checkpoints = 0;
    loop {
        let cp = rule(&chain, config);
        checkpoints += 1;
        let n = chain.n();
        if cp.verdict || n >= limit {
            let reason = if cp.verdict {
                TerminationReason::CriterionMet
            } else {
                TerminationReason::NMaxReached
            };
            return Ok(SequentialRun {
                result: StoppingResult {
                    terminated: cp.verdict,
                    n_final: n,
                    ess_at_termination: cp.ess,
                    log_volume: cp.log_volume,
                    reason,
                    checkpoints,
                },
                chain,
            });
        }
        let target = next_checkpoint(n, config.check_growth).min(limit);
        let mut more = Vec::with_capacity((target - n) * p);
        sampler.extend(target - n, &mut more)?;
        if more.len() != (target - n) * p {
            return Err(Error::Sampler("sampler returned the wrong number of values".into()));
        }
        chain.append_rows(&more)?;
    }
}

/// Rule state persisted between invocations when the chain is produced by an
/// external program and re-read from disk each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeState {
    pub config: StoppingConfig,
    pub next_checkpoint: usize,
    pub terminated: bool,
    pub history: Vec<Checkpoint>,
}

/// What the external sampler should do next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ResumeOutcome {
    /// The chain is shorter than the next checkpoint.
    NeedMore { rows_available: usize, next_checkpoint: usize },
    /// Evaluated and failed; sample up to `next_checkpoint`.
    Continue { checkpoint: Checkpoint, next_checkpoint: usize },
    Terminated { checkpoint: Checkpoint },
}

impl ResumeState {
    pub fn new(config: StoppingConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            next_checkpoint: config.n_star.max(2),
            config,
            terminated: false,
            history: Vec::new(),
        })
    }

    /// Evaluates the rule on the full chain if it has reached the next
    /// checkpoint.
    pub fn step(&mut self, chain: &ChainMatrix) -> ResumeOutcome {
        if self.terminated {
            if let Some(last) = self.history.last() {
                return ResumeOutcome::Terminated { checkpoint: last.clone() };
            }
        }
        let n = chain.n();
        if n < self.next_checkpoint {
            return ResumeOutcome::NeedMore {
                rows_available: n,
                next_checkpoint: self.next_checkpoint,
            };
        }
        let cp = evaluate(chain, &self.config);
        self.history.push(cp.clone());
        if cp.verdict {
            self.terminated = true;
            ResumeOutcome::Terminated { checkpoint: cp }
        } else {
            self.next_checkpoint = next_checkpoint(n, self.config.check_growth);
            ResumeOutcome::Continue {
                checkpoint: cp,
                next_checkpoint: self.next_checkpoint,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Counter {
        p: usize,
        t: usize,
    }

    impl ChainSampler for Counter {
        fn dim(&self) -> usize {
            self.p
        }

        fn extend(&mut self, rows: usize, out: &mut Vec<f64>) -> Result<()> {
            for _ in 0..rows {
                for i in 0..self.p {
                    out.push(((self.t * 7 + i * 13) % 17) as f64);
                }
                self.t += 1;
            }
            Ok(())
        }
    }

    #[test]
    fn below_nstar_never_passes() {
        let mut s = Counter { p: 2, t: 0 };
        let mut buf = Vec::new();
        s.extend(500, &mut buf).unwrap();
        let chain = ChainMatrix::new(500, 2, buf).unwrap();
        let config = StoppingConfig::new(1e6, 0.1, 501);
        assert!(!check_relative_sd(&chain, &config));
        assert!(!check_absolute(&chain, &config));
        assert!(!check_univariate(&chain, &config, true));
        let config = StoppingConfig::new(1e6, 0.1, 500);
        assert!(check_relative_sd(&chain, &config));
        assert!(check_univariate(&chain, &config, false));
    }

    #[test]
    fn always_true_rule_stops_at_nstar() {
        let mut s = Counter { p: 3, t: 0 };
        let config = StoppingConfig::new(1e3, 0.1, 640);
        let run = run_sequential(&mut s, &config).unwrap();
        assert_eq!(run.result.n_final, 640);
        assert_eq!(run.result.reason, TerminationReason::CriterionMet);
        assert_eq!(run.result.checkpoints, 1);
        assert_eq!(run.chain.n(), 640);
    }

    #[test]
    fn growth_schedule_and_nmax() {
        let mut s = Counter { p: 1, t: 0 };
        let mut seen = Vec::new();
        let config = StoppingConfig {
            n_max: 1500,
            ..StoppingConfig::new(0.05, 0.1, 1000)
        };
        let run = run_sequential_with(&mut s, &config, |c, _| {
            seen.push(c.n());
            Checkpoint::failed(c.n())
        })
        .unwrap();
        assert_eq!(seen, vec![1000, 1100, 1210, 1331, 1465, 1500]);
        assert_eq!(run.result.reason, TerminationReason::NMaxReached);
        assert!(!run.result.terminated);
    }

    #[test]
    fn byte_budget_is_enforced() {
        let mut s = Counter { p: 4, t: 0 };
        let config = StoppingConfig {
            byte_budget: 1000 * 4 * 8 - 1,
            ..StoppingConfig::new(0.05, 0.1, 1000)
        };
        assert!(matches!(run_sequential(&mut s, &config), Err(Error::ChainTooLarge { .. })));
    }

    #[test]
    fn sampler_errors_propagate() {
        struct Broken;
        impl ChainSampler for Broken {
            fn dim(&self) -> usize {
                1
            }
            fn extend(&mut self, _: usize, _: &mut Vec<f64>) -> Result<()> {
                Err(Error::Sampler("boom".into()))
            }
        }
        assert!(matches!(
            run_sequential(&mut Broken, &StoppingConfig::default()),
            Err(Error::Sampler(_))
        ));
    }

    #[test]
    fn n_pos_scan() {
        assert_eq!(n_pos(5, BatchPolicy::Fixed(100)).unwrap(), 600);
        assert_eq!(n_pos(5, BatchPolicy::Exponent(0.5)).unwrap(), 24);
    }

    #[test]
    fn default_nstar_choices() {
        assert_eq!(default_nstar(5, 0.05, 0.05, BatchPolicy::Exponent(0.5)).unwrap(), 8605);
        assert_eq!(default_nstar(5, 0.05, 10.0, BatchPolicy::Exponent(0.5)).unwrap(), 24);
        assert_eq!(default_nstar(5, 0.05, 10.0, BatchPolicy::Fixed(100)).unwrap(), 600);
    }

    #[test]
    fn resume_state_walks_checkpoints() {
        let mut s = Counter { p: 2, t: 0 };
        let mut buf = Vec::new();
        s.extend(120, &mut buf).unwrap();
        let mut state = ResumeState::new(StoppingConfig::new(1e-9, 0.1, 100)).unwrap();
        let short = ChainMatrix::new(50, 2, buf[..100].to_vec()).unwrap();
        assert!(matches!(state.step(&short), ResumeOutcome::NeedMore { next_checkpoint: 100, .. }));
        let full = ChainMatrix::new(120, 2, buf.clone()).unwrap();
        match state.step(&full) {
            ResumeOutcome::Continue { next_checkpoint, .. } => assert_eq!(next_checkpoint, 132),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(state.history.len(), 1);
        state.config.epsilon = 1e6;
        assert!(matches!(state.step(&full), ResumeOutcome::NeedMore { .. }));
    }
}
