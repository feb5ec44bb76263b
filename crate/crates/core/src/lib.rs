//! Multivariate output analysis for Markov chain Monte Carlo.
//!
//! Given a chain of `n` draws of a `p`-vector, this crate estimates the
//! asymptotic covariance of the sample mean by multivariate batch means,
//! reports the multivariate effective sample size against the minimum ESS
//! needed for a target precision, builds confidence ellipsoids for the mean,
//! and decides when a running simulation can stop.
//!
//! ```
//! use multiess::{ess_report, simulate_var1, BatchPolicy, Var1Model};
//!
//! let model = Var1Model::benchmark();
//! let chain = simulate_var1(&model, 20_000, 1).unwrap();
//! let report = ess_report(&chain, BatchPolicy::default(), 0.05, 0.05).unwrap();
//! assert!(report.ess_multivariate < 20_000.0);
//! ```

pub mod chain;
pub mod cli;
pub mod error;
pub mod ess;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod regions;
pub mod samplers;
pub mod special;
pub mod stopping;

pub use chain::{column_means, load_chain, write_chain, ChainFormat, ChainMatrix, MeanVector};
pub use error::{Error, Result};
pub use ess::{eps_from_ess, ess_meets_threshold, ess_report, min_ess, multivariate_ess, univariate_ess, EssReport};
pub use estimators::{
    batch_size, log_det, mbm, mbm_with_policy, sample_covariance, sample_variances, ubm_diag, BatchPolicy,
    CovEstimate, CovMethod,
};
pub use experiments::{
    batch_sensitivity_study, coverage_study, relative_error_study, run_study, Method, StudyReport, StudySpec,
};
pub use linalg::{Cholesky, Matrix};
pub use regions::{
    hotelling_cutoff, log_region_volume, log_unit_ball_volume, ConfidenceRegion, RegionSummary, UnivariateBox,
};
pub use samplers::{
    ar1_cov, log_posterior_logistic, rwm_logistic, simulate_var1, var1_true_cov, IidGaussianSampler,
    InitialState, LogisticModel, RandomWalkMetropolis, Var1Model, Var1Sampler,
};
pub use special::{log_gamma, quantile, DistSpec};
pub use stopping::{
    default_nstar, evaluate, n_pos, run_sequential, ChainSampler, Checkpoint, ResumeOutcome, ResumeState,
    StoppingConfig, StoppingMetric, StoppingResult, TerminationReason,
};
