//! Replication studies: coverage of confidence regions, termination and ESS
//! statistics, relative error of the mBM estimator, and sensitivity to the
//! batch-size exponent.
//!
//! Replication `r` draws from seed `seed_base + r`, and replications run on
//! the rayon pool with results collected in replication order, so a rerun
//! reproduces every row exactly (timings excepted).
//!
//! Study files are TOML:
//!
//! ```toml
//! name = "var1-coverage"
//! study = "coverage"            # coverage | relative_error | batch_sensitivity
//! replications = 200
//! seed_base = 1000
//! alpha = 0.1
//! methods = ["mbm", "ubm_bonferroni", "ubm"]
//! # truth = [0.0, 0.0, 0.0, 0.0, 0.0]   # defaults to the model's analytic mean
//!
//! [model]
//! kind = "var1"                 # var1 | logistic | iid_gaussian
//! p = 5
//!
//! [design]
//! kind = "sequential"           # sequential | fixed
//! epsilons = [0.05, 0.02]
//! n_star = 1000
//! batch_exponent = 0.5          # or batch_fixed = 100
//! # nus = [0.3333, 0.5]         # batch_sensitivity only
//! # sizes = [10000, 100000]     # fixed designs
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{column_means, ChainMatrix};
use crate::error::{domain, Error, Result};
use crate::ess::{multivariate_ess, univariate_ess};
use crate::estimators::{batch_size, mbm, sample_covariance, BatchPolicy};
use crate::linalg::{largest_eigenvalue_psd, Matrix};
use crate::regions::{ConfidenceRegion, UnivariateBox};
use crate::samplers::{ar1_cov, logistic_sampler, IidGaussianSampler, InitialState, LogisticModel, Var1Model};
use crate::stopping::{run_sequential, ChainSampler, StoppingConfig, StoppingMetric};

/// Posterior-mean proxy for the logistic benchmark, obtained from a very long
/// run on the reference dataset.
pub const LOGISTIC_PROXY_MEAN: [f64; 5] = [0.5706, 0.7516, 1.0559, 0.4517, 0.6545];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mbm,
    UbmBonferroni,
    Ubm,
}

impl Method {
    pub fn metric(self) -> StoppingMetric {
        match self {
            Method::Mbm => StoppingMetric::RelativeSd,
            Method::UbmBonferroni => StoppingMetric::UnivariateBonferroni,
            Method::Ubm => StoppingMetric::UnivariateUncorrected,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Mbm => "mBM",
            Method::UbmBonferroni => "uBM-Bonferroni",
            Method::Ubm => "uBM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Coverage,
    RelativeError,
    BatchSensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Var1 {
        #[serde(default = "default_p")]
        p: usize,
        /// Diagonal of Φ; defaults to (.9, .5, .1, ..., .1).
        #[serde(default)]
        phi_diag: Option<Vec<f64>>,
        #[serde(default = "default_rho")]
        omega_rho: f64,
    },
    Logistic {
        /// CSV with `y, x1, ...`; the bundled dataset when absent.
        #[serde(default)]
        data: Option<PathBuf>,
        #[serde(default = "default_tau2")]
        tau2: f64,
        #[serde(default = "default_proposal")]
        proposal_sd: f64,
    },
    IidGaussian {
        #[serde(default = "default_p")]
        p: usize,
    },
}

fn default_p() -> usize {
    5
}
fn default_rho() -> f64 {
    0.9
}
fn default_tau2() -> f64 {
    1.0
}
fn default_proposal() -> f64 {
    0.35
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    Fixed {
        sizes: Vec<usize>,
        #[serde(default)]
        batch_exponent: Option<f64>,
        #[serde(default)]
        batch_fixed: Option<usize>,
    },
    Sequential {
        epsilons: Vec<f64>,
        #[serde(default = "default_nstar")]
        n_star: usize,
        #[serde(default)]
        batch_exponent: Option<f64>,
        #[serde(default)]
        batch_fixed: Option<usize>,
        #[serde(default = "default_growth")]
        check_growth: f64,
        #[serde(default = "default_nmax")]
        n_max: usize,
        #[serde(default)]
        nus: Option<Vec<f64>>,
    },
}

fn default_nstar() -> usize {
    1000
}
fn default_growth() -> f64 {
    0.10
}
fn default_nmax() -> usize {
    20_000_000
}

fn policy_from(exponent: Option<f64>, fixed: Option<usize>) -> Result<BatchPolicy> {
    let policy = match (exponent, fixed) {
        (Some(_), Some(_)) => return Err(Error::Config("set only one of batch_exponent, batch_fixed".into())),
        (Some(nu), None) => BatchPolicy::Exponent(nu),
        (None, Some(b)) => BatchPolicy::Fixed(b),
        (None, None) => BatchPolicy::default(),
    };
    policy.validate()?;
    Ok(policy)
}

impl Design {
    pub fn batch_policy(&self) -> Result<BatchPolicy> {
        match self {
            Design::Fixed {
                batch_exponent,
                batch_fixed,
                ..
            }
            | Design::Sequential {
                batch_exponent,
                batch_fixed,
                ..
            } => policy_from(*batch_exponent, *batch_fixed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub name: String,
    #[serde(default = "default_study")]
    pub study: StudyKind,
    pub model: ModelSpec,
    pub replications: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
    pub design: Design,
}

fn default_study() -> StudyKind {
    StudyKind::Coverage
}
fn default_alpha() -> f64 {
    0.1
}
fn default_methods() -> Vec<Method> {
    vec![Method::Mbm]
}

const TOP_KEYS: &[&str] = &[
    "name",
    "study",
    "model",
    "replications",
    "seed_base",
    "alpha",
    "methods",
    "truth",
    "design",
];
const MODEL_KEYS: &[&str] = &["kind", "p", "phi_diag", "omega_rho", "data", "tau2", "proposal_sd"];
const DESIGN_KEYS: &[&str] = &[
    "kind",
    "sizes",
    "epsilons",
    "n_star",
    "batch_exponent",
    "batch_fixed",
    "check_growth",
    "n_max",
    "nus",
];

impl StudySpec {
    /// Parses and validates a TOML study file. Unknown keys are all reported
    /// together.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut unknown = Vec::new();
        for key in table.keys() {
            if !TOP_KEYS.contains(&key.as_str()) {
                unknown.push(key.clone());
            }
        }
        for (section, allowed) in [("model", MODEL_KEYS), ("design", DESIGN_KEYS)] {
            if let Some(toml::Value::Table(t)) = table.get(section) {
                for key in t.keys() {
                    if !allowed.contains(&key.as_str()) {
                        unknown.push(format!("{section}.{key}"));
                    }
                }
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let spec: StudySpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec = Self::from_toml_str(&text)?;
        // relative data paths resolve against the study file
        if let ModelSpec::Logistic { data: Some(d), .. } = &mut spec.model {
            if d.is_relative() {
                if let Some(dir) = path.parent() {
                    *d = dir.join(&*d);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        self.design.batch_policy()?;
        match &self.design {
            Design::Fixed { sizes, .. } if sizes.is_empty() => {
                return Err(Error::Config("design.sizes must not be empty".into()))
            }
            Design::Sequential { epsilons, .. } if epsilons.is_empty() => {
                return Err(Error::Config("design.epsilons must not be empty".into()))
            }
            Design::Sequential { epsilons, .. } if epsilons.iter().any(|e| !(*e > 0.0)) => {
                return Err(Error::Config("design.epsilons must be positive".into()))
            }
            _ => {}
        }
        if self.study == StudyKind::BatchSensitivity {
            match &self.design {
                Design::Sequential { nus: Some(nus), .. } if !nus.is_empty() => {}
                _ => {
                    return Err(Error::Config(
                        "batch_sensitivity needs a sequential design with design.nus".into(),
                    ))
                }
            }
        }
        if self.study == StudyKind::RelativeError && !matches!(self.model, ModelSpec::Var1 { .. }) {
            return Err(Error::Config("relative_error needs a var1 model".into()));
        }
        Ok(())
    }
}

/// A model built from its spec, shareable across replications.
#[derive(Debug, Clone)]
pub enum StudyModel {
    Var1(Arc<Var1Model>),
    Logistic(Arc<LogisticModel>),
    IidGaussian(usize),
}

impl StudyModel {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::Var1 { p, phi_diag, omega_rho } => {
                let model = match phi_diag {
                    None if *omega_rho == 0.9 && *p >= 2 => Var1Model::benchmark_dim(*p),
                    _ => {
                        let diag = match phi_diag {
                            Some(d) if d.len() == *p => d.clone(),
                            Some(d) => {
                                return Err(Error::Config(format!(
                                    "model.phi_diag has {} entries, p = {p}",
                                    d.len()
                                )))
                            }
                            None => {
                                let mut d = vec![0.1; *p];
                                d[0] = 0.9;
                                if *p > 1 {
                                    d[1] = 0.5;
                                }
                                d
                            }
                        };
                        Var1Model::new(Matrix::diag(&diag), ar1_cov(*omega_rho, *p, 1.0)?)?
                    }
                };
                Ok(StudyModel::Var1(Arc::new(model)))
            }
            ModelSpec::Logistic { data, tau2, proposal_sd } => {
                let model = match data {
                    Some(path) => {
                        let file = std::io::BufReader::new(std::fs::File::open(path)?);
                        LogisticModel::from_table(file, *tau2, *proposal_sd)?
                    }
                    None => {
                        let mut m = LogisticModel::bundled();
                        m.tau2 = *tau2;
                        m.proposal_sd = *proposal_sd;
                        m
                    }
                };
                Ok(StudyModel::Logistic(Arc::new(model)))
            }
            ModelSpec::IidGaussian { p } => {
                if *p == 0 {
                    return Err(Error::Config("model.p must be at least 1".into()));
                }
                Ok(StudyModel::IidGaussian(*p))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StudyModel::Var1(m) => m.p(),
            StudyModel::Logistic(m) => m.dim(),
            StudyModel::IidGaussian(p) => *p,
        }
    }

    /// Known mean, if the model has one.
    pub fn analytic_mean(&self) -> Option<Vec<f64>> {
        match self {
            StudyModel::Var1(_) | StudyModel::IidGaussian(_) => Some(vec![0.0; self.dim()]),
            StudyModel::Logistic(_) => None,
        }
    }

    pub fn sampler(&self, seed: u64) -> Result<Box<dyn ChainSampler + Send>> {
        Ok(match self {
            StudyModel::Var1(m) => Box::new(m.sampler(seed)),
            StudyModel::Logistic(m) => Box::new(logistic_sampler(Arc::clone(m), seed, InitialState::PriorDraw)?),
            StudyModel::IidGaussian(p) => Box::new(IidGaussianSampler::new(*p, seed)),
        })
    }

    pub fn simulate(&self, n: usize, seed: u64) -> Result<ChainMatrix> {
        let mut s = self.sampler(seed)?;
        let mut data = Vec::with_capacity(n * self.dim());
        s.extend(n, &mut data)?;
        ChainMatrix::new(n, self.dim(), data)
    }
}

/// One (replication, setting, method) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    pub setting: String,
    pub method: Method,
    pub n: usize,
    pub terminated: bool,
    pub ess: Option<f64>,
    pub volume_root: Option<f64>,
    pub covered: Option<bool>,
    pub relative_error: Option<f64>,
    pub largest_eigenvalue: Option<f64>,
    pub seconds: Option<f64>,
}

/// Mean and standard error (`sd/√count`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let count = values.len();
        if count == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let se = if count > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, se, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub setting: String,
    pub method: Method,
    pub replications: usize,
    pub termination: Option<Stat>,
    pub ess: Option<Stat>,
    pub coverage: Option<Stat>,
    pub volume_root: Option<Stat>,
    pub relative_error: Option<Stat>,
    pub median_relative_error: Option<f64>,
    pub largest_eigenvalue: Option<Stat>,
    pub seconds: Option<Stat>,
    pub terminated_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub name: String,
    pub study: StudyKind,
    pub replications: usize,
    pub alpha: f64,
    pub seed_base: u64,
    /// `analytic`, `proxy`, or `user`.
    pub truth_source: String,
    pub truth: Option<Vec<f64>>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip)]
    pub rows: Vec<ReplicationRow>,
}

impl StudyReport {
    fn assemble(spec: &StudySpec, truth_source: &str, truth: Option<Vec<f64>>, rows: Vec<ReplicationRow>) -> Self {
        let mut keys: Vec<(String, Method)> = Vec::new();
        for r in &rows {
            if !keys.iter().any(|(s, m)| s == &r.setting && *m == r.method) {
                keys.push((r.setting.clone(), r.method));
            }
        }
        let aggregates = keys
            .into_iter()
            .map(|(setting, method)| {
                let group: Vec<&ReplicationRow> =
                    rows.iter().filter(|r| r.setting == setting && r.method == method).collect();
                aggregate(setting, method, &group)
            })
            .collect();
        Self {
            name: spec.name.clone(),
            study: spec.study,
            replications: spec.replications,
            alpha: spec.alpha,
            seed_base: spec.seed_base,
            truth_source: truth_source.to_string(),
            truth,
            aggregates,
            rows,
        }
    }

    pub fn aggregate(&self, setting: &str, method: Method) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.setting == setting && a.method == method)
    }

    /// Per-replication rows as CSV.
    pub fn write_rows_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "replication,seed,setting,method,n,terminated,ess,volume_root,covered,relative_error,largest_eigenvalue,seconds"
        )?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.replication,
                r.seed,
                r.setting,
                r.method.label(),
                r.n,
                r.terminated,
                opt(r.ess),
                opt(r.volume_root),
                r.covered.map(|c| c.to_string()).unwrap_or_default(),
                opt(r.relative_error),
                opt(r.largest_eigenvalue),
                opt(r.seconds),
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Plain-text table: one block per statistic, settings as rows, methods
    /// as columns, standard errors in parentheses.
    pub fn render_table(&self) -> String {
        let mut settings: Vec<&str> = Vec::new();
        let mut methods: Vec<Method> = Vec::new();
        for a in &self.aggregates {
            if !settings.contains(&a.setting.as_str()) {
                settings.push(&a.setting);
            }
            if !methods.contains(&a.method) {
                methods.push(a.method);
            }
        }
        type Pick = fn(&Aggregate) -> Option<Stat>;
        let blocks: [(&str, Pick); 6] = [
            ("Termination iteration", |a| a.termination),
            ("Effective sample size", |a| a.ess),
            ("Volume to the pth root", |a| a.volume_root),
            ("Coverage probability", |a| a.coverage),
            ("Relative error", |a| a.relative_error),
            ("Largest eigenvalue of Sigma_n", |a| a.largest_eigenvalue),
        ];
        let mut out = format!(
            "{} ({} replications, alpha = {}, truth: {})\n",
            self.name, self.replications, self.alpha, self.truth_source
        );
        for (title, pick) in blocks {
            if !self.aggregates.iter().any(|a| pick(a).is_some()) {
                continue;
            }
            out.push_str(&format!("\n{title}\n{:<28}", "setting"));
            for m in &methods {
                out.push_str(&format!("{:>26}", m.label()));
            }
            out.push('\n');
            for s in &settings {
                out.push_str(&format!("{s:<28}"));
                for m in &methods {
                    let cell = self
                        .aggregate(s, *m)
                        .and_then(pick)
                        .map(|st| format!("{} ({})", fmt_sig(st.mean), fmt_sig(st.se)))
                        .unwrap_or_else(|| "-".into());
                    out.push_str(&format!("{cell:>26}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 0.001 {
        format!("{v:.4}")
    } else {
        format!("{v:.2e}")
    }
}

fn aggregate(setting: String, method: Method, group: &[&ReplicationRow]) -> Aggregate {
    let collect = |f: &dyn Fn(&ReplicationRow) -> Option<f64>| -> Vec<f64> { group.iter().filter_map(|r| f(r)).collect() };
    let rel = collect(&|r| r.relative_error);
    let median = if rel.is_empty() {
        None
    } else {
        let mut s = rel.clone();
        s.sort_by(|a, b| a.total_cmp(b));
        let m = s.len() / 2;
        Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
    };
    Aggregate {
        setting,
        method,
        replications: group.len(),
        termination: Stat::from_values(&collect(&|r| Some(r.n as f64))),
        ess: Stat::from_values(&collect(&|r| r.ess)),
        coverage: Stat::from_values(&collect(&|r| r.covered.map(|c| if c { 1.0 } else { 0.0 }))),
        volume_root: Stat::from_values(&collect(&|r| r.volume_root)),
        relative_error: Stat::from_values(&rel),
        median_relative_error: median,
        largest_eigenvalue: Stat::from_values(&collect(&|r| r.largest_eigenvalue)),
        seconds: Stat::from_values(&collect(&|r| r.seconds)),
        terminated_fraction: group.iter().filter(|r| r.terminated).count() as f64 / group.len().max(1) as f64,
    }
}

fn resolve_truth(spec: &StudySpec, model: &StudyModel) -> Result<(String, Vec<f64>)> {
    let (source, truth) = match (&spec.truth, model.analytic_mean()) {
        (Some(t), _) => ("user".to_string(), t.clone()),
        (None, Some(t)) => ("analytic".to_string(), t),
        (None, None) => match model {
            StudyModel::Logistic(_) => ("proxy".to_string(), LOGISTIC_PROXY_MEAN.to_vec()),
            _ => return Err(Error::Config("truth is required for this model".into())),
        },
    };
    if truth.len() != model.dim() {
        return Err(Error::Config(format!(
            "truth has {} entries, model dimension is {}",
            truth.len(),
            model.dim()
        )));
    }
    Ok((source, truth))
}

fn run_replications<F>(spec: &StudySpec, f: F) -> Result<Vec<ReplicationRow>>
where
    F: Fn(usize, u64) -> Result<Vec<ReplicationRow>> + Sync,
{
    let per_rep: Vec<Result<Vec<ReplicationRow>>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let seed = spec.seed_base.wrapping_add(r as u64);
            f(r, seed).map_err(|e| Error::Replication {
                replication: r,
                source: Box::new(e),
            })
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    Ok(rows)
}

fn setting_n(n: usize) -> String {
    format!("n={n}")
}

fn setting_eps(eps: f64) -> String {
    format!("eps={eps}")
}

/// Region membership, volume root and ESS for a finished chain.
fn assess(chain: &ChainMatrix, method: Method, policy: BatchPolicy, alpha: f64, truth: &[f64]) -> Result<(Option<bool>, Option<f64>, Option<f64>)> {
    let b = batch_size(chain.n(), policy);
    match method {
        Method::Mbm => {
            let shape = mbm(chain, b)?;
            let ess = sample_covariance(chain)
                .ok()
                .and_then(|l| multivariate_ess(&l, &shape, chain.n()).ok());
            match ConfidenceRegion::new(column_means(chain), shape, chain.n(), alpha) {
                Ok(region) => Ok((Some(region.contains(truth)?), Some(region.volume_root()), ess)),
                // not yet positive definite: the region is unbounded and covers
                Err(Error::NotPositiveDefinite) | Err(Error::InsufficientBatches { .. }) => Ok((Some(true), None, ess)),
                Err(e) => Err(e),
            }
        }
        Method::UbmBonferroni | Method::Ubm => {
            let bx = UnivariateBox::from_chain(chain, b, alpha, method == Method::UbmBonferroni)?;
            let ess = univariate_ess(chain, b)?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            Ok((Some(bx.contains(truth)?), Some(bx.volume_root()), Some(ess)))
        }
    }
}

/// Coverage of the confidence regions at fixed sizes or at termination of
/// the sequential rules.
pub fn coverage_study(spec: &StudySpec) -> Result<StudyReport> {
    spec.validate()?;
    let model = StudyModel::build(&spec.model)?;
    let (source, truth) = resolve_truth(spec, &model)?;
    let policy = spec.design.batch_policy()?;
    let rows = match &spec.design {
        Design::Fixed { sizes, .. } => {
            let max_n = *sizes.iter().max().expect("validated non-empty");
            run_replications(spec, |r, seed| {
                let full = model.simulate(max_n, seed)?;
                let mut rows = Vec::new();
                for &n in sizes {
                    let chain = full.prefix(n)?;
                    for &method in &spec.methods {
                        let (covered, volume_root, ess) = assess(&chain, method, policy, spec.alpha, &truth)?;
                        rows.push(ReplicationRow {
                            replication: r,
                            seed,
                            setting: setting_n(n),
                            method,
                            n,
                            terminated: true,
                            ess,
                            volume_root,
                            covered,
                            relative_error: None,
                            largest_eigenvalue: None,
                            seconds: None,
                        });
                    }
                }
                Ok(rows)
            })?
        }
        Design::Sequential {
            epsilons,
            n_star,
            check_growth,
            n_max,
            ..
        } => run_replications(spec, |r, seed| {
            let mut rows = Vec::new();
            for &eps in epsilons {
                for &method in &spec.methods {
                    let config = StoppingConfig {
                        epsilon: eps,
                        alpha: spec.alpha,
                        n_star: *n_star,
                        batch_policy: policy,
                        metric: method.metric(),
                        check_growth: *check_growth,
                        n_max: *n_max,
                        ..StoppingConfig::default()
                    };
                    let mut sampler = model.sampler(seed)?;
                    let run = run_sequential(sampler.as_mut(), &config)?;
                    let (covered, volume_root, _) = assess(&run.chain, method, policy, spec.alpha, &truth)?;
                    rows.push(ReplicationRow {
                        replication: r,
                        seed,
                        setting: setting_eps(eps),
                        method,
                        n: run.result.n_final,
                        terminated: run.result.terminated,
                        ess: run.result.ess_at_termination,
                        volume_root,
                        covered,
                        relative_error: None,
                        largest_eigenvalue: None,
                        seconds: None,
                    });
                }
            }
            Ok(rows)
        })?,
    };
    Ok(StudyReport::assemble(spec, &source, Some(truth), rows))
}

/// Relative Frobenius error `‖Σ_n - Σ‖/‖Σ‖` of mBM on a VAR(1) model at each
/// size, with the wall-clock time of each estimate.
pub fn relative_error_study(spec: &StudySpec, sizes: &[usize]) -> Result<StudyReport> {
    spec.validate()?;
    if sizes.is_empty() {
        return Err(Error::Config("relative_error needs at least one size".into()));
    }
    let model = StudyModel::build(&spec.model)?;
    let StudyModel::Var1(var1) = &model else {
        return Err(Error::Config("relative_error needs a var1 model".into()));
    };
    let policy = spec.design.batch_policy()?;
    let sigma = &var1.sigma_true;
    let sigma_norm = sigma.frobenius_norm();
    let max_n = *sizes.iter().max().expect("non-empty");
    let rows = run_replications(spec, |r, seed| {
        let full = model.simulate(max_n, seed)?;
        let mut rows = Vec::new();
        for &n in sizes {
            let chain = full.prefix(n)?;
            let started = Instant::now();
            let est = mbm(&chain, batch_size(n, policy))?;
            let seconds = started.elapsed().as_secs_f64();
            rows.push(ReplicationRow {
                replication: r,
                seed,
                setting: setting_n(n),
                method: Method::Mbm,
                n,
                terminated: true,
                ess: None,
                volume_root: None,
                covered: None,
                relative_error: Some(est.matrix.sub(sigma).frobenius_norm() / sigma_norm),
                largest_eigenvalue: None,
                seconds: Some(seconds),
            });
        }
        Ok(rows)
    })?;
    Ok(StudyReport::assemble(spec, "analytic", None, rows))
}

/// Coverage at termination of the relative-sd rule for each batch exponent
/// `ν` and tolerance `ε`, with the largest eigenvalue of `Σ_n` recorded.
pub fn batch_sensitivity_study(spec: &StudySpec, nus: &[f64]) -> Result<StudyReport> {
    spec.validate()?;
    let Design::Sequential {
        epsilons,
        n_star,
        check_growth,
        n_max,
        ..
    } = &spec.design
    else {
        return Err(Error::Config("batch_sensitivity needs a sequential design".into()));
    };
    if nus.is_empty() {
        return Err(Error::Config("batch_sensitivity needs at least one exponent".into()));
    }
    for &nu in nus {
        BatchPolicy::Exponent(nu).validate()?;
    }
    let model = StudyModel::build(&spec.model)?;
    let (source, truth) = resolve_truth(spec, &model)?;
    let rows = run_replications(spec, |r, seed| {
        let mut rows = Vec::new();
        for &nu in nus {
            let policy = BatchPolicy::Exponent(nu);
            for &eps in epsilons {
                let config = StoppingConfig {
                    epsilon: eps,
                    alpha: spec.alpha,
                    n_star: *n_star,
                    batch_policy: policy,
                    metric: StoppingMetric::RelativeSd,
                    check_growth: *check_growth,
                    n_max: *n_max,
                    ..StoppingConfig::default()
                };
                let mut sampler = model.sampler(seed)?;
                let run = run_sequential(sampler.as_mut(), &config)?;
                let (covered, volume_root, _) = assess(&run.chain, Method::Mbm, policy, spec.alpha, &truth)?;
                let shape = mbm(&run.chain, batch_size(run.chain.n(), policy))?;
                rows.push(ReplicationRow {
                    replication: r,
                    seed,
                    setting: sensitivity_setting(nu, eps),
                    method: Method::Mbm,
                    n: run.result.n_final,
                    terminated: run.result.terminated,
                    ess: run.result.ess_at_termination,
                    volume_root,
                    covered,
                    relative_error: None,
                    largest_eigenvalue: Some(largest_eigenvalue_psd(&shape.matrix)),
                    seconds: None,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(StudyReport::assemble(spec, &source, Some(truth), rows))
}

/// Setting label used by [`batch_sensitivity_study`].
pub fn sensitivity_setting(nu: f64, eps: f64) -> String {
    format!("nu={nu:.4},eps={eps}")
}

/// Runs whichever study the spec names.
pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    match spec.study {
        StudyKind::Coverage => coverage_study(spec),
        StudyKind::RelativeError => match &spec.design {
            Design::Fixed { sizes, .. } => relative_error_study(spec, sizes),
            Design::Sequential { .. } => Err(Error::Config("relative_error needs a fixed design".into())),
        },
        StudyKind::BatchSensitivity => match &spec.design {
            Design::Sequential { nus: Some(nus), .. } => batch_sensitivity_study(spec, nus),
            _ => Err(domain("batch_sensitivity needs design.nus")),
        },
    }
}

/// Distinct setting labels in first-seen order.
pub fn settings(report: &StudyReport) -> Vec<String> {
    let mut seen = BTreeSet::new();
    report
        .aggregates
        .iter()
        .filter(|a| seen.insert(a.setting.clone()))
        .map(|a| a.setting.clone())
        .collect()
}
