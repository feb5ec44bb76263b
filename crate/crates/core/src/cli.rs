//! Command-line front end: `ess`, `confregion`, `stop`, `replicate`.
//!
//! Exit codes: 0 success, 1 user error (bad flags, unreadable or malformed
//! input, invalid study file), 2 numerical failure (covariance not positive
//! definite, too few batches, rule not met before `n_max`).

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::chain::{load_chain, ChainFormat, ChainMatrix};
use crate::error::{Error, Result};
use crate::ess::{ess_report, min_ess};
use crate::estimators::BatchPolicy;
use crate::experiments::{run_study, StudySpec};
use crate::regions::{ConfidenceRegion, RegionSummary};
use crate::samplers::{logistic_sampler, IidGaussianSampler, InitialState, LogisticModel, Var1Model};
use crate::stopping::{
    default_nstar, evaluate, run_sequential, ChainSampler, ResumeOutcome, ResumeState, StoppingConfig,
    StoppingMetric, StoppingResult, TerminationReason,
};

/// Environment variable overriding the replicate work-pool size.
pub const THREADS_ENV: &str = "MULTIESS_THREADS";

pub const NOT_PD_MESSAGE: &str = "increase n: covariance estimate not positive definite (a_n ≤ p)";

#[derive(Debug, Parser)]
#[command(name = "multiess", version, about = "Multivariate output analysis for MCMC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multivariate and per-component ESS against the minimum ESS.
    Ess(EssArgs),
    /// Confidence ellipsoid for the mean of a chain.
    Confregion(RegionArgs),
    /// Run a sampler under a sequential stopping rule, or resume a rule on an
    /// externally produced chain.
    Stop(StopArgs),
    /// Run a replication study described by a TOML file.
    Replicate(ReplicateArgs),
}

/// `nu=<exponent>` (b = ⌊n^ν⌋) or `fixed=<b>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchArg(pub BatchPolicy);

impl FromStr for BatchArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, value) = s
            .split_once('=')
            .ok_or_else(|| format!("expected nu=<exponent> or fixed=<size>, got '{s}'"))?;
        let policy = match kind.trim() {
            "nu" => BatchPolicy::Exponent(value.trim().parse().map_err(|e| format!("bad exponent: {e}"))?),
            "fixed" => BatchPolicy::Fixed(value.trim().parse().map_err(|e| format!("bad batch size: {e}"))?),
            other => return Err(format!("unknown batch policy '{other}'")),
        };
        policy.validate().map_err(|e| e.to_string())?;
        Ok(BatchArg(policy))
    }
}

#[derive(Debug, Args)]
pub struct EssArgs {
    /// Chain file (CSV or TSV, one draw per row). Omit to print only the
    /// minimum ESS for `-p`.
    pub chain: Option<PathBuf>,
    /// Dimension for the threshold-only mode.
    #[arg(short = 'p', long = "dim")]
    pub dim: Option<usize>,
    #[arg(long, default_value = "nu=0.5")]
    pub batch: BatchArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    pub chain: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value = "nu=0.5")]
    pub batch: BatchArg,
    /// File of direction vectors, one per row, for Scheffé intervals.
    #[arg(long)]
    pub directions: Option<PathBuf>,
    /// Emit the boundary of the 2-D marginal region for components i and j
    /// (0-based).
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pub ellipse: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Write the boundary CSV here instead of stdout.
    #[arg(long)]
    pub ellipse_out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Var1,
    Iid,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    RelativeSd,
    Absolute,
    UbmBonferroni,
    Ubm,
}

impl From<RuleArg> for StoppingMetric {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::RelativeSd => StoppingMetric::RelativeSd,
            RuleArg::Absolute => StoppingMetric::Absolute,
            RuleArg::UbmBonferroni => StoppingMetric::UnivariateBonferroni,
            RuleArg::Ubm => StoppingMetric::UnivariateUncorrected,
        }
    }
}

/// `auto` or an explicit `n*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NStarArg {
    Auto,
    Fixed(usize),
}

impl FromStr for NStarArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            Ok(NStarArg::Auto)
        } else {
            s.parse().map(NStarArg::Fixed).map_err(|e| format!("expected 'auto' or an integer: {e}"))
        }
    }
}

#[derive(Debug, Args)]
pub struct StopArgs {
    /// Built-in model to sample from.
    #[arg(long, conflicts_with = "chain")]
    pub model: Option<ModelArg>,
    /// Dimension for the var1 and iid models.
    #[arg(short = 'p', long = "dim", default_value_t = 5)]
    pub dim: usize,
    /// Required with --model.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Externally produced chain file.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Sidecar JSON holding rule state between invocations (with --chain).
    #[arg(long, requires = "chain")]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "relative-sd")]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value = "1000")]
    pub nstar: NStarArg,
    #[arg(long, default_value = "nu=0.5")]
    pub batch: BatchArg,
    #[arg(long, default_value_t = 10_000_000)]
    pub n_max: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// Study file (TOML).
    pub config: PathBuf,
    /// Directory for `<name>.rows.csv` and `<name>.summary.json`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotPositiveDefinite
        | Error::InsufficientBatches { .. }
        | Error::InsufficientData(_)
        | Error::NotStationary { .. }
        | Error::Sampler(_) => 2,
        Error::Replication { source, .. } => exit_code(source),
        _ => 1,
    }
}

/// Message printed for an error.
pub fn error_message(err: &Error) -> String {
    match err {
        Error::NotPositiveDefinite | Error::InsufficientBatches { .. } => format!("{NOT_PD_MESSAGE}: {err}"),
        Error::Replication { source, .. } if matches!(**source, Error::NotPositiveDefinite) => {
            format!("{err}; {NOT_PD_MESSAGE}")
        }
        _ => err.to_string(),
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {}", error_message(&e));
            exit_code(&e)
        }
    }
}

/// Runs a parsed command, writing the report to `out`. Returns the exit code
/// for outcomes that produce a report but still count as failures.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Ess(a) => cmd_ess(a, out),
        Command::Confregion(a) => cmd_confregion(a, out),
        Command::Stop(a) => cmd_stop(a, out),
        Command::Replicate(a) => cmd_replicate(a, out),
    }
}

fn check_alpha_eps(alpha: f64, eps: Option<f64>) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(e) = eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Config(format!("--eps must be positive, got {e}")));
        }
    }
    Ok(())
}

pub fn read_chain(path: &Path) -> Result<ChainMatrix> {
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    load_chain(BufReader::new(file), ChainFormat::from_path(path))
}

#[derive(Debug, Serialize)]
struct ThresholdJson {
    p: usize,
    alpha: f64,
    epsilon: f64,
    min_ess: f64,
}

fn cmd_ess(a: &EssArgs, out: &mut dyn Write) -> Result<i32> {
    check_alpha_eps(a.alpha, Some(a.eps))?;
    let Some(path) = &a.chain else {
        let p = a
            .dim
            .ok_or_else(|| Error::Config("give a chain file or -p for the threshold alone".into()))?;
        let w = min_ess(p, a.alpha, a.eps)?;
        if a.json {
            let j = ThresholdJson {
                p,
                alpha: a.alpha,
                epsilon: a.eps,
                min_ess: w,
            };
            writeln!(out, "{}", to_json(&j)?)?;
        } else {
            writeln!(out, "minimum ESS (p = {p}, alpha = {}, eps = {}): {}", a.alpha, a.eps, w.ceil())?;
        }
        return Ok(0);
    };
    let chain = read_chain(path)?;
    if let Some(p) = a.dim {
        if p != chain.p() {
            return Err(Error::Config(format!("-p {p} but the chain has {} columns", chain.p())));
        }
    }
    let report = ess_report(&chain, a.batch.0, a.alpha, a.eps)?;
    if a.json {
        writeln!(out, "{}", to_json(&report)?)?;
        return Ok(0);
    }
    writeln!(
        out,
        "n = {}, p = {}, batch size = {}, batches = {}",
        report.n, report.p, report.batch_size, report.batch_count
    )?;
    writeln!(out, "multivariate ESS: {:.1}", report.ess_multivariate)?;
    let uni: Vec<String> = report.ess_univariate.iter().map(|e| format!("{e:.1}")).collect();
    writeln!(out, "univariate ESS: {}", uni.join(" "))?;
    writeln!(
        out,
        "minimum ESS (p = {}, alpha = {}, eps = {}): {}",
        report.p,
        report.alpha,
        report.epsilon,
        report.min_ess.ceil()
    )?;
    writeln!(
        out,
        "verdict: {}",
        if report.sufficient {
            "ESS >= minimum ESS, enough samples"
        } else {
            "ESS < minimum ESS, keep sampling"
        }
    )?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct RegionJson {
    #[serde(flatten)]
    summary: RegionSummary,
    scheffe: Vec<ScheffeJson>,
    ellipse: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Serialize)]
struct ScheffeJson {
    direction: Vec<f64>,
    lower: f64,
    upper: f64,
}

fn cmd_confregion(a: &RegionArgs, out: &mut dyn Write) -> Result<i32> {
    check_alpha_eps(a.alpha, None)?;
    let chain = read_chain(&a.chain)?;
    let directions = match &a.directions {
        Some(path) => {
            let d = read_chain(path)?;
            if d.p() != chain.p() {
                return Err(Error::Config(format!(
                    "directions have {} entries, the chain has {} columns",
                    d.p(),
                    chain.p()
                )));
            }
            d.rows().map(|r| r.to_vec()).collect()
        }
        None => Vec::new(),
    };
    if let Some(ij) = &a.ellipse {
        if ij[0] >= chain.p() || ij[1] >= chain.p() || ij[0] == ij[1] {
            return Err(Error::Config(format!(
                "--ellipse needs two distinct components below {}",
                chain.p()
            )));
        }
        if a.resolution < 3 {
            return Err(Error::Config("--resolution must be at least 3".into()));
        }
    }
    let region = ConfidenceRegion::from_chain(&chain, a.batch.0, a.alpha)?;
    let mut scheffe = Vec::new();
    for d in directions {
        let (lower, upper) = region.scheffe_interval(&d)?;
        scheffe.push(ScheffeJson { direction: d, lower, upper });
    }
    let ellipse = match &a.ellipse {
        Some(ij) => Some(region.ellipse_boundary(ij[0], ij[1], a.resolution)?),
        None => None,
    };
    let summary = region.summary();
    if a.json {
        let j = RegionJson { summary, scheffe, ellipse };
        writeln!(out, "{}", to_json(&j)?)?;
        return Ok(0);
    }
    writeln!(out, "n = {}, p = {}, alpha = {}", summary.n, summary.p, summary.alpha)?;
    writeln!(out, "cutoff (T^2 quantile): {}", summary.cutoff)?;
    writeln!(out, "log volume: {}", summary.log_volume)?;
    writeln!(out, "volume^(1/p): {}", summary.volume_root)?;
    for s in &scheffe {
        let d: Vec<String> = s.direction.iter().map(|v| v.to_string()).collect();
        writeln!(out, "scheffe [{}]: ({}, {})", d.join(" "), s.lower, s.upper)?;
    }
    if let Some(points) = ellipse {
        match &a.ellipse_out {
            Some(path) => {
                let mut f = std::io::BufWriter::new(File::create(path)?);
                write_points(&mut f, &points)?;
                writeln!(out, "boundary: {} points written to {}", points.len(), path.display())?;
            }
            None => write_points(out, &points)?,
        }
    }
    Ok(0)
}

fn write_points(out: &mut dyn Write, points: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "x,y")?;
    for (x, y) in points {
        writeln!(out, "{x},{y}")?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct StopJson {
    model: String,
    seed: u64,
    p: usize,
    n_star: usize,
    epsilon: f64,
    alpha: f64,
    #[serde(flatten)]
    result: StoppingResult,
    volume_root: Option<f64>,
}

fn cmd_stop(a: &StopArgs, out: &mut dyn Write) -> Result<i32> {
    check_alpha_eps(a.alpha, Some(a.eps))?;
    if let Some(chain_path) = &a.chain {
        return cmd_stop_external(a, chain_path, out);
    }
    let model = a
        .model
        .ok_or_else(|| Error::Config("give --model (with --seed) or --chain".into()))?;
    let seed = a
        .seed
        .ok_or_else(|| Error::Config("--seed is required with --model".into()))?;
    let mut sampler: Box<dyn ChainSampler> = match model {
        ModelArg::Var1 => {
            if a.dim < 2 {
                return Err(Error::Config("the var1 model needs -p of at least 2".into()));
            }
            Box::new(Arc::new(Var1Model::benchmark_dim(a.dim)).sampler(seed))
        }
        ModelArg::Iid => {
            if a.dim == 0 {
                return Err(Error::Config("-p must be at least 1".into()));
            }
            Box::new(IidGaussianSampler::new(a.dim, seed))
        }
        ModelArg::Logistic => Box::new(logistic_sampler(
            Arc::new(LogisticModel::bundled()),
            seed,
            InitialState::PriorDraw,
        )?),
    };
    let p = sampler.dim();
    let config = stop_config(a, p)?;
    let run = run_sequential(sampler.as_mut(), &config)?;
    let r = run.result;
    let volume_root = r.log_volume.map(|lv| (lv / p as f64).exp());
    if a.json {
        let j = StopJson {
            model: format!("{model:?}").to_lowercase(),
            seed,
            p,
            n_star: config.n_star,
            epsilon: config.epsilon,
            alpha: config.alpha,
            result: r.clone(),
            volume_root,
        };
        writeln!(out, "{}", to_json(&j)?)?;
    } else {
        writeln!(out, "model: {model:?}, p = {p}, seed = {seed}, n* = {}", config.n_star)?;
        writeln!(
            out,
            "{} at n = {} after {} checkpoints",
            match r.reason {
                TerminationReason::CriterionMet => "terminated",
                TerminationReason::NMaxReached => "n_max reached without meeting the rule",
            },
            r.n_final,
            r.checkpoints
        )?;
        writeln!(out, "ESS: {}", fmt_opt(r.ess_at_termination))?;
        writeln!(out, "volume^(1/p): {}", fmt_opt(volume_root))?;
    }
    Ok(if r.terminated { 0 } else { 2 })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "unavailable".into())
}

fn stop_config(a: &StopArgs, p: usize) -> Result<StoppingConfig> {
    let n_star = match a.nstar {
        NStarArg::Fixed(n) => n,
        NStarArg::Auto => default_nstar(p, a.alpha, a.eps, a.batch.0)?,
    };
    let config = StoppingConfig {
        epsilon: a.eps,
        alpha: a.alpha,
        n_star,
        batch_policy: a.batch.0,
        metric: a.rule.into(),
        n_max: a.n_max,
        ..StoppingConfig::default()
    };
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(config)
}

fn cmd_stop_external(a: &StopArgs, chain_path: &Path, out: &mut dyn Write) -> Result<i32> {
    let chain = read_chain(chain_path)?;
    let Some(state_path) = &a.resume else {
        // one-off evaluation at the chain's full length
        let config = stop_config(a, chain.p())?;
        let cp = evaluate(&chain, &config);
        if a.json {
            writeln!(out, "{}", to_json(&cp)?)?;
        } else {
            writeln!(out, "n = {}: rule {}", cp.n, if cp.verdict { "met" } else { "not met" })?;
            writeln!(out, "ESS: {}", fmt_opt(cp.ess))?;
        }
        return Ok(0);
    };
    let mut state = if state_path.exists() {
        let text = std::fs::read_to_string(state_path)?;
        serde_json::from_str::<ResumeState>(&text)
            .map_err(|e| Error::Config(format!("bad state file {}: {e}", state_path.display())))?
    } else {
        ResumeState::new(stop_config(a, chain.p())?)?
    };
    let outcome = state.step(&chain);
    std::fs::write(state_path, to_json(&state)?)?;
    if a.json {
        writeln!(out, "{}", to_json(&outcome)?)?;
        return Ok(0);
    }
    match &outcome {
        ResumeOutcome::NeedMore {
            rows_available,
            next_checkpoint,
        } => writeln!(out, "need more: {rows_available} rows available, next checkpoint at {next_checkpoint}")?,
        ResumeOutcome::Continue {
            checkpoint,
            next_checkpoint,
        } => writeln!(
            out,
            "continue: rule not met at n = {}, ESS {}, next checkpoint at {next_checkpoint}",
            checkpoint.n,
            fmt_opt(checkpoint.ess)
        )?,
        ResumeOutcome::Terminated { checkpoint } => writeln!(
            out,
            "terminated: rule met at n = {}, ESS {}",
            checkpoint.n,
            fmt_opt(checkpoint.ess)
        )?,
    }
    Ok(0)
}

fn cmd_replicate(a: &ReplicateArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = StudySpec::from_path(&a.config)?;
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let report = pool.install(|| run_study(&spec))?;
    std::fs::create_dir_all(&a.out)?;
    let rows_path = a.out.join(format!("{}.rows.csv", spec.name));
    let json_path = a.out.join(format!("{}.summary.json", spec.name));
    report.write_rows_csv(std::io::BufWriter::new(File::create(&rows_path)?))?;
    std::fs::write(&json_path, report.summary_json()?)?;
    write!(out, "{}", report.render_table())?;
    writeln!(out, "\nrows: {}\nsummary: {}", rows_path.display(), json_path.display())?;
    Ok(0)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))
}
