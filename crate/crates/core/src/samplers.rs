//! Processes with known or independently checkable truth.
//!
//! * VAR(1): `Y_t = Φ Y_{t-1} + ε_t`, `ε_t ~ N(0, Ω)`, whose stationary
//!   covariance `V` and CLT covariance `Σ` are available in closed form.
//! * Random-walk Metropolis, in particular for a Bayesian logistic
//!   regression posterior with a `N(0, τ² I)` prior.
//!
//! Every sampler draws from its own seeded ChaCha stream, so a run is
//! reproducible bit for bit from its seed.

use std::io::BufRead;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::chain::{load_chain, ChainFormat, ChainMatrix};
use crate::error::{domain, Error, Result};
use crate::linalg::{spectral_radius, Cholesky, Lu, Matrix};
use crate::stopping::ChainSampler;

/// Deterministic generator for a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standard_normals(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.sample(StandardNormal)).collect()
}

/// `scale · rho^{|i-j|}`.
pub fn ar1_cov(rho: f64, p: usize, scale: f64) -> Result<Matrix> {
    if !(rho.abs() < 1.0) {
        return Err(domain(format!("AR(1) correlation must satisfy |rho| < 1, got {rho}")));
    }
    if !(scale > 0.0) {
        return Err(domain("AR(1) scale must be positive"));
    }
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = scale * rho.powi((i as i32 - j as i32).abs());
        }
    }
    Ok(m)
}

const STATIONARITY_MARGIN: f64 = 1e-10;

/// Stationary covariance `V` and CLT covariance `Σ` of a VAR(1) process.
///
/// `V` solves `vec(V) = (I - Φ⊗Φ)⁻¹ vec(Ω)`; `Σ = (I-Φ)⁻¹V + V(I-Φ)⁻ᵀ - V`,
/// the sum of all lag autocovariances.
pub fn var1_true_cov(phi: &Matrix, omega: &Matrix) -> Result<(Matrix, Matrix)> {
    let p = phi.rows();
    if !phi.is_square() || omega.rows() != p || omega.cols() != p {
        return Err(domain("Φ and Ω must both be p x p"));
    }
    let radius = spectral_radius(phi);
    if radius >= 1.0 - STATIONARITY_MARGIN {
        return Err(Error::NotStationary { radius });
    }
    let system = Matrix::identity(p * p).sub(&phi.kron(phi));
    let lu = Lu::new(&system).ok_or(Error::NotStationary { radius })?;
    // column-major vec
    let mut vec_omega = vec![0.0; p * p];
    for j in 0..p {
        for i in 0..p {
            vec_omega[i + j * p] = omega[(i, j)];
        }
    }
    let vec_v = lu.solve(&vec_omega);
    let mut v = Matrix::zeros(p, p);
    for j in 0..p {
        for i in 0..p {
            v[(i, j)] = vec_v[i + j * p];
        }
    }
    v.symmetrize();

    let resolvent = Lu::new(&Matrix::identity(p).sub(phi))
        .ok_or(Error::NotStationary { radius })?
        .inverse();
    let left = resolvent.matmul(&v);
    let mut sigma = left.add(&left.transpose()).sub(&v);
    sigma.symmetrize();
    Ok((v, sigma))
}

/// A stationary VAR(1) process with its analytic covariances.
#[derive(Debug, Clone)]
pub struct Var1Model {
    pub phi: Matrix,
    pub omega: Matrix,
    pub v: Matrix,
    pub sigma_true: Matrix,
    omega_chol: Cholesky,
    v_chol: Cholesky,
}

impl Var1Model {
    pub fn new(phi: Matrix, omega: Matrix) -> Result<Self> {
        let omega_chol = omega
            .cholesky()
            .ok_or_else(|| domain("Ω must be positive definite"))?;
        let (v, sigma_true) = var1_true_cov(&phi, &omega)?;
        let v_chol = v.cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            phi,
            omega,
            v,
            sigma_true,
            omega_chol,
            v_chol,
        })
    }

    /// The five-dimensional benchmark: `Φ = diag(.9, .5, .1, .1, .1)`,
    /// `Ω` AR(1) with correlation 0.9.
    pub fn benchmark() -> Self {
        Self::benchmark_dim(5)
    }

    /// Same eigen-structure in dimension `p ≥ 2`: `Φ = diag(.9, .5, .1, ..., .1)`.
    pub fn benchmark_dim(p: usize) -> Self {
        assert!(p >= 2, "benchmark needs p >= 2");
        let mut diag = vec![0.1; p];
        diag[0] = 0.9;
        diag[1] = 0.5;
        Self::new(Matrix::diag(&diag), ar1_cov(0.9, p, 1.0).expect("valid AR(1)"))
            .expect("benchmark VAR(1) is stationary")
    }

    pub fn p(&self) -> usize {
        self.phi.rows()
    }

    /// Lyapunov residual `‖Φ V Φᵀ + Ω - V‖_F`.
    pub fn lyapunov_residual(&self) -> f64 {
        self.phi
            .matmul(&self.v)
            .matmul(&self.phi.transpose())
            .add(&self.omega)
            .sub(&self.v)
            .frobenius_norm()
    }

    pub fn sampler(self: &Arc<Self>, seed: u64) -> Var1Sampler {
        Var1Sampler {
            model: Arc::clone(self),
            rng: seeded_rng(seed),
            state: None,
        }
    }
}

/// Stateful VAR(1) generator started from the stationary distribution.
#[derive(Debug, Clone)]
pub struct Var1Sampler {
    model: Arc<Var1Model>,
    rng: ChaCha8Rng,
    state: Option<Vec<f64>>,
}

impl ChainSampler for Var1Sampler {
    fn dim(&self) -> usize {
        self.model.p()
    }

    fn extend(&mut self, rows: usize, out: &mut Vec<f64>) -> Result<()> {
        let p = self.model.p();
        out.reserve(rows * p);
        for _ in 0..rows {
            let next = match &self.state {
                None => {
                    let z = standard_normals(&mut self.rng, p);
                    self.model.v_chol.lower_mul(&z)
                }
                Some(prev) => {
                    let z = standard_normals(&mut self.rng, p);
                    let noise = self.model.omega_chol.lower_mul(&z);
                    self.model
                        .phi
                        .mul_vec(prev)
                        .into_iter()
                        .zip(noise)
                        .map(|(a, b)| a + b)
                        .collect()
                }
            };
            out.extend_from_slice(&next);
            self.state = Some(next);
        }
        Ok(())
    }
}

/// `n` draws of the process, `Y_0 ~ N(0, V)`.
pub fn simulate_var1(model: &Var1Model, n: usize, seed: u64) -> Result<ChainMatrix> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut sampler = Arc::new(model.clone()).sampler(seed);
    let mut data = Vec::with_capacity(n * model.p());
    sampler.extend(n, &mut data)?;
    ChainMatrix::new(n, model.p(), data)
}

/// Independent `N(0, I_p)` draws.
#[derive(Debug, Clone)]
pub struct IidGaussianSampler {
    p: usize,
    rng: ChaCha8Rng,
}

impl IidGaussianSampler {
    pub fn new(p: usize, seed: u64) -> Self {
        Self { p, rng: seeded_rng(seed) }
    }
}

impl ChainSampler for IidGaussianSampler {
    fn dim(&self) -> usize {
        self.p
    }

    fn extend(&mut self, rows: usize, out: &mut Vec<f64>) -> Result<()> {
        out.extend((0..rows * self.p).map(|_| self.rng.sample::<f64, _>(StandardNormal)));
        Ok(())
    }
}

/// Bayesian logistic regression: `y_i ~ Bernoulli(1/(1 + e^{-x_iβ}))`,
/// `β ~ N(0, τ² I)`.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// `K x r` design matrix.
    pub x: Matrix,
    pub y: Vec<f64>,
    pub tau2: f64,
    pub proposal_sd: f64,
}

const BUNDLED_LOGIT: &str = include_str!("../data/logit.csv");

impl LogisticModel {
    pub fn new(x: Matrix, y: Vec<f64>, tau2: f64, proposal_sd: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(domain("design rows and responses differ in length"));
        }
        if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(domain(format!("responses must be 0 or 1, found {bad}")));
        }
        if !(tau2 > 0.0) {
            return Err(domain("prior variance τ² must be positive"));
        }
        if !(proposal_sd > 0.0) {
            return Err(domain("proposal scale must be positive"));
        }
        Ok(Self { x, y, tau2, proposal_sd })
    }

    /// Reads a table with the response in the first column and predictors
    /// after it; an intercept column is prepended to the design.
    pub fn from_table<R: BufRead>(source: R, tau2: f64, proposal_sd: f64) -> Result<Self> {
        let table = load_chain(source, ChainFormat::Csv)?;
        if table.p() < 2 {
            return Err(domain("logistic data needs a response and at least one predictor"));
        }
        let r = table.p();
        let mut design = Vec::with_capacity(table.n() * r);
        let mut y = Vec::with_capacity(table.n());
        for row in table.rows() {
            y.push(row[0]);
            design.push(1.0);
            design.extend_from_slice(&row[1..]);
        }
        Self::new(Matrix::from_vec(table.n(), r, design), y, tau2, proposal_sd)
    }

    /// The bundled 100-observation dataset (`y, x1..x4` plus intercept),
    /// `τ² = 1`, proposal scale 0.35.
    pub fn bundled() -> Self {
        Self::from_table(BUNDLED_LOGIT.as_bytes(), 1.0, 0.35).expect("bundled data parses")
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }
}

/// `log(1 + e^η)` without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Unnormalized log posterior
/// `-βᵀβ/(2τ²) + Σ_i [y_i log p_i + (1 - y_i) log(1 - p_i)]`.
pub fn log_posterior_logistic(beta: &[f64], model: &LogisticModel) -> f64 {
    let prior = -beta.iter().map(|b| b * b).sum::<f64>() / (2.0 * model.tau2);
    let mut lik = 0.0;
    for (i, &yi) in model.y.iter().enumerate() {
        let eta: f64 = model.x.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
        // y log p + (1-y) log(1-p) = y η - log(1 + e^η)
        lik += yi * eta - softplus(eta);
    }
    prior + lik
}

/// Random-walk Metropolis with an isotropic normal proposal.
pub struct RandomWalkMetropolis<F> {
    log_target: F,
    state: Vec<f64>,
    log_density: f64,
    proposal_sd: f64,
    rng: ChaCha8Rng,
    proposed: u64,
    accepted: u64,
}

impl<F: Fn(&[f64]) -> f64> RandomWalkMetropolis<F> {
    pub fn new(log_target: F, init: Vec<f64>, proposal_sd: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(proposal_sd > 0.0) {
            return Err(domain("proposal scale must be positive"));
        }
        let log_density = log_target(&init);
        if !log_density.is_finite() {
            return Err(domain("initial state has non-finite log density"));
        }
        Ok(Self {
            log_target,
            state: init,
            log_density,
            proposal_sd,
            rng,
            proposed: 0,
            accepted: 0,
        })
    }

    pub fn step(&mut self) -> &[f64] {
        let proposal: Vec<f64> = self
            .state
            .iter()
            .map(|s| s + self.proposal_sd * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = (self.log_target)(&proposal);
        let log_u = self.rng.random::<f64>().ln();
        self.proposed += 1;
        if log_u < lp - self.log_density {
            self.state = proposal;
            self.log_density = lp;
            self.accepted += 1;
        }
        &self.state
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

impl<F: Fn(&[f64]) -> f64> ChainSampler for RandomWalkMetropolis<F> {
    fn dim(&self) -> usize {
        self.state.len()
    }

    fn extend(&mut self, rows: usize, out: &mut Vec<f64>) -> Result<()> {
        out.reserve(rows * self.state.len());
        for _ in 0..rows {
            let s = self.step();
            out.extend_from_slice(s);
        }
        Ok(())
    }
}

/// Starting point of a Metropolis run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// A draw from the `N(0, τ² I)` prior, taken from the run's own stream.
    PriorDraw,
    Vector(Vec<f64>),
}

/// Logistic-posterior RWM sampler; the chain records the state after each
/// proposal.
pub fn logistic_sampler(
    model: Arc<LogisticModel>,
    seed: u64,
    init: InitialState,
) -> Result<RandomWalkMetropolis<impl Fn(&[f64]) -> f64>> {
    let mut rng = seeded_rng(seed);
    let r = model.dim();
    let start = match init {
        InitialState::PriorDraw => standard_normals(&mut rng, r)
            .into_iter()
            .map(|z| z * model.tau2.sqrt())
            .collect(),
        InitialState::Vector(v) if v.len() == r => v,
        InitialState::Vector(v) => {
            return Err(domain(format!("initial vector has length {}, model has {r}", v.len())))
        }
    };
    let sd = model.proposal_sd;
    let target = move |beta: &[f64]| log_posterior_logistic(beta, &model);
    RandomWalkMetropolis::new(target, start, sd, rng)
}

/// Output of [`rwm_logistic`].
#[derive(Debug, Clone)]
pub struct RwmOutput {
    pub chain: ChainMatrix,
    pub acceptance_rate: f64,
}

/// `n` draws from the logistic posterior.
pub fn rwm_logistic(model: &LogisticModel, n: usize, seed: u64, init: InitialState) -> Result<RwmOutput> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut sampler = logistic_sampler(Arc::new(model.clone()), seed, init)?;
    let mut data = Vec::with_capacity(n * model.dim());
    sampler.extend(n, &mut data)?;
    Ok(RwmOutput {
        chain: ChainMatrix::new(n, model.dim(), data)?,
        acceptance_rate: sampler.acceptance_rate(),
    })
}
