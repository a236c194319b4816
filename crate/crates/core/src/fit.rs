//! Linear-prediction and GHK particle-likelihood estimation.

use crate::copula_link::PoissonTail;
use crate::error::{Error, Result};
use crate::generate::{CountSeries, MeanModel};
use crate::latent_ar::{phi_from_pacf, Cholesky, LatentAR};
use crate::special::{count_cutpoints, poisson_ln_pmf, truncated_std_normal_step};
use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason, TerminationStatus};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::neldermead::NelderMead;
use argmin::solver::quasinewton::BFGS;
use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

/// `λ̂ = x̄` and `Var(λ̂) = (λ̂/n)[1 + 2 Σ_{j<n} (1 - j/n) γ(j)/γ(0)]`.
///
/// `acvf(j)` is the model autocovariance at lag `j`; only its ratio to
/// `acvf(0)` enters, so the IID case gives `λ̂/n`.
pub fn sample_mean_estimate(series: &CountSeries, acvf: impl Fn(usize) -> f64) -> Result<(f64, f64)> {
    let n = series.len();
    if n == 0 {
        return Err(Error::domain("sample mean of an empty series"));
    }
    let nf = n as f64;
    let lambda_hat = series.x.iter().map(|v| *v as f64).sum::<f64>() / nf;
    let g0 = acvf(0);
    if !(g0 > 0.0) {
        return Err(Error::domain(format!("lag-0 autocovariance must be positive, got {g0}")));
    }
    let s: f64 = (1..n).map(|j| (1.0 - j as f64 / nf) * acvf(j) / g0).sum();
    Ok((lambda_hat, lambda_hat / nf * (1.0 + 2.0 * s)))
}

/// `Γ_X(t,s) = E[min(N_t, N_s)] γ_B(|t-s|)` off the diagonal and `λ_t` on it,
/// with `N_t ~ Poisson(λ_t/p)`.
pub fn super_covariance_matrix(lambdas: &[f64], p: f64, gamma_b: &[f64]) -> Result<DMatrix<f64>> {
    let n = lambdas.len();
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("Bernoulli success probability must be in (0, 1], got {p}")));
    }
    if gamma_b.len() < n {
        return Err(Error::domain(format!("need γ_B at lags 0..{}, got {} values", n - 1, gamma_b.len())));
    }
    let mut tails = Vec::with_capacity(n);
    for &l in lambdas {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::domain(format!("Poisson mean must be positive, got {l}")));
        }
        tails.push(PoissonTail::new(l / p)?);
    }
    let mut g = DMatrix::<f64>::zeros(n, n);
    for t in 0..n {
        g[(t, t)] = lambdas[t];
        for s in 0..t {
            let gb = gamma_b[t - s];
            let v = if gb == 0.0 { 0.0 } else { tails[t].expected_min(&tails[s]) * gb };
            g[(t, s)] = v;
            g[(s, t)] = v;
        }
    }
    Ok(g)
}

/// One-step errors `X_t - X̂_t` of the best linear predictors under `Γ`.
///
/// With `Γ = LLᵀ` the errors are `L_tt (L⁻¹(x - λ))_t`, so one factorization
/// serves every prediction system.
pub fn linear_prediction_errors(x: &[u64], lambdas: &[f64], cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::factor(cov).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, .. } => Error::PredictionSystem {
            time: pivot + 1,
            source: Box::new(e),
        },
        other => other,
    })?;
    let centred: Vec<f64> = x.iter().zip(lambdas).map(|(x, l)| *x as f64 - l).collect();
    let u = chol.forward(&centred);
    let l = chol.factor_matrix();
    Ok(u.iter().enumerate().map(|(t, v)| l[(t, t)] * v).collect())
}

/// Sum of squared one-step linear prediction errors.
pub fn linear_prediction_sse(x: &[u64], lambdas: &[f64], p: f64, gamma_b: &[f64]) -> Result<f64> {
    let cov = super_covariance_matrix(lambdas, p, gamma_b)?;
    Ok(linear_prediction_errors(x, lambdas, &cov)?.iter().map(|e| e * e).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NelderMead,
    Bfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_iters: u64,
    /// Relative tolerance on the objective spread (Nelder–Mead) or change
    /// (BFGS).
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::NelderMead,
            max_iters: 2000,
            tolerance: 1e-9,
        }
    }
}

/// Estimates and summary of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Mean-model estimates `(μ, β₁, …)`.
    pub theta_hat: Vec<f64>,
    /// Latent AR estimates `(φ₁, …, φ_r)`.
    pub eta_hat: Vec<f64>,
    pub param_names: Vec<String>,
    pub loglik: Option<f64>,
    pub sse: Option<f64>,
    /// Standard errors aligned with `theta_hat ++ eta_hat`.
    pub se: Option<Vec<f64>>,
    pub se_diagnostic: Option<String>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub converged: bool,
    pub evaluations: usize,
    pub n: usize,
}

impl FitResult {
    pub fn estimates(&self) -> Vec<f64> {
        self.theta_hat.iter().chain(&self.eta_hat).copied().collect()
    }

    pub fn n_params(&self) -> usize {
        self.theta_hat.len() + self.eta_hat.len()
    }

    pub fn mean_model(&self, template: &MeanModel) -> MeanModel {
        template.with_params(&self.theta_hat)
    }

    pub fn latent(&self) -> Result<LatentAR> {
        LatentAR::new(&self.eta_hat)
    }
}

/// `(AIC, BIC) = (-2ℓ + 2k, -2ℓ + k log n)`.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> (f64, f64) {
    let k = k as f64;
    (-2.0 * loglik + 2.0 * k, -2.0 * loglik + k * (n as f64).ln())
}

/// Poisson log-link regression by iteratively reweighted least squares.
pub fn glm_poisson(x: &[u64], columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = x.len();
    let q = columns.len() + 1;
    let design = DMatrix::from_fn(n, q, |t, j| if j == 0 { 1.0 } else { columns[j - 1][t] });
    let y = DVector::from_iterator(n, x.iter().map(|v| *v as f64));
    let mut eta = DVector::from_iterator(n, y.iter().map(|v| (v + 0.5).ln()));
    let mut beta = DVector::<f64>::zeros(q);
    for _ in 0..100 {
        let mu = eta.map(f64::exp);
        let z = DVector::from_fn(n, |t, _| eta[t] + (y[t] - mu[t]) / mu[t]);
        let mut xtwx = DMatrix::<f64>::zeros(q, q);
        let mut xtwz = DVector::<f64>::zeros(q);
        for t in 0..n {
            let row = design.row(t);
            xtwx += mu[t] * row.transpose() * row;
            xtwz += mu[t] * z[t] * row.transpose();
        }
        let next = xtwx
            .cholesky()
            .ok_or_else(|| Error::Model("Poisson regression design is rank deficient".into()))?
            .solve(&xtwz);
        let change = (&next - &beta).amax();
        beta = next;
        eta = &design * &beta;
        if change < 1e-12 {
            break;
        }
    }
    Ok(beta.iter().copied().collect())
}

/// Coordinate scales so optimizer steps are comparable across covariates.
fn coordinate_scales(template: &MeanModel, latent_order: usize) -> Vec<f64> {
    let mut s = vec![0.1];
    for c in &template.columns {
        let n = c.len() as f64;
        let m = c.iter().sum::<f64>() / n;
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        s.push(0.1 / sd.max(1.0));
    }
    s.extend(std::iter::repeat_n(0.1, latent_order));
    s
}

struct Scaled<'a, F: Fn(&[f64]) -> f64> {
    f: &'a F,
    scales: &'a [f64],
    count: &'a Cell<usize>,
}

impl<F: Fn(&[f64]) -> f64> Scaled<'_, F> {
    fn eval(&self, y: &[f64]) -> f64 {
        self.count.set(self.count.get() + 1);
        let x: Vec<f64> = y.iter().zip(self.scales).map(|(a, s)| a * s).collect();
        let v = (self.f)(&x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

impl<F: Fn(&[f64]) -> f64> CostFunction for Scaled<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, y: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(y))
    }
}

impl<F: Fn(&[f64]) -> f64> Gradient for Scaled<'_, F> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, y: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let h = 1e-5;
        let mut g = vec![0.0; y.len()];
        let mut p = y.clone();
        for i in 0..y.len() {
            p[i] = y[i] + h;
            let fp = self.eval(&p);
            p[i] = y[i] - h;
            let fm = self.eval(&p);
            p[i] = y[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Minimizes `f` from `x0`, working in coordinates divided by `scales`.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], scales: &[f64], config: &OptimizerConfig) -> Result<Minimum> {
    let count = Cell::new(0usize);
    let problem = Scaled {
        f: &f,
        scales,
        count: &count,
    };
    let y0: Vec<f64> = x0.iter().zip(scales).map(|(x, s)| x / s).collect();
    let f0 = problem.eval(&y0);
    if !f0.is_finite() {
        return Err(Error::Optimizer(format!("objective is not finite at the starting point {x0:?}")));
    }
    let tol = config.tolerance * f0.abs().max(1.0);
    let (y, value, status) = match config.method {
        Method::NelderMead => {
            let mut simplex = vec![y0.clone()];
            for i in 0..y0.len() {
                let mut v = y0.clone();
                v[i] += 1.0;
                simplex.push(v);
            }
            let solver = NelderMead::new(simplex)
                .with_sd_tolerance(tol)
                .map_err(|e| Error::Optimizer(e.to_string()))?;
            let res = Executor::new(problem, solver)
                .configure(|s| s.max_iters(config.max_iters))
                .run()
                .map_err(|e| Error::Optimizer(e.to_string()))?;
            let st = res.state();
            (
                st.get_best_param().cloned().unwrap_or(y0.clone()),
                st.get_best_cost(),
                st.get_termination_status().clone(),
            )
        }
        Method::Bfgs => {
            let dim = y0.len();
            let eye: Vec<Vec<f64>> = (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let solver = BFGS::new(MoreThuenteLineSearch::new())
                .with_tolerance_cost(tol)
                .map_err(|e| Error::Optimizer(e.to_string()))?;
            let res = Executor::new(problem, solver)
                .configure(|s| s.param(y0.clone()).inv_hessian(eye).max_iters(config.max_iters))
                .run()
                .map_err(|e| Error::Optimizer(e.to_string()))?;
            let st = res.state();
            (
                st.get_best_param().cloned().unwrap_or(y0.clone()),
                st.get_best_cost(),
                st.get_termination_status().clone(),
            )
        }
    };
    let converged = matches!(
        status,
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    Ok(Minimum {
        x: y.iter().zip(scales).map(|(a, s)| a * s).collect(),
        value,
        converged,
        evaluations: count.get(),
    })
}

fn param_names(template: &MeanModel, r: usize) -> Vec<String> {
    let mut names = vec!["mu".to_string()];
    names.extend(template.names.iter().map(|n| format!("beta_{n}")));
    names.extend((1..=r).map(|k| format!("phi_{k}")));
    names
}

/// Least-squares fit of the mean parameters with the superposition
/// dependence `(p, γ_B)` held fixed.
pub fn fit_linear_prediction(
    series: &CountSeries,
    template: &MeanModel,
    p: f64,
    gamma_b: &[f64],
    config: &OptimizerConfig,
) -> Result<FitResult> {
    check_alignment(series, template)?;
    let x = &series.x;
    let objective = |theta: &[f64]| -> f64 {
        match template.lambdas_for(theta) {
            Some(l) => linear_prediction_sse(x, &l, p, gamma_b).unwrap_or(f64::INFINITY),
            None => f64::INFINITY,
        }
    };
    let start = glm_poisson(x, &template.columns)?;
    // surface factorization failures at the start instead of silently rejecting
    linear_prediction_sse(x, &template.lambdas_for(&start).ok_or_else(|| Error::Model("start values overflow".into()))?, p, gamma_b)?;
    let scales = coordinate_scales(template, 0);
    let min = minimize(objective, &start, &scales, config)?;
    Ok(FitResult {
        theta_hat: min.x,
        eta_hat: Vec::new(),
        param_names: param_names(template, 0),
        loglik: None,
        sse: Some(min.value),
        se: None,
        se_diagnostic: Some("standard errors are not computed for least-squares fits".into()),
        aic: None,
        bic: None,
        converged: min.converged,
        evaluations: min.evaluations,
        n: series.len(),
    })
}

fn check_alignment(series: &CountSeries, template: &MeanModel) -> Result<()> {
    if template.n() != series.len() {
        return Err(Error::Model(format!(
            "mean model has {} rows but the series has {} values",
            template.n(),
            series.len()
        )));
    }
    Ok(())
}

/// Frozen uniforms for `m` particle paths over `n` times.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    m: usize,
    n: usize,
    /// Row-major `n × m`.
    crn: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::domain("particle system needs m ≥ 1 and n ≥ 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let crn = (0..n * m).map(|_| rng.sample::<f64, _>(Open01)).collect();
        Ok(Self { m, n, crn })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn uniforms(&self, t: usize) -> &[f64] {
        &self.crn[t * self.m..(t + 1) * self.m]
    }
}

/// Per-time particle predictive CDF at the two cutpoints of the observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveCdf {
    /// `P̂_t(x_t - 1)`
    pub lower: f64,
    /// `P̂_t(x_t)`
    pub upper: f64,
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v.iter().map(|w| (w - mx).exp()).sum();
    mx + (s / v.len() as f64).ln()
}

/// GHK sequential importance sampler. Returns the log-likelihood estimate and,
/// when requested, the particle predictive CDF at each observation.
pub(crate) fn ghk_pass(
    x: &[u64],
    lambdas: &[f64],
    latent: &LatentAR,
    particles: &ParticleSystem,
    mut predictive: Option<&mut Vec<PredictiveCdf>>,
) -> Result<f64> {
    let n = x.len();
    if lambdas.len() != n {
        return Err(Error::domain("mean path and series lengths differ"));
    }
    if particles.n() < n {
        return Err(Error::domain(format!(
            "particle system covers {} times, series has {n}",
            particles.n()
        )));
    }
    let m = particles.m();
    let r = latent.order();
    let mut logw = vec![0.0f64; m];
    // history[k*r + j] is z_{t-1-j} of particle k
    let mut history = vec![0.0f64; m * r.max(1)];
    let mut zhat = vec![0.0f64; m];
    let mut alive = m;
    for t in 0..n {
        let (a, b) = count_cutpoints(lambdas[t], x[t]);
        let (row, sd) = latent.predictor(t);
        for k in 0..m {
            let h = &history[k * r.max(1)..];
            zhat[k] = row.iter().zip(h).map(|(c, z)| c * z).sum();
        }
        if let Some(out) = predictive.as_deref_mut() {
            out.push(particle_predictive(&logw, &zhat, sd, a, b));
        }
        let us = particles.uniforms(t);
        for k in 0..m {
            if logw[k] == f64::NEG_INFINITY {
                continue;
            }
            let alpha = (a - zhat[k]) / sd;
            let beta = (b - zhat[k]) / sd;
            match truncated_std_normal_step(alpha, beta, us[k]) {
                Some((mass, z)) => {
                    logw[k] += mass.ln();
                    let z = zhat[k] + sd * z.clamp(alpha, beta);
                    if r > 0 {
                        let h = &mut history[k * r..(k + 1) * r];
                        h.copy_within(0..r - 1, 1);
                        h[0] = z;
                    }
                }
                None => {
                    logw[k] = f64::NEG_INFINITY;
                    alive -= 1;
                }
            }
        }
        if alive == 0 {
            return Ok(f64::NEG_INFINITY);
        }
    }
    Ok(log_mean_exp(&logw))
}

fn particle_predictive(logw: &[f64], zhat: &[f64], sd: f64, a: f64, b: f64) -> PredictiveCdf {
    use crate::special::normal_cdf;
    let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi, mut tot) = (0.0, 0.0, 0.0);
    for (lw, z) in logw.iter().zip(zhat) {
        let w = if mx == f64::NEG_INFINITY { 1.0 } else { (lw - mx).exp() };
        tot += w;
        lo += w * normal_cdf((a - z) / sd);
        hi += w * normal_cdf((b - z) / sd);
    }
    PredictiveCdf {
        lower: lo / tot,
        upper: hi / tot,
    }
}

/// Log of the GHK likelihood estimate `m⁻¹ Σ_k w_n^{(k)}`.
pub fn ghk_loglik(x: &[u64], lambdas: &[f64], latent: &LatentAR, particles: &ParticleSystem) -> Result<f64> {
    ghk_pass(x, lambdas, latent, particles, None)
}

/// Particle predictive CDFs `(P̂_t(x_t - 1), P̂_t(x_t))` for every `t`.
pub fn ghk_predictive(
    x: &[u64],
    lambdas: &[f64],
    latent: &LatentAR,
    particles: &ParticleSystem,
) -> Result<(f64, Vec<PredictiveCdf>)> {
    let mut out = Vec::with_capacity(x.len());
    let ll = ghk_pass(x, lambdas, latent, particles, Some(&mut out))?;
    Ok((ll, out))
}

/// Exact independent-Poisson log-likelihood.
pub fn poisson_loglik(x: &[u64], lambdas: &[f64]) -> f64 {
    x.iter().zip(lambdas).map(|(x, l)| poisson_ln_pmf(*l, *x)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhkConfig {
    /// Particles used while optimizing.
    pub m: usize,
    /// Particles for the reported log-likelihood and the Hessian.
    pub m_final: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub standard_errors: bool,
}

impl Default for GhkConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            m_final: 100_000,
            seed: 1,
            optimizer: OptimizerConfig::default(),
            standard_errors: true,
        }
    }
}

/// Initial latent coordinates: atanh of the sample partial autocorrelations
/// of the conditional-mean residuals at the GLM start.
fn latent_start(x: &[u64], lambdas: &[f64], r: usize) -> Vec<f64> {
    if r == 0 {
        return Vec::new();
    }
    let zhat: Vec<f64> = x
        .iter()
        .zip(lambdas)
        .map(|(x, l)| crate::diagnose::conditional_latent_mean(*l, *x).unwrap_or(0.0))
        .collect();
    let pacf = crate::diagnose::sample_acf(&zhat, r)
        .map(|acf| crate::diagnose::pacf_from_acf(&acf))
        .unwrap_or_else(|_| vec![0.0; r]);
    pacf.iter().map(|p| p.clamp(-0.8, 0.8).atanh()).collect()
}

/// Maximizes the CRN-frozen GHK likelihood over `(θ, φ)`.
pub fn fit_ghk(series: &CountSeries, template: &MeanModel, r: usize, config: &GhkConfig) -> Result<FitResult> {
    check_alignment(series, template)?;
    if config.m < 1 {
        return Err(Error::domain("particle count must be positive"));
    }
    let x = &series.x;
    let n = x.len();
    let q = template.n_params();
    let particles = ParticleSystem::new(n, config.m, config.seed)?;
    let objective = |v: &[f64]| -> f64 {
        let Some(lambdas) = template.lambdas_for(&v[..q]) else {
            return f64::INFINITY;
        };
        let pacf: Vec<f64> = v[q..].iter().map(|s| s.tanh()).collect();
        if pacf.iter().any(|p| p.abs() >= 1.0) {
            return f64::INFINITY;
        }
        let Ok(latent) = LatentAR::new(&phi_from_pacf(&pacf)) else {
            return f64::INFINITY;
        };
        match ghk_loglik(x, &lambdas, &latent, &particles) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    };
    let theta0 = glm_poisson(x, &template.columns)?;
    let lambdas0 = template.lambdas_for(&theta0).ok_or_else(|| Error::Model("start values overflow".into()))?;
    let mut start = theta0.clone();
    start.extend(latent_start(x, &lambdas0, r));
    let scales = coordinate_scales(template, r);
    let min = minimize(objective, &start, &scales, &config.optimizer)?;
    let theta_hat = min.x[..q].to_vec();
    let pacf: Vec<f64> = min.x[q..].iter().map(|s| s.tanh()).collect();
    let eta_hat = phi_from_pacf(&pacf);
    let mut evaluations = min.evaluations;

    let lambdas_hat = template
        .lambdas_for(&theta_hat)
        .ok_or_else(|| Error::Model("fitted mean overflows".into()))?;
    let latent_hat = LatentAR::new(&eta_hat)?;
    let final_particles = if config.m_final == config.m {
        particles
    } else {
        ParticleSystem::new(n, config.m_final, config.seed ^ 0x9E37_79B9_7F4A_7C15)?
    };
    let loglik = ghk_loglik(x, &lambdas_hat, &latent_hat, &final_particles)?;
    evaluations += 1;
    let (aic, bic) = information_criteria(loglik, q + r, n);

    let (se, se_diagnostic) = if config.standard_errors {
        let natural = |v: &[f64]| -> f64 {
            let Some(l) = template.lambdas_for(&v[..q]) else {
                return f64::NAN;
            };
            let Ok(latent) = LatentAR::new(&v[q..]) else {
                return f64::NAN;
            };
            match ghk_loglik(x, &l, &latent, &final_particles) {
                Ok(ll) => -ll,
                Err(_) => f64::NAN,
            }
        };
        let est: Vec<f64> = theta_hat.iter().chain(&eta_hat).copied().collect();
        let (h, calls) = hessian(natural, &est, -loglik);
        evaluations += calls;
        match standard_errors_from_hessian(&h) {
            Ok(se) => (Some(se), None),
            Err(msg) => (None, Some(msg)),
        }
    } else {
        (None, Some("standard errors not requested".into()))
    };

    Ok(FitResult {
        theta_hat,
        eta_hat,
        param_names: param_names(template, r),
        loglik: Some(loglik),
        sse: None,
        se,
        se_diagnostic,
        aic: Some(aic),
        bic: Some(bic),
        converged: min.converged,
        evaluations,
        n,
    })
}

/// Central finite-difference Hessian with steps `max(1e-4, 1e-3|x_i|)`.
/// Returns the matrix and the number of function calls.
pub fn hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], fx: f64) -> (DMatrix<f64>, usize) {
    let d = x.len();
    let h: Vec<f64> = x.iter().map(|v| (1e-3 * v.abs()).max(1e-4)).collect();
    let mut out = DMatrix::<f64>::zeros(d, d);
    let mut calls = 0;
    let mut eval = |dx: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in dx {
            p[i] += s;
        }
        calls += 1;
        f(&p)
    };
    for i in 0..d {
        let fp = eval(&[(i, h[i])]);
        let fm = eval(&[(i, -h[i])]);
        out[(i, i)] = (fp - 2.0 * fx + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = eval(&[(i, h[i]), (j, h[j])]);
            let fpm = eval(&[(i, h[i]), (j, -h[j])]);
            let fmp = eval(&[(i, -h[i]), (j, h[j])]);
            let fmm = eval(&[(i, -h[i]), (j, -h[j])]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    (out, calls)
}

/// Square roots of the diagonal of `H⁻¹`, or a diagnostic when `H` is not
/// positive definite.
pub fn standard_errors_from_hessian(h: &DMatrix<f64>) -> std::result::Result<Vec<f64>, String> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err("Hessian has non-finite entries (a perturbed point left the parameter space)".into());
    }
    let chol = Cholesky::factor(h).map_err(|e| format!("Hessian is not positive definite: {e}"))?;
    let d = h.nrows();
    let mut se = Vec::with_capacity(d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let col = chol.solve_leading(&e);
        se.push(col[i].sqrt());
    }
    Ok(se)
}
