//! Exact samplers for Poisson-marginal count series.

use crate::error::{Error, Result};
use crate::latent_ar::LatentAR;
use crate::special::{normal_cdf, poisson_quantile, poisson_quantile_upper};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Random stream for replicate `stream` under a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent child seed for replicate `index` under a master seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, index).next_u64()
}

/// Log-link mean model `λ_t = exp(μ + β'C_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub mu: f64,
    pub beta: Vec<f64>,
    /// Covariate columns, each of length `n`.
    pub columns: Vec<Vec<f64>>,
    pub names: Vec<String>,
    n: usize,
}

impl MeanModel {
    pub fn new(mu: f64, beta: Vec<f64>, columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if beta.len() != columns.len() || names.len() != columns.len() {
            return Err(Error::Model(format!(
                "{} coefficients, {} covariate columns and {} names",
                beta.len(),
                columns.len(),
                names.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Model("covariate columns must be non-empty and of equal length".into()));
        }
        let m = Self { mu, beta, columns, names, n };
        m.check()?;
        Ok(m)
    }

    /// Intercept-only model of length `n`.
    pub fn constant(lambda: f64, n: usize) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() || n == 0 {
            return Err(Error::domain(format!("constant mean needs λ > 0 and n ≥ 1, got λ={lambda}, n={n}")));
        }
        Ok(Self {
            mu: lambda.ln(),
            beta: Vec::new(),
            columns: Vec::new(),
            names: Vec::new(),
            n,
        })
    }

    /// Intercept-only template for a series of length `n`.
    pub fn intercept(mu: f64, n: usize) -> Self {
        Self {
            mu,
            beta: Vec::new(),
            columns: Vec::new(),
            names: Vec::new(),
            n,
        }
    }

    fn check(&self) -> Result<()> {
        for (t, l) in self.lambdas().iter().enumerate() {
            if !(*l > 0.0) || !l.is_finite() {
                return Err(Error::Model(format!("mean λ_{} = {l} is not positive and finite", t + 1)));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of regression coefficients including the intercept.
    pub fn n_params(&self) -> usize {
        1 + self.beta.len()
    }

    /// `(μ, β₁, …, β_q)`.
    pub fn params(&self) -> Vec<f64> {
        std::iter::once(self.mu).chain(self.beta.iter().copied()).collect()
    }

    /// Same covariates with new `(μ, β)`.
    pub fn with_params(&self, theta: &[f64]) -> Self {
        assert_eq!(theta.len(), self.n_params(), "parameter length mismatch");
        Self {
            mu: theta[0],
            beta: theta[1..].to_vec(),
            columns: self.columns.clone(),
            names: self.names.clone(),
            n: self.n,
        }
    }

    pub fn linear_predictor(&self, t: usize) -> f64 {
        self.mu + self.beta.iter().zip(&self.columns).map(|(b, c)| b * c[t]).sum::<f64>()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (0..self.n).map(|t| self.linear_predictor(t).exp()).collect()
    }

    /// Validated `λ_t` path for trial parameters.
    pub fn lambdas_for(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let out: Vec<f64> = (0..self.n)
            .map(|t| {
                let eta = theta[0] + theta[1..].iter().zip(&self.columns).map(|(b, c)| b * c[t]).sum::<f64>();
                eta.exp()
            })
            .collect();
        out.iter().all(|l| *l > 0.0 && l.is_finite()).then_some(out)
    }
}

/// Trend column `t = 1..n`.
pub fn trend_column(n: usize) -> Vec<f64> {
    (1..=n).map(|t| t as f64).collect()
}

/// Seed of the fixed simulation-design covariate.
pub const DESIGN_COVARIATE_SEED: u64 = 1234;

/// Zero-one IID Bernoulli(`prob`) column. Shorter columns under the same
/// seed are prefixes of longer ones.
pub fn bernoulli_column(n: usize, prob: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::domain(format!("Bernoulli probability {prob} outside [0, 1]")));
    }
    let mut rng = stream_rng(seed, 0);
    Ok((0..n).map(|_| if rng.random::<f64>() < prob { 1.0 } else { 0.0 }).collect())
}

/// Simulation-design mean `λ_t = exp(1 + 0.01 t + C_t)` with `C_t` a fixed
/// Bernoulli(0.3) covariate.
pub fn design_mean(n: usize) -> Result<MeanModel> {
    MeanModel::new(
        1.0,
        vec![0.01, 1.0],
        vec![trend_column(n), bernoulli_column(n, 0.3, DESIGN_COVARIATE_SEED)?],
        vec!["trend".into(), "c".into()],
    )
}

/// Renewal lifetime distribution on `{1, …, L_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalLifetime {
    /// `pmf[k]` is `P(L = k + 1)`.
    pmf: Vec<f64>,
    mu_l: f64,
}

impl RenewalLifetime {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::domain("lifetime pmf must be a non-empty vector of probabilities"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("lifetime pmf sums to {total}, not 1")));
        }
        let g = pmf
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .fold(0usize, |g, (k, _)| gcd(g, k + 1));
        if g != 1 {
            return Err(Error::domain(format!("lifetime support is periodic with period {g}")));
        }
        let mu_l = pmf.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum();
        Ok(Self { pmf, mu_l })
    }

    /// Uniform on `{1, …, k}`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("uniform lifetime needs k ≥ 1"));
        }
        let mut pmf = vec![1.0 / k as f64; k];
        // absorb rounding so the sum is exact to the last bit
        let s: f64 = pmf[..k - 1].iter().sum();
        pmf[k - 1] = 1.0 - s;
        Self::new(pmf)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.mu_l
    }

    /// Success probability `p = 1/μ_L` of the stationary chain.
    pub fn p(&self) -> f64 {
        1.0 / self.mu_l
    }

    /// Renewal probabilities `u_0..=u_hmax` of the non-delayed process.
    pub fn renewal_probs(&self, hmax: usize) -> Vec<f64> {
        let mut u = vec![0.0; hmax + 1];
        u[0] = 1.0;
        for h in 1..=hmax {
            u[h] = self
                .pmf
                .iter()
                .enumerate()
                .take_while(|(k, _)| k + 1 <= h)
                .map(|(k, p)| p * u[h - k - 1])
                .sum();
        }
        u
    }

    /// `γ_B(h) = (u_h − 1/μ_L)/μ_L` for `h = 0..=hmax`.
    pub fn autocovariances(&self, hmax: usize) -> Vec<f64> {
        let p = self.p();
        self.renewal_probs(hmax).into_iter().map(|u| p * (u - p)).collect()
    }

    /// `P(L_0 = k) = P(L > k)/μ_L` for `k = 0..L_max-1`.
    pub fn delay_pmf(&self) -> Vec<f64> {
        // P(L > k) = Σ_{j > k} P(L = j), accumulated from the top
        let mut out = vec![0.0; self.pmf.len()];
        let mut acc = 0.0;
        for k in (0..self.pmf.len()).rev() {
            acc += self.pmf[k];
            out[k] = acc / self.mu_l;
        }
        out
    }

    fn sample_lifetime<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        1 + sample_index(&self.pmf, rng.random::<f64>())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest index whose cumulative weight exceeds `u`.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u fell in the rounding gap at the top: return the last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Stationary Bernoulli sequences used as superposition components.
pub trait BernoulliChain {
    /// Marginal success probability.
    fn p(&self) -> f64;
    /// Writes one stationary path of length `out.len()`.
    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [bool]);
    /// `γ_B(0..=hmax)`.
    fn autocovariances(&self, hmax: usize) -> Vec<f64>;
}

impl BernoulliChain for RenewalLifetime {
    fn p(&self) -> f64 {
        RenewalLifetime::p(self)
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [bool]) {
        out.fill(false);
        let delay = self.delay_pmf();
        let mut pos = sample_index(&delay, rng.random::<f64>());
        while pos < out.len() {
            out[pos] = true;
            pos += self.sample_lifetime(rng);
        }
    }

    fn autocovariances(&self, hmax: usize) -> Vec<f64> {
        RenewalLifetime::autocovariances(self, hmax)
    }
}

/// Gaussian AR sequence clipped to the half-line `(0, ∞)`.
#[derive(Debug, Clone)]
pub struct ClippedGaussian {
    pub latent: LatentAR,
}

impl BernoulliChain for ClippedGaussian {
    fn p(&self) -> f64 {
        0.5
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [bool]) {
        let z = self.latent.simulate(out.len(), rng);
        for (b, z) in out.iter_mut().zip(z) {
            *b = z > 0.0;
        }
    }

    fn autocovariances(&self, hmax: usize) -> Vec<f64> {
        self.latent
            .autocorrelations(hmax)
            .iter()
            .map(|r| r.clamp(-1.0, 1.0).asin() / (2.0 * std::f64::consts::PI))
            .collect()
    }
}

/// Observed count series with aligned covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    pub x: Vec<u64>,
    pub columns: Vec<Vec<f64>>,
    pub names: Vec<String>,
    pub generator: String,
    pub seed: Option<u64>,
}

impl CountSeries {
    pub fn new(x: Vec<u64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::domain("count series must have at least one value"));
        }
        Ok(Self {
            x,
            columns: Vec::new(),
            names: Vec::new(),
            generator: "observed".into(),
            seed: None,
        })
    }

    fn generated(x: Vec<u64>, generator: &str, seed: u64) -> Self {
        Self {
            x,
            columns: Vec::new(),
            names: Vec::new(),
            generator: generator.into(),
            seed: Some(seed),
        }
    }

    pub fn with_covariates(mut self, columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if columns.len() != names.len() || columns.iter().any(|c| c.len() != self.x.len()) {
            return Err(Error::domain("covariate columns must match the series length"));
        }
        self.columns = columns;
        self.names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Writes `t,x[,c1..cq]` rows with `t = 1..n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t,x")?;
        for name in &self.names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (t, x) in self.x.iter().enumerate() {
            write!(w, "{},{}", t + 1, x)?;
            for c in &self.columns {
                write!(w, ",{}", c[t])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("Poisson mean must be positive, got {lambda}")))
    }
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

fn thin<R: Rng + ?Sized>(rng: &mut R, count: u64, alpha: f64) -> u64 {
    if count == 0 {
        return 0;
    }
    Binomial::new(count, alpha).expect("valid thinning").sample(rng)
}

/// Discrete AR(1): `X_t = B_t X_{t-1} + (1 - B_t) A_t`.
pub fn gen_dar1(lambda: f64, p: f64, n: usize, seed: u64) -> Result<CountSeries> {
    check_lambda(lambda)?;
    check_prob("DAR mixing probability", p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    for t in 0..n {
        let keep = t > 0 && rng.random::<f64>() < p;
        let v = if keep { x[t - 1] } else { poisson(&mut rng, lambda) };
        x.push(v);
    }
    Ok(CountSeries::generated(x, "dar1", seed))
}

/// Integer AR(1) with binomial thinning and Poisson(λ(1−α)) innovations.
pub fn gen_inar1(lambda: f64, alpha: f64, n: usize, seed: u64) -> Result<CountSeries> {
    let mut s = gen_cinar(lambda, alpha, &[1.0], n, seed, false)?;
    s.generator = "inar1".into();
    Ok(s)
}

/// Length of the optional CINAR burn-in.
pub const CINAR_BURN_IN: usize = 500;

/// Combined INAR(r): a multinomial draw selects the single lag that is thinned.
pub fn gen_cinar(
    lambda: f64,
    alpha: f64,
    phi: &[f64],
    n: usize,
    seed: u64,
    burn_in: bool,
) -> Result<CountSeries> {
    check_lambda(lambda)?;
    check_prob("thinning probability", alpha)?;
    if phi.is_empty() || phi.iter().any(|p| !(*p >= 0.0)) || (phi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "multinomial probabilities must be nonnegative and sum to 1, got {phi:?}"
        )));
    }
    let r = phi.len();
    let extra = if burn_in { CINAR_BURN_IN } else { 0 };
    let total = n + extra;
    let innov = lambda * (1.0 - alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<u64> = Vec::with_capacity(total);
    for t in 0..total {
        let v = if t < r {
            poisson(&mut rng, lambda)
        } else {
            let lag = if r == 1 { 1 } else { 1 + sample_index(phi, rng.random::<f64>()) };
            thin(&mut rng, x[t - lag], alpha) + poisson(&mut rng, innov)
        };
        x.push(v);
    }
    x.drain(..extra);
    let tag = if r == 1 { "inar1" } else { "cinar" };
    Ok(CountSeries::generated(x, tag, seed))
}

/// Superposition `X_t = Σ_{i ≤ N_t} B_{t,i}` with `N_t ~ Poisson(λ_t/p)` and
/// independent stationary chains `B_{·,i}`.
pub fn gen_superposition<C: BernoulliChain>(lambdas: &[f64], chain: &C, seed: u64) -> Result<Vec<u64>> {
    for l in lambdas {
        check_lambda(*l)?;
    }
    let n = lambdas.len();
    let p = chain.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<u64> = lambdas.iter().map(|l| poisson(&mut rng, l / p)).collect();
    let m = counts.iter().copied().max().unwrap_or(0);
    let mut x = vec![0u64; n];
    let mut path = vec![false; n];
    // Chain i contributes at every t with N_t > i.
    for i in 0..m {
        chain.fill(&mut rng, &mut path);
        for t in 0..n {
            if path[t] && counts[t] > i {
                x[t] += 1;
            }
        }
    }
    Ok(x)
}

/// Superposition of stationary renewal chains.
pub fn gen_super_renewal(lambdas: &[f64], lifetime: &RenewalLifetime, seed: u64) -> Result<CountSeries> {
    let x = gen_superposition(lambdas, lifetime, seed)?;
    Ok(CountSeries::generated(x, "super-renewal", seed))
}

/// Superposition of Gaussian AR sequences clipped at zero (`p = 1/2`).
pub fn gen_super_clipped(lambdas: &[f64], latent: &LatentAR, seed: u64) -> Result<CountSeries> {
    let chain = ClippedGaussian { latent: latent.clone() };
    let x = gen_superposition(lambdas, &chain, seed)?;
    Ok(CountSeries::generated(x, "super-clipped", seed))
}

/// `F_λ⁻¹(Φ(z))`, evaluated through the upper tail for positive `z`.
pub fn copula_transform(lambda: f64, z: f64) -> Result<u64> {
    if z > 0.0 {
        let v = normal_cdf(-z);
        if v <= 0.0 {
            return Err(Error::domain(format!("latent value {z} beyond representable tail")));
        }
        poisson_quantile_upper(lambda, v)
    } else {
        poisson_quantile(lambda, normal_cdf(z))
    }
}

/// Gaussian copula series `X_t = F_{λ_t}⁻¹(Φ(Z_t))` with an exactly
/// stationary latent AR.
pub fn gen_copula(mean: &MeanModel, latent: &LatentAR, seed: u64) -> Result<CountSeries> {
    let lambdas = mean.lambdas();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = copula_path(&lambdas, latent, &mut rng)?;
    let s = CountSeries::generated(x, "copula", seed);
    s.with_covariates(mean.columns.clone(), mean.names.clone())
}

pub(crate) fn copula_path<R: Rng + ?Sized>(lambdas: &[f64], latent: &LatentAR, rng: &mut R) -> Result<Vec<u64>> {
    let z = latent.simulate(lambdas.len(), rng);
    lambdas.iter().zip(&z).map(|(l, z)| copula_transform(*l, *z)).collect()
}
