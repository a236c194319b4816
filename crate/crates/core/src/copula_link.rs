//! Hermite-expansion calculus for the Gaussian copula transform
//! `G(z) = F_λ⁻¹(Φ(z))`, and the correlation bounds for Poisson pairs.
//!
//! The transform is a step function, `G(z) = Σ_ℓ 1[z > τ_ℓ]` with cutpoints
//! `τ_ℓ = Φ⁻¹(F_λ(ℓ))`, so `E[G(Z) H_k(Z)] = Σ_ℓ H_{k-1}(τ_ℓ) φ(τ_ℓ)` in
//! closed form. Coefficients are carried in the orthonormal basis
//! `H_k / √k!` to keep the factorials out of the arithmetic.

use crate::error::{Error, Result};
use crate::special::{normal_pdf, normal_quantile, poisson_ln_pmf, sf_unchecked, cdf_unchecked};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TRUNCATION: usize = 30;
pub const MAX_TRUNCATION: usize = 50;

/// Probabilists' Hermite polynomial `H_k(x)`.
pub fn hermite_poly(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for j in 2..=k {
                let next = x * cur - (j - 1) as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Fills `out[j] = H_j(x) / √j!` for `j = 0..out.len()`.
fn normalized_hermite_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for j in 2..out.len() {
        let jf = j as f64;
        out[j] = (x * out[j - 1] - (jf - 1.0).sqrt() * out[j - 2]) / jf.sqrt();
    }
}

/// Cutpoints `τ_ℓ = Φ⁻¹(F_λ(ℓ))` for `ℓ = 0, 1, …` until the upper tail
/// probability underflows.
pub fn copula_cutpoints(lambda: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l: i64 = 0;
    loop {
        let sf = sf_unchecked(lambda, l);
        if !(sf > 1e-300) {
            break;
        }
        let tau = if sf < 0.5 {
            -normal_quantile(sf).expect("sf in (0, 1)")
        } else {
            normal_quantile(cdf_unchecked(lambda, l)).expect("cdf in [0, 1]")
        };
        out.push(tau);
        l += 1;
    }
    out
}

/// Hermite coefficients `g_k` and link coefficients `η_k = k! g_k² / λ` of
/// the copula transform for a Poisson(λ) marginal, truncated at order `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    lambda: f64,
    g: Vec<f64>,
    eta: Vec<f64>,
    tail_mass: f64,
}

impl HermiteExpansion {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `g_1, …, g_K`.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// `η_1, …, η_K`.
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn order(&self) -> usize {
        self.eta.len()
    }

    /// `1 - Σ η_k`: link mass beyond the truncation order.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Link function `L(u) = Σ_{k=1}^K η_k u^k` for `|u| ≤ 1`.
    pub fn link(&self, u: f64) -> Result<f64> {
        if !(u.abs() <= 1.0) {
            return Err(Error::domain(format!("link argument must satisfy |u| <= 1, got {u}")));
        }
        let acc = self.eta.iter().rev().fold(0.0, |acc, &e| (acc + e) * u);
        Ok(acc)
    }
}

/// Series evaluation of the Hermite coefficients through the cutpoints.
pub fn hermite_coefficients(lambda: f64, order: usize) -> Result<HermiteExpansion> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if order == 0 {
        return Err(Error::domain("truncation order must be at least 1"));
    }
    if order > MAX_TRUNCATION {
        return Err(Error::TruncationOrder(order));
    }
    // s[k-1] = Σ_ℓ h̃_{k-1}(τ_ℓ) φ(τ_ℓ) = E[G(Z) H_k(Z)] / √(k-1)!
    let mut s = vec![0.0; order];
    let mut h = vec![0.0; order];
    for tau in copula_cutpoints(lambda) {
        let dens = normal_pdf(tau);
        if dens == 0.0 {
            continue;
        }
        normalized_hermite_into(tau, &mut h);
        for (acc, hj) in s.iter_mut().zip(&h) {
            *acc += hj * dens;
        }
    }
    let mut g = Vec::with_capacity(order);
    let mut eta = Vec::with_capacity(order);
    let mut ln_fact_prev = 0.0; // ln (k-1)!
    for (idx, &sk) in s.iter().enumerate() {
        let k = (idx + 1) as f64;
        let ln_fact = ln_fact_prev + k.ln();
        // g_k = s_k √(k-1)! / k!
        g.push(sk * (0.5 * ln_fact_prev - ln_fact).exp());
        eta.push(sk * sk / (k * lambda));
        ln_fact_prev = ln_fact;
    }
    let tail_mass = 1.0 - eta.iter().sum::<f64>();
    Ok(HermiteExpansion {
        lambda,
        g,
        eta,
        tail_mass,
    })
}

/// Reference route for `g_k = E[G(Z) H_k(Z)] / k!`: integrate `H_k φ` over
/// each cell where `G` is constant with composite Gauss–Legendre rules.
pub fn hermite_coefficients_quadrature(lambda: f64, order: usize) -> Result<Vec<f64>> {
    if order > MAX_TRUNCATION {
        return Err(Error::TruncationOrder(order));
    }
    const LIMIT: f64 = 40.0;
    const PIECE: f64 = 0.25;
    let (nodes, weights) = gauss_legendre(20);
    let cuts = copula_cutpoints(lambda);
    let mut edges = vec![-LIMIT];
    edges.extend(cuts.iter().map(|t| t.clamp(-LIMIT, LIMIT)));
    edges.push(LIMIT);

    let mut moments = vec![0.0; order + 1];
    let mut hk = vec![0.0; order + 1];
    for (cell, win) in edges.windows(2).enumerate() {
        let (a, b) = (win[0], win[1]);
        if b <= a || cell == 0 {
            continue;
        }
        let value = cell as f64;
        let pieces = ((b - a) / PIECE).ceil().max(1.0) as usize;
        let width = (b - a) / pieces as f64;
        for p in 0..pieces {
            let lo = a + p as f64 * width;
            let mid = lo + 0.5 * width;
            for (x, w) in nodes.iter().zip(&weights) {
                let z = mid + 0.5 * width * x;
                let dens = normal_pdf(z) * w * 0.5 * width * value;
                hk[0] = 1.0;
                if order >= 1 {
                    hk[1] = z;
                }
                for j in 2..=order {
                    hk[j] = z * hk[j - 1] - (j - 1) as f64 * hk[j - 2];
                }
                for j in 1..=order {
                    moments[j] += hk[j] * dens;
                }
            }
        }
    }
    let mut fact = 1.0;
    Ok((1..=order)
        .map(|k| {
            fact *= k as f64;
            moments[k] / fact
        })
        .collect())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Upper tail probabilities `S(n) = P(N > n)` of a Poisson variable.
///
/// Stored as a window: `S(n)` rounds to 1 below `offset` and is below 1e-17
/// past the end of `values`.
#[derive(Debug, Clone)]
pub struct PoissonTail {
    offset: usize,
    tail: Vec<f64>,
}

/// Largest tail window kept in memory.
pub const MAX_TAIL_WINDOW: usize = 2_000_000;

impl PoissonTail {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("Poisson mean must be positive, got {lambda}")));
        }
        let spread = 10.0 * lambda.sqrt() + 10.0;
        let lo = (lambda - spread).floor().max(0.0) as usize;
        let hi = (lambda + spread).ceil() as usize + 10;
        if hi - lo > MAX_TAIL_WINDOW {
            return Err(Error::domain(format!("Poisson mean {lambda} too large for tail tables")));
        }
        let mut pmf: Vec<f64> = (lo..=hi).map(|k| poisson_ln_pmf(lambda, k as u64).exp()).collect();
        // extend until the remaining mass is negligible
        let mut k = hi;
        while pmf.last().is_some_and(|p| *p > 1e-20) {
            k += 1;
            pmf.push(poisson_ln_pmf(lambda, k as u64).exp());
        }
        let mut tail = vec![0.0; pmf.len()];
        let mut acc = 0.0;
        for i in (0..pmf.len()).rev() {
            tail[i] = acc;
            acc += pmf[i];
        }
        while tail.last().is_some_and(|&s| s < 1e-17) {
            tail.pop();
        }
        let ones = tail.iter().take_while(|&&s| s >= 1.0).count();
        tail.drain(..ones);
        Ok(Self {
            offset: lo + ones,
            tail,
        })
    }

    /// `S(n)`.
    pub fn get(&self, n: usize) -> f64 {
        if n < self.offset {
            1.0
        } else {
            self.tail.get(n - self.offset).copied().unwrap_or(0.0)
        }
    }

    /// One past the last index with a stored nonzero tail.
    pub fn end(&self) -> usize {
        self.offset + self.tail.len()
    }

    /// `E[min(N, N')] = Σ_{n≥0} S(n) S'(n)` for independent `N`, `N'`.
    pub fn expected_min(&self, other: &PoissonTail) -> f64 {
        let ones = self.offset.min(other.offset);
        let end = self.end().min(other.end());
        let mut sum = 0.0;
        for n in ones..end {
            sum += self.get(n) * other.get(n);
        }
        sum + ones as f64
    }
}

/// `E[min(N₁, N₂)]` for independent Poisson variables with means `λ₁`, `λ₂`.
pub fn min_expect_heterogeneous(lambda1: f64, lambda2: f64) -> Result<f64> {
    Ok(PoissonTail::new(lambda1)?.expected_min(&PoissonTail::new(lambda2)?))
}

/// `κ(λ) = E[min(N, N')]` for independent Poisson(λ) variables.
///
/// Uses `min(N, N') = (N + N' - |N - N'|) / 2` with the Skellam mean
/// absolute deviation `E|N - N'| = 2λ e^{-2λ}(I₀(2λ) + I₁(2λ))`, so
/// `κ(λ) = λ[1 - e^{-2λ}(I₀(2λ) + I₁(2λ))]`.
pub fn kappa(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let x = 2.0 * lambda;
    let scaled = crate::special::bessel_i_scaled(0, x)? + crate::special::bessel_i_scaled(1, x)?;
    Ok(lambda * (1.0 - scaled))
}

/// Most negative correlation between two Poisson(λ) variables, attained by
/// the antithetic pair `F_λ⁻¹(U)`, `F_λ⁻¹(1 - U)`.
pub fn neg_bound(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let mut cdf = Vec::new();
    let mut sf = Vec::new();
    let mut n = 0;
    loop {
        let s = sf_unchecked(lambda, n);
        if s < 1e-17 {
            break;
        }
        sf.push(s);
        cdf.push(cdf_unchecked(lambda, n));
        n += 1;
    }
    // E[XY] = Σ_k Σ_ℓ (1 - c_ℓ - c_k) 1[c_ℓ + c_k < 1], with 1 - c_k = s_k.
    let mut cross = 0.0;
    for &s_k in &sf {
        for &c_l in &cdf {
            if c_l >= s_k {
                break;
            }
            cross += s_k - c_l;
        }
    }
    Ok(((cross - lambda * lambda) / lambda).clamp(-1.0, 0.0))
}

/// Most negative lag correlation reachable by superposition,
/// `min_p -p² κ(λ/p) / λ`, over the grid `p ∈ {0.001, …, 0.999}`.
/// Returns `(value, p_star)`.
pub fn super_neg_bound(lambda: f64) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, f64::NAN);
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        let v = super_pair_correlation(lambda, p)?;
        if v < best.0 {
            best = (v, p);
        }
    }
    Ok(best)
}

/// `-p² κ(λ/p) / λ` for one Bernoulli success probability `p`.
pub fn super_pair_correlation(lambda: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(-p * p * kappa(lambda / p)? / lambda)
}

/// Both negative-correlation bounds at one λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBound {
    pub lambda: f64,
    pub nb: f64,
    pub super_nb: f64,
    pub p_star: f64,
}

impl CorrelationBound {
    pub fn new(lambda: f64) -> Result<Self> {
        let nb = neg_bound(lambda)?;
        let (super_nb, p_star) = super_neg_bound(lambda)?;
        Ok(Self {
            lambda,
            nb,
            super_nb,
            p_star,
        })
    }
}
