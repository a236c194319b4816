//! Residual and marginal-adequacy diagnostics.

use crate::error::{Error, Result};
use crate::fit::{fit_ghk, ghk_predictive, FitResult, GhkConfig, ParticleSystem, PredictiveCdf};
use crate::generate::{copula_path, derive_seed, stream_rng, CountSeries, MeanModel};
use crate::latent_ar::LatentAR;
use crate::special::{count_cutpoints, normal_interval_mass, normal_pdf, poisson_ln_pmf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::io::Write;

/// `E[Z | X = x] = (φ(a) - φ(b)) / (Φ(b) - Φ(a))` for the copula cell
/// `(a, b]` of `x`; `None` when the cell carries no representable mass.
pub fn conditional_latent_mean(lambda: f64, x: u64) -> Option<f64> {
    let (a, b) = count_cutpoints(lambda, x);
    let mass = normal_interval_mass(a, b);
    if !(mass > 0.0) {
        return None;
    }
    let dens = |z: f64| if z.is_finite() { normal_pdf(z) } else { 0.0 };
    let v = (dens(a) - dens(b)) / mass;
    // rounding can nudge the ratio outside a very narrow cell
    Some(v.clamp(a, b))
}

/// Sample autocorrelations `ρ̂(0..=max_lag)` with the usual `1/n` normalization.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::domain("autocorrelation needs at least two values"));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Err(Error::domain("autocorrelation undefined for a constant series"));
    }
    Ok((0..=max_lag.min(n - 1))
        .map(|h| {
            let c: f64 = x[..n - h]
                .iter()
                .zip(&x[h..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum();
            c / n as f64 / c0
        })
        .collect())
}

/// Sample autocovariances `γ̂(0..=max_lag)` with `1/n` normalization.
pub fn sample_acvf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|h| {
            x[..n - h]
                .iter()
                .zip(&x[h..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Partial autocorrelations at lags `1..=acf.len()-1` by Durbin–Levinson.
pub fn pacf_from_acf(acf: &[f64]) -> Vec<f64> {
    let h = acf.len().saturating_sub(1);
    let mut out = Vec::with_capacity(h);
    let mut a: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for k in 1..=h {
        let num = acf[k] - (1..k).map(|j| a[j - 1] * acf[k - j]).sum::<f64>();
        let pi = if v > 0.0 { num / v } else { 0.0 };
        let mut next: Vec<f64> = (1..k).map(|j| a[j - 1] - pi * a[k - j - 1]).collect();
        next.push(pi);
        a = next;
        v *= 1.0 - pi * pi;
        out.push(pi);
    }
    out
}

/// Pearson goodness-of-fit of counts against Poisson(λ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// χ² test of IID counts against Poisson(λ), pooling adjacent categories
/// until each expected count is at least 5.
pub fn poisson_chi_square(counts: &[u64], lambda: f64) -> Result<ChiSquareTest> {
    if counts.is_empty() || !(lambda > 0.0) {
        return Err(Error::domain("chi-square test needs data and a positive mean"));
    }
    let n = counts.len() as f64;
    let max = *counts.iter().max().unwrap() as usize;
    let mut observed = vec![0.0; max + 1];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    // Cells 0..=K where the last cell is the upper tail {K, K+1, …}.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    let mut cdf = 0.0;
    let mut k = 0usize;
    loop {
        let p = poisson_ln_pmf(lambda, k as u64).exp();
        cdf += p;
        o_acc += observed.get(k).copied().unwrap_or(0.0);
        e_acc += n * p;
        let rest_expected = n * (1.0 - cdf).max(0.0);
        if e_acc >= 5.0 && rest_expected >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        } else if rest_expected < 5.0 {
            // Everything above k goes into the final cell.
            let o_rest: f64 = observed.iter().skip(k + 1).sum();
            cells.push((o_acc + o_rest, e_acc + rest_expected));
            break;
        }
        k += 1;
    }
    if cells.len() < 2 {
        return Err(Error::domain("too few categories for a chi-square test"));
    }
    let statistic = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len() - 1;
    let p_value = ChiSquared::new(df as f64).expect("df > 0").sf(statistic);
    Ok(ChiSquareTest { statistic, df, p_value })
}

/// Conditional-mean latent estimates and AR-filtered residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    /// `Ẑ_t = E[Z_t | X_t]`; `None` where the cell probability underflows.
    pub zhat: Vec<Option<f64>>,
    /// `R̂_t = Ẑ_t - Σ φ̂_k Ẑ_{t-k}` for `t > r`.
    pub rhat: Vec<Option<f64>>,
    pub order: usize,
}

impl ResidualSeries {
    /// Residuals available for correlation analysis.
    pub fn complete_residuals(&self) -> Vec<f64> {
        self.rhat.iter().flatten().copied().collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,zhat,rhat")?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10}"));
        for t in 0..self.zhat.len() {
            writeln!(w, "{},{},{}", t + 1, fmt(self.zhat[t]), fmt(self.rhat[t]))?;
        }
        Ok(())
    }
}

pub fn latent_residuals(series: &CountSeries, mean: &MeanModel, latent: &LatentAR) -> Result<ResidualSeries> {
    if mean.n() != series.len() {
        return Err(Error::Model(format!(
            "mean model has {} rows but the series has {} values",
            mean.n(),
            series.len()
        )));
    }
    let lambdas = mean.lambdas();
    let zhat: Vec<Option<f64>> = series
        .x
        .iter()
        .zip(&lambdas)
        .map(|(x, l)| conditional_latent_mean(*l, *x))
        .collect();
    let r = latent.order();
    let phi = latent.phi();
    let rhat = (0..zhat.len())
        .map(|t| {
            if t < r {
                return None;
            }
            let mut v = zhat[t]?;
            for k in 1..=r {
                v -= phi[k - 1] * zhat[t - k]?;
            }
            Some(v)
        })
        .collect();
    Ok(ResidualSeries { zhat, rhat, order: r })
}

/// Sample ACF and PACF with white-noise bands `±1.96/√n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfTable {
    /// Lags `0..=H`.
    pub acf: Vec<f64>,
    /// Lags `1..=H`.
    pub pacf: Vec<f64>,
    pub band: f64,
}

impl AcfTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lag,acf,pacf,band")?;
        for h in 1..self.acf.len() {
            writeln!(w, "{h},{:.10},{:.10},{:.10}", self.acf[h], self.pacf[h - 1], self.band)?;
        }
        Ok(())
    }
}

pub fn residual_acf(residuals: &[f64], max_lag: usize) -> Result<AcfTable> {
    if residuals.len() < 20 {
        return Err(Error::domain(format!(
            "residual correlations need at least 20 values, got {}",
            residuals.len()
        )));
    }
    let acf = sample_acf(residuals, max_lag)?;
    let pacf = pacf_from_acf(&acf);
    Ok(AcfTable {
        acf,
        pacf,
        band: 1.96 / (residuals.len() as f64).sqrt(),
    })
}

/// Nonrandomized PIT `F_t(u | y)` given `P_t(y-1)` and `P_t(y)`.
pub fn pit_cdf(u: f64, p: PredictiveCdf) -> f64 {
    if u <= p.lower {
        0.0
    } else if u >= p.upper {
        1.0
    } else {
        (u - p.lower) / (p.upper - p.lower)
    }
}

/// `F̄(u) = n⁻¹ Σ_t F_t(u | x_t)`.
pub fn mean_pit(u: f64, predictive: &[PredictiveCdf]) -> f64 {
    predictive.iter().map(|p| pit_cdf(u, *p)).sum::<f64>() / predictive.len() as f64
}

/// Ten-bin PIT histogram proportions.
pub fn pit_histogram(predictive: &[PredictiveCdf]) -> Vec<f64> {
    let edges: Vec<f64> = (0..=10).map(|i| mean_pit(i as f64 / 10.0, predictive)).collect();
    edges.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `Q = (1/10) Σ |f̂_i - 1/10|`.
pub fn q_statistic(bins: &[f64]) -> f64 {
    bins.iter().map(|f| (f - 0.1).abs()).sum::<f64>() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitConfig {
    /// Particles for the predictive distributions.
    pub m: usize,
    /// Grid points for `F̄` on `[0, 1]`.
    pub grid_size: usize,
    pub b_sims: usize,
    pub seed: u64,
    /// Refit every bootstrap series with this configuration.
    pub refit: Option<GhkConfig>,
}

impl Default for PitConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            grid_size: 101,
            b_sims: 200,
            seed: 1,
            refit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitSummary {
    /// `(u, F̄(u))` on the grid.
    pub fbar: Vec<(f64, f64)>,
    pub bins: Vec<f64>,
    pub q: f64,
    pub p_value: f64,
    pub b_sims: usize,
    /// Bootstrap values of `Q`.
    pub null_q: Vec<f64>,
    pub predictive: Vec<(f64, f64)>,
    pub warning: Option<String>,
}

impl PitSummary {
    pub fn write_bins_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin,lower,upper,proportion")?;
        for (i, f) in self.bins.iter().enumerate() {
            writeln!(w, "{},{:.1},{:.1},{:.10}", i + 1, i as f64 / 10.0, (i + 1) as f64 / 10.0, f)?;
        }
        Ok(())
    }

    pub fn write_fbar_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,fbar")?;
        for (u, f) in &self.fbar {
            writeln!(w, "{u:.6},{f:.10}")?;
        }
        Ok(())
    }
}

fn q_for(x: &[u64], lambdas: &[f64], latent: &LatentAR, particles: &ParticleSystem) -> Result<(f64, Vec<PredictiveCdf>)> {
    let (_, pred) = ghk_predictive(x, lambdas, latent, particles)?;
    Ok((q_statistic(&pit_histogram(&pred)), pred))
}

/// PIT histogram, `Q` and its parametric-bootstrap p-value for a fitted
/// copula model.
pub fn pit_summary(series: &CountSeries, fit: &FitResult, template: &MeanModel, config: &PitConfig) -> Result<PitSummary> {
    if template.n() != series.len() || fit.n != series.len() {
        return Err(Error::Model(format!(
            "fit covers {} values and the template {} rows, but the series has {}",
            fit.n,
            template.n(),
            series.len()
        )));
    }
    if config.grid_size < 2 {
        return Err(Error::domain("PIT grid needs at least two points"));
    }
    let n = series.len();
    let mean = fit.mean_model(template);
    let lambdas = mean.lambdas();
    let latent = fit.latent()?;
    let particles = ParticleSystem::new(n, config.m, config.seed)?;
    let (q, pred) = q_for(&series.x, &lambdas, &latent, &particles)?;
    let bins = pit_histogram(&pred);
    let fbar = (0..config.grid_size)
        .map(|i| {
            let u = i as f64 / (config.grid_size - 1) as f64;
            (u, mean_pit(u, &pred))
        })
        .collect();

    let r = latent.order();
    let null_q: Vec<f64> = (0..config.b_sims as u64)
        .into_par_iter()
        .map(|b| -> Result<f64> {
            let mut rng = stream_rng(config.seed, b + 1);
            let x = copula_path(&lambdas, &latent, &mut rng)?;
            match &config.refit {
                None => Ok(q_for(&x, &lambdas, &latent, &particles)?.0),
                Some(ghk) => {
                    let boot = CountSeries::new(x)?.with_covariates(template.columns.clone(), template.names.clone())?;
                    let cfg = GhkConfig {
                        seed: derive_seed(ghk.seed, b + 1),
                        standard_errors: false,
                        ..ghk.clone()
                    };
                    let refit = fit_ghk(&boot, template, r, &cfg)?;
                    let l = refit.mean_model(template).lambdas();
                    Ok(q_for(&boot.x, &l, &refit.latent()?, &particles)?.0)
                }
            }
        })
        .collect::<Result<_>>()?;
    let exceed = null_q.iter().filter(|v| **v >= q).count();
    let p_value = if null_q.is_empty() { f64::NAN } else { exceed as f64 / null_q.len() as f64 };
    let warning = (config.b_sims < 100).then(|| {
        format!("only {} bootstrap simulations; p-value resolution is coarse", config.b_sims)
    });
    Ok(PitSummary {
        fbar,
        bins,
        q,
        p_value,
        b_sims: config.b_sims,
        null_q,
        predictive: pred.iter().map(|p| (p.lower, p.upper)).collect(),
        warning,
    })
}
