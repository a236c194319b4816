//! Causal AR(r) kernel for the latent Gaussian process, standardized to unit
//! marginal variance, plus the Cholesky solves used for nonstationary
//! prediction systems.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Causal autoregression `Z_t = φ₁Z_{t-1} + … + φ_r Z_{t-r} + ε_t` with
/// `Var(Z_t) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentAR {
    phi: Vec<f64>,
    sigma_eps: f64,
    /// ρ(0..=r)
    acf: Vec<f64>,
    /// Durbin–Levinson rows: `rows[k]` predicts from the last `k` values.
    rows: Vec<Vec<f64>>,
    /// One-step mean squared errors matching `rows`.
    mse: Vec<f64>,
}

/// One-step prediction state for a single path.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionState {
    /// Mean of the next value given the history.
    pub zhat: f64,
    /// Standard deviation of the next value given the history.
    pub r_t: f64,
    /// Retained history, most recent first, at most `r` values.
    pub history: Vec<f64>,
    /// Number of values observed so far.
    pub t: usize,
}

impl LatentAR {
    /// Validates causality and derives the unit-variance parameterization.
    pub fn new(phi: &[f64]) -> Result<Self> {
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::Model(format!("non-finite AR coefficient in {phi:?}")));
        }
        let pacf = match pacf_from_phi(phi) {
            Some(p) if p.iter().all(|v| v.abs() < 1.0) => p,
            _ => {
                return Err(Error::NonCausal {
                    roots: offending_roots(phi),
                })
            }
        };
        let r = phi.len();
        // Durbin–Levinson forward pass on the partial autocorrelations.
        let mut rows: Vec<Vec<f64>> = vec![Vec::new()];
        let mut mse = vec![1.0];
        let mut acf = vec![1.0];
        for k in 1..=r {
            let prev = &rows[k - 1];
            let pi = pacf[k - 1];
            let rho_k = pi * mse[k - 1] + (1..k).map(|j| prev[j - 1] * acf[k - j]).sum::<f64>();
            acf.push(rho_k);
            let mut row = Vec::with_capacity(k);
            for j in 1..k {
                row.push(prev[j - 1] - pi * prev[k - j - 1]);
            }
            row.push(pi);
            rows.push(row);
            mse.push(mse[k - 1] * (1.0 - pi * pi));
        }
        let sigma2 = 1.0 - phi.iter().zip(&acf[1..]).map(|(p, r)| p * r).sum::<f64>();
        if !(sigma2 > 0.0) {
            return Err(Error::NonCausal {
                roots: offending_roots(phi),
            });
        }
        Ok(Self {
            phi: phi.to_vec(),
            sigma_eps: sigma2.sqrt(),
            acf,
            rows,
            mse,
        })
    }

    /// White-noise latent process.
    pub fn white_noise() -> Self {
        Self::new(&[]).expect("empty AR is causal")
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    /// Partial autocorrelations `π_1..π_r`.
    pub fn pacf(&self) -> Vec<f64> {
        self.rows.iter().skip(1).map(|row| *row.last().unwrap()).collect()
    }

    /// `ρ_Z(0..=max_lag)`.
    pub fn autocorrelations(&self, max_lag: usize) -> Vec<f64> {
        let r = self.order();
        let mut out: Vec<f64> = self.acf.iter().copied().take(max_lag + 1).collect();
        for h in out.len()..=max_lag {
            let v = (1..=r).map(|j| self.phi[j - 1] * out[h - j]).sum();
            out.push(v);
        }
        out
    }

    pub fn acf(&self, lag: usize) -> f64 {
        if lag < self.acf.len() {
            self.acf[lag]
        } else {
            self.autocorrelations(lag)[lag]
        }
    }

    /// Prediction coefficients (applied to the history, most recent first) and
    /// the one-step standard deviation when `available` past values exist.
    pub fn predictor(&self, available: usize) -> (&[f64], f64) {
        let k = available.min(self.order());
        (&self.rows[k], self.mse[k].sqrt())
    }

    pub fn start(&self) -> PredictionState {
        PredictionState {
            zhat: 0.0,
            r_t: 1.0,
            history: Vec::with_capacity(self.order()),
            t: 0,
        }
    }

    /// Absorbs `z_new` and returns the prediction for the following time.
    pub fn one_step(&self, state: &PredictionState, z_new: f64) -> PredictionState {
        let mut history = state.history.clone();
        if self.order() > 0 {
            history.insert(0, z_new);
            history.truncate(self.order());
        }
        let t = state.t + 1;
        let (row, sd) = self.predictor(t);
        let zhat = row.iter().zip(&history).map(|(a, z)| a * z).sum();
        PredictionState {
            zhat,
            r_t: sd,
            history,
            t,
        }
    }

    /// Exactly stationary path of length `n`.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let r = self.order();
        let mut z = Vec::with_capacity(n);
        for t in 0..n {
            let (row, sd) = self.predictor(t);
            let mean: f64 = row.iter().enumerate().map(|(j, a)| a * z[t - 1 - j]).sum();
            let eps: f64 = rng.sample(StandardNormal);
            z.push(mean + sd * eps);
            debug_assert!(row.len() <= r);
        }
        z
    }
}

/// Step-down recursion from AR coefficients to partial autocorrelations.
/// `None` if some intermediate partial autocorrelation has modulus one.
pub fn pacf_from_phi(phi: &[f64]) -> Option<Vec<f64>> {
    let r = phi.len();
    let mut a = phi.to_vec();
    let mut pacf = vec![0.0; r];
    for k in (1..=r).rev() {
        let pi = a[k - 1];
        pacf[k - 1] = pi;
        if k == 1 {
            break;
        }
        let denom = 1.0 - pi * pi;
        if !(denom > 0.0) {
            return None;
        }
        let prev: Vec<f64> = (1..k).map(|j| (a[j - 1] + pi * a[k - j - 1]) / denom).collect();
        a = prev;
    }
    Some(pacf)
}

/// Levinson recursion from partial autocorrelations in `(-1, 1)` to AR
/// coefficients of a causal model.
pub fn phi_from_pacf(pacf: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(pacf.len());
    for (idx, &pi) in pacf.iter().enumerate() {
        let k = idx + 1;
        let mut next: Vec<f64> = (1..k).map(|j| a[j - 1] - pi * a[k - j - 1]).collect();
        next.push(pi);
        a = next;
    }
    a
}

/// Roots of `1 - φ₁z - … - φ_r z^r` with modulus at most one, as `(re, im)`.
fn offending_roots(phi: &[f64]) -> Vec<(f64, f64)> {
    let r = phi.len();
    if r == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(r, r);
    for j in 0..r {
        companion[(0, j)] = phi[j];
    }
    for i in 1..r {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|w| w.norm() >= 1.0 - 1e-12)
        .map(|w| {
            let z = w.inv();
            (z.re, z.im)
        })
        .collect()
}

/// Lower-triangular Cholesky factor `Γ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

/// Pivots at or below this value are treated as a loss of positive definiteness.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

impl Cholesky {
    pub fn factor(cov: &DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if cov.ncols() != n {
            return Err(Error::domain(format!(
                "covariance must be square, got {}x{}",
                n,
                cov.ncols()
            )));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = cov[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > PIVOT_TOLERANCE) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = cov[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `L y = b` using the leading `b.len()` block.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; b.len()];
        for i in 0..b.len() {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y` using the leading `y.len()` block.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `Γ_k w = b` with `Γ_k` the leading `k = b.len()` block.
    pub fn solve_leading(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }
}

/// Solves the prediction equations `Γ w = γ` by Cholesky factorization and
/// forward/backward substitution.
pub fn cholesky_predictors(cov: &DMatrix<f64>, target: &[f64]) -> Result<Vec<f64>> {
    if target.len() != cov.nrows() {
        return Err(Error::domain(format!(
            "target length {} does not match system size {}",
            target.len(),
            cov.nrows()
        )));
    }
    Ok(Cholesky::factor(cov)?.solve_leading(target))
}
