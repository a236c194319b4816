//! Scalar special functions: Poisson CDF/quantile, standard normal
//! CDF/PDF/quantile, modified Bessel functions of order 0 and 1, and
//! truncated-normal sampling and moments.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Above this mean the Poisson CDF goes through the regularized incomplete
/// gamma function instead of direct summation.
const DIRECT_SUM_MAX_LAMBDA: f64 = 30.0;

/// Mean of a Poisson marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonParam(f64);

impl PoissonParam {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self(lambda))
    }

    pub fn lambda(self) -> f64 {
        self.0
    }

    pub fn cdf(self, n: i64) -> f64 {
        cdf_unchecked(self.0, n)
    }

    pub fn sf(self, n: i64) -> f64 {
        sf_unchecked(self.0, n)
    }
}

/// Interval `(lo, hi]` on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::domain(format!("invalid interval ({lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub const fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x <= self.hi
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::domain(format!(
            "Poisson mean must be finite and positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Natural log of the Poisson probability mass at `k`.
pub fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    let k = k as f64;
    k * lambda.ln() - lambda - ln_gamma(k + 1.0)
}

/// Poisson probability mass at `k`.
pub fn poisson_pmf(lambda: f64, k: i64) -> Result<f64> {
    check_lambda(lambda)?;
    if k < 0 {
        return Ok(0.0);
    }
    Ok(poisson_ln_pmf(lambda, k as u64).exp())
}

/// `F_λ(n) = P(X ≤ n)` for `X ~ Poisson(λ)`; zero for negative `n`.
pub fn poisson_cdf(lambda: f64, n: i64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(cdf_unchecked(lambda, n))
}

/// Upper tail `P(X > n)`, computed without the `1 - F` cancellation.
pub fn poisson_sf(lambda: f64, n: i64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(sf_unchecked(lambda, n))
}

pub(crate) fn cdf_unchecked(lambda: f64, n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    if lambda > DIRECT_SUM_MAX_LAMBDA {
        return gamma_ur(n as f64 + 1.0, lambda);
    }
    let mut term = (-lambda).exp();
    let mut sum = term;
    for k in 1..=n {
        term *= lambda / k as f64;
        sum += term;
        if term < sum * 1e-18 && k as f64 > lambda {
            break;
        }
    }
    sum.min(1.0)
}

pub(crate) fn sf_unchecked(lambda: f64, n: i64) -> f64 {
    if n < 0 {
        return 1.0;
    }
    if lambda > DIRECT_SUM_MAX_LAMBDA {
        return gamma_lr(n as f64 + 1.0, lambda);
    }
    let cdf = cdf_unchecked(lambda, n);
    if cdf < 0.5 {
        return 1.0 - cdf;
    }
    // Sum the upper tail directly.
    let mut k = n as u64 + 1;
    let mut term = poisson_ln_pmf(lambda, k).exp();
    let mut sum = 0.0;
    while term > 0.0 {
        sum += term;
        k += 1;
        term *= lambda / k as f64;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Quantile `inf{t : F_λ(t) ≥ u}` for `0 ≤ u < 1`.
pub fn poisson_quantile(lambda: f64, u: f64) -> Result<u64> {
    check_lambda(lambda)?;
    if !(0.0..1.0).contains(&u) {
        return Err(Error::domain(format!(
            "Poisson quantile needs 0 <= u < 1, got {u}"
        )));
    }
    Ok(bisect_count(lambda, |t| cdf_unchecked(lambda, t) >= u))
}

/// Smallest `t` with `P(X > t) ≤ v`. Equivalent to `poisson_quantile(λ, 1 - v)`
/// but keeps precision when `v` is tiny.
pub fn poisson_quantile_upper(lambda: f64, v: f64) -> Result<u64> {
    check_lambda(lambda)?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::domain(format!(
            "upper-tail Poisson quantile needs 0 < v <= 1, got {v}"
        )));
    }
    Ok(bisect_count(lambda, |t| sf_unchecked(lambda, t) <= v))
}

/// Smallest nonnegative integer satisfying a monotone predicate, found by
/// bracketing from `⌊λ⌋` and bisecting.
fn bisect_count(lambda: f64, pred: impl Fn(i64) -> bool) -> u64 {
    let seed = lambda.floor() as i64;
    let (mut lo, mut hi);
    if pred(seed) {
        // pred(hi) holds; walk down until it fails or reaches -1.
        hi = seed;
        let mut step = 1;
        loop {
            let cand = hi - step;
            if cand < 0 {
                lo = -1;
                break;
            }
            if pred(cand) {
                hi = cand;
                step *= 2;
            } else {
                lo = cand;
                break;
            }
        }
    } else {
        lo = seed;
        let mut step = 1 + (lambda.sqrt() as i64);
        loop {
            let cand = lo + step;
            if pred(cand) {
                hi = cand;
                break;
            }
            lo = cand;
            step *= 2;
        }
    }
    // Invariant: pred(lo) false (or lo = -1), pred(hi) true.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi as u64
}

/// Standard normal CDF Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density φ(z).
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `Φ(hi) - Φ(lo)`, using whichever tail keeps the difference accurate.
pub fn normal_interval_mass(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        normal_cdf(-lo) - normal_cdf(-hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

/// Standard normal quantile Φ⁻¹(u), with Φ⁻¹(0) = -∞ and Φ⁻¹(1) = +∞.
///
/// Wichura's AS 241 (PPND16) rational approximations; relative accuracy
/// about 1e-16. Interior arguments are clamped to `[1e-300, 1 - 1e-16]`.
pub fn normal_quantile(u: f64) -> Result<f64> {
    if u.is_nan() || !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!(
            "normal quantile needs 0 <= u <= 1, got {u}"
        )));
    }
    if u == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if u == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(ppnd16(u.clamp(1e-300, 1.0 - 1e-16)))
}

/// Φ⁻¹(1 - v) computed from the upper-tail probability `v`.
pub fn normal_quantile_upper(v: f64) -> Result<f64> {
    normal_quantile(v).map(|z| -z)
}

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545_5 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414_1e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506_1e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_9e-4) * r
                + 1.519_866_656_361_645_7e-2)
                * r
                + 1.481_039_764_274_800_7e-1)
                * r
                + 6.897_673_349_851_000_2e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446_0e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 1.369_298_809_227_358_1e-1)
                * r
                + 5.998_322_065_558_879_8e-1)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Modified Bessel function of the first kind `I_j(x)` for `j ∈ {0, 1}`.
pub fn bessel_i(j: u32, x: f64) -> Result<f64> {
    let scaled = bessel_i_scaled(j, x)?;
    Ok(scaled * x.exp())
}

/// Exponentially scaled `e^{-x} I_j(x)` for `j ∈ {0, 1}`; finite for all `x ≥ 0`.
pub fn bessel_i_scaled(j: u32, x: f64) -> Result<f64> {
    if j > 1 {
        return Err(Error::domain(format!("bessel_i order must be 0 or 1, got {j}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("bessel_i needs x >= 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x <= 30.0 {
        Ok(bessel_series_scaled(j, x))
    } else {
        Ok(bessel_asymptotic_scaled(j, x))
    }
}

fn bessel_series_scaled(j: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let quarter_sq = half * half;
    let mut term = (-x).exp() * if j == 1 { half } else { 1.0 };
    let mut sum = term;
    let mut n = 1.0;
    loop {
        term *= quarter_sq / (n * (n + j as f64));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        n += 1.0;
    }
    sum
}

/// Large-argument expansion `e^{-x} I_ν(x) ≈ (2πx)^{-1/2} Σ (-1)^k a_k(ν) / x^k`.
fn bessel_asymptotic_scaled(j: u32, x: f64) -> f64 {
    let mu = 4.0 * (j * j) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Draw from `N(mean, sd²)` truncated to `interval` by inversion of the uniform `u`.
///
/// Deterministic and strictly increasing in `u`. The upper tail is handled by
/// reflection so intervals far out in either tail keep full precision.
pub fn truncated_normal_sample(mean: f64, sd: f64, interval: Interval, u: f64) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::domain(format!("truncated normal needs sd > 0, got {sd}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!("uniform variate out of range: {u}")));
    }
    let alpha = (interval.lo - mean) / sd;
    let beta = (interval.hi - mean) / sd;
    let z = truncated_std_normal_inverse(alpha, beta, u).ok_or(Error::DegenerateInterval {
        lo: interval.lo,
        hi: interval.hi,
    })?;
    let x = mean + sd * z;
    Ok(clamp_open(x, interval.lo, interval.hi))
}

/// Inverse CDF of the standard normal truncated to `(alpha, beta]`; `None`
/// when the interval carries no representable mass.
pub(crate) fn truncated_std_normal_inverse(alpha: f64, beta: f64, u: f64) -> Option<f64> {
    truncated_std_normal_step(alpha, beta, u).map(|(_, z)| z)
}

/// Mass `Φ(beta) - Φ(alpha)` together with the inverse-CDF draw for `u`.
pub(crate) fn truncated_std_normal_step(alpha: f64, beta: f64, u: f64) -> Option<(f64, f64)> {
    if alpha > 0.0 {
        // Reflect: -Z lives on [-beta, -alpha) with -alpha < 0.
        let p_lo = normal_cdf(-beta);
        let p_hi = normal_cdf(-alpha);
        let mass = p_hi - p_lo;
        if !(mass > 0.0) {
            return None;
        }
        let v = p_lo + (1.0 - u) * mass;
        Some((mass, -ppnd_safe(v)))
    } else {
        let p_lo = normal_cdf(alpha);
        let p_hi = normal_cdf(beta);
        let mass = p_hi - p_lo;
        if !(mass > 0.0) {
            return None;
        }
        let v = p_lo + u * mass;
        Some((mass, ppnd_safe(v)))
    }
}

/// Normal-scale cutpoints `(Φ⁻¹(F_λ(x-1)), Φ⁻¹(F_λ(x))]` of the count `x`,
/// with `-∞` for `x = 0`. Upper-tail values are computed from the survival
/// function.
pub fn count_cutpoints(lambda: f64, x: u64) -> (f64, f64) {
    let z = |k: i64| -> f64 {
        if k < 0 {
            return f64::NEG_INFINITY;
        }
        let c = cdf_unchecked(lambda, k);
        if c <= 0.5 {
            ppnd_safe(c)
        } else {
            -ppnd_safe(sf_unchecked(lambda, k))
        }
    };
    (z(x as i64 - 1), z(x as i64))
}

fn ppnd_safe(v: f64) -> f64 {
    if v <= 0.0 {
        f64::NEG_INFINITY
    } else if v >= 1.0 {
        f64::INFINITY
    } else {
        ppnd16(v.clamp(1e-300, 1.0 - 1e-16))
    }
}

fn clamp_open(x: f64, lo: f64, hi: f64) -> f64 {
    let mut x = x;
    if x <= lo {
        x = lo.next_up();
    }
    if x >= hi {
        x = hi.next_down();
    }
    x
}

/// Mean of `N(mean, sd²)` truncated to `(lo, hi]`.
pub fn truncated_normal_mean(mean: f64, sd: f64, interval: Interval) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::domain(format!("truncated normal needs sd > 0, got {sd}")));
    }
    let alpha = (interval.lo - mean) / sd;
    let beta = (interval.hi - mean) / sd;
    let mass = normal_interval_mass(alpha, beta);
    if !(mass > 0.0) {
        return Err(Error::DegenerateInterval {
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    let shift = (normal_pdf(alpha) - normal_pdf(beta)) / mass;
    Ok(clamp_open(mean + sd * shift, interval.lo, interval.hi))
}

/// Variance of `N(mean, sd²)` truncated to `(lo, hi]`.
pub fn truncated_normal_variance(mean: f64, sd: f64, interval: Interval) -> Result<f64> {
    let alpha = (interval.lo - mean) / sd;
    let beta = (interval.hi - mean) / sd;
    let mass = normal_interval_mass(alpha, beta);
    if !(mass > 0.0) || !(sd > 0.0) {
        return Err(Error::DegenerateInterval {
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    let (pa, pb) = (normal_pdf(alpha), normal_pdf(beta));
    let a_term = if alpha.is_finite() { alpha * pa } else { 0.0 };
    let b_term = if beta.is_finite() { beta * pb } else { 0.0 };
    let shift = (pa - pb) / mass;
    Ok(sd * sd * (1.0 + (a_term - b_term) / mass - shift * shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn poisson_cdf_edges() {
        assert_eq!(poisson_cdf(1.0, -1).unwrap(), 0.0);
        assert_abs_diff_eq!(poisson_cdf(1.0, 0).unwrap(), (-1.0f64).exp(), epsilon = 1e-16);
        assert!(poisson_cdf(0.0, 3).is_err());
        assert!(poisson_cdf(f64::NAN, 3).is_err());
        assert!(poisson_cdf(f64::INFINITY, 3).is_err());
    }

    #[test]
    fn poisson_cdf_exact_rational_sum() {
        // 2^0/0! + 2/1! + 4/2! + 8/3! = 19/3
        let expected = (-2.0f64).exp() * 19.0 / 3.0;
        assert_abs_diff_eq!(poisson_cdf(2.0, 3).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn cdf_regimes_agree_across_threshold() {
        // Direct summation at exactly 30, incomplete gamma just above.
        for n in [10, 25, 30, 35, 50] {
            let direct = cdf_unchecked(30.0, n);
            let gamma = gamma_ur(n as f64 + 1.0, 30.0);
            assert!((direct - gamma).abs() < 1e-12, "n={n}: {direct} vs {gamma}");
        }
    }

    #[test]
    fn sf_complements_cdf() {
        for &lambda in &[0.3, 2.0, 12.0, 45.0] {
            for n in 0..60 {
                let f = poisson_cdf(lambda, n).unwrap();
                let s = poisson_sf(lambda, n).unwrap();
                assert!((f + s - 1.0).abs() < 1e-12, "lambda={lambda} n={n}");
            }
        }
        // Far tail keeps relative precision.
        let s = poisson_sf(2.0, 30).unwrap();
        let first = poisson_pmf(2.0, 31).unwrap();
        assert!(s > first && s < 1.1 * first);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(poisson_quantile(1.0, 0.0).unwrap(), 0);
        assert_eq!(poisson_quantile(1.0, 0.5).unwrap(), 1);
        assert!(poisson_quantile(1.0, 1.0).is_err());
        assert!(poisson_quantile(1.0, -0.1).is_err());
        let q = poisson_quantile(5.0, 0.999).unwrap();
        assert!(poisson_cdf(5.0, q as i64).unwrap() >= 0.999);
        assert!(poisson_cdf(5.0, q as i64 - 1).unwrap() < 0.999);
    }

    #[test]
    fn upper_quantile_matches_lower() {
        for &lambda in &[0.2, 3.0, 40.0] {
            for &v in &[0.9, 0.5, 0.1, 1e-3, 1e-6] {
                let a = poisson_quantile_upper(lambda, v).unwrap();
                let b = poisson_quantile(lambda, 1.0 - v).unwrap();
                assert!(a.abs_diff(b) <= 1, "lambda={lambda} v={v}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn normal_basics() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert_eq!(normal_quantile(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(normal_quantile(1.0).unwrap(), f64::INFINITY);
        assert!(normal_quantile(1.5).is_err());
        let z = normal_quantile(0.975).unwrap();
        assert_abs_diff_eq!(z, 1.959_963_984_540_054, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_cdf(z), 0.975, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_pdf(0.0), FRAC_1_SQRT_2PI, epsilon = 1e-16);
    }

    #[test]
    fn bessel_examples() {
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1, 0.0).unwrap(), 0.0);
        assert!(bessel_i(2, 1.0).is_err());
        assert!(bessel_i(0, -1.0).is_err());
        // 40-term series oracle at x = 4; remainder is below 1e-30.
        let mut oracle = 0.0;
        let mut fact = 1.0f64;
        for n in 0..40 {
            if n > 0 {
                fact *= n as f64;
            }
            oracle += 2.0f64.powi(2 * n) / (fact * fact);
        }
        assert_abs_diff_eq!(bessel_i(0, 4.0).unwrap(), oracle, epsilon = 1e-10);
    }

    #[test]
    fn bessel_branches_meet() {
        for j in 0..2 {
            let below = bessel_series_scaled(j, 30.0);
            let above = bessel_asymptotic_scaled(j, 30.0);
            assert!((below - above).abs() < 1e-14, "j={j}: {below} vs {above}");
        }
        // Scaled form stays finite where the unscaled one overflows.
        let s = bessel_i_scaled(0, 4.0e4).unwrap();
        assert!(s.is_finite() && s > 0.0);
        assert!((s * (2.0 * std::f64::consts::PI * 4.0e4).sqrt() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn truncated_sampling_examples() {
        let x = truncated_normal_sample(0.0, 1.0, Interval::real_line(), 0.5).unwrap();
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-15);
        let half = Interval::new(0.0, f64::INFINITY).unwrap();
        for i in 0..=1000 {
            let u = i as f64 / 1000.0;
            let x = truncated_normal_sample(0.0, 1.0, half, u).unwrap();
            assert!(x > 0.0, "u={u} gave {x}");
        }
        let err = truncated_normal_sample(0.0, 1.0, Interval::new(60.0, 61.0).unwrap(), 0.5);
        assert!(matches!(err, Err(Error::DegenerateInterval { .. })));
    }

    #[test]
    fn truncated_sampling_deep_tail() {
        let iv = Interval::new(9.0, 9.5).unwrap();
        let x = truncated_normal_sample(0.0, 1.0, iv, 0.3).unwrap();
        assert!(iv.contains(x) && x < 9.5);
        let iv = Interval::new(-12.0, -11.0).unwrap();
        let x = truncated_normal_sample(0.0, 1.0, iv, 0.7).unwrap();
        assert!(x > -12.0 && x < -11.0);
    }

    #[test]
    fn truncated_moments_symmetric() {
        let iv = Interval::new(-1.0, 1.0).unwrap();
        assert_abs_diff_eq!(truncated_normal_mean(0.0, 1.0, iv).unwrap(), 0.0, epsilon = 1e-15);
        let v = truncated_normal_variance(0.0, 1.0, iv).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}
