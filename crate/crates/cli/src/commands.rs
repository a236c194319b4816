//! The six workflows.

use crate::config::{Command, Family, Settings};
use crate::data::{read_table, series_and_template};
use anyhow::{anyhow, bail, Context, Result};
use countseries::copula_link::{hermite_coefficients, CorrelationBound};
use countseries::diagnose::{latent_residuals, pit_summary, residual_acf, PitConfig};
use countseries::fit::{fit_ghk, fit_linear_prediction, FitResult};
use countseries::generate::*;
use countseries::latent_ar::LatentAR;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// What a run printed, warned about and wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

/// Machine-readable record written next to every run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub settings: Settings,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

/// Fitted models written by `fit` and read by `diagnose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub model: Family,
    pub count_col: String,
    pub covariates: Vec<String>,
    pub trend: bool,
    pub n: usize,
    pub orders: Vec<usize>,
    pub fits: Vec<FitResult>,
    /// Index of the fit with the lowest AIC.
    pub selected: usize,
}

struct Run<'a> {
    settings: &'a Settings,
    out: Outcome,
}

impl Run<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.settings.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.out.outputs.push(path);
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn warn(&mut self, msg: String) {
        self.out.warnings.push(msg);
    }
}

pub fn run(settings: &Settings) -> Result<Outcome> {
    settings.validate()?;
    fs::create_dir_all(&settings.out_dir)
        .with_context(|| format!("creating output directory {}", settings.out_dir.display()))?;
    let mut run = Run {
        settings,
        out: Outcome::default(),
    };
    match settings.command {
        Command::Simulate => simulate(&mut run)?,
        Command::Fit => fit(&mut run)?,
        Command::Diagnose => diagnose(&mut run)?,
        Command::Bounds => bounds(&mut run)?,
        Command::Link => link(&mut run)?,
        Command::Simstudy => simstudy(&mut run)?,
    }
    let record = RunRecord {
        tool: "countseries".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        settings: settings.clone(),
        outputs: run
            .out
            .outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        warnings: run.out.warnings.clone(),
    };
    run.write("run.toml", settings.to_toml()?.as_bytes())?;
    run.write("run.json", (serde_json::to_string_pretty(&record)? + "\n").as_bytes())?;
    Ok(run.out)
}

/// Slow-mixing heuristic for binomial thinning: the lag-h autocorrelation is
/// `α^h`, so it takes `ln 0.01 / ln α` steps to fall below 0.01.
pub fn thinning_warning(alpha: f64) -> Option<String> {
    if alpha < 0.95 || alpha >= 1.0 {
        return None;
    }
    let steps = (0.01f64.ln() / alpha.ln()).ceil();
    Some(format!(
        "alpha = {alpha}: near-unit thinning mixes slowly; the autocorrelation alpha^h needs about {steps} steps to fall below 0.01"
    ))
}

fn simulation_mean(s: &Settings, n: usize) -> Result<MeanModel> {
    if s.design {
        return Ok(design_mean(n)?);
    }
    match s.mu {
        Some(mu) => {
            let (columns, names) = if s.trend {
                (vec![trend_column(n)], vec!["trend".to_string()])
            } else {
                (Vec::new(), Vec::new())
            };
            if s.beta.len() != columns.len() {
                bail!("--beta has {} values but the mean has {} covariates", s.beta.len(), columns.len());
            }
            Ok(MeanModel::new(mu, s.beta.clone(), columns, names)?)
        }
        None => Ok(MeanModel::constant(s.lambda, n)?),
    }
}

fn simulate_series(s: &Settings, n: usize, seed: u64) -> Result<CountSeries> {
    let stationary_only = matches!(s.model, Family::Dar1 | Family::Inar1 | Family::Cinar);
    if stationary_only && (s.design || s.mu.is_some()) {
        bail!("{} supports only a constant --lambda", s.model.tag());
    }
    let series = match s.model {
        Family::Dar1 => gen_dar1(s.lambda, s.p, n, seed)?,
        Family::Inar1 => gen_inar1(s.lambda, s.alpha, n, seed)?,
        Family::Cinar => gen_cinar(s.lambda, s.alpha, &s.weights, n, seed, s.burn_in)?,
        Family::SuperRenewal => {
            let mean = simulation_mean(s, n)?;
            let lifetime = RenewalLifetime::new(s.lifetime.clone())?;
            gen_super_renewal(&mean.lambdas(), &lifetime, seed)?.with_covariates(mean.columns, mean.names)?
        }
        Family::SuperClipped => {
            let mean = simulation_mean(s, n)?;
            gen_super_clipped(&mean.lambdas(), &LatentAR::new(&s.phi)?, seed)?
                .with_covariates(mean.columns, mean.names)?
        }
        Family::Copula => gen_copula(&simulation_mean(s, n)?, &LatentAR::new(&s.phi)?, seed)?,
    };
    Ok(series)
}

fn simulate(run: &mut Run) -> Result<()> {
    let s = run.settings;
    if matches!(s.model, Family::Inar1 | Family::Cinar) {
        if let Some(w) = thinning_warning(s.alpha) {
            run.warn(w);
        }
    }
    let series = simulate_series(s, s.n, s.seed)?;
    run.write_with("series.csv", |w| series.write_csv(w))?;
    let mean = series.x.iter().sum::<u64>() as f64 / series.len() as f64;
    run.out.stdout = format!(
        "simulated {} values from {} (seed {}), sample mean {:.4}\n",
        series.len(),
        s.model.tag(),
        s.seed,
        mean
    );
    Ok(())
}

fn superposition_dependence(s: &Settings, n: usize) -> Result<(f64, Vec<f64>)> {
    match s.model {
        Family::SuperRenewal => {
            let lifetime = RenewalLifetime::new(s.lifetime.clone())?;
            Ok((lifetime.p(), lifetime.autocovariances(n)))
        }
        Family::SuperClipped => {
            let chain = ClippedGaussian {
                latent: LatentAR::new(&s.phi)?,
            };
            Ok((chain.p(), chain.autocovariances(n)))
        }
        other => bail!("{} has no superposition dependence", other.tag()),
    }
}

fn fit_models(s: &Settings, series: &CountSeries, template: &MeanModel) -> Result<(Vec<usize>, Vec<FitResult>)> {
    match s.model {
        Family::Copula => {
            let ghk = s.ghk();
            let fits = s
                .latent_order
                .iter()
                .map(|&r| fit_ghk(series, template, r, &ghk).with_context(|| format!("fitting latent order {r}")))
                .collect::<Result<_>>()?;
            Ok((s.latent_order.clone(), fits))
        }
        Family::SuperRenewal | Family::SuperClipped => {
            let (p, gamma_b) = superposition_dependence(s, series.len())?;
            let fit = fit_linear_prediction(series, template, p, &gamma_b, &s.optimizer())?;
            Ok((vec![0], vec![fit]))
        }
        other => bail!(
            "fitting is available for copula, super-renewal and super-clipped models, not {}",
            other.tag()
        ),
    }
}

fn lowest(values: impl Iterator<Item = Option<f64>>) -> Option<usize> {
    values
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn fit(run: &mut Run) -> Result<()> {
    let s = run.settings;
    let input = s.input.as_ref().ok_or_else(|| anyhow!("fit needs --input"))?;
    let table = read_table(input, &s.count_col, &s.covariates)?;
    let (series, template) = series_and_template(&table, s.trend)?;
    let (orders, fits) = fit_models(s, &series, &template)?;
    let best_aic = lowest(fits.iter().map(|f| f.aic));
    let best_bic = lowest(fits.iter().map(|f| f.bic));

    let mut ic = String::from("model,r,k,loglik,sse,aic,bic,lowest_aic,lowest_bic,converged,evaluations\n");
    let mut params = String::from("model,r,parameter,estimate,se\n");
    for (i, (r, f)) in orders.iter().zip(&fits).enumerate() {
        let _ = writeln!(
            ic,
            "{},{r},{},{},{},{},{},{},{},{},{}",
            s.model.tag(),
            f.n_params(),
            opt(f.loglik),
            opt(f.sse),
            opt(f.aic),
            opt(f.bic),
            best_aic == Some(i),
            best_bic == Some(i),
            f.converged,
            f.evaluations
        );
        for (j, (name, est)) in f.param_names.iter().zip(f.estimates()).enumerate() {
            let se = f.se.as_ref().map(|se| se[j]);
            let _ = writeln!(params, "{},{r},{name},{est},{}", s.model.tag(), opt(se));
        }
    }
    run.write("fit_ic.csv", ic.as_bytes())?;
    run.write("fit_params.csv", params.as_bytes())?;

    let mut text = format!("{} fit, n = {}\n", s.model.tag(), series.len());
    for (i, (r, f)) in orders.iter().zip(&fits).enumerate() {
        let mark = |best: Option<usize>| if best == Some(i) { "*" } else { " " };
        let label = match (s.model, r) {
            (Family::Copula, 0) => "WN".to_string(),
            (Family::Copula, r) => format!("AR{r}"),
            _ => "LP".to_string(),
        };
        match (f.loglik, f.aic, f.bic) {
            (Some(ll), Some(aic), Some(bic)) => {
                let _ = writeln!(
                    text,
                    "{label:<4} loglik {ll:>11.4}  AIC {aic:>10.4}{}  BIC {bic:>10.4}{}",
                    mark(best_aic),
                    mark(best_bic)
                );
            }
            _ => {
                let _ = writeln!(text, "{label:<4} SSE {:.4}", f.sse.unwrap_or(f64::NAN));
            }
        }
        for (j, (name, est)) in f.param_names.iter().zip(f.estimates()).enumerate() {
            match f.se.as_ref() {
                Some(se) => {
                    let _ = writeln!(text, "     {name:<16} {est:>12.6} ({:.6})", se[j]);
                }
                None => {
                    let _ = writeln!(text, "     {name:<16} {est:>12.6}");
                }
            }
        }
        if let Some(d) = &f.se_diagnostic {
            run.warn(format!("{label}: {d}"));
        }
        if !f.converged {
            run.warn(format!("{label}: optimizer did not converge"));
        }
    }
    if fits.len() > 1 {
        text.push_str("* lowest criterion\n");
    }
    run.out.stdout = text;

    let record = FitRecord {
        model: s.model,
        count_col: s.count_col.clone(),
        covariates: s.covariates.clone(),
        trend: s.trend,
        n: series.len(),
        orders,
        fits,
        selected: best_aic.unwrap_or(0),
    };
    run.write("fit.json", (serde_json::to_string_pretty(&record)? + "\n").as_bytes())?;
    Ok(())
}

pub fn read_fit_record(path: &Path) -> Result<FitRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading fit record {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing fit record {}", path.display()))
}

fn diagnose(run: &mut Run) -> Result<()> {
    let s = run.settings;
    let input = s.input.as_ref().ok_or_else(|| anyhow!("diagnose needs --input"))?;
    let record_path = s.fit_record.as_ref().ok_or_else(|| anyhow!("diagnose needs --fit-record"))?;
    let record = read_fit_record(record_path)?;
    if record.model != Family::Copula {
        bail!("diagnostics need a copula fit, the record holds {}", record.model.tag());
    }
    let table = read_table(input, &record.count_col, &record.covariates)?;
    if table.counts.len() != record.n {
        bail!(
            "fit record covers {} observations but {} has {}",
            record.n,
            input.display(),
            table.counts.len()
        );
    }
    let (series, template) = series_and_template(&table, record.trend)?;
    let fit = record
        .fits
        .get(record.selected)
        .ok_or_else(|| anyhow!("fit record selects a missing fit"))?;
    if fit.theta_hat.len() != template.n_params() {
        bail!(
            "fit record has {} mean parameters but the data give {}",
            fit.theta_hat.len(),
            template.n_params()
        );
    }
    let latent = fit.latent()?;
    let residuals = latent_residuals(&series, &fit.mean_model(&template), &latent)?;
    let missing = residuals.zhat.iter().filter(|z| z.is_none()).count();
    if missing > 0 {
        run.warn(format!("{missing} latent estimates missing: cell probability underflow"));
    }
    run.write_with("residuals.csv", |w| residuals.write_csv(w))?;
    match residual_acf(&residuals.complete_residuals(), s.max_lag) {
        Ok(acf) => run.write_with("acf.csv", |w| acf.write_csv(w))?,
        Err(e) => run.warn(format!("residual correlations skipped: {e}")),
    }
    let config = PitConfig {
        m: s.particles,
        b_sims: s.bootstrap_sims,
        seed: s.seed,
        refit: s.bootstrap_refit.then(|| s.ghk()),
        ..PitConfig::default()
    };
    let pit = pit_summary(&series, fit, &template, &config)?;
    if let Some(w) = &pit.warning {
        run.warn(w.clone());
    }
    run.write_with("pit_bins.csv", |w| pit.write_bins_csv(w))?;
    run.write_with("pit_fbar.csv", |w| pit.write_fbar_csv(w))?;
    let summary = format!(
        "q,p_value,b_sims,latent_order\n{:.4},{:.4},{},{}\n",
        pit.q,
        pit.p_value,
        pit.b_sims,
        latent.order()
    );
    run.write("pit_summary.csv", summary.as_bytes())?;
    run.out.stdout = format!(
        "latent order {}: Q = {:.4}, p-value = {:.4} ({} bootstrap series)\n",
        latent.order(),
        pit.q,
        pit.p_value,
        pit.b_sims
    );
    Ok(())
}

fn bounds(run: &mut Run) -> Result<()> {
    let s = run.settings;
    if !(s.lambda_min > 0.0 && s.lambda_max >= s.lambda_min && s.lambda_step > 0.0) {
        bail!("need 0 < --lambda-min <= --lambda-max and --lambda-step > 0");
    }
    let steps = ((s.lambda_max - s.lambda_min) / s.lambda_step + 1e-9).floor() as usize;
    let rows: Vec<CorrelationBound> = (0..=steps)
        .into_par_iter()
        .map(|i| CorrelationBound::new(s.lambda_min + i as f64 * s.lambda_step))
        .collect::<countseries::Result<_>>()?;
    let mut csv = String::from("lambda,nb,super_nb,p_star\n");
    for b in &rows {
        let _ = writeln!(csv, "{:.6},{},{},{}", b.lambda, b.nb, b.super_nb, b.p_star);
    }
    run.write("bounds.csv", csv.as_bytes())?;
    let min = rows.iter().min_by(|a, b| a.nb.total_cmp(&b.nb)).expect("nonempty grid");
    run.out.stdout = format!(
        "{} grid points; most negative copula bound {:.4} at lambda {:.4}\n",
        rows.len(),
        min.nb,
        min.lambda
    );
    Ok(())
}

fn link(run: &mut Run) -> Result<()> {
    let s = run.settings;
    if s.u_points < 2 {
        bail!("--u-points must be at least 2");
    }
    let last = (s.u_points - 1) as f64;
    let grid: Vec<f64> = (0..s.u_points).map(|i| (2.0 * i as f64 - last) / last).collect();
    let mut coef = String::from("lambda,k,g,eta\n");
    let mut curve = String::from("lambda,u,link\n");
    let mut text = String::new();
    for &lambda in &s.lambdas {
        let h = hermite_coefficients(lambda, s.truncation)?;
        for (k, (g, eta)) in h.g().iter().zip(h.eta()).enumerate() {
            let _ = writeln!(coef, "{lambda},{},{g},{eta}", k + 1);
        }
        let mut worst: f64 = 0.0;
        for &u in &grid {
            let l = h.link(u)?;
            worst = worst.max((l - u).abs());
            let _ = writeln!(curve, "{lambda},{u},{l}");
        }
        let _ = writeln!(
            text,
            "lambda {lambda}: L(1) = {:.6}, truncated mass {:.6}, max |L(u) - u| = {worst:.4}",
            h.link(1.0)?,
            h.tail_mass()
        );
    }
    run.write("link_coefficients.csv", coef.as_bytes())?;
    run.write("link.csv", curve.as_bytes())?;
    run.out.stdout = text;
    Ok(())
}

/// One replicate of the simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub n: usize,
    pub index: usize,
    pub fit: std::result::Result<FitResult, String>,
}

pub fn simstudy_replicates(s: &Settings, n: usize) -> Result<Vec<Replicate>> {
    let template = design_mean(n)?;
    let truth = template.clone();
    let latent = LatentAR::new(&s.phi)?;
    let base = derive_seed(s.seed, n as u64);
    let out = (0..s.replicates)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(base, index as u64);
            let fit = (|| -> countseries::Result<FitResult> {
                match s.model {
                    Family::Copula => {
                        let series = gen_copula(&truth, &latent, seed)?;
                        let mut ghk = s.ghk();
                        ghk.seed = derive_seed(seed, 1);
                        fit_ghk(&series, &template, latent.order(), &ghk)
                    }
                    _ => {
                        let chain = ClippedGaussian { latent: latent.clone() };
                        let series = gen_super_clipped(&truth.lambdas(), &latent, seed)?
                            .with_covariates(truth.columns.clone(), truth.names.clone())?;
                        fit_linear_prediction(&series, &template, chain.p(), &chain.autocovariances(n), &s.optimizer())
                    }
                }
            })()
            .map_err(|e| e.to_string());
            Replicate { n, index, fit }
        })
        .collect();
    Ok(out)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let m = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, var.sqrt())
}

fn simstudy(run: &mut Run) -> Result<()> {
    let s = run.settings;
    if !matches!(s.model, Family::Copula | Family::SuperClipped) {
        bail!("simstudy replays the copula and super-clipped designs, not {}", s.model.tag());
    }
    if s.replicates < 2 {
        bail!("simstudy needs at least two replicates");
    }
    let mut reps_csv = String::new();
    let mut summary = String::new();
    let mut text = format!("{} design, {} replicates per length\n", s.model.tag(), s.replicates);
    for &n in &s.sizes {
        let reps = simstudy_replicates(s, n)?;
        let ok: Vec<&FitResult> = reps.iter().filter_map(|r| r.fit.as_ref().ok()).collect();
        let failed = reps.len() - ok.len();
        if failed > 0 {
            run.warn(format!("n = {n}: {failed} replicates failed and were excluded"));
        }
        let names = ok.first().map(|f| f.param_names.clone()).ok_or_else(|| anyhow!("n = {n}: every replicate failed"))?;
        if reps_csv.is_empty() {
            reps_csv = format!(
                "n,replicate,converged,{},{}\n",
                names.join(","),
                names.iter().map(|p| format!("se_{p}")).collect::<Vec<_>>().join(",")
            );
            summary = format!("n,stat,{}\n", names.join(","));
            let _ = writeln!(text, "{:>5} {:<8}{}", "n", "", names.iter().map(|p| format!("{p:>12}")).collect::<String>());
        }
        for r in &reps {
            if let Ok(f) = &r.fit {
                let se = f.se.clone().unwrap_or_default();
                let est = f.estimates();
                let _ = writeln!(
                    reps_csv,
                    "{n},{},{},{},{}",
                    r.index + 1,
                    f.converged,
                    est.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                    (0..est.len()).map(|j| opt(se.get(j).copied())).collect::<Vec<_>>().join(",")
                );
            }
        }
        let k = names.len();
        let cols: Vec<Vec<f64>> = (0..k).map(|j| ok.iter().map(|f| f.estimates()[j]).collect()).collect();
        let stats: Vec<(f64, f64)> = cols.iter().map(|c| mean_sd(c)).collect();
        let mean_se: Option<Vec<f64>> = (0..k)
            .map(|j| {
                let v: Vec<f64> = ok.iter().filter_map(|f| f.se.as_ref().map(|se| se[j])).collect();
                (v.len() == ok.len()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        let mut rows = vec![
            ("mean", stats.iter().map(|s| s.0).collect::<Vec<_>>()),
            ("SD", stats.iter().map(|s| s.1).collect()),
        ];
        if let Some(se) = mean_se {
            rows.push(("mean_se", se));
        }
        for (label, vals) in rows {
            let _ = writeln!(
                summary,
                "{n},{label},{}",
                vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            );
            let _ = writeln!(text, "{n:>5} {label:<8}{}", vals.iter().map(|v| format!("{v:>12.5}")).collect::<String>());
        }
    }
    run.write("simstudy_replicates.csv", reps_csv.as_bytes())?;
    run.write("simstudy_summary.csv", summary.as_bytes())?;
    run.out.stdout = text;
    Ok(())
}
