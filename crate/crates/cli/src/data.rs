//! CSV ingestion.

use anyhow::{anyhow, bail, Context, Result};
use countseries::generate::{trend_column, CountSeries, MeanModel};
use std::path::Path;

/// Counts plus named covariate columns read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub counts: Vec<u64>,
    pub columns: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

fn parse_count(field: &str) -> Option<u64> {
    let field = field.trim();
    if let Ok(v) = field.parse::<u64>() {
        return Some(v);
    }
    let v: f64 = field.parse().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53)).then_some(v as u64)
}

pub fn read_table(path: &Path, count_col: &str, covariates: &[String]) -> Result<Table> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_table_from(file, count_col, covariates)
}

pub fn read_table_from<R: std::io::Read>(reader: R, count_col: &str, covariates: &[String]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().context("reading CSV header")?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column '{name}' not found in CSV header"))
    };
    let count_idx = find(count_col)?;
    let cov_idx: Vec<usize> = covariates.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut counts = Vec::new();
    let mut columns = vec![Vec::new(); covariates.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.with_context(|| format!("row {row}: malformed CSV record"))?;
        let field = record.get(count_idx).unwrap_or("");
        let count = parse_count(field)
            .ok_or_else(|| anyhow!("row {row}: count '{field}' in column '{count_col}' is not a nonnegative integer"))?;
        counts.push(count);
        for (j, &idx) in cov_idx.iter().enumerate() {
            let field = record.get(idx).unwrap_or("");
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| anyhow!("row {row}: covariate '{}' value '{field}' is not a finite number", covariates[j]))?;
            columns[j].push(v);
        }
    }
    if counts.is_empty() {
        bail!("input has no data rows");
    }
    Ok(Table {
        counts,
        columns,
        names: covariates.to_vec(),
    })
}

/// Series and a zero-parameter mean template with the trend column first,
/// if requested, followed by the named covariates.
pub fn series_and_template(table: &Table, trend: bool) -> Result<(CountSeries, MeanModel)> {
    let n = table.counts.len();
    let mut columns = Vec::new();
    let mut names = Vec::new();
    if trend {
        columns.push(trend_column(n));
        names.push("trend".to_string());
    }
    columns.extend(table.columns.iter().cloned());
    names.extend(table.names.iter().cloned());
    let series = CountSeries::new(table.counts.clone())?.with_covariates(columns.clone(), names.clone())?;
    let template = MeanModel::new(0.0, vec![0.0; columns.len()], columns, names)?;
    Ok((series, template))
}
