//! Summary tables built from a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use super::run::{MANIFEST_FILE, METRICS_FILE, METRICS_HEADER};
use crate::error::{Error, Result};
use crate::metrics::Stratum;

pub const BRIER_TABLE: &str = "brier_vs_k.csv";
pub const SPREAD_TABLE: &str = "r_vs_k.csv";

/// One line of the long-format metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub approach: u8,
    pub imputations: usize,
    /// `None` for rows aggregated over replicates.
    pub replicate: Option<usize>,
    pub stratum: Stratum,
    pub metric: String,
    /// `None` when the metric is undefined (`NA`).
    pub value: Option<f64>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses the text of a metrics table written by the runner.
pub fn parse_metrics(text: &str) -> Result<Vec<MetricRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == METRICS_HEADER => {}
        _ => return Err(parse_error(1, format!("expected header `{METRICS_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim_end();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        let [approach, k, replicate, stratum, metric, value] = fields[..] else {
            return Err(parse_error(line, format!("expected 6 fields, found {}", fields.len())));
        };
        let approach: u8 = approach
            .parse()
            .map_err(|_| parse_error(line, format!("bad approach `{approach}`")))?;
        let imputations: usize = k.parse().map_err(|_| parse_error(line, format!("bad K `{k}`")))?;
        let replicate = match replicate {
            "all" => None,
            r => Some(
                r.parse()
                    .map_err(|_| parse_error(line, format!("bad replicate `{r}`")))?,
            ),
        };
        let stratum =
            Stratum::parse(stratum).ok_or_else(|| parse_error(line, format!("bad stratum `{stratum}`")))?;
        if metric.is_empty() {
            return Err(parse_error(line, "empty metric name"));
        }
        let value = match value {
            "NA" => None,
            v => Some(
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_error(line, format!("bad value `{v}`")))?,
            ),
        };
        rows.push(MetricRow {
            approach,
            imputations,
            replicate,
            stratum,
            metric: metric.to_owned(),
            value,
        });
    }
    Ok(rows)
}

/// Config part of a manifest; the trailing `[manifest]` and `[seeds]`
/// sections are bookkeeping.
fn manifest_config(text: &str) -> Result<ExperimentConfig> {
    let config_text = text.split("\n[manifest]").next().unwrap_or("");
    ExperimentConfig::parse(config_text, None)
}

/// Brier and R tables by approach, K and stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTables {
    pub brier: String,
    pub spread: String,
}

/// Builds the summary tables from a manifest and metrics table.
pub fn summarize_results(manifest: &str, metrics: &str) -> Result<SummaryTables> {
    let config = manifest_config(manifest)?;
    let rows = parse_metrics(metrics)?;
    let aggregate: BTreeMap<(u8, usize, &str, &str), Option<f64>> = rows
        .iter()
        .filter(|r| r.replicate.is_none())
        .map(|r| ((r.approach, r.imputations, r.stratum.name(), r.metric.as_str()), r.value))
        .collect();
    let lookup = |a: u8, k: usize, s: Stratum, metric: &str| {
        aggregate
            .get(&(a, k, s.name(), metric))
            .copied()
            .ok_or_else(|| {
                Error::InvalidDataset(format!(
                    "partial results: no `{metric}` for approach {a}, K={k}, stratum {}",
                    s.name()
                ))
            })
    };

    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_owned(), |x| x.to_string());
    let mut brier = String::from("approach,K,stratum,brier\n");
    let mut spread = String::from("approach,K,stratum,r_percent\n");
    for approach in &config.approaches {
        let a = approach.number();
        for &k in &config.k_values {
            for stratum in Stratum::ALL {
                let value = lookup(a, k, stratum, "brier_mean")?;
                let _ = writeln!(brier, "{a},{k},{},{}", stratum.name(), na(value));
                if stratum == Stratum::Full {
                    continue;
                }
                let r = lookup(a, k, stratum, "r_percent")?;
                // K = 1 coincides across approaches, so only the raw table keeps it.
                if k != 1 {
                    let _ = writeln!(spread, "{a},{k},{},{}", stratum.name(), na(r));
                }
            }
        }
    }
    Ok(SummaryTables { brier, spread })
}

/// Reads `results_dir` and writes the Brier and R tables to `out_dir`.
pub fn report(results_dir: &Path, out_dir: &Path) -> Result<SummaryTables> {
    let read = |name: &str| {
        let path = results_dir.join(name);
        fs::read_to_string(&path).map_err(|e| Error::io(path, e))
    };
    let manifest = read(MANIFEST_FILE)?;
    let metrics = read(METRICS_FILE)?;
    let tables = summarize_results(&manifest, &metrics)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (name, body) in [(BRIER_TABLE, &tables.brier), (SPREAD_TABLE, &tables.spread)] {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(tables)
}
