use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use super::config::{ExperimentConfig, InputSource, DESK_MAX_ROWS};
use crate::cv::Approach;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{build_report, MetricsReport, ReplicateMatrix, Stratum};
use crate::rng::StreamSeed;
use crate::sim;

const DATA_STREAM: u64 = 0;
const REPLICATE_STREAM: u64 = 1;

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_HEADER: &str = "approach,K,replicate,stratum,metric,value";

/// Seed of replicate `r` at `K` imputations. Independent of the approach,
/// so approaches see the same folds and imputation streams.
pub fn replicate_seed(master_seed: u64, imputations: usize, replicate: usize) -> StreamSeed {
    StreamSeed::new(master_seed).path(&[REPLICATE_STREAM, imputations as u64, replicate as u64])
}

pub fn data_seed(config: &ExperimentConfig) -> u64 {
    match &config.input {
        InputSource::Scenario { seed: Some(s), .. } => *s,
        _ => StreamSeed::new(config.master_seed).child(DATA_STREAM).value(),
    }
}

/// Loads the CSV or simulates the scenario named by the config.
pub fn load_input(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.input {
        InputSource::Csv {
            path,
            missing_token,
            outcome,
        } => io::load_csv(path, missing_token, outcome),
        InputSource::Scenario { name, n, .. } => {
            let scenario = sim::preset(name)?;
            let rows = match n {
                Some(n) => *n,
                None if config.full => scenario.n,
                None => scenario.n.min(DESK_MAX_ROWS),
            };
            scenario.with_n(rows).with_seed(data_seed(config)).generate()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub approach: Approach,
    pub imputations: usize,
    /// Final (summarized) predictions, one column per replicate.
    pub predictions: ReplicateMatrix,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    pub cells: Vec<CellResult>,
}

impl ExperimentResults {
    pub fn cell(&self, approach: Approach, imputations: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.approach == approach && c.imputations == imputations)
    }
}

fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs every (approach, K, replicate) analysis on `dataset`.
pub fn execute_on(dataset: &Dataset, config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let units: Vec<(Approach, usize, usize)> = config
        .approaches
        .iter()
        .flat_map(|&a| {
            config
                .k_values
                .iter()
                .flat_map(move |&k| (0..config.replicates).map(move |r| (a, k, r)))
        })
        .collect();

    let pool = thread_pool(config.parallelism)?;
    let finals = pool.install(|| {
        units
            .par_iter()
            .map(|&(approach, k, r)| {
                let seed = replicate_seed(config.master_seed, k, r);
                approach
                    .run(dataset, k, config.folds, &config.imputation, seed)
                    .map(|m| m.with_summary(config.summary).summarize())
                    .map_err(|e| {
                        e.locate(|l| {
                            l.approach = Some(approach.number());
                            l.imputations = Some(k);
                            l.replicate = Some(r + 1);
                        })
                    })
            })
            .collect::<Result<Vec<Vec<f64>>>>()
    })?;

    let mut finals = finals.into_iter();
    let mut cells = Vec::new();
    for &approach in &config.approaches {
        for &k in &config.k_values {
            let columns: Vec<Vec<f64>> = finals.by_ref().take(config.replicates).collect();
            let predictions = ReplicateMatrix::from_columns(&columns)?;
            let report = build_report(&predictions, dataset)?;
            info!(
                "approach {} K={k}: brier {:.4}, R missing {:?}, R complete {:?}",
                approach.number(),
                report.brier_full,
                report.r_missing.map(|s| s.percent),
                report.r_complete.map(|s| s.percent)
            );
            cells.push(CellResult {
                approach,
                imputations: k,
                predictions,
                report,
            });
        }
    }
    Ok(cells)
}

/// Loads the input and runs the experiment in memory.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let dataset = load_input(config)?;
    let cells = execute_on(&dataset, config)?;
    Ok(ExperimentResults {
        config: config.clone(),
        dataset,
        cells,
    })
}

/// Executes and writes all result files to `config.output`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResults> {
    let results = execute(config)?;
    write_results(&results, &config.output)?;
    Ok(results)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| x.to_string())
}

/// Long-format table: approach, K, replicate, stratum, metric, value.
/// Per-replicate rows carry `brier`; rows with replicate `all` carry the
/// replicate-averaged `brier_mean`, stratum size `rows`, and for the missing
/// and complete strata `r_percent` and `r_retained_rows`. Undefined values
/// are written as `NA`.
pub fn metrics_table(cells: &[CellResult]) -> String {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for cell in cells {
        let a = cell.approach.number();
        let k = cell.imputations;
        let report = &cell.report;
        for (r, b) in report.replicate_brier.iter().enumerate() {
            for stratum in Stratum::ALL {
                let _ = writeln!(
                    out,
                    "{a},{k},{},{},brier,{}",
                    r + 1,
                    stratum.name(),
                    fmt_opt(b.get(stratum))
                );
            }
        }
        for stratum in Stratum::ALL {
            let s = stratum.name();
            let _ = writeln!(out, "{a},{k},all,{s},brier_mean,{}", fmt_opt(report.brier(stratum)));
            let _ = writeln!(out, "{a},{k},all,{s},rows,{}", report.rows(stratum));
            if stratum != Stratum::Full {
                let spread = report.spread(stratum);
                let _ = writeln!(
                    out,
                    "{a},{k},all,{s},r_percent,{}",
                    fmt_opt(spread.map(|s| s.percent))
                );
                let _ = writeln!(
                    out,
                    "{a},{k},all,{s},r_retained_rows,{}",
                    spread.map_or_else(|| "NA".to_owned(), |s| s.retained_rows.to_string())
                );
            }
        }
    }
    out
}

/// Per-individual replicate predictions for one cell.
pub fn predictions_table(cell: &CellResult, dataset: &Dataset) -> String {
    let mut out = String::from("row,outcome,has_missing");
    let r = cell.predictions.replicate_count();
    for j in 1..=r {
        let _ = write!(out, ",replicate_{j}");
    }
    out.push('\n');
    for i in 0..cell.predictions.nrows() {
        let _ = write!(
            out,
            "{},{},{}",
            i + 1,
            dataset.outcome()[i],
            u8::from(dataset.row_has_missing(i))
        );
        for v in cell.predictions.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn predictions_file_name(approach: Approach, imputations: usize) -> String {
    format!("predictions_a{}_k{imputations}.csv", approach.number())
}

fn manifest(results: &ExperimentResults) -> String {
    let config = &results.config;
    let mut out = config.to_text();
    let _ = writeln!(out, "\n[manifest]");
    let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "rows = {}", results.dataset.nrows());
    let _ = writeln!(out, "predictors = {}", results.dataset.ncols());
    let _ = writeln!(out, "missing_rows = {}", crate::metrics::stratify(&results.dataset).missing.len());
    if matches!(config.input, InputSource::Scenario { .. }) {
        let _ = writeln!(out, "data_seed = {}", data_seed(config));
    }
    let _ = writeln!(out, "\n[seeds]");
    for &k in &config.k_values {
        for r in 0..config.replicates {
            let _ = writeln!(
                out,
                "K{k}.replicate{} = {:#018x}",
                r + 1,
                replicate_seed(config.master_seed, k, r).value()
            );
        }
    }
    out
}

fn write_file(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Writes metrics, per-cell predictions, the analysed data and the manifest.
pub fn write_results(results: &ExperimentResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(dir.join(METRICS_FILE), &metrics_table(&results.cells))?;
    for cell in &results.cells {
        write_file(
            dir.join(predictions_file_name(cell.approach, cell.imputations)),
            &predictions_table(cell, &results.dataset),
        )?;
    }
    io::save_csv(&results.dataset, dir.join("data.csv"), io::DEFAULT_MISSING_TOKEN)?;
    write_file(dir.join(MANIFEST_FILE), &manifest(results))
}
