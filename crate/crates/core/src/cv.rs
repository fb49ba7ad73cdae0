//! Cross-validation combined with multiple imputation.
//!
//! Validation-fold outcomes are masked before imputation, so the imputation
//! models and the prediction model only ever see the calibration outcomes.
//! Three ways of turning K imputations into per-individual predictions are
//! provided:
//!
//! * [`approach1`] re-draws the folds for every imputation, fits one model per
//!   single imputation and keeps K predictions per individual.
//! * [`approach2`] fixes the folds, imputes K times within each fold, pools the
//!   K coefficient vectors by their mean and applies the pooled model to each
//!   of the K completed validation rows.
//! * [`approach3`] is approach 2 with the K completed validation rows averaged
//!   into a single row before prediction.
//!
//! Every (repetition, fold) unit draws its randomness from its own derived
//! stream, so units run in parallel and results never depend on scheduling.
//! Approach 2 and 3 use the streams approach 1 uses for its first repetition,
//! which makes all three coincide at K = 1.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::glm::{fit_logistic, predict_proba, CoefficientVector, DesignMatrix};
use crate::impute::{impute_once, ImputationConfig};
use crate::rng::StreamSeed;

const FOLD_STREAM: u64 = 0;
const IMPUTATION_STREAM: u64 = 1;

/// Balanced assignment of rows to folds `0..fold_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    fold_count: usize,
}

impl FoldAssignment {
    pub fn fold_of(&self, row: usize) -> usize {
        self.fold_of[row]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    /// Rows of `fold`, ascending.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Uniformly random balanced partition of `n` rows into `folds` folds.
pub fn make_folds<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Result<FoldAssignment> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= L <= n, got L = {folds}, n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold_of = vec![0; n];
    for (position, &row) in order.iter().enumerate() {
        fold_of[row] = position % folds;
    }
    Ok(FoldAssignment {
        fold_of,
        fold_count: folds,
    })
}

/// Copy of `dataset` with the outcomes of `fold` hidden.
pub fn mask_fold_outcomes(dataset: &Dataset, folds: &FoldAssignment, fold: usize) -> Result<Dataset> {
    if folds.len() != dataset.nrows() {
        return Err(Error::Dimension(format!(
            "fold assignment covers {} rows, dataset has {}",
            folds.len(),
            dataset.nrows()
        )));
    }
    if fold >= folds.fold_count() {
        return Err(Error::InvalidArgument(format!(
            "fold {fold} out of range 0..{}",
            folds.fold_count()
        )));
    }
    Ok(dataset.with_outcomes_masked(folds.members(fold)))
}

/// Fold assignment used by approach 1 in repetition `k` (and by approaches 2
/// and 3 for `k = 0`).
pub fn folds_for_repetition(n: usize, folds: usize, seed: StreamSeed, k: usize) -> Result<FoldAssignment> {
    make_folds(n, folds, &mut seed.path(&[FOLD_STREAM, k as u64]).rng())
}

fn imputation_seed(seed: StreamSeed, k: usize, fold: usize) -> StreamSeed {
    seed.path(&[IMPUTATION_STREAM, k as u64, fold as u64])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SummaryKind {
    #[default]
    Mean,
    Median,
}

impl SummaryKind {
    pub fn name(self) -> &'static str {
        match self {
            SummaryKind::Mean => "mean",
            SummaryKind::Median => "median",
        }
    }
}

impl std::str::FromStr for SummaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(SummaryKind::Mean),
            "median" => Ok(SummaryKind::Median),
            other => Err(Error::InvalidArgument(format!("unknown summary `{other}`"))),
        }
    }
}

/// n x K matrix of per-individual predicted probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
    summary_kind: SummaryKind,
}

impl PredictionMatrix {
    pub fn new(nrows: usize, ncols: usize, values: Vec<f64>, summary_kind: SummaryKind) -> Result<Self> {
        if ncols == 0 {
            return Err(Error::InvalidArgument("prediction matrix needs K >= 1".into()));
        }
        if values.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values for {nrows}x{ncols} predictions",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidArgument(format!("prediction {bad} outside (0,1)")));
        }
        Ok(PredictionMatrix {
            nrows,
            ncols,
            values,
            summary_kind,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.ncols..(row + 1) * self.ncols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, col)).collect()
    }

    pub fn summary_kind(&self) -> SummaryKind {
        self.summary_kind
    }

    pub fn with_summary(mut self, kind: SummaryKind) -> Self {
        self.summary_kind = kind;
        self
    }

    /// Final prediction per individual.
    pub fn summarize(&self) -> Vec<f64> {
        summarize(self)
    }
}

/// Row-wise mean or median of a prediction matrix.
pub fn summarize(matrix: &PredictionMatrix) -> Vec<f64> {
    (0..matrix.nrows())
        .map(|i| {
            let row = matrix.row(i);
            match matrix.summary_kind() {
                SummaryKind::Mean => row.iter().sum::<f64>() / row.len() as f64,
                SummaryKind::Median => median(row),
            }
        })
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approach {
    /// Pool predictions from K single-imputation models with re-drawn folds.
    PredictionPooling,
    /// Pool coefficients across K imputations within fixed folds.
    CoefficientPooling,
    /// Coefficient pooling applied to the averaged imputed predictor row.
    AveragedImputations,
}

impl Approach {
    pub const ALL: [Approach; 3] = [
        Approach::PredictionPooling,
        Approach::CoefficientPooling,
        Approach::AveragedImputations,
    ];

    pub fn number(self) -> u8 {
        match self {
            Approach::PredictionPooling => 1,
            Approach::CoefficientPooling => 2,
            Approach::AveragedImputations => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Approach::PredictionPooling),
            2 => Ok(Approach::CoefficientPooling),
            3 => Ok(Approach::AveragedImputations),
            other => Err(Error::InvalidArgument(format!("no approach {other}"))),
        }
    }

    pub fn run(
        self,
        dataset: &Dataset,
        imputations: usize,
        folds: usize,
        config: &ImputationConfig,
        seed: StreamSeed,
    ) -> Result<PredictionMatrix> {
        match self {
            Approach::PredictionPooling => approach1(dataset, imputations, folds, config, seed),
            Approach::CoefficientPooling => approach2(dataset, imputations, folds, config, seed),
            Approach::AveragedImputations => approach3(dataset, imputations, folds, config, seed),
        }
    }
}

/// One imputation of a fold-masked dataset and the model fit on its
/// calibration rows.
struct FoldFit {
    coefficients: CoefficientVector,
    /// Completed predictor rows of the fold members, in member order.
    validation_rows: Vec<Vec<f64>>,
}

fn fit_imputed_fold(
    dataset: &Dataset,
    assignment: &FoldAssignment,
    fold: usize,
    members: &[usize],
    config: &ImputationConfig,
    seed: StreamSeed,
) -> Result<FoldFit> {
    let masked = mask_fold_outcomes(dataset, assignment, fold)?;
    let completed = impute_once(&masked, config, &mut seed.rng())?;
    let calibration: Vec<usize> = (0..masked.nrows())
        .filter(|&i| masked.outcome_mask()[i])
        .collect();
    let design = DesignMatrix::with_intercept(
        masked.ncols(),
        calibration.iter().map(|&i| completed.row(i)),
    );
    let outcome: Vec<f64> = calibration.iter().map(|&i| masked.outcome()[i]).collect();
    let (coefficients, _) = fit_logistic(&design, &outcome)?;
    Ok(FoldFit {
        coefficients,
        validation_rows: members.iter().map(|&i| completed.row(i).to_vec()).collect(),
    })
}

fn check_plan(dataset: &Dataset, imputations: usize, folds: usize) -> Result<()> {
    if imputations == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if folds < 2 || folds > dataset.nrows() {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= L <= n, got L = {folds}, n = {}",
            dataset.nrows()
        )));
    }
    Ok(())
}

fn at(k: usize, fold: usize) -> impl FnOnce(&mut crate::error::Location) {
    move |l| {
        l.repetition = Some(k + 1);
        l.fold = Some(fold + 1);
    }
}

/// Prediction pooling with folds re-drawn for every imputation.
pub fn approach1(
    dataset: &Dataset,
    imputations: usize,
    folds: usize,
    config: &ImputationConfig,
    seed: StreamSeed,
) -> Result<PredictionMatrix> {
    check_plan(dataset, imputations, folds)?;
    config.validate()?;
    let n = dataset.nrows();
    let assignments = (0..imputations)
        .map(|k| folds_for_repetition(n, folds, seed, k))
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, usize)> = (0..imputations)
        .flat_map(|k| (0..folds).map(move |l| (k, l)))
        .collect();

    let results = units
        .par_iter()
        .map(|&(k, l)| {
            let members = assignments[k].members(l);
            fit_imputed_fold(dataset, &assignments[k], l, &members, config, imputation_seed(seed, k, l))
                .and_then(|fit| {
                    fit.validation_rows
                        .iter()
                        .map(|row| predict_proba(&fit.coefficients, row))
                        .collect::<Result<Vec<f64>>>()
                })
                .map(|preds| (members, preds))
                .map_err(|e| e.locate(at(k, l)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = vec![f64::NAN; n * imputations];
    for (&(k, _), (members, preds)) in units.iter().zip(results) {
        for (i, p) in members.into_iter().zip(preds) {
            values[i * imputations + k] = p;
        }
    }
    PredictionMatrix::new(n, imputations, values, SummaryKind::Mean)
}

/// Per fold, the K imputation fits in imputation order.
fn fixed_fold_fits(
    dataset: &Dataset,
    imputations: usize,
    folds: usize,
    config: &ImputationConfig,
    seed: StreamSeed,
) -> Result<(FoldAssignment, Vec<Vec<usize>>, Vec<Vec<FoldFit>>)> {
    check_plan(dataset, imputations, folds)?;
    config.validate()?;
    let assignment = folds_for_repetition(dataset.nrows(), folds, seed, 0)?;
    let members: Vec<Vec<usize>> = (0..folds).map(|l| assignment.members(l)).collect();
    let units: Vec<(usize, usize)> = (0..folds)
        .flat_map(|l| (0..imputations).map(move |k| (l, k)))
        .collect();
    let mut fits = units
        .par_iter()
        .map(|&(l, k)| {
            fit_imputed_fold(dataset, &assignment, l, &members[l], config, imputation_seed(seed, k, l))
                .map_err(|e| e.locate(at(k, l)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let grouped = (0..folds)
        .map(|_| fits.by_ref().take(imputations).collect())
        .collect();
    Ok((assignment, members, grouped))
}

/// Rubin's-rule coefficient pooling within fixed folds.
pub fn approach2(
    dataset: &Dataset,
    imputations: usize,
    folds: usize,
    config: &ImputationConfig,
    seed: StreamSeed,
) -> Result<PredictionMatrix> {
    let (_, members, fits) = fixed_fold_fits(dataset, imputations, folds, config, seed)?;
    let n = dataset.nrows();
    let mut values = vec![f64::NAN; n * imputations];
    for (l, fold_fits) in fits.iter().enumerate() {
        let pooled = pool(fold_fits).map_err(|e| e.locate(|loc| loc.fold = Some(l + 1)))?;
        for (k, fit) in fold_fits.iter().enumerate() {
            for (&i, row) in members[l].iter().zip(&fit.validation_rows) {
                values[i * imputations + k] = predict_proba(&pooled, row)?;
            }
        }
    }
    PredictionMatrix::new(n, imputations, values, SummaryKind::Mean)
}

/// Coefficient pooling applied to each individual's averaged imputed row.
pub fn approach3(
    dataset: &Dataset,
    imputations: usize,
    folds: usize,
    config: &ImputationConfig,
    seed: StreamSeed,
) -> Result<PredictionMatrix> {
    let (_, members, fits) = fixed_fold_fits(dataset, imputations, folds, config, seed)?;
    let n = dataset.nrows();
    let mut values = vec![f64::NAN; n * imputations];
    for (l, fold_fits) in fits.iter().enumerate() {
        let pooled = pool(fold_fits).map_err(|e| e.locate(|loc| loc.fold = Some(l + 1)))?;
        for (m, &i) in members[l].iter().enumerate() {
            let rows: Vec<&[f64]> = fold_fits.iter().map(|f| f.validation_rows[m].as_slice()).collect();
            let averaged = average_imputed_row(dataset, i, &rows);
            let p = predict_proba(&pooled, &averaged)?;
            values[i * imputations..(i + 1) * imputations].fill(p);
        }
    }
    PredictionMatrix::new(n, imputations, values, SummaryKind::Mean)
}

fn pool(fits: &[FoldFit]) -> Result<CoefficientVector> {
    let vectors: Vec<CoefficientVector> = fits.iter().map(|f| f.coefficients.clone()).collect();
    CoefficientVector::mean(&vectors)
}

/// Element-wise mean of the completed rows of individual `i`. Observed cells
/// keep their value; averaged binary cells round to the nearer level with
/// ties going to 1.
pub fn average_imputed_row(dataset: &Dataset, i: usize, rows: &[&[f64]]) -> Vec<f64> {
    (0..dataset.ncols())
        .map(|j| {
            if let Some(v) = dataset.value(i, j) {
                return v;
            }
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            match dataset.columns()[j].kind {
                ColumnKind::Binary => {
                    if mean >= 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                }
                ColumnKind::Continuous => mean,
            }
        })
        .collect()
}
