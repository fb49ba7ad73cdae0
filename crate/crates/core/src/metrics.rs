//! Accuracy and replicate-spread measures.
//!
//! The Brier score is computed per replicate analysis and averaged. The
//! spread measure R pools the deviations of each individual's replicate
//! predictions from their mean, keeping only individuals whose mean
//! prediction lies in [0.2, 0.8], and reports the 10%-90% interpercentile
//! range in percentage points.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Lower bound of the retained mean-prediction band.
pub const SPREAD_BAND_LOW: f64 = 0.2;
/// Upper bound of the retained mean-prediction band.
pub const SPREAD_BAND_HIGH: f64 = 0.8;

/// n x R matrix of final predictions across replicate analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMatrix {
    nrows: usize,
    replicates: usize,
    values: Vec<f64>,
}

impl ReplicateMatrix {
    pub fn new(nrows: usize, replicates: usize, values: Vec<f64>) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        if values.len() != nrows * replicates {
            return Err(Error::Dimension(format!(
                "{} values for {nrows}x{replicates} replicate matrix",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidArgument(format!("prediction {bad} outside (0,1)")));
        }
        Ok(ReplicateMatrix {
            nrows,
            replicates,
            values,
        })
    }

    /// Assembles a matrix from one prediction vector per replicate.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let nrows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::Dimension("replicate columns differ in length".into()));
        }
        let r = columns.len();
        let mut values = vec![0.0; nrows * r];
        for (c, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * r + c] = v;
            }
        }
        ReplicateMatrix::new(nrows, r, values)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn replicate_count(&self) -> usize {
        self.replicates
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.replicates..(i + 1) * self.replicates]
    }

    pub fn column(&self, r: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i)[r]).collect()
    }
}

/// Mean squared difference between predictions and 0/1 outcomes.
pub fn brier_score(predictions: &[f64], outcomes: &[f64]) -> Result<f64> {
    if predictions.len() != outcomes.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} outcomes",
            predictions.len(),
            outcomes.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("Brier score of an empty set".into()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(outcomes)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Percentile of sorted data by linear interpolation between order
/// statistics (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    /// (Q0.9 - Q0.1) x 100 of the pooled deviations; 0 when nothing was retained.
    pub percent: f64,
    /// Individuals whose mean prediction fell inside the band.
    pub retained_rows: usize,
}

impl Spread {
    /// True when no individual passed the band filter.
    pub fn is_empty(&self) -> bool {
        self.retained_rows == 0
    }
}

/// Replicate spread R over the individuals in `subset`.
pub fn spread_measure(replicates: &ReplicateMatrix, subset: &[usize]) -> Result<Spread> {
    if replicates.replicate_count() < 2 {
        return Err(Error::InvalidArgument(
            "spread needs at least two replicates".into(),
        ));
    }
    if subset.is_empty() {
        return Err(Error::InvalidArgument("spread over an empty subset".into()));
    }
    let mut deviations = Vec::new();
    let mut retained_rows = 0;
    for &i in subset {
        if i >= replicates.nrows() {
            return Err(Error::Dimension(format!("row {i} out of range")));
        }
        let row = replicates.row(i);
        // Centred on the first entry so constant rows have zero deviations.
        let offset = row[0];
        let mean = offset + row.iter().map(|p| p - offset).sum::<f64>() / row.len() as f64;
        if !(SPREAD_BAND_LOW..=SPREAD_BAND_HIGH).contains(&mean) {
            continue;
        }
        retained_rows += 1;
        deviations.extend(row.iter().map(|p| p - mean));
    }
    if deviations.is_empty() {
        return Ok(Spread {
            percent: 0.0,
            retained_rows: 0,
        });
    }
    deviations.sort_by(f64::total_cmp);
    let percent = (quantile_sorted(&deviations, 0.9) - quantile_sorted(&deviations, 0.1)) * 100.0;
    Ok(Spread {
        percent,
        retained_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stratum {
    Full,
    Missing,
    Complete,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::Full, Stratum::Missing, Stratum::Complete];

    pub fn name(self) -> &'static str {
        match self {
            Stratum::Full => "full",
            Stratum::Missing => "missing",
            Stratum::Complete => "complete",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Stratum::ALL.into_iter().find(|st| st.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strata {
    /// Rows with at least one unobserved predictor cell.
    pub missing: Vec<usize>,
    pub complete: Vec<usize>,
}

/// Splits rows by predictor missingness; the outcome mask is ignored.
pub fn stratify(dataset: &Dataset) -> Strata {
    let (missing, complete) = (0..dataset.nrows()).partition(|&i| dataset.row_has_missing(i));
    Strata { missing, complete }
}

/// Brier scores of one replicate; strata without rows have none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateBrier {
    pub full: f64,
    pub missing: Option<f64>,
    pub complete: Option<f64>,
}

impl ReplicateBrier {
    pub fn get(&self, stratum: Stratum) -> Option<f64> {
        match stratum {
            Stratum::Full => Some(self.full),
            Stratum::Missing => self.missing,
            Stratum::Complete => self.complete,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub replicate_brier: Vec<ReplicateBrier>,
    pub brier_full: f64,
    pub brier_missing_only: Option<f64>,
    pub brier_complete_only: Option<f64>,
    /// `None` with a single replicate or an empty stratum.
    pub r_missing: Option<Spread>,
    pub r_complete: Option<Spread>,
    pub n_rows: usize,
    pub n_missing: usize,
    pub n_complete: usize,
}

impl MetricsReport {
    pub fn brier(&self, stratum: Stratum) -> Option<f64> {
        match stratum {
            Stratum::Full => Some(self.brier_full),
            Stratum::Missing => self.brier_missing_only,
            Stratum::Complete => self.brier_complete_only,
        }
    }

    pub fn spread(&self, stratum: Stratum) -> Option<Spread> {
        match stratum {
            Stratum::Full => None,
            Stratum::Missing => self.r_missing,
            Stratum::Complete => self.r_complete,
        }
    }

    pub fn rows(&self, stratum: Stratum) -> usize {
        match stratum {
            Stratum::Full => self.n_rows,
            Stratum::Missing => self.n_missing,
            Stratum::Complete => self.n_complete,
        }
    }
}

fn subset_brier(predictions: &[f64], outcomes: &[f64], rows: &[usize]) -> Result<Option<f64>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let p: Vec<f64> = rows.iter().map(|&i| predictions[i]).collect();
    let y: Vec<f64> = rows.iter().map(|&i| outcomes[i]).collect();
    brier_score(&p, &y).map(Some)
}

/// Replicate-averaged Brier scores per stratum and the spread R for the
/// missing and complete strata.
pub fn build_report(replicates: &ReplicateMatrix, dataset: &Dataset) -> Result<MetricsReport> {
    if replicates.nrows() != dataset.nrows() {
        return Err(Error::Dimension(format!(
            "{} prediction rows for {} dataset rows",
            replicates.nrows(),
            dataset.nrows()
        )));
    }
    if dataset.outcome_mask().iter().any(|&m| !m) {
        return Err(Error::InvalidDataset(
            "metrics need every outcome observed".into(),
        ));
    }
    let outcomes = dataset.outcome();
    let strata = stratify(dataset);
    let all: Vec<usize> = (0..dataset.nrows()).collect();

    let replicate_brier = (0..replicates.replicate_count())
        .map(|r| {
            let preds = replicates.column(r);
            Ok(ReplicateBrier {
                full: brier_score(&preds, outcomes)?,
                missing: subset_brier(&preds, outcomes, &strata.missing)?,
                complete: subset_brier(&preds, outcomes, &strata.complete)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let average = |stratum: Stratum| -> Option<f64> {
        let values: Vec<f64> = replicate_brier.iter().filter_map(|b| b.get(stratum)).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    let spread = |rows: &[usize]| -> Result<Option<Spread>> {
        if replicates.replicate_count() < 2 || rows.is_empty() {
            Ok(None)
        } else {
            spread_measure(replicates, rows).map(Some)
        }
    };

    Ok(MetricsReport {
        brier_full: average(Stratum::Full).expect("at least one replicate"),
        brier_missing_only: average(Stratum::Missing),
        brier_complete_only: average(Stratum::Complete),
        r_missing: spread(&strata.missing)?,
        r_complete: spread(&strata.complete)?,
        n_rows: all.len(),
        n_missing: strata.missing.len(),
        n_complete: strata.complete.len(),
        replicate_brier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, ColumnKind};

    #[test]
    fn brier_examples() {
        assert_eq!(brier_score(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(brier_score(&[0.5; 4], &[0.0, 1.0, 1.0, 0.0]).unwrap(), 0.25);
        let b = brier_score(&[0.8, 0.3], &[1.0, 0.0]).unwrap();
        assert!((b - 0.065).abs() < 1e-15);
        assert!(brier_score(&[], &[]).is_err());
        assert!(brier_score(&[0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn type7_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
        assert!((quantile_sorted(&x, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&x, 0.9) - 3.7).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn spread_identical_columns_is_zero() {
        let m = ReplicateMatrix::from_columns(&[vec![0.3, 0.5, 0.7], vec![0.3, 0.5, 0.7]]).unwrap();
        let s = spread_measure(&m, &[0, 1, 2]).unwrap();
        assert_eq!(s.percent, 0.0);
        assert_eq!(s.retained_rows, 3);
    }

    #[test]
    fn spread_eleven_deviations() {
        let row: Vec<f64> = (0..11).map(|i| 0.5 + (i as f64 - 5.0) / 100.0).collect();
        let m = ReplicateMatrix::new(1, 11, row).unwrap();
        let s = spread_measure(&m, &[0]).unwrap();
        assert!((s.percent - 8.0).abs() < 1e-12, "{}", s.percent);
    }

    #[test]
    fn spread_filters_outside_band() {
        let m = ReplicateMatrix::from_columns(&[vec![0.09, 0.1], vec![0.11, 0.1]]).unwrap();
        let s = spread_measure(&m, &[0, 1]).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.percent, 0.0);
        // Band edges are retained.
        let m = ReplicateMatrix::from_columns(&[vec![0.19, 0.81], vec![0.21, 0.79]]).unwrap();
        assert_eq!(spread_measure(&m, &[0, 1]).unwrap().retained_rows, 2);
    }

    #[test]
    fn spread_errors() {
        let m = ReplicateMatrix::new(2, 1, vec![0.5, 0.5]).unwrap();
        assert!(spread_measure(&m, &[0]).is_err());
        let m = ReplicateMatrix::from_columns(&[vec![0.5], vec![0.5]]).unwrap();
        assert!(spread_measure(&m, &[]).is_err());
    }

    fn dataset(mask: Vec<bool>) -> Dataset {
        let n = mask.len();
        Dataset::new(
            vec![Column::new("x", ColumnKind::Continuous)],
            "y",
            (0..n).map(|i| i as f64).collect(),
            mask,
            (0..n).map(|i| (i % 2) as f64).collect(),
            vec![true; n],
        )
        .unwrap()
    }

    #[test]
    fn stratify_examples() {
        let d = dataset(vec![true; 4]);
        let s = stratify(&d);
        assert_eq!(s.complete, vec![0, 1, 2, 3]);
        assert!(s.missing.is_empty());
        let d = dataset(vec![false, true, false, true]);
        let s = stratify(&d);
        assert_eq!(s.missing, vec![0, 2]);
        assert_eq!(s.complete, vec![1, 3]);
    }

    #[test]
    fn report_single_replicate_has_no_spread() {
        let d = dataset(vec![false, true, true, true]);
        let m = ReplicateMatrix::from_columns(&[vec![0.4, 0.6, 0.3, 0.7]]).unwrap();
        let r = build_report(&m, &d).unwrap();
        assert!(r.r_missing.is_none() && r.r_complete.is_none());
        let expected = brier_score(&[0.4, 0.6, 0.3, 0.7], d.outcome()).unwrap();
        assert_eq!(r.brier_full, expected);
        assert_eq!(r.brier_missing_only, Some(brier_score(&[0.4], &d.outcome()[..1]).unwrap()));
        assert_eq!(r.n_missing + r.n_complete, r.n_rows);
    }

    #[test]
    fn report_identical_replicates() {
        let d = dataset(vec![false, true, false, true]);
        let col = vec![0.4, 0.6, 0.3, 0.7];
        let single = build_report(&ReplicateMatrix::from_columns(&[col.clone()]).unwrap(), &d).unwrap();
        let r = build_report(&ReplicateMatrix::from_columns(&[col.clone(), col]).unwrap(), &d).unwrap();
        assert_eq!(r.r_missing.unwrap().percent, 0.0);
        assert_eq!(r.r_complete.unwrap().percent, 0.0);
        assert_eq!(r.brier_full, single.brier_full);
        assert_eq!(r.brier_missing_only, single.brier_missing_only);
    }
}
