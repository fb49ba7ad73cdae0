use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// Predictors with a missingness mask plus a binary outcome that may itself
/// be masked (validation rows).
///
/// Matrices are stored row-major. Unobserved predictor cells hold NaN; the
/// masks are authoritative.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Column>,
    outcome_name: String,
    predictors: Vec<f64>,
    predictor_mask: Vec<bool>,
    outcome: Vec<f64>,
    outcome_mask: Vec<bool>,
}

impl Dataset {
    /// Validates and assembles a dataset. Values at unobserved predictor cells
    /// are replaced by NaN.
    pub fn new(
        columns: Vec<Column>,
        outcome_name: impl Into<String>,
        mut predictors: Vec<f64>,
        predictor_mask: Vec<bool>,
        outcome: Vec<f64>,
        outcome_mask: Vec<bool>,
    ) -> Result<Self> {
        let p = columns.len();
        let n = outcome.len();
        if predictors.len() != n * p || predictor_mask.len() != n * p {
            return Err(Error::Dimension(format!(
                "{n} rows x {p} columns needs {} cells, got {} values and {} mask entries",
                n * p,
                predictors.len(),
                predictor_mask.len()
            )));
        }
        if outcome_mask.len() != n {
            return Err(Error::Dimension(format!(
                "outcome mask has {} entries for {n} rows",
                outcome_mask.len()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        for (cell, observed) in predictors.iter_mut().zip(&predictor_mask) {
            if !observed {
                *cell = f64::NAN;
            }
        }
        for (j, col) in columns.iter().enumerate() {
            let mut seen = 0;
            for i in 0..n {
                if !predictor_mask[i * p + j] {
                    continue;
                }
                seen += 1;
                let v = predictors[i * p + j];
                if !v.is_finite() {
                    return Err(Error::InvalidDataset(format!(
                        "column {} row {i}: non-finite observed value",
                        col.name
                    )));
                }
                if col.kind == ColumnKind::Binary && v != 0.0 && v != 1.0 {
                    return Err(Error::InvalidDataset(format!(
                        "binary column {} row {i} holds {v}",
                        col.name
                    )));
                }
            }
            if seen == 0 {
                return Err(Error::InvalidDataset(format!(
                    "column {} has no observed cells",
                    col.name
                )));
            }
        }
        let mut classes = [false; 2];
        for (i, (&y, &observed)) in outcome.iter().zip(&outcome_mask).enumerate() {
            if y != 0.0 && y != 1.0 {
                if observed {
                    return Err(Error::InvalidDataset(format!("outcome row {i} holds {y}")));
                }
                continue;
            }
            if observed {
                classes[y as usize] = true;
            }
        }
        if !classes[0] || !classes[1] {
            return Err(Error::InvalidDataset(
                "observed outcomes must include both classes".into(),
            ));
        }
        Ok(Dataset {
            columns,
            outcome_name: outcome_name.into(),
            predictors,
            predictor_mask,
            outcome,
            outcome_mask,
        })
    }

    /// A dataset with every cell and outcome observed.
    pub fn complete(
        columns: Vec<Column>,
        outcome_name: impl Into<String>,
        predictors: Vec<f64>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let cells = predictors.len();
        let n = outcome.len();
        Dataset::new(
            columns,
            outcome_name,
            predictors,
            vec![true; cells],
            outcome,
            vec![true; n],
        )
    }

    pub fn nrows(&self) -> usize {
        self.outcome.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn predictors(&self) -> &[f64] {
        &self.predictors
    }

    pub fn predictor_mask(&self) -> &[bool] {
        &self.predictor_mask
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.ncols();
        &self.predictors[i * p..(i + 1) * p]
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        let p = self.ncols();
        &self.predictor_mask[i * p..(i + 1) * p]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.predictor_mask[i * self.ncols() + j]
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.is_observed(i, j)
            .then(|| self.predictors[i * self.ncols() + j])
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn outcome_mask(&self) -> &[bool] {
        &self.outcome_mask
    }

    /// True when row `i` has at least one unobserved predictor cell.
    pub fn row_has_missing(&self, i: usize) -> bool {
        self.row_mask(i).iter().any(|&m| !m)
    }

    pub fn column_has_missing(&self, j: usize) -> bool {
        (0..self.nrows()).any(|i| !self.is_observed(i, j))
    }

    pub fn missing_cells(&self) -> usize {
        self.predictor_mask.iter().filter(|&&m| !m).count()
    }

    /// Same data with the outcome hidden for `rows`.
    pub fn with_outcomes_masked(&self, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut out = self.clone();
        for i in rows {
            out.outcome_mask[i] = false;
        }
        out
    }

    /// Same dataset with a replaced outcome vector (mask unchanged).
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Dataset::new(
            self.columns.clone(),
            self.outcome_name.clone(),
            self.predictors.clone(),
            self.predictor_mask.clone(),
            outcome,
            self.outcome_mask.clone(),
        )
    }

    /// Keeps only the first `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.nrows());
        let p = self.ncols();
        Dataset::new(
            self.columns.clone(),
            self.outcome_name.clone(),
            self.predictors[..n * p].to_vec(),
            self.predictor_mask[..n * p].to_vec(),
            self.outcome[..n].to_vec(),
            self.outcome_mask[..n].to_vec(),
        )
    }
}

/// Bitwise equality, so NaN placeholders compare equal.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        fn bits(v: &[f64]) -> impl Iterator<Item = u64> + '_ {
            v.iter().map(|x| x.to_bits())
        }
        self.columns == other.columns
            && self.outcome_name == other.outcome_name
            && self.predictor_mask == other.predictor_mask
            && self.outcome_mask == other.outcome_mask
            && bits(&self.predictors).eq(bits(&other.predictors))
            && bits(&self.outcome).eq(bits(&other.outcome))
    }
}

/// A completed copy of a [`Dataset`]'s predictors.
#[derive(Debug, Clone)]
pub struct ImputedDataset<'a> {
    source: &'a Dataset,
    predictors: Vec<f64>,
}

impl<'a> ImputedDataset<'a> {
    pub(crate) fn from_parts(source: &'a Dataset, predictors: Vec<f64>) -> Self {
        debug_assert_eq!(predictors.len(), source.predictors.len());
        ImputedDataset { source, predictors }
    }

    pub fn source(&self) -> &'a Dataset {
        self.source
    }

    pub fn predictors(&self) -> &[f64] {
        &self.predictors
    }

    pub(crate) fn predictors_mut(&mut self) -> &mut [f64] {
        &mut self.predictors
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.source.ncols();
        &self.predictors[i * p..(i + 1) * p]
    }

    pub fn into_predictors(self) -> Vec<f64> {
        self.predictors
    }
}

impl PartialEq for ImputedDataset<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.source, other.source)
            && self
                .predictors
                .iter()
                .map(|x| x.to_bits())
                .eq(other.predictors.iter().map(|x| x.to_bits()))
    }
}
