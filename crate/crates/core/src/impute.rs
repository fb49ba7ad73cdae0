//! Chained-equations multiple imputation with proper parameter draws.
//!
//! Each sweep visits the predictor columns that have missing cells in column
//! order, then the outcome when any outcome is masked. A visited variable is
//! regressed on the current completed values of every other variable (the
//! outcome included), model parameters are drawn from their approximate
//! posterior, and the missing cells are redrawn from the drawn model.
//! Imputed outcomes keep the chain well defined for masked rows and are
//! discarded at the end.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::dataset::{ColumnKind, Dataset, ImputedDataset};
use crate::error::{Error, Result};
use crate::glm::{self, dot, logistic, DesignMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContinuousMethod {
    /// Residual variance from a scaled inverse chi-square, then coefficients
    /// from the conditional normal; imputations add fresh residual noise.
    BayesianLinear,
    /// Drawn-coefficient predictions matched to observed predicted means;
    /// the donor's observed value is copied.
    PredictiveMeanMatching,
}

impl ContinuousMethod {
    pub fn name(self) -> &'static str {
        match self {
            ContinuousMethod::BayesianLinear => "bayesian-linear",
            ContinuousMethod::PredictiveMeanMatching => "predictive-mean-matching",
        }
    }
}

impl std::str::FromStr for ContinuousMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bayesian-linear" | "norm" => Ok(ContinuousMethod::BayesianLinear),
            "predictive-mean-matching" | "pmm" => Ok(ContinuousMethod::PredictiveMeanMatching),
            other => Err(Error::InvalidArgument(format!(
                "unknown continuous imputation method `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationConfig {
    pub sweeps: usize,
    pub continuous_method: ContinuousMethod,
    pub donor_count: usize,
    pub rng_seed: u64,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        ImputationConfig {
            sweeps: 10,
            continuous_method: ContinuousMethod::BayesianLinear,
            donor_count: 5,
            rng_seed: 0,
        }
    }
}

impl ImputationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidArgument("sweeps must be at least 1".into()));
        }
        if self.donor_count == 0 {
            return Err(Error::InvalidArgument("donor_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Completed predictors plus the working outcome values of the chain.
#[derive(Debug, Clone)]
pub struct ChainState<'a> {
    pub completed: ImputedDataset<'a>,
    /// Observed outcomes where unmasked, current draws where masked.
    pub outcome: Vec<f64>,
}

/// Fills every missing cell with a uniform draw from its column's observed
/// values, and every masked outcome with a draw from the observed outcomes.
pub fn initialize<'a, R: Rng + ?Sized>(dataset: &'a Dataset, rng: &mut R) -> Result<ChainState<'a>> {
    let n = dataset.nrows();
    let p = dataset.ncols();
    let mut values = dataset.predictors().to_vec();
    for j in 0..p {
        if !dataset.column_has_missing(j) {
            continue;
        }
        let observed: Vec<f64> = (0..n).filter_map(|i| dataset.value(i, j)).collect();
        if observed.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "column {} has no observed cells",
                dataset.columns()[j].name
            )));
        }
        for i in 0..n {
            if !dataset.is_observed(i, j) {
                values[i * p + j] = observed[rng.random_range(0..observed.len())];
            }
        }
    }

    let observed_outcomes: Vec<f64> = dataset
        .outcome()
        .iter()
        .zip(dataset.outcome_mask())
        .filter_map(|(&y, &m)| m.then_some(y))
        .collect();
    if observed_outcomes.is_empty() {
        return Err(Error::InvalidDataset("no observed outcomes".into()));
    }
    let outcome = dataset
        .outcome()
        .iter()
        .zip(dataset.outcome_mask())
        .map(|(&y, &m)| {
            if m {
                y
            } else {
                observed_outcomes[rng.random_range(0..observed_outcomes.len())]
            }
        })
        .collect();

    Ok(ChainState {
        completed: ImputedDataset::from_parts(dataset, values),
        outcome,
    })
}

/// One pass of the chained equations.
pub fn sweep<'a, R: Rng + ?Sized>(
    mut state: ChainState<'a>,
    dataset: &'a Dataset,
    config: &ImputationConfig,
    rng: &mut R,
) -> Result<ChainState<'a>> {
    let n = dataset.nrows();
    let p = dataset.ncols();

    for j in 0..p {
        let (observed, missing): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| dataset.is_observed(i, j));
        if missing.is_empty() {
            continue;
        }
        // Regressors: intercept, every other predictor, then the outcome.
        let regressor_row = |values: &[f64], outcome: &[f64], i: usize, buf: &mut Vec<f64>| {
            buf.push(1.0);
            for c in 0..p {
                if c != j {
                    buf.push(values[i * p + c]);
                }
            }
            buf.push(outcome[i]);
        };
        let values = state.completed.predictors();
        let q = p + 1;
        let mut obs_data = Vec::with_capacity(observed.len() * q);
        for &i in &observed {
            regressor_row(values, &state.outcome, i, &mut obs_data);
        }
        let mut mis_data = Vec::with_capacity(missing.len() * q);
        for &i in &missing {
            regressor_row(values, &state.outcome, i, &mut mis_data);
        }
        let target: Vec<f64> = observed.iter().map(|&i| values[i * p + j]).collect();
        let obs_design = DesignMatrix::new(observed.len(), q, obs_data)?;
        let mis_design = DesignMatrix::new(missing.len(), q, mis_data)?;

        let draws = match dataset.columns()[j].kind {
            ColumnKind::Binary => draw_binary(&obs_design, &target, &mis_design, rng),
            ColumnKind::Continuous => match config.continuous_method {
                ContinuousMethod::BayesianLinear => {
                    draw_bayesian_linear(&obs_design, &target, &mis_design, rng)
                }
                ContinuousMethod::PredictiveMeanMatching => draw_pmm(
                    &obs_design,
                    &target,
                    &mis_design,
                    config.donor_count,
                    rng,
                ),
            },
        }
        .map_err(|e| {
            Error::FitFailed(format!(
                "imputation model for column {}: {e}",
                dataset.columns()[j].name
            ))
        })?;

        let values = state.completed.predictors_mut();
        for (&i, v) in missing.iter().zip(draws) {
            values[i * p + j] = v;
        }
    }

    let (observed, masked): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| dataset.outcome_mask()[i]);
    if !masked.is_empty() {
        let obs_design =
            DesignMatrix::with_intercept(p, observed.iter().map(|&i| state.completed.row(i)));
        let mis_design =
            DesignMatrix::with_intercept(p, masked.iter().map(|&i| state.completed.row(i)));
        let target: Vec<f64> = observed.iter().map(|&i| dataset.outcome()[i]).collect();
        let draws = draw_binary(&obs_design, &target, &mis_design, rng)
            .map_err(|e| Error::FitFailed(format!("imputation model for outcome: {e}")))?;
        for (&i, y) in masked.iter().zip(draws) {
            state.outcome[i] = y;
        }
    }

    Ok(state)
}

/// Initializes and runs `config.sweeps` sweeps; imputed outcomes are dropped.
pub fn impute_once<'a, R: Rng + ?Sized>(
    dataset: &'a Dataset,
    config: &ImputationConfig,
    rng: &mut R,
) -> Result<ImputedDataset<'a>> {
    config.validate()?;
    let mut state = initialize(dataset, rng)?;
    for _ in 0..config.sweeps {
        state = sweep(state, dataset, config, rng)?;
    }
    Ok(state.completed)
}

fn draw_binary<R: Rng + ?Sized>(
    obs: &DesignMatrix,
    target: &[f64],
    mis: &DesignMatrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let events = target.iter().filter(|&&y| y == 1.0).count();
    if events == 0 || events == target.len() {
        // Only one level observed: no model can produce the other.
        return Ok(vec![target[0]; mis.nrows()]);
    }
    let (coef, diag) = glm::fit_logistic(obs, target)?;
    let drawn = glm::draw_coefficients(&coef, &diag, rng)?;
    let full = drawn.to_full();
    Ok(mis
        .rows()
        .map(|row| {
            let prob = logistic(dot(row, &full));
            if rng.random::<f64>() < prob {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// Posterior draw for a normal linear model with a flat prior.
struct LinearDraw {
    estimate: Vec<f64>,
    drawn: Vec<f64>,
    sigma: f64,
}

fn linear_posterior_draw<R: Rng + ?Sized>(
    obs: &DesignMatrix,
    target: &[f64],
    rng: &mut R,
) -> Result<LinearDraw> {
    let q = obs.ncols();
    let mut gram = vec![0.0; q * q];
    let mut xty = vec![0.0; q];
    for (row, &y) in obs.rows().zip(target) {
        for a in 0..q {
            let xa = row[a];
            xty[a] += xa * y;
            let g = &mut gram[a * q..(a + 1) * q];
            for b in a..q {
                g[b] += xa * row[b];
            }
        }
    }
    let trace: f64 = (0..q).map(|a| gram[a * q + a]).sum();
    let mut xtx = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            xtx[(a, b)] = gram[a * q + b];
            xtx[(b, a)] = gram[a * q + b];
        }
        // Small ridge keeps collinear or constant regressors solvable.
        xtx[(a, a)] += 1e-5 * gram[a * q + a] + 1e-10 * trace / q as f64;
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::FitFailed("singular cross-product matrix".into()))?;
    let estimate = chol.solve(&DVector::from_vec(xty));
    if estimate.iter().any(|b| !b.is_finite()) {
        return Err(Error::FitFailed("non-finite linear coefficients".into()));
    }
    let estimate: Vec<f64> = estimate.iter().copied().collect();
    let rss: f64 = obs
        .rows()
        .zip(target)
        .map(|(row, &y)| (y - dot(row, &estimate)).powi(2))
        .sum();
    let df = obs.nrows().saturating_sub(q).max(1) as f64;
    let chi2 = ChiSquared::new(df).expect("positive degrees of freedom");
    let sigma = (rss / chi2.sample(rng)).sqrt();
    let z = DVector::from_iterator(q, (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)));
    // (X'X)^{-1} = L^{-T} L^{-1}, so L^{-T} z has the required covariance.
    let shift = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::FitFailed("triangular solve failed".into()))?;
    let drawn: Vec<f64> = estimate
        .iter()
        .zip(shift.iter())
        .map(|(b, s)| b + sigma * s)
        .collect();
    if !sigma.is_finite() || drawn.iter().any(|b| !b.is_finite()) {
        return Err(Error::FitFailed("non-finite posterior draw".into()));
    }
    Ok(LinearDraw {
        estimate,
        drawn,
        sigma,
    })
}

fn draw_bayesian_linear<R: Rng + ?Sized>(
    obs: &DesignMatrix,
    target: &[f64],
    mis: &DesignMatrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let draw = linear_posterior_draw(obs, target, rng)?;
    Ok(mis
        .rows()
        .map(|row| dot(row, &draw.drawn) + draw.sigma * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

fn draw_pmm<R: Rng + ?Sized>(
    obs: &DesignMatrix,
    target: &[f64],
    mis: &DesignMatrix,
    donor_count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let draw = linear_posterior_draw(obs, target, rng)?;
    let mut pool: Vec<(f64, f64)> = obs
        .rows()
        .zip(target)
        .map(|(row, &y)| (dot(row, &draw.estimate), y))
        .collect();
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    let d = donor_count.min(pool.len());
    Ok(mis
        .rows()
        .map(|row| {
            let (lo, hi) = nearest_window(&pool, dot(row, &draw.drawn), d);
            pool[rng.random_range(lo..hi)].1
        })
        .collect())
}

/// Half-open index range of the `d` entries of sorted `pool` nearest to `x`.
fn nearest_window(pool: &[(f64, f64)], x: f64, d: usize) -> (usize, usize) {
    let pos = pool.partition_point(|e| e.0 < x);
    let (mut lo, mut hi) = (pos, pos);
    while hi - lo < d {
        let take_left = match (lo > 0, hi < pool.len()) {
            (true, true) => x - pool[lo - 1].0 <= pool[hi].0 - x,
            (true, false) => true,
            (false, true) => false,
            (false, false) => break,
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Imputes with a seeded stream derived from `config.rng_seed`.
pub fn impute_seeded<'a>(dataset: &'a Dataset, config: &ImputationConfig) -> Result<ImputedDataset<'a>> {
    let mut rng = crate::rng::StreamSeed::new(config.rng_seed).rng();
    impute_once(dataset, config, &mut rng)
}
