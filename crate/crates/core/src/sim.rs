//! Synthetic datasets with MCAR or MAR missingness.
//!
//! Rows are drawn from a latent multivariate normal; the trailing
//! `p_binary` columns are thresholded at zero. The outcome is Bernoulli with
//! logistic link on the realized predictor values and is always observed.
//! Missing cells are then punched into the designated columns.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::glm::{logistic, CoefficientVector};
use crate::rng::StreamSeed;

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// Each cell of a missing column is dropped independently at the column rate.
    Mcar,
    /// Dropout probability `logistic(a_c + slope * s)`, where `s` is the
    /// standardized sum of the driver columns and `a_c` is set so the
    /// column's expected rate matches its target.
    Mar { drivers: Vec<usize>, slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingColumn {
    pub column: usize,
    /// Expected fraction of unobserved cells, in (0, 1).
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationScenario {
    pub name: String,
    pub n: usize,
    pub p_continuous: usize,
    pub p_binary: usize,
    /// Latent covariance, continuous columns first.
    pub covariance: DMatrix<f64>,
    pub true_coefficients: CoefficientVector,
    pub missing: Vec<MissingColumn>,
    pub mechanism: Mechanism,
    pub rng_seed: u64,
}

/// Unit-variance covariance with a common off-diagonal correlation.
pub fn exchangeable(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |a, b| if a == b { 1.0 } else { rho })
}

impl SimulationScenario {
    pub fn predictors(&self) -> usize {
        self.p_continuous + self.p_binary
    }

    pub fn column_kind(&self, j: usize) -> ColumnKind {
        if j < self.p_continuous {
            ColumnKind::Continuous
        } else {
            ColumnKind::Binary
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.predictors();
        let invalid = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 || p == 0 {
            return invalid("scenario needs rows and predictors".into());
        }
        if self.covariance.nrows() != p || self.covariance.ncols() != p {
            return invalid(format!(
                "covariance is {}x{} for {p} predictors",
                self.covariance.nrows(),
                self.covariance.ncols()
            ));
        }
        if (&self.covariance - self.covariance.transpose()).amax() > 1e-12 {
            return invalid("covariance is not symmetric".into());
        }
        if self.true_coefficients.slopes.len() != p || !self.true_coefficients.is_finite() {
            return invalid("true coefficients do not match the predictors".into());
        }
        let mut seen = vec![false; p];
        for m in &self.missing {
            if m.column >= p || std::mem::replace(&mut seen[m.column], true) {
                return invalid(format!("bad or repeated missing column {}", m.column));
            }
            if !(m.rate > 0.0 && m.rate < 1.0) {
                return invalid(format!("missing rate {} outside (0,1)", m.rate));
            }
        }
        if let Mechanism::Mar { drivers, slope } = &self.mechanism {
            if drivers.is_empty() || !slope.is_finite() {
                return invalid("MAR needs drivers and a finite slope".into());
            }
            for &d in drivers {
                if d >= self.p_continuous {
                    return invalid(format!("MAR driver {d} must be a continuous column"));
                }
                if seen[d] {
                    return invalid(format!("MAR driver {d} is itself a missing column"));
                }
            }
        }
        Ok(())
    }

    /// Generates the dataset from `rng_seed`.
    pub fn generate(&self) -> Result<Dataset> {
        generate(self, &mut StreamSeed::new(self.rng_seed).rng())
    }
}

fn latent_factor(covariance: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    covariance
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Factorization("scenario covariance is not positive definite".into()))
}

fn draw_rows<R: Rng + ?Sized>(
    scenario: &SimulationScenario,
    factor: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
    mut each: impl FnMut(&[f64], &mut R),
) {
    let p = scenario.predictors();
    let mut eps = vec![0.0; p];
    let mut row = vec![0.0; p];
    for _ in 0..n {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        for a in 0..p {
            let z: f64 = (0..=a).map(|b| factor[(a, b)] * eps[b]).sum();
            row[a] = if a < scenario.p_continuous {
                z
            } else if z > 0.0 {
                1.0
            } else {
                0.0
            };
        }
        each(&row, rng);
    }
}

/// Per-column dropout model derived from a scenario.
#[derive(Debug, Clone)]
pub struct MissingnessModel {
    columns: Vec<(usize, f64)>,
    mar: Option<MarDrivers>,
    p: usize,
}

#[derive(Debug, Clone)]
struct MarDrivers {
    drivers: Vec<usize>,
    slope: f64,
    scale: f64,
    /// Intercept per missing column, same order as `columns`.
    intercepts: Vec<f64>,
}

/// E[logistic(a + slope * S)] for S ~ N(0, 1), by trapezoid quadrature.
fn expected_logistic(a: f64, slope: f64) -> f64 {
    const STEPS: usize = 4000;
    const HALF_WIDTH: f64 = 10.0;
    let h = 2.0 * HALF_WIDTH / STEPS as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = 0.0;
    for k in 0..=STEPS {
        let s = -HALF_WIDTH + k as f64 * h;
        let w = if k == 0 || k == STEPS { 0.5 } else { 1.0 };
        sum += w * norm * (-0.5 * s * s).exp() * logistic(a + slope * s);
    }
    sum * h
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, target: f64) -> f64 {
    // f increasing in its argument.
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl MissingnessModel {
    pub fn new(scenario: &SimulationScenario) -> Result<Self> {
        scenario.validate()?;
        let columns: Vec<(usize, f64)> = scenario.missing.iter().map(|m| (m.column, m.rate)).collect();
        let mar = match &scenario.mechanism {
            Mechanism::Mcar => None,
            Mechanism::Mar { drivers, slope } => {
                let var: f64 = drivers
                    .iter()
                    .flat_map(|&a| drivers.iter().map(move |&b| (a, b)))
                    .map(|(a, b)| scenario.covariance[(a, b)])
                    .sum();
                let intercepts = columns
                    .iter()
                    .map(|&(_, rate)| bisect(-60.0, 60.0, |a| expected_logistic(a, *slope), rate))
                    .collect();
                Some(MarDrivers {
                    drivers: drivers.clone(),
                    slope: *slope,
                    scale: var.sqrt(),
                    intercepts,
                })
            }
        };
        Ok(MissingnessModel {
            columns,
            mar,
            p: scenario.predictors(),
        })
    }

    /// Dropout probability of each missing column for one complete row.
    pub fn probabilities(&self, row: &[f64]) -> Vec<(usize, f64)> {
        match &self.mar {
            None => self.columns.clone(),
            Some(mar) => {
                let s = mar.drivers.iter().map(|&d| row[d]).sum::<f64>() / mar.scale;
                self.columns
                    .iter()
                    .zip(&mar.intercepts)
                    .map(|(&(c, _), &a)| (c, logistic(a + mar.slope * s)))
                    .collect()
            }
        }
    }

    /// Observation mask (true = observed) for complete row-major values.
    /// One uniform is consumed per missing column per row.
    pub fn punch<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Vec<bool> {
        let mut mask = vec![true; values.len()];
        for (i, row) in values.chunks_exact(self.p).enumerate() {
            for (c, prob) in self.probabilities(row) {
                if rng.random::<f64>() < prob {
                    mask[i * self.p + c] = false;
                }
            }
        }
        mask
    }
}

/// Draws a dataset from the scenario using `rng`.
pub fn generate<R: Rng + ?Sized>(scenario: &SimulationScenario, rng: &mut R) -> Result<Dataset> {
    let model = MissingnessModel::new(scenario)?;
    let factor = latent_factor(&scenario.covariance)?;
    let p = scenario.predictors();
    let mut values = Vec::with_capacity(scenario.n * p);
    let mut outcome = Vec::with_capacity(scenario.n);
    draw_rows(scenario, &factor, scenario.n, rng, |row, rng| {
        values.extend_from_slice(row);
        let prob = logistic(scenario.true_coefficients.linear_predictor(row));
        outcome.push(if rng.random::<f64>() < prob { 1.0 } else { 0.0 });
    });
    let mask = model.punch(&values, rng);
    let columns = (0..p)
        .map(|j| {
            let name = if j < scenario.p_continuous {
                format!("c{}", j + 1)
            } else {
                format!("b{}", j + 1 - scenario.p_continuous)
            };
            Column::new(name, scenario.column_kind(j))
        })
        .collect();
    let n = outcome.len();
    Dataset::new(columns, "event", values, mask, outcome, vec![true; n])
}

/// Intercept giving the requested marginal event rate under the scenario's
/// slopes, estimated on `draws` latent rows.
pub fn calibrate_intercept(scenario: &SimulationScenario, target_rate: f64, draws: usize, seed: u64) -> Result<f64> {
    let mut scenario = scenario.clone();
    scenario.true_coefficients.intercept = 0.0;
    scenario.validate()?;
    let scenario = &scenario;
    let factor = latent_factor(&scenario.covariance)?;
    let mut rng = StreamSeed::new(seed).rng();
    let slopes = CoefficientVector {
        intercept: 0.0,
        slopes: scenario.true_coefficients.slopes.clone(),
    };
    let mut etas = Vec::with_capacity(draws);
    draw_rows(scenario, &factor, draws, &mut rng, |row, _| {
        etas.push(slopes.linear_predictor(row));
    });
    let mean_rate = |a: f64| etas.iter().map(|e| logistic(a + e)).sum::<f64>() / etas.len() as f64;
    Ok(bisect(-30.0, 30.0, mean_rate, target_rate))
}

pub const CRT_LIKE: &str = "crt-like";
pub const CLL_LIKE: &str = "cll-like";

/// Single-column dominant MCAR missingness, 14 predictors, event rate
/// 153/1053.
pub fn crt_like_scenario() -> SimulationScenario {
    let p_continuous = 8;
    let p_binary = 6;
    // 1 - (1 - r0)(1 - 0.01)^2 = 524/1053 rows with a missing cell.
    let minor = 0.01;
    let main_rate = 1.0 - (1.0 - 524.0 / 1053.0) / ((1.0 - minor) * (1.0 - minor));
    SimulationScenario {
        name: CRT_LIKE.into(),
        n: 1053,
        p_continuous,
        p_binary,
        covariance: exchangeable(p_continuous + p_binary, 0.3),
        true_coefficients: CoefficientVector {
            intercept: CRT_LIKE_INTERCEPT,
            slopes: vec![
                0.9, 0.5, -0.4, 0.3, -0.3, 0.25, 0.2, -0.15, 0.6, -0.5, 0.4, 0.35, -0.3, 0.2,
            ],
        },
        missing: vec![
            MissingColumn {
                column: 0,
                rate: main_rate,
            },
            MissingColumn {
                column: 3,
                rate: minor,
            },
            MissingColumn {
                column: 6,
                rate: minor,
            },
        ],
        mechanism: Mechanism::Mcar,
        rng_seed: 1053,
    }
}

/// Three binary columns missing at random given two continuous drivers,
/// 8 predictors, event rate 184/694.
pub fn cll_like_scenario() -> SimulationScenario {
    let p_continuous = 3;
    let p_binary = 5;
    SimulationScenario {
        name: CLL_LIKE.into(),
        n: 694,
        p_continuous,
        p_binary,
        covariance: exchangeable(p_continuous + p_binary, 0.2),
        true_coefficients: CoefficientVector {
            intercept: CLL_LIKE_INTERCEPT,
            slopes: vec![0.5, 0.3, -0.2, 0.4, -0.3, 0.6, 0.5, 0.7],
        },
        missing: vec![
            MissingColumn {
                column: 5,
                rate: 0.09,
            },
            MissingColumn {
                column: 6,
                rate: 0.06,
            },
            MissingColumn {
                column: 7,
                rate: 0.25,
            },
        ],
        mechanism: Mechanism::Mar {
            drivers: vec![0, 1],
            slope: 0.5,
        },
        rng_seed: 694,
    }
}

// Frozen outputs of `calibrate_intercept` (10^6 draws, seed 0) for the
// preset slopes; see the `preset_intercepts_are_calibrated` test.
const CRT_LIKE_INTERCEPT: f64 = -2.748408929425934;
const CLL_LIKE_INTERCEPT: f64 = -2.1714551493187413;

pub fn preset(name: &str) -> Result<SimulationScenario> {
    match name {
        CRT_LIKE => Ok(crt_like_scenario()),
        CLL_LIKE => Ok(cll_like_scenario()),
        other => Err(Error::InvalidArgument(format!(
            "unknown scenario `{other}` (expected {CRT_LIKE} or {CLL_LIKE})"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_missing_fraction(d: &Dataset, j: usize) -> f64 {
        (0..d.nrows()).filter(|&i| !d.is_observed(i, j)).count() as f64 / d.nrows() as f64
    }

    fn mcar_scenario(rate: f64, slopes: Vec<f64>, intercept: f64) -> SimulationScenario {
        let p = slopes.len();
        SimulationScenario {
            name: "test".into(),
            n: 10_000,
            p_continuous: 2,
            p_binary: p - 2,
            covariance: exchangeable(p, 0.3),
            true_coefficients: CoefficientVector { intercept, slopes },
            missing: vec![MissingColumn { column: 1, rate }],
            mechanism: Mechanism::Mcar,
            rng_seed: 5,
        }
    }

    #[test]
    fn preset_intercepts_are_calibrated() {
        let crt = crt_like_scenario();
        let a = calibrate_intercept(&crt, 153.0 / 1053.0, 200_000, 1).unwrap();
        assert!((a - crt.true_coefficients.intercept).abs() < 0.02, "{a}");
        let cll = cll_like_scenario();
        let a = calibrate_intercept(&cll, 184.0 / 694.0, 200_000, 1).unwrap();
        assert!((a - cll.true_coefficients.intercept).abs() < 0.02, "{a}");
    }

    #[test]
    fn mcar_rate_hits_target() {
        let d = mcar_scenario(0.3, vec![0.5, 0.2, 0.4], -0.3).generate().unwrap();
        let frac = column_missing_fraction(&d, 1);
        assert!((frac - 0.3).abs() < 0.015, "{frac}");
        assert_eq!(column_missing_fraction(&d, 0), 0.0);
        assert!(d.outcome_mask().iter().all(|&m| m));
    }

    #[test]
    fn zero_slopes_give_logistic_intercept_rate() {
        let d = mcar_scenario(0.3, vec![0.0; 3], -1.0).generate().unwrap();
        let n = d.nrows() as f64;
        let rate = d.outcome().iter().sum::<f64>() / n;
        let expected = logistic(-1.0);
        let se = (expected * (1.0 - expected) / n).sqrt();
        assert!((rate - expected).abs() < 3.0 * se, "{rate} vs {expected}");
    }

    #[test]
    fn binary_columns_match_threshold_rate() {
        let d = mcar_scenario(0.3, vec![0.1, 0.1, 0.1], 0.0).generate().unwrap();
        let ones = (0..d.nrows()).filter(|&i| d.row(i)[2] == 1.0).count() as f64;
        let frac = ones / d.nrows() as f64;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / d.nrows() as f64).sqrt(), "{frac}");
        assert_eq!(d.columns()[2].kind, ColumnKind::Binary);
    }

    #[test]
    fn mar_intercepts_reproduce_rates() {
        for slope in [0.0, 0.5, 2.0] {
            for rate in [0.06, 0.25, 0.7] {
                let a = bisect(-60.0, 60.0, |a| expected_logistic(a, slope), rate);
                assert!((expected_logistic(a, slope) - rate).abs() < 1e-9);
            }
        }
        assert!((expected_logistic(0.0, 1.3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mar_depends_only_on_drivers() {
        let scenario = cll_like_scenario().with_n(5000);
        let model = MissingnessModel::new(&scenario).unwrap();
        let complete = {
            let mut s = scenario.clone();
            s.missing.clear();
            s.mechanism = Mechanism::Mcar;
            s.generate().unwrap()
        };
        let values = complete.predictors().to_vec();
        let p = scenario.predictors();
        let base = model.punch(&values, &mut StreamSeed::new(3).rng());

        let mut shifted_other = values.clone();
        for i in 0..scenario.n {
            shifted_other[i * p + 2] += 3.0;
        }
        assert_eq!(model.punch(&shifted_other, &mut StreamSeed::new(3).rng()), base);

        let mut shifted_driver = values.clone();
        for i in 0..scenario.n {
            shifted_driver[i * p] += 1.0;
        }
        let moved = model.punch(&shifted_driver, &mut StreamSeed::new(3).rng());
        let rate = |mask: &[bool], c: usize| {
            (0..scenario.n).filter(|&i| !mask[i * p + c]).count() as f64 / scenario.n as f64
        };
        let expected: f64 = (0..scenario.n)
            .map(|i| model.probabilities(&shifted_driver[i * p..(i + 1) * p])[2].1)
            .sum::<f64>()
            / scenario.n as f64;
        let r = rate(&moved, 7);
        assert!(r > rate(&base, 7));
        let se = (expected * (1.0 - expected) / scenario.n as f64).sqrt();
        assert!((r - expected).abs() < 4.0 * se, "{r} vs {expected}");
    }

    #[test]
    fn cll_like_column_rates() {
        let d = cll_like_scenario().with_n(20_000).generate().unwrap();
        for (c, target) in [(5, 0.09), (6, 0.06), (7, 0.25)] {
            let frac = column_missing_fraction(&d, c);
            let se = (target * (1.0 - target) / 20_000.0f64).sqrt();
            assert!((frac - target).abs() < 4.0 * se, "column {c}: {frac}");
        }
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut s = cll_like_scenario();
        s.mechanism = Mechanism::Mar {
            drivers: vec![5],
            slope: 1.0,
        };
        assert!(s.validate().is_err());
        let mut s = crt_like_scenario();
        s.missing[0].rate = 1.0;
        assert!(s.validate().is_err());
        let mut s = crt_like_scenario();
        s.covariance = exchangeable(14, 1.5);
        assert!(matches!(s.generate(), Err(Error::Factorization(_))));
        assert!(preset("nope").is_err());
        assert_eq!(preset(CRT_LIKE).unwrap(), crt_like_scenario());
    }
}
