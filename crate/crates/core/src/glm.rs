//! Logistic regression by iteratively reweighted least squares.
//!
//! The same fitter serves the substantive prediction model and the binary
//! conditional models inside the imputation chain. Fits report the inverse
//! observed information at the optimum so callers can draw coefficients from
//! the large-sample normal approximation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Row-major design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Wraps row-major data that already carries the leading intercept column.
    pub fn new(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if ncols == 0 {
            return Err(Error::Dimension("design needs an intercept column".into()));
        }
        if data.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values for a {nrows}x{ncols} design",
                data.len()
            )));
        }
        Ok(DesignMatrix { nrows, ncols, data })
    }

    /// Builds a design from predictor rows, prepending a column of ones.
    pub fn with_intercept<'a, I>(predictors: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let ncols = predictors + 1;
        let mut data = Vec::new();
        let mut nrows = 0;
        for row in rows {
            assert_eq!(row.len(), predictors, "predictor row length");
            data.push(1.0);
            data.extend_from_slice(row);
            nrows += 1;
        }
        DesignMatrix { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols)
    }
}

/// Intercept plus one slope per predictor column.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl CoefficientVector {
    pub fn zeros(predictors: usize) -> Self {
        CoefficientVector {
            intercept: 0.0,
            slopes: vec![0.0; predictors],
        }
    }

    /// Splits a full parameter vector (intercept first).
    pub fn from_full(values: &[f64]) -> Self {
        CoefficientVector {
            intercept: values[0],
            slopes: values[1..].to_vec(),
        }
    }

    pub fn to_full(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.slopes.len() + 1);
        v.push(self.intercept);
        v.extend_from_slice(&self.slopes);
        v
    }

    /// Number of parameters including the intercept.
    pub fn len(&self) -> usize {
        self.slopes.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.slopes.iter().all(|b| b.is_finite())
    }

    /// Intercept plus dot product with a predictor row (no intercept entry).
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.slopes, row)
    }

    /// Element-wise mean of several coefficient vectors.
    pub fn mean(vectors: &[CoefficientVector]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::InvalidArgument("pooling needs at least one vector".into()))?;
        let mut sum = vec![0.0; first.len()];
        for v in vectors {
            if v.len() != first.len() {
                return Err(Error::Dimension(format!(
                    "pooling vectors of length {} and {}",
                    first.len(),
                    v.len()
                )));
            }
            for (s, x) in sum.iter_mut().zip(v.to_full()) {
                *s += x;
            }
        }
        let k = vectors.len() as f64;
        sum.iter_mut().for_each(|s| *s /= k);
        Ok(CoefficientVector::from_full(&sum))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub final_deviance: f64,
    pub ridge_applied: bool,
    /// Inverse (penalized) observed information at the optimum, intercept first.
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the largest absolute coefficient change falls below this.
    pub tolerance: f64,
    pub ridge: f64,
    /// Refit with a ridge penalty when the plain fit does not converge.
    pub ridge_fallback: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 50,
            tolerance: 1e-8,
            ridge: 1e-4,
            ridge_fallback: true,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^eta) without overflow.
#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

const PROB_FLOOR: f64 = f64::MIN_POSITIVE;
const PROB_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// Event probability for one predictor row (without intercept entry).
pub fn predict_proba(coefficients: &CoefficientVector, row: &[f64]) -> Result<f64> {
    if row.len() != coefficients.slopes.len() {
        return Err(Error::Dimension(format!(
            "row of length {} for {} slopes",
            row.len(),
            coefficients.slopes.len()
        )));
    }
    if !coefficients.is_finite() {
        return Err(Error::NonFinite("coefficients"));
    }
    if row.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("prediction row"));
    }
    Ok(logistic(coefficients.linear_predictor(row)).clamp(PROB_FLOOR, PROB_CEIL))
}

/// Fits with default options.
pub fn fit_logistic(
    design: &DesignMatrix,
    outcome: &[f64],
) -> Result<(CoefficientVector, FitDiagnostics)> {
    fit_logistic_with(design, outcome, &FitOptions::default())
}

pub fn fit_logistic_with(
    design: &DesignMatrix,
    outcome: &[f64],
    options: &FitOptions,
) -> Result<(CoefficientVector, FitDiagnostics)> {
    check_inputs(design, outcome)?;

    let q = design.ncols();
    let events = outcome.iter().filter(|&&y| y == 1.0).count();
    let single_class = events == 0 || events == outcome.len();

    if single_class {
        if !options.ridge_fallback {
            return Err(Error::SingleClass);
        }
        // Unpenalized intercept would diverge; shrink every coefficient.
        let penalty = vec![options.ridge; q];
        return finish(design, outcome, &penalty, options, true);
    }

    let plain = vec![0.0; q];
    let attempt = newton(design, outcome, &plain, options);
    if let Some(state) = &attempt {
        if state.converged {
            // A quasi-separated optimum converges with a singular information
            // matrix; that case falls through to the ridge refit.
            match finish_from(design, outcome, &plain, state.clone(), false) {
                Ok(fit) => return Ok(fit),
                Err(e) if !options.ridge_fallback => return Err(e),
                Err(_) => {}
            }
        }
    }
    match attempt {
        _ if options.ridge_fallback => {
            let mut penalty = vec![options.ridge; q];
            penalty[0] = 0.0;
            finish(design, outcome, &penalty, options, true).or_else(|_| {
                // Intercept still unidentified: penalize it as well.
                penalty[0] = options.ridge;
                finish(design, outcome, &penalty, options, true)
            })
        }
        Some(state) => finish_from(design, outcome, &plain, state, false),
        None => Err(Error::FitFailed(
            "singular information matrix or non-finite weights".into(),
        )),
    }
}

fn check_inputs(design: &DesignMatrix, outcome: &[f64]) -> Result<()> {
    if design.nrows() != outcome.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, outcome has {}",
            design.nrows(),
            outcome.len()
        )));
    }
    if design.nrows() == 0 {
        return Err(Error::Dimension("empty design".into()));
    }
    if design.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("design"));
    }
    if outcome.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument("outcome entries must be 0 or 1".into()));
    }
    Ok(())
}

/// Maximizes the log-likelihood with a ridge penalty `ridge` on the slopes.
pub fn fit_logistic_penalized(
    design: &DesignMatrix,
    outcome: &[f64],
    ridge: f64,
) -> Result<(CoefficientVector, FitDiagnostics)> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge weight {ridge}")));
    }
    let options = FitOptions {
        ridge,
        ..FitOptions::default()
    };
    check_inputs(design, outcome)?;
    let mut penalty = vec![ridge; design.ncols()];
    penalty[0] = 0.0;
    finish(design, outcome, &penalty, &options, ridge > 0.0)
}

fn finish(
    design: &DesignMatrix,
    outcome: &[f64],
    penalty: &[f64],
    options: &FitOptions,
    ridge_applied: bool,
) -> Result<(CoefficientVector, FitDiagnostics)> {
    let state = newton(design, outcome, penalty, options).ok_or_else(|| {
        Error::FitFailed("ridge-penalized fit produced non-finite values".into())
    })?;
    finish_from(design, outcome, penalty, state, ridge_applied)
}

fn finish_from(
    design: &DesignMatrix,
    outcome: &[f64],
    penalty: &[f64],
    state: NewtonState,
    ridge_applied: bool,
) -> Result<(CoefficientVector, FitDiagnostics)> {
    let eval = evaluate(design, outcome, &state.beta, penalty)
        .ok_or_else(|| Error::FitFailed("non-finite weights at optimum".into()))?;
    let covariance = eval
        .hessian
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::FitFailed("information matrix is not positive definite".into()))?;
    let coefficients = CoefficientVector::from_full(state.beta.as_slice());
    if !coefficients.is_finite() {
        return Err(Error::FitFailed("non-finite coefficients".into()));
    }
    Ok((
        coefficients,
        FitDiagnostics {
            converged: state.converged,
            iterations: state.iterations,
            final_deviance: eval.deviance.max(0.0),
            ridge_applied,
            covariance,
        },
    ))
}

#[derive(Clone)]
struct NewtonState {
    beta: DVector<f64>,
    converged: bool,
    iterations: usize,
}

struct Evaluation {
    /// Penalized log-likelihood.
    objective: f64,
    deviance: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

fn objective(design: &DesignMatrix, outcome: &[f64], beta: &[f64], penalty: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (row, &y) in design.rows().zip(outcome) {
        let eta = dot(row, beta);
        ll += y * eta - softplus(eta);
    }
    let pen: f64 = beta.iter().zip(penalty).map(|(b, l)| l * b * b).sum();
    ll - 0.5 * pen
}

fn evaluate(
    design: &DesignMatrix,
    outcome: &[f64],
    beta: &DVector<f64>,
    penalty: &[f64],
) -> Option<Evaluation> {
    let q = design.ncols();
    let beta_s = beta.as_slice();
    let mut gradient = vec![0.0; q];
    // Upper triangle accumulated row-major, mirrored below.
    let mut info = vec![0.0; q * q];
    let mut ll = 0.0;
    for (row, &y) in design.rows().zip(outcome) {
        let eta = dot(row, beta_s);
        let p = logistic(eta);
        let w = p * (1.0 - p);
        if !w.is_finite() || !eta.is_finite() {
            return None;
        }
        ll += y * eta - softplus(eta);
        let resid = y - p;
        for a in 0..q {
            gradient[a] += row[a] * resid;
            let wa = w * row[a];
            if wa != 0.0 {
                let info_row = &mut info[a * q..(a + 1) * q];
                for b in a..q {
                    info_row[b] += wa * row[b];
                }
            }
        }
    }
    let mut hessian = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            hessian[(a, b)] = info[a * q + b];
            hessian[(b, a)] = info[a * q + b];
        }
        hessian[(a, a)] += penalty[a];
        gradient[a] -= penalty[a] * beta_s[a];
    }
    let pen: f64 = beta_s.iter().zip(penalty).map(|(b, l)| l * b * b).sum();
    Some(Evaluation {
        objective: ll - 0.5 * pen,
        deviance: -2.0 * ll,
        gradient: DVector::from_vec(gradient),
        hessian,
    })
}

/// Damped Newton iterations; `None` when the information matrix is singular
/// or weights become non-finite.
fn newton(
    design: &DesignMatrix,
    outcome: &[f64],
    penalty: &[f64],
    options: &FitOptions,
) -> Option<NewtonState> {
    let q = design.ncols();
    let mut beta = DVector::zeros(q);
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let eval = evaluate(design, outcome, &beta, penalty)?;
        let step = eval.hessian.clone().cholesky()?.solve(&eval.gradient);
        if step.iter().any(|s| !s.is_finite()) {
            return None;
        }
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        for _ in 0..30 {
            let obj = objective(design, outcome, candidate.as_slice(), penalty);
            if obj.is_finite() && obj >= eval.objective - 1e-12 * eval.objective.abs().max(1.0) {
                break;
            }
            scale *= 0.5;
            candidate = &beta + &step * scale;
        }
        let change = step.amax() * scale;
        beta = candidate;
        if change < options.tolerance {
            return Some(NewtonState {
                beta,
                converged: true,
                iterations,
            });
        }
    }
    Some(NewtonState {
        beta,
        converged: false,
        iterations,
    })
}

/// Draws coefficients from the normal approximation centred on the fit with
/// the diagnostics covariance.
pub fn draw_coefficients<R: Rng + ?Sized>(
    coefficients: &CoefficientVector,
    diagnostics: &FitDiagnostics,
    rng: &mut R,
) -> Result<CoefficientVector> {
    let q = coefficients.len();
    let cov = &diagnostics.covariance;
    if cov.nrows() != q || cov.ncols() != q {
        return Err(Error::Dimension(format!(
            "covariance is {}x{} for {q} coefficients",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let factor = psd_factor(cov)?;
    let z: DVector<f64> = DVector::from_iterator(q, (0..q).map(|_| rng.sample(StandardNormal)));
    let shift = factor * z;
    let mut full = coefficients.to_full();
    for (b, s) in full.iter_mut().zip(shift.iter()) {
        *b += s;
    }
    Ok(CoefficientVector::from_full(&full))
}

/// Square-root factor `F` with `F Fᵀ = cov` for a positive-semidefinite matrix.
pub(crate) fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::Factorization("non-finite covariance".into()));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut factor = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-8 * scale {
            return Err(Error::Factorization(format!(
                "covariance has negative eigenvalue {lambda:e}"
            )));
        }
        let root = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(root);
    }
    Ok(factor)
}
