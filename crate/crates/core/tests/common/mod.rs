#![allow(dead_code)]

use micv::sim::{self, Mechanism, MissingColumn, SimulationScenario};
use micv::{Column, ColumnKind, Dataset};
use rand::Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Log-likelihood of a logistic model; `rows` include the leading 1.
pub fn log_likelihood(rows: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(x, &yi)| {
            let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            yi * eta - (1.0 + eta.exp()).ln()
        })
        .sum()
}

/// Plain Newton-Raphson on the logistic log-likelihood. Returns `None`
/// when the iteration does not settle.
pub fn newton_oracle(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let q = rows[0].len();
    let mut beta = vec![0.0; q];
    for _ in 0..200 {
        let mut grad = vec![0.0; q];
        let mut hess = vec![vec![0.0; q]; q];
        for (x, &yi) in rows.iter().zip(y) {
            let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let p = sigmoid(eta);
            for a in 0..q {
                grad[a] += (yi - p) * x[a];
                for b in 0..q {
                    hess[a][b] += p * (1.0 - p) * x[a] * x[b];
                }
            }
        }
        let step = solve(hess, grad);
        let size = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if !size.is_finite() {
            return None;
        }
        if size < 1e-12 {
            return Some(beta);
        }
    }
    None
}

/// Central-difference gradient of the log-likelihood.
pub fn numeric_score(rows: &[Vec<f64>], y: &[f64], beta: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..beta.len())
        .map(|j| {
            let mut up = beta.to_vec();
            let mut down = beta.to_vec();
            up[j] += h;
            down[j] -= h;
            (log_likelihood(rows, y, &up) - log_likelihood(rows, y, &down)) / (2.0 * h)
        })
        .collect()
}

/// Random logistic instance with a well-defined finite optimum.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    loop {
        let truth: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                std::iter::once(1.0)
                    .chain((0..p).map(|_| rng.random_range(-2.0..2.0)))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| {
                let eta: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
                f64::from(rng.random::<f64>() < sigmoid(eta))
            })
            .collect();
        if let Some(beta) = newton_oracle(&rows, &y) {
            if beta.iter().all(|b| b.abs() < 20.0) {
                return (rows, y, beta);
            }
        }
    }
}

/// Small synthetic dataset: two continuous and one binary predictor, with
/// MCAR holes in the first and last columns.
pub fn small_scenario(n: usize, seed: u64) -> SimulationScenario {
    SimulationScenario {
        name: "small".into(),
        n,
        p_continuous: 2,
        p_binary: 1,
        covariance: sim::exchangeable(3, 0.3),
        true_coefficients: micv::CoefficientVector {
            intercept: -0.5,
            slopes: vec![0.8, -0.6, 0.7],
        },
        missing: vec![
            MissingColumn { column: 0, rate: 0.25 },
            MissingColumn { column: 2, rate: 0.15 },
        ],
        mechanism: Mechanism::Mcar,
        rng_seed: seed,
    }
}

pub fn small_dataset(n: usize, seed: u64) -> Dataset {
    small_scenario(n, seed).generate().unwrap()
}

/// Same predictors as `small_dataset` but fully observed.
pub fn complete_dataset(n: usize, seed: u64) -> Dataset {
    let mut s = small_scenario(n, seed);
    s.missing.clear();
    s.generate().unwrap()
}

pub fn columns(kinds: &[ColumnKind]) -> Vec<Column> {
    kinds
        .iter()
        .enumerate()
        .map(|(j, &k)| Column::new(format!("x{j}"), k))
        .collect()
}
