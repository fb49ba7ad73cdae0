mod common;

use common::{newton_oracle, numeric_score, random_instance};
use micv::glm::{fit_logistic, fit_logistic_penalized, fit_logistic_with, FitOptions};
use micv::DesignMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn design(rows: &[Vec<f64>]) -> DesignMatrix {
    let p = rows[0].len() - 1;
    DesignMatrix::with_intercept(p, rows.iter().map(|r| &r[1..]))
}

#[test]
fn matches_newton_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..30 {
        let n = 20 + case % 31;
        let p = 1 + case % 4;
        let (rows, y, oracle) = random_instance(&mut rng, n, p);
        let (coef, diag) = fit_logistic(&design(&rows), &y).unwrap();
        assert!(diag.converged && !diag.ridge_applied, "case {case}");
        let err = coef
            .to_full()
            .iter()
            .zip(&oracle)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "case {case}: error {err}");
    }
}

#[test]
fn score_vanishes_at_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let (rows, y, _) = random_instance(&mut rng, 40, 3);
        let (coef, _) = fit_logistic(&design(&rows), &y).unwrap();
        let score = numeric_score(&rows, &y, &coef.to_full());
        let worst = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!(worst < 1e-4, "score {worst}");
    }
}

#[test]
fn invariant_under_row_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (rows, y, _) = random_instance(&mut rng, 45, 4);
    let (a, _) = fit_logistic(&design(&rows), &y).unwrap();
    let order: Vec<usize> = (0..rows.len()).rev().collect();
    let rows_p: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let y_p: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let (b, _) = fit_logistic(&design(&rows_p), &y_p).unwrap();
    for (x, z) in a.to_full().iter().zip(b.to_full()) {
        assert!((x - z).abs() < 1e-9);
    }
}

#[test]
fn oracle_agrees_on_textbook_data() {
    // Two-group data with a closed-form answer: logit of each group's rate.
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (x, events, total) in [(0.0, 3, 10), (1.0, 7, 10)] {
        for i in 0..total {
            rows.push(vec![1.0, x]);
            y.push(f64::from(i < events));
        }
    }
    let (coef, _) = fit_logistic(&design(&rows), &y).unwrap();
    let logit = |p: f64| (p / (1.0 - p)).ln();
    assert!((coef.intercept - logit(0.3)).abs() < 1e-9);
    assert!((coef.slopes[0] - (logit(0.7) - logit(0.3))).abs() < 1e-9);
    let oracle = newton_oracle(&rows, &y).unwrap();
    assert!((oracle[1] - coef.slopes[0]).abs() < 1e-9);
}

#[test]
fn smaller_ridge_gives_larger_separated_slope() {
    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0, i as f64 - 5.5]).collect();
    let y: Vec<f64> = (0..12).map(|i| f64::from(i >= 6)).collect();
    let mut last = 0.0;
    for ridge in [1e-1, 1e-2, 1e-3, 1e-4] {
        let opts = FitOptions {
            ridge,
            ..FitOptions::default()
        };
        let (coef, diag) = fit_logistic_with(&design(&rows), &y, &opts).unwrap();
        assert!(diag.ridge_applied);
        assert!(coef.slopes[0] > last, "ridge {ridge}");
        last = coef.slopes[0];
    }
}

#[test]
fn vanishing_ridge_approaches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (rows, y, oracle) = random_instance(&mut rng, 50, 3);
    let mut last = f64::INFINITY;
    for ridge in [1e-1, 1e-3, 1e-5, 1e-7] {
        let (coef, _) = fit_logistic_penalized(&design(&rows), &y, ridge).unwrap();
        let err = coef
            .to_full()
            .iter()
            .zip(&oracle)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < last, "ridge {ridge}: {err}");
        last = err;
    }
    assert!(last < 1e-5, "{last}");
}
