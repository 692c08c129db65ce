//! Unpenalized coordinate descent against a full Newton-Raphson solve.

mod common;

use common::{dense_design, oracle_mean, random_problem, Shape};
use gplm_bar::baselines::{lasso_fit, null_fit};
use gplm_bar::ccd::{ccd_fit, unpenalized_fit, CcdControls, Penalty, PenaltyMap};
use gplm_bar::{CoefficientBlocks, Family, Problem};
use nalgebra::{DMatrix, DVector};

/// Newton-Raphson on the log-likelihood from zero, to machine precision.
fn newton(problem: &Problem) -> Vec<f64> {
    let x = dense_design(problem);
    let (n, k) = x.dim();
    let xm = DMatrix::from_fn(n, k, |i, j| x[[i, j]]);
    let y = DVector::from_column_slice(&problem.y);
    let mut theta = DVector::zeros(k);
    for _ in 0..100 {
        let eta = &xm * &theta;
        let mu = eta.map(|e| oracle_mean(problem.family, e));
        let var = match problem.family {
            Family::Logistic => mu.map(|m| m * (1.0 - m)),
            Family::Poisson => mu.clone(),
        };
        let grad = xm.transpose() * (&y - &mu);
        let mut info = DMatrix::zeros(k, k);
        for i in 0..n {
            let row = xm.row(i);
            info += row.transpose() * row * var[i];
        }
        let step = info.cholesky().expect("information is positive definite").solve(&grad);
        theta += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    theta.iter().copied().collect()
}

fn shape() -> Shape {
    // intercept + 1 + 3 + 5 = 10 columns
    Shape {
        n: 200,
        p: 5,
        q_w: 1,
        degree: 3,
    }
}

fn tight() -> CcdControls {
    CcdControls {
        tolerance: 1e-14,
        step_tolerance: 1e-10,
        max_passes: 5000,
        ..CcdControls::default()
    }
}

#[test]
fn unpenalized_fit_matches_newton_raphson() {
    for family in [Family::Logistic, Family::Poisson] {
        for seed in 0..5 {
            let problem = random_problem(family, shape(), 40 + seed);
            assert!(problem.design.ncols() <= 10);
            let fit = unpenalized_fit(&problem, &tight()).unwrap();
            assert!(fit.converged, "{family} seed {seed} did not converge");
            let got = fit.coefficients.to_flat();
            let want = newton(&problem);
            for (j, (a, b)) in got.iter().zip(&want).enumerate() {
                assert!((a - b).abs() < 1e-6, "{family} seed {seed} column {j}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn default_controls_also_match_newton_raphson() {
    for family in [Family::Logistic, Family::Poisson] {
        let problem = random_problem(family, shape(), 99);
        let got = unpenalized_fit(&problem, &CcdControls::default())
            .unwrap()
            .coefficients
            .to_flat();
        for (a, b) in got.iter().zip(newton(&problem)) {
            assert!((a - b).abs() < 1e-6, "{family}: {a} vs {b}");
        }
    }
}

#[test]
fn heavy_ridge_reduces_to_the_x_free_fit() {
    let problem = random_problem(Family::Logistic, shape(), 5);
    let blocks = problem.design.blocks();
    let ridge = PenaltyMap::on_beta(blocks, |_| Penalty::Ridge { precision: 1e6 });
    let ccd = CcdControls::default();
    let fit = ccd_fit(&problem, &ridge, &ccd, &CoefficientBlocks::zeros(blocks)).unwrap();
    let reference = null_fit(&problem, &ccd).unwrap().coefficients;
    assert!(fit.coefficients.beta.iter().all(|b| b.abs() < 1e-3));
    assert!((fit.coefficients.intercept - reference.intercept).abs() < 1e-2);
    for (a, b) in fit
        .coefficients
        .alpha
        .iter()
        .chain(&fit.coefficients.gamma)
        .zip(reference.alpha.iter().chain(&reference.gamma))
    {
        assert!((a - b).abs() < 1e-2, "{a} vs {b}");
    }
}

#[test]
fn zero_lambda_lasso_is_the_unpenalized_fit() {
    for family in [Family::Logistic, Family::Poisson] {
        let problem = random_problem(family, shape(), 17);
        let ccd = CcdControls::default();
        let a = lasso_fit(&problem, 0.0, &ccd, None).unwrap().coefficients.to_flat();
        let b = unpenalized_fit(&problem, &ccd).unwrap().coefficients.to_flat();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-5, "{family}: {x} vs {y}");
        }
    }
}
