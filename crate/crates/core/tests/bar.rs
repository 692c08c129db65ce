//! BAR fixed-point, freezing and penalty-placement properties.

mod common;

use common::{random_problem, Shape};
use gplm_bar::bar::{bar_fit_observed, bar_path, stationarity_check, BarIteration, Criterion};
use gplm_bar::baselines::null_fit;
use gplm_bar::simulate::{generate_scenario, ScenarioConfig};
use gplm_bar::{bar_fit, BarControls, CcdControls, Family, LambdaChoice, Penalty, Problem};
use proptest::prelude::*;

fn scenario_problem(config: &ScenarioConfig, replication: usize) -> Problem {
    let data = generate_scenario(config, replication).unwrap();
    Problem::from_dataset(&data, &config.basis_specs().unwrap(), config.family).unwrap()
}

fn bic() -> BarControls {
    BarControls::with_lambda(LambdaChoice::Criterion(Criterion::Bic))
}

/// Checks the per-iteration invariants and returns the number of stages seen.
fn check_iterations(problem: &Problem, controls: &BarControls) -> usize {
    let blocks = problem.design.blocks().clone();
    let mut frozen = vec![false; blocks.beta.len()];
    let mut stages = 0;
    let fit = bar_fit_observed(problem, controls, &CcdControls::default(), |it: &BarIteration<'_>| {
        stages += 1;
        for (col, p) in it.penalties.as_slice().iter().enumerate() {
            if !blocks.beta.contains(&col) {
                assert_eq!(*p, Penalty::None, "column {col} outside beta carries {p:?}");
            }
        }
        for (j, b) in it.coefficients.beta.iter().enumerate() {
            if frozen[j] {
                assert_eq!(*b, 0.0, "beta {j} left zero at stage {}", it.stage);
            }
            if it.stage > 0 && matches!(it.penalties.get(blocks.beta.start + j), Penalty::Excluded) {
                assert_eq!(*b, 0.0);
            }
            frozen[j] |= *b == 0.0 && it.stage > 0;
        }
    })
    .unwrap();
    for (j, b) in fit.coefficients.beta.iter().enumerate() {
        if frozen[j] {
            assert_eq!(*b, 0.0);
        }
    }
    stages
}

#[test]
fn scenario_one_fits_are_stationary() {
    let config = ScenarioConfig::preset("s1", 800, 300).unwrap();
    for replication in 0..2 {
        let problem = scenario_problem(&config, replication);
        let fit = bar_fit(&problem, &bic(), &CcdControls::default()).unwrap();
        assert!(fit.converged, "replication {replication} did not converge");
        let r = stationarity_check(&fit, &problem, fit.lambda).unwrap();
        assert!(r < 1e-3, "replication {replication}: residual {r}");
        check_iterations(&problem, &bic());

        // Moving one selected coefficient off the fixed point must show up.
        let j = fit.support[0];
        let mut moved = fit.clone();
        moved.coefficients.beta[j] *= 1.1;
        let r = stationarity_check(&moved, &problem, fit.lambda).unwrap();
        assert!(r > 1e-2, "perturbed residual {r}");
    }
}

#[test]
fn empty_support_has_zero_residual() {
    let problem = random_problem(
        Family::Logistic,
        Shape {
            n: 100,
            p: 5,
            q_w: 1,
            degree: 3,
        },
        1,
    );
    let controls = BarControls::with_lambda(LambdaChoice::Fixed(1e8));
    let fit = bar_fit(&problem, &controls, &CcdControls::default()).unwrap();
    assert!(fit.support.is_empty());
    assert_eq!(stationarity_check(&fit, &problem, 1e8).unwrap(), 0.0);
}

#[test]
fn huge_lambda_reduces_to_the_x_free_fit() {
    let config = ScenarioConfig::preset("s1", 400, 20).unwrap();
    let problem = scenario_problem(&config, 0);
    let ccd = CcdControls::default();
    let fit = bar_fit(&problem, &BarControls::with_lambda(LambdaChoice::Fixed(1e8)), &ccd).unwrap();
    assert!(fit.outer_iterations <= 3, "took {} outer iterations", fit.outer_iterations);
    assert!(fit.coefficients.beta.iter().all(|b| *b == 0.0));
    let reference = null_fit(&problem, &ccd).unwrap().coefficients;
    assert!((fit.coefficients.intercept - reference.intercept).abs() < 1e-4);
    for (a, b) in fit
        .coefficients
        .alpha
        .iter()
        .chain(&fit.coefficients.gamma)
        .zip(reference.alpha.iter().chain(&reference.gamma))
    {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn extreme_ridge_start_empties_the_support() {
    let config = ScenarioConfig::preset("s1", 400, 20).unwrap();
    let problem = scenario_problem(&config, 0);
    let controls = BarControls { xi: 1e8, ..bic() };
    let fit = bar_fit(&problem, &controls, &CcdControls::default()).unwrap();
    assert!(fit.support.is_empty(), "support {:?}", fit.support);
}

#[test]
fn null_signal_gives_empty_support() {
    let mut config = ScenarioConfig::preset("s1", 400, 20).unwrap();
    config.beta0 = vec![0.0; 20];
    let ccd = CcdControls::default();
    let empty = (0..100)
        .filter(|&r| {
            bar_fit(&scenario_problem(&config, r), &bic(), &ccd)
                .unwrap()
                .support
                .is_empty()
        })
        .count();
    assert!(empty >= 95, "empty support in {empty} of 100 replications");
}

#[test]
fn single_point_path_is_bar_fit() {
    let problem = random_problem(
        Family::Logistic,
        Shape {
            n: 200,
            p: 10,
            q_w: 1,
            degree: 3,
        },
        4,
    );
    let ccd = CcdControls::default();
    let path = bar_path(&problem, &[1.0], &bic(), &ccd).unwrap();
    assert_eq!(path.len(), 1);
    assert_eq!(path[0].fit.as_ref().unwrap(), &bar_fit(&problem, &bic(), &ccd).unwrap());
    assert!(bar_path(&problem, &[], &bic(), &ccd).is_err());
    assert!(bar_path(&problem, &[1.0, 1.0], &bic(), &ccd).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_hold_on_random_problems(
        seed in 0u64..10_000,
        poisson in any::<bool>(),
        lambda in prop_oneof![Just(LambdaChoice::Criterion(Criterion::Aic)), Just(LambdaChoice::Criterion(Criterion::Bic)), (0.5f64..20.0).prop_map(LambdaChoice::Fixed)],
    ) {
        let family = if poisson { Family::Poisson } else { Family::Logistic };
        let problem = random_problem(family, Shape { n: 120, p: 8, q_w: 2, degree: 3 }, seed);
        let controls = BarControls::with_lambda(lambda);
        let stages = check_iterations(&problem, &controls);
        prop_assert!(stages >= 2);
        let fit = bar_fit(&problem, &controls, &CcdControls::default()).unwrap();
        prop_assert!(fit.coefficients.to_flat().iter().all(|v| v.is_finite()));
        prop_assert_eq!(fit.support.clone(), fit.coefficients.support());
        prop_assert_eq!(fit.change_log.len(), fit.outer_iterations);
    }

    #[test]
    fn selected_coefficients_clear_the_freeze_threshold(seed in 0u64..10_000) {
        let problem = random_problem(Family::Logistic, Shape { n: 150, p: 10, q_w: 1, degree: 3 }, seed);
        let fit = bar_fit(&problem, &bic(), &CcdControls::default()).unwrap();
        prop_assert!(fit.support.len() <= 10);
        prop_assert!(fit.coefficients.beta.iter().all(|b| *b == 0.0 || b.abs() >= BarControls::default().freeze_threshold));
    }
}
