//! LASSO and adaptive-LASSO comparators on the augmented design, with
//! k-fold cross-validation of the penalty level by held-out deviance.
//!
//! Only beta columns are penalized. The objective is
//! `-2 loglik + 2 lambda sum_j w_j |beta_j|` with `w_j = 1` for the LASSO.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ccd::{ccd_fit, deviance, deviance_gradient, CcdControls, CcdFit, Penalty, PenaltyMap};
use crate::design::{CoefficientBlocks, Problem};
use crate::error::FitError;
use crate::family::Family;

/// Pilot coefficients below this magnitude get an infinite adaptive weight.
pub const ADAPTIVE_ZERO: f64 = 1e-8;

/// Fit with every beta held at zero.
pub fn null_fit(problem: &Problem, ccd: &CcdControls) -> Result<CcdFit, FitError> {
    let blocks = problem.design.blocks();
    let pen = PenaltyMap::on_beta(blocks, |_| Penalty::Excluded);
    ccd_fit(problem, &pen, ccd, &CoefficientBlocks::zeros(blocks))
}

/// Ridge fit on beta with precision `xi`, used as the adaptive-LASSO pilot.
pub fn ridge_pilot(problem: &Problem, xi: f64, ccd: &CcdControls) -> Result<CcdFit, FitError> {
    let blocks = problem.design.blocks();
    let pen = PenaltyMap::on_beta(blocks, |_| Penalty::Ridge { precision: xi });
    ccd_fit(problem, &pen, ccd, &CoefficientBlocks::zeros(blocks))
}

/// Adaptive weights `1 / |pilot_j|`, infinite for negligible pilots.
pub fn adaptive_weights(pilot: &CoefficientBlocks) -> Vec<f64> {
    pilot
        .beta
        .iter()
        .map(|b| {
            if b.abs() < ADAPTIVE_ZERO {
                f64::INFINITY
            } else {
                1.0 / b.abs()
            }
        })
        .collect()
}

fn l1_map(problem: &Problem, lambda: f64, weights: Option<&[f64]>) -> PenaltyMap {
    PenaltyMap::on_beta(problem.design.blocks(), |j| {
        let w = weights.map_or(1.0, |w| w[j]);
        if w.is_infinite() {
            Penalty::Excluded
        } else {
            Penalty::L1 { lambda: lambda * w }
        }
    })
}

fn weighted_l1_fit(
    problem: &Problem,
    lambda: f64,
    weights: Option<&[f64]>,
    ccd: &CcdControls,
    warm_start: Option<&CoefficientBlocks>,
) -> Result<CcdFit, FitError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FitError::Argument(format!("lambda must be non-negative, got {lambda}")));
    }
    let blocks = problem.design.blocks();
    let zeros = CoefficientBlocks::zeros(blocks);
    ccd_fit(problem, &l1_map(problem, lambda, weights), ccd, warm_start.unwrap_or(&zeros))
}

/// Minimiser of `-2 loglik + 2 lambda ||beta||_1`.
pub fn lasso_fit(
    problem: &Problem,
    lambda: f64,
    ccd: &CcdControls,
    warm_start: Option<&CoefficientBlocks>,
) -> Result<CcdFit, FitError> {
    weighted_l1_fit(problem, lambda, None, ccd, warm_start)
}

/// Weighted-L1 fit with weights `1 / |pilot beta_j|`.
pub fn adaptive_lasso_fit(
    problem: &Problem,
    lambda: f64,
    pilot: &CoefficientBlocks,
    ccd: &CcdControls,
    warm_start: Option<&CoefficientBlocks>,
) -> Result<CcdFit, FitError> {
    let weights = adaptive_weights(pilot);
    weighted_l1_fit(problem, lambda, Some(&weights), ccd, warm_start)
}

/// Smallest lambda at which every (weighted) beta stays at zero, given the
/// null fit `null_theta`.
pub fn lambda_max(problem: &Problem, null_theta: &[f64], weights: Option<&[f64]>) -> Result<f64, FitError> {
    let grad = deviance_gradient(problem, null_theta)?;
    let beta = problem.design.blocks().beta.clone();
    Ok(beta
        .enumerate()
        .map(|(j, col)| {
            let w = weights.map_or(1.0, |w| w[j]);
            if w.is_infinite() {
                0.0
            } else {
                grad[col].abs() / (2.0 * w)
            }
        })
        .fold(0.0, f64::max))
}

/// `len` geometric points from `lambda_max` down to `min_ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, len: usize, min_ratio: f64) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..len)
            .map(|i| lambda_max * min_ratio.powf(i as f64 / (len - 1) as f64))
            .collect(),
    }
}

/// Which L1 estimator to cross-validate.
#[derive(Debug, Clone, PartialEq)]
pub enum CvMethod {
    Lasso,
    /// Adaptive LASSO with fixed per-column weights.
    AdaptiveLasso {
        weights: Vec<f64>,
    },
}

impl CvMethod {
    fn weights(&self) -> Option<&[f64]> {
        match self {
            CvMethod::Lasso => None,
            CvMethod::AdaptiveLasso { weights } => Some(weights),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSpec {
    pub folds: usize,
    pub grid_len: usize,
    pub min_ratio: f64,
    /// Explicit decreasing grid; overrides the automatic one.
    pub grid: Option<Vec<f64>>,
    pub seed: u64,
}

impl CvSpec {
    pub fn new(folds: usize, seed: u64) -> Self {
        Self {
            folds,
            grid_len: 100,
            min_ratio: 1e-3,
            grid: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Held-out deviance per observation, for each lambda.
    pub mean_deviance: Vec<f64>,
    pub best_index: usize,
    pub best_lambda: f64,
    /// Fold id of every observation.
    pub fold_of: Vec<usize>,
}

/// Fold ids for `y`. Binary responses are stratified so each class is dealt
/// round-robin across folds.
pub fn fold_assignment(y: &[f64], family: Family, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match family {
        Family::Logistic => {
            let zeros = (0..y.len()).filter(|&i| y[i] == 0.0).collect();
            let ones = (0..y.len()).filter(|&i| y[i] != 0.0).collect();
            vec![zeros, ones]
        }
        Family::Poisson => vec![(0..y.len()).collect()],
    };
    let mut fold_of = vec![0; y.len()];
    let mut next = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    fold_of
}

fn single_class_training(y: &[f64], fold_of: &[usize], k: usize) -> bool {
    (0..k).any(|f| {
        let mut classes = y.iter().zip(fold_of).filter(|(_, &g)| g != f).map(|(v, _)| *v != 0.0);
        match classes.next() {
            Some(first) => classes.all(|c| c == first),
            None => true,
        }
    })
}

/// Warm-started fits along `lambdas`.
pub fn l1_path(problem: &Problem, method: &CvMethod, lambdas: &[f64], ccd: &CcdControls) -> Result<Vec<CcdFit>, FitError> {
    let weights = method.weights();
    let mut warm = null_fit(problem, ccd)?.coefficients;
    let mut fits = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let fit = weighted_l1_fit(problem, lambda, weights, ccd, Some(&warm))?;
        warm = fit.coefficients.clone();
        fits.push(fit);
    }
    Ok(fits)
}

fn check_spec(problem: &Problem, spec: &CvSpec) -> Result<(), FitError> {
    if spec.folds < 2 {
        return Err(FitError::CrossValidation(format!(
            "need at least 2 folds, got {}",
            spec.folds
        )));
    }
    if problem.n() < spec.folds {
        return Err(FitError::CrossValidation(format!(
            "{} observations cannot fill {} folds",
            problem.n(),
            spec.folds
        )));
    }
    if let Some(grid) = &spec.grid {
        if grid.is_empty() || grid.windows(2).any(|w| w[1] >= w[0]) || grid.iter().any(|l| l.is_nan() || *l < 0.0) {
            return Err(FitError::CrossValidation(
                "grid must be non-empty and strictly decreasing".into(),
            ));
        }
    } else if spec.grid_len == 0 || !(spec.min_ratio > 0.0 && spec.min_ratio < 1.0) {
        return Err(FitError::CrossValidation(
            "grid length must be positive and min ratio in (0, 1)".into(),
        ));
    }
    Ok(())
}

fn assign_folds(problem: &Problem, k: usize, seed: u64) -> Result<Vec<usize>, FitError> {
    for attempt in 0..5u64 {
        let fold_of = fold_assignment(&problem.y, problem.family, k, seed.wrapping_add(attempt));
        if problem.family != Family::Logistic || !single_class_training(&problem.y, &fold_of, k) {
            return Ok(fold_of);
        }
    }
    Err(FitError::CrossValidation(
        "could not form folds whose training sets contain both response classes".into(),
    ))
}

fn argmin_prefer_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// K-fold cross-validation of an L1 estimator. Ties go to the larger lambda.
pub fn cross_validate(problem: &Problem, method: &CvMethod, spec: &CvSpec, ccd: &CcdControls) -> Result<CvResult, FitError> {
    cross_validate_and_fit(problem, method, spec, ccd).map(|(cv, _)| cv)
}

/// Automatic grids stop once the cross-validated deviance has not improved
/// for this many consecutive grid points.
pub const CV_PATIENCE: usize = 10;

/// Warm-start chain of one training set, plus its held-out rows.
struct FoldPath {
    train: Problem,
    test: Option<Problem>,
    warm: CoefficientBlocks,
}

impl FoldPath {
    fn step(&mut self, lambda: f64, weights: Option<&[f64]>, ccd: &CcdControls) -> Result<(CcdFit, f64), FitError> {
        let fit = weighted_l1_fit(&self.train, lambda, weights, ccd, Some(&self.warm))?;
        self.warm = fit.coefficients.clone();
        let held_out = self.test.as_ref().map_or(0.0, |t| deviance(t, &fit.coefficients.to_flat()));
        Ok((fit, held_out))
    }
}

/// Cross-validates and returns the full-data fit at the chosen lambda.
///
/// The full-data path and every fold path advance together along the grid.
/// An automatic grid is cut short when the full-data deviance stops moving
/// (relative change below 1e-5 or 99.9% explained, after at least five
/// points) or when the held-out deviance has not improved for
/// [`CV_PATIENCE`] points; an explicit grid is always run to the end.
pub fn cross_validate_and_fit(
    problem: &Problem,
    method: &CvMethod,
    spec: &CvSpec,
    ccd: &CcdControls,
) -> Result<(CvResult, CcdFit), FitError> {
    check_spec(problem, spec)?;
    let weights = method.weights();
    let fold_of = assign_folds(problem, spec.folds, spec.seed)?;

    let null = null_fit(problem, ccd)?;
    let null_theta = null.coefficients.to_flat();
    let null_dev = deviance(problem, &null_theta);
    let grid = match &spec.grid {
        Some(grid) => grid.clone(),
        None => {
            let lmax = lambda_max(problem, &null_theta, weights)?;
            lambda_grid(lmax.max(f64::MIN_POSITIVE), spec.grid_len, spec.min_ratio)
        }
    };
    let automatic = spec.grid.is_none();

    let mut full = FoldPath {
        train: problem.clone(),
        test: None,
        warm: null.coefficients,
    };
    let mut folds = (0..spec.folds)
        .map(|f| {
            let train: Vec<usize> = (0..problem.n()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..problem.n()).filter(|&i| fold_of[i] == f).collect();
            let train = problem.select_rows(&train);
            let warm = null_fit(&train, ccd)?.coefficients;
            Ok(FoldPath {
                train,
                test: Some(problem.select_rows(&test)),
                warm,
            })
        })
        .collect::<Result<Vec<_>, FitError>>()?;

    let n = problem.n() as f64;
    let mut lambdas = Vec::new();
    let mut mean_deviance = Vec::new();
    let mut best_index = 0;
    let mut best_fit: Option<CcdFit> = None;
    let mut last_dev = null_dev;
    for &lambda in &grid {
        let (fit, _) = full.step(lambda, weights, ccd)?;
        let held_out = folds
            .par_iter_mut()
            .map(|f| f.step(lambda, weights, ccd).map(|(_, d)| d))
            .collect::<Result<Vec<f64>, FitError>>()?;
        let mean = held_out.iter().sum::<f64>() / n;
        let i = lambdas.len();
        lambdas.push(lambda);
        mean_deviance.push(mean);
        let dev = deviance(problem, &fit.coefficients.to_flat());
        if i == 0 || mean < mean_deviance[best_index] {
            best_index = i;
            best_fit = Some(fit);
        }
        if automatic {
            let explained = if null_dev > 0.0 { 1.0 - dev / null_dev } else { 1.0 };
            let rel = if dev > 0.0 { (last_dev - dev) / dev } else { 0.0 };
            let flat = lambdas.len() >= 5 && (explained > 0.999 || rel < 1e-5);
            if flat || i - best_index >= CV_PATIENCE {
                break;
            }
        }
        last_dev = dev;
    }
    debug_assert_eq!(best_index, argmin_prefer_first(&mean_deviance));
    let best_fit = best_fit.expect("grid is non-empty");
    Ok((
        CvResult {
            best_lambda: lambdas[best_index],
            lambdas,
            mean_deviance,
            best_index,
            fold_of,
        },
        best_fit,
    ))
}
