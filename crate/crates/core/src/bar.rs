//! Broken adaptive ridge: a ridge start followed by reweighted ridge fits
//! whose per-coefficient weight is `lambda / beta_prev^2`.
//!
//! Coefficients that fall below the freeze threshold are set to exactly zero
//! and dropped from every later sweep, which realises the zero limit of the
//! reweighting in finitely many steps.

use std::fmt;
use std::str::FromStr;

use crate::ccd::{ccd_fit, CcdControls, CcdFit, Penalty, PenaltyMap};
use crate::design::{CoefficientBlocks, Problem};
use crate::error::FitError;
use crate::family::coordinate_derivatives;

/// Information criterion whose penalty constant fixes `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Aic,
    Bic,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Aic => "AIC",
            Criterion::Bic => "BIC",
        })
    }
}

/// `lambda = 2` for AIC and `log n` for BIC.
pub fn select_lambda_fixed(criterion: Criterion, n: f64) -> f64 {
    match criterion {
        Criterion::Aic => 2.0,
        Criterion::Bic => n.ln(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Criterion(Criterion),
    Fixed(f64),
}

impl LambdaChoice {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            LambdaChoice::Criterion(c) => select_lambda_fixed(c, n as f64),
            LambdaChoice::Fixed(v) => v,
        }
    }
}

impl fmt::Display for LambdaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaChoice::Criterion(c) => write!(f, "{c}"),
            LambdaChoice::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for LambdaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aic" => Ok(LambdaChoice::Criterion(Criterion::Aic)),
            "bic" => Ok(LambdaChoice::Criterion(Criterion::Bic)),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .map(LambdaChoice::Fixed)
                .ok_or_else(|| format!("lambda must be 'aic', 'bic' or a positive number, got '{s}'")),
        }
    }
}

/// Optional early exit once the support has settled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    /// Consecutive outer iterations with an unchanged support.
    pub stable_iterations: usize,
    /// Largest coefficient change tolerated at the early exit.
    pub max_change: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            stable_iterations: 3,
            max_change: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarControls {
    /// Ridge precision of the initial fit.
    pub xi: f64,
    pub lambda: LambdaChoice,
    /// Stop once `max_j |beta_j^(s) - beta_j^(s-1)|` falls below this.
    pub outer_tolerance: f64,
    pub max_outer: usize,
    /// Coefficients below this magnitude are frozen at zero.
    pub freeze_threshold: f64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for BarControls {
    fn default() -> Self {
        Self {
            xi: 1.0,
            lambda: LambdaChoice::Criterion(Criterion::Bic),
            outer_tolerance: 1e-6,
            max_outer: 100,
            freeze_threshold: 1e-8,
            early_stop: None,
        }
    }
}

impl BarControls {
    pub fn with_lambda(lambda: LambdaChoice) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), FitError> {
        let ok = self.xi > 0.0
            && self.xi.is_finite()
            && self.outer_tolerance > 0.0
            && self.max_outer >= 1
            && self.freeze_threshold > 0.0
            && self.freeze_threshold < self.outer_tolerance.max(1e-6);
        if !ok {
            return Err(FitError::InvalidControls(format!("{self:?}")));
        }
        if let LambdaChoice::Fixed(v) = self.lambda {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FitError::InvalidControls(format!("lambda must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: CoefficientBlocks,
    /// Indices `j` with `beta_j != 0`.
    pub support: Vec<usize>,
    pub converged: bool,
    /// Reweighted iterations performed after the ridge start.
    pub outer_iterations: usize,
    /// `max_j |beta_j^(s) - beta_j^(s-1)|` for each outer iteration.
    pub change_log: Vec<f64>,
    pub lambda: f64,
    pub xi: f64,
    /// Coordinate-descent passes summed over all stages.
    pub ccd_passes: usize,
    /// Whether every inner coordinate-descent fit met its tolerance.
    pub inner_converged: bool,
}

/// Snapshot passed to an observer after each stage (`stage == 0` is the ridge start).
#[derive(Debug)]
pub struct BarIteration<'a> {
    pub stage: usize,
    pub penalties: &'a PenaltyMap,
    pub coefficients: &'a CoefficientBlocks,
}

pub fn bar_fit(problem: &Problem, controls: &BarControls, ccd: &CcdControls) -> Result<FitResult, FitError> {
    bar_fit_observed(problem, controls, ccd, |_| {})
}

/// [`bar_fit`] reporting every stage to `observer`.
pub fn bar_fit_observed(
    problem: &Problem,
    controls: &BarControls,
    ccd: &CcdControls,
    observer: impl FnMut(&BarIteration<'_>),
) -> Result<FitResult, FitError> {
    controls.validate()?;
    let init = ridge_start(problem, controls.xi, ccd)?;
    run_bar(problem, controls, ccd, init, observer)
}

/// The ridge fit every BAR run starts from.
pub fn ridge_start(problem: &Problem, xi: f64, ccd: &CcdControls) -> Result<CcdFit, FitError> {
    let blocks = problem.design.blocks();
    let ridge = PenaltyMap::on_beta(blocks, |_| Penalty::Ridge { precision: xi });
    ccd_fit(problem, &ridge, ccd, &CoefficientBlocks::zeros(blocks))
}

/// BAR iterations from a precomputed ridge start (see [`ridge_start`]);
/// lets several `lambda` choices share one initial fit.
pub fn bar_fit_from_start(
    problem: &Problem,
    controls: &BarControls,
    ccd: &CcdControls,
    start: CcdFit,
) -> Result<FitResult, FitError> {
    controls.validate()?;
    run_bar(problem, controls, ccd, start, |_| {})
}

fn run_bar(
    problem: &Problem,
    controls: &BarControls,
    ccd: &CcdControls,
    init: CcdFit,
    mut observer: impl FnMut(&BarIteration<'_>),
) -> Result<FitResult, FitError> {
    let blocks = problem.design.blocks();
    let lambda = controls.lambda.resolve(problem.n());
    let eps = controls.freeze_threshold;
    let ridge = PenaltyMap::on_beta(blocks, |_| Penalty::Ridge { precision: controls.xi });
    observer(&BarIteration {
        stage: 0,
        penalties: &ridge,
        coefficients: &init.coefficients,
    });
    let mut passes = init.passes;
    let mut inner_converged = init.converged;
    let mut previous = init.coefficients;

    let mut change_log = Vec::new();
    let mut converged = false;
    let mut stable = 0usize;
    let mut last_support = support_of(&previous.beta, eps);

    for stage in 1..=controls.max_outer {
        let penalties = PenaltyMap::on_beta(blocks, |j| {
            let b = previous.beta[j];
            if b.abs() < eps {
                Penalty::Excluded
            } else {
                Penalty::BarWeight { lambda, previous: b }
            }
        });
        let fit = ccd_fit(problem, &penalties, ccd, &previous)?;
        passes += fit.passes;
        inner_converged &= fit.converged;
        observer(&BarIteration {
            stage,
            penalties: &penalties,
            coefficients: &fit.coefficients,
        });

        let change = fit
            .coefficients
            .beta
            .iter()
            .zip(&previous.beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        change_log.push(change);
        let support = support_of(&fit.coefficients.beta, eps);
        stable = if support == last_support { stable + 1 } else { 0 };
        last_support = support;
        previous = fit.coefficients;

        if change < controls.outer_tolerance {
            converged = true;
            break;
        }
        if let Some(rule) = controls.early_stop {
            if stable >= rule.stable_iterations && change < rule.max_change {
                converged = true;
                break;
            }
        }
    }

    // coordinates still collapsing at exit are frozen like the rest
    for b in previous.beta.iter_mut() {
        if b.abs() < eps {
            *b = 0.0;
        }
    }
    let support = previous.support();
    Ok(FitResult {
        coefficients: previous,
        support,
        converged,
        outer_iterations: change_log.len(),
        change_log,
        lambda,
        xi: controls.xi,
        ccd_passes: passes,
        inner_converged,
    })
}

fn support_of(beta: &[f64], eps: f64) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| b.abs() >= eps)
        .map(|(j, _)| j)
        .collect()
}

/// Largest normalised violation of the reweighted-ridge fixed-point condition
/// `d(-2 loglik)/d beta_j = -2 lambda / beta_j` over the selected support.
pub fn stationarity_check(fit: &FitResult, problem: &Problem, lambda: f64) -> Result<f64, FitError> {
    if fit.support.is_empty() {
        return Ok(0.0);
    }
    let theta = fit.coefficients.to_flat();
    let state = crate::ccd::state_at(problem, &theta)?;
    let start = problem.design.blocks().beta.start;
    Ok(fit
        .support
        .iter()
        .map(|&j| {
            let b = fit.coefficients.beta[j];
            let grad = 2.0 * coordinate_derivatives(problem.family, &state, problem.design.column(start + j)).0;
            let weight = 2.0 * lambda / b.abs();
            (grad + 2.0 * lambda / b).abs() / (1.0 + weight)
        })
        .fold(0.0, f64::max))
}

/// One grid point of a ridge-precision path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub xi: f64,
    pub fit: Result<FitResult, FitError>,
}

/// BAR fits across a grid of initial ridge precisions.
pub fn bar_path(
    problem: &Problem,
    xi_grid: &[f64],
    controls: &BarControls,
    ccd: &CcdControls,
) -> Result<Vec<PathPoint>, FitError> {
    if xi_grid.is_empty() {
        return Err(FitError::Argument("xi grid is empty".into()));
    }
    if xi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::Argument("xi grid must be strictly ascending".into()));
    }
    Ok(xi_grid
        .iter()
        .map(|&xi| {
            let c = BarControls { xi, ..controls.clone() };
            PathPoint {
                xi,
                fit: bar_fit(problem, &c, ccd),
            }
        })
        .collect())
}
