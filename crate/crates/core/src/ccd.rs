//! Cyclic coordinate descent with one-dimensional Newton steps.
//!
//! Every column of the augmented design is updated in turn by a Newton step
//! on the penalized objective `-2 loglik + penalty`, clipped to a per-column
//! trust region whose radius adapts as `max(grow * |step|, shrink * radius)`.
//! A step that would raise the objective is halved until it does not, so the
//! objective never increases between passes.

use nalgebra::{DMatrix, DVector};

use crate::design::{BlockMap, CoefficientBlocks, Problem};
use crate::error::FitError;
use crate::family::{coordinate_derivatives, log_likelihood, Family, Proposal, WorkingState};

/// Penalty carried by one design column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    /// Gaussian prior with precision `xi`: contributes `xi * b^2`.
    Ridge {
        precision: f64,
    },
    /// Reweighted ridge: contributes `lambda * b^2 / previous^2`.
    BarWeight {
        lambda: f64,
        previous: f64,
    },
    /// Contributes `2 * lambda * |b|`.
    L1 {
        lambda: f64,
    },
    /// Coefficient held at exactly zero and skipped by the sweep.
    Excluded,
}

impl Penalty {
    pub fn value(&self, b: f64) -> f64 {
        match *self {
            Penalty::None | Penalty::Excluded => 0.0,
            Penalty::Ridge { precision } => precision * b * b,
            Penalty::BarWeight { lambda, previous } => lambda * b * b / (previous * previous),
            Penalty::L1 { lambda } => 2.0 * lambda * b.abs(),
        }
    }

    /// First and second derivatives of a smooth penalty at `b`.
    fn smooth_derivatives(&self, b: f64) -> (f64, f64) {
        match *self {
            Penalty::Ridge { precision } => (2.0 * precision * b, 2.0 * precision),
            Penalty::BarWeight { lambda, previous } => {
                let w = lambda / (previous * previous);
                (2.0 * w * b, 2.0 * w)
            }
            _ => (0.0, 0.0),
        }
    }

    pub fn is_penalized(&self) -> bool {
        !matches!(self, Penalty::None)
    }
}

/// Per-column penalties over the whole augmented design.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMap {
    penalties: Vec<Penalty>,
}

impl PenaltyMap {
    /// No penalty anywhere.
    pub fn unpenalized(blocks: &BlockMap) -> Self {
        Self {
            penalties: vec![Penalty::None; blocks.ncols()],
        }
    }

    /// `penalty(j)` on the `j`-th beta column, nothing elsewhere.
    pub fn on_beta(blocks: &BlockMap, mut penalty: impl FnMut(usize) -> Penalty) -> Self {
        let mut map = Self::unpenalized(blocks);
        for (j, col) in blocks.beta.clone().enumerate() {
            map.penalties[col] = penalty(j);
        }
        map
    }

    pub fn get(&self, col: usize) -> Penalty {
        self.penalties[col]
    }

    pub fn as_slice(&self) -> &[Penalty] {
        &self.penalties
    }

    pub fn len(&self) -> usize {
        self.penalties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.penalties.is_empty()
    }

    /// Checks parameter ranges and that only beta columns are penalized or excluded.
    pub fn validate(&self, blocks: &BlockMap) -> Result<(), FitError> {
        if self.penalties.len() != blocks.ncols() {
            return Err(FitError::InvalidControls(format!(
                "penalty map covers {} columns, design has {}",
                self.penalties.len(),
                blocks.ncols()
            )));
        }
        for (column, p) in self.penalties.iter().enumerate() {
            let bad = |reason: &str| {
                Err(FitError::InvalidPenalty {
                    column,
                    reason: reason.to_string(),
                })
            };
            if !matches!(p, Penalty::None) && !blocks.beta.contains(&column) {
                return bad("only beta columns may be penalized");
            }
            match *p {
                Penalty::Ridge { precision } if !(precision > 0.0 && precision.is_finite()) => {
                    return bad("ridge precision must be positive")
                }
                Penalty::BarWeight { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                    return bad("BAR lambda must be positive")
                }
                Penalty::BarWeight { previous, .. } if previous == 0.0 || !previous.is_finite() => {
                    return bad("BAR weight needs a finite non-zero previous estimate")
                }
                Penalty::L1 { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => return bad("L1 lambda must be non-negative"),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcdControls {
    pub max_passes: usize,
    /// Relative objective change per pass below which the fit may stop.
    pub tolerance: f64,
    /// Largest proposed (unclipped) coordinate step allowed at convergence.
    pub step_tolerance: f64,
    pub initial_trust: f64,
    pub trust_shrink: f64,
    pub trust_grow: f64,
    pub sweep: SweepOrder,
}

impl Default for CcdControls {
    fn default() -> Self {
        Self {
            max_passes: 500,
            tolerance: 1e-8,
            step_tolerance: 1e-8,
            initial_trust: 1.0,
            trust_shrink: 0.5,
            trust_grow: 2.0,
            sweep: SweepOrder::Forward,
        }
    }
}

impl CcdControls {
    pub fn validate(&self) -> Result<(), FitError> {
        let ok = self.max_passes >= 1
            && self.tolerance > 0.0
            && self.step_tolerance > 0.0
            && self.initial_trust > 0.0
            && self.trust_shrink > 0.0
            && self.trust_shrink < 1.0
            && self.trust_grow >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(FitError::InvalidControls(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcdFit {
    pub coefficients: CoefficientBlocks,
    pub converged: bool,
    pub passes: usize,
    pub objective: f64,
    /// Objective after each full pass.
    pub objective_trace: Vec<f64>,
    /// Columns skipped because their curvature vanished.
    pub degenerate_columns: Vec<usize>,
}

/// `-2 loglik + sum_j penalty_j(theta_j)` for a flat coefficient vector.
pub fn penalized_objective_flat(theta: &[f64], state: &WorkingState, penalties: &PenaltyMap) -> Result<f64, FitError> {
    let ll = log_likelihood(state.family(), state)?;
    let pen: f64 = theta.iter().zip(penalties.as_slice()).map(|(&b, p)| p.value(b)).sum();
    Ok(-2.0 * ll + pen)
}

/// Penalized objective for block coefficients; `state` must match them.
pub fn penalized_objective(
    coefficients: &CoefficientBlocks,
    state: &WorkingState,
    penalties: &PenaltyMap,
) -> Result<f64, FitError> {
    penalized_objective_flat(&coefficients.to_flat(), state, penalties)
}

/// Joint Newton steps are skipped when more columns than this are unpenalized.
pub const MAX_NEWTON_BLOCK: usize = 64;

/// Mutable solver state for one fit.
pub struct CoordinateDescent<'a> {
    problem: &'a Problem,
    penalties: &'a PenaltyMap,
    controls: &'a CcdControls,
    theta: Vec<f64>,
    state: WorkingState,
    trust: Vec<f64>,
    proposal: Proposal,
    objective: f64,
    degenerate: Vec<usize>,
    largest_step: f64,
    /// Unpenalized columns that also receive a joint Newton step after every sweep.
    newton_block: Vec<usize>,
}

/// Outcome of one coordinate update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateStep {
    pub value: f64,
    pub applied: f64,
    /// Unclipped Newton (or soft-threshold) step.
    pub proposed: f64,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(
        problem: &'a Problem,
        penalties: &'a PenaltyMap,
        controls: &'a CcdControls,
        warm_start: &CoefficientBlocks,
    ) -> Result<Self, FitError> {
        let blocks = problem.design.blocks();
        controls.validate()?;
        penalties.validate(blocks)?;
        if !warm_start.fits(blocks) {
            return Err(FitError::Argument("warm start does not match the design blocks".into()));
        }
        let mut theta = warm_start.to_flat();
        for (t, p) in theta.iter_mut().zip(penalties.as_slice()) {
            if matches!(p, Penalty::Excluded) {
                *t = 0.0;
            }
        }
        let eta = problem.design.linear_predictor(&theta);
        let state = WorkingState::new(problem.family, problem.y.clone(), eta)?;
        let newton_block: Vec<usize> = (0..theta.len())
            .filter(|&j| matches!(penalties.get(j), Penalty::None))
            .collect();
        let newton_block = if (2..=MAX_NEWTON_BLOCK).contains(&newton_block.len()) {
            newton_block
        } else {
            Vec::new()
        };
        let mut engine = Self {
            problem,
            penalties,
            controls,
            trust: vec![controls.initial_trust; theta.len()],
            theta,
            state,
            proposal: Proposal::default(),
            objective: 0.0,
            degenerate: Vec::new(),
            largest_step: 0.0,
            newton_block,
        };
        engine.objective = engine.exact_objective()?;
        Ok(engine)
    }

    fn exact_objective(&self) -> Result<f64, FitError> {
        penalized_objective_flat(&self.theta, &self.state, self.penalties)
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn state(&self) -> &WorkingState {
        &self.state
    }

    /// Newton update of column `j`, clipped to its trust region.
    pub fn update_coordinate(&mut self, j: usize) -> Result<CoordinateStep, FitError> {
        let penalty = self.penalties.get(j);
        let b = self.theta[j];
        let unchanged = CoordinateStep {
            value: b,
            applied: 0.0,
            proposed: 0.0,
        };
        if matches!(penalty, Penalty::Excluded) {
            return Ok(unchanged);
        }
        let column = self.problem.design.column(j);
        let (d1, d2) = coordinate_derivatives(self.problem.family, &self.state, column);
        let (mut grad, mut curv) = (2.0 * d1, 2.0 * d2);
        let proposed = match penalty {
            Penalty::L1 { lambda } => {
                if curv <= 0.0 {
                    0.0
                } else {
                    let z = b - grad / curv;
                    let shrunk = z.signum() * (z.abs() - 2.0 * lambda / curv).max(0.0);
                    shrunk - b
                }
            }
            _ => {
                let (p1, p2) = penalty.smooth_derivatives(b);
                grad += p1;
                curv += p2;
                if curv <= 0.0 {
                    if grad != 0.0 {
                        log::warn!("column {j} has zero curvature with non-zero gradient; skipped");
                        if !self.degenerate.contains(&j) {
                            self.degenerate.push(j);
                        }
                    }
                    0.0
                } else {
                    -grad / curv
                }
            }
        };
        if !proposed.is_finite() {
            return Err(FitError::NonFiniteDerivative { column: j });
        }
        self.largest_step = self.largest_step.max(proposed.abs());
        if proposed == 0.0 {
            return Ok(unchanged);
        }
        let radius = self.trust[j];
        let mut step = proposed.clamp(-radius, radius);
        let slack = 1e-13 * (1.0 + self.objective.abs());
        for _ in 0..40 {
            let ll_change = self.state.propose(column, step, &mut self.proposal);
            let change = -2.0 * ll_change + penalty.value(b + step) - penalty.value(b);
            if change.is_finite() && change <= slack {
                self.state.accept(&mut self.proposal);
                self.theta[j] = b + step;
                self.objective += change;
                self.trust[j] = (self.controls.trust_grow * step.abs()).max(self.controls.trust_shrink * radius);
                return Ok(CoordinateStep {
                    value: b + step,
                    applied: step,
                    proposed,
                });
            }
            step *= 0.5;
        }
        self.trust[j] = self.controls.trust_shrink * radius;
        Ok(CoordinateStep { proposed, ..unchanged })
    }

    /// One sweep over all columns; returns the objective afterwards.
    pub fn pass(&mut self) -> Result<f64, FitError> {
        self.sweep(false)
    }

    /// Sweep over every column, or only over columns that can currently
    /// move when `active_only` is set (L1 columns sitting at zero are skipped).
    fn sweep(&mut self, active_only: bool) -> Result<f64, FitError> {
        self.largest_step = 0.0;
        let ncols = self.theta.len();
        for i in 0..ncols {
            let j = match self.controls.sweep {
                SweepOrder::Forward => i,
                SweepOrder::Reverse => ncols - 1 - i,
            };
            if active_only && self.theta[j] == 0.0 && matches!(self.penalties.get(j), Penalty::L1 { .. }) {
                continue;
            }
            self.update_coordinate(j)?;
        }
        self.block_newton();
        self.objective = -2.0 * self.state.cached_log_likelihood()
            + self
                .theta
                .iter()
                .zip(self.penalties.as_slice())
                .map(|(&b, p)| p.value(b))
                .sum::<f64>();
        Ok(self.objective)
    }

    /// Joint Newton step over the unpenalized columns with step halving.
    /// The intercept and the Bernstein columns are close to collinear, and
    /// one-at-a-time updates crawl along that direction; the joint step
    /// removes the stall without changing the fixed point.
    fn block_newton(&mut self) {
        let cols = &self.newton_block;
        let k = cols.len();
        if k == 0 {
            return;
        }
        let family = self.problem.family;
        let design = &self.problem.design;
        let resid: Vec<f64> = self.state.mu().iter().zip(self.state.y()).map(|(m, y)| m - y).collect();
        let var: Vec<f64> = self.state.mu().iter().map(|&m| family.variance(m)).collect();
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        let mut weighted = vec![0.0; resid.len()];
        for a in 0..k {
            let ca = design.column(cols[a]);
            grad[a] = ca.iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>();
            weighted.iter_mut().zip(ca).zip(&var).for_each(|((w, c), v)| *w = c * v);
            for b in 0..=a {
                let h: f64 = design.column(cols[b]).iter().zip(&weighted).map(|(c, w)| c * w).sum();
                hess[(a, b)] = h;
                hess[(b, a)] = h;
            }
        }
        let Some(chol) = hess.cholesky() else {
            return;
        };
        let delta = chol.solve(&(-grad));
        if !delta.iter().all(|d| d.is_finite()) {
            return;
        }
        let mut direction = vec![0.0; resid.len()];
        for (a, &j) in cols.iter().enumerate() {
            direction
                .iter_mut()
                .zip(design.column(j))
                .for_each(|(u, c)| *u += delta[a] * c);
        }
        let slack = 1e-13 * (1.0 + self.objective.abs());
        let mut t = 1.0;
        for _ in 0..40 {
            let change = -2.0 * self.state.propose(&direction, t, &mut self.proposal);
            if change.is_finite() && change <= slack {
                self.state.accept(&mut self.proposal);
                for (a, &j) in cols.iter().enumerate() {
                    self.theta[j] += t * delta[a];
                }
                self.objective += change;
                let biggest = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
                self.largest_step = self.largest_step.max(biggest);
                return;
            }
            t *= 0.5;
        }
    }

    /// Largest unclipped step proposed during the last pass.
    pub fn largest_step(&self) -> f64 {
        self.largest_step
    }

    fn settled(&self, before: f64, after: f64) -> bool {
        (before - after).abs() <= self.controls.tolerance * (1.0 + after.abs())
            && self.largest_step <= self.controls.step_tolerance
    }

    /// Sweeps until a full pass meets both stopping rules or the pass budget
    /// runs out. With L1 columns present, full passes alternate with inner
    /// passes restricted to the active set.
    pub fn run(mut self) -> Result<CcdFit, FitError> {
        let has_l1 = self.penalties.as_slice().iter().any(|p| matches!(p, Penalty::L1 { .. }));
        let max = self.controls.max_passes;
        let mut trace = Vec::new();
        let mut converged = false;
        let mut passes = 0;
        'outer: while passes < max {
            let before = self.objective;
            let after = self.sweep(false)?;
            passes += 1;
            trace.push(after);
            if self.settled(before, after) {
                converged = true;
                break;
            }
            if has_l1 {
                while passes < max {
                    let before = self.objective;
                    let after = self.sweep(true)?;
                    passes += 1;
                    trace.push(after);
                    if self.settled(before, after) {
                        continue 'outer;
                    }
                }
            }
        }
        let objective = self.exact_objective()?;
        Ok(CcdFit {
            coefficients: CoefficientBlocks::from_flat(self.problem.design.blocks(), &self.theta)?,
            converged,
            passes,
            objective,
            objective_trace: trace,
            degenerate_columns: self.degenerate,
        })
    }
}

/// Fits `problem` under `penalties` starting from `warm_start`.
pub fn ccd_fit(
    problem: &Problem,
    penalties: &PenaltyMap,
    controls: &CcdControls,
    warm_start: &CoefficientBlocks,
) -> Result<CcdFit, FitError> {
    CoordinateDescent::new(problem, penalties, controls, warm_start)?.run()
}

/// Unpenalized fit from a zero start.
pub fn unpenalized_fit(problem: &Problem, controls: &CcdControls) -> Result<CcdFit, FitError> {
    let blocks = problem.design.blocks();
    ccd_fit(
        problem,
        &PenaltyMap::unpenalized(blocks),
        controls,
        &CoefficientBlocks::zeros(blocks),
    )
}

/// Gradient of `-2 loglik` with respect to every column at `theta`.
pub fn deviance_gradient(problem: &Problem, theta: &[f64]) -> Result<Vec<f64>, FitError> {
    let state = state_at(problem, theta)?;
    Ok((0..problem.design.ncols())
        .map(|j| 2.0 * coordinate_derivatives(problem.family, &state, problem.design.column(j)).0)
        .collect())
}

/// Working state for `problem` at flat coefficients `theta`.
pub fn state_at(problem: &Problem, theta: &[f64]) -> Result<WorkingState, FitError> {
    Ok(WorkingState::new(
        problem.family,
        problem.y.clone(),
        problem.design.linear_predictor(theta),
    )?)
}

/// Held-out deviance of `theta` on `problem`.
pub fn deviance(problem: &Problem, theta: &[f64]) -> f64 {
    let family: Family = problem.family;
    problem
        .design
        .linear_predictor(theta)
        .iter()
        .zip(&problem.y)
        .map(|(&e, &y)| family.unit_deviance(y, e))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Dataset, SieveDesign};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn intercept_only(y: Vec<f64>, family: Family) -> Problem {
        let n = y.len();
        let ds = Dataset::new(y, Array2::zeros((n, 0)), Array2::zeros((n, 0)), Array2::zeros((n, 0))).unwrap();
        Problem::new(SieveDesign::build(&ds, &[]).unwrap(), ds.y.clone(), family).unwrap()
    }

    fn single_beta(y: Vec<f64>, x: Vec<f64>) -> Problem {
        let n = y.len();
        let ds = Dataset::new(
            y,
            Array2::from_shape_vec((n, 1), x).unwrap(),
            Array2::zeros((n, 0)),
            Array2::zeros((n, 0)),
        )
        .unwrap();
        Problem::new(SieveDesign::build(&ds, &[]).unwrap(), ds.y.clone(), Family::Logistic).unwrap()
    }

    #[test]
    fn objective_arithmetic() {
        let blocks = BlockMap::new(0, 0, 1);
        let state = WorkingState::zeros(Family::Logistic, vec![1.0, 0.0]);
        let ll_term = 4.0 * 2f64.ln();
        let mut coefs = CoefficientBlocks::zeros(&blocks);
        let ridge = PenaltyMap::on_beta(&blocks, |_| Penalty::Ridge { precision: 1.0 });
        assert_abs_diff_eq!(penalized_objective(&coefs, &state, &ridge).unwrap(), ll_term, epsilon = 1e-12);
        coefs.beta[0] = 2.0;
        // the state is left at eta = 0 so only the penalty term moves
        assert_abs_diff_eq!(
            penalized_objective(&coefs, &state, &ridge).unwrap(),
            ll_term + 4.0,
            epsilon = 1e-12
        );
        let bar = Penalty::BarWeight {
            lambda: 2.0,
            previous: 0.5,
        };
        assert_abs_diff_eq!(bar.value(0.5), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Penalty::L1 { lambda: 0.5 }.value(-3.0), 3.0);
    }

    #[test]
    fn stationary_coordinate_does_not_move() {
        let problem = intercept_only(vec![1.0, 0.0], Family::Logistic);
        let pen = PenaltyMap::unpenalized(problem.design.blocks());
        let controls = CcdControls::default();
        let start = CoefficientBlocks::zeros(problem.design.blocks());
        let mut engine = CoordinateDescent::new(&problem, &pen, &controls, &start).unwrap();
        let step = engine.update_coordinate(0).unwrap();
        assert_eq!(step.applied, 0.0);
        assert_eq!(step.value, 0.0);
    }

    #[test]
    fn symmetric_ridge_converges_to_zero() {
        let problem = single_beta(vec![1.0, 0.0], vec![1.0, 1.0]);
        let blocks = problem.design.blocks();
        let pen = PenaltyMap::on_beta(blocks, |_| Penalty::Ridge { precision: 1.0 });
        let fit = ccd_fit(&problem, &pen, &CcdControls::default(), &CoefficientBlocks::zeros(blocks)).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.coefficients.beta[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bernoulli_intercept_reaches_log_odds() {
        let problem = intercept_only(vec![1.0, 1.0, 1.0, 0.0], Family::Logistic);
        let fit = unpenalized_fit(&problem, &CcdControls::default()).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.coefficients.intercept, 3f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn poisson_intercept_reaches_log_mean() {
        let problem = intercept_only(vec![0.0, 2.0, 5.0, 1.0], Family::Poisson);
        let fit = unpenalized_fit(&problem, &CcdControls::default()).unwrap();
        assert_abs_diff_eq!(fit.coefficients.intercept, 2f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn warm_start_at_optimum_needs_one_pass() {
        let problem = intercept_only(vec![1.0, 1.0, 1.0, 0.0], Family::Logistic);
        let blocks = problem.design.blocks();
        let mut start = CoefficientBlocks::zeros(blocks);
        start.intercept = 3f64.ln();
        let fit = ccd_fit(&problem, &PenaltyMap::unpenalized(blocks), &CcdControls::default(), &start).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.passes, 1);
    }

    #[test]
    fn separation_is_reported_not_fatal() {
        let problem = single_beta(vec![1.0, 1.0, 0.0, 0.0], vec![1.0, 2.0, -1.0, -2.0]);
        let controls = CcdControls {
            max_passes: 60,
            ..CcdControls::default()
        };
        let fit = unpenalized_fit(&problem, &controls).unwrap();
        assert!(!fit.converged);
        assert!(fit.coefficients.beta[0] > 5.0);
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }

    #[test]
    fn zero_column_is_harmless() {
        let problem = single_beta(vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]);
        let fit = unpenalized_fit(&problem, &CcdControls::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.coefficients.beta[0], 0.0);
    }

    #[test]
    fn penalties_off_beta_are_rejected() {
        let blocks = BlockMap::new(1, 0, 1);
        let mut pen = PenaltyMap::unpenalized(&blocks);
        pen.penalties[1] = Penalty::Ridge { precision: 1.0 };
        assert!(matches!(
            pen.validate(&blocks),
            Err(FitError::InvalidPenalty { column: 1, .. })
        ));
        let pen = PenaltyMap::on_beta(&blocks, |_| Penalty::BarWeight {
            lambda: 1.0,
            previous: 0.0,
        });
        assert!(pen.validate(&blocks).is_err());
        let pen = PenaltyMap::on_beta(&blocks, |_| Penalty::Ridge { precision: 0.0 });
        assert!(pen.validate(&blocks).is_err());
    }

    #[test]
    fn excluded_columns_are_zeroed_from_warm_start() {
        let problem = single_beta(vec![1.0, 0.0, 1.0], vec![0.3, -1.0, 2.0]);
        let blocks = problem.design.blocks();
        let pen = PenaltyMap::on_beta(blocks, |_| Penalty::Excluded);
        let mut start = CoefficientBlocks::zeros(blocks);
        start.beta[0] = 4.0;
        let fit = ccd_fit(&problem, &pen, &CcdControls::default(), &start).unwrap();
        assert_eq!(fit.coefficients.beta[0], 0.0);
        assert_abs_diff_eq!(fit.coefficients.intercept, 2f64.ln(), epsilon = 1e-8);
    }
}
