//! Exponential families with canonical links and the per-coordinate
//! derivatives consumed by the coordinate-descent engine.
//!
//! Dispersion is fixed at one and the normaliser `c(y, phi)` is dropped, so
//! log-likelihoods are exact for the logistic model and omit `-log(y!)` for
//! Poisson.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Linear predictors above this are clipped when forming the Poisson mean.
pub const POISSON_ETA_CAP: f64 = 30.0;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum FamilyError {
    #[error("non-finite linear predictor {value} at row {row}")]
    NonFinite { row: usize, value: f64 },

    #[error("response {value} at row {row} is invalid for the {family} family")]
    InvalidResponse { row: usize, value: f64, family: Family },

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unknown family '{0}' (expected 'logistic' or 'poisson')")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Bernoulli response, logit link.
    Logistic,
    /// Count response, log link.
    Poisson,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        })
    }
}

impl FromStr for Family {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "binomial" | "logit" => Ok(Family::Logistic),
            "poisson" => Ok(Family::Poisson),
            other => Err(FamilyError::Unknown(other.to_string())),
        }
    }
}

impl Family {
    /// Inverse link. The logistic branch form never overflows.
    #[inline]
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Family::Logistic => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Family::Poisson => eta.min(POISSON_ETA_CAP).exp(),
        }
    }

    /// Mean and cumulant together, sharing one exponential.
    #[inline]
    pub fn mean_and_cumulant(self, eta: f64) -> (f64, f64) {
        match self {
            Family::Logistic => {
                let e = (-eta.abs()).exp();
                let mu = if eta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                (mu, eta.max(0.0) + e.ln_1p())
            }
            Family::Poisson => (eta.min(POISSON_ETA_CAP).exp(), eta.exp()),
        }
    }

    /// Cumulant function `b(eta)`.
    #[inline]
    pub fn cumulant(self, eta: f64) -> f64 {
        match self {
            Family::Logistic => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
            Family::Poisson => eta.exp(),
        }
    }

    /// `b''(eta)` expressed through the mean.
    #[inline]
    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Logistic => mu * (1.0 - mu),
            Family::Poisson => mu,
        }
    }

    /// Validates that `y` is a legal response for this family.
    pub fn check_response(self, y: &[f64]) -> Result<(), FamilyError> {
        for (row, &value) in y.iter().enumerate() {
            let ok = match self {
                Family::Logistic => value == 0.0 || value == 1.0,
                Family::Poisson => value >= 0.0 && value.fract() == 0.0 && value.is_finite(),
            };
            if !ok {
                return Err(FamilyError::InvalidResponse {
                    row,
                    value,
                    family: self,
                });
            }
        }
        Ok(())
    }

    /// Unit deviance contribution `2 [l(y; y) - l(mu; y)]`.
    pub fn unit_deviance(self, y: f64, eta: f64) -> f64 {
        match self {
            Family::Logistic => 2.0 * (self.cumulant(eta) - y * eta),
            Family::Poisson => {
                let mu = eta.exp();
                let sat = if y > 0.0 { y * y.ln() - y } else { 0.0 };
                2.0 * (sat - (y * eta - mu))
            }
        }
    }

    /// Number of linear predictors clipped when forming means (Poisson only).
    fn clipped(self, eta: f64) -> bool {
        matches!(self, Family::Poisson) && eta > POISSON_ETA_CAP
    }
}

/// Linear predictor, fitted means and response for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingState {
    family: Family,
    y: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    cumulant: Vec<f64>,
    clipped: usize,
}

/// Scratch buffers holding a tentative predictor update.
#[derive(Debug, Clone, Default)]
pub struct Proposal {
    eta: Vec<f64>,
    mu: Vec<f64>,
    cumulant: Vec<f64>,
    clipped: usize,
}

impl WorkingState {
    pub fn new(family: Family, y: Vec<f64>, eta: Vec<f64>) -> Result<Self, FamilyError> {
        if y.len() != eta.len() {
            return Err(FamilyError::Length {
                what: "linear predictor",
                expected: y.len(),
                found: eta.len(),
            });
        }
        check_finite(&eta)?;
        let mut state = Self {
            family,
            mu: vec![0.0; y.len()],
            cumulant: vec![0.0; y.len()],
            y,
            eta,
            clipped: 0,
        };
        state.refresh_means();
        Ok(state)
    }

    /// State with a zero linear predictor.
    pub fn zeros(family: Family, y: Vec<f64>) -> Self {
        let n = y.len();
        Self::new(family, y, vec![0.0; n]).expect("zero predictor is finite")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Count of mean evaluations where the Poisson predictor was clipped.
    pub fn clipped_count(&self) -> usize {
        self.clipped
    }

    /// Recomputes every mean from the current predictor.
    pub fn refresh_means(&mut self) {
        let fam = self.family;
        for ((m, b), &e) in self.mu.iter_mut().zip(self.cumulant.iter_mut()).zip(&self.eta) {
            if fam.clipped(e) {
                self.clipped += 1;
            }
            (*m, *b) = fam.mean_and_cumulant(e);
        }
    }

    /// Log-likelihood from the cached cumulants.
    pub fn cached_log_likelihood(&self) -> f64 {
        self.y
            .iter()
            .zip(&self.eta)
            .zip(&self.cumulant)
            .map(|((&y, &e), &b)| y * e - b)
            .sum()
    }

    /// Fills `out` with the state that adding `delta * column` would produce
    /// and returns the resulting change in log-likelihood. Non-finite
    /// predictors yield `-inf`.
    pub fn propose(&self, column: &[f64], delta: f64, out: &mut Proposal) -> f64 {
        let n = self.y.len();
        let fam = self.family;
        out.eta.clear();
        out.mu.clear();
        out.cumulant.clear();
        out.eta.extend_from_slice(&self.eta);
        out.mu.extend_from_slice(&self.mu);
        out.cumulant.extend_from_slice(&self.cumulant);
        out.clipped = 0;
        let mut change = 0.0;
        for (i, &c) in column[..n].iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let step = delta * c;
            let e = self.eta[i] + step;
            if !e.is_finite() {
                return f64::NEG_INFINITY;
            }
            if fam.clipped(e) {
                out.clipped += 1;
            }
            let (mu, b) = fam.mean_and_cumulant(e);
            change += self.y[i] * step - (b - self.cumulant[i]);
            out.eta[i] = e;
            out.mu[i] = mu;
            out.cumulant[i] = b;
        }
        change
    }

    /// Adopts a proposal produced by [`WorkingState::propose`] on this state.
    pub fn accept(&mut self, proposal: &mut Proposal) {
        std::mem::swap(&mut self.eta, &mut proposal.eta);
        std::mem::swap(&mut self.mu, &mut proposal.mu);
        std::mem::swap(&mut self.cumulant, &mut proposal.cumulant);
        self.clipped += proposal.clipped;
    }

    /// Change in log-likelihood if `delta * column` were added to the predictor.
    pub fn log_likelihood_change(&self, column: &[f64], delta: f64) -> f64 {
        let fam = self.family;
        let mut change = 0.0;
        for (((&c, &e), &y), &b) in column.iter().zip(&self.eta).zip(&self.y).zip(&self.cumulant) {
            if c != 0.0 {
                let step = delta * c;
                change += y * step - (fam.cumulant(e + step) - b);
            }
        }
        change
    }
}

fn check_finite(eta: &[f64]) -> Result<(), FamilyError> {
    match eta.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(FamilyError::NonFinite { row, value: eta[row] }),
        None => Ok(()),
    }
}

/// Log-likelihood up to a coefficient-free constant.
pub fn log_likelihood(family: Family, state: &WorkingState) -> Result<f64, FamilyError> {
    check_finite(&state.eta)?;
    Ok(state
        .y
        .iter()
        .zip(&state.eta)
        .map(|(&y, &e)| y * e - family.cumulant(e))
        .sum())
}

/// First and second derivatives of the negative log-likelihood along `column`.
#[inline]
pub fn coordinate_derivatives(family: Family, state: &WorkingState, column: &[f64]) -> (f64, f64) {
    let mut first = 0.0;
    let mut second = 0.0;
    for ((&c, &y), &mu) in column.iter().zip(&state.y).zip(&state.mu) {
        first -= c * (y - mu);
        second += c * c * family.variance(mu);
    }
    (first, second)
}

/// Adds `delta * column` to the linear predictor and refreshes the affected means.
pub fn update_state(state: &mut WorkingState, column: &[f64], delta: f64) -> Result<(), FamilyError> {
    if delta == 0.0 {
        return Ok(());
    }
    if !delta.is_finite() {
        return Err(FamilyError::NonFinite { row: 0, value: delta });
    }
    let fam = state.family;
    if let Some(row) = column
        .iter()
        .zip(&state.eta)
        .position(|(&c, &e)| !(e + delta * c).is_finite())
    {
        return Err(FamilyError::NonFinite {
            row,
            value: state.eta[row] + delta * column[row],
        });
    }
    for (i, &c) in column.iter().enumerate() {
        if c != 0.0 {
            let next = state.eta[i] + delta * c;
            state.eta[i] = next;
            if fam.clipped(next) {
                state.clipped += 1;
            }
            (state.mu[i], state.cumulant[i]) = fam.mean_and_cumulant(next);
        }
    }
    Ok(())
}
