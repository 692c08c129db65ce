//! Broken adaptive ridge (BAR) selection and estimation for generalized
//! partly linear models.
//!
//! The nonparametric part of the linear predictor is expanded in Bernstein
//! polynomials, which turns the model into an ordinary GLM over the
//! augmented design `(1 | W | B(Z) | X)`. Only the high-dimensional block
//! `X` is penalized. Fits are computed by cyclic coordinate descent with
//! clipped one-dimensional Newton steps.

pub mod bar;
pub mod baselines;
pub mod bernstein;
pub mod ccd;
pub mod design;
mod error;
pub mod family;
pub mod pipeline;
pub mod simulate;

pub use bar::{bar_fit, BarControls, FitResult, LambdaChoice};
pub use bernstein::{BasisError, BasisSpec};
pub use ccd::{ccd_fit, CcdControls, CcdFit, Penalty, PenaltyMap};
pub use design::{CoefficientBlocks, Dataset, Problem, SieveDesign};
pub use error::FitError;
pub use family::Family;
