//! Simulation scenarios for the logistic and Poisson partly linear models,
//! selection metrics and multi-method replication studies.
//!
//! Every replication draws from its own ChaCha8 generators, one stream per
//! variable block, so a replication's data depend only on
//! `(base_seed, replication)` and never on which methods are fitted or on
//! the thread count.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::bar::{bar_fit_from_start, ridge_start, BarControls, Criterion, LambdaChoice};
use crate::baselines::{adaptive_weights, cross_validate_and_fit, CvMethod, CvSpec};
use crate::bernstein::{evaluate_psi, sieve_width, uniform_grid, BasisError, BasisSpec};
use crate::ccd::{unpenalized_fit, CcdControls, CcdFit};
use crate::design::{CoefficientBlocks, Dataset, DesignError, Problem};
use crate::error::FitError;
use crate::family::Family;

/// Names accepted by [`ScenarioConfig::preset`].
pub const PRESETS: [&str; 3] = ["s1", "s2", "s4"];

const STREAM_X: u64 = 0;
const STREAM_W: u64 = 1;
const STREAM_Z: u64 = 2;
const STREAM_Y: u64 = 3;
const STREAM_CV: u64 = 4;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown scenario preset '{name}' (valid: {})", PRESETS.join(", "))]
    UnknownPreset { name: String },

    #[error("unknown function '{0}' (valid: psi1, psi2, psi3, psi4, psi4p)")]
    UnknownPsi(String),

    #[error("unknown method '{0}' (valid: bar-aic, bar-bic, lasso, alasso, oracle)")]
    UnknownMethod(String),

    #[error("{name} is defined on [{lower}, {upper}], got z = {z}")]
    OutOfDomain {
        name: &'static str,
        z: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid scenario: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },

    #[error("{0}")]
    Argument(String),

    #[error(transparent)]
    Design(#[from] DesignError),

    #[error(transparent)]
    Basis(#[from] BasisError),

    #[error(transparent)]
    Fit(#[from] FitError),
}

/// True nonlinear effects used by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PsiFunction {
    /// `0.1 (z - 3)^2` on (1, 5).
    Psi1,
    /// `0.2 (cos(2 pi z) + 1)` on (0, 1).
    Psi2,
    /// `0.2 sin(2 pi z)` on (0, 1).
    Psi3,
    /// `0.2 (z + 1)^3` on (-3, 1).
    Psi4,
    /// `0.1 (z + 1)^3` on (-3, 1), the Poisson variant.
    Psi4Poisson,
}

impl PsiFunction {
    pub const ALL: [PsiFunction; 5] = [
        PsiFunction::Psi1,
        PsiFunction::Psi2,
        PsiFunction::Psi3,
        PsiFunction::Psi4,
        PsiFunction::Psi4Poisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PsiFunction::Psi1 => "psi1",
            PsiFunction::Psi2 => "psi2",
            PsiFunction::Psi3 => "psi3",
            PsiFunction::Psi4 => "psi4",
            PsiFunction::Psi4Poisson => "psi4p",
        }
    }

    pub fn domain(self) -> (f64, f64) {
        match self {
            PsiFunction::Psi1 => (1.0, 5.0),
            PsiFunction::Psi2 | PsiFunction::Psi3 => (0.0, 1.0),
            PsiFunction::Psi4 | PsiFunction::Psi4Poisson => (-3.0, 1.0),
        }
    }

    /// Value at `z`, without a domain check.
    pub fn value(self, z: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            PsiFunction::Psi1 => 0.1 * (z - 3.0).powi(2),
            PsiFunction::Psi2 => 0.2 * ((2.0 * PI * z).cos() + 1.0),
            PsiFunction::Psi3 => 0.2 * (2.0 * PI * z).sin(),
            PsiFunction::Psi4 => 0.2 * (z + 1.0).powi(3),
            PsiFunction::Psi4Poisson => 0.1 * (z + 1.0).powi(3),
        }
    }

    /// Basis spec of the given degree over the function's domain.
    pub fn basis_spec(self, degree: usize) -> Result<BasisSpec, BasisError> {
        let (lo, hi) = self.domain();
        BasisSpec::new(degree, lo, hi)
    }
}

impl fmt::Display for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PsiFunction {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        PsiFunction::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| SimError::UnknownPsi(s.to_string()))
    }
}

/// Value of the named function at `z`, which must lie in its closed domain.
pub fn psi_true(name: &str, z: f64) -> Result<f64, SimError> {
    let f: PsiFunction = name.parse()?;
    let (lower, upper) = f.domain();
    if !(z >= lower && z <= upper) {
        return Err(SimError::OutOfDomain {
            name: f.name(),
            z,
            lower,
            upper,
        });
    }
    Ok(f.value(z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// AR(1) correlation of the columns of `X`.
    pub rho: f64,
    pub beta0: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub psi: Vec<PsiFunction>,
    pub family: Family,
    pub replications: usize,
    pub base_seed: u64,
    /// Bernstein degree used when fitting every component.
    pub degree: usize,
}

/// `head` at the start of a length-`p` vector, `tail` at its end, zeros between.
fn sparse_signal(p: usize, head: &[f64], tail: &[f64]) -> Result<Vec<f64>, SimError> {
    if p < head.len() + tail.len() {
        return Err(SimError::InvalidConfig(format!(
            "p = {p} is smaller than the {} nonzero coefficients",
            head.len() + tail.len()
        )));
    }
    let mut beta = vec![0.0; p];
    beta[..head.len()].copy_from_slice(head);
    beta[p - tail.len()..].copy_from_slice(tail);
    Ok(beta)
}

impl ScenarioConfig {
    /// Preset scenario with `n` rows and `p` penalized columns. Uses 50
    /// replications and seed 1 until overridden.
    pub fn preset(name: &str, n: usize, p: usize) -> Result<Self, SimError> {
        use PsiFunction::*;
        let (beta0, alpha0, psi, family) = match name.trim().to_ascii_lowercase().as_str() {
            "s1" => (
                sparse_signal(p, &[1.0, -1.0], &[-1.0, 0.75, 0.75])?,
                vec![1.0, -0.5, -0.5, 0.75, -1.0],
                vec![Psi1, Psi2, Psi3, Psi4],
                Family::Logistic,
            ),
            "s2" => (
                sparse_signal(p, &[1.0, -0.5], &[-1.0, 0.4, 0.75])?,
                vec![1.0, -0.5, -0.5, 0.75, -1.0],
                vec![Psi1, Psi2, Psi3, Psi4],
                Family::Logistic,
            ),
            "s4" => (
                sparse_signal(p, &[1.0, -0.75], &[-1.0, 0.75, -0.75])?,
                vec![0.75, -0.5, -0.5, 0.75, -1.0],
                vec![Psi1, Psi2, Psi3, Psi4Poisson],
                Family::Poisson,
            ),
            _ => return Err(SimError::UnknownPreset { name: name.to_string() }),
        };
        let config = Self {
            name: name.trim().to_ascii_lowercase(),
            n,
            p,
            rho: 0.25,
            beta0,
            alpha0,
            psi,
            family,
            replications: 50,
            base_seed: 1,
            degree: 3,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n == 0 || self.p == 0 {
            return fail(format!("n and p must be positive, got n = {}, p = {}", self.n, self.p));
        }
        if self.rho.is_nan() || self.rho.abs() >= 1.0 {
            return fail(format!("|rho| must be below 1, got {}", self.rho));
        }
        if self.beta0.len() != self.p {
            return fail(format!("beta0 has {} entries, p = {}", self.beta0.len(), self.p));
        }
        if self.replications == 0 {
            return fail("at least one replication is required".into());
        }
        if self.degree == 0 {
            return fail("basis degree must be at least 1".into());
        }
        if self.beta0.iter().chain(&self.alpha0).any(|v| !v.is_finite()) {
            return fail("true coefficients must be finite".into());
        }
        Ok(())
    }

    /// Indices of the nonzero entries of `beta0`.
    pub fn true_support(&self) -> Vec<usize> {
        self.beta0
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Number of nonzero entries of `beta0`.
    pub fn q(&self) -> usize {
        self.true_support().len()
    }

    /// Fitting basis of every component, spanning its generating domain.
    pub fn basis_specs(&self) -> Result<Vec<BasisSpec>, SimError> {
        Ok(self.psi.iter().map(|f| f.basis_spec(self.degree)).collect::<Result<_, _>>()?)
    }

    pub fn covariance(&self) -> Array2<f64> {
        ar1_covariance(self.p, self.rho)
    }
}

/// `Sigma_ij = rho^|i - j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((p, p), |(i, j)| rho.powi(i.abs_diff(j) as i32))
}

/// Generator for one variable block of one replication.
pub fn substream(base_seed: u64, replication: u64, block: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&replication.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(block);
    rng
}

/// Draws replication `replication` of the scenario.
///
/// Rows of `X` follow the AR(1) recursion
/// `x_0 = e_0, x_j = rho x_{j-1} + sqrt(1 - rho^2) e_j`, which is the
/// lower-triangular Cholesky factor of `Sigma` applied to iid normals in
/// column order.
pub fn generate_scenario(config: &ScenarioConfig, replication: usize) -> Result<Dataset, SimError> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let rep = replication as u64;

    let mut rng = substream(config.base_seed, rep, STREAM_X);
    let scale = (1.0 - config.rho * config.rho).sqrt();
    let mut x = Array2::zeros((n, p));
    for mut row in x.rows_mut() {
        let mut prev = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            prev = if j == 0 { e } else { config.rho * prev + scale * e };
            *v = prev;
        }
    }

    let mut rng = substream(config.base_seed, rep, STREAM_W);
    let q_w = config.alpha0.len();
    let w = Array2::from_shape_simple_fn((n, q_w), || if rng.random_bool(0.5) { 1.0 } else { 0.0 });

    let mut rng = substream(config.base_seed, rep, STREAM_Z);
    let q_z = config.psi.len();
    let mut z = Array2::zeros((n, q_z));
    for mut row in z.rows_mut() {
        for (v, f) in row.iter_mut().zip(&config.psi) {
            let (lo, hi) = f.domain();
            *v = lo + (hi - lo) * rng.random::<f64>();
        }
    }

    let mut rng = substream(config.base_seed, rep, STREAM_Y);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut eta: f64 = x.row(i).iter().zip(&config.beta0).map(|(a, b)| a * b).sum();
        eta += w.row(i).iter().zip(&config.alpha0).map(|(a, b)| a * b).sum::<f64>();
        eta += z.row(i).iter().zip(&config.psi).map(|(v, f)| f.value(*v)).sum::<f64>();
        let draw = match config.family {
            Family::Logistic => {
                if rng.random::<f64>() < config.family.mean(eta) {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Poisson => {
                let dist = Poisson::new(eta.exp())
                    .map_err(|e| SimError::InvalidConfig(format!("Poisson rate exp({eta}) at row {i}: {e}")))?;
                dist.sample(&mut rng)
            }
        };
        y.push(draw);
    }
    Ok(Dataset::new(y, x, w, z)?)
}

/// Selection and estimation metrics of one fitted `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub tp: usize,
    pub fp: usize,
    /// Model size, `tp + fp`.
    pub ms: usize,
    /// Missed signals plus false signals.
    pub mc: usize,
    /// Exact support recovery.
    pub tm: bool,
    /// `(beta_hat - beta0)' Sigma (beta_hat - beta0)`.
    pub mse: f64,
}

pub fn evaluate_selection(beta_hat: &[f64], beta0: &[f64], sigma: ArrayView2<'_, f64>) -> Result<SelectionMetrics, SimError> {
    let p = beta0.len();
    if beta_hat.len() != p {
        return Err(SimError::Length {
            expected: p,
            found: beta_hat.len(),
        });
    }
    if sigma.dim() != (p, p) {
        return Err(SimError::Length {
            expected: p,
            found: sigma.nrows(),
        });
    }
    let q = beta0.iter().filter(|b| **b != 0.0).count();
    let tp = beta_hat.iter().zip(beta0).filter(|(h, t)| **h != 0.0 && **t != 0.0).count();
    let fp = beta_hat.iter().zip(beta0).filter(|(h, t)| **h != 0.0 && **t == 0.0).count();
    let mc = (q - tp) + fp;
    let d: Vec<f64> = beta_hat.iter().zip(beta0).map(|(h, t)| h - t).collect();
    let nonzero: Vec<usize> = (0..p).filter(|&j| d[j] != 0.0).collect();
    let mut mse = 0.0;
    for &i in &nonzero {
        for &j in &nonzero {
            mse += d[i] * sigma[[i, j]] * d[j];
        }
    }
    Ok(SelectionMetrics {
        tp,
        fp,
        ms: tp + fp,
        mc,
        tm: mc == 0,
        mse,
    })
}

/// Estimators compared in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    BarAic,
    BarBic,
    Lasso,
    AdaptiveLasso,
    /// Unpenalized refit on the true support.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::BarAic,
        Method::BarBic,
        Method::Lasso,
        Method::AdaptiveLasso,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BarAic => "bar-aic",
            Method::BarBic => "bar-bic",
            Method::Lasso => "lasso",
            Method::AdaptiveLasso => "alasso",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| SimError::UnknownMethod(s.to_string()))
    }
}

/// Solver settings shared by every replication.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub ccd: CcdControls,
    /// BAR controls; `lambda` is overridden per method.
    pub bar: BarControls,
    pub cv_folds: usize,
    pub cv_grid_len: usize,
    pub cv_min_ratio: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            ccd: CcdControls::default(),
            bar: BarControls::default(),
            cv_folds: 10,
            cv_grid_len: 100,
            cv_min_ratio: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodFit {
    pub coefficients: CoefficientBlocks,
    pub metrics: SelectionMetrics,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// One entry per requested method, in request order; `Err` holds the failure message.
    pub fits: Vec<Result<MethodFit, String>>,
}

/// Mean, bias and spread of one true coefficient across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub method: Method,
    /// Median of the per-replication MSE.
    pub mmse: f64,
    /// Standard deviation of the per-replication MSE.
    pub mmse_sd: f64,
    pub tp: f64,
    pub fp: f64,
    pub ms: f64,
    pub mc: f64,
    /// Fraction of replications recovering the exact support.
    pub tm: f64,
    /// Replications whose fit succeeded.
    pub r_effective: usize,
    pub failures: usize,
    /// Successful fits whose solver did not meet its tolerance.
    pub nonconverged: usize,
    /// Nonzero `beta0` entries and every `alpha0` entry.
    pub bias: Vec<BiasRow>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    if s.len() % 2 == 1 {
        s[k]
    } else {
        0.5 * (s[k - 1] + s[k])
    }
}

/// Aggregates the successful fits of one method.
pub fn summarize(method: Method, fits: &[&MethodFit], failures: usize, config: &ScenarioConfig) -> MetricsSummary {
    let col = |f: &dyn Fn(&MethodFit) -> f64| fits.iter().map(|m| f(m)).collect::<Vec<f64>>();
    let mse = col(&|m| m.metrics.mse);
    let mut bias = Vec::new();
    let mut push = |parameter: String, truth: f64, values: Vec<f64>| {
        let m = mean(&values);
        bias.push(BiasRow {
            parameter,
            truth,
            mean: m,
            bias: m - truth,
            sd: sample_sd(&values),
        });
    };
    for j in config.true_support() {
        push(format!("beta[{j}]"), config.beta0[j], col(&|m| m.coefficients.beta[j]));
    }
    for (j, &a) in config.alpha0.iter().enumerate() {
        push(format!("alpha[{j}]"), a, col(&|m| m.coefficients.alpha[j]));
    }
    MetricsSummary {
        method,
        mmse: median(&mse),
        mmse_sd: sample_sd(&mse),
        tp: mean(&col(&|m| m.metrics.tp as f64)),
        fp: mean(&col(&|m| m.metrics.fp as f64)),
        ms: mean(&col(&|m| m.metrics.ms as f64)),
        mc: mean(&col(&|m| m.metrics.mc as f64)),
        tm: mean(&col(&|m| if m.metrics.tm { 1.0 } else { 0.0 })),
        r_effective: fits.len(),
        failures,
        nonconverged: fits.iter().filter(|m| !m.converged).count(),
        bias,
    }
}

/// A fitted coefficient set together with the bases it was fitted on.
#[derive(Debug, Clone, Copy)]
pub struct CurveFit<'a> {
    pub specs: &'a [BasisSpec],
    pub coefficients: &'a CoefficientBlocks,
}

/// Pointwise mean of the fitted curves of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedCurve {
    pub component: usize,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Pointwise average of the fitted `psi_j` over `fits` on a uniform grid of
/// `grid_points` per component.
pub fn estimate_curves(fits: &[CurveFit<'_>], grid_points: usize) -> Result<Vec<AveragedCurve>, SimError> {
    let Some(first) = fits.first() else {
        return Err(SimError::Argument("no fits to average".into()));
    };
    let specs = first.specs;
    for f in fits {
        if f.specs != specs {
            return Err(SimError::Argument("fits use different basis specs".into()));
        }
        if f.coefficients.gamma.len() != sieve_width(specs) {
            return Err(SimError::Length {
                expected: sieve_width(specs),
                found: f.coefficients.gamma.len(),
            });
        }
    }
    specs
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let grid = uniform_grid(spec, grid_points);
            let mut total = vec![0.0; grid.len()];
            for f in fits {
                let curve = evaluate_psi(f.coefficients.gamma_component(specs, j), spec, &grid)?;
                total.iter_mut().zip(curve).for_each(|(t, c)| *t += c);
            }
            let k = fits.len() as f64;
            Ok(AveragedCurve {
                component: j,
                grid,
                mean: total.into_iter().map(|t| t / k).collect(),
            })
        })
        .collect()
}

/// Outcome of [`run_replications`].
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub config: ScenarioConfig,
    pub methods: Vec<Method>,
    pub specs: Vec<BasisSpec>,
    pub records: Vec<ReplicationRecord>,
    /// One summary per method, in request order.
    pub summaries: Vec<MetricsSummary>,
}

impl Study {
    /// Averaged fitted curves of `method` over its successful replications.
    pub fn mean_curves(&self, method: Method, grid_points: usize) -> Result<Vec<AveragedCurve>, SimError> {
        let k = self
            .methods
            .iter()
            .position(|m| *m == method)
            .ok_or_else(|| SimError::Argument(format!("method {method} was not run")))?;
        let fits: Vec<CurveFit<'_>> = self
            .records
            .iter()
            .filter_map(|r| r.fits[k].as_ref().ok())
            .map(|f| CurveFit {
                specs: &self.specs,
                coefficients: &f.coefficients,
            })
            .collect();
        estimate_curves(&fits, grid_points)
    }
}

/// Seed for the cross-validation folds of one replication.
pub fn cv_seed(base_seed: u64, replication: usize) -> u64 {
    substream(base_seed, replication as u64, STREAM_CV).next_u64()
}

fn method_fit(
    coefficients: CoefficientBlocks,
    converged: bool,
    config: &ScenarioConfig,
    sigma: &Array2<f64>,
) -> Result<MethodFit, String> {
    let metrics = evaluate_selection(&coefficients.beta, &config.beta0, sigma.view()).map_err(|e| e.to_string())?;
    Ok(MethodFit {
        coefficients,
        metrics,
        converged,
    })
}

fn oracle_fit(problem: &Problem, config: &ScenarioConfig, ccd: &CcdControls) -> Result<(CoefficientBlocks, bool), FitError> {
    let support = config.true_support();
    let reduced = Problem::new(problem.design.keep_beta(&support), problem.y.clone(), problem.family)?;
    let fit = unpenalized_fit(&reduced, ccd)?;
    let mut coefficients = fit.coefficients;
    let mut beta = vec![0.0; config.p];
    for (k, &j) in support.iter().enumerate() {
        beta[j] = coefficients.beta[k];
    }
    coefficients.beta = beta;
    Ok((coefficients, fit.converged))
}

/// Fits every method on one simulated dataset. The ridge start is shared
/// by both BAR variants and the adaptive-LASSO pilot.
pub fn fit_replication(
    config: &ScenarioConfig,
    replication: usize,
    dataset: &Dataset,
    specs: &[BasisSpec],
    methods: &[Method],
    options: &StudyOptions,
    sigma: &Array2<f64>,
) -> Vec<Result<MethodFit, String>> {
    let problem = match Problem::from_dataset(dataset, specs, config.family) {
        Ok(p) => p,
        Err(e) => return methods.iter().map(|_| Err(e.to_string())).collect(),
    };
    let needs_ridge = methods
        .iter()
        .any(|m| matches!(m, Method::BarAic | Method::BarBic | Method::AdaptiveLasso));
    let ridge: Option<Result<CcdFit, FitError>> = needs_ridge.then(|| ridge_start(&problem, options.bar.xi, &options.ccd));
    let ridge = || ridge.clone().expect("ridge start computed when needed");
    let cv_spec = || CvSpec {
        grid_len: options.cv_grid_len,
        min_ratio: options.cv_min_ratio,
        ..CvSpec::new(options.cv_folds, cv_seed(config.base_seed, replication))
    };

    methods
        .iter()
        .map(|&method| {
            let (coefficients, converged) = match method {
                Method::BarAic | Method::BarBic => {
                    let criterion = if method == Method::BarAic {
                        Criterion::Aic
                    } else {
                        Criterion::Bic
                    };
                    let controls = BarControls {
                        lambda: LambdaChoice::Criterion(criterion),
                        ..options.bar.clone()
                    };
                    let fit = ridge()
                        .and_then(|start| bar_fit_from_start(&problem, &controls, &options.ccd, start))
                        .map_err(|e| e.to_string())?;
                    (fit.coefficients, fit.converged)
                }
                Method::Lasso => {
                    let (_, fit) = cross_validate_and_fit(&problem, &CvMethod::Lasso, &cv_spec(), &options.ccd)
                        .map_err(|e| e.to_string())?;
                    (fit.coefficients, fit.converged)
                }
                Method::AdaptiveLasso => {
                    let weights = adaptive_weights(&ridge().map_err(|e| e.to_string())?.coefficients);
                    let (_, fit) =
                        cross_validate_and_fit(&problem, &CvMethod::AdaptiveLasso { weights }, &cv_spec(), &options.ccd)
                            .map_err(|e| e.to_string())?;
                    (fit.coefficients, fit.converged)
                }
                Method::Oracle => oracle_fit(&problem, config, &options.ccd).map_err(|e| e.to_string())?,
            };
            method_fit(coefficients, converged, config, sigma)
        })
        .collect()
}

/// Generates, fits and evaluates `config.replications` replications in
/// parallel; results are kept in replication order.
pub fn run_replications(config: &ScenarioConfig, methods: &[Method], options: &StudyOptions) -> Result<Study, SimError> {
    config.validate()?;
    if methods.is_empty() {
        return Err(SimError::Argument("no methods requested".into()));
    }
    let specs = config.basis_specs()?;
    let sigma = config.covariance();
    let records = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let dataset = generate_scenario(config, r)?;
            let fits = fit_replication(config, r, &dataset, &specs, methods, options, &sigma);
            for (m, f) in methods.iter().zip(&fits) {
                if let Err(e) = f {
                    log::warn!("replication {r}, {m}: {e}");
                }
            }
            Ok(ReplicationRecord { replication: r, fits })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let ok: Vec<&MethodFit> = records.iter().filter_map(|r| r.fits[k].as_ref().ok()).collect();
            summarize(method, &ok, records.len() - ok.len(), config)
        })
        .collect();
    Ok(Study {
        config: config.clone(),
        methods: methods.to_vec(),
        specs,
        records,
        summaries,
    })
}
