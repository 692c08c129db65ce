//! Genotype-panel preprocessing and inference: minor-allele-frequency
//! filtering, univariate Wald screening and bootstrap standard errors.
//!
//! Missing genotypes are encoded as `NaN`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::ccd::{state_at, unpenalized_fit, CcdControls};
use crate::design::{CoefficientBlocks, Dataset, DesignError, Problem};
use crate::error::FitError;
use crate::family::Family;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PipelineError {
    #[error("genotype at row {row}, column {col} is {value}; expected 0, 1, 2 or missing")]
    InvalidGenotype { row: usize, col: usize, value: f64 },

    #[error("{0}")]
    Argument(String),

    #[error(transparent)]
    Design(#[from] DesignError),

    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MafReport {
    /// `min(f, 1 - f)` with `f` half the mean of the observed entries; `NaN`
    /// for columns with no observed entry.
    pub maf: Vec<f64>,
    /// Missing entries per column.
    pub missing: Vec<usize>,
    /// Columns with every entry missing; never retained.
    pub all_missing: Vec<usize>,
    pub retained: Vec<usize>,
    pub threshold: f64,
}

/// Keeps the columns of a 0/1/2 genotype matrix whose minor allele
/// frequency is at least `threshold`.
pub fn maf_filter(genotypes: ArrayView2<'_, f64>, threshold: f64) -> Result<MafReport, PipelineError> {
    if !(0.0..=0.5).contains(&threshold) {
        return Err(PipelineError::Argument(format!(
            "MAF threshold must lie in [0, 0.5], got {threshold}"
        )));
    }
    let mut maf = Vec::with_capacity(genotypes.ncols());
    let mut missing = Vec::with_capacity(genotypes.ncols());
    let mut all_missing = Vec::new();
    let mut retained = Vec::new();
    for (col, column) in genotypes.axis_iter(Axis(1)).enumerate() {
        let (mut sum, mut seen) = (0.0, 0usize);
        for (row, &v) in column.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            if v != 0.0 && v != 1.0 && v != 2.0 {
                return Err(PipelineError::InvalidGenotype { row, col, value: v });
            }
            sum += v;
            seen += 1;
        }
        missing.push(column.len() - seen);
        if seen == 0 {
            log::warn!("genotype column {col} has no observed values; excluded");
            all_missing.push(col);
            maf.push(f64::NAN);
            continue;
        }
        let f = sum / seen as f64 / 2.0;
        let m = f.min(1.0 - f);
        maf.push(m);
        if m >= threshold {
            retained.push(col);
        }
    }
    Ok(MafReport {
        maf,
        missing,
        all_missing,
        retained,
        threshold,
    })
}

/// Replaces `NaN` entries by their column mean and returns the number
/// replaced per column. Columns with no observed value are left untouched.
pub fn impute_column_means(x: &mut Array2<f64>) -> Vec<usize> {
    x.axis_iter_mut(Axis(1))
        .map(|mut col| {
            let observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            let count = col.len() - observed.len();
            if count > 0 && !observed.is_empty() {
                let mean = observed.iter().sum::<f64>() / observed.len() as f64;
                col.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = mean);
            }
            count
        })
        .collect()
}

/// Univariate fit of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenRow {
    pub column: usize,
    pub coefficient: f64,
    /// Model-based standard error; `NaN` when separated or constant.
    pub std_error: f64,
    pub p_value: f64,
    /// The fit diverged; the column is kept with `p = 0`.
    pub separated: bool,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenReport {
    pub rows: Vec<ScreenRow>,
    pub retained: Vec<usize>,
    pub threshold: f64,
}

/// Any fitted linear predictor beyond this magnitude counts as divergence.
const SEPARATION_ETA: f64 = 30.0;

fn screen_column(column: usize, x: &[f64], y: &[f64], family: Family, ccd: &CcdControls) -> Result<ScreenRow, PipelineError> {
    let n = x.len();
    let constant = x.iter().all(|v| *v == x[0]);
    if constant {
        return Ok(ScreenRow {
            column,
            coefficient: 0.0,
            std_error: f64::NAN,
            p_value: 1.0,
            separated: false,
            constant: true,
        });
    }
    let dataset = Dataset::new(
        y.to_vec(),
        Array2::from_shape_vec((n, 1), x.to_vec()).expect("column shape"),
        Array2::zeros((n, 0)),
        Array2::zeros((n, 0)),
    )?;
    let problem = Problem::from_dataset(&dataset, &[], family)?;
    let fit = unpenalized_fit(&problem, ccd)?;
    let theta = fit.coefficients.to_flat();
    let state = state_at(&problem, &theta)?;
    let diverged = !fit.converged || state.eta().iter().any(|e| e.abs() > SEPARATION_ETA);

    let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
    for (&xi, &mu) in x.iter().zip(state.mu()) {
        let v = family.variance(mu);
        s00 += v;
        s01 += v * xi;
        s11 += v * xi * xi;
    }
    let det = s00 * s11 - s01 * s01;
    let beta = fit.coefficients.beta[0];
    let se = (s00 / det).sqrt();
    if diverged || !(det > 0.0 && se.is_finite()) {
        return Ok(ScreenRow {
            column,
            coefficient: beta,
            std_error: f64::NAN,
            p_value: 0.0,
            separated: true,
            constant: false,
        });
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * normal.sf((beta / se).abs())).clamp(0.0, 1.0);
    Ok(ScreenRow {
        column,
        coefficient: beta,
        std_error: se,
        p_value,
        separated: false,
        constant: false,
    })
}

/// Fits `y ~ 1 + x_j` for every column of `x` and keeps the columns whose
/// Wald p-value is below `threshold`. Separated columns are kept.
pub fn univariate_screen(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    family: Family,
    threshold: f64,
    ccd: &CcdControls,
) -> Result<ScreenReport, PipelineError> {
    if x.nrows() != y.len() {
        return Err(PipelineError::Argument(format!(
            "genotype matrix has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(PipelineError::Argument(format!(
            "p-value threshold must lie in [0, 1], got {threshold}"
        )));
    }
    family.check_response(y).map_err(DesignError::from)?;
    let columns: Vec<Vec<f64>> = x.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let rows = columns
        .par_iter()
        .enumerate()
        .map(|(j, col)| screen_column(j, col, y, family, ccd))
        .collect::<Result<Vec<_>, _>>()?;
    // A threshold of 1 keeps every non-constant column, including p = 1.
    let retained = rows
        .iter()
        .filter(|r| !r.constant && (r.separated || r.p_value < threshold || threshold >= 1.0))
        .map(|r| r.column)
        .collect();
    Ok(ScreenReport {
        rows,
        retained,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    /// Sample standard deviation of every coefficient across successful resamples.
    pub std_errors: CoefficientBlocks,
    /// Fraction of successful resamples in which each `beta_j` is nonzero.
    pub selection_frequency: Vec<f64>,
    pub requested: usize,
    /// Resamples whose fit succeeded.
    pub effective: usize,
}

/// Row indices of `b` resamples drawn with replacement. Binary responses
/// are resampled within each class so every resample keeps the class counts.
pub fn bootstrap_indices(y: &[f64], family: Family, b: usize, seed: u64) -> Vec<Vec<usize>> {
    let groups: Vec<Vec<usize>> = match family {
        Family::Logistic => {
            let (ones, zeros): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| y[i] != 0.0);
            vec![zeros, ones]
        }
        Family::Poisson => vec![(0..y.len()).collect()],
    };
    (0..b)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut rows = Vec::with_capacity(y.len());
            for g in groups.iter().filter(|g| !g.is_empty()) {
                rows.extend((0..g.len()).map(|_| g[rng.random_range(0..g.len())]));
            }
            rows.sort_unstable();
            rows
        })
        .collect()
}

/// Bootstrap standard errors of `recipe` over `b` stratified resamples.
pub fn bootstrap_se<F>(problem: &Problem, b: usize, seed: u64, recipe: F) -> Result<BootstrapReport, PipelineError>
where
    F: Fn(&Problem) -> Result<CoefficientBlocks, FitError> + Sync,
{
    if b < 2 {
        return Err(PipelineError::Argument(format!("need at least 2 resamples, got {b}")));
    }
    let indices = bootstrap_indices(&problem.y, problem.family, b, seed);
    bootstrap_with_indices(problem, &indices, recipe)
}

/// Bootstrap over caller-supplied resamples (row index lists).
pub fn bootstrap_with_indices<F>(problem: &Problem, resamples: &[Vec<usize>], recipe: F) -> Result<BootstrapReport, PipelineError>
where
    F: Fn(&Problem) -> Result<CoefficientBlocks, FitError> + Sync,
{
    if resamples.len() < 2 {
        return Err(PipelineError::Argument(format!(
            "need at least 2 resamples, got {}",
            resamples.len()
        )));
    }
    if let Some(bad) = resamples.iter().flatten().find(|&&i| i >= problem.n()) {
        return Err(PipelineError::Argument(format!("resample row {bad} is out of range")));
    }
    let fits: Vec<Result<CoefficientBlocks, FitError>> =
        resamples.par_iter().map(|rows| recipe(&problem.select_rows(rows))).collect();
    let ok: Vec<Vec<f64>> = fits
        .iter()
        .enumerate()
        .filter_map(|(r, f)| match f {
            Ok(c) => Some(c.to_flat()),
            Err(e) => {
                log::warn!("bootstrap resample {r} failed: {e}");
                None
            }
        })
        .collect();
    let blocks = problem.design.blocks();
    let width = blocks.ncols();
    let k = ok.len();
    let mut sd = vec![f64::NAN; width];
    if k >= 2 {
        for (j, s) in sd.iter_mut().enumerate() {
            let mean = ok.iter().map(|t| t[j]).sum::<f64>() / k as f64;
            *s = (ok.iter().map(|t| (t[j] - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt();
        }
    }
    let selection_frequency = blocks
        .beta
        .clone()
        .map(|j| {
            if k == 0 {
                f64::NAN
            } else {
                ok.iter().filter(|t| t[j] != 0.0).count() as f64 / k as f64
            }
        })
        .collect();
    Ok(BootstrapReport {
        std_errors: CoefficientBlocks::from_flat(blocks, &sd)?,
        selection_frequency,
        requested: resamples.len(),
        effective: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn maf_examples() {
        let g = array![[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 2.0]];
        let r = maf_filter(g.view(), 0.1).unwrap();
        assert_eq!(r.maf[0], 0.0);
        assert_eq!(r.maf[1], 0.5);
        assert_abs_diff_eq!(r.maf[2], 0.375, epsilon = 1e-15);
        assert_eq!(r.retained, vec![1, 2]);
    }

    #[test]
    fn maf_rejects_bad_codes_and_flags_empty_columns() {
        let g = array![[0.0, 3.0]];
        assert!(matches!(
            maf_filter(g.view(), 0.1),
            Err(PipelineError::InvalidGenotype { row: 0, col: 1, .. })
        ));
        let g = array![[f64::NAN, 1.0], [f64::NAN, f64::NAN]];
        let r = maf_filter(g.view(), 0.1).unwrap();
        assert_eq!(r.all_missing, vec![0]);
        assert_eq!(r.missing, vec![2, 1]);
        assert_eq!(r.retained, vec![1]);
    }

    #[test]
    fn imputes_means() {
        let mut x = array![[0.0, f64::NAN], [2.0, 1.0], [f64::NAN, 2.0]];
        assert_eq!(impute_column_means(&mut x), vec![1, 1]);
        assert_eq!(x[[2, 0]], 1.0);
        assert_eq!(x[[0, 1]], 1.5);
    }

    #[test]
    fn constant_and_separated_columns() {
        let y = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let x = Array2::from_shape_fn((6, 3), |(i, j)| match j {
            0 => 1.0,
            1 => y[i],
            _ => i as f64,
        });
        let r = univariate_screen(x.view(), &y, Family::Logistic, 0.1, &CcdControls::default()).unwrap();
        assert!(r.rows[0].constant);
        assert_eq!(r.rows[0].p_value, 1.0);
        assert!(r.rows[1].separated);
        assert_eq!(r.rows[1].p_value, 0.0);
        assert!(r.retained.contains(&1));
        assert!(!r.retained.contains(&0));
        assert!(r.rows[2].p_value > 0.0 && r.rows[2].p_value <= 1.0);
    }

    #[test]
    fn stratified_resamples_keep_class_counts() {
        let y = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        for rows in bootstrap_indices(&y, Family::Logistic, 20, 9) {
            assert_eq!(rows.len(), y.len());
            assert_eq!(rows.iter().filter(|&&i| y[i] == 1.0).count(), 2);
        }
        assert_eq!(
            bootstrap_indices(&y, Family::Logistic, 3, 9),
            bootstrap_indices(&y, Family::Logistic, 3, 9)
        );
    }
}
