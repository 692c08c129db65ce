//! Bernstein polynomial bases and the sieve block of the augmented design.
//!
//! Each continuous covariate `z_j` on `[lower, upper]` is expanded into the
//! degree-`m` Bernstein basis. The `k = 0` basis is dropped for every
//! component: the bases sum to one, so keeping all of them would confound
//! the constant directions of different components with the intercept.

use ndarray::ArrayView2;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BasisError {
    #[error("basis degree must be at least 1, got {0}")]
    InvalidDegree(usize),

    #[error("basis range is invalid: lower ({lower}) must be strictly below upper ({upper})")]
    InvalidRange { lower: f64, upper: f64 },

    #[error("basis index {k} is outside 0..={degree}")]
    IndexOutOfRange { k: usize, degree: usize },

    #[error("value {value} of component {component} lies outside [{lower}, {upper}]{}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    OutOfDomain {
        component: usize,
        row: Option<usize>,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("expected {expected} basis specs for {expected} continuous columns, got {found}")]
    SpecCount { expected: usize, found: usize },

    #[error("coefficient vector has length {found}, basis degree requires {expected}")]
    CoefficientLength { expected: usize, found: usize },
}

/// Degree and support interval of one component's Bernstein basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    degree: usize,
    lower: f64,
    upper: f64,
}

impl BasisSpec {
    pub fn new(degree: usize, lower: f64, upper: f64) -> Result<Self, BasisError> {
        if degree == 0 {
            return Err(BasisError::InvalidDegree(degree));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(BasisError::InvalidRange { lower, upper });
        }
        Ok(Self { degree, lower, upper })
    }

    /// Spec spanning the observed range of `values`.
    pub fn from_observed(degree: usize, values: impl IntoIterator<Item = f64>) -> Result<Self, BasisError> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self::new(degree, lo, hi)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.lower && z <= self.upper
    }

    fn check(&self, z: f64, component: usize, row: Option<usize>) -> Result<f64, BasisError> {
        if !self.contains(z) {
            return Err(BasisError::OutOfDomain {
                component,
                row,
                value: z,
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(((z - self.lower) / (self.upper - self.lower)).clamp(0.0, 1.0))
    }

    /// All `degree + 1` basis values at rescaled position `t`.
    fn values_at(&self, t: f64, out: &mut [f64]) {
        let m = self.degree;
        for (k, slot) in out.iter_mut().enumerate().take(m + 1) {
            *slot = binomial(m, k) * t.powi(k as i32) * (1.0 - t).powi((m - k) as i32);
        }
    }
}

/// `C(m, k)` by multiplicative recurrence in floating point.
pub fn binomial(m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    let k = k.min(m - k);
    (1..=k).fold(1.0, |acc, i| acc * (m - k + i) as f64 / i as f64)
}

/// Value of the `k`-th degree-`m` Bernstein basis at `z`.
pub fn bernstein_basis(z: f64, k: usize, spec: &BasisSpec) -> Result<f64, BasisError> {
    if k > spec.degree {
        return Err(BasisError::IndexOutOfRange { k, degree: spec.degree });
    }
    let t = spec.check(z, 0, None)?;
    let m = spec.degree;
    Ok(binomial(m, k) * t.powi(k as i32) * (1.0 - t).powi((m - k) as i32))
}

/// Sieve columns for all continuous covariates, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveBlock {
    specs: Vec<BasisSpec>,
    nrows: usize,
    data: Vec<f64>,
    component_of: Vec<usize>,
}

impl SieveBlock {
    pub fn specs(&self) -> &[BasisSpec] {
        &self.specs
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.component_of.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.nrows..(c + 1) * self.nrows]
    }

    /// Component owning sieve column `c`.
    pub fn component_of(&self, c: usize) -> usize {
        self.component_of[c]
    }

    /// Column range (within the block) belonging to component `j`.
    pub fn component_columns(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.specs[..j].iter().map(|s| s.degree).sum();
        start..start + self.specs[j].degree
    }
}

/// Total retained sieve columns for `specs`.
pub fn sieve_width(specs: &[BasisSpec]) -> usize {
    specs.iter().map(|s| s.degree).sum()
}

/// Expands every column of `z` into its retained Bernstein bases `k = 1..=m_j`.
pub fn build_sieve_block(z: ArrayView2<'_, f64>, specs: &[BasisSpec]) -> Result<SieveBlock, BasisError> {
    let (n, qz) = z.dim();
    if specs.len() != qz {
        return Err(BasisError::SpecCount {
            expected: qz,
            found: specs.len(),
        });
    }
    let width = sieve_width(specs);
    let mut data = vec![0.0; n * width];
    let mut component_of = Vec::with_capacity(width);
    let mut col0 = 0;
    let mut scratch = Vec::new();
    for (j, spec) in specs.iter().enumerate() {
        let m = spec.degree;
        scratch.resize(m + 1, 0.0);
        for i in 0..n {
            let t = spec.check(z[[i, j]], j, Some(i))?;
            spec.values_at(t, &mut scratch);
            for k in 1..=m {
                data[(col0 + k - 1) * n + i] = scratch[k];
            }
        }
        component_of.extend(std::iter::repeat_n(j, m));
        col0 += m;
    }
    Ok(SieveBlock {
        specs: specs.to_vec(),
        nrows: n,
        data,
        component_of,
    })
}

fn raw_psi(gamma: &[f64], spec: &BasisSpec, t: f64, scratch: &mut [f64]) -> f64 {
    spec.values_at(t, scratch);
    gamma.iter().zip(&scratch[1..]).map(|(g, b)| g * b).sum()
}

/// Fitted component curve at `grid`, shifted so it vanishes at the domain midpoint.
pub fn evaluate_psi(gamma: &[f64], spec: &BasisSpec, grid: &[f64]) -> Result<Vec<f64>, BasisError> {
    if gamma.len() != spec.degree {
        return Err(BasisError::CoefficientLength {
            expected: spec.degree,
            found: gamma.len(),
        });
    }
    let mut scratch = vec![0.0; spec.degree + 1];
    let centre = raw_psi(gamma, spec, 0.5, &mut scratch);
    grid.iter()
        .map(|&z| {
            let t = spec.check(z, 0, None)?;
            Ok(raw_psi(gamma, spec, t, &mut scratch) - centre)
        })
        .collect()
}

/// `count` equally spaced points covering `[lower, upper]`.
pub fn uniform_grid(spec: &BasisSpec, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![spec.midpoint()],
        _ => {
            let step = (spec.upper - spec.lower) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        spec.upper
                    } else {
                        spec.lower + step * i as f64
                    }
                })
                .collect()
        }
    }
}
