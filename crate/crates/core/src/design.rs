//! Datasets, the augmented design `(1 | W | B(Z) | X)` and coefficient blocks.

use ndarray::{Array2, Axis};
use thiserror::Error;

use crate::bernstein::{build_sieve_block, BasisError, BasisSpec, SieveBlock};
use crate::family::{Family, FamilyError};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DesignError {
    #[error("{block} block has {found} rows, response has {expected}")]
    RowMismatch {
        block: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {block} block at row {row}, column {col}")]
    NonFinite { block: &'static str, row: usize, col: usize },

    #[error("coefficient vector has {found} entries, design has {expected} columns")]
    CoefficientLength { expected: usize, found: usize },

    #[error(transparent)]
    Basis(#[from] BasisError),

    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Response plus the penalized (`x`), categorical (`w`) and continuous (`z`) blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Array2<f64>,
    pub w: Array2<f64>,
    pub z: Array2<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Array2<f64>, w: Array2<f64>, z: Array2<f64>) -> Result<Self, DesignError> {
        let n = y.len();
        for (block, m) in [("X", &x), ("W", &w), ("Z", &z)] {
            if m.nrows() != n {
                return Err(DesignError::RowMismatch {
                    block,
                    expected: n,
                    found: m.nrows(),
                });
            }
            if let Some(((row, col), _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(DesignError::NonFinite { block, row, col });
            }
        }
        Ok(Self { y, x, w, z })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Basis specs spanning the observed range of each continuous column.
    pub fn observed_specs(&self, degree: usize) -> Result<Vec<BasisSpec>, BasisError> {
        self.z
            .axis_iter(Axis(1))
            .map(|col| BasisSpec::from_observed(degree, col.iter().copied()))
            .collect()
    }
}

/// Column ranges of each coefficient block inside the augmented design.
///
/// Storage order is intercept, `alpha`, `gamma`, `beta`, which is also the
/// coordinate-descent sweep order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMap {
    pub alpha: std::ops::Range<usize>,
    pub gamma: std::ops::Range<usize>,
    pub beta: std::ops::Range<usize>,
}

impl BlockMap {
    pub const INTERCEPT: usize = 0;

    pub fn new(q_w: usize, sieve_cols: usize, p: usize) -> Self {
        let alpha = 1..1 + q_w;
        let gamma = alpha.end..alpha.end + sieve_cols;
        let beta = gamma.end..gamma.end + p;
        Self { alpha, gamma, beta }
    }

    pub fn ncols(&self) -> usize {
        self.beta.end
    }

    pub fn block_of(&self, col: usize) -> Block {
        if col == Self::INTERCEPT {
            Block::Intercept
        } else if self.alpha.contains(&col) {
            Block::Alpha
        } else if self.gamma.contains(&col) {
            Block::Gamma
        } else {
            Block::Beta
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Intercept,
    Alpha,
    Gamma,
    Beta,
}

impl Block {
    pub fn label(self) -> &'static str {
        match self {
            Block::Intercept => "intercept",
            Block::Alpha => "alpha",
            Block::Gamma => "gamma",
            Block::Beta => "beta",
        }
    }
}

/// Dense column-major augmented design.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveDesign {
    nrows: usize,
    data: Vec<f64>,
    blocks: BlockMap,
    specs: Vec<BasisSpec>,
}

impl SieveDesign {
    pub fn build(dataset: &Dataset, specs: &[BasisSpec]) -> Result<Self, DesignError> {
        let sieve = build_sieve_block(dataset.z.view(), specs)?;
        Ok(Self::assemble(&dataset.x, &dataset.w, &sieve))
    }

    pub fn assemble(x: &Array2<f64>, w: &Array2<f64>, sieve: &SieveBlock) -> Self {
        let n = x.nrows();
        let blocks = BlockMap::new(w.ncols(), sieve.ncols(), x.ncols());
        let mut data = Vec::with_capacity(n * blocks.ncols());
        data.extend(std::iter::repeat_n(1.0, n));
        for col in w.axis_iter(Axis(1)) {
            data.extend(col.iter().copied());
        }
        for c in 0..sieve.ncols() {
            data.extend_from_slice(sieve.column(c));
        }
        for col in x.axis_iter(Axis(1)) {
            data.extend(col.iter().copied());
        }
        Self {
            nrows: n,
            data,
            blocks,
            specs: sieve.specs().to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.blocks.ncols()
    }

    pub fn blocks(&self) -> &BlockMap {
        &self.blocks
    }

    pub fn specs(&self) -> &[BasisSpec] {
        &self.specs
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    /// Linear predictor `D theta` for a flat coefficient vector.
    pub fn linear_predictor(&self, theta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.nrows];
        for (j, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                for (e, &c) in eta.iter_mut().zip(self.column(j)) {
                    *e += t * c;
                }
            }
        }
        eta
    }

    /// Design restricted to `rows` (repeats allowed), keeping the basis specs.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * self.ncols());
        for j in 0..self.ncols() {
            let col = self.column(j);
            data.extend(rows.iter().map(|&i| col[i]));
        }
        Self {
            nrows: m,
            data,
            blocks: self.blocks.clone(),
            specs: self.specs.clone(),
        }
    }

    /// Design keeping only the listed `beta` columns (by index within the block).
    pub fn keep_beta(&self, keep: &[usize]) -> Self {
        let mut data = self.data[..self.blocks.beta.start * self.nrows].to_vec();
        for &k in keep {
            data.extend_from_slice(self.column(self.blocks.beta.start + k));
        }
        let blocks = BlockMap::new(self.blocks.alpha.len(), self.blocks.gamma.len(), keep.len());
        Self {
            nrows: self.nrows,
            data,
            blocks,
            specs: self.specs.clone(),
        }
    }
}

/// A fitting problem: design, response and family.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub design: SieveDesign,
    pub y: Vec<f64>,
    pub family: Family,
}

impl Problem {
    pub fn new(design: SieveDesign, y: Vec<f64>, family: Family) -> Result<Self, DesignError> {
        if design.nrows() != y.len() {
            return Err(DesignError::RowMismatch {
                block: "design",
                expected: y.len(),
                found: design.nrows(),
            });
        }
        family.check_response(&y)?;
        Ok(Self { design, y, family })
    }

    pub fn from_dataset(dataset: &Dataset, specs: &[BasisSpec], family: Family) -> Result<Self, DesignError> {
        Self::new(SieveDesign::build(dataset, specs)?, dataset.y.clone(), family)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            design: self.design.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            family: self.family,
        }
    }
}

/// Coefficients split by block.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBlocks {
    pub intercept: f64,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl CoefficientBlocks {
    pub fn zeros(blocks: &BlockMap) -> Self {
        Self {
            intercept: 0.0,
            alpha: vec![0.0; blocks.alpha.len()],
            gamma: vec![0.0; blocks.gamma.len()],
            beta: vec![0.0; blocks.beta.len()],
        }
    }

    pub fn from_flat(blocks: &BlockMap, theta: &[f64]) -> Result<Self, DesignError> {
        if theta.len() != blocks.ncols() {
            return Err(DesignError::CoefficientLength {
                expected: blocks.ncols(),
                found: theta.len(),
            });
        }
        Ok(Self {
            intercept: theta[BlockMap::INTERCEPT],
            alpha: theta[blocks.alpha.clone()].to_vec(),
            gamma: theta[blocks.gamma.clone()].to_vec(),
            beta: theta[blocks.beta.clone()].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + self.alpha.len() + self.gamma.len() + self.beta.len());
        out.push(self.intercept);
        out.extend_from_slice(&self.alpha);
        out.extend_from_slice(&self.gamma);
        out.extend_from_slice(&self.beta);
        out
    }

    pub fn fits(&self, blocks: &BlockMap) -> bool {
        self.alpha.len() == blocks.alpha.len() && self.gamma.len() == blocks.gamma.len() && self.beta.len() == blocks.beta.len()
    }

    /// Indices `j` with `beta_j != 0`.
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Sieve coefficients of component `j`.
    pub fn gamma_component<'a>(&'a self, specs: &[BasisSpec], j: usize) -> &'a [f64] {
        let start: usize = specs[..j].iter().map(|s| s.degree()).sum();
        &self.gamma[start..start + specs[j].degree()]
    }
}
