//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use gplm_bar::bar::{BarControls, EarlyStop};
use gplm_bar::ccd::CcdControls;
use gplm_bar::{Family, LambdaChoice};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; not part of the manifest hash.
    pub threads: Option<usize>,
    /// Output directory; not part of the manifest hash.
    pub output: Option<PathBuf>,
    pub data: DataConfig,
    pub fit: FitConfig,
    pub simulate: SimulateConfig,
    pub path: PathConfig,
    pub screen: ScreenConfig,
    pub bootstrap: BootstrapConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: None,
            output: None,
            data: DataConfig::default(),
            fit: FitConfig::default(),
            simulate: SimulateConfig::default(),
            path: PathConfig::default(),
            screen: ScreenConfig::default(),
            bootstrap: BootstrapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub input: Option<PathBuf>,
    pub delimiter: char,
    pub response: Option<String>,
    pub family: String,
    /// Sample-id column, carried but never modelled.
    pub id: Option<String>,
    /// Unpenalized linear covariates.
    pub categorical: Vec<String>,
    /// Covariates entering through a Bernstein sieve.
    pub continuous: Vec<ContinuousColumn>,
    /// Penalized columns; every column not otherwise assigned when absent.
    pub penalized: Option<Vec<String>>,
    /// Columns ignored entirely.
    pub exclude: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input: None,
            delimiter: ',',
            response: None,
            family: "logistic".into(),
            id: None,
            categorical: Vec::new(),
            continuous: Vec::new(),
            penalized: None,
            exclude: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousColumn {
    pub name: String,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Basis range; the observed range is used when either end is absent.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

fn default_degree() -> usize {
    3
}

impl std::str::FromStr for ContinuousColumn {
    type Err = String;

    /// `name`, `name:degree` or `name:degree:lower:upper`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || format!("expected name[:degree[:lower:upper]], got '{s}'");
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let degree = match parts.get(1) {
            Some(d) => d.parse().map_err(|_| bad())?,
            None => default_degree(),
        };
        let (lower, upper) = match parts.len() {
            1 | 2 => (None, None),
            4 => (Some(num(parts[2])?), Some(num(parts[3])?)),
            _ => return Err(bad()),
        };
        if parts[0].is_empty() {
            return Err(bad());
        }
        Ok(Self {
            name: parts[0].to_string(),
            degree,
            lower,
            upper,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// `aic`, `bic` or a positive number.
    pub lambda: String,
    pub xi: f64,
    pub outer_tolerance: f64,
    pub max_outer: usize,
    pub freeze_threshold: f64,
    pub early_stop: bool,
    pub ccd_tolerance: f64,
    pub max_passes: usize,
    /// Bootstrap resamples for standard errors; 0 disables.
    pub bootstrap: usize,
    pub curve_points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        let bar = BarControls::default();
        let ccd = CcdControls::default();
        Self {
            lambda: "bic".into(),
            xi: bar.xi,
            outer_tolerance: bar.outer_tolerance,
            max_outer: bar.max_outer,
            freeze_threshold: bar.freeze_threshold,
            early_stop: false,
            ccd_tolerance: ccd.tolerance,
            max_passes: ccd.max_passes,
            bootstrap: 0,
            curve_points: 200,
        }
    }
}

impl FitConfig {
    pub fn lambda_choice(&self) -> Result<LambdaChoice, CliError> {
        self.lambda.parse().map_err(CliError::Config)
    }

    pub fn bar_controls(&self) -> Result<BarControls, CliError> {
        Ok(BarControls {
            xi: self.xi,
            lambda: self.lambda_choice()?,
            outer_tolerance: self.outer_tolerance,
            max_outer: self.max_outer,
            freeze_threshold: self.freeze_threshold,
            early_stop: self.early_stop.then(EarlyStop::default),
        })
    }

    pub fn ccd_controls(&self) -> CcdControls {
        CcdControls {
            tolerance: self.ccd_tolerance,
            max_passes: self.max_passes,
            ..CcdControls::default()
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        self.lambda_choice()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("fit.{name} must be positive, got {v}")))
            }
        };
        positive("xi", self.xi)?;
        positive("outer_tolerance", self.outer_tolerance)?;
        positive("freeze_threshold", self.freeze_threshold)?;
        positive("ccd_tolerance", self.ccd_tolerance)?;
        if self.max_outer == 0 || self.max_passes == 0 {
            return Err(CliError::Config("fit.max_outer and fit.max_passes must be at least 1".into()));
        }
        if self.bootstrap == 1 {
            return Err(CliError::Config(
                "fit.bootstrap needs at least 2 resamples (0 disables)".into(),
            ));
        }
        if self.curve_points < 2 {
            return Err(CliError::Config("fit.curve_points must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub preset: String,
    pub n: usize,
    pub p: usize,
    pub replications: usize,
    pub methods: Vec<String>,
    /// Overrides the preset's AR(1) correlation.
    pub rho: Option<f64>,
    pub cv_folds: usize,
    pub curve_points: usize,
    /// Also write the per-coefficient bias table.
    pub bias_table: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            preset: "s1".into(),
            n: 800,
            p: 300,
            replications: 50,
            methods: ["bar-aic", "bar-bic", "lasso", "alasso", "oracle"].map(String::from).to_vec(),
            rho: None,
            cv_folds: 10,
            curve_points: 200,
            bias_table: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub xi_grid: Vec<f64>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            xi_grid: vec![0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenConfig {
    pub genotypes: Option<PathBuf>,
    pub phenotypes: Option<PathBuf>,
    /// Id column shared by both files.
    pub id: String,
    /// Response column of the phenotype file; falls back to `data.response`.
    pub response: Option<String>,
    pub maf: f64,
    pub p_threshold: f64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            genotypes: None,
            phenotypes: None,
            id: "id".into(),
            response: None,
            maf: 0.1,
            p_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: 100 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn family(&self) -> Result<Family, CliError> {
        self.data.family.parse().map_err(|e| CliError::Config(format!("{e}")))
    }

    /// Checks shared by every subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        self.fit.validate()?;
        self.family()?;
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if !self.data.delimiter.is_ascii() {
            return Err(CliError::Config("delimiter must be a single ASCII character".into()));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path, CliError> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Config("no output directory (set `output` or pass --output)".into()))
    }

    /// The configuration as hashed and recorded in the manifest: everything
    /// except the thread count and the output location.
    pub fn canonical(&self) -> RunConfig {
        RunConfig {
            threads: None,
            output: None,
            ..self.clone()
        }
    }

    pub fn canonical_toml(&self) -> String {
        toml::to_string(&self.canonical()).expect("configuration serializes")
    }

    pub fn manifest_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }
}
