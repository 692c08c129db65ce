//! `gplm-bar`: fitting, simulation, path, screening and bootstrap runs.

mod commands;
mod config;
mod data;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ContinuousColumn, RunConfig};
use crate::error::{CliError, EXIT_NOT_CONVERGED};

/// Environment variable overriding the configured worker-thread count.
const THREADS_ENV: &str = "GPLM_BAR_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "gplm-bar",
    version,
    about = "Broken adaptive ridge for generalized partly linear models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit BAR to a data file and write coefficients, support, curves and a manifest.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Bootstrap resamples for standard errors (0 disables).
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Run a simulation campaign on a scenario preset.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Scenario preset: s1, s2 or s4.
        #[arg(long)]
        preset: Option<String>,
        #[arg(short = 'n', long)]
        n: Option<usize>,
        #[arg(short = 'p', long)]
        p: Option<usize>,
        #[arg(short = 'R', long)]
        replications: Option<usize>,
        /// Comma-separated methods: bar-aic, bar-bic, lasso, alasso, oracle.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        cv_folds: Option<usize>,
        /// Also write the per-coefficient bias table.
        #[arg(long)]
        bias: bool,
    },
    /// BAR coefficient paths over a grid of initial ridge precisions.
    Path {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Comma-separated ascending xi grid.
        #[arg(long, value_delimiter = ',')]
        xi_grid: Option<Vec<f64>>,
    },
    /// MAF filter and univariate screen of a genotype panel.
    Screen {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        genotypes: Option<PathBuf>,
        #[arg(long)]
        phenotypes: Option<PathBuf>,
        /// Id column shared by both files.
        #[arg(long = "id-column")]
        id_column: Option<String>,
        #[arg(long)]
        response: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        delimiter: Option<char>,
        #[arg(long)]
        maf: Option<f64>,
        #[arg(long)]
        p_threshold: Option<f64>,
    },
    /// Bootstrap standard errors and selection frequencies of a BAR fit.
    Bootstrap {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(short = 'B', long)]
        resamples: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides the GPLM_BAR_THREADS variable and the config).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(long)]
    response: Option<String>,
    /// logistic or poisson.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    id: Option<String>,
    /// Comma-separated unpenalized covariates.
    #[arg(long, value_delimiter = ',')]
    categorical: Option<Vec<String>>,
    /// Sieve covariate as name[:degree[:lower:upper]]; repeatable.
    #[arg(long)]
    continuous: Option<Vec<ContinuousColumn>>,
    /// Comma-separated penalized columns (default: all remaining columns).
    #[arg(long, value_delimiter = ',')]
    penalized: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// aic, bic or a positive number.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    outer_tolerance: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Stop BAR once the support is stable and changes are below 1e-4.
    #[arg(long)]
    early_stop: bool,
    #[arg(long)]
    max_passes: Option<usize>,
    #[arg(long)]
    curve_points: Option<usize>,
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        set(&mut cfg.seed, self.seed);
        if let Ok(v) = std::env::var(THREADS_ENV) {
            let threads = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
            cfg.threads = Some(threads);
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        Ok(cfg)
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let d = &mut cfg.data;
        if self.input.is_some() {
            d.input = self.input;
        }
        set(&mut d.delimiter, self.delimiter);
        if self.response.is_some() {
            d.response = self.response;
        }
        set(&mut d.family, self.family);
        if self.id.is_some() {
            d.id = self.id;
        }
        set(&mut d.categorical, self.categorical);
        set(&mut d.continuous, self.continuous);
        if self.penalized.is_some() {
            d.penalized = self.penalized;
        }
        set(&mut d.exclude, self.exclude);
    }
}

impl FitArgs {
    fn apply(self, cfg: &mut RunConfig, curve_points_to_simulate: bool) {
        let f = &mut cfg.fit;
        set(&mut f.lambda, self.lambda);
        set(&mut f.xi, self.xi);
        set(&mut f.outer_tolerance, self.outer_tolerance);
        set(&mut f.max_outer, self.max_outer);
        set(&mut f.max_passes, self.max_passes);
        if self.early_stop {
            f.early_stop = true;
        }
        if curve_points_to_simulate {
            set(&mut cfg.simulate.curve_points, self.curve_points);
        } else {
            set(&mut cfg.fit.curve_points, self.curve_points);
        }
    }
}

fn resolve(command: Command) -> Result<(&'static str, RunConfig), CliError> {
    Ok(match command {
        Command::Fit {
            common,
            data,
            fit,
            bootstrap,
        } => {
            let mut cfg = common.load()?;
            data.apply(&mut cfg);
            fit.apply(&mut cfg, false);
            set(&mut cfg.fit.bootstrap, bootstrap);
            ("fit", cfg)
        }
        Command::Simulate {
            common,
            fit,
            preset,
            n,
            p,
            replications,
            methods,
            rho,
            cv_folds,
            bias,
        } => {
            let mut cfg = common.load()?;
            fit.apply(&mut cfg, true);
            let s = &mut cfg.simulate;
            set(&mut s.preset, preset);
            set(&mut s.n, n);
            set(&mut s.p, p);
            set(&mut s.replications, replications);
            set(&mut s.methods, methods);
            if rho.is_some() {
                s.rho = rho;
            }
            set(&mut s.cv_folds, cv_folds);
            if bias {
                s.bias_table = true;
            }
            ("simulate", cfg)
        }
        Command::Path {
            common,
            data,
            fit,
            xi_grid,
        } => {
            let mut cfg = common.load()?;
            data.apply(&mut cfg);
            fit.apply(&mut cfg, false);
            set(&mut cfg.path.xi_grid, xi_grid);
            ("path", cfg)
        }
        Command::Screen {
            common,
            genotypes,
            phenotypes,
            id_column,
            response,
            family,
            delimiter,
            maf,
            p_threshold,
        } => {
            let mut cfg = common.load()?;
            let s = &mut cfg.screen;
            if genotypes.is_some() {
                s.genotypes = genotypes;
            }
            if phenotypes.is_some() {
                s.phenotypes = phenotypes;
            }
            set(&mut s.id, id_column);
            if response.is_some() {
                s.response = response;
            }
            set(&mut s.maf, maf);
            set(&mut s.p_threshold, p_threshold);
            set(&mut cfg.data.family, family);
            set(&mut cfg.data.delimiter, delimiter);
            ("screen", cfg)
        }
        Command::Bootstrap {
            common,
            data,
            fit,
            resamples,
        } => {
            let mut cfg = common.load()?;
            data.apply(&mut cfg);
            fit.apply(&mut cfg, false);
            set(&mut cfg.bootstrap.resamples, resamples);
            ("bootstrap", cfg)
        }
    })
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (name, cfg) = resolve(cli.command)?;
    cfg.validate()?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    }
    match name {
        "fit" => commands::fit(&cfg),
        "simulate" => commands::simulate(&cfg),
        "path" => commands::path(&cfg),
        "screen" => commands::screen(&cfg),
        _ => commands::bootstrap(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: some fits did not converge; outputs were written");
            ExitCode::from(EXIT_NOT_CONVERGED as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
