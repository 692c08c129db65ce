//! Subcommand bodies. Every input is validated and every result computed
//! before the first output file is written.

use gplm_bar::bar::{bar_fit, Criterion, FitResult};
use gplm_bar::bernstein::{evaluate_psi, uniform_grid};
use gplm_bar::pipeline::{bootstrap_se, impute_column_means, maf_filter, univariate_screen, BootstrapReport, PipelineError};
use gplm_bar::simulate::{run_replications, Method, ScenarioConfig, SimError, StudyOptions};
use gplm_bar::{CoefficientBlocks, FitError, LambdaChoice, Problem};
use ndarray::Axis;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::{assemble, join, Assembled, Table};
use crate::error::CliError;
use crate::output::{human, machine, manifest, toml_string, OutputSet, TsvWriter};

fn fit_error(e: FitError) -> CliError {
    match e {
        FitError::Family(_) | FitError::Design(_) => CliError::Data(e.to_string()),
        FitError::Argument(_) | FitError::InvalidControls(_) => CliError::Config(e.to_string()),
        _ => CliError::Data(format!("fit failed: {e}")),
    }
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Argument(_) => CliError::Config(e.to_string()),
        PipelineError::Fit(inner) => fit_error(inner),
        _ => CliError::Data(e.to_string()),
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Fit(inner) => fit_error(inner),
        _ => CliError::Config(e.to_string()),
    }
}

/// Ingested data and the problem built from it.
struct Prepared {
    assembled: Assembled,
    problem: Problem,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let input = cfg
        .data
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("no input file (data.input or --input)".into()))?;
    let table = Table::read(input, cfg.data.delimiter)?;
    let assembled = assemble(&table, &cfg.data)?;
    let problem = Problem::from_dataset(&assembled.dataset, &assembled.specs, cfg.family()?)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    Ok(Prepared { assembled, problem })
}

/// File-name-safe form of a column name.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `(block, name, index, estimate)` for every coefficient in output order.
fn coefficient_rows(a: &Assembled, c: &CoefficientBlocks) -> Vec<(&'static str, String, usize, f64)> {
    let mut rows = vec![("intercept", "(intercept)".to_string(), 0, c.intercept)];
    rows.extend(
        a.w_names
            .iter()
            .zip(&c.alpha)
            .enumerate()
            .map(|(i, (n, v))| ("alpha", n.clone(), i, *v)),
    );
    let mut k = 0;
    for (zname, spec) in a.z_names.iter().zip(&a.specs) {
        for basis in 1..=spec.degree() {
            rows.push(("gamma", format!("{zname}:{basis}"), k, c.gamma[k]));
            k += 1;
        }
    }
    rows.extend(
        a.x_names
            .iter()
            .zip(&c.beta)
            .enumerate()
            .map(|(i, (n, v))| ("beta", n.clone(), i, *v)),
    );
    rows
}

fn coefficient_table(hash: &str, a: &Assembled, c: &CoefficientBlocks, boot: Option<&BootstrapReport>) -> String {
    let rows = coefficient_rows(a, c);
    match boot {
        None => {
            let mut t = TsvWriter::new(hash, &["block", "name", "index", "estimate"]);
            for (block, name, index, v) in rows {
                t.row(&[block.to_string(), name, index.to_string(), machine(v)]);
            }
            t.finish()
        }
        Some(b) => {
            let se = b.std_errors.to_flat();
            let mut t = TsvWriter::new(hash, &["block", "name", "index", "estimate", "se", "selection_freq"]);
            for (pos, (block, name, index, v)) in rows.into_iter().enumerate() {
                let freq = if block == "beta" {
                    machine(b.selection_frequency[index])
                } else {
                    "nan".into()
                };
                t.row(&[block.to_string(), name, index.to_string(), machine(v), machine(se[pos]), freq]);
            }
            t.finish()
        }
    }
}

fn support_table(hash: &str, a: &Assembled, c: &CoefficientBlocks) -> String {
    let mut t = TsvWriter::new(hash, &["index", "name", "estimate"]);
    for j in c.support() {
        t.row(&[j.to_string(), a.x_names[j].clone(), machine(c.beta[j])]);
    }
    t.finish()
}

fn curve_files(hash: &str, a: &Assembled, c: &CoefficientBlocks, points: usize, out: &mut OutputSet) -> Result<(), CliError> {
    for (j, (zname, spec)) in a.z_names.iter().zip(&a.specs).enumerate() {
        let grid = uniform_grid(spec, points);
        let psi = evaluate_psi(c.gamma_component(&a.specs, j), spec, &grid).map_err(|e| CliError::Data(e.to_string()))?;
        let mut t = TsvWriter::new(hash, &["z", "psi_hat"]);
        for (z, v) in grid.iter().zip(psi) {
            t.row(&[machine(*z), machine(v)]);
        }
        out.add(format!("curve_{}.tsv", sanitize(zname)), t.finish());
    }
    Ok(())
}

fn bar_recipe(cfg: &RunConfig) -> Result<impl Fn(&Problem) -> Result<CoefficientBlocks, FitError> + Sync, CliError> {
    let controls = cfg.fit.bar_controls()?;
    let ccd = cfg.fit.ccd_controls();
    Ok(move |p: &Problem| bar_fit(p, &controls, &ccd).map(|f| f.coefficients))
}

fn run_bootstrap(cfg: &RunConfig, problem: &Problem, b: usize) -> Result<BootstrapReport, CliError> {
    bootstrap_se(problem, b, cfg.seed, bar_recipe(cfg)?).map_err(pipeline_error)
}

fn fit_diagnostics(fit: &FitResult, a: &Assembled) -> Vec<(String, String)> {
    let mut d = vec![
        ("converged".to_string(), fit.converged.to_string()),
        ("inner_converged".to_string(), fit.inner_converged.to_string()),
        ("outer_iterations".to_string(), fit.outer_iterations.to_string()),
        ("ccd_passes".to_string(), fit.ccd_passes.to_string()),
        ("lambda".to_string(), machine(fit.lambda)),
        ("xi".to_string(), machine(fit.xi)),
        ("n".to_string(), a.dataset.n().to_string()),
        ("p".to_string(), a.dataset.p().to_string()),
        ("support_size".to_string(), fit.support.len().to_string()),
    ];
    let imputed: Vec<String> = a.imputed.iter().map(|(n, c)| format!("{} = {c}", toml_string(n))).collect();
    d.push(("imputed".to_string(), format!("{{ {} }}", imputed.join(", "))));
    d
}

fn print_fit_summary(fit: &FitResult, a: &Assembled) {
    println!(
        "converged: {}  outer iterations: {}  lambda: {}  support size: {}",
        fit.converged,
        fit.outer_iterations,
        human(fit.lambda),
        fit.support.len()
    );
    for &j in &fit.support {
        println!("  {}\t{}", a.x_names[j], human(fit.coefficients.beta[j]));
    }
}

pub fn fit(cfg: &RunConfig) -> Result<bool, CliError> {
    let dir = cfg.output_dir()?;
    let prep = prepare(cfg)?;
    let fit = bar_fit(&prep.problem, &cfg.fit.bar_controls()?, &cfg.fit.ccd_controls()).map_err(fit_error)?;
    let boot = match cfg.fit.bootstrap {
        0 => None,
        b => Some(run_bootstrap(cfg, &prep.problem, b)?),
    };

    let hash = cfg.manifest_hash();
    let a = &prep.assembled;
    let mut out = OutputSet::default();
    out.add(
        "coefficients.tsv",
        coefficient_table(&hash, a, &fit.coefficients, boot.as_ref()),
    );
    out.add("support.tsv", support_table(&hash, a, &fit.coefficients));
    curve_files(&hash, a, &fit.coefficients, cfg.fit.curve_points, &mut out)?;
    let mut diagnostics = fit_diagnostics(&fit, a);
    if let Some(b) = &boot {
        diagnostics.push(("bootstrap_requested".into(), b.requested.to_string()));
        diagnostics.push(("bootstrap_effective".into(), b.effective.to_string()));
    }
    out.add("manifest.toml", manifest(&hash, "fit", &cfg.canonical_toml(), &diagnostics));
    out.write_all(dir)?;
    print_fit_summary(&fit, a);
    Ok(fit.converged)
}

pub fn bootstrap(cfg: &RunConfig) -> Result<bool, CliError> {
    let dir = cfg.output_dir()?;
    let prep = prepare(cfg)?;
    let b = cfg.bootstrap.resamples;
    if b < 2 {
        return Err(CliError::Config("bootstrap.resamples must be at least 2".into()));
    }
    let fit = bar_fit(&prep.problem, &cfg.fit.bar_controls()?, &cfg.fit.ccd_controls()).map_err(fit_error)?;
    let report = run_bootstrap(cfg, &prep.problem, b)?;

    let hash = cfg.manifest_hash();
    let a = &prep.assembled;
    let mut out = OutputSet::default();
    out.add("bootstrap.tsv", coefficient_table(&hash, a, &fit.coefficients, Some(&report)));
    let mut diagnostics = fit_diagnostics(&fit, a);
    diagnostics.push(("bootstrap_requested".into(), report.requested.to_string()));
    diagnostics.push(("bootstrap_effective".into(), report.effective.to_string()));
    out.add(
        "manifest.toml",
        manifest(&hash, "bootstrap", &cfg.canonical_toml(), &diagnostics),
    );
    out.write_all(dir)?;
    println!(
        "converged: {}  resamples: {} of {} succeeded",
        fit.converged, report.effective, report.requested
    );
    Ok(fit.converged && report.effective == report.requested)
}

pub fn path(cfg: &RunConfig) -> Result<bool, CliError> {
    let dir = cfg.output_dir()?;
    let grid = &cfg.path.xi_grid;
    if grid.is_empty() {
        return Err(CliError::Config("path.xi_grid is empty".into()));
    }
    if grid.iter().any(|x| !(x.is_finite() && *x > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "path.xi_grid must be positive and strictly ascending".into(),
        ));
    }
    let prep = prepare(cfg)?;
    let base = cfg.fit.bar_controls()?;
    let ccd = cfg.fit.ccd_controls();
    let jobs: Vec<(&str, LambdaChoice, f64)> = [
        ("aic", LambdaChoice::Criterion(Criterion::Aic)),
        ("bic", LambdaChoice::Criterion(Criterion::Bic)),
    ]
    .into_iter()
    .flat_map(|(name, choice)| grid.iter().map(move |&xi| (name, choice, xi)))
    .collect();
    let fits = jobs
        .par_iter()
        .map(|(_, lambda, xi)| {
            let controls = gplm_bar::BarControls {
                xi: *xi,
                lambda: *lambda,
                ..base.clone()
            };
            bar_fit(&prep.problem, &controls, &ccd)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(fit_error)?;

    let hash = cfg.manifest_hash();
    let a = &prep.assembled;
    let mut t = TsvWriter::new(&hash, &["criterion", "xi", "column", "name", "coefficient"]);
    for ((criterion, _, xi), fit) in jobs.iter().zip(&fits) {
        for (j, b) in fit.coefficients.beta.iter().enumerate() {
            t.row(&[
                criterion.to_string(),
                machine(*xi),
                j.to_string(),
                a.x_names[j].clone(),
                machine(*b),
            ]);
        }
    }
    let all_converged = fits.iter().all(|f| f.converged);
    let mut out = OutputSet::default();
    out.add("path.tsv", t.finish());
    let diagnostics = vec![
        ("converged".to_string(), all_converged.to_string()),
        ("fits".to_string(), fits.len().to_string()),
        (
            "nonconverged".to_string(),
            fits.iter().filter(|f| !f.converged).count().to_string(),
        ),
    ];
    out.add("manifest.toml", manifest(&hash, "path", &cfg.canonical_toml(), &diagnostics));
    out.write_all(dir)?;
    for ((criterion, _, xi), fit) in jobs.iter().zip(&fits) {
        let names: Vec<&str> = fit.support.iter().map(|&j| a.x_names[j].as_str()).collect();
        println!("{criterion} xi={}: {}", human(*xi), names.join(" "));
    }
    Ok(all_converged)
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    if names.is_empty() {
        return Err(CliError::Config("simulate.methods is empty".into()));
    }
    let methods = names
        .iter()
        .map(|n| n.parse::<Method>().map_err(sim_error))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(CliError::Config(format!("method {m} is listed twice")));
        }
    }
    Ok(methods)
}

pub fn simulate(cfg: &RunConfig) -> Result<bool, CliError> {
    let dir = cfg.output_dir()?;
    let s = &cfg.simulate;
    let methods = parse_methods(&s.methods)?;
    let mut scenario = ScenarioConfig::preset(&s.preset, s.n, s.p).map_err(sim_error)?;
    scenario.replications = s.replications;
    scenario.base_seed = cfg.seed;
    if let Some(rho) = s.rho {
        scenario.rho = rho;
    }
    scenario.validate().map_err(sim_error)?;
    if s.curve_points < 2 {
        return Err(CliError::Config("simulate.curve_points must be at least 2".into()));
    }
    let options = StudyOptions {
        ccd: cfg.fit.ccd_controls(),
        bar: cfg.fit.bar_controls()?,
        cv_folds: s.cv_folds,
        ..StudyOptions::default()
    };
    let study = run_replications(&scenario, &methods, &options).map_err(sim_error)?;

    let hash = cfg.manifest_hash();
    let mut out = OutputSet::default();
    let mut summary = TsvWriter::new(
        &hash,
        &["method", "MMSE", "MMSE_sd", "TP", "FP", "MS", "MC", "TM", "R_effective"],
    );
    for m in &study.summaries {
        summary.row(&[
            m.method.to_string(),
            machine(m.mmse),
            machine(m.mmse_sd),
            machine(m.tp),
            machine(m.fp),
            machine(m.ms),
            machine(m.mc),
            machine(m.tm),
            m.r_effective.to_string(),
        ]);
    }
    out.add("summary.tsv", summary.finish());

    let mut reps = TsvWriter::new(
        &hash,
        &[
            "replication",
            "method",
            "status",
            "converged",
            "TP",
            "FP",
            "MS",
            "MC",
            "TM",
            "MSE",
        ],
    );
    for r in &study.records {
        for (m, f) in methods.iter().zip(&r.fits) {
            match f {
                Ok(f) => reps.row(&[
                    r.replication.to_string(),
                    m.to_string(),
                    "ok".into(),
                    f.converged.to_string(),
                    f.metrics.tp.to_string(),
                    f.metrics.fp.to_string(),
                    f.metrics.ms.to_string(),
                    f.metrics.mc.to_string(),
                    u8::from(f.metrics.tm).to_string(),
                    machine(f.metrics.mse),
                ]),
                Err(_) => {
                    let mut row = vec![r.replication.to_string(), m.to_string(), "failed".into(), "false".into()];
                    row.extend(std::iter::repeat_n("nan".to_string(), 6));
                    reps.row(&row);
                }
            }
        }
    }
    out.add("replications.tsv", reps.finish());

    let curves = methods
        .iter()
        .map(|m| study.mean_curves(*m, s.curve_points).map_err(sim_error))
        .collect::<Result<Vec<_>, _>>()?;
    for (j, psi) in scenario.psi.iter().enumerate() {
        let grid = uniform_grid(&study.specs[j], s.curve_points);
        let mut columns = vec!["z".to_string(), "truth".to_string()];
        columns.extend(methods.iter().map(|m| m.to_string()));
        let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut t = TsvWriter::new(&hash, &column_refs);
        for (i, z) in grid.iter().enumerate() {
            let mut row = vec![machine(*z), machine(psi.value(*z))];
            for c in &curves {
                // A method with no successful replication has no curve.
                row.push(c.get(j).map_or_else(|| "nan".to_string(), |curve| machine(curve.mean[i])));
            }
            t.row(&row);
        }
        out.add(format!("curves_psi{}.tsv", j + 1), t.finish());
    }

    if s.bias_table {
        let mut t = TsvWriter::new(&hash, &["method", "parameter", "truth", "mean", "bias", "sd"]);
        for m in &study.summaries {
            for b in &m.bias {
                t.row(&[
                    m.method.to_string(),
                    b.parameter.clone(),
                    machine(b.truth),
                    machine(b.mean),
                    machine(b.bias),
                    machine(b.sd),
                ]);
            }
        }
        out.add("bias.tsv", t.finish());
    }

    let failures: usize = study.summaries.iter().map(|m| m.failures).sum();
    let nonconverged: usize = study.summaries.iter().map(|m| m.nonconverged).sum();
    let all_converged = failures == 0 && nonconverged == 0;
    let diagnostics = vec![
        ("converged".to_string(), all_converged.to_string()),
        ("replications".to_string(), scenario.replications.to_string()),
        ("failures".to_string(), failures.to_string()),
        ("nonconverged".to_string(), nonconverged.to_string()),
    ];
    out.add(
        "manifest.toml",
        manifest(&hash, "simulate", &cfg.canonical_toml(), &diagnostics),
    );
    out.write_all(dir)?;

    println!("method\tMMSE\tMMSE_sd\tTP\tFP\tMS\tMC\tTM\tR_effective");
    for m in &study.summaries {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.method,
            human(m.mmse),
            human(m.mmse_sd),
            human(m.tp),
            human(m.fp),
            human(m.ms),
            human(m.mc),
            human(m.tm),
            m.r_effective
        );
    }
    Ok(all_converged)
}

pub fn screen(cfg: &RunConfig) -> Result<bool, CliError> {
    let dir = cfg.output_dir()?;
    let sc = &cfg.screen;
    if !(0.0..=0.5).contains(&sc.maf) {
        return Err(CliError::Config(format!("screen.maf must lie in [0, 0.5], got {}", sc.maf)));
    }
    if !(0.0..=1.0).contains(&sc.p_threshold) {
        return Err(CliError::Config(format!(
            "screen.p_threshold must lie in [0, 1], got {}",
            sc.p_threshold
        )));
    }
    let g_path = sc
        .genotypes
        .as_deref()
        .ok_or_else(|| CliError::Config("no genotype file (screen.genotypes or --genotypes)".into()))?;
    let p_path = sc
        .phenotypes
        .as_deref()
        .ok_or_else(|| CliError::Config("no phenotype file (screen.phenotypes or --phenotypes)".into()))?;
    let response = sc
        .response
        .as_deref()
        .or(cfg.data.response.as_deref())
        .ok_or_else(|| CliError::Config("no response column (screen.response or --response)".into()))?;
    let family = cfg.family()?;

    let genotypes = Table::read(g_path, cfg.data.delimiter)?;
    let phenotypes = Table::read(p_path, cfg.data.delimiter)?;
    let y_col = phenotypes.index_of(response).ok_or_else(|| {
        CliError::Config(format!(
            "response column '{response}' is not in {} (columns: {})",
            p_path.display(),
            phenotypes.headers.join(", ")
        ))
    })?;
    let y_all = phenotypes.required(y_col)?;
    let joined = join(&genotypes, &phenotypes, &sc.id)?;
    let y: Vec<f64> = joined.phenotype_index.iter().map(|&i| y_all[i]).collect();

    let maf = maf_filter(joined.genotypes.view(), sc.maf).map_err(pipeline_error)?;
    let mut kept = joined.genotypes.select(Axis(1), &maf.retained);
    impute_column_means(&mut kept);
    let report = univariate_screen(kept.view(), &y, family, sc.p_threshold, &cfg.fit.ccd_controls()).map_err(pipeline_error)?;

    let hash = cfg.manifest_hash();
    let mut t = TsvWriter::new(
        &hash,
        &[
            "column",
            "name",
            "maf",
            "missing",
            "maf_pass",
            "coefficient",
            "std_error",
            "p_value",
            "separated",
            "retained",
        ],
    );
    let nan = || "nan".to_string();
    let mut screened = report.rows.iter();
    for (c, name) in joined.variant_names.iter().enumerate() {
        let passes = maf.retained.contains(&c);
        let mut row = vec![
            c.to_string(),
            name.clone(),
            machine(maf.maf[c]),
            maf.missing[c].to_string(),
            passes.to_string(),
        ];
        match passes.then(|| screened.next()).flatten() {
            Some(r) => {
                let retained = report.retained.contains(&r.column);
                row.extend([
                    machine(r.coefficient),
                    machine(r.std_error),
                    machine(r.p_value),
                    r.separated.to_string(),
                    retained.to_string(),
                ]);
            }
            None => row.extend([nan(), nan(), nan(), "false".into(), "false".into()]),
        }
        t.row(&row);
    }

    let mut filtered = format!("# gplm-bar {} manifest={hash}\n", crate::output::VERSION);
    let mut header = vec![sc.id.clone()];
    header.extend(joined.phenotype_headers.iter().cloned());
    header.extend(report.retained.iter().map(|&k| joined.variant_names[maf.retained[k]].clone()));
    let delim = cfg.data.delimiter.to_string();
    filtered.push_str(&header.join(&delim));
    filtered.push('\n');
    for (i, id) in joined.ids.iter().enumerate() {
        let mut fields = vec![id.clone()];
        fields.extend(joined.phenotype_rows[i].iter().cloned());
        fields.extend(report.retained.iter().map(|&k| machine(kept[[i, k]])));
        filtered.push_str(&fields.join(&delim));
        filtered.push('\n');
    }

    let separated = report.rows.iter().filter(|r| r.separated).count();
    let mut out = OutputSet::default();
    out.add("screen_report.tsv", t.finish());
    out.add("filtered.csv", filtered);
    let diagnostics = vec![
        ("variants".to_string(), joined.variant_names.len().to_string()),
        ("maf_retained".to_string(), maf.retained.len().to_string()),
        ("screen_retained".to_string(), report.retained.len().to_string()),
        ("separated".to_string(), separated.to_string()),
        ("samples".to_string(), joined.ids.len().to_string()),
    ];
    out.add(
        "manifest.toml",
        manifest(&hash, "screen", &cfg.canonical_toml(), &diagnostics),
    );
    out.write_all(dir)?;
    println!(
        "{} variants, {} pass MAF >= {}, {} pass p < {}",
        joined.variant_names.len(),
        maf.retained.len(),
        human(sc.maf),
        report.retained.len(),
        human(sc.p_threshold)
    );
    Ok(true)
}
