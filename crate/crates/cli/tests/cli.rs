//! End-to-end runs of the binary: outputs, exit statuses and flag handling.

mod support;

use std::path::{Path, PathBuf};

use gplm_bar::simulate::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{categorical_arg, code, continuous_args, read_dir_bytes, read_table, run, stderr, write_scenario_csv};

fn fit_args(csv: &Path, config: &ScenarioConfig, out: &Path) -> Vec<String> {
    let mut args: Vec<String> = ["fit", "-i", csv.to_str().unwrap(), "--response", "y", "--id", "id"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    args.extend(["--categorical".into(), categorical_arg(config)]);
    args.extend(continuous_args(config));
    args.extend(["-o".into(), out.to_str().unwrap().into()]);
    args
}

fn run_owned(args: &[String]) -> std::process::Output {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn s1_csv(dir: &Path, n: usize, p: usize) -> (ScenarioConfig, PathBuf) {
    let config = ScenarioConfig::preset("s1", n, p).unwrap();
    let csv = write_scenario_csv(dir, &config, 0);
    (config, csv)
}

#[test]
fn fit_recovers_the_scenario_support() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 800, 30);
    let out = dir.path().join("fit");
    let result = run_owned(&fit_args(&csv, &config, &out));
    assert_eq!(code(&result), 0, "{}", stderr(&result));

    let support: Vec<String> = read_table(&out.join("support.tsv"))
        .into_iter()
        .map(|r| r["name"].clone())
        .collect();
    assert_eq!(support, ["x1", "x2", "x28", "x29", "x30"]);

    let coefficients = read_table(&out.join("coefficients.tsv"));
    // intercept + 5 alpha + 4 x 3 gamma + 30 beta
    assert_eq!(coefficients.len(), 1 + 5 + 12 + 30);
    for name in [
        "curve_z1.tsv",
        "curve_z2.tsv",
        "curve_z3.tsv",
        "curve_z4.tsv",
        "manifest.toml",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("converged = true"));
}

#[test]
fn fit_with_bootstrap_adds_standard_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 300, 8);
    let out = dir.path().join("fit");
    let mut args = fit_args(&csv, &config, &out);
    args.extend(["--bootstrap".into(), "10".into()]);
    let result = run_owned(&args);
    assert!(matches!(code(&result), 0 | 1), "{}", stderr(&result));
    let rows = read_table(&out.join("coefficients.tsv"));
    for row in &rows {
        let se: f64 = row["se"].parse().unwrap();
        assert!(se >= 0.0 || se.is_nan());
        let freq: f64 = row["selection_freq"].parse().unwrap();
        if row["block"] == "beta" {
            assert!((0.0..=1.0).contains(&freq));
        } else {
            assert!(freq.is_nan());
        }
    }
}

#[test]
fn missing_response_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 100, 5);
    let out = dir.path().join("fit");
    let args: Vec<String> = fit_args(&csv, &config, &out)
        .into_iter()
        .filter(|a| a != "--response" && a != "y")
        .collect();
    let result = run_owned(&args);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("response"), "{}", stderr(&result));
    assert!(!out.exists());
}

#[test]
fn malformed_values_name_file_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 100, 5);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    // Data row 3 sits on line 5; x3 is the last-but-two field.
    let mut fields: Vec<String> = lines[4].split(',').map(str::to_string).collect();
    let k = fields.len() - 3;
    fields[k] = "abc".into();
    lines[4] = fields.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();

    let out = dir.path().join("fit");
    let result = run_owned(&fit_args(&csv, &config, &out));
    assert_eq!(code(&result), 3);
    let msg = stderr(&result);
    assert!(msg.contains(&format!("{}:5", csv.display())), "{msg}");
    assert!(msg.contains("'x3'") && msg.contains("abc"), "{msg}");
}

#[test]
fn unknown_preset_lists_the_presets() {
    let dir = tempfile::tempdir().unwrap();
    let result = run(&["simulate", "--preset", "s9", "-o", dir.path().join("sim").to_str().unwrap()]);
    assert_eq!(code(&result), 2);
    let msg = stderr(&result);
    assert!(msg.contains("s1") && msg.contains("s2") && msg.contains("s4"), "{msg}");
}

#[test]
fn simulate_writes_summary_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let result = run(&[
        "simulate",
        "--preset",
        "s1",
        "-n",
        "300",
        "-p",
        "20",
        "-R",
        "2",
        "--methods",
        "bar-bic",
        "--bias",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(code(&result), 0 | 1), "{}", stderr(&result));
    let summary = read_table(&out.join("summary.tsv"));
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0]["method"], "bar-bic");
    assert_eq!(summary[0]["R_effective"], "2");
    assert_eq!(read_table(&out.join("replications.tsv")).len(), 2);
    for j in 1..=4 {
        let curve = read_table(&out.join(format!("curves_psi{j}.tsv")));
        assert!(curve[0].contains_key("truth") && curve[0].contains_key("bar-bic"));
    }
    // the 5 true signals and 5 alpha entries
    assert_eq!(read_table(&out.join("bias.tsv")).len(), 10);
}

#[test]
fn path_covers_every_criterion_and_xi() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 200, 10);
    let out = dir.path().join("path");
    let mut args = fit_args(&csv, &config, &out);
    args[0] = "path".into();
    args.extend(["--xi-grid".into(), "0.1,1,10".into()]);
    let result = run_owned(&args);
    assert!(matches!(code(&result), 0 | 1), "{}", stderr(&result));
    let rows = read_table(&out.join("path.tsv"));
    assert_eq!(rows.len(), 2 * 3 * 10);
    assert!(rows.iter().any(|r| r["criterion"] == "aic") && rows.iter().any(|r| r["criterion"] == "bic"));
}

#[test]
fn empty_xi_grid_in_a_config_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 100, 5);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[path]\nxi_grid = []\n").unwrap();
    let out = dir.path().join("path");
    let mut args = fit_args(&csv, &config, &out);
    args[0] = "path".into();
    args.extend(["-c".into(), cfg.to_str().unwrap().into()]);
    let result = run_owned(&args);
    assert_eq!(code(&result), 2, "{}", stderr(&result));
    assert!(!out.exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 200, 5);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\n[fit]\nlambda = \"aic\"\nxi = 2.0\n").unwrap();

    let from_file = dir.path().join("a");
    let mut args = fit_args(&csv, &config, &from_file);
    args.extend(["-c".into(), cfg.to_str().unwrap().into()]);
    assert!(matches!(code(&run_owned(&args)), 0 | 1));
    let manifest = std::fs::read_to_string(from_file.join("manifest.toml")).unwrap();
    assert!(manifest.contains("lambda = \"aic\"") && manifest.contains("xi = 2.0") && manifest.contains("seed = 9"));

    let overridden = dir.path().join("b");
    let mut args = fit_args(&csv, &config, &overridden);
    args.extend(["-c".into(), cfg.to_str().unwrap().into(), "--lambda".into(), "bic".into()]);
    assert!(matches!(code(&run_owned(&args)), 0 | 1));
    let manifest = std::fs::read_to_string(overridden.join("manifest.toml")).unwrap();
    assert!(manifest.contains("lambda = \"bic\"") && manifest.contains("xi = 2.0"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[fit]\nlamda = \"aic\"\n").unwrap();
    let result = run(&[
        "simulate",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("lamda"), "{}", stderr(&result));
}

#[test]
fn exhausted_outer_iterations_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 300, 10);
    let out = dir.path().join("fit");
    let mut args = fit_args(&csv, &config, &out);
    args.extend(["--max-outer".into(), "1".into()]);
    let result = run_owned(&args);
    assert_eq!(code(&result), 1, "{}", stderr(&result));
    assert!(out.join("coefficients.tsv").exists());
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("converged = false"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 300, 10);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(matches!(code(&run_owned(&fit_args(&csv, &config, &a))), 0 | 1));
    assert!(matches!(code(&run_owned(&fit_args(&csv, &config, &b))), 0 | 1));
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn every_table_starts_with_the_manifest_header() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 200, 6);
    let out = dir.path().join("fit");
    assert!(matches!(code(&run_owned(&fit_args(&csv, &config, &out))), 0 | 1));
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    let hash = manifest
        .lines()
        .find_map(|l| l.strip_prefix("manifest_hash = "))
        .unwrap()
        .trim_matches('"')
        .to_string();
    for (name, bytes) in read_dir_bytes(&out) {
        let first = String::from_utf8(bytes).unwrap().lines().next().unwrap().to_string();
        assert!(
            first.starts_with("# gplm-bar ") && first.ends_with(&format!("manifest={hash}")),
            "{name}: {first}"
        );
    }
}

/// Genotype and phenotype files: `variants` columns coded 0/1/2 with a few
/// blanks, the first `signals` of which drive a logistic response.
fn write_panel(dir: &Path, n: usize, variants: usize, signals: usize) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let freqs: Vec<f64> = (0..variants).map(|_| rng.random_range(0.02..0.5)).collect();
    let mut geno = String::from("id");
    for v in 0..variants {
        geno.push_str(&format!(",snp{}", v + 1));
    }
    geno.push('\n');
    let mut pheno = String::from("id,y,age\n");
    for i in 0..n {
        let mut eta = -0.3;
        geno.push_str(&format!("s{i}"));
        for (v, f) in freqs.iter().enumerate() {
            let g = u8::from(rng.random_bool(*f)) + u8::from(rng.random_bool(*f));
            if v < signals {
                eta += 1.2 * f64::from(g);
            }
            if rng.random_bool(0.01) {
                geno.push(',');
            } else {
                geno.push_str(&format!(",{g}"));
            }
        }
        geno.push('\n');
        let y = u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        // Phenotype rows in reverse order exercise the id join.
        pheno = format!("{pheno}s{i},{y},{}\n", 40 + i % 30);
    }
    let pheno_body: Vec<&str> = pheno.lines().skip(1).collect();
    let pheno = format!(
        "id,y,age\n{}\n",
        pheno_body.iter().rev().copied().collect::<Vec<_>>().join("\n")
    );
    let g = dir.join("geno.csv");
    let p = dir.join("pheno.csv");
    std::fs::write(&g, geno).unwrap();
    std::fs::write(&p, pheno).unwrap();
    (g, p)
}

fn screen(dir: &Path, g: &Path, p: &Path, maf: &str, threshold: &str) -> Vec<std::collections::BTreeMap<String, String>> {
    let out = dir.join(format!("screen_{maf}_{threshold}"));
    let result = run(&[
        "screen",
        "--genotypes",
        g.to_str().unwrap(),
        "--phenotypes",
        p.to_str().unwrap(),
        "--response",
        "y",
        "--maf",
        maf,
        "--p-threshold",
        threshold,
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    assert!(out.join("filtered.csv").exists());
    read_table(&out.join("screen_report.tsv"))
}

#[test]
fn screen_filters_and_keeps_the_signals() {
    let dir = tempfile::tempdir().unwrap();
    let (g, p) = write_panel(dir.path(), 400, 40, 2);

    let everything = screen(dir.path(), &g, &p, "0", "1");
    assert_eq!(everything.len(), 40);
    assert!(everything.iter().all(|r| r["maf_pass"] == "true" && r["retained"] == "true"));

    let strict = screen(dir.path(), &g, &p, "0.1", "0.001");
    for row in &strict {
        let maf: f64 = row["maf"].parse().unwrap();
        assert_eq!(row["maf_pass"] == "true", maf >= 0.1, "{row:?}");
        if row["retained"] == "true" {
            assert_eq!(row["maf_pass"], "true");
        }
    }
    for signal in ["snp1", "snp2"] {
        let row = strict.iter().find(|r| r["name"] == signal).unwrap();
        if row["maf_pass"] == "true" {
            assert_eq!(row["retained"], "true", "{row:?}");
        }
    }
}

#[test]
fn screen_rejects_unmatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (g, p) = write_panel(dir.path(), 50, 5, 1);
    let text = std::fs::read_to_string(&p).unwrap().replace("s7,", "s999,");
    std::fs::write(&p, text).unwrap();
    let result = run(&[
        "screen",
        "--genotypes",
        g.to_str().unwrap(),
        "--phenotypes",
        p.to_str().unwrap(),
        "--response",
        "y",
        "-o",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 3, "{}", stderr(&result));
    assert!(
        stderr(&result).contains("s7") || stderr(&result).contains("s999"),
        "{}",
        stderr(&result)
    );
}

#[test]
fn bootstrap_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv) = s1_csv(dir.path(), 300, 8);
    let out = dir.path().join("boot");
    let mut args = fit_args(&csv, &config, &out);
    args[0] = "bootstrap".into();
    args.extend(["-B".into(), "8".into()]);
    let result = run_owned(&args);
    assert!(matches!(code(&result), 0 | 1), "{}", stderr(&result));
    let rows = read_table(&out.join("bootstrap.tsv"));
    assert_eq!(rows.len(), 1 + 5 + 12 + 8);
}
