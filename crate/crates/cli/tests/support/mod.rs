#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gplm_bar::simulate::{generate_scenario, ScenarioConfig};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gplm-bar"));
    cmd.env_remove("GPLM_BAR_THREADS");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes replication `rep` of `config` as a CSV with columns
/// `id, y, w1.., z1.., x1..` and returns its path.
pub fn write_scenario_csv(dir: &Path, config: &ScenarioConfig, rep: usize) -> PathBuf {
    let data = generate_scenario(config, rep).unwrap();
    let mut header = vec!["id".to_string(), "y".to_string()];
    header.extend((1..=data.w.ncols()).map(|j| format!("w{j}")));
    header.extend((1..=data.z.ncols()).map(|j| format!("z{j}")));
    header.extend((1..=data.x.ncols()).map(|j| format!("x{j}")));
    let mut text = header.join(",") + "\n";
    for i in 0..data.n() {
        let mut row = vec![format!("r{i}"), format!("{}", data.y[i])];
        row.extend(data.w.row(i).iter().map(|v| format!("{v}")));
        row.extend(data.z.row(i).iter().map(|v| format!("{v}")));
        row.extend(data.x.row(i).iter().map(|v| format!("{v}")));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = dir.join(format!("{}_{rep}.csv", config.name));
    std::fs::write(&path, text).unwrap();
    path
}

/// `--continuous` arguments declaring every sieve column with its
/// generating domain.
pub fn continuous_args(config: &ScenarioConfig) -> Vec<String> {
    config
        .psi
        .iter()
        .enumerate()
        .flat_map(|(j, f)| {
            let (lo, hi) = f.domain();
            ["--continuous".to_string(), format!("z{}:{}:{lo}:{hi}", j + 1, config.degree)]
        })
        .collect()
}

pub fn categorical_arg(config: &ScenarioConfig) -> String {
    (1..=config.alpha0.len())
        .map(|j| format!("w{j}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Data rows of a tab-separated output table keyed by column name.
pub fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split('\t').map(str::to_string).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split('\t').map(str::to_string)).collect())
        .collect()
}

/// Every file of a directory, by name.
pub fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}
