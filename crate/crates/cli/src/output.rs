//! Output files: comment header, number formats and tab-separated tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// First line of every output file.
pub fn header_line(manifest_hash: &str) -> String {
    format!("# gplm-bar {VERSION} manifest={manifest_hash}\n")
}

/// Machine-table number: 17 significant digits.
pub fn machine(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// Human-readable number: 4 significant digits.
pub fn human(x: f64) -> String {
    if !x.is_finite() {
        return machine(x);
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        let decimals = (3 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

/// Tab-separated table accumulated in memory and written in one go.
pub struct TsvWriter {
    text: String,
}

impl TsvWriter {
    pub fn new(manifest_hash: &str, columns: &[&str]) -> Self {
        let mut text = header_line(manifest_hash);
        text.push_str(&columns.join("\t"));
        text.push('\n');
        Self { text }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push('\t');
            }
            self.text.push_str(f.as_ref());
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Files of one run, written only after every one of them has been built.
#[derive(Default)]
pub struct OutputSet {
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn write_all(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in self.files {
            let path = dir.join(&name);
            std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Manifest document: the header line, the resolved configuration and a
/// diagnostics table.
pub fn manifest(manifest_hash: &str, command: &str, config_toml: &str, diagnostics: &[(String, String)]) -> String {
    let mut text = header_line(manifest_hash);
    let _ = writeln!(text, "command = \"{command}\"");
    let _ = writeln!(text, "version = \"{VERSION}\"");
    let _ = writeln!(text, "manifest_hash = \"{manifest_hash}\"\n");
    let _ = writeln!(text, "[diagnostics]");
    for (k, v) in diagnostics {
        let _ = writeln!(text, "{k} = {v}");
    }
    let _ = writeln!(text, "\n# resolved configuration");
    let _ = writeln!(text, "[config]");
    text.push_str(&nest_config(config_toml));
    text
}

/// Re-roots the tables of a standalone config document under `[config]`.
fn nest_config(toml_text: &str) -> String {
    toml_text
        .lines()
        .map(|line| {
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix("[[") {
                format!("[[config.{rest}")
            } else if let Some(rest) = trimmed.strip_prefix('[') {
                format!("[config.{rest}")
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

/// TOML literal for a diagnostics string.
pub fn toml_string(s: &str) -> String {
    format!("{s:?}")
}
