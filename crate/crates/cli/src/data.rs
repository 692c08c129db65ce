//! Delimited-text ingestion and assembly of modelling datasets.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use gplm_bar::pipeline::impute_column_means;
use gplm_bar::{BasisSpec, Dataset};
use ndarray::Array2;

use crate::config::DataConfig;
use crate::error::CliError;

/// A delimited file held as raw fields; empty fields are missing.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Source line of every row.
    pub lines: Vec<u64>,
}

impl Table {
    pub fn read(path: &Path, delimiter: char) -> Result<Self, CliError> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter as u8)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut seen = HashSet::new();
        if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(CliError::Data(format!("{}: duplicate column '{dup}'", path.display())));
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            lines.push(record.position().map_or(0, |p| p.line()));
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
            lines,
        })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn schema_error(&self, row: usize, col: usize, message: impl Into<String>) -> CliError {
        CliError::Schema {
            file: self.path.clone(),
            line: self.lines[row],
            column: self.headers[col].clone(),
            message: message.into(),
        }
    }

    /// Numeric column with `None` for empty fields.
    pub fn numeric(&self, col: usize) -> Result<Vec<Option<f64>>, CliError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let field = row[col].as_str();
                if field.is_empty() {
                    return Ok(None);
                }
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(self.schema_error(i, col, format!("'{field}' is not a finite number"))),
                }
            })
            .collect()
    }

    /// Numeric column in which every field must be present.
    pub fn required(&self, col: usize) -> Result<Vec<f64>, CliError> {
        let values = self.numeric(col)?;
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| self.schema_error(i, col, "missing value")))
            .collect()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::io(path, std::io::Error::other(e.to_string())),
        _ => CliError::Data(format!("{}: {e}", path.display())),
    }
}

/// A dataset ready for fitting, with the column names of every block.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub dataset: Dataset,
    pub specs: Vec<BasisSpec>,
    pub w_names: Vec<String>,
    pub z_names: Vec<String>,
    pub x_names: Vec<String>,
    /// Mean-imputed entries per penalized column (only columns with any).
    pub imputed: Vec<(String, usize)>,
}

fn require_column(table: &Table, name: &str, role: &str) -> Result<usize, CliError> {
    table.index_of(name).ok_or_else(|| {
        CliError::Config(format!(
            "{role} column '{name}' is not in {} (columns: {})",
            table.path.display(),
            table.headers.join(", ")
        ))
    })
}

fn columns_to_array(n: usize, columns: Vec<Vec<f64>>) -> Array2<f64> {
    let k = columns.len();
    Array2::from_shape_fn((n, k), |(i, j)| columns[j][i])
}

/// Splits `table` into response and blocks according to `roles`.
pub fn assemble(table: &Table, roles: &DataConfig) -> Result<Assembled, CliError> {
    let response = roles
        .response
        .as_deref()
        .ok_or_else(|| CliError::Config("no response column declared (data.response or --response)".into()))?;
    let y_col = require_column(table, response, "response")?;

    let mut claimed: HashMap<String, &str> = HashMap::new();
    let mut claim = |name: &str, role: &'static str| -> Result<(), CliError> {
        match claimed.insert(name.to_string(), role) {
            Some(prev) => Err(CliError::Config(format!(
                "column '{name}' is declared as both {prev} and {role}"
            ))),
            None => Ok(()),
        }
    };
    claim(response, "response")?;
    if let Some(id) = &roles.id {
        require_column(table, id, "id")?;
        claim(id, "id")?;
    }
    for name in &roles.exclude {
        require_column(table, name, "excluded")?;
        claim(name, "excluded")?;
    }
    for name in &roles.categorical {
        require_column(table, name, "categorical")?;
        claim(name, "categorical")?;
    }
    for c in &roles.continuous {
        require_column(table, &c.name, "continuous")?;
        claim(&c.name, "continuous")?;
    }
    let x_names: Vec<String> = match &roles.penalized {
        Some(list) => {
            for name in list {
                require_column(table, name, "penalized")?;
                claim(name, "penalized")?;
            }
            list.clone()
        }
        None => table.headers.iter().filter(|h| !claimed.contains_key(*h)).cloned().collect(),
    };
    if x_names.is_empty() {
        return Err(CliError::Config("no penalized columns remain".into()));
    }

    let n = table.rows.len();
    if n == 0 {
        return Err(CliError::Data(format!("{} has no data rows", table.path.display())));
    }
    let y = table.required(y_col)?;
    let w_cols = roles
        .categorical
        .iter()
        .map(|name| table.required(table.index_of(name).expect("checked")))
        .collect::<Result<Vec<_>, _>>()?;
    let z_cols = roles
        .continuous
        .iter()
        .map(|c| table.required(table.index_of(&c.name).expect("checked")))
        .collect::<Result<Vec<_>, _>>()?;
    let x_cols = x_names
        .iter()
        .map(|name| {
            let col = table.index_of(name).expect("checked");
            let values = table.numeric(col)?;
            if values.iter().all(Option::is_none) {
                return Err(CliError::Data(format!("penalized column '{name}' has no observed values")));
            }
            Ok(values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>, CliError>>()?;

    let mut x = columns_to_array(n, x_cols);
    let counts = impute_column_means(&mut x);
    let imputed = x_names
        .iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(name, c)| (name.clone(), c))
        .collect();

    let specs = roles
        .continuous
        .iter()
        .zip(&z_cols)
        .map(|(c, values)| {
            let spec = match (c.lower, c.upper) {
                (Some(lo), Some(hi)) => BasisSpec::new(c.degree, lo, hi),
                (None, None) => BasisSpec::from_observed(c.degree, values.iter().copied()),
                _ => {
                    return Err(CliError::Config(format!(
                        "continuous column '{}' needs both lower and upper or neither",
                        c.name
                    )))
                }
            };
            spec.map_err(|e| CliError::Config(format!("continuous column '{}': {e}", c.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let dataset = Dataset::new(y, x, columns_to_array(n, w_cols), columns_to_array(n, z_cols))
        .map_err(|e| CliError::Data(format!("{}: {e}", table.path.display())))?;
    Ok(Assembled {
        dataset,
        specs,
        w_names: roles.categorical.clone(),
        z_names: roles.continuous.iter().map(|c| c.name.clone()).collect(),
        x_names,
        imputed,
    })
}

/// Genotype and phenotype tables joined on a shared id column.
#[derive(Debug, Clone)]
pub struct Joined {
    pub ids: Vec<String>,
    pub variant_names: Vec<String>,
    /// Genotypes with `NaN` for missing entries, rows in genotype-file order.
    pub genotypes: Array2<f64>,
    pub phenotype_headers: Vec<String>,
    /// Raw phenotype fields (without the id) aligned with `ids`.
    pub phenotype_rows: Vec<Vec<String>>,
    /// Phenotype file row index of every joined row.
    pub phenotype_index: Vec<usize>,
}

fn id_column(table: &Table, id: &str) -> Result<(usize, HashMap<String, usize>), CliError> {
    let col = require_column(table, id, "id")?;
    let mut index = HashMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        if index.insert(row[col].clone(), i).is_some() {
            return Err(table.schema_error(i, col, format!("duplicate id '{}'", row[col])));
        }
    }
    Ok((col, index))
}

fn list_ids(ids: &[&String]) -> String {
    const SHOWN: usize = 20;
    let head: Vec<&str> = ids.iter().take(SHOWN).map(|s| s.as_str()).collect();
    if ids.len() > SHOWN {
        format!("{} ... and {} more", head.join(", "), ids.len() - SHOWN)
    } else {
        head.join(", ")
    }
}

/// Joins on `id`; any id present in only one file is an error.
pub fn join(genotypes: &Table, phenotypes: &Table, id: &str) -> Result<Joined, CliError> {
    let (g_id, g_index) = id_column(genotypes, id)?;
    let (p_id, p_index) = id_column(phenotypes, id)?;
    let mut only_g: Vec<&String> = genotypes
        .rows
        .iter()
        .map(|r| &r[g_id])
        .filter(|k| !p_index.contains_key(*k))
        .collect();
    let mut only_p: Vec<&String> = phenotypes
        .rows
        .iter()
        .map(|r| &r[p_id])
        .filter(|k| !g_index.contains_key(*k))
        .collect();
    if !only_g.is_empty() || !only_p.is_empty() {
        only_g.sort();
        only_p.sort();
        let mut parts = Vec::new();
        if !only_g.is_empty() {
            parts.push(format!("ids only in {}: {}", genotypes.path.display(), list_ids(&only_g)));
        }
        if !only_p.is_empty() {
            parts.push(format!("ids only in {}: {}", phenotypes.path.display(), list_ids(&only_p)));
        }
        return Err(CliError::Data(format!("unmatched ids; {}", parts.join("; "))));
    }

    let variant_cols: Vec<usize> = (0..genotypes.headers.len()).filter(|&c| c != g_id).collect();
    let columns = variant_cols
        .iter()
        .map(|&c| Ok(genotypes.numeric(c)?.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()))
        .collect::<Result<Vec<Vec<f64>>, CliError>>()?;
    let n = genotypes.rows.len();
    let ids: Vec<String> = genotypes.rows.iter().map(|r| r[g_id].clone()).collect();
    let phenotype_index: Vec<usize> = ids.iter().map(|k| p_index[k]).collect();
    let keep = |row: &Vec<String>| -> Vec<String> {
        row.iter()
            .enumerate()
            .filter(|(c, _)| *c != p_id)
            .map(|(_, v)| v.clone())
            .collect()
    };
    Ok(Joined {
        variant_names: variant_cols.iter().map(|&c| genotypes.headers[c].clone()).collect(),
        genotypes: columns_to_array(n, columns),
        phenotype_headers: keep(&phenotypes.headers),
        phenotype_rows: phenotype_index.iter().map(|&i| keep(&phenotypes.rows[i])).collect(),
        phenotype_index,
        ids,
    })
}
