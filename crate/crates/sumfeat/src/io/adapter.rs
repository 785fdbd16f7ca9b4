//! Adapter from per-patient wide delimited files (one file per instance,
//! one row per time step) to the long interchange format. The adapter never
//! downloads anything; it converts files that are already on disk, driven by
//! a plain-text spec that names the column roles.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::long_csv::save_variables;

/// How per-row label flags become one instance label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// Instance label 1 if the label column is positive in any row.
    AnyPositive,
}

/// Parsed adapter spec. Plain-text format, one `key = value` per line,
/// `#` comments allowed:
///
/// ```text
/// delimiter = |
/// time_column = ICULOS
/// label_column = SepsisLabel
/// label_rule = any-positive
/// drop_columns = Age, Gender, Unit1, Unit2, HospAdmTime
/// exclude_instances = p00007, p00019
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub delimiter: u8,
    pub time_column: String,
    pub label_column: String,
    pub label_rule: LabelRule,
    pub drop_columns: Vec<String>,
    pub exclude_instances: Vec<String>,
}

pub fn parse_adapter_spec(path: &Path) -> Result<AdapterSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut keys: HashMap<String, String> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.into(),
                line: lineno as u64 + 1,
                msg: "expected 'key = value'".into(),
            });
        };
        keys.insert(key.trim().to_string(), value.trim().to_string());
    }
    let required = |key: &str| -> Result<String> {
        keys.get(key).cloned().ok_or_else(|| {
            Error::Data(format!("{}: missing required key '{key}'", path.display()))
        })
    };
    let delimiter_str = keys
        .get("delimiter")
        .cloned()
        .unwrap_or_else(|| ",".to_string());
    if delimiter_str.len() != 1 {
        return Err(Error::Data(format!(
            "{}: delimiter must be a single character",
            path.display()
        )));
    }
    let label_rule = match keys.get("label_rule").map(String::as_str) {
        None | Some("any-positive") => LabelRule::AnyPositive,
        Some(other) => {
            return Err(Error::Data(format!(
                "{}: unknown label_rule '{other}'",
                path.display()
            )))
        }
    };
    let list = |key: &str| -> Vec<String> {
        keys.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    };
    Ok(AdapterSpec {
        delimiter: delimiter_str.as_bytes()[0],
        time_column: required("time_column")?,
        label_column: required("label_column")?,
        label_rule,
        drop_columns: list("drop_columns"),
        exclude_instances: list("exclude_instances"),
    })
}

#[derive(Debug)]
pub struct AdaptSummary {
    pub instances_written: usize,
    /// Instance ids rejected without failing the run (header-only files,
    /// explicit exclusions), with the reason.
    pub skipped: Vec<String>,
    pub variables: Vec<String>,
}

struct InstanceRows {
    id: String,
    /// (time, variable index, value), in row order.
    observations: Vec<(f64, usize, f64)>,
    label: usize,
}

fn is_absent(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("nan") || t == "NA"
}

fn convert_file(
    path: &Path,
    spec: &AdapterSpec,
    expected_vars: &mut Option<Vec<String>>,
) -> Result<Option<InstanceRows>> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();

    let mut time_col = None;
    let mut label_col = None;
    let mut var_cols: Vec<(usize, String)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if name == spec.time_column {
            time_col = Some(i);
        } else if name == spec.label_column {
            label_col = Some(i);
        } else if !spec.drop_columns.iter().any(|d| d == name) {
            var_cols.push((i, name.to_string()));
        }
    }
    let time_col = time_col.ok_or_else(|| {
        Error::Data(format!(
            "{}: time column '{}' not found",
            path.display(),
            spec.time_column
        ))
    })?;
    let label_col = label_col.ok_or_else(|| {
        Error::Data(format!(
            "{}: label column '{}' not found",
            path.display(),
            spec.label_column
        ))
    })?;

    let names: Vec<String> = var_cols.iter().map(|(_, n)| n.clone()).collect();
    match expected_vars {
        Some(expected) => {
            if *expected != names {
                return Err(Error::Data(format!(
                    "{}: variable columns differ from the first file",
                    path.display()
                )));
            }
        }
        None => *expected_vars = Some(names),
    }

    let mut observations = Vec::new();
    let mut positive = false;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        rows += 1;
        let time: f64 = record
            .get(time_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Parse {
                path: path.into(),
                line,
                msg: format!("time '{}' is not numeric", record.get(time_col).unwrap_or("")),
            })?;
        let label_field = record.get(label_col).unwrap_or("").trim();
        if !is_absent(label_field) {
            let flag: f64 = label_field.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                msg: format!("label '{label_field}' is not numeric"),
            })?;
            if flag != 0.0 {
                positive = true;
            }
        }
        for (slot, (col, _)) in var_cols.iter().enumerate() {
            let field = record.get(*col).unwrap_or("");
            if is_absent(field) {
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                msg: format!("value '{field}' is not numeric"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("value {value} is not finite"),
                });
            }
            observations.push((time, slot, value));
        }
    }
    if rows == 0 {
        return Ok(None); // header-only file: reject the instance, not the run
    }
    let label = match spec.label_rule {
        LabelRule::AnyPositive => usize::from(positive),
    };
    Ok(Some(InstanceRows {
        id,
        observations,
        label,
    }))
}

/// Convert every regular file in `input_dir` (path-sorted) into the
/// interchange triple `data.csv` / `labels.csv` / `variables.txt` under
/// `out_dir`. Any malformed row fails the whole run before anything is
/// written; header-only files and excluded ids are skipped with a note.
pub fn adapt_directory(input_dir: &Path, spec: &AdapterSpec, out_dir: &Path) -> Result<AdaptSummary> {
    let entries = std::fs::read_dir(input_dir).map_err(|e| Error::io(input_dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(input_dir, e))?;
        let path = entry.path();
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "{}: no input files found",
            input_dir.display()
        )));
    }

    let mut converted: Vec<InstanceRows> = Vec::new();
    let mut skipped = Vec::new();
    let mut errors: Vec<String> = Vec::new();
    let mut expected_vars: Option<Vec<String>> = None;
    for path in &paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if spec.exclude_instances.iter().any(|e| e == &stem) {
            skipped.push(format!("{stem}: excluded by spec"));
            continue;
        }
        match convert_file(path, spec, &mut expected_vars) {
            Ok(Some(inst)) => converted.push(inst),
            Ok(None) => skipped.push(format!("{stem}: no data rows")),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Data(format!(
            "{} file(s) failed conversion; no output written:\n  {}",
            errors.len(),
            errors.join("\n  ")
        )));
    }
    if converted.is_empty() {
        return Err(Error::Data(
            "all input files were rejected; no output written".into(),
        ));
    }
    let variables = expected_vars.unwrap_or_default();

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let data_path = out_dir.join("data.csv");
    let labels_path = out_dir.join("labels.csv");
    let vars_path = out_dir.join("variables.txt");

    let data_file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(data_file));
    w.write_record(["instance_id", "time", "variable", "value"])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    for inst in &converted {
        for &(time, var, value) in &inst.observations {
            w.write_record([
                inst.id.as_str(),
                &format!("{time}"),
                &variables[var],
                &format!("{value}"),
            ])
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
        }
    }
    w.flush().map_err(|e| Error::Data(format!("csv flush: {e}")))?;

    let labels_file = File::create(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(labels_file));
    w.write_record(["instance_id", "label"])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    for inst in &converted {
        w.write_record([inst.id.as_str(), &inst.label.to_string()])
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv flush: {e}")))?;

    save_variables(&vars_path, &variables)?;

    Ok(AdaptSummary {
        instances_written: converted.len(),
        skipped,
        variables,
    })
}
