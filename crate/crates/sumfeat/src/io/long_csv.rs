//! Long (tidy) interchange format: one observation per line.
//!
//! Data CSV header: `instance_id,time,variable,value`. Absence is encoded by
//! the absence of a record, never by a sentinel value. Labels CSV header:
//! `instance_id,label`. Variable vocabulary files hold one name per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dataset::{LabeledDataset, TimeSeriesInstance};
use crate::error::{Error, Result};

/// One parsed observation record.
#[derive(Debug, Clone, PartialEq)]
pub struct LongFormatRecord {
    pub instance_id: String,
    pub time: f64,
    pub variable: String,
    pub value: f64,
}

/// A loaded dataset plus the non-fatal issues encountered along the way.
#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: LabeledDataset,
    pub warnings: Vec<String>,
}

struct RawRecord {
    time: f64,
    var: usize,
    value: f64,
    line: u64,
}

fn read_label_file(path: &Path) -> Result<(HashMap<String, usize>, usize)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut labels = HashMap::new();
    let mut max_label = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                path: path.into(),
                line,
                msg: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let label: i64 = record[1].trim().parse().map_err(|_| Error::Parse {
            path: path.into(),
            line,
            msg: format!("label '{}' is not an integer", &record[1]),
        })?;
        if label < 0 {
            return Err(Error::Parse {
                path: path.into(),
                line,
                msg: format!("label {label} must be non-negative"),
            });
        }
        max_label = max_label.max(label as usize);
        labels.insert(record[0].to_string(), label as usize);
    }
    Ok((labels, max_label))
}

/// Read every variable name in first-appearance order.
pub fn infer_vocabulary(data_path: &Path) -> Result<Vec<String>> {
    let file = File::open(data_path).map_err(|e| Error::io(data_path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut seen = HashMap::new();
    let mut vocab = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", data_path.display())))?;
        if record.len() >= 3 && !seen.contains_key(&record[2]) {
            seen.insert(record[2].to_string(), ());
            vocab.push(record[2].to_string());
        }
    }
    Ok(vocab)
}

/// Load the interchange pair (data + labels) into a dataset. Records are
/// grouped by instance in first-appearance order and sorted by time;
/// simultaneous observations of different variables share one row, and a
/// duplicate observation of the same variable at the same time keeps the
/// last value and emits a warning.
pub fn load_long_csv(
    data_path: &Path,
    labels_path: &Path,
    vocabulary: Option<&[String]>,
) -> Result<LoadedDataset> {
    let (labels_by_id, max_label) = read_label_file(labels_path)?;
    let vocab: Vec<String> = match vocabulary {
        Some(v) => v.to_vec(),
        None => infer_vocabulary(data_path)?,
    };
    let var_index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();

    let file = File::open(data_path).map_err(|e| Error::io(data_path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut warnings = Vec::new();

    let mut order: Vec<String> = Vec::new();
    let mut by_instance: HashMap<String, Vec<RawRecord>> = HashMap::new();
    let mut any_record = false;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", data_path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        any_record = true;
        if record.len() != 4 {
            return Err(Error::Parse {
                path: data_path.into(),
                line,
                msg: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        let time: f64 = record[1].trim().parse().map_err(|_| Error::Parse {
            path: data_path.into(),
            line,
            msg: format!("time '{}' is not numeric", &record[1]),
        })?;
        let Some(&var) = var_index.get(&record[2]) else {
            return Err(Error::Parse {
                path: data_path.into(),
                line,
                msg: format!(
                    "unknown variable '{}'; vocabulary: [{}]",
                    &record[2],
                    vocab.join(", ")
                ),
            });
        };
        let value: f64 = record[3].trim().parse().map_err(|_| Error::Parse {
            path: data_path.into(),
            line,
            msg: format!("value '{}' is not numeric", &record[3]),
        })?;
        if !value.is_finite() || !time.is_finite() {
            return Err(Error::Parse {
                path: data_path.into(),
                line,
                msg: "time and value must be finite".into(),
            });
        }
        if !by_instance.contains_key(&id) {
            order.push(id.clone());
        }
        by_instance
            .entry(id)
            .or_default()
            .push(RawRecord { time, var, value, line });
    }
    if !any_record {
        warnings.push(format!(
            "{}: no observation records; loading an empty dataset",
            data_path.display()
        ));
    }

    let d = vocab.len();
    let mut instances = Vec::with_capacity(order.len());
    let mut labels = Vec::with_capacity(order.len());
    for id in order {
        let Some(&label) = labels_by_id.get(&id) else {
            return Err(Error::Data(format!(
                "instance '{id}' has observations but no label in {}",
                labels_path.display()
            )));
        };
        let mut records = by_instance.remove(&id).unwrap();
        records.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());

        let mut timestamps: Vec<f64> = Vec::new();
        let mut cells: Vec<Option<f64>> = Vec::new();
        for r in records {
            let new_row = match timestamps.last() {
                Some(&t) => r.time > t,
                None => true,
            };
            if new_row {
                timestamps.push(r.time);
                cells.extend(std::iter::repeat(None).take(d));
            }
            let row = timestamps.len() - 1;
            let cell = &mut cells[row * d + r.var];
            if cell.is_some() {
                warnings.push(format!(
                    "{}:{}: duplicate observation of '{}' for instance '{id}' at time {}; keeping the last",
                    data_path.display(),
                    r.line,
                    vocab[r.var],
                    r.time
                ));
            }
            *cell = Some(r.value);
        }
        instances.push(TimeSeriesInstance::new(id, timestamps, cells, d)?);
        labels.push(label);
    }

    let n_classes = (max_label + 1).max(2);
    let dataset = LabeledDataset::new(instances, labels, d, n_classes, vocab)?;
    Ok(LoadedDataset { dataset, warnings })
}

/// Write a dataset back to the interchange pair. Times and values carry 17
/// significant digits so a reload reproduces the grids bit-exactly.
///
/// Rows that share a timestamp within one instance are merged by the loader,
/// so datasets that rely on distinct equal-time rows do not round-trip;
/// consolidating them is the ingester's contract.
pub fn save_long_csv(dataset: &LabeledDataset, data_path: &Path, labels_path: &Path) -> Result<()> {
    let data_file = File::create(data_path).map_err(|e| Error::io(data_path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(data_file));
    w.write_record(["instance_id", "time", "variable", "value"])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    let names = dataset.variable_names();
    for inst in dataset.instances() {
        for step in 0..inst.len() {
            for (var, name) in names.iter().enumerate() {
                if let Some(v) = inst.value(step, var) {
                    w.write_record([
                        inst.id(),
                        &format!("{:.16e}", inst.timestamps()[step]),
                        name,
                        &format!("{v:.16e}"),
                    ])
                    .map_err(|e| Error::Data(format!("csv write: {e}")))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::Data(format!("csv flush: {e}")))?;

    let labels_file = File::create(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(labels_file));
    w.write_record(["instance_id", "label"])
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    for (inst, &label) in dataset.instances().iter().zip(dataset.labels()) {
        w.write_record([inst.id(), &label.to_string()])
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv flush: {e}")))
}

pub fn save_variables(path: &Path, names: &[String]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for name in names {
        writeln!(w, "{name}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn load_variables(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut names = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            names.push(trimmed.to_string());
        }
    }
    Ok(names)
}
