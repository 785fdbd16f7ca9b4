//! Core domain types: irregular time-series instances with explicit
//! missingness masks, labeled datasets, and the training-split statistics
//! (per-variable fallback means, per-column scalers) that every downstream
//! representation relies on.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// One time-series segment: `len()` time steps by `n_vars()` variables.
///
/// The value grid stores NaN at masked-out cells, but all logic goes through
/// the mask; NaN is a storage marker, never a sentinel that gets compared.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesInstance {
    id: String,
    timestamps: Vec<f64>,
    values: Vec<f64>,
    mask: Vec<bool>,
    n_vars: usize,
}

impl TimeSeriesInstance {
    /// Build an instance from per-cell optional observations in row-major
    /// order. Timestamps must be finite and non-decreasing; observed values
    /// must be finite.
    pub fn new(
        id: impl Into<String>,
        timestamps: Vec<f64>,
        cells: Vec<Option<f64>>,
        n_vars: usize,
    ) -> Result<Self> {
        let id = id.into();
        let steps = timestamps.len();
        if cells.len() != steps * n_vars {
            return Err(Error::Data(format!(
                "instance {id}: {} cells for {} steps x {} variables",
                cells.len(),
                steps,
                n_vars
            )));
        }
        for w in timestamps.windows(2) {
            if !(w[1] >= w[0]) {
                return Err(Error::Data(format!(
                    "instance {id}: timestamps must be non-decreasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Data(format!(
                "instance {id}: non-finite timestamp"
            )));
        }
        let mut values = Vec::with_capacity(cells.len());
        let mut mask = Vec::with_capacity(cells.len());
        for (i, cell) in cells.into_iter().enumerate() {
            match cell {
                Some(v) => {
                    if !v.is_finite() {
                        return Err(Error::Data(format!(
                            "instance {id}: non-finite observation at cell {i}"
                        )));
                    }
                    values.push(v);
                    mask.push(true);
                }
                None => {
                    values.push(f64::NAN);
                    mask.push(false);
                }
            }
        }
        Ok(TimeSeriesInstance {
            id,
            timestamps,
            values,
            mask,
            n_vars,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Number of time steps (L).
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    #[inline]
    pub fn observed(&self, step: usize, var: usize) -> bool {
        self.mask[step * self.n_vars + var]
    }

    /// Observed value, or None when the cell is masked out.
    #[inline]
    pub fn value(&self, step: usize, var: usize) -> Option<f64> {
        if self.observed(step, var) {
            Some(self.values[step * self.n_vars + var])
        } else {
            None
        }
    }

    /// Raw grid with NaN at absent cells, row-major.
    pub fn values_with_nan(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Observed values of one variable in time order.
    pub fn observed_values(&self, var: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).filter_map(move |i| self.value(i, var))
    }

    pub fn observed_count(&self, var: usize) -> usize {
        (0..self.len()).filter(|&i| self.observed(i, var)).count()
    }
}

/// A collection of instances with one integer class label each.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    instances: Vec<TimeSeriesInstance>,
    labels: Vec<usize>,
    n_vars: usize,
    n_classes: usize,
    variable_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        instances: Vec<TimeSeriesInstance>,
        labels: Vec<usize>,
        n_vars: usize,
        n_classes: usize,
        variable_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != instances.len() {
            return Err(Error::Data(format!(
                "{} labels for {} instances",
                labels.len(),
                instances.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::Data(format!(
                "num_classes must be >= 2, got {n_classes}"
            )));
        }
        if variable_names.len() != n_vars {
            return Err(Error::Data(format!(
                "{} variable names for {} variables",
                variable_names.len(),
                n_vars
            )));
        }
        for inst in &instances {
            if inst.n_vars() != n_vars {
                return Err(Error::Data(format!(
                    "instance {} has {} variables, dataset declares {}",
                    inst.id(),
                    inst.n_vars(),
                    n_vars
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(LabeledDataset {
            instances,
            labels,
            n_vars,
            n_classes,
            variable_names,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[TimeSeriesInstance] {
        &self.instances
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// Longest instance, in steps. Zero for an empty dataset.
    pub fn max_len(&self) -> usize {
        self.instances.iter().map(|i| i.len()).max().unwrap_or(0)
    }

    /// Clone out the rows selected by `indices`, preserving order.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let mut instances = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let inst = self
                .instances
                .get(i)
                .ok_or_else(|| Error::Config(format!("subset index {i} out of range")))?;
            instances.push(inst.clone());
            labels.push(self.labels[i]);
        }
        Ok(LabeledDataset {
            instances,
            labels,
            n_vars: self.n_vars,
            n_classes: self.n_classes,
            variable_names: self.variable_names.clone(),
        })
    }

    /// SHA-256 over a canonical byte serialization; used to stamp reports so
    /// two runs on different inputs can never be confused.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.instances.len() as u64).to_le_bytes());
        hasher.update((self.n_vars as u64).to_le_bytes());
        hasher.update((self.n_classes as u64).to_le_bytes());
        for name in &self.variable_names {
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
        }
        for (inst, &label) in self.instances.iter().zip(&self.labels) {
            hasher.update((inst.id().len() as u64).to_le_bytes());
            hasher.update(inst.id().as_bytes());
            hasher.update((label as u64).to_le_bytes());
            hasher.update((inst.len() as u64).to_le_bytes());
            for t in inst.timestamps() {
                hasher.update(t.to_bits().to_le_bytes());
            }
            for step in 0..inst.len() {
                for var in 0..inst.n_vars() {
                    match inst.value(step, var) {
                        Some(v) => {
                            hasher.update([1u8]);
                            hasher.update(v.to_bits().to_le_bytes());
                        }
                        None => hasher.update([0u8; 9]),
                    }
                }
            }
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Per-variable means over all observed values in a training split.
///
/// These are the fallback values substituted when an instance never observes
/// a variable. Variables with zero observations anywhere in the split get 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    variable_means: Vec<f64>,
}

impl GlobalStats {
    pub fn from_means(variable_means: Vec<f64>) -> Self {
        GlobalStats { variable_means }
    }

    pub fn n_vars(&self) -> usize {
        self.variable_means.len()
    }

    pub fn variable_mean(&self, var: usize) -> f64 {
        self.variable_means[var]
    }

    pub fn variable_means(&self) -> &[f64] {
        &self.variable_means
    }
}

/// Pool every observed value of each variable across the training split and
/// take the mean. Deterministic: accumulation follows instance order.
pub fn compute_global_stats(train: &LabeledDataset) -> Result<GlobalStats> {
    if train.is_empty() {
        return Err(Error::Config(
            "cannot compute global statistics on an empty training split".into(),
        ));
    }
    let d = train.n_vars();
    let mut sums = vec![0.0f64; d];
    let mut counts = vec![0u64; d];
    for inst in train.instances() {
        for step in 0..inst.len() {
            for var in 0..d {
                if let Some(v) = inst.value(step, var) {
                    sums[var] += v;
                    counts[var] += 1;
                }
            }
        }
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    Ok(GlobalStats {
        variable_means: means,
    })
}

/// Per-column standardizer fitted on a training-fold matrix.
///
/// Fitting skips absent (NaN) entries; columns with no finite entries or zero
/// spread are flagged and map to 0 instead of dividing by zero. Transforming
/// preserves absent entries as absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
    zero_std: Vec<bool>,
}

impl Standardizer {
    pub fn fit(m: &FeatureMatrix) -> Self {
        let cols = m.cols();
        let mut means = vec![0.0; cols];
        let mut stds = vec![0.0; cols];
        let mut zero_std = vec![false; cols];
        for c in 0..cols {
            let mut sum = 0.0;
            let mut count = 0u64;
            for r in 0..m.rows() {
                let v = m.get(r, c);
                if v.is_finite() {
                    sum += v;
                    count += 1;
                }
            }
            if count == 0 {
                zero_std[c] = true;
                continue;
            }
            let mean = sum / count as f64;
            let mut sq = 0.0;
            for r in 0..m.rows() {
                let v = m.get(r, c);
                if v.is_finite() {
                    sq += (v - mean) * (v - mean);
                }
            }
            let std = (sq / count as f64).max(0.0).sqrt();
            means[c] = mean;
            if std <= f64::EPSILON * mean.abs().max(1.0) {
                zero_std[c] = true;
            } else {
                stds[c] = std;
            }
        }
        Standardizer {
            means,
            stds,
            zero_std,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.cols() != self.n_cols() {
            return Err(Error::Config(format!(
                "standardizer fitted on {} columns, input has {}",
                self.n_cols(),
                m.cols()
            )));
        }
        let mut out = m.clone();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let v = m.get(r, c);
                let s = if v.is_nan() {
                    f64::NAN
                } else if self.zero_std[c] {
                    0.0
                } else {
                    (v - self.means[c]) / self.stds[c]
                };
                out.set(r, c, s);
            }
        }
        Ok(out)
    }
}
