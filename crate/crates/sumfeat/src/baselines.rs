//! Comparison representations built from the raw value grid: three imputers
//! (training-split mean, forward fill, linear interpolation in time), the
//! zero-prepended padded representation that stacks values with timestamps,
//! and the mask-only representation.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{compute_global_stats, GlobalStats, LabeledDataset, Standardizer, TimeSeriesInstance};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::summary;

fn check_vars(instance: &TimeSeriesInstance, stats: &GlobalStats) -> Result<()> {
    if instance.n_vars() != stats.n_vars() {
        return Err(Error::Config(format!(
            "instance has {} variables but global stats cover {}",
            instance.n_vars(),
            stats.n_vars()
        )));
    }
    Ok(())
}

/// Replace every absent cell of variable d with the training-split mean of d.
/// Returns a complete L x D grid, row-major.
pub fn impute_mean(instance: &TimeSeriesInstance, stats: &GlobalStats) -> Result<Vec<f64>> {
    check_vars(instance, stats)?;
    let d = instance.n_vars();
    let mut grid = vec![0.0; instance.len() * d];
    for step in 0..instance.len() {
        for var in 0..d {
            grid[step * d + var] = instance
                .value(step, var)
                .unwrap_or_else(|| stats.variable_mean(var));
        }
    }
    Ok(grid)
}

/// Carry the most recent observed value forward; cells before the first
/// observation fall back to the training-split mean.
pub fn impute_forward(instance: &TimeSeriesInstance, stats: &GlobalStats) -> Result<Vec<f64>> {
    check_vars(instance, stats)?;
    let d = instance.n_vars();
    let mut grid = vec![0.0; instance.len() * d];
    for var in 0..d {
        let mut carry: Option<f64> = None;
        for step in 0..instance.len() {
            if let Some(v) = instance.value(step, var) {
                carry = Some(v);
            }
            grid[step * d + var] = carry.unwrap_or_else(|| stats.variable_mean(var));
        }
    }
    Ok(grid)
}

/// Fill interior gaps by connecting the nearest observations before and after
/// in *time* (using the timestamp column, not the row index). Leading and
/// trailing gaps hold the nearest observed value; a variable with a single
/// observation takes that value everywhere; a fully missing variable takes
/// the training-split mean.
pub fn impute_linear(instance: &TimeSeriesInstance, stats: &GlobalStats) -> Result<Vec<f64>> {
    check_vars(instance, stats)?;
    let d = instance.n_vars();
    let steps = instance.len();
    let ts = instance.timestamps();
    let mut grid = vec![0.0; steps * d];
    let mut obs: Vec<(usize, f64)> = Vec::new();
    for var in 0..d {
        obs.clear();
        obs.extend((0..steps).filter_map(|i| instance.value(i, var).map(|v| (i, v))));
        match obs.len() {
            0 => {
                let m = stats.variable_mean(var);
                for step in 0..steps {
                    grid[step * d + var] = m;
                }
            }
            1 => {
                let v = obs[0].1;
                for step in 0..steps {
                    grid[step * d + var] = v;
                }
            }
            _ => {
                let first = obs[0];
                let last = obs[obs.len() - 1];
                let mut next = 0usize; // index into obs of the next observation at or after `step`
                for step in 0..steps {
                    if let Some(v) = instance.value(step, var) {
                        grid[step * d + var] = v;
                        continue;
                    }
                    if step < first.0 {
                        grid[step * d + var] = first.1;
                        continue;
                    }
                    if step > last.0 {
                        grid[step * d + var] = last.1;
                        continue;
                    }
                    while obs[next].0 < step {
                        next += 1;
                    }
                    let (i1, v1) = obs[next];
                    let (i0, v0) = obs[next - 1];
                    let (t0, t1) = (ts[i0], ts[i1]);
                    grid[step * d + var] = if t1 > t0 {
                        v0 + (v1 - v0) * (ts[step] - t0) / (t1 - t0)
                    } else {
                        // duplicate timestamps bracket the gap; hold the earlier value
                        v0
                    };
                }
            }
        }
    }
    Ok(grid)
}

/// Padded value-plus-timestamp representation of one instance:
/// `l_max` rows by `D + 1` columns (timestamp last), flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedRepresentation {
    flat: Vec<f64>,
    l_max: usize,
    width: usize,
}

impl PaddedRepresentation {
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Columns per row: D variables plus the timestamp.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn flattened(&self) -> &[f64] {
        &self.flat
    }

    pub fn row(&self, step: usize) -> &[f64] {
        &self.flat[step * self.width..(step + 1) * self.width]
    }
}

/// Pad/trim a (possibly still incomplete) grid to `l_max` rows: zero rows are
/// prepended, and instances longer than `l_max` lose their earliest steps.
/// The timestamp column is appended as the last column, padded with zeros.
pub fn build_padded(
    instance: &TimeSeriesInstance,
    grid: &[f64],
    l_max: usize,
) -> Result<PaddedRepresentation> {
    if l_max == 0 {
        return Err(Error::Config("padding length must be positive".into()));
    }
    let d = instance.n_vars();
    let steps = instance.len();
    if grid.len() != steps * d {
        return Err(Error::Config(format!(
            "grid has {} cells for a {} x {} instance",
            grid.len(),
            steps,
            d
        )));
    }
    let width = d + 1;
    let kept = steps.min(l_max);
    let skip = steps - kept;
    let offset = l_max - kept;
    let mut flat = vec![0.0; l_max * width];
    for j in 0..kept {
        let src = skip + j;
        let dst = offset + j;
        flat[dst * width..dst * width + d].copy_from_slice(&grid[src * d..(src + 1) * d]);
        flat[dst * width + d] = instance.timestamps()[src];
    }
    Ok(PaddedRepresentation { flat, l_max, width })
}

/// Mask-only representation: the observation indicator grid padded/trimmed
/// exactly like [`build_padded`] but without the timestamp column.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRepresentation {
    flat: Vec<f64>,
    l_max: usize,
    n_vars: usize,
}

impl MaskRepresentation {
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn flattened(&self) -> &[f64] {
        &self.flat
    }

    pub fn row(&self, step: usize) -> &[f64] {
        &self.flat[step * self.n_vars..(step + 1) * self.n_vars]
    }
}

pub fn build_mask_representation(
    instance: &TimeSeriesInstance,
    l_max: usize,
) -> Result<MaskRepresentation> {
    if l_max == 0 {
        return Err(Error::Config("padding length must be positive".into()));
    }
    let d = instance.n_vars();
    let steps = instance.len();
    let kept = steps.min(l_max);
    let skip = steps - kept;
    let offset = l_max - kept;
    let mut flat = vec![0.0; l_max * d];
    for j in 0..kept {
        let src = skip + j;
        let dst = offset + j;
        for var in 0..d {
            flat[dst * d + var] = if instance.observed(src, var) { 1.0 } else { 0.0 };
        }
    }
    Ok(MaskRepresentation {
        flat,
        l_max,
        n_vars: d,
    })
}

/// Which fixed-size representation feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReprKind {
    /// Four summary statistics per variable.
    Summary,
    /// Padded values with absent cells preserved (for heads that route
    /// missing values natively), stacked with timestamps.
    Raw,
    /// Padded grid after training-split mean imputation.
    MeanImp,
    /// Padded grid after forward-fill imputation.
    ForwardImp,
    /// Padded grid after linear-in-time interpolation.
    LinearImp,
    /// Observation mask only.
    Mask,
}

impl ReprKind {
    pub const ALL: [ReprKind; 6] = [
        ReprKind::Summary,
        ReprKind::Raw,
        ReprKind::MeanImp,
        ReprKind::ForwardImp,
        ReprKind::LinearImp,
        ReprKind::Mask,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            ReprKind::Summary => "summary",
            ReprKind::Raw => "raw",
            ReprKind::MeanImp => "mean-imp",
            ReprKind::ForwardImp => "forward-imp",
            ReprKind::LinearImp => "linear-imp",
            ReprKind::Mask => "mask",
        }
    }

    fn is_padded_value_repr(&self) -> bool {
        matches!(
            self,
            ReprKind::Raw | ReprKind::MeanImp | ReprKind::ForwardImp | ReprKind::LinearImp
        )
    }
}

impl fmt::Display for ReprKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ReprKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReprKind::ALL
            .iter()
            .copied()
            .find(|k| k.token() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown representation '{s}' (expected one of summary, raw, mean-imp, forward-imp, linear-imp, mask)"
                ))
            })
    }
}

/// A representation fitted on a training split: fallback means, padding
/// length, and (for the padded value representations) the per-column scaler.
/// Nothing in here may depend on test data.
#[derive(Debug, Clone)]
pub struct FittedRepr {
    kind: ReprKind,
    stats: GlobalStats,
    l_max: usize,
    scaler: Option<Standardizer>,
    feature_names: Vec<String>,
}

impl FittedRepr {
    pub fn kind(&self) -> ReprKind {
        self.kind
    }

    pub fn global_stats(&self) -> &GlobalStats {
        &self.stats
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn scaler(&self) -> Option<&Standardizer> {
        self.scaler.as_ref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Apply the fitted transform to any dataset with the same variables.
    pub fn transform(&self, data: &LabeledDataset) -> Result<FeatureMatrix> {
        let m = build_unscaled(self.kind, data, &self.stats, self.l_max)?;
        match &self.scaler {
            Some(s) => s.transform(&m),
            None => Ok(m),
        }
    }
}

/// Fit a representation on the training split and return it together with
/// the transformed training matrix.
pub fn fit_representation(
    kind: ReprKind,
    train: &LabeledDataset,
) -> Result<(FittedRepr, FeatureMatrix)> {
    let stats = compute_global_stats(train)?;
    let l_max = train.max_len().max(1);
    let m = build_unscaled(kind, train, &stats, l_max)?;
    let scaler = if kind.is_padded_value_repr() {
        Some(Standardizer::fit(&m))
    } else {
        None
    };
    let transformed = match &scaler {
        Some(s) => s.transform(&m)?,
        None => m,
    };
    let feature_names = representation_names(kind, train.variable_names(), l_max);
    Ok((
        FittedRepr {
            kind,
            stats,
            l_max,
            scaler,
            feature_names,
        },
        transformed,
    ))
}

fn build_unscaled(
    kind: ReprKind,
    data: &LabeledDataset,
    stats: &GlobalStats,
    l_max: usize,
) -> Result<FeatureMatrix> {
    match kind {
        ReprKind::Summary => summary::extract_dataset(data, stats),
        ReprKind::Mask => {
            let rows: Vec<Vec<f64>> = data
                .instances()
                .iter()
                .map(|inst| build_mask_representation(inst, l_max).map(|m| m.flat))
                .collect::<Result<_>>()?;
            if rows.is_empty() {
                return Ok(FeatureMatrix::zeros(0, l_max * data.n_vars()));
            }
            FeatureMatrix::from_rows(&rows)
        }
        _ => {
            let rows: Vec<Vec<f64>> = data
                .instances()
                .iter()
                .map(|inst| {
                    let grid = match kind {
                        ReprKind::Raw => instance_grid_with_nan(inst),
                        ReprKind::MeanImp => impute_mean(inst, stats)?,
                        ReprKind::ForwardImp => impute_forward(inst, stats)?,
                        ReprKind::LinearImp => impute_linear(inst, stats)?,
                        _ => unreachable!(),
                    };
                    build_padded(inst, &grid, l_max).map(|p| p.flat)
                })
                .collect::<Result<_>>()?;
            if rows.is_empty() {
                return Ok(FeatureMatrix::zeros(0, l_max * (data.n_vars() + 1)));
            }
            FeatureMatrix::from_rows(&rows)
        }
    }
}

fn instance_grid_with_nan(instance: &TimeSeriesInstance) -> Vec<f64> {
    instance.values_with_nan().to_vec()
}

fn representation_names(kind: ReprKind, variable_names: &[String], l_max: usize) -> Vec<String> {
    match kind {
        ReprKind::Summary => summary::feature_names(variable_names),
        ReprKind::Mask => {
            let mut names = Vec::with_capacity(l_max * variable_names.len());
            for step in 0..l_max {
                for var in variable_names {
                    names.push(format!("m_{step}_{var}"));
                }
            }
            names
        }
        _ => {
            let mut names = Vec::with_capacity(l_max * (variable_names.len() + 1));
            for step in 0..l_max {
                for var in variable_names {
                    names.push(format!("x_{step}_{var}"));
                }
                names.push(format!("x_{step}_time"));
            }
            names
        }
    }
}

const PADDED_CACHE_MAGIC: &[u8; 4] = b"SFPC";
const PADDED_CACHE_VERSION: u16 = 1;

/// Cache a padded feature matrix to a version-tagged binary file.
/// Layout: magic "SFPC", u16 version, u64 rows, u64 cols, then the values as
/// little-endian f64 in column-major order.
pub fn write_padded_cache(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    emit(PADDED_CACHE_MAGIC)?;
    emit(&PADDED_CACHE_VERSION.to_le_bytes())?;
    emit(&(m.rows() as u64).to_le_bytes())?;
    emit(&(m.cols() as u64).to_le_bytes())?;
    for c in 0..m.cols() {
        for r in 0..m.rows() {
            emit(&m.get(r, c).to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_padded_cache(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != PADDED_CACHE_MAGIC {
        return Err(Error::Data(format!(
            "{}: not a padded-representation cache",
            path.display()
        )));
    }
    let mut u16buf = [0u8; 2];
    r.read_exact(&mut u16buf).map_err(|e| Error::io(path, e))?;
    let version = u16::from_le_bytes(u16buf);
    if version != PADDED_CACHE_VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported cache version {version}",
            path.display()
        )));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
    let rows = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
    let cols = u64::from_le_bytes(u64buf) as usize;
    let mut m = FeatureMatrix::zeros(rows, cols);
    let mut f64buf = [0u8; 8];
    for c in 0..cols {
        for row in 0..rows {
            r.read_exact(&mut f64buf).map_err(|e| Error::io(path, e))?;
            m.set(row, c, f64::from_le_bytes(f64buf));
        }
    }
    Ok(m)
}
