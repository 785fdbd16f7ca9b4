//! Time-agnostic summary representation: four statistics per variable
//! (mean and standard deviation of observed values, mean and standard
//! deviation of changes between consecutive observations), concatenated
//! variable by variable into a fixed-size vector.
//!
//! The statistics depend only on the order of observations, never on the
//! timestamps themselves, and population normalization (divide by n, by
//! n-1 pairs) is used throughout.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::dataset::{GlobalStats, LabeledDataset, TimeSeriesInstance};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Statistic order within each per-variable block.
pub const STAT_NAMES: [&str; 4] = ["mean", "std", "dmean", "dstd"];

/// The 4 x D summary matrix for one instance, plus its flattened view in
/// variable-major order (all four statistics of variable 0, then variable 1,
/// and so on).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryFeatures {
    flat: Vec<f64>,
    n_vars: usize,
}

impl SummaryFeatures {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// `[mean, std, dmean, dstd]` for one variable.
    pub fn row(&self, var: usize) -> [f64; 4] {
        let b = 4 * var;
        [
            self.flat[b],
            self.flat[b + 1],
            self.flat[b + 2],
            self.flat[b + 3],
        ]
    }

    pub fn flattened(&self) -> &[f64] {
        &self.flat
    }
}

/// Four statistics from one variable's observed values, in time order.
///
/// Fallbacks: no observations -> (global mean, 0, 0, 0); one observation x
/// -> (x, 0, 0, 0). Deviations use the two-pass form with the radicand
/// clamped at zero so rounding can never produce NaN.
fn summarize_variable(observed: &[f64], fallback_mean: f64) -> [f64; 4] {
    match observed.len() {
        0 => [fallback_mean, 0.0, 0.0, 0.0],
        1 => [observed[0], 0.0, 0.0, 0.0],
        n => {
            let count = n as f64;
            let mean = observed.iter().sum::<f64>() / count;
            let sq = observed.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
            let std = (sq / count).max(0.0).sqrt();

            let pairs = (n - 1) as f64;
            let dsum: f64 = observed.windows(2).map(|w| w[1] - w[0]).sum();
            let dmean = dsum / pairs;
            let dsq: f64 = observed
                .windows(2)
                .map(|w| {
                    let d = w[1] - w[0] - dmean;
                    d * d
                })
                .sum();
            let dstd = (dsq / pairs).max(0.0).sqrt();
            [mean, std, dmean, dstd]
        }
    }
}

/// Compute the summary representation of one instance. `stats` supplies the
/// training-split fallback mean for variables the instance never observes.
pub fn extract(instance: &TimeSeriesInstance, stats: &GlobalStats) -> Result<SummaryFeatures> {
    let d = instance.n_vars();
    if stats.n_vars() != d {
        return Err(Error::Config(format!(
            "instance has {d} variables but global stats cover {}",
            stats.n_vars()
        )));
    }
    let mut flat = vec![0.0; 4 * d];
    let mut observed = Vec::with_capacity(instance.len());
    for var in 0..d {
        observed.clear();
        observed.extend(instance.observed_values(var));
        let row = summarize_variable(&observed, stats.variable_mean(var));
        flat[4 * var..4 * var + 4].copy_from_slice(&row);
    }
    Ok(SummaryFeatures { flat, n_vars: d })
}

/// Summary matrix for a whole dataset: row i is the flattened features of
/// instance i. Rows are computed in parallel into preassigned slots, so the
/// result does not depend on scheduling.
pub fn extract_dataset(data: &LabeledDataset, stats: &GlobalStats) -> Result<FeatureMatrix> {
    let d = data.n_vars();
    if stats.n_vars() != d {
        return Err(Error::Config(format!(
            "dataset has {d} variables but global stats cover {}",
            stats.n_vars()
        )));
    }
    let rows: Vec<Vec<f64>> = data
        .instances()
        .par_iter()
        .map(|inst| extract(inst, stats).map(|f| f.flat))
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return FeatureMatrix::from_vec(Vec::new(), 0, 4 * d);
    }
    FeatureMatrix::from_rows(&rows)
}

/// Column names for the flattened representation: `f_<var>_<stat>`.
pub fn feature_names(variable_names: &[String]) -> Vec<String> {
    let mut names = Vec::with_capacity(4 * variable_names.len());
    for var in variable_names {
        for stat in STAT_NAMES {
            names.push(format!("f_{var}_{stat}"));
        }
    }
    names
}

/// Write a feature matrix as CSV with an `id` column. Values are printed
/// with 17 significant digits so reading the file back reproduces every
/// f64 bit-exactly.
pub fn write_features_csv<W: Write>(
    writer: W,
    ids: &[String],
    names: &[String],
    features: &FeatureMatrix,
) -> Result<()> {
    if ids.len() != features.rows() || names.len() != features.cols() {
        return Err(Error::Config(format!(
            "features are {}x{} but {} ids / {} names were given",
            features.rows(),
            features.cols(),
            ids.len(),
            names.len()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(names.len() + 1);
    header.push("id".to_string());
    header.extend(names.iter().cloned());
    w.write_record(&header)
        .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    for (i, id) in ids.iter().enumerate() {
        let mut record = Vec::with_capacity(names.len() + 1);
        record.push(id.clone());
        for v in features.row(i) {
            record.push(format!("{v:.16e}"));
        }
        w.write_record(&record)
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv flush: {e}")))
}

/// Read back a feature CSV written by [`write_features_csv`].
pub fn read_features_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<String>, FeatureMatrix)> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| Error::Data(format!("csv header: {e}")))?
        .clone();
    if headers.is_empty() || &headers[0] != "id" {
        return Err(Error::Data(
            "feature csv must start with an 'id' column".into(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("csv record: {e}")))?;
        if record.len() != names.len() + 1 {
            return Err(Error::Data(format!(
                "feature csv row {} has {} fields, expected {}",
                line + 2,
                record.len(),
                names.len() + 1
            )));
        }
        ids.push(record[0].to_string());
        let mut row = Vec::with_capacity(names.len());
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|e| Error::Data(format!("feature csv row {}: {e}", line + 2)))?;
            row.push(v);
        }
        rows.push(row);
    }
    let matrix = if rows.is_empty() {
        FeatureMatrix::zeros(0, names.len())
    } else {
        FeatureMatrix::from_rows(&rows)?
    };
    Ok((ids, names, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TimeSeriesInstance;

    fn single_var_instance(ts: Vec<f64>, cells: Vec<Option<f64>>) -> TimeSeriesInstance {
        TimeSeriesInstance::new("t", ts, cells, 1).unwrap()
    }

    fn stats(means: Vec<f64>) -> GlobalStats {
        GlobalStats::from_means(means)
    }

    #[test]
    fn worked_example_three_observations() {
        // observations [1, 3, 6]: mean 10/3, std sqrt(38/9),
        // changes {2, 3}: dmean 2.5, dstd 0.5
        let inst = single_var_instance(
            vec![0.0, 1.0, 2.0],
            vec![Some(1.0), Some(3.0), Some(6.0)],
        );
        let f = extract(&inst, &stats(vec![0.0])).unwrap();
        let row = f.row(0);
        assert!((row[0] - 10.0 / 3.0).abs() < 1e-12);
        assert!((row[1] - (38.0f64 / 9.0).sqrt()).abs() < 1e-12);
        assert!((row[2] - 2.5).abs() < 1e-12);
        assert!((row[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fully_missing_variable_uses_global_mean() {
        let inst = single_var_instance(vec![0.0, 1.0], vec![None, None]);
        let f = extract(&inst, &stats(vec![7.25])).unwrap();
        assert_eq!(f.row(0), [7.25, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_observation_row() {
        let inst = single_var_instance(vec![0.0, 1.0, 2.0], vec![None, Some(4.2), None]);
        let f = extract(&inst, &stats(vec![0.0])).unwrap();
        assert_eq!(f.row(0), [4.2, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_variable_collapses() {
        let inst = single_var_instance(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![Some(5.0), Some(5.0), Some(5.0), Some(5.0)],
        );
        let f = extract(&inst, &stats(vec![0.0])).unwrap();
        assert_eq!(f.row(0), [5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let inst = single_var_instance(vec![0.0], vec![Some(1.0)]);
        assert!(matches!(
            extract(&inst, &stats(vec![0.0, 0.0])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn flattened_order_is_variable_major() {
        let inst = TimeSeriesInstance::new(
            "t",
            vec![0.0, 1.0],
            vec![Some(1.0), Some(10.0), Some(3.0), Some(20.0)],
            2,
        )
        .unwrap();
        let f = extract(&inst, &stats(vec![0.0, 0.0])).unwrap();
        let flat = f.flattened();
        assert_eq!(flat.len(), 8);
        assert_eq!(&flat[0..4], &f.row(0));
        assert_eq!(&flat[4..8], &f.row(1));
        assert!((f.row(0)[0] - 2.0).abs() < 1e-12);
        assert!((f.row(1)[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn dmean_telescopes_to_endpoints() {
        // with >= 2 observations, dmean == (last - first) / (n - 1)
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(2..30);
            let obs: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let row = summarize_variable(&obs, 0.0);
            let expect = (obs[n - 1] - obs[0]) / (n - 1) as f64;
            let denom = expect.abs().max(1e-30);
            assert!(
                ((row[2] - expect) / denom).abs() < 1e-12 || (row[2] - expect).abs() < 1e-12,
                "{} vs {}",
                row[2],
                expect
            );
        }
    }

    #[test]
    fn insertion_of_fully_missing_rows_is_invisible() {
        let a = single_var_instance(
            vec![0.0, 1.0, 2.0],
            vec![Some(1.0), Some(3.0), Some(6.0)],
        );
        let b = single_var_instance(
            vec![0.0, 0.5, 1.0, 1.0, 2.0],
            vec![Some(1.0), None, Some(3.0), None, Some(6.0)],
        );
        let s = stats(vec![0.0]);
        let fa = extract(&a, &s).unwrap();
        let fb = extract(&b, &s).unwrap();
        let bits = |f: &SummaryFeatures| -> Vec<u64> {
            f.flattened().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&fa), bits(&fb));
    }

    #[test]
    fn timestamps_do_not_enter_the_features() {
        let a = single_var_instance(vec![0.0, 1.0, 2.0], vec![Some(2.0), Some(4.0), Some(8.0)]);
        let b = single_var_instance(
            vec![100.0, 250.5, 1000.0],
            vec![Some(2.0), Some(4.0), Some(8.0)],
        );
        let s = stats(vec![0.0]);
        let fa = extract(&a, &s).unwrap();
        let fb = extract(&b, &s).unwrap();
        assert_eq!(
            fa.flattened().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            fb.flattened().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn dataset_extraction_preserves_row_order() {
        let i0 = single_var_instance(vec![0.0], vec![Some(1.0)]);
        let i1 = single_var_instance(vec![0.0], vec![Some(9.0)]);
        let ds = LabeledDataset::new(
            vec![i0.clone(), i1.clone()],
            vec![0, 1],
            1,
            2,
            vec!["v0".into()],
        )
        .unwrap();
        let s = stats(vec![0.0]);
        let m = extract_dataset(&ds, &s).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 4);
        assert_eq!(m.row(0), extract(&i0, &s).unwrap().flattened());
        assert_eq!(m.row(1), extract(&i1, &s).unwrap().flattened());

        let swapped = ds.subset(&[1, 0]).unwrap();
        let ms = extract_dataset(&swapped, &s).unwrap();
        assert_eq!(ms.row(0), m.row(1));
        assert_eq!(ms.row(1), m.row(0));
    }

    #[test]
    fn feature_names_follow_the_scheme() {
        let names = feature_names(&["hr".to_string(), "temp".to_string()]);
        assert_eq!(
            names,
            vec![
                "f_hr_mean",
                "f_hr_std",
                "f_hr_dmean",
                "f_hr_dstd",
                "f_temp_mean",
                "f_temp_std",
                "f_temp_dmean",
                "f_temp_dstd"
            ]
        );
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = FeatureMatrix::from_vec(
            vec![
                1.0 / 3.0,
                -2.5e-17,
                38.0f64.sqrt(),
                0.0,
                f64::MIN_POSITIVE,
                1e300,
            ],
            2,
            3,
        )
        .unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        let names = vec!["c0".to_string(), "c1".to_string(), "c2".to_string()];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &ids, &names, &m).unwrap();
        let (rids, rnames, rm) = read_features_csv(&buf[..]).unwrap();
        assert_eq!(rids, ids);
        assert_eq!(rnames, names);
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(rm.get(r, c).to_bits(), m.get(r, c).to_bits());
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn observed_strategy() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-1e3f64..1e3, 2..40)
        }

        proptest! {
            #[test]
            fn shift_moves_only_the_mean(obs in observed_strategy(), c in -100.0f64..100.0) {
                let base = summarize_variable(&obs, 0.0);
                let shifted: Vec<f64> = obs.iter().map(|x| x + c).collect();
                let moved = summarize_variable(&shifted, 0.0);
                prop_assert!((moved[0] - (base[0] + c)).abs() < 1e-7);
                prop_assert!((moved[1] - base[1]).abs() < 1e-7);
                prop_assert!((moved[2] - base[2]).abs() < 1e-7);
                prop_assert!((moved[3] - base[3]).abs() < 1e-7);
            }

            #[test]
            fn scaling_scales_statistics(obs in observed_strategy(), s in -8.0f64..8.0) {
                let base = summarize_variable(&obs, 0.0);
                let scaled: Vec<f64> = obs.iter().map(|x| x * s).collect();
                let got = summarize_variable(&scaled, 0.0);
                let tol = 1e-6 * (1.0 + s.abs());
                prop_assert!((got[0] - s * base[0]).abs() < tol);
                prop_assert!((got[1] - s.abs() * base[1]).abs() < tol);
                prop_assert!((got[2] - s * base[2]).abs() < tol);
                prop_assert!((got[3] - s.abs() * base[3]).abs() < tol);
            }

            #[test]
            fn deviations_never_negative(obs in observed_strategy()) {
                let row = summarize_variable(&obs, 0.0);
                prop_assert!(row[1] >= 0.0);
                prop_assert!(row[3] >= 0.0);
                prop_assert!(row.iter().all(|v| v.is_finite()));
            }
        }
    }
}
