//! Datasets of `(context, realization)` samples indexed by day and slot.

mod config;
mod lag;
mod synthetic;

pub use config::{ConfigError, DataFormat, RunConfig, SplitMode};
pub use lag::{build_lag_features, RawSeries, LAG_FEATURES};
pub use synthetic::{generate_series, generate_synthetic, SyntheticSpec};

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("cannot access {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    ParseError { line: u64, column: String, value: String },
    #[error("line {line}, column `{column}`: missing value")]
    MissingValue { line: u64, column: String },
    #[error("header mismatch at column `{column}`: expected `{expected}`")]
    SchemaMismatch { column: String, expected: String },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("day {day} has {found} slots, expected {expected}")]
    Ragged { day: usize, found: usize, expected: usize },
    #[error("need at least {needed} days of history, found {found}")]
    InsufficientHistory { needed: usize, found: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub day: usize,
    pub slot: usize,
    pub features: Vec<f64>,
    pub y: f64,
}

/// A rectangular panel of samples: every day present has the same slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, samples: Vec<Sample>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateFeature(name.clone()));
            }
        }
        for s in &samples {
            if s.features.len() != feature_names.len() {
                return Err(DataError::Invalid(format!(
                    "sample (day {}, slot {}) has {} features, expected {}",
                    s.day,
                    s.slot,
                    s.features.len(),
                    feature_names.len()
                )));
            }
            if !s.y.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Invalid(format!("non-finite value at day {}, slot {}", s.day, s.slot)));
            }
        }
        let d = Self { feature_names, samples };
        d.check_panel()?;
        Ok(d)
    }

    fn check_panel(&self) -> Result<(), DataError> {
        let mut per_day: BTreeMap<usize, HashSet<usize>> = BTreeMap::new();
        for s in &self.samples {
            if !per_day.entry(s.day).or_default().insert(s.slot) {
                return Err(DataError::Invalid(format!("duplicate sample at day {}, slot {}", s.day, s.slot)));
            }
        }
        let mut expected = None;
        for (day, slots) in per_day {
            let e = *expected.get_or_insert(slots.len());
            if slots.len() != e {
                return Err(DataError::Ragged { day, found: slots.len(), expected: e });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn days(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.samples.iter().map(|s| s.day).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn contexts(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    fn subset_days(&self, days: &HashSet<usize>) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            samples: self.samples.iter().filter(|s| days.contains(&s.day)).cloned().collect(),
        }
    }

    /// The last `ceil(fraction * days)` days (at least one) form the test set.
    pub fn split_chronological(&self, test_fraction: f64) -> Result<(Dataset, Dataset), DataError> {
        let days = self.days();
        let n_test = test_count(days.len(), test_fraction)?;
        let test: HashSet<usize> = days[days.len() - n_test..].iter().copied().collect();
        let train: HashSet<usize> = days[..days.len() - n_test].iter().copied().collect();
        Ok((self.subset_days(&train), self.subset_days(&test)))
    }

    /// Whole days assigned to the test set by a seeded shuffle.
    pub fn split_random_days(&self, seed: u64, test_fraction: f64) -> Result<(Dataset, Dataset), DataError> {
        let mut days = self.days();
        let n_test = test_count(days.len(), test_fraction)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        days.shuffle(&mut rng);
        let test: HashSet<usize> = days[..n_test].iter().copied().collect();
        let train: HashSet<usize> = days[n_test..].iter().copied().collect();
        Ok((self.subset_days(&train), self.subset_days(&test)))
    }

    /// Featured CSV: `day,slot,<features...>,y_kw`.
    pub fn save_csv(&self, path: &Path) -> Result<(), DataError> {
        let io = |e: csv::Error| io_error(path, e);
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["day".to_string(), "slot".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.push("y_kw".into());
        w.write_record(&header).map_err(io)?;
        for s in &self.samples {
            let mut row = vec![s.day.to_string(), s.slot.to_string()];
            row.extend(s.features.iter().map(f64::to_string));
            row.push(s.y.to_string());
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| io_error(path, e))
    }

    /// Load a featured CSV. With `schema`, the feature columns must match it
    /// exactly and in order.
    pub fn load_csv(path: &Path, schema: Option<&[String]>) -> Result<Dataset, DataError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
        let header: Vec<String> = r.headers().map_err(|e| io_error(path, e))?.iter().map(str::to_string).collect();
        if header.len() < 3 {
            return Err(DataError::SchemaMismatch {
                column: header.last().cloned().unwrap_or_default(),
                expected: "day,slot,...,y_kw".into(),
            });
        }
        for (pos, want) in [(0, "day"), (1, "slot"), (header.len() - 1, "y_kw")] {
            if header[pos] != want {
                return Err(DataError::SchemaMismatch { column: header[pos].clone(), expected: want.into() });
            }
        }
        let names = header[2..header.len() - 1].to_vec();
        if let Some(schema) = schema {
            for i in 0..names.len().max(schema.len()) {
                if names.get(i) != schema.get(i) {
                    return Err(DataError::SchemaMismatch {
                        column: names.get(i).cloned().unwrap_or_else(|| "y_kw".into()),
                        expected: schema.get(i).cloned().unwrap_or_else(|| "y_kw".into()),
                    });
                }
            }
        }
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| io_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let cells = parse_cells(&rec, &header, line)?;
            samples.push(Sample {
                day: as_index(cells[0], &header[0], line)?,
                slot: as_index(cells[1], &header[1], line)?,
                features: cells[2..cells.len() - 1].to_vec(),
                y: cells[cells.len() - 1],
            });
        }
        Dataset::new(names, samples)
    }
}

fn test_count(days: usize, fraction: f64) -> Result<usize, DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Invalid(format!("test fraction {fraction} must lie in (0, 1)")));
    }
    if days < 2 {
        return Err(DataError::InsufficientHistory { needed: 2, found: days });
    }
    Ok(((fraction * days as f64).ceil() as usize).clamp(1, days - 1))
}

pub(crate) fn io_error(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Io { path: path.display().to_string(), reason: e.to_string() }
}

pub(crate) fn parse_cells(rec: &csv::StringRecord, header: &[String], line: u64) -> Result<Vec<f64>, DataError> {
    if rec.len() != header.len() {
        return Err(DataError::Invalid(format!("line {line}: {} fields, expected {}", rec.len(), header.len())));
    }
    rec.iter()
        .zip(header)
        .map(|(cell, col)| {
            let cell = cell.trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell.eq_ignore_ascii_case("na") {
                return Err(DataError::MissingValue { line, column: col.clone() });
            }
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::ParseError {
                line,
                column: col.clone(),
                value: cell.to_string(),
            })
        })
        .collect()
}

pub(crate) fn as_index(v: f64, column: &str, line: u64) -> Result<usize, DataError> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(DataError::ParseError { line, column: column.into(), value: v.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let samples = (0..5)
            .flat_map(|d| {
                (0..2).map(move |t| Sample {
                    day: d,
                    slot: t,
                    features: vec![d as f64, t as f64 * 0.5],
                    y: 10.0 + d as f64,
                })
            })
            .collect();
        Dataset::new(vec!["a".into(), "b".into()], samples).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = toy();
        d.save_csv(&path).unwrap();
        assert_eq!(Dataset::load_csv(&path, None).unwrap(), d);
        let schema = vec!["a".to_string(), "b".to_string()];
        assert_eq!(Dataset::load_csv(&path, Some(&schema)).unwrap(), d);
    }

    #[test]
    fn load_errors_name_the_problem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "day,slot,a,y_kw\n0,0,1.5,3\n0,1,2.5,4\n").unwrap();
        assert_eq!(Dataset::load_csv(&path, None).unwrap().len(), 2);

        let schema = vec!["b".to_string()];
        assert_eq!(
            Dataset::load_csv(&path, Some(&schema)),
            Err(DataError::SchemaMismatch { column: "a".into(), expected: "b".into() })
        );

        std::fs::write(&path, "day,slot,a,y_kw\n0,0,x1,3\n").unwrap();
        assert_eq!(
            Dataset::load_csv(&path, None),
            Err(DataError::ParseError { line: 2, column: "a".into(), value: "x1".into() })
        );

        std::fs::write(&path, "day,slot,a,y_kw\n0,0,1,3\n0,1,,4\n").unwrap();
        assert_eq!(Dataset::load_csv(&path, None), Err(DataError::MissingValue { line: 3, column: "a".into() }));
    }

    #[test]
    fn ragged_panels_rejected() {
        let mut d = toy();
        d.samples.pop();
        assert!(matches!(Dataset::new(d.feature_names, d.samples), Err(DataError::Ragged { .. })));
    }

    #[test]
    fn duplicate_features_rejected() {
        assert_eq!(Dataset::new(vec!["a".into(), "a".into()], vec![]), Err(DataError::DuplicateFeature("a".into())));
    }

    #[test]
    fn chronological_split_takes_last_days() {
        let (train, test) = toy().split_chronological(0.2).unwrap();
        assert_eq!(train.days(), vec![0, 1, 2, 3]);
        assert_eq!(test.days(), vec![4]);
    }

    #[test]
    fn random_split_is_reproducible_and_disjoint() {
        let d = toy();
        let (a_train, a_test) = d.split_random_days(7, 0.4).unwrap();
        let (b_train, b_test) = d.split_random_days(7, 0.4).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        assert_eq!(a_test.days().len(), 2);
        let train_days: HashSet<usize> = a_train.days().into_iter().collect();
        assert!(a_test.days().iter().all(|d| !train_days.contains(d)));
        assert_eq!(a_train.len() + a_test.len(), d.len());
    }
}
