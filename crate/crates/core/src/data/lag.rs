use std::path::Path;

use super::{as_index, io_error, parse_cells, DataError, Dataset, Sample};

/// Lag feature names, in order.
pub const LAG_FEATURES: [&str; 4] = ["y_lag1", "y_lag2", "y_lag3", "y_lag2_next"];

/// Net demand by `(day, slot)` with optional weather columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub slots_per_day: usize,
    /// `y[d][t]` in kW.
    pub y: Vec<Vec<f64>>,
    pub weather_names: Vec<String>,
    /// `weather[d][t]` holds one value per weather column.
    pub weather: Vec<Vec<Vec<f64>>>,
}

impl RawSeries {
    pub fn new(y: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let slots = y.first().map_or(0, Vec::len);
        let weather = y.iter().map(|day| vec![Vec::new(); day.len()]).collect();
        let s = Self { slots_per_day: slots, y, weather_names: Vec::new(), weather };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.y.is_empty() || self.slots_per_day == 0 {
            return Err(DataError::Empty);
        }
        for (d, day) in self.y.iter().enumerate() {
            if day.len() != self.slots_per_day {
                return Err(DataError::Ragged { day: d, found: day.len(), expected: self.slots_per_day });
            }
        }
        Ok(())
    }

    pub fn days(&self) -> usize {
        self.y.len()
    }

    /// Raw CSV: `day,slot,y_kw,<weather...>`, one row per slot, days and
    /// slots numbered from zero.
    pub fn save_csv(&self, path: &Path) -> Result<(), DataError> {
        let io = |e: csv::Error| io_error(path, e);
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["day".to_string(), "slot".to_string(), "y_kw".to_string()];
        header.extend(self.weather_names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (d, day) in self.y.iter().enumerate() {
            for (t, y) in day.iter().enumerate() {
                let mut row = vec![d.to_string(), t.to_string(), y.to_string()];
                row.extend(self.weather[d][t].iter().map(f64::to_string));
                w.write_record(&row).map_err(io)?;
            }
        }
        w.flush().map_err(|e| io_error(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self, DataError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
        let header: Vec<String> = r.headers().map_err(|e| io_error(path, e))?.iter().map(str::to_string).collect();
        for (pos, want) in ["day", "slot", "y_kw"].iter().enumerate() {
            match header.get(pos) {
                Some(h) if h == want => {}
                other => {
                    return Err(DataError::SchemaMismatch {
                        column: other.cloned().unwrap_or_default(),
                        expected: want.to_string(),
                    })
                }
            }
        }
        let mut rows: Vec<(usize, usize, f64, Vec<f64>)> = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| io_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let cells = parse_cells(&rec, &header, line)?;
            rows.push((
                as_index(cells[0], "day", line)?,
                as_index(cells[1], "slot", line)?,
                cells[2],
                cells[3..].to_vec(),
            ));
        }
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        rows.sort_by_key(|r| (r.0, r.1));
        let first_day = rows[0].0;
        let mut y: Vec<Vec<f64>> = Vec::new();
        let mut weather: Vec<Vec<Vec<f64>>> = Vec::new();
        for (day, slot, v, w) in rows {
            let d = day - first_day;
            if d >= y.len() {
                if d != y.len() {
                    return Err(DataError::Invalid(format!("day {} is missing", first_day + y.len())));
                }
                y.push(Vec::new());
                weather.push(Vec::new());
            }
            if slot != y[d].len() {
                return Err(DataError::Invalid(format!("day {day}: slot {} missing or duplicated", y[d].len())));
            }
            y[d].push(v);
            weather[d].push(w);
        }
        let s = Self { slots_per_day: y[0].len(), y, weather_names: header[3..].to_vec(), weather };
        s.validate()?;
        Ok(s)
    }
}

/// Context for day `d`, slot `t`: the same slot on days `d-1`, `d-2`, `d-3`,
/// and slot `t+1` on day `d-2`, followed by the weather columns of `(d, t)`.
/// For the last slot, `t+1` on day `d-2` is taken as slot 0 of day `d-1`,
/// the slot that actually follows it in time. The first three days only
/// serve as history.
pub fn build_lag_features(series: &RawSeries) -> Result<Dataset, DataError> {
    series.validate()?;
    if series.days() < 4 {
        return Err(DataError::InsufficientHistory { needed: 4, found: series.days() });
    }
    let t_max = series.slots_per_day;
    let y = &series.y;
    let mut samples = Vec::with_capacity((series.days() - 3) * t_max);
    for d in 3..series.days() {
        for t in 0..t_max {
            let next = if t + 1 < t_max { y[d - 2][t + 1] } else { y[d - 1][0] };
            let mut features = vec![y[d - 1][t], y[d - 2][t], y[d - 3][t], next];
            features.extend(series.weather[d][t].iter().copied());
            samples.push(Sample { day: d, slot: t, features, y: y[d][t] });
        }
    }
    let mut names: Vec<String> = LAG_FEATURES.iter().map(|s| s.to_string()).collect();
    names.extend(series.weather_names.iter().cloned());
    Dataset::new(names, samples)
}
