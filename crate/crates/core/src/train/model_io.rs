use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::{LinearModel, TrainError};

/// Model file: `# key = value` metadata lines, then a `feature,weight` table
/// whose first row is the intercept. Floats use the shortest representation
/// that round-trips.
impl LinearModel {
    pub fn save_csv(&self, path: &Path, meta: &BTreeMap<String, String>) -> Result<(), TrainError> {
        let io = |e: std::io::Error| TrainError::Io(format!("{}: {e}", path.display()));
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for (k, v) in meta {
            writeln!(out, "# {k} = {v}").map_err(io)?;
        }
        writeln!(out, "feature,weight").map_err(io)?;
        writeln!(out, "intercept,{}", self.intercept).map_err(io)?;
        for (name, w) in self.feature_names.iter().zip(&self.weights) {
            writeln!(out, "{name},{w}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load_csv(path: &Path) -> Result<(Self, BTreeMap<String, String>), TrainError> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
    }

    fn parse(text: &str) -> Result<(Self, BTreeMap<String, String>), String> {
        let mut meta = BTreeMap::new();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut header = None;
        for (n, line) in lines.by_ref() {
            match line.strip_prefix('#') {
                Some(rest) => {
                    let (k, v) = rest.split_once('=').ok_or(format!("line {}: expected `# key = value`", n + 1))?;
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => {
                    header = Some(line);
                    break;
                }
            }
        }
        if header.map(str::trim) != Some("feature,weight") {
            return Err("missing `feature,weight` header".into());
        }
        let mut intercept = None;
        let (mut names, mut weights) = (Vec::new(), Vec::new());
        for (n, line) in lines {
            let (name, value) = line.split_once(',').ok_or(format!("line {}: expected two columns", n + 1))?;
            let w: f64 = value.trim().parse().map_err(|_| format!("line {}: bad weight `{}`", n + 1, value.trim()))?;
            if intercept.is_none() {
                if name.trim() != "intercept" {
                    return Err(format!("line {}: first row must be the intercept", n + 1));
                }
                intercept = Some(w);
            } else {
                names.push(name.trim().to_string());
                weights.push(w);
            }
        }
        let intercept = intercept.ok_or("no intercept row")?;
        Ok((LinearModel::new(names, weights, intercept), meta))
    }
}
