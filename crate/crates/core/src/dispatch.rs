//! Merit-order DA and RT dispatch with closed-form dual solutions.
//!
//! DA dispatch meets a forecast `y_hat` at least cost from generators with
//! constant marginal costs. RT dispatch covers the deviation `y - y_hat` with
//! upward resources (positive deviation, paid at `up_costs`) or downward
//! resources (negative deviation, earning `down_utils`). Both are single
//! balance-constraint LPs with box bounds, so filling resources in merit order
//! is optimal and the duals follow from the marginal resource.
//!
//! Fleets may be given in any order. Results are always reported in the
//! order the user supplied; merit order is an internal permutation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::TOL;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("invalid fleet: {0}")]
    InvalidFleet(String),
    #[error("forecast {y_hat} kW outside the DA range [0, {max}]")]
    InfeasibleTarget { y_hat: f64, max: f64 },
    #[error("deviation {deviation} kW outside the RT range [{min}, {max}]")]
    InfeasibleDeviation { deviation: f64, min: f64, max: f64 },
    #[error("cannot read fleet file {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Marginal costs ($/kW) and capacities (kW) of the three resource classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceFleet {
    da_costs: Vec<f64>,
    da_caps: Vec<f64>,
    up_costs: Vec<f64>,
    up_caps: Vec<f64>,
    down_utils: Vec<f64>,
    down_caps: Vec<f64>,
    da_order: Vec<usize>,
    up_order: Vec<usize>,
    down_order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Da,
    RtDeficit,
    RtSurplus,
}

/// Optimal dispatch of one stage, with a dual certificate.
///
/// For RT results the per-resource vectors list the up resources followed by
/// the down resources, each in user order.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub quantities: Vec<f64>,
    pub primal_cost: f64,
    /// Balance-constraint dual: lambda for DA, gamma for RT.
    pub price: f64,
    /// Duals of the capacity bounds, nonnegative.
    pub cap_duals: Vec<f64>,
    /// Duals of the zero lower bounds, nonnegative.
    pub floor_duals: Vec<f64>,
    pub dual_cost: f64,
}

/// An interval of `y_hat` (DA) or of `y - y_hat` (RT) on which the stage
/// duals are constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub stage: Stage,
    /// 1-based merit position within the stage's resource class.
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub price: f64,
    /// Same layout as [`DispatchResult::cap_duals`].
    pub cap_duals: Vec<f64>,
}

impl Partition {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetFile {
    da: CostBlock,
    up: CostBlock,
    down: UtilBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostBlock {
    costs: Vec<f64>,
    caps: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilBlock {
    utils: Vec<f64>,
    caps: Vec<f64>,
}

fn stable_order(values: &[f64], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    idx
}

fn check_class(name: &str, prices: &[f64], caps: &[f64]) -> Result<(), DispatchError> {
    if prices.is_empty() {
        return Err(DispatchError::InvalidFleet(format!("{name}: at least one resource required")));
    }
    if prices.len() != caps.len() {
        return Err(DispatchError::InvalidFleet(format!(
            "{name}: {} prices but {} capacities",
            prices.len(),
            caps.len()
        )));
    }
    if let Some(p) = prices.iter().find(|p| !p.is_finite()) {
        return Err(DispatchError::InvalidFleet(format!("{name}: non-finite price {p}")));
    }
    if let Some(c) = caps.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(DispatchError::InvalidFleet(format!("{name}: capacity {c} must be positive and finite")));
    }
    Ok(())
}

impl ResourceFleet {
    pub fn new(
        da_costs: Vec<f64>,
        da_caps: Vec<f64>,
        up_costs: Vec<f64>,
        up_caps: Vec<f64>,
        down_utils: Vec<f64>,
        down_caps: Vec<f64>,
    ) -> Result<Self, DispatchError> {
        check_class("da", &da_costs, &da_caps)?;
        check_class("up", &up_costs, &up_caps)?;
        check_class("down", &down_utils, &down_caps)?;
        let min_up = up_costs.iter().copied().fold(f64::INFINITY, f64::min);
        let max_down = down_utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min_up < max_down {
            return Err(DispatchError::InvalidFleet(format!(
                "up cost {min_up} is below down utility {max_down}; RT could profit from simultaneous up and down dispatch"
            )));
        }
        Ok(Self {
            da_order: stable_order(&da_costs, false),
            up_order: stable_order(&up_costs, false),
            down_order: stable_order(&down_utils, true),
            da_costs,
            da_caps,
            up_costs,
            up_caps,
            down_utils,
            down_caps,
        })
    }

    /// The two-generator example fleet with the given capacities for each
    /// class (kW per resource).
    pub fn example(da_cap: f64, up_cap: f64, down_cap: f64) -> Self {
        Self::new(
            vec![25.0, 30.0],
            vec![da_cap; 2],
            vec![55.0, 60.0],
            vec![up_cap; 2],
            vec![18.0, 16.0],
            vec![down_cap; 2],
        )
        .expect("example fleet is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DispatchError> {
        let f: FleetFile = toml::from_str(text).map_err(|e| DispatchError::InvalidFleet(e.to_string()))?;
        Self::new(f.da.costs, f.da.caps, f.up.costs, f.up.caps, f.down.utils, f.down.caps)
    }

    pub fn load(path: &Path) -> Result<Self, DispatchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DispatchError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let f = FleetFile {
            da: CostBlock { costs: self.da_costs.clone(), caps: self.da_caps.clone() },
            up: CostBlock { costs: self.up_costs.clone(), caps: self.up_caps.clone() },
            down: UtilBlock { utils: self.down_utils.clone(), caps: self.down_caps.clone() },
        };
        toml::to_string(&f).expect("fleet serializes")
    }

    /// SHA-256 over the exact bit patterns of all fleet vectors.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (tag, v) in [
            ("da.costs", &self.da_costs),
            ("da.caps", &self.da_caps),
            ("up.costs", &self.up_costs),
            ("up.caps", &self.up_caps),
            ("down.utils", &self.down_utils),
            ("down.caps", &self.down_caps),
        ] {
            h.update(tag.as_bytes());
            h.update((v.len() as u64).to_le_bytes());
            for x in v {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn da_costs(&self) -> &[f64] {
        &self.da_costs
    }
    pub fn da_caps(&self) -> &[f64] {
        &self.da_caps
    }
    pub fn up_costs(&self) -> &[f64] {
        &self.up_costs
    }
    pub fn up_caps(&self) -> &[f64] {
        &self.up_caps
    }
    pub fn down_utils(&self) -> &[f64] {
        &self.down_utils
    }
    pub fn down_caps(&self) -> &[f64] {
        &self.down_caps
    }

    pub fn total_da(&self) -> f64 {
        self.da_caps.iter().sum()
    }
    pub fn total_up(&self) -> f64 {
        self.up_caps.iter().sum()
    }
    pub fn total_down(&self) -> f64 {
        self.down_caps.iter().sum()
    }

    /// Feasible forecasts `y_hat` for a realization `y`, or `None` when no
    /// forecast makes both stages feasible.
    pub fn forecast_range(&self, y: f64) -> Option<(f64, f64)> {
        let lo = (y - self.total_up()).max(0.0);
        let hi = (y + self.total_down()).min(self.total_da());
        (lo <= hi + TOL).then_some((lo, hi.max(lo)))
    }

    /// Merit-order DA dispatch of `y_hat`.
    pub fn solve_da(&self, y_hat: f64) -> Result<DispatchResult, DispatchError> {
        let max = self.total_da();
        if !(y_hat >= -TOL && y_hat <= max + TOL) {
            return Err(DispatchError::InfeasibleTarget { y_hat, max });
        }
        let y_hat = y_hat.clamp(0.0, max);
        let mut quantities = vec![0.0; self.da_costs.len()];
        let marginal = fill(&self.da_order, &self.da_caps, y_hat, &mut quantities);
        let price = self.da_costs[self.da_order[marginal]];
        Ok(self.da_result(quantities, price, y_hat))
    }

    fn da_result(&self, quantities: Vec<f64>, price: f64, y_hat: f64) -> DispatchResult {
        let cap_duals: Vec<f64> = self.da_costs.iter().map(|c| (price - c).max(0.0)).collect();
        let floor_duals: Vec<f64> = self.da_costs.iter().map(|c| (c - price).max(0.0)).collect();
        let primal_cost = dot(&self.da_costs, &quantities);
        let dual_cost = price * y_hat - dot(&cap_duals, &self.da_caps);
        DispatchResult { quantities, primal_cost, price, cap_duals, floor_duals, dual_cost }
    }

    /// Merit-order RT dispatch of `deviation = y - y_hat`.
    pub fn solve_rt(&self, deviation: f64) -> Result<DispatchResult, DispatchError> {
        let (min, max) = (-self.total_down(), self.total_up());
        if !(deviation >= min - TOL && deviation <= max + TOL) {
            return Err(DispatchError::InfeasibleDeviation { deviation, min, max });
        }
        let deviation = deviation.clamp(min, max);
        let mut up = vec![0.0; self.up_costs.len()];
        let mut down = vec![0.0; self.down_utils.len()];
        let price = if deviation > 0.0 {
            let m = fill(&self.up_order, &self.up_caps, deviation, &mut up);
            self.up_costs[self.up_order[m]]
        } else if deviation < 0.0 {
            let m = fill(&self.down_order, &self.down_caps, -deviation, &mut down);
            self.down_utils[self.down_order[m]]
        } else {
            self.up_costs[self.up_order[0]]
        };
        Ok(self.rt_result(up, down, price, deviation))
    }

    fn rt_result(&self, up: Vec<f64>, down: Vec<f64>, price: f64, deviation: f64) -> DispatchResult {
        let up_cap_duals: Vec<f64> = self.up_costs.iter().map(|c| (price - c).max(0.0)).collect();
        let down_cap_duals: Vec<f64> = self.down_utils.iter().map(|u| (u - price).max(0.0)).collect();
        let primal_cost = dot(&self.up_costs, &up) - dot(&self.down_utils, &down);
        let dual_cost = price * deviation - dot(&down_cap_duals, &self.down_caps) - dot(&up_cap_duals, &self.up_caps);
        let floor_duals = self
            .up_costs
            .iter()
            .map(|c| (c - price).max(0.0))
            .chain(self.down_utils.iter().map(|u| (price - u).max(0.0)))
            .collect();
        let mut quantities = up;
        quantities.extend(down);
        let mut cap_duals = up_cap_duals;
        cap_duals.extend(down_cap_duals);
        DispatchResult { quantities, primal_cost, price, cap_duals, floor_duals, dual_cost }
    }

    /// DA cost of `y_hat` plus RT cost of `y - y_hat`.
    pub fn overall_cost(&self, y_hat: f64, y: f64) -> Result<f64, DispatchError> {
        Ok(self.solve_da(y_hat)?.primal_cost + self.solve_rt(y - y_hat)?.primal_cost)
    }

    /// DA partitions in merit order, then RT partitions: deficit partitions
    /// in merit order followed by surplus partitions in merit order.
    pub fn enumerate_partitions(&self) -> (Vec<Partition>, Vec<Partition>) {
        let mut da = Vec::with_capacity(self.da_order.len());
        let mut lo = 0.0;
        for (o, &i) in self.da_order.iter().enumerate() {
            let hi = lo + self.da_caps[i];
            let mid = self.solve_da(0.5 * (lo + hi)).expect("midpoint is feasible");
            da.push(Partition { stage: Stage::Da, index: o + 1, lo, hi, price: mid.price, cap_duals: mid.cap_duals });
            lo = hi;
        }
        let mut rt = Vec::with_capacity(self.up_order.len() + self.down_order.len());
        let mut lo = 0.0;
        for (n, &i) in self.up_order.iter().enumerate() {
            let hi = lo + self.up_caps[i];
            let mid = self.solve_rt(0.5 * (lo + hi)).expect("midpoint is feasible");
            rt.push(Partition {
                stage: Stage::RtDeficit,
                index: n + 1,
                lo,
                hi,
                price: mid.price,
                cap_duals: mid.cap_duals,
            });
            lo = hi;
        }
        let mut hi = 0.0;
        for (n, &j) in self.down_order.iter().enumerate() {
            let lo = hi - self.down_caps[j];
            let mid = self.solve_rt(0.5 * (lo + hi)).expect("midpoint is feasible");
            rt.push(Partition {
                stage: Stage::RtSurplus,
                index: n + 1,
                lo,
                hi,
                price: mid.price,
                cap_duals: mid.cap_duals,
            });
            hi = lo;
        }
        (da, rt)
    }
}

/// Fill `target` across resources in `order`, writing quantities in user
/// order. Returns the merit position of the marginal resource: the first
/// whose cumulative capacity reaches the target (position 0 for a zero
/// target).
fn fill(order: &[usize], caps: &[f64], target: f64, out: &mut [f64]) -> usize {
    let mut remaining = target;
    let mut cum = 0.0;
    let mut marginal = None;
    for (pos, &i) in order.iter().enumerate() {
        let q = caps[i].min(remaining.max(0.0));
        out[i] = q;
        remaining -= q;
        cum += caps[i];
        if marginal.is_none() && target <= cum + TOL {
            marginal = Some(pos);
        }
    }
    marginal.unwrap_or(order.len() - 1)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
