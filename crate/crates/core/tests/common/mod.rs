#![allow(dead_code)]

use proptest::prelude::*;
use riskcast_core::data::Sample;
use riskcast_core::lp::LpProblem;
use riskcast_core::{Dataset, ResourceFleet};

/// Random valid fleet: 1-6 resources per class, every up cost above every
/// down utility, capacities between 5 and 100 kW. Costs are drawn from
/// continuous ranges, so ties have probability zero.
pub fn fleet_strategy() -> impl Strategy<Value = ResourceFleet> {
    (1usize..=6, 1usize..=6, 1usize..=6, 20.0f64..60.0).prop_flat_map(|(nd, nu, nn, split)| {
        (
            prop::collection::vec(5.0f64..80.0, nd),
            prop::collection::vec(5.0f64..100.0, nd),
            prop::collection::vec(split..split + 60.0, nu),
            prop::collection::vec(5.0f64..100.0, nu),
            prop::collection::vec(0.0f64..split, nn),
            prop::collection::vec(5.0f64..100.0, nn),
        )
            .prop_map(|(dc, dk, uc, uk, nc, nk)| ResourceFleet::new(dc, dk, uc, uk, nc, nk).unwrap())
    })
}

/// `min c'p  s.t.  sum p = y_hat,  0 <= p <= cap`.
pub fn da_lp(fleet: &ResourceFleet, y_hat: f64) -> LpProblem {
    let n = fleet.da_costs().len();
    let mut lp = LpProblem::new(n).with_objective(fleet.da_costs().to_vec());
    lp.add_eq(vec![1.0; n], y_hat);
    for (j, &cap) in fleet.da_caps().iter().enumerate() {
        lp.set_bounds(j, 0.0, cap);
    }
    lp
}

/// `min rho+'p+ - rho-'p-  s.t.  sum p+ - sum p- = deviation`, with bounds.
/// Variables are the up resources followed by the down resources.
pub fn rt_lp(fleet: &ResourceFleet, deviation: f64) -> LpProblem {
    let nu = fleet.up_costs().len();
    let nn = fleet.down_utils().len();
    let mut objective = fleet.up_costs().to_vec();
    objective.extend(fleet.down_utils().iter().map(|u| -u));
    let mut lp = LpProblem::new(nu + nn).with_objective(objective);
    let mut row = vec![1.0; nu];
    row.extend(vec![-1.0; nn]);
    lp.add_eq(row, deviation);
    for (j, &cap) in fleet.up_caps().iter().chain(fleet.down_caps()).enumerate() {
        lp.set_bounds(j, 0.0, cap);
    }
    lp
}

/// Brute-force overall cost: both stage LPs solved by vertex enumeration.
pub fn oracle_cost(fleet: &ResourceFleet, y_hat: f64, y: f64) -> f64 {
    let da = riskcast_core::lp::enumerate_vertices(&da_lp(fleet, y_hat)).unwrap();
    let rt = riskcast_core::lp::enumerate_vertices(&rt_lp(fleet, y - y_hat)).unwrap();
    da.objective + rt.objective
}

/// A dataset with one sample per day, features and targets as given.
pub fn dataset(rows: &[(Vec<f64>, f64)]) -> Dataset {
    let p = rows.first().map_or(0, |r| r.0.len());
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let samples =
        rows.iter().enumerate().map(|(i, (x, y))| Sample { day: i, slot: 0, features: x.clone(), y: *y }).collect();
    Dataset::new(names, samples).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
