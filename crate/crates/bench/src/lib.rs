//! Shared fixtures for the benchmarks.

use riskcast_core::data::{generate_synthetic, SyntheticSpec};
use riskcast_core::{Dataset, ResourceFleet};

pub fn example_fleet() -> ResourceFleet {
    ResourceFleet::example(100.0, 50.0, 40.0)
}

/// A fleet with `n` resources per class and spread-out prices.
pub fn wide_fleet(n: usize) -> ResourceFleet {
    let f = |base: f64, step: f64| (0..n).map(|i| base + step * i as f64).collect::<Vec<_>>();
    ResourceFleet::new(f(20.0, 1.5), vec![40.0; n], f(60.0, 2.0), vec![15.0; n], f(15.0, -0.5), vec![12.0; n])
        .expect("valid fleet")
}

/// Train/test split of a synthetic panel with `days` days.
pub fn synthetic_split(days: usize) -> (Dataset, Dataset) {
    let data =
        generate_synthetic(&SyntheticSpec { days, ..Default::default() }, &example_fleet()).expect("synthetic data");
    data.split_chronological(0.2).expect("split")
}
