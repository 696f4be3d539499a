#![allow(clippy::needless_range_loop)]

mod common;

use common::{dataset, rel_diff};
use proptest::prelude::*;
use riskcast_core::benchmarks::{
    assemble_sto_opt_lp, knn_scenarios, sto_opt_decide, sto_opt_forecasts, train_qua_e, KnnIndex, ScenarioSet,
};
use riskcast_core::data::{generate_synthetic, SyntheticSpec};
use riskcast_core::lp::solve;
use riskcast_core::{CostSurface, ResourceFleet};

/// Solve `A x = b` by Gauss-Jordan elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

#[test]
fn qua_e_solves_the_normal_equations() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<(Vec<f64>, f64)> = (0..50)
        .map(|_| {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + rng.random_range(-1.0..1.0);
            (x, y)
        })
        .collect();
    let data = dataset(&rows);
    let model = train_qua_e(&data).unwrap();
    let design: Vec<Vec<f64>> =
        rows.iter().map(|(x, _)| std::iter::once(1.0).chain(x.iter().copied()).collect()).collect();
    let mut xtx = vec![vec![0.0; 4]; 4];
    let mut xty = vec![0.0; 4];
    for (d, (_, y)) in design.iter().zip(&rows) {
        for i in 0..4 {
            xty[i] += d[i] * y;
            for j in 0..4 {
                xtx[i][j] += d[i] * d[j];
            }
        }
    }
    let w = gauss_solve(xtx, xty);
    assert!((model.intercept - w[0]).abs() <= 1e-8);
    for j in 0..3 {
        assert!((model.weights[j] - w[j + 1]).abs() <= 1e-8);
    }
    // Residuals are orthogonal to every column of the design.
    for j in 0..4 {
        let g: f64 = design.iter().zip(&rows).map(|(d, (x, y))| d[j] * (model.predict(x) - y)).sum();
        assert!(g.abs() <= 1e-7);
    }
}

#[test]
fn qua_e_handles_collinear_features() {
    let rows: Vec<(Vec<f64>, f64)> = (0..10).map(|i| (vec![i as f64, 2.0 * i as f64], 3.0 + i as f64)).collect();
    let model = train_qua_e(&dataset(&rows)).unwrap();
    assert!(model.is_finite());
    for (x, y) in &rows {
        assert!((model.predict(x) - y).abs() <= 1e-4);
    }
}

#[test]
fn knn_hand_placed_points() {
    // Both features have the same spread, so z-scoring keeps the geometry.
    let pts = [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0), (1.0, 1.0), (4.0, 4.0)];
    let rows: Vec<(Vec<f64>, f64)> = pts.iter().enumerate().map(|(i, &(a, b))| (vec![a, b], i as f64)).collect();
    let data = dataset(&rows);
    // Squared distances from (1.2, 0.9): 0.05, 1.45, 1.85, 2.25, 2.65, ...
    let set = knn_scenarios(&data, &[1.2, 0.9], 3).unwrap();
    assert_eq!(set.sources, vec![4, 1, 3]);
    assert_eq!(set.scenarios, vec![4.0, 1.0, 3.0]);
}

#[test]
fn knn_ties_go_to_the_lower_index() {
    let rows = vec![(vec![3.0, 1.0], 7.0), (vec![0.0, 0.0], 1.0), (vec![3.0, 1.0], 9.0), (vec![1.0, 5.0], 2.0)];
    let set = knn_scenarios(&dataset(&rows), &[3.0, 1.0], 1).unwrap();
    assert_eq!(set.sources, vec![0]);
    let set = knn_scenarios(&dataset(&rows), &[3.0, 1.0], 2).unwrap();
    assert_eq!(set.sources, vec![0, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_brute_force(
        rows in prop::collection::vec((prop::collection::vec(-10.0f64..10.0, 3), 0.0f64..100.0), 5..40),
        query in prop::collection::vec(-10.0f64..10.0, 3),
        k_frac in 0.0f64..1.0,
    ) {
        let data = dataset(&rows);
        let k = 1 + ((rows.len() - 1) as f64 * k_frac) as usize;
        let set = knn_scenarios(&data, &query, k).unwrap();
        // Brute force with the same z-scoring, computed here.
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..3).map(|j| rows.iter().map(|r| r.0[j]).sum::<f64>() / n).collect();
        let sd: Vec<f64> = (0..3)
            .map(|j| (rows.iter().map(|r| (r.0[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        let z = |x: &[f64]| -> Vec<f64> { (0..3).map(|j| (x[j] - mean[j]) / sd[j]).collect() };
        let zq = z(&query);
        let mut d: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (z(&r.0).iter().zip(&zq).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = d[..k].iter().map(|p| p.1).collect();
        // Distances agree to rounding; compare neighbor sets by distance rank.
        for (got, want) in set.sources.iter().zip(&expected) {
            let dg = d.iter().find(|p| p.1 == *got).unwrap().0;
            let dw = d.iter().find(|p| p.1 == *want).unwrap().0;
            prop_assert!((dg - dw).abs() <= 1e-9 * (1.0 + dw));
        }
    }

    #[test]
    fn knn_multiset_ignores_training_order(
        rows in prop::collection::vec((prop::collection::vec(-10.0f64..10.0, 2), 0.0f64..100.0), 5..30),
        query in prop::collection::vec(-10.0f64..10.0, 2),
        shift in 1usize..30,
    ) {
        let mut rotated = rows.clone();
        rotated.rotate_left(shift % rows.len());
        let k = rows.len() / 2;
        let mut a = knn_scenarios(&dataset(&rows), &query, k).unwrap().scenarios;
        let mut b = knn_scenarios(&dataset(&rotated), &query, k).unwrap().scenarios;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sto_opt_matches_dense_lp_and_grid(
        ys in prop::collection::vec(40.0f64..160.0, 1..25),
        beta in 0.0f64..0.95,
    ) {
        let fleet = ResourceFleet::example(100.0, 50.0, 40.0);
        let surface = CostSurface::build(&fleet);
        let set = ScenarioSet { k: ys.len(), sources: (0..ys.len()).collect(), scenarios: ys.clone() };
        let (y_hat, _) = sto_opt_decide(&surface, &set, beta).unwrap();
        let objective = |x: f64| -> f64 {
            let costs: Vec<f64> = ys.iter().map(|&y| fleet.overall_cost(x, y).unwrap()).collect();
            costs.iter().map(|&a| a + costs.iter().map(|c| (c - a).max(0.0)).sum::<f64>() / ((1.0 - beta) * costs.len() as f64))
                .fold(f64::INFINITY, f64::min)
        };
        let ours = objective(y_hat);
        let dense = solve(&assemble_sto_opt_lp(&surface, &set, beta).unwrap()).unwrap();
        prop_assert!(rel_diff(ours, dense.objective) <= 1e-8, "{ours} vs {}", dense.objective);
        // Grid over the common box at 0.1 kW; the cost is 60-Lipschitz in y_hat.
        let lo = ys.iter().map(|&y| fleet.forecast_range(y).unwrap().0).fold(f64::NEG_INFINITY, f64::max);
        let hi = ys.iter().map(|&y| fleet.forecast_range(y).unwrap().1).fold(f64::INFINITY, f64::min);
        let steps = ((hi - lo) / 0.1).ceil() as usize;
        let grid_best = (0..=steps).map(|i| objective((lo + 0.1 * i as f64).min(hi))).fold(f64::INFINITY, f64::min);
        prop_assert!(ours <= grid_best + 1e-9 * grid_best.abs());
        prop_assert!(grid_best <= ours + 60.0 * 0.1);
    }
}

#[test]
fn sto_opt_asymmetric_prices_push_forecast_up() {
    let fleet = ResourceFleet::example(100.0, 50.0, 40.0);
    let surface = CostSurface::build(&fleet);
    let set = ScenarioSet { scenarios: vec![100.0, 140.0], sources: vec![0, 1], k: 2 };
    let (y_hat, _) = sto_opt_decide(&surface, &set, 0.0).unwrap();
    assert!(y_hat > 120.0, "{y_hat}");
}

#[test]
fn sto_opt_high_beta_guards_the_worst_scenario() {
    let fleet = ResourceFleet::example(100.0, 50.0, 40.0);
    let surface = CostSurface::build(&fleet);
    let set = ScenarioSet { scenarios: vec![100.0, 200.0], sources: vec![0, 1], k: 2 };
    let (y_hat, alpha) = sto_opt_decide(&surface, &set, 0.99).unwrap();
    // With two scenarios and beta = 0.99 the objective is the larger cost,
    // and the common feasible box is [100, 180].
    let worst = |x: f64| fleet.overall_cost(x, 100.0).unwrap().max(fleet.overall_cost(x, 200.0).unwrap());
    let grid = (0..=1600).map(|i| 100.0 + 0.05 * i as f64).map(worst).fold(f64::INFINITY, f64::min);
    assert!(worst(y_hat) <= grid + 1e-9 * grid);
    assert!(grid <= worst(y_hat) + 60.0 * 0.05);
    assert!((alpha - worst(y_hat)).abs() <= 1e-6);
}

#[test]
fn sto_opt_forecasts_are_deterministic() {
    let fleet = ResourceFleet::example(100.0, 50.0, 40.0);
    let surface = CostSurface::build(&fleet);
    let data = generate_synthetic(&SyntheticSpec { seed: 3, days: 20, ..Default::default() }, &fleet).unwrap();
    let (train, test) = data.split_chronological(0.2).unwrap();
    let a = sto_opt_forecasts(&train, &test, &surface, 0.5, 50).unwrap();
    let b = sto_opt_forecasts(&train, &test, &surface, 0.5, 50).unwrap();
    assert_eq!(a, b);
    let index = KnnIndex::new(&train);
    let first = index.query(&test.samples[0].features, 50).unwrap();
    assert_eq!(a[0], sto_opt_decide(&surface, &first, 0.5).unwrap().0);
}
