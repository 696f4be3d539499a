mod common;

use common::{dataset, rel_diff};
use riskcast_core::benchmarks::{sto_opt_decide, train_qua_e, train_val_n, ScenarioSet};
use riskcast_core::data::{generate_synthetic, SyntheticSpec};
use riskcast_core::lp::{solve, LpStatus};
use riskcast_core::train::{
    assemble_mean_cost_lp, assemble_training_lp, mean_cost_objective, model_costs, train, Backend, TrainConfig,
};
use riskcast_core::{cvar_of_costs, CostSurface, Dataset, ResourceFleet};

fn fleet() -> ResourceFleet {
    ResourceFleet::example(100.0, 50.0, 40.0)
}

/// The first `days` days of a small synthetic panel.
fn synthetic(seed: u64, days: usize) -> Dataset {
    let d = generate_synthetic(&SyntheticSpec { seed, days: 12, ..Default::default() }, &fleet()).unwrap();
    let first: Vec<usize> = d.days().into_iter().take(days).collect();
    Dataset::new(d.feature_names.clone(), d.samples.into_iter().filter(|s| first.contains(&s.day)).collect()).unwrap()
}

/// Rockafellar-Uryasev value minimized by scanning alpha over the costs.
fn cvar_by_scan(costs: &[f64], beta: f64) -> f64 {
    costs
        .iter()
        .map(|&a| a + costs.iter().map(|c| (c - a).max(0.0)).sum::<f64>() / ((1.0 - beta) * costs.len() as f64))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn exact_backend_matches_dense_epigraph_lp() {
    let surface = CostSurface::build(&fleet());
    for (seed, beta) in [(1, 0.3), (2, 0.5), (3, 0.7), (4, 0.9)] {
        let data = synthetic(seed, 2);
        let trained = train(&data, &surface, &TrainConfig::new(beta, Backend::ExactLp)).unwrap();
        let lp = assemble_training_lp(&data, &surface, beta).unwrap();
        let dense = solve(&lp).unwrap();
        assert_eq!(dense.status, LpStatus::Optimal);
        assert!(
            rel_diff(trained.objective, dense.objective) <= 1e-8,
            "beta {beta}: {} vs {}",
            trained.objective,
            dense.objective
        );
        // The returned model attains the objective it reports.
        let costs = model_costs(&trained.model, &data, &surface);
        assert!(rel_diff(cvar_by_scan(&costs, beta), trained.objective) <= 1e-9);
        assert!(trained.diagnostics.gap.abs() <= 1e-7 * trained.objective.abs());
    }
}

#[test]
fn zero_beta_equals_expected_cost_problem() {
    let surface = CostSurface::build(&fleet());
    let data = synthetic(5, 2);
    let trained = train(&data, &surface, &TrainConfig::new(0.0, Backend::ExactLp)).unwrap();
    let dense = solve(&assemble_mean_cost_lp(&data, &surface).unwrap()).unwrap();
    let (_, structured) = mean_cost_objective(&data, &surface).unwrap();
    assert!(rel_diff(trained.objective, dense.objective) <= 1e-8);
    assert!(rel_diff(trained.objective, structured) <= 1e-8);
    let val_n = train_val_n(&data, &surface).unwrap();
    assert_eq!(val_n, trained);
}

#[test]
fn lp_dimensions_follow_sample_count() {
    let surface = CostSurface::build(&fleet());
    let data = synthetic(6, 1);
    let (n, s, p) = (data.len(), surface.segments.len(), data.num_features());
    let lp = assemble_training_lp(&data, &surface, 0.5).unwrap();
    assert_eq!(s, 8);
    assert_eq!(lp.ineq.len(), n * (s + 2) + 2 * n);
    assert!(lp.eq.is_empty());
    assert_eq!(lp.num_vars(), 2 * n + p + 2);
    let trained = train(&data, &surface, &TrainConfig::new(0.5, Backend::ExactLp)).unwrap();
    assert_eq!((trained.diagnostics.lp_rows, trained.diagnostics.lp_vars), (lp.ineq.len(), lp.num_vars()));
}

/// Minimize over (intercept, w) by repeatedly zooming a grid around the best
/// point; alpha is eliminated by `cvar_by_scan`.
fn grid_search(data: &Dataset, fleet: &ResourceFleet, beta: f64) -> (f64, f64, f64) {
    let eval = |b: f64, w: f64| -> f64 {
        let mut costs = Vec::new();
        for s in &data.samples {
            let y_hat = b + w * s.features[0];
            match fleet.overall_cost(y_hat, s.y) {
                Ok(c) => costs.push(c),
                Err(_) => return f64::INFINITY,
            }
        }
        cvar_by_scan(&costs, beta)
    };
    let (mut cb, mut cw, mut hb, mut hw) = (0.0, 0.0, 400.0, 10.0);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..40 {
        for i in 0..=60 {
            for j in 0..=60 {
                let b = cb - hb + 2.0 * hb * i as f64 / 60.0;
                let w = cw - hw + 2.0 * hw * j as f64 / 60.0;
                let v = eval(b, w);
                if v < best.0 {
                    best = (v, b, w);
                }
            }
        }
        (cb, cw) = (best.1, best.2);
        hb *= 0.6;
        hw *= 0.6;
    }
    best
}

#[test]
fn two_sample_problem_matches_grid_search() {
    let fleet = ResourceFleet::new(vec![20.0], vec![200.0], vec![50.0], vec![60.0], vec![10.0], vec![60.0]).unwrap();
    let surface = CostSurface::build(&fleet);
    assert_eq!(surface.segments.len(), 2);
    let data = dataset(&[(vec![1.0], 80.0), (vec![3.0], 120.0)]);
    for beta in [0.0, 0.3, 0.5, 0.8] {
        let trained = train(&data, &surface, &TrainConfig::new(beta, Backend::ExactLp)).unwrap();
        let (obj, b, w) = grid_search(&data, &fleet, beta);
        assert!(rel_diff(trained.objective, obj) <= 1e-4, "beta {beta}: {} vs {obj}", trained.objective);
        if beta < 0.5 {
            // Here the CVaR is strictly increasing in both costs, so the
            // interpolating model is the unique optimum.
            assert!((trained.model.intercept - b).abs() <= 1e-4 && (trained.model.weights[0] - w).abs() <= 1e-4);
            let costs = model_costs(&trained.model, &data, &surface);
            assert!((trained.alpha_star - costs.iter().cloned().fold(f64::INFINITY, f64::min)).abs() <= 1e-6);
        }
    }
}

#[test]
fn perfect_information_reproduces_targets() {
    // Up costs above every DA cost and down utilities below: any deviation
    // costs more than it saves, so each sample is best served at y_hat = y.
    let fleet = ResourceFleet::new(
        vec![25.0, 30.0],
        vec![100.0, 100.0],
        vec![55.0, 60.0],
        vec![50.0, 50.0],
        vec![18.0, 16.0],
        vec![40.0, 40.0],
    )
    .unwrap();
    let surface = CostSurface::build(&fleet);
    let rows: Vec<(Vec<f64>, f64)> = (0..30)
        .map(|i| {
            let x = (i * 37 % 29) as f64;
            (vec![x, (i % 5) as f64], 40.0 + 4.0 * x)
        })
        .collect();
    let data = dataset(&rows);
    let da_costs: Vec<f64> = data.samples.iter().map(|s| fleet.solve_da(s.y).unwrap().primal_cost).collect();
    for beta in [0.0, 0.5, 0.7] {
        let trained = train(&data, &surface, &TrainConfig::new(beta, Backend::ExactLp)).unwrap();
        for s in &data.samples {
            assert!((trained.model.predict(&s.features) - s.y).abs() <= 1e-6);
        }
        assert!(rel_diff(trained.objective, cvar_by_scan(&da_costs, beta)) <= 1e-9);
    }
}

#[test]
fn single_sample_costs_its_da_dispatch() {
    let fleet = fleet();
    let surface = CostSurface::build(&fleet);
    let data = dataset(&[(vec![3.0, -1.0], 130.0)]);
    for beta in [0.0, 0.5, 0.95] {
        let trained = train(&data, &surface, &TrainConfig::new(beta, Backend::ExactLp)).unwrap();
        assert!(rel_diff(trained.objective, fleet.solve_da(130.0).unwrap().primal_cost) <= 1e-9);
    }
}

#[test]
fn intercept_only_model_is_the_scenario_program() {
    let surface = CostSurface::build(&fleet());
    let base = synthetic(8, 2);
    let data = Dataset::new(
        vec![],
        base.samples.iter().map(|s| riskcast_core::Sample { features: vec![], ..s.clone() }).collect(),
    )
    .unwrap();
    let set = ScenarioSet { scenarios: data.targets(), sources: (0..data.len()).collect(), k: data.len() };
    for beta in [0.0, 0.4, 0.8] {
        let trained = train(&data, &surface, &TrainConfig::new(beta, Backend::ExactLp)).unwrap();
        let (y_hat, _) = sto_opt_decide(&surface, &set, beta).unwrap();
        let costs: Vec<f64> = data.samples.iter().map(|s| surface.eval(y_hat, s.y).unwrap()).collect();
        assert!(rel_diff(trained.objective, cvar_by_scan(&costs, beta)) <= 1e-9);
    }
}

#[test]
fn benchmarks_never_beat_the_exact_objective() {
    let surface = CostSurface::build(&fleet());
    let data = synthetic(9, 5);
    let qua = train_qua_e(&data).unwrap();
    let val = train_val_n(&data, &surface).unwrap();
    for beta in [0.3, 0.5, 0.7] {
        let exact = train(&data, &surface, &TrainConfig::new(beta, Backend::ExactLp)).unwrap();
        for model in [&qua, &val.model] {
            let (cvar, _) = cvar_of_costs(&model_costs(model, &data, &surface), beta).unwrap();
            assert!(cvar >= exact.objective - 1e-9);
        }
    }
}

#[test]
fn subgradient_agrees_with_exact_backend() {
    let surface = CostSurface::build(&fleet());
    for (seed, days, beta) in [(1, 8, 0.5), (2, 5, 0.3), (3, 3, 0.7), (4, 8, 0.0), (5, 8, 0.9)] {
        let data = synthetic(seed, days);
        assert!(data.len() <= 200);
        let exact = train(&data, &surface, &TrainConfig::new(beta, Backend::ExactLp)).unwrap();
        let sub = train(&data, &surface, &TrainConfig::new(beta, Backend::Subgradient)).unwrap();
        assert!(sub.diagnostics.iterations <= 5000);
        assert!(
            rel_diff(sub.objective, exact.objective) <= 1e-3,
            "seed {seed} beta {beta}: {} vs {}",
            sub.objective,
            exact.objective
        );
        assert!(sub.objective >= exact.objective - 1e-9);
    }
}

#[test]
fn subgradient_reports_non_convergence() {
    let surface = CostSurface::build(&fleet());
    let data = synthetic(1, 3);
    let mut cfg = TrainConfig::new(0.7, Backend::Subgradient);
    cfg.subgradient.iterations = 20;
    cfg.subgradient.tolerance = 1e-12;
    assert!(matches!(train(&data, &surface, &cfg), Err(riskcast_core::train::TrainError::NonConvergence { .. })));
}

#[test]
fn infeasible_sample_is_rejected() {
    let surface = CostSurface::build(&fleet());
    let data = dataset(&[(vec![1.0], 10.0), (vec![2.0], 500.0)]);
    assert!(matches!(
        train(&data, &surface, &TrainConfig::new(0.5, Backend::ExactLp)),
        Err(riskcast_core::train::TrainError::InfeasibleSample { .. })
    ));
}
