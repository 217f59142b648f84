//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use vrpcs::exact::{brute_force, min_routing_cost, solve_exact, ExactConfig};
use vrpcs::generator::{generate_grid, materialize_cell, GridSpec};
use vrpcs::harness::{
    aggregate, results_to_csv, run_grid, CellResult, GridRunConfig, SolverChoice,
};
use vrpcs::heuristic::{solve_heuristic, HeuristicConfig};
use vrpcs::milp::{build_model, certify, export_text, induced_assignment, parse_back};
use vrpcs::model::{validate, Instance};
use vrpcs::rng::SplitMix64;

fn criterion(name: &str, pass: bool, detail: &str) {
    println!(
        "{} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{name}: {detail}");
}

/// Random planar (metric) instance, feasible by construction: the fleet is
/// at least the first-fit bound `floor(2 * total / Q) + 1` (any packing
/// where at most one bin is half-empty fits), so every generated instance
/// admits a solution and all 200 count toward the criterion.
fn random_instance(seed: u64, n: usize, fleet: usize, reward: f64) -> Instance {
    let mut rng = SplitMix64::new(seed);
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|_| (rng.next_f64() * 10.0, rng.next_f64() * 10.0))
        .collect();
    let dim = n + 1;
    let mut cost = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                cost[i][j] = (dx * dx + dy * dy).sqrt();
            }
        }
    }
    let demand: Vec<i64> = (0..n).map(|_| rng.next_range_inclusive(1, 5) as i64).collect();
    let total: i64 = demand.iter().sum();
    // Capacity between the largest demand and the total, so multi-route
    // structure appears without forcing infeasibility.
    let q_min = *demand.iter().max().unwrap();
    let q_cap = q_min + rng.next_below((total - q_min + 1) as u64) as i64;
    let safe_fleet = ((2 * total / q_cap) as usize + 1).min(n);
    let fleet = if fleet == 0 { n } else { fleet.max(safe_fleet).min(n) };
    let eligible: Vec<usize> = (1..=n).filter(|_| rng.next_f64() < 0.5).collect();
    Instance::new(
        n,
        cost.clone(),
        cost,
        demand,
        q_cap,
        fleet as i64,
        reward,
        eligible,
        serde_json::Value::Null,
    )
    .unwrap()
}

/// Non-metric instance with arbitrary asymmetric costs.
fn random_rough_instance(seed: u64, n: usize, fleet: usize, reward: f64) -> Instance {
    let mut rng = SplitMix64::new(seed);
    let dim = n + 1;
    let mut cost = vec![vec![0.0; dim]; dim];
    for (i, row) in cost.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = rng.next_f64() * 10.0;
            }
        }
    }
    let demand: Vec<i64> = (0..n).map(|_| rng.next_range_inclusive(1, 5) as i64).collect();
    let q_cap = demand.iter().sum::<i64>().max(5);
    let eligible: Vec<usize> = (1..=n).filter(|_| rng.next_f64() < 0.5).collect();
    Instance::new(
        n,
        cost.clone(),
        cost,
        demand,
        q_cap,
        fleet as i64,
        reward,
        eligible,
        serde_json::Value::Null,
    )
    .unwrap()
}

#[test]
fn oracle_equivalence() {
    let started = Instant::now();
    let mut checked = 0;
    for seed in 0..200u64 {
        let n = 2 + (seed as usize % 6); // 2..=7
        let inst = if seed % 5 == 4 {
            random_rough_instance(seed, n, 1 + (seed as usize % 3), 0.5 + (seed % 4) as f64)
        } else {
            random_instance(seed, n, 1 + (seed as usize % n), 0.5 + (seed % 4) as f64)
        };
        let exact = solve_exact(&inst, &ExactConfig::default());
        let brute = brute_force(&inst);
        match (exact, brute) {
            (Ok((sol, _)), Ok(best)) => {
                assert!(
                    (sol.total_cost - best).abs() <= 1e-9,
                    "seed {seed}: exact {} vs brute {best}",
                    sol.total_cost
                );
                let report = validate(&inst, &sol).unwrap();
                assert!(report.feasible, "seed {seed}: {:?}", report.violations);
                checked += 1;
            }
            (Err(e1), Err(e2)) => {
                // Both must agree the instance is infeasible.
                assert_eq!(format!("{e1:?}"), format!("{e2:?}"), "seed {seed}");
            }
            (a, b) => panic!("seed {seed}: solvers disagree: {a:?} vs {b:?}"),
        }
    }
    let elapsed = started.elapsed();
    criterion(
        "oracle-equivalence",
        checked == 200 && elapsed < Duration::from_secs(60),
        &format!(
            "{checked}/200 instances agree within 1e-9 in {:.1}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn heuristic_soundness() {
    let total = 200u64;
    let mut solved = 0usize;
    let mut within_5pct = 0usize;
    let mut exact_match = 0usize;
    for seed in 0..total {
        let n = 2 + (seed as usize % 9); // 2..=10
        let inst = random_instance(10_000 + seed, n, 1 + (seed as usize % n), (seed % 5) as f64 / 2.0);
        let heur = solve_heuristic(&inst, &HeuristicConfig::seeded(seed));
        let exact = solve_exact(&inst, &ExactConfig::default());
        match (heur, exact) {
            (Ok((hsol, _)), Ok((esol, _))) => {
                let report = validate(&inst, &hsol).unwrap();
                assert!(report.feasible, "seed {seed}: {:?}", report.violations);
                assert!(
                    hsol.total_cost >= esol.total_cost - 1e-9,
                    "seed {seed}: heuristic beat the oracle"
                );
                solved += 1;
                let ratio = if esol.total_cost > 0.0 {
                    hsol.total_cost / esol.total_cost
                } else {
                    1.0
                };
                if ratio <= 1.05 {
                    within_5pct += 1;
                }
                if (hsol.total_cost - esol.total_cost).abs() <= 1e-9 {
                    exact_match += 1;
                }
            }
            (Err(_), Err(_)) => {} // agreed infeasible; not counted
            (a, b) => panic!("seed {seed}: disagree: {a:?} vs {b:?}"),
        }
    }
    let ratio_ok = within_5pct as f64 >= 0.99 * solved as f64;
    let match_ok = exact_match as f64 >= 0.90 * solved as f64;
    criterion(
        "heuristic-soundness",
        solved == 200 && ratio_ok && match_ok,
        &format!(
            "{solved}/200 instances: {within_5pct} within 5% (need 99%), {exact_match} exact (need 90%)"
        ),
    );
}

#[test]
fn parametric_monotonicity() {
    let rewards = [0.0, 0.5, 1.0, 1.5, 2.0, 5.0];
    let mut violations = 0;
    for k in 0..20u64 {
        let n = 5 + (k as usize % 5); // 5..=9
        let base = random_instance(20_000 + k, n, n, 0.0);
        let mut prev_cost = f64::NEG_INFINITY;
        let mut prev_crowd = usize::MAX;
        for &p in &rewards {
            let inst = base.with_reward(p).unwrap();
            let (sol, _) = solve_exact(&inst, &ExactConfig::default()).unwrap();
            if sol.total_cost < prev_cost - 1e-9 {
                violations += 1;
            }
            if sol.crowd.len() > prev_crowd {
                violations += 1;
            }
            prev_cost = sol.total_cost;
            prev_crowd = sol.crowd.len();
        }
    }
    criterion(
        "parametric-monotonicity",
        violations == 0,
        &format!("{violations} violations over 20 instances x 6 rewards (need 0)"),
    );
}

#[test]
fn boundary_identities() {
    let mut max_err_zero: f64 = 0.0;
    let mut max_err_bar: f64 = 0.0;
    for k in 0..20u64 {
        let n = 5 + (k as usize % 5);
        // Fleet slack (m = n) keeps the out-and-back exchange argument
        // airtight; a capacity-tight fleet can genuinely break the
        // identity at p-bar.
        let base = random_instance(30_000 + k, n, n, 0.0);
        assert!(base.metric_costs());

        // p = 0: optimum equals the exact CVRP over non-eligible
        // customers, and the tie-break crowds all of S.
        let (sol0, _) = solve_exact(&base, &ExactConfig::default()).unwrap();
        let vehicle_only = base.vehicle_only();
        let cvrp_v = min_routing_cost(&base, &vehicle_only).unwrap();
        max_err_zero = max_err_zero.max((sol0.total_cost - cvrp_v).abs());
        let crowd_all: Vec<usize> = base.eligible().iter().copied().collect();
        assert_eq!(sol0.crowd, crowd_all, "instance {k}: p=0 must crowd all of S");

        // p = p-bar (max out-and-back over S): optimum equals the exact
        // CVRP over everyone.
        let p_bar = base
            .eligible()
            .iter()
            .map(|&c| base.cost(0, c) + base.cost(c, 0))
            .fold(0.0f64, f64::max);
        let inst_bar = base.with_reward(p_bar.max(0.001)).unwrap();
        let (sol_bar, _) = solve_exact(&inst_bar, &ExactConfig::default()).unwrap();
        let all: Vec<usize> = (1..=n).collect();
        let cvrp_all = min_routing_cost(&base, &all).unwrap();
        max_err_bar = max_err_bar.max((sol_bar.total_cost - cvrp_all).abs());
    }
    criterion(
        "boundary-identities",
        max_err_zero <= 1e-9 && max_err_bar <= 1e-9,
        &format!("max |OptCost(0) - CVRP(V)| = {max_err_zero:.2e}, max |OptCost(p-bar) - CVRP(all)| = {max_err_bar:.2e} (need <= 1e-9)"),
    );
}

#[test]
fn table_arithmetic_reproduction() {
    let mk = |id: &str, traveling: f64, crowd_cost: f64, vehicles: usize| CellResult {
        cell_id: id.to_string(),
        solver: "external".into(),
        traveling_cost: traveling,
        crowd_cost,
        total_cost: traveling + crowd_cost,
        crowd_served: 0,
        vehicles_used: vehicles,
        elapsed_ms: 0,
        feasible: true,
    };
    // Published aggregate inputs: T_base = 111.18 at p=5, T_0 = 82.67 at p=0.
    let rows = vec![
        mk("s0-Q45-p5-d15", 111.18, 0.0, 4),
        mk("s0-Q45-p0-d15", 82.67, 0.0, 3),
    ];
    let agg = aggregate(&rows, 5.0).unwrap();
    let p0 = agg.iter().find(|r| r.reward == 0.0).unwrap();
    let p5 = agg.iter().find(|r| r.reward == 5.0).unwrap();
    let saving_pct = p0.avg_traveling_saving * 100.0;
    criterion(
        "table-arithmetic",
        (saving_pct - 25.64).abs() <= 0.01
            && p5.avg_traveling_saving == 0.0
            && p5.avg_operational_saving == 0.0,
        &format!(
            "traveling saving {saving_pct:.4}% (25.64 +- 0.01), baseline row ({}, {})",
            p5.avg_traveling_saving, p5.avg_operational_saving
        ),
    );
}

#[test]
fn milp_certificates() {
    let mut worst_obj_err: f64 = 0.0;
    for seed in 0..50u64 {
        let n = 3 + (seed as usize % 6);
        let inst = random_instance(40_000 + seed, n, 1 + (seed as usize % n), (seed % 6) as f64 / 2.0);
        let Ok((sol, _)) = solve_exact(&inst, &ExactConfig::default()) else {
            continue;
        };
        let model = build_model(&inst);
        let values = induced_assignment(&inst, &model, &sol);
        let report = certify(&model, &values);
        assert!(
            report.satisfied(),
            "seed {seed}: violated rows {:?}",
            report.violated
        );
        worst_obj_err = worst_obj_err
            .max((report.objective_with_offset - sol.total_cost).abs());

        let text = export_text(&model);
        assert_eq!(text, export_text(&model), "seed {seed}: export not byte-stable");
        let parsed = parse_back(&text).unwrap();
        assert!(
            model.structurally_equal(&parsed),
            "seed {seed}: round-trip structure mismatch"
        );
        assert_eq!(
            text,
            export_text(&parsed),
            "seed {seed}: re-export is not a fixed point"
        );
    }
    criterion(
        "milp-certificate",
        worst_obj_err <= 1e-9,
        &format!("50 oracle solutions satisfy all rows; max objective error {worst_obj_err:.2e} (<= 1e-9)"),
    );
}

#[test]
fn grid_reproduction_at_desk_scale() {
    let started = Instant::now();
    let spec = GridSpec::default(); // 100 customers, 5 x 4 x 6 x 3 = 360 cells
    let cells = generate_grid(&spec).unwrap();
    assert_eq!(cells.len(), 360);
    let config = GridRunConfig {
        solver: SolverChoice::Heuristic,
        jobs: 0,
        budget: Some(Duration::from_secs(20)),
        seed: 7,
        fleet_size: spec.fleet_size,
    };
    let outcomes = run_grid(&cells, &config);
    let rows: Vec<CellResult> = outcomes.iter().map(|o| o.result.clone()).collect();
    let all_feasible = rows.iter().all(|r| r.feasible);
    assert!(all_feasible, "some cells failed");

    let agg = aggregate(&rows, 5.0).unwrap();
    // Weak monotonicity: savings nonincreasing in p within 1 percentage
    // point, vehicles nondecreasing within 0.5.
    let mut trend_ok = true;
    let mut detail = String::new();
    for w in agg.windows(2) {
        if w[1].avg_operational_saving > w[0].avg_operational_saving + 0.01 {
            trend_ok = false;
            detail = format!(
                "operational saving rose from {:.4} (p={}) to {:.4} (p={})",
                w[0].avg_operational_saving, w[0].reward, w[1].avg_operational_saving, w[1].reward
            );
        }
        if w[1].avg_vehicles < w[0].avg_vehicles - 0.5 {
            trend_ok = false;
            detail = format!(
                "vehicles fell from {:.2} (p={}) to {:.2} (p={})",
                w[0].avg_vehicles, w[0].reward, w[1].avg_vehicles, w[1].reward
            );
        }
    }
    let elapsed = started.elapsed();
    let time_ok = elapsed < Duration::from_secs(7200);
    for row in &agg {
        println!(
            "  p={:<4} traveling saving {:>7.3}% operational saving {:>7.3}% vehicles {:>5.2} ({} cells)",
            row.reward,
            row.avg_traveling_saving * 100.0,
            row.avg_operational_saving * 100.0,
            row.avg_vehicles,
            row.cells
        );
    }
    criterion(
        "grid-desk-scale",
        all_feasible && trend_ok && time_ok,
        &format!(
            "360 cells, all feasible, trends monotone within slack, {:.0}s (< 7200s) {detail}",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn determinism_across_worker_counts() {
    let spec = GridSpec {
        customer_count: 15,
        demand_scenarios: 1,
        capacities: vec![45, 90],
        rewards: vec![0.5, 5.0],
        deltas: vec![5.0, 15.0],
        master_seed: 99,
        ..Default::default()
    };
    let cells = generate_grid(&spec).unwrap();
    let csv_for = |jobs: usize| {
        let config = GridRunConfig {
            solver: SolverChoice::Heuristic,
            jobs,
            budget: None,
            seed: 42,
            fleet_size: spec.fleet_size,
        };
        let outcomes = run_grid(&cells, &config);
        results_to_csv(&outcomes.iter().map(|o| o.result.clone()).collect::<Vec<_>>())
    };
    let serial = csv_for(1);
    let parallel = csv_for(4);
    let again = csv_for(4);

    // Same manifest from the same seed, twice.
    let manifest_a = vrpcs::generator::manifest_to_csv(&cells);
    let manifest_b = vrpcs::generator::manifest_to_csv(&generate_grid(&spec).unwrap());

    // Same MPS text from the same instance, twice.
    let (_, inst) = materialize_cell(&cells[0], spec.fleet_size).unwrap();
    let mps_a = export_text(&build_model(&inst));
    let mps_b = export_text(&build_model(&inst));

    // Same solution JSON from the same seeded solve, twice.
    let cfg = HeuristicConfig::seeded(7);
    let (sol_a, _) = solve_heuristic(&inst, &cfg).unwrap();
    let (sol_b, _) = solve_heuristic(&inst, &cfg).unwrap();
    let json_a = serde_json::to_string(&sol_a).unwrap();
    let json_b = serde_json::to_string(&sol_b).unwrap();

    criterion(
        "determinism",
        serial == parallel && parallel == again && manifest_a == manifest_b && mps_a == mps_b
            && json_a == json_b,
        "grid CSV identical for jobs=1/4/4-rerun; manifest, MPS and solution JSON byte-identical",
    );
}
