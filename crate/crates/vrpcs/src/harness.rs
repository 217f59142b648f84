//! Grid execution, saving aggregation, and plot-ready exports.
//!
//! Saving metrics pair each cell against the baseline cell with the same
//! scenario, capacity and walking threshold at the baseline reward (by
//! default 5.0, where crowd-shipping is priced out), then average per
//! reward level. Canonical CSV outputs carry no wall-clock fields so that
//! reruns of a seeded command are byte-identical; timings are reported
//! separately.

use std::collections::BTreeMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use crate::eligibility::GeoScene;
use crate::exact::{solve_exact, ExactConfig};
use crate::generator::{materialize_cell, parse_cell_id, CellSpec, GeneratorError};
use crate::heuristic::{solve_heuristic, HeuristicConfig};
use crate::model::{validate, Instance, Solution};
use crate::rng::derive_seed;
use crate::SolveError;
use thiserror::Error;

const SOLVER_STREAM: u64 = 0x6365_6C6C; // "cell"

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cell id `{0}` is not parseable")]
    BadCellId(String),
    #[error("no baseline cell at p={baseline} for scenario {scenario}, Q={capacity}, delta={delta}")]
    MissingBaseline {
        baseline: f64,
        scenario: usize,
        capacity: i64,
        delta: f64,
    },
    #[error("results line {line}: {message}")]
    BadResults { line: usize, message: String },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Exact,
    Heuristic,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Exact => "exact",
            SolverChoice::Heuristic => "heuristic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridRunConfig {
    pub solver: SolverChoice,
    /// Worker threads; 0 means rayon's default.
    pub jobs: usize,
    /// Per-cell wall-clock budget for the heuristic.
    pub budget: Option<Duration>,
    pub seed: u64,
    pub fleet_size: i64,
}

impl Default for GridRunConfig {
    fn default() -> Self {
        GridRunConfig {
            solver: SolverChoice::Heuristic,
            jobs: 0,
            budget: Some(Duration::from_secs(600)),
            seed: 0,
            fleet_size: 10,
        }
    }
}

/// Per-cell outcome row. `elapsed_ms` is diagnostic and excluded from the
/// canonical CSV.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell_id: String,
    pub solver: String,
    pub traveling_cost: f64,
    pub crowd_cost: f64,
    pub total_cost: f64,
    pub crowd_served: usize,
    pub vehicles_used: usize,
    pub elapsed_ms: u64,
    pub feasible: bool,
}

/// A result row together with the solution that produced it (absent when
/// the solver failed on that cell).
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub result: CellResult,
    pub solution: Option<Solution>,
}

fn solve_cell(
    instance: &Instance,
    config: &GridRunConfig,
    cell_index: usize,
) -> Result<Solution, SolveError> {
    match config.solver {
        SolverChoice::Exact => solve_exact(instance, &ExactConfig::default()).map(|(s, _)| s),
        SolverChoice::Heuristic => {
            let cfg = HeuristicConfig {
                seed: derive_seed(config.seed, SOLVER_STREAM, cell_index as u64),
                budget: config.budget,
                ..Default::default()
            };
            solve_heuristic(instance, &cfg).map(|(s, _)| s)
        }
    }
}

fn run_cell(cell: &CellSpec, index: usize, config: &GridRunConfig) -> CellOutcome {
    let started = std::time::Instant::now();
    let failed = |elapsed: u64| CellResult {
        cell_id: cell.cell_id.clone(),
        solver: config.solver.name().to_string(),
        traveling_cost: 0.0,
        crowd_cost: 0.0,
        total_cost: 0.0,
        crowd_served: 0,
        vehicles_used: 0,
        elapsed_ms: elapsed,
        feasible: false,
    };
    let Ok((_, instance)) = materialize_cell(cell, config.fleet_size) else {
        return CellOutcome {
            result: failed(started.elapsed().as_millis() as u64),
            solution: None,
        };
    };
    match solve_cell(&instance, config, index) {
        Ok(solution) => {
            let feasible = validate(&instance, &solution)
                .map(|r| r.feasible)
                .unwrap_or(false);
            CellOutcome {
                result: CellResult {
                    cell_id: cell.cell_id.clone(),
                    solver: config.solver.name().to_string(),
                    traveling_cost: solution.traveling_cost,
                    crowd_cost: solution.crowd_cost,
                    total_cost: solution.total_cost,
                    crowd_served: solution.crowd.len(),
                    vehicles_used: solution.vehicles_used(),
                    elapsed_ms: started.elapsed().as_millis() as u64,
                    feasible,
                },
                solution: Some(solution),
            }
        }
        Err(_) => CellOutcome {
            result: failed(started.elapsed().as_millis() as u64),
            solution: None,
        },
    }
}

/// Solve every manifest cell. Cells run in a worker pool of `jobs`
/// threads; per-cell failures are recorded in the row, never aborting the
/// grid, and results come back in manifest order regardless of scheduling.
pub fn run_grid(cells: &[CellSpec], config: &GridRunConfig) -> Vec<CellOutcome> {
    let body = || -> Vec<CellOutcome> {
        cells
            .par_iter()
            .enumerate()
            .map(|(idx, cell)| run_cell(cell, idx, config))
            .collect()
    };
    if config.jobs == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .expect("worker pool");
        pool.install(body)
    }
}

pub const RESULTS_HEADER: &str =
    "cell_id,solver,traveling_cost,crowd_cost,total_cost,crowd_served,vehicles_used,feasible";

/// Canonical results CSV (no timing columns, byte-stable for fixed seeds).
pub fn results_to_csv(results: &[CellResult]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.cell_id,
            r.solver,
            r.traveling_cost,
            r.crowd_cost,
            r.total_cost,
            r.crowd_served,
            r.vehicles_used,
            r.feasible
        ));
    }
    out
}

/// Timing sidecar (not byte-stable across runs).
pub fn timings_to_csv(results: &[CellResult]) -> String {
    let mut out = String::from("cell_id,elapsed_ms\n");
    for r in results {
        out.push_str(&format!("{},{}\n", r.cell_id, r.elapsed_ms));
    }
    out
}

/// Parse a canonical results CSV; `elapsed_ms` comes back as zero.
pub fn parse_results_csv(text: &str) -> Result<Vec<CellResult>, HarnessError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != RESULTS_HEADER {
                return Err(HarnessError::BadResults {
                    line: 1,
                    message: format!("unexpected header `{line}`"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(HarnessError::BadResults {
                line: idx + 1,
                message: format!("expected 8 fields, got {}", f.len()),
            });
        }
        let err = |message: String| HarnessError::BadResults {
            line: idx + 1,
            message,
        };
        rows.push(CellResult {
            cell_id: f[0].to_string(),
            solver: f[1].to_string(),
            traveling_cost: f[2]
                .parse()
                .map_err(|_| err(format!("bad traveling_cost `{}`", f[2])))?,
            crowd_cost: f[3]
                .parse()
                .map_err(|_| err(format!("bad crowd_cost `{}`", f[3])))?,
            total_cost: f[4]
                .parse()
                .map_err(|_| err(format!("bad total_cost `{}`", f[4])))?,
            crowd_served: f[5]
                .parse()
                .map_err(|_| err(format!("bad crowd_served `{}`", f[5])))?,
            vehicles_used: f[6]
                .parse()
                .map_err(|_| err(format!("bad vehicles_used `{}`", f[6])))?,
            elapsed_ms: 0,
            feasible: f[7]
                .parse()
                .map_err(|_| err(format!("bad feasible `{}`", f[7])))?,
        });
    }
    Ok(rows)
}

/// Savings and fleet usage per reward level, averaged over scenarios,
/// capacities and walking thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub reward: f64,
    /// Mean of `(T_base - T_p) / T_base` over paired cells.
    pub avg_traveling_saving: f64,
    /// Mean of `(O_base - O_p) / O_base` with `O` the total cost.
    pub avg_operational_saving: f64,
    pub avg_vehicles: f64,
    pub cells: usize,
}

/// Pair every feasible cell with its own baseline (same scenario, Q and
/// delta at `baseline_p`) and average savings per reward level.
pub fn aggregate(
    results: &[CellResult],
    baseline_p: f64,
) -> Result<Vec<AggregateRow>, HarnessError> {
    struct Parsed<'a> {
        scenario: usize,
        capacity: i64,
        reward: f64,
        delta: f64,
        row: &'a CellResult,
    }
    let mut parsed = Vec::with_capacity(results.len());
    for row in results {
        let (scenario, capacity, reward, delta) =
            parse_cell_id(&row.cell_id).ok_or_else(|| HarnessError::BadCellId(row.cell_id.clone()))?;
        parsed.push(Parsed {
            scenario,
            capacity,
            reward,
            delta,
            row,
        });
    }

    // Baselines keyed by (scenario, Q, delta-bits).
    let mut baselines: BTreeMap<(usize, i64, u64), &CellResult> = BTreeMap::new();
    for p in parsed.iter().filter(|c| c.reward == baseline_p && c.row.feasible) {
        baselines.insert((p.scenario, p.capacity, p.delta.to_bits()), p.row);
    }

    let mut rewards: Vec<f64> = parsed.iter().map(|c| c.reward).collect();
    rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rewards.dedup();

    let mut out = Vec::with_capacity(rewards.len());
    for reward in rewards {
        let mut t_savings = Vec::new();
        let mut o_savings = Vec::new();
        let mut vehicles = Vec::new();
        for cell in parsed.iter().filter(|c| c.reward == reward) {
            if !cell.row.feasible {
                continue;
            }
            let base = baselines
                .get(&(cell.scenario, cell.capacity, cell.delta.to_bits()))
                .ok_or(HarnessError::MissingBaseline {
                    baseline: baseline_p,
                    scenario: cell.scenario,
                    capacity: cell.capacity,
                    delta: cell.delta,
                })?;
            t_savings.push((base.traveling_cost - cell.row.traveling_cost) / base.traveling_cost);
            o_savings.push((base.total_cost - cell.row.total_cost) / base.total_cost);
            vehicles.push(cell.row.vehicles_used as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        out.push(AggregateRow {
            reward,
            avg_traveling_saving: mean(&t_savings),
            avg_operational_saving: mean(&o_savings),
            avg_vehicles: mean(&vehicles),
            cells: t_savings.len(),
        });
    }
    Ok(out)
}

pub const AGGREGATE_HEADER: &str =
    "p,avg_traveling_cost_saving,avg_operational_cost_saving,avg_vehicles,cells";

pub fn aggregates_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.reward, r.avg_traveling_saving, r.avg_operational_saving, r.avg_vehicles, r.cells
        ));
    }
    out
}

pub const PLOTS_HEADER: &str = "p,delta,scenario,Q,crowd_shipments,traveling_cost,total_cost";

/// Long-format table of crowd-shipment counts and costs versus the reward,
/// one row per cell, sorted by `(p, delta, scenario, Q)`.
pub fn plots_to_csv(results: &[CellResult]) -> Result<String, HarnessError> {
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (scenario, capacity, reward, delta) =
            parse_cell_id(&r.cell_id).ok_or_else(|| HarnessError::BadCellId(r.cell_id.clone()))?;
        rows.push((reward, delta, scenario, capacity, r));
    }
    rows.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut out = String::from(PLOTS_HEADER);
    out.push('\n');
    for (reward, delta, scenario, capacity, r) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            reward, delta, scenario, capacity, r.crowd_served, r.traveling_cost, r.total_cost
        ));
    }
    Ok(out)
}

/// GeoJSON FeatureCollection for one cell: a LineString per route (closed
/// at the depot) and a Point per customer marking how it is served.
pub fn route_geojson(
    scene: &GeoScene,
    instance: &Instance,
    solution: &Solution,
) -> serde_json::Value {
    let main = scene.main_station();
    let coord_of = |customer: usize| -> Vec<f64> {
        let c = &scene.customers[customer - 1];
        vec![c.x, c.y]
    };
    let mut features = Vec::new();
    for (idx, route) in solution.routes.iter().enumerate() {
        let mut coords = Vec::with_capacity(route.customers().len() + 2);
        coords.push(vec![main.x, main.y]);
        coords.extend(route.customers().iter().map(|&c| coord_of(c)));
        coords.push(vec![main.x, main.y]);
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": { "type": "LineString", "coordinates": coords },
            "properties": { "route": idx, "cost": route.cost(instance) },
        }));
    }
    let crowd: std::collections::BTreeSet<usize> = solution.crowd.iter().copied().collect();
    for customer in 1..=instance.num_customers() {
        let served_by = if crowd.contains(&customer) {
            "crowd"
        } else {
            "vehicle"
        };
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": coord_of(customer) },
            "properties": {
                "id": customer,
                "served_by": served_by,
                "eligible": instance.is_eligible(customer),
            },
        }));
    }
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}
