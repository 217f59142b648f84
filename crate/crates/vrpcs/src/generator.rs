//! Seeded generation of city-like scenes and the full experiment grid.
//!
//! The synthetic city follows the study design: 17 metro stations evenly
//! spaced along an L-shaped line, the station nearest the line's arc-length
//! midpoint flagged main and co-located with the depot, and customers drawn
//! from a mixture of station-centred clusters (a population-density proxy)
//! and a uniform background. Arc costs are Euclidean distances scaled by a
//! road-circuity factor, in kilometres, so the cost matrix stays metric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eligibility::{
    compute_eligibility, CustomerPoint, EligibilityError, GeoScene, StationPoint,
    DEFAULT_WALKING_SPEED,
};
use crate::model::{Instance, ModelError};
use crate::rng::{derive_seed, SplitMix64};

/// Stations on the metro line.
pub const STATION_COUNT: usize = 17;
/// Legs of the L-shaped line, metres (north-south then west-east).
pub const LEG_NORTH: f64 = 8_000.0;
pub const LEG_EAST: f64 = 6_000.0;
/// Euclidean-to-road-distance factor.
pub const ROAD_CIRCUITY: f64 = 1.3;
/// Standard deviation of a station-centred customer cluster, metres.
const CLUSTER_SIGMA: f64 = 600.0;
/// Share of customers drawn from clusters; the rest are uniform over the
/// station bounding box inflated by 30%.
const CLUSTER_SHARE: f64 = 0.6;
const BBOX_INFLATION: f64 = 0.3;

// Substream tags for seed derivation.
const STREAM_CELL: u64 = 1;
const STREAM_SCENE: u64 = 2;
const STREAM_DEMAND: u64 = 3;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("demand vector length {got} does not match customer count {expected}")]
    DemandLength { got: usize, expected: usize },
    #[error(transparent)]
    Eligibility(#[from] EligibilityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

/// The experiment grid: demand scenarios crossed with capacities, rewards
/// and walking-time thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "customerCount", default = "default_customers")]
    pub customer_count: usize,
    #[serde(rename = "demandScenarios", default = "default_scenarios")]
    pub demand_scenarios: usize,
    #[serde(default = "default_capacities")]
    pub capacities: Vec<i64>,
    #[serde(rename = "fleetSize", default = "default_fleet")]
    pub fleet_size: i64,
    #[serde(default = "default_rewards")]
    pub rewards: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(rename = "masterSeed", default = "default_seed")]
    pub master_seed: u64,
}

fn default_customers() -> usize {
    100
}
fn default_scenarios() -> usize {
    5
}
fn default_capacities() -> Vec<i64> {
    vec![360, 180, 90, 45]
}
fn default_fleet() -> i64 {
    10
}
fn default_rewards() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 1.5, 2.0, 5.0]
}
fn default_deltas() -> Vec<f64> {
    vec![5.0, 10.0, 15.0]
}
fn default_seed() -> u64 {
    1
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            customer_count: default_customers(),
            demand_scenarios: default_scenarios(),
            capacities: default_capacities(),
            fleet_size: default_fleet(),
            rewards: default_rewards(),
            deltas: default_deltas(),
            master_seed: default_seed(),
        }
    }
}

/// One grid cell: everything needed to rebuild its instance from scratch.
/// Geometry and demands depend only on the scenario, so cells within a
/// scenario share customers and differ in `Q`, `p`, `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub cell_id: String,
    pub scenario: usize,
    pub capacity: i64,
    pub reward: f64,
    pub delta: f64,
    pub seed: u64,
    pub customer_count: usize,
    pub eligible_count: usize,
}

pub fn cell_id(scenario: usize, capacity: i64, reward: f64, delta: f64) -> String {
    format!("s{scenario}-Q{capacity}-p{reward}-d{delta}")
}

/// Parse `s0-Q360-p0.5-d5` back into `(scenario, Q, p, delta)`.
pub fn parse_cell_id(id: &str) -> Option<(usize, i64, f64, f64)> {
    let mut parts = id.split('-');
    let scenario = parts.next()?.strip_prefix('s')?.parse().ok()?;
    let capacity = parts.next()?.strip_prefix('Q')?.parse().ok()?;
    let reward = parts.next()?.strip_prefix('p')?.parse().ok()?;
    let delta = parts.next()?.strip_prefix('d')?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((scenario, capacity, reward, delta))
}

/// Station positions along the L-polyline, evenly spaced by arc length.
fn station_positions() -> Vec<(f64, f64)> {
    let total = LEG_NORTH + LEG_EAST;
    let spacing = total / (STATION_COUNT - 1) as f64;
    (0..STATION_COUNT)
        .map(|k| {
            let s = k as f64 * spacing;
            if s <= LEG_NORTH {
                (0.0, LEG_NORTH - s)
            } else {
                (s - LEG_NORTH, 0.0)
            }
        })
        .collect()
}

/// Generate a scene: the fixed station line plus `customer_count` customers
/// sampled deterministically from `seed`.
pub fn generate_scene(seed: u64, customer_count: usize) -> GeoScene {
    let positions = station_positions();
    let total = LEG_NORTH + LEG_EAST;
    let spacing = total / (STATION_COUNT - 1) as f64;
    // Station nearest the arc-length midpoint is the main one.
    let main_idx = (total / 2.0 / spacing).round() as usize;

    let stations: Vec<StationPoint> = positions
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| StationPoint {
            id: k + 1,
            x,
            y,
            main: k == main_idx,
        })
        .collect();

    let min_x = 0.0;
    let max_x = LEG_EAST;
    let min_y = 0.0;
    let max_y = LEG_NORTH;
    let half_grow_x = (max_x - min_x) * BBOX_INFLATION / 2.0;
    let half_grow_y = (max_y - min_y) * BBOX_INFLATION / 2.0;
    let (lo_x, hi_x) = (min_x - half_grow_x, max_x + half_grow_x);
    let (lo_y, hi_y) = (min_y - half_grow_y, max_y + half_grow_y);

    let mut rng = SplitMix64::new(seed);
    let customers: Vec<CustomerPoint> = (1..=customer_count)
        .map(|id| {
            if rng.next_f64() < CLUSTER_SHARE {
                let st = &positions[rng.next_below(STATION_COUNT as u64) as usize];
                CustomerPoint {
                    id,
                    x: st.0 + CLUSTER_SIGMA * rng.next_normal(),
                    y: st.1 + CLUSTER_SIGMA * rng.next_normal(),
                }
            } else {
                CustomerPoint {
                    id,
                    x: lo_x + (hi_x - lo_x) * rng.next_f64(),
                    y: lo_y + (hi_y - lo_y) * rng.next_f64(),
                }
            }
        })
        .collect();

    GeoScene {
        customers,
        stations,
        walking_speed: DEFAULT_WALKING_SPEED,
    }
}

/// Demands for one scenario: integers uniform on `{1..5}`.
pub fn demand_vector(seed: u64, customer_count: usize) -> Vec<i64> {
    let mut rng = SplitMix64::new(seed);
    (0..customer_count)
        .map(|_| rng.next_range_inclusive(1, 5) as i64)
        .collect()
}

/// Build an instance from a scene: the depot sits on the main station,
/// costs and lengths are circuity-scaled Euclidean kilometres, and the
/// eligible set comes from the walking-time threshold `delta`.
pub fn scene_to_instance(
    scene: &GeoScene,
    demands: &[i64],
    capacity: i64,
    fleet_size: i64,
    reward: f64,
    delta: f64,
) -> Result<Instance, GeneratorError> {
    let n = scene.customers.len();
    if demands.len() != n {
        return Err(GeneratorError::DemandLength {
            got: demands.len(),
            expected: n,
        });
    }
    let (_, eligible) = compute_eligibility(scene, delta)?;
    let main = scene.main_station();
    let mut coords = Vec::with_capacity(n + 1);
    coords.push((main.x, main.y));
    coords.extend(scene.customers.iter().map(|c| (c.x, c.y)));

    let dim = n + 1;
    let mut cost = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                let dx = coords[i].0 - coords[j].0;
                let dy = coords[i].1 - coords[j].1;
                cost[i][j] = (dx * dx + dy * dy).sqrt() * ROAD_CIRCUITY / 1000.0;
            }
        }
    }

    let meta = serde_json::json!({
        "delta": delta,
        "circuity": ROAD_CIRCUITY,
        "walkingSpeed": scene.walking_speed,
    });
    Ok(Instance::new(
        n,
        cost.clone(),
        cost,
        demands.to_vec(),
        capacity,
        fleet_size,
        reward,
        eligible,
        meta,
    )?)
}

/// Seed of a grid cell; geometry and demands hang off the scenario only.
pub fn cell_seed(master_seed: u64, scenario: usize) -> u64 {
    derive_seed(master_seed, STREAM_CELL, scenario as u64)
}

/// Scene and demand vector for one scenario of a grid.
pub fn scenario_data(spec: &GridSpec, scenario: usize) -> (GeoScene, Vec<i64>) {
    let seed = cell_seed(spec.master_seed, scenario);
    let scene = generate_scene(derive_seed(seed, STREAM_SCENE, 0), spec.customer_count);
    let demands = demand_vector(derive_seed(seed, STREAM_DEMAND, 0), spec.customer_count);
    (scene, demands)
}

/// Enumerate all grid cells (scenario-major, then capacity, reward, delta).
/// Instances are not built here; use [`materialize_cell`].
pub fn generate_grid(spec: &GridSpec) -> Result<Vec<CellSpec>, GeneratorError> {
    let mut cells = Vec::with_capacity(
        spec.demand_scenarios * spec.capacities.len() * spec.rewards.len() * spec.deltas.len(),
    );
    for scenario in 0..spec.demand_scenarios {
        let seed = cell_seed(spec.master_seed, scenario);
        let (scene, _) = scenario_data(spec, scenario);
        for &capacity in &spec.capacities {
            for &reward in &spec.rewards {
                for &delta in &spec.deltas {
                    let (_, eligible) = compute_eligibility(&scene, delta)?;
                    cells.push(CellSpec {
                        cell_id: cell_id(scenario, capacity, reward, delta),
                        scenario,
                        capacity,
                        reward,
                        delta,
                        seed,
                        customer_count: spec.customer_count,
                        eligible_count: eligible.len(),
                    });
                }
            }
        }
    }
    Ok(cells)
}

/// Rebuild a cell's scene and instance from its manifest row. Only the
/// fleet size is not part of the row; it comes from the grid spec.
pub fn materialize_cell(
    cell: &CellSpec,
    fleet_size: i64,
) -> Result<(GeoScene, Instance), GeneratorError> {
    let scene = generate_scene(
        derive_seed(cell.seed, STREAM_SCENE, 0),
        cell.customer_count,
    );
    let demands = demand_vector(
        derive_seed(cell.seed, STREAM_DEMAND, 0),
        cell.customer_count,
    );
    let instance = scene_to_instance(
        &scene,
        &demands,
        cell.capacity,
        fleet_size,
        cell.reward,
        cell.delta,
    )?;
    Ok((scene, instance))
}

pub const MANIFEST_HEADER: &str = "cell_id,scenario,Q,p,delta,seed,n,|S|";

/// Grid manifest as CSV, one row per cell.
pub fn manifest_to_csv(cells: &[CellSpec]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.cell_id,
            c.scenario,
            c.capacity,
            c.reward,
            c.delta,
            c.seed,
            c.customer_count,
            c.eligible_count
        ));
    }
    out
}

/// Parse a manifest produced by [`manifest_to_csv`].
pub fn parse_manifest_csv(text: &str) -> Result<Vec<CellSpec>, GeneratorError> {
    let mut cells = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != MANIFEST_HEADER {
                return Err(GeneratorError::Manifest {
                    line: 1,
                    message: format!("unexpected header `{line}`"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(GeneratorError::Manifest {
                line: idx + 1,
                message: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let parse_err = |message: String| GeneratorError::Manifest {
            line: idx + 1,
            message,
        };
        cells.push(CellSpec {
            cell_id: fields[0].to_string(),
            scenario: fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad scenario `{}`", fields[1])))?,
            capacity: fields[2]
                .parse()
                .map_err(|_| parse_err(format!("bad Q `{}`", fields[2])))?,
            reward: fields[3]
                .parse()
                .map_err(|_| parse_err(format!("bad p `{}`", fields[3])))?,
            delta: fields[4]
                .parse()
                .map_err(|_| parse_err(format!("bad delta `{}`", fields[4])))?,
            seed: fields[5]
                .parse()
                .map_err(|_| parse_err(format!("bad seed `{}`", fields[5])))?,
            customer_count: fields[6]
                .parse()
                .map_err(|_| parse_err(format!("bad n `{}`", fields[6])))?,
            eligible_count: fields[7]
                .parse()
                .map_err(|_| parse_err(format!("bad |S| `{}`", fields[7])))?,
        });
    }
    Ok(cells)
}
