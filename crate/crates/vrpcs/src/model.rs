//! Problem instances, solutions, and the authoritative feasibility validator.
//!
//! An [`Instance`] is a complete directed graph on nodes `0..=n` where node 0
//! is the depot and `1..=n` are customers. Customers in the crowd-eligible
//! set may be served by a crowd-shipper for a fixed reward `p` instead of
//! appearing on a vehicle route. Every solver in this crate must emit
//! solutions that pass [`validate`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for comparing independently recomputed costs.
///
/// Route sums are reassociated between components, so equality checks use
/// `|a - b| <= COST_TOL * max(1, |total|)`.
pub const COST_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance must have at least one customer")]
    NoCustomers,
    #[error("matrix `{name}` must be {expected}x{expected}, got {rows} rows (row {bad_row} has {bad_len} entries)")]
    BadMatrixShape {
        name: &'static str,
        expected: usize,
        rows: usize,
        bad_row: usize,
        bad_len: usize,
    },
    #[error("arc value {name}[{i}][{j}] = {value} must be finite and non-negative")]
    BadArcValue {
        name: &'static str,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error("demand vector has {got} entries, expected {expected}")]
    BadDemandLength { got: usize, expected: usize },
    #[error("demand q[{customer}] = {demand} must be positive")]
    NonPositiveDemand { customer: usize, demand: i64 },
    #[error("demand q[{customer}] = {demand} exceeds vehicle capacity Q = {capacity}")]
    DemandExceedsCapacity {
        customer: usize,
        demand: i64,
        capacity: i64,
    },
    #[error("capacity Q = {0} must be positive")]
    NonPositiveCapacity(i64),
    #[error("fleet size m = {0} must be at least 1")]
    NonPositiveFleet(i64),
    #[error("reward p = {0} must be non-negative and finite")]
    BadReward(f64),
    #[error("eligible customer id {0} out of range 1..={1}")]
    EligibleOutOfRange(usize, usize),
    #[error("eligible set contains duplicate id {0}")]
    EligibleDuplicate(usize),
    #[error("node index {node} out of range for instance with n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
}

/// A VRPCS instance. Immutable after construction; construction rejects
/// structurally infeasible data (e.g. a demand exceeding vehicle capacity).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct Instance {
    n: usize,
    cost: Vec<Vec<f64>>,
    length: Vec<Vec<f64>>,
    demand: Vec<i64>,
    capacity: i64,
    fleet_size: usize,
    reward: f64,
    eligible: BTreeSet<usize>,
    metric_costs: bool,
    meta: serde_json::Value,
}

/// Wire format: `{"n", "cost", "length", "demand", "Q", "m", "p",
/// "eligible", "metricCosts", "meta"}`.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    cost: Vec<Vec<f64>>,
    length: Vec<Vec<f64>>,
    demand: Vec<i64>,
    #[serde(rename = "Q")]
    q: i64,
    m: i64,
    p: f64,
    eligible: Vec<usize>,
    #[serde(rename = "metricCosts", default)]
    metric_costs: bool,
    #[serde(default)]
    meta: serde_json::Value,
}

impl TryFrom<InstanceJson> for Instance {
    type Error = ModelError;
    fn try_from(j: InstanceJson) -> Result<Self, ModelError> {
        // The stored flag is advisory; ingestion re-verifies the triangle
        // inequality and records what actually holds.
        Instance::new(
            j.n, j.cost, j.length, j.demand, j.q, j.m, j.p, j.eligible, j.meta,
        )
    }
}

impl From<Instance> for InstanceJson {
    fn from(i: Instance) -> Self {
        InstanceJson {
            n: i.n,
            cost: i.cost,
            length: i.length,
            demand: i.demand,
            q: i.capacity,
            m: i.fleet_size as i64,
            p: i.reward,
            eligible: i.eligible.into_iter().collect(),
            metric_costs: i.metric_costs,
            meta: i.meta,
        }
    }
}

impl Instance {
    /// Build and check an instance. `cost` and `length` are `(n+1) x (n+1)`
    /// with the diagonal ignored. `demand[k]` is the demand of customer
    /// `k+1`. `eligible` lists crowd-servable customers (any order).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        mut cost: Vec<Vec<f64>>,
        mut length: Vec<Vec<f64>>,
        demand: Vec<i64>,
        capacity: i64,
        fleet_size: i64,
        reward: f64,
        eligible: Vec<usize>,
        meta: serde_json::Value,
    ) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::NoCustomers);
        }
        let dim = n + 1;
        // The diagonal carries no information; normalize it so that
        // detour formulas like c[prev][next] stay correct when prev == next.
        for mat in [&mut cost, &mut length] {
            for (i, row) in mat.iter_mut().enumerate() {
                if i < row.len() {
                    row[i] = 0.0;
                }
            }
        }
        for (name, mat) in [("cost", &cost), ("length", &length)] {
            if mat.len() != dim {
                return Err(ModelError::BadMatrixShape {
                    name,
                    expected: dim,
                    rows: mat.len(),
                    bad_row: 0,
                    bad_len: 0,
                });
            }
            for (i, row) in mat.iter().enumerate() {
                if row.len() != dim {
                    return Err(ModelError::BadMatrixShape {
                        name,
                        expected: dim,
                        rows: mat.len(),
                        bad_row: i,
                        bad_len: row.len(),
                    });
                }
                for (j, &v) in row.iter().enumerate() {
                    if i != j && (!v.is_finite() || v < 0.0) {
                        return Err(ModelError::BadArcValue { name, i, j, value: v });
                    }
                }
            }
        }
        if demand.len() != n {
            return Err(ModelError::BadDemandLength {
                got: demand.len(),
                expected: n,
            });
        }
        if capacity <= 0 {
            return Err(ModelError::NonPositiveCapacity(capacity));
        }
        if fleet_size < 1 {
            return Err(ModelError::NonPositiveFleet(fleet_size));
        }
        if !reward.is_finite() || reward < 0.0 {
            return Err(ModelError::BadReward(reward));
        }
        for (k, &q) in demand.iter().enumerate() {
            if q <= 0 {
                return Err(ModelError::NonPositiveDemand {
                    customer: k + 1,
                    demand: q,
                });
            }
            if q > capacity {
                return Err(ModelError::DemandExceedsCapacity {
                    customer: k + 1,
                    demand: q,
                    capacity,
                });
            }
        }
        let mut set = BTreeSet::new();
        for &id in &eligible {
            if id < 1 || id > n {
                return Err(ModelError::EligibleOutOfRange(id, n));
            }
            if !set.insert(id) {
                return Err(ModelError::EligibleDuplicate(id));
            }
        }
        let metric_costs = is_metric(&cost);
        Ok(Instance {
            n,
            cost,
            length,
            demand,
            capacity,
            fleet_size: fleet_size as usize,
            reward,
            eligible: set,
            metric_costs,
            meta,
        })
    }

    /// Number of customers (node 0 is the depot, nodes `1..=n` customers).
    pub fn num_customers(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i][j]
    }

    #[inline]
    pub fn length(&self, i: usize, j: usize) -> f64 {
        self.length[i][j]
    }

    /// Demand of customer `i` (`1..=n`).
    #[inline]
    pub fn demand(&self, i: usize) -> i64 {
        self.demand[i - 1]
    }

    pub fn capacity(&self) -> i64 {
        self.capacity
    }

    pub fn fleet_size(&self) -> usize {
        self.fleet_size
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }

    pub fn eligible(&self) -> &BTreeSet<usize> {
        &self.eligible
    }

    pub fn is_eligible(&self, customer: usize) -> bool {
        self.eligible.contains(&customer)
    }

    /// Customers that must be vehicle-served (complement of the eligible set).
    pub fn vehicle_only(&self) -> Vec<usize> {
        (1..=self.n).filter(|i| !self.eligible.contains(i)).collect()
    }

    pub fn metric_costs(&self) -> bool {
        self.metric_costs
    }

    pub fn meta(&self) -> &serde_json::Value {
        &self.meta
    }

    /// Replace the reward, keeping everything else (used by parameter sweeps).
    pub fn with_reward(&self, reward: f64) -> Result<Instance, ModelError> {
        if !reward.is_finite() || reward < 0.0 {
            return Err(ModelError::BadReward(reward));
        }
        let mut out = self.clone();
        out.reward = reward;
        Ok(out)
    }

    /// Replace the eligible set, keeping everything else.
    pub fn with_eligible(&self, eligible: Vec<usize>) -> Result<Instance, ModelError> {
        let mut set = BTreeSet::new();
        for &id in &eligible {
            if id < 1 || id > self.n {
                return Err(ModelError::EligibleOutOfRange(id, self.n));
            }
            if !set.insert(id) {
                return Err(ModelError::EligibleDuplicate(id));
            }
        }
        let mut out = self.clone();
        out.eligible = set;
        Ok(out)
    }

    fn check_node(&self, node: usize) -> Result<(), ModelError> {
        if node < 1 || node > self.n {
            Err(ModelError::NodeOutOfRange { node, n: self.n })
        } else {
            Ok(())
        }
    }
}

/// Triangle inequality check with a relative slack for rounded inputs.
fn is_metric(cost: &[Vec<f64>]) -> bool {
    let dim = cost.len();
    let scale: f64 = cost
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    let tol = COST_TOL * scale;
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            for k in 0..dim {
                if k == i || k == j {
                    continue;
                }
                if cost[i][j] > cost[i][k] + cost[k][j] + tol {
                    return false;
                }
            }
        }
    }
    true
}

/// An ordered customer sequence; the depot is implicit at both ends.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route(pub Vec<usize>);

impl Route {
    pub fn customers(&self) -> &[usize] {
        &self.0
    }

    pub fn load(&self, instance: &Instance) -> i64 {
        self.0.iter().map(|&c| instance.demand(c)).sum()
    }

    /// Arc-cost sum `c[0][r1] + c[r1][r2] + ... + c[rk][0]`.
    pub fn cost(&self, instance: &Instance) -> f64 {
        let mut total = 0.0;
        let mut prev = 0usize;
        for &c in &self.0 {
            total += instance.cost(prev, c);
            prev = c;
        }
        total + instance.cost(prev, 0)
    }
}

/// A set of depot-rooted routes plus the crowd-served customers, with the
/// cost breakdown as reported by the solver that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
    pub crowd: Vec<usize>,
    #[serde(rename = "travelingCost")]
    pub traveling_cost: f64,
    #[serde(rename = "crowdCost")]
    pub crowd_cost: f64,
    #[serde(rename = "totalCost")]
    pub total_cost: f64,
}

impl Solution {
    /// Assemble a solution, computing the cost breakdown from the instance.
    pub fn assemble(instance: &Instance, routes: Vec<Route>, crowd: Vec<usize>) -> Solution {
        let (traveling_cost, crowd_cost, total_cost) = solution_cost(instance, &routes, &crowd);
        Solution {
            routes,
            crowd,
            traveling_cost,
            crowd_cost,
            total_cost,
        }
    }

    /// Sort routes lexicographically and the crowd list ascending. Cost
    /// fields are untouched (route order does not affect them).
    pub fn canonicalize(&mut self) {
        self.routes.sort();
        self.crowd.sort_unstable();
    }

    pub fn vehicles_used(&self) -> usize {
        self.routes.len()
    }

    /// Total order used to merge results from concurrent workers:
    /// cost first, then the canonical encoding.
    pub fn ordering_key(&self) -> (f64, Vec<usize>, Vec<Vec<usize>>) {
        let mut crowd = self.crowd.clone();
        crowd.sort_unstable();
        let mut routes: Vec<Vec<usize>> = self.routes.iter().map(|r| r.0.clone()).collect();
        routes.sort();
        (self.total_cost, crowd, routes)
    }
}

/// Cost breakdown of a candidate assignment:
/// `(traveling, crowd, total)` with `crowd = p * |crowdServed|`.
pub fn solution_cost(instance: &Instance, routes: &[Route], crowd: &[usize]) -> (f64, f64, f64) {
    let traveling: f64 = routes.iter().map(|r| r.cost(instance)).sum();
    let crowd_cost = instance.reward() * crowd.len() as f64;
    (traveling, crowd_cost, traveling + crowd_cost)
}

/// A single feasibility violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// Route contains no customers.
    EmptyRoute { route: usize },
    /// Customer appears more than once across routes and the crowd set.
    ServedTwice { customer: usize },
    /// Customer appears in no route and not in the crowd set.
    Unserved { customer: usize },
    /// Crowd-served customer is outside the eligible set.
    NotEligible { customer: usize },
    /// Route load exceeds vehicle capacity.
    CapacityExceeded { route: usize, load: i64, capacity: i64 },
    /// More routes than available vehicles.
    TooManyRoutes { routes: usize, fleet: usize },
    /// A stored cost field disagrees with the recomputed value.
    CostMismatch {
        field: &'static str,
        stored: f64,
        recomputed: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptyRoute { route } => write!(f, "route {route} is empty"),
            Violation::ServedTwice { customer } => write!(f, "customer {customer} served twice"),
            Violation::Unserved { customer } => write!(f, "customer {customer} unserved"),
            Violation::NotEligible { customer } => {
                write!(f, "customer {customer} crowd-served but not eligible")
            }
            Violation::CapacityExceeded { route, load, capacity } => {
                write!(f, "route {route} load {load} exceeds capacity {capacity}")
            }
            Violation::TooManyRoutes { routes, fleet } => {
                write!(f, "{routes} routes exceed fleet size {fleet}")
            }
            Violation::CostMismatch { field, stored, recomputed } => {
                write!(f, "{field} stored {stored} but recomputed {recomputed}")
            }
        }
    }
}

/// Outcome of validating a solution against an instance.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    /// Cost breakdown recomputed from scratch, independent of the fields
    /// stored in the solution.
    #[serde(rename = "travelingCost")]
    pub traveling_cost: f64,
    #[serde(rename = "crowdCost")]
    pub crowd_cost: f64,
    #[serde(rename = "totalCost")]
    pub total_cost: f64,
}

/// Check every solution invariant and recompute the cost breakdown.
///
/// Out-of-range node indices are a structural error (`Err`), distinct from
/// infeasibility (`Ok` with violations).
pub fn validate(instance: &Instance, solution: &Solution) -> Result<ValidationReport, ModelError> {
    for route in &solution.routes {
        for &c in route.customers() {
            instance.check_node(c)?;
        }
    }
    for &c in &solution.crowd {
        instance.check_node(c)?;
    }

    let mut violations = Vec::new();
    let n = instance.num_customers();
    let mut seen = vec![0u32; n + 1];

    for (idx, route) in solution.routes.iter().enumerate() {
        if route.customers().is_empty() {
            violations.push(Violation::EmptyRoute { route: idx });
            continue;
        }
        for &c in route.customers() {
            seen[c] += 1;
        }
        let load = route.load(instance);
        if load > instance.capacity() {
            violations.push(Violation::CapacityExceeded {
                route: idx,
                load,
                capacity: instance.capacity(),
            });
        }
    }
    for &c in &solution.crowd {
        seen[c] += 1;
        if !instance.is_eligible(c) {
            violations.push(Violation::NotEligible { customer: c });
        }
    }
    for c in 1..=n {
        match seen[c] {
            0 => violations.push(Violation::Unserved { customer: c }),
            1 => {}
            _ => violations.push(Violation::ServedTwice { customer: c }),
        }
    }
    if solution.routes.len() > instance.fleet_size() {
        violations.push(Violation::TooManyRoutes {
            routes: solution.routes.len(),
            fleet: instance.fleet_size(),
        });
    }

    let (traveling, crowd_cost, total) =
        solution_cost(instance, &solution.routes, &solution.crowd);
    let tol = COST_TOL * total.abs().max(1.0);
    for (field, stored, recomputed) in [
        ("travelingCost", solution.traveling_cost, traveling),
        ("crowdCost", solution.crowd_cost, crowd_cost),
        ("totalCost", solution.total_cost, total),
    ] {
        if (stored - recomputed).abs() > tol {
            violations.push(Violation::CostMismatch {
                field,
                stored,
                recomputed,
            });
        }
    }

    Ok(ValidationReport {
        feasible: violations.is_empty(),
        violations,
        traveling_cost: traveling,
        crowd_cost: crowd_cost,
        total_cost: total,
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Instance with all arc costs equal to `uniform_cost`.
    pub fn uniform_instance(
        n: usize,
        uniform_cost: f64,
        demand: Vec<i64>,
        capacity: i64,
        fleet: i64,
        reward: f64,
        eligible: Vec<usize>,
    ) -> Instance {
        let dim = n + 1;
        let mut cost = vec![vec![uniform_cost; dim]; dim];
        for (i, row) in cost.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        Instance::new(
            n,
            cost.clone(),
            cost,
            demand,
            capacity,
            fleet,
            reward,
            eligible,
            serde_json::Value::Null,
        )
        .unwrap()
    }

    /// Instance from an explicit cost matrix, `length == cost`.
    pub fn matrix_instance(
        cost: Vec<Vec<f64>>,
        demand: Vec<i64>,
        capacity: i64,
        fleet: i64,
        reward: f64,
        eligible: Vec<usize>,
    ) -> Instance {
        let n = cost.len() - 1;
        Instance::new(
            n,
            cost.clone(),
            cost,
            demand,
            capacity,
            fleet,
            reward,
            eligible,
            serde_json::Value::Null,
        )
        .unwrap()
    }
}
