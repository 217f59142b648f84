//! Scalable heuristic: parallel-savings construction plus multi-neighborhood
//! local search with a crowd-toggle move.
//!
//! Construction runs Clarke-Wright parallel savings over all customers with
//! the crowd ignored, then coerces the route count under the fleet size by
//! merging the cheapest route pair until it fits. Improvement sweeps apply,
//! per neighborhood in configured order, the single best improving move:
//! crowd-toggle (route customer to crowd when the reward undercuts the
//! removal detour, and back when a cheap insertion undercuts the reward),
//! inter-route relocate, inter-route swap, and intra-route 2-opt. The best
//! of `restarts` seeded restarts is kept under a (cost, canonical encoding)
//! total order, so the result is independent of restart scheduling.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Instance, Route, Solution};
use crate::rng::{derive_seed, SplitMix64};
use crate::SolveError;

/// Moves with a smaller gain than this are treated as non-improving, which
/// keeps float noise from cycling the search.
const MIN_IMPROVEMENT: f64 = 1e-9;

/// Hard cap on sweeps per restart; unreachable in practice since every
/// sweep must improve by at least `MIN_IMPROVEMENT` to continue.
const MAX_SWEEPS: u64 = 100_000;

const RESTART_STREAM: u64 = 0x7265_7374_6172_74; // "restart"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Neighborhood {
    CrowdToggle,
    Relocate,
    Swap,
    TwoOpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Improvement {
    BestOfNeighborhood,
    FirstImprovement,
}

#[derive(Debug, Clone)]
pub struct HeuristicConfig {
    pub seed: u64,
    pub restarts: u32,
    pub move_order: Vec<Neighborhood>,
    pub improvement: Improvement,
    pub max_non_improving_sweeps: u32,
    /// Multiplicative perturbation of savings values on restarts after the
    /// first. Exact savings ties are vanishingly rare on float costs, so
    /// tie-shuffling alone leaves every restart constructing the same
    /// routes; the jitter is what makes restarts explore. Restart 0 always
    /// runs pure savings.
    pub savings_jitter: f64,
    /// Wall-clock budget; checked between restarts, so a started restart
    /// always completes. When set, restarts run sequentially.
    pub budget: Option<Duration>,
    /// Record one trace event per accepted move.
    pub trace: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            seed: 0,
            restarts: 10,
            move_order: vec![
                Neighborhood::CrowdToggle,
                Neighborhood::Relocate,
                Neighborhood::Swap,
                Neighborhood::TwoOpt,
            ],
            improvement: Improvement::BestOfNeighborhood,
            max_non_improving_sweeps: 2,
            savings_jitter: 0.15,
            budget: None,
            trace: false,
        }
    }
}

impl HeuristicConfig {
    pub fn seeded(seed: u64) -> Self {
        HeuristicConfig {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub restart: u32,
    pub sweep: u64,
    pub neighborhood: Neighborhood,
    pub delta: f64,
    pub cost_after: f64,
}

/// What the run did; the baseline for the gap is the construction cost of
/// the winning restart (no lower bound is available).
#[derive(Debug, Clone, Serialize)]
pub struct HeuristicReport {
    pub construction_cost: f64,
    pub final_cost: f64,
    pub improvement_over_construction: f64,
    pub restarts_completed: u32,
    /// Final cost per completed restart, by restart index.
    pub restart_costs: Vec<f64>,
    pub sweeps: u64,
    pub elapsed_ms: u64,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MoveError {
    #[error("route index {0} out of range")]
    BadRoute(usize),
    #[error("position {0} out of range")]
    BadPosition(usize),
    #[error("customer {0} is not crowd-served")]
    NotCrowdServed(usize),
    #[error("customer {0} is not crowd-eligible")]
    NotEligible(usize),
    #[error("swap within one route is not defined")]
    SameRouteSwap,
    #[error("2-opt segment bounds {0}..={1} invalid")]
    BadSegment(usize, usize),
}

/// A single local-search move on a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Move {
    /// Take the customer at `routes[route][position]` off its route and
    /// serve it by crowd (customer must be eligible).
    CrowdRemove { route: usize, position: usize },
    /// Insert crowd-served `customer` into `routes[route]` before
    /// `position`; `route == routes.len()` opens a new route.
    CrowdInsert {
        customer: usize,
        route: usize,
        position: usize,
    },
    /// Remove the customer at `from` and reinsert before `to_pos` of
    /// `to_route` (positions in the route as it looks after removal).
    Relocate {
        from_route: usize,
        from_pos: usize,
        to_route: usize,
        to_pos: usize,
    },
    /// Move every customer of one route (all crowd-eligible) to the crowd
    /// and drop the route. Single toggles cannot reach this state when the
    /// route stays worthwhile for each customer's neighbours.
    CrowdDropRoute { route: usize },
    /// Exchange two customers between two distinct routes.
    Swap {
        route_a: usize,
        pos_a: usize,
        route_b: usize,
        pos_b: usize,
    },
    /// Reverse the segment `start..=end` of one route.
    TwoOpt {
        route: usize,
        start: usize,
        end: usize,
    },
}

fn node_at(route: &[usize], pos: isize) -> usize {
    if pos < 0 || pos as usize >= route.len() {
        0
    } else {
        route[pos as usize]
    }
}

/// Signed cost change of applying `mv` to `solution`; exactly the
/// difference of the full solution cost after and before, up to float noise.
pub fn neighborhood_delta(
    instance: &Instance,
    solution: &Solution,
    mv: Move,
) -> Result<f64, MoveError> {
    let routes = &solution.routes;
    let get_route = |r: usize| -> Result<&[usize], MoveError> {
        routes
            .get(r)
            .map(|rt| rt.customers())
            .ok_or(MoveError::BadRoute(r))
    };
    match mv {
        Move::CrowdRemove { route, position } => {
            let seq = get_route(route)?;
            if position >= seq.len() {
                return Err(MoveError::BadPosition(position));
            }
            let c = seq[position];
            if !instance.is_eligible(c) {
                return Err(MoveError::NotEligible(c));
            }
            let a = node_at(seq, position as isize - 1);
            let b = node_at(seq, position as isize + 1);
            Ok(instance.reward()
                - (instance.cost(a, c) + instance.cost(c, b) - instance.cost(a, b)))
        }
        Move::CrowdInsert {
            customer,
            route,
            position,
        } => {
            if !solution.crowd.contains(&customer) {
                return Err(MoveError::NotCrowdServed(customer));
            }
            if route == routes.len() {
                if position != 0 {
                    return Err(MoveError::BadPosition(position));
                }
                return Ok(instance.cost(0, customer) + instance.cost(customer, 0)
                    - instance.reward());
            }
            let seq = get_route(route)?;
            if position > seq.len() {
                return Err(MoveError::BadPosition(position));
            }
            let a = node_at(seq, position as isize - 1);
            let b = node_at(seq, position as isize);
            Ok(instance.cost(a, customer) + instance.cost(customer, b) - instance.cost(a, b)
                - instance.reward())
        }
        Move::CrowdDropRoute { route } => {
            let seq = get_route(route)?;
            for &c in seq {
                if !instance.is_eligible(c) {
                    return Err(MoveError::NotEligible(c));
                }
            }
            Ok(instance.reward() * seq.len() as f64 - arc_sum(instance, seq))
        }
        Move::Relocate {
            from_route,
            from_pos,
            to_route,
            to_pos,
        } => {
            let from = get_route(from_route)?;
            if from_pos >= from.len() {
                return Err(MoveError::BadPosition(from_pos));
            }
            let c = from[from_pos];
            if from_route == to_route {
                // Positions shift after removal; compute on a scratch copy.
                let mut reduced: Vec<usize> = from.to_vec();
                reduced.remove(from_pos);
                if to_pos > reduced.len() {
                    return Err(MoveError::BadPosition(to_pos));
                }
                let before = arc_sum(instance, from);
                reduced.insert(to_pos, c);
                Ok(arc_sum(instance, &reduced) - before)
            } else {
                let a = node_at(from, from_pos as isize - 1);
                let b = node_at(from, from_pos as isize + 1);
                let removal =
                    instance.cost(a, b) - instance.cost(a, c) - instance.cost(c, b);
                let insertion = if to_route == routes.len() {
                    // Fresh route with only `c` on it.
                    if to_pos != 0 {
                        return Err(MoveError::BadPosition(to_pos));
                    }
                    instance.cost(0, c) + instance.cost(c, 0)
                } else {
                    let to = get_route(to_route)?;
                    if to_pos > to.len() {
                        return Err(MoveError::BadPosition(to_pos));
                    }
                    let u = node_at(to, to_pos as isize - 1);
                    let v = node_at(to, to_pos as isize);
                    instance.cost(u, c) + instance.cost(c, v) - instance.cost(u, v)
                };
                Ok(removal + insertion)
            }
        }
        Move::Swap {
            route_a,
            pos_a,
            route_b,
            pos_b,
        } => {
            if route_a == route_b {
                return Err(MoveError::SameRouteSwap);
            }
            let ra = get_route(route_a)?;
            let rb = get_route(route_b)?;
            if pos_a >= ra.len() {
                return Err(MoveError::BadPosition(pos_a));
            }
            if pos_b >= rb.len() {
                return Err(MoveError::BadPosition(pos_b));
            }
            let (c1, c2) = (ra[pos_a], rb[pos_b]);
            let (p1, n1) = (
                node_at(ra, pos_a as isize - 1),
                node_at(ra, pos_a as isize + 1),
            );
            let (p2, n2) = (
                node_at(rb, pos_b as isize - 1),
                node_at(rb, pos_b as isize + 1),
            );
            Ok(
                (instance.cost(p1, c2) + instance.cost(c2, n1)
                    - instance.cost(p1, c1)
                    - instance.cost(c1, n1))
                    + (instance.cost(p2, c1) + instance.cost(c1, n2)
                        - instance.cost(p2, c2)
                        - instance.cost(c2, n2)),
            )
        }
        Move::TwoOpt { route, start, end } => {
            let seq = get_route(route)?;
            if start > end || end >= seq.len() {
                return Err(MoveError::BadSegment(start, end));
            }
            let a = node_at(seq, start as isize - 1);
            let b = node_at(seq, end as isize + 1);
            let mut delta = (instance.cost(a, seq[end]) - instance.cost(a, seq[start]))
                + (instance.cost(seq[start], b) - instance.cost(seq[end], b));
            for t in start..end {
                delta += instance.cost(seq[t + 1], seq[t]) - instance.cost(seq[t], seq[t + 1]);
            }
            Ok(delta)
        }
    }
}

/// Apply `mv`, returning the resulting solution with recomputed costs.
/// Coordinates are checked; feasibility (capacity, fleet) is not.
pub fn apply_move(
    instance: &Instance,
    solution: &Solution,
    mv: Move,
) -> Result<Solution, MoveError> {
    // Validate coordinates through the delta computation.
    neighborhood_delta(instance, solution, mv)?;
    let mut routes: Vec<Vec<usize>> = solution.routes.iter().map(|r| r.0.clone()).collect();
    let mut crowd: Vec<usize> = solution.crowd.clone();
    match mv {
        Move::CrowdRemove { route, position } => {
            let c = routes[route].remove(position);
            crowd.push(c);
            crowd.sort_unstable();
            if routes[route].is_empty() {
                routes.remove(route);
            }
        }
        Move::CrowdInsert {
            customer,
            route,
            position,
        } => {
            crowd.retain(|&c| c != customer);
            if route == routes.len() {
                routes.push(vec![customer]);
            } else {
                routes[route].insert(position, customer);
            }
        }
        Move::CrowdDropRoute { route } => {
            crowd.extend(routes.remove(route));
            crowd.sort_unstable();
        }
        Move::Relocate {
            from_route,
            from_pos,
            to_route,
            to_pos,
        } => {
            let new_route = to_route == routes.len();
            let c = routes[from_route].remove(from_pos);
            if new_route {
                routes.push(vec![c]);
            } else {
                routes[to_route].insert(to_pos, c);
            }
            if routes[from_route].is_empty() && from_route != to_route {
                routes.remove(from_route);
            }
        }
        Move::Swap {
            route_a,
            pos_a,
            route_b,
            pos_b,
        } => {
            let c1 = routes[route_a][pos_a];
            let c2 = routes[route_b][pos_b];
            routes[route_a][pos_a] = c2;
            routes[route_b][pos_b] = c1;
        }
        Move::TwoOpt { route, start, end } => {
            routes[route][start..=end].reverse();
        }
    }
    let routes: Vec<Route> = routes.into_iter().map(Route).collect();
    Ok(Solution::assemble(instance, routes, crowd))
}

fn arc_sum(instance: &Instance, seq: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut prev = 0usize;
    for &c in seq {
        total += instance.cost(prev, c);
        prev = c;
    }
    total + instance.cost(prev, 0)
}

/// Mutable search state for one restart.
struct SearchState<'a> {
    inst: &'a Instance,
    routes: Vec<Vec<usize>>,
    loads: Vec<i64>,
    crowd: BTreeSet<usize>,
    cost: f64,
}

impl<'a> SearchState<'a> {
    fn recompute_cost(&self) -> f64 {
        let traveling: f64 = self.routes.iter().map(|r| arc_sum(self.inst, r)).sum();
        traveling + self.inst.reward() * self.crowd.len() as f64
    }

    fn to_solution(&self) -> Solution {
        let routes: Vec<Route> = self.routes.iter().cloned().map(Route).collect();
        let crowd: Vec<usize> = self.crowd.iter().copied().collect();
        let mut sol = Solution::assemble(self.inst, routes, crowd);
        sol.canonicalize();
        sol
    }

    fn apply(&mut self, mv: Move, delta: f64) {
        match mv {
            Move::CrowdRemove { route, position } => {
                let c = self.routes[route].remove(position);
                self.loads[route] -= self.inst.demand(c);
                self.crowd.insert(c);
                if self.routes[route].is_empty() {
                    self.routes.remove(route);
                    self.loads.remove(route);
                }
            }
            Move::CrowdInsert {
                customer,
                route,
                position,
            } => {
                self.crowd.remove(&customer);
                if route == self.routes.len() {
                    self.routes.push(vec![customer]);
                    self.loads.push(self.inst.demand(customer));
                } else {
                    self.routes[route].insert(position, customer);
                    self.loads[route] += self.inst.demand(customer);
                }
            }
            Move::CrowdDropRoute { route } => {
                self.crowd.extend(self.routes.remove(route));
                self.loads.remove(route);
            }
            Move::Relocate {
                from_route,
                from_pos,
                to_route,
                to_pos,
            } => {
                let new_route = to_route == self.routes.len();
                let c = self.routes[from_route].remove(from_pos);
                self.loads[from_route] -= self.inst.demand(c);
                if new_route {
                    self.routes.push(vec![c]);
                    self.loads.push(self.inst.demand(c));
                } else {
                    self.routes[to_route].insert(to_pos, c);
                    self.loads[to_route] += self.inst.demand(c);
                }
                if self.routes[from_route].is_empty() && from_route != to_route {
                    self.routes.remove(from_route);
                    self.loads.remove(from_route);
                }
            }
            Move::Swap {
                route_a,
                pos_a,
                route_b,
                pos_b,
            } => {
                let c1 = self.routes[route_a][pos_a];
                let c2 = self.routes[route_b][pos_b];
                self.routes[route_a][pos_a] = c2;
                self.routes[route_b][pos_b] = c1;
                let dq = self.inst.demand(c2) - self.inst.demand(c1);
                self.loads[route_a] += dq;
                self.loads[route_b] -= dq;
            }
            Move::TwoOpt { route, start, end } => {
                self.routes[route][start..=end].reverse();
            }
        }
        self.cost += delta;
        debug_assert!(
            (self.recompute_cost() - self.cost).abs() <= 1e-9 * self.cost.abs().max(1.0),
            "incremental cost drifted from full recosting after {mv:?}"
        );
    }

    /// Best (or first) improving move in one neighborhood.
    fn scan(&self, kind: Neighborhood, improvement: Improvement) -> Option<(Move, f64)> {
        let mut best: Option<(Move, f64)> = None;
        let mut consider = |mv: Move, delta: f64| -> bool {
            if delta < -MIN_IMPROVEMENT && best.as_ref().map_or(true, |&(_, d)| delta < d) {
                best = Some((mv, delta));
                return improvement == Improvement::FirstImprovement;
            }
            false
        };
        let inst = self.inst;
        match kind {
            Neighborhood::CrowdToggle => {
                'outer: {
                    for (r, seq) in self.routes.iter().enumerate() {
                        for (k, &c) in seq.iter().enumerate() {
                            if !inst.is_eligible(c) {
                                continue;
                            }
                            let a = node_at(seq, k as isize - 1);
                            let b = node_at(seq, k as isize + 1);
                            let saving =
                                inst.cost(a, c) + inst.cost(c, b) - inst.cost(a, b);
                            if consider(
                                Move::CrowdRemove { route: r, position: k },
                                inst.reward() - saving,
                            ) {
                                break 'outer;
                            }
                        }
                        if seq.len() > 1 && seq.iter().all(|&c| inst.is_eligible(c)) {
                            let delta = inst.reward() * seq.len() as f64
                                - arc_sum(inst, seq);
                            if consider(Move::CrowdDropRoute { route: r }, delta) {
                                break 'outer;
                            }
                        }
                    }
                    for &c in &self.crowd {
                        let q = inst.demand(c);
                        for (r, seq) in self.routes.iter().enumerate() {
                            if self.loads[r] + q > inst.capacity() {
                                continue;
                            }
                            for k in 0..=seq.len() {
                                let a = node_at(seq, k as isize - 1);
                                let b = node_at(seq, k as isize);
                                let ins =
                                    inst.cost(a, c) + inst.cost(c, b) - inst.cost(a, b);
                                if consider(
                                    Move::CrowdInsert { customer: c, route: r, position: k },
                                    ins - inst.reward(),
                                ) {
                                    break 'outer;
                                }
                            }
                        }
                        if self.routes.len() < inst.fleet_size() {
                            let ins = inst.cost(0, c) + inst.cost(c, 0);
                            if consider(
                                Move::CrowdInsert {
                                    customer: c,
                                    route: self.routes.len(),
                                    position: 0,
                                },
                                ins - inst.reward(),
                            ) {
                                break 'outer;
                            }
                        }
                    }
                }
            }
            Neighborhood::Relocate => {
                'outer: for (r1, from) in self.routes.iter().enumerate() {
                    for (k1, &c) in from.iter().enumerate() {
                        let a = node_at(from, k1 as isize - 1);
                        let b = node_at(from, k1 as isize + 1);
                        let removal = inst.cost(a, b) - inst.cost(a, c) - inst.cost(c, b);
                        let q = inst.demand(c);
                        for (r2, to) in self.routes.iter().enumerate() {
                            if r2 == r1 || self.loads[r2] + q > inst.capacity() {
                                continue;
                            }
                            for k2 in 0..=to.len() {
                                let u = node_at(to, k2 as isize - 1);
                                let v = node_at(to, k2 as isize);
                                let insertion =
                                    inst.cost(u, c) + inst.cost(c, v) - inst.cost(u, v);
                                if consider(
                                    Move::Relocate {
                                        from_route: r1,
                                        from_pos: k1,
                                        to_route: r2,
                                        to_pos: k2,
                                    },
                                    removal + insertion,
                                ) {
                                    break 'outer;
                                }
                            }
                        }
                        // Repositioning within the same route; target
                        // positions index the route with `c` removed.
                        if from.len() > 1 {
                            let mut reduced = from.clone();
                            reduced.remove(k1);
                            for k2 in 0..=reduced.len() {
                                if k2 == k1 {
                                    continue; // identity move
                                }
                                let u = node_at(&reduced, k2 as isize - 1);
                                let v = node_at(&reduced, k2 as isize);
                                let insertion =
                                    inst.cost(u, c) + inst.cost(c, v) - inst.cost(u, v);
                                if consider(
                                    Move::Relocate {
                                        from_route: r1,
                                        from_pos: k1,
                                        to_route: r1,
                                        to_pos: k2,
                                    },
                                    removal + insertion,
                                ) {
                                    break 'outer;
                                }
                            }
                        }
                        // Dedicated new route, when a vehicle is spare;
                        // escapes capacity-blocked relocations.
                        if self.routes.len() < inst.fleet_size() && from.len() > 1 {
                            let insertion = inst.cost(0, c) + inst.cost(c, 0);
                            if consider(
                                Move::Relocate {
                                    from_route: r1,
                                    from_pos: k1,
                                    to_route: self.routes.len(),
                                    to_pos: 0,
                                },
                                removal + insertion,
                            ) {
                                break 'outer;
                            }
                        }
                    }
                }
            }
            Neighborhood::Swap => {
                'outer: for r1 in 0..self.routes.len() {
                    for r2 in (r1 + 1)..self.routes.len() {
                        for k1 in 0..self.routes[r1].len() {
                            for k2 in 0..self.routes[r2].len() {
                                let (ra, rb) = (&self.routes[r1], &self.routes[r2]);
                                let (c1, c2) = (ra[k1], rb[k2]);
                                let dq = inst.demand(c2) - inst.demand(c1);
                                if self.loads[r1] + dq > inst.capacity()
                                    || self.loads[r2] - dq > inst.capacity()
                                {
                                    continue;
                                }
                                let (p1, n1) = (
                                    node_at(ra, k1 as isize - 1),
                                    node_at(ra, k1 as isize + 1),
                                );
                                let (p2, n2) = (
                                    node_at(rb, k2 as isize - 1),
                                    node_at(rb, k2 as isize + 1),
                                );
                                let delta = (inst.cost(p1, c2) + inst.cost(c2, n1)
                                    - inst.cost(p1, c1)
                                    - inst.cost(c1, n1))
                                    + (inst.cost(p2, c1) + inst.cost(c1, n2)
                                        - inst.cost(p2, c2)
                                        - inst.cost(c2, n2));
                                if consider(
                                    Move::Swap {
                                        route_a: r1,
                                        pos_a: k1,
                                        route_b: r2,
                                        pos_b: k2,
                                    },
                                    delta,
                                ) {
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
            Neighborhood::TwoOpt => {
                'outer: for (r, seq) in self.routes.iter().enumerate() {
                    for start in 0..seq.len() {
                        let a = node_at(seq, start as isize - 1);
                        // Running sum of reversed-minus-forward internal arcs.
                        let mut internal = 0.0;
                        for end in (start + 1)..seq.len() {
                            internal +=
                                inst.cost(seq[end], seq[end - 1]) - inst.cost(seq[end - 1], seq[end]);
                            let b = node_at(seq, end as isize + 1);
                            let delta = (inst.cost(a, seq[end]) - inst.cost(a, seq[start]))
                                + (inst.cost(seq[start], b) - inst.cost(seq[end], b))
                                + internal;
                            if consider(Move::TwoOpt { route: r, start, end }, delta) {
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Clarke-Wright parallel savings over the given customers. The initial
/// customer order and savings ties are shuffled by the restart's generator,
/// and the sort order is perturbed by `jitter` (zero on pure-savings
/// restarts).
fn construct(
    instance: &Instance,
    rng: &mut SplitMix64,
    jitter: f64,
    customers: &[usize],
) -> (Vec<Vec<usize>>, Vec<i64>) {
    let n = instance.num_customers();
    let mut order: Vec<usize> = customers.to_vec();
    rng.shuffle(&mut order);

    // One singleton route per customer, in shuffled order.
    let mut members: Vec<Vec<usize>> = order.iter().map(|&c| vec![c]).collect();
    let mut loads: Vec<i64> = order.iter().map(|&c| instance.demand(c)).collect();
    let mut route_of = vec![usize::MAX; n + 1];
    for (idx, &c) in order.iter().enumerate() {
        route_of[c] = idx;
    }

    struct Saving {
        value: f64,
        sort_value: f64,
        key: u64,
        i: usize,
        j: usize,
    }
    let mut savings = Vec::with_capacity(customers.len() * customers.len());
    for &i in customers {
        for &j in customers {
            if i == j {
                continue;
            }
            let value = instance.cost(i, 0) + instance.cost(0, j) - instance.cost(i, j);
            let factor = 1.0 + jitter * (2.0 * rng.next_f64() - 1.0);
            savings.push(Saving {
                value,
                sort_value: value * factor,
                key: rng.next_u64(),
                i,
                j,
            });
        }
    }
    savings.sort_by(|a, b| {
        b.sort_value
            .partial_cmp(&a.sort_value)
            .expect("savings are finite")
            .then(a.key.cmp(&b.key))
    });

    for s in &savings {
        if s.value <= 0.0 {
            continue;
        }
        let (ri, rj) = (route_of[s.i], route_of[s.j]);
        if ri == rj {
            continue;
        }
        // Merge tail-of-ri onto head-of-rj.
        if members[ri].last() != Some(&s.i) || members[rj].first() != Some(&s.j) {
            continue;
        }
        if loads[ri] + loads[rj] > instance.capacity() {
            continue;
        }
        let moved = std::mem::take(&mut members[rj]);
        for &c in &moved {
            route_of[c] = ri;
        }
        members[ri].extend(moved);
        loads[ri] += loads[rj];
        loads[rj] = 0;
    }

    let mut routes = Vec::new();
    let mut out_loads = Vec::new();
    for (idx, m) in members.into_iter().enumerate() {
        if !m.is_empty() {
            routes.push(m);
            out_loads.push(loads[idx]);
        }
    }
    (routes, out_loads)
}

/// Merge the cheapest feasible route pair until at most `m` routes remain.
fn coerce_route_count(
    instance: &Instance,
    routes: &mut Vec<Vec<usize>>,
    loads: &mut Vec<i64>,
) -> Result<(), SolveError> {
    while routes.len() > instance.fleet_size() {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..routes.len() {
            for b in 0..routes.len() {
                if a == b || loads[a] + loads[b] > instance.capacity() {
                    continue;
                }
                let tail = *routes[a].last().unwrap();
                let head = *routes[b].first().unwrap();
                let increase = instance.cost(tail, head)
                    - instance.cost(tail, 0)
                    - instance.cost(0, head);
                if best.map_or(true, |(d, _, _)| increase < d) {
                    best = Some((increase, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else {
            return Err(SolveError::Infeasible {
                fleet: instance.fleet_size(),
            });
        };
        let moved = std::mem::take(&mut routes[b]);
        routes[a].extend(moved);
        loads[a] += loads[b];
        routes.remove(b);
        loads.remove(b);
    }
    Ok(())
}

struct RestartOutcome {
    solution: Solution,
    construction_cost: f64,
    sweeps: u64,
    trace: Vec<TraceEvent>,
}

fn run_restart(
    instance: &Instance,
    config: &HeuristicConfig,
    restart: u32,
) -> Result<RestartOutcome, SolveError> {
    let mut rng = SplitMix64::new(derive_seed(config.seed, RESTART_STREAM, restart as u64));
    let jitter = if restart < 2 { 0.0 } else { config.savings_jitter };

    // Restarts alternate the crowd starting point: even restarts build
    // routes for everyone (crowd empty), odd restarts crowd-serve the whole
    // eligible set and route only the rest. Local search then toggles from
    // both directions, which single-customer moves cannot bridge on their
    // own. At p = 0 the crowd is free and every restart starts crowd-full,
    // matching the exact solver's prefer-more-crowd tie-break.
    let crowd_start_full = restart % 2 == 1 || instance.reward() == 0.0;
    let all: Vec<usize> = (1..=instance.num_customers()).collect();
    let (mut routes, mut loads, crowd) = if crowd_start_full {
        let crowd: BTreeSet<usize> = instance.eligible().iter().copied().collect();
        let routed: Vec<usize> = all
            .iter()
            .copied()
            .filter(|c| !crowd.contains(c))
            .collect();
        let (routes, loads) = construct(instance, &mut rng, jitter, &routed);
        (routes, loads, crowd)
    } else {
        let (routes, loads) = construct(instance, &mut rng, jitter, &all);
        (routes, loads, BTreeSet::new())
    };

    coerce_route_count(instance, &mut routes, &mut loads)?;

    let mut state = SearchState {
        inst: instance,
        routes,
        loads,
        crowd,
        cost: 0.0,
    };
    state.cost = state.recompute_cost();
    let construction_cost = state.cost;

    let mut trace = Vec::new();
    let mut sweeps = 0u64;
    let mut non_improving = 0u32;
    while non_improving < config.max_non_improving_sweeps && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut sweep_improved = false;
        for &kind in &config.move_order {
            if let Some((mv, delta)) = state.scan(kind, config.improvement) {
                state.apply(mv, delta);
                sweep_improved = true;
                if config.trace {
                    trace.push(TraceEvent {
                        restart,
                        sweep: sweeps,
                        neighborhood: kind,
                        delta,
                        cost_after: state.cost,
                    });
                }
            }
        }
        if sweep_improved {
            non_improving = 0;
        } else {
            non_improving += 1;
        }
    }

    Ok(RestartOutcome {
        solution: state.to_solution(),
        construction_cost,
        sweeps,
        trace,
    })
}

fn better(a: &Solution, b: &Solution) -> bool {
    if a.total_cost != b.total_cost {
        return a.total_cost < b.total_cost;
    }
    (&a.crowd, &a.routes) < (&b.crowd, &b.routes)
}

/// Run the savings-plus-local-search heuristic.
///
/// Deterministic for a fixed `(instance, config.seed)` regardless of how
/// restarts are scheduled. Returns the best solution over all restarts and
/// a report with the per-restart costs.
pub fn solve_heuristic(
    instance: &Instance,
    config: &HeuristicConfig,
) -> Result<(Solution, HeuristicReport), SolveError> {
    let started = Instant::now();
    let restarts = config.restarts.max(1);

    // A restart can be individually infeasible (packing everyone into m
    // routes may fail where a crowd-full start succeeds); only a run where
    // every restart fails is infeasible.
    let attempts: Vec<Result<RestartOutcome, SolveError>> = if config.budget.is_some() {
        // Budgeted runs go restart by restart so the incumbent semantics
        // are simple: a started restart completes, then the clock decides.
        let budget = config.budget.unwrap();
        let mut done = Vec::new();
        for r in 0..restarts {
            done.push(run_restart(instance, config, r));
            if started.elapsed() >= budget {
                break;
            }
        }
        done
    } else {
        (0..restarts)
            .into_par_iter()
            .map(|r| run_restart(instance, config, r))
            .collect()
    };
    let mut outcomes = Vec::with_capacity(attempts.len());
    let mut first_error = None;
    for attempt in attempts {
        match attempt {
            Ok(outcome) => outcomes.push(outcome),
            Err(e) => first_error = first_error.or(Some(e)),
        }
    }
    if outcomes.is_empty() {
        return Err(first_error.unwrap_or(SolveError::Infeasible {
            fleet: instance.fleet_size(),
        }));
    }

    let restart_costs: Vec<f64> = outcomes.iter().map(|o| o.solution.total_cost).collect();
    let sweeps: u64 = outcomes.iter().map(|o| o.sweeps).sum();
    let trace: Vec<TraceEvent> = outcomes.iter().flat_map(|o| o.trace.clone()).collect();
    let best = outcomes
        .into_iter()
        .reduce(|a, b| if better(&b.solution, &a.solution) { b } else { a })
        .expect("at least one restart runs");

    let construction = best.construction_cost;
    let final_cost = best.solution.total_cost;
    let report = HeuristicReport {
        construction_cost: construction,
        final_cost,
        improvement_over_construction: if construction > 0.0 {
            (construction - final_cost) / construction
        } else {
            0.0
        },
        restarts_completed: restart_costs.len() as u32,
        restart_costs,
        sweeps,
        elapsed_ms: started.elapsed().as_millis() as u64,
        trace,
    };
    Ok((best.solution, report))
}
