//! Exact solver: provably optimal solutions on small instances.
//!
//! For every crowd-served subset `W` of the eligible set, the remaining
//! customers must be covered by at most `m` capacity-feasible routes. The
//! routing cost of every customer subset is computed once: a Held-Karp
//! bitmask DP gives the cheapest closed route per subset, then a
//! set-partition DP with a route-count dimension gives the cheapest cover.
//! The answer is `min over W` of that cover plus `p * |W|`, with ties
//! broken toward more crowd-shipping, then the lexicographically smallest
//! crowd set, then the canonical route encoding.
//!
//! [`brute_force`] is an independent oracle for the oracle: plain
//! enumeration of crowd subsets and partitions into ordered sequences.

use itertools::Itertools;
use serde::Serialize;

use crate::model::{Instance, Route, Solution};
use crate::SolveError;

/// Scale guard for the exact solver.
#[derive(Debug, Clone)]
pub struct ExactConfig {
    pub max_customers: usize,
    pub max_eligible: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            max_customers: 12,
            max_eligible: 12,
        }
    }
}

/// Optimality certificate: how much work the search did.
#[derive(Debug, Clone, Serialize)]
pub struct SearchStats {
    #[serde(rename = "subsetsExplored")]
    pub subsets_explored: u64,
    #[serde(rename = "dpStates")]
    pub dp_states: u64,
    #[serde(rename = "elapsedMs")]
    pub elapsed_ms: u64,
}

/// Held-Karp and set-partition tables over all customer subsets.
struct DpTables {
    n: usize,
    kmax: usize,
    /// `dp[mask * n + (last-1)]`: cheapest depot-rooted path visiting
    /// exactly `mask` and ending at `last`.
    dp: Vec<f64>,
    /// Cheapest capacity-feasible closed route per subset (`inf` if the
    /// subset overloads a vehicle).
    route_cost: Vec<f64>,
    /// `part[k][mask]`: cheapest cover of `mask` by at most `k` routes.
    part: Vec<Vec<f64>>,
}

impl DpTables {
    fn build(instance: &Instance) -> DpTables {
        let n = instance.num_customers();
        let full = 1usize << n;
        let inf = f64::INFINITY;

        let mut load = vec![0i64; full];
        for mask in 1..full {
            let low = mask.trailing_zeros() as usize;
            load[mask] = load[mask & (mask - 1)] + instance.demand(low + 1);
        }

        let mut dp = vec![inf; full * n];
        for i in 0..n {
            dp[(1 << i) * n + i] = instance.cost(0, i + 1);
        }
        for mask in 1..full {
            for last in 0..n {
                if mask & (1 << last) == 0 {
                    continue;
                }
                let cur = dp[mask * n + last];
                if !cur.is_finite() {
                    continue;
                }
                for next in 0..n {
                    if mask & (1 << next) != 0 {
                        continue;
                    }
                    let cand = cur + instance.cost(last + 1, next + 1);
                    let slot = &mut dp[(mask | (1 << next)) * n + next];
                    if cand < *slot {
                        *slot = cand;
                    }
                }
            }
        }

        let mut route_cost = vec![inf; full];
        route_cost[0] = 0.0;
        for mask in 1..full {
            if load[mask] > instance.capacity() {
                continue;
            }
            let mut best = inf;
            for last in 0..n {
                if mask & (1 << last) != 0 {
                    let cand = dp[mask * n + last] + instance.cost(last + 1, 0);
                    if cand < best {
                        best = cand;
                    }
                }
            }
            route_cost[mask] = best;
        }

        let kmax = instance.fleet_size().min(n);
        let mut part = vec![vec![inf; full]; kmax + 1];
        part[0][0] = 0.0;
        for k in 1..=kmax {
            part[k][0] = 0.0;
            for mask in 1..full {
                let mut best = part[k - 1][mask];
                let low = 1usize << mask.trailing_zeros();
                let rest = mask ^ low;
                // Every submask containing the lowest customer of `mask`.
                let mut sub = rest;
                loop {
                    let s = sub | low;
                    let rc = route_cost[s];
                    if rc.is_finite() {
                        let cand = rc + part[k - 1][mask ^ s];
                        if cand < best {
                            best = cand;
                        }
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & rest;
                }
                part[k][mask] = best;
            }
        }

        DpTables {
            n,
            kmax,
            dp,
            route_cost,
            part,
        }
    }

    fn states(&self) -> u64 {
        (self.dp.len() + self.part.len() * self.part[0].len()) as u64
    }

    /// Split `mask` into route subsets, mirroring the DP's enumeration
    /// order so reconstruction is deterministic.
    fn reconstruct_partition(&self, mask: usize) -> Vec<usize> {
        let mut parts = Vec::new();
        let mut k = self.kmax;
        let mut mask = mask;
        while mask != 0 {
            while k > 1 && self.part[k - 1][mask] == self.part[k][mask] {
                k -= 1;
            }
            let target = self.part[k][mask];
            let low = 1usize << mask.trailing_zeros();
            let rest = mask ^ low;
            let mut sub = rest;
            let mut chosen = None;
            loop {
                let s = sub | low;
                let rc = self.route_cost[s];
                if rc.is_finite() && rc + self.part[k - 1][mask ^ s] == target {
                    chosen = Some(s);
                    break;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            let s = chosen.expect("partition DP value must be attained by some submask");
            parts.push(s);
            mask ^= s;
            k -= 1;
        }
        parts
    }

    /// Optimal visiting order for one route subset, from the Held-Karp
    /// table; ties resolved toward the smallest customer index.
    fn reconstruct_sequence(&self, instance: &Instance, mask: usize) -> Vec<usize> {
        let n = self.n;
        let mut best_last = usize::MAX;
        let mut best = f64::INFINITY;
        for last in 0..n {
            if mask & (1 << last) != 0 {
                let cand = self.dp[mask * n + last] + instance.cost(last + 1, 0);
                if cand < best {
                    best = cand;
                    best_last = last;
                }
            }
        }
        let mut seq = Vec::with_capacity(mask.count_ones() as usize);
        let mut cur_mask = mask;
        let mut cur = best_last;
        loop {
            seq.push(cur + 1);
            let prev_mask = cur_mask ^ (1 << cur);
            if prev_mask == 0 {
                break;
            }
            let target = self.dp[cur_mask * n + cur];
            let mut found = None;
            for prev in 0..n {
                if prev_mask & (1 << prev) != 0
                    && self.dp[prev_mask * n + prev] + instance.cost(prev + 1, cur + 1) == target
                {
                    found = Some(prev);
                    break;
                }
            }
            cur = found.expect("Held-Karp value must be attained by some predecessor");
            cur_mask = prev_mask;
        }
        seq.reverse();
        seq
    }
}

fn route_arc_sum(instance: &Instance, seq: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut prev = 0usize;
    for &c in seq {
        total += instance.cost(prev, c);
        prev = c;
    }
    total + instance.cost(prev, 0)
}

/// Report the route in the orientation with the smaller lexicographic
/// encoding when reversing it costs exactly the same.
fn canonical_orientation(instance: &Instance, seq: Vec<usize>) -> Vec<usize> {
    let mut rev = seq.clone();
    rev.reverse();
    let fwd_cost = route_arc_sum(instance, &seq);
    let rev_cost = route_arc_sum(instance, &rev);
    if rev_cost < fwd_cost || (rev_cost == fwd_cost && rev < seq) {
        rev
    } else {
        seq
    }
}

fn mask_to_customers(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize)
        .filter(|b| mask & (1 << b) != 0)
        .map(|b| b + 1)
        .collect()
}

/// Solve to optimality. Refuses instances beyond the configured size; an
/// instance whose customers cannot be packed into `m` routes at all is
/// reported as infeasible.
pub fn solve_exact(
    instance: &Instance,
    config: &ExactConfig,
) -> Result<(Solution, SearchStats), SolveError> {
    let n = instance.num_customers();
    let s_size = instance.eligible().len();
    if n > config.max_customers || s_size > config.max_eligible {
        return Err(SolveError::TooLarge {
            customers: n,
            eligible: s_size,
            max_customers: config.max_customers,
            max_eligible: config.max_eligible,
        });
    }
    let started = std::time::Instant::now();
    let tables = DpTables::build(instance);

    let full = (1usize << n) - 1;
    let smask: usize = instance
        .eligible()
        .iter()
        .map(|&c| 1usize << (c - 1))
        .sum();
    let p = instance.reward();

    // Enumerate every crowd subset W (submask of the eligible mask).
    let mut best: Option<(f64, usize, Vec<usize>)> = None; // (cost, wmask, wlist)
    let mut subsets = 0u64;
    let mut w = smask;
    loop {
        subsets += 1;
        let routing = tables.part[tables.kmax][full ^ w];
        if routing.is_finite() {
            let cost = routing + p * w.count_ones() as f64;
            let better = match &best {
                None => true,
                Some((bc, bmask, blist)) => {
                    cost < *bc
                        || (cost == *bc
                            && (w.count_ones() > bmask.count_ones()
                                || (w.count_ones() == bmask.count_ones()
                                    && mask_to_customers(w) < *blist)))
                }
            };
            if better {
                best = Some((cost, w, mask_to_customers(w)));
            }
        }
        if w == 0 {
            break;
        }
        w = (w - 1) & smask;
    }

    let (_, wmask, wlist) = best.ok_or(SolveError::Infeasible {
        fleet: instance.fleet_size(),
    })?;

    let mut routes: Vec<Route> = tables
        .reconstruct_partition(full ^ wmask)
        .into_iter()
        .map(|mask| {
            let seq = tables.reconstruct_sequence(instance, mask);
            Route(canonical_orientation(instance, seq))
        })
        .collect();
    routes.sort();

    let mut solution = Solution::assemble(instance, routes, wlist);
    solution.canonicalize();
    let stats = SearchStats {
        subsets_explored: subsets,
        dp_states: tables.states(),
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    Ok((solution, stats))
}

/// Cheapest cost of serving exactly `customers` with at most `m`
/// capacity-feasible routes (the crowd plays no part). This is the
/// `S = empty` degenerate problem over a customer subset.
pub fn min_routing_cost(instance: &Instance, customers: &[usize]) -> Result<f64, SolveError> {
    let n = instance.num_customers();
    let config = ExactConfig::default();
    if n > config.max_customers {
        return Err(SolveError::TooLarge {
            customers: n,
            eligible: instance.eligible().len(),
            max_customers: config.max_customers,
            max_eligible: config.max_eligible,
        });
    }
    let tables = DpTables::build(instance);
    let mask: usize = customers.iter().map(|&c| 1usize << (c - 1)).sum();
    let cost = tables.part[tables.kmax][mask];
    if cost.is_finite() {
        Ok(cost)
    } else {
        Err(SolveError::Infeasible {
            fleet: instance.fleet_size(),
        })
    }
}

const BRUTE_FORCE_MAX: usize = 7;

/// Reference-of-the-reference: exhaustive enumeration of crowd subsets and
/// of all partitions of the routed customers into at most `m` ordered
/// sequences. Shares no code with [`solve_exact`].
pub fn brute_force(instance: &Instance) -> Result<f64, SolveError> {
    let n = instance.num_customers();
    if n > BRUTE_FORCE_MAX {
        return Err(SolveError::TooLarge {
            customers: n,
            eligible: instance.eligible().len(),
            max_customers: BRUTE_FORCE_MAX,
            max_eligible: BRUTE_FORCE_MAX,
        });
    }
    let eligible: Vec<usize> = instance.eligible().iter().copied().collect();
    let mut best = f64::INFINITY;
    for pick in 0..(1usize << eligible.len()) {
        let crowd: Vec<usize> = eligible
            .iter()
            .enumerate()
            .filter(|(b, _)| pick & (1 << b) != 0)
            .map(|(_, &c)| c)
            .collect();
        let routed: Vec<usize> = (1..=n).filter(|c| !crowd.contains(c)).collect();
        let routing = cheapest_partition(instance, &routed);
        if routing.is_finite() {
            let total = routing + instance.reward() * crowd.len() as f64;
            if total < best {
                best = total;
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(SolveError::Infeasible {
            fleet: instance.fleet_size(),
        })
    }
}

/// Minimum routing cost over all set partitions of `routed` into at most
/// `m` blocks, each block costed by trying every visiting permutation.
fn cheapest_partition(instance: &Instance, routed: &[usize]) -> f64 {
    fn recurse(
        instance: &Instance,
        remaining: &[usize],
        blocks: &mut Vec<Vec<usize>>,
        loads: &mut Vec<i64>,
        best: &mut f64,
    ) {
        match remaining.split_first() {
            None => {
                let cost: f64 = blocks
                    .iter()
                    .map(|b| cheapest_permutation(instance, b))
                    .sum();
                if cost < *best {
                    *best = cost;
                }
            }
            Some((&first, rest)) => {
                let demand = instance.demand(first);
                for slot in 0..blocks.len() {
                    if loads[slot] + demand <= instance.capacity() {
                        blocks[slot].push(first);
                        loads[slot] += demand;
                        recurse(instance, rest, blocks, loads, best);
                        loads[slot] -= demand;
                        blocks[slot].pop();
                    }
                }
                if blocks.len() < instance.fleet_size() {
                    blocks.push(vec![first]);
                    loads.push(demand);
                    recurse(instance, rest, blocks, loads, best);
                    loads.pop();
                    blocks.pop();
                }
            }
        }
    }

    let mut best = f64::INFINITY;
    if routed.is_empty() {
        return 0.0;
    }
    recurse(
        instance,
        routed,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut best,
    );
    best
}

fn cheapest_permutation(instance: &Instance, block: &[usize]) -> f64 {
    block
        .iter()
        .copied()
        .permutations(block.len())
        .map(|perm| route_arc_sum(instance, &perm))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::{matrix_instance, uniform_instance};
    use crate::model::validate;

    fn worked_instance(reward: f64) -> Instance {
        // n=2, all arcs cost 2, q=(1,1), Q=10, m=1, S={1,2}
        uniform_instance(2, 2.0, vec![1, 1], 10, 1, reward, vec![1, 2])
    }

    #[test]
    fn crowd_wins_when_cheap() {
        let inst = worked_instance(1.0);
        let (sol, stats) = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert_eq!(sol.total_cost, 2.0);
        assert_eq!(sol.crowd, vec![1, 2]);
        assert!(sol.routes.is_empty());
        assert_eq!(stats.subsets_explored, 4);
        assert!(validate(&inst, &sol).unwrap().feasible);
    }

    #[test]
    fn tie_prefers_more_crowd() {
        // p=3: crowd-both and vehicle-both each cost 6.0.
        let inst = worked_instance(3.0);
        let (sol, _) = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert_eq!(sol.total_cost, 6.0);
        assert_eq!(sol.crowd, vec![1, 2]);
    }

    #[test]
    fn empty_eligible_is_pure_cvrp() {
        let inst = matrix_instance(
            vec![vec![0.0, 3.0], vec![4.0, 0.0]],
            vec![1],
            2,
            1,
            5.0,
            vec![],
        );
        let (sol, _) = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert_eq!(sol.routes, vec![Route(vec![1])]);
        assert_eq!(sol.total_cost, 7.0);
        assert_eq!(brute_force(&inst).unwrap(), 7.0);
    }

    #[test]
    fn capacity_forces_two_routes() {
        // q1 + q2 > Q: must split; with m=2 the answer is two
        // out-and-backs, with m=1 the instance is infeasible.
        let cost = vec![
            vec![0.0, 3.0, 5.0],
            vec![3.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        let feasible = matrix_instance(cost.clone(), vec![3, 3], 5, 2, 0.0, vec![]);
        let (sol, _) = solve_exact(&feasible, &ExactConfig::default()).unwrap();
        assert_eq!(sol.total_cost, 16.0); // 3+3 and 5+5
        assert_eq!(sol.routes.len(), 2);
        assert_eq!(brute_force(&feasible).unwrap(), 16.0);

        let tight = matrix_instance(cost, vec![3, 3], 5, 1, 0.0, vec![]);
        assert!(matches!(
            solve_exact(&tight, &ExactConfig::default()),
            Err(SolveError::Infeasible { .. })
        ));
        assert!(matches!(
            brute_force(&tight),
            Err(SolveError::Infeasible { .. })
        ));
    }

    #[test]
    fn size_guard_refuses_large_instances() {
        let inst = uniform_instance(13, 1.0, vec![1; 13], 20, 3, 0.0, vec![]);
        assert!(matches!(
            solve_exact(&inst, &ExactConfig::default()),
            Err(SolveError::TooLarge { .. })
        ));
        let inst8 = uniform_instance(8, 1.0, vec![1; 8], 20, 3, 0.0, vec![]);
        assert!(matches!(brute_force(&inst8), Err(SolveError::TooLarge { .. })));
    }

    #[test]
    fn deterministic_output() {
        let inst = worked_instance(3.0);
        let (a, _) = solve_exact(&inst, &ExactConfig::default()).unwrap();
        let (b, _) = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn min_routing_cost_matches_full_solve_at_zero_reward() {
        let inst = uniform_instance(4, 2.0, vec![1, 1, 1, 1], 2, 3, 0.0, vec![]);
        let (sol, _) = solve_exact(&inst, &ExactConfig::default()).unwrap();
        let all: Vec<usize> = (1..=4).collect();
        let cvrp = min_routing_cost(&inst, &all).unwrap();
        assert!((sol.total_cost - cvrp).abs() < 1e-12);
    }
}
