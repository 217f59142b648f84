//! Solver toolkit for vehicle routing with metro-commuter crowd-shippers.
//!
//! Customers near a metro station may be served by a crowd-shipper for a
//! fixed reward instead of a fleet vehicle; everyone else rides on
//! capacity-constrained depot-rooted routes. The crate provides:
//!
//! - [`model`]: instance and solution types, JSON wire formats, and the
//!   validator every solver output must pass;
//! - [`eligibility`]: walking-time eligibility from planar geometry;
//! - [`milp`]: the single-commodity-flow MILP, free-format MPS export,
//!   parser, and a certificate checker for route-based solutions;
//! - [`exact`]: an optimal solver for small instances plus an independent
//!   brute-force oracle;
//! - [`heuristic`]: Clarke-Wright savings construction with
//!   multi-neighborhood local search and a crowd-toggle move;
//! - [`generator`]: seeded scenes and the full experiment grid;
//! - [`harness`]: grid execution, saving aggregation, and plot exports.

pub mod eligibility;
pub mod exact;
pub mod generator;
pub mod harness;
pub mod heuristic;
pub mod milp;
pub mod model;
pub mod rng;

use thiserror::Error;

/// Errors shared by the exact and heuristic solvers.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error(
        "instance too large for this solver: {customers} customers / {eligible} eligible \
         (limits {max_customers} / {max_eligible})"
    )]
    TooLarge {
        customers: usize,
        eligible: usize,
        max_customers: usize,
        max_eligible: usize,
    },
    #[error("customers cannot be packed into {fleet} capacity-feasible routes")]
    Infeasible { fleet: usize },
}

pub use model::{validate, Instance, Route, Solution, ValidationReport};
