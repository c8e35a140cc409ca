//! Optimal power control for an energy-harvesting transmitter that sees a
//! fixed window of future Bernoulli energy arrivals.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces:
//!
//! - [`model`]: parameters, the rate function `½·log2(1 + γa)`, battery dynamics
//!   and the allocation/trace value types.
//! - [`objective`]: exact throughput functionals `T_∞`, `T_N`, the offline
//!   (infinite look-ahead) bound, the truncation bound `ε_N` and KKT residuals.
//! - [`solver`]: the optimal drought allocation sequence for a finite horizon
//!   and for the infinite problem, a brute-force oracle and a structural checker.
//! - [`policy`]: the look-ahead policy as a deterministic state machine.
//!
//! Simulation, file formats and the command line live in the `lookahead` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod model;
pub mod objective;
pub mod policy;
pub mod solver;
mod sum;

pub use error::{Error, Result};
pub use model::{
    battery_update, reward, validate_params, AllocationSequence, ArrivalTrace, RawParams,
    SystemParams,
};
pub use objective::{
    epsilon_n, eval_t_infinity, eval_t_n, kkt_residuals, offline_bound, KktResidualReport,
    DEFAULT_TAIL_TOL,
};
pub use policy::{lookahead_distance, Policy, PolicyState, StepOutcome};
pub use solver::{
    brute_force_oracle, recursion_step, solve_finite, solve_infinite, verify_structure, Horizon,
    ShootingSignal, SolverReport, StructureReport, DEFAULT_TOL,
};
