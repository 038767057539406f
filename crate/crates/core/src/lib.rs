//! Equilibrium epidemics in the Nash SIR model.
//!
//! The crate couples a five-compartment carriage SIR epidemic with the
//! continuation-loss (Bellman) dynamics of each epidemiological state and a
//! per-instant symmetric Nash equilibrium in distancing intensity. Equilibrium
//! epidemics are found by tracing candidate trajectories backward from a
//! proposed state at vaccine time `T` and checking whether they arrive at the
//! prescribed initial state.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. The `parallel` feature traces search candidates on a rayon pool.
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod economy;
pub mod enumerate;
pub mod epidemic;
pub mod integrate;
pub mod linalg;
pub mod multishoot;
pub mod nash;
pub mod params;
pub mod schedule;
pub mod shooter;
pub mod state;
pub mod trajectory;
pub mod welfare;

pub use economy::{aggregate_flow_loss, availability, flow_benefit};
pub use enumerate::{
    enumerate, residual, simplex_grid, summarize, Equilibrium, EquilibriumSet, EquilibriumSummary, RefinementFailure,
    ResidualEval, SearchConfig, SearchDiagnostics, SearchError, SeedOrigin, TraceMethod,
};
pub use epidemic::{attack_rate, epi_rhs, initial_state, post_vaccine_state, simulate, simulate_schedule, EpiDerivative};
pub use integrate::{integrate, IntegrateError, IntegratorConfig, Method, Solution};
pub use nash::{equilibrium_distancing, marginal_cost, marginal_gain, NashInputs, NashOutcome, Regime};
pub use params::{LcConvention, ModelParams, ParamError};
pub use schedule::Schedule;
pub use shooter::{
    trace_backward, trace_backward_with, verify_fixed_point, verify_path, Behavior, CandidateResult,
    Classification, FinalCondition, FinalConditionError, FixedPointReport, TraceOptions, VerifyError,
};
pub use state::{EpidemicState, StateError, WelfareState};
pub use trajectory::{Trajectory, TrajectorySample};
pub use welfare::{terminal_welfare, welfare_rhs, WelfareDerivative};
