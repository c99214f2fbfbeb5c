//! Stochastic simulation of the rescaled particle process.
//!
//! The pipeline: a [`SimPlan`] fixes the box, the scaling parameter ε, the
//! initial Poisson profile and the snapshot times; [`CompiledSim`] turns a
//! parsed generator into executable event schemes (exact per-particle
//! death rates, parented or uniform birth proposals, bounded hop
//! proposals), rejecting anything it cannot simulate *exactly*;
//! [`run_ensemble`] plays replicas in parallel with counter-seeded RNG
//! streams; [`snapshot`] serializes the trajectories.
//!
//! Everything downstream of the plan is deterministic: the same plan gives
//! byte-identical snapshots regardless of thread count.

mod engine;
mod ensemble;
mod initial;
mod plan;
mod state;

pub mod snapshot;

pub use engine::ReplicaOutcome;
pub use ensemble::{run_compiled, run_ensemble, EnsembleResult};
pub use plan::{CompiledSim, InitialProfile, SimPlan, MAX_EXPECTED_COUNT};
