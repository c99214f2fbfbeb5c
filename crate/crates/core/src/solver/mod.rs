//! Deterministic side of the toolkit: grids, spectral convolution, the
//! compiled right-hand side of the kinetic equation, RK4 time integration,
//! and closed-form reference solutions.
//!
//! The intended flow is `KineticModel` → [`Program::new`] → [`integrate`],
//! with [`reference_solution`] providing independent oracles for the models
//! that admit closed forms.

mod integrate;
mod program;
mod reference;
mod spectral;

pub use integrate::{
    integrate, SolveResult, BLOWUP_FAULT, NEGATIVITY_FAULT, STEP_VALIDATION_TOL,
};
pub use program::Program;
pub use reference::{glauber_fixed_point, reference_solution, FIXED_POINT_TOL, REFERENCES};
pub use spectral::{DensityField, Grid, Spectral};
