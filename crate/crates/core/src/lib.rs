//! Core library for deriving and checking kinetic (Vlasov-type) limits of
//! interacting birth-and-death and hopping particle dynamics in continuum.
//!
//! The crate is organised as a pipeline:
//!
//! * [`dsl`] — a small language for describing Markov generators acting on
//!   locally finite particle configurations (death, birth, and hop parts
//!   with pairwise kernels and exponential interaction factors), parsed
//!   into canonical sum-of-terms form.
//! * [`config`] — combinatorial harmonic analysis on finite configurations:
//!   the K-transform, its Möbius inverse, and Lebesgue–Poisson integrals,
//!   used as the exact oracle layer for everything symbolic.
//! * scaling and derivation (in [`dsl`]) — bookkeeping of the mean-field
//!   rescaling orders per term, justification that each generator part has
//!   a finite nonzero limit, and compilation of the surviving terms into a
//!   closed [`field::FieldExpr`] for the limiting density equation.
//! * [`solver`] — spectral evaluation of the derived right-hand side on a
//!   periodic grid and fixed-step RK4 integration with built-in faults.
//! * [`sim`] — an exact-thinning stochastic simulator for the rescaled
//!   microscopic process, with Poisson initial data and deterministic,
//!   replica-indexed random streams.
//! * [`estimator`] — correlation-function estimators (density and pair
//!   correlation) with bootstrap error bars, and the mesoscopic-vs-kinetic
//!   convergence sweep they feed.
//!
//! [`catalog`] ships thirteen ready-made generators covering the standard
//! model families (Surgailis, contact, social, BDLP, establishment,
//! fecundity, Dieckmann–Law, Glauber in both directions, and the Kawasaki
//! family), each paired with its expected limiting equation.

pub mod catalog;
pub mod config;
pub mod dsl;
pub mod error;
pub mod estimator;
pub mod field;
pub mod geometry;
pub mod kernel;
pub mod sim;
pub mod solver;
pub mod stats;

pub use config::Configuration;
pub use dsl::{Generator, GeneratorSpec, PartKind};
pub use error::{Error, Result};
pub use field::{FieldExpr, KineticModel};
pub use geometry::{Point, TorusBox};
pub use kernel::{Kernel, KernelProfile, Scaling};
