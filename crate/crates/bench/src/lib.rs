//! Shared fixtures for the benchmarks: standard generators, plans, and
//! fields sized so each hot path dominates its own measurement.

use vlaskit_core::catalog;
use vlaskit_core::sim::{InitialProfile, SimPlan};
use vlaskit_core::solver::{DensityField, Grid};
use vlaskit_core::{Generator, Point, TorusBox};

/// The logistic preset: every event class except hops, both kernel sums
/// and a competition exponent on the thinning path.
pub fn logistic_generator() -> Generator {
    catalog::generator("bdlp").expect("catalog preset parses")
}

/// A torus and a moderately dense environment for rate evaluation.
pub fn rate_fixture(n: usize) -> (TorusBox, Point, Vec<Point>) {
    let torus = TorusBox::new(1, 10.0).expect("valid box");
    let x: Point = [5.0, 0.0];
    let env: Vec<Point> = (0..n)
        .map(|i| [10.0 * (0.37 * i as f64).fract(), 0.0])
        .collect();
    (torus, x, env)
}

/// A single-replica plan with roughly `10 / eps` particles.
pub fn throughput_plan(eps: f64, seed: u64) -> SimPlan {
    SimPlan {
        torus: TorusBox::new(1, 10.0).expect("valid box"),
        eps,
        profile: InitialProfile::Constant(1.0),
        times: vec![0.5],
        replicas: 1,
        seed,
        max_particles: 0,
    }
}

/// A smooth field on the standard solver grid.
pub fn cosine_field(n: usize) -> DensityField {
    let grid = Grid::new(1, n, 10.0).expect("valid grid");
    DensityField::from_fn(grid, |p| {
        1.0 + 0.5 * (std::f64::consts::TAU * p[0] / grid.l).cos()
    })
}
