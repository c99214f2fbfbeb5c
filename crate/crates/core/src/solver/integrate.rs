//! Fixed-step RK4 time integration with built-in sanity faults.
//!
//! The march is deliberately plain: classical Runge–Kutta with a fixed
//! nominal step, shortened per segment so every requested snapshot time is
//! hit exactly. Before the march starts, the step size is validated by a
//! halving test (one step at `dt` against two at `dt/2`); a visible gap
//! means `dt` is too coarse for the dynamics and the run refuses to start.
//! During the march, densities below `NEGATIVITY_FAULT` or above
//! `BLOWUP_FAULT` abort with a numerical fault — the first protects against
//! discretization artifacts silently corrupting correlation comparisons,
//! the second catches models whose limit genuinely explodes.

use crate::error::{Error, Result};

use super::program::Program;
use super::spectral::DensityField;

/// Startup check: |one dt step − two dt/2 steps|_sup must stay below this.
pub const STEP_VALIDATION_TOL: f64 = 1e-6;
/// Densities below this are treated as a numerical fault, not noise.
pub const NEGATIVITY_FAULT: f64 = -1e-10;
/// Densities above this are treated as blow-up.
pub const BLOWUP_FAULT: f64 = 1e6;

/// Result of an integration: the density at each requested time, in input
/// order, plus the total number of RK4 steps taken.
#[derive(Debug)]
pub struct SolveResult {
    pub snapshots: Vec<(f64, DensityField)>,
    pub steps: usize,
}

fn rk4_step(program: &mut Program, rho: &DensityField, dt: f64) -> Result<DensityField> {
    let k1 = program.eval_rhs(rho)?;
    let k2 = program.eval_rhs(&axpy(rho, 0.5 * dt, &k1))?;
    let k3 = program.eval_rhs(&axpy(rho, 0.5 * dt, &k2))?;
    let k4 = program.eval_rhs(&axpy(rho, dt, &k3))?;
    let mut out = rho.clone();
    for i in 0..out.data.len() {
        out.data[i] +=
            dt / 6.0 * (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] + k4.data[i]);
    }
    Ok(out)
}

fn axpy(rho: &DensityField, a: f64, k: &DensityField) -> DensityField {
    let mut out = rho.clone();
    for (o, v) in out.data.iter_mut().zip(&k.data) {
        *o += a * v;
    }
    out
}

fn check_field(rho: &DensityField, t: f64) -> Result<()> {
    let min = rho.min();
    if min < NEGATIVITY_FAULT {
        return Err(Error::Numerical(format!(
            "density went negative at t = {t}: min {min} < {NEGATIVITY_FAULT}"
        )));
    }
    if rho.max_abs() > BLOWUP_FAULT {
        return Err(Error::Numerical(format!(
            "density blew up at t = {t}: sup {} > {BLOWUP_FAULT}",
            rho.max_abs()
        )));
    }
    Ok(())
}

/// Integrate `∂ρ/∂t = F(ρ)` from `rho0`, recording the density at each of
/// `times` (which must be nonnegative and sorted strictly increasing; 0 is
/// allowed and returns the initial field).
pub fn integrate(
    program: &mut Program,
    rho0: DensityField,
    times: &[f64],
    dt: f64,
) -> Result<SolveResult> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if times.is_empty() {
        return Err(Error::Config("no snapshot times requested".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(Error::Config(
            "snapshot times must be nonnegative and strictly increasing".into(),
        ));
    }
    check_field(&rho0, 0.0)?;

    // Startup halving validation on the first nontrivial step.
    if *times.last().unwrap() > 0.0 {
        let probe = dt.min(*times.last().unwrap());
        let one = rk4_step(program, &rho0, probe)?;
        let half = rk4_step(program, &rho0, probe / 2.0)?;
        let two = rk4_step(program, &half, probe / 2.0)?;
        let gap = one.sup_distance(&two);
        if gap > STEP_VALIDATION_TOL {
            return Err(Error::Numerical(format!(
                "step validation failed: dt = {probe} gives a halving gap {gap:.3e} \
                 > {STEP_VALIDATION_TOL:.0e}; reduce dt"
            )));
        }
    }

    let mut snapshots = Vec::with_capacity(times.len());
    let mut rho = rho0;
    let mut t = 0.0;
    let mut steps = 0usize;
    for &target in times {
        if target > t {
            let span = target - t;
            let n = (span / dt).ceil().max(1.0) as usize;
            let step = span / n as f64;
            for _ in 0..n {
                rho = rk4_step(program, &rho, step)?;
                t += step;
                check_field(&rho, t)?;
                steps += 1;
            }
            t = target; // absorb rounding from the accumulation
        }
        snapshots.push((target, rho.clone()));
    }
    Ok(SolveResult { snapshots, steps })
}
