//! Closed-form reference solutions used as independent oracles for the
//! spectral RK4 solver.
//!
//! Each reference integrates the limiting equation by a route that shares no
//! time-stepping code with the solver: pointwise exponentials for the linear
//! immigration–death equation, exact per-mode exponentials in Fourier space
//! for the linear convolution equations (using the same sampled kernel as
//! the solver, so the comparison isolates the time integrator), the logistic
//! closed form for homogeneous competition, and a bisection fixed point for
//! the Glauber equilibrium.

use crate::error::{Error, Result};
use crate::field::KineticModel;
use crate::kernel::Kernel;

use super::spectral::{DensityField, Spectral};

/// Tolerance of the Glauber fixed-point bisection.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Names of the models with a built-in reference route.
pub const REFERENCES: &[&str] = &[
    "surgailis",
    "contact",
    "free_kawasaki",
    "bdlp_homogeneous",
    "glauber_fixed_point",
];

fn param(model: &KineticModel, name: &str) -> Result<f64> {
    model.params.get(name).copied().ok_or_else(|| {
        Error::Config(format!("reference solution needs parameter `{name}`"))
    })
}

fn kernel<'m>(model: &'m KineticModel, name: &str) -> Result<&'m Kernel> {
    model.kernels.get(name).ok_or_else(|| {
        Error::Config(format!("reference solution needs kernel `{name}`"))
    })
}

/// Per-mode linear evolution `ρ̂_t = ρ̂₀ · exp(growth(mode)·t)`, with the
/// growth spectrum built from the solver's own sampled kernel transform.
fn spectral_linear(
    rho0: &DensityField,
    k: &Kernel,
    t: f64,
    growth: impl Fn(f64) -> f64,
) -> Result<DensityField> {
    let grid = rho0.grid;
    let mut sp = Spectral::new(grid);
    let vol = grid.cell_volume();
    // Kernels are even, so their transform is real up to rounding.
    let khat: Vec<f64> = sp.kernel_hat(k)?.iter().map(|c| c.re * vol).collect();
    let mut buf = sp.forward(&rho0.data);
    for (b, &ka) in buf.iter_mut().zip(&khat) {
        *b *= (growth(ka) * t).exp();
    }
    Ok(DensityField { grid, data: sp.backward_real(buf) })
}

/// Logistic closed form `ρ_t = Kρ₀e^{rt} / (K + ρ₀(e^{rt} − 1))`.
fn logistic(rho0: f64, r: f64, comp: f64, t: f64) -> f64 {
    if comp == 0.0 {
        return rho0 * (r * t).exp();
    }
    if r == 0.0 {
        return rho0 / (1.0 + comp * rho0 * t);
    }
    let k = r / comp;
    let e = (r * t).exp();
    k * rho0 * e / (k + rho0 * (e - 1.0))
}

/// Solve `ρ = z·exp(−⟨φ⟩ρ)` by bisection on `[0, z]`.
pub fn glauber_fixed_point(z: f64, phi_mass: f64) -> Result<f64> {
    if z <= 0.0 || z.is_nan() || phi_mass < 0.0 {
        return Err(Error::Config(format!(
            "fixed point needs z > 0 and ⟨φ⟩ ≥ 0, got z = {z}, ⟨φ⟩ = {phi_mass}"
        )));
    }
    let f = |r: f64| z * (-phi_mass * r).exp() - r;
    let (mut lo, mut hi) = (0.0f64, z);
    // f(0) = z > 0 ≥ f(z); the root is bracketed.
    while hi - lo > FIXED_POINT_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form solution of a named reference model at time `t` from `rho0`.
///
/// `which` is one of [`REFERENCES`]. The parameter and kernel names must
/// match the catalog presets (`m`, `sigma`, `lambda`, `z`; kernels `a`,
/// `aplus`, `aminus`, `phi`). Homogeneous references use the mean of `rho0`
/// and return constant fields; `glauber_fixed_point` ignores `t` and returns
/// the equilibrium density.
pub fn reference_solution(
    which: &str,
    model: &KineticModel,
    rho0: &DensityField,
    t: f64,
) -> Result<DensityField> {
    match which {
        "surgailis" => {
            let m = param(model, "m")?;
            let sigma = param(model, "sigma")?;
            let eq = sigma / m;
            let decay = (-m * t).exp();
            let data = rho0.data.iter().map(|&r| eq + (r - eq) * decay).collect();
            Ok(DensityField { grid: rho0.grid, data })
        }
        "contact" => {
            let m = param(model, "m")?;
            let lambda = param(model, "lambda")?;
            let a = kernel(model, "a")?;
            spectral_linear(rho0, a, t, |ahat| lambda * ahat - m)
        }
        "free_kawasaki" => {
            let a = kernel(model, "a")?;
            let mass = a.mass(rho0.grid.d)?;
            spectral_linear(rho0, a, t, |ahat| ahat - mass)
        }
        "bdlp_homogeneous" => {
            let m = param(model, "m")?;
            let lambda = param(model, "lambda")?;
            let d = rho0.grid.d;
            let r = lambda * kernel(model, "aplus")?.mass(d)? - m;
            let comp = kernel(model, "aminus")?.mass(d)?;
            Ok(DensityField::constant(rho0.grid, logistic(rho0.mean(), r, comp, t)))
        }
        "glauber_fixed_point" => {
            let z = param(model, "z")?;
            let phi_mass = kernel(model, "phi")?.mass(rho0.grid.d)?;
            Ok(DensityField::constant(rho0.grid, glauber_fixed_point(z, phi_mass)?))
        }
        other => Err(Error::Config(format!(
            "no reference solution for `{other}`; available: {}",
            REFERENCES.join(", ")
        ))),
    }
}
