//! Interaction kernels: radial profiles with analytic masses, exact
//! displacement samplers, and the per-symbol scaling tag used by the
//! mean-field analysis.
//!
//! A kernel is a nonneg-or-signed function of a displacement. All built-in
//! profiles are even (functions of |x|), and tabulated profiles are
//! symmetrized on load, so convolutions never need a reflection flag. The
//! model on the torus is the periodic-image kernel; callers evaluate on
//! minimum-image displacements and the neglected images are bounded by the
//! profile tails beyond [`Kernel::cutoff_radius`], which plan validation
//! keeps under ~1e-9 of the amplitude by requiring the cutoff to fit in
//! half the box.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// How a declared symbol behaves under the mean-field scaling ε → 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scaling {
    /// Untouched by the scaling.
    Fixed,
    /// Multiplied by ε (kernels: `k ↦ εk`).
    Eps,
    /// Divided by ε (constants: `c ↦ ε⁻¹c`).
    InvEps,
}

impl Scaling {
    /// The ε-order contributed by the symbol: ε^(order()).
    pub fn order(self) -> i32 {
        match self {
            Scaling::Fixed => 0,
            Scaling::Eps => 1,
            Scaling::InvEps => -1,
        }
    }

    /// Numeric factor at a concrete ε.
    pub fn factor(self, eps: f64) -> f64 {
        match self {
            Scaling::Fixed => 1.0,
            Scaling::Eps => eps,
            Scaling::InvEps => 1.0 / eps,
        }
    }
}

/// Radial shape of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelProfile {
    /// `exp(−|x|² / (2σ²))`
    Gaussian { sigma: f64 },
    /// `1` for `|x| ≤ radius`, else `0`
    TopHat { radius: f64 },
    /// `exp(−κ|x|)`
    Exponential { kappa: f64 },
    /// Piecewise-linear profile from `(x, value)` samples, one-dimensional.
    /// Symmetrized on construction; zero outside the sampled range.
    Table { xs: Vec<f64>, values: Vec<f64> },
}

/// A named kernel: amplitude × profile, plus its scaling tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub name: String,
    pub profile: KernelProfile,
    pub amplitude: f64,
    pub scaling: Scaling,
}

impl Kernel {
    pub fn new(name: &str, profile: KernelProfile, amplitude: f64, scaling: Scaling) -> Result<Self> {
        match &profile {
            KernelProfile::Gaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::Config(format!("kernel {name}: sigma must be positive")));
                }
            }
            KernelProfile::TopHat { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Config(format!("kernel {name}: radius must be positive")));
                }
            }
            KernelProfile::Exponential { kappa } => {
                if !(kappa.is_finite() && *kappa > 0.0) {
                    return Err(Error::Config(format!("kernel {name}: kappa must be positive")));
                }
            }
            KernelProfile::Table { xs, values } => {
                if xs.len() < 2 || xs.len() != values.len() {
                    return Err(Error::Config(format!(
                        "kernel {name}: table needs ≥2 (x, value) rows of equal length"
                    )));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(format!("kernel {name}: table x must be strictly increasing")));
                }
                if xs.iter().chain(values.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("kernel {name}: table has non-finite entries")));
                }
            }
        }
        if !amplitude.is_finite() {
            return Err(Error::Config(format!("kernel {name}: amplitude must be finite")));
        }
        let profile = match profile {
            KernelProfile::Table { xs, values } => symmetrize_table(xs, values),
            p => p,
        };
        Ok(Kernel { name: name.to_string(), profile, amplitude, scaling })
    }

    /// Evaluate at a (minimum-image) displacement.
    pub fn eval(&self, disp: Point) -> f64 {
        let r = (disp[0] * disp[0] + disp[1] * disp[1]).sqrt();
        self.amplitude * self.profile_at(r)
    }

    fn profile_at(&self, r: f64) -> f64 {
        match &self.profile {
            KernelProfile::Gaussian { sigma } => (-r * r / (2.0 * sigma * sigma)).exp(),
            KernelProfile::TopHat { radius } => {
                if r <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            KernelProfile::Exponential { kappa } => (-kappa * r).exp(),
            KernelProfile::Table { xs, values } => interp_linear(xs, values, r),
        }
    }

    /// Full-space integral `∫ k`, exact for the analytic profiles and a
    /// trapezoid for tables. Two-dimensional tables are not supported, so
    /// `d` only matters for the analytic shapes.
    pub fn mass(&self, d: usize) -> Result<f64> {
        let m = match (&self.profile, d) {
            (KernelProfile::Gaussian { sigma }, _) => {
                (2.0 * std::f64::consts::PI * sigma * sigma).powf(d as f64 / 2.0)
            }
            (KernelProfile::TopHat { radius }, 1) => 2.0 * radius,
            (KernelProfile::TopHat { radius }, 2) => std::f64::consts::PI * radius * radius,
            (KernelProfile::Exponential { kappa }, 1) => 2.0 / kappa,
            (KernelProfile::Exponential { kappa }, 2) => {
                2.0 * std::f64::consts::PI / (kappa * kappa)
            }
            // Tables are stored folded onto r ≥ 0; the kernel is their even
            // extension, so the line integral doubles the half-line trapezoid.
            (KernelProfile::Table { xs, values }, 1) => 2.0 * trapezoid(xs, values),
            (KernelProfile::Table { .. }, _) => {
                return Err(Error::Config(format!(
                    "kernel {}: tabulated profiles are one-dimensional only",
                    self.name
                )))
            }
            _ => unreachable!("dimension validated at box construction"),
        };
        Ok(self.amplitude * m)
    }

    /// Peak absolute value (attained at 0 for the analytic profiles).
    pub fn max_abs(&self) -> f64 {
        let peak = match &self.profile {
            KernelProfile::Gaussian { .. }
            | KernelProfile::TopHat { .. }
            | KernelProfile::Exponential { .. } => 1.0,
            KernelProfile::Table { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        };
        self.amplitude.abs() * peak
    }

    /// Smallest length scale the profile varies on: a grid resolves the
    /// kernel faithfully only if its spacing stays below half of this.
    pub fn feature_scale(&self) -> f64 {
        match &self.profile {
            KernelProfile::Gaussian { sigma } => *sigma,
            KernelProfile::TopHat { radius } => *radius,
            KernelProfile::Exponential { kappa } => 1.0 / kappa,
            KernelProfile::Table { xs, .. } => xs
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Radius beyond which the profile is ≤ ~1e-9 of its peak (exactly zero
    /// for top-hat and tables). Plan validation requires this to fit within
    /// half the box so the minimum-image evaluation is faithful.
    pub fn cutoff_radius(&self) -> f64 {
        match &self.profile {
            KernelProfile::Gaussian { sigma } => 6.5 * sigma,
            KernelProfile::TopHat { radius } => *radius,
            KernelProfile::Exponential { kappa } => 25.0 / kappa,
            KernelProfile::Table { xs, .. } => xs.last().copied().unwrap_or(0.0).abs(),
        }
    }

    /// True if the kernel is pointwise ≥ 0 (required for proposal sampling
    /// and for exp-factor thinning bounds).
    pub fn is_nonnegative(&self) -> bool {
        if self.amplitude < 0.0 {
            return false;
        }
        match &self.profile {
            KernelProfile::Table { values, .. } => values.iter().all(|&v| v >= 0.0),
            _ => true,
        }
    }

    /// Draw a displacement distributed as `k/∫k` in dimension `d`. The draw
    /// is from the full-space profile; callers wrap it onto the torus, which
    /// realizes the periodic-image kernel exactly.
    pub fn sample_displacement<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Result<Point> {
        if !self.is_nonnegative() {
            return Err(Error::Config(format!(
                "kernel {} has negative values and cannot be used as a proposal density",
                self.name
            )));
        }
        let mut p: Point = [0.0, 0.0];
        match &self.profile {
            KernelProfile::Gaussian { sigma } => {
                let n = Normal::new(0.0, *sigma).expect("sigma validated positive");
                for c in p.iter_mut().take(d) {
                    *c = n.sample(rng);
                }
            }
            KernelProfile::TopHat { radius } => {
                if d == 1 {
                    p[0] = rng.gen_range(-radius..=*radius);
                } else {
                    let r = radius * rng.gen::<f64>().sqrt();
                    let th = rng.gen_range(0.0..std::f64::consts::TAU);
                    p = [r * th.cos(), r * th.sin()];
                }
            }
            KernelProfile::Exponential { kappa } => {
                let e = Exp::new(*kappa).expect("kappa validated positive");
                if d == 1 {
                    let r = e.sample(rng);
                    p[0] = if rng.gen::<bool>() { r } else { -r };
                } else {
                    // Radial density ∝ r e^{−κr}: Gamma(2, 1/κ), the sum of
                    // two exponentials.
                    let r = e.sample(rng) + e.sample(rng);
                    let th = rng.gen_range(0.0..std::f64::consts::TAU);
                    p = [r * th.cos(), r * th.sin()];
                }
            }
            KernelProfile::Table { xs, values } => {
                if d != 1 {
                    return Err(Error::Config(format!(
                        "kernel {}: tabulated profiles are one-dimensional only",
                        self.name
                    )));
                }
                p[0] = sample_piecewise_linear(xs, values, rng)?;
            }
        }
        Ok(p)
    }
}

fn interp_linear(xs: &[f64], values: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > *xs.last().unwrap() {
        return 0.0;
    }
    let i = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => return values[i],
        Err(i) => i - 1,
    };
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    values[i] + t * (values[i + 1] - values[i])
}

fn trapezoid(xs: &[f64], values: &[f64]) -> f64 {
    xs.windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| 0.5 * (v[0] + v[1]) * (x[1] - x[0]))
        .sum()
}

/// Fold a table onto |x| and mirror it, so the stored profile is an even
/// function sampled on nonnegative abscissae.
fn symmetrize_table(xs: Vec<f64>, values: Vec<f64>) -> KernelProfile {
    // Collect |x| abscissae, averaging the two sides where both exist.
    let mut folded: Vec<(f64, f64, u32)> = Vec::new();
    for (&x, &v) in xs.iter().zip(values.iter()) {
        let a = x.abs();
        match folded.iter_mut().find(|(fx, _, _)| (*fx - a).abs() < 1e-12) {
            Some(slot) => {
                slot.1 += v;
                slot.2 += 1;
            }
            None => folded.push((a, v, 1)),
        }
    }
    folded.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = folded.iter().map(|f| f.0).collect();
    let values: Vec<f64> = folded.iter().map(|f| f.1 / f.2 as f64).collect();
    KernelProfile::Table { xs, values }
}

/// Exact inverse-CDF draw from a nonnegative piecewise-linear density given
/// on |x| abscissae (the even extension over the sign is a fair coin).
fn sample_piecewise_linear<R: Rng + ?Sized>(xs: &[f64], values: &[f64], rng: &mut R) -> Result<f64> {
    let seg_mass: Vec<f64> = xs
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| 0.5 * (v[0] + v[1]) * (x[1] - x[0]))
        .collect();
    let total: f64 = seg_mass.iter().sum();
    if total <= 0.0 || total.is_nan() {
        return Err(Error::Config("tabulated kernel has zero mass".into()));
    }
    let mut u = rng.gen::<f64>() * total;
    let mut i = 0;
    while i + 1 < seg_mass.len() && u > seg_mass[i] {
        u -= seg_mass[i];
        i += 1;
    }
    let (x0, x1, v0, v1) = (xs[i], xs[i + 1], values[i], values[i + 1]);
    let w = x1 - x0;
    let slope = (v1 - v0) / w;
    // Solve v0 t + slope t²/2 = u for t ∈ [0, w].
    let t = if slope.abs() < 1e-14 * (v0.abs() + 1.0) {
        u / v0.max(1e-300)
    } else {
        let disc = (v0 * v0 + 2.0 * slope * u).max(0.0);
        (disc.sqrt() - v0) / slope
    };
    let r = x0 + t.clamp(0.0, w);
    Ok(if rng.gen::<bool>() { r } else { -r })
}
