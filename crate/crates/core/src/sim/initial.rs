//! Initial configuration sampling: a Poisson point process with intensity
//! `ε⁻¹ρ₀(x)`.
//!
//! The particle count is Poisson with mean `ε⁻¹∫ρ₀`; positions are then
//! i.i.d. with density `ρ₀/∫ρ₀`. In one dimension the cosine profile is
//! drawn by inverting its CDF with bisection (one uniform per particle); in
//! two dimensions by rejection against the profile maximum. The draw order
//! is part of the reproducibility contract: first the count, then the
//! particles in index order.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{Point, TorusBox};

use super::plan::InitialProfile;

/// Sample one replica's initial configuration.
pub(crate) fn sample_initial<R: Rng + ?Sized>(
    profile: InitialProfile,
    torus: &TorusBox,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let mean = profile.mean() * torus.volume() / eps;
    let n = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|_| Error::Numerical(format!("invalid initial intensity {mean}")))?
            .sample(rng) as usize
    } else {
        0
    };
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        pts.push(sample_position(profile, torus, rng));
    }
    Ok(pts)
}

fn sample_position<R: Rng + ?Sized>(profile: InitialProfile, torus: &TorusBox, rng: &mut R) -> Point {
    match (profile, torus.d) {
        (InitialProfile::Constant(_), _) => {
            let mut p = [0.0, 0.0];
            for c in p.iter_mut().take(torus.d) {
                *c = rng.gen::<f64>() * torus.l;
            }
            p
        }
        (InitialProfile::Cosine { base, amp }, 1) => {
            [invert_cosine_cdf(base, amp, torus.l, rng.gen::<f64>()), 0.0]
        }
        (InitialProfile::Cosine { base, amp }, _) => {
            // Rejection against the profile maximum; only the first
            // coordinate modulates the density.
            let max = base + amp;
            loop {
                let p = [rng.gen::<f64>() * torus.l, rng.gen::<f64>() * torus.l];
                let rho = base + amp * (std::f64::consts::TAU * p[0] / torus.l).cos();
                if rng.gen::<f64>() * max < rho {
                    return p;
                }
            }
        }
    }
}

/// Invert `F(x) = (base·x + amp·(L/2π)·sin(2πx/L)) / (base·L)` on `[0, L)`.
/// F is monotone for `amp ≤ base`, so plain bisection is exact to the last
/// few bits after 60 halvings.
fn invert_cosine_cdf(base: f64, amp: f64, l: f64, u: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mass = base * l;
    let cdf = |x: f64| (base * x + amp * (l / tau) * (tau * x / l).sin()) / mass;
    let (mut lo, mut hi) = (0.0f64, l);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
