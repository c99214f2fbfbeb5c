//! Finite point configurations and the harmonic-analysis toolbox on them.
//!
//! A [`Configuration`] is a finite set of points of the torus. The central
//! objects are the combinatorial transform `K` that turns a function on
//! finite configurations into a sum over sub-configurations, its Möbius
//! inverse `K⁻¹`, and Lebesgue–Poisson style integrals evaluated exactly on
//! a [`DiscreteSpace`] (a finite site list standing in for the continuum at
//! desk scale). These exact routes are the oracles everything symbolic in
//! this crate is checked against.
//!
//! All enumerations here are exponential in the configuration/site count by
//! nature, so every entry point carries an explicit cardinality guard and
//! returns an error instead of silently grinding.

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Hard cap on `|γ|` for sub-configuration enumeration (2^25 subsets).
pub const MAX_ENUM_POINTS: usize = 25;
/// Hard cap on site count for [`lp_integral`] (2^16 subsets).
pub const MAX_LP_SITES: usize = 16;
/// Hard cap on site count for [`verify_minlos`] (3^10 disjoint pairs).
pub const MAX_MINLOS_SITES: usize = 10;

/// A finite, simple point configuration, kept sorted so that equal sets
/// compare equal and subset enumeration is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<Point>,
}

impl Configuration {
    /// The empty configuration.
    pub fn empty() -> Self {
        Configuration { points: Vec::new() }
    }

    /// Build a configuration from arbitrary points; sorts them and rejects
    /// non-finite coordinates.
    pub fn new(mut points: Vec<Point>) -> Result<Self> {
        for p in &points {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::Config(format!(
                    "configuration point has non-finite coordinate: {p:?}"
                )));
            }
        }
        points.sort_by(cmp_points);
        Ok(Configuration { points })
    }

    /// Internal constructor for point lists already in sorted order
    /// (sub-configurations of a sorted configuration stay sorted).
    fn from_sorted(points: Vec<Point>) -> Self {
        debug_assert!(points.windows(2).all(|w| cmp_points(&w[0], &w[1]) != std::cmp::Ordering::Greater));
        Configuration { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Exact-identity key (coordinate bit patterns). Handy for tabulating a
    /// function on the subsets of a fixed site list: sub-configurations copy
    /// coordinates bit-for-bit, so lookups by key are exact.
    pub fn bit_key(&self) -> Vec<[u64; 2]> {
        self.points.iter().map(|p| [p[0].to_bits(), p[1].to_bits()]).collect()
    }

    /// The sub-configuration selected by a bitmask over `self.points()`.
    pub fn subset(&self, mask: u32) -> Configuration {
        let mut pts = Vec::with_capacity(mask.count_ones() as usize);
        for (i, p) in self.points.iter().enumerate() {
            if mask >> i & 1 == 1 {
                pts.push(*p);
            }
        }
        Configuration::from_sorted(pts)
    }

    /// Union with a disjoint set of points (used for η ∪ ξ in identities).
    pub fn union(&self, other: &Configuration) -> Configuration {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        pts.sort_by(cmp_points);
        Configuration { points: pts }
    }

    fn guard(&self, limit: usize, what: &str) -> Result<()> {
        if self.len() > limit {
            return Err(Error::Cardinality(format!(
                "{what} enumerates 2^|γ| subsets; |γ| = {} exceeds the limit {limit}",
                self.len()
            )));
        }
        Ok(())
    }
}

fn cmp_points(a: &Point, b: &Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

/// A finite list of sites with a volume element, standing in for the
/// continuum in desk-scale integral checks. Integrals over the
/// Lebesgue–Poisson measure become exact finite sums over site subsets.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    pub sites: Vec<Point>,
    pub volume_element: f64,
}

impl DiscreteSpace {
    pub fn new(sites: Vec<Point>, volume_element: f64) -> Result<Self> {
        if !(volume_element.is_finite() && volume_element > 0.0) {
            return Err(Error::Config(format!(
                "volume element must be positive, got {volume_element}"
            )));
        }
        Ok(DiscreteSpace { sites, volume_element })
    }

    fn site_config(&self) -> Result<Configuration> {
        Configuration::new(self.sites.clone())
    }
}

/// `K`-transform: `(KG)(γ) = Σ_{η ⊆ γ} G(η)`, the sum running over all
/// 2^|γ| sub-configurations including the empty one.
pub fn k_transform<G>(g: G, gamma: &Configuration) -> Result<f64>
where
    G: Fn(&Configuration) -> f64,
{
    gamma.guard(MAX_ENUM_POINTS, "k_transform")?;
    let n = gamma.len();
    let mut acc = 0.0;
    for mask in 0..(1u64 << n) {
        acc += g(&gamma.subset(mask as u32));
    }
    Ok(acc)
}

/// Möbius inverse of the `K`-transform:
/// `(K⁻¹F)(η) = Σ_{ξ ⊆ η} (−1)^{|η∖ξ|} F(ξ)`.
pub fn k_inverse<F>(f: F, eta: &Configuration) -> Result<f64>
where
    F: Fn(&Configuration) -> f64,
{
    eta.guard(MAX_ENUM_POINTS, "k_inverse")?;
    let n = eta.len();
    let mut acc = 0.0;
    for mask in 0..(1u64 << n) {
        let sub = eta.subset(mask as u32);
        let sign = if (n - sub.len()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += sign * f(&sub);
    }
    Ok(acc)
}

/// Multiplicative exponent `e(f, η) = Π_{x ∈ η} f(x)`, with `e(f, ∅) = 1`.
pub fn lp_exponent<F>(f: F, eta: &Configuration) -> f64
where
    F: Fn(Point) -> f64,
{
    eta.points().iter().map(|&p| f(p)).product()
}

/// Lebesgue–Poisson integral of `G` rendered exactly on a finite site list:
/// `∫ G dλ = Σ_{S ⊆ sites} G(S) · v^|S|` where `v` is the volume element.
/// (Ordered n-tuples with repeats are null for the continuum measure, so the
/// discrete rendering sums over plain subsets; the 1/n! cancels against the
/// n! orderings of each subset.)
pub fn lp_integral<G>(g: G, space: &DiscreteSpace) -> Result<f64>
where
    G: Fn(&Configuration) -> f64,
{
    let n = space.sites.len();
    if n > MAX_LP_SITES {
        return Err(Error::Cardinality(format!(
            "lp_integral enumerates 2^sites subsets; {n} sites exceeds the limit {MAX_LP_SITES}"
        )));
    }
    let all = space.site_config()?;
    let v = space.volume_element;
    let mut acc = 0.0;
    for mask in 0..(1u64 << n) {
        let sub = all.subset(mask as u32);
        acc += g(&sub) * v.powi(sub.len() as i32);
    }
    Ok(acc)
}

/// Both routes of the combinatorial Fubini identity
/// `∫ Σ_{ξ⊆η} H(ξ, η∖ξ, η) dλ(η) = ∫∫ H(ξ, η, η∪ξ) dλ(ξ) dλ(η)`,
/// evaluated exactly on a finite site list. Returns `(lhs, rhs)`; the two
/// must agree to float roundoff — it is a pure rearrangement of finitely
/// many terms. On the right the double integral runs over disjoint pairs
/// only (coinciding points are null for the continuum measure).
pub fn verify_minlos<H>(h: H, space: &DiscreteSpace) -> Result<(f64, f64)>
where
    H: Fn(&Configuration, &Configuration, &Configuration) -> f64,
{
    let n = space.sites.len();
    if n > MAX_MINLOS_SITES {
        return Err(Error::Cardinality(format!(
            "verify_minlos enumerates 3^sites disjoint pairs; {n} sites exceeds the limit {MAX_MINLOS_SITES}"
        )));
    }
    let all = space.site_config()?;
    let v = space.volume_element;

    // Left route: one integral, inner sum over sub-configurations.
    let mut lhs = 0.0;
    for eta_mask in 0..(1u64 << n) as u32 {
        let eta = all.subset(eta_mask);
        let m = eta.len();
        let mut inner = 0.0;
        for sub in 0..(1u64 << m) as u32 {
            let xi = eta.subset(sub);
            let rest = eta.subset(!sub & ((1u32 << m) - 1));
            inner += h(&xi, &rest, &eta);
        }
        lhs += inner * v.powi(m as i32);
    }

    // Right route: double integral over disjoint subset pairs.
    let mut rhs = 0.0;
    for xi_mask in 0..(1u64 << n) as u32 {
        let xi = all.subset(xi_mask);
        let complement = !xi_mask & ((1u64 << n) as u32).wrapping_sub(1);
        // Enumerate subsets of the complement mask.
        let mut sub = complement;
        loop {
            let eta = all.subset(sub);
            let union = all.subset(xi_mask | sub);
            rhs += h(&xi, &eta, &union) * v.powi((xi.len() + eta.len()) as i32);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & complement;
        }
    }

    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn sites(n: usize) -> Vec<Point> {
        (0..n).map(|i| [0.37 * i as f64 + 0.11, 0.0]).collect()
    }

    /// Random function tabulated on every subset of a site list, keyed by
    /// exact coordinate bits.
    fn tabulated(rng: &mut ChaCha8Rng, base: &Configuration) -> HashMap<Vec<[u64; 2]>, f64> {
        let mut table = HashMap::new();
        for mask in 0..(1u64 << base.len()) as u32 {
            table.insert(base.subset(mask).bit_key(), rng.gen_range(-1.0..1.0));
        }
        table
    }

    #[test]
    fn k_transform_of_singleton_indicator_sums_f_over_the_configuration() {
        let f = |p: Point| 2.0 * p[0] + 1.0;
        let g = move |eta: &Configuration| {
            if eta.len() == 1 {
                f(eta.points()[0])
            } else {
                0.0
            }
        };
        let gamma = Configuration::new(vec![[0.5, 0.0], [1.25, 0.0], [3.0, 0.0]]).unwrap();
        let got = k_transform(g, &gamma).unwrap();
        let want: f64 = gamma.points().iter().map(|&p| f(p)).sum();
        assert!((got - want).abs() < 1e-14, "got {got}, want {want}");
    }

    #[test]
    fn k_transform_of_empty_indicator_is_one() {
        let g = |eta: &Configuration| if eta.is_empty() { 1.0 } else { 0.0 };
        for n in 0..6 {
            let gamma = Configuration::new(sites(n)).unwrap();
            assert_eq!(k_transform(g, &gamma).unwrap(), 1.0);
        }
    }

    #[test]
    fn k_transform_of_product_exponent_is_product_of_one_plus_f() {
        // Σ_{η⊆γ} Π_{x∈η} f(x) telescopes to Π_{x∈γ} (1 + f(x)); the left
        // side below is the brute subset sum, the right side the closed form.
        let f = |p: Point| 0.5 * (p[0].sin() + 1.3);
        let gamma =
            Configuration::new(vec![[0.1, 0.0], [0.7, 0.0], [2.9, 0.0], [4.2, 0.0]]).unwrap();
        let got = k_transform(|eta| lp_exponent(f, eta), &gamma).unwrap();
        let want: f64 = gamma.points().iter().map(|&p| 1.0 + f(p)).product();
        assert!((got - want).abs() < 1e-13, "got {got}, want {want}");
    }

    #[test]
    fn k_inverse_of_constant_one_is_indicator_of_empty() {
        let f = |_: &Configuration| 1.0;
        let empty = Configuration::empty();
        assert_eq!(k_inverse(f, &empty).unwrap(), 1.0);
        for n in 1..6 {
            let eta = Configuration::new(sites(n)).unwrap();
            let got = k_inverse(f, &eta).unwrap();
            assert!(got.abs() < 1e-13, "K⁻¹1 at |η|={n} should vanish, got {got}");
        }
    }

    #[test]
    fn k_inverse_recovers_product_exponent_from_its_transform() {
        // F(η) = Π(1+f) is K e(f,·), so K⁻¹F must give back e(f,·).
        let f = |p: Point| 0.25 * p[0] - 0.3;
        let big = Configuration::new(sites(5)).unwrap();
        for mask in 0..32u32 {
            let eta = big.subset(mask);
            let cap = |xi: &Configuration| -> f64 {
                xi.points().iter().map(|&p| 1.0 + f(p)).product()
            };
            let got = k_inverse(cap, &eta).unwrap();
            let want = lp_exponent(f, &eta);
            assert!((got - want).abs() < 1e-12, "mask {mask}: got {got}, want {want}");
        }
    }

    #[test]
    fn k_inverse_then_k_transform_is_identity_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let base = Configuration::new(sites(5)).unwrap();
        for trial in 0..20 {
            let table = tabulated(&mut rng, &base);
            let f = |eta: &Configuration| table[&eta.bit_key()];
            for mask in 0..32u32 {
                let eta = base.subset(mask);
                let kinv = |xi: &Configuration| k_inverse(f, xi).unwrap();
                let roundtrip = k_transform(kinv, &eta).unwrap();
                assert!(
                    (roundtrip - f(&eta)).abs() < 1e-12,
                    "trial {trial} mask {mask}: K K⁻¹ F = {roundtrip} vs F = {}",
                    f(&eta)
                );
            }
        }
    }

    #[test]
    fn cardinality_guards_fire() {
        let too_big = Configuration::new((0..26).map(|i| [i as f64, 0.0]).collect()).unwrap();
        assert!(matches!(
            k_transform(|_| 0.0, &too_big),
            Err(Error::Cardinality(_))
        ));
        let space = DiscreteSpace::new(sites(17), 0.1).unwrap();
        assert!(matches!(lp_integral(|_| 0.0, &space), Err(Error::Cardinality(_))));
        let space = DiscreteSpace::new(sites(11), 0.1).unwrap();
        assert!(matches!(
            verify_minlos(|_, _, _| 0.0, &space),
            Err(Error::Cardinality(_))
        ));
    }

    #[test]
    fn lp_exponent_basics() {
        assert_eq!(lp_exponent(|_| 7.0, &Configuration::empty()), 1.0);
        let eta = Configuration::new(sites(3)).unwrap();
        assert_eq!(lp_exponent(|_| 2.0, &eta), 8.0);
    }

    #[test]
    fn lp_integral_of_product_exponent_matches_closed_form() {
        // Σ_S v^|S| Π_{x∈S} f(x) = Π_sites (1 + v f(site)), exactly.
        let space = DiscreteSpace::new(sites(8), 0.21).unwrap();
        let f = |p: Point| (0.6 * p[0]).cos();
        let got = lp_integral(|eta| lp_exponent(f, eta), &space).unwrap();
        let want: f64 = space.sites.iter().map(|&s| 1.0 + space.volume_element * f(s)).product();
        assert!((got - want).abs() < 1e-13, "got {got}, want {want}");
    }

    #[test]
    fn lp_integral_of_indicators() {
        let space = DiscreteSpace::new(sites(6), 0.5).unwrap();
        let empty_ind = |eta: &Configuration| if eta.is_empty() { 1.0 } else { 0.0 };
        assert_eq!(lp_integral(empty_ind, &space).unwrap(), 1.0);
        let single_ind = |eta: &Configuration| if eta.len() == 1 { 1.0 } else { 0.0 };
        let got = lp_integral(single_ind, &space).unwrap();
        assert!((got - 6.0 * 0.5).abs() < 1e-13);
    }

    #[test]
    fn lp_integral_approaches_exponential_under_refinement() {
        // ∫ e(f,·) dλ = exp(∫f) in the continuum; refine [0,1] and watch the
        // discrete product ∏(1 + v·f) converge to exp(∫f). The leading
        // deviation is (v/2)·∫f²·exp(∫f), first order in the site volume, so
        // halving v must halve the error.
        let f = |p: Point| p[0] * p[0];
        let exact = (1.0f64 / 3.0).exp();
        let mut errs = Vec::new();
        for n in [4usize, 8, 16] {
            let v = 1.0 / n as f64;
            let s: Vec<Point> = (0..n).map(|i| [(i as f64 + 0.5) * v, 0.0]).collect();
            let space = DiscreteSpace::new(s, v).unwrap();
            let got = lp_integral(|eta| lp_exponent(f, eta), &space).unwrap();
            errs.push((got - exact).abs());
        }
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "not refining: {errs:?}");
        let ratio = errs[2] / errs[1];
        assert!(
            (ratio - 0.5).abs() < 0.1,
            "error should halve with the site volume: {errs:?} (ratio {ratio})"
        );
        let predicted = 0.5 / 16.0 * (1.0 / 5.0) * exact;
        assert!(
            (errs[2] - predicted).abs() < 0.2 * predicted,
            "16-site error {} far from the first-order prediction {predicted}",
            errs[2]
        );
    }

    #[test]
    fn minlos_identity_holds_for_random_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let space = DiscreteSpace::new(sites(6), 0.4).unwrap();
        for trial in 0..10 {
            // A generic coupled H: depends on all three arguments.
            let a = rng.gen_range(0.2..1.0);
            let b = rng.gen_range(-0.5..0.5);
            let h = |xi: &Configuration, eta: &Configuration, whole: &Configuration| {
                let sx: f64 = xi.points().iter().map(|p| (a * p[0]).sin()).sum();
                let pe: f64 = eta.points().iter().map(|p| 1.0 + b * p[0]).product();
                sx.mul_add(pe, 0.1 * whole.len() as f64)
            };
            let (lhs, rhs) = verify_minlos(h, &space).unwrap();
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!(
                (lhs - rhs).abs() / scale < 1e-12,
                "trial {trial}: lhs {lhs} vs rhs {rhs}"
            );
        }
    }

    #[test]
    fn minlos_identity_with_separable_h_matches_hand_value() {
        // H(ξ,η,·) = e(f,ξ)e(g,η) makes both sides Π(1+v f)·Π-type products;
        // check against the direct closed form Σ over disjoint pairs.
        let space = DiscreteSpace::new(sites(4), 0.3).unwrap();
        let f = |p: Point| 0.2 * p[0] + 0.1;
        let g = |p: Point| 0.5 - 0.1 * p[0];
        let h = |xi: &Configuration, eta: &Configuration, _: &Configuration| {
            lp_exponent(f, xi) * lp_exponent(g, eta)
        };
        let (lhs, rhs) = verify_minlos(h, &space).unwrap();
        // Direct: Σ over disjoint (ξ,η) of v^{|ξ|+|η|} e(f,ξ)e(g,η)
        //       = Π_sites (1 + v f(s) + v g(s)).
        let v = space.volume_element;
        let want: f64 = space.sites.iter().map(|&s| 1.0 + v * f(s) + v * g(s)).product();
        assert!((lhs - want).abs() < 1e-13, "lhs {lhs} vs closed form {want}");
        assert!((rhs - want).abs() < 1e-13, "rhs {rhs} vs closed form {want}");
    }
}
