//! Numeric evaluation of canonical terms: finite-ε rates, combinatorial
//! (K⁻¹) coefficients, and their mean-field limits.
//!
//! Three evaluators share the canonical [`Term`] structure:
//!
//! * [`eval_rate`] — the rate exactly as written, at a concrete scale ε,
//!   given the active particle, the optional arrival point, and the
//!   environment (the configuration without the active particle).
//! * [`k_coefficient`] — the renormalization-ready combinatorial
//!   coefficient: the Möbius inverse of the rate over subsets of a finite
//!   probe configuration ξ. Birth rates are multiplied by ε first, because
//!   they are written as full intensities carrying the structural 1/ε.
//! * [`vlasov_coefficient`] — the ε→0 limit of ε^{−|ξ|}·(K⁻¹ rate)(ξ):
//!   slots are assigned injectively to the points of ξ, every unassigned
//!   point must be absorbed by an exponent sum of ε-order exactly one, and
//!   all scaling factors are consumed by the renormalization so every
//!   symbol appears at its unscaled value.

use crate::config::{k_inverse, Configuration};
use crate::error::Result;
use crate::geometry::{Point, TorusBox};

use super::ast::{GeneratorSpec, PartKind};
use super::canonical::{Anchor, PointFactor, PtDisp, Term};
use super::scaling::{entry_order, exp_point_order, term_survives};

struct Ctx<'a> {
    spec: &'a GeneratorSpec,
    torus: &'a TorusBox,
    x: Point,
    y: Option<Point>,
}

impl Ctx<'_> {
    fn kernel_value(&self, name: &str, a: Point, b: Point, eps: Option<f64>) -> f64 {
        let k = &self.spec.kernels[name];
        let scale = eps.map_or(1.0, |e| k.scaling.factor(e));
        k.eval(self.torus.min_image(a, b)) * scale
    }

    fn disp_value(&self, name: &str, disp: PtDisp, eps: Option<f64>) -> f64 {
        let k = &self.spec.kernels[name];
        let scale = eps.map_or(1.0, |e| k.scaling.factor(e));
        match disp {
            PtDisp::Zero => k.eval([0.0, 0.0]) * scale,
            PtDisp::XY => {
                let y = self.y.expect("x-y displacement outside a hop rate");
                k.eval(self.torus.min_image(self.x, y)) * scale
            }
        }
    }

    fn anchor_pos(&self, anchor: Anchor, env: &[Point], chosen: &[usize]) -> Point {
        match anchor {
            Anchor::X => self.x,
            Anchor::Y => self.y.expect("y-anchored sum outside a hop rate"),
            Anchor::Slot(s) => env[chosen[s]],
        }
    }
}

fn consts_value(consts: &[super::canonical::ConstRef], eps: Option<f64>) -> f64 {
    consts
        .iter()
        .map(|c| c.value * eps.map_or(1.0, |e| c.scaling.factor(e)))
        .product()
}

/// Value of one canonical term at scale ε.
fn eval_term(ctx: &Ctx, eps: f64, term: &Term, env: &[Point]) -> f64 {
    let mut base = term.coeff * consts_value(&term.consts, Some(eps));
    for p in &term.points {
        match p {
            PointFactor::Kern { kernel, disp } => {
                base *= ctx.disp_value(kernel, *disp, Some(eps));
            }
            PointFactor::ExpKern { coeff, consts, kernel, disp } => {
                let arg =
                    coeff * consts_value(consts, Some(eps)) * ctx.disp_value(kernel, *disp, Some(eps));
                base *= arg.exp();
            }
        }
    }
    if base == 0.0 {
        return 0.0;
    }

    // Slot assignments: nested sums over environment indices, respecting
    // exclusions of earlier slots; exponent sums are evaluated once all
    // anchors are known.
    fn recurse(ctx: &Ctx, eps: f64, term: &Term, env: &[Point], chosen: &mut Vec<usize>) -> f64 {
        let i = chosen.len();
        if i == term.slots.len() {
            let mut exponent = 0.0;
            for e in &term.exps {
                let anchor = ctx.anchor_pos(e.anchor, env, chosen);
                let mut sum = 0.0;
                'pts: for (j, &u) in env.iter().enumerate() {
                    for &ex in &e.excl {
                        if chosen[ex] == j {
                            continue 'pts;
                        }
                    }
                    sum += ctx.kernel_value(&e.kernel, anchor, u, Some(eps));
                }
                exponent += e.coeff * consts_value(&e.consts, Some(eps)) * sum;
            }
            return exponent.exp();
        }
        let slot = &term.slots[i];
        let anchor = ctx.anchor_pos(slot.anchor, env, chosen);
        let mut acc = 0.0;
        'cands: for (j, &u) in env.iter().enumerate() {
            for &ex in &slot.excl {
                if chosen[ex] == j {
                    continue 'cands;
                }
            }
            let v = ctx.kernel_value(&slot.kernel, anchor, u, Some(eps));
            if v != 0.0 {
                chosen.push(j);
                acc += v * recurse(ctx, eps, term, env, chosen);
                chosen.pop();
            }
        }
        acc
    }
    base * recurse(ctx, eps, term, env, &mut Vec::new())
}

/// The net rate of a part at scale ε: active particle `x`, arrival `y`
/// (hops only), environment `env` (the configuration without `x`).
pub fn eval_rate(
    spec: &GeneratorSpec,
    torus: &TorusBox,
    terms: &[Term],
    x: Point,
    y: Option<Point>,
    env: &[Point],
    eps: f64,
) -> f64 {
    let ctx = Ctx { spec, torus, x, y };
    terms.iter().map(|t| eval_term(&ctx, eps, t, env)).sum()
}

/// The combinatorial coefficient (Möbius inverse of the rate) on the probe
/// configuration ξ at scale ε. Birth rates are multiplied by the structural
/// ε so the result is the density-limited coefficient in every part.
#[allow(clippy::too_many_arguments)]
pub fn k_coefficient(
    spec: &GeneratorSpec,
    torus: &TorusBox,
    part: PartKind,
    terms: &[Term],
    x: Point,
    y: Option<Point>,
    xi: &Configuration,
    eps: f64,
) -> Result<f64> {
    let structural = if part == PartKind::Birth { eps } else { 1.0 };
    k_inverse(
        |sub: &Configuration| structural * eval_rate(spec, torus, terms, x, y, sub.points(), eps),
        xi,
    )
}

/// The limit of ε^{−|ξ|}·(K⁻¹ rate)(ξ) as ε→0.
pub fn vlasov_coefficient(
    spec: &GeneratorSpec,
    torus: &TorusBox,
    part: PartKind,
    terms: &[Term],
    x: Point,
    y: Option<Point>,
    xi: &Configuration,
) -> f64 {
    let ctx = Ctx { spec, torus, x, y };
    let pts = xi.points();
    let mut total = 0.0;
    for term in terms.iter().filter(|t| term_survives(spec, part, t)) {
        total += limit_term(&ctx, term, pts);
    }
    total
}

fn limit_term(ctx: &Ctx, term: &Term, pts: &[Point]) -> f64 {
    if term.slots.len() > pts.len() {
        return 0.0; // not enough probe points to feed every sum
    }
    let mut base = term.coeff * consts_value(&term.consts, None);
    for p in &term.points {
        match p {
            PointFactor::Kern { kernel, disp } => base *= ctx.disp_value(kernel, *disp, None),
            PointFactor::ExpKern { coeff, consts, kernel, disp } => {
                // Order ≥ 1 exponents tend to 1; order-0 exponents are plain
                // constant factors.
                if exp_point_order(ctx.spec, consts, kernel) == 0 {
                    let arg = coeff * consts_value(consts, None) * ctx.disp_value(kernel, *disp, None);
                    base *= arg.exp();
                }
            }
        }
    }
    if base == 0.0 {
        return 0.0;
    }

    // Only exponent sums of order exactly one absorb probe points in the
    // limit; collect them once.
    let absorbers: Vec<_> =
        term.exps.iter().filter(|e| entry_order(ctx.spec, e) == 1).collect();

    // Injective assignment of slots to probe points; remaining points go
    // through the absorbers.
    fn assign(
        ctx: &Ctx,
        term: &Term,
        pts: &[Point],
        absorbers: &[&super::canonical::ExpEntry],
        chosen: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> f64 {
        let i = chosen.len();
        if i == term.slots.len() {
            let mut rest = 1.0;
            for (j, &u) in pts.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let mut g = 0.0;
                for e in absorbers {
                    let anchor = ctx.anchor_pos(e.anchor, pts, chosen);
                    g += e.coeff
                        * consts_value(&e.consts, None)
                        * ctx.kernel_value(&e.kernel, anchor, u, None);
                }
                rest *= g;
                if rest == 0.0 {
                    return 0.0;
                }
            }
            return rest;
        }
        let slot = &term.slots[i];
        let anchor = ctx.anchor_pos(slot.anchor, pts, chosen);
        let mut acc = 0.0;
        for (j, &u) in pts.iter().enumerate() {
            if used[j] {
                continue;
            }
            let v = ctx.kernel_value(&slot.kernel, anchor, u, None);
            if v != 0.0 {
                chosen.push(j);
                used[j] = true;
                acc += v * assign(ctx, term, pts, absorbers, chosen, used);
                used[j] = false;
                chosen.pop();
            }
        }
        acc
    }

    let mut used = vec![false; pts.len()];
    base * assign(ctx, term, pts, &absorbers, &mut Vec::new(), &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::canonical::canonicalize;
    use crate::dsl::parser::parse_generator;
    use approx::assert_relative_eq;

    fn setup(src: &str, part: PartKind) -> (GeneratorSpec, Vec<Term>) {
        let spec = parse_generator(src).unwrap();
        let terms = canonicalize(&spec, part).unwrap();
        (spec, terms)
    }

    fn big_torus() -> TorusBox {
        TorusBox::new(2, 50.0).unwrap()
    }

    #[test]
    fn constant_birth_coefficient_is_exact_at_every_scale() {
        let (spec, terms) = setup(
            "const sigma = 0.7; birth = 1 scale inveps * sigma;",
            PartKind::Birth,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let empty = Configuration::empty();
        for eps in [1.0, 0.1, 0.003] {
            let b = k_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &empty, eps)
                .unwrap();
            assert_relative_eq!(b, 0.7, max_relative = 1e-14);
        }
        let v = vlasov_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &empty);
        assert_relative_eq!(v, 0.7, max_relative = 1e-14);

        let singleton = Configuration::new(vec![[1.0, 0.0]]).unwrap();
        let b1 = k_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &singleton, 0.1)
            .unwrap();
        assert_eq!(b1, 0.0, "a constant rate has no pair coefficient");
    }

    #[test]
    fn competition_kernel_coefficient_matches_limit_exactly() {
        let (spec, terms) = setup(
            "const m = 0.3; kernel aminus gaussian(0.6) scale eps;\n\
             death = m + sum[u in gamma\\x] aminus(x-u);",
            PartKind::Death,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let u = [0.5, -0.2];
        let xi = Configuration::new(vec![u]).unwrap();
        let eps = 0.05;
        let d1 =
            k_coefficient(&spec, &torus, PartKind::Death, &terms, x, None, &xi, eps).unwrap();
        let v1 = vlasov_coefficient(&spec, &torus, PartKind::Death, &terms, x, None, &xi);
        // The rate is linear in the configuration: renormalization is exact.
        assert_relative_eq!(d1 / eps, v1, max_relative = 1e-12);
        let a = &spec.kernels["aminus"];
        assert_relative_eq!(v1, a.eval(torus.min_image(x, u)), max_relative = 1e-12);
    }

    #[test]
    fn exponential_birth_converges_with_first_order_error() {
        let (spec, terms) = setup(
            "const z = 1.5; kernel phi gaussian(0.5) scale eps;\n\
             birth = 1 scale inveps * z * exp(-sum[u in gamma] phi(x-u));",
            PartKind::Birth,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let pts = vec![[0.4, 0.1], [-0.3, 0.5]];
        let xi = Configuration::new(pts.clone()).unwrap();
        let v = vlasov_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &xi);
        let phi = &spec.kernels["phi"];
        let expected: f64 = 1.5
            * pts
                .iter()
                .map(|&u| -phi.eval(torus.min_image(x, u)))
                .product::<f64>();
        assert_relative_eq!(v, expected, max_relative = 1e-12);

        let mut errors = Vec::new();
        for eps in [1e-1, 1e-2, 1e-3] {
            let b = k_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &xi, eps)
                .unwrap();
            errors.push((b / eps.powi(2) - v).abs());
        }
        for w in errors.windows(2) {
            let slope = (w[0] / w[1]).log10();
            assert!(slope > 0.8, "convergence slope too small: {slope} ({errors:?})");
        }
    }

    #[test]
    fn nested_birth_limit_matches_symmetrized_product() {
        let (spec, terms) = setup(
            "const lambda = 0.8; kernel aplus gaussian(0.4) scale eps;\n\
             kernel b gaussian(0.5) scale eps;\n\
             birth = 1 scale inveps * sum[p in gamma] aplus(x-p) * \
             (lambda + sum[u in gamma\\p] b(p-u));",
            PartKind::Birth,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let p = [0.6, 0.0];
        let u = [-0.2, 0.3];
        let xi2 = Configuration::new(vec![p, u]).unwrap();
        let v2 = vlasov_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &xi2);
        let ap = &spec.kernels["aplus"];
        let b = &spec.kernels["b"];
        let expected = ap.eval(torus.min_image(x, p)) * b.eval(torus.min_image(p, u))
            + ap.eval(torus.min_image(x, u)) * b.eval(torus.min_image(u, p));
        assert_relative_eq!(v2, expected, max_relative = 1e-12);

        let xi1 = Configuration::new(vec![p]).unwrap();
        let v1 = vlasov_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &xi1);
        assert_relative_eq!(v1, 0.8 * ap.eval(torus.min_image(x, p)), max_relative = 1e-12);
    }

    #[test]
    fn parent_anchored_exponent_absorbs_leftover_points() {
        let (spec, terms) = setup(
            "const lambda = 1.0; kernel a gaussian(0.4) scale eps;\n\
             kernel phi gaussian(0.5) scale eps;\n\
             birth = 1 scale inveps * lambda * sum[p in gamma] a(x-p) * \
             exp(-sum[u in gamma\\p] phi(p-u));",
            PartKind::Birth,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let p = [0.6, 0.0];
        let u = [-0.2, 0.3];
        let xi = Configuration::new(vec![p, u]).unwrap();
        let v = vlasov_coefficient(&spec, &torus, PartKind::Birth, &terms, x, None, &xi);
        let a = &spec.kernels["a"];
        let phi = &spec.kernels["phi"];
        let expected = a.eval(torus.min_image(x, p)) * -phi.eval(torus.min_image(p, u))
            + a.eval(torus.min_image(x, u)) * -phi.eval(torus.min_image(u, p));
        assert_relative_eq!(v, expected, max_relative = 1e-12);
    }

    #[test]
    fn hop_coefficient_handles_arrival_environment() {
        let (spec, terms) = setup(
            "kernel a gaussian(0.5); kernel phi gaussian(0.5) scale eps;\n\
             hop = a(x-y) * exp(-sum[u in gamma] phi(y-u));",
            PartKind::Hop,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let y = [0.7, 0.1];
        let u = [0.4, -0.3];
        let a = &spec.kernels["a"];
        let phi = &spec.kernels["phi"];

        let empty = Configuration::empty();
        let v0 =
            vlasov_coefficient(&spec, &torus, PartKind::Hop, &terms, x, Some(y), &empty);
        assert_relative_eq!(v0, a.eval(torus.min_image(x, y)), max_relative = 1e-12);

        let xi = Configuration::new(vec![u]).unwrap();
        let v1 = vlasov_coefficient(&spec, &torus, PartKind::Hop, &terms, x, Some(y), &xi);
        let expected =
            a.eval(torus.min_image(x, y)) * -phi.eval(torus.min_image(y, u));
        assert_relative_eq!(v1, expected, max_relative = 1e-12);

        // Finite-ε evaluation of the rate itself: the jumper's own exponent
        // factor e^{-εφ(y-x)} must be present.
        let rate = eval_rate(&spec, &torus, &terms, x, Some(y), &[u], 0.25);
        let direct = a.eval(torus.min_image(x, y))
            * (-0.25 * phi.eval(torus.min_image(y, x))).exp()
            * (-0.25 * phi.eval(torus.min_image(y, u))).exp();
        assert_relative_eq!(rate, direct, max_relative = 1e-12);
    }

    #[test]
    fn diagonal_term_present_at_finite_scale_absent_in_limit() {
        let (spec, terms) = setup(
            "kernel b gaussian(0.5) scale eps; death = sum[u in gamma] b(x-u);",
            PartKind::Death,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let eps = 0.2;
        let b = &spec.kernels["b"];

        // Rate over an empty environment is the diagonal alone.
        let r = eval_rate(&spec, &torus, &terms, x, None, &[], eps);
        assert_relative_eq!(r, eps * b.eval([0.0, 0.0]), max_relative = 1e-12);

        // The empty-set coefficient carries the diagonal at finite ε…
        let empty = Configuration::empty();
        let d0 =
            k_coefficient(&spec, &torus, PartKind::Death, &terms, x, None, &empty, eps).unwrap();
        assert_relative_eq!(d0, eps * b.eval([0.0, 0.0]), max_relative = 1e-12);
        // …but not in the limit.
        let v0 = vlasov_coefficient(&spec, &torus, PartKind::Death, &terms, x, None, &empty);
        assert_eq!(v0, 0.0);
    }

    #[test]
    fn rate_with_explicit_exclusion_skips_chosen_point() {
        let (spec, terms) = setup(
            "kernel a gaussian(0.4) scale eps; kernel b gaussian(0.5) scale eps;\n\
             birth = 1 scale inveps * sum[p in gamma] a(x-p) * sum[u in gamma\\p] b(p-u);",
            PartKind::Birth,
        );
        let torus = big_torus();
        let x = [0.0, 0.0];
        let p = [0.5, 0.0];
        let q = [-0.5, 0.0];
        let eps = 0.3;
        let a = &spec.kernels["a"];
        let b = &spec.kernels["b"];
        let av = |r: Point, s: Point| eps * a.eval(torus.min_image(r, s));
        let bv = |r: Point, s: Point| eps * b.eval(torus.min_image(r, s));
        let rate = eval_rate(&spec, &torus, &terms, x, None, &[p, q], eps);
        let inveps = 1.0 / eps;
        let direct = inveps * (av(x, p) * bv(p, q) + av(x, q) * bv(q, p));
        assert_relative_eq!(rate, direct, max_relative = 1e-12);
    }
}
