//! Compilation of the surviving canonical terms into the limiting kinetic
//! equation.
//!
//! In the mean-field limit the hierarchy of renormalized correlation
//! functions closes on the density ρ, and each surviving term contributes a
//! product of local fields:
//!
//! * a slot anchored at position p becomes a convolution `(k ∗ W)(p)`,
//!   where `W` is ρ times the fields of the slots and exponent sums
//!   anchored *at* that slot (slot forests become nested convolutions);
//! * an exponent sum of ε-order one anchored at p becomes a factor
//!   `exp(c·(k ∗ ρ)(p))` — the sum over all ways finitely many probe
//!   points land in the exponent resums into an exponential;
//! * death terms are multiplied by −ρ(x) (the particle lost), birth terms
//!   enter as written;
//! * a hop term with proposal kernel `a` splits into a gain at x,
//!   `arr(x)·(a ∗ ρ·dep)(x)`, and a loss, `−ρ(x)·dep(x)·(a ∗ arr)(x)`
//!   (which collapses to `−mass(a)·ρ·dep` when the arrival side is bare),
//!   where `dep`/`arr` collect the fields anchored at the departure and
//!   arrival points.
//!
//! The emitted [`FieldExpr`] is in a canonical shape — scalars, parameters
//! (alphabetical), masses, ρ, convolutions, exponentials, in that order,
//! parts in declaration order — so that structurally equal models print to
//! byte-equal strings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{FieldExpr, KineticModel};

use super::ast::{GeneratorSpec, PartKind};
use super::canonical::{Anchor, ConstRef, ExpEntry, PointFactor, PtDisp, Term};
use super::scaling::{entry_order, exp_point_order, term_survives};

/// Factor bundle in canonical order, assembled into one product expression.
#[derive(Default)]
struct Factors {
    scalar: f64,
    params: Vec<String>,
    masses: Vec<String>,
    rho: bool,
    convs: Vec<FieldExpr>,
    exps: Vec<FieldExpr>,
}

impl Factors {
    fn new(scalar: f64) -> Self {
        Factors { scalar, ..Default::default() }
    }

    fn absorb_consts(&mut self, consts: &[ConstRef]) {
        for c in consts {
            match &c.name {
                Some(n) => self.params.push(n.clone()),
                None => self.scalar *= c.value,
            }
        }
    }

    /// Assemble into a single expression; `None` when the scalar vanished.
    fn assemble(mut self) -> Option<FieldExpr> {
        if self.scalar == 0.0 {
            return None;
        }
        let negative = self.scalar < 0.0;
        let magnitude = self.scalar.abs();
        let mut factors = Vec::new();
        if magnitude != 1.0 {
            factors.push(FieldExpr::num(magnitude));
        }
        self.params.sort();
        factors.extend(self.params.iter().map(|p| FieldExpr::param(p)));
        self.masses.sort();
        factors.extend(self.masses.iter().map(|m| FieldExpr::mass(m)));
        if self.rho {
            factors.push(FieldExpr::Rho);
        }
        sort_by_string(&mut self.convs);
        factors.extend(self.convs);
        sort_by_string(&mut self.exps);
        factors.extend(self.exps);
        let inner = if factors.is_empty() { FieldExpr::num(1.0) } else { FieldExpr::prod(factors) };
        Some(if negative { FieldExpr::neg(inner) } else { inner })
    }
}

fn sort_by_string(exprs: &mut [FieldExpr]) {
    exprs.sort_by_key(|e| e.canonical_string());
}

/// The fields a term anchors on one side (departure x or arrival y).
#[derive(Default)]
struct Side {
    convs: Vec<FieldExpr>,
    exps: Vec<FieldExpr>,
}

struct Compiler<'a> {
    spec: &'a GeneratorSpec,
}

impl Compiler<'_> {
    fn kernel_zero(&self, name: &str) -> f64 {
        self.spec.kernels[name].eval([0.0, 0.0])
    }

    fn exp_entry_factor(&self, e: &ExpEntry) -> FieldExpr {
        let mut f = Factors::new(e.coeff);
        f.absorb_consts(&e.consts);
        f.convs.push(FieldExpr::conv(&e.kernel, FieldExpr::Rho));
        let arg = f.assemble().expect("exponent coefficients are nonzero");
        FieldExpr::exp(arg)
    }

    /// The convolution field of a slot, recursing through the slots and
    /// exponent entries anchored at it.
    fn slot_field(&self, term: &Term, idx: usize, absorbing: &[bool]) -> FieldExpr {
        let mut w = Factors::new(1.0);
        w.rho = true;
        for (j, s) in term.slots.iter().enumerate() {
            if s.anchor == Anchor::Slot(idx) {
                w.convs.push(self.slot_field(term, j, absorbing));
            }
        }
        for (j, e) in term.exps.iter().enumerate() {
            if absorbing[j] && e.anchor == Anchor::Slot(idx) {
                w.exps.push(self.exp_entry_factor(e));
            }
        }
        let arg = w.assemble().expect("slot fields have unit scalar");
        FieldExpr::conv(&term.slots[idx].kernel, arg)
    }

    /// Split a surviving term into scalar/parameter head and per-side fields.
    fn term_sides(&self, part: PartKind, term: &Term) -> Result<(Factors, Side, Side, Option<String>)> {
        let mut head = Factors::new(term.coeff);
        head.absorb_consts(&term.consts);

        let mut proposal: Option<String> = None;
        for p in &term.points {
            match p {
                PointFactor::Kern { kernel, disp: PtDisp::Zero } => {
                    head.scalar *= self.kernel_zero(kernel);
                }
                PointFactor::Kern { kernel, disp: PtDisp::XY } => {
                    if proposal.is_some() {
                        return Err(Error::Unsupported(format!(
                            "the surviving {} term `{}` carries more than one kernel of the \
                             jump displacement; the limit is not a single convolution",
                            part.name(),
                            term.describe()
                        )));
                    }
                    proposal = Some(kernel.clone());
                }
                PointFactor::ExpKern { coeff, consts, kernel, disp } => {
                    match (exp_point_order(self.spec, consts, kernel), disp) {
                        (0, PtDisp::Zero) => {
                            let anon: f64 = consts
                                .iter()
                                .filter(|c| c.name.is_none())
                                .map(|c| c.value)
                                .product();
                            if consts.iter().any(|c| c.name.is_some()) {
                                return Err(Error::Unsupported(
                                    "an unscaled exponential diagonal with named constants \
                                     has no closed scalar value"
                                        .into(),
                                ));
                            }
                            head.scalar *= (coeff * anon * self.kernel_zero(kernel)).exp();
                        }
                        (0, PtDisp::XY) => {
                            return Err(Error::Unsupported(
                                "an unscaled exponential factor of the jump displacement \
                                 does not reduce to a convolution kernel"
                                    .into(),
                            ));
                        }
                        // Positive-order exponents tend to one.
                        _ => {}
                    }
                }
            }
        }

        let absorbing: Vec<bool> =
            term.exps.iter().map(|e| entry_order(self.spec, e) == 1).collect();
        let mut dep = Side::default();
        let mut arr = Side::default();
        for (i, s) in term.slots.iter().enumerate() {
            match s.anchor {
                Anchor::X => dep.convs.push(self.slot_field(term, i, &absorbing)),
                Anchor::Y => arr.convs.push(self.slot_field(term, i, &absorbing)),
                Anchor::Slot(_) => {} // handled by the parent's recursion
            }
        }
        for (j, e) in term.exps.iter().enumerate() {
            if !absorbing[j] {
                continue; // order ≥ 2 entries tend to one
            }
            match e.anchor {
                Anchor::X => dep.exps.push(self.exp_entry_factor(e)),
                Anchor::Y => arr.exps.push(self.exp_entry_factor(e)),
                Anchor::Slot(_) => {}
            }
        }
        Ok((head, dep, arr, proposal))
    }

    fn compile_term(&self, part: PartKind, term: &Term, out: &mut Vec<FieldExpr>) -> Result<()> {
        let (mut head, dep, arr, proposal) = self.term_sides(part, term)?;
        match part {
            PartKind::Death | PartKind::Birth => {
                if proposal.is_some() {
                    return Err(Error::Unsupported(
                        "jump displacements cannot appear outside a hop rate".into(),
                    ));
                }
                debug_assert!(arr.convs.is_empty() && arr.exps.is_empty());
                if part == PartKind::Death {
                    head.scalar = -head.scalar;
                    head.rho = true;
                }
                head.convs = dep.convs;
                head.exps = dep.exps;
                if let Some(expr) = head.assemble() {
                    out.push(expr);
                }
            }
            PartKind::Hop => {
                let a = proposal.ok_or_else(|| {
                    Error::Unsupported(format!(
                        "the surviving hop term `{}` has no unscaled kernel of the jump \
                         displacement; the total jump intensity is not local",
                        term.describe()
                    ))
                })?;

                // Gain at x: arrival fields at x, origin fields inside the
                // convolution with ρ.
                let mut gain = Factors { scalar: head.scalar, ..Default::default() };
                gain.params = head.params.clone();
                let mut origin = Factors::new(1.0);
                origin.rho = true;
                origin.convs = dep.convs.clone();
                origin.exps = dep.exps.clone();
                let origin_expr = origin.assemble().expect("unit scalar");
                gain.convs = arr.convs.clone();
                gain.convs.push(FieldExpr::conv(&a, origin_expr));
                gain.exps = arr.exps.clone();
                if let Some(expr) = gain.assemble() {
                    out.push(expr);
                }

                // Loss at x: −ρ·dep(x)·(a ∗ arr)(x), with a bare arrival side
                // collapsing to the kernel mass.
                let mut loss = Factors { scalar: -head.scalar, ..Default::default() };
                loss.params = head.params;
                loss.rho = true;
                loss.convs = dep.convs;
                loss.exps = dep.exps;
                if arr.convs.is_empty() && arr.exps.is_empty() {
                    loss.masses.push(a);
                } else {
                    let mut arr_f = Factors::new(1.0);
                    arr_f.convs = arr.convs;
                    arr_f.exps = arr.exps;
                    let arr_expr = arr_f.assemble().expect("unit scalar");
                    loss.convs.push(FieldExpr::conv(&a, arr_expr));
                }
                if let Some(expr) = loss.assemble() {
                    out.push(expr);
                }
            }
        }
        Ok(())
    }
}

/// Compile the limiting kinetic equation of a canonicalized generator.
pub fn derive_equation(
    spec: &GeneratorSpec,
    parts: &[(PartKind, Vec<Term>)],
) -> Result<FieldExpr> {
    let compiler = Compiler { spec };
    let mut terms = Vec::new();
    for (part, part_terms) in parts {
        for t in part_terms {
            if term_survives(spec, *part, t) {
                compiler.compile_term(*part, t, &mut terms)?;
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::Unbalanced(
            "no term survives the limit; the kinetic equation is empty".into(),
        ));
    }
    Ok(FieldExpr::sum(terms))
}

/// Compile the full kinetic model: equation plus the parameter and kernel
/// tables needed to evaluate it.
pub fn derive_model(
    spec: &GeneratorSpec,
    parts: &[(PartKind, Vec<Term>)],
) -> Result<KineticModel> {
    let equation = derive_equation(spec, parts)?;
    let params: BTreeMap<String, f64> =
        spec.consts.iter().map(|(n, c)| (n.clone(), c.value)).collect();
    Ok(KineticModel { equation, params, kernels: spec.kernels.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::canonical::canonicalize;
    use crate::dsl::parser::parse_generator;

    fn equation(src: &str) -> String {
        let spec = parse_generator(src).unwrap();
        let parts: Vec<_> = spec
            .parts
            .iter()
            .map(|(k, _)| (*k, canonicalize(&spec, *k).unwrap()))
            .collect();
        derive_equation(&spec, &parts).unwrap().canonical_string()
    }

    #[test]
    fn pure_birth_death_compiles_to_linear_equation() {
        let eq = equation(
            "const m = 0.3; const sigma = 0.7;\n\
             death = m;\n\
             birth = 1 scale inveps * sigma;",
        );
        assert_eq!(eq, "-m*rho + sigma");
    }

    #[test]
    fn competition_model_compiles_to_logistic_equation() {
        let eq = equation(
            "const m = 0.3; const lambda = 1.0;\n\
             kernel aplus gaussian(0.4) scale eps;\n\
             kernel aminus gaussian(0.6) scale eps;\n\
             death = m + sum[u in gamma\\x] aminus(x-u);\n\
             birth = 1 scale inveps * lambda * sum[p in gamma] aplus(x-p);",
        );
        assert_eq!(eq, "-m*rho - rho*conv(aminus,rho) + lambda*conv(aplus,rho)");
    }

    #[test]
    fn nested_fertility_sum_becomes_nested_convolution() {
        let eq = equation(
            "const m = 0.3; const lambda = 0.2;\n\
             kernel aplus gaussian(0.4) scale eps;\n\
             kernel b gaussian(0.5) scale eps;\n\
             death = m;\n\
             birth = 1 scale inveps * sum[p in gamma] aplus(x-p) * \
             (lambda + sum[u in gamma\\p] b(p-u));",
        );
        assert_eq!(eq, "-m*rho + lambda*conv(aplus,rho) + conv(aplus,rho*conv(b,rho))");
    }

    #[test]
    fn exponential_birth_resums_to_exponential_of_convolution() {
        let eq = equation(
            "const z = 1.0; kernel phi gaussian(0.5) scale eps;\n\
             death = 1;\n\
             birth = 1 scale inveps * z * exp(-sum[u in gamma] phi(x-u));",
        );
        assert_eq!(eq, "-rho + z*exp(-conv(phi,rho))");
    }

    #[test]
    fn parent_anchored_exponent_stays_inside_convolution() {
        let eq = equation(
            "const m = 0.1; kernel a gaussian(0.4) scale eps;\n\
             kernel phi gaussian(0.5) scale eps;\n\
             death = m;\n\
             birth = 1 scale inveps * sum[p in gamma] a(x-p) * \
             exp(-sum[u in gamma\\p] phi(p-u));",
        );
        assert_eq!(eq, "-m*rho + conv(a,rho*exp(-conv(phi,rho)))");
    }

    #[test]
    fn newborn_anchored_exponent_multiplies_outside() {
        let eq = equation(
            "const m = 0.1; const lambda = 1.0; kernel aplus gaussian(0.4) scale eps;\n\
             kernel phi gaussian(0.5) scale eps;\n\
             death = m;\n\
             birth = 1 scale inveps * lambda * sum[p in gamma] aplus(x-p) * \
             exp(-sum[u in gamma] phi(x-u));",
        );
        assert_eq!(eq, "-m*rho + lambda*conv(aplus,rho)*exp(-conv(phi,rho))");
    }

    #[test]
    fn free_hop_compiles_to_mobility_difference() {
        let eq = equation("kernel a gaussian(0.5); hop = a(x-y);");
        assert_eq!(eq, "conv(a,rho) - mass(a)*rho");
    }

    #[test]
    fn arrival_interaction_enters_both_gain_and_loss() {
        let eq = equation(
            "kernel a gaussian(0.5); kernel phi gaussian(0.5) scale eps;\n\
             hop = a(x-y) * exp(-sum[u in gamma] phi(y-u));",
        );
        assert_eq!(
            eq,
            "conv(a,rho)*exp(-conv(phi,rho)) - rho*conv(a,exp(-conv(phi,rho)))"
        );
    }

    #[test]
    fn arrival_density_sum_compiles_to_convolution_pair() {
        let eq = equation(
            "kernel a gaussian(0.5); kernel b gaussian(0.5) scale eps;\n\
             hop = a(x-y) * sum[u in gamma] b(y-u);",
        );
        assert_eq!(eq, "conv(a,rho)*conv(b,rho) - rho*conv(a,conv(b,rho))");
    }

    #[test]
    fn departure_interaction_stays_outside_the_convolution() {
        let eq = equation(
            "kernel a gaussian(0.5); kernel phi gaussian(0.5) scale eps;\n\
             hop = a(x-y) * exp(-sum[u in gamma\\x] phi(x-u));",
        );
        assert_eq!(
            eq,
            "conv(a,rho*exp(-conv(phi,rho))) - mass(a)*rho*exp(-conv(phi,rho))"
        );
    }

    #[test]
    fn hop_without_proposal_kernel_is_rejected() {
        let spec = parse_generator(
            "kernel b gaussian(0.5) scale eps; hop = sum[u in gamma] b(y-u);",
        )
        .unwrap();
        let parts = vec![(PartKind::Hop, canonicalize(&spec, PartKind::Hop).unwrap())];
        let err = derive_equation(&spec, &parts).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)), "got {err:?}");
    }

    #[test]
    fn model_table_carries_all_symbols() {
        let spec = parse_generator(
            "const m = 0.3; const lambda = 1.0;\n\
             kernel aplus gaussian(0.4) scale eps;\n\
             death = m;\n\
             birth = 1 scale inveps * lambda * sum[p in gamma] aplus(x-p);",
        )
        .unwrap();
        let parts: Vec<_> = spec
            .parts
            .iter()
            .map(|(k, _)| (*k, canonicalize(&spec, *k).unwrap()))
            .collect();
        let model = derive_model(&spec, &parts).unwrap();
        assert_eq!(model.params.len(), 2);
        assert!(model.kernels.contains_key("aplus"));
        assert_eq!(model.params["m"], 0.3);
    }
}
