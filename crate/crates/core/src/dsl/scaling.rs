//! ε-order bookkeeping for canonical terms.
//!
//! Each symbol in a rate carries a scaling tag (`fixed`, `eps`, `inveps`)
//! that says how it is rescaled along the mean-field family. For a term in
//! canonical form the *order* — the net power of ε carried by the
//! renormalized combinatorial coefficient ε^{−|ξ|}(K⁻¹ rate)(ξ) — is
//!
//! ```text
//! order = structural + Σ const orders + Σ point-factor orders
//!         + Σ over slots (kernel order − 1)
//! ```
//!
//! The `−1` per slot reflects the ε^{−|ξ|} renormalization: every
//! configuration sum consumes one inverse power of ε. The structural
//! contribution is `+1` for birth rates: a birth rate is written as the
//! full event intensity, which in the mean-field family runs at 1/ε times
//! the density-limited coefficient, so the renormalized coefficient is
//! K⁻¹[ε · rate].
//!
//! Admissibility per part:
//! * every term must have order ≥ 0 (a negative order diverges as ε→0);
//! * at least one term must have order exactly 0 (otherwise the whole part
//!   vanishes from the limiting equation — almost always a forgotten
//!   `scale` tag);
//! * every exponent sum must have order ≥ 1 (an unscaled exponent makes the
//!   renormalized coefficient blow up combinatorially);
//! * exponential point factors must have order ≥ 0 (order 0 is a plain
//!   constant; order ≥ 1 tends to 1).
//!
//! Terms of positive order are kept — they contribute at finite ε and are
//! exactly what the convergence diagnostics measure — but drop out of the
//! derived equation.

use crate::error::{Error, Result};
use crate::kernel::Scaling;

use super::ast::{GeneratorSpec, PartKind};
use super::canonical::{ConstRef, ExpEntry, PointFactor, Term};

fn kernel_order(spec: &GeneratorSpec, name: &str) -> i32 {
    spec.kernels[name].scaling.order()
}

fn consts_order(consts: &[ConstRef]) -> i32 {
    consts.iter().map(|c| c.scaling.order()).sum()
}

/// Order of an exponent sum entry: the power of ε its summand carries.
pub fn entry_order(spec: &GeneratorSpec, entry: &ExpEntry) -> i32 {
    consts_order(&entry.consts) + kernel_order(spec, &entry.kernel)
}

/// Order of the exponent of an exponential point factor.
pub fn exp_point_order(spec: &GeneratorSpec, consts: &[ConstRef], kernel: &str) -> i32 {
    consts_order(consts) + kernel_order(spec, kernel)
}

/// Net ε-order of a canonical term within the given part.
pub fn term_order(spec: &GeneratorSpec, part: PartKind, term: &Term) -> i32 {
    let structural = if part == PartKind::Birth { 1 } else { 0 };
    let consts = consts_order(&term.consts);
    let points: i32 = term
        .points
        .iter()
        .map(|p| match p {
            PointFactor::Kern { kernel, .. } => kernel_order(spec, kernel),
            // An exponential factor is e^{O(ε^k)} with k ≥ 0: order-0 as a
            // multiplier either way.
            PointFactor::ExpKern { .. } => 0,
        })
        .sum();
    let slots: i32 = term.slots.iter().map(|s| kernel_order(spec, &s.kernel) - 1).sum();
    structural + consts + points + slots
}

/// Whether the term contributes to the limiting (mean-field) coefficient.
pub fn term_survives(spec: &GeneratorSpec, part: PartKind, term: &Term) -> bool {
    term_order(spec, part, term) == 0
}

fn validate_term(spec: &GeneratorSpec, part: PartKind, term: &Term) -> Result<i32> {
    let order = term_order(spec, part, term);
    if order < 0 {
        return Err(Error::Unbalanced(format!(
            "term `{}` in the {} rate has ε-order {}; it diverges as ε→0 \
             (check the `scale` tags)",
            term.describe(),
            part.name(),
            order
        )));
    }
    for e in &term.exps {
        let eo = entry_order(spec, e);
        if eo < 1 {
            return Err(Error::Unbalanced(format!(
                "exponent sum over kernel `{}` in the {} rate has ε-order {}; exponent \
                 sums must be scaled to vanish pointwise (order ≥ 1)",
                e.kernel,
                part.name(),
                eo
            )));
        }
    }
    for p in &term.points {
        if let PointFactor::ExpKern { consts, kernel, .. } = p {
            let eo = exp_point_order(spec, consts, kernel);
            if eo < 0 {
                return Err(Error::Unbalanced(format!(
                    "exponential factor of kernel `{}` in the {} rate has ε-order {}; \
                     it diverges as ε→0",
                    kernel,
                    part.name(),
                    eo
                )));
            }
        }
    }
    Ok(order)
}

/// Scaling diagnosis of one term.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TermScaling {
    pub describe: String,
    pub order: i32,
    pub survives: bool,
}

/// Scaling diagnosis of one generator part.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PartScaling {
    pub part: String,
    pub terms: Vec<TermScaling>,
}

/// Full scaling report: the per-symbol rules and the per-term orders.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScalingReport {
    pub rules: Vec<String>,
    pub parts: Vec<PartScaling>,
}

fn scaling_label(s: Scaling) -> &'static str {
    match s {
        Scaling::Fixed => "fixed",
        Scaling::Eps => "eps",
        Scaling::InvEps => "1/eps",
    }
}

/// Validate the scaling of every canonicalized part and build the report.
///
/// `parts` pairs each declared part with its canonical terms.
pub fn analyze(spec: &GeneratorSpec, parts: &[(PartKind, Vec<Term>)]) -> Result<ScalingReport> {
    let mut rules = Vec::new();
    for (name, k) in &spec.kernels {
        rules.push(format!("kernel {name}: {}", scaling_label(k.scaling)));
    }
    for (name, c) in &spec.consts {
        rules.push(format!("const {name} = {}: {}", c.value, scaling_label(c.scaling)));
    }

    let mut out_parts = Vec::new();
    for (part, terms) in parts {
        let mut term_reports = Vec::new();
        let mut any_survives = false;
        for t in terms {
            let order = validate_term(spec, *part, t)?;
            any_survives |= order == 0;
            term_reports.push(TermScaling {
                describe: t.describe(),
                order,
                survives: order == 0,
            });
        }
        if !any_survives {
            return Err(Error::Unbalanced(format!(
                "every term of the {} rate has positive ε-order, so the part vanishes \
                 from the limiting equation; rescale a symbol (a missing `scale` tag on a \
                 kernel is the usual cause)",
                part.name()
            )));
        }
        out_parts.push(PartScaling {
            part: part.name().to_string(),
            terms: term_reports,
        });
    }
    Ok(ScalingReport { rules, parts: out_parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::canonical::canonicalize;
    use crate::dsl::parser::parse_generator;

    fn parts_of(src: &str) -> (GeneratorSpec, Vec<(PartKind, Vec<Term>)>) {
        let spec = parse_generator(src).unwrap();
        let parts: Vec<_> = spec
            .parts
            .iter()
            .map(|(k, _)| (*k, canonicalize(&spec, *k).unwrap()))
            .collect();
        (spec, parts)
    }

    #[test]
    fn balanced_birth_death_pair_passes() {
        let (spec, parts) = parts_of(
            "const m = 0.3; const lambda = 1.0; kernel aplus gaussian(0.4) scale eps;\n\
             kernel aminus gaussian(0.6) scale eps;\n\
             death = m + sum[u in gamma\\x] aminus(x-u);\n\
             birth = 1 scale inveps * lambda * sum[p in gamma] aplus(x-p);",
        );
        let report = analyze(&spec, &parts).expect("scaling should balance");
        assert_eq!(report.parts.len(), 2);
        for p in &report.parts {
            assert!(p.terms.iter().all(|t| t.order >= 0), "no negative orders");
            assert!(p.terms.iter().any(|t| t.survives), "each part must survive");
        }
    }

    #[test]
    fn missing_kernel_scale_diverges() {
        // Competition kernel left unscaled: the pair term carries order −1.
        let (spec, parts) = parts_of(
            "const m = 0.3; kernel aminus gaussian(0.6);\n\
             death = m + sum[u in gamma\\x] aminus(x-u);",
        );
        let err = analyze(&spec, &parts).unwrap_err();
        assert!(matches!(err, Error::Unbalanced(_)), "expected Unbalanced, got {err:?}");
    }

    #[test]
    fn birth_without_structural_factor_vanishes() {
        // Forgetting the 1/ε intensity factor leaves every birth term at
        // order +1: the part would disappear from the limit.
        let (spec, parts) = parts_of(
            "const lambda = 1.0; kernel aplus gaussian(0.4) scale eps;\n\
             birth = lambda * sum[p in gamma] aplus(x-p);",
        );
        let err = analyze(&spec, &parts).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("vanishes"), "message should explain the vanishing: {msg}");
    }

    #[test]
    fn unscaled_exponent_sum_is_rejected() {
        let (spec, parts) = parts_of(
            "kernel phi gaussian(0.5);\n\
             death = exp(-sum[u in gamma\\x] phi(x-u));",
        );
        let err = analyze(&spec, &parts).unwrap_err();
        assert!(matches!(err, Error::Unbalanced(_)));
    }

    #[test]
    fn vanishing_diagonal_term_is_tolerated() {
        // Arrival sums over the full configuration create a diagonal term of
        // order +1; it must be kept but flagged as non-surviving.
        let (spec, parts) = parts_of(
            "kernel a gaussian(0.5); kernel b gaussian(0.5) scale eps;\n\
             hop = a(x-y) * sum[u in gamma] b(y-u);",
        );
        let report = analyze(&spec, &parts).unwrap();
        let hop = &report.parts[0];
        let orders: Vec<i32> = hop.terms.iter().map(|t| t.order).collect();
        assert!(orders.contains(&0) && orders.contains(&1), "orders were {orders:?}");
    }

    #[test]
    fn hop_with_scaled_proposal_kernel_vanishes() {
        // The proposal kernel must stay fixed: an eps-scaled proposal makes
        // the sole hop term order +1, so the whole part drops out.
        let (spec, parts) = parts_of(
            "kernel a gaussian(0.5) scale eps;\n\
             hop = a(x-y);",
        );
        let err = analyze(&spec, &parts).unwrap_err();
        assert!(matches!(err, Error::Unbalanced(_)));
    }

    #[test]
    fn report_lists_rules_for_all_symbols() {
        let (spec, parts) = parts_of(
            "const z = 1.0; kernel phi gaussian(0.5) scale eps;\n\
             death = 1;\n\
             birth = 1 scale inveps * z * exp(-sum[u in gamma] phi(x-u));",
        );
        let report = analyze(&spec, &parts).unwrap();
        assert!(report.rules.iter().any(|r| r == "kernel phi: eps"));
        assert!(report.rules.iter().any(|r| r.starts_with("const z = 1")));
    }
}
