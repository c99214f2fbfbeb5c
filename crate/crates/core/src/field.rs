//! Symbolic right-hand sides of kinetic equations.
//!
//! [`FieldExpr`] is a small closed algebra over density fields: the unknown
//! `rho`, convolution against a named kernel, pointwise products, pointwise
//! `exp`, sums, negation, and scalars (numbers, named parameters, kernel
//! masses). The derivation emits these, the canonical printer renders them
//! as stable one-line ASCII, and the spectral solver compiles them to grid
//! programs.
//!
//! Canonical order is the *constructor's* responsibility: the printer
//! renders factors in stored order. Derivation emits, per term, scalars
//! first (numbers, then parameters alphabetically, then masses
//! alphabetically), then `rho`, then `conv` factors sorted by their printed
//! form, then `exp` factors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;

/// A pointwise field expression (or scalar, when no field node occurs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FieldExpr {
    /// Literal number.
    Num { value: f64 },
    /// Named scalar parameter; value supplied by [`KineticModel::params`].
    Param { name: String },
    /// Total mass `∫k` of a named kernel.
    Mass { kernel: String },
    /// The unknown density field.
    Rho,
    /// Convolution `(k ∗ arg)(x)`.
    Conv { kernel: String, arg: Box<FieldExpr> },
    /// Pointwise product.
    Prod { factors: Vec<FieldExpr> },
    /// Pointwise exponential.
    Exp { arg: Box<FieldExpr> },
    /// Negation.
    Neg { arg: Box<FieldExpr> },
    /// Sum of terms.
    Sum { terms: Vec<FieldExpr> },
}

impl FieldExpr {
    pub fn num(v: f64) -> Self {
        FieldExpr::Num { value: v }
    }

    pub fn param(name: &str) -> Self {
        FieldExpr::Param { name: name.to_string() }
    }

    pub fn mass(kernel: &str) -> Self {
        FieldExpr::Mass { kernel: kernel.to_string() }
    }

    pub fn conv(kernel: &str, arg: FieldExpr) -> Self {
        FieldExpr::Conv { kernel: kernel.to_string(), arg: Box::new(arg) }
    }

    pub fn prod(factors: Vec<FieldExpr>) -> Self {
        match factors.len() {
            0 => FieldExpr::num(1.0),
            1 => factors.into_iter().next().unwrap(),
            _ => FieldExpr::Prod { factors },
        }
    }

    pub fn exp(arg: FieldExpr) -> Self {
        FieldExpr::Exp { arg: Box::new(arg) }
    }

    #[allow(clippy::should_implement_trait)] // builder for the AST node, not arithmetic on values
    pub fn neg(arg: FieldExpr) -> Self {
        FieldExpr::Neg { arg: Box::new(arg) }
    }

    pub fn sum(terms: Vec<FieldExpr>) -> Self {
        match terms.len() {
            0 => FieldExpr::num(0.0),
            1 => terms.into_iter().next().unwrap(),
            _ => FieldExpr::Sum { terms },
        }
    }

    /// Render as stable one-line ASCII: terms joined by ` + ` / ` - `,
    /// factors by `*`, with `conv(k,…)`, `exp(…)`, `mass(k)` and `rho`
    /// spelled out. Unit numeric factors are dropped from products.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        let terms = signed_terms(self);
        for (i, (neg, expr)) in terms.iter().enumerate() {
            if i == 0 {
                if *neg {
                    out.push('-');
                }
            } else {
                out.push_str(if *neg { " - " } else { " + " });
            }
            out.push_str(&print_term(expr));
        }
        if terms.is_empty() {
            out.push('0');
        }
        out
    }
}

/// Flatten sums and negations into a list of (is_negative, term) pairs.
fn signed_terms(expr: &FieldExpr) -> Vec<(bool, &FieldExpr)> {
    fn walk<'a>(e: &'a FieldExpr, neg: bool, out: &mut Vec<(bool, &'a FieldExpr)>) {
        match e {
            FieldExpr::Sum { terms } => {
                for t in terms {
                    walk(t, neg, out);
                }
            }
            FieldExpr::Neg { arg } => walk(arg, !neg, out),
            other => out.push((neg, other)),
        }
    }
    let mut out = Vec::new();
    walk(expr, false, &mut out);
    out
}

fn print_term(expr: &FieldExpr) -> String {
    let factors = match expr {
        FieldExpr::Prod { factors } => factors.iter().collect::<Vec<_>>(),
        other => vec![other],
    };
    let mut parts: Vec<String> = Vec::new();
    for f in factors {
        if let FieldExpr::Num { value } = f {
            if *value == 1.0 {
                continue;
            }
        }
        parts.push(print_factor(f));
    }
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

fn print_factor(expr: &FieldExpr) -> String {
    match expr {
        FieldExpr::Num { value } => format_num(*value),
        FieldExpr::Param { name } => name.clone(),
        FieldExpr::Mass { kernel } => format!("mass({kernel})"),
        FieldExpr::Rho => "rho".to_string(),
        FieldExpr::Conv { kernel, arg } => {
            format!("conv({kernel},{})", arg.canonical_string())
        }
        FieldExpr::Exp { arg } => format!("exp({})", arg.canonical_string()),
        FieldExpr::Prod { .. } => format!("({})", print_term(expr)),
        FieldExpr::Neg { .. } | FieldExpr::Sum { .. } => {
            format!("({})", expr.canonical_string())
        }
    }
}

fn format_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// A derived kinetic model: right-hand side `∂ρ/∂t = equation(ρ)` together
/// with the parameter values and kernel definitions it refers to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KineticModel {
    pub equation: FieldExpr,
    pub params: BTreeMap<String, f64>,
    pub kernels: BTreeMap<String, Kernel>,
}

impl KineticModel {
    pub fn canonical_string(&self) -> String {
        self.equation.canonical_string()
    }
}
