//! Abstract syntax for generator descriptions.
//!
//! A generator description declares named kernels and constants (each with
//! an optional scaling tag) and then gives rate expressions for up to three
//! parts: `death`, `birth` and `hop`. Rate expressions are built from
//! numbers, declared constants, kernel evaluations `k(u-v)`, exponentials,
//! and sums over the ambient configuration (`sum[v in gamma] …`).
//!
//! Variable conventions inside rate expressions:
//! * `x` is the active particle — the one dying, being born, or departing.
//! * `y` is the arrival location and exists only in the `hop` part.
//! * `sum` binds fresh variables ranging over configuration points.
//!
//! In `death`/`hop` expressions the domain `gamma` is the full configuration
//! including the active particle (write `gamma\x` to exclude it); in `birth`
//! expressions the newborn is not yet a member, so `gamma` is the whole
//! existing configuration.

use std::collections::BTreeMap;

use crate::kernel::{Kernel, Scaling};

/// Which rate a part defines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PartKind {
    Death,
    Birth,
    Hop,
}

impl PartKind {
    pub fn name(self) -> &'static str {
        match self {
            PartKind::Death => "death",
            PartKind::Birth => "birth",
            PartKind::Hop => "hop",
        }
    }
}

/// A position variable occurring in a rate expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Var {
    /// The active particle.
    X,
    /// The hop arrival location.
    Y,
    /// A sum-bound variable.
    Bound(String),
}

impl Var {
    pub fn display(&self) -> &str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Bound(s) => s,
        }
    }
}

/// Domain of a configuration sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    /// The ambient configuration (see module docs for what that means in
    /// each part).
    Gamma,
    /// The ambient configuration minus the point bound to a variable.
    GammaExcluding(Var),
}

/// A rate expression.
#[derive(Debug, Clone, PartialEq)]
pub enum RateAst {
    Num(f64),
    /// A numeric literal with its own scaling tag (`1 scale inveps`),
    /// which acts like an anonymous constant.
    ScaledNum { value: f64, scaling: Scaling },
    /// A declared constant by name.
    Const(String),
    /// Kernel evaluated at a displacement: `k(from - to)`.
    KernelAt { kernel: String, from: Var, to: Var },
    Exp(Box<RateAst>),
    Sum { var: String, domain: Domain, body: Box<RateAst> },
    Add(Box<RateAst>, Box<RateAst>),
    Sub(Box<RateAst>, Box<RateAst>),
    Mul(Box<RateAst>, Box<RateAst>),
    Neg(Box<RateAst>),
}

/// A declared scalar constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: f64,
    pub scaling: Scaling,
}

/// A parsed generator description.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub kernels: BTreeMap<String, Kernel>,
    pub consts: BTreeMap<String, ConstDecl>,
    /// Parts in source order; each kind occurs at most once.
    pub parts: Vec<(PartKind, RateAst)>,
}

impl GeneratorSpec {
    pub fn part(&self, kind: PartKind) -> Option<&RateAst> {
        self.parts.iter().find(|(k, _)| *k == kind).map(|(_, ast)| ast)
    }

    pub fn has_part(&self, kind: PartKind) -> bool {
        self.part(kind).is_some()
    }
}
