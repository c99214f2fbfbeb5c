//! Canonical sum-of-terms form for rate expressions.
//!
//! Every rate expression is expanded distributively into a sum of [`Term`]s.
//! A term is a product of
//!
//! * a numeric coefficient and declared constants,
//! * *point factors*: kernels (or exponentials of kernels) evaluated at a
//!   fixed displacement — zero, or the hop displacement x−y,
//! * *slots*: nested sums `Σ_{u ∈ env∖excl} k(anchor − u)` over the
//!   environment configuration, anchored at x, y, or an earlier slot,
//! * *exponential entries*: factors `exp(c · Σ_{u ∈ env∖excl} k(anchor−u))`.
//!
//! The environment is always the configuration *without* the active
//! particle: the rest γ∖x for death and hop rates, the whole existing
//! configuration for birth rates. Where a death/hop expression sums over
//! `gamma` (which includes the active particle), canonicalization unfolds
//! the active particle's own contribution into point factors — `k(0)`
//! diagonals and, for arrival-anchored sums, `k(x−y)` cross terms — so that
//! finite-ε evaluation is exact while the unfolded pieces carry positive
//! ε-order and drop out of the mean-field limit.
//!
//! Kernels are even functions, so a displacement's orientation never
//! matters and slot kernels store only their anchor.

use crate::error::{Error, Result};
use crate::kernel::Scaling;

use super::ast::{Domain, GeneratorSpec, PartKind, RateAst, Var};

/// Where a slot kernel or exponential entry is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// The active particle.
    X,
    /// The hop arrival location.
    Y,
    /// The point bound by an earlier slot.
    Slot(usize),
}

/// Fixed displacement of a point factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtDisp {
    /// Zero displacement (a `k(0)` diagonal).
    Zero,
    /// The hop displacement between departure and arrival.
    XY,
}

/// A scalar constant occurrence: a declared constant (named) or a scaled
/// numeric literal (anonymous).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstRef {
    pub name: Option<String>,
    pub value: f64,
    pub scaling: Scaling,
}

/// `Σ_{u ∈ env ∖ excl} k(anchor − u)` — one multiplicative sum factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub kernel: String,
    pub anchor: Anchor,
    /// Indices of earlier slots whose bound point is excluded from the
    /// summation domain.
    pub excl: Vec<usize>,
}

/// One additive contribution to an exponent:
/// `coeff · Πconsts · Σ_{u ∈ env ∖ excl} k(anchor − u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpEntry {
    pub coeff: f64,
    pub consts: Vec<ConstRef>,
    pub kernel: String,
    pub anchor: Anchor,
    pub excl: Vec<usize>,
}

/// A kernel (or exponential of a kernel) at a fixed displacement.
#[derive(Debug, Clone, PartialEq)]
pub enum PointFactor {
    Kern { kernel: String, disp: PtDisp },
    ExpKern { coeff: f64, consts: Vec<ConstRef>, kernel: String, disp: PtDisp },
}

/// One canonical term of a rate expression.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Term {
    pub coeff: f64,
    pub consts: Vec<ConstRef>,
    pub points: Vec<PointFactor>,
    pub slots: Vec<Slot>,
    pub exps: Vec<ExpEntry>,
}

impl Term {
    /// Human-readable shape, used in scaling reports and error messages.
    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if self.coeff != 1.0 {
            parts.push(format!("{}", self.coeff));
        }
        for c in &self.consts {
            parts.push(c.name.clone().unwrap_or_else(|| format!("{}", c.value)));
        }
        for p in &self.points {
            match p {
                PointFactor::Kern { kernel, disp } => parts.push(format!("{kernel}({})", disp_str(*disp))),
                PointFactor::ExpKern { kernel, disp, .. } => {
                    parts.push(format!("exp[{kernel}({})]", disp_str(*disp)))
                }
            }
        }
        for s in &self.slots {
            parts.push(format!("sum {}", s.kernel));
        }
        for e in &self.exps {
            parts.push(format!("exp[sum {}]", e.kernel));
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

fn disp_str(d: PtDisp) -> &'static str {
    match d {
        PtDisp::Zero => "0",
        PtDisp::XY => "x-y",
    }
}

// ---------------------------------------------------------------------------
// Stage 1: distributive expansion of the AST into raw product terms.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum RawAtom {
    Const(ConstRef),
    Kernel { name: String, from: Var, to: Var },
    Exp(Vec<RawTerm>),
    Sum { var: String, domain: Domain, body: RawTerm },
}

#[derive(Debug, Clone)]
struct RawTerm {
    coeff: f64,
    atoms: Vec<RawAtom>,
}

fn expand(ast: &RateAst, spec: &GeneratorSpec) -> Vec<RawTerm> {
    match ast {
        RateAst::Num(v) => vec![RawTerm { coeff: *v, atoms: vec![] }],
        RateAst::ScaledNum { value, scaling } => vec![RawTerm {
            coeff: 1.0,
            atoms: vec![RawAtom::Const(ConstRef { name: None, value: *value, scaling: *scaling })],
        }],
        RateAst::Const(name) => {
            let decl = &spec.consts[name];
            vec![RawTerm {
                coeff: 1.0,
                atoms: vec![RawAtom::Const(ConstRef {
                    name: Some(name.clone()),
                    value: decl.value,
                    scaling: decl.scaling,
                })],
            }]
        }
        RateAst::KernelAt { kernel, from, to } => vec![RawTerm {
            coeff: 1.0,
            atoms: vec![RawAtom::Kernel { name: kernel.clone(), from: from.clone(), to: to.clone() }],
        }],
        RateAst::Exp(arg) => {
            let inner = expand(arg, spec);
            vec![RawTerm { coeff: 1.0, atoms: vec![RawAtom::Exp(inner)] }]
        }
        RateAst::Sum { var, domain, body } => expand(body, spec)
            .into_iter()
            .map(|t| RawTerm {
                coeff: t.coeff,
                atoms: vec![RawAtom::Sum {
                    var: var.clone(),
                    domain: domain.clone(),
                    body: RawTerm { coeff: 1.0, atoms: t.atoms },
                }],
            })
            .collect(),
        RateAst::Add(a, b) => {
            let mut out = expand(a, spec);
            out.extend(expand(b, spec));
            out
        }
        RateAst::Sub(a, b) => {
            let mut out = expand(a, spec);
            out.extend(expand(b, spec).into_iter().map(|mut t| {
                t.coeff = -t.coeff;
                t
            }));
            out
        }
        RateAst::Mul(a, b) => {
            let left = expand(a, spec);
            let right = expand(b, spec);
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut atoms = l.atoms.clone();
                    atoms.extend(r.atoms.iter().cloned());
                    out.push(RawTerm { coeff: l.coeff * r.coeff, atoms });
                }
            }
            out
        }
        RateAst::Neg(a) => expand(a, spec)
            .into_iter()
            .map(|mut t| {
                t.coeff = -t.coeff;
                t
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Stage 2: classify the atoms of each raw term into the canonical structure.
// ---------------------------------------------------------------------------

struct Builder {
    part: PartKind,
    term: Term,
    /// Per-slot: does the summation domain include the active particle?
    includes_active: Vec<bool>,
    /// Bound variable → slot index.
    scope: Vec<(String, usize)>,
}

/// How a variable resolves once in canonical coordinates.
#[derive(Clone, Copy, PartialEq)]
enum End {
    X,
    Y,
    Slot(usize),
}

impl Builder {
    fn resolve(&self, v: &Var) -> Result<End> {
        match v {
            Var::X => Ok(End::X),
            Var::Y => Ok(End::Y),
            Var::Bound(name) => self
                .scope
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|(_, i)| End::Slot(*i))
                .ok_or_else(|| Error::Unsupported(format!("variable `{name}` out of scope"))),
        }
    }

    fn point_disp(a: End, b: End) -> Result<PtDisp> {
        match (a, b) {
            (End::X, End::X) | (End::Y, End::Y) => Ok(PtDisp::Zero),
            (End::X, End::Y) | (End::Y, End::X) => Ok(PtDisp::XY),
            (End::Slot(i), End::Slot(j)) if i == j => Ok(PtDisp::Zero),
            _ => Err(Error::Unsupported(
                "a kernel may bind at most one summation variable".into(),
            )),
        }
    }

    fn anchor_of(e: End) -> Anchor {
        match e {
            End::X => Anchor::X,
            End::Y => Anchor::Y,
            End::Slot(i) => Anchor::Slot(i),
        }
    }

    fn domain_parts(&self, domain: &Domain) -> Result<(Vec<usize>, bool)> {
        // Returns (excluded slot indices, includes_active).
        let ambient_has_active = self.part != PartKind::Birth;
        match domain {
            Domain::Gamma => Ok((vec![], ambient_has_active)),
            Domain::GammaExcluding(Var::X) => Ok((vec![], false)),
            Domain::GammaExcluding(Var::Y) => {
                Err(Error::Unsupported("cannot exclude `y` from gamma".into()))
            }
            Domain::GammaExcluding(Var::Bound(name)) => {
                let e = self.resolve(&Var::Bound(name.clone()))?;
                match e {
                    End::Slot(i) => Ok((vec![i], ambient_has_active)),
                    _ => unreachable!("bound vars resolve to slots"),
                }
            }
        }
    }

    fn add_atoms(&mut self, atoms: &[RawAtom]) -> Result<()> {
        for atom in atoms {
            match atom {
                RawAtom::Const(c) => self.term.consts.push(c.clone()),
                RawAtom::Kernel { name, from, to } => {
                    let a = self.resolve(from)?;
                    let b = self.resolve(to)?;
                    let disp = Self::point_disp(a, b)?;
                    self.term.points.push(PointFactor::Kern { kernel: name.clone(), disp });
                }
                RawAtom::Exp(exponent_terms) => self.add_exp(exponent_terms)?,
                RawAtom::Sum { var, domain, body } => self.add_sum(var, domain, body)?,
            }
        }
        Ok(())
    }

    fn add_sum(&mut self, var: &str, domain: &Domain, body: &RawTerm) -> Result<()> {
        self.term.coeff *= body.coeff;
        let (excl, includes_active) = self.domain_parts(domain)?;

        // Find the single kernel atom that binds `var`; everything else in
        // the body is processed in the enclosing scope.
        let mut slot_kernel: Option<(String, End)> = None;
        let mut rest: Vec<&RawAtom> = Vec::new();
        for atom in &body.atoms {
            if let RawAtom::Kernel { name, from, to } = atom {
                let from_is_var = matches!(from, Var::Bound(n) if n == var);
                let to_is_var = matches!(to, Var::Bound(n) if n == var);
                if from_is_var && to_is_var {
                    return Err(Error::Unsupported(format!(
                        "kernel `{name}({var}-{var})` does not bind the sum over `{var}`"
                    )));
                }
                if from_is_var || to_is_var {
                    if slot_kernel.is_some() {
                        return Err(Error::Unsupported(format!(
                            "the sum over `{var}` binds more than one kernel; only one kernel \
                             factor per summation variable is supported"
                        )));
                    }
                    let other = if from_is_var { to } else { from };
                    let anchor_end = self.resolve(other)?;
                    slot_kernel = Some((name.clone(), anchor_end));
                    continue;
                }
            }
            rest.push(atom);
        }
        let (kernel, anchor_end) = slot_kernel.ok_or_else(|| {
            Error::Unsupported(format!(
                "the sum over `{var}` must contain exactly one kernel factor of `{var}` \
                 (bare counting sums are outside the supported fragment)"
            ))
        })?;

        let idx = self.term.slots.len();
        self.term.slots.push(Slot { kernel, anchor: Self::anchor_of(anchor_end), excl });
        self.includes_active.push(includes_active);
        self.scope.push((var.to_string(), idx));
        for atom in rest {
            self.add_atoms(std::slice::from_ref(atom))?;
        }
        self.scope.pop();
        Ok(())
    }

    fn add_exp(&mut self, exponent_terms: &[RawTerm]) -> Result<()> {
        for t in exponent_terms {
            let mut coeff = t.coeff;
            let mut consts: Vec<ConstRef> = Vec::new();
            let mut payload: Option<&RawAtom> = None;
            for atom in &t.atoms {
                match atom {
                    RawAtom::Const(c) => consts.push(c.clone()),
                    RawAtom::Kernel { .. } | RawAtom::Sum { .. } => {
                        if payload.is_some() {
                            return Err(Error::Unsupported(
                                "each exponent term may contain one kernel or one \
                                 configuration sum"
                                    .into(),
                            ));
                        }
                        payload = Some(atom);
                    }
                    RawAtom::Exp(_) => {
                        return Err(Error::Unsupported("nested exponentials are unsupported".into()))
                    }
                }
            }
            match payload {
                Some(RawAtom::Sum { var, domain, body }) => {
                    coeff *= body.coeff;
                    let (excl, includes_active) = self.domain_parts(domain)?;
                    let mut kernel: Option<(String, End)> = None;
                    for atom in &body.atoms {
                        match atom {
                            RawAtom::Const(c) => consts.push(c.clone()),
                            RawAtom::Kernel { name, from, to } => {
                                let from_is_var = matches!(from, Var::Bound(n) if n == var);
                                let to_is_var = matches!(to, Var::Bound(n) if n == var);
                                if !(from_is_var ^ to_is_var) || kernel.is_some() {
                                    return Err(Error::Unsupported(format!(
                                        "the exponent sum over `{var}` must contain exactly one \
                                         kernel factor of `{var}`"
                                    )));
                                }
                                let other = if from_is_var { to } else { from };
                                kernel = Some((name.clone(), self.resolve(other)?));
                            }
                            _ => {
                                return Err(Error::Unsupported(
                                    "exponent sums may not contain further sums or \
                                     exponentials"
                                        .into(),
                                ))
                            }
                        }
                    }
                    let (kernel, anchor_end) = kernel.ok_or_else(|| {
                        Error::Unsupported(format!(
                            "the exponent sum over `{var}` must contain a kernel of `{var}`"
                        ))
                    })?;
                    let anchor = Self::anchor_of(anchor_end);
                    if includes_active {
                        // The active particle's own contribution becomes a
                        // multiplicative point factor.
                        let disp = match anchor {
                            Anchor::X => PtDisp::Zero,
                            Anchor::Y => PtDisp::XY,
                            Anchor::Slot(_) => {
                                return Err(Error::Unsupported(
                                    "an exponent sum over `gamma` anchored at a summation \
                                     variable is unsupported in death/hop rates; exclude the \
                                     active particle with `gamma\\x`"
                                        .into(),
                                ))
                            }
                        };
                        self.term.points.push(PointFactor::ExpKern {
                            coeff,
                            consts: consts.clone(),
                            kernel: kernel.clone(),
                            disp,
                        });
                    }
                    self.term.exps.push(ExpEntry { coeff, consts, kernel, anchor, excl });
                }
                Some(RawAtom::Kernel { name, from, to }) => {
                    let a = self.resolve(from)?;
                    let b = self.resolve(to)?;
                    let disp = Self::point_disp(a, b)?;
                    self.term.points.push(PointFactor::ExpKern {
                        coeff,
                        consts,
                        kernel: name.clone(),
                        disp,
                    });
                }
                _ => {
                    return Err(Error::Unsupported(
                        "exponents must be sums of kernel terms (a bare constant inside \
                         exp(…) is outside the supported fragment)"
                            .into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Stage 3: unfold the active particle out of `gamma` slot domains.
// ---------------------------------------------------------------------------

/// Split a term into variants where each active-including slot either ranges
/// over the rest or is pinned to the active particle (becoming a point
/// factor). References into a pinned slot are remapped: anchors to it become
/// X-anchors, exclusions of it are dropped.
fn unfold(term: Term, includes_active: Vec<bool>) -> Result<Vec<Term>> {
    let pending: Vec<usize> =
        (0..term.slots.len()).filter(|&i| includes_active[i]).collect();
    if pending.is_empty() {
        return Ok(vec![term]);
    }
    let mut variants = vec![term];
    // Pin slots one at a time, from the last pending slot to the first so
    // index remapping never disturbs a slot still awaiting its own split.
    for &slot_idx in pending.iter().rev() {
        let mut next = Vec::with_capacity(variants.len() * 2);
        for v in variants {
            next.push(restrict_slot(&v, slot_idx));
            next.push(pin_slot(&v, slot_idx)?);
        }
        variants = next;
    }
    Ok(variants)
}

/// The branch where the slot ranges over the rest configuration: nothing to
/// change, the canonical domain is already the rest.
fn restrict_slot(term: &Term, _slot_idx: usize) -> Term {
    term.clone()
}

/// The branch where the slot variable *is* the active particle.
fn pin_slot(term: &Term, slot_idx: usize) -> Result<Term> {
    let slot = &term.slots[slot_idx];
    let disp = match slot.anchor {
        Anchor::X => PtDisp::Zero,
        Anchor::Y => PtDisp::XY,
        Anchor::Slot(_) => {
            return Err(Error::Unsupported(
                "a nested sum over `gamma` anchored at another summation variable is \
                 unsupported in death/hop rates; exclude the active particle with `gamma\\x`"
                    .into(),
            ))
        }
    };
    let mut out = Term {
        coeff: term.coeff,
        consts: term.consts.clone(),
        points: term.points.clone(),
        slots: Vec::new(),
        exps: Vec::new(),
    };
    out.points.push(PointFactor::Kern { kernel: slot.kernel.clone(), disp });

    let remap = |i: usize| -> usize {
        debug_assert!(i != slot_idx);
        if i > slot_idx {
            i - 1
        } else {
            i
        }
    };
    for (i, s) in term.slots.iter().enumerate() {
        if i == slot_idx {
            continue;
        }
        let anchor = match s.anchor {
            Anchor::Slot(j) if j == slot_idx => Anchor::X,
            Anchor::Slot(j) => Anchor::Slot(remap(j)),
            a => a,
        };
        let excl = s.excl.iter().filter(|&&j| j != slot_idx).map(|&j| remap(j)).collect();
        out.slots.push(Slot { kernel: s.kernel.clone(), anchor, excl });
    }
    for e in &term.exps {
        let anchor = match e.anchor {
            Anchor::Slot(j) if j == slot_idx => Anchor::X,
            Anchor::Slot(j) => Anchor::Slot(remap(j)),
            a => a,
        };
        let excl = e.excl.iter().filter(|&&j| j != slot_idx).map(|&j| remap(j)).collect();
        out.exps.push(ExpEntry {
            coeff: e.coeff,
            consts: e.consts.clone(),
            kernel: e.kernel.clone(),
            anchor,
            excl,
        });
    }
    Ok(out)
}

/// Canonicalize one part of a generator into its term list.
pub fn canonicalize(spec: &GeneratorSpec, part: PartKind) -> Result<Vec<Term>> {
    let ast = spec
        .part(part)
        .ok_or_else(|| Error::Declaration(format!("generator has no `{}` part", part.name())))?;
    let raw_terms = expand(ast, spec);
    let mut out = Vec::new();
    for raw in raw_terms {
        let mut b = Builder {
            part,
            term: Term { coeff: raw.coeff, ..Default::default() },
            includes_active: Vec::new(),
            scope: Vec::new(),
        };
        b.add_atoms(&raw.atoms)?;
        let includes_active = b.includes_active.clone();
        let term = b.term;
        out.extend(unfold(term, includes_active)?);
    }
    // Drop terms with zero coefficient (e.g. from explicit `0 * …`).
    out.retain(|t| t.coeff != 0.0);
    Ok(out)
}
