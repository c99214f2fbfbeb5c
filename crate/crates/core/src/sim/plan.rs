//! Simulation plans: run parameters, initial profiles, and the compilation
//! of canonical rate terms into executable event schemes.
//!
//! The simulator runs the microscopic process exactly as written, at a
//! concrete scale ε, using thinning: every event class gets an upper bound
//! that is cheap to maintain, proposals are drawn from the bound, and the
//! ratio of the true rate to the bound decides acceptance. Rejected
//! proposals still advance the clock, which is what makes thinning exact.
//!
//! Compilation classifies each canonical term:
//!
//! * **death** — evaluated exactly per particle from cached neighbor sums;
//!   no thinning is ever needed because the dying particle is known.
//! * **birth, uniform** — a constant intensity density `c` over the box,
//!   optionally thinned by newborn-anchored exponential factors (which must
//!   have nonpositive exponents to stay ≤ 1).
//! * **birth, parented** — one environment sum anchored at the newborn
//!   (`Σ_p a(x−p)·…`): each particle carries an exact parent weight, the
//!   displacement is drawn from the kernel profile itself, and only
//!   newborn-anchored exponentials need thinning.
//! * **hop** — per-particle weights from the departure-side factors times
//!   analytic bounds for the arrival side; the displacement proposal is the
//!   first `k(x−y)` factor of the term.
//!
//! Terms outside this fragment (for example grandchild-nested sums, signed
//! event intensities, or exponential factors with positive unbounded
//! exponents) are rejected at compile time with an explanation, never
//! silently approximated.

use crate::dsl::{Anchor, Generator, PartKind, PointFactor, PtDisp, Term};
use crate::error::{Error, Result};
use crate::geometry::{Point, TorusBox};
use crate::kernel::Kernel;

/// Hard ceiling on the expected initial particle count; plans above it are
/// rejected so a typo in ε cannot ask for an intractable run.
pub const MAX_EXPECTED_COUNT: f64 = 1e6;

/// Default cap multiplier: a replica whose population exceeds
/// `max(10⁴, 50 × expected initial count)` is truncated and flagged.
pub const DEFAULT_CAP_FLOOR: usize = 10_000;

/// Initial density profile for the limiting equation and the sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    /// Spatially constant density.
    Constant(f64),
    /// `base + amp·cos(2πx₁/L)` along the first coordinate.
    Cosine { base: f64, amp: f64 },
}

impl InitialProfile {
    /// Spatial mean (the cosine integrates to zero over a period).
    pub fn mean(&self) -> f64 {
        match self {
            InitialProfile::Constant(c) => *c,
            InitialProfile::Cosine { base, .. } => *base,
        }
    }

    /// Pointwise value.
    pub fn value(&self, x: Point, l: f64) -> f64 {
        match self {
            InitialProfile::Constant(c) => *c,
            InitialProfile::Cosine { base, amp } => {
                base + amp * (std::f64::consts::TAU * x[0] / l).cos()
            }
        }
    }

    /// Supremum, used by the rejection sampler.
    pub fn max(&self) -> f64 {
        match self {
            InitialProfile::Constant(c) => *c,
            InitialProfile::Cosine { base, amp } => base + amp,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InitialProfile::Constant(c) if c.is_finite() && c >= 0.0 => Ok(()),
            InitialProfile::Cosine { base, amp }
                if base.is_finite() && amp.is_finite() && amp >= 0.0 && amp <= base =>
            {
                Ok(())
            }
            _ => Err(Error::Config(
                "initial profile must be nonnegative (cosine: 0 ≤ amp ≤ base)".into(),
            )),
        }
    }
}

/// Everything a microscopic run needs besides the generator itself.
#[derive(Debug, Clone)]
pub struct SimPlan {
    pub torus: TorusBox,
    /// The scale ε of the run; rates are evaluated exactly as written at
    /// this value, nothing is dropped.
    pub eps: f64,
    pub profile: InitialProfile,
    /// Snapshot times, strictly increasing, ≥ 0.
    pub times: Vec<f64>,
    pub replicas: usize,
    /// Base seed; replica `r` uses `seed + r`.
    pub seed: u64,
    /// Population cap per replica; 0 selects the default. A replica hitting
    /// the cap is frozen and flagged as truncated, never dropped.
    pub max_particles: usize,
}

impl SimPlan {
    /// Expected initial particle count `ε⁻¹ ∫ ρ₀`.
    pub fn expected_count(&self) -> f64 {
        self.profile.mean() * self.torus.volume() / self.eps
    }

    /// The effective population cap.
    pub fn cap(&self) -> usize {
        if self.max_particles > 0 {
            self.max_particles
        } else {
            DEFAULT_CAP_FLOOR.max((50.0 * self.expected_count()) as usize)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("scale eps must be positive, got {}", self.eps)));
        }
        self.profile.validate()?;
        if self.times.is_empty() {
            return Err(Error::Config("at least one snapshot time is required".into()));
        }
        if self.times[0] < 0.0 || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "snapshot times must be nonnegative and strictly increasing".into(),
            ));
        }
        if self.replicas == 0 {
            return Err(Error::Config("at least one replica is required".into()));
        }
        let expected = self.expected_count();
        if expected > MAX_EXPECTED_COUNT || expected.is_nan() {
            return Err(Error::Config(format!(
                "expected initial count {expected:.3e} exceeds the {MAX_EXPECTED_COUNT:.0e} guard; \
                 increase eps or shrink the box"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Compiled event schemes.
// ---------------------------------------------------------------------------

/// A cached environment sum factor: `k_eps · S_k(i)` where `S_k(i)` is the
/// sum of kernel `k` over all particles other than `i`.
#[derive(Debug, Clone)]
pub(crate) struct SlotEval {
    pub kernel: usize,
    /// The kernel's own scaling factor at the plan's ε.
    pub k_eps: f64,
    /// Add `k(0)`: the summation domain includes the anchor particle itself.
    pub add_diag: bool,
}

/// One exponential factor `exp(c_eps · Σ k)`, either over cached sums (at a
/// particle) or over a fresh query point (newborn location, hop arrival).
#[derive(Debug, Clone)]
pub(crate) struct EntryEval {
    pub kernel: usize,
    /// `coeff · Πconsts(ε) · k_scaling(ε)` — the full prefactor of the sum.
    pub c_eps: f64,
    /// Add `k(0)` to the sum (domain includes the anchor particle).
    pub add_diag: bool,
    /// Subtract `k(anchor − parent)`: the domain excludes the parent slot.
    pub excl_parent: bool,
}

/// A death term: exact per-particle rate
/// `c · Π slots(k_eps·S_k(i)) · exp(Σ entries c_eps·S_k(i))`.
#[derive(Debug, Clone)]
pub(crate) struct DeathTerm {
    pub c: f64,
    pub slots: Vec<SlotEval>,
    pub entries: Vec<EntryEval>,
}

/// A birth term, classified by its proposal mechanism.
#[derive(Debug, Clone)]
pub(crate) enum BirthTerm {
    /// Uniform intensity density `c` over the box; `entries` thin the
    /// proposal at the newborn location (exponents validated ≤ 0).
    Uniform { c: f64, entries: Vec<EntryEval> },
    /// `Σ_p w_p` with exact parent weights; the newborn displacement is
    /// drawn from the parent kernel's own profile.
    Parented {
        /// `c · k_eps · ∫kernel` — weight prefactor common to all parents.
        w0: f64,
        /// Registry index of the parent kernel (the displacement proposal).
        proposal: usize,
        /// Exact factors anchored at the parent: cached sums.
        parent_slots: Vec<SlotEval>,
        parent_entries: Vec<EntryEval>,
        /// Thinning factors at the newborn location (exponents ≤ 0); these
        /// may exclude the parent from their summation domain.
        newborn_entries: Vec<EntryEval>,
    },
}

/// A point factor of a hop rate depending on the displacement x−y.
#[derive(Debug, Clone)]
pub(crate) enum XyFactor {
    /// `k_eps · k(x−y)`, bounded by `k_eps · max k`.
    Kern { kernel: usize, k_eps: f64, bound: f64 },
    /// `exp(c_eps · k(x−y))`, bounded by `exp(max(c_eps, 0) · max k)`.
    ExpKern { kernel: usize, c_eps: f64, bound: f64 },
}

impl XyFactor {
    pub(crate) fn bound(&self) -> f64 {
        match self {
            XyFactor::Kern { bound, .. } | XyFactor::ExpKern { bound, .. } => *bound,
        }
    }
}

/// A hop term. Departure-side factors are exact per-particle weights; the
/// arrival side is bounded by `k_eps·(max k)·N` per environment sum and
/// thinned after the displacement proposal.
#[derive(Debug, Clone)]
pub(crate) struct HopTerm {
    /// `c · k_eps(proposal) · ∫proposal · Π bounds(extra_xy)`.
    pub w0: f64,
    /// Registry index of the displacement kernel.
    pub proposal: usize,
    /// Remaining displacement-dependent factors, thinned by value/bound.
    pub extra_xy: Vec<XyFactor>,
    /// Exact departure factors (cached sums at the jumper).
    pub dep_slots: Vec<SlotEval>,
    pub dep_entries: Vec<EntryEval>,
    /// Arrival environment sums: value `k_eps·S_k(y)`, bound `k_eps·kmax·N`.
    pub arr_slots: Vec<SlotEval>,
    /// `max k` per arrival slot, aligned with `arr_slots`.
    pub arr_kmax: Vec<f64>,
    /// Arrival exponential factors (exponents ≤ 0, thin by their value).
    pub arr_entries: Vec<EntryEval>,
}

/// A generator bound to a plan: validated, classified, ready to run.
#[derive(Debug, Clone)]
pub struct CompiledSim {
    pub(crate) torus: TorusBox,
    pub(crate) eps: f64,
    pub(crate) profile: InitialProfile,
    pub(crate) times: Vec<f64>,
    pub(crate) seed: u64,
    pub(crate) replicas: usize,
    pub(crate) cap: usize,
    /// Every kernel the run evaluates, deduplicated by name.
    pub(crate) kernels: Vec<Kernel>,
    pub(crate) deaths: Vec<DeathTerm>,
    pub(crate) births: Vec<BirthTerm>,
    pub(crate) hops: Vec<HopTerm>,
}

struct Compiler<'a> {
    gen: &'a Generator,
    torus: TorusBox,
    eps: f64,
    kernels: Vec<Kernel>,
}

impl<'a> Compiler<'a> {
    fn kernel_index(&mut self, name: &str) -> usize {
        if let Some(i) = self.kernels.iter().position(|k| k.name == name) {
            return i;
        }
        self.kernels.push(self.gen.spec().kernels[name].clone());
        self.kernels.len() - 1
    }

    fn consts_value(&self, term: &Term) -> f64 {
        term.coeff * term.consts.iter().map(|c| c.value * c.scaling.factor(self.eps)).product::<f64>()
    }

    /// Fold the displacement-free point factors into the coefficient and
    /// return the displacement-dependent ones.
    fn fold_zero_points<'t>(&mut self, term: &'t Term, c: &mut f64) -> Vec<&'t PointFactor> {
        let mut xy = Vec::new();
        for p in &term.points {
            match p {
                PointFactor::Kern { kernel, disp: PtDisp::Zero } => {
                    let k = &self.gen.spec().kernels[kernel];
                    *c *= k.scaling.factor(self.eps) * k.eval([0.0, 0.0]);
                }
                PointFactor::ExpKern { coeff, consts, kernel, disp: PtDisp::Zero } => {
                    let k = &self.gen.spec().kernels[kernel];
                    let pre: f64 = coeff
                        * consts.iter().map(|r| r.value * r.scaling.factor(self.eps)).product::<f64>();
                    *c *= (pre * k.scaling.factor(self.eps) * k.eval([0.0, 0.0])).exp();
                }
                other => xy.push(other),
            }
        }
        xy
    }

    fn slot_eval(&mut self, kernel: &str, add_diag: bool) -> SlotEval {
        let idx = self.kernel_index(kernel);
        SlotEval { kernel: idx, k_eps: self.kernels[idx].scaling.factor(self.eps), add_diag }
    }

    fn entry_eval(
        &mut self,
        coeff: f64,
        consts: &[crate::dsl::ConstRef],
        kernel: &str,
        add_diag: bool,
        excl_parent: bool,
    ) -> EntryEval {
        let idx = self.kernel_index(kernel);
        let pre: f64 =
            coeff * consts.iter().map(|r| r.value * r.scaling.factor(self.eps)).product::<f64>();
        EntryEval {
            kernel: idx,
            c_eps: pre * self.kernels[idx].scaling.factor(self.eps),
            add_diag,
            excl_parent,
        }
    }

    fn require_nonneg(&self, kernel: &str, role: &str) -> Result<()> {
        if !self.gen.spec().kernels[kernel].is_nonnegative() {
            return Err(Error::Unsupported(format!(
                "kernel `{kernel}` takes negative values and cannot serve as a {role}; \
                 signed kernels are only allowed where rates are computed exactly"
            )));
        }
        Ok(())
    }

    fn death_term(&mut self, term: &Term) -> Result<DeathTerm> {
        let mut c = self.consts_value(term);
        let xy = self.fold_zero_points(term, &mut c);
        if !xy.is_empty() {
            return Err(Error::Unsupported(
                "death rates cannot depend on an arrival displacement".into(),
            ));
        }
        let mut slots = Vec::new();
        for s in &term.slots {
            if s.anchor != Anchor::X || !s.excl.is_empty() {
                return Err(Error::Unsupported(format!(
                    "death term `{}`: only flat environment sums at the dying particle are \
                     executable; cross-excluded or nested sums are not",
                    term.describe()
                )));
            }
            slots.push(self.slot_eval(&s.kernel, false));
        }
        let mut entries = Vec::new();
        for e in &term.exps {
            if e.anchor != Anchor::X || !e.excl.is_empty() {
                return Err(Error::Unsupported(format!(
                    "death term `{}`: exponential factors must sum over the rest \
                     configuration at the dying particle",
                    term.describe()
                )));
            }
            entries.push(self.entry_eval(e.coeff, &e.consts, &e.kernel, false, false));
        }
        Ok(DeathTerm { c, slots, entries })
    }

    fn birth_term(&mut self, term: &Term) -> Result<BirthTerm> {
        let mut c = self.consts_value(term);
        let xy = self.fold_zero_points(term, &mut c);
        if !xy.is_empty() {
            return Err(Error::Unsupported(
                "birth rates cannot depend on an arrival displacement".into(),
            ));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Unsupported(format!(
                "birth term `{}` has a nonpositive intensity prefactor ({c}); signed birth \
                 intensities cannot be realized by thinning",
                term.describe()
            )));
        }

        // Classify the slots: index 0 anchored at the newborn is the parent
        // mechanism; everything else must hang off that parent.
        let roots: Vec<usize> = (0..term.slots.len())
            .filter(|&i| term.slots[i].anchor == Anchor::X)
            .collect();
        match roots.len() {
            0 => {
                if !term.slots.is_empty() {
                    return Err(Error::Unsupported(format!(
                        "birth term `{}`: environment sums must be anchored at the newborn",
                        term.describe()
                    )));
                }
                let mut entries = Vec::new();
                for e in &term.exps {
                    if e.anchor != Anchor::X || !e.excl.is_empty() {
                        return Err(Error::Unsupported(format!(
                            "birth term `{}`: exponential factor anchored away from the newborn",
                            term.describe()
                        )));
                    }
                    let entry = self.entry_eval(e.coeff, &e.consts, &e.kernel, false, false);
                    self.check_thinnable(&entry, term)?;
                    entries.push(entry);
                }
                Ok(BirthTerm::Uniform { c, entries })
            }
            1 => {
                let root = roots[0];
                if root != 0 {
                    // Slots are created outside-in, so the newborn-anchored
                    // sum is always first when it exists.
                    return Err(Error::Unsupported(format!(
                        "birth term `{}`: unexpected sum nesting",
                        term.describe()
                    )));
                }
                let pk = &term.slots[0].kernel;
                self.require_nonneg(pk, "parent proposal density")?;
                let proposal = self.kernel_index(pk);
                let k = &self.kernels[proposal];
                let w0 = c * k.scaling.factor(self.eps) * k.mass(self.torus.d)?;

                let mut parent_slots = Vec::new();
                for s in term.slots.iter().skip(1) {
                    if s.anchor != Anchor::Slot(0) || s.excl.iter().any(|&e| e != 0) {
                        return Err(Error::Unsupported(format!(
                            "birth term `{}`: sums nested deeper than one parent level are \
                             not executable",
                            term.describe()
                        )));
                    }
                    self.require_nonneg(&s.kernel, "parent weight factor")?;
                    parent_slots.push(self.slot_eval(&s.kernel, !s.excl.contains(&0)));
                }

                let mut parent_entries = Vec::new();
                let mut newborn_entries = Vec::new();
                for e in &term.exps {
                    match e.anchor {
                        Anchor::Slot(0) => {
                            if e.excl.iter().any(|&x| x != 0) {
                                return Err(Error::Unsupported(format!(
                                    "birth term `{}`: exponent exclusion outside the parent",
                                    term.describe()
                                )));
                            }
                            parent_entries.push(self.entry_eval(
                                e.coeff,
                                &e.consts,
                                &e.kernel,
                                !e.excl.contains(&0),
                                false,
                            ));
                        }
                        Anchor::X => {
                            if e.excl.iter().any(|&x| x != 0) {
                                return Err(Error::Unsupported(format!(
                                    "birth term `{}`: exponent exclusion outside the parent",
                                    term.describe()
                                )));
                            }
                            let entry = self.entry_eval(
                                e.coeff,
                                &e.consts,
                                &e.kernel,
                                false,
                                e.excl.contains(&0),
                            );
                            self.check_thinnable(&entry, term)?;
                            newborn_entries.push(entry);
                        }
                        _ => {
                            return Err(Error::Unsupported(format!(
                                "birth term `{}`: exponential factor anchored at a nested sum",
                                term.describe()
                            )))
                        }
                    }
                }
                Ok(BirthTerm::Parented { w0, proposal, parent_slots, parent_entries, newborn_entries })
            }
            _ => Err(Error::Unsupported(format!(
                "birth term `{}`: more than one newborn-anchored environment sum; such pair \
                 intensities are outside the executable fragment",
                term.describe()
            ))),
        }
    }

    /// A thinning exponential must stay ≤ 1 for every configuration: the
    /// exponent prefactor must be ≤ 0 and the kernel nonnegative.
    fn check_thinnable(&self, entry: &EntryEval, term: &Term) -> Result<()> {
        let k = &self.kernels[entry.kernel];
        if entry.c_eps > 0.0 || !k.is_nonnegative() {
            return Err(Error::Unsupported(format!(
                "term `{}`: the exponential factor in `{}` can exceed 1 and admits no finite \
                 proposal bound; only suppressive exponentials are executable at a proposal \
                 location",
                term.describe(),
                k.name,
            )));
        }
        Ok(())
    }

    fn hop_term(&mut self, term: &Term) -> Result<HopTerm> {
        let mut c = self.consts_value(term);
        let xy_points = self.fold_zero_points(term, &mut c);
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Unsupported(format!(
                "hop term `{}` has a nonpositive intensity prefactor ({c}); signed hop \
                 intensities cannot be realized by thinning",
                term.describe()
            )));
        }

        // The first plain kernel of the displacement becomes the proposal.
        let mut proposal: Option<usize> = None;
        let mut extra_xy = Vec::new();
        for p in xy_points {
            match p {
                PointFactor::Kern { kernel, .. } => {
                    self.require_nonneg(kernel, "hop displacement factor")?;
                    let idx = self.kernel_index(kernel);
                    let k_eps = self.kernels[idx].scaling.factor(self.eps);
                    match proposal {
                        None => {
                            proposal = Some(idx);
                            c *= k_eps * self.kernels[idx].mass(self.torus.d)?;
                        }
                        Some(first) => {
                            let bound = k_eps * self.kernels[idx].max_abs();
                            if bound == 0.0 {
                                // A structurally zero factor kills the term.
                                return Ok(HopTerm {
                                    w0: 0.0,
                                    proposal: first,
                                    extra_xy: vec![],
                                    dep_slots: vec![],
                                    dep_entries: vec![],
                                    arr_slots: vec![],
                                    arr_kmax: vec![],
                                    arr_entries: vec![],
                                });
                            }
                            extra_xy.push(XyFactor::Kern { kernel: idx, k_eps, bound });
                        }
                    }
                }
                PointFactor::ExpKern { coeff, consts, kernel, .. } => {
                    self.require_nonneg(kernel, "hop displacement exponential")?;
                    let idx = self.kernel_index(kernel);
                    let pre: f64 = coeff
                        * consts.iter().map(|r| r.value * r.scaling.factor(self.eps)).product::<f64>();
                    let c_eps = pre * self.kernels[idx].scaling.factor(self.eps);
                    let bound = (c_eps.max(0.0) * self.kernels[idx].max_abs()).exp();
                    extra_xy.push(XyFactor::ExpKern { kernel: idx, c_eps, bound });
                }
            }
        }
        let proposal = proposal.ok_or_else(|| {
            Error::Unsupported(format!(
                "hop term `{}` has no plain displacement kernel to propose jumps from",
                term.describe()
            ))
        })?;
        let mut w0 = c;
        for f in &extra_xy {
            w0 *= f.bound();
        }

        let mut dep_slots = Vec::new();
        let mut arr_slots = Vec::new();
        let mut arr_kmax = Vec::new();
        for s in &term.slots {
            if !s.excl.is_empty() {
                return Err(Error::Unsupported(format!(
                    "hop term `{}`: cross-excluded environment sums are not executable",
                    term.describe()
                )));
            }
            match s.anchor {
                Anchor::X => {
                    self.require_nonneg(&s.kernel, "departure weight factor")?;
                    dep_slots.push(self.slot_eval(&s.kernel, false));
                }
                Anchor::Y => {
                    self.require_nonneg(&s.kernel, "arrival factor")?;
                    let ev = self.slot_eval(&s.kernel, false);
                    arr_kmax.push(self.kernels[ev.kernel].max_abs());
                    arr_slots.push(ev);
                }
                Anchor::Slot(_) => {
                    return Err(Error::Unsupported(format!(
                        "hop term `{}`: sums nested inside environment sums are not executable",
                        term.describe()
                    )))
                }
            }
        }

        let mut dep_entries = Vec::new();
        let mut arr_entries = Vec::new();
        for e in &term.exps {
            if !e.excl.is_empty() {
                return Err(Error::Unsupported(format!(
                    "hop term `{}`: exponent exclusions are not executable",
                    term.describe()
                )));
            }
            match e.anchor {
                Anchor::X => {
                    dep_entries.push(self.entry_eval(e.coeff, &e.consts, &e.kernel, false, false))
                }
                Anchor::Y => {
                    let entry = self.entry_eval(e.coeff, &e.consts, &e.kernel, false, false);
                    self.check_thinnable(&entry, term)?;
                    arr_entries.push(entry);
                }
                Anchor::Slot(_) => {
                    return Err(Error::Unsupported(format!(
                        "hop term `{}`: exponential factors anchored at environment sums are \
                         not executable",
                        term.describe()
                    )))
                }
            }
        }

        Ok(HopTerm {
            w0,
            proposal,
            extra_xy,
            dep_slots,
            dep_entries,
            arr_slots,
            arr_kmax,
            arr_entries,
        })
    }
}

impl CompiledSim {
    /// Validate a plan against a generator and compile the event schemes.
    pub fn compile(gen: &Generator, plan: &SimPlan) -> Result<Self> {
        plan.validate()?;
        let mut compiler =
            Compiler { gen, torus: plan.torus, eps: plan.eps, kernels: Vec::new() };

        let mut deaths = Vec::new();
        let mut births = Vec::new();
        let mut hops = Vec::new();
        for (kind, terms) in gen.parts() {
            for term in terms {
                match kind {
                    PartKind::Death => deaths.push(compiler.death_term(term)?),
                    PartKind::Birth => births.push(compiler.birth_term(term)?),
                    PartKind::Hop => hops.push(compiler.hop_term(term)?),
                }
            }
        }
        if deaths.is_empty() && births.is_empty() && hops.is_empty() {
            return Err(Error::Declaration("generator has no rate parts to simulate".into()));
        }

        // Minimum-image kernel evaluation is only faithful when every
        // kernel's support fits in half the box.
        for k in &compiler.kernels {
            let cutoff = k.cutoff_radius();
            if cutoff > plan.torus.l / 2.0 {
                return Err(Error::Config(format!(
                    "kernel `{}` reaches to radius {:.3} but half the box is {:.3}; enlarge \
                     the box or shrink the kernel",
                    k.name,
                    cutoff,
                    plan.torus.l / 2.0
                )));
            }
        }

        Ok(CompiledSim {
            torus: plan.torus,
            eps: plan.eps,
            profile: plan.profile,
            times: plan.times.clone(),
            seed: plan.seed,
            replicas: plan.replicas,
            cap: plan.cap(),
            kernels: compiler.kernels,
            deaths,
            births,
            hops,
        })
    }

    /// Largest kernel cutoff: the neighbor-query radius.
    pub(crate) fn query_radius(&self) -> f64 {
        self.kernels.iter().map(|k| k.cutoff_radius()).fold(0.0, f64::max)
    }
}
