//! The exact event loop for one replica: Gillespie sampling on top of the
//! compiled event schemes, with thinning for every factor that cannot be
//! summed in closed form.
//!
//! Correctness contract: between events the process is piecewise-constant,
//! the next event time is exponential in the *bound* total rate, and a
//! proposal is accepted with probability (true rate)/(bound). Rejected
//! proposals change nothing but still advance the clock — that is what
//! makes the bound construction exact rather than approximate. Displacement
//! proposals are drawn from the full-space kernel profile and wrapped onto
//! the torus; since every kernel's cutoff fits in half the box, the wrapped
//! proposal density differs from the minimum-image kernel only by the
//! ≤ ~1e-9 tail budget documented on [`crate::kernel::Kernel`].
//!
//! Reproducibility: each replica owns a counter-seeded ChaCha stream
//! (`seed + replica`) and consumes draws in a fixed order — initial count,
//! initial positions, then per event: waiting time, one selector uniform,
//! the scheme's displacement/position draws, and one acceptance uniform if
//! and only if the selected term carries thinning factors (a structural
//! property of the compiled plan, never value-dependent).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;

use super::initial::sample_initial;
use super::plan::{BirthTerm, CompiledSim, EntryEval, HopTerm, SlotEval};
use super::state::SimState;

/// Full cache rebuild cadence: bounds incremental roundoff drift without
/// measurable cost.
const REBUILD_INTERVAL: u64 = 4096;

/// Roundoff allowance for per-particle death rates; anything more negative
/// indicates a genuinely signed rate and aborts the run.
const NEGATIVE_RATE_TOL: f64 = 1e-9;

/// One replica's trajectory record.
#[derive(Debug, Clone)]
pub struct ReplicaOutcome {
    pub replica: usize,
    /// Configurations at the requested times, in time order.
    pub snapshots: Vec<(f64, Vec<Point>)>,
    /// Proposals executed (accepted and rejected).
    pub events: u64,
    /// Rejected proposals (time advanced, state unchanged).
    pub rejected: u64,
    /// The population cap was hit: the state was frozen and the remaining
    /// snapshots repeat it. Estimators must treat the replica as suspect.
    pub truncated: bool,
}

/// Per-event rate bounds, recomputed from the cached sums.
#[derive(Debug, Clone)]
pub(crate) struct Totals {
    pub death: f64,
    pub births: Vec<f64>,
    pub hops: Vec<f64>,
    pub total: f64,
}

pub(crate) struct Engine<'a> {
    sim: &'a CompiledSim,
    pub(crate) state: SimState,
    pub(crate) death_rates: Vec<f64>,
    /// Per parented-birth term: per-particle parent weights.
    parent_weights: Vec<Vec<f64>>,
    /// Per hop term: per-particle departure-side bound bases.
    hop_bases: Vec<Vec<f64>>,
}

impl<'a> Engine<'a> {
    pub(crate) fn from_points(sim: &'a CompiledSim, points: Vec<Point>) -> Self {
        let state = SimState::new(sim.torus, sim.kernels.clone(), sim.query_radius(), points);
        Engine {
            sim,
            state,
            death_rates: Vec::new(),
            parent_weights: vec![Vec::new(); sim.births.len()],
            hop_bases: vec![Vec::new(); sim.hops.len()],
        }
    }

    fn slot_value(&self, s: &SlotEval, i: usize) -> f64 {
        let mut v = self.state.sums[s.kernel][i];
        if s.add_diag {
            v += self.state.kernel_diag(s.kernel);
        }
        s.k_eps * v
    }

    fn entry_value(&self, e: &EntryEval, i: usize) -> f64 {
        let mut v = self.state.sums[e.kernel][i];
        if e.add_diag {
            v += self.state.kernel_diag(e.kernel);
        }
        e.c_eps * v
    }

    /// `Π_j k_eps·kmax·N` over the arrival sums of a hop term.
    fn arr_bound_factor(&self, term: &HopTerm, n: usize) -> f64 {
        term.arr_slots
            .iter()
            .zip(&term.arr_kmax)
            .map(|(s, &kmax)| s.k_eps * kmax * n as f64)
            .product()
    }

    /// Recompute every per-particle rate array and the class totals.
    pub(crate) fn refresh(&mut self) -> Result<Totals> {
        let n = self.state.len();

        self.death_rates.clear();
        self.death_rates.resize(n, 0.0);
        let mut death_total = 0.0;
        for i in 0..n {
            let mut r = 0.0;
            for t in &self.sim.deaths {
                let mut v = t.c;
                for s in &t.slots {
                    v *= self.slot_value(s, i);
                }
                if !t.entries.is_empty() {
                    let ex: f64 = t.entries.iter().map(|e| self.entry_value(e, i)).sum();
                    v *= ex.exp();
                }
                r += v;
            }
            if r < 0.0 {
                if r < -NEGATIVE_RATE_TOL {
                    return Err(Error::Numerical(format!(
                        "death rate {r:.3e} is negative at particle {i}; the written death \
                         part is not a rate on this configuration"
                    )));
                }
                r = 0.0;
            }
            self.death_rates[i] = r;
            death_total += r;
        }

        let mut births = Vec::with_capacity(self.sim.births.len());
        for (ti, term) in self.sim.births.iter().enumerate() {
            match term {
                BirthTerm::Uniform { c, .. } => {
                    self.parent_weights[ti].clear();
                    births.push(c * self.sim.torus.volume());
                }
                BirthTerm::Parented { w0, parent_slots, parent_entries, .. } => {
                    let mut w = std::mem::take(&mut self.parent_weights[ti]);
                    w.clear();
                    w.resize(n, 0.0);
                    let mut total = 0.0;
                    for (i, wi) in w.iter_mut().enumerate() {
                        let mut v = *w0;
                        for s in parent_slots {
                            let mut sv = self.state.sums[s.kernel][i];
                            if s.add_diag {
                                sv += self.state.kernel_diag(s.kernel);
                            }
                            v *= s.k_eps * sv;
                        }
                        if !parent_entries.is_empty() {
                            let ex: f64 =
                                parent_entries.iter().map(|e| self.entry_value(e, i)).sum();
                            v *= ex.exp();
                        }
                        *wi = v;
                        total += v;
                    }
                    self.parent_weights[ti] = w;
                    births.push(total);
                }
            }
        }

        let mut hops = Vec::with_capacity(self.sim.hops.len());
        for (ti, term) in self.sim.hops.iter().enumerate() {
            let mut b = std::mem::take(&mut self.hop_bases[ti]);
            b.clear();
            b.resize(n, 0.0);
            let mut base_total = 0.0;
            if term.w0 > 0.0 {
                for (i, bi) in b.iter_mut().enumerate() {
                    let mut v = term.w0;
                    for s in &term.dep_slots {
                        v *= self.slot_value(s, i);
                    }
                    if !term.dep_entries.is_empty() {
                        let ex: f64 =
                            term.dep_entries.iter().map(|e| self.entry_value(e, i)).sum();
                        v *= ex.exp();
                    }
                    *bi = v;
                    base_total += v;
                }
            }
            self.hop_bases[ti] = b;
            hops.push(base_total * self.arr_bound_factor(term, n));
        }

        let total = death_total + births.iter().sum::<f64>() + hops.iter().sum::<f64>();
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "total event rate became non-finite ({total}) with {n} particles"
            )));
        }
        Ok(Totals { death: death_total, births, hops, total })
    }

    /// Thinning factor for a newborn at `x` (parent excluded where the
    /// exponent's domain says so). Always in [0, 1] by plan validation.
    fn birth_acceptance(&mut self, entries: &[EntryEval], x: Point, parent: Option<usize>) -> f64 {
        let mut ex = 0.0;
        for e in entries {
            let mut s = self.state.sum_at(e.kernel, x, None);
            if e.excl_parent {
                if let Some(p) = parent {
                    s -= self.state.kernel_to(e.kernel, x, p);
                }
            }
            ex += e.c_eps * s;
        }
        ex.exp()
    }

    /// Acceptance ratio for a proposed jump of particle `i` to `y`.
    fn hop_acceptance(&mut self, term: &HopTerm, i: usize, y: Point) -> f64 {
        let n = self.state.len();
        let mut acc = 1.0;
        for f in &term.extra_xy {
            match *f {
                super::plan::XyFactor::Kern { kernel, k_eps, bound } => {
                    acc *= k_eps * self.state.kernel_to(kernel, y, i) / bound;
                }
                super::plan::XyFactor::ExpKern { kernel, c_eps, bound } => {
                    acc *= (c_eps * self.state.kernel_to(kernel, y, i)).exp() / bound;
                }
            }
        }
        for (s, &kmax) in term.arr_slots.iter().zip(&term.arr_kmax) {
            acc *= self.state.sum_at(s.kernel, y, Some(i)) / (kmax * n as f64);
        }
        for e in &term.arr_entries {
            acc *= (e.c_eps * self.state.sum_at(e.kernel, y, Some(i))).exp();
        }
        debug_assert!(acc <= 1.0 + 1e-9, "acceptance {acc} above 1");
        acc
    }

    /// Execute one selected event; returns whether the proposal changed the
    /// state.
    fn execute<R: Rng + ?Sized>(&mut self, totals: &Totals, mut u: f64, rng: &mut R) -> Result<bool> {
        if u < totals.death {
            let i = walk(&self.death_rates, u);
            self.state.remove(i);
            return Ok(true);
        }
        u -= totals.death;

        for (ti, term) in self.sim.births.iter().enumerate() {
            if u >= totals.births[ti] {
                u -= totals.births[ti];
                continue;
            }
            return match term {
                BirthTerm::Uniform { entries, .. } => {
                    let mut x = [0.0, 0.0];
                    for c in x.iter_mut().take(self.sim.torus.d) {
                        *c = rng.gen::<f64>() * self.sim.torus.l;
                    }
                    if entries.is_empty() {
                        self.state.insert(x);
                        Ok(true)
                    } else {
                        let acc = self.birth_acceptance(entries, x, None);
                        if rng.gen::<f64>() < acc {
                            self.state.insert(x);
                            Ok(true)
                        } else {
                            Ok(false)
                        }
                    }
                }
                BirthTerm::Parented { proposal, newborn_entries, .. } => {
                    let p = walk(&self.parent_weights[ti], u);
                    let disp = self.state.kernel(*proposal).sample_displacement(self.sim.torus.d, rng)?;
                    let xp = self.state.positions[p];
                    let x = self.sim.torus.wrap([xp[0] + disp[0], xp[1] + disp[1]]);
                    if newborn_entries.is_empty() {
                        self.state.insert(x);
                        Ok(true)
                    } else {
                        let acc = self.birth_acceptance(newborn_entries, x, Some(p));
                        if rng.gen::<f64>() < acc {
                            self.state.insert(x);
                            Ok(true)
                        } else {
                            Ok(false)
                        }
                    }
                }
            };
        }

        for (ti, term) in self.sim.hops.iter().enumerate() {
            if u >= totals.hops[ti] {
                u -= totals.hops[ti];
                continue;
            }
            let arrfac = self.arr_bound_factor(term, self.state.len());
            let i = walk(&self.hop_bases[ti], u / arrfac);
            let disp = self.state.kernel(term.proposal).sample_displacement(self.sim.torus.d, rng)?;
            let xi = self.state.positions[i];
            let y = self.sim.torus.wrap([xi[0] + disp[0], xi[1] + disp[1]]);
            let has_thinning = !term.extra_xy.is_empty()
                || !term.arr_slots.is_empty()
                || !term.arr_entries.is_empty();
            let accept = if has_thinning {
                let acc = self.hop_acceptance(term, i, y);
                rng.gen::<f64>() < acc
            } else {
                true
            };
            if accept {
                self.state.remove(i);
                self.state.insert(y);
            }
            return Ok(accept);
        }

        // Selector spilled past the last class by roundoff: a null event.
        Ok(false)
    }

    /// The exact birth intensity density at `x` given the current
    /// configuration, reassembled from the compiled schemes (proposal
    /// density × bound × acceptance). Used to cross-check the event
    /// machinery against the direct rate evaluator.
    #[cfg(test)]
    pub(crate) fn birth_intensity_at(&mut self, x: Point) -> Result<f64> {
        self.refresh()?;
        let d = self.sim.torus.d;
        let mut total = 0.0;
        for (ti, term) in self.sim.births.iter().enumerate() {
            match term {
                BirthTerm::Uniform { c, entries } => {
                    total += c * self.birth_acceptance(entries, x, None);
                }
                BirthTerm::Parented { proposal, newborn_entries, .. } => {
                    let mass = self.state.kernel(*proposal).mass(d)?;
                    for p in 0..self.state.len() {
                        let w = self.parent_weights[ti][p];
                        if w == 0.0 {
                            continue;
                        }
                        let dens = self.state.kernel_to(*proposal, x, p) / mass;
                        if dens == 0.0 {
                            continue;
                        }
                        total += w * dens * self.birth_acceptance(newborn_entries, x, Some(p));
                    }
                }
            }
        }
        Ok(total)
    }

    /// The exact hop intensity density for particle `i` jumping to `y`,
    /// reassembled from proposal × bound × acceptance.
    #[cfg(test)]
    pub(crate) fn hop_intensity_at(&mut self, i: usize, y: Point) -> Result<f64> {
        self.refresh()?;
        let d = self.sim.torus.d;
        let n = self.state.len();
        let mut total = 0.0;
        for (ti, term) in self.sim.hops.iter().enumerate() {
            let base = self.hop_bases[ti][i];
            if base == 0.0 {
                continue;
            }
            let mass = self.state.kernel(term.proposal).mass(d)?;
            let dens = self.state.kernel_to(term.proposal, y, i) / mass;
            if dens == 0.0 {
                continue;
            }
            let arrfac = self.arr_bound_factor(term, n);
            total += base * arrfac * dens * self.hop_acceptance(term, i, y);
        }
        Ok(total)
    }
}

/// Select an index from nonnegative weights by the residual selector `u`,
/// assumed < Σweights up to roundoff.
fn walk(weights: &[f64], mut u: f64) -> usize {
    debug_assert!(!weights.is_empty());
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Run one replica to the last snapshot time.
pub(crate) fn run_replica(sim: &CompiledSim, replica: usize) -> Result<ReplicaOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed.wrapping_add(replica as u64));
    let initial = sample_initial(sim.profile, &sim.torus, sim.eps, &mut rng)?;
    let mut engine = Engine::from_points(sim, initial);
    let mut out = ReplicaOutcome {
        replica,
        snapshots: Vec::with_capacity(sim.times.len()),
        events: 0,
        rejected: 0,
        truncated: false,
    };

    let mut t = 0.0f64;
    let mut next = 0usize;
    while next < sim.times.len() && sim.times[next] <= t {
        out.snapshots.push((sim.times[next], engine.state.positions.clone()));
        next += 1;
    }

    while next < sim.times.len() {
        if out.events > 0 && out.events.is_multiple_of(REBUILD_INTERVAL) {
            engine.state.rebuild();
        }
        let totals = engine.refresh()?;
        if totals.total <= 0.0 {
            // Absorbing: no event can ever fire again; the remaining
            // snapshots all see the frozen state.
            while next < sim.times.len() {
                out.snapshots.push((sim.times[next], engine.state.positions.clone()));
                next += 1;
            }
            break;
        }
        let dt = -(1.0 - rng.gen::<f64>()).ln() / totals.total;
        let t_event = t + dt;
        while next < sim.times.len() && sim.times[next] <= t_event {
            out.snapshots.push((sim.times[next], engine.state.positions.clone()));
            next += 1;
        }
        if next == sim.times.len() {
            break;
        }
        t = t_event;
        let u = rng.gen::<f64>() * totals.total;
        let accepted = engine.execute(&totals, u, &mut rng)?;
        out.events += 1;
        if !accepted {
            out.rejected += 1;
        }
        if engine.state.len() > sim.cap {
            out.truncated = true;
            while next < sim.times.len() {
                out.snapshots.push((sim.times[next], engine.state.positions.clone()));
                next += 1;
            }
            break;
        }
    }
    Ok(out)
}
