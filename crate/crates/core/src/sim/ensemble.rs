//! Replica ensembles: compile once, run replicas in parallel, return them
//! in index order.
//!
//! Replica `r` is seeded with `seed + r`, so the ensemble is a pure
//! function of the plan — thread count and scheduling cannot change any
//! trajectory, only wall time.

use rayon::prelude::*;

use crate::dsl::Generator;
use crate::error::Result;

use super::engine::{run_replica, ReplicaOutcome};
use super::plan::{CompiledSim, SimPlan};

/// All replica trajectories of one plan, plus run-level accounting.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub replicas: Vec<ReplicaOutcome>,
    /// Snapshot times shared by every replica.
    pub times: Vec<f64>,
    /// Total proposals across replicas.
    pub events: u64,
    /// Replicas that hit the population cap.
    pub truncated: usize,
}

/// Compile `gen` against `plan` and run every replica.
pub fn run_ensemble(gen: &Generator, plan: &SimPlan) -> Result<EnsembleResult> {
    let sim = CompiledSim::compile(gen, plan)?;
    run_compiled(&sim)
}

/// Run every replica of an already-compiled plan.
pub fn run_compiled(sim: &CompiledSim) -> Result<EnsembleResult> {
    let replicas: Vec<ReplicaOutcome> = (0..sim.replicas)
        .into_par_iter()
        .map(|r| run_replica(sim, r))
        .collect::<Result<_>>()?;
    let events = replicas.iter().map(|r| r.events).sum();
    let truncated = replicas.iter().filter(|r| r.truncated).count();
    Ok(EnsembleResult { replicas, times: sim.times.clone(), events, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::geometry::TorusBox;
    use crate::sim::plan::{InitialProfile, SimPlan};
    use crate::stats::mean_and_se;

    fn plan(eps: f64, times: Vec<f64>, replicas: usize, seed: u64) -> SimPlan {
        SimPlan {
            torus: TorusBox::new(1, 10.0).unwrap(),
            eps,
            profile: InitialProfile::Constant(1.0),
            times,
            replicas,
            seed,
            max_particles: 0,
        }
    }

    /// Pure death from a Poisson start: the renormalized count ε·N(t) has
    /// mean ρ₀·L·e^{−mt}. 300 replicas put the Monte Carlo error near
    /// 0.4%, so a 4-sigma band is a sharp but reliable check.
    #[test]
    fn pure_death_matches_the_exponential_decay_law() {
        let gen = crate::dsl::Generator::from_source("const m = 0.7;\ndeath = m;").unwrap();
        let p = plan(0.05, vec![1.0], 300, 42);
        let result = run_ensemble(&gen, &p).unwrap();
        assert_eq!(result.truncated, 0);
        let counts: Vec<f64> = result
            .replicas
            .iter()
            .map(|r| r.snapshots[0].1.len() as f64 * p.eps)
            .collect();
        let (mean, se) = mean_and_se(&counts);
        let want = 1.0 * 10.0 * (-0.7f64).exp();
        assert!(
            (mean - want).abs() < 4.0 * se,
            "renormalized count {mean:.4} ± {se:.4} vs expected {want:.4}"
        );
        // Poisson thinning makes N(t) Poisson(ρLe^{−mt}/ε): SE ≈ 0.029.
        assert!(se < 0.05, "standard error {se} unexpectedly large");
    }

    /// Immigration–death at ε = 1: E[N(t)] solves N' = σ − mN exactly, so
    /// the ensemble mean must track σ/m + (ρ₀L − σ/m)e^{−mt} at every
    /// snapshot, not just at stationarity.
    #[test]
    fn immigration_death_tracks_the_mean_ode() {
        let gen = catalog::generator("surgailis").unwrap();
        let p = plan(1.0, vec![0.5, 1.5, 4.0], 400, 7);
        let result = run_ensemble(&gen, &p).unwrap();
        // m = 1, sigma = 2: stationary count σL/m = 20, initial 10.
        for (k, &t) in p.times.iter().enumerate() {
            let counts: Vec<f64> =
                result.replicas.iter().map(|r| r.snapshots[k].1.len() as f64).collect();
            let (mean, se) = mean_and_se(&counts);
            let want = 20.0 + (10.0 - 20.0) * (-t).exp();
            assert!(
                (mean - want).abs() < 4.0 * se,
                "t={t}: count {mean:.3} ± {se:.3} vs ODE mean {want:.3}"
            );
        }
    }

    /// Hops conserve the particle count pathwise.
    #[test]
    fn free_kawasaki_conserves_the_count_on_every_path() {
        let gen = catalog::generator("free_kawasaki").unwrap();
        let p = plan(0.2, vec![0.0, 1.0, 3.0], 12, 11);
        let result = run_ensemble(&gen, &p).unwrap();
        for r in &result.replicas {
            let n0 = r.snapshots[0].1.len();
            for (t, pts) in &r.snapshots {
                assert_eq!(pts.len(), n0, "replica {} changed count by t={t}", r.replica);
            }
            assert!(r.events > 0, "replica {} never moved", r.replica);
        }
    }

    /// Two runs with one seed agree event-for-event; changing the seed
    /// changes the trajectories.
    #[test]
    fn ensembles_are_deterministic_in_the_seed() {
        let gen = catalog::generator("bdlp").unwrap();
        let p = plan(0.5, vec![0.5, 1.0], 6, 1234);
        let a = run_ensemble(&gen, &p).unwrap();
        let b = run_ensemble(&gen, &p).unwrap();
        assert_eq!(a.events, b.events);
        for (ra, rb) in a.replicas.iter().zip(&b.replicas) {
            assert_eq!(ra.events, rb.events);
            for ((ta, pa), (tb, pb)) in ra.snapshots.iter().zip(&rb.snapshots) {
                assert_eq!(ta, tb);
                assert_eq!(pa, pb, "positions diverged in replica {}", ra.replica);
            }
        }
        let p2 = plan(0.5, vec![0.5, 1.0], 6, 4321);
        let c = run_ensemble(&gen, &p2).unwrap();
        assert_ne!(
            a.replicas[0].snapshots[0].1, c.replicas[0].snapshots[0].1,
            "different seeds should give different paths"
        );
    }

    /// Super-linear birth with no competition explodes; the cap must flag
    /// the replica instead of hanging or dropping it.
    #[test]
    fn runaway_growth_is_flagged_as_truncated() {
        let gen = crate::dsl::Generator::from_source(
            "const lambda = 6.0;\n\
             kernel a tophat(0.5) scale eps;\n\
             kernel b tophat(0.5) scale eps;\n\
             death = 0.01;\n\
             birth = 1 scale inveps * sum[p in gamma] a(x-p) * (lambda + sum[u in gamma\\p] b(p-u));",
        )
        .unwrap();
        let mut p = plan(0.02, vec![50.0], 2, 5);
        p.max_particles = 3_000;
        let result = run_ensemble(&gen, &p).unwrap();
        assert_eq!(result.truncated, 2, "both replicas should blow past the cap");
        for r in &result.replicas {
            assert!(r.truncated);
            assert_eq!(r.snapshots.len(), 1, "frozen snapshots still recorded");
            assert!(r.snapshots[0].1.len() > 3_000);
        }
    }
}
