//! Empirical statistics of snapshot ensembles and the convergence report.
//!
//! Two estimators close the loop between the particle simulation and the
//! kinetic solver:
//!
//! * the renormalized one-point density — per grid cell,
//!   `ε·count/(h^d·replicas)` — compared against the solved density in the
//!   grid L² norm;
//! * the pair-correlation function `g₂(r)` on distance bins, as a ratio
//!   estimator normalized by each replica's own pair count, so it needs no
//!   external intensity and is exactly 1 in expectation for a Poisson
//!   ensemble.
//!
//! Both carry replica-resampling (bootstrap) standard errors: replicas are
//! the independent unit, everything inside a replica is correlated. The
//! [`convergence_sweep`] driver runs the full comparison — derive the
//! limit, solve it, simulate at a ladder of ε values, estimate, tabulate —
//! and serializes to CSV and JSON.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dsl::Generator;
use crate::error::{Error, Result};
use crate::geometry::{Point, TorusBox};
use crate::sim::{run_ensemble, EnsembleResult, InitialProfile, SimPlan};
use crate::solver::{integrate, DensityField, Grid, Program};
use crate::stats;

/// Bootstrap resample count used by the report driver.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Bins with fewer pooled pairs than this are skipped by the g₂ sup — a
/// near-empty bin estimates 0/0 and would drown the statistic in noise.
pub const MIN_DENSE_PAIRS: f64 = 25.0;

/// Per-replica, per-cell particle counts at one snapshot time.
#[derive(Debug, Clone)]
pub struct BinnedDensity {
    pub grid: Grid,
    pub eps: f64,
    pub t: f64,
    /// `counts[replica][cell]`.
    pub counts: Vec<Vec<u32>>,
}

/// Locate a requested time among the recorded snapshot times.
fn time_index(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|&x| (x - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or_else(|| {
            Error::Config(format!("time {t} is not among the recorded snapshots {times:?}"))
        })
}

/// Grid cell of a wrapped position: cell `i` covers `[i·h, (i+1)·h)`.
fn cell_index(grid: &Grid, p: Point) -> usize {
    let h = grid.h();
    let ix = ((p[0] / h) as usize).min(grid.n - 1);
    match grid.d {
        1 => ix,
        _ => ix * grid.n + ((p[1] / h) as usize).min(grid.n - 1),
    }
}

/// Histogram every replica's configuration at time `t` onto the grid.
pub fn bin_ensemble(result: &EnsembleResult, t: f64, eps: f64, grid: Grid) -> Result<BinnedDensity> {
    let ti = time_index(&result.times, t)?;
    let counts = result
        .replicas
        .iter()
        .map(|r| {
            let mut c = vec![0u32; grid.len()];
            for p in &r.snapshots[ti].1 {
                c[cell_index(&grid, *p)] += 1;
            }
            c
        })
        .collect();
    Ok(BinnedDensity { grid, eps, t, counts })
}

impl BinnedDensity {
    pub fn replicas(&self) -> usize {
        self.counts.len()
    }

    /// Mean of `ε·count/h^d` over a replica subset, as a field.
    fn mean_field(&self, idx: &[usize]) -> DensityField {
        let scale = self.eps / self.grid.cell_volume() / idx.len() as f64;
        let mut data = vec![0.0; self.grid.len()];
        for &r in idx {
            for (cell, &c) in self.counts[r].iter().enumerate() {
                data[cell] += c as f64;
            }
        }
        for v in &mut data {
            *v *= scale;
        }
        DensityField { grid: self.grid, data }
    }

    /// Renormalized empirical density with per-cell standard errors over
    /// replicas.
    pub fn density(&self) -> (DensityField, Vec<f64>) {
        let r = self.replicas();
        let all: Vec<usize> = (0..r).collect();
        let mean = self.mean_field(&all);
        let scale = self.eps / self.grid.cell_volume();
        let mut se = vec![0.0; self.grid.len()];
        if r > 1 {
            for (cell, s) in se.iter_mut().enumerate() {
                let vals: Vec<f64> =
                    (0..r).map(|rep| self.counts[rep][cell] as f64 * scale).collect();
                *s = stats::mean_and_se(&vals).1;
            }
        }
        (mean, se)
    }

    /// Grid L² distance of the ensemble-mean density to a target field.
    pub fn l2_to(&self, target: &DensityField) -> f64 {
        let all: Vec<usize> = (0..self.replicas()).collect();
        self.mean_field(&all).l2_distance(target)
    }

    /// The L² distance together with its replica-bootstrap standard error.
    pub fn l2_bootstrap(&self, target: &DensityField, resamples: usize, seed: u64) -> (f64, f64) {
        let point = self.l2_to(target);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let se = stats::bootstrap_se(self.replicas(), resamples, &mut rng, |idx| {
            self.mean_field(idx).l2_distance(target)
        });
        (point, se)
    }
}

/// Pair-correlation estimate on distance bins over `(0, L/2]`.
#[derive(Debug, Clone)]
pub struct G2Estimate {
    /// `bins + 1` edges, `edges[0] = 0`.
    pub edges: Vec<f64>,
    /// Ratio estimate per bin; exactly 1 in expectation for Poisson input.
    pub values: Vec<f64>,
    /// Replica-bootstrap standard error per bin.
    pub se: Vec<f64>,
    /// Pooled pair counts per bin (diagnostic; see [`MIN_DENSE_PAIRS`]).
    pub pairs: Vec<f64>,
    /// Per-replica pair histograms, kept for sup-statistic bootstraps.
    hists: Vec<Vec<f64>>,
    /// Per-replica `N(N−1)/2`.
    half_pairs: Vec<f64>,
    /// Normalized shell volume `v_b/V` per bin.
    shell: Vec<f64>,
}

/// Estimate `g₂` at time `t` by pooling min-image pair distances.
pub fn empirical_g2(
    result: &EnsembleResult,
    t: f64,
    torus: &TorusBox,
    bins: usize,
    seed: u64,
) -> Result<G2Estimate> {
    if bins == 0 {
        return Err(Error::Config("g2 needs at least one distance bin".into()));
    }
    let ti = time_index(&result.times, t)?;
    let rmax = torus.l / 2.0;
    let width = rmax / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| b as f64 * width).collect();
    // Normalized shell volume of each bin: the fraction of the box at
    // min-image distance within the bin (2Δ/L on the circle, annulus/L² on
    // the 2-torus; exact for radii up to L/2).
    let shell: Vec<f64> = (0..bins)
        .map(|b| match torus.d {
            1 => 2.0 * width / torus.l,
            _ => {
                std::f64::consts::PI * (edges[b + 1] * edges[b + 1] - edges[b] * edges[b])
                    / (torus.l * torus.l)
            }
        })
        .collect();

    let per_replica: Vec<(Vec<f64>, f64)> = result
        .replicas
        .par_iter()
        .map(|r| {
            let pts = &r.snapshots[ti].1;
            let mut hist = vec![0.0; bins];
            for i in 0..pts.len() {
                for j in 0..i {
                    let dist = torus.distance(pts[i], pts[j]);
                    if dist > 0.0 && dist <= rmax {
                        let mut b = (dist / width) as usize;
                        if b >= bins {
                            b = bins - 1;
                        }
                        hist[b] += 1.0;
                    }
                }
            }
            let n = pts.len() as f64;
            (hist, n * (n - 1.0) / 2.0)
        })
        .collect();

    let hists: Vec<Vec<f64>> = per_replica.iter().map(|(h, _)| h.clone()).collect();
    let half_pairs: Vec<f64> = per_replica.iter().map(|&(_, q)| q).collect();

    let ratio = |idx: &[usize], b: usize| -> f64 {
        let num: f64 = idx.iter().map(|&r| hists[r][b]).sum();
        let den: f64 = idx.iter().map(|&r| half_pairs[r]).sum::<f64>() * shell[b];
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };

    let all: Vec<usize> = (0..hists.len()).collect();
    let values: Vec<f64> = (0..bins).map(|b| ratio(&all, b)).collect();
    let pairs: Vec<f64> = (0..bins).map(|b| all.iter().map(|&r| hists[r][b]).sum()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let se: Vec<f64> = (0..bins)
        .map(|b| stats::bootstrap_se(hists.len(), BOOTSTRAP_RESAMPLES, &mut rng, |idx| ratio(idx, b)))
        .collect();

    Ok(G2Estimate { edges, values, se, pairs, hists, half_pairs, shell })
}

impl G2Estimate {
    fn sup_of(&self, idx: &[usize], min_pairs: f64) -> f64 {
        let mut sup = 0.0f64;
        for b in 0..self.values.len() {
            if self.pairs[b] < min_pairs {
                continue;
            }
            let num: f64 = idx.iter().map(|&r| self.hists[r][b]).sum();
            let den: f64 = idx.iter().map(|&r| self.half_pairs[r]).sum::<f64>() * self.shell[b];
            if den > 0.0 {
                sup = sup.max((num / den - 1.0).abs());
            }
        }
        sup
    }

    /// `sup_b |g₂(b) − 1|` over dense bins.
    pub fn sup_abs_minus_one(&self, min_pairs: f64) -> f64 {
        let all: Vec<usize> = (0..self.hists.len()).collect();
        self.sup_of(&all, min_pairs)
    }

    /// The sup statistic with its replica-bootstrap standard error.
    pub fn sup_bootstrap(&self, min_pairs: f64, resamples: usize, seed: u64) -> (f64, f64) {
        let point = self.sup_abs_minus_one(min_pairs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let se = stats::bootstrap_se(self.hists.len(), resamples, &mut rng, |idx| {
            self.sup_of(idx, min_pairs)
        });
        (point, se)
    }
}

/// The density field a profile induces on a grid.
pub fn profile_field(grid: Grid, profile: InitialProfile) -> DensityField {
    match profile {
        InitialProfile::Constant(c) => DensityField::constant(grid, c),
        InitialProfile::Cosine { base, amp } => DensityField::from_fn(grid, |p| {
            base + amp * (std::f64::consts::TAU * p[0] / grid.l).cos()
        }),
    }
}

/// One ε rung of the convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub l2_k1: f64,
    pub l2_err: f64,
    pub sup_g2m1: f64,
    pub g2_err: f64,
    pub replicas: usize,
}

/// Full convergence report: metadata plus one row per ε.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub model: String,
    pub equation: String,
    pub d: usize,
    pub box_length: f64,
    pub grid_n: usize,
    pub t: f64,
    pub seed: u64,
    pub truncated_replicas: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Tabular form, one header line and one row per ε.
    pub fn csv(&self) -> String {
        let mut out = String::from("eps,l2_k1,l2_err,sup_g2m1,g2_err,replicas\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.eps, r.l2_k1, r.l2_err, r.sup_g2m1, r.g2_err, r.replicas
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Pretty JSON with run metadata.
    pub fn json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
    }
}

/// Inputs of a convergence sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub torus: TorusBox,
    pub profile: InitialProfile,
    pub t: f64,
    pub eps: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub grid_n: usize,
    pub dt: f64,
    pub g2_bins: usize,
    pub max_particles: usize,
}

/// Derive the kinetic limit, solve it to time `t` once, then simulate the
/// particle process at every requested ε and tabulate both distances.
pub fn convergence_sweep(
    gen: &Generator,
    model_name: &str,
    cfg: &SweepConfig,
) -> Result<ConvergenceReport> {
    if cfg.eps.is_empty() {
        return Err(Error::Config("convergence sweep needs at least one eps".into()));
    }
    let model = gen.derive()?;
    let grid = Grid::new(cfg.torus.d, cfg.grid_n, cfg.torus.l)?;
    let mut program = Program::new(model.clone(), grid)?;
    let rho0 = profile_field(grid, cfg.profile);
    let solved = integrate(&mut program, rho0, &[cfg.t], cfg.dt)?;
    let target = &solved.snapshots[0].1;

    let mut rows = Vec::with_capacity(cfg.eps.len());
    let mut truncated = 0usize;
    for (k, &eps) in cfg.eps.iter().enumerate() {
        let plan = SimPlan {
            torus: cfg.torus,
            eps,
            profile: cfg.profile,
            times: vec![cfg.t],
            replicas: cfg.replicas,
            seed: cfg.seed,
            max_particles: cfg.max_particles,
        };
        let ens = run_ensemble(gen, &plan)?;
        truncated += ens.truncated;
        let binned = bin_ensemble(&ens, cfg.t, eps, grid)?;
        let boot_seed = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64);
        let (l2, l2_err) = binned.l2_bootstrap(target, BOOTSTRAP_RESAMPLES, boot_seed);
        let g2 = empirical_g2(&ens, cfg.t, &cfg.torus, cfg.g2_bins, boot_seed ^ 0xabcd)?;
        let (sup, g2_err) = g2.sup_bootstrap(MIN_DENSE_PAIRS, BOOTSTRAP_RESAMPLES, boot_seed ^ 0xdcba);
        rows.push(ConvergenceRow {
            eps,
            l2_k1: l2,
            l2_err,
            sup_g2m1: sup,
            g2_err,
            replicas: cfg.replicas,
        });
    }

    Ok(ConvergenceReport {
        model: model_name.to_string(),
        equation: model.equation.canonical_string(),
        d: cfg.torus.d,
        box_length: cfg.torus.l,
        grid_n: cfg.grid_n,
        t: cfg.t,
        seed: cfg.seed,
        truncated_replicas: truncated,
        rows,
    })
}
