//! `vlaskit` — command-line front end for the interacting-particle toolkit.
//!
//! Subcommands:
//!
//! * `derive` — parse a generator description, print the kinetic equation
//!   its mean-field rescaling converges to, and report which terms survive
//!   the limit.
//! * `simulate` — run the rescaled particle process and emit snapshots
//!   (JSON lines, or a compact binary form with `--binary`).
//! * `solve` — integrate the derived kinetic equation on a periodic grid
//!   and emit the density as CSV.
//! * `converge` — sweep the scaling parameter, comparing empirical density
//!   and pair correlations against the kinetic solution.
//! * `selftest` — run the built-in cross-checks.
//!
//! Exit codes: `0` success, `2` usage or input errors, `3` numerical
//! failures during a run (blow-up, negative rates), `4` a selftest or
//! catalog check found a mismatch.

mod config;

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use vlaskit_core::catalog;
use vlaskit_core::config::{k_inverse, k_transform, verify_minlos, Configuration, DiscreteSpace};
use vlaskit_core::estimator::{self, SweepConfig};
use vlaskit_core::sim::{self, snapshot, InitialProfile, SimPlan};
use vlaskit_core::solver::{integrate, Grid, Program};
use vlaskit_core::{Error, Result, TorusBox};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "vlaskit", version, about = "Mean-field analysis of interacting particle systems")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output path; defaults to stdout (CSV/JSON sidecars derive from it).
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derive the kinetic equation a model rescales to.
    Derive {
        /// Catalog preset to analyse (overrides the config file).
        #[arg(long)]
        model: Option<String>,
        /// Re-derive every catalog preset and compare with its recorded
        /// equation; exits 4 on any mismatch.
        #[arg(long)]
        catalog: bool,
    },
    /// Run the rescaled particle process and emit snapshots.
    Simulate {
        #[arg(long)]
        model: Option<String>,
        /// Write snapshots in the compact binary format.
        #[arg(long)]
        binary: bool,
    },
    /// Integrate the kinetic equation on a periodic grid.
    Solve {
        #[arg(long)]
        model: Option<String>,
    },
    /// Sweep the scaling parameter and tabulate distances to the limit.
    Converge {
        #[arg(long)]
        model: Option<String>,
    },
    /// Run the built-in cross-checks.
    Selftest,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(if e.is_numerical() { 3 } else { 2 });
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cfg.threads > 0 {
        // The global pool can only be installed once; a second attempt in
        // the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match cli.cmd {
        Cmd::Derive { model, catalog } => {
            apply_model_flag(&mut cfg, model);
            if catalog {
                check_catalog()
            } else {
                cmd_derive(&cfg)
            }
        }
        Cmd::Simulate { model, binary } => {
            apply_model_flag(&mut cfg, model);
            cmd_simulate(&cfg, binary)
        }
        Cmd::Solve { model } => {
            apply_model_flag(&mut cfg, model);
            cmd_solve(&cfg)
        }
        Cmd::Converge { model } => {
            apply_model_flag(&mut cfg, model);
            cmd_converge(&cfg)
        }
        Cmd::Selftest => cmd_selftest(),
    }
}

/// `--model` on the command line beats both `model` and `model_file` from
/// the config file.
fn apply_model_flag(cfg: &mut RunConfig, model: Option<String>) {
    if let Some(m) = model {
        cfg.model = Some(m);
        cfg.model_file = None;
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(e.into())
}

// ---------------------------------------------------------------- derive

fn cmd_derive(cfg: &RunConfig) -> Result<i32> {
    let (name, gen) = cfg.build_generator()?;
    let model = gen.derive()?;
    let report = gen.scaling_report();
    println!("model: {name}");
    println!("d/dt rho = {}", model.canonical_string());
    for rule in &report.rules {
        println!("scaling: {rule}");
    }
    for part in &report.parts {
        for term in &part.terms {
            let keep = if term.survives { "kept" } else { "dropped" };
            println!("  {}: {}  [order eps^{}] {keep}", part.part, term.describe, term.order);
        }
    }
    let json = serde_json::to_string_pretty(&model).map_err(json_err)?;
    match &cfg.out {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(0)
}

fn check_catalog() -> Result<i32> {
    let mut failures = 0;
    for preset in catalog::PRESETS {
        let gen = catalog::generator(preset.name)?;
        let got = gen.derive()?.canonical_string();
        if got == preset.equation {
            println!("ok      {:<16} {got}", preset.name);
        } else {
            println!(
                "FAIL    {:<16} derived `{got}` but the catalog records `{}`",
                preset.name, preset.equation
            );
            failures += 1;
        }
    }
    Ok(if failures == 0 { 0 } else { 4 })
}

// -------------------------------------------------------------- simulate

fn build_plan(cfg: &RunConfig, eps: f64) -> Result<SimPlan> {
    Ok(SimPlan {
        torus: TorusBox::new(cfg.d, cfg.box_l)?,
        eps,
        profile: cfg.rho0,
        times: cfg.times.clone(),
        replicas: cfg.replicas,
        seed: cfg.seed,
        max_particles: cfg.max_particles,
    })
}

fn cmd_simulate(cfg: &RunConfig, binary_flag: bool) -> Result<i32> {
    let (name, gen) = cfg.build_generator()?;
    if cfg.eps.len() != 1 {
        return Err(Error::Config(format!(
            "simulate runs a single scale; `eps` lists {} values (use `converge` for sweeps)",
            cfg.eps.len()
        )));
    }
    let plan = build_plan(cfg, cfg.eps[0])?;
    let result = sim::run_ensemble(&gen, &plan)?;
    let records = snapshot::records(&result, cfg.d);
    let binary = binary_flag || cfg.binary;
    match (&cfg.out, binary) {
        (Some(p), true) => {
            snapshot::write_binary(BufWriter::new(File::create(p)?), cfg.d, &records)?
        }
        (Some(p), false) => snapshot::write_jsonl(BufWriter::new(File::create(p)?), &records)?,
        (None, true) => snapshot::write_binary(io::stdout().lock(), cfg.d, &records)?,
        (None, false) => snapshot::write_jsonl(io::stdout().lock(), &records)?,
    }
    eprintln!(
        "{name}: {} replicas, {} events, {} truncated",
        result.replicas.len(),
        result.events,
        result.truncated
    );
    Ok(0)
}

// ----------------------------------------------------------------- solve

fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let (name, gen) = cfg.build_generator()?;
    let model = gen.derive()?;
    let equation = model.canonical_string();
    let grid = Grid::new(cfg.d, cfg.grid, cfg.box_l)?;
    let mut program = Program::new(model, grid)?;
    let rho0 = estimator::profile_field(grid, cfg.rho0);
    let result = integrate(&mut program, rho0, &cfg.times, cfg.dt)?;

    let mut csv = String::from(if cfg.d == 1 { "t,x,rho\n" } else { "t,x,y,rho\n" });
    for (t, field) in &result.snapshots {
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            if cfg.d == 1 {
                csv.push_str(&format!("{t},{},{}\n", p[0], field.data[idx]));
            } else {
                csv.push_str(&format!("{t},{},{},{}\n", p[0], p[1], field.data[idx]));
            }
        }
    }
    match &cfg.out {
        Some(p) => {
            std::fs::write(p, &csv)?;
            let sidecar = serde_json::json!({
                "model": name,
                "equation": equation,
                "d": cfg.d,
                "box": cfg.box_l,
                "grid": cfg.grid,
                "dt": cfg.dt,
                "steps": result.steps,
                "times": cfg.times,
            });
            let body = serde_json::to_string_pretty(&sidecar).map_err(json_err)?;
            std::fs::write(p.with_extension("json"), body + "\n")?;
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

// -------------------------------------------------------------- converge

fn cmd_converge(cfg: &RunConfig) -> Result<i32> {
    let (name, gen) = cfg.build_generator()?;
    let sweep = SweepConfig {
        torus: TorusBox::new(cfg.d, cfg.box_l)?,
        profile: cfg.rho0,
        t: *cfg.times.last().expect("config guarantees at least one time"),
        eps: cfg.eps.clone(),
        replicas: cfg.replicas,
        seed: cfg.seed,
        grid_n: cfg.grid,
        dt: cfg.dt,
        g2_bins: cfg.g2_bins,
        max_particles: cfg.max_particles,
    };
    let report = estimator::convergence_sweep(&gen, &name, &sweep)?;
    if report.truncated_replicas > 0 {
        eprintln!(
            "warning: {} replicas hit the population cap; distances are biased",
            report.truncated_replicas
        );
    }
    match &cfg.out {
        Some(p) => {
            std::fs::write(p, report.csv())?;
            std::fs::write(p.with_extension("json"), report.json()? + "\n")?;
        }
        None => print!("{}", report.csv()),
    }
    Ok(0)
}

// -------------------------------------------------------------- selftest

type Check = fn() -> std::result::Result<(), String>;

fn cmd_selftest() -> Result<i32> {
    let checks: &[(&str, Check)] = &[
        ("catalog derivations", check_catalog_quick),
        ("combinatorial transform round trip", check_k_roundtrip),
        ("factorization identity", check_minlos),
        ("kinetic solver closed form", check_solver_closed_form),
        ("simulation determinism", check_sim_determinism),
        ("pair statistics on independent points", check_g2_poisson),
    ];
    let mut failures = 0;
    for (name, f) in checks {
        match f() {
            Ok(()) => println!("ok      {name}"),
            Err(msg) => {
                println!("FAIL    {name}: {msg}");
                failures += 1;
            }
        }
    }
    if failures == 0 {
        println!("selftest: all checks passed");
        Ok(0)
    } else {
        Ok(4)
    }
}

fn check_catalog_quick() -> std::result::Result<(), String> {
    for preset in catalog::PRESETS {
        let gen = catalog::generator(preset.name).map_err(|e| e.to_string())?;
        let got = gen.derive().map_err(|e| e.to_string())?.canonical_string();
        if got != preset.equation {
            return Err(format!("{}: derived `{got}`, recorded `{}`", preset.name, preset.equation));
        }
    }
    Ok(())
}

/// Deterministic test function on finite configurations: smooth in the
/// points, not multiplicative, so the transform has no shortcuts.
fn probe_fn(eta: &Configuration) -> f64 {
    let s: f64 = eta.points().iter().map(|p| (1.3 * p[0]).sin() + 0.7).sum();
    (0.37 * eta.len() as f64).cos() + 0.25 * s
}

fn check_k_roundtrip() -> std::result::Result<(), String> {
    let sites: Vec<_> = (0..5).map(|i| [0.8 * i as f64, 0.0]).collect();
    let base = Configuration::new(sites).map_err(|e| e.to_string())?;
    for mask in 0..(1u32 << base.len()) {
        let eta = base.subset(mask);
        let back = k_inverse(|xi| k_transform(probe_fn, xi).unwrap(), &eta)
            .map_err(|e| e.to_string())?;
        let want = probe_fn(&eta);
        if (back - want).abs() > 1e-12 * (1.0 + want.abs()) {
            return Err(format!("round trip off by {:.3e} on |eta|={}", back - want, eta.len()));
        }
    }
    Ok(())
}

fn check_minlos() -> std::result::Result<(), String> {
    let sites: Vec<_> = (0..6).map(|i| [0.5 * i as f64, 0.0]).collect();
    let space = DiscreteSpace::new(sites, 0.4).map_err(|e| e.to_string())?;
    let h = |gamma: &Configuration, eta: &Configuration, xi: &Configuration| -> f64 {
        probe_fn(gamma) * (0.11 * eta.len() as f64 + 0.05).exp() * (1.0 + 0.2 * xi.len() as f64)
    };
    let (lhs, rhs) = verify_minlos(h, &space).map_err(|e| e.to_string())?;
    let scale = 1.0 + lhs.abs().max(rhs.abs());
    if (lhs - rhs).abs() > 1e-12 * scale {
        return Err(format!("sides differ: {lhs} vs {rhs}"));
    }
    Ok(())
}

fn check_solver_closed_form() -> std::result::Result<(), String> {
    let gen = catalog::generator("surgailis").map_err(|e| e.to_string())?;
    let model = gen.derive().map_err(|e| e.to_string())?;
    let m = model.params["m"];
    let sigma = model.params["sigma"];
    let grid = Grid::new(1, 16, 10.0).map_err(|e| e.to_string())?;
    let mut program = Program::new(model, grid).map_err(|e| e.to_string())?;
    let rho0 = estimator::profile_field(grid, InitialProfile::Constant(2.0));
    let result =
        integrate(&mut program, rho0, &[1.0], 1e-3).map_err(|e| e.to_string())?;
    let want = sigma / m + (2.0 - sigma / m) * (-m).exp();
    let got = result.snapshots[0].1.data[0];
    if (got - want).abs() > 1e-8 {
        return Err(format!("rho(1) = {got}, closed form {want}"));
    }
    Ok(())
}

fn check_sim_determinism() -> std::result::Result<(), String> {
    let gen = catalog::generator("bdlp").map_err(|e| e.to_string())?;
    let plan = SimPlan {
        torus: TorusBox::new(1, 6.0).map_err(|e| e.to_string())?,
        eps: 1.0,
        profile: InitialProfile::Constant(1.0),
        times: vec![0.5],
        replicas: 8,
        seed: 99,
        max_particles: 0,
    };
    let a = sim::run_ensemble(&gen, &plan).map_err(|e| e.to_string())?;
    let b = sim::run_ensemble(&gen, &plan).map_err(|e| e.to_string())?;
    if snapshot::records(&a, 1) != snapshot::records(&b, 1) {
        return Err("same seed produced different snapshots".into());
    }
    let plan2 = SimPlan { seed: 100, ..plan };
    let c = sim::run_ensemble(&gen, &plan2).map_err(|e| e.to_string())?;
    if snapshot::records(&a, 1) == snapshot::records(&c, 1) {
        return Err("different seeds produced identical snapshots".into());
    }
    Ok(())
}

fn check_g2_poisson() -> std::result::Result<(), String> {
    // Snapshot the initial state only: the sampler is Poisson, so the pair
    // correlation must be flat at 1 within sampling error.
    let gen = catalog::generator("surgailis").map_err(|e| e.to_string())?;
    let torus = TorusBox::new(1, 10.0).map_err(|e| e.to_string())?;
    let plan = SimPlan {
        torus,
        eps: 0.1,
        profile: InitialProfile::Constant(1.0),
        times: vec![0.0],
        replicas: 50,
        seed: 7,
        max_particles: 0,
    };
    let result = sim::run_ensemble(&gen, &plan).map_err(|e| e.to_string())?;
    let g2 = estimator::empirical_g2(&result, 0.0, &torus, 20, 11).map_err(|e| e.to_string())?;
    let sup = g2.sup_abs_minus_one(estimator::MIN_DENSE_PAIRS);
    if !(sup > 0.0 && sup < 0.2) {
        return Err(format!("sup |g2 - 1| = {sup} on Poisson points"));
    }
    Ok(())
}
