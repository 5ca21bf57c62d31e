//! `thinflow` command line. Exit codes: 0 success, 1 numerical failure,
//! 2 configuration error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::averaging::average;
use crate::config::{self, RunConfig};
use crate::discretization::{NormKind, SurfaceGrid, ThinGrid};
use crate::error::{Error, Result};
use crate::experiments::{run_lemma_rates, run_sweep};
use crate::invariants::{format_table, run_invariants};
use crate::io::{self, OutDir};
use crate::surface_solver::solve_surface;
use crate::thin_solver::{solve, ThinOperator};

#[derive(Debug, Parser)]
#[command(name = "thinflow", version, about = "Ginzburg-Landau heat flow in curved thin domains and its limit on the curve")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Nothing is written outside it.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the sweep.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Override a config key, e.g. `--set time.dt=5e-4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the geometry of every configured thin domain.
    Validate,
    /// Solve on the thin domain at `run.epsilon`.
    SolveThin,
    /// Solve the limit problem on the curve.
    SolveSurface,
    /// Average the initial data and report averaging defects at `run.epsilon`.
    Average,
    /// Run the configured checks over the epsilon ladder.
    Sweep,
    /// Run the property battery and print a pass/fail table.
    CheckInvariants,
}

fn validate(cfg: &RunConfig) -> Result<()> {
    let mut eps: Vec<f64> = cfg.sweep.epsilons.clone();
    if !eps.contains(&cfg.run_epsilon) {
        eps.push(cfg.run_epsilon);
    }
    let mut failures = Vec::new();
    println!("{:>10} {:>12} {:>12} {:>12}  status", "epsilon", "delta", "min_J", "min_g");
    for e in eps {
        let report = cfg.sweep.domain(e)?.validate();
        println!(
            "{:>10} {:>12.6} {:>12.6} {:>12.6}  {}",
            e,
            report.delta,
            report.min_jacobian,
            report.min_g,
            if report.passed() { "ok" } else { "INVALID" }
        );
        if !report.passed() {
            failures.push(Error::AtEpsilon {
                epsilon: e,
                source: Box::new(Error::InvalidDomain(report.failures)),
            });
        }
    }
    if let Some(f) = failures.into_iter().next() {
        return Err(f);
    }
    cfg.sweep.validate()
}

fn solve_thin(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let domain = cfg.thin_domain()?;
    let grid = ThinGrid::new(&domain, cfg.sweep.m_theta, cfg.sweep.m_sigma)?;
    let op = ThinOperator::new(&grid);
    let u0 = cfg.sweep.init.thin_data(&grid)?;
    let sol = solve(&op, &u0, &cfg.sweep.params, &cfg.thin_solver())?;
    io::write_trace(&out.file("trace.csv"), &sol.trace)?;
    io::write_thin_field(&out.file("field.csv"), &sol.field)?;
    for (i, (_, u)) in sol.snapshots.iter().enumerate() {
        io::write_thin_field(&out.file(&format!("snapshot_{i:03}.csv")), u)?;
    }
    let last = sol.trace.last().expect("trace has the initial record");
    println!(
        "thin run: epsilon = {}, T = {}, final |u|_L2^2 = {}, sup_t |u| = {}",
        cfg.run_epsilon,
        last.t,
        last.l2sq,
        sol.trace.max_sup()
    );
    Ok(())
}

fn solve_surface_cmd(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let grid = SurfaceGrid::new(&cfg.sweep.curve, cfg.sweep.m_theta)?;
    let v0 = cfg.sweep.init.surface_data(&grid);
    let sol = solve_surface(&grid, &v0, &cfg.sweep.params, &cfg.sweep.profile, &cfg.surface_solver())?;
    io::write_trace(&out.file("trace.csv"), &sol.trace)?;
    io::write_surface_field(&out.file("field.csv"), &sol.field)?;
    for (i, (_, v)) in sol.snapshots.iter().enumerate() {
        io::write_surface_field(&out.file(&format!("snapshot_{i:03}.csv")), v)?;
    }
    let last = sol.trace.last().expect("trace has the initial record");
    println!("surface run: T = {}, final |v|^2 = {}, sup_t |v| = {}", last.t, last.l2sq, sol.trace.max_sup());
    Ok(())
}

fn average_cmd(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    let domain = cfg.thin_domain()?;
    let grid = ThinGrid::new(&domain, cfg.sweep.m_theta, cfg.sweep.m_sigma)?;
    let u0 = cfg.sweep.init.thin_data(&grid)?;
    let mu = average(&grid, &u0)?;
    io::write_surface_field(&out.file("average.csv"), &mu)?;
    let lemma = run_lemma_rates(
        &cfg.sweep.curve,
        &cfg.sweep.profile,
        &[cfg.run_epsilon],
        cfg.sweep.m_theta,
        cfg.sweep.m_sigma,
    )?;
    io::write_defects(&out.file("defects.csv"), &lemma.rows)?;
    println!(
        "epsilon = {}: |M u0|_L2 = {}",
        cfg.run_epsilon,
        grid.surface().norm(&mu, NormKind::L2)
    );
    for r in &lemma.rows {
        println!("  {:<34} raw {:<12.4e} ratio {:.4e}", r.name, r.raw, r.ratio);
    }
    Ok(())
}

fn sweep_cmd(cfg: &RunConfig, out: &OutDir, jobs: usize) -> Result<()> {
    let mut sweep = cfg.sweep.clone();
    sweep.jobs = jobs;
    let report = run_sweep(&sweep)?;
    io::write_sweep(&out.file("sweep.csv"), &report)?;
    io::write_rates(&out.file("rates.csv"), &report.rates)?;
    for r in &report.runs {
        io::write_trace(&out.file(&format!("trace_eps_{}.csv", r.epsilon)), &r.trace)?;
        io::write_thin_field(&out.file(&format!("final_eps_{}.csv", r.epsilon)), &r.final_field)?;
    }
    if let Some(reference) = &report.reference {
        io::write_trace(&out.file("trace_reference.csv"), &reference.solution.trace)?;
    }
    if let Some(lemma) = &report.lemma {
        io::write_defects(&out.file("defects.csv"), &lemma.rows)?;
    }
    for r in &report.rates {
        match &r.fit {
            Ok(f) => println!("{:<44} slope {:.4}  max residual {:.2e}", r.name, f.slope, f.max_residual),
            Err(e) => println!("{:<44} no fit: {e}", r.name),
        }
    }
    Ok(())
}

fn check_invariants(cfg: &RunConfig, seed: u64) -> Result<bool> {
    let results = run_invariants(cfg, seed)?;
    print!("{}", format_table(&results));
    Ok(results.iter().all(|r| r.passed))
}

fn dispatch(cli: &Cli) -> Result<bool> {
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let cfg = config::load_file(cli.config.as_deref(), &cli.overrides)?;
    if let Command::Validate = cli.command {
        validate(&cfg)?;
        return Ok(true);
    }
    if let Command::CheckInvariants = cli.command {
        return check_invariants(&cfg, cli.seed);
    }
    let out = OutDir::create(&cli.out)?;
    let result = match cli.command {
        Command::SolveThin => solve_thin(&cfg, &out),
        Command::SolveSurface => solve_surface_cmd(&cfg, &out),
        Command::Average => average_cmd(&cfg, &out),
        Command::Sweep => sweep_cmd(&cfg, &out, cli.jobs),
        Command::Validate | Command::CheckInvariants => unreachable!(),
    };
    if let Err(Error::Diverged { trace, .. }) = &result {
        io::write_trace(&out.file("trace.csv"), trace)?;
    }
    result.map(|_| true)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_after_the_subcommand() {
        let cli = Cli::try_parse_from(["thinflow", "sweep", "--jobs", "3", "--set", "a.b=1", "--set", "c=2"]).unwrap();
        assert_eq!(cli.jobs, 3);
        assert_eq!(cli.overrides, vec!["a.b=1", "c=2"]);
        assert!(matches!(cli.command, Command::Sweep));
    }

    #[test]
    fn bad_usage_is_exit_2() {
        assert_eq!(run(["thinflow", "frobnicate"]), 2);
        assert_eq!(run(["thinflow", "validate", "--set", "nokey"]), 2);
        assert_eq!(run(["thinflow", "validate", "--jobs", "0"]), 2);
    }
}
