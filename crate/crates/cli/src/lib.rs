//! Command-line driver: convergence studies and single solves with VTK
//! output.

pub mod config;
pub mod vtk;

use std::path::Path;

use anyhow::{Context, Result};
use biot_core::mms::Benchmark;
use biot_core::norms::{ErrorMeter, ErrorReport, ErrorRow};
use biot_core::study::{run_convergence, Discretization};
use biot_core::timestepping::{FieldSources, Integrator, NodeState, TimeMesh, Trajectory};
use clap::{Parser, Subcommand};

pub use config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "biot", version, about = "Space-time H(div) DG solver for the dynamic Biot model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the benchmark on a sequence of levels and print the error table
    Convergence(Flags),
    /// Run the benchmark on one level, optionally writing VTK snapshots
    Solve(Flags),
}

/// A failed run, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration.
    Usage(anyhow::Error),
    /// Solver, invariant or I/O failure.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

/// One solved level with everything needed for output.
pub struct SolvedLevel {
    pub disc: Discretization,
    pub trajectory: Trajectory,
    pub row: ErrorRow,
}

/// Solves the benchmark on `level` and keeps the trajectory.
pub fn solve_level(config: &RunConfig, level: usize) -> Result<SolvedLevel> {
    let s = &config.study;
    let disc = Discretization::new(s.base_cells, s.diagonal, level, s.l, &s.params)?;
    let bench = Benchmark::new(s.params);
    let tau = s.tau(level);
    let time = TimeMesh::with_step(s.end_time, tau)?;
    let sources = FieldSources {
        vector: &disc.vector,
        pressure: &disc.pressure,
        f: |x, t| bench.momentum_source(x, t),
        g: |x, t| bench.mass_source(x, t),
    };
    let mut integrator = Integrator::new(&disc.ops, s.params, s.k)?;
    if s.check_pressure_mean {
        integrator.check_pressure_mean(disc.pressure_ones()?);
    }
    let initial = NodeState::from_exact(&disc.vector, &disc.pressure, &bench, 0.0)?;
    let mut meter = ErrorMeter::new(&disc.vector, &disc.pressure, &bench, s.samples)?;
    let basis = integrator.temporal().trial.clone();
    let mut slabs = Vec::with_capacity(time.num_slabs());
    integrator
        .run_with(&time, 0, initial, &sources, |slab| {
            meter.observe(slab, &basis);
            slabs.push(slab.clone());
            Ok(())
        })
        .with_context(|| format!("level {level}"))?;
    let trajectory = Trajectory {
        temporal: integrator.temporal().clone(),
        slabs,
    };
    let row = ErrorRow {
        level,
        tau,
        h: disc.mesh.max_diameter(),
        errors: meter.maxima(),
    };
    Ok(SolvedLevel { disc, trajectory, row })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Prints the table and writes the optional CSV and table files.
pub fn emit(config: &RunConfig, report: &ErrorReport) -> Result<()> {
    let table = report.to_table();
    print!("{table}");
    if let Some(path) = &config.csv {
        write(path, &report.to_csv())?;
    }
    if let Some(path) = &config.table {
        write(path, &table)?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let (flags, solve) = match &cli.command {
        Command::Convergence(f) => (f, false),
        Command::Solve(f) => (f, true),
    };
    let config = RunConfig::resolve(flags).map_err(Failure::Usage)?;
    let runtime = |config: &RunConfig| -> Result<()> {
        if solve {
            let solved = solve_level(config, config.level)?;
            emit(config, &ErrorReport { rows: vec![solved.row.clone()] })?;
            if !config.export_times.is_empty() {
                let n = config.subdivisions.unwrap_or(config.study.l + 2);
                let paths = vtk::export_fields(
                    &solved.disc.vector,
                    &solved.disc.pressure,
                    &solved.trajectory,
                    &config.export_times,
                    &config.export_dir,
                    n,
                )?;
                eprintln!("wrote {} VTK files to {}", paths.len(), config.export_dir.display());
            }
        } else {
            let report = run_convergence(&config.study, config.parallel_levels)?;
            emit(config, &report)?;
        }
        Ok(())
    };
    runtime(&config).map_err(Failure::Runtime)
}
