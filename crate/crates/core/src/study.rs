//! Convergence studies on the manufactured benchmark.

use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{ModelParameters, OperatorSet};
use crate::error::{Error, Result};
use crate::mesh::{unit_square_mesh, Diagonal, Mesh};
use crate::mms::{default_parameters, Benchmark};
use crate::norms::{ErrorMeter, ErrorReport, ErrorRow, DEFAULT_SAMPLES};
use crate::spaces::{ElementKind, FeSpace};
use crate::timestepping::{FieldSources, Integrator, NodeState, TimeMesh};

/// Setup of one convergence study. The defaults are the benchmark setup:
/// 5x5 base mesh, `tau_0 = 1/10`, `T = 1`, 100 samples per slab.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Polynomial degree in time.
    pub k: usize,
    /// Pressure degree; the vector fields use BDM of order `l + 1`.
    pub l: usize,
    pub levels: usize,
    /// First refinement level; levels run `first_level..first_level + levels`.
    pub first_level: usize,
    pub base_cells: usize,
    pub diagonal: Diagonal,
    pub tau0: f64,
    pub end_time: f64,
    pub params: ModelParameters,
    pub samples: usize,
    /// Check the pressure mean after every slab.
    pub check_pressure_mean: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            k: 1,
            l: 1,
            levels: 4,
            first_level: 0,
            base_cells: 5,
            diagonal: Diagonal::Forward,
            tau0: 0.1,
            end_time: 1.0,
            params: default_parameters(),
            samples: DEFAULT_SAMPLES,
            check_pressure_mean: true,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(Error::InvalidArgument(format!("k must be 1, 2 or 3, got {}", self.k)));
        }
        if self.l > 2 {
            return Err(Error::InvalidArgument(format!("l must be 0, 1 or 2, got {}", self.l)));
        }
        if self.levels == 0 || self.base_cells == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("levels, base mesh size and samples must be positive".into()));
        }
        if !(self.tau0 > 0.0) || !(self.end_time > 0.0) {
            return Err(Error::InvalidArgument("tau_0 and T must be positive".into()));
        }
        self.params.validate(false)
    }

    pub fn tau(&self, level: usize) -> f64 {
        self.tau0 / (1u64 << level) as f64
    }
}

/// Mesh, spaces and operators of one refinement level.
pub struct Discretization {
    pub level: usize,
    pub mesh: Arc<Mesh>,
    pub vector: FeSpace,
    pub pressure: FeSpace,
    pub ops: OperatorSet,
}

impl Discretization {
    pub fn new(base_cells: usize, diagonal: Diagonal, level: usize, l: usize, params: &ModelParameters) -> Result<Self> {
        let mesh = Arc::new(unit_square_mesh(base_cells, diagonal)?.refined(level));
        Self::on_mesh(mesh, level, l, params)
    }

    pub fn on_mesh(mesh: Arc<Mesh>, level: usize, l: usize, params: &ModelParameters) -> Result<Self> {
        let vector = FeSpace::new(mesh.clone(), ElementKind::Bdm(l + 1))?;
        let pressure = FeSpace::new(mesh.clone(), ElementKind::Dg(l))?;
        let ops = OperatorSet::assemble(&vector, &pressure, params)?;
        Ok(Self {
            level,
            mesh,
            vector,
            pressure,
            ops,
        })
    }

    /// Pressure coefficients of the constant 1.
    pub fn pressure_ones(&self) -> Result<Vec<f64>> {
        self.pressure.interpolate_scalar(|_| 1.0)
    }
}

/// Solves the benchmark on one level and measures the table errors.
pub fn run_level(config: &StudyConfig, level: usize) -> Result<ErrorRow> {
    let wrap = |e: Error| Error::Level {
        level,
        source: Box::new(e),
    };
    let disc = Discretization::new(config.base_cells, config.diagonal, level, config.l, &config.params).map_err(wrap)?;
    let bench = Benchmark::new(config.params);
    let tau = config.tau(level);
    let time = TimeMesh::with_step(config.end_time, tau).map_err(wrap)?;
    let sources = FieldSources {
        vector: &disc.vector,
        pressure: &disc.pressure,
        f: |x, t| bench.momentum_source(x, t),
        g: |x, t| bench.mass_source(x, t),
    };
    let mut integrator = Integrator::new(&disc.ops, config.params, config.k).map_err(wrap)?;
    if config.check_pressure_mean {
        integrator.check_pressure_mean(disc.pressure_ones().map_err(wrap)?);
    }
    let initial = NodeState::from_exact(&disc.vector, &disc.pressure, &bench, 0.0).map_err(wrap)?;
    let mut meter = ErrorMeter::new(&disc.vector, &disc.pressure, &bench, config.samples).map_err(wrap)?;
    let basis = integrator.temporal().trial.clone();
    integrator
        .run_with(&time, 0, initial, &sources, |slab| {
            meter.observe(slab, &basis);
            Ok(())
        })
        .map_err(wrap)?;
    Ok(ErrorRow {
        level,
        tau,
        h: disc.mesh.max_diameter(),
        errors: meter.maxima(),
    })
}

/// Runs all levels of a study. With `parallel_levels` the levels are solved
/// concurrently; the report is identical either way.
pub fn run_convergence(config: &StudyConfig, parallel_levels: bool) -> Result<ErrorReport> {
    config.validate()?;
    let levels: Vec<usize> = (config.first_level..config.first_level + config.levels).collect();
    let rows: Vec<ErrorRow> = if parallel_levels {
        levels.par_iter().map(|&l| run_level(config, l)).collect::<Result<_>>()?
    } else {
        levels.iter().map(|&l| run_level(config, l)).collect::<Result<_>>()?
    };
    Ok(ErrorReport { rows })
}
