//! Continuous Galerkin-Petrov time stepping, cGP(k).
//!
//! Each slab carries the four fields at the `k + 1` Gauss-Lobatto nodes of
//! the slab. Node 0 is the end state of the previous slab, the remaining
//! `k` nodes are the unknowns of one coupled linear system tested with the
//! Lagrange polynomials at the `k` Gauss points.

mod checkpoint;
mod temporal;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
pub use temporal::{LagrangeBasis, TemporalMatrices};

use rayon::prelude::*;

use crate::assembly::{assemble_load_scalar, assemble_load_vector, ModelParameters, OperatorSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, BlockLayout, CsrMatrix, LuSolver, TripletBuilder, SOLVE_TOLERANCE};
use crate::mms::{ExactSolution, Field};
use crate::spaces::FeSpace;

/// Partition `0 = t_0 < ... < t_N = T` of the time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    points: Vec<f64>,
    /// Common slab width of a uniform mesh. Every slab reports exactly this
    /// width, so a single factorization serves the whole run.
    step: Option<f64>,
}

impl TimeMesh {
    pub fn uniform(end: f64, slabs: usize) -> Result<Self> {
        if slabs == 0 || !(end > 0.0) || !end.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "uniform time mesh needs slabs >= 1 and T > 0 (got {slabs}, {end})"
            )));
        }
        let tau = end / slabs as f64;
        let mut points: Vec<f64> = (0..slabs).map(|n| n as f64 * tau).collect();
        points.push(end);
        Ok(Self {
            points,
            step: Some(tau),
        })
    }

    /// Uniform slabs of width `tau` up to `end`, which must be a multiple of
    /// `tau` up to rounding.
    pub fn with_step(end: f64, tau: f64) -> Result<Self> {
        let n = (end / tau).round();
        if n < 1.0 || ((n * tau - end) / end).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("T = {end} is not a multiple of tau = {tau}")));
        }
        Self::uniform(end, n as usize)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points[0] != 0.0 {
            return Err(Error::InvalidArgument("time mesh must start at 0 and have a slab".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidArgument("time points must increase strictly".into()));
        }
        Ok(Self { points, step: None })
    }

    pub fn num_slabs(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn end(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Start and width of slab `n` (0-based).
    pub fn slab(&self, n: usize) -> (f64, f64) {
        let tau = self.step.unwrap_or(self.points[n + 1] - self.points[n]);
        (self.points[n], tau)
    }

    pub fn lobatto_times(&self, n: usize, temporal: &TemporalMatrices) -> Vec<f64> {
        let (t0, tau) = self.slab(n);
        let mut times: Vec<f64> = temporal.lobatto.points.iter().map(|s| t0 + tau * s).collect();
        times[temporal.k] = self.points[n + 1];
        times
    }

    pub fn gauss_times(&self, n: usize, temporal: &TemporalMatrices) -> Vec<f64> {
        let (t0, tau) = self.slab(n);
        temporal.gauss.points.iter().map(|s| t0 + tau * s).collect()
    }
}

/// Free-dof coefficients of the four fields at one time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
}

impl NodeState {
    pub fn zeros(num_vector: usize, num_pressure: usize) -> Self {
        Self {
            u: vec![0.0; num_vector],
            v: vec![0.0; num_vector],
            w: vec![0.0; num_vector],
            p: vec![0.0; num_pressure],
        }
    }

    pub fn field(&self, field: Field) -> &[f64] {
        match field {
            Field::U => &self.u,
            Field::V => &self.v,
            Field::W => &self.w,
            Field::P => &self.p,
        }
    }

    pub fn field_mut(&mut self, field: Field) -> &mut Vec<f64> {
        match field {
            Field::U => &mut self.u,
            Field::V => &mut self.v,
            Field::W => &mut self.w,
            Field::P => &mut self.p,
        }
    }

    fn check(&self, nv: usize, np: usize) -> Result<()> {
        for f in Field::ALL {
            let expected = if f.is_vector() { nv } else { np };
            let got = self.field(f).len();
            if got != expected {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} coefficients for {}", expected, f.name()),
                    got: got.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Interpolates an exact solution at time `t`: canonical BDM interpolant
    /// for the vector fields (boundary normal dofs dropped), cell-wise L2
    /// projection for the pressure.
    pub fn from_exact(vector: &FeSpace, pressure: &FeSpace, exact: &impl ExactSolution, t: f64) -> Result<Self> {
        let vec_field = |f: Field| -> Result<Vec<f64>> {
            let full = vector.interpolate_vector(|x| exact.vector(f, x, t))?;
            Ok(vector.restrict(&full))
        };
        Ok(Self {
            u: vec_field(Field::U)?,
            v: vec_field(Field::V)?,
            w: vec_field(Field::W)?,
            p: pressure.interpolate_scalar(|x| exact.pressure(x, t))?,
        })
    }
}

/// Discrete right-hand sides at one time: momentum and Darcy loads on the
/// free vector dofs, mass load on the pressure dofs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Loads {
    pub momentum: Vec<f64>,
    /// `None` means the homogeneous Darcy law.
    pub darcy: Option<Vec<f64>>,
    pub mass: Vec<f64>,
}

impl Loads {
    pub fn zeros(num_vector: usize, num_pressure: usize) -> Self {
        Self {
            momentum: vec![0.0; num_vector],
            darcy: None,
            mass: vec![0.0; num_pressure],
        }
    }

    fn check(&self, nv: usize, np: usize) -> Result<()> {
        let darcy_len = self.darcy.as_ref().map_or(nv, Vec::len);
        if self.momentum.len() != nv || darcy_len != nv || self.mass.len() != np {
            return Err(Error::ShapeMismatch {
                expected: format!("loads of sizes ({nv}, {nv}, {np})"),
                got: format!("({}, {}, {})", self.momentum.len(), darcy_len, self.mass.len()),
            });
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.momentum) || !finite(&self.mass) || !self.darcy.as_deref().map_or(true, finite) {
            return Err(Error::NonFinite("source loads"));
        }
        Ok(())
    }
}

/// Source terms of the space-time problem, sampled at single times.
pub trait Sources: Sync {
    fn loads(&self, t: f64) -> Result<Loads>;
}

impl<F> Sources for F
where
    F: Fn(f64) -> Result<Loads> + Sync,
{
    fn loads(&self, t: f64) -> Result<Loads> {
        self(t)
    }
}

/// `f = 0`, `g = 0`.
#[derive(Debug, Clone, Copy)]
pub struct NoSources {
    pub num_vector: usize,
    pub num_pressure: usize,
}

impl Sources for NoSources {
    fn loads(&self, _t: f64) -> Result<Loads> {
        Ok(Loads::zeros(self.num_vector, self.num_pressure))
    }
}

/// Loads `<f(t), phi>` and `<g(t), q>` of pointwise source functions.
pub struct FieldSources<'a, F, G> {
    pub vector: &'a FeSpace,
    pub pressure: &'a FeSpace,
    pub f: F,
    pub g: G,
}

impl<F, G> Sources for FieldSources<'_, F, G>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + Sync,
    G: Fn([f64; 2], f64) -> f64 + Sync,
{
    fn loads(&self, t: f64) -> Result<Loads> {
        let momentum = assemble_load_vector(self.vector, |x| (self.f)(x, t))?;
        let mass = assemble_load_scalar(self.pressure, |x| (self.g)(x, t))?;
        Ok(Loads {
            momentum: self.vector.restrict(&momentum),
            darcy: None,
            mass,
        })
    }
}

/// One solved slab: the fields at its `k + 1` Gauss-Lobatto nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabState {
    pub index: usize,
    pub t_start: f64,
    pub tau: f64,
    pub nodes: Vec<NodeState>,
}

impl SlabState {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.tau
    }

    pub fn last(&self) -> &NodeState {
        self.nodes.last().expect("slab has nodes")
    }

    fn combine(&self, field: Field, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes[0].field(field).len()];
        for (node, &c) in self.nodes.iter().zip(weights) {
            if c != 0.0 {
                for (o, x) in out.iter_mut().zip(node.field(field)) {
                    *o += c * x;
                }
            }
        }
        out
    }

    /// Field coefficients at `t` in the closed slab.
    pub fn evaluate(&self, basis: &LagrangeBasis, t: f64, field: Field) -> Vec<f64> {
        let s = ((t - self.t_start) / self.tau).clamp(0.0, 1.0);
        self.combine(field, &basis.eval(s))
    }

    /// Time derivative of the field at `t` in the closed slab.
    pub fn evaluate_derivative(&self, basis: &LagrangeBasis, t: f64, field: Field) -> Vec<f64> {
        let s = ((t - self.t_start) / self.tau).clamp(0.0, 1.0);
        let d: Vec<f64> = basis.eval_derivative(s).iter().map(|c| c / self.tau).collect();
        self.combine(field, &d)
    }
}

/// A sequence of consecutive slabs.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub temporal: TemporalMatrices,
    pub slabs: Vec<SlabState>,
}

impl Trajectory {
    pub fn start(&self) -> f64 {
        self.slabs.first().map_or(0.0, |s| s.t_start)
    }

    pub fn end(&self) -> f64 {
        self.slabs.last().map_or(0.0, SlabState::t_end)
    }

    pub fn final_state(&self) -> Option<&NodeState> {
        self.slabs.last().map(SlabState::last)
    }

    fn owner(&self, t: f64) -> Result<&SlabState> {
        let (a, b) = (self.start(), self.end());
        if self.slabs.is_empty() || !(t >= a && t <= b) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [{a}, {b}]")));
        }
        let n = self.slabs.partition_point(|s| s.t_end() < t);
        Ok(&self.slabs[n.min(self.slabs.len() - 1)])
    }

    pub fn evaluate(&self, t: f64, field: Field) -> Result<Vec<f64>> {
        Ok(self.owner(t)?.evaluate(&self.temporal.trial, t, field))
    }

    pub fn evaluate_derivative(&self, t: f64, field: Field) -> Result<Vec<f64>> {
        Ok(self.owner(t)?.evaluate_derivative(&self.temporal.trial, t, field))
    }
}

/// Inverse of a block-diagonal SPD matrix (after a symmetric permutation),
/// or `None` when the blocks are large or not positive definite. DG mass
/// matrices split into one small block per cell.
fn block_diagonal_inverse(m: &CsrMatrix) -> Option<Vec<(Vec<usize>, nalgebra::DMatrix<f64>)>> {
    const MAX_BLOCK: usize = 32;
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (i, j, _) in m.triplets() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            if g.len() > MAX_BLOCK {
                return None;
            }
            let blk = nalgebra::DMatrix::from_fn(g.len(), g.len(), |a, b| m.get(g[a], g[b]));
            let inv = blk.cholesky()?.inverse();
            let inv = (&inv + inv.transpose()) * 0.5;
            Some((g, inv))
        })
        .collect()
}

/// `M_p^{-1}` and `B^T M_p^{-1} B` from the blocks of `M_p^{-1}`.
fn pressure_schur(b: &CsrMatrix, blocks: &[(Vec<usize>, nalgebra::DMatrix<f64>)]) -> Result<(CsrMatrix, CsrMatrix)> {
    let mut inv = Vec::new();
    let mut entries = Vec::new();
    for (rows, m) in blocks {
        let brows: Vec<Vec<(usize, f64)>> = rows.iter().map(|&r| b.row(r).collect()).collect();
        for (a, &ra) in rows.iter().enumerate() {
            for (c, &rc) in rows.iter().enumerate() {
                let w = m[(a, c)];
                inv.push((ra, rc, w));
                for &(c1, v1) in &brows[a] {
                    for &(c2, v2) in &brows[c] {
                        entries.push((c1, c2, w * v1 * v2));
                    }
                }
            }
        }
    }
    let n = b.nrows();
    Ok((
        CsrMatrix::from_triplets(n, n, &inv)?,
        CsrMatrix::from_triplets(b.ncols(), b.ncols(), &entries)?,
    ))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
    }
}

fn small_inverse(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = m.len();
    let inv = nalgebra::DMatrix::from_fn(k, k, |i, j| m[i][j])
        .try_inverse()
        .ok_or_else(|| Error::Invariant("singular temporal matrix".into()))?;
    Ok((0..k).map(|i| (0..k).map(|j| inv[(i, j)]).collect()).collect())
}

fn small_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).map(|m| a[i][m] * b[m][j]).sum()).collect())
        .collect()
}

/// Right-hand sides of the four equation groups per Gauss test index.
struct SlabRhs {
    momentum: Vec<Vec<f64>>,
    kinematic: Vec<Vec<f64>>,
    darcy: Vec<Vec<f64>>,
    mass: Vec<Vec<f64>>,
}

/// Builds and solves the slab systems of one spatial discretization.
///
/// The kinematic equation is solved for the displacement nodes,
/// `U = U_0 + tau G V + ...` with `G = A_1^-1 B_1` the temporal matrices
/// restricted to the unknown nodes. When the pressure mass is block
/// diagonal (always, for DG pressures) the pressure nodes are eliminated
/// too, leaving a system in `(v, w)` only; for `k = 1` it is SPD. The full four-field residual is checked after every solve.
///
/// The reduced matrix depends on `tau` only; its factorization is kept and
/// reused until a slab of different width comes along.
pub struct Integrator<'a> {
    ops: &'a OperatorSet,
    params: ModelParameters,
    temporal: TemporalMatrices,
    a1: Vec<Vec<f64>>,
    b1: Vec<Vec<f64>>,
    a1_inv: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    /// `(diag(M_p)^-1, B^T M_p^-1 B)` when the pressure is eliminated.
    schur: Option<(CsrMatrix, CsrMatrix)>,
    layout: BlockLayout,
    factor: Option<(f64, LuSolver)>,
    factorizations: usize,
    pressure_mean: Option<Vec<f64>>,
}

impl<'a> Integrator<'a> {
    pub fn new(ops: &'a OperatorSet, params: ModelParameters, k: usize) -> Result<Self> {
        Self::with_elimination(ops, params, k, true)
    }

    /// Like [`Integrator::new`]; with `eliminate_pressure = false` the
    /// pressure stays in the factorized system.
    pub fn with_elimination(ops: &'a OperatorSet, params: ModelParameters, k: usize, eliminate_pressure: bool) -> Result<Self> {
        params.validate(false)?;
        let temporal = TemporalMatrices::new(k)?;
        let a1: Vec<Vec<f64>> = temporal.alpha.iter().map(|r| r[1..].to_vec()).collect();
        let b1: Vec<Vec<f64>> = temporal.beta.iter().map(|r| r[1..].to_vec()).collect();
        let a1_inv = small_inverse(&a1)?;
        let g = small_product(&a1_inv, &b1);
        let h = small_product(&b1, &g);
        let schur = match eliminate_pressure {
            true => block_diagonal_inverse(&ops.mass_p)
                .map(|blocks| pressure_schur(&ops.coupling, &blocks))
                .transpose()?,
            false => None,
        };
        let (nv, np) = (ops.num_vector(), ops.num_pressure());
        let per_node: &[usize] = if schur.is_some() { &[nv, nv] } else { &[nv, nv, np] };
        let sizes = (0..k).flat_map(|_| per_node.iter().copied()).collect();
        Ok(Self {
            ops,
            params,
            temporal,
            a1,
            b1,
            a1_inv,
            g,
            h,
            schur,
            layout: BlockLayout::new(sizes),
            factor: None,
            factorizations: 0,
            pressure_mean: None,
        })
    }

    /// Enables the per-slab check `|<p, 1>| <= 1e-10 ||p||`; `ones` holds the
    /// pressure coefficients of the constant function 1.
    pub fn check_pressure_mean(&mut self, ones: Vec<f64>) {
        self.pressure_mean = Some(ones);
    }

    pub fn temporal(&self) -> &TemporalMatrices {
        &self.temporal
    }

    /// Layout of the reduced system that is factorized.
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    /// Whether the pressure is eliminated from the factorized system.
    pub fn eliminates_pressure(&self) -> bool {
        self.schur.is_some()
    }

    /// Number of factorizations computed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn fields_per_node(&self) -> usize {
        if self.schur.is_some() {
            2
        } else {
            3
        }
    }

    /// Full four-field slab matrix for step `tau`; rows are grouped per
    /// Gauss test index as (momentum, kinematic, Darcy, mass), columns per
    /// unknown node as (u, v, w, p). Only used for checks; the solver works
    /// on the reduced system.
    pub fn slab_matrix(&self, tau: f64) -> Result<CsrMatrix> {
        let ops = self.ops;
        let pr = &self.params;
        let k = self.temporal.k;
        let (nv, np) = (ops.num_vector(), ops.num_pressure());
        let layout = BlockLayout::new((0..k).flat_map(|_| [nv, nv, nv, np]).collect());
        let mut tb = TripletBuilder::new(layout.total(), layout.total());
        for i in 0..k {
            let row = |f: usize| layout.offset(4 * i + f);
            for j in 1..=k {
                let a = self.temporal.alpha[i][j];
                let b = tau * self.temporal.beta[i][j];
                let col = |f: usize| layout.offset(4 * (j - 1) + f);
                tb.add_block(row(0), col(0), &ops.stiffness, b)?;
                tb.add_block(row(0), col(1), &ops.mass, a * pr.rho_bar)?;
                tb.add_block(row(0), col(2), &ops.mass, a * pr.rho_f)?;
                tb.add_block(row(0), col(3), &ops.coupling_t, -b * pr.alpha)?;
                tb.add_block(row(1), col(0), &ops.mass, a)?;
                tb.add_block(row(1), col(1), &ops.mass, -b)?;
                tb.add_block(row(2), col(1), &ops.mass, a * pr.rho_f)?;
                tb.add_block(row(2), col(2), &ops.mass, a * pr.rho_w)?;
                tb.add_block(row(2), col(2), &ops.mass_kinv, b)?;
                tb.add_block(row(2), col(3), &ops.coupling_t, -b)?;
                tb.add_block(row(3), col(0), ops.b_u(), a * pr.alpha)?;
                tb.add_block(row(3), col(2), ops.b_w(), b)?;
                tb.add_block(row(3), col(3), &ops.mass_p, a * pr.s0)?;
            }
        }
        tb.build()
    }

    /// The factorized system for step `tau`.
    pub fn reduced_matrix(&self, tau: f64) -> Result<CsrMatrix> {
        let ops = self.ops;
        let pr = &self.params;
        let k = self.temporal.k;
        let nf = self.fields_per_node();
        let n = self.layout.total();
        let mut tb = TripletBuilder::new(n, n);
        for i in 0..k {
            let row = |f: usize| self.layout.offset(nf * i + f);
            for l in 0..k {
                let col = |f: usize| self.layout.offset(nf * l + f);
                let a = self.a1[i][l];
                let b = tau * self.b1[i][l];
                let hh = tau * tau * self.h[i][l];
                tb.add_block(row(0), col(0), &ops.mass, a * pr.rho_bar)?;
                tb.add_block(row(0), col(0), &ops.stiffness, hh)?;
                tb.add_block(row(0), col(1), &ops.mass, a * pr.rho_f)?;
                tb.add_block(row(1), col(0), &ops.mass, a * pr.rho_f)?;
                tb.add_block(row(1), col(1), &ops.mass, a * pr.rho_w)?;
                tb.add_block(row(1), col(1), &ops.mass_kinv, b)?;
                match &self.schur {
                    Some((_, s)) => {
                        let c = hh / pr.s0;
                        tb.add_block(row(0), col(0), s, c * pr.alpha * pr.alpha)?;
                        tb.add_block(row(0), col(1), s, c * pr.alpha)?;
                        tb.add_block(row(1), col(0), s, c * pr.alpha)?;
                        tb.add_block(row(1), col(1), s, c)?;
                    }
                    None => {
                        tb.add_block(row(0), col(2), &ops.coupling_t, -b * pr.alpha)?;
                        tb.add_block(row(1), col(2), &ops.coupling_t, -b)?;
                        tb.add_block(row(2), col(0), &ops.coupling, b * pr.alpha)?;
                        tb.add_block(row(2), col(1), &ops.coupling, b)?;
                        tb.add_block(row(2), col(2), &ops.mass_p, a * pr.s0)?;
                    }
                }
            }
        }
        tb.build()
    }

    fn ensure_factor(&mut self, tau: f64) -> Result<()> {
        let fresh = match &self.factor {
            Some((t, _)) => (t - tau).abs() > 1e-14 * tau,
            None => true,
        };
        if fresh {
            self.factor = None;
            let m = self.reduced_matrix(tau)?;
            self.factor = Some((tau, LuSolver::factor(&m)?));
            self.factorizations += 1;
        }
        Ok(())
    }

    /// Right-hand sides of the full slab system: sources minus the coupling
    /// to the known node-0 state.
    fn slab_rhs(&self, prev: &NodeState, tau: f64, loads: &[Loads]) -> Result<SlabRhs> {
        let ops = self.ops;
        let pr = &self.params;
        let k = self.temporal.k;
        let mu0 = ops.mass.spmv(&prev.u)?;
        let mv0 = ops.mass.spmv(&prev.v)?;
        let mw0 = ops.mass.spmv(&prev.w)?;
        let au0 = ops.stiffness.spmv(&prev.u)?;
        let btp0 = ops.coupling_t.spmv(&prev.p)?;
        let mkw0 = ops.mass_kinv.spmv(&prev.w)?;
        let mpp0 = ops.mass_p.spmv(&prev.p)?;
        let bu0 = ops.coupling.spmv(&prev.u)?;
        let bw0 = ops.coupling.spmv(&prev.w)?;

        let mut rhs = SlabRhs {
            momentum: Vec::with_capacity(k),
            kinematic: Vec::with_capacity(k),
            darcy: Vec::with_capacity(k),
            mass: Vec::with_capacity(k),
        };
        for i in 0..k {
            let a0 = self.temporal.alpha[i][0];
            let b0 = tau * self.temporal.beta[i][0];
            let b = |j: usize| tau * self.temporal.beta[i][j];

            let mut mom: Vec<f64> = (0..mv0.len())
                .map(|r| -(a0 * (pr.rho_bar * mv0[r] + pr.rho_f * mw0[r]) + b0 * (au0[r] - pr.alpha * btp0[r])))
                .collect();
            let kin: Vec<f64> = (0..mu0.len()).map(|r| -(a0 * mu0[r] - b0 * mv0[r])).collect();
            let mut darcy: Vec<f64> = (0..mv0.len())
                .map(|r| -(a0 * (pr.rho_f * mv0[r] + pr.rho_w * mw0[r]) + b0 * (mkw0[r] - btp0[r])))
                .collect();
            let mut mass: Vec<f64> = (0..mpp0.len())
                .map(|r| -(a0 * (pr.s0 * mpp0[r] + pr.alpha * bu0[r]) + b0 * bw0[r]))
                .collect();
            for (j, l) in loads.iter().enumerate() {
                axpy(&mut mom, b(j), &l.momentum);
                axpy(&mut mass, b(j), &l.mass);
                if let Some(d) = &l.darcy {
                    axpy(&mut darcy, b(j), d);
                }
            }
            rhs.momentum.push(mom);
            rhs.kinematic.push(kin);
            rhs.darcy.push(darcy);
            rhs.mass.push(mass);
        }
        Ok(rhs)
    }

    /// Relative residual of the full four-field system for unknown nodes
    /// `nodes` (node 1..=k).
    fn full_residual(&self, nodes: &[NodeState], tau: f64, rhs: &SlabRhs) -> Result<f64> {
        let ops = self.ops;
        let pr = &self.params;
        let k = self.temporal.k;
        let mut prod = Vec::with_capacity(k);
        for n in nodes {
            prod.push([
                ops.mass.spmv(&n.u)?,
                ops.mass.spmv(&n.v)?,
                ops.mass.spmv(&n.w)?,
                ops.stiffness.spmv(&n.u)?,
                ops.coupling_t.spmv(&n.p)?,
                ops.mass_kinv.spmv(&n.w)?,
                ops.mass_p.spmv(&n.p)?,
                ops.coupling.spmv(&n.u)?,
                ops.coupling.spmv(&n.w)?,
            ]);
        }
        let (mut res, mut total) = (0.0, 0.0);
        for i in 0..k {
            let mut mom = rhs.momentum[i].iter().map(|v| -v).collect::<Vec<_>>();
            let mut kin = rhs.kinematic[i].iter().map(|v| -v).collect::<Vec<_>>();
            let mut darcy = rhs.darcy[i].iter().map(|v| -v).collect::<Vec<_>>();
            let mut mass = rhs.mass[i].iter().map(|v| -v).collect::<Vec<_>>();
            for (l, [mu, mv, mw, au, btp, mkw, mpp, bu, bw]) in prod.iter().enumerate() {
                let a = self.a1[i][l];
                let b = tau * self.b1[i][l];
                axpy(&mut mom, a * pr.rho_bar, mv);
                axpy(&mut mom, a * pr.rho_f, mw);
                axpy(&mut mom, b, au);
                axpy(&mut mom, -b * pr.alpha, btp);
                axpy(&mut kin, a, mu);
                axpy(&mut kin, -b, mv);
                axpy(&mut darcy, a * pr.rho_f, mv);
                axpy(&mut darcy, a * pr.rho_w, mw);
                axpy(&mut darcy, b, mkw);
                axpy(&mut darcy, -b, btp);
                axpy(&mut mass, a * pr.s0, mpp);
                axpy(&mut mass, a * pr.alpha, bu);
                axpy(&mut mass, b, bw);
            }
            for (r, b) in [(&mom, &rhs.momentum[i]), (&kin, &rhs.kinematic[i]), (&darcy, &rhs.darcy[i]), (&mass, &rhs.mass[i])] {
                res += dot(r, r);
                total += dot(b, b);
            }
        }
        Ok(if total > 0.0 { (res / total).sqrt() } else { res.sqrt() })
    }

    /// Loads at the Gauss-Lobatto times of a slab.
    fn slab_loads(&self, times: &[f64], sources: &dyn Sources) -> Result<Vec<Loads>> {
        let (nv, np) = (self.ops.num_vector(), self.ops.num_pressure());
        let loads: Vec<Loads> = times.par_iter().map(|&t| sources.loads(t)).collect::<Result<_>>()?;
        for l in &loads {
            l.check(nv, np)?;
        }
        Ok(loads)
    }

    /// Advances `prev` (the state at `t_start`) over one slab of width `tau`.
    pub fn solve_slab(
        &mut self,
        index: usize,
        prev: &NodeState,
        t_start: f64,
        tau: f64,
        sources: &dyn Sources,
    ) -> Result<SlabState> {
        let ops = self.ops;
        let pr = self.params;
        let (nv, np) = (ops.num_vector(), ops.num_pressure());
        prev.check(nv, np)?;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("slab width must be positive, got {tau}")));
        }
        let k = self.temporal.k;
        let mut times: Vec<f64> = self.temporal.lobatto.points.iter().map(|s| t_start + tau * s).collect();
        times[k] = t_start + tau;
        let loads = self.slab_loads(&times, sources)?;
        self.ensure_factor(tau)?;
        let rhs = self.slab_rhs(prev, tau, &loads)?;

        // Kinematic equation: U_l = y_l + tau sum_m G_lm V_m with
        // y = A_1^-1 q, q_i = -alpha_i0 U_0 + tau beta_i0 V_0.
        let q: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let a0 = self.temporal.alpha[i][0];
                let b0 = tau * self.temporal.beta[i][0];
                prev.u.iter().zip(&prev.v).map(|(u, v)| -a0 * u + b0 * v).collect()
            })
            .collect();
        let y: Vec<Vec<f64>> = (0..k)
            .map(|l| {
                let mut out = vec![0.0; nv];
                for (i, qi) in q.iter().enumerate() {
                    axpy(&mut out, self.a1_inv[l][i], qi);
                }
                out
            })
            .collect();
        let ay: Vec<Vec<f64>> = y.iter().map(|v| ops.stiffness.spmv(v)).collect::<Result<_>>()?;
        let mut mom = rhs.momentum.clone();
        let mut darcy = rhs.darcy.clone();
        let mut mass = rhs.mass.clone();
        for i in 0..k {
            for l in 0..k {
                axpy(&mut mom[i], -tau * self.b1[i][l], &ay[l]);
            }
            let bq = ops.coupling.spmv(&q[i])?;
            axpy(&mut mass[i], -pr.alpha, &bq);
        }
        // Pressure elimination: P_l = z_l - tau/s0 sum_m G_lm M_p^-1 B (alpha V_m + W_m).
        let z: Option<Result<Vec<Vec<f64>>>> = self.schur.as_ref().map(|(d_inv, _)| {
            (0..k)
                .map(|l| {
                    let mut out = vec![0.0; np];
                    for (i, mi) in mass.iter().enumerate() {
                        axpy(&mut out, self.a1_inv[l][i] / pr.s0, mi);
                    }
                    d_inv.spmv(&out)
                })
                .collect::<Result<_>>()
        });
        let z = z.transpose()?;
        if let Some(z) = &z {
            let btz: Vec<Vec<f64>> = z.iter().map(|v| ops.coupling_t.spmv(v)).collect::<Result<_>>()?;
            for i in 0..k {
                for l in 0..k {
                    let b = tau * self.b1[i][l];
                    axpy(&mut mom[i], pr.alpha * b, &btz[l]);
                    axpy(&mut darcy[i], b, &btz[l]);
                }
            }
        }
        let nf = self.fields_per_node();
        let mut b = vec![0.0; self.layout.total()];
        for i in 0..k {
            b[self.layout.range(nf * i)].copy_from_slice(&mom[i]);
            b[self.layout.range(nf * i + 1)].copy_from_slice(&darcy[i]);
            if nf == 3 {
                b[self.layout.range(nf * i + 2)].copy_from_slice(&mass[i]);
            }
        }
        let (_, lu) = self.factor.as_ref().expect("factor present");
        let x = lu.solve(&b)?;

        let mut unknown: Vec<NodeState> = (0..k)
            .map(|l| NodeState {
                u: Vec::new(),
                v: x[self.layout.range(nf * l)].to_vec(),
                w: x[self.layout.range(nf * l + 1)].to_vec(),
                p: if nf == 3 { x[self.layout.range(nf * l + 2)].to_vec() } else { Vec::new() },
            })
            .collect();
        for l in 0..k {
            let mut u = y[l].clone();
            for m in 0..k {
                axpy(&mut u, tau * self.g[l][m], &unknown[m].v);
            }
            unknown[l].u = u;
        }
        if let (Some((d_inv, _)), Some(z)) = (&self.schur, &z) {
            let flux: Vec<Vec<f64>> = unknown
                .iter()
                .map(|n| {
                    let s: Vec<f64> = n.v.iter().zip(&n.w).map(|(v, w)| pr.alpha * v + w).collect();
                    d_inv.spmv(&ops.coupling.spmv(&s)?)
                })
                .collect::<Result<_>>()?;
            for l in 0..k {
                let mut p = z[l].clone();
                for m in 0..k {
                    axpy(&mut p, -tau / pr.s0 * self.g[l][m], &flux[m]);
                }
                unknown[l].p = p;
            }
        }
        let residual = self.full_residual(&unknown, tau, &rhs)?;
        if !(residual <= SOLVE_TOLERANCE) {
            return Err(Error::Residual {
                residual,
                tolerance: SOLVE_TOLERANCE,
            });
        }

        let mut nodes = Vec::with_capacity(k + 1);
        nodes.push(prev.clone());
        nodes.extend(unknown);
        let slab = SlabState {
            index,
            t_start,
            tau,
            nodes,
        };
        if let Some(ones) = &self.pressure_mean {
            for node in &slab.nodes[1..] {
                let mp = ops.mass_p.spmv(&node.p)?;
                let mean = dot(&mp, ones);
                let norm = dot(&mp, &node.p).sqrt();
                if mean.abs() > 1e-10 * norm {
                    return Err(Error::Invariant(format!(
                        "pressure mean {mean:.3e} exceeds 1e-10 * ||p|| = {:.3e}",
                        1e-10 * norm
                    )));
                }
            }
        }
        Ok(slab)
    }

    /// Runs slabs `first..N` of `mesh` starting from `initial` (the state at
    /// the start of slab `first`), handing every slab to `observer`. Returns
    /// the final state.
    pub fn run_with(
        &mut self,
        mesh: &TimeMesh,
        first: usize,
        initial: NodeState,
        sources: &dyn Sources,
        mut observer: impl FnMut(&SlabState) -> Result<()>,
    ) -> Result<NodeState> {
        let mut state = initial;
        for n in first..mesh.num_slabs() {
            let (t0, tau) = mesh.slab(n);
            let wrap = |e: Error| Error::Slab {
                slab: n,
                source: Box::new(e),
            };
            let mut slab = self.solve_slab(n, &state, t0, tau, sources).map_err(wrap)?;
            observer(&slab).map_err(wrap)?;
            state = slab.nodes.pop().expect("slab has nodes");
        }
        Ok(state)
    }

    /// Runs the whole time mesh and keeps every slab.
    pub fn run(&mut self, mesh: &TimeMesh, initial: NodeState, sources: &dyn Sources) -> Result<Trajectory> {
        let mut slabs = Vec::with_capacity(mesh.num_slabs());
        self.run_with(mesh, 0, initial, sources, |s| {
            slabs.push(s.clone());
            Ok(())
        })?;
        Ok(Trajectory {
            temporal: self.temporal.clone(),
            slabs,
        })
    }
}

/// `E = a_h(u,u)/2 + <M_rho (v,w), (v,w)>/2 + s_0 ||p||^2 / 2`.
pub fn energy(ops: &OperatorSet, params: &ModelParameters, state: &NodeState) -> Result<f64> {
    let mv = ops.mass.spmv(&state.v)?;
    let mw = ops.mass.spmv(&state.w)?;
    let kinetic = params.rho_bar * dot(&mv, &state.v) + 2.0 * params.rho_f * dot(&mv, &state.w) + params.rho_w * dot(&mw, &state.w);
    Ok(0.5 * ops.stiffness.quadratic_form(&state.u) + 0.5 * kinetic + 0.5 * params.s0 * ops.mass_p.quadratic_form(&state.p))
}

/// Terms of the discrete energy identity over one slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    /// `E(t_n) - E(t_{n-1})`.
    pub change: f64,
    /// `int <K^-1 w, w>` over the slab, evaluated at the Gauss points.
    pub dissipation: f64,
    /// `int <I f, v> + <I g, p>` (plus the Darcy load paired with `w`).
    pub work: f64,
}

impl EnergyBalance {
    /// `change + dissipation - work`; zero up to rounding for cGP.
    pub fn defect(&self) -> f64 {
        self.change + self.dissipation - self.work
    }
}

/// Evaluates both sides of the discrete energy identity on a solved slab.
pub fn energy_balance(
    ops: &OperatorSet,
    params: &ModelParameters,
    temporal: &TemporalMatrices,
    slab: &SlabState,
    sources: &dyn Sources,
) -> Result<EnergyBalance> {
    let k = temporal.k;
    let change = energy(ops, params, slab.last())? - energy(ops, params, &slab.nodes[0])?;
    let times: Vec<f64> = temporal.lobatto.points.iter().map(|s| slab.t_start + slab.tau * s).collect();
    let loads: Vec<Loads> = times.iter().map(|&t| sources.loads(t)).collect::<Result<_>>()?;
    let mut dissipation = 0.0;
    let mut work = 0.0;
    for i in 0..k {
        let s = temporal.gauss.points[i];
        let wq = slab.tau * temporal.gauss.weights[i];
        let c = temporal.trial.eval(s);
        let w = slab.combine(Field::W, &c);
        let v = slab.combine(Field::V, &c);
        let p = slab.combine(Field::P, &c);
        dissipation += wq * ops.mass_kinv.quadratic_form(&w);
        let mut f = vec![0.0; v.len()];
        let mut d = vec![0.0; v.len()];
        let mut g = vec![0.0; p.len()];
        for (l, &cj) in loads.iter().zip(&c) {
            f.iter_mut().zip(&l.momentum).for_each(|(a, b)| *a += cj * b);
            g.iter_mut().zip(&l.mass).for_each(|(a, b)| *a += cj * b);
            if let Some(dl) = &l.darcy {
                d.iter_mut().zip(dl).for_each(|(a, b)| *a += cj * b);
            }
        }
        work += wq * (dot(&f, &v) + dot(&d, &w) + dot(&g, &p));
    }
    Ok(EnergyBalance {
        change,
        dissipation,
        work,
    })
}
