//! Stabilized incompressible Navier-Stokes on a cut B-spline grid.
//!
//! Velocity and pressure share one spline space. The weak form uses the
//! stress `σ = μ∇v − pI`, SUPG/PSPG stabilization, unsymmetric Nitsche
//! terms on Dirichlet parts of the immersed boundary and ghost-penalty
//! jumps across faces of cut cells. Unknowns are ordered `(vx, vy, p)` per
//! active basis function.

mod assemble;
mod exact;
mod force;
mod newton;
mod norms;
mod timeint;

use std::sync::Arc;

pub use assemble::{assemble, StepInputs, TimeMode};
pub use exact::{kovasznay_exact, kovasznay_gradient, kovasznay_lambda};
pub use force::{compute_force, traction_at};
pub use newton::{newton_solve, NewtonOptions, NewtonReport};
pub use norms::{error_norms, l2_project, project_state, write_field_dump, ErrorNorms};
pub use timeint::{scalar_amplification, scalar_step, step_generalized_alpha, GeneralizedAlpha};

use crate::error::{Error, Result};
use crate::geometry::{CellClass, FluidDomain, Point2};
use crate::linalg::BlockPattern;
use crate::quadrature::{DomainQuadrature, QuadratureOptions};
use crate::splinegrid::{mark_active, BasisEval, BsplineGrid, DofMap, MAX_LOCAL, N_FIELDS};

/// Material and stabilization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    pub rho: f64,
    pub mu: f64,
    /// Nitsche penalty scale.
    pub gamma_n: f64,
    /// Ghost-penalty scale.
    pub gamma_g: f64,
    /// Inverse-estimate constant in the stabilization parameter.
    pub c_i: f64,
    /// Adds the grad-div (LSIC) term.
    pub lsic: bool,
    /// Drops convection when false (Stokes limit).
    pub convection: bool,
    /// Includes the `(2/Δt)²` term in τ for transient steps.
    pub tau_dt: bool,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self { rho: 1.0, mu: 1.0, gamma_n: 10.0, gamma_g: 1e-2, c_i: 36.0, lsic: false, convection: true, tau_dt: true }
    }
}

impl FluidParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0 && self.mu > 0.0 && self.gamma_n > 0.0 && self.gamma_g >= 0.0 && self.c_i > 0.0;
        if !ok || ![self.rho, self.mu, self.gamma_n, self.gamma_g, self.c_i].iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!(
                "fluid parameters need rho, mu, gamma_n, c_i > 0 and gamma_g >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Prescribed velocity `v̄(x, t)`.
pub type VelocityFn = Arc<dyn Fn(Point2, f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Weakly imposed velocity.
    Dirichlet(VelocityFn),
    /// Natural condition `σ·n = 0`.
    TractionFree,
}

impl BoundaryCondition {
    pub fn constant(v: [f64; 2]) -> Self {
        BoundaryCondition::Dirichlet(Arc::new(move |_, _| v))
    }

    pub fn no_slip() -> Self {
        Self::constant([0.0, 0.0])
    }
}

impl std::fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => write!(f, "Dirichlet"),
            BoundaryCondition::TractionFree => write!(f, "TractionFree"),
        }
    }
}

/// Conditions of one boundary polygon, one per segment.
#[derive(Clone, Debug)]
pub struct BoundaryConditions {
    conditions: Vec<BoundaryCondition>,
    segment: Vec<usize>,
}

impl BoundaryConditions {
    pub fn uniform(condition: BoundaryCondition, n_segments: usize) -> Self {
        Self { conditions: vec![condition], segment: vec![0; n_segments] }
    }

    /// `segment[i]` indexes into `conditions`.
    pub fn per_segment(conditions: Vec<BoundaryCondition>, segment: Vec<usize>) -> Result<Self> {
        if let Some(bad) = segment.iter().find(|&&k| k >= conditions.len()) {
            return Err(Error::Config(format!("segment refers to missing condition {bad}")));
        }
        Ok(Self { conditions, segment })
    }

    pub fn n_segments(&self) -> usize {
        self.segment.len()
    }

    pub fn condition(&self, segment: usize) -> &BoundaryCondition {
        &self.conditions[self.segment[segment]]
    }

    pub fn all_dirichlet(&self) -> bool {
        self.segment.iter().all(|&k| matches!(self.conditions[k], BoundaryCondition::Dirichlet(_)))
    }
}

/// Optional volume force `f(x, t)` per unit mass.
pub type BodyForceFn = Arc<dyn Fn(Point2, f64) -> [f64; 2] + Send + Sync>;

/// Coefficients for every basis function of the grid (active or not),
/// laid out as `3 * basis + field`, plus the time-derivative history.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub coeffs: Vec<f64>,
    pub accel: Vec<f64>,
    pub time: f64,
}

impl FluidState {
    pub fn zeros(n_basis: usize) -> Self {
        Self { coeffs: vec![0.0; N_FIELDS * n_basis], accel: vec![0.0; N_FIELDS * n_basis], time: 0.0 }
    }

    /// Velocity, velocity gradient (`g[i][j] = ∂v_i/∂x_j`) and pressure at `x`
    /// using element `e`.
    pub fn eval_in(&self, space: &BsplineGrid, e: usize, x: Point2) -> ([f64; 2], [[f64; 2]; 2], f64) {
        let xi = reference_coords(space, e, x);
        let ev = space.eval_basis(e, xi);
        let nodes = space.element_basis(e);
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        let mut p = 0.0;
        for a in 0..ev.n {
            let b = nodes[a];
            for i in 0..2 {
                let c = self.coeffs[N_FIELDS * b + i];
                u[i] += ev.values[a] * c;
                g[i][0] += ev.grads[a][0] * c;
                g[i][1] += ev.grads[a][1] * c;
            }
            p += ev.values[a] * self.coeffs[N_FIELDS * b + 2];
        }
        (u, g, p)
    }

    pub fn eval(&self, space: &BsplineGrid, x: Point2) -> Result<([f64; 2], [[f64; 2]; 2], f64)> {
        let (e, _) = space.locate(x)?;
        Ok(self.eval_in(space, e, x))
    }
}

/// Reference coordinates of `x` in element `e` (not clamped).
pub(crate) fn reference_coords(space: &BsplineGrid, e: usize, x: Point2) -> Point2 {
    let (ex, ey) = space.element_ij(e);
    [(x[0] - space.lo[0]) / space.h[0] - ex as f64, (x[1] - space.lo[1]) / space.h[1] - ey as f64]
}

/// A face between two active elements, at least one of them cut.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostFace {
    /// Element below / left of the face.
    pub minus: usize,
    /// Element above / right of the face.
    pub plus: usize,
    /// Axis of the face normal.
    pub axis: usize,
    /// Compact indices of all basis functions supported on either element.
    pub nodes: Vec<usize>,
}

/// Everything needed to assemble one fluid problem on a fixed geometry.
pub struct FlowProblem {
    pub space: BsplineGrid,
    pub domain: FluidDomain,
    pub params: FluidParams,
    pub bcs: Vec<BoundaryConditions>,
    pub body_force: Option<BodyForceFn>,
    pub quad_options: QuadratureOptions,
    pub quad: DomainQuadrature,
    pub dofmap: DofMap,
    pub faces: Vec<GhostFace>,
    pub pattern: Arc<BlockPattern>,
    /// Compact dof pinned to fix the pressure level of pure-Dirichlet problems.
    pub pressure_pin: Option<usize>,
}

impl FlowProblem {
    pub fn new(
        space: BsplineGrid,
        domain: FluidDomain,
        params: FluidParams,
        bcs: Vec<BoundaryConditions>,
        quad_options: QuadratureOptions,
    ) -> Result<Self> {
        params.validate()?;
        if bcs.len() != domain.boundaries().len() {
            return Err(Error::Config(format!(
                "{} boundary condition sets for {} boundaries",
                bcs.len(),
                domain.boundaries().len()
            )));
        }
        for (k, (bc, b)) in bcs.iter().zip(domain.boundaries()).enumerate() {
            if bc.n_segments() != b.n_segments() {
                return Err(Error::Config(format!(
                    "boundary {k} has {} segments but {} conditions",
                    b.n_segments(),
                    bc.n_segments()
                )));
            }
        }
        let (quad, dofmap, faces, pattern, pressure_pin) = build_discretization(&space, &domain, &bcs, quad_options)?;
        Ok(Self { space, domain, params, bcs, body_force: None, quad_options, quad, dofmap, faces, pattern, pressure_pin })
    }

    pub fn with_body_force(mut self, f: BodyForceFn) -> Self {
        self.body_force = Some(f);
        self
    }

    /// Rigidly moves one boundary and rebuilds classification, quadrature,
    /// active set and sparsity pattern.
    pub fn translate_boundary(&mut self, id: usize, d: Point2) -> Result<()> {
        let moved = self.domain.boundary(id).translated(d);
        self.domain.replace_boundary(id, moved);
        self.rebuild()
    }

    pub fn set_quadrature(&mut self, options: QuadratureOptions) -> Result<()> {
        self.quad_options = options;
        self.rebuild()
    }

    pub fn rebuild(&mut self) -> Result<()> {
        let (quad, dofmap, faces, pattern, pin) =
            build_discretization(&self.space, &self.domain, &self.bcs, self.quad_options)?;
        self.quad = quad;
        self.dofmap = dofmap;
        self.faces = faces;
        // Keeping the old handle lets the linear solver reuse its analysis.
        if *pattern != *self.pattern {
            self.pattern = pattern;
        }
        self.pressure_pin = pin;
        Ok(())
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs()
    }

    /// Cell size used in penalty and stabilization scalings.
    pub fn h(&self) -> f64 {
        self.space.h[0].max(self.space.h[1])
    }

    /// Compact local dof indices of element `e`'s basis functions.
    pub(crate) fn element_nodes(&self, e: usize) -> ([usize; MAX_LOCAL], usize) {
        let glob = self.space.element_basis(e);
        let nl = self.space.n_local();
        let mut out = [usize::MAX; MAX_LOCAL];
        for a in 0..nl {
            out[a] = self.dofmap.compact[glob[a]].expect("active element has active basis");
        }
        (out, nl)
    }

    pub(crate) fn eval_basis_at(&self, e: usize, x: Point2) -> BasisEval {
        self.space.eval_basis(e, reference_coords(&self.space, e, x))
    }

    /// Compact unknown vector from a full state.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_dofs());
        for &b in &self.dofmap.active {
            x.extend_from_slice(&full[N_FIELDS * b..N_FIELDS * b + N_FIELDS]);
        }
        x
    }

    /// Writes compact values back into a full vector; inactive entries are kept.
    pub fn scatter(&self, x: &[f64], full: &mut [f64]) {
        for (a, &b) in self.dofmap.active.iter().enumerate() {
            full[N_FIELDS * b..N_FIELDS * b + N_FIELDS].copy_from_slice(&x[N_FIELDS * a..N_FIELDS * a + N_FIELDS]);
        }
    }

    /// Fluid measure and the integral of the discrete pressure.
    pub(crate) fn pressure_mean(&self, x: &[f64]) -> f64 {
        let mut area = 0.0;
        let mut int = 0.0;
        for cq in self.quad.cells.iter().filter(|c| c.n_points() > 0) {
            let (nodes, nl) = self.element_nodes(cq.cell_id);
            for (pt, &w) in cq.points.iter().zip(&cq.weights) {
                let ev = self.eval_basis_at(cq.cell_id, *pt);
                let p: f64 = (0..nl).map(|a| ev.values[a] * x[N_FIELDS * nodes[a] + 2]).sum();
                area += w;
                int += w * p;
            }
        }
        if area > 0.0 {
            int / area
        } else {
            0.0
        }
    }

    /// Shifts the pressure so that its fluid-domain mean vanishes.
    pub(crate) fn remove_pressure_mean(&self, x: &mut [f64]) {
        let m = self.pressure_mean(x);
        for a in 0..self.dofmap.n_active() {
            x[N_FIELDS * a + 2] -= m;
        }
    }
}

type Discretization = (DomainQuadrature, DofMap, Vec<GhostFace>, Arc<BlockPattern>, Option<usize>);

fn build_discretization(
    space: &BsplineGrid,
    domain: &FluidDomain,
    bcs: &[BoundaryConditions],
    options: QuadratureOptions,
) -> Result<Discretization> {
    let quad = DomainQuadrature::build(&space.cartesian(), domain, options)?;
    // Cells touched by the boundary without fluid measure activate nothing.
    // A cell whose filtered volume rule is empty but which still carries an
    // interface piece stays active.
    let mut classes = quad.classes.clone();
    let mut has_piece = vec![false; classes.len()];
    for p in &quad.interface.pieces {
        has_piece[p.cell_id] = true;
    }
    for id in quad.empty_slivers().filter(|&id| !has_piece[id]) {
        classes[id] = CellClass::Outside;
    }
    let dofmap = mark_active(space, &classes)?;
    if dofmap.n_active() == 0 {
        return Err(Error::EmptyActiveSet);
    }
    let nl = space.n_local();
    let compact_of = |e: usize| -> Vec<usize> {
        space.element_basis(e)[..nl].iter().map(|&b| dofmap.compact[b].expect("active")).collect()
    };
    let mut faces = Vec::new();
    let cls = &classes;
    for e in 0..space.n_elements() {
        if cls[e] == CellClass::Outside {
            continue;
        }
        let (i, j) = space.element_ij(e);
        let neighbours = [(0usize, i + 1 < space.n[0], e + 1), (1usize, j + 1 < space.n[1], e + space.n[0])];
        for (axis, exists, f) in neighbours {
            if !exists || cls[f] == CellClass::Outside {
                continue;
            }
            if cls[e] != CellClass::Cut && cls[f] != CellClass::Cut {
                continue;
            }
            let mut nodes = compact_of(e);
            nodes.extend(compact_of(f));
            nodes.sort_unstable();
            nodes.dedup();
            faces.push(GhostFace { minus: e, plus: f, axis, nodes });
        }
    }
    let elems: Vec<Vec<usize>> = (0..space.n_elements()).filter(|&e| cls[e] != CellClass::Outside).map(compact_of).collect();
    let pattern = Arc::new(BlockPattern::from_patches(
        dofmap.n_active(),
        N_FIELDS,
        elems.iter().map(|v| v.as_slice()).chain(faces.iter().map(|f| f.nodes.as_slice())),
    ));
    let pin = if bcs.iter().all(|b| b.all_dirichlet()) {
        Some(N_FIELDS * pick_pin(space, &dofmap, cls) + 2)
    } else {
        None
    };
    Ok((quad, dofmap, faces, pattern, pin))
}

/// An active basis function whose whole support is uncut fluid, preferring
/// one near the middle of the active set.
fn pick_pin(space: &BsplineGrid, dofmap: &DofMap, classes: &[CellClass]) -> usize {
    let interior = |b: usize| {
        let (rx, ry) = space.support(b);
        (ry[0]..=ry[1]).all(|j| (rx[0]..=rx[1]).all(|i| classes[j * space.n[0] + i] == CellClass::Inside))
    };
    let candidates: Vec<usize> = (0..dofmap.n_active()).filter(|&a| interior(dofmap.active[a])).collect();
    if candidates.is_empty() {
        dofmap.n_active() / 2
    } else {
        candidates[candidates.len() / 2]
    }
}

#[cfg(test)]
mod tests;
