//! Staggered coupling of a rigid, spring-mounted body with the fluid.
//!
//! One coupled step predicts the interface force, advances the solid,
//! re-cuts the fluid grid around the moved body, advances the fluid with the
//! body velocity as Dirichlet data and relaxes the new force.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flowsolver::{
    compute_force, step_generalized_alpha, BoundaryCondition, BoundaryConditions, FlowProblem, FluidState,
    NewtonOptions,
};
use crate::geometry::{Point2, PolygonBoundary};
use crate::linalg::LinearSolver;

/// Relaxation and predictor settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig {
    pub beta: f64,
    /// 1: `F_n`; 2: `2 F_n − F_{n−1}`.
    pub predictor_order: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self { beta: 0.05, predictor_order: 2 }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("relaxation beta must lie in (0, 1], got {}", self.beta)));
        }
        if !matches!(self.predictor_order, 1 | 2) {
            return Err(Error::Config(format!("predictor order must be 1 or 2, got {}", self.predictor_order)));
        }
        Ok(())
    }
}

/// Force predicted for the next step. Without an older entry the second
/// order predictor falls back to first order.
pub fn predict_force(f_n: [f64; 2], f_nm1: Option<[f64; 2]>, order: usize) -> [f64; 2] {
    match (order, f_nm1) {
        (2, Some(prev)) => [2.0 * f_n[0] - prev[0], 2.0 * f_n[1] - prev[1]],
        _ => f_n,
    }
}

/// Relaxed interface force `F_{n+1} = −β F^f + (1 − β) F^sP`.
pub fn average_force(beta: f64, fluid: [f64; 2], predicted: [f64; 2]) -> [f64; 2] {
    [-beta * fluid[0] + (1.0 - beta) * predicted[0], -beta * fluid[1] + (1.0 - beta) * predicted[1]]
}

/// Translating rigid body on springs and dampers.
#[derive(Debug, Clone)]
pub struct RigidSolid {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Components held fixed.
    pub constrained: [bool; 2],
    pub displacement: Point2,
    pub velocity: Point2,
    pub acceleration: Point2,
    pub reference: PolygonBoundary,
}

impl RigidSolid {
    pub fn new(mass: f64, stiffness: f64, damping: f64, constrained: [bool; 2], reference: PolygonBoundary) -> Result<Self> {
        if !(mass > 0.0 && stiffness >= 0.0 && damping >= 0.0) || !(mass.is_finite() && stiffness.is_finite() && damping.is_finite()) {
            return Err(Error::Config(format!(
                "solid needs m > 0, k >= 0, c >= 0, got m={mass}, k={stiffness}, c={damping}"
            )));
        }
        Ok(Self {
            mass,
            stiffness,
            damping,
            constrained,
            displacement: [0.0; 2],
            velocity: [0.0; 2],
            acceleration: [0.0; 2],
            reference,
        })
    }

    /// Current boundary: the reference polygon moved by the displacement.
    pub fn polygon(&self) -> PolygonBoundary {
        reposition(&self.reference, self.displacement)
    }

    /// Sets the acceleration consistent with the equation of motion under `force`.
    pub fn initialize_acceleration(&mut self, force: Point2) {
        for i in 0..2 {
            self.acceleration[i] = if self.constrained[i] {
                0.0
            } else {
                (force[i] - self.damping * self.velocity[i] - self.stiffness * self.displacement[i]) / self.mass
            };
        }
    }
}

/// Generalized-alpha constants for `m d̈ + c ḋ + k d = F` at zero spectral radius.
const SOLID_ALPHA_M: f64 = -1.0;
const SOLID_ALPHA_F: f64 = 0.0;
const SOLID_GAMMA: f64 = 1.5;
const SOLID_BETA: f64 = 1.0;

/// Advances the solid by `dt` under `force`, held constant over the step.
pub fn solid_step(solid: &RigidSolid, force: Point2, dt: f64) -> Result<RigidSolid> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    let (am, af, g, b) = (SOLID_ALPHA_M, SOLID_ALPHA_F, SOLID_GAMMA, SOLID_BETA);
    let (m, c, k) = (solid.mass, solid.damping, solid.stiffness);
    let mut next = solid.clone();
    for i in 0..2 {
        if solid.constrained[i] {
            next.displacement[i] = 0.0;
            next.velocity[i] = 0.0;
            next.acceleration[i] = 0.0;
            continue;
        }
        let (d, v, a) = (solid.displacement[i], solid.velocity[i], solid.acceleration[i]);
        // Newmark predictors with the new acceleration set to zero.
        let d_star = d + dt * v + dt * dt * (0.5 - b) * a;
        let v_star = v + dt * (1.0 - g) * a;
        // m a_{n+1−αm} + c v_{n+1−αf} + k d_{n+1−αf} = F
        let lhs = m * (1.0 - am) + c * (1.0 - af) * g * dt + k * (1.0 - af) * b * dt * dt;
        let rhs = force[i]
            - m * am * a
            - c * (af * v + (1.0 - af) * v_star)
            - k * (af * d + (1.0 - af) * d_star);
        let a_new = rhs / lhs;
        next.acceleration[i] = a_new;
        next.velocity[i] = v_star + g * dt * a_new;
        next.displacement[i] = d_star + b * dt * dt * a_new;
    }
    Ok(next)
}

/// Rigid translation of all vertices.
pub fn reposition(boundary: &PolygonBoundary, displacement: Point2) -> PolygonBoundary {
    boundary.translated(displacement)
}

/// What the coupling loop needs from a fluid model.
pub trait FluidSubsolver {
    /// Places the body at `displacement` from its reference position, moving
    /// with `velocity`.
    fn reposition(&mut self, displacement: Point2, velocity: Point2) -> Result<()>;
    /// Advances by `dt` and returns the interface force `F^f`.
    fn advance(&mut self, dt: f64) -> Result<FluidStepInfo>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidStepInfo {
    /// `∮ σ·n ds` with `n` from the fluid into the body.
    pub fluid_force: Point2,
    pub n_cut_points: usize,
    pub assemble_ms: f64,
}

/// Cut-cell fluid around one moving polygon.
pub struct CutCellFluid {
    pub problem: FlowProblem,
    pub state: FluidState,
    pub body: usize,
    pub reference: PolygonBoundary,
    pub solver: LinearSolver,
    pub newton: NewtonOptions,
}

impl CutCellFluid {
    pub fn new(problem: FlowProblem, state: FluidState, body: usize) -> Self {
        let reference = problem.domain.boundary(body).clone();
        Self { problem, state, body, reference, solver: LinearSolver::new(), newton: NewtonOptions::default() }
    }
}

impl FluidSubsolver for CutCellFluid {
    fn reposition(&mut self, displacement: Point2, velocity: Point2) -> Result<()> {
        let moved = reposition(&self.reference, displacement);
        let n = moved.n_segments();
        self.problem.domain.replace_boundary(self.body, moved);
        self.problem.bcs[self.body] = BoundaryConditions::uniform(BoundaryCondition::constant(velocity), n);
        self.problem.rebuild()
    }

    fn advance(&mut self, dt: f64) -> Result<FluidStepInfo> {
        let (next, report) = step_generalized_alpha(&self.problem, &self.state, dt, &mut self.solver, &self.newton)?;
        self.state = next;
        let on_body = compute_force(&self.problem, &self.state, self.body);
        let counts = self.problem.quad.counts();
        Ok(FluidStepInfo {
            fluid_force: [-on_body[0], -on_body[1]],
            n_cut_points: counts.n_cut,
            assemble_ms: report.assembly_ms,
        })
    }
}

/// Fluid whose interface force is pure added mass and damping,
/// `F^f = m_a ẍ + c_a ẋ − F_ext`, with the body acceleration taken from
/// successive velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct AddedMassFluid {
    pub added_mass: f64,
    pub added_damping: f64,
    pub external: Point2,
    velocity: Point2,
    previous_velocity: Point2,
}

impl AddedMassFluid {
    pub fn new(added_mass: f64, added_damping: f64, external: Point2) -> Self {
        Self { added_mass, added_damping, external, velocity: [0.0; 2], previous_velocity: [0.0; 2] }
    }
}

impl FluidSubsolver for AddedMassFluid {
    fn reposition(&mut self, _displacement: Point2, velocity: Point2) -> Result<()> {
        self.previous_velocity = self.velocity;
        self.velocity = velocity;
        Ok(())
    }

    fn advance(&mut self, dt: f64) -> Result<FluidStepInfo> {
        let mut f = [0.0; 2];
        for i in 0..2 {
            let acc = (self.velocity[i] - self.previous_velocity[i]) / dt;
            f[i] = self.added_mass * acc + self.added_damping * self.velocity[i] - self.external[i];
        }
        Ok(FluidStepInfo { fluid_force: f, n_cut_points: 0, assemble_ms: 0.0 })
    }
}

/// One row of the coupling time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRecord {
    pub step: usize,
    pub time: f64,
    pub displacement: Point2,
    /// Relaxed force on the solid.
    pub force: Point2,
    pub fluid_force: Point2,
    pub n_cut_points: usize,
    pub assemble_ms: f64,
}

/// Force history and clock of a coupled simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub config: CouplingConfig,
    pub force: Point2,
    pub previous_force: Option<Point2>,
    pub time: f64,
    pub step: usize,
}

impl Coupling {
    pub fn new(config: CouplingConfig, initial_force: Point2) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, force: initial_force, previous_force: None, time: 0.0, step: 0 })
    }
}

/// One staggered step: predict, solid, re-cut, fluid, relax.
pub fn coupled_step(
    fluid: &mut dyn FluidSubsolver,
    solid: &mut RigidSolid,
    coupling: &mut Coupling,
    dt: f64,
) -> Result<CouplingRecord> {
    let predicted = predict_force(coupling.force, coupling.previous_force, coupling.config.predictor_order);
    let next_solid = solid_step(solid, predicted, dt)?;
    fluid.reposition(next_solid.displacement, next_solid.velocity)?;
    let info = fluid.advance(dt)?;
    let relaxed = average_force(coupling.config.beta, info.fluid_force, predicted);
    *solid = next_solid;
    coupling.previous_force = Some(coupling.force);
    coupling.force = relaxed;
    coupling.time += dt;
    coupling.step += 1;
    Ok(CouplingRecord {
        step: coupling.step,
        time: coupling.time,
        displacement: solid.displacement,
        force: relaxed,
        fluid_force: info.fluid_force,
        n_cut_points: info.n_cut_points,
        assemble_ms: info.assemble_ms,
    })
}

pub const COUPLING_CSV_HEADER: &str = "step time d_x d_y F_x F_y Ff_x Ff_y n_cut_points t_assemble_ms";

/// Writes the time series; timings are written as 0 when disabled.
pub fn write_coupling_csv(records: &[CouplingRecord], timings: bool, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{COUPLING_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            r.step,
            r.time,
            r.displacement[0],
            r.displacement[1],
            r.force[0],
            r.force[1],
            r.fluid_force[0],
            r.fluid_force[1],
            r.n_cut_points,
            if timings { r.assemble_ms } else { 0.0 }
        )?;
    }
    Ok(())
}
