//! Drivers for the benchmark studies.

use std::sync::Arc;
use std::time::Instant;

use super::fixtures::{
    half_cosine_ramp, kovasznay_problem, sphere_fixture, square_problem, volume_fixtures, SquareSetup, VolumeFixture,
    KOVASZNAY_HI, KOVASZNAY_LO, SPHERE_VOLUME, SQUARE_BODY, SQUARE_D, SQUARE_U,
};
use super::signal::{mean, rms, strouhal};
use crate::error::{Error, Result};
use crate::flowsolver::{
    assemble, compute_force, error_norms, kovasznay_exact, newton_solve, step_generalized_alpha, ErrorNorms, FlowProblem,
    FluidParams, FluidState, NewtonOptions, StepInputs, write_field_dump,
};
use crate::fsi::{coupled_step, Coupling, CouplingConfig, CouplingRecord, CutCellFluid, RigidSolid};
use crate::linalg::LinearSolver;
use crate::quadrature::{adaptive_quadrature, gauss_legendre, tensor_rule, CutMethod, DomainQuadrature, QuadratureOptions};

/// Fraction of an unsteady record used for statistics (the tail).
pub const STATS_WINDOW: f64 = 0.5;

/// Median wall time of three residual-plus-Jacobian assemblies at `x`.
pub fn assembly_median_ms(problem: &FlowProblem, x: &[f64]) -> Result<f64> {
    let mut t = [0.0; 3];
    for ti in &mut t {
        let start = Instant::now();
        assemble(problem, &StepInputs::steady(), x, true)?;
        *ti = start.elapsed().as_secs_f64() * 1e3;
    }
    t.sort_by(f64::total_cmp);
    Ok(t[1])
}

/// Result of a steady Kovasznay solve.
#[derive(Debug, Clone, PartialEq)]
pub struct KovasznaySolve {
    pub norms: ErrorNorms,
    pub n_dofs: usize,
    /// Cut-cell quadrature points.
    pub n_quad_points: usize,
    pub newton_iterations: usize,
    /// Median of three assemblies at the converged state.
    pub assembly_ms: f64,
    /// Mean linear-solve time per Newton iteration.
    pub solve_ms: f64,
    pub state: FluidState,
}

pub fn solve_kovasznay(
    n: usize,
    degree: usize,
    method: CutMethod,
    re: f64,
    params: FluidParams,
    newton: &NewtonOptions,
) -> Result<KovasznaySolve> {
    let problem = kovasznay_problem(n, degree, method, re, params)?;
    let mut solver = LinearSolver::new();
    let (x, report) = newton_solve(&problem, &StepInputs::steady(), vec![0.0; problem.n_dofs()], &mut solver, newton)?;
    let mut state = FluidState::zeros(problem.space.n_basis());
    problem.scatter(&x, &mut state.coeffs);
    let norms = error_norms(&problem, &state, |p| kovasznay_exact(p[0], p[1], re, 0.0))?;
    Ok(KovasznaySolve {
        norms,
        n_dofs: problem.n_dofs(),
        n_quad_points: problem.quad.counts().n_cut,
        newton_iterations: report.iterations,
        assembly_ms: assembly_median_ms(&problem, &x)?,
        solve_ms: report.solve_ms / report.iterations.max(1) as f64,
        state,
    })
}

/// Writes a `res × res` probe lattice of a converged Kovasznay field over
/// the physical square.
pub fn kovasznay_field_dump(
    n: usize,
    degree: usize,
    method: CutMethod,
    solve: &KovasznaySolve,
    res: usize,
    out: &mut impl std::io::Write,
) -> Result<()> {
    let problem = kovasznay_problem(n, degree, method, 40.0, FluidParams::default())?;
    write_field_dump(&problem, &solve.state, [KOVASZNAY_LO; 2], [KOVASZNAY_HI; 2], [res, res], out)
}

/// Cut-cell point count and median assembly time of a Kovasznay problem
/// without solving it.
pub fn kovasznay_cost(n: usize, degree: usize, method: CutMethod) -> Result<(usize, f64)> {
    let problem = kovasznay_problem(n, degree, method, 40.0, FluidParams::default())?;
    let x = vec![0.0; problem.n_dofs()];
    Ok((problem.quad.counts().n_cut, assembly_median_ms(&problem, &x)?))
}

/// Relative area error of the cut-cell quadrature on a named 2D fixture.
pub fn fixture_area_error(name: &str, method: CutMethod, degree: usize) -> Result<(f64, usize)> {
    let fixture = volume_fixtures()
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::Argument(format!("unknown fixture {name}")))?;
    area_error(&fixture, method, degree)
}

/// Relative area error and cut-cell point count of one fixture.
pub fn area_error(fixture: &VolumeFixture, method: CutMethod, degree: usize) -> Result<(f64, usize)> {
    let quad = DomainQuadrature::build(&fixture.grid, &fixture.domain, QuadratureOptions::for_degree(method, degree))?;
    Ok(((quad.total_weight() - fixture.exact_area).abs() / fixture.exact_area, quad.counts().n_cut))
}

/// Relative octree volume error on the sphere fixture with an `n`-point
/// Gauss base rule per axis.
pub fn sphere_volume_error(level: u32, n: usize) -> Result<(f64, usize)> {
    let (cell, region) = sphere_fixture();
    let base = tensor_rule(&gauss_legendre(n)?, 3)?;
    let q = adaptive_quadrature(0, &cell, &region, level, &base)?;
    Ok(((q.weight_sum() - SPHERE_VOLUME).abs() / SPHERE_VOLUME, q.n_points()))
}

/// Force coefficients `2F / (ρ U² D)` on the square.
pub fn force_coefficients(problem: &FlowProblem, state: &FluidState) -> [f64; 2] {
    let f = compute_force(problem, state, SQUARE_BODY);
    let scale = 2.0 / (problem.params.rho * SQUARE_U * SQUARE_U * SQUARE_D);
    [scale * f[0], scale * f[1]]
}

/// Default fluid parameters for a square run at Reynolds number `re`.
pub fn square_params(re: f64) -> FluidParams {
    FluidParams { rho: 1.0, mu: SQUARE_U * SQUARE_D / re, ..FluidParams::default() }
}

/// Result of a steady solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyRun {
    pub c_d: f64,
    pub c_l: f64,
    pub n_dofs: usize,
    pub n_quad_points: usize,
    pub newton_iterations: usize,
    pub assembly_ms: f64,
    pub solve_ms: f64,
}

/// Steady flow past the square from a zero initial guess.
pub fn steady_square(setup: &SquareSetup, method: CutMethod, params: FluidParams, newton: &NewtonOptions) -> Result<SteadyRun> {
    let mut problem = square_problem(setup, method, Arc::new(|_| 1.0))?;
    problem.params = params;
    let mut solver = LinearSolver::new();
    let (x, report) = newton_solve(&problem, &StepInputs::steady(), vec![0.0; problem.n_dofs()], &mut solver, newton)?;
    let mut state = FluidState::zeros(problem.space.n_basis());
    problem.scatter(&x, &mut state.coeffs);
    let [c_d, c_l] = force_coefficients(&problem, &state);
    Ok(SteadyRun {
        c_d,
        c_l,
        n_dofs: problem.n_dofs(),
        n_quad_points: problem.quad.counts().n_cut,
        newton_iterations: report.iterations,
        assembly_ms: report.assembly_ms / (report.iterations + 1) as f64,
        solve_ms: report.solve_ms / report.iterations.max(1) as f64,
    })
}

/// Settings of a time-dependent run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsteadySettings {
    pub dt: f64,
    pub t_end: f64,
    /// Duration of the half-cosine inflow ramp.
    pub ramp: f64,
}

impl UnsteadySettings {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Sampled force coefficients of a time-dependent run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForceHistory {
    pub time: Vec<f64>,
    pub c_d: Vec<f64>,
    pub c_l: Vec<f64>,
    pub n_dofs: usize,
    pub n_quad_points: usize,
    /// Mean per time step.
    pub assembly_ms: f64,
    pub solve_ms: f64,
    pub wall_s: f64,
    pub factorizations: usize,
    pub gmres_iterations: usize,
    /// Set when a step failed; the history holds the steps before it.
    pub failure: Option<String>,
}

/// Marches the square problem from rest. `progress` sees every sample.
pub fn unsteady_square(
    setup: &SquareSetup,
    method: CutMethod,
    params: FluidParams,
    settings: &UnsteadySettings,
    newton: &NewtonOptions,
    mut progress: impl FnMut(f64, [f64; 2]),
) -> Result<ForceHistory> {
    let start = Instant::now();
    let mut problem = square_problem(setup, method, half_cosine_ramp(settings.ramp))?;
    problem.params = params;
    let mut history =
        ForceHistory { n_dofs: problem.n_dofs(), n_quad_points: problem.quad.counts().n_cut, ..Default::default() };
    let mut solver = LinearSolver::new();
    let mut state = FluidState::zeros(problem.space.n_basis());
    for _ in 0..settings.n_steps() {
        let (next, report) = match step_generalized_alpha(&problem, &state, settings.dt, &mut solver, newton) {
            Ok(r) => r,
            Err(e) => {
                history.failure = Some(format!("step at t = {:.3} failed: {e}", state.time + settings.dt));
                break;
            }
        };
        state = next;
        history.assembly_ms += report.assembly_ms;
        history.solve_ms += report.solve_ms;
        history.gmres_iterations += report.linear.iter().map(|l| l.gmres_iterations).sum::<usize>();
        let c = force_coefficients(&problem, &state);
        history.time.push(state.time);
        history.c_d.push(c[0]);
        history.c_l.push(c[1]);
        progress(state.time, c);
    }
    let steps = history.time.len().max(1) as f64;
    history.assembly_ms /= steps;
    history.solve_ms /= steps;
    history.wall_s = start.elapsed().as_secs_f64();
    history.factorizations = solver.factorizations;
    Ok(history)
}

/// The statistics window of a series: its last half.
pub fn stats_window(series: &[f64]) -> &[f64] {
    &series[((1.0 - STATS_WINDOW) * series.len() as f64).floor() as usize..]
}

/// Mean drag, RMS lift and Strouhal number over the statistics window.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsteadyStats {
    pub c_d_avg: f64,
    pub c_l_rms: f64,
    pub st: Result<f64, String>,
}

pub fn unsteady_stats(history: &ForceHistory, dt: f64) -> UnsteadyStats {
    let cd = stats_window(&history.c_d);
    let cl = stats_window(&history.c_l);
    if cd.is_empty() {
        return UnsteadyStats { c_d_avg: f64::NAN, c_l_rms: f64::NAN, st: Err("empty record".into()) };
    }
    UnsteadyStats {
        c_d_avg: mean(cd),
        c_l_rms: rms(cl),
        st: strouhal(cl, dt, SQUARE_D, SQUARE_U).map_err(|e| e.to_string()),
    }
}

/// `rms(a − b) / rms(b)` over the statistics window of two equally sampled
/// series.
pub fn normalized_rms_deviation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (stats_window(&a[..n]), stats_window(&b[..n]));
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    rms(&diff) / rms(b)
}

/// Spring, damper and mass of a sprung body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringMount {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Streamwise motion suppressed.
    pub transverse_only: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FsiRun {
    pub records: Vec<CouplingRecord>,
    pub n_quad_points: usize,
    pub wall_s: f64,
    pub failure: Option<String>,
}

impl FsiRun {
    /// Half the peak-to-peak transverse displacement over the statistics window.
    pub fn amplitude(&self) -> f64 {
        let y: Vec<f64> = self.records.iter().map(|r| r.displacement[1]).collect();
        let w = stats_window(&y);
        let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        0.5 * (hi - lo)
    }

    /// Drag and lift coefficients on the body from the fluid force.
    pub fn coefficients(&self, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let s = -2.0 / (rho * SQUARE_U * SQUARE_U * SQUARE_D);
        self.records.iter().map(|r| (s * r.fluid_force[0], s * r.fluid_force[1])).unzip()
    }
}

/// Staggered run of the square on springs in the channel flow.
#[allow(clippy::too_many_arguments)]
pub fn sprung_square(
    setup: &SquareSetup,
    method: CutMethod,
    params: FluidParams,
    mount: &SpringMount,
    coupling: CouplingConfig,
    settings: &UnsteadySettings,
    newton: &NewtonOptions,
    mut progress: impl FnMut(&CouplingRecord),
) -> Result<FsiRun> {
    let start = Instant::now();
    let mut problem = square_problem(setup, method, half_cosine_ramp(settings.ramp))?;
    problem.params = params;
    let body = problem.domain.boundary(SQUARE_BODY).clone();
    let n_basis = problem.space.n_basis();
    let mut fluid = CutCellFluid::new(problem, FluidState::zeros(n_basis), SQUARE_BODY);
    fluid.newton = *newton;
    let mut solid = RigidSolid::new(mount.mass, mount.stiffness, mount.damping, [mount.transverse_only, false], body)?;
    let mut coupling = Coupling::new(coupling, [0.0; 2])?;
    let mut run = FsiRun { n_quad_points: fluid.problem.quad.counts().n_cut, ..Default::default() };
    for _ in 0..settings.n_steps() {
        match coupled_step(&mut fluid, &mut solid, &mut coupling, settings.dt) {
            Ok(rec) => {
                progress(&rec);
                run.records.push(rec);
            }
            Err(e) => {
                run.failure = Some(format!("coupled step at t = {:.3} failed: {e}", coupling.time + settings.dt));
                break;
            }
        }
    }
    run.wall_s = start.elapsed().as_secs_f64();
    Ok(run)
}
