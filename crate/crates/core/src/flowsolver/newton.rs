//! Newton iteration on the assembled system.

use std::time::Instant;

use super::{assemble, FlowProblem, StepInputs};
use crate::error::{Error, Result};
use crate::linalg::{norm2, LinearSolver, SolveInfo};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when `‖R‖ < rtol · max(1, ‖R0‖)`.
    pub rtol: f64,
    pub max_iterations: usize,
    /// Solve with GMRES preconditioned by the last factorization when possible.
    pub reuse_factorization: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, max_iterations: 25, reuse_factorization: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    /// Number of linear solves performed.
    pub iterations: usize,
    /// Residual norm before each solve and after the last one.
    pub residual_trace: Vec<f64>,
    pub assembly_ms: f64,
    pub solve_ms: f64,
    pub linear: Vec<SolveInfo>,
}

/// Drives the residual of `problem` to zero starting from compact `x0`.
///
/// When the pressure is pinned the converged pressure is shifted to zero
/// fluid-domain mean before returning.
pub fn newton_solve(
    problem: &FlowProblem,
    inputs: &StepInputs<'_>,
    x0: Vec<f64>,
    solver: &mut LinearSolver,
    options: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonReport)> {
    let mut x = x0;
    let mut report = NewtonReport::default();
    let mut r0 = None;
    loop {
        let t = Instant::now();
        let (res, mat) = assemble(problem, inputs, &x, true)?;
        report.assembly_ms += t.elapsed().as_secs_f64() * 1e3;
        let rn = norm2(&res);
        report.residual_trace.push(rn);
        if !rn.is_finite() {
            return Err(Error::Divergence { iterations: report.iterations, last_residual: rn });
        }
        let target = options.rtol * r0.get_or_insert(rn).max(1.0);
        if rn < target {
            if problem.pressure_pin.is_some() {
                problem.remove_pressure_mean(&mut x);
            }
            return Ok((x, report));
        }
        if report.iterations >= options.max_iterations {
            return Err(Error::Divergence { iterations: report.iterations, last_residual: rn });
        }
        let mat = mat.expect("jacobian requested");
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let t = Instant::now();
        let solved = if options.reuse_factorization {
            solver.solve_reusing(&mat, &rhs)
        } else {
            solver.solve_direct(&mat, &rhs)
        };
        report.solve_ms += t.elapsed().as_secs_f64() * 1e3;
        let (dx, info) = solved.map_err(|e| match e {
            Error::LinearSolver { reason, .. } => Error::LinearSolver {
                reason,
                newton_iterations: report.iterations,
                trace: report.residual_trace.clone(),
            },
            other => other,
        })?;
        report.linear.push(info);
        report.iterations += 1;
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    }
}
