//! Generalized-alpha integration of the first-order fluid system.

use super::{newton_solve, FlowProblem, FluidState, NewtonOptions, NewtonReport, StepInputs, TimeMode};
use crate::error::{Error, Result};
use crate::linalg::LinearSolver;

/// Generalized-alpha constants for `ẏ = f(y)` parameterized by the spectral
/// radius at infinite step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedAlpha {
    pub rho_inf: f64,
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub gamma: f64,
}

impl GeneralizedAlpha {
    pub fn new(rho_inf: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_inf) {
            return Err(Error::Argument(format!("spectral radius {rho_inf} outside [0, 1]")));
        }
        let alpha_m = 0.5 * (3.0 - rho_inf) / (1.0 + rho_inf);
        let alpha_f = 1.0 / (1.0 + rho_inf);
        Ok(Self { rho_inf, alpha_m, alpha_f, gamma: 0.5 + alpha_m - alpha_f })
    }
}

impl Default for GeneralizedAlpha {
    fn default() -> Self {
        Self::new(0.0).expect("valid radius")
    }
}

/// One step of `ẏ = λ y`; returns `(y_{n+1}, ẏ_{n+1})`.
pub fn scalar_step(ga: &GeneralizedAlpha, lambda: f64, dt: f64, y: f64, ydot: f64) -> (f64, f64) {
    // Unknown ẏ_{n+1} = a. With y_{n+1} = y + dt (ydot + γ (a − ydot)):
    // α_m a + (1 − α_m) ydot = λ (y + α_f (y_{n+1} − y)).
    let (am, af, g) = (ga.alpha_m, ga.alpha_f, ga.gamma);
    let rhs = lambda * (y + af * dt * (1.0 - g) * ydot) - (1.0 - am) * ydot;
    let a = rhs / (am - lambda * af * dt * g);
    (y + dt * (ydot + g * (a - ydot)), a)
}

/// Amplification matrix of [`scalar_step`] acting on `(y, ẏ)`.
pub fn scalar_amplification(ga: &GeneralizedAlpha, lambda: f64, dt: f64) -> [[f64; 2]; 2] {
    let c0 = scalar_step(ga, lambda, dt, 1.0, 0.0);
    let c1 = scalar_step(ga, lambda, dt, 0.0, 1.0);
    [[c0.0, c1.0], [c0.1, c1.1]]
}

/// Advances `state` by `dt` with the end-of-step residual (`α_f = 1`).
pub fn step_generalized_alpha(
    problem: &FlowProblem,
    state: &FluidState,
    dt: f64,
    solver: &mut LinearSolver,
    options: &NewtonOptions,
) -> Result<(FluidState, NewtonReport)> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    let ga = GeneralizedAlpha::default();
    let v_n = problem.gather(&state.coeffs);
    let a_n = problem.gather(&state.accel);
    let c1 = ga.alpha_m / (ga.gamma * dt);
    let c2 = 1.0 - ga.alpha_m / ga.gamma;
    let inputs = StepInputs { mode: TimeMode::Transient { dt, c1, c2, v_n: &v_n, a_n: &a_n }, time: state.time + dt };
    // Start from the state reached with the old rate.
    let x0: Vec<f64> = v_n.iter().zip(&a_n).map(|(v, a)| v + dt * a).collect();
    let (x, report) = newton_solve(problem, &inputs, x0, solver, options)?;
    let a: Vec<f64> = x
        .iter()
        .zip(&v_n)
        .zip(&a_n)
        .map(|((v, vn), an)| (v - vn) / (ga.gamma * dt) - (1.0 - ga.gamma) / ga.gamma * an)
        .collect();
    let mut next = state.clone();
    problem.scatter(&x, &mut next.coeffs);
    problem.scatter(&a, &mut next.accel);
    next.time = state.time + dt;
    Ok((next, report))
}
