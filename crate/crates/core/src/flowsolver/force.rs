//! Interface tractions and resultant forces.

use super::{FlowProblem, FluidState};
use crate::geometry::Point2;

/// `σ·n = μ ∇v·n − p n` at `x` in element `e`.
pub fn traction_at(problem: &FlowProblem, state: &FluidState, e: usize, x: Point2, n: Point2) -> [f64; 2] {
    let (_, g, p) = state.eval_in(&problem.space, e, x);
    let mu = problem.params.mu;
    [
        mu * (g[0][0] * n[0] + g[0][1] * n[1]) - p * n[0],
        mu * (g[1][0] * n[0] + g[1][1] * n[1]) - p * n[1],
    ]
}

/// Force exerted by the fluid on the solid bounded by `boundary`.
///
/// The interface normal points into the solid, so the traction acting on
/// the solid is `−σ·n`.
pub fn compute_force(problem: &FlowProblem, state: &FluidState, boundary: usize) -> [f64; 2] {
    let mut f = [0.0; 2];
    for piece in problem.quad.interface.pieces_of_boundary(boundary) {
        for (pt, &w) in piece.points.iter().zip(&piece.weights) {
            let t = traction_at(problem, state, piece.cell_id, *pt, piece.normal);
            f[0] -= w * t[0];
            f[1] -= w * t[1];
        }
    }
    f
}
