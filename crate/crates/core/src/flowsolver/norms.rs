//! Error norms, L2 projection and field sampling.

use std::io::Write;
use std::sync::Arc;

use super::{FlowProblem, FluidState};
use crate::error::Result;
use crate::geometry::Point2;
use crate::linalg::{BlockMatrix, BlockPattern, LinearSolver};
use crate::quadrature::{DomainQuadrature, QuadratureOptions};
use crate::splinegrid::N_FIELDS;

/// Relative L2 errors over the fluid domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub e_v: f64,
    pub e_p: f64,
}

/// Relative velocity and mean-free pressure errors, integrated with a
/// high-order subtriangulation rule independent of the solve-time rule.
pub fn error_norms(
    problem: &FlowProblem,
    state: &FluidState,
    exact: impl Fn(Point2) -> (f64, f64, f64),
) -> Result<ErrorNorms> {
    let quad = DomainQuadrature::build(
        &problem.space.cartesian(),
        &problem.domain,
        QuadratureOptions::for_error_norms(problem.space.degree),
    )?;
    let mut samples = Vec::with_capacity(quad.cells.iter().map(|c| c.n_points()).sum());
    let (mut area, mut mh, mut me) = (0.0, 0.0, 0.0);
    for cq in &quad.cells {
        for (pt, &w) in cq.points.iter().zip(&cq.weights) {
            let (u, _, p) = state.eval_in(&problem.space, cq.cell_id, *pt);
            let (ex, ey, ep) = exact(*pt);
            area += w;
            mh += w * p;
            me += w * ep;
            samples.push((w, [u[0] - ex, u[1] - ey], [ex, ey], p, ep));
        }
    }
    mh /= area;
    me /= area;
    let (mut ev, mut nv, mut ep2, mut np) = (0.0, 0.0, 0.0, 0.0);
    for (w, du, ue, p, pe) in samples {
        ev += w * (du[0] * du[0] + du[1] * du[1]);
        nv += w * (ue[0] * ue[0] + ue[1] * ue[1]);
        let dp = (p - mh) - (pe - me);
        ep2 += w * dp * dp;
        np += w * (pe - me) * (pe - me);
    }
    let rel = |e: f64, n: f64| if n > 0.0 { (e / n).sqrt() } else { e.sqrt() };
    Ok(ErrorNorms { e_v: rel(ev, nv), e_p: rel(ep2, np) })
}

/// L2 projections of several scalar functions onto the active spline space
/// over the fluid domain; returns one compact coefficient vector per function.
pub fn l2_project(problem: &FlowProblem, fs: &[&dyn Fn(Point2) -> f64]) -> Result<Vec<Vec<f64>>> {
    let quad = DomainQuadrature::build(
        &problem.space.cartesian(),
        &problem.domain,
        QuadratureOptions::for_error_norms(problem.space.degree),
    )?;
    let n = problem.dofmap.n_active();
    let nl = problem.space.n_local();
    let cells: Vec<_> = quad.cells.iter().filter(|c| c.n_points() > 0).collect();
    let patches: Vec<Vec<usize>> = cells.iter().map(|c| problem.element_nodes(c.cell_id).0[..nl].to_vec()).collect();
    let pattern = Arc::new(BlockPattern::from_patches(n, 1, patches.iter().map(|v| v.as_slice())));
    let mut mass = BlockMatrix::zeros(pattern);
    let mut rhs = vec![vec![0.0; n]; fs.len()];
    let mut local = vec![0.0; nl * nl];
    for (cq, nodes) in cells.iter().zip(&patches) {
        local.iter_mut().for_each(|v| *v = 0.0);
        for (pt, &w) in cq.points.iter().zip(&cq.weights) {
            let ev = problem.eval_basis_at(cq.cell_id, *pt);
            for a in 0..nl {
                for b in 0..nl {
                    local[a * nl + b] += w * ev.values[a] * ev.values[b];
                }
            }
            for (f, r) in fs.iter().zip(rhs.iter_mut()) {
                let fv = f(*pt);
                for a in 0..nl {
                    r[nodes[a]] += w * ev.values[a] * fv;
                }
            }
        }
        mass.add_local(nodes, &local);
    }
    let mut solver = LinearSolver::new();
    rhs.iter().map(|r| solver.solve_direct(&mass, r).map(|(x, _)| x)).collect()
}

/// Full state whose coefficients are the L2 projection of `f = (vx, vy, p)`.
pub fn project_state(problem: &FlowProblem, f: impl Fn(Point2) -> (f64, f64, f64)) -> Result<FluidState> {
    let fx = |x: Point2| f(x).0;
    let fy = |x: Point2| f(x).1;
    let fp = |x: Point2| f(x).2;
    let parts = l2_project(problem, &[&fx, &fy, &fp])?;
    let mut compact = vec![0.0; problem.n_dofs()];
    for (c, part) in parts.iter().enumerate() {
        for (a, v) in part.iter().enumerate() {
            compact[N_FIELDS * a + c] = *v;
        }
    }
    let mut state = FluidState::zeros(problem.space.n_basis());
    problem.scatter(&compact, &mut state.coeffs);
    Ok(state)
}

/// Writes `x y vx vy p` on a row-major lattice of `n[0] × n[1]` points
/// spanning `[lo, hi]`; points outside the fluid are written as `nan`.
pub fn write_field_dump(
    problem: &FlowProblem,
    state: &FluidState,
    lo: Point2,
    hi: Point2,
    n: [usize; 2],
    out: &mut impl Write,
) -> Result<()> {
    writeln!(out, "x y vx vy p")?;
    let step = |k: usize, ax: usize| {
        if n[ax] > 1 {
            lo[ax] + (hi[ax] - lo[ax]) * k as f64 / (n[ax] - 1) as f64
        } else {
            0.5 * (lo[ax] + hi[ax])
        }
    };
    for j in 0..n[1] {
        for i in 0..n[0] {
            let x = [step(i, 0), step(j, 1)];
            let inside = problem.domain.point_inside(x);
            match (inside, problem.space.locate(x)) {
                (true, Ok((e, _))) if problem.dofmap.active_elements[e] => {
                    let (u, _, p) = state.eval_in(&problem.space, e, x);
                    writeln!(out, "{} {} {} {} {}", x[0], x[1], u[0], u[1], p)?;
                }
                _ => writeln!(out, "{} {} nan nan nan", x[0], x[1])?,
            }
        }
    }
    Ok(())
}
