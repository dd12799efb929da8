//! Residual and exact Jacobian of the discrete equations.

use super::{BoundaryCondition, FlowProblem};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::linalg::BlockMatrix;
use crate::quadrature::gauss_legendre;
use crate::splinegrid::{BasisEval, MAX_LOCAL, N_FIELDS};

const NL3: usize = MAX_LOCAL * N_FIELDS;

/// How the time derivative enters the residual.
#[derive(Debug, Clone, Copy)]
pub enum TimeMode<'a> {
    Steady,
    /// `a* = c1 (v − v_n) + c2 a_n`, with compact `v_n` and `a_n`.
    Transient { dt: f64, c1: f64, c2: f64, v_n: &'a [f64], a_n: &'a [f64] },
}

#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub mode: TimeMode<'a>,
    /// Time at which boundary data and body forces are evaluated.
    pub time: f64,
}

impl StepInputs<'_> {
    pub fn steady() -> Self {
        Self { mode: TimeMode::Steady, time: 0.0 }
    }
}

struct Local {
    r: [f64; NL3],
    k: Vec<f64>,
    nd: usize,
}

impl Local {
    fn new(nl: usize) -> Self {
        let nd = nl * N_FIELDS;
        Self { r: [0.0; NL3], k: vec![0.0; nd * nd], nd }
    }

    fn clear(&mut self) {
        self.r.iter_mut().for_each(|v| *v = 0.0);
        self.k.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn kadd(&mut self, row: usize, col: usize, v: f64) {
        self.k[row * self.nd + col] += v;
    }
}

/// Assembles the residual at compact unknowns `x` and, if requested, its
/// Jacobian. Pinned pressure rows become identity rows with zero residual.
pub fn assemble(problem: &FlowProblem, inputs: &StepInputs<'_>, x: &[f64], jacobian: bool) -> Result<(Vec<f64>, Option<BlockMatrix>)> {
    let n = problem.n_dofs();
    if x.len() != n {
        return Err(Error::Argument(format!("state has {} entries, expected {n}", x.len())));
    }
    let mut res = vec![0.0; n];
    let mut mat = jacobian.then(|| BlockMatrix::zeros(problem.pattern.clone()));
    let nl = problem.space.n_local();
    let mut loc = Local::new(nl);
    let mut xl = [0.0; NL3];
    let mut vnl = [0.0; NL3];
    let mut anl = [0.0; NL3];

    // Volume terms, grouped per element; interface points are added to the
    // element they live in.
    let mut iface_of_cell: Vec<Vec<usize>> = vec![Vec::new(); problem.space.n_elements()];
    for (k, piece) in problem.quad.interface.pieces.iter().enumerate() {
        iface_of_cell[piece.cell_id].push(k);
    }
    let mut visited = vec![false; problem.space.n_elements()];
    let cells: Vec<usize> = problem
        .quad
        .cells
        .iter()
        .filter(|c| c.n_points() > 0)
        .map(|c| c.cell_id)
        .chain(problem.quad.interface.pieces.iter().map(|p| p.cell_id))
        .collect();
    let cell_quad: std::collections::HashMap<usize, usize> =
        problem.quad.cells.iter().enumerate().map(|(k, c)| (c.cell_id, k)).collect();

    for e in cells {
        if visited[e] {
            continue;
        }
        visited[e] = true;
        let (nodes, _) = problem.element_nodes(e);
        let nodes = &nodes[..nl];
        for (a, &g) in nodes.iter().enumerate() {
            for c in 0..N_FIELDS {
                xl[N_FIELDS * a + c] = x[N_FIELDS * g + c];
                if let TimeMode::Transient { v_n, a_n, .. } = inputs.mode {
                    vnl[N_FIELDS * a + c] = v_n[N_FIELDS * g + c];
                    anl[N_FIELDS * a + c] = a_n[N_FIELDS * g + c];
                }
            }
        }
        loc.clear();
        if let Some(&k) = cell_quad.get(&e) {
            let cq = &problem.quad.cells[k];
            for (pt, &w) in cq.points.iter().zip(&cq.weights) {
                let ev = problem.eval_basis_at(e, *pt);
                volume_point(problem, inputs, &ev, w, *pt, &xl, &vnl, &anl, &mut loc, jacobian);
            }
        }
        for &k in &iface_of_cell[e] {
            let piece = &problem.quad.interface.pieces[k];
            let bc = problem.bcs[piece.boundary_id].condition(piece.segment_id);
            let BoundaryCondition::Dirichlet(g) = bc else { continue };
            for (pt, &w) in piece.points.iter().zip(&piece.weights) {
                let ev = problem.eval_basis_at(e, *pt);
                let vbar = g(*pt, inputs.time);
                nitsche_point(problem, &ev, w, piece.normal, vbar, &xl, &mut loc, jacobian);
            }
        }
        if loc.r[..loc.nd].iter().any(|v| !v.is_finite()) || loc.k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteAssembly { cell: e });
        }
        for (a, &g) in nodes.iter().enumerate() {
            for c in 0..N_FIELDS {
                res[N_FIELDS * g + c] += loc.r[N_FIELDS * a + c];
            }
        }
        if let Some(m) = mat.as_mut() {
            m.add_local(nodes, &loc.k);
        }
    }

    ghost_penalty(problem, x, &mut res, mat.as_mut())?;

    if let Some(pin) = problem.pressure_pin {
        res[pin] = 0.0;
        if let Some(m) = mat.as_mut() {
            m.set_identity_row(pin);
        }
    }
    Ok((res, mat))
}

/// Interpolated fields at one point.
struct Fields {
    u: [f64; 2],
    /// `gu[i][j] = ∂u_i/∂x_j`
    gu: [[f64; 2]; 2],
    lap: [f64; 2],
    p: f64,
    gp: [f64; 2],
}

fn interpolate(ev: &BasisEval, xl: &[f64]) -> Fields {
    let mut f = Fields { u: [0.0; 2], gu: [[0.0; 2]; 2], lap: [0.0; 2], p: 0.0, gp: [0.0; 2] };
    for a in 0..ev.n {
        let (nv, g, hs) = (ev.values[a], ev.grads[a], ev.hessians[a]);
        for i in 0..2 {
            let c = xl[N_FIELDS * a + i];
            f.u[i] += nv * c;
            f.gu[i][0] += g[0] * c;
            f.gu[i][1] += g[1] * c;
            f.lap[i] += (hs[0] + hs[2]) * c;
        }
        let c = xl[N_FIELDS * a + 2];
        f.p += nv * c;
        f.gp[0] += g[0] * c;
        f.gp[1] += g[1] * c;
    }
    f
}

#[allow(clippy::too_many_arguments)]
fn volume_point(
    problem: &FlowProblem,
    inputs: &StepInputs<'_>,
    ev: &BasisEval,
    w: f64,
    pt: Point2,
    xl: &[f64],
    vnl: &[f64],
    anl: &[f64],
    loc: &mut Local,
    jacobian: bool,
) {
    let prm = &problem.params;
    let (rho, mu) = (prm.rho, prm.mu);
    let h = problem.h();
    let conv = prm.convection;
    let f = interpolate(ev, xl);
    let nl = ev.n;

    let (c1, mut astar) = match inputs.mode {
        TimeMode::Steady => (0.0, [0.0; 2]),
        TimeMode::Transient { c1, c2, .. } => {
            let mut a = [0.0; 2];
            for b in 0..nl {
                for i in 0..2 {
                    let k = N_FIELDS * b + i;
                    a[i] += ev.values[b] * (c1 * (xl[k] - vnl[k]) + c2 * anl[k]);
                }
            }
            (c1, a)
        }
    };
    if let Some(bf) = &problem.body_force {
        let fb = bf(pt, inputs.time);
        astar[0] -= fb[0];
        astar[1] -= fb[1];
    }
    let convective = if conv {
        [f.u[0] * f.gu[0][0] + f.u[1] * f.gu[0][1], f.u[0] * f.gu[1][0] + f.u[1] * f.gu[1][1]]
    } else {
        [0.0; 2]
    };
    // Inertial part of the strong residual, including the body force.
    let inert = [astar[0] + convective[0], astar[1] + convective[1]];
    let r = [rho * inert[0] - mu * f.lap[0] + f.gp[0], rho * inert[1] - mu * f.lap[1] + f.gp[1]];

    let unorm2 = f.u[0] * f.u[0] + f.u[1] * f.u[1];
    let mut inv2 = (prm.c_i * mu / (rho * h * h)).powi(2);
    if let (TimeMode::Transient { dt, .. }, true) = (inputs.mode, prm.tau_dt) {
        inv2 += (2.0 / dt).powi(2);
    }
    if conv {
        inv2 += 4.0 * unorm2 / (h * h);
    }
    let tau = 1.0 / inv2.sqrt();
    // ∂τ/∂u_j (times N_B gives the derivative w.r.t. a coefficient).
    let dtau = if conv {
        let s = -4.0 * tau.powi(3) / (h * h);
        [s * f.u[0], s * f.u[1]]
    } else {
        [0.0; 2]
    };
    let div = f.gu[0][0] + f.gu[1][1];
    let tau_c = if prm.lsic { h * h * rho / (4.0 * tau) } else { 0.0 };
    let dtau_c = if prm.lsic { -h * h * rho / (4.0 * tau * tau) } else { 0.0 };

    let ug = |a: usize| if conv { f.u[0] * ev.grads[a][0] + f.u[1] * ev.grads[a][1] } else { 0.0 };

    for a in 0..nl {
        let na = ev.values[a];
        let ga = ev.grads[a];
        let ug_a = ug(a);
        for i in 0..2 {
            let v = rho * na * inert[i] + mu * (ga[0] * f.gu[i][0] + ga[1] * f.gu[i][1]) - f.p * ga[i]
                + tau * ug_a * r[i]
                + tau_c * ga[i] * div;
            loc.r[N_FIELDS * a + i] += w * v;
        }
        let ga_r = ga[0] * r[0] + ga[1] * r[1];
        loc.r[N_FIELDS * a + 2] += w * (na * div + tau / rho * ga_r);
    }
    if !jacobian {
        return;
    }

    for b in 0..nl {
        let nb = ev.values[b];
        let gb = ev.grads[b];
        let lb = ev.hessians[b][0] + ev.hessians[b][2];
        let ug_b = ug(b);
        // dr[i][j] = ∂r_i/∂v_{B j}; dconv likewise for the convective term.
        let mut dconv = [[0.0; 2]; 2];
        let mut dr = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let dij = if i == j { 1.0 } else { 0.0 };
                if conv {
                    dconv[i][j] = nb * f.gu[i][j] + dij * ug_b;
                }
                dr[i][j] = rho * (c1 * nb * dij + dconv[i][j]) - mu * dij * lb;
            }
        }
        for a in 0..nl {
            let na = ev.values[a];
            let ga = ev.grads[a];
            let ug_a = ug(a);
            let gagb = ga[0] * gb[0] + ga[1] * gb[1];
            let ga_r = ga[0] * r[0] + ga[1] * r[1];
            for i in 0..2 {
                let row = N_FIELDS * a + i;
                for j in 0..2 {
                    let dij = if i == j { 1.0 } else { 0.0 };
                    let mut v = rho * na * (c1 * nb * dij + dconv[i][j]) + mu * dij * gagb;
                    let dtau_bj = dtau[j] * nb;
                    v += dtau_bj * ug_a * r[i];
                    if conv {
                        v += tau * nb * ga[j] * r[i];
                    }
                    v += tau * ug_a * dr[i][j];
                    v += tau_c * ga[i] * gb[j] + dtau_c * dtau_bj * ga[i] * div;
                    loc.kadd(row, N_FIELDS * b + j, w * v);
                }
                loc.kadd(row, N_FIELDS * b + 2, w * (-nb * ga[i] + tau * ug_a * gb[i]));
            }
            let row = N_FIELDS * a + 2;
            for j in 0..2 {
                let ga_dr = ga[0] * dr[0][j] + ga[1] * dr[1][j];
                let v = na * gb[j] + (dtau[j] * nb * ga_r + tau * ga_dr) / rho;
                loc.kadd(row, N_FIELDS * b + j, w * v);
            }
            loc.kadd(row, N_FIELDS * b + 2, w * tau / rho * gagb);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn nitsche_point(
    problem: &FlowProblem,
    ev: &BasisEval,
    w: f64,
    n: Point2,
    vbar: [f64; 2],
    xl: &[f64],
    loc: &mut Local,
    jacobian: bool,
) {
    let mu = problem.params.mu;
    let pen = problem.params.gamma_n * mu / problem.h();
    let f = interpolate(ev, xl);
    let du = [f.u[0] - vbar[0], f.u[1] - vbar[1]];
    let nl = ev.n;
    for a in 0..nl {
        let na = ev.values[a];
        let gan = ev.grads[a][0] * n[0] + ev.grads[a][1] * n[1];
        for i in 0..2 {
            let trac = mu * (f.gu[i][0] * n[0] + f.gu[i][1] * n[1]) - f.p * n[i];
            loc.r[N_FIELDS * a + i] += w * (-na * trac + mu * gan * du[i] + pen * na * du[i]);
        }
        loc.r[N_FIELDS * a + 2] += w * (-na * (n[0] * du[0] + n[1] * du[1]));
    }
    if !jacobian {
        return;
    }
    for b in 0..nl {
        let nb = ev.values[b];
        let gbn = ev.grads[b][0] * n[0] + ev.grads[b][1] * n[1];
        for a in 0..nl {
            let na = ev.values[a];
            let gan = ev.grads[a][0] * n[0] + ev.grads[a][1] * n[1];
            let vv = -na * mu * gbn + mu * gan * nb + pen * na * nb;
            for i in 0..2 {
                loc.kadd(N_FIELDS * a + i, N_FIELDS * b + i, w * vv);
                loc.kadd(N_FIELDS * a + i, N_FIELDS * b + 2, w * na * nb * n[i]);
                loc.kadd(N_FIELDS * a + 2, N_FIELDS * b + i, -w * na * nb * n[i]);
            }
        }
    }
}

/// Normal-derivative jumps of order `p` across faces next to cut cells.
fn ghost_penalty(problem: &FlowProblem, x: &[f64], res: &mut [f64], mut mat: Option<&mut BlockMatrix>) -> Result<()> {
    let gg = problem.params.gamma_g;
    if gg == 0.0 || problem.faces.is_empty() {
        return Ok(());
    }
    let space = &problem.space;
    let p = space.degree;
    let mu = problem.params.mu;
    let h = problem.h();
    let order = p.min(2) as i32;
    let scale_v = gg * mu * h.powi(2 * order - 1);
    let scale_p = gg * h.powi(2 * order + 1) / mu;
    let rule = gauss_legendre(p + 2)?;
    let nl = space.n_local();

    for face in &problem.faces {
        let m = face.nodes.len();
        let (nm, _) = problem.element_nodes(face.minus);
        let (np, _) = problem.element_nodes(face.plus);
        let pos = |g: usize| face.nodes.binary_search(&g).expect("face node");
        let len = space.h[1 - face.axis];
        let mut k = vec![0.0; m * m];
        for (q, &wq) in rule.points.iter().zip(&rule.weights) {
            let t = 0.5 * (q[0] + 1.0);
            let w = 0.5 * wq * len;
            let (xm, xp) = if face.axis == 0 { ([1.0, t], [0.0, t]) } else { ([t, 1.0], [t, 0.0]) };
            let em = space.eval_basis(face.minus, xm);
            let ep = space.eval_basis(face.plus, xp);
            let deriv = |ev: &BasisEval, a: usize| -> f64 {
                if order == 1 {
                    ev.grads[a][face.axis]
                } else if face.axis == 0 {
                    ev.hessians[a][0]
                } else {
                    ev.hessians[a][2]
                }
            };
            let mut jump = vec![0.0; m];
            for a in 0..nl {
                jump[pos(np[a])] += deriv(&ep, a);
                jump[pos(nm[a])] -= deriv(&em, a);
            }
            for a in 0..m {
                for b in 0..m {
                    k[a * m + b] += w * jump[a] * jump[b];
                }
            }
        }
        for a in 0..m {
            let ga = face.nodes[a];
            for b in 0..m {
                let gb = face.nodes[b];
                let kab = k[a * m + b];
                for c in 0..N_FIELDS {
                    let s = if c == 2 { scale_p } else { scale_v };
                    res[N_FIELDS * ga + c] += s * kab * x[N_FIELDS * gb + c];
                }
            }
        }
        if let Some(mat) = mat.as_deref_mut() {
            let nd = m * N_FIELDS;
            let mut local = vec![0.0; nd * nd];
            for a in 0..m {
                for b in 0..m {
                    for c in 0..N_FIELDS {
                        let s = if c == 2 { scale_p } else { scale_v };
                        local[(a * N_FIELDS + c) * nd + b * N_FIELDS + c] = s * k[a * m + b];
                    }
                }
            }
            mat.add_local(&face.nodes, &local);
        }
    }
    Ok(())
}
