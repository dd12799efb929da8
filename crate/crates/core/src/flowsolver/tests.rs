use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{regular_polygon, subdivided_rectangle, FluidSide, PolygonBoundary};
use crate::harness::kovasznay_problem;
use crate::linalg::{norm2, LinearSolver};
use crate::quadrature::CutMethod;

fn box_with_body(n: usize, degree: usize, body: Vec<Point2>, outer_bc: BoundaryCondition) -> FlowProblem {
    let space = BsplineGrid::new([-2.0, -2.0], [2.0, 2.0], [n, n], degree).unwrap();
    let outer = PolygonBoundary::new(subdivided_rectangle([-1.71, -1.63], [1.67, 1.69], 2), FluidSide::Interior).unwrap();
    let body = PolygonBoundary::new(body, FluidSide::Exterior).unwrap();
    let bcs = vec![
        BoundaryConditions::uniform(outer_bc, outer.n_segments()),
        BoundaryConditions::uniform(BoundaryCondition::no_slip(), body.n_segments()),
    ];
    let domain = FluidDomain::new(vec![outer, body]).unwrap();
    FlowProblem::new(space, domain, FluidParams::default(), bcs, QuadratureOptions::for_degree(CutMethod::Subtriangulation, degree))
        .unwrap()
}

fn random_state(problem: &FlowProblem, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..problem.n_dofs()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn fd_check(problem: &FlowProblem, inputs: &StepInputs<'_>, x: &[f64], seed: u64) -> f64 {
    let (_, jac) = assemble(problem, inputs, x, true).unwrap();
    let jac = jac.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let d: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        let rp = assemble(problem, inputs, &xp, false).unwrap().0;
        let rm = assemble(problem, inputs, &xm, false).unwrap().0;
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let mut jd = vec![0.0; x.len()];
        jac.matvec(&d, &mut jd);
        let mut diff: Vec<f64> = fd.iter().zip(&jd).map(|(a, b)| a - b).collect();
        // The pinned pressure row is a constraint, not a residual derivative.
        if let Some(pin) = problem.pressure_pin {
            diff[pin] = 0.0;
            jd[pin] = 0.0;
        }
        worst = worst.max(norm2(&diff) / norm2(&jd));
    }
    worst
}

#[test]
fn homogeneous_problem_has_zero_residual() {
    let p = box_with_body(12, 1, regular_polygon([0.1, 0.05], 0.6, 4, 0.3), BoundaryCondition::no_slip());
    let x = vec![0.0; p.n_dofs()];
    let (r, _) = assemble(&p, &StepInputs::steady(), &x, false).unwrap();
    assert_eq!(norm2(&r), 0.0);
}

#[test]
fn jacobian_matches_finite_differences() {
    for degree in [1, 2] {
        let mut p = box_with_body(10, degree, regular_polygon([0.1, 0.05], 0.6, 5, 0.3), BoundaryCondition::constant([1.0, 0.2]));
        p.params.mu = 0.05;
        let x = random_state(&p, 7 + degree as u64, 1.0);
        let steady = fd_check(&p, &StepInputs::steady(), &x, 1);
        assert!(steady < 1e-6, "steady p={degree}: {steady:e}");

        let vn = random_state(&p, 11, 0.5);
        let an = random_state(&p, 12, 0.5);
        let inputs = StepInputs { mode: TimeMode::Transient { dt: 0.1, c1: 15.0, c2: -0.5, v_n: &vn, a_n: &an }, time: 0.3 };
        p.params.lsic = true;
        let transient = fd_check(&p, &inputs, &x, 2);
        assert!(transient < 1e-6, "transient p={degree}: {transient:e}");
    }
}

#[test]
fn stokes_limit_converges_in_one_iteration() {
    let mut p = box_with_body(12, 1, regular_polygon([0.1, 0.05], 0.6, 6, 0.1), BoundaryCondition::constant([1.0, 0.0]));
    p.params.convection = false;
    let mut solver = LinearSolver::new();
    let x0 = vec![0.0; p.n_dofs()];
    let (_, rep) = newton_solve(&p, &StepInputs::steady(), x0, &mut solver, &NewtonOptions::default()).unwrap();
    assert_eq!(rep.iterations, 1, "{:?}", rep.residual_trace);
}

#[test]
fn kovasznay_newton_converges_quickly() {
    let p = kovasznay_problem(31, 1, CutMethod::Subtriangulation, 40.0, FluidParams::default()).unwrap();
    let mut solver = LinearSolver::new();
    let x0 = vec![0.0; p.n_dofs()];
    let (_, rep) = newton_solve(&p, &StepInputs::steady(), x0, &mut solver, &NewtonOptions::default()).unwrap();
    assert!(rep.iterations <= 8, "{:?}", rep.residual_trace);
}

#[test]
fn body_force_enters_residual() {
    let mut p = box_with_body(8, 1, regular_polygon([0.0, 0.0], 0.5, 4, 0.2), BoundaryCondition::no_slip());
    p.body_force = Some(Arc::new(|_, _| [1.0, 0.0]));
    let x = vec![0.0; p.n_dofs()];
    let (r, _) = assemble(&p, &StepInputs::steady(), &x, false).unwrap();
    // Σ_A ρ N_A f = ρ |Ω| f by partition of unity.
    let sum_x: f64 = (0..p.dofmap.n_active()).map(|a| r[3 * a]).sum();
    let area = p.quad.total_weight();
    assert!((sum_x + area).abs() < 1e-10 * area, "{sum_x} {area}");
}

fn solve_steady(p: &FlowProblem, rtol: f64) -> FluidState {
    let mut solver = LinearSolver::new();
    let opts = NewtonOptions { rtol, ..NewtonOptions::default() };
    let (x, _) = newton_solve(p, &StepInputs::steady(), vec![0.0; p.n_dofs()], &mut solver, &opts).unwrap();
    let mut st = FluidState::zeros(p.space.n_basis());
    p.scatter(&x, &mut st.coeffs);
    st
}

fn kovasznay(x: Point2) -> (f64, f64, f64) {
    kovasznay_exact(x[0], x[1], 40.0, 0.0)
}

#[test]
fn stationary_state_is_a_fixed_point_of_time_stepping() {
    let p = kovasznay_problem(21, 1, CutMethod::Subtriangulation, 40.0, FluidParams::default()).unwrap();
    let mut st = solve_steady(&p, 1e-12);
    let mut solver = LinearSolver::new();
    let opts = NewtonOptions { rtol: 1e-12, ..NewtonOptions::default() };
    // τ carries a Δt term in transient steps, so march to the stationary
    // state of the stepping scheme first.
    let mut change = f64::INFINITY;
    for _ in 0..200 {
        let (next, _) = step_generalized_alpha(&p, &st, 0.1, &mut solver, &opts).unwrap();
        let a = p.gather(&st.coeffs);
        let b = p.gather(&next.coeffs);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        change = norm2(&diff) / norm2(&a);
        st = next;
        if change < 1e-10 {
            break;
        }
    }
    assert!(change < 1e-10, "{change}");
    assert!((st.time - (st.time / 0.1).round() * 0.1).abs() < 1e-9);
}

#[test]
fn quiescent_fluid_exerts_no_net_force() {
    let p = box_with_body(16, 2, regular_polygon([0.13, -0.07], 0.7, 7, 0.4), BoundaryCondition::no_slip());
    let st = project_state(&p, |_| (0.0, 0.0, 3.5)).unwrap();
    let f = compute_force(&p, &st, 1);
    assert!(f[0].abs() < 1e-10 && f[1].abs() < 1e-10, "{f:?}");
}

#[test]
fn linear_shear_traction_is_exact() {
    let mu = 0.7;
    let mut p = box_with_body(12, 1, regular_polygon([0.1, 0.05], 0.6, 4, 0.0), BoundaryCondition::no_slip());
    p.params.mu = mu;
    // u = (2y + 1, 0), p = 0.3: traction on a face with normal n is μ(∇u)n − p n.
    let st = project_state(&p, |x| (2.0 * x[1] + 1.0, 0.0, 0.3)).unwrap();
    for piece in p.quad.interface.pieces_of_boundary(1) {
        let n = piece.normal;
        for pt in &piece.points {
            let t = traction_at(&p, &st, piece.cell_id, *pt, n);
            let expect = [mu * 2.0 * n[1] - 0.3 * n[0], -0.3 * n[1]];
            assert!((t[0] - expect[0]).abs() < 1e-8 && (t[1] - expect[1]).abs() < 1e-8, "{t:?} {expect:?}");
        }
    }
}

#[test]
fn couette_flow_is_independent_of_the_penalty() {
    // Linear shear solves the Navier-Stokes equations and lies in the Q1 space,
    // so consistent weak boundary terms reproduce it for any penalty.
    let shear = |x: Point2, _t: f64| [x[1], 0.0];
    let make = |g: f64| {
        let space = BsplineGrid::new([-1.0, -1.0], [1.0, 1.0], [10, 10], 1).unwrap();
        let outer = PolygonBoundary::new(subdivided_rectangle([-0.71, -0.66], [0.69, 0.73], 3), FluidSide::Interior).unwrap();
        let bcs = vec![BoundaryConditions::uniform(BoundaryCondition::Dirichlet(Arc::new(shear)), outer.n_segments())];
        let prm = FluidParams { gamma_n: g, mu: 0.1, ..FluidParams::default() };
        let p = FlowProblem::new(space, FluidDomain::single(outer), prm, bcs, QuadratureOptions::for_degree(CutMethod::Subtriangulation, 1))
            .unwrap();
        let st = solve_steady(&p, 1e-12);
        error_norms(&p, &st, |x| (x[1], 0.0, 0.0)).unwrap()
    };
    for g in [10.0, 20.0] {
        let e = make(g);
        assert!(e.e_v < 1e-9 && e.e_p < 1e-6, "{e:?}");
    }
}

#[test]
fn zero_state_has_unit_velocity_error() {
    let p = kovasznay_problem(21, 1, CutMethod::Subtriangulation, 40.0, FluidParams::default()).unwrap();
    let st = FluidState::zeros(p.space.n_basis());
    let e = error_norms(&p, &st, kovasznay).unwrap();
    assert!((e.e_v - 1.0).abs() < 1e-14 && (e.e_p - 1.0).abs() < 1e-14, "{e:?}");
}

#[test]
fn projection_errors_converge_at_optimal_order() {
    for degree in [1usize, 2] {
        let errs: Vec<f64> = [16usize, 31, 61]
            .iter()
            .map(|&n| {
                let p = kovasznay_problem(n, degree, CutMethod::Subtriangulation, 40.0, FluidParams::default()).unwrap();
                let st = project_state(&p, kovasznay).unwrap();
                let e = error_norms(&p, &st, kovasznay).unwrap();
                assert!(e.e_v > 0.0);
                e.e_v
            })
            .collect();
        let rate = (errs[1] / errs[2]).log2();
        assert!(rate > degree as f64 + 0.8, "p={degree}: {errs:?} rate {rate}");
    }
}

#[test]
fn ghost_penalty_controls_sliver_conditioning() {
    let cond = |gg: f64| {
        let space = BsplineGrid::new([0.0, 0.0], [1.0, 1.0], [8, 8], 1).unwrap();
        let h = 0.125;
        let outer =
            PolygonBoundary::new(subdivided_rectangle([0.1, 0.1], [0.75 + 1e-6 * h, 0.9], 1), FluidSide::Interior).unwrap();
        let bcs = vec![BoundaryConditions::uniform(BoundaryCondition::no_slip(), outer.n_segments())];
        let prm = FluidParams { gamma_g: gg, convection: false, ..FluidParams::default() };
        let p = FlowProblem::new(space, FluidDomain::single(outer), prm, bcs, QuadratureOptions::for_degree(CutMethod::Subtriangulation, 1))
            .unwrap();
        let (_, jac) = assemble(&p, &StepInputs::steady(), &vec![0.0; p.n_dofs()], true).unwrap();
        let dense = jac.unwrap().to_dense();
        let m = faer::Mat::<f64>::from_fn(dense.len(), dense.len(), |i, j| dense[i][j]);
        let s = m.singular_values().unwrap();
        s[0] / s[s.len() - 1]
    };
    let (without, with) = (cond(0.0), cond(1e-2));
    assert!(without / with >= 1e3, "{without:e} vs {with:e}");
}

#[test]
fn rotating_the_problem_rotates_the_force() {
    let rot = |x: Point2| [-x[1], x[0]];
    let make = |rotate: bool| {
        let r = |x: Point2| if rotate { rot(x) } else { x };
        let space = BsplineGrid::new([-2.0, -2.0], [2.0, 2.0], [16, 16], 1).unwrap();
        let outer: Vec<Point2> = subdivided_rectangle([-1.71, -1.63], [1.67, 1.69], 2).into_iter().map(r).collect();
        let body: Vec<Point2> = regular_polygon([0.1, 0.05], 0.6, 5, 0.3).into_iter().map(r).collect();
        let outer = PolygonBoundary::new(outer, FluidSide::Interior).unwrap();
        let body = PolygonBoundary::new(body, FluidSide::Exterior).unwrap();
        let inflow = if rotate { rot([1.0, 0.2]) } else { [1.0, 0.2] };
        let bcs = vec![
            BoundaryConditions::uniform(BoundaryCondition::constant(inflow), outer.n_segments()),
            BoundaryConditions::uniform(BoundaryCondition::no_slip(), body.n_segments()),
        ];
        let prm = FluidParams { mu: 0.1, ..FluidParams::default() };
        let p = FlowProblem::new(space, FluidDomain::new(vec![outer, body]).unwrap(), prm, bcs, QuadratureOptions::for_degree(CutMethod::Subtriangulation, 1))
            .unwrap();
        let st = solve_steady(&p, 1e-13);
        compute_force(&p, &st, 1)
    };
    let f = make(false);
    let g = make(true);
    let expect = rot(f);
    assert!((g[0] - expect[0]).abs() < 1e-10 && (g[1] - expect[1]).abs() < 1e-10, "{f:?} {g:?}");
}

#[test]
fn manufactured_residual_vanishes_under_refinement() {
    for degree in [1usize, 2] {
        let norms: Vec<f64> = [21usize, 41, 81]
            .iter()
            .map(|&n| {
                let p = kovasznay_problem(n, degree, CutMethod::Subtriangulation, 40.0, FluidParams::default()).unwrap();
                let st = project_state(&p, kovasznay).unwrap();
                let x = p.gather(&st.coeffs);
                let (r, _) = assemble(&p, &StepInputs::steady(), &x, false).unwrap();
                let classes = &p.quad.classes;
                let interior = |b: usize| {
                    let (rx, ry) = p.space.support(b);
                    (ry[0]..=ry[1]).all(|j| (rx[0]..=rx[1]).all(|i| classes[j * p.space.n[0] + i] == crate::geometry::CellClass::Inside))
                };
                let mut s = 0.0;
                for (a, &b) in p.dofmap.active.iter().enumerate() {
                    if interior(b) {
                        s += (0..3).map(|c| r[3 * a + c].powi(2)).sum::<f64>();
                    }
                }
                s.sqrt()
            })
            .collect();
        let rate = (norms[1] / norms[2]).log2();
        assert!(rate >= degree as f64, "p={degree}: {norms:?} rate {rate}");
    }
}

#[test]
fn time_stepping_is_second_order() {
    // Channel with a smoothly pulsating parabolic inlet and a free outlet.
    let space = BsplineGrid::new([-0.2, -0.7], [2.2, 0.7], [16, 10], 1).unwrap();
    let chan = PolygonBoundary::new(subdivided_rectangle([-0.07, -0.53], [2.05, 0.51], 1), FluidSide::Interior).unwrap();
    let inlet: VelocityFn = Arc::new(|x, t| {
        let u = (1.0 - (2.0 * std::f64::consts::PI * t).cos()) * (0.53 + x[1]) * (0.51 - x[1]);
        [u, 0.0]
    });
    let bcs = BoundaryConditions::per_segment(
        vec![BoundaryCondition::no_slip(), BoundaryCondition::TractionFree, BoundaryCondition::Dirichlet(inlet)],
        vec![0, 1, 0, 2],
    )
    .unwrap();
    // τ without the Δt term keeps the spatial operator fixed across step sizes.
    let prm = FluidParams { mu: 0.05, tau_dt: false, ..FluidParams::default() };
    let p = FlowProblem::new(space, FluidDomain::single(chan), prm, vec![bcs], QuadratureOptions::for_degree(CutMethod::Subtriangulation, 1))
        .unwrap();
    assert!(p.pressure_pin.is_none());
    let run = |steps: usize| {
        let dt = 0.4 / steps as f64;
        let mut st = FluidState::zeros(p.space.n_basis());
        let mut solver = LinearSolver::new();
        let opts = NewtonOptions { rtol: 1e-12, ..NewtonOptions::default() };
        for _ in 0..steps {
            st = step_generalized_alpha(&p, &st, dt, &mut solver, &opts).unwrap().0;
        }
        p.gather(&st.coeffs).iter().enumerate().filter(|(k, _)| k % 3 != 2).map(|(_, v)| *v).collect::<Vec<f64>>()
    };
    let reference = run(320);
    let err = |steps: usize| {
        let v = run(steps);
        let d: Vec<f64> = v.iter().zip(&reference).map(|(a, b)| a - b).collect();
        norm2(&d)
    };
    let (e1, e2, e3) = (err(10), err(20), err(40));
    let rate = (e2 / e3).log2();
    assert!(rate >= 1.9, "{e1:e} {e2:e} {e3:e} rate {rate}");
}
