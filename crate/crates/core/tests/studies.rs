use std::fs;

use cutcell_core::config::{RunConfig, Study};
use cutcell_core::flowsolver::{FluidParams, NewtonOptions};
use cutcell_core::fsi::{coupled_step, AddedMassFluid, Coupling, CouplingConfig, RigidSolid};
use cutcell_core::geometry::regular_polygon;
use cutcell_core::harness::studies::{
    kovasznay_cost, solve_kovasznay, square_params, steady_square, unsteady_square, unsteady_stats, UnsteadySettings,
};
use cutcell_core::harness::{cost_curves, run_study, SquareSetup, REPORT_CSV_HEADER};
use cutcell_core::quadrature::CutMethod;
use cutcell_core::{FluidSide, PolygonBoundary};

#[test]
fn quadrature_study_report() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::new(Study::Quadrature);
    c.levels = vec![0, 2, 4];
    c.meshes = vec![11];
    let (report, files) = run_study(&c, tmp.path()).unwrap();
    assert!(!report.has_failures());
    let text = fs::read_to_string(&files.csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), REPORT_CSV_HEADER);
    for name in ["pentagon", "circle"] {
        let st = report.row(name, CutMethod::Subtriangulation).unwrap();
        assert!(st.area_err.unwrap() < 1e-12);
        let e: Vec<f64> = [0, 2, 4].iter().map(|&l| report.row(name, CutMethod::Adaptive { level: l }).unwrap().area_err.unwrap()).collect();
        assert!(e[2] < e[0]);
    }
    assert!(report.row("sphere", CutMethod::Adaptive { level: 4 }).is_some());
    assert!(report.row("sphere", CutMethod::Subtriangulation).is_none());
    assert!(fs::read_to_string(&files.summary).unwrap().contains("[config]"));
}

#[test]
fn kovasznay_study_records_rates_and_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let c = RunConfig::parse("study = \"kovasznay\"\nmeshes = [21, 11]\nmethods = [\"st\"]").unwrap();
    let (report, _) = run_study(&c, tmp.path()).unwrap();
    assert_eq!(report.rows.iter().map(|r| r.case.as_str()).collect::<Vec<_>>(), ["11", "21"]);
    assert!(report.notes.iter().any(|n| n.starts_with("ST rate 11->21")));

    let failing = RunConfig::parse("study = \"kovasznay\"\nmeshes = [11, 21]\nmethods = [\"st\"]\n[solver]\nmax_iterations = 1").unwrap();
    let (report, files) = run_study(&failing, tmp.path()).unwrap();
    assert!(report.rows.iter().all(|r| r.failed()));
    assert_eq!(fs::read_to_string(files.csv).unwrap().lines().count(), 3);
}

#[test]
fn finer_kovasznay_mesh_is_more_accurate() {
    let e = |n| solve_kovasznay(n, 1, CutMethod::Subtriangulation, 40.0, FluidParams::default(), &NewtonOptions::default()).unwrap();
    let (a, b) = (e(16), e(31));
    assert!(b.norms.e_v < 0.5 * a.norms.e_v, "{:?} {:?}", a.norms, b.norms);
    assert!(b.newton_iterations <= 8);
}

#[test]
fn cut_point_counts_are_deterministic_and_grow() {
    let samples: Vec<(u32, usize, f64)> = (3..=7)
        .map(|l| {
            let (n, ms) = kovasznay_cost(31, 1, CutMethod::Adaptive { level: l }).unwrap();
            assert_eq!(n, kovasznay_cost(31, 1, CutMethod::Adaptive { level: l }).unwrap().0);
            (l, n, ms)
        })
        .collect();
    for row in cost_curves(&samples).unwrap() {
        if let Some(g) = row.growth {
            assert!((1.3..=3.0).contains(&g), "level {}: {g}", row.level);
        }
    }
}

fn coarse_square(re: f64) -> SquareSetup {
    SquareSetup { h: 0.25, degree: 1, upstream: 3.0, downstream: 6.0, lateral: 3.0, re, offset: 1.0 / 3.0 }
}

#[test]
fn steady_square_drag_is_plausible_and_symmetric() {
    let s = steady_square(&coarse_square(20.0), CutMethod::Subtriangulation, square_params(20.0), &NewtonOptions::default()).unwrap();
    assert!(s.c_d > 1.5 && s.c_d < 4.0, "{}", s.c_d);
    assert!(s.c_l.abs() < 0.1 * s.c_d, "{}", s.c_l);
}

#[test]
fn unsteady_square_starts_from_rest() {
    let settings = UnsteadySettings { dt: 0.1, t_end: 3.0, ramp: 2.0 };
    let opts = NewtonOptions { reuse_factorization: true, ..NewtonOptions::default() };
    let h = unsteady_square(&coarse_square(100.0), CutMethod::Adaptive { level: 2 }, square_params(100.0), &settings, &opts, |_, _| {})
        .unwrap();
    assert_eq!(h.time.len(), 30);
    assert!(h.failure.is_none());
    assert!(h.c_d[0].abs() < h.c_d[29].abs());
    // Three seconds cannot show shedding.
    assert!(unsteady_stats(&h, 0.1).st.is_err());
}

#[test]
fn staggered_loop_with_added_mass_model() {
    let body = PolygonBoundary::new(regular_polygon([0.0, 0.0], 0.5, 4, 0.0), FluidSide::Exterior).unwrap();
    let mut solid = RigidSolid::new(1.0, 10.0, 2.0, [false, true], body).unwrap();
    let mut fluid = AddedMassFluid::new(0.5, 0.0, [1.0, 0.0]);
    let mut coupling = Coupling::new(CouplingConfig { beta: 0.5, predictor_order: 1 }, [0.0; 2]).unwrap();
    let mut last = None;
    for _ in 0..2000 {
        last = Some(coupled_step(&mut fluid, &mut solid, &mut coupling, 0.05).unwrap());
    }
    // Static equilibrium under the external load: k d = F_ext.
    let rec = last.unwrap();
    assert!((rec.displacement[0] - 0.1).abs() < 1e-6, "{:?}", rec.displacement);
    assert_eq!(rec.displacement[1], 0.0);
}

#[test]
fn polygon_file_round_trip_and_translation() {
    let b = PolygonBoundary::new(regular_polygon([0.2, -0.1], 1.1, 7, 0.3), FluidSide::Exterior).unwrap();
    let back = PolygonBoundary::from_poly_text(&b.to_poly_text()).unwrap();
    assert_eq!(back.vertices(), b.vertices());
    assert_eq!(back.fluid_side(), FluidSide::Exterior);
    let moved = b.translated([0.3, 0.4]);
    for p in [[0.0, 0.0], [1.5, 0.2], [0.9, -0.7]] {
        assert_eq!(b.point_inside(p), moved.point_inside([p[0] + 0.3, p[1] + 0.4]));
    }
}

#[test]
fn field_dump_is_written_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let c = RunConfig::parse("study = \"kovasznay\"\nmeshes = [11]\nmethods = [\"st\"]\nfield_dump = 5").unwrap();
    run_study(&c, tmp.path()).unwrap();
    let text = fs::read_to_string(tmp.path().join("kovasznay_p1_st_11_st_field.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x y vx vy p");
    assert_eq!(lines.len(), 26);
}

#[test]
fn quadrature_study_takes_a_polygon_file() {
    let tmp = tempfile::tempdir().unwrap();
    let poly = PolygonBoundary::new(regular_polygon([0.1, 0.2], 0.9, 6, 0.2), FluidSide::Interior).unwrap();
    let path = tmp.path().join("hex.poly");
    fs::write(&path, poly.to_poly_text()).unwrap();
    let mut c = RunConfig::new(Study::Quadrature);
    c.methods = vec![cutcell_core::config::MethodKind::St];
    c.meshes = vec![];
    c.polygon_file = Some(path);
    let (report, _) = run_study(&c, tmp.path()).unwrap();
    assert!(report.row("polygon", CutMethod::Subtriangulation).unwrap().area_err.unwrap() < 1e-12);

    c.polygon_file = Some(tmp.path().join("missing.poly"));
    assert!(matches!(run_study(&c, tmp.path()), Err(cutcell_core::Error::Config(_))));
}
