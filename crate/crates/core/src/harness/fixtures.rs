//! Problem builders shared by the studies, tests and benches.

use std::sync::Arc;

use crate::error::Result;
use crate::flowsolver::{kovasznay_exact, BoundaryCondition, BoundaryConditions, FlowProblem, FluidParams};
use std::f64::consts::PI;

use crate::geometry::{
    polygon_area, regular_polygon, subdivided_rectangle, CartesianGrid, CellBox, FluidDomain, FluidSide, ImplicitRegion,
    ImplicitShape, PolygonBoundary,
};
use crate::quadrature::{CutMethod, QuadratureOptions};
use crate::splinegrid::BsplineGrid;

/// Physical Kovasznay domain.
pub const KOVASZNAY_LO: f64 = -0.5;
pub const KOVASZNAY_HI: f64 = 1.5;

/// Background grid for an `n × n` Kovasznay mesh. Cells have size
/// `3/(n − 1)`, so the physical square spans `2(n − 1)/3` of them with a
/// margin of about a sixth of the grid on each side. The grid is shifted
/// by a third of a cell so that no boundary edge lies on a grid line.
pub fn kovasznay_grid(n: usize, degree: usize) -> Result<BsplineGrid> {
    let h = 3.0 / (n as f64 - 1.0);
    let lo = -1.0 - h / 3.0;
    let hi = lo + n as f64 * h;
    BsplineGrid::new([lo, lo], [hi, hi], [n, n], degree)
}

/// Boundary edges per side used with an `n × n` mesh (20 on the 31² mesh,
/// doubling with the mesh).
pub fn kovasznay_edges(n: usize) -> usize {
    ((20 * (n - 1)) as f64 / 30.0).round().max(1.0) as usize
}

/// Steady Kovasznay problem with exact velocity imposed on the whole boundary.
pub fn kovasznay_problem(n: usize, degree: usize, method: CutMethod, re: f64, params: FluidParams) -> Result<FlowProblem> {
    let space = kovasznay_grid(n, degree)?;
    let poly = subdivided_rectangle([KOVASZNAY_LO; 2], [KOVASZNAY_HI; 2], kovasznay_edges(n));
    let boundary = PolygonBoundary::new(poly, FluidSide::Interior)?;
    let bc = BoundaryCondition::Dirichlet(Arc::new(move |x, _| {
        let (u, v, _) = kovasznay_exact(x[0], x[1], re, 0.0);
        [u, v]
    }));
    let bcs = vec![BoundaryConditions::uniform(bc, boundary.n_segments())];
    let params = FluidParams { rho: 1.0, mu: 1.0 / re, ..params };
    FlowProblem::new(space, FluidDomain::single(boundary), params, bcs, QuadratureOptions::for_degree(method, degree))
}

/// Channel around a unit square centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareSetup {
    /// Cell size.
    pub h: f64,
    pub degree: usize,
    /// Inlet distance from the square centre, in diameters.
    pub upstream: f64,
    /// Outlet distance from the square centre.
    pub downstream: f64,
    /// Distance from the centre to each lateral wall.
    pub lateral: f64,
    pub re: f64,
    /// Position of the square's lower and left faces inside their cells, as a
    /// fraction of the cell size.
    pub offset: f64,
}

/// Square side length and free-stream speed.
pub const SQUARE_D: f64 = 1.0;
pub const SQUARE_U: f64 = 1.0;

/// Body index of the square in [`square_problem`] domains.
pub const SQUARE_BODY: usize = 1;

/// Flow past a square. The inlet carries `inflow(t)` times the free-stream
/// velocity, lateral walls carry the free stream and the outlet is traction
/// free. Square faces sit `offset` of a cell off the grid lines and the
/// channel walls 0.4 of a cell off.
pub fn square_problem(
    setup: &SquareSetup,
    method: CutMethod,
    inflow: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
) -> Result<FlowProblem> {
    let h = setup.h;
    let half = 0.5 * SQUARE_D;
    let snap = |x: f64, base: f64| base + ((x - base) / h).round() * h + 0.4 * h;
    let base = -half - setup.offset * h;
    let cx = [snap(-setup.upstream, base), snap(setup.downstream, base)];
    let cy = [snap(-setup.lateral, base), snap(setup.lateral, base)];
    let margin = 2.0 * h;
    let i0 = ((cx[0] - margin - base) / h).floor();
    let j0 = ((cy[0] - margin - base) / h).floor();
    let lo = [base + i0 * h, base + j0 * h];
    let n = [((cx[1] + margin - lo[0]) / h).ceil() as usize, ((cy[1] + margin - lo[1]) / h).ceil() as usize];
    let hi = [lo[0] + n[0] as f64 * h, lo[1] + n[1] as f64 * h];
    let space = BsplineGrid::new(lo, hi, n, setup.degree)?;

    let channel = PolygonBoundary::new(subdivided_rectangle([cx[0], cy[0]], [cx[1], cy[1]], 1), FluidSide::Interior)?;
    let square = PolygonBoundary::new(subdivided_rectangle([-half, -half], [half, half], 1), FluidSide::Exterior)?;
    let inlet = {
        let inflow = inflow.clone();
        BoundaryCondition::Dirichlet(Arc::new(move |_, t| [SQUARE_U * inflow(t), 0.0]))
    };
    let wall = BoundaryCondition::Dirichlet(Arc::new(move |_, t| [SQUARE_U * inflow(t), 0.0]));
    // Segments: bottom, outlet, top, inlet.
    let channel_bc = BoundaryConditions::per_segment(vec![wall, BoundaryCondition::TractionFree, inlet], vec![0, 1, 0, 2])?;
    let square_bc = BoundaryConditions::uniform(BoundaryCondition::no_slip(), square.n_segments());
    let params = FluidParams { rho: 1.0, mu: SQUARE_U * SQUARE_D / setup.re, ..FluidParams::default() };
    FlowProblem::new(
        space,
        FluidDomain::new(vec![channel, square])?,
        params,
        vec![channel_bc, square_bc],
        QuadratureOptions::for_degree(method, setup.degree),
    )
}

/// Smooth half-cosine ramp from 0 to 1 over `duration`.
pub fn half_cosine_ramp(duration: f64) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    Arc::new(move |t| {
        if duration <= 0.0 || t >= duration {
            1.0
        } else if t <= 0.0 {
            0.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * t / duration).cos())
        }
    })
}

/// Two-dimensional volume-oracle fixture on a 4 × 4 grid over `[-2, 2]²`.
pub struct VolumeFixture {
    pub name: &'static str,
    pub grid: CartesianGrid,
    pub domain: FluidDomain,
    /// Fluid area from the shoelace formula.
    pub exact_area: f64,
}

/// Pentagon (circumradius 1.48, apex up) and 64-gon circle of radius 1.05
/// on a 4 × 4 grid over [-2, 2]², both with interior fluid.
pub fn volume_fixtures() -> Vec<VolumeFixture> {
    let grid = CartesianGrid::new([-2.0, -2.0], [2.0, 2.0], [4, 4]).expect("valid grid");
    [("pentagon", regular_polygon([0.0, 0.0], 1.48, 5, 0.5 * PI)), ("circle", regular_polygon([0.0, 0.0], 1.05, 64, 0.0))]
        .into_iter()
        .map(|(name, verts)| {
            let exact_area = polygon_area(&verts);
            let boundary = PolygonBoundary::new(verts, FluidSide::Interior).expect("valid polygon");
            VolumeFixture { name, grid: grid.clone(), domain: FluidDomain::single(boundary), exact_area }
        })
        .collect()
}

/// Fixture for a user polygon: a 16 × 16 grid over its bounding box grown
/// by a quarter on each side.
pub fn polygon_fixture(boundary: PolygonBoundary) -> Result<VolumeFixture> {
    let v = boundary.vertices();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in v {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let pad = 0.25 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let grid = CartesianGrid::new([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad], [16, 16])?;
    let inside = polygon_area(v).abs();
    let exact_area = match boundary.fluid_side() {
        FluidSide::Interior => inside,
        FluidSide::Exterior => (hi[0] - lo[0] + 2.0 * pad) * (hi[1] - lo[1] + 2.0 * pad) - inside,
    };
    Ok(VolumeFixture { name: "polygon", grid, domain: FluidDomain::single(boundary), exact_area })
}

/// Unit sphere inside the single cell `[-1.3, 1.2]³`.
pub fn sphere_fixture() -> (CellBox<3>, ImplicitRegion<3>) {
    let cell = CellBox::new([-1.3; 3], [1.2; 3]).expect("valid cell");
    let shape = ImplicitShape::new([0.0; 3], 1.0).expect("valid sphere");
    (cell, ImplicitRegion { shape, side: FluidSide::Interior })
}

pub const SPHERE_VOLUME: f64 = 4.0 / 3.0 * PI;
