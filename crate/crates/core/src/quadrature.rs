//! Quadrature rules for uncut cells, cut cells and immersed interfaces.
//!
//! Cut cells are integrated either by subtriangulation (clip the cell by the
//! fluid side, fan the convex pieces from their centroids, apply a triangle
//! rule) or by adaptive quadtree/octree subdivision down to a fixed depth.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{
    polygon_area, polygon_centroid, CartesianGrid, CellBox, CellClass, FluidDomain, FluidRegion, Point2,
};

/// Hard cap on the adaptive depth.
pub const MAX_ADAPTIVE_LEVEL: u32 = 12;

/// Gauss points per boundary piece.
pub const INTERFACE_POINTS: usize = 5;

/// Quadrature rule on a reference domain: `[-1,1]^dim` for Gauss and tensor
/// rules, the unit triangle `{x,y >= 0, x+y <= 1}` for triangle rules.
/// Unused coordinates of `points` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn point<const D: usize>(&self, i: usize) -> [f64; D] {
        std::array::from_fn(|k| self.points[i][k])
    }
}

/// Gauss-Legendre rule with `n` points on `[-1, 1]`, points ascending.
pub fn gauss_legendre(n: usize) -> Result<QuadRule> {
    if !(1..=10).contains(&n) {
        return Err(Error::Argument(format!("Gauss-Legendre order must be in 1..=10, got {n}")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadRule {
        dim: 1,
        points: nodes.iter().map(|&x| [x, 0.0, 0.0]).collect(),
        weights,
        exactness_degree: 2 * n - 1,
    })
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tensor product of a 1D rule with itself in `d` dimensions. The first
/// coordinate varies fastest.
pub fn tensor_rule(rule1d: &QuadRule, d: usize) -> Result<QuadRule> {
    if rule1d.dim != 1 {
        return Err(Error::Argument("tensor_rule needs a one-dimensional rule".into()));
    }
    if !(1..=3).contains(&d) {
        return Err(Error::Argument(format!("tensor dimension must be 1, 2 or 3, got {d}")));
    }
    let n = rule1d.len();
    let total = n.pow(d as u32);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut pt = [0.0; 3];
        let mut w = 1.0;
        let mut rem = flat;
        for slot in pt.iter_mut().take(d) {
            let i = rem % n;
            rem /= n;
            *slot = rule1d.points[i][0];
            w *= rule1d.weights[i];
        }
        points.push(pt);
        weights.push(w);
    }
    Ok(QuadRule { dim: d, points, weights, exactness_degree: rule1d.exactness_degree })
}

/// Symmetric rules on the unit triangle: 3 points (degree 2) or 7 points (degree 5).
pub fn triangle_rule(n_points: usize) -> Result<QuadRule> {
    let (pts, ws, deg): (Vec<[f64; 2]>, Vec<f64>, usize) = match n_points {
        3 => (vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]], vec![1.0 / 6.0; 3], 2),
        7 => {
            let s15 = 15f64.sqrt();
            let a = (6.0 - s15) / 21.0;
            let b = (9.0 + 2.0 * s15) / 21.0;
            let c = (6.0 + s15) / 21.0;
            let d = (9.0 - 2.0 * s15) / 21.0;
            let wa = (155.0 - s15) / 2400.0;
            let wc = (155.0 + s15) / 2400.0;
            (
                vec![[1.0 / 3.0, 1.0 / 3.0], [a, a], [b, a], [a, b], [c, c], [d, c], [c, d]],
                vec![9.0 / 80.0, wa, wa, wa, wc, wc, wc],
                5,
            )
        }
        _ => return Err(Error::Argument(format!("triangle rule needs 3 or 7 points, got {n_points}"))),
    };
    Ok(QuadRule {
        dim: 2,
        points: pts.iter().map(|p| [p[0], p[1], 0.0]).collect(),
        weights: ws,
        exactness_degree: deg,
    })
}

/// How the points of one cell were generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellMethod {
    /// Uncut cell, plain tensor Gauss rule.
    Uncut,
    Subtriangulation,
    Adaptive { level: u32 },
}

impl CellMethod {
    pub fn tag(self) -> &'static str {
        match self {
            CellMethod::Uncut => "uncut",
            CellMethod::Subtriangulation => "st",
            CellMethod::Adaptive { .. } => "ai",
        }
    }

    pub fn level(self) -> u32 {
        match self {
            CellMethod::Adaptive { level } => level,
            _ => 0,
        }
    }
}

/// Physical quadrature for one cell. `empty_sliver` flags a cut cell whose
/// fluid part was too thin to carry any point.
#[derive(Debug, Clone, PartialEq)]
pub struct CellQuadrature<const D: usize> {
    pub cell_id: usize,
    pub method: CellMethod,
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub empty_sliver: bool,
}

pub type CutCellQuadrature = CellQuadrature<2>;

impl<const D: usize> CellQuadrature<D> {
    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64; D]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Appends `rule` (on `[-1,1]^D`) mapped onto `bx`.
fn push_mapped<const D: usize>(rule: &QuadRule, bx: &CellBox<D>, pts: &mut Vec<[f64; D]>, ws: &mut Vec<f64>) {
    let scale = bx.measure() / (1u32 << D) as f64;
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        pts.push(std::array::from_fn(|k| bx.lo[k] + 0.5 * (p[k] + 1.0) * bx.extent(k)));
        ws.push(w * scale);
    }
}

/// Tensor Gauss rule on a whole cell.
pub fn uncut_quadrature<const D: usize>(cell_id: usize, cell: &CellBox<D>, rule: &QuadRule) -> CellQuadrature<D> {
    let mut points = Vec::with_capacity(rule.len());
    let mut weights = Vec::with_capacity(rule.len());
    push_mapped(rule, cell, &mut points, &mut weights);
    CellQuadrature { cell_id, method: CellMethod::Uncut, points, weights, empty_sliver: false }
}

/// Triangle rule on every centroid-fan triangle of the given convex pieces.
pub fn subtriangulate_pieces(cell_id: usize, pieces: &[Vec<Point2>], tri: &QuadRule) -> CutCellQuadrature {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for piece in pieces {
        let c = polygon_centroid(piece);
        let n = piece.len();
        for i in 0..n {
            let a = piece[i];
            let b = piece[(i + 1) % n];
            let e1 = [a[0] - c[0], a[1] - c[1]];
            let e2 = [b[0] - c[0], b[1] - c[1]];
            let jac = e1[0] * e2[1] - e1[1] * e2[0];
            if !(jac > 0.0) {
                continue;
            }
            for (p, &w) in tri.points.iter().zip(&tri.weights) {
                points.push([c[0] + p[0] * e1[0] + p[1] * e2[0], c[1] + p[0] * e1[1] + p[1] * e2[1]]);
                weights.push(w * jac);
            }
        }
    }
    let empty_sliver = weights.is_empty();
    CellQuadrature { cell_id, method: CellMethod::Subtriangulation, points, weights, empty_sliver }
}

/// Subtriangulation of a cut cell: 3-point triangles for `degree` 1, 7-point otherwise.
pub fn subtriangulate(cell_id: usize, cell: &CellBox<2>, domain: &FluidDomain, degree: usize) -> CutCellQuadrature {
    let tri = triangle_rule(if degree <= 1 { 3 } else { 7 }).expect("valid triangle rule");
    subtriangulate_pieces(cell_id, &domain.clip_cell(cell), &tri)
}

/// Adaptive quadtree (`D = 2`) or octree (`D = 3`) integration of a cell.
///
/// `base` is a rule on `[-1,1]^D`. Subcells classified Inside get the full
/// rule, Outside ones nothing, Cut ones are bisected until depth `level`,
/// where the base points are kept only if they are fluid.
pub fn adaptive_quadrature<const D: usize, R: FluidRegion<D> + ?Sized>(
    cell_id: usize,
    cell: &CellBox<D>,
    region: &R,
    level: u32,
    base: &QuadRule,
) -> Result<CellQuadrature<D>> {
    if level > MAX_ADAPTIVE_LEVEL {
        return Err(Error::Argument(format!("adaptive level {level} exceeds the cap {MAX_ADAPTIVE_LEVEL}")));
    }
    if base.dim != D {
        return Err(Error::Argument(format!("base rule has dimension {}, cell has {D}", base.dim)));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let class = if level == 0 { CellClass::Cut } else { region.classify(cell) };
    recurse(cell, class, 0, level, region, base, &mut points, &mut weights);
    let empty_sliver = weights.is_empty();
    Ok(CellQuadrature { cell_id, method: CellMethod::Adaptive { level }, points, weights, empty_sliver })
}

#[allow(clippy::too_many_arguments)]
fn recurse<const D: usize, R: FluidRegion<D> + ?Sized>(
    bx: &CellBox<D>,
    class: CellClass,
    depth: u32,
    level: u32,
    region: &R,
    base: &QuadRule,
    pts: &mut Vec<[f64; D]>,
    ws: &mut Vec<f64>,
) {
    match class {
        CellClass::Outside => {}
        CellClass::Inside => push_mapped(base, bx, pts, ws),
        CellClass::Cut if depth < level => {
            for child in bx.children() {
                let c = region.classify(&child);
                recurse(&child, c, depth + 1, level, region, base, pts, ws);
            }
        }
        CellClass::Cut => {
            let start = pts.len();
            push_mapped(base, bx, pts, ws);
            let mut keep = start;
            for i in start..pts.len() {
                if region.contains(&pts[i]) {
                    pts[keep] = pts[i];
                    ws[keep] = ws[i];
                    keep += 1;
                }
            }
            pts.truncate(keep);
            ws.truncate(keep);
        }
    }
}

/// Quadrature on one straight piece of the immersed boundary lying in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfacePiece {
    pub cell_id: usize,
    pub boundary_id: usize,
    pub segment_id: usize,
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    /// Unit normal pointing from the fluid into the solid.
    pub normal: Point2,
}

/// All boundary pieces, sorted by cell id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterfaceQuadrature {
    pub pieces: Vec<InterfacePiece>,
}

impl InterfaceQuadrature {
    pub fn n_points(&self) -> usize {
        self.pieces.iter().map(|p| p.weights.len()).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().flat_map(|p| p.weights.iter()).sum()
    }

    pub fn pieces_of_boundary(&self, boundary_id: usize) -> impl Iterator<Item = &InterfacePiece> {
        self.pieces.iter().filter(move |p| p.boundary_id == boundary_id)
    }
}

/// Splits every boundary segment at the grid lines and puts a 5-point Gauss
/// rule on each piece. Pieces outside the grid or on the solid side of
/// another boundary of the domain are dropped.
pub fn interface_quadrature(domain: &FluidDomain, grid: &CartesianGrid) -> InterfaceQuadrature {
    let gl = gauss_legendre(INTERFACE_POINTS).expect("valid order");
    let lo = grid.origin;
    let hi = grid.upper();
    let mut pieces = Vec::new();
    for (bid, b) in domain.boundaries().iter().enumerate() {
        let eps = b.eps();
        for sid in 0..b.n_segments() {
            let (a, e) = b.segment(sid);
            let d = [e[0] - a[0], e[1] - a[1]];
            let len = d[0].hypot(d[1]);
            let mut ts = vec![0.0, 1.0];
            for k in 0..2 {
                if d[k] == 0.0 {
                    continue;
                }
                let (t0, t1) = {
                    let ta = (lo[k] - a[k]) / d[k];
                    let tb = (hi[k] - a[k]) / d[k];
                    (ta.min(tb), ta.max(tb))
                };
                for l in 0..=grid.n[k] {
                    let x = lo[k] + l as f64 * grid.h[k];
                    let t = (x - a[k]) / d[k];
                    if t > 0.0 && t < 1.0 {
                        ts.push(t);
                    }
                }
                ts.push(t0.clamp(0.0, 1.0));
                ts.push(t1.clamp(0.0, 1.0));
            }
            ts.sort_by(f64::total_cmp);
            ts.dedup_by(|x, y| (*x - *y).abs() * len <= eps);
            let normal = b.fluid_outward_normal(sid);
            for w in ts.windows(2) {
                let (t0, t1) = (w[0], w[1]);
                let plen = (t1 - t0) * len;
                if plen <= eps {
                    continue;
                }
                let tm = 0.5 * (t0 + t1);
                let mid = [a[0] + tm * d[0], a[1] + tm * d[1]];
                if mid[0] < lo[0] || mid[0] > hi[0] || mid[1] < lo[1] || mid[1] > hi[1] {
                    continue;
                }
                let others_fluid =
                    domain.boundaries().iter().enumerate().all(|(j, o)| j == bid || o.point_inside(mid));
                if !others_fluid {
                    continue;
                }
                // Nudge into the fluid so pieces on grid lines land in the fluid-side cell.
                let probe = [mid[0] - 1e-6 * grid.h[0] * normal[0], mid[1] - 1e-6 * grid.h[1] * normal[1]];
                let (i, j) = grid.locate_cell(probe);
                let mut points = Vec::with_capacity(INTERFACE_POINTS);
                let mut weights = Vec::with_capacity(INTERFACE_POINTS);
                for (p, &gw) in gl.points.iter().zip(&gl.weights) {
                    let t = t0 + 0.5 * (p[0] + 1.0) * (t1 - t0);
                    points.push([a[0] + t * d[0], a[1] + t * d[1]]);
                    weights.push(0.5 * gw * plen);
                }
                pieces.push(InterfacePiece { cell_id: grid.cell_id(i, j), boundary_id: bid, segment_id: sid, points, weights, normal });
            }
        }
    }
    pieces.sort_by_key(|p| (p.cell_id, p.boundary_id, p.segment_id));
    InterfaceQuadrature { pieces }
}

/// Cut-cell integration technique for a whole domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutMethod {
    Subtriangulation,
    Adaptive { level: u32 },
}

impl CutMethod {
    pub fn tag(self) -> &'static str {
        match self {
            CutMethod::Subtriangulation => "st",
            CutMethod::Adaptive { .. } => "ai",
        }
    }

    pub fn level(self) -> u32 {
        match self {
            CutMethod::Adaptive { level } => level,
            CutMethod::Subtriangulation => 0,
        }
    }
}

impl std::fmt::Display for CutMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CutMethod::Subtriangulation => write!(f, "ST"),
            CutMethod::Adaptive { level } => write!(f, "AI{level}"),
        }
    }
}

/// Rule choices for a domain decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub method: CutMethod,
    /// Gauss points per axis on uncut cells.
    pub uncut_points: usize,
    /// 3 or 7.
    pub triangle_points: usize,
    /// Gauss points per axis of the adaptive base rule.
    pub adaptive_points: usize,
}

impl QuadratureOptions {
    /// Defaults for a spline degree: full Gauss integration with `p+1` points.
    pub fn for_degree(method: CutMethod, degree: usize) -> Self {
        Self {
            method,
            uncut_points: degree + 1,
            triangle_points: if degree <= 1 { 3 } else { 7 },
            adaptive_points: degree + 1,
        }
    }

    /// Reference-accuracy rules used when measuring errors.
    pub fn for_error_norms(degree: usize) -> Self {
        Self {
            method: CutMethod::Subtriangulation,
            uncut_points: degree + 3,
            triangle_points: 7,
            adaptive_points: degree + 1,
        }
    }
}

/// Point counts by origin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PointCounts {
    pub n_uncut: usize,
    pub n_cut: usize,
    pub n_interface: usize,
}

/// Cell classes and quadratures for every non-solid cell of a grid.
#[derive(Debug, Clone)]
pub struct DomainQuadrature {
    pub grid: CartesianGrid,
    pub classes: Vec<CellClass>,
    /// One entry per Inside or Cut cell, ascending cell id.
    pub cells: Vec<CutCellQuadrature>,
    pub interface: InterfaceQuadrature,
    pub options: QuadratureOptions,
}

impl DomainQuadrature {
    pub fn build(grid: &CartesianGrid, domain: &FluidDomain, options: QuadratureOptions) -> Result<Self> {
        let classes: Vec<CellClass> = (0..grid.n_cells()).map(|id| domain.classify_cell(&grid.cell_box(id))).collect();
        let uncut = tensor_rule(&gauss_legendre(options.uncut_points)?, 2)?;
        let tri = triangle_rule(options.triangle_points)?;
        let base = tensor_rule(&gauss_legendre(options.adaptive_points)?, 2)?;
        let mut cells = Vec::new();
        for (id, &class) in classes.iter().enumerate() {
            let bx = grid.cell_box(id);
            match class {
                CellClass::Outside => {}
                CellClass::Inside => cells.push(uncut_quadrature(id, &bx, &uncut)),
                CellClass::Cut => cells.push(match options.method {
                    CutMethod::Subtriangulation => subtriangulate_pieces(id, &domain.clip_cell(&bx), &tri),
                    CutMethod::Adaptive { level } => {
                        let local = domain.localize(&bx);
                        adaptive_quadrature(id, &bx, &local, level, &base)?
                    }
                }),
            }
        }
        let interface = interface_quadrature(domain, grid);
        Ok(Self { grid: grid.clone(), classes, cells, interface, options })
    }

    pub fn counts(&self) -> PointCounts {
        count_points(self)
    }

    pub fn total_weight(&self) -> f64 {
        self.cells.iter().map(|c| c.weight_sum()).sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point2) -> f64) -> f64 {
        self.cells.iter().map(|c| c.integrate(&f)).sum()
    }

    /// Cut cells that ended up without any point.
    pub fn empty_slivers(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().filter(|c| c.empty_sliver).map(|c| c.cell_id)
    }

    /// Debug dump, one `cell_id x y w method level` line per point.
    pub fn write_dump(&self, mut out: impl Write) -> std::io::Result<()> {
        for c in &self.cells {
            for (p, w) in c.points.iter().zip(&c.weights) {
                writeln!(out, "{} {:.17e} {:.17e} {:.17e} {} {}", c.cell_id, p[0], p[1], w, c.method.tag(), c.method.level())?;
            }
        }
        Ok(())
    }
}

pub fn count_points(q: &DomainQuadrature) -> PointCounts {
    let mut counts = PointCounts { n_interface: q.interface.n_points(), ..Default::default() };
    for c in &q.cells {
        match c.method {
            CellMethod::Uncut => counts.n_uncut += c.n_points(),
            _ => counts.n_cut += c.n_points(),
        }
    }
    counts
}

/// Exact fluid area of a domain restricted to the grid box, by clipping
/// every cell. Used as a reference for volume checks.
pub fn exact_fluid_area(grid: &CartesianGrid, domain: &FluidDomain) -> f64 {
    (0..grid.n_cells())
        .map(|id| {
            let bx = grid.cell_box(id);
            match domain.classify_cell(&bx) {
                CellClass::Inside => bx.measure(),
                CellClass::Outside => 0.0,
                CellClass::Cut => domain.clip_cell(&bx).iter().map(|p| polygon_area(p)).sum(),
            }
        })
        .sum()
}
