//! Immersed boundaries, point location and cell classification.
//!
//! Boundaries are closed straight-edged polygons stored counter-clockwise in
//! physical coordinates. Each polygon carries a flag telling which side is
//! fluid; a [`FluidDomain`] intersects the fluid sides of several polygons
//! (for instance a channel with an obstacle inside it).
//!
//! Every query is a pure function of immutable data, so a domain can be
//! shared freely between threads.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Relative geometric tolerance; scaled by the polygon bounding-box diagonal.
pub const REL_GEOMETRIC_TOLERANCE: f64 = 1e-12;

#[inline]
pub(crate) fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

/// Signed shoelace area (positive for counter-clockwise ordering).
pub fn polygon_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    // Shift to the first vertex to limit cancellation for far-away polygons.
    let o = pts[0];
    let mut twice = 0.0;
    for i in 1..n - 1 {
        twice += cross(sub(pts[i], o), sub(pts[i + 1], o));
    }
    0.5 * twice
}

/// Area centroid of a simple polygon; falls back to the vertex mean when the
/// area vanishes.
pub fn polygon_centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len();
    let o = pts[0];
    let mut a = 0.0;
    let mut c = [0.0, 0.0];
    for i in 1..n.saturating_sub(1) {
        let p = sub(pts[i], o);
        let q = sub(pts[i + 1], o);
        let w = cross(p, q);
        a += w;
        c[0] += w * (p[0] + q[0]);
        c[1] += w * (p[1] + q[1]);
    }
    if a.abs() <= f64::MIN_POSITIVE {
        let inv = 1.0 / n as f64;
        let s = pts.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0], s[1] + p[1]]);
        return [s[0] * inv, s[1] * inv];
    }
    [o[0] + c[0] / (3.0 * a), o[1] + c[1] / (3.0 * a)]
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(ap, ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    norm([ap[0] - t * ab[0], ap[1] - t * ab[1]])
}

/// Which side of a boundary polygon holds the fluid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FluidSide {
    Interior,
    Exterior,
}

impl FluidSide {
    pub fn as_str(self) -> &'static str {
        match self {
            FluidSide::Interior => "interior",
            FluidSide::Exterior => "exterior",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            FluidSide::Interior => FluidSide::Exterior,
            FluidSide::Exterior => FluidSide::Interior,
        }
    }
}

impl std::str::FromStr for FluidSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interior" | "inside" => Ok(FluidSide::Interior),
            "exterior" | "outside" => Ok(FluidSide::Exterior),
            other => Err(Error::Geometry(format!("unknown fluid side `{other}`"))),
        }
    }
}

/// Classification of a background cell with respect to the fluid domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Inside,
    Outside,
    Cut,
}

/// Axis-aligned box in `D` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBox<const D: usize> {
    pub lo: [f64; D],
    pub hi: [f64; D],
}

impl<const D: usize> CellBox<D> {
    pub fn new(lo: [f64; D], hi: [f64; D]) -> Result<Self> {
        if (0..D).any(|k| !(lo[k] < hi[k]) || !lo[k].is_finite() || !hi[k].is_finite()) {
            return Err(Error::Geometry(format!(
                "cell box needs lower < upper on every axis, got {lo:?} / {hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn measure(&self) -> f64 {
        (0..D).map(|k| self.extent(k)).product()
    }

    pub fn center(&self) -> [f64; D] {
        std::array::from_fn(|k| 0.5 * (self.lo[k] + self.hi[k]))
    }

    pub fn diagonal(&self) -> f64 {
        (0..D).map(|k| self.extent(k).powi(2)).sum::<f64>().sqrt()
    }

    /// Corner `bits`: bit `k` selects the upper bound on axis `k`.
    pub fn corner(&self, bits: usize) -> [f64; D] {
        std::array::from_fn(|k| if bits >> k & 1 == 1 { self.hi[k] } else { self.lo[k] })
    }

    pub fn corners(&self) -> impl Iterator<Item = [f64; D]> + '_ {
        (0..1usize << D).map(move |b| self.corner(b))
    }

    /// The `2^D` children of a uniform bisection, ordered like [`Self::corner`].
    pub fn children(&self) -> impl Iterator<Item = CellBox<D>> + '_ {
        let mid = self.center();
        (0..1usize << D).map(move |bits| {
            let mut lo = self.lo;
            let mut hi = self.hi;
            for k in 0..D {
                if bits >> k & 1 == 1 {
                    lo[k] = mid[k];
                } else {
                    hi[k] = mid[k];
                }
            }
            CellBox { lo, hi }
        })
    }

    /// Maps a reference coordinate in `[0,1]^D` to physical space.
    pub fn map(&self, xi: &[f64; D]) -> [f64; D] {
        std::array::from_fn(|k| self.lo[k] + xi[k] * self.extent(k))
    }

    pub fn contains(&self, p: &[f64; D], tol: f64) -> bool {
        (0..D).all(|k| p[k] >= self.lo[k] - tol && p[k] <= self.hi[k] + tol)
    }
}

impl CellBox<2> {
    /// Counter-clockwise outline.
    pub fn outline(&self) -> Vec<Point2> {
        vec![
            [self.lo[0], self.lo[1]],
            [self.hi[0], self.lo[1]],
            [self.hi[0], self.hi[1]],
            [self.lo[0], self.hi[1]],
        ]
    }
}

/// Uniform Cartesian partition of a rectangle into `n[0] x n[1]` cells.
/// Cell ids are row-major: `id = j * n[0] + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid {
    pub origin: Point2,
    pub h: [f64; 2],
    pub n: [usize; 2],
}

impl CartesianGrid {
    pub fn new(lo: Point2, hi: Point2, n: [usize; 2]) -> Result<Self> {
        let bx = CellBox::new(lo, hi)?;
        if n[0] == 0 || n[1] == 0 {
            return Err(Error::Argument("grid needs at least one cell per axis".into()));
        }
        Ok(Self {
            origin: lo,
            h: [bx.extent(0) / n[0] as f64, bx.extent(1) / n[1] as f64],
            n,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn upper(&self) -> Point2 {
        [
            self.origin[0] + self.h[0] * self.n[0] as f64,
            self.origin[1] + self.h[1] * self.n[1] as f64,
        ]
    }

    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    pub fn cell_ij(&self, id: usize) -> (usize, usize) {
        (id % self.n[0], id / self.n[0])
    }

    pub fn cell_box(&self, id: usize) -> CellBox<2> {
        let (i, j) = self.cell_ij(id);
        let lo = [
            self.origin[0] + i as f64 * self.h[0],
            self.origin[1] + j as f64 * self.h[1],
        ];
        // The last row/column ends exactly on the box so neighbouring cells tile it.
        let up = self.upper();
        let hi = [
            if i + 1 == self.n[0] { up[0] } else { self.origin[0] + (i + 1) as f64 * self.h[0] },
            if j + 1 == self.n[1] { up[1] } else { self.origin[1] + (j + 1) as f64 * self.h[1] },
        ];
        CellBox { lo, hi }
    }

    /// Cell containing `p`, clamped to the grid. Points on an interior grid
    /// line belong to the cell above/right of it.
    pub fn locate_cell(&self, p: Point2) -> (usize, usize) {
        let f = |k: usize| {
            let s = ((p[k] - self.origin[k]) / self.h[k]).floor();
            (s.max(0.0) as usize).min(self.n[k] - 1)
        };
        (f(0), f(1))
    }

    /// Typical cell size used by penalty and stabilization scalings.
    pub fn cell_size(&self) -> f64 {
        self.h[0].max(self.h[1])
    }
}

/// Closed half-plane `{x : normal . x <= offset}` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Point2,
    pub offset: f64,
}

impl HalfPlane {
    /// Half-plane to the left of the directed line `a -> b`.
    fn left_of(a: Point2, b: Point2) -> Self {
        let d = sub(b, a);
        let len = norm(d);
        let normal = [d[1] / len, -d[0] / len];
        Self { normal, offset: dot(normal, a) }
    }

    fn flipped(self) -> Self {
        Self { normal: [-self.normal[0], -self.normal[1]], offset: -self.offset }
    }

    #[inline]
    fn signed_distance(&self, p: Point2) -> f64 {
        dot(self.normal, p) - self.offset
    }
}

/// Sutherland-Hodgman clip of a convex polygon by one half-plane. Points
/// within `eps` of the line count as kept.
fn clip_by_half_plane(poly: &[Point2], hp: &HalfPlane, eps: f64) -> Vec<Point2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let dc = hp.signed_distance(cur);
        let dn = hp.signed_distance(next);
        let cur_in = dc <= eps;
        let next_in = dn <= eps;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            // Strictly straddling: interpolate at the zero crossing.
            let t = dc / (dc - dn);
            if (0.0..=1.0).contains(&t) {
                out.push([cur[0] + t * (next[0] - cur[0]), cur[1] + t * (next[1] - cur[1])]);
            }
        }
    }
    dedup_ring(&mut out, eps);
    out
}

fn dedup_ring(ring: &mut Vec<Point2>, eps: f64) {
    ring.dedup_by(|a, b| norm(sub(*a, *b)) <= eps);
    while ring.len() > 1 && norm(sub(ring[0], ring[ring.len() - 1])) <= eps {
        ring.pop();
    }
}

/// Removes vertices whose neighbouring edges continue in the same direction.
fn drop_collinear(vertices: &[Point2], eps: f64) -> Vec<Point2> {
    let mut pts = vertices.to_vec();
    loop {
        let n = pts.len();
        if n <= 3 {
            return pts;
        }
        let mut removed = false;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let prev = if out.is_empty() { pts[(i + n - 1) % n] } else { *out.last().unwrap() };
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            let e0 = sub(cur, prev);
            let e1 = sub(next, cur);
            let scale = norm(e0).max(norm(e1));
            if cross(e0, e1).abs() <= eps * scale && dot(e0, e1) > 0.0 && out.len() + (n - i) > 3 {
                removed = true;
                continue;
            }
            out.push(cur);
        }
        pts = out;
        if !removed {
            return pts;
        }
    }
}

fn is_strictly_convex(pts: &[Point2]) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        cross(sub(b, a), sub(c, b)) > 0.0
    })
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if cross(sub(b, a), sub(p, b)) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn point_in_triangle_closed(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    let d1 = cross(sub(b, a), sub(p, a));
    let d2 = cross(sub(c, b), sub(p, b));
    let d3 = cross(sub(a, c), sub(p, c));
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
fn ear_clip(poly: &[Point2]) -> Vec<[Point2; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len().saturating_sub(2));
    let mut guard = 0usize;
    while idx.len() > 3 && guard < poly.len() * poly.len() + 8 {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let ia = idx[(k + m - 1) % m];
            let ib = idx[k];
            let ic = idx[(k + 1) % m];
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(sub(b, a), sub(c, b)) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ia && j != ib && j != ic && point_in_triangle_closed(poly[j], a, b, c)
            });
            if blocked {
                continue;
            }
            tris.push([a, b, c]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            // Only collinear remnants left; they carry no area.
            idx.retain(|_| false);
        }
    }
    if idx.len() == 3 {
        let (a, b, c) = (poly[idx[0]], poly[idx[1]], poly[idx[2]]);
        if cross(sub(b, a), sub(c, b)) > 0.0 {
            tris.push([a, b, c]);
        }
    }
    tris
}

fn triangle_planes(t: &[Point2; 3]) -> Vec<HalfPlane> {
    vec![
        HalfPlane::left_of(t[0], t[1]),
        HalfPlane::left_of(t[1], t[2]),
        HalfPlane::left_of(t[2], t[0]),
    ]
}

/// Proper or touching intersection of two closed segments.
fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2, eps: f64) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    let lab = norm(sub(b, a));
    let lcd = norm(sub(d, c));
    let s1 = eps * lab;
    let s2 = eps * lcd;
    if ((d1 > s1 && d2 < -s1) || (d1 < -s1 && d2 > s1)) && ((d3 > s2 && d4 < -s2) || (d3 < -s2 && d4 > s2)) {
        return true;
    }
    point_segment_distance(c, a, b) <= eps
        || point_segment_distance(d, a, b) <= eps
        || point_segment_distance(a, c, d) <= eps
        || point_segment_distance(b, c, d) <= eps
}

/// Liang-Barsky test of the segment `a-b` against `bx` grown by `tol`.
pub fn segment_intersects_box(a: Point2, b: Point2, bx: &CellBox<2>, tol: f64) -> bool {
    let d = sub(b, a);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for k in 0..2 {
        let lo = bx.lo[k] - tol;
        let hi = bx.hi[k] + tol;
        if d[k] == 0.0 {
            if a[k] < lo || a[k] > hi {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut ta, mut tb) = ((lo - a[k]) * inv, (hi - a[k]) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Ray directions tried by the even-odd test, in radians. The non-zero ones
/// are irrational so that a ray grazing one vertex cannot graze another
/// grid-aligned vertex as well.
const RAY_ANGLES: [f64; 4] = [0.0, 0.618_033_988_749_894_9, 0.414_213_562_373_095_1, std::f64::consts::E];

/// A closed, simple, counter-clockwise polygon with a fluid-side flag.
#[derive(Debug, Clone)]
pub struct PolygonBoundary {
    vertices: Vec<Point2>,
    fluid_side: FluidSide,
    eps: f64,
    /// Disjoint convex (possibly unbounded) pieces whose union is the fluid side.
    regions: Vec<Vec<HalfPlane>>,
}

impl PolygonBoundary {
    pub fn new(vertices: Vec<Point2>, fluid_side: FluidSide) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::Geometry(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Geometry("polygon has a non-finite vertex".into()));
        }
        let (lo, hi) = bbox(&vertices);
        let diag = norm(sub(hi, lo));
        let eps = REL_GEOMETRIC_TOLERANCE * diag;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            if norm(sub(b, a)) <= eps {
                return Err(Error::Geometry(format!("segment {i} has zero length")));
            }
        }
        let area = polygon_area(&vertices);
        if !(area > 0.0) {
            return Err(Error::Geometry(format!(
                "polygon must be counter-clockwise with positive area, signed area is {area:e}"
            )));
        }
        check_simple(&vertices, eps)?;
        let regions = build_regions(&vertices, fluid_side, eps);
        Ok(Self { vertices, fluid_side, eps, regions })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn fluid_side(&self) -> FluidSide {
        self.fluid_side
    }

    /// Absolute geometric tolerance.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_segments(&self) -> usize {
        self.vertices.len()
    }

    pub fn segment(&self, i: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        (0..self.vertices.len()).map(move |i| self.segment(i))
    }

    pub fn signed_area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Same polygon with the fluid on the other side.
    pub fn complement(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            fluid_side: self.fluid_side.opposite(),
            eps: self.eps,
            regions: build_regions(&self.vertices, self.fluid_side.opposite(), self.eps),
        }
    }

    /// Rigid translation.
    pub fn translated(&self, d: Point2) -> Self {
        let vertices: Vec<Point2> = self.vertices.iter().map(|v| [v[0] + d[0], v[1] + d[1]]).collect();
        let regions = build_regions(&vertices, self.fluid_side, self.eps);
        Self { vertices, fluid_side: self.fluid_side, eps: self.eps, regions }
    }

    /// Unit normal of segment `i` pointing out of the fluid.
    pub fn fluid_outward_normal(&self, i: usize) -> Point2 {
        let (a, b) = self.segment(i);
        let d = sub(b, a);
        let l = norm(d);
        // Right perpendicular is the outward normal of a CCW polygon.
        let out = [d[1] / l, -d[0] / l];
        match self.fluid_side {
            FluidSide::Interior => out,
            FluidSide::Exterior => [-out[0], -out[1]],
        }
    }

    /// True when `p` lies on the fluid side. Points within `eps` of the
    /// boundary are fluid.
    pub fn point_inside(&self, p: Point2) -> bool {
        if self.segments().any(|(a, b)| point_segment_distance(p, a, b) <= self.eps) {
            return true;
        }
        let inside = self.inside_polygon(p);
        match self.fluid_side {
            FluidSide::Interior => inside,
            FluidSide::Exterior => !inside,
        }
    }

    /// Even-odd ray casting for a point known to be off the boundary.
    fn inside_polygon(&self, p: Point2) -> bool {
        for &theta in &RAY_ANGLES {
            let d = [theta.cos(), theta.sin()];
            let grazes = self.vertices.iter().any(|&v| {
                let r = sub(v, p);
                cross(d, r).abs() <= self.eps && dot(d, r) >= -self.eps
            });
            if grazes {
                continue;
            }
            let mut crossings = 0usize;
            for (a, b) in self.segments() {
                let sa = cross(d, sub(a, p));
                let sb = cross(d, sub(b, p));
                if (sa > 0.0) != (sb > 0.0) {
                    let t = sa / (sa - sb);
                    let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    if dot(d, sub(q, p)) > 0.0 {
                        crossings += 1;
                    }
                }
            }
            return crossings % 2 == 1;
        }
        winding_number(&self.vertices, p) != 0
    }

    pub fn intersects_box(&self, cell: &CellBox<2>) -> bool {
        self.segments().any(|(a, b)| segment_intersects_box(a, b, cell, self.eps))
    }

    /// Inside / Outside / Cut from corner membership plus exact segment-box
    /// intersection. Boundaries merely touching the cell make it Cut.
    pub fn classify_cell(&self, cell: &CellBox<2>) -> CellClass {
        if self.intersects_box(cell) {
            return CellClass::Cut;
        }
        let fluid = cell.corners().filter(|&c| self.point_inside(c)).count();
        match fluid {
            4 => CellClass::Inside,
            0 => CellClass::Outside,
            _ => CellClass::Cut,
        }
    }

    /// Fluid part of the cell as disjoint convex polygons.
    pub fn clip_cell(&self, cell: &CellBox<2>) -> Vec<Vec<Point2>> {
        self.clip_convex(&cell.outline())
    }

    /// Fluid part of a convex counter-clockwise polygon as disjoint convex polygons.
    pub fn clip_convex(&self, piece: &[Point2]) -> Vec<Vec<Point2>> {
        let scale = {
            let (lo, hi) = bbox(piece);
            norm(sub(hi, lo))
        };
        let min_area = self.eps * scale;
        self.regions
            .iter()
            .filter_map(|planes| {
                let mut poly = piece.to_vec();
                for hp in planes {
                    poly = clip_by_half_plane(&poly, hp, self.eps);
                    if poly.len() < 3 {
                        return None;
                    }
                }
                (polygon_area(&poly) > min_area).then_some(poly)
            })
            .collect()
    }

    /// Text form: header `POLY n fluid_side` followed by one `x y` pair per line.
    pub fn to_poly_text(&self) -> String {
        let mut s = format!("POLY {} {}\n", self.vertices.len(), self.fluid_side.as_str());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        s
    }

    pub fn from_poly_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Geometry("empty polygon file".into()))?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some("POLY") {
            return Err(Error::Geometry(format!("polygon header must start with POLY, got `{header}`")));
        }
        let n: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Geometry(format!("bad vertex count in header `{header}`")))?;
        let side: FluidSide = tok
            .next()
            .ok_or_else(|| Error::Geometry(format!("missing fluid side in header `{header}`")))?
            .parse()?;
        let mut vertices = Vec::with_capacity(n);
        for (k, line) in lines.enumerate() {
            let xy: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Geometry(format!("vertex line {}: {e}", k + 2)))?;
            if xy.len() != 2 {
                return Err(Error::Geometry(format!("vertex line {} needs two numbers", k + 2)));
            }
            vertices.push([xy[0], xy[1]]);
        }
        if vertices.len() != n {
            return Err(Error::Geometry(format!("header announces {n} vertices, found {}", vertices.len())));
        }
        Self::new(vertices, side)
    }
}

fn bbox(pts: &[Point2]) -> (Point2, Point2) {
    pts.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    })
}

fn winding_number(poly: &[Point2], p: Point2) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let side = cross(sub(b, a), sub(p, a));
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            w -= 1;
        }
    }
    w
}

fn check_simple(v: &[Point2], eps: f64) -> Result<()> {
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        // Adjacent segments may only share their common vertex.
        let c = v[(i + 2) % n];
        let e0 = sub(b, a);
        let e1 = sub(c, b);
        if cross(e0, e1).abs() <= eps * norm(e0).max(norm(e1)) && dot(e0, e1) < 0.0 {
            return Err(Error::Geometry(format!("segments {i} and {} fold back onto each other", (i + 1) % n)));
        }
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_intersect(a, b, c, d, eps) {
                return Err(Error::Geometry(format!("segments {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

fn planes_of(poly: &[Point2]) -> Vec<HalfPlane> {
    let n = poly.len();
    (0..n).map(|i| HalfPlane::left_of(poly[i], poly[(i + 1) % n])).collect()
}

/// Decomposes the complement of a convex polygon (given by its inner
/// half-planes) into disjoint convex regions: region `k` lies outside edge
/// `k` and inside every earlier edge.
fn exterior_of_convex(planes: &[HalfPlane]) -> Vec<Vec<HalfPlane>> {
    (0..planes.len())
        .map(|k| {
            let mut r = Vec::with_capacity(k + 1);
            r.push(planes[k].flipped());
            r.extend_from_slice(&planes[..k]);
            r
        })
        .collect()
}

fn build_regions(vertices: &[Point2], side: FluidSide, eps: f64) -> Vec<Vec<HalfPlane>> {
    let simple = drop_collinear(vertices, eps);
    let convex = is_strictly_convex(&simple);
    match (side, convex) {
        (FluidSide::Interior, true) => vec![planes_of(&simple)],
        (FluidSide::Interior, false) => ear_clip(&simple).iter().map(triangle_planes).collect(),
        (FluidSide::Exterior, true) => exterior_of_convex(&planes_of(&simple)),
        (FluidSide::Exterior, false) => {
            let hull = convex_hull(&simple);
            let mut regions = exterior_of_convex(&planes_of(&hull));
            // Pockets between the hull and the polygon are fluid too.
            let pos: Vec<usize> = hull
                .iter()
                .map(|h| simple.iter().position(|v| v == h).expect("hull vertex is a polygon vertex"))
                .collect();
            let m = simple.len();
            for k in 0..pos.len() {
                let ia = pos[k];
                let ib = pos[(k + 1) % pos.len()];
                if (ia + 1) % m == ib {
                    continue;
                }
                let mut chain = Vec::new();
                let mut i = ia;
                loop {
                    chain.push(simple[i]);
                    if i == ib {
                        break;
                    }
                    i = (i + 1) % m;
                }
                chain.reverse();
                let pocket = drop_collinear(&chain, eps);
                regions.extend(ear_clip(&pocket).iter().map(triangle_planes));
            }
            regions
        }
    }
}

/// Intersection of the fluid sides of several boundary polygons.
#[derive(Debug, Clone)]
pub struct FluidDomain {
    boundaries: Vec<PolygonBoundary>,
}

impl FluidDomain {
    pub fn new(boundaries: Vec<PolygonBoundary>) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::Geometry("fluid domain needs at least one boundary".into()));
        }
        Ok(Self { boundaries })
    }

    pub fn single(boundary: PolygonBoundary) -> Self {
        Self { boundaries: vec![boundary] }
    }

    pub fn boundaries(&self) -> &[PolygonBoundary] {
        &self.boundaries
    }

    pub fn boundary(&self, id: usize) -> &PolygonBoundary {
        &self.boundaries[id]
    }

    pub fn replace_boundary(&mut self, id: usize, b: PolygonBoundary) {
        self.boundaries[id] = b;
    }

    pub fn eps(&self) -> f64 {
        self.boundaries.iter().map(|b| b.eps).fold(0.0, f64::max)
    }

    pub fn point_inside(&self, p: Point2) -> bool {
        self.boundaries.iter().all(|b| b.point_inside(p))
    }

    pub fn classify_cell(&self, cell: &CellBox<2>) -> CellClass {
        let mut cut = false;
        for b in &self.boundaries {
            match b.classify_cell(cell) {
                CellClass::Outside => return CellClass::Outside,
                CellClass::Cut => cut = true,
                CellClass::Inside => {}
            }
        }
        if cut {
            CellClass::Cut
        } else {
            CellClass::Inside
        }
    }

    /// Fluid part of a cell as disjoint convex polygons.
    pub fn clip_cell(&self, cell: &CellBox<2>) -> Vec<Vec<Point2>> {
        let mut pieces = vec![cell.outline()];
        for b in &self.boundaries {
            match b.classify_cell(cell) {
                CellClass::Inside => continue,
                CellClass::Outside => return Vec::new(),
                CellClass::Cut => {
                    pieces = pieces.iter().flat_map(|p| b.clip_convex(p)).collect();
                }
            }
        }
        pieces
    }

    /// Exact fluid area inside an axis-aligned box.
    pub fn fluid_area_in(&self, cell: &CellBox<2>) -> f64 {
        self.clip_cell(cell).iter().map(|p| polygon_area(p)).sum()
    }
}

/// Point location restricted to one background cell.
///
/// Only the boundary segments touching the cell are kept. A point is located
/// by walking from a cell corner of known membership and counting crossings,
/// so a query costs O(local segments) instead of O(all segments).
pub struct LocalFluidRegion<'a> {
    cell: CellBox<2>,
    parts: Vec<LocalBoundary<'a>>,
}

struct LocalBoundary<'a> {
    boundary: &'a PolygonBoundary,
    segments: Vec<(Point2, Point2)>,
    anchors: Vec<(Point2, bool)>,
}

impl LocalBoundary<'_> {
    fn contains(&self, p: Point2) -> bool {
        let eps = self.boundary.eps;
        if self.segments.iter().any(|&(a, b)| point_segment_distance(p, a, b) <= eps) {
            return true;
        }
        'anchor: for &(q, status) in &self.anchors {
            let mut parity = false;
            for &(a, b) in &self.segments {
                if point_segment_distance(a, p, q) <= eps || point_segment_distance(b, p, q) <= eps {
                    continue 'anchor;
                }
                let pq = sub(q, p);
                let ab = sub(b, a);
                let s1 = cross(pq, sub(a, p)) > 0.0;
                let s2 = cross(pq, sub(b, p)) > 0.0;
                let s3 = cross(ab, sub(p, a)) > 0.0;
                let s4 = cross(ab, sub(q, a)) > 0.0;
                if s1 != s2 && s3 != s4 {
                    parity = !parity;
                }
            }
            return status != parity;
        }
        self.boundary.point_inside(p)
    }
}

impl<'a> LocalFluidRegion<'a> {
    pub fn cell(&self) -> &CellBox<2> {
        &self.cell
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.parts.iter().all(|b| b.contains(p))
    }

    pub fn classify(&self, bx: &CellBox<2>) -> CellClass {
        let hit = self.parts.iter().any(|part| {
            part.segments.iter().any(|&(a, b)| segment_intersects_box(a, b, bx, part.boundary.eps))
        });
        if hit {
            return CellClass::Cut;
        }
        // Nothing crosses the box, so one point decides for all of it.
        if self.contains(bx.center()) {
            CellClass::Inside
        } else {
            CellClass::Outside
        }
    }
}

impl FluidRegion<2> for LocalFluidRegion<'_> {
    fn contains(&self, p: &Point2) -> bool {
        LocalFluidRegion::contains(self, *p)
    }

    fn classify(&self, cell: &CellBox<2>) -> CellClass {
        LocalFluidRegion::classify(self, cell)
    }
}

impl FluidDomain {
    /// Restricts point location to `cell`. Queries outside the cell are not
    /// supported.
    pub fn localize(&self, cell: &CellBox<2>) -> LocalFluidRegion<'_> {
        let mut parts = Vec::new();
        for b in &self.boundaries {
            let segments: Vec<(Point2, Point2)> =
                b.segments().filter(|&(s, e)| segment_intersects_box(s, e, cell, b.eps)).collect();
            if segments.is_empty() {
                // Uniform over the cell; an all-solid boundary makes everything solid.
                if !b.point_inside(cell.center()) {
                    parts.push(LocalBoundary { boundary: b, segments, anchors: vec![(cell.center(), false)] });
                }
                continue;
            }
            let margin = 16.0 * b.eps;
            let anchors = cell
                .corners()
                .filter(|&c| segments.iter().all(|&(s, e)| point_segment_distance(c, s, e) > margin))
                .map(|c| (c, b.point_inside(c)))
                .collect();
            parts.push(LocalBoundary { boundary: b, segments, anchors });
        }
        LocalFluidRegion { cell: *cell, parts }
    }
}

/// Sphere (`D = 3`) or circle (`D = 2`) used as an implicit test geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitShape<const D: usize> {
    pub center: [f64; D],
    pub radius: f64,
}

pub type Circle2D = ImplicitShape<2>;
pub type Sphere3D = ImplicitShape<3>;

impl<const D: usize> ImplicitShape<D> {
    pub fn new(center: [f64; D], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Geometry(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    fn distance(&self, p: &[f64; D]) -> f64 {
        (0..D).map(|k| (p[k] - self.center[k]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn membership(&self, p: &[f64; D]) -> bool {
        self.distance(p) < self.radius
    }

    pub fn measure(&self) -> f64 {
        match D {
            2 => std::f64::consts::PI * self.radius.powi(2),
            3 => 4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3),
            _ => unimplemented!("only circles and spheres"),
        }
    }
}

/// Classifies a box against an implicit circle/sphere: corner signs, plus an
/// interval test on the distance from the centre so that a surface entering
/// the box between corners still makes it Cut.
pub fn classify_cell_implicit<const D: usize>(cell: &CellBox<D>, shape: &ImplicitShape<D>, side: FluidSide) -> CellClass {
    let inside_corners = cell.corners().filter(|c| shape.membership(c)).count();
    if inside_corners != 0 && inside_corners != 1 << D {
        return CellClass::Cut;
    }
    let nearest: f64 = (0..D)
        .map(|k| {
            let c = shape.center[k];
            let d = if c < cell.lo[k] { cell.lo[k] - c } else if c > cell.hi[k] { c - cell.hi[k] } else { 0.0 };
            d * d
        })
        .sum::<f64>()
        .sqrt();
    let farthest: f64 = (0..D)
        .map(|k| {
            let d = (cell.lo[k] - shape.center[k]).abs().max((cell.hi[k] - shape.center[k]).abs());
            d * d
        })
        .sum::<f64>()
        .sqrt();
    if nearest < shape.radius && shape.radius < farthest {
        return CellClass::Cut;
    }
    let all_in_shape = inside_corners == 1 << D;
    match (all_in_shape, side) {
        (true, FluidSide::Interior) | (false, FluidSide::Exterior) => CellClass::Inside,
        _ => CellClass::Outside,
    }
}

/// Point-location interface used by adaptive integration.
pub trait FluidRegion<const D: usize> {
    fn contains(&self, p: &[f64; D]) -> bool;

    /// Defaults to corner membership only.
    fn classify(&self, cell: &CellBox<D>) -> CellClass {
        let fluid = cell.corners().filter(|c| self.contains(c)).count();
        if fluid == 0 {
            CellClass::Outside
        } else if fluid == 1 << D {
            CellClass::Inside
        } else {
            CellClass::Cut
        }
    }
}

impl FluidRegion<2> for PolygonBoundary {
    fn contains(&self, p: &Point2) -> bool {
        self.point_inside(*p)
    }

    fn classify(&self, cell: &CellBox<2>) -> CellClass {
        self.classify_cell(cell)
    }
}

impl FluidRegion<2> for FluidDomain {
    fn contains(&self, p: &Point2) -> bool {
        self.point_inside(*p)
    }

    fn classify(&self, cell: &CellBox<2>) -> CellClass {
        self.classify_cell(cell)
    }
}

/// An implicit shape together with the side that holds the fluid.
#[derive(Debug, Clone, Copy)]
pub struct ImplicitRegion<const D: usize> {
    pub shape: ImplicitShape<D>,
    pub side: FluidSide,
}

impl<const D: usize> FluidRegion<D> for ImplicitRegion<D> {
    fn contains(&self, p: &[f64; D]) -> bool {
        self.shape.membership(p) == (self.side == FluidSide::Interior)
    }

    fn classify(&self, cell: &CellBox<D>) -> CellClass {
        classify_cell_implicit(cell, &self.shape, self.side)
    }
}

/// Wraps a bare membership closure; classification uses corners only.
pub struct PredicateRegion<F>(pub F);

impl<const D: usize, F: Fn(&[f64; D]) -> bool> FluidRegion<D> for PredicateRegion<F> {
    fn contains(&self, p: &[f64; D]) -> bool {
        (self.0)(p)
    }
}

/// Regular polygon with `n` vertices, counter-clockwise, first vertex at `phase`.
pub fn regular_polygon(center: Point2, radius: f64, n: usize, phase: f64) -> Vec<Point2> {
    (0..n)
        .map(|k| {
            let t = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

/// Axis-aligned rectangle with `per_side` equal segments on every side,
/// counter-clockwise starting at the lower-left corner.
pub fn subdivided_rectangle(lo: Point2, hi: Point2, per_side: usize) -> Vec<Point2> {
    let per_side = per_side.max(1);
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let mut v = Vec::with_capacity(4 * per_side);
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        for k in 0..per_side {
            let t = k as f64 / per_side as f64;
            v.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    v
}
