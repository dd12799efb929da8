//! Uniform tensor-product B-splines of degree 1 or 2 on a rectangle.
//!
//! Knot vectors are open and uniform, so each axis carries `n + p` basis
//! functions and element `e` is supported by functions `e ..= e + p`.
//! Velocity components and pressure share the same scalar space.

use crate::error::{Error, Result};
use crate::geometry::{CartesianGrid, CellClass, Point2};

/// Largest number of scalar basis functions supported by one element.
pub const MAX_LOCAL: usize = 9;

/// Values and physical derivatives of the basis functions supported by one element.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub n: usize,
    pub values: [f64; MAX_LOCAL],
    pub grads: [[f64; 2]; MAX_LOCAL],
    /// Second derivatives `[xx, xy, yy]`.
    pub hessians: [[f64; 3]; MAX_LOCAL],
}

impl Default for BasisEval {
    fn default() -> Self {
        Self { n: 0, values: [0.0; MAX_LOCAL], grads: [[0.0; 2]; MAX_LOCAL], hessians: [[0.0; 3]; MAX_LOCAL] }
    }
}

/// Nonzero univariate B-splines on element `e` and their first two
/// derivatives with respect to the knot parameter, at `u` in `[e, e+1]`.
fn univariate(n_elems: usize, p: usize, e: usize, u: f64) -> [[f64; 3]; 3] {
    // Knot `i` of the open uniform vector, in element units.
    let knot = |i: isize| -> f64 { (i - p as isize).clamp(0, n_elems as isize) as f64 };
    let span = (e + p) as isize;
    // Triangular table of basis functions of increasing degree (Piegl & Tiller A2.3).
    let mut ndu = [[0.0f64; 3]; 3];
    let mut left = [0.0f64; 3];
    let mut right = [0.0f64; 3];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knot(span + 1 - j as isize);
        right[j] = knot(span + j as isize) - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = [[0.0f64; 3]; 3];
    for j in 0..=p {
        ders[j][0] = ndu[j][p];
    }
    let mut a = [[0.0f64; 3]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=2usize.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[r][k] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=2usize.min(p) {
        for r in 0..=p {
            ders[r][k] *= fac;
        }
        fac *= (p - k) as f64;
    }
    ders
}

/// Uniform B-spline space on a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct BsplineGrid {
    pub lo: Point2,
    pub hi: Point2,
    pub n: [usize; 2],
    pub degree: usize,
    pub h: [f64; 2],
}

impl BsplineGrid {
    pub fn new(lo: Point2, hi: Point2, n: [usize; 2], degree: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::Argument(format!("spline degree must be 1 or 2, got {degree}")));
        }
        let cart = CartesianGrid::new(lo, hi, n)?;
        Ok(Self { lo, hi, n, degree, h: cart.h })
    }

    pub fn cartesian(&self) -> CartesianGrid {
        CartesianGrid { origin: self.lo, h: self.h, n: self.n }
    }

    pub fn n_elements(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn n_basis_axis(&self, axis: usize) -> usize {
        self.n[axis] + self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis_axis(0) * self.n_basis_axis(1)
    }

    pub fn n_local(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.n[0], e / self.n[0])
    }

    pub fn basis_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n_basis_axis(0) + ix
    }

    /// Global basis indices supported by element `e`, in the same order as
    /// [`Self::eval_basis`] (x index fastest).
    pub fn element_basis(&self, e: usize) -> [usize; MAX_LOCAL] {
        let (ex, ey) = self.element_ij(e);
        let q = self.degree + 1;
        let mut out = [usize::MAX; MAX_LOCAL];
        for ly in 0..q {
            for lx in 0..q {
                out[ly * q + lx] = self.basis_index(ex + lx, ey + ly);
            }
        }
        out
    }

    /// Elements in the support of a basis function, as index ranges per axis.
    pub fn support(&self, basis: usize) -> ([usize; 2], [usize; 2]) {
        let nbx = self.n_basis_axis(0);
        let (ix, iy) = (basis % nbx, basis / nbx);
        let p = self.degree;
        let range = |i: usize, n: usize| [i.saturating_sub(p), i.min(n - 1)];
        (range(ix, self.n[0]), range(iy, self.n[1]))
    }

    pub fn map(&self, e: usize, xi: Point2) -> Point2 {
        let (ex, ey) = self.element_ij(e);
        [self.lo[0] + (ex as f64 + xi[0]) * self.h[0], self.lo[1] + (ey as f64 + xi[1]) * self.h[1]]
    }

    /// Element containing `x` and the reference coordinate inside it.
    pub fn locate(&self, x: Point2) -> Result<(usize, Point2)> {
        let tol = 1e-12 * (self.hi[0] - self.lo[0]).hypot(self.hi[1] - self.lo[1]);
        if (0..2).any(|k| x[k] < self.lo[k] - tol || x[k] > self.hi[k] + tol || !x[k].is_finite()) {
            return Err(Error::Argument(format!("point {x:?} lies outside the spline domain")));
        }
        let mut e = [0usize; 2];
        let mut xi = [0.0; 2];
        for k in 0..2 {
            let s = (x[k] - self.lo[k]) / self.h[k];
            let i = (s.floor().max(0.0) as usize).min(self.n[k] - 1);
            e[k] = i;
            xi[k] = (s - i as f64).clamp(0.0, 1.0);
        }
        Ok((e[1] * self.n[0] + e[0], xi))
    }

    /// Basis values, gradients and Hessians in physical units on element `e`
    /// at reference point `xi` in `[0,1]^2`.
    pub fn eval_basis(&self, e: usize, xi: Point2) -> BasisEval {
        let (ex, ey) = self.element_ij(e);
        let p = self.degree;
        let bx = univariate(self.n[0], p, ex, ex as f64 + xi[0]);
        let by = univariate(self.n[1], p, ey, ey as f64 + xi[1]);
        let (ix, iy) = (1.0 / self.h[0], 1.0 / self.h[1]);
        let q = p + 1;
        let mut out = BasisEval { n: q * q, ..Default::default() };
        for ly in 0..q {
            for lx in 0..q {
                let a = ly * q + lx;
                let (nx, dx, ddx) = (bx[lx][0], bx[lx][1] * ix, bx[lx][2] * ix * ix);
                let (ny, dy, ddy) = (by[ly][0], by[ly][1] * iy, by[ly][2] * iy * iy);
                out.values[a] = nx * ny;
                out.grads[a] = [dx * ny, nx * dy];
                out.hessians[a] = [ddx * ny, dx * dy, nx * ddy];
            }
        }
        out
    }

    /// Evaluates at a physical point.
    pub fn eval_at(&self, x: Point2) -> Result<(usize, BasisEval)> {
        let (e, xi) = self.locate(x)?;
        Ok((e, self.eval_basis(e, xi)))
    }
}

/// Active basis functions and their compact numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    /// Compact index per global basis function, `None` when inactive.
    pub compact: Vec<Option<usize>>,
    /// Global basis index per compact index.
    pub active: Vec<usize>,
    /// Elements that are Inside or Cut.
    pub active_elements: Vec<bool>,
}

/// Field components per active basis function: `vx, vy, p`.
pub const N_FIELDS: usize = 3;

impl DofMap {
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        2 * self.n_active()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.n_active()
    }

    pub fn n_dofs(&self) -> usize {
        N_FIELDS * self.n_active()
    }

    pub fn is_active(&self, basis: usize) -> bool {
        self.compact[basis].is_some()
    }
}

/// A basis function is active iff its support touches an Inside or Cut cell.
pub fn mark_active(grid: &BsplineGrid, classes: &[CellClass]) -> Result<DofMap> {
    if classes.len() != grid.n_elements() {
        return Err(Error::Argument(format!(
            "{} cell classes for a grid with {} elements",
            classes.len(),
            grid.n_elements()
        )));
    }
    let mut flag = vec![false; grid.n_basis()];
    let active_elements: Vec<bool> = classes.iter().map(|c| *c != CellClass::Outside).collect();
    let nl = grid.n_local();
    for (e, &on) in active_elements.iter().enumerate() {
        if on {
            for &b in &grid.element_basis(e)[..nl] {
                flag[b] = true;
            }
        }
    }
    let mut compact = vec![None; grid.n_basis()];
    let mut active = Vec::new();
    for (b, &f) in flag.iter().enumerate() {
        if f {
            compact[b] = Some(active.len());
            active.push(b);
        }
    }
    Ok(DofMap { compact, active, active_elements })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(p: usize) -> BsplineGrid {
        BsplineGrid::new([-0.3, 0.2], [1.1, 1.5], [5, 4], p).unwrap()
    }

    #[test]
    fn counts() {
        let g = grid(2);
        assert_eq!(g.n_basis_axis(0), 7);
        assert_eq!(g.n_basis(), 7 * 6);
        assert_eq!(g.n_local(), 9);
        assert!(BsplineGrid::new([0.0, 0.0], [1.0, 1.0], [2, 2], 3).is_err());
    }

    #[test]
    fn linear_corner_interpolates() {
        let g = grid(1);
        let ev = g.eval_basis(7, [0.0, 0.0]);
        assert_eq!(ev.n, 4);
        assert!((ev.values[0] - 1.0).abs() < 1e-15);
        assert!(ev.values[1..4].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn partition_of_unity_and_gradient_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [1, 2] {
            let g = grid(p);
            for _ in 0..10_000 {
                let e = rng.gen_range(0..g.n_elements());
                let ev = g.eval_basis(e, [rng.gen(), rng.gen()]);
                let s: f64 = ev.values[..ev.n].iter().sum();
                assert!((s - 1.0).abs() < 1e-13);
                assert!(ev.values[..ev.n].iter().all(|&v| v >= -1e-15));
                for k in 0..2 {
                    let gs: f64 = ev.grads[..ev.n].iter().map(|d| d[k]).sum();
                    assert!(gs.abs() < 1e-11 / g.h[k]);
                }
                for k in 0..3 {
                    let hs: f64 = ev.hessians[..ev.n].iter().map(|d| d[k]).sum();
                    assert!(hs.abs() < 1e-9 / (g.h[0] * g.h[1]));
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in [1, 2] {
            let g = grid(p);
            for _ in 0..200 {
                let e = rng.gen_range(0..g.n_elements());
                let xi = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
                let x = g.map(e, xi);
                let ev = g.eval_basis(e, xi);
                let step = 1e-6;
                let at = |d: [f64; 2]| {
                    let xi2 = [xi[0] + d[0] / g.h[0], xi[1] + d[1] / g.h[1]];
                    g.eval_basis(e, xi2)
                };
                let _ = x;
                for k in 0..2 {
                    let mut d = [0.0; 2];
                    d[k] = step;
                    let fp = at(d);
                    d[k] = -step;
                    let fm = at(d);
                    for a in 0..ev.n {
                        let fd = (fp.values[a] - fm.values[a]) / (2.0 * step);
                        let scale = 1.0 / g.h[k];
                        assert!((fd - ev.grads[a][k]).abs() < 1e-5 * scale, "p={p} a={a} k={k}");
                        if p == 2 {
                            // Hessian row from differences of gradients.
                            let fdh0 = (fp.grads[a][0] - fm.grads[a][0]) / (2.0 * step);
                            let fdh1 = (fp.grads[a][1] - fm.grads[a][1]) / (2.0 * step);
                            let (h0, h1) = if k == 0 {
                                (ev.hessians[a][0], ev.hessians[a][1])
                            } else {
                                (ev.hessians[a][1], ev.hessians[a][2])
                            };
                            let s2 = scale / g.h[0].min(g.h[1]);
                            assert!((fdh0 - h0).abs() < 1e-5 * s2);
                            assert!((fdh1 - h1).abs() < 1e-5 * s2);
                        }
                    }
                }
            }
        }
    }

    /// Independent oracle: Cox-de Boor recursion on the full knot vector.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, u: f64) -> f64 {
        if p == 0 {
            let last = knots[knots.len() - 1];
            return if (knots[i] <= u && u < knots[i + 1]) || (u == last && knots[i] < u && u <= knots[i + 1]) {
                1.0
            } else {
                0.0
            };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (u - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, u);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - u) / d2 * cox_de_boor(knots, i + 1, p - 1, u);
        }
        v
    }

    #[test]
    fn values_match_cox_de_boor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in [1usize, 2] {
            let n = 6usize;
            let mut knots = vec![0.0; p];
            knots.extend((0..=n).map(|i| i as f64));
            knots.extend(vec![n as f64; p]);
            for _ in 0..500 {
                let e = rng.gen_range(0..n);
                let u = e as f64 + rng.gen::<f64>();
                let d = univariate(n, p, e, u);
                for r in 0..=p {
                    assert!((d[r][0] - cox_de_boor(&knots, e + r, p, u)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn locate_examples() {
        let g = BsplineGrid::new([0.0, 0.0], [1.0, 1.0], [2, 2], 1).unwrap();
        let (e, xi) = g.locate([0.75, 0.25]).unwrap();
        assert_eq!(g.element_ij(e), (1, 0));
        assert!((xi[0] - 0.5).abs() < 1e-15 && (xi[1] - 0.5).abs() < 1e-15);
        let (e, xi) = g.locate([1.0, 1.0]).unwrap();
        assert_eq!(g.element_ij(e), (1, 1));
        assert_eq!(xi, [1.0, 1.0]);
        assert!(g.locate([1.5, 0.0]).is_err());

        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let e = rng.gen_range(0..g.n_elements());
            let xi = [rng.gen(), rng.gen()];
            let x = g.map(e, xi);
            let (e2, xi2) = g.locate(x).unwrap();
            let back = g.map(e2, xi2);
            assert!((back[0] - x[0]).abs() < 1e-13 && (back[1] - x[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn activity() {
        for p in [1, 2] {
            let g = grid(p);
            let all_in = mark_active(&g, &vec![CellClass::Inside; g.n_elements()]).unwrap();
            assert_eq!(all_in.n_active(), g.n_basis());
            let none = mark_active(&g, &vec![CellClass::Outside; g.n_elements()]).unwrap();
            assert_eq!(none.n_active(), 0);
            let mut classes = vec![CellClass::Outside; g.n_elements()];
            let corner = g.n_elements() - 1;
            classes[corner] = CellClass::Cut;
            let dm = mark_active(&g, &classes).unwrap();
            // Brute force: a function is active iff it is nonzero somewhere in the corner cell.
            for b in 0..g.n_basis() {
                let (rx, ry) = g.support(b);
                let (cx, cy) = g.element_ij(corner);
                let touches = rx[0] <= cx && cx <= rx[1] && ry[0] <= cy && cy <= ry[1];
                let mut nonzero = false;
                let local = g.element_basis(corner);
                let ev = g.eval_basis(corner, [0.5, 0.5]);
                for a in 0..ev.n {
                    if local[a] == b && ev.values[a] > 0.0 {
                        nonzero = true;
                    }
                }
                assert_eq!(dm.is_active(b), touches);
                assert_eq!(touches, nonzero);
            }
            assert_eq!(dm.n_dofs(), 3 * (p + 1) * (p + 1));
        }
    }
}
