//! Sparse block matrices with a fixed pattern, direct LU solves and
//! LU-preconditioned GMRES.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat, SymbolicSparseColMatRef};
use faer::Mat;

use crate::error::{Error, Result};

/// Required relative residual of every linear solve.
pub const LINEAR_TOLERANCE: f64 = 1e-10;

/// CSC pattern of a matrix made of `ncomp x ncomp` blocks, one block per
/// coupled pair of nodes. Rows inside a column are sorted.
#[derive(Debug)]
pub struct BlockPattern {
    pub n_nodes: usize,
    pub ncomp: usize,
    /// Node-level pattern: rows of node column `b` are `node_rows[node_ptr[b]..node_ptr[b+1]]`.
    node_ptr: Vec<usize>,
    node_rows: Vec<usize>,
    symbolic: SymbolicSparseColMat<usize>,
}

impl PartialEq for BlockPattern {
    fn eq(&self, other: &Self) -> bool {
        self.n_nodes == other.n_nodes
            && self.ncomp == other.ncomp
            && self.node_ptr == other.node_ptr
            && self.node_rows == other.node_rows
    }
}

impl BlockPattern {
    /// Every pair of nodes inside one patch is coupled.
    pub fn from_patches<'a>(n_nodes: usize, ncomp: usize, patches: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for patch in patches {
            for &b in patch {
                cols[b].extend_from_slice(patch);
            }
        }
        let mut node_ptr = Vec::with_capacity(n_nodes + 1);
        let mut node_rows = Vec::new();
        node_ptr.push(0);
        for mut c in cols {
            c.sort_unstable();
            c.dedup();
            node_rows.extend_from_slice(&c);
            node_ptr.push(node_rows.len());
        }
        let n = n_nodes * ncomp;
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(node_rows.len() * ncomp * ncomp);
        col_ptr.push(0);
        for b in 0..n_nodes {
            let rows = &node_rows[node_ptr[b]..node_ptr[b + 1]];
            for _cj in 0..ncomp {
                for &a in rows {
                    for ci in 0..ncomp {
                        row_idx.push(a * ncomp + ci);
                    }
                }
                col_ptr.push(row_idx.len());
            }
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Self { n_nodes, ncomp, node_ptr, node_rows, symbolic }
    }

    pub fn dim(&self) -> usize {
        self.n_nodes * self.ncomp
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.row_idx().len()
    }

    /// Offset of block `(a, b)` inside the value array of column `ncomp*b`.
    #[inline]
    fn block_offset(&self, a: usize, b: usize) -> Option<usize> {
        let rows = &self.node_rows[self.node_ptr[b]..self.node_ptr[b + 1]];
        rows.binary_search(&a).ok().map(|k| k * self.ncomp)
    }

    fn col_ptr(&self) -> &[usize] {
        self.symbolic.col_ptr()
    }

    fn row_idx(&self) -> &[usize] {
        self.symbolic.row_idx()
    }
}

/// Square sparse matrix on a shared [`BlockPattern`].
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub pattern: Arc<BlockPattern>,
    pub values: Vec<f64>,
}

impl BlockMatrix {
    pub fn zeros(pattern: Arc<BlockPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// Adds `value` at scalar position `(row, col)`. The position must be in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let nc = self.pattern.ncomp;
        let (a, ci) = (row / nc, row % nc);
        let (b, cj) = (col / nc, col % nc);
        let off = self.pattern.block_offset(a, b).expect("entry outside the sparsity pattern");
        let start = self.pattern.col_ptr()[b * nc + cj];
        self.values[start + off + ci] += value;
    }

    /// Adds a dense local matrix coupling local nodes to global nodes.
    /// `local[(la*nc + ci) * stride + lb*nc + cj]` is the entry for
    /// (test node `nodes[la]`, component `ci`) x (trial node `nodes[lb]`, component `cj`).
    pub fn add_local(&mut self, nodes: &[usize], local: &[f64]) {
        let nc = self.pattern.ncomp;
        let stride = nodes.len() * nc;
        for (lb, &b) in nodes.iter().enumerate() {
            for (la, &a) in nodes.iter().enumerate() {
                let off = self.pattern.block_offset(a, b).expect("entry outside the sparsity pattern");
                for cj in 0..nc {
                    let start = self.pattern.col_ptr()[b * nc + cj] + off;
                    for ci in 0..nc {
                        self.values[start + ci] += local[(la * nc + ci) * stride + lb * nc + cj];
                    }
                }
            }
        }
    }

    /// Replaces scalar row `r` by the identity row.
    pub fn set_identity_row(&mut self, r: usize) {
        let cp = self.pattern.col_ptr();
        let ri = self.pattern.row_idx();
        for c in 0..self.dim() {
            for k in cp[c]..cp[c + 1] {
                if ri[k] == r {
                    self.values[k] = if c == r { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let cp = self.pattern.col_ptr();
        let ri = self.pattern.row_idx();
        for c in 0..self.dim() {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in cp[c]..cp[c + 1] {
                y[ri[k]] += self.values[k] * xc;
            }
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let cp = self.pattern.col_ptr();
        let ri = self.pattern.row_idx();
        match ri[cp[col]..cp[col + 1]].binary_search(&row) {
            Ok(k) => self.values[cp[col] + k],
            Err(_) => 0.0,
        }
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        let n = self.dim();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, self.pattern.col_ptr(), None, self.pattern.row_idx());
        SparseColMatRef::new(sym, &self.values)
    }

    /// Dense copy, for tests and condition estimates on small systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        let cp = self.pattern.col_ptr();
        let ri = self.pattern.row_idx();
        for c in 0..n {
            for k in cp[c]..cp[c + 1] {
                d[ri[k]][c] = self.values[k];
            }
        }
        d
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn relative_residual(a: &BlockMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; b.len()];
    a.matvec(x, &mut r);
    let num: f64 = r.iter().zip(b).map(|(ax, bi)| (ax - bi).powi(2)).sum::<f64>().sqrt();
    let den = norm2(b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Statistics of one linear solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveInfo {
    pub refactored: bool,
    pub gmres_iterations: usize,
    pub relative_residual: f64,
}

/// Sparse LU solver that caches the symbolic analysis per pattern and,
/// when allowed, keeps the last numeric factorization as a preconditioner.
#[derive(Default)]
pub struct LinearSolver {
    symbolic: Option<(Arc<BlockPattern>, SymbolicLu<usize>)>,
    numeric: Option<(Arc<BlockPattern>, Lu<usize, f64>)>,
    /// GMRES iterations above which the preconditioner is refreshed before
    /// the next solve.
    pub refactor_threshold: usize,
    pub factorizations: usize,
    stale: bool,
}

impl LinearSolver {
    pub fn new() -> Self {
        Self { refactor_threshold: 8, ..Default::default() }
    }

    /// Drops the cached factorizations.
    pub fn reset(&mut self) {
        self.symbolic = None;
        self.numeric = None;
        self.stale = false;
    }

    fn factor(&mut self, a: &BlockMatrix) -> Result<()> {
        let same = matches!(&self.symbolic, Some((p, _)) if Arc::ptr_eq(p, &a.pattern));
        if !same {
            let sym = SymbolicLu::try_new(a.as_faer().symbolic())
                .map_err(|e| breakdown(format!("symbolic LU failed: {e:?}")))?;
            self.symbolic = Some((a.pattern.clone(), sym));
        }
        let sym = self.symbolic.as_ref().map(|(_, s)| s.clone()).expect("symbolic present");
        let lu = Lu::try_new_with_symbolic(sym, a.as_faer()).map_err(|e| breakdown(format!("numeric LU failed: {e:?}")))?;
        self.numeric = Some((a.pattern.clone(), lu));
        self.factorizations += 1;
        Ok(())
    }

    fn apply_lu(&self, b: &[f64]) -> Vec<f64> {
        let (_, lu) = self.numeric.as_ref().expect("factorization present");
        let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        lu.solve_in_place(rhs.as_mut());
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    /// Fresh factorization plus iterative refinement.
    pub fn solve_direct(&mut self, a: &BlockMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveInfo)> {
        self.factor(a)?;
        let mut x = self.apply_lu(b);
        let mut res = relative_residual(a, &x, b);
        let mut steps = 0;
        while res > LINEAR_TOLERANCE && res.is_finite() && steps < 3 {
            let mut ax = vec![0.0; b.len()];
            a.matvec(&x, &mut ax);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = self.apply_lu(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            res = relative_residual(a, &x, b);
            steps += 1;
        }
        if !(res <= LINEAR_TOLERANCE) {
            // Refinement with a poor factorization can still converge under GMRES.
            let (y, it, r2) = gmres(a, b, &x, |v| self.apply_lu(v), 200, 60);
            if r2 <= LINEAR_TOLERANCE {
                return Ok((y, SolveInfo { refactored: true, gmres_iterations: it, relative_residual: r2 }));
            }
            return Err(breakdown(format!("direct solve reached relative residual {res:e}")));
        }
        Ok((x, SolveInfo { refactored: true, gmres_iterations: 0, relative_residual: res }))
    }

    /// GMRES preconditioned by the last factorization of the same pattern;
    /// falls back to a fresh factorization when that is slow or unavailable.
    pub fn solve_reusing(&mut self, a: &BlockMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveInfo)> {
        let usable = !self.stale && matches!(&self.numeric, Some((p, _)) if Arc::ptr_eq(p, &a.pattern));
        if usable {
            let x0 = vec![0.0; b.len()];
            let limit = 4 * self.refactor_threshold.max(1);
            let (x, it, res) = gmres(a, b, &x0, |v| self.apply_lu(v), limit, limit);
            if res <= LINEAR_TOLERANCE {
                self.stale = it > self.refactor_threshold;
                return Ok((x, SolveInfo { refactored: false, gmres_iterations: it, relative_residual: res }));
            }
        }
        self.stale = false;
        self.solve_direct(a, b)
    }
}

fn breakdown(reason: String) -> Error {
    Error::LinearSolver { reason, newton_iterations: 0, trace: Vec::new() }
}

/// Right-preconditioned restarted GMRES. Returns the iterate, the number of
/// inner iterations and the true relative residual.
pub fn gmres(
    a: &BlockMatrix,
    b: &[f64],
    x0: &[f64],
    precond: impl Fn(&[f64]) -> Vec<f64>,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, usize, f64) {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.to_vec();
    if bnorm == 0.0 {
        return (vec![0.0; n], 0, 0.0);
    }
    let restart = restart.max(1);
    let mut total = 0usize;
    let mut ax = vec![0.0; n];
    loop {
        a.matvec(&x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta / bnorm <= LINEAR_TOLERANCE * 0.1 || total >= max_iter {
            return (x, total, beta / bnorm);
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_done = 0;
        for k in 0..restart {
            if total >= max_iter {
                break;
            }
            total += 1;
            let zk = precond(&v[k]);
            let mut w = vec![0.0; n];
            a.matvec(&zk, &mut w);
            z.push(zk);
            for (j, vj) in v.iter().enumerate() {
                let hj: f64 = w.iter().zip(vj).map(|(a, b)| a * b).sum();
                h[j][k] = hj;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hj * vi);
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            if den == 0.0 {
                break;
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_done = k + 1;
            if hn == 0.0 || g[k + 1].abs() / bnorm <= LINEAR_TOLERANCE * 0.1 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        if k_done == 0 {
            a.matvec(&x, &mut ax);
            let res = norm2(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>()) / bnorm;
            return (x, total, res);
        }
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let s: f64 = (i + 1..k_done).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&z[j]).for_each(|(xi, zi)| *xi += yj * zi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(n_nodes: usize, ncomp: usize, seed: u64) -> (BlockMatrix, Vec<f64>) {
        let patches: Vec<Vec<usize>> = (0..n_nodes - 1).map(|i| vec![i, i + 1]).collect();
        let pattern = Arc::new(BlockPattern::from_patches(n_nodes, ncomp, patches.iter().map(|p| p.as_slice())));
        let mut m = BlockMatrix::zeros(pattern);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nc = ncomp;
        for p in &patches {
            let local: Vec<f64> = (0..(2 * nc) * (2 * nc)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.add_local(p, &local);
        }
        for i in 0..m.dim() {
            m.add(i, i, 8.0);
        }
        let b = (0..m.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (m, b)
    }

    #[test]
    fn add_local_matches_dense_oracle() {
        let pattern = Arc::new(BlockPattern::from_patches(3, 2, [[0usize, 2].as_slice()].into_iter()));
        let mut m = BlockMatrix::zeros(pattern);
        let local: Vec<f64> = (0..16).map(|k| k as f64).collect();
        m.add_local(&[2, 0], &local);
        // Local row (la=0, ci=1) = global row 5; local col (lb=1, cj=0) = global col 0.
        assert_eq!(m.get(5, 0), local[(1) * 4 + 2]);
        assert_eq!(m.get(0, 4), local[(2) * 4 + 0]);
        assert_eq!(m.get(2, 2), 0.0);
    }

    #[test]
    fn direct_and_gmres_agree() {
        let (m, b) = random_system(40, 3, 1);
        let mut s = LinearSolver::new();
        let (x, info) = s.solve_direct(&m, &b).unwrap();
        assert!(info.relative_residual < LINEAR_TOLERANCE);
        // Perturb the matrix and solve with the stale factorization.
        let mut m2 = m.clone();
        m2.values.iter_mut().enumerate().for_each(|(k, v)| *v *= 1.0 + 1e-3 * ((k % 7) as f64 - 3.0));
        let (y, info2) = s.solve_reusing(&m2, &b).unwrap();
        assert!(!info2.refactored && info2.gmres_iterations > 0);
        assert!(relative_residual(&m2, &y, &b) < LINEAR_TOLERANCE);
        assert!(x.iter().zip(&y).any(|(a, b)| (a - b).abs() > 1e-8));
    }

    #[test]
    fn identity_row() {
        let (mut m, _) = random_system(5, 3, 2);
        m.set_identity_row(4);
        for c in 0..m.dim() {
            assert_eq!(m.get(4, c), if c == 4 { 1.0 } else { 0.0 });
        }
    }
}
