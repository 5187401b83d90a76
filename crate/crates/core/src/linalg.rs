//! Compressed-row sparse matrices and SPD solvers.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Systems up to this size are factorised (envelope Cholesky in reverse
/// Cuthill-McKee order); larger ones use CG with an IC(0) preconditioner.
pub const DIRECT_SOLVE_THRESHOLD: usize = 12_000;

/// Default relative residual tolerance of the iterative solver.
pub const DEFAULT_CG_TOL: f64 = 1e-11;

/// Row-compressed sparsity of a finite element operator together with the
/// cell-to-CSR scatter table.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    n_local: usize,
    /// `cell_positions[(t * n_local + a) * n_local + b]` is the CSR slot of
    /// entry `(dof_a, dof_b)` of cell `t`.
    cell_positions: Vec<usize>,
    envelope: OnceLock<Arc<Envelope>>,
}

impl SparsityPattern {
    pub fn from_cells(n: usize, n_local: usize, cell_dofs: &[usize]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for cell in cell_dofs.chunks_exact(n_local) {
            for &i in cell {
                rows[i].extend_from_slice(cell);
            }
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        let mut cell_positions = Vec::with_capacity(cell_dofs.len() * n_local);
        for cell in cell_dofs.chunks_exact(n_local) {
            for &i in cell {
                let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
                for &j in cell {
                    let k = cols.binary_search(&j).expect("pattern contains cell coupling");
                    cell_positions.push(row_offsets[i] + k);
                }
            }
        }
        Self { n, row_offsets, col_indices, n_local, cell_positions, envelope: OnceLock::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }
    pub fn cell_positions(&self, t: usize) -> &[usize] {
        let m = self.n_local * self.n_local;
        &self.cell_positions[t * m..(t + 1) * m]
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_offsets[i] + k)
    }

    fn envelope(&self) -> &Arc<Envelope> {
        self.envelope.get_or_init(|| Arc::new(Envelope::new(self)))
    }
}

#[derive(Clone, Debug)]
pub struct SparseMatrix<T> {
    pattern: Arc<SparsityPattern>,
    values: Vec<T>,
    symmetric: bool,
}

impl<T: Real> SparseMatrix<T> {
    pub fn zeros(pattern: &Arc<SparsityPattern>, symmetric: bool) -> Self {
        Self { pattern: Arc::clone(pattern), values: vec![T::zero(); pattern.nnz()], symmetric }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }
    pub fn n(&self) -> usize {
        self.pattern.n
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.pattern.position(i, j).map_or(T::zero(), |k| self.values[k])
    }

    /// Adds a dense local matrix (row-major, `n_local x n_local`) of cell `t`.
    pub fn add_cell(&mut self, t: usize, local: &[T]) {
        for (&k, &v) in self.pattern.cell_positions(t).iter().zip(local) {
            self.values[k] += v;
        }
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.pattern.row_range(i);
            *yi = self.pattern.col_indices[r.clone()].iter().zip(&self.values[r]).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n()];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    /// `self += alpha * other` on an identical pattern.
    pub fn add_scaled(&mut self, alpha: T, other: &SparseMatrix<T>) {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern), "patterns differ");
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        self.symmetric &= other.symmetric;
    }

    pub fn scale(&mut self, alpha: T) {
        for a in &mut self.values {
            *a *= alpha;
        }
    }

    /// Symmetric elimination of the DOFs flagged in `fixed`: their rows and
    /// columns are zeroed and the diagonal set to one. With `rhs` and the
    /// prescribed `values`, the known contributions move to the right-hand
    /// side and `rhs[j] = values[j]` on fixed DOFs.
    pub fn pin_dofs(&mut self, fixed: &[bool], mut rhs: Option<(&mut [T], &[T])>) {
        let n = self.n();
        for i in 0..n {
            let r = self.pattern.row_range(i);
            for k in r {
                let j = self.pattern.col_indices[k];
                if fixed[i] {
                    self.values[k] = if i == j { T::one() } else { T::zero() };
                } else if fixed[j] {
                    if let Some((b, g)) = rhs.as_mut() {
                        b[i] -= self.values[k] * g[j];
                    }
                    self.values[k] = T::zero();
                }
            }
        }
        if let Some((b, g)) = rhs {
            for i in 0..n {
                if fixed[i] {
                    b[i] = g[i];
                }
            }
        }
    }

    pub fn max_asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n() {
            for k in self.pattern.row_range(i) {
                let j = self.pattern.col_indices[k];
                m = m.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.n();
        let mut d = vec![vec![T::zero(); n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.pattern.row_range(i) {
                row[self.pattern.col_indices[k]] = self.values[k];
            }
        }
        d
    }

    /// Builds a matrix from a dense array, keeping structurally non-zero entries.
    pub fn from_dense(a: &[Vec<T>], symmetric: bool) -> Self {
        let n = a.len();
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for row in a {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        let pattern = SparsityPattern { n, row_offsets, col_indices, n_local: 0, cell_positions: Vec::new(), envelope: OnceLock::new() };
        Self { pattern: Arc::new(pattern), values, symmetric }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Cg,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: SolveMethod,
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd<T: Real>(a: &SparseMatrix<T>, b: &[T], tol: T) -> Result<(Vec<T>, LinearSolveReport)> {
    if a.n() <= DIRECT_SOLVE_THRESHOLD {
        solve_direct(a, b)
    } else {
        ic_conjugate_gradient(a, b, None, tol, 10 * a.n())
    }
}

pub fn solve_direct<T: Real>(a: &SparseMatrix<T>, b: &[T]) -> Result<(Vec<T>, LinearSolveReport)> {
    let chol = EnvelopeCholesky::factor(a)?;
    let x = chol.solve(b);
    let rel = relative_residual(a, &x, b);
    Ok((x, LinearSolveReport { iterations: 1, relative_residual: rel, method: SolveMethod::Direct }))
}

fn relative_residual<T: Real>(a: &SparseMatrix<T>, x: &[T], b: &[T]) -> f64 {
    let ax = a.apply(x);
    let r: T = ax.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&v| v * v).sum::<T>().sqrt();
    if nb == T::zero() {
        r.to_f64_lossy()
    } else {
        (r / nb).to_f64_lossy()
    }
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, LinearSolveReport)> {
    let inv_diag: Vec<T> = a.diagonal().into_iter().map(|d| if d != T::zero() { T::one() / d } else { T::one() }).collect();
    preconditioned_cg(a, b, x0, tol, max_iter, |r, z| {
        for ((zi, &ri), &d) in z.iter_mut().zip(r).zip(&inv_diag) {
            *zi = ri * d;
        }
    })
}

/// Conjugate gradients preconditioned by an incomplete Cholesky factor with
/// the sparsity of `a`.
pub fn ic_conjugate_gradient<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, LinearSolveReport)> {
    let ic = IncompleteCholesky::factor(a);
    preconditioned_cg(a, b, x0, tol, max_iter, |r, z| ic.solve_into(r, z))
}

fn preconditioned_cg<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
    precondition: impl Fn(&[T], &mut [T]),
) -> Result<(Vec<T>, LinearSolveReport)> {
    let n = a.n();
    let mut x = x0.map_or_else(|| vec![T::zero(); n], |x| x.to_vec());
    let mut r = a.apply(&x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let nb = b.iter().map(|&v| v * v).sum::<T>().sqrt();
    let scale = if nb > T::zero() { nb } else { T::one() };
    let mut z = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    let mut ap = vec![T::zero(); n];
    let mut rnorm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
    let mut it = 0;
    while rnorm > tol * scale {
        if it >= max_iter {
            return Err(Error::MaxIterations(LinearSolveReport {
                iterations: it,
                relative_residual: (rnorm / scale).to_f64_lossy(),
                method: SolveMethod::Cg,
            }));
        }
        a.mul_vec(&p, &mut ap);
        let pap: T = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precondition(&r, &mut z);
        let rz_new: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
        it += 1;
    }
    Ok((x, LinearSolveReport { iterations: it, relative_residual: (rnorm / scale).to_f64_lossy(), method: SolveMethod::Cg }))
}

/// IC(0): lower factor on the lower triangle of the pattern, stored in the
/// matrix's own CSR slots. Pivot breakdown (possible for P2 stiffness, which
/// is no M-matrix) is handled by retrying with a growing diagonal shift.
struct IncompleteCholesky<T> {
    pattern: Arc<SparsityPattern>,
    factor: Vec<T>,
    diag_pos: Vec<usize>,
}

impl<T: Real> IncompleteCholesky<T> {
    fn factor(a: &SparseMatrix<T>) -> Self {
        let pat = &a.pattern;
        let diag_pos: Vec<usize> = (0..a.n()).map(|i| pat.position(i, i).expect("structural diagonal")).collect();
        let mut shift = T::zero();
        loop {
            if let Some(factor) = Self::try_factor(a, &diag_pos, shift) {
                return Self { pattern: Arc::clone(pat), factor, diag_pos };
            }
            shift = if shift == T::zero() { T::lit(1e-3) } else { shift + shift };
        }
    }

    fn try_factor(a: &SparseMatrix<T>, diag_pos: &[usize], shift: T) -> Option<Vec<T>> {
        let pat = &a.pattern;
        let mut l = a.values.clone();
        for &d in diag_pos {
            l[d] *= T::one() + shift;
        }
        for i in 0..a.n() {
            let ri = pat.row_range(i);
            let lo = ri.start;
            let di = diag_pos[i];
            for kpos in lo..di {
                let k = pat.col_indices[kpos];
                // sum_{j<k} L_ij L_kj over the shared pattern
                let rk = pat.row_range(k).start..diag_pos[k];
                let (mut p, mut q) = (lo, rk.start);
                let mut acc = T::zero();
                while p < kpos && q < rk.end {
                    let (cp, cq) = (pat.col_indices[p], pat.col_indices[q]);
                    if cp == cq {
                        acc += l[p] * l[q];
                        p += 1;
                        q += 1;
                    } else if cp < cq {
                        p += 1;
                    } else {
                        q += 1;
                    }
                }
                l[kpos] = (l[kpos] - acc) / l[diag_pos[k]];
            }
            let pivot = l[di] - (lo..di).map(|p| l[p] * l[p]).sum::<T>();
            if !(pivot > T::zero()) {
                return None;
            }
            l[di] = pivot.sqrt();
        }
        Some(l)
    }

    /// `z = (L L^T)^{-1} r`
    fn solve_into(&self, r: &[T], z: &mut [T]) {
        let pat = &*self.pattern;
        let n = r.len();
        for i in 0..n {
            let lo = pat.row_range(i).start;
            let di = self.diag_pos[i];
            let mut s = r[i];
            for p in lo..di {
                s -= self.factor[p] * z[pat.col_indices[p]];
            }
            z[i] = s / self.factor[di];
        }
        for i in (0..n).rev() {
            let lo = pat.row_range(i).start;
            let di = self.diag_pos[i];
            let xi = z[i] / self.factor[di];
            z[i] = xi;
            for p in lo..di {
                z[pat.col_indices[p]] -= self.factor[p] * xi;
            }
        }
    }
}

/// Symbolic part of the envelope factorisation: reverse Cuthill-McKee
/// permutation and the first column of every permuted row.
#[derive(Debug)]
struct Envelope {
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv[old] = new`
    inv: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
}

impl Envelope {
    fn new(p: &SparsityPattern) -> Self {
        let perm = reverse_cuthill_mckee(p);
        let n = p.n;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0; n];
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            let f = p.row(perm[i]).iter().map(|&j| inv[j]).filter(|&j| j <= i).min().unwrap_or(i);
            first[i] = f;
            offsets.push(offsets[i] + (i - f + 1));
        }
        Self { perm, inv, first, offsets }
    }
}

fn reverse_cuthill_mckee(p: &SparsityPattern) -> Vec<usize> {
    let n = p.n;
    let degree: Vec<usize> = (0..n).map(|i| p.row(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize| -> (usize, usize) {
        // returns (farthest node of minimal degree, eccentricity)
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::from([start]);
        dist[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in p.row(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let ecc = dist[last];
        let far = (0..n).filter(|&v| dist[v] == ecc).min_by_key(|&v| degree[v]).unwrap_or(last);
        (far, ecc)
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node within the component
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..4 {
            let (far, e) = bfs_levels(start);
            if e <= ecc {
                break;
            }
            start = far;
            ecc = e;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = p.row(v).iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor stored row-wise inside the envelope of the permuted matrix.
pub struct EnvelopeCholesky<T> {
    env: Arc<Envelope>,
    l: Vec<T>,
}

impl<T: Real> EnvelopeCholesky<T> {
    pub fn factor(a: &SparseMatrix<T>) -> Result<Self> {
        let env = Arc::clone(a.pattern.envelope());
        let n = a.n();
        let mut l = vec![T::zero(); env.offsets[n]];
        for i in 0..n {
            let old = env.perm[i];
            for k in a.pattern.row_range(old) {
                let j = env.inv[a.pattern.col_indices[k]];
                if j <= i {
                    l[env.offsets[i] + j - env.first[i]] += a.values[k];
                }
            }
        }
        for i in 0..n {
            let fi = env.first[i];
            let oi = env.offsets[i];
            for j in fi..i {
                let fj = env.first[j];
                let oj = env.offsets[j];
                let k0 = fi.max(fj);
                let mut s = l[oi + j - fi];
                let ri = &l[oi + k0 - fi..oi + j - fi];
                let rj = &l[oj + k0 - fj..oj + j - fj];
                for (&x, &y) in ri.iter().zip(rj) {
                    s -= x * y;
                }
                l[oi + j - fi] = s / l[oj + j - fj];
            }
            let row = &l[oi..oi + i - fi];
            let d = l[oi + i - fi] - row.iter().map(|&x| x * x).sum::<T>();
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite(env.perm[i]));
            }
            l[oi + i - fi] = d.sqrt();
        }
        Ok(Self { env, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let env = &self.env;
        let n = b.len();
        let mut y: Vec<T> = (0..n).map(|i| b[env.perm[i]]).collect();
        for i in 0..n {
            let fi = env.first[i];
            let oi = env.offsets[i];
            let mut s = y[i];
            for j in fi..i {
                s -= self.l[oi + j - fi] * y[j];
            }
            y[i] = s / self.l[oi + i - fi];
        }
        for i in (0..n).rev() {
            let fi = env.first[i];
            let oi = env.offsets[i];
            y[i] /= self.l[oi + i - fi];
            let yi = y[i];
            for j in fi..i {
                y[j] -= self.l[oi + j - fi] * yi;
            }
        }
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            x[env.perm[i]] = y[i];
        }
        x
    }

    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>();
            }
            a[i][i] += n as f64 * 0.1;
        }
        a
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let n = 7;
        let id: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let a = SparseMatrix::from_dense(&id, true);
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let (x, rep) = conjugate_gradient(&a, &b, None, 1e-12, 100).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn cg_and_cholesky_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dense = random_spd(50, &mut rng);
        let a = SparseMatrix::from_dense(&dense, true);
        let xe: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.apply(&xe);
        let oracle =
            nalgebra::DMatrix::from_fn(50, 50, |i, j| dense[i][j]).cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
        let (xc, rep) = conjugate_gradient(&a, &b, None, 1e-13, 500).unwrap();
        assert!(rep.relative_residual <= 1e-13);
        let (xd, _) = solve_direct(&a, &b).unwrap();
        let (xi, rep) = ic_conjugate_gradient(&a, &b, None, 1e-13, 500).unwrap();
        assert!(rep.relative_residual <= 1e-13);
        for i in 0..50 {
            assert!((xc[i] - oracle[i]).abs() < 1e-10);
            assert!((xi[i] - oracle[i]).abs() < 1e-10);
            assert!((xd[i] - oracle[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]], true);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn cg_reports_iteration_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = SparseMatrix::from_dense(&random_spd(30, &mut rng), true);
        let b = vec![1.0; 30];
        assert!(matches!(conjugate_gradient(&a, &b, None, 1e-14, 2), Err(Error::MaxIterations(r)) if r.iterations == 2));
    }

    #[test]
    fn incomplete_cholesky_is_exact_on_tridiagonal() {
        // no fill-in, so IC(0) is the full factor and CG converges at once
        let n: usize = 40;
        let a = SparseMatrix::from_dense(
            &(0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                2.5
                            } else if i.abs_diff(j) == 1 {
                                -1.0
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect::<Vec<_>>(),
            true,
        );
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (_, rep) = ic_conjugate_gradient(&a, &b, None, 1e-12, 5).unwrap();
        assert!(rep.iterations <= 1);
    }
}
