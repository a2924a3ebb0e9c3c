//! Sparse symmetric storage, a deflated Jacobi-PCG solver, Lanczos extreme
//! eigenvalues and a profile Cholesky factorization.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed sparse row form, storing both
/// triangles. Column indices within a row are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Matrix with the given pattern and zero values. Rows must be sorted and unique.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in rows {
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { dim, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::from_pattern((0..dim).map(|i| vec![i]).collect());
        m.values.fill(1.0);
        m
    }

    /// Sparse copy of a dense matrix, keeping exact nonzeros.
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let rows = (0..a.nrows()).map(|i| (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).collect()).collect();
        let mut m = Self::from_pattern(rows);
        for i in 0..m.dim {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[k] = a[(i, m.col_idx[k])];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim, (0..self.dim).map(|i| self.get(i, i)))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let body = |(i, yi): (usize, &mut f64)| {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        };
        if self.values.len() > 200_000 {
            y.par_iter_mut().enumerate().for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        self.mul_vec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    /// `D A D` for the diagonal `d`.
    pub fn scaled(&self, d: &DVector<f64>) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m.values[k] *= d[i] * d[self.col_idx[k]];
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[(i, self.col_idx[k])] = self.values[k];
            }
        }
        a
    }

    /// True when every stored `(i, j)` has a bit-identical `(j, i)`.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.position(j, i).is_some_and(|k| self.values[k].to_bits() == v.to_bits()))
        })
    }

    /// Coordinate text: a `dim nnz` header, then one `row col value` line per entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.dim, self.nnz())?;
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                writeln!(w, "{i} {j} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Removes the component along `c` (any nonzero vector).
pub fn project_out(v: &mut [f64], c: &[f64]) {
    let cc = dot(c, c);
    if cc > 0.0 {
        let t = dot(v, c) / cc;
        axpy(-t, c, v);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned CG for `A x = b` with `A` positive semidefinite
/// and `null` spanning its kernel. The right-hand side, the residuals, the
/// preconditioned residuals and the result are kept orthogonal to `null`.
pub fn solve_neumann(a: &CsrMatrix, b: &DVector<f64>, null: &DVector<f64>, tol: f64) -> Result<(DVector<f64>, CgReport)> {
    let n = a.dim();
    let c = null.as_slice();
    let mut r: Vec<f64> = b.as_slice().to_vec();
    project_out(&mut r, c);
    let bnorm = dot(&r, &r).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((DVector::from_vec(x), CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        z.clear();
        z.extend(r.iter().zip(&inv_diag).map(|(a, b)| a * b));
        project_out(z, c);
    };
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 20 * n.max(1);
    let mut res = 1.0;
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        project_out(&mut r, c);
        res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            project_out(&mut x, c);
            return Ok((DVector::from_vec(x), CgReport { iterations: it, relative_residual: res }));
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::SolverFailure { iterations: max_iter, residual: res })
}

/// Largest eigenvalue of a symmetric operator restricted to the orthogonal
/// complement of `deflate`, by Lanczos with full reorthogonalization. Stops
/// once the residual bound of the top Ritz value is below `tol * |theta|`;
/// on failure the error carries the last bracket.
pub fn lanczos_max<F>(dim: usize, apply: F, deflate: Option<&[f64]>, tol: f64, max_steps: usize) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let steps = max_steps.min(dim);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    // seeded so results are reproducible
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c ^ dim as u64);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    if let Some(c) = deflate {
        project_out(&mut v, c);
    }
    let norm = dot(&v, &v).sqrt();
    if norm == 0.0 {
        return Err(Error::EigenFailure { lower: 0.0, upper: 0.0 });
    }
    v.iter_mut().for_each(|x| *x /= norm);
    let mut w = vec![0.0; dim];
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..steps {
        apply(&v, &mut w);
        if let Some(c) = deflate {
            project_out(&mut w, c);
        }
        let alpha = dot(&w, &v);
        axpy(-alpha, &v, &mut w);
        if let Some(prev) = basis.last() {
            axpy(-betas[j - 1], prev, &mut w);
        }
        basis.push(v.clone());
        for _ in 0..2 {
            for q in &basis {
                let t = dot(&w, q);
                axpy(-t, q, &mut w);
            }
            if let Some(c) = deflate {
                project_out(&mut w, c);
            }
        }
        alphas.push(alpha);
        let beta = dot(&w, &w).sqrt();
        let m = alphas.len();
        let check = m <= 40 || m % 8 == 0 || j + 1 == steps || beta <= 1e-14 * alphas.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if !check {
            betas.push(beta);
            v = w.iter().map(|x| x / beta).collect();
            continue;
        }
        let t = DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                alphas[a]
            } else if a + 1 == b {
                betas[a]
            } else if b + 1 == a {
                betas[b]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (k, theta) = eig.eigenvalues.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (k, &l)| if l > acc.1 { (k, l) } else { acc });
        let bound = (beta * eig.eigenvectors[(m - 1, k)]).abs();
        best = (theta - bound, theta);
        if bound <= tol * theta.abs() || beta <= 1e-14 * theta.abs() {
            return Ok(theta);
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
    Err(Error::EigenFailure { lower: best.0, upper: best.1 })
}

/// Cholesky factor of a symmetric positive definite matrix in skyline
/// (variable band) storage: row `i` keeps columns `first[i]..=i`.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors the leading `dim x dim` block of `a` (the rows and columns
    /// with index `< dim`).
    pub fn factor_leading(a: &CsrMatrix, dim: usize) -> Result<Self> {
        let mut first = vec![0usize; dim];
        for (i, f) in first.iter_mut().enumerate() {
            let (cols, _) = a.row(i);
            *f = cols.iter().copied().find(|&j| j <= i).unwrap_or(i).min(i);
        }
        let mut start = Vec::with_capacity(dim + 1);
        start.push(0);
        for i in 0..dim {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[dim]];
        for i in 0..dim {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        // row-oriented LL^T on the profile
        for i in 0..dim {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                let ri = start[i] + lo - fi;
                let rj = start[j] + lo - fj;
                let len = j - lo;
                s -= dot(&data[ri..ri + len], &data[rj..rj + len]);
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Factorization { pivot: i });
                    }
                    data[start[i] + i - fi] = s.sqrt();
                } else {
                    data[start[i] + j - fi] = s / data[start[j] + j - fj];
                }
            }
        }
        Ok(Self { first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[self.start[i] + j - self.first[i]]
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + (i - fi)];
            let s = b[i] - dot(row, &b[fi..i]);
            b[i] = s / self.entry(i, i);
        }
        for i in (0..n).rev() {
            b[i] /= self.entry(i, i);
            let bi = b[i];
            let fi = self.first[i];
            for j in fi..i {
                b[j] -= self.entry(i, j) * bi;
            }
        }
    }
}

/// Eigenvalues of a dense symmetric matrix, ascending.
pub fn dense_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_1d_neumann(n: usize) -> CsrMatrix {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i)] += 1.0;
            a[(i + 1, i + 1)] += 1.0;
            a[(i, i + 1)] -= 1.0;
            a[(i + 1, i)] -= 1.0;
        }
        CsrMatrix::from_dense(&a)
    }

    #[test]
    fn csr_roundtrip_and_export() {
        let a = laplacian_1d_neumann(5);
        assert!(a.is_symmetric());
        assert_eq!(CsrMatrix::from_dense(&a.to_dense()), a);
        let mut buf = Vec::new();
        a.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "5 13");
        assert_eq!(text.lines().count(), 14);
    }

    #[test]
    fn neumann_cg_matches_pinned_dense_solve() {
        let n = 30;
        let a = laplacian_1d_neumann(n);
        let ones = DVector::from_element(n, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        b.add_scalar_mut(-b.mean());
        let (x, rep) = solve_neumann(&a, &b, &ones, 1e-13).unwrap();
        assert!(rep.relative_residual <= 1e-13);
        assert!(x.sum().abs() <= 1e-10);
        let dense = a.to_dense();
        let reduced = dense.view((1, 1), (n - 1, n - 1)).into_owned();
        let y = reduced.cholesky().unwrap().solve(&b.rows(1, n - 1).into_owned());
        let mut z = DVector::zeros(n);
        z.rows_mut(1, n - 1).copy_from(&y);
        z.add_scalar_mut(-z.mean());
        assert!((x - z).amax() <= 1e-9);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplacian_1d_neumann(6);
        let (x, rep) = solve_neumann(&a, &DVector::zeros(6), &DVector::from_element(6, 1.0), 1e-12).unwrap();
        assert_eq!(x, DVector::zeros(6));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn lanczos_finds_largest_eigenvalue() {
        let n = 60;
        let a = laplacian_1d_neumann(n);
        let ones = vec![1.0; n];
        let lmax = lanczos_max(n, |x, y| a.mul_vec_into(x, y), Some(&ones), 1e-10, n).unwrap();
        let eig = dense_eigenvalues(&a.to_dense());
        assert_relative_eq!(lmax, eig[n - 1], max_relative = 1e-9);
    }

    #[test]
    fn skyline_cholesky_solves() {
        let n = 25;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = 4.0;
            for j in i + 1..(i + 4).min(n) {
                let v = rng.random_range(-1.0..1.0);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        let a = CsrMatrix::from_dense(&d);
        let f = SkylineCholesky::factor_leading(&a, n).unwrap();
        let b = DVector::from_fn(n, |i, _| i as f64);
        let mut x = b.as_slice().to_vec();
        f.solve_in_place(&mut x);
        let r = &d * DVector::from_vec(x) - b;
        assert!(r.amax() <= 1e-12);
        let lead = SkylineCholesky::factor_leading(&laplacian_1d_neumann(5), 4).unwrap();
        assert_eq!(lead.dim(), 4);
        assert!(matches!(SkylineCholesky::factor_leading(&laplacian_1d_neumann(5), 5), Err(Error::Factorization { .. })));
    }
}
