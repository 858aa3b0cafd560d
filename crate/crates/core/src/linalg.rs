//! Dense column-major matrices and the few decompositions the aggregators need.
//!
//! Everything here is sized for tall-skinny problems: `n` (parameter count) can
//! be large, but the number of columns stays small, so eigenproblems are only
//! ever solved on the small Gram matrix.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Largest matrix handed to the Jacobi eigensolver.
pub const MAX_EIG_DIM: usize = 512;

/// Seed for the deterministic orthonormal completion of rank-deficient bases.
const COMPLEMENT_SEED: u64 = 0x5eed_c0de_f1a6_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from column-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: k % rows.max(1), col: k / rows.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Stacks equally sized vectors as columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Self::new(rows, columns.len(), columns.concat())
    }

    /// Builds from row-major data (the natural layout of literals and CSV).
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::new(rows, cols, Self::from_fn(rows, cols, |i, j| data[i * cols + j]).data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(move |j| self.col(j))
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Matrix { rows: self.rows, cols: idx.len(), data }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other`.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in oc.iter().enumerate() {
                if b != 0.0 {
                    axpy(b, self.col(k), dst);
                }
            }
        }
        out
    }

    /// `self^T * other` without materializing the transpose.
    pub fn tr_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "row counts differ");
        Matrix::from_fn(self.cols, other.cols, |i, j| dot(self.col(i), other.col(j)))
    }

    /// Exactly symmetric `self^T * self`.
    pub fn gram(&self) -> Matrix {
        let q = self.cols;
        let mut g = Matrix::zeros(q, q);
        for i in 0..q {
            for j in i..q {
                let v = dot(self.col(i), self.col(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), &mut out);
            }
        }
        out
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        self.columns().map(|c| dot(c, x)).collect()
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Parses the plain CSV layout: one row per line, comma separated, no header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    tok.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {}: cannot parse {tok:?} as a number", lineno + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse(format!(
                        "line {}: expected {} fields, found {}",
                        lineno + 1,
                        first.len(),
                        row.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty matrix".into()));
        }
        let (r, c) = (rows.len(), rows[0].len());
        Self::from_row_major(r, c, &rows.concat())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{}", self[(i, j)]);
            }
            s.push('\n');
        }
        s
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Full symmetric eigendecomposition, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps visit `(p, q)` pairs in row order, so the output is bit-stable for a
/// given input. Ties in the sorted spectrum keep the order Jacobi left them in.
pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", a.rows, a.cols)));
    }
    let n = a.rows;
    if n > MAX_EIG_DIM {
        return Err(Error::InvalidInput(format!("eigenproblem of size {n} exceeds {MAX_EIG_DIM}")));
    }
    let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let asym = a.max_abs_asymmetry();
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::NonSymmetric(asym));
    }

    // symmetrize so that roundoff-level asymmetry cannot leak into the result
    let mut w = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = Matrix::identity(n);
    let fro = w.frobenius_norm();
    let target = 1e-14 * fro;

    let off_norm = |w: &Matrix| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    s += w[(i, j)] * w[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&w);
        if off <= target || off == 0.0 {
            break;
        }
        if sweeps == 100 {
            return Err(Error::NoConvergence { sweeps, off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (wkp, wkq) = (w[(k, p)], w[(k, q)]);
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let (wpk, wqk) = (w[(p, k)], w[(q, k)]);
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].total_cmp(&w[(i, i)]));
    let values = order.iter().map(|&i| w[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    Ok(SymEig { values, vectors })
}

/// An orthonormal frame `Y` (n x m, `Y^T Y = I`) representing an m-dimensional subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    /// Wraps `basis` after checking orthonormality to 1e-10 (Frobenius).
    pub fn new(basis: Matrix) -> Result<Self> {
        let m = basis.cols;
        if m == 0 || m > basis.rows {
            return Err(Error::InvalidInput(format!(
                "subspace of dimension {m} in R^{}",
                basis.rows
            )));
        }
        let err = basis.gram().sub(&Matrix::identity(m)).frobenius_norm();
        if err > 1e-10 {
            return Err(Error::InvalidInput(format!("basis is not orthonormal (error {err:e})")));
        }
        Ok(Self { basis })
    }

    pub(crate) fn from_orthonormal(basis: Matrix) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn into_basis(self) -> Matrix {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.cols
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows
    }

    /// Orthogonal projection `Y Y^T x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis.mul_vec(&self.basis.tr_mul_vec(x))
    }

    /// Dense `Y Y^T`; only meant for small ambient dimensions.
    pub fn projector(&self) -> Matrix {
        self.basis.mul(&self.basis.transpose())
    }
}

/// Result of [`thin_svd_left`].
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub subspace: Subspace,
    /// All singular values of the input, descending.
    pub singular_values: Vec<f64>,
    /// Set when fewer than `m` singular values cleared the 1e-12 relative threshold;
    /// the missing directions were filled from a seeded orthonormal complement.
    pub rank_deficient: bool,
}

/// Top-`m` left singular subspace of `b`, solved through the smaller Gram matrix.
pub fn thin_svd_left(b: &Matrix, m: usize) -> Result<ThinSvd> {
    let (n, q) = (b.rows, b.cols);
    if m == 0 || m > n.min(q) {
        return Err(Error::InvalidInput(format!("m = {m} outside 1..={}", n.min(q))));
    }

    let (singular_values, mut candidates) = if q <= n {
        let eig = sym_eig(&b.gram())?;
        let sv: Vec<f64> = eig.values.iter().map(|l| l.max(0.0).sqrt()).collect();
        let smax = sv[0];
        let mut cols = Vec::new();
        for k in 0..m {
            if smax > 0.0 && sv[k] > 1e-12 * smax {
                let mut u = b.mul_vec(eig.vectors.col(k));
                u.iter_mut().for_each(|x| *x /= sv[k]);
                cols.push(u);
            }
        }
        (sv, cols)
    } else {
        let eig = sym_eig(&b.transpose().gram())?;
        let sv: Vec<f64> = eig.values.iter().take(q).map(|l| l.max(0.0).sqrt()).collect();
        let smax = sv[0];
        let cols = (0..m)
            .filter(|&k| smax > 0.0 && sv[k] > 1e-12 * smax)
            .map(|k| eig.vectors.col(k).to_vec())
            .collect();
        (sv, cols)
    };

    let found = candidates.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    for mut c in candidates.drain(..) {
        let before = norm(&c);
        if orthogonalize_against(&mut c, &basis) > 1e-8 * before {
            normalize(&mut c);
            basis.push(c);
        }
    }
    let rank_deficient = found < m || basis.len() < m;
    complete_basis(&mut basis, n, m);

    Ok(ThinSvd {
        subspace: Subspace::from_orthonormal(Matrix::from_columns(&basis)?),
        singular_values,
        rank_deficient,
    })
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
pub fn orthonormalize(y: &Matrix) -> Result<Subspace> {
    if y.cols == 0 || y.cols > y.rows {
        return Err(Error::InvalidInput(format!("cannot orthonormalize {}x{}", y.rows, y.cols)));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(y.cols);
    for (j, col) in y.columns().enumerate() {
        let mut c = col.to_vec();
        let before = norm(&c);
        let after = orthogonalize_against(&mut c, &basis);
        if before == 0.0 || after < 1e-12 * before {
            return Err(Error::DependentColumns(j));
        }
        normalize(&mut c);
        basis.push(c);
    }
    Ok(Subspace::from_orthonormal(Matrix::from_columns(&basis)?))
}

/// Two MGS passes against `basis`; returns the residual norm.
fn orthogonalize_against(c: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for u in basis {
            let r = dot(u, c);
            axpy(-r, u, c);
        }
    }
    norm(c)
}

fn normalize(c: &mut [f64]) {
    let s = norm(c);
    c.iter_mut().for_each(|x| *x /= s);
}

fn complete_basis(basis: &mut Vec<Vec<f64>>, n: usize, m: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(COMPLEMENT_SEED ^ ((n as u64) << 20) ^ m as u64);
    while basis.len() < m {
        let mut c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let before = norm(&c);
        if orthogonalize_against(&mut c, basis) > 1e-6 * before {
            normalize(&mut c);
            basis.push(c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projector_distance(a: &Subspace, b: &Subspace) -> f64 {
        a.projector().sub(&b.projector()).frobenius_norm()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let a = Matrix::identity(3);
        let res = a.mul(&e.vectors).sub(&e.vectors).frobenius_norm();
        assert!(res < 1e-14);
    }

    #[test]
    fn eig_diagonal_is_sorted() {
        let a = Matrix::from_row_major(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vectors.col(0), &[1.0, 0.0, 0.0]);
        assert_eq!(e.vectors.col(1), &[0.0, 0.0, 1.0]);
        assert_eq!(e.vectors.col(2), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn eig_two_by_two() {
        let a = Matrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vectors[(0, 0)].abs() - h).abs() < 1e-14);
        assert!((e.vectors[(0, 0)] - e.vectors[(1, 0)]).abs() < 1e-14);
        assert!((e.vectors[(0, 1)] + e.vectors[(1, 1)]).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = Matrix::from_row_major(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn eig_random_reconstruction() {
        let b = random_matrix(12, 12, 3);
        let a = b.add(&b.transpose());
        let e = sym_eig(&a).unwrap();
        let lam = Matrix::from_fn(12, 12, |i, j| if i == j { e.values[i] } else { 0.0 });
        let rec = e.vectors.mul(&lam).mul(&e.vectors.transpose());
        assert!(rec.sub(&a).frobenius_norm() <= 1e-8 * a.frobenius_norm());
        assert!(e.vectors.gram().sub(&Matrix::identity(12)).frobenius_norm() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_coordinate_plane() {
        let b = Matrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let svd = thin_svd_left(&b, 2).unwrap();
        let p = svd.subspace.projector();
        let expect = Matrix::from_fn(3, 3, |i, j| if i == j && i < 2 { 1.0 } else { 0.0 });
        assert!(p.sub(&expect).frobenius_norm() < 1e-12);
        assert!(!svd.rank_deficient);
    }

    #[test]
    fn svd_rank_one() {
        let g = [3.0, -4.0, 0.0, 12.0];
        let gn: Vec<f64> = g.iter().map(|x| x / 13.0).collect();
        let b = Matrix::from_columns(&[gn.clone(), gn.clone(), gn.clone()]).unwrap();
        let svd = thin_svd_left(&b, 1).unwrap();
        let y = svd.subspace.basis().col(0);
        assert!((dot(y, &gn).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_rank_deficient_is_completed() {
        let g = vec![1.0, 2.0, 2.0, 0.0];
        let b = Matrix::from_columns(&[g.clone(), g.clone(), g]).unwrap();
        let svd = thin_svd_left(&b, 3).unwrap();
        assert!(svd.rank_deficient);
        assert_eq!(svd.subspace.dim(), 3);
        let y = svd.subspace.basis();
        assert!(y.gram().sub(&Matrix::identity(3)).frobenius_norm() < 1e-12);
        // the real direction is still present
        let p = svd.subspace.project(&[1.0, 2.0, 2.0, 0.0]);
        assert!((norm(&p) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn svd_wide_input_uses_row_gram() {
        let b = random_matrix(3, 9, 11);
        let svd = thin_svd_left(&b, 2).unwrap();
        let svd_t = thin_svd_left(&b.select_columns(&(0..9).rev().collect::<Vec<_>>()), 2).unwrap();
        assert!(projector_distance(&svd.subspace, &svd_t.subspace) < 1e-10);
        assert_eq!(svd.singular_values.len(), 3);
    }

    #[test]
    fn svd_invariant_under_permutation_and_sign() {
        let b = random_matrix(10, 5, 21);
        let base = thin_svd_left(&b, 2).unwrap();
        let mut perm = b.select_columns(&[3, 0, 4, 1, 2]);
        perm.col_mut(1).iter_mut().for_each(|x| *x = -*x);
        let other = thin_svd_left(&perm, 2).unwrap();
        assert!(projector_distance(&base.subspace, &other.subspace) < 1e-8);
    }

    #[test]
    fn orthonormalize_examples() {
        let y = Matrix::identity(3).scaled(2.0);
        let q = orthonormalize(&y).unwrap();
        assert!(q.basis().sub(&Matrix::identity(3)).frobenius_norm() < 1e-15);

        let y = Matrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let q = orthonormalize(&y).unwrap();
        assert!(q.basis().sub(&Matrix::identity(2)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn orthonormalize_rejects_dependent() {
        let y = Matrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(orthonormalize(&y), Err(Error::DependentColumns(1)));
    }

    #[test]
    fn orthonormalize_is_idempotent() {
        let y = random_matrix(50, 5, 8);
        let once = orthonormalize(&y).unwrap();
        let twice = orthonormalize(once.basis()).unwrap();
        assert!(once.basis().sub(twice.basis()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let m = Matrix::from_row_major(2, 3, &[1.0, 3.0, 2.0, 0.0, -0.5, 1e-3]).unwrap();
        let back = Matrix::from_csv_str(&m.to_csv_string()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(Matrix::from_csv_str("1,2\n3"), Err(Error::Parse(_))));
        assert!(matches!(Matrix::from_csv_str("1,x"), Err(Error::Parse(_))));
        assert!(matches!(Matrix::from_csv_str(""), Err(Error::Parse(_))));
        assert!(matches!(Matrix::from_csv_str("1,inf"), Err(Error::NonFinite { .. })));
    }
}
