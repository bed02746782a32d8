//! Dense row-major matrices over any [`Scalar`], plus the floating-point
//! helpers (SVD rank, null spaces, principal angles) built on nalgebra.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Matrix { rows, cols, data: data.to_vec() }
    }

    /// Builds a `rows × columns.len()` matrix from column vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "column length");
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = v.clone();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = &self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = a.clone() * other[(l, j)].clone();
                    out[(i, j)] = out[(i, j)].clone() + v;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape");
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)].clone() * v[j].clone())
            })
            .collect()
    }

    pub fn map<S: Scalar>(&self, f: impl Fn(&T) -> S) -> Matrix<S> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn hstack(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.rows, other.rows, "hstack rows");
        let mut cols = self.columns();
        cols.extend(other.columns());
        Matrix::from_columns(self.rows, &cols)
    }

    pub fn is_zero_matrix(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].to_f64())
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Matrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows())
                .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| T::from_f64(m[(i, j)]))
                .collect(),
        }
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    ///
    /// Exact mode takes the first nonzero entry of each column as pivot,
    /// floating mode the largest magnitude.
    pub fn rref_in_place(&mut self) -> Vec<usize> {
        let scale = self.max_abs();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let mut best: Option<usize> = None;
            for i in row..self.rows {
                if self[(i, col)].is_negligible(scale) {
                    continue;
                }
                match best {
                    None => {
                        best = Some(i);
                        if T::EXACT {
                            break;
                        }
                    }
                    Some(b) if self[(i, col)].abs() > self[(b, col)].abs() => best = Some(i),
                    _ => {}
                }
            }
            let Some(p) = best else { continue };
            self.swap_rows(row, p);
            let inv = T::one() / self[(row, col)].clone();
            for j in 0..self.cols {
                self[(row, j)] = self[(row, j)].clone() * inv.clone();
            }
            for i in 0..self.rows {
                if i == row || self[(i, col)].is_zero() {
                    continue;
                }
                let f = self[(i, col)].clone();
                for j in 0..self.cols {
                    let v = f.clone() * self[(row, j)].clone();
                    self[(i, j)] = self[(i, j)].clone() - v;
                }
                self[(i, col)] = T::zero();
            }
            pivots.push(col);
            row += 1;
        }
        if !T::EXACT {
            // clear residue below the tolerance in non-pivot rows
            for i in row..self.rows {
                for j in 0..self.cols {
                    self[(i, j)] = T::zero();
                }
            }
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn echelon_rank(&self) -> usize {
        self.clone().rref_in_place().len()
    }

    pub fn rank(&self) -> usize {
        T::matrix_rank(self)
    }

    /// Basis of the null space `{v : A v = 0}` as columns.
    pub fn null_space(&self) -> Matrix<T> {
        let mut r = self.clone();
        let pivots = r.rref_in_place();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = Vec::with_capacity(free.len());
        for &f in &free {
            let mut v = vec![T::zero(); self.cols];
            v[f] = T::one();
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -r[(row, f)].clone();
            }
            basis.push(v);
        }
        Matrix::from_columns(self.cols, &basis)
    }

    /// Canonical basis of the column space: reduced column echelon form with
    /// unit leading entries and zero columns dropped.
    pub fn column_echelon_basis(&self) -> Matrix<T> {
        let mut t = self.transpose();
        let pivots = t.rref_in_place();
        let cols: Vec<Vec<T>> = (0..pivots.len()).map(|i| t.row(i)).collect();
        Matrix::from_columns(self.rows, &cols)
    }

    /// Determinant by elimination (square matrices only).
    pub fn determinant(&self) -> T {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let scale = a.max_abs();
        let mut det = T::one();
        for col in 0..n {
            let mut best: Option<usize> = None;
            for i in col..n {
                if a[(i, col)].is_negligible(scale) {
                    continue;
                }
                match best {
                    None => {
                        best = Some(i);
                        if T::EXACT {
                            break;
                        }
                    }
                    Some(b) if a[(i, col)].abs() > a[(b, col)].abs() => best = Some(i),
                    _ => {}
                }
            }
            let Some(p) = best else { return T::zero() };
            if p != col {
                a.swap_rows(p, col);
                det = -det;
            }
            let piv = a[(col, col)].clone();
            det = det * piv.clone();
            for i in col + 1..n {
                if a[(i, col)].is_zero() {
                    continue;
                }
                let f = a[(i, col)].clone() / piv.clone();
                for j in col..n {
                    let v = f.clone() * a[(col, j)].clone();
                    a[(i, j)] = a[(i, j)].clone() - v;
                }
            }
        }
        det
    }

    /// Solves `A x = b` for square invertible `A`.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Matrix::zeros(n, n + 1);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n)] = b[i].clone();
        }
        let pivots = aug.rref_in_place();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some((0..n).map(|i| aug[(i, n)].clone()).collect())
    }

    pub fn inverse(&self) -> Option<Matrix<T>> {
        let n = self.rows;
        let cols: Option<Vec<Vec<T>>> = (0..n)
            .map(|j| {
                let mut e = vec![T::zero(); n];
                e[j] = T::one();
                self.solve(&e)
            })
            .collect();
        cols.map(|c| Matrix::from_columns(n, &c))
    }
}

/// Number of singular values above `tol · σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Orthonormal basis of the numeric column space.
pub fn orthonormal_column_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > tol * smax)
        .collect();
    DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])])
}

/// Orthonormal basis of the numeric null space `{v : M v = 0}`.
pub fn null_space_f64(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let p = m.ncols();
    if p == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(p, p);
    }
    // pad to at least p rows so that V^T is complete
    let rows = m.nrows().max(p);
    let mut padded = DMatrix::zeros(rows, p);
    padded.view_mut((0, 0), (m.nrows(), p)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let null: Vec<usize> = (0..sv.len()).filter(|&i| smax == 0.0 || sv[i] <= tol * smax).collect();
    DMatrix::from_fn(p, null.len(), |i, j| vt[(null[j], i)])
}

/// Orthonormal complement of the column space of an orthonormal `q`.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    null_space_f64(&q.transpose(), 1e-10)
}

/// Largest principal angle (radians) between two column spaces; `π/2` when
/// the numeric dimensions differ.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> f64 {
    let qa = orthonormal_column_basis(a, tol);
    let qb = orthonormal_column_basis(b, tol);
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = singular_values(&resid).first().cloned().unwrap_or(0.0);
    s.min(1.0).asin()
}

/// Distance from `v` to the column span of `basis` (least squares residual).
pub fn distance_to_span(basis: &DMatrix<f64>, v: &nalgebra::DVector<f64>, tol: f64) -> f64 {
    let q = orthonormal_column_basis(basis, tol);
    if q.ncols() == 0 {
        return v.norm();
    }
    (v - &q * (q.transpose() * v)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;
    use num_rational::BigRational;

    #[test]
    fn exact_rank_and_null_space() {
        let m = Matrix::from_row_slice(2, 3, &[q(1, 1), q(2, 1), q(3, 1), q(2, 1), q(4, 1), q(6, 1)]);
        assert_eq!(m.rank(), 1);
        let ns = m.null_space();
        assert_eq!(ns.cols(), 2);
        assert!(m.mul(&ns).is_zero_matrix());
    }

    #[test]
    fn column_echelon_is_basis_independent() {
        let a = Matrix::from_columns(3, &[vec![q(1, 1), q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1), q(1, 1)]]);
        let b = Matrix::from_columns(
            3,
            &[vec![q(1, 1), q(2, 1), q(1, 1)], vec![q(2, 1), q(1, 1), q(-1, 1)]],
        );
        assert_eq!(a.column_echelon_basis(), b.column_echelon_basis());
    }

    #[test]
    fn determinant_and_inverse() {
        let m: Matrix<BigRational> = Matrix::from_row_slice(2, 2, &[q(2, 1), q(1, 1), q(1, 1), q(1, 1)]);
        assert_eq!(m.determinant(), q(1, 1));
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), Matrix::identity(2));
    }

    #[test]
    fn float_rank_uses_relative_tolerance() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-13]);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn principal_angle_of_equal_spaces_is_zero() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 0.0]);
        assert!(max_principal_angle(&a, &b, 1e-10) < 1e-12);
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((max_principal_angle(&a, &c, 1e-10) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix_is_complete() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let ns = null_space_f64(&m, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-14);
    }
}
