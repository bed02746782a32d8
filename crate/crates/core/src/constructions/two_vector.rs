use super::pair_index;
use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// A 2-vector `Σ_{i<j} c_ij eᵢ∧eⱼ`, stored as the skew matrix `(c_ij)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoVector<T> {
    matrix: Matrix<T>,
}

impl<T: Scalar> TwoVector<T> {
    pub fn zero(r: usize) -> Self {
        TwoVector { matrix: Matrix::zeros(r, r) }
    }

    /// Builds from `(i, j, c)` with `i < j`; repeated pairs accumulate.
    pub fn from_pairs(r: usize, pairs: &[(usize, usize, T)]) -> Self {
        let mut matrix = Matrix::<T>::zeros(r, r);
        for (i, j, c) in pairs {
            assert!(i < j && *j < r, "pair ({i}, {j}) out of range");
            matrix[(*i, *j)] = matrix[(*i, *j)].clone() + c.clone();
            matrix[(*j, *i)] = matrix[(*j, *i)].clone() - c.clone();
        }
        TwoVector { matrix }
    }

    /// Reads a vector of `Λ²V₁` in the lexicographic pair basis.
    pub fn from_wedge_coords(r: usize, coords: &[T]) -> Result<Self> {
        check_len("2-vector coordinates", r * (r - 1) / 2, coords.len())?;
        let mut pairs = Vec::new();
        for i in 0..r {
            for j in i + 1..r {
                pairs.push((i, j, coords[pair_index(r, i, j)].clone()));
            }
        }
        Ok(Self::from_pairs(r, &pairs))
    }

    pub fn from_skew_matrix(matrix: Matrix<T>) -> Result<Self> {
        let r = matrix.rows();
        check_len("skew matrix columns", r, matrix.cols())?;
        let scale = matrix.max_abs();
        for i in 0..r {
            for j in 0..r {
                if !(matrix[(i, j)].clone() + matrix[(j, i)].clone()).is_negligible(scale) {
                    return Err(Error::InvalidAlgebra(format!("2-vector matrix not skew at ({i}, {j})")));
                }
            }
        }
        Ok(TwoVector { matrix })
    }

    pub fn rank(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn coeff(&self, i: usize, j: usize) -> &T {
        &self.matrix[(i, j)]
    }

    pub fn wedge_coords(&self) -> Vec<T> {
        let r = self.rank();
        let mut out = Vec::with_capacity(r * (r - 1) / 2);
        for i in 0..r {
            for j in i + 1..r {
                out.push(self.matrix[(i, j)].clone());
            }
        }
        out
    }

    /// `(x∧y)·a = xᵀ A y`.
    pub fn pair(&self, x: &[T], y: &[T]) -> T {
        bilinear(&self.matrix, x, y)
    }

    pub fn sub_scaled(&self, s: &T, other: &TwoVector<T>) -> TwoVector<T> {
        let r = self.rank();
        let mut matrix = self.matrix.clone();
        for i in 0..r {
            for j in 0..r {
                matrix[(i, j)] = matrix[(i, j)].clone() - s.clone() * other.matrix[(i, j)].clone();
            }
        }
        TwoVector { matrix }
    }
}

fn bilinear<T: Scalar>(a: &Matrix<T>, x: &[T], y: &[T]) -> T {
    let ay = a.mul_vec(y);
    x.iter().zip(&ay).fold(T::zero(), |acc, (p, q)| acc + p.clone() * q.clone())
}

/// Canonical skew matrix with `k` blocks `(0 1; −1 0)` followed by zeros.
pub fn canonical_block_matrix<T: Scalar>(r: usize, k: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(r, r);
    for s in 0..k {
        m[(2 * s, 2 * s + 1)] = T::one();
        m[(2 * s + 1, 2 * s)] = -T::one();
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct DarbouxForm<T> {
    pub k: usize,
    /// Columns are the new basis `e₁, f₁, …, e_k, f_k, n₁, …` in old coordinates.
    pub basis: Matrix<T>,
}

impl<T: Scalar> DarbouxForm<T> {
    /// `Bᵀ A B`.
    pub fn transformed(&self, a: &TwoVector<T>) -> Matrix<T> {
        self.basis.transpose().mul(a.matrix()).mul(&self.basis)
    }
}

/// Symplectic Gram-Schmidt: splits off hyperbolic pairs `(e, f)` with
/// `ω(e, f) = 1` and makes the remaining vectors `ω`-orthogonal to them.
pub fn darboux_normal_form<T: Scalar>(a: &TwoVector<T>) -> DarbouxForm<T> {
    let r = a.rank();
    let form = a.matrix();
    let scale = form.max_abs();
    let mut rest: Vec<Vec<T>> = (0..r).map(|i| crate::algebra::unit(r, i)).collect();
    let mut pairs: Vec<Vec<T>> = Vec::new();
    loop {
        let mut pivot: Option<(usize, usize, T)> = None;
        'search: for i in 0..rest.len() {
            for j in i + 1..rest.len() {
                let w = bilinear(form, &rest[i], &rest[j]);
                if w.is_negligible(scale) {
                    continue;
                }
                let better = match &pivot {
                    None => true,
                    Some((_, _, best)) => !T::EXACT && w.to_f64().abs() > best.to_f64().abs(),
                };
                if better {
                    pivot = Some((i, j, w));
                    if T::EXACT {
                        break 'search;
                    }
                }
            }
        }
        let Some((i, j, w)) = pivot else { break };
        let e = rest[i].clone();
        let f: Vec<T> = rest[j].iter().map(|c| c.clone() / w.clone()).collect();
        rest = rest
            .into_iter()
            .enumerate()
            .filter(|(l, _)| *l != i && *l != j)
            .map(|(_, v)| {
                let vf = bilinear(form, &v, &f);
                let ve = bilinear(form, &v, &e);
                v.iter()
                    .zip(e.iter().zip(&f))
                    .map(|(vi, (ei, fi))| vi.clone() - vf.clone() * ei.clone() + ve.clone() * fi.clone())
                    .collect()
            })
            .collect();
        pairs.push(e);
        pairs.push(f);
    }
    let k = pairs.len() / 2;
    pairs.extend(rest);
    DarbouxForm { k, basis: Matrix::from_columns(r, &pairs) }
}

/// `Ω` and `C` for a pair of 2-vectors, in a basis where `a` is in Darboux form.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaC<T> {
    pub k: usize,
    pub omega: Matrix<T>,
    pub c: Matrix<T>,
    /// `b` after `b ← b − c₁₂ a`, in the original coordinates.
    pub b_normalized: TwoVector<T>,
}

/// Expresses `a, b` in `basis`; requires `a` canonical there and normalizes
/// `c₁₂ = 0`.
pub fn omega_c_matrices<T: Scalar>(a: &TwoVector<T>, b: &TwoVector<T>, basis: &Matrix<T>) -> Result<OmegaC<T>> {
    let r = a.rank();
    check_len("2-vector rank", r, b.rank())?;
    check_len("basis size", r, basis.rows())?;
    check_len("basis size", r, basis.cols())?;
    let bt = basis.transpose();
    let omega = bt.mul(a.matrix()).mul(basis);
    let k = (0..r / 2).take_while(|s| !omega[(2 * s, 2 * s + 1)].is_negligible(1.0)).count();
    let canonical = canonical_block_matrix::<T>(r, k);
    let scale = omega.max_abs().max(1.0);
    for i in 0..r {
        for j in 0..r {
            if !(omega[(i, j)].clone() - canonical[(i, j)].clone()).is_negligible(scale) {
                return Err(Error::Hypothesis("a is not in Darboux form in the given basis".into()));
            }
        }
    }
    if k == 0 {
        return Err(Error::Hypothesis("a must be nonzero".into()));
    }
    let raw = bt.mul(b.matrix()).mul(basis);
    let c12 = raw[(0, 1)].clone();
    let b_normalized = b.sub_scaled(&c12, a);
    let c = bt.mul(b_normalized.matrix()).mul(basis);
    if c.is_zero_matrix() || (!T::EXACT && c.max_abs() <= 1e-12 * b.matrix().max_abs().max(1.0)) {
        return Err(Error::DependentTwoVectors);
    }
    Ok(OmegaC { k, omega, c, b_normalized })
}
