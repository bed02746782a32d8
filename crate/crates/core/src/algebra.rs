//! Step-2 stratified Lie algebras `V₁ ⊕ V₂` given by structure constants.
//!
//! The bracket is stored as a tensor `c[i][j][k]` with
//! `[Xᵢ, Xⱼ] = Σₖ c[i][j][k] Zₖ`. Brackets involving `V₂` vanish by
//! construction, so only the horizontal parts of elements ever enter a bracket.

use std::fmt;

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct StratifiedAlgebra<T> {
    rank: usize,
    dim_v2: usize,
    consts: Vec<T>,
}

/// A failed structural check reported by [`StratifiedAlgebra::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `c[i][j][k] ≠ −c[j][i][k]` (1-based indices in the message).
    NotSkew { i: usize, j: usize, k: usize },
    /// The brackets of `V₁` span only `rank` of the `expected` dimensions of `V₂`.
    SecondLayerNotGenerated { rank: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSkew { i, j, k } => {
                write!(f, "structure constants not skew-symmetric at (i={}, j={}, k={})", i + 1, j + 1, k + 1)
            }
            Violation::SecondLayerNotGenerated { rank, expected } => {
                write!(f, "[V1,V1] has dimension {rank}, expected dim V2 = {expected}")
            }
        }
    }
}

impl<T: Scalar> StratifiedAlgebra<T> {
    /// Wraps a raw tensor indexed `(i·r + j)·m + k` without validation.
    pub fn from_tensor(rank: usize, dim_v2: usize, consts: Vec<T>) -> Result<Self> {
        check_len("structure tensor", rank * rank * dim_v2, consts.len())?;
        Ok(StratifiedAlgebra { rank, dim_v2, consts })
    }

    /// Builds the tensor from the brackets `[Xᵢ, Xⱼ]`, `i < j` (0-based),
    /// completing by skew-symmetry, and validates the result.
    pub fn from_brackets(rank: usize, dim_v2: usize, brackets: &[(usize, usize, Vec<T>)]) -> Result<Self> {
        let mut consts = vec![T::zero(); rank * rank * dim_v2];
        for (i, j, coeffs) in brackets {
            let (i, j) = (*i, *j);
            if i >= j || j >= rank {
                return Err(Error::InvalidAlgebra(format!(
                    "bracket indices must satisfy i < j < rank, got ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            check_len("bracket coefficients", dim_v2, coeffs.len())?;
            for (k, c) in coeffs.iter().enumerate() {
                consts[(i * rank + j) * dim_v2 + k] = c.clone();
                consts[(j * rank + i) * dim_v2 + k] = -c.clone();
            }
        }
        let alg = StratifiedAlgebra { rank, dim_v2, consts };
        alg.validate().map_err(|v| {
            Error::InvalidAlgebra(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))
        })?;
        Ok(alg)
    }

    /// `r = dim V₁`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `m = dim V₂`.
    pub fn dim_v2(&self) -> usize {
        self.dim_v2
    }

    pub fn dim(&self) -> usize {
        self.rank + self.dim_v2
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> &T {
        &self.consts[(i * self.rank + j) * self.dim_v2 + k]
    }

    pub fn tensor(&self) -> &[T] {
        &self.consts
    }

    /// Columns `c[i][j][·]` for `i < j` in lexicographic order.
    pub fn bracket_span_matrix(&self) -> Matrix<T> {
        let mut cols = Vec::new();
        for i in 0..self.rank {
            for j in i + 1..self.rank {
                cols.push((0..self.dim_v2).map(|k| self.c(i, j, k).clone()).collect());
            }
        }
        Matrix::from_columns(self.dim_v2, &cols)
    }

    /// Checks skew-symmetry and that `[V₁, V₁] = V₂`.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        for i in 0..self.rank {
            for j in i..self.rank {
                for k in 0..self.dim_v2 {
                    if *self.c(i, j, k) != -self.c(j, i, k).clone() {
                        violations.push(Violation::NotSkew { i, j, k });
                    }
                }
            }
        }
        let rank = self.bracket_span_matrix().rank();
        if rank != self.dim_v2 {
            violations.push(Violation::SecondLayerNotGenerated { rank, expected: self.dim_v2 });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Converts the structure constants to another scalar type.
    pub fn map_scalar<S: Scalar>(&self) -> StratifiedAlgebra<S> {
        StratifiedAlgebra {
            rank: self.rank,
            dim_v2: self.dim_v2,
            consts: self.consts.iter().map(|c| S::from_f64(c.to_f64())).collect(),
        }
    }

    /// `z`-part of `[x, y]` for horizontal vectors.
    pub fn bracket_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut z = vec![T::zero(); self.dim_v2];
        for i in 0..self.rank {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..self.rank {
                if y[j].is_zero() || i == j {
                    continue;
                }
                let w = x[i].clone() * y[j].clone();
                for (k, zk) in z.iter_mut().enumerate() {
                    let c = self.c(i, j, k);
                    if !c.is_zero() {
                        *zk = zk.clone() + w.clone() * c.clone();
                    }
                }
            }
        }
        z
    }

    pub fn bracket(&self, a: &AlgebraElement<T>, b: &AlgebraElement<T>) -> Result<AlgebraElement<T>> {
        self.check_element(a)?;
        self.check_element(b)?;
        Ok(AlgebraElement { x: vec![T::zero(); self.rank], z: self.bracket_x(&a.x, &b.x) })
    }

    pub fn check_element(&self, a: &AlgebraElement<T>) -> Result<()> {
        check_len("V1 coordinates", self.rank, a.x.len())?;
        check_len("V2 coordinates", self.dim_v2, a.z.len())
    }

    /// Matrix of `ad_X : V₁ → V₂` (`m × r`); column `j` is `[X, Xⱼ]`.
    pub fn ad_matrix(&self, x: &[T]) -> Matrix<T> {
        let mut m = Matrix::<T>::zeros(self.dim_v2, self.rank);
        for j in 0..self.rank {
            for i in 0..self.rank {
                if x[i].is_zero() {
                    continue;
                }
                for k in 0..self.dim_v2 {
                    let c = self.c(i, j, k);
                    if !c.is_zero() {
                        m[(k, j)] = m[(k, j)].clone() + x[i].clone() * c.clone();
                    }
                }
            }
        }
        m
    }

    /// Rank of `ad_X` restricted to `V₁`.
    pub fn vector_rank(&self, x: &[T]) -> usize {
        self.ad_matrix(x).rank()
    }

    /// Membership in `R_ℓ = {X ∈ V₁ : rank ad_X ≤ ℓ}`.
    pub fn in_r_ell(&self, x: &[T], ell: usize) -> bool {
        self.vector_rank(x) <= ell
    }

    /// `[P, Q] ⊆ V₂` for subspaces of `V₁`.
    pub fn bracket_space(&self, p: &Subspace<T>, q: &Subspace<T>) -> Subspace<T> {
        let mut cols = Vec::new();
        for a in p.basis_vectors() {
            for b in q.basis_vectors() {
                cols.push(self.bracket_x(&a, &b));
            }
        }
        Subspace::span(Ambient::V2, self.dim_v2, &cols)
    }

    /// `𝔷(𝔤) ∩ V₁`, the null space of the stacked `(r·m) × r` bracket map.
    pub fn center_intersect_v1(&self) -> Subspace<T> {
        let (r, m) = (self.rank, self.dim_v2);
        let mut stacked = Matrix::zeros(r * m, r);
        for j in 0..r {
            for k in 0..m {
                for i in 0..r {
                    stacked[(j * m + k, i)] = self.c(i, j, k).clone();
                }
            }
        }
        Subspace::from_matrix(Ambient::V1, &stacked.null_space())
    }

    pub fn v1(&self) -> Subspace<T> {
        Subspace::whole(Ambient::V1, self.rank)
    }

    pub fn v2(&self) -> Subspace<T> {
        Subspace::whole(Ambient::V2, self.dim_v2)
    }

    /// Standard basis vector `Xᵢ` as a horizontal coordinate vector.
    pub fn basis_x(&self, i: usize) -> Vec<T> {
        unit(self.rank, i)
    }
}

pub(crate) fn unit<T: Scalar>(n: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[i] = T::one();
    v
}

/// Element `x + z` of `V₁ ⊕ V₂` in the structure-constant basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement<T> {
    pub x: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> AlgebraElement<T> {
    pub fn new(x: Vec<T>, z: Vec<T>) -> Self {
        AlgebraElement { x, z }
    }

    pub fn zero(rank: usize, dim_v2: usize) -> Self {
        AlgebraElement { x: vec![T::zero(); rank], z: vec![T::zero(); dim_v2] }
    }

    pub fn horizontal(x: Vec<T>, dim_v2: usize) -> Self {
        AlgebraElement { x, z: vec![T::zero(); dim_v2] }
    }

    pub fn vertical(rank: usize, z: Vec<T>) -> Self {
        AlgebraElement { x: vec![T::zero(); rank], z }
    }

    /// Canonical projection `π_{V₁}`.
    pub fn horizontal_part(&self) -> &[T] {
        &self.x
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.x.iter().chain(self.z.iter()).cloned().collect()
    }

    pub fn from_slice(rank: usize, v: &[T]) -> Self {
        AlgebraElement { x: v[..rank].to_vec(), z: v[rank..].to_vec() }
    }

    pub fn add(&self, other: &Self) -> Self {
        AlgebraElement { x: add(&self.x, &other.x), z: add(&self.z, &other.z) }
    }

    pub fn scale(&self, s: &T) -> Self {
        AlgebraElement { x: scale(&self.x, s), z: scale(&self.z, s) }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-T::one())
    }

    pub fn is_zero(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|v| v.is_zero())
    }

    pub fn map_scalar<S: Scalar>(&self) -> AlgebraElement<S> {
        AlgebraElement {
            x: self.x.iter().map(|v| S::from_f64(v.to_f64())).collect(),
            z: self.z.iter().map(|v| S::from_f64(v.to_f64())).collect(),
        }
    }
}

pub(crate) fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| x.clone() + y.clone()).collect()
}

pub(crate) fn scale<T: Scalar>(a: &[T], s: &T) -> Vec<T> {
    a.iter().map(|x| x.clone() * s.clone()).collect()
}

/// Which space a [`Subspace`] lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ambient {
    V1,
    V2,
    Full,
}

/// Linear subspace held by its canonical basis (reduced column echelon form
/// with unit leading entries), so equal spaces have equal bases.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<T> {
    ambient: Ambient,
    basis: Matrix<T>,
}

impl<T: Scalar> Subspace<T> {
    pub fn span(ambient: Ambient, n: usize, vectors: &[Vec<T>]) -> Self {
        Self::from_matrix(ambient, &Matrix::from_columns(n, vectors))
    }

    pub fn from_matrix(ambient: Ambient, m: &Matrix<T>) -> Self {
        Subspace { ambient, basis: m.column_echelon_basis() }
    }

    pub fn zero(ambient: Ambient, n: usize) -> Self {
        Subspace { ambient, basis: Matrix::zeros(n, 0) }
    }

    pub fn whole(ambient: Ambient, n: usize) -> Self {
        Subspace { ambient, basis: Matrix::identity(n) }
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.dim()
    }

    pub fn is_whole(&self) -> bool {
        self.dim() == self.ambient_dim()
    }

    pub fn basis(&self) -> &Matrix<T> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vec<T>> {
        self.basis.columns()
    }

    pub fn contains(&self, v: &[T]) -> bool {
        let ext = self.basis.hstack(&Matrix::from_columns(self.ambient_dim(), &[v.to_vec()]));
        ext.rank() == self.dim()
    }

    pub fn contains_subspace(&self, other: &Subspace<T>) -> bool {
        self.sum(other).dim() == self.dim()
    }

    pub fn sum(&self, other: &Subspace<T>) -> Subspace<T> {
        Subspace::from_matrix(self.ambient, &self.basis.hstack(&other.basis))
    }

    /// Image under a linear map into `ambient`.
    pub fn image(&self, map: &Matrix<T>, ambient: Ambient) -> Subspace<T> {
        Subspace::from_matrix(ambient, &map.mul(&self.basis))
    }

    /// Same space, decided by mutual containment (robust for floats).
    pub fn same_space(&self, other: &Subspace<T>) -> bool {
        self.dim() == other.dim() && self.contains_subspace(other)
    }
}
