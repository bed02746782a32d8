//! Rank-4, dimension-7 algebras: the `λ`-family, the matrix `M(X)`, the
//! basis normalization and the pieces covering the abnormal set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::algebra::{add, scale, unit, AlgebraElement, StratifiedAlgebra, Subspace};
use crate::error::{Error, Result};
use crate::linalg::{distance_to_span, numeric_rank, Matrix};
use crate::scalar::Scalar;

/// Basis `X₁..X₄`, `X₂₁, X₃₁, X₄₃` with `[X₂,X₁] = X₂₁`, `[X₃,X₁] = X₃₁`,
/// `[X₄,X₃] = X₄₃`, `[X₄,X₂] = λX₃₁`, `[X₄,X₁] = [X₃,X₂] = 0`.
pub fn dim7_algebra<T: Scalar>(lambda: T) -> StratifiedAlgebra<T> {
    let o = T::one();
    let z = T::zero();
    let brackets = vec![
        (0, 1, vec![-o.clone(), z.clone(), z.clone()]),
        (0, 2, vec![z.clone(), -o.clone(), z.clone()]),
        (2, 3, vec![z.clone(), z.clone(), -o]),
        (1, 3, vec![z.clone(), -lambda, z]),
    ];
    StratifiedAlgebra::from_brackets(4, 3, &brackets).expect("dim-7 family is stratified")
}

/// Columns are `[X, Xᵢ]` in the basis `X₂₁, X₃₁, X₄₃`.
pub fn m_matrix<T: Scalar>(x: &[T], lambda: &T) -> Matrix<T> {
    assert_eq!(x.len(), 4, "M(X) needs a vector of length 4");
    let z = T::zero();
    let (x1, x2, x3, x4) = (x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone());
    let l = lambda.clone();
    Matrix::from_row_slice(
        3,
        4,
        &[
            x2.clone(),
            -x1.clone(),
            z.clone(),
            z.clone(),
            x3.clone(),
            l.clone() * x4.clone(),
            -x1,
            -(l * x2),
            z.clone(),
            z,
            x4,
            -x3,
        ],
    )
}

/// `rank M(X) ≤ 2`.
pub fn feasible73<T: Scalar>(x: &[T], lambda: &T) -> bool {
    T::matrix_rank(&m_matrix(x, lambda)) <= 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedBasis73<T> {
    /// `X₁, X₂, X₃, X₄, X₂₁, X₃₁, X₄₃`.
    pub basis: Vec<AlgebraElement<T>>,
    pub lambda: T,
}

impl<T: Scalar> NormalizedBasis73<T> {
    pub fn horizontal(&self, i: usize) -> &[T] {
        &self.basis[i].x
    }

    pub fn vertical(&self, i: usize) -> &[T] {
        &self.basis[4 + i].z
    }

    /// Differences between the six required brackets and their values.
    pub fn table_residuals(&self, alg: &StratifiedAlgebra<T>) -> Vec<Vec<T>> {
        let br = |i: usize, j: usize| alg.bracket_x(self.horizontal(i), self.horizontal(j));
        let zero = vec![T::zero(); 3];
        let sub = |a: Vec<T>, b: &[T]| a.iter().zip(b).map(|(p, q)| p.clone() - q.clone()).collect::<Vec<T>>();
        vec![
            sub(br(1, 0), self.vertical(0)),
            sub(br(2, 0), self.vertical(1)),
            sub(br(3, 2), self.vertical(2)),
            sub(br(3, 1), &scale(self.vertical(1), &self.lambda)),
            sub(br(3, 0), &zero),
            sub(br(2, 1), &zero),
        ]
    }

    pub fn table_holds(&self, alg: &StratifiedAlgebra<T>) -> bool {
        let scale = self.basis.iter().flat_map(|b| b.to_vec()).fold(1.0f64, |a, v| a.max(v.to_f64().abs()));
        self.table_residuals(alg).iter().flatten().all(|v| v.is_negligible(scale * scale))
    }
}

/// Coordinates of `t` in the independent vectors `cols`, if it lies in their span.
fn coords_in<T: Scalar>(cols: &[Vec<T>], t: &[T]) -> Option<Vec<T>> {
    let n = cols.len();
    let mut all = cols.to_vec();
    all.push(t.to_vec());
    let mut m = Matrix::from_columns(t.len(), &all);
    let pivots = m.rref_in_place();
    if pivots.len() != n || pivots.contains(&n) {
        return None;
    }
    Some((0..n).map(|i| m[(i, n)].clone()).collect())
}

fn axpy<T: Scalar>(y: &[T], a: &T, x: &[T]) -> Vec<T> {
    add(y, &scale(x, a))
}

/// Constructive normalization: `X₁, X₂ ∈ P` with `[X₂,X₁] ≠ 0`, then the
/// substitutions for `(a, b)`, `(c, d)` and `e` in that order.
pub fn normalize_basis_73<T: Scalar>(alg: &StratifiedAlgebra<T>, p: &Subspace<T>) -> Result<NormalizedBasis73<T>> {
    if alg.rank() != 4 || alg.dim_v2() != 3 {
        return Err(Error::Hypothesis(format!(
            "need rank 4 and dim V2 = 3, got {} and {}",
            alg.rank(),
            alg.dim_v2()
        )));
    }
    let dims = (p.dim(), alg.bracket_space(p, &alg.v1()).dim(), alg.bracket_space(p, p).dim());
    if dims != (2, 2, 1) {
        return Err(Error::Hypothesis(format!(
            "need dim P = 2, dim [P,V1] = 2, dim [P,P] = 1, got {}, {}, {}",
            dims.0, dims.1, dims.2
        )));
    }
    let pb = p.basis_vectors();
    let (p1, p2) = (pb[0].clone(), pb[1].clone());
    let one = T::one();
    let candidates = [
        (p1.clone(), p2.clone()),
        (p2.clone(), p1.clone()),
        (add(&p1, &p2), p2.clone()),
        (axpy(&p1, &-one.clone(), &p2), p2.clone()),
    ];
    let std: Vec<Vec<T>> = (0..4).map(|i| unit(4, i)).collect();
    let mut chosen = None;
    'outer: for (x1, x2) in candidates {
        let x21 = alg.bracket_x(&x2, &x1);
        for e in &std {
            let x31 = alg.bracket_x(e, &x1);
            if Subspace::span(crate::algebra::Ambient::V2, 3, &[x21.clone(), x31]).dim() == 2 {
                chosen = Some((x1, x2, e.clone()));
                break 'outer;
            }
        }
    }
    let (x1, mut x2, mut x3) = chosen.ok_or_else(|| Error::Hypothesis("no X1 in P of rank 2".into()))?;
    let x21 = alg.bracket_x(&x2, &x1);
    let x31 = alg.bracket_x(&x3, &x1);
    let span = [x21.clone(), x31.clone()];
    let ab = coords_in(&span, &alg.bracket_x(&x3, &x2))
        .ok_or_else(|| Error::Hypothesis("[X3, X2] outside [P, V1]".into()))?;
    x3 = axpy(&x3, &ab[0], &x1);
    x2 = axpy(&x2, &-ab[1].clone(), &x1);
    let x4 = std
        .iter()
        .find(|e| {
            let m = Matrix::from_columns(4, &[x1.clone(), x2.clone(), x3.clone(), (*e).clone()]);
            T::matrix_rank(&m) == 4
        })
        .cloned()
        .expect("three independent vectors extend by a coordinate vector");
    let cd = coords_in(&span, &alg.bracket_x(&x4, &x1))
        .ok_or_else(|| Error::Hypothesis("[X4, X1] outside [P, V1]".into()))?;
    let x4 = axpy(&axpy(&x4, &-cd[0].clone(), &x2), &-cd[1].clone(), &x3);
    let el = coords_in(&span, &alg.bracket_x(&x4, &x2))
        .ok_or_else(|| Error::Hypothesis("[X4, X2] outside [P, V1]".into()))?;
    let x4 = axpy(&x4, &el[0], &x1);
    let lambda = el[1].clone();
    let x43 = alg.bracket_x(&x4, &x3);
    if Subspace::span(crate::algebra::Ambient::V2, 3, &[x21.clone(), x31.clone(), x43.clone()]).dim() != 3 {
        return Err(Error::Hypothesis("X43 depends on X21, X31".into()));
    }
    let basis = [x1, x2, x3, x4]
        .into_iter()
        .map(|x| AlgebraElement::horizontal(x, 3))
        .chain([x21, x31, x43].into_iter().map(|z| AlgebraElement::vertical(4, z)))
        .collect();
    Ok(NormalizedBasis73 { basis, lambda })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PieceKind {
    A,
    B,
    CaseI,
    CaseII,
    CaseIII,
}

impl PieceKind {
    pub const ALL: [PieceKind; 5] = [PieceKind::A, PieceKind::B, PieceKind::CaseI, PieceKind::CaseII, PieceKind::CaseIII];

    pub fn name(self) -> &'static str {
        match self {
            PieceKind::A => "A",
            PieceKind::B => "B",
            PieceKind::CaseI => "case-i",
            PieceKind::CaseII => "case-ii",
            PieceKind::CaseIII => "case-iii",
        }
    }
}

/// One parametrized piece in coordinates `(x₁..x₄, x₂₁, x₃₁, x₄₃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dim7Piece {
    pub kind: PieceKind,
    pub lambda: f64,
}

pub fn dim7_variety_pieces(lambda: f64) -> Vec<Dim7Piece> {
    PieceKind::ALL.iter().map(|&kind| Dim7Piece { kind, lambda }).collect()
}

impl Dim7Piece {
    pub fn param_dim(&self) -> usize {
        match self.kind {
            PieceKind::CaseI => 5,
            _ => 4,
        }
    }

    /// Dimension of the piece.
    pub fn expected_dim(&self) -> usize {
        4
    }

    /// A: `(x₁, x₄, a, b)`; B: `(x₂, x₃, a, b)`; case (i): `(x₁..x₄, t)`
    /// restricted to the quadric; (ii): `(x₃, x₄, x₃₁, x₄₃)`;
    /// (iii): `(x₁, x₂, x₂₁, x₃₁)`.
    pub fn eval(&self, p: &[f64]) -> [f64; 7] {
        let l = self.lambda;
        match self.kind {
            PieceKind::A => {
                let (x1, x4, a, b) = (p[0], p[1], p[2], p[3]);
                [x1, 0.0, 0.0, x4, -a * x1, a * l * x4 - b * x1, b * x4]
            }
            PieceKind::B => {
                let (x2, x3, a, b) = (p[0], p[1], p[2], p[3]);
                [0.0, x2, x3, 0.0, a * x2, a * x3 - b * l * x2, -b * x3]
            }
            PieceKind::CaseI => {
                let (x1, x2, x3, x4, t) = (p[0], p[1], p[2], p[3], p[4]);
                [x1, x2, x3, x4, t * x1 * x2, 2.0 * t * x1 * x3, -t * x3 * x4]
            }
            PieceKind::CaseII => [0.0, 0.0, p[0], p[1], 0.0, p[2], p[3]],
            PieceKind::CaseIII => [p[0], p[1], 0.0, 0.0, p[2], p[3], 0.0],
        }
    }

    /// Quadric `x₁x₃ + λx₂x₄` and its gradient, for case (i) only.
    fn constraint(&self, p: &[f64]) -> Option<(f64, [f64; 5])> {
        (self.kind == PieceKind::CaseI).then(|| {
            let l = self.lambda;
            (p[0] * p[2] + l * p[1] * p[3], [p[2], l * p[3], p[0], l * p[1], 0.0])
        })
    }

    /// Random parameters; for case (i) a point of the quadric, solving for
    /// `x₃` on even `index` and for `x₁` on odd `index`.
    pub fn sample_params<R: Rng>(&self, rng: &mut R, index: usize) -> Vec<f64> {
        let mut p: Vec<f64> = (0..self.param_dim()).map(|_| rng.sample(StandardNormal)).collect();
        if self.kind == PieceKind::CaseI {
            let l = self.lambda;
            if index % 2 == 0 {
                p[2] = -l * p[1] * p[3] / p[0];
            } else {
                p[0] = -l * p[1] * p[3] / p[2];
            }
        }
        p
    }

    /// Rank of the parametrization at `p`, restricted to the tangent space of
    /// the quadric for case (i).
    pub fn jacobian_rank(&self, p: &[f64], step: f64, tol: f64) -> usize {
        let d = self.param_dim();
        let mut jac = DMatrix::zeros(7, d);
        for j in 0..d {
            let mut plus = p.to_vec();
            let mut minus = p.to_vec();
            plus[j] += step;
            minus[j] -= step;
            let (fp, fm) = (self.eval(&plus), self.eval(&minus));
            for i in 0..7 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        let restricted = match self.constraint(p) {
            Some((_, grad)) if grad.iter().any(|g| g.abs() > 1e-12) => {
                let g = DMatrix::from_row_slice(1, d, &grad);
                let tangent = crate::linalg::null_space_f64(&g, 1e-12);
                jac * tangent
            }
            _ => jac,
        };
        numeric_rank(&restricted, tol)
    }

    /// Distance-type residual of `point` from the piece.
    pub fn membership_residual(&self, point: &[f64]) -> f64 {
        let (x1, x2, x3, x4) = (point[0], point[1], point[2], point[3]);
        let z = DVector::from_column_slice(&point[4..7]);
        let l = self.lambda;
        let dist = |cols: &[[f64; 3]]| {
            let m = DMatrix::from_fn(3, cols.len(), |i, j| cols[j][i]);
            distance_to_span(&m, &z, 1e-12)
        };
        match self.kind {
            PieceKind::A => x2.abs().max(x3.abs()).max(dist(&[[-x1, l * x4, 0.0], [0.0, -x1, x4]])),
            PieceKind::B => x1.abs().max(x4.abs()).max(dist(&[[x2, x3, 0.0], [0.0, -l * x2, -x3]])),
            PieceKind::CaseI => {
                let q = x1 * x3 + l * x2 * x4;
                q.abs().max(dist(&[[x1 * x2, 2.0 * x1 * x3, -x3 * x4]]))
            }
            PieceKind::CaseII => x1.abs().max(x2.abs()).max(point[4].abs()),
            PieceKind::CaseIII => x3.abs().max(x4.abs()).max(point[6].abs()),
        }
    }
}

/// The piece with the smallest membership residual.
pub fn nearest_piece(lambda: f64, point: &[f64]) -> (PieceKind, f64) {
    dim7_variety_pieces(lambda)
        .iter()
        .map(|p| (p.kind, p.membership_residual(point)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("five pieces")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Ambient;
    use crate::scalar::q;
    use crate::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(a: &[i64]) -> Vec<Rational> {
        a.iter().map(|&c| q(c, 1)).collect()
    }

    #[test]
    fn m_matrix_is_ad_matrix() {
        for lam in [-1, 0, 1, 2] {
            let alg = dim7_algebra(q(lam, 1));
            let x = v(&[3, -1, 2, 5]);
            assert_eq!(m_matrix(&x, &q(lam, 1)), alg.ad_matrix(&x));
        }
    }

    #[test]
    fn feasibility_examples() {
        let l = q(1, 1);
        assert!(feasible73(&v(&[0, 0, 0, 0]), &l));
        assert_eq!(Rational::matrix_rank(&m_matrix(&v(&[0, 0, 0, 0]), &l)), 0);
        assert!(!feasible73(&v(&[1, 0, 1, 0]), &l));
        assert!(!feasible73(&v(&[1, 0, 1, 0]), &q(-3, 1)));
        assert!(feasible73(&v(&[0, 1, 0, 0]), &l));
        assert!(feasible73(&v(&[1, 1, 1, -1]), &l));
    }

    #[test]
    fn normalization_of_family_is_identity() {
        for lam in [-1, 0, 1, 2] {
            let alg = dim7_algebra(q(lam, 1));
            let p = Subspace::span(Ambient::V1, 4, &[unit(4, 0), unit(4, 1)]);
            let nb = normalize_basis_73(&alg, &p).unwrap();
            assert_eq!(nb.lambda, q(lam, 1));
            for i in 0..4 {
                assert_eq!(nb.horizontal(i), unit::<Rational>(4, i).as_slice());
            }
            for i in 0..3 {
                assert_eq!(nb.vertical(i), unit::<Rational>(3, i).as_slice());
            }
            assert!(nb.table_holds(&alg));
        }
    }

    #[test]
    fn abelian_plane_fails_hypothesis() {
        let alg = dim7_algebra(q(1, 1));
        let p = Subspace::span(Ambient::V1, 4, &[unit(4, 0), unit(4, 3)]);
        assert!(matches!(normalize_basis_73(&alg, &p), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn piece_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for lam in [-1.0, 0.0, 1.0, 2.0] {
            for piece in dim7_variety_pieces(lam) {
                let mut best = 0;
                for i in 0..20 {
                    let p = piece.sample_params(&mut rng, i);
                    let r = piece.jacobian_rank(&p, 1e-6, 1e-8);
                    assert!(r <= 4, "{:?} rank {r}", piece.kind);
                    best = best.max(r);
                    assert!(piece.membership_residual(&piece.eval(&p)) < 1e-8);
                }
                assert_eq!(best, 4, "{:?} at λ = {lam}", piece.kind);
            }
        }
        let a = Dim7Piece { kind: PieceKind::A, lambda: 1.0 };
        assert!(a.jacobian_rank(&[0.0, 0.0, 0.7, -1.1], 1e-6, 1e-8) <= 2);
    }
}
