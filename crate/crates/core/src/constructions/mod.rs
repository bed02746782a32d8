//! Structural toolkit: free algebras, Heisenberg algebras, direct products,
//! quotients by second-layer ideals and the lift/project consistency check.

mod dim7;
mod free_minus_two;
mod two_vector;

pub use dim7::{
    dim7_algebra, dim7_variety_pieces, feasible73, m_matrix, nearest_piece, normalize_basis_73, Dim7Piece,
    NormalizedBasis73, PieceKind,
};
pub use free_minus_two::{
    commuting_normal_form, commuting_pattern_residual, fg_maps_and_jacobians, fg_numeric_gradient, gradient_rank,
    sample_level_set_point, CommutingForm,
    FgEval, LevelSetKind,
};
pub use two_vector::{canonical_block_matrix, darboux_normal_form, omega_c_matrices, DarbouxForm, OmegaC, TwoVector};

use crate::algebra::{unit, AlgebraElement, Ambient, StratifiedAlgebra, Subspace};
use crate::error::{Error, Result};
use crate::group::{self, Control};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Position of `eᵢ ∧ eⱼ` (`i < j`, 0-based) in the lexicographic basis of `Λ²V₁`.
pub fn pair_index(r: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < r);
    i * (2 * r - i - 1) / 2 + (j - i - 1)
}

/// Free step-2 algebra `V₁ ⊕ Λ²V₁` of rank `r`, `[eᵢ, eⱼ] = eᵢ ∧ eⱼ`.
pub fn free_algebra<T: Scalar>(r: usize) -> Result<StratifiedAlgebra<T>> {
    if r < 2 {
        return Err(Error::InvalidAlgebra(format!("free algebra needs rank >= 2, got {r}")));
    }
    let m = r * (r - 1) / 2;
    let mut brackets = Vec::with_capacity(m);
    for i in 0..r {
        for j in i + 1..r {
            brackets.push((i, j, unit(m, pair_index(r, i, j))));
        }
    }
    StratifiedAlgebra::from_brackets(r, m, &brackets)
}

/// Heisenberg algebra `Hⁿ`: basis `X₁..Xₙ, Y₁..Yₙ`, `[Xᵢ, Yᵢ] = T`.
pub fn heisenberg<T: Scalar>(n: usize) -> StratifiedAlgebra<T> {
    assert!(n >= 1, "Heisenberg algebra needs n >= 1");
    let brackets: Vec<_> = (0..n).map(|i| (i, n + i, vec![T::one()])).collect();
    StratifiedAlgebra::from_brackets(2 * n, 1, &brackets).expect("Heisenberg algebra is stratified")
}

/// `𝔤 ⊕ ℝʰ`: appends `h` central horizontal generators.
pub fn abelian_extension<T: Scalar>(alg: &StratifiedAlgebra<T>, h: usize) -> StratifiedAlgebra<T> {
    let (r, m) = (alg.rank(), alg.dim_v2());
    let r2 = r + h;
    let mut consts = vec![T::zero(); r2 * r2 * m];
    for i in 0..r {
        for j in 0..r {
            for k in 0..m {
                consts[(i * r2 + j) * m + k] = alg.c(i, j, k).clone();
            }
        }
    }
    StratifiedAlgebra::from_tensor(r2, m, consts).expect("tensor length")
}

/// Direct sum with block-diagonal structure constants; `V₁ = V₁ᴳ ⊕ V₁ᴴ`,
/// `V₂ = V₂ᴳ ⊕ V₂ᴴ`.
pub fn product<T: Scalar>(g: &StratifiedAlgebra<T>, h: &StratifiedAlgebra<T>) -> StratifiedAlgebra<T> {
    let (rg, mg, rh, mh) = (g.rank(), g.dim_v2(), h.rank(), h.dim_v2());
    let (r, m) = (rg + rh, mg + mh);
    let mut consts = vec![T::zero(); r * r * m];
    for i in 0..rg {
        for j in 0..rg {
            for k in 0..mg {
                consts[(i * r + j) * m + k] = g.c(i, j, k).clone();
            }
        }
    }
    for i in 0..rh {
        for j in 0..rh {
            for k in 0..mh {
                consts[((rg + i) * r + rg + j) * m + mg + k] = h.c(i, j, k).clone();
            }
        }
    }
    StratifiedAlgebra::from_tensor(r, m, consts).expect("tensor length")
}

/// `𝔤 / W` for `W ⊆ V₂` together with the canonical projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Quotient<T> {
    pub algebra: StratifiedAlgebra<T>,
    /// `(r + m') × (r + m)` matrix of `π` in `(x, z)` coordinates.
    pub projection: Matrix<T>,
    /// Coordinates of `V₂` kept as the basis of `V₂ / W`.
    pub kept: Vec<usize>,
}

impl<T: Scalar> Quotient<T> {
    pub fn project(&self, g: &AlgebraElement<T>) -> AlgebraElement<T> {
        AlgebraElement::from_slice(self.algebra.rank(), &self.projection.mul_vec(&g.to_vec()))
    }

    pub fn project_subspace(&self, s: &Subspace<T>) -> Subspace<T> {
        s.image(&self.projection, Ambient::Full)
    }
}

/// Quotient by `W ⊆ V₂`; the complement of `W` is spanned by the coordinate
/// vectors that are not pivot rows of `W`'s canonical basis.
pub fn quotient<T: Scalar>(alg: &StratifiedAlgebra<T>, w: &Subspace<T>) -> Result<Quotient<T>> {
    let (r, m) = (alg.rank(), alg.dim_v2());
    if w.ambient() != Ambient::V2 || w.ambient_dim() != m {
        return Err(Error::DimensionMismatch { what: "ideal must lie in V2", expected: m, got: w.ambient_dim() });
    }
    if w.dim() >= m {
        return Err(Error::InvalidAlgebra("quotient by all of V2 is not of step 2".into()));
    }
    let basis = w.basis_vectors();
    let scale = w.basis().max_abs();
    let pivots: Vec<usize> =
        basis.iter().map(|v| v.iter().position(|c| !c.is_negligible(scale)).expect("nonzero basis vector")).collect();
    let kept: Vec<usize> = (0..m).filter(|k| !pivots.contains(k)).collect();
    let m2 = kept.len();
    let mut proj = Matrix::zeros(r + m2, r + m);
    for i in 0..r {
        proj[(i, i)] = T::one();
    }
    for (new, &old) in kept.iter().enumerate() {
        proj[(r + new, r + old)] = T::one();
        for (w_i, &p) in basis.iter().zip(&pivots) {
            proj[(r + new, r + p)] = proj[(r + new, r + p)].clone() - w_i[old].clone();
        }
    }
    let mut consts = vec![T::zero(); r * r * m2];
    for i in 0..r {
        for j in 0..r {
            let z: Vec<T> = (0..m).map(|k| alg.c(i, j, k).clone()).collect();
            let mut full = vec![T::zero(); r];
            full.extend(z);
            let projected = proj.mul_vec(&full);
            for k in 0..m2 {
                consts[(i * r + j) * m2 + k] = projected[r + k].clone();
            }
        }
    }
    let algebra = StratifiedAlgebra::from_tensor(r, m2, consts)?;
    algebra.validate().map_err(|v| Error::InvalidAlgebra(format!("{v:?}")))?;
    Ok(Quotient { algebra, projection: proj, kept })
}

/// Outcome of comparing a curve in `F` with its projection to `F / W`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftReport {
    pub endpoints_agree: bool,
    pub e_gamma_agree: bool,
    pub abnormal_upstairs: bool,
    pub abnormal_downstairs: bool,
}

impl LiftReport {
    /// Abnormal downstairs implies abnormal upstairs.
    pub fn implication_holds(&self) -> bool {
        !self.abnormal_downstairs || self.abnormal_upstairs
    }

    pub fn consistent(&self) -> bool {
        self.endpoints_agree && self.e_gamma_agree && self.implication_holds()
    }
}

/// Runs `u` in `alg` and in `alg / W` (same controls, the ideal lies in `V₂`)
/// and checks `π(End_F u) = End_G u` and `π(E_γ) = E_{π∘γ}`.
pub fn lift_and_project_check<T: Scalar>(
    alg: &StratifiedAlgebra<T>,
    w: &Subspace<T>,
    u: &Control<T>,
) -> Result<LiftReport> {
    let quot = quotient(alg, w)?;
    let up = group::classify(alg, u)?;
    let down = group::classify(&quot.algebra, u)?;
    let e_up = group::e_gamma(alg, u)?;
    let e_down = group::e_gamma(&quot.algebra, u)?;
    Ok(LiftReport {
        endpoints_agree: quot.project(&up.endpoint) == down.endpoint,
        e_gamma_agree: quot.project_subspace(&e_up).same_space(&e_down),
        abnormal_upstairs: up.abnormal,
        abnormal_downstairs: down.abnormal,
    })
}

/// Whether `Z ∈ [P, W₁]` for a plane with `dim [P, W₁] = ℓ − 1`,
/// `ℓ = dim W₂`; decided by comparing ranks, which is the vanishing of the
/// determinant of `(Z | basis of [P, W₁])`.
pub fn freeminus1_condition<T: Scalar>(alg: &StratifiedAlgebra<T>, z: &[T], p: &Subspace<T>) -> Result<bool> {
    let ell = alg.dim_v2();
    let pv = alg.bracket_space(p, &alg.v1());
    if pv.dim() + 1 != ell {
        return Err(Error::Hypothesis(format!("dim [P, W1] = {}, expected {}", pv.dim(), ell - 1)));
    }
    Ok(pv.contains(z))
}
