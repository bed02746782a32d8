//! Group law in exponential coordinates, endpoint map for piecewise-constant
//! controls, and abnormality of the resulting horizontal curves.
//!
//! In step 2 the Baker–Campbell–Hausdorff series stops after one bracket:
//! `log(exp g · exp h) = g + h + ½[g, h]`. A segment of duration `τ` and
//! constant control `u` moves the curve by right multiplication with
//! `exp(τ u)`, so the endpoint of a piecewise-constant control is an exact
//! finite product.

use nalgebra::DMatrix;

use crate::algebra::{add, AlgebraElement, Ambient, StratifiedAlgebra, Subspace};
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Point `exp(x·X + z·Z)` of the group; the identity is all zeros.
pub type GroupElement<T> = AlgebraElement<T>;

pub fn identity<T: Scalar>(alg: &StratifiedAlgebra<T>) -> GroupElement<T> {
    GroupElement::zero(alg.rank(), alg.dim_v2())
}

pub fn multiply<T: Scalar>(
    alg: &StratifiedAlgebra<T>,
    g: &GroupElement<T>,
    h: &GroupElement<T>,
) -> Result<GroupElement<T>> {
    alg.check_element(g)?;
    alg.check_element(h)?;
    let half = T::half();
    let br = alg.bracket_x(&g.x, &h.x);
    let z = g
        .z
        .iter()
        .zip(&h.z)
        .zip(&br)
        .map(|((a, b), c)| a.clone() + b.clone() + half.clone() * c.clone())
        .collect();
    Ok(GroupElement { x: add(&g.x, &h.x), z })
}

pub fn inverse<T: Scalar>(g: &GroupElement<T>) -> GroupElement<T> {
    g.neg()
}

/// `Ad_g Y = Y + [π_{V₁} g, Y]`.
pub fn adjoint<T: Scalar>(
    alg: &StratifiedAlgebra<T>,
    g: &GroupElement<T>,
    y: &AlgebraElement<T>,
) -> Result<AlgebraElement<T>> {
    alg.check_element(g)?;
    alg.check_element(y)?;
    let br = alg.bracket_x(&g.x, &y.x);
    Ok(AlgebraElement { x: y.x.clone(), z: add(&y.z, &br) })
}

/// Block unitriangular `[[I, 0], [s·ad_g, I]]` in `(x, z)` coordinates.
fn unitriangular<T: Scalar>(alg: &StratifiedAlgebra<T>, g: &GroupElement<T>, s: T) -> Matrix<T> {
    let (r, m) = (alg.rank(), alg.dim_v2());
    let mut out = Matrix::identity(r + m);
    let ad = alg.ad_matrix(&g.x);
    for k in 0..m {
        for j in 0..r {
            out[(r + k, j)] = s.clone() * ad[(k, j)].clone();
        }
    }
    out
}

pub fn adjoint_matrix<T: Scalar>(alg: &StratifiedAlgebra<T>, g: &GroupElement<T>) -> Matrix<T> {
    unitriangular(alg, g, T::one())
}

/// `(dR_g)_e : Y ↦ Y + ½[Y, π_{V₁} g]`.
pub fn right_translation_differential<T: Scalar>(alg: &StratifiedAlgebra<T>, g: &GroupElement<T>) -> Matrix<T> {
    unitriangular(alg, g, -T::half())
}

/// `(dL_g)_e : Y ↦ Y + ½[π_{V₁} g, Y]`.
pub fn left_translation_differential<T: Scalar>(alg: &StratifiedAlgebra<T>, g: &GroupElement<T>) -> Matrix<T> {
    unitriangular(alg, g, T::half())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment<T> {
    pub duration: T,
    pub u: Vec<T>,
}

/// Piecewise-constant horizontal control on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Control<T> {
    segments: Vec<Segment<T>>,
}

impl<T: Scalar> Control<T> {
    /// Validates the segments and rescales time to total length 1.
    ///
    /// Rescaling is a reparametrization: durations are divided by the total
    /// `S` and control values multiplied by `S`, so the traced curve and its
    /// endpoint do not change. The flag reports whether rescaling happened.
    pub fn normalized(segments: Vec<Segment<T>>) -> Result<(Self, bool)> {
        if segments.is_empty() {
            return Err(Error::InvalidControl("at least one segment is required".into()));
        }
        let width = segments[0].u.len();
        let mut total = T::zero();
        for (i, s) in segments.iter().enumerate() {
            if s.duration <= T::zero() {
                return Err(Error::InvalidControl(format!("segment {} has non-positive duration", i + 1)));
            }
            if s.u.len() != width {
                return Err(Error::InvalidControl(format!(
                    "segment {} has {} components, expected {width}",
                    i + 1,
                    s.u.len()
                )));
            }
            total = total + s.duration.clone();
        }
        if total == T::one() {
            return Ok((Control { segments }, false));
        }
        let segments = segments
            .into_iter()
            .map(|s| Segment {
                duration: s.duration / total.clone(),
                u: s.u.into_iter().map(|v| v * total.clone()).collect(),
            })
            .collect();
        Ok((Control { segments }, true))
    }

    pub fn new(segments: Vec<Segment<T>>) -> Result<Self> {
        Self::normalized(segments).map(|(c, _)| c)
    }

    /// `n` segments of equal duration with the given values.
    pub fn uniform(values: Vec<Vec<T>>) -> Result<Self> {
        let n = values.len() as i64;
        Self::new(values.into_iter().map(|u| Segment { duration: T::from_ratio(1, n.max(1)), u }).collect())
    }

    pub fn zero(rank: usize) -> Self {
        Control { segments: vec![Segment { duration: T::one(), u: vec![T::zero(); rank] }] }
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn width(&self) -> usize {
        self.segments[0].u.len()
    }

    /// Splits every segment into `parts` equal pieces (same curve).
    pub fn refine(&self, parts: usize) -> Self {
        let parts = parts.max(1);
        let f = T::from_ratio(1, parts as i64);
        let segments = self
            .segments
            .iter()
            .flat_map(|s| {
                std::iter::repeat_n(Segment { duration: s.duration.clone() * f.clone(), u: s.u.clone() }, parts)
            })
            .collect();
        Control { segments }
    }

    /// Concatenation `self ⋆ other`, each run at its own speed and the whole
    /// rescaled to unit time.
    pub fn concat(&self, other: &Control<T>) -> Result<Self> {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        Self::new(segs)
    }

    /// Merges consecutive segments carrying equal control values.
    pub fn merged(&self) -> Self {
        let mut out: Vec<Segment<T>> = Vec::new();
        for s in &self.segments {
            match out.last_mut() {
                Some(last) if last.u == s.u => last.duration = last.duration.clone() + s.duration.clone(),
                _ => out.push(s.clone()),
            }
        }
        Control { segments: out }
    }

    pub fn map_scalar<S: Scalar>(&self) -> Control<S> {
        Control {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    duration: S::from_f64(s.duration.to_f64()),
                    u: s.u.iter().map(|v| S::from_f64(v.to_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// `γ(t₀) = e, γ(t_k) = γ(t_{k-1}) · exp(Δt_k u_k)`; the curve at every
/// segment boundary, starting with the identity.
pub fn path_breakpoints<T: Scalar>(alg: &StratifiedAlgebra<T>, u: &Control<T>) -> Result<Vec<GroupElement<T>>> {
    check_len("control width", alg.rank(), u.width())?;
    let mut pts = vec![identity(alg)];
    for s in u.segments() {
        let step = GroupElement::horizontal(s.u.iter().map(|v| v.clone() * s.duration.clone()).collect(), alg.dim_v2());
        let next = multiply(alg, pts.last().unwrap(), &step)?;
        pts.push(next);
    }
    Ok(pts)
}

pub fn endpoint<T: Scalar>(alg: &StratifiedAlgebra<T>, u: &Control<T>) -> Result<GroupElement<T>> {
    Ok(path_breakpoints(alg, u)?.pop().unwrap())
}

/// `P_γ = span{π_{V₁} log γ(t)}`.
///
/// On each segment `π_{V₁} log γ(t)` is affine in `t`, so the span over the
/// breakpoints equals the span over the whole interval.
pub fn p_gamma<T: Scalar>(alg: &StratifiedAlgebra<T>, u: &Control<T>) -> Result<Subspace<T>> {
    let pts = path_breakpoints(alg, u)?;
    let xs: Vec<Vec<T>> = pts.iter().skip(1).map(|g| g.x.clone()).collect();
    Ok(Subspace::span(Ambient::V1, alg.rank(), &xs))
}

/// `E_γ = V₁ ⊕ [P_γ, V₁]` inside `V₁ ⊕ V₂`.
pub fn e_gamma<T: Scalar>(alg: &StratifiedAlgebra<T>, u: &Control<T>) -> Result<Subspace<T>> {
    let p = p_gamma(alg, u)?;
    Ok(e_from_p(alg, &p))
}

pub(crate) fn e_from_p<T: Scalar>(alg: &StratifiedAlgebra<T>, p: &Subspace<T>) -> Subspace<T> {
    let (r, m) = (alg.rank(), alg.dim_v2());
    let pv = alg.bracket_space(p, &alg.v1());
    let mut cols: Vec<Vec<T>> = (0..r).map(|i| crate::algebra::unit(r + m, i)).collect();
    for z in pv.basis_vectors() {
        let mut v = vec![T::zero(); r];
        v.extend(z);
        cols.push(v);
    }
    Subspace::span(Ambient::Full, r + m, &cols)
}

/// Result of [`classify`].
#[derive(Clone, Debug, PartialEq)]
pub struct Classification<T> {
    pub abnormal: bool,
    /// `codim E_γ = m − dim [P_γ, V₁]`.
    pub codim_e: usize,
    pub dim_p: usize,
    pub endpoint: GroupElement<T>,
}

pub fn classify<T: Scalar>(alg: &StratifiedAlgebra<T>, u: &Control<T>) -> Result<Classification<T>> {
    let pts = path_breakpoints(alg, u)?;
    let xs: Vec<Vec<T>> = pts.iter().skip(1).map(|g| g.x.clone()).collect();
    let p = Subspace::span(Ambient::V1, alg.rank(), &xs);
    let pv = alg.bracket_space(&p, &alg.v1());
    let codim_e = alg.dim_v2() - pv.dim();
    Ok(Classification { abnormal: codim_e > 0, codim_e, dim_p: p.dim(), endpoint: pts.last().unwrap().clone() })
}

/// `true` iff `[P_γ, V₁] ≠ V₂`.
pub fn is_abnormal<T: Scalar>(alg: &StratifiedAlgebra<T>, u: &Control<T>) -> Result<bool> {
    Ok(classify(alg, u)?.abnormal)
}

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Central differences of the endpoint with respect to every entry of every
/// segment's control value (durations fixed); `(r+m) × (r·#segments)`.
pub fn numeric_endpoint_jacobian(alg: &StratifiedAlgebra<f64>, u: &Control<f64>, step: f64) -> Result<DMatrix<f64>> {
    let r = alg.rank();
    check_len("control width", r, u.width())?;
    let n = u.segments().len();
    let mut jac = DMatrix::zeros(alg.dim(), r * n);
    for s in 0..n {
        for i in 0..r {
            let mut plus = u.clone();
            plus.segments[s].u[i] += step;
            let mut minus = u.clone();
            minus.segments[s].u[i] -= step;
            let gp = endpoint(alg, &plus)?.to_vec();
            let gm = endpoint(alg, &minus)?.to_vec();
            for row in 0..alg.dim() {
                jac[(row, s * r + i)] = (gp[row] - gm[row]) / (2.0 * step);
            }
        }
    }
    Ok(jac)
}

/// Comparison of the finite-difference image of the endpoint differential
/// with `(dR_{γ(1)})_e E_γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub max_angle: f64,
    pub numeric_rank: usize,
    pub expected_dim: usize,
}

/// Runs the finite-difference oracle on `u` refined into halves.
///
/// Variations constant on the original segments can miss directions (a
/// single segment only sees `r` of them); splitting every segment in two
/// makes the midpoint differences span `P_γ`, so the column space equals the
/// full image.
pub fn endpoint_oracle(alg: &StratifiedAlgebra<f64>, u: &Control<f64>, step: f64, tol: f64) -> Result<OracleCheck> {
    let refined = u.refine(2);
    let jac = numeric_endpoint_jacobian(alg, &refined, step)?;
    let g1 = endpoint(alg, u)?;
    let e = e_gamma(alg, u)?;
    let image = right_translation_differential(alg, &g1).mul(e.basis()).to_dmatrix();
    Ok(OracleCheck {
        max_angle: linalg::max_principal_angle(&jac, &image, tol),
        numeric_rank: linalg::numeric_rank(&jac, tol),
        expected_dim: e.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::unit;
    use crate::constructions::{free_algebra, heisenberg};
    use crate::scalar::q;
    use crate::Rational;

    fn h1() -> StratifiedAlgebra<Rational> {
        heisenberg(1)
    }

    /// RK4 integration of `γ' = (dL_γ)_e u`, i.e. `x' = u`, `z' = ½[x, u]`.
    fn integrate(alg: &StratifiedAlgebra<f64>, u: &Control<f64>, steps_per_segment: usize) -> Vec<f64> {
        let (r, m) = (alg.rank(), alg.dim_v2());
        let mut x = vec![0.0; r];
        let mut z = vec![0.0; m];
        for s in u.segments() {
            let h = s.duration / steps_per_segment as f64;
            for _ in 0..steps_per_segment {
                let rhs = |x: &[f64]| -> Vec<f64> { alg.bracket_x(x, &s.u).iter().map(|v| 0.5 * v).collect() };
                let x2: Vec<f64> = x.iter().zip(&s.u).map(|(a, b)| a + 0.5 * h * b).collect();
                let x4: Vec<f64> = x.iter().zip(&s.u).map(|(a, b)| a + h * b).collect();
                let (k1, k2, k4) = (rhs(&x), rhs(&x2), rhs(&x4));
                for k in 0..m {
                    z[k] += h / 6.0 * (k1[k] + 4.0 * k2[k] + k4[k]);
                }
                x = x4;
            }
        }
        x.into_iter().chain(z).collect()
    }

    #[test]
    fn multiply_matches_ode_oracle() {
        let alg = h1();
        let g = multiply(&alg, &GroupElement::horizontal(unit(2, 0), 1), &GroupElement::horizontal(unit(2, 1), 1)).unwrap();
        assert_eq!(g, GroupElement::new(vec![q(1, 1), q(1, 1)], vec![q(1, 2)]));
        let u = Control::uniform(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        // uniform halves double the speed: same as exp(X1) exp(Y1)
        let ode = integrate(&alg.map_scalar(), &u, 1000);
        assert!((ode[0] - 0.5).abs() < 1e-12 && (ode[1] - 0.5).abs() < 1e-12);
        let u2 = Control::uniform(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let ode = integrate(&alg.map_scalar(), &u2, 1000);
        assert!((ode[0] - 1.0).abs() < 1e-12 && (ode[1] - 1.0).abs() < 1e-12 && (ode[2] - 0.5).abs() < 1e-12);
        let end = endpoint(&alg, &Control::uniform(vec![vec![q(2, 1), q(0, 1)], vec![q(0, 1), q(2, 1)]]).unwrap()).unwrap();
        assert_eq!(end, g);
    }

    #[test]
    fn identity_and_inverse() {
        let alg: StratifiedAlgebra<Rational> = free_algebra(3).unwrap();
        let g = GroupElement::new(vec![q(1, 1), q(-2, 3), q(5, 1)], vec![q(1, 7), q(0, 1), q(3, 1)]);
        assert_eq!(multiply(&alg, &g, &identity(&alg)).unwrap(), g);
        assert_eq!(multiply(&alg, &g, &inverse(&g)).unwrap(), identity(&alg));
    }

    #[test]
    fn adjoint_examples() {
        let alg = h1();
        let x1 = GroupElement::horizontal(unit(2, 0), 1);
        let y1 = AlgebraElement::horizontal(unit(2, 1), 1);
        assert_eq!(adjoint(&alg, &x1, &y1).unwrap(), AlgebraElement::new(unit(2, 1), vec![q(1, 1)]));
        assert_eq!(adjoint(&alg, &identity(&alg), &y1).unwrap(), y1);
        let t = AlgebraElement::vertical(2, vec![q(1, 1)]);
        assert_eq!(adjoint(&alg, &x1, &t).unwrap(), t);
    }

    #[test]
    fn right_translation_examples() {
        let alg = h1();
        assert_eq!(right_translation_differential(&alg, &identity(&alg)), Matrix::identity(3));
        let d = right_translation_differential(&alg, &GroupElement::horizontal(unit(2, 0), 1));
        assert_eq!(d.mul_vec(&[q(0, 1), q(1, 1), q(0, 1)]), vec![q(0, 1), q(1, 1), q(-1, 2)]);
    }

    #[test]
    fn left_translation_factors_through_adjoint() {
        let alg: StratifiedAlgebra<f64> = free_algebra(3).unwrap();
        let g = GroupElement::new(vec![0.3, -1.2, 0.7], vec![0.1, 0.5, -0.4]);
        let composed = right_translation_differential(&alg, &g).mul(&adjoint_matrix(&alg, &g));
        // finite differences of h ↦ g·h at the identity
        let h = 1e-6;
        for j in 0..alg.dim() {
            let mut e = vec![0.0; alg.dim()];
            e[j] = h;
            let p = multiply(&alg, &g, &GroupElement::from_slice(3, &e)).unwrap().to_vec();
            e[j] = -h;
            let mm = multiply(&alg, &g, &GroupElement::from_slice(3, &e)).unwrap().to_vec();
            for i in 0..alg.dim() {
                assert!(((p[i] - mm[i]) / (2.0 * h) - composed[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn endpoint_examples() {
        let alg: StratifiedAlgebra<Rational> = free_algebra(3).unwrap();
        assert_eq!(endpoint(&alg, &Control::zero(3)).unwrap(), identity(&alg));
        let one = Control::new(vec![Segment { duration: q(1, 1), u: unit(3, 0) }]).unwrap();
        assert_eq!(endpoint(&alg, &one).unwrap(), GroupElement::horizontal(unit(3, 0), 3));
    }

    #[test]
    fn control_validation_and_rescaling() {
        assert!(matches!(Control::<f64>::new(vec![]), Err(Error::InvalidControl(_))));
        let bad = vec![Segment { duration: 0.0, u: vec![1.0] }];
        assert!(Control::new(bad).is_err());
        let (c, rescaled) =
            Control::normalized(vec![Segment { duration: q(2, 1), u: vec![q(1, 1), q(0, 1)] }]).unwrap();
        assert!(rescaled);
        assert_eq!(c.segments()[0], Segment { duration: q(1, 1), u: vec![q(2, 1), q(0, 1)] });
        let alg = h1();
        assert!(endpoint(&alg, &Control::zero(3)).is_err());
    }

    #[test]
    fn p_gamma_examples() {
        let alg: StratifiedAlgebra<Rational> = free_algebra(3).unwrap();
        assert_eq!(p_gamma(&alg, &Control::zero(3)).unwrap().dim(), 0);
        let u = vec![q(1, 1), q(2, 1), q(-1, 1)];
        let single = Control::new(vec![Segment { duration: q(1, 1), u: u.clone() }]).unwrap();
        assert_eq!(p_gamma(&alg, &single).unwrap(), Subspace::span(Ambient::V1, 3, &[u]));
        let two = Control::uniform(vec![vec![q(2, 1), q(0, 1), q(0, 1)], vec![q(0, 1), q(2, 1), q(0, 1)]]).unwrap();
        assert_eq!(p_gamma(&alg, &two).unwrap(), Subspace::span(Ambient::V1, 3, &[unit(3, 0), unit(3, 1)]));
    }

    #[test]
    fn e_gamma_and_classification() {
        let alg = h1();
        let e0 = e_gamma(&alg, &Control::zero(2)).unwrap();
        assert_eq!(e0, Subspace::from_matrix(Ambient::Full, &Matrix::from_columns(3, &[unit(3, 0), unit(3, 1)])));
        let c = classify(&alg, &Control::zero(2)).unwrap();
        assert!(c.abnormal && c.codim_e == 1);
        let u = Control::uniform(vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]]).unwrap();
        assert!(e_gamma(&alg, &u).unwrap().is_whole());
        assert!(!is_abnormal(&alg, &u).unwrap());

        let f: StratifiedAlgebra<Rational> = free_algebra(3).unwrap();
        let single = Control::new(vec![Segment { duration: q(1, 1), u: unit(3, 0) }]).unwrap();
        let e = e_gamma(&f, &single).unwrap();
        assert_eq!(e.dim(), 5);
        assert!(e.contains(&[q(0, 1), q(0, 1), q(0, 1), q(1, 1), q(0, 1), q(0, 1)]));
        assert!(e.contains(&[q(0, 1), q(0, 1), q(0, 1), q(0, 1), q(1, 1), q(0, 1)]));
        let c = classify(&f, &single).unwrap();
        assert!(c.abnormal && c.codim_e == 1);
    }

    #[test]
    fn abelian_like_jacobian_at_zero_control() {
        let alg: StratifiedAlgebra<f64> = heisenberg(1);
        let u = Control::new(vec![
            Segment { duration: 0.25, u: vec![0.0, 0.0] },
            Segment { duration: 0.75, u: vec![0.0, 0.0] },
        ])
        .unwrap();
        let j = numeric_endpoint_jacobian(&alg, &u, DEFAULT_FD_STEP).unwrap();
        for (s, d) in [(0usize, 0.25), (1, 0.75)] {
            for i in 0..2 {
                for row in 0..3 {
                    let expected = if row == i { d } else { 0.0 };
                    assert!((j[(row, s * 2 + i)] - expected).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn heisenberg_two_segment_oracle() {
        let alg: StratifiedAlgebra<f64> = heisenberg(1);
        let u = Control::new(vec![
            Segment { duration: 0.4, u: vec![1.3, -0.2] },
            Segment { duration: 0.6, u: vec![-0.5, 0.9] },
        ])
        .unwrap();
        let check = endpoint_oracle(&alg, &u, DEFAULT_FD_STEP, 1e-8).unwrap();
        assert!(check.max_angle < 1e-5, "angle {}", check.max_angle);
        assert_eq!(check.numeric_rank, 3);
    }

    #[test]
    fn unrefined_single_segment_underdetects() {
        let alg: StratifiedAlgebra<f64> = heisenberg(1);
        let u = Control::new(vec![Segment { duration: 1.0, u: vec![1.0, 0.5] }]).unwrap();
        let j = numeric_endpoint_jacobian(&alg, &u, DEFAULT_FD_STEP).unwrap();
        assert_eq!(linalg::numeric_rank(&j, 1e-8), 2);
        assert_eq!(e_gamma(&alg, &u).unwrap().dim(), 3);
    }
}
