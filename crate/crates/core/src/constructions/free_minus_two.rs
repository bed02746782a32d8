use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::singular_values;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Orthogonal change of basis bringing a commuting `C` into block form.
#[derive(Clone, Debug)]
pub struct CommutingForm {
    /// Columns are the new basis vectors; commutes with `Ω`.
    pub basis: DMatrix<f64>,
    /// `Qᵀ C Q`.
    pub c: DMatrix<f64>,
    /// Block parameters: `c[2p][2p+1]`.
    pub mu: Vec<f64>,
}

/// `None` when `ΩC ≠ CΩ`. Otherwise diagonalizes the complex-linear part
/// of `C` on the first `2k` coordinates, identifying `(x₁, x₂)` with
/// `x₁ + i x₂` so that `Ω` acts as multiplication by `−i`.
pub fn commuting_normal_form(omega: &DMatrix<f64>, c: &DMatrix<f64>, k: usize) -> Option<CommutingForm> {
    let r = omega.nrows();
    let scale = max_abs(c).max(1.0);
    if max_abs(&(omega * c - c * omega)) > 1e-10 * scale {
        return None;
    }
    let mut e = DMatrix::<Complex64>::zeros(k, k);
    for p in 0..k {
        for q in 0..k {
            e[(p, q)] = Complex64::new(c[(2 * p, 2 * q)], -c[(2 * p, 2 * q + 1)]);
        }
    }
    // `E` is skew-Hermitian, so `iE` is Hermitian.
    let h = e.map(|z| z * Complex64::i());
    let u = SymmetricEigen::new(h).eigenvectors;
    let mut basis = DMatrix::<f64>::identity(r, r);
    for j in 0..k {
        for p in 0..k {
            let z = u[(p, j)];
            basis[(2 * p, 2 * j)] = z.re;
            basis[(2 * p + 1, 2 * j)] = z.im;
            basis[(2 * p, 2 * j + 1)] = -z.im;
            basis[(2 * p + 1, 2 * j + 1)] = z.re;
        }
    }
    let c_new = basis.transpose() * c * &basis;
    let mu = (0..k).map(|p| c_new[(2 * p, 2 * p + 1)]).collect();
    Some(CommutingForm { basis, c: c_new, mu })
}

/// Largest entry of `c` outside the allowed pattern: `2 × 2` diagonal blocks
/// on the first `2k` coordinates and a free block on the rest.
pub fn commuting_pattern_residual(c: &DMatrix<f64>, k: usize) -> f64 {
    let r = c.nrows();
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let allowed = if i < 2 * k && j < 2 * k {
                i / 2 == j / 2 && i != j
            } else {
                i >= 2 * k && j >= 2 * k
            };
            if !allowed {
                worst = worst.max(c[(i, j)].abs());
            }
        }
    }
    worst
}

/// Values of `F`, `G` and their gradients (one column per component,
/// rows `x` then `y`).
#[derive(Clone, Debug)]
pub struct FgEval {
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    pub grad_f: DMatrix<f64>,
    pub grad_g: DMatrix<f64>,
}

fn fg_values(omega: &DMatrix<f64>, c: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let k = omega * c - c * omega;
    DVector::from_vec(vec![
        x.dot(x),
        y.dot(y),
        x.dot(y),
        x[0],
        x.dot(&(omega * y)),
        x.dot(&(c * y)),
        y.dot(&(k * x)),
    ])
}

pub fn fg_maps_and_jacobians(omega: &DMatrix<f64>, c: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> FgEval {
    let r = x.len();
    let k = omega * c - c * omega;
    let g = fg_values(omega, c, x, y);
    let mut e1 = DVector::zeros(r);
    e1[0] = 1.0;
    let zero = DVector::<f64>::zeros(r);
    let cols: [(DVector<f64>, DVector<f64>); 7] = [
        (2.0 * x, zero.clone()),
        (zero.clone(), 2.0 * y),
        (y.clone(), x.clone()),
        (e1, zero),
        (omega * y, -(omega * x)),
        (c * y, -(c * x)),
        (-(&k * y), &k * x),
    ];
    let mut grad_g = DMatrix::zeros(2 * r, 7);
    for (j, (top, bottom)) in cols.iter().enumerate() {
        grad_g.view_mut((0, j), (r, 1)).copy_from(top);
        grad_g.view_mut((r, j), (r, 1)).copy_from(bottom);
    }
    FgEval { f: g.rows(0, 6).into_owned(), g, grad_f: grad_g.columns(0, 6).into_owned(), grad_g }
}

/// Central-difference gradient of `G`, same layout as `grad_g`.
pub fn fg_numeric_gradient(
    omega: &DMatrix<f64>,
    c: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    step: f64,
) -> DMatrix<f64> {
    let r = x.len();
    let mut out = DMatrix::zeros(2 * r, 7);
    let xy: DVector<f64> = DVector::from_iterator(2 * r, x.iter().chain(y.iter()).copied());
    for i in 0..2 * r {
        let mut p = xy.clone();
        let mut m = xy.clone();
        p[i] += step;
        m[i] -= step;
        let fp = fg_values(omega, c, &p.rows(0, r).into_owned(), &p.rows(r, r).into_owned());
        let fm = fg_values(omega, c, &m.rows(0, r).into_owned(), &m.rows(r, r).into_owned());
        let d = (fp - fm) / (2.0 * step);
        out.set_row(i, &d.transpose());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelSetKind {
    /// `F = (1,1,0,0,0,0)`, `y·Kx ≠ 0` with `K = ΩC − CΩ`.
    M1,
    /// `G = (1,1,0,0,0,0,0)`, `‖Kx‖² + ‖Ky‖² > 0`.
    M2,
    /// Commuting case: `F = (1,1,0,0,0,0)`, `x, y ∉ ker C`.
    N,
}

const OPEN_MARGIN: f64 = 1e-3;

fn open_conditions(kind: LevelSetKind, omega: &DMatrix<f64>, c: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> bool {
    if y[0].abs() < OPEN_MARGIN {
        return false;
    }
    let k = omega * c - c * omega;
    match kind {
        LevelSetKind::M1 => y.dot(&(&k * x)).abs() > OPEN_MARGIN,
        LevelSetKind::M2 => (&k * x).norm_squared() + (&k * y).norm_squared() > OPEN_MARGIN,
        LevelSetKind::N => (c * x).norm() > OPEN_MARGIN && (c * y).norm() > OPEN_MARGIN,
    }
}

/// Gauss-Newton projection of random starts onto the level set, keeping the
/// first converged point that satisfies the open conditions.
pub fn sample_level_set_point<R: Rng>(
    omega: &DMatrix<f64>,
    c: &DMatrix<f64>,
    kind: LevelSetKind,
    rng: &mut R,
    attempts: usize,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let r = omega.nrows();
    let eqs = if kind == LevelSetKind::M2 { 7 } else { 6 };
    let target = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    for _ in 0..attempts {
        let mut x = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut y = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
        x /= x.norm();
        y /= y.norm();
        for _ in 0..200 {
            let ev = fg_maps_and_jacobians(omega, c, &x, &y);
            let res = (&ev.g - &target).rows(0, eqs).into_owned();
            if res.amax() < 1e-14 {
                break;
            }
            let jac = ev.grad_g.columns(0, eqs).transpose();
            let Ok(step) = jac.svd(true, true).solve(&res, 1e-12) else { break };
            x -= step.rows(0, r);
            y -= step.rows(r, r);
        }
        let res = (fg_values(omega, c, &x, &y) - &target).rows(0, eqs).amax();
        if res < 1e-12 && open_conditions(kind, omega, c, &x, &y) {
            return Some((x, y));
        }
    }
    None
}

/// Numeric rank of a gradient matrix relative to its largest singular value.
pub fn gradient_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|v| **v > tol * top).count()
}
