//! The abnormal set as a union of images `exp(P ⊕ [P, P])` over planes `P`
//! with `dim P ≤ r − 2` satisfying a bracket predicate, and numerical
//! estimation of the dimension of each stratum `dim P = k`.
//!
//! A stratum is handled in three steps. First a feasible plane is found:
//! either every plane is feasible (checked on random planes) or a damped
//! least-squares descent drives the maximal minors of the plane's bracket
//! matrix to zero. Then the tangent space of the feasible locus is computed
//! in graph coordinates from the derivative of the bracket matrix restricted
//! to its left and right null spaces. Finally the map
//! `(plane, s, t) ↦ exp(Σ sᵢ pᵢ + Σ t_l [p_a, p_b])` is differentiated along
//! that tangent space and its numeric rank is recorded.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra::{Ambient, StratifiedAlgebra, Subspace};
use crate::error::{check_len, Error, Result};
use crate::group::{self, Control, GroupElement, Segment, DEFAULT_FD_STEP};
use crate::linalg::{numeric_rank, orthogonal_complement, Matrix};
use crate::scalar::{rationalize, Scalar, DEFAULT_RANK_TOL};
use crate::Rational;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PredicateMode {
    /// `[P, P] ≠ V₂`.
    BracketPP,
    /// `[P, V₁] ≠ V₂`.
    #[default]
    BracketPV1,
}

impl PredicateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredicateMode::BracketPP => "pp",
            PredicateMode::BracketPV1 => "pv1",
        }
    }
}

impl fmt::Display for PredicateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PredicateMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pp" => Ok(PredicateMode::BracketPP),
            "pv1" => Ok(PredicateMode::BracketPV1),
            other => Err(format!("unknown predicate `{other}` (expected pp or pv1)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbnormalChart<T> {
    pub p: Subspace<T>,
    pub pp: Subspace<T>,
    pub pv1: Subspace<T>,
    pub mode: PredicateMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChartRejection {
    NotHorizontal,
    TooLarge { dim: usize, max: usize },
    PredicateFails(PredicateMode),
}

impl fmt::Display for ChartRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartRejection::NotHorizontal => write!(f, "P is not a subspace of V1"),
            ChartRejection::TooLarge { dim, max } => write!(f, "dim P = {dim} exceeds r - 2 = {max}"),
            ChartRejection::PredicateFails(PredicateMode::BracketPP) => write!(f, "[P,P] = V2"),
            ChartRejection::PredicateFails(PredicateMode::BracketPV1) => write!(f, "[P,V1] = V2"),
        }
    }
}

pub fn chart_from_subspace<T: Scalar>(
    alg: &StratifiedAlgebra<T>,
    p: &Subspace<T>,
    mode: PredicateMode,
) -> std::result::Result<AbnormalChart<T>, ChartRejection> {
    if p.ambient() != Ambient::V1 || p.ambient_dim() != alg.rank() {
        return Err(ChartRejection::NotHorizontal);
    }
    let max = alg.rank().saturating_sub(2);
    if p.dim() > max {
        return Err(ChartRejection::TooLarge { dim: p.dim(), max });
    }
    let pp = alg.bracket_space(p, p);
    let pv1 = alg.bracket_space(p, &alg.v1());
    let holds = match mode {
        PredicateMode::BracketPP => !pp.is_whole(),
        PredicateMode::BracketPV1 => !pv1.is_whole(),
    };
    if !holds {
        return Err(ChartRejection::PredicateFails(mode));
    }
    Ok(AbnormalChart { p: p.clone(), pp, pv1, mode })
}

/// `exp(Σ fᵢ pᵢ + Σ f_{d+l} w_l)` over the canonical bases of `P` and `[P, P]`.
pub fn subgroup_point<T: Scalar>(
    alg: &StratifiedAlgebra<T>,
    chart: &AbnormalChart<T>,
    fiber: &[T],
) -> Result<GroupElement<T>> {
    let d = chart.p.dim();
    check_len("fiber coordinates", d + chart.pp.dim(), fiber.len())?;
    let x = chart.p.basis().mul_vec(&fiber[..d]);
    let z = if chart.pp.dim() == 0 { vec![T::zero(); alg.dim_v2()] } else { chart.pp.basis().mul_vec(&fiber[d..]) };
    Ok(GroupElement::new(x, z))
}

/// A control with values in `P` whose endpoint is `subgroup_point(chart, fiber)`.
///
/// Every vertical term `t[p_a, p_b]` is produced by the commutator loop
/// `exp(t p_a) exp(p_b) exp(−t p_a) exp(−p_b)`; a final segment adds the
/// horizontal part.
pub fn control_into_subgroup<T: Scalar>(
    alg: &StratifiedAlgebra<T>,
    chart: &AbnormalChart<T>,
    fiber: &[T],
) -> Result<Control<T>> {
    let target = subgroup_point(alg, chart, fiber)?;
    let basis = chart.p.basis_vectors();
    let mut pairs = Vec::new();
    let mut cols: Vec<Vec<T>> = Vec::new();
    for a in 0..basis.len() {
        for b in a + 1..basis.len() {
            let w = alg.bracket_x(&basis[a], &basis[b]);
            let mut trial = cols.clone();
            trial.push(w.clone());
            if Subspace::span(Ambient::V2, alg.dim_v2(), &trial).dim() == trial.len() {
                cols = trial;
                pairs.push((a, b));
            }
        }
    }
    let coeffs = if cols.is_empty() {
        Vec::new()
    } else {
        let mut aug = cols.clone();
        aug.push(target.z.clone());
        let mut m = Matrix::from_columns(alg.dim_v2(), &aug);
        let n = cols.len();
        let pivots = m.rref_in_place();
        if pivots.contains(&n) {
            return Err(Error::Hypothesis("vertical part outside [P,P]".into()));
        }
        (0..n).map(|i| m[(i, n)].clone()).collect()
    };
    let mut moves: Vec<Vec<T>> = Vec::new();
    for ((a, b), t) in pairs.iter().zip(&coeffs) {
        if t.is_zero() {
            continue;
        }
        let ta: Vec<T> = basis[*a].iter().map(|v| v.clone() * t.clone()).collect();
        moves.push(ta.clone());
        moves.push(basis[*b].clone());
        moves.push(ta.iter().map(|v| -v.clone()).collect());
        moves.push(basis[*b].iter().map(|v| -v.clone()).collect());
    }
    moves.push(target.x.clone());
    let n = T::from_ratio(moves.len() as i64, 1);
    let duration = T::one() / n.clone();
    let segments =
        moves.into_iter().map(|v| Segment { duration: duration.clone(), u: v.iter().map(|c| c.clone() * n.clone()).collect() }).collect();
    Control::new(segments)
}

/// Graph coordinates: the plane is spanned by the columns of the `r × k`
/// matrix with identity rows at `frame` and `coeffs` in the remaining rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannChartCoords {
    pub frame: Vec<usize>,
    pub coeffs: DMatrix<f64>,
}

impl GrassmannChartCoords {
    pub fn k(&self) -> usize {
        self.frame.len()
    }

    pub fn rank(&self) -> usize {
        self.frame.len() + self.coeffs.nrows()
    }

    fn rest(&self) -> Vec<usize> {
        (0..self.rank()).filter(|i| !self.frame.contains(i)).collect()
    }

    pub fn basis(&self) -> DMatrix<f64> {
        basis_from_coords(&self.frame, &self.rest(), self.coeffs.as_slice(), self.rank())
    }

    /// Frame chosen by partial pivoting on the rows of `q` (`r × k`).
    pub fn from_plane(q: &DMatrix<f64>) -> Self {
        let (r, k) = q.shape();
        let mut m = q.clone();
        let mut frame = Vec::with_capacity(k);
        for j in 0..k {
            let i = (0..r)
                .filter(|i| !frame.contains(i))
                .max_by(|a, b| m[(*a, j)].abs().total_cmp(&m[(*b, j)].abs()))
                .expect("k <= r");
            frame.push(i);
            let piv = m[(i, j)];
            for l in 0..r {
                if l != i {
                    let f = m[(l, j)] / piv;
                    for c in j..k {
                        m[(l, c)] -= f * m[(i, c)];
                    }
                }
            }
        }
        frame.sort_unstable();
        let rest: Vec<usize> = (0..r).filter(|i| !frame.contains(i)).collect();
        let qf = DMatrix::from_fn(k, k, |a, b| q[(frame[a], b)]);
        let qr = DMatrix::from_fn(rest.len(), k, |a, b| q[(rest[a], b)]);
        let inv = qf.try_inverse().expect("pivoted frame is invertible");
        GrassmannChartCoords { frame, coeffs: qr * inv }
    }
}

fn basis_from_coords(frame: &[usize], rest: &[usize], coeffs: &[f64], r: usize) -> DMatrix<f64> {
    let k = frame.len();
    let c = DMatrix::from_column_slice(rest.len(), k, coeffs);
    let mut b = DMatrix::zeros(r, k);
    for (j, &f) in frame.iter().enumerate() {
        b[(f, j)] = 1.0;
    }
    for (a, &row) in rest.iter().enumerate() {
        for j in 0..k {
            b[(row, j)] = c[(a, j)];
        }
    }
    b
}

fn bracket_cols(alg: &StratifiedAlgebra<f64>, x: &[f64], y: &[f64]) -> Vec<f64> {
    alg.bracket_x(x, y)
}

/// Columns `[pᵢ, eⱼ]` (pv1) or `[p_a, p_b]`, `a < b` (pp).
pub fn bracket_matrix(alg: &StratifiedAlgebra<f64>, basis: &DMatrix<f64>, mode: PredicateMode) -> DMatrix<f64> {
    let (r, m, k) = (alg.rank(), alg.dim_v2(), basis.ncols());
    let cols: Vec<Vec<f64>> = (0..k).map(|i| basis.column(i).iter().copied().collect()).collect();
    let mut out = Vec::new();
    match mode {
        PredicateMode::BracketPV1 => {
            for p in &cols {
                for j in 0..r {
                    // [p, e_j]_l = Σ_a p_a c(a, j, l)
                    let z: Vec<f64> =
                        (0..m).map(|l| (0..r).map(|a| p[a] * alg.c(a, j, l)).sum::<f64>()).collect();
                    out.push(z);
                }
            }
        }
        PredicateMode::BracketPP => {
            for a in 0..k {
                for b in a + 1..k {
                    out.push(bracket_cols(alg, &cols[a], &cols[b]));
                }
            }
        }
    }
    DMatrix::from_fn(m, out.len(), |i, j| out[j][i])
}

/// Most maximal minors evaluated individually; beyond this the residual is
/// `sqrt(det(B Bᵀ))`, the norm of the minors vector.
const MAX_MINORS: usize = 20_000;

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 && idx[0] == n - k {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Residual whose zeros are the planes with a rank-deficient bracket matrix.
struct MinorResidual {
    subsets: Option<Vec<Vec<usize>>>,
}

impl MinorResidual {
    fn new(m: usize, n: usize) -> Self {
        let count = binomial(n, m);
        MinorResidual { subsets: (count <= MAX_MINORS).then(|| combinations(n, m)) }
    }

    fn eval(&self, b: &DMatrix<f64>) -> DVector<f64> {
        let m = b.nrows();
        match &self.subsets {
            Some(subsets) => DVector::from_iterator(
                subsets.len(),
                subsets.iter().map(|s| DMatrix::from_fn(m, m, |i, j| b[(i, s[j])]).determinant()),
            ),
            None => DVector::from_element(1, (b * b.transpose()).determinant().max(0.0).sqrt()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { restarts: 50, iterations: 500 }
    }
}

/// Residual threshold for accepting a plane.
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FeasiblePlane {
    pub coords: GrassmannChartCoords,
    /// Orthonormal basis of the plane.
    pub orthonormal: DMatrix<f64>,
    pub residual: f64,
    /// Every `k`-plane satisfies the predicate.
    pub generic: bool,
    /// Exact rank drop at a rational plane near the found one, when tried.
    pub certified: Option<bool>,
}

fn random_orthonormal<R: Rng>(rng: &mut R, r: usize, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(r, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `(Q + Q⊥Δ)(I + ΔᵀΔ)^{-1/2}`, orthonormal and smooth in `Δ`.
fn retract(q: &DMatrix<f64>, qperp: &DMatrix<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let y = q + qperp * delta;
    let g = DMatrix::identity(q.ncols(), q.ncols()) + delta.transpose() * delta;
    let eig = SymmetricEigen::new(g);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    y * (&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn tensor_scale(alg: &StratifiedAlgebra<f64>) -> f64 {
    alg.tensor().iter().fold(0.0f64, |a, c| a.max(c.abs()))
}

fn predicate_holds(alg: &StratifiedAlgebra<f64>, basis: &DMatrix<f64>, mode: PredicateMode) -> bool {
    let b = bracket_matrix(alg, basis, mode);
    let floor = DEFAULT_RANK_TOL * tensor_scale(alg);
    let rank = crate::linalg::singular_values(&b).iter().filter(|s| **s > floor).count();
    b.ncols() < b.nrows() || rank.min(numeric_rank(&b, DEFAULT_RANK_TOL)) < alg.dim_v2()
}

/// Whether random `k`-planes satisfy the predicate (tested on two planes).
pub fn generically_feasible<R: Rng>(alg: &StratifiedAlgebra<f64>, k: usize, mode: PredicateMode, rng: &mut R) -> bool {
    (0..2).all(|_| predicate_holds(alg, &random_orthonormal(rng, alg.rank(), k), mode))
}

fn certify(alg: &StratifiedAlgebra<f64>, coords: &GrassmannChartCoords, mode: PredicateMode) -> bool {
    let exact: StratifiedAlgebra<Rational> = alg.map_scalar();
    let b = coords.basis();
    let cols: Vec<Vec<Rational>> =
        (0..b.ncols()).map(|j| b.column(j).iter().map(|v| rationalize(*v, 1000)).collect()).collect();
    let p = Subspace::span(Ambient::V1, alg.rank(), &cols);
    if p.dim() != cols.len() {
        return false;
    }
    let target = match mode {
        PredicateMode::BracketPP => exact.bracket_space(&p, &p),
        PredicateMode::BracketPV1 => exact.bracket_space(&p, &exact.v1()),
    };
    !target.is_whole()
}

/// Damped Gauss-Newton on the minors residual over the Grassmannian,
/// re-centering the chart at every accepted step.
fn descend<R: Rng>(
    alg: &StratifiedAlgebra<f64>,
    k: usize,
    mode: PredicateMode,
    rng: &mut R,
    budget: SearchBudget,
) -> Option<(DMatrix<f64>, f64)> {
    let r = alg.rank();
    let probe = bracket_matrix(alg, &DMatrix::identity(r, k), mode);
    let minors = MinorResidual::new(alg.dim_v2(), probe.ncols());
    let res = |q: &DMatrix<f64>| minors.eval(&bracket_matrix(alg, q, mode));
    let d = (r - k) * k;
    let h = 1e-7;
    for _ in 0..budget.restarts {
        let mut q = random_orthonormal(rng, r, k);
        let mut f = res(&q);
        let mut mu = 1e-3;
        let mut found_at: Option<usize> = None;
        let mut last_check = f.norm();
        for it in 0..budget.iterations {
            let norm = f.norm();
            if norm < FEASIBILITY_TOL && found_at.is_none() {
                found_at = Some(it);
            }
            if let Some(start) = found_at {
                if norm < 1e-15 || it >= start + 40 {
                    break;
                }
            }
            if it > 0 && it % 25 == 0 && found_at.is_none() {
                if norm > 0.95 * last_check {
                    break;
                }
                last_check = norm;
            }
            let qperp = orthogonal_complement(&q);
            let mut jac = DMatrix::zeros(f.len(), d);
            for p in 0..d {
                let mut e = DMatrix::zeros(r - k, k);
                e[(p % (r - k), p / (r - k))] = h;
                let fp = res(&retract(&q, &qperp, &e));
                let fm = res(&retract(&q, &qperp, &(-&e)));
                jac.set_column(p, &((fp - fm) / (2.0 * h)));
            }
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &f;
            let mut improved = false;
            for _ in 0..12 {
                let a = &jtj + DMatrix::identity(d, d) * (mu * (1.0 + jtj.diagonal().max()));
                let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                    mu *= 10.0;
                    continue;
                };
                let delta = DMatrix::from_column_slice(r - k, k, step.as_slice());
                let cand = retract(&q, &qperp, &delta);
                let fc = res(&cand);
                if fc.norm() < norm {
                    q = cand;
                    f = fc;
                    mu = (mu / 3.0).max(1e-15);
                    improved = true;
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        let norm = f.norm();
        let settled = robust_rank(&bracket_matrix(alg, &q, mode), tensor_scale(alg)) < alg.dim_v2();
        if norm < FEASIBILITY_TOL && settled {
            return Some((q, norm));
        }
    }
    None
}

/// Singular values below `GAP_HIGH · scale` are treated as zero.
///
/// Where the minors vanish to order `q` a plane is only located to about
/// `ε^{1/q}`, so anything vanishing on the locus can be as large as ~1e-8
/// at an accepted plane.
const GAP_HIGH: f64 = 1e-6;

/// Number of singular values of `b` that are clearly nonzero.
fn robust_rank(b: &DMatrix<f64>, scale: f64) -> usize {
    let sv = crate::linalg::singular_values(b);
    let top = sv.iter().copied().fold(scale, f64::max);
    sv.iter().filter(|s| **s > GAP_HIGH * top).count()
}

/// Finds a `k`-plane satisfying the predicate; `generic` skips the
/// generic-feasibility probe when already known.
pub fn find_feasible_plane_with<R: Rng>(
    alg: &StratifiedAlgebra<f64>,
    k: usize,
    mode: PredicateMode,
    rng: &mut R,
    budget: SearchBudget,
    generic: Option<bool>,
) -> Option<FeasiblePlane> {
    assert!(k >= 1 && k + 2 <= alg.rank(), "plane dimension out of range");
    let generic = generic.unwrap_or_else(|| generically_feasible(alg, k, mode, rng));
    if generic {
        let q = random_orthonormal(rng, alg.rank(), k);
        let coords = GrassmannChartCoords::from_plane(&q);
        return Some(FeasiblePlane { coords, orthonormal: q, residual: 0.0, generic: true, certified: None });
    }
    let (q, residual) = descend(alg, k, mode, rng, budget)?;
    let coords = GrassmannChartCoords::from_plane(&q);
    let certified = Some(certify(alg, &coords, mode));
    Some(FeasiblePlane { coords, orthonormal: q, residual, generic: false, certified })
}

pub fn find_feasible_plane(
    alg: &StratifiedAlgebra<f64>,
    k: usize,
    mode: PredicateMode,
    seed: u64,
) -> Option<FeasiblePlane> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    find_feasible_plane_with(alg, k, mode, &mut rng, SearchBudget::default(), None)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateConfig {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub predicate: PredicateMode,
    pub fd_step: f64,
    pub budget: SearchBudget,
    /// A stratum is declared empty when this many leading samples all fail.
    pub early_stop: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            samples: 200,
            tol: DEFAULT_RANK_TOL,
            seed: 42,
            predicate: PredicateMode::BracketPV1,
            fd_step: DEFAULT_FD_STEP,
            budget: SearchBudget::default(),
            early_stop: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub rank: usize,
    pub residual: f64,
    pub certified: Option<bool>,
    /// Group point `exp(Σ sᵢ pᵢ + Σ t_l [p_a, p_b])` at the sampled fiber.
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratumReport {
    pub k: usize,
    pub predicate: PredicateMode,
    pub samples: usize,
    pub successful: usize,
    /// `None` for an empty stratum.
    pub estimated_dim: Option<usize>,
    pub max_observed_rank: usize,
    pub feasibility_residual: f64,
    pub generic: bool,
    pub certified: usize,
    pub tolerance: f64,
    pub seed: u64,
}

fn sample_rng(seed: u64, k: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 40) | index);
    rng
}

const PROBE_INDEX: u64 = (1 << 40) - 1;

/// Local parametrization of a stratum around a feasible plane.
struct StratumMap<'a> {
    alg: &'a StratifiedAlgebra<f64>,
    frame: Vec<usize>,
    rest: Vec<usize>,
    c0: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl StratumMap<'_> {
    fn basis(&self, c: &[f64]) -> DMatrix<f64> {
        basis_from_coords(&self.frame, &self.rest, c, self.alg.rank())
    }

    fn eval(&self, c: &[f64], s: &[f64], t: &[f64]) -> Vec<f64> {
        let b = self.basis(c);
        let col = |i: usize| -> Vec<f64> { b.column(i).iter().copied().collect() };
        let x: Vec<f64> = (&b * DVector::from_column_slice(s)).iter().copied().collect();
        let mut z = vec![0.0; self.alg.dim_v2()];
        for (&(a, bb), tl) in self.pairs.iter().zip(t) {
            for (zi, w) in z.iter_mut().zip(self.alg.bracket_x(&col(a), &col(bb))) {
                *zi += tl * w;
            }
        }
        x.into_iter().chain(z).collect()
    }
}

fn independent_pairs(alg: &StratifiedAlgebra<f64>, basis: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let k = basis.ncols();
    let scale = tensor_scale(alg);
    let col = |i: usize| -> Vec<f64> { basis.column(i).iter().copied().collect() };
    let mut pairs = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let w = alg.bracket_x(&col(a), &col(b));
            let mut trial = cols.clone();
            trial.push(w);
            let m = DMatrix::from_fn(alg.dim_v2(), trial.len(), |i, j| trial[j][i]);
            // a plane at a double root of the minors is only located to about
            // sqrt(eps), so brackets vanishing on the locus need the gap threshold
            let sv = crate::linalg::singular_values(&m);
            let top = sv.iter().copied().fold(scale, f64::max);
            if sv.len() == trial.len() && sv.iter().all(|s| *s > GAP_HIGH * top) {
                cols = trial;
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Damped Gauss-Newton in chart coordinates from `start` onto the locus of
/// planes satisfying the predicate.
fn project_to_locus(map: &StratumMap<'_>, mode: PredicateMode, minors: &MinorResidual, start: &[f64]) -> Option<Vec<f64>> {
    let res = |c: &[f64]| minors.eval(&bracket_matrix(map.alg, &map.basis(c), mode));
    let d = start.len();
    let h = 1e-7;
    let mut c = start.to_vec();
    let mut f = res(&c);
    let mut mu = 1e-3;
    let mut found_at: Option<usize> = None;
    for it in 0..200 {
        let norm = f.norm();
        if norm < FEASIBILITY_TOL && found_at.is_none() {
            found_at = Some(it);
        }
        if let Some(first) = found_at {
            if norm < 1e-15 || it >= first + 40 {
                break;
            }
        }
        let mut jac = DMatrix::zeros(f.len(), d);
        for p in 0..d {
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[p] += h;
            cm[p] -= h;
            jac.set_column(p, &((res(&cp) - res(&cm)) / (2.0 * h)));
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &f;
        let mut improved = false;
        for _ in 0..12 {
            let a = &jtj + DMatrix::identity(d, d) * (mu * (1.0 + jtj.diagonal().max()));
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = c.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let fc = res(&cand);
            if fc.norm() < norm {
                c = cand;
                f = fc;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let settled = robust_rank(&bracket_matrix(map.alg, &map.basis(&c), mode), tensor_scale(map.alg)) < map.alg.dim_v2();
    (f.norm() < FEASIBILITY_TOL && settled).then_some(c)
}

/// Step to a generic point of the locus near the found plane.
const GENERIC_MOVE: f64 = 1e-1;
/// Radius of the neighbourhood sampled for the tangent space.
const NEIGHBOUR_RADIUS: f64 = 1e-3;
/// Relative size (to the radius) of a singular value that counts as a
/// tangent direction; far above the location error of a plane and the
/// `O(radius²)` curvature term.
const TANGENT_CUTOFF: f64 = 2e-2;

fn random_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.into_iter().map(|x| x / n).collect()
}

/// Moves `map.c0` to a generic nearby point of the locus and returns the
/// tangent directions there (columns), spanned by differences to projected
/// neighbours.
///
/// Linearizing the minors only gives the Zariski tangent space, which is
/// too large wherever the determinantal equations are not reduced, and a
/// found plane is often a special point of the locus.
fn sampled_tangent<R: Rng>(map: &mut StratumMap<'_>, mode: PredicateMode, rng: &mut R) -> DMatrix<f64> {
    let d = map.c0.len();
    let probe = bracket_matrix(map.alg, &map.basis(&map.c0), mode);
    let minors = MinorResidual::new(probe.nrows(), probe.ncols());
    let shifted: Vec<f64> = map.c0.iter().zip(random_direction(rng, d)).map(|(a, b)| a + GENERIC_MOVE * b).collect();
    if let Some(c1) = project_to_locus(map, mode, &minors, &shifted) {
        map.c0 = c1;
    }
    let mut diffs: Vec<Vec<f64>> = Vec::new();
    for _ in 0..d + 4 {
        let start: Vec<f64> =
            map.c0.iter().zip(random_direction(rng, d)).map(|(a, b)| a + NEIGHBOUR_RADIUS * b).collect();
        let Some(c) = project_to_locus(map, mode, &minors, &start) else { continue };
        let diff: Vec<f64> = c.iter().zip(&map.c0).map(|(a, b)| a - b).collect();
        if diff.iter().map(|x| x * x).sum::<f64>().sqrt() < 10.0 * NEIGHBOUR_RADIUS {
            diffs.push(diff);
        }
    }
    if diffs.is_empty() {
        return DMatrix::zeros(d, 0);
    }
    let m = DMatrix::from_fn(d, diffs.len(), |i, j| diffs[j][i]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("U");
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > TANGENT_CUTOFF * NEIGHBOUR_RADIUS).collect();
    DMatrix::from_fn(d, keep.len(), |i, j| u[(i, keep[j])])
}

fn run_sample(
    alg: &StratifiedAlgebra<f64>,
    k: usize,
    config: &EstimateConfig,
    generic: bool,
    index: u64,
) -> Option<SampleOutcome> {
    let mut rng = sample_rng(config.seed, k, index);
    let plane = find_feasible_plane_with(alg, k, config.predicate, &mut rng, config.budget, Some(generic))?;
    let mut map = StratumMap {
        alg,
        frame: plane.coords.frame.clone(),
        rest: plane.coords.rest(),
        c0: plane.coords.coeffs.as_slice().to_vec(),
        pairs: Vec::new(),
    };
    let tangent = if generic {
        DMatrix::identity(map.c0.len(), map.c0.len())
    } else {
        sampled_tangent(&mut map, config.predicate, &mut rng)
    };
    map.pairs = independent_pairs(alg, &map.basis(&map.c0));
    let s: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let t: Vec<f64> = (0..map.pairs.len()).map(|_| rng.sample(StandardNormal)).collect();
    let h = config.fd_step;
    let dim = alg.dim();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..tangent.ncols() {
        let dir: Vec<f64> = tangent.column(j).iter().copied().collect();
        let cp: Vec<f64> = map.c0.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
        let cm: Vec<f64> = map.c0.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
        let (fp, fm) = (map.eval(&cp, &s, &t), map.eval(&cm, &s, &t));
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    // Φ is linear in the fiber coordinates
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        cols.push(map.eval(&map.c0, &e, &vec![0.0; t.len()]));
    }
    for l in 0..t.len() {
        let mut e = vec![0.0; t.len()];
        e[l] = 1.0;
        cols.push(map.eval(&map.c0, &vec![0.0; k], &e));
    }
    let jac = DMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i]);
    Some(SampleOutcome {
        rank: numeric_rank(&jac, config.tol),
        residual: plane.residual,
        certified: plane.certified,
        point: map.eval(&map.c0, &s, &t),
    })
}

/// Per-sample outcomes of a stratum (`None` = no feasible plane found).
pub fn stratum_samples(alg: &StratifiedAlgebra<f64>, k: usize, config: &EstimateConfig) -> (bool, Vec<Option<SampleOutcome>>) {
    let mut probe = sample_rng(config.seed, k, PROBE_INDEX);
    let generic = generically_feasible(alg, k, config.predicate, &mut probe);
    let head = config.early_stop.min(config.samples);
    let mut out: Vec<Option<SampleOutcome>> =
        (0..head as u64).into_par_iter().map(|i| run_sample(alg, k, config, generic, i)).collect();
    if head > 0 && out.iter().all(Option::is_none) {
        return (generic, out);
    }
    let tail: Vec<Option<SampleOutcome>> = (head as u64..config.samples as u64)
        .into_par_iter()
        .map(|i| run_sample(alg, k, config, generic, i))
        .collect();
    out.extend(tail);
    (generic, out)
}

pub fn summarize_stratum(
    k: usize,
    config: &EstimateConfig,
    generic: bool,
    outcomes: &[Option<SampleOutcome>],
) -> StratumReport {
    let ok: Vec<&SampleOutcome> = outcomes.iter().flatten().collect();
    let max_rank = ok.iter().map(|o| o.rank).max();
    StratumReport {
        k,
        predicate: config.predicate,
        samples: config.samples,
        successful: ok.len(),
        estimated_dim: max_rank,
        max_observed_rank: max_rank.unwrap_or(0),
        feasibility_residual: ok.iter().map(|o| o.residual).fold(0.0, f64::max),
        generic,
        certified: ok.iter().filter(|o| o.certified == Some(true)).count(),
        tolerance: config.tol,
        seed: config.seed,
    }
}

/// Dimension estimate of the stratum of `k`-planes; `k = 0` is `{e}`.
pub fn estimate_stratum_dim(alg: &StratifiedAlgebra<f64>, k: usize, config: &EstimateConfig) -> StratumReport {
    if k == 0 {
        return StratumReport {
            k,
            predicate: config.predicate,
            samples: config.samples,
            successful: config.samples,
            estimated_dim: Some(0),
            max_observed_rank: 0,
            feasibility_residual: 0.0,
            generic: true,
            certified: 0,
            tolerance: config.tol,
            seed: config.seed,
        };
    }
    let (generic, outcomes) = stratum_samples(alg, k, config);
    summarize_stratum(k, config, generic, &outcomes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbnReport {
    pub dim_g: usize,
    pub strata: Vec<StratumReport>,
    pub estimated_dim: usize,
    /// Dimension found by a family-specific parametrization, when supplied.
    pub construction_dim: Option<usize>,
}

impl AbnReport {
    pub fn codim(&self) -> usize {
        self.dim_g - self.estimated_dim
    }

    pub fn with_construction_dim(mut self, d: usize) -> Self {
        self.construction_dim = Some(d);
        self
    }

    /// The family-specific parametrization found more than the generic search.
    pub fn construction_exceeds(&self) -> bool {
        self.construction_dim.is_some_and(|d| d > self.estimated_dim)
    }
}

/// Maximum over the strata `k = 0..=r−2`.
pub fn estimate_abn_dim(alg: &StratifiedAlgebra<f64>, config: &EstimateConfig) -> AbnReport {
    let kmax = alg.rank().saturating_sub(2);
    let strata: Vec<StratumReport> = (0..=kmax).map(|k| estimate_stratum_dim(alg, k, config)).collect();
    let estimated_dim = strata.iter().filter_map(|s| s.estimated_dim).max().unwrap_or(0);
    AbnReport { dim_g: alg.dim(), strata, estimated_dim, construction_dim: None }
}

/// Classifies the control that traces a path inside `exp(P ⊕ [P, P])`.
pub fn sandwich_check<T: Scalar>(alg: &StratifiedAlgebra<T>, chart: &AbnormalChart<T>, fiber: &[T]) -> Result<bool> {
    let u = control_into_subgroup(alg, chart, fiber)?;
    let end = group::endpoint(alg, &u)?;
    let target = subgroup_point(alg, chart, fiber)?;
    let close = end
        .to_vec()
        .iter()
        .zip(target.to_vec())
        .all(|(a, b)| (a.clone() - b).is_negligible(1.0 + a.to_f64().abs()));
    Ok(close && group::is_abnormal(alg, &u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::unit;
    use crate::constructions::{abelian_extension, dim7_algebra, free_algebra, heisenberg, product};
    use crate::scalar::q;

    fn cfg(samples: usize) -> EstimateConfig {
        EstimateConfig { samples, ..EstimateConfig::default() }
    }

    #[test]
    fn combinations_enumerate_subsets() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(5, 5), vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(combinations(3, 1), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(binomial(12, 3), 220);
    }

    #[test]
    fn minor_residual_matches_gram_determinant() {
        let b = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.5, -1.0, 0.0, 1.0, 3.0, 2.0]);
        let full = MinorResidual::new(2, 4).eval(&b).norm();
        let gram = MinorResidual { subsets: None }.eval(&b)[0];
        assert!((full - gram).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_charts() {
        let h1: StratifiedAlgebra<Rational> = heisenberg(1);
        let p = Subspace::span(Ambient::V1, 2, &[unit(2, 0)]);
        assert_eq!(
            chart_from_subspace(&h1, &p, PredicateMode::BracketPV1),
            Err(ChartRejection::TooLarge { dim: 1, max: 0 })
        );
        assert!(chart_from_subspace(&h1, &Subspace::zero(Ambient::V1, 2), PredicateMode::BracketPV1).is_ok());
    }

    #[test]
    fn free_four_chart_and_points() {
        let f4: StratifiedAlgebra<Rational> = free_algebra(4).unwrap();
        let p = Subspace::span(Ambient::V1, 4, &[unit(4, 0), unit(4, 1)]);
        let chart = chart_from_subspace(&f4, &p, PredicateMode::BracketPV1).unwrap();
        assert_eq!((chart.pp.dim(), chart.pv1.dim()), (1, 5));
        let hyper = Subspace::span(Ambient::V1, 4, &[unit(4, 0), unit(4, 1), unit(4, 2)]);
        assert!(matches!(chart_from_subspace(&f4, &hyper, PredicateMode::BracketPV1), Err(ChartRejection::TooLarge { .. })));
        let zero = subgroup_point(&f4, &chart, &[q(0, 1), q(0, 1), q(0, 1)]).unwrap();
        assert!(zero.is_zero());
        let e1 = subgroup_point(&f4, &chart, &[q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        assert_eq!(e1.x, unit(4, 0));
        let fiber = [q(1, 1), q(1, 1), q(1, 1)];
        let g = subgroup_point(&f4, &chart, &fiber).unwrap();
        assert_eq!(g.z, unit(6, 0));
        let u = control_into_subgroup(&f4, &chart, &fiber).unwrap();
        assert_eq!(group::endpoint(&f4, &u).unwrap(), g);
        assert!(group::is_abnormal(&f4, &u).unwrap());
        assert!(sandwich_check(&f4, &chart, &[q(2, 3), q(-1, 5), q(7, 2)]).unwrap());
    }

    #[test]
    fn free_three_generic_and_dimension() {
        let f3: StratifiedAlgebra<f64> = free_algebra(3).unwrap();
        let plane = find_feasible_plane(&f3, 1, PredicateMode::BracketPV1, 5).unwrap();
        assert!(plane.generic);
        let rep = estimate_abn_dim(&f3, &cfg(20));
        assert_eq!(rep.estimated_dim, 3);
        assert_eq!(rep.codim(), 3);
    }

    #[test]
    fn heisenberg_strata_are_empty() {
        let h2: StratifiedAlgebra<f64> = heisenberg(2);
        assert!(find_feasible_plane(&h2, 2, PredicateMode::BracketPV1, 1).is_none());
        let rep = estimate_abn_dim(&h2, &cfg(10));
        assert_eq!(rep.estimated_dim, 0);
        assert!(rep.strata[1..].iter().all(|s| s.estimated_dim.is_none()));
    }

    #[test]
    fn padded_heisenberg_dimension() {
        let h: StratifiedAlgebra<f64> = abelian_extension(&heisenberg(1), 1);
        let plane = find_feasible_plane(&h, 1, PredicateMode::BracketPV1, 3).unwrap();
        assert!(!plane.generic);
        assert_eq!(plane.certified, Some(true));
        assert_eq!(estimate_abn_dim(&h, &cfg(10)).estimated_dim, 1);
        let hh: StratifiedAlgebra<f64> = product(&heisenberg(1), &heisenberg(1));
        assert_eq!(estimate_abn_dim(&hh, &cfg(10)).estimated_dim, 3);
    }

    #[test]
    fn dim7_plane_lies_on_quadric() {
        let alg: StratifiedAlgebra<f64> = dim7_algebra(1.0);
        let plane = find_feasible_plane(&alg, 2, PredicateMode::BracketPV1, 11).unwrap();
        let b = &plane.orthonormal;
        for j in 0..2 {
            let x = b.column(j);
            assert!((x[0] * x[2] + x[1] * x[3]).abs() < 1e-8);
        }
        assert_eq!(estimate_abn_dim(&alg, &cfg(20)).estimated_dim, 4);
    }
}
