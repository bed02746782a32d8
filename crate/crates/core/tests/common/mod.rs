#![allow(dead_code)]

use carnot_core::constructions::{abelian_extension, dim7_algebra, free_algebra, heisenberg, product, quotient};
use carnot_core::group::Segment;
use carnot_core::linalg::Matrix;
use carnot_core::scalar::q;
use carnot_core::{Ambient, Control, ExactAlgebra, FloatAlgebra, Rational, StratifiedAlgebra, Subspace};
use rand::Rng;

/// A spread of small groups with different shapes, exact coefficients.
pub fn sample_algebras() -> Vec<(&'static str, ExactAlgebra)> {
    let f3: ExactAlgebra = free_algebra(3).unwrap();
    let f4: ExactAlgebra = free_algebra(4).unwrap();
    let f3q = quotient(&f3, &Subspace::span(Ambient::V2, 3, &[vec![q(0, 1), q(0, 1), q(1, 1)]])).unwrap().algebra;
    vec![
        ("H1", heisenberg(1)),
        ("H2", heisenberg(2)),
        ("H1xR", abelian_extension(&heisenberg(1), 1)),
        ("F3", f3.clone()),
        ("F3/1", f3q.clone()),
        ("F3/1xR", abelian_extension(&f3q, 1)),
        ("H1xH1", product(&heisenberg(1), &heisenberg(1))),
        ("dim7(2)", dim7_algebra(q(2, 1))),
        ("F4", f4),
    ]
}

pub fn float_algebras() -> Vec<(&'static str, FloatAlgebra)> {
    sample_algebras().into_iter().map(|(n, a)| (n, a.map_scalar())).collect()
}

pub fn small_int<R: Rng>(rng: &mut R) -> Rational {
    q(rng.random_range(-3..=3), 1)
}

pub fn random_exact_control<R: Rng>(rng: &mut R, r: usize, max_segments: usize) -> Control<Rational> {
    let n = rng.random_range(1..=max_segments);
    let segments = (0..n)
        .map(|_| Segment { duration: q(rng.random_range(1..=4), 1), u: (0..r).map(|_| small_int(rng)).collect() })
        .collect();
    Control::new(segments).unwrap()
}

pub fn random_float_control<R: Rng>(rng: &mut R, r: usize, max_segments: usize) -> Control<f64> {
    let n = rng.random_range(1..=max_segments);
    let segments = (0..n)
        .map(|_| Segment { duration: rng.random_range(0.2..1.0), u: (0..r).map(|_| rng.random_range(-1.0..1.0)).collect() })
        .collect();
    Control::new(segments).unwrap()
}

/// Invertible integer matrix with small entries.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> Matrix<Rational> {
    loop {
        let data: Vec<Rational> = (0..n * n).map(|_| small_int(rng)).collect();
        let m = Matrix::from_row_slice(n, n, &data);
        if m.rank() == n {
            return m;
        }
    }
}

/// The same algebra written in the horizontal basis given by the columns of
/// `a` and the vertical basis given by the columns of `b`.
pub fn change_basis(alg: &ExactAlgebra, a: &Matrix<Rational>, b: &Matrix<Rational>) -> ExactAlgebra {
    let (r, m) = (alg.rank(), alg.dim_v2());
    let binv = b.inverse().unwrap();
    let mut consts = vec![q(0, 1); r * r * m];
    for i in 0..r {
        for j in 0..r {
            let z = binv.mul_vec(&alg.bracket_x(&a.column(i), &a.column(j)));
            for k in 0..m {
                consts[(i * r + j) * m + k] = z[k].clone();
            }
        }
    }
    StratifiedAlgebra::from_tensor(r, m, consts).unwrap()
}
