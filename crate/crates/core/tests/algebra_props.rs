mod common;

use carnot_core::constructions::{abelian_extension, heisenberg};
use carnot_core::linalg::Matrix;
use carnot_core::scalar::q;
use carnot_core::{AlgebraElement, Ambient, ExactAlgebra, Rational, StratifiedAlgebra, Subspace, Violation};
use common::{random_invertible, sample_algebras, small_int};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn element(alg: &ExactAlgebra, seed: u64) -> AlgebraElement<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..alg.rank()).map(|_| small_int(&mut rng)).collect();
    let z = (0..alg.dim_v2()).map(|_| small_int(&mut rng)).collect();
    AlgebraElement::new(x, z)
}

fn algebra_index() -> impl Strategy<Value = usize> {
    0..sample_algebras().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric_and_vertical(idx in algebra_index(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let alg = &sample_algebras()[idx].1;
        let (a, b) = (element(alg, s1), element(alg, s2));
        let ab = alg.bracket(&a, &b).unwrap();
        let ba = alg.bracket(&b, &a).unwrap();
        prop_assert_eq!(ab.clone(), ba.neg());
        prop_assert!(ab.x.iter().all(|c| *c == q(0, 1)));
    }

    #[test]
    fn jacobi_holds(idx in algebra_index(), s in any::<u64>()) {
        let alg = &sample_algebras()[idx].1;
        let (a, b, c) = (element(alg, s), element(alg, s ^ 1), element(alg, s ^ 2));
        let inner = alg.bracket(&b, &c).unwrap();
        prop_assert!(alg.bracket(&a, &inner).unwrap().is_zero());
    }

    #[test]
    fn hyperplanes_bracket_onto_v2(idx in algebra_index(), s in any::<u64>()) {
        let alg = &sample_algebras()[idx].1;
        let r = alg.rank();
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let vectors: Vec<Vec<Rational>> = (0..r - 1).map(|_| (0..r).map(|_| small_int(&mut rng)).collect()).collect();
        let p = Subspace::span(Ambient::V1, r, &vectors);
        prop_assume!(p.dim() == r - 1);
        prop_assert!(alg.bracket_space(&p, &alg.v1()).is_whole());
    }

    #[test]
    fn canonical_basis_ignores_spanning_set(n in 2usize..7, d in 1usize..4, s in any::<u64>()) {
        prop_assume!(d <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let vectors: Vec<Vec<Rational>> = (0..d).map(|_| (0..n).map(|_| small_int(&mut rng)).collect()).collect();
        let a = Matrix::from_columns(n, &vectors);
        let sp = Subspace::from_matrix(Ambient::Full, &a);
        let mix = random_invertible(&mut rng, d);
        let other = Subspace::from_matrix(Ambient::Full, &a.mul(&mix));
        prop_assert_eq!(sp.basis(), other.basis());
    }

    #[test]
    fn vector_rank_is_scale_invariant(idx in algebra_index(), s in any::<u64>(), num in 1i64..20, den in 1i64..20, neg in any::<bool>()) {
        let alg = &sample_algebras()[idx].1;
        let x = element(alg, s).x;
        let c = if neg { q(-num, den) } else { q(num, den) };
        let scaled: Vec<Rational> = x.iter().map(|v| v.clone() * c.clone()).collect();
        prop_assert_eq!(alg.vector_rank(&x), alg.vector_rank(&scaled));
    }

    #[test]
    fn float_rank_matches_exact_rank(idx in algebra_index(), s in any::<u64>()) {
        let alg = &sample_algebras()[idx].1;
        let x = element(alg, s).x;
        let fx: Vec<f64> = x.iter().map(|v| carnot_core::Scalar::to_f64(v)).collect();
        prop_assert_eq!(alg.vector_rank(&x), alg.map_scalar::<f64>().vector_rank(&fx));
    }
}

fn h1() -> ExactAlgebra {
    heisenberg(1)
}

#[test]
fn validate_examples() {
    assert!(h1().validate().is_ok());
    let broken = StratifiedAlgebra::from_tensor(2, 1, vec![q(0, 1), q(1, 1), q(1, 1), q(0, 1)]).unwrap();
    let v = broken.validate().unwrap_err();
    assert!(v.iter().any(|x| matches!(x, Violation::NotSkew { .. })));
    let mut consts = vec![q(0, 1); 3 * 3 * 2];
    consts[2] = q(1, 1);
    consts[3 * 2] = q(-1, 1);
    let narrow = StratifiedAlgebra::from_tensor(3, 2, consts).unwrap();
    let v = narrow.validate().unwrap_err();
    assert!(StratifiedAlgebra::from_brackets(3, 2, &[(0, 1, vec![q(1, 1), q(0, 1)])]).is_err());
    assert!(v.iter().any(|x| matches!(x, Violation::SecondLayerNotGenerated { .. })));
}

#[test]
fn ad_matrix_examples() {
    let h = h1();
    let ad = h.ad_matrix(&[q(1, 1), q(0, 1)]);
    assert_eq!(ad, Matrix::from_row_slice(1, 2, &[q(0, 1), q(1, 1)]));
    assert_eq!(h.vector_rank(&[q(0, 1), q(0, 1)]), 0);
    // [X1,X2]=Z1, [X3,X4]=Z2
    let g = StratifiedAlgebra::from_brackets(
        4,
        2,
        &[(0, 1, vec![q(1, 1), q(0, 1)]), (2, 3, vec![q(0, 1), q(1, 1)])],
    )
    .unwrap();
    let x = vec![q(1, 1), q(0, 1), q(1, 1), q(0, 1)];
    assert_eq!(g.vector_rank(&x), 2);
    assert!(!g.in_r_ell(&x, 1));
}

#[test]
fn center_examples() {
    assert_eq!(h1().center_intersect_v1().dim(), 0);
    let c = abelian_extension(&h1(), 1).center_intersect_v1();
    assert_eq!(c, Subspace::span(Ambient::V1, 3, &[vec![q(0, 1), q(0, 1), q(1, 1)]]));
}
