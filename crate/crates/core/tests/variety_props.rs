mod common;

use carnot_core::constructions::{abelian_extension, dim7_algebra, feasible73, free_algebra, heisenberg, product, quotient};
use carnot_core::scalar::q;
use carnot_core::variety::{
    chart_from_subspace, estimate_abn_dim, estimate_stratum_dim, find_feasible_plane, sandwich_check, subgroup_point,
    ChartRejection, EstimateConfig, PredicateMode,
};
use carnot_core::{Ambient, ExactAlgebra, FloatAlgebra, Rational, Subspace};
use common::small_int;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(samples: usize) -> EstimateConfig {
    EstimateConfig { samples, ..EstimateConfig::default() }
}

fn free_dim(r: usize) -> usize {
    (r * r + r) / 2
}

fn e(r: usize, i: usize) -> Vec<Rational> {
    (0..r).map(|j| q((i == j) as i64, 1)).collect()
}

fn f4_quotient(w: &[Vec<i64>]) -> FloatAlgebra {
    let f4: ExactAlgebra = free_algebra(4).unwrap();
    let w: Vec<Vec<Rational>> = w.iter().map(|v| v.iter().map(|c| q(*c, 1)).collect()).collect();
    quotient(&f4, &Subspace::span(Ambient::V2, 6, &w)).unwrap().algebra.map_scalar()
}

/// `[X₁,X₃] = −[X₂,X₄] = Z₁`, `[X₁,X₄] = [X₂,X₃] = Z₂`: every nonzero
/// horizontal vector has rank 2.
fn complex_heisenberg() -> FloatAlgebra {
    carnot_core::StratifiedAlgebra::from_brackets(
        4,
        2,
        &[(0, 2, vec![1.0, 0.0]), (0, 3, vec![0.0, 1.0]), (1, 2, vec![0.0, 1.0]), (1, 3, vec![-1.0, 0.0])],
    )
    .unwrap()
}

/// Groups whose abnormal set has a known dimension.
fn known_groups() -> Vec<(&'static str, FloatAlgebra, usize)> {
    let f3q: ExactAlgebra =
        quotient(&free_algebra(3).unwrap(), &Subspace::span(Ambient::V2, 3, &[vec![q(0, 1), q(0, 1), q(1, 1)]]))
            .unwrap()
            .algebra;
    vec![
        ("H1xR", abelian_extension(&heisenberg::<f64>(1), 1), 1),
        ("H1xR2", abelian_extension(&heisenberg::<f64>(1), 2), 2),
        ("F3/1", f3q.map_scalar(), 2),
        ("F3/1xR", abelian_extension(&f3q, 1).map_scalar(), 3),
        ("H1xH1", product(&heisenberg::<f64>(1), &heisenberg::<f64>(1)), 3),
        ("dim7(1)", dim7_algebra(1.0), 4),
        ("L", f4_quotient(&[vec![1, 0, 0, 0, 0, 0], vec![0, 0, 0, 0, 0, 1], vec![0, 1, 0, 0, 1, 0], vec![0, 0, 1, 0, 0, 0]]), 2),
        ("CHxR", abelian_extension(&complex_heisenberg(), 1), 1),
    ]
}

#[test]
fn free_groups_have_codimension_three() {
    for r in 3..=6 {
        let f: FloatAlgebra = free_algebra(r).unwrap();
        let rep = estimate_abn_dim(&f, &cfg(200));
        assert_eq!(rep.estimated_dim, free_dim(r) - 3, "F{r}");
    }
}

#[test]
fn free_strata_follow_the_count() {
    for r in 4..=6 {
        let f: FloatAlgebra = free_algebra(r).unwrap();
        for h in 3..r {
            let rep = estimate_stratum_dim(&f, r - h, &cfg(50));
            assert_eq!(rep.estimated_dim, Some(free_dim(r) - h * (h + 1) / 2), "F{r}, h = {h}");
        }
    }
}

#[test]
fn heisenberg_strata_are_empty() {
    for n in 1..=3 {
        let rep = estimate_abn_dim(&heisenberg::<f64>(n), &cfg(50));
        assert_eq!(rep.estimated_dim, 0);
        assert!(rep.strata.iter().skip(1).all(|s| s.estimated_dim.is_none()));
    }
}

#[test]
fn known_dimensions_are_recovered() {
    for (name, alg, dim) in known_groups() {
        assert_eq!(estimate_abn_dim(&alg, &cfg(100)).estimated_dim, dim, "{name}");
    }
}

#[test]
fn rank_four_two_dimensional_second_layer_stays_below_r_minus_one() {
    let groups = [
        abelian_extension(&heisenberg::<f64>(1), 2),
        product(&heisenberg::<f64>(1), &heisenberg::<f64>(1)),
        f4_quotient(&[vec![1, 0, 0, 0, 0, 0], vec![0, 0, 0, 0, 0, 1], vec![0, 1, 0, 0, 1, 0], vec![0, 0, 1, 0, 0, 0]]),
    ];
    for alg in groups.into_iter().chain([complex_heisenberg()]) {
        assert!(estimate_abn_dim(&alg, &cfg(100)).estimated_dim <= 3);
    }
}

#[test]
fn estimates_are_stable_under_tolerance() {
    for (name, alg, dim) in known_groups() {
        for tol in [1e-9, 1e-8, 1e-7, 1e-6] {
            let c = EstimateConfig { samples: 40, tol, ..EstimateConfig::default() };
            assert_eq!(estimate_abn_dim(&alg, &c).estimated_dim, dim, "{name} at tol {tol}");
        }
    }
}

#[test]
fn reports_are_deterministic_and_monotone_in_samples() {
    for (name, alg, _) in known_groups() {
        let a = estimate_abn_dim(&alg, &cfg(30));
        let b = estimate_abn_dim(&alg, &cfg(30));
        assert_eq!(a, b, "{name}");
        let more = estimate_abn_dim(&alg, &cfg(60));
        for (s, t) in a.strata.iter().zip(&more.strata) {
            assert!(s.estimated_dim <= t.estimated_dim, "{name} k = {}", s.k);
        }
    }
}

#[test]
fn chart_examples() {
    let h1: ExactAlgebra = heisenberg(1);
    let line = Subspace::span(Ambient::V1, 2, &[e(2, 0)]);
    assert_eq!(
        chart_from_subspace(&h1, &line, PredicateMode::BracketPV1),
        Err(ChartRejection::TooLarge { dim: 1, max: 0 })
    );
    assert!(chart_from_subspace(&h1, &Subspace::zero(Ambient::V1, 2), PredicateMode::BracketPV1).is_ok());

    let f4: ExactAlgebra = free_algebra(4).unwrap();
    let p = Subspace::span(Ambient::V1, 4, &[e(4, 0), e(4, 1)]);
    let chart = chart_from_subspace(&f4, &p, PredicateMode::BracketPV1).unwrap();
    assert_eq!(chart.pp.dim(), 1);
    assert_eq!(chart.pv1.dim(), 5);
    let hyper = Subspace::span(Ambient::V1, 4, &[e(4, 0), e(4, 1), e(4, 2)]);
    assert!(matches!(chart_from_subspace(&f4, &hyper, PredicateMode::BracketPP), Err(ChartRejection::TooLarge { .. })));

    let point = subgroup_point(&f4, &chart, &[q(1, 1), q(0, 1), q(0, 1)]).unwrap();
    assert_eq!(point.x, e(4, 0));
    assert!(point.z.iter().all(|c| *c == q(0, 1)));
    assert!(sandwich_check(&f4, &chart, &[q(1, 1), q(1, 1), q(1, 1)]).unwrap());
}

#[test]
fn feasible_plane_examples() {
    let f4: FloatAlgebra = free_algebra(4).unwrap();
    assert!(find_feasible_plane(&f4, 2, PredicateMode::BracketPV1, 1).unwrap().generic);
    assert!(find_feasible_plane(&heisenberg::<f64>(2), 2, PredicateMode::BracketPV1, 1).is_none());
    let plane = find_feasible_plane(&dim7_algebra(1.0), 2, PredicateMode::BracketPV1, 3).unwrap();
    assert!(plane.residual < 1e-10);
    let basis = plane.coords.basis();
    for j in 0..2 {
        let x: Vec<f64> = basis.column(j).iter().copied().collect();
        let quad = x[0] * x[2] + x[1] * x[3];
        assert!(quad.abs() < 1e-8, "quadric residual {quad}");
        assert!(feasible73(&x, &1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn curves_inside_the_subgroup_are_abnormal(s in any::<u64>(), which in 0usize..4) {
        let alg: ExactAlgebra = match which {
            0 => free_algebra(4).unwrap(),
            1 => free_algebra(5).unwrap(),
            2 => dim7_algebra(q(1, 1)),
            _ => abelian_extension(&free_algebra(3).unwrap(), 1),
        };
        let r = alg.rank();
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let k = rand::Rng::random_range(&mut rng, 1..=r - 2);
        let vectors: Vec<Vec<Rational>> = (0..k).map(|_| (0..r).map(|_| small_int(&mut rng)).collect()).collect();
        let p = Subspace::span(Ambient::V1, r, &vectors);
        let Ok(chart) = chart_from_subspace(&alg, &p, PredicateMode::BracketPV1) else {
            return Ok(());
        };
        let fiber: Vec<Rational> = (0..chart.p.dim() + chart.pp.dim()).map(|_| small_int(&mut rng)).collect();
        prop_assert!(sandwich_check(&alg, &chart, &fiber).unwrap());
    }
}
