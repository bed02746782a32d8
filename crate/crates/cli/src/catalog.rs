//! Group expressions and the built-in catalog.
//!
//! An expression is a product of factors separated by ` x `. A factor is
//! `R` or `R^h` (central horizontal directions), `heisenberg(n)`, `free(r)`,
//! `dim7(λ)` with `λ` an integer or `p/q`, or one of the named groups listed
//! by [`named_groups`].

use std::fmt;

use carnot_core::constructions::{abelian_extension, dim7_algebra, free_algebra, heisenberg, pair_index, product, quotient};
use carnot_core::scalar::q;
use carnot_core::{Ambient, ExactAlgebra, Rational, StratifiedAlgebra, Subspace};

use crate::error::CliError;

/// Upper bound on `dim Abn` that a group is checked against, with the result
/// it comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSource {
    /// `m = 1`: `dim Abn ≤ r − 2`.
    RankPlusOne,
    /// `m = 2`: `dim Abn ≤ r − 1`.
    RankPlusTwo,
    /// Free groups: codimension 3.
    Free,
    /// Free group modulo a one-dimensional ideal: codimension at least 3.
    FreeMinusOne,
    /// Free group modulo a two-dimensional ideal: `dim Abn ≤ (r² + r)/2 − 5`.
    FreeMinusTwo,
    /// `r = 4`, `m = 3`: `dim Abn ≤ 4`.
    FourPlusThree,
    /// Any step-2 group of dimension at most 7: codimension at least 3.
    Corollary,
    /// No proved bound applies; codimension 3 is checked anyway.
    Unproven,
}

impl BoundSource {
    pub fn tag(self) -> &'static str {
        match self {
            BoundSource::RankPlusOne => "r+1: dim Abn <= r-2",
            BoundSource::RankPlusTwo => "r+2: dim Abn <= r-1",
            BoundSource::Free => "free: codimension 3",
            BoundSource::FreeMinusOne => "free-1: codimension at least 3",
            BoundSource::FreeMinusTwo => "free-2: dim Abn <= (r^2+r)/2 - 5",
            BoundSource::FourPlusThree => "4+3: dim Abn <= 4",
            BoundSource::Corollary => "dim <= 7: codimension at least 3",
            BoundSource::Unproven => "outside the proved range: codimension 3 checked",
        }
    }

    /// The bound as an explicit dimension for a group of rank `r` and
    /// dimension `dim`.
    pub fn bound(self, r: usize, dim: usize) -> usize {
        match self {
            BoundSource::RankPlusOne => r.saturating_sub(2),
            BoundSource::RankPlusTwo => r - 1,
            BoundSource::FreeMinusTwo => (r * r + r) / 2 - 5,
            BoundSource::FourPlusThree => 4,
            BoundSource::Free | BoundSource::FreeMinusOne | BoundSource::Corollary | BoundSource::Unproven => dim.saturating_sub(3),
        }
    }
}

impl fmt::Display for BoundSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Parsed group expression.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupExpr {
    pub factors: Vec<Factor>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Abelian(usize),
    Heisenberg(usize),
    Free(usize),
    Dim7(Rational),
    Named(&'static str),
}

impl GroupExpr {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let factors = text
            .split(" x ")
            .map(|f| parse_factor(f.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        if factors.iter().all(|f| matches!(f, Factor::Abelian(_))) {
            return Err(CliError::input(format!("`{text}`: an abelian group is not of step 2")));
        }
        Ok(GroupExpr { factors })
    }

    pub fn build(&self) -> Result<ExactAlgebra, CliError> {
        let mut acc: Option<ExactAlgebra> = None;
        let mut central = 0;
        for f in &self.factors {
            let alg = match f {
                Factor::Abelian(h) => {
                    central += h;
                    continue;
                }
                Factor::Heisenberg(n) => heisenberg(*n),
                Factor::Free(r) => free_algebra(*r).map_err(CliError::from)?,
                Factor::Dim7(l) => dim7_algebra(l.clone()),
                Factor::Named(name) => named_group(name).expect("parsed names exist"),
            };
            acc = Some(match acc {
                None => alg,
                Some(a) => product(&a, &alg),
            });
        }
        let alg = acc.expect("at least one non-abelian factor");
        Ok(if central > 0 { abelian_extension(&alg, central) } else { alg })
    }

    /// `λ` when the expression is a single `dim7(λ)` factor.
    pub fn dim7_lambda(&self) -> Option<&Rational> {
        match self.factors.as_slice() {
            [Factor::Dim7(l)] => Some(l),
            _ => None,
        }
    }
}

fn parse_factor(f: &str) -> Result<Factor, CliError> {
    let bad = |why: &str| CliError::input(format!("bad group factor `{f}`: {why}"));
    if f == "R" {
        return Ok(Factor::Abelian(1));
    }
    if let Some(h) = f.strip_prefix("R^") {
        let h: usize = h.parse().map_err(|_| bad("exponent must be a positive integer"))?;
        return if h == 0 { Err(bad("exponent must be positive")) } else { Ok(Factor::Abelian(h)) };
    }
    if let Some((name, rest)) = f.split_once('(') {
        let arg = rest.strip_suffix(')').ok_or_else(|| bad("missing `)`"))?.trim();
        let int = || arg.parse::<usize>().map_err(|_| bad("argument must be a positive integer"));
        return match name {
            "heisenberg" => match int()? {
                0 => Err(bad("n must be at least 1")),
                n => Ok(Factor::Heisenberg(n)),
            },
            "free" => match int()? {
                r if r < 2 => Err(bad("rank must be at least 2")),
                r => Ok(Factor::Free(r)),
            },
            "dim7" => Ok(Factor::Dim7(crate::spec_file::parse_rational(arg).map_err(|e| bad(&e.to_string()))?)),
            _ => Err(bad("unknown family")),
        };
    }
    named_groups()
        .iter()
        .find(|(n, _)| *n == f)
        .map(|(n, _)| Factor::Named(n))
        .ok_or_else(|| bad("unknown group"))
}

fn brackets(r: usize, m: usize, entries: &[(usize, usize, usize, i64)]) -> ExactAlgebra {
    let mut list: Vec<(usize, usize, Vec<Rational>)> = Vec::new();
    for &(i, j, k, c) in entries {
        let mut coeffs = vec![q(0, 1); m];
        coeffs[k - 1] = q(c, 1);
        list.push((i - 1, j - 1, coeffs));
    }
    StratifiedAlgebra::from_brackets(r, m, &list).expect("catalog group is stratified")
}

/// `F_{r,2}` modulo the span of the given vectors, written in the basis
/// `e₁∧e₂, e₁∧e₃, …` of the second layer.
fn free_quotient(r: usize, w: &[&[(usize, usize, i64)]]) -> ExactAlgebra {
    let f: ExactAlgebra = free_algebra(r).expect("r >= 2");
    let m = f.dim_v2();
    let vecs: Vec<Vec<Rational>> = w
        .iter()
        .map(|terms| {
            let mut v = vec![q(0, 1); m];
            for &(i, j, c) in *terms {
                v[pair_index(r, i - 1, j - 1)] = q(c, 1);
            }
            v
        })
        .collect();
    quotient(&f, &Subspace::span(Ambient::V2, m, &vecs)).expect("proper ideal").algebra
}

type Builder = fn() -> ExactAlgebra;

/// Named groups usable as expression factors, with short descriptions.
pub fn named_groups() -> &'static [(&'static str, Builder)] {
    &[
        ("F3/1", || free_quotient(3, &[&[(2, 3, 1)]])),
        ("CH", || brackets(4, 2, &[(1, 3, 1, 1), (2, 4, 1, -1), (1, 4, 2, 1), (2, 3, 2, 1)])),
        ("L", || free_quotient(4, &[&[(1, 2, 1)], &[(3, 4, 1)], &[(1, 3, 1), (2, 4, 1)], &[(1, 4, 1)]])),
        ("N5a", || brackets(5, 2, &[(1, 2, 1, 1), (1, 3, 2, 1), (4, 5, 1, 1)])),
        ("N5b", || brackets(5, 2, &[(1, 2, 1, 1), (3, 4, 2, 1), (1, 5, 2, 1)])),
        ("N5c", || brackets(5, 2, &[(1, 2, 1, 1), (3, 4, 1, 1), (1, 5, 2, 1)])),
        ("N5d", || brackets(5, 2, &[(1, 2, 1, 1), (3, 4, 1, 1), (1, 3, 2, 1), (2, 5, 2, 1)])),
        ("N5e", || brackets(5, 2, &[(1, 2, 1, 1), (2, 3, 2, 1), (3, 4, 1, 1), (4, 5, 2, 1)])),
        ("N5f", || brackets(5, 2, &[(1, 2, 1, 1), (3, 4, 1, 1), (1, 3, 2, 1), (2, 4, 2, 1), (3, 5, 2, 1)])),
        ("N5g", || brackets(5, 2, &[(1, 2, 1, 1), (1, 3, 2, 1), (2, 4, 2, 1), (3, 5, 1, 1)])),
        ("F4/1", || free_quotient(4, &[&[(1, 2, 1), (3, 4, -1)]])),
        ("F4/2c", || free_quotient(4, &[&[(1, 2, 1)], &[(3, 4, 1)]])),
        ("F4/2nc", || free_quotient(4, &[&[(1, 2, 1), (3, 4, 1)], &[(1, 3, 1)]])),
    ]
}

fn named_group(name: &str) -> Option<ExactAlgebra> {
    named_groups().iter().find(|(n, _)| *n == name).map(|(_, b)| b())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: String,
    pub expr: GroupExpr,
    pub source: BoundSource,
}

/// Bound attached to a group of rank `r` with `dim V₂ = m`.
pub fn bound_source(r: usize, m: usize) -> BoundSource {
    let full = r * (r - 1) / 2;
    match (r, m) {
        (_, 1) => BoundSource::RankPlusOne,
        (_, 2) => BoundSource::RankPlusTwo,
        (4, 3) => BoundSource::FourPlusThree,
        _ if m == full => BoundSource::Free,
        _ if m + 1 == full => BoundSource::FreeMinusOne,
        _ if m + 2 == full => BoundSource::FreeMinusTwo,
        _ if r + m <= 7 => BoundSource::Corollary,
        _ => BoundSource::Unproven,
    }
}

const CATALOG: &[&str] = &[
    // dim 3, 4
    "heisenberg(1)",
    "heisenberg(1) x R",
    // dim 5
    "heisenberg(2)",
    "heisenberg(1) x R^2",
    "F3/1",
    // dim 6
    "free(3)",
    "heisenberg(2) x R",
    "heisenberg(1) x R^3",
    "heisenberg(1) x heisenberg(1)",
    "F3/1 x R",
    "CH",
    "L",
    // dim 7
    "heisenberg(3)",
    "heisenberg(2) x R^2",
    "heisenberg(1) x R^4",
    "heisenberg(1) x heisenberg(1) x R",
    "F3/1 x R^2",
    "CH x R",
    "L x R",
    "N5a",
    "N5b",
    "N5c",
    "N5d",
    "N5e",
    "N5f",
    "N5g",
    "free(3) x R",
    "dim7(0)",
    "dim7(1)",
    "dim7(-1)",
    "dim7(2)",
    // free-minus quotients and the free group of rank 4
    "F4/2c",
    "F4/2nc",
    "F4/1",
    "free(4)",
];

/// Representatives of step-2 groups up to dimension 7 for every admissible
/// `(r, m)`, followed by the rank-4 free-minus quotients and `F_{4,2}`.
pub fn builtin_catalog() -> Vec<CatalogEntry> {
    CATALOG.iter().map(|name| entry(name).expect("catalog expressions parse")).collect()
}

pub fn entry(name: &str) -> Result<CatalogEntry, CliError> {
    let expr = GroupExpr::parse(name)?;
    let alg = expr.build()?;
    let source = bound_source(alg.rank(), alg.dim_v2());
    Ok(CatalogEntry { name: name.to_string(), expr, source })
}
