//! Group and control files.
//!
//! Both are TOML documents carrying `schema = "carnot-abn/1"`. Rationals are
//! strings such as `"3"` or `"-1/2"`; bracket indices are 1-based.
//!
//! ```toml
//! schema = "carnot-abn/1"
//! name = "heisenberg-1"
//! rank = 2
//! dim_v2 = 1
//! brackets = [{ i = 1, j = 2, coeffs = ["1"] }]
//! ```
//!
//! A group may instead (or additionally) carry a `construction` table:
//! `{ kind = "free", r = 4 }`, `{ kind = "quotient", r = 4, w = [[...]] }`,
//! `{ kind = "product", factors = ["heisenberg(1)", "heisenberg(1)"] }` or
//! `{ kind = "catalog", name = "dim7", params = ["1"] }`. When both are
//! present the expanded construction must equal the listed brackets.

use std::path::Path;

use carnot_core::constructions::{free_algebra, product, quotient};
use carnot_core::{Ambient, Control, ExactAlgebra, ExactControl, Rational, Segment, StratifiedAlgebra, Subspace};
use carnot_core::scalar::q;
use serde::{Deserialize, Serialize};

use crate::catalog::GroupExpr;
use crate::error::CliError;

pub const SCHEMA: &str = "carnot-abn/1";

pub fn parse_rational(s: &str) -> Result<Rational, CliError> {
    s.trim().parse().map_err(|_| CliError::input(format!("`{s}` is not a rational of the form p or p/q")))
}

fn parse_all(v: &[String]) -> Result<Vec<Rational>, CliError> {
    v.iter().map(|s| parse_rational(s)).collect()
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BracketSpec {
    pub i: usize,
    pub j: usize,
    pub coeffs: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Construction {
    Free { r: usize },
    Quotient { r: usize, w: Vec<Vec<String>> },
    Product { factors: Vec<String> },
    Catalog { name: String, #[serde(default)] params: Vec<String> },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub schema: String,
    pub name: String,
    pub rank: Option<usize>,
    pub dim_v2: Option<usize>,
    #[serde(default)]
    pub brackets: Vec<BracketSpec>,
    pub construction: Option<Construction>,
}

/// A loaded group: its name, the exact algebra, and the catalog expression
/// when the group was given by one.
#[derive(Clone, Debug)]
pub struct LoadedGroup {
    pub name: String,
    pub algebra: ExactAlgebra,
    pub expr: Option<GroupExpr>,
}

fn check_schema(schema: &str) -> Result<(), CliError> {
    if schema == SCHEMA {
        Ok(())
    } else {
        Err(CliError::input(format!("unsupported schema `{schema}` (expected `{SCHEMA}`)")))
    }
}

fn first_violation(alg: ExactAlgebra) -> Result<ExactAlgebra, CliError> {
    match alg.validate() {
        Ok(()) => Ok(alg),
        Err(v) => Err(CliError::input(format!("invalid algebra: {}", v[0]))),
    }
}

impl Construction {
    /// Expands the construction; also returns the equivalent catalog
    /// expression when there is one.
    fn expand(&self) -> Result<(ExactAlgebra, Option<GroupExpr>), CliError> {
        match self {
            Construction::Free { r } => {
                let expr = GroupExpr::parse(&format!("free({r})"))?;
                Ok((expr.build()?, Some(expr)))
            }
            Construction::Quotient { r, w } => {
                let f: ExactAlgebra = free_algebra(*r)?;
                let m = f.dim_v2();
                let vecs = w.iter().map(|v| parse_all(v)).collect::<Result<Vec<_>, _>>()?;
                if let Some(v) = vecs.iter().find(|v| v.len() != m) {
                    return Err(CliError::input(format!("ideal vectors need {m} entries, got {}", v.len())));
                }
                Ok((quotient(&f, &Subspace::span(Ambient::V2, m, &vecs))?.algebra, None))
            }
            Construction::Product { factors } => {
                let mut acc: Option<ExactAlgebra> = None;
                for f in factors {
                    let alg = GroupExpr::parse(f)?.build()?;
                    acc = Some(match acc {
                        None => alg,
                        Some(a) => product(&a, &alg),
                    });
                }
                let alg = acc.ok_or_else(|| CliError::input("product needs at least one factor"))?;
                Ok((alg, GroupExpr::parse(&factors.join(" x ")).ok()))
            }
            Construction::Catalog { name, params } => {
                let text = if params.is_empty() { name.clone() } else { format!("{name}({})", params.join(",")) };
                let expr = GroupExpr::parse(&text)?;
                Ok((expr.build()?, Some(expr)))
            }
        }
    }
}

impl GroupSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: GroupSpec = toml::from_str(text).map_err(|e| CliError::input(format!("group file: {e}")))?;
        check_schema(&spec.schema)?;
        Ok(spec)
    }

    fn listed(&self) -> Result<Option<ExactAlgebra>, CliError> {
        let (Some(r), Some(m)) = (self.rank, self.dim_v2) else {
            if self.brackets.is_empty() {
                return Ok(None);
            }
            return Err(CliError::input("brackets need both `rank` and `dim_v2`"));
        };
        let mut list = Vec::with_capacity(self.brackets.len());
        for b in &self.brackets {
            if b.i >= b.j {
                return Err(CliError::input(format!("bracket ({}, {}) must have i < j", b.i, b.j)));
            }
            if b.i == 0 || b.j > r {
                return Err(CliError::input(format!("bracket ({}, {}) out of range 1..={r}", b.i, b.j)));
            }
            if b.coeffs.len() != m {
                return Err(CliError::input(format!("bracket ({}, {}) needs {m} coefficients", b.i, b.j)));
            }
            list.push((b.i - 1, b.j - 1, parse_all(&b.coeffs)?));
        }
        let mut consts = vec![q(0, 1); r * r * m];
        for (i, j, c) in list {
            for (k, v) in c.into_iter().enumerate() {
                consts[(i * r + j) * m + k] = v.clone();
                consts[(j * r + i) * m + k] = -v;
            }
        }
        Ok(Some(first_violation(StratifiedAlgebra::from_tensor(r, m, consts)?)?))
    }

    pub fn load(&self) -> Result<LoadedGroup, CliError> {
        let listed = self.listed()?;
        let (algebra, expr) = match (&self.construction, listed) {
            (None, None) => return Err(CliError::input("group file has neither brackets nor a construction")),
            (None, Some(alg)) => (alg, None),
            (Some(c), listed) => {
                let (alg, expr) = c.expand()?;
                if listed.is_some_and(|l| l != alg) {
                    return Err(CliError::input("listed brackets differ from the expanded construction"));
                }
                (first_violation(alg)?, expr)
            }
        };
        Ok(LoadedGroup { name: self.name.clone(), algebra, expr })
    }
}

/// Reads a group file and expands it into a validated algebra.
pub fn load_group(path: &Path) -> Result<LoadedGroup, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    GroupSpec::from_toml(&text)?.load()
}

/// A group argument: an existing file path, otherwise a catalog expression.
pub fn resolve_group(arg: &str) -> Result<LoadedGroup, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_group(path);
    }
    let expr = GroupExpr::parse(arg)?;
    Ok(LoadedGroup { name: arg.to_string(), algebra: expr.build()?, expr: Some(expr) })
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub duration: String,
    pub u: Vec<String>,
}

/// Piecewise-constant control. Time is rescaled to `[0, 1]` without changing
/// the curve.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub schema: String,
    #[serde(default)]
    pub segment: Vec<SegmentSpec>,
}

impl ControlSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: ControlSpec = toml::from_str(text).map_err(|e| CliError::input(format!("control file: {e}")))?;
        check_schema(&spec.schema)?;
        Ok(spec)
    }

    pub fn control(&self, rank: usize) -> Result<ExactControl, CliError> {
        if self.segment.is_empty() {
            return Ok(Control::zero(rank));
        }
        let mut segs = Vec::with_capacity(self.segment.len());
        for s in &self.segment {
            if s.u.len() != rank {
                return Err(CliError::input(format!("control value has {} entries, the group has rank {rank}", s.u.len())));
            }
            segs.push(Segment { duration: parse_rational(&s.duration)?, u: parse_all(&s.u)? });
        }
        Ok(Control::normalized(segs)?.0)
    }
}

pub fn load_control(path: &Path, rank: usize) -> Result<ExactControl, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    ControlSpec::from_toml(&text)?.control(rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use carnot_core::constructions::heisenberg;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("-3/6").unwrap(), q(-1, 2));
        assert_eq!(parse_rational(" 7 ").unwrap(), q(7, 1));
        for bad in ["", "1/0", "a", "1/2/3", "0.5"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn listed_brackets() {
        let text = r#"
            schema = "carnot-abn/1"
            name = "h1"
            rank = 2
            dim_v2 = 1
            brackets = [{ i = 1, j = 2, coeffs = ["1"] }]
        "#;
        assert_eq!(GroupSpec::from_toml(text).unwrap().load().unwrap().algebra, heisenberg(1));
    }

    #[test]
    fn constructions_expand() {
        let free = r#"schema = "carnot-abn/1"
name = "f3"
construction = { kind = "free", r = 3 }"#;
        assert_eq!(GroupSpec::from_toml(free).unwrap().load().unwrap().algebra.dim(), 6);
        let quot = r#"schema = "carnot-abn/1"
name = "f4q"
construction = { kind = "quotient", r = 4, w = [["1", "0", "0", "0", "0", "-1"]] }"#;
        assert_eq!(GroupSpec::from_toml(quot).unwrap().load().unwrap().algebra.dim(), 9);
        let prod = r#"schema = "carnot-abn/1"
name = "hh"
construction = { kind = "product", factors = ["heisenberg(1)", "heisenberg(1)"] }"#;
        assert_eq!(GroupSpec::from_toml(prod).unwrap().load().unwrap().algebra.dim(), 6);
        let cat = r#"schema = "carnot-abn/1"
name = "d7"
construction = { kind = "catalog", name = "dim7", params = ["1/2"] }"#;
        let g = GroupSpec::from_toml(cat).unwrap().load().unwrap();
        assert_eq!(g.expr.unwrap().dim7_lambda(), Some(&q(1, 2)));
    }

    #[test]
    fn rejections() {
        let cases = [
            r#"schema = "carnot-abn/0"
name = "x"
construction = { kind = "free", r = 3 }"#,
            r#"schema = "carnot-abn/1"
name = "diag"
rank = 2
dim_v2 = 1
brackets = [{ i = 1, j = 1, coeffs = ["1"] }]"#,
            r#"schema = "carnot-abn/1"
name = "narrow"
rank = 3
dim_v2 = 2
brackets = [{ i = 1, j = 2, coeffs = ["1", "0"] }]"#,
            r#"schema = "carnot-abn/1"
name = "mismatch"
rank = 2
dim_v2 = 1
brackets = [{ i = 1, j = 2, coeffs = ["2"] }]
construction = { kind = "catalog", name = "heisenberg", params = ["1"] }"#,
            r#"schema = "carnot-abn/1"
name = "empty""#,
        ];
        for c in cases {
            assert!(matches!(GroupSpec::from_toml(c).and_then(|s| s.load()), Err(CliError::Input(_))), "{c}");
        }
    }

    #[test]
    fn controls() {
        let text = r#"schema = "carnot-abn/1"
[[segment]]
duration = "1"
u = ["1", "0"]
[[segment]]
duration = "3"
u = ["0", "1/2"]"#;
        let u = ControlSpec::from_toml(text).unwrap().control(2).unwrap();
        assert_eq!(u.segments().len(), 2);
        assert_eq!(u.segments()[1].duration, q(3, 4));
        assert!(ControlSpec::from_toml(text).unwrap().control(3).is_err());
        let zero = ControlSpec::from_toml("schema = \"carnot-abn/1\"").unwrap().control(2).unwrap();
        assert_eq!(zero, Control::zero(2));
    }
}
