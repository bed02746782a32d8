//! Command implementations. Each returns the text to print and a status;
//! the binary maps statuses and errors to exit codes.

use std::path::Path;

use carnot_core::constructions::dim7_variety_pieces;
use carnot_core::group::{classify, endpoint_oracle};
use carnot_core::scalar::DEFAULT_RANK_TOL;
use carnot_core::variety::{estimate_abn_dim, EstimateConfig, PredicateMode};
use carnot_core::{Control, ExactControl, FloatAlgebra, FloatControl, Scalar, Segment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::catalog::{bound_source, builtin_catalog};
use crate::error::CliError;
use crate::report::{to_toml, BatchReport, CrosscheckReport, StratumEntry, VerificationReport, CODIM_NOTE};
use crate::spec_file::{resolve_group, LoadedGroup, SCHEMA};

/// Largest principal angle tolerated between the finite-difference image
/// and the predicted image of the endpoint differential.
pub const ANGLE_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    BoundFailure,
    OracleDisagreement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PredicateChoice {
    #[default]
    Pv1,
    Pp,
    /// Both predicates; the bound is checked on `pv1`.
    Both,
}

impl std::str::FromStr for PredicateChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pv1" => Ok(PredicateChoice::Pv1),
            "pp" => Ok(PredicateChoice::Pp),
            "both" => Ok(PredicateChoice::Both),
            other => Err(format!("unknown predicate `{other}` (expected pv1, pp or both)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateOptions {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub predicate: PredicateChoice,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { samples: 200, tol: DEFAULT_RANK_TOL, seed: 42, predicate: PredicateChoice::Pv1 }
    }
}

pub fn cmd_classify(group: &LoadedGroup, u: &ExactControl) -> Result<String, CliError> {
    let c = classify(&group.algebra, u)?;
    let verdict = if c.abnormal { format!("abnormal, codim {}", c.codim_e) } else { "normal".to_string() };
    let join = |v: &[carnot_core::Rational]| v.iter().map(|x| format!("\"{x}\"")).collect::<Vec<_>>().join(", ");
    Ok(format!(
        "{verdict}\ngroup = \"{}\"\ncodim_e = {}\ndim_p = {}\nendpoint_x = [{}]\nendpoint_z = [{}]\n",
        group.name,
        c.codim_e,
        c.dim_p,
        join(&c.endpoint.x),
        join(&c.endpoint.z)
    ))
}

/// Largest parametrization rank of the pieces covering the abnormal set of
/// the rank-4, dimension-7 family.
pub fn dim7_construction_dim(lambda: f64, seed: u64, tol: f64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0;
    for piece in dim7_variety_pieces(lambda) {
        for i in 0..10 {
            let p = piece.sample_params(&mut rng, i);
            best = best.max(piece.jacobian_rank(&p, carnot_core::group::DEFAULT_FD_STEP, tol));
        }
    }
    best
}

pub fn estimate(group: &LoadedGroup, opts: &EstimateOptions) -> VerificationReport {
    let alg: FloatAlgebra = group.algebra.map_scalar();
    let base = EstimateConfig { samples: opts.samples, tol: opts.tol, seed: opts.seed, ..EstimateConfig::default() };
    let primary_mode = match opts.predicate {
        PredicateChoice::Pp => PredicateMode::BracketPP,
        _ => PredicateMode::BracketPV1,
    };
    let mut abn = estimate_abn_dim(&alg, &EstimateConfig { predicate: primary_mode, ..base });
    let mut notes = vec![CODIM_NOTE.to_string()];
    if let Some(lambda) = group.expr.as_ref().and_then(|e| e.dim7_lambda()) {
        abn = abn.with_construction_dim(dim7_construction_dim(lambda.to_f64(), opts.seed, opts.tol));
        notes.push("construction_dim is the largest parametrization rank of the pieces A, B, (i), (ii), (iii)".into());
    }
    let mut strata: Vec<StratumEntry> = abn.strata.iter().map(StratumEntry::from).collect();
    let pp_estimated_dim = (opts.predicate == PredicateChoice::Both).then(|| {
        let pp = estimate_abn_dim(&alg, &EstimateConfig { predicate: PredicateMode::BracketPP, ..base });
        strata.extend(pp.strata.iter().map(StratumEntry::from));
        notes.push("the [P,P] predicate is reported for comparison; the bound is checked with [P,V1]".into());
        pp.estimated_dim
    });
    let (r, m, dim) = (alg.rank(), alg.dim_v2(), alg.dim());
    let source = bound_source(r, m);
    let claimed = source.bound(r, dim);
    let effective = abn.estimated_dim.max(abn.construction_dim.unwrap_or(0));
    if abn.construction_exceeds() {
        notes.push("the family-specific parametrization exceeds the generic search; the larger value is checked".into());
    }
    VerificationReport {
        schema: SCHEMA.to_string(),
        group: group.name.clone(),
        rank: r,
        dim_v2: m,
        dim,
        seed: opts.seed,
        samples: opts.samples,
        tolerance: opts.tol,
        predicate: primary_mode.to_string(),
        estimated_dim: abn.estimated_dim,
        codim: abn.codim(),
        construction_dim: abn.construction_dim,
        construction_exceeds: abn.construction_exceeds(),
        pp_estimated_dim,
        claimed_bound: claimed,
        bound: source.tag().to_string(),
        pass: effective <= claimed && dim.saturating_sub(effective) >= 3,
        notes,
        strata,
    }
}

pub fn cmd_estimate(group: &LoadedGroup, opts: &EstimateOptions) -> Result<(String, Status), CliError> {
    let report = estimate(group, opts);
    let status = if report.pass { Status::Pass } else { Status::BoundFailure };
    Ok((to_toml(&report)?, status))
}

/// Random piecewise-constant control with 1 to 4 segments.
pub fn random_control<R: Rng>(rng: &mut R, rank: usize) -> FloatControl {
    let n = rng.random_range(1..=4);
    let segs = (0..n)
        .map(|_| Segment {
            duration: rng.random_range(0.25..1.0),
            u: (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    Control::new(segs).expect("positive durations")
}

pub fn crosscheck(group: &LoadedGroup, controls: usize, step: f64, seed: u64) -> Result<CrosscheckReport, CliError> {
    let alg: FloatAlgebra = group.algebra.map_scalar();
    let checks = (0..controls)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            endpoint_oracle(&alg, &random_control(&mut rng, alg.rank()), step, DEFAULT_RANK_TOL)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (worst, max_angle) = checks
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.max_angle))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let rank_mismatches = checks.iter().filter(|c| c.numeric_rank != c.expected_dim).count();
    Ok(CrosscheckReport {
        schema: SCHEMA.to_string(),
        group: group.name.clone(),
        dim: alg.dim(),
        controls,
        step,
        seed,
        angle_tolerance: ANGLE_TOL,
        max_angle,
        worst_control: worst,
        rank_mismatches,
        pass: max_angle < ANGLE_TOL && rank_mismatches == 0,
    })
}

pub fn cmd_crosscheck(group: &LoadedGroup, controls: usize, step: f64, seed: u64) -> Result<(String, Status), CliError> {
    if controls == 0 {
        return Err(CliError::input("--controls must be at least 1"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::input("--step must be positive"));
    }
    let report = crosscheck(group, controls, step, seed)?;
    let status = if report.pass { Status::Pass } else { Status::OracleDisagreement };
    Ok((to_toml(&report)?, status))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    schema: String,
    groups: Vec<String>,
}

/// Groups of a catalog file; entries are expressions or group files, the
/// latter relative to the catalog's directory.
pub fn load_catalog(path: &Path) -> Result<Vec<LoadedGroup>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let file: CatalogFile = toml::from_str(&text).map_err(|e| CliError::input(format!("catalog file: {e}")))?;
    if file.schema != SCHEMA {
        return Err(CliError::input(format!("unsupported schema `{}` (expected `{SCHEMA}`)", file.schema)));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    file.groups
        .iter()
        .map(|g| {
            let candidate = dir.join(g);
            if candidate.is_file() {
                resolve_group(&candidate.to_string_lossy())
            } else {
                resolve_group(g)
            }
        })
        .collect()
}

pub fn builtin_groups() -> Vec<LoadedGroup> {
    builtin_catalog()
        .into_iter()
        .map(|e| LoadedGroup { name: e.name, algebra: e.expr.build().expect("catalog builds"), expr: Some(e.expr) })
        .collect()
}

/// Estimates every group in parallel; reports keep the input order.
pub fn verify_all(groups: &[LoadedGroup], opts: &EstimateOptions) -> BatchReport {
    let reports = groups.par_iter().map(|g| estimate(g, opts)).collect();
    BatchReport::new(opts.seed, reports)
}

/// Returns the table and the full batch report.
pub fn cmd_verify_all(groups: &[LoadedGroup], opts: &EstimateOptions) -> Result<(String, String, Status), CliError> {
    let batch = verify_all(groups, opts);
    let status = if batch.failures == 0 { Status::Pass } else { Status::BoundFailure };
    Ok((batch.table(), to_toml(&batch)?, status))
}

pub fn cmd_catalog_list(as_toml: bool) -> String {
    let entries = builtin_catalog();
    if as_toml {
        let names: Vec<String> = entries.iter().map(|e| format!("  \"{}\",", e.name)).collect();
        return format!("schema = \"{SCHEMA}\"\ngroups = [\n{}\n]\n", names.join("\n"));
    }
    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(5);
    let mut out = format!("{:<width$}  {:>3}  {:>3}  {:>3}  bound\n", "group", "r", "m", "dim");
    for e in &entries {
        let alg = e.expr.build().expect("catalog builds");
        out.push_str(&format!(
            "{:<width$}  {:>3}  {:>3}  {:>3}  {}\n",
            e.name,
            alg.rank(),
            alg.dim_v2(),
            alg.dim(),
            e.source
        ));
    }
    out
}
