//! Report files. Reports hold no timing data so that runs with the same
//! inputs produce byte-identical output.

use carnot_core::variety::StratumReport;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::spec_file::SCHEMA;

pub const CODIM_NOTE: &str = "codimension is checked as at least 3: the corollary's wording \
\"codimension at most three\" is read as the lower bound that every theorem proves";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StratumEntry {
    pub k: usize,
    pub predicate: String,
    pub samples: usize,
    pub successful: usize,
    pub empty: bool,
    pub estimated_dim: Option<usize>,
    pub max_observed_rank: usize,
    pub feasibility_residual: f64,
    pub generic: bool,
    pub certified: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl From<&StratumReport> for StratumEntry {
    fn from(s: &StratumReport) -> Self {
        StratumEntry {
            k: s.k,
            predicate: s.predicate.to_string(),
            samples: s.samples,
            successful: s.successful,
            empty: s.estimated_dim.is_none(),
            estimated_dim: s.estimated_dim,
            max_observed_rank: s.max_observed_rank,
            feasibility_residual: s.feasibility_residual,
            generic: s.generic,
            certified: s.certified,
            tolerance: s.tolerance,
            seed: s.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerificationReport {
    pub schema: String,
    pub group: String,
    pub rank: usize,
    pub dim_v2: usize,
    pub dim: usize,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub predicate: String,
    pub estimated_dim: usize,
    pub codim: usize,
    /// Dimension found by a family-specific parametrization.
    pub construction_dim: Option<usize>,
    pub construction_exceeds: bool,
    /// Estimate under the `[P, P] ≠ V₂` predicate when both were requested.
    pub pp_estimated_dim: Option<usize>,
    pub claimed_bound: usize,
    pub bound: String,
    pub pass: bool,
    pub notes: Vec<String>,
    pub strata: Vec<StratumEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CrosscheckReport {
    pub schema: String,
    pub group: String,
    pub dim: usize,
    pub controls: usize,
    pub step: f64,
    pub seed: u64,
    pub angle_tolerance: f64,
    pub max_angle: f64,
    pub worst_control: usize,
    pub rank_mismatches: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BatchReport {
    pub schema: String,
    pub seed: u64,
    pub groups: usize,
    pub failures: usize,
    pub notes: Vec<String>,
    pub reports: Vec<VerificationReport>,
}

impl BatchReport {
    pub fn new(seed: u64, reports: Vec<VerificationReport>) -> Self {
        BatchReport {
            schema: SCHEMA.to_string(),
            seed,
            groups: reports.len(),
            failures: reports.iter().filter(|r| !r.pass).count(),
            notes: vec![CODIM_NOTE.to_string()],
            reports,
        }
    }

    /// Fixed-width pass/fail table in catalog order.
    pub fn table(&self) -> String {
        let width = self.reports.iter().map(|r| r.group.len()).max().unwrap_or(5).max(5);
        let src = self.reports.iter().map(|r| r.bound.len()).max().unwrap_or(6).max(6);
        let mut out = format!(
            "{:<width$}  {:>3}  {:>3}  {:>3}  {:>3}  {:>5}  {:>5}  {:<src$}  result\n",
            "group", "r", "m", "dim", "est", "codim", "bound", "source"
        );
        for r in &self.reports {
            out.push_str(&format!(
                "{:<width$}  {:>3}  {:>3}  {:>3}  {:>3}  {:>5}  {:>5}  {:<src$}  {}\n",
                r.group,
                r.rank,
                r.dim_v2,
                r.dim,
                r.estimated_dim,
                r.codim,
                r.claimed_bound,
                r.bound,
                if r.pass { "pass" } else { "FAIL" }
            ));
        }
        out.push_str(&format!("{} groups, {} failed\n", self.groups, self.failures));
        out
    }
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String, CliError> {
    toml::to_string(value).map_err(|e| CliError::input(format!("cannot serialize report: {e}")))
}
