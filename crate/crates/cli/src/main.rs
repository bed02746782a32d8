use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use carnot_abn::commands::{
    builtin_groups, cmd_catalog_list, cmd_classify, cmd_crosscheck, cmd_estimate, cmd_verify_all, load_catalog,
    EstimateOptions, PredicateChoice, Status,
};
use carnot_abn::spec_file::{load_control, resolve_group};
use carnot_abn::CliError;
use carnot_core::group::DEFAULT_FD_STEP;
use carnot_core::scalar::DEFAULT_RANK_TOL;
use clap::{Args, Parser, Subcommand};

/// Abnormal curves and abnormal-set dimension checks for step-2 Carnot groups.
///
/// GROUP arguments are either a group file (TOML, schema "carnot-abn/1") or a
/// catalog expression such as `heisenberg(2)`, `free(3)`, `dim7(1)` or
/// `heisenberg(1) x R^2`.
#[derive(Parser)]
#[command(name = "carnot-abn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SeedArg {
    /// RNG seed; falls back to CARNOT_ABN_SEED, then 42.
    #[arg(long, env = "CARNOT_ABN_SEED", default_value_t = 42,
          value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: u64,
}

#[derive(Args, Clone)]
struct EstimateArgs {
    /// Plane samples per stratum.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// Relative singular-value cutoff for numeric ranks.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    #[command(flatten)]
    seed: SeedArg,
    /// Stratum predicate: pv1 ([P,V1] != V2), pp ([P,P] != V2) or both.
    #[arg(long, default_value = "pv1")]
    predicate: PredicateChoice,
}

impl EstimateArgs {
    fn options(&self) -> Result<EstimateOptions, CliError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::input("--tol must lie in (0, 1)"));
        }
        Ok(EstimateOptions {
            samples: self.samples as usize,
            tol: self.tol,
            seed: self.seed.seed,
            predicate: self.predicate,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Classify the curve of a control file as abnormal or normal.
    Classify { group: String, control: PathBuf },
    /// Estimate the dimension of the abnormal set and check its bound.
    Estimate {
        group: String,
        #[command(flatten)]
        args: EstimateArgs,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finite-difference endpoint Jacobians with the predicted image.
    Crosscheck {
        group: String,
        #[arg(long, default_value_t = 100)]
        controls: usize,
        #[arg(long, default_value_t = DEFAULT_FD_STEP)]
        step: f64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate every catalog group and print a pass/fail table.
    VerifyAll {
        /// Catalog file; defaults to the built-in catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[command(flatten)]
        args: EstimateArgs,
        /// Write the full batch report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in catalog.
    CatalogList {
        /// Print a catalog file usable with `verify-all --catalog`.
        #[arg(long)]
        toml: bool,
    },
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Classify { group, control } => {
            let g = resolve_group(&group)?;
            let u = load_control(&control, g.algebra.rank())?;
            print!("{}", cmd_classify(&g, &u)?);
            Ok(Status::Pass)
        }
        Command::Estimate { group, args, out } => {
            let opts = args.options()?;
            let (text, status) = cmd_estimate(&resolve_group(&group)?, &opts)?;
            print!("{text}");
            write_out(&out, &text)?;
            Ok(status)
        }
        Command::Crosscheck { group, controls, step, seed, out } => {
            let (text, status) = cmd_crosscheck(&resolve_group(&group)?, controls, step, seed.seed)?;
            print!("{text}");
            write_out(&out, &text)?;
            Ok(status)
        }
        Command::VerifyAll { catalog, args, out } => {
            let opts = args.options()?;
            let groups = match catalog {
                Some(path) => load_catalog(&path)?,
                None => builtin_groups(),
            };
            let (table, full, status) = cmd_verify_all(&groups, &opts)?;
            print!("{table}");
            write_out(&out, &full)?;
            Ok(status)
        }
        Command::CatalogList { toml } => {
            print!("{}", cmd_catalog_list(toml));
            Ok(Status::Pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = run(cli);
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    match result {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::BoundFailure) => {
            eprintln!("error: a dimension bound failed");
            ExitCode::from(1)
        }
        Ok(Status::OracleDisagreement) => {
            eprintln!("error: oracle disagreement");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
