//! Command-line interface.
//!
//! `run` executes an experiment config and writes tables plus a manifest;
//! `sum`, `constants`, `iterate`, and `predict` expose the corresponding
//! library operations directly. Everything is deterministic: there is no
//! RNG anywhere in the tool, which is what the reserved `--seedless` flag
//! asserts. Exit codes: 0 all good, 1 a trend rule failed, 2 configuration
//! or runtime error.

mod config;
mod runner;

pub use config::{build_spec, Experiment, LawChoice, Overrides, Task};
pub use runner::{Manifest, ManifestEntry, RunSettings, Status, RESIDUAL_GATE};

use crate::asymptote::predict;
use crate::engine::iterate;
use crate::funcdsl::parse;
use crate::quad::DEFAULT_PANEL_BUDGET;
use crate::schedule::Schedule;
use crate::series::{euler_mascheroni, stieltjes, sum_alternating_with, SeriesOptions};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Environment variable overriding the quadrature panel budget.
pub const PANEL_BUDGET_ENV: &str = "LIMITFORGE_PANEL_BUDGET";

/// Accept counts as integers or as integral floats like `1e8`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s
        .parse()
        .map_err(|_| format!("`{s}` is not a count (try 1000000 or 1e6)"))?;
    if x.fract() == 0.0 && x >= 0.0 && x <= 2f64.powi(53) {
        Ok(x as u64)
    } else {
        Err(format!("`{s}` is not a whole non-negative count"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for config::OutFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => config::OutFormat::Csv,
            FormatArg::Json => config::OutFormat::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "limitforge",
    version,
    about = "Numerical laboratory for slowly diverging sequences and their growth laws"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Trend tolerance, overriding per-experiment settings.
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    /// Cap on n (and n_max); longer runs are shortened, schedules trimmed.
    #[arg(long, global = true, value_parser = parse_count)]
    n_max: Option<u64>,

    /// Checkpoint schedule override (currently: geometric).
    #[arg(long, global = true)]
    schedule: Option<String>,

    /// Table format for experiment outputs.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Output directory for tables and the manifest.
    #[arg(long, global = true, default_value = "limitforge-out")]
    out: PathBuf,

    /// Assert that nothing is randomized (always true; reserved flag).
    #[arg(long, global = true, action = clap::ArgAction::SetTrue)]
    seedless: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every experiment in a config file and write a manifest.
    Run {
        /// Path to a TOML experiment config.
        config: PathBuf,
    },
    /// Sum the alternating series sum_k (-1)^(k+1) f(k).
    Sum {
        /// The term function f, e.g. "1/t".
        expression: String,
        /// Defect depth: 2n direct terms enter the estimate.
        #[arg(long, value_parser = parse_count)]
        n: u64,
    },
    /// Print a limit constant with its error bound.
    Constants {
        #[command(subcommand)]
        which: WhichConstant,
    },
    /// Run one recurrence and dump its checkpoints to stdout.
    Iterate {
        #[command(flatten)]
        family: FamilyArgs,
    },
    /// Evaluate the continuous-analogue prediction F^{-1}(G(n)).
    Predict {
        /// Growth factor f in a' = a + 1/(f(a) g(n)).
        #[arg(long)]
        f: String,
        /// Optional modulation g.
        #[arg(long)]
        g: Option<String>,
        #[arg(long, value_parser = parse_count)]
        n: u64,
    },
}

#[derive(Debug, Subcommand)]
enum WhichConstant {
    /// Euler-Mascheroni constant via the corrected harmonic defect.
    Gamma {
        /// Harmonic depth (n >= 2).
        #[arg(long, value_parser = parse_count)]
        n: u64,
    },
    /// Stieltjes constant of the given order (raw defect, no acceleration).
    Stieltjes {
        alpha: u32,
        #[arg(long, value_parser = parse_count)]
        n: u64,
    },
}

#[derive(Debug, Args)]
struct FamilyArgs {
    /// first_order_inverse | cumulative | tauberian | coupled | quadratic |
    /// driven_sqrt
    #[arg(long)]
    family: String,
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    x1: Option<f64>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
    /// one | sin_squared
    #[arg(long)]
    driver: Option<String>,
}

fn panel_budget_from_env() -> Result<Option<u64>, String> {
    match std::env::var(PANEL_BUDGET_ENV) {
        Ok(v) => {
            let n = parse_count(&v).map_err(|e| format!("{PANEL_BUDGET_ENV}: {e}"))?;
            if n == 0 {
                return Err(format!("{PANEL_BUDGET_ENV} must be at least 1"));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("{PANEL_BUDGET_ENV}: {e}")),
    }
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            );
            let _ = e.print();
            return if informational { 0 } else { 2 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, String> {
    let panel_budget = panel_budget_from_env()?;
    let settings = RunSettings { panel_budget };
    let series_options = SeriesOptions {
        panel_budget: panel_budget.unwrap_or(DEFAULT_PANEL_BUDGET),
        ..SeriesOptions::default()
    };

    match cli.command {
        Command::Run { ref config } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
            let overrides = Overrides {
                tolerance: cli.tolerance,
                n_max: cli.n_max,
                schedule: match cli.schedule.as_deref() {
                    None => None,
                    Some("geometric") => Some("geometric".to_string()),
                    Some(other) => return Err(format!("unknown schedule override `{other}`")),
                },
                format: cli.format.map(Into::into),
            };
            let (experiments, digest) = config::resolve(&text, &overrides)?;
            runner::run_all(&experiments, digest, &cli.out, &settings)
        }
        Command::Sum { ref expression, n } => {
            let f = parse(expression).map_err(|e| format!("cannot parse `{expression}`: {e}"))?;
            let n = n.min(cli.n_max.unwrap_or(u64::MAX));
            let r = sum_alternating_with(&f, n, &series_options).map_err(|e| e.to_string())?;
            println!("estimated_sum     = {:.16e}", r.estimated_sum);
            println!("l_estimate        = {:.16e}", r.l_estimate);
            println!("bridge_integral   = {:.16e}", r.bridge_integral);
            println!("identity_residual = {:.16e}", r.identity_residual);
            println!("error_estimate    = {:.16e}", r.error_estimate);
            println!("n_used            = {}", r.n_used);
            Ok(0)
        }
        Command::Constants { ref which } => {
            match *which {
                WhichConstant::Gamma { n } => {
                    let (v, bound) = euler_mascheroni(n).map_err(|e| e.to_string())?;
                    println!("gamma = {v:.16e} +- {bound:.2e} (n = {n})");
                }
                WhichConstant::Stieltjes { alpha, n } => {
                    let v = stieltjes(alpha, n).map_err(|e| e.to_string())?;
                    println!("stieltjes_{alpha} = {v:.16e} (n = {n}, raw defect)");
                }
            }
            Ok(0)
        }
        Command::Iterate { ref family } => {
            let spec = build_spec(
                &family.family,
                family.f.as_deref(),
                family.g.as_deref(),
                family.a1,
                family.b1,
                family.x1,
                family.p,
                family.q,
                family.driver.as_deref(),
            )?;
            let n_max = cli
                .n_max
                .ok_or("iterate needs --n-max to bound the run")?;
            let schedule = match cli.schedule.as_deref() {
                None | Some("geometric") => Schedule::Geometric125 { n_max },
                Some(other) => return Err(format!("unknown schedule `{other}`")),
            };
            let traj = iterate(&spec, &schedule).map_err(|e| e.to_string())?;

            let mut header = String::from("n,value");
            if traj.values_b.is_some() {
                header.push_str(",value_b");
            }
            if traj.aux_sums.is_some() {
                header.push_str(",aux_sum");
            }
            println!("{header}");
            for (i, &n) in traj.checkpoints.iter().enumerate() {
                let mut line = format!("{n},{:.16e}", traj.values[i]);
                if let Some(b) = &traj.values_b {
                    let _ = write!(line, ",{:.16e}", b[i]);
                }
                if let Some(aux) = &traj.aux_sums {
                    let _ = write!(line, ",{:.16e}", aux[i]);
                }
                println!("{line}");
            }
            if let Some((n, _)) = traj.terminated_at {
                eprintln!("note: run overflowed at step {n}");
            }
            Ok(0)
        }
        Command::Predict { ref f, ref g, n } => {
            let f = parse(f).map_err(|e| format!("cannot parse f: {e}"))?;
            let g = match g.as_deref() {
                Some(src) => Some(parse(src).map_err(|e| format!("cannot parse g: {e}"))?),
                None => None,
            };
            let tol = cli.tolerance.unwrap_or(1e-10);
            let p = predict(
                &f,
                g.as_ref(),
                n as f64,
                tol,
                panel_budget.unwrap_or(DEFAULT_PANEL_BUDGET),
            )
            .map_err(|e| e.to_string())?;
            println!("prediction = {:.16e}", p.value);
            println!("argument   = {:.16e}", p.integral_argument);
            if p.slow_divergence_warning {
                eprintln!(
                    "warning: the modulation integral has barely moved between n/2 and n; \
                     the sequence may still be far from its asymptote"
                );
            }
            Ok(0)
        }
    }
}
