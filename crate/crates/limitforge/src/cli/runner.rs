//! Executes resolved experiments and writes their tables and the manifest.
//!
//! Experiments run sequentially; they are independent, so the results do
//! not depend on ordering, and every output file (and the manifest) is
//! written atomically via a rename. CSV bodies are deterministic: two runs
//! of the same config differ only in the manifest's wall times.

use super::config::{ConstantKind, Experiment, LawChoice, OutFormat, Task};
use crate::asymptote::{catalog, predict_law, GrowthLaw, LawForm};
use crate::engine::{iterate, Trajectory};
use crate::quad::DEFAULT_PANEL_BUDGET;
use crate::series::{euler_mascheroni, stieltjes, sum_alternating_with, SeriesOptions};
use crate::verify::{ratio_report_values, ConvergenceReport, Trend};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

/// Identity residual a series experiment must stay under to pass.
pub const RESIDUAL_GATE: f64 = 1e-10;

/// Cumulative-integral tolerance used when a law is built by prediction.
const PREDICT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub status: Status,
    pub final_ratios: BTreeMap<String, f64>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub config_digest: String,
    pub experiments: Vec<ManifestEntry>,
}

pub struct RunSettings {
    pub panel_budget: Option<u64>,
}

impl RunSettings {
    fn series_options(&self) -> SeriesOptions {
        SeriesOptions {
            panel_budget: self.panel_budget.unwrap_or(DEFAULT_PANEL_BUDGET),
            ..SeriesOptions::default()
        }
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), String> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    fs::rename(tmp, path).map_err(|e| format!("cannot rename into {}: {e}", path.display()))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// The value a stream's table reports: the raw state, except for the
/// second-term comparison, which tables the residue it judges.
fn table_value(law: &GrowthLaw, n: u64, raw: f64) -> f64 {
    if matches!(law.form, LawForm::SecondTerm) {
        1.0 - n as f64 * raw
    } else {
        raw
    }
}

fn csv_table(
    checkpoints: &[u64],
    values: &[f64],
    law: &GrowthLaw,
) -> Result<String, String> {
    let mut out = String::from("n,value,prediction,ratio,abs_ratio_err\n");
    for (&n, &raw) in checkpoints.iter().zip(values) {
        if n < 3 {
            continue;
        }
        let prediction = law
            .evaluate(n as f64)
            .map_err(|e| format!("law evaluation at n = {n}: {e}"))?;
        let value = table_value(law, n, raw);
        let ratio = value / prediction;
        let _ = writeln!(
            out,
            "{n},{},{},{},{}",
            fmt_f64(value),
            fmt_f64(prediction),
            fmt_f64(ratio),
            fmt_f64((ratio - 1.0).abs()),
        );
    }
    Ok(out)
}

struct StreamOutcome {
    stream: &'static str,
    file_suffix: &'static str,
    report: ConvergenceReport,
    csv: String,
}

fn judge_stream(
    stream: &'static str,
    file_suffix: &'static str,
    checkpoints: &[u64],
    values: &[f64],
    law: &GrowthLaw,
    tolerance: f64,
) -> Result<StreamOutcome, String> {
    let report = ratio_report_values(checkpoints, values, law, tolerance)
        .map_err(|e| format!("{stream}: {e}"))?;
    let csv = csv_table(checkpoints, values, law)?;
    Ok(StreamOutcome {
        stream,
        file_suffix,
        report,
        csv,
    })
}

fn run_trajectory(
    exp: &Experiment,
    spec: &crate::engine::RecurrenceSpec,
    schedule: &crate::schedule::Schedule,
    law: &LawChoice,
    settings: &RunSettings,
    out_dir: &Path,
) -> Result<(Status, BTreeMap<String, f64>), String> {
    let traj: Trajectory = iterate(spec, schedule).map_err(|e| e.to_string())?;
    if let Some((n, _)) = traj.terminated_at {
        return Err(format!("run overflowed at step {n}"));
    }

    let mut streams: Vec<(&'static str, &'static str, &[f64], GrowthLaw)> = Vec::new();
    match law {
        LawChoice::Catalog => {
            let set = catalog(spec);
            if let Some(l) = set.sequence {
                streams.push(("sequence", "", &traj.values, l));
            }
            if let (Some(l), Some(b)) = (set.sequence_b, traj.values_b.as_deref()) {
                streams.push(("sequence_b", "_b", b, l));
            }
            if let (Some(l), Some(aux)) = (set.aux_sum, traj.aux_sums.as_deref()) {
                streams.push(("aux_sum", "_aux", aux, l));
            }
            if let Some(l) = set.second_term {
                streams.push(("second_term", "_second_term", &traj.values, l));
            }
            if streams.is_empty() {
                return Err(
                    "the catalog has no law for this family; use law = \"predict\"".to_string()
                );
            }
        }
        LawChoice::Predict => {
            let (f, g) = match spec {
                crate::engine::RecurrenceSpec::FirstOrderInverse { f, g, .. } => (f, g.as_ref()),
                _ => unreachable!("config validation pins predict to first_order_inverse"),
            };
            let l = predict_law(f, g, PREDICT_TOL, settings.panel_budget.unwrap_or(DEFAULT_PANEL_BUDGET))
                .map_err(|e| e.to_string())?;
            streams.push(("sequence", "", &traj.values, l));
        }
        LawChoice::Closed {
            constant,
            power,
            log_power,
        } => {
            let l = GrowthLaw {
                form: LawForm::ClosedForm {
                    constant: *constant,
                    power: *power,
                    log_power: *log_power,
                },
                description: format!(
                    "configured closed form {constant} * n^{power} * (ln n)^{log_power}"
                ),
            };
            streams.push(("sequence", "", &traj.values, l));
        }
    }

    let mut outcomes = Vec::new();
    for (stream, suffix, values, law) in &streams {
        outcomes.push(judge_stream(
            stream,
            suffix,
            &traj.checkpoints,
            values,
            law,
            exp.tolerance,
        )?);
    }

    match exp.format {
        OutFormat::Csv => {
            for o in &outcomes {
                let path = out_dir.join(format!("{}{}.csv", exp.stem, o.file_suffix));
                write_atomic(&path, &o.csv)?;
            }
        }
        OutFormat::Json => {
            let map: BTreeMap<&str, &ConvergenceReport> =
                outcomes.iter().map(|o| (o.stream, &o.report)).collect();
            let body = serde_json::to_string_pretty(&map).expect("reports serialize") + "\n";
            write_atomic(&out_dir.join(format!("{}.json", exp.stem)), &body)?;
        }
    }

    let mut final_ratios = BTreeMap::new();
    let mut all_converging = true;
    for o in &outcomes {
        final_ratios.insert(o.stream.to_string(), o.report.final_ratio);
        all_converging &= o.report.trend == Trend::Converging;
    }
    let status = if all_converging {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok((status, final_ratios))
}

#[derive(Serialize)]
struct SeriesFile<'a> {
    #[serde(flatten)]
    result: &'a crate::series::SeriesResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<f64>,
    status: Status,
}

fn run_series(
    exp: &Experiment,
    f: &crate::funcdsl::Expr,
    n: u64,
    expected: Option<f64>,
    settings: &RunSettings,
    out_dir: &Path,
) -> Result<(Status, BTreeMap<String, f64>), String> {
    let result =
        sum_alternating_with(f, n, &settings.series_options()).map_err(|e| e.to_string())?;
    let mut ok = result.identity_residual <= RESIDUAL_GATE;
    if let Some(e) = expected {
        ok &= (result.estimated_sum - e).abs() <= exp.tolerance;
    }
    let status = if ok { Status::Pass } else { Status::Fail };
    let body = serde_json::to_string_pretty(&SeriesFile {
        result: &result,
        expected,
        status,
    })
    .expect("series results serialize")
        + "\n";
    write_atomic(&out_dir.join(format!("{}.json", exp.stem)), &body)?;

    let mut final_ratios = BTreeMap::new();
    final_ratios.insert("estimated_sum".to_string(), result.estimated_sum);
    final_ratios.insert("identity_residual".to_string(), result.identity_residual);
    Ok((status, final_ratios))
}

#[derive(Serialize)]
struct ConstantFile {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_bound: Option<f64>,
    n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<f64>,
    status: Status,
}

fn run_constant(
    exp: &Experiment,
    which: ConstantKind,
    n: u64,
    expected: Option<f64>,
    out_dir: &Path,
) -> Result<(Status, BTreeMap<String, f64>), String> {
    let (value, bound) = match which {
        ConstantKind::Gamma => {
            let (v, b) = euler_mascheroni(n).map_err(|e| e.to_string())?;
            (v, Some(b))
        }
        ConstantKind::Stieltjes { alpha } => (stieltjes(alpha, n).map_err(|e| e.to_string())?, None),
    };
    let ok = expected.map_or(true, |e| (value - e).abs() <= exp.tolerance);
    let status = if ok { Status::Pass } else { Status::Fail };
    let body = serde_json::to_string_pretty(&ConstantFile {
        value,
        error_bound: bound,
        n,
        expected,
        status,
    })
    .expect("constant results serialize")
        + "\n";
    write_atomic(&out_dir.join(format!("{}.json", exp.stem)), &body)?;

    let mut final_ratios = BTreeMap::new();
    final_ratios.insert("value".to_string(), value);
    Ok((status, final_ratios))
}

fn execute(
    exp: &Experiment,
    settings: &RunSettings,
    out_dir: &Path,
) -> (Status, BTreeMap<String, f64>, Option<String>) {
    let outcome = match &exp.task {
        Task::Trajectory {
            spec,
            schedule,
            law,
        } => run_trajectory(exp, spec, schedule, law, settings, out_dir),
        Task::Series { f, n, expected } => run_series(exp, f, *n, *expected, settings, out_dir),
        Task::Constant { which, n, expected } => {
            run_constant(exp, *which, *n, *expected, out_dir)
        }
    };
    match outcome {
        Ok((status, ratios)) => (status, ratios, None),
        Err(msg) => (Status::Error, BTreeMap::new(), Some(msg)),
    }
}

/// Run every experiment, write the manifest, and return the process exit
/// code: 0 all passed, 1 some trend failed, 2 something errored.
pub fn run_all(
    experiments: &[Experiment],
    config_digest: String,
    out_dir: &Path,
    settings: &RunSettings,
) -> Result<i32, String> {
    fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", out_dir.display()))?;

    let mut entries = Vec::with_capacity(experiments.len());
    for exp in experiments {
        let start = Instant::now();
        let (status, final_ratios, message) = execute(exp, settings, out_dir);
        let wall_time_s = start.elapsed().as_secs_f64();
        match (&status, &message) {
            (Status::Error, Some(m)) => println!("experiment {}: error ({m})", exp.name),
            (s, _) => println!(
                "experiment {}: {} ({wall_time_s:.2}s)",
                exp.name,
                if *s == Status::Pass { "pass" } else { "FAIL" }
            ),
        }
        entries.push(ManifestEntry {
            name: exp.name.clone(),
            status,
            final_ratios,
            wall_time_s,
            message,
        });
    }

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_digest,
        experiments: entries,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&out_dir.join("manifest.json"), &body)?;

    let any_error = manifest
        .experiments
        .iter()
        .any(|e| e.status == Status::Error);
    let any_fail = manifest
        .experiments
        .iter()
        .any(|e| e.status == Status::Fail);
    Ok(if any_error {
        2
    } else if any_fail {
        1
    } else {
        0
    })
}
