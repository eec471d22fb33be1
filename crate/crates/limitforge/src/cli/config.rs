//! Experiment configuration.
//!
//! A config file is flat TOML: one `[[experiment]]` block per experiment,
//! scalar keys and at most one array level, so files stay hand-editable and
//! diff-friendly. Blocks resolve to [`Experiment`] values; the digest is
//! taken over the resolved form, so key order in the file never matters and
//! command-line overrides are part of what the digest certifies.

use crate::engine::{Driver, RecurrenceSpec};
use crate::funcdsl::{parse, Expr};
use crate::schedule::Schedule;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    experiment: Vec<ExperimentBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentBlock {
    name: String,
    /// "recurrence" (default), "series", or "constant".
    kind: Option<String>,
    family: Option<String>,
    f: Option<String>,
    g: Option<String>,
    a1: Option<f64>,
    b1: Option<f64>,
    x1: Option<f64>,
    p: Option<u32>,
    q: Option<u32>,
    driver: Option<String>,
    n_max: Option<u64>,
    /// Sample count for series and constant tasks.
    n: Option<u64>,
    /// Constant selector: "gamma" or "stieltjes".
    which: Option<String>,
    alpha: Option<u32>,
    schedule: Option<ScheduleField>,
    law: Option<LawField>,
    tolerance: Option<f64>,
    expected: Option<f64>,
    format: Option<String>,
    out: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScheduleField {
    Named(String),
    Explicit(Vec<u64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LawField {
    Named(String),
    /// `[constant, power, log_power]`.
    Closed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Csv,
    Json,
}

impl OutFormat {
    fn parse(s: &str) -> Result<OutFormat, String> {
        match s {
            "csv" => Ok(OutFormat::Csv),
            "json" => Ok(OutFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }

    fn name(self) -> &'static str {
        match self {
            OutFormat::Csv => "csv",
            OutFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LawChoice {
    Catalog,
    Predict,
    Closed {
        constant: f64,
        power: f64,
        log_power: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub enum ConstantKind {
    Gamma,
    Stieltjes { alpha: u32 },
}

#[derive(Debug)]
pub enum Task {
    Trajectory {
        spec: RecurrenceSpec,
        schedule: Schedule,
        law: LawChoice,
    },
    Series {
        f: Expr,
        n: u64,
        expected: Option<f64>,
    },
    Constant {
        which: ConstantKind,
        n: u64,
        expected: Option<f64>,
    },
}

#[derive(Debug)]
pub struct Experiment {
    pub name: String,
    pub task: Task,
    pub tolerance: f64,
    pub format: OutFormat,
    /// Output file stem inside the output directory.
    pub stem: String,
}

/// Command-line overrides applied during resolution. The n_max override is
/// a cap: runs longer than it are shortened, shorter ones are untouched.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub tolerance: Option<f64>,
    pub n_max: Option<u64>,
    pub schedule: Option<String>,
    pub format: Option<OutFormat>,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Build a recurrence spec from loose fields; shared by config resolution
/// and the `iterate` subcommand.
pub fn build_spec(
    family: &str,
    f: Option<&str>,
    g: Option<&str>,
    a1: Option<f64>,
    b1: Option<f64>,
    x1: Option<f64>,
    p: Option<u32>,
    q: Option<u32>,
    driver: Option<&str>,
) -> Result<RecurrenceSpec, String> {
    let parse_expr = |label: &str, src: &str| {
        parse(src).map_err(|e| format!("cannot parse {label} = `{src}`: {e}"))
    };
    match family {
        "first_order_inverse" => {
            let f = f.ok_or("family first_order_inverse needs f")?;
            let f = parse_expr("f", f)?;
            let g = match g {
                Some(src) => Some(parse_expr("g", src)?),
                None => None,
            };
            Ok(RecurrenceSpec::FirstOrderInverse {
                f,
                g,
                a1: a1.unwrap_or(1.0),
            })
        }
        "cumulative" => Ok(RecurrenceSpec::CumulativeSecondOrder {
            a1: a1.unwrap_or(1.0),
        }),
        "tauberian" => {
            let p = p.ok_or("family tauberian needs p")?;
            let q = q.ok_or("family tauberian needs q")?;
            Ok(RecurrenceSpec::TauberianGenerator { p, q })
        }
        "coupled" => Ok(RecurrenceSpec::Coupled {
            a1: a1.unwrap_or(1.0),
            b1: b1.unwrap_or(1.0),
        }),
        "quadratic" => {
            let x1 = x1.ok_or("family quadratic needs x1")?;
            Ok(RecurrenceSpec::QuadraticMap { x1 })
        }
        "driven_sqrt" => {
            let driver = match driver.ok_or("family driven_sqrt needs driver")? {
                "one" => Driver::One,
                "sin_squared" => Driver::SinSquared,
                other => return Err(format!("unknown driver `{other}` (one or sin_squared)")),
            };
            Ok(RecurrenceSpec::DrivenSqrt {
                driver,
                a1: a1.unwrap_or(1.0),
            })
        }
        other => Err(format!(
            "unknown family `{other}` (first_order_inverse, cumulative, tauberian, \
             coupled, quadratic, driven_sqrt)"
        )),
    }
}

fn resolve_block(b: &ExperimentBlock, ov: &Overrides) -> Result<Experiment, String> {
    let fail = |msg: String| Err(format!("experiment `{}`: {msg}", b.name));
    let kind = b.kind.as_deref().unwrap_or("recurrence");

    let task = match kind {
        "recurrence" => {
            let family = match b.family.as_deref() {
                Some(f) => f,
                None => return fail("recurrence experiments need a family".into()),
            };
            let spec = match build_spec(
                family,
                b.f.as_deref(),
                b.g.as_deref(),
                b.a1,
                b.b1,
                b.x1,
                b.p,
                b.q,
                b.driver.as_deref(),
            ) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };

            // Horizon first: config n_max (or the last explicit checkpoint),
            // then the cap from the command line.
            let explicit_last = match &b.schedule {
                Some(ScheduleField::Explicit(points)) => points.last().copied(),
                _ => None,
            };
            let n_max = match (b.n_max, explicit_last) {
                (Some(n), Some(last)) if n < last => {
                    return fail(format!(
                        "n_max {n} is below the last scheduled checkpoint {last}"
                    ));
                }
                (Some(n), _) => n,
                (None, Some(last)) => last,
                (None, None) => return fail("recurrence experiments need n_max".into()),
            };
            let n_max = n_max.min(ov.n_max.unwrap_or(u64::MAX));
            if n_max == 0 {
                return fail("n_max must be at least 1".into());
            }

            let schedule = match (&ov.schedule, &b.schedule) {
                (Some(name), _) | (None, Some(ScheduleField::Named(name))) => match name.as_str() {
                    "geometric" => Schedule::Geometric125 { n_max },
                    other => return fail(format!("unknown schedule `{other}`")),
                },
                (None, Some(ScheduleField::Explicit(points))) => {
                    let kept: Vec<u64> = points.iter().copied().filter(|&p| p <= n_max).collect();
                    if kept.is_empty() {
                        return fail(format!("no scheduled checkpoint is <= n_max {n_max}"));
                    }
                    Schedule::Explicit(kept)
                }
                (None, None) => Schedule::Geometric125 { n_max },
            };

            let law = match &b.law {
                None => LawChoice::Catalog,
                Some(LawField::Named(name)) => match name.as_str() {
                    "catalog" => LawChoice::Catalog,
                    "predict" => {
                        if !matches!(spec, RecurrenceSpec::FirstOrderInverse { .. }) {
                            return fail(
                                "law = \"predict\" only applies to first_order_inverse".into(),
                            );
                        }
                        LawChoice::Predict
                    }
                    other => return fail(format!("unknown law `{other}`")),
                },
                Some(LawField::Closed(v)) => {
                    if v.len() != 3 {
                        return fail("closed-form law needs [constant, power, log_power]".into());
                    }
                    LawChoice::Closed {
                        constant: v[0],
                        power: v[1],
                        log_power: v[2],
                    }
                }
            };
            Task::Trajectory {
                spec,
                schedule,
                law,
            }
        }
        "series" => {
            let f = match b.f.as_deref() {
                Some(src) => match parse(src) {
                    Ok(e) => e,
                    Err(e) => return fail(format!("cannot parse f = `{src}`: {e}")),
                },
                None => return fail("series experiments need f".into()),
            };
            let n = match b.n {
                Some(n) => n,
                None => return fail("series experiments need n".into()),
            };
            Task::Series {
                f,
                n: n.min(ov.n_max.unwrap_or(u64::MAX)),
                expected: b.expected,
            }
        }
        "constant" => {
            let which = match b.which.as_deref() {
                Some("gamma") => ConstantKind::Gamma,
                Some("stieltjes") => match b.alpha {
                    Some(alpha) => ConstantKind::Stieltjes { alpha },
                    None => return fail("stieltjes experiments need alpha".into()),
                },
                Some(other) => return fail(format!("unknown constant `{other}`")),
                None => return fail("constant experiments need which".into()),
            };
            let n = match b.n {
                Some(n) => n,
                None => return fail("constant experiments need n".into()),
            };
            Task::Constant {
                which,
                n: n.min(ov.n_max.unwrap_or(u64::MAX)),
                expected: b.expected,
            }
        }
        other => return fail(format!("unknown kind `{other}`")),
    };

    let format = match (ov.format, b.format.as_deref()) {
        (Some(f), _) => f,
        (None, Some(s)) => match OutFormat::parse(s) {
            Ok(f) => f,
            Err(e) => return fail(e),
        },
        (None, None) => OutFormat::Csv,
    };
    let stem = b.out.clone().unwrap_or_else(|| b.name.clone());
    if stem.contains('/') || stem.contains('\\') || stem.is_empty() {
        return fail(format!("output stem `{stem}` must be a bare file name"));
    }
    Ok(Experiment {
        name: b.name.clone(),
        task,
        tolerance: ov.tolerance.or(b.tolerance).unwrap_or(DEFAULT_TOLERANCE),
        format,
        stem,
    })
}

fn canonical_lines(e: &Experiment, out: &mut String) {
    let _ = writeln!(out, "[{}]", e.name);
    match &e.task {
        Task::Trajectory {
            spec,
            schedule,
            law,
        } => {
            let _ = writeln!(out, "kind=recurrence");
            match spec {
                RecurrenceSpec::FirstOrderInverse { f, g, a1 } => {
                    let _ = writeln!(out, "spec=first_order_inverse");
                    let _ = writeln!(out, "f={}", f.render());
                    if let Some(g) = g {
                        let _ = writeln!(out, "g={}", g.render());
                    }
                    let _ = writeln!(out, "a1={a1:?}");
                }
                RecurrenceSpec::CumulativeSecondOrder { a1 } => {
                    let _ = writeln!(out, "spec=cumulative");
                    let _ = writeln!(out, "a1={a1:?}");
                }
                RecurrenceSpec::TauberianGenerator { p, q } => {
                    let _ = writeln!(out, "spec=tauberian");
                    let _ = writeln!(out, "p={p}");
                    let _ = writeln!(out, "q={q}");
                }
                RecurrenceSpec::Coupled { a1, b1 } => {
                    let _ = writeln!(out, "spec=coupled");
                    let _ = writeln!(out, "a1={a1:?}");
                    let _ = writeln!(out, "b1={b1:?}");
                }
                RecurrenceSpec::QuadraticMap { x1 } => {
                    let _ = writeln!(out, "spec=quadratic");
                    let _ = writeln!(out, "x1={x1:?}");
                }
                RecurrenceSpec::DrivenSqrt { driver, a1 } => {
                    let _ = writeln!(out, "spec=driven_sqrt");
                    let _ = writeln!(out, "driver={driver:?}");
                    let _ = writeln!(out, "a1={a1:?}");
                }
            }
            match schedule {
                Schedule::Geometric125 { n_max } => {
                    let _ = writeln!(out, "schedule=geometric:{n_max}");
                }
                Schedule::Explicit(points) => {
                    let _ = write!(out, "schedule=explicit:");
                    for (i, p) in points.iter().enumerate() {
                        let _ = write!(out, "{}{p}", if i > 0 { "," } else { "" });
                    }
                    let _ = writeln!(out);
                }
            }
            match law {
                LawChoice::Catalog => {
                    let _ = writeln!(out, "law=catalog");
                }
                LawChoice::Predict => {
                    let _ = writeln!(out, "law=predict");
                }
                LawChoice::Closed {
                    constant,
                    power,
                    log_power,
                } => {
                    let _ = writeln!(out, "law=closed:{constant:?},{power:?},{log_power:?}");
                }
            }
        }
        Task::Series { f, n, expected } => {
            let _ = writeln!(out, "kind=series");
            let _ = writeln!(out, "f={}", f.render());
            let _ = writeln!(out, "n={n}");
            if let Some(e) = expected {
                let _ = writeln!(out, "expected={e:?}");
            }
        }
        Task::Constant { which, n, expected } => {
            let _ = writeln!(out, "kind=constant");
            match which {
                ConstantKind::Gamma => {
                    let _ = writeln!(out, "which=gamma");
                }
                ConstantKind::Stieltjes { alpha } => {
                    let _ = writeln!(out, "which=stieltjes");
                    let _ = writeln!(out, "alpha={alpha}");
                }
            }
            let _ = writeln!(out, "n={n}");
            if let Some(e) = expected {
                let _ = writeln!(out, "expected={e:?}");
            }
        }
    }
    let _ = writeln!(out, "tolerance={:?}", e.tolerance);
    let _ = writeln!(out, "format={}", e.format.name());
    let _ = writeln!(out, "stem={}", e.stem);
}

/// Parse and resolve a config file. Returns the experiments in file order
/// plus the digest of their resolved, name-sorted canonical form.
pub fn resolve(text: &str, overrides: &Overrides) -> Result<(Vec<Experiment>, String), String> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| format!("config: {e}"))?;
    if file.experiment.is_empty() {
        return Err("config declares no experiments".to_string());
    }
    let mut seen = BTreeSet::new();
    for b in &file.experiment {
        if !seen.insert(b.name.as_str()) {
            return Err(format!("duplicate experiment name `{}`", b.name));
        }
    }
    let experiments: Vec<Experiment> = file
        .experiment
        .iter()
        .map(|b| resolve_block(b, overrides))
        .collect::<Result<_, _>>()?;

    let mut ordered: Vec<&Experiment> = experiments.iter().collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));
    let mut canon = String::new();
    for e in ordered {
        canonical_lines(e, &mut canon);
    }
    let digest = hex(&Sha256::digest(canon.as_bytes()));
    Ok((experiments, digest))
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[[experiment]]
name = "flagship"
family = "first_order_inverse"
f = "t"
n_max = 1000
tolerance = 1e-4

[[experiment]]
name = "alt"
kind = "series"
f = "1/t"
n = 100
expected = 0.6931471805599453
"#;

    #[test]
    fn resolves_and_digests() {
        let (exps, digest) = resolve(BASIC, &Overrides::default()).unwrap();
        assert_eq!(exps.len(), 2);
        assert_eq!(exps[0].name, "flagship");
        assert!(matches!(exps[0].task, Task::Trajectory { .. }));
        assert_eq!(exps[0].tolerance, 1e-4);
        assert!(matches!(exps[1].task, Task::Series { n: 100, .. }));
        assert_eq!(digest.len(), 64);

        // Key order inside a block must not matter.
        let reordered = r#"
[[experiment]]
f = "t"
tolerance = 1e-4
name = "flagship"
n_max = 1000
family = "first_order_inverse"

[[experiment]]
expected = 0.6931471805599453
n = 100
kind = "series"
name = "alt"
f = "1/t"
"#;
        let (_, digest2) = resolve(reordered, &Overrides::default()).unwrap();
        assert_eq!(digest, digest2);

        // Changing anything that matters must show up.
        let (_, digest3) = resolve(&BASIC.replace("1e-4", "1e-5"), &Overrides::default()).unwrap();
        assert_ne!(digest, digest3);
    }

    #[test]
    fn n_max_cap_trims_and_rebuilds() {
        let ov = Overrides {
            n_max: Some(100),
            ..Default::default()
        };
        let (exps, _) = resolve(BASIC, &ov).unwrap();
        match &exps[0].task {
            Task::Trajectory { schedule, .. } => {
                assert_eq!(schedule, &Schedule::Geometric125 { n_max: 100 });
            }
            other => panic!("unexpected task {other:?}"),
        }

        let explicit = r#"
[[experiment]]
name = "x"
family = "quadratic"
x1 = 0.5
schedule = [1, 10, 1000]
"#;
        let (exps, _) = resolve(explicit, &ov).unwrap();
        match &exps[0].task {
            Task::Trajectory { schedule, .. } => {
                assert_eq!(schedule, &Schedule::Explicit(vec![1, 10]));
            }
            other => panic!("unexpected task {other:?}"),
        }
    }

    #[test]
    fn validation_names_the_experiment() {
        let bad = r#"
[[experiment]]
name = "shortfall"
family = "quadratic"
x1 = 0.5
n_max = 50
schedule = [1, 10, 1000]
"#;
        let err = resolve(bad, &Overrides::default()).unwrap_err();
        assert!(err.contains("shortfall"), "{err}");
        assert!(err.contains("below the last scheduled checkpoint"), "{err}");

        let dup = format!("{BASIC}\n{}", BASIC.replace("alt", "alt2"));
        assert!(resolve(&dup, &Overrides::default())
            .unwrap_err()
            .contains("duplicate"));

        let unknown_key = r#"
[[experiment]]
name = "x"
family = "quadratic"
x1 = 0.5
n_max = 10
typo_key = 3
"#;
        assert!(resolve(unknown_key, &Overrides::default()).is_err());

        let bad_expr = r#"
[[experiment]]
name = "parse-me"
family = "first_order_inverse"
f = "t^(0.5"
n_max = 10
"#;
        let err = resolve(bad_expr, &Overrides::default()).unwrap_err();
        assert!(err.contains("parse-me"), "{err}");
    }

    #[test]
    fn predict_law_needs_expressions() {
        let bad = r#"
[[experiment]]
name = "p"
family = "coupled"
n_max = 10
law = "predict"
"#;
        assert!(resolve(bad, &Overrides::default())
            .unwrap_err()
            .contains("first_order_inverse"));
    }
}
