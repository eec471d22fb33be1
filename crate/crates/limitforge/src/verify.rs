//! Judges trajectories against growth laws.
//!
//! A trajectory is evidence, not proof: this module turns the evidence into
//! verdicts. Ratio reports track `a_n / law(n)` along the checkpoints and
//! call the trend; inequality audits check the sharp bounds each family is
//! supposed to obey at every recorded step; the limit classifier decides,
//! for the coupled family, which of the two sequences is running away.
//!
//! Verdicts are deterministic rules over deterministic data. Nothing here
//! is statistical.

use crate::asymptote::{AsymptoteError, GrowthLaw, LawForm};
use crate::engine::{Driver, RecurrenceSpec, Trajectory};
use crate::kahan::Kahan;
use serde::Serialize;
use std::fmt;

/// Residual level at which the generator family's defining identity is
/// considered intact.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Relative agreement of successive checkpoints that flags an apparently
/// finite limit. Heuristic: far below any plausible slow divergence at
/// reachable n.
pub const FINITE_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyError {
    Law(AsymptoteError),
    TooFewCheckpoints { needed: usize, got: usize },
    NoRegisteredInequality { family: String },
    WrongFamily { expected: &'static str, got: String },
    MalformedTrajectory { what: &'static str },
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyError::Law(e) => write!(f, "law evaluation failed: {e}"),
            VerifyError::TooFewCheckpoints { needed, got } => {
                write!(f, "need at least {needed} usable checkpoints, got {got}")
            }
            VerifyError::NoRegisteredInequality { family } => {
                write!(f, "no registered inequality for {family}")
            }
            VerifyError::WrongFamily { expected, got } => {
                write!(f, "expected a {expected} trajectory, got {got}")
            }
            VerifyError::MalformedTrajectory { what } => {
                write!(f, "malformed trajectory: {what}")
            }
        }
    }
}

impl std::error::Error for VerifyError {}

impl From<AsymptoteError> for VerifyError {
    fn from(e: AsymptoteError) -> Self {
        VerifyError::Law(e)
    }
}

fn family_name(spec: &RecurrenceSpec) -> String {
    match spec {
        RecurrenceSpec::FirstOrderInverse { f, g, .. } => match g {
            Some(g) => format!("FirstOrderInverse(f = {f}, g = {g})"),
            None => format!("FirstOrderInverse(f = {f})"),
        },
        RecurrenceSpec::CumulativeSecondOrder { .. } => "CumulativeSecondOrder".to_string(),
        RecurrenceSpec::TauberianGenerator { p, q } => format!("TauberianGenerator({p},{q})"),
        RecurrenceSpec::Coupled { .. } => "Coupled".to_string(),
        RecurrenceSpec::QuadraticMap { .. } => "QuadraticMap".to_string(),
        RecurrenceSpec::DrivenSqrt { driver, .. } => format!("DrivenSqrt({driver:?})"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Converging,
    Stalled,
    Diverging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    /// Error shrinks like `n^{-theta}`.
    Power,
    /// Error shrinks like `(ln n)^{-theta}`.
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedRate {
    pub theta: f64,
    pub model: RateModel,
}

/// Ratio-convergence record for one value stream against one law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Checkpoints that entered the comparison (n >= 3).
    pub checkpoints: Vec<u64>,
    /// `value / law(n)` per checkpoint; second-term laws compare the
    /// residue `1 - n x_n` against `ln n / n` instead.
    pub ratios: Vec<f64>,
    pub final_ratio: f64,
    pub trend: Trend,
    /// Diagnostic fit of `|ratio - 1|` against the two error models.
    /// Absent when fewer than three nonzero errors survive.
    pub fitted_rate: Option<FittedRate>,
    pub tolerance_used: f64,
}

/// Least squares for `y = a + b x`; returns `(b, rss)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (a + b * x);
            r * r
        })
        .sum();
    Some((b, rss))
}

fn fit_rate(ns: &[u64], errs: &[f64]) -> Option<FittedRate> {
    let mut log_n = Vec::new();
    let mut log_log_n = Vec::new();
    let mut log_e = Vec::new();
    for (&n, &e) in ns.iter().zip(errs) {
        if e > 0.0 && e.is_finite() {
            log_n.push((n as f64).ln());
            log_log_n.push((n as f64).ln().ln());
            log_e.push(e.ln());
        }
    }
    if log_e.len() < 3 {
        return None;
    }
    let (b_pow, rss_pow) = least_squares(&log_n, &log_e)?;
    let (b_log, rss_log) = least_squares(&log_log_n, &log_e)?;
    // Power wins ties; it is the commoner shape in the catalog.
    if rss_pow <= rss_log {
        Some(FittedRate {
            theta: -b_pow,
            model: RateModel::Power,
        })
    } else {
        Some(FittedRate {
            theta: -b_log,
            model: RateModel::Logarithmic,
        })
    }
}

fn call_trend(errs: &[f64], tolerance: f64) -> Trend {
    let k = errs.len();
    let (e1, e2, e3) = (errs[k - 3], errs[k - 2], errs[k - 1]);
    if e1 >= e2 && e2 >= e3 && e3 <= tolerance {
        Trend::Converging
    } else if e1 < e2 && e2 < e3 && e3 > tolerance {
        Trend::Diverging
    } else {
        Trend::Stalled
    }
}

/// Compare a raw value stream against a law. Checkpoints below 3 are
/// dropped: logarithmic laws vanish at n = 1 and a single doubling is not
/// evidence of anything.
pub fn ratio_report_values(
    checkpoints: &[u64],
    values: &[f64],
    law: &GrowthLaw,
    tolerance: f64,
) -> Result<ConvergenceReport, VerifyError> {
    if checkpoints.len() != values.len() {
        return Err(VerifyError::MalformedTrajectory {
            what: "checkpoint and value lengths differ",
        });
    }
    let second_term = matches!(law.form, LawForm::SecondTerm);
    let mut kept = Vec::new();
    let mut ratios = Vec::new();
    for (&n, &v) in checkpoints.iter().zip(values) {
        if n < 3 {
            continue;
        }
        let prediction = law.evaluate(n as f64)?;
        let numerator = if second_term { 1.0 - n as f64 * v } else { v };
        kept.push(n);
        ratios.push(numerator / prediction);
    }
    if kept.len() < 3 {
        return Err(VerifyError::TooFewCheckpoints {
            needed: 3,
            got: kept.len(),
        });
    }
    let errs: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let trend = call_trend(&errs, tolerance);
    let fitted_rate = fit_rate(&kept, &errs);
    Ok(ConvergenceReport {
        final_ratio: *ratios.last().unwrap(),
        checkpoints: kept,
        ratios,
        trend,
        fitted_rate,
        tolerance_used: tolerance,
    })
}

/// Compare a trajectory's primary stream against a law.
pub fn ratio_report(
    traj: &Trajectory,
    law: &GrowthLaw,
    tolerance: f64,
) -> Result<ConvergenceReport, VerifyError> {
    ratio_report_values(&traj.checkpoints, &traj.values, law, tolerance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub n: u64,
    pub lhs: f64,
    pub rhs: f64,
}

/// One audited inequality, stated as `lhs >= rhs` (or strictly greater).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    /// Checkpoints the check applied to.
    pub evaluated: usize,
    pub first_violation: Option<Violation>,
    /// Smallest `lhs - rhs` seen; zero marks a sharp boundary.
    pub min_slack: f64,
    pub min_slack_at: u64,
}

impl InequalityCheck {
    fn run(
        name: &'static str,
        strict: bool,
        rows: impl Iterator<Item = (u64, f64, f64)>,
    ) -> InequalityCheck {
        let mut evaluated = 0;
        let mut first_violation = None;
        let mut min_slack = f64::INFINITY;
        let mut min_slack_at = 0;
        for (n, lhs, rhs) in rows {
            evaluated += 1;
            let slack = lhs - rhs;
            let ok = if strict { slack > 0.0 } else { slack >= 0.0 };
            if !ok && first_violation.is_none() {
                first_violation = Some(Violation { n, lhs, rhs });
            }
            if slack < min_slack {
                min_slack = slack;
                min_slack_at = n;
            }
        }
        InequalityCheck {
            name,
            evaluated,
            first_violation,
            min_slack,
            min_slack_at,
        }
    }

    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub family: String,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }
}

fn is_plain_inverse(f: &crate::funcdsl::Expr, g: &Option<crate::funcdsl::Expr>, a1: f64) -> bool {
    let f_is_t = matches!(f.power_form(), Some(p) if p.coeff == 1.0 && p.exponent == 1.0);
    let g_is_one = match g {
        None => true,
        Some(g) => matches!(g.power_form(), Some(p) if p.coeff == 1.0 && p.exponent == 0.0),
    };
    f_is_t && g_is_one && a1 == 1.0
}

/// Audit the sharp bounds registered for a family. Bounds are tied to the
/// canonical seeds they were derived for; other seeds have no registered
/// inequality.
pub fn inequality_audit(traj: &Trajectory) -> Result<InequalityReport, VerifyError> {
    let family = family_name(&traj.spec);
    let ns = &traj.checkpoints;
    let vs = &traj.values;
    let aux = traj.aux_sums.as_deref();

    let sqrt_growth_checks = |checks: &mut Vec<InequalityCheck>| {
        checks.push(InequalityCheck::run(
            "a_n^2 >= 2n",
            false,
            ns.iter().zip(vs).filter(|(&n, _)| n >= 2).map(|(&n, &a)| {
                (n, a * a, 2.0 * n as f64)
            }),
        ));
        checks.push(InequalityCheck::run(
            "a_n^2 <= 2n + ln(n-1)/2",
            false,
            ns.iter().zip(vs).filter(|(&n, _)| n >= 2).map(|(&n, &a)| {
                (n, 2.0 * n as f64 + 0.5 * ((n - 1) as f64).ln(), a * a)
            }),
        ));
    };

    let mut checks = Vec::new();
    match &traj.spec {
        RecurrenceSpec::FirstOrderInverse { f, g, a1 } if is_plain_inverse(f, g, *a1) => {
            sqrt_growth_checks(&mut checks);
        }
        RecurrenceSpec::DrivenSqrt {
            driver: Driver::One,
            a1,
        } if *a1 == 1.0 => {
            sqrt_growth_checks(&mut checks);
        }
        RecurrenceSpec::CumulativeSecondOrder { a1 } if *a1 == 1.0 => {
            let aux = aux.ok_or(VerifyError::MalformedTrajectory {
                what: "cumulative trajectory lacks aux sums",
            })?;
            checks.push(InequalityCheck::run(
                "a_n >= n",
                false,
                ns.iter().zip(vs).map(|(&n, &a)| (n, a, n as f64)),
            ));
            checks.push(InequalityCheck::run(
                "A_n >= n(n+1)/2",
                false,
                ns.iter().zip(aux).map(|(&n, &s)| {
                    (n, s, 0.5 * n as f64 * (n as f64 + 1.0))
                }),
            ));
            checks.push(InequalityCheck::run(
                "2 a_n^3 >= 3 A_{n-1}^2",
                false,
                ns.iter().zip(vs.iter().zip(aux)).map(|(&n, (&a, &s))| {
                    let prev = s - a;
                    (n, 2.0 * a * a * a, 3.0 * prev * prev)
                }),
            ));
        }
        RecurrenceSpec::Coupled { .. } => {
            let bs = traj
                .values_b
                .as_deref()
                .ok_or(VerifyError::MalformedTrajectory {
                    what: "coupled trajectory lacks the second stream",
                })?;
            // The bound indexes the *next* pair, so derive one step forward
            // from the recorded state.
            checks.push(InequalityCheck::run(
                "(a_{n+1} b_{n+1})^3 >= 9n^2",
                false,
                ns.iter().zip(vs.iter().zip(bs)).map(|(&n, (&a, &b))| {
                    let an = a + 1.0 / (b * b);
                    let bn = b + 1.0 / (a * a);
                    let prod = an * bn;
                    (n, prod * prod * prod, 9.0 * (n as f64) * (n as f64))
                }),
            ));
        }
        RecurrenceSpec::QuadraticMap { .. } => {
            checks.push(InequalityCheck::run(
                "n x_n < 1",
                true,
                ns.iter().zip(vs).map(|(&n, &x)| (n, 1.0, n as f64 * x)),
            ));
        }
        RecurrenceSpec::TauberianGenerator { p, .. } => {
            let aux = aux.ok_or(VerifyError::MalformedTrajectory {
                what: "generator trajectory lacks aux sums",
            })?;
            let pi = *p as i32;
            checks.push(InequalityCheck::run(
                "|a_n^p A_n - 1| <= 1e-12",
                false,
                ns.iter().zip(vs.iter().zip(aux)).map(|(&n, (&a, &s))| {
                    (n, IDENTITY_TOL, (a.powi(pi) * s - 1.0).abs())
                }),
            ));
        }
        _ => {
            return Err(VerifyError::NoRegisteredInequality { family });
        }
    }
    Ok(InequalityReport { family, checks })
}

/// How one stream of a coupled run behaves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SequenceVerdict {
    /// Grew past 10x its start with the cube-root normalization stabilizing.
    Diverging {
        /// Final `value / n^{1/3}`.
        normalized: f64,
    },
    /// Successive checkpoints agree to within `FINITE_AGREEMENT` relatively.
    ApparentlyFinite {
        limit: f64,
        /// Cross-checks computed from the companion stream.
        support: Vec<FiniteSupportRow>,
    },
    Undetermined,
}

/// Evidence rows attached to a finite verdict. Both rates should settle
/// near 1 if the finite limit is real: the companion then grows linearly
/// at rate `1/limit^2` and the gap to the limit closes like `limit^4 / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteSupportRow {
    pub n: u64,
    /// `(companion_n / n) * limit^2`.
    pub companion_rate: f64,
    /// `n * (limit - value_n) / limit^4`.
    pub gap_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitClassification {
    pub sequence: SequenceVerdict,
    pub sequence_b: SequenceVerdict,
    /// The mutual coupling forbids two finite limits; set when the data
    /// nevertheless reads that way, so it is never reported silently.
    pub contradiction: bool,
}

fn classify_stream(ns: &[u64], vs: &[f64]) -> SequenceVerdict {
    let k = vs.len();
    let last = vs[k - 1];
    if (last - vs[k - 2]).abs() <= FINITE_AGREEMENT * last.abs() {
        return SequenceVerdict::ApparentlyFinite {
            limit: last,
            support: Vec::new(),
        };
    }
    if last >= 10.0 * vs[0] {
        let norm: Vec<f64> = ns[k - 3..]
            .iter()
            .zip(&vs[k - 3..])
            .map(|(&n, &v)| v / (n as f64).cbrt())
            .collect();
        let hi = norm.iter().cloned().fold(f64::MIN, f64::max);
        let lo = norm.iter().cloned().fold(f64::MAX, f64::min);
        if hi <= 1.25 * lo {
            return SequenceVerdict::Diverging { normalized: norm[2] };
        }
    }
    SequenceVerdict::Undetermined
}

fn support_rows(ns: &[u64], own: &[f64], companion: &[f64], limit: f64) -> Vec<FiniteSupportRow> {
    ns.iter()
        .zip(own.iter().zip(companion))
        .map(|(&n, (&v, &c))| FiniteSupportRow {
            n,
            companion_rate: c / n as f64 * (limit * limit),
            gap_rate: n as f64 * (limit - v) / limit.powi(4),
        })
        .collect()
}

/// Decide which of a coupled run's sequences diverges. Needs at least five
/// checkpoints of history.
pub fn classify_limits(traj: &Trajectory) -> Result<LimitClassification, VerifyError> {
    if !matches!(traj.spec, RecurrenceSpec::Coupled { .. }) {
        return Err(VerifyError::WrongFamily {
            expected: "Coupled",
            got: family_name(&traj.spec),
        });
    }
    if traj.checkpoints.len() < 5 {
        return Err(VerifyError::TooFewCheckpoints {
            needed: 5,
            got: traj.checkpoints.len(),
        });
    }
    let bs = traj
        .values_b
        .as_deref()
        .ok_or(VerifyError::MalformedTrajectory {
            what: "coupled trajectory lacks the second stream",
        })?;
    let ns = &traj.checkpoints;
    let mut sequence = classify_stream(ns, &traj.values);
    let mut sequence_b = classify_stream(ns, bs);
    if let SequenceVerdict::ApparentlyFinite { limit, support } = &mut sequence {
        *support = support_rows(ns, &traj.values, bs, *limit);
    }
    if let SequenceVerdict::ApparentlyFinite { limit, support } = &mut sequence_b {
        *support = support_rows(ns, bs, &traj.values, *limit);
    }
    let contradiction = matches!(sequence, SequenceVerdict::ApparentlyFinite { .. })
        && matches!(sequence_b, SequenceVerdict::ApparentlyFinite { .. });
    Ok(LimitClassification {
        sequence,
        sequence_b,
        contradiction,
    })
}

/// Running Cesàro means with compensated summation. Empty in, empty out.
pub fn abelian_average(values: &[f64]) -> Vec<f64> {
    let mut acc = Kahan::zero();
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            acc.add(v);
            acc.value() / (i + 1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptote::catalog;
    use crate::engine::iterate;
    use crate::funcdsl::parse;
    use crate::schedule::Schedule;

    fn flagship() -> RecurrenceSpec {
        RecurrenceSpec::FirstOrderInverse {
            f: parse("t").unwrap(),
            g: None,
            a1: 1.0,
        }
    }

    fn sqrt2n_law() -> GrowthLaw {
        catalog(&flagship()).sequence.unwrap()
    }

    #[test]
    fn abelian_average_hand_values() {
        assert_eq!(abelian_average(&[3.0, 3.0, 3.0]), vec![3.0, 3.0, 3.0]);
        assert_eq!(abelian_average(&[0.0, 2.0, 4.0]), vec![0.0, 1.0, 2.0]);
        assert!(abelian_average(&[]).is_empty());
    }

    #[test]
    fn self_comparison_is_a_fixed_point() {
        let law = sqrt2n_law();
        let ns = [4u64, 8, 16, 32, 64];
        let vs: Vec<f64> = ns.iter().map(|&n| law.evaluate(n as f64).unwrap()).collect();
        let rep = ratio_report_values(&ns, &vs, &law, 1e-9).unwrap();
        assert!(rep.ratios.iter().all(|&r| r == 1.0));
        assert_eq!(rep.trend, Trend::Converging);
        assert_eq!(rep.final_ratio, 1.0);
        assert!(rep.fitted_rate.is_none());
    }

    #[test]
    fn early_checkpoints_are_dropped() {
        let law = sqrt2n_law();
        let ns = [1u64, 2, 4, 8, 16, 32];
        let vs: Vec<f64> = ns.iter().map(|&n| law.evaluate(n as f64).unwrap()).collect();
        let rep = ratio_report_values(&ns, &vs, &law, 1e-9).unwrap();
        assert_eq!(rep.checkpoints, vec![4, 8, 16, 32]);

        let short = ratio_report_values(&[1, 2, 4], &vs[..3], &law, 1e-9);
        assert!(matches!(
            short,
            Err(VerifyError::TooFewCheckpoints { needed: 3, got: 1 })
        ));
    }

    #[test]
    fn trend_rules() {
        let law = sqrt2n_law();
        let ns = [10u64, 100, 1000, 10_000];

        let conv: Vec<f64> = ns
            .iter()
            .map(|&n| law.evaluate(n as f64).unwrap() * (1.0 + 1.0 / n as f64))
            .collect();
        let rep = ratio_report_values(&ns, &conv, &law, 1e-2).unwrap();
        assert_eq!(rep.trend, Trend::Converging);

        let div: Vec<f64> = ns
            .iter()
            .map(|&n| law.evaluate(n as f64).unwrap() * (1.0 + n as f64 / 1e5))
            .collect();
        let rep = ratio_report_values(&ns, &div, &law, 1e-3).unwrap();
        assert_eq!(rep.trend, Trend::Diverging);

        let stalled: Vec<f64> = ns
            .iter()
            .map(|&n| law.evaluate(n as f64).unwrap() * 1.05)
            .collect();
        let rep = ratio_report_values(&ns, &stalled, &law, 1e-3).unwrap();
        assert_eq!(rep.trend, Trend::Stalled);
    }

    #[test]
    fn rate_fit_discriminates_models() {
        let law = sqrt2n_law();
        let ns = [10u64, 100, 1000, 10_000, 100_000];

        let power: Vec<f64> = ns
            .iter()
            .map(|&n| law.evaluate(n as f64).unwrap() * (1.0 + 1.0 / n as f64))
            .collect();
        let fit = ratio_report_values(&ns, &power, &law, 1e-2)
            .unwrap()
            .fitted_rate
            .unwrap();
        assert_eq!(fit.model, RateModel::Power);
        assert!((fit.theta - 1.0).abs() < 0.05, "theta = {}", fit.theta);

        let log: Vec<f64> = ns
            .iter()
            .map(|&n| law.evaluate(n as f64).unwrap() * (1.0 + 1.0 / (n as f64).ln()))
            .collect();
        let fit = ratio_report_values(&ns, &log, &law, 1e-2)
            .unwrap()
            .fitted_rate
            .unwrap();
        assert_eq!(fit.model, RateModel::Logarithmic);
        assert!((fit.theta - 1.0).abs() < 0.05, "theta = {}", fit.theta);
    }

    #[test]
    fn flagship_run_converges_to_its_law() {
        let traj = iterate(&flagship(), &Schedule::Geometric125 { n_max: 100_000 }).unwrap();
        let rep = ratio_report(&traj, &sqrt2n_law(), 1e-4).unwrap();
        assert_eq!(rep.trend, Trend::Converging);
        assert!((rep.final_ratio - 1.0).abs() < 1e-4);
        let fit = rep.fitted_rate.unwrap();
        assert_eq!(fit.model, RateModel::Power);
        assert!(fit.theta > 0.6 && fit.theta < 1.2, "theta = {}", fit.theta);
    }

    #[test]
    fn quadratic_residue_tracks_log_over_n() {
        let spec = RecurrenceSpec::QuadraticMap { x1: 0.5 };
        // The residue law is a tail statement; compare on a mature window.
        let traj = iterate(
            &spec,
            &Schedule::Explicit(vec![
                1, 10_000, 20_000, 50_000, 100_000, 200_000, 500_000, 1_000_000,
            ]),
        )
        .unwrap();
        let law = catalog(&spec).second_term.unwrap();
        let rep = ratio_report(&traj, &law, 0.5).unwrap();
        assert_eq!(rep.trend, Trend::Converging);
        assert!((rep.final_ratio - 1.0).abs() < 0.5);
        // One-sided approach.
        let side: Vec<f64> = rep.ratios.iter().map(|&r| r - 1.0).collect();
        assert!(
            side.iter().all(|&d| d > 0.0) || side.iter().all(|&d| d < 0.0),
            "deviations change sign: {side:?}"
        );
        assert_eq!(rep.fitted_rate.unwrap().model, RateModel::Logarithmic);
    }

    #[test]
    fn flagship_audit_is_sharp_at_the_start() {
        let traj = iterate(&flagship(), &Schedule::Explicit(vec![1, 2, 3, 10, 100]))
        .unwrap();
        let rep = inequality_audit(&traj).unwrap();
        assert!(rep.all_passed());
        let lower = &rep.checks[0];
        assert_eq!(lower.name, "a_n^2 >= 2n");
        // a_2^2 = 4 sits exactly on the bound, from both sides: the upper
        // bound at n = 2 is 2n + ln(1)/2 = 4 as well.
        assert_eq!(lower.min_slack, 0.0);
        assert_eq!(lower.min_slack_at, 2);
        assert_eq!(lower.evaluated, 4);
        let upper = &rep.checks[1];
        assert_eq!(upper.min_slack, 0.0);
        assert_eq!(upper.min_slack_at, 2);
        assert_eq!(upper.evaluated, 4);
    }

    #[test]
    fn audits_pass_on_honest_runs() {
        let sched = Schedule::Geometric125 { n_max: 10_000 };
        let specs = [
            flagship(),
            RecurrenceSpec::DrivenSqrt {
                driver: Driver::One,
                a1: 1.0,
            },
            RecurrenceSpec::CumulativeSecondOrder { a1: 1.0 },
            RecurrenceSpec::Coupled { a1: 1.0, b1: 1.0 },
            RecurrenceSpec::QuadraticMap { x1: 0.5 },
            RecurrenceSpec::TauberianGenerator { p: 1, q: 2 },
        ];
        for spec in &specs {
            let traj = iterate(spec, &sched).unwrap();
            let rep = inequality_audit(&traj).unwrap();
            assert!(rep.all_passed(), "audit failed for {:?}", rep.family);
            for c in &rep.checks {
                assert!(c.evaluated > 0);
                assert!(c.min_slack.is_finite());
            }
        }
    }

    #[test]
    fn audits_catch_perturbed_trajectories() {
        let sched = Schedule::Geometric125 { n_max: 1000 };

        let mut t = iterate(&flagship(), &sched).unwrap();
        for v in &mut t.values {
            *v *= 0.9;
        }
        assert!(!inequality_audit(&t).unwrap().all_passed());

        let mut t = iterate(&RecurrenceSpec::CumulativeSecondOrder { a1: 1.0 }, &sched).unwrap();
        for v in &mut t.values {
            *v *= 0.9;
        }
        assert!(!inequality_audit(&t).unwrap().all_passed());

        let mut t = iterate(&RecurrenceSpec::Coupled { a1: 1.0, b1: 1.0 }, &sched).unwrap();
        for v in &mut t.values {
            *v *= 0.2;
        }
        assert!(!inequality_audit(&t).unwrap().all_passed());

        let mut t = iterate(&RecurrenceSpec::QuadraticMap { x1: 0.5 }, &sched).unwrap();
        for v in &mut t.values {
            *v *= 1.5;
        }
        assert!(!inequality_audit(&t).unwrap().all_passed());

        let mut t = iterate(&RecurrenceSpec::TauberianGenerator { p: 1, q: 2 }, &sched).unwrap();
        for v in &mut t.values {
            *v += 1e-6;
        }
        assert!(!inequality_audit(&t).unwrap().all_passed());
    }

    #[test]
    fn coupled_audit_hand_value() {
        let traj = iterate(
            &RecurrenceSpec::Coupled { a1: 1.0, b1: 1.0 },
            &Schedule::Explicit(vec![1]),
        )
        .unwrap();
        let rep = inequality_audit(&traj).unwrap();
        let c = &rep.checks[0];
        assert_eq!(c.evaluated, 1);
        // a_2 = b_2 = 2, so (a_2 b_2)^3 = 64 against 9.
        assert_eq!(c.min_slack, 64.0 - 9.0);
    }

    #[test]
    fn unregistered_families_are_refused() {
        let spec = RecurrenceSpec::FirstOrderInverse {
            f: parse("exp(t)").unwrap(),
            g: None,
            a1: 1.0,
        };
        let traj = iterate(&spec, &Schedule::Geometric125 { n_max: 100 }).unwrap();
        assert!(matches!(
            inequality_audit(&traj),
            Err(VerifyError::NoRegisteredInequality { .. })
        ));

        let spec = RecurrenceSpec::DrivenSqrt {
            driver: Driver::SinSquared,
            a1: 1.0,
        };
        let traj = iterate(&spec, &Schedule::Geometric125 { n_max: 100 }).unwrap();
        assert!(inequality_audit(&traj).is_err());
    }

    #[test]
    fn coupled_symmetric_seeds_diverge_together() {
        let spec = RecurrenceSpec::Coupled { a1: 1.0, b1: 1.0 };
        let traj = iterate(&spec, &Schedule::Geometric125 { n_max: 100_000 }).unwrap();
        let cls = classify_limits(&traj).unwrap();
        let target = 3.0f64.cbrt();
        match (&cls.sequence, &cls.sequence_b) {
            (
                SequenceVerdict::Diverging { normalized: na },
                SequenceVerdict::Diverging { normalized: nb },
            ) => {
                assert!((na - target).abs() < 0.05, "normalized a = {na}");
                assert!((nb - target).abs() < 0.05, "normalized b = {nb}");
            }
            other => panic!("expected both diverging, got {other:?}"),
        }
        assert!(!cls.contradiction);
    }

    #[test]
    fn constant_stream_reads_as_finite_and_contradiction_is_flagged() {
        let traj = Trajectory {
            spec: RecurrenceSpec::Coupled { a1: 2.0, b1: 2.0 },
            checkpoints: vec![1, 2, 5, 10, 20],
            values: vec![2.0; 5],
            values_b: vec![2.0; 5].into(),
            aux_sums: None,
            terminated_at: None,
        };
        let cls = classify_limits(&traj).unwrap();
        match &cls.sequence {
            SequenceVerdict::ApparentlyFinite { limit, support } => {
                assert_eq!(*limit, 2.0);
                assert_eq!(support.len(), 5);
                // Constant streams close no gap.
                assert!(support.iter().all(|r| r.gap_rate == 0.0));
            }
            other => panic!("expected finite, got {other:?}"),
        }
        assert!(cls.contradiction);
    }

    #[test]
    fn lopsided_seeds_read_undetermined_at_desk_scale() {
        let spec = RecurrenceSpec::Coupled {
            a1: 1.0,
            b1: 1000.0,
        };
        let traj = iterate(&spec, &Schedule::Geometric125 { n_max: 100_000 }).unwrap();
        let cls = classify_limits(&traj).unwrap();
        // b grows linearly, so its cube-root normalization never stabilizes,
        // and a creeps too fast for the finite rule: honest "don't know".
        assert_eq!(cls.sequence, SequenceVerdict::Undetermined);
        assert_eq!(cls.sequence_b, SequenceVerdict::Undetermined);
        assert!(!cls.contradiction);
    }

    #[test]
    fn classify_rejects_wrong_family_and_short_runs() {
        let traj = iterate(&flagship(), &Schedule::Geometric125 { n_max: 1000 }).unwrap();
        assert!(matches!(
            classify_limits(&traj),
            Err(VerifyError::WrongFamily { .. })
        ));

        let spec = RecurrenceSpec::Coupled { a1: 1.0, b1: 1.0 };
        let traj = iterate(
            &spec,
            &Schedule::Explicit(vec![1, 2, 3, 4]),
        )
        .unwrap();
        assert!(matches!(
            classify_limits(&traj),
            Err(VerifyError::TooFewCheckpoints { needed: 5, .. })
        ));
    }

    #[test]
    fn generator_averages_settle_near_the_integer_rate() {
        let spec = RecurrenceSpec::TauberianGenerator { p: 1, q: 2 };
        let n_max = 10_000u64;
        let traj = iterate(
            &spec,
            &Schedule::Explicit((1..=n_max).collect()),
        )
        .unwrap();
        let aux = traj.aux_sums.as_deref().unwrap();
        let diffs: Vec<f64> = aux
            .windows(2)
            .map(|w| w[1].powi(3) - w[0].powi(3))
            .collect();
        let means = abelian_average(&diffs);
        let last = *means.last().unwrap();
        assert!((last - 3.0).abs() < 0.05, "running mean = {last}");
    }
}
