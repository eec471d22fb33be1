//! Trajectory generation for the recurrence families under study.
//!
//! Every family adds a shrinking positive term to its state, so trajectories
//! diverge slowly (or, for the quadratic map, decay slowly). State is held in
//! compensated accumulators: at 1e8 steps the naive update `a += tiny` would
//! otherwise accrue rounding drift proportional to the step count, which is
//! enough to disturb the second-order effects the reports look at.
//!
//! Checkpoint semantics: `values[i]` is the state at step `checkpoints[i]`,
//! recorded before that step's update. Auxiliary sums include the step's own
//! term, so `aux_sums[i]` is the sum over steps `1..=checkpoints[i]`.

use crate::funcdsl::{check_hypotheses, EvalError, Expr};
use crate::kahan::Kahan;
use crate::schedule::{Schedule, ScheduleError};
use std::fmt;

/// Values at or beyond this magnitude end the run as overflow.
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Driving term for [`RecurrenceSpec::DrivenSqrt`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    /// Constant 1.
    One,
    /// `sin^2(n mod 2pi)`, mean 1/2.
    SinSquared,
}

impl Driver {
    #[inline]
    fn at(self, n: u64) -> f64 {
        match self {
            Driver::One => 1.0,
            Driver::SinSquared => {
                let r = (n as f64) % std::f64::consts::TAU;
                let s = r.sin();
                s * s
            }
        }
    }
}

/// The recurrence families the engine can run.
#[derive(Debug, Clone, PartialEq)]
pub enum RecurrenceSpec {
    /// `a_{n+1} = a_n + 1 / (f(a_n) * g(n))`, `g` defaulting to 1.
    /// `f` must be positive and non-decreasing, `g` positive.
    FirstOrderInverse {
        f: Expr,
        g: Option<Expr>,
        a1: f64,
    },
    /// `a_{n+1} = a_n + A_n / a_n` with `A_n = a_1 + ... + a_n`.
    CumulativeSecondOrder { a1: f64 },
    /// `a_n` is the positive root of `a^p * (A_{n-1} + a^q) = 1`,
    /// `A_n = sum of a_k^q`. Roots decrease toward zero as the sum grows.
    TauberianGenerator { p: u32, q: u32 },
    /// `a_{n+1} = a_n + 1/b_n^2`, `b_{n+1} = b_n + 1/a_n^2`, updated
    /// simultaneously from the old pair.
    Coupled { a1: f64, b1: f64 },
    /// `x_{n+1} = x_n - x_n^2` with `0 < x_1 < 1`; decays like `1/n`.
    QuadraticMap { x1: f64 },
    /// `a_{n+1} = a_n + d_n / a_n` with a prescribed driver `d_n`.
    DrivenSqrt { driver: Driver, a1: f64 },
}

/// Why a run stopped before its last checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Overflow,
}

/// Recorded run of a recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: RecurrenceSpec,
    /// Checkpoints actually reached (a prefix of the schedule on overflow).
    pub checkpoints: Vec<u64>,
    /// Primary state at each checkpoint.
    pub values: Vec<f64>,
    /// Secondary state (`b_n`) for the coupled family.
    pub values_b: Option<Vec<f64>>,
    /// Running auxiliary sum at each checkpoint, for families that keep one.
    pub aux_sums: Option<Vec<f64>>,
    /// Step at which the run overflowed, if it did.
    pub terminated_at: Option<(u64, Termination)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    Schedule(ScheduleError),
    Eval(EvalError),
    /// A declared hypothesis on `f` or `g` failed on the sampling grid.
    HypothesisViolated { role: &'static str, detail: String },
    InvalidParameter { what: String },
    /// The update could not be computed (vanishing denominator and similar).
    NumericFailure { at: u64, detail: String },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Schedule(e) => write!(f, "bad schedule: {e}"),
            EngineError::Eval(e) => write!(f, "evaluation failed: {e}"),
            EngineError::HypothesisViolated { role, detail } => {
                write!(f, "hypothesis violated for {role}: {detail}")
            }
            EngineError::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            EngineError::NumericFailure { at, detail } => {
                write!(f, "numeric failure at step {at}: {detail}")
            }
        }
    }
}

impl std::error::Error for EngineError {}

impl From<ScheduleError> for EngineError {
    fn from(e: ScheduleError) -> Self {
        EngineError::Schedule(e)
    }
}

impl From<EvalError> for EngineError {
    fn from(e: EvalError) -> Self {
        EngineError::Eval(e)
    }
}

fn require_positive(name: &str, v: f64) -> Result<(), EngineError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(EngineError::InvalidParameter {
            what: format!("{name} must be finite and positive, got {v}"),
        })
    }
}

fn validate(spec: &RecurrenceSpec, n_max: u64) -> Result<(), EngineError> {
    match spec {
        RecurrenceSpec::FirstOrderInverse { f, g, a1 } => {
            require_positive("a1", *a1)?;
            let vf = check_hypotheses(f, 1e-6, 1e9, 128)?;
            if !vf.positive_on_samples {
                return Err(EngineError::HypothesisViolated {
                    role: "f",
                    detail: format!(
                        "`{f}` is not positive on sampled [{:e}, {:e}]",
                        vf.grid_lo, vf.grid_hi
                    ),
                });
            }
            if !vf.non_decreasing_on_samples {
                return Err(EngineError::HypothesisViolated {
                    role: "f",
                    detail: format!(
                        "`{f}` is not non-decreasing on sampled [{:e}, {:e}]",
                        vf.grid_lo, vf.grid_hi
                    ),
                });
            }
            if let Some(g) = g {
                let hi = (n_max as f64).max(10.0);
                let vg = check_hypotheses(g, 1.0, hi, 128)?;
                if !vg.positive_on_samples {
                    return Err(EngineError::HypothesisViolated {
                        role: "g",
                        detail: format!("`{g}` is not positive on sampled [1, {hi:e}]"),
                    });
                }
            }
            Ok(())
        }
        RecurrenceSpec::CumulativeSecondOrder { a1 } => require_positive("a1", *a1),
        RecurrenceSpec::TauberianGenerator { p, q } => {
            if *p == 0 || *q == 0 {
                return Err(EngineError::InvalidParameter {
                    what: format!("p and q must be at least 1, got p={p} q={q}"),
                });
            }
            Ok(())
        }
        RecurrenceSpec::Coupled { a1, b1 } => {
            require_positive("a1", *a1)?;
            require_positive("b1", *b1)
        }
        RecurrenceSpec::QuadraticMap { x1 } => {
            if x1.is_finite() && *x1 > 0.0 && *x1 < 1.0 {
                Ok(())
            } else {
                Err(EngineError::InvalidParameter {
                    what: format!("x1 must lie strictly between 0 and 1, got {x1}"),
                })
            }
        }
        RecurrenceSpec::DrivenSqrt { a1, .. } => require_positive("a1", *a1),
    }
}

/// Positive root of `a^p * (sum + a^q) = 1` on `(0, upper]`, where
/// `h(upper) >= 0` is guaranteed by monotonicity of the sum. Bisection to a
/// narrow bracket, then Newton polishing inside it.
fn tauberian_root(p: u32, q: u32, sum: f64, upper: f64) -> f64 {
    let pi = p as i32;
    let qi = q as i32;
    let h = |a: f64| a.powi(pi) * (sum + a.powi(qi)) - 1.0;
    let mut lo = 0.0_f64;
    let mut hi = upper;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        let hx = h(x);
        if hx == 0.0 {
            return x;
        }
        if hx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dh = x.powi(pi - 1) * (p as f64 * (sum + x.powi(qi)) + q as f64 * x.powi(qi));
        let raw = x - hx / dh;
        // Bounds are inclusive: the root may sit exactly on a bracket edge
        // stored by an earlier iteration.
        let next = if raw.is_finite() && raw >= lo && raw <= hi {
            raw
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-16 * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

struct Recorder {
    checkpoints: Vec<u64>,
    values: Vec<f64>,
    values_b: Vec<f64>,
    aux: Vec<f64>,
    reached: Vec<u64>,
    next: usize,
}

impl Recorder {
    fn new(checkpoints: Vec<u64>) -> Self {
        let cap = checkpoints.len();
        Recorder {
            checkpoints,
            values: Vec::with_capacity(cap),
            values_b: Vec::new(),
            aux: Vec::new(),
            reached: Vec::with_capacity(cap),
            next: 0,
        }
    }

    #[inline]
    fn due(&self, n: u64) -> bool {
        self.next < self.checkpoints.len() && self.checkpoints[self.next] == n
    }

    #[inline]
    fn push(&mut self, n: u64, value: f64, value_b: Option<f64>, aux: Option<f64>) {
        self.reached.push(n);
        self.values.push(value);
        if let Some(b) = value_b {
            self.values_b.push(b);
        }
        if let Some(s) = aux {
            self.aux.push(s);
        }
        self.next += 1;
    }
}

/// Run `spec` along `schedule`, recording state at every checkpoint.
pub fn iterate(spec: &RecurrenceSpec, schedule: &Schedule) -> Result<Trajectory, EngineError> {
    let checkpoints = schedule.checkpoints()?;
    let n_max = *checkpoints.last().unwrap();
    validate(spec, n_max)?;

    let mut rec = Recorder::new(checkpoints);
    let mut terminated = None;

    let overflowed = |v: f64| !v.is_finite() || v.abs() >= OVERFLOW_LIMIT;

    match spec {
        RecurrenceSpec::FirstOrderInverse { f, g, a1 } => {
            let mut a = Kahan::new(*a1);
            for n in 1..=n_max {
                let av = a.value();
                if overflowed(av) {
                    terminated = Some((n, Termination::Overflow));
                    break;
                }
                if rec.due(n) {
                    rec.push(n, av, None, None);
                }
                if n == n_max {
                    break;
                }
                let fa = f.eval(av)?;
                let gn = match g {
                    Some(g) => g.eval(n as f64)?,
                    None => 1.0,
                };
                let denom = fa * gn;
                if denom == 0.0 || !denom.is_finite() {
                    return Err(EngineError::NumericFailure {
                        at: n,
                        detail: format!("increment denominator f(a)*g(n) = {denom}"),
                    });
                }
                a.add(1.0 / denom);
            }
        }
        RecurrenceSpec::CumulativeSecondOrder { a1 } => {
            let mut a = Kahan::new(*a1);
            let mut big = Kahan::zero();
            for n in 1..=n_max {
                let av = a.value();
                if overflowed(av) {
                    terminated = Some((n, Termination::Overflow));
                    break;
                }
                big.add(av);
                let sum = big.value();
                if overflowed(sum) {
                    terminated = Some((n, Termination::Overflow));
                    break;
                }
                if rec.due(n) {
                    rec.push(n, av, None, Some(sum));
                }
                if n == n_max {
                    break;
                }
                a.add(sum / av);
            }
        }
        RecurrenceSpec::TauberianGenerator { p, q } => {
            let mut big = Kahan::zero();
            let mut prev = 1.0_f64;
            for n in 1..=n_max {
                let a_n = if n == 1 {
                    1.0
                } else {
                    tauberian_root(*p, *q, big.value(), prev)
                };
                big.add(a_n.powi(*q as i32));
                if rec.due(n) {
                    rec.push(n, a_n, None, Some(big.value()));
                }
                prev = a_n;
            }
        }
        RecurrenceSpec::Coupled { a1, b1 } => {
            let mut a = Kahan::new(*a1);
            let mut b = Kahan::new(*b1);
            for n in 1..=n_max {
                let (av, bv) = (a.value(), b.value());
                if overflowed(av) || overflowed(bv) {
                    terminated = Some((n, Termination::Overflow));
                    break;
                }
                if rec.due(n) {
                    rec.push(n, av, Some(bv), None);
                }
                if n == n_max {
                    break;
                }
                a.add(1.0 / (bv * bv));
                b.add(1.0 / (av * av));
            }
        }
        RecurrenceSpec::QuadraticMap { x1 } => {
            let mut x = Kahan::new(*x1);
            for n in 1..=n_max {
                let xv = x.value();
                if rec.due(n) {
                    rec.push(n, xv, None, None);
                }
                if n == n_max {
                    break;
                }
                x.add(-(xv * xv));
            }
        }
        RecurrenceSpec::DrivenSqrt { driver, a1 } => {
            let mut a = Kahan::new(*a1);
            let mut s = Kahan::zero();
            for n in 1..=n_max {
                let av = a.value();
                if overflowed(av) {
                    terminated = Some((n, Termination::Overflow));
                    break;
                }
                let d = driver.at(n);
                s.add(d);
                if rec.due(n) {
                    rec.push(n, av, None, Some(s.value()));
                }
                if n == n_max {
                    break;
                }
                a.add(d / av);
            }
        }
    }

    let has_b = matches!(spec, RecurrenceSpec::Coupled { .. });
    let has_aux = matches!(
        spec,
        RecurrenceSpec::CumulativeSecondOrder { .. }
            | RecurrenceSpec::TauberianGenerator { .. }
            | RecurrenceSpec::DrivenSqrt { .. }
    );
    Ok(Trajectory {
        spec: spec.clone(),
        checkpoints: rec.reached,
        values: rec.values,
        values_b: if has_b { Some(rec.values_b) } else { None },
        aux_sums: if has_aux { Some(rec.aux) } else { None },
        terminated_at: terminated,
    })
}

/// One row of a step-identity audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityRow {
    pub n: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_discrepancy: f64,
}

/// Exact algebraic identity satisfied by a single update step, recomputed at
/// every checkpoint from the recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: &'static str,
    pub rows: Vec<IdentityRow>,
    pub max_rel_discrepancy: f64,
}

fn is_const_one(g: &Option<Expr>) -> bool {
    match g {
        None => true,
        Some(g) => matches!(g.power_form(), Some(p) if p.coeff == 1.0 && p.exponent == 0.0),
    }
}

fn is_plain_inverse(spec: &RecurrenceSpec) -> bool {
    match spec {
        RecurrenceSpec::FirstOrderInverse { f, g, .. } => {
            matches!(f.power_form(), Some(p) if p.coeff == 1.0 && p.exponent == 1.0)
                && is_const_one(g)
        }
        RecurrenceSpec::DrivenSqrt {
            driver: Driver::One,
            ..
        } => true,
        _ => false,
    }
}

/// Audit the update-step identity registered for this trajectory's family,
/// or `None` when the family has none.
///
/// For `a' = a + 1/a` the step satisfies `a'^2 - a^2 = 2 + 1/a^2`; for the
/// cumulative family, `a'^3 - a^3 = 3 a A + 3 A d + d^3` with `d = A/a`.
/// Both sides are evaluated in factored form (the difference of powers is
/// expanded through the increment), so the discrepancy stays at rounding
/// level no matter how large the state has grown.
pub fn identity_audit(traj: &Trajectory) -> Option<IdentityReport> {
    let rel = |lhs: f64, rhs: f64| {
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    };

    if is_plain_inverse(&traj.spec) {
        let mut rows = Vec::with_capacity(traj.values.len());
        let mut max = 0.0_f64;
        for (&n, &a) in traj.checkpoints.iter().zip(&traj.values) {
            let d = 1.0 / a;
            let b = a + d;
            let lhs = d * (b + a);
            let rhs = 2.0 + d * d;
            let r = rel(lhs, rhs);
            max = max.max(r);
            rows.push(IdentityRow {
                n,
                lhs,
                rhs,
                rel_discrepancy: r,
            });
        }
        return Some(IdentityReport {
            name: "square growth step",
            rows,
            max_rel_discrepancy: max,
        });
    }

    if let RecurrenceSpec::CumulativeSecondOrder { .. } = traj.spec {
        let aux = traj.aux_sums.as_ref()?;
        let mut rows = Vec::with_capacity(traj.values.len());
        let mut max = 0.0_f64;
        for ((&n, &a), &big) in traj.checkpoints.iter().zip(&traj.values).zip(aux) {
            let d = big / a;
            let b = a + d;
            let lhs = d * (b * b + b * a + a * a);
            let rhs = 3.0 * a * big + 3.0 * big * d + d * d * d;
            let r = rel(lhs, rhs);
            max = max.max(r);
            rows.push(IdentityRow {
                n,
                lhs,
                rhs,
                rel_discrepancy: r,
            });
        }
        return Some(IdentityReport {
            name: "cube growth step",
            rows,
            max_rel_discrepancy: max,
        });
    }

    None
}
