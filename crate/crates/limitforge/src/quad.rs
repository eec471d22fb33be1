//! Adaptive Simpson quadrature with an explicit work budget.
//!
//! Classic recursive bisection with Richardson extrapolation. Two details
//! matter for this crate's workloads:
//!
//! - The acceptance test uses an effective tolerance floored at a small
//!   multiple of the rounding granularity of the whole-interval estimate.
//!   Callers routinely ask for per-panel absolute tolerances (1e-20) far
//!   below what f64 can resolve on O(1) integrals; without the floor the
//!   recursion would chase noise to the budget limit.
//! - Refinement work is metered: each bisection costs one unit from a shared
//!   budget, and exhaustion is an error carrying the best estimate so far.

use crate::funcdsl::EvalError;
use std::fmt;

/// Relative rounding floor for the acceptance test, a few ulps of the
/// current panel estimate.
const RELATIVE_FLOOR: f64 = 1.1e-16;

/// Default shared refinement budget (bisections, not evaluations).
pub const DEFAULT_PANEL_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum QuadError {
    /// The integrand failed somewhere in the panel.
    Eval(EvalError),
    /// Refinement budget ran out before the tolerance was met.
    PanelBudgetExhausted {
        lo: f64,
        hi: f64,
        estimate: f64,
        error_estimate: f64,
    },
}

impl fmt::Display for QuadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadError::Eval(e) => write!(f, "integrand failed: {e}"),
            QuadError::PanelBudgetExhausted {
                lo,
                hi,
                estimate,
                error_estimate,
            } => write!(
                f,
                "panel budget exhausted on [{lo}, {hi}]: estimate {estimate} (± ~{error_estimate})"
            ),
        }
    }
}

impl std::error::Error for QuadError {}

impl From<EvalError> for QuadError {
    fn from(e: EvalError) -> Self {
        QuadError::Eval(e)
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrate `f` over `[lo, hi]` to absolute tolerance `tol` (floored by
/// rounding granularity), drawing refinement steps from `budget`.
pub fn integrate<F>(f: &F, lo: f64, hi: f64, tol: f64, budget: &mut u64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if lo == hi {
        return Ok(0.0);
    }
    let mid = 0.5 * (lo + hi);
    let fa = f(lo)?;
    let fm = f(mid)?;
    let fb = f(hi)?;
    let whole = simpson(fa, fm, fb, hi - lo);
    refine(f, lo, hi, fa, fm, fb, whole, tol, budget)
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &F,
    lo: f64,
    hi: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    budget: &mut u64,
) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    // Interval too narrow to split at this precision: accept what we have.
    if lm <= lo || rm <= mid || mid >= hi {
        return Ok(whole);
    }
    if *budget == 0 {
        return Err(QuadError::PanelBudgetExhausted {
            lo,
            hi,
            estimate: whole,
            error_estimate: tol,
        });
    }
    *budget -= 1;

    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(fa, flm, fm, mid - lo);
    let right = simpson(fm, frm, fb, hi - mid);
    let s2 = left + right;
    let diff = s2 - whole;
    // Tolerance halves down the tree, but never below rounding granularity.
    let tol_eff = tol.max(RELATIVE_FLOOR * whole.abs());
    if diff.abs() <= 15.0 * tol_eff {
        return Ok(s2 + diff / 15.0);
    }
    let half_tol = 0.5 * tol;
    let l = refine(f, lo, mid, fa, flm, fm, left, half_tol, budget)?;
    let r = refine(f, mid, hi, fm, frm, fb, right, half_tol, budget)?;
    Ok(l + r)
}
