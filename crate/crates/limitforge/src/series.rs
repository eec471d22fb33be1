//! Sum-versus-integral defects and the constants they converge to.
//!
//! The defect of `f` at `n` is `sum_{k=1}^n f(k) - integral_1^n f`. For
//! positive non-increasing `f` it decreases to a finite limit (the
//! Euler–Mascheroni constant when `f = 1/t`, Stieltjes constants for
//! `ln^a t / t`). Alternating series are summed through the same machinery:
//! with `A_n` the defect of `f` and `B_n` the defect of `f(2t)`,
//!
//! ```text
//! A_{2n} - 2 B_n + integral_1^2 f  =  sum_{k=1}^{2n} (-1)^{k+1} f(k)
//! ```
//!
//! exactly, by telescoping. The integral `integral_1^n f` is accumulated
//! panel by panel alongside the sum so each Kahan increment is the small
//! difference `f(k) - integral_{k-1}^k f`, never a difference of two large
//! totals.

use crate::funcdsl::{check_hypotheses, EvalError, Expr};
use crate::kahan::Kahan;
use crate::quad::{integrate, QuadError, DEFAULT_PANEL_BUDGET};
use serde::Serialize;
use std::fmt;

/// Tuning knobs for the quadrature inside series operations.
#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions {
    /// Reported quadrature tolerance (enters `error_estimate`). Unit panels
    /// are integrated to rounding level regardless, which is far below this.
    pub quad_tol: f64,
    /// Refinement budget per panel.
    pub panel_budget: u64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            quad_tol: 1e-12,
            panel_budget: DEFAULT_PANEL_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesError {
    Eval(EvalError),
    Quad(QuadError),
    HypothesisViolated { detail: String },
    InvalidParameter { what: String },
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::Eval(e) => write!(f, "evaluation failed: {e}"),
            SeriesError::Quad(e) => write!(f, "quadrature failed: {e}"),
            SeriesError::HypothesisViolated { detail } => {
                write!(f, "hypothesis violated: {detail}")
            }
            SeriesError::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
        }
    }
}

impl std::error::Error for SeriesError {}

impl From<EvalError> for SeriesError {
    fn from(e: EvalError) -> Self {
        SeriesError::Eval(e)
    }
}

impl From<QuadError> for SeriesError {
    fn from(e: QuadError) -> Self {
        SeriesError::Quad(e)
    }
}

/// Result of an alternating-series summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesResult {
    /// `l_estimate + bridge_integral`, the estimate of the full sum.
    pub estimated_sum: f64,
    /// `A_{2n} - 2 B_n`.
    pub l_estimate: f64,
    /// `integral_1^2 f`.
    pub bridge_integral: f64,
    pub n_used: u64,
    /// `|f(2n)|` plus the quadrature tolerance: the expected distance from
    /// the true sum.
    pub error_estimate: f64,
    /// Distance of `estimated_sum` from the directly accumulated partial
    /// alternating sum. The identity is exact, so anything above rounding
    /// plus quadrature noise indicates a defect in the machinery.
    pub identity_residual: f64,
}

/// Defect samples of `f` and of `f(2t)` along a set of checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectSequence {
    pub f: Expr,
    /// `(n, A_n)` with `A_n = sum f(k) - integral_1^n f`.
    pub samples: Vec<(u64, f64)>,
    /// `(n, B_n)` with `B_n = sum f(2k) - integral_1^n f(2t) dt`.
    pub doubled_samples: Vec<(u64, f64)>,
}

/// Positivity guard: first sample may be zero (e.g. `ln t / t` at 1), the
/// rest must be strictly positive.
fn require_sampled_positive(f: &Expr, hi: f64) -> Result<(), SeriesError> {
    let n = 512;
    let ln_hi = hi.ln();
    for i in 0..n {
        let x = if i == 0 {
            1.0
        } else {
            (ln_hi * i as f64 / (n - 1) as f64).exp()
        };
        let v = f.eval(x)?;
        let ok = if i == 0 { v >= 0.0 } else { v > 0.0 };
        if !ok {
            return Err(SeriesError::HypothesisViolated {
                detail: format!("`{f}` is not positive at t = {x} (value {v})"),
            });
        }
    }
    Ok(())
}

fn unit_panel<F>(f: &F, k: u64, budget: u64) -> Result<f64, SeriesError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let mut b = budget;
    Ok(integrate(f, (k - 1) as f64, k as f64, 0.0, &mut b)?)
}

/// Defect `sum_{k=1}^n f(k) - integral_1^n f`, accumulated incrementally.
pub fn defect(f: &Expr, n: u64) -> Result<f64, SeriesError> {
    defect_with(f, n, &SeriesOptions::default())
}

pub fn defect_with(f: &Expr, n: u64, opts: &SeriesOptions) -> Result<f64, SeriesError> {
    if n < 1 {
        return Err(SeriesError::InvalidParameter {
            what: "defect needs n >= 1".to_string(),
        });
    }
    require_sampled_positive(f, (n as f64).max(1000.0))?;
    let g = |t: f64| f.eval(t);
    let mut acc = Kahan::new(f.eval(1.0)?);
    for k in 2..=n {
        let term = f.eval(k as f64)?;
        let panel = unit_panel(&g, k, opts.panel_budget)?;
        acc.add(term - panel);
    }
    Ok(acc.value())
}

impl DefectSequence {
    /// Sample `A_n` and `B_n` at each checkpoint in one incremental pass.
    /// Checkpoints must be strictly ascending and start at 1 or later.
    pub fn collect(f: &Expr, checkpoints: &[u64]) -> Result<Self, SeriesError> {
        Self::collect_with(f, checkpoints, &SeriesOptions::default())
    }

    pub fn collect_with(
        f: &Expr,
        checkpoints: &[u64],
        opts: &SeriesOptions,
    ) -> Result<Self, SeriesError> {
        if checkpoints.is_empty() || checkpoints[0] < 1 {
            return Err(SeriesError::InvalidParameter {
                what: "checkpoints must be non-empty and start at 1 or later".to_string(),
            });
        }
        if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SeriesError::InvalidParameter {
                what: "checkpoints must strictly ascend".to_string(),
            });
        }
        let n_max = *checkpoints.last().unwrap();
        require_sampled_positive(f, (2.0 * n_max as f64).max(1000.0))?;

        let g = |t: f64| f.eval(t);
        let g2 = |t: f64| f.eval(2.0 * t);
        let mut a = Kahan::zero();
        let mut b = Kahan::zero();
        let mut samples = Vec::with_capacity(checkpoints.len());
        let mut doubled = Vec::with_capacity(checkpoints.len());
        let mut next = 0usize;
        for k in 1..=n_max {
            if k == 1 {
                a.add(f.eval(1.0)?);
                b.add(f.eval(2.0)?);
            } else {
                a.add(f.eval(k as f64)? - unit_panel(&g, k, opts.panel_budget)?);
                b.add(f.eval(2.0 * k as f64)? - unit_panel(&g2, k, opts.panel_budget)?);
            }
            if next < checkpoints.len() && checkpoints[next] == k {
                samples.push((k, a.value()));
                doubled.push((k, b.value()));
                next += 1;
            }
        }
        Ok(DefectSequence {
            f: f.clone(),
            samples,
            doubled_samples: doubled,
        })
    }
}

/// `H_n - ln n - 1/(2n)` with the a-priori bound `1/(8 n^2)` on its distance
/// from the Euler–Mascheroni constant. The single correction term is the
/// first trapezoidal-defect term; one term is enough for 1e-12 accuracy at
/// desk-scale n.
pub fn euler_mascheroni(n: u64) -> Result<(f64, f64), SeriesError> {
    if n < 2 {
        return Err(SeriesError::InvalidParameter {
            what: "euler_mascheroni needs n >= 2".to_string(),
        });
    }
    let mut h = Kahan::zero();
    for k in 1..=n {
        h.add(1.0 / k as f64);
    }
    let nf = n as f64;
    let value = h.value() - nf.ln() - 1.0 / (2.0 * nf);
    let bound = 1.0 / (8.0 * nf * nf);
    Ok((value, bound))
}

/// Raw Stieltjes defect `sum_{k=1}^n ln^a k / k - ln^{a+1} n / (a+1)`.
/// No acceleration: convergence is certified by comparing two values of `n`.
pub fn stieltjes(alpha: u32, n: u64) -> Result<f64, SeriesError> {
    if n < 1 {
        return Err(SeriesError::InvalidParameter {
            what: "stieltjes needs n >= 1".to_string(),
        });
    }
    let a = alpha as i32;
    let mut sum = Kahan::zero();
    for k in 1..=n {
        let kf = k as f64;
        sum.add(kf.ln().powi(a) / kf);
    }
    let nf = n as f64;
    Ok(sum.value() - nf.ln().powi(a + 1) / (alpha as f64 + 1.0))
}

/// Sum the alternating series `sum (-1)^{k+1} f(k)` through the defect
/// identity, using `2n` direct terms.
pub fn sum_alternating(f: &Expr, n: u64) -> Result<SeriesResult, SeriesError> {
    sum_alternating_with(f, n, &SeriesOptions::default())
}

pub fn sum_alternating_with(
    f: &Expr,
    n: u64,
    opts: &SeriesOptions,
) -> Result<SeriesResult, SeriesError> {
    if n < 1 {
        return Err(SeriesError::InvalidParameter {
            what: "sum_alternating needs n >= 1".to_string(),
        });
    }
    let hi = (2.0 * n as f64).max(1000.0);
    require_sampled_positive(f, hi)?;
    let verdict = check_hypotheses(f, 1.0, hi, 512)?;
    if verdict.non_increasing_from.is_none() {
        return Err(SeriesError::HypothesisViolated {
            detail: format!("`{f}` still increases at the end of the sampled range [1, {hi}]"),
        });
    }
    // Decay: the tail sample must have fallen well below the sampled peak.
    let peak = {
        let mut m = f.eval(1.0)?;
        for i in 1..64 {
            let x = (hi.ln() * i as f64 / 63.0).exp();
            m = m.max(f.eval(x)?);
        }
        m
    };
    let tail = f.eval(hi)?;
    if !(tail <= 0.5 * peak) {
        return Err(SeriesError::HypothesisViolated {
            detail: format!(
                "`{f}` does not visibly decay: f({hi}) = {tail} vs sampled peak {peak}"
            ),
        });
    }

    let g = |t: f64| f.eval(t);
    let g2 = |t: f64| f.eval(2.0 * t);
    let mut a_defect = Kahan::zero();
    let mut b_defect = Kahan::zero();
    let mut direct = Kahan::zero();
    for k in 1..=(2 * n) {
        let fk = f.eval(k as f64)?;
        if k == 1 {
            a_defect.add(fk);
        } else {
            a_defect.add(fk - unit_panel(&g, k, opts.panel_budget)?);
        }
        direct.add(if k % 2 == 1 { fk } else { -fk });
        if k <= n {
            let f2k = f.eval(2.0 * k as f64)?;
            if k == 1 {
                b_defect.add(f2k);
            } else {
                b_defect.add(f2k - unit_panel(&g2, k, opts.panel_budget)?);
            }
        }
    }

    let mut budget = opts.panel_budget;
    let bridge = integrate(&g, 1.0, 2.0, opts.quad_tol, &mut budget)?;
    let l = a_defect.value() - 2.0 * b_defect.value();
    let estimated_sum = l + bridge;
    let identity_residual = (estimated_sum - direct.value()).abs();
    let error_estimate = f.eval(2.0 * n as f64)?.abs() + opts.quad_tol;
    Ok(SeriesResult {
        estimated_sum,
        l_estimate: l,
        bridge_integral: bridge,
        n_used: n,
        error_estimate,
        identity_residual,
    })
}
