//! Growth laws: closed-form catalog entries and quadrature-backed
//! predictions of the form `a_n ~ F^{-1}(y_n)`.
//!
//! [`CumulativeIntegral`] is the workhorse: `F(x) = offset + integral from
//! base to x` of a positive integrand, with a cache of partial integrals over
//! a fixed doubling grid of breakpoints. The grid is query-independent, so
//! the cache contents (and therefore every answer) are bit-identical no
//! matter what order values are requested in. Queries between breakpoints
//! pay one fresh tail integration; the tail never enters the cache.

use crate::engine::{Driver, RecurrenceSpec};
use crate::funcdsl::{check_hypotheses, EvalError, Expr};
use crate::quad::{integrate, QuadError};
use std::fmt;
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq)]
pub enum AsymptoteError {
    Quad(QuadError),
    Eval(EvalError),
    /// The integrand is not positive on the sampled validation grid.
    NotPositive { detail: String },
    InvalidParameter { what: String },
    /// `value(x)` asked left of the anchor point.
    BelowBase { x: f64, base: f64 },
    /// `invert(y)` asked materially below the anchor value.
    BelowRange { y: f64, offset: f64 },
    /// The inversion bracket ran past the overflow horizon.
    BracketOverflow { y: f64 },
}

impl fmt::Display for AsymptoteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsymptoteError::Quad(e) => write!(f, "quadrature failed: {e}"),
            AsymptoteError::Eval(e) => write!(f, "evaluation failed: {e}"),
            AsymptoteError::NotPositive { detail } => {
                write!(f, "integrand must be positive: {detail}")
            }
            AsymptoteError::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            AsymptoteError::BelowBase { x, base } => {
                write!(f, "query point {x} lies below the base {base}")
            }
            AsymptoteError::BelowRange { y, offset } => {
                write!(f, "target {y} lies below the range start {offset}")
            }
            AsymptoteError::BracketOverflow { y } => {
                write!(f, "no bracket for target {y} before the overflow horizon")
            }
        }
    }
}

impl std::error::Error for AsymptoteError {}

impl From<QuadError> for AsymptoteError {
    fn from(e: QuadError) -> Self {
        AsymptoteError::Quad(e)
    }
}

impl From<EvalError> for AsymptoteError {
    fn from(e: EvalError) -> Self {
        AsymptoteError::Eval(e)
    }
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    x: f64,
    cum: f64,
}

/// Doubling grid; from small anchors it first steps by 1 so the segments
/// near the base stay short.
fn next_breakpoint(x: f64) -> f64 {
    (2.0 * x).max(x + 1.0)
}

/// Monotone antiderivative `F(x) = offset + integral_base^x integrand`,
/// with cached partials over a fixed breakpoint grid and numeric inversion.
#[derive(Debug)]
pub struct CumulativeIntegral {
    integrand: Expr,
    base: f64,
    offset: f64,
    tol: f64,
    panel_budget: u64,
    grid: Mutex<Vec<GridPoint>>,
}

impl CumulativeIntegral {
    /// Validate positivity of `integrand` on a sampled grid and construct
    /// the cumulative. `tol` is the relative acceptance tolerance used by
    /// [`CumulativeIntegral::invert`]; integration itself always runs at
    /// rounding-level precision.
    pub fn build(
        integrand: Expr,
        base: f64,
        offset: f64,
        tol: f64,
        panel_budget: u64,
    ) -> Result<Self, AsymptoteError> {
        if !(base.is_finite() && base >= 0.0) {
            return Err(AsymptoteError::InvalidParameter {
                what: format!("base must be finite and non-negative, got {base}"),
            });
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(AsymptoteError::InvalidParameter {
                what: format!("tolerance must be finite and positive, got {tol}"),
            });
        }
        if panel_budget == 0 {
            return Err(AsymptoteError::InvalidParameter {
                what: "panel budget must be at least 1".to_string(),
            });
        }
        let lo = base.max(1e-9);
        let hi = 1e6_f64.max(lo * 10.0);
        let verdict = check_hypotheses(&integrand, lo, hi, 256)?;
        if !verdict.positive_on_samples {
            return Err(AsymptoteError::NotPositive {
                detail: format!("`{integrand}` sampled non-positive on [{lo:e}, {hi:e}]"),
            });
        }
        Ok(CumulativeIntegral {
            integrand,
            base,
            offset,
            tol,
            panel_budget,
            grid: Mutex::new(vec![GridPoint { x: base, cum: 0.0 }]),
        })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Cached cumulative at the last breakpoint not past `x`, extending the
    /// cache when `x` lies beyond it. Earlier queries may have pushed the
    /// grid far past `x`, so the anchor is found by search, not taken from
    /// the end.
    fn cum_through(&self, x: f64) -> Result<GridPoint, AsymptoteError> {
        let mut grid = self.grid.lock().unwrap();
        loop {
            let last = *grid.last().unwrap();
            let nb = next_breakpoint(last.x);
            if nb > x {
                break;
            }
            let f = |t: f64| self.integrand.eval(t);
            let mut budget = self.panel_budget;
            let seg = integrate(&f, last.x, nb, 0.0, &mut budget)?;
            // Positive integrand: clamp quadrature noise so the cache stays
            // monotone.
            grid.push(GridPoint {
                x: nb,
                cum: last.cum + seg.max(0.0),
            });
        }
        let idx = grid.partition_point(|gp| gp.x <= x) - 1;
        Ok(grid[idx])
    }

    /// `F(x)`. Exactly `offset` at the base point.
    pub fn value(&self, x: f64) -> Result<f64, AsymptoteError> {
        if x < self.base {
            return Err(AsymptoteError::BelowBase { x, base: self.base });
        }
        if x == self.base {
            return Ok(self.offset);
        }
        let anchor = self.cum_through(x)?;
        let f = |t: f64| self.integrand.eval(t);
        let mut budget = self.panel_budget;
        let tail = integrate(&f, anchor.x, x, 0.0, &mut budget)?;
        Ok(self.offset + anchor.cum + tail.max(0.0))
    }

    /// Solve `F(x) = y` for `x >= base`. Accepts when
    /// `|F(x) - y| <= 0.5 * tol * max(1, |y|)`.
    pub fn invert(&self, y: f64) -> Result<f64, AsymptoteError> {
        let scale = y.abs().max(1.0);
        if y < self.offset - self.tol * scale {
            return Err(AsymptoteError::BelowRange {
                y,
                offset: self.offset,
            });
        }
        if y <= self.offset {
            return Ok(self.base);
        }

        // Bracket by walking the breakpoint grid.
        let mut lo = self.base;
        let mut hi = next_breakpoint(self.base);
        loop {
            if hi > 1e300 {
                return Err(AsymptoteError::BracketOverflow { y });
            }
            let fhi = self.value(hi)?;
            if fhi >= y {
                break;
            }
            lo = hi;
            hi = next_breakpoint(hi);
        }

        let accept = 0.5 * self.tol * scale;
        let mut x = 0.5 * (lo + hi);
        for _ in 0..160 {
            let fx = self.value(x)?;
            if (fx - y).abs() <= accept {
                return Ok(x);
            }
            if fx < y {
                lo = x;
            } else {
                hi = x;
            }
            // Newton once the bracket is narrow enough for the local slope
            // to be trustworthy; bisection otherwise.
            let mut next = f64::NAN;
            if hi - lo <= 1e-2 * hi.abs().max(1.0) {
                let slope = self.integrand.eval(x)?;
                if slope > 0.0 {
                    next = x - (fx - y) / slope;
                }
            }
            if !(next.is_finite() && next >= lo && next <= hi) {
                next = 0.5 * (lo + hi);
            }
            if next == x {
                // Cannot move at this precision.
                return Ok(x);
            }
            x = next;
        }
        Ok(x)
    }
}

/// Shape of a growth prediction.
#[derive(Debug, Clone)]
pub enum LawForm {
    /// `constant * n^power * (ln n)^log_power`.
    ClosedForm {
        constant: f64,
        power: f64,
        log_power: f64,
    },
    /// `F^{-1}(y_n)` with `y_n = n` or `y_n = argument(n)`.
    Numeric {
        integral: Arc<CumulativeIntegral>,
        argument: Option<Arc<CumulativeIntegral>>,
    },
    /// Second-order correction for the quadratic map: the residue
    /// `1 - n x_n` tracks `ln n / n`.
    SecondTerm,
}

/// A predicted growth law with a human-readable derivation note.
#[derive(Debug, Clone)]
pub struct GrowthLaw {
    pub form: LawForm,
    pub description: String,
}

impl GrowthLaw {
    fn closed(constant: f64, power: f64, log_power: f64, description: String) -> Self {
        GrowthLaw {
            form: LawForm::ClosedForm {
                constant,
                power,
                log_power,
            },
            description,
        }
    }

    /// Evaluate the prediction at (real) index `n`.
    pub fn evaluate(&self, n: f64) -> Result<f64, AsymptoteError> {
        match &self.form {
            LawForm::ClosedForm {
                constant,
                power,
                log_power,
            } => {
                let mut v = n.powf(*power);
                if *log_power != 0.0 {
                    v *= n.ln().powf(*log_power);
                }
                // Single final rounding by the constant: scaling the constant
                // by a power of two scales the result exactly.
                Ok(v * constant)
            }
            LawForm::Numeric { integral, argument } => {
                let y = match argument {
                    Some(g) => g.value(n)?,
                    None => n,
                };
                integral.invert(y)
            }
            LawForm::SecondTerm => Ok(n.ln() / n),
        }
    }
}

/// The laws predicted for each recorded stream of a trajectory. `None`
/// means the catalog has no closed-form entry for that stream.
#[derive(Debug, Clone, Default)]
pub struct LawSet {
    pub sequence: Option<GrowthLaw>,
    pub sequence_b: Option<GrowthLaw>,
    pub aux_sum: Option<GrowthLaw>,
    pub second_term: Option<GrowthLaw>,
}

fn power_const(e: &Option<Expr>) -> Option<f64> {
    // Positive constant (exponent zero) or absent; returns the coefficient.
    match e {
        None => Some(1.0),
        Some(g) => match g.power_form() {
            Some(p) if p.exponent == 0.0 && p.coeff > 0.0 => Some(p.coeff),
            _ => None,
        },
    }
}

/// Closed-form growth laws for the recurrence families, where one is known.
pub fn catalog(spec: &RecurrenceSpec) -> LawSet {
    let mut set = LawSet::default();
    match spec {
        RecurrenceSpec::FirstOrderInverse { f, g, .. } => {
            if f.is_exp_of_var() && power_const(g).is_some() {
                set.sequence = Some(GrowthLaw::closed(
                    1.0,
                    0.0,
                    1.0,
                    "exp(a) gains a constant per unit increase of the sum index, so a_n ~ ln n"
                        .to_string(),
                ));
                return set;
            }
            let pf = match f.power_form() {
                Some(p) if p.coeff > 0.0 && p.exponent >= 0.0 => p,
                _ => return set,
            };
            let pg = match g {
                None => crate::funcdsl::PowerForm {
                    coeff: 1.0,
                    exponent: 0.0,
                },
                Some(g) => match g.power_form() {
                    Some(p) if p.coeff > 0.0 => p,
                    _ => return set,
                },
            };
            let m = pf.exponent;
            let (cf, cg, p) = (pf.coeff, pg.coeff, pg.exponent);
            if p < 1.0 {
                let constant = ((m + 1.0) / ((1.0 - p) * cf * cg)).powf(1.0 / (m + 1.0));
                let power = (1.0 - p) / (m + 1.0);
                set.sequence = Some(GrowthLaw::closed(
                    constant,
                    power,
                    0.0,
                    format!(
                        "a^{} grows like {} n^{}: balance da = dn/({} a^{} {} n^{})",
                        m + 1.0,
                        (m + 1.0) / ((1.0 - p) * cf * cg) * (1.0 - p),
                        1.0 - p,
                        cf,
                        m,
                        cg,
                        p
                    ),
                ));
            } else if p == 1.0 {
                let constant = ((m + 1.0) / (cf * cg)).powf(1.0 / (m + 1.0));
                set.sequence = Some(GrowthLaw::closed(
                    constant,
                    0.0,
                    1.0 / (m + 1.0),
                    format!(
                        "with g ~ {} n the increments sum like a logarithm: a^{} ~ ({}/{}) ln n",
                        cg,
                        m + 1.0,
                        m + 1.0,
                        cf * cg
                    ),
                ));
            }
            // p > 1: increments are summable, the sequence converges, no
            // divergent growth law applies.
        }
        RecurrenceSpec::CumulativeSecondOrder { .. } => {
            set.sequence = Some(GrowthLaw::closed(
                1.0 / 6.0,
                2.0,
                0.0,
                "a grows quadratically: a ~ n^2/6 once A ~ n^3/18 feeds back".to_string(),
            ));
            set.aux_sum = Some(GrowthLaw::closed(
                1.0 / 18.0,
                3.0,
                0.0,
                "partial sums of a ~ n^2/6 give A ~ n^3/18".to_string(),
            ));
        }
        RecurrenceSpec::TauberianGenerator { p, q } => {
            let (pf, qf) = (*p as f64, *q as f64);
            let r = 1.0 + qf / pf;
            let inv_pq = 1.0 / (pf + qf);
            set.sequence = Some(GrowthLaw::closed(
                r.powf(-inv_pq),
                -inv_pq,
                0.0,
                format!(
                    "from a^p A = 1 and dA/dn = a^q: A ~ ({r} n)^(1/{r}), so a = A^(-1/{pf}) ~ ({r} n)^(-1/{})",
                    pf + qf
                ),
            ));
            set.aux_sum = Some(GrowthLaw::closed(
                r.powf(1.0 / r),
                1.0 / r,
                0.0,
                format!("A ~ ({r} n)^(1/{r}): its own power feeds the increment a^q = A^(-q/p)"),
            ));
        }
        RecurrenceSpec::Coupled { .. } => {
            let law = || {
                GrowthLaw::closed(
                    3.0_f64.powf(1.0 / 3.0),
                    1.0 / 3.0,
                    0.0,
                    "symmetric balance a ~ b: a' - a = 1/a^2 gives a^3 ~ 3n".to_string(),
                )
            };
            set.sequence = Some(law());
            set.sequence_b = Some(law());
        }
        RecurrenceSpec::QuadraticMap { .. } => {
            set.sequence = Some(GrowthLaw::closed(
                1.0,
                -1.0,
                0.0,
                "x_{n+1} = x_n - x_n^2 decays like 1/n".to_string(),
            ));
            set.second_term = Some(GrowthLaw {
                form: LawForm::SecondTerm,
                description: "the residue 1 - n x_n shrinks like ln n / n".to_string(),
            });
        }
        RecurrenceSpec::DrivenSqrt { driver, .. } => match driver {
            Driver::One => {
                set.sequence = Some(GrowthLaw::closed(
                    std::f64::consts::SQRT_2,
                    0.5,
                    0.0,
                    "unit driver: a^2 gains 2 per step, a ~ sqrt(2 n)".to_string(),
                ));
                set.aux_sum = Some(GrowthLaw::closed(
                    1.0,
                    1.0,
                    0.0,
                    "the driver sum is exactly n".to_string(),
                ));
            }
            Driver::SinSquared => {
                set.sequence = Some(GrowthLaw::closed(
                    1.0,
                    0.5,
                    0.0,
                    "sin^2 averages 1/2: a^2 gains 1 per step in the mean, a ~ sqrt(n)"
                        .to_string(),
                ));
                set.aux_sum = Some(GrowthLaw::closed(
                    0.5,
                    1.0,
                    0.0,
                    "sin^2 averages 1/2 over long stretches".to_string(),
                ));
            }
        },
    }
    set
}

/// A single numeric growth prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Predicted sequence value at `n`.
    pub value: f64,
    /// The argument handed to the inverse: `n` itself, or the accumulated
    /// reciprocal of `g` when a modulation `g` is present.
    pub integral_argument: f64,
    /// Set when the argument barely moved between `n/2` and `n`, i.e. the
    /// prediction sits in an extremely slow growth regime.
    pub slow_divergence_warning: bool,
}

/// Predict the sequence value at `n` for `a' = a + 1/(f(a) g(n))` by
/// inverting `F(x) = 1 + integral_0^x f` at `y = integral_1^n dt/g(t)`
/// (`y = n` when `g` is absent).
pub fn predict(
    f: &Expr,
    g: Option<&Expr>,
    n: f64,
    tol: f64,
    panel_budget: u64,
) -> Result<Prediction, AsymptoteError> {
    let law = predict_law(f, g, tol, panel_budget)?;
    let LawForm::Numeric { integral, argument } = &law.form else {
        unreachable!("predict_law always builds a numeric law");
    };
    let (y, warn) = match argument {
        None => (n, false),
        Some(gcum) => {
            let y = gcum.value(n)?;
            let y_half = gcum.value((0.5 * n).max(gcum.base()))?;
            (y, (y - y_half) < 0.01 * y.abs().max(1.0))
        }
    };
    Ok(Prediction {
        value: integral.invert(y)?,
        integral_argument: y,
        slow_divergence_warning: warn,
    })
}

/// The reusable form of [`predict`]: builds the cumulative integrals once so
/// a whole checkpoint schedule can be evaluated against the same cache.
pub fn predict_law(
    f: &Expr,
    g: Option<&Expr>,
    tol: f64,
    panel_budget: u64,
) -> Result<GrowthLaw, AsymptoteError> {
    let cum_f = CumulativeIntegral::build(f.clone(), 0.0, 1.0, tol, panel_budget)?;
    let argument = match g {
        None => None,
        Some(g) => Some(Arc::new(CumulativeIntegral::build(
            g.reciprocal(),
            1.0,
            0.0,
            tol,
            panel_budget,
        )?)),
    };
    let description = match g {
        None => format!("invert F(x) = 1 + integral of {f} from 0, at y = n"),
        Some(g) => format!(
            "invert F(x) = 1 + integral of {f} from 0, at y = integral of 1/({g}) from 1 to n"
        ),
    };
    Ok(GrowthLaw {
        form: LawForm::Numeric {
            integral: Arc::new(cum_f),
            argument,
        },
        description,
    })
}
