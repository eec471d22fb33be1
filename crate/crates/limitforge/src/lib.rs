//! A numerical laboratory for sequences that diverge slowly.

pub mod asymptote;
pub mod cli;
pub mod engine;
pub mod funcdsl;
pub mod kahan;
pub mod quad;
pub mod schedule;
pub mod series;
pub mod verify;

pub use asymptote::{catalog, predict, CumulativeIntegral, GrowthLaw, LawForm, LawSet, Prediction};
pub use engine::{identity_audit, iterate, Driver, RecurrenceSpec, Termination, Trajectory};
pub use funcdsl::{check_hypotheses, evaluate, parse, Expr, MonotonicityVerdict};
pub use schedule::Schedule;
pub use series::{
    defect, euler_mascheroni, stieltjes, sum_alternating, DefectSequence, SeriesOptions,
    SeriesResult,
};
pub use verify::{
    abelian_average, classify_limits, inequality_audit, ratio_report, ratio_report_values,
    ConvergenceReport, InequalityReport, LimitClassification, SequenceVerdict, Trend,
};
