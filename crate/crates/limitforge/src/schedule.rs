//! Checkpoint schedules for long trajectories.

use std::fmt;

/// Where a trajectory records its state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// 1, 2, 5, 10, 20, 50, ... up to and always including `n_max`.
    Geometric125 { n_max: u64 },
    /// Caller-provided checkpoints; must start at 1 and strictly ascend.
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    EmptyExplicit,
    MustStartAtOne { first: u64 },
    NotStrictlyAscending { at: usize },
    ZeroLength,
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::EmptyExplicit => write!(f, "explicit schedule has no checkpoints"),
            ScheduleError::MustStartAtOne { first } => {
                write!(f, "explicit schedule must start at 1, got {first}")
            }
            ScheduleError::NotStrictlyAscending { at } => {
                write!(f, "explicit schedule must strictly ascend (violated at index {at})")
            }
            ScheduleError::ZeroLength => write!(f, "schedule upper end must be at least 1"),
        }
    }
}

impl std::error::Error for ScheduleError {}

impl Schedule {
    /// Materialize the checkpoint list. The result is non-empty, starts at 1,
    /// and strictly ascends.
    pub fn checkpoints(&self) -> Result<Vec<u64>, ScheduleError> {
        match self {
            Schedule::Geometric125 { n_max } => {
                if *n_max == 0 {
                    return Err(ScheduleError::ZeroLength);
                }
                let mut out = Vec::new();
                let mut decade: u64 = 1;
                'outer: loop {
                    for mult in [1u64, 2, 5] {
                        match decade.checked_mul(mult) {
                            Some(v) if v <= *n_max => out.push(v),
                            _ => break 'outer,
                        }
                    }
                    match decade.checked_mul(10) {
                        Some(d) => decade = d,
                        None => break,
                    }
                }
                if out.last() != Some(n_max) {
                    out.push(*n_max);
                }
                Ok(out)
            }
            Schedule::Explicit(points) => {
                if points.is_empty() {
                    return Err(ScheduleError::EmptyExplicit);
                }
                if points[0] != 1 {
                    return Err(ScheduleError::MustStartAtOne { first: points[0] });
                }
                for (i, w) in points.windows(2).enumerate() {
                    if w[1] <= w[0] {
                        return Err(ScheduleError::NotStrictlyAscending { at: i + 1 });
                    }
                }
                Ok(points.clone())
            }
        }
    }

    /// Largest checkpoint.
    pub fn n_max(&self) -> u64 {
        match self {
            Schedule::Geometric125 { n_max } => *n_max,
            Schedule::Explicit(points) => points.last().copied().unwrap_or(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_covers_decades_and_ends_at_n_max() {
        let s = Schedule::Geometric125 { n_max: 1000 };
        assert_eq!(
            s.checkpoints().unwrap(),
            vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]
        );
    }

    #[test]
    fn geometric_appends_irregular_n_max() {
        let s = Schedule::Geometric125 { n_max: 30 };
        assert_eq!(s.checkpoints().unwrap(), vec![1, 2, 5, 10, 20, 30]);
    }

    #[test]
    fn geometric_n_max_one() {
        let s = Schedule::Geometric125 { n_max: 1 };
        assert_eq!(s.checkpoints().unwrap(), vec![1]);
    }

    #[test]
    fn explicit_is_validated() {
        assert!(Schedule::Explicit(vec![1, 10, 100]).checkpoints().is_ok());
        assert_eq!(
            Schedule::Explicit(vec![]).checkpoints().unwrap_err(),
            ScheduleError::EmptyExplicit
        );
        assert_eq!(
            Schedule::Explicit(vec![2, 10]).checkpoints().unwrap_err(),
            ScheduleError::MustStartAtOne { first: 2 }
        );
        assert_eq!(
            Schedule::Explicit(vec![1, 10, 10]).checkpoints().unwrap_err(),
            ScheduleError::NotStrictlyAscending { at: 2 }
        );
    }
}
