use std::fmt;
use std::time::{Duration, Instant};

/// Outcome category shared by both solvers and the benchmark report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolveStatus {
    Solved,
    Timeout,
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Timeout => "timeout",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

pub(crate) fn deadline(started: Instant, timeout: Option<Duration>) -> Option<Instant> {
    timeout.and_then(|t| started.checked_add(t))
}

pub(crate) fn expired(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}
