use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use crate::geometry::TimeInterval;

const TICKS_PER_SECOND: f64 = 1e9;

/// A point in time on the canonical 1e-9 grid, stored as integer ticks.
///
/// Every time the solvers compute is snapped to this grid, so sums that are
/// equal in exact arithmetic compare equal regardless of evaluation order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(i64);

impl Time {
    pub const ZERO: Time = Time(0);
    pub const MAX: Time = Time(i64::MAX);

    pub fn from_secs(t: f64) -> Time {
        debug_assert!(t.is_finite(), "non-finite time {t}");
        Time((t * TICKS_PER_SECOND).round() as i64)
    }

    pub const fn from_ticks(ticks: i64) -> Time {
        Time(ticks)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND
    }

    pub const fn ticks(self) -> i64 {
        self.0
    }
}

/// Rounds `t` to the nearest multiple of 1e-9.
pub fn quantize(t: f64) -> f64 {
    Time::from_secs(t).as_secs()
}

impl Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        Time(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for Time {
    fn add_assign(&mut self, rhs: Time) {
        self.0 = self.0.saturating_add(rhs.0);
    }
}

impl Sub for Time {
    type Output = Time;
    fn sub(self, rhs: Time) -> Time {
        Time(self.0 - rhs.0)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:09}", abs / 1_000_000_000, abs % 1_000_000_000)
    }
}

/// Half-open `[start, end)` on the tick grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: Time,
    pub end: Time,
}

impl Span {
    pub fn new(start: Time, end: Time) -> Span {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start.max(other.start) < self.end.min(other.end)
    }

    pub fn intersection(&self, other: &Span) -> Span {
        let start = self.start.max(other.start);
        Span {
            start,
            end: self.end.min(other.end).max(start),
        }
    }

    pub fn contains(&self, t: Time) -> bool {
        self.start <= t && t < self.end
    }

    pub fn to_interval(self) -> TimeInterval {
        TimeInterval::new(self.start.as_secs(), self.end.as_secs())
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(1.0000000004), 1.0);
        assert_eq!(quantize(5f64.sqrt()), 2.236067977);
        assert_eq!(quantize(0.0), 0.0);
    }

    #[test]
    fn sums_are_order_independent() {
        let a = Time::from_secs(2f64.sqrt());
        let b = Time::from_secs(5f64.sqrt());
        let c = Time::from_secs(1.0);
        assert_eq!((a + b) + c, a + (b + c));
    }

    #[test]
    fn display_has_nine_decimals() {
        assert_eq!(Time::from_secs(2.5).to_string(), "2.500000000");
        assert_eq!(Time::from_secs(2f64.sqrt()).to_string(), "1.414213562");
        assert_eq!(Time::ZERO.to_string(), "0.000000000");
    }

    #[test]
    fn span_overlap_is_half_open() {
        let s = |a: f64, b: f64| Span::new(Time::from_secs(a), Time::from_secs(b));
        assert!(!s(0., 1.).overlaps(&s(1., 2.)));
        assert!(s(0., 2.).overlaps(&s(1., 3.)));
        assert!(!s(1., 1.).overlaps(&s(0., 3.)));
        assert_eq!(s(0., 5.).intersection(&s(2., 3.)), s(2., 3.));
        assert!(s(0., 1.).intersection(&s(1., 2.)).is_empty());
    }
}
