//! Planar primitives: points, segments and half-open time intervals.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Point2D {
        Point2D { x, y }
    }

    /// Point on the segment `self -> other` at parameter `s` in [0, 1].
    pub fn lerp(self, other: Point2D, s: f64) -> Point2D {
        Point2D::new(self.x + (other.x - self.x) * s, self.y + (other.y - self.y) * s)
    }
}

impl fmt::Display for Point2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A closed segment. `p == q` is a legal, degenerate segment (a point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2D {
    pub p: Point2D,
    pub q: Point2D,
}

impl Segment2D {
    pub const fn new(p: Point2D, q: Point2D) -> Segment2D {
        Segment2D { p, q }
    }

    pub const fn point(p: Point2D) -> Segment2D {
        Segment2D { p, q: p }
    }

    pub fn is_degenerate(&self) -> bool {
        self.p == self.q
    }
}

pub fn point_distance(a: Point2D, b: Point2D) -> f64 {
    (b.x - a.x).hypot(b.y - a.y)
}

pub fn point_segment_distance(a: Point2D, s: Segment2D) -> f64 {
    let dx = s.q.x - s.p.x;
    let dy = s.q.y - s.p.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return point_distance(a, s.p);
    }
    let t = (((a.x - s.p.x) * dx + (a.y - s.p.y) * dy) / len2).clamp(0.0, 1.0);
    point_distance(a, s.p.lerp(s.q, t))
}

fn orientation(a: Point2D, b: Point2D, c: Point2D) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Minimum distance between any point of `s1` and any point of `s2`.
///
/// Properly crossing segments are at distance zero; in every other case the
/// minimum is attained at an endpoint of one of the two segments, which also
/// covers touching, collinear and degenerate inputs.
pub fn segment_distance(s1: Segment2D, s2: Segment2D) -> f64 {
    let d1 = orientation(s1.p, s1.q, s2.p);
    let d2 = orientation(s1.p, s1.q, s2.q);
    let d3 = orientation(s2.p, s2.q, s1.p);
    let d4 = orientation(s2.p, s2.q, s1.q);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(s1.p, s2)
        .min(point_segment_distance(s1.q, s2))
        .min(point_segment_distance(s2.p, s1))
        .min(point_segment_distance(s2.q, s1))
}

/// Half-open interval `[start, end)`; empty when `start == end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
}

impl TimeInterval {
    /// Panics if `start > end`.
    pub fn new(start: f64, end: f64) -> TimeInterval {
        assert!(start <= end, "interval start {start} after end {end}");
        TimeInterval { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// `[max(starts), min(ends))`, collapsed to an empty interval when disjoint.
pub fn interval_intersection(i1: TimeInterval, i2: TimeInterval) -> TimeInterval {
    let start = i1.start.max(i2.start);
    let end = i1.end.min(i2.end);
    TimeInterval {
        start,
        end: end.max(start),
    }
}

pub fn intervals_overlap(i1: TimeInterval, i2: TimeInterval) -> bool {
    !interval_intersection(i1, i2).is_empty()
}
