//! Collision detection between temporal plans.
//!
//! Two events collide when their static segments come closer than the sum of
//! the two diameters while their half-open time intervals overlap. Waits are
//! degenerate segments. This is conservative: it ignores where along the
//! segment each agent actually is at a given instant.

use std::cmp::Ordering;

use crate::geometry::{point_distance, segment_distance, Point2D};
use crate::model::{
    check_solution, AgentId, Instance, MotionEvent, PlanError, Solution, Span, TemporalPlan, Time, VertexId,
};

/// One participant of a collision: an agent and the event it was executing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CollisionSide {
    pub agent: AgentId,
    pub from: VertexId,
    pub to: VertexId,
    pub span: Span,
}

impl CollisionSide {
    fn new(agent: AgentId, e: &MotionEvent) -> CollisionSide {
        CollisionSide {
            agent,
            from: e.from,
            to: e.to,
            span: e.span,
        }
    }

    pub fn is_wait(&self) -> bool {
        self.from == self.to
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Collision {
    pub first: CollisionSide,
    pub second: CollisionSide,
}

impl Collision {
    /// The common part of both events' time intervals.
    pub fn overlap(&self) -> Span {
        self.first.span.intersection(&self.second.span)
    }

    fn order_key(&self) -> (AgentId, AgentId, Time, CollisionSide, CollisionSide) {
        (self.first.agent, self.second.agent, self.overlap().start, self.first, self.second)
    }
}

impl Ord for Collision {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for Collision {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn events_conflict(instance: &Instance, a: AgentId, ev_a: &MotionEvent, b: AgentId, ev_b: &MotionEvent) -> bool {
    if !ev_a.span.overlaps(&ev_b.span) {
        return false;
    }
    let g = instance.graph();
    let threshold = instance.agent(a).diameter + instance.agent(b).diameter;
    segment_distance(g.segment(ev_a.from, ev_a.to), g.segment(ev_b.from, ev_b.to)) < threshold
}

/// Appends a goal wait to every plan that finishes before `horizon`.
pub fn pad_plan(instance: &Instance, plan: &TemporalPlan, horizon: Time) -> TemporalPlan {
    let mut out = plan.clone();
    let end = plan.makespan();
    if end < horizon {
        let at = plan.events.last().map_or(instance.start(plan.agent), |e| e.to);
        out.events.push(MotionEvent::new(at, at, end, horizon));
    }
    out
}

pub fn pad_to_makespan(instance: &Instance, solution: &Solution) -> Solution {
    let horizon = solution.makespan();
    Solution::new(solution.plans.iter().map(|p| pad_plan(instance, p, horizon)).collect())
}

/// Every colliding event pair of `plans`, in the canonical order (agent
/// pair, then overlap start). Plans are taken as given, without padding.
pub fn collisions_between(instance: &Instance, plans: &[TemporalPlan]) -> Vec<Collision> {
    let mut found = Vec::new();
    for (i, p) in plans.iter().enumerate() {
        for q in &plans[i + 1..] {
            let (p, q) = if p.agent < q.agent { (p, q) } else { (q, p) };
            for e in &p.events {
                for f in &q.events {
                    if events_conflict(instance, p.agent, e, q.agent, f) {
                        found.push(Collision {
                            first: CollisionSide::new(p.agent, e),
                            second: CollisionSide::new(q.agent, f),
                        });
                    }
                }
            }
        }
    }
    found.sort();
    found
}

/// Checks well-formedness, pads every plan to the overall makespan so parked
/// agents keep blocking their goals, and returns all collisions.
pub fn validate_plans(instance: &Instance, solution: &Solution) -> Result<Vec<Collision>, PlanError> {
    validate_plans_with(instance, solution, true)
}

/// [`validate_plans`] with padding optional; `pad = false` only looks at
/// events inside each plan.
pub fn validate_plans_with(instance: &Instance, solution: &Solution, pad: bool) -> Result<Vec<Collision>, PlanError> {
    check_solution(instance, solution)?;
    let plans = if pad {
        pad_to_makespan(instance, solution).plans
    } else {
        solution.plans.clone()
    };
    Ok(collisions_between(instance, &plans))
}

/// Position of the agent following `plan` at time `t`; it sits at its start
/// before the plan and at its last vertex afterwards.
pub fn position_at(instance: &Instance, plan: &TemporalPlan, t: f64) -> Point2D {
    let g = instance.graph();
    for e in &plan.events {
        let (s, f) = (e.start().as_secs(), e.end().as_secs());
        if t < f {
            let frac = if t <= s { 0.0 } else { (t - s) / (f - s) };
            return g.position(e.from).lerp(g.position(e.to), frac);
        }
    }
    g.position(plan.events.last().map_or(instance.start(plan.agent), |e| e.to))
}

/// Simulates the padded solution at `0, dt, 2dt, ...` up to the makespan and
/// reports event pairs whose discs overlap, that is, centres closer than the
/// sum of the radii. A cross-check only; the solvers never call it.
pub fn sampled_overlap_check(instance: &Instance, solution: &Solution, dt: f64) -> Vec<Collision> {
    assert!(dt > 0.0, "sampling step must be positive");
    let padded = pad_to_makespan(instance, solution);
    let horizon = padded.makespan().as_secs();
    let event_at = |plan: &TemporalPlan, t: f64| -> MotionEvent {
        let tt = Time::from_secs(t);
        plan.events
            .iter()
            .find(|e| e.span.contains(tt))
            .or(plan.events.last())
            .copied()
            .unwrap_or_else(|| {
                let s = instance.start(plan.agent);
                MotionEvent::new(s, s, Time::ZERO, Time::ZERO)
            })
    };
    let mut found = Vec::new();
    let steps = (horizon / dt).floor() as usize;
    for k in 0..=steps {
        let t = k as f64 * dt;
        for (i, p) in padded.plans.iter().enumerate() {
            for q in &padded.plans[i + 1..] {
                let r = (instance.agent(p.agent).diameter + instance.agent(q.agent).diameter) / 2.0;
                if point_distance(position_at(instance, p, t), position_at(instance, q, t)) < r {
                    let (p, q) = if p.agent < q.agent { (p, q) } else { (q, p) };
                    let c = Collision {
                        first: CollisionSide::new(p.agent, &event_at(p, t)),
                        second: CollisionSide::new(q.agent, &event_at(q, t)),
                    };
                    if !found.contains(&c) {
                        found.push(c);
                    }
                }
            }
        }
    }
    found.sort();
    found
}

/// Re-times a solution of the unit-time version of `instance` with the true
/// traversal durations.
///
/// The unit plans are cut into steps `[k, k + 1)`. Step `k` of the result
/// lasts as long as the slowest traversal in that step; faster movers wait
/// at their destination for the rest of it, and steps in which nobody moves
/// are dropped. Within a step every agent stays on the segment it occupied
/// in the unit plan, and steps never overlap in time, so a unit solution free
/// of collisions stays free of collisions.
pub fn reinterpret_unit_solution(instance: &Instance, unit: &Solution) -> Solution {
    let steps = unit.makespan().as_secs().round() as usize;
    let one = Time::from_secs(1.0);
    let action = |plan: &TemporalPlan, k: usize| -> (VertexId, VertexId) {
        let t = Time::from_ticks(one.ticks() * k as i64);
        match plan.events.iter().find(|e| e.span.contains(t)) {
            Some(e) if e.is_wait() => (e.from, e.from),
            Some(e) => (e.from, e.to),
            None => {
                let at = plan.events.last().map_or(instance.start(plan.agent), |e| e.to);
                (at, at)
            }
        }
    };
    let mut plans: Vec<TemporalPlan> = unit.plans.iter().map(|p| TemporalPlan::empty(p.agent)).collect();
    let mut now = Time::ZERO;
    for k in 0..steps {
        let moves: Vec<(VertexId, VertexId)> = unit.plans.iter().map(|p| action(p, k)).collect();
        let duration = unit
            .plans
            .iter()
            .zip(&moves)
            .map(|(p, &(u, v))| instance.traversal_time(p.agent, u, v).expect("unit plan uses graph edges"))
            .max()
            .unwrap_or(Time::ZERO);
        if duration == Time::ZERO {
            continue;
        }
        for ((plan, unit_plan), &(u, v)) in plans.iter_mut().zip(&unit.plans).zip(&moves) {
            let d = instance.traversal_time(unit_plan.agent, u, v).expect("unit plan uses graph edges");
            if u != v {
                plan.events.push(MotionEvent::new(u, v, now, now + d));
            }
            if d < duration {
                plan.events.push(MotionEvent::new(v, v, now + d, now + duration));
            }
        }
        now += duration;
    }
    for plan in &mut plans {
        // Drop the trailing goal wait so individual makespans stay meaningful.
        let last_move = plan.events.iter().rposition(|e| !e.is_wait());
        plan.events.truncate(last_move.map_or(0, |i| i + 1));
        plan.merge_waits();
    }
    Solution::new(plans)
}
