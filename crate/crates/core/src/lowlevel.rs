//! Single-agent optimal temporal planning under time-interval constraints.
//!
//! The search runs over safe intervals: for each vertex, the maximal periods
//! not blocked by a vertex constraint. A state is a vertex plus one of its
//! safe intervals, reached at the earliest possible time. Leaving a state,
//! the agent waits only as long as needed to dodge an edge constraint or to
//! land inside a later safe interval of the neighbour.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::geometry::TimeInterval;
use crate::model::{AgentId, Instance, MotionEvent, Span, TemporalPlan, Time, VertexId};

/// Forbids `agent` from `{from, to}` during `span`. With `from == to` the
/// agent may neither wait at the vertex during any part of `span` nor arrive
/// there at an instant inside it; otherwise it may not traverse the edge (in
/// either direction) during any part of `span`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub agent: AgentId,
    pub from: VertexId,
    pub to: VertexId,
    pub span: Span,
}

impl Constraint {
    pub fn new(agent: AgentId, from: VertexId, to: VertexId, span: Span) -> Constraint {
        Constraint { agent, from, to, span }
    }

    pub fn is_vertex(&self) -> bool {
        self.from == self.to
    }

    pub fn interval(&self) -> TimeInterval {
        self.span.to_interval()
    }

    /// Whether executing `event` would break this constraint.
    pub fn forbids(&self, event: &MotionEvent) -> bool {
        if self.is_vertex() {
            if event.is_wait() {
                event.from == self.from && event.span.overlaps(&self.span)
            } else {
                event.to == self.from && self.span.contains(event.end())
            }
        } else {
            !event.is_wait()
                && edge_key(event.from, event.to) == edge_key(self.from, self.to)
                && event.span.overlaps(&self.span)
        }
    }
}

fn edge_key(u: VertexId, v: VertexId) -> (VertexId, VertexId) {
    (u.min(v), u.max(v))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowLevelError {
    #[error("agent {agent} has no plan satisfying its constraints within the search horizon")]
    Infeasible { agent: AgentId },
}

/// Sorts and merges spans so that touching or overlapping ones fuse.
fn merge(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort();
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans.into_iter().filter(|s| !s.is_empty()) {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

/// Complement of merged `blocked` spans within `[0, MAX)`.
fn safe_intervals(blocked: &[Span]) -> Vec<Span> {
    let mut out = Vec::with_capacity(blocked.len() + 1);
    let mut lo = Time::ZERO;
    for b in blocked {
        if b.start > lo {
            out.push(Span::new(lo, b.start));
        }
        lo = lo.max(b.end);
    }
    out.push(Span::new(lo, Time::MAX));
    out
}

struct Node {
    vertex: VertexId,
    arrival: Time,
    parent: Option<usize>,
    /// Departure time from the parent vertex.
    depart: Time,
    events: usize,
}

/// Minimum-duration plan for `agent` from its start to its goal that breaks
/// none of `constraints` (constraints of other agents are ignored).
///
/// Ties are broken towards fewer events, then the lexicographically smallest
/// vertex sequence. The plan may end at the goal only once no vertex
/// constraint on the goal lies in the future, because the agent stays there.
pub fn shortest_temporal_plan(
    instance: &Instance,
    agent: AgentId,
    constraints: &[Constraint],
) -> Result<TemporalPlan, LowLevelError> {
    shortest_temporal_plan_within(instance, agent, constraints, None)
}

/// [`shortest_temporal_plan`] with an explicit horizon: arrivals later than
/// `horizon` are never expanded. The default horizon is the sum of all edge
/// traversal times plus the latest constraint end.
pub fn shortest_temporal_plan_within(
    instance: &Instance,
    agent: AgentId,
    constraints: &[Constraint],
    horizon: Option<Time>,
) -> Result<TemporalPlan, LowLevelError> {
    let g = instance.graph();
    let n = g.num_vertices();
    let mut vertex_blocks: Vec<Vec<Span>> = vec![Vec::new(); n];
    let mut edge_blocks: HashMap<(VertexId, VertexId), Vec<Span>> = HashMap::new();
    let mut latest = Time::ZERO;
    for c in constraints.iter().filter(|c| c.agent == agent && !c.span.is_empty()) {
        latest = latest.max(c.span.end);
        if c.is_vertex() {
            vertex_blocks[c.from].push(c.span);
        } else {
            edge_blocks.entry(edge_key(c.from, c.to)).or_default().push(c.span);
        }
    }
    let safe: Vec<Vec<Span>> = vertex_blocks.into_iter().map(|b| safe_intervals(&merge(b))).collect();
    let edge_blocks: HashMap<_, _> = edge_blocks.into_iter().map(|(k, v)| (k, merge(v))).collect();
    let horizon = horizon.unwrap_or_else(|| {
        g.edges()
            .map(|(u, v)| instance.traversal_time(agent, u, v).expect("graph edge"))
            .fold(latest, |acc, d| acc + d)
    });

    let speed = instance.agent(agent).velocity;
    let goal = instance.goal(agent);
    let heuristic = |v: VertexId| {
        if instance.is_unit_time() {
            Time::ZERO
        } else {
            // Rounded down so it never exceeds a quantized true distance.
            Time::from_ticks((g.distance(v, goal) / speed * 1e9).floor() as i64 - 1).max(Time::ZERO)
        }
    };

    let start = instance.start(agent);
    let mut nodes = vec![Node {
        vertex: start,
        arrival: Time::ZERO,
        parent: None,
        depart: Time::ZERO,
        events: 0,
    }];
    // The start interval may be blocked from time 0; then the agent can only
    // leave immediately.
    let start_slot = safe[start].iter().position(|s| s.contains(Time::ZERO));
    let mut best: HashMap<(VertexId, Option<usize>), Time> = HashMap::new();
    let mut closed = HashSet::new();
    best.insert((start, start_slot), Time::ZERO);
    let mut open = BinaryHeap::new();
    open.push(Reverse((heuristic(start), Time::ZERO, 0usize, vec![start], 0usize, start_slot)));

    while let Some(Reverse((_, arrival, _, seq, id, slot))) = open.pop() {
        let u = nodes[id].vertex;
        if !closed.insert((u, slot)) {
            continue;
        }
        let leave_by = slot.map_or(arrival, |s| safe[u][s].end);
        if u == goal && leave_by == Time::MAX {
            return Ok(build_plan(agent, &nodes, id));
        }
        for &v in g.neighbors(u) {
            let d = instance.traversal_time(agent, u, v).expect("graph edge");
            let blocks = edge_blocks.get(&edge_key(u, v)).map_or(&[][..], Vec::as_slice);
            for (k, target) in safe[v].iter().enumerate() {
                if target.end != Time::MAX && target.end <= arrival + d {
                    continue;
                }
                let mut depart = arrival.max(if target.start > d { target.start - d } else { Time::ZERO });
                if depart > leave_by {
                    break;
                }
                for b in blocks {
                    if Span::new(depart, depart + d).overlaps(b) {
                        depart = b.end;
                    }
                }
                let arrive = depart + d;
                if depart > leave_by || arrive > horizon || !target.contains(arrive) {
                    continue;
                }
                let key = (v, Some(k));
                if closed.contains(&key) || best.get(&key).is_some_and(|&b| b < arrive) {
                    continue;
                }
                best.insert(key, arrive);
                let events = nodes[id].events + 1 + usize::from(depart > arrival);
                let mut next_seq = seq.clone();
                next_seq.push(v);
                nodes.push(Node {
                    vertex: v,
                    arrival: arrive,
                    parent: Some(id),
                    depart,
                    events,
                });
                open.push(Reverse((arrive + heuristic(v), arrive, events, next_seq, nodes.len() - 1, Some(k))));
            }
        }
    }
    Err(LowLevelError::Infeasible { agent })
}

fn build_plan(agent: AgentId, nodes: &[Node], mut id: usize) -> TemporalPlan {
    let mut events = Vec::new();
    while let Some(parent) = nodes[id].parent {
        let node = &nodes[id];
        let p = &nodes[parent];
        events.push(MotionEvent::new(p.vertex, node.vertex, node.depart, node.arrival));
        if node.depart > p.arrival {
            events.push(MotionEvent::new(p.vertex, p.vertex, p.arrival, node.depart));
        }
        id = parent;
    }
    events.reverse();
    TemporalPlan::new(agent, events)
}

/// Duration of the fastest unconstrained plan of `agent`; a lower bound on
/// its individual makespan in any solution.
pub fn unconstrained_duration(instance: &Instance, agent: AgentId) -> Result<Time, LowLevelError> {
    shortest_temporal_plan(instance, agent, &[]).map(|p| p.makespan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{layered_instance, Connectivity, LayeredSpec};
    use crate::model::check_plan;

    fn t(x: f64) -> Time {
        Time::from_secs(x)
    }

    /// Agent 0 crosses [3,1,3] (adjacent) from the left of layer 1 to the
    /// left of layer 3; vertex 3 is the single middle vertex.
    fn bottleneck() -> Instance {
        let spec = LayeredSpec::new(&[3, 1, 3], Connectivity::Adjacent);
        layered_instance(&spec, &[0, 1, 2], &[0, 1, 2]).unwrap()
    }

    #[test]
    fn unconstrained_goes_through_middle() {
        let inst = bottleneck();
        let plan = shortest_temporal_plan(&inst, 1, &[]).unwrap();
        assert_eq!(plan.makespan(), t(2.0));
        assert_eq!(plan.vertices(inst.start(1)), vec![1, 3, 5]);
    }

    #[test]
    fn vertex_constraint_forces_half_unit_wait() {
        let inst = bottleneck();
        let c = Constraint::new(1, 3, 3, Span::new(t(0.0), t(1.5)));
        let plan = shortest_temporal_plan(&inst, 1, &[c]).unwrap();
        assert_eq!(plan.makespan(), t(2.5));
        assert_eq!(plan.events[0], MotionEvent::new(1, 1, t(0.0), t(0.5)));
        assert!(plan.events.iter().all(|e| !c.forbids(e)));
        check_plan(&inst, &plan, true).unwrap();
    }

    #[test]
    fn start_equals_goal_is_empty() {
        let spec = LayeredSpec::new(&[2, 2], Connectivity::Adjacent);
        let inst = layered_instance(&spec, &[0, 1], &[0, 1]).unwrap();
        let mut g = inst.graph().clone();
        g.add_edge(0, 1).unwrap();
        let inst = Instance::new(g, inst.agents().to_vec(), vec![0, 1], vec![0, 1]).unwrap();
        assert_eq!(shortest_temporal_plan(&inst, 0, &[]).unwrap(), TemporalPlan::empty(0));
    }

    #[test]
    fn future_goal_constraint_prevents_parking() {
        let inst = bottleneck();
        // The goal is blocked during [3, 4); arriving at 2 and parking would
        // break it, so the agent must arrive at 4 or later.
        let c = Constraint::new(1, 5, 5, Span::new(t(3.0), t(4.0)));
        let plan = shortest_temporal_plan(&inst, 1, &[c]).unwrap();
        assert_eq!(plan.makespan(), t(4.0));
    }

    #[test]
    fn edge_constraint_delays_departure() {
        let inst = bottleneck();
        let c = Constraint::new(1, 3, 1, Span::new(t(0.0), t(0.25)));
        let plan = shortest_temporal_plan(&inst, 1, &[c]).unwrap();
        // First-layer vertices only connect to the middle, so there is no detour.
        assert_eq!(plan.makespan(), t(2.25));
    }

    #[test]
    fn blocked_forever_is_infeasible() {
        let inst = bottleneck();
        let c = Constraint::new(1, 3, 3, Span::new(t(0.0), Time::MAX));
        assert_eq!(
            shortest_temporal_plan(&inst, 1, &[c]),
            Err(LowLevelError::Infeasible { agent: 1 })
        );
    }

    #[test]
    fn constraints_of_other_agents_are_ignored() {
        let inst = bottleneck();
        let c = Constraint::new(0, 3, 3, Span::new(t(0.0), t(10.0)));
        assert_eq!(shortest_temporal_plan(&inst, 1, &[c]).unwrap().makespan(), t(2.0));
    }

    #[test]
    fn forbids_semantics() {
        let vc = Constraint::new(0, 3, 3, Span::new(t(1.0), t(2.0)));
        assert!(vc.forbids(&MotionEvent::new(3, 3, t(0.5), t(1.5))));
        assert!(!vc.forbids(&MotionEvent::new(3, 3, t(0.0), t(1.0))));
        assert!(vc.forbids(&MotionEvent::new(1, 3, t(0.5), t(1.5))));
        assert!(!vc.forbids(&MotionEvent::new(1, 3, t(1.0), t(2.0))));
        let ec = Constraint::new(0, 3, 1, Span::new(t(1.0), t(2.0)));
        assert!(ec.forbids(&MotionEvent::new(1, 3, t(0.5), t(1.5))));
        assert!(!ec.forbids(&MotionEvent::new(1, 3, t(2.0), t(3.0))));
        assert!(!ec.forbids(&MotionEvent::new(3, 3, t(1.0), t(2.0))));
    }
}
