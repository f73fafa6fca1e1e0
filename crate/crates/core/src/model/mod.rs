//! Problem instances, temporal plans and makespan accounting.

mod io;
mod time;

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::geometry::{point_distance, Point2D, Segment2D, TimeInterval};

pub use io::{parse_instance, parse_solution, write_instance, write_solution};
pub use time::{quantize, Span, Time};

pub type VertexId = usize;
pub type AgentId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("vertex {0} does not exist")]
    UnknownVertex(VertexId),
    #[error("{{{0}, {1}}} is not an edge")]
    InvalidEdge(VertexId, VertexId),
    #[error("self-loop at vertex {0}; waiting is an action, not an edge")]
    SelfLoop(VertexId),
    #[error("agent {agent}: velocity and diameter must be positive and finite")]
    InvalidAgent { agent: AgentId },
    #[error("vertex {vertex} is the {role} of more than one agent")]
    NotInjective { role: &'static str, vertex: VertexId },
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("agent {agent}: no plan supplied")]
    MissingPlan { agent: AgentId },
    #[error("agent {agent}: plan does not start at its start vertex at time 0")]
    BadStart { agent: AgentId },
    #[error("agent {agent}: plan does not end at its goal vertex")]
    BadGoal { agent: AgentId },
    #[error("agent {agent}: event {index} is not contiguous with its predecessor")]
    Discontinuous { agent: AgentId, index: usize },
    #[error("agent {agent}: event {index} has non-positive duration")]
    EmptyEvent { agent: AgentId, index: usize },
    #[error("agent {agent}: event {index} moves along a non-edge")]
    NotAnEdge { agent: AgentId, index: usize },
    #[error("agent {agent}: event {index} duration does not match distance / velocity")]
    WrongDuration { agent: AgentId, index: usize },
}

/// Undirected graph with vertices embedded in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    positions: Vec<Point2D>,
    adjacency: Vec<Vec<VertexId>>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl Graph {
    pub fn new(positions: Vec<Point2D>) -> Graph {
        let n = positions.len();
        Graph {
            positions,
            adjacency: vec![Vec::new(); n],
            edges: BTreeSet::new(),
        }
    }

    /// Adds `{u, v}`; re-adding an existing edge is a no-op.
    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<(), ModelError> {
        for w in [u, v] {
            if w >= self.positions.len() {
                return Err(ModelError::UnknownVertex(w));
            }
        }
        if u == v {
            return Err(ModelError::SelfLoop(u));
        }
        if self.edges.insert((u.min(v), u.max(v))) {
            for (a, b) in [(u, v), (v, u)] {
                let list = &mut self.adjacency[a];
                let at = list.binary_search(&b).unwrap_err();
                list.insert(at, b);
            }
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn position(&self, v: VertexId) -> Point2D {
        self.positions[v]
    }

    pub fn positions(&self) -> &[Point2D] {
        &self.positions
    }

    /// Neighbours of `v` in increasing id order.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    /// Edges as `(min, max)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn distance(&self, u: VertexId, v: VertexId) -> f64 {
        point_distance(self.positions[u], self.positions[v])
    }

    /// The straight segment between `u` and `v`; a point when `u == v`.
    pub fn segment(&self, u: VertexId, v: VertexId) -> Segment2D {
        Segment2D::new(self.positions[u], self.positions[v])
    }
}

/// A disc-shaped agent with constant speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agent {
    pub velocity: f64,
    pub diameter: f64,
}

impl Agent {
    pub fn new(velocity: f64, diameter: f64) -> Agent {
        Agent { velocity, diameter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    graph: Graph,
    agents: Vec<Agent>,
    starts: Vec<VertexId>,
    goals: Vec<VertexId>,
    unit_time: bool,
}

impl Instance {
    pub fn new(
        graph: Graph,
        agents: Vec<Agent>,
        starts: Vec<VertexId>,
        goals: Vec<VertexId>,
    ) -> Result<Instance, ModelError> {
        for (what, got) in [("start vertices", starts.len()), ("goal vertices", goals.len())] {
            if got != agents.len() {
                return Err(ModelError::CountMismatch {
                    what,
                    expected: agents.len(),
                    got,
                });
            }
        }
        for (i, a) in agents.iter().enumerate() {
            let ok = |x: f64| x.is_finite() && x > 0.0;
            if !ok(a.velocity) || !ok(a.diameter) {
                return Err(ModelError::InvalidAgent { agent: i });
            }
        }
        for (role, map) in [("start", &starts), ("goal", &goals)] {
            let mut seen = HashSet::new();
            for &v in map.iter() {
                if v >= graph.num_vertices() {
                    return Err(ModelError::UnknownVertex(v));
                }
                if !seen.insert(v) {
                    return Err(ModelError::NotInjective { role, vertex: v });
                }
            }
        }
        Ok(Instance {
            graph,
            agents,
            starts,
            goals,
            unit_time: false,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, a: AgentId) -> Agent {
        self.agents[a]
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn start(&self, a: AgentId) -> VertexId {
        self.starts[a]
    }

    pub fn goal(&self, a: AgentId) -> VertexId {
        self.goals[a]
    }

    /// True when every edge takes exactly one time unit (see [`discretize`]).
    pub fn is_unit_time(&self) -> bool {
        self.unit_time
    }

    /// Time agent `a` needs to traverse `{u, v}`; zero when `u == v`.
    pub fn traversal_time(&self, a: AgentId, u: VertexId, v: VertexId) -> Result<Time, ModelError> {
        if u == v {
            return if u < self.graph.num_vertices() {
                Ok(Time::ZERO)
            } else {
                Err(ModelError::UnknownVertex(u))
            };
        }
        if !self.graph.has_edge(u, v) {
            return Err(ModelError::InvalidEdge(u, v));
        }
        if self.unit_time {
            return Ok(Time::from_secs(1.0));
        }
        Ok(Time::from_secs(self.graph.distance(u, v) / self.agents[a].velocity))
    }

    /// Same as [`Instance::traversal_time`], in plain seconds.
    pub fn traversal_duration(&self, a: AgentId, u: VertexId, v: VertexId) -> Result<f64, ModelError> {
        self.traversal_time(a, u, v).map(Time::as_secs)
    }
}

/// A copy of `instance` in which every edge takes one time unit for every
/// agent, which turns the solvers into standard (discrete) makespan solvers.
pub fn discretize(instance: &Instance) -> Instance {
    Instance {
        unit_time: true,
        ..instance.clone()
    }
}

/// One traversal (`from != to`) or wait (`from == to`) over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MotionEvent {
    pub from: VertexId,
    pub to: VertexId,
    pub span: Span,
}

impl MotionEvent {
    pub fn new(from: VertexId, to: VertexId, start: Time, end: Time) -> MotionEvent {
        MotionEvent {
            from,
            to,
            span: Span::new(start, end),
        }
    }

    pub fn is_wait(&self) -> bool {
        self.from == self.to
    }

    pub fn start(&self) -> Time {
        self.span.start
    }

    pub fn end(&self) -> Time {
        self.span.end
    }

    pub fn interval(&self) -> TimeInterval {
        self.span.to_interval()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalPlan {
    pub agent: AgentId,
    pub events: Vec<MotionEvent>,
}

impl TemporalPlan {
    pub fn new(agent: AgentId, events: Vec<MotionEvent>) -> TemporalPlan {
        TemporalPlan { agent, events }
    }

    pub fn empty(agent: AgentId) -> TemporalPlan {
        TemporalPlan::new(agent, Vec::new())
    }

    /// End of the last event; zero for an empty plan.
    pub fn makespan(&self) -> Time {
        self.events.last().map_or(Time::ZERO, MotionEvent::end)
    }

    /// Vertex sequence visited by the plan, waits collapsed.
    pub fn vertices(&self, start: VertexId) -> Vec<VertexId> {
        let mut out = vec![start];
        for e in self.events.iter().filter(|e| !e.is_wait()) {
            out.push(e.to);
        }
        out
    }

    /// Fuses consecutive waits at the same vertex into one event.
    pub fn merge_waits(&mut self) {
        let mut merged: Vec<MotionEvent> = Vec::with_capacity(self.events.len());
        for e in self.events.drain(..) {
            if let Some(last) = merged.last_mut() {
                if last.is_wait() && e.is_wait() && last.to == e.from && last.end() == e.start() {
                    last.span.end = e.end();
                    continue;
                }
            }
            merged.push(e);
        }
        self.events = merged;
    }
}

pub fn individual_makespan(plan: &TemporalPlan) -> f64 {
    plan.makespan().as_secs()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Solution {
    pub plans: Vec<TemporalPlan>,
}

impl Solution {
    pub fn new(plans: Vec<TemporalPlan>) -> Solution {
        Solution { plans }
    }

    pub fn makespan(&self) -> Time {
        self.plans
            .iter()
            .map(TemporalPlan::makespan)
            .max()
            .unwrap_or(Time::ZERO)
    }

    pub fn plan(&self, a: AgentId) -> Option<&TemporalPlan> {
        self.plans.iter().find(|p| p.agent == a)
    }
}

pub fn overall_makespan(solution: &Solution) -> f64 {
    solution.makespan().as_secs()
}

/// Checks the four well-formedness rules: contiguity, strictly increasing
/// times, edge membership and move durations, plus start/goal anchoring.
pub fn check_plan(instance: &Instance, plan: &TemporalPlan, require_goal: bool) -> Result<(), PlanError> {
    let agent = plan.agent;
    let mut at = instance.start(agent);
    let mut now = Time::ZERO;
    for (index, e) in plan.events.iter().enumerate() {
        if index == 0 && (e.from != at || e.start() != Time::ZERO) {
            return Err(PlanError::BadStart { agent });
        }
        if e.from != at || e.start() != now {
            return Err(PlanError::Discontinuous { agent, index });
        }
        if e.end() <= e.start() {
            return Err(PlanError::EmptyEvent { agent, index });
        }
        if !e.is_wait() {
            let expected = instance
                .traversal_time(agent, e.from, e.to)
                .map_err(|_| PlanError::NotAnEdge { agent, index })?;
            if e.end() - e.start() != expected {
                return Err(PlanError::WrongDuration { agent, index });
            }
        }
        at = e.to;
        now = e.end();
    }
    if require_goal && at != instance.goal(agent) {
        return Err(PlanError::BadGoal { agent });
    }
    Ok(())
}

/// Checks every agent has exactly one well-formed plan ending at its goal.
pub fn check_solution(instance: &Instance, solution: &Solution) -> Result<(), PlanError> {
    for agent in 0..instance.num_agents() {
        let plan = solution.plan(agent).ok_or(PlanError::MissingPlan { agent })?;
        check_plan(instance, plan, true)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Vertices 0:(0,1) 1:(0,2) 2:(1,2), edges {0,1} and {0,2}.
    fn small() -> Instance {
        let mut g = Graph::new(vec![
            Point2D::new(0.0, 1.0),
            Point2D::new(0.0, 2.0),
            Point2D::new(1.0, 2.0),
        ]);
        g.add_edge(0, 1).unwrap();
        g.add_edge(0, 2).unwrap();
        Instance::new(
            g,
            vec![Agent::new(1.0, 0.2), Agent::new(2.0, 0.2)],
            vec![0, 1],
            vec![1, 0],
        )
        .unwrap()
    }

    fn t(x: f64) -> Time {
        Time::from_secs(x)
    }

    #[test]
    fn traversal_duration_examples() {
        let inst = small();
        assert_eq!(inst.traversal_duration(0, 0, 1).unwrap(), 1.0);
        assert_eq!(inst.traversal_duration(0, 0, 2).unwrap(), quantize(2f64.sqrt()));
        assert_eq!(inst.traversal_duration(1, 0, 1).unwrap(), 0.5);
        assert_eq!(inst.traversal_duration(0, 1, 1).unwrap(), 0.0);
        assert_eq!(inst.traversal_duration(0, 1, 2), Err(ModelError::InvalidEdge(1, 2)));
    }

    #[test]
    fn makespan_examples() {
        let p = TemporalPlan::new(0, vec![MotionEvent::new(0, 0, t(0.0), t(1.5)), MotionEvent::new(0, 1, t(1.5), t(2.5))]);
        assert_eq!(individual_makespan(&p), 2.5);
        assert_eq!(individual_makespan(&TemporalPlan::empty(0)), 0.0);
        let single = TemporalPlan::new(0, vec![MotionEvent::new(0, 1, t(0.0), t(1.0))]);
        assert_eq!(individual_makespan(&single), 1.0);

        let ends = |x: f64, a: usize| TemporalPlan::new(a, vec![MotionEvent::new(0, 0, t(0.0), t(x))]);
        let sol = Solution::new(vec![ends(2.0, 0), ends(3.5, 1), ends(1.0, 2)]);
        assert_eq!(overall_makespan(&sol), 3.5);
        assert_eq!(overall_makespan(&Solution::new(vec![single.clone()])), 1.0);
        assert_eq!(
            overall_makespan(&Solution::new(vec![TemporalPlan::empty(0), TemporalPlan::empty(1)])),
            0.0
        );
    }

    #[test]
    fn discretize_sets_unit_durations_and_is_idempotent() {
        let inst = small();
        let unit = discretize(&inst);
        for (u, v) in inst.graph().edges() {
            for a in 0..inst.num_agents() {
                assert_eq!(unit.traversal_duration(a, u, v).unwrap(), 1.0);
            }
        }
        assert_eq!(discretize(&unit), unit);
    }

    #[test]
    fn instance_invariants_are_enforced() {
        let g = small().graph().clone();
        let a = vec![Agent::new(1.0, 0.2); 2];
        assert!(matches!(
            Instance::new(g.clone(), a.clone(), vec![0, 0], vec![1, 2]),
            Err(ModelError::NotInjective { role: "start", .. })
        ));
        assert!(matches!(
            Instance::new(g.clone(), a.clone(), vec![0, 1], vec![2, 2]),
            Err(ModelError::NotInjective { role: "goal", .. })
        ));
        assert!(matches!(
            Instance::new(g.clone(), vec![Agent::new(0.0, 0.2); 2], vec![0, 1], vec![1, 2]),
            Err(ModelError::InvalidAgent { agent: 0 })
        ));
        assert!(matches!(
            Instance::new(g, a, vec![0, 9], vec![1, 2]),
            Err(ModelError::UnknownVertex(9))
        ));
        let mut g = Graph::new(vec![Point2D::new(0.0, 0.0)]);
        assert_eq!(g.add_edge(0, 0), Err(ModelError::SelfLoop(0)));
    }

    #[test]
    fn plan_checker_rules() {
        let inst = small();
        let good = TemporalPlan::new(0, vec![MotionEvent::new(0, 0, t(0.0), t(0.5)), MotionEvent::new(0, 1, t(0.5), t(1.5))]);
        assert_eq!(check_plan(&inst, &good, true), Ok(()));

        let gap = TemporalPlan::new(0, vec![MotionEvent::new(0, 0, t(0.0), t(0.5)), MotionEvent::new(0, 1, t(0.6), t(1.6))]);
        assert_eq!(check_plan(&inst, &gap, true), Err(PlanError::Discontinuous { agent: 0, index: 1 }));

        let slow = TemporalPlan::new(0, vec![MotionEvent::new(0, 1, t(0.0), t(1.2))]);
        assert_eq!(check_plan(&inst, &slow, true), Err(PlanError::WrongDuration { agent: 0, index: 0 }));

        let teleport = TemporalPlan::new(1, vec![MotionEvent::new(1, 2, t(0.0), t(1.0))]);
        assert_eq!(check_plan(&inst, &teleport, false), Err(PlanError::NotAnEdge { agent: 1, index: 0 }));

        let zero = TemporalPlan::new(0, vec![MotionEvent::new(0, 0, t(0.0), t(0.0))]);
        assert_eq!(check_plan(&inst, &zero, true), Err(PlanError::EmptyEvent { agent: 0, index: 0 }));

        let short = TemporalPlan::new(0, vec![MotionEvent::new(0, 2, t(0.0), Time::from_secs(2f64.sqrt()))]);
        assert_eq!(check_plan(&inst, &short, true), Err(PlanError::BadGoal { agent: 0 }));
    }

    #[test]
    fn merge_waits_fuses_adjacent_waits_only() {
        let mut p = TemporalPlan::new(
            0,
            vec![
                MotionEvent::new(0, 0, t(0.0), t(0.5)),
                MotionEvent::new(0, 0, t(0.5), t(0.7)),
                MotionEvent::new(0, 1, t(0.7), t(1.7)),
            ],
        );
        p.merge_waits();
        assert_eq!(p.events.len(), 2);
        assert_eq!(p.events[0], MotionEvent::new(0, 0, t(0.0), t(0.7)));
    }
}
