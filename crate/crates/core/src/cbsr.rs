//! Conflict-based search with continuous time.
//!
//! The high level explores a constraint tree best-first by overall makespan.
//! Each node carries per-agent plans that are optimal under the node's
//! constraints. When the plans collide, one collision is picked (cardinal
//! ones first) and the node branches: each child forbids one of the two
//! colliding agents from its location during the overlap of the two events,
//! and only that agent is replanned.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use log::debug;

use crate::lowlevel::{shortest_temporal_plan, Constraint};
use crate::model::{Instance, Solution, TemporalPlan, Time};
use crate::status::{deadline, expired, SolveStatus, DEFAULT_TIMEOUT};
use crate::validation::{collisions_between, pad_to_makespan, Collision, CollisionSide};

#[derive(Debug, Clone)]
pub struct CbsOptions {
    pub timeout: Option<Duration>,
}

impl Default for CbsOptions {
    fn default() -> Self {
        CbsOptions {
            timeout: Some(DEFAULT_TIMEOUT),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CbsStats {
    pub expanded: usize,
    pub generated: usize,
    pub runtime_seconds: f64,
    /// Makespan of every node taken from the open list, in order.
    pub popped_makespans: Vec<Time>,
}

#[derive(Debug, Clone)]
pub struct CbsResult {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    pub stats: CbsStats,
}

impl CbsResult {
    pub fn makespan(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.makespan().as_secs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CTNode {
    pub constraints: Vec<Constraint>,
    pub plans: Solution,
    pub mu: Time,
}

impl CTNode {
    fn with_plan(&self, constraint: Constraint, plan: TemporalPlan) -> CTNode {
        let mut constraints = self.constraints.clone();
        constraints.push(constraint);
        let mut plans = self.plans.clone();
        plans.plans[constraint.agent] = plan;
        let mu = plans.makespan();
        CTNode { constraints, plans, mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cardinality {
    Cardinal,
    SemiCardinal,
    NonCardinal,
}

/// The constraint that forbids `side` during `overlap`.
pub fn constraint_for(side: &CollisionSide, collision: &Collision) -> Constraint {
    Constraint::new(side.agent, side.from, side.to, collision.overlap())
}

/// Replans agents under one extra constraint, remembering the results so the
/// branching step can reuse them.
struct Replanner<'a> {
    instance: &'a Instance,
    cache: HashMap<Constraint, Option<TemporalPlan>>,
}

impl Replanner<'_> {
    fn plan(&mut self, node: &CTNode, extra: Constraint) -> Option<TemporalPlan> {
        if let Some(p) = self.cache.get(&extra) {
            return p.clone();
        }
        let mut constraints = node.constraints.clone();
        constraints.push(extra);
        let plan = shortest_temporal_plan(self.instance, extra.agent, &constraints).ok();
        self.cache.insert(extra, plan.clone());
        plan
    }

    /// Whether constraining the side makes the agent strictly slower (or
    /// stuck).
    fn increases(&mut self, node: &CTNode, extra: Constraint) -> bool {
        let before = node.plans.plans[extra.agent].makespan();
        self.plan(node, extra).is_none_or(|p| p.makespan() > before)
    }

    fn classify(&mut self, node: &CTNode, c: &Collision) -> Cardinality {
        let a = self.increases(node, constraint_for(&c.first, c));
        let b = self.increases(node, constraint_for(&c.second, c));
        match (a, b) {
            (true, true) => Cardinality::Cardinal,
            (false, false) => Cardinality::NonCardinal,
            _ => Cardinality::SemiCardinal,
        }
    }
}

pub fn classify_conflict(instance: &Instance, node: &CTNode, collision: &Collision) -> Cardinality {
    Replanner {
        instance,
        cache: HashMap::new(),
    }
    .classify(node, collision)
}

fn node_collisions(instance: &Instance, node: &CTNode) -> Vec<Collision> {
    collisions_between(instance, &pad_to_makespan(instance, &node.plans).plans)
}

/// The root node: every agent on its unconstrained optimal plan. `None` if
/// some agent cannot reach its goal at all.
pub fn root_node(instance: &Instance) -> Option<CTNode> {
    let plans = (0..instance.num_agents())
        .map(|a| shortest_temporal_plan(instance, a, &[]).ok())
        .collect::<Option<Vec<_>>>()?;
    let plans = Solution::new(plans);
    let mu = plans.makespan();
    Some(CTNode {
        constraints: Vec::new(),
        plans,
        mu,
    })
}

pub fn solve_cbsr(instance: &Instance, options: &CbsOptions) -> CbsResult {
    let started = Instant::now();
    let deadline = deadline(started, options.timeout);
    let mut stats = CbsStats::default();
    let finish = |status, solution, mut stats: CbsStats| {
        stats.runtime_seconds = started.elapsed().as_secs_f64();
        CbsResult {
            status,
            solution,
            stats,
        }
    };

    let Some(root) = root_node(instance) else {
        return finish(SolveStatus::Infeasible, None, stats);
    };
    let mut nodes = vec![root];
    let mut open = BinaryHeap::new();
    let root_collisions = node_collisions(instance, &nodes[0]).len();
    open.push(Reverse((nodes[0].mu, root_collisions, 0usize)));
    stats.generated = 1;

    while let Some(Reverse((mu, _, id))) = open.pop() {
        if expired(deadline) {
            return finish(SolveStatus::Timeout, None, stats);
        }
        stats.expanded += 1;
        stats.popped_makespans.push(mu);
        let node = std::mem::replace(&mut nodes[id], CTNode {
            constraints: Vec::new(),
            plans: Solution::default(),
            mu,
        });
        let collisions = node_collisions(instance, &node);
        if collisions.is_empty() {
            debug!("cbsr: solved with makespan {} after {} expansions", node.mu, stats.expanded);
            return finish(SolveStatus::Solved, Some(node.plans), stats);
        }

        let mut replanner = Replanner {
            instance,
            cache: HashMap::new(),
        };
        let mut order: Vec<&Collision> = collisions.iter().collect();
        order.sort_by_key(|c| (c.overlap().start, c.first.agent, c.second.agent, **c));
        let mut chosen: Option<(Cardinality, &Collision)> = None;
        for c in order {
            let kind = replanner.classify(&node, c);
            if chosen.is_none_or(|(best, _)| kind < best) {
                chosen = Some((kind, c));
            }
            if kind == Cardinality::Cardinal || expired(deadline) {
                break;
            }
        }
        let (_, collision) = chosen.expect("at least one collision");

        for side in [&collision.first, &collision.second] {
            let constraint = constraint_for(side, collision);
            if let Some(plan) = replanner.plan(&node, constraint) {
                let child = node.with_plan(constraint, plan);
                let n_collisions = node_collisions(instance, &child).len();
                open.push(Reverse((child.mu, n_collisions, nodes.len())));
                nodes.push(child);
                stats.generated += 1;
            }
        }
    }
    finish(SolveStatus::Infeasible, None, stats)
}
