//! Lazy SAT-based solving with continuous time.
//!
//! For a candidate makespan `mu`, every agent gets a time-expanded decision
//! graph: nodes are `(vertex, time)` pairs reachable by moving along edges or
//! by waiting until the end of a recorded conflict. Propositional variables
//! stand for "the agent is at this node" and for each action leaving a node.
//! The formula only says that every agent follows one path from its start to
//! its goal; it knows nothing about other agents. Collisions found in a model
//! are forbidden one pair of actions at a time and the formula is solved
//! again. When it becomes unsatisfiable the makespan grows to the next time
//! at which some agent could arrive anywhere.


use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use log::{debug, warn};
use mapfr_sat::{Lit, Model, SolveResult, Solver, Var};
use thiserror::Error;

use crate::lowlevel::{unconstrained_duration, Constraint};
use crate::model::{AgentId, Instance, MotionEvent, Solution, Span, TemporalPlan, Time, VertexId};
use crate::status::{deadline, expired, SolveStatus, DEFAULT_TIMEOUT};
use crate::validation::{collisions_between, pad_to_makespan, Collision, CollisionSide};

pub use crate::model::quantize;

/// Identity of a decision variable. Times are canonical ticks, so keys built
/// from equal sums of durations coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    /// The agent is at `vertex` at `time`.
    At { agent: AgentId, vertex: VertexId, time: Time },
    /// The agent starts traversing `{from, to}` at `time`.
    Move { agent: AgentId, from: VertexId, to: VertexId, time: Time },
    /// The agent waits at `vertex` from `time` until `until`.
    Wait { agent: AgentId, vertex: VertexId, time: Time, until: Time },
    /// The agent reaches its goal `vertex` at `time` and stays there.
    Park { agent: AgentId, vertex: VertexId, time: Time },
}

impl VarKey {
    pub fn agent(&self) -> AgentId {
        match *self {
            VarKey::At { agent, .. } | VarKey::Move { agent, .. } | VarKey::Wait { agent, .. } | VarKey::Park { agent, .. } => {
                agent
            }
        }
    }

    pub fn time(&self) -> Time {
        match *self {
            VarKey::At { time, .. } | VarKey::Move { time, .. } | VarKey::Wait { time, .. } | VarKey::Park { time, .. } => time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionVar {
    pub key: VarKey,
    pub sat_id: Var,
}

/// Bijection between variable keys and SAT variable ids. Ids are dense and
/// assigned in creation order; keys are never removed, so an id keeps its
/// meaning for the whole run.
#[derive(Debug, Clone, Default)]
pub struct VarRegistry {
    keys: Vec<VarKey>,
    ids: HashMap<VarKey, Var>,
}

impl VarRegistry {
    pub fn new() -> VarRegistry {
        VarRegistry::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &VarKey) -> Option<Var> {
        self.ids.get(key).copied()
    }

    pub fn key(&self, var: Var) -> VarKey {
        self.keys[var.id() as usize - 1]
    }

    pub fn contains(&self, key: &VarKey) -> bool {
        self.ids.contains_key(key)
    }

    /// The id of `key`, allocating the next one if it is new.
    pub fn intern(&mut self, key: VarKey) -> Var {
        if let Some(&v) = self.ids.get(&key) {
            return v;
        }
        self.keys.push(key);
        let v = Var::new(self.keys.len() as u32);
        self.ids.insert(key, v);
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = DecisionVar> + '_ {
        self.keys.iter().enumerate().map(|(i, &key)| DecisionVar {
            key,
            sat_id: Var::new(i as u32 + 1),
        })
    }

    /// Smallest time above `mu` of any vertex variable.
    pub fn next_makespan(&self, mu: Time) -> Option<Time> {
        self.keys
            .iter()
            .filter_map(|k| match *k {
                VarKey::At { time, .. } if time > mu => Some(time),
                _ => None,
            })
            .min()
    }
}

/// Every constraint recorded so far, for all agents. Only ever grows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConflictSet {
    set: BTreeSet<Constraint>,
    ends: HashMap<(AgentId, VertexId), BTreeSet<Time>>,
}

impl ConflictSet {
    pub fn new() -> ConflictSet {
        ConflictSet::default()
    }

    pub fn insert(&mut self, c: Constraint) -> bool {
        if !self.set.insert(c) {
            return false;
        }
        self.ends.entry((c.agent, c.from)).or_default().insert(c.span.end);
        if c.to != c.from {
            self.ends.entry((c.agent, c.to)).or_default().insert(c.span.end);
        }
        true
    }

    /// End times of the agent's constraints on `vertex` or an edge at it.
    pub fn ends_at(&self, agent: AgentId, vertex: VertexId) -> Option<&BTreeSet<Time>> {
        self.ends.get(&(agent, vertex))
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.set.iter()
    }
}

type Node = (VertexId, Time);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub var: Var,
    pub key: VarKey,
    pub from: Node,
    /// `None` for parking, which ends the plan.
    pub to: Option<Node>,
}

/// One agent's decision graph for a fixed makespan.
#[derive(Debug, Clone, Default)]
pub struct AgentDecisions {
    pub agent: AgentId,
    pub start: VertexId,
    pub goal: VertexId,
    /// Every node, with whether it lies within the makespan and was expanded.
    pub nodes: BTreeMap<Node, bool>,
    pub outgoing: BTreeMap<Node, Vec<Action>>,
    pub incoming: BTreeMap<Node, Vec<Action>>,
}

impl AgentDecisions {
    fn push(&mut self, action: Action) {
        self.outgoing.entry(action.from).or_default().push(action);
        if let Some(to) = action.to {
            self.incoming.entry(to).or_default().push(action);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Decisions {
    pub mu: Time,
    pub agents: Vec<AgentDecisions>,
}

/// Builds (or extends) the decision variables for makespan `mu`.
///
/// Per agent, nodes are expanded in time order from `(start, 0)`. An
/// expanded node `(u, t)` spawns a move to every neighbour and, for every
/// recorded conflict of the agent on `u` or an edge at `u` ending after `t`,
/// a node at `u` at that end time. Nodes later than `mu` are kept but not
/// expanded. Afterwards each expanded node gets a wait action to the next
/// node at the same vertex (if that is within `mu`), and expanded goal nodes
/// get a park action.
pub fn generate_decisions(instance: &Instance, conflicts: &ConflictSet, mu: Time, registry: &mut VarRegistry) -> Decisions {
    let g = instance.graph();
    let mut agents = Vec::with_capacity(instance.num_agents());
    for agent in 0..instance.num_agents() {
        let start = instance.start(agent);
        let goal = instance.goal(agent);
        let mut d = AgentDecisions {
            agent,
            start,
            goal,
            ..Default::default()
        };
        let mut queue = BTreeSet::new();
        let add_node = |d: &mut AgentDecisions, queue: &mut BTreeSet<(Time, VertexId)>, registry: &mut VarRegistry, (v, t): Node| {
            if let std::collections::btree_map::Entry::Vacant(e) = d.nodes.entry((v, t)) {
                e.insert(false);
                registry.intern(VarKey::At { agent, vertex: v, time: t });
                queue.insert((t, v));
            }
        };
        add_node(&mut d, &mut queue, registry, (start, Time::ZERO));
        while let Some((t, u)) = queue.pop_first() {
            if t > mu {
                continue;
            }
            d.nodes.insert((u, t), true);
            for &v in g.neighbors(u) {
                let arrive = t + instance.traversal_time(agent, u, v).expect("graph edge");
                let key = VarKey::Move { agent, from: u, to: v, time: t };
                let var = registry.intern(key);
                add_node(&mut d, &mut queue, registry, (v, arrive));
                d.push(Action {
                    var,
                    key,
                    from: (u, t),
                    to: Some((v, arrive)),
                });
            }
            if let Some(ts) = conflicts.ends_at(agent, u) {
                for &end in ts.range((std::ops::Bound::Excluded(t), std::ops::Bound::Unbounded)) {
                    add_node(&mut d, &mut queue, registry, (u, end));
                }
            }
        }
        let expanded: Vec<Node> = d.nodes.iter().filter(|(_, &e)| e).map(|(&n, _)| n).collect();
        for &(u, t) in &expanded {
            let next = d
                .nodes
                .range((u, t + Time::from_ticks(1))..(u + 1, Time::ZERO))
                .next()
                .map(|(&n, _)| n);
            if let Some((_, until)) = next.filter(|&(_, until)| until <= mu) {
                let key = VarKey::Wait { agent, vertex: u, time: t, until };
                let var = registry.intern(key);
                d.push(Action {
                    var,
                    key,
                    from: (u, t),
                    to: Some((u, until)),
                });
            }
            if u == goal {
                let key = VarKey::Park { agent, vertex: u, time: t };
                let var = registry.intern(key);
                d.push(Action {
                    var,
                    key,
                    from: (u, t),
                    to: None,
                });
            }
        }
        agents.push(d);
    }
    Decisions { mu, agents }
}

fn at(registry: &VarRegistry, agent: AgentId, (vertex, time): Node) -> Lit {
    registry
        .get(&VarKey::At { agent, vertex, time })
        .expect("node variable exists")
        .positive()
}

fn normalized(mut clause: Vec<Lit>) -> Vec<Lit> {
    clause.sort_unstable();
    clause.dedup();
    clause
}

/// The single-agent path clauses for all agents, in a deterministic order:
/// start unit; for each expanded node "at node implies one outgoing action"
/// plus pairwise at-most-one over those actions; each action implies both
/// its source and its destination node; each non-start node within the
/// makespan implies one incoming action; nodes beyond the makespan are false;
/// and some park action must be taken.
pub fn structural_clauses(decisions: &Decisions, registry: &VarRegistry) -> Vec<Vec<Lit>> {
    let mut out = Vec::new();
    for d in &decisions.agents {
        let start = (d.start, Time::ZERO);
        out.push(vec![at(registry, d.agent, start)]);
        for (&node, &expanded) in &d.nodes {
            let x = at(registry, d.agent, node);
            if !expanded {
                out.push(vec![!x]);
                continue;
            }
            let actions: Vec<Lit> = d
                .outgoing
                .get(&node)
                .map_or(Vec::new(), |a| a.iter().map(|a| a.var.positive()).collect());
            let mut leave = vec![!x];
            leave.extend(&actions);
            out.push(normalized(leave));
            for i in 0..actions.len() {
                for j in i + 1..actions.len() {
                    out.push(normalized(vec![!actions[i], !actions[j]]));
                }
            }
            if node != start {
                let mut support = vec![!x];
                if let Some(inc) = d.incoming.get(&node) {
                    support.extend(inc.iter().map(|a| a.var.positive()));
                }
                out.push(normalized(support));
            }
        }
        for actions in d.outgoing.values() {
            for a in actions {
                out.push(normalized(vec![!a.var.positive(), at(registry, d.agent, a.from)]));
                if let Some(to) = a.to {
                    out.push(normalized(vec![!a.var.positive(), at(registry, d.agent, to)]));
                }
            }
        }
        let parks: Vec<Lit> = d
            .outgoing
            .values()
            .flatten()
            .filter(|a| matches!(a.key, VarKey::Park { .. }))
            .map(|a| a.var.positive())
            .collect();
        out.push(normalized(parks));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augment {
    /// The previous clauses are all still present; only these many were added.
    Incremental(usize),
    /// The structure changed shape (a wait now ends earlier than before), so
    /// the solver was rebuilt from the new structure plus all refinements.
    Rebuilt,
}

/// The current propositional formula and the solver holding it.
pub struct Formula {
    solver: Solver,
    /// Sorted and deduplicated.
    structural: Vec<Vec<Lit>>,
    refinements: Vec<[Lit; 2]>,
    refinement_set: HashSet<[Lit; 2]>,
    pub rebuilds: usize,
}

impl Formula {
    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn num_clauses(&self) -> usize {
        self.solver.num_clauses()
    }

    pub fn num_vars(&self) -> usize {
        self.solver.num_vars()
    }

    fn grow(&mut self, registry: &VarRegistry) {
        while self.solver.num_vars() < registry.len() {
            self.solver.new_var();
        }
    }

    fn load(&mut self, clauses: &[Vec<Lit>]) {
        for c in clauses {
            self.solver.add_clause(c).expect("variables are allocated");
        }
    }

    /// Forbids `y` and `z` together; false if that clause already exists.
    pub fn refine(&mut self, y: Var, z: Var) -> bool {
        let mut pair = [y.negative(), z.negative()];
        pair.sort_unstable();
        if !self.refinement_set.insert(pair) {
            return false;
        }
        self.refinements.push(pair);
        self.solver.add_clause(&pair).expect("variables are allocated");
        true
    }

    pub fn refinements(&self) -> &[[Lit; 2]] {
        &self.refinements
    }
}

/// A fresh formula for `decisions`.
pub fn encode_basic(registry: &VarRegistry, decisions: &Decisions) -> Formula {
    let clauses = structural_clauses(decisions, registry);
    let mut f = Formula {
        solver: Solver::new(),
        structural: Vec::new(),
        refinements: Vec::new(),
        refinement_set: HashSet::new(),
        rebuilds: 0,
    };
    f.grow(registry);
    f.load(&clauses);
    f.structural = sorted(clauses);
    f
}

/// Brings `formula` up to date with `decisions`, adding only the new clauses
/// when the old structure is a subset of the new one.
pub fn augment_basic(registry: &VarRegistry, formula: &mut Formula, decisions: &Decisions) -> Augment {
    let fresh = sorted(structural_clauses(decisions, registry));
    formula.grow(registry);
    let mut added = Vec::new();
    let mut old = formula.structural.iter().peekable();
    for c in &fresh {
        while old.next_if(|o| *o < c).is_some() {}
        if old.next_if(|o| *o == c).is_none() {
            added.push(c);
        }
    }
    if formula.structural.len() + added.len() == fresh.len() {
        for c in &added {
            formula.solver.add_clause(c).expect("variables are allocated");
        }
        let n = added.len();
        formula.structural = fresh;
        return Augment::Incremental(n);
    }
    let mut solver = Solver::new();
    for _ in 0..registry.len() {
        solver.new_var();
    }
    formula.solver = solver;
    formula.load(&fresh);
    for pair in &formula.refinements {
        formula.solver.add_clause(pair).expect("variables are allocated");
    }
    formula.structural = fresh;
    formula.rebuilds += 1;
    Augment::Rebuilt
}

fn sorted(mut clauses: Vec<Vec<Lit>>) -> Vec<Vec<Lit>> {
    clauses.sort_unstable();
    clauses.dedup();
    clauses
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("agent {agent}: {count} true actions leave node ({vertex}, {time})")]
    Branching {
        agent: AgentId,
        vertex: VertexId,
        time: Time,
        count: usize,
    },
}

/// Reads one plan per agent off `model` by following the true action out of
/// each node from the start until a park action.
pub fn extract_solution(model: &Model, decisions: &Decisions) -> Result<Solution, ExtractError> {
    let mut plans = Vec::with_capacity(decisions.agents.len());
    for d in &decisions.agents {
        let mut events = Vec::new();
        let mut node = (d.start, Time::ZERO);
        loop {
            let chosen: Vec<&Action> = d
                .outgoing
                .get(&node)
                .map_or(Vec::new(), |a| a.iter().filter(|a| model.value(a.var)).collect());
            if chosen.len() != 1 {
                return Err(ExtractError::Branching {
                    agent: d.agent,
                    vertex: node.0,
                    time: node.1,
                    count: chosen.len(),
                });
            }
            let Some(to) = chosen[0].to else { break };
            events.push(MotionEvent::new(node.0, to.0, node.1, to.1));
            node = to;
        }
        plans.push(TemporalPlan::new(d.agent, events));
    }
    Ok(Solution::new(plans))
}

/// The variable of the action behind one side of a collision in an
/// unmerged extracted solution.
fn side_key(instance: &Instance, solution: &Solution, side: &CollisionSide) -> VarKey {
    let plan = &solution.plans[side.agent];
    let agent = side.agent;
    if side.is_wait() && side.span.start == plan.makespan() && side.from == instance.goal(agent) {
        VarKey::Park {
            agent,
            vertex: side.from,
            time: side.span.start,
        }
    } else if side.is_wait() {
        VarKey::Wait {
            agent,
            vertex: side.from,
            time: side.span.start,
            until: side.span.end,
        }
    } else {
        VarKey::Move {
            agent,
            from: side.from,
            to: side.to,
            time: side.span.start,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmtOptions {
    pub timeout: Option<Duration>,
    /// Write the formula before every SAT call to `<prefix>.<call>.cnf`.
    pub dump_cnf: Option<PathBuf>,
    /// Keep a [`TraceEntry`] per SAT call.
    pub trace: bool,
    /// After a collision between two locations, forbid every overlapping
    /// pair of actions on them rather than just the observed pair.
    pub generalize: bool,
}

impl Default for SmtOptions {
    fn default() -> Self {
        SmtOptions {
            timeout: Some(DEFAULT_TIMEOUT),
            dump_cnf: None,
            trace: false,
            generalize: true,
        }
    }
}

/// Snapshot taken at one SAT call.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub mu: Time,
    pub num_vars: usize,
    pub num_clauses: usize,
    pub num_conflicts: usize,
    /// The model, if the call was satisfiable.
    pub model: Option<Model>,
    /// Refinement clauses added in response to this call's model.
    pub refinements: Vec<Vec<Lit>>,
}

#[derive(Debug, Clone, Default)]
pub struct SmtStats {
    pub sat_calls: usize,
    pub refinements: usize,
    /// Every makespan tried, in order.
    pub makespans: Vec<Time>,
    pub num_vars: usize,
    pub num_clauses: usize,
    pub num_conflicts: usize,
    pub rebuilds: usize,
    pub runtime_seconds: f64,
    pub trace: Vec<TraceEntry>,
}

impl SmtStats {
    /// Iterations of the refinement loop, counting every SAT call.
    pub fn iterations(&self) -> usize {
        self.sat_calls
    }
}

#[derive(Debug, Clone)]
pub struct SmtResult {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    pub stats: SmtStats,
}

impl SmtResult {
    pub fn makespan(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.makespan().as_secs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixedOutcome {
    Solved(Solution),
    /// No collision-free solution of makespan `mu` exists in the current
    /// model; `next` is the next makespan to try, if any.
    Unsat { next: Option<Time> },
    Timeout,
}

/// Where an action puts its agent: the agent and the segment it occupies,
/// with the edge endpoints in increasing order.
type Location = (AgentId, VertexId, VertexId);

/// The event an action variable stands for. Parking occupies the goal from
/// its time on, for as long as anyone else is still moving.
#[derive(Debug, Clone, Copy)]
struct Occupancy {
    var: Var,
    agent: AgentId,
    from: VertexId,
    to: VertexId,
    span: Span,
    park: bool,
}

impl Occupancy {
    fn of(instance: &Instance, var: Var, key: &VarKey) -> Option<Occupancy> {
        let (agent, from, to, span, park) = match *key {
            VarKey::At { .. } => return None,
            VarKey::Move { agent, from, to, time } => {
                let d = instance.traversal_time(agent, from, to).expect("graph edge");
                (agent, from, to, Span::new(time, time + d), false)
            }
            VarKey::Wait {
                agent,
                vertex,
                time,
                until,
            } => (agent, vertex, vertex, Span::new(time, until), false),
            VarKey::Park { agent, vertex, time } => (agent, vertex, vertex, Span::new(time, Time::MAX), true),
        };
        Some(Occupancy {
            var,
            agent,
            from,
            to,
            span,
            park,
        })
    }

    fn location(&self) -> Location {
        (self.agent, self.from.min(self.to), self.from.max(self.to))
    }
}

/// Mutable state carried across makespans.
pub struct SmtState<'a> {
    pub instance: &'a Instance,
    pub registry: VarRegistry,
    pub conflicts: ConflictSet,
    refined: Vec<(Var, Var)>,
    /// Location pairs that have collided at least once, both ways round.
    hot: HashMap<Location, Vec<Location>>,
    /// Collided location pairs not yet matched against the indexed actions.
    pending: Vec<(Location, Location)>,
    by_location: HashMap<Location, Vec<Occupancy>>,
    indexed: usize,
    forbidden: HashSet<(Var, Var)>,
    pub stats: SmtStats,
    options: SmtOptions,
    deadline: Option<Instant>,
}

impl<'a> SmtState<'a> {
    pub fn new(instance: &'a Instance, options: SmtOptions) -> SmtState<'a> {
        let deadline = deadline(Instant::now(), options.timeout);
        SmtState {
            instance,
            registry: VarRegistry::new(),
            conflicts: ConflictSet::new(),
            refined: Vec::new(),
            hot: HashMap::new(),
            pending: Vec::new(),
            by_location: HashMap::new(),
            indexed: 0,
            forbidden: HashSet::new(),
            stats: SmtStats::default(),
            options,
            deadline,
        }
    }

    fn dump(&self, formula: &Formula) {
        let Some(prefix) = &self.options.dump_cnf else { return };
        let path = PathBuf::from(format!("{}.{}.cnf", prefix.display(), self.stats.sat_calls));
        let written = File::create(&path).and_then(|f| formula.solver.write_dimacs(BufWriter::new(f)));
        if let Err(e) = written {
            warn!("cannot write {}: {e}", path.display());
        }
    }

    fn record(&mut self, formula: &Formula) {
        self.stats.num_vars = self.registry.len();
        self.stats.num_clauses = formula.num_clauses();
        self.stats.num_conflicts = self.conflicts.len();
        self.stats.rebuilds += formula.rebuilds;
    }

    fn refine(&mut self, formula: &mut Formula, y: Var, z: Var, trace_at: Option<usize>) {
        if formula.refine(y, z) {
            self.refined.push((y, z));
            self.stats.refinements += 1;
            if let Some(i) = trace_at {
                self.stats.trace[i].refinements.push(vec![y.negative(), z.negative()]);
            }
        }
    }

    /// Forbids every pair of actions on a collided location pair whose
    /// occupied times overlap. Each such pair collides exactly like the one
    /// that was observed, so no collision-free plan is excluded. The pair's
    /// overlap also joins the conflict set, as if the collision had been
    /// seen in a model. Returns whether the conflict set grew.
    fn generalize(&mut self, formula: &mut Formula, trace_at: Option<usize>) -> bool {
        if !self.options.generalize {
            return false;
        }
        let mut pairs = Vec::new();
        let overlapping = |y: &Occupancy, z: &Occupancy, pairs: &mut Vec<(Occupancy, Occupancy)>| {
            if !(y.park && z.park) && y.span.overlaps(&z.span) {
                pairs.push((*y, *z));
            }
        };
        for dv in self.registry.iter().skip(self.indexed) {
            let Some(y) = Occupancy::of(self.instance, dv.sat_id, &dv.key) else { continue };
            let here = y.location();
            for other in self.hot.get(&here).into_iter().flatten() {
                for z in self.by_location.get(other).into_iter().flatten() {
                    overlapping(&y, z, &mut pairs);
                }
            }
            self.by_location.entry(here).or_default().push(y);
        }
        self.indexed = self.registry.len();
        for (la, lb) in std::mem::take(&mut self.pending) {
            let partners = self.hot.entry(la).or_default();
            if partners.contains(&lb) {
                continue;
            }
            partners.push(lb);
            self.hot.entry(lb).or_default().push(la);
            let (Some(xs), Some(ys)) = (self.by_location.get(&la), self.by_location.get(&lb)) else {
                continue;
            };
            for y in xs {
                for z in ys {
                    overlapping(y, z, &mut pairs);
                }
            }
        }
        let before = self.conflicts.len();
        for (y, z) in pairs {
            let key = (y.var.min(z.var), y.var.max(z.var));
            if !self.forbidden.insert(key) {
                continue;
            }
            self.refine(formula, y.var, z.var, trace_at);
            let overlap = y.span.intersection(&z.span);
            for o in [y, z] {
                self.conflicts.insert(Constraint::new(o.agent, o.from, o.to, overlap));
            }
        }
        self.conflicts.len() > before
    }
}

/// Rebuilds the decisions for the current conflicts and brings the formula
/// up to date, until generalized refinement stops adding conflicts.
fn regenerate(state: &mut SmtState, formula: &mut Formula, mu: Time, trace_at: Option<usize>) -> Decisions {
    loop {
        let decisions = generate_decisions(state.instance, &state.conflicts, mu, &mut state.registry);
        if augment_basic(&state.registry, formula, &decisions) == Augment::Rebuilt {
            debug!("mu {mu}: formula rebuilt");
        }
        if !state.generalize(formula, trace_at) {
            return decisions;
        }
    }
}

/// Solves with makespan `mu` fixed, refining the formula until a model is
/// collision-free or the formula is unsatisfiable.
pub fn smt_cbs_fixed(state: &mut SmtState, mu: Time) -> FixedOutcome {
    let instance = state.instance;
    let mut decisions = generate_decisions(instance, &state.conflicts, mu, &mut state.registry);
    let mut formula = encode_basic(&state.registry, &decisions);
    for &(y, z) in &state.refined {
        formula.refine(y, z);
    }
    if state.generalize(&mut formula, None) {
        decisions = regenerate(state, &mut formula, mu, None);
    }
    loop {
        if expired(state.deadline) {
            state.record(&formula);
            return FixedOutcome::Timeout;
        }
        state.dump(&formula);
        state.stats.sat_calls += 1;
        let answer = formula.solver.solve_until(state.deadline);
        let trace_at = state.options.trace.then_some(state.stats.trace.len());
        if trace_at.is_some() {
            state.stats.trace.push(TraceEntry {
                mu,
                num_vars: state.registry.len(),
                num_clauses: formula.num_clauses(),
                num_conflicts: state.conflicts.len(),
                model: answer.as_ref().and_then(|a| a.model().cloned()),
                refinements: Vec::new(),
            });
        }
        let model = match answer {
            None => {
                state.record(&formula);
                return FixedOutcome::Timeout;
            }
            Some(SolveResult::Unsat) => {
                state.record(&formula);
                return FixedOutcome::Unsat {
                    next: state.registry.next_makespan(mu),
                };
            }
            Some(SolveResult::Sat(model)) => model,
        };
        let solution = extract_solution(&model, &decisions).expect("models of the path encoding are single paths");
        let collisions: Vec<Collision> = collisions_between(instance, &pad_to_makespan(instance, &solution).plans);
        if collisions.is_empty() {
            state.record(&formula);
            let mut solution = solution;
            for plan in &mut solution.plans {
                plan.merge_waits();
            }
            return FixedOutcome::Solved(solution);
        }
        debug!("mu {mu}: {} collisions", collisions.len());
        for c in &collisions {
            let y = side_key(instance, &solution, &c.first);
            let z = side_key(instance, &solution, &c.second);
            let vy = state.registry.get(&y).expect("model variable exists");
            let vz = state.registry.get(&z).expect("model variable exists");
            state.refine(&mut formula, vy, vz, trace_at);
            let loc = |v: Var, k: &VarKey| Occupancy::of(instance, v, k).expect("an action").location();
            state.pending.push((loc(vy, &y), loc(vz, &z)));
            for side in [&c.first, &c.second] {
                state.conflicts.insert(Constraint::new(side.agent, side.from, side.to, c.overlap()));
            }
        }
        decisions = regenerate(state, &mut formula, mu, trace_at);
    }
}

pub fn solve_smt_cbsr(instance: &Instance, options: &SmtOptions) -> SmtResult {
    let started = Instant::now();
    let mut state = SmtState::new(instance, options.clone());
    let finish = |status, solution, mut stats: SmtStats| {
        stats.runtime_seconds = started.elapsed().as_secs_f64();
        SmtResult {
            status,
            solution,
            stats,
        }
    };
    let mut mu = Time::ZERO;
    for a in 0..instance.num_agents() {
        match unconstrained_duration(instance, a) {
            Ok(d) => mu = mu.max(d),
            Err(_) => return finish(SolveStatus::Infeasible, None, state.stats),
        }
    }
    loop {
        state.stats.makespans.push(mu);
        match smt_cbs_fixed(&mut state, mu) {
            FixedOutcome::Solved(solution) => {
                debug!("smt-cbsr: solved with makespan {mu} after {} SAT calls", state.stats.sat_calls);
                return finish(SolveStatus::Solved, Some(solution), state.stats);
            }
            FixedOutcome::Timeout => return finish(SolveStatus::Timeout, None, state.stats),
            FixedOutcome::Unsat { next: Some(next) } => {
                debug_assert!(next > mu);
                mu = next;
            }
            FixedOutcome::Unsat { next: None } => return finish(SolveStatus::Infeasible, None, state.stats),
        }
    }
}
