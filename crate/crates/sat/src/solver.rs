use std::io::{self, Write};
use std::time::Instant;

use crate::heap::VarHeap;
use crate::lit::{Lit, Var};
use crate::SatError;

const VAR_DECAY: f64 = 0.95;
const RESCALE_LIMIT: f64 = 1e100;
const FIRST_RESTART: u64 = 100;
const RESTART_GROWTH: f64 = 1.5;
/// How many search-loop steps pass between deadline checks.
const DEADLINE_POLL: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    True,
    False,
    Unassigned,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: usize,
    blocker: Lit,
}

#[derive(Debug, Clone)]
struct ClauseData {
    lits: Vec<Lit>,
}

/// A complete assignment returned by a satisfiable solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn value(&self, var: Var) -> bool {
        self.values[var.index()]
    }

    pub fn lit_value(&self, lit: Lit) -> bool {
        self.value(lit.var()) == lit.is_positive()
    }

    pub fn satisfies(&self, clause: &[Lit]) -> bool {
        clause.iter().any(|&l| self.lit_value(l))
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    /// Variables assigned true, in id order.
    pub fn true_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| Var::from_index(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            SolveResult::Sat(m) => Some(m),
            SolveResult::Unsat => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learned: u64,
}

/// Incremental CDCL solver.
///
/// Two-watched-literal propagation, first-UIP learning with local
/// minimization, VSIDS branching with phase saving, and geometric restarts.
/// The clause database is monotone: clauses can be added between calls to
/// [`Solver::solve`] but never removed, and learned clauses are kept.
#[derive(Debug, Clone, Default)]
pub struct Solver {
    original: Vec<Vec<Lit>>,
    clauses: Vec<ClauseData>,
    watches: Vec<Vec<Watcher>>,

    assigns: Vec<Value>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    seen: Vec<bool>,

    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,

    unsat: bool,
    last_model: Option<Model>,
    stats: SolverStats,
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            var_inc: 1.0,
            ..Default::default()
        }
    }

    /// Allocates a fresh variable; ids are 1, 2, 3, ... in call order.
    pub fn new_var(&mut self) -> Var {
        let idx = self.assigns.len();
        self.assigns.push(Value::Unassigned);
        self.level.push(0);
        self.reason.push(None);
        self.polarity.push(false);
        self.activity.push(0.0);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.grow(idx + 1);
        self.heap.insert(idx, &self.activity);
        Var::from_index(idx)
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    /// Number of clauses added through [`Solver::add_clause`] (tautologies excluded).
    pub fn num_clauses(&self) -> usize {
        self.original.len()
    }

    pub fn num_learned(&self) -> u64 {
        self.stats.learned
    }

    /// The clauses added by the caller, after normalization.
    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.original
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// True once the database is known to be unsatisfiable at the root.
    pub fn is_unsat(&self) -> bool {
        self.unsat
    }

    pub fn last_model(&self) -> Option<&Model> {
        self.last_model.as_ref()
    }

    /// Adds a clause permanently. Duplicate literals are merged and
    /// tautologies are dropped; an empty clause makes the state unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> Result<(), SatError> {
        for &l in lits {
            if l.var().index() >= self.num_vars() {
                return Err(SatError::UnknownVariable(l.var().id()));
            }
        }
        let mut clause = lits.to_vec();
        clause.sort_unstable();
        clause.dedup();
        if clause.windows(2).any(|w| w[0] == !w[1]) {
            return Ok(());
        }
        self.original.push(clause.clone());
        self.last_model = None;
        if self.unsat {
            return Ok(());
        }
        self.backtrack(0);

        // Simplify against root-level assignments.
        if clause.iter().any(|&l| self.lit_value(l) == Value::True) {
            return Ok(());
        }
        clause.retain(|&l| self.lit_value(l) != Value::False);
        match clause.len() {
            0 => self.unsat = true,
            1 => self.enqueue(clause[0], None),
            _ => {
                let cref = self.clauses.len();
                self.watches[(!clause[0]).code()].push(Watcher {
                    clause: cref,
                    blocker: clause[1],
                });
                self.watches[(!clause[1]).code()].push(Watcher {
                    clause: cref,
                    blocker: clause[0],
                });
                self.clauses.push(ClauseData { lits: clause });
            }
        }
        Ok(())
    }

    /// Pairwise at-most-one over `lits`: one binary clause per pair.
    pub fn add_at_most_one(&mut self, lits: &[Lit]) -> Result<(), SatError> {
        for i in 0..lits.len() {
            for j in i + 1..lits.len() {
                self.add_clause(&[!lits[i], !lits[j]])?;
            }
        }
        Ok(())
    }

    pub fn solve(&mut self) -> SolveResult {
        self.solve_until(None)
            .expect("solve without a deadline always finishes")
    }

    /// Like [`Solver::solve`] but gives up (returning `None`) once `deadline`
    /// passes. The database is left intact and a later call resumes cleanly.
    pub fn solve_until(&mut self, deadline: Option<Instant>) -> Option<SolveResult> {
        self.stats.solves += 1;
        self.last_model = None;
        if self.unsat {
            return Some(SolveResult::Unsat);
        }
        self.backtrack(0);
        if self.propagate().is_some() {
            self.unsat = true;
            return Some(SolveResult::Unsat);
        }

        let mut restart_limit = FIRST_RESTART as f64;
        let mut conflicts_since_restart = 0u64;
        let mut poll = 0u32;
        loop {
            poll += 1;
            if poll >= DEADLINE_POLL {
                poll = 0;
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    self.backtrack(0);
                    return None;
                }
            }
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return Some(SolveResult::Unsat);
                }
                let (learnt, backtrack_level) = self.analyze(conflict);
                self.backtrack(backtrack_level);
                self.stats.learned += 1;
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let cref = self.attach_learnt(learnt);
                    let first = self.clauses[cref].lits[0];
                    self.enqueue(first, Some(cref));
                }
                self.var_inc /= VAR_DECAY;

                if conflicts_since_restart as f64 >= restart_limit {
                    self.stats.restarts += 1;
                    conflicts_since_restart = 0;
                    restart_limit *= RESTART_GROWTH;
                    self.backtrack(0);
                }
            } else {
                match self.pick_branch() {
                    None => {
                        let model = Model {
                            values: self.assigns.iter().map(|&v| v == Value::True).collect(),
                        };
                        debug_assert!(self.original.iter().all(|c| model.satisfies(c)));
                        self.last_model = Some(model.clone());
                        return Some(SolveResult::Sat(model));
                    }
                    Some(lit) => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(lit, None);
                    }
                }
            }
        }
    }

    /// Writes the caller-added clauses in DIMACS CNF.
    pub fn write_dimacs<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "p cnf {} {}", self.num_vars(), self.original.len())?;
        for clause in &self.original {
            for lit in clause {
                write!(out, "{} ", lit.to_dimacs())?;
            }
            writeln!(out, "0")?;
        }
        Ok(())
    }

    #[inline]
    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    #[inline]
    fn lit_value(&self, lit: Lit) -> Value {
        match self.assigns[lit.var().index()] {
            Value::Unassigned => Value::Unassigned,
            Value::True if lit.is_positive() => Value::True,
            Value::False if !lit.is_positive() => Value::True,
            _ => Value::False,
        }
    }

    fn enqueue(&mut self, lit: Lit, reason: Option<usize>) {
        let v = lit.var().index();
        debug_assert_eq!(self.assigns[v], Value::Unassigned);
        self.assigns[v] = if lit.is_positive() {
            Value::True
        } else {
            Value::False
        };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    fn attach_learnt(&mut self, lits: Vec<Lit>) -> usize {
        let cref = self.clauses.len();
        self.watches[(!lits[0]).code()].push(Watcher {
            clause: cref,
            blocker: lits[1],
        });
        self.watches[(!lits[1]).code()].push(Watcher {
            clause: cref,
            blocker: lits[0],
        });
        self.clauses.push(ClauseData { lits });
        cref
    }

    /// Unit propagation; returns the index of a falsified clause, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut watchers = std::mem::take(&mut self.watches[p.code()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < watchers.len() {
                let w = watchers[i];
                i += 1;
                if self.lit_value(w.blocker) == Value::True {
                    watchers[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.clause;
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let kept = Watcher {
                    clause: cref,
                    blocker: first,
                };
                if first != w.blocker && self.lit_value(first) == Value::True {
                    watchers[j] = kept;
                    j += 1;
                    continue;
                }
                // Look for a replacement watch.
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let candidate = self.clauses[cref].lits[k];
                    if self.lit_value(candidate) != Value::False {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[(!candidate).code()].push(kept);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                watchers[j] = kept;
                j += 1;
                if self.lit_value(first) == Value::False {
                    conflict = Some(cref);
                    self.qhead = self.trail.len();
                    while i < watchers.len() {
                        watchers[j] = watchers[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            watchers.truncate(j);
            self.watches[p.code()] = watchers;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > RESCALE_LIMIT {
            for a in &mut self.activity {
                *a *= 1.0 / RESCALE_LIMIT;
            }
            self.var_inc *= 1.0 / RESCALE_LIMIT;
        }
        self.heap.increased(v, &self.activity);
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first, highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut conflict: usize) -> (Vec<Lit>, u32) {
        let current = self.decision_level();
        let mut learnt = vec![Lit::new(Var::new(1), true)];
        let mut pending = 0usize;
        let mut index = self.trail.len();
        let mut asserting: Option<Lit> = None;

        loop {
            let start = usize::from(asserting.is_some());
            let n = self.clauses[conflict].lits.len();
            for k in start..n {
                let q = self.clauses[conflict].lits[k];
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let p = self.trail[index];
            let v = p.var().index();
            self.seen[v] = false;
            pending -= 1;
            asserting = Some(p);
            if pending == 0 {
                break;
            }
            conflict = self.reason[v].expect("implied literal at conflict level has a reason");
        }
        learnt[0] = !asserting.expect("analysis visits at least one literal");

        // Drop literals implied by other literals already in the clause.
        let mut minimized = Vec::with_capacity(learnt.len());
        minimized.push(learnt[0]);
        for &lit in &learnt[1..] {
            let v = lit.var().index();
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r].lits[1..].iter().all(|q| {
                    let qv = q.var().index();
                    self.seen[qv] || self.level[qv] == 0
                }),
            };
            if !redundant {
                minimized.push(lit);
            }
        }
        for lit in &learnt[1..] {
            self.seen[lit.var().index()] = false;
        }

        let mut backtrack_level = 0;
        if minimized.len() > 1 {
            let mut max_i = 1;
            for i in 2..minimized.len() {
                if self.level[minimized[i].var().index()] > self.level[minimized[max_i].var().index()] {
                    max_i = i;
                }
            }
            minimized.swap(1, max_i);
            backtrack_level = self.level[minimized[1].var().index()];
        }
        (minimized, backtrack_level)
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let keep = self.trail_lim[level as usize];
        for k in (keep..self.trail.len()).rev() {
            let lit = self.trail[k];
            let v = lit.var().index();
            self.assigns[v] = Value::Unassigned;
            self.reason[v] = None;
            self.polarity[v] = lit.is_positive();
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(level as usize);
        self.qhead = keep;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while !self.heap.is_empty() {
            let v = self.heap.pop(&self.activity)?;
            if self.assigns[v] == Value::Unassigned {
                return Some(Lit::new(Var::from_index(v), self.polarity[v]));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(s: &mut Solver, n: usize) -> Vec<Var> {
        (0..n).map(|_| s.new_var()).collect()
    }

    #[test]
    fn variable_ids_increase_from_one() {
        let mut s = Solver::new();
        assert_eq!(s.new_var().id(), 1);
        assert_eq!(s.new_var().id(), 2);
        for _ in 0..5 {
            s.new_var();
        }
        assert_eq!(s.new_var().id(), 8);
    }

    #[test]
    fn unit_clause_is_satisfied() {
        let mut s = Solver::new();
        let x = s.new_var();
        s.add_clause(&[x.positive()]).unwrap();
        let m = s.solve();
        assert!(m.model().unwrap().value(x));
    }

    #[test]
    fn contradictory_units_are_unsat() {
        let mut s = Solver::new();
        let x = s.new_var();
        s.add_clause(&[x.positive()]).unwrap();
        s.add_clause(&[x.negative()]).unwrap();
        assert_eq!(s.solve(), SolveResult::Unsat);
        assert!(s.is_unsat());
    }

    #[test]
    fn implication_chain() {
        let mut s = Solver::new();
        let v = vars(&mut s, 2);
        s.add_clause(&[v[0].negative(), v[1].positive()]).unwrap();
        s.add_clause(&[v[0].positive()]).unwrap();
        let res = s.solve();
        let m = res.model().unwrap();
        assert!(m.value(v[0]) && m.value(v[1]));
    }

    #[test]
    fn empty_clause_marks_unsat() {
        let mut s = Solver::new();
        s.new_var();
        s.add_clause(&[]).unwrap();
        assert!(s.is_unsat());
        assert_eq!(s.solve(), SolveResult::Unsat);
    }

    #[test]
    fn tautologies_are_dropped() {
        let mut s = Solver::new();
        let x = s.new_var();
        s.add_clause(&[x.positive(), x.negative()]).unwrap();
        assert_eq!(s.num_clauses(), 0);
        assert!(s.solve().is_sat());
    }

    #[test]
    fn unknown_variable_is_an_error() {
        let mut s = Solver::new();
        s.new_var();
        let err = s.add_clause(&[Var::new(5).positive()]).unwrap_err();
        assert_eq!(err, SatError::UnknownVariable(5));
    }

    #[test]
    fn empty_database_is_sat() {
        let mut s = Solver::new();
        assert!(s.solve().is_sat());
        vars(&mut s, 3);
        assert!(s.solve().is_sat());
    }

    #[test]
    fn at_most_one_pair_counts() {
        let mut s = Solver::new();
        let v = vars(&mut s, 3);
        s.add_at_most_one(&[v[0].positive()]).unwrap();
        assert_eq!(s.num_clauses(), 0);
        let lits: Vec<Lit> = v.iter().map(|x| x.positive()).collect();
        s.add_at_most_one(&lits).unwrap();
        assert_eq!(s.num_clauses(), 3);
        s.add_clause(&[v[0].positive()]).unwrap();
        s.add_clause(&[v[2].positive()]).unwrap();
        assert_eq!(s.solve(), SolveResult::Unsat);
    }

    #[test]
    fn pigeonhole_two_into_one() {
        let mut s = Solver::new();
        let p = vars(&mut s, 2);
        s.add_clause(&[p[0].positive()]).unwrap();
        s.add_clause(&[p[1].positive()]).unwrap();
        s.add_at_most_one(&[p[0].positive(), p[1].positive()]).unwrap();
        assert_eq!(s.solve(), SolveResult::Unsat);
    }

    #[test]
    fn incremental_additions_are_respected() {
        let mut s = Solver::new();
        let v = vars(&mut s, 3);
        s.add_clause(&[v[0].positive(), v[1].positive(), v[2].positive()]).unwrap();
        let first = s.solve();
        assert!(first.is_sat());
        for x in &v {
            if first.model().unwrap().value(*x) {
                s.add_clause(&[x.negative()]).unwrap();
            }
        }
        let second = s.solve();
        if let SolveResult::Sat(m) = &second {
            assert!(s.clauses().iter().all(|c| m.satisfies(c)));
        }
        s.add_clause(&[v[0].negative()]).unwrap();
        s.add_clause(&[v[1].negative()]).unwrap();
        s.add_clause(&[v[2].negative()]).unwrap();
        assert_eq!(s.solve(), SolveResult::Unsat);
    }

    #[test]
    fn dimacs_dump_format() {
        let mut s = Solver::new();
        let v = vars(&mut s, 2);
        s.add_clause(&[v[0].positive(), v[1].negative()]).unwrap();
        s.add_clause(&[v[1].positive()]).unwrap();
        let mut out = Vec::new();
        s.write_dimacs(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "p cnf 2 2\n1 -2 0\n2 0\n");
    }
}
