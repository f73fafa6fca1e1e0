//! Layered benchmark graphs, random instances and the benchmark driver.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use log::{error, info, warn};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cbsr::{solve_cbsr, CbsOptions};
use crate::geometry::Point2D;
use crate::model::{Agent, Graph, Instance, ModelError, Solution, VertexId};
use crate::smt_cbsr::{solve_smt_cbsr, SmtOptions};
use crate::status::SolveStatus;
use crate::validation::validate_plans;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Connectivity {
    /// Consecutive layers are completely connected.
    Adjacent,
    /// Additionally, layers two apart are completely connected.
    #[default]
    Window3,
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Adjacent => "adjacent",
            Connectivity::Window3 => "window3",
        })
    }
}

impl FromStr for Connectivity {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adjacent" => Ok(Connectivity::Adjacent),
            "window3" => Ok(Connectivity::Window3),
            other => Err(BenchError::Spec(format!("unknown connectivity '{other}'"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid layered spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSpec {
    pub layer_sizes: Vec<usize>,
    pub connectivity: Connectivity,
    pub spacing: f64,
    pub agent_diameter: f64,
    pub agent_velocity: f64,
}

impl LayeredSpec {
    pub fn new(layer_sizes: &[usize], connectivity: Connectivity) -> LayeredSpec {
        LayeredSpec {
            layer_sizes: layer_sizes.to_vec(),
            connectivity,
            spacing: 1.0,
            agent_diameter: 0.2,
            agent_velocity: 1.0,
        }
    }

    /// Parses `[3,1,3]` or `3,1,3` with the default connectivity.
    pub fn parse(text: &str) -> Result<LayeredSpec, BenchError> {
        let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
        let sizes = inner
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| BenchError::Spec(format!("cannot parse layer sizes '{text}'")))?;
        let spec = LayeredSpec::new(&sizes, Connectivity::default());
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), BenchError> {
        if self.layer_sizes.len() < 2 {
            return Err(BenchError::Spec("need at least two layers".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(BenchError::Spec("layer sizes must be positive".into()));
        }
        Ok(())
    }

    /// Name used in reports, e.g. `[3,1,3]`.
    pub fn name(&self) -> String {
        let sizes: Vec<String> = self.layer_sizes.iter().map(usize::to_string).collect();
        format!("[{}]", sizes.join(","))
    }

    /// Vertex ids of layer `i` (0-based), left to right.
    pub fn layer(&self, i: usize) -> std::ops::Range<VertexId> {
        let first: usize = self.layer_sizes[..i].iter().sum();
        first..first + self.layer_sizes[i]
    }
}

/// Layer `i` (counting from 1) sits at `y = i` with its vertices centred on
/// `x = 0`, `spacing` apart. Vertices are numbered layer by layer, left to
/// right.
pub fn generate_layered(spec: &LayeredSpec) -> Graph {
    let mut positions = Vec::new();
    for (i, &n) in spec.layer_sizes.iter().enumerate() {
        for j in 0..n {
            let x = (j as f64 - (n as f64 - 1.0) / 2.0) * spec.spacing;
            positions.push(Point2D::new(x, (i + 1) as f64));
        }
    }
    let mut g = Graph::new(positions);
    let reach = match spec.connectivity {
        Connectivity::Adjacent => 1,
        Connectivity::Window3 => 2,
    };
    let h = spec.layer_sizes.len();
    for i in 0..h {
        for k in i + 1..(i + reach + 1).min(h) {
            for u in spec.layer(i) {
                for v in spec.layer(k) {
                    g.add_edge(u, v).expect("generated vertices exist");
                }
            }
        }
    }
    g
}

/// Agent `i` starts at the `starts[i]`-th vertex of the first layer and goes
/// to the `goals[i]`-th vertex of the last layer.
pub fn layered_instance(spec: &LayeredSpec, starts: &[usize], goals: &[usize]) -> Result<Instance, BenchError> {
    spec.check()?;
    let first = spec.layer(0);
    let last = spec.layer(spec.layer_sizes.len() - 1);
    if first.len() != last.len() {
        return Err(BenchError::Spec(format!(
            "first and last layer differ in size ({} vs {})",
            first.len(),
            last.len()
        )));
    }
    let k = first.len();
    let agents = vec![Agent::new(spec.agent_velocity, spec.agent_diameter); k];
    let starts = starts.iter().map(|&i| first.start + i).collect();
    let goals = goals.iter().map(|&i| last.start + i).collect();
    Ok(Instance::new(generate_layered(spec), agents, starts, goals)?)
}

/// Every agent goes straight across: first-layer vertex `i` to last-layer
/// vertex `i`.
pub fn identity_instance(spec: &LayeredSpec) -> Result<Instance, BenchError> {
    let k = spec.layer_sizes[0];
    let ids: Vec<usize> = (0..k).collect();
    layered_instance(spec, &ids, &ids)
}

/// Fully occupies the first and last layers with independent seeded random
/// permutations of the agents.
pub fn random_permutation_instance(spec: &LayeredSpec, seed: u64) -> Result<Instance, BenchError> {
    spec.check()?;
    let k = spec.layer_sizes[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<usize> = (0..k).collect();
    let mut goals = starts.clone();
    starts.shuffle(&mut rng);
    goals.shuffle(&mut rng);
    layered_instance(spec, &starts, &goals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Cbsr,
    SmtCbsr,
}

impl SolverKind {
    pub const ALL: [SolverKind; 2] = [SolverKind::Cbsr, SolverKind::SmtCbsr];
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Cbsr => "cbsr",
            SolverKind::SmtCbsr => "smtcbsr",
        })
    }
}

impl FromStr for SolverKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cbsr" => Ok(SolverKind::Cbsr),
            "smtcbsr" => Ok(SolverKind::SmtCbsr),
            other => Err(BenchError::Spec(format!("unknown solver '{other}'"))),
        }
    }
}

/// One solver run, with the solver-specific effort figures.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    pub runtime_s: f64,
    /// CT nodes expanded for CBS-R, SAT calls for SMT-CBS-R.
    pub iterations: usize,
    /// CT nodes expanded for CBS-R, makespans tried for SMT-CBS-R.
    pub expanded: usize,
}

pub fn run_solver(instance: &Instance, solver: SolverKind, timeout: Option<Duration>) -> RunOutcome {
    match solver {
        SolverKind::Cbsr => {
            let r = solve_cbsr(instance, &CbsOptions { timeout });
            RunOutcome {
                status: r.status,
                solution: r.solution,
                runtime_s: r.stats.runtime_seconds,
                iterations: r.stats.expanded,
                expanded: r.stats.expanded,
            }
        }
        SolverKind::SmtCbsr => {
            let r = solve_smt_cbsr(
                instance,
                &SmtOptions {
                    timeout,
                    ..SmtOptions::default()
                },
            );
            RunOutcome {
                status: r.status,
                solution: r.solution,
                runtime_s: r.stats.runtime_seconds,
                iterations: r.stats.iterations(),
                expanded: r.stats.makespans.len(),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    /// Layer sizes and connectivity, e.g. `[3,1,3]/window3`.
    pub graph: String,
    pub seed: u64,
    pub solver: SolverKind,
    pub status: SolveStatus,
    pub makespan: Option<f64>,
    pub runtime_s: f64,
    pub iterations: usize,
    pub expanded: usize,
    /// Whether a returned solution passed the collision re-check.
    pub valid: Option<bool>,
    pub solution: Option<Solution>,
}

pub fn graph_label(spec: &LayeredSpec) -> String {
    format!("{}/{}", spec.name(), spec.connectivity)
}

/// Runs every solver on seeds `0..seeds` of every spec. Instances that
/// cannot be built are logged and skipped. Results come back sorted by
/// graph, seed and solver.
pub fn run_benchmark(specs: &[LayeredSpec], seeds: u64, solvers: &[SolverKind], timeout: Option<Duration>) -> Vec<BenchmarkResult> {
    let mut results = Vec::new();
    for spec in specs {
        let graph = graph_label(spec);
        for seed in 0..seeds {
            let instance = match random_permutation_instance(spec, seed) {
                Ok(i) => i,
                Err(e) => {
                    warn!("{graph} seed {seed}: {e}");
                    continue;
                }
            };
            for &solver in solvers {
                let run = run_solver(&instance, solver, timeout);
                let valid = run
                    .solution
                    .as_ref()
                    .map(|s| validate_plans(&instance, s).is_ok_and(|c| c.is_empty()));
                if valid == Some(false) {
                    error!("{graph} seed {seed} {solver}: returned plans collide");
                }
                info!("{graph} seed {seed} {solver}: {} in {:.3}s", run.status, run.runtime_s);
                results.push(BenchmarkResult {
                    graph: graph.clone(),
                    seed,
                    solver,
                    status: run.status,
                    makespan: run.solution.as_ref().map(|s| s.makespan().as_secs()),
                    runtime_s: run.runtime_s,
                    iterations: run.iterations,
                    expanded: run.expanded,
                    valid,
                    solution: run.solution,
                });
            }
        }
    }
    results.sort_by(|a, b| (&a.graph, a.seed, a.solver).cmp(&(&b.graph, b.seed, b.solver)));
    results
}

#[derive(Serialize)]
struct CsvRow<'a> {
    graph: &'a str,
    seed: u64,
    solver: String,
    status: String,
    makespan: String,
    runtime_s: String,
    iterations: usize,
    expanded: usize,
}

/// Writes one row per result, unsolved runs with an empty makespan.
pub fn write_csv<W: Write>(results: &[BenchmarkResult], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(CsvRow {
            graph: &r.graph,
            seed: r.seed,
            solver: r.solver.to_string(),
            status: r.status.to_string(),
            makespan: r.makespan.map_or_else(String::new, |m| format!("{m:.9}")),
            runtime_s: format!("{:.6}", r.runtime_s),
            iterations: r.iterations,
            expanded: r.expanded,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Per graph and solver averages over the solved runs only.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub graph: String,
    pub solver: SolverKind,
    pub runs: usize,
    pub solved: usize,
    pub mean_runtime_s: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub mean_makespan: Option<f64>,
}

pub fn summarize(results: &[BenchmarkResult]) -> Vec<Summary> {
    let mut groups: BTreeMap<(&str, SolverKind), Vec<&BenchmarkResult>> = BTreeMap::new();
    for r in results {
        groups.entry((&r.graph, r.solver)).or_default().push(r);
    }
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    groups
        .into_iter()
        .map(|((graph, solver), rs)| {
            let solved: Vec<_> = rs.iter().filter(|r| r.status == SolveStatus::Solved).collect();
            let pick = |f: &dyn Fn(&BenchmarkResult) -> f64| solved.iter().map(|r| f(r)).collect::<Vec<_>>();
            Summary {
                graph: graph.to_string(),
                solver,
                runs: rs.len(),
                solved: solved.len(),
                mean_runtime_s: mean(&pick(&|r| r.runtime_s)),
                mean_iterations: mean(&pick(&|r| r.iterations as f64)),
                mean_makespan: mean(&pick(&|r| r.makespan.unwrap_or(f64::NAN))),
            }
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const SCALE: f64 = 100.0;
const MARGIN: f64 = 60.0;

/// An SVG picture of the graph with every agent's trajectory. Agents are
/// drawn to scale at their start, goals as dashed outlines, and every
/// arrival is labelled with its time.
pub fn svg_string(instance: &Instance, solution: &Solution) -> String {
    let g = instance.graph();
    let pts = g.positions();
    let (min_x, max_x) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let (min_y, max_y) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let (min_x, max_x, min_y, max_y) = if pts.is_empty() { (0.0, 0.0, 0.0, 0.0) } else { (min_x, max_x, min_y, max_y) };
    let px = |p: Point2D| (MARGIN + (p.x - min_x) * SCALE, MARGIN + (max_y - p.y) * SCALE);
    let width = 2.0 * MARGIN + (max_x - min_x) * SCALE;
    let height = 2.0 * MARGIN + (max_y - min_y) * SCALE;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r##"<g id="edges" stroke="#bbbbbb" stroke-width="1.5">"##);
    for (u, v) in g.edges() {
        let ((x1, y1), (x2, y2)) = (px(g.position(u)), px(g.position(v)));
        let _ = writeln!(s, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="vertices">"#);
    for (v, &p) in pts.iter().enumerate() {
        let (x, y) = px(p);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="9" fill="white" stroke="black"/>"#);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#, y + 4.0);
    }
    let _ = writeln!(s, "</g>");
    for plan in &solution.plans {
        let a = plan.agent;
        let color = PALETTE[a % PALETTE.len()];
        let r = instance.agent(a).diameter / 2.0 * SCALE;
        let _ = writeln!(s, r#"<g class="agent" id="agent-{a}" stroke="{color}" fill="{color}">"#);
        let path: Vec<String> = plan
            .vertices(instance.start(a))
            .into_iter()
            .map(|v| {
                let (x, y) = px(g.position(v));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline class="trajectory" points="{}" fill="none" stroke-width="2.5" opacity="0.8"/>"#, path.join(" "));
        let (sx, sy) = px(g.position(instance.start(a)));
        let (gx, gy) = px(g.position(instance.goal(a)));
        let _ = writeln!(s, r#"<circle cx="{sx:.2}" cy="{sy:.2}" r="{r:.2}" fill-opacity="0.35"/>"#);
        let _ = writeln!(s, r#"<circle cx="{gx:.2}" cy="{gy:.2}" r="{r:.2}" fill="none" stroke-dasharray="4 3"/>"#);
        for (k, e) in plan.events.iter().filter(|e| !e.is_wait()).enumerate() {
            let (x, y) = px(g.position(e.to));
            let dy = -14.0 - 12.0 * (a as f64) - 2.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" stroke="none">a{a} {:.3}</text>"#,
                x + 12.0,
                y + dy,
                e.end().as_secs()
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_svg(instance: &Instance, solution: &Solution, path: &Path) -> Result<(), BenchError> {
    std::fs::write(path, svg_string(instance, solution))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_one_three_layout() {
        let g = generate_layered(&LayeredSpec::new(&[3, 1, 3], Connectivity::Adjacent));
        let expected = [(-1., 1.), (0., 1.), (1., 1.), (0., 2.), (-1., 3.), (0., 3.), (1., 3.)];
        assert_eq!(g.num_vertices(), 7);
        for (v, &(x, y)) in expected.iter().enumerate() {
            assert_eq!(g.position(v), Point2D::new(x, y));
        }
    }

    #[test]
    fn edge_counts() {
        let e = |sizes: &[usize], c| generate_layered(&LayeredSpec::new(sizes, c)).num_edges();
        assert_eq!(e(&[3, 1, 3], Connectivity::Adjacent), 6);
        assert_eq!(e(&[3, 1, 3], Connectivity::Window3), 15);
        assert_eq!(e(&[2, 2], Connectivity::Adjacent), 4);
        assert_eq!(e(&[2, 2], Connectivity::Window3), 4);
        assert_eq!(e(&[3, 3, 3], Connectivity::Window3), 27);
    }

    #[test]
    fn random_instances_are_deterministic_and_injective() {
        let spec = LayeredSpec::new(&[3, 3, 3], Connectivity::Window3);
        for seed in 0..20 {
            let a = random_permutation_instance(&spec, seed).unwrap();
            assert_eq!(a, random_permutation_instance(&spec, seed).unwrap());
            let mut s: Vec<_> = (0..3).map(|i| a.start(i)).collect();
            let mut g: Vec<_> = (0..3).map(|i| a.goal(i)).collect();
            s.sort();
            g.sort();
            assert_eq!(s, vec![0, 1, 2]);
            assert_eq!(g, vec![6, 7, 8]);
        }
    }

    #[test]
    fn mismatched_end_layers_are_rejected() {
        let spec = LayeredSpec::new(&[3, 1, 2], Connectivity::Adjacent);
        assert!(matches!(random_permutation_instance(&spec, 0), Err(BenchError::Spec(_))));
    }

    #[test]
    fn spec_parsing() {
        let s = LayeredSpec::parse("[3,1,3]").unwrap();
        assert_eq!(s.layer_sizes, vec![3, 1, 3]);
        assert_eq!(s.name(), "[3,1,3]");
        assert_eq!(LayeredSpec::parse("2, 2").unwrap().layer_sizes, vec![2, 2]);
        assert!(LayeredSpec::parse("[3]").is_err());
        assert!(LayeredSpec::parse("[a,b]").is_err());
    }

    fn row(graph: &str, seed: u64, solver: SolverKind, status: SolveStatus, makespan: Option<f64>, runtime_s: f64) -> BenchmarkResult {
        BenchmarkResult {
            graph: graph.into(),
            seed,
            solver,
            status,
            makespan,
            runtime_s,
            iterations: 3,
            expanded: 2,
            valid: makespan.map(|_| true),
            solution: None,
        }
    }

    #[test]
    fn csv_columns_and_rows() {
        let results = vec![
            row("[2,2]/window3", 0, SolverKind::Cbsr, SolveStatus::Solved, Some(1.0), 0.5),
            row("[2,2]/window3", 0, SolverKind::SmtCbsr, SolveStatus::Timeout, None, 60.0),
        ];
        let mut out = Vec::new();
        write_csv(&results, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "graph,seed,solver,status,makespan,runtime_s,iterations,expanded");
        assert_eq!(lines[1], "\"[2,2]/window3\",0,cbsr,solved,1.000000000,0.500000,3,2");
        assert_eq!(lines[2], "\"[2,2]/window3\",0,smtcbsr,timeout,,60.000000,3,2");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn averages_use_solved_runs_only() {
        let results = vec![
            row("g", 0, SolverKind::Cbsr, SolveStatus::Solved, Some(2.0), 1.0),
            row("g", 1, SolverKind::Cbsr, SolveStatus::Solved, Some(4.0), 3.0),
            row("g", 2, SolverKind::Cbsr, SolveStatus::Timeout, None, 60.0),
            row("g", 0, SolverKind::SmtCbsr, SolveStatus::Timeout, None, 60.0),
        ];
        let sums = summarize(&results);
        assert_eq!(sums.len(), 2);
        assert_eq!((sums[0].runs, sums[0].solved), (3, 2));
        assert_eq!(sums[0].mean_runtime_s, Some(2.0));
        assert_eq!(sums[0].mean_makespan, Some(3.0));
        assert_eq!((sums[1].runs, sums[1].solved), (1, 0));
        assert_eq!(sums[1].mean_runtime_s, None);
    }

    #[test]
    fn benchmark_rows_cover_every_combination() {
        let specs = [LayeredSpec::new(&[2, 2], Connectivity::Adjacent), LayeredSpec::new(&[2, 3, 2], Connectivity::Window3)];
        let results = run_benchmark(&specs, 3, &SolverKind::ALL, Some(Duration::from_secs(30)));
        assert_eq!(results.len(), 2 * 3 * 2);
        for r in &results {
            assert_eq!(r.status, SolveStatus::Solved);
            assert_eq!(r.valid, Some(true));
        }
        for pair in results.chunks(2) {
            assert_eq!(pair[0].makespan, pair[1].makespan);
        }
    }

    #[test]
    fn solver_names_round_trip() {
        for s in SolverKind::ALL {
            assert_eq!(s.to_string().parse::<SolverKind>().unwrap(), s);
        }
        assert!("dfs".parse::<SolverKind>().is_err());
        assert_eq!("adjacent".parse::<Connectivity>().unwrap(), Connectivity::Adjacent);
    }
}
