//! Line-oriented text formats for instances and plans.
//!
//! Instance files:
//!
//! ```text
//! # comment
//! v <id> <x> <y>
//! e <id1> <id2>
//! a <id> <velocity> <diameter> <start> <goal>
//! ```
//!
//! Vertex and agent ids must be exactly `0..n` (in any order). Plans are
//! written one event per line, `agent <id> <from> <to> <t_start> <t_end>`,
//! followed by `makespan <value>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{Agent, Graph, Instance, ModelError, MotionEvent, Solution, TemporalPlan, Time};
use crate::geometry::Point2D;

fn field<T: FromStr>(line: usize, tokens: &[&str], i: usize, name: &str) -> Result<T, ModelError> {
    let raw = tokens.get(i).ok_or_else(|| ModelError::Parse {
        line,
        message: format!("missing {name}"),
    })?;
    raw.parse().map_err(|_| ModelError::Parse {
        line,
        message: format!("bad {name} '{raw}'"),
    })
}

fn dense<T>(what: &'static str, map: BTreeMap<usize, T>) -> Result<Vec<T>, ModelError> {
    let n = map.len();
    if let Some((&last, _)) = map.iter().next_back() {
        if last + 1 != n {
            return Err(ModelError::Parse {
                line: 0,
                message: format!("{what} ids must be 0..{n}, found {last}"),
            });
        }
    }
    Ok(map.into_values().collect())
}

pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let mut vertices = BTreeMap::new();
    let mut edges = Vec::new();
    let mut agents = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let (expected, dup) = match tokens[0] {
            "v" => {
                let id: usize = field(line, &tokens, 1, "vertex id")?;
                let x: f64 = field(line, &tokens, 2, "x")?;
                let y: f64 = field(line, &tokens, 3, "y")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(ModelError::Parse {
                        line,
                        message: "non-finite coordinate".into(),
                    });
                }
                (4, vertices.insert(id, Point2D::new(x, y)).is_some())
            }
            "e" => {
                edges.push((line, field(line, &tokens, 1, "vertex id")?, field(line, &tokens, 2, "vertex id")?));
                (3, false)
            }
            "a" => {
                let id: usize = field(line, &tokens, 1, "agent id")?;
                let agent = Agent::new(field(line, &tokens, 2, "velocity")?, field(line, &tokens, 3, "diameter")?);
                let start: usize = field(line, &tokens, 4, "start vertex")?;
                let goal: usize = field(line, &tokens, 5, "goal vertex")?;
                (6, agents.insert(id, (agent, start, goal)).is_some())
            }
            other => {
                return Err(ModelError::Parse {
                    line,
                    message: format!("unknown record '{other}'"),
                })
            }
        };
        if tokens.len() != expected {
            return Err(ModelError::Parse {
                line,
                message: format!("expected {} fields, got {}", expected - 1, tokens.len() - 1),
            });
        }
        if dup {
            return Err(ModelError::Parse {
                line,
                message: format!("duplicate id {}", tokens[1]),
            });
        }
    }
    let mut graph = Graph::new(dense("vertex", vertices)?);
    for (line, u, v) in edges {
        graph.add_edge(u, v).map_err(|e| ModelError::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    let agents = dense("agent", agents)?;
    Instance::new(
        graph,
        agents.iter().map(|a| a.0).collect(),
        agents.iter().map(|a| a.1).collect(),
        agents.iter().map(|a| a.2).collect(),
    )
}

/// Writes `instance` so that [`parse_instance`] reproduces it exactly.
pub fn write_instance(instance: &Instance) -> String {
    let mut out = String::new();
    let g = instance.graph();
    for (id, p) in g.positions().iter().enumerate() {
        writeln!(out, "v {id} {} {}", p.x, p.y).unwrap();
    }
    for (u, v) in g.edges() {
        writeln!(out, "e {u} {v}").unwrap();
    }
    for (id, a) in instance.agents().iter().enumerate() {
        writeln!(
            out,
            "a {id} {} {} {} {}",
            a.velocity,
            a.diameter,
            instance.start(id),
            instance.goal(id)
        )
        .unwrap();
    }
    out
}

pub fn write_solution(solution: &Solution) -> String {
    let mut out = String::new();
    for plan in &solution.plans {
        for e in &plan.events {
            writeln!(out, "agent {} {} {} {} {}", plan.agent, e.from, e.to, e.start(), e.end()).unwrap();
        }
    }
    writeln!(out, "makespan {}", solution.makespan()).unwrap();
    out
}

/// Reads the output of [`write_solution`] back; the `makespan` trailer is
/// checked against the events.
pub fn parse_solution(text: &str, num_agents: usize) -> Result<Solution, ModelError> {
    let mut plans: Vec<TemporalPlan> = (0..num_agents).map(TemporalPlan::empty).collect();
    let mut trailer = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.first() {
            None => continue,
            Some(&"agent") => {
                let a: usize = field(line, &tokens, 1, "agent id")?;
                let from = field(line, &tokens, 2, "vertex id")?;
                let to = field(line, &tokens, 3, "vertex id")?;
                let start = Time::from_secs(field(line, &tokens, 4, "start time")?);
                let end = Time::from_secs(field(line, &tokens, 5, "end time")?);
                if start > end {
                    return Err(ModelError::Parse {
                        line,
                        message: "event ends before it starts".into(),
                    });
                }
                let plan = plans.get_mut(a).ok_or_else(|| ModelError::Parse {
                    line,
                    message: format!("unknown agent {a}"),
                })?;
                plan.events.push(MotionEvent::new(from, to, start, end));
            }
            Some(&"makespan") => trailer = Some(Time::from_secs(field(line, &tokens, 1, "makespan")?)),
            Some(other) => {
                return Err(ModelError::Parse {
                    line,
                    message: format!("unknown record '{other}'"),
                })
            }
        }
    }
    let solution = Solution::new(plans);
    match trailer {
        Some(m) if m == solution.makespan() => Ok(solution),
        _ => Err(ModelError::Parse {
            line: 0,
            message: "missing or inconsistent makespan trailer".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two agents on a square
v 0 0 0
v 1 1 0
v 2 0 1
v 3 1 1   # trailing comment
e 0 1
e 0 2
e 1 3
e 2 3
a 0 1.0 0.2 0 3
a 1 2.0 0.3 1 2
";

    #[test]
    fn parses_sample() {
        let inst = parse_instance(SAMPLE).unwrap();
        assert_eq!(inst.graph().num_vertices(), 4);
        assert_eq!(inst.graph().num_edges(), 4);
        assert_eq!(inst.num_agents(), 2);
        assert_eq!(inst.agent(1), Agent::new(2.0, 0.3));
        assert_eq!((inst.start(1), inst.goal(1)), (1, 2));
    }

    #[test]
    fn roundtrip_is_exact() {
        let inst = parse_instance(SAMPLE).unwrap();
        let text = write_instance(&inst);
        assert_eq!(parse_instance(&text).unwrap(), inst);
        assert_eq!(write_instance(&parse_instance(&text).unwrap()), text);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_instance("v 0 0\n").is_err());
        assert!(parse_instance("v 0 0 0\nv 2 1 1\n").is_err());
        assert!(parse_instance("v 0 0 0\nv 0 1 1\n").is_err());
        assert!(parse_instance("v 0 0 0\ne 0 1\n").is_err());
        assert!(parse_instance("q 1\n").is_err());
        assert!(parse_instance("v 0 0 0\nv 1 0 1\na 0 1 0.2 0 1\na 1 1 0.2 0 0\n").is_err());
    }

    #[test]
    fn solution_text_roundtrip() {
        let t = Time::from_secs;
        let sol = Solution::new(vec![
            TemporalPlan::new(0, vec![MotionEvent::new(0, 0, t(0.0), t(0.5)), MotionEvent::new(0, 1, t(0.5), t(1.5))]),
            TemporalPlan::empty(1),
        ]);
        let text = write_solution(&sol);
        assert!(text.contains("agent 0 0 0 0.000000000 0.500000000\n"));
        assert!(text.ends_with("makespan 1.500000000\n"));
        assert_eq!(parse_solution(&text, 2).unwrap(), sol);
    }
}
