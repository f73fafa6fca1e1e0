use crate::{Lit, SatError, Solver};

/// A parsed DIMACS CNF problem.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    /// Loads the problem into a fresh solver.
    pub fn to_solver(&self) -> Result<Solver, SatError> {
        let mut solver = Solver::new();
        for _ in 0..self.num_vars {
            solver.new_var();
        }
        for clause in &self.clauses {
            solver.add_clause(clause)?;
        }
        Ok(solver)
    }
}

/// Parses DIMACS CNF text. Comment lines start with `c`; clauses may span lines.
pub fn parse_dimacs(text: &str) -> Result<Cnf, SatError> {
    let mut cnf = Cnf::default();
    let mut header_seen = false;
    let mut current = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        let err = |message: &str| SatError::Dimacs {
            line: line_no,
            message: message.to_string(),
        };
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(err("expected `p cnf <vars> <clauses>`"));
            }
            cnf.num_vars = parts[2].parse().map_err(|_| err("bad variable count"))?;
            header_seen = true;
            continue;
        }
        if !header_seen {
            return Err(err("clause before header"));
        }
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| err("bad literal"))?;
            if value == 0 {
                cnf.clauses.push(std::mem::take(&mut current));
            } else {
                if value.unsigned_abs() as usize > cnf.num_vars {
                    return Err(err("literal exceeds declared variable count"));
                }
                current.push(Lit::from_dimacs(value));
            }
        }
    }
    if !current.is_empty() {
        cnf.clauses.push(current);
    }
    Ok(cnf)
}
