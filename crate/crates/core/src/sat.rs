//! CNF ingestion, random 3-SAT generation and Rosenberg quadratization.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Qubo, QuboBuilder, SpinState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SatError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header line: {0:?}")]
    BadHeader(String),
    #[error("line {line}: cannot parse literal {token:?}")]
    BadLiteral { line: usize, token: String },
    #[error("line {line}: literal {literal} out of range for {num_vars} variables")]
    LiteralOutOfRange {
        line: usize,
        literal: i64,
        num_vars: usize,
    },
    #[error("empty clause")]
    EmptyClause,
    #[error("clause {0} contains a literal and its negation")]
    Tautology(usize),
    #[error("clause {index} has {len} literals; at most 3 can be quadratized")]
    ClauseTooLong { index: usize, len: usize },
    #[error("penalty must be at least 2, got {0}")]
    PenaltyTooSmall(i64),
    #[error("{0} variables is too many for exhaustive verification (limit 24)")]
    TooLargeToEnumerate(usize),
    #[error("random 3-SAT needs at least 3 variables, got {0}")]
    TooFewVariables(usize),
}

/// A literal is a nonzero signed 1-based variable index.
pub type Literal = i32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Literal>>,
}

fn lit_holds(lit: Literal, assignment: &[bool]) -> bool {
    let v = assignment[lit.unsigned_abs() as usize - 1];
    if lit > 0 {
        v
    } else {
        !v
    }
}

impl Cnf {
    /// Checks the literal-range, non-empty and no-tautology invariants.
    pub fn new(num_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<Self, SatError> {
        for (k, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(SatError::EmptyClause);
            }
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > num_vars {
                    return Err(SatError::LiteralOutOfRange {
                        line: 0,
                        literal: lit as i64,
                        num_vars,
                    });
                }
                if clause.contains(&-lit) {
                    return Err(SatError::Tautology(k));
                }
            }
        }
        Ok(Self { num_vars, clauses })
    }

    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        self.unsatisfied_count(assignment) == 0
    }

    pub fn unsatisfied_count(&self, assignment: &[bool]) -> usize {
        self.clauses
            .iter()
            .filter(|c| !c.iter().any(|&l| lit_holds(l, assignment)))
            .count()
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimacsWarning {
    ClauseCountMismatch { declared: usize, found: usize },
}

pub fn parse_dimacs(text: &str) -> Result<Cnf, SatError> {
    parse_dimacs_with_warnings(text).map(|(cnf, _)| cnf)
}

/// Parses DIMACS CNF. A `%` line (SATLIB trailer) ends the clause section.
pub fn parse_dimacs_with_warnings(text: &str) -> Result<(Cnf, Vec<DimacsWarning>), SatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(SatError::BadHeader(line.to_string()));
            }
            let vars = fields[2]
                .parse()
                .map_err(|_| SatError::BadHeader(line.to_string()))?;
            let count = fields[3]
                .parse()
                .map_err(|_| SatError::BadHeader(line.to_string()))?;
            header = Some((vars, count));
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(SatError::MissingHeader);
        };
        for token in line.split_whitespace() {
            let lit: i64 = token.parse().map_err(|_| SatError::BadLiteral {
                line: lineno + 1,
                token: token.to_string(),
            })?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(SatError::EmptyClause);
                }
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if lit.unsigned_abs() as usize > num_vars {
                return Err(SatError::LiteralOutOfRange {
                    line: lineno + 1,
                    literal: lit,
                    num_vars,
                });
            }
            current.push(lit as Literal);
        }
    }
    let Some((num_vars, declared)) = header else {
        return Err(SatError::MissingHeader);
    };
    // Tolerate a final clause missing its terminating 0.
    if !current.is_empty() {
        clauses.push(current);
    }
    let mut warnings = Vec::new();
    if clauses.len() != declared {
        warnings.push(DimacsWarning::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Ok((Cnf::new(num_vars, clauses)?, warnings))
}

/// Uniform random 3-SAT with `round(ratio · num_vars)` clauses.
pub fn gen_random_3sat(num_vars: usize, ratio: f64, seed: u64) -> Result<Cnf, SatError> {
    if num_vars < 3 {
        return Err(SatError::TooFewVariables(num_vars));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = (ratio * num_vars as f64).round() as usize;
    let clauses = (0..m)
        .map(|_| {
            sample(&mut rng, num_vars, 3)
                .into_iter()
                .map(|v| {
                    let lit = v as Literal + 1;
                    if rng.gen_bool(0.5) {
                        -lit
                    } else {
                        lit
                    }
                })
                .collect()
        })
        .collect();
    Ok(Cnf { num_vars, clauses })
}

/// One auxiliary QUBO variable standing in for the product of two variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxVar {
    pub index: usize,
    pub parents: (usize, usize),
    pub clause: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratizationMap {
    pub num_original: usize,
    pub aux_vars: Vec<AuxVar>,
    pub penalty: i64,
}

impl QuadratizationMap {
    /// Drops auxiliary variables, returning the CNF assignment.
    pub fn strip(&self, state: &SpinState) -> Vec<bool> {
        state.bits()[..self.num_original].to_vec()
    }

    /// Extends a CNF assignment with `z = a·b` for every auxiliary.
    pub fn extend(&self, assignment: &[bool]) -> SpinState {
        let mut bits = assignment.to_vec();
        bits.resize(self.num_original + self.aux_vars.len(), false);
        for aux in &self.aux_vars {
            bits[aux.index] = bits[aux.parents.0] && bits[aux.parents.1];
        }
        SpinState::from_bools(bits)
    }
}

pub const DEFAULT_PENALTY: i64 = 2;

type Monomial = Vec<usize>;

fn multiply(
    poly: &BTreeMap<Monomial, i64>,
    factor: &[(Option<usize>, i64)],
) -> BTreeMap<Monomial, i64> {
    let mut out = BTreeMap::new();
    for (mono, &c) in poly {
        for &(var, k) in factor {
            let mut m = mono.clone();
            if let Some(v) = var {
                if !m.contains(&v) {
                    m.push(v);
                    m.sort_unstable();
                }
            }
            *out.entry(m).or_insert(0) += c * k;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Rosenberg quadratization. Each clause contributes the penalty
/// `Π(1 − lit)`, which is 1 exactly when the clause is violated. A cubic
/// monomial `c·x_a·x_b·x_c` (a, b from the first two literals) becomes
/// `c·z·x_c + P·(x_a·x_b − 2·x_a·z − 2·x_b·z + 3·z)` with a fresh `z`.
pub fn quadratize(cnf: &Cnf, penalty: i64) -> Result<(Qubo<i64>, QuadratizationMap), SatError> {
    if penalty < 2 {
        return Err(SatError::PenaltyTooSmall(penalty));
    }
    let mut clauses: Vec<Vec<Literal>> = Vec::with_capacity(cnf.clauses.len());
    for (index, clause) in cnf.clauses.iter().enumerate() {
        let mut lits: Vec<Literal> = Vec::with_capacity(3);
        for &l in clause {
            if !lits.contains(&l) {
                lits.push(l);
            }
        }
        if lits.len() > 3 {
            return Err(SatError::ClauseTooLong {
                index,
                len: lits.len(),
            });
        }
        clauses.push(lits);
    }
    let num_aux = clauses.iter().filter(|c| c.len() == 3).count();
    let n = cnf.num_vars + num_aux;
    let mut builder = QuboBuilder::<i64>::new(n);
    let mut aux_vars = Vec::with_capacity(num_aux);

    for (ci, lits) in clauses.iter().enumerate() {
        let mut poly: BTreeMap<Monomial, i64> = BTreeMap::from([(Vec::new(), 1)]);
        for &l in lits {
            let v = l.unsigned_abs() as usize - 1;
            // Violation factor: (1 − x) for a positive literal, x for a negated one.
            let factor: &[(Option<usize>, i64)] = if l > 0 {
                &[(None, 1), (Some(v), -1)]
            } else {
                &[(Some(v), 1)]
            };
            poly = multiply(&poly, factor);
        }
        for (mono, c) in poly {
            match mono.as_slice() {
                [] => {
                    builder.add_constant(c);
                }
                [i] => {
                    builder.add_linear(*i, c).expect("index in range");
                }
                [i, j] => {
                    builder.add_coupling(*i, *j, c).expect("index in range");
                }
                [_, _, _] => {
                    let a = lits[0].unsigned_abs() as usize - 1;
                    let b = lits[1].unsigned_abs() as usize - 1;
                    let rest = lits[2].unsigned_abs() as usize - 1;
                    let z = cnf.num_vars + aux_vars.len();
                    aux_vars.push(AuxVar {
                        index: z,
                        parents: (a, b),
                        clause: ci,
                    });
                    builder.add_coupling(z, rest, c).expect("index in range");
                    builder.add_coupling(a, b, penalty).expect("index in range");
                    builder
                        .add_coupling(a, z, -2 * penalty)
                        .expect("index in range");
                    builder
                        .add_coupling(b, z, -2 * penalty)
                        .expect("index in range");
                    builder.add_linear(z, 3 * penalty).expect("index in range");
                }
                _ => unreachable!("clauses have at most three literals"),
            }
        }
    }
    let map = QuadratizationMap {
        num_original: cnf.num_vars,
        aux_vars,
        penalty,
    };
    Ok((builder.build(), map))
}

/// Exhaustive consistency check of a quadratization:
/// for every CNF assignment the minimum over auxiliaries equals the number of
/// violated clauses, the global minimum is 0 iff the CNF is satisfiable, and
/// every satisfying assignment extends to a zero-energy state.
pub fn verify_quadratization(
    cnf: &Cnf,
    q: &Qubo<i64>,
    map: &QuadratizationMap,
) -> Result<bool, SatError> {
    let n = q.n();
    if n > 24 {
        return Err(SatError::TooLargeToEnumerate(n));
    }
    if map.num_original != cnf.num_vars || n != cnf.num_vars + map.aux_vars.len() {
        return Ok(false);
    }
    let v = cnf.num_vars;
    let mut best = vec![i64::MAX; 1usize << v];
    for idx in 0..(1u64 << n) {
        let x = SpinState::from_index(n, idx);
        let e = q.energy(&x).expect("dimension checked");
        let orig = (idx & ((1u64 << v) - 1)) as usize;
        best[orig] = best[orig].min(e);
    }
    let mut satisfiable = false;
    let mut global_min = i64::MAX;
    for (orig, &e) in best.iter().enumerate() {
        let assignment: Vec<bool> = (0..v).map(|i| (orig >> i) & 1 == 1).collect();
        let unsat = cnf.unsatisfied_count(&assignment) as i64;
        if e != unsat {
            return Ok(false);
        }
        if unsat == 0 {
            satisfiable = true;
            if q.energy(&map.extend(&assignment))
                .expect("dimension checked")
                != 0
            {
                return Ok(false);
            }
        }
        global_min = global_min.min(e);
    }
    Ok((global_min == 0) == satisfiable)
}

/// Complete DPLL search with unit propagation. Returns a satisfying assignment.
pub fn solve_dpll(cnf: &Cnf) -> Option<Vec<bool>> {
    fn rec(cnf: &Cnf, assign: &mut Vec<Option<bool>>) -> bool {
        loop {
            let mut unit = None;
            for clause in &cnf.clauses {
                let mut unassigned = None;
                let mut free = 0;
                let mut sat = false;
                for &l in clause {
                    match assign[l.unsigned_abs() as usize - 1] {
                        Some(v) if v == (l > 0) => {
                            sat = true;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            free += 1;
                            unassigned = Some(l);
                        }
                    }
                }
                if sat {
                    continue;
                }
                match free {
                    0 => return false,
                    1 => {
                        unit = unassigned;
                        break;
                    }
                    _ => {}
                }
            }
            match unit {
                Some(l) => assign[l.unsigned_abs() as usize - 1] = Some(l > 0),
                None => break,
            }
        }
        let Some(var) = assign.iter().position(Option::is_none) else {
            return true;
        };
        for value in [true, false] {
            let mut trial = assign.clone();
            trial[var] = Some(value);
            if rec(cnf, &mut trial) {
                *assign = trial;
                return true;
            }
        }
        false
    }
    let mut assign = vec![None; cnf.num_vars];
    if rec(cnf, &mut assign) {
        Some(assign.into_iter().map(|v| v.unwrap_or(false)).collect())
    } else {
        None
    }
}
