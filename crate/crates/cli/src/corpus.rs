//! Benchmark problems: DIMACS or QUBO files and seeded 3SAT generators.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fpia_core::sat::{
    gen_random_3sat, parse_dimacs, quadratize, solve_dpll, Cnf, QuadratizationMap,
};
use fpia_core::Qubo;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// `.cnf` (DIMACS) or `.json` (QUBO document).
    File {
        path: PathBuf,
        #[serde(default)]
        name: Option<String>,
    },
    Random3sat {
        vars: usize,
        ratio: f64,
        seed: u64,
    },
    /// Satisfiable uniform random 3SAT with an exact clause count, the way
    /// SATLIB's `uf` sets are built: draw until a complete solver finds a model.
    Uniform {
        vars: usize,
        clauses: usize,
        seed: u64,
    },
}

impl ProblemSpec {
    pub fn uf(vars: usize, clauses: usize, seed: u64) -> Self {
        ProblemSpec::Uniform {
            vars,
            clauses,
            seed,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ProblemSpec::File { name: Some(n), .. } => n.clone(),
            ProblemSpec::File { path, .. } => path.file_stem().map_or_else(
                || path.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            ),
            ProblemSpec::Random3sat { vars, ratio, seed } => format!("r3sat{vars}-{ratio}-s{seed}"),
            ProblemSpec::Uniform {
                vars,
                clauses,
                seed,
            } => format!("uf{vars}-{clauses}-s{seed}"),
        }
    }

    /// Resolves relative file paths against `base`.
    pub fn rebased(&self, base: &Path) -> Self {
        match self {
            ProblemSpec::File { path, name } if path.is_relative() => ProblemSpec::File {
                path: base.join(path),
                name: name.clone().or_else(|| Some(self.name())),
            },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub cnf: Option<Cnf>,
    pub map: Option<QuadratizationMap>,
    pub qubo: Arc<Qubo<i64>>,
}

const MAX_DRAWS: u64 = 10_000;

pub fn uniform_satisfiable(vars: usize, clauses: usize, seed: u64) -> Result<Cnf> {
    let ratio = clauses as f64 / vars as f64;
    for k in 0..MAX_DRAWS {
        let cnf = gen_random_3sat(vars, ratio, seed.wrapping_mul(MAX_DRAWS).wrapping_add(k))?;
        debug_assert_eq!(cnf.clauses.len(), clauses);
        if solve_dpll(&cnf).is_some() {
            return Ok(cnf);
        }
    }
    bail!("no satisfiable draw for uf{vars}-{clauses} seed {seed} in {MAX_DRAWS} tries")
}

fn from_cnf(name: String, cnf: Cnf, penalty: i64) -> Result<Problem> {
    let (q, map) = quadratize(&cnf, penalty)?;
    Ok(Problem {
        name,
        cnf: Some(cnf),
        map: Some(map),
        qubo: Arc::new(q),
    })
}

pub fn read_cnf(path: &Path) -> Result<Cnf> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load(spec: &ProblemSpec, penalty: i64) -> Result<Problem> {
    let name = spec.name();
    match spec {
        ProblemSpec::File { path, .. } => {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext.eq_ignore_ascii_case("json") {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let q = Qubo::<i64>::from_json(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                Ok(Problem {
                    name,
                    cnf: None,
                    map: None,
                    qubo: Arc::new(q),
                })
            } else {
                from_cnf(name, read_cnf(path)?, penalty)
            }
        }
        ProblemSpec::Random3sat { vars, ratio, seed } => {
            from_cnf(name, gen_random_3sat(*vars, *ratio, *seed)?, penalty)
        }
        ProblemSpec::Uniform {
            vars,
            clauses,
            seed,
        } => from_cnf(name, uniform_satisfiable(*vars, *clauses, *seed)?, penalty),
    }
}

/// Command-line problem argument: a path, or `uf:VARS:CLAUSES:SEED`, or
/// `r3sat:VARS:RATIO:SEED`.
pub fn parse_problem_arg(arg: &str) -> Result<ProblemSpec> {
    let parts: Vec<&str> = arg.split(':').collect();
    match parts.as_slice() {
        ["uf", v, c, s] => Ok(ProblemSpec::Uniform {
            vars: v.parse()?,
            clauses: c.parse()?,
            seed: s.parse()?,
        }),
        ["r3sat", v, r, s] => Ok(ProblemSpec::Random3sat {
            vars: v.parse()?,
            ratio: r.parse()?,
            seed: s.parse()?,
        }),
        _ => Ok(ProblemSpec::File {
            path: PathBuf::from(arg),
            name: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpia_core::sat::DEFAULT_PENALTY;

    #[test]
    fn uniform_is_satisfiable_and_sized() {
        let cnf = uniform_satisfiable(20, 91, 3).unwrap();
        assert_eq!(cnf.clauses.len(), 91);
        assert!(solve_dpll(&cnf).is_some());
        let p = load(&ProblemSpec::uf(20, 91, 3), DEFAULT_PENALTY).unwrap();
        assert_eq!(p.qubo.n(), 20 + 91);
        assert_eq!(p.name, "uf20-91-s3");
    }

    #[test]
    fn problem_args() {
        assert_eq!(
            parse_problem_arg("uf:20:91:1").unwrap(),
            ProblemSpec::uf(20, 91, 1)
        );
        assert!(matches!(
            parse_problem_arg("r3sat:50:4.26:2").unwrap(),
            ProblemSpec::Random3sat { vars: 50, .. }
        ));
        assert!(matches!(
            parse_problem_arg("a/b.cnf").unwrap(),
            ProblemSpec::File { .. }
        ));
        assert!(parse_problem_arg("uf:x:1:1").is_err());
    }

    #[test]
    fn spec_serde_is_tagged() {
        let s = serde_json::to_string(&ProblemSpec::uf(20, 91, 1)).unwrap();
        assert_eq!(s, r#"{"kind":"uniform","vars":20,"clauses":91,"seed":1}"#);
    }
}
