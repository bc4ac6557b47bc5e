//! Subcommand logic, independent of argument parsing and file output.

use std::fmt::Write as _;

use anyhow::Result;
use fpia_core::cluster::{
    ffd_pack, utilization, validate, ClusterParams, Clustering, UtilizationReport,
};
use fpia_core::cost::{CostReport, TechParams};
use fpia_core::fabric::{Fabric, RoutingGraph};
use fpia_core::pipeline::{embed, EmbedConfig, EmbedError, Embedding};
use fpia_core::place_route::audit;
use fpia_core::search::ArchParams;
use fpia_core::sim::{
    anneal_restarts, build_mapped_machine, mapped_field, AnnealSchedule, SolveReport,
};
use fpia_core::{Qubo, SpinState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{load, Problem, ProblemSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(code: i32, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        Self::new(EXIT_OTHER, error)
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        let code = if e.is_infeasible() {
            EXIT_INFEASIBLE
        } else {
            EXIT_OTHER
        };
        Self::new(code, e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub const ANALYZE_HEADER: &str = "problem,N,vars,clauses,sparsity,max_fan_in,mean_fan_in,nonzero";

/// One stats row per loadable problem; failures are returned separately.
pub fn analyze(specs: &[ProblemSpec], penalty: i64) -> (String, Vec<String>) {
    let mut csv = format!("{ANALYZE_HEADER}\n");
    let mut errors = Vec::new();
    for spec in specs {
        match load(spec, penalty) {
            Ok(p) => {
                let s = p.qubo.stats();
                let (vars, clauses) = p.cnf.as_ref().map_or((String::new(), String::new()), |c| {
                    (c.num_vars.to_string(), c.clauses.len().to_string())
                });
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    p.name,
                    p.qubo.n(),
                    vars,
                    clauses,
                    s.sparsity,
                    s.max_fan_in,
                    s.mean_fan_in,
                    s.nonzero_count
                );
            }
            Err(e) => errors.push(format!("{}: {e:#}", spec.name())),
        }
    }
    (csv, errors)
}

pub struct Packed {
    pub clustering: Clustering,
    pub report: UtilizationReport,
}

pub fn pack(q: &Qubo<i64>, p: &ClusterParams) -> Result<Packed, CliError> {
    let clustering = ffd_pack(q, p).map_err(|e| {
        let code = if matches!(e, fpia_core::cluster::ClusterError::FanInExceeded { .. }) {
            EXIT_INFEASIBLE
        } else {
            EXIT_OTHER
        };
        CliError::new(code, e)
    })?;
    let violations = validate(&clustering, q, p);
    if !violations.is_empty() {
        return Err(CliError::new(
            EXIT_VERIFY,
            anyhow::anyhow!("packing failed validation: {violations:?}"),
        ));
    }
    let report = utilization(&clustering, q.n());
    Ok(Packed { clustering, report })
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub states: usize,
    pub field_mismatches: usize,
    pub energy_mismatches: usize,
    pub routing_violations: usize,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.field_mismatches == 0 && self.energy_mismatches == 0 && self.routing_violations == 0
    }
}

/// Compares block-computed fields against the logical problem on random
/// states and audits the routed design.
pub fn verify_embedding(
    q: &Qubo<i64>,
    e: &Embedding,
    states: usize,
    seed: u64,
) -> Result<Verification> {
    let m = build_mapped_machine(q, &e.clustering)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Verification {
        states,
        field_mismatches: 0,
        energy_mismatches: 0,
        routing_violations: 0,
    };
    for _ in 0..states {
        let x = SpinState::from_bools((0..q.n()).map(|_| rng.gen()).collect());
        for i in 0..q.n() {
            if mapped_field(&m, &x, i)? != q.local_field(&x, i)? {
                v.field_mismatches += 1;
            }
        }
        if m.energy(&x)? != q.energy(&x)? {
            v.energy_mismatches += 1;
        }
    }
    let graph = RoutingGraph::build(&Fabric::build(e.fabric)?);
    v.routing_violations = audit(&e.design, &e.netlist, &graph).len();
    Ok(v)
}

pub const COST_HEADER: &str =
    "problem,I,O,F_I,F_O,occupancy,seed,W,M,clusters,fpia_area,baseline_area,routing_area,TA,critical_path_ps";

pub fn cost_row(name: &str, arch: &ArchParams, seed: u64, e: &Embedding, c: &CostReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        name,
        arch.inputs,
        arch.outputs,
        arch.f_in,
        arch.f_out,
        arch.occupancy,
        seed,
        c.channel_width,
        c.grid,
        e.clustering.len(),
        c.fpia_area,
        c.baseline_area,
        c.routing_area,
        c.tiling_advantage,
        c.critical_path
    )
}

pub struct Embedded {
    pub embedding: Embedding,
    pub cost: CostReport,
    pub verification: Verification,
}

/// Full pipeline plus verification; a failed check is an error.
pub fn embed_problem(
    p: &Problem,
    arch: &ArchParams,
    tech: &TechParams,
    seed: u64,
    cfg: &EmbedConfig,
) -> Result<Embedded, CliError> {
    let fabric = arch.fabric(4, 3);
    let embedding = embed(&p.qubo, &fabric, arch.occupancy, seed, cfg)?;
    let cost = embedding
        .cost(tech, p.qubo.n())
        .map_err(|e| CliError::new(EXIT_OTHER, e))?;
    let verification = verify_embedding(&p.qubo, &embedding, 100, seed)?;
    if !verification.passed() {
        return Err(CliError::new(
            EXIT_VERIFY,
            anyhow::anyhow!("embedding verification failed: {verification:?}"),
        ));
    }
    Ok(Embedded {
        embedding,
        cost,
        verification,
    })
}

/// Anneals from each seed and keeps the best run. `satisfied` is judged on
/// the original CNF, so it is false for bare QUBO inputs.
pub fn solve(p: &Problem, schedule: &AnnealSchedule, seeds: &[u64]) -> Result<SolveReport> {
    let (seed, r) = anneal_restarts(&p.qubo, schedule, seeds)?;
    let satisfied = match (&p.cnf, &p.map) {
        (Some(cnf), Some(map)) => cnf.is_satisfied_by(&map.strip(&r.state)),
        _ => false,
    };
    Ok(SolveReport {
        problem: p.name.clone(),
        seed,
        schedule: *schedule,
        best_energy: r.energy,
        state: r.state,
        satisfied,
    })
}
