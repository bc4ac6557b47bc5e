//! Fan-in-constrained First-Fit-Decreasing packing of spins into IMC clusters.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Qubo, Weight};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("spin {spin} has fan-in {fan_in}, more than the {max_inputs} block inputs")]
    FanInExceeded {
        spin: usize,
        fan_in: usize,
        max_inputs: usize,
    },
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
}

/// Which neighbors count against a cluster's input budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputAccounting {
    /// Every distinct neighbor of a member, co-clustered or not.
    #[default]
    AllNeighbors,
    /// Only neighbors living in other clusters.
    ExternalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub max_inputs: usize,
    pub max_outputs: usize,
    pub occupancy: f64,
    #[serde(default)]
    pub accounting: InputAccounting,
}

impl ClusterParams {
    pub fn new(max_inputs: usize, max_outputs: usize) -> Self {
        Self {
            max_inputs,
            max_outputs,
            occupancy: 1.0,
            accounting: InputAccounting::AllNeighbors,
        }
    }

    pub fn with_occupancy(mut self, occupancy: f64) -> Self {
        self.occupancy = occupancy;
        self
    }

    /// `ceil(occupancy · O)`, tolerant of binary rounding (0.9·40 is 36).
    pub fn spin_cap(&self) -> usize {
        ((self.occupancy * self.max_outputs as f64) - 1e-9)
            .ceil()
            .max(0.0) as usize
    }

    pub fn check(&self) -> Result<(), ClusterError> {
        if self.max_inputs == 0 || self.max_outputs == 0 {
            return Err(ClusterError::InvalidParams(
                "max_inputs and max_outputs must be positive".into(),
            ));
        }
        if !(self.occupancy > 0.0 && self.occupancy <= 1.0) {
            return Err(ClusterError::InvalidParams(format!(
                "occupancy {} outside (0, 1]",
                self.occupancy
            )));
        }
        if self.spin_cap() == 0 {
            return Err(ClusterError::InvalidParams(
                "spin cap rounds to zero".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Spins hosted by the block, ascending.
    pub members: Vec<usize>,
    /// Union of all members' neighbors, ascending.
    pub inputs: Vec<usize>,
}

impl Cluster {
    /// Inputs driven from other clusters.
    pub fn external_inputs(&self) -> impl Iterator<Item = usize> + '_ {
        self.inputs
            .iter()
            .copied()
            .filter(|s| self.members.binary_search(s).is_err())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// `owner[s]` is the cluster holding spin `s`.
    pub fn owners(&self, n: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; n];
        for (c, cl) in self.clusters.iter().enumerate() {
            for &s in &cl.members {
                if s < n {
                    owner[s] = c;
                }
            }
        }
        owner
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("clustering serialization is infallible")
    }
}

struct OpenCluster {
    members: Vec<usize>,
    member_set: HashSet<usize>,
    union: HashSet<usize>,
}

impl OpenCluster {
    fn input_count_with(&self, nbrs: &[usize], spin: usize, accounting: InputAccounting) -> usize {
        let added = nbrs.iter().filter(|j| !self.union.contains(j)).count();
        let union_size = self.union.len() + added;
        match accounting {
            InputAccounting::AllNeighbors => union_size,
            InputAccounting::ExternalOnly => {
                let mut internal = self
                    .member_set
                    .iter()
                    .filter(|m| self.union.contains(m))
                    .count();
                internal += nbrs
                    .iter()
                    .filter(|j| self.member_set.contains(j) && !self.union.contains(j))
                    .count();
                if self.union.contains(&spin) {
                    internal += 1;
                }
                union_size - internal
            }
        }
    }
}

/// Greedy FFD packing: spins in decreasing fan-in order (ties by index) go
/// into the first cluster with a free spin slot whose input union stays
/// within `max_inputs`; otherwise a new cluster is opened.
pub fn ffd_pack<W: Weight>(q: &Qubo<W>, p: &ClusterParams) -> Result<Clustering, ClusterError> {
    p.check()?;
    let n = q.n();
    for s in 0..n {
        if q.fan_in(s) > p.max_inputs {
            return Err(ClusterError::FanInExceeded {
                spin: s,
                fan_in: q.fan_in(s),
                max_inputs: p.max_inputs,
            });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| q.fan_in(b).cmp(&q.fan_in(a)).then(a.cmp(&b)));

    let cap = p.spin_cap();
    let mut open: Vec<OpenCluster> = Vec::new();
    // Index of the first cluster that may still have a free spin slot.
    let mut first_open = 0;
    for s in order {
        let nbrs: Vec<usize> = q.neighbors(s).collect();
        let target = open[first_open..]
            .iter()
            .position(|c| {
                c.members.len() < cap && c.input_count_with(&nbrs, s, p.accounting) <= p.max_inputs
            })
            .map(|k| k + first_open);
        let idx = match target {
            Some(k) => k,
            None => {
                open.push(OpenCluster {
                    members: Vec::new(),
                    member_set: HashSet::new(),
                    union: HashSet::new(),
                });
                open.len() - 1
            }
        };
        let c = &mut open[idx];
        c.members.push(s);
        c.member_set.insert(s);
        c.union.extend(nbrs);
        while first_open < open.len() && open[first_open].members.len() >= cap {
            first_open += 1;
        }
    }
    let clusters = open
        .into_iter()
        .map(|c| {
            let mut members = c.members;
            members.sort_unstable();
            let mut inputs: Vec<usize> = c.union.into_iter().collect();
            inputs.sort_unstable();
            Cluster { members, inputs }
        })
        .collect();
    Ok(Clustering { clusters })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    /// `n² / used_cells`; infinite when no cell is used.
    pub improvement: f64,
    /// `Σ_j |inputs_j| · |members_j|`.
    pub used_cells: u64,
    /// Same ratio counting only external inputs.
    pub improvement_external: f64,
    pub used_cells_external: u64,
}

fn ratio(n: usize, used: u64) -> f64 {
    if used == 0 {
        f64::INFINITY
    } else {
        (n as f64 * n as f64) / used as f64
    }
}

pub fn utilization(c: &Clustering, n: usize) -> UtilizationReport {
    let used_cells: u64 = c
        .clusters
        .iter()
        .map(|cl| (cl.inputs.len() * cl.members.len()) as u64)
        .sum();
    let used_cells_external: u64 = c
        .clusters
        .iter()
        .map(|cl| (cl.external_inputs().count() * cl.members.len()) as u64)
        .sum();
    UtilizationReport {
        improvement: ratio(n, used_cells),
        used_cells,
        improvement_external: ratio(n, used_cells_external),
        used_cells_external,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SpinOutOfRange {
        cluster: usize,
        spin: usize,
    },
    DuplicateSpin {
        spin: usize,
    },
    MissingSpin {
        spin: usize,
    },
    EmptyCluster {
        cluster: usize,
    },
    TooManySpins {
        cluster: usize,
        count: usize,
        cap: usize,
    },
    TooManyInputs {
        cluster: usize,
        count: usize,
        max: usize,
    },
    WrongInputUnion {
        cluster: usize,
    },
}

/// Re-derives every input union from `q` and checks all clustering
/// invariants. Returns the list of violations (empty when valid).
pub fn validate<W: Weight>(c: &Clustering, q: &Qubo<W>, p: &ClusterParams) -> Vec<Violation> {
    let n = q.n();
    let mut violations = Vec::new();
    let mut seen = vec![false; n];
    let cap = p.spin_cap();
    for (k, cl) in c.clusters.iter().enumerate() {
        if cl.members.is_empty() {
            violations.push(Violation::EmptyCluster { cluster: k });
        }
        if cl.members.len() > cap {
            violations.push(Violation::TooManySpins {
                cluster: k,
                count: cl.members.len(),
                cap,
            });
        }
        let mut union = HashSet::new();
        for &s in &cl.members {
            if s >= n {
                violations.push(Violation::SpinOutOfRange {
                    cluster: k,
                    spin: s,
                });
                continue;
            }
            if seen[s] {
                violations.push(Violation::DuplicateSpin { spin: s });
            }
            seen[s] = true;
            union.extend(q.neighbors(s));
        }
        let stored: HashSet<usize> = cl.inputs.iter().copied().collect();
        if stored != union || stored.len() != cl.inputs.len() {
            violations.push(Violation::WrongInputUnion { cluster: k });
        }
        let members: HashSet<usize> = cl.members.iter().copied().collect();
        let count = match p.accounting {
            InputAccounting::AllNeighbors => union.len(),
            InputAccounting::ExternalOnly => union.difference(&members).count(),
        };
        if count > p.max_inputs {
            violations.push(Violation::TooManyInputs {
                cluster: k,
                count,
                max: p.max_inputs,
            });
        }
    }
    for (s, ok) in seen.iter().enumerate() {
        if !ok {
            violations.push(Violation::MissingSpin { spin: s });
        }
    }
    violations
}
