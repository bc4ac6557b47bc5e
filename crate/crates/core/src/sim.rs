//! Functional simulation of the Ising machine: the logical QUBO, and the
//! same problem as mapped onto per-block crossbars.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::Clustering;
use crate::qubo::{Qubo, SpinState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("spin {0} is not hosted by any block")]
    UnknownSpin(usize),
    #[error("clustering does not match the problem: {0}")]
    Inconsistent(String),
    #[error("state has {got} spins, machine has {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
}

/// One IMC block. Crossbar rows are the external inputs followed by the
/// local spins; there is one column per local spin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappedBlock {
    pub locals: Vec<usize>,
    pub externals: Vec<usize>,
    /// Row-major `(externals + locals) × locals`.
    pub weights: Vec<i64>,
    /// Always-on bias row, one entry per local spin.
    pub bias: Vec<i64>,
}

impl MappedBlock {
    pub fn rows(&self) -> usize {
        self.externals.len() + self.locals.len()
    }

    pub fn cols(&self) -> usize {
        self.locals.len()
    }

    pub fn weight(&self, row: usize, col: usize) -> i64 {
        self.weights[row * self.cols() + col]
    }

    pub fn weight_mut(&mut self, row: usize, col: usize) -> &mut i64 {
        let c = self.cols();
        &mut self.weights[row * c + col]
    }

    /// Crossbar column `col` read against the block's visible inputs.
    fn column_sum(&self, x: &SpinState, col: usize) -> i64 {
        let cols = self.cols();
        let mut acc = self.bias[col];
        let visible = self.externals.iter().chain(self.locals.iter());
        for (r, &s) in visible.enumerate() {
            if x.get(s) {
                acc += self.weights[r * cols + col];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappedMachine {
    pub blocks: Vec<MappedBlock>,
    /// `directory[spin] = (block, column)`.
    pub directory: Vec<(usize, usize)>,
    pub constant: i64,
}

/// Distributes the couplings of `q` over the blocks of `c`. Each coupling
/// `W_ij` lands in the column of `i` (row of `j`) and in the column of `j`
/// (row of `i`).
pub fn build_mapped_machine(q: &Qubo<i64>, c: &Clustering) -> Result<MappedMachine, SimError> {
    let n = q.n();
    let mut directory = vec![(usize::MAX, usize::MAX); n];
    for (b, cl) in c.clusters.iter().enumerate() {
        for (col, &s) in cl.members.iter().enumerate() {
            if s >= n {
                return Err(SimError::Inconsistent(format!("spin {s} out of range")));
            }
            if directory[s].0 != usize::MAX {
                return Err(SimError::Inconsistent(format!("spin {s} hosted twice")));
            }
            directory[s] = (b, col);
        }
    }
    if let Some(s) = directory.iter().position(|d| d.0 == usize::MAX) {
        return Err(SimError::UnknownSpin(s));
    }
    let mut blocks = Vec::with_capacity(c.len());
    for (b, cl) in c.clusters.iter().enumerate() {
        let locals = cl.members.clone();
        let externals: Vec<usize> = cl.external_inputs().collect();
        let mut row_of = std::collections::HashMap::new();
        for (r, &s) in externals.iter().chain(locals.iter()).enumerate() {
            row_of.insert(s, r);
        }
        let cols = locals.len();
        let mut block = MappedBlock {
            weights: vec![0; (externals.len() + cols) * cols],
            bias: locals.iter().map(|&s| q.linear()[s]).collect(),
            locals,
            externals,
        };
        for col in 0..cols {
            let i = block.locals[col];
            for &(j, w) in q.row(i) {
                let Some(&r) = row_of.get(&j) else {
                    return Err(SimError::Inconsistent(format!(
                        "block {b} cannot see neighbor {j} of spin {i}"
                    )));
                };
                *block.weight_mut(r, col) = w;
            }
        }
        blocks.push(block);
    }
    Ok(MappedMachine {
        blocks,
        directory,
        constant: q.constant(),
    })
}

impl MappedMachine {
    pub fn n(&self) -> usize {
        self.directory.len()
    }

    fn check_state(&self, x: &SpinState) -> Result<(), SimError> {
        if x.len() != self.n() {
            return Err(SimError::StateLength {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Energy from block-computed fields only:
    /// `E = W0 + Σ_{x_i=1} (h_i + W1_i) / 2`.
    pub fn energy(&self, x: &SpinState) -> Result<i64, SimError> {
        self.check_state(x)?;
        let twice: i64 = x
            .ones()
            .map(|i| {
                let (b, col) = self.directory[i];
                let blk = &self.blocks[b];
                blk.column_sum(x, col) + blk.bias[col]
            })
            .sum();
        Ok(self.constant + twice / 2)
    }
}

/// Field of spin `i` computed from its block's crossbar column alone.
pub fn mapped_field(m: &MappedMachine, x: &SpinState, i: usize) -> Result<i64, SimError> {
    m.check_state(x)?;
    let &(b, col) = m.directory.get(i).ok_or(SimError::UnknownSpin(i))?;
    Ok(m.blocks[b].column_sum(x, col))
}

/// Geometric cooling from `t_start` to `t_end` over `sweeps` sweeps of
/// `n` proposed flips each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Stop as soon as an energy at or below this value is seen.
    #[serde(default)]
    pub target_energy: Option<i64>,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            t_start: 3.0,
            t_end: 0.05,
            target_energy: None,
        }
    }
}

impl AnnealSchedule {
    pub fn check(&self) -> Result<(), SimError> {
        if self.sweeps == 0 {
            return Err(SimError::BadSchedule("sweeps must be at least 1".into()));
        }
        if !(self.t_end > 0.0 && self.t_start >= self.t_end && self.t_start.is_finite()) {
            return Err(SimError::BadSchedule(format!(
                "need t_start >= t_end > 0, got {} and {}",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    /// Mild cooling from 0.8 to 0.6, stopping at energy 0, sized to at
    /// most `max_flips` proposals on `n` spins.
    pub fn satisfiability(n: usize, max_flips: u64) -> Self {
        Self {
            sweeps: (max_flips / n.max(1) as u64).max(1) as usize,
            t_start: 0.8,
            t_end: 0.6,
            target_energy: Some(0),
        }
    }

    pub fn temperature(&self, sweep: usize) -> f64 {
        if self.sweeps == 1 {
            return self.t_start;
        }
        let frac = sweep as f64 / (self.sweeps - 1) as f64;
        self.t_start * (self.t_end / self.t_start).powf(frac)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnealResult {
    pub state: SpinState,
    pub energy: i64,
    pub flips_proposed: u64,
    /// Energy after every sweep, for trajectory comparison.
    pub trace: Vec<i64>,
}

fn accept(delta: i64, t: f64, rng: &mut ChaCha8Rng) -> bool {
    if delta <= 0 {
        return true;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    (delta as f64) <= -t * u.ln()
}

/// Sequential single-flip Metropolis shared by both machines; `field`
/// supplies `h_i(x)`.
fn metropolis(
    n: usize,
    start_energy: impl FnOnce(&SpinState) -> i64,
    mut field: impl FnMut(&SpinState, usize) -> i64,
    s: &AnnealSchedule,
    seed: u64,
) -> AnnealResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = SpinState::from_bools((0..n).map(|_| rng.gen::<bool>()).collect());
    let mut e = start_energy(&x);
    let mut best = (x.clone(), e);
    let mut flips = 0u64;
    let mut trace = Vec::with_capacity(s.sweeps);
    let done = |best: i64| s.target_energy.is_some_and(|t| best <= t);
    if n == 0 || done(e) {
        trace.push(e);
        return AnnealResult {
            state: best.0,
            energy: best.1,
            flips_proposed: 0,
            trace,
        };
    }
    'outer: for sweep in 0..s.sweeps {
        let t = s.temperature(sweep);
        for i in 0..n {
            flips += 1;
            let h = field(&x, i);
            let delta = if x.get(i) { -h } else { h };
            if accept(delta, t, &mut rng) {
                x.flip(i);
                e += delta;
                if e < best.1 {
                    best = (x.clone(), e);
                    if done(e) {
                        trace.push(e);
                        break 'outer;
                    }
                }
            }
        }
        trace.push(e);
    }
    AnnealResult {
        state: best.0,
        energy: best.1,
        flips_proposed: flips,
        trace,
    }
}

/// Anneals the logical problem; returns the best state seen.
pub fn anneal(q: &Qubo<i64>, s: &AnnealSchedule, seed: u64) -> Result<AnnealResult, SimError> {
    s.check()?;
    Ok(metropolis(
        q.n(),
        |x| q.energy(x).expect("state length matches"),
        |x, i| q.field_unchecked(x, i),
        s,
        seed,
    ))
}

/// Same update order and random stream as [`anneal`], with fields read
/// from the block crossbars.
pub fn anneal_mapped(
    m: &MappedMachine,
    s: &AnnealSchedule,
    seed: u64,
) -> Result<AnnealResult, SimError> {
    s.check()?;
    Ok(metropolis(
        m.n(),
        |x| m.energy(x).expect("state length matches"),
        |x, i| {
            let (b, col) = m.directory[i];
            m.blocks[b].column_sum(x, col)
        },
        s,
        seed,
    ))
}

/// Block-synchronous variant: within each block, every local spin decides
/// from the same snapshot and accepted flips land together. Blocks take
/// turns. No energy-monotonicity guarantee.
pub fn anneal_mapped_synchronous(
    m: &MappedMachine,
    s: &AnnealSchedule,
    seed: u64,
) -> Result<AnnealResult, SimError> {
    s.check()?;
    let n = m.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = SpinState::from_bools((0..n).map(|_| rng.gen::<bool>()).collect());
    let mut e = m.energy(&x)?;
    let mut best = (x.clone(), e);
    let mut flips = 0u64;
    let mut trace = Vec::with_capacity(s.sweeps);
    'outer: for sweep in 0..s.sweeps {
        let t = s.temperature(sweep);
        for blk in &m.blocks {
            let mut flipped = Vec::new();
            for (col, &i) in blk.locals.iter().enumerate() {
                flips += 1;
                let h = blk.column_sum(&x, col);
                let delta = if x.get(i) { -h } else { h };
                if accept(delta, t, &mut rng) {
                    flipped.push(i);
                }
            }
            if flipped.is_empty() {
                continue;
            }
            for &i in &flipped {
                x.flip(i);
            }
            e = m.energy(&x)?;
            if e < best.1 {
                best = (x.clone(), e);
                if s.target_energy.is_some_and(|t| e <= t) {
                    trace.push(e);
                    break 'outer;
                }
            }
        }
        trace.push(e);
    }
    Ok(AnnealResult {
        state: best.0,
        energy: best.1,
        flips_proposed: flips,
        trace,
    })
}

/// Independent restarts in parallel; the lowest energy wins, ties going to
/// the earlier seed.
pub fn anneal_restarts(
    q: &Qubo<i64>,
    s: &AnnealSchedule,
    seeds: &[u64],
) -> Result<(u64, AnnealResult), SimError> {
    s.check()?;
    let runs: Vec<(u64, AnnealResult)> = seeds
        .par_iter()
        .map(|&seed| (seed, anneal(q, s, seed).expect("schedule checked")))
        .collect();
    runs.into_iter()
        .min_by_key(|(_, r)| r.energy)
        .ok_or_else(|| SimError::BadSchedule("no seeds given".into()))
}

/// Solver output record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: String,
    pub seed: u64,
    pub schedule: AnnealSchedule,
    pub best_energy: i64,
    pub state: SpinState,
    pub satisfied: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{ffd_pack, ClusterParams};
    use crate::qubo::QuboBuilder;
    use crate::sat::{quadratize, Cnf, DEFAULT_PENALTY};

    fn example() -> Qubo<i64> {
        let mut b = QuboBuilder::<i64>::new(4);
        for (i, j, w) in [(0, 1, 3), (0, 2, -2), (1, 2, 5), (2, 3, -7)] {
            b.add_coupling(i, j, w).unwrap();
        }
        for (i, w) in [(0, 1), (1, -4), (2, 2), (3, 6)] {
            b.add_linear(i, w).unwrap();
        }
        b.add_constant(11);
        b.build()
    }

    #[test]
    fn single_cluster_has_no_external_rows() {
        let q = example();
        let c = ffd_pack(&q, &ClusterParams::new(8, 8)).unwrap();
        let m = build_mapped_machine(&q, &c).unwrap();
        assert_eq!(m.blocks.len(), 1);
        assert!(m.blocks[0].externals.is_empty());
        assert_eq!(m.blocks[0].rows(), 4);
    }

    #[test]
    fn worked_example_rows_and_exhaustive_equivalence() {
        let q = example();
        // Clusters {2}, {0,1}, {3}.
        let c = ffd_pack(&q, &ClusterParams::new(3, 2)).unwrap();
        let m = build_mapped_machine(&q, &c).unwrap();
        let (b, _) = m.directory[0];
        let blk = &m.blocks[b];
        assert_eq!(blk.locals, vec![0, 1]);
        assert_eq!(blk.externals, vec![2]);
        // Local rows hold W_01 in both directions; external row holds spin 2.
        assert_eq!(blk.weight(1, 1), 3);
        assert_eq!(blk.weight(2, 0), 3);
        assert_eq!(blk.weight(0, 0), -2);
        assert_eq!(blk.weight(0, 1), 5);
        for idx in 0..16 {
            let x = SpinState::from_index(4, idx);
            for i in 0..4 {
                assert_eq!(
                    mapped_field(&m, &x, i).unwrap(),
                    q.local_field(&x, i).unwrap()
                );
            }
            assert_eq!(m.energy(&x).unwrap(), q.energy(&x).unwrap());
        }
    }

    #[test]
    fn corrupted_weight_is_detected() {
        let q = example();
        let c = ffd_pack(&q, &ClusterParams::new(3, 2)).unwrap();
        let mut m = build_mapped_machine(&q, &c).unwrap();
        *m.blocks[0].weight_mut(0, 0) += 1;
        let differs = (0..16).any(|idx| {
            let x = SpinState::from_index(4, idx);
            (0..4).any(|i| mapped_field(&m, &x, i).unwrap() != q.local_field(&x, i).unwrap())
        });
        assert!(differs);
    }

    #[test]
    fn zero_coupling_field_is_bias() {
        let mut b = QuboBuilder::<i64>::new(2);
        b.add_linear(0, 4).unwrap();
        b.add_linear(1, -1).unwrap();
        let q = b.build();
        let c = ffd_pack(&q, &ClusterParams::new(1, 1)).unwrap();
        let m = build_mapped_machine(&q, &c).unwrap();
        let x = SpinState::from_bools(vec![true, true]);
        assert_eq!(mapped_field(&m, &x, 0).unwrap(), 4);
        assert_eq!(mapped_field(&m, &x, 1).unwrap(), -1);
        assert_eq!(mapped_field(&m, &x, 2), Err(SimError::UnknownSpin(2)));
    }

    #[test]
    fn inconsistent_clustering_rejected() {
        let q = example();
        let mut c = ffd_pack(&q, &ClusterParams::new(3, 2)).unwrap();
        c.clusters[0].inputs.clear();
        assert!(build_mapped_machine(&q, &c).is_err());
    }

    #[test]
    fn zero_weight_problem_returns_constant() {
        let mut b = QuboBuilder::<i64>::new(3);
        b.add_constant(-5);
        let r = anneal(&b.build(), &AnnealSchedule::default(), 1).unwrap();
        assert_eq!(r.energy, -5);
    }

    #[test]
    fn single_clause_reaches_zero() {
        let cnf = Cnf::new(3, vec![vec![1, -2, 3]]).unwrap();
        let (q, _) = quadratize(&cnf, DEFAULT_PENALTY).unwrap();
        let min = (0..1u64 << q.n())
            .map(|k| q.energy(&SpinState::from_index(q.n(), k)).unwrap())
            .min()
            .unwrap();
        assert_eq!(min, 0);
        let s = AnnealSchedule {
            sweeps: 100,
            ..Default::default()
        };
        for seed in 0..10 {
            let r = anneal(&q, &s, seed).unwrap();
            assert_eq!(r.energy, 0);
            assert_eq!(q.energy(&r.state).unwrap(), r.energy);
        }
    }

    #[test]
    fn mapped_trajectory_matches_logical() {
        let q = example();
        let s = AnnealSchedule {
            sweeps: 50,
            ..Default::default()
        };
        for params in [ClusterParams::new(8, 8), ClusterParams::new(3, 2)] {
            let m = build_mapped_machine(&q, &ffd_pack(&q, &params).unwrap()).unwrap();
            for seed in 0..5 {
                assert_eq!(
                    anneal(&q, &s, seed).unwrap(),
                    anneal_mapped(&m, &s, seed).unwrap()
                );
            }
        }
    }

    #[test]
    fn synchronous_mode_reports_true_energy() {
        let q = example();
        let m =
            build_mapped_machine(&q, &ffd_pack(&q, &ClusterParams::new(3, 2)).unwrap()).unwrap();
        let r = anneal_mapped_synchronous(&m, &AnnealSchedule::default(), 3).unwrap();
        assert_eq!(q.energy(&r.state).unwrap(), r.energy);
        let ground = (0..16)
            .map(|k| q.energy(&SpinState::from_index(4, k)).unwrap())
            .min()
            .unwrap();
        assert!(r.energy >= ground);
    }

    #[test]
    fn schedule_validation() {
        let bad = AnnealSchedule {
            t_start: 0.1,
            t_end: 1.0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        let s = AnnealSchedule::default();
        assert_eq!(s.temperature(0), s.t_start);
        assert!((s.temperature(s.sweeps - 1) - s.t_end).abs() < 1e-12);
    }

    #[test]
    fn restarts_pick_lowest() {
        let q = example();
        let (seed, r) = anneal_restarts(&q, &AnnealSchedule::default(), &[4, 5, 6]).unwrap();
        assert!([4, 5, 6].contains(&seed));
        assert_eq!(r, anneal(&q, &AnnealSchedule::default(), seed).unwrap());
    }
}
