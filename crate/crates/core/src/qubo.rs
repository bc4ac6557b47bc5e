//! QUBO problems: `E(x) = ½·Σ_{i≠j} W2_ij x_i x_j + Σ_i W1_i x_i + W0` over binary `x`.
//!
//! The quadratic matrix is kept as a symmetric adjacency list without a
//! diagonal. Diagonal terms handed to the builder are folded into the linear
//! vector (`x² = x` for binary variables).

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::Zero;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuboError {
    #[error("state has {got} spins but the problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("spin value {0} is not binary")]
    NonBinarySpin(u8),
    #[error("malformed QUBO document: {0}")]
    Json(#[from] serde_json::Error),
}

/// Numeric type usable as a coupling weight.
///
/// `i64` is the default and the only mode in which embedding checks are
/// bit-exact. `f64` exists for problems with fractional offsets.
pub trait Weight:
    Copy
    + Debug
    + PartialEq
    + PartialOrd
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn from_i64(v: i64) -> Self;
    fn to_f64(self) -> f64;
}

impl Weight for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Weight for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// A binary assignment to every variable of a QUBO.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct SpinState(Vec<bool>);

impl SpinState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Builds the state whose bit `i` is bit `i` of `index` (used for enumeration).
    pub fn from_index(n: usize, index: u64) -> Self {
        Self((0..n).map(|i| (index >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
    }
}

impl TryFrom<Vec<u8>> for SpinState {
    type Error = QuboError;

    fn try_from(values: Vec<u8>) -> Result<Self, Self::Error> {
        values
            .into_iter()
            .map(|v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(QuboError::NonBinarySpin(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(SpinState)
    }
}

impl From<SpinState> for Vec<u8> {
    fn from(s: SpinState) -> Self {
        s.0.into_iter().map(u8::from).collect()
    }
}

/// Sparsity and fan-in statistics of a coupling matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuboStats {
    /// `n² / nonzero_count`, or `f64::INFINITY` for an edgeless problem.
    pub sparsity: f64,
    pub max_fan_in: usize,
    pub mean_fan_in: f64,
    /// Stored off-diagonal entries, counting both `(i,j)` and `(j,i)`.
    pub nonzero_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qubo<W = i64> {
    n: usize,
    /// Row `i` holds `(j, W2_ij)` sorted by `j`; mirrored in row `j`.
    rows: Vec<Vec<(usize, W)>>,
    linear: Vec<W>,
    constant: W,
}

/// Accumulates terms and produces a canonical [`Qubo`].
#[derive(Debug, Clone)]
pub struct QuboBuilder<W = i64> {
    n: usize,
    pairs: BTreeMap<(usize, usize), W>,
    linear: Vec<W>,
    constant: W,
}

impl<W: Weight> QuboBuilder<W> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            pairs: BTreeMap::new(),
            linear: vec![W::zero(); n],
            constant: W::zero(),
        }
    }

    fn check(&self, i: usize) -> Result<(), QuboError> {
        if i >= self.n {
            Err(QuboError::IndexOutOfRange {
                index: i,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    /// Adds `w` to the symmetric pair `W2_ij = W2_ji`, i.e. adds `w·x_i·x_j`
    /// to the energy. A diagonal pair becomes a linear term.
    pub fn add_coupling(&mut self, i: usize, j: usize, w: W) -> Result<&mut Self, QuboError> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            self.linear[i] += w;
        } else {
            let key = (i.min(j), i.max(j));
            *self.pairs.entry(key).or_insert_with(W::zero) += w;
        }
        Ok(self)
    }

    /// Adds a raw matrix entry `W2_ii = d`. Contributes `½·d·x_i` in the
    /// matrix form, which is what gets folded into the linear vector.
    pub fn add_diagonal(&mut self, i: usize, d: W) -> Result<&mut Self, QuboError>
    where
        W: std::ops::Div<Output = W>,
    {
        self.check(i)?;
        self.linear[i] += d / W::from_i64(2);
        Ok(self)
    }

    pub fn add_linear(&mut self, i: usize, w: W) -> Result<&mut Self, QuboError> {
        self.check(i)?;
        self.linear[i] += w;
        Ok(self)
    }

    pub fn add_constant(&mut self, w: W) -> &mut Self {
        self.constant += w;
        self
    }

    pub fn build(&self) -> Qubo<W> {
        let mut rows = vec![Vec::new(); self.n];
        for (&(i, j), &w) in &self.pairs {
            if w.is_zero() {
                continue;
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        Qubo {
            n: self.n,
            rows,
            linear: self.linear.clone(),
            constant: self.constant,
        }
    }
}

impl<W: Weight> Qubo<W> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn linear(&self) -> &[W] {
        &self.linear
    }

    pub fn constant(&self) -> W {
        self.constant
    }

    /// Nonzero couplings of spin `i` as `(j, W2_ij)`, sorted by `j`.
    pub fn row(&self, i: usize) -> &[(usize, W)] {
        &self.rows[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().map(|&(j, _)| j)
    }

    pub fn fan_in(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn coupling(&self, i: usize, j: usize) -> W {
        match self.rows[i].binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => W::zero(),
        }
    }

    /// Upper-triangle entries `(i, j, w)` with `i < j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, W)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    fn check_state(&self, x: &SpinState) -> Result<(), QuboError> {
        if x.len() != self.n {
            return Err(QuboError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, x: &SpinState) -> Result<W, QuboError> {
        self.check_state(x)?;
        let mut e = self.constant;
        for i in x.ones() {
            e += self.linear[i];
            for &(j, w) in &self.rows[i] {
                if j > i && x.get(j) {
                    e += w;
                }
            }
        }
        Ok(e)
    }

    /// `Σ_{j≠i} W2_ij x_j + W1_i`: the energy change of raising `x_i` from 0 to 1.
    pub fn local_field(&self, x: &SpinState, i: usize) -> Result<W, QuboError> {
        self.check_state(x)?;
        if i >= self.n {
            return Err(QuboError::IndexOutOfRange {
                index: i,
                n: self.n,
            });
        }
        Ok(self.field_unchecked(x, i))
    }

    pub(crate) fn field_unchecked(&self, x: &SpinState, i: usize) -> W {
        let mut f = self.linear[i];
        for &(j, w) in &self.rows[i] {
            if x.get(j) {
                f += w;
            }
        }
        f
    }

    pub fn stats(&self) -> QuboStats {
        let nonzero_count: usize = self.rows.iter().map(Vec::len).sum();
        let max_fan_in = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mean_fan_in = if self.n == 0 {
            0.0
        } else {
            nonzero_count as f64 / self.n as f64
        };
        let sparsity = if nonzero_count == 0 {
            f64::INFINITY
        } else {
            (self.n * self.n) as f64 / nonzero_count as f64
        };
        QuboStats {
            sparsity,
            max_fan_in,
            mean_fan_in,
            nonzero_count,
        }
    }

    /// Relabels variable `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Qubo<W>, QuboError> {
        if perm.len() != self.n {
            return Err(QuboError::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let mut b = QuboBuilder::new(self.n);
        b.add_constant(self.constant);
        for i in 0..self.n {
            b.add_linear(perm[i], self.linear[i])?;
        }
        for (i, j, w) in self.upper_entries() {
            b.add_coupling(perm[i], perm[j], w)?;
        }
        Ok(b.build())
    }

    pub fn to_document(&self) -> QuboDocument<W> {
        QuboDocument {
            n: self.n,
            constant: self.constant,
            linear: self.linear.clone(),
            quadratic: self.upper_entries().collect(),
        }
    }

    pub fn from_document(doc: &QuboDocument<W>) -> Result<Self, QuboError> {
        if doc.linear.len() != doc.n {
            return Err(QuboError::DimensionMismatch {
                expected: doc.n,
                got: doc.linear.len(),
            });
        }
        let mut b = QuboBuilder::new(doc.n);
        b.add_constant(doc.constant);
        for (i, &w) in doc.linear.iter().enumerate() {
            b.add_linear(i, w)?;
        }
        for &(i, j, w) in &doc.quadratic {
            b.add_coupling(i, j, w)?;
        }
        Ok(b.build())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("QUBO serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, QuboError> {
        let doc: QuboDocument<W> = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

/// On-disk form: `{n, constant, linear, quadratic: [[i, j, w], ...]}` with
/// upper-triangle entries only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "W: Weight"))]
pub struct QuboDocument<W = i64> {
    pub n: usize,
    pub constant: W,
    pub linear: Vec<W>,
    pub quadratic: Vec<(usize, usize, W)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_spin() -> Qubo<f64> {
        let mut b = QuboBuilder::<f64>::new(2);
        b.add_coupling(0, 1, 2.0).unwrap();
        b.add_linear(0, 1.0).unwrap();
        b.add_linear(1, -1.0).unwrap();
        b.add_constant(0.5);
        b.build()
    }

    #[test]
    fn energy_examples() {
        let q = two_spin();
        let ones = SpinState::from_bools(vec![true, true]);
        assert_eq!(q.energy(&ones).unwrap(), 2.5);
        assert_eq!(q.energy(&SpinState::zeros(2)).unwrap(), 0.5);

        let mut zero = QuboBuilder::<i64>::new(3);
        zero.add_constant(7);
        let z = zero.build();
        for idx in 0..8 {
            assert_eq!(z.energy(&SpinState::from_index(3, idx)).unwrap(), 7);
        }
    }

    #[test]
    fn local_field_examples() {
        let q = two_spin();
        let x = SpinState::from_bools(vec![false, true]);
        assert_eq!(q.local_field(&x, 0).unwrap(), 3.0);
        let x = SpinState::from_bools(vec![true, false]);
        assert_eq!(q.local_field(&x, 1).unwrap(), 1.0);
        let z = QuboBuilder::<i64>::new(3).build();
        assert_eq!(z.local_field(&SpinState::zeros(3), 2).unwrap(), 0);
        assert!(matches!(
            q.local_field(&x, 2),
            Err(QuboError::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let q = two_spin();
        assert!(matches!(
            q.energy(&SpinState::zeros(3)),
            Err(QuboError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn stats_examples() {
        let mut b = QuboBuilder::<i64>::new(2);
        b.add_coupling(0, 1, 5).unwrap();
        let s = b.build().stats();
        assert_eq!(s.nonzero_count, 2);
        assert_eq!(s.sparsity, 2.0);
        assert_eq!(s.max_fan_in, 1);
        assert_eq!(s.mean_fan_in, 1.0);

        let mut b = QuboBuilder::<i64>::new(4);
        for i in 0..4 {
            for j in i + 1..4 {
                b.add_coupling(i, j, 1).unwrap();
            }
        }
        let s = b.build().stats();
        assert_eq!(s.sparsity, 16.0 / 12.0);
        assert_eq!(s.max_fan_in, 3);

        let s = QuboBuilder::<i64>::new(3).build().stats();
        assert_eq!(s.nonzero_count, 0);
        assert!(s.sparsity.is_infinite());
        assert_eq!(s.max_fan_in, 0);
        assert_eq!(s.mean_fan_in, 0.0);
    }

    #[test]
    fn builder_cancels_and_folds() {
        let mut b = QuboBuilder::<i64>::new(3);
        b.add_coupling(0, 1, 3).unwrap();
        b.add_coupling(1, 0, -3).unwrap();
        b.add_coupling(2, 2, 4).unwrap();
        let q = b.build();
        assert_eq!(q.stats().nonzero_count, 0);
        assert_eq!(q.linear(), &[0, 0, 4]);
        assert!(b.add_coupling(0, 3, 1).is_err());
    }

    #[test]
    fn json_round_trip_mirrors_pairs() {
        let text = r#"{"n":3,"constant":1,"linear":[0,2,0],"quadratic":[[0,2,-4]]}"#;
        let q = Qubo::<i64>::from_json(text).unwrap();
        assert_eq!(q.coupling(0, 2), -4);
        assert_eq!(q.coupling(2, 0), -4);
        assert_eq!(Qubo::<i64>::from_json(&q.to_json()).unwrap(), q);
        let bad = r#"{"n":2,"constant":0,"linear":[0,0],"quadratic":[[0,5,1]]}"#;
        assert!(Qubo::<i64>::from_json(bad).is_err());
    }

    fn arb_qubo(max_n: usize) -> impl Strategy<Value = Qubo<i64>> {
        (1..=max_n).prop_flat_map(|n| {
            (
                proptest::collection::vec((0..n, 0..n, -4i64..=4), 0..(n * n)),
                proptest::collection::vec(-4i64..=4, n),
                -5i64..=5,
            )
                .prop_map(move |(pairs, lin, c)| {
                    let mut b = QuboBuilder::new(n);
                    for (i, j, w) in pairs {
                        if i != j {
                            b.add_coupling(i, j, w).unwrap();
                        }
                    }
                    for (i, w) in lin.into_iter().enumerate() {
                        b.add_linear(i, w).unwrap();
                    }
                    b.add_constant(c);
                    b.build()
                })
        })
    }

    proptest! {
        #[test]
        fn canonical_form_invariants(q in arb_qubo(9)) {
            for i in 0..q.n() {
                for &(j, w) in q.row(i) {
                    prop_assert!(j != i);
                    prop_assert!(j < q.n());
                    prop_assert!(w != 0);
                    prop_assert_eq!(q.coupling(j, i), w);
                }
            }
            let s = q.stats();
            if s.nonzero_count > 0 {
                let n2 = (q.n() * q.n()) as f64;
                prop_assert_eq!(s.sparsity, n2 / s.nonzero_count as f64);
                prop_assert!((s.sparsity * s.nonzero_count as f64 - n2).abs() <= 1e-12 * n2);
            }
            prop_assert!(s.max_fan_in as f64 >= s.mean_fan_in);
            prop_assert!(s.max_fan_in <= q.n().saturating_sub(1));
        }

        #[test]
        fn flip_delta_equals_local_field(q in arb_qubo(12), seed in any::<u64>()) {
            let n = q.n();
            let x = SpinState::from_index(n, seed);
            for i in 0..n {
                let mut up = x.clone();
                up.set(i, true);
                let mut down = x.clone();
                down.set(i, false);
                let delta = q.energy(&up).unwrap() - q.energy(&down).unwrap();
                prop_assert_eq!(delta, q.local_field(&x, i).unwrap());
            }
        }

        #[test]
        fn energy_invariant_under_relabeling(q in arb_qubo(8), rot in 0usize..8, seed in any::<u64>()) {
            let n = q.n();
            let perm: Vec<usize> = (0..n).map(|i| (i * 5 + rot) % n).collect();
            let mut seen = vec![false; n];
            for &p in &perm { seen[p] = true; }
            prop_assume!(seen.iter().all(|&s| s));
            let p = q.permuted(&perm).unwrap();
            let x = SpinState::from_index(n, seed);
            let mut y = SpinState::zeros(n);
            for i in 0..n { y.set(perm[i], x.get(i)); }
            prop_assert_eq!(q.energy(&x).unwrap(), p.energy(&y).unwrap());
        }

        #[test]
        fn diagonal_folding_preserves_energy(q in arb_qubo(10), i in 0usize..10, d in -6i64..=6) {
            let n = q.n();
            let i = i % n;
            let d = d * 2;
            let doc = q.to_document();
            let mut b = QuboBuilder::<i64>::new(n);
            b.add_constant(doc.constant);
            for (k, &w) in doc.linear.iter().enumerate() { b.add_linear(k, w).unwrap(); }
            for &(a, c, w) in &doc.quadratic { b.add_coupling(a, c, w).unwrap(); }
            b.add_diagonal(i, d).unwrap();
            let folded = b.build();
            for idx in 0..(1u64 << n) {
                let x = SpinState::from_index(n, idx);
                // Matrix form: ½·d·x_i² = ½·d·x_i.
                let expect = q.energy(&x).unwrap() + if x.get(i) { d / 2 } else { 0 };
                prop_assert_eq!(folded.energy(&x).unwrap(), expect);
            }
        }
    }
}
