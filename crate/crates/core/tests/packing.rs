use std::collections::BTreeSet;

use fpia_core::cluster::{ffd_pack, utilization, validate, ClusterParams, Violation};
use fpia_core::qubo::{Qubo, QuboBuilder};
use fpia_core::sat::{gen_random_3sat, quadratize, DEFAULT_PENALTY};
use proptest::prelude::*;

fn sat_qubo(vars: usize, seed: u64) -> Qubo<i64> {
    quadratize(&gen_random_3sat(vars, 4.26, seed).unwrap(), DEFAULT_PENALTY)
        .unwrap()
        .0
}

/// Straight transcription of first-fit decreasing over neighbor sets.
fn reference_ffd(
    q: &Qubo<i64>,
    inputs: usize,
    cap: usize,
) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
    let mut order: Vec<usize> = (0..q.n()).collect();
    order.sort_by_key(|&s| (std::cmp::Reverse(q.row(s).len()), s));
    let mut bins: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();
    for s in order {
        let nb: BTreeSet<usize> = q.row(s).iter().map(|&(j, _)| j).collect();
        let slot = bins
            .iter()
            .position(|(m, u)| m.len() < cap && u.union(&nb).count() <= inputs);
        match slot {
            Some(k) => {
                bins[k].0.insert(s);
                bins[k].1.extend(nb);
            }
            None => bins.push((BTreeSet::from([s]), nb)),
        }
    }
    bins
}

#[test]
fn worked_example() {
    let mut b = QuboBuilder::<i64>::new(4);
    for (i, j) in [(0, 1), (0, 2), (1, 2), (2, 3)] {
        b.add_coupling(i, j, 1).unwrap();
    }
    let q = b.build();
    let c = ffd_pack(&q, &ClusterParams::new(3, 2)).unwrap();
    let members: Vec<Vec<usize>> = c.clusters.iter().map(|c| c.members.clone()).collect();
    assert_eq!(members, vec![vec![2], vec![0, 1], vec![3]]);
    let u = utilization(&c, 4);
    assert_eq!(u.used_cells, 10);
    assert_eq!(u.improvement, 1.6);
}

#[test]
fn complete_triangle_is_one_full_cluster() {
    let mut b = QuboBuilder::<i64>::new(3);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        b.add_coupling(i, j, 1).unwrap();
    }
    let c = ffd_pack(&b.build(), &ClusterParams::new(3, 3)).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(utilization(&c, 3).improvement, 1.0);
}

#[test]
fn matches_reference_packer() {
    for seed in 0..6 {
        let q = sat_qubo(60, seed);
        for (i, o, occ) in [(64, 16, 1.0), (140, 40, 0.9), (256, 64, 0.75)] {
            let p = ClusterParams::new(i, o).with_occupancy(occ);
            let got = ffd_pack(&q, &p).unwrap();
            let want = reference_ffd(&q, i, p.spin_cap());
            assert_eq!(got.len(), want.len());
            for (g, (m, u)) in got.clusters.iter().zip(&want) {
                assert_eq!(g.members, m.iter().copied().collect::<Vec<_>>());
                assert_eq!(g.inputs, u.iter().copied().collect::<Vec<_>>());
            }
        }
    }
}

#[test]
fn raising_budgets_never_adds_clusters() {
    for seed in 0..4 {
        let q = sat_qubo(100, seed);
        let fan = q.stats().max_fan_in;
        let count = |i, o| ffd_pack(&q, &ClusterParams::new(i, o)).unwrap().len();
        for o in [8, 16, 32, 64] {
            let mut prev = usize::MAX;
            for i in [fan, fan + 20, 2 * fan, 4 * fan, 512] {
                let c = count(i, o);
                assert!(c <= prev, "I={i} O={o}: {c} > {prev}");
                prev = c;
            }
        }
        for i in [fan, 2 * fan, 256] {
            let mut prev = usize::MAX;
            for o in [4, 8, 16, 40, 128] {
                let c = count(i, o);
                assert!(c <= prev, "I={i} O={o}: {c} > {prev}");
                prev = c;
            }
        }
    }
}

#[test]
fn mutations_are_caught() {
    let q = sat_qubo(30, 2);
    let p = ClusterParams::new(64, 8);
    let good = ffd_pack(&q, &p).unwrap();
    let mut extra = good.clone();
    let moved = extra.clusters[1].members[0];
    extra.clusters[0].members.push(moved);
    extra.clusters[0].members.sort();
    assert!(validate(&extra, &q, &p)
        .iter()
        .any(|v| matches!(v, Violation::DuplicateSpin { .. })));
    let mut missing = good.clone();
    missing.clusters[0].inputs.pop();
    assert!(validate(&missing, &q, &p)
        .iter()
        .any(|v| matches!(v, Violation::WrongInputUnion { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn packing_is_always_valid(
        vars in 5usize..120,
        seed in any::<u64>(),
        extra in 0usize..200,
        o in 1usize..64,
        occ in 0.3f64..=1.0,
    ) {
        let q = sat_qubo(vars, seed);
        let p = ClusterParams::new(q.stats().max_fan_in.max(1) + extra, o).with_occupancy(occ);
        prop_assume!(p.check().is_ok());
        let c = ffd_pack(&q, &p).unwrap();
        prop_assert!(validate(&c, &q, &p).is_empty());
        prop_assert_eq!(c.clone(), ffd_pack(&q, &p).unwrap());
        prop_assert!(utilization(&c, q.n()).improvement > 0.0);
    }
}
