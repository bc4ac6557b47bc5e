use fpia_core::cluster::{ffd_pack, ClusterParams};
use fpia_core::qubo::{Qubo, QuboBuilder};
use fpia_core::sat::{gen_random_3sat, quadratize, DEFAULT_PENALTY};
use fpia_core::sim::*;
use fpia_core::SpinState;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_qubo(n: usize, density: f64, seed: u64) -> Qubo<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = QuboBuilder::<i64>::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                b.add_coupling(i, j, rng.gen_range(-9..=9)).unwrap();
            }
        }
        b.add_linear(i, rng.gen_range(-9..=9)).unwrap();
    }
    b.add_constant(rng.gen_range(-20..=20));
    b.build()
}

/// Field from the dense matrix definition, no sparse rows involved.
fn dense_field(q: &Qubo<i64>, x: &SpinState, i: usize) -> i64 {
    let mut h = q.linear()[i];
    for j in 0..q.n() {
        if j != i && x.get(j) {
            h += q.coupling(i, j);
        }
    }
    h
}

#[test]
fn mapped_fields_match_on_sat_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for seed in 0..3 {
        let (q, _) =
            quadratize(&gen_random_3sat(20, 4.26, seed).unwrap(), DEFAULT_PENALTY).unwrap();
        let c = ffd_pack(&q, &ClusterParams::new(140, 40)).unwrap();
        let m = build_mapped_machine(&q, &c).unwrap();
        for _ in 0..200 {
            let x = SpinState::from_bools((0..q.n()).map(|_| rng.gen()).collect());
            for i in 0..q.n() {
                let h = q.local_field(&x, i).unwrap();
                assert_eq!(h, dense_field(&q, &x, i));
                assert_eq!(mapped_field(&m, &x, i).unwrap(), h);
            }
            assert_eq!(m.energy(&x).unwrap(), q.energy(&x).unwrap());
        }
    }
}

#[test]
fn trajectories_are_bit_identical() {
    let (q, _) = quadratize(&gen_random_3sat(20, 4.26, 9).unwrap(), DEFAULT_PENALTY).unwrap();
    let c = ffd_pack(&q, &ClusterParams::new(140, 40).with_occupancy(0.5)).unwrap();
    let m = build_mapped_machine(&q, &c).unwrap();
    let s = AnnealSchedule {
        sweeps: 200,
        ..Default::default()
    };
    for seed in 0..4 {
        assert_eq!(
            anneal(&q, &s, seed).unwrap(),
            anneal_mapped(&m, &s, seed).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn mapped_equals_logical_for_any_packing(
        n in 1usize..40,
        density in 0.05f64..0.9,
        seed in any::<u64>(),
        o in 1usize..8,
    ) {
        let q = random_qubo(n, density, seed);
        let p = ClusterParams::new(q.stats().max_fan_in.max(1) + 4, o);
        let c = ffd_pack(&q, &p).unwrap();
        let m = build_mapped_machine(&q, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let x = SpinState::from_bools((0..n).map(|_| rng.gen()).collect());
            for i in 0..n {
                prop_assert_eq!(mapped_field(&m, &x, i).unwrap(), dense_field(&q, &x, i));
            }
            prop_assert_eq!(m.energy(&x).unwrap(), q.energy(&x).unwrap());
        }
        let s = AnnealSchedule { sweeps: 20, ..Default::default() };
        prop_assert_eq!(anneal(&q, &s, seed).unwrap(), anneal_mapped(&m, &s, seed).unwrap());
    }
}
