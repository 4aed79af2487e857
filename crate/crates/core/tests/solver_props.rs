mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sbtrade::ising::{BitVector, QuboProblem};
use sbtrade::matrix::SquareMatrix;
use sbtrade::sb::{self, SbParams};
use sbtrade::strategy::{build_qubo, build_split, objective, penalty_constant, StrategyParams};

use common::*;

fn symmetric(n: usize) -> impl Strategy<Value = SquareMatrix> {
    prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
        SquareMatrix::from_fn(n, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            v[a * n + b]
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ising_energy_matches_qubo(q in (1usize..7).prop_flat_map(symmetric), idx in any::<u64>()) {
        let n = q.n();
        let bits = bits_of(idx % (1 << n), n);
        let qubo = QuboProblem::new(q.clone()).unwrap();
        let ising = qubo.to_ising().unwrap();
        let b = BitVector::new(bits.clone()).unwrap();
        let e = qubo_energy(&q, &bits);
        prop_assert!((qubo.energy(&b).unwrap() - e).abs() <= 1e-9);
        prop_assert!((ising.energy(&b.to_spins()).unwrap() - e).abs() <= 1e-9);
    }

    #[test]
    fn brute_force_is_a_lower_bound(q in (1usize..9).prop_flat_map(symmetric)) {
        let n = q.n();
        let (best, e) = QuboProblem::new(q.clone()).unwrap().brute_force_min().unwrap();
        prop_assert!((qubo_energy(&q, best.bits()) - e).abs() <= 1e-9);
        for idx in 0..1u64 << n {
            prop_assert!(qubo_energy(&q, &bits_of(idx, n)) >= e - 1e-9);
        }
    }

    #[test]
    fn strategy_qubo_is_the_direct_objective(seed in any::<u64>(), n in 2usize..9, idx in any::<u64>()) {
        let strat = StrategyParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dev, corr) = random_strategy_instance(n, 2, &mut rng);
        let bits = bits_of(idx % (1 << n), n);
        let b = BitVector::new(bits).unwrap();
        let qubo = build_qubo(&dev, &corr, &strat).unwrap();
        let direct = objective(&b, &dev, &corr, &strat).unwrap().total();
        let e = qubo.energy(&b).unwrap() + penalty_constant(&strat);
        prop_assert!((direct - e).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn tick_updates_leave_day_part_shared(seed in any::<u64>(), n in 4usize..20) {
        let strat = StrategyParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dev, corr) = random_strategy_instance(n, 4, &mut rng);
        let (dev2, _) = random_strategy_instance(n, 4, &mut rng);
        let split = build_split(&dev, &corr, &strat).unwrap();
        let next = split.update_tick(dev2.sgn(), dev2.abs()).unwrap();
        prop_assert!(Arc::ptr_eq(split.day(), next.day()));
        prop_assert_eq!(next.writes().day, split.writes().day);
        prop_assert_eq!(next.writes().tick - split.writes().tick, 3 * n as u64);
        // same as building from scratch
        prop_assert_eq!(next, build_split(&dev2, &corr, &strat).unwrap());
    }

    #[test]
    fn solve_is_reproducible(seed in any::<u64>(), n in 4usize..12) {
        let strat = StrategyParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dev, corr) = random_strategy_instance(n, 4, &mut rng);
        let p = build_split(&dev, &corr, &strat).unwrap();
        let params = SbParams { restarts: 3, seed, ..SbParams::default() };
        let a = sb::solve(&p, &params).unwrap();
        let b = sb::solve(&p, &params).unwrap();
        prop_assert_eq!(a.spins, b.spins);
        prop_assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        prop_assert_eq!(a.run_index, b.run_index);
    }
}
