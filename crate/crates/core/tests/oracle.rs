mod common;

use proptest::prelude::*;
use rand::Rng;
use sparrow_core::instances::{generate, parse_canonical, GenSpec};
use sparrow_core::model::earliest_start_schedule;
use sparrow_core::oracle::{exact_solve, exact_solve_unpruned, DEFAULT_LIMIT};
use sparrow_core::Error;

#[test]
fn pruning_keeps_the_optimum() {
    let mut rng = common::rng(70);
    for k in 0..20 {
        let inst = common::random_instance(7, &mut rng);
        let pruned = exact_solve(&inst, DEFAULT_LIMIT).unwrap();
        let full = exact_solve_unpruned(&inst, DEFAULT_LIMIT).unwrap();
        assert_eq!(pruned.optimal, full.optimal, "instance {k}");
        assert!(pruned.nodes <= full.nodes);
        assert!(pruned.proven_optimal);
        let s = earliest_start_schedule(&inst, &pruned.sequence).unwrap();
        assert!((s.fitness - pruned.optimal).abs() < 1e-9);
    }
}

#[test]
fn size_limit_is_enforced() {
    let inst = generate(&GenSpec::cesaret(10, 0.5, 0.5, 1)).unwrap();
    assert!(matches!(exact_solve(&inst, DEFAULT_LIMIT), Err(Error::Size { n: 10, limit: 9 })));
    assert!(exact_solve(&inst, 10).unwrap().proven_optimal);
}

#[test]
fn forced_choice_between_exclusive_orders() {
    // Both windows are [0, 10] with t = 6: only one order fits.
    let inst = parse_canonical("2 0\n0 0\n6 6\n8 8\n10 10\n5 9\n2.5 4.5\n0 1 1\n0 0 1\n0 1 0\n", "pair").unwrap();
    let r = exact_solve(&inst, DEFAULT_LIMIT).unwrap();
    assert_eq!(r.optimal, 9.0);
    assert_eq!(r.sequence, vec![1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn earliest_start_dominates_delays(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(n, &mut rng);
        let sched = common::random_schedule(&inst, &mut rng);
        prop_assume!(!sched.is_empty());
        for _ in 0..20 {
            let pos = rng.gen_range(0..sched.len());
            let delta = rng.gen_range(0.0..30.0);
            let starts = common::delayed_starts(&inst, &sched, pos, delta);
            if common::starts_feasible(&inst, &sched, &starts) {
                prop_assert!(common::total_reward(&inst, &sched, &starts) <= sched.fitness + 1e-9);
            }
        }
        let opt = exact_solve(&inst, DEFAULT_LIMIT).unwrap().optimal;
        prop_assert!(sched.fitness <= opt + 1e-9);
    }
}
