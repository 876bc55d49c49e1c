mod common;

use proptest::prelude::*;
use rand::Rng;
use sparrow_core::alns::{
    acceptance_probability, alns_pass, apply_insertion, apply_removal, removal_positions, sa_accept,
    select_operator, AlnsState, InsertionKind, OrderBank, PassOutcome, RemovalKind, ScoreIncrements, MIN_WEIGHT,
};
use sparrow_core::brkga::{complex_decode, decode_order, init_chromosome_bounded};
use sparrow_core::model::{validate, Instance, Schedule};
use sparrow_core::slack::compute_slacks;

fn state() -> AlnsState {
    AlnsState::new(100.0, 0.5, 0.9975, ScoreIncrements::default(), 0.4).unwrap()
}

fn start<R: Rng>(n: usize, rng: &mut R) -> (Instance, Schedule, Vec<f64>) {
    let inst = common::random_instance(n, rng);
    let genes = init_chromosome_bounded(&inst, rng).unwrap().genes;
    let sched = complex_decode(&inst, &genes);
    (inst, sched, genes)
}

fn partition_holds(n: usize, sched: &Schedule) -> bool {
    let bank = OrderBank::from_schedule(n, sched);
    let mut all: Vec<usize> = sched.sequence().into_iter().chain(bank.orders).collect();
    all.sort_unstable();
    all == (0..n).collect::<Vec<_>>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn passes_keep_partition_and_decode_consistency(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = common::rng(seed);
        let (inst, mut sched, mut genes) = start(n, &mut rng);
        let mut st = state();
        let mut best = sched.fitness;
        for _ in 0..30 {
            let pass = alns_pass(&inst, &sched, &genes, &mut st, best, &mut rng).unwrap();
            prop_assert!(validate(&inst, &pass.schedule).is_empty());
            prop_assert!(partition_holds(n, &pass.schedule));
            match pass.outcome {
                PassOutcome::Rejected => {
                    prop_assert_eq!(&pass.schedule, &sched);
                    prop_assert_eq!(&pass.genes, &genes);
                }
                PassOutcome::Accepted => prop_assert!(pass.schedule.fitness <= sched.fitness),
                PassOutcome::Improved => prop_assert!(pass.schedule.fitness > sched.fitness),
                PassOutcome::NewBest => prop_assert!(pass.schedule.fitness > best),
            }
            if pass.outcome != PassOutcome::Rejected {
                // Scheduled orders lead the decode order, in schedule order.
                let order = decode_order(&pass.genes);
                prop_assert_eq!(&order[..pass.schedule.len()], &pass.schedule.sequence()[..]);
                prop_assert!(pass.genes.iter().all(|g| (0.0..=1.0).contains(g)));
            }
            best = best.max(pass.schedule.fitness);
            sched = pass.schedule;
            genes = pass.genes;
            st.cool();
            st.update_weights();
        }
    }

    #[test]
    fn sequence_removal_picks_the_worst_window(seed in any::<u64>(), n in 3usize..16, frac in 0.1f64..0.9) {
        let mut rng = common::rng(seed);
        let (inst, sched, _) = start(n, &mut rng);
        prop_assume!(sched.len() >= 2);
        let count = ((frac * sched.len() as f64).floor() as usize).max(1);
        let got = removal_positions(RemovalKind::Sequence, &inst, &sched, count, &mut rng);
        let mut best: Option<(f64, usize)> = None;
        for first in 0..=sched.len() - count {
            let last = first + count - 1;
            let reward: f64 = (first..=last).map(|k| sched.reward_at(&inst, k)).sum();
            let span = sched.entries[last].start + inst.order(sched.entries[last].order).processing - sched.entries[first].start;
            let q = reward / span;
            if best.is_none_or(|(b, _)| q < b) {
                best = Some((q, first));
            }
        }
        let first = best.unwrap().1;
        prop_assert_eq!(got, (first..first + count).collect::<Vec<_>>());
    }
}

#[test]
fn thousand_pass_fuzz_stays_clean() {
    let mut rng = common::rng(1000);
    let (inst, mut sched, mut genes) = start(30, &mut rng);
    let mut st = state();
    let mut best = sched.fitness;
    let mut counts = [0usize; 4];
    for _ in 0..1000 {
        let pass = alns_pass(&inst, &sched, &genes, &mut st, best, &mut rng).unwrap();
        assert!(pass.schedule.fitness.is_finite());
        assert!(validate(&inst, &pass.schedule).is_empty());
        counts[pass.outcome as usize] += 1;
        best = best.max(pass.schedule.fitness);
        sched = pass.schedule;
        genes = pass.genes;
        st.cool();
        st.update_weights();
        assert!(st.removal_weights.iter().chain(&st.insertion_weights).all(|w| w.is_finite() && *w > 0.0));
    }
    assert_eq!(counts.iter().sum::<usize>(), 1000);
}

#[test]
fn pass_trace_is_deterministic() {
    let run = || {
        let mut rng = common::rng(5);
        let (inst, mut sched, mut genes) = start(20, &mut rng);
        let mut st = state();
        let mut trace = Vec::new();
        for _ in 0..200 {
            let pass = alns_pass(&inst, &sched, &genes, &mut st, f64::MAX, &mut rng).unwrap();
            trace.push((pass.removal, pass.insertion, pass.outcome, pass.schedule.fitness));
            sched = pass.schedule;
            genes = pass.genes;
            st.update_weights();
        }
        (trace, st)
    };
    assert_eq!(run(), run());
}

#[test]
fn weights_stay_positive_over_many_updates() {
    let mut st = state();
    let mut rng = common::rng(3);
    for _ in 0..100_000 {
        let k = rng.gen_range(0..5);
        st.removal_scores[k] += 30.0;
        if rng.gen_bool(0.5) {
            st.insertion_scores[rng.gen_range(0..2)] += 10.0;
        }
        st.update_weights();
    }
    for w in st.removal_weights.iter().chain(&st.insertion_weights) {
        assert!(w.is_finite() && *w >= MIN_WEIGHT);
    }
}

#[test]
fn repeated_wins_converge_to_one() {
    let mut st = state();
    let mut expected = 1.0;
    for _ in 0..60 {
        st.removal_scores[0] = 30.0;
        st.update_weights();
        expected = 0.5 * expected + 0.5;
    }
    assert!((st.removal_weights[0] - expected).abs() < 1e-12);
    assert!((st.removal_weights[0] - 1.0).abs() < 1e-12);
    assert!(st.removal_weights[1] < 1e-6 * 2.0);
}

#[test]
fn roulette_follows_weights() {
    let draws = 10_000;
    let mut rng = common::rng(31);
    let picks = (0..draws).filter(|_| select_operator(&[3.0, 1.0], &mut rng).unwrap() == 0).count();
    let rate = picks as f64 / draws as f64;
    assert!((rate - 0.75).abs() <= common::three_sigma(0.75, draws), "{rate}");
    let even = (0..draws).filter(|_| select_operator(&[1.0, 1.0], &mut rng).unwrap() == 0).count();
    assert!((even as f64 / draws as f64 - 0.5).abs() <= common::three_sigma(0.5, draws));
    assert!((0..100).all(|_| select_operator(&[2.0], &mut rng).unwrap() == 0));
    assert!(select_operator(&[], &mut rng).is_err());
}

#[test]
fn sa_rate_matches_closed_form() {
    let p = acceptance_probability(100.0, 95.0, 100.0);
    assert!((p - (-0.05f64).exp()).abs() < 1e-12);
    let trials = 10_000;
    let mut rng = common::rng(17);
    let hits = (0..trials).filter(|_| sa_accept(100.0, 95.0, 100.0, &mut rng)).count();
    assert!((hits as f64 / trials as f64 - p).abs() <= common::three_sigma(p, trials));
    assert!((0..1000).all(|_| sa_accept(50.0, 50.0, 1.0, &mut rng)));
    assert!((0..1000).all(|_| !sa_accept(100.0, 50.0, 1e-6, &mut rng)));
    assert!(sa_accept(0.0, 0.0, 10.0, &mut rng));
}

#[test]
fn removal_operators_remove_exact_counts() {
    let mut rng = common::rng(41);
    for _ in 0..200 {
        let (inst, sched, _) = start(15, &mut rng);
        if sched.is_empty() {
            continue;
        }
        for kind in RemovalKind::ALL {
            let count = rng.gen_range(1..=sched.len() + 2);
            let positions = removal_positions(kind, &inst, &sched, count, &mut rng);
            assert_eq!(positions.len(), count.min(sched.len()));
            let mut s = sched.clone();
            let mut t = compute_slacks(&inst, &s).unwrap();
            let removed = apply_removal(kind, &inst, &mut s, &mut t, count, &mut rng);
            assert!(removed.len() >= count.min(sched.len()));
            assert_eq!(s.len() + removed.len(), sched.len());
            let v = validate(&inst, &s);
            assert!(v.is_empty(), "{kind:?} {v:?} {:?} -> {:?}", sched, s);
            if count >= sched.len() {
                assert!(s.is_empty());
            }
        }
    }
}

#[test]
fn insertion_operators_are_deterministic_and_drain_bank() {
    let mut rng = common::rng(43);
    for _ in 0..100 {
        let (inst, sched, _) = start(15, &mut rng);
        for kind in InsertionKind::ALL {
            let run = || {
                let mut s = sched.clone();
                let mut t = compute_slacks(&inst, &s).unwrap();
                let mut bank = OrderBank::from_schedule(inst.n(), &s);
                apply_insertion(kind, &inst, &mut s, &mut t, &mut bank);
                (s, bank)
            };
            let (s, bank) = run();
            assert_eq!(run(), (s.clone(), bank.clone()));
            assert!(s.fitness >= sched.fitness);
            assert!(bank.orders.iter().all(|&o| !s.contains(o)));
            assert!(partition_holds(inst.n(), &s));
        }
    }
}
