#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparrow_core::instances::{generate, GenSpec};
use sparrow_core::model::{earliest_start_schedule, Instance, Schedule};

pub const LEVELS: [f64; 3] = [0.1, 0.5, 0.9];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generated instance with tau and R drawn from the benchmark levels.
pub fn random_instance<R: Rng>(n: usize, rng: &mut R) -> Instance {
    let tau = LEVELS[rng.gen_range(0..3)];
    let r = LEVELS[rng.gen_range(0..3)];
    let mut spec = GenSpec::cesaret(n, tau, r, rng.gen());
    spec.initial_setup = rng.gen_bool(0.2);
    generate(&spec).unwrap()
}

/// Appends orders in random order whenever they still fit.
pub fn random_schedule<R: Rng>(inst: &Instance, rng: &mut R) -> Schedule {
    let mut ids: Vec<usize> = (0..inst.n()).collect();
    ids.shuffle(rng);
    let mut seq = Vec::new();
    for id in ids {
        if rng.gen_bool(0.3) {
            continue;
        }
        seq.push(id);
        if earliest_start_schedule(inst, &seq).is_err() {
            seq.pop();
        }
    }
    earliest_start_schedule(inst, &seq).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleChoice {
    Pl1 { at: usize, setup_increase: f64, fitness: f64 },
    Pl2 { at: usize, fitness: f64 },
    Reject,
}

/// Brute-force single insertion: every position is evaluated by rebuilding
/// the earliest-start schedule. PL1 positions make no order more tardy;
/// other feasible positions qualify only by raising the fitness.
pub fn exhaustive_insertion(inst: &Instance, sched: &Schedule, cand: usize) -> OracleChoice {
    let seq = sched.sequence();
    let c = inst.order(cand);
    let mut pl1: Option<(usize, f64, f64)> = None;
    let mut pl2: Option<(usize, f64)> = None;
    for at in 0..=seq.len() {
        if at > 0 && !(c.deadline > inst.order(seq[at - 1]).release) {
            continue;
        }
        let mut trial = seq.clone();
        trial.insert(at, cand);
        let Ok(s) = earliest_start_schedule(inst, &trial) else { continue };
        let prev = (at > 0).then(|| seq[at - 1]);
        let next = seq.get(at).copied();
        let increase = inst.setup_after(prev, cand) + next.map_or(0.0, |nx| inst.setup(cand, nx) - inst.setup_after(prev, nx));
        let c_on_time = s.entries[at].tardiness == 0.0;
        // Without the triangle inequality a successor may even move earlier.
        let no_new_tardiness = s
            .entries
            .iter()
            .filter(|e| e.order != cand)
            .all(|e| e.tardiness <= sched.entries[sched.position_of(e.order).unwrap()].tardiness + 1e-9);
        if c_on_time && no_new_tardiness {
            if pl1.is_none_or(|(_, best, _)| increase < best) {
                pl1 = Some((at, increase, s.fitness));
            }
        } else if s.fitness > sched.fitness + 1e-9 && pl2.is_none_or(|(_, f)| s.fitness > f) {
            pl2 = Some((at, s.fitness));
        }
    }
    match (pl1, pl2) {
        (Some((at, setup_increase, fitness)), _) => OracleChoice::Pl1 { at, setup_increase, fitness },
        (None, Some((at, fitness))) => OracleChoice::Pl2 { at, fitness },
        _ => OracleChoice::Reject,
    }
}

/// Starts after forcing position `pos` to begin `delta` later and pushing
/// successors forward with the earliest-start rule.
pub fn delayed_starts(inst: &Instance, sched: &Schedule, pos: usize, delta: f64) -> Vec<f64> {
    let mut starts: Vec<f64> = sched.entries.iter().map(|e| e.start).collect();
    starts[pos] += delta;
    for k in pos + 1..starts.len() {
        let prev = sched.entries[k - 1].order;
        starts[k] = inst.earliest_start(Some((prev, starts[k - 1])), sched.entries[k].order);
    }
    starts
}

pub fn starts_feasible(inst: &Instance, sched: &Schedule, starts: &[f64]) -> bool {
    sched
        .entries
        .iter()
        .zip(starts)
        .all(|(e, &p)| p <= inst.order(e.order).latest_start() + 1e-9)
}

pub fn total_reward(inst: &Instance, sched: &Schedule, starts: &[f64]) -> f64 {
    sched.entries.iter().zip(starts).map(|(e, &p)| inst.order(e.order).reward_at(p)).sum()
}

/// Mean and 3-sigma half width of a Bernoulli proportion estimate.
pub fn three_sigma(p: f64, trials: usize) -> f64 {
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}
