//! Adaptive large neighbourhood search, one destroy/repair pass at a time.
//!
//! A pass removes `max(1, floor(0.4 |S|))` orders with a roulette-selected
//! removal operator, reinserts banked orders with a roulette-selected
//! insertion operator and scores both operators by the outcome. Rejected
//! passes return the input untouched.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::brkga::GENE_EPSILON;
use crate::error::{Error, Result};
use crate::insertion;
use crate::model::{Instance, Schedule};
use crate::slack::{compute_slacks, SlackTable};

/// Operator weights never drop below this, so no operator is lost to
/// underflow after long runs of zero scores.
pub const MIN_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RemovalKind {
    Random,
    MinRevenue,
    MinUnitRevenue,
    MaxSetupTime,
    Sequence,
}

impl RemovalKind {
    pub const ALL: [RemovalKind; 5] = [
        RemovalKind::Random,
        RemovalKind::MinRevenue,
        RemovalKind::MinUnitRevenue,
        RemovalKind::MaxSetupTime,
        RemovalKind::Sequence,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown removal operator {i}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InsertionKind {
    MaxRevenue,
    MaxUnitRevenue,
}

impl InsertionKind {
    pub const ALL: [InsertionKind; 2] = [InsertionKind::MaxRevenue, InsertionKind::MaxUnitRevenue];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown insertion operator {i}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreIncrements {
    pub new_best: f64,
    pub improved: f64,
    pub accepted: f64,
}

impl Default for ScoreIncrements {
    fn default() -> Self {
        Self {
            new_best: 30.0,
            improved: 20.0,
            accepted: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlnsState {
    pub removal_weights: Vec<f64>,
    pub insertion_weights: Vec<f64>,
    pub removal_scores: Vec<f64>,
    pub insertion_scores: Vec<f64>,
    pub temperature: f64,
    pub reaction: f64,
    pub cooling: f64,
    pub increments: ScoreIncrements,
    pub removal_fraction: f64,
}

impl AlnsState {
    pub fn new(
        temperature: f64,
        reaction: f64,
        cooling: f64,
        increments: ScoreIncrements,
        removal_fraction: f64,
    ) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Config("initial temperature must be positive".into()));
        }
        let s = increments;
        if !(s.new_best > s.improved && s.improved > s.accepted && s.accepted > 0.0) {
            return Err(Error::Config("score increments must satisfy s1 > s2 > s3 > 0".into()));
        }
        Ok(Self {
            removal_weights: vec![1.0; RemovalKind::ALL.len()],
            insertion_weights: vec![1.0; InsertionKind::ALL.len()],
            removal_scores: vec![0.0; RemovalKind::ALL.len()],
            insertion_scores: vec![0.0; InsertionKind::ALL.len()],
            temperature,
            reaction,
            cooling,
            increments,
            removal_fraction,
        })
    }

    pub fn cool(&mut self) {
        self.temperature *= self.cooling;
    }

    /// `w = (1 - lambda) w + lambda * pi / sum(pi)` per operator group, then
    /// resets the scores. A group with no score keeps its weights.
    pub fn update_weights(&mut self) {
        update_group(&mut self.removal_weights, &mut self.removal_scores, self.reaction);
        update_group(&mut self.insertion_weights, &mut self.insertion_scores, self.reaction);
    }

    fn reward(&mut self, removal: RemovalKind, insertion: InsertionKind, amount: f64) {
        self.removal_scores[removal as usize] += amount;
        self.insertion_scores[insertion as usize] += amount;
    }
}

fn update_group(weights: &mut [f64], scores: &mut [f64], reaction: f64) {
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for (w, &pi) in weights.iter_mut().zip(scores.iter()) {
            *w = ((1.0 - reaction) * *w + reaction * pi / total).max(MIN_WEIGHT);
        }
    }
    scores.iter_mut().for_each(|s| *s = 0.0);
}

/// Roulette wheel: index `k` with probability `w_k / sum(w)`.
pub fn select_operator<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::Config("no operators to select from".into()));
    }
    let total: f64 = weights.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if pick < w {
            return Ok(k);
        }
        pick -= w;
    }
    Ok(weights.len() - 1)
}

/// Simulated-annealing acceptance against the current fitness.
pub fn sa_accept<R: Rng + ?Sized>(current: f64, candidate: f64, temperature: f64, rng: &mut R) -> bool {
    if candidate > current {
        return true;
    }
    if current == 0.0 {
        return candidate >= 0.0;
    }
    acceptance_probability(current, candidate, temperature) > rng.gen::<f64>()
}

/// `exp((100 / T) * (f' - f) / f)`.
pub fn acceptance_probability(current: f64, candidate: f64, temperature: f64) -> f64 {
    ((100.0 / temperature) * ((candidate - current) / current)).exp()
}

/// Unscheduled orders of a solution under repair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OrderBank {
    pub orders: Vec<usize>,
}

impl OrderBank {
    pub fn from_schedule(n: usize, schedule: &Schedule) -> Self {
        let mut scheduled = vec![false; n];
        for e in &schedule.entries {
            scheduled[e.order] = true;
        }
        Self {
            orders: (0..n).filter(|&i| !scheduled[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// `max(1, floor(fraction * len))`.
pub fn removal_count(len: usize, fraction: f64) -> usize {
    ((fraction * len as f64).floor() as usize).max(1)
}

fn positions_by_key<F: Fn(usize) -> f64>(len: usize, count: usize, key: F) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..len).collect();
    pos.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    pos.truncate(count);
    pos
}

/// Positions selected for removal by `kind`.
pub fn removal_positions<R: Rng + ?Sized>(
    kind: RemovalKind,
    instance: &Instance,
    schedule: &Schedule,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let len = schedule.len();
    let count = count.min(len);
    let order = |k: usize| instance.order(schedule.entries[k].order);
    match kind {
        RemovalKind::Random => index::sample(rng, len, count).into_vec(),
        RemovalKind::MinRevenue => positions_by_key(len, count, |k| order(k).revenue),
        RemovalKind::MinUnitRevenue => positions_by_key(len, count, |k| order(k).unit_revenue()),
        RemovalKind::MaxSetupTime => positions_by_key(len, count, |k| {
            let prev = k.checked_sub(1).map(|p| schedule.entries[p].order);
            -instance.setup_after(prev, schedule.entries[k].order)
        }),
        RemovalKind::Sequence => {
            if count == 0 {
                return Vec::new();
            }
            let rewards: Vec<f64> = (0..len).map(|k| schedule.reward_at(instance, k)).collect();
            let mut best: Option<(f64, usize)> = None;
            for first in 0..=len - count {
                let last = first + count - 1;
                let span = schedule.entries[last].start + order(last).processing - schedule.entries[first].start;
                let quality = rewards[first..=last].iter().sum::<f64>() / span;
                if best.is_none_or(|(q, _)| quality < q) {
                    best = Some((quality, first));
                }
            }
            let first = best.map_or(0, |(_, f)| f);
            (first..first + count).collect()
        }
    }
}

/// Removes the entries at `positions`, restores earliest starts and drops
/// any later order that no longer meets its deadline. Returns removed order
/// ids in removal order (selected ones first, then dropped ones).
pub(crate) fn remove_positions(
    instance: &Instance,
    schedule: &mut Schedule,
    slacks: &mut SlackTable,
    positions: &[usize],
) -> Vec<usize> {
    let mut removed: Vec<usize> = positions.iter().map(|&k| schedule.entries[k].order).collect();
    let mut drop = vec![false; schedule.len()];
    positions.iter().for_each(|&k| drop[k] = true);
    // Each gap left by a removal is re-propagated separately, since the
    // propagation from an earlier gap may stop before reaching it.
    let mut boundaries: Vec<usize> = Vec::new();
    let mut gone = 0;
    for (k, &d) in drop.iter().enumerate() {
        if d {
            gone += 1;
        } else if k > 0 && drop[k - 1] {
            boundaries.push(k - gone);
        }
    }
    let mut k = 0;
    schedule.entries.retain(|_| {
        k += 1;
        !drop[k - 1]
    });
    if drop.first() == Some(&true) && !schedule.is_empty() {
        boundaries.insert(0, 0);
    }
    for b in boundaries {
        schedule.propagate_from(instance, b);
    }
    while let Some(late) = schedule.first_late(instance) {
        removed.push(schedule.entries.remove(late).order);
        if late < schedule.len() {
            schedule.propagate_from(instance, late);
        }
    }
    schedule.recompute_fitness(instance);
    *slacks = compute_slacks(instance, schedule).expect("schedule repaired to feasibility");
    removed
}

/// Applies a removal operator; returns the ids moved to the bank.
pub fn apply_removal<R: Rng + ?Sized>(
    kind: RemovalKind,
    instance: &Instance,
    schedule: &mut Schedule,
    slacks: &mut SlackTable,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    if schedule.is_empty() {
        return Vec::new();
    }
    let positions = removal_positions(kind, instance, schedule, count, rng);
    remove_positions(instance, schedule, slacks, &positions)
}

/// Gene bookkeeping event emitted by the destroy and repair steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneEvent {
    Removal { order: usize },
    /// `prev` and `next` are the neighbours at insertion time.
    Insertion {
        order: usize,
        prev: Option<usize>,
        next: Option<usize>,
    },
}

/// Tries every banked order, best key first (ties by id), with the fast
/// insertion algorithm. Inserted orders leave the bank.
pub fn apply_insertion(
    kind: InsertionKind,
    instance: &Instance,
    schedule: &mut Schedule,
    slacks: &mut SlackTable,
    bank: &mut OrderBank,
) -> Vec<GeneEvent> {
    let key = |id: usize| match kind {
        InsertionKind::MaxRevenue => instance.order(id).revenue,
        InsertionKind::MaxUnitRevenue => instance.order(id).unit_revenue(),
    };
    let mut candidates = std::mem::take(&mut bank.orders);
    candidates.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    let mut events = Vec::new();
    for id in candidates {
        match insertion::fast_insert(instance, schedule, slacks, id).expect("banked orders are unscheduled") {
            Some(at) => events.push(GeneEvent::Insertion {
                order: id,
                prev: at.checked_sub(1).map(|k| schedule.entries[k].order),
                next: schedule.entries.get(at + 1).map(|e| e.order),
            }),
            None => bank.orders.push(id),
        }
    }
    bank.orders.sort_unstable();
    events
}

fn uniform_between<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi - lo <= 2.0 * GENE_EPSILON {
        return if hi > lo { 0.5 * (lo + hi) } else { lo + GENE_EPSILON };
    }
    for _ in 0..8 {
        let g = lo + (hi - lo) * rng.gen::<f64>();
        if g > lo && g < hi {
            return g;
        }
    }
    0.5 * (lo + hi)
}

/// Keeps the genes consistent with an edit of the schedule: a removed order
/// gets a gene above every scheduled one, an inserted order a gene strictly
/// between its neighbours (bounded by the smallest unscheduled gene at the
/// tail). `sequence` is the schedule after the event.
pub fn reassign_genes<R: Rng + ?Sized>(genes: &mut [f64], sequence: &[usize], event: GeneEvent, rng: &mut R) {
    match event {
        GeneEvent::Removal { order } => {
            let g_max = sequence
                .iter()
                .filter(|&&o| o != order)
                .map(|&o| genes[o])
                .fold(0.0, f64::max);
            genes[order] = uniform_between(g_max, 1.0, rng);
        }
        GeneEvent::Insertion { order, prev, next } => {
            let lo = prev.map_or(0.0, |p| genes[p]);
            let hi = match next {
                Some(nx) => genes[nx],
                None => {
                    let mut in_schedule = vec![false; genes.len()];
                    sequence.iter().for_each(|&o| in_schedule[o] = true);
                    (0..genes.len())
                        .filter(|&o| !in_schedule[o])
                        .map(|o| genes[o])
                        .fold(1.0, f64::min)
                }
            };
            genes[order] = uniform_between(lo, hi, rng);
        }
    }
}

/// Re-ranks genes so that scheduled orders come first in schedule order,
/// followed by unscheduled orders in their current gene order.
pub fn align_genes(genes: &mut [f64], schedule: &Schedule) {
    let n = genes.len();
    let mut in_schedule = vec![false; n];
    schedule.entries.iter().for_each(|e| in_schedule[e.order] = true);
    let mut rest: Vec<usize> = (0..n).filter(|&o| !in_schedule[o]).collect();
    rest.sort_by(|&a, &b| genes[a].total_cmp(&genes[b]).then(a.cmp(&b)));
    let scale = (n + 1) as f64;
    for (rank, id) in schedule.entries.iter().map(|e| e.order).chain(rest).enumerate() {
        genes[id] = (rank + 1) as f64 / scale;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PassOutcome {
    NewBest,
    Improved,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone)]
pub struct PassResult {
    pub schedule: Schedule,
    pub genes: Vec<f64>,
    pub outcome: PassOutcome,
    pub removal: RemovalKind,
    pub insertion: InsertionKind,
}

/// One destroy/repair pass on `schedule`, whose chromosome is `genes`.
/// `best_fitness` is the best fitness found so far by the solver.
pub fn alns_pass<R: Rng + ?Sized>(
    instance: &Instance,
    schedule: &Schedule,
    genes: &[f64],
    state: &mut AlnsState,
    best_fitness: f64,
    rng: &mut R,
) -> Result<PassResult> {
    let slacks = compute_slacks(instance, schedule)?;
    let removal = RemovalKind::from_index(select_operator(&state.removal_weights, rng)?)?;

    let mut work = schedule.clone();
    let mut work_slacks = slacks;
    let mut work_genes = genes.to_vec();
    align_genes(&mut work_genes, schedule);

    let count = removal_count(work.len(), state.removal_fraction);
    let removed = apply_removal(removal, instance, &mut work, &mut work_slacks, count, rng);
    let sequence = work.sequence();
    for &order in &removed {
        reassign_genes(&mut work_genes, &sequence, GeneEvent::Removal { order }, rng);
    }

    let insertion = InsertionKind::from_index(select_operator(&state.insertion_weights, rng)?)?;
    let mut bank = OrderBank::from_schedule(instance.n(), &work);
    let events = apply_insertion(insertion, instance, &mut work, &mut work_slacks, &mut bank);
    let mut sequence: Vec<usize> = work.sequence();
    // Replay insertions against the growing sequence so each tail bound
    // sees the orders still unscheduled at that moment.
    let inserted: Vec<usize> = events
        .iter()
        .filter_map(|e| match e {
            GeneEvent::Insertion { order, .. } => Some(*order),
            GeneEvent::Removal { .. } => None,
        })
        .collect();
    sequence.retain(|o| !inserted.contains(o));
    for event in events {
        if let GeneEvent::Insertion { order, .. } = event {
            sequence.push(order);
        }
        reassign_genes(&mut work_genes, &sequence, event, rng);
    }

    let outcome = if work.fitness > best_fitness {
        PassOutcome::NewBest
    } else if work.fitness > schedule.fitness {
        PassOutcome::Improved
    } else if sa_accept(schedule.fitness, work.fitness, state.temperature, rng) {
        PassOutcome::Accepted
    } else {
        PassOutcome::Rejected
    };
    let increment = match outcome {
        PassOutcome::NewBest => state.increments.new_best,
        PassOutcome::Improved => state.increments.improved,
        PassOutcome::Accepted => state.increments.accepted,
        PassOutcome::Rejected => 0.0,
    };
    state.reward(removal, insertion, increment);
    Ok(if outcome == PassOutcome::Rejected {
        PassResult {
            schedule: schedule.clone(),
            genes: genes.to_vec(),
            outcome,
            removal,
            insertion,
        }
    } else {
        PassResult {
            schedule: work,
            genes: work_genes,
            outcome,
            removal,
            insertion,
        }
    })
}
