//! Random-key encoding, hybrid decoding and the intelligent crossover.

use rand::Rng;

use crate::error::{Error, Result};
use crate::insertion;
use crate::model::{Instance, Schedule, ScheduledOrder, TOLERANCE};
use crate::slack::SlackTable;

/// Offset used to pin the follower of a good pair right after its leader.
pub const GENE_EPSILON: f64 = 1e-9;

/// Bounds of the simple-decoding probability.
pub const DECODE_RATIO_BOUNDS: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chromosome {
    pub genes: Vec<f64>,
    pub fitness: f64,
    /// Last decoded (and possibly ALNS-improved) schedule of these genes.
    pub schedule: Option<Schedule>,
}

impl Chromosome {
    pub fn new(genes: Vec<f64>) -> Self {
        Self {
            genes,
            fitness: 0.0,
            schedule: None,
        }
    }

    pub fn set_genes(&mut self, genes: Vec<f64>) {
        self.genes = genes;
        self.schedule = None;
    }

    pub fn set_schedule(&mut self, schedule: Schedule) {
        self.fitness = schedule.fitness;
        self.schedule = Some(schedule);
    }
}

/// Number of elite and mutant members for a population of size `p`.
pub fn partition_sizes(p: usize, elite_fraction: f64, mutation_fraction: f64) -> (usize, usize) {
    let elite = ((elite_fraction * p as f64).round() as usize).min(p);
    let mutants = ((mutation_fraction * p as f64).round() as usize).min(p - elite);
    (elite, mutants)
}

/// Gene of each order drawn uniformly from its window scaled to `[0, 1]` by
/// the horizon `max e`.
pub fn init_chromosome_bounded<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Result<Chromosome> {
    let horizon = instance.horizon();
    if !(horizon > 0.0) {
        return Err(Error::Input("scheduling horizon is zero".into()));
    }
    let genes = instance
        .orders
        .iter()
        .map(|o| {
            let lo = (o.release / horizon).clamp(0.0, 1.0);
            let hi = (o.deadline / horizon).clamp(lo, 1.0);
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect();
    Ok(Chromosome::new(genes))
}

/// Probability of choosing simple decoding: mean processing time over the
/// horizon, clamped to [`DECODE_RATIO_BOUNDS`].
pub fn decode_ratio(instance: &Instance) -> f64 {
    let mean = instance.orders.iter().map(|o| o.processing).sum::<f64>() / instance.n() as f64;
    let horizon = instance.horizon();
    let raw = if horizon > 0.0 { mean / horizon } else { 1.0 };
    raw.clamp(DECODE_RATIO_BOUNDS.0, DECODE_RATIO_BOUNDS.1)
}

/// Order ids by ascending gene, ties broken by id.
pub fn decode_order(genes: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..genes.len()).collect();
    ids.sort_by(|&a, &b| genes[a].total_cmp(&genes[b]).then(a.cmp(&b)));
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Simple,
    Complex,
}

/// Appends orders by ascending gene at their earliest start, dropping any
/// that would miss the deadline or earn no positive reward.
pub fn simple_decode(instance: &Instance, genes: &[f64]) -> Schedule {
    let mut schedule = Schedule::empty();
    let mut prev = None;
    for id in decode_order(genes) {
        let o = instance.order(id);
        let start = instance.earliest_start(prev, id);
        if start > o.latest_start() + TOLERANCE {
            continue;
        }
        let reward = o.reward_at(start);
        if reward <= TOLERANCE {
            continue;
        }
        schedule.entries.push(ScheduledOrder {
            order: id,
            start,
            tardiness: o.tardiness_at(start),
        });
        schedule.fitness += reward;
        prev = Some((id, start));
    }
    schedule.recompute_fitness(instance);
    schedule
}

/// Inserts orders by ascending gene with the fast insertion algorithm.
pub fn complex_decode(instance: &Instance, genes: &[f64]) -> Schedule {
    let mut schedule = Schedule::empty();
    let mut slacks = SlackTable::default();
    for id in decode_order(genes) {
        // Ids come from `decode_order` and are unique, so this cannot fail.
        insertion::fast_insert(instance, &mut schedule, &mut slacks, id).expect("unique order ids");
    }
    schedule
}

pub fn decode_with(instance: &Instance, genes: &[f64], mode: DecodeMode) -> Schedule {
    match mode {
        DecodeMode::Simple => simple_decode(instance, genes),
        DecodeMode::Complex => complex_decode(instance, genes),
    }
}

/// Hybrid decoding: simple with probability `simple_ratio`, else complex.
pub fn decode<R: Rng + ?Sized>(instance: &Instance, genes: &[f64], simple_ratio: f64, rng: &mut R) -> Schedule {
    let mode = if rng.gen::<f64>() < simple_ratio {
        DecodeMode::Simple
    } else {
        DecodeMode::Complex
    };
    decode_with(instance, genes, mode)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodPairMark {
    pub preceding: usize,
    pub following: usize,
    pub unit_reward: f64,
}

/// Consecutive pairs whose joint reward per unit of spanned time exceeds
/// `threshold`.
pub fn mark_good_pairs(instance: &Instance, schedule: &Schedule, threshold: f64) -> Vec<GoodPairMark> {
    schedule
        .entries
        .windows(2)
        .enumerate()
        .filter_map(|(k, w)| {
            let (a, b) = (&w[0], &w[1]);
            let span = b.start + instance.order(b.order).processing - a.start;
            let unit_reward = (schedule.reward_at(instance, k) + schedule.reward_at(instance, k + 1)) / span;
            (unit_reward > threshold).then_some(GoodPairMark {
                preceding: a.order,
                following: b.order,
                unit_reward,
            })
        })
        .collect()
}

/// Moves each follower's gene to just above its leader's, stepping further
/// while the value collides with another gene.
pub fn pin_good_pairs(genes: &mut [f64], marks: &[GoodPairMark]) {
    for m in marks {
        let mut g = genes[m.preceding] + GENE_EPSILON;
        while g < 1.0 && genes.iter().enumerate().any(|(i, &x)| i != m.following && x == g) {
            g += GENE_EPSILON;
        }
        genes[m.following] = g.min(1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverParams {
    /// Probability of inheriting from the elite parent.
    pub elite_bias: f64,
    /// Probability of keeping a good pair together.
    pub keep_pair: f64,
    /// Unit-reward threshold for good pairs.
    pub good_pair_threshold: f64,
}

fn pair_partners(n: usize, marks: &[GoodPairMark]) -> Vec<Vec<usize>> {
    let mut partners = vec![Vec::new(); n];
    for m in marks {
        partners[m.preceding].push(m.following);
        partners[m.following].push(m.preceding);
    }
    partners
}

fn working_genes(instance: &Instance, parent: &Chromosome, threshold: f64) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut genes = parent.genes.clone();
    let marks = parent
        .schedule
        .as_ref()
        .map(|s| mark_good_pairs(instance, s, threshold))
        .unwrap_or_default();
    pin_good_pairs(&mut genes, &marks);
    let n = genes.len();
    (genes, pair_partners(n, &marks))
}

/// Builds one child gene by gene in ascending order id. A gene that belongs
/// to a good pair whose partner has already been copied is taken from that
/// pair's parent with probability `keep_pair`; other genes come from the
/// elite parent with probability `elite_bias`. Parents are not modified.
pub fn intelligent_crossover<R: Rng + ?Sized>(
    instance: &Instance,
    elite: &Chromosome,
    non_elite: &Chromosome,
    params: &CrossoverParams,
    rng: &mut R,
) -> Result<Chromosome> {
    let n = elite.genes.len();
    if non_elite.genes.len() != n {
        return Err(Error::Input(format!(
            "parent lengths differ: {n} vs {}",
            non_elite.genes.len()
        )));
    }
    let (elite_genes, elite_pairs) = working_genes(instance, elite, params.good_pair_threshold);
    let (other_genes, other_pairs) = working_genes(instance, non_elite, params.good_pair_threshold);
    let mut child = Vec::with_capacity(n);
    for i in 0..n {
        let placed = |partners: &Vec<usize>| partners.iter().any(|&j| j < i);
        let from_elite = if placed(&elite_pairs[i]) {
            rng.gen::<f64>() < params.keep_pair
        } else if placed(&other_pairs[i]) {
            rng.gen::<f64>() >= params.keep_pair
        } else {
            rng.gen::<f64>() < params.elite_bias
        };
        let g = if from_elite { elite_genes[i] } else { other_genes[i] };
        child.push(g.clamp(0.0, 1.0));
    }
    Ok(Chromosome::new(child))
}

/// Respaces genes evenly: the gene of rank `k` (1-based, ties by id) becomes
/// `k / (n + 1)`.
pub fn normalize_keys(genes: &mut [f64]) {
    let n = genes.len();
    for (rank, id) in decode_order(genes).into_iter().enumerate() {
        genes[id] = (rank + 1) as f64 / (n + 1) as f64;
    }
}

/// Normalizes every member. Cached schedules stay valid because the decode
/// order is unchanged.
pub fn normalize_population(population: &mut [Chromosome]) {
    for c in population {
        normalize_keys(&mut c.genes);
    }
}
