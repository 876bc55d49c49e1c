//! The Sparrow main loop: BRKGA generations with one ALNS pass for every
//! member whose decoded fitness reaches `p_f * f*`.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alns::{self, AlnsState, PassOutcome, ScoreIncrements};
use crate::brkga::{self, Chromosome, CrossoverParams};
use crate::error::{Error, Result};
use crate::model::{Instance, Schedule};
use crate::rng::{stream, Purpose};

/// Tolerance for deciding whether the best fitness improved.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub population_size: usize,
    /// Generation budget.
    pub max_iterations: usize,
    /// Stall limit in generations, as a multiple of the order count.
    pub no_improve_per_order: usize,
    /// Absolute stall limit; overrides `no_improve_per_order` when set.
    pub max_no_improve: Option<usize>,
    pub elite_fraction: f64,
    pub mutation_fraction: f64,
    pub elite_bias: f64,
    pub good_pair_threshold: f64,
    pub keep_pair: f64,
    pub removal_fraction: f64,
    pub reaction: f64,
    pub cooling: f64,
    pub score_new_best: f64,
    pub score_improved: f64,
    pub score_accepted: f64,
    /// Members with decoded fitness >= `alns_threshold * f*` get an ALNS pass.
    pub alns_threshold: f64,
    pub initial_temperature: f64,
    pub use_alns: bool,
    pub seed: u64,
    /// Decode members on the rayon pool. Results are identical either way.
    pub parallel: bool,
    /// Table tag (1..=5) when the config came from a parameter set.
    pub parameter_set: Option<u8>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            max_iterations: 50_000,
            no_improve_per_order: 10,
            max_no_improve: None,
            elite_fraction: 0.5,
            mutation_fraction: 0.1,
            elite_bias: 0.7,
            good_pair_threshold: 2.0,
            keep_pair: 0.95,
            removal_fraction: 0.4,
            reaction: 0.5,
            cooling: 0.9975,
            score_new_best: 30.0,
            score_improved: 20.0,
            score_accepted: 10.0,
            alns_threshold: 0.9,
            initial_temperature: 100.0,
            use_alns: true,
            seed: 0,
            parallel: false,
            parameter_set: Some(3),
        }
    }
}

/// The five population/iteration trade-offs compared in the benchmark study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub tag: u8,
    pub population_size: usize,
    pub no_improve_per_order: usize,
    pub max_iterations: usize,
    pub use_alns: bool,
}

pub const PARAMETER_SETS: [ParameterSet; 5] = [
    ParameterSet { tag: 1, population_size: 1, no_improve_per_order: 200, max_iterations: 1_000_000, use_alns: true },
    ParameterSet { tag: 2, population_size: 10, no_improve_per_order: 20, max_iterations: 100_000, use_alns: true },
    ParameterSet { tag: 3, population_size: 20, no_improve_per_order: 10, max_iterations: 50_000, use_alns: true },
    ParameterSet { tag: 4, population_size: 50, no_improve_per_order: 4, max_iterations: 20_000, use_alns: true },
    ParameterSet { tag: 5, population_size: 1000, no_improve_per_order: 1, max_iterations: 2_000, use_alns: false },
];

impl ParameterSet {
    pub fn get(tag: u8) -> Result<Self> {
        PARAMETER_SETS
            .iter()
            .copied()
            .find(|s| s.tag == tag)
            .ok_or_else(|| Error::Config(format!("unknown parameter set {tag}, expected 1..=5")))
    }
}

impl SolverConfig {
    pub fn for_parameter_set(tag: u8, seed: u64) -> Result<Self> {
        let mut c = Self {
            seed,
            ..Self::default()
        };
        c.apply_parameter_set(tag)?;
        Ok(c)
    }

    pub fn apply_parameter_set(&mut self, tag: u8) -> Result<()> {
        let set = ParameterSet::get(tag)?;
        self.population_size = set.population_size;
        self.no_improve_per_order = set.no_improve_per_order;
        self.max_no_improve = None;
        self.max_iterations = set.max_iterations;
        self.use_alns = set.use_alns;
        self.parameter_set = Some(tag);
        Ok(())
    }

    pub fn stall_limit(&self, n: usize) -> usize {
        self.max_no_improve.unwrap_or(self.no_improve_per_order * n)
    }

    /// Short label used in reports, e.g. `set3` or `custom`.
    pub fn tag(&self) -> String {
        match self.parameter_set {
            Some(t) => format!("set{t}"),
            None => "custom".into(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Overrides one field from a `key=value` style pair. The value is read as
    /// a TOML literal, so `true`, `0.8` and `25` work as expected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml()).map_err(|e| Error::Config(e.to_string()))?;
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        let updated: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}={value}: {e}")))?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        if self.population_size == 0 {
            return Err(Error::Config("population_size must be at least 1".into()));
        }
        prob("elite_fraction", self.elite_fraction)?;
        prob("mutation_fraction", self.mutation_fraction)?;
        prob("elite_bias", self.elite_bias)?;
        prob("keep_pair", self.keep_pair)?;
        prob("removal_fraction", self.removal_fraction)?;
        prob("reaction", self.reaction)?;
        prob("alns_threshold", self.alns_threshold)?;
        if self.elite_fraction + self.mutation_fraction > 1.0 {
            return Err(Error::Config("elite_fraction + mutation_fraction exceeds 1".into()));
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(Error::Config("cooling must lie in (0, 1]".into()));
        }
        if let Some(t) = self.parameter_set {
            ParameterSet::get(t)?;
        }
        self.alns_state().map(|_| ())
    }

    fn alns_state(&self) -> Result<AlnsState> {
        AlnsState::new(
            self.initial_temperature,
            self.reaction,
            self.cooling,
            ScoreIncrements {
                new_best: self.score_new_best,
                improved: self.score_improved,
                accepted: self.score_accepted,
            },
            self.removal_fraction,
        )
    }

    fn crossover_params(&self) -> CrossoverParams {
        CrossoverParams {
            elite_bias: self.elite_bias,
            keep_pair: self.keep_pair,
            good_pair_threshold: self.good_pair_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    MaxIterations,
    NoImprove,
    AllScheduledFullRevenue,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::MaxIterations => "max-iter",
            Termination::NoImprove => "no-improve",
            Termination::AllScheduledFullRevenue => "all-scheduled-full-revenue",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub best: Schedule,
    pub best_fitness: f64,
    pub generations: usize,
    pub termination: Termination,
    pub wall_time_secs: f64,
    /// Best fitness after each generation.
    pub trace: Vec<f64>,
    pub alns_passes: usize,
}

/// Progress notifications for instrumentation and tests.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveEvent {
    AlnsPass {
        generation: usize,
        member: usize,
        /// Decoded fitness that admitted the member to the pass.
        fitness: f64,
        best_before: f64,
        outcome: PassOutcome,
    },
    Generation {
        generation: usize,
        best: f64,
        population_size: usize,
    },
}

pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<SolveResult> {
    solve_with_observer(instance, config, |_| {})
}

/// Solves with one of the five predefined parameter sets.
pub fn run_parameter_set(instance: &Instance, set_tag: u8, seed: u64) -> Result<SolveResult> {
    solve(instance, &SolverConfig::for_parameter_set(set_tag, seed)?)
}

fn decode_all(instance: &Instance, population: &[Chromosome], ratio: f64, config: &SolverConfig, generation: usize) -> Vec<Schedule> {
    // Members with unchanged genes (elites) keep their cached schedule.
    let decode_one = |(m, c): (usize, &Chromosome)| match &c.schedule {
        Some(s) => s.clone(),
        None => {
            let mut rng = stream(config.seed, Purpose::Decode, &[generation as u64, m as u64]);
            brkga::decode(instance, &c.genes, ratio, &mut rng)
        }
    };
    if config.parallel {
        population.par_iter().enumerate().map(decode_one).collect()
    } else {
        population.iter().enumerate().map(decode_one).collect()
    }
}

pub fn solve_with_observer<F: FnMut(&SolveEvent)>(
    instance: &Instance,
    config: &SolverConfig,
    mut observe: F,
) -> Result<SolveResult> {
    config.validate()?;
    let started = Instant::now();
    let n = instance.n();
    let p = config.population_size;
    let (elite_count, mutant_count) = brkga::partition_sizes(p, config.elite_fraction, config.mutation_fraction);
    let ratio = brkga::decode_ratio(instance);
    let stall_limit = config.stall_limit(n);
    let crossover = config.crossover_params();
    let full_revenue = instance.total_revenue();
    let mut state = config.alns_state()?;

    let mut population = (0..p)
        .map(|m| brkga::init_chromosome_bounded(instance, &mut stream(config.seed, Purpose::Init, &[m as u64])))
        .collect::<Result<Vec<_>>>()?;

    let mut best = Schedule::empty();
    let mut best_fitness = 0.0;
    let mut trace = Vec::new();
    let mut alns_passes = 0;
    let is_full = |s: &Schedule| s.len() == n && (s.fitness - full_revenue).abs() <= IMPROVEMENT_TOLERANCE;

    if config.max_iterations == 0 {
        for s in decode_all(instance, &population, ratio, config, 0) {
            if s.fitness > best_fitness {
                best_fitness = s.fitness;
                best = s;
            }
        }
        let termination = if is_full(&best) {
            Termination::AllScheduledFullRevenue
        } else {
            Termination::MaxIterations
        };
        return Ok(SolveResult {
            best,
            best_fitness,
            generations: 0,
            termination,
            wall_time_secs: started.elapsed().as_secs_f64(),
            trace,
            alns_passes,
        });
    }

    let mut generation = 0;
    let mut stall = 0;
    let termination = loop {
        let decoded = decode_all(instance, &population, ratio, config, generation);
        let best_at_start = best_fitness;
        for (m, mut schedule) in decoded.into_iter().enumerate() {
            if config.use_alns && schedule.fitness >= config.alns_threshold * best_fitness {
                let mut rng = stream(config.seed, Purpose::Alns, &[generation as u64, m as u64]);
                let admitted = schedule.fitness;
                let best_before = best_fitness;
                let pass = alns::alns_pass(instance, &schedule, &population[m].genes, &mut state, best_fitness, &mut rng)?;
                alns_passes += 1;
                observe(&SolveEvent::AlnsPass {
                    generation,
                    member: m,
                    fitness: admitted,
                    best_before,
                    outcome: pass.outcome,
                });
                if pass.outcome != PassOutcome::Rejected {
                    population[m].set_genes(pass.genes);
                    schedule = pass.schedule;
                }
            }
            if schedule.fitness > best_fitness {
                best_fitness = schedule.fitness;
                best = schedule.clone();
            }
            population[m].set_schedule(schedule);
        }
        generation += 1;
        trace.push(best_fitness);
        observe(&SolveEvent::Generation {
            generation,
            best: best_fitness,
            population_size: population.len(),
        });
        if best_fitness > best_at_start + IMPROVEMENT_TOLERANCE {
            stall = 0;
        } else {
            stall += 1;
        }
        if is_full(&best) {
            break Termination::AllScheduledFullRevenue;
        }
        if generation >= config.max_iterations {
            break Termination::MaxIterations;
        }
        if stall >= stall_limit {
            break Termination::NoImprove;
        }

        population = next_generation(instance, population, elite_count, mutant_count, &crossover, config.seed, generation)?;
        brkga::normalize_population(&mut population);
        state.cool();
        state.update_weights();
    };

    Ok(SolveResult {
        best,
        best_fitness,
        generations: generation,
        termination,
        wall_time_secs: started.elapsed().as_secs_f64(),
        trace,
        alns_passes,
    })
}

/// Elites survive, mutants are redrawn like the initial population and the
/// rest are crossover children of a random elite and a random non-elite.
fn next_generation(
    instance: &Instance,
    mut population: Vec<Chromosome>,
    elite_count: usize,
    mutant_count: usize,
    crossover: &CrossoverParams,
    seed: u64,
    generation: usize,
) -> Result<Vec<Chromosome>> {
    let p = population.len();
    // Stable sort keeps member order among equal fitnesses.
    population.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
    let non_elite = population.split_off(elite_count);
    let elites = population;
    let g = generation as u64;

    let mut next = elites.clone();
    for k in 0..mutant_count {
        let mut rng = stream(seed, Purpose::Mutation, &[g, k as u64]);
        next.push(brkga::init_chromosome_bounded(instance, &mut rng)?);
    }
    let mut rng = stream(seed, Purpose::Crossover, &[g]);
    let pool = if non_elite.is_empty() { &elites } else { &non_elite };
    while next.len() < p {
        let a = &elites[rng.gen_range(0..elites.len())];
        let b = &pool[rng.gen_range(0..pool.len())];
        next.push(brkga::intelligent_crossover(instance, a, b, crossover, &mut rng)?);
    }
    Ok(next)
}
