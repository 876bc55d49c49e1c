use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sparrow_core::harness::{self, InstanceSource, Manifest, ReferenceMode};
use sparrow_core::instances::{self, Family, GenSpec};
use sparrow_core::{oracle, solver, SolverConfig};

#[derive(Parser)]
#[command(name = "sparrow", version, about = "Order acceptance and scheduling solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances in canonical format.
    Generate(GenerateArgs),
    /// Solve one instance and print the schedule as JSON.
    Solve(SolveArgs),
    /// Exact optimum for a small instance.
    Oracle(OracleArgs),
    /// Run a grid of instances, configs and seeds.
    Bench(BenchArgs),
    /// Write instance property metrics as CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Cesaret,
    Satellite,
    Commerce,
    Repairman,
}

#[derive(Args)]
struct SpecArgs {
    /// Generator spec file (TOML); overrides the other spec flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cesaret")]
    family: FamilyArg,
    #[arg(short, long, default_value_t = 25)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long = "r", default_value_t = 0.5)]
    due_range: f64,
    /// Commerce correlation level.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Repairman expansion factor.
    #[arg(long, default_value_t = 1.2)]
    c: f64,
    #[arg(long)]
    initial_setup: bool,
}

impl SpecArgs {
    fn base(&self, seed: u64) -> Result<GenSpec> {
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(GenSpec::from_toml(&text)?);
        }
        let family = match self.family {
            FamilyArg::Cesaret => Family::Cesaret,
            FamilyArg::Satellite => Family::Satellite,
            FamilyArg::Commerce => Family::Commerce { q: self.q },
            FamilyArg::Repairman => Family::Repairman { c: self.c },
        };
        let (tau, due_range) = match family {
            Family::Satellite => (0.1, 0.1),
            _ => (self.tau, self.due_range),
        };
        Ok(GenSpec {
            n: self.n,
            tau,
            due_range,
            family,
            seed,
            initial_setup: self.initial_setup,
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Solver config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter-set tag 1..=5.
    #[arg(long = "set")]
    parameter_set: Option<u8>,
    /// Field override, e.g. `--param population_size=30`. Repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SolverConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SolverConfig::from_toml(&text)?
            }
            None => SolverConfig::default(),
        };
        if let Some(tag) = self.parameter_set {
            config.apply_parameter_set(tag)?;
        }
        for p in &self.params {
            let Some((k, v)) = p.split_once('=') else {
                bail!("--param expects KEY=VALUE, got {p:?}");
            };
            config.set(k.trim(), v.trim())?;
        }
        config.parameter_set = config.parameter_set.filter(|&t| matches_set(&config, t));
        config.validate()?;
        Ok(config)
    }
}

/// True when `config` is parameter set `tag` up to seed and parallelism.
fn matches_set(config: &SolverConfig, tag: u8) -> bool {
    SolverConfig::for_parameter_set(tag, config.seed)
        .map(|reference| SolverConfig { parallel: config.parallel, ..reference } == *config)
        .unwrap_or(false)
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Write `solution.json` here instead of printing it.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    /// Largest order count to attempt.
    #[arg(long, default_value_t = oracle::DEFAULT_LIMIT)]
    limit: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    None,
    Oracle,
    Best,
}

#[derive(Args)]
struct BenchArgs {
    /// Re-run an existing manifest.json; grid flags are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    spec: SpecArgs,
    /// Tardiness factors for the grid.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    taus: Vec<f64>,
    /// Due-date ranges for the grid.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    ranges: Vec<f64>,
    /// Instances per grid cell.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Parameter sets to compare; empty means the config flags.
    #[arg(long, value_delimiter = ',')]
    sets: Vec<u8>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Runs per instance, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 10)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "best")]
    reference: ReferenceArg,
    /// Instance files to use instead of a generated grid.
    #[arg(long)]
    instances: Vec<PathBuf>,
    #[arg(short, long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Instance files or directories of them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(short, long, default_value = "properties.csv")]
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Bench(a) => bench(a),
        Command::Analyze(a) => analyze(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out)?;
    for k in 0..a.count {
        let spec = a.spec.base(a.seed + k)?;
        let spec = GenSpec { seed: if a.spec.spec.is_some() { spec.seed + k } else { spec.seed }, ..spec };
        let inst = instances::generate(&spec)?;
        let path = a.out.join(format!("{}.txt", inst.label));
        instances::write_instance(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let inst = instances::read_instance(&a.instance)?;
    let mut config = a.config.load()?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let result = solver::solve(&inst, &config)?;
    let json = serde_json::json!({
        "instance": inst.label,
        "config": config.tag(),
        "seed": config.seed,
        "fitness": result.best_fitness,
        "sequence": result.best.sequence(),
        "starts": result.best.entries.iter().map(|e| e.start).collect::<Vec<_>>(),
        "generations": result.generations,
        "termination": result.termination.as_str(),
        "alns_passes": result.alns_passes,
        "wall_time_secs": result.wall_time_secs,
    });
    let text = serde_json::to_string_pretty(&json)? + "\n";
    match a.out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("solution.json"), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run_oracle(a: OracleArgs) -> Result<()> {
    let inst = instances::read_instance(&a.instance)?;
    let r = oracle::exact_solve(&inst, a.limit)?;
    let json = serde_json::json!({ "optimal": r.optimal, "sequence": r.sequence, "nodes": r.nodes });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let manifest = match &a.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Manifest::from_json(&text)?
        }
        None => build_manifest(&a)?,
    };
    let output = harness::run_grid(&manifest)?;
    harness::write_outputs(&manifest, &output, &a.out)?;
    eprintln!("{} runs written to {}", output.records.len(), a.out.display());
    Ok(())
}

fn build_manifest(a: &BenchArgs) -> Result<Manifest> {
    let instances = if a.instances.is_empty() {
        let base = a.spec.base(a.seed)?;
        let mut specs = Vec::new();
        match base.family {
            Family::Cesaret => {
                specs = instances::cesaret_grid(base.n, &a.taus, &a.ranges, a.count, a.seed);
                for s in &mut specs {
                    s.initial_setup = base.initial_setup;
                }
            }
            _ => {
                for k in 0..a.count as u64 {
                    specs.push(GenSpec { seed: a.seed + k, ..base });
                }
            }
        }
        specs.into_iter().map(InstanceSource::Generated).collect()
    } else {
        a.instances.iter().map(|p| InstanceSource::File { path: p.clone() }).collect()
    };
    let configs = if a.sets.is_empty() {
        vec![a.config.load()?]
    } else {
        let base = a.config.load()?;
        a.sets
            .iter()
            .map(|&t| {
                let mut c = base.clone();
                c.apply_parameter_set(t).map(|_| c)
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let reference = match a.reference {
        ReferenceArg::None => ReferenceMode::None,
        ReferenceArg::Oracle => ReferenceMode::Oracle,
        ReferenceArg::Best => ReferenceMode::BestOfRuns,
    };
    Ok(Manifest {
        instances,
        configs,
        seeds: (a.seed..a.seed + a.runs).collect(),
        reference,
    })
}

fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in collect_files(&a.paths)? {
        let inst = instances::read_instance(&path)?;
        rows.push((inst.label.clone(), instances::properties(&inst)?));
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    harness::write_properties(&rows, &a.out)?;
    eprintln!("{} instances analyzed into {}", rows.len(), a.out.display());
    Ok(())
}
