//! Experiment grids: repeated solver runs, gap aggregation and CSV/JSON
//! reports.
//!
//! Gaps are aggregated in two stages. Each instance first gets the mean gap
//! over its runs, then every group of instances (same n, tau, R and family
//! parameter) reports the min, mean and max of those per-instance means.
//!
//! Everything written except `timings.csv` is a pure function of the
//! manifest, so re-running a manifest reproduces the reports byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::instances::{self, GenSpec};
use crate::model::{Instance, TOLERANCE};
use crate::oracle;
use crate::solver::{self, SolverConfig};

/// `100 (reference - fitness) / reference`; negative when the fitness beats
/// the reference.
pub fn gap(fitness: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::Input(format!("gap reference must be positive, got {reference}")));
    }
    Ok(100.0 * (reference - fitness) / reference)
}

/// Relative gap of `gap_a` to a baseline gap, `None` when the baseline is 0.
pub fn gap_to_baseline(gap_a: f64, gap_b: f64) -> Option<f64> {
    (gap_b != 0.0).then(|| (gap_a - gap_b) / gap_b)
}

/// Spearman rank correlation and its two-sided p-value from the Student t
/// approximation. Ties receive average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let rho = crate::instances::pearson(&rx, &ry);
    let n = xs.len() as f64;
    if n < 3.0 || rho.abs() >= 1.0 {
        return (rho, if rho.abs() >= 1.0 { 0.0 } else { 1.0 });
    }
    let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 2.0).expect("valid degrees of freedom");
    (rho, 2.0 * (1.0 - dist.cdf(t.abs())))
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceSource {
    Generated(GenSpec),
    File { path: PathBuf },
}

impl InstanceSource {
    pub fn load(&self) -> Result<Instance> {
        match self {
            InstanceSource::Generated(spec) => instances::generate(spec),
            InstanceSource::File { path } => instances::read_instance(path),
        }
    }

    fn group(&self, instance: &Instance) -> GroupKey {
        match self {
            InstanceSource::Generated(spec) => GroupKey {
                n: spec.n,
                tau: Some(spec.tau),
                r: Some(spec.due_range),
                family: spec.family.name().to_string(),
                param: spec.family.parameter(),
            },
            InstanceSource::File { .. } => GroupKey {
                n: instance.n(),
                tau: None,
                r: None,
                family: "file".into(),
                param: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Report raw fitness only.
    None,
    /// Exact optimum; only for instances within the oracle size limit.
    Oracle,
    /// Best fitness over every run of the grid for that instance.
    BestOfRuns,
    /// Externally supplied best-known values keyed by instance label.
    Values { values: BTreeMap<String, f64> },
}

/// Everything needed to reproduce a grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub instances: Vec<InstanceSource>,
    /// Solver configurations; each run overrides the seed.
    pub configs: Vec<SolverConfig>,
    pub seeds: Vec<u64>,
    pub reference: ReferenceMode,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct GroupKey {
    pub n: usize,
    pub tau: Option<f64>,
    pub r: Option<f64>,
    pub family: String,
    pub param: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub group: GroupKey,
    pub config: String,
    pub seed: u64,
    pub fitness: f64,
    pub generations: usize,
    pub termination: String,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Gap,
    Fitness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub group: GroupKey,
    pub config: String,
    pub metric: Metric,
    pub min: f64,
    pub avg: f64,
    pub max: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub records: Vec<RunRecord>,
    pub gaps: Vec<GapRow>,
    /// Reference value used per instance label, where one was available.
    pub references: BTreeMap<String, f64>,
    /// Per-instance mean gap (or fitness) keyed by `(label, config)`.
    pub instance_means: BTreeMap<(String, String), f64>,
}

fn config_tags(configs: &[SolverConfig]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    configs
        .iter()
        .map(|c| {
            let tag = c.tag();
            let k = seen.entry(tag.clone()).or_insert(0);
            *k += 1;
            if *k == 1 {
                tag
            } else {
                format!("{tag}-{k}")
            }
        })
        .collect()
}

/// Runs every (instance, config, seed) combination and aggregates gaps.
pub fn run_grid(manifest: &Manifest) -> Result<GridOutput> {
    if manifest.configs.is_empty() || manifest.seeds.is_empty() {
        return Err(Error::Config("grid needs at least one config and one seed".into()));
    }
    let loaded = manifest
        .instances
        .iter()
        .map(|src| src.load().map(|inst| (src.group(&inst), inst)))
        .collect::<Result<Vec<_>>>()?;
    let tags = config_tags(&manifest.configs);

    let jobs: Vec<(usize, usize, u64)> = (0..loaded.len())
        .flat_map(|i| {
            (0..manifest.configs.len()).flat_map(move |c| manifest.seeds.iter().map(move |&s| (i, c, s)))
        })
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(i, c, seed)| {
            let (group, inst) = &loaded[i];
            let config = SolverConfig {
                seed,
                ..manifest.configs[c].clone()
            };
            let r = solver::solve(inst, &config)?;
            Ok(RunRecord {
                instance: inst.label.clone(),
                group: group.clone(),
                config: tags[c].clone(),
                seed,
                fitness: r.best_fitness,
                generations: r.generations,
                termination: r.termination.as_str().to_string(),
                wall_time_secs: r.wall_time_secs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let references = references(manifest, &loaded, &records)?;
    let (gaps, instance_means) = aggregate(&records, &references, &tags);
    Ok(GridOutput {
        records,
        gaps,
        references,
        instance_means,
    })
}

fn references(
    manifest: &Manifest,
    loaded: &[(GroupKey, Instance)],
    records: &[RunRecord],
) -> Result<BTreeMap<String, f64>> {
    let mut refs = BTreeMap::new();
    match &manifest.reference {
        ReferenceMode::None => {}
        ReferenceMode::Oracle => {
            for (_, inst) in loaded {
                match oracle::exact_solve(inst, oracle::DEFAULT_LIMIT) {
                    Ok(r) => {
                        refs.insert(inst.label.clone(), r.optimal);
                    }
                    Err(Error::Size { .. }) => log::warn!("no oracle reference for {}: too large", inst.label),
                    Err(e) => return Err(e),
                }
            }
        }
        ReferenceMode::BestOfRuns => {
            for r in records {
                let best = refs.entry(r.instance.clone()).or_insert(f64::NEG_INFINITY);
                *best = best.max(r.fitness);
            }
        }
        ReferenceMode::Values { values } => {
            refs.extend(values.iter().map(|(k, v)| (k.clone(), *v)));
        }
    }
    refs.retain(|label, v| {
        let keep = *v > 0.0;
        if !keep {
            log::warn!("reference for {label} is not positive; reporting fitness instead");
        }
        keep
    });
    Ok(refs)
}

fn aggregate(
    records: &[RunRecord],
    references: &BTreeMap<String, f64>,
    tags: &[String],
) -> (Vec<GapRow>, BTreeMap<(String, String), f64>) {
    // (label, config) -> values over seeds, keeping first-seen group order.
    let mut per_instance: BTreeMap<(String, String), (GroupKey, Vec<f64>, Metric)> = BTreeMap::new();
    for r in records {
        let (value, metric) = match references.get(&r.instance) {
            Some(&reference) => (gap(r.fitness, reference).expect("positive reference"), Metric::Gap),
            None => (r.fitness, Metric::Fitness),
        };
        per_instance
            .entry((r.instance.clone(), r.config.clone()))
            .or_insert_with(|| (r.group.clone(), Vec::new(), metric))
            .1
            .push(value);
    }
    if references.is_empty() && !records.is_empty() {
        log::warn!("no gap references available; reporting raw fitness");
    }
    let mut means = BTreeMap::new();
    let mut groups: Vec<(GroupKey, String, Metric, Vec<f64>)> = Vec::new();
    for ((label, config), (group, values, metric)) in per_instance {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        means.insert((label, config.clone()), mean);
        match groups
            .iter_mut()
            .find(|(g, c, m, _)| *g == group && *c == config && *m == metric)
        {
            Some(slot) => slot.3.push(mean),
            None => groups.push((group, config, metric, vec![mean])),
        }
    }
    let tag_rank = |c: &str| tags.iter().position(|t| t == c).unwrap_or(usize::MAX);
    groups.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(tag_rank(&a.1).cmp(&tag_rank(&b.1)))
    });
    let rows = groups
        .into_iter()
        .map(|(group, config, metric, vals)| GapRow {
            group,
            config,
            metric,
            min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            avg: vals.iter().sum::<f64>() / vals.len() as f64,
            max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            instances: vals.len(),
        })
        .collect();
    (rows, means)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn group_cells(g: &GroupKey) -> [String; 5] {
    [g.n.to_string(), opt(g.tau), opt(g.r), g.family.clone(), opt(g.param)]
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `manifest.json`, `runs.csv`, `gaps.csv`, `gaps_by_config.csv`
/// and `timings.csv` into `dir`.
pub fn write_outputs(manifest: &Manifest, output: &GridOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("manifest.json"), manifest.to_json())?;

    write_csv(
        &dir.join("runs.csv"),
        &["instance", "n", "tau", "r", "family", "param", "config", "seed", "fitness", "generations", "termination"],
        output.records.iter().map(|r| {
            let mut row = vec![r.instance.clone()];
            row.extend(group_cells(&r.group));
            row.extend([
                r.config.clone(),
                r.seed.to_string(),
                r.fitness.to_string(),
                r.generations.to_string(),
                r.termination.clone(),
            ]);
            row
        }),
    )?;
    write_csv(
        &dir.join("timings.csv"),
        &["instance", "config", "seed", "wall_time_secs"],
        output
            .records
            .iter()
            .map(|r| vec![r.instance.clone(), r.config.clone(), r.seed.to_string(), r.wall_time_secs.to_string()]),
    )?;
    write_csv(
        &dir.join("gaps.csv"),
        &["n", "tau", "r", "family", "param", "config", "metric", "min", "avg", "max", "instances"],
        output.gaps.iter().map(|g| {
            let mut row: Vec<String> = group_cells(&g.group).into();
            row.extend([
                g.config.clone(),
                format!("{:?}", g.metric).to_lowercase(),
                g.min.to_string(),
                g.avg.to_string(),
                g.max.to_string(),
                g.instances.to_string(),
            ]);
            row
        }),
    )?;

    // One avg column per config, one row per group.
    let tags = config_tags(&manifest.configs);
    let mut wide: Vec<(GroupKey, BTreeMap<String, f64>)> = Vec::new();
    for g in &output.gaps {
        match wide.iter_mut().find(|(k, _)| *k == g.group) {
            Some((_, m)) => {
                m.insert(g.config.clone(), g.avg);
            }
            None => wide.push((g.group.clone(), BTreeMap::from([(g.config.clone(), g.avg)]))),
        }
    }
    let mut header: Vec<&str> = vec!["n", "tau", "r", "family", "param"];
    header.extend(tags.iter().map(String::as_str));
    write_csv(
        &dir.join("gaps_by_config.csv"),
        &header,
        wide.into_iter().map(|(k, m)| {
            let mut row: Vec<String> = group_cells(&k).into();
            row.extend(tags.iter().map(|t| opt(m.get(t).copied())));
            row
        }),
    )?;
    Ok(())
}

/// Writes one property row per instance.
pub fn write_properties(rows: &[(String, instances::PropertyReport)], path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["instance"];
    header.extend(instances::PropertyReport::CSV_HEADER.split(','));
    write_csv(
        path.as_ref(),
        &header,
        rows.iter().map(|(label, p)| {
            let mut row = vec![label.clone()];
            row.extend(p.csv_row().split(',').map(str::to_string));
            row
        }),
    )
}

/// True when every gap row is nonnegative up to the model tolerance.
pub fn gaps_nonnegative(rows: &[GapRow]) -> bool {
    rows.iter().filter(|r| r.metric == Metric::Gap).all(|r| r.min >= -TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_values() {
        assert_eq!(gap(50.0, 50.0).unwrap(), 0.0);
        assert!((gap(90.0, 100.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(gap(104.09, 100.0).unwrap() < 0.0);
        assert!(gap(1.0, 0.0).is_err());
    }

    #[test]
    fn baseline_ratio() {
        assert_eq!(gap_to_baseline(2.0, 2.0), Some(0.0));
        assert_eq!(gap_to_baseline(4.0, 2.0), Some(1.0));
        assert!(gap_to_baseline(1.0, 2.0).unwrap() < 0.0);
        assert_eq!(gap_to_baseline(1.0, 0.0), None);
    }

    #[test]
    fn spearman_detects_monotone_trend() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (rho, p) = spearman(&xs, &ys);
        assert!((rho - 1.0).abs() < 1e-12 && p == 0.0);
        let noisy: Vec<f64> = xs.iter().map(|x| -x + if (*x as i32) % 2 == 0 { 3.0 } else { 0.0 }).collect();
        let (rho, p) = spearman(&xs, &noisy);
        assert!(rho < -0.8 && p < 0.01);
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn single_run_grid_collapses_min_avg_max() {
        let m = Manifest {
            instances: vec![InstanceSource::Generated(GenSpec::cesaret(6, 0.5, 0.5, 1))],
            configs: vec![SolverConfig {
                max_iterations: 5,
                ..SolverConfig::default()
            }],
            seeds: vec![3],
            reference: ReferenceMode::Oracle,
        };
        let out = run_grid(&m).unwrap();
        assert_eq!(out.records.len(), 1);
        let g = &out.gaps[0];
        assert_eq!(g.metric, Metric::Gap);
        assert_eq!(g.min, g.avg);
        assert_eq!(g.avg, g.max);
        assert!(g.min >= -TOLERANCE);
    }

    #[test]
    fn missing_reference_falls_back_to_fitness() {
        let m = Manifest {
            instances: vec![InstanceSource::Generated(GenSpec::cesaret(12, 0.5, 0.5, 1))],
            configs: vec![SolverConfig {
                max_iterations: 2,
                ..SolverConfig::default()
            }],
            seeds: vec![0],
            reference: ReferenceMode::Oracle,
        };
        let out = run_grid(&m).unwrap();
        assert_eq!(out.gaps[0].metric, Metric::Fitness);
        assert_eq!(out.gaps[0].avg, out.records[0].fitness);
    }
}
