//! Benchmark instance generation, property metrics and the canonical text
//! format.
//!
//! The canonical file is UTF-8 with LF line endings:
//!
//! ```text
//! n initial_setup
//! b_1 .. b_n
//! t_1 .. t_n
//! d_1 .. d_n
//! e_1 .. e_n
//! r_1 .. r_n
//! w_1 .. w_n
//! s_00 .. s_0n        (n + 1 setup rows, row 0 is the dummy origin)
//! ..
//! s_n0 .. s_nn
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Order};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Cesaret,
    /// Congested horizon: Cesaret generator with tau = R = 0.1.
    Satellite,
    /// Revenue `(1 - q) * gamma + 2 q t`, correlating revenue with duration.
    Commerce { q: f64 },
    /// Total processing time scaled by `c`, with `round(n c)` orders.
    Repairman { c: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cesaret => "cesaret",
            Family::Satellite => "satellite",
            Family::Commerce { .. } => "commerce",
            Family::Repairman { .. } => "repairman",
        }
    }

    /// Family parameter (q or c), if any.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            Family::Commerce { q } => Some(q),
            Family::Repairman { c } => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    /// Tardiness factor.
    pub tau: f64,
    /// Due date range factor.
    #[serde(rename = "r")]
    pub due_range: f64,
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
    #[serde(default)]
    pub initial_setup: bool,
}

impl GenSpec {
    pub fn cesaret(n: usize, tau: f64, due_range: f64, seed: u64) -> Self {
        Self {
            n,
            tau,
            due_range,
            family: Family::Cesaret,
            seed,
            initial_setup: false,
        }
    }

    pub fn satellite(n: usize, seed: u64) -> Self {
        Self {
            family: Family::Satellite,
            ..Self::cesaret(n, 0.1, 0.1, seed)
        }
    }

    pub fn commerce(n: usize, q: f64, seed: u64) -> Self {
        Self {
            family: Family::Commerce { q },
            ..Self::cesaret(n, 0.1, 0.1, seed)
        }
    }

    pub fn repairman(n: usize, c: f64, seed: u64) -> Self {
        Self {
            family: Family::Repairman { c },
            ..Self::cesaret(n, 0.1, 0.1, seed)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn label(&self) -> String {
        let mut s = format!("{}_n{}_t{}_r{}", self.family.name(), self.n, self.tau, self.due_range);
        match self.family {
            Family::Commerce { q } => write!(s, "_q{q}").unwrap(),
            Family::Repairman { c } => write!(s, "_c{c}").unwrap(),
            _ => {}
        }
        write!(s, "_s{}", self.seed).unwrap();
        s
    }

    pub fn order_count(&self) -> usize {
        match self.family {
            Family::Repairman { c } => (self.n as f64 * c).round() as usize,
            _ => self.n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.order_count() == 0 {
            return Err(Error::Input("instance must have at least one order".into()));
        }
        if !(self.tau >= 0.0 && self.due_range >= 0.0) {
            return Err(Error::Input("tau and R must be nonnegative".into()));
        }
        match self.family {
            Family::Commerce { q } if !(0.0..=1.0).contains(&q) => {
                Err(Error::Input(format!("commerce q must lie in [0, 1], got {q}")))
            }
            Family::Repairman { c } if !(c >= 1.0) => Err(Error::Input(format!("repairman c must be >= 1, got {c}"))),
            _ => Ok(()),
        }
    }
}

/// `count` Cesaret-style specs for every `(tau, R)` cell.
pub fn cesaret_grid(n: usize, taus: &[f64], ranges: &[f64], count: usize, base_seed: u64) -> Vec<GenSpec> {
    let mut specs = Vec::new();
    for &tau in taus {
        for &r in ranges {
            for k in 0..count {
                let seed = rng::stream_key(base_seed, &[n as u64, tau.to_bits(), r.to_bits(), k as u64]);
                specs.push(GenSpec::cesaret(n, tau, r, seed));
            }
        }
    }
    specs
}

/// Draws an instance. All times are integers; revenues are integers except
/// for commerce instances with fractional `q`.
pub fn generate(spec: &GenSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Purpose::Generator, &[]);
    let count = spec.order_count();
    let (tau, range) = match spec.family {
        Family::Satellite => (0.1, 0.1),
        _ => (spec.tau, spec.due_range),
    };

    let processing: Vec<f64> = (0..count).map(|_| rng.gen_range(1..=20) as f64).collect();
    let revenue: Vec<f64> = match spec.family {
        Family::Commerce { q } => processing
            .iter()
            .map(|&t| (1.0 - q) * rng.gen_range(1..=20) as f64 + 2.0 * q * t)
            .collect(),
        _ => (0..count).map(|_| rng.gen_range(1..=20) as f64).collect(),
    };
    let mut setup = vec![vec![0.0; count + 1]; count + 1];
    for (i, row) in setup.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate().skip(1) {
            if i != j {
                *v = rng.gen_range(1..=10) as f64;
            }
        }
    }
    let s_max = setup.iter().flatten().copied().fold(0.0, f64::max);

    let scale = match spec.family {
        Family::Repairman { c } => c,
        _ => 1.0,
    };
    let total = scale * processing.iter().sum::<f64>();
    let release_hi = (tau * total).round() as i64;
    let mut v_lo = (total * (1.0 - tau - range / 2.0)).round() as i64;
    let mut v_hi = (total * (1.0 - tau + range / 2.0)).round() as i64;
    if v_lo > v_hi {
        log::warn!("empty due-date interval [{v_lo}, {v_hi}] widened by one");
        std::mem::swap(&mut v_lo, &mut v_hi);
        v_hi += 1;
    }

    let mut orders = Vec::with_capacity(count);
    for (id, (&t, &r)) in processing.iter().zip(&revenue).enumerate() {
        let order = loop {
            let b = rng.gen_range(0..=release_hi.max(0)) as f64;
            let v = rng.gen_range(v_lo..=v_hi) as f64;
            let d = b + s_max + v.max(t);
            let e = d + (range * t).round().max(1.0);
            let o = Order {
                id,
                release: b,
                processing: t,
                due: d,
                deadline: e,
                revenue: r,
                weight: r / (e - d),
            };
            if o.release + o.processing <= o.deadline {
                break o;
            }
        };
        orders.push(order);
    }
    Instance::new(spec.label(), orders, setup, spec.initial_setup)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub setup_std: f64,
    pub window_std: f64,
    pub revenue_std: f64,
    pub horizon: f64,
    pub mean_window: f64,
    pub congestion_ratio: f64,
    pub processing_std: f64,
    pub mean_conflict_ratio: f64,
    pub conflict_ratio_std: f64,
    pub setup_window_ratio: f64,
    pub process_window_ratio: f64,
    pub processing_revenue_correlation: f64,
}

impl PropertyReport {
    pub const CSV_HEADER: &'static str = "setup_std,window_std,revenue_std,horizon,mean_window,congestion_ratio,processing_std,mean_conflict_ratio,conflict_ratio_std,setup_window_ratio,process_window_ratio,processing_revenue_correlation";

    pub fn csv_row(&self) -> String {
        [
            self.setup_std,
            self.window_std,
            self.revenue_std,
            self.horizon,
            self.mean_window,
            self.congestion_ratio,
            self.processing_std,
            self.mean_conflict_ratio,
            self.conflict_ratio_std,
            self.setup_window_ratio,
            self.process_window_ratio,
            self.processing_revenue_correlation,
        ]
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Pearson correlation; 0 when either side has no spread.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0)
}

pub fn properties(instance: &Instance) -> Result<PropertyReport> {
    let n = instance.n();
    if n < 2 {
        return Err(Error::Input("property metrics need at least two orders".into()));
    }
    let orders = &instance.orders;
    let setups: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| instance.setup(i, j))
        .collect();
    let windows: Vec<f64> = orders.iter().map(|o| o.deadline - o.release).collect();
    let processing: Vec<f64> = orders.iter().map(|o| o.processing).collect();
    let revenue: Vec<f64> = orders.iter().map(|o| o.revenue).collect();

    let first = orders.iter().map(|o| o.release).fold(f64::INFINITY, f64::min);
    let last = orders.iter().map(|o| o.deadline).fold(f64::NEG_INFINITY, f64::max);
    let horizon = last - first;

    let congestion: f64 = (0..n)
        .map(|i| {
            let min_in = (0..n)
                .filter(|&j| j != i)
                .map(|j| instance.setup(j, i))
                .fold(f64::INFINITY, f64::min);
            orders[i].processing + min_in
        })
        .sum::<f64>()
        / horizon;

    let conflicts: Vec<f64> = (0..n)
        .map(|i| {
            let (bi, ei) = (orders[i].release, orders[i].deadline);
            if ei - bi <= 0.0 {
                log::warn!("order {i} has a zero-length window; conflict ratio set to 0");
                return 0.0;
            }
            let overlap: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (ei.min(orders[j].deadline) - bi.max(orders[j].release)).max(0.0))
                .sum();
            overlap / (ei - bi)
        })
        .collect();

    let mean_window = mean(&windows);
    Ok(PropertyReport {
        setup_std: std_dev(&setups),
        window_std: std_dev(&windows),
        revenue_std: std_dev(&revenue),
        horizon,
        mean_window,
        congestion_ratio: congestion,
        processing_std: std_dev(&processing),
        mean_conflict_ratio: mean(&conflicts),
        conflict_ratio_std: std_dev(&conflicts),
        setup_window_ratio: mean(&setups) / mean_window,
        process_window_ratio: mean(&processing) / mean_window,
        processing_revenue_correlation: pearson(&processing, &revenue),
    })
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn to_canonical_string(instance: &Instance) -> String {
    let o = &instance.orders;
    let mut out = format!("{} {}\n", instance.n(), u8::from(instance.initial_setup));
    for field in [
        |o: &Order| o.release,
        |o: &Order| o.processing,
        |o: &Order| o.due,
        |o: &Order| o.deadline,
        |o: &Order| o.revenue,
        |o: &Order| o.weight,
    ] {
        out.push_str(&join(o.iter().map(field)));
        out.push('\n');
    }
    for row in instance.setup_matrix() {
        out.push_str(&join(row.iter().copied()));
        out.push('\n');
    }
    out
}

fn parse_numbers(line_no: usize, line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid number {tok:?} in {what}"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(Error::Parse {
            line: line_no,
            message: format!("{what}: expected {expected} values, found {}", values.len()),
        });
    }
    Ok(values)
}

pub fn parse_canonical(text: &str, label: &str) -> Result<Instance> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let parse_err = |message: String| Error::Parse { line: line_no, message };
    let [n_tok, flag_tok] = head.as_slice() else {
        return Err(parse_err("header must be `n initial_setup`".into()));
    };
    let n: usize = n_tok.parse().map_err(|_| parse_err(format!("invalid order count {n_tok:?}")))?;
    if n == 0 {
        return Err(parse_err("instance has no orders".into()));
    }
    let initial_setup = match *flag_tok {
        "0" => false,
        "1" => true,
        other => return Err(parse_err(format!("initial setup flag must be 0 or 1, got {other:?}"))),
    };

    let names = ["release times", "processing times", "due times", "deadlines", "revenues", "weights"];
    let mut columns = Vec::with_capacity(6);
    let mut last_line = line_no;
    for what in names {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: last_line + 1,
            message: format!("missing {what}"),
        })?;
        columns.push(parse_numbers(line_no, line, n, what)?);
        last_line = line_no;
    }
    let mut setup = Vec::with_capacity(n + 1);
    for row in 0..=n {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: last_line + 1,
            message: format!("setup matrix truncated: expected {} rows, found {row}", n + 1),
        })?;
        setup.push(parse_numbers(line_no, line, n + 1, "setup row")?);
        last_line = line_no;
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::Parse {
            line: line_no,
            message: "unexpected trailing content".into(),
        });
    }
    let orders = (0..n)
        .map(|i| Order {
            id: i,
            release: columns[0][i],
            processing: columns[1][i],
            due: columns[2][i],
            deadline: columns[3][i],
            revenue: columns[4][i],
            weight: columns[5][i],
        })
        .collect();
    Instance::new(label, orders, setup, initial_setup)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_canonical(&text, &label)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_canonical_string(instance))?;
    Ok(())
}
