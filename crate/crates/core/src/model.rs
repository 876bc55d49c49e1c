//! Problem data, earliest-start scheduling and objective evaluation.
//!
//! Orders are indexed `0..n`. The setup matrix is stored with one extra
//! leading row and column for the dummy origin: `setup[0][j + 1]` is the setup
//! before order `j` when it is scheduled first, `setup[i + 1][j + 1]` the setup
//! between orders `i` and `j`.
//!
//! A schedule always places each order at the earliest start allowed by its
//! predecessor: `max(b_j, p_i + t_i) + s_ij`. For the first order this is
//! `b_j`, or `max(b_j, 0) + s_0j` when the initial setup is enabled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when checking float-valued constraints.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: usize,
    pub release: f64,
    pub processing: f64,
    pub due: f64,
    pub deadline: f64,
    pub revenue: f64,
    /// Tardiness penalty per time unit past the due time.
    pub weight: f64,
}

impl Order {
    #[inline]
    pub fn latest_start(&self) -> f64 {
        self.deadline - self.processing
    }

    #[inline]
    pub fn tardiness_at(&self, start: f64) -> f64 {
        (start + self.processing - self.due).max(0.0)
    }

    /// Reward without checking the start against the window.
    #[inline]
    pub fn reward_at(&self, start: f64) -> f64 {
        self.revenue - self.weight * self.tardiness_at(start)
    }

    #[inline]
    pub fn unit_revenue(&self) -> f64 {
        self.revenue / self.processing
    }
}

/// Revenue minus tardiness penalty for `order` started at `start`.
pub fn order_reward(order: &Order, start: f64) -> Result<f64> {
    if start < order.release - TOLERANCE || start > order.latest_start() + TOLERANCE {
        return Err(Error::Contract(format!(
            "start {start} of order {} outside [{}, {}]",
            order.id,
            order.release,
            order.latest_start()
        )));
    }
    Ok(order.reward_at(start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub label: String,
    pub orders: Vec<Order>,
    setup: Vec<Vec<f64>>,
    pub initial_setup: bool,
}

impl Instance {
    /// Builds an instance, checking matrix shape and order invariants.
    ///
    /// `setup` must be `(n + 1) x (n + 1)`; column 0 and the diagonal are
    /// ignored and stored as zero. Orders are re-indexed to their position.
    pub fn new(
        label: impl Into<String>,
        mut orders: Vec<Order>,
        mut setup: Vec<Vec<f64>>,
        initial_setup: bool,
    ) -> Result<Self> {
        let n = orders.len();
        if n == 0 {
            return Err(Error::Input("instance has no orders".into()));
        }
        if setup.len() != n + 1 || setup.iter().any(|row| row.len() != n + 1) {
            return Err(Error::Input(format!(
                "setup matrix must be {0}x{0} for {n} orders",
                n + 1
            )));
        }
        for (i, row) in setup.iter_mut().enumerate() {
            row[0] = 0.0;
            if i > 0 {
                row[i] = 0.0;
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::Input(format!("negative or non-finite setup time {v} in row {i}")));
            }
        }
        for (i, o) in orders.iter_mut().enumerate() {
            o.id = i;
            if !(o.processing > 0.0) {
                return Err(Error::Input(format!("order {i}: processing time must be positive")));
            }
            if !(o.release <= o.due && o.due <= o.deadline) {
                return Err(Error::Input(format!(
                    "order {i}: requires release <= due <= deadline, got {} {} {}",
                    o.release, o.due, o.deadline
                )));
            }
            if o.release < 0.0 || o.revenue < 0.0 || o.weight < 0.0 {
                return Err(Error::Input(format!(
                    "order {i}: release, revenue and weight must be nonnegative"
                )));
            }
            if o.release + o.processing > o.deadline {
                log::warn!("order {i} cannot be scheduled even in isolation");
            }
        }
        Ok(Self {
            label: label.into(),
            orders,
            setup,
            initial_setup,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.orders.len()
    }

    #[inline]
    pub fn order(&self, id: usize) -> &Order {
        &self.orders[id]
    }

    /// Full `(n + 1) x (n + 1)` matrix including the dummy origin row.
    pub fn setup_matrix(&self) -> &[Vec<f64>] {
        &self.setup
    }

    /// Setup between two orders.
    #[inline]
    pub fn setup(&self, from: usize, to: usize) -> f64 {
        self.setup[from + 1][to + 1]
    }

    /// Setup before `to`, which is `0` for the first order unless the initial
    /// setup is enabled.
    #[inline]
    pub fn setup_after(&self, prev: Option<usize>, to: usize) -> f64 {
        match prev {
            Some(i) => self.setup(i, to),
            None if self.initial_setup => self.setup[0][to + 1],
            None => 0.0,
        }
    }

    /// Earliest start of `next` given the predecessor `(order, start)`.
    #[inline]
    pub fn earliest_start(&self, prev: Option<(usize, f64)>, next: usize) -> f64 {
        let o = &self.orders[next];
        match prev {
            Some((i, p)) => o.release.max(p + self.orders[i].processing) + self.setup(i, next),
            None => o.release.max(0.0) + self.setup_after(None, next),
        }
    }

    /// Latest deadline; the scheduling horizon is taken to start at 0.
    pub fn horizon(&self) -> f64 {
        self.orders.iter().map(|o| o.deadline).fold(0.0, f64::max)
    }

    pub fn total_revenue(&self) -> f64 {
        self.orders.iter().map(|o| o.revenue).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledOrder {
    pub order: usize,
    pub start: f64,
    pub tardiness: f64,
}

/// Accepted orders in processing order together with their start times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduledOrder>,
    pub fitness: f64,
}

impl Schedule {
    pub fn empty() -> Self {
        Self::default()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sequence(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.order).collect()
    }

    pub fn contains(&self, order: usize) -> bool {
        self.entries.iter().any(|e| e.order == order)
    }

    pub fn position_of(&self, order: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.order == order)
    }

    pub fn total_tardiness(&self) -> f64 {
        self.entries.iter().map(|e| e.tardiness).sum()
    }

    /// Reward of the entry at `pos`.
    pub fn reward_at(&self, instance: &Instance, pos: usize) -> f64 {
        let e = &self.entries[pos];
        instance.order(e.order).reward_at(e.start)
    }

    pub(crate) fn prev_of(&self, pos: usize) -> Option<(usize, f64)> {
        pos.checked_sub(1).map(|k| (self.entries[k].order, self.entries[k].start))
    }

    /// Sum of order rewards, recomputed from the stored starts.
    pub(crate) fn recompute_fitness(&mut self, instance: &Instance) {
        self.fitness = self
            .entries
            .iter()
            .map(|e| instance.order(e.order).reward_at(e.start))
            .sum();
    }

    /// Re-applies the earliest-start rule from `from` onward, stopping at the
    /// first entry past `from` whose start is unchanged. Returns the index of
    /// the last entry that was recomputed. Does not check deadlines and does
    /// not touch `fitness`.
    pub(crate) fn propagate_from(&mut self, instance: &Instance, from: usize) -> usize {
        let mut last = from;
        for k in from..self.entries.len() {
            let start = instance.earliest_start(self.prev_of(k), self.entries[k].order);
            if k > from && start == self.entries[k].start {
                break;
            }
            let o = instance.order(self.entries[k].order);
            self.entries[k].start = start;
            self.entries[k].tardiness = o.tardiness_at(start);
            last = k;
        }
        last
    }

    /// Position of the first entry whose start exceeds its latest start.
    pub(crate) fn first_late(&self, instance: &Instance) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.start > instance.order(e.order).latest_start() + TOLERANCE)
    }
}

/// Schedules `sequence` with every order at its earliest start.
///
/// Fails with [`Error::Infeasible`] naming the first order that would start
/// past `e - t`.
pub fn earliest_start_schedule(instance: &Instance, sequence: &[usize]) -> Result<Schedule> {
    let n = instance.n();
    let mut seen = vec![false; n];
    for &id in sequence {
        if id >= n {
            return Err(Error::Input(format!("unknown order id {id}")));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::Input(format!("order {id} appears twice in the sequence")));
        }
    }
    let mut entries = Vec::with_capacity(sequence.len());
    let mut prev = None;
    let mut fitness = 0.0;
    for (position, &id) in sequence.iter().enumerate() {
        let o = instance.order(id);
        let start = instance.earliest_start(prev, id);
        if start > o.latest_start() + TOLERANCE {
            return Err(Error::Infeasible {
                order: id,
                position,
                start,
                latest: o.latest_start(),
            });
        }
        let tardiness = o.tardiness_at(start);
        fitness += o.revenue - o.weight * tardiness;
        entries.push(ScheduledOrder { order: id, start, tardiness });
        prev = Some((id, start));
    }
    Ok(Schedule { entries, fitness })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    UnknownOrder { position: usize, order: usize },
    Duplicate { position: usize, order: usize },
    SetupGap { position: usize },
    Window { position: usize },
    TardinessMismatch { position: usize },
    FitnessMismatch { stored: f64, actual: f64 },
}

/// Checks a schedule against the model constraints without trusting how it
/// was built. Consecutive pairs only are checked for the setup gap.
pub fn validate(instance: &Instance, schedule: &Schedule) -> Vec<Violation> {
    let n = instance.n();
    let mut out = Vec::new();
    let mut seen = vec![false; n];
    let mut actual = 0.0;
    let mut prev: Option<(usize, f64)> = None;
    for (position, e) in schedule.entries.iter().enumerate() {
        if e.order >= n {
            out.push(Violation::UnknownOrder { position, order: e.order });
            prev = None;
            continue;
        }
        if std::mem::replace(&mut seen[e.order], true) {
            out.push(Violation::Duplicate { position, order: e.order });
        }
        let o = instance.order(e.order);
        let bound = instance.earliest_start(prev, e.order);
        if e.start < bound - TOLERANCE {
            out.push(Violation::SetupGap { position });
        }
        if e.start < o.release - TOLERANCE || e.start > o.latest_start() + TOLERANCE {
            out.push(Violation::Window { position });
        }
        if (e.tardiness - o.tardiness_at(e.start)).abs() > TOLERANCE {
            out.push(Violation::TardinessMismatch { position });
        }
        actual += o.reward_at(e.start);
        prev = Some((e.order, e.start));
    }
    if (actual - schedule.fitness).abs() > TOLERANCE * (1.0 + actual.abs()) {
        out.push(Violation::FitnessMismatch {
            stored: schedule.fitness,
            actual,
        });
    }
    out
}
