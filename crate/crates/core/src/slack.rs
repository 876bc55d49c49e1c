//! Time slack and due time slack of scheduled orders.
//!
//! The time slack of a position is the largest delay of its start that keeps
//! the schedule feasible once the delay is pushed forward through the
//! successors. The due slack is the largest delay that adds no tardiness to
//! any order. Both are computed from the last position backwards:
//!
//! ```text
//! gap_i        = max(0, p_j - s_ij - (p_i + t_i))      // j = successor of i
//! time_slack_i = min(e_i - t_i - p_i,         gap_i + time_slack_j)
//! due_slack_i  = min(max(d_i - t_i - p_i, 0), gap_i + due_slack_j)
//! ```
//!
//! `gap_i` is how far `i` can move before `j` is affected: under the rule
//! `p_j >= max(b_j, p_i + t_i) + s_ij` a delay of `i` reaches `j` only after
//! it has consumed the idle time in front of `j`'s setup.

use crate::error::{Error, Result};
use crate::model::{Instance, Schedule, TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlackEntry {
    pub time_slack: f64,
    pub due_slack: f64,
    /// Delay absorbed before the successor moves; 0 for the last position.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlackTable {
    pub entries: Vec<SlackEntry>,
}

impl SlackTable {
    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn time_slack(&self, pos: usize) -> f64 {
        self.entries[pos].time_slack
    }

    #[inline]
    pub fn due_slack(&self, pos: usize) -> f64 {
        self.entries[pos].due_slack
    }

    /// Keeps the table aligned with a schedule that gained an entry at `pos`.
    pub(crate) fn insert_slot(&mut self, pos: usize) {
        self.entries.insert(pos, SlackEntry::default());
    }
}

fn entry_at(instance: &Instance, schedule: &Schedule, pos: usize, next: Option<&SlackEntry>) -> SlackEntry {
    let e = &schedule.entries[pos];
    let o = instance.order(e.order);
    let own_time = o.deadline - o.processing - e.start;
    let own_due = (o.due - o.processing - e.start).max(0.0);
    match next {
        None => SlackEntry {
            time_slack: own_time,
            due_slack: own_due,
            gap: 0.0,
        },
        Some(next) => {
            let succ = &schedule.entries[pos + 1];
            let gap = (succ.start - instance.setup(e.order, succ.order) - (e.start + o.processing)).max(0.0);
            SlackEntry {
                time_slack: own_time.min(gap + next.time_slack),
                due_slack: own_due.min(gap + next.due_slack),
                gap,
            }
        }
    }
}

/// Computes the slack table of a feasible schedule from scratch.
pub fn compute_slacks(instance: &Instance, schedule: &Schedule) -> Result<SlackTable> {
    if let Some(pos) = schedule.first_late(instance) {
        return Err(Error::Contract(format!(
            "slacks requested for infeasible schedule (position {pos} starts too late)"
        )));
    }
    let mut table = SlackTable {
        entries: vec![SlackEntry::default(); schedule.len()],
    };
    refresh(&mut table, instance, schedule, schedule.len().saturating_sub(1));
    Ok(table)
}

/// Recomputes positions `changed_position, changed_position - 1, .., 0`.
///
/// Entries after `changed_position` must still be valid, i.e. neither those
/// orders nor their successors moved. The table must already have one slot
/// per schedule entry.
pub fn update_after_change(
    table: &SlackTable,
    instance: &Instance,
    schedule: &Schedule,
    changed_position: usize,
) -> SlackTable {
    let mut out = table.clone();
    refresh(&mut out, instance, schedule, changed_position);
    out
}

/// In-place form of [`update_after_change`].
pub(crate) fn refresh(table: &mut SlackTable, instance: &Instance, schedule: &Schedule, changed_position: usize) {
    debug_assert_eq!(table.len(), schedule.len());
    let len = schedule.len();
    if len == 0 {
        return;
    }
    let from = changed_position.min(len - 1);
    for pos in (0..=from).rev() {
        let next = (pos + 1 < len).then(|| table.entries[pos + 1]);
        table.entries[pos] = entry_at(instance, schedule, pos, next.as_ref());
    }
}

/// Checks that two tables agree within the model tolerance.
pub fn tables_match(a: &SlackTable, b: &SlackTable) -> bool {
    a.len() == b.len()
        && a.entries.iter().zip(&b.entries).all(|(x, y)| {
            (x.time_slack - y.time_slack).abs() <= TOLERANCE
                && (x.due_slack - y.due_slack).abs() <= TOLERANCE
                && (x.gap - y.gap).abs() <= TOLERANCE
        })
}
