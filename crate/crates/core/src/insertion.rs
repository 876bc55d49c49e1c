//! Fast single-order insertion driven by time slacks.
//!
//! Every gap of the current schedule (including the front) is tried for the
//! candidate order `c`. With `t1` the completion of `c` in that gap and `t2`
//! the shift it forces on the next order:
//!
//! * `t1 > e_c` or `t2 > time_slack(next)`: rejected;
//! * `t1 <= d_c` and `t2 <= due_slack(next)`: penalty free (PL1), ranked by
//!   setup increase `s_ic + s_c,next - s_i,next`;
//! * otherwise (PL2), kept only if the exact resulting fitness beats the
//!   current one, ranked by that fitness.
//!
//! PL1 wins whenever it is nonempty. Ties go to the earliest position.

use crate::error::{Error, Result};
use crate::model::{Instance, Schedule, ScheduledOrder, TOLERANCE};
use crate::slack::{self, SlackTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositionClass {
    /// No order picks up tardiness.
    Pl1 { setup_increase: f64 },
    /// Some order becomes (more) tardy but total fitness still rises.
    Pl2 { resulting_fitness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionCandidate {
    /// Index the candidate takes in the sequence; 0 is the front.
    pub insert_at: usize,
    /// Start of the candidate at this position.
    pub start: f64,
    pub class: PositionClass,
}

impl PositionCandidate {
    /// Position of the scheduled order the candidate follows, `None` for the
    /// front.
    pub fn after_position(&self) -> Option<usize> {
        self.insert_at.checked_sub(1)
    }
}

/// Exact fitness after putting `cand` at `insert_at` with the given start,
/// propagating the shift until an order no longer moves. `None` if some
/// successor would miss its deadline.
fn fitness_with_insertion(
    instance: &Instance,
    schedule: &Schedule,
    cand: usize,
    insert_at: usize,
    cand_start: f64,
) -> Option<f64> {
    let mut fitness = schedule.fitness + instance.order(cand).reward_at(cand_start);
    let mut prev = (cand, cand_start);
    for e in &schedule.entries[insert_at..] {
        let start = instance.earliest_start(Some(prev), e.order);
        if start == e.start {
            break;
        }
        let o = instance.order(e.order);
        if start > o.latest_start() + TOLERANCE {
            return None;
        }
        fitness += o.reward_at(start) - o.reward_at(e.start);
        prev = (e.order, start);
    }
    Some(fitness)
}

fn classify(
    instance: &Instance,
    schedule: &Schedule,
    slacks: &SlackTable,
    cand: usize,
    insert_at: usize,
    want_fitness: bool,
) -> Option<PositionCandidate> {
    let c = instance.order(cand);
    let pred = schedule.prev_of(insert_at);
    if let Some((i, _)) = pred {
        if c.deadline <= instance.order(i).release {
            return None;
        }
    }
    let start = instance.earliest_start(pred, cand);
    let t1 = start + c.processing;
    if t1 > c.deadline + TOLERANCE {
        return None;
    }
    let pred_order = pred.map(|(i, _)| i);
    let (t2, time_slack, due_slack, setup_increase) = match schedule.entries.get(insert_at) {
        Some(next) => {
            let shifted = instance.earliest_start(Some((cand, start)), next.order);
            (
                shifted - next.start,
                slacks.time_slack(insert_at),
                slacks.due_slack(insert_at),
                instance.setup_after(pred_order, cand) + instance.setup(cand, next.order)
                    - instance.setup_after(pred_order, next.order),
            )
        }
        None => (0.0, 0.0, 0.0, instance.setup_after(pred_order, cand)),
    };
    if t2 > time_slack + TOLERANCE {
        return None;
    }
    if t1 <= c.due + TOLERANCE && t2 <= due_slack + TOLERANCE {
        return Some(PositionCandidate {
            insert_at,
            start,
            class: PositionClass::Pl1 { setup_increase },
        });
    }
    if !want_fitness {
        return None;
    }
    let resulting_fitness = fitness_with_insertion(instance, schedule, cand, insert_at, start)?;
    (resulting_fitness > schedule.fitness + TOLERANCE).then_some(PositionCandidate {
        insert_at,
        start,
        class: PositionClass::Pl2 { resulting_fitness },
    })
}

/// Classifies putting `cand` at sequence index `insert_at` (0 = front).
/// `None` means the position is rejected.
pub fn classify_position(
    instance: &Instance,
    schedule: &Schedule,
    slacks: &SlackTable,
    cand: usize,
    insert_at: usize,
) -> Option<PositionCandidate> {
    classify(instance, schedule, slacks, cand, insert_at, true)
}

/// Best position for `cand` under the PL1-before-PL2 policy.
pub fn best_position(
    instance: &Instance,
    schedule: &Schedule,
    slacks: &SlackTable,
    cand: usize,
) -> Option<PositionCandidate> {
    let c = instance.order(cand);
    let mut best_pl1: Option<(f64, PositionCandidate)> = None;
    let mut best_pl2: Option<(f64, PositionCandidate)> = None;
    for insert_at in 0..=schedule.len() {
        if insert_at > 0 {
            // Completion times increase along the schedule, so once the
            // predecessor ends too late every later gap is too late as well.
            let p = &schedule.entries[insert_at - 1];
            if p.start + instance.order(p.order).processing + c.processing > c.deadline + TOLERANCE {
                break;
            }
        }
        let Some(found) = classify(instance, schedule, slacks, cand, insert_at, best_pl1.is_none()) else {
            continue;
        };
        match found.class {
            PositionClass::Pl1 { setup_increase } => {
                if best_pl1.is_none_or(|(best, _)| setup_increase < best) {
                    best_pl1 = Some((setup_increase, found));
                }
            }
            PositionClass::Pl2 { resulting_fitness } => {
                if best_pl2.is_none_or(|(best, _)| resulting_fitness > best) {
                    best_pl2 = Some((resulting_fitness, found));
                }
            }
        }
    }
    best_pl1.or(best_pl2).map(|(_, p)| p)
}

/// Places `cand` at `insert_at` with the given start, re-propagates starts
/// and refreshes fitness and slacks.
pub(crate) fn apply_insertion(
    instance: &Instance,
    schedule: &mut Schedule,
    slacks: &mut SlackTable,
    cand: usize,
    insert_at: usize,
    start: f64,
) {
    let o = instance.order(cand);
    schedule.entries.insert(
        insert_at,
        ScheduledOrder {
            order: cand,
            start,
            tardiness: o.tardiness_at(start),
        },
    );
    slacks.insert_slot(insert_at);
    let last = schedule.propagate_from(instance, insert_at);
    schedule.recompute_fitness(instance);
    slack::refresh(slacks, instance, schedule, last);
}

/// Inserts `cand` at its best position. Returns the index it took, or `None`
/// when no position is acceptable and the schedule is left unchanged.
pub fn fast_insert(
    instance: &Instance,
    schedule: &mut Schedule,
    slacks: &mut SlackTable,
    cand: usize,
) -> Result<Option<usize>> {
    if cand >= instance.n() {
        return Err(Error::Input(format!("unknown order id {cand}")));
    }
    if schedule.contains(cand) {
        return Err(Error::Contract(format!("order {cand} is already scheduled")));
    }
    let Some(best) = best_position(instance, schedule, slacks, cand) else {
        return Ok(None);
    };
    apply_insertion(instance, schedule, slacks, cand, best.insert_at, best.start);
    Ok(Some(best.insert_at))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::instance;
    use crate::model::{earliest_start_schedule, validate};
    use crate::slack::compute_slacks;

    fn three_orders() -> Instance {
        instance(
            &[(0.0, 2.0, 10.0, 20.0, 5.0, 0.5), (0.0, 2.0, 6.0, 10.0, 5.0, 1.25), (0.0, 2.0, 10.0, 20.0, 10.0, 1.0)],
            1.0,
        )
    }

    #[test]
    fn tail_position_is_pl1_with_plain_setup() {
        let inst = three_orders();
        let s = earliest_start_schedule(&inst, &[0, 1]).unwrap();
        let t = compute_slacks(&inst, &s).unwrap();
        let c = classify_position(&inst, &s, &t, 2, 2).unwrap();
        assert_eq!(c.class, PositionClass::Pl1 { setup_increase: inst.setup(1, 2) });
        assert_eq!(c.after_position(), Some(1));
    }

    #[test]
    fn successor_pushed_into_tardiness_is_pl2() {
        let inst = three_orders();
        let s = earliest_start_schedule(&inst, &[0, 1]).unwrap();
        let t = compute_slacks(&inst, &s).unwrap();
        let c = classify_position(&inst, &s, &t, 2, 1).unwrap();
        let oracle = earliest_start_schedule(&inst, &[0, 2, 1]).unwrap();
        assert!(oracle.entries[2].tardiness > 0.0);
        assert_eq!(c.class, PositionClass::Pl2 { resulting_fitness: oracle.fitness });
        assert_eq!(oracle.fitness, 17.5);
    }

    #[test]
    fn completion_past_deadline_is_rejected() {
        // Candidate would end at e_c + 1 after order 0.
        let inst = instance(&[(0.0, 4.0, 10.0, 20.0, 5.0, 0.5), (0.0, 2.0, 5.0, 6.0, 5.0, 5.0)], 1.0);
        let s = earliest_start_schedule(&inst, &[0]).unwrap();
        let t = compute_slacks(&inst, &s).unwrap();
        assert_eq!(s.entries[0].start + 4.0 + 1.0 + 2.0, 7.0);
        assert!(classify_position(&inst, &s, &t, 1, 1).is_none());
    }

    #[test]
    fn empty_schedule_takes_order_at_release() {
        let inst = instance(&[(3.0, 2.0, 10.0, 20.0, 5.0, 0.5)], 1.0);
        let mut s = Schedule::empty();
        let mut t = SlackTable::default();
        assert_eq!(fast_insert(&inst, &mut s, &mut t, 0).unwrap(), Some(0));
        assert_eq!(s.entries[0].start, 3.0);
        assert_eq!(s.fitness, 5.0);
        assert_eq!(t.time_slack(0), 15.0);

        let mut inst = inst;
        inst.initial_setup = true;
        let mut s = Schedule::empty();
        let mut t = SlackTable::default();
        fast_insert(&inst, &mut s, &mut t, 0).unwrap();
        assert_eq!(s.entries[0].start, 3.0 + inst.setup_matrix()[0][1]);
    }

    #[test]
    fn blocked_order_leaves_schedule_unchanged() {
        // Order 1 window [0, 3] is covered by order 0, which has no slack.
        let inst = instance(&[(0.0, 3.0, 3.0, 3.0, 9.0, 0.0), (0.0, 2.0, 3.0, 3.0, 1.0, 0.0)], 1.0);
        let mut s = earliest_start_schedule(&inst, &[0]).unwrap();
        let mut t = compute_slacks(&inst, &s).unwrap();
        let before = s.clone();
        assert_eq!(fast_insert(&inst, &mut s, &mut t, 1).unwrap(), None);
        assert_eq!(s, before);
    }

    #[test]
    fn pl1_preferred_and_result_is_valid() {
        let inst = three_orders();
        let mut s = earliest_start_schedule(&inst, &[0, 1]).unwrap();
        let mut t = compute_slacks(&inst, &s).unwrap();
        let pos = fast_insert(&inst, &mut s, &mut t, 2).unwrap();
        assert_eq!(pos, Some(2));
        assert_eq!(s.total_tardiness(), 0.0);
        assert_eq!(s.fitness, 20.0);
        assert!(validate(&inst, &s).is_empty());
        assert!(slack::tables_match(&t, &compute_slacks(&inst, &s).unwrap()));
    }

    #[test]
    fn inserting_twice_is_a_contract_violation() {
        let inst = three_orders();
        let mut s = earliest_start_schedule(&inst, &[0]).unwrap();
        let mut t = compute_slacks(&inst, &s).unwrap();
        assert!(matches!(fast_insert(&inst, &mut s, &mut t, 0), Err(Error::Contract(_))));
    }
}
