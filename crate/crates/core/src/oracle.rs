//! Exact optimum for small instances by depth-first enumeration of accepted
//! sequences.
//!
//! For a fixed sequence the earliest-start schedule is optimal (rewards never
//! increase with later starts), so searching sequences suffices. Appending an
//! order never changes the starts before it, so every feasible prefix is a
//! candidate and infeasible prefixes can be cut.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Instance, TOLERANCE};

pub const DEFAULT_LIMIT: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub optimal: f64,
    pub sequence: Vec<usize>,
    pub nodes: u64,
    pub proven_optimal: bool,
}

struct Search<'a> {
    instance: &'a Instance,
    branch_order: Vec<usize>,
    prune: bool,
    used: Vec<bool>,
    path: Vec<usize>,
    best: f64,
    best_path: Vec<usize>,
    nodes: u64,
}

impl Search<'_> {
    fn dfs(&mut self, prev: Option<(usize, f64)>, accrued: f64, remaining_revenue: f64) {
        self.nodes += 1;
        if accrued > self.best + TOLERANCE {
            self.best = accrued;
            self.best_path = self.path.clone();
        }
        if self.prune && accrued + remaining_revenue <= self.best + TOLERANCE {
            return;
        }
        for k in 0..self.branch_order.len() {
            let id = self.branch_order[k];
            if self.used[id] {
                continue;
            }
            let o = self.instance.order(id);
            let start = self.instance.earliest_start(prev, id);
            if start > o.latest_start() + TOLERANCE {
                continue;
            }
            self.used[id] = true;
            self.path.push(id);
            self.dfs(Some((id, start)), accrued + o.reward_at(start), remaining_revenue - o.revenue);
            self.path.pop();
            self.used[id] = false;
        }
    }
}

/// Maximum fitness over all subsets and orderings, with revenue-bound
/// pruning. Refuses instances with more than `n_limit` orders.
pub fn exact_solve(instance: &Instance, n_limit: usize) -> Result<OracleResult> {
    search(instance, n_limit, true)
}

/// Same search without the bound, visiting every feasible sequence.
pub fn exact_solve_unpruned(instance: &Instance, n_limit: usize) -> Result<OracleResult> {
    search(instance, n_limit, false)
}

fn search(instance: &Instance, n_limit: usize, prune: bool) -> Result<OracleResult> {
    let n = instance.n();
    if n > n_limit {
        return Err(Error::Size { n, limit: n_limit });
    }
    let mut branch_order: Vec<usize> = (0..n).collect();
    branch_order.sort_by(|&a, &b| {
        let (oa, ob) = (instance.order(a), instance.order(b));
        ob.unit_revenue().total_cmp(&oa.unit_revenue()).then(a.cmp(&b))
    });
    let mut s = Search {
        instance,
        branch_order,
        prune,
        used: vec![false; n],
        path: Vec::with_capacity(n),
        best: 0.0,
        best_path: Vec::new(),
        nodes: 0,
    };
    s.dfs(None, 0.0, instance.total_revenue());
    Ok(OracleResult {
        optimal: s.best,
        sequence: s.best_path,
        nodes: s.nodes,
        proven_optimal: true,
    })
}
