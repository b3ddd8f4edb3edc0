//! Brute-force reference implementations.
//!
//! These are intentionally naive: breadth-first search over explicit
//! configurations and exhaustive enumeration of linear-set members. They serve
//! as ground truth for the property suites and must stay simple enough to
//! trust by inspection.

use crate::core::{Configuration, Path, Region, TransId, Vass};
use crate::geometry::LinearSet;
use std::collections::{HashMap, VecDeque};

/// Caps for the explicit-state search. At least one budget must be finite.
#[derive(Clone, Debug)]
pub struct SearchCaps {
    /// Per-coordinate absolute bound on counters (`None` = unbounded).
    pub counter_caps: Vec<Option<i64>>,
    pub node_budget: Option<usize>,
    pub depth_budget: Option<usize>,
}

impl SearchCaps {
    pub fn uniform(dim: usize, cap: i64, node_budget: usize) -> Self {
        SearchCaps {
            counter_caps: vec![Some(cap); dim],
            node_budget: Some(node_budget),
            depth_budget: None,
        }
    }

    fn admits(&self, counters: &[i64]) -> bool {
        counters
            .iter()
            .zip(&self.counter_caps)
            .all(|(x, cap)| cap.map_or(true, |c| x.abs() <= c))
    }
}

/// Result of [`bfs_reach`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchResult {
    Found(Path),
    /// Search gave up: a budget ran out or the counter caps truncated the
    /// frontier, so absence of a witness proves nothing.
    NotFoundWithinCaps,
    /// The capped state space was fully explored and no successor was ever
    /// dropped for exceeding a counter cap: a definitive negative for the
    /// region.
    ExhaustedComplete,
}

/// Breadth-first search over configurations within `region`, bounded by `caps`.
pub fn bfs_reach(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    region: &Region<i64>,
    caps: &SearchCaps,
) -> SearchResult {
    assert!(
        caps.node_budget.is_some()
            || caps.depth_budget.is_some()
            || caps.counter_caps.iter().all(|c| c.is_some()),
        "at least one budget must be finite"
    );
    if !region.contains(&from.counters) || !caps.admits(&from.counters) {
        return SearchResult::NotFoundWithinCaps;
    }
    if from == to {
        return SearchResult::Found(Vec::new());
    }
    // parent map: configuration -> (previous configuration, transition taken)
    let mut parent: HashMap<Configuration<i64>, (Configuration<i64>, TransId)> = HashMap::new();
    let mut queue: VecDeque<(Configuration<i64>, usize)> = VecDeque::new();
    let mut seen: HashMap<Configuration<i64>, ()> = HashMap::new();
    seen.insert(from.clone(), ());
    queue.push_back((from.clone(), 0));
    let mut truncated = false;
    let mut nodes = 0usize;
    while let Some((cur, depth)) = queue.pop_front() {
        nodes += 1;
        if let Some(b) = caps.node_budget {
            if nodes > b {
                return SearchResult::NotFoundWithinCaps;
            }
        }
        if let Some(d) = caps.depth_budget {
            if depth >= d {
                truncated = true;
                continue;
            }
        }
        for (t, tr) in v.transitions().iter().enumerate() {
            if tr.src != cur.state {
                continue;
            }
            let mut counters = cur.counters.clone();
            for (x, u) in counters.iter_mut().zip(&tr.update) {
                *x += u;
            }
            if !region.contains(&counters) {
                continue;
            }
            if !caps.admits(&counters) {
                truncated = true;
                continue;
            }
            let next = Configuration { state: tr.dst, counters };
            if seen.contains_key(&next) {
                continue;
            }
            seen.insert(next.clone(), ());
            parent.insert(next.clone(), (cur.clone(), t));
            if &next == to {
                let mut path = Vec::new();
                let mut at = next;
                while let Some((prev, tr)) = parent.get(&at) {
                    path.push(*tr);
                    at = prev.clone();
                }
                path.reverse();
                return SearchResult::Found(path);
            }
            queue.push_back((next, depth + 1));
        }
    }
    if truncated {
        SearchResult::NotFoundWithinCaps
    } else {
        SearchResult::ExhaustedComplete
    }
}

/// All members `b + Σ λᵢ pᵢ` with every `λᵢ ≤ coeff_cap` and max-norm at most
/// `norm_cap`; deduplicated, sorted.
pub fn enumerate_linset(ls: &LinearSet, coeff_cap: u64, norm_cap: i64) -> Vec<[i64; 2]> {
    let mut out = Vec::new();
    let mut stack = vec![(0usize, ls.base)];
    while let Some((i, point)) = stack.pop() {
        if i == ls.periods.len() {
            if point[0].abs() <= norm_cap && point[1].abs() <= norm_cap {
                out.push(point);
            }
            continue;
        }
        let p = ls.periods[i];
        for lambda in 0..=coeff_cap as i64 {
            stack.push((i + 1, [point[0] + lambda * p[0], point[1] + lambda * p[1]]));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
