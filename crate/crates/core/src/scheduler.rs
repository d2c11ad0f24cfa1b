//! Cost-balanced partitioning of instances across worker lanes (LPT greedy).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Per worker, instance ids in the order they were assigned.
    pub worker_loads: Vec<Vec<String>>,
    pub load_totals: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub max_load: u64,
    pub min_load: u64,
    pub spread: u64,
    pub counts: Vec<usize>,
}

/// Longest-processing-time greedy: sort by cost descending (id ascending on
/// ties) and give each instance to the least-loaded worker (lowest index on
/// ties). `workers` of 0 is treated as 1. Empty input yields an empty
/// assignment.
pub fn plan_lpt(instances: &[(String, u64)], workers: usize) -> Assignment {
    if instances.is_empty() {
        return Assignment {
            worker_loads: Vec::new(),
            load_totals: Vec::new(),
        };
    }
    let workers = workers.max(1);
    let mut order: Vec<&(String, u64)> = instances.iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut worker_loads = vec![Vec::new(); workers];
    let mut load_totals = vec![0u64; workers];
    for (id, cost) in order {
        let w = (0..workers)
            .min_by_key(|&w| (load_totals[w], w))
            .expect("workers >= 1");
        worker_loads[w].push(id.clone());
        load_totals[w] += cost;
    }
    Assignment {
        worker_loads,
        load_totals,
    }
}

pub fn balance_report(a: &Assignment) -> BalanceReport {
    let max_load = a.load_totals.iter().copied().max().unwrap_or(0);
    let min_load = a.load_totals.iter().copied().min().unwrap_or(0);
    BalanceReport {
        max_load,
        min_load,
        spread: max_load - min_load,
        counts: a.worker_loads.iter().map(Vec::len).collect(),
    }
}
