use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterMetrics {
    pub purity: f64,
    pub adjusted_rand_index: f64,
}

/// Purity and adjusted Rand index of a clustering against true labels.
///
/// ARI is 1 when both partitions are trivial in the same way (a single
/// cluster, or all singletons), where the usual ratio is 0/0.
pub fn cluster_metrics(assignment: &[usize], labels: &[usize]) -> Result<ClusterMetrics> {
    if assignment.len() != labels.len() {
        return Err(Error::Dimension {
            context: "cluster labels",
            expected: assignment.len(),
            actual: labels.len(),
        });
    }
    let n = assignment.len();
    if n == 0 {
        return Err(Error::Precondition("no points to score".into()));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&a, &l) in assignment.iter().zip(labels) {
        *table.entry((a, l)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(l).or_default() += 1;
    }
    let mut best: HashMap<usize, u64> = HashMap::new();
    for (&(a, _), &c) in &table {
        let e = best.entry(a).or_default();
        *e = (*e).max(c);
    }
    let purity = best.values().sum::<u64>() as f64 / n as f64;

    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    let ari = if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    };
    Ok(ClusterMetrics {
        purity,
        adjusted_rand_index: ari,
    })
}
