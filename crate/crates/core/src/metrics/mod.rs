//! Partition comparison: scaled variation of information, adjusted Rand
//! index, one-to-one overlap and exact-match precision/recall/F1.
//!
//! Entropies are in bits. `vi` is always the scaled similarity
//! `1 − VI/log₂(n)`, so higher is better for every score.

mod hungarian;
mod partition;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use hungarian::max_weight_assignment;
pub use partition::{cluster_links, contingency, ContingencyTable, Partition, UnionFind};

use partition::same_universe;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("partitions cover different ids ({only_x} only on the left, {only_y} only on the right)")]
    UniverseMismatch { only_x: usize, only_y: usize },
    #[error("invalid partition: {0}")]
    Invalid(String),
    #[error("link points at unknown id {0}")]
    UnknownId(u64),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

fn entropy(counts: impl IntoIterator<Item = usize>, n: f64) -> f64 {
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Variation of information in bits.
pub fn variation_of_information(x: &Partition, y: &Partition) -> Result<f64> {
    let t = contingency(x, y)?;
    let n = t.n as f64;
    let hx = entropy(t.row_sums.iter().copied(), n);
    let hy = entropy(t.col_sums.iter().copied(), n);
    let hxy = entropy(t.counts.iter().flatten().copied(), n);
    // VI = H(X|Y) + H(Y|X) = 2·H(X,Y) − H(X) − H(Y)
    Ok((2.0 * hxy - hx - hy).max(0.0))
}

/// `1 − VI/log₂(n)`; 1.0 for a one-element universe.
pub fn scaled_vi(x: &Partition, y: &Partition) -> Result<f64> {
    let vi = variation_of_information(x, y)?;
    let n = x.size();
    if n < 2 {
        return Ok(1.0);
    }
    Ok((1.0 - vi / (n as f64).log2()).clamp(0.0, 1.0))
}

fn pairs(k: usize) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index; identical degenerate partitions score 1.0.
pub fn ari(x: &Partition, y: &Partition) -> Result<f64> {
    let t = contingency(x, y)?;
    let total = pairs(t.n);
    let index: f64 = t.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let b: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / total;
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Percentage of ids covered by the best one-to-one pairing of clusters.
pub fn one_to_one(x: &Partition, y: &Partition) -> Result<f64> {
    let t = contingency(x, y)?;
    let w: Vec<Vec<f64>> = t
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    let assignment = max_weight_assignment(&w);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| t.counts[i][j]))
        .sum();
    Ok(100.0 * matched as f64 / t.n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

/// Exact cluster matches after dropping singletons from both sides.
/// Empty denominators give 0.
pub fn exact_match_prf(pred: &Partition, gold: &Partition) -> Result<Prf> {
    same_universe(pred, gold)?;
    let keep = |p: &Partition| p.clusters().iter().filter(|c| c.len() > 1).cloned().collect::<Vec<_>>();
    let pc = keep(pred);
    let gc = keep(gold);
    let correct = pc.iter().filter(|c| gc.contains(c)).count() as f64;
    let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
    let p = ratio(correct, pc.len());
    let r = ratio(correct, gc.len());
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok(Prf { p, r, f1 })
}

/// All scores for one prediction; serialised with fixed key order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub vi: f64,
    pub ari: f64,
    pub one_to_one: f64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

pub fn evaluate_partitions(pred: &Partition, gold: &Partition) -> Result<MetricReport> {
    let prf = exact_match_prf(pred, gold)?;
    Ok(MetricReport {
        vi: scaled_vi(pred, gold)?,
        ari: ari(pred, gold)?,
        one_to_one: one_to_one(pred, gold)?,
        p: prf.p,
        r: prf.r,
        f1: prf.f1,
    })
}

/// Clusters both link sets and compares the resulting threads.
pub fn evaluate_all(pred: &BTreeMap<u64, u64>, gold: &BTreeMap<u64, u64>) -> Result<MetricReport> {
    if !pred.keys().eq(gold.keys()) {
        let only_x = pred.keys().filter(|k| !gold.contains_key(k)).count();
        let only_y = gold.keys().filter(|k| !pred.contains_key(k)).count();
        return Err(MetricError::UniverseMismatch { only_x, only_y });
    }
    evaluate_partitions(&cluster_links(pred)?, &cluster_links(gold)?)
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain numbers serialise")
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric        value   (vi is scaled: 1 - VI/log2 n)")?;
        let rows = [
            ("vi", self.vi),
            ("ari", self.ari),
            ("one_to_one", self.one_to_one),
            ("p", self.p),
            ("r", self.r),
            ("f1", self.f1),
        ];
        for (name, v) in rows {
            writeln!(f, "{name:<10} {v:>9.4}")?;
        }
        Ok(())
    }
}
