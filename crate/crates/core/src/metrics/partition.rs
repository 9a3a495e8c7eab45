use std::collections::{BTreeMap, BTreeSet};

use super::{MetricError, Result};

/// Disjoint, non-empty clusters covering a universe of ids exactly once.
///
/// Clusters are kept in a canonical order (by smallest member), so two
/// partitions compare equal whenever they group the same ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    clusters: Vec<BTreeSet<u64>>,
    universe: BTreeSet<u64>,
}

impl Partition {
    pub fn new<I, C>(clusters: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = u64>,
    {
        let mut universe = BTreeSet::new();
        let mut out = Vec::new();
        for c in clusters {
            let set: BTreeSet<u64> = c.into_iter().collect();
            if set.is_empty() {
                return Err(MetricError::Invalid("empty cluster".into()));
            }
            for &id in &set {
                if !universe.insert(id) {
                    return Err(MetricError::Invalid(format!("id {id} appears in two clusters")));
                }
            }
            out.push(set);
        }
        out.sort_by_key(|c| *c.iter().next().expect("non-empty"));
        Ok(Self {
            clusters: out,
            universe,
        })
    }

    /// Groups ids by label.
    pub fn from_labels(labels: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut by_label: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (id, label) in labels {
            if !seen.insert(id) {
                return Err(MetricError::Invalid(format!("id {id} labelled twice")));
            }
            by_label.entry(label).or_default().push(id);
        }
        Self::new(by_label.into_values())
    }

    pub fn clusters(&self) -> &[BTreeSet<u64>] {
        &self.clusters
    }

    pub fn universe(&self) -> &BTreeSet<u64> {
        &self.universe
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Number of ids covered.
    pub fn size(&self) -> usize {
        self.universe.len()
    }

    /// Index of the cluster holding each id.
    pub fn labels(&self) -> BTreeMap<u64, usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.iter().map(move |&id| (id, k)))
            .collect()
    }
}

/// Connected components of the reply-to graph. Every child must appear once
/// as a key and every parent must itself be a key.
pub fn cluster_links(links: &BTreeMap<u64, u64>) -> Result<Partition> {
    let index: BTreeMap<u64, usize> = links.keys().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut uf = UnionFind::new(index.len());
    for (&child, &parent) in links {
        let p = *index.get(&parent).ok_or(MetricError::UnknownId(parent))?;
        uf.union(index[&child], p);
    }
    let ids: Vec<u64> = links.keys().copied().collect();
    Partition::from_labels(ids.iter().enumerate().map(|(i, &id)| (id, ids[uf.find(i)])))
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Overlap counts between the clusters of two partitions of one universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[i][j] = |X_i ∩ Y_j|`.
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

pub fn contingency(x: &Partition, y: &Partition) -> Result<ContingencyTable> {
    same_universe(x, y)?;
    let ly = y.labels();
    let mut counts = vec![vec![0usize; y.len()]; x.len()];
    for (i, c) in x.clusters().iter().enumerate() {
        for id in c {
            counts[i][ly[id]] += 1;
        }
    }
    let row_sums = x.clusters().iter().map(BTreeSet::len).collect();
    let col_sums = y.clusters().iter().map(BTreeSet::len).collect();
    Ok(ContingencyTable {
        counts,
        row_sums,
        col_sums,
        n: x.size(),
    })
}

pub(crate) fn same_universe(x: &Partition, y: &Partition) -> Result<()> {
    if x.universe() != y.universe() {
        let only_x = x.universe().difference(y.universe()).count();
        let only_y = y.universe().difference(x.universe()).count();
        return Err(MetricError::UniverseMismatch { only_x, only_y });
    }
    Ok(())
}
