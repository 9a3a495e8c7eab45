//! Brute-force reference implementations shared by the integration tests.
//! Each works from element labels or element pairs directly, never from the
//! contingency table the library uses.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use disentangle::metrics::Partition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random partition of ids `0..n` (or a shuffled id set) into at most `k` labels.
pub fn random_partition(rng: &mut ChaCha8Rng, ids: &[u64], k: usize) -> Partition {
    Partition::from_labels(ids.iter().map(|&id| (id, rng.gen_range(0..k) as u64))).unwrap()
}

/// 200 seeded pairs over universes of 1..=8 ids.
pub fn partition_pairs(seed: u64, count: usize) -> Vec<(Partition, Partition)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=8);
            let ids: Vec<u64> = (0..n).map(|i| 10 * i as u64 + 3).collect();
            let kx = rng.gen_range(1..=n.min(6));
            let ky = rng.gen_range(1..=n.min(6));
            (random_partition(&mut rng, &ids, kx), random_partition(&mut rng, &ids, ky))
        })
        .collect()
}

fn label_of(p: &Partition) -> BTreeMap<u64, usize> {
    let mut out = BTreeMap::new();
    for (k, c) in p.clusters().iter().enumerate() {
        for &id in c {
            out.insert(id, k);
        }
    }
    out
}

/// VI in bits from the definitions of entropy and mutual information over
/// the empirical label distribution.
pub fn vi_oracle(x: &Partition, y: &Partition) -> f64 {
    let lx = label_of(x);
    let ly = label_of(y);
    let n = lx.len() as f64;
    let mut px: BTreeMap<usize, f64> = BTreeMap::new();
    let mut py: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pxy: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (id, &a) in &lx {
        let b = ly[id];
        *px.entry(a).or_default() += 1.0 / n;
        *py.entry(b).or_default() += 1.0 / n;
        *pxy.entry((a, b)).or_default() += 1.0 / n;
    }
    let h = |m: &BTreeMap<usize, f64>| -m.values().map(|p| p * p.log2()).sum::<f64>();
    let mi: f64 = pxy.iter().map(|(&(a, b), &p)| p * (p / (px[&a] * py[&b])).log2()).sum();
    h(&px) + h(&py) - 2.0 * mi
}

pub fn scaled_vi_oracle(x: &Partition, y: &Partition) -> f64 {
    let n = x.size();
    if n < 2 {
        return 1.0;
    }
    1.0 - vi_oracle(x, y) / (n as f64).log2()
}

/// ARI from agreement counts over all unordered element pairs.
pub fn ari_oracle(x: &Partition, y: &Partition) -> f64 {
    let lx = label_of(x);
    let ly = label_of(y);
    let ids: Vec<u64> = lx.keys().copied().collect();
    let (mut both, mut only_x, mut only_y, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let sx = lx[&ids[i]] == lx[&ids[j]];
            let sy = ly[&ids[i]] == ly[&ids[j]];
            match (sx, sy) {
                (true, true) => both += 1.0,
                (true, false) => only_x += 1.0,
                (false, true) => only_y += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let den = (both + only_x) * (only_x + neither) + (both + only_y) * (only_y + neither);
    if den == 0.0 {
        return 1.0;
    }
    2.0 * (both * neither - only_x * only_y) / den
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// One-to-one overlap by enumerating every injective cluster matching.
pub fn one_to_one_oracle(x: &Partition, y: &Partition) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let overlap = |a: &BTreeSet<u64>, b: &BTreeSet<u64>| a.intersection(b).count();
    let mut best = 0;
    // Every ordering of the larger side; the first |small| entries are the partners.
    for perm in permutations(large.len()) {
        let total: usize = small
            .clusters()
            .iter()
            .zip(&perm)
            .map(|(a, &j)| overlap(a, &large.clusters()[j]))
            .sum();
        best = best.max(total);
    }
    100.0 * best as f64 / x.size() as f64
}

/// Exact-match (P, R, F1) by direct set comparison.
pub fn prf_oracle(pred: &Partition, gold: &Partition) -> (f64, f64, f64) {
    let big = |p: &Partition| -> Vec<BTreeSet<u64>> { p.clusters().iter().filter(|c| c.len() >= 2).cloned().collect() };
    let pc = big(pred);
    let gc = big(gold);
    let hit = pc.iter().filter(|c| gc.iter().any(|g| g == *c)).count() as f64;
    let p = if pc.is_empty() { 0.0 } else { hit / pc.len() as f64 };
    let r = if gc.is_empty() { 0.0 } else { hit / gc.len() as f64 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Components by repeated relaxation of "same thread" until nothing changes.
pub fn closure_oracle(links: &BTreeMap<u64, u64>) -> Partition {
    let mut label: BTreeMap<u64, u64> = links.keys().map(|&k| (k, k)).collect();
    loop {
        let mut changed = false;
        for (&c, &p) in links {
            let m = label[&c].min(label[&p]);
            for id in [c, p] {
                if label[&id] != m {
                    label.insert(id, m);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Partition::from_labels(label).unwrap()
}
