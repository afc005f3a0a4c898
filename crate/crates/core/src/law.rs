//! Joint laws of public draws.
//!
//! For binary x, y the law of (|i|, |j|, i.j) depends only on
//! (|x|, |y|, x.y); `KeyLaw` aggregates a pair of distributions to that
//! key and `TableStats` carries the payoff-relevant moments per cell.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dist::Dist;
use crate::error::{check_dim, Error, Result};

pub type Cell = (u32, u32, u32);

/// Serializes cell-keyed maps as row lists, since JSON keys must be strings.
pub mod cell_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Cell;

    pub fn serialize<V: Serialize, S: Serializer>(m: &BTreeMap<Cell, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Cell, V>, D::Error> {
        let rows: Vec<(Cell, V)> = Vec::deserialize(d)?;
        Ok(rows.into_iter().collect())
    }
}

/// Law of (|x|, |y|, x.y) for x ~ Phi, y ~ Phi'.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyLaw {
    pub n: usize,
    #[serde(with = "cell_map")]
    pub mass: BTreeMap<Cell, f64>,
}

impl KeyLaw {
    pub fn of_pair(phi: &Dist, phi2: &Dist) -> Result<Self> {
        check_dim(phi.n(), phi2.n())?;
        let mut mass: HashMap<Cell, f64> = HashMap::new();
        let w2: Vec<u32> = phi2.points().iter().map(|(y, _)| y.weight() as u32).collect();
        for (x, w) in phi.points() {
            let a = x.weight() as u32;
            for ((y, v), &b) in phi2.points().iter().zip(&w2) {
                *mass.entry((a, b, x.dot(y) as u32)).or_insert(0.0) += w * v;
            }
        }
        Ok(KeyLaw { n: phi.n(), mass: mass.into_iter().collect() })
    }
}

fn binom_pmf(trials: u32, p: f64) -> Vec<f64> {
    let t = trials as usize;
    let mut out = vec![0.0; t + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[t] = 1.0;
        return out;
    }
    let ln = |r: usize| {
        crate::bernoulli::ln_choose(t as u64, r as u64) + r as f64 * p.ln() + (t - r) as f64 * (1.0 - p).ln()
    };
    for (r, o) in out.iter_mut().enumerate() {
        *o = ln(r).exp();
    }
    out
}

/// Law of (|i|, |j|, i.j) when i ~ B(x/k), j ~ B(y/k) and (|x|, |y|, x.y) = key.
/// Terms below `prune` are dropped.
pub fn triple_law(key: Cell, k: f64, prune: f64) -> Vec<(Cell, f64)> {
    let (a, b, c) = key;
    let p = 1.0 / k;
    let mut acc: BTreeMap<Cell, f64> = BTreeMap::new();
    let pm = binom_pmf(c, p * p);
    let pa = binom_pmf(a - c, p);
    for (m, &wm) in pm.iter().enumerate() {
        if wm <= prune {
            continue;
        }
        let m = m as u32;
        let p10 = binom_pmf(c - m, p / (1.0 + p));
        for (u10, &w10) in p10.iter().enumerate() {
            let w1 = wm * w10;
            if w1 <= prune {
                continue;
            }
            let u10 = u10 as u32;
            let pw = binom_pmf(b - m - u10, p);
            for (a0, &wa) in pa.iter().enumerate() {
                let w2 = w1 * wa;
                if w2 <= prune {
                    continue;
                }
                for (w, &ww) in pw.iter().enumerate() {
                    let w3 = w2 * ww;
                    if w3 <= prune {
                        continue;
                    }
                    let cell = (m + u10 + a0 as u32, m + w as u32, m);
                    *acc.entry(cell).or_insert(0.0) += w3;
                }
            }
        }
    }
    acc.into_iter().collect()
}

/// Per-cell moments of the target v = x.y/(nk): mass, E[v 1_cell], E[v^2 1_cell].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct TableStats {
    pub n: usize,
    pub k: f64,
    #[serde(with = "cell_map")]
    pub cells: BTreeMap<Cell, [f64; 3]>,
}

pub fn default_prune(n: usize) -> f64 {
    if n <= 32 {
        0.0
    } else {
        1e-18
    }
}

impl TableStats {
    pub fn from_keys(keys: &KeyLaw, k: f64, cache: &mut TripleCache) -> Self {
        let n = keys.n;
        let mut cells: BTreeMap<Cell, [f64; 3]> = BTreeMap::new();
        for (&key, &w) in &keys.mass {
            let v = key.2 as f64 / (n as f64 * k);
            for &(cell, pi) in cache.get(key, k, default_prune(n)) {
                let e = cells.entry(cell).or_insert([0.0; 3]);
                e[0] += w * pi;
                e[1] += w * pi * v;
                e[2] += w * pi * v * v;
            }
        }
        TableStats { n, k, cells }
    }

    /// Same law computed per value of x.y: the weight laws of x\\y and y\\x
    /// are pushed through binomial matrices, then convolved with the law
    /// on x.y. Memory stays O(n^2) whatever the number of keys.
    pub fn from_keys_grouped(keys: &KeyLaw, k: f64) -> Self {
        let n = keys.n;
        let p = 1.0 / k;
        let prune = default_prune(n);
        let bin = BinomTable::new(n, p, prune);
        let split = BinomTable::new(n, p / (1.0 + p), prune);
        let pair = BinomTable::new(n, p * p, prune);
        let mut by_c: BTreeMap<u32, Vec<(u32, u32, f64)>> = BTreeMap::new();
        for (&(a, b, c), &w) in &keys.mass {
            by_c.entry(c).or_default().push((a - c, b - c, w));
        }
        let mut cells: HashMap<Cell, [f64; 3]> = HashMap::new();
        for (c, rows) in by_c {
            let v = c as f64 / (n as f64 * k);
            // ab[A][B]: law of the weights drawn from x\y and y\x.
            let amax = rows.iter().map(|r| bin.hi(r.0)).max().unwrap_or(0) as usize;
            let bmax = rows.iter().map(|r| bin.hi(r.1)).max().unwrap_or(0) as usize;
            let mut ab = vec![0.0; (amax + 1) * (bmax + 1)];
            for &(a1, b1, w) in &rows {
                for (ua, pa) in bin.iter(a1) {
                    let wa = w * pa;
                    if wa <= prune {
                        continue;
                    }
                    for (ub, pb) in bin.iter(b1) {
                        ab[ua as usize * (bmax + 1) + ub as usize] += wa * pb;
                    }
                }
            }
            for (m, pm) in pair.iter(c) {
                for (u10, p10) in split.iter(c - m) {
                    let w1 = pm * p10;
                    if w1 <= prune {
                        continue;
                    }
                    for (u01, p01) in bin.iter(c - m - u10) {
                        let w2 = w1 * p01;
                        if w2 <= prune {
                            continue;
                        }
                        for ua in 0..=amax {
                            for ub in 0..=bmax {
                                let w3 = w2 * ab[ua * (bmax + 1) + ub];
                                if w3 <= prune {
                                    continue;
                                }
                                let cell = (m + u10 + ua as u32, m + u01 + ub as u32, m);
                                let e = cells.entry(cell).or_insert([0.0; 3]);
                                e[0] += w3;
                                e[1] += w3 * v;
                                e[2] += w3 * v * v;
                            }
                        }
                    }
                }
            }
        }
        TableStats { n, k, cells: cells.into_iter().collect() }
    }

    pub fn of_pair(phi: &Dist, phi2: &Dist, k: f64, cache: &mut TripleCache) -> Result<Self> {
        let keys = KeyLaw::of_pair(phi, phi2)?;
        Ok(if keys.mass.len() > GROUPED_MIN_KEYS {
            Self::from_keys_grouped(&keys, k)
        } else {
            Self::from_keys(&keys, k, cache)
        })
    }

    /// self <- (1 - t) self + t other.
    pub fn blend(&mut self, other: &TableStats, t: f64) {
        for e in self.cells.values_mut() {
            for v in e.iter_mut() {
                *v *= 1.0 - t;
            }
        }
        for (cell, o) in &other.cells {
            let e = self.cells.entry(*cell).or_insert([0.0; 3]);
            for r in 0..3 {
                e[r] += t * o[r];
            }
        }
    }

    /// min over table strategies: sum of conditional variances.
    pub fn min_payoff(&self) -> f64 {
        self.cells
            .values()
            .map(|[p, s, q]| if *p > 0.0 { (q - s * s / p).max(0.0) } else { 0.0 })
            .sum()
    }

    pub fn payoff_of(&self, value: impl Fn(Cell) -> f64) -> f64 {
        self.cells
            .iter()
            .map(|(&cell, [p, s, q])| {
                let w = value(cell);
                p * w * w - 2.0 * w * s + q
            })
            .sum()
    }
}

/// Key count above which `of_pair` uses the grouped computation.
pub const GROUPED_MIN_KEYS: usize = 4096;

/// Truncated binomial pmfs B(t, p) for t = 0..=n.
struct BinomTable {
    rows: Vec<(u32, Vec<f64>)>,
}

impl BinomTable {
    fn new(n: usize, p: f64, prune: f64) -> Self {
        let rows = (0..=n as u32)
            .map(|t| {
                let full = binom_pmf(t, p);
                let lo = full.iter().position(|&w| w > prune).unwrap_or(0);
                let hi = full.iter().rposition(|&w| w > prune).unwrap_or(0);
                (lo as u32, full[lo..=hi].to_vec())
            })
            .collect();
        BinomTable { rows }
    }

    fn hi(&self, t: u32) -> u32 {
        let (lo, v) = &self.rows[t as usize];
        lo + v.len() as u32 - 1
    }

    fn iter(&self, t: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let (lo, v) = &self.rows[t as usize];
        v.iter().enumerate().map(move |(u, &w)| (lo + u as u32, w))
    }
}

/// Cached keys above which the memo is dropped.
const CACHE_MAX_KEYS: usize = 200_000;

/// Memo of `triple_law` per key for a fixed k.
#[derive(Default)]
pub struct TripleCache {
    k: f64,
    map: HashMap<Cell, Vec<(Cell, f64)>>,
}

impl TripleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, key: Cell, k: f64, prune: f64) -> &[(Cell, f64)] {
        if self.k != k || self.map.len() > CACHE_MAX_KEYS {
            self.map.clear();
            self.k = k;
        }
        self.map.entry(key).or_insert_with(|| triple_law(key, k, prune))
    }
}

/// Number of feasible cells (|i|, |j|, i.j) in dimension n.
pub fn table_dim(n: usize) -> u64 {
    let mut count = 0u64;
    for a in 0..=n {
        for b in 0..=n {
            for c in 0..=a.min(b) {
                if a + b - c <= n {
                    count += 1;
                }
            }
        }
    }
    count
}

pub fn cell_of(i: &BitVector, j: &BitVector) -> Cell {
    (i.weight() as u32, j.weight() as u32, i.dot(j) as u32)
}

/// Largest n for which the exact (i, j) law is enumerated.
pub const EXACT_LAW_MAX_N: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// x.y / (nk)
    Mean,
    /// x.j / n
    VA,
    /// i.y / n
    VB,
}

/// Exact law over (i, j) masks: mass, E[t 1], E[t^2 1] for a target t.
pub struct ExactLaw {
    pub n: usize,
    pub k: f64,
    pub cells: HashMap<(u64, u64), [f64; 3]>,
}

fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut sub = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let cur = sub;
        if sub == 0 {
            done = true;
        } else {
            sub = (sub - 1) & mask;
        }
        Some(cur)
    })
}

impl ExactLaw {
    pub fn enumeration_cost(phi: &Dist, phi2: &Dist) -> f64 {
        let sx: f64 = phi.points().iter().map(|(x, _)| 2f64.powi(x.weight() as i32)).sum();
        let sy: f64 = phi2.points().iter().map(|(y, _)| 2f64.powi(y.weight() as i32)).sum();
        sx * sy
    }

    pub fn new(phi: &Dist, phi2: &Dist, k: f64, target: Target) -> Result<Self> {
        check_dim(phi.n(), phi2.n())?;
        let n = phi.n();
        if n > EXACT_LAW_MAX_N {
            return Err(Error::Capability(format!("exact (i, j) law needs n <= {EXACT_LAW_MAX_N}")));
        }
        let p = 1.0 / k;
        let nf = n as f64;
        let mut cells: HashMap<(u64, u64), [f64; 3]> = HashMap::new();
        let side = |d: &Dist| -> Vec<(u64, Vec<(u64, f64)>, f64)> {
            d.points()
                .iter()
                .map(|(x, w)| {
                    let xm = x.to_mask();
                    let wx = x.weight() as i32;
                    let subs = submasks(xm)
                        .map(|i| {
                            let wi = i.count_ones() as i32;
                            (i, p.powi(wi) * (1.0 - p).powi(wx - wi))
                        })
                        .collect();
                    (xm, subs, *w)
                })
                .collect()
        };
        let xs = side(phi);
        let ys = side(phi2);
        for (xm, isubs, wx) in &xs {
            for (ym, jsubs, wy) in &ys {
                let base = wx * wy;
                let dot = (xm & ym).count_ones() as f64;
                for &(i, pi) in isubs {
                    for &(j, pj) in jsubs {
                        let t = match target {
                            Target::Mean => dot / (nf * k),
                            Target::VA => (xm & j).count_ones() as f64 / nf,
                            Target::VB => (i & ym).count_ones() as f64 / nf,
                        };
                        let w = base * pi * pj;
                        let e = cells.entry((i, j)).or_insert([0.0; 3]);
                        e[0] += w;
                        e[1] += w * t;
                        e[2] += w * t * t;
                    }
                }
            }
        }
        Ok(ExactLaw { n, k, cells })
    }

    pub fn bayes_payoff(&self) -> f64 {
        self.cells
            .values()
            .map(|[p, s, q]| if *p > 0.0 { (q - s * s / p).max(0.0) } else { 0.0 })
            .sum()
    }

    pub fn payoff_of(&self, mut value: impl FnMut(&BitVector, &BitVector) -> f64) -> f64 {
        let mut keys: Vec<&(u64, u64)> = self.cells.keys().collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|key| {
                let [p, s, q] = self.cells[key];
                let i = BitVector::from_mask(self.n, key.0);
                let j = BitVector::from_mask(self.n, key.1);
                let w = value(&i, &j);
                p * w * w - 2.0 * w * s + q
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn grouped_stats_match_per_key_stats() {
        let mut rng = Stream::new(11);
        let n = 12;
        let all: Vec<usize> = (0..n).collect();
        let items: Vec<(BitVector, f64)> = (0..30)
            .map(|_| {
                let w = rng.below(n + 1);
                (BitVector::random_weight_in(n, &all, w, &mut rng), rng.uniform())
            })
            .collect();
        let d = Dist::from_weighted(n, items).unwrap();
        let keys = KeyLaw::of_pair(&d, &d).unwrap();
        for k in [2.0, 3.0, 8.0] {
            let a = TableStats::from_keys(&keys, k, &mut TripleCache::new());
            let b = TableStats::from_keys_grouped(&keys, k);
            assert_eq!(a.cells.len(), b.cells.len());
            for (cell, x) in &a.cells {
                let y = b.cells[cell];
                for r in 0..3 {
                    assert!((x[r] - y[r]).abs() < 1e-13, "{cell:?} {x:?} {y:?}");
                }
            }
        }
    }

    #[test]
    fn triple_law_matches_enumeration() {
        // x = 11110, y = 01111 at n = 5: |x| = 4, |y| = 4, x.y = 3
        let x: BitVector = "11110".parse().unwrap();
        let y: BitVector = "01111".parse().unwrap();
        let k = 3.0f64;
        let p = 1.0 / k;
        let mut brute: BTreeMap<Cell, f64> = BTreeMap::new();
        for im in 0..32u64 {
            let i = BitVector::from_mask(5, im);
            if !i.is_subset_of(&x) {
                continue;
            }
            for jm in 0..32u64 {
                let j = BitVector::from_mask(5, jm);
                if !j.is_subset_of(&y) {
                    continue;
                }
                let pr = p.powi(i.weight() as i32)
                    * (1.0 - p).powi((4 - i.weight()) as i32)
                    * p.powi(j.weight() as i32)
                    * (1.0 - p).powi((4 - j.weight()) as i32);
                *brute.entry(cell_of(&i, &j)).or_insert(0.0) += pr;
            }
        }
        let law = triple_law((4, 4, 3), k, 0.0);
        assert_eq!(law.len(), brute.len());
        for (cell, w) in law {
            assert!((w - brute[&cell]).abs() < 1e-14, "{cell:?}");
        }
    }

    #[test]
    fn table_dim_small() {
        // n = 1: (0,0,0), (1,0,0), (0,1,0), (1,1,1)
        assert_eq!(table_dim(1), 4);
    }
}
