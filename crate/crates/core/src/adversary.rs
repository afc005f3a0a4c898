//! Opponent strategies: functions of public information that estimate the
//! shared secret, and their quadratic payoff.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bernoulli::draw_scaled;
use crate::bits::BitVector;
use crate::dist::{Dist, Sampler};
use crate::error::{check_dim, invalid, Error, Result};
use crate::law::{cell_of, Cell, ExactLaw, Target, TableStats, TripleCache};
use crate::perm::Permutation;
use crate::rng::Stream;

/// Public view of one round.
#[derive(Clone, Copy)]
pub struct Observation<'a> {
    pub i: &'a BitVector,
    pub j: &'a BitVector,
    pub pairs: Option<(&'a [Permutation; 2], &'a [Permutation; 2])>,
}

impl<'a> Observation<'a> {
    pub fn plain(i: &'a BitVector, j: &'a BitVector) -> Self {
        Observation { i, j, pairs: None }
    }
}

/// Value table over (|i|, |j|, i.j); unlisted cells use the counting value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableStrategy {
    pub n: usize,
    pub k: f64,
    #[serde(with = "crate::law::cell_map")]
    pub values: BTreeMap<Cell, f64>,
}

pub fn counting_value(n: usize, k: f64, cell: Cell) -> f64 {
    clamp(k * cell.0 as f64 * cell.1 as f64 / (n * n) as f64)
}

pub fn mean_match_value(n: usize, k: f64, cell: Cell) -> f64 {
    clamp(k * cell.2 as f64 / n as f64)
}

fn clamp(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn feasible(n: usize, cell: Cell) -> bool {
    let (a, b, c) = (cell.0 as usize, cell.1 as usize, cell.2 as usize);
    c <= a.min(b) && a + b - c <= n
}

impl TableStrategy {
    pub fn new(n: usize, k: f64, values: BTreeMap<Cell, f64>) -> Result<Self> {
        for (&cell, &v) in &values {
            if !feasible(n, cell) {
                return Err(invalid(format!("infeasible cell {cell:?} for n = {n}")));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("value {v} outside [0,1] at {cell:?}")));
            }
        }
        Ok(TableStrategy { n, k, values })
    }

    pub fn value(&self, cell: Cell) -> f64 {
        self.values.get(&cell).copied().unwrap_or_else(|| counting_value(self.n, self.k, cell))
    }

    pub fn payoff(&self, stats: &TableStats) -> f64 {
        stats.payoff_of(|c| self.value(c))
    }

    /// Rows `|i| |j| i.j value` after an `n k` header.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "k {}", self.k);
        for (c, v) in &self.values {
            let _ = writeln!(s, "{} {} {} {:.16e}", c.0, c.1, c.2, v);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut n, mut k) = (None, None);
        let mut values = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["n", v] => n = Some(v.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                ["k", v] => k = Some(v.parse::<f64>().map_err(|e| perr(e.to_string()))?),
                [a, b, c, v] => {
                    let p = |s: &str| s.parse::<u32>().map_err(|e| perr(e.to_string()));
                    let cell = (p(a)?, p(b)?, p(c)?);
                    let val = v.parse::<f64>().map_err(|e| perr(e.to_string()))?;
                    if values.insert(cell, val).is_some() {
                        return Err(perr(format!("duplicate cell {cell:?}")));
                    }
                }
                _ => return Err(perr(format!("unrecognized row {line:?}"))),
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "missing n".into() })?;
        let k = k.ok_or(Error::Parse { line: 0, msg: "missing k".into() })?;
        TableStrategy::new(n, k, values)
    }
}

/// Exact posterior mean of x.y/(nk) given (i, j) under Phi x Phi'.
pub struct BayesPosterior {
    pub phi: Dist,
    pub phi2: Dist,
    pub k: f64,
    fallbacks: AtomicU64,
}

impl BayesPosterior {
    pub fn new(phi: Dist, phi2: Dist, k: f64) -> Result<Self> {
        check_dim(phi.n(), phi2.n())?;
        Ok(BayesPosterior { phi, phi2, k, fallbacks: AtomicU64::new(0) })
    }

    /// Posterior-weighted mean of the support points given the draw `i`;
    /// None when `i` is impossible.
    pub fn posterior_mean(d: &Dist, i: &BitVector, k: f64) -> Option<(Vec<f64>, f64)> {
        let p = 1.0 / k;
        let wi = i.weight() as i32;
        let mut mean = vec![0.0; d.n()];
        let mut total = 0.0;
        for (x, w) in d.points() {
            if !i.is_subset_of(x) {
                continue;
            }
            let l = w * p.powi(wi) * (1.0 - p).powi(x.weight() as i32 - wi);
            if l == 0.0 {
                continue;
            }
            total += l;
            for s in x.support() {
                mean[s] += l;
            }
        }
        if total <= 0.0 {
            return None;
        }
        mean.iter_mut().for_each(|m| *m /= total);
        Some((mean, total))
    }

    /// Value and whether the counting fallback was used.
    pub fn evaluate(&self, i: &BitVector, j: &BitVector) -> (f64, bool) {
        let n = self.phi.n();
        let ex = Self::posterior_mean(&self.phi, i, self.k);
        let ey = Self::posterior_mean(&self.phi2, j, self.k);
        match (ex, ey) {
            (Some((mx, _)), Some((my, _))) => {
                let dot: f64 = mx.iter().zip(&my).map(|(a, b)| a * b).sum();
                (clamp(dot / (n as f64 * self.k)), false)
            }
            _ => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                (counting_value(n, self.k, cell_of(i, j)), true)
            }
        }
    }

    pub fn fallback_count(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }
}

pub type CustomFn = dyn Fn(&Observation) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Strategy {
    /// k i.j / n
    MeanMatch { n: usize, k: f64 },
    /// k |i||j| / n^2
    Counting { n: usize, k: f64 },
    Table(TableStrategy),
    Bayes(Arc<BayesPosterior>),
    /// Average of the inner strategy over the four relabelings allowed by the
    /// published pairs; invariant under transposition of either pair.
    PairAveraged(Box<Strategy>),
    Custom { name: String, invariant: bool, f: Arc<CustomFn> },
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Strategy({})", self.name())
    }
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::MeanMatch { .. } => "mean-match".into(),
            Strategy::Counting { .. } => "counting".into(),
            Strategy::Table(_) => "table".into(),
            Strategy::Bayes(_) => "bayes".into(),
            Strategy::PairAveraged(inner) => format!("pair-averaged({})", inner.name()),
            Strategy::Custom { name, .. } => name.clone(),
        }
    }

    /// True when the value depends on (i, j) only through (|i|, |j|, i.j).
    pub fn is_permutation_invariant(&self) -> bool {
        match self {
            Strategy::MeanMatch { .. } | Strategy::Counting { .. } | Strategy::Table(_) => true,
            Strategy::Bayes(_) | Strategy::PairAveraged(_) => false,
            Strategy::Custom { invariant, .. } => *invariant,
        }
    }

    pub fn evaluate(&self, obs: &Observation) -> f64 {
        match self {
            Strategy::MeanMatch { n, k } => mean_match_value(*n, *k, cell_of(obs.i, obs.j)),
            Strategy::Counting { n, k } => counting_value(*n, *k, cell_of(obs.i, obs.j)),
            Strategy::Table(t) => t.value(cell_of(obs.i, obs.j)),
            Strategy::Bayes(b) => b.evaluate(obs.i, obs.j).0,
            Strategy::PairAveraged(inner) => match obs.pairs {
                None => inner.evaluate(obs),
                Some((pa, pb)) => {
                    let mut acc = 0.0;
                    for mu in pa {
                        let i2 = mu.apply(obs.i).expect("pair matches dimension");
                        for nu in pb {
                            let j2 = nu.apply(obs.j).expect("pair matches dimension");
                            acc += inner.evaluate(&Observation::plain(&i2, &j2));
                        }
                    }
                    acc / 4.0
                }
            },
            Strategy::Custom { f, .. } => clamp(f(obs)),
        }
    }

    pub fn eval_plain(&self, i: &BitVector, j: &BitVector) -> f64 {
        self.evaluate(&Observation::plain(i, j))
    }

    /// Wraps a general function of (i, j, pairs) so that each published pair
    /// is presented in a canonical (sorted) order.
    pub fn canonical_pairs(name: &str, f: Arc<CustomFn>) -> Strategy {
        let g = move |obs: &Observation| -> f64 {
            match obs.pairs {
                None => f(obs),
                Some((pa, pb)) => {
                    let sort = |p: &[Permutation; 2]| {
                        let mut q = p.clone();
                        q.sort();
                        q
                    };
                    let (ca, cb) = (sort(pa), sort(pb));
                    f(&Observation { i: obs.i, j: obs.j, pairs: Some((&ca, &cb)) })
                }
            }
        };
        Strategy::Custom { name: name.to_string(), invariant: false, f: Arc::new(g) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BayesMode {
    Exact,
    Table,
}

pub fn strategy_bayes(phi: &Dist, phi2: &Dist, k: f64, mode: BayesMode) -> Result<Strategy> {
    check_dim(phi.n(), phi2.n())?;
    match mode {
        BayesMode::Exact => Ok(Strategy::Bayes(Arc::new(BayesPosterior::new(phi.clone(), phi2.clone(), k)?))),
        BayesMode::Table => {
            let stats = TableStats::of_pair(phi, phi2, k, &mut TripleCache::new())?;
            Ok(Strategy::Table(table_minimizer(&stats)))
        }
    }
}

/// Cellwise conditional expectation; cells without mass use the counting value.
pub fn table_minimizer(stats: &TableStats) -> TableStrategy {
    let values = stats
        .cells
        .iter()
        .filter(|(_, [p, _, _])| *p > 0.0)
        .map(|(&c, [p, s, _])| (c, clamp(s / p)))
        .collect();
    TableStrategy { n: stats.n, k: stats.k, values }
}

pub const GRID_LEVELS: usize = 32;

/// Grid levels t / (31 k), t = 0..31, covering the target range [0, 1/k].
pub fn grid_levels(k: f64) -> Vec<f64> {
    (0..GRID_LEVELS).map(|t| t as f64 / ((GRID_LEVELS - 1) as f64 * k)).collect()
}

/// Best grid value per cell.
pub fn grid_minimizer(stats: &TableStats) -> TableStrategy {
    let levels = grid_levels(stats.k);
    let values = stats
        .cells
        .iter()
        .filter(|(_, [p, _, _])| *p > 0.0)
        .map(|(&c, [p, s, q])| {
            let best = levels
                .iter()
                .copied()
                .min_by(|a, b| {
                    let fa = p * a * a - 2.0 * a * s + q;
                    let fb = p * b * b - 2.0 * b * s + q;
                    fa.total_cmp(&fb)
                })
                .expect("non-empty grid");
            (c, best)
        })
        .collect();
    TableStrategy { n: stats.n, k: stats.k, values }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableSpace {
    Table,
    Grid,
}

/// argmin over the table space of <omega, Phi> (x and y both from Phi).
pub fn min_strategy(phi: &Dist, k: f64, space: TableSpace) -> Result<(TableStrategy, f64)> {
    let stats = TableStats::of_pair(phi, phi, k, &mut TripleCache::new())?;
    let t = match space {
        TableSpace::Table => table_minimizer(&stats),
        TableSpace::Grid => grid_minimizer(&stats),
    };
    let v = t.payoff(&stats);
    Ok((t, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymMode {
    Exact,
    Sampled,
}

pub const SYM_EXACT_MAX_N: usize = 8;

/// Orbit average over simultaneous relabelings of (i, j).
pub fn symmetrize(omega: &Strategy, n: usize, k: f64, mode: SymMode, samples: usize, rng: &mut Stream) -> Result<TableStrategy> {
    let mut sums: BTreeMap<Cell, (f64, f64)> = BTreeMap::new();
    match mode {
        SymMode::Exact => {
            if n > SYM_EXACT_MAX_N {
                return Err(Error::Capability(format!("exact symmetrization needs n <= {SYM_EXACT_MAX_N}")));
            }
            for im in 0..1u64 << n {
                let i = BitVector::from_mask(n, im);
                for jm in 0..1u64 << n {
                    let j = BitVector::from_mask(n, jm);
                    let e = sums.entry(cell_of(&i, &j)).or_insert((0.0, 0.0));
                    e.0 += omega.eval_plain(&i, &j);
                    e.1 += 1.0;
                }
            }
        }
        SymMode::Sampled => {
            if samples == 0 {
                return Err(invalid("samples must be positive"));
            }
            for a in 0..=n {
                for b in 0..=n {
                    for c in 0..=a.min(b) {
                        if a + b - c > n {
                            continue;
                        }
                        let cell = (a as u32, b as u32, c as u32);
                        let e = sums.entry(cell).or_insert((0.0, 0.0));
                        for _ in 0..samples {
                            let p = Permutation::random(n, rng);
                            let m = p.map();
                            let i = BitVector::from_support(n, &m[..a]);
                            let mut js: Vec<usize> = m[..c].to_vec();
                            js.extend_from_slice(&m[a..a + b - c]);
                            let j = BitVector::from_support(n, &js);
                            e.0 += omega.eval_plain(&i, &j);
                            e.1 += 1.0;
                        }
                    }
                }
            }
        }
    }
    let values = sums.into_iter().map(|(c, (s, w))| (c, clamp(s / w))).collect();
    TableStrategy::new(n, k, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffEstimate {
    pub value: f64,
    pub std_err: f64,
    pub exact: bool,
}

/// Enumeration budget (sum over support pairs of 2^{|x|+|y|}) for exact payoffs.
pub const EXACT_PAYOFF_BUDGET: f64 = 2e7;

/// <omega, Phi, Phi'> = E[(omega(i, j) - x.y/(nk))^2].
pub fn payoff(omega: &Strategy, phi: &Dist, phi2: &Dist, k: f64, trials: usize, rng: &mut Stream) -> Result<PayoffEstimate> {
    check_dim(phi.n(), phi2.n())?;
    if let Strategy::Table(t) = omega {
        let stats = TableStats::of_pair(phi, phi2, k, &mut TripleCache::new())?;
        return Ok(PayoffEstimate { value: t.payoff(&stats), std_err: 0.0, exact: true });
    }
    if omega.is_permutation_invariant() {
        let stats = TableStats::of_pair(phi, phi2, k, &mut TripleCache::new())?;
        let n = phi.n();
        let value = stats.payoff_of(|c| {
            let (i, j) = representative(n, c);
            omega.eval_plain(&i, &j)
        });
        return Ok(PayoffEstimate { value, std_err: 0.0, exact: true });
    }
    if phi.n() <= crate::law::EXACT_LAW_MAX_N && ExactLaw::enumeration_cost(phi, phi2) <= EXACT_PAYOFF_BUDGET {
        let law = ExactLaw::new(phi, phi2, k, Target::Mean)?;
        let value = law.payoff_of(|i, j| omega.eval_plain(i, j));
        return Ok(PayoffEstimate { value, std_err: 0.0, exact: true });
    }
    monte_carlo_payoff(omega, phi, phi2, k, trials, rng)
}

pub fn monte_carlo_payoff(omega: &Strategy, phi: &Dist, phi2: &Dist, k: f64, trials: usize, rng: &mut Stream) -> Result<PayoffEstimate> {
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let n = phi.n() as f64;
    let (sx, sy) = (Sampler::new(phi), Sampler::new(phi2));
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..trials {
        let x = sx.sample(rng);
        let y = sy.sample(rng);
        let i = draw_scaled(x, k, rng);
        let j = draw_scaled(y, k, rng);
        let d = omega.eval_plain(&i, &j) - x.dot(y) as f64 / (n * k);
        s1 += d * d;
        s2 += d.powi(4);
    }
    let t = trials as f64;
    let mean = s1 / t;
    let var = (s2 / t - mean * mean).max(0.0);
    Ok(PayoffEstimate { value: mean, std_err: (var / t).sqrt(), exact: false })
}

/// Some (i, j) realizing a cell.
pub fn representative(n: usize, cell: Cell) -> (BitVector, BitVector) {
    let (a, b, c) = (cell.0 as usize, cell.1 as usize, cell.2 as usize);
    let i = BitVector::from_support(n, &(0..a).collect::<Vec<_>>());
    let mut js: Vec<usize> = (0..c).collect();
    js.extend(a..a + b - c);
    (i, BitVector::from_support(n, &js))
}

/// Exact payoff of omega o sigma under Phi x Phi', reusing one enumerated law.
pub fn payoff_relabeled(law: &ExactLaw, omega: &Strategy, sigma: &Permutation) -> f64 {
    law.payoff_of(|i, j| omega.eval_plain(&sigma.apply(i).expect("dim"), &sigma.apply(j).expect("dim")))
}

/// Cache of payoffs keyed by relabeling, for searches over S_n.
pub struct RelabelPayoff<'a> {
    law: &'a ExactLaw,
    omega: &'a Strategy,
    memo: HashMap<Permutation, f64>,
}

impl<'a> RelabelPayoff<'a> {
    pub fn new(law: &'a ExactLaw, omega: &'a Strategy) -> Self {
        RelabelPayoff { law, omega, memo: HashMap::new() }
    }

    pub fn at(&mut self, sigma: &Permutation) -> f64 {
        if let Some(v) = self.memo.get(sigma) {
            return *v;
        }
        let v = payoff_relabeled(self.law, self.omega, sigma);
        self.memo.insert(sigma.clone(), v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_text_roundtrip() {
        let mut values = BTreeMap::new();
        values.insert((1, 1, 1), 0.25);
        values.insert((2, 0, 0), 1.0 / 3.0);
        let t = TableStrategy::new(4, 2.0, values).unwrap();
        assert_eq!(TableStrategy::from_text(&t.to_text()).unwrap(), t);
        assert!(TableStrategy::from_text("n 4\nk 2\n3 3 0 0.1\n").is_err());
    }

    #[test]
    fn representative_realizes_cell() {
        let (i, j) = representative(7, (3, 4, 2));
        assert_eq!(cell_of(&i, &j), (3, 4, 2));
    }

    #[test]
    fn clamping() {
        assert_eq!(counting_value(2, 100.0, (2, 2, 2)), 1.0);
        assert_eq!(mean_match_value(4, 2.0, (1, 1, 1)), 0.5);
    }
}
