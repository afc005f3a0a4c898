//! The key-agreement protocol: degradation, dispersion, synchronization,
//! decorrelation, digit sampling and advantage distillation.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::bernoulli::draw_scaled;
use crate::bits::BitVector;
use crate::dist::{Dist, Sampler};
use crate::error::{check_dim, Error, Result};
use crate::lab::tidy;
use crate::perm::{binomial, Permutation};
use crate::quad::SearchMode;
use crate::rng::Stream;
use crate::split::better;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub alpha: f64,
    pub n: usize,
    pub k: f64,
    /// Code-word length.
    pub l: usize,
    /// Sampling gauge multiplier K.
    pub gauge: f64,
    pub gamma: f64,
    pub t: f64,
    /// Number of distillation blocks.
    pub trials: usize,
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(n: usize, k: f64, alpha: f64, seed: u64) -> Self {
        let (gamma, t) = default_gamma_t(n, k);
        SessionConfig { alpha, n, k, l: 64, gauge: 8.0, gamma, t, trials: 100, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, v: String, why: &str| Err(Error::Config(format!("{field} = {v}: {why}")));
        if self.n % 2 != 0 || self.n <= 4 {
            return bad("n", self.n.to_string(), "must be even and > 4");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", self.alpha.to_string(), "must be in (0, 1]");
        }
        if !(self.k >= 1.0) || !self.k.is_finite() {
            return bad("k", self.k.to_string(), "must be >= 1");
        }
        if self.l == 0 {
            return bad("l", "0".into(), "must be positive");
        }
        if !(self.gauge > 0.0) {
            return bad("gauge", self.gauge.to_string(), "must be positive");
        }
        if !(self.gamma < 0.5) {
            return bad("gamma", self.gamma.to_string(), "must be < 1/2");
        }
        if !(self.t > 0.0) {
            return bad("t", self.t.to_string(), "must be positive");
        }
        if !(self.gamma > self.t) {
            return bad("gamma", self.gamma.to_string(), &format!("must exceed t = {}", self.t));
        }
        if self.trials == 0 {
            return bad("trials", "0".into(), "must be >= 1");
        }
        code_weights(self.l, self.gamma)?;
        Ok(())
    }

    /// Width K / sqrt(n k) of one sampling cell.
    pub fn cell(&self) -> f64 {
        self.gauge / (self.n as f64 * self.k).sqrt()
    }
}

/// gamma = 1/(2 ln n), t = max(4k/n, gamma/4).
pub fn default_gamma_t(n: usize, k: f64) -> (f64, f64) {
    let gamma = 1.0 / (2.0 * (n as f64).ln());
    (gamma, (4.0 * k / n as f64).max(gamma / 4.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Situation {
    S0,
    S1,
    S2,
    S3,
}

impl Situation {
    /// `a_true`: A picked sigma_Phi'; `b_true`: B picked sigma_Phi.
    pub fn of(a_true: bool, b_true: bool) -> Self {
        match (a_true, b_true) {
            (true, true) => Situation::S0,
            (true, false) => Situation::S1,
            (false, true) => Situation::S2,
            (false, false) => Situation::S3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Mass of Psi on |x| in [k|i| - sqrt(n), k|i| + sqrt(n)].
pub fn band_mass(psi: &Dist, i_weight: usize, k: f64) -> f64 {
    let (lo, hi) = band(psi.n(), i_weight, k);
    psi.mass_where(|x| {
        let w = x.weight() as f64;
        w >= lo && w <= hi
    })
}

fn band(n: usize, i_weight: usize, k: f64) -> (f64, f64) {
    let c = k * i_weight as f64;
    let r = (n as f64).sqrt();
    (c - r, c + r)
}

pub fn dispersion_bound(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64).sqrt())
}

/// Moves just enough mass of Psi into the |x| band to meet the bound.
pub fn reweight_band(psi: &Dist, i_weight: usize, k: f64) -> Result<Dist> {
    let n = psi.n();
    let (lo, hi) = band(n, i_weight, k);
    let inside = |x: &BitVector| {
        let w = x.weight() as f64;
        w >= lo && w <= hi
    };
    let m = psi.mass_where(inside);
    let target = dispersion_bound(n);
    if m >= target {
        return Ok(psi.clone());
    }
    if m <= 0.0 {
        return Err(Error::DispersionConstraint { weight: i_weight });
    }
    let cond = Dist::from_weighted(n, psi.points().iter().filter(|(x, _)| inside(x)).cloned())?;
    // lambda + (1 - lambda) m = target
    let lambda = (target - m) / (1.0 - m);
    cond.mix(psi, lambda)
}

/// Psi with its points projected onto the nearest |x| in the band, by
/// setting the lowest clear bits or clearing the highest set bits, mixed in
/// with just enough weight to meet the bound. Used when Psi has no mass in
/// the band at all.
pub fn project_band(psi: &Dist, i_weight: usize, k: f64) -> Result<Dist> {
    let n = psi.n();
    let (lo, hi) = band(n, i_weight, k);
    let (lo, hi) = (lo.max(0.0).ceil(), hi.min(n as f64).floor());
    if lo > hi {
        return Err(Error::DispersionConstraint { weight: i_weight });
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let moved = psi.points().iter().map(|(x, w)| {
        let mut y = x.clone();
        let mut weight = y.weight();
        let mut s = 0;
        while weight < lo {
            if !y.get(s) {
                y.set(s, true);
                weight += 1;
            }
            s += 1;
        }
        let mut s = n;
        while weight > hi {
            s -= 1;
            if y.get(s) {
                y.set(s, false);
                weight -= 1;
            }
        }
        (y, *w)
    });
    let moved = Dist::from_weighted(n, moved.collect::<Vec<_>>())?;
    let m = band_mass(psi, i_weight, k);
    let target = dispersion_bound(n);
    if m >= target {
        return Ok(psi.clone());
    }
    moved.mix(psi, (target - m) / (1.0 - m))
}

/// Dispersion data of one Psi: its tidied form and the best relabeled draw
/// support per weight |i|.
pub struct Disperser {
    n: usize,
    k: f64,
    pub psi: Dist,
    pub tidied: Dist,
    weighted: Vec<(BitVector, f64)>,
    cache: RwLock<HashMap<usize, Vec<Vec<usize>>>>,
}

/// Exact subset search while C(n, r) * support stays below this.
pub const DISPERSION_EXACT_BUDGET: f64 = 2e7;
/// Tied supports kept for the lexicographic tie-break.
pub const MAX_TIED_SUPPORTS: usize = 4096;

impl Disperser {
    pub fn new(psi: Dist, k: f64, rng: &mut Stream) -> Result<Self> {
        let n = psi.n();
        let tidied = tidy(&psi, SearchMode::Auto, rng)?.dist;
        let q = 1.0 - 1.0 / k;
        let weighted = tidied.points().iter().map(|(x, p)| (x.clone(), p * q.powi(x.weight() as i32))).collect();
        Ok(Disperser { n, k, psi, tidied, weighted, cache: RwLock::new(HashMap::new()) })
    }

    fn score(&self, s: &BitVector) -> f64 {
        self.weighted.iter().filter(|(x, _)| s.is_subset_of(x)).map(|(_, w)| w).sum()
    }

    /// Likelihood sum_x Psi_tidied(x) chi_{sigma(i)}(x / k).
    pub fn likelihood(&self, relabeled: &BitVector) -> f64 {
        let r = relabeled.weight() as i32;
        self.score(relabeled) * (1.0 / self.k).powi(r)
    }

    /// Maximizing supports of size r; every tied set when searched exactly.
    fn best_sets(&self, r: usize) -> Vec<Vec<usize>> {
        if let Some(s) = self.cache.read().expect("cache lock").get(&r) {
            return s.clone();
        }
        let n = self.n;
        let s = if binomial(n, r) * self.weighted.len() as f64 <= DISPERSION_EXACT_BUDGET {
            let mut best: (Vec<Vec<usize>>, f64) = (Vec::new(), f64::NEG_INFINITY);
            let mut cur: Vec<usize> = (0..r).collect();
            loop {
                let v = self.score(&BitVector::from_support(n, &cur));
                if better(v, best.1, true) {
                    best = (vec![cur.clone()], v);
                } else if !better(best.1, v, true) && best.0.len() < MAX_TIED_SUPPORTS {
                    best.0.push(cur.clone());
                }
                if !next_combination(&mut cur, n) {
                    break;
                }
            }
            best.0
        } else {
            vec![self.climb_set(r)]
        };
        self.cache.write().expect("cache lock").insert(r, s.clone());
        s
    }

    fn climb_set(&self, r: usize) -> Vec<usize> {
        let n = self.n;
        let mut s: Vec<usize> = Vec::new();
        for _ in 0..r {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for u in (0..n).filter(|u| !s.contains(u)) {
                let mut t = s.clone();
                t.push(u);
                let v = self.score(&BitVector::from_support(n, &t));
                if better(v, best.1, true) {
                    best = (u, v);
                }
            }
            s.push(best.0);
        }
        let mut cur = self.score(&BitVector::from_support(n, &s));
        'outer: loop {
            for a in 0..r {
                for u in (0..n).filter(|u| !s.contains(u)) {
                    let mut t = s.clone();
                    t[a] = u;
                    let v = self.score(&BitVector::from_support(n, &t));
                    if better(v, cur, true) {
                        s = t;
                        cur = v;
                        continue 'outer;
                    }
                }
            }
            break;
        }
        s.sort_unstable();
        s
    }

    /// sigma_d[i]: lexicographically smallest sigma such that sigma(i) is a
    /// most likely support under the tidied Psi.
    pub fn sigma_d(&self, i: &BitVector) -> Result<Permutation> {
        check_dim(self.n, i.len())?;
        let best = self
            .best_sets(i.weight())
            .iter()
            .map(|t| relabel_onto(i, t))
            .min_by(|a, b| a.map().cmp(b.map()))
            .expect("at least one support");
        Ok(best)
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    let mut t = r;
    while t > 0 {
        t -= 1;
        if c[t] < n - r + t {
            c[t] += 1;
            for u in t + 1..r {
                c[u] = c[u - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Smallest sigma (lexicographic) with support(sigma(i)) = target.
pub fn relabel_onto(i: &BitVector, target: &[usize]) -> Permutation {
    let n = i.len();
    let ones = i.support();
    let zeros: Vec<usize> = (0..n).filter(|&s| !i.get(s)).collect();
    let mut in_target = vec![false; n];
    for &s in target {
        in_target[s] = true;
    }
    let (mut a, mut b) = (ones.into_iter(), zeros.into_iter());
    let map = (0..n).map(|s| if in_target[s] { a.next() } else { b.next() }.expect("sizes match")).collect();
    Permutation::new(map).expect("bijection")
}

/// A party's secret distribution with its tidying permutation.
#[derive(Clone, Debug)]
pub struct Keyed {
    pub dist: Dist,
    pub sigma: Permutation,
}

impl Keyed {
    pub fn new(dist: Dist, rng: &mut Stream) -> Result<Self> {
        let t = tidy(&dist, SearchMode::Auto, rng)?;
        Ok(Keyed { dist, sigma: t.sigma })
    }
}

/// Per-block choices: transposition bits and the pair positions each partner takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockChoices {
    pub b: bool,
    pub b2: bool,
    /// Position A takes in B's published pair.
    pub pos_a: usize,
    /// Position B takes in A's published pair.
    pub pos_b: usize,
}

impl BlockChoices {
    pub fn random(rng: &mut Stream) -> Self {
        BlockChoices { b: rng.bit(), b2: rng.bit(), pos_a: rng.below(2), pos_b: rng.below(2) }
    }

    /// Index of the true tidying permutation within a pair (decoy, true) transposed by `flip`.
    fn true_pos(flip: bool) -> usize {
        if flip {
            0
        } else {
            1
        }
    }

    pub fn situation(&self) -> Situation {
        Situation::of(self.pos_a == Self::true_pos(self.b2), self.pos_b == Self::true_pos(self.b))
    }
}

fn publish(decoy: Permutation, truth: Permutation, flip: bool) -> [Permutation; 2] {
    if flip {
        [truth, decoy]
    } else {
        [decoy, truth]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicRound {
    pub i: BitVector,
    pub j: BitVector,
    pub pair_a: [Permutation; 2],
    pub pair_b: [Permutation; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateRound {
    pub x: BitVector,
    pub y: BitVector,
    pub b: bool,
    pub b2: bool,
    pub sigma_a: Permutation,
    pub sigma_b: Permutation,
    pub situation: Situation,
    pub v_a: f64,
    pub v_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub public: PublicRound,
    pub private: PrivateRound,
}

/// Steps 1 to 5 for one round. Psi and Psi' must already satisfy the band
/// constraint for the drawn i and j (see `check_dispersion`).
#[allow(clippy::too_many_arguments)]
pub fn run_round_with(
    cfg: &SessionConfig,
    phi: &Keyed,
    phi2: &Keyed,
    x: BitVector,
    y: BitVector,
    i: BitVector,
    j: BitVector,
    disp_a: &Disperser,
    disp_b: &Disperser,
    choices: BlockChoices,
) -> Result<Transcript> {
    let n = cfg.n;
    check_dim(n, x.len())?;
    check_dim(n, y.len())?;
    let pair_a = publish(disp_a.sigma_d(&i)?, phi.sigma.clone(), choices.b);
    let pair_b = publish(disp_b.sigma_d(&j)?, phi2.sigma.clone(), choices.b2);
    let sigma_a = pair_b[choices.pos_a].clone();
    let sigma_b = pair_a[choices.pos_b].clone();
    let v_a = phi.sigma.apply(&x)?.dot(&sigma_a.apply(&j)?) as f64 / n as f64;
    let v_b = sigma_b.apply(&i)?.dot(&phi2.sigma.apply(&y)?) as f64 / n as f64;
    Ok(Transcript {
        public: PublicRound { i, j, pair_a, pair_b },
        private: PrivateRound {
            x,
            y,
            b: choices.b,
            b2: choices.b2,
            sigma_a,
            sigma_b,
            situation: choices.situation(),
            v_a,
            v_b,
        },
    })
}

/// Draws x, y, i, j and runs the round; Psi is fixed, so an unlikely |i| is a
/// dispersion-constraint error.
pub fn run_round(
    cfg: &SessionConfig,
    phi: &Keyed,
    phi2: &Keyed,
    disp_a: &Disperser,
    disp_b: &Disperser,
    choices: BlockChoices,
    rng: &mut Stream,
) -> Result<Transcript> {
    let x = Sampler::new(&phi.dist).sample(rng).clone();
    let y = Sampler::new(&phi2.dist).sample(rng).clone();
    let i = draw_scaled(&x, cfg.k, rng);
    let j = draw_scaled(&y, cfg.k, rng);
    check_dispersion(&disp_a.psi, &i, cfg.k)?;
    check_dispersion(&disp_b.psi, &j, cfg.k)?;
    run_round_with(cfg, phi, phi2, x, y, i, j, disp_a, disp_b, choices)
}

pub fn check_dispersion(psi: &Dist, i: &BitVector, k: f64) -> Result<()> {
    if band_mass(psi, i.weight(), k) >= dispersion_bound(psi.n()) {
        Ok(())
    } else {
        Err(Error::DispersionConstraint { weight: i.weight() })
    }
}

/// floor((v + origin) sqrt(nk) / K) mod 2.
pub fn sample_digit(v: f64, cfg: &SessionConfig, origin: f64) -> bool {
    digit_in_cells(v + origin, cfg.cell())
}

pub fn digit_in_cells(v: f64, cell: f64) -> bool {
    let c = (v / cell).floor();
    c.rem_euclid(2.0) == 1.0
}

/// (w0, w1): code-word weights for e = 0 and e = 1.
pub fn code_weights(l: usize, gamma: f64) -> Result<(usize, usize)> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::Config(format!("gamma = {gamma}: must be in (0, 1/2]")));
    }
    let w1 = (l as f64 * (0.5 + gamma)).round() as usize;
    let w1 = w1.min(l);
    let w0 = l - w1;
    if w1 <= w0 {
        return Err(Error::Config(format!("gamma = {gamma}: weights {w0} and {w1} do not separate at l = {l}")));
    }
    Ok((w0, w1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decode {
    Zero,
    One,
    Discard,
}

impl Decode {
    pub fn bit(self) -> Option<bool> {
        match self {
            Decode::Zero => Some(false),
            Decode::One => Some(true),
            Decode::Discard => None,
        }
    }
}

/// Publishes stream XOR v where v is uniform among words of the weight for e.
pub fn distill_encode(stream_a: &BitVector, e: bool, gamma: f64, rng: &mut Stream) -> Result<BitVector> {
    let l = stream_a.len();
    let (w0, w1) = code_weights(l, gamma)?;
    let all: Vec<usize> = (0..l).collect();
    let v = BitVector::random_weight_in(l, &all, if e { w1 } else { w0 }, rng);
    Ok(stream_a.xor(&v))
}

pub fn distill_decode(stream_b: &BitVector, published: &BitVector, t: f64) -> Result<Decode> {
    check_dim(stream_b.len(), published.len())?;
    let l = stream_b.len() as f64;
    let w = stream_b.xor(published).weight() as f64;
    Ok(if w < l * (0.5 - t) {
        Decode::Zero
    } else if w > l * (0.5 + t) {
        Decode::One
    } else {
        Decode::Discard
    })
}

/// Opponent decoding: majority, ties to 0, never discards.
pub fn majority_decode(stream: &BitVector, published: &BitVector) -> Result<bool> {
    check_dim(stream.len(), published.len())?;
    Ok(2 * stream.xor(published).weight() > stream.len())
}

pub fn digits_to_bits(d: &[bool]) -> BitVector {
    BitVector::from_bools(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_combination_counts() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn relabel_onto_is_minimal() {
        let i: BitVector = "0101".parse().unwrap();
        let p = relabel_onto(&i, &[0, 2]);
        assert_eq!(p.apply(&i).unwrap().support(), vec![0, 2]);
        assert_eq!(p.map(), &[1, 0, 3, 2]);
    }

    #[test]
    fn default_gamma_t_orders() {
        let (g, t) = default_gamma_t(1 << 20, 1.0);
        assert!(g > t && t > 0.0);
    }
}
