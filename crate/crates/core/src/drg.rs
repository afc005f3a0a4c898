//! Deep-random generator: recursive sequences of distributions, each step
//! defeating the best table strategy against the current value (Process 1)
//! and against the running history (Process 2).

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::adversary::{payoff_relabeled, table_minimizer, Strategy, TableStrategy};
use crate::law::ExactLaw;
use crate::dist::Dist;
use crate::error::{check_dim, invalid, Error, Result};
use crate::lab::{tidy, zeta_member};
use crate::law::{table_dim, Target, TableStats, TripleCache};
use crate::perm::Permutation;
use crate::quad::SearchMode;
use crate::rng::{Stream, StreamState};
use crate::search;
use crate::seeds::SeedLibrary;
use crate::sleek::{apply_preset, lemma3_preset, DEFAULT_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrgMode {
    Combined,
    Process1,
    Process2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrgConfig {
    pub n: usize,
    pub k: f64,
    pub alpha: f64,
    pub sequences: usize,
    pub c_prime: f64,
    /// Overrides the maturity bound when set.
    pub maturity_steps: Option<u64>,
    pub mode: DrgMode,
    /// Deterministic candidate and permutation choices (argmax, identity).
    pub deterministic: bool,
    /// Mix each new value with the uniform law at weight 1/2 (n <= 12).
    pub regularize: bool,
    pub threshold_factor: f64,
    pub max_support: usize,
    pub mix_retries: usize,
    pub sleek_budget: usize,
    pub eps_prime: f64,
    pub seed: u64,
}

impl DrgConfig {
    pub fn new(n: usize, k: f64, alpha: f64, seed: u64) -> Self {
        DrgConfig {
            n,
            k,
            alpha,
            sequences: 2,
            c_prime: 1.0,
            maturity_steps: None,
            mode: DrgMode::Combined,
            deterministic: false,
            regularize: false,
            threshold_factor: 1.5,
            max_support: 256,
            mix_retries: 8,
            sleek_budget: DEFAULT_BUDGET,
            eps_prime: 0.125,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n % 2 != 0 || self.n <= 4 {
            return Err(Error::Config(format!("n = {}: must be even and > 4", self.n)));
        }
        if !(self.k >= 1.0) {
            return Err(Error::Config(format!("k = {}: must be >= 1", self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha = {}: must be in (0, 1]", self.alpha)));
        }
        if self.sequences == 0 {
            return Err(Error::Config("sequences: must be >= 1".into()));
        }
        if !(self.c_prime > 0.0) {
            return Err(Error::Config(format!("c_prime = {}: must be positive", self.c_prime)));
        }
        if self.regularize && self.n > 12 {
            return Err(Error::Config("regularize: needs n <= 12".into()));
        }
        if self.max_support == 0 || self.sleek_budget == 0 {
            return Err(Error::Config("max_support and sleek_budget must be positive".into()));
        }
        Ok(())
    }

    pub fn maturity(&self) -> u64 {
        self.maturity_steps.unwrap_or_else(|| maturity(table_dim(self.n), self.c_prime))
    }
}

/// Smallest N >= 3 with N / ln N >= c' dim.
pub fn maturity(dim: u64, c_prime: f64) -> u64 {
    let target = c_prime * dim as f64;
    let ok = |n: u64| n as f64 / (n as f64).ln() >= target;
    if ok(3) {
        return 3;
    }
    let mut hi = 4u64;
    while !ok(hi) {
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return hi;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Finds sigma with <omega, Psi o sigma> >= threshold.
/// Permutation-invariant strategies short-circuit: every sigma has the same payoff.
pub fn defeating_permutation(
    omega: &Strategy,
    psi: &Dist,
    k: f64,
    threshold: f64,
    restarts: usize,
    rng: &mut Stream,
) -> Result<(Permutation, f64)> {
    let n = psi.n();
    if omega.is_permutation_invariant() {
        let v = crate::adversary::payoff(omega, psi, psi, k, 1, rng)?.value;
        if v >= threshold {
            return Ok((Permutation::random(n, rng), v));
        }
        return Err(Error::ThresholdInfeasible { best: v, threshold });
    }
    let law = ExactLaw::new(psi, psi, k, Target::Mean)?;
    let mut best = search::climb(n, true, restarts, Some(threshold), rng, |p| payoff_relabeled(&law, omega, p));
    if best.1 < threshold && n <= search::EXHAUSTIVE_MAX_N {
        best = search::exhaustive(n, true, |p| payoff_relabeled(&law, omega, p));
    }
    if best.1 >= threshold {
        Ok(best)
    } else {
        Err(Error::ThresholdInfeasible { best: best.1, threshold })
    }
}

/// Mean payoff over `samples` uniform relabelings.
pub fn mean_relabeled_payoff(omega: &Strategy, psi: &Dist, k: f64, samples: usize, rng: &mut Stream) -> Result<f64> {
    if omega.is_permutation_invariant() {
        return Ok(crate::adversary::payoff(omega, psi, psi, k, 1, rng)?.value);
    }
    let law = ExactLaw::new(psi, psi, k, Target::Mean)?;
    let mut acc = 0.0;
    for _ in 0..samples {
        acc += payoff_relabeled(&law, omega, &Permutation::random(psi.n(), rng));
    }
    Ok(acc / samples as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrgSequence {
    /// Number of distributions produced so far (the current one included).
    #[serde(with = "biguint_string")]
    pub step: BigUint,
    pub current: Dist,
    /// Running average of per-step table statistics of Phi_s x Phi_s.
    pub history: TableStats,
    pub stream: StreamState,
}

mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: String,
    /// <omega_m, Phi_m> for the minimizer against the current value.
    pub min_current: f64,
    /// min_omega (1/m) sum_s <omega, Phi_s>.
    pub min_history: f64,
    /// <omega_m, Phi_{m+1}>.
    pub next_payoff: f64,
    pub mix_weight: f64,
    pub fell_back: bool,
}

fn candidates<'a>(library: &'a SeedLibrary, peers: &'a [Dist]) -> Vec<&'a Dist> {
    let mut c = library.members();
    c.extend(peers.iter());
    c
}

fn pick<'a>(
    cands: &[&'a Dist],
    omega: &TableStrategy,
    cfg: &DrgConfig,
    cache: &mut TripleCache,
    rng: &mut Stream,
) -> Result<&'a Dist> {
    if cands.is_empty() {
        return Err(invalid("no zeta(alpha) candidates in the seed library"));
    }
    if !cfg.deterministic {
        return Ok(cands[rng.below(cands.len())]);
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (t, c) in cands.iter().enumerate() {
        let v = omega.payoff(&TableStats::of_pair(c, c, cfg.k, cache)?);
        if v > best.1 + 1e-15 {
            best = (t, v);
        }
    }
    Ok(cands[best.0])
}

fn defeat(psi: &Dist, omega: &TableStrategy, cfg: &DrgConfig, rng: &mut Stream) -> Result<Dist> {
    if cfg.deterministic {
        return Ok(psi.clone());
    }
    let strat = Strategy::Table(omega.clone());
    let mean = mean_relabeled_payoff(&strat, psi, cfg.k, 8, rng)?;
    let sigma = match defeating_permutation(&strat, psi, cfg.k, cfg.threshold_factor * mean, 4, rng) {
        Ok((s, _)) => s,
        Err(Error::ThresholdInfeasible { .. }) => defeating_permutation(&strat, psi, cfg.k, mean, 4, rng)?.0,
        Err(e) => return Err(e),
    };
    psi.permute(&sigma)
}

/// One step of the generator; `peers` are current values of the other sequences.
pub fn drg_step(seq: &mut DrgSequence, library: &SeedLibrary, peers: &[Dist], cfg: &DrgConfig, cache: &mut TripleCache) -> Result<StepReport> {
    check_dim(cfg.n, seq.current.n())?;
    let mut rng = Stream::restore(&seq.stream)?;
    let stats = TableStats::of_pair(&seq.current, &seq.current, cfg.k, cache)?;
    let m = &seq.step;
    let count = m.to_string().parse::<f64>().unwrap_or(f64::INFINITY).max(1.0);
    if m == &BigUint::from(1u32) {
        seq.history = stats.clone();
    } else {
        seq.history.blend(&stats, 1.0 / count);
    }
    let omega = table_minimizer(&stats);
    let omega_hist = table_minimizer(&seq.history);
    let min_current = omega.payoff(&stats);
    let min_history = seq.history.min_payoff();

    let cands = candidates(library, peers);
    let psi = pick(&cands, &omega, cfg, cache, &mut rng)?;
    let psi2 = pick(&cands, &omega_hist, cfg, cache, &mut rng)?;
    let a = defeat(psi, &omega, cfg, &mut rng)?;
    let b = defeat(psi2, &omega_hist, cfg, &mut rng)?;

    let mut fell_back = false;
    let mut weight = match cfg.mode {
        DrgMode::Process1 => 1.0,
        DrgMode::Process2 => 0.0,
        DrgMode::Combined => {
            if cfg.deterministic {
                0.5
            } else {
                rng.uniform()
            }
        }
    };
    let mut next = None;
    for attempt in 0..=cfg.mix_retries {
        let mut cand = a.mix(&b, weight)?;
        if cfg.regularize {
            cand = cand.mix(&Dist::uniform(cfg.n)?, 0.5)?;
        }
        cand = cand.compress(cfg.max_support, &mut rng)?;
        if zeta_member(&cand, cfg.alpha, SearchMode::Auto, &mut rng)? {
            next = Some(cand);
            break;
        }
        if attempt < cfg.mix_retries && cfg.mode == DrgMode::Combined && !cfg.deterministic {
            weight = rng.uniform();
        } else {
            break;
        }
    }
    let next = match next {
        Some(d) => d,
        None => {
            fell_back = true;
            weight = if cfg.mode == DrgMode::Process2 { 0.0 } else { 1.0 };
            let pure = if weight == 1.0 { a } else { b };
            pure.compress(cfg.max_support, &mut rng)?
        }
    };
    let next_payoff = omega.payoff(&TableStats::of_pair(&next, &next, cfg.k, cache)?);
    seq.current = next;
    seq.step += 1u32;
    seq.stream = rng.state();
    Ok(StepReport {
        step: seq.step.to_string(),
        min_current,
        min_history,
        next_payoff,
        mix_weight: weight,
        fell_back,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: DrgConfig,
    pub sequences: Vec<DrgSequence>,
    pub election: StreamState,
}

pub struct DrgGenerator {
    pub config: DrgConfig,
    pub library: SeedLibrary,
    pub sequences: Vec<DrgSequence>,
    election: Stream,
    cache: TripleCache,
}

impl DrgGenerator {
    pub fn new(config: DrgConfig) -> Result<Self> {
        config.validate()?;
        let root = Stream::new(config.seed);
        let library = SeedLibrary::standard(config.n, config.alpha, &mut root.derive("library", 0))?;
        let members = library.members();
        if members.is_empty() {
            return Err(invalid("no seed is in zeta(alpha); lower alpha"));
        }
        let mut sequences = Vec::new();
        for s in 0..config.sequences {
            let mut rng = root.derive("sequence", s as u64);
            let current = members[rng.below(members.len())].clone();
            sequences.push(DrgSequence {
                step: BigUint::from(1u32),
                current,
                history: TableStats::default(),
                stream: rng.state(),
            });
        }
        Ok(DrgGenerator { config, library, sequences, election: root.derive("election", 0), cache: TripleCache::new() })
    }

    /// Advances every sequence by one step; peers are the values before the step.
    pub fn step(&mut self) -> Result<Vec<StepReport>> {
        let snapshot: Vec<Dist> = self.sequences.iter().map(|s| s.current.clone()).collect();
        let mut out = Vec::new();
        for t in 0..self.sequences.len() {
            let peers: Vec<Dist> = snapshot.iter().enumerate().filter(|(u, _)| *u != t).map(|(_, d)| d.clone()).collect();
            out.push(drg_step(&mut self.sequences[t], &self.library, &peers, &self.config, &mut self.cache)?);
        }
        Ok(out)
    }

    pub fn run(&mut self, steps: u64) -> Result<Vec<Vec<StepReport>>> {
        (0..steps).map(|_| self.step()).collect()
    }

    pub fn run_to_maturity(&mut self) -> Result<()> {
        let target = BigUint::from(self.config.maturity());
        while self.sequences.iter().any(|s| s.step < target) {
            self.step()?;
        }
        Ok(())
    }

    pub fn is_mature(&self) -> bool {
        let target = BigUint::from(self.config.maturity());
        self.sequences.iter().all(|s| s.step >= target)
    }

    pub fn elect(&mut self) -> Result<Dist> {
        elect(&self.sequences, &self.config, &mut self.election)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: 1,
            config: self.config.clone(),
            sequences: self.sequences.clone(),
            election: self.election.state(),
        }
    }

    pub fn restore(cp: Checkpoint) -> Result<Self> {
        if cp.version != 1 {
            return Err(Error::Checkpoint(format!("unsupported version {}", cp.version)));
        }
        let mut g = DrgGenerator::new(cp.config)?;
        if cp.sequences.len() != g.config.sequences {
            return Err(Error::Checkpoint("sequence count differs from config".into()));
        }
        g.sequences = cp.sequences;
        g.election = Stream::restore(&cp.election)?;
        Ok(g)
    }
}

/// Internal combination and sleeking of mature sequences.
pub fn elect(sequences: &[DrgSequence], cfg: &DrgConfig, rng: &mut Stream) -> Result<Dist> {
    let target = BigUint::from(cfg.maturity());
    if let Some(s) = sequences.iter().find(|s| s.step < target) {
        return Err(Error::NotMature { step: s.step.to_string(), maturity: target.to_string() });
    }
    if sequences.is_empty() {
        return Err(invalid("no sequences to elect from"));
    }
    let mut tidied = Vec::new();
    for s in sequences {
        tidied.push(tidy(&s.current, SearchMode::Auto, rng)?.dist);
    }
    let preset = lemma3_preset(cfg.n, cfg.alpha, cfg.eps_prime)?;
    let mut last_norm = 0.0;
    for _ in 0..=cfg.mix_retries {
        let mu = Permutation::random(cfg.n, rng);
        let parts: Vec<Dist> = tidied.iter().map(|d| d.permute(&mu)).collect::<Result<_>>()?;
        let refs: Vec<(f64, &Dist)> = parts.iter().map(|d| (1.0 / parts.len() as f64, d)).collect();
        let mixed = Dist::mixture(&refs)?.compress(cfg.max_support, rng)?;
        let out = apply_preset(&mixed, &preset, cfg.sleek_budget, rng)?.compress(cfg.max_support, rng)?;
        let norm = crate::lab::centered_norm(&out, SearchMode::Auto, rng)?.value;
        if norm >= cfg.alpha.sqrt() {
            return Ok(out);
        }
        last_norm = norm;
    }
    // Single-sequence fallback, best sleeked norm first.
    for t in &tidied {
        let out = apply_preset(t, &preset, cfg.sleek_budget, rng)?.compress(cfg.max_support, rng)?;
        let norm = crate::lab::centered_norm(&out, SearchMode::Auto, rng)?.value;
        if norm >= cfg.alpha.sqrt() {
            return Ok(out);
        }
        last_norm = last_norm.max(norm);
    }
    Err(Error::NotInZeta { norm: last_norm, bound: cfg.alpha.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maturity_convention() {
        assert_eq!(maturity(1, 1.0), 3);
        let n = 64u64;
        let m = maturity(n, 1.0);
        assert!(m as f64 / (m as f64).ln() >= 64.0);
        assert!(((m - 1) as f64) / ((m - 1) as f64).ln() < 64.0);
        let nln = n as f64 * (n as f64).ln();
        assert!(m as f64 > 0.5 * nln && (m as f64) < 3.0 * nln);
    }

    #[test]
    fn config_validation_names_field() {
        let mut c = DrgConfig::new(8, 2.0, 0.001, 0);
        c.n = 7;
        assert!(c.validate().unwrap_err().to_string().contains("n = 7"));
    }
}
