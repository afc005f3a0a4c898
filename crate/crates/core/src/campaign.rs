//! Monte Carlo campaigns over the full pipeline: generator election, rounds,
//! digits, distillation, reconciliation, and the opponent suite.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::adversary::{table_minimizer, BayesPosterior, Observation, Strategy};
use crate::bernoulli::draw_scaled;
use crate::bits::BitVector;
use crate::dist::{Dist, Sampler};
use crate::drg::{DrgConfig, DrgGenerator, DrgMode};
use crate::error::{Error, Result};
use crate::irpa::{irpa_simplified, IrpaConfig};
use crate::law::{TableStats, TripleCache};
use crate::protocol::{
    band_mass, default_gamma_t, dispersion_bound, distill_decode, distill_encode, majority_decode, project_band, reweight_band,
    run_round_with, sample_digit, BlockChoices, Decode, Disperser, Keyed, SessionConfig, Situation, Transcript,
};
use crate::rng::{par_map, Stream};
use crate::seeds::SeedLibrary;

pub const SUITE: [&str; 7] = ["mean-match", "counting", "table", "pair-averaged", "zero-knowledge", "bayes-full", "colluding"];

/// Strategies that see public data only.
pub fn is_public(name: &str) -> bool {
    !matches!(name, "bayes-full" | "colluding")
}

pub const ROUND_RETRIES: usize = 16;
pub const REELECT_DRAWS: usize = 64;
pub const ELECT_ATTEMPTS: usize = 32;
/// One-sided 99% normal quantile.
pub const Z99: f64 = 2.326_347_874;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub n: usize,
    pub k: f64,
    pub alpha: f64,
    pub l: usize,
    pub gauge: f64,
    pub gamma: Option<f64>,
    pub t: Option<f64>,
    /// Distillation blocks.
    pub trials: usize,
    pub seed: u64,
    /// Distributions elected per party and role.
    pub pool: usize,
    pub drg_sequences: usize,
    pub drg_steps: Option<u64>,
    pub c_prime: f64,
    pub max_support: usize,
    pub strategies: Vec<String>,
    pub irpa: bool,
    pub irpa_margin: usize,
    pub attacker_seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            n: 8,
            k: 2.0,
            alpha: 0.001,
            l: 16,
            gauge: 1.0,
            gamma: Some(0.25),
            t: Some(0.125),
            trials: 200,
            seed: 0,
            pool: 4,
            drg_sequences: 2,
            drg_steps: None,
            c_prime: 1.0,
            max_support: 256,
            strategies: SUITE.iter().map(|s| s.to_string()).collect(),
            irpa: true,
            irpa_margin: 16,
            attacker_seed: 0,
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CampaignConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn session(&self) -> SessionConfig {
        let (g, t) = default_gamma_t(self.n, self.k);
        SessionConfig {
            alpha: self.alpha,
            n: self.n,
            k: self.k,
            l: self.l,
            gauge: self.gauge,
            gamma: self.gamma.unwrap_or(g),
            t: self.t.unwrap_or(t),
            trials: self.trials,
            seed: self.seed,
        }
    }

    pub fn drg(&self, party: u64) -> DrgConfig {
        let mut d = DrgConfig::new(self.n, self.k, self.alpha, Stream::new(self.seed).derive("drg", party).seed());
        d.sequences = self.drg_sequences;
        d.maturity_steps = self.drg_steps;
        d.c_prime = self.c_prime;
        d.max_support = self.max_support;
        d.mode = DrgMode::Combined;
        d
    }

    pub fn validate(&self) -> Result<()> {
        self.session().validate()?;
        self.drg(0).validate()?;
        if self.pool == 0 {
            return Err(Error::Config("pool = 0: must be >= 1".into()));
        }
        for s in &self.strategies {
            if !SUITE.contains(&s.as_str()) {
                return Err(Error::Config(format!("strategies: unknown strategy {s:?}")));
            }
        }
        Ok(())
    }
}

/// Elected distributions of both parties plus the public seed library.
pub struct Pools {
    pub phi_a: Vec<Keyed>,
    pub psi_a: Vec<Disperser>,
    pub phi_b: Vec<Keyed>,
    pub psi_b: Vec<Disperser>,
    pub library: SeedLibrary,
}

fn party_pool(cfg: &CampaignConfig, party: u64) -> Result<(Vec<Keyed>, Vec<Disperser>)> {
    let mut g = DrgGenerator::new(cfg.drg(party))?;
    g.run_to_maturity()?;
    let mut rng = Stream::new(cfg.seed).derive("pool", party);
    let mut phis = Vec::new();
    let mut psis = Vec::new();
    for _ in 0..cfg.pool {
        phis.push(Keyed::new(elect_stepping(&mut g)?, &mut rng)?);
        psis.push(Disperser::new(elect_stepping(&mut g)?, cfg.k, &mut rng)?);
    }
    Ok((phis, psis))
}

/// Elects, advancing the generator one step after each attempt.
fn elect_stepping(g: &mut DrgGenerator) -> Result<Dist> {
    let mut last = None;
    for _ in 0..ELECT_ATTEMPTS {
        let r = g.elect();
        g.step()?;
        match r {
            Ok(d) => return Ok(d),
            Err(e @ Error::NotInZeta { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Consistency("no election attempted".into())))
}

impl Pools {
    pub fn build(cfg: &CampaignConfig) -> Result<Self> {
        let (phi_a, psi_a) = party_pool(cfg, 0)?;
        let (phi_b, psi_b) = party_pool(cfg, 1)?;
        let library = SeedLibrary::standard(cfg.n, cfg.alpha, &mut Stream::new(cfg.seed).derive("library", 0))?;
        Ok(Pools { phi_a, psi_a, phi_b, psi_b, library })
    }
}

/// Table minimizer against the uniform mixture of the public seed library.
pub fn library_table(library: &SeedLibrary, k: f64) -> Result<Strategy> {
    let members: Vec<&Dist> = library.entries.iter().map(|e| &e.dist).collect();
    let parts: Vec<(f64, &Dist)> = members.iter().map(|d| (1.0, *d)).collect();
    let mix = Dist::mixture(&parts)?;
    let stats = TableStats::of_pair(&mix, &mix, k, &mut TripleCache::new())?;
    Ok(Strategy::Table(table_minimizer(&stats)))
}

/// Public strategies by name; `table` needs the library table.
pub fn public_strategy(name: &str, n: usize, k: f64, table: Option<&Strategy>) -> Result<Strategy> {
    Ok(match name {
        "mean-match" => Strategy::MeanMatch { n, k },
        "counting" => Strategy::Counting { n, k },
        "pair-averaged" => Strategy::PairAveraged(Box::new(Strategy::MeanMatch { n, k })),
        "table" => table.cloned().ok_or_else(|| Error::Config("table strategy needs a fitted table".into()))?,
        other => return Err(Error::Config(format!("strategy {other:?} is not a public table or formula strategy"))),
    })
}

/// E[sigma_Phi(x) | i] . sigma_Phi'(j) / n with Phi, Phi' and their tidying known.
pub fn bayes_full(phi: &Keyed, phi2: &Keyed, k: f64) -> Strategy {
    let (d, s1, s2) = (phi.dist.clone(), phi.sigma.clone(), phi2.sigma.clone());
    let f = move |obs: &Observation| -> f64 {
        let n = d.n();
        match BayesPosterior::posterior_mean(&d, obs.i, k) {
            None => 0.0,
            Some((m, _)) => {
                let mx = s1.apply_slice(&m);
                let jj = s2.apply(obs.j).expect("dimension");
                jj.support().iter().map(|&s| mx[s]).sum::<f64>() / n as f64
            }
        }
    };
    Strategy::Custom { name: "bayes-full".into(), invariant: false, f: Arc::new(f) }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DispersionLog {
    pub reelected: u64,
    pub reweighted: u64,
    /// Psi had no mass in the band; points were projected into it.
    #[serde(default)]
    pub projected: u64,
    pub redrawn: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub block: usize,
    pub aborted: bool,
    pub situation: Situation,
    pub kept: bool,
    pub e_a: bool,
    pub e_b: Option<bool>,
    pub digit_errors_ab: usize,
    /// Per suite member: (e_xi, digit disagreements with A).
    pub xi: Vec<(bool, usize)>,
    pub dispersion: DispersionLog,
}

enum PsiPick<'a> {
    Pool(&'a Disperser),
    Derived(Arc<Disperser>),
}

impl PsiPick<'_> {
    fn get(&self) -> &Disperser {
        match self {
            PsiPick::Pool(d) => d,
            PsiPick::Derived(d) => d,
        }
    }
}

/// (party, pool index, |i|): reweighted or projected Psi.
type DerivedKey = (u64, usize, usize);

/// Derived dispersers are built from their key alone, so the cache content
/// does not depend on block order.
fn derived(ctx: &Context, key: DerivedKey, pool: &[Disperser], project: bool) -> Result<Arc<Disperser>> {
    if let Some(d) = ctx.derived.lock().expect("cache lock").get(&key) {
        return Ok(d.clone());
    }
    let (party, c, weight) = key;
    let psi = &pool[c].psi;
    let d = if project { project_band(psi, weight, ctx.cfg.k)? } else { reweight_band(psi, weight, ctx.cfg.k)? };
    let mut rng = Stream::new(ctx.cfg.seed).derive("derived-psi", (party << 40) ^ ((c as u64) << 20) ^ weight as u64);
    let d = Arc::new(Disperser::new(d, ctx.cfg.k, &mut rng)?);
    Ok(ctx.derived.lock().expect("cache lock").entry(key).or_insert(d).clone())
}

fn pick_psi<'a>(
    ctx: &'a Context,
    party: u64,
    first: usize,
    weight: usize,
    log: &mut DispersionLog,
    rng: &mut Stream,
) -> Result<PsiPick<'a>> {
    let pool: &'a [Disperser] = if party == 0 { &ctx.pools.psi_a } else { &ctx.pools.psi_b };
    let k = ctx.cfg.k;
    let n = pool[first].psi.n();
    let bound = dispersion_bound(n);
    if band_mass(&pool[first].psi, weight, k) >= bound {
        return Ok(PsiPick::Pool(&pool[first]));
    }
    for _ in 0..REELECT_DRAWS {
        let c = rng.below(pool.len());
        if band_mass(&pool[c].psi, weight, k) >= bound {
            log.reelected += 1;
            return Ok(PsiPick::Pool(&pool[c]));
        }
    }
    let best = (0..pool.len())
        .map(|c| (c, band_mass(&pool[c].psi, weight, k)))
        .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
    if best.1 > 0.0 {
        log.reweighted += 1;
        return Ok(PsiPick::Derived(derived(ctx, (party, best.0, weight), pool, false)?));
    }
    log.projected += 1;
    Ok(PsiPick::Derived(derived(ctx, (party, first, weight), pool, true)?))
}

/// JSON-lines records: header, round and block kinds, each split into public and private parts.
pub fn round_record(block: usize, round: usize, t: &Transcript, digits: (bool, bool)) -> Value {
    json!({
        "kind": "round",
        "public": {"block": block, "round": round, "i": t.public.i, "j": t.public.j,
                   "pair_a": t.public.pair_a, "pair_b": t.public.pair_b},
        "private": {"x": t.private.x, "y": t.private.y, "b": t.private.b, "b2": t.private.b2,
                    "sigma_a": t.private.sigma_a, "sigma_b": t.private.sigma_b,
                    "situation": t.private.situation, "v_a": t.private.v_a, "v_b": t.private.v_b,
                    "digit_a": digits.0, "digit_b": digits.1},
    })
}

pub struct Context<'a> {
    pub cfg: &'a CampaignConfig,
    pub session: SessionConfig,
    pub pools: &'a Pools,
    pub table: Option<Strategy>,
    derived: Mutex<HashMap<DerivedKey, Arc<Disperser>>>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a CampaignConfig, pools: &'a Pools, table: Option<Strategy>) -> Self {
        Context { cfg, session: cfg.session(), pools, table, derived: Mutex::new(HashMap::new()) }
    }
}

fn suite_names(cfg: &CampaignConfig) -> Vec<String> {
    cfg.strategies.clone()
}

/// One distillation block of L rounds.
pub fn simulate_block(ctx: &Context, block: usize, mut records: Option<&mut Vec<Value>>) -> Result<BlockOutcome> {
    let cfg = ctx.cfg;
    let s = &ctx.session;
    let p = ctx.pools;
    let mut rng = Stream::new(cfg.seed).derive("block", block as u64);
    let mut zk = Stream::new(cfg.attacker_seed).derive("zero-knowledge", block as u64);
    let (ia, ib) = (rng.below(p.phi_a.len()), rng.below(p.phi_b.len()));
    let (pa, pb) = (rng.below(p.psi_a.len()), rng.below(p.psi_b.len()));
    let (phi, phi2) = (&p.phi_a[ia], &p.phi_b[ib]);
    let choices = BlockChoices::random(&mut rng);
    let origin = rng.uniform() * s.cell();
    let names = suite_names(cfg);
    let mut strategies: Vec<Option<Strategy>> = Vec::new();
    for name in &names {
        strategies.push(match name.as_str() {
            "zero-knowledge" | "colluding" => None,
            "bayes-full" => Some(bayes_full(phi, phi2, cfg.k)),
            other => Some(public_strategy(other, cfg.n, cfg.k, ctx.table.as_ref())?),
        });
    }
    let (sx, sy) = (Sampler::new(&phi.dist), Sampler::new(&phi2.dist));
    let mut log = DispersionLog::default();
    let mut da = Vec::with_capacity(s.l);
    let mut db = Vec::with_capacity(s.l);
    let mut dxi: Vec<Vec<bool>> = vec![Vec::with_capacity(s.l); names.len()];
    let mut aborted = false;
    'rounds: for round in 0..s.l {
        let mut attempt = 0;
        let t = loop {
            let x = sx.sample(&mut rng).clone();
            let y = sy.sample(&mut rng).clone();
            let i = draw_scaled(&x, cfg.k, &mut rng);
            let j = draw_scaled(&y, cfg.k, &mut rng);
            let picked = pick_psi(ctx, 0, pa, i.weight(), &mut log, &mut rng)
                .and_then(|a| pick_psi(ctx, 1, pb, j.weight(), &mut log, &mut rng).map(|b| (a, b)));
            match picked {
                Ok((a, b)) => break run_round_with(s, phi, phi2, x, y, i, j, a.get(), b.get(), choices)?,
                Err(Error::DispersionConstraint { .. }) if attempt + 1 < ROUND_RETRIES => {
                    attempt += 1;
                    log.redrawn += 1;
                }
                Err(Error::DispersionConstraint { .. }) => {
                    aborted = true;
                    break 'rounds;
                }
                Err(e) => return Err(e),
            }
        };
        let ea = sample_digit(t.private.v_a, s, origin);
        let eb = sample_digit(t.private.v_b, s, origin);
        da.push(ea);
        db.push(eb);
        let obs = Observation { i: &t.public.i, j: &t.public.j, pairs: Some((&t.public.pair_a, &t.public.pair_b)) };
        for (u, name) in names.iter().enumerate() {
            let d = match (name.as_str(), &strategies[u]) {
                ("zero-knowledge", _) => zk.bit(),
                ("colluding", _) => eb,
                (_, Some(st)) => sample_digit(st.evaluate(&obs), s, origin),
                _ => unreachable!("strategy built above"),
            };
            dxi[u].push(d);
        }
        if let Some(r) = records.as_deref_mut() {
            r.push(round_record(block, round, &t, (ea, eb)));
        }
    }
    let situation = choices.situation();
    let e_a = rng.bit();
    if aborted {
        if let Some(r) = records.as_deref_mut() {
            r.push(json!({"kind": "block", "public": {"block": block, "origin": origin, "aborted": true, "discarded": true},
                          "private": {"e_a": e_a, "situation": situation}}));
        }
        return Ok(BlockOutcome {
            block,
            aborted,
            situation,
            kept: false,
            e_a,
            e_b: None,
            digit_errors_ab: 0,
            xi: vec![(false, 0); names.len()],
            dispersion: log,
        });
    }
    let (sa, sb) = (BitVector::from_bools(&da), BitVector::from_bools(&db));
    let published = distill_encode(&sa, e_a, s.gamma, &mut rng)?;
    let dec = distill_decode(&sb, &published, s.t)?;
    let digit_errors_ab = sa.xor(&sb).weight();
    let mut xi = Vec::new();
    for d in &dxi {
        let sx = BitVector::from_bools(d);
        xi.push((majority_decode(&sx, &published)?, sa.xor(&sx).weight()));
    }
    if let Some(r) = records.as_deref_mut() {
        r.push(json!({"kind": "block",
                      "public": {"block": block, "origin": origin, "aborted": false, "codeword": published,
                                 "discarded": dec == Decode::Discard},
                      "private": {"e_a": e_a, "e_b": dec.bit(), "situation": situation,
                                  "stream_a": sa, "stream_b": sb}}));
    }
    Ok(BlockOutcome {
        block,
        aborted,
        situation,
        kept: dec != Decode::Discard,
        e_a,
        e_b: dec.bit(),
        digit_errors_ab,
        xi,
        dispersion: log,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub std_err: f64,
    pub count: u64,
}

impl Rate {
    pub fn of(hits: u64, count: u64) -> Rate {
        if count == 0 {
            return Rate { value: f64::NAN, std_err: f64::NAN, count };
        }
        let p = hits as f64 / count as f64;
        Rate { value: p, std_err: (p * (1.0 - p) / count as f64).sqrt(), count }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SituationStats {
    pub situation: Situation,
    pub blocks: u64,
    pub kept: u64,
    pub error_ab: Rate,
    pub error_axi: Rate,
    pub digit_error_ab: Rate,
    pub digit_error_axi: Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub eps: f64,
    pub eps_prime: f64,
    pub reliability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub strategy: String,
    pub public: bool,
    /// 2 min(p, 1 - p), p = P(e_A != e_B | kept).
    pub eps: f64,
    /// 2 |P(e_A = e_xi | kept) - 1/2|.
    pub eps_prime: f64,
    pub reliability: f64,
    pub discard_rate: f64,
    pub error_ab: Rate,
    pub error_axi: Rate,
    /// P(e_A != e_xi | kept) - P(e_A != e_B | kept), paired over kept blocks.
    pub advantage: f64,
    pub advantage_se: f64,
    pub per_situation: Vec<SituationStats>,
    pub confidence: Confidence,
}

impl StatsReport {
    /// Lower one-sided 99% bound on the advantage is positive.
    pub fn advantage_significant(&self) -> bool {
        self.advantage - Z99 * self.advantage_se > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrpaSummary {
    pub input_bits: usize,
    pub leaked: usize,
    pub output_bits: usize,
    pub equal: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config_echo: CampaignConfig,
    pub blocks: u64,
    pub kept: u64,
    pub aborted: u64,
    pub discard_rate: Rate,
    pub situation_freq: [f64; 4],
    pub dispersion: DispersionLog,
    pub reports: Vec<StatsReport>,
    pub irpa: Option<IrpaSummary>,
}

pub fn stats(cfg: &CampaignConfig, outcomes: &[BlockOutcome]) -> (Vec<StatsReport>, Rate) {
    let total = outcomes.len() as u64;
    let kept: Vec<&BlockOutcome> = outcomes.iter().filter(|o| o.kept).collect();
    let nk = kept.len() as u64;
    let discard = Rate::of(total - nk, total);
    let err_ab = kept.iter().filter(|o| o.e_b != Some(o.e_a)).count() as u64;
    let l = cfg.l as u64;
    let mut reports = Vec::new();
    for (u, name) in cfg.strategies.iter().enumerate() {
        let err_axi = kept.iter().filter(|o| o.xi[u].0 != o.e_a).count() as u64;
        let p = Rate::of(err_ab, nk);
        let q = Rate::of(err_axi, nk);
        let agree = 1.0 - q.value;
        let eps = 2.0 * p.value.min(1.0 - p.value);
        let eps_prime = 2.0 * (agree - 0.5).abs();
        let diffs: Vec<f64> = kept
            .iter()
            .map(|o| ((o.xi[u].0 != o.e_a) as i32 - (o.e_b != Some(o.e_a)) as i32) as f64)
            .collect();
        let (adv, adv_se) = mean_se(&diffs);
        let mut per = Vec::new();
        for sit in [Situation::S0, Situation::S1, Situation::S2, Situation::S3] {
            let inside: Vec<&BlockOutcome> = outcomes.iter().filter(|o| o.situation == sit && !o.aborted).collect();
            let ks: Vec<&&BlockOutcome> = inside.iter().filter(|o| o.kept).collect();
            let rounds = inside.len() as u64 * l;
            per.push(SituationStats {
                situation: sit,
                blocks: inside.len() as u64,
                kept: ks.len() as u64,
                error_ab: Rate::of(ks.iter().filter(|o| o.e_b != Some(o.e_a)).count() as u64, ks.len() as u64),
                error_axi: Rate::of(ks.iter().filter(|o| o.xi[u].0 != o.e_a).count() as u64, ks.len() as u64),
                digit_error_ab: Rate::of(inside.iter().map(|o| o.digit_errors_ab as u64).sum(), rounds),
                digit_error_axi: Rate::of(inside.iter().map(|o| o.xi[u].1 as u64).sum(), rounds),
            });
        }
        reports.push(StatsReport {
            strategy: name.clone(),
            public: is_public(name),
            eps,
            eps_prime,
            reliability: 1.0 - eps - eps_prime,
            discard_rate: discard.value,
            error_ab: p,
            error_axi: q,
            advantage: adv,
            advantage_se: adv_se,
            per_situation: per,
            confidence: Confidence { eps: 2.0 * p.std_err, eps_prime: 2.0 * q.std_err, reliability: 2.0 * (p.std_err + q.std_err) },
        });
    }
    (reports, discard)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub struct CampaignRun {
    pub report: CampaignReport,
    pub outcomes: Vec<BlockOutcome>,
    /// Transcript lines when requested.
    pub records: Option<Vec<Value>>,
}

pub fn header_record(cfg: &CampaignConfig) -> Value {
    let s = cfg.session();
    json!({"kind": "header",
           "public": {"n": s.n, "k": s.k, "l": s.l, "gauge": s.gauge, "gamma": s.gamma, "t": s.t, "trials": s.trials},
           "private": {"config": cfg}})
}

/// Runs the campaign; blocks are independent and may run on several workers.
pub fn monte_carlo(cfg: &CampaignConfig, transcript: bool) -> Result<CampaignRun> {
    cfg.validate()?;
    let pools = Pools::build(cfg)?;
    let table = if cfg.strategies.iter().any(|s| s == "table") { Some(library_table(&pools.library, cfg.k)?) } else { None };
    let ctx = Context::new(cfg, &pools, table);
    let results: Vec<Result<(BlockOutcome, Vec<Value>)>> = par_map(cfg.trials, |b| {
        let mut recs = Vec::new();
        let o = simulate_block(&ctx, b, if transcript { Some(&mut recs) } else { None })?;
        Ok((o, recs))
    });
    let mut outcomes = Vec::with_capacity(cfg.trials);
    let mut records = if transcript { Some(vec![header_record(cfg)]) } else { None };
    for r in results {
        let (o, recs) = r?;
        if let Some(all) = records.as_mut() {
            all.extend(recs);
        }
        outcomes.push(o);
    }
    let (reports, discard) = stats(cfg, &outcomes);
    let mut freq = [0.0; 4];
    let mut disp = DispersionLog::default();
    for o in &outcomes {
        freq[o.situation.index()] += 1.0 / outcomes.len() as f64;
        disp.reelected += o.dispersion.reelected;
        disp.reweighted += o.dispersion.reweighted;
        disp.projected += o.dispersion.projected;
        disp.redrawn += o.dispersion.redrawn;
    }
    let irpa = if cfg.irpa {
        let kept: Vec<&BlockOutcome> = outcomes.iter().filter(|o| o.kept).collect();
        let ka: Vec<bool> = kept.iter().map(|o| o.e_a).collect();
        let kb: Vec<bool> = kept.iter().map(|o| o.e_b.unwrap_or(false)).collect();
        let icfg = IrpaConfig { margin: cfg.irpa_margin, ..IrpaConfig::default() };
        let mut rng = Stream::new(cfg.seed).derive("irpa", 0);
        Some(match irpa_simplified(&ka, &kb, &icfg, &mut rng) {
            Ok(out) => IrpaSummary {
                input_bits: ka.len(),
                leaked: out.leaked,
                output_bits: out.final_a.len(),
                equal: out.final_a == out.final_b,
                failure: None,
            },
            Err(e) => IrpaSummary { input_bits: ka.len(), leaked: 0, output_bits: 0, equal: false, failure: Some(e.to_string()) },
        })
    } else {
        None
    };
    let report = CampaignReport {
        config_echo: cfg.clone(),
        blocks: outcomes.len() as u64,
        kept: outcomes.iter().filter(|o| o.kept).count() as u64,
        aborted: outcomes.iter().filter(|o| o.aborted).count() as u64,
        discard_rate: discard,
        situation_freq: freq,
        dispersion: disp,
        reports,
        irpa,
    };
    Ok(CampaignRun { report, outcomes, records })
}

pub fn report_csv(r: &CampaignReport) -> String {
    let mut out = String::from("strategy,public,eps,eps_prime,reliability,discard_rate,error_ab,error_ab_se,error_axi,error_axi_se,advantage,advantage_se\n");
    for s in &r.reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            s.strategy,
            s.public,
            s.eps,
            s.eps_prime,
            s.reliability,
            s.discard_rate,
            s.error_ab.value,
            s.error_ab.std_err,
            s.error_axi.value,
            s.error_axi.std_err,
            s.advantage,
            s.advantage_se
        ));
    }
    out
}

/// Keeps only the kind tag and the public part of a record.
pub fn public_projection(v: &Value) -> Value {
    json!({"kind": v["kind"], "public": v["public"]})
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub strategy: String,
    pub blocks: u64,
    pub kept: u64,
    /// Opponent decoding of each kept block.
    pub guesses: Vec<(usize, bool)>,
    pub error_axi: Option<Rate>,
    pub eps_prime: Option<f64>,
}

fn field<T: serde::de::DeserializeOwned>(v: &Value, path: &[&str]) -> Result<T> {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    serde_json::from_value(cur.clone()).map_err(|e| Error::Parse { line: 0, msg: format!("{}: {e}", path.join(".")) })
}

/// Evaluates a public strategy on a transcript's public records; with the
/// full log as key, scores the guesses against e_A.
pub fn replay(lines: &[Value], key: Option<&[Value]>, strategy: &str, table: Option<&Strategy>, attacker_seed: u64) -> Result<AttackReport> {
    let header = lines.iter().find(|v| v["kind"] == "header").ok_or_else(|| Error::Parse { line: 0, msg: "missing header".into() })?;
    let n: usize = field(header, &["public", "n"])?;
    let k: f64 = field(header, &["public", "k"])?;
    let gauge: f64 = field(header, &["public", "gauge"])?;
    let cell = gauge / (n as f64 * k).sqrt();
    let st = if strategy == "zero-knowledge" { None } else { Some(public_strategy(strategy, n, k, table)?) };
    let mut digits: std::collections::BTreeMap<usize, Vec<bool>> = Default::default();
    let mut rounds: std::collections::BTreeMap<usize, Vec<&Value>> = Default::default();
    for v in lines.iter().filter(|v| v["kind"] == "round") {
        rounds.entry(field(v, &["public", "block"])?).or_default().push(v);
    }
    let mut guesses = Vec::new();
    let mut blocks = 0;
    for v in lines.iter().filter(|v| v["kind"] == "block") {
        blocks += 1;
        let b: usize = field(v, &["public", "block"])?;
        if field::<bool>(v, &["public", "aborted"])? || field::<bool>(v, &["public", "discarded"])? {
            continue;
        }
        let origin: f64 = field(v, &["public", "origin"])?;
        let codeword: BitVector = field(v, &["public", "codeword"])?;
        let mut zk = Stream::new(attacker_seed).derive("zero-knowledge", b as u64);
        let d = digits.entry(b).or_default();
        for r in rounds.get(&b).map(|r| r.as_slice()).unwrap_or(&[]) {
            let i: BitVector = field(r, &["public", "i"])?;
            let j: BitVector = field(r, &["public", "j"])?;
            let pa: [crate::perm::Permutation; 2] = field(r, &["public", "pair_a"])?;
            let pb: [crate::perm::Permutation; 2] = field(r, &["public", "pair_b"])?;
            d.push(match &st {
                None => zk.bit(),
                Some(s) => crate::protocol::digit_in_cells(
                    s.evaluate(&Observation { i: &i, j: &j, pairs: Some((&pa, &pb)) }) + origin,
                    cell,
                ),
            });
        }
        guesses.push((b, majority_decode(&BitVector::from_bools(d), &codeword)?));
    }
    let (error_axi, eps_prime) = match key {
        None => (None, None),
        Some(key) => {
            let mut e_a = std::collections::BTreeMap::new();
            for v in key.iter().filter(|v| v["kind"] == "block") {
                let b: usize = field(v, &["public", "block"])?;
                let e: bool = field(v, &["private", "e_a"])?;
                e_a.insert(b, e);
            }
            let mut wrong = 0;
            for (b, g) in &guesses {
                let e = e_a.get(b).ok_or_else(|| Error::Parse { line: 0, msg: format!("key has no block {b}") })?;
                wrong += (g != e) as u64;
            }
            let rate = Rate::of(wrong, guesses.len() as u64);
            (Some(rate), Some(2.0 * ((1.0 - rate.value) - 0.5).abs()))
        }
    };
    Ok(AttackReport { strategy: strategy.to_string(), blocks, kept: guesses.len() as u64, guesses, error_axi, eps_prime })
}
