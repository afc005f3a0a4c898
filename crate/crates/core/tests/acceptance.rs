use std::time::Instant;

use deep_random::campaign::{monte_carlo, CampaignConfig, CampaignReport, StatsReport};
use deep_random::verify::{verify, CheckResult, VerifyParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: &str, n: Option<usize>, pairs: Option<usize>) -> (bool, String) {
    let p = VerifyParams { n, pairs: pairs.unwrap_or(20), ..VerifyParams::default() };
    match verify(id, &p) {
        Ok(r) => (r.passed(), summary(&r)),
        Err(e) => (false, format!("{id}: error {e}")),
    }
}

fn summary(r: &CheckResult) -> String {
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(",");
    format!("{} {:?} measured [{}] bound [{}]", r.check_id, r.status, fmt(&r.measured), fmt(&r.bound))
}

fn all(parts: Vec<(bool, String)>) -> Outcome {
    Outcome { pass: parts.iter().all(|p| p.0), detail: parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; ") }
}

fn criterion_9() -> Outcome {
    let cfg = CampaignConfig {
        n: 256,
        k: 256.0,
        gauge: 8.0,
        l: 64,
        gamma: Some(0.25),
        t: Some(0.125),
        trials: 10_000,
        pool: 2,
        drg_steps: Some(6),
        seed: 9,
        ..CampaignConfig::default()
    };
    let r = match monte_carlo(&cfg, false) {
        Ok(run) => run.report,
        Err(e) => return Outcome { pass: false, detail: format!("campaign error {e}") },
    };
    judge_9(&r)
}

fn judge_9(r: &CampaignReport) -> Outcome {
    let mut pass = true;
    let mut detail = format!("kept {} of {} aborted {} discard {:.3}", r.kept, r.blocks, r.aborted, r.discard_rate.value);
    if r.discard_rate.value > 0.85 || r.kept == 0 {
        pass = false;
    }
    let line = |s: &StatsReport| {
        format!(
            " | {} err_ab {:.4} err_axi {:.4} adv {:.4}+-{:.4} eps' {:.3}",
            s.strategy, s.error_ab.value, s.error_axi.value, s.advantage, s.advantage_se, s.eps_prime
        )
    };
    for s in &r.reports {
        detail += &line(s);
        if s.public {
            pass &= s.error_ab.value < 0.05 && s.advantage_significant();
        } else if s.strategy == "bayes-full" {
            // negative control: full knowledge of both laws must not leave Bob ahead
            pass &= !s.advantage_significant();
        }
    }
    Outcome { pass, detail }
}

fn criterion_10() -> Outcome {
    let cfg = CampaignConfig { n: 8, trials: 200, pool: 2, drg_steps: Some(40), seed: 10, ..CampaignConfig::default() };
    let bytes = || -> Result<(String, String), deep_random::Error> {
        let run = monte_carlo(&cfg, true)?;
        let report = serde_json::to_string(&run.report).unwrap();
        let records = serde_json::to_string(&run.records).unwrap();
        Ok((report, records))
    };
    match (bytes(), bytes()) {
        (Ok(a), Ok(b)) => Outcome {
            pass: a == b,
            detail: format!("report {} bytes, transcript {} bytes, identical {}", a.0.len(), a.1.len(), a == b),
        },
        (Err(e), _) | (_, Err(e)) => Outcome { pass: false, detail: format!("campaign error {e}") },
    }
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        (
            "exact identities",
            Box::new(|| {
                all(vec![check("chi-sum", Some(14), None), check("pi-inversion", Some(14), None), check("prop1", Some(10), None)])
            }),
        ),
        ("bounds", Box::new(|| all(vec![check("prop2", None, None), check("prop3", None, None), check("ii0", Some(128), None)]))),
        ("c-norm suite", Box::new(|| all(vec![check("prop10", None, None), check("cnorm", None, None)]))),
        ("separable criteria at n=8", Box::new(|| all(vec![check("lemma1", Some(8), Some(100))]))),
        (
            "synchronization at n=8",
            Box::new(|| all(vec![check("prop9", Some(8), Some(100)), check("cor2", Some(8), None)])),
        ),
        ("parity quadrature", Box::new(|| all(vec![check("prop12", None, None)]))),
        ("bayes optimality", Box::new(|| all(vec![check("bayes", None, None)]))),
        ("diagonal sequence at n=8", Box::new(|| all(vec![check("diagonal", Some(8), None)]))),
        ("end-to-end advantage at n=256", Box::new(criterion_9)),
        ("reproducibility", Box::new(criterion_10)),
    ];
    let mut passed = 0;
    let total = criteria.len();
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Outcome { pass: false, detail: "panicked".into() });
        passed += o.pass as usize;
        println!(
            "criterion {:>2} {}: {} ({:.1}s) {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {passed}/{total} criteria pass");
}
