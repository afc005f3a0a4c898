use deep_random::campaign::*;
use serde_json::Value;

fn small(seed: u64, trials: usize) -> CampaignConfig {
    CampaignConfig { seed, trials, pool: 2, drg_steps: Some(40), ..CampaignConfig::default() }
}

fn report<'a>(r: &'a CampaignReport, name: &str) -> &'a StatsReport {
    r.reports.iter().find(|s| s.strategy == name).unwrap()
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small(3, 60);
    let a = serde_json::to_string(&monte_carlo(&cfg, false).unwrap().report).unwrap();
    let b = serde_json::to_string(&monte_carlo(&cfg, false).unwrap().report).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&monte_carlo(&small(4, 60), false).unwrap().report).unwrap();
    assert_ne!(a, c);
}

#[test]
fn rate_algebra_and_controls() {
    let run = monte_carlo(&small(5, 400), false).unwrap();
    let r = &run.report;
    assert!(r.kept > 0);
    for s in &r.reports {
        assert!((s.reliability - (1.0 - s.eps - s.eps_prime)).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&s.eps) && (0.0..=1.0).contains(&s.eps_prime));
    }
    // zero knowledge: e_xi independent of e_A
    let zk = report(r, "zero-knowledge");
    let p = zk.error_axi.value;
    assert!((p - 0.5).abs() <= 2.576 * 0.5 / (zk.error_axi.count as f64).sqrt(), "{p}");
    // colluding copies B's digits, so e_xi = e_B on kept blocks
    let col = report(r, "colluding");
    assert_eq!(col.error_axi.value, col.error_ab.value);
    assert!((col.eps_prime - (1.0 - col.eps)).abs() < 1e-12);
}

#[test]
fn replay_matches_in_process_evaluation() {
    let cfg = small(6, 80);
    let run = monte_carlo(&cfg, true).unwrap();
    let full = run.records.unwrap();
    let public: Vec<Value> = full.iter().map(public_projection).collect();
    for v in &public {
        assert!(v.get("private").is_none() || v["private"].is_null());
    }
    let pools = Pools::build(&cfg).unwrap();
    let table = library_table(&pools.library, cfg.k).unwrap();
    for name in ["mean-match", "counting", "table", "pair-averaged", "zero-knowledge"] {
        let rep = replay(&public, Some(&full), name, Some(&table), cfg.attacker_seed).unwrap();
        let inproc = report(&run.report, name);
        assert_eq!(rep.kept, run.report.kept);
        assert_eq!(rep.error_axi.unwrap().value, inproc.error_axi.value, "{name}");
        assert_eq!(rep.eps_prime.unwrap(), inproc.eps_prime, "{name}");
    }
}

#[test]
fn private_strategies_cannot_replay() {
    let cfg = small(7, 10);
    let run = monte_carlo(&cfg, true).unwrap();
    let public: Vec<Value> = run.records.unwrap().iter().map(public_projection).collect();
    assert!(replay(&public, None, "bayes-full", None, 0).is_err());
    assert!(replay(&public, None, "colluding", None, 0).is_err());
}

#[test]
fn config_rejects_unknown_keys_and_names_fields() {
    let e = CampaignConfig::from_toml("n = 8\nbogus = 1\n").unwrap_err().to_string();
    assert!(e.contains("bogus"), "{e}");
    let e = CampaignConfig::from_toml("n = 7\n").unwrap_err().to_string();
    assert!(e.contains('n'), "{e}");
    let e = CampaignConfig::from_toml("strategies = [\"oracle\"]\n").unwrap_err().to_string();
    assert!(e.contains("strategies"), "{e}");
    let c = CampaignConfig::from_toml("n = 8\ntrials = 5\n").unwrap();
    assert_eq!(c.trials, 5);
}

#[test]
fn csv_has_one_row_per_strategy() {
    let run = monte_carlo(&small(8, 20), false).unwrap();
    let csv = report_csv(&run.report);
    assert_eq!(csv.lines().count(), 1 + SUITE.len());
}
