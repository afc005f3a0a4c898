use deep_random::drg::*;
use deep_random::lab::zeta_member;
use deep_random::quad::SearchMode;
use deep_random::rng::Stream;
use deep_random::Error;

fn config(seed: u64) -> DrgConfig {
    let mut c = DrgConfig::new(8, 2.0, 0.001, seed);
    c.sequences = 2;
    c.maturity_steps = Some(30);
    c
}

#[test]
fn resume_equals_uninterrupted_run() {
    let mut a = DrgGenerator::new(config(1)).unwrap();
    let full = a.run(30).unwrap();

    let mut b = DrgGenerator::new(config(1)).unwrap();
    let first = b.run(12).unwrap();
    let text = serde_json::to_string(&b.checkpoint()).unwrap();
    drop(b);
    let cp: Checkpoint = serde_json::from_str(&text).unwrap();
    let mut c = DrgGenerator::restore(cp).unwrap();
    let rest = c.run(18).unwrap();

    let joined: Vec<_> = first.into_iter().chain(rest).collect();
    assert_eq!(joined, full);
    assert_eq!(a.elect().unwrap(), c.elect().unwrap());
}

#[test]
fn election_needs_maturity() {
    let mut g = DrgGenerator::new(config(2)).unwrap();
    g.run(5).unwrap();
    assert!(!g.is_mature());
    assert!(matches!(g.elect(), Err(Error::NotMature { .. })));
    g.run_to_maturity().unwrap();
    assert!(g.is_mature());
}

#[test]
fn elected_distributions_are_members() {
    let mut g = DrgGenerator::new(config(3)).unwrap();
    g.run_to_maturity().unwrap();
    let mut rng = Stream::new(0);
    let mut elected = 0;
    for _ in 0..4 {
        match g.elect() {
            Ok(d) => {
                assert!(zeta_member(&d, 0.001, SearchMode::Auto, &mut rng).unwrap());
                elected += 1;
            }
            Err(Error::NotInZeta { .. }) => {}
            Err(e) => panic!("{e}"),
        }
        g.step().unwrap();
    }
    assert!(elected > 0);
}

#[test]
fn checkpoint_rejects_other_versions() {
    let g = DrgGenerator::new(config(4)).unwrap();
    let mut cp = g.checkpoint();
    cp.version = 9;
    assert!(matches!(DrgGenerator::restore(cp), Err(Error::Checkpoint(_))));
}

#[test]
fn step_counter_is_unbounded() {
    let g = DrgGenerator::new(config(5)).unwrap();
    let mut cp = g.checkpoint();
    cp.sequences[0].step = "123456789012345678901234567890".parse().unwrap();
    let text = serde_json::to_string(&cp).unwrap();
    assert!(text.contains("\"123456789012345678901234567890\""));
    let back: Checkpoint = serde_json::from_str(&text).unwrap();
    assert_eq!(back.sequences[0].step, cp.sequences[0].step);
}

#[test]
fn maturity_grows_like_dim_log_dim() {
    for dim in [10u64, 100, 1000, 100_000] {
        let m = maturity(dim, 1.0) as f64;
        assert!(m / m.ln() >= dim as f64);
        assert!((m - 1.0) / (m - 1.0).ln() < dim as f64);
    }
}
