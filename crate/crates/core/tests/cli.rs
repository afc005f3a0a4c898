use deep_random::cli::{run, EXIT_CHECK, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("deep-random").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["simulate", "--format", "xml"]).0, EXIT_USAGE);
    let (code, _, err) = call(&["verify", "no-such-check"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("no-such-check"));
    assert_eq!(call(&["verify"]).0, EXIT_USAGE);
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("simulate"));
}

#[test]
fn verify_exit_status_follows_result() {
    let (code, out, _) = call(&["verify", "prop1", "--n", "6"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("pass"));
    assert_eq!(call(&["verify", "prop12"]).0, EXIT_CHECK);
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, "n = 8\ngauge = -1.0\n").unwrap();
    let (code, _, err) = call(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("gauge"), "{err}");
}

#[test]
fn simulate_twice_is_byte_identical_and_attack_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "n = 8\ntrials = 30\npool = 2\ndrg_steps = 40\n").unwrap();
    let c = cfg.to_str().unwrap();
    let full = dir.path().join("full.jsonl");
    let public = dir.path().join("public.jsonl");
    let (code, a, err) = call(&["simulate", "--config", c, "--seed", "7", "--transcript", full.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (_, b, _) =
        call(&["simulate", "--config", c, "--seed", "7", "--public-only", "--transcript", public.to_str().unwrap()]);
    assert_eq!(a, b);
    assert!(!std::fs::read_to_string(&public).unwrap().contains("private"));

    let report: serde_json::Value = serde_json::from_str(&a).unwrap();
    let (code, out, err) = call(&[
        "attack",
        "--transcript",
        public.to_str().unwrap(),
        "--key",
        full.to_str().unwrap(),
        "--strategy",
        "counting",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let attack: serde_json::Value = serde_json::from_str(&out).unwrap();
    let inproc = report["reports"].as_array().unwrap().iter().find(|r| r["strategy"] == "counting").unwrap();
    assert_eq!(attack["eps_prime"], inproc["eps_prime"]);

    let (code, csv, _) = call(&["simulate", "--config", c, "--seed", "7", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    assert!(csv.starts_with("strategy,"));
}

#[test]
fn drg_checkpoint_resume_elect() {
    let dir = tempfile::tempdir().unwrap();
    let cp = dir.path().join("g.json");
    let cps = cp.to_str().unwrap();
    let (code, out, err) = call(&["drg", "run", "--steps", "5", "--maturity", "10", "--checkpoint", cps]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.lines().count(), 5);
    let (code, _, err) = call(&["drg", "elect", "--checkpoint", cps]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("not mature"), "{err}");
    assert_eq!(call(&["drg", "resume", "--checkpoint", cps, "--steps", "5"]).0, EXIT_OK);
    let (code, out, err) = call(&["drg", "elect", "--checkpoint", cps]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("n 8"));
}

#[test]
fn seeds_list_and_inspect() {
    let (code, out, _) = call(&["seeds", "list"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("phi0"));
    let (code, out, _) = call(&["seeds", "inspect", "dirac-prefix-2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("support 1"));
    assert_eq!(call(&["seeds", "inspect", "nothing"]).0, EXIT_USAGE);
}
