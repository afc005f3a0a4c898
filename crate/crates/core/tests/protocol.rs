use deep_random::bernoulli::draw_scaled;
use deep_random::bits::BitVector;
use deep_random::dist::Dist;
use deep_random::irpa::{irpa_simplified, output_len, IrpaConfig};
use deep_random::perm::for_each_perm;
use deep_random::protocol::*;
use deep_random::rng::Stream;

fn random_dist(n: usize, points: usize, rng: &mut Stream) -> Dist {
    let all: Vec<usize> = (0..n).collect();
    let items: Vec<(BitVector, f64)> = (0..points)
        .map(|_| {
            let w = 1 + rng.below(n - 1);
            (BitVector::random_weight_in(n, &all, w, rng), 0.1 + rng.uniform())
        })
        .collect();
    Dist::from_weighted(n, items).unwrap()
}

/// Exhaustive argmax of the likelihood over S_n, first maximizer in lexicographic order.
fn oracle_sigma_d(d: &Disperser, i: &BitVector) -> (Vec<usize>, f64) {
    let mut vals = Vec::new();
    for_each_perm(i.len(), |p| vals.push((p.map().to_vec(), d.likelihood(&p.apply(i).unwrap()))));
    let best = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    vals.into_iter().find(|v| v.1 >= best - 1e-12 * best.abs().max(1.0)).unwrap()
}

#[test]
fn sigma_d_matches_exhaustive_oracle_at_n6() {
    let mut rng = Stream::new(21);
    let n = 6;
    for case in 0..12 {
        let psi = if case < 4 { Dist::dirac(BitVector::random_weight_in(n, &(0..n).collect::<Vec<_>>(), 3, &mut rng)) } else { random_dist(n, 4, &mut rng) };
        let d = Disperser::new(psi, 2.0, &mut rng).unwrap();
        for m in 0..1u64 << n {
            let i = BitVector::from_mask(n, m);
            let got = d.sigma_d(&i).unwrap();
            let (want, best) = oracle_sigma_d(&d, &i);
            let lik = d.likelihood(&got.apply(&i).unwrap());
            assert!((lik - best).abs() <= 1e-12 * best.max(1.0), "case {case} i {i}: {lik} vs {best}");
            if case >= 4 {
                assert_eq!(got.map(), want.as_slice(), "case {case} i {i}");
            }
        }
    }
}

#[test]
fn all_zero_draw_maps_to_identity() {
    let mut rng = Stream::new(2);
    let d = Disperser::new(random_dist(8, 5, &mut rng), 2.0, &mut rng).unwrap();
    let p = d.sigma_d(&BitVector::zeros(8)).unwrap();
    assert_eq!(p.map(), (0..8).collect::<Vec<_>>().as_slice());
}

#[test]
fn code_word_weights_are_exact() {
    let mut rng = Stream::new(5);
    let (w0, w1) = code_weights(64, 0.25).unwrap();
    assert_eq!((w0, w1), (16, 48));
    let stream = BitVector::random(64, 0.5, &mut rng);
    for t in 0..10_000 {
        let e = t % 2 == 1;
        let published = distill_encode(&stream, e, 0.25, &mut rng).unwrap();
        assert_eq!(published.xor(&stream).weight(), if e { w1 } else { w0 });
    }
}

#[test]
fn extreme_gamma_gives_all_ones() {
    let mut rng = Stream::new(6);
    let stream = BitVector::random(16, 0.5, &mut rng);
    let published = distill_encode(&stream, true, 0.5, &mut rng).unwrap();
    assert_eq!(published.xor(&stream), BitVector::ones(16));
}

#[test]
fn decoding_rules() {
    let mut rng = Stream::new(8);
    let a = BitVector::random(32, 0.5, &mut rng);
    for e in [false, true] {
        let published = distill_encode(&a, e, 0.25, &mut rng).unwrap();
        assert_eq!(distill_decode(&a, &published, 0.125).unwrap().bit(), Some(e));
        assert_eq!(majority_decode(&a, &published).unwrap(), e);
    }
    let half = BitVector::from_support(32, &(0..16).collect::<Vec<_>>());
    assert_eq!(distill_decode(&half, &BitVector::zeros(32), 0.125).unwrap(), Decode::Discard);
    // ties go to 0
    assert!(!majority_decode(&half, &BitVector::zeros(32)).unwrap());
}

#[test]
fn gamma_must_exceed_t() {
    let mut cfg = SessionConfig::new(64, 4.0, 0.001, 0);
    cfg.gamma = 0.1;
    cfg.t = 0.2;
    let e = cfg.validate().unwrap_err().to_string();
    assert!(e.contains("gamma"), "{e}");
}

#[test]
fn digit_cells() {
    let cfg = SessionConfig { gauge: 8.0, ..SessionConfig::new(256, 256.0, 0.001, 0) };
    let c = cfg.cell();
    assert!(!sample_digit(0.0, &cfg, 0.0));
    assert!(sample_digit(c, &cfg, 0.0));
    assert!(!sample_digit(2.0 * c + 1e-9, &cfg, 0.0));
    assert!(sample_digit(0.0, &cfg, c * 1.5));
}

fn keyed(n: usize, rng: &mut Stream) -> (Keyed, Disperser) {
    let d = random_dist(n, 6, rng);
    (Keyed::new(d.clone(), rng).unwrap(), Disperser::new(d, 2.0, rng).unwrap())
}

#[test]
fn situations_are_uniform() {
    let mut rng = Stream::new(9);
    let mut count = [0usize; 4];
    for _ in 0..10_000 {
        count[BlockChoices::random(&mut rng).situation().index()] += 1;
    }
    for c in count {
        let f = c as f64 / 10_000.0;
        assert!((f - 0.25).abs() < 4.0 * (0.25 * 0.75 / 10_000f64).sqrt(), "{count:?}");
    }
}

#[test]
fn huge_degradation_gives_zero_values() {
    let mut rng = Stream::new(10);
    let n = 8;
    let (a, da) = keyed(n, &mut rng);
    let (b, db) = keyed(n, &mut rng);
    let mut cfg = SessionConfig::new(n, 1e6, 0.001, 0);
    cfg.gamma = 0.25;
    cfg.t = 0.125;
    for _ in 0..200 {
        let x = deep_random::dist::Sampler::new(&a.dist).sample(&mut rng).clone();
        let y = deep_random::dist::Sampler::new(&b.dist).sample(&mut rng).clone();
        let i = draw_scaled(&x, cfg.k, &mut rng);
        let j = draw_scaled(&y, cfg.k, &mut rng);
        let t = run_round_with(&cfg, &a, &b, x, y, i, j, &da, &db, BlockChoices::random(&mut rng)).unwrap();
        assert_eq!(t.private.v_a, 0.0);
        assert_eq!(t.private.v_b, 0.0);
    }
}

#[test]
fn s0_gap_is_within_bound() {
    let mut rng = Stream::new(12);
    let n = 128;
    let k = 4.0;
    let (a, da) = keyed(n, &mut rng);
    let (b, db) = keyed(n, &mut rng);
    let cfg = SessionConfig { gamma: 0.25, t: 0.125, ..SessionConfig::new(n, k, 0.001, 0) };
    let choices = BlockChoices { b: false, b2: false, pos_a: 1, pos_b: 1 };
    assert_eq!(choices.situation(), Situation::S0);
    let (mut s1, mut s2) = (0.0, 0.0);
    let trials = 4000;
    for _ in 0..trials {
        let x = deep_random::dist::Sampler::new(&a.dist).sample(&mut rng).clone();
        let y = deep_random::dist::Sampler::new(&b.dist).sample(&mut rng).clone();
        let i = draw_scaled(&x, k, &mut rng);
        let j = draw_scaled(&y, k, &mut rng);
        let t = run_round_with(&cfg, &a, &b, x, y, i, j, &da, &db, choices).unwrap();
        let g = (t.private.v_a - t.private.v_b).powi(2);
        s1 += g;
        s2 += g * g;
    }
    let m = s1 / trials as f64;
    let se = ((s2 / trials as f64 - m * m) / trials as f64).sqrt();
    assert!(m - 2.576 * se <= 2.0 / (n as f64 * k), "{m} +- {se}");
}

#[test]
fn projection_reaches_the_bound() {
    let n = 64;
    let psi = Dist::dirac(BitVector::from_support(n, &(0..32).collect::<Vec<_>>()));
    assert_eq!(band_mass(&psi, 0, 64.0), 0.0);
    let p = project_band(&psi, 0, 64.0).unwrap();
    assert!((band_mass(&p, 0, 64.0) - dispersion_bound(n)).abs() < 1e-12);
    assert!(matches!(reweight_band(&psi, 0, 64.0), Err(deep_random::Error::DispersionConstraint { .. })));
}

#[test]
fn irpa_corrects_one_percent_errors() {
    let mut rng = Stream::new(13);
    let runs = 200;
    let mut equal = 0;
    for _ in 0..runs {
        let a: Vec<bool> = (0..1024).map(|_| rng.bit()).collect();
        let b: Vec<bool> = a.iter().map(|&v| v ^ rng.bernoulli(0.01)).collect();
        let out = irpa_simplified(&a, &b, &IrpaConfig::default(), &mut rng).unwrap();
        assert_eq!(Some(out.final_a.len()), output_len(1024, out.leaked, 16));
        equal += (out.final_a == out.final_b) as usize;
    }
    assert!(equal as f64 >= 0.99 * runs as f64, "{equal} of {runs}");
}

#[test]
fn irpa_rejects_high_error_rates() {
    let mut rng = Stream::new(14);
    let a: Vec<bool> = (0..256).map(|_| rng.bit()).collect();
    let b: Vec<bool> = a.iter().map(|&v| v ^ rng.bernoulli(0.3)).collect();
    assert!(irpa_simplified(&a, &b, &IrpaConfig::default(), &mut rng).is_err());
}
