use deep_random::bernoulli::{beta, chi, pi};
use deep_random::bits::{BitVector, ParamVector};
use deep_random::dist::Dist;
use deep_random::law::{triple_law, KeyLaw, TableStats, TripleCache};
use deep_random::perm::Permutation;
use deep_random::protocol::{code_weights, digit_in_cells, distill_decode, distill_encode};
use deep_random::quad::{c_norm, QuadMatrix, SearchMode};
use deep_random::rng::Stream;
use proptest::prelude::*;

fn param(n: usize) -> impl Strategy<Value = ParamVector> {
    prop::collection::vec(0.0..=1.0f64, n).prop_map(|v| ParamVector::new(v).unwrap())
}

fn perm(n: usize) -> impl Strategy<Value = Permutation> {
    any::<u64>().prop_map(move |s| Permutation::random(n, &mut Stream::new(s)))
}

fn dist(n: usize) -> impl Strategy<Value = Dist> {
    prop::collection::vec((0..1u64 << n, 0.01..1.0f64), 1..6)
        .prop_map(move |v| Dist::from_weighted(n, v.into_iter().map(|(m, w)| (BitVector::from_mask(n, m), w))).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chi_is_a_law(x in param(7)) {
        let s: f64 = (0..128u64).map(|m| chi(&BitVector::from_mask(7, m), &x).unwrap()).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pi_is_inclusion_sum(x in param(6), j in 0..64u64) {
        let j = BitVector::from_mask(6, j);
        let s: f64 = (0..64u64)
            .map(|m| BitVector::from_mask(6, m))
            .filter(|i| j.is_subset_of(i))
            .map(|i| chi(&i, &x).unwrap())
            .sum();
        prop_assert!((s - pi(&j, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn beta_is_a_probability(l in 0u64..60, r in 0u64..80, theta in 0.0..=1.0f64) {
        let b = beta(l, r, theta).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
    }

    #[test]
    fn permutation_group_laws(p in perm(9), q in perm(9), m in 0..512u64) {
        let x = BitVector::from_mask(9, m);
        let id = p.compose(&p.inverse()).unwrap();
        prop_assert_eq!(id, Permutation::identity(9));
        let pq = p.compose(&q).unwrap();
        let lhs = pq.apply(&x).unwrap();
        let rhs = p.apply(&q.apply(&x).unwrap()).unwrap();
        let alt = q.apply(&p.apply(&x).unwrap()).unwrap();
        prop_assert!(lhs == rhs || lhs == alt);
        prop_assert_eq!(p.apply(&x).unwrap().weight(), x.weight());
    }

    #[test]
    fn mixing_keeps_unit_mass(a in dist(6), b in dist(6), t in 0.0..=1.0f64) {
        let m = a.mix(&b, t).unwrap();
        let total: f64 = m.points().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip(a in dist(10)) {
        let back = Dist::from_text(&a.to_text()).unwrap();
        prop_assert_eq!(back.support_size(), a.support_size());
        for ((x, w), (y, v)) in back.points().iter().zip(a.points()) {
            prop_assert_eq!(x, y);
            prop_assert!((w - v).abs() < 1e-15);
        }
    }

    #[test]
    fn c_norm_is_homogeneous(seed in any::<u64>(), c in -3.0..3.0f64) {
        let mut rng = Stream::new(seed);
        let mut m = QuadMatrix::zeros(6);
        for u in 0..6 {
            for v in u + 1..6 {
                m.set_sym(u, v, rng.uniform() - 0.5);
            }
        }
        let a = c_norm(&m, SearchMode::Exact, &mut rng).unwrap().value;
        let b = c_norm(&m.scale(c), SearchMode::Exact, &mut rng).unwrap().value;
        prop_assert!((b - c.abs() * a).abs() < 1e-12);
    }

    #[test]
    fn triple_law_has_unit_mass(a in 0u32..20, b in 0u32..20, c in 0u32..20, k in 1.0..16.0f64) {
        let c = c.min(a).min(b);
        let total: f64 = triple_law((a, b, c), k, 0.0).iter().map(|e| e.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_stats_grouped_agree(a in dist(8), b in dist(8), k in 1.5..6.0f64) {
        let keys = KeyLaw::of_pair(&a, &b).unwrap();
        let x = TableStats::from_keys(&keys, k, &mut TripleCache::new());
        let y = TableStats::from_keys_grouped(&keys, k);
        prop_assert!((x.min_payoff() - y.min_payoff()).abs() < 1e-12);
    }

    #[test]
    fn distillation_round_trip(seed in any::<u64>(), e in any::<bool>(), l in 8usize..64) {
        let mut rng = Stream::new(seed);
        let stream = BitVector::random(l, 0.5, &mut rng);
        prop_assume!(code_weights(l, 0.3).is_ok());
        let published = distill_encode(&stream, e, 0.3, &mut rng).unwrap();
        prop_assert_eq!(distill_decode(&stream, &published, 0.1).unwrap().bit(), Some(e));
    }

    #[test]
    fn digits_alternate_by_cell(v in 0.0..1.0f64, cell in 0.01..0.5f64) {
        prop_assert_ne!(digit_in_cells(v, cell), digit_in_cells(v + cell, cell));
        prop_assert_eq!(digit_in_cells(v, cell), digit_in_cells(v + 2.0 * cell, cell));
    }
}
