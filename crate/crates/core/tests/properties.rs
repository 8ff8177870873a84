use microstates::matrices::{MatrixTuple, RngStream};
use microstates::moments::{free_semicircular_family_moment, noncrossing_pairings};
use microstates::oracle;
use microstates::words::{enumerate_words, StarLetter, StarMonomial};
use microstates::zones::{complement_within_ball, intersect, product, union, Zone};
use proptest::prelude::*;

fn word_strategy(n: usize, max_len: usize) -> impl Strategy<Value = StarMonomial> {
    prop::collection::vec((1..=n, any::<bool>()), 1..=max_len).prop_map(|ls| {
        StarMonomial::new(ls.into_iter().map(|(i, s)| StarLetter::new(i, s)).collect())
    })
}

fn case(seed: u64, n: usize) -> (Zone, MatrixTuple) {
    let mut rng = RngStream::new(seed).rng();
    let z = Zone::new(n, oracle::random_descriptor(&mut rng, n, 3)).unwrap();
    let xi = oracle::random_probe_tuple(&mut rng, n, 3);
    (z, xi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zones_nest_in_degree_and_tolerance(seed in any::<u64>(), n in 1usize..=2, m in 1usize..=3, extra in 0usize..=2,
                                          gamma in 0.02f64..0.6, shrink in 0.1f64..=1.0) {
        let (z, xi) = case(seed, n);
        if z.contains(m + extra, gamma * shrink, &xi).unwrap() {
            prop_assert!(z.contains(m, gamma, &xi).unwrap());
        }
    }

    #[test]
    fn adjoint_is_an_involution(w in word_strategy(3, 6)) {
        prop_assert_eq!(w.adjoint().adjoint(), w.clone());
        prop_assert_eq!(w.adjoint().degree(), w.degree());
    }

    #[test]
    fn words_roundtrip_through_text(w in word_strategy(3, 6)) {
        let back: StarMonomial = w.to_string().parse().unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn union_and_intersection_obey_de_morgan(seed in any::<u64>(), m in 1usize..=3, gamma in 0.05f64..0.5) {
        let mut rng = RngStream::new(seed).rng();
        let a = Zone::new(1, oracle::random_descriptor(&mut rng, 1, 2)).unwrap();
        let b = Zone::new(1, oracle::random_descriptor(&mut rng, 1, 2)).unwrap();
        let xi = oracle::random_probe_tuple(&mut rng, 1, 3);
        let r = 2.0;
        let in_a = a.contains(m, gamma, &xi).unwrap();
        let in_b = b.contains(m, gamma, &xi).unwrap();
        prop_assert_eq!(union(&a, &b).unwrap().contains(m, gamma, &xi).unwrap(), in_a || in_b);
        prop_assert_eq!(intersect(&a, &b).unwrap().contains(m, gamma, &xi).unwrap(), in_a && in_b);
        // Ball ∖ (A ∪ B) = (Ball ∖ A) ∩ (Ball ∖ B) with the complements frozen at (m, γ).
        let lhs = complement_within_ball(&union(&a, &b).unwrap(), r, m, gamma).unwrap();
        let rhs = intersect(
            &complement_within_ball(&a, r, m, gamma).unwrap(),
            &complement_within_ball(&b, r, m, gamma).unwrap(),
        ).unwrap();
        prop_assert_eq!(lhs.contains(m, gamma, &xi).unwrap(), rhs.contains(m, gamma, &xi).unwrap());
    }

    #[test]
    fn product_membership_splits(seed in any::<u64>(), m in 1usize..=3, gamma in 0.05f64..0.5) {
        let mut rng = RngStream::new(seed).rng();
        let a = Zone::new(1, oracle::random_descriptor(&mut rng, 1, 2)).unwrap();
        let b = Zone::new(2, oracle::random_descriptor(&mut rng, 2, 2)).unwrap();
        let xa = oracle::random_probe_tuple(&mut rng, 1, 3);
        let xb = oracle::random_probe_tuple(&mut rng, 2, 3);
        let joint = MatrixTuple::concat(&[xa.clone(), xb.clone()]).unwrap();
        prop_assert_eq!(
            product(&a, &b).unwrap().contains(m, gamma, &joint).unwrap(),
            a.contains(m, gamma, &xa).unwrap() && b.contains(m, gamma, &xb).unwrap()
        );
    }

    #[test]
    fn free_moments_count_pairings(labels in prop::collection::vec(1usize..=3, 1..=8)) {
        let w = StarMonomial::new(labels.iter().map(|&i| StarLetter::new(i, false)).collect());
        let brute = oracle::brute_force_noncrossing_pairings(&labels);
        prop_assert_eq!(noncrossing_pairings(&labels), u128::from(brute));
        let scaled = free_semicircular_family_moment(&w, 3).unwrap() * 4f64.powi((labels.len() / 2) as i32);
        prop_assert_eq!(scaled, brute as f64);
    }
}

#[test]
fn enumeration_is_prefix_stable() {
    for n in 1..=3 {
        for d in 1..4 {
            let short = enumerate_words(n, d).unwrap();
            let long = enumerate_words(n, d + 1).unwrap();
            assert!(long.starts_with(&short), "n={n} d={d}");
        }
    }
}
