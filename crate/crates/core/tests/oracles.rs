use std::f64::consts::PI;

use microstates::entropy::log_volume_opball_exact;
use microstates::matrices::{op_norm, sample_gue, MatrixTuple, RngStream};
use microstates::moments::{noncrossing_pairings, semicircle_moment};
use microstates::oracle;
use microstates::words::{enumerate_words, evaluate, trace_moment};

fn gue_pair(seed: u64, k: usize) -> MatrixTuple {
    let mut rng = RngStream::new(seed).rng();
    let mats = (0..2).map(|_| sample_gue(k, 0.3, &mut rng).unwrap()).collect();
    MatrixTuple::new(mats, true).unwrap()
}

#[test]
fn word_products_match_entrywise_products() {
    let xi = gue_pair(11, 5);
    for w in enumerate_words(2, 3).unwrap() {
        let fast = evaluate(&w, &xi).unwrap();
        let slow = oracle::naive_word(&xi, &w);
        assert!((fast - slow).norm() < 1e-12, "{w}");
    }
}

#[test]
fn traces_match_diagonal_sums() {
    let xi = gue_pair(12, 6);
    for w in enumerate_words(2, 4).unwrap() {
        let fast = trace_moment(&w, &xi).unwrap();
        let slow = oracle::entry_sum_trace(&oracle::naive_word(&xi, &w));
        assert!((fast - slow).norm() < 1e-12, "{w}");
    }
}

#[test]
fn operator_norm_matches_power_iteration() {
    let mut rng = RngStream::new(13).rng();
    for k in [1, 3, 9] {
        let a = sample_gue(k, 1.0, &mut rng).unwrap();
        let b = sample_gue(k, 1.0, &mut rng).unwrap();
        let c = &a * &b;
        let exact = op_norm(&c);
        let approx = oracle::power_iteration_norm(&c, 10_000);
        assert!((exact - approx).abs() <= 1e-8 * exact.max(1.0), "k={k}: {exact} vs {approx}");
    }
}

#[test]
fn semicircle_moments_match_quadrature() {
    for p in 0..=12 {
        let q = oracle::semicircle_moment_quadrature(p);
        assert!((semicircle_moment(p) - q).abs() < 1e-10, "p={p}");
    }
}

#[test]
fn pairing_counts_match_brute_force() {
    let labels_list: [&[usize]; 5] = [&[1; 8], &[1, 2, 2, 1, 3, 3], &[1, 2, 1, 2], &[1, 1, 2, 2, 1, 1], &[3, 1, 1, 3, 2, 2, 2, 2]];
    for labels in labels_list {
        assert_eq!(
            noncrossing_pairings(labels),
            u128::from(oracle::brute_force_noncrossing_pairings(labels)),
            "{labels:?}"
        );
    }
}

#[test]
fn two_by_two_ball_volume_by_rejection() {
    let mut rng = RngStream::new(14).rng();
    let (vol, se) = oracle::rejection_volume_k2(1_000_000, &mut rng);
    assert!((vol - 4.0 * PI / 3.0).abs() < 4.0 * se);
    assert!((log_volume_opball_exact(2) - (4.0 * PI / 3.0).ln()).abs() < 1e-12);
}
