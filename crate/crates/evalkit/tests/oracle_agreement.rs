//! Cross-checks of the optimized metric implementations against the
//! independent brute-force oracles.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use convo_evalkit::cognitive::{self, BleuConfig, Smoothing};
use convo_evalkit::datamodel::Distribution;
use convo_evalkit::governance;
use convo_evalkit_oracles as oracles;

fn random_raw_dist(rng: &mut ChaCha8Rng, max_support: usize) -> BTreeMap<String, f64> {
    let support = rng.random_range(1..=max_support);
    let mut labels: Vec<usize> = (0..max_support).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels.truncate(support);
    let weights: Vec<f64> = (0..support).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    labels
        .into_iter()
        .zip(weights)
        .map(|(l, w)| (format!("l{l}"), w / total))
        .collect()
}

#[test]
fn kl_matches_naive_oracle_on_1000_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b4c);
    for case in 0..1000 {
        let p_raw = random_raw_dist(&mut rng, 10);
        let q_raw = random_raw_dist(&mut rng, 10);
        let p = Distribution::new(p_raw.clone()).unwrap();
        let q = Distribution::new(q_raw.clone()).unwrap();
        let fast = cognitive::kl_divergence(&p, &q, 1e-9);
        let slow = oracles::kl_naive(&p_raw, &q_raw, 1e-9);
        assert!(
            (fast - slow).abs() <= 1e-12,
            "case {case}: {fast} vs oracle {slow}"
        );
        assert!(fast >= 0.0, "case {case}: Gibbs violated: {fast}");
    }
}

#[test]
fn kl_self_divergence_stays_below_1e9() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5050);
    for _ in 0..500 {
        let raw = random_raw_dist(&mut rng, 10);
        let p = Distribution::new(raw).unwrap();
        let d = cognitive::kl_divergence(&p, &p, 1e-9);
        assert!(d.abs() <= 1e-9, "KL(P||P) = {d}");
    }
}

#[test]
fn context_retention_mean_matches_naive_oracle_per_pair() {
    let ds = convo_evalkit::ingest::synthesize_fixture(
        0xc0de,
        10,
        &convo_evalkit::ingest::SynthProfile::default(),
    )
    .unwrap();
    let mut oracle_values = Vec::new();
    for conv in ds.conversations() {
        for pair in conv.turns.windows(2) {
            if let (Some(prev), Some(cur)) = (&pair[0].context_dist, &pair[1].context_dist) {
                oracle_values.push(oracles::kl_naive(prev.entries(), cur.entries(), 1e-9));
            }
        }
    }
    let oracle_mean = oracle_values.iter().sum::<f64>() / oracle_values.len() as f64;
    let oracle_max = oracle_values.iter().cloned().fold(f64::MIN, f64::max);
    let cr = cognitive::context_retention(&ds, 1e-9);
    assert!((cr.mean.value.unwrap() - oracle_mean).abs() <= 1e-12);
    assert!((cr.max.value.unwrap() - oracle_max).abs() <= 1e-12);
    assert_eq!(cr.mean.sample_count, oracle_values.len());
}

fn random_tokens(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> Vec<String> {
    let len = rng.random_range(min_len..=max_len);
    (0..len).map(|_| format!("t{}", rng.random_range(0..10))).collect()
}

#[test]
fn bleu_matches_naive_oracle_on_1000_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb1e0);
    for case in 0..1000 {
        let candidate = random_tokens(&mut rng, 0, 20);
        let reference = random_tokens(&mut rng, 1, 20);
        let max_n = rng.random_range(1..=4);
        let weights: Vec<f64> = {
            let raw: Vec<f64> = (0..max_n).map(|_| rng.random::<f64>() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        };
        let smoothing = if case % 2 == 0 {
            Smoothing::None
        } else {
            Smoothing::AddEpsilon(1e-9)
        };
        let config = BleuConfig { max_n, weights: weights.clone(), smoothing };
        let fast = cognitive::bleu(&candidate, &reference, &config).unwrap();
        let eps = match smoothing {
            Smoothing::None => None,
            Smoothing::AddEpsilon(e) => Some(e),
        };
        let slow = oracles::bleu_naive(&candidate, &reference, max_n, &weights, eps).unwrap();
        assert!(
            (fast - slow).abs() <= 1e-12,
            "case {case}: {fast} vs oracle {slow} (max_n {max_n}, smoothing {smoothing:?})"
        );
        assert!((0.0..=1.0).contains(&fast), "case {case}: out of range {fast}");
    }
}

fn random_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()
}

#[test]
fn w1_matches_bruteforce_on_500_equal_size_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a11);
    for case in 0..500 {
        let n = rng.random_range(1..=6);
        let a = random_samples(&mut rng, n);
        let b = random_samples(&mut rng, n);
        let fast = governance::fairness_parity(&a, &b).unwrap();
        let slow = oracles::w1_bruteforce(&a, &b).unwrap();
        assert!(
            (fast - slow).abs() <= 1e-9,
            "case {case}: {fast} vs oracle {slow} for {a:?} vs {b:?}"
        );
    }
}

#[test]
fn w1_metric_axioms_on_200_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a57);
    for case in 0..200 {
        let (na, nb, nc) = (
            rng.random_range(1..=6),
            rng.random_range(1..=6),
            rng.random_range(1..=6),
        );
        let a = random_samples(&mut rng, na);
        let b = random_samples(&mut rng, nb);
        let c = random_samples(&mut rng, nc);
        let ab = governance::fairness_parity(&a, &b).unwrap();
        let ba = governance::fairness_parity(&b, &a).unwrap();
        let bc = governance::fairness_parity(&b, &c).unwrap();
        let ac = governance::fairness_parity(&a, &c).unwrap();
        assert!(ab >= 0.0, "case {case}: negative distance");
        assert_eq!(ab, ba, "case {case}: symmetry must be exact");
        assert!(
            ac <= ab + bc + 1e-9,
            "case {case}: triangle violated: {ac} > {ab} + {bc}"
        );

        // Translation and scaling invariance.
        let shift = rng.random_range(-5.0..5.0);
        let scale = rng.random_range(-3.0..3.0);
        let translated_a: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let translated_b: Vec<f64> = b.iter().map(|x| x + shift).collect();
        let w_translated = governance::fairness_parity(&translated_a, &translated_b).unwrap();
        assert!(
            (w_translated - ab).abs() <= 1e-9,
            "case {case}: translation invariance violated"
        );
        let scaled_a: Vec<f64> = a.iter().map(|x| x * scale).collect();
        let scaled_b: Vec<f64> = b.iter().map(|x| x * scale).collect();
        let w_scaled = governance::fairness_parity(&scaled_a, &scaled_b).unwrap();
        assert!(
            (w_scaled - scale.abs() * ab).abs() <= 1e-9 * 1.0_f64.max(scale.abs()),
            "case {case}: scaling invariance violated"
        );
    }
}

#[test]
fn equal_size_closed_form_agrees_with_quantile_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe4a1);
    for _ in 0..300 {
        let n = rng.random_range(1..=12);
        let a = random_samples(&mut rng, n);
        let b = random_samples(&mut rng, n);
        let closed = governance::fairness_parity(&a, &b).unwrap();
        let integral = governance::quantile_integral_w1(&a, &b).unwrap();
        assert!((closed - integral).abs() <= 1e-12, "{closed} vs {integral}");
    }
}
