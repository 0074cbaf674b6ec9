//! Brute-force reference implementations for the convo-evalkit test suite.
//!
//! Everything here is written in the most literal way possible and shares no
//! code with the production crate (this crate has no dependencies at all).
//! The test suite checks that the optimized metric implementations agree
//! with these within tight tolerances. Not part of the shipped library API.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::HashMap;

/// Term-by-term KL divergence in nats over the epsilon-smoothed,
/// renormalized union support of `p` and `q`.
pub fn kl_naive(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>, epsilon: f64) -> f64 {
    let mut labels: BTreeSet<&String> = BTreeSet::new();
    for label in p.keys() {
        labels.insert(label);
    }
    for label in q.keys() {
        labels.insert(label);
    }

    let mut p_smoothed: Vec<f64> = Vec::new();
    let mut q_smoothed: Vec<f64> = Vec::new();
    for label in &labels {
        p_smoothed.push(p.get(*label).copied().unwrap_or(0.0) + epsilon);
        q_smoothed.push(q.get(*label).copied().unwrap_or(0.0) + epsilon);
    }
    let p_total: f64 = p_smoothed.iter().sum();
    let q_total: f64 = q_smoothed.iter().sum();

    let mut divergence = 0.0;
    for i in 0..p_smoothed.len() {
        let pi = p_smoothed[i] / p_total;
        let qi = q_smoothed[i] / q_total;
        divergence += pi * (pi / qi).ln();
    }
    divergence
}

/// Literal discrete realization of the W1 coupling infimum: the minimum over
/// all n! assignments of mean |a_i - b_sigma(i)|. Requires equal sizes with
/// n <= 7 so the factorial search stays under a second.
pub fn w1_bruteforce(a: &[f64], b: &[f64]) -> Result<f64, &'static str> {
    if a.is_empty() || b.is_empty() {
        return Err("samples must be nonempty");
    }
    if a.len() != b.len() {
        return Err("samples must have equal sizes");
    }
    if a.len() > 7 {
        return Err("factorial search capped at n = 7");
    }
    let n = a.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut indices, 0, &mut |perm| {
        let mut cost = 0.0;
        for i in 0..n {
            cost += (a[i] - b[perm[i]]).abs();
        }
        let cost = cost / n as f64;
        if cost < best {
            best = cost;
        }
    });
    Ok(best)
}

fn permute(indices: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == indices.len() {
        visit(indices);
        return;
    }
    for i in start..indices.len() {
        indices.swap(start, i);
        permute(indices, start + 1, visit);
        indices.swap(start, i);
    }
}

/// BLEU by explicit n-gram multiset maps, literal clipping, brevity penalty,
/// and the weighted log sum, with weights renormalized over the orders the
/// candidate can produce. `smoothing_epsilon` replaces zero precisions
/// before the log; `None` makes any zero precision collapse the score to 0.
pub fn bleu_naive(
    candidate: &[String],
    reference: &[String],
    max_n: usize,
    weights: &[f64],
    smoothing_epsilon: Option<f64>,
) -> Result<f64, &'static str> {
    if reference.is_empty() {
        return Err("reference must be nonempty");
    }
    if weights.len() != max_n {
        return Err("weights must have length max_n");
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }

    // Raw precision per order; None when the candidate has no such n-grams.
    let mut precisions: Vec<Option<f64>> = Vec::new();
    for n in 1..=max_n {
        if candidate.len() < n {
            precisions.push(None);
            continue;
        }
        let candidate_grams = ngram_multiset(candidate, n);
        let reference_grams = ngram_multiset(reference, n);
        let mut matched = 0u64;
        let mut total = 0u64;
        for (gram, count) in &candidate_grams {
            total += count;
            let available = reference_grams.get(gram).copied().unwrap_or(0);
            matched += if *count < available { *count } else { available };
        }
        precisions.push(Some(matched as f64 / total as f64));
    }

    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let brevity_penalty = if candidate.len() > reference.len() {
        1.0
    } else {
        (1.0 - r / c).exp()
    };

    let mut usable_weight = 0.0;
    for n in 0..max_n {
        if precisions[n].is_some() {
            usable_weight += weights[n];
        }
    }

    let mut log_sum = 0.0;
    for n in 0..max_n {
        let Some(mut p) = precisions[n] else { continue };
        if p == 0.0 {
            match smoothing_epsilon {
                Some(eps) => p = eps,
                None => return Ok(0.0),
            }
        }
        let w = if usable_weight > 0.0 {
            weights[n] / usable_weight
        } else {
            0.0
        };
        log_sum += w * p.ln();
    }
    if precisions.iter().all(Option::is_none) {
        return Ok(0.0);
    }
    Ok(brevity_penalty * log_sum.exp())
}

fn ngram_multiset(tokens: &[String], n: usize) -> HashMap<Vec<String>, u64> {
    let mut grams: HashMap<Vec<String>, u64> = HashMap::new();
    if tokens.len() < n {
        return grams;
    }
    for start in 0..=(tokens.len() - n) {
        let gram: Vec<String> = tokens[start..start + n].to_vec();
        *grams.entry(gram).or_insert(0) += 1;
    }
    grams
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn kl_naive_identical_is_zero() {
        let p = dist(&[("a", 0.5), ("b", 0.5)]);
        assert_eq!(kl_naive(&p, &p, 1e-9), 0.0);
    }

    #[test]
    fn kl_naive_point_mass_vs_uniform() {
        let p = dist(&[("a", 1.0)]);
        let q = dist(&[("a", 0.5), ("b", 0.5)]);
        // Smoothing costs ~eps*ln(1/eps) ~ 2.1e-8 of the analytic ln 2.
        assert!((kl_naive(&p, &q, 1e-9) - std::f64::consts::LN_2).abs() < 1e-7);
    }

    #[test]
    fn w1_bruteforce_identity_and_point_mass() {
        assert_eq!(w1_bruteforce(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(w1_bruteforce(&[0.0], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn w1_bruteforce_rejects_oversize_and_mismatch() {
        assert!(w1_bruteforce(&[0.0; 8], &[0.0; 8]).is_err());
        assert!(w1_bruteforce(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn bleu_naive_identity_is_one() {
        let s = words("the quick brown fox jumps");
        let score = bleu_naive(&s, &s, 4, &[0.25; 4], None).unwrap();
        assert!((score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_naive_clipped_unigram_fixture() {
        let cand = words("the the the the the the the");
        let refr = words("the cat is on the mat");
        let score = bleu_naive(&cand, &refr, 1, &[1.0], None).unwrap();
        assert!((score - 2.0 / 7.0).abs() < 1e-12);
    }
}
