//! Ethics and compliance metrics: bias detection rate, compliance rate,
//! explainability score, and the Wasserstein fairness parity score.
//!
//! `bias_free`, `compliant`, and `explainable` are upstream audit
//! annotations; this module only counts them. Fairness parity is the exact
//! 1-D W1 distance between the empirical outcome distributions of two
//! demographic groups: zero means the groups' decision outcomes are
//! identically distributed.

use std::collections::BTreeMap;

use crate::datamodel::{DecisionRecord, EvaluationDataset, MetricValue, Theme};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GovernanceError {
    #[error("sample list is empty")]
    EmptySamples,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
}

/// Percent of annotated decisions marked bias-free.
pub fn bias_detection_rate(dataset: &EvaluationDataset) -> MetricValue {
    annotated_rate(dataset, "bias_detection_rate", 100.0, "percent", |d| d.bias_free)
}

/// Percent of annotated conversations marked compliant.
pub fn compliance_rate(dataset: &EvaluationDataset) -> MetricValue {
    let mut yes = 0usize;
    let mut annotated = 0usize;
    let mut missing = 0usize;
    for conv in dataset.conversations() {
        match conv.compliant {
            Some(flag) => {
                annotated += 1;
                if flag {
                    yes += 1;
                }
            }
            None => missing += 1,
        }
    }
    if annotated == 0 {
        MetricValue::absent(Theme::Governance, "compliance_rate", "percent", missing)
    } else {
        MetricValue::present(
            Theme::Governance,
            "compliance_rate",
            "percent",
            100.0 * yes as f64 / annotated as f64,
            annotated,
            missing,
        )
    }
}

/// Fraction of annotated decisions with a usable explanation.
pub fn explainability_score(dataset: &EvaluationDataset) -> MetricValue {
    annotated_rate(dataset, "explainability_score", 1.0, "fraction", |d| d.explainable)
}

fn annotated_rate(
    dataset: &EvaluationDataset,
    name: &str,
    scale: f64,
    unit: &str,
    flag: impl Fn(&DecisionRecord) -> Option<bool>,
) -> MetricValue {
    let mut yes = 0usize;
    let mut annotated = 0usize;
    let mut missing = 0usize;
    for conv in dataset.conversations() {
        for decision in &conv.decisions {
            match flag(decision) {
                Some(true) => {
                    annotated += 1;
                    yes += 1;
                }
                Some(false) => annotated += 1,
                None => missing += 1,
            }
        }
    }
    if annotated == 0 {
        MetricValue::absent(Theme::Governance, name, unit, missing)
    } else {
        MetricValue::present(
            Theme::Governance,
            name,
            unit,
            scale * yes as f64 / annotated as f64,
            annotated,
            missing,
        )
    }
}

// ---------------------------------------------------------------------------
// 1-D Wasserstein distance
// ---------------------------------------------------------------------------

/// Exact W1 distance between two empirical distributions of scalar outcomes.
///
/// Equal sample sizes use the closed form (mean absolute difference of the
/// sorted samples); unequal sizes use the piecewise-constant quantile
/// integral. Zero means the two multisets coincide: the groups' outcomes are
/// identically distributed.
pub fn fairness_parity(samples_a: &[f64], samples_b: &[f64]) -> Result<f64, GovernanceError> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(GovernanceError::EmptySamples);
    }
    if samples_a.iter().chain(samples_b).any(|x| !x.is_finite()) {
        return Err(GovernanceError::NonFiniteSample);
    }
    if samples_a.len() == samples_b.len() {
        let a = sorted(samples_a);
        let b = sorted(samples_b);
        let n = a.len() as f64;
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
    } else {
        quantile_integral_w1(samples_a, samples_b)
    }
}

/// The general quantile-integral route behind [`fairness_parity`], exposed so
/// the equal-size closed form can be cross-checked against it.
///
/// Both empirical quantile functions are piecewise constant with jumps at
/// multiples of 1/n; walking the merged jump points in units of
/// 1/(n_a * n_b) keeps every segment width exact in integer arithmetic.
pub fn quantile_integral_w1(samples_a: &[f64], samples_b: &[f64]) -> Result<f64, GovernanceError> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(GovernanceError::EmptySamples);
    }
    if samples_a.iter().chain(samples_b).any(|x| !x.is_finite()) {
        return Err(GovernanceError::NonFiniteSample);
    }
    let a = sorted(samples_a);
    let b = sorted(samples_b);
    let (n_a, n_b) = (a.len() as u64, b.len() as u64);
    let denom = n_a * n_b;

    let mut total = 0.0_f64;
    let mut t = 0u64; // position in units of 1/denom
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        // Next jump of either quantile function, in 1/denom units.
        let next_a = (i as u64 + 1) * n_b;
        let next_b = (j as u64 + 1) * n_a;
        let next = next_a.min(next_b);
        total += ((next - t) as f64) * (a[i] - b[j]).abs();
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
        t = next;
    }
    Ok(total / denom as f64)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|x, y| x.partial_cmp(y).expect("finite samples compare"));
    v
}

/// Pairwise group distances behind the fairness parity metric.
#[derive(Debug, Clone)]
pub struct FairnessMatrix {
    /// Group labels in lexicographic order.
    pub groups: Vec<String>,
    /// Distance per unordered pair, keyed (smaller label, larger label).
    pub pairs: BTreeMap<(String, String), f64>,
}

impl FairnessMatrix {
    /// Symmetric lookup with a zero diagonal.
    pub fn distance(&self, g1: &str, g2: &str) -> Option<f64> {
        if g1 == g2 {
            return self.groups.iter().any(|g| g == g1).then_some(0.0);
        }
        let key = if g1 < g2 {
            (g1.to_owned(), g2.to_owned())
        } else {
            (g2.to_owned(), g1.to_owned())
        };
        self.pairs.get(&key).copied()
    }

    /// The worst-case pair and its distance.
    pub fn max_pair(&self) -> Option<(&(String, String), f64)> {
        self.pairs
            .iter()
            .max_by(|(_, x), (_, y)| x.partial_cmp(y).expect("finite distances"))
            .map(|(k, v)| (k, *v))
    }
}

/// Fairness matrix plus the scorecard metric derived from it.
#[derive(Debug, Clone)]
pub struct FairnessAnalysis {
    /// Present when at least two groups had outcomes.
    pub matrix: Option<FairnessMatrix>,
    /// `fairness_parity`: the maximum pairwise distance (worst disparity).
    pub metric: MetricValue,
}

/// Pairwise W1 distance between decision-outcome distributions per
/// demographic group. Group labels come from the decision record, falling
/// back to the conversation's group; decisions matching neither are counted
/// as missing. `selector` filters which decisions participate.
pub fn fairness_parity_matrix(
    dataset: &EvaluationDataset,
    selector: impl Fn(&DecisionRecord) -> bool,
) -> FairnessAnalysis {
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut missing = 0usize;
    for conv in dataset.conversations() {
        for decision in &conv.decisions {
            if !selector(decision) {
                continue;
            }
            match decision.group.as_ref().or(conv.group.as_ref()) {
                Some(group) => by_group
                    .entry(group.clone())
                    .or_default()
                    .push(decision.outcome_value),
                None => missing += 1,
            }
        }
    }

    if by_group.len() < 2 {
        let metric = MetricValue::absent(Theme::Governance, "fairness_parity", "outcome", missing)
            .with_note("needs decision outcomes for at least two demographic groups");
        return FairnessAnalysis { matrix: None, metric };
    }

    let groups: Vec<String> = by_group.keys().cloned().collect();
    let mut pairs = BTreeMap::new();
    for (i, g1) in groups.iter().enumerate() {
        for g2 in &groups[i + 1..] {
            let d = fairness_parity(&by_group[g1], &by_group[g2])
                .expect("grouped outcomes are nonempty and finite");
            pairs.insert((g1.clone(), g2.clone()), d);
        }
    }
    let matrix = FairnessMatrix { groups, pairs };
    let ((g1, g2), worst) = matrix.max_pair().expect(">= 2 groups yield >= 1 pair");
    let samples: usize = by_group.values().map(Vec::len).sum();
    let metric = MetricValue::present(
        Theme::Governance,
        "fairness_parity",
        "outcome",
        worst,
        samples,
        missing,
    )
    .with_note(format!("largest disparity is between {g1} and {g2}; 0 means identical outcome distributions"));
    FairnessAnalysis {
        matrix: Some(matrix),
        metric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::ConversationRecord;
    use std::collections::BTreeMap as Map;

    #[test]
    fn w1_identical_multisets_is_zero() {
        let xs = [3.0, 1.0, 2.0, 2.0];
        let ys = [2.0, 3.0, 2.0, 1.0];
        assert_eq!(fairness_parity(&xs, &ys).unwrap(), 0.0);
    }

    #[test]
    fn w1_point_masses() {
        assert_eq!(fairness_parity(&[0.0], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn w1_rejects_empty() {
        assert!(matches!(
            fairness_parity(&[], &[1.0]),
            Err(GovernanceError::EmptySamples)
        ));
    }

    #[test]
    fn w1_unequal_sizes_hand_computed() {
        // a = {0, 1}: quantile 0 on [0, .5), 1 on [.5, 1).
        // b = {0.5}:  quantile 0.5 everywhere.
        // Integral of |difference| = 0.5 * 0.5 + 0.5 * 0.5 = 0.5.
        let d = fairness_parity(&[0.0, 1.0], &[0.5]).unwrap();
        assert_eq!(d, 0.5);
    }

    #[test]
    fn w1_duplicated_samples_preserve_distribution() {
        let a = [1.0, 4.0, 2.0];
        let doubled = [1.0, 4.0, 2.0, 1.0, 4.0, 2.0];
        assert_eq!(fairness_parity(&a, &doubled).unwrap(), 0.0);
    }

    #[test]
    fn equal_size_closed_form_matches_quantile_integral() {
        let a = [0.3, -1.2, 5.0, 2.2, 0.0];
        let b = [1.1, 0.4, -2.0, 3.3, 2.0];
        let closed = fairness_parity(&a, &b).unwrap();
        let integral = quantile_integral_w1(&a, &b).unwrap();
        assert!((closed - integral).abs() < 1e-12);
    }

    #[test]
    fn w1_symmetry_is_exact() {
        let a = [0.7, 2.0, -3.1];
        let b = [1.5, 0.0, 4.0, 2.5];
        assert_eq!(
            quantile_integral_w1(&a, &b).unwrap(),
            quantile_integral_w1(&b, &a).unwrap()
        );
    }

    fn conv(id: &str, group: Option<&str>, decisions: Vec<DecisionRecord>) -> ConversationRecord {
        ConversationRecord {
            conversation_id: id.to_owned(),
            turns: vec![],
            tasks: vec![],
            decisions,
            automated: true,
            compliant: None,
            survey: None,
            group: group.map(str::to_owned),
        }
    }

    fn decision(id: &str, outcome: f64, group: Option<&str>, bias_free: Option<bool>) -> DecisionRecord {
        DecisionRecord {
            decision_id: id.to_owned(),
            outcome_value: outcome,
            group: group.map(str::to_owned),
            bias_free,
            explainable: bias_free,
        }
    }

    #[test]
    fn bias_rate_fixtures() {
        let mut decisions: Vec<_> = (0..95)
            .map(|i| decision(&format!("d{i}"), 1.0, None, Some(true)))
            .collect();
        decisions.extend((0..5).map(|i| decision(&format!("x{i}"), 1.0, None, Some(false))));
        let ds = EvaluationDataset::new(vec![conv("c0", Some("g"), decisions)], None, Map::new()).unwrap();
        assert_eq!(bias_detection_rate(&ds).value, Some(95.0));
    }

    #[test]
    fn bias_rate_unannotated_is_null() {
        let decisions: Vec<_> = (0..50)
            .map(|i| decision(&format!("d{i}"), 1.0, None, None))
            .collect();
        let ds = EvaluationDataset::new(vec![conv("c0", Some("g"), decisions)], None, Map::new()).unwrap();
        let m = bias_detection_rate(&ds);
        assert_eq!(m.value, None);
        assert_eq!(m.missing_count, 50);
    }

    #[test]
    fn compliance_rate_fixtures() {
        let mut convs: Vec<_> = (0..3)
            .map(|i| {
                let mut c = conv(&format!("c{i}"), None, vec![]);
                c.compliant = Some(true);
                c
            })
            .collect();
        let mut bad = conv("c9", None, vec![]);
        bad.compliant = Some(false);
        convs.push(bad);
        let ds = EvaluationDataset::new(convs, None, Map::new()).unwrap();
        assert_eq!(compliance_rate(&ds).value, Some(75.0));
    }

    #[test]
    fn explainability_fixtures() {
        let decisions = vec![
            decision("d0", 1.0, None, Some(true)),
            decision("d1", 1.0, None, Some(true)),
            decision("d2", 1.0, None, Some(true)),
            decision("d3", 1.0, None, Some(false)),
        ];
        let ds = EvaluationDataset::new(vec![conv("c0", None, decisions)], None, Map::new()).unwrap();
        assert_eq!(explainability_score(&ds).value, Some(0.75));
    }

    #[test]
    fn matrix_identical_groups_is_zero() {
        let convs = vec![
            conv("c0", None, vec![
                decision("a0", 1.0, Some("g1"), None),
                decision("a1", 2.0, Some("g1"), None),
            ]),
            conv("c1", None, vec![
                decision("b0", 1.0, Some("g2"), None),
                decision("b1", 2.0, Some("g2"), None),
            ]),
        ];
        let ds = EvaluationDataset::new(convs, None, Map::new()).unwrap();
        let analysis = fairness_parity_matrix(&ds, |_| true);
        assert_eq!(analysis.metric.value, Some(0.0));
        let matrix = analysis.matrix.unwrap();
        assert_eq!(matrix.distance("g1", "g2"), Some(0.0));
        assert_eq!(matrix.distance("g1", "g1"), Some(0.0));
    }

    #[test]
    fn matrix_max_matches_direct_pairwise_maximum() {
        let convs = vec![
            conv("c0", None, vec![
                decision("a0", 0.0, Some("g1"), None),
                decision("a1", 1.0, Some("g1"), None),
            ]),
            conv("c1", None, vec![
                decision("b0", 5.0, Some("g2"), None),
                decision("b1", 6.0, Some("g2"), None),
            ]),
            conv("c2", None, vec![
                decision("c0", 2.0, Some("g3"), None),
                decision("c1", 3.0, Some("g3"), None),
            ]),
        ];
        let ds = EvaluationDataset::new(convs, None, Map::new()).unwrap();
        let analysis = fairness_parity_matrix(&ds, |_| true);
        let matrix = analysis.matrix.unwrap();
        // Recompute the pairwise max directly.
        let groups = [("g1", [0.0, 1.0]), ("g2", [5.0, 6.0]), ("g3", [2.0, 3.0])];
        let mut expect: f64 = 0.0;
        for (i, (_, a)) in groups.iter().enumerate() {
            for (_, b) in &groups[i + 1..] {
                expect = expect.max(fairness_parity(a, b).unwrap());
            }
        }
        assert_eq!(analysis.metric.value, Some(expect));
        assert_eq!(matrix.distance("g1", "g2"), matrix.distance("g2", "g1"));
    }

    #[test]
    fn matrix_falls_back_to_conversation_group() {
        let convs = vec![
            conv("c0", Some("g1"), vec![decision("a0", 1.0, None, None)]),
            conv("c1", Some("g2"), vec![decision("b0", 4.0, None, None)]),
        ];
        let ds = EvaluationDataset::new(convs, None, Map::new()).unwrap();
        let analysis = fairness_parity_matrix(&ds, |_| true);
        assert_eq!(analysis.metric.value, Some(3.0));
    }

    #[test]
    fn matrix_single_group_is_null() {
        let convs = vec![conv("c0", Some("only"), vec![decision("a0", 1.0, None, None)])];
        let ds = EvaluationDataset::new(convs, None, Map::new()).unwrap();
        let analysis = fairness_parity_matrix(&ds, |_| true);
        assert!(analysis.matrix.is_none());
        assert_eq!(analysis.metric.value, None);
    }
}
