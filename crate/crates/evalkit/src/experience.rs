//! User-experience metrics: CSAT, NPS, engagement depth, cumulative utility.

use serde::{Deserialize, Serialize};

use crate::datamodel::{EvaluationDataset, MetricValue, Theme};

/// Utility assigned to an interaction's completed-task count.
///
/// Every kind is monotone non-decreasing with `u(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UtilityFunction {
    #[default]
    Identity,
    Log1p,
    Capped(f64),
}

impl UtilityFunction {
    pub fn apply(&self, completed_tasks: usize) -> f64 {
        let t = completed_tasks as f64;
        match self {
            UtilityFunction::Identity => t,
            UtilityFunction::Log1p => t.ln_1p(),
            UtilityFunction::Capped(cap) => t.min(*cap),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            UtilityFunction::Capped(cap) if !(cap.is_finite() && *cap > 0.0) => {
                Err(format!("capped utility needs a positive cap, got {cap}"))
            }
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            UtilityFunction::Identity => "identity".to_owned(),
            UtilityFunction::Log1p => "log1p".to_owned(),
            UtilityFunction::Capped(cap) => format!("capped({cap})"),
        }
    }
}

/// Raw-scale and normalized CSAT.
#[derive(Debug, Clone)]
pub struct CsatMetrics {
    /// Mean score on the survey's own scale. Null (with a note) when the
    /// dataset mixes 1-5 and 1-10 scales, since a raw mean across scales is
    /// meaningless.
    pub raw: MetricValue,
    /// Mean of (score - 1) / (scale_max - 1), always comparable.
    pub normalized: MetricValue,
}

/// Mean satisfaction score over surveyed conversations.
pub fn csat(dataset: &EvaluationDataset) -> CsatMetrics {
    let mut scores: Vec<(u32, u32)> = Vec::new();
    let mut missing = 0usize;
    for conv in dataset.conversations() {
        match conv.survey.as_ref().and_then(|s| Some((s.csat_score?, s.csat_scale_max?))) {
            Some(pair) => scores.push(pair),
            None => missing += 1,
        }
    }

    if scores.is_empty() {
        return CsatMetrics {
            raw: MetricValue::absent(Theme::Experience, "csat", "points", missing),
            normalized: MetricValue::absent(Theme::Experience, "csat_normalized", "fraction", missing),
        };
    }

    let n = scores.len();
    let normalized_mean = scores
        .iter()
        .map(|(score, scale)| (*score as f64 - 1.0) / (*scale as f64 - 1.0))
        .sum::<f64>()
        / n as f64;
    let normalized = MetricValue::present(
        Theme::Experience,
        "csat_normalized",
        "fraction",
        normalized_mean,
        n,
        missing,
    );

    let first_scale = scores[0].1;
    let raw = if scores.iter().all(|(_, scale)| *scale == first_scale) {
        let mean = scores.iter().map(|(s, _)| *s as f64).sum::<f64>() / n as f64;
        MetricValue::present(Theme::Experience, "csat", "points", mean, n, missing)
            .with_note(format!("scale 1-{first_scale}"))
    } else {
        MetricValue::absent(Theme::Experience, "csat", "points", missing)
            .with_note("mixed scales; see csat_normalized")
    };

    CsatMetrics { raw, normalized }
}

/// Net promoter score: percent of promoters (9-10) minus percent of
/// detractors (0-6); passives (7-8) count only in the denominator.
pub fn nps(dataset: &EvaluationDataset) -> MetricValue {
    let mut promoters = 0usize;
    let mut detractors = 0usize;
    let mut respondents = 0usize;
    let mut missing = 0usize;
    for conv in dataset.conversations() {
        match conv.survey.as_ref().and_then(|s| s.nps_rating) {
            Some(rating) => {
                respondents += 1;
                if rating >= 9 {
                    promoters += 1;
                } else if rating <= 6 {
                    detractors += 1;
                }
            }
            None => missing += 1,
        }
    }
    if respondents == 0 {
        return MetricValue::absent(Theme::Experience, "nps", "points", missing);
    }
    let value = 100.0 * (promoters as f64 - detractors as f64) / respondents as f64;
    MetricValue::present(Theme::Experience, "nps", "points", value, respondents, missing)
}

/// Mean number of turns (both speakers) per conversation.
pub fn engagement_depth(dataset: &EvaluationDataset) -> MetricValue {
    let n = dataset.conversations().len();
    let total_turns: usize = dataset.conversations().iter().map(|c| c.turns.len()).sum();
    MetricValue::present(
        Theme::Experience,
        "engagement_depth",
        "turns",
        total_turns as f64 / n as f64,
        n,
        0,
    )
    .with_note("excessive depth can signal inefficiency; read alongside task_completion_rate")
}

/// Cumulative utility and its per-interaction mean.
#[derive(Debug, Clone)]
pub struct UtilityMetrics {
    /// Sum of u(completed tasks) over all conversations.
    pub total: MetricValue,
    pub per_interaction_mean: MetricValue,
}

/// Total utility users derived across all logged interactions, where the
/// utility of one interaction is `u(number of completed tasks)`.
pub fn cumulative_utility(dataset: &EvaluationDataset, u: UtilityFunction) -> UtilityMetrics {
    let n = dataset.conversations().len();
    let total: f64 = dataset
        .conversations()
        .iter()
        .map(|conv| u.apply(conv.tasks.iter().filter(|t| t.completed).count()))
        .sum();
    let note = format!("utility function: {}", u.describe());
    UtilityMetrics {
        total: MetricValue::present(Theme::Experience, "cumulative_utility", "utils", total, n, 0)
            .with_note(note),
        per_interaction_mean: MetricValue::present(
            Theme::Experience,
            "mean_utility_per_interaction",
            "utils",
            total / n as f64,
            n,
            0,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{ConversationRecord, SurveyResponse, TaskRecord};
    use std::collections::BTreeMap;

    fn conv(id: &str, survey: Option<SurveyResponse>, completed_tasks: usize) -> ConversationRecord {
        let tasks = (0..completed_tasks)
            .map(|i| TaskRecord {
                task_id: format!("{id}-t{i}"),
                initiated: true,
                completed: true,
            })
            .collect();
        ConversationRecord {
            conversation_id: id.to_owned(),
            turns: vec![],
            tasks,
            decisions: vec![],
            automated: true,
            compliant: None,
            survey,
            group: None,
        }
    }

    fn survey(csat: Option<(u32, u32)>, nps: Option<u8>) -> SurveyResponse {
        SurveyResponse {
            csat_score: csat.map(|(s, _)| s),
            csat_scale_max: csat.map(|(_, m)| m),
            nps_rating: nps,
        }
    }

    fn dataset(convs: Vec<ConversationRecord>) -> EvaluationDataset {
        EvaluationDataset::new(convs, None, BTreeMap::new()).unwrap()
    }

    #[test]
    fn csat_mean_and_normalized() {
        let ds = dataset(vec![
            conv("a", Some(survey(Some((4, 5)), None)), 0),
            conv("b", Some(survey(Some((5, 5)), None)), 0),
            conv("c", Some(survey(Some((3, 5)), None)), 0),
        ]);
        let m = csat(&ds);
        assert_eq!(m.raw.value, Some(4.0));
        let expected = (0.75 + 1.0 + 0.5) / 3.0;
        assert!((m.normalized.value.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn csat_single_perfect_score() {
        let ds = dataset(vec![conv("a", Some(survey(Some((5, 5)), None)), 0)]);
        let m = csat(&ds);
        assert_eq!(m.raw.value, Some(5.0));
        assert_eq!(m.normalized.value, Some(1.0));
    }

    #[test]
    fn csat_mixed_scales_nulls_raw_keeps_normalized() {
        let ds = dataset(vec![
            conv("a", Some(survey(Some((5, 5)), None)), 0),
            conv("b", Some(survey(Some((10, 10)), None)), 0),
        ]);
        let m = csat(&ds);
        assert_eq!(m.raw.value, None);
        assert!(m.raw.note.as_deref().unwrap().contains("mixed scales"));
        assert_eq!(m.normalized.value, Some(1.0));
    }

    #[test]
    fn csat_null_without_surveys() {
        let ds = dataset(vec![conv("a", None, 0)]);
        let m = csat(&ds);
        assert_eq!(m.raw.value, None);
        assert_eq!(m.raw.missing_count, 1);
    }

    #[test]
    fn nps_formula_substitution() {
        // 6 promoters, 2 passives, 2 detractors -> 40.
        let mut convs = Vec::new();
        for i in 0..6 {
            convs.push(conv(&format!("p{i}"), Some(survey(None, Some(10))), 0));
        }
        for i in 0..2 {
            convs.push(conv(&format!("m{i}"), Some(survey(None, Some(7))), 0));
        }
        for i in 0..2 {
            convs.push(conv(&format!("d{i}"), Some(survey(None, Some(3))), 0));
        }
        let m = nps(&dataset(convs));
        assert_eq!(m.value, Some(40.0));
        assert_eq!(m.sample_count, 10);
    }

    #[test]
    fn nps_extremes() {
        let all_ten = dataset(vec![
            conv("a", Some(survey(None, Some(10))), 0),
            conv("b", Some(survey(None, Some(10))), 0),
        ]);
        assert_eq!(nps(&all_ten).value, Some(100.0));
        let all_zero = dataset(vec![
            conv("a", Some(survey(None, Some(0))), 0),
            conv("b", Some(survey(None, Some(0))), 0),
        ]);
        assert_eq!(nps(&all_zero).value, Some(-100.0));
    }

    #[test]
    fn engagement_depth_mean_turns() {
        use crate::datamodel::{Speaker, Turn};
        let with_turns = |id: &str, n: usize| {
            let mut c = conv(id, None, 0);
            c.turns = (0..n)
                .map(|i| Turn {
                    index: i as u64,
                    speaker: if i % 2 == 0 { Speaker::User } else { Speaker::Bot },
                    text: String::new(),
                    timestamp_ms: i as i64,
                    predicted_intent: None,
                    gold_intent: None,
                    context_dist: None,
                    response_latency_ms: None,
                    response_embedding: None,
                    reference_text: None,
                    reference_embedding: None,
                })
                .collect();
            c
        };
        let ds = dataset(vec![with_turns("a", 4), with_turns("b", 6)]);
        assert_eq!(engagement_depth(&ds).value, Some(5.0));
        let ds = dataset(vec![with_turns("a", 1)]);
        assert_eq!(engagement_depth(&ds).value, Some(1.0));
    }

    #[test]
    fn cumulative_utility_identity() {
        let ds = dataset(vec![conv("a", None, 2), conv("b", None, 3)]);
        let m = cumulative_utility(&ds, UtilityFunction::Identity);
        assert_eq!(m.total.value, Some(5.0));
        assert_eq!(m.per_interaction_mean.value, Some(2.5));
    }

    #[test]
    fn cumulative_utility_zero_tasks_is_zero_for_all_kinds() {
        let ds = dataset(vec![conv("a", None, 0), conv("b", None, 0)]);
        for u in [
            UtilityFunction::Identity,
            UtilityFunction::Log1p,
            UtilityFunction::Capped(2.0),
        ] {
            assert_eq!(cumulative_utility(&ds, u).total.value, Some(0.0));
        }
    }

    #[test]
    fn cumulative_utility_log1p_oracle() {
        // Evaluate u term by term: ln(1+1) + ln(1+3).
        let ds = dataset(vec![conv("a", None, 1), conv("b", None, 3)]);
        let m = cumulative_utility(&ds, UtilityFunction::Log1p);
        let expected = 2.0_f64.ln() + 4.0_f64.ln();
        assert!((m.total.value.unwrap() - expected).abs() < 1e-12);
        assert!((expected - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn utility_kinds_are_monotone_with_zero_at_zero() {
        for u in [
            UtilityFunction::Identity,
            UtilityFunction::Log1p,
            UtilityFunction::Capped(3.5),
        ] {
            assert_eq!(u.apply(0), 0.0);
            let mut prev = 0.0;
            for t in 1..20 {
                let cur = u.apply(t);
                assert!(cur >= prev, "{u:?} not monotone at {t}");
                prev = cur;
            }
        }
    }
}
