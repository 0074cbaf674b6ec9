//! Operational-efficiency metrics: response time, automation rate, cost per
//! interaction, and system uptime.
//!
//! Uptime is computed on millisecond integers (interval union, then
//! intersection with the expected schedule) with a single final division, so
//! long schedules accumulate no float drift.

use crate::datamodel::{EvaluationDataset, MetricValue, Theme};

/// Mean response latency plus nearest-rank percentiles.
#[derive(Debug, Clone)]
pub struct ResponseTimeMetrics {
    pub mean: MetricValue,
    pub p50: MetricValue,
    pub p95: MetricValue,
    pub p99: MetricValue,
}

/// Mean bot response latency in milliseconds, with p50/p95/p99 auxiliaries.
pub fn average_response_time(dataset: &EvaluationDataset) -> ResponseTimeMetrics {
    let mut latencies: Vec<u64> = Vec::new();
    let mut missing = 0usize;
    for conv in dataset.conversations() {
        for turn in conv.bot_turns() {
            match turn.response_latency_ms {
                Some(ms) => latencies.push(ms),
                None => missing += 1,
            }
        }
    }
    if latencies.is_empty() {
        return ResponseTimeMetrics {
            mean: MetricValue::absent(Theme::Efficiency, "average_response_time", "ms", missing),
            p50: MetricValue::absent(Theme::Efficiency, "response_time_p50", "ms", missing),
            p95: MetricValue::absent(Theme::Efficiency, "response_time_p95", "ms", missing),
            p99: MetricValue::absent(Theme::Efficiency, "response_time_p99", "ms", missing),
        };
    }
    latencies.sort_unstable();
    let n = latencies.len();
    let sum: u64 = latencies.iter().sum();
    let percentile = |percent: u64| -> MetricValue {
        let value = nearest_rank(&latencies, percent) as f64;
        MetricValue::present(
            Theme::Efficiency,
            &format!("response_time_p{percent}"),
            "ms",
            value,
            n,
            missing,
        )
    };
    ResponseTimeMetrics {
        mean: MetricValue::present(
            Theme::Efficiency,
            "average_response_time",
            "ms",
            sum as f64 / n as f64,
            n,
            missing,
        )
        .with_note("lower is better"),
        p50: percentile(50),
        p95: percentile(95),
        p99: percentile(99),
    }
}

/// Nearest-rank percentile: the value at 1-based rank ceil(percent * n / 100)
/// of the ascending-sorted sample.
fn nearest_rank(sorted: &[u64], percent: u64) -> u64 {
    debug_assert!(!sorted.is_empty() && (1..=100).contains(&percent));
    let n = sorted.len() as u64;
    let rank = (percent * n).div_ceil(100).max(1);
    sorted[(rank - 1) as usize]
}

/// Fraction of conversations resolved without human handoff.
pub fn automation_rate(dataset: &EvaluationDataset) -> MetricValue {
    let n = dataset.conversations().len();
    let automated = dataset.conversations().iter().filter(|c| c.automated).count();
    MetricValue::present(
        Theme::Efficiency,
        "automation_rate",
        "fraction",
        automated as f64 / n as f64,
        n,
        0,
    )
}

/// Total operational cost divided by the number of interactions.
pub fn cost_per_interaction(dataset: &EvaluationDataset) -> MetricValue {
    let note = "total operational cost divided by interaction count; \
                the inverse ratio would measure interactions per unit cost";
    let Some(ops) = dataset.ops() else {
        return MetricValue::absent(Theme::Efficiency, "cost_per_interaction", "per-interaction", 0)
            .with_note("no ops log provided");
    };
    if ops.costs.is_empty() {
        return MetricValue::absent(Theme::Efficiency, "cost_per_interaction", "per-interaction", 0)
            .with_note("ops log has no cost entries");
    }
    let total: f64 = ops.costs.iter().map(|c| c.amount).sum();
    let n = dataset.conversations().len();
    let unit = format!("{}/interaction", ops.costs[0].currency);
    MetricValue::present(
        Theme::Efficiency,
        "cost_per_interaction",
        &unit,
        total / n as f64,
        n,
        0,
    )
    .with_note(note)
}

/// Scheduled time during which the system was actually available.
///
/// `|union(availability) ∩ union(expected)| / |union(expected)|`; overlapping
/// or duplicated intervals are unioned first, and availability outside the
/// schedule is ignored.
pub fn system_uptime(dataset: &EvaluationDataset) -> MetricValue {
    let Some(ops) = dataset.ops() else {
        return MetricValue::absent(Theme::Efficiency, "system_uptime", "fraction", 0)
            .with_note("no ops log provided");
    };
    if ops.expected.is_empty() {
        return MetricValue::absent(Theme::Efficiency, "system_uptime", "fraction", 0)
            .with_note("ops log has no expected-schedule intervals");
    }
    let expected = union_intervals(&ops.expected);
    let available = union_intervals(&ops.availability);
    let scheduled_ms = total_len(&expected);
    let up_ms = intersection_len(&available, &expected);
    MetricValue::present(
        Theme::Efficiency,
        "system_uptime",
        "fraction",
        up_ms as f64 / scheduled_ms as f64,
        ops.expected.len(),
        0,
    )
}

/// Merge possibly-overlapping intervals into disjoint sorted ones.
/// Touching intervals merge too; that leaves the total measure unchanged.
pub(crate) fn union_intervals(intervals: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut sorted: Vec<(i64, i64)> = intervals.to_vec();
    sorted.sort_unstable();
    let mut merged: Vec<(i64, i64)> = Vec::with_capacity(sorted.len());
    for (start, end) in sorted {
        match merged.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => merged.push((start, end)),
        }
    }
    merged
}

fn total_len(disjoint: &[(i64, i64)]) -> i128 {
    disjoint.iter().map(|(s, e)| (*e as i128) - (*s as i128)).sum()
}

/// Total overlap between two disjoint sorted interval lists.
pub(crate) fn intersection_len(a: &[(i64, i64)], b: &[(i64, i64)]) -> i128 {
    let mut total: i128 = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let start = a[i].0.max(b[j].0);
        let end = a[i].1.min(b[j].1);
        if start < end {
            total += (end as i128) - (start as i128);
        }
        if a[i].1 <= b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{ConversationRecord, CostEntry, OpsLog, Speaker, Turn};
    use std::collections::BTreeMap;

    fn conv_with_latencies(id: &str, latencies: &[u64]) -> ConversationRecord {
        ConversationRecord {
            conversation_id: id.to_owned(),
            turns: latencies
                .iter()
                .enumerate()
                .map(|(i, ms)| Turn {
                    index: i as u64,
                    speaker: Speaker::Bot,
                    text: String::new(),
                    timestamp_ms: i as i64,
                    predicted_intent: None,
                    gold_intent: None,
                    context_dist: None,
                    response_latency_ms: Some(*ms),
                    response_embedding: None,
                    reference_text: None,
                    reference_embedding: None,
                })
                .collect(),
            tasks: vec![],
            decisions: vec![],
            automated: true,
            compliant: None,
            survey: None,
            group: None,
        }
    }

    fn plain_conv(id: &str, automated: bool) -> ConversationRecord {
        ConversationRecord {
            conversation_id: id.to_owned(),
            turns: vec![],
            tasks: vec![],
            decisions: vec![],
            automated,
            compliant: None,
            survey: None,
            group: None,
        }
    }

    fn dataset(convs: Vec<ConversationRecord>, ops: Option<OpsLog>) -> EvaluationDataset {
        EvaluationDataset::new(convs, ops, BTreeMap::new()).unwrap()
    }

    #[test]
    fn art_mean_of_three() {
        let ds = dataset(vec![conv_with_latencies("a", &[100, 200, 300])], None);
        let m = average_response_time(&ds);
        assert_eq!(m.mean.value, Some(200.0));
        assert_eq!(m.mean.sample_count, 3);
    }

    #[test]
    fn art_single_latency() {
        let ds = dataset(vec![conv_with_latencies("a", &[50])], None);
        assert_eq!(average_response_time(&ds).mean.value, Some(50.0));
    }

    #[test]
    fn percentiles_nearest_rank_oracle() {
        // Oracle: sort and index ceil(p * n / 100).
        let values: Vec<u64> = (1..=100).collect();
        let ds = dataset(vec![conv_with_latencies("a", &values)], None);
        let m = average_response_time(&ds);
        assert_eq!(m.p95.value, Some(95.0));
        assert_eq!(m.p50.value, Some(50.0));
        assert_eq!(m.p99.value, Some(99.0));
    }

    #[test]
    fn nearest_rank_small_samples() {
        assert_eq!(nearest_rank(&[7], 50), 7);
        assert_eq!(nearest_rank(&[7], 99), 7);
        assert_eq!(nearest_rank(&[1, 2], 50), 1);
        assert_eq!(nearest_rank(&[1, 2], 51), 2);
    }

    #[test]
    fn automation_rate_fixtures() {
        let mut convs: Vec<_> = (0..9).map(|i| plain_conv(&format!("a{i}"), true)).collect();
        convs.extend((0..3).map(|i| plain_conv(&format!("e{i}"), false)));
        assert_eq!(automation_rate(&dataset(convs, None)).value, Some(0.75));

        let all_escalated: Vec<_> = (0..4).map(|i| plain_conv(&format!("e{i}"), false)).collect();
        assert_eq!(automation_rate(&dataset(all_escalated, None)).value, Some(0.0));

        let all_auto: Vec<_> = (0..4).map(|i| plain_conv(&format!("a{i}"), true)).collect();
        assert_eq!(automation_rate(&dataset(all_auto, None)).value, Some(1.0));
    }

    fn ops(avail: Vec<(i64, i64)>, expected: Vec<(i64, i64)>, costs: Vec<f64>) -> OpsLog {
        OpsLog {
            availability: avail,
            expected,
            costs: costs
                .into_iter()
                .map(|amount| CostEntry { amount, currency: "USD".into() })
                .collect(),
        }
    }

    #[test]
    fn cpi_prose_substitution() {
        let convs: Vec<_> = (0..500).map(|i| plain_conv(&format!("c{i:04}"), true)).collect();
        let ds = dataset(convs, Some(ops(vec![], vec![(0, 1)], vec![1000.0])));
        let m = cost_per_interaction(&ds);
        assert_eq!(m.value, Some(2.0));
        assert_eq!(m.unit, "USD/interaction");
    }

    #[test]
    fn cpi_zero_cost_and_split_entries() {
        let convs: Vec<_> = (0..100).map(|i| plain_conv(&format!("c{i:03}"), true)).collect();
        let ds = dataset(convs.clone(), Some(ops(vec![], vec![(0, 1)], vec![0.0])));
        assert_eq!(cost_per_interaction(&ds).value, Some(0.0));
        let ds = dataset(convs, Some(ops(vec![], vec![(0, 1)], vec![300.0, 700.0])));
        assert_eq!(cost_per_interaction(&ds).value, Some(10.0));
    }

    #[test]
    fn cpi_null_without_ops() {
        let ds = dataset(vec![plain_conv("a", true)], None);
        let m = cost_per_interaction(&ds);
        assert_eq!(m.value, None);
        assert!(m.note.as_deref().unwrap().contains("no ops log"));
    }

    #[test]
    fn uptime_exact_match_is_one() {
        let ds = dataset(
            vec![plain_conv("a", true)],
            Some(ops(vec![(0, 1000)], vec![(0, 1000)], vec![])),
        );
        assert_eq!(system_uptime(&ds).value, Some(1.0));
    }

    #[test]
    fn uptime_720h_with_48min_outage() {
        let hour = 3_600_000i64;
        let expected = vec![(0, 720 * hour)];
        let outage_start = 100 * hour;
        let outage_len = 48 * 60_000i64;
        let avail = vec![(0, outage_start), (outage_start + outage_len, 720 * hour)];
        let ds = dataset(vec![plain_conv("a", true)], Some(ops(avail, expected, vec![])));
        let got = system_uptime(&ds).value.unwrap();
        assert!((got - 719.2 / 720.0).abs() < 1e-12);
        assert!((got - 0.998889).abs() < 1e-6);
    }

    #[test]
    fn uptime_overlapping_availability_counts_once() {
        let ds = dataset(
            vec![plain_conv("a", true)],
            Some(ops(vec![(0, 10), (5, 15)], vec![(0, 15)], vec![])),
        );
        assert_eq!(system_uptime(&ds).value, Some(1.0));
    }

    #[test]
    fn uptime_brute_force_membership_oracle() {
        // Tiny intervals: compare against a 1 ms grid membership count.
        let avail = vec![(2, 7), (5, 11), (20, 23)];
        let expected = vec![(0, 9), (10, 22)];
        let in_any = |t: i64, ivs: &[(i64, i64)]| ivs.iter().any(|(s, e)| *s <= t && t < *e);
        let mut up = 0i64;
        let mut scheduled = 0i64;
        for t in 0..30 {
            if in_any(t, &expected) {
                scheduled += 1;
                if in_any(t, &avail) {
                    up += 1;
                }
            }
        }
        let oracle = up as f64 / scheduled as f64;
        let ds = dataset(vec![plain_conv("a", true)], Some(ops(avail, expected, vec![])));
        assert_eq!(system_uptime(&ds).value, Some(oracle));
    }

    #[test]
    fn uptime_duplicated_interval_is_idempotent() {
        let avail = vec![(0, 500), (400, 900)];
        let expected = vec![(0, 1000)];
        let base = dataset(
            vec![plain_conv("a", true)],
            Some(ops(avail.clone(), expected.clone(), vec![])),
        );
        let mut dup_avail = avail.clone();
        dup_avail.push(avail[0]);
        let dup = dataset(vec![plain_conv("a", true)], Some(ops(dup_avail, expected, vec![])));
        assert_eq!(system_uptime(&base).value, system_uptime(&dup).value);
    }

    #[test]
    fn uptime_ignores_availability_outside_schedule() {
        let ds = dataset(
            vec![plain_conv("a", true)],
            Some(ops(vec![(-100, 50), (90, 200)], vec![(0, 100)], vec![])),
        );
        assert_eq!(system_uptime(&ds).value, Some(0.6));
    }

    #[test]
    fn uptime_null_without_expected() {
        let ds = dataset(
            vec![plain_conv("a", true)],
            Some(ops(vec![(0, 10)], vec![], vec![])),
        );
        assert_eq!(system_uptime(&ds).value, None);
    }
}
