//! Scorecard assembly, rendering, and comparison.
//!
//! A scorecard groups the computed metrics into the four fixed themes,
//! echoes the effective configuration, and carries a content digest of the
//! input dataset. `build_scorecard` is a pure function of `(dataset, config)`
//! — the embedded timestamp is the dataset's own latest event time — and the
//! JSON rendering is canonical (sorted keys, 6-significant-digit floats,
//! trailing newline), so repeated runs are byte-identical.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cognitive::{self, BleuConfig};
use crate::datamodel::{canonical_digest, EvaluationDataset, MetricValue, Speaker, Theme};
use crate::efficiency;
use crate::experience::{self, UtilityFunction};
use crate::governance;

/// Schema tag embedded in every rendered scorecard.
pub const SCORECARD_SCHEMA: &str = "scorecard/1";

/// The scorecard metric names, grouped by theme in presentation order.
pub mod names {
    use crate::datamodel::Theme;

    pub const NLU_ACCURACY: &str = "nlu_accuracy";
    pub const INTENT_F1: &str = "intent_f1";
    pub const CONTEXT_RETENTION: &str = "context_retention";
    pub const CONVERSATIONAL_COHERENCE: &str = "conversational_coherence";
    pub const TASK_COMPLETION_RATE: &str = "task_completion_rate";
    pub const SEMANTIC_SIMILARITY: &str = "semantic_similarity";
    pub const TURN_TAKING_BALANCE: &str = "turn_taking_balance";
    pub const CSAT: &str = "csat";
    pub const NPS: &str = "nps";
    pub const ENGAGEMENT_DEPTH: &str = "engagement_depth";
    pub const CUMULATIVE_UTILITY: &str = "cumulative_utility";
    pub const AVERAGE_RESPONSE_TIME: &str = "average_response_time";
    pub const AUTOMATION_RATE: &str = "automation_rate";
    pub const COST_PER_INTERACTION: &str = "cost_per_interaction";
    pub const SYSTEM_UPTIME: &str = "system_uptime";
    pub const BIAS_DETECTION_RATE: &str = "bias_detection_rate";
    pub const COMPLIANCE_RATE: &str = "compliance_rate";
    pub const EXPLAINABILITY_SCORE: &str = "explainability_score";
    pub const FAIRNESS_PARITY: &str = "fairness_parity";

    /// All 19 scorecard metrics in theme order.
    pub const ALL: [&str; 19] = [
        NLU_ACCURACY,
        INTENT_F1,
        CONTEXT_RETENTION,
        CONVERSATIONAL_COHERENCE,
        TASK_COMPLETION_RATE,
        SEMANTIC_SIMILARITY,
        TURN_TAKING_BALANCE,
        CSAT,
        NPS,
        ENGAGEMENT_DEPTH,
        CUMULATIVE_UTILITY,
        AVERAGE_RESPONSE_TIME,
        AUTOMATION_RATE,
        COST_PER_INTERACTION,
        SYSTEM_UPTIME,
        BIAS_DETECTION_RATE,
        COMPLIANCE_RATE,
        EXPLAINABILITY_SCORE,
        FAIRNESS_PARITY,
    ];

    pub fn theme_of(name: &str) -> Option<Theme> {
        let theme = match name {
            NLU_ACCURACY | INTENT_F1 | CONTEXT_RETENTION | CONVERSATIONAL_COHERENCE
            | TASK_COMPLETION_RATE | SEMANTIC_SIMILARITY | TURN_TAKING_BALANCE => Theme::Cognitive,
            CSAT | NPS | ENGAGEMENT_DEPTH | CUMULATIVE_UTILITY => Theme::Experience,
            AVERAGE_RESPONSE_TIME | AUTOMATION_RATE | COST_PER_INTERACTION | SYSTEM_UPTIME => {
                Theme::Efficiency
            }
            BIAS_DETECTION_RATE | COMPLIANCE_RATE | EXPLAINABILITY_SCORE | FAIRNESS_PARITY => {
                Theme::Governance
            }
            _ => return None,
        };
        Some(theme)
    }

    /// Direction of improvement. Everything is higher-is-better except the
    /// divergence, latency, and cost metrics (and their auxiliaries).
    pub fn lower_is_better(name: &str) -> bool {
        matches!(
            name,
            CONTEXT_RETENTION
                | "context_retention_max"
                | AVERAGE_RESPONSE_TIME
                | "response_time_p50"
                | "response_time_p95"
                | "response_time_p99"
                | COST_PER_INTERACTION
                | FAIRNESS_PARITY
        )
    }
}

/// Which CSAT flavor fills the `csat` slot of the scorecard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CsatPolicy {
    /// Mean on the survey's own scale; `csat_normalized` emitted alongside.
    #[default]
    Raw,
    /// Mean of (score-1)/(scale_max-1), robust to mixed scales.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    pub format: ReportFormat,
}

/// Effective evaluation configuration, echoed verbatim into the scorecard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub enabled_metrics: BTreeSet<String>,
    pub bleu: BleuConfig,
    pub kl_epsilon: f64,
    pub utility: UtilityFunction,
    pub csat_policy: CsatPolicy,
    pub report: ReportOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            enabled_metrics: names::ALL.iter().map(|s| s.to_string()).collect(),
            bleu: BleuConfig::default(),
            kl_epsilon: cognitive::DEFAULT_KL_EPSILON,
            utility: UtilityFunction::default(),
            csat_policy: CsatPolicy::default(),
            report: ReportOptions::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ScorecardError> {
        for name in &self.enabled_metrics {
            if names::theme_of(name).is_none() {
                return Err(ScorecardError::UnknownMetric(name.clone()));
            }
        }
        self.bleu
            .validate()
            .map_err(|e| ScorecardError::InvalidConfig(e.to_string()))?;
        if !self.kl_epsilon.is_finite() || self.kl_epsilon <= 0.0 {
            return Err(ScorecardError::InvalidConfig(format!(
                "kl_epsilon must be positive, got {}",
                self.kl_epsilon
            )));
        }
        self.utility.validate().map_err(ScorecardError::InvalidConfig)?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScorecardError {
    #[error("unknown metric name in config: {0:?}")]
    UnknownMetric(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("scorecards have different metric sets: {0}")]
    MetricSetMismatch(String),
}

/// The four-theme report object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub schema: String,
    /// Latest event timestamp observed in the dataset; keeps the report a
    /// pure function of its inputs.
    pub generated_at_ms: i64,
    pub dataset_digest: String,
    pub config_echo: EvalConfig,
    /// One entry per enabled metric, grouped by theme in fixed order.
    pub metrics: Vec<MetricValue>,
    /// Companion metrics (percentiles, normalized variants, worst cases).
    pub auxiliary: Vec<MetricValue>,
}

impl Scorecard {
    pub fn metric(&self, name: &str) -> Option<&MetricValue> {
        self.metrics
            .iter()
            .chain(self.auxiliary.iter())
            .find(|m| m.name == name)
    }
}

/// Compute every enabled metric exactly once and assemble the report.
pub fn build_scorecard(
    dataset: &EvaluationDataset,
    config: &EvalConfig,
) -> Result<Scorecard, ScorecardError> {
    config.validate()?;
    let enabled = |name: &str| config.enabled_metrics.contains(name);
    let mut metrics: Vec<MetricValue> = Vec::new();
    let mut auxiliary: Vec<MetricValue> = Vec::new();

    for name in names::ALL {
        if !enabled(name) {
            continue;
        }
        match name {
            names::NLU_ACCURACY => metrics.push(cognitive::nlu_accuracy(dataset)),
            names::INTENT_F1 => {
                let unlabeled = dataset
                    .turns()
                    .filter(|t| t.speaker == Speaker::User)
                    .filter(|t| t.predicted_intent.is_none() || t.gold_intent.is_none())
                    .count();
                match cognitive::intent_f1(dataset) {
                    Some(f1) => {
                        metrics.push(
                            MetricValue::present(
                                Theme::Cognitive,
                                names::INTENT_F1,
                                "fraction",
                                f1.macro_f1,
                                f1.labeled_pairs,
                                f1.unlabeled_user_turns,
                            )
                            .with_note("macro-averaged over gold classes"),
                        );
                        auxiliary.push(MetricValue::present(
                            Theme::Cognitive,
                            "intent_f1_micro",
                            "fraction",
                            f1.micro_f1,
                            f1.labeled_pairs,
                            f1.unlabeled_user_turns,
                        ));
                    }
                    None => metrics.push(MetricValue::absent(
                        Theme::Cognitive,
                        names::INTENT_F1,
                        "fraction",
                        unlabeled,
                    )),
                }
            }
            names::CONTEXT_RETENTION => {
                let cr = cognitive::context_retention(dataset, config.kl_epsilon);
                metrics.push(cr.mean);
                auxiliary.push(cr.max);
            }
            names::CONVERSATIONAL_COHERENCE => {
                metrics.push(cognitive::conversational_coherence(dataset, &config.bleu));
            }
            names::TASK_COMPLETION_RATE => metrics.push(cognitive::task_completion_rate(dataset)),
            names::SEMANTIC_SIMILARITY => metrics.push(cognitive::semantic_similarity(dataset)),
            names::TURN_TAKING_BALANCE => metrics.push(cognitive::turn_taking_balance(dataset)),
            names::CSAT => {
                let c = experience::csat(dataset);
                match config.csat_policy {
                    CsatPolicy::Raw => {
                        metrics.push(c.raw);
                        auxiliary.push(c.normalized);
                    }
                    CsatPolicy::Normalized => {
                        let mut m = c.normalized;
                        m.name = names::CSAT.to_owned();
                        m.note = Some("normalized: mean of (score-1)/(scale_max-1)".to_owned());
                        metrics.push(m);
                    }
                }
            }
            names::NPS => metrics.push(experience::nps(dataset)),
            names::ENGAGEMENT_DEPTH => metrics.push(experience::engagement_depth(dataset)),
            names::CUMULATIVE_UTILITY => {
                let u = experience::cumulative_utility(dataset, config.utility);
                metrics.push(u.total);
                auxiliary.push(u.per_interaction_mean);
            }
            names::AVERAGE_RESPONSE_TIME => {
                let rt = efficiency::average_response_time(dataset);
                metrics.push(rt.mean);
                auxiliary.extend([rt.p50, rt.p95, rt.p99]);
            }
            names::AUTOMATION_RATE => metrics.push(efficiency::automation_rate(dataset)),
            names::COST_PER_INTERACTION => metrics.push(efficiency::cost_per_interaction(dataset)),
            names::SYSTEM_UPTIME => metrics.push(efficiency::system_uptime(dataset)),
            names::BIAS_DETECTION_RATE => metrics.push(governance::bias_detection_rate(dataset)),
            names::COMPLIANCE_RATE => metrics.push(governance::compliance_rate(dataset)),
            names::EXPLAINABILITY_SCORE => metrics.push(governance::explainability_score(dataset)),
            names::FAIRNESS_PARITY => {
                metrics.push(governance::fairness_parity_matrix(dataset, |_| true).metric)
            }
            _ => unreachable!("names::ALL is exhaustive"),
        }
    }

    Ok(Scorecard {
        schema: SCORECARD_SCHEMA.to_owned(),
        generated_at_ms: dataset.as_of_ms(),
        dataset_digest: canonical_digest(dataset),
        config_echo: config.clone(),
        metrics,
        auxiliary,
    })
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Format a float with 6 significant digits, then as the shortest decimal
/// that round-trips. Idempotent under parse -> format.
pub(crate) fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("scientific notation parses");
    if rounded == 0.0 {
        return "0".to_owned();
    }
    format!("{rounded}")
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&fmt_sig6(n.as_f64().expect("number is i64, u64, or f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings serialize"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        // serde_json's default map is a BTreeMap, so keys iterate sorted.
        Value::Object(map) => {
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                out.push(':');
                write_canonical(item, out);
            }
            out.push('}');
        }
    }
}

/// Canonical JSON for any serializable value: sorted keys, fixed float
/// formatting, no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("value serializes");
    let mut out = String::new();
    write_canonical(&value, &mut out);
    out
}

/// Render a scorecard as canonical JSON (trailing newline) or markdown.
pub fn render_report(scorecard: &Scorecard, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut out = canonical_json(scorecard);
            out.push('\n');
            out
        }
        ReportFormat::Markdown => render_markdown(scorecard),
    }
}

fn fmt_cell(metric: &MetricValue) -> String {
    match metric.value {
        Some(v) => fmt_sig6(v),
        None => format!("n/a ({} samples)", metric.sample_count),
    }
}

fn render_markdown(scorecard: &Scorecard) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "# Conversation Evaluation Scorecard");
    let _ = writeln!(out);
    let _ = writeln!(out, "- schema: `{}`", scorecard.schema);
    let _ = writeln!(out, "- dataset digest: `{}`", scorecard.dataset_digest);
    let _ = writeln!(out, "- generated at (ms): {}", scorecard.generated_at_ms);
    let _ = writeln!(out, "- metrics: {}", scorecard.metrics.len());

    for theme in Theme::ALL {
        let rows: Vec<&MetricValue> = scorecard
            .metrics
            .iter()
            .filter(|m| m.theme == theme)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "## {}", theme.title());
        let _ = writeln!(out);
        let _ = writeln!(out, "| Metric | Value | Unit | Samples | Missing |");
        let _ = writeln!(out, "|---|---:|---|---:|---:|");
        for m in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                m.name,
                fmt_cell(m),
                m.unit,
                m.sample_count,
                m.missing_count
            );
        }
    }

    if !scorecard.auxiliary.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "## Auxiliary Metrics");
        let _ = writeln!(out);
        let _ = writeln!(out, "| Metric | Theme | Value | Unit | Samples | Missing |");
        let _ = writeln!(out, "|---|---|---:|---|---:|---:|");
        for m in &scorecard.auxiliary {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                m.name,
                m.theme,
                fmt_cell(m),
                m.unit,
                m.sample_count,
                m.missing_count
            );
        }
    }

    let notes: Vec<&MetricValue> = scorecard
        .metrics
        .iter()
        .chain(scorecard.auxiliary.iter())
        .filter(|m| m.note.is_some())
        .collect();
    if !notes.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "## Notes");
        let _ = writeln!(out);
        for m in notes {
            let _ = writeln!(out, "- `{}`: {}", m.name, m.note.as_deref().unwrap());
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "## Configuration");
    let _ = writeln!(out);
    let _ = writeln!(out, "```json");
    let _ = writeln!(out, "{}", canonical_json(&scorecard.config_echo));
    let _ = writeln!(out, "```");
    out
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assessment {
    Improvement,
    Regression,
    NoChange,
    /// One side has no value for this metric.
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub name: String,
    pub theme: Theme,
    pub before: Option<f64>,
    pub after: Option<f64>,
    /// after - before.
    pub delta: Option<f64>,
    pub lower_is_better: bool,
    pub assessment: Assessment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub deltas: Vec<MetricDelta>,
}

impl DeltaReport {
    pub fn no_change(&self) -> bool {
        self.deltas
            .iter()
            .all(|d| d.assessment == Assessment::NoChange)
    }

    pub fn verdict(&self) -> String {
        if self.no_change() {
            return "no change".to_owned();
        }
        let count = |a: Assessment| self.deltas.iter().filter(|d| d.assessment == a).count();
        format!(
            "{} improvement(s), {} regression(s), {} unchanged, {} incomparable",
            count(Assessment::Improvement),
            count(Assessment::Regression),
            count(Assessment::NoChange),
            count(Assessment::Incomparable)
        )
    }
}

/// Per-metric deltas (after minus before) with direction-of-improvement
/// flags. Both scorecards must carry the same metric names.
pub fn compare_scorecards(
    before: &Scorecard,
    after: &Scorecard,
) -> Result<DeltaReport, ScorecardError> {
    let name_set = |s: &Scorecard| -> BTreeSet<String> {
        s.metrics
            .iter()
            .chain(s.auxiliary.iter())
            .map(|m| m.name.clone())
            .collect()
    };
    let before_names = name_set(before);
    let after_names = name_set(after);
    if before_names != after_names {
        let only_before: Vec<_> = before_names.difference(&after_names).cloned().collect();
        let only_after: Vec<_> = after_names.difference(&before_names).cloned().collect();
        return Err(ScorecardError::MetricSetMismatch(format!(
            "only in before: {only_before:?}; only in after: {only_after:?}"
        )));
    }

    let deltas = before
        .metrics
        .iter()
        .chain(before.auxiliary.iter())
        .map(|b| {
            let a = after.metric(&b.name).expect("name sets match");
            let lower_is_better = names::lower_is_better(&b.name);
            let (delta, assessment) = match (b.value, a.value) {
                (Some(x), Some(y)) => {
                    let d = y - x;
                    let assessment = if d == 0.0 {
                        Assessment::NoChange
                    } else if (d < 0.0) == lower_is_better {
                        Assessment::Improvement
                    } else {
                        Assessment::Regression
                    };
                    (Some(d), assessment)
                }
                (None, None) => (None, Assessment::NoChange),
                _ => (None, Assessment::Incomparable),
            };
            MetricDelta {
                name: b.name.clone(),
                theme: b.theme,
                before: b.value,
                after: a.value,
                delta,
                lower_is_better,
                assessment,
            }
        })
        .collect();
    Ok(DeltaReport { deltas })
}
