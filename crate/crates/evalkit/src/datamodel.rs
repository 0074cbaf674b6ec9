//! Domain types for conversation evaluation datasets.
//!
//! Everything a metric consumes lives here: conversations with their turns,
//! task and decision records, survey answers, the operational log, and the
//! `MetricValue`/`Scorecard` report types. All types are plain immutable data
//! once constructed; validated datasets are only obtainable through
//! [`EvaluationDataset::new`] (or the ingest parser), so metric code never
//! sees a record that violates an invariant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Schema version accepted in dataset files and echoed in metadata.
pub const SCHEMA_VERSION: &str = "convo-evalkit/1";

/// Tolerance for probability mass summing to one.
pub const DIST_SUM_TOLERANCE: f64 = 1e-9;

/// Who produced a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Bot,
}

/// A probability distribution over free-form labels.
///
/// Construction validates that all masses are finite and non-negative, that
/// there is at least one entry, and that the total mass is 1 within
/// [`DIST_SUM_TOLERANCE`]. The entry map is a `BTreeMap` so iteration order
/// (and therefore every downstream float accumulation) is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct Distribution {
    entries: BTreeMap<String, f64>,
}

/// Why a candidate distribution was rejected.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("distribution has no entries")]
    Empty,
    #[error("label {label:?} has negative or non-finite probability {value}")]
    BadProbability { label: String, value: f64 },
    #[error("probabilities sum to {sum}, expected 1 within {DIST_SUM_TOLERANCE:e}")]
    NotNormalized { sum: f64 },
}

impl Distribution {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self, DistributionError> {
        if entries.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (label, &value) in &entries {
            if !value.is_finite() || value < 0.0 {
                return Err(DistributionError::BadProbability {
                    label: label.clone(),
                    value,
                });
            }
        }
        let sum: f64 = entries.values().sum();
        if (sum - 1.0).abs() > DIST_SUM_TOLERANCE {
            return Err(DistributionError::NotNormalized { sum });
        }
        Ok(Self { entries })
    }

    /// Probability mass for `label`, zero when absent.
    pub fn mass(&self, label: &str) -> f64 {
        self.entries.get(label).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl TryFrom<BTreeMap<String, f64>> for Distribution {
    type Error = DistributionError;

    fn try_from(entries: BTreeMap<String, f64>) -> Result<Self, Self::Error> {
        Self::new(entries)
    }
}

impl From<Distribution> for BTreeMap<String, f64> {
    fn from(dist: Distribution) -> Self {
        dist.entries
    }
}

/// One utterance within a conversation.
///
/// Intent labels appear only on user turns; latency, embeddings, and
/// reference annotations only on bot turns. These invariants are enforced
/// when a dataset is constructed, not field by field here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: u64,
    pub speaker: Speaker,
    pub text: String,
    pub timestamp_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_intent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_intent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_dist: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_embedding: Option<Vec<f64>>,
}

/// One task the user initiated (or not) and the bot completed (or not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub initiated: bool,
    pub completed: bool,
}

/// One scalar decision outcome with optional audit annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub decision_id: String,
    pub outcome_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_free: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explainable: Option<bool>,
}

/// Post-interaction survey answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csat_score: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csat_scale_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nps_rating: Option<u8>,
}

/// One logged conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub conversation_id: String,
    pub turns: Vec<Turn>,
    #[serde(default)]
    pub tasks: Vec<TaskRecord>,
    #[serde(default)]
    pub decisions: Vec<DecisionRecord>,
    pub automated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compliant: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<SurveyResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl ConversationRecord {
    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::User)
    }

    pub fn bot_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::Bot)
    }
}

/// A cost entry from the operations log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub amount: f64,
    pub currency: String,
}

/// Operational availability and cost log for the evaluation period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpsLog {
    /// Millisecond intervals `[start, end)` when the system was up.
    #[serde(default)]
    pub availability: Vec<(i64, i64)>,
    /// Millisecond intervals `[start, end)` when the system was scheduled to be up.
    #[serde(default)]
    pub expected: Vec<(i64, i64)>,
    #[serde(default)]
    pub costs: Vec<CostEntry>,
}

/// A validated collection of conversations plus the optional ops log.
///
/// Only constructible through validation (`EvaluationDataset::new` in the
/// ingest module, or `parse_dataset`); conversations are held sorted by
/// `conversation_id` so every metric accumulates in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationDataset {
    pub(crate) conversations: Vec<ConversationRecord>,
    pub(crate) ops: Option<OpsLog>,
    pub(crate) metadata: BTreeMap<String, String>,
}

impl EvaluationDataset {
    pub fn conversations(&self) -> &[ConversationRecord] {
        &self.conversations
    }

    pub fn ops(&self) -> Option<&OpsLog> {
        self.ops.as_ref()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn turns(&self) -> impl Iterator<Item = &Turn> {
        self.conversations.iter().flat_map(|c| c.turns.iter())
    }

    /// Latest observed event timestamp (turn or schedule end), in ms.
    ///
    /// Used as the scorecard's `generated_at_ms` so that reports are a pure
    /// function of their inputs.
    pub fn as_of_ms(&self) -> i64 {
        let turn_max = self.turns().map(|t| t.timestamp_ms).max();
        let ops_max = self
            .ops
            .as_ref()
            .and_then(|o| o.availability.iter().chain(o.expected.iter()).map(|iv| iv.1).max());
        turn_max.into_iter().chain(ops_max).max().unwrap_or(0)
    }
}

/// Content hash of the canonical serialization of a dataset.
///
/// Conversations are already stored sorted by id and JSON objects serialize
/// with sorted keys, so two datasets with the same records hash identically
/// regardless of the order they appeared in the input file.
pub fn canonical_digest(dataset: &EvaluationDataset) -> String {
    let value = serde_json::to_value(dataset).expect("dataset serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().fold(String::with_capacity(64), |mut acc, b| {
        use std::fmt::Write;
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

/// The four report themes, in fixed presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theme {
    Cognitive,
    Experience,
    Efficiency,
    Governance,
}

impl Theme {
    pub const ALL: [Theme; 4] = [
        Theme::Cognitive,
        Theme::Experience,
        Theme::Efficiency,
        Theme::Governance,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Theme::Cognitive => "cognitive",
            Theme::Experience => "experience",
            Theme::Efficiency => "efficiency",
            Theme::Governance => "governance",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Theme::Cognitive => "Cognitive and Conversational Intelligence",
            Theme::Experience => "User Experience",
            Theme::Efficiency => "Operational Efficiency",
            Theme::Governance => "Ethical and Governance Compliance",
        }
    }
}

impl std::fmt::Display for Theme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One computed metric.
///
/// `value` is `None` exactly when `sample_count` is zero; `missing_count`
/// counts the records that lacked the annotations this metric needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub theme: Theme,
    pub name: String,
    pub value: Option<f64>,
    pub unit: String,
    pub sample_count: usize,
    pub missing_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MetricValue {
    /// A metric with at least one sample. Panics on a non-finite value or a
    /// zero sample count; those indicate a bug in the caller, not bad data.
    pub fn present(
        theme: Theme,
        name: &str,
        unit: &str,
        value: f64,
        sample_count: usize,
        missing_count: usize,
    ) -> Self {
        assert!(value.is_finite(), "metric {name}: non-finite value {value}");
        assert!(sample_count > 0, "metric {name}: value with zero samples");
        Self {
            theme,
            name: name.to_owned(),
            value: Some(value),
            unit: unit.to_owned(),
            sample_count,
            missing_count,
            note: None,
        }
    }

    /// A metric that had no usable samples.
    pub fn absent(theme: Theme, name: &str, unit: &str, missing_count: usize) -> Self {
        Self {
            theme,
            name: name.to_owned(),
            value: None,
            unit: unit.to_owned(),
            sample_count: 0,
            missing_count,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}
