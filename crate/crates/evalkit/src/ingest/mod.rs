//! Dataset ingestion: NDJSON parsing, validation, and fixture synthesis.
//!
//! A conversation file is UTF-8 newline-delimited JSON, one
//! [`ConversationRecord`] object per line, optionally preceded by a header
//! object carrying `schema_version` (required to be [`SCHEMA_VERSION`]) and
//! free-form string metadata. The ops file is a single JSON object with
//! `availability`, `expected`, and `costs`.
//!
//! Validation reports every violation with a stable rule id (see [`rules`]),
//! not just the first one found. Strict mode aborts on any error with the
//! full report; lenient mode drops violating records and keeps going.

mod synth;

pub use synth::{synthesize_fixture, SynthProfile};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use crate::datamodel::{
    ConversationRecord, EvaluationDataset, OpsLog, Speaker, DIST_SUM_TOLERANCE, SCHEMA_VERSION,
};

/// Stable rule ids attached to validation violations.
pub mod rules {
    pub const JSON_MALFORMED: &str = "json-malformed";
    pub const JSON_NOT_OBJECT: &str = "json-not-object";
    pub const CONV_ID_MISSING: &str = "conv-id-missing";
    pub const CONV_FIELD_TYPE: &str = "conv-field-type";
    pub const TURN_FIELD_TYPE: &str = "turn-field-type";
    pub const SPEAKER_INVALID: &str = "speaker-invalid";
    pub const TURN_INDEX_SEQUENCE: &str = "turn-index-sequence";
    pub const TIMESTAMP_ORDER: &str = "timestamp-order";
    pub const INTENT_ON_BOT_TURN: &str = "intent-on-bot-turn";
    pub const BOT_FIELD_ON_USER_TURN: &str = "bot-field-on-user-turn";
    pub const LATENCY_NEGATIVE: &str = "latency-negative";
    pub const EMBEDDING_DIM_MISMATCH: &str = "embedding-dim-mismatch";
    pub const DIST_EMPTY: &str = "dist-empty";
    pub const DIST_NEGATIVE_PROB: &str = "dist-negative-prob";
    pub const DIST_NOT_NORMALIZED: &str = "dist-not-normalized";
    pub const TASK_COMPLETED_IMPLIES_INITIATED: &str = "task-completed-implies-initiated";
    pub const CSAT_SCALE_INVALID: &str = "csat-scale-invalid";
    pub const CSAT_OUT_OF_RANGE: &str = "csat-out-of-range";
    pub const NPS_OUT_OF_RANGE: &str = "nps-out-of-range";
    pub const DUP_ID: &str = "dup-id";

    pub const OUTCOME_NOT_FINITE: &str = "outcome-not-finite";
    pub const EMPTY_DATASET: &str = "empty-dataset";
    pub const SCHEMA_VERSION: &str = "schema-version";
    pub const UNKNOWN_FIELD: &str = "unknown-field";
    pub const HEADER_FIELD_TYPE: &str = "header-field-type";
    pub const OPS_MALFORMED: &str = "ops-malformed";
    pub const INTERVAL_INVALID: &str = "interval-invalid";
    pub const COST_NEGATIVE: &str = "cost-negative";
    pub const COST_CURRENCY_MIXED: &str = "cost-currency-mixed";

    /// The record-level rules exercisable by a single malformed input line.
    pub const LINE_RULES: [&str; 20] = [
        JSON_MALFORMED,
        JSON_NOT_OBJECT,
        CONV_ID_MISSING,
        CONV_FIELD_TYPE,
        TURN_FIELD_TYPE,
        SPEAKER_INVALID,
        TURN_INDEX_SEQUENCE,
        TIMESTAMP_ORDER,
        INTENT_ON_BOT_TURN,
        BOT_FIELD_ON_USER_TURN,
        LATENCY_NEGATIVE,
        EMBEDDING_DIM_MISMATCH,
        DIST_EMPTY,
        DIST_NEGATIVE_PROB,
        DIST_NOT_NORMALIZED,
        TASK_COMPLETED_IMPLIES_INITIATED,
        CSAT_SCALE_INVALID,
        CSAT_OUT_OF_RANGE,
        NPS_OUT_OF_RANGE,
        DUP_ID,
    ];
}

/// One validation rule violation, with enough locator context to find it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    /// 1-based line number in the input file, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
    /// Conversation id (or "ops"), when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<String>,
    pub rule: String,
    pub message: String,
}

impl Violation {
    fn new(rule: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            record: None,
            rule: rule.to_owned(),
            message: message.into(),
        }
    }

    fn at_line(mut self, line: u64) -> Self {
        self.line = Some(line);
        self
    }

    fn in_record(mut self, record: impl Into<String>) -> Self {
        self.record = Some(record.into());
        self
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, &self.record) {
            (Some(line), Some(record)) => {
                write!(f, "line {line} ({record}): [{}] {}", self.rule, self.message)
            }
            (Some(line), None) => write!(f, "line {line}: [{}] {}", self.rule, self.message),
            (None, Some(record)) => write!(f, "{record}: [{}] {}", self.rule, self.message),
            (None, None) => write!(f, "[{}] {}", self.rule, self.message),
        }
    }
}

/// Outcome of validating an input file (or an in-memory record set).
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
    /// Record lines seen (header and blank lines excluded).
    pub record_count: usize,
    pub accepted_count: usize,
    pub dropped_count: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// How parsing reacts to rule violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Any violation aborts with the full report.
    Strict,
    /// Violating records are dropped and counted; the rest are kept.
    Lenient,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("validation failed: {} error(s)", report.errors.len())]
    Validation { report: ValidationReport },
}

type JsonMap = serde_json::Map<String, Value>;

// ---------------------------------------------------------------------------
// Raw (structural) validation over serde_json::Value
// ---------------------------------------------------------------------------

const CONV_KEYS: [&str; 8] = [
    "conversation_id",
    "turns",
    "tasks",
    "decisions",
    "automated",
    "compliant",
    "survey",
    "group",
];
const TURN_KEYS: [&str; 11] = [
    "index",
    "speaker",
    "text",
    "timestamp_ms",
    "predicted_intent",
    "gold_intent",
    "context_dist",
    "response_latency_ms",
    "response_embedding",
    "reference_text",
    "reference_embedding",
];
const TASK_KEYS: [&str; 3] = ["task_id", "initiated", "completed"];
const DECISION_KEYS: [&str; 5] = [
    "decision_id",
    "outcome_value",
    "group",
    "bias_free",
    "explainable",
];
const SURVEY_KEYS: [&str; 3] = ["csat_score", "csat_scale_max", "nps_rating"];

/// Validate one raw JSON record, returning every violation found.
///
/// Structural problems (missing or mistyped fields) are reported first; when
/// the object is structurally sound it is converted to a typed record and
/// the semantic invariants are checked on that.
pub fn validate_record(raw: &Value) -> Vec<Violation> {
    let mut errs = structural_violations(raw);
    if !errs.is_empty() {
        return errs;
    }
    match serde_json::from_value::<ConversationRecord>(raw.clone()) {
        Ok(record) => errs.extend(conversation_violations(&record)),
        Err(err) => errs.push(Violation::new(
            rules::CONV_FIELD_TYPE,
            format!("record does not match schema: {err}"),
        )),
    }
    errs
}

fn structural_violations(raw: &Value) -> Vec<Violation> {
    let mut errs = Vec::new();
    let Some(obj) = raw.as_object() else {
        errs.push(Violation::new(
            rules::JSON_NOT_OBJECT,
            "record must be a JSON object",
        ));
        return errs;
    };

    match obj.get("conversation_id") {
        Some(Value::String(_)) => {}
        _ => errs.push(Violation::new(
            rules::CONV_ID_MISSING,
            "conversation_id must be present and a string",
        )),
    }

    match obj.get("turns") {
        Some(Value::Array(turns)) => check_turns(turns, &mut errs),
        Some(_) => errs.push(conv_type_err("turns", "array")),
        None => errs.push(conv_type_err("turns", "array (required)")),
    }

    match obj.get("tasks") {
        Some(Value::Array(tasks)) => {
            for (i, task) in tasks.iter().enumerate() {
                check_task(i, task, &mut errs);
            }
        }
        Some(_) => errs.push(conv_type_err("tasks", "array")),
        None => {}
    }

    match obj.get("decisions") {
        Some(Value::Array(decisions)) => {
            for (i, decision) in decisions.iter().enumerate() {
                check_decision(i, decision, &mut errs);
            }
        }
        Some(_) => errs.push(conv_type_err("decisions", "array")),
        None => {}
    }

    match obj.get("automated") {
        Some(Value::Bool(_)) => {}
        Some(_) => errs.push(conv_type_err("automated", "boolean")),
        None => errs.push(conv_type_err("automated", "boolean (required)")),
    }

    if let Some(v) = obj.get("compliant") {
        if !v.is_boolean() {
            errs.push(conv_type_err("compliant", "boolean"));
        }
    }
    if let Some(v) = obj.get("group") {
        if !v.is_string() {
            errs.push(conv_type_err("group", "string"));
        }
    }
    match obj.get("survey") {
        Some(Value::Object(survey)) => check_survey(survey, &mut errs),
        Some(_) => errs.push(conv_type_err("survey", "object")),
        None => {}
    }

    errs
}

fn conv_type_err(field: &str, expected: &str) -> Violation {
    Violation::new(
        rules::CONV_FIELD_TYPE,
        format!("field '{field}' must be a {expected}"),
    )
}

fn turn_type_err(idx: usize, field: &str, expected: &str) -> Violation {
    Violation::new(
        rules::TURN_FIELD_TYPE,
        format!("turns[{idx}].{field} must be a {expected}"),
    )
}

fn check_turns(turns: &[Value], errs: &mut Vec<Violation>) {
    for (i, turn) in turns.iter().enumerate() {
        let Some(obj) = turn.as_object() else {
            errs.push(Violation::new(
                rules::TURN_FIELD_TYPE,
                format!("turns[{i}] must be an object"),
            ));
            continue;
        };
        check_turn_fields(i, obj, errs);
    }
}

fn check_turn_fields(i: usize, obj: &JsonMap, errs: &mut Vec<Violation>) {
    match obj.get("index") {
        Some(v) if v.as_u64().is_some() => {}
        _ => errs.push(turn_type_err(i, "index", "non-negative integer (required)")),
    }
    match obj.get("speaker") {
        Some(Value::String(s)) if s == "user" || s == "bot" => {}
        _ => errs.push(Violation::new(
            rules::SPEAKER_INVALID,
            format!("turns[{i}].speaker must be \"user\" or \"bot\""),
        )),
    }
    match obj.get("text") {
        Some(Value::String(_)) => {}
        _ => errs.push(turn_type_err(i, "text", "string (required)")),
    }
    match obj.get("timestamp_ms") {
        Some(v) if v.as_i64().is_some() => {}
        _ => errs.push(turn_type_err(i, "timestamp_ms", "integer (required)")),
    }
    for field in ["predicted_intent", "gold_intent", "reference_text"] {
        if let Some(v) = obj.get(field) {
            if !v.is_string() {
                errs.push(turn_type_err(i, field, "string"));
            }
        }
    }
    if let Some(v) = obj.get("response_latency_ms") {
        match v.as_i64() {
            Some(ms) if ms < 0 => errs.push(Violation::new(
                rules::LATENCY_NEGATIVE,
                format!("turns[{i}].response_latency_ms is negative ({ms})"),
            )),
            Some(_) => {}
            None => errs.push(turn_type_err(i, "response_latency_ms", "integer")),
        }
    }
    for field in ["response_embedding", "reference_embedding"] {
        if let Some(v) = obj.get(field) {
            match v.as_array() {
                Some(xs) if xs.iter().all(|x| x.as_f64().is_some()) => {}
                _ => errs.push(turn_type_err(i, field, "array of numbers")),
            }
        }
    }
    if let Some(v) = obj.get("context_dist") {
        match v.as_object() {
            Some(dist) => check_context_dist(i, dist, errs),
            None => errs.push(turn_type_err(i, "context_dist", "object of numbers")),
        }
    }
}

fn check_context_dist(i: usize, dist: &JsonMap, errs: &mut Vec<Violation>) {
    if dist.is_empty() {
        errs.push(Violation::new(
            rules::DIST_EMPTY,
            format!("turns[{i}].context_dist has no entries"),
        ));
        return;
    }
    let mut sum = 0.0;
    let mut typed_ok = true;
    for (label, v) in dist {
        match v.as_f64() {
            Some(p) if p < 0.0 => {
                errs.push(Violation::new(
                    rules::DIST_NEGATIVE_PROB,
                    format!("turns[{i}].context_dist[{label:?}] is negative ({p})"),
                ));
                sum += p;
            }
            Some(p) => sum += p,
            None => {
                typed_ok = false;
                errs.push(turn_type_err(i, "context_dist", "object of numbers"));
            }
        }
    }
    if typed_ok && (sum - 1.0).abs() > DIST_SUM_TOLERANCE {
        errs.push(Violation::new(
            rules::DIST_NOT_NORMALIZED,
            format!("turns[{i}].context_dist sums to {sum}, expected 1"),
        ));
    }
}

fn check_task(i: usize, task: &Value, errs: &mut Vec<Violation>) {
    let Some(obj) = task.as_object() else {
        errs.push(conv_type_err(&format!("tasks[{i}]"), "object"));
        return;
    };
    match obj.get("task_id") {
        Some(Value::String(_)) => {}
        _ => errs.push(conv_type_err(&format!("tasks[{i}].task_id"), "string (required)")),
    }
    let mut flags = [false; 2];
    for (slot, field) in ["initiated", "completed"].iter().enumerate() {
        match obj.get(*field) {
            Some(Value::Bool(b)) => flags[slot] = *b,
            _ => errs.push(conv_type_err(
                &format!("tasks[{i}].{field}"),
                "boolean (required)",
            )),
        }
    }
    if flags[1] && !flags[0] {
        errs.push(Violation::new(
            rules::TASK_COMPLETED_IMPLIES_INITIATED,
            format!("tasks[{i}] is completed but was never initiated"),
        ));
    }
}

fn check_decision(i: usize, decision: &Value, errs: &mut Vec<Violation>) {
    let Some(obj) = decision.as_object() else {
        errs.push(conv_type_err(&format!("decisions[{i}]"), "object"));
        return;
    };
    match obj.get("decision_id") {
        Some(Value::String(_)) => {}
        _ => errs.push(conv_type_err(
            &format!("decisions[{i}].decision_id"),
            "string (required)",
        )),
    }
    match obj.get("outcome_value").and_then(Value::as_f64) {
        Some(v) if v.is_finite() => {}
        Some(v) => errs.push(Violation::new(
            rules::OUTCOME_NOT_FINITE,
            format!("decisions[{i}].outcome_value is not finite ({v})"),
        )),
        None => errs.push(conv_type_err(
            &format!("decisions[{i}].outcome_value"),
            "number (required)",
        )),
    }
    if let Some(v) = obj.get("group") {
        if !v.is_string() {
            errs.push(conv_type_err(&format!("decisions[{i}].group"), "string"));
        }
    }
    for field in ["bias_free", "explainable"] {
        if let Some(v) = obj.get(field) {
            if !v.is_boolean() {
                errs.push(conv_type_err(&format!("decisions[{i}].{field}"), "boolean"));
            }
        }
    }
}

fn check_survey(survey: &JsonMap, errs: &mut Vec<Violation>) {
    let csat = match survey.get("csat_score") {
        Some(v) => match v.as_i64() {
            Some(score) => Some(score),
            None => {
                errs.push(conv_type_err("survey.csat_score", "integer"));
                None
            }
        },
        None => None,
    };
    let scale = match survey.get("csat_scale_max") {
        Some(v) => match v.as_i64() {
            Some(s) => Some(s),
            None => {
                errs.push(conv_type_err("survey.csat_scale_max", "integer"));
                None
            }
        },
        None => None,
    };
    if csat.is_some() || scale.is_some() {
        match scale {
            Some(5) | Some(10) => {
                if let Some(score) = csat {
                    let max = scale.unwrap();
                    if score < 1 || score > max {
                        errs.push(Violation::new(
                            rules::CSAT_OUT_OF_RANGE,
                            format!("survey.csat_score {score} outside 1..={max}"),
                        ));
                    }
                }
            }
            Some(other) => errs.push(Violation::new(
                rules::CSAT_SCALE_INVALID,
                format!("survey.csat_scale_max must be 5 or 10, got {other}"),
            )),
            None => {
                if csat.is_some() {
                    errs.push(Violation::new(
                        rules::CSAT_SCALE_INVALID,
                        "survey.csat_score present without csat_scale_max",
                    ));
                }
            }
        }
    }
    if let Some(v) = survey.get("nps_rating") {
        match v.as_i64() {
            Some(r) if (0..=10).contains(&r) => {}
            Some(r) => errs.push(Violation::new(
                rules::NPS_OUT_OF_RANGE,
                format!("survey.nps_rating {r} outside 0..=10"),
            )),
            None => errs.push(conv_type_err("survey.nps_rating", "integer")),
        }
    }
}

fn unknown_field_warnings(raw: &Value) -> Vec<Violation> {
    let mut warnings = Vec::new();
    let Some(obj) = raw.as_object() else {
        return warnings;
    };
    let mut warn = |path: String| {
        warnings.push(Violation::new(
            rules::UNKNOWN_FIELD,
            format!("unknown field '{path}' ignored"),
        ));
    };
    for key in obj.keys() {
        if !CONV_KEYS.contains(&key.as_str()) {
            warn(key.clone());
        }
    }
    scan_unknown(obj, "turns", &TURN_KEYS, &mut warn);
    scan_unknown(obj, "tasks", &TASK_KEYS, &mut warn);
    scan_unknown(obj, "decisions", &DECISION_KEYS, &mut warn);
    if let Some(Value::Object(survey)) = obj.get("survey") {
        for key in survey.keys() {
            if !SURVEY_KEYS.contains(&key.as_str()) {
                warn(format!("survey.{key}"));
            }
        }
    }
    warnings
}

fn scan_unknown(obj: &JsonMap, field: &str, known: &[&str], warn: &mut impl FnMut(String)) {
    if let Some(Value::Array(items)) = obj.get(field) {
        for (i, item) in items.iter().enumerate() {
            if let Some(item) = item.as_object() {
                for key in item.keys() {
                    if !known.contains(&key.as_str()) {
                        warn(format!("{field}[{i}].{key}"));
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Typed (semantic) validation
// ---------------------------------------------------------------------------

/// Check the semantic invariants of an already-typed conversation record.
pub fn conversation_violations(record: &ConversationRecord) -> Vec<Violation> {
    let mut errs = Vec::new();

    let indices_ok = record
        .turns
        .iter()
        .enumerate()
        .all(|(i, t)| t.index == i as u64);
    if !indices_ok {
        errs.push(Violation::new(
            rules::TURN_INDEX_SEQUENCE,
            format!("turn indices must be 0..{}", record.turns.len()),
        ));
    }
    if record
        .turns
        .windows(2)
        .any(|w| w[1].timestamp_ms < w[0].timestamp_ms)
    {
        errs.push(Violation::new(
            rules::TIMESTAMP_ORDER,
            "turn timestamps must be non-decreasing",
        ));
    }

    for turn in &record.turns {
        let i = turn.index;
        match turn.speaker {
            Speaker::User => {
                if turn.response_latency_ms.is_some()
                    || turn.response_embedding.is_some()
                    || turn.reference_text.is_some()
                    || turn.reference_embedding.is_some()
                {
                    errs.push(Violation::new(
                        rules::BOT_FIELD_ON_USER_TURN,
                        format!("turn {i}: response fields are only valid on bot turns"),
                    ));
                }
            }
            Speaker::Bot => {
                if turn.predicted_intent.is_some() || turn.gold_intent.is_some() {
                    errs.push(Violation::new(
                        rules::INTENT_ON_BOT_TURN,
                        format!("turn {i}: intent labels are only valid on user turns"),
                    ));
                }
            }
        }
        if let (Some(a), Some(b)) = (&turn.response_embedding, &turn.reference_embedding) {
            if a.len() != b.len() || a.is_empty() {
                errs.push(Violation::new(
                    rules::EMBEDDING_DIM_MISMATCH,
                    format!(
                        "turn {i}: embeddings must share a dimension >= 1 (got {} and {})",
                        a.len(),
                        b.len()
                    ),
                ));
            }
        }
        for emb in [&turn.response_embedding, &turn.reference_embedding]
            .into_iter()
            .flatten()
        {
            if emb.iter().any(|x| !x.is_finite()) {
                errs.push(Violation::new(
                    rules::TURN_FIELD_TYPE,
                    format!("turn {i}: embedding components must be finite"),
                ));
            }
        }
    }

    for (i, task) in record.tasks.iter().enumerate() {
        if task.completed && !task.initiated {
            errs.push(Violation::new(
                rules::TASK_COMPLETED_IMPLIES_INITIATED,
                format!("tasks[{i}] is completed but was never initiated"),
            ));
        }
    }

    for (i, decision) in record.decisions.iter().enumerate() {
        if !decision.outcome_value.is_finite() {
            errs.push(Violation::new(
                rules::OUTCOME_NOT_FINITE,
                format!("decisions[{i}].outcome_value is not finite"),
            ));
        }
    }

    if let Some(survey) = &record.survey {
        match (survey.csat_score, survey.csat_scale_max) {
            (Some(_), None) => errs.push(Violation::new(
                rules::CSAT_SCALE_INVALID,
                "survey.csat_score present without csat_scale_max",
            )),
            (score, Some(scale)) => {
                if scale != 5 && scale != 10 {
                    errs.push(Violation::new(
                        rules::CSAT_SCALE_INVALID,
                        format!("survey.csat_scale_max must be 5 or 10, got {scale}"),
                    ));
                } else if let Some(score) = score {
                    if score < 1 || score > scale {
                        errs.push(Violation::new(
                            rules::CSAT_OUT_OF_RANGE,
                            format!("survey.csat_score {score} outside 1..={scale}"),
                        ));
                    }
                }
            }
            (None, None) => {}
        }
        if let Some(r) = survey.nps_rating {
            if r > 10 {
                errs.push(Violation::new(
                    rules::NPS_OUT_OF_RANGE,
                    format!("survey.nps_rating {r} outside 0..=10"),
                ));
            }
        }
    }

    errs
        .into_iter()
        .map(|v| v.in_record(record.conversation_id.clone()))
        .collect()
}

/// Check the ops log invariants.
pub fn ops_violations(ops: &OpsLog) -> Vec<Violation> {
    let mut errs = Vec::new();
    for (name, intervals) in [("availability", &ops.availability), ("expected", &ops.expected)] {
        for &(start, end) in intervals {
            if start >= end {
                errs.push(Violation::new(
                    rules::INTERVAL_INVALID,
                    format!("{name} interval [{start}, {end}) must have start < end"),
                ));
            }
        }
    }
    let mut currency: Option<&str> = None;
    for (i, cost) in ops.costs.iter().enumerate() {
        if !cost.amount.is_finite() || cost.amount < 0.0 {
            errs.push(Violation::new(
                rules::COST_NEGATIVE,
                format!("costs[{i}].amount must be a non-negative finite number"),
            ));
        }
        match currency {
            None => currency = Some(&cost.currency),
            Some(c) if c == cost.currency => {}
            Some(c) => errs.push(Violation::new(
                rules::COST_CURRENCY_MIXED,
                format!("costs[{i}] uses {} but earlier entries use {c}", cost.currency),
            )),
        }
    }
    errs.into_iter().map(|v| v.in_record("ops")).collect()
}

impl EvaluationDataset {
    /// Build a validated dataset from typed records.
    ///
    /// Runs every semantic invariant, rejects duplicate conversation ids and
    /// empty record sets, and stores conversations sorted by id.
    pub fn new(
        conversations: Vec<ConversationRecord>,
        ops: Option<OpsLog>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, Vec<Violation>> {
        let mut errs = Vec::new();
        if conversations.is_empty() {
            errs.push(Violation::new(rules::EMPTY_DATASET, "no conversations"));
        }
        let mut seen = BTreeSet::new();
        for record in &conversations {
            errs.extend(conversation_violations(record));
            if !seen.insert(record.conversation_id.clone()) {
                errs.push(
                    Violation::new(
                        rules::DUP_ID,
                        format!("duplicate conversation_id {:?}", record.conversation_id),
                    )
                    .in_record(record.conversation_id.clone()),
                );
            }
        }
        if let Some(ops) = &ops {
            errs.extend(ops_violations(ops));
        }
        if !errs.is_empty() {
            return Err(errs);
        }
        let mut conversations = conversations;
        conversations.sort_by(|a, b| a.conversation_id.cmp(&b.conversation_id));
        Ok(Self {
            conversations,
            ops,
            metadata,
        })
    }
}

// ---------------------------------------------------------------------------
// File parsing
// ---------------------------------------------------------------------------

/// Parse and validate a conversation file (and optional ops file).
///
/// Lines are parsed in parallel; the resulting dataset is assembled in
/// `conversation_id` order, so the output is independent of both input order
/// and thread count.
pub fn parse_dataset(
    conversations_path: &Path,
    ops_path: Option<&Path>,
    mode: ParseMode,
) -> Result<(EvaluationDataset, ValidationReport), IngestError> {
    let text = std::fs::read_to_string(conversations_path).map_err(|source| IngestError::Io {
        path: conversations_path.display().to_string(),
        source,
    })?;
    let ops_text = match ops_path {
        Some(path) => Some(
            std::fs::read_to_string(path).map_err(|source| IngestError::Io {
                path: path.display().to_string(),
                source,
            })?,
        ),
        None => None,
    };
    parse_dataset_str(&text, ops_text.as_deref(), mode)
}

/// In-memory variant of [`parse_dataset`].
pub fn parse_dataset_str(
    conversations_text: &str,
    ops_text: Option<&str>,
    mode: ParseMode,
) -> Result<(EvaluationDataset, ValidationReport), IngestError> {
    let mut report = ValidationReport::default();
    let mut metadata = BTreeMap::new();

    let lines: Vec<(u64, &str)> = conversations_text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();

    // Header: a leading object carrying schema_version and string metadata.
    let mut record_lines = &lines[..];
    let header = lines.first().and_then(|(no, text)| {
        let value: Value = serde_json::from_str(text).ok()?;
        let obj = value.as_object()?;
        obj.contains_key("schema_version").then(|| (*no, obj.clone()))
    });
    match header {
        Some((line_no, obj)) => {
            record_lines = &lines[1..];
            match obj.get("schema_version").and_then(Value::as_str) {
                Some(SCHEMA_VERSION) => {}
                Some(other) => {
                    report.errors.push(
                        Violation::new(
                            rules::SCHEMA_VERSION,
                            format!("unsupported schema version {other:?}, expected {SCHEMA_VERSION:?}"),
                        )
                        .at_line(line_no),
                    );
                    return Err(IngestError::Validation { report });
                }
                None => {
                    report.errors.push(
                        Violation::new(rules::SCHEMA_VERSION, "schema_version must be a string")
                            .at_line(line_no),
                    );
                    return Err(IngestError::Validation { report });
                }
            }
            for (key, value) in &obj {
                match value {
                    Value::String(s) => {
                        metadata.insert(key.clone(), s.clone());
                    }
                    _ => report.warnings.push(
                        Violation::new(
                            rules::HEADER_FIELD_TYPE,
                            format!("header field '{key}' is not a string; ignored"),
                        )
                        .at_line(line_no),
                    ),
                }
            }
        }
        None => {
            let violation = Violation::new(
                rules::SCHEMA_VERSION,
                format!("missing header line with schema_version {SCHEMA_VERSION:?}"),
            );
            match mode {
                ParseMode::Strict => {
                    report.errors.push(violation);
                }
                ParseMode::Lenient => {
                    report.warnings.push(violation);
                    metadata.insert("schema_version".to_owned(), SCHEMA_VERSION.to_owned());
                }
            }
        }
    }

    report.record_count = record_lines.len();

    // Line-parallel JSON parsing; everything after this merges sequentially
    // in input order.
    let parsed: Vec<(u64, Result<Value, String>)> = record_lines
        .par_iter()
        .map(|(no, text)| {
            (
                *no,
                serde_json::from_str::<Value>(text).map_err(|e| e.to_string()),
            )
        })
        .collect();

    let mut accepted: Vec<ConversationRecord> = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    for (line_no, parse_result) in parsed {
        let raw = match parse_result {
            Ok(raw) => raw,
            Err(msg) => {
                report.errors.push(
                    Violation::new(rules::JSON_MALFORMED, format!("invalid JSON: {msg}"))
                        .at_line(line_no),
                );
                continue;
            }
        };
        let conv_id = raw
            .get("conversation_id")
            .and_then(Value::as_str)
            .map(str::to_owned);

        let mut errs = validate_record(&raw);
        if let Some(id) = &conv_id {
            // Dropped records still claim their id so later duplicates are
            // flagged no matter which copy was valid.
            if !seen_ids.insert(id.clone()) {
                errs.push(
                    Violation::new(rules::DUP_ID, format!("duplicate conversation_id {id:?}"))
                        .in_record(id.clone()),
                );
            }
        }
        if mode == ParseMode::Strict {
            report.warnings.extend(
                unknown_field_warnings(&raw)
                    .into_iter()
                    .map(|v| v.at_line(line_no)),
            );
        }
        if errs.is_empty() {
            let record: ConversationRecord =
                serde_json::from_value(raw).expect("validated record converts");
            accepted.push(record);
        } else {
            report.errors.extend(errs.into_iter().map(|v| {
                let v = v.at_line(line_no);
                match (&v.record, &conv_id) {
                    (None, Some(id)) => v.in_record(id.clone()),
                    _ => v,
                }
            }));
        }
    }

    let ops = match ops_text {
        Some(text) => parse_ops(text, &mut report),
        None => None,
    };

    report.accepted_count = accepted.len();
    report.dropped_count = report.record_count - accepted.len();

    if mode == ParseMode::Strict && !report.errors.is_empty() {
        return Err(IngestError::Validation { report });
    }
    if accepted.is_empty() {
        report
            .errors
            .push(Violation::new(rules::EMPTY_DATASET, "no valid records accepted"));
        return Err(IngestError::Validation { report });
    }

    accepted.sort_by(|a, b| a.conversation_id.cmp(&b.conversation_id));
    let dataset = EvaluationDataset {
        conversations: accepted,
        ops,
        metadata,
    };
    Ok((dataset, report))
}

fn parse_ops(text: &str, report: &mut ValidationReport) -> Option<OpsLog> {
    let parsed: Result<OpsLog, _> = serde_json::from_str(text);
    match parsed {
        Ok(ops) => {
            let errs = ops_violations(&ops);
            if errs.is_empty() {
                Some(ops)
            } else {
                report.errors.extend(errs);
                // Lenient mode drops the ops log the way it drops bad records.
                None
            }
        }
        Err(err) => {
            report.errors.push(
                Violation::new(rules::OPS_MALFORMED, format!("ops file: {err}")).in_record("ops"),
            );
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Write a dataset back out as NDJSON (header line first, records sorted by
/// conversation id). Round-trips through [`parse_dataset_str`] with an equal
/// canonical digest.
pub fn write_ndjson(dataset: &EvaluationDataset, out: &mut impl Write) -> std::io::Result<()> {
    let mut header = dataset.metadata().clone();
    header
        .entry("schema_version".to_owned())
        .or_insert_with(|| SCHEMA_VERSION.to_owned());
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for record in dataset.conversations() {
        writeln!(out, "{}", serde_json::to_string(record)?)?;
    }
    Ok(())
}

/// Serialize a dataset to an NDJSON string.
pub fn to_ndjson_string(dataset: &EvaluationDataset) -> String {
    let mut buf = Vec::new();
    write_ndjson(dataset, &mut buf).expect("writing to Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Serialize the ops log as the single-object ops file format.
pub fn ops_to_json_string(ops: &OpsLog) -> String {
    serde_json::to_string(ops).expect("ops log serializes")
}
