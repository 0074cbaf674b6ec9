//! Conversation-evaluation toolkit.
//!
//! Ingests structured chatbot interaction logs and computes a four-theme
//! metric scorecard: cognitive/conversational intelligence, user experience,
//! operational efficiency, and ethical/governance compliance.
//!
//! The cognitive metrics (intent accuracy and F1, context-retention KL
//! divergence, corpus BLEU coherence, task completion, embedding cosine
//! similarity, turn-taking balance) and the governance fairness score
//! (1-D Wasserstein distance over decision outcomes) are computed from log
//! annotations alone; the toolkit never runs a model. Reports are a pure
//! function of `(dataset, config)` and serialize canonically, so repeated
//! runs are byte-identical.

pub mod cognitive;
pub mod datamodel;
pub mod efficiency;
pub mod experience;
pub mod governance;
pub mod ingest;
pub mod scorecard;

pub use datamodel::{
    canonical_digest, ConversationRecord, Distribution, EvaluationDataset, MetricValue, OpsLog,
    Theme,
};
pub use ingest::{parse_dataset, synthesize_fixture, ParseMode, ValidationReport};
pub use scorecard::{
    build_scorecard, compare_scorecards, render_report, EvalConfig, ReportFormat, Scorecard,
};
