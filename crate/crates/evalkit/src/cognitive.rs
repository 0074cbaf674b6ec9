//! Cognitive and conversational-intelligence metrics.
//!
//! Seven metrics over a validated dataset: intent accuracy and F1,
//! context-retention KL divergence between adjacent turns, corpus-BLEU
//! conversational coherence, task completion rate, embedding cosine
//! similarity, and turn-taking balance.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::datamodel::{Distribution, EvaluationDataset, MetricValue, Speaker, Theme};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CognitiveError {
    #[error("reference token list is empty")]
    EmptyReference,
    #[error("invalid BLEU config: {0}")]
    InvalidConfig(String),
}

// ---------------------------------------------------------------------------
// KL divergence / context retention
// ---------------------------------------------------------------------------

/// Default additive smoothing mass for KL divergence.
pub const DEFAULT_KL_EPSILON: f64 = 1e-9;

/// KL divergence D(p || q) in nats over the union of both label sets.
///
/// Both distributions are epsilon-smoothed (add `epsilon` to every cell of
/// the union support, renormalize by the resulting total) so that disjoint
/// support yields a large but finite divergence. `kl_divergence(p, p, e)` is
/// exactly zero because every term is `x * ln(1)`.
pub fn kl_divergence(p: &Distribution, q: &Distribution, epsilon: f64) -> f64 {
    let labels: BTreeSet<&str> = p.labels().chain(q.labels()).collect();
    let p_total: f64 = labels.iter().map(|l| p.mass(l) + epsilon).sum();
    let q_total: f64 = labels.iter().map(|l| q.mass(l) + epsilon).sum();
    labels
        .iter()
        .map(|l| {
            let pi = (p.mass(l) + epsilon) / p_total;
            let qi = (q.mass(l) + epsilon) / q_total;
            pi * (pi / qi).ln()
        })
        .sum()
}

/// Mean and max adjacent-turn divergence.
#[derive(Debug, Clone)]
pub struct ContextRetention {
    pub mean: MetricValue,
    pub max: MetricValue,
}

/// Mean KL divergence between the context distributions of adjacent turns
/// (previous turn against current), plus the worst pair as an auxiliary.
/// Lower is better: zero means the logged belief never shifted.
pub fn context_retention(dataset: &EvaluationDataset, epsilon: f64) -> ContextRetention {
    let mut divergences = Vec::new();
    let mut adjacent_pairs = 0usize;
    for conv in dataset.conversations() {
        for pair in conv.turns.windows(2) {
            adjacent_pairs += 1;
            if let (Some(prev), Some(cur)) = (&pair[0].context_dist, &pair[1].context_dist) {
                divergences.push(kl_divergence(prev, cur, epsilon));
            }
        }
    }
    let missing = adjacent_pairs - divergences.len();
    let note = "lower is better; 0 means adjacent context distributions are identical";
    if divergences.is_empty() {
        return ContextRetention {
            mean: MetricValue::absent(Theme::Cognitive, "context_retention", "nats", missing)
                .with_note(note),
            max: MetricValue::absent(Theme::Cognitive, "context_retention_max", "nats", missing),
        };
    }
    let n = divergences.len();
    let mean = divergences.iter().sum::<f64>() / n as f64;
    let max = divergences.iter().cloned().fold(f64::MIN, f64::max);
    ContextRetention {
        mean: MetricValue::present(Theme::Cognitive, "context_retention", "nats", mean, n, missing)
            .with_note(note),
        max: MetricValue::present(Theme::Cognitive, "context_retention_max", "nats", max, n, missing),
    }
}

// ---------------------------------------------------------------------------
// Intent accuracy and F1
// ---------------------------------------------------------------------------

/// Fraction of user turns whose predicted intent equals the gold intent
/// (exact, case-sensitive string match).
pub fn nlu_accuracy(dataset: &EvaluationDataset) -> MetricValue {
    let mut matches = 0usize;
    let mut labeled = 0usize;
    let mut unlabeled = 0usize;
    for turn in dataset.turns().filter(|t| t.speaker == Speaker::User) {
        match (&turn.predicted_intent, &turn.gold_intent) {
            (Some(pred), Some(gold)) => {
                labeled += 1;
                if pred == gold {
                    matches += 1;
                }
            }
            _ => unlabeled += 1,
        }
    }
    if labeled == 0 {
        MetricValue::absent(Theme::Cognitive, "nlu_accuracy", "fraction", unlabeled)
    } else {
        MetricValue::present(
            Theme::Cognitive,
            "nlu_accuracy",
            "fraction",
            matches as f64 / labeled as f64,
            labeled,
            unlabeled,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class and aggregate intent-classification F1.
#[derive(Debug, Clone)]
pub struct F1Result {
    pub per_class: BTreeMap<String, ClassScores>,
    /// Unweighted mean F1 over classes that occur in the gold labels.
    pub macro_f1: f64,
    /// F1 from pooled counts; equals accuracy for single-label prediction.
    pub micro_f1: f64,
    pub labeled_pairs: usize,
    pub unlabeled_user_turns: usize,
}

/// Intent F1 from the (gold, predicted) confusion over labeled user turns.
/// Returns `None` when no turn carries both labels. 0/0 precision or recall
/// is defined as 0.
pub fn intent_f1(dataset: &EvaluationDataset) -> Option<F1Result> {
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    let mut unlabeled = 0usize;
    for turn in dataset.turns().filter(|t| t.speaker == Speaker::User) {
        match (&turn.gold_intent, &turn.predicted_intent) {
            (Some(gold), Some(pred)) => pairs.push((gold.as_str(), pred.as_str())),
            _ => unlabeled += 1,
        }
    }
    if pairs.is_empty() {
        return None;
    }

    let classes: BTreeSet<&str> = pairs.iter().flat_map(|(g, p)| [*g, *p]).collect();
    let mut per_class = BTreeMap::new();
    let mut pooled_tp = 0usize;
    let mut pooled_fp = 0usize;
    let mut pooled_fn = 0usize;
    let mut macro_sum = 0.0;
    let mut gold_classes = 0usize;
    for class in classes {
        let tp = pairs.iter().filter(|(g, p)| *g == class && *p == class).count();
        let fp = pairs.iter().filter(|(g, p)| *g != class && *p == class).count();
        let fn_ = pairs.iter().filter(|(g, p)| *g == class && *p != class).count();
        let precision = ratio_or_zero(tp, tp + fp);
        let recall = ratio_or_zero(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.insert(class.to_owned(), ClassScores { precision, recall, f1 });
        pooled_tp += tp;
        pooled_fp += fp;
        pooled_fn += fn_;
        if tp + fn_ > 0 {
            // Class occurs in gold; macro averages over exactly these.
            macro_sum += f1;
            gold_classes += 1;
        }
    }
    let micro_p = ratio_or_zero(pooled_tp, pooled_tp + pooled_fp);
    let micro_r = ratio_or_zero(pooled_tp, pooled_tp + pooled_fn);
    let micro_f1 = if micro_p + micro_r == 0.0 {
        0.0
    } else {
        2.0 * micro_p * micro_r / (micro_p + micro_r)
    };
    Some(F1Result {
        per_class,
        macro_f1: macro_sum / gold_classes as f64,
        micro_f1,
        labeled_pairs: pairs.len(),
        unlabeled_user_turns: unlabeled,
    })
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

/// Zero-precision handling for BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Any zero n-gram precision (for a usable order) makes the score 0.
    None,
    /// Zero precisions are replaced by the given epsilon before the log.
    AddEpsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleuConfig {
    pub max_n: usize,
    /// Per-order weights, length `max_n`, summing to 1.
    pub weights: Vec<f64>,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self::uniform(4)
    }
}

impl BleuConfig {
    /// Uniform weights 1/max_n, no smoothing.
    pub fn uniform(max_n: usize) -> Self {
        Self {
            max_n,
            weights: vec![1.0 / max_n as f64; max_n],
            smoothing: Smoothing::None,
        }
    }

    pub fn validate(&self) -> Result<(), CognitiveError> {
        if self.max_n < 1 {
            return Err(CognitiveError::InvalidConfig("max_n must be >= 1".into()));
        }
        if self.weights.len() != self.max_n {
            return Err(CognitiveError::InvalidConfig(format!(
                "weights must have length max_n = {}, got {}",
                self.max_n,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CognitiveError::InvalidConfig(
                "weights must be non-negative and finite".into(),
            ));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CognitiveError::InvalidConfig(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        if let Smoothing::AddEpsilon(eps) = self.smoothing {
            if !eps.is_finite() || eps <= 0.0 {
                return Err(CognitiveError::InvalidConfig(
                    "smoothing epsilon must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Clipped n-gram counts pooled over one or more candidate/reference pairs.
#[derive(Debug, Clone)]
struct NgramStats {
    /// Per order 1..=max_n: clipped matches and candidate n-gram totals.
    matched: Vec<u64>,
    total: Vec<u64>,
    candidate_len: u64,
    reference_len: u64,
}

impl NgramStats {
    fn new(max_n: usize) -> Self {
        Self {
            matched: vec![0; max_n],
            total: vec![0; max_n],
            candidate_len: 0,
            reference_len: 0,
        }
    }

    fn accumulate(&mut self, candidate: &[&str], reference: &[&str]) {
        self.candidate_len += candidate.len() as u64;
        self.reference_len += reference.len() as u64;
        for n in 1..=self.matched.len() {
            if candidate.len() < n {
                break;
            }
            let mut ref_counts: HashMap<&[&str], u64> = HashMap::new();
            if reference.len() >= n {
                for gram in reference.windows(n) {
                    *ref_counts.entry(gram).or_insert(0) += 1;
                }
            }
            let mut cand_counts: HashMap<&[&str], u64> = HashMap::new();
            for gram in candidate.windows(n) {
                *cand_counts.entry(gram).or_insert(0) += 1;
            }
            for (gram, count) in &cand_counts {
                self.total[n - 1] += count;
                if let Some(&available) = ref_counts.get(gram) {
                    self.matched[n - 1] += (*count).min(available);
                }
            }
        }
    }
}

/// Per-order detail behind a BLEU score.
#[derive(Debug, Clone)]
pub struct BleuBreakdown {
    pub score: f64,
    pub brevity_penalty: f64,
    /// Raw clipped precision per order (1-indexed at `precisions[n-1]`);
    /// `None` when the candidate had no n-grams of that order.
    pub precisions: Vec<Option<f64>>,
    pub candidate_len: u64,
    pub reference_len: u64,
}

fn score_stats(stats: &NgramStats, config: &BleuConfig) -> BleuBreakdown {
    let precisions: Vec<Option<f64>> = (0..config.max_n)
        .map(|i| {
            (stats.total[i] > 0).then(|| stats.matched[i] as f64 / stats.total[i] as f64)
        })
        .collect();

    if stats.candidate_len == 0 {
        return BleuBreakdown {
            score: 0.0,
            brevity_penalty: 0.0,
            precisions,
            candidate_len: 0,
            reference_len: stats.reference_len,
        };
    }

    let c = stats.candidate_len as f64;
    let r = stats.reference_len as f64;
    let brevity_penalty = if stats.candidate_len > stats.reference_len {
        1.0
    } else {
        (1.0 - r / c).exp()
    };

    // Orders the candidate could not produce are skipped and the remaining
    // weights renormalized.
    let usable_weight: f64 = precisions
        .iter()
        .zip(&config.weights)
        .filter_map(|(p, w)| p.map(|_| *w))
        .sum();
    let mut log_sum = 0.0;
    let mut zero_precision = false;
    for (p, w) in precisions.iter().zip(&config.weights) {
        let Some(p) = *p else { continue };
        let w = if usable_weight > 0.0 { w / usable_weight } else { 0.0 };
        let p = match (p, config.smoothing) {
            (0.0, Smoothing::AddEpsilon(eps)) => eps,
            (p, _) => p,
        };
        if p == 0.0 {
            zero_precision = true;
            break;
        }
        log_sum += w * p.ln();
    }

    let score = if zero_precision || precisions.iter().all(Option::is_none) {
        0.0
    } else {
        brevity_penalty * log_sum.exp()
    };
    BleuBreakdown {
        score,
        brevity_penalty,
        precisions,
        candidate_len: stats.candidate_len,
        reference_len: stats.reference_len,
    }
}

/// Sentence-level BLEU with clipped n-gram precision and brevity penalty.
///
/// The candidate and reference are already-tokenized word lists. Empty
/// candidates score 0; an empty reference is an error.
pub fn bleu<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    config: &BleuConfig,
) -> Result<f64, CognitiveError> {
    Ok(bleu_detailed(candidate, reference, config)?.score)
}

/// [`bleu`] with the per-order precisions and brevity penalty exposed.
pub fn bleu_detailed<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    config: &BleuConfig,
) -> Result<BleuBreakdown, CognitiveError> {
    config.validate()?;
    if reference.is_empty() {
        return Err(CognitiveError::EmptyReference);
    }
    let candidate: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let reference: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let mut stats = NgramStats::new(config.max_n);
    stats.accumulate(&candidate, &reference);
    Ok(score_stats(&stats, config))
}

/// Reproducible tokenization for coherence scoring: lowercase, split on
/// Unicode whitespace, strip leading/trailing non-alphanumeric characters,
/// drop tokens that end up empty.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_owned()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Corpus-level BLEU of bot responses against their reference texts.
///
/// Micro-pooled: clipped match and candidate totals are summed over all
/// annotated bot turns before the precisions are formed, and the brevity
/// penalty uses the summed lengths.
pub fn conversational_coherence(dataset: &EvaluationDataset, config: &BleuConfig) -> MetricValue {
    if let Err(err) = config.validate() {
        // An invalid config is a caller bug; surface it loudly.
        panic!("invalid BLEU config: {err}");
    }
    let mut stats = NgramStats::new(config.max_n);
    let mut with_reference = 0usize;
    let mut without_reference = 0usize;
    for conv in dataset.conversations() {
        for turn in conv.bot_turns() {
            match &turn.reference_text {
                Some(reference) => {
                    with_reference += 1;
                    let cand_tokens = tokenize(&turn.text);
                    let ref_tokens = tokenize(reference);
                    let cand: Vec<&str> = cand_tokens.iter().map(String::as_str).collect();
                    let refr: Vec<&str> = ref_tokens.iter().map(String::as_str).collect();
                    stats.accumulate(&cand, &refr);
                }
                None => without_reference += 1,
            }
        }
    }
    if with_reference == 0 {
        return MetricValue::absent(
            Theme::Cognitive,
            "conversational_coherence",
            "bleu",
            without_reference,
        )
        .with_note("requires reference_text annotations on bot turns");
    }
    let breakdown = score_stats(&stats, config);
    MetricValue::present(
        Theme::Cognitive,
        "conversational_coherence",
        "bleu",
        breakdown.score,
        with_reference,
        without_reference,
    )
}

// ---------------------------------------------------------------------------
// Task completion, semantic similarity, turn taking
// ---------------------------------------------------------------------------

/// Completed tasks over initiated tasks, across the whole dataset.
pub fn task_completion_rate(dataset: &EvaluationDataset) -> MetricValue {
    let mut initiated = 0usize;
    let mut completed = 0usize;
    for conv in dataset.conversations() {
        for task in &conv.tasks {
            if task.initiated {
                initiated += 1;
            }
            if task.completed {
                completed += 1;
            }
        }
    }
    if initiated == 0 {
        MetricValue::absent(Theme::Cognitive, "task_completion_rate", "fraction", 0)
    } else {
        MetricValue::present(
            Theme::Cognitive,
            "task_completion_rate",
            "fraction",
            completed as f64 / initiated as f64,
            initiated,
            0,
        )
    }
}

/// Cosine similarity of two vectors; `None` when either has zero magnitude.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        None
    } else {
        Some(dot / (norm_a * norm_b))
    }
}

/// Mean cosine similarity between response and reference embeddings over
/// eligible bot turns. Zero-magnitude vectors are excluded and counted as
/// missing.
pub fn semantic_similarity(dataset: &EvaluationDataset) -> MetricValue {
    let mut cosines = Vec::new();
    let mut missing = 0usize;
    let mut degenerate = 0usize;
    for conv in dataset.conversations() {
        for turn in conv.bot_turns() {
            match (&turn.response_embedding, &turn.reference_embedding) {
                (Some(a), Some(b)) => match cosine_similarity(a, b) {
                    Some(cos) => cosines.push(cos),
                    None => {
                        degenerate += 1;
                        missing += 1;
                    }
                },
                _ => missing += 1,
            }
        }
    }
    if cosines.is_empty() {
        let m = MetricValue::absent(Theme::Cognitive, "semantic_similarity", "cosine", missing);
        return if degenerate > 0 {
            m.with_note(format!("{degenerate} turn(s) excluded: zero-magnitude embedding"))
        } else {
            m
        };
    }
    let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
    let m = MetricValue::present(
        Theme::Cognitive,
        "semantic_similarity",
        "cosine",
        mean,
        cosines.len(),
        missing,
    );
    if degenerate > 0 {
        m.with_note(format!("{degenerate} turn(s) excluded: zero-magnitude embedding"))
    } else {
        m
    }
}

/// Bot turns over total turns, dataset-wide. The note carries the
/// per-conversation spread so the report shows more than the pooled ratio.
pub fn turn_taking_balance(dataset: &EvaluationDataset) -> MetricValue {
    let mut bot = 0usize;
    let mut total = 0usize;
    for turn in dataset.turns() {
        total += 1;
        if turn.speaker == Speaker::Bot {
            bot += 1;
        }
    }
    if total == 0 {
        return MetricValue::absent(Theme::Cognitive, "turn_taking_balance", "fraction", 0);
    }
    let mut note = "values near 0.5 indicate a balanced turn ratio".to_owned();
    let per_conv: Vec<f64> = turn_taking_per_conversation(dataset)
        .into_iter()
        .filter_map(|(_, ratio)| ratio)
        .collect();
    if let (Some(lo), Some(hi)) = (
        per_conv.iter().cloned().reduce(f64::min),
        per_conv.iter().cloned().reduce(f64::max),
    ) {
        use std::fmt::Write;
        let _ = write!(note, "; per-conversation range {lo:.3}..{hi:.3}");
    }
    MetricValue::present(
        Theme::Cognitive,
        "turn_taking_balance",
        "fraction",
        bot as f64 / total as f64,
        total,
        0,
    )
    .with_note(note)
}

/// Per-conversation bot-turn share, for report drill-down.
pub fn turn_taking_per_conversation(dataset: &EvaluationDataset) -> Vec<(String, Option<f64>)> {
    dataset
        .conversations()
        .iter()
        .map(|conv| {
            let total = conv.turns.len();
            let bot = conv.bot_turns().count();
            let ratio = (total > 0).then(|| bot as f64 / total as f64);
            (conv.conversation_id.clone(), ratio)
        })
        .collect()
}
