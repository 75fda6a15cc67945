//! Span-level evaluation: strict and partial accuracy per gold name,
//! first/last-name breakdowns, per-country and per-gender accuracy, and
//! false-positive pattern mining.
//!
//! A prediction counts as strict when one predicted span covers the gold
//! name exactly. It counts as partial when a predicted span covers exactly
//! the first-name tokens or exactly the last-name tokens. A span that
//! overlaps the gold name but includes any token outside it counts for
//! neither measure.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::data::{Tag, TaggedUtterance};
use crate::training::{ModelCheckpoint, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// One extracted name: a half-open token range and its surface text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    pub fn new(tokens: &[String], start: usize, end: usize) -> Self {
        Span {
            start,
            end,
            text: tokens[start..end].join(" "),
        }
    }

    fn bounds(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

/// Decode per-token labels into spans. Runs start at B-PER and extend
/// through consecutive I-PER; an orphan I-PER (with no live span to join)
/// opens a new span rather than being discarded.
pub fn extract_spans(tokens: &[String], tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            Tag::O => {
                if let Some(s) = start.take() {
                    spans.push(Span::new(tokens, s, i));
                }
            }
            Tag::BPer => {
                if let Some(s) = start.take() {
                    spans.push(Span::new(tokens, s, i));
                }
                start = Some(i);
            }
            Tag::IPer => {
                if start.is_none() {
                    start = Some(i);
                }
            }
        }
    }
    if let Some(s) = start {
        spans.push(Span::new(tokens, s, tags.len()));
    }
    spans
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatchOutcome {
    Strict,
    Partial,
    Miss,
}

/// Score for one gold name. `last_correct` is `None` for first-only names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NameScore {
    pub outcome: MatchOutcome,
    pub first_correct: bool,
    pub last_correct: Option<bool>,
}

/// Score every gold name of an utterance against the predicted spans.
/// Each gold name scores independently; the result aligns with
/// [`TaggedUtterance::name_ranges`] order.
pub fn score_utterance(
    gold: &TaggedUtterance,
    predicted: &[Span],
) -> Result<Vec<NameScore>, EvalError> {
    let ranges = gold.name_ranges();
    if ranges.is_empty() {
        return Err(EvalError::Contract(format!(
            "utterance '{}' has no gold name",
            gold.text()
        )));
    }
    Ok(ranges
        .into_iter()
        .map(|(gs, ge)| score_name(gs, ge, predicted))
        .collect())
}

fn score_name(gs: usize, ge: usize, predicted: &[Span]) -> NameScore {
    let has_last = ge - gs > 1;
    let exact = predicted.iter().any(|p| p.bounds() == (gs, ge));
    // Partial credit requires a span equal to exactly the first-name token
    // or exactly the last-name tokens; such spans never contain words
    // outside the name.
    let first_part = has_last && predicted.iter().any(|p| p.bounds() == (gs, gs + 1));
    let last_part = has_last && predicted.iter().any(|p| p.bounds() == (gs + 1, ge));
    let outcome = if exact {
        MatchOutcome::Strict
    } else if first_part || last_part {
        MatchOutcome::Partial
    } else {
        MatchOutcome::Miss
    };
    NameScore {
        outcome,
        first_correct: exact || first_part,
        last_correct: has_last.then_some(exact || last_part),
    }
}

/// Counts with a precomputed ratio, for the rendered tables.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioCount {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl RatioCount {
    fn new(correct: usize, total: usize) -> Self {
        RatioCount {
            correct,
            total,
            accuracy: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GroupAccuracy {
    pub strict_acc: f64,
    pub partial_acc: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstOnlyAccuracy {
    pub first: RatioCount,
}

#[derive(Debug, Clone, Serialize)]
pub struct FullNameAccuracy {
    pub first: RatioCount,
    pub last: RatioCount,
}

/// First/last-name accuracy, partitioned into first-only gold names and
/// full (first + last) gold names.
#[derive(Debug, Clone, Serialize)]
pub struct FirstLastReport {
    pub first_only: FirstOnlyAccuracy,
    pub full: FullNameAccuracy,
}

/// Partition scored names into first-only and full-name groups and
/// tabulate first-name accuracy for both plus last-name accuracy for the
/// full-name group.
pub fn first_last_accuracy(scores: &[NameScore]) -> FirstLastReport {
    let (mut fo_first, mut fo_n) = (0, 0);
    let (mut full_first, mut full_last, mut full_n) = (0, 0, 0);
    for s in scores {
        match s.last_correct {
            None => {
                fo_n += 1;
                if s.first_correct {
                    fo_first += 1;
                }
            }
            Some(last) => {
                full_n += 1;
                if s.first_correct {
                    full_first += 1;
                }
                if last {
                    full_last += 1;
                }
            }
        }
    }
    FirstLastReport {
        first_only: FirstOnlyAccuracy {
            first: RatioCount::new(fo_first, fo_n),
        },
        full: FullNameAccuracy {
            first: RatioCount::new(full_first, full_n),
            last: RatioCount::new(full_last, full_n),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FalsePositive {
    pub text: String,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub overall: GroupAccuracy,
    pub by_country: BTreeMap<String, GroupAccuracy>,
    pub by_gender: BTreeMap<String, f64>,
    pub first_last: FirstLastReport,
    pub false_positives: Vec<FalsePositive>,
}

#[derive(Default)]
struct GroupCounts {
    strict: usize,
    partial: usize,
    n: usize,
}

impl GroupCounts {
    fn add(&mut self, outcome: MatchOutcome) {
        self.n += 1;
        match outcome {
            MatchOutcome::Strict => {
                self.strict += 1;
                self.partial += 1;
            }
            MatchOutcome::Partial => self.partial += 1,
            MatchOutcome::Miss => {}
        }
    }

    fn accuracy(&self) -> GroupAccuracy {
        GroupAccuracy {
            strict_acc: ratio(self.strict, self.n),
            partial_acc: ratio(self.partial, self.n),
            support: self.n,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Evaluate a checkpoint on a test set: predict tags per utterance, score
/// every gold name, and aggregate overall, per-country, per-gender, and
/// first/last breakdowns plus the false-positive ranking.
pub fn evaluate(ckpt: &ModelCheckpoint, test: &[TaggedUtterance]) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::Contract("test set is empty".into()));
    }
    let mut predictions = Vec::with_capacity(test.len());
    for u in test {
        predictions.push(ckpt.predict_tags(&u.tokens)?);
    }
    evaluate_predictions(test, &predictions)
}

/// Aggregation core, separated from the model so tests and oracles can
/// feed arbitrary predicted tag sequences.
pub fn evaluate_predictions(
    test: &[TaggedUtterance],
    predictions: &[Vec<Tag>],
) -> Result<EvalReport, EvalError> {
    if test.len() != predictions.len() {
        return Err(EvalError::Contract(format!(
            "{} utterances but {} prediction sequences",
            test.len(),
            predictions.len()
        )));
    }
    let mut overall = GroupCounts::default();
    let mut by_country: BTreeMap<String, GroupCounts> = BTreeMap::new();
    let mut by_gender: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut all_scores: Vec<NameScore> = Vec::new();
    let mut fp_counts: BTreeMap<String, usize> = BTreeMap::new();

    for (u, tags) in test.iter().zip(predictions) {
        if tags.len() != u.tokens.len() {
            return Err(EvalError::Contract(format!(
                "prediction length {} for a {}-token utterance",
                tags.len(),
                u.tokens.len()
            )));
        }
        let predicted = extract_spans(&u.tokens, tags);
        let gold_ranges = u.name_ranges();

        // False positives: predicted spans sharing no token position with
        // any gold name.
        for p in &predicted {
            let overlaps_gold = gold_ranges
                .iter()
                .any(|&(gs, ge)| p.start < ge && gs < p.end);
            if !overlaps_gold {
                *fp_counts.entry(p.text.clone()).or_insert(0) += 1;
            }
        }

        if gold_ranges.is_empty() {
            continue;
        }
        let scores = score_utterance(u, &predicted)?;
        for score in &scores {
            overall.add(score.outcome);
            by_country
                .entry(u.meta.country.clone())
                .or_default()
                .add(score.outcome);
            let g = by_gender
                .entry(u.meta.gender.as_str().to_string())
                .or_insert((0, 0));
            g.1 += 1;
            if score.outcome == MatchOutcome::Strict {
                g.0 += 1;
            }
        }
        all_scores.extend(scores);
    }

    let mut false_positives: Vec<FalsePositive> = fp_counts
        .into_iter()
        .map(|(text, count)| FalsePositive { text, count })
        .collect();
    false_positives.sort_by(|a, b| b.count.cmp(&a.count).then(a.text.cmp(&b.text)));

    Ok(EvalReport {
        overall: overall.accuracy(),
        by_country: by_country
            .into_iter()
            .map(|(k, v)| (k, v.accuracy()))
            .collect(),
        by_gender: by_gender
            .into_iter()
            .map(|(k, (s, n))| (k, ratio(s, n)))
            .collect(),
        first_last: first_last_accuracy(&all_scores),
        false_positives,
    })
}

/// Top-k predicted spans that share no token with any gold name, ranked
/// by count descending with lexicographic tie-breaks.
pub fn false_positive_report(
    ckpt: &ModelCheckpoint,
    test: &[TaggedUtterance],
    top_k: usize,
) -> Result<Vec<FalsePositive>, EvalError> {
    if top_k == 0 {
        return Err(EvalError::Contract("top_k must be at least 1".into()));
    }
    let mut report = evaluate(ckpt, test)?;
    report.false_positives.truncate(top_k);
    Ok(report.false_positives)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Summary tables in Markdown: overall accuracy, gender split, and the
    /// first/last-name breakdown.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("# Evaluation summary\n\n");
        out.push_str("| Accuracy Measure | Score | Support |\n|---|---|---|\n");
        out.push_str(&format!(
            "| Strict Accuracy | {:.4} | {} |\n",
            self.overall.strict_acc, self.overall.support
        ));
        out.push_str(&format!(
            "| Partial Accuracy | {:.4} | {} |\n\n",
            self.overall.partial_acc, self.overall.support
        ));

        out.push_str("## Accuracy by gender\n\n| Gender | Strict Accuracy |\n|---|---|\n");
        for (gender, acc) in &self.by_gender {
            out.push_str(&format!("| {gender} | {acc:.4} |\n"));
        }

        out.push_str("\n## First and last name accuracy\n\n");
        out.push_str("| Measure | Only First Names | First and Last |\n|---|---|---|\n");
        let fo = &self.first_last.first_only.first;
        let ff = &self.first_last.full.first;
        let fl = &self.first_last.full.last;
        out.push_str(&format!(
            "| First Name Accuracy | {}/{} ({:.2}%) | {}/{} ({:.2}%) |\n",
            fo.correct,
            fo.total,
            fo.accuracy * 100.0,
            ff.correct,
            ff.total,
            ff.accuracy * 100.0
        ));
        out.push_str(&format!(
            "| Last Name Accuracy | -- | {}/{} ({:.2}%) |\n",
            fl.correct,
            fl.total,
            fl.accuracy * 100.0
        ));

        if !self.false_positives.is_empty() {
            out.push_str("\n## Most frequent false positives\n\n| Text | Count |\n|---|---|\n");
            for fp in self.false_positives.iter().take(20) {
                out.push_str(&format!("| {} | {} |\n", fp.text, fp.count));
            }
        }
        out
    }

    /// Per-country accuracy as CSV: `country,strict_accuracy,partial_accuracy,support`.
    pub fn country_csv(&self) -> String {
        let mut out = String::from("country,strict_accuracy,partial_accuracy,support\n");
        for (country, acc) in &self.by_country {
            out.push_str(&format!(
                "{},{:.4},{:.4},{}\n",
                country, acc.strict_acc, acc.partial_acc, acc.support
            ));
        }
        out
    }
}
