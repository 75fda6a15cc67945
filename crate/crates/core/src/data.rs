//! Corpus curation: name pools, utterance templates, template filling,
//! cross-tagging of secondary names, and leak-free train/test splitting.
//!
//! The pipeline is a pure function of its inputs and a seed: two runs with
//! identical inputs produce byte-identical datasets.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("insufficient names after filtering: {firsts} first names and {lasts} last names (need at least 2 and 1)")]
    InsufficientNames { firsts: usize, lasts: usize },
    #[error("test fraction must be strictly between 0 and 1, got {0}")]
    BadTestFraction(f64),
    #[error("template '{text}' must contain exactly one {{NAME}} placeholder")]
    BadTemplate { text: String },
    #[error("{0}")]
    Invalid(String),
}

/// Per-token label. The fixed label inventory is `O`, `B-PER`, `I-PER`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "O")]
    O,
    #[serde(rename = "B-PER")]
    BPer,
    #[serde(rename = "I-PER")]
    IPer,
}

pub const LABELS: [&str; 3] = ["O", "B-PER", "I-PER"];

impl Tag {
    pub fn index(self) -> usize {
        match self {
            Tag::O => 0,
            Tag::BPer => 1,
            Tag::IPer => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Tag> {
        match index {
            0 => Some(Tag::O),
            1 => Some(Tag::BPer),
            2 => Some(Tag::IPer),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        LABELS[self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
    U,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
            Gender::U => "U",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameKind {
    First,
    Last,
}

/// One first or last name with its gender and country metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameRecord {
    pub text: String,
    pub kind: NameKind,
    pub gender: Gender,
    pub country: String,
}

/// A first name, optionally paired with a last name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullName {
    pub first: String,
    pub last: Option<String>,
    pub gender: Gender,
    pub country: String,
}

impl FullName {
    /// The surface form inserted into templates: `"First"` or `"First Last"`.
    pub fn text(&self) -> String {
        match &self.last {
            Some(last) => format!("{} {}", self.first, last),
            None => self.first.clone(),
        }
    }
}

/// An utterance template containing exactly one `{NAME}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub text: String,
    pub source: String,
}

pub const PLACEHOLDER: &str = "{NAME}";

impl Template {
    pub fn new(text: impl Into<String>, source: impl Into<String>) -> Result<Self, CurationError> {
        let text = text.into();
        if text.matches(PLACEHOLDER).count() != 1 {
            return Err(CurationError::BadTemplate { text });
        }
        Ok(Template {
            text,
            source: source.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceMeta {
    pub country: String,
    pub gender: Gender,
    pub name_first: String,
    pub name_last: Option<String>,
    pub source: String,
}

/// A tokenized utterance with one label per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedUtterance {
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub meta: UtteranceMeta,
}

impl TaggedUtterance {
    pub fn new(
        tokens: Vec<String>,
        tags: Vec<Tag>,
        meta: UtteranceMeta,
    ) -> Result<Self, CurationError> {
        let u = TaggedUtterance { tokens, tags, meta };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<(), CurationError> {
        if self.tokens.len() != self.tags.len() {
            return Err(CurationError::Invalid(format!(
                "{} tokens but {} tags",
                self.tokens.len(),
                self.tags.len()
            )));
        }
        let mut prev = Tag::O;
        for (i, &tag) in self.tags.iter().enumerate() {
            if tag == Tag::IPer && prev == Tag::O {
                return Err(CurationError::Invalid(format!(
                    "orphan I-PER at token {i} in '{}'",
                    self.text()
                )));
            }
            prev = tag;
        }
        Ok(())
    }

    /// Canonical surface form; used for duplicate detection.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Token ranges of the tagged names, as `(start, end)` half-open pairs.
    pub fn name_ranges(&self) -> Vec<(usize, usize)> {
        let mut ranges = Vec::new();
        let mut i = 0;
        while i < self.tags.len() {
            if self.tags[i] == Tag::BPer {
                let start = i;
                i += 1;
                while i < self.tags.len() && self.tags[i] == Tag::IPer {
                    i += 1;
                }
                ranges.push((start, i));
            } else {
                i += 1;
            }
        }
        ranges
    }

    /// Surface strings of the tagged names.
    pub fn name_texts(&self) -> Vec<String> {
        self.name_ranges()
            .into_iter()
            .map(|(s, e)| self.tokens[s..e].join(" "))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub train: Vec<TaggedUtterance>,
    pub test: Vec<TaggedUtterance>,
}

// ── Tokenizer ───────────────────────────────────────────────────────────

const TERMINAL_PUNCT: [char; 6] = ['.', ',', '!', '?', ';', ':'];

/// Whitespace tokenization with terminal punctuation (`.,!?;:`) detached
/// as separate tokens. Internal hyphens and apostrophes stay attached, so
/// names like `O'Neil` or `Jean-Luc` remain single tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_spans(text)
        .into_iter()
        .map(|(tok, _, _)| tok)
        .collect()
}

/// Tokenize, keeping each token's byte range in the original text.
pub fn tokenize_with_spans(text: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let ch = text[i..].chars().next().unwrap();
        if ch.is_whitespace() {
            i += ch.len_utf8();
            continue;
        }
        // End of the whitespace-delimited chunk.
        let mut j = i;
        for c in text[i..].chars() {
            if c.is_whitespace() {
                break;
            }
            j += c.len_utf8();
        }
        // Peel trailing terminal punctuation, each char its own token.
        let mut word_end = j;
        let mut punct = Vec::new();
        while word_end > i {
            let last = text[i..word_end].chars().next_back().unwrap();
            if TERMINAL_PUNCT.contains(&last) {
                word_end -= last.len_utf8();
                punct.push((last.to_string(), word_end, word_end + last.len_utf8()));
            } else {
                break;
            }
        }
        if word_end > i {
            out.push((text[i..word_end].to_string(), i, word_end));
        }
        out.extend(punct.into_iter().rev());
        i = j;
    }
    out
}

// ── Name pool loading & filtering ───────────────────────────────────────

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Load a name pool CSV with header `name,kind,gender,country`. Malformed
/// rows fail the load with their line number.
pub fn load_name_pool(path: &Path) -> Result<Vec<NameRecord>, CurationError> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => CurationError::Io {
                path: path_str.clone(),
                source,
            },
            other => CurationError::Format {
                path: path_str.clone(),
                line: 0,
                msg: format!("{other:?}"),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| CurationError::Format {
            path: path_str.clone(),
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(c_name), Some(c_kind), Some(c_gender), Some(c_country)) =
        (col("name"), col("kind"), col("gender"), col("country"))
    else {
        return Err(CurationError::Format {
            path: path_str,
            line: 1,
            msg: format!("expected columns name,kind,gender,country, got {headers:?}"),
        });
    };

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let row = row.map_err(|e| CurationError::Format {
            path: path_str.clone(),
            line,
            msg: e.to_string(),
        })?;
        let field = |c: usize| -> Result<&str, CurationError> {
            row.get(c).ok_or_else(|| CurationError::Format {
                path: path_str.clone(),
                line,
                msg: "missing field".into(),
            })
        };
        let kind = match field(c_kind)?.trim() {
            "first" => NameKind::First,
            "last" => NameKind::Last,
            other => {
                return Err(CurationError::Format {
                    path: path_str.clone(),
                    line,
                    msg: format!("kind must be 'first' or 'last', got '{other}'"),
                })
            }
        };
        let gender = match field(c_gender)?.trim() {
            "F" => Gender::F,
            "M" => Gender::M,
            "U" => Gender::U,
            other => {
                return Err(CurationError::Format {
                    path: path_str.clone(),
                    line,
                    msg: format!("gender must be F, M or U, got '{other}'"),
                })
            }
        };
        records.push(NameRecord {
            text: normalize_ws(field(c_name)?),
            kind,
            gender,
            country: normalize_ws(field(c_country)?),
        });
    }
    if records.is_empty() {
        return Err(CurationError::Format {
            path: path_str,
            line: 1,
            msg: "name pool contains no rows".into(),
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Empty,
    Diacritic,
    NonLatinScript,
    Digit,
    Whitespace,
    SpecialCharacter,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Empty => "empty",
            RejectReason::Diacritic => "diacritic",
            RejectReason::NonLatinScript => "non-latin-script",
            RejectReason::Digit => "digit",
            RejectReason::Whitespace => "whitespace",
            RejectReason::SpecialCharacter => "special-character",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RejectedName {
    pub record: NameRecord,
    pub reason: RejectReason,
}

/// Character policy for [`filter_names`]. The default keeps names matching
/// `^[A-Za-z][A-Za-z'-]*$`.
#[derive(Debug, Clone)]
pub struct FilterPolicy {
    pub allow_apostrophe: bool,
    pub allow_hyphen: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            allow_apostrophe: true,
            allow_hyphen: true,
        }
    }
}

fn is_latin_diacritic(c: char) -> bool {
    matches!(c, '\u{00C0}'..='\u{024F}' | '\u{1E00}'..='\u{1EFF}')
}

fn classify_char(c: char, first: bool, policy: &FilterPolicy) -> Option<RejectReason> {
    if c.is_ascii_alphabetic() {
        return None;
    }
    if !first && ((c == '\'' && policy.allow_apostrophe) || (c == '-' && policy.allow_hyphen)) {
        return None;
    }
    Some(if c.is_whitespace() {
        RejectReason::Whitespace
    } else if c.is_ascii_digit() {
        RejectReason::Digit
    } else if is_latin_diacritic(c) {
        RejectReason::Diacritic
    } else if c.is_alphabetic() {
        RejectReason::NonLatinScript
    } else {
        RejectReason::SpecialCharacter
    })
}

/// Partition a pool into names the model supports and rejected names with
/// reason codes. Every input record lands in exactly one of the two lists.
pub fn filter_names(
    pool: &[NameRecord],
    policy: &FilterPolicy,
) -> (Vec<NameRecord>, Vec<RejectedName>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    'record: for record in pool {
        if record.text.is_empty() {
            rejected.push(RejectedName {
                record: record.clone(),
                reason: RejectReason::Empty,
            });
            continue;
        }
        for (i, c) in record.text.chars().enumerate() {
            if let Some(reason) = classify_char(c, i == 0, policy) {
                rejected.push(RejectedName {
                    record: record.clone(),
                    reason,
                });
                continue 'record;
            }
        }
        kept.push(record.clone());
    }
    (kept, rejected)
}

/// Deduplicate first and last names (first occurrence wins), shuffle
/// deterministically, and pair a distinct last name with half of the
/// first names. No name string is used twice.
pub fn build_full_names(pool: &[NameRecord], seed: u64) -> Result<Vec<FullName>, CurationError> {
    let mut seen_first = HashSet::new();
    let mut seen_last = HashSet::new();
    let mut firsts: Vec<&NameRecord> = Vec::new();
    let mut lasts: Vec<&NameRecord> = Vec::new();
    for record in pool {
        match record.kind {
            NameKind::First => {
                if seen_first.insert(record.text.clone()) {
                    firsts.push(record);
                }
            }
            NameKind::Last => {
                if seen_last.insert(record.text.clone()) {
                    lasts.push(record);
                }
            }
        }
    }
    if firsts.len() < 2 || lasts.is_empty() {
        return Err(CurationError::InsufficientNames {
            firsts: firsts.len(),
            lasts: lasts.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    firsts.shuffle(&mut rng);
    lasts.shuffle(&mut rng);

    let full_count = (firsts.len() / 2).min(lasts.len());
    let mut last_used = vec![false; lasts.len()];
    let mut names = Vec::with_capacity(firsts.len());
    let mut paired = 0;
    for first in &firsts {
        let mut last = None;
        if paired < full_count {
            // Next unused last name that differs from the first name.
            if let Some(k) = (0..lasts.len()).find(|&k| !last_used[k] && lasts[k].text != first.text)
            {
                last_used[k] = true;
                last = Some(lasts[k].text.clone());
                paired += 1;
            }
        }
        names.push(FullName {
            first: first.text.clone(),
            last,
            gender: first.gender,
            country: first.country.clone(),
        });
    }
    Ok(names)
}

// ── Template filling ────────────────────────────────────────────────────

/// Replace the `{NAME}` placeholder with the name's surface form, tokenize,
/// and tag the name tokens B-PER/I-PER. Returns the utterance plus any
/// curation warnings (the utterance is produced either way).
pub fn fill_template(tpl: &Template, name: &FullName) -> (TaggedUtterance, Vec<String>) {
    let name_text = name.text();
    let ph_start = tpl.text.find(PLACEHOLDER).expect("validated template");
    let filled = tpl.text.replacen(PLACEHOLDER, &name_text, 1);
    let span = (ph_start, ph_start + name_text.len());

    let spanned = tokenize_with_spans(&filled);
    let mut tokens = Vec::with_capacity(spanned.len());
    let mut tags = Vec::with_capacity(spanned.len());
    let mut in_name = false;
    for (tok, start, end) in &spanned {
        let overlaps = *start < span.1 && span.0 < *end;
        tags.push(if overlaps {
            if in_name {
                Tag::IPer
            } else {
                in_name = true;
                Tag::BPer
            }
        } else {
            Tag::O
        });
        tokens.push(tok.clone());
    }

    let mut warnings = Vec::new();
    let name_tokens: HashSet<&String> = tokens
        .iter()
        .zip(&tags)
        .filter(|(_, t)| **t != Tag::O)
        .map(|(tok, _)| tok)
        .collect();
    for (tok, tag) in tokens.iter().zip(&tags) {
        if *tag == Tag::O && name_tokens.contains(tok) {
            warnings.push(format!(
                "name token '{tok}' collides with a template token in '{}'",
                tpl.text
            ));
        }
    }

    let meta = UtteranceMeta {
        country: name.country.clone(),
        gender: name.gender,
        name_first: name.first.clone(),
        name_last: name.last.clone(),
        source: tpl.source.clone(),
    };
    (TaggedUtterance { tokens, tags, meta }, warnings)
}

// ── Cross-tagging ───────────────────────────────────────────────────────

/// Tag untagged token spans that exactly match a known tagged name.
/// Matching is case-sensitive and exact per token; where candidate spans
/// overlap, the longest match wins with ties going to the leftmost.
/// Existing tags are never removed.
pub fn cross_tag_multi_names(
    dataset: &[TaggedUtterance],
    known_names: &HashSet<String>,
) -> Vec<TaggedUtterance> {
    let mut name_tokens: Vec<Vec<String>> = known_names
        .iter()
        .map(|name| tokenize(name))
        .filter(|toks| !toks.is_empty())
        .collect();
    // Deterministic scan order regardless of set iteration order.
    name_tokens.sort();
    name_tokens.dedup();

    dataset
        .iter()
        .map(|u| {
            let mut tags = u.tags.clone();
            let mut candidates: Vec<(usize, usize)> = Vec::new();
            for name in &name_tokens {
                let n = name.len();
                if n == 0 || n > u.tokens.len() {
                    continue;
                }
                for start in 0..=(u.tokens.len() - n) {
                    let window_free = (start..start + n).all(|i| tags[i] == Tag::O);
                    if window_free && u.tokens[start..start + n] == name[..] {
                        candidates.push((start, n));
                    }
                }
            }
            // Longest first, then leftmost.
            candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut taken: Vec<bool> = tags.iter().map(|t| *t != Tag::O).collect();
            for (start, n) in candidates {
                if (start..start + n).any(|i| taken[i]) {
                    continue;
                }
                for i in start..start + n {
                    taken[i] = true;
                    tags[i] = if i == start { Tag::BPer } else { Tag::IPer };
                }
            }
            TaggedUtterance {
                tokens: u.tokens.clone(),
                tags,
                meta: u.meta.clone(),
            }
        })
        .collect()
}

// ── Train/test splitting ────────────────────────────────────────────────

#[derive(Debug, Clone, Default)]
pub struct SplitReport {
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Split utterances into train and test, stratified by country, with the
/// leak-free invariants enforced by construction: duplicate utterance
/// texts are dropped (reported), and utterances sharing a tagged name are
/// forced into the same split.
pub fn split_train_test(
    utterances: Vec<TaggedUtterance>,
    test_fraction: f64,
    seed: u64,
) -> Result<(DatasetSplit, SplitReport), CurationError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CurationError::BadTestFraction(test_fraction));
    }
    let mut report = SplitReport::default();

    // Drop duplicate utterance texts, first occurrence wins.
    let mut seen_text = HashSet::new();
    let mut items: Vec<TaggedUtterance> = Vec::with_capacity(utterances.len());
    for u in utterances {
        let text = u.text();
        if seen_text.insert(text.clone()) {
            items.push(u);
        } else {
            report.dropped.push(format!("duplicate utterance: {text}"));
        }
    }

    // Cluster utterances that share a tagged name string.
    let mut uf = UnionFind::new(items.len());
    let mut by_name: BTreeMap<String, usize> = BTreeMap::new();
    for (i, u) in items.iter().enumerate() {
        for name in u.name_texts() {
            match by_name.get(&name) {
                Some(&j) => uf.union(i, j),
                None => {
                    by_name.insert(name, i);
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..items.len() {
        clusters.entry(uf.find(i)).or_default().push(i);
    }

    // Group clusters by their primary country (the first utterance's).
    let mut by_country: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    let mut country_total: BTreeMap<String, usize> = BTreeMap::new();
    for members in clusters.into_values() {
        let country = items[members[0]].meta.country.clone();
        *country_total.entry(country.clone()).or_insert(0) += members.len();
        by_country.entry(country).or_default().push(members);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx: HashSet<usize> = HashSet::new();
    for (country, mut group) in by_country {
        let total = country_total[&country];
        if total == 1 {
            report.warnings.push(format!(
                "country '{country}' has a single utterance; kept in train"
            ));
            continue;
        }
        // Keep at least one utterance of every country in train.
        let target = ((total as f64 * test_fraction).round() as usize).min(total - 1);
        group.shuffle(&mut rng);
        let mut assigned = 0;
        for members in group {
            if assigned >= target {
                break;
            }
            if assigned + members.len() <= target {
                assigned += members.len();
                test_idx.extend(members);
            }
        }
    }

    let mut split = DatasetSplit::default();
    for (i, u) in items.into_iter().enumerate() {
        if test_idx.contains(&i) {
            split.test.push(u);
        } else {
            split.train.push(u);
        }
    }
    Ok((split, report))
}

// ── Synthetic corpus generator ──────────────────────────────────────────

/// Parameters for the bundled synthetic benefit-domain corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_templates: usize,
    pub n_names_per_country: usize,
    pub countries: usize,
    pub rng_seed: u64,
}

const FRAMES_WITH_PLAN: [&str; 15] = [
    "add {NAME} to my {PLAN} plan",
    "please remove {NAME} from our {PLAN} coverage",
    "does {NAME} have {PLAN} benefits this year",
    "I want to enroll {NAME} in the {PLAN} program",
    "{NAME} needs a new {PLAN} card",
    "can you check the {PLAN} claim for {NAME}",
    "what does the {PLAN} plan cover for {NAME}",
    "switch {NAME} onto the {PLAN} option",
    "my dependent {NAME} lost the {PLAN} card",
    "update the {PLAN} beneficiary to {NAME}",
    "the {PLAN} premium for {NAME} went up",
    "{NAME} asked about the {PLAN} deductible",
    "please verify {PLAN} eligibility for {NAME}",
    "has {NAME} used the {PLAN} benefit yet",
    "the {PLAN} claim from {NAME} was denied",
];

const FRAMES_PLAIN: [&str; 15] = [
    "{NAME} just turned 26 and is no longer eligible",
    "my daughter {NAME} needs glasses",
    "I would like to add {NAME} as a beneficiary",
    "{NAME} is getting married next month",
    "remove {NAME} from my policy please",
    "when does coverage start for {NAME}",
    "{NAME} moved to a new state last week",
    "the enrollment form for {NAME} was rejected",
    "I need to update the address for {NAME}",
    "is {NAME} still listed as a dependent",
    "our records show {NAME} retired in June",
    "{NAME} called about the open enrollment deadline",
    "please mail the new card to {NAME} directly",
    "coverage for {NAME} ends on Friday",
    "{NAME} submitted the paperwork yesterday",
];

const FRAMES_WITH_RELATION: [&str; 6] = [
    "my {REL} {NAME} needs to see a dentist",
    "add my {REL} {NAME} to the policy",
    "my {REL} {NAME} lost an id card",
    "can my {REL} {NAME} stay on the plan",
    "I filed a claim for my {REL} {NAME} last week",
    "my {REL} {NAME} turned 26 yesterday",
];

const RELATIONS: [&str; 5] = ["daughter", "son", "spouse", "partner", "dependent"];

const PLAN_TYPES: [&str; 10] = [
    "dental",
    "vision",
    "medical",
    "life",
    "disability",
    "accident",
    "hospital",
    "wellness",
    "prescription",
    "hearing",
];

const TAILS: [&str; 6] = [
    "",
    ".",
    " please",
    " please.",
    " as soon as possible",
    " for next year",
];

const BODY_CONSONANTS: [&str; 24] = [
    "b", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr",
    "kl", "st", "ch", "sh", "th", "gr",
];

const BODY_VOWELS: [&str; 8] = ["a", "e", "i", "o", "u", "ai", "ei", "ou"];

const SUFFIX_CONSONANTS: [char; 15] = [
    'b', 'd', 'f', 'g', 'h', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];

const SUFFIX_VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

const SUFFIXES_PER_COUNTRY: usize = 4;
const BODIES_PER_COUNTRY: usize = 8;

const COUNTRY_NAMES: [&str; 24] = [
    "Aldovia",
    "Brelland",
    "Caprona",
    "Drovania",
    "Elbonia",
    "Frestia",
    "Glenrovia",
    "Hastova",
    "Ilvania",
    "Jorvik",
    "Kestrellia",
    "Lunderg",
    "Morovia",
    "Norlandia",
    "Ostralia",
    "Pelagia",
    "Quorvia",
    "Rostavia",
    "Sylvania",
    "Tirragon",
    "Umbrosia",
    "Velmora",
    "Wrenfold",
    "Xanthia",
];

fn synthetic_country_name(i: usize) -> String {
    COUNTRY_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("Zenland{}", i + 1))
}

/// Exactly-3-character CVC name ending, unique per (country, slot) pair.
/// Different countries draw from disjoint suffix sets, so names generated
/// for different countries never share a 3-character ending.
fn country_suffix(country: usize, slot: usize) -> String {
    let idx = country * SUFFIXES_PER_COUNTRY + slot;
    let n_v = SUFFIX_VOWELS.len();
    let n_c = SUFFIX_CONSONANTS.len();
    let c1 = SUFFIX_CONSONANTS[(idx / (n_v * n_c)) % n_c];
    let v = SUFFIX_VOWELS[(idx / n_c) % n_v];
    let c2 = SUFFIX_CONSONANTS[idx % n_c];
    format!("{c1}{v}{c2}")
}

fn country_bodies(country: usize) -> Vec<String> {
    let pool_len = BODY_CONSONANTS.len() * BODY_VOWELS.len();
    (0..BODIES_PER_COUNTRY)
        .map(|j| {
            let idx = (country * BODIES_PER_COUNTRY + j) % pool_len;
            let c = BODY_CONSONANTS[idx / BODY_VOWELS.len()];
            let v = BODY_VOWELS[idx % BODY_VOWELS.len()];
            format!("{c}{v}")
        })
        .collect()
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Deterministic synthetic templates and name records for desk-scale
/// experiments. Each country has its own syllable inventory and an
/// exclusive set of 3-character name endings.
pub fn generate_synthetic_corpus(
    spec: &SyntheticSpec,
) -> Result<(Vec<Template>, Vec<NameRecord>), CurationError> {
    if spec.n_templates == 0 || spec.n_names_per_country == 0 || spec.countries == 0 {
        return Err(CurationError::Invalid(
            "synthetic spec counts must all be at least 1".into(),
        ));
    }
    let max_countries = SUFFIX_CONSONANTS.len() * SUFFIX_VOWELS.len() * SUFFIX_CONSONANTS.len()
        / SUFFIXES_PER_COUNTRY;
    if spec.countries > max_countries {
        return Err(CurationError::Invalid(format!(
            "synthetic generator supports at most {max_countries} countries, got {}",
            spec.countries
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    // Template pool: benefit-domain frames × plan types × tails.
    let mut pool: Vec<String> = Vec::new();
    for frame in FRAMES_WITH_PLAN {
        for plan in PLAN_TYPES {
            for tail in TAILS {
                pool.push(format!("{}{}", frame.replace("{PLAN}", plan), tail));
            }
        }
    }
    for frame in FRAMES_PLAIN {
        for tail in TAILS {
            pool.push(format!("{frame}{tail}"));
        }
    }
    for frame in FRAMES_WITH_RELATION {
        for rel in RELATIONS {
            for tail in TAILS {
                pool.push(format!("{}{}", frame.replace("{REL}", rel), tail));
            }
        }
    }
    if spec.n_templates > pool.len() {
        return Err(CurationError::Invalid(format!(
            "synthetic template pool has {} entries, {} requested",
            pool.len(),
            spec.n_templates
        )));
    }
    pool.shuffle(&mut rng);
    let templates = pool
        .into_iter()
        .take(spec.n_templates)
        .map(|text| Template::new(text, "synthetic"))
        .collect::<Result<Vec<_>, _>>()?;

    // Names: bodies from the country's syllable chunk, ending with one of
    // the country's exclusive suffixes.
    let mut used: HashSet<String> = HashSet::new();
    let mut records = Vec::with_capacity(spec.countries * spec.n_names_per_country);
    for ci in 0..spec.countries {
        let country = synthetic_country_name(ci);
        let bodies = country_bodies(ci);
        for k in 0..spec.n_names_per_country {
            let mut attempt = 0;
            let text = loop {
                let mut body = bodies[rng.random_range(0..bodies.len())].clone();
                let extra = 1 + attempt / 50;
                for _ in 0..extra {
                    if rng.random_bool(0.6) || attempt >= 50 {
                        body.push_str(&bodies[rng.random_range(0..bodies.len())]);
                    }
                }
                let suffix = country_suffix(ci, rng.random_range(0..SUFFIXES_PER_COUNTRY));
                let candidate = capitalize(&format!("{body}{suffix}"));
                if used.insert(candidate.clone()) {
                    break candidate;
                }
                attempt += 1;
                if attempt > 1000 {
                    return Err(CurationError::Invalid(format!(
                        "could not generate {} unique names for {country}",
                        spec.n_names_per_country
                    )));
                }
            };
            let kind = if k % 2 == 0 {
                NameKind::First
            } else {
                NameKind::Last
            };
            let gender = match kind {
                NameKind::Last => Gender::U,
                NameKind::First => {
                    if k % 20 == 18 {
                        Gender::U
                    } else if (k / 2) % 2 == 0 {
                        Gender::F
                    } else {
                        Gender::M
                    }
                }
            };
            records.push(NameRecord {
                text,
                kind,
                gender,
                country: country.clone(),
            });
        }
    }
    Ok((templates, records))
}

// ── Full pipeline ───────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub test_fraction: f64,
    pub seed: u64,
    /// Also emit name-free utterances into the training split (one per
    /// template, with a dependent phrase in place of the name).
    pub allow_nameless: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CurationReport {
    pub rejected: Vec<RejectedName>,
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
}

const DEPENDENT_PHRASES: [&str; 4] = ["my spouse", "my daughter", "my son", "my dependent"];

/// Run the full curation pipeline: filter the pool, build full names,
/// fill templates, cross-tag secondary name occurrences, and split.
pub fn build_dataset(
    pool: &[NameRecord],
    templates: &[Template],
    config: &PipelineConfig,
) -> Result<(DatasetSplit, CurationReport), CurationError> {
    if templates.is_empty() {
        return Err(CurationError::Invalid("no templates provided".into()));
    }
    let mut report = CurationReport::default();

    let (kept, rejected) = filter_names(pool, &FilterPolicy::default());
    report.rejected = rejected;
    let names = build_full_names(&kept, config.seed)?;

    let mut utterances = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let tpl = &templates[i % templates.len()];
        let (utterance, warnings) = fill_template(tpl, name);
        report.warnings.extend(warnings);
        utterances.push(utterance);
    }

    let known: HashSet<String> = names.iter().map(|n| n.text()).collect();
    let utterances = cross_tag_multi_names(&utterances, &known);

    let (mut split, split_report) =
        split_train_test(utterances, config.test_fraction, config.seed)?;
    report.dropped = split_report.dropped;
    report.warnings.extend(split_report.warnings);

    if config.allow_nameless {
        for (i, tpl) in templates.iter().enumerate() {
            let phrase = DEPENDENT_PHRASES[i % DEPENDENT_PHRASES.len()];
            let text = tpl.text.replacen(PLACEHOLDER, phrase, 1);
            let tokens = tokenize(&text);
            let tags = vec![Tag::O; tokens.len()];
            split.train.push(TaggedUtterance {
                tokens,
                tags,
                meta: UtteranceMeta {
                    country: "Unknown".into(),
                    gender: Gender::U,
                    name_first: String::new(),
                    name_last: None,
                    source: tpl.source.clone(),
                },
            });
        }
    }

    Ok((split, report))
}

// ── Dataset and template file I/O (JSON Lines) ──────────────────────────

pub fn write_dataset(path: &Path, utterances: &[TaggedUtterance]) -> Result<(), CurationError> {
    let io_err = |source| CurationError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    for u in utterances {
        let line = serde_json::to_string(u).expect("serializable");
        writeln!(file, "{line}").map_err(io_err)?;
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<TaggedUtterance>, CurationError> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|source| CurationError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CurationError::Io {
            path: path_str.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let u: TaggedUtterance =
            serde_json::from_str(&line).map_err(|e| CurationError::Format {
                path: path_str.clone(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        u.validate().map_err(|e| CurationError::Format {
            path: path_str.clone(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(u);
    }
    Ok(out)
}

pub fn write_templates(path: &Path, templates: &[Template]) -> Result<(), CurationError> {
    let io_err = |source| CurationError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    for t in templates {
        let line = serde_json::to_string(t).expect("serializable");
        writeln!(file, "{line}").map_err(io_err)?;
    }
    Ok(())
}

pub fn load_templates(path: &Path) -> Result<Vec<Template>, CurationError> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|source| CurationError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CurationError::Io {
            path: path_str.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: Template = serde_json::from_str(&line).map_err(|e| CurationError::Format {
            path: path_str.clone(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let tpl = Template::new(raw.text, raw.source).map_err(|e| CurationError::Format {
            path: path_str.clone(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(tpl);
    }
    Ok(out)
}

pub fn write_name_pool(path: &Path, pool: &[NameRecord]) -> Result<(), CurationError> {
    let io_err = |source| CurationError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    writeln!(file, "name,kind,gender,country").map_err(io_err)?;
    for record in pool {
        let kind = match record.kind {
            NameKind::First => "first",
            NameKind::Last => "last",
        };
        writeln!(
            file,
            "{},{},{},{}",
            record.text,
            kind,
            record.gender.as_str(),
            record.country
        )
        .map_err(io_err)?;
    }
    Ok(())
}
