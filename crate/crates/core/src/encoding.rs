//! Integer encoding of tagged utterances: word/char vocabularies built
//! from the training split only, per-word character ids padded to a fixed
//! width, and batch padding with masks.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{Tag, TaggedUtterance, LABELS};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

pub const DEFAULT_MAX_WORD_LEN: usize = 25;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("vocab file {path}: {msg}")]
    BadVocabFile { path: String, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Symbol table with reserved ids PAD=0 and UNK=1. Real symbols get ids
/// from 2 in insertion order; lookups of unknown symbols return UNK.
/// Frozen after construction: encoding never adds symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    index: HashMap<String, usize>,
    symbols: Vec<String>,
}

impl Vocab {
    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab {
            index: HashMap::new(),
            symbols: Vec::new(),
        };
        for symbol in symbols {
            let symbol = symbol.into();
            if !vocab.index.contains_key(&symbol) {
                vocab.index.insert(symbol.clone(), vocab.symbols.len() + 2);
                vocab.symbols.push(symbol);
            }
        }
        vocab
    }

    /// Id of a symbol, or UNK for symbols not in the table.
    pub fn id(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(UNK_ID)
    }

    /// Symbol for a real id (≥ 2); PAD/UNK have no symbol.
    pub fn symbol(&self, id: usize) -> Option<&str> {
        id.checked_sub(2)
            .and_then(|i| self.symbols.get(i))
            .map(String::as_str)
    }

    /// Total table size including the reserved PAD and UNK slots.
    pub fn size(&self) -> usize {
        self.symbols.len() + 2
    }

    /// Real symbols in id order (index 0 is id 2).
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

/// The word and character tables of one trained model. The label
/// inventory is fixed (`O`, `B-PER`, `I-PER`) and travels implicitly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabs {
    pub words: Vocab,
    pub chars: Vocab,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    words: Vec<String>,
    chars: Vec<String>,
    labels: Vec<String>,
}

impl Vocabs {
    /// Canonical JSON form: `{"words": [...], "chars": [...], "labels":
    /// [...]}` where array index = id − 2 for words and chars (PAD and UNK
    /// are implicit). Labels are the fixed inventory with ids 0..3.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            words: self.words.symbols().to_vec(),
            chars: self.chars.symbols().to_vec(),
            labels: LABELS.iter().map(|s| s.to_string()).collect(),
        })
        .expect("serializable")
    }

    pub fn from_json(json: &str) -> Result<Self, String> {
        let file: VocabFile = serde_json::from_str(json).map_err(|e| e.to_string())?;
        if file.labels != LABELS {
            return Err(format!("unsupported label inventory {:?}", file.labels));
        }
        Ok(Vocabs {
            words: Vocab::from_symbols(file.words),
            chars: Vocab::from_symbols(file.chars),
        })
    }

    /// SHA-256 of the canonical JSON form, hex-encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), EncodingError> {
        std::fs::write(path, self.to_json()).map_err(|source| EncodingError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EncodingError> {
        let json = std::fs::read_to_string(path).map_err(|source| EncodingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Vocabs::from_json(&json).map_err(|msg| EncodingError::BadVocabFile {
            path: path.display().to_string(),
            msg,
        })
    }
}

/// Build word and character vocabularies from the training split only;
/// test-set symbols unseen in training encode as UNK.
pub fn build_vocabs(train: &[TaggedUtterance]) -> Result<Vocabs, EncodingError> {
    if train.is_empty() {
        return Err(EncodingError::Contract(
            "cannot build vocabularies from an empty training set".into(),
        ));
    }
    let mut words: Vec<&str> = Vec::new();
    let mut chars: Vec<String> = Vec::new();
    for u in train {
        for token in &u.tokens {
            words.push(token);
            for c in token.chars() {
                chars.push(c.to_string());
            }
        }
    }
    Ok(Vocabs {
        words: Vocab::from_symbols(words.into_iter().map(String::from)),
        chars: Vocab::from_symbols(chars),
    })
}

/// One utterance as integer sequences. All per-token sequences share the
/// same length; `char_ids` rows are padded with PAD to `max_word_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedUtterance {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<Vec<usize>>,
    pub word_lengths: Vec<usize>,
    pub tag_ids: Vec<usize>,
    pub mask: Vec<bool>,
}

impl EncodedUtterance {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    /// Number of real (unmasked) positions; the mask is always a prefix of
    /// `true` values followed by padding.
    pub fn real_len(&self) -> usize {
        self.mask.iter().take_while(|m| **m).count()
    }
}

/// Encode one utterance. Unknown words and characters map to UNK; words
/// longer than `max_word_len` are truncated with the length clamped.
pub fn encode_utterance(
    vocabs: &Vocabs,
    u: &TaggedUtterance,
    max_word_len: usize,
) -> EncodedUtterance {
    let mut encoded = encode_tokens(vocabs, &u.tokens, max_word_len);
    encoded.tag_ids = u.tags.iter().map(|tag| tag.index()).collect();
    encoded
}

/// Encode raw tokens for inference: like [`encode_utterance`] but with all
/// tag ids zero.
pub fn encode_tokens(
    vocabs: &Vocabs,
    tokens: &[String],
    max_word_len: usize,
) -> EncodedUtterance {
    assert!(max_word_len >= 1, "max_word_len must be at least 1");
    let mut encoded = EncodedUtterance {
        word_ids: Vec::with_capacity(tokens.len()),
        char_ids: Vec::with_capacity(tokens.len()),
        word_lengths: Vec::with_capacity(tokens.len()),
        tag_ids: vec![0; tokens.len()],
        mask: vec![true; tokens.len()],
    };
    for token in tokens {
        encoded.word_ids.push(vocabs.words.id(token));
        let mut row = Vec::with_capacity(max_word_len);
        for c in token.chars().take(max_word_len) {
            row.push(vocabs.chars.id(&c.to_string()));
        }
        encoded.word_lengths.push(row.len());
        row.resize(max_word_len, PAD_ID);
        encoded.char_ids.push(row);
    }
    encoded
}

/// Decode tag ids back to labels; ids outside the inventory are `None`.
pub fn decode_tags(tag_ids: &[usize]) -> Option<Vec<Tag>> {
    tag_ids.iter().map(|&id| Tag::from_index(id)).collect()
}

/// A batch of utterances padded to a common length. Padded positions have
/// PAD word ids, all-PAD char rows, zero word length, and `mask = false`;
/// the loss and all metrics ignore them.
#[derive(Debug, Clone)]
pub struct Batch {
    pub utterances: Vec<EncodedUtterance>,
    pub max_len: usize,
}

pub fn pad_batch(encoded: &[EncodedUtterance]) -> Result<Batch, EncodingError> {
    if encoded.is_empty() {
        return Err(EncodingError::Contract("cannot pad an empty batch".into()));
    }
    let max_len = encoded.iter().map(|u| u.len()).max().unwrap();
    let max_word_len = encoded
        .iter()
        .filter_map(|u| u.char_ids.first().map(|row| row.len()))
        .max()
        .unwrap_or(1);
    let utterances = encoded
        .iter()
        .map(|u| {
            let mut padded = u.clone();
            padded.word_ids.resize(max_len, PAD_ID);
            padded.char_ids.resize(max_len, vec![PAD_ID; max_word_len]);
            padded.word_lengths.resize(max_len, 0);
            padded.tag_ids.resize(max_len, 0);
            padded.mask.resize(max_len, false);
            padded
        })
        .collect();
    Ok(Batch {
        utterances,
        max_len,
    })
}
