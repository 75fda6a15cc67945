//! Person-name tagging with BiLSTM sequence models, end to end: corpus
//! curation from name pools and utterance templates, training of word-only
//! and word+character taggers on a small autodiff engine, and span-level
//! strict/partial accuracy evaluation with demographic breakdowns.

pub mod cli;
pub mod data;
pub mod encoding;
pub mod evaluation;
pub mod layers;
pub mod tensor;
pub mod training;
