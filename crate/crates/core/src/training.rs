//! Training loop, checkpoint serialization, and the 5-seed × 2-architecture
//! experiment protocol.
//!
//! Every source of randomness (initialization, per-epoch shuffling) flows
//! from the config seed, so a (dataset, config) pair fully determines the
//! checkpoint bytes.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Tag, TaggedUtterance, LABELS};
use crate::encoding::{
    build_vocabs, encode_utterance, pad_batch, EncodedUtterance, EncodingError, Vocabs,
    DEFAULT_MAX_WORD_LEN,
};
use crate::layers::{
    adam_step, expected_param_shapes, init_params, model_forward, AdamState, Architecture,
    BoundParams, Dims, LayerError, ModelParams, VocabSizes,
};
use crate::tensor::{Tape, Tensor, TensorError, TensorId};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
    #[error("protocol run ({architecture}, seed {seed}): {source}")]
    Protocol {
        architecture: Architecture,
        seed: u64,
        #[source]
        source: Box<TrainError>,
    },
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Stop after this many epochs without dev-loss improvement; the best
    /// parameters seen are restored. Only active when a dev set is given.
    pub early_stop_patience: Option<usize>,
    pub dims: Dims,
    pub max_word_len: usize,
}

impl TrainConfig {
    pub fn new(architecture: Architecture) -> Self {
        TrainConfig {
            architecture,
            epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 42,
            shuffle: true,
            early_stop_patience: Some(3),
            dims: Dims::default(),
            max_word_len: DEFAULT_MAX_WORD_LEN,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        if self.max_word_len == 0 {
            return Err(TrainError::Config("max_word_len must be at least 1".into()));
        }
        let d = &self.dims;
        if d.word_dim == 0 || d.char_dim == 0 || d.char_hidden == 0 || d.word_hidden == 0 {
            return Err(TrainError::Config("all layer dims must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// A trained model: config, parameters, vocabularies, and the per-epoch
/// train loss history.
#[derive(Debug, Clone)]
pub struct ModelCheckpoint {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub vocabs: Vocabs,
    pub train_loss_history: Vec<f64>,
}

/// Forward every utterance of a (padded) batch over its real prefix and
/// stack the probability rows into a single cross-entropy: the mean of
/// `−log p` over all unmasked positions in the batch. Padded positions
/// never enter the recurrence or the loss.
fn forward_batch_loss(
    tape: &mut Tape,
    bound: &BoundParams,
    batch: &[EncodedUtterance],
) -> Result<(TensorId, usize), TrainError> {
    let mut prob_parts = Vec::with_capacity(batch.len());
    let mut targets = Vec::new();
    for enc in batch {
        let t = enc.real_len();
        if t == 0 {
            continue;
        }
        let probs = model_forward(tape, bound, enc)?;
        prob_parts.push(probs);
        targets.extend_from_slice(&enc.tag_ids[..t]);
    }
    if prob_parts.is_empty() {
        return Err(TrainError::Config("batch has no unmasked positions".into()));
    }
    let all = tape.concat_rows(&prob_parts)?;
    let mask = vec![true; targets.len()];
    let loss = tape.sparse_cross_entropy(all, &targets, &mask)?;
    Ok((loss, targets.len()))
}

/// Mean loss of a dataset under fixed parameters (no gradients).
fn dataset_loss(
    params: &ModelParams,
    encoded: &[EncodedUtterance],
    batch_size: usize,
) -> Result<f64, TrainError> {
    let mut total = 0.0;
    let mut positions = 0usize;
    for chunk in encoded.chunks(batch_size) {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let (loss, n) = forward_batch_loss(&mut tape, &bound, chunk)?;
        total += tape.data(loss)[0] * n as f64;
        positions += n;
    }
    Ok(total / positions as f64)
}

/// Train one model. Deterministic given the seed: initialization, batch
/// order, and shuffling all derive from `config.seed`. Aborts on the
/// first non-finite loss rather than continuing silently.
pub fn train_model(
    config: &TrainConfig,
    train: &[TaggedUtterance],
    dev: Option<&[TaggedUtterance]>,
) -> Result<ModelCheckpoint, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let vocabs = build_vocabs(train)?;
    let sizes = VocabSizes {
        words: vocabs.words.size(),
        chars: vocabs.chars.size(),
        labels: LABELS.len(),
    };
    let mut params = init_params(config.architecture, sizes, config.dims, config.seed);
    let mut adam = AdamState::new(&params, config.lr, config.beta1, config.beta2, config.eps);

    let encoded: Vec<EncodedUtterance> = train
        .iter()
        .map(|u| encode_utterance(&vocabs, u, config.max_word_len))
        .collect();
    let dev_encoded: Option<Vec<EncodedUtterance>> = dev.map(|d| {
        d.iter()
            .map(|u| encode_utterance(&vocabs, u, config.max_word_len))
            .collect()
    });

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best_dev = f64::INFINITY;
    let mut best_params: Option<ModelParams> = None;
    let mut epochs_since_best = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        let mut positions = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<EncodedUtterance> =
                chunk.iter().map(|&i| encoded[i].clone()).collect();
            let padded = pad_batch(&batch)?;
            // Fresh tape per step; gradients reset implicitly.
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape, true);
            let (loss_id, n) = forward_batch_loss(&mut tape, &bound, &padded.utterances)?;
            let loss = tape.data(loss_id)[0];
            if !loss.is_finite() {
                return Err(TrainError::NanLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            tape.backward(loss_id)?;
            let grads = bound.grads(&tape);
            adam_step(&mut params, &grads, &mut adam)?;
            total += loss * n as f64;
            positions += n;
        }
        let epoch_loss = total / positions as f64;
        if !epoch_loss.is_finite() {
            return Err(TrainError::NanLoss { epoch, batch: 0 });
        }
        history.push(epoch_loss);

        if let (Some(dev_enc), Some(patience)) = (&dev_encoded, config.early_stop_patience) {
            let dev_loss = dataset_loss(&params, dev_enc, config.batch_size)?;
            if dev_loss < best_dev {
                best_dev = dev_loss;
                best_params = Some(params.clone());
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= patience {
                    break;
                }
            }
        }
    }
    if let Some(best) = best_params {
        params = best;
    }

    Ok(ModelCheckpoint {
        config: config.clone(),
        params,
        vocabs,
        train_loss_history: history,
    })
}

impl ModelCheckpoint {
    /// Greedy per-token tags for a tokenized utterance: argmax over the
    /// softmax row, lowest index winning ties.
    pub fn predict_tags(&self, tokens: &[String]) -> Result<Vec<Tag>, TrainError> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let encoded =
            crate::encoding::encode_tokens(&self.vocabs, tokens, self.config.max_word_len);
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let probs = model_forward(&mut tape, &bound, &encoded)?;
        let cols = LABELS.len();
        let data = tape.data(probs);
        Ok((0..tokens.len())
            .map(|r| {
                let row = &data[r * cols..(r + 1) * cols];
                let mut best = 0;
                for c in 1..cols {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                Tag::from_index(best).unwrap()
            })
            .collect())
    }

    /// Loss of one utterance evaluated alone, with no padding, plus its
    /// position count.
    pub fn utterance_loss(&self, u: &TaggedUtterance) -> Result<(f64, usize), TrainError> {
        let encoded = encode_utterance(&self.vocabs, u, self.config.max_word_len);
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let (loss, n) = forward_batch_loss(&mut tape, &bound, std::slice::from_ref(&encoded))?;
        Ok((tape.data(loss)[0], n))
    }

    /// Loss of a set of utterances evaluated as one padded batch: the mean
    /// over all unmasked positions.
    pub fn batch_loss(&self, utterances: &[TaggedUtterance]) -> Result<(f64, usize), TrainError> {
        let encoded: Vec<EncodedUtterance> = utterances
            .iter()
            .map(|u| encode_utterance(&self.vocabs, u, self.config.max_word_len))
            .collect();
        let padded = pad_batch(&encoded)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let (loss, n) = forward_batch_loss(&mut tape, &bound, &padded.utterances)?;
        Ok((tape.data(loss)[0], n))
    }
}

// ── Checkpoint file format ──────────────────────────────────────────────
//
// 8-byte magic, little-endian u64 header length, JSON header (config,
// vocab content hash, vocabularies, parameter manifest with shapes and
// byte offsets, loss history), then little-endian f64 arrays in manifest
// order. Offsets are relative to the start of the data section.

const CHECKPOINT_MAGIC: &[u8; 8] = b"NTAGCKP1";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint parameter '{param}' has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        param: String,
        got: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("vocabulary hash mismatch: header says {header}, content hashes to {content}")]
    VocabHashMismatch { header: String, content: String },
    #[error("architecture mismatch: checkpoint holds {found}, requested {requested}")]
    ArchitectureMismatch {
        found: Architecture,
        requested: Architecture,
    },
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    config: TrainConfig,
    vocab_sha256: String,
    words: Vec<String>,
    chars: Vec<String>,
    labels: Vec<String>,
    manifest: Vec<ManifestEntry>,
    train_loss_history: Vec<f64>,
}

pub fn save_checkpoint(ckpt: &ModelCheckpoint, path: &Path) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let named = ckpt.params.named();
    let mut manifest = Vec::with_capacity(named.len());
    let mut data = Vec::new();
    for (name, tensor) in &named {
        manifest.push(ManifestEntry {
            name: name.clone(),
            shape: tensor.shape().to_vec(),
            offset: data.len() as u64,
            len: (tensor.numel() * 8) as u64,
        });
        for v in tensor.data() {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = CheckpointHeader {
        format_version: CHECKPOINT_VERSION,
        config: ckpt.config.clone(),
        vocab_sha256: ckpt.vocabs.content_hash(),
        words: ckpt.vocabs.words.symbols().to_vec(),
        chars: ckpt.vocabs.chars.symbols().to_vec(),
        labels: LABELS.iter().map(|s| s.to_string()).collect(),
        manifest,
        train_loss_history: ckpt.train_loss_history.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| CheckpointError::Corrupt(format!("header serialization: {e}")))?;

    let mut out = Vec::with_capacity(16 + header_bytes.len() + data.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&data);
    std::fs::write(path, out).map_err(io_err)
}

/// Load and validate a checkpoint. Shapes are checked against what the
/// architecture and vocabularies imply, the vocabulary hash must match,
/// and a truncated or oversized file is rejected without returning a
/// partial model. `expected` rejects checkpoints of the other
/// architecture.
pub fn load_checkpoint(
    path: &Path,
    expected: Option<Architecture>,
) -> Result<ModelCheckpoint, CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut bytes)
        .map_err(io_err)?;

    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let data_start = 16 + header_len;
    if bytes.len() < data_start {
        return Err(CheckpointError::Corrupt("truncated header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[16..data_start])
        .map_err(|e| CheckpointError::Corrupt(format!("header parse: {e}")))?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Corrupt(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    if header.labels != LABELS {
        return Err(CheckpointError::Corrupt(format!(
            "unsupported label inventory {:?}",
            header.labels
        )));
    }
    if let Some(requested) = expected {
        if header.config.architecture != requested {
            return Err(CheckpointError::ArchitectureMismatch {
                found: header.config.architecture,
                requested,
            });
        }
    }

    let vocabs = Vocabs {
        words: crate::encoding::Vocab::from_symbols(header.words.clone()),
        chars: crate::encoding::Vocab::from_symbols(header.chars.clone()),
    };
    let content = vocabs.content_hash();
    if content != header.vocab_sha256 {
        return Err(CheckpointError::VocabHashMismatch {
            header: header.vocab_sha256,
            content,
        });
    }

    let sizes = VocabSizes {
        words: vocabs.words.size(),
        chars: vocabs.chars.size(),
        labels: LABELS.len(),
    };
    let expected_shapes =
        expected_param_shapes(header.config.architecture, header.config.dims, sizes);
    if header.manifest.len() != expected_shapes.len() {
        return Err(CheckpointError::Corrupt(format!(
            "manifest has {} parameters, architecture needs {}",
            header.manifest.len(),
            expected_shapes.len()
        )));
    }

    let data = &bytes[data_start..];
    let mut tensors = Vec::with_capacity(header.manifest.len());
    let mut expected_offset = 0u64;
    for (entry, (name, shape)) in header.manifest.iter().zip(&expected_shapes) {
        if &entry.name != name || entry.shape != *shape {
            return Err(CheckpointError::ShapeMismatch {
                param: entry.name.clone(),
                got: entry.shape.clone(),
                expected: shape.clone(),
            });
        }
        let numel: usize = shape.iter().product();
        if entry.offset != expected_offset || entry.len != (numel * 8) as u64 {
            return Err(CheckpointError::Corrupt(format!(
                "manifest entry '{}' has inconsistent offsets",
                entry.name
            )));
        }
        expected_offset += entry.len;
        let start = entry.offset as usize;
        let end = start + entry.len as usize;
        if end > data.len() {
            return Err(CheckpointError::Corrupt(format!(
                "data section truncated at parameter '{}'",
                entry.name
            )));
        }
        let values: Vec<f64> = data[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((
            entry.name.clone(),
            Tensor::new(shape.clone(), values)
                .map_err(|e| CheckpointError::Corrupt(e.to_string()))?,
        ));
    }
    if expected_offset as usize != data.len() {
        return Err(CheckpointError::Corrupt(format!(
            "data section has {} bytes, manifest accounts for {expected_offset}",
            data.len()
        )));
    }

    let params = ModelParams::from_named(
        header.config.architecture,
        header.config.dims,
        tensors,
    )
    .map_err(CheckpointError::Corrupt)?;

    Ok(ModelCheckpoint {
        config: header.config,
        params,
        vocabs,
        train_loss_history: header.train_loss_history,
    })
}

// ── Experiment protocol ─────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRow {
    pub architecture: Architecture,
    pub seed: u64,
    pub strict_acc: f64,
    pub partial_acc: f64,
}

/// Per-model scores plus per-architecture means, in the layout of the
/// architecture-comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolSummary {
    pub n_seeds: usize,
    pub rows: Vec<ProtocolRow>,
}

impl ProtocolSummary {
    fn arch_rows(&self, architecture: Architecture) -> impl Iterator<Item = &ProtocolRow> {
        self.rows
            .iter()
            .filter(move |r| r.architecture == architecture)
    }

    pub fn mean_strict(&self, architecture: Architecture) -> f64 {
        let scores: Vec<f64> = self.arch_rows(architecture).map(|r| r.strict_acc).collect();
        scores.iter().sum::<f64>() / scores.len().max(1) as f64
    }

    pub fn mean_partial(&self, architecture: Architecture) -> f64 {
        let scores: Vec<f64> = self
            .arch_rows(architecture)
            .map(|r| r.partial_acc)
            .collect();
        scores.iter().sum::<f64>() / scores.len().max(1) as f64
    }

    /// Markdown table with one strict/partial row pair per model and a
    /// bolded average pair per architecture.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Model Number | Accuracy Measure | Word + Character | Word Only |\n");
        out.push_str("|---|---|---|---|\n");
        let wc: Vec<&ProtocolRow> = self.arch_rows(Architecture::WordChar).collect();
        let wo: Vec<&ProtocolRow> = self.arch_rows(Architecture::Word).collect();
        for i in 0..self.n_seeds {
            let strict = |rows: &[&ProtocolRow]| {
                rows.get(i)
                    .map_or("--".to_string(), |r| format!("{:.4}", r.strict_acc))
            };
            let partial = |rows: &[&ProtocolRow]| {
                rows.get(i)
                    .map_or("--".to_string(), |r| format!("{:.4}", r.partial_acc))
            };
            out.push_str(&format!(
                "| {} | Strict Accuracy | {} | {} |\n",
                i + 1,
                strict(&wc),
                strict(&wo)
            ));
            out.push_str(&format!(
                "| {} | Partial Accuracy | {} | {} |\n",
                i + 1,
                partial(&wc),
                partial(&wo)
            ));
        }
        out.push_str(&format!(
            "| Average | Strict Accuracy | **{:.4}** | **{:.4}** |\n",
            self.mean_strict(Architecture::WordChar),
            self.mean_strict(Architecture::Word)
        ));
        out.push_str(&format!(
            "| Average | Partial Accuracy | **{:.4}** | **{:.4}** |\n",
            self.mean_partial(Architecture::WordChar),
            self.mean_partial(Architecture::Word)
        ));
        out
    }
}

/// Train `n_seeds` models per architecture (seeds `base..base+n`),
/// evaluate each on the test set, and summarize. Runs are independent and
/// execute in parallel; results keep a fixed order regardless of thread
/// scheduling.
pub fn run_protocol(
    base: &TrainConfig,
    n_seeds: usize,
    train: &[TaggedUtterance],
    test: &[TaggedUtterance],
) -> Result<ProtocolSummary, TrainError> {
    if n_seeds == 0 {
        return Err(TrainError::Config("n_seeds must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(2 * n_seeds);
    for architecture in [Architecture::WordChar, Architecture::Word] {
        for s in 0..n_seeds {
            let mut config = base.clone();
            config.architecture = architecture;
            config.seed = base.seed + s as u64;
            runs.push(config);
        }
    }
    let rows: Result<Vec<ProtocolRow>, TrainError> = runs
        .par_iter()
        .map(|config| {
            let run = |config: &TrainConfig| -> Result<ProtocolRow, TrainError> {
                let ckpt = train_model(config, train, None)?;
                let report = crate::evaluation::evaluate(&ckpt, test).map_err(|e| match e {
                    crate::evaluation::EvalError::Train(t) => t,
                    other => TrainError::Config(other.to_string()),
                })?;
                Ok(ProtocolRow {
                    architecture: config.architecture,
                    seed: config.seed,
                    strict_acc: report.overall.strict_acc,
                    partial_acc: report.overall.partial_acc,
                })
            };
            run(config).map_err(|source| TrainError::Protocol {
                architecture: config.architecture,
                seed: config.seed,
                source: Box::new(source),
            })
        })
        .collect();
    Ok(ProtocolSummary {
        n_seeds,
        rows: rows?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fill_template, FullName, Gender, Template};

    fn toy_dataset(n: usize) -> Vec<TaggedUtterance> {
        let templates = [
            "add {NAME} to my dental plan",
            "remove {NAME} from my vision coverage",
            "{NAME} needs a new medical card",
            "does {NAME} have life benefits",
        ];
        (0..n)
            .map(|i| {
                let tpl = Template::new(templates[i % templates.len()], "toy").unwrap();
                let name = FullName {
                    first: format!("{}or{}", ["Bel", "Dar", "Fin", "Gol", "Hem"][i % 5], i),
                    last: (i % 2 == 0).then(|| format!("Kel{}an", i)),
                    gender: if i % 2 == 0 { Gender::F } else { Gender::M },
                    country: "Aldovia".into(),
                };
                fill_template(&tpl, &name).0
            })
            .collect()
    }

    fn fast_config(architecture: Architecture) -> TrainConfig {
        let mut config = TrainConfig::new(architecture);
        config.epochs = 3;
        config.batch_size = 8;
        config.dims = Dims {
            word_dim: 8,
            char_dim: 4,
            char_hidden: 4,
            word_hidden: 6,
        };
        config.max_word_len = 12;
        config
    }

    #[test]
    fn config_validation_rejects_zero_epochs() {
        let mut config = TrainConfig::new(Architecture::Word);
        config.epochs = 0;
        assert!(matches!(config.validate(), Err(TrainError::Config(_))));
        config.epochs = 1;
        config.batch_size = 0;
        assert!(matches!(config.validate(), Err(TrainError::Config(_))));
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data = toy_dataset(16);
        let config = fast_config(Architecture::WordChar);
        let a = train_model(&config, &data, None).unwrap();
        let b = train_model(&config, &data, None).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.train_loss_history, b.train_loss_history);

        let dir = tempfile::tempdir().unwrap();
        let (pa, pb) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        save_checkpoint(&a, &pa).unwrap();
        save_checkpoint(&b, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    }

    #[test]
    fn loss_history_is_finite_and_decreasing_on_toy_data() {
        let data = toy_dataset(16);
        let mut config = fast_config(Architecture::Word);
        config.epochs = 8;
        let ckpt = train_model(&config, &data, None).unwrap();
        assert_eq!(ckpt.train_loss_history.len(), 8);
        assert!(ckpt.train_loss_history.iter().all(|l| l.is_finite()));
        assert!(ckpt.train_loss_history.last().unwrap() < ckpt.train_loss_history.first().unwrap());
    }

    #[test]
    fn empty_train_set_is_rejected() {
        let config = fast_config(Architecture::Word);
        assert!(matches!(
            train_model(&config, &[], None),
            Err(TrainError::EmptyTrainSet)
        ));
    }

    #[test]
    fn early_stopping_uses_dev_loss() {
        let data = toy_dataset(16);
        let dev = toy_dataset(8);
        let mut config = fast_config(Architecture::Word);
        config.epochs = 30;
        config.early_stop_patience = Some(2);
        let ckpt = train_model(&config, &data, Some(&dev)).unwrap();
        // Either it ran out of epochs or it stopped early; history length
        // tells which, and both are acceptable — the contract is that the
        // run terminates and records every epoch it executed.
        assert!(!ckpt.train_loss_history.is_empty());
        assert!(ckpt.train_loss_history.len() <= 30);
    }

    #[test]
    fn checkpoint_roundtrip_preserves_predictions_exactly() {
        let data = toy_dataset(12);
        let config = fast_config(Architecture::WordChar);
        let ckpt = train_model(&config, &data, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path, None).unwrap();
        assert_eq!(ckpt.params, loaded.params);
        for u in &data {
            assert_eq!(
                ckpt.predict_tags(&u.tokens).unwrap(),
                loaded.predict_tags(&u.tokens).unwrap()
            );
        }
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let data = toy_dataset(8);
        let config = fast_config(Architecture::Word);
        let ckpt = train_model(&config, &data, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load_checkpoint(&path, None),
            Err(CheckpointError::Corrupt(_))
        ));

        std::fs::write(&path, b"garbage").unwrap();
        assert!(matches!(
            load_checkpoint(&path, None),
            Err(CheckpointError::BadMagic)
        ));
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let data = toy_dataset(8);
        let config = fast_config(Architecture::Word);
        let ckpt = train_model(&config, &data, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        assert!(load_checkpoint(&path, Some(Architecture::Word)).is_ok());
        assert!(matches!(
            load_checkpoint(&path, Some(Architecture::WordChar)),
            Err(CheckpointError::ArchitectureMismatch { .. })
        ));
    }

    #[test]
    fn tampered_vocab_hash_is_rejected() {
        let data = toy_dataset(8);
        let config = fast_config(Architecture::Word);
        let ckpt = train_model(&config, &data, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip a character inside the stored word list.
        let needle = b"\"words\":[\"";
        let pos = bytes
            .windows(needle.len())
            .position(|w| w == needle)
            .unwrap()
            + needle.len();
        bytes[pos] = if bytes[pos] == b'Z' { b'Y' } else { b'Z' };
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path, None),
            Err(CheckpointError::VocabHashMismatch { .. })
        ));
    }

    #[test]
    fn protocol_counts_rows_and_means() {
        let data = toy_dataset(12);
        let test = toy_dataset(12);
        let mut config = fast_config(Architecture::Word);
        config.epochs = 2;
        let summary = run_protocol(&config, 1, &data, &test).unwrap();
        assert_eq!(summary.rows.len(), 2);
        let wc: Vec<&ProtocolRow> = summary
            .rows
            .iter()
            .filter(|r| r.architecture == Architecture::WordChar)
            .collect();
        assert_eq!(wc.len(), 1);
        assert_eq!(summary.mean_strict(Architecture::WordChar), wc[0].strict_acc);
        let md = summary.to_markdown();
        assert!(md.contains("| Average | Strict Accuracy |"), "{md}");
    }

    #[test]
    fn protocol_means_are_arithmetic_means() {
        let summary = ProtocolSummary {
            n_seeds: 2,
            rows: vec![
                ProtocolRow {
                    architecture: Architecture::WordChar,
                    seed: 0,
                    strict_acc: 0.8,
                    partial_acc: 0.9,
                },
                ProtocolRow {
                    architecture: Architecture::WordChar,
                    seed: 1,
                    strict_acc: 0.6,
                    partial_acc: 0.7,
                },
            ],
        };
        assert!((summary.mean_strict(Architecture::WordChar) - 0.7).abs() < 1e-15);
        assert!((summary.mean_partial(Architecture::WordChar) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn batched_loss_matches_per_utterance_recombination() {
        let data = toy_dataset(10);
        let config = fast_config(Architecture::WordChar);
        let ckpt = train_model(&config, &data, None).unwrap();
        let (batched, total_n) = ckpt.batch_loss(&data).unwrap();
        let mut weighted = 0.0;
        let mut n_sum = 0usize;
        for u in &data {
            let (loss, n) = ckpt.utterance_loss(u).unwrap();
            weighted += loss * n as f64;
            n_sum += n;
        }
        assert_eq!(total_n, n_sum);
        assert!((batched - weighted / n_sum as f64).abs() <= 1e-10);
    }
}
