//! Model building blocks: embedding lookups, the LSTM cell and sequence
//! runners, the per-word character encoder, the two tagger architectures
//! (word-only and word+character), parameter initialization, and Adam.
//!
//! Gate ordering inside every `4·hidden` axis is fixed: input, forget,
//! candidate, output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::EncodedUtterance;
use crate::tensor::{finite_diff_check_multi, Tape, Tensor, TensorError, TensorId};

#[derive(Debug, Error)]
pub enum LayerError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("optimizer: non-finite gradient in parameter '{param}'")]
    NonFiniteGradient { param: String },
    #[error("contract violation: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Word embeddings only.
    Word,
    /// Word embeddings concatenated with a per-word character encoding.
    WordChar,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Word => "word",
            Architecture::WordChar => "wordchar",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(Architecture::Word),
            "wordchar" => Ok(Architecture::WordChar),
            other => Err(format!("unknown architecture '{other}' (expected word|wordchar)")),
        }
    }
}

/// Layer sizes. The char/word hidden defaults (20 and 50) are the fixed
/// reference sizes; embedding dims are modest configurable defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub word_hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            word_dim: 64,
            char_dim: 16,
            char_hidden: 20,
            word_hidden: 50,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VocabSizes {
    pub words: usize,
    pub chars: usize,
    pub labels: usize,
}

/// Weights of one LSTM direction: `w [input_dim × 4·hidden]`,
/// `u [hidden × 4·hidden]`, `b [4·hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
    pub hidden: usize,
}

impl LstmParams {
    fn glorot(rng: &mut ChaCha8Rng, input_dim: usize, hidden: usize) -> Self {
        let w = glorot_uniform(rng, input_dim, 4 * hidden);
        let u = glorot_uniform(rng, hidden, 4 * hidden);
        // Zero biases except the forget gate, initialized to 1.
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(1.0);
        LstmParams {
            w,
            u,
            b: Tensor::from_vec(b),
            hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape()[0]
    }
}

fn glorot_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-s..s))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("consistent shape")
}

/// All parameters of one tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub architecture: Architecture,
    pub dims: Dims,
    pub word_embed: Tensor,
    pub char_embed: Option<Tensor>,
    pub char_lstm: Option<LstmParams>,
    pub fwd_lstm: LstmParams,
    pub bwd_lstm: LstmParams,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl ModelParams {
    /// Parameters in the fixed naming order used by the optimizer and the
    /// checkpoint manifest.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![("word_embed".into(), &self.word_embed)];
        if let (Some(ce), Some(cl)) = (&self.char_embed, &self.char_lstm) {
            out.push(("char_embed".into(), ce));
            out.push(("char_lstm.w".into(), &cl.w));
            out.push(("char_lstm.u".into(), &cl.u));
            out.push(("char_lstm.b".into(), &cl.b));
        }
        out.push(("fwd_lstm.w".into(), &self.fwd_lstm.w));
        out.push(("fwd_lstm.u".into(), &self.fwd_lstm.u));
        out.push(("fwd_lstm.b".into(), &self.fwd_lstm.b));
        out.push(("bwd_lstm.w".into(), &self.bwd_lstm.w));
        out.push(("bwd_lstm.u".into(), &self.bwd_lstm.u));
        out.push(("bwd_lstm.b".into(), &self.bwd_lstm.b));
        out.push(("out_w".into(), &self.out_w));
        out.push(("out_b".into(), &self.out_b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> =
            vec![("word_embed".into(), &mut self.word_embed)];
        if let (Some(ce), Some(cl)) = (&mut self.char_embed, &mut self.char_lstm) {
            out.push(("char_embed".into(), ce));
            out.push(("char_lstm.w".into(), &mut cl.w));
            out.push(("char_lstm.u".into(), &mut cl.u));
            out.push(("char_lstm.b".into(), &mut cl.b));
        }
        out.push(("fwd_lstm.w".into(), &mut self.fwd_lstm.w));
        out.push(("fwd_lstm.u".into(), &mut self.fwd_lstm.u));
        out.push(("fwd_lstm.b".into(), &mut self.fwd_lstm.b));
        out.push(("bwd_lstm.w".into(), &mut self.bwd_lstm.w));
        out.push(("bwd_lstm.u".into(), &mut self.bwd_lstm.u));
        out.push(("bwd_lstm.b".into(), &mut self.bwd_lstm.b));
        out.push(("out_w".into(), &mut self.out_w));
        out.push(("out_b".into(), &mut self.out_b));
        out
    }

    /// Rebuild a model from `(name, tensor)` pairs in `named()` order,
    /// e.g. from a checkpoint manifest. Names and shapes must match what
    /// the architecture implies exactly.
    pub fn from_named(
        architecture: Architecture,
        dims: Dims,
        tensors: Vec<(String, Tensor)>,
    ) -> Result<Self, String> {
        let mut it = tensors.into_iter();
        let mut take = |expected: &str| -> Result<Tensor, String> {
            match it.next() {
                Some((name, tensor)) if name == expected => Ok(tensor),
                Some((name, _)) => Err(format!("expected parameter '{expected}', got '{name}'")),
                None => Err(format!("missing parameter '{expected}'")),
            }
        };
        let word_embed = take("word_embed")?;
        let (char_embed, char_lstm) = match architecture {
            Architecture::WordChar => {
                let embed = take("char_embed")?;
                let lstm = LstmParams {
                    w: take("char_lstm.w")?,
                    u: take("char_lstm.u")?,
                    b: take("char_lstm.b")?,
                    hidden: dims.char_hidden,
                };
                (Some(embed), Some(lstm))
            }
            Architecture::Word => (None, None),
        };
        let mut lstm = |prefix: &str| -> Result<LstmParams, String> {
            Ok(LstmParams {
                w: take(&format!("{prefix}.w"))?,
                u: take(&format!("{prefix}.u"))?,
                b: take(&format!("{prefix}.b"))?,
                hidden: dims.word_hidden,
            })
        };
        let fwd_lstm = lstm("fwd_lstm")?;
        let bwd_lstm = lstm("bwd_lstm")?;
        let out_w = take("out_w")?;
        let out_b = take("out_b")?;
        if let Some((name, _)) = it.next() {
            return Err(format!("unexpected extra parameter '{name}'"));
        }
        Ok(ModelParams {
            architecture,
            dims,
            word_embed,
            char_embed,
            char_lstm,
            fwd_lstm,
            bwd_lstm,
            out_w,
            out_b,
        })
    }

    /// Insert every parameter as a tape leaf, in `named()` order.
    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> BoundParams {
        let ids: Vec<TensorId> = self
            .named()
            .into_iter()
            .map(|(_, tensor)| tape.leaf(tensor.clone(), requires_grad))
            .collect();
        BoundParams::from_ids(self.architecture, self.dims, &ids)
    }
}

/// Tape handles for one model's parameters, in the same order as
/// [`ModelParams::named`].
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub architecture: Architecture,
    pub dims: Dims,
    pub word_embed: TensorId,
    pub char_embed: Option<TensorId>,
    pub char_lstm: Option<BoundLstm>,
    pub fwd_lstm: BoundLstm,
    pub bwd_lstm: BoundLstm,
    pub out_w: TensorId,
    pub out_b: TensorId,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLstm {
    pub w: TensorId,
    pub u: TensorId,
    pub b: TensorId,
    pub hidden: usize,
}

impl BoundParams {
    pub fn from_ids(architecture: Architecture, dims: Dims, ids: &[TensorId]) -> Self {
        let mut it = ids.iter().copied();
        let mut next = || it.next().expect("id list matches named() order");
        let word_embed = next();
        let (char_embed, char_lstm) = match architecture {
            Architecture::WordChar => (
                Some(next()),
                Some(BoundLstm {
                    w: next(),
                    u: next(),
                    b: next(),
                    hidden: dims.char_hidden,
                }),
            ),
            Architecture::Word => (None, None),
        };
        let fwd_lstm = BoundLstm {
            w: next(),
            u: next(),
            b: next(),
            hidden: dims.word_hidden,
        };
        let bwd_lstm = BoundLstm {
            w: next(),
            u: next(),
            b: next(),
            hidden: dims.word_hidden,
        };
        BoundParams {
            architecture,
            dims,
            word_embed,
            char_embed,
            char_lstm,
            fwd_lstm,
            bwd_lstm,
            out_w: next(),
            out_b: next(),
        }
    }

    /// Handles in `named()` order; used to read gradients back out.
    pub fn ids(&self) -> Vec<TensorId> {
        let mut ids = vec![self.word_embed];
        if let (Some(ce), Some(cl)) = (self.char_embed, &self.char_lstm) {
            ids.extend([ce, cl.w, cl.u, cl.b]);
        }
        ids.extend([self.fwd_lstm.w, self.fwd_lstm.u, self.fwd_lstm.b]);
        ids.extend([self.bwd_lstm.w, self.bwd_lstm.u, self.bwd_lstm.b]);
        ids.extend([self.out_w, self.out_b]);
        ids
    }

    /// Gradients in `named()` order after a backward pass.
    pub fn grads(&self, tape: &Tape) -> Vec<Vec<f64>> {
        self.ids()
            .into_iter()
            .map(|id| tape.grad(id).map(<[f64]>::to_vec).unwrap_or_default())
            .collect()
    }
}

/// The `(name, shape)` manifest a model of this architecture must carry,
/// in [`ModelParams::named`] order.
pub fn expected_param_shapes(
    architecture: Architecture,
    dims: Dims,
    sizes: VocabSizes,
) -> Vec<(String, Vec<usize>)> {
    let mut out: Vec<(String, Vec<usize>)> =
        vec![("word_embed".into(), vec![sizes.words, dims.word_dim])];
    let word_input = match architecture {
        Architecture::WordChar => {
            let ch = dims.char_hidden;
            out.push(("char_embed".into(), vec![sizes.chars, dims.char_dim]));
            out.push(("char_lstm.w".into(), vec![dims.char_dim, 4 * ch]));
            out.push(("char_lstm.u".into(), vec![ch, 4 * ch]));
            out.push(("char_lstm.b".into(), vec![4 * ch]));
            dims.word_dim + ch
        }
        Architecture::Word => dims.word_dim,
    };
    let wh = dims.word_hidden;
    for prefix in ["fwd_lstm", "bwd_lstm"] {
        out.push((format!("{prefix}.w"), vec![word_input, 4 * wh]));
        out.push((format!("{prefix}.u"), vec![wh, 4 * wh]));
        out.push((format!("{prefix}.b"), vec![4 * wh]));
    }
    out.push(("out_w".into(), vec![2 * wh, sizes.labels]));
    out.push(("out_b".into(), vec![sizes.labels]));
    out
}

/// Initialize a model: weights uniform in ±sqrt(6/(fan_in+fan_out)),
/// biases zero except the forget gate (1.0). Deterministic per seed.
pub fn init_params(
    architecture: Architecture,
    vocab_sizes: VocabSizes,
    dims: Dims,
    rng_seed: u64,
) -> ModelParams {
    assert!(
        vocab_sizes.words >= 2 && vocab_sizes.chars >= 2,
        "vocab sizes must include PAD and at least one real symbol"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let word_embed = glorot_uniform(&mut rng, vocab_sizes.words, dims.word_dim);
    let (char_embed, char_lstm, word_input_dim) = match architecture {
        Architecture::WordChar => {
            let embed = glorot_uniform(&mut rng, vocab_sizes.chars, dims.char_dim);
            let lstm = LstmParams::glorot(&mut rng, dims.char_dim, dims.char_hidden);
            (Some(embed), Some(lstm), dims.word_dim + dims.char_hidden)
        }
        Architecture::Word => (None, None, dims.word_dim),
    };
    let fwd_lstm = LstmParams::glorot(&mut rng, word_input_dim, dims.word_hidden);
    let bwd_lstm = LstmParams::glorot(&mut rng, word_input_dim, dims.word_hidden);
    let out_w = glorot_uniform(&mut rng, 2 * dims.word_hidden, vocab_sizes.labels);
    let out_b = Tensor::from_vec(vec![0.0; vocab_sizes.labels]);
    ModelParams {
        architecture,
        dims,
        word_embed,
        char_embed,
        char_lstm,
        fwd_lstm,
        bwd_lstm,
        out_w,
        out_b,
    }
}

/// Row-gather word or character embeddings; backward scatters additively
/// into the table.
pub fn embedding_forward(
    tape: &mut Tape,
    table: TensorId,
    ids: &[usize],
) -> Result<TensorId, TensorError> {
    tape.gather_rows(table, ids)
}

/// One LSTM step. `x` is `[1×input_dim]`, `h` and `c` are `[1×hidden]`.
/// Computes `z = x·W + h·U + b`, splits z into input/forget/candidate/
/// output gates, then `c' = σ(f)⊙c + σ(i)⊙tanh(g)` and `h' = σ(o)⊙tanh(c')`.
pub fn lstm_cell_step(
    tape: &mut Tape,
    p: &BoundLstm,
    x: TensorId,
    h: TensorId,
    c: TensorId,
) -> Result<(TensorId, TensorId), TensorError> {
    let hidden = p.hidden;
    let xw = tape.matmul(x, p.w)?;
    let hu = tape.matmul(h, p.u)?;
    let zsum = tape.add(xw, hu)?;
    let z = tape.add_bias_rows(zsum, p.b)?;
    let i_gate = tape.slice_cols(z, 0, hidden)?;
    let f_gate = tape.slice_cols(z, hidden, 2 * hidden)?;
    let g_gate = tape.slice_cols(z, 2 * hidden, 3 * hidden)?;
    let o_gate = tape.slice_cols(z, 3 * hidden, 4 * hidden)?;
    let i_act = tape.sigmoid(i_gate);
    let f_act = tape.sigmoid(f_gate);
    let g_act = tape.tanh(g_gate);
    let o_act = tape.sigmoid(o_gate);
    let keep = tape.mul(f_act, c)?;
    let write = tape.mul(i_act, g_act)?;
    let c_next = tape.add(keep, write)?;
    let c_tanh = tape.tanh(c_next);
    let h_next = tape.mul(o_act, c_tanh)?;
    Ok((h_next, c_next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Run an LSTM over `xs [t×input_dim]` from zero initial state. The
/// backward direction processes the reversed input and re-reverses its
/// output, so row i of the result always aligns with token i.
pub fn lstm_sequence(
    tape: &mut Tape,
    p: &BoundLstm,
    xs: TensorId,
    direction: Direction,
) -> Result<TensorId, TensorError> {
    let t = tape.shape(xs)[0];
    if t == 0 {
        return Err(TensorError::ContractViolation(
            "lstm_sequence requires at least one timestep".into(),
        ));
    }
    let zero = Tensor::zeros(vec![1, p.hidden]);
    let mut h = tape.leaf(zero.clone(), false);
    let mut c = tape.leaf(zero, false);
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..t).collect(),
        Direction::Backward => (0..t).rev().collect(),
    };
    let mut rows = vec![None; t];
    for step in order {
        let x = tape.gather_rows(xs, &[step])?;
        let (h_next, c_next) = lstm_cell_step(tape, p, x, h, c)?;
        h = h_next;
        c = c_next;
        rows[step] = Some(h);
    }
    let rows: Vec<TensorId> = rows.into_iter().map(|r| r.unwrap()).collect();
    tape.concat_rows(&rows)
}

/// Encode each word independently: embed its characters, run the char
/// LSTM forward, and emit the hidden state at the last real (unpadded)
/// character. Padding beyond `word_lengths[i]` never enters the LSTM.
pub fn char_encoder_forward(
    tape: &mut Tape,
    char_embed: TensorId,
    char_lstm: &BoundLstm,
    char_ids: &[Vec<usize>],
    word_lengths: &[usize],
) -> Result<TensorId, LayerError> {
    if char_ids.len() != word_lengths.len() {
        return Err(LayerError::Contract(format!(
            "{} char rows but {} word lengths",
            char_ids.len(),
            word_lengths.len()
        )));
    }
    let mut outputs = Vec::with_capacity(char_ids.len());
    for (row, &len) in char_ids.iter().zip(word_lengths) {
        if len == 0 || len > row.len() {
            return Err(LayerError::Contract(format!(
                "word length {len} outside 1..={}",
                row.len()
            )));
        }
        let embeds = tape.gather_rows(char_embed, &row[..len])?;
        let zero = Tensor::zeros(vec![1, char_lstm.hidden]);
        let mut h = tape.leaf(zero.clone(), false);
        let mut c = tape.leaf(zero, false);
        for step in 0..len {
            let x = tape.gather_rows(embeds, &[step])?;
            let (h_next, c_next) = lstm_cell_step(tape, char_lstm, x, h, c)?;
            h = h_next;
            c = c_next;
        }
        outputs.push(h);
    }
    Ok(tape.concat_rows(&outputs)?)
}

/// Full tagger forward pass over the real (unmasked) prefix of one
/// encoded utterance: embeddings (word, plus characters for the
/// word+character architecture), forward and backward LSTMs concatenated
/// per token, then a time-distributed dense layer with row softmax.
/// Returns `[t×L]` probabilities with every row summing to 1.
pub fn model_forward(
    tape: &mut Tape,
    params: &BoundParams,
    encoded: &EncodedUtterance,
) -> Result<TensorId, LayerError> {
    let t = encoded.real_len();
    if t == 0 {
        return Err(LayerError::Contract(
            "model_forward requires at least one unmasked token".into(),
        ));
    }
    if encoded.mask[..t].iter().any(|m| !m) || encoded.mask[t..].iter().any(|m| *m) {
        return Err(LayerError::Contract(
            "mask must be a prefix of true values".into(),
        ));
    }

    let word_emb = embedding_forward(tape, params.word_embed, &encoded.word_ids[..t])?;
    let inputs = match params.architecture {
        Architecture::Word => word_emb,
        Architecture::WordChar => {
            let (Some(char_embed), Some(char_lstm)) = (params.char_embed, &params.char_lstm)
            else {
                return Err(LayerError::Contract(
                    "word+character architecture without character parameters".into(),
                ));
            };
            let char_enc = char_encoder_forward(
                tape,
                char_embed,
                char_lstm,
                &encoded.char_ids[..t],
                &encoded.word_lengths[..t],
            )?;
            tape.concat_last_dim(word_emb, char_enc)?
        }
    };
    let fwd = lstm_sequence(tape, &params.fwd_lstm, inputs, Direction::Forward)?;
    let bwd = lstm_sequence(tape, &params.bwd_lstm, inputs, Direction::Backward)?;
    let bi = tape.concat_last_dim(fwd, bwd)?;
    let logits = tape.matmul(bi, params.out_w)?;
    let logits = tape.add_bias_rows(logits, params.out_b)?;
    Ok(tape.softmax_rows(logits)?)
}

// ── Adam ────────────────────────────────────────────────────────────────

/// Optimizer state: first/second moment estimates aligned with
/// [`ModelParams::named`] order, the step count, and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let m = params
            .named()
            .iter()
            .map(|(_, t)| vec![0.0; t.numel()])
            .collect::<Vec<_>>();
        AdamState {
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
            m: m.clone(),
            v: m,
        }
    }
}

/// One Adam update over every parameter. `grads` must align with
/// [`ModelParams::named`] order.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Vec<f64>],
    state: &mut AdamState,
) -> Result<(), LayerError> {
    let mut named = params.named_mut();
    if named.len() != grads.len() {
        return Err(LayerError::Contract(format!(
            "{} parameters but {} gradients",
            named.len(),
            grads.len()
        )));
    }
    for ((name, tensor), grad) in named.iter().zip(grads) {
        if tensor.numel() != grad.len() {
            return Err(LayerError::Contract(format!(
                "gradient for '{name}' has {} elements, parameter has {}",
                grad.len(),
                tensor.numel()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(LayerError::NonFiniteGradient {
                param: name.clone(),
            });
        }
    }

    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for (((_, tensor), grad), (m, v)) in named
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let data = tensor.data_mut();
        for j in 0..grad.len() {
            let g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            data[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

// ── Gradient check over the full model ──────────────────────────────────

/// Finite-difference check of every parameter gradient for one
/// architecture on a random short utterance. Returns the max relative
/// error across all parameter elements.
pub fn gradient_check(
    architecture: Architecture,
    dims: Dims,
    seed: u64,
) -> Result<f64, LayerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab_sizes = VocabSizes {
        words: 8,
        chars: 10,
        labels: 3,
    };
    let t = 3;
    let max_word_len = 6;
    let word_ids: Vec<usize> = (0..t).map(|_| rng.random_range(0..vocab_sizes.words)).collect();
    let word_lengths: Vec<usize> = (0..t).map(|_| rng.random_range(1..=max_word_len)).collect();
    let char_ids: Vec<Vec<usize>> = word_lengths
        .iter()
        .map(|&len| {
            let mut row: Vec<usize> = (0..len)
                .map(|_| rng.random_range(0..vocab_sizes.chars))
                .collect();
            row.resize(max_word_len, 0);
            row
        })
        .collect();
    let tag_ids: Vec<usize> = (0..t).map(|_| rng.random_range(0..vocab_sizes.labels)).collect();
    let encoded = EncodedUtterance {
        word_ids,
        char_ids,
        word_lengths,
        tag_ids: tag_ids.clone(),
        mask: vec![true; t],
    };

    let params = init_params(architecture, vocab_sizes, dims, seed.wrapping_add(1));
    let tensors: Vec<Tensor> = params.named().into_iter().map(|(_, t)| t.clone()).collect();
    let mask = vec![true; t];
    let err = finite_diff_check_multi(
        |tape, ids| {
            let bound = BoundParams::from_ids(architecture, dims, ids);
            let probs = model_forward(tape, &bound, &encoded)
                .map_err(|e| TensorError::ContractViolation(e.to_string()))?;
            tape.sparse_cross_entropy(probs, &tag_ids, &mask)
        },
        &tensors,
        1e-5,
    )?;
    Ok(err)
}

/// Small dims that keep [`gradient_check`] fast while exercising every
/// parameter of both architectures.
pub fn gradcheck_dims() -> Dims {
    Dims {
        word_dim: 6,
        char_dim: 4,
        char_hidden: 3,
        word_hidden: 5,
    }
}
