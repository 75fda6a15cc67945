//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured figures (run with `--nocapture` to see
//! them). Oracles here are coded independently of the library paths they
//! check.

use std::collections::HashSet;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nametag_core::data::{
    build_dataset, generate_synthetic_corpus, tokenize, PipelineConfig, SyntheticSpec, Tag,
    TaggedUtterance,
};
use nametag_core::encoding::{encode_utterance, pad_batch};
use nametag_core::evaluation::{
    evaluate, evaluate_predictions, extract_spans, score_utterance, MatchOutcome, Span,
};
use nametag_core::layers::{
    adam_step, gradcheck_dims, gradient_check, init_params, model_forward, AdamState,
    Architecture, Dims, ModelParams, VocabSizes,
};
use nametag_core::tensor::{Tape, Tensor};
use nametag_core::training::{
    load_checkpoint, run_protocol, save_checkpoint, train_model, ModelCheckpoint, TrainConfig,
};

fn synthetic_split(
    countries: usize,
    names_per_country: usize,
    n_templates: usize,
    test_fraction: f64,
    seed: u64,
) -> nametag_core::data::DatasetSplit {
    let spec = SyntheticSpec {
        n_templates,
        n_names_per_country: names_per_country,
        countries,
        rng_seed: seed,
    };
    let (templates, pool) = generate_synthetic_corpus(&spec).unwrap();
    let config = PipelineConfig {
        test_fraction,
        seed,
        allow_nameless: false,
    };
    build_dataset(&pool, &templates, &config).unwrap().0
}

fn small_train_config(architecture: Architecture) -> TrainConfig {
    let mut config = TrainConfig::new(architecture);
    config.epochs = 30;
    config.batch_size = 16;
    config.dims = Dims {
        word_dim: 16,
        char_dim: 8,
        char_hidden: 8,
        word_hidden: 12,
    };
    config.max_word_len = 16;
    config.early_stop_patience = None;
    config
}

// ── Criterion 1: gradient correctness ───────────────────────────────────

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for arch in [Architecture::Word, Architecture::WordChar] {
        let err = gradient_check(arch, gradcheck_dims(), 42).unwrap();
        assert!(err <= 1e-4, "{arch}: max rel. gradient error {err}");
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "gradcheck took {elapsed:?}");
    println!(
        "criterion 1 PASS: gradcheck max rel. error {worst:.2e} (≤ 1e-4) in {:.1}s",
        elapsed.as_secs_f64()
    );
}

// ── Criterion 2: layer oracles ──────────────────────────────────────────

fn oracle_sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        v.exp() / (1.0 + v.exp())
    }
}

// Scalar-loop LSTM step, written directly from the gate equations.
fn oracle_lstm_step(
    w: &[f64],
    u: &[f64],
    b: &[f64],
    input_dim: usize,
    hidden: usize,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let cols = 4 * hidden;
    let mut z = b.to_vec();
    for j in 0..cols {
        for i in 0..input_dim {
            z[j] += x[i] * w[i * cols + j];
        }
        for k in 0..hidden {
            z[j] += h[k] * u[k * cols + j];
        }
    }
    let mut h_next = vec![0.0; hidden];
    let mut c_next = vec![0.0; hidden];
    for j in 0..hidden {
        let i_gate = oracle_sigmoid(z[j]);
        let f_gate = oracle_sigmoid(z[hidden + j]);
        let g_gate = z[2 * hidden + j].tanh();
        let o_gate = oracle_sigmoid(z[3 * hidden + j]);
        c_next[j] = f_gate * c[j] + i_gate * g_gate;
        h_next[j] = o_gate * c_next[j].tanh();
    }
    (h_next, c_next)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

#[test]
fn criterion_2_layer_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // LSTM cell vs the scalar-loop oracle.
    for _ in 0..100 {
        let input_dim = rng.random_range(1..6);
        let hidden = rng.random_range(1..6);
        let (w, u, b) = (
            rand_vec(&mut rng, input_dim * 4 * hidden),
            rand_vec(&mut rng, hidden * 4 * hidden),
            rand_vec(&mut rng, 4 * hidden),
        );
        let (x, h, c) = (
            rand_vec(&mut rng, input_dim),
            rand_vec(&mut rng, hidden),
            rand_vec(&mut rng, hidden),
        );
        let (h_want, c_want) = oracle_lstm_step(&w, &u, &b, input_dim, hidden, &x, &h, &c);

        let mut tape = Tape::new();
        let p = nametag_core::layers::BoundLstm {
            w: tape.leaf(Tensor::new(vec![input_dim, 4 * hidden], w).unwrap(), false),
            u: tape.leaf(Tensor::new(vec![hidden, 4 * hidden], u).unwrap(), false),
            b: tape.leaf(Tensor::from_vec(b), false),
            hidden,
        };
        let xi = tape.leaf(Tensor::new(vec![1, input_dim], x).unwrap(), false);
        let hi = tape.leaf(Tensor::new(vec![1, hidden], h).unwrap(), false);
        let ci = tape.leaf(Tensor::new(vec![1, hidden], c).unwrap(), false);
        let (h1, c1) = nametag_core::layers::lstm_cell_step(&mut tape, &p, xi, hi, ci).unwrap();
        for (got, want) in tape.data(h1).iter().zip(&h_want) {
            assert!((got - want).abs() <= 1e-12, "lstm h: {got} vs {want}");
        }
        for (got, want) in tape.data(c1).iter().zip(&c_want) {
            assert!((got - want).abs() <= 1e-12, "lstm c: {got} vs {want}");
        }
    }

    // softmax_rows vs the naive exp/sum formula (no max subtraction;
    // inputs are small enough that it cannot overflow).
    for _ in 0..100 {
        let rows = rng.random_range(1..5);
        let cols = rng.random_range(1..6);
        let data = rand_vec(&mut rng, rows * cols);
        let mut want = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            for c in 0..cols {
                want[r * cols + c] = row[c].exp() / total;
            }
        }
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![rows, cols], data).unwrap(), false);
        let s = tape.softmax_rows(x).unwrap();
        for (got, want) in tape.data(s).iter().zip(&want) {
            assert!((got - want).abs() <= 1e-12, "softmax: {got} vs {want}");
        }
    }

    // sparse_cross_entropy vs a hand loop.
    for _ in 0..100 {
        let rows = rng.random_range(1..6);
        let cols = rng.random_range(2..5);
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let mut total = 0.0;
            for c in 0..cols {
                let v: f64 = rng.random_range(0.01..1.0);
                data[r * cols + c] = v;
                total += v;
            }
            for c in 0..cols {
                data[r * cols + c] /= total;
            }
        }
        let targets: Vec<usize> = (0..rows).map(|_| rng.random_range(0..cols)).collect();
        let mut mask: Vec<bool> = (0..rows).map(|_| rng.random_bool(0.7)).collect();
        mask[0] = true;
        let mut want = 0.0;
        let mut n = 0usize;
        for r in 0..rows {
            if mask[r] {
                want -= data[r * cols + targets[r]].max(1e-12).ln();
                n += 1;
            }
        }
        want /= n as f64;
        let mut tape = Tape::new();
        let probs = tape.leaf(Tensor::new(vec![rows, cols], data).unwrap(), false);
        let loss = tape.sparse_cross_entropy(probs, &targets, &mask).unwrap();
        let got = tape.data(loss)[0];
        assert!((got - want).abs() <= 1e-12, "ce: {got} vs {want}");
    }

    // adam_step vs an element-wise hand trace over three steps.
    for _ in 0..100 {
        let sizes = VocabSizes {
            words: 3,
            chars: 3,
            labels: 3,
        };
        let dims = Dims {
            word_dim: 2,
            char_dim: 2,
            char_hidden: 2,
            word_hidden: 2,
        };
        let (lr, b1, b2, eps) = (
            rng.random_range(1e-4..1e-2),
            rng.random_range(0.8..0.95),
            rng.random_range(0.99..0.9999),
            1e-8,
        );
        let mut params = init_params(Architecture::Word, sizes, dims, rng.random_range(0..1000));
        let reference: Vec<Vec<f64>> = params
            .named()
            .iter()
            .map(|(_, t)| t.data().to_vec())
            .collect();
        let grad_steps: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|_| {
                params
                    .named()
                    .iter()
                    .map(|(_, t)| rand_vec(&mut rng, t.numel()))
                    .collect()
            })
            .collect();

        // Hand trace.
        let mut want = reference.clone();
        let mut m: Vec<Vec<f64>> = reference.iter().map(|p| vec![0.0; p.len()]).collect();
        let mut v = m.clone();
        for (t, grads) in grad_steps.iter().enumerate() {
            let step = (t + 1) as i32;
            for (pi, grad) in grads.iter().enumerate() {
                for (j, &g) in grad.iter().enumerate() {
                    m[pi][j] = b1 * m[pi][j] + (1.0 - b1) * g;
                    v[pi][j] = b2 * v[pi][j] + (1.0 - b2) * g * g;
                    let m_hat = m[pi][j] / (1.0 - b1.powi(step));
                    let v_hat = v[pi][j] / (1.0 - b2.powi(step));
                    want[pi][j] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }

        let mut state = AdamState::new(&params, lr, b1, b2, eps);
        for grads in &grad_steps {
            adam_step(&mut params, grads, &mut state).unwrap();
        }
        for ((_, tensor), want) in params.named().iter().zip(&want) {
            for (got, want) in tensor.data().iter().zip(want) {
                assert!((got - want).abs() <= 1e-12, "adam: {got} vs {want}");
            }
        }
    }

    println!("criterion 2 PASS: lstm/softmax/cross-entropy/adam match oracles within 1e-12 on 100 cases each");
}

// ── Criterion 3: metric oracle equivalence ──────────────────────────────

// Independent span decoder: same lenient rule, different formulation.
fn oracle_spans(tags: &[Tag]) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, &tag) in tags.iter().enumerate() {
        let continues_previous = tag == Tag::IPer
            && i > 0
            && tags[i - 1] != Tag::O
            && spans.last().is_some_and(|&(_, e)| e == i);
        match tag {
            Tag::O => {}
            Tag::IPer if continues_previous => spans.last_mut().unwrap().1 = i + 1,
            _ => spans.push((i, i + 1)),
        }
    }
    spans
}

#[derive(Default, PartialEq, Debug)]
struct OracleCounts {
    n: usize,
    strict: usize,
    partial_or_strict: usize,
    first_only_first: (usize, usize),
    full_first: (usize, usize),
    full_last: (usize, usize),
}

// Brute-force scorer implementing the strict/partial rules directly on
// span sets: strict = exact span match; partial = a predicted span equals
// exactly the first-name token or exactly the last-name tokens (never
// containing any word outside the name).
fn oracle_score(gold_tags: &[Tag], pred_tags: &[Tag], counts: &mut OracleCounts) {
    let predicted = oracle_spans(pred_tags);
    for (gs, ge) in oracle_spans(gold_tags) {
        counts.n += 1;
        let strict = predicted.contains(&(gs, ge));
        let has_last = ge - gs > 1;
        let first_part = has_last && predicted.contains(&(gs, gs + 1));
        let last_part = has_last && predicted.contains(&(gs + 1, ge));
        if strict {
            counts.strict += 1;
        }
        if strict || first_part || last_part {
            counts.partial_or_strict += 1;
        }
        if has_last {
            counts.full_first.1 += 1;
            counts.full_last.1 += 1;
            if strict || first_part {
                counts.full_first.0 += 1;
            }
            if strict || last_part {
                counts.full_last.0 += 1;
            }
        } else {
            counts.first_only_first.1 += 1;
            if strict {
                counts.first_only_first.0 += 1;
            }
        }
    }
}

#[test]
fn criterion_3_metric_oracle_equivalence() {
    let split = synthetic_split(8, 60, 80, 0.25, 99);
    let mut utterances = split.train;
    utterances.truncate(200);
    assert!(utterances.len() == 200, "corpus produced {}", utterances.len());

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let predictions: Vec<Vec<Tag>> = utterances
        .iter()
        .map(|u| {
            (0..u.tokens.len())
                .map(|_| {
                    // Biased toward plausible tag sequences, but every
                    // combination (orphans included) can occur.
                    let r: f64 = rng.random();
                    if r < 0.55 {
                        Tag::O
                    } else if r < 0.8 {
                        Tag::BPer
                    } else {
                        Tag::IPer
                    }
                })
                .collect()
        })
        .collect();

    let mut want = OracleCounts::default();
    for (u, pred) in utterances.iter().zip(&predictions) {
        oracle_score(&u.tags, pred, &mut want);
    }

    let report = evaluate_predictions(&utterances, &predictions).unwrap();
    assert_eq!(report.overall.support, want.n);
    assert_eq!(report.overall.strict_acc, want.strict as f64 / want.n as f64);
    assert_eq!(
        report.overall.partial_acc,
        want.partial_or_strict as f64 / want.n as f64
    );
    let fo = &report.first_last.first_only.first;
    assert_eq!((fo.correct, fo.total), want.first_only_first);
    let ff = &report.first_last.full.first;
    assert_eq!((ff.correct, ff.total), want.full_first);
    let fl = &report.first_last.full.last;
    assert_eq!((fl.correct, fl.total), want.full_last);

    println!(
        "criterion 3 PASS: evaluate matches the brute-force scorer exactly on 200 utterances ({} gold names)",
        want.n
    );
}

// ── Criterion 4: the four vignette cases ────────────────────────────────

#[test]
fn criterion_4_kelsey_scott_vignette() {
    let tokens = tokenize(
        "I need to add medical coverage for my daughter Kelsey Scott so she can see the doctor",
    );
    let k = tokens.iter().position(|t| t == "Kelsey").unwrap();
    let mut tags = vec![Tag::O; tokens.len()];
    tags[k] = Tag::BPer;
    tags[k + 1] = Tag::IPer;
    let gold = TaggedUtterance {
        tokens: tokens.clone(),
        tags,
        meta: nametag_core::data::UtteranceMeta {
            country: "USA".into(),
            gender: nametag_core::data::Gender::F,
            name_first: "Kelsey".into(),
            name_last: Some("Scott".into()),
            source: "vignette".into(),
        },
    };
    let case = |start: usize, end: usize| -> MatchOutcome {
        let spans = vec![Span::new(&tokens, start, end)];
        score_utterance(&gold, &spans).unwrap()[0].outcome
    };
    assert_eq!(case(k, k + 2), MatchOutcome::Strict, "exact match");
    assert_eq!(case(k, k + 1), MatchOutcome::Partial, "first name only");
    assert_eq!(case(k - 1, k + 1), MatchOutcome::Miss, "daughter Kelsey");
    assert_eq!(case(k, k + 3), MatchOutcome::Miss, "Kelsey Scott so");
    println!("criterion 4 PASS: vignette scores Strict / Partial / Miss / Miss");
}

// ── Criterion 5: curation invariants ────────────────────────────────────

#[test]
fn criterion_5_curation_invariants() {
    let build = || synthetic_split(10, 110, 150, 0.2, 4242);
    let split = build();
    let total = split.train.len() + split.test.len();
    assert!(total >= 500, "only {total} utterances");

    let countries: HashSet<&str> = split
        .train
        .iter()
        .chain(&split.test)
        .map(|u| u.meta.country.as_str())
        .collect();
    assert!(countries.len() >= 10, "only {} countries", countries.len());

    let mut texts = HashSet::new();
    for u in split.train.iter().chain(&split.test) {
        assert!(texts.insert(u.text()), "duplicate utterance: {}", u.text());
        u.validate().expect("valid BIO");
    }
    let train_names: HashSet<String> = split.train.iter().flat_map(|u| u.name_texts()).collect();
    let test_names: HashSet<String> = split.test.iter().flat_map(|u| u.name_texts()).collect();
    let overlap: Vec<&String> = train_names.intersection(&test_names).collect();
    assert!(overlap.is_empty(), "name overlap: {overlap:?}");

    let second = build();
    let as_bytes = |us: &[TaggedUtterance]| -> Vec<u8> {
        let mut out = Vec::new();
        for u in us {
            out.extend_from_slice(serde_json::to_string(u).unwrap().as_bytes());
            out.push(b'\n');
        }
        out
    };
    assert_eq!(as_bytes(&split.train), as_bytes(&second.train));
    assert_eq!(as_bytes(&split.test), as_bytes(&second.test));

    println!(
        "criterion 5 PASS: {total} utterances, {} countries, unique texts, disjoint names, byte-identical reruns",
        countries.len()
    );
}

// ── Criterion 6: overfit smoke test ─────────────────────────────────────

#[test]
fn criterion_6_overfit_smoke() {
    let start = Instant::now();
    let split = synthetic_split(4, 40, 24, 0.2, 42);
    assert_eq!(split.train.len(), 64, "toy set size");

    let mut config = TrainConfig::new(Architecture::WordChar);
    config.epochs = 200;
    config.early_stop_patience = None;
    let ckpt = train_model(&config, &split.train, None).unwrap();
    let report = evaluate(&ckpt, &split.train).unwrap();
    let elapsed = start.elapsed();
    assert!(
        report.overall.strict_acc >= 0.95,
        "train strict accuracy {}",
        report.overall.strict_acc
    );
    assert!(elapsed.as_secs() < 300, "overfit took {elapsed:?}");
    println!(
        "criterion 6 PASS: 64-utterance overfit reached strict {:.4} in {} epochs, {:.0}s",
        report.overall.strict_acc,
        ckpt.train_loss_history.len(),
        elapsed.as_secs_f64()
    );
}

// ── Criterion 7: directional replication of the architecture gap ────────

#[test]
fn criterion_7_directional_protocol() {
    let start = Instant::now();
    let split = synthetic_split(12, 400, 600, 0.1667, 42);
    assert!(
        (1900..=2100).contains(&split.train.len()) && (350..=450).contains(&split.test.len()),
        "corpus scale {} / {}",
        split.train.len(),
        split.test.len()
    );

    let mut base = TrainConfig::new(Architecture::WordChar);
    base.epochs = 4;
    base.early_stop_patience = None;
    base.seed = 42;
    let summary = run_protocol(&base, 5, &split.train, &split.test).unwrap();

    let wc_mean = summary.mean_strict(Architecture::WordChar);
    let wo_mean = summary.mean_strict(Architecture::Word);
    assert!(
        wc_mean >= wo_mean,
        "mean strict: wordchar {wc_mean} < word {wo_mean}"
    );

    let wc: Vec<f64> = summary
        .rows
        .iter()
        .filter(|r| r.architecture == Architecture::WordChar)
        .map(|r| r.strict_acc)
        .collect();
    let wo: Vec<f64> = summary
        .rows
        .iter()
        .filter(|r| r.architecture == Architecture::Word)
        .map(|r| r.strict_acc)
        .collect();
    let wins = wc.iter().zip(&wo).filter(|(a, b)| a > b).count();
    assert!(wins >= 4, "wordchar won only {wins}/5 seed pairings");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1800, "protocol took {elapsed:?}");
    println!(
        "criterion 7 PASS: mean strict wordchar {:.4} vs word {:.4} (gap {:+.2}%, {wins}/5 wins) in {:.0}s",
        wc_mean,
        wo_mean,
        (wc_mean - wo_mean) * 100.0,
        elapsed.as_secs_f64()
    );
}

// ── Criterion 8: masking property ───────────────────────────────────────

#[test]
fn criterion_8_masking_property() {
    let split = synthetic_split(4, 60, 40, 0.25, 8);
    let mut config = small_train_config(Architecture::WordChar);
    config.epochs = 5;
    let ckpt = train_model(&config, &split.train, None).unwrap();

    // Mixed-length slice so padding is substantial.
    let mut batch: Vec<TaggedUtterance> = split.train.iter().take(24).cloned().collect();
    batch.sort_by_key(|u| u.tokens.len());
    let lens: HashSet<usize> = batch.iter().map(|u| u.tokens.len()).collect();
    assert!(lens.len() > 1, "batch lengths not mixed");

    let (batched_loss, batched_n) = ckpt.batch_loss(&batch).unwrap();
    let mut weighted = 0.0;
    let mut n = 0usize;
    for u in &batch {
        let (loss, k) = ckpt.utterance_loss(u).unwrap();
        weighted += loss * k as f64;
        n += k;
    }
    let unpadded_loss = weighted / n as f64;
    assert_eq!(batched_n, n);
    assert!(
        (batched_loss - unpadded_loss).abs() <= 1e-10,
        "loss mismatch: {batched_loss} vs {unpadded_loss}"
    );

    // Predicted tags through the padded batch must equal the unpadded
    // per-utterance path exactly.
    let encoded: Vec<_> = batch
        .iter()
        .map(|u| encode_utterance(&ckpt.vocabs, u, ckpt.config.max_word_len))
        .collect();
    let padded = pad_batch(&encoded).unwrap();
    for (u, enc) in batch.iter().zip(&padded.utterances) {
        let mut tape = Tape::new();
        let bound = ckpt.params.bind(&mut tape, false);
        let probs = model_forward(&mut tape, &bound, enc).unwrap();
        let data = tape.data(probs);
        let batched_tags: Vec<Tag> = (0..enc.real_len())
            .map(|r| {
                let row = &data[r * 3..(r + 1) * 3];
                let best = (0..3).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
                Tag::from_index(best).unwrap()
            })
            .collect();
        assert_eq!(batched_tags, ckpt.predict_tags(&u.tokens).unwrap());
    }

    println!(
        "criterion 8 PASS: padded batch loss {batched_loss:.12} equals unpadded recombination, tags identical"
    );
}

// ── Criterion 9: checkpoint round-trip and corruption handling ──────────

#[test]
fn criterion_9_checkpoint_roundtrip() {
    let split = synthetic_split(3, 40, 30, 0.25, 77);
    let mut config = small_train_config(Architecture::WordChar);
    config.epochs = 4;
    let ckpt = train_model(&config, &split.train, None).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&ckpt, &path).unwrap();
    let loaded = load_checkpoint(&path, None).unwrap();

    // Bit-identical parameters imply bit-identical forward passes; check
    // both the parameter bytes and the predictions on a fixed batch.
    for ((name_a, a), (_, b)) in ckpt.params.named().iter().zip(loaded.params.named().iter()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits(), "parameter {name_a} differs");
        }
    }
    for u in split.train.iter().take(16) {
        assert_eq!(
            ckpt.predict_tags(&u.tokens).unwrap(),
            loaded.predict_tags(&u.tokens).unwrap()
        );
        let (a, _) = ckpt.utterance_loss(u).unwrap();
        let (b, _) = loaded.utterance_loss(u).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // A corrupted checkpoint must be rejected by the loader and surface
    // as a data error (exit code 2) through the CLI.
    let bytes = std::fs::read(&path).unwrap();
    let truncated = dir.path().join("truncated.ckpt");
    std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    assert!(load_checkpoint(&truncated, None).is_err());

    let test_file = dir.path().join("test.jsonl");
    nametag_core::data::write_dataset(&test_file, &split.test).unwrap();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_nametag"))
        .args([
            "evaluate",
            "--checkpoint",
            truncated.to_str().unwrap(),
            "--test",
            test_file.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "corrupt checkpoint exit code");

    println!("criterion 9 PASS: round-trip bit-identical; corrupt checkpoint rejected with exit 2");
}

/// Helper shared with the masking criterion.
trait CheckpointParamsExt {
    fn params_ref(&self) -> &ModelParams;
}

impl CheckpointParamsExt for ModelCheckpoint {
    fn params_ref(&self) -> &ModelParams {
        &self.params
    }
}
