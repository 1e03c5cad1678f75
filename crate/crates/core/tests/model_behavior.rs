//! Training-contract tests: seeded determinism, the learning-rate trace,
//! divergence detection, checkpoint and embedding round-trips, decode stop
//! rules, and a miniature overfit run.

mod common;

use common::tiny_task;
use ndarray::Array2;
use tlgtag_core::corpus::{gen_synthetic, Recipe};
use tlgtag_core::digram::MergeTable;
use tlgtag_core::eval::encode_samples;
use tlgtag_core::model::{
    export_symbol_embeddings, greedy_decode, load_checkpoint, load_symbol_embeddings,
    load_word_vectors, lr_schedule, save_checkpoint, save_word_vectors, train, DecodeMode,
    ModelConfig, Parameters, StopRule, TrainOptions, WordInput, WordRepProvider,
};

fn small_config(seed: u64) -> ModelConfig {
    ModelConfig {
        d: 16,
        encoder_layers: 1,
        encoder_heads: 2,
        decoder_layers: 2,
        decoder_heads: 2,
        dropout: 0.1,
        smoothing: 0.2,
        warmup: 20,
        max_tokens_per_word: 8,
        seed,
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let (vocab, samples) = tiny_task();
    let provider = WordRepProvider::lookup_from_words(
        samples.iter().flat_map(|s| s.words.iter().map(String::as_str)),
        16,
    );
    let options = TrainOptions {
        epochs: 4,
        batch_size: 2,
        val_every: 2,
        ..TrainOptions::default()
    };
    let config = small_config(3);
    let a = train(&vocab, provider.clone(), &samples, &samples, &config, &options).unwrap();
    let b = train(&vocab, provider, &samples, &samples, &config, &options).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.params, b.params);
}

#[test]
fn learning_rate_trace_follows_the_schedule() {
    let (vocab, samples) = tiny_task();
    let provider = WordRepProvider::lookup_from_words(
        samples.iter().flat_map(|s| s.words.iter().map(String::as_str)),
        16,
    );
    // one batch per epoch: the epoch's lr is the schedule at step = epoch
    let options = TrainOptions {
        epochs: 5,
        batch_size: samples.len(),
        val_every: 0,
        ..TrainOptions::default()
    };
    let config = small_config(1);
    let outcome = train(&vocab, provider, &samples, &[], &config, &options).unwrap();
    for log in &outcome.log {
        assert_eq!(log.last_lr, lr_schedule(log.epoch, config.d, config.warmup));
    }
}

#[test]
fn nan_inputs_abort_with_divergence() {
    let (vocab, samples) = tiny_task();
    let provider = WordRepProvider::Precomputed { dim: 16 };
    let mut bad = samples[0].clone();
    bad.vectors = Some(Array2::from_elem((2, 16), f64::NAN));
    let options = TrainOptions {
        epochs: 1,
        batch_size: 1,
        val_every: 0,
        ..TrainOptions::default()
    };
    let err = train(&vocab, provider, &[bad], &[], &small_config(0), &options).unwrap_err();
    assert!(matches!(
        err,
        tlgtag_core::model::ModelError::Divergence { .. }
    ));
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let (vocab, samples) = tiny_task();
    let provider = WordRepProvider::lookup_from_words(
        samples.iter().flat_map(|s| s.words.iter().map(String::as_str)),
        12,
    );
    let params = Parameters::init(&small_config(9), provider, vocab.len()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&params, &vocab, &path, &["test".into()]).unwrap();
    let loaded = load_checkpoint(&path, &vocab).unwrap();
    assert_eq!(loaded, params);

    // a different vocabulary is rejected
    let other = tlgtag_core::grammar::SymbolVocab::from_vocabulary(
        tlgtag_core::types::Vocabulary::new(["a", "b", "c"], ["x"]).unwrap(),
    );
    assert!(load_checkpoint(&path, &other).is_err());
}

#[test]
fn embedding_export_round_trip_and_cosines() {
    let (vocab, samples) = tiny_task();
    let provider = WordRepProvider::lookup_from_words(
        samples.iter().flat_map(|s| s.words.iter().map(String::as_str)),
        16,
    );
    let params = Parameters::init(&small_config(4), provider, vocab.len()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("embeddings.txt");
    export_symbol_embeddings(&params, &vocab, &path).unwrap();
    let (tokens, matrix) = load_symbol_embeddings(&path).unwrap();
    assert_eq!(tokens.len(), vocab.len());
    assert_eq!(matrix, params.symbol_embedding);

    // cosine-similarity matrix: symmetric with a unit diagonal
    let n = matrix.nrows();
    let norm = |r: usize| matrix.row(r).dot(&matrix.row(r)).sqrt();
    for i in 0..n {
        for j in 0..n {
            let cij = matrix.row(i).dot(&matrix.row(j)) / (norm(i) * norm(j));
            let cji = matrix.row(j).dot(&matrix.row(i)) / (norm(j) * norm(i));
            assert!((cij - cji).abs() < 1e-12);
            if i == j {
                assert!((cij - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn word_vector_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vecs.txt");
    let sentences = vec![
        Array2::from_shape_fn((2, 3), |(i, j)| i as f64 + 0.125 * j as f64),
        Array2::from_shape_fn((4, 3), |(i, j)| -(i as f64) + 0.5 * j as f64),
    ];
    save_word_vectors(&sentences, 3, &path).unwrap();
    let (dim, loaded) = load_word_vectors(&path).unwrap();
    assert_eq!(dim, 3);
    assert_eq!(loaded, sentences);
}

#[test]
fn decode_respects_cap_and_token_count() {
    let (vocab, samples) = tiny_task();
    let provider = WordRepProvider::lookup_from_words(
        samples.iter().flat_map(|s| s.words.iter().map(String::as_str)),
        16,
    );
    let config = ModelConfig {
        max_tokens_per_word: 3,
        ..small_config(2)
    };
    let params = Parameters::init(&config, provider, vocab.len()).unwrap();
    let input = WordInput::Indices(vec![1, 2, 3, 1, 2]);
    // hard cap: 5 words × 3 tokens/word = 15
    let out = greedy_decode(&params, &vocab, &input, StopRule::SeparatorCount(5), DecodeMode::Free)
        .unwrap();
    assert!(out.tokens.len() <= 15);
    if out.tokens.iter().filter(|t| *t == "#").count() < 5 {
        assert!(out.cap_exceeded);
    }
    // fully merged mode: exactly as many tokens as words
    let out = greedy_decode(&params, &vocab, &input, StopRule::TokenCount(5), DecodeMode::Free)
        .unwrap();
    assert_eq!(out.tokens.len(), 5);
    assert!(!out.cap_exceeded);
}

#[test]
fn grammar_masked_decode_emits_only_wellformed_segments() {
    let (vocab, samples) = tiny_task();
    let provider = WordRepProvider::lookup_from_words(
        samples.iter().flat_map(|s| s.words.iter().map(String::as_str)),
        16,
    );
    let params = Parameters::init(&small_config(11), provider, vocab.len()).unwrap();
    let input = WordInput::Indices(vec![1, 2, 3]);
    let out = greedy_decode(
        &params,
        &vocab,
        &input,
        StopRule::SeparatorCount(3),
        DecodeMode::GrammarMasked,
    )
    .unwrap();
    if !out.cap_exceeded {
        let preds = vec![out.tokens.clone()];
        let rate = tlgtag_core::eval::wellformedness_rate(
            &preds,
            &vocab,
            &MergeTable::default(),
            tlgtag_core::eval::SegmentMode::BySeparator,
        );
        assert_eq!(rate, 1.0);
    }
}

/// A model overfit to a 20-sample bank decodes every training sentence to
/// its gold token sequence.
#[test]
fn overfit_twenty_samples_reproduces_gold_sequences() {
    let recipe = Recipe::default();
    let bank = gen_synthetic(&recipe, 404, 20).unwrap();
    let vocab = bank.symbol_vocab();
    let table = MergeTable::default();
    let enc = encode_samples(bank.samples(), &vocab, &table, false);
    let provider = WordRepProvider::lookup_from_words(
        enc.iter().flat_map(|s| s.words.iter().map(String::as_str)),
        64,
    );
    let config = ModelConfig {
        d: 64,
        dropout: 0.1,
        warmup: 100,
        seed: 5,
        ..ModelConfig::default()
    };
    let options = TrainOptions {
        epochs: 300,
        batch_size: 8,
        val_every: 0,
        target_train_accuracy: Some(1.0),
        train_check_every: 20,
        per_token_types: false,
    };
    let outcome = train(&vocab, provider, &enc, &[], &config, &options).unwrap();
    let last = outcome.log.last().unwrap();
    assert_eq!(
        last.train_accuracy,
        Some(1.0),
        "did not overfit within {} epochs: {:?}",
        options.epochs,
        outcome.log.iter().rev().take(3).collect::<Vec<_>>()
    );
    for sample in &enc {
        let input =
            tlgtag_core::model::word_input_for_sample(&outcome.params, sample).unwrap();
        let out = greedy_decode(
            &outcome.params,
            &vocab,
            &input,
            StopRule::SeparatorCount(sample.words.len()),
            DecodeMode::Free,
        )
        .unwrap();
        assert_eq!(out.token_ids, sample.target_ids);
    }
}
