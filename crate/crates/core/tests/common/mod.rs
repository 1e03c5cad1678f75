//! Shared fixtures for the integration tests.

use tlgtag_core::grammar::SymbolVocab;
use tlgtag_core::model::EncodedSample;
use tlgtag_core::types::{Type, Vocabulary};

/// Two atoms, one label, a handful of words: the smallest task that
/// exercises every code path (atoms, connectives, separators, padding).
pub fn tiny_task() -> (SymbolVocab, Vec<EncodedSample>) {
    let vocab = SymbolVocab::from_vocabulary(Vocabulary::new(["a", "b"], ["x"]).unwrap());
    let id = |t: &str| vocab.id(t).unwrap();
    let arrow = Type::arrow("x", Type::atom("a"), Type::atom("b"));
    let samples = vec![
        EncodedSample {
            words: vec!["w1".into(), "w2".into()],
            vectors: None,
            // a # →x a b #
            target_ids: vec![id("a"), id("#"), id("→x"), id("a"), id("b"), id("#")],
            gold_types: vec![Type::atom("a"), arrow.clone()],
        },
        EncodedSample {
            words: vec!["w3".into()],
            vectors: None,
            target_ids: vec![id("b"), id("#")],
            gold_types: vec![Type::atom("b")],
        },
        EncodedSample {
            words: vec!["w1".into(), "w3".into(), "w2".into()],
            vectors: None,
            target_ids: vec![id("b"), id("#"), id("a"), id("#"), id("a"), id("#")],
            gold_types: vec![Type::atom("b"), Type::atom("a"), Type::atom("a")],
        },
    ];
    (vocab, samples)
}
