//! Constructive supertagging for a dependency-labeled type-logical grammar.
//!
//! Types are binary trees of labeled linear implications over atomic leaves.
//! Serialized to polish notation they become flat token sequences, which a
//! sequence-to-sequence tagger can emit symbol by symbol — including types it
//! never saw in training. This crate provides:
//!
//! - [`types`]: the type algebra, polish (de)serialization, obliqueness checks;
//! - [`grammar`]: the type-forming grammar over the token vocabulary, prefix
//!   validity tracking, and whole-sentence (de)flattening;
//! - [`digram`]: byte-pair style merges over intra-type symbol sequences;
//! - [`deduction`]: a natural-deduction checker and bounded prover for the
//!   labeled implicational fragment;
//! - [`corpus`]: treebank I/O, splits, frequency statistics, and a synthetic
//!   treebank generator with self-validating ground truth;
//! - [`model`]: a from-scratch transformer encoder-decoder tagger with tied
//!   symbol embeddings, sigsoftmax outputs, and gradient-checked backprop;
//! - [`eval`]: the metric suite (type accuracy, frequency bins, unseen-type
//!   stats, well-formedness) and the merge-scale sweep.

pub mod corpus;
pub mod deduction;
pub mod digram;
pub mod eval;
pub mod grammar;
pub mod model;
pub mod testkit;
pub mod types;

pub use types::{Token, TokenSeq, Type, Vocabulary};
