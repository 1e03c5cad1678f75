//! The transformer encoder-decoder supertagger: pluggable word
//! representations feed a single encoder layer; a two-layer decoder with
//! tied symbol embeddings emits grammar symbols one at a time through a
//! sigsoftmax output. Backpropagation runs over the in-crate autodiff tape
//! and is validated against central finite differences.

mod checkpoint;
mod decode;
mod net;
mod ops;
mod tape;
mod train;

pub use checkpoint::{
    export_symbol_embeddings, load_checkpoint, load_symbol_embeddings, load_word_vectors,
    save_checkpoint, save_word_vectors,
};
pub use decode::{greedy_decode, word_input_for_sample, DecodeMode, DecodeOutput, StopRule};
pub use net::forward_teacher_forced;
pub use ops::{gelu, loss_kl_smoothed, lr_schedule, positional_encoding, sigsoftmax};
pub use tape::{NodeId, Tape};
pub use train::{
    batch_loss, decoded_types, loss_and_grads, sample_type_accuracy, train, EpochLog,
    TrainOptions, TrainOutcome,
};

use indexmap::IndexMap;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grammar::{SymbolVocab, PAD, SEQ_START};
use crate::types::Type;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },
    #[error("checkpoint {path}:{line}: {msg}")]
    Checkpoint { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Architecture and training hyper-parameters. The defaults are the desk
/// configuration; the attention head counts follow the paper's asymmetric
/// encoder/decoder choice.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Model width; the feed-forward blocks are dimensionality preserving.
    pub d: usize,
    pub encoder_layers: usize,
    pub encoder_heads: usize,
    pub decoder_layers: usize,
    pub decoder_heads: usize,
    pub dropout: f64,
    /// Redistributed probability mass of the KL loss.
    pub smoothing: f64,
    pub warmup: usize,
    pub max_tokens_per_word: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 128,
            encoder_layers: 1,
            encoder_heads: 3,
            decoder_layers: 2,
            decoder_heads: 8,
            dropout: 0.2,
            smoothing: 0.2,
            warmup: 400,
            max_tokens_per_word: 32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Heads own `d / heads` columns each (at least one); `d` need not be an
    /// exact multiple, matching the paper's 3-head encoder over its width.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d == 0 {
            return Err(ModelError::InvalidConfig("d must be positive".into()));
        }
        for (name, heads) in [("encoder", self.encoder_heads), ("decoder", self.decoder_heads)] {
            if heads == 0 || heads > self.d {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} heads must be in 1..=d, got {heads}"
                )));
            }
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return Err(ModelError::InvalidConfig("layer counts must be positive".into()));
        }
        for (name, rate) in [("dropout", self.dropout), ("smoothing", self.smoothing)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(ModelError::InvalidConfig(format!("{name} must be in [0, 1)")));
            }
        }
        if self.warmup == 0 || self.max_tokens_per_word == 0 {
            return Err(ModelError::InvalidConfig("warmup and token cap must be positive".into()));
        }
        Ok(())
    }

    pub fn encoder_head_dim(&self) -> usize {
        (self.d / self.encoder_heads).max(1)
    }

    pub fn decoder_head_dim(&self) -> usize {
        (self.d / self.decoder_heads).max(1)
    }
}

/// Where encoder inputs come from: a trainable lookup table over the
/// training words, or externally precomputed contextual vectors (the
/// frozen-encoder setup without bundling one).
#[derive(Debug, Clone, PartialEq)]
pub enum WordRepProvider {
    Lookup {
        /// word → row; row 0 is the unknown-word token.
        words: IndexMap<String, usize>,
        dim: usize,
    },
    Precomputed { dim: usize },
}

pub const UNK_WORD: &str = "<unk-word>";

impl WordRepProvider {
    /// Build a lookup provider over the sorted unique training words.
    pub fn lookup_from_words<'a, I: IntoIterator<Item = &'a str>>(train_words: I, dim: usize) -> Self {
        let mut unique: Vec<&str> = train_words.into_iter().collect();
        unique.sort_unstable();
        unique.dedup();
        let mut words = IndexMap::new();
        words.insert(UNK_WORD.to_string(), 0);
        for w in unique {
            let next = words.len();
            words.entry(w.to_string()).or_insert(next);
        }
        WordRepProvider::Lookup { words, dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            WordRepProvider::Lookup { dim, .. } | WordRepProvider::Precomputed { dim } => *dim,
        }
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        match self {
            WordRepProvider::Lookup { words, .. } => {
                Some(words.get(word).copied().unwrap_or(0))
            }
            WordRepProvider::Precomputed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHeadParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gamma: Array2<f64>,
    pub beta: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerParams {
    pub attn: Vec<AttentionHeadParams>,
    pub ln1: LayerNormParams,
    pub ff: FeedForwardParams,
    pub ln2: LayerNormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayerParams {
    pub self_attn: Vec<AttentionHeadParams>,
    pub ln1: LayerNormParams,
    pub cross_attn: Vec<AttentionHeadParams>,
    pub ln2: LayerNormParams,
    pub ff: FeedForwardParams,
    pub ln3: LayerNormParams,
}

/// All trainable weights. The symbol embedding matrix doubles, transposed,
/// as the output projection: one storage location.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub config: ModelConfig,
    pub provider: WordRepProvider,
    /// Lookup mode only: |words| × provider dim.
    pub word_table: Option<Array2<f64>>,
    /// Present when the provider dim differs from `d`.
    pub input_proj: Option<Array2<f64>>,
    /// |vocab| × d; also the transposed output projection.
    pub symbol_embedding: Array2<f64>,
    pub encoder: Vec<EncoderLayerParams>,
    pub decoder: Vec<DecoderLayerParams>,
}

fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

fn init_heads<R: Rng>(rng: &mut R, d: usize, head_dim: usize, heads: usize) -> Vec<AttentionHeadParams> {
    (0..heads)
        .map(|_| AttentionHeadParams {
            wq: xavier(rng, d, head_dim),
            wk: xavier(rng, d, head_dim),
            wv: xavier(rng, d, head_dim),
            wo: xavier(rng, head_dim, d),
        })
        .collect()
}

fn init_ff<R: Rng>(rng: &mut R, d: usize) -> FeedForwardParams {
    FeedForwardParams {
        w1: xavier(rng, d, d),
        b1: Array2::zeros((1, d)),
        w2: xavier(rng, d, d),
        b2: Array2::zeros((1, d)),
    }
}

fn init_ln(d: usize) -> LayerNormParams {
    LayerNormParams {
        gamma: Array2::ones((1, d)),
        beta: Array2::zeros((1, d)),
    }
}

impl Parameters {
    pub fn init(
        config: &ModelConfig,
        provider: WordRepProvider,
        vocab_size: usize,
    ) -> Result<Parameters, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d;
        let word_table = match &provider {
            WordRepProvider::Lookup { words, dim } => Some(xavier(&mut rng, words.len(), *dim)),
            WordRepProvider::Precomputed { .. } => None,
        };
        let input_proj = if provider.dim() != d {
            Some(xavier(&mut rng, provider.dim(), d))
        } else {
            None
        };
        let symbol_embedding = xavier(&mut rng, vocab_size, d);
        let encoder = (0..config.encoder_layers)
            .map(|_| EncoderLayerParams {
                attn: init_heads(&mut rng, d, config.encoder_head_dim(), config.encoder_heads),
                ln1: init_ln(d),
                ff: init_ff(&mut rng, d),
                ln2: init_ln(d),
            })
            .collect();
        let decoder = (0..config.decoder_layers)
            .map(|_| DecoderLayerParams {
                self_attn: init_heads(&mut rng, d, config.decoder_head_dim(), config.decoder_heads),
                ln1: init_ln(d),
                cross_attn: init_heads(&mut rng, d, config.decoder_head_dim(), config.decoder_heads),
                ln2: init_ln(d),
                ff: init_ff(&mut rng, d),
                ln3: init_ln(d),
            })
            .collect();
        Ok(Parameters {
            config: config.clone(),
            provider,
            word_table,
            input_proj,
            symbol_embedding,
            encoder,
            decoder,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.symbol_embedding.nrows()
    }

    /// Every parameter block with a stable name, in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = Vec::new();
        if let Some(t) = &self.word_table {
            out.push(("word_table".into(), t));
        }
        if let Some(p) = &self.input_proj {
            out.push(("input_proj".into(), p));
        }
        out.push(("symbol_embedding".into(), &self.symbol_embedding));
        for (l, layer) in self.encoder.iter().enumerate() {
            for (h, head) in layer.attn.iter().enumerate() {
                out.push((format!("enc{l}.attn{h}.wq"), &head.wq));
                out.push((format!("enc{l}.attn{h}.wk"), &head.wk));
                out.push((format!("enc{l}.attn{h}.wv"), &head.wv));
                out.push((format!("enc{l}.attn{h}.wo"), &head.wo));
            }
            out.push((format!("enc{l}.ln1.gamma"), &layer.ln1.gamma));
            out.push((format!("enc{l}.ln1.beta"), &layer.ln1.beta));
            out.push((format!("enc{l}.ff.w1"), &layer.ff.w1));
            out.push((format!("enc{l}.ff.b1"), &layer.ff.b1));
            out.push((format!("enc{l}.ff.w2"), &layer.ff.w2));
            out.push((format!("enc{l}.ff.b2"), &layer.ff.b2));
            out.push((format!("enc{l}.ln2.gamma"), &layer.ln2.gamma));
            out.push((format!("enc{l}.ln2.beta"), &layer.ln2.beta));
        }
        for (l, layer) in self.decoder.iter().enumerate() {
            for (h, head) in layer.self_attn.iter().enumerate() {
                out.push((format!("dec{l}.self{h}.wq"), &head.wq));
                out.push((format!("dec{l}.self{h}.wk"), &head.wk));
                out.push((format!("dec{l}.self{h}.wv"), &head.wv));
                out.push((format!("dec{l}.self{h}.wo"), &head.wo));
            }
            out.push((format!("dec{l}.ln1.gamma"), &layer.ln1.gamma));
            out.push((format!("dec{l}.ln1.beta"), &layer.ln1.beta));
            for (h, head) in layer.cross_attn.iter().enumerate() {
                out.push((format!("dec{l}.cross{h}.wq"), &head.wq));
                out.push((format!("dec{l}.cross{h}.wk"), &head.wk));
                out.push((format!("dec{l}.cross{h}.wv"), &head.wv));
                out.push((format!("dec{l}.cross{h}.wo"), &head.wo));
            }
            out.push((format!("dec{l}.ln2.gamma"), &layer.ln2.gamma));
            out.push((format!("dec{l}.ln2.beta"), &layer.ln2.beta));
            out.push((format!("dec{l}.ff.w1"), &layer.ff.w1));
            out.push((format!("dec{l}.ff.b1"), &layer.ff.b1));
            out.push((format!("dec{l}.ff.w2"), &layer.ff.w2));
            out.push((format!("dec{l}.ff.b2"), &layer.ff.b2));
            out.push((format!("dec{l}.ln3.gamma"), &layer.ln3.gamma));
            out.push((format!("dec{l}.ln3.beta"), &layer.ln3.beta));
        }
        out
    }

    /// Mutable view over the same blocks in the same order.
    pub fn blocks_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = Vec::new();
        if let Some(t) = &mut self.word_table {
            out.push(("word_table".into(), t));
        }
        if let Some(p) = &mut self.input_proj {
            out.push(("input_proj".into(), p));
        }
        out.push(("symbol_embedding".into(), &mut self.symbol_embedding));
        for (l, layer) in self.encoder.iter_mut().enumerate() {
            for (h, head) in layer.attn.iter_mut().enumerate() {
                out.push((format!("enc{l}.attn{h}.wq"), &mut head.wq));
                out.push((format!("enc{l}.attn{h}.wk"), &mut head.wk));
                out.push((format!("enc{l}.attn{h}.wv"), &mut head.wv));
                out.push((format!("enc{l}.attn{h}.wo"), &mut head.wo));
            }
            out.push((format!("enc{l}.ln1.gamma"), &mut layer.ln1.gamma));
            out.push((format!("enc{l}.ln1.beta"), &mut layer.ln1.beta));
            out.push((format!("enc{l}.ff.w1"), &mut layer.ff.w1));
            out.push((format!("enc{l}.ff.b1"), &mut layer.ff.b1));
            out.push((format!("enc{l}.ff.w2"), &mut layer.ff.w2));
            out.push((format!("enc{l}.ff.b2"), &mut layer.ff.b2));
            out.push((format!("enc{l}.ln2.gamma"), &mut layer.ln2.gamma));
            out.push((format!("enc{l}.ln2.beta"), &mut layer.ln2.beta));
        }
        for (l, layer) in self.decoder.iter_mut().enumerate() {
            for (h, head) in layer.self_attn.iter_mut().enumerate() {
                out.push((format!("dec{l}.self{h}.wq"), &mut head.wq));
                out.push((format!("dec{l}.self{h}.wk"), &mut head.wk));
                out.push((format!("dec{l}.self{h}.wv"), &mut head.wv));
                out.push((format!("dec{l}.self{h}.wo"), &mut head.wo));
            }
            out.push((format!("dec{l}.ln1.gamma"), &mut layer.ln1.gamma));
            out.push((format!("dec{l}.ln1.beta"), &mut layer.ln1.beta));
            for (h, head) in layer.cross_attn.iter_mut().enumerate() {
                out.push((format!("dec{l}.cross{h}.wq"), &mut head.wq));
                out.push((format!("dec{l}.cross{h}.wk"), &mut head.wk));
                out.push((format!("dec{l}.cross{h}.wv"), &mut head.wv));
                out.push((format!("dec{l}.cross{h}.wo"), &mut head.wo));
            }
            out.push((format!("dec{l}.ln2.gamma"), &mut layer.ln2.gamma));
            out.push((format!("dec{l}.ln2.beta"), &mut layer.ln2.beta));
            out.push((format!("dec{l}.ff.w1"), &mut layer.ff.w1));
            out.push((format!("dec{l}.ff.b1"), &mut layer.ff.b1));
            out.push((format!("dec{l}.ff.w2"), &mut layer.ff.w2));
            out.push((format!("dec{l}.ff.b2"), &mut layer.ff.b2));
            out.push((format!("dec{l}.ln3.gamma"), &mut layer.ln3.gamma));
            out.push((format!("dec{l}.ln3.beta"), &mut layer.ln3.beta));
        }
        out
    }
}

/// Encoder input for one sentence: word indices into the lookup table, or a
/// precomputed `words × dim` vector block.
#[derive(Debug, Clone, PartialEq)]
pub enum WordInput {
    Indices(Vec<usize>),
    Vectors(Array2<f64>),
}

impl WordInput {
    pub fn len(&self) -> usize {
        match self {
            WordInput::Indices(v) => v.len(),
            WordInput::Vectors(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One sentence of the tagging task: source words, the gold target symbol
/// sequence (token ids over the merged vocabulary), and the gold types for
/// validation accuracy.
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub words: Vec<String>,
    /// Precomputed provider only: `words × dim` contextual vectors.
    pub vectors: Option<Array2<f64>>,
    pub target_ids: Vec<usize>,
    pub gold_types: Vec<Type>,
}

/// A padded batch: word/vector blocks, target symbol blocks, and the masks
/// that keep attention and the loss off the padding.
#[derive(Debug, Clone)]
pub struct Batch {
    pub words: Vec<WordInput>,
    /// padded decoder input ids, each row `max_target` long
    pub decoder_inputs: Vec<Vec<usize>>,
    /// padded gold output ids aligned with `decoder_inputs`
    pub gold_outputs: Vec<Vec<usize>>,
    /// true at real (non-padding) source positions
    pub src_mask: Vec<Vec<bool>>,
    /// true at real target positions (where the loss counts)
    pub tgt_mask: Vec<Vec<bool>>,
    pub max_words: usize,
    pub max_target: usize,
}

impl Batch {
    /// Assemble a padded batch. Word inputs are padded with the unknown row
    /// (or zero vectors); targets with the padding symbol.
    pub fn build(
        samples: &[&EncodedSample],
        provider: &WordRepProvider,
        vocab: &SymbolVocab,
    ) -> Result<Batch, ModelError> {
        let pad_id = vocab.id(PAD).expect("pad token");
        let start_id = vocab.id(SEQ_START).expect("sequence start token");
        let max_words = samples.iter().map(|s| s.words.len()).max().unwrap_or(0);
        let max_target = samples.iter().map(|s| s.target_ids.len()).max().unwrap_or(0);
        let mut words = Vec::with_capacity(samples.len());
        let mut decoder_inputs = Vec::with_capacity(samples.len());
        let mut gold_outputs = Vec::with_capacity(samples.len());
        let mut src_mask = Vec::with_capacity(samples.len());
        let mut tgt_mask = Vec::with_capacity(samples.len());
        for s in samples {
            match provider {
                WordRepProvider::Lookup { .. } => {
                    let mut ids: Vec<usize> = s
                        .words
                        .iter()
                        .map(|w| provider.index_of(w).expect("lookup provider"))
                        .collect();
                    ids.resize(max_words, 0);
                    words.push(WordInput::Indices(ids));
                }
                WordRepProvider::Precomputed { dim } => {
                    let v = s.vectors.as_ref().ok_or_else(|| {
                        ModelError::ShapeMismatch("precomputed provider without vectors".into())
                    })?;
                    if v.nrows() != s.words.len() || v.ncols() != *dim {
                        return Err(ModelError::ShapeMismatch(format!(
                            "vector block {}×{} for {} words × dim {dim}",
                            v.nrows(),
                            v.ncols(),
                            s.words.len()
                        )));
                    }
                    let mut block = Array2::zeros((max_words, *dim));
                    block.slice_mut(ndarray::s![..v.nrows(), ..]).assign(v);
                    words.push(WordInput::Vectors(block));
                }
            }
            let mut mask = vec![true; s.words.len()];
            mask.resize(max_words, false);
            src_mask.push(mask);

            let t = s.target_ids.len();
            let mut dec_in = Vec::with_capacity(max_target);
            dec_in.push(start_id);
            dec_in.extend(s.target_ids.iter().take(t.saturating_sub(1)).copied());
            dec_in.resize(max_target, pad_id);
            decoder_inputs.push(dec_in);

            let mut gold = s.target_ids.clone();
            gold.resize(max_target, pad_id);
            gold_outputs.push(gold);

            let mut mask = vec![true; t];
            mask.resize(max_target, false);
            tgt_mask.push(mask);
        }
        Ok(Batch {
            words,
            decoder_inputs,
            gold_outputs,
            src_mask,
            tgt_mask,
            max_words,
            max_target,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn loss_positions(&self) -> usize {
        self.tgt_mask
            .iter()
            .map(|m| m.iter().filter(|b| **b).count())
            .sum()
    }
}

/// Whether dropout is active; training mode carries the mask seed so a
/// forward pass is reproducible.
#[derive(Debug, Clone, Copy)]
pub enum Mode {
    Train { dropout_seed: u64 },
    Eval,
}
