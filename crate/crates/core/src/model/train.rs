//! Teacher-forced training with the warmup schedule over Adam, per-epoch
//! logging, best-checkpoint retention, and optional early stopping on
//! training-set type accuracy.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::decode::{greedy_decode, DecodeMode, DecodeOutput, StopRule};
use super::net::{forward_batch, stage};
use super::ops::{lr_schedule, smoothed_target_row};
use super::tape::{NodeId, Tape};
use super::{Batch, EncodedSample, Mode, ModelConfig, ModelError, Parameters, WordRepProvider};
use crate::grammar::{segment_assignment, SymbolVocab, PAD};

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Compute validation type accuracy every this many epochs (0 = never).
    pub val_every: usize,
    /// Stop once training-set type accuracy reaches this value.
    pub target_train_accuracy: Option<f64>,
    /// Epochs between training-accuracy checks when a target is set.
    pub train_check_every: usize,
    /// Fully merged mode: one emitted token per word, no separators.
    pub per_token_types: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 100,
            batch_size: 32,
            val_every: 10,
            target_train_accuracy: None,
            train_check_every: 10,
            per_token_types: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub last_lr: f64,
    pub val_accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
}

impl EpochLog {
    pub fn render(&self) -> String {
        let mut line = format!(
            "epoch {} loss {} lr {}",
            self.epoch, self.mean_loss, self.last_lr
        );
        if let Some(v) = self.val_accuracy {
            line.push_str(&format!(" val_acc {v}"));
        }
        if let Some(t) = self.train_accuracy {
            line.push_str(&format!(" train_acc {t}"));
        }
        line
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: Parameters,
    /// Checkpoint of the best validation accuracy seen, when validated.
    pub best: Option<(usize, f64, Parameters)>,
    pub log: Vec<EpochLog>,
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: usize,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.98;
const ADAM_EPS: f64 = 1e-9;

impl Adam {
    fn new(params: &Parameters) -> Adam {
        let shapes: Vec<_> = params.blocks().iter().map(|(_, b)| b.raw_dim()).collect();
        Adam {
            m: shapes.iter().map(|s| Array2::zeros(s.clone())).collect(),
            v: shapes.iter().map(|s| Array2::zeros(s.clone())).collect(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Parameters, grads: &[Array2<f64>], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        for (i, (_, block)) in params.blocks_mut().into_iter().enumerate() {
            let g = &grads[i];
            self.m[i].zip_mut_with(g, |m, g| *m = BETA1 * *m + (1.0 - BETA1) * g);
            self.v[i].zip_mut_with(g, |v, g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
            ndarray::Zip::from(&mut *block)
                .and(&self.m[i])
                .and(&self.v[i])
                .for_each(|p, m, v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                });
        }
    }
}

fn splitmix(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Smoothed-KL loss node over the batch, averaged over non-padding
/// positions.
pub(crate) fn build_loss(
    tape: &mut Tape,
    probs: &[NodeId],
    batch: &Batch,
    smoothing: f64,
    pad_id: usize,
    vocab_size: usize,
) -> NodeId {
    let total = batch.loss_positions().max(1) as f64;
    let mut terms = Vec::with_capacity(probs.len());
    for (i, p) in probs.iter().enumerate() {
        let t = batch.max_target;
        let mut q = Array2::zeros((t, vocab_size));
        let mut weights = vec![0.0; t];
        for r in 0..t {
            if batch.tgt_mask[i][r] {
                let row = smoothed_target_row(batch.gold_outputs[i][r], vocab_size, pad_id, smoothing);
                q.row_mut(r).assign(&ndarray::Array1::from(row));
                weights[r] = 1.0;
            }
        }
        let loss = tape.kl_loss(*p, q, weights, 1.0);
        terms.push((loss, 1.0 / total));
    }
    tape.sum_weighted(terms)
}

/// One forward+backward over a batch: the scalar loss and per-block
/// gradients in `Parameters::blocks` order.
pub fn loss_and_grads(
    params: &Parameters,
    batch: &Batch,
    vocab: &SymbolVocab,
    mode: Mode,
) -> Result<(f64, Vec<Array2<f64>>), ModelError> {
    let pad_id = vocab.id(PAD).expect("pad token");
    let mut tape = Tape::new();
    let staged = stage(&mut tape, params);
    let probs = forward_batch(&mut tape, &staged, params, batch, mode)?;
    let loss = build_loss(
        &mut tape,
        &probs,
        batch,
        params.config.smoothing,
        pad_id,
        params.vocab_size(),
    );
    let value = tape.scalar(loss);
    tape.backward(loss);
    let grads = staged
        .block_ids()
        .into_iter()
        .map(|id| tape.grad(id).clone())
        .collect();
    Ok((value, grads))
}

/// The scalar batch loss only (used by finite-difference checks).
pub fn batch_loss(
    params: &Parameters,
    batch: &Batch,
    vocab: &SymbolVocab,
    mode: Mode,
) -> Result<f64, ModelError> {
    let pad_id = vocab.id(PAD).expect("pad token");
    let mut tape = Tape::new();
    let staged = stage(&mut tape, params);
    let probs = forward_batch(&mut tape, &staged, params, batch, mode)?;
    let loss = build_loss(
        &mut tape,
        &probs,
        batch,
        params.config.smoothing,
        pad_id,
        params.vocab_size(),
    );
    Ok(tape.scalar(loss))
}

/// Greedy-decode a sample and score it against its gold types; returns
/// (correct positions, total positions).
pub fn sample_type_accuracy(
    params: &Parameters,
    vocab: &SymbolVocab,
    sample: &EncodedSample,
    per_token_types: bool,
) -> Result<(usize, usize), ModelError> {
    let stop = if per_token_types {
        StopRule::TokenCount(sample.words.len())
    } else {
        StopRule::SeparatorCount(sample.words.len())
    };
    let word_input = super::decode::word_input_for_sample(params, sample)?;
    let out: DecodeOutput = greedy_decode(params, vocab, &word_input, stop, DecodeMode::Free)?;
    let total = sample.gold_types.len();
    let mut correct = 0;
    let predicted = decoded_types(&out.tokens, vocab, per_token_types);
    for (i, gold) in sample.gold_types.iter().enumerate() {
        if let Some(Some(t)) = predicted.get(i) {
            if t == gold {
                correct += 1;
            }
        }
    }
    Ok((correct, total))
}

/// Expand merges and segment a decoded token stream into per-position
/// parsed types (None for malformed segments).
pub fn decoded_types(
    tokens: &[String],
    vocab: &SymbolVocab,
    per_token_types: bool,
) -> Vec<Option<crate::types::Type>> {
    if per_token_types {
        tokens
            .iter()
            .map(|tok| {
                let expanded = vocab.expand_seq(std::slice::from_ref(tok)).ok()?;
                crate::types::parse_polish(&expanded, vocab.base()).ok()
            })
            .collect()
    } else {
        segment_assignment(tokens, vocab)
            .into_iter()
            .map(|seg| seg.parsed.ok())
            .collect()
    }
}

fn mean_type_accuracy(
    params: &Parameters,
    vocab: &SymbolVocab,
    samples: &[EncodedSample],
    per_token_types: bool,
) -> Result<f64, ModelError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in samples {
        let (c, t) = sample_type_accuracy(params, vocab, s, per_token_types)?;
        correct += c;
        total += t;
    }
    Ok(if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    })
}

/// Train a fresh model. Deterministic given the config seed: batching,
/// initialization, and dropout all derive from it.
pub fn train(
    vocab: &SymbolVocab,
    provider: WordRepProvider,
    train_set: &[EncodedSample],
    val_set: &[EncodedSample],
    config: &ModelConfig,
    options: &TrainOptions,
) -> Result<TrainOutcome, ModelError> {
    let mut params = Parameters::init(config, provider, vocab.len())?;
    let mut adam = Adam::new(&params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(splitmix(config.seed, 1));
    let mut log = Vec::new();
    let mut best: Option<(usize, f64, Parameters)> = None;
    let mut global_step = 0usize;

    for epoch in 1..=options.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut last_lr = 0.0;
        for chunk in order.chunks(options.batch_size.max(1)) {
            global_step += 1;
            let samples: Vec<&EncodedSample> = chunk.iter().map(|i| &train_set[*i]).collect();
            let batch = Batch::build(&samples, &params.provider, vocab)?;
            let mode = Mode::Train {
                dropout_seed: splitmix(config.seed, 0x1000 + global_step as u64),
            };
            let (loss, grads) = loss_and_grads(&params, &batch, vocab, mode)?;
            if !loss.is_finite() {
                return Err(ModelError::Divergence {
                    epoch,
                    step: global_step,
                    loss,
                });
            }
            last_lr = lr_schedule(global_step, config.d, config.warmup);
            adam.update(&mut params, &grads, last_lr);
            epoch_loss += loss;
            batches += 1;
        }
        let mean_loss = epoch_loss / batches.max(1) as f64;

        let val_accuracy = if options.val_every > 0
            && !val_set.is_empty()
            && epoch % options.val_every == 0
        {
            let acc = mean_type_accuracy(&params, vocab, val_set, options.per_token_types)?;
            let improved = best.as_ref().map(|(_, b, _)| acc > *b).unwrap_or(true);
            if improved {
                best = Some((epoch, acc, params.clone()));
            }
            Some(acc)
        } else {
            None
        };

        let train_accuracy = if options.target_train_accuracy.is_some()
            && epoch % options.train_check_every.max(1) == 0
        {
            Some(mean_type_accuracy(&params, vocab, train_set, options.per_token_types)?)
        } else {
            None
        };

        log.push(EpochLog {
            epoch,
            mean_loss,
            last_lr,
            val_accuracy,
            train_accuracy,
        });

        if let (Some(target), Some(acc)) = (options.target_train_accuracy, train_accuracy) {
            if acc >= target {
                break;
            }
        }
    }
    Ok(TrainOutcome { params, best, log })
}
