//! Greedy autoregressive decoding. The stop rule counts separators (one per
//! word) or, in fully merged mode, emitted tokens; a hard cap bounds the
//! output at a constant factor of the sentence length. Grammar masking is
//! available but off by default: well-formedness must stay measurable.

use ndarray::Array2;

use super::net::{decode_probs, encode, stage, ForwardCtx, Staged};
use super::tape::Tape;
use super::{EncodedSample, Mode, ModelError, Parameters, WordInput, WordRepProvider};
use crate::grammar::{PrefixStatus, PrefixTracker, SymbolVocab, TokenClass, SEQ_START};

/// When decoding stops: after emitting as many separators as words, or (in
/// fully merged mode, which drops the separator) as many tokens as words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    SeparatorCount(usize),
    TokenCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Unconstrained argmax over the full vocabulary (minus specials).
    Free,
    /// Restrict each step to tokens that keep the current type prefix valid.
    GrammarMasked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub tokens: Vec<String>,
    pub token_ids: Vec<usize>,
    /// The hard cap fired before the stop rule was met; evaluation counts
    /// the missing types as wrong.
    pub cap_exceeded: bool,
}

/// Build the encoder input for a sample under the parameters' provider.
pub fn word_input_for_sample(
    params: &Parameters,
    sample: &EncodedSample,
) -> Result<WordInput, ModelError> {
    match &params.provider {
        WordRepProvider::Lookup { .. } => Ok(WordInput::Indices(
            sample
                .words
                .iter()
                .map(|w| params.provider.index_of(w).expect("lookup provider"))
                .collect(),
        )),
        WordRepProvider::Precomputed { .. } => sample
            .vectors
            .clone()
            .map(WordInput::Vectors)
            .ok_or_else(|| ModelError::ShapeMismatch("precomputed provider without vectors".into())),
    }
}

/// Greedy decode one sentence; the parameters are immutable, so concurrent
/// calls over shared parameters are safe.
pub fn greedy_decode(
    params: &Parameters,
    vocab: &SymbolVocab,
    words: &WordInput,
    stop: StopRule,
    mode: DecodeMode,
) -> Result<DecodeOutput, ModelError> {
    let n_words = words.len();
    let word_count = match stop {
        StopRule::SeparatorCount(n) | StopRule::TokenCount(n) => n,
    };
    let cap = word_count.max(1) * params.config.max_tokens_per_word;
    let src_mask = vec![true; n_words];

    // encode once; the encoder output is a constant across decode steps
    let enc_value: Array2<f64> = {
        let mut tape = Tape::new();
        let staged = stage(&mut tape, params);
        let mut ctx = ForwardCtx::new(params.config.dropout, Mode::Eval);
        let enc = encode(&mut tape, &mut ctx, &staged, params, words, &src_mask)?;
        tape.value(enc).clone()
    };

    let start_id = vocab.id(SEQ_START).expect("sequence start token");
    let sep_id = vocab.id(crate::grammar::SEPARATOR).expect("separator");
    let mut emitted: Vec<usize> = Vec::new();
    let mut separators = 0usize;
    let mut cap_exceeded = false;
    let mut tracker = PrefixTracker::new(vocab);

    loop {
        let done = match stop {
            StopRule::SeparatorCount(n) => separators >= n,
            StopRule::TokenCount(n) => emitted.len() >= n,
        };
        if done {
            break;
        }
        if emitted.len() >= cap {
            cap_exceeded = true;
            break;
        }
        let mut dec_input = Vec::with_capacity(emitted.len() + 1);
        dec_input.push(start_id);
        dec_input.extend(&emitted);

        let mut tape = Tape::new();
        let staged: Staged = stage(&mut tape, params);
        let enc = tape.leaf(enc_value.clone());
        let mut ctx = ForwardCtx::new(params.config.dropout, Mode::Eval);
        let probs = decode_probs(&mut tape, &mut ctx, &staged, params, enc, &dec_input, &src_mask);
        let row = tape.value(probs).row(tape.value(probs).nrows() - 1).to_owned();

        let next = argmax_allowed(&row, vocab, mode, &tracker, &emitted, stop, sep_id);
        emitted.push(next);
        if next == sep_id || matches!(stop, StopRule::TokenCount(_)) {
            if next == sep_id {
                separators += 1;
            }
            tracker = PrefixTracker::new(vocab);
        } else if let Some(tok) = vocab.token(next) {
            // feed the tracker even in free mode so masking stays cheap
            let _ = tracker.step(tok);
        }
    }

    let tokens = emitted
        .iter()
        .map(|id| vocab.token(*id).expect("decoded id in vocab").to_string())
        .collect();
    Ok(DecodeOutput {
        tokens,
        token_ids: emitted,
        cap_exceeded,
    })
}

fn argmax_allowed(
    row: &ndarray::Array1<f64>,
    vocab: &SymbolVocab,
    mode: DecodeMode,
    tracker: &PrefixTracker<'_>,
    emitted: &[usize],
    stop: StopRule,
    sep_id: usize,
) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (id, p) in row.iter().enumerate() {
        let tok = match vocab.token(id) {
            Some(t) => t,
            None => continue,
        };
        let class = vocab.class(tok).expect("token in vocab");
        let allowed = match mode {
            DecodeMode::Free => !matches!(
                class,
                TokenClass::Pad | TokenClass::SeqStart | TokenClass::SeqEnd
            ),
            DecodeMode::GrammarMasked => match class {
                TokenClass::Pad | TokenClass::SeqStart | TokenClass::SeqEnd => false,
                TokenClass::Separator => {
                    // a separator may close only a complete non-empty type,
                    // and only in separator-terminated mode
                    matches!(stop, StopRule::SeparatorCount(_))
                        && tracker.status() == PrefixStatus::ValidComplete
                        && emitted.last().map(|l| *l != sep_id).unwrap_or(false)
                }
                _ => match stop {
                    // fully merged mode: each token must be one whole type
                    StopRule::TokenCount(_) => {
                        let mut fresh = PrefixTracker::new(vocab);
                        matches!(fresh.step(tok), Ok(PrefixStatus::ValidComplete))
                    }
                    StopRule::SeparatorCount(_) => tracker.allows(tok),
                },
            },
        };
        if !allowed {
            continue;
        }
        match best {
            None => best = Some((id, *p)),
            Some((_, bp)) if *p > bp => best = Some((id, *p)),
            _ => {}
        }
    }
    best.map(|(id, _)| id)
        .expect("an atom or connective is always allowed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_rule_counts() {
        assert_eq!(StopRule::SeparatorCount(5), StopRule::SeparatorCount(5));
        assert_ne!(StopRule::SeparatorCount(5), StopRule::TokenCount(5));
    }
}
