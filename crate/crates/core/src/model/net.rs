//! The encoder-decoder forward pass, built on the autodiff tape. Attention
//! heads carry their own projection blocks, so the model width need not be
//! a multiple of the head count. Sub-layers follow the post-norm residual
//! scheme with dropout on each sub-layer output.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ops::positional_encoding;
use super::tape::{NodeId, Tape};
use super::{
    Batch, DecoderLayerParams, EncoderLayerParams, Mode, ModelError, Parameters, WordInput,
    WordRepProvider,
};

pub(crate) struct StagedHead {
    wq: NodeId,
    wk: NodeId,
    wv: NodeId,
    wo: NodeId,
}

pub(crate) struct StagedLn {
    gamma: NodeId,
    beta: NodeId,
}

pub(crate) struct StagedFf {
    w1: NodeId,
    b1: NodeId,
    w2: NodeId,
    b2: NodeId,
}

pub(crate) struct StagedEncoderLayer {
    attn: Vec<StagedHead>,
    ln1: StagedLn,
    ff: StagedFf,
    ln2: StagedLn,
}

pub(crate) struct StagedDecoderLayer {
    self_attn: Vec<StagedHead>,
    ln1: StagedLn,
    cross_attn: Vec<StagedHead>,
    ln2: StagedLn,
    ff: StagedFf,
    ln3: StagedLn,
}

/// Parameters copied onto the tape as leaves; gradients are read back from
/// these ids in `block_ids` order, which matches `Parameters::blocks`.
pub(crate) struct Staged {
    pub word_table: Option<NodeId>,
    pub input_proj: Option<NodeId>,
    pub symbol_embedding: NodeId,
    pub encoder: Vec<StagedEncoderLayer>,
    pub decoder: Vec<StagedDecoderLayer>,
}

fn stage_heads(tape: &mut Tape, heads: &[super::AttentionHeadParams]) -> Vec<StagedHead> {
    heads
        .iter()
        .map(|h| StagedHead {
            wq: tape.leaf(h.wq.clone()),
            wk: tape.leaf(h.wk.clone()),
            wv: tape.leaf(h.wv.clone()),
            wo: tape.leaf(h.wo.clone()),
        })
        .collect()
}

fn stage_ln(tape: &mut Tape, ln: &super::LayerNormParams) -> StagedLn {
    StagedLn {
        gamma: tape.leaf(ln.gamma.clone()),
        beta: tape.leaf(ln.beta.clone()),
    }
}

fn stage_ff(tape: &mut Tape, ff: &super::FeedForwardParams) -> StagedFf {
    StagedFf {
        w1: tape.leaf(ff.w1.clone()),
        b1: tape.leaf(ff.b1.clone()),
        w2: tape.leaf(ff.w2.clone()),
        b2: tape.leaf(ff.b2.clone()),
    }
}

pub(crate) fn stage(tape: &mut Tape, params: &Parameters) -> Staged {
    Staged {
        word_table: params.word_table.as_ref().map(|t| tape.leaf(t.clone())),
        input_proj: params.input_proj.as_ref().map(|p| tape.leaf(p.clone())),
        symbol_embedding: tape.leaf(params.symbol_embedding.clone()),
        encoder: params
            .encoder
            .iter()
            .map(|l: &EncoderLayerParams| StagedEncoderLayer {
                attn: stage_heads(tape, &l.attn),
                ln1: stage_ln(tape, &l.ln1),
                ff: stage_ff(tape, &l.ff),
                ln2: stage_ln(tape, &l.ln2),
            })
            .collect(),
        decoder: params
            .decoder
            .iter()
            .map(|l: &DecoderLayerParams| StagedDecoderLayer {
                self_attn: stage_heads(tape, &l.self_attn),
                ln1: stage_ln(tape, &l.ln1),
                cross_attn: stage_heads(tape, &l.cross_attn),
                ln2: stage_ln(tape, &l.ln2),
                ff: stage_ff(tape, &l.ff),
                ln3: stage_ln(tape, &l.ln3),
            })
            .collect(),
    }
}

impl Staged {
    /// Ids in the exact order of `Parameters::blocks`.
    pub(crate) fn block_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        if let Some(t) = self.word_table {
            out.push(t);
        }
        if let Some(p) = self.input_proj {
            out.push(p);
        }
        out.push(self.symbol_embedding);
        for layer in &self.encoder {
            for h in &layer.attn {
                out.extend([h.wq, h.wk, h.wv, h.wo]);
            }
            out.extend([layer.ln1.gamma, layer.ln1.beta]);
            out.extend([layer.ff.w1, layer.ff.b1, layer.ff.w2, layer.ff.b2]);
            out.extend([layer.ln2.gamma, layer.ln2.beta]);
        }
        for layer in &self.decoder {
            for h in &layer.self_attn {
                out.extend([h.wq, h.wk, h.wv, h.wo]);
            }
            out.extend([layer.ln1.gamma, layer.ln1.beta]);
            for h in &layer.cross_attn {
                out.extend([h.wq, h.wk, h.wv, h.wo]);
            }
            out.extend([layer.ln2.gamma, layer.ln2.beta]);
            out.extend([layer.ff.w1, layer.ff.b1, layer.ff.w2, layer.ff.b2]);
            out.extend([layer.ln3.gamma, layer.ln3.beta]);
        }
        out
    }
}

pub(crate) struct ForwardCtx {
    dropout: f64,
    rng: Option<ChaCha8Rng>,
}

impl ForwardCtx {
    pub(crate) fn new(dropout: f64, mode: Mode) -> ForwardCtx {
        let rng = match mode {
            Mode::Train { dropout_seed } if dropout > 0.0 => {
                Some(ChaCha8Rng::seed_from_u64(dropout_seed))
            }
            _ => None,
        };
        ForwardCtx { dropout, rng }
    }

    /// Inverted dropout as a constant-mask product; identity in eval mode.
    fn dropout(&mut self, tape: &mut Tape, x: NodeId) -> NodeId {
        let Some(rng) = &mut self.rng else {
            return x;
        };
        let keep = 1.0 - self.dropout;
        let shape = tape.value(x).raw_dim();
        let mask = Array2::from_shape_fn(shape, |_| {
            if rng.gen_bool(keep) {
                1.0 / keep
            } else {
                0.0
            }
        });
        tape.mul_const(x, mask)
    }
}

/// Additive mask with `-inf` at masked key columns.
fn key_mask(rows: usize, keys: &[bool]) -> Array2<f64> {
    Array2::from_shape_fn((rows, keys.len()), |(_, j)| {
        if keys[j] {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Causal mask: position t may attend positions <= t.
fn causal_mask(t: usize) -> Array2<f64> {
    Array2::from_shape_fn((t, t), |(i, j)| if j <= i { 0.0 } else { f64::NEG_INFINITY })
}

fn attention(
    tape: &mut Tape,
    ctx: &mut ForwardCtx,
    heads: &[StagedHead],
    head_dim: usize,
    queries: NodeId,
    keys_values: NodeId,
    mask: &Array2<f64>,
) -> NodeId {
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut total: Option<NodeId> = None;
    for head in heads {
        let q = tape.matmul(queries, head.wq);
        let k = tape.matmul(keys_values, head.wk);
        let v = tape.matmul(keys_values, head.wv);
        let scores = tape.matmul_bt(q, k);
        let scaled = tape.scale(scores, scale);
        let probs = tape.masked_softmax(scaled, mask);
        let probs = ctx.dropout(tape, probs);
        let context = tape.matmul(probs, v);
        let out = tape.matmul(context, head.wo);
        total = Some(match total {
            None => out,
            Some(acc) => tape.add(acc, out),
        });
    }
    total.expect("at least one attention head")
}

fn feed_forward(tape: &mut Tape, ff: &StagedFf, x: NodeId) -> NodeId {
    let h = tape.matmul(x, ff.w1);
    let h = tape.add_row(h, ff.b1);
    let h = tape.gelu(h);
    let h = tape.matmul(h, ff.w2);
    tape.add_row(h, ff.b2)
}

fn sublayer(
    tape: &mut Tape,
    ctx: &mut ForwardCtx,
    x: NodeId,
    out: NodeId,
    ln: &StagedLn,
) -> NodeId {
    let dropped = ctx.dropout(tape, out);
    let residual = tape.add(x, dropped);
    tape.layer_norm(residual, ln.gamma, ln.beta)
}

/// Run the encoder over one sentence's (padded) word block.
pub(crate) fn encode(
    tape: &mut Tape,
    ctx: &mut ForwardCtx,
    staged: &Staged,
    params: &Parameters,
    input: &WordInput,
    src_mask: &[bool],
) -> Result<NodeId, ModelError> {
    let d = params.config.d;
    let mut x = match (input, staged.word_table) {
        (WordInput::Indices(ids), Some(table)) => tape.gather(table, ids),
        (WordInput::Vectors(block), _) => {
            if block.ncols() != params.provider.dim() {
                return Err(ModelError::ShapeMismatch(format!(
                    "vector block width {} != provider dim {}",
                    block.ncols(),
                    params.provider.dim()
                )));
            }
            tape.leaf(block.clone())
        }
        (WordInput::Indices(_), None) => {
            return Err(ModelError::ShapeMismatch(
                "index input without a lookup table".into(),
            ))
        }
    };
    if let Some(proj) = staged.input_proj {
        x = tape.matmul(x, proj);
    }
    let s = tape.value(x).nrows();
    let pe = positional_encoding(s, d);
    x = tape.add_const(x, &pe);
    x = ctx.dropout(tape, x);
    let enc_mask = key_mask(s, src_mask);
    let head_dim = params.config.encoder_head_dim();
    for layer in &staged.encoder {
        let attn = attention(tape, ctx, &layer.attn, head_dim, x, x, &enc_mask);
        x = sublayer(tape, ctx, x, attn, &layer.ln1);
        let ff = feed_forward(tape, &layer.ff, x);
        x = sublayer(tape, ctx, x, ff, &layer.ln2);
    }
    Ok(x)
}

/// Run the decoder over one sentence's (padded) target block and produce a
/// `T × vocab` matrix of sigsoftmax distributions.
pub(crate) fn decode_probs(
    tape: &mut Tape,
    ctx: &mut ForwardCtx,
    staged: &Staged,
    params: &Parameters,
    enc_out: NodeId,
    decoder_input: &[usize],
    src_mask: &[bool],
) -> NodeId {
    let d = params.config.d;
    let t = decoder_input.len();
    let mut x = tape.gather(staged.symbol_embedding, decoder_input);
    x = tape.scale(x, (d as f64).sqrt());
    let pe = positional_encoding(t, d);
    x = tape.add_const(x, &pe);
    x = ctx.dropout(tape, x);
    let self_mask = causal_mask(t);
    let cross = key_mask(t, src_mask);
    let head_dim = params.config.decoder_head_dim();
    for layer in &staged.decoder {
        let attn = attention(tape, ctx, &layer.self_attn, head_dim, x, x, &self_mask);
        x = sublayer(tape, ctx, x, attn, &layer.ln1);
        let attn = attention(tape, ctx, &layer.cross_attn, head_dim, x, enc_out, &cross);
        x = sublayer(tape, ctx, x, attn, &layer.ln2);
        let ff = feed_forward(tape, &layer.ff, x);
        x = sublayer(tape, ctx, x, ff, &layer.ln3);
    }
    let logits = tape.matmul_bt(x, staged.symbol_embedding);
    tape.sigsoftmax(logits)
}

/// Forward a whole batch; one probability node per sentence.
pub(crate) fn forward_batch(
    tape: &mut Tape,
    staged: &Staged,
    params: &Parameters,
    batch: &Batch,
    mode: Mode,
) -> Result<Vec<NodeId>, ModelError> {
    if let (WordRepProvider::Lookup { .. }, None) = (&params.provider, &params.word_table) {
        return Err(ModelError::ShapeMismatch("missing word table".into()));
    }
    let mut ctx = ForwardCtx::new(params.config.dropout, mode);
    let mut out = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let enc = encode(tape, &mut ctx, staged, params, &batch.words[i], &batch.src_mask[i])?;
        let probs = decode_probs(
            tape,
            &mut ctx,
            staged,
            params,
            enc,
            &batch.decoder_inputs[i],
            &batch.src_mask[i],
        );
        out.push(probs);
    }
    Ok(out)
}

/// Teacher-forced distributions for every sentence in the batch, in eval
/// mode: position t depends only on target positions before t and the
/// source, and every row is a distribution.
pub fn forward_teacher_forced(
    params: &Parameters,
    batch: &Batch,
) -> Result<Vec<Array2<f64>>, ModelError> {
    let mut tape = Tape::new();
    let staged = stage(&mut tape, params);
    let nodes = forward_batch(&mut tape, &staged, params, batch, Mode::Eval)?;
    Ok(nodes.into_iter().map(|n| tape.value(n).clone()).collect())
}
