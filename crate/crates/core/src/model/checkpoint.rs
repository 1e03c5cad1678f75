//! Versioned text serialization: checkpoints with self-describing shapes,
//! the symbol-embedding export, and precomputed word-vector files. Floats
//! are written in Rust's shortest round-trip form, so save/load is bitwise.

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use ndarray::Array2;

use super::{ModelConfig, ModelError, Parameters, WordRepProvider};
use crate::grammar::SymbolVocab;

const CHECKPOINT_HEADER: &str = "tlgtag checkpoint v1";
const EMBEDDINGS_HEADER: &str = "tlgtag embeddings v1";
const WORDVECS_HEADER: &str = "tlgtag wordvecs v1";

fn write_matrix(f: &mut impl Write, name: &str, m: &Array2<f64>) -> std::io::Result<()> {
    writeln!(f, "param {} {} {}", name, m.nrows(), m.ncols())?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Save a checkpoint: the resolved config, the provider with its word list,
/// the symbol inventory, and every parameter block.
pub fn save_checkpoint(
    params: &Parameters,
    vocab: &SymbolVocab,
    path: &Path,
    provenance: &[String],
) -> Result<(), ModelError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{CHECKPOINT_HEADER}")?;
    for line in provenance {
        writeln!(f, "meta {line}")?;
    }
    let c = &params.config;
    writeln!(f, "config d {}", c.d)?;
    writeln!(f, "config encoder_layers {}", c.encoder_layers)?;
    writeln!(f, "config encoder_heads {}", c.encoder_heads)?;
    writeln!(f, "config decoder_layers {}", c.decoder_layers)?;
    writeln!(f, "config decoder_heads {}", c.decoder_heads)?;
    writeln!(f, "config dropout {}", c.dropout)?;
    writeln!(f, "config smoothing {}", c.smoothing)?;
    writeln!(f, "config warmup {}", c.warmup)?;
    writeln!(f, "config max_tokens_per_word {}", c.max_tokens_per_word)?;
    writeln!(f, "config seed {}", c.seed)?;
    match &params.provider {
        WordRepProvider::Lookup { words, dim } => {
            writeln!(f, "provider lookup {dim}")?;
            for w in words.keys() {
                writeln!(f, "word {w}")?;
            }
        }
        WordRepProvider::Precomputed { dim } => writeln!(f, "provider precomputed {dim}")?,
    }
    for tok in vocab.tokens() {
        writeln!(f, "symbol {tok}")?;
    }
    for (name, block) in params.blocks() {
        write_matrix(&mut f, &name, block)?;
    }
    Ok(())
}

/// Load a checkpoint, verifying the symbol inventory against `vocab`.
pub fn load_checkpoint(path: &Path, vocab: &SymbolVocab) -> Result<Parameters, ModelError> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, msg: String| ModelError::Checkpoint {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, l)) if l.trim() == CHECKPOINT_HEADER => {}
        _ => return Err(err(1, format!("expected header `{CHECKPOINT_HEADER}`"))),
    }
    let mut config = ModelConfig::default();
    let mut provider: Option<WordRepProvider> = None;
    let mut words: IndexMap<String, usize> = IndexMap::new();
    let mut symbols: Vec<String> = Vec::new();
    let mut blocks: IndexMap<String, Array2<f64>> = IndexMap::new();
    while let Some((idx, line)) = lines.next() {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with("meta ") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["config", key, value] => {
                let parse_usize =
                    |v: &str| v.parse::<usize>().map_err(|_| err(line_no, format!("bad value `{v}`")));
                match *key {
                    "d" => config.d = parse_usize(value)?,
                    "encoder_layers" => config.encoder_layers = parse_usize(value)?,
                    "encoder_heads" => config.encoder_heads = parse_usize(value)?,
                    "decoder_layers" => config.decoder_layers = parse_usize(value)?,
                    "decoder_heads" => config.decoder_heads = parse_usize(value)?,
                    "warmup" => config.warmup = parse_usize(value)?,
                    "max_tokens_per_word" => config.max_tokens_per_word = parse_usize(value)?,
                    "dropout" => {
                        config.dropout = value
                            .parse()
                            .map_err(|_| err(line_no, format!("bad value `{value}`")))?
                    }
                    "smoothing" => {
                        config.smoothing = value
                            .parse()
                            .map_err(|_| err(line_no, format!("bad value `{value}`")))?
                    }
                    "seed" => {
                        config.seed = value
                            .parse()
                            .map_err(|_| err(line_no, format!("bad value `{value}`")))?
                    }
                    other => return Err(err(line_no, format!("unknown config key `{other}`"))),
                }
            }
            ["provider", "lookup", dim] => {
                provider = Some(WordRepProvider::Lookup {
                    words: IndexMap::new(),
                    dim: dim.parse().map_err(|_| err(line_no, "bad dim".into()))?,
                })
            }
            ["provider", "precomputed", dim] => {
                provider = Some(WordRepProvider::Precomputed {
                    dim: dim.parse().map_err(|_| err(line_no, "bad dim".into()))?,
                })
            }
            ["word", w] => {
                let next = words.len();
                words.insert(w.to_string(), next);
            }
            ["symbol", s] => symbols.push(s.to_string()),
            ["param", name, rows, cols] => {
                let rows: usize = rows.parse().map_err(|_| err(line_no, "bad rows".into()))?;
                let cols: usize = cols.parse().map_err(|_| err(line_no, "bad cols".into()))?;
                let mut m = Array2::zeros((rows, cols));
                for r in 0..rows {
                    let (ridx, row_line) = lines
                        .next()
                        .ok_or_else(|| err(line_no, format!("param `{name}` truncated")))?;
                    let values: Result<Vec<f64>, _> =
                        row_line.split_whitespace().map(str::parse::<f64>).collect();
                    let values =
                        values.map_err(|_| err(ridx + 1, format!("bad float in `{name}`")))?;
                    if values.len() != cols {
                        return Err(err(ridx + 1, format!("param `{name}` row width")));
                    }
                    for (cidx, v) in values.into_iter().enumerate() {
                        m[[r, cidx]] = v;
                    }
                }
                blocks.insert(name.to_string(), m);
            }
            _ => return Err(err(line_no, format!("unrecognized line `{line}`"))),
        }
    }
    let provider = match provider.ok_or_else(|| err(0, "missing provider".into()))? {
        WordRepProvider::Lookup { dim, .. } => WordRepProvider::Lookup { words, dim },
        p => p,
    };
    let loaded_symbols: Vec<&str> = vocab.tokens().collect();
    if symbols != loaded_symbols {
        return Err(err(
            0,
            "checkpoint symbol inventory does not match the supplied vocabulary".into(),
        ));
    }
    let mut params = Parameters::init(&config, provider, symbols.len())?;
    for (name, block) in params.blocks_mut() {
        let stored = blocks
            .get(&name)
            .ok_or_else(|| err(0, format!("missing param `{name}`")))?;
        if stored.raw_dim() != block.raw_dim() {
            return Err(err(0, format!("shape mismatch for `{name}`")));
        }
        block.assign(stored);
    }
    Ok(params)
}

/// One labeled d-dimensional vector per vocabulary symbol.
pub fn export_symbol_embeddings(
    params: &Parameters,
    vocab: &SymbolVocab,
    path: &Path,
) -> Result<(), ModelError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{EMBEDDINGS_HEADER}")?;
    writeln!(f, "dim {}", params.symbol_embedding.ncols())?;
    for (i, tok) in vocab.tokens().enumerate() {
        let row: Vec<String> = params
            .symbol_embedding
            .row(i)
            .iter()
            .map(|v| v.to_string())
            .collect();
        writeln!(f, "{tok} {}", row.join(" "))?;
    }
    Ok(())
}

pub fn load_symbol_embeddings(path: &Path) -> Result<(Vec<String>, Array2<f64>), ModelError> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, msg: String| ModelError::Checkpoint {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == EMBEDDINGS_HEADER => {}
        _ => return Err(err(1, format!("expected header `{EMBEDDINGS_HEADER}`"))),
    }
    let dim: usize = match lines.next() {
        Some((_, l)) if l.starts_with("dim ") => l[4..]
            .trim()
            .parse()
            .map_err(|_| err(2, "bad dim".into()))?,
        _ => return Err(err(2, "expected `dim`".into())),
    };
    let mut tokens = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let tok = fields.next().ok_or_else(|| err(idx + 1, "empty row".into()))?;
        let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        let values = values.map_err(|_| err(idx + 1, "bad float".into()))?;
        if values.len() != dim {
            return Err(err(idx + 1, format!("expected {dim} components")));
        }
        tokens.push(tok.to_string());
        rows.extend(values);
    }
    let matrix = Array2::from_shape_vec((tokens.len(), dim), rows)
        .map_err(|e| err(0, e.to_string()))?;
    Ok((tokens, matrix))
}

/// Precomputed word vectors: one sentence per record, per-word fixed-width
/// vectors flattened onto the line.
pub fn save_word_vectors(
    sentences: &[Array2<f64>],
    dim: usize,
    path: &Path,
) -> Result<(), ModelError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{WORDVECS_HEADER}")?;
    writeln!(f, "dim {dim}")?;
    for block in sentences {
        if block.ncols() != dim {
            return Err(ModelError::ShapeMismatch(format!(
                "vector block width {} != dim {dim}",
                block.ncols()
            )));
        }
        let line: Vec<String> = block.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn load_word_vectors(path: &Path) -> Result<(usize, Vec<Array2<f64>>), ModelError> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, msg: String| ModelError::Checkpoint {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == WORDVECS_HEADER => {}
        _ => return Err(err(1, format!("expected header `{WORDVECS_HEADER}`"))),
    }
    let dim: usize = match lines.next() {
        Some((_, l)) if l.starts_with("dim ") => l[4..]
            .trim()
            .parse()
            .map_err(|_| err(2, "bad dim".into()))?,
        _ => return Err(err(2, "expected `dim`".into())),
    };
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let values = values.map_err(|_| err(idx + 1, "bad float".into()))?;
        if values.len() % dim != 0 {
            return Err(err(idx + 1, format!("row length not a multiple of {dim}")));
        }
        let words = values.len() / dim;
        out.push(
            Array2::from_shape_vec((words, dim), values).map_err(|e| err(idx + 1, e.to_string()))?,
        );
    }
    Ok((dim, out))
}
