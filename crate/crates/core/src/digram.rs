//! Digram (byte-pair) encoding over intra-type symbol sequences: learn,
//! apply, and revert merges. Merges never span the type separator, so a
//! merged token always expands to a contiguous run inside one type.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

use crate::grammar::{SymbolVocab, TokenClass};
use crate::types::{Token, TokenSeq};

#[derive(Debug, Error)]
pub enum DigramError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("merge table {path}:{line}: {msg}")]
    Table {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How many merges to learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeGoal {
    Count(usize),
    /// Merge until every training type is a single token.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRule {
    pub left: Token,
    pub right: Token,
    pub merged: Token,
}

/// Ordered merge rules plus the full atomic expansion of each merged token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeTable {
    rules: Vec<MergeRule>,
    expansions: IndexMap<Token, TokenSeq>,
}

impl MergeTable {
    pub fn rules(&self) -> &[MergeRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn expansion(&self, tok: &str) -> Option<&TokenSeq> {
        self.expansions.get(tok)
    }
}

fn is_mergeable(vocab: &SymbolVocab, tok: &str) -> bool {
    matches!(
        vocab.class(tok),
        Some(TokenClass::Atom) | Some(TokenClass::Connective) | Some(TokenClass::Merged)
    )
}

/// Count adjacent pairs within type segments only (never across the
/// separator or specials).
fn count_pairs(seqs: &[TokenSeq], vocab: &SymbolVocab) -> HashMap<(Token, Token), usize> {
    let mut counts = HashMap::new();
    for seq in seqs {
        for w in seq.windows(2) {
            if is_mergeable(vocab, &w[0]) && is_mergeable(vocab, &w[1]) {
                *counts.entry((w[0].clone(), w[1].clone())).or_insert(0usize) += 1;
            }
        }
    }
    counts
}

/// Replace every adjacent `(left, right)` with `merged`, scanning left to
/// right until no occurrence remains.
fn apply_rule(seq: &[Token], rule: &MergeRule) -> TokenSeq {
    let mut cur = seq.to_vec();
    loop {
        let mut out: TokenSeq = Vec::with_capacity(cur.len());
        let mut i = 0;
        let mut changed = false;
        while i < cur.len() {
            if i + 1 < cur.len() && cur[i] == rule.left && cur[i + 1] == rule.right {
                out.push(rule.merged.clone());
                i += 2;
                changed = true;
            } else {
                out.push(cur[i].clone());
                i += 1;
            }
        }
        if !changed {
            return out;
        }
        cur = out;
    }
}

/// Learn merge rules from flattened assignments: repeatedly merge the most
/// frequent intra-type digram everywhere. Ties break to the lexicographically
/// smallest `(left, right)` token-name pair. Returns the table and the
/// vocabulary enlarged with the merged tokens.
pub fn learn_merges(
    seqs: &[TokenSeq],
    goal: MergeGoal,
    vocab: &SymbolVocab,
) -> Result<(MergeTable, SymbolVocab), DigramError> {
    if seqs.is_empty() {
        return Err(DigramError::EmptyCorpus);
    }
    for seq in seqs {
        for tok in seq {
            if vocab.class(tok).is_none() {
                return Err(DigramError::UnknownSymbol(tok.clone()));
            }
        }
    }
    let limit = match goal {
        MergeGoal::Count(n) => n,
        MergeGoal::Exhaustive => usize::MAX,
    };
    let mut vocab = vocab.clone();
    let mut table = MergeTable::default();
    let mut work: Vec<TokenSeq> = seqs.to_vec();
    for _ in 0..limit {
        let counts = count_pairs(&work, &vocab);
        let best = counts
            .iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            .map(|(pair, _)| pair.clone());
        let (left, right) = match best {
            Some(pair) => pair,
            None => break, // every type is a single token
        };
        let mut merged = format!("{left}·{right}");
        while vocab.contains(&merged) {
            merged.push('\'');
        }
        let mut expansion = vocab
            .expansion(&left)
            .cloned()
            .unwrap_or_else(|| vec![left.clone()]);
        expansion.extend(
            vocab
                .expansion(&right)
                .cloned()
                .unwrap_or_else(|| vec![right.clone()]),
        );
        vocab
            .add_merged(merged.clone(), expansion.clone())
            .expect("expansion tokens are known");
        let rule = MergeRule {
            left,
            right,
            merged: merged.clone(),
        };
        for seq in &mut work {
            *seq = apply_rule(seq, &rule);
        }
        table.rules.push(rule);
        table.expansions.insert(merged, expansion);
    }
    Ok((table, vocab))
}

/// Apply the table's rules in learning order, each to exhaustion.
pub fn apply_merges(seq: &[Token], table: &MergeTable) -> TokenSeq {
    let mut cur = seq.to_vec();
    for rule in &table.rules {
        cur = apply_rule(&cur, rule);
    }
    cur
}

/// Replace every merged token by its atomic expansion. Tokens must be known
/// to the table or the (base) vocabulary.
pub fn revert_merges(
    seq: &[Token],
    table: &MergeTable,
    vocab: &SymbolVocab,
) -> Result<TokenSeq, DigramError> {
    let mut out = Vec::with_capacity(seq.len());
    for tok in seq {
        if let Some(exp) = table.expansion(tok) {
            out.extend(exp.iter().cloned());
        } else if vocab.contains(tok) {
            match vocab.expansion(tok) {
                Some(exp) => out.extend(exp.iter().cloned()),
                None => out.push(tok.clone()),
            }
        } else {
            return Err(DigramError::UnknownSymbol(tok.clone()));
        }
    }
    Ok(out)
}

const MERGES_HEADER: &str = "tlgtag merges v1";

/// Persist as ordered `merge left right merged` lines followed by an
/// expansion section.
pub fn save_merges(table: &MergeTable, path: &Path, provenance: &[String]) -> Result<(), DigramError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{MERGES_HEADER}")?;
    for line in provenance {
        writeln!(f, "meta {line}")?;
    }
    for rule in &table.rules {
        writeln!(f, "merge {} {} {}", rule.left, rule.right, rule.merged)?;
    }
    for (merged, expansion) in &table.expansions {
        writeln!(f, "expand {} {}", merged, expansion.join(" "))?;
    }
    Ok(())
}

/// Load and validate a merge table against the base vocabulary: every rule
/// part must be known, expansions must match the recursive expansion of the
/// parts, and may not contain separators or specials.
pub fn load_merges(path: &Path, vocab: &SymbolVocab) -> Result<(MergeTable, SymbolVocab), DigramError> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, msg: String| DigramError::Table {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MERGES_HEADER => {}
        other => {
            return Err(err(
                1,
                format!("expected header `{MERGES_HEADER}`, got `{}`", other.map(|(_, l)| l).unwrap_or("")),
            ))
        }
    }
    let mut vocab = vocab.clone();
    let mut table = MergeTable::default();
    let mut declared: IndexMap<Token, TokenSeq> = IndexMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with("meta ") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.first().copied() {
            Some("merge") => {
                if fields.len() != 4 {
                    return Err(err(line_no, "merge lines take 3 fields".into()));
                }
                let (left, right, merged) = (fields[1], fields[2], fields[3]);
                for part in [left, right] {
                    if !vocab.contains(part) {
                        return Err(err(line_no, format!("unknown rule part `{part}`")));
                    }
                }
                let mut expansion = vocab
                    .expansion(left)
                    .cloned()
                    .unwrap_or_else(|| vec![left.to_string()]);
                expansion.extend(
                    vocab
                        .expansion(right)
                        .cloned()
                        .unwrap_or_else(|| vec![right.to_string()]),
                );
                vocab
                    .add_merged(merged.to_string(), expansion.clone())
                    .map_err(|e| err(line_no, e.to_string()))?;
                table.rules.push(MergeRule {
                    left: left.to_string(),
                    right: right.to_string(),
                    merged: merged.to_string(),
                });
                table.expansions.insert(merged.to_string(), expansion);
            }
            Some("expand") => {
                if fields.len() < 3 {
                    return Err(err(line_no, "expand lines take 2+ fields".into()));
                }
                declared.insert(
                    fields[1].to_string(),
                    fields[2..].iter().map(|s| s.to_string()).collect(),
                );
            }
            Some(other) => return Err(err(line_no, format!("unknown directive `{other}`"))),
            None => {}
        }
    }
    for rule in &table.rules {
        let computed = &table.expansions[&rule.merged];
        match declared.get(&rule.merged) {
            None => {
                return Err(err(
                    0,
                    format!("missing expansion for `{}`", rule.merged),
                ))
            }
            Some(decl) if decl != computed => {
                return Err(err(
                    0,
                    format!("expansion mismatch for `{}`", rule.merged),
                ))
            }
            Some(_) => {}
        }
    }
    Ok((table, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vocabulary;

    fn base_vocab() -> SymbolVocab {
        SymbolVocab::from_vocabulary(
            Vocabulary::new(["np", "s", "n"], ["su", "det"]).unwrap(),
        )
    }

    fn toks(s: &[&str]) -> TokenSeq {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn learn_single_merge_tie_break() {
        // (→su, np) and (np, s) both occur 3×; lexicographic tie-break on
        // token names picks (np, s) since "np" sorts before "→su".
        let v = base_vocab();
        let corpus = vec![
            toks(&["→su", "np", "s", "#"]),
            toks(&["→su", "np", "s", "#"]),
            toks(&["→su", "np", "s", "#"]),
            toks(&["np", "#"]),
        ];
        let (table, ext) = learn_merges(&corpus, MergeGoal::Count(1), &v).unwrap();
        assert_eq!(table.len(), 1);
        let rule = &table.rules()[0];
        assert_eq!((rule.left.as_str(), rule.right.as_str()), ("np", "s"));
        assert_eq!(rule.merged, "np·s");
        assert_eq!(ext.expansion("np·s").unwrap(), &toks(&["np", "s"]));
    }

    #[test]
    fn learn_unique_max() {
        // (→su, np) occurs 4×, (np, s) 3× — no tie.
        let v = base_vocab();
        let corpus = vec![
            toks(&["→su", "np", "s", "#"]),
            toks(&["→su", "np", "s", "#"]),
            toks(&["→su", "np", "s", "#"]),
            toks(&["→su", "np", "#"]),
        ];
        let (table, _) = learn_merges(&corpus, MergeGoal::Count(1), &v).unwrap();
        let rule = &table.rules()[0];
        assert_eq!((rule.left.as_str(), rule.right.as_str()), ("→su", "np"));
        assert_eq!(
            apply_merges(&toks(&["→su", "np", "s", "#"]), &table),
            toks(&["→su·np", "s", "#"])
        );
        assert_eq!(
            revert_merges(&toks(&["→su·np", "s", "#"]), &table, &v).unwrap(),
            toks(&["→su", "np", "s", "#"])
        );
    }

    #[test]
    fn zero_merges_changes_nothing() {
        let v = base_vocab();
        let corpus = vec![toks(&["→su", "np", "s", "#"])];
        let (table, ext) = learn_merges(&corpus, MergeGoal::Count(0), &v).unwrap();
        assert!(table.is_empty());
        assert_eq!(ext.len(), v.len());
        assert_eq!(
            apply_merges(&toks(&["→su", "np", "s", "#"]), &table),
            toks(&["→su", "np", "s", "#"])
        );
    }

    #[test]
    fn exhaustive_compresses_every_type() {
        let v = base_vocab();
        let corpus = vec![
            toks(&["→su", "np", "s", "#", "→det", "np", "np", "#"]),
            toks(&["np", "#"]),
            toks(&["→det", "np", "np", "#"]),
        ];
        let (table, _) = learn_merges(&corpus, MergeGoal::Exhaustive, &v).unwrap();
        for seq in &corpus {
            let merged = apply_merges(seq, &table);
            // every segment collapses to exactly one token
            let mut seg_len = 0;
            for tok in &merged {
                if tok == "#" {
                    assert_eq!(seg_len, 1, "segment not fully merged in {merged:?}");
                    seg_len = 0;
                } else {
                    seg_len += 1;
                }
            }
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let v = base_vocab();
        assert!(matches!(
            learn_merges(&[], MergeGoal::Count(1), &v),
            Err(DigramError::EmptyCorpus)
        ));
    }

    #[test]
    fn merges_never_cross_separator() {
        let v = base_vocab();
        // (np, →su) is adjacent only across the separator; only (np, s) and
        // (→su, np) are in-type pairs.
        let corpus = vec![toks(&["np", "#", "→su", "np", "#"])];
        let (table, _) = learn_merges(&corpus, MergeGoal::Exhaustive, &v).unwrap();
        for rule in table.rules() {
            assert_ne!((rule.left.as_str(), rule.right.as_str()), ("np", "→su"));
        }
        let merged = apply_merges(&toks(&["np", "#", "→su", "np", "#"]), &table);
        let separators = merged.iter().filter(|t| *t == "#").count();
        assert_eq!(separators, 2);
    }

    #[test]
    fn revert_unknown_symbol() {
        let v = base_vocab();
        let table = MergeTable::default();
        assert!(matches!(
            revert_merges(&toks(&["mystery"]), &table, &v),
            Err(DigramError::UnknownSymbol(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let v = base_vocab();
        let corpus = vec![
            toks(&["→su", "np", "s", "#"]),
            toks(&["→su", "np", "s", "#"]),
            toks(&["→det", "np", "np", "#"]),
        ];
        let (table, _) = learn_merges(&corpus, MergeGoal::Count(3), &v).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("merges.txt");
        save_merges(&table, &path, &["fixture".into()]).unwrap();
        let (loaded, _) = load_merges(&path, &v).unwrap();
        assert_eq!(loaded, table);
    }
}
