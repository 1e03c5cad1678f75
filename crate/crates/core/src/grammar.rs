//! The type-forming context-free grammar over the token vocabulary:
//! recognition, prefix validity for constrained decoding, and (de)flattening
//! of whole-sentence type assignments with the separator symbol.

use indexmap::IndexMap;
use thiserror::Error;

use crate::types::{
    connective_token, parse_polish, serialize_polish, ParsePolishError, Token, TokenSeq, Type,
    Vocabulary,
};

pub const PAD: &str = "<pad>";
pub const SEQ_START: &str = "<s>";
pub const SEQ_END: &str = "</s>";
pub const SEPARATOR: &str = "#";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

/// What a token is to the type grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Pad,
    SeqStart,
    SeqEnd,
    Separator,
    Atom,
    Connective,
    Merged,
}

#[derive(Debug, Clone)]
struct TokenInfo {
    class: TokenClass,
    /// Expansion into atoms/connectives; only for merged tokens.
    expansion: Option<TokenSeq>,
}

/// The full symbol vocabulary: atoms, connectives, separator, specials, and
/// merged shorthands with their atomic expansions. Token ids are assigned in
/// a fixed deterministic order (specials, separator, atoms, connectives,
/// merges in learning order).
#[derive(Debug, Clone)]
pub struct SymbolVocab {
    base: Vocabulary,
    tokens: IndexMap<Token, TokenInfo>,
}

impl SymbolVocab {
    pub fn from_vocabulary(base: Vocabulary) -> SymbolVocab {
        let mut tokens = IndexMap::new();
        for (tok, class) in [
            (PAD, TokenClass::Pad),
            (SEQ_START, TokenClass::SeqStart),
            (SEQ_END, TokenClass::SeqEnd),
            (SEPARATOR, TokenClass::Separator),
        ] {
            tokens.insert(
                tok.to_string(),
                TokenInfo {
                    class,
                    expansion: None,
                },
            );
        }
        for atom in base.atoms() {
            tokens.insert(
                atom.to_string(),
                TokenInfo {
                    class: TokenClass::Atom,
                    expansion: None,
                },
            );
        }
        for label in base.labels() {
            tokens.insert(
                connective_token(label),
                TokenInfo {
                    class: TokenClass::Connective,
                    expansion: None,
                },
            );
        }
        SymbolVocab { base, tokens }
    }

    pub fn base(&self) -> &Vocabulary {
        &self.base
    }

    /// Register a merged shorthand with its full atomic expansion.
    /// Expansions may not contain the separator or specials.
    pub fn add_merged(&mut self, name: Token, expansion: TokenSeq) -> Result<(), GrammarError> {
        assert!(!expansion.is_empty(), "empty expansion for `{name}`");
        for tok in &expansion {
            match self.class(tok) {
                Some(TokenClass::Atom) | Some(TokenClass::Connective) => {}
                _ => return Err(GrammarError::UnknownSymbol(tok.clone())),
            }
        }
        let prev = self.tokens.insert(
            name.clone(),
            TokenInfo {
                class: TokenClass::Merged,
                expansion: Some(expansion),
            },
        );
        assert!(prev.is_none(), "token `{name}` already declared");
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, tok: &str) -> bool {
        self.tokens.contains_key(tok)
    }

    pub fn class(&self, tok: &str) -> Option<TokenClass> {
        self.tokens.get(tok).map(|i| i.class)
    }

    pub fn id(&self, tok: &str) -> Option<usize> {
        self.tokens.get_index_of(tok)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get_index(id).map(|(t, _)| t.as_str())
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.keys().map(String::as_str)
    }

    pub fn expansion(&self, tok: &str) -> Option<&TokenSeq> {
        self.tokens.get(tok).and_then(|i| i.expansion.as_ref())
    }

    /// Expand every merged token in `seq` to its atomic expansion.
    pub fn expand_seq(&self, seq: &[Token]) -> Result<TokenSeq, GrammarError> {
        let mut out = Vec::with_capacity(seq.len());
        for tok in seq {
            match self.tokens.get(tok) {
                None => return Err(GrammarError::UnknownSymbol(tok.clone())),
                Some(info) => match &info.expansion {
                    Some(exp) => out.extend(exp.iter().cloned()),
                    None => out.push(tok.clone()),
                },
            }
        }
        Ok(out)
    }
}

/// Validity of a token run as a polish-notation type (or prefix of one).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefixStatus {
    ValidComplete,
    /// A proper prefix; `pending` operand slots remain open.
    ValidPrefix { pending: usize },
    Invalid,
}

/// Incremental operand-deficit automaton over one type's token run.
/// Start deficit 1; each connective +1, each atom −1; merged tokens step
/// through their expansion. Once invalid, every extension stays invalid.
#[derive(Debug, Clone)]
pub struct PrefixTracker<'v> {
    vocab: &'v SymbolVocab,
    pending: usize,
    invalid: bool,
}

impl<'v> PrefixTracker<'v> {
    pub fn new(vocab: &'v SymbolVocab) -> Self {
        PrefixTracker {
            vocab,
            pending: 1,
            invalid: false,
        }
    }

    pub fn status(&self) -> PrefixStatus {
        if self.invalid {
            PrefixStatus::Invalid
        } else if self.pending == 0 {
            PrefixStatus::ValidComplete
        } else {
            PrefixStatus::ValidPrefix {
                pending: self.pending,
            }
        }
    }

    /// Feed one token; returns the status after it.
    pub fn step(&mut self, tok: &str) -> Result<PrefixStatus, GrammarError> {
        match self.vocab.class(tok) {
            None => return Err(GrammarError::UnknownSymbol(tok.to_string())),
            Some(TokenClass::Atom) => self.step_atom(),
            Some(TokenClass::Connective) => self.step_connective(),
            Some(TokenClass::Merged) => {
                let expansion = self.vocab.expansion(tok).expect("merged token").clone();
                for t in &expansion {
                    match self.vocab.class(t) {
                        Some(TokenClass::Atom) => self.step_atom(),
                        Some(TokenClass::Connective) => self.step_connective(),
                        _ => unreachable!("expansions hold only atoms and connectives"),
                    }
                }
            }
            // separator and specials never occur inside a type
            Some(_) => self.invalid = true,
        }
        Ok(self.status())
    }

    /// Would feeding `tok` keep the run a valid prefix or completion?
    pub fn allows(&self, tok: &str) -> bool {
        let mut probe = self.clone();
        matches!(probe.step(tok), Ok(s) if s != PrefixStatus::Invalid)
    }

    fn step_atom(&mut self) {
        if self.pending == 0 {
            self.invalid = true;
        } else {
            self.pending -= 1;
        }
    }

    fn step_connective(&mut self) {
        if self.pending == 0 {
            self.invalid = true;
        } else {
            self.pending += 1;
        }
    }
}

/// Run the operand-deficit automaton over a token run (merged tokens are
/// expanded first).
pub fn prefix_status(seq: &[Token], vocab: &SymbolVocab) -> Result<PrefixStatus, GrammarError> {
    let mut tracker = PrefixTracker::new(vocab);
    for tok in seq {
        if tracker.step(tok)? == PrefixStatus::Invalid {
            return Ok(PrefixStatus::Invalid);
        }
    }
    Ok(tracker.status())
}

/// Serialize each type in order, appending the separator after each type
/// (including the last).
pub fn flatten_assignment(types: &[Type], _vocab: &SymbolVocab) -> TokenSeq {
    let mut out = Vec::new();
    for t in types {
        out.extend(serialize_polish(t));
        out.push(SEPARATOR.to_string());
    }
    out
}

/// One separator-delimited chunk of a (possibly faulty) output sequence.
/// Malformed chunks keep their raw token run for error analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub tokens: TokenSeq,
    pub parsed: Result<Type, SegmentError>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SegmentError {
    #[error(transparent)]
    Parse(#[from] ParsePolishError),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

/// Split on the separator and parse each chunk; inverse of
/// [`flatten_assignment`] on valid input. Per-chunk failures are captured
/// per position instead of aborting the whole sequence. A non-empty tail
/// after the last separator counts as a segment of its own.
pub fn segment_assignment(seq: &[Token], vocab: &SymbolVocab) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut current: TokenSeq = Vec::new();
    for tok in seq {
        if vocab.class(tok) == Some(TokenClass::Separator) {
            segments.push(make_segment(std::mem::take(&mut current), vocab));
        } else {
            current.push(tok.clone());
        }
    }
    if !current.is_empty() {
        segments.push(make_segment(current, vocab));
    }
    segments
}

fn make_segment(tokens: TokenSeq, vocab: &SymbolVocab) -> Segment {
    let parsed = match vocab.expand_seq(&tokens) {
        Err(GrammarError::UnknownSymbol(s)) => Err(SegmentError::UnknownSymbol(s)),
        Ok(expanded) => parse_polish(&expanded, vocab.base()).map_err(SegmentError::from),
    };
    Segment { tokens, parsed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::parse_infix;

    fn vocab() -> SymbolVocab {
        SymbolVocab::from_vocabulary(
            Vocabulary::new(
                ["np", "n", "s_main", "pron", "adj", "adj*"],
                ["su", "obj1", "det", "mod", "cnj"],
            )
            .unwrap(),
        )
    }

    fn toks(s: &[&str]) -> TokenSeq {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn prefix_status_basics() {
        let v = vocab();
        assert_eq!(
            prefix_status(&toks(&["→su"]), &v).unwrap(),
            PrefixStatus::ValidPrefix { pending: 2 }
        );
        assert_eq!(
            prefix_status(&toks(&["np"]), &v).unwrap(),
            PrefixStatus::ValidComplete
        );
        assert_eq!(
            prefix_status(&toks(&["np", "np"]), &v).unwrap(),
            PrefixStatus::Invalid
        );
        assert_eq!(
            prefix_status(&toks(&["zzz"]), &v),
            Err(GrammarError::UnknownSymbol("zzz".into()))
        );
    }

    #[test]
    fn prefix_status_star_counts_as_atom() {
        let v = vocab();
        assert_eq!(
            prefix_status(&toks(&["→cnj", "adj*", "→mod", "n", "n"]), &v).unwrap(),
            PrefixStatus::ValidComplete
        );
    }

    #[test]
    fn prefix_status_separator_is_invalid_inside_type() {
        let v = vocab();
        assert_eq!(
            prefix_status(&toks(&["→su", "#"]), &v).unwrap(),
            PrefixStatus::Invalid
        );
    }

    #[test]
    fn flatten_figure_sentence() {
        // the seven types of the running input-output example
        let v = vocab();
        let specs = [
            "(np -(su)-> s_main)",
            "(s_main -(mod)-> s_main)",
            "(np -(det)-> np)",
            "np",
            "(np -(obj1)-> (np -(mod)-> np))",
            "(np -(mod)-> np)",
            "np",
        ];
        let types: Vec<Type> = specs
            .iter()
            .map(|s| parse_infix(s, v.base()).unwrap())
            .collect();
        let flat = flatten_assignment(&types, &v);
        assert_eq!(flat.len(), 26);
        assert_eq!(flat.last().map(String::as_str), Some("#"));
        let expected = toks(&[
            "→su", "np", "s_main", "#", "→mod", "s_main", "s_main", "#", "→det", "np", "np", "#",
            "np", "#", "→obj1", "np", "→mod", "np", "np", "#", "→mod", "np", "np", "#", "np", "#",
        ]);
        assert_eq!(flat, expected);

        // and back
        let segments = segment_assignment(&flat, &v);
        assert_eq!(segments.len(), 7);
        for (seg, t) in segments.iter().zip(&types) {
            assert_eq!(seg.parsed.as_ref().unwrap(), t);
        }
    }

    #[test]
    fn flatten_trivial_cases() {
        let v = vocab();
        assert!(flatten_assignment(&[], &v).is_empty());
        assert_eq!(
            flatten_assignment(&[Type::atom("np"), Type::atom("n")], &v),
            toks(&["np", "#", "n", "#"])
        );
    }

    #[test]
    fn segment_captures_per_position_errors() {
        let v = vocab();
        let segments = segment_assignment(&toks(&["np", "#", "→su", "#"]), &v);
        assert_eq!(segments.len(), 2);
        assert_eq!(segments[0].parsed.as_ref().unwrap(), &Type::atom("np"));
        assert_eq!(
            segments[1].parsed,
            Err(SegmentError::Parse(ParsePolishError::Incomplete))
        );
        assert_eq!(segments[1].tokens, toks(&["→su"]));

        assert!(segment_assignment(&[], &v).is_empty());
    }

    #[test]
    fn segment_keeps_trailing_run() {
        let v = vocab();
        let segments = segment_assignment(&toks(&["np", "#", "→su", "np"]), &v);
        assert_eq!(segments.len(), 2);
        assert!(segments[1].parsed.is_err());
    }

    #[test]
    fn merged_tokens_expand_in_prefix_and_segments() {
        let mut v = vocab();
        v.add_merged("→su·np".into(), toks(&["→su", "np"])).unwrap();
        assert_eq!(
            prefix_status(&toks(&["→su·np"]), &v).unwrap(),
            PrefixStatus::ValidPrefix { pending: 1 }
        );
        let segments = segment_assignment(&toks(&["→su·np", "s_main", "#"]), &v);
        assert_eq!(
            segments[0].parsed.as_ref().unwrap(),
            &Type::arrow("su", Type::atom("np"), Type::atom("s_main"))
        );
    }

    #[test]
    fn tracker_allows_probes_without_mutation() {
        let v = vocab();
        let mut t = PrefixTracker::new(&v);
        t.step("→su").unwrap();
        assert!(t.allows("np"));
        assert!(t.allows("→det"));
        assert!(!t.allows("#"));
        assert_eq!(t.status(), PrefixStatus::ValidPrefix { pending: 2 });
    }
}
