//! The type algebra: atoms, labeled linear implications, polish notation,
//! arity, and obliqueness validation.
//!
//! A type is either an atomic type or an implication `arg -(label)-> result`.
//! Star-flagged atoms (names ending in `*`, e.g. `adj*`) are distinct
//! vocabulary symbols marking variadic argument positions; they are legal
//! only on argument positions.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexSet;
use thiserror::Error;

/// A grammar symbol: an atom name, a connective (`→label`), the separator,
/// a special token, or a merged shorthand.
pub type Token = String;
/// A flat sequence of grammar symbols.
pub type TokenSeq = Vec<Token>;

/// Connective token for a dependency label (one token per label).
pub fn connective_token(label: &str) -> Token {
    format!("→{label}")
}

/// If `tok` is a connective token, return its label.
pub fn connective_label(tok: &str) -> Option<&str> {
    tok.strip_prefix('→')
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("empty symbol name")]
    EmptyName,
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("symbol `{0}` collides with a connective or the separator")]
    ReservedName(String),
    #[error("star atom `{0}` has no base atom in the vocabulary")]
    MissingStarBase(String),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("star atom `{0}` used outside an argument position")]
    StarOutsideArgument(String),
}

/// Errors from [`parse_polish`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParsePolishError {
    #[error("sequence exhausted mid-type")]
    Incomplete,
    #[error("{0} trailing token(s) after a complete type")]
    TrailingInput(usize),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

/// Declared atomic and label vocabularies. Loaded from a declaration file,
/// not hard-coded; see [`crate::corpus`] for the file format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    atoms: IndexSet<String>,
    labels: IndexSet<String>,
}

impl Vocabulary {
    /// Build a vocabulary, validating uniqueness, reserved names, and that
    /// every star atom `x*` has its base `x` declared.
    pub fn new<A, L>(atoms: A, labels: L) -> Result<Self, TypeError>
    where
        A: IntoIterator,
        A::Item: Into<String>,
        L: IntoIterator,
        L::Item: Into<String>,
    {
        let mut atom_set = IndexSet::new();
        for a in atoms {
            let a: String = a.into();
            if a.is_empty() {
                return Err(TypeError::EmptyName);
            }
            if a == "#" || a.starts_with('→') || a.starts_with('<') {
                return Err(TypeError::ReservedName(a));
            }
            if !atom_set.insert(a.clone()) {
                return Err(TypeError::DuplicateSymbol(a));
            }
        }
        let mut label_set = IndexSet::new();
        for l in labels {
            let l: String = l.into();
            if l.is_empty() {
                return Err(TypeError::EmptyName);
            }
            if !label_set.insert(l.clone()) {
                return Err(TypeError::DuplicateSymbol(l));
            }
            if atom_set.contains(&connective_token(&l)) {
                return Err(TypeError::ReservedName(connective_token(&l)));
            }
        }
        for a in &atom_set {
            if let Some(base) = a.strip_suffix('*') {
                if !atom_set.contains(base) {
                    return Err(TypeError::MissingStarBase(a.clone()));
                }
            }
        }
        Ok(Vocabulary {
            atoms: atom_set,
            labels: label_set,
        })
    }

    pub fn is_atom(&self, name: &str) -> bool {
        self.atoms.contains(name)
    }

    pub fn is_label(&self, name: &str) -> bool {
        self.labels.contains(name)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(String::as_str)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }
}

/// A type: an atomic leaf or a dependency-labeled implication.
/// `Arrow { label: d, arg: A, result: B }` is the functor `A →d B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Atom(String),
    Arrow {
        label: String,
        arg: Box<Type>,
        result: Box<Type>,
    },
}

impl Type {
    pub fn atom(name: impl Into<String>) -> Type {
        Type::Atom(name.into())
    }

    pub fn arrow(label: impl Into<String>, arg: Type, result: Type) -> Type {
        Type::Arrow {
            label: label.into(),
            arg: Box::new(arg),
            result: Box::new(result),
        }
    }

    /// True for star-flagged atoms (`adj*`); they mark variadic arguments.
    pub fn is_star_atom(&self) -> bool {
        matches!(self, Type::Atom(name) if name.ends_with('*'))
    }

    /// For a star atom `x*`, the base atom `x`.
    pub fn star_base(&self) -> Option<&str> {
        match self {
            Type::Atom(name) => name.strip_suffix('*'),
            Type::Arrow { .. } => None,
        }
    }

    /// Number of top-level argument positions along the result spine.
    pub fn arity(&self) -> usize {
        match self {
            Type::Atom(_) => 0,
            Type::Arrow { result, .. } => 1 + result.arity(),
        }
    }

    /// Total tree nodes (arrows + atoms).
    pub fn node_count(&self) -> usize {
        match self {
            Type::Atom(_) => 1,
            Type::Arrow { arg, result, .. } => 1 + arg.node_count() + result.node_count(),
        }
    }

    /// Number of atomic leaves.
    pub fn atom_count(&self) -> usize {
        match self {
            Type::Atom(_) => 1,
            Type::Arrow { arg, result, .. } => arg.atom_count() + result.atom_count(),
        }
    }

    /// Check that every atom and label is declared and that star atoms occur
    /// only on argument positions.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<(), TypeError> {
        if self.is_star_atom() {
            // the root is not an argument position
            if let Type::Atom(name) = self {
                return Err(TypeError::StarOutsideArgument(name.clone()));
            }
        }
        self.validate_inner(vocab)
    }

    fn validate_inner(&self, vocab: &Vocabulary) -> Result<(), TypeError> {
        match self {
            Type::Atom(name) => {
                if vocab.is_atom(name) {
                    Ok(())
                } else {
                    Err(TypeError::UnknownAtom(name.clone()))
                }
            }
            Type::Arrow { label, arg, result } => {
                if !vocab.is_label(label) {
                    return Err(TypeError::UnknownLabel(label.clone()));
                }
                arg.validate_inner(vocab)?;
                if result.is_star_atom() {
                    if let Type::Atom(name) = result.as_ref() {
                        return Err(TypeError::StarOutsideArgument(name.clone()));
                    }
                }
                result.validate_inner(vocab)
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_infix(self))
    }
}

/// Prefix (polish) serialization: an arrow emits its connective token, then
/// its argument, then its result; an atom emits its name. Output length
/// equals the number of tree nodes.
pub fn serialize_polish(t: &Type) -> TokenSeq {
    let mut out = Vec::with_capacity(t.node_count());
    push_polish(t, &mut out);
    out
}

fn push_polish(t: &Type, out: &mut TokenSeq) {
    match t {
        Type::Atom(name) => out.push(name.clone()),
        Type::Arrow { label, arg, result } => {
            out.push(connective_token(label));
            push_polish(arg, out);
            push_polish(result, out);
        }
    }
}

/// Exact inverse of [`serialize_polish`]; consumes the entire sequence.
pub fn parse_polish(tokens: &[Token], vocab: &Vocabulary) -> Result<Type, ParsePolishError> {
    let mut pos = 0;
    let t = parse_polish_at(tokens, &mut pos, vocab)?;
    if pos < tokens.len() {
        return Err(ParsePolishError::TrailingInput(tokens.len() - pos));
    }
    Ok(t)
}

fn parse_polish_at(
    tokens: &[Token],
    pos: &mut usize,
    vocab: &Vocabulary,
) -> Result<Type, ParsePolishError> {
    let tok = tokens.get(*pos).ok_or(ParsePolishError::Incomplete)?;
    *pos += 1;
    if let Some(label) = connective_label(tok) {
        if !vocab.is_label(label) {
            return Err(ParsePolishError::UnknownSymbol(tok.clone()));
        }
        let arg = parse_polish_at(tokens, pos, vocab)?;
        let result = parse_polish_at(tokens, pos, vocab)?;
        Ok(Type::arrow(label, arg, result))
    } else if vocab.is_atom(tok) {
        Ok(Type::Atom(tok.clone()))
    } else {
        Err(ParsePolishError::UnknownSymbol(tok.clone()))
    }
}

/// Which way ranks run along a result spine, from the outermost argument
/// toward the head result. The corpus convention consumes the most oblique
/// dependent first, i.e. ranks descend inward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpineDirection {
    /// rank(outer) >= rank(inner): the outermost argument is the most oblique.
    DescendingInward,
    /// rank(outer) <= rank(inner).
    AscendingInward,
}

/// A total strict order over dependency labels, given as a rank mapping.
/// The paper never publishes its order, so it is configuration here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObliquenessOrder {
    ranks: BTreeMap<String, u32>,
    direction: SpineDirection,
}

impl ObliquenessOrder {
    pub fn new<I, S>(ranked: I, direction: SpineDirection) -> Result<Self, TypeError>
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut ranks = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (label, rank) in ranked {
            let label = label.into();
            if !seen.insert(rank) {
                return Err(TypeError::DuplicateSymbol(format!("rank {rank}")));
            }
            if ranks.insert(label.clone(), rank).is_some() {
                return Err(TypeError::DuplicateSymbol(label));
            }
        }
        Ok(ObliquenessOrder { ranks, direction })
    }

    pub fn rank(&self, label: &str) -> Option<u32> {
        self.ranks.get(label).copied()
    }

    pub fn direction(&self) -> SpineDirection {
        self.direction
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.ranks.iter().map(|(l, r)| (l.as_str(), *r))
    }
}

/// True iff along every result spine the consecutive argument labels comply
/// with the declared obliqueness direction. Atoms are vacuously compliant.
pub fn check_obliqueness(t: &Type, order: &ObliquenessOrder) -> Result<bool, TypeError> {
    let mut spine_labels = Vec::new();
    let mut node = t;
    loop {
        match node {
            Type::Atom(_) => break,
            Type::Arrow { label, arg, result } => {
                let rank = order
                    .rank(label)
                    .ok_or_else(|| TypeError::UnknownLabel(label.clone()))?;
                spine_labels.push(rank);
                // each argument starts spines of its own
                if !check_obliqueness(arg, order)? {
                    return Ok(false);
                }
                node = result;
            }
        }
    }
    let ok = spine_labels.windows(2).all(|w| match order.direction {
        SpineDirection::DescendingInward => w[0] >= w[1],
        SpineDirection::AscendingInward => w[0] <= w[1],
    });
    Ok(ok)
}

/// Textual debug syntax: infix with explicit parentheses, arrows rendered
/// `-(label)->`, e.g. `(np -(su)-> s_main)`.
pub fn render_infix(t: &Type) -> String {
    match t {
        Type::Atom(name) => name.clone(),
        Type::Arrow { label, arg, result } => {
            format!("({} -({})-> {})", render_infix(arg), label, render_infix(result))
        }
    }
}

/// Errors from [`parse_infix`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseInfixError {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected `{0}` at byte {1}")]
    Unexpected(String, usize),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Parse the infix debug syntax. Atom names may contain `*` and `_`.
pub fn parse_infix(text: &str, vocab: &Vocabulary) -> Result<Type, ParseInfixError> {
    let mut p = InfixParser { text, pos: 0 };
    let t = p.parse_type()?;
    p.skip_ws();
    if p.pos < p.text.len() {
        return Err(ParseInfixError::Unexpected(
            p.rest().chars().take(8).collect(),
            p.pos,
        ));
    }
    t.validate(vocab)?;
    Ok(t)
}

struct InfixParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> InfixParser<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn parse_type(&mut self) -> Result<Type, ParseInfixError> {
        self.skip_ws();
        if self.eat("(") {
            let arg = self.parse_type()?;
            self.skip_ws();
            if !self.eat("-(") {
                return Err(ParseInfixError::Unexpected(
                    self.rest().chars().take(8).collect(),
                    self.pos,
                ));
            }
            let label = self.parse_name()?;
            if !self.eat(")->") {
                return Err(ParseInfixError::Unexpected(
                    self.rest().chars().take(8).collect(),
                    self.pos,
                ));
            }
            let result = self.parse_type()?;
            self.skip_ws();
            if !self.eat(")") {
                return Err(ParseInfixError::Unexpected(
                    self.rest().chars().take(8).collect(),
                    self.pos,
                ));
            }
            Ok(Type::arrow(label, arg, result))
        } else {
            let name = self.parse_name()?;
            Ok(Type::Atom(name))
        }
    }

    fn parse_name(&mut self) -> Result<String, ParseInfixError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|(_, c)| !(c.is_alphanumeric() || *c == '_' || *c == '*'))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        if end == 0 {
            return Err(if rest.is_empty() {
                ParseInfixError::UnexpectedEnd
            } else {
                ParseInfixError::Unexpected(rest.chars().take(8).collect(), self.pos)
            });
        }
        let name = rest[..end].to_string();
        self.pos += end;
        Ok(name)
    }
}
