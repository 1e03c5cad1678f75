//! Natural-deduction engine for the labeled implicational fragment:
//! judgements over multiset antecedents, proof checking, and bounded
//! backward proof search validating sentence-level type assignments.
//!
//! Word order is deliberately ignored: antecedents are multisets, faithful
//! to the non-directional logic. The supertagger, not this engine, carries
//! order information.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::types::{parse_infix, render_infix, ParseInfixError, Type, Vocabulary};

/// Where an assumption comes from: a lexical word or a hypothesis marker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Word(String),
    Hyp(u32),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Word(w) => f.write_str(w),
            Origin::Hyp(h) => write!(f, "?{h}"),
        }
    }
}

/// A multiset with exact union/removal semantics (no copying, no discarding).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Multiset<T: Ord>(BTreeMap<T, usize>);

impl<T: Ord + Clone> Multiset<T> {
    pub fn new() -> Self {
        Multiset(BTreeMap::new())
    }

    pub fn insert(&mut self, item: T) {
        *self.0.entry(item).or_insert(0) += 1;
    }

    /// Remove one occurrence; false if absent.
    pub fn remove_one(&mut self, item: &T) -> bool {
        match self.0.get_mut(item) {
            Some(n) if *n > 1 => {
                *n -= 1;
                true
            }
            Some(_) => {
                self.0.remove(item);
                true
            }
            None => false,
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (item, n) in &other.0 {
            *out.0.entry(item.clone()).or_insert(0) += n;
        }
        out
    }

    pub fn count(&self, item: &T) -> usize {
        self.0.get(item).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Iterate entries, repeating each item by its multiplicity.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.0
            .iter()
            .flat_map(|(item, n)| std::iter::repeat(item).take(*n))
    }
}

impl<T: Ord + Clone> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut ms = Multiset::new();
        for item in iter {
            ms.insert(item);
        }
        ms
    }
}

pub type Antecedent = Multiset<(Origin, Type)>;
/// Lexical type assignments for one sentence, as a multiset.
pub type Lexicon = Multiset<(String, Type)>;

/// Judgement `Γ ⊢ B`: from the multiset of assumptions `Γ`, conclusion `B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgement {
    pub antecedent: Antecedent,
    pub succedent: Type,
}

impl Judgement {
    pub fn new(antecedent: Antecedent, succedent: Type) -> Self {
        Judgement {
            antecedent,
            succedent,
        }
    }
}

/// Inference rules: lexical leaves, hypothesis leaves, implication
/// elimination/introduction, and variadic star elimination (the conjunction
/// step drawn as an n-ary inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Lex,
    Id,
    Elim,
    Intro,
    ElimStar,
}

impl Rule {
    pub fn tag(self) -> &'static str {
        match self {
            Rule::Lex => "lex",
            Rule::Id => "id",
            Rule::Elim => "elim",
            Rule::Intro => "intro",
            Rule::ElimStar => "elim*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub rule: Rule,
    pub judgement: Judgement,
    pub premises: Vec<Proof>,
    /// Hypothesis discharged by an `Intro` node.
    pub discharged: Option<u32>,
}

impl Proof {
    pub fn node_count(&self) -> usize {
        1 + self.premises.iter().map(Proof::node_count).sum::<usize>()
    }

    pub fn count_rule(&self, rule: Rule) -> usize {
        usize::from(self.rule == rule)
            + self
                .premises
                .iter()
                .map(|p| p.count_rule(rule))
                .sum::<usize>()
    }
}

/// Outcome of [`check_proof`]: valid, or the first failing node (by its
/// child-index path from the root) with a reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofReport {
    pub valid: bool,
    pub failure: Option<ProofFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofFailure {
    pub path: Vec<usize>,
    pub message: String,
}

impl fmt::Display for ProofReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => f.write_str("valid"),
            Some(fail) => {
                let path = if fail.path.is_empty() {
                    "root".to_string()
                } else {
                    format!(
                        "root.{}",
                        fail.path
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join(".")
                    )
                };
                write!(f, "invalid at {path}: {}", fail.message)
            }
        }
    }
}

/// Check that every node instantiates its rule, that hypothesis markers are
/// unique and fully discharged, and that the root consumes exactly the
/// supplied lexicon (linearity: no copying, no discarding).
pub fn check_proof(proof: &Proof, lexicon: &Lexicon) -> ProofReport {
    let mut seen_hyps = BTreeSet::new();
    let mut path = Vec::new();
    if let Some(failure) = check_node(proof, lexicon, &mut seen_hyps, &mut path) {
        return ProofReport {
            valid: false,
            failure: Some(failure),
        };
    }
    let root_words: Lexicon = proof
        .judgement
        .antecedent
        .iter()
        .filter_map(|(origin, ty)| match origin {
            Origin::Word(w) => Some((w.clone(), ty.clone())),
            Origin::Hyp(_) => None,
        })
        .collect();
    if proof
        .judgement
        .antecedent
        .iter()
        .any(|(o, _)| matches!(o, Origin::Hyp(_)))
    {
        return ProofReport {
            valid: false,
            failure: Some(ProofFailure {
                path: vec![],
                message: "undischarged hypothesis at the root".into(),
            }),
        };
    }
    if &root_words != lexicon {
        return ProofReport {
            valid: false,
            failure: Some(ProofFailure {
                path: vec![],
                message: "root antecedent does not match the lexicon".into(),
            }),
        };
    }
    ProofReport {
        valid: true,
        failure: None,
    }
}

fn fail(path: &[usize], message: impl Into<String>) -> Option<ProofFailure> {
    Some(ProofFailure {
        path: path.to_vec(),
        message: message.into(),
    })
}

fn check_node(
    proof: &Proof,
    lexicon: &Lexicon,
    seen_hyps: &mut BTreeSet<u32>,
    path: &mut Vec<usize>,
) -> Option<ProofFailure> {
    // children first: the report pinpoints the deepest failure
    for (i, premise) in proof.premises.iter().enumerate() {
        path.push(i);
        if let Some(f) = check_node(premise, lexicon, seen_hyps, path) {
            path.pop();
            return Some(f);
        }
        path.pop();
    }
    let j = &proof.judgement;
    match proof.rule {
        Rule::Lex => {
            if !proof.premises.is_empty() {
                return fail(path, "lexical leaves take no premises");
            }
            if j.antecedent.len() != 1 {
                return fail(path, "lexical leaf must hold exactly one assumption");
            }
            let (origin, ty) = j.antecedent.iter().next().unwrap();
            let word = match origin {
                Origin::Word(w) => w.clone(),
                Origin::Hyp(_) => return fail(path, "lexical leaf over a hypothesis"),
            };
            if ty != &j.succedent {
                return fail(path, "lexical leaf concludes a different type");
            }
            if lexicon.count(&(word.clone(), ty.clone())) == 0 {
                return fail(path, format!("`{word}` lacks this lexicon entry"));
            }
            None
        }
        Rule::Id => {
            if !proof.premises.is_empty() {
                return fail(path, "id leaves take no premises");
            }
            if j.antecedent.len() != 1 {
                return fail(path, "id leaf must hold exactly one hypothesis");
            }
            let (origin, ty) = j.antecedent.iter().next().unwrap();
            let hyp = match origin {
                Origin::Hyp(h) => *h,
                Origin::Word(_) => return fail(path, "id leaf over a word"),
            };
            if !seen_hyps.insert(hyp) {
                return fail(path, format!("hypothesis ?{hyp} introduced twice"));
            }
            if ty != &j.succedent {
                return fail(path, "id leaf concludes a different type");
            }
            None
        }
        Rule::Elim => {
            if proof.premises.len() != 2 {
                return fail(path, "elimination takes exactly two premises");
            }
            let functor = &proof.premises[0].judgement;
            let argument = &proof.premises[1].judgement;
            let (arg, result) = match &functor.succedent {
                Type::Arrow { arg, result, .. } if !arg.is_star_atom() => (arg, result),
                Type::Arrow { .. } => {
                    return fail(path, "star arguments are consumed by elim*, not elim")
                }
                Type::Atom(_) => return fail(path, "functor premise is not an implication"),
            };
            if &argument.succedent != arg.as_ref() {
                return fail(path, "argument premise does not match the functor argument");
            }
            if &j.succedent != result.as_ref() {
                return fail(path, "conclusion does not match the functor result");
            }
            if j.antecedent != functor.antecedent.union(&argument.antecedent) {
                return fail(path, "antecedent is not the exact premise union");
            }
            None
        }
        Rule::Intro => {
            if proof.premises.len() != 1 {
                return fail(path, "introduction takes exactly one premise");
            }
            let hyp = match proof.discharged {
                Some(h) => h,
                None => return fail(path, "introduction names no hypothesis"),
            };
            let premise = &proof.premises[0].judgement;
            let (arg, result) = match &j.succedent {
                Type::Arrow { arg, result, .. } if !arg.is_star_atom() => (arg, result),
                _ => return fail(path, "introduction must conclude an implication"),
            };
            if &premise.succedent != result.as_ref() {
                return fail(path, "premise does not prove the implication result");
            }
            let key = (Origin::Hyp(hyp), arg.as_ref().clone());
            let mut expected = premise.antecedent.clone();
            if !expected.remove_one(&key) {
                return fail(
                    path,
                    format!("premise does not hold hypothesis ?{hyp} of the argument type"),
                );
            }
            if j.antecedent != expected {
                return fail(path, "antecedent must drop exactly the discharged hypothesis");
            }
            None
        }
        Rule::ElimStar => {
            if proof.premises.len() < 3 {
                return fail(path, "star elimination takes a functor and at least two arguments");
            }
            let functor = &proof.premises[0].judgement;
            let (star_arg, result) = match &functor.succedent {
                Type::Arrow { arg, result, .. } if arg.is_star_atom() => (arg, result),
                _ => return fail(path, "functor premise lacks a star argument"),
            };
            let base = Type::Atom(star_arg.star_base().unwrap().to_string());
            let mut ant = functor.antecedent.clone();
            for premise in &proof.premises[1..] {
                if premise.judgement.succedent != base {
                    return fail(path, "star premise does not prove the base atom");
                }
                ant = ant.union(&premise.judgement.antecedent);
            }
            if &j.succedent != result.as_ref() {
                return fail(path, "conclusion does not match the functor result");
            }
            if j.antecedent != ant {
                return fail(path, "antecedent is not the exact premise union");
            }
            None
        }
    }
}

/// Conservative necessary condition for derivability: counting atoms by
/// polarity, every atom must balance exactly. Atoms touched by a star
/// argument are exempt (a star consumes a variable number of copies).
pub fn atom_balance_ok(lexicon: &[(String, Type)], goal: &Type) -> bool {
    let mut balance: BTreeMap<String, i64> = BTreeMap::new();
    let mut starred: BTreeSet<String> = BTreeSet::new();
    for (_, ty) in lexicon {
        collect_polarity(ty, 1, &mut balance, &mut starred);
    }
    collect_polarity(goal, -1, &mut balance, &mut starred);
    balance
        .iter()
        .all(|(atom, n)| *n == 0 || starred.contains(atom))
}

fn collect_polarity(
    ty: &Type,
    sign: i64,
    balance: &mut BTreeMap<String, i64>,
    starred: &mut BTreeSet<String>,
) {
    match ty {
        Type::Atom(name) => {
            if let Some(base) = name.strip_suffix('*') {
                starred.insert(base.to_string());
                starred.insert(name.clone());
            }
            *balance.entry(name.clone()).or_insert(0) += sign;
        }
        Type::Arrow { arg, result, .. } => {
            collect_polarity(arg, -sign, balance, starred);
            collect_polarity(result, sign, balance, starred);
        }
    }
}

/// Result of [`derive`]. `BudgetExhausted` means the search space was
/// truncated by the node budget, so nothing can be said about derivability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeriveOutcome {
    Proved(Proof),
    NotDerivable,
    BudgetExhausted,
}

impl DeriveOutcome {
    pub fn proof(&self) -> Option<&Proof> {
        match self {
            DeriveOutcome::Proved(p) => Some(p),
            _ => None,
        }
    }
}

/// Backward-chaining exhaustive search over elimination/introduction/star
/// elimination. Any returned proof passes [`check_proof`] against the given
/// lexicon and consumes it exactly. `budget` bounds the candidate proof's
/// node count.
pub fn derive(lexicon: &[(String, Type)], goal: &Type, budget: usize) -> DeriveOutcome {
    if !atom_balance_ok(lexicon, goal) {
        return DeriveOutcome::NotDerivable;
    }
    derive_full_search(lexicon, goal, budget)
}

/// [`derive`] without the atom-balance fast path; used to validate that the
/// fast path agrees with full search.
pub fn derive_full_search(lexicon: &[(String, Type)], goal: &Type, budget: usize) -> DeriveOutcome {
    assert!(budget >= 1, "budget must be at least 1");
    let items: Vec<(Origin, Type)> = lexicon
        .iter()
        .map(|(w, t)| (Origin::Word(w.clone()), t.clone()))
        .collect();
    assert!(
        items.len() <= 48,
        "search is bounded to 48 assumptions"
    );
    let mut searcher = Searcher {
        items,
        truncated: false,
        next_hyp: 0,
    };
    let avail = (1u64 << searcher.items.len()) - 1;
    match searcher.prove(goal, avail, budget) {
        Some(proof) => DeriveOutcome::Proved(proof),
        None if searcher.truncated => DeriveOutcome::BudgetExhausted,
        None => DeriveOutcome::NotDerivable,
    }
}

struct Searcher {
    items: Vec<(Origin, Type)>,
    truncated: bool,
    next_hyp: u32,
}

/// Argument slots along a functor's result spine.
struct SpineArg {
    arg: Type,
    star: bool,
}

fn spine(mut ty: &Type) -> (Vec<SpineArg>, &Type) {
    let mut args = Vec::new();
    while let Type::Arrow { arg, result, .. } = ty {
        args.push(SpineArg {
            arg: arg.as_ref().clone(),
            star: arg.is_star_atom(),
        });
        ty = result;
    }
    (args, ty)
}

/// Rebuild the spine's intermediate result types for judgement construction.
fn spine_results(mut ty: &Type) -> Vec<Type> {
    let mut out = Vec::new();
    while let Type::Arrow { result, .. } = ty {
        out.push(result.as_ref().clone());
        ty = result;
    }
    out
}

impl Searcher {
    /// Find a proof of `goal` consuming exactly the items in `avail`,
    /// with at most `nodes_left` proof nodes.
    fn prove(&mut self, goal: &Type, avail: u64, nodes_left: usize) -> Option<Proof> {
        if nodes_left == 0 {
            self.truncated = true;
            return None;
        }
        if !self.balanced(avail, goal) {
            return None;
        }
        match goal {
            Type::Arrow { arg, .. } if arg.is_star_atom() => {
                // cannot hypothesize a star atom: only a direct leaf applies
                self.leaf_match(goal, avail)
            }
            Type::Arrow { arg, result, .. } => {
                // a lone matching assumption needs no eta-expansion
                if let Some(leaf) = self.leaf_match(goal, avail) {
                    return Some(leaf);
                }
                // introduction is invertible: hypothesize the argument
                let hyp = self.next_hyp;
                self.next_hyp += 1;
                self.items.push((Origin::Hyp(hyp), arg.as_ref().clone()));
                let bit = 1u64 << (self.items.len() - 1);
                let inner = self.prove(result, avail | bit, nodes_left - 1);
                self.items.pop();
                self.next_hyp -= 1;
                let inner = inner?;
                let key = (Origin::Hyp(hyp), arg.as_ref().clone());
                let mut ant = inner.judgement.antecedent.clone();
                if !ant.remove_one(&key) {
                    // the hypothesis went unused: not linear
                    return None;
                }
                Some(Proof {
                    rule: Rule::Intro,
                    judgement: Judgement::new(ant, goal.clone()),
                    premises: vec![inner],
                    discharged: Some(hyp),
                })
            }
            Type::Atom(_) => self.prove_atomic(goal, avail, nodes_left),
        }
    }

    /// Atom balance is a sound necessary condition per judgement, so it can
    /// prune branches without compromising NotDerivable answers.
    fn balanced(&self, avail: u64, goal: &Type) -> bool {
        let mut balance = BTreeMap::new();
        let mut starred = BTreeSet::new();
        let mut mask = avail;
        while mask != 0 {
            let idx = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            collect_polarity(&self.items[idx].1, 1, &mut balance, &mut starred);
        }
        collect_polarity(goal, -1, &mut balance, &mut starred);
        balance
            .iter()
            .all(|(atom, n)| *n == 0 || starred.contains(atom))
    }

    fn leaf_match(&mut self, goal: &Type, avail: u64) -> Option<Proof> {
        if avail.count_ones() != 1 {
            return None;
        }
        let idx = avail.trailing_zeros() as usize;
        let (origin, ty) = &self.items[idx];
        if ty != goal {
            return None;
        }
        let rule = match origin {
            Origin::Word(_) => Rule::Lex,
            Origin::Hyp(_) => Rule::Id,
        };
        let ant: Antecedent = [(origin.clone(), ty.clone())].into_iter().collect();
        Some(Proof {
            rule,
            judgement: Judgement::new(ant, goal.clone()),
            premises: Vec::new(),
            discharged: None,
        })
    }

    fn prove_atomic(&mut self, goal: &Type, avail: u64, nodes_left: usize) -> Option<Proof> {
        if let Some(leaf) = self.leaf_match(goal, avail) {
            return Some(leaf);
        }
        // focus on each available functor whose spine ends in the goal atom
        let mut mask = avail;
        while mask != 0 {
            let idx = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            let ty = self.items[idx].1.clone();
            let (args, head_atom) = spine(&ty);
            if args.is_empty() || head_atom != goal {
                continue;
            }
            let origin = self.items[idx].0.clone();
            let head_rule = match origin {
                Origin::Word(_) => Rule::Lex,
                Origin::Hyp(_) => Rule::Id,
            };
            let head = Proof {
                rule: head_rule,
                judgement: Judgement::new(
                    [(origin, ty.clone())].into_iter().collect(),
                    ty.clone(),
                ),
                premises: Vec::new(),
                discharged: None,
            };
            let results = spine_results(&ty);
            let remaining = avail & !(1u64 << idx);
            if let Some(proof) =
                self.apply_spine(head, &args, &results, remaining, nodes_left.saturating_sub(1))
            {
                return Some(proof);
            }
        }
        None
    }

    /// Consume the spine arguments in order, splitting `avail` among them.
    /// Everything in `avail` must be consumed by the end of the spine.
    fn apply_spine(
        &mut self,
        functor: Proof,
        args: &[SpineArg],
        results: &[Type],
        avail: u64,
        nodes_left: usize,
    ) -> Option<Proof> {
        let Some(slot) = args.first() else {
            return if avail == 0 { Some(functor) } else { None };
        };
        if nodes_left == 0 {
            self.truncated = true;
            return None;
        }
        if slot.star {
            let base = Type::Atom(slot.arg.star_base().unwrap().to_string());
            let mut premises = Vec::new();
            self.star_premises(functor, &base, args, results, avail, 0, &mut premises, nodes_left)
        } else {
            // try every sub-multiset for the argument premise
            let mut sub = avail;
            loop {
                if let Some(arg_proof) = self.prove(&slot.arg, sub, nodes_left - 1) {
                    let spent = arg_proof.node_count();
                    if spent < nodes_left {
                        let judgement = Judgement::new(
                            functor
                                .judgement
                                .antecedent
                                .union(&arg_proof.judgement.antecedent),
                            results[0].clone(),
                        );
                        let node = Proof {
                            rule: Rule::Elim,
                            judgement,
                            premises: vec![functor.clone(), arg_proof],
                            discharged: None,
                        };
                        if let Some(proof) = self.apply_spine(
                            node,
                            &args[1..],
                            &results[1..],
                            avail & !sub,
                            nodes_left - 1 - spent,
                        ) {
                            return Some(proof);
                        }
                    } else {
                        self.truncated = true;
                    }
                }
                if sub == 0 {
                    return None;
                }
                sub = (sub - 1) & avail;
            }
        }
    }

    /// Collect `k >= 2` premises proving the base atom, each from a disjoint
    /// sub-multiset, then close with one star-elimination node. Premises are
    /// ordered by their lowest item index to avoid permuted duplicates.
    #[allow(clippy::too_many_arguments)]
    fn star_premises(
        &mut self,
        functor: Proof,
        base: &Type,
        args: &[SpineArg],
        results: &[Type],
        avail: u64,
        min_bit: u64,
        premises: &mut Vec<Proof>,
        nodes_left: usize,
    ) -> Option<Proof> {
        // close the star once at least two premises are collected
        if premises.len() >= 2 {
            let mut ant = functor.judgement.antecedent.clone();
            for p in premises.iter() {
                ant = ant.union(&p.judgement.antecedent);
            }
            let node = Proof {
                rule: Rule::ElimStar,
                judgement: Judgement::new(ant, results[0].clone()),
                premises: std::iter::once(functor.clone())
                    .chain(premises.iter().cloned())
                    .collect(),
                discharged: None,
            };
            let spent: usize = premises.iter().map(Proof::node_count).sum();
            if spent + 1 <= nodes_left {
                if let Some(proof) = self.apply_spine(
                    node,
                    &args[1..],
                    &results[1..],
                    avail,
                    nodes_left - 1 - spent,
                ) {
                    return Some(proof);
                }
            } else {
                self.truncated = true;
            }
        }
        // or extend with one more premise drawn from `avail`
        let mut sub = avail;
        loop {
            if sub != 0 {
                let low = sub & sub.wrapping_neg();
                if low > min_bit {
                    if let Some(premise) = self.prove(base, sub, nodes_left.saturating_sub(2)) {
                        premises.push(premise);
                        if let Some(proof) = self.star_premises(
                            functor.clone(),
                            base,
                            args,
                            results,
                            avail & !sub,
                            low,
                            premises,
                            nodes_left,
                        ) {
                            return Some(proof);
                        }
                        premises.pop();
                    }
                }
            }
            if sub == 0 {
                return None;
            }
            sub = (sub - 1) & avail;
        }
    }
}

const PROOF_HEADER: &str = "tlgtag proof v1";

/// Render a proof in the nested block fixture format.
pub fn render_proof(proof: &Proof) -> String {
    let mut out = String::from(PROOF_HEADER);
    out.push('\n');
    render_node(proof, 0, &mut out);
    out.push('\n');
    out
}

fn render_judgement(j: &Judgement) -> String {
    let entries: Vec<String> = j
        .antecedent
        .iter()
        .map(|(origin, ty)| format!("{origin}:{}", render_infix(ty)))
        .collect();
    format!("[{} |- {}]", entries.join(", "), render_infix(&j.succedent))
}

fn render_node(p: &Proof, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    out.push_str(&pad);
    out.push('(');
    out.push_str(p.rule.tag());
    if let Some(h) = p.discharged {
        out.push_str(&format!(" ?{h}"));
    }
    out.push(' ');
    out.push_str(&render_judgement(&p.judgement));
    for premise in &p.premises {
        out.push('\n');
        render_node(premise, indent + 1, out);
    }
    out.push(')');
}

#[derive(Debug, Error)]
pub enum ProofTextError {
    #[error("missing `{PROOF_HEADER}` header")]
    MissingHeader,
    #[error("byte {0}: {1}")]
    Syntax(usize, String),
    #[error("byte {0}: {1}")]
    BadType(usize, ParseInfixError),
}

/// Parse the proof fixture format produced by [`render_proof`].
pub fn parse_proof(text: &str, vocab: &Vocabulary) -> Result<Proof, ProofTextError> {
    let rest = text.strip_prefix(PROOF_HEADER).ok_or(ProofTextError::MissingHeader)?;
    let mut p = ProofParser {
        text: rest,
        pos: 0,
        vocab,
    };
    let proof = p.parse_node()?;
    p.skip_ws();
    if p.pos < p.text.len() {
        return Err(ProofTextError::Syntax(p.pos, "trailing input".into()));
    }
    Ok(proof)
}

struct ProofParser<'a> {
    text: &'a str,
    pos: usize,
    vocab: &'a Vocabulary,
}

impl<'a> ProofParser<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let t = self.rest().trim_start();
        self.pos = self.text.len() - t.len();
    }

    fn expect(&mut self, s: &str) -> Result<(), ProofTextError> {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            Ok(())
        } else {
            Err(ProofTextError::Syntax(self.pos, format!("expected `{s}`")))
        }
    }

    fn parse_node(&mut self) -> Result<Proof, ProofTextError> {
        self.expect("(")?;
        self.skip_ws();
        let tag_end = self
            .rest()
            .find(|c: char| c.is_whitespace() || c == '[')
            .unwrap_or(self.rest().len());
        let tag = &self.rest()[..tag_end];
        let rule = match tag {
            "lex" => Rule::Lex,
            "id" => Rule::Id,
            "elim" => Rule::Elim,
            "intro" => Rule::Intro,
            "elim*" => Rule::ElimStar,
            other => {
                return Err(ProofTextError::Syntax(
                    self.pos,
                    format!("unknown rule tag `{other}`"),
                ))
            }
        };
        self.pos += tag_end;
        let mut discharged = None;
        self.skip_ws();
        if rule == Rule::Intro {
            self.expect("?")?;
            discharged = Some(self.parse_number()?);
        }
        let judgement = self.parse_judgement()?;
        let mut premises = Vec::new();
        loop {
            self.skip_ws();
            if self.rest().starts_with(')') {
                self.pos += 1;
                break;
            }
            premises.push(self.parse_node()?);
        }
        Ok(Proof {
            rule,
            judgement,
            premises,
            discharged,
        })
    }

    fn parse_number(&mut self) -> Result<u32, ProofTextError> {
        let rest = self.rest();
        let end = rest
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len());
        if end == 0 {
            return Err(ProofTextError::Syntax(self.pos, "expected a number".into()));
        }
        let n = rest[..end]
            .parse()
            .map_err(|_| ProofTextError::Syntax(self.pos, "bad number".into()))?;
        self.pos += end;
        Ok(n)
    }

    fn parse_judgement(&mut self) -> Result<Judgement, ProofTextError> {
        self.expect("[")?;
        let body_start = self.pos;
        let rest = self.rest();
        let close = rest
            .find(']')
            .ok_or_else(|| ProofTextError::Syntax(self.pos, "unterminated judgement".into()))?;
        let body = &rest[..close];
        self.pos += close + 1;
        let (ant_text, succ_text) = body
            .split_once("|-")
            .ok_or_else(|| ProofTextError::Syntax(body_start, "judgement lacks `|-`".into()))?;
        let mut antecedent = Antecedent::new();
        for entry in split_top_level(ant_text) {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (origin_text, ty_text) = entry.split_once(':').ok_or_else(|| {
                ProofTextError::Syntax(body_start, format!("entry `{entry}` lacks `:`"))
            })?;
            let origin_text = origin_text.trim();
            let origin = if let Some(h) = origin_text.strip_prefix('?') {
                Origin::Hyp(h.parse().map_err(|_| {
                    ProofTextError::Syntax(body_start, format!("bad hypothesis `{origin_text}`"))
                })?)
            } else {
                Origin::Word(origin_text.to_string())
            };
            let ty = parse_infix(ty_text.trim(), self.vocab)
                .map_err(|e| ProofTextError::BadType(body_start, e))?;
            antecedent.insert((origin, ty));
        }
        let succedent = parse_infix(succ_text.trim(), self.vocab)
            .map_err(|e| ProofTextError::BadType(body_start, e))?;
        Ok(Judgement::new(antecedent, succedent))
    }
}

/// Split on commas at parenthesis depth zero.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::figures;

    #[test]
    fn transitive_derivation_checks() {
        let (lexicon, proof, _) = figures::fig_1a();
        let report = check_proof(&proof, &lexicon.iter().cloned().collect());
        assert!(report.valid, "{report}");
        assert_eq!(proof.count_rule(Rule::Elim), 3);
        assert_eq!(proof.count_rule(Rule::Intro), 0);
    }

    #[test]
    fn object_relativisation_checks() {
        let (lexicon, proof, _) = figures::fig_1b();
        let report = check_proof(&proof, &lexicon.iter().cloned().collect());
        assert!(report.valid, "{report}");
        assert_eq!(proof.count_rule(Rule::Elim), 4);
        assert_eq!(proof.count_rule(Rule::Intro), 1);
        assert_eq!(proof.count_rule(Rule::Id), 1);
    }

    #[test]
    fn adjective_conjunction_checks() {
        let (lexicon, proof, _) = figures::fig_1c();
        let report = check_proof(&proof, &lexicon.iter().cloned().collect());
        assert!(report.valid, "{report}");
        assert_eq!(proof.count_rule(Rule::Elim), 2);
        assert_eq!(proof.count_rule(Rule::ElimStar), 1);
    }

    #[test]
    fn swapped_arguments_fail_at_the_elim_node() {
        let (lexicon, proof, _) = figures::fig_1a_swapped();
        let report = check_proof(&proof, &lexicon.iter().cloned().collect());
        assert!(!report.valid);
        let failure = report.failure.unwrap();
        assert_eq!(failure.path, vec![0]);
    }

    #[test]
    fn bad_discharge_fails_at_the_intro_node() {
        let (lexicon, proof, _) = figures::fig_1b_bad_discharge();
        let report = check_proof(&proof, &lexicon.iter().cloned().collect());
        assert!(!report.valid);
        assert_eq!(report.failure.unwrap().path, vec![1]);
    }

    #[test]
    fn single_conjunct_fails_at_the_star_node() {
        let (lexicon, proof, _) = figures::fig_1c_single_conjunct();
        let report = check_proof(&proof, &lexicon.iter().cloned().collect());
        assert!(!report.valid);
        assert_eq!(report.failure.unwrap().path, vec![1, 0]);
    }

    #[test]
    fn derive_refinds_the_figures() {
        for (lexicon, _, goal) in [figures::fig_1a(), figures::fig_1b(), figures::fig_1c()] {
            let outcome = derive(&lexicon, &goal, 64);
            let proof = outcome.proof().expect("derivable within budget");
            let report = check_proof(proof, &lexicon.iter().cloned().collect());
            assert!(report.valid, "{report}");
        }
    }

    #[test]
    fn underivable_without_a_functor() {
        let lexicon = vec![
            ("w1".to_string(), Type::atom("pron")),
            ("w2".to_string(), Type::atom("np")),
        ];
        assert_eq!(
            derive(&lexicon, &Type::atom("s_main"), 64),
            DeriveOutcome::NotDerivable
        );
        assert_eq!(
            derive_full_search(&lexicon, &Type::atom("s_main"), 64),
            DeriveOutcome::NotDerivable
        );
    }

    #[test]
    fn balance_oracle_rejects_unbalanced() {
        let lexicon = vec![("w1".to_string(), Type::atom("np"))];
        assert!(!atom_balance_ok(&lexicon, &Type::atom("s_main")));
        let (lex_a, _, goal_a) = figures::fig_1a();
        assert!(atom_balance_ok(&lex_a, &goal_a));
    }

    #[test]
    fn tiny_budget_reports_exhaustion() {
        let (lexicon, _, goal) = figures::fig_1b();
        assert_eq!(derive(&lexicon, &goal, 3), DeriveOutcome::BudgetExhausted);
    }

    #[test]
    fn proof_text_round_trip() {
        for (_, proof, _) in [figures::fig_1a(), figures::fig_1b(), figures::fig_1c()] {
            let text = render_proof(&proof);
            let parsed = parse_proof(&text, &figures::vocabulary()).unwrap();
            assert_eq!(parsed, proof);
        }
    }

    #[test]
    fn multiset_union_and_removal() {
        let mut a: Multiset<i32> = [1, 1, 2].into_iter().collect();
        let b: Multiset<i32> = [2, 3].into_iter().collect();
        let u = a.union(&b);
        assert_eq!(u.count(&1), 2);
        assert_eq!(u.count(&2), 2);
        assert_eq!(u.len(), 5);
        assert!(a.remove_one(&1));
        assert_eq!(a.count(&1), 1);
        assert!(!a.remove_one(&5));
    }
}
