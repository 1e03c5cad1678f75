//! Shared fixtures and random generators for tests, benches, and the
//! acceptance suite. Not part of the stable API.

use rand::Rng;

use crate::types::{Type, Vocabulary};

/// Draw a random star-free type of depth at most `max_depth`.
pub fn random_type<R: Rng>(
    rng: &mut R,
    atoms: &[&str],
    labels: &[&str],
    max_depth: usize,
) -> Type {
    if max_depth == 0 || rng.gen_bool(0.4) {
        Type::atom(atoms[rng.gen_range(0..atoms.len())])
    } else {
        let label = labels[rng.gen_range(0..labels.len())];
        let arg = random_type(rng, atoms, labels, max_depth - 1);
        let result = random_type(rng, atoms, labels, max_depth - 1);
        Type::arrow(label, arg, result)
    }
}

/// Draw a random sentence-sized assignment (1..=max_len types).
pub fn random_assignment<R: Rng>(
    rng: &mut R,
    atoms: &[&str],
    labels: &[&str],
    max_depth: usize,
    max_len: usize,
) -> Vec<Type> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| random_type(rng, atoms, labels, max_depth))
        .collect()
}

/// The derivations of the paper's three example phrases, as hand-built
/// fixtures: (lexicon, proof-as-drawn, goal).
pub mod figures {
    use crate::deduction::{Antecedent, Judgement, Origin, Proof, Rule};
    use crate::types::{Type, Vocabulary};

    pub fn vocabulary() -> Vocabulary {
        Vocabulary::new(
            ["np", "n", "s_main", "sv1", "whq", "pron", "adj", "adj*"],
            ["su", "obj", "obj1", "det", "mod", "cnj", "body"],
        )
        .unwrap()
    }

    fn lex(word: &str, ty: Type) -> Proof {
        let ant: Antecedent = [(Origin::Word(word.to_string()), ty.clone())]
            .into_iter()
            .collect();
        Proof {
            rule: Rule::Lex,
            judgement: Judgement::new(ant, ty),
            premises: Vec::new(),
            discharged: None,
        }
    }

    fn id_leaf(hyp: u32, ty: Type) -> Proof {
        let ant: Antecedent = [(Origin::Hyp(hyp), ty.clone())].into_iter().collect();
        Proof {
            rule: Rule::Id,
            judgement: Judgement::new(ant, ty),
            premises: Vec::new(),
            discharged: None,
        }
    }

    fn elim(functor: Proof, argument: Proof) -> Proof {
        let result = match &functor.judgement.succedent {
            Type::Arrow { result, .. } => result.as_ref().clone(),
            Type::Atom(_) => panic!("functor fixture must be an implication"),
        };
        let ant = functor
            .judgement
            .antecedent
            .union(&argument.judgement.antecedent);
        Proof {
            rule: Rule::Elim,
            judgement: Judgement::new(ant, result),
            premises: vec![functor, argument],
            discharged: None,
        }
    }

    fn elim_star(functor: Proof, arguments: Vec<Proof>) -> Proof {
        let result = match &functor.judgement.succedent {
            Type::Arrow { result, .. } => result.as_ref().clone(),
            Type::Atom(_) => panic!("functor fixture must be an implication"),
        };
        let mut ant = functor.judgement.antecedent.clone();
        for a in &arguments {
            ant = ant.union(&a.judgement.antecedent);
        }
        Proof {
            rule: Rule::ElimStar,
            judgement: Judgement::new(ant, result),
            premises: std::iter::once(functor).chain(arguments).collect(),
            discharged: None,
        }
    }

    fn intro(hyp: u32, label: &str, arg_ty: Type, premise: Proof) -> Proof {
        let mut ant = premise.judgement.antecedent.clone();
        assert!(ant.remove_one(&(Origin::Hyp(hyp), arg_ty.clone())));
        let succ = Type::arrow(label, arg_ty, premise.judgement.succedent.clone());
        Proof {
            rule: Rule::Intro,
            judgement: Judgement::new(ant, succ),
            premises: vec![premise],
            discharged: Some(hyp),
        }
    }

    fn geven_ty() -> Type {
        Type::arrow(
            "obj",
            Type::atom("np"),
            Type::arrow("su", Type::atom("pron"), Type::atom("s_main")),
        )
    }

    /// "we geven enkele voorbeelden": a simple transitive verb derivation.
    pub fn fig_1a() -> (Vec<(String, Type)>, Proof, Type) {
        let enkele = Type::arrow("det", Type::atom("np"), Type::atom("np"));
        let lexicon = vec![
            ("we".to_string(), Type::atom("pron")),
            ("geven".to_string(), geven_ty()),
            ("enkele".to_string(), enkele.clone()),
            ("voorbeelden".to_string(), Type::atom("np")),
        ];
        let object = elim(lex("enkele", enkele), lex("voorbeelden", Type::atom("np")));
        let vp = elim(lex("geven", geven_ty()), object);
        let root = elim(vp, lex("we", Type::atom("pron")));
        (lexicon, root, Type::atom("s_main"))
    }

    /// Fig. 1a with the verb's arguments swapped: the pronoun is fed to the
    /// object position. Fails at the inner elimination (path `[0]`).
    pub fn fig_1a_swapped() -> (Vec<(String, Type)>, Proof, Type) {
        let (lexicon, _, goal) = fig_1a();
        let enkele = Type::arrow("det", Type::atom("np"), Type::atom("np"));
        // build the broken node by hand: it claims the usual conclusion
        let broken = Proof {
            rule: Rule::Elim,
            judgement: Judgement::new(
                lex("geven", geven_ty())
                    .judgement
                    .antecedent
                    .union(&lex("we", Type::atom("pron")).judgement.antecedent),
                Type::arrow("su", Type::atom("pron"), Type::atom("s_main")),
            ),
            premises: vec![lex("geven", geven_ty()), lex("we", Type::atom("pron"))],
            discharged: None,
        };
        let object = elim(lex("enkele", enkele), lex("voorbeelden", Type::atom("np")));
        let root = Proof {
            rule: Rule::Elim,
            judgement: Judgement::new(
                broken.judgement.antecedent.union(&object.judgement.antecedent),
                Type::atom("s_main"),
            ),
            premises: vec![broken, object],
            discharged: None,
        };
        (lexicon, root, goal)
    }

    fn welke_ty() -> Type {
        Type::arrow(
            "det",
            Type::atom("n"),
            Type::arrow(
                "body",
                Type::arrow("obj", Type::atom("n"), Type::atom("sv1")),
                Type::atom("whq"),
            ),
        )
    }

    fn spelen_ty() -> Type {
        Type::arrow(
            "obj",
            Type::atom("n"),
            Type::arrow("su", Type::atom("np"), Type::atom("sv1")),
        )
    }

    /// "welke rol spelen typen": object relativisation via a second-order
    /// type; hypothetical reasoning discharges an `n` gap.
    pub fn fig_1b() -> (Vec<(String, Type)>, Proof, Type) {
        let lexicon = vec![
            ("welke".to_string(), welke_ty()),
            ("rol".to_string(), Type::atom("n")),
            ("spelen".to_string(), spelen_ty()),
            ("typen".to_string(), Type::atom("np")),
        ];
        let wh = elim(lex("welke", welke_ty()), lex("rol", Type::atom("n")));
        let verb_hyp = elim(lex("spelen", spelen_ty()), id_leaf(0, Type::atom("n")));
        let clause = elim(verb_hyp, lex("typen", Type::atom("np")));
        let body = intro(0, "obj", Type::atom("n"), clause);
        let root = elim(wh, body);
        (lexicon, root, Type::atom("whq"))
    }

    /// Fig. 1b where the introduction names a hypothesis that was never
    /// introduced. Fails at the intro node (path `[1]`).
    pub fn fig_1b_bad_discharge() -> (Vec<(String, Type)>, Proof, Type) {
        let (lexicon, mut proof, goal) = fig_1b();
        let intro_node = &mut proof.premises[1];
        assert_eq!(intro_node.rule, Rule::Intro);
        intro_node.discharged = Some(7);
        (lexicon, proof, goal)
    }

    fn en_ty() -> Type {
        Type::arrow(
            "cnj",
            Type::atom("adj*"),
            Type::arrow("mod", Type::atom("n"), Type::atom("n")),
        )
    }

    /// "een eenvoudig en degelijk idee": non-polymorphic conjunction of two
    /// adjectives forming a noun modifier.
    pub fn fig_1c() -> (Vec<(String, Type)>, Proof, Type) {
        let een = Type::arrow("det", Type::atom("n"), Type::atom("np"));
        let lexicon = vec![
            ("een".to_string(), een.clone()),
            ("eenvoudig".to_string(), Type::atom("adj")),
            ("en".to_string(), en_ty()),
            ("degelijk".to_string(), Type::atom("adj")),
            ("idee".to_string(), Type::atom("n")),
        ];
        let modifier = elim_star(
            lex("en", en_ty()),
            vec![
                lex("eenvoudig", Type::atom("adj")),
                lex("degelijk", Type::atom("adj")),
            ],
        );
        let noun = elim(modifier, lex("idee", Type::atom("n")));
        let root = elim(lex("een", een), noun);
        (lexicon, root, Type::atom("np"))
    }

    /// Fig. 1c with a single conjunct: star elimination requires k >= 2.
    /// Fails at the star node (path `[1, 0]`).
    pub fn fig_1c_single_conjunct() -> (Vec<(String, Type)>, Proof, Type) {
        let (lexicon, _, goal) = fig_1c();
        let een = Type::arrow("det", Type::atom("n"), Type::atom("np"));
        let broken_star = elim_star(lex("en", en_ty()), vec![lex("eenvoudig", Type::atom("adj"))]);
        let noun = elim(broken_star, lex("idee", Type::atom("n")));
        let root = elim(lex("een", een), noun);
        (lexicon, root, goal)
    }
}

/// Two atoms, one label: the smallest vocabulary with interesting structure,
/// used for exhaustive enumeration against brute-force oracles.
pub fn tiny_vocabulary() -> Vocabulary {
    Vocabulary::new(["a", "b"], ["x"]).unwrap()
}
