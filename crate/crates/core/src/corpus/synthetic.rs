//! Synthetic treebank generation. Samples are built top-down from
//! compositional templates (clauses, determiner phrases, adjective
//! conjunction, modifier stacking), so every (words, types) pair is
//! derivable by construction — and each one is re-validated with the proof
//! engine before it enters the bank.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Sample, Treebank};
use crate::deduction::{derive, DeriveOutcome};
use crate::types::{ObliquenessOrder, SpineDirection, Type, Vocabulary};

/// Grammar recipe: vocabularies, a word lexicon per category, and the
/// distributions governing template choice and modifier depth.
#[derive(Debug, Clone)]
pub struct Recipe {
    pub pronouns: Vec<String>,
    pub bare_nouns: Vec<String>,
    pub common_nouns: Vec<String>,
    pub determiners: Vec<String>,
    pub intrans_verbs: Vec<String>,
    pub trans_verbs: Vec<String>,
    pub adjectives: Vec<String>,
    pub conjunctions: Vec<String>,
    pub modifier_words: Vec<String>,
    pub intensifiers: Vec<String>,
    pub wh_words: Vec<String>,
    pub wh_verbs: Vec<String>,

    /// Weights for (intransitive, transitive, noun phrase, wh-question).
    pub template_weights: [f64; 4],
    /// Number of modifier phrases on a determiner phrase: weight per count.
    pub modifier_count_weights: Vec<f64>,
    /// Intensifier tower depth above a modifier: weight per depth.
    pub modifier_depth_weights: Vec<f64>,
    /// Conjunct count k = 2, 3, ...: weight per k.
    pub conjunct_count_weights: Vec<f64>,
    /// Probability that a modifier phrase is an adjective conjunction.
    pub conjunction_prob: f64,
    /// Probability that a subject is a pronoun.
    pub subject_pron_prob: f64,
    /// Probability that a noun phrase takes the determiner form.
    pub det_np_prob: f64,
    /// Proof-search node budget for self-validation.
    pub derive_budget: usize,
}

impl Default for Recipe {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        Recipe {
            pronouns: s(&["we", "ze", "ik", "jullie", "wij"]),
            bare_nouns: s(&["voorbeelden", "typen", "boeken", "mensen", "vragen", "woorden"]),
            common_nouns: s(&["rol", "idee", "toepassing", "stad", "man", "vraag", "taal"]),
            determiners: s(&["een", "de", "het", "elke", "deze"]),
            intrans_verbs: s(&["slaapt", "werkt", "lacht", "verschijnt", "groeit"]),
            trans_verbs: s(&["geven", "zien", "lezen", "kennen", "zoeken"]),
            adjectives: s(&["eenvoudig", "degelijk", "groot", "klein", "lineaire", "nieuw"]),
            conjunctions: s(&["en", "of"]),
            modifier_words: s(&["mooie", "oude", "rode", "lange"]),
            intensifiers: s(&["erg", "heel", "zeer", "uiterst", "nog"]),
            wh_words: s(&["welke"]),
            wh_verbs: s(&["spelen", "speelt"]),
            template_weights: [0.25, 0.35, 0.3, 0.1],
            modifier_count_weights: vec![0.5, 0.35, 0.15],
            modifier_depth_weights: vec![0.6, 0.3, 0.1],
            conjunct_count_weights: vec![0.8, 0.2],
            conjunction_prob: 0.35,
            subject_pron_prob: 0.4,
            det_np_prob: 0.65,
            derive_budget: 64,
        }
    }
}

impl Recipe {
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(
            ["np", "n", "s_main", "sv1", "whq", "pron", "adj", "adj*"],
            ["su", "body", "mod", "obj1", "det", "cnj"],
        )
        .expect("recipe vocabulary is well-formed")
    }

    /// A declared order consistent with every template this recipe emits.
    pub fn obliqueness(&self) -> ObliquenessOrder {
        ObliquenessOrder::new(
            [
                ("su", 0u32),
                ("body", 1),
                ("mod", 2),
                ("obj1", 3),
                ("det", 4),
                ("cnj", 5),
            ],
            SpineDirection::DescendingInward,
        )
        .expect("recipe ranks are distinct")
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let lists: [(&str, &Vec<String>); 12] = [
            ("pronouns", &self.pronouns),
            ("bare_nouns", &self.bare_nouns),
            ("common_nouns", &self.common_nouns),
            ("determiners", &self.determiners),
            ("intrans_verbs", &self.intrans_verbs),
            ("trans_verbs", &self.trans_verbs),
            ("adjectives", &self.adjectives),
            ("conjunctions", &self.conjunctions),
            ("modifier_words", &self.modifier_words),
            ("intensifiers", &self.intensifiers),
            ("wh_words", &self.wh_words),
            ("wh_verbs", &self.wh_verbs),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(CorpusError::InvalidRecipe(format!("empty word list `{name}`")));
            }
        }
        for weights in [
            &self.template_weights[..],
            &self.modifier_count_weights,
            &self.modifier_depth_weights,
            &self.conjunct_count_weights,
        ] {
            if weights.is_empty() || weights.iter().any(|w| *w < 0.0) {
                return Err(CorpusError::InvalidRecipe("bad weight vector".into()));
            }
            if weights.iter().sum::<f64>() <= 0.0 {
                return Err(CorpusError::InvalidRecipe("weights sum to zero".into()));
            }
        }
        for p in [self.conjunction_prob, self.subject_pron_prob, self.det_np_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorpusError::InvalidRecipe(format!("probability {p} out of range")));
            }
        }
        if self.derive_budget == 0 {
            return Err(CorpusError::InvalidRecipe("zero derive budget".into()));
        }
        Ok(())
    }

    fn pick<'a, R: Rng>(&self, rng: &mut R, list: &'a [String]) -> &'a str {
        &list[rng.gen_range(0..list.len())]
    }

    fn weighted<R: Rng>(&self, rng: &mut R, weights: &[f64]) -> usize {
        WeightedIndex::new(weights).expect("validated weights").sample(rng)
    }

    /// One sentence: (words, types, goal type).
    pub(crate) fn sample_sentence<R: Rng>(&self, rng: &mut R) -> (Vec<String>, Vec<Type>, Type) {
        let template = self.weighted(rng, &self.template_weights);
        let pron = rng.gen_bool(self.subject_pron_prob);
        match template {
            0 => self.intransitive(rng, pron),
            1 => self.transitive(rng, pron),
            2 => self.noun_phrase(rng, None),
            _ => self.wh_question(rng),
        }
    }

    pub(crate) fn intransitive<R: Rng>(
        &self,
        rng: &mut R,
        pron_subject: bool,
    ) -> (Vec<String>, Vec<Type>, Type) {
        let (mut words, mut types, subj_atom) = self.subject(rng, pron_subject);
        words.push(self.pick(rng, &self.intrans_verbs).to_string());
        types.push(iv(subj_atom));
        (words, types, Type::atom("s_main"))
    }

    pub(crate) fn transitive<R: Rng>(
        &self,
        rng: &mut R,
        pron_subject: bool,
    ) -> (Vec<String>, Vec<Type>, Type) {
        let (mut words, mut types, subj_atom) = self.subject(rng, pron_subject);
        words.push(self.pick(rng, &self.trans_verbs).to_string());
        types.push(tv(subj_atom));
        let (obj_words, obj_types) = self.simple_np(rng);
        words.extend(obj_words);
        types.extend(obj_types);
        (words, types, Type::atom("s_main"))
    }

    /// A determiner phrase with modifier stacking; `forced_depth` pins the
    /// intensifier tower depth of a single modifier phrase.
    pub(crate) fn noun_phrase<R: Rng>(
        &self,
        rng: &mut R,
        forced_depth: Option<usize>,
    ) -> (Vec<String>, Vec<Type>, Type) {
        let mut words = vec![self.pick(rng, &self.determiners).to_string()];
        let mut types = vec![det_ty()];
        let phrases = match forced_depth {
            Some(_) => 1,
            None => self.weighted(rng, &self.modifier_count_weights),
        };
        for _ in 0..phrases {
            let force_plain = forced_depth.is_some();
            if !force_plain && rng.gen_bool(self.conjunction_prob) {
                let k = 2 + self.weighted(rng, &self.conjunct_count_weights);
                // k conjuncts with the coordinator before the last one
                for _ in 0..k {
                    words.push(self.pick(rng, &self.adjectives).to_string());
                    types.push(Type::atom("adj"));
                }
                words.insert(words.len() - 1, self.pick(rng, &self.conjunctions).to_string());
                types.insert(types.len() - 1, conj_ty());
            } else {
                let depth = forced_depth
                    .unwrap_or_else(|| self.weighted(rng, &self.modifier_depth_weights));
                if depth == 0 {
                    words.push(self.pick(rng, &self.modifier_words).to_string());
                    types.push(tower(0));
                } else {
                    // a level-d intensifier consumes the level-(d-1) word
                    words.push(self.pick(rng, &self.intensifiers).to_string());
                    types.push(tower(depth));
                    if depth == 1 {
                        words.push(self.pick(rng, &self.modifier_words).to_string());
                    } else {
                        words.push(self.pick(rng, &self.intensifiers).to_string());
                    }
                    types.push(tower(depth - 1));
                }
            }
        }
        words.push(self.pick(rng, &self.common_nouns).to_string());
        types.push(Type::atom("n"));
        (words, types, Type::atom("np"))
    }

    pub(crate) fn wh_question<R: Rng>(&self, rng: &mut R) -> (Vec<String>, Vec<Type>, Type) {
        let words = vec![
            self.pick(rng, &self.wh_words).to_string(),
            self.pick(rng, &self.common_nouns).to_string(),
            self.pick(rng, &self.wh_verbs).to_string(),
            self.pick(rng, &self.bare_nouns).to_string(),
        ];
        let types = vec![wh_ty(), Type::atom("n"), wh_verb_ty(), Type::atom("np")];
        (words, types, Type::atom("whq"))
    }

    fn subject<R: Rng>(&self, rng: &mut R, pron: bool) -> (Vec<String>, Vec<Type>, &'static str) {
        if pron {
            (
                vec![self.pick(rng, &self.pronouns).to_string()],
                vec![Type::atom("pron")],
                "pron",
            )
        } else {
            let (words, types) = self.simple_np(rng);
            (words, types, "np")
        }
    }

    /// Bare noun or determiner + noun; no modifiers, to keep clause-level
    /// proof search small.
    fn simple_np<R: Rng>(&self, rng: &mut R) -> (Vec<String>, Vec<Type>) {
        if rng.gen_bool(self.det_np_prob) {
            (
                vec![
                    self.pick(rng, &self.determiners).to_string(),
                    self.pick(rng, &self.common_nouns).to_string(),
                ],
                vec![det_ty(), Type::atom("n")],
            )
        } else {
            (
                vec![self.pick(rng, &self.bare_nouns).to_string()],
                vec![Type::atom("np")],
            )
        }
    }
}

/// `n →mod n` at level 0; a level-k intensifier turns a level-(k-1)
/// modifier into a plain noun modifier, so the type deepens linearly while
/// the phrase stays two words long.
pub fn tower(level: usize) -> Type {
    let base = Type::arrow("mod", Type::atom("n"), Type::atom("n"));
    let mut t = base.clone();
    for _ in 0..level {
        t = Type::arrow("mod", t, base.clone());
    }
    t
}

fn iv(subj_atom: &str) -> Type {
    Type::arrow("su", Type::atom(subj_atom), Type::atom("s_main"))
}

fn tv(subj_atom: &str) -> Type {
    Type::arrow("obj1", Type::atom("np"), iv(subj_atom))
}

fn det_ty() -> Type {
    Type::arrow("det", Type::atom("n"), Type::atom("np"))
}

fn conj_ty() -> Type {
    Type::arrow("cnj", Type::atom("adj*"), tower(0))
}

fn wh_ty() -> Type {
    Type::arrow(
        "det",
        Type::atom("n"),
        Type::arrow(
            "body",
            Type::arrow("obj1", Type::atom("n"), Type::atom("sv1")),
            Type::atom("whq"),
        ),
    )
}

fn wh_verb_ty() -> Type {
    Type::arrow(
        "obj1",
        Type::atom("n"),
        Type::arrow("su", Type::atom("np"), Type::atom("sv1")),
    )
}

/// Generate `n` samples. Every sample is validated by running the proof
/// engine over its type multiset against the template's goal type.
pub fn gen_synthetic(recipe: &Recipe, seed: u64, n: usize) -> Result<Treebank, CorpusError> {
    recipe.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let (words, types, goal) = recipe.sample_sentence(&mut rng);
        let lexicon: Vec<(String, Type)> = words.iter().cloned().zip(types.iter().cloned()).collect();
        match derive(&lexicon, &goal, recipe.derive_budget) {
            DeriveOutcome::Proved(_) => {}
            other => {
                return Err(CorpusError::InvalidRecipe(format!(
                    "sample {i} ({}) failed deduction validation: {other:?}",
                    words.join(" ")
                )))
            }
        }
        samples.push(Sample::new(words, types)?);
    }
    let mut bank = Treebank::new(recipe.vocabulary(), Some(recipe.obliqueness()), samples)?;
    bank.push_meta("generator", "synthetic");
    bank.push_meta("seed", seed.to_string());
    bank.push_meta("samples", n.to_string());
    Ok(bank)
}

/// Train/val/test banks where the test split contains type shapes absent
/// from training by construction: pronoun-subject transitives and depth-2
/// intensifier towers appear only in the test split, while all of their
/// atomic ingredients are well attested in training.
pub struct GeneralizationSplit {
    pub train: Treebank,
    pub val: Treebank,
    pub test: Treebank,
}

pub fn generalization_bank(
    seed: u64,
    n_train: usize,
    n_val: usize,
    n_test: usize,
) -> Result<GeneralizationSplit, CorpusError> {
    let recipe = Recipe {
        // keep modifier towers at depths 0 and 1 in the training regime
        modifier_depth_weights: vec![0.55, 0.45],
        ..Recipe::default()
    };
    recipe.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let seen_sentence = |rng: &mut ChaCha8Rng, recipe: &Recipe, i: usize| {
        // transitives never take pronoun subjects here; intransitives do
        match i % 4 {
            0 => recipe.intransitive(rng, true),
            1 => recipe.intransitive(rng, false),
            2 => recipe.transitive(rng, false),
            _ => recipe.noun_phrase(rng, None),
        }
    };

    let build = |rng: &mut ChaCha8Rng,
                 sentences: Vec<(Vec<String>, Vec<Type>, Type)>|
     -> Result<Vec<Sample>, CorpusError> {
        let _ = rng;
        let mut out = Vec::new();
        for (i, (words, types, goal)) in sentences.into_iter().enumerate() {
            let lexicon: Vec<(String, Type)> =
                words.iter().cloned().zip(types.iter().cloned()).collect();
            match derive(&lexicon, &goal, recipe.derive_budget) {
                DeriveOutcome::Proved(_) => {}
                other => {
                    return Err(CorpusError::InvalidRecipe(format!(
                        "generalization sample {i} failed validation: {other:?}"
                    )))
                }
            }
            out.push(Sample::new(words, types)?);
        }
        Ok(out)
    };

    let train_sentences: Vec<_> = (0..n_train)
        .map(|i| seen_sentence(&mut rng, &recipe, i))
        .collect();
    let val_sentences: Vec<_> = (0..n_val)
        .map(|i| seen_sentence(&mut rng, &recipe, i + 1))
        .collect();
    let mut test_sentences = Vec::new();
    for i in 0..n_test {
        let s = match i % 3 {
            // unseen shape: pronoun-subject transitive
            0 => recipe.transitive(&mut rng, true),
            // unseen shape: depth-2 intensifier tower
            1 => recipe.noun_phrase(&mut rng, Some(2)),
            // seen shapes for the frequent bins
            _ => seen_sentence(&mut rng, &recipe, i),
        };
        test_sentences.push(s);
    }

    let train_samples = build(&mut rng, train_sentences)?;
    let val_samples = build(&mut rng, val_sentences)?;
    let test_samples = build(&mut rng, test_sentences)?;

    let mk = |samples: Vec<Sample>, role: &str| -> Result<Treebank, CorpusError> {
        let mut bank = Treebank::new(recipe.vocabulary(), Some(recipe.obliqueness()), samples)?;
        bank.push_meta("generator", "synthetic-generalization");
        bank.push_meta("seed", seed.to_string());
        bank.push_meta("role", role.to_string());
        Ok(bank)
    };
    let split = GeneralizationSplit {
        train: mk(train_samples, "train")?,
        val: mk(val_samples, "val")?,
        test: mk(test_samples, "test")?,
    };

    // the holdout must hold by construction
    let train_types = super::type_set(&split.train);
    assert!(
        !train_types.contains(&tv("pron")) && !train_types.contains(&tower(2)),
        "holdout types leaked into training"
    );
    let test_types = super::type_set(&split.test);
    assert!(
        test_types.contains(&tv("pron")) && test_types.contains(&tower(2)),
        "test split lost its unseen shapes"
    );
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{frequency_stats, split, SplitSpec};
    use crate::types::check_obliqueness;

    #[test]
    fn generated_banks_are_derivable_and_oblique_consistent() {
        let recipe = Recipe::default();
        let bank = gen_synthetic(&recipe, 11, 60).unwrap();
        assert_eq!(bank.len(), 60);
        let order = recipe.obliqueness();
        for sample in bank.samples() {
            for ty in sample.types() {
                assert!(check_obliqueness(ty, &order).unwrap(), "{ty}");
            }
        }
    }

    #[test]
    fn zero_samples_gives_an_empty_bank() {
        let bank = gen_synthetic(&Recipe::default(), 1, 0).unwrap();
        assert!(bank.is_empty());
    }

    #[test]
    fn transitive_template_mirrors_the_figure_shape() {
        let recipe = Recipe::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // pronoun subject + bare object gives the 4-word transitive shape
        let r = Recipe {
            det_np_prob: 0.0,
            ..recipe
        };
        let (words, types, goal) = r.transitive(&mut rng, true);
        assert_eq!(words.len(), 3);
        assert_eq!(types[0], Type::atom("pron"));
        assert_eq!(types[1], tv("pron"));
        assert_eq!(goal, Type::atom("s_main"));
    }

    #[test]
    fn rare_deep_towers_yield_singleton_types() {
        let recipe = Recipe {
            template_weights: [0.2, 0.2, 0.6, 0.0],
            modifier_depth_weights: vec![0.69, 0.2, 0.05, 0.03, 0.02, 0.01],
            ..Recipe::default()
        };
        let bank = gen_synthetic(&recipe, 31, 1000).unwrap();
        let (table, _) = frequency_stats(&bank);
        let singletons = table
            .sorted()
            .iter()
            .filter(|(_, c)| *c == 1)
            .count();
        assert!(singletons >= 1, "expected a count-1 type");
    }

    #[test]
    fn synthetic_bank_splits_cleanly() {
        let bank = gen_synthetic(&Recipe::default(), 5, 50).unwrap();
        let (train, val, test) = split(&bank, &SplitSpec { seed: 2, ..SplitSpec::default() }).unwrap();
        assert_eq!(train.len() + val.len() + test.len(), 50);
    }

    #[test]
    fn generalization_holdout_is_structural() {
        let s = generalization_bank(17, 40, 8, 9).unwrap();
        assert_eq!(s.train.len(), 40);
        assert_eq!(s.test.len(), 9);
        let train_types = crate::corpus::type_set(&s.train);
        assert!(train_types.contains(&tv("np")));
        assert!(train_types.contains(&iv("pron")));
        assert!(!train_types.contains(&tv("pron")));
    }
}
