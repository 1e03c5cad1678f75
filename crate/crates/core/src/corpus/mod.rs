//! Treebank data model, file I/O, splitting and filtering, frequency
//! statistics, and a synthetic treebank generator for desk-scale training
//! with guaranteed unseen test types.

mod synthetic;

pub use synthetic::{gen_synthetic, generalization_bank, GeneralizationSplit, Recipe};

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grammar::{flatten_assignment, segment_assignment, SegmentError, SymbolVocab};
use crate::types::{ObliquenessOrder, SpineDirection, Type, TypeError, Vocabulary};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("vocabulary violation: symbol `{0}`")]
    VocabularyViolation(String),
    #[error("sample has {words} words but {types} types")]
    LengthMismatch { words: usize, types: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("word `{0}` contains whitespace")]
    BadWord(String),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error("split ratios must sum to 1, got {0}")]
    BadRatios(f64),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One sentence with its per-word type assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    words: Vec<String>,
    types: Vec<Type>,
}

impl Sample {
    pub fn new(words: Vec<String>, types: Vec<Type>) -> Result<Self, CorpusError> {
        if words.is_empty() {
            return Err(CorpusError::EmptySample);
        }
        if words.len() != types.len() {
            return Err(CorpusError::LengthMismatch {
                words: words.len(),
                types: types.len(),
            });
        }
        for w in &words {
            if w.chars().any(char::is_whitespace) || w.is_empty() {
                return Err(CorpusError::BadWord(w.clone()));
            }
        }
        Ok(Sample { words, types })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn types(&self) -> &[Type] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A collection of samples with the vocabulary they are valid over and
/// free-form provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Treebank {
    vocab: Vocabulary,
    oblique: Option<ObliquenessOrder>,
    meta: Vec<(String, String)>,
    samples: Vec<Sample>,
}

impl Treebank {
    pub fn new(
        vocab: Vocabulary,
        oblique: Option<ObliquenessOrder>,
        samples: Vec<Sample>,
    ) -> Result<Self, CorpusError> {
        for sample in &samples {
            for ty in sample.types() {
                ty.validate(&vocab).map_err(|e| match e {
                    TypeError::UnknownAtom(s) | TypeError::UnknownLabel(s) => {
                        CorpusError::VocabularyViolation(s)
                    }
                    other => CorpusError::Type(other),
                })?;
            }
        }
        Ok(Treebank {
            vocab,
            oblique,
            meta: Vec::new(),
            samples,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn oblique(&self) -> Option<&ObliquenessOrder> {
        self.oblique.as_ref()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.push((key.into(), value.into()));
    }

    /// Same vocabulary and metadata, different samples.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Treebank {
        Treebank {
            vocab: self.vocab.clone(),
            oblique: self.oblique.clone(),
            meta: self.meta.clone(),
            samples,
        }
    }

    pub fn symbol_vocab(&self) -> SymbolVocab {
        SymbolVocab::from_vocabulary(self.vocab.clone())
    }
}

const TREEBANK_HEADER: &str = "tlgtag treebank v1";
const VOCAB_HEADER: &str = "tlgtag vocab v1";

/// One record per line: `words<TAB>types`, with words space-separated and
/// types in polish notation separated (and terminated) by `#`. The
/// vocabulary declaration and metadata precede the records.
pub fn save_treebank(bank: &Treebank, path: &Path) -> Result<(), CorpusError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{TREEBANK_HEADER}")?;
    for atom in bank.vocab.atoms() {
        writeln!(f, "vocab atom {atom}")?;
    }
    for label in bank.vocab.labels() {
        writeln!(f, "vocab label {label}")?;
    }
    if let Some(order) = &bank.oblique {
        writeln!(
            f,
            "vocab direction {}",
            match order.direction() {
                SpineDirection::DescendingInward => "descending",
                SpineDirection::AscendingInward => "ascending",
            }
        )?;
        for (label, rank) in order.iter() {
            writeln!(f, "vocab rank {label} {rank}")?;
        }
    }
    for (k, v) in &bank.meta {
        writeln!(f, "meta {k} {v}")?;
    }
    let symbols = bank.symbol_vocab();
    for sample in &bank.samples {
        let flat = flatten_assignment(sample.types(), &symbols);
        writeln!(f, "{}\t{}", sample.words().join(" "), flat.join(" "))?;
    }
    Ok(())
}

/// Load a treebank, validating every invariant: header, vocabulary
/// declarations, per-sample word/type alignment, and type well-formedness.
pub fn load_treebank(path: &Path) -> Result<Treebank, CorpusError> {
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, msg: String| CorpusError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == TREEBANK_HEADER => {}
        _ => return Err(perr(1, format!("expected header `{TREEBANK_HEADER}`"))),
    }
    let mut atoms = Vec::new();
    let mut labels = Vec::new();
    let mut ranks = Vec::new();
    let mut direction = SpineDirection::DescendingInward;
    let mut has_ranks = false;
    let mut meta = Vec::new();
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("vocab ") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            match fields.as_slice() {
                ["atom", name] => atoms.push(name.to_string()),
                ["label", name] => labels.push(name.to_string()),
                ["rank", label, rank] => {
                    has_ranks = true;
                    let rank: u32 = rank
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad rank `{rank}`")))?;
                    ranks.push((label.to_string(), rank));
                }
                ["direction", "descending"] => direction = SpineDirection::DescendingInward,
                ["direction", "ascending"] => direction = SpineDirection::AscendingInward,
                _ => return Err(perr(line_no, format!("bad vocab line `{rest}`"))),
            }
        } else if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.push((k.to_string(), v.to_string()));
        } else {
            let (words, types) = line
                .split_once('\t')
                .ok_or_else(|| perr(line_no, "record lacks a tab separator".into()))?;
            records.push((line_no, words.to_string(), types.to_string()));
        }
    }
    let vocab = Vocabulary::new(atoms, labels)?;
    let symbols = SymbolVocab::from_vocabulary(vocab.clone());
    let mut samples = Vec::new();
    for (line_no, words_text, types_text) in records {
        let words: Vec<String> = words_text.split_whitespace().map(String::from).collect();
        let tokens: Vec<String> = types_text.split_whitespace().map(String::from).collect();
        let mut types = Vec::new();
        for segment in segment_assignment(&tokens, &symbols) {
            match segment.parsed {
                Ok(t) => types.push(t),
                Err(SegmentError::UnknownSymbol(s)) => {
                    return Err(CorpusError::VocabularyViolation(s))
                }
                Err(e) => return Err(perr(line_no, e.to_string())),
            }
        }
        let sample = Sample::new(words, types).map_err(|e| perr(line_no, e.to_string()))?;
        samples.push(sample);
    }
    let oblique = if has_ranks {
        Some(ObliquenessOrder::new(ranks, direction)?)
    } else {
        None
    };
    let mut bank = Treebank::new(vocab, oblique, samples)?;
    bank.meta = meta;
    Ok(bank)
}

/// Standalone vocabulary declaration file: atoms, labels, and optional
/// obliqueness ranks.
pub fn save_vocab(
    vocab: &Vocabulary,
    oblique: Option<&ObliquenessOrder>,
    path: &Path,
) -> Result<(), CorpusError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{VOCAB_HEADER}")?;
    for atom in vocab.atoms() {
        writeln!(f, "atom {atom}")?;
    }
    match oblique {
        None => {
            for label in vocab.labels() {
                writeln!(f, "label {label}")?;
            }
        }
        Some(order) => {
            writeln!(
                f,
                "direction {}",
                match order.direction() {
                    SpineDirection::DescendingInward => "descending",
                    SpineDirection::AscendingInward => "ascending",
                }
            )?;
            for label in vocab.labels() {
                match order.rank(label) {
                    Some(rank) => writeln!(f, "label {label} {rank}")?,
                    None => writeln!(f, "label {label}")?,
                }
            }
        }
    }
    Ok(())
}

pub fn load_vocab(path: &Path) -> Result<(Vocabulary, Option<ObliquenessOrder>), CorpusError> {
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, msg: String| CorpusError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == VOCAB_HEADER => {}
        _ => return Err(perr(1, format!("expected header `{VOCAB_HEADER}`"))),
    }
    let mut atoms = Vec::new();
    let mut labels = Vec::new();
    let mut ranks = Vec::new();
    let mut direction = SpineDirection::DescendingInward;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            ["atom", name] => atoms.push(name.to_string()),
            ["label", name] => labels.push(name.to_string()),
            ["label", name, rank] => {
                let rank: u32 = rank
                    .parse()
                    .map_err(|_| perr(line_no, format!("bad rank `{rank}`")))?;
                labels.push(name.to_string());
                ranks.push((name.to_string(), rank));
            }
            ["direction", "descending"] => direction = SpineDirection::DescendingInward,
            ["direction", "ascending"] => direction = SpineDirection::AscendingInward,
            _ => return Err(perr(line_no, format!("bad line `{line}`"))),
        }
    }
    let vocab = Vocabulary::new(atoms, labels)?;
    let oblique = if ranks.is_empty() {
        None
    } else {
        Some(ObliquenessOrder::new(ranks, direction)?)
    };
    Ok((vocab, oblique))
}

/// Split ratios, shuffle seed, and the sentence length filter.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    pub max_len: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 0,
            max_len: 20,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadRatios(sum));
        }
        Ok(())
    }
}

/// Deterministic split: filter by length, shuffle with the seed, then cut by
/// cumulative ratios. The partition is exact: no overlap, union = filtered
/// corpus.
pub fn split(
    bank: &Treebank,
    spec: &SplitSpec,
) -> Result<(Treebank, Treebank, Treebank), CorpusError> {
    spec.validate()?;
    let mut kept: Vec<Sample> = bank
        .samples
        .iter()
        .filter(|s| s.len() <= spec.max_len)
        .cloned()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    kept.shuffle(&mut rng);
    let n = kept.len();
    let train_end = (spec.train * n as f64).floor() as usize;
    let val_end = ((spec.train + spec.val) * n as f64).floor() as usize;
    let test = kept.split_off(val_end);
    let val = kept.split_off(train_end);
    Ok((
        bank.with_samples(kept),
        bank.with_samples(val),
        bank.with_samples(test),
    ))
}

/// Per-type occurrence counts over a reference split; absent types count 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyTable {
    counts: HashMap<Type, usize>,
}

/// Training-frequency bins, with pinned half-open boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FreqBin {
    Unseen,
    /// 1..=9 occurrences.
    Low,
    /// 10..=99 occurrences.
    Mid,
    /// 100 or more occurrences.
    High,
}

impl FreqBin {
    pub const ALL: [FreqBin; 4] = [FreqBin::Unseen, FreqBin::Low, FreqBin::Mid, FreqBin::High];

    pub fn label(self) -> &'static str {
        match self {
            FreqBin::Unseen => "unseen",
            FreqBin::Low => "freq 1-9",
            FreqBin::Mid => "freq 10-99",
            FreqBin::High => "freq >=100",
        }
    }

    pub fn of_count(count: usize) -> FreqBin {
        match count {
            0 => FreqBin::Unseen,
            1..=9 => FreqBin::Low,
            10..=99 => FreqBin::Mid,
            _ => FreqBin::High,
        }
    }
}

impl FrequencyTable {
    pub fn from_samples<'a, I: IntoIterator<Item = &'a Sample>>(samples: I) -> FrequencyTable {
        let mut counts = HashMap::new();
        for sample in samples {
            for ty in sample.types() {
                *counts.entry(ty.clone()).or_insert(0) += 1;
            }
        }
        FrequencyTable { counts }
    }

    pub fn count(&self, ty: &Type) -> usize {
        self.counts.get(ty).copied().unwrap_or(0)
    }

    pub fn bin(&self, ty: &Type) -> FreqBin {
        FreqBin::of_count(self.count(ty))
    }

    pub fn unique_types(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn contains(&self, ty: &Type) -> bool {
        self.counts.contains_key(ty)
    }

    /// Types present, in a deterministic order (count descending, then by
    /// rendered text).
    pub fn sorted(&self) -> Vec<(&Type, usize)> {
        let mut entries: Vec<(&Type, usize)> = self.counts.iter().map(|(t, c)| (t, *c)).collect();
        entries.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        entries
    }
}

/// One point of the coverage curves: at threshold `k`, the fraction of
/// unique types with count < k and the fraction of sentences containing at
/// least one such type.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePoint {
    pub threshold: usize,
    pub type_fraction: f64,
    pub sentence_fraction: f64,
}

/// Per-type counts plus cumulative coverage curves, evaluated at every
/// threshold where the curves change.
pub fn frequency_stats(bank: &Treebank) -> (FrequencyTable, Vec<CoveragePoint>) {
    let table = FrequencyTable::from_samples(bank.samples());
    let mut thresholds: Vec<usize> = table.counts.values().map(|c| c + 1).collect();
    thresholds.push(1);
    thresholds.sort_unstable();
    thresholds.dedup();
    let unique = table.unique_types().max(1) as f64;
    let n_samples = bank.len().max(1) as f64;
    let curve = thresholds
        .into_iter()
        .map(|k| {
            let rare_types = table.counts.values().filter(|c| **c < k).count();
            let rare_sentences = bank
                .samples()
                .iter()
                .filter(|s| s.types().iter().any(|t| table.count(t) < k))
                .count();
            CoveragePoint {
                threshold: k,
                type_fraction: rare_types as f64 / unique,
                sentence_fraction: rare_sentences as f64 / n_samples,
            }
        })
        .collect();
    (table, curve)
}

/// The set of distinct types in a bank.
pub fn type_set(bank: &Treebank) -> HashSet<Type> {
    bank.samples()
        .iter()
        .flat_map(|s| s.types().iter().cloned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::parse_infix;

    fn small_bank() -> Treebank {
        let vocab = Vocabulary::new(["np", "n", "s_main"], ["su", "det", "mod"]).unwrap();
        let t = |s: &str| parse_infix(s, &vocab).unwrap();
        let samples = vec![
            Sample::new(
                vec!["ze".into(), "werkt".into()],
                vec![t("np"), t("(np -(su)-> s_main)")],
            )
            .unwrap(),
            Sample::new(
                vec!["de".into(), "man".into(), "werkt".into()],
                vec![t("(n -(det)-> np)"), t("n"), t("(np -(su)-> s_main)")],
            )
            .unwrap(),
        ];
        Treebank::new(vocab, None, samples).unwrap()
    }

    #[test]
    fn treebank_round_trip() {
        let bank = small_bank();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.tb");
        save_treebank(&bank, &path).unwrap();
        let loaded = load_treebank(&path).unwrap();
        assert_eq!(loaded, bank);
    }

    #[test]
    fn unknown_label_is_a_vocabulary_violation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tb");
        fs::write(
            &path,
            "tlgtag treebank v1\nvocab atom np\nvocab label su\nw1 w2\t→zzz np np # np #\n",
        )
        .unwrap();
        match load_treebank(&path) {
            Err(CorpusError::VocabularyViolation(s)) => assert_eq!(s, "→zzz"),
            other => panic!("expected VocabularyViolation, got {other:?}"),
        }
    }

    #[test]
    fn figure_sentence_loads_with_seven_types() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig.tb");
        let mut content = String::from("tlgtag treebank v1\n");
        for a in ["np", "s_main"] {
            content.push_str(&format!("vocab atom {a}\n"));
        }
        for l in ["su", "mod", "det", "obj1"] {
            content.push_str(&format!("vocab label {l}\n"));
        }
        content.push_str("is er een toepassing voor lineaire logica\t");
        content.push_str(
            "→su np s_main # →mod s_main s_main # →det np np # np # →obj1 np →mod np np # →mod np np # np #\n",
        );
        fs::write(&path, content).unwrap();
        let bank = load_treebank(&path).unwrap();
        assert_eq!(bank.len(), 1);
        assert_eq!(bank.samples()[0].words().len(), 7);
        assert_eq!(bank.samples()[0].types().len(), 7);
    }

    #[test]
    fn split_is_an_exact_partition() {
        let bank = small_bank();
        let samples: Vec<Sample> = (0..100)
            .map(|i| {
                Sample::new(
                    vec![format!("w{i}"), "werkt".into()],
                    vec![Type::atom("np"), bank.samples()[0].types()[1].clone()],
                )
                .unwrap()
            })
            .collect();
        let bank = bank.with_samples(samples);
        let spec = SplitSpec {
            seed: 7,
            ..SplitSpec::default()
        };
        let (train, val, test) = split(&bank, &spec).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));

        // determinism
        let (train2, ..) = split(&bank, &spec).unwrap();
        assert_eq!(train.samples(), train2.samples());

        // partition: no overlap, union = corpus
        let mut all: Vec<&Sample> = train
            .samples()
            .iter()
            .chain(val.samples())
            .chain(test.samples())
            .collect();
        assert_eq!(all.len(), 100);
        let words: HashSet<&str> = all.iter().map(|s| s.words()[0].as_str()).collect();
        assert_eq!(words.len(), 100);
        all.clear();
    }

    #[test]
    fn length_filter_applies_before_splitting() {
        let bank = small_bank();
        let long_words: Vec<String> = (0..21).map(|i| format!("w{i}")).collect();
        let long_types = vec![Type::atom("np"); 21];
        let mut samples = bank.samples().to_vec();
        samples.push(Sample::new(long_words, long_types).unwrap());
        let bank = bank.with_samples(samples);
        let (train, val, test) = split(&bank, &SplitSpec::default()).unwrap();
        assert_eq!(train.len() + val.len() + test.len(), 2);
    }

    #[test]
    fn frequency_bins_are_pinned() {
        assert_eq!(FreqBin::of_count(0), FreqBin::Unseen);
        assert_eq!(FreqBin::of_count(1), FreqBin::Low);
        assert_eq!(FreqBin::of_count(9), FreqBin::Low);
        assert_eq!(FreqBin::of_count(10), FreqBin::Mid);
        assert_eq!(FreqBin::of_count(99), FreqBin::Mid);
        assert_eq!(FreqBin::of_count(100), FreqBin::High);
    }

    #[test]
    fn all_singletons_cover_everything_at_threshold_two() {
        let vocab = Vocabulary::new(["np", "n"], ["det"]).unwrap();
        let t = |s: &str| parse_infix(s, &vocab).unwrap();
        let samples = vec![
            Sample::new(vec!["a".into()], vec![t("np")]).unwrap(),
            Sample::new(vec!["b".into()], vec![t("n")]).unwrap(),
            Sample::new(vec!["c".into()], vec![t("(n -(det)-> np)")]).unwrap(),
        ];
        let bank = Treebank::new(vocab, None, samples).unwrap();
        let (_, curve) = frequency_stats(&bank);
        // every type occurs once: at k=2 all types are "rare"
        let at2 = curve.iter().find(|p| p.threshold == 2).unwrap();
        assert_eq!(at2.type_fraction, 1.0);
        assert_eq!(at2.sentence_fraction, 1.0);
    }

    #[test]
    fn coverage_curve_matches_hand_computation() {
        // 6 samples over types: np ×5, n ×3, det ×2, su-verb ×1, mod ×1
        let vocab = Vocabulary::new(["np", "n", "s_main"], ["su", "det", "mod"]).unwrap();
        let t = |s: &str| parse_infix(s, &vocab).unwrap();
        let np = t("np");
        let n = t("n");
        let det = t("(n -(det)-> np)");
        let verb = t("(np -(su)-> s_main)");
        let md = t("(n -(mod)-> n)");
        let mk = |ws: &[&str], ts: Vec<Type>| {
            Sample::new(ws.iter().map(|w| w.to_string()).collect(), ts).unwrap()
        };
        let samples = vec![
            mk(&["w1", "w2"], vec![np.clone(), verb.clone()]),
            mk(&["w3", "w4"], vec![det.clone(), n.clone()]),
            mk(&["w5", "w6"], vec![det.clone(), n.clone()]),
            mk(&["w7", "w8"], vec![np.clone(), md.clone()]),
            mk(&["w9", "w10"], vec![np.clone(), n.clone()]),
            mk(&["w11", "w12"], vec![np.clone(), np.clone()]),
        ];
        let bank = Treebank::new(vocab, None, samples).unwrap();
        let (table, curve) = frequency_stats(&bank);
        assert_eq!(table.count(&np), 5);
        assert_eq!(table.count(&n), 3);
        assert_eq!(table.count(&det), 2);
        assert_eq!(table.count(&verb), 1);
        assert_eq!(table.count(&md), 1);
        assert_eq!(table.total(), 12);

        // hand computation: 5 unique types, 6 sentences
        // k=2: rare types {verb, md} → 2/5; sentences 1 and 4 → 2/6
        let at = |k: usize| curve.iter().find(|p| p.threshold == k).unwrap();
        assert_eq!(at(1).type_fraction, 0.0);
        assert_eq!(at(2).type_fraction, 2.0 / 5.0);
        assert_eq!(at(2).sentence_fraction, 2.0 / 6.0);
        // k=3: adds det → 3/5 types; sentences 1,2,3,4 → 4/6
        assert_eq!(at(3).type_fraction, 3.0 / 5.0);
        assert_eq!(at(3).sentence_fraction, 4.0 / 6.0);
        // k=4: adds n → 4/5; sentences all but the last... sample 5 has n → 5/6
        assert_eq!(at(4).type_fraction, 4.0 / 5.0);
        assert_eq!(at(4).sentence_fraction, 5.0 / 6.0);
        // k=6: everything rare
        assert_eq!(at(6).type_fraction, 1.0);
        assert_eq!(at(6).sentence_fraction, 1.0);
    }
}
