//! The metric suite: type-level accuracy with the all-or-nothing counting
//! rule, frequency-binned accuracy, unseen-type generation statistics,
//! well-formedness rate, and the merge-scale sweep that ties them together.

mod sweep;

pub use sweep::{run_merge_sweep, LevelOutcome, MetricSummary, SweepConfig, SweepReport};

use std::collections::{BTreeMap, HashSet};

use crate::corpus::{FreqBin, FrequencyTable, Sample};
use crate::digram::{revert_merges, MergeTable};
use crate::grammar::{
    flatten_assignment, prefix_status, segment_assignment, PrefixStatus, SymbolVocab,
};
use crate::model::EncodedSample;
use crate::types::{parse_polish, render_infix, Token, TokenSeq, Type};

/// How decoded streams map to type segments: split on separators, or (fully
/// merged mode) one token per type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentMode {
    BySeparator,
    PerToken,
}

/// One gold position's outcome. Missing and malformed segments are wrong;
/// the raw token run is kept for error analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionVerdict {
    pub gold: Type,
    pub predicted: Option<Type>,
    pub raw_tokens: TokenSeq,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEval {
    pub index: usize,
    pub verdicts: Vec<PositionVerdict>,
    /// Predicted segments beyond the word count: excluded from the accuracy
    /// denominator, surfaced for error analysis.
    pub surplus: Vec<(TokenSeq, Option<Type>)>,
    pub cap_exceeded: bool,
}

impl SentenceEval {
    pub fn correct(&self) -> usize {
        self.verdicts.iter().filter(|v| v.correct).count()
    }
}

/// Revert merges and split a raw decoded stream into per-position segments
/// with their parse results.
pub fn segment_predictions(
    pred: &[Token],
    vocab: &SymbolVocab,
    table: &MergeTable,
    mode: SegmentMode,
) -> Vec<(TokenSeq, Option<Type>)> {
    match mode {
        SegmentMode::BySeparator => {
            let reverted = match revert_merges(pred, table, vocab) {
                Ok(r) => r,
                Err(_) => return vec![(pred.to_vec(), None)],
            };
            segment_assignment(&reverted, vocab)
                .into_iter()
                .map(|seg| (seg.tokens, seg.parsed.ok()))
                .collect()
        }
        SegmentMode::PerToken => pred
            .iter()
            .map(|tok| {
                match revert_merges(std::slice::from_ref(tok), table, vocab) {
                    Ok(reverted) => {
                        let parsed = parse_polish(&reverted, vocab.base()).ok();
                        (reverted, parsed)
                    }
                    Err(_) => (vec![tok.clone()], None),
                }
            })
            .collect(),
    }
}

/// Score one sentence: align predicted segments to gold positions by index;
/// a verdict is correct iff the segment parses and equals the gold type
/// exactly (a single mistake within a type makes the whole type wrong).
pub fn type_accuracy(
    index: usize,
    pred: &[Token],
    cap_exceeded: bool,
    gold: &Sample,
    vocab: &SymbolVocab,
    table: &MergeTable,
    mode: SegmentMode,
) -> SentenceEval {
    let segments = segment_predictions(pred, vocab, table, mode);
    let mut verdicts = Vec::with_capacity(gold.len());
    for (i, gold_ty) in gold.types().iter().enumerate() {
        let (raw_tokens, predicted) = match segments.get(i) {
            Some((tokens, parsed)) => (tokens.clone(), parsed.clone()),
            None => (Vec::new(), None),
        };
        let correct = predicted.as_ref() == Some(gold_ty);
        verdicts.push(PositionVerdict {
            gold: gold_ty.clone(),
            predicted,
            raw_tokens,
            correct,
        });
    }
    let surplus = segments.into_iter().skip(gold.len()).collect();
    SentenceEval {
        index,
        verdicts,
        surplus,
        cap_exceeded,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinStat {
    pub total: usize,
    pub correct: usize,
}

impl BinStat {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Per-bin accuracy by the gold type's training count. Every evaluated
/// position lands in exactly one bin; empty bins are absent, not zero.
pub fn binned_accuracy(
    sentences: &[SentenceEval],
    freq: &FrequencyTable,
) -> BTreeMap<FreqBin, BinStat> {
    let mut bins: BTreeMap<FreqBin, BinStat> = BTreeMap::new();
    for s in sentences {
        for v in &s.verdicts {
            let stat = bins.entry(freq.bin(&v.gold)).or_default();
            stat.total += 1;
            stat.correct += usize::from(v.correct);
        }
    }
    bins
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewTypeStats {
    /// Occurrences of predicted segments parsing to types outside the
    /// training set (surplus segments included).
    pub generated: usize,
    pub unique: usize,
    /// Fraction of new-type occurrences equal to gold at their position.
    pub occurrence_precision: Option<f64>,
    /// Fraction of distinct new types correct at least once.
    pub unique_precision: Option<f64>,
}

pub fn new_type_stats(
    sentences: &[SentenceEval],
    train_types: &HashSet<Type>,
) -> NewTypeStats {
    let mut generated = 0usize;
    let mut correct_occurrences = 0usize;
    let mut unique: HashSet<&Type> = HashSet::new();
    let mut ever_correct: HashSet<&Type> = HashSet::new();
    for s in sentences {
        for v in &s.verdicts {
            if let Some(t) = &v.predicted {
                if !train_types.contains(t) {
                    generated += 1;
                    unique.insert(t);
                    if v.correct {
                        correct_occurrences += 1;
                        ever_correct.insert(t);
                    }
                }
            }
        }
        // surplus segments have no gold position, so they can never be
        // correct, but they do count as generated occurrences
        for (_, parsed) in &s.surplus {
            if let Some(t) = parsed {
                if !train_types.contains(t) {
                    generated += 1;
                    unique.insert(t);
                }
            }
        }
    }
    NewTypeStats {
        generated,
        unique: unique.len(),
        occurrence_precision: (generated > 0)
            .then(|| correct_occurrences as f64 / generated as f64),
        unique_precision: (!unique.is_empty())
            .then(|| ever_correct.len() as f64 / unique.len() as f64),
    }
}

/// Fraction of predicted segments whose (reverted) token run is a complete
/// word of the type grammar.
pub fn wellformedness_rate(
    preds: &[Vec<Token>],
    vocab: &SymbolVocab,
    table: &MergeTable,
    mode: SegmentMode,
) -> f64 {
    let mut total = 0usize;
    let mut valid = 0usize;
    for pred in preds {
        for (tokens, _) in segment_predictions(pred, vocab, table, mode) {
            total += 1;
            if prefix_status(&tokens, vocab) == Ok(PrefixStatus::ValidComplete) {
                valid += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        valid as f64 / total as f64
    }
}

/// The full metric bundle for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub total_positions: usize,
    pub correct_positions: usize,
    pub overall_accuracy: f64,
    pub bins: BTreeMap<FreqBin, BinStat>,
    pub new_types: NewTypeStats,
    pub wellformedness: f64,
    pub sentences: Vec<SentenceEval>,
}

/// Evaluate decoded streams against gold samples. `freq` must come from the
/// training split; `train_types` is its type set.
pub fn evaluate(
    preds: &[(Vec<Token>, bool)],
    gold: &[Sample],
    freq: &FrequencyTable,
    train_types: &HashSet<Type>,
    vocab: &SymbolVocab,
    table: &MergeTable,
    mode: SegmentMode,
) -> EvalReport {
    assert_eq!(preds.len(), gold.len(), "one prediction per gold sentence");
    let sentences: Vec<SentenceEval> = preds
        .iter()
        .zip(gold)
        .enumerate()
        .map(|(i, ((tokens, cap), sample))| {
            type_accuracy(i, tokens, *cap, sample, vocab, table, mode)
        })
        .collect();
    let total_positions: usize = sentences.iter().map(|s| s.verdicts.len()).sum();
    let correct_positions: usize = sentences.iter().map(|s| s.correct()).sum();
    let bins = binned_accuracy(&sentences, freq);
    let new_types = new_type_stats(&sentences, train_types);
    let raw: Vec<Vec<Token>> = preds.iter().map(|(t, _)| t.clone()).collect();
    let wellformedness = wellformedness_rate(&raw, vocab, table, mode);
    EvalReport {
        total_positions,
        correct_positions,
        overall_accuracy: if total_positions == 0 {
            0.0
        } else {
            correct_positions as f64 / total_positions as f64
        },
        bins,
        new_types,
        wellformedness,
        sentences,
    }
}

impl EvalReport {
    /// Human-readable table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "overall accuracy {:.4} ({}/{})\n",
            self.overall_accuracy, self.correct_positions, self.total_positions
        ));
        for bin in FreqBin::ALL {
            match self.bins.get(&bin) {
                Some(stat) => out.push_str(&format!(
                    "{:<12} {:.4} ({}/{})\n",
                    bin.label(),
                    stat.accuracy(),
                    stat.correct,
                    stat.total
                )),
                None => out.push_str(&format!("{:<12} -\n", bin.label())),
            }
        }
        out.push_str(&format!(
            "new types: generated {} unique {} occurrence-precision {} unique-precision {}\n",
            self.new_types.generated,
            self.new_types.unique,
            fmt_opt(self.new_types.occurrence_precision),
            fmt_opt(self.new_types.unique_precision),
        ));
        out.push_str(&format!("well-formedness {:.4}\n", self.wellformedness));
        out
    }

    /// Machine-readable structured text with a versioned header and
    /// per-sentence error records.
    pub fn to_machine(&self) -> String {
        let mut out = String::from("tlgtag report v1\n");
        out.push_str(&format!("total_positions {}\n", self.total_positions));
        out.push_str(&format!("correct_positions {}\n", self.correct_positions));
        out.push_str(&format!("overall_accuracy {}\n", self.overall_accuracy));
        for (bin, stat) in &self.bins {
            out.push_str(&format!(
                "bin {} total {} correct {}\n",
                bin.label().replace(' ', "_"),
                stat.total,
                stat.correct
            ));
        }
        out.push_str(&format!(
            "new_generated {}\nnew_unique {}\nnew_occurrence_precision {}\nnew_unique_precision {}\n",
            self.new_types.generated,
            self.new_types.unique,
            fmt_opt(self.new_types.occurrence_precision),
            fmt_opt(self.new_types.unique_precision),
        ));
        out.push_str(&format!("wellformedness {}\n", self.wellformedness));
        for s in &self.sentences {
            out.push_str(&format!(
                "sentence {} correct {} total {} cap_exceeded {}\n",
                s.index,
                s.correct(),
                s.verdicts.len(),
                s.cap_exceeded
            ));
            for (i, v) in s.verdicts.iter().enumerate() {
                if !v.correct {
                    out.push_str(&format!(
                        "error {} {} gold {} pred {}\n",
                        s.index,
                        i,
                        render_infix(&v.gold),
                        if v.raw_tokens.is_empty() {
                            "<missing>".to_string()
                        } else {
                            v.raw_tokens.join(" ")
                        }
                    ));
                }
            }
        }
        out
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    }
}

/// Flatten, merge-encode, and id-encode treebank samples for the model.
/// In fully merged mode the separator is dropped: one token per type.
pub fn encode_samples(
    samples: &[Sample],
    vocab: &SymbolVocab,
    table: &MergeTable,
    drop_separator: bool,
) -> Vec<EncodedSample> {
    use crate::digram::apply_merges;
    samples
        .iter()
        .map(|s| {
            let flat = flatten_assignment(s.types(), vocab);
            let merged = apply_merges(&flat, table);
            let tokens: Vec<Token> = if drop_separator {
                merged
                    .into_iter()
                    .filter(|t| t != crate::grammar::SEPARATOR)
                    .collect()
            } else {
                merged
            };
            let target_ids = tokens
                .iter()
                .map(|t| vocab.id(t).expect("encoded token in vocabulary"))
                .collect();
            EncodedSample {
                words: s.words().to_vec(),
                vectors: None,
                target_ids,
                gold_types: s.types().to_vec(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vocabulary;

    fn setup() -> (SymbolVocab, MergeTable) {
        let vocab = SymbolVocab::from_vocabulary(
            Vocabulary::new(["np", "n", "s_main"], ["su", "det", "mod", "obj1"]).unwrap(),
        );
        (vocab, MergeTable::default())
    }

    fn toks(s: &[&str]) -> Vec<Token> {
        s.iter().map(|t| t.to_string()).collect()
    }

    fn fig_sample() -> Sample {
        let v = Vocabulary::new(["np", "s_main"], ["su", "det", "mod", "obj1"]).unwrap();
        let t = |s: &str| crate::types::parse_infix(s, &v).unwrap();
        Sample::new(
            "is er een toepassing voor lineaire logica"
                .split(' ')
                .map(String::from)
                .collect(),
            vec![
                t("(np -(su)-> s_main)"),
                t("(s_main -(mod)-> s_main)"),
                t("(np -(det)-> np)"),
                t("np"),
                t("(np -(obj1)-> (np -(mod)-> np))"),
                t("(np -(mod)-> np)"),
                t("np"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_prediction_scores_full_marks() {
        let (vocab, table) = setup();
        let gold = fig_sample();
        let pred = flatten_assignment(gold.types(), &vocab);
        let eval = type_accuracy(0, &pred, false, &gold, &vocab, &table, SegmentMode::BySeparator);
        assert_eq!(eval.correct(), 7);
        assert_eq!(eval.verdicts.len(), 7);
        assert!(eval.surplus.is_empty());
    }

    #[test]
    fn one_flipped_token_voids_the_whole_type() {
        let (vocab, table) = setup();
        let gold = fig_sample();
        let mut pred = flatten_assignment(gold.types(), &vocab);
        // third segment starts at index 8: flip its connective
        assert_eq!(pred[8], "→det");
        pred[8] = "→mod".to_string();
        let eval = type_accuracy(0, &pred, false, &gold, &vocab, &table, SegmentMode::BySeparator);
        assert_eq!(eval.correct(), 6);
    }

    #[test]
    fn hand_fixture_three_of_four() {
        let (vocab, table) = setup();
        let v = vocab.base().clone();
        let t = |s: &str| crate::types::parse_infix(s, &v).unwrap();
        let gold = Sample::new(
            toks(&["w1", "w2", "w3", "w4"]),
            vec![t("np"), t("n"), t("(np -(su)-> s_main)"), t("np")],
        )
        .unwrap();
        // segment 2 malformed, others right: 3/4 = 0.75
        let pred = toks(&["np", "#", "n", "#", "→su", "np", "#", "np", "#"]);
        let eval = type_accuracy(0, &pred, false, &gold, &vocab, &table, SegmentMode::BySeparator);
        assert_eq!(eval.correct(), 3);
        assert_eq!(eval.verdicts.len(), 4);
        assert!((eval.correct() as f64 / eval.verdicts.len() as f64 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn missing_and_surplus_segments() {
        let (vocab, table) = setup();
        let v = vocab.base().clone();
        let t = |s: &str| crate::types::parse_infix(s, &v).unwrap();
        let gold = Sample::new(toks(&["w1", "w2"]), vec![t("np"), t("n")]).unwrap();
        // only one segment for two words, then two surplus segments
        let pred = toks(&["np", "#"]);
        let eval = type_accuracy(0, &pred, false, &gold, &vocab, &table, SegmentMode::BySeparator);
        assert_eq!(eval.correct(), 1);
        assert!(!eval.verdicts[1].correct);

        let pred = toks(&["np", "#", "n", "#", "np", "#"]);
        let eval = type_accuracy(0, &pred, false, &gold, &vocab, &table, SegmentMode::BySeparator);
        assert_eq!(eval.correct(), 2);
        assert_eq!(eval.surplus.len(), 1);
        assert_eq!(eval.surplus[0].1, Some(t("np")));
    }

    #[test]
    fn binned_accuracy_hand_fixture() {
        let (vocab, table) = setup();
        let v = vocab.base().clone();
        let t = |s: &str| crate::types::parse_infix(s, &v).unwrap();
        let t1 = t("np");
        let t2 = t("n");
        let t3 = t("(np -(su)-> s_main)");
        // training counts: t1 ×1 (low), t2 ×50 (mid), t3 absent (unseen)
        let mut train_samples = vec![Sample::new(toks(&["a"]), vec![t1.clone()]).unwrap()];
        for i in 0..50 {
            train_samples.push(Sample::new(toks(&[&format!("b{i}")]), vec![t2.clone()]).unwrap());
        }
        let freq = FrequencyTable::from_samples(&train_samples);
        let gold = Sample::new(
            toks(&["w1", "w2", "w3"]),
            vec![t1.clone(), t2.clone(), t3.clone()],
        )
        .unwrap();
        // predictions: t1 right, t2 wrong, t3 right
        let pred = toks(&["np", "#", "np", "#", "→su", "np", "s_main", "#"]);
        let sentences = vec![type_accuracy(
            0,
            &pred,
            false,
            &gold,
            &vocab,
            &table,
            SegmentMode::BySeparator,
        )];
        let bins = binned_accuracy(&sentences, &freq);
        assert_eq!(bins[&FreqBin::Low], BinStat { total: 1, correct: 1 });
        assert_eq!(bins[&FreqBin::Mid], BinStat { total: 1, correct: 0 });
        assert_eq!(bins[&FreqBin::Unseen], BinStat { total: 1, correct: 1 });
        assert!(!bins.contains_key(&FreqBin::High));
        let total: usize = bins.values().map(|b| b.total).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn new_type_stats_hand_fixture() {
        let (vocab, table) = setup();
        let v = vocab.base().clone();
        let t = |s: &str| crate::types::parse_infix(s, &v).unwrap();
        // training set: only np
        let train_types: HashSet<Type> = [t("np")].into_iter().collect();
        // five new-type occurrences over three distinct types;
        // two occurrences correct; one distinct type ever-correct
        let n = t("n");
        let sm = t("(np -(su)-> s_main)");
        let dp = t("(n -(det)-> np)");
        let mk = |gold: &Type, pred: &Type, correct: bool| PositionVerdict {
            gold: gold.clone(),
            predicted: Some(pred.clone()),
            raw_tokens: vec![],
            correct,
        };
        let sentences = vec![SentenceEval {
            index: 0,
            verdicts: vec![
                mk(&n, &n, true),
                mk(&n, &n, true),
                mk(&sm, &dp, false),
                mk(&dp, &sm, false),
                mk(&n, &sm, false),
            ],
            surplus: vec![],
            cap_exceeded: false,
        }];
        let stats = new_type_stats(&sentences, &train_types);
        assert_eq!(stats.generated, 5);
        assert_eq!(stats.unique, 3);
        assert!((stats.occurrence_precision.unwrap() - 0.4).abs() < 1e-12);
        assert!((stats.unique_precision.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn new_type_stats_empty_when_everything_is_known() {
        let (vocab, table) = setup();
        let _ = (vocab, table);
        let v = Vocabulary::new(["np"], ["su"]).unwrap();
        let t = crate::types::parse_infix("np", &v).unwrap();
        let train_types: HashSet<Type> = [t.clone()].into_iter().collect();
        let sentences = vec![SentenceEval {
            index: 0,
            verdicts: vec![PositionVerdict {
                gold: t.clone(),
                predicted: Some(t),
                raw_tokens: vec![],
                correct: true,
            }],
            surplus: vec![],
            cap_exceeded: false,
        }];
        let stats = new_type_stats(&sentences, &train_types);
        assert_eq!(stats.generated, 0);
        assert_eq!(stats.unique, 0);
        assert_eq!(stats.occurrence_precision, None);
        assert_eq!(stats.unique_precision, None);
    }

    #[test]
    fn wellformedness_hand_fixture() {
        let (vocab, table) = setup();
        // nine valid segments and one truncated
        let mut preds = Vec::new();
        for _ in 0..3 {
            preds.push(toks(&["np", "#", "n", "#", "→su", "np", "s_main", "#"]));
        }
        preds.push(toks(&["→su", "np"])); // truncated tail segment
        let rate = wellformedness_rate(&preds, &vocab, &table, SegmentMode::BySeparator);
        assert!((rate - 0.9).abs() < 1e-12, "{rate}");
    }

    #[test]
    fn encode_samples_round_trip_ids() {
        let (vocab, table) = setup();
        let gold = fig_sample();
        let enc = encode_samples(&[gold.clone()], &vocab, &table, false);
        assert_eq!(enc.len(), 1);
        let tokens: Vec<&str> = enc[0]
            .target_ids
            .iter()
            .map(|id| vocab.token(*id).unwrap())
            .collect();
        assert_eq!(tokens.len(), 26);
        assert_eq!(tokens.iter().filter(|t| **t == "#").count(), 7);
    }
}
