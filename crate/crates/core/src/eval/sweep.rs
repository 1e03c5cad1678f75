//! The merge-scale sweep: for each merge level, learn merges on the
//! training split, re-encode, train a model, and evaluate — producing a
//! comparison table over frequency bins and new-type statistics.

use std::collections::BTreeMap;

use super::{encode_samples, evaluate, EvalReport, SegmentMode};
use crate::corpus::{split, type_set, FreqBin, FrequencyTable, SplitSpec, Treebank};
use crate::digram::{learn_merges, MergeGoal};
use crate::grammar::flatten_assignment;
use crate::model::{
    greedy_decode, train, word_input_for_sample, DecodeMode, ModelConfig, StopRule, TrainOptions,
    WordRepProvider,
};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub levels: Vec<MergeGoal>,
    pub model: ModelConfig,
    pub train_options: TrainOptions,
    pub split: SplitSpec,
    /// Runs per level, each with a seed derived from the master seed;
    /// metrics are reported as means over the runs.
    pub repetitions: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub overall: f64,
    /// Mean accuracy per bin over the runs where the bin was populated.
    pub bins: BTreeMap<FreqBin, f64>,
    pub generated: f64,
    pub unique: f64,
    pub occurrence_precision: Option<f64>,
    pub unique_precision: Option<f64>,
    pub wellformedness: f64,
}

#[derive(Debug)]
pub struct LevelRun {
    pub merges_learned: usize,
    pub vocab_size: usize,
    pub reports: Vec<EvalReport>,
    pub summary: MetricSummary,
}

#[derive(Debug)]
pub struct LevelOutcome {
    pub level: MergeGoal,
    pub result: Result<LevelRun, String>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub levels: Vec<LevelOutcome>,
}

pub fn level_label(level: MergeGoal) -> String {
    match level {
        MergeGoal::Count(n) => format!("M{n}"),
        MergeGoal::Exhaustive => "M∞".to_string(),
    }
}

fn splitmix(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn summarize(reports: &[EvalReport]) -> MetricSummary {
    let mut bins = BTreeMap::new();
    for bin in FreqBin::ALL {
        if let Some(m) = mean(
            reports
                .iter()
                .filter_map(|r| r.bins.get(&bin).map(|s| s.accuracy())),
        ) {
            bins.insert(bin, m);
        }
    }
    MetricSummary {
        overall: mean(reports.iter().map(|r| r.overall_accuracy)).unwrap_or(0.0),
        bins,
        generated: mean(reports.iter().map(|r| r.new_types.generated as f64)).unwrap_or(0.0),
        unique: mean(reports.iter().map(|r| r.new_types.unique as f64)).unwrap_or(0.0),
        occurrence_precision: mean(
            reports
                .iter()
                .filter_map(|r| r.new_types.occurrence_precision),
        ),
        unique_precision: mean(reports.iter().filter_map(|r| r.new_types.unique_precision)),
        wellformedness: mean(reports.iter().map(|r| r.wellformedness)).unwrap_or(0.0),
    }
}

fn run_level(
    bank: &Treebank,
    cfg: &SweepConfig,
    level_idx: usize,
    level: MergeGoal,
) -> Result<LevelRun, String> {
    let (train_bank, val_bank, test_bank) =
        split(bank, &cfg.split).map_err(|e| e.to_string())?;
    let base_vocab = bank.symbol_vocab();
    let train_seqs: Vec<_> = train_bank
        .samples()
        .iter()
        .map(|s| flatten_assignment(s.types(), &base_vocab))
        .collect();
    let (table, vocab) =
        learn_merges(&train_seqs, level, &base_vocab).map_err(|e| e.to_string())?;
    let drop_separator = level == MergeGoal::Exhaustive;
    let enc_train = encode_samples(train_bank.samples(), &vocab, &table, drop_separator);
    let enc_val = encode_samples(val_bank.samples(), &vocab, &table, drop_separator);
    let enc_test = encode_samples(test_bank.samples(), &vocab, &table, drop_separator);
    let freq = FrequencyTable::from_samples(train_bank.samples());
    let train_types = type_set(&train_bank);
    let mode = if drop_separator {
        SegmentMode::PerToken
    } else {
        SegmentMode::BySeparator
    };

    let mut reports = Vec::with_capacity(cfg.repetitions.max(1));
    for rep in 0..cfg.repetitions.max(1) {
        let mut model_cfg = cfg.model.clone();
        model_cfg.seed = splitmix(cfg.master_seed, (level_idx as u64) * 1009 + rep as u64);
        let mut options = cfg.train_options.clone();
        options.per_token_types = drop_separator;
        let provider = WordRepProvider::lookup_from_words(
            enc_train
                .iter()
                .flat_map(|s| s.words.iter().map(String::as_str)),
            model_cfg.d,
        );
        let outcome = train(&vocab, provider, &enc_train, &enc_val, &model_cfg, &options)
            .map_err(|e| e.to_string())?;
        let params = match &outcome.best {
            Some((_, _, best)) => best,
            None => &outcome.params,
        };
        let mut preds = Vec::with_capacity(enc_test.len());
        for sample in &enc_test {
            let stop = if drop_separator {
                StopRule::TokenCount(sample.words.len())
            } else {
                StopRule::SeparatorCount(sample.words.len())
            };
            let input = word_input_for_sample(params, sample).map_err(|e| e.to_string())?;
            let out = greedy_decode(params, &vocab, &input, stop, DecodeMode::Free)
                .map_err(|e| e.to_string())?;
            preds.push((out.tokens, out.cap_exceeded));
        }
        reports.push(evaluate(
            &preds,
            test_bank.samples(),
            &freq,
            &train_types,
            &vocab,
            &table,
            mode,
        ));
    }
    let summary = summarize(&reports);
    Ok(LevelRun {
        merges_learned: table.len(),
        vocab_size: vocab.len(),
        reports,
        summary,
    })
}

/// For each level: learn merges on the training split, re-encode, train,
/// evaluate. Failures are captured per level without aborting the sweep.
pub fn run_merge_sweep(bank: &Treebank, cfg: &SweepConfig) -> SweepReport {
    let levels = cfg
        .levels
        .iter()
        .enumerate()
        .map(|(i, level)| LevelOutcome {
            level: *level,
            result: run_level(bank, cfg, i, *level),
        })
        .collect();
    SweepReport { levels }
}

impl SweepReport {
    /// Accuracy table over frequency bins, one row per merge scale, plus
    /// the new-type generation block.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>8} {:>8} {:>10} {:>11} {:>11} {:>12}\n",
            "model", "overall", "unseen", "freq 1-9", "freq 10-99", "freq >=100", "well-formed"
        ));
        for level in &self.levels {
            match &level.result {
                Ok(run) => {
                    let s = &run.summary;
                    let bin = |b: FreqBin| {
                        s.bins
                            .get(&b)
                            .map(|v| format!("{v:.4}"))
                            .unwrap_or_else(|| "-".to_string())
                    };
                    out.push_str(&format!(
                        "{:<8} {:>8.4} {:>8} {:>10} {:>11} {:>11} {:>12.4}\n",
                        level_label(level.level),
                        s.overall,
                        bin(FreqBin::Unseen),
                        bin(FreqBin::Low),
                        bin(FreqBin::Mid),
                        bin(FreqBin::High),
                        s.wellformedness,
                    ));
                }
                Err(e) => {
                    out.push_str(&format!("{:<8} failed: {e}\n", level_label(level.level)))
                }
            }
        }
        out.push('\n');
        out.push_str(&format!(
            "{:<8} {:>10} {:>8} {:>12} {:>14}\n",
            "model", "generated", "unique", "occ-correct", "unique-correct"
        ));
        for level in &self.levels {
            if let Ok(run) = &level.result {
                let s = &run.summary;
                let opt = |v: Option<f64>| {
                    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".to_string())
                };
                out.push_str(&format!(
                    "{:<8} {:>10.1} {:>8.1} {:>12} {:>14}\n",
                    level_label(level.level),
                    s.generated,
                    s.unique,
                    opt(s.occurrence_precision),
                    opt(s.unique_precision),
                ));
            }
        }
        out
    }

    /// Machine-readable lines with a versioned header.
    pub fn to_machine(&self) -> String {
        let mut out = String::from("tlgtag sweep v1\n");
        for level in &self.levels {
            let label = level_label(level.level);
            match &level.result {
                Err(e) => out.push_str(&format!("level {label} error {e}\n")),
                Ok(run) => {
                    let s = &run.summary;
                    out.push_str(&format!(
                        "level {label} merges {} vocab {} runs {}\n",
                        run.merges_learned,
                        run.vocab_size,
                        run.reports.len()
                    ));
                    out.push_str(&format!("level {label} overall {}\n", s.overall));
                    for (bin, acc) in &s.bins {
                        out.push_str(&format!(
                            "level {label} bin {} {}\n",
                            bin.label().replace(' ', "_"),
                            acc
                        ));
                    }
                    out.push_str(&format!(
                        "level {label} new_generated {} new_unique {} occ_precision {} unique_precision {} wellformedness {}\n",
                        s.generated,
                        s.unique,
                        s.occurrence_precision.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                        s.unique_precision.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                        s.wellformedness,
                    ));
                }
            }
        }
        out
    }
}
