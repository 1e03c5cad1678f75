use tlgtag_core::corpus::{gen_synthetic, Recipe};
use tlgtag_core::digram::MergeTable;
use tlgtag_core::eval::encode_samples;
use tlgtag_core::model::{
    greedy_decode, train, word_input_for_sample, DecodeMode, ModelConfig, StopRule, TrainOptions,
    WordRepProvider,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dropout: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let bs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(4);
    let warmup: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(200);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(600);
    let d: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(64);
    let t0 = std::time::Instant::now();
    let bank = gen_synthetic(&Recipe::default(), 404, 20).unwrap();
    let vocab = bank.symbol_vocab();
    let enc = encode_samples(bank.samples(), &vocab, &MergeTable::default(), false);
    let provider = WordRepProvider::lookup_from_words(
        enc.iter().flat_map(|s| s.words.iter().map(String::as_str)), d);
    let config = ModelConfig { d, dropout, warmup, seed: 5, ..ModelConfig::default() };
    let options = TrainOptions {
        epochs, batch_size: bs, val_every: 0,
        target_train_accuracy: Some(1.0), train_check_every: 10,
        per_token_types: false,
    };
    let outcome = train(&vocab, provider, &enc, &[], &config, &options).unwrap();
    for log in outcome.log.iter().filter(|l| l.train_accuracy.is_some()).rev().take(3) {
        println!("{}", log.render());
    }
    for (i, s) in enc.iter().enumerate() {
        let input = word_input_for_sample(&outcome.params, s).unwrap();
        let out = greedy_decode(&outcome.params, &vocab, &input,
            StopRule::SeparatorCount(s.words.len()), DecodeMode::Free).unwrap();
        if out.token_ids != s.target_ids {
            let gold: Vec<&str> = s.target_ids.iter().map(|t| vocab.token(*t).unwrap()).collect();
            println!("#{} {:?}", i, s.words.join(" "));
            println!("  gold {}", gold.join(" "));
            println!("  pred {}", out.tokens.join(" "));
        }
    }
    println!("elapsed {:?}", t0.elapsed());
}
