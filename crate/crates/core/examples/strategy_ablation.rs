//! Compares the five selection strategies on the bundled corpus and on the
//! synthetic tree family. Pass a directory to also write the reports.
//!
//!     cargo run -p sqlclarify --example strategy_ablation -- [OUT_DIR]

use sqlclarify::clarify::InteractionMode;
use sqlclarify::eig::StrategyKind;
use sqlclarify::eval::synthetic::randomized_tree_family;
use sqlclarify::eval::{ambiguity_filter, run_ablation, EvalConfig, EvalInstance};
use sqlclarify::source::load_fixtures;

fn main() {
    let corpus = load_fixtures(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.json")).unwrap();
    let ambiguous = ambiguity_filter(&corpus, 0.7);
    println!("corpus: {} instances, {} with top p < 0.7", corpus.len(), ambiguous.len());

    let config = EvalConfig { tau: 0.9, max_turns: 5, seed: 0, mode: InteractionMode::MultiTurn };
    let report = run_ablation(&EvalInstance::from_fixtures(&corpus).unwrap(), &StrategyKind::ALL, &config);
    println!("{}", report.render_table());

    let synthetic = randomized_tree_family(200, 0);
    let exhaustive = EvalConfig { tau: 1.0, max_turns: 10, ..config };
    let tree_report = run_ablation(&synthetic, &StrategyKind::ALL, &exhaustive);
    println!("synthetic trees, questions until one candidate is left\n{}", tree_report.render_table());

    if let Some(dir) = std::env::args().nth(1) {
        report.write_to(&dir, "corpus").unwrap();
        tree_report.write_to(&dir, "trees").unwrap();
        println!("wrote reports to {dir}");
    }
}
