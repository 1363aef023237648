//! Single-turn against multi-turn interaction on nested ambiguities.
//!
//!     cargo run -p sqlclarify --example mode_comparison

use sqlclarify::eval::synthetic::dependent_family;
use sqlclarify::eval::{compare_modes, EvalConfig, EvalInstance};
use sqlclarify::source::load_fixtures;

fn main() {
    let family = dependent_family(200, 0);
    println!("example instance:");
    for c in family[0].distribution.iter() {
        println!("  {:.3}  {}", c.probability, c.sql_text);
    }
    let config = EvalConfig::default();
    println!("\ndependent family (200 instances)\n{}", compare_modes(&family, &config).render_table());

    let corpus = load_fixtures(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.json")).unwrap();
    let corpus = EvalInstance::from_fixtures(&corpus).unwrap();
    println!("bundled corpus\n{}", compare_modes(&corpus, &config).render_table());
}
