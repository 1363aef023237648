//! Runs full sessions with a simulated user whose intent is each candidate in
//! turn, then prints one transcript.
//!
//!     cargo run -p sqlclarify --example scripted_session

use sqlclarify::clarify::{run_session, Choice, ClarificationQuestion, InteractionMode, SessionConfig};
use sqlclarify::eval::OracleUser;
use sqlclarify::source::load_fixtures;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig3.json");
    let dist = load_fixtures(path).unwrap()[0].distribution().unwrap();
    let config = SessionConfig { tau: 1.0, mode: InteractionMode::MultiTurn, ..SessionConfig::default() };

    for c in dist.iter() {
        let mut user = OracleUser::from_sql(&c.sql_text).unwrap();
        let out = run_session(config, dist.clone(), &mut user).unwrap();
        let asked: Vec<String> = out.transcript.turns.iter().map(|t| t.question.slot.to_string()).collect();
        println!("intent {} -> {} after {} question(s) {:?}", c.id, out.result.candidate_id, asked.len(), asked);
    }

    // any closure works as a user; this one always takes the first option
    let mut first = |q: &ClarificationQuestion| -> Choice { q.options[0].choice.clone() };
    let out = run_session(config, dist, &mut first).unwrap();
    println!("\n{}", out.transcript.to_json());
}
