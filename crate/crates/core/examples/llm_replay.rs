//! Candidate generation through the chat adapter, recorded once and then
//! replayed offline. A canned model stands in for the remote endpoint.
//!
//!     cargo run -p sqlclarify --example llm_replay

use serde_json::{json, Value};

use sqlclarify::source::{
    generate_candidates, load_fixtures, CallMode, ChatTransport, LlmBackend, LlmConfig, RecordingTransport,
    ReplayTransport, TransportError,
};

/// Ignores confidences on the ranked request, so the adapter falls back to
/// sampling, and answers samples from a fixed pool.
struct CannedModel {
    pool: Vec<&'static str>,
    next: usize,
}

impl ChatTransport for CannedModel {
    fn send(&mut self, request: &Value) -> Result<Value, TransportError> {
        let n = request["n"].as_u64().unwrap_or(1) as usize;
        let prompt = request["messages"][1]["content"].as_str().unwrap_or_default();
        let contents: Vec<String> = if prompt.contains("\"candidates\"") {
            vec![json!({"candidates": [{"sql": self.pool[0]}, {"sql": self.pool[1]}]}).to_string()]
        } else {
            (0..n)
                .map(|_| {
                    self.next += 1;
                    format!("```sql\n{}\n```", self.pool[self.next * 7 % self.pool.len()])
                })
                .collect()
        };
        let choices: Vec<Value> = contents.iter().map(|c| json!({"message": {"role": "assistant", "content": c}})).collect();
        Ok(json!({ "choices": choices }))
    }
}

fn main() {
    let inst = load_fixtures(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig3.json")).unwrap().remove(0);
    let model = CannedModel {
        pool: vec![
            "SELECT * FROM employees WHERE join_date > '2020-01-01' AND department = 'sales'",
            "SELECT * FROM employees WHERE join_date >= '2021-01-01' AND department = 'sales'",
            "SELECT name FROM employees WHERE join_date > '2020-01-01' AND department = 'sales'",
            "select * from employees where department = 'sales' and join_date > '2020-01-01'",
        ],
        next: 0,
    };
    let config = LlmConfig { samples: 12, call_mode: CallMode::SingleCall, ..LlmConfig::new("canned") };

    let mut live = LlmBackend::new(RecordingTransport::new(model), config.clone());
    let first = generate_candidates(&mut live, &inst.question, &inst.schema, 8).unwrap();
    println!("{:?}, {} request(s)", first.metadata.weighting, first.metadata.requests);
    for c in first.distribution.iter() {
        println!("  {:.3}  {}", c.probability, c.sql_text);
    }

    let dir = tempfile_dir();
    let path = dir.join("recording.json");
    live.into_transport().save(&path).unwrap();

    let mut offline = LlmBackend::new(ReplayTransport::load(&path).unwrap(), config);
    let again = generate_candidates(&mut offline, &inst.question, &inst.schema, 8).unwrap();
    assert_eq!(again.distribution, first.distribution);
    println!("replayed {} from {}", again.distribution.len(), path.display());
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("sqlclarify-llm-replay-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
