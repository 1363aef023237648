use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

use super::fixture::Schema;
use super::generate::{CallMode, Generation, GenerationBackend, GenerationMetadata, WeightingMode};
use super::SourceError;
use crate::sql::tokenize_sql;

pub const DEFAULT_SAMPLES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Protocol(String),
}

impl From<TransportError> for SourceError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Unavailable(m) => SourceError::BackendUnavailable(m),
            TransportError::Protocol(m) => SourceError::BackendProtocol(m),
        }
    }
}

/// Sends one chat-completions request body and returns the response body.
pub trait ChatTransport {
    fn send(&mut self, request: &Value) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    /// `api_key_env` names the environment variable holding a bearer token.
    pub fn new(endpoint: impl Into<String>, api_key_env: Option<&str>, timeout: Duration) -> Self {
        let api_key = api_key_env.and_then(|name| std::env::var(name).ok());
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { endpoint: endpoint.into(), api_key, agent }
    }
}

impl ChatTransport for HttpTransport {
    fn send(&mut self, request: &Value) -> Result<Value, TransportError> {
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let response = req.send(request.to_string()).map_err(|e| match e {
            ureq::Error::StatusCode(code) => TransportError::Unavailable(format!("HTTP {code} from {}", self.endpoint)),
            other => TransportError::Unavailable(other.to_string()),
        })?;
        let text = response
            .into_body()
            .read_to_string()
            .map_err(|e| TransportError::Unavailable(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| TransportError::Protocol(format!("response is not JSON: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: Value,
    pub response: Value,
}

impl ChatTransport for Box<dyn ChatTransport + Send> {
    fn send(&mut self, request: &Value) -> Result<Value, TransportError> {
        (**self).send(request)
    }
}

/// Wraps a transport and keeps every successful exchange.
pub struct RecordingTransport<T> {
    inner: T,
    exchanges: Vec<Exchange>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self { inner, exchanges: Vec::new() }
    }

    pub fn exchanges(&self) -> &[Exchange] {
        &self.exchanges
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.exchanges).expect("exchanges serialize"))
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn send(&mut self, request: &Value) -> Result<Value, TransportError> {
        let response = self.inner.send(request)?;
        self.exchanges.push(Exchange { request: request.clone(), response: response.clone() });
        Ok(response)
    }
}

/// Answers requests from a recording, in order.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    exchanges: VecDeque<Exchange>,
}

impl ReplayTransport {
    pub fn new(exchanges: Vec<Exchange>) -> Self {
        Self { exchanges: exchanges.into() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SourceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SourceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let exchanges: Vec<Exchange> = serde_json::from_str(&text).map_err(|e| SourceError::Format {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(Self::new(exchanges))
    }

    pub fn remaining(&self) -> usize {
        self.exchanges.len()
    }
}

impl ChatTransport for ReplayTransport {
    fn send(&mut self, request: &Value) -> Result<Value, TransportError> {
        let next = self
            .exchanges
            .pop_front()
            .ok_or_else(|| TransportError::Unavailable("replay recording exhausted".into()))?;
        if next.request != *request {
            log::warn!("replayed request differs from the recorded one");
        }
        Ok(next.response)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub model: String,
    /// How frequency samples are requested.
    pub call_mode: CallMode,
    /// Samples drawn when the model reports no confidences.
    pub samples: usize,
    pub temperature: f64,
}

impl LlmConfig {
    pub fn new(model: impl Into<String>) -> Self {
        Self { model: model.into(), call_mode: CallMode::SingleCall, samples: DEFAULT_SAMPLES, temperature: 1.0 }
    }
}

const SYSTEM_PROMPT: &str = "You translate natural-language questions into SQLite queries.";

/// Generation backend over any chat-completions style endpoint.
pub struct LlmBackend<T = Box<dyn ChatTransport + Send>> {
    transport: T,
    config: LlmConfig,
}

impl LlmBackend<HttpTransport> {
    pub fn http(endpoint: &str, model: &str, api_key_env: Option<&str>) -> Self {
        Self::new(HttpTransport::new(endpoint, api_key_env, Duration::from_secs(120)), LlmConfig::new(model))
    }
}

impl<T: ChatTransport> LlmBackend<T> {
    pub fn new(transport: T, config: LlmConfig) -> Self {
        Self { transport, config }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    fn request(&self, user: String, n: usize, temperature: f64) -> Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": user},
            ],
            "n": n,
            "temperature": temperature,
        })
    }

    fn ranked_prompt(question: &str, schema: &Schema, n: usize) -> String {
        format!(
            "Database schema:\n{}\nQuestion: {question}\n\nPropose up to {n} distinct SQL queries that could be \
             meant. Reply with JSON only, in the form \
             {{\"candidates\": [{{\"sql\": \"...\", \"confidence\": 0.5}}]}}, confidences summing to 1.",
            schema.describe()
        )
    }

    fn sample_prompt(question: &str, schema: &Schema) -> String {
        format!("Database schema:\n{}\nQuestion: {question}\n\nReply with a single SQL query only.", schema.describe())
    }

    fn draw_samples(&mut self, question: &str, schema: &Schema) -> Result<(Vec<String>, usize), SourceError> {
        let k = self.config.samples.max(1);
        let prompt = Self::sample_prompt(question, schema);
        let mut samples = Vec::with_capacity(k);
        let requests = match self.config.call_mode {
            CallMode::SingleCall => {
                let body = self.request(prompt, k, self.config.temperature);
                samples.extend(message_contents(&self.transport.send(&body)?)?);
                1
            }
            CallMode::CallPerSample => {
                for _ in 0..k {
                    let body = self.request(prompt.clone(), 1, self.config.temperature);
                    samples.extend(message_contents(&self.transport.send(&body)?)?.into_iter().take(1));
                }
                k
            }
        };
        Ok((samples.iter().map(|s| extract_sql(s)).filter(|s| !s.is_empty()).collect(), requests))
    }
}

/// The `choices[*].message.content` strings of a response.
fn message_contents(response: &Value) -> Result<Vec<String>, SourceError> {
    let choices = response
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| SourceError::BackendProtocol("response has no choices array".into()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| SourceError::BackendProtocol("choice without message content".into()))
        })
        .collect()
}

/// Strips code fences and surrounding prose markers from a model reply.
pub fn extract_sql(content: &str) -> String {
    let trimmed = content.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        if let Some(sql) = v.get("sql").and_then(Value::as_str) {
            return sql.trim().to_string();
        }
    }
    let body = match trimmed.find("```") {
        Some(start) => {
            let after = &trimmed[start + 3..];
            let after = after.split_once('\n').map(|(lang, rest)| if lang.trim().chars().all(char::is_alphanumeric) { rest } else { after }).unwrap_or(after);
            after.split("```").next().unwrap_or(after)
        }
        None => trimmed,
    };
    body.trim().to_string()
}

/// Parses a ranked reply into `(sql, confidence)` pairs.
fn ranked_candidates(content: &str) -> Option<Vec<(String, Option<f64>)>> {
    let v: Value = serde_json::from_str(&extract_sql(content)).ok()?;
    let items = v.get("candidates")?.as_array()?;
    Some(
        items
            .iter()
            .filter_map(|item| {
                let sql = item.get("sql")?.as_str()?.trim().to_string();
                Some((sql, item.get("confidence").and_then(Value::as_f64)))
            })
            .collect(),
    )
}

/// Relative frequency of each distinct query (by normalized form) among
/// `samples`, most frequent first, ties in order of first appearance.
pub fn frequency_weights(samples: &[String]) -> Vec<(String, f64)> {
    let mut counts: Vec<(String, String, usize)> = Vec::new();
    for s in samples {
        let key = tokenize_sql(s).map(|t| t.to_sql()).unwrap_or_else(|_| s.trim().to_string());
        match counts.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.2 += 1,
            None => counts.push((key, s.clone(), 1)),
        }
    }
    counts.sort_by(|a, b| b.2.cmp(&a.2));
    let total = samples.len() as f64;
    counts.into_iter().map(|(_, text, c)| (text, c as f64 / total)).collect()
}

impl<T: ChatTransport> GenerationBackend for LlmBackend<T> {
    fn generate(&mut self, question: &str, schema: &Schema, n: usize) -> Result<Generation, SourceError> {
        let body = self.request(Self::ranked_prompt(question, schema, n), 1, 0.0);
        let response = self.transport.send(&body)?;
        let first = message_contents(&response)?
            .into_iter()
            .next()
            .ok_or_else(|| SourceError::BackendProtocol("response has no choices".into()))?;
        let backend = format!("llm:{}", self.config.model);

        if let Some(ranked) = ranked_candidates(&first) {
            if !ranked.is_empty() && ranked.iter().all(|(_, c)| c.is_some()) {
                return Ok(Generation {
                    candidates: ranked.into_iter().take(n).map(|(s, c)| (s, c.unwrap_or(0.0))).collect(),
                    metadata: GenerationMetadata {
                        backend,
                        weighting: WeightingMode::SelfReported,
                        call_mode: Some(CallMode::SingleCall),
                        requests: 1,
                    },
                });
            }
        }
        let (samples, requests) = self.draw_samples(question, schema)?;
        if samples.is_empty() {
            return Err(SourceError::BackendProtocol("no SQL found in sampled replies".into()));
        }
        let mut weighted = frequency_weights(&samples);
        weighted.truncate(n);
        Ok(Generation {
            candidates: weighted,
            metadata: GenerationMetadata {
                backend,
                weighting: WeightingMode::SampleFrequency,
                call_mode: Some(self.config.call_mode),
                requests: requests + 1,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::generate_candidates;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn reply(contents: &[&str]) -> Value {
        json!({"choices": contents.iter().map(|c| json!({"message": {"role": "assistant", "content": c}})).collect::<Vec<_>>()})
    }

    fn replay(responses: Vec<Value>) -> ReplayTransport {
        ReplayTransport::new(responses.into_iter().map(|response| Exchange { request: Value::Null, response }).collect())
    }

    #[test]
    fn self_reported_confidences() {
        let ranked = r#"```json
{"candidates": [{"sql": "SELECT a FROM t", "confidence": 0.6}, {"sql": "SELECT b FROM t", "confidence": 0.4}]}
```"#;
        let mut b = LlmBackend::new(replay(vec![reply(&[ranked])]), LlmConfig::new("m"));
        let g = generate_candidates(&mut b, "q", &Schema::default(), 5).unwrap();
        assert_eq!(g.metadata.weighting, WeightingMode::SelfReported);
        assert_eq!(g.distribution.probabilities().collect::<Vec<_>>(), vec![0.6, 0.4]);
    }

    #[test]
    fn frequency_fallback_over_twenty_samples() {
        let mut samples = Vec::new();
        samples.extend(std::iter::repeat_n("SELECT a FROM t", 10));
        samples.extend(std::iter::repeat_n("```sql\nSELECT b FROM t\n```", 6));
        samples.extend(std::iter::repeat_n("select c from t", 4));
        let unranked = r#"{"candidates": [{"sql": "SELECT a FROM t"}]}"#;
        let mut b = LlmBackend::new(
            replay(vec![reply(&[unranked]), reply(&samples)]),
            LlmConfig::new("m"),
        );
        let g = generate_candidates(&mut b, "q", &Schema::default(), 5).unwrap();
        assert_eq!(g.metadata.weighting, WeightingMode::SampleFrequency);
        assert_eq!(g.metadata.call_mode, Some(CallMode::SingleCall));
        let ps: Vec<f64> = g.distribution.probabilities().collect();
        assert_eq!(ps, vec![0.5, 0.3, 0.2]);
    }

    #[test]
    fn per_sample_calls_are_recorded() {
        let mut responses = vec![reply(&["not json at all"])];
        responses.extend((0..4).map(|i| reply(&[if i < 3 { "SELECT a FROM t" } else { "SELECT b FROM t" }])));
        let config = LlmConfig { samples: 4, call_mode: CallMode::CallPerSample, ..LlmConfig::new("m") };
        let mut b = LlmBackend::new(replay(responses), config);
        let g = generate_candidates(&mut b, "q", &Schema::default(), 5).unwrap();
        assert_eq!(g.metadata.call_mode, Some(CallMode::CallPerSample));
        assert_eq!(g.metadata.requests, 5);
        assert_eq!(g.distribution.probabilities().collect::<Vec<_>>(), vec![0.75, 0.25]);
    }

    #[test]
    fn malformed_response_is_protocol_error() {
        let mut b = LlmBackend::new(replay(vec![json!({"oops": 1})]), LlmConfig::new("m"));
        assert!(matches!(
            generate_candidates(&mut b, "q", &Schema::default(), 2),
            Err(SourceError::BackendProtocol(_))
        ));
    }

    #[test]
    fn recording_then_replaying_is_deterministic() {
        let ranked = r#"{"candidates": [{"sql": "SELECT a FROM t", "confidence": 0.9}, {"sql": "SELECT b FROM t", "confidence": 0.1}]}"#;
        let schema = Schema::default();
        let mut b = LlmBackend::new(RecordingTransport::new(replay(vec![reply(&[ranked])])), LlmConfig::new("m"));
        let first = generate_candidates(&mut b, "q", &schema, 3).unwrap();
        let rec = b.into_transport();
        assert_eq!(rec.exchanges().len(), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.json");
        rec.save(&path).unwrap();
        let mut b = LlmBackend::new(ReplayTransport::load(&path).unwrap(), LlmConfig::new("m"));
        let second = generate_candidates(&mut b, "q", &schema, 3).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn http_500_is_unavailable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            stream
                .write_all(b"HTTP/1.1 500 Internal Server Error\r\nContent-Length: 0\r\nConnection: close\r\n\r\n")
                .unwrap();
        });
        let mut b = LlmBackend::http(&format!("http://{addr}/v1/chat/completions"), "m", None);
        let err = generate_candidates(&mut b, "q", &Schema::default(), 2).unwrap_err();
        assert!(matches!(err, SourceError::BackendUnavailable(ref m) if m.contains("500")), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn sql_extraction() {
        assert_eq!(extract_sql("```sql\nSELECT 1\n```"), "SELECT 1");
        assert_eq!(extract_sql("  SELECT 1 "), "SELECT 1");
        assert_eq!(extract_sql(r#"{"sql": "SELECT 2"}"#), "SELECT 2");
    }
}
