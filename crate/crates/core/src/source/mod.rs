//! Where candidate sets come from: fixture files, and an optional adapter
//! for chat-completions style LLM endpoints.

mod fixture;
mod generate;
mod llm;

use thiserror::Error;

use crate::candidate::CandidateError;

pub use fixture::{
    fixtures_to_string, load_fixtures, parse_fixtures, save_fixtures, Column, Difficulty, FixtureCandidate,
    FixtureInstance, Schema, Table,
};
pub use generate::{
    generate_candidates, CallMode, FixtureBackend, Generated, Generation, GenerationBackend, GenerationMetadata,
    WeightingMode,
};
pub use llm::{
    extract_sql, frequency_weights, ChatTransport, Exchange, HttpTransport, LlmBackend, LlmConfig, RecordingTransport,
    ReplayTransport, TransportError, DEFAULT_SAMPLES,
};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("format error at line {line}, column {column}: {message}")]
    Format { line: usize, column: usize, message: String },
    #[error("invalid instance '{instance_id}' at {field}: {message}")]
    Validation { instance_id: String, field: String, message: String },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend protocol error: {0}")]
    BackendProtocol(String),
    #[error("no candidate returned by the backend could be parsed")]
    AllCandidatesUnparseable,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Candidate(#[from] CandidateError),
}
