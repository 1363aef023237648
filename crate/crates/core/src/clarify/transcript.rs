use serde::{Deserialize, Serialize};

use super::question::{Answer, ClarificationQuestion};
use super::session::{FinalResult, SessionConfig};
use crate::candidate::{CandidateDistribution, CandidateId, WeightedCandidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub id: CandidateId,
    pub sql: String,
    pub probability: f64,
}

impl CandidateSummary {
    pub fn of(c: &WeightedCandidate) -> Self {
        Self { id: c.id, sql: c.sql_text.clone(), probability: c.probability }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub index: usize,
    pub question: ClarificationQuestion,
    pub answer: Answer,
    /// `None` when the answer left no candidate.
    pub entropy_after: Option<f64>,
    pub top_after: Option<CandidateSummary>,
    pub survivors: usize,
}

/// Full record of a session, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub question: String,
    pub config: Option<SessionConfig>,
    pub initial_candidates: Vec<CandidateSummary>,
    pub initial_entropy: f64,
    pub turns: Vec<TurnRecord>,
    /// Entropy before the first question, then after every answer.
    pub entropy_trace: Vec<f64>,
    pub final_result: Option<FinalResult>,
    pub failure: Option<String>,
}

impl SessionTranscript {
    pub fn start(dist: &CandidateDistribution, config: SessionConfig) -> Self {
        let h = dist.entropy();
        Self {
            question: dist.question().to_string(),
            config: Some(config),
            initial_candidates: dist.iter().map(CandidateSummary::of).collect(),
            initial_entropy: h,
            turns: Vec::new(),
            entropy_trace: vec![h],
            final_result: None,
            failure: None,
        }
    }

    pub fn final_sql(&self) -> Option<&str> {
        self.final_result.as_ref().map(|r| r.sql.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcripts always serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
