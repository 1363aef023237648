use serde::{Deserialize, Serialize};

use super::fixture::{FixtureInstance, Schema};
use super::SourceError;
use crate::candidate::{CandidateDistribution, CandidateId};
use crate::sql::{duplicate_collapse, tokenize_sql};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    /// Weights authored in a fixture.
    Fixture,
    /// Confidence scores reported by the model for each candidate.
    SelfReported,
    /// Relative frequency over repeated samples.
    SampleFrequency,
}

/// How samples were requested from a remote model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallMode {
    /// One request asking for all samples at once.
    SingleCall,
    /// One request per sample.
    CallPerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetadata {
    pub backend: String,
    pub weighting: WeightingMode,
    pub call_mode: Option<CallMode>,
    pub requests: usize,
}

/// Raw backend output: unnormalized `(sql_text, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub candidates: Vec<(String, f64)>,
    pub metadata: GenerationMetadata,
}

pub trait GenerationBackend {
    /// Returns at most `n` weighted SQL strings for `question`.
    fn generate(&mut self, question: &str, schema: &Schema, n: usize) -> Result<Generation, SourceError>;
}

/// Replays the candidates of fixture instances, looked up by question text.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    instances: Vec<FixtureInstance>,
}

impl FixtureBackend {
    pub fn new(instances: Vec<FixtureInstance>) -> Self {
        Self { instances }
    }
}

impl GenerationBackend for FixtureBackend {
    fn generate(&mut self, question: &str, _schema: &Schema, n: usize) -> Result<Generation, SourceError> {
        let inst = self
            .instances
            .iter()
            .find(|i| i.question == question)
            .ok_or_else(|| SourceError::BackendUnavailable(format!("no fixture for question '{question}'")))?;
        Ok(Generation {
            candidates: inst.candidates.iter().take(n).map(|c| (c.sql_text.clone(), c.weight)).collect(),
            metadata: GenerationMetadata {
                backend: "fixture".into(),
                weighting: WeightingMode::Fixture,
                call_mode: None,
                requests: 0,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub distribution: CandidateDistribution,
    pub metadata: GenerationMetadata,
    /// Texts that failed to parse, excluded before normalization.
    pub dropped: Vec<String>,
}

/// Calls the backend once and turns its output into a distribution:
/// unparseable texts are dropped, the rest normalized and duplicates merged.
pub fn generate_candidates(
    backend: &mut dyn GenerationBackend,
    question: &str,
    schema: &Schema,
    n: usize,
) -> Result<Generated, SourceError> {
    if n == 0 {
        return Err(SourceError::InvalidRequest("n must be at least 1".into()));
    }
    let mut generation = backend.generate(question, schema, n)?;
    if generation.candidates.len() > n {
        log::warn!("backend returned {} candidates for n = {n}; truncating", generation.candidates.len());
        generation.candidates.truncate(n);
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (sql, weight) in generation.candidates {
        match tokenize_sql(&sql) {
            Ok(_) if weight.is_finite() && weight >= 0.0 => kept.push((sql, weight)),
            Ok(_) => {
                log::warn!("dropping candidate with weight {weight}: {sql}");
                dropped.push(sql);
            }
            Err(e) => {
                log::warn!("dropping unparseable candidate ({e}): {sql}");
                dropped.push(sql);
            }
        }
    }
    if kept.is_empty() {
        return Err(SourceError::AllCandidatesUnparseable);
    }
    let dist = CandidateDistribution::from_weighted(
        question,
        kept.iter().enumerate().map(|(i, (s, w))| (CandidateId(i as u32 + 1), s.as_str(), *w)),
    )?;
    Ok(Generated { distribution: duplicate_collapse(&dist), metadata: generation.metadata, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse_fixtures;

    struct Canned(Vec<(String, f64)>);

    impl GenerationBackend for Canned {
        fn generate(&mut self, _: &str, _: &Schema, _: usize) -> Result<Generation, SourceError> {
            Ok(Generation {
                candidates: self.0.clone(),
                metadata: GenerationMetadata {
                    backend: "canned".into(),
                    weighting: WeightingMode::SelfReported,
                    call_mode: None,
                    requests: 1,
                },
            })
        }
    }

    fn canned(sqls: &[&str]) -> Canned {
        Canned(sqls.iter().map(|s| (s.to_string(), 1.0)).collect())
    }

    #[test]
    fn duplicates_collapse() {
        let mut b = canned(&[
            "SELECT a FROM t",
            "SELECT b FROM t",
            "select a from t",
            "SELECT c FROM t",
            "SELECT d FROM t",
            "SELECT  e FROM t",
            "SELECT e FROM t;",
        ]);
        let g = generate_candidates(&mut b, "q", &Schema::default(), 6).unwrap();
        assert_eq!(g.distribution.len(), 5);
        assert!((g.distribution.get(CandidateId(1)).unwrap().probability - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unparseable_mass_is_excluded() {
        let mut b = Canned(vec![("SELECT a FROM t".into(), 1.0), ("SELECT (".into(), 3.0)]);
        let g = generate_candidates(&mut b, "q", &Schema::default(), 5).unwrap();
        assert_eq!(g.distribution.len(), 1);
        assert_eq!(g.distribution.top_candidate().probability, 1.0);
        assert_eq!(g.dropped, vec!["SELECT (".to_string()]);

        let mut bad = canned(&["SELEC nothing", "((("]);
        assert!(matches!(
            generate_candidates(&mut bad, "q", &Schema::default(), 2),
            Err(SourceError::AllCandidatesUnparseable)
        ));
        assert!(matches!(generate_candidates(&mut bad, "q", &Schema::default(), 0), Err(SourceError::InvalidRequest(_))));
    }

    #[test]
    fn fixture_replay_is_identity() {
        let f = parse_fixtures(
            r#"[{"instance_id": "x", "question": "which", "schema": {"tables": [{"name": "t", "columns": [{"name": "a", "type": "INT"}]}]},
                 "candidates": [{"sql_text": "SELECT a FROM t", "weight": 0.7}, {"sql_text": "SELECT * FROM t", "weight": 0.3}],
                 "gold_sql": "SELECT a FROM t"}]"#,
        )
        .unwrap();
        let mut backend = FixtureBackend::new(f.clone());
        let g = generate_candidates(&mut backend, "which", &f[0].schema, 10).unwrap();
        assert_eq!(g.distribution, f[0].distribution().unwrap());
        assert_eq!(g.metadata.weighting, WeightingMode::Fixture);
    }
}
