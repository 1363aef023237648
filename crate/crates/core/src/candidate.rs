//! Probability bookkeeping over candidate SQL queries.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::sql::{tokenize_sql, ParseError, TokenizedQuery};

/// Tolerance used for every distribution-sum check.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CandidateError {
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("weight {index} is negative or not finite ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("no candidate satisfies the filter")]
    EmptyFilterResult,
    #[error("a distribution needs at least one candidate")]
    Empty,
    #[error("duplicate candidate id {0}")]
    DuplicateId(CandidateId),
    #[error("candidate {id} has probability {value} outside [0, 1]")]
    InvalidProbability { id: CandidateId, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("candidate {id} does not parse: {source}")]
    Parse { id: CandidateId, source: ParseError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateId(pub u32);

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCandidate {
    pub id: CandidateId,
    pub sql_text: String,
    pub tokens: TokenizedQuery,
    pub probability: f64,
}

impl WeightedCandidate {
    pub fn parse(id: CandidateId, sql_text: impl Into<String>, probability: f64) -> Result<Self, CandidateError> {
        let sql_text = sql_text.into();
        let tokens = tokenize_sql(&sql_text).map_err(|source| CandidateError::Parse { id, source })?;
        Ok(Self { id, sql_text, tokens, probability })
    }
}

/// Scales nonnegative weights to sum to one.
pub fn normalize(weights: &[f64]) -> Result<Vec<f64>, CandidateError> {
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
        return Err(CandidateError::NegativeWeight { index, value });
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(CandidateError::AllZeroWeights);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy_bits<I: IntoIterator<Item = f64>>(probabilities: I) -> f64 {
    let h: f64 = probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    // -0.0 and tiny negative rounding collapse to zero
    h.max(0.0)
}

/// The normalized candidate set for one natural-language question.
///
/// Candidates are kept in descending probability order, ties by id, and
/// zero-probability candidates are dropped at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDistribution {
    question: String,
    candidates: Vec<WeightedCandidate>,
}

impl CandidateDistribution {
    /// Builds a distribution from already-normalized candidates.
    pub fn new(question: impl Into<String>, candidates: Vec<WeightedCandidate>) -> Result<Self, CandidateError> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &candidates {
            if !seen.insert(c.id) {
                return Err(CandidateError::DuplicateId(c.id));
            }
            if !(0.0..=1.0).contains(&c.probability) {
                return Err(CandidateError::InvalidProbability { id: c.id, value: c.probability });
            }
        }
        let sum: f64 = candidates.iter().map(|c| c.probability).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(CandidateError::NotNormalized(sum));
        }
        Self::assemble(question.into(), candidates)
    }

    /// Parses and normalizes `(id, sql, weight)` triples.
    pub fn from_weighted<S: Into<String>>(
        question: impl Into<String>,
        entries: impl IntoIterator<Item = (CandidateId, S, f64)>,
    ) -> Result<Self, CandidateError> {
        let entries: Vec<(CandidateId, String, f64)> =
            entries.into_iter().map(|(id, sql, w)| (id, sql.into(), w)).collect();
        let weights: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let probabilities = normalize(&weights)?;
        let mut seen = std::collections::BTreeSet::new();
        let mut candidates = Vec::with_capacity(entries.len());
        for ((id, sql, _), p) in entries.into_iter().zip(probabilities) {
            if !seen.insert(id) {
                return Err(CandidateError::DuplicateId(id));
            }
            candidates.push(WeightedCandidate::parse(id, sql, p)?);
        }
        Self::assemble(question.into(), candidates)
    }

    fn assemble(question: String, mut candidates: Vec<WeightedCandidate>) -> Result<Self, CandidateError> {
        candidates.retain(|c| c.probability > 0.0);
        if candidates.is_empty() {
            return Err(CandidateError::Empty);
        }
        candidates.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.id.cmp(&b.id)));
        Ok(Self { question, candidates })
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn candidates(&self) -> &[WeightedCandidate] {
        &self.candidates
    }

    pub fn iter(&self) -> std::slice::Iter<'_, WeightedCandidate> {
        self.candidates.iter()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, id: CandidateId) -> Option<&WeightedCandidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.candidates.iter().map(|c| c.probability)
    }

    pub fn entropy(&self) -> f64 {
        entropy_bits(self.probabilities())
    }

    /// Keeps the candidates satisfying `keep` and rescales them to sum to one.
    pub fn filter_and_renormalize<F>(&self, keep: F) -> Result<Self, CandidateError>
    where
        F: Fn(&WeightedCandidate) -> bool,
    {
        let survivors: Vec<&WeightedCandidate> = self.candidates.iter().filter(|c| keep(c)).collect();
        let mass: f64 = survivors.iter().map(|c| c.probability).sum();
        if survivors.is_empty() || mass <= 0.0 {
            return Err(CandidateError::EmptyFilterResult);
        }
        let candidates = survivors
            .into_iter()
            .map(|c| WeightedCandidate { probability: c.probability / mass, ..c.clone() })
            .collect();
        Self::assemble(self.question.clone(), candidates)
    }

    /// The most probable candidate; ties go to the smallest id.
    pub fn top_candidate(&self) -> &WeightedCandidate {
        // ordering invariant puts the argmax first
        &self.candidates[0]
    }

    pub(crate) fn from_parts_unchecked(question: String, candidates: Vec<WeightedCandidate>) -> Result<Self, CandidateError> {
        Self::assemble(question, candidates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(ps: &[f64]) -> CandidateDistribution {
        CandidateDistribution::from_weighted(
            "q",
            ps.iter().enumerate().map(|(i, &p)| (CandidateId(i as u32 + 1), format!("SELECT c{i} FROM t"), p)),
        )
        .unwrap()
    }

    fn probs_by_id(d: &CandidateDistribution) -> Vec<(u32, f64)> {
        let mut v: Vec<(u32, f64)> = d.iter().map(|c| (c.id.0, c.probability)).collect();
        v.sort_by_key(|e| e.0);
        v
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 1.0, 1.0]).unwrap(), vec![0.5, 0.25, 0.25]);
        assert_eq!(normalize(&[0.4, 0.2, 0.2, 0.2]).unwrap(), vec![0.4, 0.2, 0.2, 0.2]);
        assert_eq!(normalize(&[5.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn normalize_errors() {
        assert_eq!(normalize(&[0.0, 0.0]), Err(CandidateError::AllZeroWeights));
        assert_eq!(normalize(&[]), Err(CandidateError::AllZeroWeights));
        assert!(matches!(normalize(&[1.0, -0.5]), Err(CandidateError::NegativeWeight { index: 1, .. })));
        assert!(matches!(normalize(&[f64::NAN]), Err(CandidateError::NegativeWeight { index: 0, .. })));
    }

    #[test]
    fn entropy_examples() {
        assert!((dist(&[0.4, 0.2, 0.2, 0.2]).entropy() - 1.922).abs() < 1e-3);
        assert_eq!(dist(&[1.0]).entropy(), 0.0);
        assert!((dist(&[1.0; 8]).entropy() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_candidates_are_dropped() {
        let d = dist(&[0.5, 0.0, 0.5]);
        assert_eq!(d.len(), 2);
        assert!(d.get(CandidateId(2)).is_none());
    }

    #[test]
    fn filter_examples() {
        let d = dist(&[0.4, 0.2, 0.2, 0.2]);
        let f = d.filter_and_renormalize(|c| c.id.0 <= 3).unwrap();
        assert_eq!(probs_by_id(&f), vec![(1, 0.5), (2, 0.25), (3, 0.25)]);
        assert_eq!(d.filter_and_renormalize(|_| true).unwrap(), d);
        let two = dist(&[0.7, 0.3]);
        assert_eq!(probs_by_id(&two.filter_and_renormalize(|c| c.id.0 == 2).unwrap()), vec![(2, 1.0)]);
        assert_eq!(d.filter_and_renormalize(|_| false), Err(CandidateError::EmptyFilterResult));
    }

    #[test]
    fn top_candidate_and_ties() {
        assert_eq!(dist(&[0.4, 0.2, 0.2, 0.2]).top_candidate().id, CandidateId(1));
        assert_eq!(dist(&[0.5, 0.5]).top_candidate().id, CandidateId(1));
        let reversed = CandidateDistribution::from_weighted(
            "q",
            vec![(CandidateId(9), "SELECT a FROM t", 1.0), (CandidateId(3), "SELECT b FROM t", 1.0)],
        )
        .unwrap();
        assert_eq!(reversed.top_candidate().id, CandidateId(3));
        assert_eq!(dist(&[1.0]).top_candidate().id, CandidateId(1));
    }

    #[test]
    fn construction_validates() {
        let c = |id: u32, p: f64| WeightedCandidate::parse(CandidateId(id), "SELECT a FROM t", p).unwrap();
        assert!(matches!(CandidateDistribution::new("q", vec![c(1, 0.5), c(1, 0.5)]), Err(CandidateError::DuplicateId(_))));
        assert!(matches!(CandidateDistribution::new("q", vec![c(1, 0.5)]), Err(CandidateError::NotNormalized(_))));
        assert!(matches!(CandidateDistribution::new("q", vec![c(1, 1.5), c(2, -0.5)]), Err(CandidateError::InvalidProbability { .. })));
        assert!(matches!(CandidateDistribution::new("q", vec![]), Err(CandidateError::NotNormalized(_))));
        assert!(matches!(
            CandidateDistribution::from_weighted("q", vec![(CandidateId(1), "DELETE FROM t", 1.0)]),
            Err(CandidateError::Parse { .. })
        ));
    }
}
