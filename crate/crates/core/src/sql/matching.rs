use std::collections::BTreeSet;

use super::lexer::{lex, render, Token, TokenKind};
use super::tokenize::{ClauseKind, TokenizedQuery};
use super::variables::slot_values;
use crate::candidate::{CandidateDistribution, WeightedCandidate};

const PLACEHOLDER: &str = "?";

/// Replaces every string and number literal with a single placeholder.
/// Sub-selects are masked as well since they re-lex from their normal form.
pub fn mask_literals(element: &str) -> String {
    match lex(element) {
        Ok(tokens) => {
            let masked: Vec<Token> = tokens
                .into_iter()
                .map(|t| {
                    if t.is_literal() {
                        Token { kind: TokenKind::Number, text: PLACEHOLDER.to_string(), offset: t.offset }
                    } else {
                        t
                    }
                })
                .collect();
            render(&masked)
        }
        Err(_) => element.to_string(),
    }
}

fn masked_set(q: &TokenizedQuery, kind: ClauseKind) -> BTreeSet<String> {
    q.elements(kind).iter().map(|e| mask_literals(e)).collect()
}

/// Clause-by-clause set equality with literal values masked.
pub fn exact_set_match(predicted: &TokenizedQuery, gold: &TokenizedQuery) -> bool {
    ClauseKind::ALL
        .iter()
        .all(|&kind| masked_set(predicted, kind) == masked_set(gold, kind))
}

/// Merges candidates with the same normalized form, summing probabilities
/// into the earliest id.
pub fn duplicate_collapse(dist: &CandidateDistribution) -> CandidateDistribution {
    let mut merged: Vec<(Vec<(super::SlotKey, String)>, WeightedCandidate)> = Vec::new();
    let mut by_id: Vec<&WeightedCandidate> = dist.iter().collect();
    by_id.sort_by_key(|c| c.id);
    for c in by_id {
        let mut key = slot_values(&c.tokens);
        key.sort();
        match merged.iter_mut().find(|(k, _)| *k == key) {
            Some((_, kept)) => kept.probability += c.probability,
            None => merged.push((key, c.clone())),
        }
    }
    let candidates = merged.into_iter().map(|(_, c)| c).collect();
    CandidateDistribution::from_parts_unchecked(dist.question().to_string(), candidates)
        .expect("collapse keeps at least one candidate")
}
