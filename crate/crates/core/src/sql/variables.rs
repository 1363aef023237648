use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::lexer::{lex, render, TokenKind};
use super::tokenize::{ClauseKind, TokenizedQuery, DISTINCT_MARKER};
use crate::candidate::{CandidateDistribution, CandidateId};

/// Where in a query a decision variable lives: a clause plus, for WHERE and
/// HAVING, the column the conjunct constrains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotKey {
    pub clause: ClauseKind,
    pub key: String,
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.clause)
        } else {
            write!(f, "{}:{}", self.clause, self.key)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VariableCategory {
    SelectColumns,
    Aggregation,
    WhereCondition,
    JoinPath,
    TableChoice,
    GroupOrderModifier,
}

/// Value of a decision variable on one candidate. Serialized as the label
/// string, or `null` for `Undefined`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarValue {
    Defined(String),
    Undefined,
}

impl VarValue {
    pub fn label(&self) -> Option<&str> {
        match self {
            VarValue::Defined(s) => Some(s),
            VarValue::Undefined => None,
        }
    }
}

impl fmt::Display for VarValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarValue::Defined(s) => f.write_str(s),
            VarValue::Undefined => f.write_str("UNDEFINED"),
        }
    }
}

impl Serialize for VarValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.label().serialize(s)
    }
}

impl<'de> Deserialize<'de> for VarValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Option::<String>::deserialize(d)?.map_or(VarValue::Undefined, VarValue::Defined))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableId(pub usize);

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{}", self.0)
    }
}

/// A point where candidates diverge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVariable {
    pub id: VariableId,
    pub slot: SlotKey,
    pub category: VariableCategory,
    /// Defined values in first-occurrence order.
    pub domain: Vec<String>,
    pub assignment: BTreeMap<CandidateId, VarValue>,
}

impl DecisionVariable {
    pub fn value_of(&self, id: CandidateId) -> &VarValue {
        self.assignment.get(&id).unwrap_or(&VarValue::Undefined)
    }

    pub fn has_undefined(&self) -> bool {
        self.assignment.values().any(|v| *v == VarValue::Undefined)
    }

    /// Defined on every candidate.
    pub fn is_complete(&self) -> bool {
        !self.has_undefined()
    }

    /// A single defined value against its absence.
    pub fn is_presence(&self) -> bool {
        self.domain.len() == 1
    }

    /// Observed values: the domain, then `Undefined` if any candidate lacks the slot.
    pub fn observed_values(&self) -> Vec<VarValue> {
        let mut values: Vec<VarValue> = self.domain.iter().cloned().map(VarValue::Defined).collect();
        if self.has_undefined() {
            values.push(VarValue::Undefined);
        }
        values
    }
}

const AGGREGATES: &[&str] = &["avg(", "count(", "max(", "min(", "sum("];

fn has_aggregate(label: &str) -> bool {
    let lower = label.to_ascii_lowercase();
    AGGREGATES.iter().any(|a| lower.contains(a))
}

/// Column a condition constrains: the first non-function identifier (the
/// column part when qualified), or the text before the first operator.
fn condition_key(element: &str) -> String {
    let Ok(tokens) = lex(element) else {
        return element.to_string();
    };
    for (i, t) in tokens.iter().enumerate() {
        if matches!(t.kind, TokenKind::Ident | TokenKind::QuotedIdent) {
            let mut name = t;
            if tokens.get(i + 1).is_some_and(|n| n.kind == TokenKind::Dot) {
                if let Some(col) = tokens.get(i + 2) {
                    if matches!(col.kind, TokenKind::Ident | TokenKind::QuotedIdent) {
                        name = col;
                    }
                }
            }
            let bare = name.text.trim_matches(|c| matches!(c, '"' | '`' | '[' | ']'));
            return bare.to_ascii_lowercase();
        }
    }
    let head = tokens
        .iter()
        .position(|t| t.kind == TokenKind::Operator || t.kind == TokenKind::Keyword)
        .unwrap_or(tokens.len());
    if head == 0 {
        render(&tokens)
    } else {
        render(&tokens[..head])
    }
}

fn sorted_join(elements: &[String], sep: &str) -> String {
    let mut v: Vec<&str> = elements.iter().map(String::as_str).collect();
    v.sort_unstable();
    v.join(sep)
}

/// Slot values of one query, in clause order then occurrence order.
///
/// SELECT, FROM and GROUP BY compare as sets; JOIN, ORDER BY, LIMIT and set
/// operators as sequences; WHERE and HAVING conjuncts are grouped by the
/// column they constrain.
pub fn slot_values(q: &TokenizedQuery) -> Vec<(SlotKey, String)> {
    let mut out = Vec::new();
    for seg in &q.segments {
        let whole = |value: String| (SlotKey { clause: seg.kind, key: String::new() }, value);
        match seg.kind {
            ClauseKind::Select => {
                let (distinct, cols) = match seg.elements.first() {
                    Some(first) if first == DISTINCT_MARKER => (true, &seg.elements[1..]),
                    _ => (false, &seg.elements[..]),
                };
                let body = sorted_join(cols, ", ");
                out.push(whole(if distinct { format!("distinct {body}") } else { body }));
            }
            ClauseKind::From | ClauseKind::GroupBy => out.push(whole(sorted_join(&seg.elements, ", "))),
            ClauseKind::OrderBy => out.push(whole(seg.elements.join(", "))),
            ClauseKind::Join | ClauseKind::Limit | ClauseKind::Other => out.push(whole(seg.elements.join(" "))),
            ClauseKind::Where | ClauseKind::Having => {
                let mut groups: Vec<(String, Vec<String>)> = Vec::new();
                for el in &seg.elements {
                    let key = condition_key(el);
                    match groups.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, v)) => v.push(el.clone()),
                        None => groups.push((key, vec![el.clone()])),
                    }
                }
                for (key, els) in groups {
                    out.push((SlotKey { clause: seg.kind, key }, sorted_join(&els, " and ")));
                }
            }
        }
    }
    out
}

/// The value a query takes at `slot`.
pub fn slot_value(q: &TokenizedQuery, slot: &SlotKey) -> VarValue {
    slot_values(q)
        .into_iter()
        .find(|(k, _)| k == slot)
        .map_or(VarValue::Undefined, |(_, v)| VarValue::Defined(v))
}

fn category_for(slot: &SlotKey, domain: &[String]) -> VariableCategory {
    match slot.clause {
        ClauseKind::Select if domain.iter().any(|v| has_aggregate(v)) => VariableCategory::Aggregation,
        ClauseKind::Select => VariableCategory::SelectColumns,
        ClauseKind::From => VariableCategory::TableChoice,
        ClauseKind::Join => VariableCategory::JoinPath,
        ClauseKind::Where | ClauseKind::Having => VariableCategory::WhereCondition,
        ClauseKind::GroupBy | ClauseKind::OrderBy | ClauseKind::Limit | ClauseKind::Other => {
            VariableCategory::GroupOrderModifier
        }
    }
}

/// One variable per slot on which candidates disagree, ordered by clause
/// then by first occurrence in distribution order. Empty when every
/// candidate has the same slot values.
pub fn extract_decision_variables(dist: &CandidateDistribution) -> Vec<DecisionVariable> {
    let per_candidate: Vec<(CandidateId, HashMap<SlotKey, String>)> = dist
        .iter()
        .map(|c| (c.id, slot_values(&c.tokens).into_iter().collect()))
        .collect();

    let mut order: Vec<SlotKey> = Vec::new();
    for c in dist.iter() {
        for (k, _) in slot_values(&c.tokens) {
            if !order.contains(&k) {
                order.push(k);
            }
        }
    }
    // stable: keeps first-occurrence order within a clause
    order.sort_by_key(|k| k.clause);

    let mut variables = Vec::new();
    for slot in order {
        let mut domain: Vec<String> = Vec::new();
        let mut assignment = BTreeMap::new();
        for (id, slots) in &per_candidate {
            let value = match slots.get(&slot) {
                Some(v) => {
                    if !domain.contains(v) {
                        domain.push(v.clone());
                    }
                    VarValue::Defined(v.clone())
                }
                None => VarValue::Undefined,
            };
            assignment.insert(*id, value);
        }
        let undefined = assignment.values().any(|v| *v == VarValue::Undefined);
        if domain.len() + usize::from(undefined) < 2 {
            continue;
        }
        let category = category_for(&slot, &domain);
        variables.push(DecisionVariable {
            id: VariableId(variables.len() + 1),
            slot,
            category,
            domain,
            assignment,
        });
    }
    variables
}
