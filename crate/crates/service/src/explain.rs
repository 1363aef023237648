//! Score tables shared by `sqlclarify explain` and the explain endpoint.

use serde::Serialize;
use std::fmt::Write as _;

use sqlclarify::candidate::CandidateDistribution;
use sqlclarify::eig::{score_all, ValueMass};
use sqlclarify::sql::{DecisionVariable, SlotKey, VarValue, VariableCategory, VariableId};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainRow {
    pub variable_id: VariableId,
    pub slot: SlotKey,
    pub category: VariableCategory,
    pub marginal: Vec<ValueMass>,
    pub conditional_entropy: f64,
    pub eig: f64,
    pub fast_path_eig: Option<f64>,
    /// Set on the variable the session asks (or would ask) next.
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainTable {
    pub entropy: f64,
    pub candidates: usize,
    /// Sorted by EIG, highest first; ties keep extraction order.
    pub rows: Vec<ExplainRow>,
}

impl ExplainTable {
    pub fn build(dist: &CandidateDistribution, variables: &[DecisionVariable], selected: Option<VariableId>) -> Self {
        let mut rows: Vec<ExplainRow> = score_all(dist, variables)
            .into_iter()
            .zip(variables)
            .map(|(s, v)| ExplainRow {
                variable_id: s.variable_id,
                slot: s.slot,
                category: v.category,
                marginal: s.marginal,
                conditional_entropy: s.conditional_entropy,
                eig: s.eig,
                fast_path_eig: s.fast_path_eig,
                selected: Some(s.variable_id) == selected,
            })
            .collect();
        rows.sort_by(|a, b| b.eig.total_cmp(&a.eig));
        Self { entropy: dist.entropy(), candidates: dist.len(), rows }
    }

    /// Plain-text rendering used by the CLI.
    pub fn render(&self) -> String {
        let mut out = format!("H(Y) = {:.3} over {} candidates\n", self.entropy, self.candidates);
        if self.rows.is_empty() {
            out.push_str("no decision variables: the candidates do not diverge\n");
            return out;
        }
        let _ = writeln!(out, "{:<4} {:<28} {:>8} {:>8} {:>10}  marginal", "var", "slot", "H(Y|X)", "EIG", "fast path");
        for row in &self.rows {
            let fast = row.fast_path_eig.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
            let mark = if row.selected { "*" } else { "" };
            let _ = writeln!(
                out,
                "{:<4} {:<28} {:>8.3} {:>8.3} {:>10}  {}",
                format!("{}{mark}", row.variable_id),
                truncate(&row.slot.to_string(), 28),
                row.conditional_entropy,
                row.eig,
                fast,
                render_marginal(&row.marginal)
            );
        }
        out
    }
}

pub fn render_marginal(marginal: &[ValueMass]) -> String {
    let parts: Vec<String> = marginal
        .iter()
        .map(|m| match &m.value {
            VarValue::Defined(v) => format!("{v} = {:.3}", m.probability),
            VarValue::Undefined => format!("(absent) = {:.3}", m.probability),
        })
        .collect();
    format!("{{{}}}", parts.join("; "))
}

fn truncate(s: &str, width: usize) -> String {
    if s.chars().count() <= width {
        s.to_string()
    } else {
        let head: String = s.chars().take(width - 3).collect();
        format!("{head}...")
    }
}
