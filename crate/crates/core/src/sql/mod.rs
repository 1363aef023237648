//! SQL-aware tokenization, cross-candidate diffing and clause-level matching.

mod lexer;
mod matching;
mod tokenize;
mod tree;
mod variables;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matching::{duplicate_collapse, exact_set_match, mask_literals};
pub use tokenize::{tokenize_sql, ClauseKind, ClauseSegment, TokenizedQuery};
pub use tree::{BranchingTree, TreeError, TreeNode};
pub use variables::{
    extract_decision_variables, slot_value, slot_values, DecisionVariable, SlotKey, VarValue, VariableCategory,
    VariableId,
};

pub(crate) use lexer::lex;
use lexer::TokenKind;

/// Malformed SQL, located by byte offset into the input.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(offset: usize, message: impl Into<String>) -> Self {
        Self { offset, message: message.into() }
    }
}

/// Table names read from `FROM` lists and `JOIN`s, sub-selects included,
/// lowercased and deduplicated in order of appearance.
pub fn referenced_tables(sql: &str) -> Result<Vec<String>, ParseError> {
    let tokens = lex(sql)?;
    let mut tables: Vec<String> = Vec::new();
    let mut in_from = false;
    let mut expect_table = false;
    for t in &tokens {
        match t.kind {
            TokenKind::Keyword if t.text == "from" || t.text == "join" => {
                in_from = t.text == "from";
                expect_table = true;
                continue;
            }
            TokenKind::Keyword if t.text == "as" => {}
            TokenKind::Keyword => in_from = false,
            TokenKind::Comma if in_from => {
                expect_table = true;
                continue;
            }
            TokenKind::Ident | TokenKind::QuotedIdent if expect_table => {
                let name = t.text.trim_matches(|c| matches!(c, '"' | '`' | '[' | ']')).to_ascii_lowercase();
                if !tables.contains(&name) {
                    tables.push(name);
                }
            }
            TokenKind::LParen => in_from = false,
            _ => {}
        }
        expect_table = false;
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_from_lists_joins_and_subselects() {
        let t = referenced_tables(
            "SELECT e.name FROM employees AS e JOIN departments d ON e.dept_id = d.id \
             WHERE e.id IN (SELECT employee_id FROM awards, \"Projects\" p)",
        )
        .unwrap();
        assert_eq!(t, ["employees", "departments", "awards", "projects"]);
        assert_eq!(referenced_tables("SELECT a, b FROM t").unwrap(), ["t"]);
    }
}
