use serde::{Deserialize, Serialize};
use std::fmt;

use crate::sql::lex;
use crate::sql::{ClauseKind, DecisionVariable, SlotKey, VariableCategory, VariableId};

/// What the user picked: one of the variable's values, or none of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Value(String),
    NoneOfThese,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Value(v) => f.write_str(v),
            Choice::NoneOfThese => f.write_str("NONE_OF_THESE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOption {
    pub choice: Choice,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarificationQuestion {
    pub variable_id: VariableId,
    pub slot: SlotKey,
    pub category: VariableCategory,
    pub text: String,
    /// Domain values in order, then `NoneOfThese`.
    pub options: Vec<QuestionOption>,
}

impl ClarificationQuestion {
    pub fn option(&self, index: usize) -> Option<&QuestionOption> {
        self.options.get(index)
    }

    pub fn offers(&self, choice: &Choice) -> bool {
        self.options.iter().any(|o| o.choice == *choice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub variable_id: VariableId,
    pub chosen: Choice,
}

pub const NONE_OF_THESE_DISPLAY: &str = "None of these";

fn pretty_operator(op: &str) -> &str {
    match op {
        ">=" => "≥",
        "<=" => "≤",
        "<>" => "≠",
        other => other,
    }
}

/// Display strings for condition values: the shared column is dropped and
/// ordering comparisons against a single literal are written compactly.
fn condition_displays(var: &DecisionVariable) -> Vec<String> {
    let column = var.slot.key.as_str();
    var.domain
        .iter()
        .map(|label| {
            let Some(rest) = strip_column(label, column) else {
                return label.clone();
            };
            let mut parts = rest.splitn(2, ' ');
            let op = parts.next().unwrap_or("");
            let operand = parts.next().unwrap_or("");
            let single_literal = !operand.is_empty() && !operand.contains(' ');
            if matches!(op, ">" | "<" | ">=" | "<=") && single_literal {
                format!("{}{}", pretty_operator(op), operand.trim_matches('\''))
            } else {
                format!("{} {}", pretty_operator(op), operand).trim().to_string()
            }
        })
        .collect()
}

/// `label` minus a leading (possibly qualified) reference to `column`.
fn strip_column<'a>(label: &'a str, column: &str) -> Option<&'a str> {
    if label.contains(" and ") {
        return None;
    }
    let (head, rest) = label.split_once(' ')?;
    let bare = head.rsplit('.').next().unwrap_or(head);
    let bare = bare.trim_matches(|c| matches!(c, '"' | '`' | '[' | ']'));
    bare.eq_ignore_ascii_case(column).then_some(rest)
}

/// Finds the words of the question a condition is about: the first question
/// word equal to a literal in the variable's values, with its preceding word.
fn condition_phrase(var: &DecisionVariable, question_context: &str) -> String {
    let mut literals: Vec<String> = Vec::new();
    for label in &var.domain {
        let Ok(tokens) = lex(label) else { continue };
        for t in tokens.iter().filter(|t| t.is_literal()) {
            let piece = t.text.trim_matches('\'');
            literals.push(piece.to_ascii_lowercase());
            // dates also match their year
            if let Some((year, _)) = piece.split_once('-') {
                if year.len() == 4 && year.chars().all(|c| c.is_ascii_digit()) {
                    literals.push(year.to_string());
                }
            }
        }
    }
    let words: Vec<&str> = question_context
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect();
    for (i, w) in words.iter().enumerate() {
        let lower = w.to_ascii_lowercase();
        if lower == var.slot.key || !literals.contains(&lower) {
            continue;
        }
        return match i {
            0 => w.to_string(),
            _ => format!("{} {}", words[i - 1], w),
        };
    }
    var.slot.key.clone()
}

/// "a or b", "a, b or c".
fn join_alternatives(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} or {}", init.join(", "), last),
    }
}

/// Renders a templated question for `var`. `question_context` (the user's
/// original question) only feeds the quoted phrase.
pub fn render_question(var: &DecisionVariable, question_context: &str) -> ClarificationQuestion {
    let mut displays = match var.category {
        VariableCategory::WhereCondition => condition_displays(var),
        _ => var.domain.clone(),
    };
    let presence = var.is_presence();

    let text = match var.category {
        VariableCategory::WhereCondition => {
            let phrase = condition_phrase(var, question_context);
            if presence {
                format!("By ‘{phrase}’, do you mean {} or not?", displays[0])
            } else {
                format!("By ‘{phrase}’, do you mean {}?", join_alternatives(&displays))
            }
        }
        VariableCategory::SelectColumns => {
            let star = var.domain.iter().position(|v| v == "*");
            match star {
                Some(idx) => {
                    displays[idx] = "all columns".to_string();
                    let others: Vec<String> =
                        var.domain.iter().filter(|v| *v != "*").cloned().collect();
                    if others.is_empty() {
                        "Should the output include all columns?".to_string()
                    } else {
                        format!("Should the output include all columns, or only {}?", join_alternatives(&others))
                    }
                }
                None => format!("Should the output include {}?", join_alternatives(&displays)),
            }
        }
        VariableCategory::Aggregation => {
            format!("Should the result be computed as {}?", join_alternatives(&displays))
        }
        VariableCategory::TableChoice | VariableCategory::JoinPath => {
            if presence {
                format!("Are you referring to {} or not?", displays[0])
            } else {
                format!("Are you referring to {}?", join_alternatives(&displays))
            }
        }
        VariableCategory::GroupOrderModifier => {
            let verb = match var.slot.clause {
                ClauseKind::GroupBy => "group by",
                ClauseKind::OrderBy => "be ordered by",
                ClauseKind::Limit => "be limited to",
                _ => "include",
            };
            if presence {
                format!("Should the output {verb} {} or not?", displays[0])
            } else {
                format!("Should the output {verb} {}?", join_alternatives(&displays))
            }
        }
    };

    let mut options: Vec<QuestionOption> = var
        .domain
        .iter()
        .zip(displays)
        .map(|(value, display)| QuestionOption { choice: Choice::Value(value.clone()), display })
        .collect();
    options.push(QuestionOption { choice: Choice::NoneOfThese, display: NONE_OF_THESE_DISPLAY.to_string() });

    ClarificationQuestion { variable_id: var.id, slot: var.slot.clone(), category: var.category, text, options }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::{CandidateDistribution, CandidateId};
    use crate::sql::extract_decision_variables;

    fn vars(sqls: &[&str]) -> Vec<DecisionVariable> {
        let d = CandidateDistribution::from_weighted(
            "q",
            sqls.iter().enumerate().map(|(i, s)| (CandidateId(i as u32 + 1), *s, 1.0)),
        )
        .unwrap();
        extract_decision_variables(&d)
    }

    #[test]
    fn temporal_comparison_question() {
        let v = vars(&[
            "SELECT * FROM employees WHERE join_date > 2020",
            "SELECT * FROM employees WHERE join_date >= 2020",
        ]);
        let q = render_question(&v[0], "List employees who joined after 2020 in sales.");
        assert_eq!(q.text, "By ‘after 2020’, do you mean >2020 or ≥2020?");
        assert_eq!(q.options.len(), 3);
    }

    #[test]
    fn group_by_presence_question() {
        let v = vars(&["SELECT B, count(*) FROM t GROUP BY B", "SELECT B, count(*) FROM t"]);
        let q = render_question(&v[0], "how many per B");
        assert_eq!(q.text, "Should the output group by B or not?");
        assert_eq!(q.options[0].choice, Choice::Value("B".into()));
    }

    #[test]
    fn none_of_these_is_always_last() {
        let all = vars(&[
            "SELECT * FROM employees WHERE department = 'sales'",
            "SELECT employee_id, name FROM staff WHERE department IN ('sales', 'marketing') ORDER BY name",
        ]);
        assert_eq!(all.len(), 4);
        for v in &all {
            let q = render_question(v, "List employees in sales");
            assert!(q.options.len() >= 2);
            assert_eq!(q.options.last().unwrap().choice, Choice::NoneOfThese);
            for o in &q.options[..q.options.len() - 1] {
                let Choice::Value(val) = &o.choice else { panic!("value option expected") };
                assert!(v.domain.contains(val));
            }
        }
    }

    #[test]
    fn schema_and_referent_templates() {
        let v = vars(&[
            "SELECT * FROM employees WHERE department = 'sales'",
            "SELECT employee_id, name FROM staff WHERE department IN ('sales', 'marketing')",
        ]);
        let q0 = render_question(&v[0], "List employees in sales");
        assert_eq!(q0.text, "Should the output include all columns, or only employee_id, name?");
        assert_eq!(q0.options[0].display, "all columns");
        let q1 = render_question(&v[1], "List employees in sales");
        assert_eq!(q1.text, "Are you referring to employees or staff?");
        let q2 = render_question(&v[2], "List employees in sales");
        assert_eq!(q2.text, "By ‘in sales’, do you mean = 'sales' or in ('sales', 'marketing')?");
    }

    #[test]
    fn phrase_falls_back_to_column() {
        let v = vars(&["SELECT a FROM t WHERE x > 3", "SELECT a FROM t WHERE x >= 4"]);
        assert!(render_question(&v[0], "something unrelated").text.starts_with("By ‘x’"));
    }

    #[test]
    fn alternatives_join() {
        let s = |v: &[&str]| join_alternatives(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        assert_eq!(s(&["a"]), "a");
        assert_eq!(s(&["a", "b"]), "a or b");
        assert_eq!(s(&["a", "b", "c"]), "a, b or c");
    }
}
