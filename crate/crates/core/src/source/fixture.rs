use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use super::SourceError;
use crate::candidate::{CandidateDistribution, CandidateError, CandidateId};
use crate::sql::{duplicate_collapse, referenced_tables, tokenize_sql, ParseError, TokenizedQuery};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    /// Pairs of `table.column` references.
    #[serde(default)]
    pub foreign_keys: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub tables: Vec<Table>,
}

impl Schema {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    fn has_column(&self, reference: &str) -> bool {
        let Some((table, column)) = reference.split_once('.') else {
            return false;
        };
        self.table(table)
            .is_some_and(|t| t.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)))
    }

    /// One line per table, e.g. `employees(employee_id INTEGER, name TEXT)`,
    /// followed by foreign keys.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            let cols: Vec<String> = t.columns.iter().map(|c| format!("{} {}", c.name, c.ty)).collect();
            out.push_str(&format!("{}({})\n", t.name, cols.join(", ")));
        }
        for t in &self.tables {
            for [from, to] in &t.foreign_keys {
                out.push_str(&format!("{from} -> {to}\n"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard, Difficulty::Extra];
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
            Difficulty::Extra => "extra",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureCandidate {
    pub sql_text: String,
    pub weight: f64,
}

/// One authored ambiguous question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureInstance {
    pub instance_id: String,
    pub question: String,
    pub schema: Schema,
    /// Rows per table, values in schema column order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub database: Option<BTreeMap<String, Vec<Vec<Value>>>>,
    pub candidates: Vec<FixtureCandidate>,
    pub gold_sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_assignments: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
}

impl FixtureInstance {
    /// Candidates numbered Q1.. in file order, normalized, duplicates merged.
    pub fn distribution(&self) -> Result<CandidateDistribution, CandidateError> {
        let dist = CandidateDistribution::from_weighted(
            self.question.clone(),
            self.candidates
                .iter()
                .enumerate()
                .map(|(i, c)| (CandidateId(i as u32 + 1), c.sql_text.as_str(), c.weight)),
        )?;
        Ok(duplicate_collapse(&dist))
    }

    pub fn gold_tokens(&self) -> Result<TokenizedQuery, ParseError> {
        tokenize_sql(&self.gold_sql)
    }

    /// Highest normalized candidate weight.
    pub fn top_probability(&self) -> Option<f64> {
        self.distribution().ok().map(|d| d.top_candidate().probability)
    }

    fn invalid(&self, field: impl Into<String>, message: impl Into<String>) -> SourceError {
        SourceError::Validation {
            instance_id: self.instance_id.clone(),
            field: field.into(),
            message: message.into(),
        }
    }

    fn check_tables(&self, field: String, sql: &str) -> Result<(), SourceError> {
        let tables = referenced_tables(sql).map_err(|e| self.invalid(field.clone(), e.to_string()))?;
        match tables.iter().find(|t| self.schema.table(t).is_none()) {
            Some(missing) => Err(self.invalid(field, format!("table '{missing}' is not in the schema"))),
            None => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.instance_id.trim().is_empty() {
            return Err(self.invalid("instance_id", "must not be empty"));
        }
        if self.question.trim().is_empty() {
            return Err(self.invalid("question", "must not be empty"));
        }
        if self.schema.tables.is_empty() {
            return Err(self.invalid("schema.tables", "at least one table is required"));
        }
        for (ti, t) in self.schema.tables.iter().enumerate() {
            for (fi, pair) in t.foreign_keys.iter().enumerate() {
                for r in pair {
                    if !self.schema.has_column(r) {
                        return Err(self.invalid(
                            format!("schema.tables[{ti}].foreign_keys[{fi}]"),
                            format!("'{r}' does not name a schema column"),
                        ));
                    }
                }
            }
        }
        if self.candidates.is_empty() {
            return Err(self.invalid("candidates", "at least one candidate is required"));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if !c.weight.is_finite() || c.weight < 0.0 {
                return Err(self.invalid(format!("candidates[{i}].weight"), format!("{} is not a nonnegative weight", c.weight)));
            }
            let field = format!("candidates[{i}].sql_text");
            tokenize_sql(&c.sql_text).map_err(|e| self.invalid(field.clone(), e.to_string()))?;
            self.check_tables(field, &c.sql_text)?;
        }
        if self.candidates.iter().all(|c| c.weight == 0.0) {
            return Err(self.invalid("candidates", "all weights are zero"));
        }
        tokenize_sql(&self.gold_sql).map_err(|e| self.invalid("gold_sql", e.to_string()))?;
        self.check_tables("gold_sql".into(), &self.gold_sql)?;
        if let Some(db) = &self.database {
            for (name, rows) in db {
                let Some(table) = self.schema.table(name) else {
                    return Err(self.invalid(format!("database.{name}"), "table is not in the schema"));
                };
                for (ri, row) in rows.iter().enumerate() {
                    if row.len() != table.columns.len() {
                        return Err(self.invalid(
                            format!("database.{name}[{ri}]"),
                            format!("expected {} values, found {}", table.columns.len(), row.len()),
                        ));
                    }
                    if let Some(v) = row.iter().find(|v| v.is_array() || v.is_object()) {
                        return Err(self.invalid(format!("database.{name}[{ri}]"), format!("{v} is not a scalar")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses and eagerly validates a fixture document.
pub fn parse_fixtures(text: &str) -> Result<Vec<FixtureInstance>, SourceError> {
    let instances: Vec<FixtureInstance> = serde_json::from_str(text).map_err(|e| SourceError::Format {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut seen = HashSet::new();
    for inst in &instances {
        inst.validate()?;
        if !seen.insert(inst.instance_id.as_str()) {
            return Err(inst.invalid("instance_id", "duplicate instance id"));
        }
    }
    Ok(instances)
}

pub fn load_fixtures(path: impl AsRef<Path>) -> Result<Vec<FixtureInstance>, SourceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SourceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_fixtures(&text)
}

pub fn fixtures_to_string(instances: &[FixtureInstance]) -> String {
    let mut s = serde_json::to_string_pretty(instances).expect("fixtures always serialize");
    s.push('\n');
    s
}

pub fn save_fixtures(path: impl AsRef<Path>, instances: &[FixtureInstance]) -> Result<(), SourceError> {
    let path = path.as_ref();
    std::fs::write(path, fixtures_to_string(instances)).map_err(|source| SourceError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"[{
        "instance_id": "t1",
        "question": "which a",
        "schema": {"tables": [{"name": "t", "columns": [{"name": "a", "type": "INTEGER"}, {"name": "b", "type": "TEXT"}]}]},
        "database": {"t": [[1, "x"], [2, "y"]]},
        "candidates": [{"sql_text": "SELECT a FROM t", "weight": 3}, {"sql_text": "SELECT b FROM t", "weight": 1}],
        "gold_sql": "SELECT a FROM t"
    }]"#;

    fn with(edit: impl Fn(&mut Value)) -> String {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        edit(&mut v[0]);
        v.to_string()
    }

    fn validation_field(text: &str) -> String {
        match parse_fixtures(text) {
            Err(SourceError::Validation { field, .. }) => field,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_instance_loads() {
        let f = parse_fixtures(MINIMAL).unwrap();
        assert_eq!(f.len(), 1);
        let d = f[0].distribution().unwrap();
        assert_eq!(d.probabilities().collect::<Vec<_>>(), vec![0.75, 0.25]);
        assert_eq!(f[0].top_probability(), Some(0.75));
    }

    #[test]
    fn empty_and_malformed_documents_are_format_errors() {
        assert!(matches!(parse_fixtures(""), Err(SourceError::Format { line: 1, .. })));
        match parse_fixtures("[\n  {\"instance_id\": 3}\n]") {
            Err(SourceError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_errors_name_the_field() {
        assert_eq!(
            validation_field(&with(|v| {
                v["candidates"][0]["weight"] = 0.into();
                v["candidates"][1]["weight"] = 0.into();
            })),
            "candidates"
        );
        assert_eq!(validation_field(&with(|v| v["candidates"][1]["weight"] = (-1).into())), "candidates[1].weight");
        assert_eq!(validation_field(&with(|v| v["gold_sql"] = "SELECT (a FROM t".into())), "gold_sql");
        assert_eq!(
            validation_field(&with(|v| v["candidates"][1]["sql_text"] = "SELECT b FROM nope".into())),
            "candidates[1].sql_text"
        );
        assert_eq!(validation_field(&with(|v| v["database"]["t"][1] = serde_json::json!([2]))), "database.t[1]");
        let dup: Value = serde_json::from_str(MINIMAL).unwrap();
        let twice = Value::Array(vec![dup[0].clone(), dup[0].clone()]);
        assert_eq!(validation_field(&twice.to_string()), "instance_id");
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let first = parse_fixtures(MINIMAL).unwrap();
        let text = fixtures_to_string(&first);
        let second = parse_fixtures(&text).unwrap();
        assert_eq!(first, second);
        assert_eq!(fixtures_to_string(&second), text);
    }

    #[test]
    fn schema_description() {
        let f = parse_fixtures(MINIMAL).unwrap();
        assert_eq!(f[0].schema.describe(), "t(a INTEGER, b TEXT)\n");
    }
}
