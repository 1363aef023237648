use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

use crate::source::Schema;
use crate::sql::{tokenize_sql, ClauseKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    /// Comparison key; integral reals compare equal to integers.
    fn key(&self) -> String {
        match self {
            Cell::Null => "N".into(),
            Cell::Integer(i) => format!("I{i}"),
            Cell::Real(r) if r.fract() == 0.0 && r.abs() < 1e15 => format!("I{}", *r as i64),
            Cell::Real(r) => format!("R{r:.9e}"),
            Cell::Text(s) => format!("T{s}"),
            Cell::Blob(b) => format!("B{b:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Runs SQL against some database.
pub trait ExecutionBackend {
    fn execute(&mut self, sql: &str) -> Result<ResultTable, String>;
}

/// In-memory SQLite database built from fixture rows.
pub struct SqliteBackend {
    conn: Connection,
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

impl SqliteBackend {
    pub fn new(schema: &Schema, rows: Option<&BTreeMap<String, Vec<Vec<Value>>>>) -> Result<Self, String> {
        let conn = Connection::open_in_memory().map_err(|e| e.to_string())?;
        for t in &schema.tables {
            let cols: Vec<String> = t.columns.iter().map(|c| format!("{} {}", quote_ident(&c.name), c.ty)).collect();
            conn.execute(&format!("CREATE TABLE {} ({})", quote_ident(&t.name), cols.join(", ")), [])
                .map_err(|e| format!("creating {}: {e}", t.name))?;
        }
        for (table, rows) in rows.into_iter().flatten() {
            let Some(first) = rows.first() else { continue };
            let marks = vec!["?"; first.len()].join(", ");
            let mut stmt = conn
                .prepare(&format!("INSERT INTO {} VALUES ({marks})", quote_ident(table)))
                .map_err(|e| e.to_string())?;
            for row in rows {
                let params: Vec<rusqlite::types::Value> = row.iter().map(json_to_sql).collect();
                stmt.execute(rusqlite::params_from_iter(params)).map_err(|e| format!("loading {table}: {e}"))?;
            }
        }
        Ok(Self { conn })
    }
}

fn json_to_sql(v: &Value) -> rusqlite::types::Value {
    use rusqlite::types::Value as V;
    match v {
        Value::Null => V::Null,
        Value::Bool(b) => V::Integer(*b as i64),
        Value::Number(n) => match n.as_i64() {
            Some(i) => V::Integer(i),
            None => V::Real(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => V::Text(s.clone()),
        other => V::Text(other.to_string()),
    }
}

impl ExecutionBackend for SqliteBackend {
    fn execute(&mut self, sql: &str) -> Result<ResultTable, String> {
        let mut stmt = self.conn.prepare(sql).map_err(|e| e.to_string())?;
        let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
        let width = columns.len();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([]).map_err(|e| e.to_string())?;
        while let Some(row) = cursor.next().map_err(|e| e.to_string())? {
            let mut out = Vec::with_capacity(width);
            for i in 0..width {
                out.push(match row.get_ref(i).map_err(|e| e.to_string())? {
                    ValueRef::Null => Cell::Null,
                    ValueRef::Integer(v) => Cell::Integer(v),
                    ValueRef::Real(v) => Cell::Real(v),
                    ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                    ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
                });
            }
            rows.push(out);
        }
        Ok(ResultTable { columns, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Predicted,
    Gold,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Predicted => "predicted",
            Side::Gold => "gold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{side} query failed: {message}")]
pub struct ExecutionError {
    pub side: Side,
    pub message: String,
}

/// Compares result tables as row multisets (row sequences when `ordered`),
/// allowing any column permutation that aligns every row.
pub fn tables_match(pred: &ResultTable, gold: &ResultTable, ordered: bool) -> bool {
    let width = gold.columns.len();
    if pred.columns.len() != width || pred.rows.len() != gold.rows.len() {
        return false;
    }
    let column_keys = |t: &ResultTable, j: usize| {
        let mut v: Vec<String> = t.rows.iter().map(|r| r[j].key()).collect();
        v.sort();
        v
    };
    let gold_cols: Vec<Vec<String>> = (0..width).map(|j| column_keys(gold, j)).collect();
    let pred_cols: Vec<Vec<String>> = (0..width).map(|j| column_keys(pred, j)).collect();
    let compatible: Vec<Vec<bool>> =
        (0..width).map(|i| (0..width).map(|j| gold_cols[i] == pred_cols[j]).collect()).collect();

    let mut gold_rows: Vec<Vec<String>> = gold.rows.iter().map(|r| r.iter().map(Cell::key).collect()).collect();
    if !ordered {
        gold_rows.sort();
    }
    let aligned = |perm: &[usize]| {
        let mut rows: Vec<Vec<String>> =
            pred.rows.iter().map(|r| perm.iter().map(|&j| r[j].key()).collect()).collect();
        if !ordered {
            rows.sort();
        }
        rows == gold_rows
    };

    fn search(
        i: usize,
        perm: &mut Vec<usize>,
        used: &mut [bool],
        compatible: &[Vec<bool>],
        aligned: &dyn Fn(&[usize]) -> bool,
    ) -> bool {
        if i == compatible.len() {
            return aligned(perm);
        }
        for j in 0..compatible.len() {
            if used[j] || !compatible[i][j] {
                continue;
            }
            used[j] = true;
            perm.push(j);
            if search(i + 1, perm, used, compatible, aligned) {
                return true;
            }
            perm.pop();
            used[j] = false;
        }
        false
    }
    search(0, &mut Vec::with_capacity(width), &mut vec![false; width], &compatible, &aligned)
}

/// Executes both queries and compares their results; order matters only
/// when gold has a top-level ORDER BY. A failing predicted query is a
/// non-match; a failing gold query makes the instance unusable.
pub fn execution_match(pred_sql: &str, gold_sql: &str, db: &mut dyn ExecutionBackend) -> Result<bool, ExecutionError> {
    let gold = db.execute(gold_sql).map_err(|message| ExecutionError { side: Side::Gold, message })?;
    let pred = db.execute(pred_sql).map_err(|message| ExecutionError { side: Side::Predicted, message })?;
    let ordered = tokenize_sql(gold_sql).map(|t| t.has_clause(ClauseKind::OrderBy)).unwrap_or(false);
    Ok(tables_match(&pred, &gold, ordered))
}
