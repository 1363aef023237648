//! Simulated-user evaluation: truthful oracles, exact and execution match,
//! the ambiguity filter and strategy / mode ablations.

mod exec;
mod report;
pub mod synthetic;

use serde_json::Value;
use std::collections::BTreeMap;

pub use exec::{execution_match, tables_match, Cell, ExecutionBackend, ExecutionError, ResultTable, Side, SqliteBackend};
pub use report::{
    compare_modes, run_ablation, AblationCell, AblationReport, EvalConfig, InstanceResult, ModeComparison, ModeRow,
};

use crate::candidate::CandidateDistribution;
use crate::clarify::{Answer, AnswerProvider, Choice, ClarificationQuestion};
use crate::source::{Difficulty, FixtureInstance, Schema, SourceError};
use crate::sql::{slot_value, tokenize_sql, ParseError, TokenizedQuery, VarValue};

/// A simulated user who answers every question consistently with a gold query.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleUser {
    gold: TokenizedQuery,
}

impl OracleUser {
    pub fn new(gold: TokenizedQuery) -> Self {
        Self { gold }
    }

    pub fn from_sql(gold_sql: &str) -> Result<Self, ParseError> {
        Ok(Self::new(tokenize_sql(gold_sql)?))
    }

    pub fn gold(&self) -> &TokenizedQuery {
        &self.gold
    }

    /// Gold's value for the asked slot when it is offered, otherwise
    /// `NoneOfThese`.
    pub fn answer(&self, question: &ClarificationQuestion) -> Answer {
        let chosen = match slot_value(&self.gold, &question.slot) {
            VarValue::Defined(v) if question.offers(&Choice::Value(v.clone())) => Choice::Value(v),
            _ => Choice::NoneOfThese,
        };
        Answer { variable_id: question.variable_id, chosen }
    }
}

impl AnswerProvider for OracleUser {
    fn answer(&mut self, question: &ClarificationQuestion) -> Choice {
        OracleUser::answer(self, question).chosen
    }
}

pub fn oracle_answer(oracle: &OracleUser, question: &ClarificationQuestion) -> Answer {
    oracle.answer(question)
}

/// Keeps the instances whose most probable candidate is strictly below
/// `threshold`.
pub fn ambiguity_filter(instances: &[FixtureInstance], threshold: f64) -> Vec<FixtureInstance> {
    instances
        .iter()
        .filter(|inst| inst.top_probability().is_some_and(|p| p < threshold))
        .cloned()
        .collect()
}

/// Everything an evaluation run needs about one question.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInstance {
    pub instance_id: String,
    pub difficulty: Option<Difficulty>,
    pub distribution: CandidateDistribution,
    pub gold_sql: String,
    pub schema: Schema,
    pub database: Option<BTreeMap<String, Vec<Vec<Value>>>>,
}

impl EvalInstance {
    pub fn from_fixture(inst: &FixtureInstance) -> Result<Self, SourceError> {
        Ok(Self {
            instance_id: inst.instance_id.clone(),
            difficulty: inst.difficulty,
            distribution: inst.distribution()?,
            gold_sql: inst.gold_sql.clone(),
            schema: inst.schema.clone(),
            database: inst.database.clone(),
        })
    }

    pub fn from_fixtures(instances: &[FixtureInstance]) -> Result<Vec<Self>, SourceError> {
        instances.iter().map(Self::from_fixture).collect()
    }
}
