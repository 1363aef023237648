use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use super::question::{render_question, Answer, Choice, ClarificationQuestion};
use super::transcript::{CandidateSummary, SessionTranscript, TurnRecord};
use crate::candidate::{CandidateDistribution, CandidateId};
use crate::eig::{SelectionStrategy, Selector};
use crate::sql::{extract_decision_variables, slot_value, DecisionVariable, SlotKey, VarValue, VariableId};

pub const DEFAULT_TAU: f64 = 0.9;
pub const DEFAULT_MAX_TURNS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClarifyError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("session is {0}, not awaiting an answer")]
    NotAwaitingAnswer(SessionStatus),
    #[error("answer for {got} does not match the pending question on {expected}")]
    WrongVariable { expected: VariableId, got: VariableId },
    #[error("'{0}' is not an option of the pending question")]
    UnknownOption(Choice),
    #[error("answer {choice} on {variable} is inconsistent with every candidate")]
    InconsistentAnswer { variable: VariableId, choice: Choice },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InteractionMode {
    /// Every answer is applied to the original candidates alone; earlier
    /// answers and asked questions are forgotten.
    SingleTurn,
    /// Answers accumulate and resolved variables are never asked again.
    MultiTurn,
}

impl fmt::Display for InteractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InteractionMode::SingleTurn => "single",
            InteractionMode::MultiTurn => "multi",
        })
    }
}

impl FromStr for InteractionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "single_turn" => Ok(InteractionMode::SingleTurn),
            "multi" | "multi_turn" => Ok(InteractionMode::MultiTurn),
            other => Err(format!("unknown mode '{other}' (expected single or multi)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: SelectionStrategy,
    /// Stop once the top candidate reaches this probability.
    pub tau: f64,
    pub max_turns: usize,
    pub mode: InteractionMode,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            strategy: SelectionStrategy::eig(),
            tau: DEFAULT_TAU,
            max_turns: DEFAULT_MAX_TURNS,
            mode: InteractionMode::MultiTurn,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ClarifyError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(ClarifyError::InvalidConfig(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.max_turns == 0 {
            return Err(ClarifyError::InvalidConfig("max_turns must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    /// Ready for the next `step`.
    Active,
    AwaitingAnswer,
    Finished,
    Failed,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Active => "ACTIVE",
            SessionStatus::AwaitingAnswer => "AWAITING_ANSWER",
            SessionStatus::Finished => "FINISHED",
            SessionStatus::Failed => "FAILED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    /// Top probability reached tau.
    Threshold,
    /// No decision variable left to ask.
    Resolved,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub candidate_id: CandidateId,
    pub sql: String,
    pub probability: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    QuestionIssued(ClarificationQuestion),
    Finished(FinalResult),
    Failed(String),
}

/// One clarification dialogue over a candidate distribution.
#[derive(Debug, Clone)]
pub struct SessionState {
    config: SessionConfig,
    original: CandidateDistribution,
    dist: CandidateDistribution,
    variables: Vec<DecisionVariable>,
    pending: Option<(ClarificationQuestion, DecisionVariable)>,
    asked: Vec<(SlotKey, Vec<VarValue>)>,
    selector: Selector,
    transcript: SessionTranscript,
    status: SessionStatus,
    outcome: Option<FinalResult>,
    failure: Option<String>,
}

fn signature(var: &DecisionVariable) -> (SlotKey, Vec<VarValue>) {
    (var.slot.clone(), var.observed_values())
}

impl SessionState {
    pub fn new(config: SessionConfig, dist: CandidateDistribution) -> Result<Self, ClarifyError> {
        config.validate()?;
        let variables = extract_decision_variables(&dist);
        let transcript = SessionTranscript::start(&dist, config);
        Ok(Self {
            config,
            original: dist.clone(),
            dist,
            variables,
            pending: None,
            asked: Vec::new(),
            selector: Selector::new(config.strategy),
            transcript,
            status: SessionStatus::Active,
            outcome: None,
            failure: None,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn distribution(&self) -> &CandidateDistribution {
        &self.dist
    }

    pub fn original(&self) -> &CandidateDistribution {
        &self.original
    }

    pub fn variables(&self) -> &[DecisionVariable] {
        &self.variables
    }

    pub fn pending_question(&self) -> Option<&ClarificationQuestion> {
        self.pending.as_ref().map(|(q, _)| q)
    }

    pub fn transcript(&self) -> &SessionTranscript {
        &self.transcript
    }

    pub fn into_transcript(self) -> SessionTranscript {
        self.transcript
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn outcome(&self) -> Option<&FinalResult> {
        self.outcome.as_ref()
    }

    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    pub fn turns_taken(&self) -> usize {
        self.transcript.turns.len()
    }

    /// Variables the strategy may pick from this turn.
    pub fn askable_variables(&self) -> Vec<DecisionVariable> {
        match self.config.mode {
            InteractionMode::SingleTurn => self.variables.clone(),
            InteractionMode::MultiTurn => self
                .variables
                .iter()
                .filter(|v| !self.asked.contains(&signature(v)))
                .cloned()
                .collect(),
        }
    }

    fn finish(&mut self, termination: Termination) -> StepOutcome {
        let top = self.dist.top_candidate();
        let result = FinalResult {
            candidate_id: top.id,
            sql: top.sql_text.clone(),
            probability: top.probability,
            termination,
        };
        self.transcript.final_result = Some(result.clone());
        self.outcome = Some(result.clone());
        self.status = SessionStatus::Finished;
        StepOutcome::Finished(result)
    }

    /// Advances the dialogue: finishes when the top candidate reaches tau,
    /// when nothing is left to ask, or when the turn budget is spent;
    /// otherwise issues the next question.
    pub fn step(&mut self) -> StepOutcome {
        match self.status {
            SessionStatus::Finished => {
                return StepOutcome::Finished(self.outcome.clone().expect("finished sessions record a result"))
            }
            SessionStatus::Failed => return StepOutcome::Failed(self.failure.clone().unwrap_or_default()),
            SessionStatus::AwaitingAnswer => {
                return StepOutcome::QuestionIssued(self.pending_question().expect("pending question").clone())
            }
            SessionStatus::Active => {}
        }
        if self.dist.top_candidate().probability >= self.config.tau {
            return self.finish(Termination::Threshold);
        }
        let askable = self.askable_variables();
        if askable.is_empty() {
            return self.finish(Termination::Resolved);
        }
        if self.turns_taken() >= self.config.max_turns {
            return self.finish(Termination::BudgetExhausted);
        }
        let id = self
            .selector
            .select(&self.dist, &askable)
            .expect("askable variables are nonempty");
        let var = askable.into_iter().find(|v| v.id == id).expect("selected variable exists");
        let question = render_question(&var, self.dist.question());
        self.pending = Some((question.clone(), var));
        self.status = SessionStatus::AwaitingAnswer;
        StepOutcome::QuestionIssued(question)
    }

    /// Filters the candidates by the answer to the pending question.
    ///
    /// A chosen value keeps exactly the candidates carrying it and
    /// `NoneOfThese` keeps the ones where the variable is undefined, so the
    /// answers partition the candidates. An empty survivor set fails the
    /// session, keeping the transcript.
    pub fn apply_answer(&mut self, answer: Answer) -> Result<&TurnRecord, ClarifyError> {
        if self.status != SessionStatus::AwaitingAnswer {
            return Err(ClarifyError::NotAwaitingAnswer(self.status));
        }
        let (question, _) = self.pending.as_ref().expect("awaiting implies pending");
        if answer.variable_id != question.variable_id {
            return Err(ClarifyError::WrongVariable { expected: question.variable_id, got: answer.variable_id });
        }
        if !question.offers(&answer.chosen) {
            return Err(ClarifyError::UnknownOption(answer.chosen));
        }
        let (question, var) = self.pending.take().expect("checked above");

        let base = match self.config.mode {
            InteractionMode::MultiTurn => &self.dist,
            InteractionMode::SingleTurn => &self.original,
        };
        let filtered = base.filter_and_renormalize(|c| {
            let value = slot_value(&c.tokens, &var.slot);
            match &answer.chosen {
                Choice::Value(chosen) => matches!(&value, VarValue::Defined(v) if v == chosen),
                Choice::NoneOfThese => value == VarValue::Undefined,
            }
        });
        let index = self.transcript.turns.len();

        match filtered {
            Ok(next) => {
                self.asked.push(signature(&var));
                self.dist = next;
                self.variables = extract_decision_variables(&self.dist);
                self.status = SessionStatus::Active;
                let entropy = self.dist.entropy();
                self.transcript.entropy_trace.push(entropy);
                self.transcript.turns.push(TurnRecord {
                    index,
                    question,
                    answer,
                    entropy_after: Some(entropy),
                    top_after: Some(CandidateSummary::of(self.dist.top_candidate())),
                    survivors: self.dist.len(),
                });
                Ok(self.transcript.turns.last().expect("just pushed"))
            }
            Err(_) => {
                let err = ClarifyError::InconsistentAnswer { variable: answer.variable_id, choice: answer.chosen.clone() };
                self.status = SessionStatus::Failed;
                self.failure = Some(err.to_string());
                self.transcript.failure = self.failure.clone();
                self.transcript.turns.push(TurnRecord {
                    index,
                    question,
                    answer,
                    entropy_after: None,
                    top_after: None,
                    survivors: 0,
                });
                Err(err)
            }
        }
    }
}

/// Anything that can answer clarification questions.
pub trait AnswerProvider {
    fn answer(&mut self, question: &ClarificationQuestion) -> Choice;
}

impl<F: FnMut(&ClarificationQuestion) -> Choice> AnswerProvider for F {
    fn answer(&mut self, question: &ClarificationQuestion) -> Choice {
        self(question)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub result: FinalResult,
    pub transcript: SessionTranscript,
}

impl SessionOutcome {
    pub fn final_sql(&self) -> &str {
        &self.result.sql
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("session failed: {reason}")]
pub struct SessionFailure {
    pub reason: String,
    pub transcript: SessionTranscript,
}

/// Runs a session to completion against `user`.
pub fn run_session(
    config: SessionConfig,
    dist: CandidateDistribution,
    user: &mut dyn AnswerProvider,
) -> Result<SessionOutcome, SessionFailure> {
    let mut state = SessionState::new(config, dist).map_err(|e| SessionFailure {
        reason: e.to_string(),
        transcript: SessionTranscript::default(),
    })?;
    loop {
        match state.step() {
            StepOutcome::QuestionIssued(question) => {
                let chosen = user.answer(&question);
                let answer = Answer { variable_id: question.variable_id, chosen };
                if let Err(err) = state.apply_answer(answer) {
                    if state.status() != SessionStatus::Failed {
                        // the provider answered off the menu
                        return Err(SessionFailure { reason: err.to_string(), transcript: state.into_transcript() });
                    }
                }
            }
            StepOutcome::Finished(result) => {
                return Ok(SessionOutcome { result, transcript: state.into_transcript() });
            }
            StepOutcome::Failed(reason) => {
                return Err(SessionFailure { reason, transcript: state.into_transcript() });
            }
        }
    }
}
