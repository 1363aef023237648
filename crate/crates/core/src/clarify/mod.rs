//! The clarification dialogue: question rendering, session state and transcripts.

mod question;
mod session;
mod transcript;

pub use question::{render_question, Answer, Choice, ClarificationQuestion, QuestionOption, NONE_OF_THESE_DISPLAY};
pub use session::{
    run_session, AnswerProvider, ClarifyError, FinalResult, InteractionMode, SessionConfig, SessionFailure,
    SessionOutcome, SessionState, SessionStatus, StepOutcome, Termination, DEFAULT_MAX_TURNS, DEFAULT_TAU,
};
pub use transcript::{CandidateSummary, SessionTranscript, TurnRecord};
