//! The `sqlclarify` command line: interactive sessions, score explanation,
//! batch evaluation and the HTTP service.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use sqlclarify::candidate::CandidateDistribution;
use sqlclarify::clarify::{
    Answer, InteractionMode, SessionConfig, SessionState, SessionStatus, StepOutcome, DEFAULT_MAX_TURNS, DEFAULT_TAU,
};
use sqlclarify::eig::{SelectionStrategy, StrategyKind};
use sqlclarify::eval::{ambiguity_filter, compare_modes, run_ablation, EvalConfig, EvalInstance};
use sqlclarify::source::{
    generate_candidates, load_fixtures, FixtureInstance, HttpTransport, LlmBackend, LlmConfig, Schema,
};
use sqlclarify::sql::extract_decision_variables;

use crate::api::{self, LlmSettings, ServiceOptions};
use crate::explain::ExplainTable;

pub const EXIT_SOURCE: i32 = 2;
pub const EXIT_FAILED_SESSION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sqlclarify", version, about = "Clarify ambiguous text-to-SQL questions by expected information gain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a clarification dialogue at the terminal.
    Interactive(InteractiveArgs),
    /// Print the score table for an instance.
    Explain(ExplainArgs),
    /// Evaluate strategies against a corpus with a simulated user.
    Eval(EvalArgs),
    /// Serve the /v1 session API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SessionFlags {
    #[arg(long, default_value = "eig")]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_TURNS)]
    pub max_turns: usize,
    #[arg(long, default_value = "multi")]
    pub mode: InteractionMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SessionFlags {
    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            strategy: SelectionStrategy::new(self.strategy, self.seed),
            tau: self.tau,
            max_turns: self.max_turns,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InteractiveArgs {
    /// Fixture file holding the instance to clarify.
    #[arg(long, conflicts_with = "llm_endpoint", required_unless_present = "llm_endpoint")]
    pub fixture: Option<PathBuf>,
    #[arg(long, requires = "fixture")]
    pub instance: Option<String>,
    /// Chat-completions endpoint used to generate candidates.
    #[arg(long, requires_all = ["model", "question", "schema"])]
    pub llm_endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the endpoint's API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Natural-language question (LLM source only).
    #[arg(long)]
    pub question: Option<String>,
    /// JSON schema file, `{"tables": [...]}` (LLM source only).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Candidates to request from the model.
    #[arg(long, default_value_t = 8)]
    pub candidates: usize,
    #[command(flatten)]
    pub session: SessionFlags,
    /// Directory receiving the transcript.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long)]
    pub instance: String,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Corpus of fixture instances.
    #[arg(long)]
    pub fixture: PathBuf,
    /// Strategies to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["random", "maxprob", "minprob", "ig", "eig"])]
    pub strategy: Vec<StrategyKind>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_TURNS)]
    pub max_turns: usize,
    #[arg(long, default_value = "multi")]
    pub mode: InteractionMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also compare single-turn against multi-turn interaction.
    #[arg(long)]
    pub modes: bool,
    /// Keep only instances whose top candidate probability is below this.
    #[arg(long)]
    pub ambiguity_threshold: Option<f64>,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Listen address; defaults to $SERVICE_BIND, then 127.0.0.1:8080.
    #[arg(long)]
    pub bind: Option<String>,
    /// Fixture files whose instances sessions can be created from.
    #[arg(long)]
    pub fixture: Vec<PathBuf>,
    #[arg(long, requires = "model")]
    pub llm_endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Seconds of inactivity before a session expires.
    #[arg(long, default_value_t = 1800)]
    pub idle_timeout: u64,
}

/// Runs a parsed command against the process streams and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    match cli.command {
        Command::Interactive(args) => run_interactive(&args, &mut input, &mut out, &mut err),
        Command::Explain(args) => run_explain(&args, &mut out, &mut err),
        Command::Eval(args) => run_eval(&args, &mut out, &mut err),
        Command::Serve(args) => run_serve(&args, &mut err),
    }
}

fn find_instance(fixture: &Path, id: Option<&str>) -> Result<FixtureInstance, String> {
    let instances = load_fixtures(fixture).map_err(|e| e.to_string())?;
    match id {
        Some(id) => instances
            .into_iter()
            .find(|i| i.instance_id == id)
            .ok_or_else(|| format!("no instance '{id}' in {}", fixture.display())),
        None if instances.len() == 1 => Ok(instances.into_iter().next().expect("one instance")),
        None => Err(format!("{} holds {} instances; pick one with --instance", fixture.display(), instances.len())),
    }
}

fn llm_distribution(args: &InteractiveArgs, out: &mut dyn Write) -> Result<CandidateDistribution, String> {
    let endpoint = args.llm_endpoint.as_deref().expect("llm source");
    let question = args.question.as_deref().ok_or("--question is required with --llm-endpoint")?;
    let schema_path = args.schema.as_ref().ok_or("--schema is required with --llm-endpoint")?;
    let schema_text =
        std::fs::read_to_string(schema_path).map_err(|e| format!("cannot read {}: {e}", schema_path.display()))?;
    let schema: Schema =
        serde_json::from_str(&schema_text).map_err(|e| format!("bad schema in {}: {e}", schema_path.display()))?;
    let transport = HttpTransport::new(endpoint, args.api_key_env.as_deref(), Duration::from_secs(120));
    let mut backend = LlmBackend::new(transport, LlmConfig::new(args.model.clone().unwrap_or_default()));
    let generated = generate_candidates(&mut backend, question, &schema, args.candidates).map_err(|e| e.to_string())?;
    let _ = writeln!(
        out,
        "generated {} candidates ({:?} weighting, {} requests, {} dropped)",
        generated.distribution.len(),
        generated.metadata.weighting,
        generated.metadata.requests,
        generated.dropped.len()
    );
    Ok(generated.distribution)
}

fn print_candidates(out: &mut dyn Write, dist: &CandidateDistribution) -> std::io::Result<()> {
    writeln!(out, "Candidates (H = {:.3}):", dist.entropy())?;
    for c in dist.iter() {
        writeln!(out, "  {:<4} {:.3}  {}", c.id.to_string(), c.probability, c.sql_text)?;
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn transcript_name(args: &InteractiveArgs) -> String {
    let stem: String = args
        .instance
        .clone()
        .unwrap_or_else(|| if args.llm_endpoint.is_some() { "llm".into() } else { "session".into() })
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("transcript-{stem}.json")
}

/// Reads a 1-based option number; `None` on end of input.
fn read_choice(input: &mut dyn BufRead, out: &mut dyn Write, options: usize) -> std::io::Result<Option<usize>> {
    loop {
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        match line.trim().parse::<usize>() {
            Ok(n) if (1..=options).contains(&n) => return Ok(Some(n - 1)),
            _ => writeln!(out, "enter a number from 1 to {options}")?,
        }
    }
}

pub fn run_interactive(args: &InteractiveArgs, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let dist = if args.llm_endpoint.is_some() {
        llm_distribution(args, out)
    } else {
        let fixture = args.fixture.as_deref().expect("clap requires a source");
        find_instance(fixture, args.instance.as_deref()).and_then(|i| i.distribution().map_err(|e| e.to_string()))
    };
    let dist = match dist {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SOURCE;
        }
    };
    match interactive_session(args, dist, input, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn interactive_session(
    args: &InteractiveArgs,
    dist: CandidateDistribution,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let mut state = SessionState::new(args.session.session_config(), dist)?;
    writeln!(out, "Question: {}", state.distribution().question())?;
    print_candidates(out, state.distribution())?;
    let code = loop {
        match state.step() {
            StepOutcome::QuestionIssued(q) => {
                writeln!(out, "\n[{}] {}", state.turns_taken() + 1, q.text)?;
                for (i, o) in q.options.iter().enumerate() {
                    writeln!(out, "  {}) {}", i + 1, o.display)?;
                }
                let Some(idx) = read_choice(input, out, q.options.len())? else {
                    anyhow::bail!("input ended before the session finished");
                };
                let answer = Answer { variable_id: q.variable_id, chosen: q.options[idx].choice.clone() };
                match state.apply_answer(answer).map(|t| (t.entropy_after, t.survivors)) {
                    Ok((entropy, survivors)) => {
                        writeln!(out, "entropy {:.3}, {survivors} candidate(s) remain", entropy.unwrap_or_default())?
                    }
                    Err(e) if state.status() == SessionStatus::Failed => writeln!(out, "{e}")?,
                    Err(e) => return Err(e.into()),
                }
            }
            StepOutcome::Finished(result) => {
                writeln!(out, "\nFinal SQL ({:?}, p = {:.3}):\n{}", result.termination, result.probability, result.sql)?;
                break 0;
            }
            StepOutcome::Failed(reason) => {
                writeln!(out, "\nSession failed: {reason}")?;
                break EXIT_FAILED_SESSION;
            }
        }
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(transcript_name(args));
    let json = state.transcript().to_json();
    std::fs::write(&path, &json).with_context(|| format!("writing {}", path.display()))?;
    writeln!(out, "transcript: {}", path.display())?;
    writeln!(out, "sha256: {}", sha256_hex(json.as_bytes()))?;
    Ok(code)
}

pub fn run_explain(args: &ExplainArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let dist = match find_instance(&args.fixture, Some(&args.instance))
        .and_then(|i| i.distribution().map_err(|e| e.to_string()))
    {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SOURCE;
        }
    };
    let variables = extract_decision_variables(&dist);
    let next = sqlclarify::eig::select_variable(&dist, &variables, SelectionStrategy::eig()).ok();
    let table = ExplainTable::build(&dist, &variables, next);
    let result = writeln!(out, "Instance {}: {}", args.instance, dist.question())
        .and_then(|_| print_candidates(out, &dist))
        .and_then(|_| writeln!(out))
        .and_then(|_| out.write_all(table.render().as_bytes()));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn run_eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = load_fixtures(&args.fixture).and_then(|all| {
        let kept = match args.ambiguity_threshold {
            Some(t) => ambiguity_filter(&all, t),
            None => all.clone(),
        };
        Ok((all.len(), EvalInstance::from_fixtures(&kept)?))
    });
    let (total, instances) = match loaded {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SOURCE;
        }
    };
    match eval_reports(args, total, &instances, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn eval_reports(args: &EvalArgs, total: usize, instances: &[EvalInstance], out: &mut dyn Write) -> anyhow::Result<()> {
    let config = EvalConfig { tau: args.tau, max_turns: args.max_turns, seed: args.seed, mode: args.mode };
    SessionConfig { strategy: SelectionStrategy::eig(), tau: config.tau, max_turns: config.max_turns, mode: config.mode }
        .validate()?;
    if let Some(t) = args.ambiguity_threshold {
        writeln!(out, "ambiguity filter (top p < {t}): kept {} of {total} instances", instances.len())?;
    }
    let report = run_ablation(instances, &args.strategy, &config);
    writeln!(out, "{}", report.render_table())?;
    report.write_to(&args.out, "ablation").with_context(|| format!("writing to {}", args.out.display()))?;
    if args.modes {
        let modes = compare_modes(instances, &config);
        writeln!(out, "{}", modes.render_table())?;
        modes.write_to(&args.out, "modes").with_context(|| format!("writing to {}", args.out.display()))?;
    }
    let failures = report.results.iter().filter(|r| r.failure.is_some()).count();
    if failures > 0 {
        writeln!(out, "{failures} session(s) failed; see ablation.json")?;
    }
    writeln!(out, "reports written to {}", args.out.display())?;
    Ok(())
}

pub fn run_serve(args: &ServeArgs, err: &mut dyn Write) -> i32 {
    let mut fixtures = Vec::new();
    for path in &args.fixture {
        match load_fixtures(path) {
            Ok(f) => fixtures.extend(f),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_SOURCE;
            }
        }
    }
    let bind = args
        .bind
        .clone()
        .or_else(|| std::env::var("SERVICE_BIND").ok())
        .unwrap_or_else(|| api::DEFAULT_BIND.to_string());
    let options = ServiceOptions {
        fixtures,
        llm: args.llm_endpoint.clone().map(|endpoint| LlmSettings {
            endpoint,
            model: args.model.clone().unwrap_or_default(),
            api_key_env: args.api_key_env.clone(),
        }),
        idle_timeout: Duration::from_secs(args.idle_timeout),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    match runtime.block_on(api::serve(&bind, options)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}
