use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use super::exec::{execution_match, ExecutionError, Side, SqliteBackend};
use super::{EvalInstance, OracleUser};
use crate::clarify::{run_session, InteractionMode, SessionConfig, DEFAULT_MAX_TURNS, DEFAULT_TAU};
use crate::eig::{SelectionStrategy, StrategyKind};
use crate::source::Difficulty;
use crate::sql::{exact_set_match, extract_decision_variables, tokenize_sql};

/// Session settings shared by every run of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tau: f64,
    pub max_turns: usize,
    pub seed: u64,
    pub mode: InteractionMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, max_turns: DEFAULT_MAX_TURNS, seed: 0, mode: InteractionMode::MultiTurn }
    }
}

impl EvalConfig {
    fn session(&self, kind: StrategyKind, seed: u64) -> SessionConfig {
        SessionConfig {
            strategy: SelectionStrategy::new(kind, seed),
            tau: self.tau,
            max_turns: self.max_turns,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance_id: String,
    pub strategy: StrategyKind,
    pub difficulty: Option<Difficulty>,
    pub final_sql: Option<String>,
    pub exact_match: bool,
    /// `None` without a database or when gold itself fails to run.
    pub execution_match: Option<bool>,
    pub execution_error: Option<ExecutionError>,
    pub turns: usize,
    pub initial_variables: usize,
    pub final_entropy: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub strategy: StrategyKind,
    /// A difficulty tag, `untagged`, or `all`.
    pub group: String,
    pub instances: usize,
    pub exact_pct: f64,
    /// Over the instances that could be executed.
    pub execution_pct: Option<f64>,
    pub executed: usize,
    pub mean_turns: f64,
    pub mean_final_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: EvalConfig,
    pub strategies: Vec<StrategyKind>,
    pub instance_total: usize,
    pub cells: Vec<AblationCell>,
    pub results: Vec<InstanceResult>,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn group_name(d: Option<Difficulty>) -> String {
    d.map_or_else(|| "untagged".to_string(), |d| d.to_string())
}

fn evaluate(inst: &EvalInstance, kind: StrategyKind, config: &EvalConfig, seed: u64) -> InstanceResult {
    let initial_variables = extract_decision_variables(&inst.distribution).len();
    let mut result = InstanceResult {
        instance_id: inst.instance_id.clone(),
        strategy: kind,
        difficulty: inst.difficulty,
        final_sql: None,
        exact_match: false,
        execution_match: None,
        execution_error: None,
        turns: 0,
        initial_variables,
        final_entropy: None,
        failure: None,
    };
    let gold = match tokenize_sql(&inst.gold_sql) {
        Ok(g) => g,
        Err(e) => {
            result.failure = Some(format!("gold does not parse: {e}"));
            return result;
        }
    };
    let mut oracle = OracleUser::new(gold.clone());
    let outcome = match run_session(config.session(kind, seed), inst.distribution.clone(), &mut oracle) {
        Ok(o) => o,
        Err(failure) => {
            result.turns = failure.transcript.turns.len();
            result.failure = Some(failure.reason);
            return result;
        }
    };
    result.turns = outcome.transcript.turns.len();
    result.final_entropy = outcome.transcript.entropy_trace.last().copied();
    let final_sql = outcome.result.sql.clone();
    if let Ok(tokens) = tokenize_sql(&final_sql) {
        result.exact_match = exact_set_match(&tokens, &gold);
    }
    if let Some(rows) = &inst.database {
        match SqliteBackend::new(&inst.schema, Some(rows)) {
            Ok(mut db) => match execution_match(&final_sql, &inst.gold_sql, &mut db) {
                Ok(m) => result.execution_match = Some(m),
                Err(e) => {
                    if e.side == Side::Predicted {
                        result.execution_match = Some(false);
                    }
                    result.execution_error = Some(e);
                }
            },
            Err(message) => {
                result.execution_error = Some(ExecutionError { side: Side::Gold, message });
            }
        }
    }
    result.final_sql = Some(final_sql);
    result
}

fn cell(strategy: StrategyKind, group: String, results: &[&InstanceResult]) -> AblationCell {
    let executed: Vec<bool> = results.iter().filter_map(|r| r.execution_match).collect();
    AblationCell {
        strategy,
        group,
        instances: results.len(),
        exact_pct: pct(results.iter().filter(|r| r.exact_match).count(), results.len()),
        execution_pct: (!executed.is_empty()).then(|| pct(executed.iter().filter(|m| **m).count(), executed.len())),
        executed: executed.len(),
        mean_turns: mean(results.iter().map(|r| r.turns as f64)),
        mean_final_entropy: mean(results.iter().filter_map(|r| r.final_entropy)),
    }
}

/// Runs every strategy on every instance with a truthful oracle and
/// aggregates per difficulty tag. Instance `i` seeds its random stream with
/// `config.seed + i`.
pub fn run_ablation(instances: &[EvalInstance], strategies: &[StrategyKind], config: &EvalConfig) -> AblationReport {
    let mut results = Vec::with_capacity(instances.len() * strategies.len());
    for &kind in strategies {
        for (i, inst) in instances.iter().enumerate() {
            results.push(evaluate(inst, kind, config, config.seed.wrapping_add(i as u64)));
        }
    }
    let mut groups: Vec<Option<Difficulty>> = Difficulty::ALL.iter().map(|d| Some(*d)).collect();
    if instances.iter().any(|i| i.difficulty.is_none()) {
        groups.push(None);
    }
    let mut cells = Vec::new();
    for &kind in strategies {
        let mine: Vec<&InstanceResult> = results.iter().filter(|r| r.strategy == kind).collect();
        for &g in &groups {
            let members: Vec<&InstanceResult> = mine.iter().copied().filter(|r| r.difficulty == g).collect();
            cells.push(cell(kind, group_name(g), &members));
        }
        cells.push(cell(kind, "all".into(), &mine));
    }
    AblationReport { config: *config, strategies: strategies.to_vec(), instance_total: instances.len(), cells, results }
}

fn strategy_label(kind: StrategyKind) -> &'static str {
    match kind {
        StrategyKind::Random => "Random Select",
        StrategyKind::MinProbability => "Min Probability",
        StrategyKind::MaxProbability => "Max Probability",
        StrategyKind::InfoGainUniform => "Info Gain",
        StrategyKind::ExpectedInfoGain => "Expected Info Gain",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

impl AblationReport {
    pub fn cell(&self, strategy: StrategyKind, group: &str) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.strategy == strategy && c.group == group)
    }

    fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = Vec::new();
        for c in &self.cells {
            if !g.contains(&c.group) {
                g.push(c.group.clone());
            }
        }
        g
    }

    /// Plain-text table: a count row, then exact-match, execution and
    /// mean-turn sections with one row per strategy and one column per group.
    pub fn render_table(&self) -> String {
        let groups = self.groups();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "tau = {}, max_turns = {}, seed = {}, mode = {}",
            self.config.tau, self.config.max_turns, self.config.seed, self.config.mode
        );
        let header: Vec<String> = groups.iter().map(|g| format!("{:>9}", title_case(g))).collect();
        let _ = writeln!(out, "{:<20}{}", "Type", header.join(""));
        if let Some(&first) = self.strategies.first() {
            let counts: Vec<String> = groups
                .iter()
                .map(|g| format!("{:>9}", self.cell(first, g).map_or(0, |c| c.instances)))
                .collect();
            let _ = writeln!(out, "{:<20}{}", "Num", counts.join(""));
        }
        let sections: [(&str, &dyn Fn(&AblationCell) -> String); 3] = [
            ("Exact match", &|c| format!("{:.1}", c.exact_pct)),
            ("Execution", &|c| fmt_opt(c.execution_pct)),
            ("Mean turns", &|c| format!("{:.2}", c.mean_turns)),
        ];
        for (title, value) in sections {
            let _ = writeln!(out, "-- {title}");
            for &kind in &self.strategies {
                let row: Vec<String> = groups
                    .iter()
                    .map(|g| format!("{:>9}", self.cell(kind, g).map_or_else(|| "-".into(), value)))
                    .collect();
                let _ = writeln!(out, "{:<20}{}", strategy_label(kind), row.join(""));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,group,instances,exact_pct,execution_pct,executed,mean_turns,mean_final_entropy\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{},{},{:.4},{:.4}",
                c.strategy,
                c.group,
                c.instances,
                c.exact_pct,
                c.execution_pct.map_or_else(String::new, |v| format!("{v:.4}")),
                c.executed,
                c.mean_turns,
                c.mean_final_entropy
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Writes `{stem}.csv`, `{stem}.json` and `{stem}.txt` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>, stem: &str) -> std::io::Result<()> {
        write_report(dir.as_ref(), stem, &self.to_csv(), &self.to_json(), &self.render_table())
    }
}

fn title_case(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().collect::<String>() + c.as_str())
}

fn write_report(dir: &Path, stem: &str, csv: &str, json: &str, table: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    std::fs::write(dir.join(format!("{stem}.txt")), table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: InteractionMode,
    pub instances: usize,
    pub exact_pct: f64,
    pub execution_pct: Option<f64>,
    pub mean_turns: f64,
}

/// The same EIG ablation run once per interaction mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub config: EvalConfig,
    pub rows: Vec<ModeRow>,
    pub results: Vec<InstanceResult>,
}

pub fn compare_modes(instances: &[EvalInstance], config: &EvalConfig) -> ModeComparison {
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for mode in [InteractionMode::SingleTurn, InteractionMode::MultiTurn] {
        let cfg = EvalConfig { mode, ..*config };
        let report = run_ablation(instances, &[StrategyKind::ExpectedInfoGain], &cfg);
        let all = report.cell(StrategyKind::ExpectedInfoGain, "all").expect("all cell").clone();
        rows.push(ModeRow {
            mode,
            instances: all.instances,
            exact_pct: all.exact_pct,
            execution_pct: all.execution_pct,
            mean_turns: all.mean_turns,
        });
        results.extend(report.results);
    }
    ModeComparison { config: *config, rows, results }
}

impl ModeComparison {
    pub fn row(&self, mode: InteractionMode) -> &ModeRow {
        self.rows.iter().find(|r| r.mode == mode).expect("both modes are run")
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("{:<14}{:>12}{:>12}{:>12}\n", "Method", "Exact match", "Execution", "Mean turns");
        for r in &self.rows {
            let label = match r.mode {
                InteractionMode::SingleTurn => "Single-turn",
                InteractionMode::MultiTurn => "Multi-turn",
            };
            let _ = writeln!(out, "{label:<14}{:>12.1}{:>12}{:>12.2}", r.exact_pct, fmt_opt(r.execution_pct), r.mean_turns);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,instances,exact_pct,execution_pct,mean_turns\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.4},{},{:.4}",
                r.mode,
                r.instances,
                r.exact_pct,
                r.execution_pct.map_or_else(String::new, |v| format!("{v:.4}")),
                r.mean_turns
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn write_to(&self, dir: impl AsRef<Path>, stem: &str) -> std::io::Result<()> {
        write_report(dir.as_ref(), stem, &self.to_csv(), &self.to_json(), &self.render_table())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse_fixtures;

    fn fig3() -> EvalInstance {
        let f = parse_fixtures(include_str!("../../fixtures/fig3.json")).unwrap();
        EvalInstance::from_fixture(&f[0]).unwrap()
    }

    #[test]
    fn fig3_with_second_candidate_as_gold() {
        let mut inst = fig3();
        inst.gold_sql = inst.distribution.get(crate::candidate::CandidateId(2)).unwrap().sql_text.clone();
        let r = run_ablation(&[inst.clone()], &[StrategyKind::ExpectedInfoGain], &EvalConfig::default());
        assert_eq!(r.results.len(), 1);
        assert_eq!(r.results[0].final_sql.as_deref(), Some(inst.gold_sql.as_str()));
        assert!(r.results[0].exact_match);
        assert_eq!(r.results[0].execution_match, Some(true));
        assert!(r.results[0].turns <= 3);
    }

    #[test]
    fn empty_strategy_list() {
        let r = run_ablation(&[fig3()], &[], &EvalConfig::default());
        assert!(r.cells.is_empty() && r.results.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = EvalConfig { seed: 11, ..EvalConfig::default() };
        let a = run_ablation(&[fig3()], &StrategyKind::ALL, &cfg);
        let b = run_ablation(&[fig3()], &StrategyKind::ALL, &cfg);
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn cell_counts_sum_to_total() {
        let r = run_ablation(&[fig3(), fig3()], &StrategyKind::ALL, &EvalConfig::default());
        for kind in StrategyKind::ALL {
            let sum: usize = r.cells.iter().filter(|c| c.strategy == kind && c.group != "all").map(|c| c.instances).sum();
            assert_eq!(sum, 2);
            assert_eq!(r.cell(kind, "all").unwrap().instances, 2);
        }
        for c in &r.cells {
            assert!((0.0..=100.0).contains(&c.exact_pct));
        }
        let table = r.render_table();
        assert!(table.contains("Expected Info Gain"));
        assert!(table.lines().any(|l| l.starts_with("Num")));
    }

    #[test]
    fn single_variable_instances_agree_across_modes() {
        let f = parse_fixtures(include_str!("../../fixtures/ambiguity_boundary.json")).unwrap();
        let insts = EvalInstance::from_fixtures(&f).unwrap();
        let m = compare_modes(&insts, &EvalConfig::default());
        let single = m.row(InteractionMode::SingleTurn);
        let multi = m.row(InteractionMode::MultiTurn);
        assert_eq!(single.exact_pct, multi.exact_pct);
        assert_eq!(single.mean_turns, multi.mean_turns);
    }
}
