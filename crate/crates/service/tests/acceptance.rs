//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p sqlclarify-service --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use sqlclarify::candidate::{entropy_bits, CandidateDistribution};
use sqlclarify::clarify::{InteractionMode, SessionConfig};
use sqlclarify::eig::{conditional_entropy, expected_information_gain, fast_path_score, score_all, StrategyKind};
use sqlclarify::eval::synthetic::{dependent_family, random_instances, randomized_tree_family};
use sqlclarify::eval::{ambiguity_filter, compare_modes, run_ablation, EvalConfig, EvalInstance};
use sqlclarify::source::load_fixtures;
use sqlclarify::sql::{extract_decision_variables, slot_value, BranchingTree, DecisionVariable, VarValue};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");
const BIN: &str = env!("CARGO_BIN_EXE_sqlclarify");
const SEED: u64 = 0;

type Check = Result<String, String>;

fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Answer-by-answer enumeration: for every value the variable can take,
/// keep the candidates showing it, renormalize, and average the remaining
/// entropy by the value's mass.
fn brute_force_eig(dist: &CandidateDistribution, var: &DecisionVariable) -> f64 {
    let mut outcomes: Vec<VarValue> = Vec::new();
    for c in dist.iter() {
        let v = slot_value(&c.tokens, &var.slot);
        if !outcomes.contains(&v) {
            outcomes.push(v);
        }
    }
    let mut expected = 0.0;
    for x in &outcomes {
        let mass: f64 = dist.iter().filter(|c| slot_value(&c.tokens, &var.slot) == *x).map(|c| c.probability).sum();
        let posterior = dist
            .filter_and_renormalize(|c| slot_value(&c.tokens, &var.slot) == *x)
            .expect("an observed value has survivors");
        expected += mass * posterior.entropy();
    }
    dist.entropy() - expected
}

fn marginal_entropy(dist: &CandidateDistribution, var: &DecisionVariable) -> f64 {
    let mut mass: BTreeMap<Option<String>, f64> = BTreeMap::new();
    for c in dist.iter() {
        *mass.entry(slot_value(&c.tokens, &var.slot).label().map(str::to_string)).or_default() += c.probability;
    }
    entropy_bits(mass.into_values())
}

fn fig3_golden() -> Check {
    let inst = &load_fixtures(fixture("fig3.json")).map_err(|e| e.to_string())?[0];
    let d = inst.distribution().map_err(|e| e.to_string())?;
    let vars = extract_decision_variables(&d);
    let dept = vars
        .iter()
        .find(|v| v.slot.key == "department")
        .ok_or("no department variable")?;
    let (h, hc, i) = (d.entropy(), conditional_entropy(&d, dept), expected_information_gain(&d, dept));
    let detail = format!("H(Y) = {h:.4}, H(Y|X3) = {hc:.4}, I(X3;Y) = {i:.4}");
    if close(h, 1.922, 1e-3) && close(hc, 1.2, 1e-3) && close(i, 0.722, 1e-3) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn brute_force_oracle() -> Check {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for d in random_instances(200, SEED, false) {
        let vars = extract_decision_variables(&d);
        if d.len() > 8 || vars.len() > 4 {
            return Err(format!("instance too large: {} candidates, {} variables", d.len(), vars.len()));
        }
        for v in &vars {
            let diff = (expected_information_gain(&d, v) - brute_force_eig(&d, v)).abs();
            worst = worst.max(diff);
            checked += 1;
        }
    }
    let detail = format!("{checked} variables over 200 instances, max |diff| = {worst:.2e}");
    if worst <= 1e-9 && checked > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fast_path_equivalence() -> Check {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for d in random_instances(200, SEED, true) {
        let vars = extract_decision_variables(&d);
        if vars.iter().any(|v| !v.is_complete()) {
            return Err("a complete instance produced a partial variable".into());
        }
        for (v, s) in vars.iter().zip(score_all(&d, &vars)) {
            let fast = s.fast_path_eig.ok_or("complete variable without a fast-path value")?;
            let eig = expected_information_gain(&d, v);
            worst = worst.max((fast - eig).abs()).max((eig - marginal_entropy(&d, v)).abs());
            checked += 1;
        }
        if let Some(root) = vars.first() {
            let tree = BranchingTree::build(&d, &vars).map_err(|e| e.to_string())?;
            let direct = fast_path_score(&tree, root.id, d.top_candidate().id).map_err(|e| e.to_string())?;
            worst = worst.max((direct - expected_information_gain(&d, root)).abs());
        }
    }
    let detail = format!("{checked} variables over 200 instances, max |diff| = {worst:.2e}");
    if worst <= 1e-9 && checked > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_convergence() -> Check {
    let corpus = load_fixtures(fixture("corpus.json")).map_err(|e| e.to_string())?;
    let instances = EvalInstance::from_fixtures(&corpus).map_err(|e| e.to_string())?;
    let config = EvalConfig { tau: 1.0, max_turns: 10, seed: SEED, mode: InteractionMode::MultiTurn };
    let report = run_ablation(&instances, &[StrategyKind::ExpectedInfoGain], &config);
    let mut problems = Vec::new();
    for r in &report.results {
        if !r.exact_match {
            problems.push(format!("{}: exact mismatch", r.instance_id));
        }
        if r.execution_match != Some(true) {
            problems.push(format!("{}: execution {:?} {:?}", r.instance_id, r.execution_match, r.execution_error));
        }
        if r.turns > r.initial_variables {
            problems.push(format!("{}: {} turns for {} variables", r.instance_id, r.turns, r.initial_variables));
        }
    }
    let all = report.cell(StrategyKind::ExpectedInfoGain, "all").ok_or("no summary cell")?;
    let detail = format!(
        "{} instances, exact {:.1}%, execution {:.1}%, mean turns {:.2}",
        all.instances,
        all.exact_pct,
        all.execution_pct.unwrap_or(0.0),
        all.mean_turns
    );
    if problems.is_empty() && corpus.len() >= 40 {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

fn strategy_ordering() -> Check {
    let family = randomized_tree_family(200, SEED);
    let config = EvalConfig { tau: 1.0, max_turns: 10, seed: SEED, mode: InteractionMode::MultiTurn };
    let report = run_ablation(&family, &StrategyKind::ALL, &config);
    println!("{}", report.render_table());
    let turns = |k| report.cell(k, "all").map(|c| c.mean_turns).ok_or("missing cell");
    let (eig, ig, random) = (
        turns(StrategyKind::ExpectedInfoGain)?,
        turns(StrategyKind::InfoGainUniform)?,
        turns(StrategyKind::Random)?,
    );
    let detail = format!("mean turns EIG {eig:.3} <= IG {ig:.3} <= Random {random:.3} (seed {SEED})");
    if eig <= ig && ig <= random {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ambiguity_boundary() -> Check {
    let all = load_fixtures(fixture("ambiguity_boundary.json")).map_err(|e| e.to_string())?;
    let expected: Vec<&str> = all
        .iter()
        .filter(|i| {
            let total: f64 = i.candidates.iter().map(|c| c.weight).sum();
            i.candidates.iter().map(|c| c.weight / total).fold(0.0, f64::max) < 0.7
        })
        .map(|i| i.instance_id.as_str())
        .collect();
    let kept = ambiguity_filter(&all, 0.7);
    let kept: Vec<&str> = kept.iter().map(|i| i.instance_id.as_str()).collect();
    let has_exact = all.iter().any(|i| i.top_probability() == Some(0.7));
    let exact_dropped = !kept.iter().any(|id| all.iter().any(|i| i.instance_id == *id && i.top_probability() == Some(0.7)));
    let fig3 = load_fixtures(fixture("fig3.json")).map_err(|e| e.to_string())?;
    let detail = format!("{} of {} kept: {kept:?}", kept.len(), all.len());
    if all.len() == 10 && kept == expected && has_exact && exact_dropped && ambiguity_filter(&fig3, 0.7).len() == 1 {
        Ok(detail)
    } else {
        Err(format!("{detail}, expected {expected:?}"))
    }
}

fn run_cli(args: &[&str], stdin: &str) -> Result<(i32, String), String> {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    use std::io::Write;
    child.stdin.take().expect("piped").write_all(stdin.as_bytes()).map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned()))
}

fn dir_contents(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn hex_sha256_line(stdout: &str) -> Option<String> {
    stdout.lines().find_map(|l| l.strip_prefix("sha256: ")).map(str::to_string)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = fixture("corpus.json");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let (code, stdout) = run_cli(
            &["eval", "--fixture", &corpus, "--seed", "7", "--modes", "--out", out.to_str().unwrap()],
            "",
        )?;
        if code != 0 {
            return Err(format!("eval exited {code}: {stdout}"));
        }
        reports.push(dir_contents(&out)?);
    }
    if reports[0] != reports[1] || reports[0].len() < 6 {
        return Err(format!("eval reports differ or are missing: {:?}", reports[0].keys().collect::<Vec<_>>()));
    }

    let fig3 = fixture("fig3.json");
    let mut hashes = Vec::new();
    for (run, extra) in [("s1", vec![]), ("s2", vec![]), ("r1", vec!["--strategy", "random", "--seed", "7"]), ("r2", vec!["--strategy", "random", "--seed", "7"])] {
        let out = tmp.path().join(run);
        let mut args = vec!["interactive", "--fixture", fig3.as_str(), "--out", out.to_str().unwrap()];
        args.extend(extra);
        let (code, stdout) = run_cli(&args, "1\n1\n1\n1\n")?;
        if code != 0 {
            return Err(format!("interactive exited {code}: {stdout}"));
        }
        let printed = hex_sha256_line(&stdout).ok_or("no transcript hash printed")?;
        let bytes = std::fs::read(out.join("transcript-session.json")).map_err(|e| e.to_string())?;
        let recomputed = sqlclarify_service::cli::sha256_hex(&bytes);
        if printed != recomputed {
            return Err(format!("printed hash {printed} does not match the file ({recomputed})"));
        }
        hashes.push(printed);
    }
    if hashes[0] != hashes[1] || hashes[2] != hashes[3] {
        return Err(format!("transcript hashes differ: {hashes:?}"));
    }
    Ok(format!("{} report files identical; transcript sha256 {}...", reports[0].len(), &hashes[0][..12]))
}

fn mode_comparison() -> Check {
    let family = dependent_family(200, SEED);
    let vars = extract_decision_variables(&family[0].distribution).len();
    let config = EvalConfig { seed: SEED, ..EvalConfig::default() };
    let report = compare_modes(&family, &config);
    println!("{}", report.render_table());
    let single = report.row(InteractionMode::SingleTurn).mean_turns;
    let multi = report.row(InteractionMode::MultiTurn).mean_turns;
    let detail = format!("{vars} variables; mean turns multi {multi:.3} <= single {single:.3}");
    if vars == 3 && multi <= single {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let defaults = SessionConfig::default();
    println!("acceptance (defaults tau = {}, max_turns = {})", defaults.tau, defaults.max_turns);

    let criteria: [(&str, fn() -> Check, Duration); 8] = [
        ("fig3 golden values", fig3_golden, Duration::from_secs(1)),
        ("brute-force EIG oracle", brute_force_oracle, Duration::from_secs(10)),
        ("fast-path equivalence", fast_path_equivalence, Duration::from_secs(10)),
        ("oracle convergence on corpus", oracle_convergence, Duration::from_secs(30)),
        ("strategy ordering", strategy_ordering, Duration::from_secs(60)),
        ("ambiguity filter boundary", ambiguity_boundary, Duration::from_secs(1)),
        ("determinism", determinism, Duration::from_secs(120)),
        ("mode comparison", mode_comparison, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(d) if elapsed > limit => Err(format!("{d}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  {name} [{elapsed:.2?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{elapsed:.2?}]: {detail}");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
