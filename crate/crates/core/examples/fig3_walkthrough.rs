//! Scores the four employee queries and applies one answer.
//!
//!     cargo run -p sqlclarify --example fig3_walkthrough

use sqlclarify::clarify::{render_question, Answer, SessionConfig, SessionState, StepOutcome};
use sqlclarify::eig::{score_all, select_variable, SelectionStrategy, StrategyKind};
use sqlclarify::source::load_fixtures;
use sqlclarify::sql::{extract_decision_variables, BranchingTree, TreeNode};

fn print_tree(node: &TreeNode, label: &str, depth: usize) {
    let pad = "  ".repeat(depth);
    match node {
        TreeNode::Leaf { candidate, mass } => println!("{pad}{label}{candidate} p={mass:.2}"),
        TreeNode::Split { variable, mass, children } => {
            println!("{pad}{label}{variable} (mass {mass:.2}, edge entropy {:.3})", node.edge_entropy());
            for (value, child) in children {
                print_tree(child, &format!("[{value}] "), depth + 1);
            }
        }
    }
}

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig3.json");
    let inst = load_fixtures(path).expect("bundled fixture").remove(0);
    let dist = inst.distribution().unwrap();

    println!("{}", dist.question());
    for c in dist.iter() {
        println!("  {} p={:.1}  {}", c.id, c.probability, c.sql_text);
    }
    println!("H(Y) = {:.3}\n", dist.entropy());

    let vars = extract_decision_variables(&dist);
    for s in score_all(&dist, &vars) {
        let marginal: Vec<String> = s.marginal.iter().map(|m| format!("{}={:.1}", m.value, m.probability)).collect();
        println!(
            "{} {:<20} H(Y|X)={:.3}  I={:.3}  fast path={:?}  [{}]",
            s.variable_id,
            s.slot.to_string(),
            s.conditional_entropy,
            s.eig,
            s.fast_path_eig.map(|v| (v * 1000.0).round() / 1000.0),
            marginal.join(", ")
        );
    }

    println!("\nbranching tree in extraction order:");
    let tree = BranchingTree::build(&dist, &vars).unwrap();
    print_tree(&tree.root, "", 1);

    for kind in StrategyKind::ALL {
        let picked = select_variable(&dist, &vars, SelectionStrategy::new(kind, 0)).unwrap();
        println!("{:<8} asks {picked}", kind.short_name());
    }

    // answer the department question with its 0.8 branch
    let dept = vars.iter().find(|v| v.slot.key == "department").unwrap();
    let question = render_question(dept, dist.question());
    println!("\n{}", question.text);
    let config = SessionConfig { strategy: SelectionStrategy::new(StrategyKind::MaxProbability, 0), ..Default::default() };
    let mut state = SessionState::new(config, dist).unwrap();
    let StepOutcome::QuestionIssued(q) = state.step() else { unreachable!() };
    assert_eq!(q.slot, dept.slot);
    let chosen = q.options[0].choice.clone();
    println!("-> {chosen}");
    state.apply_answer(Answer { variable_id: q.variable_id, chosen }).unwrap();
    for c in state.distribution().iter() {
        println!("  {} p={:.2}", c.id, c.probability);
    }
    println!("H = {:.3}", state.distribution().entropy());
}
