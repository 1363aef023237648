//! Seeded synthetic candidate families over a single table
//! `t(a, b, c, x, y, z)`.

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalInstance;
use crate::candidate::{CandidateDistribution, CandidateId, WeightedCandidate};
use crate::source::{Column, Difficulty, Schema, Table};

const SELECTS: [&str; 4] = ["a", "b", "a, b", "c"];
const CONDITIONS: [[&str; 4]; 3] = [
    ["x = 1", "x = 2", "x > 1", "x >= 1"],
    ["y = 'p'", "y = 'q'", "y <> 'p'", "y IN ('p', 'q')"],
    ["z < 10", "z <= 10", "z > 5", "z BETWEEN 1 AND 9"],
];
const SLOTS: usize = 4;

type Assignment = [Option<usize>; SLOTS];

fn render(assign: &Assignment) -> String {
    let select = assign[0].map_or("*", |v| SELECTS[v]);
    let conds: Vec<&str> = (1..SLOTS).filter_map(|s| assign[s].map(|v| CONDITIONS[s - 1][v])).collect();
    if conds.is_empty() {
        format!("SELECT {select} FROM t")
    } else {
        format!("SELECT {select} FROM t WHERE {}", conds.join(" AND "))
    }
}

fn weighted(question: &str, sqls: Vec<String>, rng: &mut ChaCha8Rng) -> CandidateDistribution {
    CandidateDistribution::from_weighted(
        question,
        sqls.iter().enumerate().map(|(i, s)| (CandidateId(i as u32 + 1), s.as_str(), rng.random_range(0.05..1.0))),
    )
    .expect("synthetic candidates are valid")
}

/// Candidates as the leaves of a random branching tree: starting from one
/// empty query, a random leaf is repeatedly split on one of its unset slots
/// into 2-3 alternatives. Slots never set on a path stay absent.
pub fn random_tree_distribution(rng: &mut ChaCha8Rng, max_candidates: usize) -> CandidateDistribution {
    let target = rng.random_range(2..=max_candidates.max(2));
    let mut leaves: Vec<Assignment> = vec![[None; SLOTS]];
    while leaves.len() < target {
        let splittable: Vec<usize> = (0..leaves.len()).filter(|&i| leaves[i].iter().any(Option::is_none)).collect();
        let Some(&li) = splittable.choose(rng) else { break };
        let leaf = leaves.swap_remove(li);
        let slot = (0..SLOTS).filter(|&s| leaf[s].is_none()).choose(rng).expect("splittable leaf has a free slot");
        let arity = rng.random_range(2..=3usize).min(target - leaves.len());
        for value in (0..4).choose_multiple(rng, arity) {
            let mut child = leaf;
            child[slot] = Some(value);
            leaves.push(child);
        }
    }
    weighted("synthetic tree", leaves.iter().map(render).collect(), rng)
}

/// Candidates that set every slot, so every extracted variable is complete.
pub fn complete_distribution(rng: &mut ChaCha8Rng, max_candidates: usize) -> CandidateDistribution {
    let target = rng.random_range(2..=max_candidates.max(2));
    let mut rows: Vec<Assignment> = Vec::new();
    while rows.len() < target {
        let row: Assignment = std::array::from_fn(|_| Some(rng.random_range(0..4)));
        if !rows.contains(&row) {
            rows.push(row);
        }
    }
    weighted("synthetic complete", rows.iter().map(render).collect(), rng)
}

/// Draws one candidate with probability equal to its weight.
pub fn sample_candidate<'a>(dist: &'a CandidateDistribution, rng: &mut ChaCha8Rng) -> &'a WeightedCandidate {
    let mut u: f64 = rng.random_range(0.0..1.0);
    for c in dist.iter() {
        if u < c.probability {
            return c;
        }
        u -= c.probability;
    }
    dist.candidates().last().expect("distributions are nonempty")
}

fn synthetic_schema() -> Schema {
    let columns = ["a", "b", "c", "x", "z"]
        .iter()
        .map(|n| Column { name: n.to_string(), ty: "INTEGER".into() })
        .chain(std::iter::once(Column { name: "y".into(), ty: "TEXT".into() }))
        .collect();
    Schema { tables: vec![Table { name: "t".into(), columns, foreign_keys: Vec::new() }] }
}

fn difficulty_for(candidates: usize) -> Difficulty {
    match candidates {
        0..=2 => Difficulty::Easy,
        3..=4 => Difficulty::Medium,
        5..=6 => Difficulty::Hard,
        _ => Difficulty::Extra,
    }
}

fn instance(id: String, dist: CandidateDistribution, rng: &mut ChaCha8Rng) -> EvalInstance {
    let gold_sql = sample_candidate(&dist, rng).sql_text.clone();
    EvalInstance {
        instance_id: id,
        difficulty: Some(difficulty_for(dist.len())),
        distribution: dist,
        gold_sql,
        schema: synthetic_schema(),
        database: None,
    }
}

/// `count` random-tree instances of at most 8 candidates, gold drawn from
/// each candidate distribution.
pub fn randomized_tree_family(count: usize, seed: u64) -> Vec<EvalInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let dist = random_tree_distribution(&mut rng, 8);
            instance(format!("tree_{i:03}"), dist, &mut rng)
        })
        .collect()
}

/// Three nested decisions: a table choice, then (for one table) a filter,
/// then (for one filter value) an ordering.
pub fn dependent_family(count: usize, seed: u64) -> Vec<EvalInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (lo, hi) = (rng.random_range(1..50), rng.random_range(50..100));
            let sqls = vec![
                format!("SELECT a FROM t WHERE x = {lo} ORDER BY a"),
                format!("SELECT a FROM t WHERE x = {lo}"),
                format!("SELECT a FROM t WHERE x = {hi}"),
                "SELECT a FROM u".to_string(),
            ];
            let dist = weighted("synthetic dependent", sqls, &mut rng);
            let mut inst = instance(format!("dependent_{i:03}"), dist, &mut rng);
            inst.schema.tables.push(Table {
                name: "u".into(),
                columns: vec![Column { name: "a".into(), ty: "INTEGER".into() }],
                foreign_keys: Vec::new(),
            });
            inst
        })
        .collect()
}

/// Small random instances for property checks: tree-shaped, or complete
/// when `complete` is set.
pub fn random_instances(count: usize, seed: u64, complete: bool) -> Vec<CandidateDistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| if complete { complete_distribution(&mut rng, 8) } else { random_tree_distribution(&mut rng, 8) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::extract_decision_variables;

    #[test]
    fn tree_instances_are_small_and_distinct() {
        for d in random_instances(100, 1, false) {
            assert!(d.len() >= 2 && d.len() <= 8, "{}", d.len());
            assert!(extract_decision_variables(&d).len() <= 4);
        }
    }

    #[test]
    fn complete_instances_have_complete_variables() {
        for d in random_instances(50, 2, true) {
            for v in extract_decision_variables(&d) {
                assert!(v.is_complete());
            }
        }
    }

    #[test]
    fn families_are_seeded() {
        assert_eq!(randomized_tree_family(5, 9), randomized_tree_family(5, 9));
        let dep = dependent_family(3, 4);
        assert_eq!(extract_decision_variables(&dep[0].distribution).len(), 3);
    }
}
