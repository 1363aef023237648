//! Scoring decision variables by expected information gain, plus the
//! baseline selection strategies used in ablations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::candidate::{entropy_bits, CandidateDistribution, CandidateId};
use crate::sql::{BranchingTree, DecisionVariable, SlotKey, TreeError, VarValue, VariableId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EigError {
    #[error("no decision variables to select from")]
    NoVariables,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueMass {
    pub value: VarValue,
    pub probability: f64,
}

/// P(X = x) for every observed value (UNDEFINED included when present).
pub fn variable_marginal(dist: &CandidateDistribution, var: &DecisionVariable) -> Vec<ValueMass> {
    var.observed_values()
        .into_iter()
        .map(|value| {
            let probability = dist
                .iter()
                .filter(|c| *var.value_of(c.id) == value)
                .map(|c| c.probability)
                .sum();
            ValueMass { value, probability }
        })
        .collect()
}

/// Entropy of the candidates carrying `value`, renormalized.
fn entropy_given(dist: &CandidateDistribution, var: &DecisionVariable, value: &VarValue, mass: f64) -> f64 {
    if mass <= 0.0 {
        return 0.0;
    }
    entropy_bits(
        dist.iter()
            .filter(|c| var.value_of(c.id) == value)
            .map(|c| c.probability / mass),
    )
}

/// H(Y | X) = sum over x of P(x) H(Y | X = x).
pub fn conditional_entropy(dist: &CandidateDistribution, var: &DecisionVariable) -> f64 {
    variable_marginal(dist, var)
        .iter()
        .map(|vm| vm.probability * entropy_given(dist, var, &vm.value, vm.probability))
        .sum()
}

/// I(X; Y) = H(Y) - H(Y | X).
pub fn expected_information_gain(dist: &CandidateDistribution, var: &DecisionVariable) -> f64 {
    (dist.entropy() - conditional_entropy(dist, var)).max(0.0)
}

/// Information gain with every observed value weighted 1/|values| instead of
/// its marginal. The conditional distributions are the true ones. Can be
/// negative.
pub fn uniform_information_gain(dist: &CandidateDistribution, var: &DecisionVariable) -> f64 {
    let marginal = variable_marginal(dist, var);
    let weight = 1.0 / marginal.len() as f64;
    let expected: f64 = marginal
        .iter()
        .map(|vm| weight * entropy_given(dist, var, &vm.value, vm.probability))
        .sum();
    dist.entropy() - expected
}

/// Traversal mass times edge entropy at `var`'s node on the path to `q_star`.
pub fn fast_path_score(tree: &BranchingTree, var: VariableId, q_star: CandidateId) -> Result<f64, EigError> {
    Ok(tree.fast_path_score(var, q_star)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableScore {
    pub variable_id: VariableId,
    pub slot: SlotKey,
    pub marginal: Vec<ValueMass>,
    pub conditional_entropy: f64,
    pub eig: f64,
    /// Only for complete variables, where the tree identity is exact.
    pub fast_path_eig: Option<f64>,
}

/// Fast-path value for a complete variable: root the tree at it so the full
/// mass traverses its node.
fn rooted_fast_path(dist: &CandidateDistribution, variables: &[DecisionVariable], idx: usize) -> Option<f64> {
    let mut order = Vec::with_capacity(variables.len());
    order.push(variables[idx].clone());
    order.extend(variables.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, v)| v.clone()));
    let tree = BranchingTree::build(dist, &order).ok()?;
    tree.fast_path_score(variables[idx].id, dist.top_candidate().id).ok()
}

pub fn score_all(dist: &CandidateDistribution, variables: &[DecisionVariable]) -> Vec<VariableScore> {
    let h = dist.entropy();
    variables
        .iter()
        .enumerate()
        .map(|(idx, var)| {
            let conditional_entropy = conditional_entropy(dist, var);
            VariableScore {
                variable_id: var.id,
                slot: var.slot.clone(),
                marginal: variable_marginal(dist, var),
                conditional_entropy,
                eig: (h - conditional_entropy).max(0.0),
                fast_path_eig: if var.is_complete() { rooted_fast_path(dist, variables, idx) } else { None },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    MaxProbability,
    MinProbability,
    InfoGainUniform,
    ExpectedInfoGain,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::MaxProbability,
        StrategyKind::MinProbability,
        StrategyKind::InfoGainUniform,
        StrategyKind::ExpectedInfoGain,
    ];

    /// Short name used on the command line and in reports.
    pub fn short_name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::MaxProbability => "maxprob",
            StrategyKind::MinProbability => "minprob",
            StrategyKind::InfoGainUniform => "ig",
            StrategyKind::ExpectedInfoGain => "eig",
        }
    }

    /// How the strategy reads the data, echoed in reports.
    pub fn description(self) -> &'static str {
        match self {
            StrategyKind::Random => "uniform random variable (seeded)",
            StrategyKind::MaxProbability => "variable whose most probable value has the largest marginal",
            StrategyKind::MinProbability => "variable whose least probable defined value has the smallest marginal",
            StrategyKind::InfoGainUniform => "information gain with a uniform prior over values",
            StrategyKind::ExpectedInfoGain => "expected information gain under the candidate distribution",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.short_name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown strategy '{s}' (expected random, maxprob, minprob, ig or eig)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionStrategy {
    pub kind: StrategyKind,
    /// Only read by `Random`.
    pub seed: u64,
}

impl SelectionStrategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn eig() -> Self {
        Self::new(StrategyKind::ExpectedInfoGain, 0)
    }
}

impl Default for SelectionStrategy {
    fn default() -> Self {
        Self::eig()
    }
}

/// A strategy together with the random stream it owns.
#[derive(Debug, Clone)]
pub struct Selector {
    strategy: SelectionStrategy,
    rng: ChaCha8Rng,
}

impl Selector {
    pub fn new(strategy: SelectionStrategy) -> Self {
        Self { strategy, rng: ChaCha8Rng::seed_from_u64(strategy.seed) }
    }

    pub fn strategy(&self) -> SelectionStrategy {
        self.strategy
    }

    pub fn select(&mut self, dist: &CandidateDistribution, variables: &[DecisionVariable]) -> Result<VariableId, EigError> {
        if variables.is_empty() {
            return Err(EigError::NoVariables);
        }
        let score = |var: &DecisionVariable| -> f64 {
            match self.strategy.kind {
                StrategyKind::ExpectedInfoGain => expected_information_gain(dist, var),
                StrategyKind::InfoGainUniform => uniform_information_gain(dist, var),
                StrategyKind::MaxProbability => variable_marginal(dist, var)
                    .iter()
                    .map(|vm| vm.probability)
                    .fold(f64::NEG_INFINITY, f64::max),
                StrategyKind::MinProbability => -variable_marginal(dist, var)
                    .iter()
                    .filter(|vm| vm.value != VarValue::Undefined)
                    .map(|vm| vm.probability)
                    .fold(f64::INFINITY, f64::min),
                StrategyKind::Random => 0.0,
            }
        };
        if self.strategy.kind == StrategyKind::Random {
            let pick = self.rng.random_range(0..variables.len());
            return Ok(variables[pick].id);
        }
        Ok(argmax_by_id(variables, score))
    }
}

/// First variable (in id order) attaining the maximum score.
fn argmax_by_id(variables: &[DecisionVariable], score: impl Fn(&DecisionVariable) -> f64) -> VariableId {
    let mut ordered: Vec<&DecisionVariable> = variables.iter().collect();
    ordered.sort_by_key(|v| v.id);
    let mut best = (ordered[0].id, score(ordered[0]));
    for var in &ordered[1..] {
        let s = score(var);
        if s > best.1 + 1e-12 {
            best = (var.id, s);
        }
    }
    best.0
}

/// Selects with a fresh random stream seeded from the strategy.
pub fn select_variable(
    dist: &CandidateDistribution,
    variables: &[DecisionVariable],
    strategy: SelectionStrategy,
) -> Result<VariableId, EigError> {
    Selector::new(strategy).select(dist, variables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::extract_decision_variables;

    fn dist(sqls: &[(&str, f64)]) -> CandidateDistribution {
        CandidateDistribution::from_weighted(
            "q",
            sqls.iter().enumerate().map(|(i, (s, w))| (CandidateId(i as u32 + 1), *s, *w)),
        )
        .unwrap()
    }

    fn fig3() -> CandidateDistribution {
        dist(&[
            ("SELECT * FROM employees WHERE join_date > '2020-01-01' AND department = 'sales'", 0.4),
            ("SELECT employee_id, name FROM employees WHERE join_date > '2020-01-01' AND department = 'sales'", 0.2),
            ("SELECT * FROM employees WHERE join_date >= '2021-01-01' AND department = 'sales'", 0.2),
            ("SELECT employee_id, name FROM employees WHERE join_date >= '2021-01-01' AND department IN ('sales', 'marketing')", 0.2),
        ])
    }

    /// Enumerate answers, filter, renormalize, average entropies.
    fn brute_force_eig(d: &CandidateDistribution, var: &DecisionVariable) -> f64 {
        let mut expected = 0.0;
        for value in var.observed_values() {
            let mass: f64 = d.iter().filter(|c| *var.value_of(c.id) == value).map(|c| c.probability).sum();
            let sub = d.filter_and_renormalize(|c| *var.value_of(c.id) == value).unwrap();
            expected += mass * sub.entropy();
        }
        d.entropy() - expected
    }

    #[test]
    fn fig3_department_variable() {
        let d = fig3();
        let vars = extract_decision_variables(&d);
        let x3 = &vars[2];
        let m = variable_marginal(&d, x3);
        assert!((m[0].probability - 0.8).abs() < 1e-12 && (m[1].probability - 0.2).abs() < 1e-12);
        assert!((conditional_entropy(&d, x3) - 1.2).abs() < 1e-3);
        assert!((expected_information_gain(&d, x3) - 0.722).abs() < 1e-3);
    }

    #[test]
    fn bijective_variable_resolves_everything() {
        let d = dist(&[("SELECT a FROM t", 0.5), ("SELECT b FROM t", 0.3), ("SELECT c FROM t", 0.2)]);
        let vars = extract_decision_variables(&d);
        let m: Vec<f64> = variable_marginal(&d, &vars[0]).iter().map(|v| v.probability).collect();
        assert_eq!(m, d.probabilities().collect::<Vec<_>>());
        assert!(conditional_entropy(&d, &vars[0]).abs() < 1e-12);
        assert!((expected_information_gain(&d, &vars[0]) - d.entropy()).abs() < 1e-12);
    }

    #[test]
    fn single_valued_variable_carries_no_information() {
        let d = dist(&[("SELECT a FROM t WHERE x = 1", 0.6), ("SELECT b FROM t WHERE x = 1", 0.4)]);
        let mut var = extract_decision_variables(&d).remove(0);
        // force a degenerate one-value variable over both candidates
        var.domain = vec!["x = 1".into()];
        var.assignment.values_mut().for_each(|v| *v = VarValue::Defined("x = 1".into()));
        let m = variable_marginal(&d, &var);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].probability, 1.0);
        assert!((conditional_entropy(&d, &var) - d.entropy()).abs() < 1e-12);
        assert_eq!(expected_information_gain(&d, &var), 0.0);
    }

    #[test]
    fn binary_split_of_uniform_four_is_one_bit() {
        let d = dist(&[
            ("SELECT a FROM t WHERE x = 1", 1.0),
            ("SELECT a FROM t WHERE x = 2", 1.0),
            ("SELECT b FROM t WHERE x = 1", 1.0),
            ("SELECT b FROM t WHERE x = 2", 1.0),
        ]);
        for var in extract_decision_variables(&d) {
            let oracle = brute_force_eig(&d, &var);
            assert!((oracle - 1.0).abs() < 1e-12);
            assert!((expected_information_gain(&d, &var) - oracle).abs() < 1e-9);
            let tree = BranchingTree::build(&d, std::slice::from_ref(&var)).unwrap_err();
            assert!(matches!(tree, TreeError::InconsistentAssignment(_)));
        }
        let vars = extract_decision_variables(&d);
        let tree = BranchingTree::build(&d, &vars).unwrap();
        assert!((fast_path_score(&tree, vars[0].id, CandidateId(1)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fig3_fast_path_matches_direct() {
        let d = fig3();
        let vars = extract_decision_variables(&d);
        let scores = score_all(&d, &vars);
        assert_eq!(scores.len(), 3);
        for s in &scores {
            let fast = s.fast_path_eig.expect("fig3 variables are complete");
            assert!((fast - s.eig).abs() < 1e-9);
        }
        assert!((scores[2].fast_path_eig.unwrap() - 0.722).abs() < 1e-3);
        assert!(score_all(&d, &[]).is_empty());
    }

    #[test]
    fn partial_variables_have_no_fast_path() {
        let d = dist(&[("SELECT a FROM t WHERE y = 2", 0.5), ("SELECT a FROM t", 0.5)]);
        let vars = extract_decision_variables(&d);
        assert_eq!(score_all(&d, &vars)[0].fast_path_eig, None);
    }

    #[test]
    fn strategies() {
        let d = fig3();
        let vars = extract_decision_variables(&d);
        // X1 and X2 both split 0.6/0.4 (0.971 bits); X3 splits 0.8/0.2
        assert_eq!(select_variable(&d, &vars, SelectionStrategy::eig()).unwrap(), VariableId(1));
        assert_eq!(
            select_variable(&d, &vars, SelectionStrategy::new(StrategyKind::MaxProbability, 0)).unwrap(),
            VariableId(3)
        );
        assert_eq!(
            select_variable(&d, &vars, SelectionStrategy::new(StrategyKind::MinProbability, 0)).unwrap(),
            VariableId(3)
        );
        assert_eq!(
            select_variable(&d, &[], SelectionStrategy::eig()),
            Err(EigError::NoVariables)
        );
        let random = SelectionStrategy::new(StrategyKind::Random, 7);
        assert_eq!(select_variable(&d, &vars, random), select_variable(&d, &vars, random));
    }

    #[test]
    fn uniform_gain_ignores_marginals() {
        let d = fig3();
        let vars = extract_decision_variables(&d);
        // X3: values sales (0.8, H=1.5) and IN-list (0.2, H=0) weighted 1/2 each
        let expected = d.entropy() - 0.5 * 1.5;
        assert!((uniform_information_gain(&d, &vars[2]) - expected).abs() < 1e-12);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.short_name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("bogus".parse::<StrategyKind>().is_err());
    }
}
