use serde::Serialize;
use thiserror::Error;

use super::variables::{DecisionVariable, VarValue, VariableId};
use crate::candidate::{entropy_bits, CandidateDistribution, CandidateId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("candidates {0:?} share every variable value")]
    InconsistentAssignment(Vec<CandidateId>),
    #[error("variable {variable} is not on the path to {candidate}")]
    VariableNotOnPath { variable: VariableId, candidate: CandidateId },
    #[error("candidate {0} is not a leaf of the tree")]
    UnknownCandidate(CandidateId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        candidate: CandidateId,
        mass: f64,
    },
    Split {
        variable: VariableId,
        mass: f64,
        children: Vec<(VarValue, TreeNode)>,
    },
}

impl TreeNode {
    pub fn mass(&self) -> f64 {
        match self {
            TreeNode::Leaf { mass, .. } | TreeNode::Split { mass, .. } => *mass,
        }
    }

    /// Entropy of the outgoing edge distribution, normalized by node mass.
    pub fn edge_entropy(&self) -> f64 {
        match self {
            TreeNode::Leaf { .. } => 0.0,
            TreeNode::Split { mass, children, .. } => entropy_bits(children.iter().map(|(_, c)| c.mass() / mass)),
        }
    }

    pub fn leaves(&self) -> Vec<(CandidateId, f64)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<(CandidateId, f64)>) {
        match self {
            TreeNode::Leaf { candidate, mass } => out.push((*candidate, *mass)),
            TreeNode::Split { children, .. } => children.iter().for_each(|(_, c)| c.collect_leaves(out)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { children, .. } => 1 + children.iter().map(|(_, c)| c.depth()).max().unwrap_or(0),
        }
    }
}

/// Splits candidates on variables in a fixed order. Internal nodes are
/// variables, edges are values (UNDEFINED is its own edge), leaves are
/// candidates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchingTree {
    pub root: TreeNode,
}

impl BranchingTree {
    pub fn build(dist: &CandidateDistribution, variables: &[DecisionVariable]) -> Result<Self, TreeError> {
        let members: Vec<(CandidateId, f64)> = dist.iter().map(|c| (c.id, c.probability)).collect();
        Ok(Self { root: split(&members, variables)? })
    }

    /// Split nodes from the root to `candidate`'s leaf.
    pub fn path_to(&self, candidate: CandidateId) -> Result<Vec<&TreeNode>, TreeError> {
        let mut path = Vec::new();
        if find_path(&self.root, candidate, &mut path) {
            Ok(path)
        } else {
            Err(TreeError::UnknownCandidate(candidate))
        }
    }

    /// Mass through the node for `variable` on the path to `q_star`, times
    /// the node's edge entropy.
    pub fn fast_path_score(&self, variable: VariableId, q_star: CandidateId) -> Result<f64, TreeError> {
        self.path_to(q_star)?
            .into_iter()
            .find(|n| matches!(n, TreeNode::Split { variable: v, .. } if *v == variable))
            .map(|n| n.mass() * n.edge_entropy())
            .ok_or(TreeError::VariableNotOnPath { variable, candidate: q_star })
    }

    /// Highest fast-path score among the variables on the path to `q_star`;
    /// ties go to the node nearer the root.
    pub fn fast_path_select(&self, q_star: CandidateId) -> Result<Option<(VariableId, f64)>, TreeError> {
        let mut best: Option<(VariableId, f64)> = None;
        for node in self.path_to(q_star)? {
            if let TreeNode::Split { variable, .. } = node {
                let score = node.mass() * node.edge_entropy();
                if best.is_none_or(|(_, b)| score > b + 1e-12) {
                    best = Some((*variable, score));
                }
            }
        }
        Ok(best)
    }
}

fn find_path<'a>(node: &'a TreeNode, target: CandidateId, path: &mut Vec<&'a TreeNode>) -> bool {
    match node {
        TreeNode::Leaf { candidate, .. } => *candidate == target,
        TreeNode::Split { children, .. } => {
            path.push(node);
            if children.iter().any(|(_, c)| find_path(c, target, path)) {
                return true;
            }
            path.pop();
            false
        }
    }
}

fn split(members: &[(CandidateId, f64)], variables: &[DecisionVariable]) -> Result<TreeNode, TreeError> {
    let mass: f64 = members.iter().map(|m| m.1).sum();
    if let [(candidate, _)] = members {
        return Ok(TreeNode::Leaf { candidate: *candidate, mass });
    }
    let Some((var, rest)) = variables.split_first() else {
        return Err(TreeError::InconsistentAssignment(members.iter().map(|m| m.0).collect()));
    };
    let mut children = Vec::new();
    for value in var.observed_values() {
        let group: Vec<(CandidateId, f64)> =
            members.iter().copied().filter(|(id, _)| *var.value_of(*id) == value).collect();
        if !group.is_empty() {
            children.push((value, split(&group, rest)?));
        }
    }
    Ok(TreeNode::Split { variable: var.id, mass, children })
}
