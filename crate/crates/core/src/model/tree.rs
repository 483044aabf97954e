use serde::{Deserialize, Serialize};

use super::dataset::Matrix;
use crate::error::{Result, XbcfError};
use crate::scalar::Scalar;

/// A node of a binary regression tree. Units with `x[var] <= cut` go left.
#[derive(Clone, Debug, PartialEq)]
pub enum Node<T> {
    Leaf {
        mu: T,
    },
    Split {
        var: usize,
        cut: T,
        left: usize,
        right: usize,
    },
}

/// Arena-backed binary tree. Node 0 is the root; trees produced by this
/// crate are kept in pre-order so structurally equal trees compare equal.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(mu: T) -> Self {
        Tree {
            nodes: vec![Node::Leaf { mu }],
        }
    }

    /// Builds a tree from an explicit node list, checking that it forms a
    /// single proper binary tree rooted at node 0.
    pub fn from_nodes(nodes: Vec<Node<T>>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(XbcfError::validation("a tree needs at least one node"));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = stack.pop() {
            if let Node::Split { left, right, .. } = nodes[i] {
                for child in [left, right] {
                    if child >= nodes.len() {
                        return Err(XbcfError::validation(format!(
                            "node {i} points at missing child {child}"
                        )));
                    }
                    if seen[child] {
                        return Err(XbcfError::validation(format!(
                            "node {child} has more than one parent or closes a cycle"
                        )));
                    }
                    seen[child] = true;
                    reached += 1;
                    stack.push(child);
                }
            }
        }
        if reached != nodes.len() {
            return Err(XbcfError::validation(format!(
                "{} nodes are unreachable from the root",
                nodes.len() - reached
            )));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_root_only(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Index of the leaf reached by a unit whose `j`-th feature is `feature(j)`.
    #[inline]
    pub fn leaf_index<F: Fn(usize) -> T>(&self, feature: F) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    var,
                    cut,
                    left,
                    right,
                } => i = if feature(var) <= cut { left } else { right },
            }
        }
    }

    #[inline]
    pub fn predict<F: Fn(usize) -> T>(&self, feature: F) -> T {
        match self.nodes[self.leaf_index(feature)] {
            Node::Leaf { mu } => mu,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        self.predict(|j| row[j])
    }

    /// Leaf values for every row of `x`.
    pub fn predict_matrix(&self, x: &Matrix<T>) -> Vec<T> {
        (0..x.n_rows())
            .map(|i| self.predict(|j| x.get(i, j)))
            .collect()
    }

    pub fn mu(&self, idx: usize) -> Option<T> {
        match self.nodes.get(idx) {
            Some(Node::Leaf { mu }) => Some(*mu),
            _ => None,
        }
    }

    pub fn leaf_indices(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], Node::Leaf { .. }))
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Depth of every node (root has depth 0).
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if let Node::Split { left, right, .. } = self.nodes[i] {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
                stack.push(left);
                stack.push(right);
            }
        }
        depth
    }

    /// Internal nodes whose two children are both leaves.
    pub fn prunable(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| match self.nodes[i] {
                Node::Split { left, right, .. } => {
                    matches!(self.nodes[left], Node::Leaf { .. })
                        && matches!(self.nodes[right], Node::Leaf { .. })
                }
                Node::Leaf { .. } => false,
            })
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn set_mu(&mut self, idx: usize, value: T) {
        match &mut self.nodes[idx] {
            Node::Leaf { mu } => *mu = value,
            Node::Split { .. } => panic!("node {idx} is not a leaf"),
        }
    }

    /// Turns leaf `idx` into a split with two fresh leaves; returns their indices.
    /// The tree is left in non-canonical order until [`Tree::canonicalize`].
    pub fn split_leaf(&mut self, idx: usize, var: usize, cut: T, mu_left: T, mu_right: T) -> (usize, usize) {
        assert!(matches!(self.nodes[idx], Node::Leaf { .. }), "node {idx} is not a leaf");
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(Node::Leaf { mu: mu_left });
        self.nodes.push(Node::Leaf { mu: mu_right });
        self.nodes[idx] = Node::Split {
            var,
            cut,
            left,
            right,
        };
        (left, right)
    }

    /// Replaces the subtree at `idx` with a single leaf and re-canonicalizes.
    pub fn collapse(&mut self, idx: usize, mu: T) {
        self.nodes[idx] = Node::Leaf { mu };
        self.canonicalize();
    }

    /// Relabels nodes in pre-order (left before right) and drops unreachable ones.
    pub fn canonicalize(&mut self) {
        let mut out: Vec<Node<T>> = Vec::with_capacity(self.nodes.len());
        // (old index, slot in parent to patch)
        let mut stack: Vec<(usize, Option<(usize, bool)>)> = vec![(0, None)];
        while let Some((old, parent)) = stack.pop() {
            let new = out.len();
            if let Some((p, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut out[p] {
                    if is_left {
                        *left = new;
                    } else {
                        *right = new;
                    }
                }
            }
            let node = self.nodes[old].clone();
            if let Node::Split { left, right, .. } = node {
                stack.push((right, Some((new, false))));
                stack.push((left, Some((new, true))));
            }
            out.push(node);
        }
        self.nodes = out;
    }

    /// Checks the variable bounds and leaf finiteness.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { mu } if !mu.is_finite() => {
                    return Err(XbcfError::validation(format!("leaf {i} has non-finite mean")))
                }
                Node::Split { var, cut, .. } => {
                    if var >= n_features {
                        return Err(XbcfError::validation(format!(
                            "node {i} splits on column {var}, only {n_features} available"
                        )));
                    }
                    if !cut.is_finite() {
                        return Err(XbcfError::validation(format!(
                            "node {i} has a non-finite cutpoint"
                        )));
                    }
                }
                _ => {}
            }
        }
        Tree::from_nodes(self.nodes.clone()).map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForestRole {
    /// Splits on the covariates plus the propensity column.
    Prognostic,
    /// Splits on the covariates only.
    Treatment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest<T> {
    pub role: ForestRole,
    /// Width of the covariate matrix `X` (excluding the propensity column).
    pub n_covariates: usize,
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> Forest<T> {
    pub fn new(role: ForestRole, n_covariates: usize, trees: Vec<Tree<T>>) -> Self {
        Forest {
            role,
            n_covariates,
            trees,
        }
    }

    /// A forest of `n_trees` root-only trees, all with leaf value `mu`.
    pub fn constant(role: ForestRole, n_covariates: usize, n_trees: usize, mu: T) -> Self {
        Forest::new(role, n_covariates, vec![Tree::leaf(mu); n_trees])
    }

    /// Number of columns trees of this forest may split on.
    pub fn n_features(&self) -> usize {
        match self.role {
            ForestRole::Prognostic => self.n_covariates + 1,
            ForestRole::Treatment => self.n_covariates,
        }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Sum of the leaf values reached by `row` (with propensity `pi` for the
    /// prognostic forest).
    pub fn predict(&self, row: &[T], pi: Option<T>) -> Result<T> {
        if row.len() != self.n_covariates {
            return Err(XbcfError::validation(format!(
                "row has {} covariates, forest was trained on {}",
                row.len(),
                self.n_covariates
            )));
        }
        match self.role {
            ForestRole::Treatment => Ok(self.trees.iter().map(|t| t.predict_row(row)).sum()),
            ForestRole::Prognostic => {
                let pi = pi.ok_or_else(|| {
                    XbcfError::validation("the prognostic forest needs a propensity value")
                })?;
                let d = self.n_covariates;
                Ok(self
                    .trees
                    .iter()
                    .map(|t| t.predict(|j| if j < d { row[j] } else { pi }))
                    .sum())
            }
        }
    }

    /// Forest predictions for every row of `x`.
    pub fn predict_matrix(&self, x: &Matrix<T>, pi: Option<&[T]>) -> Result<Vec<T>> {
        if x.n_cols() != self.n_covariates {
            return Err(XbcfError::validation(format!(
                "matrix has {} covariates, forest was trained on {}",
                x.n_cols(),
                self.n_covariates
            )));
        }
        let d = self.n_covariates;
        match (self.role, pi) {
            (ForestRole::Treatment, _) => Ok((0..x.n_rows())
                .map(|i| self.trees.iter().map(|t| t.predict(|j| x.get(i, j))).sum())
                .collect()),
            (ForestRole::Prognostic, Some(pi)) if pi.len() == x.n_rows() => Ok((0..x.n_rows())
                .map(|i| {
                    self.trees
                        .iter()
                        .map(|t| t.predict(|j| if j < d { x.get(i, j) } else { pi[i] }))
                        .sum()
                })
                .collect()),
            (ForestRole::Prognostic, _) => Err(XbcfError::validation(
                "the prognostic forest needs one propensity value per row",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let width = self.n_features();
        self.trees.iter().try_for_each(|t| t.validate(width))
    }
}

/// Free-function form of [`Forest::predict`].
pub fn predict_forest<T: Scalar>(forest: &Forest<T>, row: &[T], pi: Option<T>) -> Result<T> {
    forest.predict(row, pi)
}
