use std::fmt::Write;

use crate::error::{Result, XbcfError};
use crate::model::{Matrix, Node, PosteriorDraws, Tree};
use crate::scalar::Scalar;
use crate::xbcf::{cate_draws, Interval};

/// One leaf of a subgroup tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgroup<T> {
    /// Node index of the leaf in [`SubgroupTree::tree`].
    pub leaf: usize,
    pub count: usize,
    pub mean_cate: T,
    /// Fraction of all units, in `[0, 1]`.
    pub share: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgroupTree<T> {
    /// Leaves carry the mean CATE of their units.
    pub tree: Tree<T>,
    /// Leaf node index of every unit.
    pub assignments: Vec<usize>,
    /// One entry per leaf, in node order.
    pub groups: Vec<Subgroup<T>>,
}

struct BestSplit<T> {
    var: usize,
    cut: T,
    gain: T,
    n_left: usize,
}

/// Best variance-reducing split of `idx`, searching every midpoint between
/// consecutive distinct values of every column. Ties keep the first found.
fn best_split<T: Scalar>(idx: &[usize], y: &[T], x: &Matrix<T>, min_leaf: usize) -> Option<BestSplit<T>> {
    let n = idx.len();
    let total: T = idx.iter().map(|&i| y[i]).sum();
    let base = total * total / T::lit(n as f64);
    let mut best: Option<BestSplit<T>> = None;
    let mut order = idx.to_vec();
    for var in 0..x.n_cols() {
        order.sort_by(|&a, &b| x.get(a, var).partial_cmp(&x.get(b, var)).expect("finite"));
        let mut left = T::zero();
        for k in 1..n {
            left += y[order[k - 1]];
            let (lo, hi) = (x.get(order[k - 1], var), x.get(order[k], var));
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right = total - left;
            let gain = left * left / T::lit(k as f64) + right * right / T::lit((n - k) as f64) - base;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(BestSplit {
                    var,
                    cut: lo + (hi - lo) * T::lit(0.5),
                    gain,
                    n_left: k,
                });
            }
        }
    }
    best
}

fn grow<T: Scalar>(
    tree: &mut Tree<T>,
    node: usize,
    idx: Vec<usize>,
    depth: usize,
    y: &[T],
    x: &Matrix<T>,
    max_depth: usize,
    min_leaf: usize,
) {
    let n = idx.len();
    let mean = idx.iter().map(|&i| y[i]).sum::<T>() / T::lit(n as f64);
    tree.set_mu(node, mean);
    if depth >= max_depth || n < 2 * min_leaf {
        return;
    }
    let scale: T = idx.iter().map(|&i| (y[i] - mean) * (y[i] - mean)).sum();
    let Some(split) = best_split(&idx, y, x, min_leaf) else {
        return;
    };
    // reductions within rounding of zero mean the node is already pure
    if scale <= T::zero() || split.gain <= T::lit(1e-10) * scale {
        return;
    }
    let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, split.var) <= split.cut);
    debug_assert_eq!(l_idx.len(), split.n_left);
    let (l, r) = tree.split_leaf(node, split.var, split.cut, T::zero(), T::zero());
    grow(tree, l, l_idx, depth + 1, y, x, max_depth, min_leaf);
    grow(tree, r, r_idx, depth + 1, y, x, max_depth, min_leaf);
}

/// Fits a deterministic least-squares regression tree to point CATE
/// estimates and reports the resulting subgroups.
pub fn subgroup_tree<T: Scalar>(
    cate: &[T],
    x: &Matrix<T>,
    max_depth: usize,
    min_leaf: usize,
) -> Result<SubgroupTree<T>> {
    if cate.len() != x.n_rows() {
        return Err(XbcfError::validation(format!(
            "{} CATE values for {} covariate rows",
            cate.len(),
            x.n_rows()
        )));
    }
    if cate.is_empty() {
        return Err(XbcfError::validation("no units to group"));
    }
    if cate.iter().any(|v| !v.is_finite()) {
        return Err(XbcfError::validation("CATE values must be finite"));
    }
    let min_leaf = min_leaf.max(1);
    let mut tree = Tree::leaf(T::zero());
    grow(&mut tree, 0, (0..cate.len()).collect(), 0, cate, x, max_depth, min_leaf);
    tree.canonicalize();

    let assignments: Vec<usize> = (0..x.n_rows()).map(|i| tree.leaf_index(|j| x.get(i, j))).collect();
    let n = T::lit(cate.len() as f64);
    let groups = tree
        .leaf_indices()
        .into_iter()
        .map(|leaf| {
            let count = assignments.iter().filter(|&&a| a == leaf).count();
            Subgroup {
                leaf,
                count,
                mean_cate: tree.mu(leaf).expect("leaf"),
                share: T::lit(count as f64) / n,
            }
        })
        .collect();
    Ok(SubgroupTree {
        tree,
        assignments,
        groups,
    })
}

/// Posterior of the difference in mean CATE between two subgroups.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgroupDifference<T> {
    pub draws: Vec<T>,
    pub estimate: Interval<T>,
}

/// Difference `mean(group_a) - mean(group_b)` of per-draw CATE vectors.
pub fn subgroup_difference<T: Scalar>(
    per_draw: &[Vec<T>],
    assignments: &[usize],
    group_a: usize,
    group_b: usize,
    level: T,
) -> Result<SubgroupDifference<T>> {
    let members = |g: usize| -> Result<Vec<usize>> {
        let m: Vec<usize> = (0..assignments.len()).filter(|&i| assignments[i] == g).collect();
        if m.is_empty() {
            return Err(XbcfError::validation(format!("subgroup {g} has no units")));
        }
        Ok(m)
    };
    let (a, b) = (members(group_a)?, members(group_b)?);
    if per_draw.is_empty() {
        return Err(XbcfError::validation("no draws"));
    }
    if let Some(d) = per_draw.iter().find(|d| d.len() != assignments.len()) {
        return Err(XbcfError::validation(format!(
            "draw has {} units, assignments have {}",
            d.len(),
            assignments.len()
        )));
    }
    let mean = |d: &[T], m: &[usize]| m.iter().map(|&i| d[i]).sum::<T>() / T::lit(m.len() as f64);
    let draws: Vec<T> = per_draw.iter().map(|d| mean(d, &a) - mean(d, &b)).collect();
    Ok(SubgroupDifference {
        estimate: Interval::from_draws(&draws, level),
        draws,
    })
}

/// [`subgroup_difference`] over the kept draws of a fit, with 95% intervals.
pub fn subgroup_posterior<T: Scalar>(
    draws: &PosteriorDraws<T>,
    x: &Matrix<T>,
    assignments: &[usize],
    group_a: usize,
    group_b: usize,
) -> Result<SubgroupDifference<T>> {
    let per_draw = cate_draws(draws, x)?;
    subgroup_difference(&per_draw, assignments, group_a, group_b, T::lit(0.95))
}

/// Indented text rendering of a subgroup tree with covariate names.
pub fn render_subgroups<T: Scalar>(st: &SubgroupTree<T>, names: &[String]) -> String {
    fn walk<T: Scalar>(st: &SubgroupTree<T>, names: &[String], node: usize, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match st.tree.nodes()[node] {
            Node::Leaf { mu } => {
                let g = st.groups.iter().find(|g| g.leaf == node).expect("leaf group");
                let _ = writeln!(
                    out,
                    "{pad}subgroup {node}: mean CATE {:.4}, n = {}, {:.1}% of sample",
                    mu.as_f64(),
                    g.count,
                    100.0 * g.share.as_f64()
                );
            }
            Node::Split { var, cut, left, right } => {
                let name = names.get(var).cloned().unwrap_or_else(|| format!("x{}", var + 1));
                let _ = writeln!(out, "{pad}{name} <= {:.6}", cut.as_f64());
                walk(st, names, left, depth + 1, out);
                let _ = writeln!(out, "{pad}{name} > {:.6}", cut.as_f64());
                walk(st, names, right, depth + 1, out);
            }
        }
    }
    let mut out = String::new();
    walk(st, names, 0, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_cate_is_one_group() {
        let x = Matrix::from_columns(vec![(0..30).map(|i| i as f64).collect()]).unwrap();
        let st = subgroup_tree(&[2.5; 30], &x, 3, 5).unwrap();
        assert!(st.tree.is_root_only());
        assert_eq!(st.groups.len(), 1);
        assert_eq!(st.groups[0].share, 1.0);
        assert_eq!(st.groups[0].mean_cate, 2.5);
    }

    #[test]
    fn step_in_first_covariate() {
        let x1: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 20.0 + 0.025).collect();
        let x2: Vec<f64> = (0..40).map(|i| ((i * 7) % 40) as f64).collect();
        let cate: Vec<f64> = x1.iter().map(|&v| if v <= 0.0 { -1.0 } else { 2.0 }).collect();
        let x = Matrix::from_columns(vec![x1, x2]).unwrap();
        let st = subgroup_tree(&cate, &x, 1, 1).unwrap();
        match st.tree.nodes()[0] {
            Node::Split { var, cut, .. } => {
                assert_eq!(var, 0);
                assert!(cut.abs() < 0.05);
            }
            _ => panic!("expected a split"),
        }
        let total: f64 = st.groups.iter().map(|g| g.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let text = render_subgroups(&st, &["x1".into(), "x2".into()]);
        assert!(text.starts_with("x1 <= "));
    }

    #[test]
    fn paper_style_difference() {
        let assignments = vec![0, 0, 1, 1];
        let per_draw = vec![vec![1.3, 1.3, -0.46, -0.46]; 10];
        let d = subgroup_difference(&per_draw, &assignments, 0, 1, 0.95).unwrap();
        assert!((d.estimate.mean - 1.76f64).abs() < 1e-12);
        let same = subgroup_difference(&per_draw, &assignments, 1, 1, 0.95).unwrap();
        assert!(same.draws.iter().all(|&v| v == 0.0));
        assert!(subgroup_difference(&per_draw, &assignments, 0, 5, 0.95).is_err());
    }
}
