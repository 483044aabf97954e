//! Grow-from-root stochastic tree sampling.
//!
//! Each node enumerates candidate cutpoints, scores every candidate by the
//! integrated likelihood of the two children, scores "stop here" by the
//! integrated likelihood of the node times the tree-prior odds, and draws one
//! option at random. Chosen splits recurse; stops become leaves whose mean is
//! drawn from the conjugate posterior.
//!
//! Covariates are sorted once per fit. Every tree starts from a copy of that
//! order and nodes are stable-partitioned in place, so each level costs
//! `O(p n)` and candidate statistics come from one left-to-right sweep per
//! variable.

use rand::Rng;

use crate::error::Result;
use crate::model::{GroupedSuffStats, Hyperparams, LeafModel, Matrix, Node, Tree};
use crate::scalar::Scalar;

/// Candidate cutpoints per variable for one node.
#[derive(Clone, Debug, PartialEq)]
pub struct CutpointGrid<T> {
    pub per_var: Vec<Vec<T>>,
}

impl<T: Scalar> CutpointGrid<T> {
    /// Total number of candidates `|C|`.
    pub fn total(&self) -> usize {
        self.per_var.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// `(variable, cutpoint)` pairs in variable-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.per_var
            .iter()
            .enumerate()
            .flat_map(|(j, cuts)| cuts.iter().map(move |&c| (j, c)))
    }
}

/// Split positions `b` (units `..b` go left) over `n` sorted values.
///
/// Only positions between distinct values qualify. When more than
/// `max_cutpoints` qualify, targets at ranks `j n / (max + 1)` are snapped to
/// the next qualifying position and repeats are dropped.
pub(crate) fn boundary_positions<T: Scalar, F: Fn(usize) -> T>(
    n: usize,
    value: F,
    max_cutpoints: usize,
    out: &mut Vec<usize>,
) {
    out.clear();
    if n < 2 || max_cutpoints == 0 {
        return;
    }
    for b in 1..n {
        if value(b - 1) < value(b) {
            out.push(b);
        }
    }
    if out.len() <= max_cutpoints {
        return;
    }
    let valid = std::mem::take(out);
    let denom = (max_cutpoints + 1) as f64;
    for j in 1..=max_cutpoints {
        let target = ((j as f64) * (n as f64) / denom).round() as usize;
        let k = valid.partition_point(|&b| b < target).min(valid.len() - 1);
        let b = valid[k];
        if out.last() != Some(&b) {
            out.push(b);
        }
    }
}

#[inline]
pub(crate) fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let m = lo + (hi - lo) * T::lit(0.5);
    // adjacent floats can round the midpoint up onto `hi`
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Candidate cutpoints for the rows of `node_data`: midpoints between sorted
/// values at up to `max_cutpoints` evenly spaced ranks per variable.
/// Constant variables contribute nothing.
pub fn build_cutpoints<T: Scalar>(node_data: &Matrix<T>, max_cutpoints: usize) -> CutpointGrid<T> {
    let mut pos = Vec::new();
    let per_var = (0..node_data.n_cols())
        .map(|j| {
            let mut v = node_data.column(j).to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).expect("covariates are finite"));
            boundary_positions(v.len(), |k| v[k], max_cutpoints, &mut pos);
            pos.iter().map(|&b| midpoint(v[b - 1], v[b])).collect()
        })
        .collect();
    CutpointGrid { per_var }
}

/// Log of the tree-prior factor on the stop option: `|C| ((1+d)^beta / alpha - 1)`.
pub fn no_split_log_prior<T: Scalar>(n_candidates: usize, depth: usize, alpha: T, beta: T) -> T {
    let odds = T::lit(1.0 + depth as f64).powf(beta) / alpha - T::one();
    T::lit(n_candidates as f64).ln() + odds.ln()
}

/// Normalized selection probabilities for one node.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitWeights<T> {
    pub candidates: Vec<T>,
    pub no_split: T,
}

/// Turns log-weights into probabilities in place (max-subtracted before
/// exponentiating). Returns the normalizing sum of the shifted weights.
pub fn normalize_log_weights<T: Scalar>(w: &mut [T]) -> T {
    let max = w.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    total
}

/// Selection probabilities for each candidate split and for stopping.
///
/// `left` holds the left-child statistics of every candidate; the right child
/// is `whole - left`. With no candidates the stop option has probability 1.
pub fn split_weights<T: Scalar>(
    left: &[GroupedSuffStats<T>],
    whole: GroupedSuffStats<T>,
    leaf: &LeafModel<T>,
    depth: usize,
    alpha: T,
    beta: T,
) -> SplitWeights<T> {
    if left.is_empty() {
        return SplitWeights {
            candidates: Vec::new(),
            no_split: T::one(),
        };
    }
    let mut w: Vec<T> = left
        .iter()
        .map(|l| leaf.log_marginal(l) + leaf.log_marginal(&(whole - *l)))
        .collect();
    w.push(no_split_log_prior(left.len(), depth, alpha, beta) + leaf.log_marginal(&whole));
    normalize_log_weights(&mut w);
    let no_split = w.pop().unwrap_or_else(T::zero);
    SplitWeights {
        candidates: w,
        no_split,
    }
}

/// Draws an index with probability proportional to `weights` (non-negative,
/// not necessarily normalized).
pub fn draw_categorical<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total: T = weights.iter().copied().sum();
    let u = T::sample_open01(rng) * total;
    let mut acc = T::zero();
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding left u at the very top; take the last positive weight
    weights.iter().rposition(|&w| w > T::zero()).unwrap_or(0)
}

/// Stopping rules and tree-prior constants used while growing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowConfig<T> {
    pub alpha: T,
    pub beta: T,
    pub max_cutpoints: usize,
    pub min_node_size: usize,
    pub max_depth: usize,
}

impl<T: Scalar> From<&Hyperparams<T>> for GrowConfig<T> {
    fn from(hp: &Hyperparams<T>) -> Self {
        GrowConfig {
            alpha: hp.alpha,
            beta: hp.beta,
            max_cutpoints: hp.max_cutpoints,
            min_node_size: hp.min_node_size,
            max_depth: hp.max_depth,
        }
    }
}

/// Row indices of each column sorted by value; shared by all trees of a fit.
#[derive(Clone, Debug)]
pub struct SortedColumns {
    order: Vec<Vec<usize>>,
}

impl SortedColumns {
    pub fn new<T: Scalar>(x: &Matrix<T>) -> Self {
        let order = (0..x.n_cols())
            .map(|j| {
                let col = x.column(j);
                let mut idx: Vec<usize> = (0..x.n_rows()).collect();
                idx.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("covariates are finite"));
                idx
            })
            .collect();
        SortedColumns { order }
    }
}

struct Candidate<T> {
    var: usize,
    /// split position inside the node's sorted range
    pos: usize,
    cut: T,
}

/// Reusable workspace for growing trees over one feature matrix.
pub struct TreeGrower<'a, T> {
    x: &'a Matrix<T>,
    z: &'a [u8],
    sorted: &'a SortedColumns,
    work: Vec<Vec<usize>>,
    scratch: Vec<usize>,
    goes_left: Vec<bool>,
    candidates: Vec<Candidate<T>>,
    left_stats: Vec<GroupedSuffStats<T>>,
    weights: Vec<T>,
    positions: Vec<usize>,
}

impl<'a, T: Scalar> TreeGrower<'a, T> {
    pub fn new(x: &'a Matrix<T>, z: &'a [u8], sorted: &'a SortedColumns) -> Self {
        assert_eq!(x.n_rows(), z.len(), "group labels must match the feature rows");
        assert!(x.n_cols() > 0, "tree growth needs at least one feature");
        TreeGrower {
            x,
            z,
            sorted,
            work: sorted.order.clone(),
            scratch: Vec::with_capacity(x.n_rows()),
            goes_left: vec![false; x.n_rows()],
            candidates: Vec::new(),
            left_stats: Vec::new(),
            weights: Vec::new(),
            positions: Vec::new(),
        }
    }

    /// Grows one tree on `residual` starting at `depth`. Every unit's new leaf
    /// value is written into `fitted`.
    pub fn grow<R: Rng + ?Sized>(
        &mut self,
        residual: &[T],
        leaf: &LeafModel<T>,
        cfg: &GrowConfig<T>,
        depth: usize,
        rng: &mut R,
        fitted: &mut [T],
    ) -> Tree<T> {
        assert_eq!(residual.len(), self.z.len());
        assert_eq!(fitted.len(), self.z.len());
        for (w, s) in self.work.iter_mut().zip(&self.sorted.order) {
            w.copy_from_slice(s);
        }
        let mut nodes = Vec::new();
        let n = self.z.len();
        self.grow_node(0, n, depth, residual, leaf, cfg, rng, fitted, &mut nodes);
        Tree::from_nodes(nodes).expect("grown trees are well formed")
    }

    #[allow(clippy::too_many_arguments)]
    fn grow_node<R: Rng + ?Sized>(
        &mut self,
        lo: usize,
        hi: usize,
        depth: usize,
        residual: &[T],
        leaf: &LeafModel<T>,
        cfg: &GrowConfig<T>,
        rng: &mut R,
        fitted: &mut [T],
        nodes: &mut Vec<Node<T>>,
    ) -> usize {
        let idx = nodes.len();
        nodes.push(Node::Leaf { mu: T::zero() });

        let whole = GroupedSuffStats::from_units(&self.work[0][lo..hi], self.z, residual);
        let chosen = if hi - lo < cfg.min_node_size || depth >= cfg.max_depth {
            None
        } else {
            self.choose_split(lo, hi, depth, whole, residual, leaf, cfg, rng)
        };

        match chosen {
            None => {
                let mu = leaf.sample(&whole, rng);
                for &i in &self.work[0][lo..hi] {
                    fitted[i] = mu;
                }
                nodes[idx] = Node::Leaf { mu };
            }
            Some(c) => {
                let mid = self.partition(lo, hi, &c);
                let left = self.grow_node(lo, mid, depth + 1, residual, leaf, cfg, rng, fitted, nodes);
                let right = self.grow_node(mid, hi, depth + 1, residual, leaf, cfg, rng, fitted, nodes);
                nodes[idx] = Node::Split {
                    var: c.var,
                    cut: c.cut,
                    left,
                    right,
                };
            }
        }
        idx
    }

    #[allow(clippy::too_many_arguments)]
    fn choose_split<R: Rng + ?Sized>(
        &mut self,
        lo: usize,
        hi: usize,
        depth: usize,
        whole: GroupedSuffStats<T>,
        residual: &[T],
        leaf: &LeafModel<T>,
        cfg: &GrowConfig<T>,
        rng: &mut R,
    ) -> Option<Candidate<T>> {
        self.candidates.clear();
        self.left_stats.clear();
        let n = hi - lo;
        for var in 0..self.x.n_cols() {
            let col = self.x.column(var);
            let order = &self.work[var][lo..hi];
            boundary_positions(n, |k| col[order[k]], cfg.max_cutpoints, &mut self.positions);
            let mut acc = GroupedSuffStats::empty();
            let mut k = 0;
            for &b in &self.positions {
                while k < b {
                    let i = order[k];
                    acc.push(self.z[i], residual[i]);
                    k += 1;
                }
                self.left_stats.push(acc);
                self.candidates.push(Candidate {
                    var,
                    pos: b,
                    cut: midpoint(col[order[b - 1]], col[order[b]]),
                });
            }
        }
        if self.candidates.is_empty() {
            return None;
        }

        self.weights.clear();
        self.weights.extend(
            self.left_stats
                .iter()
                .map(|l| leaf.log_marginal(l) + leaf.log_marginal(&(whole - *l))),
        );
        self.weights.push(
            no_split_log_prior(self.candidates.len(), depth, cfg.alpha, cfg.beta)
                + leaf.log_marginal(&whole),
        );
        normalize_log_weights(&mut self.weights);
        let pick = draw_categorical(&self.weights, rng);
        if pick == self.candidates.len() {
            None
        } else {
            Some(self.candidates.swap_remove(pick))
        }
    }

    /// Stable-partitions every variable's node range; returns the boundary.
    fn partition(&mut self, lo: usize, hi: usize, c: &Candidate<T>) -> usize {
        let col = self.x.column(c.var);
        for &i in &self.work[c.var][lo..hi] {
            self.goes_left[i] = col[i] <= c.cut;
        }
        let mid = lo + c.pos;
        for order in self.work.iter_mut() {
            self.scratch.clear();
            let mut w = lo;
            for r in lo..hi {
                let i = order[r];
                if self.goes_left[i] {
                    order[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            debug_assert_eq!(w, mid);
            order[w..hi].copy_from_slice(&self.scratch);
        }
        mid
    }
}

/// Grows one tree from scratch on `x` (rows routed by the tree's splits) and
/// returns it.
///
/// Convenience wrapper over [`TreeGrower`] for one-off use; the samplers keep
/// a grower alive across trees instead.
#[allow(clippy::too_many_arguments)]
pub fn grow_from_root<T: Scalar, R: Rng + ?Sized>(
    residual: &[T],
    x: &Matrix<T>,
    z: &[u8],
    coeffs: (T, T),
    variances: (T, T),
    nu: T,
    depth: usize,
    hp: &Hyperparams<T>,
    rng: &mut R,
) -> Result<Tree<T>> {
    let leaf = LeafModel::new(coeffs, variances, nu)?;
    let sorted = SortedColumns::new(x);
    let mut grower = TreeGrower::new(x, z, &sorted);
    let mut fitted = vec![T::zero(); z.len()];
    Ok(grower.grow(residual, &leaf, &GrowConfig::from(hp), depth, rng, &mut fitted))
}
