//! Grow/prune Metropolis-Hastings sampler for the same two-forest model, and
//! warm-started chains initialized at grow-from-root fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, XbcfError};
use crate::gfr::{build_cutpoints, GrowConfig};
use crate::model::{
    Dataset, Forest, ForestRole, GroupedSuffStats, Hyperparams, LeafModel, Matrix, Node,
    PosteriorDraws, ScaleState, Snapshot, Tree,
};
use crate::scalar::Scalar;
use crate::xbcf::{sample_scale, Prepared, ResidualState};

/// Iterations for warm-started chains.
pub const DEFAULT_ITERS_PER_CHAIN: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Grow,
    Prune,
}

/// Result of one MH update of a single tree.
#[derive(Clone, Debug)]
pub struct MhOutcome<T> {
    pub tree: Tree<T>,
    pub proposed: Move,
    pub accepted: bool,
    /// `min(1, ratio)`; zero for impossible proposals.
    pub accept_prob: T,
}

/// Units of `x` grouped by the tree node they land in.
fn route<T: Scalar>(tree: &Tree<T>, x: &Matrix<T>) -> Vec<Vec<usize>> {
    let mut by_node = vec![Vec::new(); tree.len()];
    for i in 0..x.n_rows() {
        by_node[tree.leaf_index(|j| x.get(i, j))].push(i);
    }
    by_node
}

fn log_split_odds<T: Scalar>(cfg: &GrowConfig<T>, depth: usize) -> T {
    // P(d) (1 - P(d+1))^2 / (1 - P(d))
    let p = |d: usize| cfg.alpha * T::lit(1.0 + d as f64).powf(-cfg.beta);
    p(depth).ln() + T::lit(2.0) * (T::one() - p(depth + 1)).ln() - (T::one() - p(depth)).ln()
}

/// One GROW or PRUNE proposal (probability 1/2 each) on `tree`, followed by
/// redrawing every leaf mean from its conditional posterior.
///
/// The acceptance ratio combines the depth-dependent split prior, the uniform
/// rule prior and proposal probabilities (the rule terms cancel), and the
/// integrated leaf likelihoods. Proposals that cannot be made (prune on a
/// root-only tree, grow on an unsplittable leaf) are rejected.
pub fn mh_step<T: Scalar, R: Rng + ?Sized>(
    tree: &Tree<T>,
    residual: &[T],
    x: &Matrix<T>,
    z: &[u8],
    leaf: &LeafModel<T>,
    cfg: &GrowConfig<T>,
    rng: &mut R,
) -> MhOutcome<T> {
    let units = route(tree, x);
    let depths = tree.depths();
    let stats = |idx: &[usize]| GroupedSuffStats::from_units(idx, z, residual);
    let proposed = if rng.random::<bool>() { Move::Grow } else { Move::Prune };

    let proposal: Option<(Tree<T>, T)> = match proposed {
        Move::Grow => {
            let leaves = tree.leaf_indices();
            let eta = leaves[rng.random_range(0..leaves.len())];
            let depth = depths[eta];
            let grid = (depth < cfg.max_depth)
                .then(|| build_cutpoints(&x.select_rows(&units[eta]), cfg.max_cutpoints));
            let eligible: Vec<usize> = grid
                .as_ref()
                .map(|g| (0..g.per_var.len()).filter(|&j| !g.per_var[j].is_empty()).collect())
                .unwrap_or_default();
            if eligible.is_empty() {
                None
            } else {
                let grid = grid.expect("eligible variables imply a grid");
                let var = eligible[rng.random_range(0..eligible.len())];
                let cuts = &grid.per_var[var];
                let cut = cuts[rng.random_range(0..cuts.len())];
                let (l_idx, r_idx): (Vec<usize>, Vec<usize>) =
                    units[eta].iter().partition(|&&i| x.get(i, var) <= cut);
                let (sl, sr) = (stats(&l_idx), stats(&r_idx));
                let mut next = tree.clone();
                next.split_leaf(eta, var, cut, T::zero(), T::zero());
                next.canonicalize();
                let log_ratio = leaf.log_marginal(&sl) + leaf.log_marginal(&sr)
                    - leaf.log_marginal(&(sl + sr))
                    + log_split_odds(cfg, depth)
                    + T::lit(leaves.len() as f64).ln()
                    - T::lit(next.prunable().len() as f64).ln();
                Some((next, log_ratio))
            }
        }
        Move::Prune => {
            let nogs = tree.prunable();
            if nogs.is_empty() {
                None
            } else {
                let eta = nogs[rng.random_range(0..nogs.len())];
                let Node::Split { left, right, .. } = tree.nodes()[eta] else {
                    unreachable!("prunable nodes are splits")
                };
                let (sl, sr) = (stats(&units[left]), stats(&units[right]));
                let mut next = tree.clone();
                next.collapse(eta, T::zero());
                let log_ratio = leaf.log_marginal(&(sl + sr))
                    - leaf.log_marginal(&sl)
                    - leaf.log_marginal(&sr)
                    - log_split_odds(cfg, depths[eta])
                    + T::lit(nogs.len() as f64).ln()
                    - T::lit(next.n_leaves() as f64).ln();
                Some((next, log_ratio))
            }
        }
    };

    let (mut out, accepted, accept_prob) = match proposal {
        None => (tree.clone(), false, T::zero()),
        Some((next, log_ratio)) => {
            let p = log_ratio.min(T::zero()).exp();
            if T::sample_open01(rng) < p {
                (next, true, p)
            } else {
                (tree.clone(), false, p)
            }
        }
    };

    let units = if accepted { route(&out, x) } else { units };
    for idx in out.leaf_indices() {
        let mu = leaf.sample(&stats(&units[idx]), rng);
        out.set_mu(idx, mu);
    }
    MhOutcome {
        tree: out,
        proposed,
        accepted,
        accept_prob,
    }
}

/// Iteration schedule of an MH run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BcfConfig {
    pub burnin: usize,
    pub iters: usize,
}

impl Default for BcfConfig {
    /// 1000 burn-in plus 1000 kept iterations for cold starts.
    fn default() -> Self {
        BcfConfig {
            burnin: 1000,
            iters: 1000,
        }
    }
}

/// Runs the MH sampler. Each iteration updates every prognostic tree, then
/// the scale parameters, then every treatment tree, then the scale
/// parameters again. Without `init` all trees start as root-only leaves at 0.
///
/// With `init` and zero iterations the initial state is returned as the only
/// draw; otherwise the initial state itself is not emitted.
pub fn bcf_fit<T: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    hp: &Hyperparams<T>,
    config: BcfConfig,
    init: Option<&Snapshot<T>>,
    rng: &mut R,
) -> Result<PosteriorDraws<T>> {
    let mut hyper = hp.clone();
    // sweeps/burnin describe this run's output
    hyper.sweeps = config.burnin + config.iters;
    hyper.burnin = config.burnin;
    if hyper.sweeps == 0 {
        hyper.sweeps = 1;
    }
    hyper.validate()?;
    let prep = Prepared::new(dataset)?;
    let d = prep.n_covariates();
    let z = &prep.z;

    let (mut mu_trees, mut tau_trees, mut scale) = match init {
        Some(s) => {
            if s.prognostic.len() != hp.n_prognostic_trees || s.treatment.len() != hp.n_treatment_trees {
                return Err(XbcfError::validation(format!(
                    "initial forests have {}+{} trees, configuration expects {}+{}",
                    s.prognostic.len(),
                    s.treatment.len(),
                    hp.n_prognostic_trees,
                    hp.n_treatment_trees
                )));
            }
            if s.treatment.n_covariates != d || s.prognostic.n_covariates != d {
                return Err(XbcfError::validation("initial forests use a different covariate layout"));
            }
            s.prognostic.validate()?;
            s.treatment.validate()?;
            s.scale.validate()?;
            (s.prognostic.trees.clone(), s.treatment.trees.clone(), s.scale)
        }
        None => (
            vec![Tree::leaf(T::zero()); hp.n_prognostic_trees],
            vec![Tree::leaf(T::zero()); hp.n_treatment_trees],
            ScaleState::initial(prep.y_mean, prep.y_sd),
        ),
    };

    if config.iters == 0 && config.burnin == 0 {
        let snap = match init {
            Some(s) => Snapshot { burnin: false, ..s.clone() },
            None => Snapshot {
                prognostic: Forest::new(ForestRole::Prognostic, d, mu_trees),
                treatment: Forest::new(ForestRole::Treatment, d, tau_trees),
                scale,
                burnin: false,
                chain: None,
            },
        };
        return Ok(PosteriorDraws {
            hyper,
            snapshots: vec![snap],
        });
    }

    // forests live on the standardized scale they were fitted on
    let y_std: Vec<T> = dataset
        .y
        .iter()
        .map(|&v| (v - scale.y_mean) / scale.y_sd)
        .collect();
    let mut state = ResidualState::new(
        y_std,
        z,
        &scale,
        mu_trees.iter().map(|t| t.predict_matrix(&prep.x_mu)).collect(),
        tau_trees.iter().map(|t| t.predict_matrix(&prep.x_tau)).collect(),
    );

    let cfg = GrowConfig::from(hp);
    let n = z.len();
    let mut partial = vec![T::zero(); n];
    let total = config.burnin + config.iters;
    let mut snapshots = Vec::with_capacity(total);
    for it in 0..total {
        for l in 0..mu_trees.len() {
            state.partial_prognostic(l, scale.a, &mut partial);
            let leaf = LeafModel::new((scale.a, scale.a), scale.variances(), hp.nu_mu)?;
            mu_trees[l] = mh_step(&mu_trees[l], &partial, &prep.x_mu, z, &leaf, &cfg, rng).tree;
            let fitted = mu_trees[l].predict_matrix(&prep.x_mu);
            state.replace_prognostic(l, scale.a, &fitted);
        }
        sample_scale(&mut state, &mut scale, z, hp, rng);
        for k in 0..tau_trees.len() {
            state.partial_treatment(k, z, &scale, &mut partial);
            let leaf = LeafModel::new((scale.b0, scale.b1), scale.variances(), hp.nu_tau)?;
            tau_trees[k] = mh_step(&tau_trees[k], &partial, &prep.x_tau, z, &leaf, &cfg, rng).tree;
            let fitted = tau_trees[k].predict_matrix(&prep.x_tau);
            state.replace_treatment(k, z, &scale, &fitted);
        }
        sample_scale(&mut state, &mut scale, z, hp, rng);
        snapshots.push(Snapshot {
            prognostic: Forest::new(ForestRole::Prognostic, d, mu_trees.clone()),
            treatment: Forest::new(ForestRole::Treatment, d, tau_trees.clone()),
            scale,
            burnin: it < config.burnin,
            chain: None,
        });
    }
    Ok(PosteriorDraws { hyper, snapshots })
}

/// Starts one MH chain at every post-burn-in snapshot of `xbcf_draws`, runs
/// each for `iters_per_chain` iterations without extra burn-in, and pools the
/// draws in chain order. Chains run in parallel on independent RNG streams.
pub fn warm_start<T: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    hp: &Hyperparams<T>,
    xbcf_draws: &PosteriorDraws<T>,
    iters_per_chain: usize,
    rng: &mut R,
) -> Result<PosteriorDraws<T>> {
    let starts: Vec<&Snapshot<T>> = xbcf_draws.kept().collect();
    if starts.is_empty() {
        return Err(XbcfError::validation("no post-burn-in snapshots to warm-start from"));
    }
    let base_seed: u64 = rng.random();
    let config = BcfConfig {
        burnin: 0,
        iters: iters_per_chain,
    };
    let chains: Vec<Result<Vec<Snapshot<T>>>> = starts
        .par_iter()
        .enumerate()
        .map(|(chain, start)| {
            let mut chain_rng = ChaCha8Rng::seed_from_u64(base_seed);
            chain_rng.set_stream(chain as u64);
            let draws = bcf_fit(dataset, hp, config, Some(start), &mut chain_rng)?;
            Ok(draws
                .snapshots
                .into_iter()
                .map(|s| Snapshot {
                    chain: Some(chain),
                    ..s
                })
                .collect())
        })
        .collect();
    let mut snapshots = Vec::with_capacity(starts.len() * iters_per_chain.max(1));
    for c in chains {
        snapshots.extend(c?);
    }
    let mut hyper = hp.clone();
    hyper.sweeps = snapshots.len();
    hyper.burnin = 0;
    Ok(PosteriorDraws { hyper, snapshots })
}
