//! Accelerated Bayesian causal forests.
//!
//! The model writes the standardized outcome as
//! `y = a mu(x, pi) + b_z tau(x) + e`, `e ~ N(0, sigma_z^2)`, with `mu` and
//! `tau` sums of regression trees. [`xbcf::fit`] regrows every tree with the
//! grow-from-root sampler ([`gfr`]); [`bcf`] provides a grow/prune
//! Metropolis-Hastings sampler that can be warm-started from those fits.

pub mod bcf;
pub mod error;
pub mod gfr;
pub mod io;
pub mod model;
pub mod scalar;
pub mod simulation;
pub mod xbcf;

pub use error::{Result, XbcfError};
pub use model::{
    Dataset, Forest, ForestRole, GroupedSuffStats, Hyperparams, Matrix, Node, PosteriorDraws,
    ScaleState, Snapshot, Tree,
};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Tree64 = Tree<f64>;
pub type Tree32 = Tree<f32>;
pub type Forest64 = Forest<f64>;
pub type Forest32 = Forest<f32>;
pub type Hyperparams64 = Hyperparams<f64>;
pub type Hyperparams32 = Hyperparams<f32>;
pub type ScaleState64 = ScaleState<f64>;
pub type ScaleState32 = ScaleState<f32>;
pub type PosteriorDraws64 = PosteriorDraws<f64>;
pub type PosteriorDraws32 = PosteriorDraws<f32>;
