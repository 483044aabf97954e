//! Domain types and the shared conjugate leaf mathematics.

mod dataset;
mod draws;
mod params;
mod stats;
mod tree;

pub use dataset::{Dataset, Matrix};
pub use draws::{PosteriorDraws, Snapshot};
pub use params::{Hyperparams, ScaleState};
pub use stats::{leaf_log_marginal, leaf_posterior, GroupedSuffStats, LeafModel};
pub use tree::{predict_forest, Forest, ForestRole, Node, Tree};
