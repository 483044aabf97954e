use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Result, XbcfError};
use crate::model::{Forest, ForestRole, Hyperparams, Node, PosteriorDraws, ScaleState, Snapshot, Tree};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

/// One tree node. Leaves carry `mu`; splits carry `var`, `cut` and children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub kind: String,
    pub var: Option<usize>,
    pub cut: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperRecord {
    pub n_prognostic_trees: usize,
    pub n_treatment_trees: usize,
    pub sweeps: usize,
    pub burnin: usize,
    pub alpha: f64,
    pub beta: f64,
    pub nu_mu: f64,
    pub nu_tau: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub s0_prior: f64,
    pub s1_prior: f64,
    pub max_cutpoints: usize,
    pub min_node_size: usize,
    pub max_depth: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub prognostic: Vec<Vec<NodeRecord>>,
    pub treatment: Vec<Vec<NodeRecord>>,
    pub a: f64,
    pub b0: f64,
    pub b1: f64,
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub burnin: bool,
    pub chain: Option<usize>,
}

/// Lossless serialized form of [`PosteriorDraws`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestArchive {
    pub schema_version: u32,
    pub n_covariates: usize,
    pub hyperparams: HyperRecord,
    pub y_mean: f64,
    pub y_sd: f64,
    pub draws: Vec<DrawRecord>,
}

/// Writes every float with 17 significant digits in exponent notation.
struct RoundTripFormatter;

impl Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

fn tree_records<T: Scalar>(tree: &Tree<T>) -> Vec<NodeRecord> {
    tree.nodes()
        .iter()
        .enumerate()
        .map(|(id, node)| match *node {
            Node::Leaf { mu } => NodeRecord {
                id,
                kind: "leaf".into(),
                var: None,
                cut: None,
                left: None,
                right: None,
                mu: Some(mu.as_f64()),
            },
            Node::Split { var, cut, left, right } => NodeRecord {
                id,
                kind: "split".into(),
                var: Some(var),
                cut: Some(cut.as_f64()),
                left: Some(left),
                right: Some(right),
                mu: None,
            },
        })
        .collect()
}

fn tree_from_records<T: Scalar>(records: &[NodeRecord]) -> Result<Tree<T>> {
    let bad = |id: usize, what: &str| XbcfError::Archive(format!("node {id}: {what}"));
    let mut nodes = Vec::with_capacity(records.len());
    for (pos, r) in records.iter().enumerate() {
        if r.id != pos {
            return Err(bad(r.id, "node ids must be 0, 1, 2, ... in order"));
        }
        let node = match r.kind.as_str() {
            "leaf" => Node::Leaf {
                mu: T::lit(r.mu.ok_or_else(|| bad(pos, "leaf without mu"))?),
            },
            "split" => Node::Split {
                var: r.var.ok_or_else(|| bad(pos, "split without var"))?,
                cut: T::lit(r.cut.ok_or_else(|| bad(pos, "split without cut"))?),
                left: r.left.ok_or_else(|| bad(pos, "split without left child"))?,
                right: r.right.ok_or_else(|| bad(pos, "split without right child"))?,
            },
            other => return Err(bad(pos, &format!("unknown kind '{other}'"))),
        };
        nodes.push(node);
    }
    Tree::from_nodes(nodes).map_err(|e| XbcfError::Archive(e.to_string()))
}

impl ForestArchive {
    pub fn from_draws<T: Scalar>(draws: &PosteriorDraws<T>) -> Result<Self> {
        draws.validate()?;
        let first = draws
            .snapshots
            .first()
            .ok_or_else(|| XbcfError::validation("cannot archive an empty set of draws"))?;
        let h = &draws.hyper;
        let f = |v: T| v.as_f64();
        Ok(ForestArchive {
            schema_version: SCHEMA_VERSION,
            n_covariates: first.treatment.n_covariates,
            hyperparams: HyperRecord {
                n_prognostic_trees: h.n_prognostic_trees,
                n_treatment_trees: h.n_treatment_trees,
                sweeps: h.sweeps,
                burnin: h.burnin,
                alpha: f(h.alpha),
                beta: f(h.beta),
                nu_mu: f(h.nu_mu),
                nu_tau: f(h.nu_tau),
                kappa0: f(h.kappa0),
                kappa1: f(h.kappa1),
                s0_prior: f(h.s0_prior),
                s1_prior: f(h.s1_prior),
                max_cutpoints: h.max_cutpoints,
                min_node_size: h.min_node_size,
                max_depth: h.max_depth,
                seed: h.seed,
            },
            y_mean: f(first.scale.y_mean),
            y_sd: f(first.scale.y_sd),
            draws: draws
                .snapshots
                .iter()
                .map(|s| DrawRecord {
                    prognostic: s.prognostic.trees.iter().map(tree_records).collect(),
                    treatment: s.treatment.trees.iter().map(tree_records).collect(),
                    a: f(s.scale.a),
                    b0: f(s.scale.b0),
                    b1: f(s.scale.b1),
                    sigma0_sq: f(s.scale.sigma0_sq),
                    sigma1_sq: f(s.scale.sigma1_sq),
                    burnin: s.burnin,
                    chain: s.chain,
                })
                .collect(),
        })
    }

    pub fn to_draws<T: Scalar>(&self) -> Result<PosteriorDraws<T>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(XbcfError::Archive(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let h = &self.hyperparams;
        let hyper = Hyperparams {
            n_prognostic_trees: h.n_prognostic_trees,
            n_treatment_trees: h.n_treatment_trees,
            sweeps: h.sweeps,
            burnin: h.burnin,
            alpha: T::lit(h.alpha),
            beta: T::lit(h.beta),
            nu_mu: T::lit(h.nu_mu),
            nu_tau: T::lit(h.nu_tau),
            kappa0: T::lit(h.kappa0),
            kappa1: T::lit(h.kappa1),
            s0_prior: T::lit(h.s0_prior),
            s1_prior: T::lit(h.s1_prior),
            max_cutpoints: h.max_cutpoints,
            min_node_size: h.min_node_size,
            max_depth: h.max_depth,
            seed: h.seed,
        };
        let forest = |role, trees: &[Vec<NodeRecord>]| -> Result<Forest<T>> {
            let trees = trees.iter().map(|t| tree_from_records(t)).collect::<Result<_>>()?;
            Ok(Forest::new(role, self.n_covariates, trees))
        };
        let snapshots = self
            .draws
            .iter()
            .map(|d| {
                Ok(Snapshot {
                    prognostic: forest(ForestRole::Prognostic, &d.prognostic)?,
                    treatment: forest(ForestRole::Treatment, &d.treatment)?,
                    scale: ScaleState {
                        a: T::lit(d.a),
                        b0: T::lit(d.b0),
                        b1: T::lit(d.b1),
                        sigma0_sq: T::lit(d.sigma0_sq),
                        sigma1_sq: T::lit(d.sigma1_sq),
                        y_mean: T::lit(self.y_mean),
                        y_sd: T::lit(self.y_sd),
                    },
                    burnin: d.burnin,
                    chain: d.chain,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PosteriorDraws::new(hyper, snapshots).map_err(|e| XbcfError::Archive(e.to_string()))
    }

    /// Canonical text: fixed key order, floats at full precision.
    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTripFormatter);
        self.serialize(&mut ser).expect("archive values are finite");
        buf.push(b'\n');
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| XbcfError::Archive(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| XbcfError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| XbcfError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_draws() -> PosteriorDraws<f64> {
        let mut t = Tree::leaf(0.1);
        t.split_leaf(0, 1, 0.3333333333333333, -1.0 / 3.0, 2.0e-300);
        let prognostic = Forest::new(ForestRole::Prognostic, 2, vec![t.clone(), Tree::leaf(0.0)]);
        let treatment = Forest::new(ForestRole::Treatment, 2, vec![t]);
        let mut scale = ScaleState::initial(1.25, 0.7);
        scale.a = std::f64::consts::PI;
        let snap = Snapshot {
            prognostic,
            treatment,
            scale,
            burnin: false,
            chain: Some(3),
        };
        let hyper = Hyperparams::new(2, 1).with_sweeps(1, 0);
        PosteriorDraws::new(hyper, vec![snap]).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let draws = sample_draws();
        let archive = ForestArchive::from_draws(&draws).unwrap();
        let text = archive.to_json();
        let back = ForestArchive::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.to_draws::<f64>().unwrap(), draws);
    }

    #[test]
    fn node_layout() {
        let archive = ForestArchive::from_draws(&sample_draws()).unwrap();
        let nodes = &archive.draws[0].treatment[0];
        assert_eq!(nodes[0].id, 0);
        assert_eq!(nodes[0].kind, "split");
        assert_eq!(nodes[1].kind, "leaf");
        assert!(archive.to_json().contains("\"schema_version\":1"));
    }

    #[test]
    fn rejects_malformed() {
        assert!(ForestArchive::from_json("{").is_err());
        let mut archive = ForestArchive::from_draws(&sample_draws()).unwrap();
        archive.draws[0].treatment[0][0].left = Some(7);
        assert!(matches!(archive.to_draws::<f64>(), Err(XbcfError::Archive(_))));
        archive.schema_version = 99;
        assert!(archive.to_draws::<f64>().is_err());
    }
}
