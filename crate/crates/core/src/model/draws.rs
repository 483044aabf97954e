use super::params::{Hyperparams, ScaleState};
use super::tree::Forest;
use crate::error::{Result, XbcfError};
use crate::scalar::Scalar;

/// State of both forests and the scale parameters after one sweep or MH iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T> {
    pub prognostic: Forest<T>,
    pub treatment: Forest<T>,
    pub scale: ScaleState<T>,
    pub burnin: bool,
    /// Warm-start chain that produced this draw, if any.
    pub chain: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws<T> {
    pub hyper: Hyperparams<T>,
    pub snapshots: Vec<Snapshot<T>>,
}

impl<T: Scalar> PosteriorDraws<T> {
    pub fn new(hyper: Hyperparams<T>, snapshots: Vec<Snapshot<T>>) -> Result<Self> {
        let d = PosteriorDraws { hyper, snapshots };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Draws after burn-in.
    pub fn kept(&self) -> impl Iterator<Item = &Snapshot<T>> + '_ {
        self.snapshots.iter().filter(|s| !s.burnin)
    }

    pub fn n_kept(&self) -> usize {
        self.kept().count()
    }

    pub fn n_covariates(&self) -> Option<usize> {
        self.snapshots.first().map(|s| s.treatment.n_covariates)
    }

    /// Checks that every snapshot shares the forest sizes and standardization.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.snapshots.first() else {
            return Ok(());
        };
        for (i, s) in self.snapshots.iter().enumerate() {
            if s.prognostic.len() != self.hyper.n_prognostic_trees
                || s.treatment.len() != self.hyper.n_treatment_trees
            {
                return Err(XbcfError::validation(format!(
                    "snapshot {i} has {}+{} trees, expected {}+{}",
                    s.prognostic.len(),
                    s.treatment.len(),
                    self.hyper.n_prognostic_trees,
                    self.hyper.n_treatment_trees
                )));
            }
            if s.scale.y_mean != first.scale.y_mean || s.scale.y_sd != first.scale.y_sd {
                return Err(XbcfError::validation(format!(
                    "snapshot {i} uses different standardization constants"
                )));
            }
            if s.treatment.n_covariates != first.treatment.n_covariates
                || s.prognostic.n_covariates != first.treatment.n_covariates
            {
                return Err(XbcfError::validation(format!(
                    "snapshot {i} was trained on a different covariate layout"
                )));
            }
            s.scale.validate()?;
            s.prognostic.validate()?;
            s.treatment.validate()?;
        }
        Ok(())
    }
}
