use crate::error::{Result, XbcfError};
use crate::scalar::Scalar;

/// Scale parameters of the two-forest model plus the outcome standardization.
///
/// Internally the outcome is `(y - y_mean) / y_sd`; `a` scales the prognostic
/// forest, `b0`/`b1` scale the treatment forest per group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleState<T> {
    pub a: T,
    pub b0: T,
    pub b1: T,
    pub sigma0_sq: T,
    pub sigma1_sq: T,
    pub y_mean: T,
    pub y_sd: T,
}

impl<T: Scalar> ScaleState<T> {
    /// Starting values: `a = 1`, `b = (-1/2, 1/2)`, unit variances.
    pub fn initial(y_mean: T, y_sd: T) -> Self {
        ScaleState {
            a: T::one(),
            b0: T::lit(-0.5),
            b1: T::lit(0.5),
            sigma0_sq: T::one(),
            sigma1_sq: T::one(),
            y_mean,
            y_sd,
        }
    }

    #[inline]
    pub fn b(&self, group: u8) -> T {
        if group == 0 {
            self.b0
        } else {
            self.b1
        }
    }

    #[inline]
    pub fn sigma_sq(&self, group: u8) -> T {
        if group == 0 {
            self.sigma0_sq
        } else {
            self.sigma1_sq
        }
    }

    pub fn variances(&self) -> (T, T) {
        (self.sigma0_sq, self.sigma1_sq)
    }

    /// Treatment-effect multiplier `b1 - b0`.
    pub fn effect_scale(&self) -> T {
        self.b1 - self.b0
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b0, self.b1, self.sigma0_sq, self.sigma1_sq, self.y_mean, self.y_sd];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(XbcfError::validation("scale parameters must be finite"));
        }
        if self.sigma0_sq <= T::zero() || self.sigma1_sq <= T::zero() {
            return Err(XbcfError::validation("group variances must be positive"));
        }
        if self.y_sd <= T::zero() {
            return Err(XbcfError::validation("outcome scale must be positive"));
        }
        Ok(())
    }
}

/// Sampler configuration. Prior variances are on the standardized outcome scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams<T> {
    /// Number of prognostic trees (L).
    pub n_prognostic_trees: usize,
    /// Number of treatment trees (K).
    pub n_treatment_trees: usize,
    pub sweeps: usize,
    pub burnin: usize,
    pub alpha: T,
    pub beta: T,
    pub nu_mu: T,
    pub nu_tau: T,
    pub kappa0: T,
    pub kappa1: T,
    pub s0_prior: T,
    pub s1_prior: T,
    pub max_cutpoints: usize,
    pub min_node_size: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl<T: Scalar> Hyperparams<T> {
    /// Defaults for the given forest sizes; leaf prior variances are
    /// `0.6 / L` and `0.3 / K`.
    pub fn new(n_prognostic_trees: usize, n_treatment_trees: usize) -> Self {
        let kappa = T::lit(3.0);
        // IG(kappa/2, s/2) has mode s / (kappa + 2); place it at 1
        let s = kappa + T::lit(2.0);
        Hyperparams {
            n_prognostic_trees,
            n_treatment_trees,
            sweeps: 40,
            burnin: 15,
            alpha: T::lit(0.95),
            beta: T::lit(1.25),
            nu_mu: T::lit(0.6 / n_prognostic_trees.max(1) as f64),
            nu_tau: T::lit(0.3 / n_treatment_trees.max(1) as f64),
            kappa0: kappa,
            kappa1: kappa,
            s0_prior: s,
            s1_prior: s,
            max_cutpoints: 100,
            min_node_size: 5,
            max_depth: 20,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sweeps(mut self, sweeps: usize, burnin: usize) -> Self {
        self.sweeps = sweeps;
        self.burnin = burnin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(XbcfError::validation("alpha must lie in (0, 1)"));
        }
        if !(self.beta.is_finite() && self.beta >= T::zero()) {
            return Err(XbcfError::validation("beta must be non-negative"));
        }
        if self.n_prognostic_trees == 0 || self.n_treatment_trees == 0 {
            return Err(XbcfError::validation("both forests need at least one tree"));
        }
        if self.sweeps == 0 {
            return Err(XbcfError::validation("at least one sweep is required"));
        }
        if self.burnin >= self.sweeps {
            return Err(XbcfError::validation("burn-in must be smaller than the number of sweeps"));
        }
        if !(pos(self.nu_mu) && pos(self.nu_tau)) {
            return Err(XbcfError::validation("leaf prior variances must be positive"));
        }
        if !(pos(self.kappa0) && pos(self.kappa1) && pos(self.s0_prior) && pos(self.s1_prior)) {
            return Err(XbcfError::validation("inverse-gamma hyperparameters must be positive"));
        }
        if self.max_cutpoints == 0 {
            return Err(XbcfError::validation("max_cutpoints must be at least 1"));
        }
        Ok(())
    }

    /// Prior probability that a node at `depth` splits.
    #[inline]
    pub fn split_prob(&self, depth: usize) -> T {
        self.alpha * T::lit(1.0 + depth as f64).powf(-self.beta)
    }
}

impl<T: Scalar> Default for Hyperparams<T> {
    fn default() -> Self {
        Hyperparams::new(30, 10)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let hp = Hyperparams::<f64>::default();
        assert_eq!((hp.n_prognostic_trees, hp.n_treatment_trees), (30, 10));
        assert_eq!((hp.sweeps, hp.burnin), (40, 15));
        assert!((hp.nu_mu - 0.02).abs() < 1e-15);
        assert!((hp.nu_tau - 0.03).abs() < 1e-15);
        // prior mode of sigma^2 is 1
        let mode = (hp.s0_prior / 2.0) / (hp.kappa0 / 2.0 + 1.0);
        assert!((mode - 1.0).abs() < 1e-15);
        hp.validate().unwrap();
    }

    #[test]
    fn rejects_bad_settings() {
        let mut hp = Hyperparams::<f64>::default();
        hp.alpha = 1.0;
        assert!(hp.validate().is_err());
        let mut hp = Hyperparams::<f64>::default();
        hp.beta = -0.1;
        assert!(hp.validate().is_err());
        let hp = Hyperparams::<f64>::default().with_sweeps(10, 10);
        assert!(hp.validate().is_err());
        let mut hp = Hyperparams::<f64>::default();
        hp.n_treatment_trees = 0;
        assert!(hp.validate().is_err());
    }

    #[test]
    fn scale_state_checks() {
        let mut s = ScaleState::initial(0.0, 1.0);
        s.validate().unwrap();
        assert_eq!(s.effect_scale(), 1.0);
        s.sigma1_sq = 0.0;
        assert!(s.validate().is_err());
    }
}
