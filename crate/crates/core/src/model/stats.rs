//! Per-group sufficient statistics and the conjugate Gaussian leaf model.
//!
//! A leaf with mean `m ~ N(0, nu)` sees partial residuals
//! `r_i = c_{z_i} m + e_i`, `e_i ~ N(0, sigma_{z_i}^2)`. Everything the split
//! search and leaf sampler need reduces to two precision-weighted sums,
//!
//! ```text
//! W = n0 c0^2 / s0^2 + n1 c1^2 / s1^2
//! S = c0 sum0 / s0^2 + c1 sum1 / s1^2
//! ```
//!
//! giving the log marginal likelihood ratio `1/2 [ -ln(1 + nu W) + nu S^2 / (1 + nu W) ]`
//! (relative to the `m = 0` likelihood) and posterior `N(S V, V)` with
//! `V = (1/nu + W)^-1`.

use std::ops::{Add, Sub};

use crate::error::{Result, XbcfError};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GroupedSuffStats<T> {
    pub n0: usize,
    pub n1: usize,
    pub s0: T,
    pub s1: T,
}

impl<T: Scalar> GroupedSuffStats<T> {
    pub fn empty() -> Self {
        GroupedSuffStats {
            n0: 0,
            n1: 0,
            s0: T::zero(),
            s1: T::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, group: u8, residual: T) {
        if group == 0 {
            self.n0 += 1;
            self.s0 += residual;
        } else {
            self.n1 += 1;
            self.s1 += residual;
        }
    }

    /// Stats for the units listed in `idx`.
    pub fn from_units(idx: &[usize], z: &[u8], residual: &[T]) -> Self {
        let mut s = Self::empty();
        for &i in idx {
            s.push(z[i], residual[i]);
        }
        s
    }

    pub fn count(&self) -> usize {
        self.n0 + self.n1
    }
}

impl<T: Scalar> Add for GroupedSuffStats<T> {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        GroupedSuffStats {
            n0: self.n0 + o.n0,
            n1: self.n1 + o.n1,
            s0: self.s0 + o.s0,
            s1: self.s1 + o.s1,
        }
    }
}

impl<T: Scalar> Sub for GroupedSuffStats<T> {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        GroupedSuffStats {
            n0: self.n0 - o.n0,
            n1: self.n1 - o.n1,
            s0: self.s0 - o.s0,
            s1: self.s1 - o.s1,
        }
    }
}

/// Validated leaf-model constants: group coefficients, group variances and the
/// leaf prior variance, with the per-unit precision weights cached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafModel<T> {
    nu: T,
    w0: T,
    w1: T,
    k0: T,
    k1: T,
}

impl<T: Scalar> LeafModel<T> {
    pub fn new(coeffs: (T, T), variances: (T, T), nu: T) -> Result<Self> {
        let (c0, c1) = coeffs;
        let (v0, v1) = variances;
        if !(c0.is_finite() && c1.is_finite()) {
            return Err(XbcfError::validation("leaf coefficients must be finite"));
        }
        if !(v0.is_finite() && v1.is_finite() && v0 > T::zero() && v1 > T::zero()) {
            return Err(XbcfError::validation(
                "group variances must be finite and positive",
            ));
        }
        if !(nu.is_finite() && nu > T::zero()) {
            return Err(XbcfError::validation(
                "leaf prior variance must be finite and positive",
            ));
        }
        Ok(LeafModel {
            nu,
            w0: c0 * c0 / v0,
            w1: c1 * c1 / v1,
            k0: c0 / v0,
            k1: c1 / v1,
        })
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    /// Precision-weighted count `W` and sum `S`.
    #[inline]
    pub fn weighted(&self, s: &GroupedSuffStats<T>) -> (T, T) {
        let w = T::lit(s.n0 as f64) * self.w0 + T::lit(s.n1 as f64) * self.w1;
        let sum = self.k0 * s.s0 + self.k1 * s.s1;
        (w, sum)
    }

    #[inline]
    pub fn log_marginal(&self, s: &GroupedSuffStats<T>) -> T {
        let (w, sum) = self.weighted(s);
        let denom = T::one() + self.nu * w;
        T::lit(0.5) * (self.nu * sum * sum / denom - (self.nu * w).ln_1p())
    }

    /// Posterior mean and variance of the leaf value.
    #[inline]
    pub fn posterior(&self, s: &GroupedSuffStats<T>) -> (T, T) {
        let (w, sum) = self.weighted(s);
        // (1/nu + W)^-1 written to stay finite for tiny nu
        let var = self.nu / (T::one() + self.nu * w);
        (var * sum, var)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, s: &GroupedSuffStats<T>, rng: &mut R) -> T {
        let (mean, var) = self.posterior(s);
        T::sample_normal(mean, var, rng)
    }
}

fn check_stats<T: Scalar>(s: &GroupedSuffStats<T>) -> Result<()> {
    if s.s0.is_finite() && s.s1.is_finite() {
        Ok(())
    } else {
        Err(XbcfError::validation("residual sums must be finite"))
    }
}

/// Log marginal likelihood ratio of a leaf, integrated over its mean.
pub fn leaf_log_marginal<T: Scalar>(
    stats: &GroupedSuffStats<T>,
    coeffs: (T, T),
    variances: (T, T),
    nu: T,
) -> Result<T> {
    check_stats(stats)?;
    Ok(LeafModel::new(coeffs, variances, nu)?.log_marginal(stats))
}

/// Posterior `(mean, variance)` of a leaf mean.
pub fn leaf_posterior<T: Scalar>(
    stats: &GroupedSuffStats<T>,
    coeffs: (T, T),
    variances: (T, T),
    nu: T,
) -> Result<(T, T)> {
    check_stats(stats)?;
    Ok(LeafModel::new(coeffs, variances, nu)?.posterior(stats))
}
