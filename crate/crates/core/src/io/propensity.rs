use nalgebra::{DMatrix, DVector};

use crate::error::{Result, XbcfError};
use crate::model::Matrix;
use crate::scalar::Scalar;

const MAX_ITER: usize = 50;
const TOL: f64 = 1e-8;
const RIDGE: f64 = 1e-6;
const CLIP: (f64, f64) = (0.001, 0.999);

/// Logistic-regression propensity estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct PropensityFit<T> {
    pub pi_hat: Vec<T>,
    /// Intercept first, then one coefficient per covariate.
    pub coefficients: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of fitted probabilities moved onto the clipping bounds.
    pub clipped: usize,
}

impl<T> PropensityFit<T> {
    /// Set when the fit did not converge or any probability was clipped.
    pub fn warning(&self) -> bool {
        !self.converged || self.clipped > 0
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Fits `P(z = 1 | x)` by iteratively reweighted least squares with an
/// intercept, then clips the fitted probabilities to `[0.001, 0.999]`.
/// Non-convergence is reported through [`PropensityFit::warning`].
pub fn estimate_propensity<T: Scalar>(x: &Matrix<T>, z: &[u8]) -> Result<PropensityFit<T>> {
    let n = x.n_rows();
    if z.len() != n {
        return Err(XbcfError::validation(format!(
            "treatment has {} entries, covariates have {n} rows",
            z.len()
        )));
    }
    let n1 = z.iter().filter(|&&g| g == 1).count();
    if n1 == 0 || n1 == n {
        return Err(XbcfError::validation("propensity estimation needs both groups"));
    }
    let p = x.n_cols() + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1).as_f64() });
    let target = DVector::from_fn(n, |i, _| z[i] as f64);
    let mut beta = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let prob = (&design * &beta).map(sigmoid);
        let weights = prob.map(|q| q * (1.0 - q));
        let weighted = DMatrix::from_fn(n, p, |i, j| design[(i, j)] * weights[i]);
        let mut normal = design.transpose() * weighted;
        for j in 0..p {
            normal[(j, j)] += RIDGE;
        }
        let gradient = design.transpose() * (&target - &prob);
        let Some(chol) = normal.cholesky() else {
            break;
        };
        let step = chol.solve(&gradient);
        beta += &step;
        if step.amax() < TOL {
            converged = true;
            break;
        }
    }

    let mut clipped = 0;
    let pi_hat = (&design * &beta)
        .iter()
        .map(|&eta| {
            let q = sigmoid(eta);
            let c = q.clamp(CLIP.0, CLIP.1);
            if c != q {
                clipped += 1;
            }
            T::lit(c)
        })
        .collect();
    Ok(PropensityFit {
        pi_hat,
        coefficients: beta.iter().map(|&b| T::lit(b)).collect(),
        iterations,
        converged,
        clipped,
    })
}
