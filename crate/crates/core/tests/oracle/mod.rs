//! Brute-force reference computations that share no code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// A leaf's data: raw residuals with their groups, plus the model constants.
#[derive(Clone, Debug)]
pub struct LeafProblem {
    pub residuals: Vec<f64>,
    pub groups: Vec<u8>,
    pub coeffs: (f64, f64),
    pub variances: (f64, f64),
    pub nu: f64,
}

impl LeafProblem {
    fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
        -0.5 * (2.0 * PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
    }

    /// Log of likelihood times prior at leaf mean `m`, with every normalizing
    /// constant kept.
    pub fn log_integrand(&self, m: f64) -> f64 {
        let mut h = Self::log_normal(m, 0.0, self.nu);
        for (&r, &g) in self.residuals.iter().zip(&self.groups) {
            let (c, v) = if g == 0 {
                (self.coeffs.0, self.variances.0)
            } else {
                (self.coeffs.1, self.variances.1)
            };
            h += Self::log_normal(r, c * m, v);
        }
        h
    }

    pub fn subset(&self, idx: &[usize]) -> LeafProblem {
        LeafProblem {
            residuals: idx.iter().map(|&i| self.residuals[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            ..self.clone()
        }
    }
}

/// Log evidence, posterior mean and posterior variance by Simpson's rule.
pub struct Quadrature {
    pub log_evidence: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Locates the mode by ternary search, widens the range until the integrand
/// has fallen by `e^-40` on both sides, then integrates.
pub fn integrate(p: &LeafProblem) -> Quadrature {
    let h = |m: f64| p.log_integrand(m);
    let (mut lo, mut hi) = (-1e4, 1e4);
    for _ in 0..300 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if h(a) < h(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let mode = 0.5 * (lo + hi);
    let peak = h(mode);
    let mut width = 1e-3;
    while h(mode - width) > peak - 40.0 || h(mode + width) > peak - 40.0 {
        width *= 1.5;
    }
    let (a, b) = (mode - width, mode + width);
    let steps = 20_000;
    let dx = (b - a) / steps as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..=steps {
        let w = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let m = a + k as f64 * dx;
        let f = w * (h(m) - peak).exp();
        z += f;
        m1 += f * m;
        m2 += f * m * m;
    }
    let mean = m1 / z;
    Quadrature {
        log_evidence: peak + (z * dx / 3.0).ln(),
        mean,
        variance: m2 / z - mean * mean,
    }
}

/// Sum of squared deviations from the mean.
pub fn sse(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Smallest total within-child SSE over every (column, midpoint) split that
/// leaves at least `min_leaf` units on each side.
pub fn brute_force_best_sse(y: &[f64], cols: &[Vec<f64>], min_leaf: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for col in cols {
        let mut values = col.clone();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let cut = 0.5 * (w[0] + w[1]);
            let left: Vec<f64> = (0..y.len()).filter(|&i| col[i] <= cut).map(|i| y[i]).collect();
            let right: Vec<f64> = (0..y.len()).filter(|&i| col[i] > cut).map(|i| y[i]).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let total = sse(&left) + sse(&right);
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    }
    best
}
