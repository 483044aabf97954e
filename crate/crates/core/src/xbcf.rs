//! Two-forest backfitting with grow-from-root trees.
//!
//! Each sweep regrows the `L` prognostic trees and then the `K` treatment
//! trees. Every tree is grown on its partial residual (the total residual with
//! that tree's own contribution added back), and after every tree the scale
//! parameters `a`, `b0`, `b1`, `sigma0^2`, `sigma1^2` are redrawn from their
//! conditionally conjugate updates, `L + K` parameter draws per sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, XbcfError};
use crate::gfr::{GrowConfig, SortedColumns, TreeGrower};
use crate::model::{
    Dataset, Forest, ForestRole, Hyperparams, LeafModel, Matrix, PosteriorDraws, ScaleState,
    Snapshot, Tree,
};
use crate::scalar::Scalar;

/// Fitted values and residual vectors on the standardized scale.
///
/// With `M = sum_l u_l` (prognostic fit) and `V = sum_k v_k` (treatment fit):
/// `r = y - a M - b_z V`, `v = y - a M`, `t = y - b_z V`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualState<T> {
    pub y: Vec<T>,
    pub r: Vec<T>,
    pub v: Vec<T>,
    pub t: Vec<T>,
    pub mu_fit: Vec<T>,
    pub tau_fit: Vec<T>,
    pub mu_trees: Vec<Vec<T>>,
    pub tau_trees: Vec<Vec<T>>,
}

impl<T: Scalar> ResidualState<T> {
    /// Builds the state from per-tree fitted vectors.
    pub fn new(y: Vec<T>, z: &[u8], scale: &ScaleState<T>, mu_trees: Vec<Vec<T>>, tau_trees: Vec<Vec<T>>) -> Self {
        let n = y.len();
        let sum = |trees: &[Vec<T>]| -> Vec<T> {
            let mut s = vec![T::zero(); n];
            for t in trees {
                for (a, b) in s.iter_mut().zip(t) {
                    *a += *b;
                }
            }
            s
        };
        let mu_fit = sum(&mu_trees);
        let tau_fit = sum(&tau_trees);
        let mut st = ResidualState {
            y,
            r: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: vec![T::zero(); n],
            mu_fit,
            tau_fit,
            mu_trees,
            tau_trees,
        };
        st.recompute(z, scale);
        st
    }

    /// Recomputes `r`, `v`, `t` from the current fits.
    pub fn recompute(&mut self, z: &[u8], scale: &ScaleState<T>) {
        for i in 0..self.y.len() {
            let am = scale.a * self.mu_fit[i];
            let bt = scale.b(z[i]) * self.tau_fit[i];
            self.v[i] = self.y[i] - am;
            self.t[i] = self.y[i] - bt;
            self.r[i] = self.y[i] - am - bt;
        }
    }

    /// Largest absolute gap between the maintained residuals (and forest
    /// sums) and a from-scratch recomputation.
    pub fn identity_error(&self, z: &[u8], scale: &ScaleState<T>) -> T {
        let mut fresh = ResidualState::new(
            self.y.clone(),
            z,
            scale,
            self.mu_trees.clone(),
            self.tau_trees.clone(),
        );
        fresh.recompute(z, scale);
        let gap = |a: &[T], b: &[T]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (*x - *y).abs())
                .fold(T::zero(), T::max)
        };
        [
            gap(&self.r, &fresh.r),
            gap(&self.v, &fresh.v),
            gap(&self.t, &fresh.t),
            gap(&self.mu_fit, &fresh.mu_fit),
            gap(&self.tau_fit, &fresh.tau_fit),
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }

    /// Partial residual for prognostic tree `l` (its own fit added back).
    pub fn partial_prognostic(&self, l: usize, a: T, out: &mut [T]) {
        for ((o, r), u) in out.iter_mut().zip(&self.r).zip(&self.mu_trees[l]) {
            *o = *r + a * *u;
        }
    }

    /// Partial residual for treatment tree `k`.
    pub fn partial_treatment(&self, k: usize, z: &[u8], scale: &ScaleState<T>, out: &mut [T]) {
        for i in 0..out.len() {
            out[i] = self.r[i] + scale.b(z[i]) * self.tau_trees[k][i];
        }
    }

    /// Installs a new fitted vector for prognostic tree `l`.
    pub fn replace_prognostic(&mut self, l: usize, a: T, fitted: &[T]) {
        for i in 0..self.y.len() {
            let delta = fitted[i] - self.mu_trees[l][i];
            self.mu_fit[i] += delta;
            self.r[i] -= a * delta;
            self.v[i] -= a * delta;
            self.mu_trees[l][i] = fitted[i];
        }
    }

    pub fn replace_treatment(&mut self, k: usize, z: &[u8], scale: &ScaleState<T>, fitted: &[T]) {
        for i in 0..self.y.len() {
            let delta = fitted[i] - self.tau_trees[k][i];
            let bd = scale.b(z[i]) * delta;
            self.tau_fit[i] += delta;
            self.r[i] -= bd;
            self.t[i] -= bd;
            self.tau_trees[k][i] = fitted[i];
        }
    }

    fn set_a(&mut self, old: T, new: T) {
        let d = old - new;
        for i in 0..self.y.len() {
            self.r[i] += d * self.mu_fit[i];
            self.v[i] += d * self.mu_fit[i];
        }
    }

    fn set_b(&mut self, z: &[u8], old: (T, T), new: (T, T)) {
        let d = (old.0 - new.0, old.1 - new.1);
        for i in 0..self.y.len() {
            let di = if z[i] == 0 { d.0 } else { d.1 };
            self.r[i] += di * self.tau_fit[i];
            self.t[i] += di * self.tau_fit[i];
        }
    }
}

/// Posterior `(mean, variance)` of `a` given the treatment residual, folding
/// in the control group first and then the treated group. Prior `N(0, 1)`.
pub fn a_posterior<T: Scalar>(t: &[T], mu_fit: &[T], z: &[u8], variances: (T, T)) -> (T, T) {
    let (mut mm0, mut tm0, mut mm1, mut tm1) = (T::zero(), T::zero(), T::zero(), T::zero());
    for i in 0..t.len() {
        if z[i] == 0 {
            mm0 += mu_fit[i] * mu_fit[i];
            tm0 += t[i] * mu_fit[i];
        } else {
            mm1 += mu_fit[i] * mu_fit[i];
            tm1 += t[i] * mu_fit[i];
        }
    }
    let var0 = T::one() / (T::one() + mm0 / variances.0);
    let mean0 = tm0 / variances.0 * var0;
    let var = T::one() / (T::one() / var0 + mm1 / variances.1);
    let mean = (mean0 / var0 + tm1 / variances.1) * var;
    (mean, var)
}

/// Draws `a ~ N(mean, var)` from [`a_posterior`].
pub fn update_a<T: Scalar, R: Rng + ?Sized>(t: &[T], mu_fit: &[T], z: &[u8], variances: (T, T), rng: &mut R) -> T {
    let (mean, var) = a_posterior(t, mu_fit, z, variances);
    T::sample_normal(mean, var, rng)
}

/// Independent per-group posteriors `[(mean, var); 2]` for `b0`, `b1` given
/// the prognostic residual. Prior `N(0, 1/2)` for each.
pub fn b_posterior<T: Scalar>(v: &[T], tau_fit: &[T], z: &[u8], variances: (T, T)) -> [(T, T); 2] {
    let mut tt = [T::zero(); 2];
    let mut vt = [T::zero(); 2];
    for i in 0..v.len() {
        let g = z[i] as usize;
        tt[g] += tau_fit[i] * tau_fit[i];
        vt[g] += v[i] * tau_fit[i];
    }
    let sig = [variances.0, variances.1];
    let two = T::lit(2.0);
    let mut out = [(T::zero(), T::zero()); 2];
    for g in 0..2 {
        let var = T::one() / (two + tt[g] / sig[g]);
        out[g] = (vt[g] / sig[g] * var, var);
    }
    out
}

pub fn update_b<T: Scalar, R: Rng + ?Sized>(v: &[T], tau_fit: &[T], z: &[u8], variances: (T, T), rng: &mut R) -> (T, T) {
    let [p0, p1] = b_posterior(v, tau_fit, z, variances);
    (T::sample_normal(p0.0, p0.1, rng), T::sample_normal(p1.0, p1.1, rng))
}

/// Gamma `(shape, rate)` of each group's precision given the total residual.
pub fn sigma_posterior<T: Scalar>(r: &[T], z: &[u8], hp: &Hyperparams<T>) -> [(T, T); 2] {
    let mut n = [0usize; 2];
    let mut ss = [T::zero(); 2];
    for (ri, &zi) in r.iter().zip(z) {
        n[zi as usize] += 1;
        ss[zi as usize] += *ri * *ri;
    }
    let half = T::lit(0.5);
    [
        ((T::lit(n[0] as f64) + hp.kappa0) * half, (ss[0] + hp.s0_prior) * half),
        ((T::lit(n[1] as f64) + hp.kappa1) * half, (ss[1] + hp.s1_prior) * half),
    ]
}

/// Draws `(sigma0^2, sigma1^2)` as reciprocals of Gamma precision draws.
pub fn update_sigmas<T: Scalar, R: Rng + ?Sized>(r: &[T], z: &[u8], hp: &Hyperparams<T>, rng: &mut R) -> (T, T) {
    let [g0, g1] = sigma_posterior(r, z, hp);
    let draw = |(shape, rate): (T, T), rng: &mut R| loop {
        let v = T::one() / T::sample_gamma(shape, rate, rng);
        // an f32 gamma draw can underflow to 0; redraw rather than emit inf
        if v.is_finite() && v > T::zero() {
            return v;
        }
    };
    let s0 = draw(g0, rng);
    let s1 = draw(g1, rng);
    assert!(s0 > T::zero() && s1 > T::zero());
    (s0, s1)
}

/// Everything a sampler needs about one dataset on the standardized scale.
pub(crate) struct Prepared<T> {
    pub y_std: Vec<T>,
    pub y_mean: T,
    pub y_sd: T,
    pub z: Vec<u8>,
    /// Covariates plus the propensity column.
    pub x_mu: Matrix<T>,
    pub x_tau: Matrix<T>,
}

impl<T: Scalar> Prepared<T> {
    pub fn new(ds: &Dataset<T>) -> Result<Self> {
        ds.validate_for_fit()?;
        if ds.n_covariates() == 0 {
            return Err(XbcfError::validation("at least one covariate is required"));
        }
        let n = T::lit(ds.n() as f64);
        let y_mean = ds.y.iter().copied().sum::<T>() / n;
        let ss: T = ds.y.iter().map(|&v| (v - y_mean) * (v - y_mean)).sum();
        let mut y_sd = if ds.n() > 1 {
            (ss / T::lit(ds.n() as f64 - 1.0)).sqrt()
        } else {
            T::zero()
        };
        if !(y_sd > T::zero()) {
            y_sd = T::one();
        }
        let pi = ds.pi_hat.as_ref().expect("checked by validate_for_fit");
        Ok(Prepared {
            y_std: ds.y.iter().map(|&v| (v - y_mean) / y_sd).collect(),
            y_mean,
            y_sd,
            z: ds.z.clone(),
            x_mu: ds.x.with_column(pi)?,
            x_tau: ds.x.clone(),
        })
    }

    pub fn n_covariates(&self) -> usize {
        self.x_tau.n_cols()
    }
}

/// What just happened, reported to a [`SweepObserver`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateEvent {
    Tree { role: ForestRole, index: usize },
    Parameters,
    SweepEnd { sweep: usize },
}

/// Instrumentation hook called after every update of [`fit_observed`].
pub trait SweepObserver<T> {
    fn on_update(&mut self, event: UpdateEvent, state: &ResidualState<T>, scale: &ScaleState<T>);
}

impl<T> SweepObserver<T> for () {
    fn on_update(&mut self, _: UpdateEvent, _: &ResidualState<T>, _: &ScaleState<T>) {}
}

/// Starting values of the scale parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StartValues<T> {
    pub a: T,
    pub b0: T,
    pub b1: T,
    pub sigma0_sq: T,
    pub sigma1_sq: T,
}

impl<T: Scalar> Default for StartValues<T> {
    /// `a = 1`, `b = (-0.5, 0.5)`, unit variances.
    fn default() -> Self {
        let s = ScaleState::initial(T::zero(), T::one());
        StartValues {
            a: s.a,
            b0: s.b0,
            b1: s.b1,
            sigma0_sq: s.sigma0_sq,
            sigma1_sq: s.sigma1_sq,
        }
    }
}

/// Fits the model with the RNG seeded from `hp.seed`.
pub fn fit<T: Scalar>(dataset: &Dataset<T>, hp: &Hyperparams<T>) -> Result<PosteriorDraws<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    fit_observed(dataset, hp, &StartValues::default(), &mut rng, &mut ())
}

/// Fits the model from `start`, drawing from `rng` and reporting every
/// update to `observer`. Returns all `I` sweeps, the first `burnin` flagged.
pub fn fit_observed<T: Scalar, R: Rng + ?Sized, O: SweepObserver<T>>(
    dataset: &Dataset<T>,
    hp: &Hyperparams<T>,
    start: &StartValues<T>,
    rng: &mut R,
    observer: &mut O,
) -> Result<PosteriorDraws<T>> {
    hp.validate()?;
    let prep = Prepared::new(dataset)?;
    let n = prep.y_std.len();
    let z = &prep.z;
    let d = prep.n_covariates();
    let (big_l, big_k) = (hp.n_prognostic_trees, hp.n_treatment_trees);

    let scale = ScaleState {
        a: start.a,
        b0: start.b0,
        b1: start.b1,
        sigma0_sq: start.sigma0_sq,
        sigma1_sq: start.sigma1_sq,
        y_mean: prep.y_mean,
        y_sd: prep.y_sd,
    };
    scale.validate()?;
    let mut scale = scale;
    // standardized outcome has mean zero, so prognostic leaves start at 0 as well
    let y_bar = prep.y_std.iter().copied().sum::<T>() / T::lit(n as f64);
    let mu0 = y_bar / T::lit(big_l as f64);
    let mut mu_trees = vec![Tree::leaf(mu0); big_l];
    let mut tau_trees = vec![Tree::leaf(T::zero()); big_k];
    let mut state = ResidualState::new(
        prep.y_std.clone(),
        z,
        &scale,
        vec![vec![mu0; n]; big_l],
        vec![vec![T::zero(); n]; big_k],
    );

    let cfg = GrowConfig::from(hp);
    let sorted_mu = SortedColumns::new(&prep.x_mu);
    let sorted_tau = SortedColumns::new(&prep.x_tau);
    let mut grow_mu = TreeGrower::new(&prep.x_mu, z, &sorted_mu);
    let mut grow_tau = TreeGrower::new(&prep.x_tau, z, &sorted_tau);
    let mut partial = vec![T::zero(); n];
    let mut fitted = vec![T::zero(); n];
    let mut snapshots = Vec::with_capacity(hp.sweeps);

    for sweep in 0..hp.sweeps {
        for l in 0..big_l {
            state.partial_prognostic(l, scale.a, &mut partial);
            let leaf = LeafModel::new((scale.a, scale.a), scale.variances(), hp.nu_mu)?;
            mu_trees[l] = grow_mu.grow(&partial, &leaf, &cfg, 0, rng, &mut fitted);
            state.replace_prognostic(l, scale.a, &fitted);
            observer.on_update(UpdateEvent::Tree { role: ForestRole::Prognostic, index: l }, &state, &scale);
            sample_scale(&mut state, &mut scale, z, hp, rng);
            observer.on_update(UpdateEvent::Parameters, &state, &scale);
        }
        for k in 0..big_k {
            state.partial_treatment(k, z, &scale, &mut partial);
            let leaf = LeafModel::new((scale.b0, scale.b1), scale.variances(), hp.nu_tau)?;
            tau_trees[k] = grow_tau.grow(&partial, &leaf, &cfg, 0, rng, &mut fitted);
            state.replace_treatment(k, z, &scale, &fitted);
            observer.on_update(UpdateEvent::Tree { role: ForestRole::Treatment, index: k }, &state, &scale);
            sample_scale(&mut state, &mut scale, z, hp, rng);
            observer.on_update(UpdateEvent::Parameters, &state, &scale);
        }
        snapshots.push(Snapshot {
            prognostic: Forest::new(ForestRole::Prognostic, d, mu_trees.clone()),
            treatment: Forest::new(ForestRole::Treatment, d, tau_trees.clone()),
            scale,
            burnin: sweep < hp.burnin,
            chain: None,
        });
        observer.on_update(UpdateEvent::SweepEnd { sweep }, &state, &scale);
    }
    Ok(PosteriorDraws {
        hyper: hp.clone(),
        snapshots,
    })
}

/// Redraws `a`, then `b0, b1`, then both variances, keeping residuals current.
pub(crate) fn sample_scale<T: Scalar, R: Rng + ?Sized>(
    state: &mut ResidualState<T>,
    scale: &mut ScaleState<T>,
    z: &[u8],
    hp: &Hyperparams<T>,
    rng: &mut R,
) {
    let a = update_a(&state.t, &state.mu_fit, z, scale.variances(), rng);
    state.set_a(scale.a, a);
    scale.a = a;

    let b = update_b(&state.v, &state.tau_fit, z, scale.variances(), rng);
    state.set_b(z, (scale.b0, scale.b1), b);
    scale.b0 = b.0;
    scale.b1 = b.1;

    let (s0, s1) = update_sigmas(&state.r, z, hp, rng);
    scale.sigma0_sq = s0;
    scale.sigma1_sq = s1;
}

/// Point estimate and equal-tailed credible interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    pub mean: T,
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn length(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Mean and `(1-level)/2`, `1-(1-level)/2` quantiles of `draws`.
    pub fn from_draws(draws: &[T], level: T) -> Self {
        let mut sorted = draws.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        let tail = (T::one() - level) * T::lit(0.5);
        Interval {
            mean: draws.iter().copied().sum::<T>() / T::lit(draws.len() as f64),
            lo: quantile_sorted(&sorted, tail),
            hi: quantile_sorted(&sorted, T::one() - tail),
        }
    }
}

/// Linearly interpolated empirical quantile of sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * T::lit((n - 1) as f64);
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::lit(lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-row CATE intervals plus the ATE draws and interval.
#[derive(Clone, Debug, PartialEq)]
pub struct CateSummary<T> {
    pub rows: Vec<Interval<T>>,
    pub ate: Interval<T>,
    pub ate_draws: Vec<T>,
}

/// CATE draws on the outcome scale, one vector (over rows) per kept snapshot:
/// `(b1 - b0) * tau(x) * y_sd`.
pub fn cate_draws<T: Scalar>(draws: &PosteriorDraws<T>, x: &Matrix<T>) -> Result<Vec<Vec<T>>> {
    draws
        .kept()
        .map(|s| {
            let tau = s.treatment.predict_matrix(x, None)?;
            let k = s.scale.effect_scale() * s.scale.y_sd;
            Ok(tau.into_iter().map(|t| k * t).collect())
        })
        .collect()
}

/// Summarizes kept draws into CATE and ATE estimates at credible `level`.
/// The CATE only involves the treatment forest, so no propensity is needed.
pub fn summarize<T: Scalar>(draws: &PosteriorDraws<T>, x_eval: &Matrix<T>, level: T) -> Result<CateSummary<T>> {
    if !(level > T::zero() && level < T::one()) {
        return Err(XbcfError::validation("credible level must lie in (0, 1)"));
    }
    let per_draw = cate_draws(draws, x_eval)?;
    if per_draw.is_empty() {
        return Err(XbcfError::validation("no post-burn-in draws to summarize"));
    }
    Ok(summarize_cate_draws(&per_draw, x_eval.n_rows(), level))
}

pub(crate) fn summarize_cate_draws<T: Scalar>(per_draw: &[Vec<T>], n_rows: usize, level: T) -> CateSummary<T> {
    let mut column = vec![T::zero(); per_draw.len()];
    let rows = (0..n_rows)
        .map(|i| {
            for (c, d) in column.iter_mut().zip(per_draw) {
                *c = d[i];
            }
            Interval::from_draws(&column, level)
        })
        .collect();
    let ate_draws: Vec<T> = per_draw
        .iter()
        .map(|d| d.iter().copied().sum::<T>() / T::lit(n_rows.max(1) as f64))
        .collect();
    CateSummary {
        rows,
        ate: Interval::from_draws(&ate_draws, level),
        ate_draws,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn a_posterior_empty_and_zero_design() {
        assert_eq!(a_posterior::<f64>(&[], &[], &[], (1.0, 1.0)), (0.0, 1.0));
        let p = a_posterior(&[1.0, -2.0, 3.0], &[0.0; 3], &[0, 1, 1], (1.0, 2.0));
        assert_eq!(p, (0.0, 1.0));
    }

    #[test]
    fn a_posterior_single_control() {
        let (m, v): (f64, f64) = a_posterior(&[4.0], &[2.0], &[0], (1.0, 1.0));
        assert!((v - 0.2).abs() < 1e-15);
        assert!((m - 1.6).abs() < 1e-15);
    }

    #[test]
    fn b_posterior_hand_values() {
        let [p0, p1]: [(f64, f64); 2] = b_posterior(&[1.0], &[1.0], &[0], (1.0, 1.0));
        assert!((p0.1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((p0.0 - 1.0 / 3.0).abs() < 1e-15);
        // no treated units: prior N(0, 1/2)
        assert_eq!(p1, (0.0, 0.5));
        let [q0, q1] = b_posterior(&[1.0, 2.0], &[0.0, 0.0], &[0, 1], (1.0, 1.0));
        assert_eq!((q0, q1), ((0.0, 0.5), (0.0, 0.5)));
    }

    #[test]
    fn prior_draws_when_no_data() {
        let mut r = rng(1);
        let n = 40_000;
        let draws: Vec<f64> = (0..n).map(|_| update_a::<f64, _>(&[], &[], &[], (1.0, 1.0), &mut r)).collect();
        let var = draws.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.03, "{var}");
        let b1: Vec<f64> = (0..n).map(|_| update_b(&[1.0], &[1.0], &[0], (1.0, 1.0), &mut r).1).collect();
        let var = b1.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var - 0.5).abs() < 0.02, "{var}");
    }

    #[test]
    fn sigma_prior_when_group_empty() {
        let hp = Hyperparams::<f64>::default();
        let [g0, g1] = sigma_posterior(&[1.0, 2.0], &[1, 1], &hp);
        assert_eq!(g0, (1.5, 2.5));
        assert_eq!(g1, (2.5, 5.0 / 2.0 + 2.5));
    }

    #[test]
    fn sigma_concentrates() {
        let mut r = rng(2);
        let hp = Hyperparams::<f64> {
            kappa0: 3.0,
            kappa1: 3.0,
            s0_prior: 1.0,
            s1_prior: 1.0,
            ..Default::default()
        };
        let res: Vec<f64> = (0..10_000).map(|_| f64::sample_standard_normal(&mut r)).collect();
        let z = vec![0u8; res.len()];
        let m = (0..2000).map(|_| update_sigmas(&res, &z, &hp, &mut r).0).sum::<f64>() / 2000.0;
        assert!((0.9..=1.1).contains(&m), "{m}");
        for _ in 0..1000 {
            let (a, b) = update_sigmas(&[], &[], &hp, &mut r);
            assert!(a > 0.0 && b > 0.0);
        }
    }

    #[test]
    fn quantiles_and_intervals() {
        let iv = Interval::from_draws(&[3.0f64], 0.95);
        assert_eq!((iv.mean, iv.lo, iv.hi), (3.0, 3.0, 3.0));
        let iv = Interval::from_draws(&[-2.0f64, -1.0, 0.0, 1.0, 2.0], 0.5);
        assert_eq!(iv.mean, 0.0);
        assert_eq!(iv.lo, -iv.hi);
        assert_eq!(quantile_sorted(&[0.0f64, 10.0], 0.25), 2.5);

        // stratified draws from N(3, 0.25)
        let normal = statrs::distribution::Normal::new(3.0, 0.5).unwrap();
        let draws: Vec<f64> = (0..1000)
            .map(|i| statrs::distribution::ContinuousCDF::inverse_cdf(&normal, (i as f64 + 0.5) / 1000.0))
            .collect();
        let iv = Interval::from_draws(&draws, 0.95);
        assert!((iv.lo - 2.02).abs() < 0.05 && (iv.hi - 3.98).abs() < 0.05, "{iv:?}");
    }

    #[test]
    fn summarize_single_draw() {
        let hp = Hyperparams::<f64>::new(1, 1).with_sweeps(1, 0);
        let mut scale = ScaleState::initial(0.0, 1.0);
        scale.b0 = 0.0;
        scale.b1 = 1.0;
        let draws = PosteriorDraws::new(
            hp,
            vec![Snapshot {
                prognostic: Forest::constant(ForestRole::Prognostic, 1, 1, 0.0),
                treatment: Forest::constant(ForestRole::Treatment, 1, 1, 3.0),
                scale,
                burnin: false,
                chain: None,
            }],
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let s = summarize(&draws, &x, 0.95).unwrap();
        for row in &s.rows {
            assert_eq!((row.mean, row.length()), (3.0, 0.0));
        }
        assert_eq!(s.ate.mean, 3.0);

        let mut burned = draws.clone();
        burned.snapshots[0].burnin = true;
        assert!(summarize(&burned, &x, 0.95).is_err());
    }
}
