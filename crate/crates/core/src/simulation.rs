//! Synthetic confounded data with known treatment effects, scoring of CATE
//! estimates against the truth, and a replicated benchmark runner.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bcf::{bcf_fit, warm_start, BcfConfig, DEFAULT_ITERS_PER_CHAIN};
use crate::error::{Result, XbcfError};
use crate::io::estimate_propensity;
use crate::model::{Dataset, Hyperparams, Matrix, PosteriorDraws};
use crate::scalar::Scalar;
use crate::xbcf::{self, summarize, CateSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Prognostic {
    Linear,
    Nonlinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Treatment {
    Homogeneous,
    Heterogeneous,
}

impl fmt::Display for Prognostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prognostic::Linear => "linear",
            Prognostic::Nonlinear => "nonlinear",
        })
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Treatment::Homogeneous => "homogeneous",
            Treatment::Heterogeneous => "heterogeneous",
        })
    }
}

impl FromStr for Prognostic {
    type Err = XbcfError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Prognostic::Linear),
            "nonlinear" => Ok(Prognostic::Nonlinear),
            _ => Err(XbcfError::validation(format!("unknown prognostic form '{s}'"))),
        }
    }
}

impl FromStr for Treatment {
    type Err = XbcfError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(Treatment::Homogeneous),
            "heterogeneous" => Ok(Treatment::Heterogeneous),
            _ => Err(XbcfError::validation(format!("unknown treatment form '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DgpConfig {
    pub n: usize,
    pub prognostic: Prognostic,
    pub treatment: Treatment,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(n: usize, prognostic: Prognostic, treatment: Treatment, seed: u64) -> Self {
        DgpConfig {
            n,
            prognostic,
            treatment,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(XbcfError::validation("simulated samples need at least 10 units"));
        }
        Ok(())
    }

    /// Short label such as `linear-homogeneous-n500`.
    pub fn label(&self) -> String {
        format!("{}-{}-n{}", self.prognostic, self.treatment, self.n)
    }
}

/// Column names of the simulated covariates.
pub const COVARIATE_NAMES: [&str; 5] = ["x1", "x2", "x3", "x4", "x5"];

/// A simulated dataset (without propensity) and its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedData<T> {
    pub dataset: Dataset<T>,
    pub mu_true: Vec<T>,
    pub tau_true: Vec<T>,
    pub pi_true: Vec<T>,
}

/// Level effect of the three-level categorical covariate.
pub fn g<T: Scalar>(level: T) -> T {
    match level.to_i64() {
        Some(1) => T::lit(2.0),
        Some(2) => T::lit(-1.0),
        Some(3) => T::lit(-4.0),
        _ => panic!("categorical level must be 1, 2 or 3"),
    }
}

/// Prognostic function at `(x1, ..., x5)`.
pub fn mu_fn<T: Scalar>(form: Prognostic, x: &[T]) -> T {
    match form {
        Prognostic::Linear => T::one() + g(x[3]) + x[0] * x[2],
        Prognostic::Nonlinear => T::lit(-6.0) + g(x[3]) + T::lit(6.0) * (x[2] - T::one()).abs(),
    }
}

/// Treatment effect at `(x1, ..., x5)`.
pub fn tau_fn<T: Scalar>(form: Treatment, x: &[T]) -> T {
    match form {
        Treatment::Homogeneous => T::lit(3.0),
        Treatment::Heterogeneous => T::one() + T::lit(2.0) * x[1] * x[4],
    }
}

fn std_normal_cdf(v: f64) -> f64 {
    Normal::standard().cdf(v)
}

/// Draws a sample. `x1, x2, x3` are standard normal, `x4` is uniform on
/// `{1, 2, 3}` and `x5` is a fair coin on `{0, 1}`. Treatment is assigned with
/// probability `0.8 Phi(3 mu / s - 0.5 x1) + 0.05 + u / 10`, `s` the sample
/// standard deviation of `mu`, and `y = mu + tau z + N(0, 1)`.
pub fn generate<T: Scalar>(config: &DgpConfig) -> Result<SimulatedData<T>> {
    config.validate()?;
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = T::sample_standard_normal(&mut rng);
        let x2 = T::sample_standard_normal(&mut rng);
        let x3 = T::sample_standard_normal(&mut rng);
        let x4 = T::lit(rng.random_range(1..=3) as f64);
        let x5 = T::lit(f64::from(u8::from(rng.random::<bool>())));
        rows.push(vec![x1, x2, x3, x4, x5]);
    }
    let mu_true: Vec<T> = rows.iter().map(|r| mu_fn(config.prognostic, r)).collect();
    let tau_true: Vec<T> = rows.iter().map(|r| tau_fn(config.treatment, r)).collect();
    let mean = mu_true.iter().copied().sum::<T>() / T::lit(n as f64);
    let var = mu_true.iter().map(|&m| (m - mean) * (m - mean)).sum::<T>() / T::lit(n as f64 - 1.0);
    let s = if var > T::zero() { var.sqrt() } else { T::one() };

    let mut pi_true = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let arg = T::lit(3.0) * mu_true[i] / s - T::lit(0.5) * rows[i][0];
        let u = T::sample_open01(&mut rng);
        let pi = T::lit(0.8 * std_normal_cdf(arg.as_f64())) + T::lit(0.05) + u / T::lit(10.0);
        let zi = u8::from(T::sample_open01(&mut rng) < pi);
        let eps = T::sample_standard_normal(&mut rng);
        y.push(mu_true[i] + tau_true[i] * T::lit(zi as f64) + eps);
        pi_true.push(pi);
        z.push(zi);
    }
    let dataset = Dataset::new(y, z, Matrix::from_rows(&rows)?, None)?;
    Ok(SimulatedData {
        dataset,
        mu_true,
        tau_true,
        pi_true,
    })
}

/// Accuracy of one fit against the truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow<T> {
    /// Estimated minus true sample ATE.
    pub ate_error: T,
    pub cate_rmse: T,
    /// 1 if the ATE interval covers the true ATE, else 0.
    pub ate_cover: T,
    /// Fraction of units whose CATE interval covers the truth.
    pub cate_cover: T,
    pub ate_il: T,
    pub cate_il: T,
}

pub fn score<T: Scalar>(estimates: &CateSummary<T>, tau_true: &[T]) -> Result<MetricsRow<T>> {
    let n = tau_true.len();
    if estimates.rows.len() != n || n == 0 {
        return Err(XbcfError::validation(format!(
            "{} estimate rows for {n} true effects",
            estimates.rows.len()
        )));
    }
    let nf = T::lit(n as f64);
    let ate_true = tau_true.iter().copied().sum::<T>() / nf;
    let mut sq = T::zero();
    let mut covered = 0usize;
    let mut il = T::zero();
    for (r, &t) in estimates.rows.iter().zip(tau_true) {
        sq += (r.mean - t) * (r.mean - t);
        covered += usize::from(r.contains(t));
        il += r.length();
    }
    Ok(MetricsRow {
        ate_error: estimates.ate.mean - ate_true,
        cate_rmse: (sq / nf).sqrt(),
        ate_cover: if estimates.ate.contains(ate_true) { T::one() } else { T::zero() },
        cate_cover: T::lit(covered as f64) / nf,
        ate_il: estimates.ate.length(),
        cate_il: il / nf,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Xbcf,
    BcfCold,
    WsBcf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Xbcf, Method::BcfCold, Method::WsBcf];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Xbcf => "xbcf",
            Method::BcfCold => "bcf",
            Method::WsBcf => "ws-bcf",
        })
    }
}

impl FromStr for Method {
    type Err = XbcfError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xbcf" => Ok(Method::Xbcf),
            "bcf" | "bcf_cold" | "bcf-cold" => Ok(Method::BcfCold),
            "ws-bcf" | "ws_bcf" | "wsbcf" => Ok(Method::WsBcf),
            _ => Err(XbcfError::validation(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropensitySource {
    Estimated,
    True,
}

/// Settings of a benchmark run.
#[derive(Clone, Debug)]
pub struct BenchmarkConfig<T> {
    pub configs: Vec<DgpConfig>,
    pub methods: Vec<Method>,
    pub reps: usize,
    /// Worker threads for replications; 0 uses the global pool.
    pub threads: usize,
    pub propensity: PropensitySource,
    pub hyper: Hyperparams<T>,
    pub bcf: BcfConfig,
    pub iters_per_chain: usize,
}

impl<T: Scalar> BenchmarkConfig<T> {
    pub fn new(configs: Vec<DgpConfig>, methods: Vec<Method>, reps: usize) -> Self {
        BenchmarkConfig {
            configs,
            methods,
            reps,
            threads: 0,
            propensity: PropensitySource::Estimated,
            hyper: Hyperparams::default(),
            bcf: BcfConfig::default(),
            iters_per_chain: DEFAULT_ITERS_PER_CHAIN,
        }
    }
}

/// Averaged metrics of one (config, method) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub config: String,
    pub method: Method,
    /// Root mean squared ATE error across replications.
    pub ate_rmse: f64,
    pub cate_rmse: f64,
    pub ate_cover: f64,
    pub cate_cover: f64,
    pub ate_il: f64,
    pub cate_il: f64,
    /// Mean wall-clock seconds per fit.
    pub seconds: f64,
    pub completed: usize,
    pub failed: usize,
}

impl BenchmarkRow {
    pub const HEADER: [&'static str; 11] = [
        "config", "method", "ate_rmse", "cate_rmse", "ate_cover", "cate_cover", "ate_il", "cate_il",
        "seconds", "completed", "failed",
    ];

    pub fn cells(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.6}");
        vec![
            self.config.clone(),
            self.method.to_string(),
            f(self.ate_rmse),
            f(self.cate_rmse),
            f(self.ate_cover),
            f(self.cate_cover),
            f(self.ate_il),
            f(self.cate_il),
            f(self.seconds),
            self.completed.to_string(),
            self.failed.to_string(),
        ]
    }
}

/// Seeds of replication `rep` of a config: one for the data, one for fitting.
fn rep_seeds(config: &DgpConfig, rep: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep as u64);
    (rng.random(), rng.random())
}

/// Metrics of one fit and its wall-clock seconds.
type Timed = (MetricsRow<f64>, f64);
type RepResult = Vec<(Method, Result<Timed>)>;

/// Runs one replication of every requested method. ws-BCF chains start from
/// this replication's XBCF fit; its time includes that fit.
fn run_rep<T: Scalar>(bench: &BenchmarkConfig<T>, config: &DgpConfig, rep: usize) -> RepResult {
    let (data_seed, fit_seed) = rep_seeds(config, rep);
    let prepared = (|| -> Result<SimulatedData<T>> {
        let mut sim = generate::<T>(&DgpConfig { seed: data_seed, ..*config })?;
        let pi = match bench.propensity {
            PropensitySource::True => sim.pi_true.clone(),
            PropensitySource::Estimated => estimate_propensity(&sim.dataset.x, &sim.dataset.z)?.pi_hat,
        };
        sim.dataset.pi_hat = Some(pi);
        Ok(sim)
    })();
    let sim = match prepared {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return bench
                .methods
                .iter()
                .map(|&m| (m, Err(XbcfError::Validation(msg.clone()))))
                .collect();
        }
    };

    let level = T::lit(0.95);
    let hyper = bench.hyper.clone().with_seed(fit_seed);
    let evaluate = |draws: &PosteriorDraws<T>, seconds: f64| -> Result<Timed> {
        let summary = summarize(draws, &sim.dataset.x, level)?;
        let m = score(&summary, &sim.tau_true)?;
        Ok((
            MetricsRow {
                ate_error: m.ate_error.as_f64(),
                cate_rmse: m.cate_rmse.as_f64(),
                ate_cover: m.ate_cover.as_f64(),
                cate_cover: m.cate_cover.as_f64(),
                ate_il: m.ate_il.as_f64(),
                cate_il: m.cate_il.as_f64(),
            },
            seconds,
        ))
    };

    let mut xbcf_fit: Option<(Result<PosteriorDraws<T>>, f64)> = None;
    let mut xbcf_once = || {
        if xbcf_fit.is_none() {
            let start = Instant::now();
            let draws = xbcf::fit(&sim.dataset, &hyper);
            xbcf_fit = Some((draws, start.elapsed().as_secs_f64()));
        }
        let (draws, secs) = xbcf_fit.as_ref().expect("just fitted");
        match draws {
            Ok(d) => Ok((d.clone(), *secs)),
            Err(e) => Err(XbcfError::Validation(e.to_string())),
        }
    };

    let mut out = Vec::with_capacity(bench.methods.len());
    for &method in &bench.methods {
        let result = match method {
            Method::Xbcf => xbcf_once().and_then(|(d, s)| evaluate(&d, s)),
            Method::BcfCold => {
                let mut rng = ChaCha8Rng::seed_from_u64(fit_seed);
                rng.set_stream(1);
                let start = Instant::now();
                bcf_fit(&sim.dataset, &hyper, bench.bcf, None, &mut rng)
                    .and_then(|d| evaluate(&d, start.elapsed().as_secs_f64()))
            }
            Method::WsBcf => xbcf_once().and_then(|(init, init_secs)| {
                let mut rng = ChaCha8Rng::seed_from_u64(fit_seed);
                rng.set_stream(2);
                let start = Instant::now();
                warm_start(&sim.dataset, &hyper, &init, bench.iters_per_chain, &mut rng)
                    .and_then(|d| evaluate(&d, init_secs + start.elapsed().as_secs_f64()))
            }),
        };
        out.push((method, result));
    }
    out
}

/// Runs every replication of every config, in parallel across replications,
/// and averages metrics per (config, method). Failed replications are
/// counted and excluded; a cell with no successes reports NaN metrics.
/// Output rows follow config order, then method order.
pub fn run_benchmark<T: Scalar>(bench: &BenchmarkConfig<T>) -> Result<Vec<BenchmarkRow>> {
    if bench.reps == 0 {
        return Err(XbcfError::validation("at least one replication is required"));
    }
    if bench.methods.is_empty() || bench.configs.is_empty() {
        return Err(XbcfError::validation("nothing to benchmark"));
    }
    bench.hyper.validate()?;
    for c in &bench.configs {
        c.validate()?;
    }
    let tasks: Vec<(usize, usize)> = (0..bench.configs.len())
        .flat_map(|c| (0..bench.reps).map(move |r| (c, r)))
        .collect();
    let work = || -> Vec<RepResult> {
        tasks
            .par_iter()
            .map(|&(c, r)| run_rep(bench, &bench.configs[c], r))
            .collect()
    };
    let results = if bench.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(bench.threads)
            .build()
            .map_err(|e| XbcfError::validation(e.to_string()))?
            .install(work)
    } else {
        work()
    };

    let mut rows = Vec::new();
    for (c, config) in bench.configs.iter().enumerate() {
        for (m, &method) in bench.methods.iter().enumerate() {
            let cell: Vec<&Result<Timed>> = tasks
                .iter()
                .zip(&results)
                .filter(|((tc, _), _)| *tc == c)
                .map(|(_, rep)| &rep[m].1)
                .collect();
            let ok: Vec<&Timed> = cell.iter().filter_map(|r| r.as_ref().ok()).collect();
            let k = ok.len() as f64;
            let mean = |f: &dyn Fn(&Timed) -> f64| -> f64 {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / k
                }
            };
            rows.push(BenchmarkRow {
                config: config.label(),
                method,
                ate_rmse: mean(&|r| r.0.ate_error * r.0.ate_error).sqrt(),
                cate_rmse: mean(&|r| r.0.cate_rmse),
                ate_cover: mean(&|r| r.0.ate_cover),
                cate_cover: mean(&|r| r.0.cate_cover),
                ate_il: mean(&|r| r.0.ate_il),
                cate_il: mean(&|r| r.0.cate_il),
                seconds: mean(&|r| r.1),
                completed: ok.len(),
                failed: cell.len() - ok.len(),
            });
        }
    }
    Ok(rows)
}
