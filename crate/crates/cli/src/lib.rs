//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and returns the process exit code: 0 on success, 1 for invalid
//! input or usage errors, 2 for I/O failures.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xbcf::bcf::{warm_start, BcfConfig};
use xbcf::io::{
    cate_table_text, estimate_propensity, read_table, render_subgroups, subgroup_posterior, subgroup_tree,
    write_table, ForestArchive, Table,
};
use xbcf::simulation::{
    generate, run_benchmark, BenchmarkConfig, BenchmarkRow, DgpConfig, Method, PropensitySource,
    Prognostic, Treatment, COVARIATE_NAMES,
};
use xbcf::xbcf::summarize;
use xbcf::{Dataset, Hyperparams, Matrix, PosteriorDraws, Result, XbcfError};

/// Ground-truth columns written by `simulate`; never used as covariates.
const TRUTH_COLUMNS: [&str; 3] = ["mu_true", "tau_true", "pi_true"];

#[derive(Parser, Debug)]
#[command(name = "xbcf", version, about = "Accelerated Bayesian causal forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the model and write a forest archive plus a CATE table.
    Fit(FitArgs),
    /// Summarize an archive's CATE on a data file.
    Predict(PredictArgs),
    /// Run MH chains started at an archive's post-burn-in forests.
    Warmstart(WarmstartArgs),
    /// Write a simulated dataset with ground-truth columns.
    Simulate(SimulateArgs),
    /// Replicated simulation study over data configs and methods.
    Benchmark(BenchmarkArgs),
    /// Regression-tree subgroups of point CATE estimates.
    Subgroups(SubgroupArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PropensityMode {
    /// Read the column named by --pi-col.
    Column,
    /// Logistic regression of treatment on the covariates.
    Estimate,
    /// Read the `pi_true` column of a simulated file.
    True,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    outcome: String,
    #[arg(long, default_value = "z")]
    treatment: String,
    #[arg(long, value_enum, default_value = "estimate")]
    propensity: PropensityMode,
    #[arg(long, default_value = "pi")]
    pi_col: String,
    /// Comma-separated columns to leave out of the covariates.
    #[arg(long, value_delimiter = ',')]
    ignore: Vec<String>,
    #[arg(long, default_value = ",")]
    delimiter: char,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    sweeps: usize,
    #[arg(long, default_value_t = 15)]
    burnin: usize,
    #[arg(long, default_value_t = 30)]
    trees_mu: usize,
    #[arg(long, default_value_t = 10)]
    trees_tau: usize,
}

impl ModelArgs {
    fn hyperparams(&self) -> Hyperparams<f64> {
        Hyperparams::new(self.trees_mu, self.trees_tau)
            .with_sweeps(self.sweeps, self.burnin)
            .with_seed(self.seed)
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Archive output path.
    #[arg(long)]
    out: PathBuf,
    /// CATE table output path; stdout when omitted.
    #[arg(long)]
    cate: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    archive: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// CATE table output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WarmstartArgs {
    #[arg(long)]
    archive: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// MH iterations per chain.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Use only the first N post-burn-in forests as starting points.
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pooled archive output path.
    #[arg(long)]
    out: PathBuf,
    /// CATE table output path; stdout when omitted.
    #[arg(long)]
    cate: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value = "linear")]
    prognostic: String,
    #[arg(long, default_value = "homogeneous")]
    treatment: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "500")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "linear")]
    prognostic: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "homogeneous")]
    treatment: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "xbcf,ws-bcf")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// `estimate` or `true`.
    #[arg(long, value_enum, default_value = "estimate")]
    propensity: PropensityMode,
    #[command(flatten)]
    model: ModelArgs,
    /// MH iterations per warm-started chain.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    bcf_burnin: usize,
    #[arg(long, default_value_t = 1000)]
    bcf_iters: usize,
    /// Metrics table output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SubgroupArgs {
    /// CATE table written by `fit` or `predict`.
    #[arg(long)]
    cate: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Archive for posterior subgroup differences.
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 20)]
    min_leaf: usize,
    /// Two subgroup ids to compare; defaults to the highest and lowest.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    compare: Option<Vec<usize>>,
    /// Report output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn delimiter(c: char) -> Result<u8> {
    u8::try_from(c).map_err(|_| XbcfError::Validation(format!("delimiter '{c}' is not a single byte")))
}

fn find<'a>(table: &'a Table<f64>, path: &Path, name: &str) -> Result<&'a [f64]> {
    table.column(name).ok_or_else(|| XbcfError::Parse {
        path: path.to_path_buf(),
        row: 1,
        column: name.to_string(),
        message: "column not found in header".into(),
    })
}

/// Covariate names and matrix: every column not claimed by another role.
fn covariates(table: &Table<f64>, args: &DataArgs) -> Result<(Vec<String>, Matrix<f64>)> {
    let mut reserved: Vec<&str> = vec![&args.outcome, &args.treatment, &args.pi_col];
    reserved.extend(TRUTH_COLUMNS);
    reserved.extend(args.ignore.iter().map(String::as_str));
    let keep: Vec<usize> = (0..table.header.len())
        .filter(|&j| !reserved.contains(&table.header[j].as_str()))
        .collect();
    if keep.is_empty() {
        return Err(XbcfError::Validation("no covariate columns left".into()));
    }
    let names = keep.iter().map(|&j| table.header[j].clone()).collect();
    let x = Matrix::from_columns(keep.iter().map(|&j| table.columns[j].clone()).collect())?;
    Ok((names, x))
}

fn load(args: &DataArgs) -> Result<Dataset<f64>> {
    let path = &args.data;
    let table = read_table::<f64>(path, delimiter(args.delimiter)?)?;
    for name in &args.ignore {
        find(&table, path, name)?;
    }
    let (_, x) = covariates(&table, args)?;
    let y = find(&table, path, &args.outcome)?.to_vec();
    let mut z = Vec::with_capacity(y.len());
    for (i, &v) in find(&table, path, &args.treatment)?.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(XbcfError::Parse {
                path: path.clone(),
                row: i + 2,
                column: args.treatment.clone(),
                message: format!("treatment must be 0 or 1, found {v}"),
            });
        }
        z.push(v as u8);
    }
    let pi = match args.propensity {
        PropensityMode::Column => find(&table, path, &args.pi_col)?.to_vec(),
        PropensityMode::True => find(&table, path, "pi_true")?.to_vec(),
        PropensityMode::Estimate => {
            let fit = estimate_propensity(&x, &z)?;
            if fit.warning() {
                eprintln!(
                    "warning: propensity fit {} after {} iterations, {} estimates clipped",
                    if fit.converged { "converged" } else { "did not converge" },
                    fit.iterations,
                    fit.clipped
                );
            }
            fit.pi_hat
        }
    };
    Dataset::new(y, z, x, Some(pi))
}

/// Covariates only, for commands that never look at outcomes.
fn load_x(args: &DataArgs) -> Result<(Vec<String>, Matrix<f64>)> {
    let table = read_table::<f64>(&args.data, delimiter(args.delimiter)?)?;
    covariates(&table, args)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| XbcfError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| XbcfError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn check_width(draws: &PosteriorDraws<f64>, x: &Matrix<f64>) -> Result<()> {
    match draws.n_covariates() {
        Some(d) if d != x.n_cols() => Err(XbcfError::Validation(format!(
            "archive was fitted on {d} covariates, data has {}",
            x.n_cols()
        ))),
        _ => Ok(()),
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let draws = xbcf::xbcf::fit(&dataset, &args.model.hyperparams())?;
    ForestArchive::from_draws(&draws)?.save(&args.out)?;
    let summary = summarize(&draws, &dataset.x, 0.95)?;
    emit(args.cate.as_deref(), &cate_table_text(&summary))
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let draws = ForestArchive::load(&args.archive)?.to_draws::<f64>()?;
    let (_, x) = load_x(&args.data)?;
    check_width(&draws, &x)?;
    let summary = summarize(&draws, &x, 0.95)?;
    emit(args.out.as_deref(), &cate_table_text(&summary))
}

fn cmd_warmstart(args: &WarmstartArgs) -> Result<()> {
    let mut init = ForestArchive::load(&args.archive)?.to_draws::<f64>()?;
    let dataset = load(&args.data)?;
    check_width(&init, &dataset.x)?;
    if let Some(limit) = args.chains {
        let mut kept = 0;
        init.snapshots.retain(|s| {
            kept += usize::from(!s.burnin);
            s.burnin || kept <= limit
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let hp = init.hyper.clone();
    let pooled = warm_start(&dataset, &hp, &init, args.iters, &mut rng)?;
    ForestArchive::from_draws(&pooled)?.save(&args.out)?;
    let summary = summarize(&pooled, &dataset.x, 0.95)?;
    emit(args.cate.as_deref(), &cate_table_text(&summary))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let config = DgpConfig::new(args.n, args.prognostic.parse()?, args.treatment.parse()?, args.seed);
    let sim = generate::<f64>(&config)?;
    let mut text = COVARIATE_NAMES.join(",");
    text.push_str(",z,y,pi_true,mu_true,tau_true\n");
    let ds = &sim.dataset;
    for i in 0..ds.n() {
        for j in 0..ds.n_covariates() {
            text.push_str(&format!("{},", ds.x.get(i, j)));
        }
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            ds.z[i], ds.y[i], sim.pi_true[i], sim.mu_true[i], sim.tau_true[i]
        ));
    }
    emit(args.out.as_deref(), &text)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let mut configs = Vec::new();
    for p in &args.prognostic {
        let p: Prognostic = p.parse()?;
        for t in &args.treatment {
            let t: Treatment = t.parse()?;
            for &n in &args.n {
                let seed = args.model.seed.wrapping_add(configs.len() as u64);
                configs.push(DgpConfig::new(n, p, t, seed));
            }
        }
    }
    let methods = args.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    let mut bench = BenchmarkConfig::new(configs, methods, args.reps);
    bench.threads = args.threads;
    bench.propensity = match args.propensity {
        PropensityMode::Estimate => PropensitySource::Estimated,
        PropensityMode::True => PropensitySource::True,
        PropensityMode::Column => {
            return Err(XbcfError::Validation("benchmark propensity must be 'estimate' or 'true'".into()))
        }
    };
    bench.hyper = args.model.hyperparams();
    bench.bcf = BcfConfig {
        burnin: args.bcf_burnin,
        iters: args.bcf_iters,
    };
    bench.iters_per_chain = args.iters;
    let rows = run_benchmark(&bench)?;
    for r in rows.iter().filter(|r| r.failed > 0) {
        eprintln!("warning: {} / {}: {} replications failed", r.config, r.method, r.failed);
    }
    let cells: Vec<Vec<String>> = rows.iter().map(BenchmarkRow::cells).collect();
    match &args.out {
        Some(path) => write_table(path, &BenchmarkRow::HEADER, &cells),
        None => {
            let mut text = BenchmarkRow::HEADER.join(",");
            text.push('\n');
            for c in cells {
                text.push_str(&c.join(","));
                text.push('\n');
            }
            emit(None, &text)
        }
    }
}

fn cmd_subgroups(args: &SubgroupArgs) -> Result<()> {
    let table = read_table::<f64>(&args.cate, b',')?;
    let cate = find(&table, &args.cate, "cate_mean")?;
    let (names, x) = load_x(&args.data)?;
    let st = subgroup_tree(cate, &x, args.max_depth, args.min_leaf)?;
    let mut text = render_subgroups(&st, &names);
    if let Some(path) = &args.archive {
        let draws = ForestArchive::load(path)?.to_draws::<f64>()?;
        check_width(&draws, &x)?;
        let (a, b) = match args.compare.as_deref() {
            Some([a, b]) => (*a, *b),
            _ => {
                let by_mean = |g: &&xbcf::io::Subgroup<f64>| g.mean_cate;
                let hi = st.groups.iter().max_by(|p, q| by_mean(p).total_cmp(&by_mean(q)));
                let lo = st.groups.iter().min_by(|p, q| by_mean(p).total_cmp(&by_mean(q)));
                (hi.map_or(0, |g| g.leaf), lo.map_or(0, |g| g.leaf))
            }
        };
        let diff = subgroup_posterior(&draws, &x, &st.assignments, a, b)?;
        text.push_str(&format!(
            "\nsubgroup {a} minus subgroup {b}: {:.4} (95% interval {:.4} to {:.4}, {} draws)\n",
            diff.estimate.mean,
            diff.estimate.lo,
            diff.estimate.hi,
            diff.draws.len()
        ));
    }
    emit(args.out.as_deref(), &text)
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Warmstart(a) => cmd_warmstart(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Subgroups(a) => cmd_subgroups(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
