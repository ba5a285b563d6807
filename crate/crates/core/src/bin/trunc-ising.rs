use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use trunc_ising::cnf::{parse_dimacs, CnfFormula};
use trunc_ising::diagnostics::{self, ResultRow};
use trunc_ising::graph::{self, parse_graph, CoverageSearch, Permutation};
use trunc_ising::harness::{self, FormulaSource, GraphSource, RunConfig};
use trunc_ising::model::{self, SamplerKind, TruncatedIsingModel, DEFAULT_ENUMERATION_CAP};
use trunc_ising::mple::{self, EstimateOptions, PseudolikelihoodContext};
use trunc_ising::{Error, SpinConfiguration};

#[derive(Parser)]
#[command(name = "trunc-ising", version, about = "Inverse temperature estimation for SAT-truncated Ising models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the clause-width regime conditions as JSON.
    Check(CheckArgs),
    /// Draw configurations from the model.
    Sample(SampleArgs),
    /// Estimate beta from a single configuration.
    Estimate(EstimateArgs),
    /// Compare the estimate with the exact likelihood maximizer.
    Oracle(OracleArgs),
    /// Run the empirical lemma checks and write CSV.
    Diagnose(DiagnoseArgs),
    /// Run estimation trials or a size sweep.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Instance {
    /// Edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// DIMACS CNF file; omitted means no clauses.
    #[arg(long)]
    cnf: Option<PathBuf>,
    /// Bound B on |beta|.
    #[arg(long = "B", default_value_t = 1.0)]
    beta_bound: f64,
    /// Largest n for which exact enumeration is allowed.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    enumeration_cap: usize,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    instance: Instance,
    /// Failure probability used for the conditional-Hessian constants.
    #[arg(long, default_value_t = 0.1)]
    delta_prob: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerChoice {
    Exact,
    Glauber,
}

#[derive(Args)]
struct SamplerArgs {
    /// Defaults to exact within the enumeration cap, Glauber otherwise.
    #[arg(long, value_enum)]
    sampler: Option<SamplerChoice>,
    /// Glauber updates after burn-in.
    #[arg(long, default_value_t = 0)]
    steps: usize,
    /// Glauber burn-in; defaults to ceil(100 n ln n).
    #[arg(long)]
    burn_in: Option<usize>,
}

impl SamplerArgs {
    fn kind(&self) -> Option<SamplerKind> {
        self.sampler.map(|s| match s {
            SamplerChoice::Exact => SamplerKind::Exact,
            SamplerChoice::Glauber => SamplerKind::Glauber { steps: self.steps, burn_in: self.burn_in },
        })
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of configurations.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    instance: Instance,
    /// File holding one configuration.
    #[arg(long)]
    sample: PathBuf,
    /// Gradient threshold replacing 1/sqrt(n).
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Report elapsed time instead of 0.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Golden-section tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Phi1,
    Hessian,
    Sj,
    Conditional,
    Flippable,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Failure probability for the concentration check.
    #[arg(long, default_value_t = 0.1)]
    delta_prob: f64,
    /// Coverage fraction for the marked set; defaults to 1/(4 delta^3).
    #[arg(long)]
    lambda: Option<f64>,
    /// Permutations tried when searching for the marked set.
    #[arg(long, default_value_t = 1000)]
    max_tries: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [CheckKind::Phi1, CheckKind::Hessian, CheckKind::Sj, CheckKind::Conditional, CheckKind::Flippable])]
    checks: Vec<CheckKind>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["n", "delta", "sign_bias"])]
    graph: Option<PathBuf>,
    /// Vertices of the generated regular graph.
    #[arg(long)]
    n: Option<usize>,
    /// Degree of the generated regular graph [default: 3].
    #[arg(long)]
    delta: Option<usize>,
    /// Probability that a generated edge is positive [default: 1].
    #[arg(long)]
    sign_bias: Option<f64>,
    #[arg(long, conflicts_with_all = ["k", "d"])]
    cnf: Option<PathBuf>,
    /// Clause width of the generated formula.
    #[arg(long, requires = "d")]
    k: Option<usize>,
    /// Variable degree cap of the generated formula.
    #[arg(long, requires = "k")]
    d: Option<usize>,
    /// True inverse temperature [default: 0.5].
    #[arg(long)]
    beta: Option<f64>,
    /// [default: 1]
    #[arg(long = "B")]
    beta_bound: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per size [default: 10].
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Comma-separated sizes for a sweep.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Record per-trial wall time, making output non-reproducible.
    #[arg(long)]
    timing: bool,
    /// Output directory; trials CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Failure::Usage(e.to_string()),
            e => Failure::Model(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Model(e.into())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_model(instance: &Instance) -> CliResult<TruncatedIsingModel> {
    let graph = parse_graph(&read_file(&instance.graph)?).map_err(Error::from)?;
    let formula = match &instance.cnf {
        Some(path) => parse_dimacs(&read_file(path)?).map_err(Error::from)?,
        None => CnfFormula::empty(graph.num_vertices()),
    };
    Ok(TruncatedIsingModel::with_enumeration_cap(
        graph,
        formula,
        instance.beta_bound,
        instance.enumeration_cap,
    )?)
}

fn load_single_sample(path: &Path) -> CliResult<SpinConfiguration> {
    let mut samples = model::parse_samples(&read_file(path)?).map_err(Error::from)?;
    if samples.len() != 1 {
        return Err(Failure::Model(Error::Config(format!(
            "{} holds {} configurations, expected 1",
            path.display(),
            samples.len()
        ))));
    }
    Ok(samples.remove(0))
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn warn_glauber(model: &TruncatedIsingModel) {
    eprintln!(
        "warning: Glauber sampling on {} variables; the chain may not mix when the solution set is disconnected under single flips",
        model.num_vars()
    );
}

#[derive(Serialize)]
struct CheckReport {
    #[serde(flatten)]
    regime: diagnostics::RegimeReport,
    n: usize,
    conditional_hessian_statement: f64,
    conditional_hessian_proof: f64,
}

fn check(args: CheckArgs) -> CliResult {
    let model = load_model(&args.instance)?;
    let regime = diagnostics::check_regime(model.formula(), model.graph(), model.beta_bound());
    let (statement, proof) = diagnostics::conditional_hessian_constants(
        model.num_vars(),
        regime.k_min,
        regime.d,
        regime.delta,
        regime.beta_bound,
        args.delta_prob,
    );
    print_json(&CheckReport {
        regime,
        n: model.num_vars(),
        conditional_hessian_statement: statement,
        conditional_hessian_proof: proof,
    })
}

fn sample(args: SampleArgs) -> CliResult {
    let model = load_model(&args.instance)?;
    model.check_beta(args.beta)?;
    let kind = args.sampler.kind().unwrap_or(if model.can_enumerate() {
        SamplerKind::Exact
    } else {
        SamplerKind::Glauber { steps: args.sampler.steps, burn_in: args.sampler.burn_in }
    });
    let samples: Vec<SpinConfiguration> = match kind {
        SamplerKind::Exact => {
            let dist = model.enumerate_exact(args.beta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            (0..args.trials).map(|_| dist.sample(&mut rng).clone()).collect()
        }
        SamplerKind::Glauber { .. } => {
            warn_glauber(&model);
            (0..args.trials as u64)
                .map(|t| model.draw(args.beta, &kind, &mut harness::trial_rng(args.seed, t)))
                .collect::<Result<_, _>>()?
        }
    };
    let mut out = output(args.out.as_deref())?;
    out.write_all(model::format_samples(&samples).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn estimate(args: EstimateArgs) -> CliResult {
    let model = load_model(&args.instance)?;
    let sigma = load_single_sample(&args.sample)?;
    let options = EstimateOptions { max_iters: args.max_iters, grad_tol: args.grad_tol };
    let mut report = mple::estimate_mple(&model, &sigma, &options)?;
    if !args.timing {
        report.wall_time = 0.0;
    }
    print_json(&report)
}

#[derive(Serialize)]
struct OracleReport {
    mple_beta_hat: f64,
    mple_converged: bool,
    mple_iterations: usize,
    pseudolikelihood_minimizer: f64,
    mle_beta_hat: f64,
    mle_log_likelihood: f64,
    mple_mle_difference: f64,
}

fn oracle(args: OracleArgs) -> CliResult {
    let model = load_model(&args.instance)?;
    let sigma = load_single_sample(&args.sample)?;
    let options = EstimateOptions { max_iters: args.max_iters, grad_tol: args.grad_tol };
    let report = mple::estimate_mple(&model, &sigma, &options)?;
    let ctx = PseudolikelihoodContext::new(&model, &sigma)?;
    let b = model.beta_bound();
    let n = model.num_vars() as f64;
    let pl_min = mple::golden_section_min(|x| ctx.phi(x).unwrap_or(f64::INFINITY) / n, -b, b, args.tol);
    let mle = mple::mle_oracle(&model, &sigma, args.tol)?;
    print_json(&OracleReport {
        mple_beta_hat: report.beta_hat,
        mple_converged: report.converged,
        mple_iterations: report.iterations,
        pseudolikelihood_minimizer: pl_min,
        mle_beta_hat: mle.beta_hat,
        mle_log_likelihood: mle.log_likelihood,
        mple_mle_difference: (report.beta_hat - mle.beta_hat).abs(),
    })
}

fn diagnose(args: DiagnoseArgs) -> CliResult {
    let model = load_model(&args.instance)?;
    model.check_beta(args.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let g = model.graph();
    let delta = g.max_degree().max(1) as f64;
    let lambda = args.lambda.unwrap_or(1.0 / (4.0 * delta.powi(3)));
    let marked = match graph::search_covering_independent_set(g, model.formula(), lambda, args.max_tries, &mut rng)? {
        CoverageSearch::Found { set, .. } => set,
        CoverageSearch::Exhausted { .. } => {
            eprintln!("warning: no marked set reached coverage {lambda}; using one random ordering");
            graph::ind_edge_set(g, &Permutation::random(model.num_vars(), &mut rng))
        }
    };
    let mut rows = Vec::new();
    for check in &args.checks {
        let result = match check {
            CheckKind::Phi1 => {
                diagnostics::check_phi1_concentration(&model, args.beta, args.delta_prob, args.trials, &mut rng)?
            }
            CheckKind::Hessian => diagnostics::check_hessian_floor(&model, args.beta, args.trials, &mut rng)?,
            CheckKind::Sj => {
                let sj = diagnostics::check_sj_probability(&model, args.beta, &marked, args.trials, &mut rng)?;
                if !sj.failing.is_empty() {
                    eprintln!("s_j below 1/2 at variables {:?} (1-based)", sj.failing.iter().map(|j| j + 1).collect::<Vec<_>>());
                }
                sj.result
            }
            CheckKind::Conditional => {
                let pairs: Vec<(usize, usize)> = g.edges().flat_map(|(u, v, _)| [(u, v), (v, u)]).collect();
                diagnostics::check_conditional_magnetization(&model, args.beta, &pairs)?
            }
            CheckKind::Flippable => {
                let all: Vec<usize> = (0..model.num_vars()).collect();
                let r = graph::greedy_2hop_disjoint(g, model.formula(), &all);
                diagnostics::check_flippable_fraction(&model, args.beta, &r, args.trials, &mut rng)?
            }
        };
        rows.push(ResultRow::new(&model, args.beta, &result));
    }
    diagnostics::write_results_csv(output(args.out.as_deref())?, &rows)?;
    Ok(())
}

fn experiment_config(args: &ExperimentArgs) -> CliResult<RunConfig> {
    let mut config = match &args.config {
        Some(path) => serde_json::from_str::<RunConfig>(&read_file(path)?)
            .map_err(|e| Failure::Usage(format!("malformed config {}: {e}", path.display())))?,
        None => RunConfig {
            graph_source: GraphSource::Generator { n: 64, delta: 3, sign_bias: 1.0 },
            formula_source: FormulaSource::Empty,
            beta_star: 0.5,
            beta_bound: 1.0,
            trials: 10,
            seed: 0,
            sampler: None,
            outputs: None,
            grad_tol: None,
            max_iters: None,
            timing: false,
        },
    };
    if let Some(path) = &args.graph {
        config.graph_source = GraphSource::File(path.clone());
    } else if args.n.is_some() || args.delta.is_some() || args.sign_bias.is_some() {
        let (n0, d0, s0) = match config.graph_source {
            GraphSource::Generator { n, delta, sign_bias } => (n, delta, sign_bias),
            GraphSource::File(_) => (64, 3, 1.0),
        };
        config.graph_source = GraphSource::Generator {
            n: args.n.unwrap_or(n0),
            delta: args.delta.unwrap_or(d0),
            sign_bias: args.sign_bias.unwrap_or(s0),
        };
    }
    if let Some(path) = &args.cnf {
        config.formula_source = FormulaSource::File(path.clone());
    } else if let (Some(k), Some(d)) = (args.k, args.d) {
        config.formula_source = FormulaSource::Generator { k, d };
    }
    if let Some(v) = args.beta {
        config.beta_star = v;
    }
    if let Some(v) = args.beta_bound {
        config.beta_bound = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.trials {
        config.trials = v;
    }
    if let Some(kind) = args.sampler.kind() {
        config.sampler = Some(kind);
    }
    if args.grad_tol.is_some() {
        config.grad_tol = args.grad_tol;
    }
    if args.max_iters.is_some() {
        config.max_iters = args.max_iters;
    }
    if args.out.is_some() {
        config.outputs = args.out.clone();
    }
    config.timing |= args.timing;
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if !args.sizes.is_empty() {
        for &n in &args.sizes {
            config.with_size(n)?.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    Ok(config)
}

fn experiment(args: ExperimentArgs) -> CliResult {
    let config = experiment_config(&args)?;
    let (records, summary) = if args.sizes.is_empty() {
        let records = harness::run_trials(&config)?;
        let rows: Vec<_> = harness::summarize(&records).into_iter().collect();
        (records, harness::SweepSummary { rows, slope: None })
    } else {
        let sweep = harness::consistency_sweep(&config, &args.sizes, config.trials)?;
        (sweep.records, sweep.summary)
    };
    if records.iter().any(|r| r.sampler_kind == "glauber") {
        eprintln!("note: Glauber samples use the default burn-in unless --burn-in is given; the chain may not mix");
    }
    match &config.outputs {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            harness::write_trials_csv(io::BufWriter::new(fs::File::create(dir.join("trials.csv"))?), &records)?;
            harness::write_sweep_csv(io::BufWriter::new(fs::File::create(dir.join("sweep.csv"))?), &summary.rows)?;
            let mut f = io::BufWriter::new(fs::File::create(dir.join("summary.json"))?);
            serde_json::to_writer_pretty(&mut f, &summary).map_err(Error::from)?;
            writeln!(f)?;
            f.flush()?;
        }
        None => {
            harness::write_trials_csv(io::stdout().lock(), &records)?;
            let mut err = io::stderr().lock();
            serde_json::to_writer(&mut err, &summary).map_err(Error::from)?;
            writeln!(err)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Check(a) => check(a),
        Command::Sample(a) => sample(a),
        Command::Estimate(a) => estimate(a),
        Command::Oracle(a) => oracle(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
