//! Trial orchestration, run configuration and result persistence.
//!
//! Trial `t` draws from `ChaCha8Rng::seed_from_u64(seed ^ t)` on stream 1;
//! random instances come from `seed` on stream 0. Records are sorted by
//! trial id, so output does not depend on the worker count.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnf::{CnfFormula, Literal};
use crate::error::{Error, Result};
use crate::graph::{generate_regular_signed_graph, parse_graph};
use crate::model::{ExactDistribution, SamplerKind, TruncatedIsingModel, DEFAULT_ENUMERATION_CAP};
use crate::mple::{EstimateOptions, PseudolikelihoodContext};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "TRUNC_ISING_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    File(PathBuf),
    Generator { n: usize, delta: usize, sign_bias: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FormulaSource {
    Empty,
    File(PathBuf),
    Generator { k: usize, d: usize },
}

fn default_formula_source() -> FormulaSource {
    FormulaSource::Empty
}

/// A batch of independent estimation trials on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph_source: GraphSource,
    #[serde(default = "default_formula_source")]
    pub formula_source: FormulaSource,
    pub beta_star: f64,
    #[serde(rename = "B")]
    pub beta_bound: f64,
    pub trials: usize,
    pub seed: u64,
    /// `None` picks the exact sampler when `n` is within the enumeration
    /// cap and a default Glauber chain otherwise.
    #[serde(default)]
    pub sampler: Option<SamplerKind>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    /// Record wall-clock time per trial. Off by default since timings make
    /// output non-reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_bound > 0.0 && self.beta_bound.is_finite()) {
            return Err(Error::InvalidBetaBound(self.beta_bound));
        }
        if self.beta_star.is_nan() || self.beta_star.abs() >= self.beta_bound {
            return Err(Error::BetaOutOfRange { beta: self.beta_star, bound: self.beta_bound });
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let GraphSource::Generator { n, delta, sign_bias } = self.graph_source {
            if n == 0 || !(n * delta).is_multiple_of(2) || (delta >= n && !(n == 1 && delta == 0)) {
                return Err(Error::Config(format!("no {delta}-regular graph on {n} vertices")));
            }
            if !(0.0..=1.0).contains(&sign_bias) {
                return Err(Error::Config(format!("sign_bias {sign_bias} not in [0, 1]")));
            }
            if let FormulaSource::Generator { k, d } = self.formula_source {
                if k == 0 || d == 0 || k > n {
                    return Err(Error::Config(format!("cannot generate width-{k} degree-{d} clauses on {n} variables")));
                }
            }
        }
        Ok(())
    }

    /// Same configuration with the generated graph resized to `n`.
    pub fn with_size(&self, n: usize) -> Result<Self> {
        match self.graph_source {
            GraphSource::Generator { delta, sign_bias, .. } => {
                let mut c = self.clone();
                c.graph_source = GraphSource::Generator { n, delta, sign_bias };
                Ok(c)
            }
            GraphSource::File(_) => Err(Error::Config("size sweeps need a generated graph".into())),
        }
    }

    /// Builds the instance: files are read, generators draw from stream 0
    /// of `seed`.
    pub fn build_model(&self) -> Result<TruncatedIsingModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let graph = match &self.graph_source {
            GraphSource::File(path) => parse_graph(&read(path)?)?,
            GraphSource::Generator { n, delta, sign_bias } => {
                generate_regular_signed_graph(*n, *delta, *sign_bias, &mut rng)?
            }
        };
        let n = graph.num_vertices();
        let formula = match &self.formula_source {
            FormulaSource::Empty => CnfFormula::empty(n),
            FormulaSource::File(path) => crate::cnf::parse_dimacs(&read(path)?)?,
            FormulaSource::Generator { k, d } => generate_regime_formula(n, *k, *d, &mut rng)?,
        };
        TruncatedIsingModel::new(graph, formula, self.beta_bound)
    }

    pub fn resolved_sampler(&self, n: usize) -> SamplerKind {
        self.sampler.unwrap_or(if n <= DEFAULT_ENUMERATION_CAP {
            SamplerKind::Exact
        } else {
            SamplerKind::Glauber { steps: 0, burn_in: None }
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub n: usize,
    pub delta: usize,
    pub k: usize,
    pub d: usize,
    pub beta_star: f64,
    pub beta_hat: f64,
    pub abs_error: f64,
    pub flippable_count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub sampler_kind: String,
    pub wall_time: f64,
    /// No coordinate of the sample was flippable; `beta_hat` is left at 0.
    pub degenerate: bool,
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}

pub fn trial_rng(seed: u64, trial_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ trial_id);
    rng.set_stream(1);
    rng
}

pub fn run_trials(config: &RunConfig) -> Result<Vec<TrialRecord>> {
    run_trials_with_threads(config, threads_from_env())
}

/// Runs the trials on a pool of `threads` workers (rayon's default when
/// `None`).
pub fn run_trials_with_threads(config: &RunConfig, threads: Option<usize>) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let model = config.build_model()?;
    let sampler = config.resolved_sampler(model.num_vars());
    let exact = match sampler {
        SamplerKind::Exact => Some(model.enumerate_exact(config.beta_star)?),
        SamplerKind::Glauber { .. } => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let mut records = pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|t| run_one(config, &model, &sampler, exact.as_ref(), t))
            .collect::<Result<Vec<_>>>()
    })?;
    records.sort_by_key(|r| r.trial_id);
    Ok(records)
}

fn run_one(
    config: &RunConfig,
    model: &TruncatedIsingModel,
    sampler: &SamplerKind,
    exact: Option<&ExactDistribution>,
    trial_id: u64,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let mut rng = trial_rng(config.seed, trial_id);
    let sample = match exact {
        Some(dist) => dist.sample(&mut rng).clone(),
        None => model.draw(config.beta_star, sampler, &mut rng)?,
    };
    let ctx = PseudolikelihoodContext::new(model, &sample)?;
    let stats = model.formula().stats();
    let options = EstimateOptions { max_iters: config.max_iters, grad_tol: config.grad_tol };
    let degenerate = ctx.is_degenerate();
    let (beta_hat, iterations, converged) = if degenerate {
        (0.0, 0, false)
    } else {
        let run = ctx.descend(&options, model.graph().max_degree());
        (run.beta_hat, run.iterations, run.converged)
    };
    Ok(TrialRecord {
        trial_id,
        n: model.num_vars(),
        delta: model.graph().max_degree(),
        k: stats.k_min,
        d: stats.d_max,
        beta_star: config.beta_star,
        beta_hat,
        abs_error: (beta_hat - config.beta_star).abs(),
        flippable_count: ctx.flippable().len(),
        iterations,
        converged,
        sampler_kind: sampler.label().to_string(),
        wall_time: if config.timing { start.elapsed().as_secs_f64() } else { 0.0 },
        degenerate,
    })
}

/// Per-size aggregate of a sweep. Degenerate trials are excluded from the
/// error statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub trials: usize,
    pub degenerate: usize,
    pub median_abs_error: f64,
    pub p90_abs_error: f64,
    /// `median_abs_error * sqrt(n) / delta^3`: the smallest constant for
    /// which half the trials sit inside the `c delta^3 / sqrt(n)` envelope.
    pub envelope_c_median: f64,
    /// Same for the 90th percentile.
    pub envelope_c_p90: f64,
    pub median_wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln(median_abs_error)` against `ln(n)`;
    /// absent with fewer than two usable sizes.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub summary: SweepSummary,
    pub records: Vec<TrialRecord>,
}

/// Median (mean of the middle pair for even counts). `NaN` when empty.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    match m {
        0 => f64::NAN,
        _ if m % 2 == 1 => v[m / 2],
        _ => (v[m / 2 - 1] + v[m / 2]) / 2.0,
    }
}

/// Nearest-rank quantile. `NaN` when empty.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let rank = (q * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// Least-squares slope of `y` on `x`; `None` if fewer than two points or
/// all `x` equal.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn summarize(records: &[TrialRecord]) -> Option<SweepRow> {
    let first = records.first()?;
    let ok: Vec<f64> = records.iter().filter(|r| !r.degenerate).map(|r| r.abs_error).collect();
    let med = median(&ok);
    let p90 = quantile(&ok, 0.9);
    let scale = (first.n as f64).sqrt() / (first.delta.max(1) as f64).powi(3);
    let times: Vec<f64> = records.iter().map(|r| r.wall_time).collect();
    Some(SweepRow {
        n: first.n,
        trials: records.len(),
        degenerate: records.len() - ok.len(),
        median_abs_error: med,
        p90_abs_error: p90,
        envelope_c_median: med * scale,
        envelope_c_p90: p90 * scale,
        median_wall_time: median(&times),
    })
}

/// Runs `trials_per_size` trials at each size and fits the decay rate of
/// the median error.
pub fn consistency_sweep(base: &RunConfig, sizes: &[usize], trials_per_size: usize) -> Result<SweepResult> {
    consistency_sweep_with_threads(base, sizes, trials_per_size, threads_from_env())
}

pub fn consistency_sweep_with_threads(
    base: &RunConfig,
    sizes: &[usize],
    trials_per_size: usize,
    threads: Option<usize>,
) -> Result<SweepResult> {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &n in sizes {
        let mut config = base.with_size(n)?;
        config.trials = trials_per_size;
        let batch = run_trials_with_threads(&config, threads)?;
        rows.extend(summarize(&batch));
        records.extend(batch);
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.median_abs_error > 0.0 && r.median_abs_error.is_finite())
        .map(|r| ((r.n as f64).ln(), r.median_abs_error.ln()))
        .collect();
    Ok(SweepResult { summary: SweepSummary { slope: least_squares_slope(&points), rows }, records })
}

/// Random formula with `floor(n d / k)` width-`k` clauses, stopping early
/// once fewer than `k` variables have spare occurrences. Each clause picks
/// `k` distinct variables uniformly among those appearing in fewer than
/// `d` clauses so far, with uniform polarities.
pub fn generate_regime_formula<R: Rng + ?Sized>(n: usize, k: usize, d: usize, rng: &mut R) -> Result<CnfFormula> {
    if k == 0 || d == 0 || k > n || d * n < k {
        return Err(Error::Infeasible(format!(
            "no width-{k} clause fits {n} variables with degree cap {d}"
        )));
    }
    let target = n * d / k;
    let mut load = vec![0usize; n];
    let mut clauses = Vec::with_capacity(target);
    for _ in 0..target {
        let open: Vec<usize> = (0..n).filter(|&v| load[v] < d).collect();
        if open.len() < k {
            break;
        }
        let clause = index::sample(rng, open.len(), k)
            .into_iter()
            .map(|i| {
                let v = open[i];
                load[v] += 1;
                if rng.gen::<bool>() {
                    Literal::positive(v)
                } else {
                    Literal::negative(v)
                }
            })
            .collect();
        clauses.push(clause);
    }
    CnfFormula::new(n, clauses)
}

/// Writes records as CSV with a header row, also when empty.
pub fn write_trials_csv<W: io::Write>(writer: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record([
            "trial_id",
            "n",
            "delta",
            "k",
            "d",
            "beta_star",
            "beta_hat",
            "abs_error",
            "flippable_count",
            "iterations",
            "converged",
            "sampler_kind",
            "wall_time",
            "degenerate",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: io::Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_sweep_csv<W: io::Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
