//! The truncated Ising measure and its samplers.
//!
//! A configuration `sigma` in the solution set `S` of the formula has
//! weight `exp(beta * sum_{uv in E} A_uv sigma_u sigma_v)`, i.e. half of
//! the quadratic form `sigma^T A sigma` returned by [`TruncatedIsingModel::energy`].
//! With this normalization the conditional law of one spin given the rest is
//! `exp(beta m_i sigma_i) / (2 cosh(beta m_i))` on flippable coordinates.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::{CnfFormula, SpinConfiguration};
use crate::error::{Error, ParseError, Result};
use crate::graph::InteractionGraph;

pub const DEFAULT_ENUMERATION_CAP: usize = 20;
const HARD_ENUMERATION_CAP: usize = 30;

#[derive(Debug, Clone)]
pub struct TruncatedIsingModel {
    graph: InteractionGraph,
    formula: CnfFormula,
    beta_bound: f64,
    enumeration_cap: usize,
}

impl TruncatedIsingModel {
    /// Fails on mismatched sizes, a non-positive bound, or (when the
    /// instance is small enough to enumerate) an unsatisfiable formula.
    pub fn new(graph: InteractionGraph, formula: CnfFormula, beta_bound: f64) -> Result<Self> {
        Self::with_enumeration_cap(graph, formula, beta_bound, DEFAULT_ENUMERATION_CAP)
    }

    pub fn with_enumeration_cap(
        graph: InteractionGraph,
        formula: CnfFormula,
        beta_bound: f64,
        enumeration_cap: usize,
    ) -> Result<Self> {
        if graph.num_vertices() != formula.num_vars() {
            return Err(Error::SizeMismatch {
                graph: graph.num_vertices(),
                formula: formula.num_vars(),
            });
        }
        if !(beta_bound > 0.0 && beta_bound.is_finite()) {
            return Err(Error::InvalidBetaBound(beta_bound));
        }
        let model = TruncatedIsingModel {
            graph,
            formula,
            beta_bound,
            enumeration_cap: enumeration_cap.min(HARD_ENUMERATION_CAP),
        };
        if model.can_enumerate() && !model.has_solution_by_enumeration() {
            return Err(Error::EmptySupport);
        }
        Ok(model)
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }

    pub fn num_vars(&self) -> usize {
        self.formula.num_vars()
    }

    pub fn beta_bound(&self) -> f64 {
        self.beta_bound
    }

    pub fn enumeration_cap(&self) -> usize {
        self.enumeration_cap
    }

    pub fn can_enumerate(&self) -> bool {
        self.num_vars() <= self.enumeration_cap
    }

    fn has_solution_by_enumeration(&self) -> bool {
        let n = self.num_vars();
        (0..1u64 << n).any(|mask| {
            let s = SpinConfiguration::from_mask(mask, n);
            self.formula.satisfies_unchecked(s.spins())
        })
    }

    pub fn check_beta(&self, beta: f64) -> Result<()> {
        if beta.is_nan() || beta.abs() > self.beta_bound {
            return Err(Error::BetaOutOfRange {
                beta,
                bound: self.beta_bound,
            });
        }
        Ok(())
    }

    fn check_len(&self, config: &SpinConfiguration) -> Result<()> {
        if config.len() != self.num_vars() {
            return Err(Error::LengthMismatch {
                expected: self.num_vars(),
                actual: config.len(),
            });
        }
        Ok(())
    }

    /// The quadratic form `sigma^T A sigma`, counting each edge twice.
    pub fn energy(&self, config: &SpinConfiguration) -> Result<f64> {
        self.check_len(config)?;
        Ok(self.energy_unchecked(config.spins()))
    }

    fn energy_unchecked(&self, spins: &[i8]) -> f64 {
        let twice: i64 = (0..spins.len())
            .map(|i| spins[i] as i64 * self.graph.signed_field(spins, i) as i64)
            .sum();
        if self.graph.max_degree() == 0 {
            0.0
        } else {
            twice as f64 / self.graph.max_degree() as f64
        }
    }

    /// Every solution of the formula together with its energy, in
    /// increasing mask order.
    pub fn enumerate_support(&self) -> Result<Support> {
        let n = self.num_vars();
        if !self.can_enumerate() {
            return Err(Error::EnumerationCap {
                n,
                cap: self.enumeration_cap,
            });
        }
        let mut configs = Vec::new();
        let mut energies = Vec::new();
        for mask in 0..1u64 << n {
            let s = SpinConfiguration::from_mask(mask, n);
            if self.formula.satisfies_unchecked(s.spins()) {
                energies.push(self.energy_unchecked(s.spins()));
                configs.push(s);
            }
        }
        if configs.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(Support { n, configs, energies })
    }

    pub fn enumerate_exact(&self, beta: f64) -> Result<ExactDistribution> {
        self.check_beta(beta)?;
        Ok(self.enumerate_support()?.at(beta))
    }

    /// Probability that a heat-bath update of coordinate `i` moves
    /// `sigma_i` to `-sigma_i`.
    pub fn conditional_flip_probability(&self, beta: f64, config: &SpinConfiguration, i: usize) -> Result<f64> {
        self.check_beta(beta)?;
        if !self.formula.is_flippable(config, i)? {
            return Err(Error::NotFlippable(i));
        }
        let m = self.graph.magnetization_unchecked(config.spins(), i);
        Ok(flip_probability(beta, m, config.get(i)))
    }

    /// One heat-bath update at a uniformly chosen site. Unflippable sites
    /// hold.
    pub fn glauber_step<R: Rng + ?Sized>(
        &self,
        beta: f64,
        config: &SpinConfiguration,
        rng: &mut R,
    ) -> Result<SpinConfiguration> {
        self.check_beta(beta)?;
        if !self.formula.satisfies(config)? {
            return Err(Error::SampleNotInSupport);
        }
        let mut next = config.clone();
        self.glauber_update(beta, &mut next, rng);
        Ok(next)
    }

    #[inline]
    pub(crate) fn glauber_update<R: Rng + ?Sized>(&self, beta: f64, config: &mut SpinConfiguration, rng: &mut R) {
        let n = config.len();
        if n == 0 {
            return;
        }
        let i = rng.gen_range(0..n);
        let u: f64 = rng.gen();
        let spins = config.spins();
        if self.formula.flippable_unchecked(spins, i) {
            let m = self.graph.magnetization_unchecked(spins, i);
            if u < flip_probability(beta, m, spins[i]) {
                config.flip(i);
            }
        }
        debug_assert!(self.formula.satisfies_unchecked(config.spins()));
    }

    /// Runs `steps` Glauber updates from `start`.
    pub fn run_glauber<R: Rng + ?Sized>(
        &self,
        beta: f64,
        start: &SpinConfiguration,
        steps: usize,
        rng: &mut R,
    ) -> Result<SpinConfiguration> {
        self.check_beta(beta)?;
        if !self.formula.satisfies(start)? {
            return Err(Error::SampleNotInSupport);
        }
        let mut state = start.clone();
        for _ in 0..steps {
            self.glauber_update(beta, &mut state, rng);
        }
        Ok(state)
    }

    /// One exact draw. Enumerates the support on every call; use
    /// [`ExactDistribution::sample`] for repeated draws.
    pub fn sample_exact<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Result<SpinConfiguration> {
        Ok(self.enumerate_exact(beta)?.sample(rng).clone())
    }

    /// Partition of the support into components of the single-flip graph.
    /// Components are listed by their smallest mask.
    pub fn flip_graph_components(&self) -> Result<Vec<Vec<SpinConfiguration>>> {
        let support = match self.enumerate_support() {
            Ok(s) => s,
            Err(Error::EmptySupport) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let n = support.n;
        let mut index = vec![usize::MAX; 1 << n];
        for (k, s) in support.configs.iter().enumerate() {
            index[s.to_mask() as usize] = k;
        }
        let mut component = vec![usize::MAX; support.configs.len()];
        let mut out = Vec::new();
        for start in 0..support.configs.len() {
            if component[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            component[start] = id;
            let mut members = vec![start];
            let mut cursor = 0;
            while cursor < members.len() {
                let mask = support.configs[members[cursor]].to_mask();
                cursor += 1;
                for bit in 0..n {
                    let k = index[(mask ^ (1 << bit)) as usize];
                    if k != usize::MAX && component[k] == usize::MAX {
                        component[k] = id;
                        members.push(k);
                    }
                }
            }
            members.sort_unstable();
            out.push(members.into_iter().map(|k| support.configs[k].clone()).collect());
        }
        Ok(out)
    }

    /// `Pr[sigma_i is flippable]` under the model at `beta`.
    pub fn fatness_estimate<R: Rng + ?Sized>(
        &self,
        beta: f64,
        i: usize,
        method: FatnessMethod,
        rng: &mut R,
    ) -> Result<f64> {
        self.check_beta(beta)?;
        if i >= self.num_vars() {
            return Err(Error::VariableOutOfRange {
                index: i,
                num_vars: self.num_vars(),
            });
        }
        match method {
            FatnessMethod::Exact => {
                let dist = self.enumerate_exact(beta)?;
                Ok(dist
                    .support()
                    .iter()
                    .zip(dist.probabilities())
                    .filter(|(s, _)| self.formula.flippable_unchecked(s.spins(), i))
                    .map(|(_, p)| p)
                    .sum::<f64>()
                    .min(1.0))
            }
            FatnessMethod::MonteCarlo { samples } => {
                let samples = samples.max(1);
                let mut hits = 0usize;
                if self.can_enumerate() {
                    let dist = self.enumerate_exact(beta)?;
                    for _ in 0..samples {
                        if self.formula.flippable_unchecked(dist.sample(rng).spins(), i) {
                            hits += 1;
                        }
                    }
                } else {
                    let n = self.num_vars();
                    let start = random_solution(&self.formula, DEFAULT_SOLUTION_TRIES, rng)?;
                    let mut state = self.run_glauber(beta, &start, default_burn_in(n), rng)?;
                    for _ in 0..samples {
                        for _ in 0..n {
                            self.glauber_update(beta, &mut state, rng);
                        }
                        if self.formula.flippable_unchecked(state.spins(), i) {
                            hits += 1;
                        }
                    }
                }
                Ok(hits as f64 / samples as f64)
            }
        }
    }

    /// Draws one configuration with the requested sampler.
    pub fn draw<R: Rng + ?Sized>(&self, beta: f64, sampler: &SamplerKind, rng: &mut R) -> Result<SpinConfiguration> {
        match *sampler {
            SamplerKind::Exact => self.sample_exact(beta, rng),
            SamplerKind::Glauber { steps, burn_in } => {
                let start = random_solution(&self.formula, DEFAULT_SOLUTION_TRIES, rng)?;
                let burn = burn_in.unwrap_or_else(|| default_burn_in(self.num_vars()));
                self.run_glauber(beta, &start, burn + steps, rng)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FatnessMethod {
    Exact,
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplerKind {
    Exact,
    /// Heat-bath chain started from a uniformly random solution; runs
    /// `burn_in` (default `ceil(100 n ln n)`) plus `steps` updates.
    Glauber {
        #[serde(default)]
        steps: usize,
        #[serde(default)]
        burn_in: Option<usize>,
    },
}

impl SamplerKind {
    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::Exact => "exact",
            SamplerKind::Glauber { .. } => "glauber",
        }
    }
}

/// `ceil(100 n ln n)`, at least 100. A heuristic: the chain need not mix
/// when the solution set is disconnected under single flips.
pub fn default_burn_in(n: usize) -> usize {
    let n = n.max(2) as f64;
    (100.0 * n * n.ln()).ceil() as usize
}

/// `Pr[sigma_i -> -sigma_i]` for a heat-bath update with field `m`.
#[inline]
pub fn flip_probability(beta: f64, m: f64, spin: i8) -> f64 {
    1.0 / (1.0 + (2.0 * spin as f64 * beta * m).exp())
}

pub const DEFAULT_SOLUTION_TRIES: usize = 100_000;

/// Uniformly random solution by rejection from uniform assignments.
pub fn random_solution<R: Rng + ?Sized>(
    formula: &CnfFormula,
    max_tries: usize,
    rng: &mut R,
) -> Result<SpinConfiguration> {
    let n = formula.num_vars();
    let mut spins = vec![1i8; n];
    for _ in 0..max_tries {
        for s in spins.iter_mut() {
            *s = if rng.gen::<bool>() { 1 } else { -1 };
        }
        if formula.satisfies_unchecked(&spins) {
            return SpinConfiguration::new(spins);
        }
    }
    Err(Error::RetryLimit(max_tries))
}

/// Solutions of a formula with their energies, independent of `beta`.
#[derive(Debug, Clone)]
pub struct Support {
    n: usize,
    configs: Vec<SpinConfiguration>,
    energies: Vec<f64>,
}

impl Support {
    pub fn configs(&self) -> &[SpinConfiguration] {
        &self.configs
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// `log Z(beta)` by log-sum-exp over the support.
    pub fn log_partition(&self, beta: f64) -> f64 {
        log_sum_exp(self.energies.iter().map(|&e| 0.5 * beta * e))
    }

    pub fn at(&self, beta: f64) -> ExactDistribution {
        let log_weights: Vec<f64> = self.energies.iter().map(|&e| 0.5 * beta * e).collect();
        let log_z = log_sum_exp(log_weights.iter().copied());
        let mut cdf = Vec::with_capacity(log_weights.len());
        let mut acc = 0.0;
        for &w in &log_weights {
            acc += (w - log_z).exp();
            cdf.push(acc);
        }
        ExactDistribution {
            support: self.configs.clone(),
            log_weights,
            log_z,
            cdf,
        }
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct ExactDistribution {
    support: Vec<SpinConfiguration>,
    log_weights: Vec<f64>,
    log_z: f64,
    cdf: Vec<f64>,
}

impl ExactDistribution {
    pub fn support(&self) -> &[SpinConfiguration] {
        &self.support
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_weights.iter().map(move |&w| (w - self.log_z).exp())
    }

    pub fn probability_of(&self, config: &SpinConfiguration) -> f64 {
        match self.support.binary_search_by_key(&config.to_mask(), SpinConfiguration::to_mask) {
            Ok(k) => (self.log_weights[k] - self.log_z).exp(),
            Err(_) => 0.0,
        }
    }

    pub fn index_of(&self, config: &SpinConfiguration) -> Option<usize> {
        self.support
            .binary_search_by_key(&config.to_mask(), SpinConfiguration::to_mask)
            .ok()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &SpinConfiguration {
        let total = *self.cdf.last().expect("support is never empty");
        let u = rng.gen::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= u).min(self.support.len() - 1);
        &self.support[k]
    }
}

/// Parses a sample file: one configuration per line, spins as `-1`/`1`
/// (or `+1`) separated by whitespace. Blank lines and `#` comments are
/// skipped; all rows must have the same length.
pub fn parse_samples(text: &str) -> Result<Vec<SpinConfiguration>, ParseError> {
    let mut out: Vec<SpinConfiguration> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let spins = line
            .split_whitespace()
            .map(|tok| match tok {
                "1" | "+1" => Ok(1i8),
                "-1" => Ok(-1i8),
                other => Err(ParseError::new(line_no, format!("bad spin `{other}`"))),
            })
            .collect::<Result<Vec<i8>, _>>()?;
        if let Some(first) = out.first() {
            if first.len() != spins.len() {
                return Err(ParseError::new(
                    line_no,
                    format!("row has {} spins, expected {}", spins.len(), first.len()),
                ));
            }
        }
        out.push(SpinConfiguration::new(spins).map_err(|e| ParseError::new(line_no, e))?);
    }
    Ok(out)
}

pub fn format_samples(samples: &[SpinConfiguration]) -> String {
    let mut out = String::new();
    for s in samples {
        let _ = writeln!(out, "{s}");
    }
    out
}
