//! Maximum pseudolikelihood estimation of the inverse temperature.
//!
//! The negative log-pseudolikelihood of a sample is
//!
//! ```text
//! phi(beta) = sum_{i in F} log(2 cosh(beta m_i)) - beta m_i sigma_i
//! ```
//!
//! summed over the flippable coordinates `F`. It is convex in `beta`, with
//! `phi1 = sum m_i (tanh(beta m_i) - sigma_i)` and
//! `phi2 = sum m_i^2 / cosh^2(beta m_i)`. The estimator runs projected
//! gradient descent with unit step on `phi / n` over `[-B, B]`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cnf::SpinConfiguration;
use crate::error::{Error, Result};
use crate::model::TruncatedIsingModel;

const PHI2_GRID: usize = 1024;
const GOLDEN_TOL: f64 = 1e-12;

/// `log(2 cosh x)` without overflow.
#[inline]
pub fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Per-sample data the objective depends on: magnetizations and spins of
/// the flippable coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudolikelihoodContext {
    n: usize,
    beta_bound: f64,
    flippable: Vec<usize>,
    m: Vec<f64>,
    sigma: Vec<f64>,
}

impl PseudolikelihoodContext {
    pub fn new(model: &TruncatedIsingModel, sample: &SpinConfiguration) -> Result<Self> {
        let formula = model.formula();
        if !formula.satisfies(sample)? {
            return Err(Error::SampleNotInSupport);
        }
        let flippable = formula.flippable_set_unchecked(sample.spins());
        let graph = model.graph();
        let m = flippable
            .iter()
            .map(|&i| graph.magnetization_unchecked(sample.spins(), i))
            .collect();
        let sigma = flippable.iter().map(|&i| sample.get(i) as f64).collect();
        Ok(PseudolikelihoodContext {
            n: sample.len(),
            beta_bound: model.beta_bound(),
            flippable,
            m,
            sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta_bound(&self) -> f64 {
        self.beta_bound
    }

    pub fn flippable(&self) -> &[usize] {
        &self.flippable
    }

    /// Magnetizations of the flippable coordinates, aligned with [`Self::flippable`].
    pub fn magnetizations(&self) -> &[f64] {
        &self.m
    }

    /// True when the objective does not depend on `beta`.
    pub fn is_degenerate(&self) -> bool {
        self.m.iter().all(|&m| m == 0.0)
    }

    fn check(&self, beta: f64) -> Result<()> {
        if beta.is_nan() || beta.abs() > self.beta_bound {
            return Err(Error::BetaOutOfRange {
                beta,
                bound: self.beta_bound,
            });
        }
        Ok(())
    }

    pub fn phi(&self, beta: f64) -> Result<f64> {
        self.check(beta)?;
        Ok(self.phi_unchecked(beta))
    }

    pub fn phi1(&self, beta: f64) -> Result<f64> {
        self.check(beta)?;
        Ok(self.phi1_unchecked(beta))
    }

    pub fn phi2(&self, beta: f64) -> Result<f64> {
        self.check(beta)?;
        Ok(self.phi2_unchecked(beta))
    }

    pub(crate) fn phi_unchecked(&self, beta: f64) -> f64 {
        self.m
            .iter()
            .zip(&self.sigma)
            .map(|(&m, &s)| log_2cosh(beta * m) - beta * m * s)
            .sum()
    }

    pub(crate) fn phi1_unchecked(&self, beta: f64) -> f64 {
        self.m
            .iter()
            .zip(&self.sigma)
            .map(|(&m, &s)| m * ((beta * m).tanh() - s))
            .sum()
    }

    pub(crate) fn phi2_unchecked(&self, beta: f64) -> f64 {
        self.m
            .iter()
            .map(|&m| {
                let c = (beta * m).cosh();
                m * m / (c * c)
            })
            .sum()
    }

    /// `min phi2` over `[-B, B]`: a grid including both endpoints, refined
    /// by golden-section search between the neighbors of the best point.
    pub fn min_phi2(&self) -> f64 {
        let b = self.beta_bound;
        let step = 2.0 * b / (PHI2_GRID - 1) as f64;
        let grid = |k: usize| if k == PHI2_GRID - 1 { b } else { -b + k as f64 * step };
        let (best_k, best) = (0..PHI2_GRID)
            .map(|k| (k, self.phi2_unchecked(grid(k))))
            .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
        let lo = grid(best_k.saturating_sub(1));
        let hi = grid((best_k + 1).min(PHI2_GRID - 1));
        let refined = golden_section_min(|x| self.phi2_unchecked(x), lo, hi, GOLDEN_TOL);
        best.min(self.phi2_unchecked(refined))
    }

    /// Projected gradient descent on `phi / n` from `beta = 0` with unit
    /// step, clamping to `[-B, B]`.
    pub fn descend(&self, options: &EstimateOptions, max_degree: usize) -> PgdRun {
        let n = self.n.max(1) as f64;
        let tol = options.grad_tol.unwrap_or(1.0 / n.sqrt());
        let max_iters = options.max_iters.unwrap_or_else(|| default_max_iters(self.n, max_degree));
        let b = self.beta_bound;
        let mut beta = 0.0;
        let mut trace = vec![beta];
        let mut iterations = 0;
        let mut converged = false;
        let mut grad = self.phi1_unchecked(beta) / n;
        loop {
            if grad.abs() <= tol {
                converged = true;
                break;
            }
            if iterations >= max_iters {
                break;
            }
            let next = (beta - grad).clamp(-b, b);
            if next == beta {
                // Projected fixed point on the boundary.
                converged = true;
                break;
            }
            beta = next;
            iterations += 1;
            trace.push(beta);
            grad = self.phi1_unchecked(beta) / n;
        }
        PgdRun {
            beta_hat: beta,
            iterations,
            final_grad_norm: grad.abs(),
            converged,
            at_boundary: beta.abs() == b,
            trace,
        }
    }
}

/// Iteration cap `ceil(20 delta^3 ln(max(n, 2))) + 50`.
pub fn default_max_iters(n: usize, max_degree: usize) -> usize {
    let d = max_degree.max(1) as f64;
    (20.0 * d.powi(3) * (n.max(2) as f64).ln()).ceil() as usize + 50
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimateOptions {
    /// Iteration cap; defaults to [`default_max_iters`].
    pub max_iters: Option<usize>,
    /// Stop once `|phi1 / n|` falls to this; defaults to `1 / sqrt(n)`.
    pub grad_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdRun {
    pub beta_hat: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub converged: bool,
    pub at_boundary: bool,
    /// Every iterate, starting with `0`.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub beta_hat: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub flippable_count: usize,
    pub converged: bool,
    pub at_boundary: bool,
    /// Seconds.
    pub wall_time: f64,
}

pub fn estimate_mple(
    model: &TruncatedIsingModel,
    sample: &SpinConfiguration,
    options: &EstimateOptions,
) -> Result<EstimateReport> {
    let start = Instant::now();
    let ctx = PseudolikelihoodContext::new(model, sample)?;
    if ctx.is_degenerate() {
        return Err(Error::DegenerateObjective);
    }
    let run = ctx.descend(options, model.graph().max_degree());
    Ok(EstimateReport {
        beta_hat: run.beta_hat,
        iterations: run.iterations,
        final_grad_norm: run.final_grad_norm,
        flippable_count: ctx.flippable().len(),
        converged: run.converged,
        at_boundary: run.at_boundary,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Golden-section minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    golden_section_trace(&mut f, lo, hi, tol).0
}

fn golden_section_trace(f: &mut impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, Vec<(f64, f64)>) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut trace = Vec::new();
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    trace.push((x1, f1));
    trace.push((x2, f2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
            trace.push((x1, f1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
            trace.push((x2, f2));
        }
        if x1 >= x2 {
            break;
        }
    }
    // The endpoints are candidates too: the minimizer may sit on the boundary.
    let mid = 0.5 * (lo + hi);
    let best = [(mid, f(mid)), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((mid, f64::INFINITY), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
    (best.0, trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub beta_hat: f64,
    pub log_likelihood: f64,
    /// `(beta, log-likelihood)` at every golden-section evaluation, in order.
    pub trace: Vec<(f64, f64)>,
}

/// Exact maximum likelihood estimate by golden-section search over
/// `[-B, B]`, with the partition function from full enumeration.
pub fn mle_oracle(model: &TruncatedIsingModel, sample: &SpinConfiguration, tol: f64) -> Result<MleEstimate> {
    if !model.formula().satisfies(sample)? {
        return Err(Error::SampleNotInSupport);
    }
    let support = model.enumerate_support()?;
    let energy = model.energy(sample)?;
    let loglik = |beta: f64| 0.5 * beta * energy - support.log_partition(beta);
    let b = model.beta_bound();
    let mut neg = |beta: f64| -loglik(beta);
    let (beta_hat, trace) = golden_section_trace(&mut neg, -b, b, tol);
    Ok(MleEstimate {
        beta_hat,
        log_likelihood: loglik(beta_hat),
        trace: trace.into_iter().map(|(x, v)| (x, -v)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    /// `|phi1(beta*)|`
    pub numerator: f64,
    /// `min phi2` over `[-B, B]`
    pub denominator: f64,
    /// `numerator / denominator`, infinite when the denominator vanishes.
    pub bound: f64,
}

/// The ratio bound on `|beta_hat - beta*|` from a mean-value argument.
pub fn error_decomposition(ctx: &PseudolikelihoodContext, beta_star: f64, beta_hat: f64) -> Result<ErrorDecomposition> {
    ctx.check(beta_star)?;
    ctx.check(beta_hat)?;
    let numerator = ctx.phi1_unchecked(beta_star).abs();
    let denominator = ctx.min_phi2();
    let bound = if denominator > 0.0 {
        numerator / denominator
    } else {
        f64::INFINITY
    };
    Ok(ErrorDecomposition {
        numerator,
        denominator,
        bound,
    })
}
