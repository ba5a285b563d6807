//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

mod common;

use std::collections::VecDeque;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use trunc_ising::cnf::{parse_dimacs, SpinConfiguration};
use trunc_ising::diagnostics::{check_phi1_concentration, check_regime};
use trunc_ising::graph::{generate_regular_signed_graph, ind_edge_set, InteractionGraph, Permutation};
use trunc_ising::harness::{consistency_sweep, generate_regime_formula, FormulaSource, GraphSource, RunConfig};
use trunc_ising::model::{default_burn_in, FatnessMethod, SamplerKind, TruncatedIsingModel};
use trunc_ising::mple::{error_decomposition, estimate_mple, golden_section_min, EstimateOptions, PseudolikelihoodContext};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Instance with a solution to evaluate at: sparse random graph, random
/// planted clauses.
fn derivative_instance(rng: &mut ChaCha8Rng) -> (TruncatedIsingModel, SpinConfiguration) {
    let n = rng.gen_range(2..=64);
    let inst = random_instance(rng.gen(), n, 3.0 / n as f64, rng.gen_range(0..=n / 2), 4, rng.gen_range(0.2..3.0));
    let sigma = SpinConfiguration::new(inst.planted.clone()).unwrap();
    (inst.model(), sigma)
}

fn derivative_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (model, sigma) = derivative_instance(&mut rng);
        let ctx = PseudolikelihoodContext::new(&model, &sigma).unwrap();
        let b = model.beta_bound();
        for _ in 0..5 {
            let beta = rng.gen_range(-b + h..b - h);
            let fd1 = (ctx.phi(beta + h).unwrap() - ctx.phi(beta - h).unwrap()) / (2.0 * h);
            let fd2 = (ctx.phi1(beta + h).unwrap() - ctx.phi1(beta - h).unwrap()) / (2.0 * h);
            worst1 = worst1.max(rel_err(ctx.phi1(beta).unwrap(), fd1));
            worst2 = worst2.max(rel_err(ctx.phi2(beta).unwrap(), fd2));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst1 <= 1e-6 && worst2 <= 1e-6 && secs < 10.0,
        format!("200 instances, max rel err phi1 {worst1:.2e}, phi2 {worst2:.2e}, {secs:.2} s"),
    )
}

fn convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut evaluations = 0;
    for _ in 0..1000 {
        let (model, sigma) = derivative_instance(&mut rng);
        let ctx = PseudolikelihoodContext::new(&model, &sigma).unwrap();
        let b = model.beta_bound();
        for _ in 0..100 {
            let beta = rng.gen_range(-b..=b);
            evaluations += 1;
            let curvature = ctx.phi2(beta).unwrap();
            if curvature.is_nan() || curvature < 0.0 {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{evaluations} evaluations, {violations} violations"))
}

fn flippability_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut checked = 0usize;
    for _ in 0..40 {
        let n = rng.gen_range(4..=12);
        let inst = random_instance(rng.gen(), n, 0.3, rng.gen_range(1..=2 * n), 4, 1.0);
        let formula = inst.formula();
        for mask in 0..1u64 << n {
            let s = spins_of(mask, n);
            if !brute_satisfies(&inst.clauses, &s) {
                continue;
            }
            let sigma = SpinConfiguration::new(s.clone()).unwrap();
            for i in 0..n {
                checked += 1;
                if formula.is_flippable(&sigma, i).unwrap() != brute_flippable(&inst.clauses, &s, i) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} (sigma, i) pairs over 40 formulas, {mismatches} mismatches"))
}

/// Pearson statistic after merging adjacent cells until each expected
/// count reaches 5. Returns `(statistic, degrees of freedom)`.
fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, usize) {
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &ex) in observed.iter().zip(expected) {
        o += ob as f64;
        e += ex;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let stat = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, cells.len().saturating_sub(1))
}

fn exact_sampler_fidelity() -> Outcome {
    let draws = 100_000;
    let mut details = Vec::new();
    let mut passed = true;
    for seed in 0..3u64 {
        let inst = random_instance(40 + seed, 8, 0.5, 4, 3, 1.5);
        let model = inst.model();
        let dist = model.enumerate_exact(1.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; dist.support().len()];
        for _ in 0..draws {
            counts[dist.index_of(dist.sample(&mut rng)).unwrap()] += 1;
        }
        let expected: Vec<f64> = dist.probabilities().map(|p| p * draws as f64).collect();
        let (stat, dof) = chi_square(&counts, &expected);
        let p = if dof == 0 { 1.0 } else { 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat) };
        passed &= p >= 0.01;
        details.push(format!("|S|={} p={p:.3}", counts.len()));
    }
    outcome(passed, format!("3 instances x 1e5 draws: {}", details.join(", ")))
}

fn detailed_balance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut edges = 0usize;
    for _ in 0..30 {
        let n = rng.gen_range(2..=10);
        let inst = random_instance(rng.gen(), n, 0.5, rng.gen_range(0..=n), 3, 2.0);
        let model = inst.model();
        let beta = rng.gen_range(-2.0..2.0);
        let dist = model.enumerate_exact(beta).unwrap();
        let probs: Vec<f64> = dist.probabilities().collect();
        for (k, sigma) in dist.support().iter().enumerate() {
            for i in 0..n {
                let tau = sigma.flipped(i);
                let Some(j) = dist.index_of(&tau) else { continue };
                edges += 1;
                let forward = probs[k] * model.conditional_flip_probability(beta, sigma, i).unwrap() / n as f64;
                let backward = probs[j] * model.conditional_flip_probability(beta, &tau, i).unwrap() / n as f64;
                worst = worst.max((forward - backward).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("{edges} directed flip-graph edges, max imbalance {worst:.2e}"))
}

fn distances(g: &InteractionGraph, s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.num_vertices()];
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn independent_set_law() -> Outcome {
    let mut graphs: Vec<InteractionGraph> = vec![
        InteractionGraph::new(8, &(0..7).map(|i| (i, i + 1, 1)).collect_vec(), None).unwrap(),
        InteractionGraph::new(8, &(0..8).map(|i| (i, (i + 1) % 8, 1)).collect_vec(), None).unwrap(),
        InteractionGraph::new(7, &(1..7).map(|i| (0, i, -1)).collect_vec(), None).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [6, 7, 8] {
        let edges = (0..n)
            .tuple_combinations()
            .filter(|_| rng.gen::<f64>() < 0.3)
            .map(|(u, v)| (u, v, 1))
            .collect_vec();
        graphs.push(InteractionGraph::new(n, &edges, None).unwrap());
    }
    let (mut singles, mut pairs, mut failures) = (0, 0, 0);
    for g in &graphs {
        let n = g.num_vertices();
        let total: u64 = (1..=n as u64).product();
        let far: Vec<(usize, usize)> = (0..n)
            .tuple_combinations()
            .filter(|&(u, v)| distances(g, u)[v] >= 3)
            .collect();
        let mut single = vec![0u64; n];
        let mut joint = vec![0u64; far.len()];
        for perm in (0..n).permutations(n) {
            let set = ind_edge_set(g, &Permutation::from_ranks(perm).unwrap());
            let mut member = vec![false; n];
            for &v in &set {
                member[v] = true;
                single[v] += 1;
            }
            for (c, &(u, v)) in joint.iter_mut().zip(&far) {
                if member[u] && member[v] {
                    *c += 1;
                }
            }
        }
        for (v, &count) in single.iter().enumerate() {
            singles += 1;
            if count * (g.degree(v) as u64 + 1) != total {
                failures += 1;
            }
        }
        for (&c, &(u, v)) in joint.iter().zip(&far) {
            pairs += 1;
            if c * (g.degree(u) as u64 + 1) * (g.degree(v) as u64 + 1) != total {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("{} graphs, {singles} vertex laws and {pairs} distance>=3 pair laws exact, {failures} failures", graphs.len()),
    )
}

fn mple_oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let options = EstimateOptions { grad_tol: Some(1e-11), max_iters: Some(1_000_000) };
    let (mut instances, mut worst, mut interior, mut bound_failures) = (0, 0.0f64, 0, 0);
    while instances < 100 {
        let inst = random_instance(rng.gen(), 12, 0.3, rng.gen_range(0..=8), 4, 1.0);
        let model = inst.model();
        let beta_star = rng.gen_range(-0.8..0.8);
        let sigma = model.sample_exact(beta_star, &mut rng).unwrap();
        let ctx = PseudolikelihoodContext::new(&model, &sigma).unwrap();
        if ctx.is_degenerate() {
            continue;
        }
        instances += 1;
        let report = estimate_mple(&model, &sigma, &options).unwrap();
        let b = model.beta_bound();
        let golden = golden_section_min(|x| ctx.phi(x).unwrap() / 12.0, -b, b, 1e-12);
        worst = worst.max((report.beta_hat - golden).abs());
        if !report.at_boundary {
            interior += 1;
            let dec = error_decomposition(&ctx, beta_star, report.beta_hat).unwrap();
            if (report.beta_hat - beta_star).abs() > dec.bound + 1e-9 {
                bound_failures += 1;
            }
        }
    }
    outcome(
        worst <= 1e-4 && bound_failures == 0,
        format!("100 instances, max |PGD - golden| {worst:.2e}; ratio bound held on {}/{interior} interior estimates", interior - bound_failures),
    )
}

fn phi1_concentration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let graph = generate_regular_signed_graph(14, 3, 0.5, &mut rng).unwrap();
    let formula = generate_regime_formula(14, 4, 1, &mut rng).unwrap();
    let model = TruncatedIsingModel::new(graph, formula, 1.0).unwrap();
    let r = check_phi1_concentration(&model, 0.5, 0.1, 2000, &mut rng).unwrap();
    let se = (0.9f64 * 0.1 / 2000.0).sqrt();
    outcome(
        r.passed,
        format!(
            "n=14, bound {:.3}, frequency {:.4} vs threshold {:.4}",
            r.bound_value,
            r.empirical_value,
            0.9 - 3.0 * se
        ),
    )
}

fn consistency_rate() -> Outcome {
    let base = RunConfig {
        graph_source: GraphSource::Generator { n: 64, delta: 3, sign_bias: 1.0 },
        formula_source: FormulaSource::Empty,
        beta_star: 0.5,
        beta_bound: 1.0,
        trials: 50,
        seed: 1,
        sampler: Some(SamplerKind::Glauber { steps: 0, burn_in: None }),
        outputs: None,
        grad_tol: None,
        max_iters: None,
        timing: false,
    };
    let sizes = [64, 128, 256, 512, 1024];
    let sweep = consistency_sweep(&base, &sizes, 50).unwrap();
    let medians = sweep.summary.rows.iter().map(|r| format!("{}:{:.4}", r.n, r.median_abs_error)).join(" ");
    let slope = sweep.summary.slope;
    outcome(
        slope.is_some_and(|s| (-0.65..=-0.35).contains(&s)),
        format!(
            "delta=3, burn-in ceil(100 n ln n) (n=1024: {}), medians {medians}, slope {}",
            default_burn_in(1024),
            slope.map_or("none".into(), |s| format!("{s:.3}"))
        ),
    )
}

fn fatness() -> Outcome {
    let edges: Vec<(usize, usize, i8)> = (0..8).map(|i| (2 * i, 2 * i + 1, if i % 2 == 0 { 1 } else { -1 })).collect();
    let graph = InteractionGraph::new(16, &edges, None).unwrap();
    let formula = parse_dimacs("p cnf 16 2\n1 -3 5 7 -9 11 13 15 0\n2 4 -6 8 10 -12 14 16 0\n").unwrap();
    let regime = check_regime(&formula, &graph, 0.2);
    let model = TruncatedIsingModel::new(graph, formula, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let min = (0..16)
        .map(|i| model.fatness_estimate(0.1, i, FatnessMethod::Exact, &mut rng).unwrap())
        .fold(f64::INFINITY, f64::min);
    outcome(
        min >= 0.5 && regime.satisfied_flip,
        format!(
            "n=16, k=8, d=1, delta=1, B=0.2: flip threshold {:.2} satisfied, min fatness {min:.4}",
            regime.threshold_flip
        ),
    )
}

fn determinism() -> Outcome {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_trunc-ising"))
            .args(["experiment", "--sizes", "64,128,256", "--trials", "50", "--seed", "7"])
            .env("TRUNC_ISING_THREADS", threads)
            .output()
            .unwrap()
    };
    let outputs = [run("1"), run("1"), run("4")];
    let ok = outputs.iter().all(|o| o.status.success() && !o.stdout.is_empty());
    let same = outputs.iter().all(|o| o.stdout == outputs[0].stdout);
    outcome(
        ok && same,
        format!(
            "experiment CSV ({} bytes) identical across two runs and 1 vs 4 threads: {same}",
            outputs[0].stdout.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("derivative correctness", derivative_correctness),
        ("convexity", convexity),
        ("flippability oracle equivalence", flippability_equivalence),
        ("exact sampler fidelity", exact_sampler_fidelity),
        ("detailed balance", detailed_balance),
        ("independent-set law", independent_set_law),
        ("MPLE-oracle agreement", mple_oracle_agreement),
        ("phi1 concentration", phi1_concentration),
        ("consistency rate", consistency_rate),
        ("fatness", fatness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
