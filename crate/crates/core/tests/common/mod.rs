//! Random instance builders and brute-force oracles shared by the
//! integration tests. Oracles work from raw edge and clause lists and do
//! not call into the library's evaluation code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trunc_ising::cnf::{CnfFormula, Literal};
use trunc_ising::graph::InteractionGraph;
use trunc_ising::model::TruncatedIsingModel;

/// Raw description of an instance alongside the library objects.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub edges: Vec<(usize, usize, i8)>,
    /// Clauses as signed 1-based literals.
    pub clauses: Vec<Vec<i64>>,
    pub beta_bound: f64,
    /// An assignment satisfying every clause.
    pub planted: Vec<i8>,
}

impl Instance {
    pub fn graph(&self) -> InteractionGraph {
        InteractionGraph::new(self.n, &self.edges, None).unwrap()
    }

    pub fn formula(&self) -> CnfFormula {
        let clauses = self
            .clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&l| {
                        let v = l.unsigned_abs() as usize - 1;
                        if l > 0 {
                            Literal::positive(v)
                        } else {
                            Literal::negative(v)
                        }
                    })
                    .collect()
            })
            .collect();
        CnfFormula::new(self.n, clauses).unwrap()
    }

    pub fn model(&self) -> TruncatedIsingModel {
        TruncatedIsingModel::new(self.graph(), self.formula(), self.beta_bound).unwrap()
    }

    pub fn delta(&self) -> usize {
        let mut deg = vec![0usize; self.n];
        for &(u, v, _) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

/// Random graph with edge probability `p`, random signs, and `m` random
/// clauses of width up to `max_width` all satisfied by a planted
/// assignment.
pub fn random_instance(seed: u64, n: usize, p: f64, m: usize, max_width: usize, beta_bound: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v, if rng.gen() { 1 } else { -1 }));
            }
        }
    }
    let planted: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let mut clauses = Vec::new();
    for _ in 0..m {
        let width = rng.gen_range(1..=max_width.min(n).max(1));
        let vars = rand::seq::index::sample(&mut rng, n, width).into_vec();
        let mut clause: Vec<i64> = vars
            .iter()
            .map(|&v| if rng.gen() { v as i64 + 1 } else { -(v as i64 + 1) })
            .collect();
        let sat = clause.iter().any(|&l| (l > 0) == planted[l.unsigned_abs() as usize - 1]);
        if !sat {
            let v = clause[0].unsigned_abs() as usize - 1;
            clause[0] = if planted[v] { v as i64 + 1 } else { -(v as i64 + 1) };
        }
        clauses.push(clause);
    }
    let planted = planted.into_iter().map(|b| if b { 1 } else { -1 }).collect();
    Instance { n, edges, clauses, beta_bound, planted }
}

pub fn spins_of(mask: u64, n: usize) -> Vec<i8> {
    (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect()
}

pub fn brute_satisfies(clauses: &[Vec<i64>], spins: &[i8]) -> bool {
    clauses.iter().all(|c| {
        c.iter().any(|&l| {
            let s = spins[l.unsigned_abs() as usize - 1];
            (l > 0) == (s == 1)
        })
    })
}

/// Whether flipping `i` leaves the assignment satisfying, by re-checking
/// the whole formula.
pub fn brute_flippable(clauses: &[Vec<i64>], spins: &[i8], i: usize) -> bool {
    let mut flipped = spins.to_vec();
    flipped[i] = -flipped[i];
    brute_satisfies(clauses, &flipped)
}

/// `sum over edges of A_uv s_u s_v` with `A = sign / delta`.
pub fn brute_half_energy(inst: &Instance, spins: &[i8]) -> f64 {
    let delta = inst.delta().max(1) as f64;
    inst.edges
        .iter()
        .map(|&(u, v, s)| s as f64 / delta * spins[u] as f64 * spins[v] as f64)
        .sum()
}

pub fn brute_field(inst: &Instance, spins: &[i8], i: usize) -> f64 {
    let delta = inst.delta().max(1) as f64;
    inst.edges
        .iter()
        .filter_map(|&(u, v, s)| match (u == i, v == i) {
            (true, _) => Some(s as f64 / delta * spins[v] as f64),
            (_, true) => Some(s as f64 / delta * spins[u] as f64),
            _ => None,
        })
        .sum()
}

/// `(mask, probability)` over the support, ascending by mask.
pub fn brute_distribution(inst: &Instance, beta: f64) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = (0..1u64 << inst.n)
        .filter_map(|mask| {
            let s = spins_of(mask, inst.n);
            brute_satisfies(&inst.clauses, &s).then(|| (mask, (beta * brute_half_energy(inst, &s)).exp()))
        })
        .collect();
    let z: f64 = out.iter().map(|p| p.1).sum();
    for p in &mut out {
        p.1 /= z;
    }
    out
}

/// Negative log-pseudolikelihood written directly from the conditional
/// law `exp(beta m s) / (2 cosh(beta m))` over flippable coordinates.
pub fn brute_phi(inst: &Instance, spins: &[i8], beta: f64) -> f64 {
    (0..inst.n)
        .filter(|&i| brute_flippable(&inst.clauses, spins, i))
        .map(|i| {
            let m = brute_field(inst, spins, i);
            (2.0 * (beta * m).cosh()).ln() - beta * m * spins[i] as f64
        })
        .sum()
}
