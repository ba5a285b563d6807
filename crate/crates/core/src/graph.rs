//! Signed interaction graphs and the combinatorial routines built on them.
//!
//! Every edge carries a sign; the coupling matrix entry is `sign / delta`
//! where `delta` is the graph's declared maximum degree, so magnetizations
//! always lie in `[-1, 1]`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cnf::{CnfFormula, SpinConfiguration, MAX_PARSED_VARIABLES};
use crate::error::{Error, ParseError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    adjacency: Vec<Vec<(usize, i8)>>,
    max_degree: usize,
    num_edges: usize,
}

impl InteractionGraph {
    /// Builds a graph from undirected signed edges. `declared_delta`, when
    /// given, must be at least the largest vertex degree; otherwise the
    /// largest degree is used.
    pub fn new(n: usize, edges: &[(usize, usize, i8)], declared_delta: Option<usize>) -> Result<Self> {
        let mut adjacency: Vec<Vec<(usize, i8)>> = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(u, v, s) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range for {n} vertices")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if s != 1 && s != -1 {
                return Err(Error::InvalidGraph(format!("edge sign {s} is not +1 or -1")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("parallel edge ({u}, {v})")));
            }
            adjacency[u].push((v, s));
            adjacency[v].push((u, s));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let actual = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        let max_degree = match declared_delta {
            Some(d) if d < actual => {
                return Err(Error::InvalidGraph(format!(
                    "declared max degree {d} is below the actual max degree {actual}"
                )))
            }
            Some(d) => d,
            None => actual,
        };
        if max_degree == 0 && !edges.is_empty() {
            return Err(Error::InvalidGraph("max degree must be positive when edges exist".into()));
        }
        Ok(InteractionGraph {
            adjacency,
            max_degree,
            num_edges: edges.len(),
        })
    }

    pub fn edgeless(n: usize) -> Self {
        InteractionGraph {
            adjacency: vec![Vec::new(); n],
            max_degree: 0,
            num_edges: 0,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, i8)] {
        &self.adjacency[v]
    }

    /// Each undirected edge once, as `(u, v, sign)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |(v, _)| *v > u).map(move |&(v, s)| (u, v, s)))
    }

    /// Coupling matrix entry `A_uv`.
    pub fn coupling(&self, u: usize, v: usize) -> f64 {
        self.adjacency[u]
            .iter()
            .find(|(w, _)| *w == v)
            .map_or(0.0, |&(_, s)| s as f64 / self.max_degree as f64)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Vertices at distance 1 or 2 from `v`.
    pub fn two_hop(&self, v: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &(u, _) in &self.adjacency[v] {
            out.insert(u);
            out.extend(self.adjacency[u].iter().map(|&(w, _)| w));
        }
        out.remove(&v);
        out
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let members: BTreeSet<usize> = set.iter().copied().collect();
        set.iter()
            .all(|&u| self.adjacency[u].iter().all(|(v, _)| !members.contains(v)))
    }

    /// Signed neighbor sum `sum_j sign_ij * spins[j]`, before scaling by `1/delta`.
    #[inline]
    pub(crate) fn signed_field(&self, spins: &[i8], i: usize) -> i32 {
        self.adjacency[i]
            .iter()
            .map(|&(j, s)| (s * spins[j]) as i32)
            .sum()
    }

    #[inline]
    pub(crate) fn magnetization_unchecked(&self, spins: &[i8], i: usize) -> f64 {
        if self.max_degree == 0 {
            return 0.0;
        }
        self.signed_field(spins, i) as f64 / self.max_degree as f64
    }

    fn check_config(&self, config: &SpinConfiguration) -> Result<()> {
        if config.len() != self.num_vertices() {
            return Err(Error::LengthMismatch {
                expected: self.num_vertices(),
                actual: config.len(),
            });
        }
        Ok(())
    }

    /// `m_i(sigma) = sum_j A_ij sigma_j`.
    pub fn magnetization(&self, config: &SpinConfiguration, i: usize) -> Result<f64> {
        self.check_config(config)?;
        if i >= self.num_vertices() {
            return Err(Error::VariableOutOfRange {
                index: i,
                num_vars: self.num_vertices(),
            });
        }
        Ok(self.magnetization_unchecked(config.spins(), i))
    }

    pub fn all_magnetizations(&self, config: &SpinConfiguration) -> Result<Vec<f64>> {
        self.check_config(config)?;
        Ok((0..self.num_vertices())
            .map(|i| self.magnetization_unchecked(config.spins(), i))
            .collect())
    }
}

/// Parses the edge-list format: a header `n m delta`, then `m` lines
/// `u v s` with 1-based vertices and `s` in `{+1, -1}`. Lines starting
/// with `#` or `c` and blank lines are skipped.
pub fn parse_graph(text: &str) -> Result<InteractionGraph, ParseError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut edges = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('c') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(ParseError::new(line_no, format!("expected 3 fields, found {}", fields.len())));
        }
        match header {
            None => {
                let mut nums = [0usize; 3];
                for (slot, f) in nums.iter_mut().zip(&fields) {
                    *slot = f
                        .parse()
                        .map_err(|_| ParseError::new(line_no, format!("bad header field `{f}`")))?;
                }
                if nums[0] > MAX_PARSED_VARIABLES {
                    return Err(ParseError::new(
                        line_no,
                        format!("{} vertices exceeds the limit of {MAX_PARSED_VARIABLES}", nums[0]),
                    ));
                }
                header = Some((nums[0], nums[1], nums[2]));
            }
            Some((n, _, _)) => {
                let u: usize = fields[0]
                    .parse()
                    .map_err(|_| ParseError::new(line_no, format!("bad vertex `{}`", fields[0])))?;
                let v: usize = fields[1]
                    .parse()
                    .map_err(|_| ParseError::new(line_no, format!("bad vertex `{}`", fields[1])))?;
                let s: i8 = match fields[2] {
                    "1" | "+1" => 1,
                    "-1" => -1,
                    other => return Err(ParseError::new(line_no, format!("bad sign `{other}`"))),
                };
                if u == 0 || v == 0 || u > n || v > n {
                    return Err(ParseError::new(line_no, format!("vertex out of range 1..={n}")));
                }
                edges.push((u - 1, v - 1, s, line_no));
            }
        }
    }
    let (n, m, delta) = header.ok_or_else(|| ParseError::new(last_line.max(1), "missing header"))?;
    if edges.len() != m {
        return Err(ParseError::new(
            last_line.max(1),
            format!("header declares {m} edges, found {}", edges.len()),
        ));
    }
    let plain: Vec<(usize, usize, i8)> = edges.iter().map(|&(u, v, s, _)| (u, v, s)).collect();
    InteractionGraph::new(n, &plain, Some(delta)).map_err(|e| {
        let line = edges.last().map_or(last_line.max(1), |e| e.3);
        ParseError::new(line, e)
    })
}

pub fn serialize_graph(graph: &InteractionGraph) -> String {
    let mut out = format!("{} {} {}\n", graph.num_vertices(), graph.num_edges(), graph.max_degree());
    for (u, v, s) in graph.edges() {
        let _ = writeln!(out, "{} {} {}", u + 1, v + 1, if s > 0 { "+1" } else { "-1" });
    }
    out
}

/// A bijection from vertices to ranks `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    rank: Vec<usize>,
}

impl Permutation {
    pub fn from_ranks(rank: Vec<usize>) -> Result<Self> {
        let n = rank.len();
        let mut seen = vec![false; n];
        for &r in &rank {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidPermutation(format!("{rank:?} is not a bijection onto 0..{n}")));
            }
        }
        Ok(Permutation { rank })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { rank: (0..n).collect() }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut rank: Vec<usize> = (0..n).collect();
        rank.shuffle(rng);
        Permutation { rank }
    }

    pub fn rank(&self, v: usize) -> usize {
        self.rank[v]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.rank
    }
}

/// Vertices ranked above all of their neighbors. Isolated vertices are
/// always selected. The result is an independent set, ascending.
pub fn ind_edge_set(graph: &InteractionGraph, ordering: &Permutation) -> Vec<usize> {
    (0..graph.num_vertices())
        .filter(|&u| {
            graph
                .neighbors(u)
                .iter()
                .all(|&(v, _)| ordering.rank(u) > ordering.rank(v))
        })
        .collect()
}

/// Monte Carlo frequency of `vertex` landing in [`ind_edge_set`] under
/// uniformly random orderings.
pub fn inclusion_probability_estimate<R: Rng + ?Sized>(
    graph: &InteractionGraph,
    vertex: usize,
    num_samples: usize,
    rng: &mut R,
) -> f64 {
    let n = graph.num_vertices();
    let mut rank: Vec<usize> = (0..n).collect();
    let mut hits = 0usize;
    for _ in 0..num_samples {
        rank.shuffle(rng);
        if graph.neighbors(vertex).iter().all(|&(v, _)| rank[vertex] > rank[v]) {
            hits += 1;
        }
    }
    hits as f64 / num_samples.max(1) as f64
}

/// Minimum over clauses of `|C ∩ set|`; `None` when there are no clauses.
pub fn clause_coverage(formula: &CnfFormula, set: &[usize]) -> Option<usize> {
    let mut member = vec![false; formula.num_vars()];
    for &v in set {
        if v < member.len() {
            member[v] = true;
        }
    }
    formula
        .clauses()
        .iter()
        .map(|c| c.iter().filter(|l| member[l.var]).count())
        .min()
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoverageSearch {
    Found {
        set: Vec<usize>,
        ordering: Permutation,
        tries: usize,
        coverage: Option<usize>,
    },
    Exhausted {
        tries: usize,
        best_coverage: usize,
        target: usize,
    },
}

impl CoverageSearch {
    pub fn is_found(&self) -> bool {
        matches!(self, CoverageSearch::Found { .. })
    }
}

/// Samples orderings until [`ind_edge_set`] meets every clause in at least
/// `ceil(lambda * k_min)` variables.
pub fn search_covering_independent_set<R: Rng + ?Sized>(
    graph: &InteractionGraph,
    formula: &CnfFormula,
    lambda: f64,
    max_tries: usize,
    rng: &mut R,
) -> Result<CoverageSearch> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("coverage fraction {lambda} not in (0, 1]")));
    }
    if graph.num_vertices() != formula.num_vars() {
        return Err(Error::SizeMismatch {
            graph: graph.num_vertices(),
            formula: formula.num_vars(),
        });
    }
    let target = (lambda * formula.stats().k_min as f64).ceil() as usize;
    let mut best = 0;
    for attempt in 1..=max_tries {
        let ordering = Permutation::random(graph.num_vertices(), rng);
        let set = ind_edge_set(graph, &ordering);
        let coverage = clause_coverage(formula, &set);
        match coverage {
            None => {
                return Ok(CoverageSearch::Found {
                    set,
                    ordering,
                    tries: attempt,
                    coverage,
                })
            }
            Some(c) if c >= target => {
                return Ok(CoverageSearch::Found {
                    set,
                    ordering,
                    tries: attempt,
                    coverage,
                })
            }
            Some(c) => best = best.max(c),
        }
    }
    Ok(CoverageSearch::Exhausted {
        tries: max_tries,
        best_coverage: best,
        target,
    })
}

/// Greedy subset of `candidates` whose members are pairwise at distance at
/// least 3 both in `graph` and in the formula's co-occurrence graph.
/// Candidates are visited in ascending order.
pub fn greedy_2hop_disjoint(graph: &InteractionGraph, formula: &CnfFormula, candidates: &[usize]) -> Vec<usize> {
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut removed = BTreeSet::new();
    let mut chosen = Vec::new();
    for v in sorted {
        if removed.contains(&v) {
            continue;
        }
        chosen.push(v);
        removed.extend(graph.two_hop(v));
        for u in formula.co_occurring(v) {
            removed.insert(u);
            removed.extend(formula.co_occurring(u));
        }
    }
    chosen
}

/// Injective map from part of `independent_set` to distinct neighbors
/// outside it. Members are visited in ascending order and each claims its
/// smallest unclaimed outside neighbor.
pub fn partner_assignment(graph: &InteractionGraph, independent_set: &[usize]) -> BTreeMap<usize, usize> {
    let members: BTreeSet<usize> = independent_set.iter().copied().collect();
    let mut claimed = BTreeSet::new();
    let mut out = BTreeMap::new();
    for &v in &members {
        let partner = graph
            .neighbors(v)
            .iter()
            .map(|&(u, _)| u)
            .find(|u| !members.contains(u) && !claimed.contains(u));
        if let Some(u) = partner {
            claimed.insert(u);
            out.insert(v, u);
        }
    }
    out
}

const REGULAR_GRAPH_RETRIES: usize = 100_000;

/// Connected `delta`-regular simple graph from the configuration model,
/// resampling until the pairing is simple and connected. Each edge is
/// positive with probability `sign_bias`.
pub fn generate_regular_signed_graph<R: Rng + ?Sized>(
    n: usize,
    delta: usize,
    sign_bias: f64,
    rng: &mut R,
) -> Result<InteractionGraph> {
    if n == 0 {
        return Err(Error::Infeasible("graph needs at least one vertex".into()));
    }
    if n == 1 && delta == 0 {
        return Ok(InteractionGraph::edgeless(1));
    }
    if delta == 0 || delta >= n || !(n * delta).is_multiple_of(2) {
        return Err(Error::Infeasible(format!("no connected {delta}-regular graph on {n} vertices")));
    }
    if !(0.0..=1.0).contains(&sign_bias) {
        return Err(Error::Infeasible(format!("sign bias {sign_bias} not in [0, 1]")));
    }
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, delta)).collect();
    'retry: for _ in 0..REGULAR_GRAPH_RETRIES {
        points.shuffle(rng);
        let mut seen = BTreeSet::new();
        for pair in points.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                continue 'retry;
            }
        }
        let edges: Vec<(usize, usize, i8)> = seen
            .into_iter()
            .map(|(u, v)| (u, v, if rng.gen::<f64>() < sign_bias { 1 } else { -1 }))
            .collect();
        let graph = InteractionGraph::new(n, &edges, Some(delta))?;
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(Error::RetryLimit(REGULAR_GRAPH_RETRIES))
}
