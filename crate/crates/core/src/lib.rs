//! Single-sample estimation of the inverse temperature of an Ising model
//! whose support is restricted to the solutions of a CNF formula.
//!
//! Spins are `+1` (true) and `-1` (false). Variables are 0-based in the
//! API and 1-based in every file format. Couplings are `A_uv = s_uv / delta`
//! with `s_uv` a sign and `delta` the declared maximum degree, and the
//! Gibbs weight of a solution is `exp(beta * sum over edges of A_uv s_u s_v)`.
//!
//! ```
//! use trunc_ising::{cnf::parse_dimacs, graph::parse_graph, model::TruncatedIsingModel, mple};
//! use rand::SeedableRng;
//!
//! let graph = parse_graph("4 4 2\n1 2 1\n2 3 1\n3 4 1\n4 1 1\n").unwrap();
//! let formula = parse_dimacs("p cnf 4 1\n1 2 0\n").unwrap();
//! let model = TruncatedIsingModel::new(graph, formula, 1.0).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let sample = model.sample_exact(0.5, &mut rng).unwrap();
//! match mple::estimate_mple(&model, &sample, &Default::default()) {
//!     Ok(report) => assert!(report.beta_hat.abs() <= 1.0),
//!     Err(e) => assert!(matches!(e, trunc_ising::Error::DegenerateObjective)),
//! }
//! ```

pub mod cnf;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod model;
pub mod mple;

pub use cnf::{CnfFormula, Literal, SpinConfiguration};
pub use error::{Error, ParseError, Result};
pub use graph::InteractionGraph;
pub use model::{SamplerKind, TruncatedIsingModel};
pub use mple::{estimate_mple, EstimateOptions, EstimateReport};
