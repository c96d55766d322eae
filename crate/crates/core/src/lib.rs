//! Low-rank SDP relaxations of Max-Cut, Minimum Vertex Cover and Max-3-SAT.
//!
//! The relaxations are optimized with a message-passing projected gradient
//! iteration over unit-norm embeddings. The same iteration can be wrapped in
//! trainable layers ([`optgnn`]) and trained with Adam through a small
//! reverse-mode tape ([`autodiff`]). Fractional solutions are rounded with
//! random hyperplanes ([`rounding`]) and Max-Cut embeddings can be turned into
//! dual upper bounds ([`certify`]).
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, which is what the CLI
//! and the tests use.
//!
//! ```
//! use maxcsp::certify::maxcut_certificate;
//! use maxcsp::instances::gen_er;
//! use maxcsp::rounding::best_of_rounds;
//! use maxcsp::solver::solve;
//! use maxcsp::{Graph, Problem, Rng, SolverConfig};
//!
//! # fn main() -> maxcsp::Result<()> {
//! let g: Graph = gen_er(50, 0.2, &mut Rng::new(1))?;
//! let problem = Problem::max_cut(g.clone());
//! let cfg = SolverConfig::default();
//! let result = solve(&problem, &cfg.initial_embedding(&problem, 16)?, &cfg)?;
//! let rounded = best_of_rounds(&problem, &result.embedding, 1000, &Rng::new(2))?;
//! let bound = maxcut_certificate(&g, &result.embedding)?.bound;
//! assert!(rounded.value <= bound);
//! # Ok(())
//! # }
//! ```

pub mod autodiff;
pub mod certify;
pub mod embed;
pub mod error;
pub mod instances;
pub mod lagrangian;
pub mod optgnn;
pub mod pipeline;
pub mod rng;
pub mod rounding;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;

/// Default working precision.
pub type Real = f64;

pub type Graph = instances::Graph<Real>;
pub type Embedding = embed::Embedding<Real>;
pub type Problem = lagrangian::Problem<Real>;
pub type SolverConfig = solver::SolverConfig<Real>;
pub type SolveResult = solver::SolveResult<Real>;
pub type Model = optgnn::Model<Real>;
pub type TrainConfig = optgnn::TrainConfig<Real>;
pub type Certificate = certify::Certificate<Real>;
pub type RoundingReport = rounding::RoundingReport<Real>;

pub type GraphF32 = instances::Graph<f32>;
pub type EmbeddingF32 = embed::Embedding<f32>;
pub type ProblemF32 = lagrangian::Problem<f32>;
