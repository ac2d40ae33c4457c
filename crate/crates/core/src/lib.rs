//! Solvers for vertical federated learning posed as a saddle-point problem.
//!
//! A dataset's feature columns are split across `n` clients, each holding a
//! block `A_i` of the design matrix. Training
//!
//! ```text
//!   min_x  ℓ(Ax, b) + Σ_i r_i(x_i)
//! ```
//!
//! is rewritten with a consensus variable `z = Ax` and a multiplier `y`,
//! giving the Lagrangian `ℓ(z,b) + Σ_i r_i(x_i) + ⟨y, Ax − z⟩`. Every solver
//! here runs extragradient-style updates on that saddle function, with
//! optional compression, partial participation, per-coordinate messages,
//! privacy noise, masking, block-local consensus, augmented penalty terms, or
//! a pure dual view. Reference baselines (gradient descent, Nesterov
//! momentum, ADMM, dual ascent) share the same problem and metric types so
//! runs are comparable end to end.
//!
//! The crate is generic over the scalar type through [`scalar::Real`];
//! `f64` aliases are exported at the root for the common case.

pub mod comm;
pub mod dataio;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` vector, the default scalar for experiments.
pub type Vec64 = linalg::Vector<f64>;
/// `f64` dense matrix.
pub type Mat64 = linalg::DenseMatrix<f64>;
/// `f64` partitioned dataset.
pub type Dataset64 = dataio::VerticalDataset<f64>;
/// `f64` problem description.
pub type Problem64 = problem::ProblemSpec<f64>;
/// `f64` solver configuration.
pub type Config64 = solvers::SolverConfig<f64>;
/// `f64` run output.
pub type Run64 = metrics::RunRecord<f64>;
