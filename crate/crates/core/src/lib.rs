//! Top Lyapunov exponent of Markovian products of invertible matrices.
//!
//! Three independent routes are provided:
//!
//! * the derivative at zero of the leading eigenvalue `beta(t)` of a
//!   discretized transfer operator (`transfer`), either by first-order
//!   perturbation against the eigenmeasure or by finite differences;
//! * the ergodic average of log-gains along the projective chain
//!   (`montecarlo::estimate_furstenberg`);
//! * the subadditive average `(1/n) log |M_1 ... M_n|`
//!   (`montecarlo::estimate_subadditive`).
//!
//! The `diagnostics` module probes the hypotheses (contraction, strong
//! irreducibility, properness) that make the routes agree.

pub mod benchmarks;
pub mod diagnostics;
pub mod error;
pub mod funcspace;
pub mod linalg;
pub mod markov;
pub mod montecarlo;
pub mod projective;
pub mod transfer;

pub use error::{Error, Result};
pub use linalg::{InvertibleMatrix, Matrix, MatrixFamily};
pub use markov::{build_chain, MarkovChainSpec};
pub use projective::ProjPoint;
