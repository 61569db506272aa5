//! Simulation and certificate toolkit for the Lohe model — Kuramoto-type
//! oscillators with unit-vector states — coupled over a weighted digraph.
//!
//! Each oscillator carries a unit vector `r_i` on the sphere S^{n-1} and obeys
//!
//! ```text
//! r_i' = Omega r_i + k * sum_j a_ij * (r_j - <r_i, r_j> r_i)
//! ```
//!
//! with a common skew-symmetric drift `Omega`, coupling gain `k > 0`, and
//! in-weights `a_ij > 0` whenever information flows from node `j` to node `i`.
//! The pairwise errors `e_ij = 1 - <r_i, r_j>` close into a matrix Riccati
//! equation, which enables synchronization certificates built from the digraph
//! alone: left Perron weights per strongly connected component, a weighted
//! total error `V(E) = beta' E beta / 2`, and an exponential decay bound that
//! holds once the trajectory enters the contraction region.
//!
//! Module map:
//! - [`digraph`]: weight matrices, Laplacians, condensation, Perron weights
//! - [`dynamics`]: sphere-valued states, RK4 integration, frame rotations
//! - [`riccati`]: the error-matrix calculus and its comparison constants
//! - [`analysis`]: decay fitting, region membership, decay certificates
//! - [`rng`]: the seeded generator used for reproducible initial states
//! - [`scenarios`]: built-in benchmark inputs used by the CLI

pub mod analysis;
pub mod digraph;
pub mod dynamics;
pub mod riccati;
pub mod rng;
pub mod scenarios;

use thiserror::Error;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not strongly connected: {0}")]
    NotStronglyConnected(String),

    #[error("digraph has no spanning tree ({sources} source components)")]
    NoSpanningTree { sources: usize },

    #[error("matrix is not skew-symmetric (max |W + W'| = {0:e})")]
    NotSkewSymmetric(f64),

    #[error("non-finite value encountered at t = {0}")]
    NonFinite(f64),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no feasible epsilon after {attempts} attempts (last tried {last:e})")]
    NoFeasibleEpsilon { attempts: usize, last: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use analysis::{
    decay_certificate, epsilon_search, fit_exponential_rate, region_membership, sync_diameter,
    theoretical_rate, DecayReport, RegionSpec, Verdict,
};
pub use digraph::{
    beta_weights, block_laplacian, condensation, has_spanning_tree, laplacian, left_perron,
    BetaWeights, Condensation, Digraph, Laplacian,
};
pub use dynamics::{
    embed_phases, general_rhs, hemisphere_certificate, integrate, lohe_rhs, matrix_exp_skew,
    rotate_frame, ModelParams, SimConfig, StateMatrix, Trajectory,
};
pub use riccati::{
    alpha, error_from_states, gamma_term, integrate_riccati, lemma_constants, path_bound,
    riccati_rhs, sandwich_check, total_error, ErrorMatrix, LemmaConstants,
};
