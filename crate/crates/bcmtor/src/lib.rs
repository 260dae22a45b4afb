//! Numerical laboratory for time-optimal boundary-control reconstruction on
//! an interval.
//!
//! The crate simulates the boundary-controlled wave system `u_tt = u_xx - qu`
//! on `[0, L]`, synthesizes the response operator on `[0, 2T]` (the inverse
//! data), and runs the reconstruction chain
//!
//! ```text
//! R^{2T} -> C^T -> sqrt(C^T) -> F^T -> V^T -> W^T -> q
//! ```
//!
//! built on triangular factorization over nests of delayed-control subspaces.
//! A stability harness perturbs the potential, reruns the chain and tabulates
//! operator and potential convergence; random-matrix suites exercise the
//! underlying operator-theoretic facts (polar continuity, regularity of
//! convergence, stability of the triangular factor).

pub mod csvio;
pub mod error;
pub mod grid;
pub mod linop;
pub mod nest;
pub mod opnest;
pub mod potential;
pub mod probes;
pub mod signal;
pub mod stability;
pub mod tor;
pub mod wave;

pub use nalgebra;

pub use error::{Error, Result};
pub use grid::SimGrid;

/// Installs the global worker pool used by data-parallel assembly.
/// All parallel loops write disjoint slots, so results are bit-identical for
/// any thread count. Fails if a pool is already installed.
pub fn build_thread_pool(threads: usize) -> std::result::Result<(), impl std::error::Error> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()
}
pub use linop::{LinOp, SpaceDesc, SpaceLabel};
pub use nest::{NestSpec, PartitionXi};
pub use potential::Potential;
pub use signal::{SpaceProfile, TimeSignal, Window};
