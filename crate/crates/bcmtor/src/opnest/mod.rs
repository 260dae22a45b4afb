//! Dense-operator algebra on nests: polar decomposition and PSD square roots,
//! range projections, operator diagonals as refining partition sums, canonical
//! triangular factorization and regular-convergence diagnostics.

mod diagonal;
mod factorize;
mod projector;
mod regularity;
mod spectral;

pub use diagonal::{
    diagonal, diagonal_sum, truncation_diagonal_sum, DiagonalResult,
};
pub use factorize::{canonical_factorize, triangularity_defect, FactorizationResult};
pub use projector::{all_range_projectors, range_projector};
pub use regularity::{regularity_metric, RegularityReport};
pub use spectral::{polar_decompose, psd_sqrt, psd_sqrt_with_clipped, sym_eigen_sorted};
