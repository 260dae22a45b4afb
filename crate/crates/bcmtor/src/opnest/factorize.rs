//! Canonical triangular factorization `C = F* F`, `F = D* sqrt(C)`.
//!
//! The diagonal of `sqrt(C)` is realized at the finest partition with each
//! increment normalized to an isometry: orthonormalization of the columns of
//! `sqrt(C)` in nest order with positive pivots. On coordinate flags this
//! reproduces the positive-diagonal Cholesky factor of `C = R^T R`, which is
//! the convention verified by the oracle tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linop::{spectral_norm, LinOp};
use crate::nest::NestSpec;
use crate::opnest::spectral::psd_sqrt_with_clipped;

/// Square root, diagonal, triangular factor and the defects of the canonical
/// conditions.
#[derive(Debug, Clone)]
pub struct FactorizationResult {
    pub sqrt_c: LinOp,
    /// The factorized operator after symmetrization and eigenvalue flooring;
    /// this is what `F* F` reproduces.
    pub c_clipped: LinOp,
    /// Isometric diagonal `D` of `sqrt(C)` on the nest.
    pub diagonal: LinOp,
    /// Triangular factor `F = D* sqrt(C)`.
    pub factor: LinOp,
    /// `||F* F - C_clipped|| / ||C||`.
    pub residual_factor: f64,
    /// `max_s ||F X^s - X^s F X^s|| / ||F||`.
    pub triangular_defect: f64,
    /// `||D D* - I||`.
    pub canonicality_defect: f64,
    /// Set when the canonical conditions fail beyond 0.1; the factorization
    /// is still returned.
    pub canonical_violated: bool,
}

/// Relative triangularity defect of `F` with respect to the nest:
/// the largest spectral norm of the blocks that leak out of a subspace.
pub fn triangularity_defect(f: &LinOp, nest: &NestSpec) -> f64 {
    let n = nest.len();
    assert_eq!(f.dom.n, n, "nest must match the operator");
    let scale = spectral_norm(&f.mat);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for level in 1..n {
        // (I - X^s) F X^s: rows outside the subspace, columns inside
        let inside = nest.selected(level);
        let mask = nest.mask(level);
        let outside: Vec<usize> = (0..n).filter(|i| !mask[*i]).collect();
        let mut block = DMatrix::zeros(outside.len(), inside.len());
        for (bj, &c) in inside.iter().enumerate() {
            for (bi, &r) in outside.iter().enumerate() {
                block[(bi, bj)] = f.mat[(r, c)];
            }
        }
        worst = worst.max(spectral_norm(&block));
    }
    worst / scale
}

/// Orthonormalizes the columns of `m` in nest order (modified Gram-Schmidt
/// with one reorthogonalization pass). Returns the isometric diagonal: the
/// matrix whose column at the coordinate added at level `l` is the normalized
/// `l`-th range increment; columns with pivots at or below
/// `rank_tol * max column norm` stay zero.
fn isometric_diagonal(m: &DMatrix<f64>, nest: &NestSpec, rank_tol: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = m.nrows();
    let mut d = DMatrix::zeros(n, n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut pivots = Vec::with_capacity(n);
    let scale = (0..m.ncols()).map(|j| m.column(j).norm()).fold(0.0_f64, f64::max);
    for level in 1..=nest.len() {
        let c = nest.added_at(level);
        let mut v = m.column(c).clone_owned();
        for _ in 0..2 {
            for b in &basis {
                let coeff = b.dot(&v);
                v.axpy(-coeff, b, 1.0);
            }
        }
        let pivot = v.norm();
        pivots.push(pivot);
        if pivot > rank_tol * scale {
            let q = v / pivot;
            d.set_column(c, &q);
            basis.push(q);
        }
    }
    (d, pivots)
}

/// Canonical triangular factorization of a symmetric PSD operator on a nest.
///
/// `C` is symmetrized and floored at `floor_rel * lambda_max` before taking
/// the square root; the reported residual compares `F* F` against that
/// clipped operator, relative to `||C||`.
pub fn canonical_factorize(
    c: &LinOp,
    nest: &NestSpec,
    floor_rel: f64,
    rank_tol: f64,
) -> Result<FactorizationResult> {
    if !c.is_square() {
        return Err(Error::Dimension("canonical factorization needs a square operator".into()));
    }
    if nest.len() != c.dom.n {
        return Err(Error::Dimension("nest does not match the operator".into()));
    }
    let (sqrt_c, c_clipped) = psd_sqrt_with_clipped(c, floor_rel)?;
    let (d_mat, _pivots) = isometric_diagonal(&sqrt_c.mat, nest, rank_tol);
    let diagonal = LinOp::endomorphism(d_mat, c.dom)?;
    let factor = diagonal.adjoint().compose(&sqrt_c)?;

    let c_norm = spectral_norm(&c.mat);
    let ff = factor.adjoint().compose(&factor)?;
    let residual_factor = spectral_norm(&(&ff.mat - &c_clipped.mat)) / c_norm;
    let triangular_defect = triangularity_defect(&factor, nest);
    let dd = diagonal.compose(&diagonal.adjoint())?;
    let canonicality_defect =
        spectral_norm(&(&dd.mat - DMatrix::<f64>::identity(c.dom.n, c.dom.n)));

    Ok(FactorizationResult {
        sqrt_c,
        c_clipped,
        diagonal,
        factor,
        residual_factor,
        triangular_defect,
        canonicality_defect,
        canonical_violated: canonicality_defect > 0.1,
    })
}
