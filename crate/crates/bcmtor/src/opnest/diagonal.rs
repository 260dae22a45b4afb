//! Operator diagonals: partition sums `D^Xi = sum dP W dX` over a nest and
//! their behavior under dyadic refinement.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linop::{spectral_norm, LinOp};
use crate::nest::{NestSpec, PartitionXi};
use crate::opnest::projector::all_range_projectors;

/// Refinement-limit diagonal with its diagnostics.
#[derive(Debug, Clone)]
pub struct DiagonalResult {
    /// The diagonal at the last evaluated partition.
    pub op: LinOp,
    /// Partition the result was evaluated on.
    pub partition: PartitionXi,
    /// Norm gap between the last two refinement levels (0 when a single
    /// partition was evaluated).
    pub residual: f64,
    /// `max_s ||D X^s - P^s D||` over all grid levels.
    pub intertwining_defect: f64,
    /// `(blocks, gap to previous level)` per refinement level.
    pub refinement: Vec<(usize, f64)>,
}

fn sum_from_projectors(
    w: &DMatrix<f64>,
    nest: &NestSpec,
    part: &PartitionXi,
    projs: &[DMatrix<f64>],
) -> DMatrix<f64> {
    let n = w.nrows();
    let mut d = DMatrix::zeros(n, w.ncols());
    let pts = part.points();
    // deterministic left-to-right summation; blocks touch disjoint columns
    for k in 1..pts.len() {
        let dp = &projs[pts[k]] - &projs[pts[k - 1]];
        for &c in &nest.selected(pts[k])[pts[k - 1]..] {
            let col = dp.clone() * w.column(c);
            d.set_column(c, &col);
        }
    }
    d
}

/// Exact partition sum with `dP` from the range projectors of `W` and `dX`
/// from the nest.
pub fn diagonal_sum(
    w: &LinOp,
    nest: &NestSpec,
    part: &PartitionXi,
    rank_tol: f64,
) -> Result<LinOp> {
    if nest.len() != w.dom.n {
        return Err(Error::Dimension("nest does not match the operator domain".into()));
    }
    let projs = all_range_projectors(w, nest, rank_tol)?;
    LinOp::new(sum_from_projectors(&w.mat, nest, part, &projs), w.dom, w.cod)
}

/// Partition sum with the codomain increments taken from the nest itself
/// (the triangular-truncation flavor, for operators on a single space).
pub fn truncation_diagonal_sum(w: &LinOp, nest: &NestSpec, part: &PartitionXi) -> Result<LinOp> {
    if !w.is_square() || nest.len() != w.dom.n {
        return Err(Error::Dimension("truncation diagonal needs a square operator".into()));
    }
    let n = w.dom.n;
    let mut d = DMatrix::zeros(n, n);
    let pts = part.points();
    for k in 1..pts.len() {
        let mask_hi = nest.mask(pts[k]);
        let mask_lo = nest.mask(pts[k - 1]);
        for &c in &nest.selected(pts[k])[pts[k - 1]..] {
            for r in 0..n {
                if mask_hi[r] && !mask_lo[r] {
                    d[(r, c)] = w.mat[(r, c)];
                }
            }
        }
    }
    LinOp::new(d, w.dom, w.cod)
}

/// Evaluates the diagonal on dyadically refined quasi-uniform partitions
/// (2, 4, 8, ... blocks up to the grid resolution), stopping once successive
/// sums differ by at most `conv_tol` in spectral norm.
///
/// Failure to converge at full resolution is not fatal: the residual is
/// reported and the finest evaluated sum is returned.
pub fn diagonal(w: &LinOp, nest: &NestSpec, rank_tol: f64, conv_tol: f64) -> Result<DiagonalResult> {
    if nest.len() != w.dom.n {
        return Err(Error::Dimension("nest does not match the operator domain".into()));
    }
    let n = nest.len();
    let projs = all_range_projectors(w, nest, rank_tol)?;

    let mut sizes = Vec::new();
    let mut b = 2usize;
    while b < n {
        sizes.push(b);
        b *= 2;
    }
    sizes.push(n);

    let mut refinement = Vec::new();
    let mut prev: Option<(DMatrix<f64>, PartitionXi)> = None;
    let mut residual = 0.0;
    for &blocks in &sizes {
        let part = PartitionXi::uniform(blocks, n);
        let d = sum_from_projectors(&w.mat, nest, &part, &projs);
        if let Some((ref d_prev, _)) = prev {
            residual = spectral_norm(&(&d - d_prev));
            refinement.push((part.block_count(), residual));
        }
        let done = prev.is_some() && residual <= conv_tol;
        prev = Some((d, part));
        if done {
            break;
        }
    }
    let (d_mat, partition) = prev.expect("at least one partition evaluated");

    // intertwining defect max_s ||D X^s - P^s D|| over every grid level
    let mut defect = 0.0_f64;
    for (level, proj) in projs.iter().enumerate().skip(1) {
        let mask = nest.mask(level);
        let mut lhs = d_mat.clone();
        for (c, keep) in mask.iter().enumerate() {
            if !keep {
                lhs.column_mut(c).fill(0.0);
            }
        }
        let rhs = proj * &d_mat;
        defect = defect.max(spectral_norm(&(lhs - rhs)));
    }

    Ok(DiagonalResult {
        op: LinOp::new(d_mat, w.dom, w.cod)?,
        partition,
        residual,
        intertwining_defect: defect,
        refinement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::SpaceDesc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn abstract_op(m: DMatrix<f64>) -> LinOp {
        let n = m.nrows();
        LinOp::endomorphism(m, SpaceDesc::abstract_space(n)).unwrap()
    }

    fn anti_diagonal(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_is_its_own_diagonal_on_any_partition() {
        let n = 16;
        let w = abstract_op(DMatrix::identity(n, n));
        let nest = NestSpec::delayed_control(n);
        for blocks in [1, 2, 5, n] {
            let part = PartitionXi::uniform(blocks, n);
            let d = diagonal_sum(&w, &nest, &part, 1e-10).unwrap();
            assert!(spectral_norm(&(&d.mat - &w.mat)) <= 1e-12);
        }
        let res = diagonal(&w, &nest, 1e-10, 1e-10).unwrap();
        assert!(res.residual <= 1e-12);
        assert!(res.intertwining_defect <= 1e-12);
    }

    #[test]
    fn time_reversal_is_exactly_diagonal() {
        // block-by-block identity, brute-forced at n_t = 8
        let n = 8;
        let w = abstract_op(anti_diagonal(n));
        let nest = NestSpec::delayed_control(n);
        for blocks in [1, 2, 3, 8] {
            let part = PartitionXi::uniform(blocks, n);
            let d = diagonal_sum(&w, &nest, &part, 1e-10).unwrap();
            assert!(spectral_norm(&(&d.mat - &w.mat)) <= 1e-12, "blocks={blocks}");
        }
    }

    #[test]
    fn strictly_upper_operator_truncates_to_zero_under_refinement() {
        // nilpotent shift against the nest ordering: the truncation diagonal
        // norm decreases under dyadic refinement and vanishes at the grid
        let n = 16;
        let nest = NestSpec::delayed_control(n);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut m = DMatrix::zeros(n, n);
        for col_level in 1..=n {
            for row_level in (col_level + 1)..=n {
                // coordinate added at col_level feeds only later increments
                m[(nest.added_at(row_level), nest.added_at(col_level))] =
                    crate::probes::standard_normal(&mut rng);
            }
        }
        let w = abstract_op(m);
        let mut norms = Vec::new();
        for blocks in [2, 4, 8, 16] {
            let part = PartitionXi::uniform(blocks, n);
            let d = truncation_diagonal_sum(&w, &nest, &part).unwrap();
            norms.push(spectral_norm(&d.mat));
        }
        for pair in norms.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "norms not decreasing: {norms:?}");
        }
        assert!(norms[norms.len() - 1] <= 1e-14, "finest truncation must vanish: {norms:?}");
        assert!(norms[0] > 1e-3);
    }

    #[test]
    fn refinement_diagonal_of_random_operator_intertwines() {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = abstract_op(DMatrix::from_fn(n, n, |_, _| {
            crate::probes::standard_normal(&mut rng)
        }));
        let nest = NestSpec::delayed_control(n);
        let res = diagonal(&w, &nest, 1e-10, 1e-10).unwrap();
        assert!(
            res.intertwining_defect <= res.residual + 1e-8,
            "defect {} vs residual {}",
            res.intertwining_defect,
            res.residual
        );
    }

    #[test]
    fn intertwining_holds_on_probe_vectors() {
        // relation D X^s = P^s D checked by applying both sides to probes
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = abstract_op(DMatrix::from_fn(n, n, |_, _| {
            crate::probes::standard_normal(&mut rng)
        }));
        let nest = NestSpec::delayed_control(n);
        let res = diagonal(&w, &nest, 1e-10, 0.0).unwrap();
        let projs = all_range_projectors(&w, &nest, 1e-10).unwrap();
        for h in crate::probes::probe_set(n, 42) {
            for level in [1, 4, n] {
                let lhs = res.op.apply(&nest.project_vector(level, &h)).unwrap();
                let rhs = &projs[level] * res.op.apply(&h).unwrap();
                assert!((lhs - rhs).norm() <= (res.residual + 1e-8) * h.norm() * 4.0);
            }
        }
    }
}
