//! Orthogonal projections onto the ranges `W F^s` that turn the domain nest
//! into the image nest.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linop::LinOp;
use crate::nest::NestSpec;

fn projector_matrix(w: &DMatrix<f64>, nest: &NestSpec, level: usize, rank_tol: f64) -> DMatrix<f64> {
    let n = w.nrows();
    if level == 0 {
        return DMatrix::zeros(n, n);
    }
    let cols = nest.select_columns(w, level);
    let svd = cols.svd(true, false);
    let u = svd.u.expect("svd with u");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));
    let mut p = DMatrix::zeros(n, n);
    if smax == 0.0 {
        return p;
    }
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] > rank_tol * smax {
            let ui = u.column(i).clone_owned();
            p.ger(1.0, &ui, &ui, 1.0);
        }
    }
    0.5 * (&p + p.transpose())
}

/// Rank-revealing orthogonal projection onto `span(W F^s)` at the given nest
/// level; singular values below `rank_tol * sigma_max` count as zero.
pub fn range_projector(w: &LinOp, nest: &NestSpec, level: usize, rank_tol: f64) -> Result<LinOp> {
    if nest.len() != w.dom.n {
        return Err(Error::Dimension("nest does not match the operator domain".into()));
    }
    if level > nest.len() {
        return Err(Error::Dimension(format!("level {level} beyond nest size {}", nest.len())));
    }
    LinOp::endomorphism(projector_matrix(&w.mat, nest, level, rank_tol), w.cod)
}

/// All projectors `P^s` for levels `0..=n`, computed independently per level.
pub fn all_range_projectors(w: &LinOp, nest: &NestSpec, rank_tol: f64) -> Result<Vec<DMatrix<f64>>> {
    if nest.len() != w.dom.n {
        return Err(Error::Dimension("nest does not match the operator domain".into()));
    }
    Ok((0..=nest.len())
        .into_par_iter()
        .map(|l| projector_matrix(&w.mat, nest, l, rank_tol))
        .collect())
}
