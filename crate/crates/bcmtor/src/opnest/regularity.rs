//! Regular-convergence diagnostics: strong convergence of the range
//! projections `P_{B_j F^s} -> P_{B F^s}`, proxied on a fixed probe set.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linop::LinOp;
use crate::nest::NestSpec;
use crate::opnest::projector::all_range_projectors;

/// Per-operator regularity metrics against the limit.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    /// `rho_j = max_s rho_j(s)` per sequence member.
    pub rho: Vec<f64>,
    /// `rho_j(s)` per member and per nest level `1..=n`.
    pub profile: Vec<Vec<f64>>,
}

/// For each member `B_j` and nest level `s`, the probe-set proxy of
/// `||P_{B_j F^s} - P_{B F^s}||` on the given probes.
pub fn regularity_metric(
    seq: &[LinOp],
    lim: &LinOp,
    nest: &NestSpec,
    probes: &[DVector<f64>],
    rank_tol: f64,
) -> Result<RegularityReport> {
    if probes.is_empty() {
        return Err(Error::Dimension("regularity metric needs at least one probe".into()));
    }
    for b in seq {
        if !(b.dom.matches(&lim.dom) && b.cod.matches(&lim.cod)) {
            return Err(Error::Dimension("sequence members live on different spaces".into()));
        }
    }
    let p_lim = all_range_projectors(lim, nest, rank_tol)?;
    let n = nest.len();
    let mut rho = Vec::with_capacity(seq.len());
    let mut profile = Vec::with_capacity(seq.len());
    for b in seq {
        let p_j = all_range_projectors(b, nest, rank_tol)?;
        let mut levels = Vec::with_capacity(n);
        for level in 1..=n {
            let diff = &p_j[level] - &p_lim[level];
            let mut worst = 0.0_f64;
            for h in probes {
                worst = worst.max((&diff * h).norm() / h.norm());
            }
            levels.push(worst);
        }
        rho.push(levels.iter().fold(0.0, |a: f64, v| a.max(*v)));
        profile.push(levels);
    }
    Ok(RegularityReport { rho, profile })
}
