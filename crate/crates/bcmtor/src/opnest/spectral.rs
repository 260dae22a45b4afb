//! Symmetric eigendecomposition, PSD square roots and polar decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linop::LinOp;

/// Relative singular-value cutoff used when splitting range and kernel in the
/// polar decomposition.
const POLAR_RANK_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted ascending
/// and eigenvectors reordered accordingly (deterministic).
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = DVector::from_fn(n, |i, _| eig.eigenvalues[idx[i]]);
    let mut vecs = DMatrix::zeros(n, n);
    for (i, &k) in idx.iter().enumerate() {
        vecs.set_column(i, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

fn symmetrized(c: &LinOp) -> Result<DMatrix<f64>> {
    if !c.dom.matches(&c.cod) {
        return Err(Error::Dimension("square root needs an operator on a single space".into()));
    }
    let defect = c.symmetry_defect();
    if defect > 1e-8 {
        return Err(Error::NotSymmetric { defect, limit: 1e-8 });
    }
    Ok(0.5 * (&c.mat + c.mat.transpose()))
}

/// Spectral square root with an eigenvalue floor.
///
/// Eigenvalues below `floor_rel * lambda_max` are clipped up to that floor;
/// the clipped operator is what the square root squares back to. Fails when
/// the top eigenvalue is not positive.
pub fn psd_sqrt(c: &LinOp, floor_rel: f64) -> Result<LinOp> {
    Ok(psd_sqrt_with_clipped(c, floor_rel)?.0)
}

/// Same as [`psd_sqrt`], also returning the clipped operator.
pub fn psd_sqrt_with_clipped(c: &LinOp, floor_rel: f64) -> Result<(LinOp, LinOp)> {
    let m = symmetrized(c)?;
    let (vals, vecs) = sym_eigen_sorted(&m);
    let lambda_max = vals[vals.len() - 1];
    if lambda_max <= 0.0 {
        return Err(Error::NotPositive { lambda_max });
    }
    let floor = floor_rel * lambda_max;
    let clipped_vals = vals.map(|l| l.max(floor));
    let sqrt_vals = clipped_vals.map(f64::sqrt);
    let rebuild = |d: &DVector<f64>| {
        let mut scaled = vecs.clone();
        for j in 0..scaled.ncols() {
            let mut col = scaled.column_mut(j);
            col *= d[j];
        }
        let m = &scaled * vecs.transpose();
        0.5 * (&m + m.transpose())
    };
    let sqrt = LinOp::endomorphism(rebuild(&sqrt_vals), c.dom)?;
    let clipped = LinOp::endomorphism(rebuild(&clipped_vals), c.dom)?;
    Ok((sqrt, clipped))
}

/// Greedy deterministic orthonormal completion: extends the columns of
/// `basis` to a full orthonormal basis using identity-aligned directions,
/// picking at each step the coordinate with the largest residual (ties go to
/// the lowest index).
fn orthonormal_completion(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let missing = n - basis.ncols();
    let mut accepted = DMatrix::zeros(n, missing);
    let mut count = 0;
    while count < missing {
        let mut best: Option<(f64, usize, DVector<f64>)> = None;
        for k in 0..n {
            let mut v = DVector::zeros(n);
            v[k] = 1.0;
            for _ in 0..2 {
                let vb = basis.transpose() * &v;
                v -= basis * vb;
                if count > 0 {
                    let va = accepted.columns(0, count).transpose() * &v;
                    v -= accepted.columns(0, count) * va;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _, _)| norm > *b + 1e-12) {
                best = Some((norm, k, v));
            }
        }
        let (norm, _, v) = best.expect("completion candidates exist");
        accepted.set_column(count, &(v / norm));
        count += 1;
    }
    accepted
}

/// Polar decomposition `A = Phi |A|` with `|A| = sqrt(A* A)`.
///
/// The phase is isometric on the closure of `Ran |A|` and is completed to all
/// of the space by pairing the identity-aligned orthonormal completions of the
/// two orthogonal complements, in index order.
pub fn polar_decompose(a: &LinOp) -> Result<(LinOp, LinOp)> {
    if !a.is_square() {
        return Err(Error::Dimension("polar decomposition needs a square operator".into()));
    }
    let scale = (a.cod.weight / a.dom.weight).sqrt();
    let m = scale * &a.mat;
    let n = m.nrows();
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));

    // modulus |A| = V Sigma V^T on the domain space
    let v = vt.transpose();
    let mut vs = v.clone();
    for j in 0..n {
        let mut col = vs.column_mut(j);
        col *= svd.singular_values[j];
    }
    let modulus_mat = &vs * v.transpose();
    let modulus = LinOp::endomorphism(0.5 * (&modulus_mat + modulus_mat.transpose()), a.dom)?;

    let kept: Vec<usize> =
        (0..n).filter(|&i| svd.singular_values[i] > POLAR_RANK_TOL * smax).collect();
    let mut u_r = DMatrix::zeros(n, kept.len());
    let mut v_r = DMatrix::zeros(n, kept.len());
    for (k, &i) in kept.iter().enumerate() {
        u_r.set_column(k, &u.column(i));
        v_r.set_column(k, &v.column(i));
    }
    let mut phase_mat = &u_r * v_r.transpose();
    if kept.len() < n {
        let u_comp = orthonormal_completion(&u_r);
        let v_comp = orthonormal_completion(&v_r);
        phase_mat += &u_comp * v_comp.transpose();
    }
    // undo the weight scaling so that A = Phi |A| holds between the spaces
    let phase = LinOp::new((1.0 / scale) * phase_mat, a.dom, a.cod)?;
    Ok((phase, modulus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{spectral_norm, SpaceDesc};
    use crate::probes::gaussian_vector;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn abstract_op(m: DMatrix<f64>) -> LinOp {
        let n = m.nrows();
        LinOp::endomorphism(m, SpaceDesc::abstract_space(n)).unwrap()
    }

    fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| crate::probes::standard_normal(&mut rng))
    }

    pub(crate) fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
        let qr = random_matrix(n, seed).qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                let mut col = q.column_mut(j);
                col *= -1.0;
            }
        }
        q
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let id = abstract_op(DMatrix::identity(4, 4));
        let s = psd_sqrt(&id, 1e-10).unwrap();
        assert_relative_eq!(spectral_norm(&(&s.mat - &id.mat)), 0.0, epsilon = 1e-12);

        let c = abstract_op(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])));
        let s = psd_sqrt(&c, 1e-10).unwrap();
        assert_relative_eq!(s.mat[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.mat[(1, 1)], 3.0, epsilon = 1e-12);
        assert!(s.mat[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back_to_clipped() {
        let n = 20;
        let q = random_orthogonal(n, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lam = DVector::from_fn(n, |_, _| {
            use rand::Rng;
            rng.gen_range(1e-12..2.0)
        });
        let c_mat = &q * DMatrix::from_diagonal(&lam) * q.transpose();
        let c = abstract_op(0.5 * (&c_mat + c_mat.transpose()));
        let (s, clipped) = psd_sqrt_with_clipped(&c, 1e-6).unwrap();
        let resid = spectral_norm(&(&s.mat * &s.mat - &clipped.mat)) / spectral_norm(&c.mat);
        assert!(resid <= 1e-10, "residual {resid}");
        // clipping floors the tiny eigenvalue at floor_rel * lambda_max
        let (vals, _) = sym_eigen_sorted(&clipped.mat);
        let (orig_vals, _) = sym_eigen_sorted(&c.mat);
        let floor = 1e-6 * orig_vals[n - 1];
        assert!(vals[0] >= floor * (1.0 - 1e-9));
    }

    #[test]
    fn sqrt_rejects_nonpositive_and_asymmetric() {
        let c = abstract_op(-DMatrix::<f64>::identity(3, 3));
        assert!(matches!(psd_sqrt(&c, 1e-10), Err(Error::NotPositive { .. })));
        let mut m = DMatrix::identity(3, 3);
        m[(0, 2)] = 0.5;
        assert!(matches!(psd_sqrt(&abstract_op(m), 1e-10), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn polar_of_orthogonal_and_scaled_identity() {
        let q = abstract_op(random_orthogonal(6, 9));
        let (phase, modulus) = polar_decompose(&q).unwrap();
        assert!(spectral_norm(&(&phase.mat - &q.mat)) <= 1e-10);
        assert!(spectral_norm(&(&modulus.mat - DMatrix::identity(6, 6))) <= 1e-10);

        let a = abstract_op(2.0 * DMatrix::<f64>::identity(5, 5));
        let (phase, modulus) = polar_decompose(&a).unwrap();
        assert!(spectral_norm(&(&phase.mat - DMatrix::identity(5, 5))) <= 1e-12);
        assert!(spectral_norm(&(&modulus.mat - 2.0 * DMatrix::<f64>::identity(5, 5))) <= 1e-12);
    }

    #[test]
    fn polar_matches_svd_oracle_on_invertible_input() {
        let n = 16;
        // well away from singular: random orthogonal times shifted PSD
        let q = random_orthogonal(n, 21);
        let h = {
            let b = random_matrix(n, 22);
            0.5 * (&b + b.transpose()) + 5.0 * DMatrix::<f64>::identity(n, n)
        };
        let a_mat = &q * &h;
        let a = abstract_op(a_mat.clone());
        let (phase, modulus) = polar_decompose(&a).unwrap();
        // oracle: independent SVD-based polar factors Phi = U V^T, |A| = V S V^T
        let svd = a_mat.clone().svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let phi_oracle = &u * &vt;
        let mut vs = vt.transpose();
        for j in 0..n {
            let mut col = vs.column_mut(j);
            col *= svd.singular_values[j];
        }
        let mod_oracle = &vs * &vt;
        assert!(spectral_norm(&(&phase.mat - &phi_oracle)) <= 1e-8);
        assert!(spectral_norm(&(&modulus.mat - &mod_oracle)) <= 1e-8);
        // reconstruction and unitarity
        assert!(spectral_norm(&(&phase.mat * &modulus.mat - &a_mat)) <= 1e-8);
        assert!(
            spectral_norm(&(phase.mat.transpose() * &phase.mat - DMatrix::identity(n, n))) <= 1e-10
        );
    }

    #[test]
    fn polar_completion_is_unitary_on_rank_deficient_input() {
        let n = 8;
        let mut m = random_matrix(n, 33);
        // repeat columns so the rank drops by two
        let c0 = m.column(0).clone_owned();
        let c1 = m.column(1).clone_owned();
        m.set_column(5, &c0);
        m.set_column(7, &(c0 + c1));
        let a = abstract_op(m);
        let (phase, modulus) = polar_decompose(&a).unwrap();
        assert!(
            spectral_norm(&(phase.mat.transpose() * &phase.mat - DMatrix::identity(n, n))) <= 1e-9
        );
        assert!(spectral_norm(&(&phase.mat * &modulus.mat - &a.mat)) <= 1e-9);
        // deterministic tie-breaking: same input, same completion
        let (phase2, _) = polar_decompose(&a).unwrap();
        assert_eq!(phase.mat, phase2.mat);
    }

    #[test]
    fn sqrt_perturbation_obeys_half_order_bound() {
        // ||sqrt(C_j) - sqrt(C)|| <= kappa * ||C_j - C||^(1/2) on random suites
        let n = 12;
        let q = random_orthogonal(n, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        // spectrum bounded below 0.6 keeps every perturbed operator PSD
        let lam = DVector::from_fn(n, |_, _| {
            use rand::Rng;
            rng.gen_range(0.6..2.0)
        });
        let c_mat = &q * DMatrix::from_diagonal(&lam) * q.transpose();
        let c = abstract_op(0.5 * (&c_mat + c_mat.transpose()));
        let e = {
            let g = random_matrix(n, 42);
            let s = 0.5 * (&g + g.transpose());
            &s / spectral_norm(&s)
        };
        let s0 = psd_sqrt(&c, 1e-12).unwrap();
        for j in 1..=8 {
            let step = 3.0_f64.powi(-j);
            let cj_mat = &c.mat + step * &e;
            let cj = abstract_op(cj_mat);
            let sj = psd_sqrt(&cj, 1e-12).unwrap();
            let lhs = spectral_norm(&(&sj.mat - &s0.mat));
            assert!(lhs <= 1.05 * step.sqrt(), "j={j}: {lhs} vs {}", step.sqrt());
        }
        let _ = gaussian_vector(3, &mut rng);
    }
}
