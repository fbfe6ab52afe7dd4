//! Spectral radius estimation and rescaling of recurrent weight matrices.
//!
//! Plain power iteration is unreliable here: real random matrices often have
//! a complex-conjugate pair as their dominant eigenvalues, and reservoir
//! spectra fill a disk so the modulus gap between the leading eigenvalues is
//! a fraction of a percent. Small matrices are handled with a dense Schur
//! decomposition; larger ones with a thick-restarted Arnoldi iteration.

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Matrices up to this order go straight to the dense eigenvalue solver.
const DENSE_ORDER_LIMIT: usize = 96;
const KRYLOV_DIM: usize = 80;
const RITZ_KEEP: usize = 20;
const MAX_RESTARTS: usize = 400;
const RESIDUAL_TOL: f64 = 1e-11;
const START_SEED: u64 = 0x005e_ed0f_a2a0;

/// Largest eigenvalue modulus of a dense square matrix.
pub fn spectral_radius_dense(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest eigenvalue modulus of a sparse square matrix.
pub fn spectral_radius(m: &SparseMatrix) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    let n = m.nrows();
    if m.nnz() == 0 {
        return 0.0;
    }
    if n <= DENSE_ORDER_LIMIT {
        return spectral_radius_dense(&m.to_dense());
    }
    arnoldi_spectral_radius(m)
}

/// Returns `w * (target / rho(w))`.
pub fn rescale_spectral_radius(w: &SparseMatrix, target: f64) -> Result<SparseMatrix> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch {
            context: "rescale_spectral_radius (square matrix)",
            expected: w.nrows(),
            actual: w.ncols(),
        });
    }
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::config(format!(
            "target spectral radius must be positive and finite, got {target}"
        )));
    }
    let rho = spectral_radius(w);
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::ZeroSpectralRadius);
    }
    let mut out = w.clone();
    let factor = target / rho;
    if factor != 1.0 {
        out.scale(factor);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two rounds of classical Gram-Schmidt
    for _ in 0..2 {
        let h: Vec<f64> = basis.iter().map(|b| dot(b, w)).collect();
        for (b, hi) in basis.iter().zip(h) {
            w.iter_mut().zip(b).for_each(|(x, bi)| *x -= hi * bi);
        }
    }
}

/// `sum_i y[i] * vs[i]`
fn combine(vs: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for (v, &c) in vs.iter().zip(y) {
        if c != 0.0 {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
        }
    }
    out
}

/// Thick-restarted Arnoldi. The basis `v` and its image `w = A v` are kept
/// side by side; each cycle extends the basis to `KRYLOV_DIM`, takes Ritz
/// pairs of `v^T w`, and restarts from an orthonormal basis of the leading
/// Ritz vectors (real and imaginary parts) plus the residual direction,
/// which keeps the subspace a Krylov subspace.
fn arnoldi_spectral_radius(a: &SparseMatrix) -> f64 {
    let n = a.nrows();
    let m = KRYLOV_DIM.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v0: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n0 = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= n0);
    let mut w = vec![a.mul_vec(&v0)];
    let mut v = vec![v0];

    let mut previous = f64::NAN;
    let mut estimate = 0.0;
    for restart in 0..MAX_RESTARTS {
        // extend; the last pass yields the residual direction f
        let mut invariant = false;
        let f = loop {
            let last = w.last().expect("nonempty basis");
            let scale = norm(last);
            let mut next = last.clone();
            orthogonalize(&mut next, &v);
            let beta = norm(&next);
            if beta <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
                invariant = true;
                break next;
            }
            next.iter_mut().for_each(|x| *x /= beta);
            if v.len() == m {
                break next;
            }
            w.push(a.mul_vec(&next));
            v.push(next);
        };

        let p = v.len();
        let h = DMatrix::from_fn(p, p, |i, j| dot(&v[i], &w[j]));
        let eigenvalues = h.complex_eigenvalues();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eigenvalues[j].norm().total_cmp(&eigenvalues[i].norm()));
        estimate = eigenvalues[order[0]].norm();
        if invariant || estimate == 0.0 {
            // the subspace is invariant: its eigenvalues are exact
            return estimate;
        }

        let hc: DMatrix<Complex<f64>> = h.map(|x| Complex::new(x, 0.0));
        let mut parts: Vec<Vec<f64>> = Vec::new();
        let mut residual = f64::INFINITY;
        for (rank, &idx) in order.iter().take(RITZ_KEEP.min(p - 1)).enumerate() {
            let y = ritz_vector(&hc, eigenvalues[idx]);
            if rank == 0 {
                let theta = eigenvalues[idx];
                let re: Vec<f64> = y.iter().map(|c| c.re).collect();
                let im: Vec<f64> = y.iter().map(|c| c.im).collect();
                let (wr, wi, vr, vi) = (combine(&w, &re), combine(&w, &im), combine(&v, &re), combine(&v, &im));
                // (w - theta v) y with y = re + i im
                let r2: f64 = (0..n)
                    .map(|k| {
                        let rr = wr[k] - (theta.re * vr[k] - theta.im * vi[k]);
                        let ri = wi[k] - (theta.re * vi[k] + theta.im * vr[k]);
                        rr * rr + ri * ri
                    })
                    .sum();
                residual = r2.sqrt() / estimate;
            }
            for part in [y.iter().map(|c| c.re).collect::<Vec<f64>>(), y.iter().map(|c| c.im).collect()] {
                let mut q = part;
                let q0 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                for _ in 0..2 {
                    for b in &parts {
                        let c: f64 = b.iter().zip(&q).map(|(x, y)| x * y).sum();
                        q.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
                    }
                }
                let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                if qn > 1e-8 * q0.max(f64::MIN_POSITIVE) {
                    q.iter_mut().for_each(|x| *x /= qn);
                    parts.push(q);
                }
            }
        }

        let stalled = (estimate - previous).abs() <= 1e-15 * estimate;
        if residual < RESIDUAL_TOL || stalled {
            log::trace!("arnoldi converged after {restart} restarts, residual {residual:e}");
            return estimate;
        }
        previous = estimate;

        let mut v_new: Vec<Vec<f64>> = parts.iter().map(|y| combine(&v, y)).collect();
        let mut w_new: Vec<Vec<f64>> = parts.iter().map(|y| combine(&w, y)).collect();
        w_new.push(a.mul_vec(&f));
        v_new.push(f);
        v = v_new;
        w = w_new;
    }
    log::warn!("spectral radius estimate did not converge; using {estimate}");
    estimate
}

/// Unit eigenvector of a small complex matrix for an (approximate)
/// eigenvalue, by shifted inverse iteration.
fn ritz_vector(h: &DMatrix<Complex<f64>>, lambda: Complex<f64>) -> DVector<Complex<f64>> {
    let n = h.nrows();
    let mut y = DVector::from_element(n, Complex::new(1.0, 0.0));
    let mut eps = 1e-10 * lambda.norm().max(1.0);
    for _ in 0..3 {
        let shift = lambda + Complex::new(eps, eps);
        let mut shifted = h.clone();
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        match shifted.lu().solve(&y) {
            Some(z) if z.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => {
                let nz = z.norm();
                if nz > 0.0 {
                    y = z / Complex::new(nz, 0.0);
                }
            }
            _ => eps *= 1e3,
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_rescale_is_linear() {
        let w = SparseMatrix::from_dense(&DMatrix::from_diagonal(&DVector::from_vec(vec![
            2.0, 1.0,
        ])));
        let out = rescale_spectral_radius(&w, 0.85).unwrap();
        assert_relative_eq!(out.get(0, 0), 0.85, epsilon = 1e-12);
        assert_relative_eq!(out.get(1, 1), 0.425, epsilon = 1e-12);
        assert_eq!(out.get(0, 1), 0.0);
    }

    #[test]
    fn already_at_target_is_unchanged() {
        let w = SparseMatrix::from_dense(&DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 0.85, 0.85, 0.0],
        ));
        let out = rescale_spectral_radius(&w, 0.85).unwrap();
        for (a, b) in out.values().iter().zip(w.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_matrix_is_an_error() {
        let w = SparseMatrix::zeros(5, 5);
        assert!(matches!(
            rescale_spectral_radius(&w, 0.85),
            Err(Error::ZeroSpectralRadius)
        ));
        // nilpotent, nonzero entries but no nonzero eigenvalue
        let nil = SparseMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert!(rescale_spectral_radius(&nil, 0.85).is_err());
    }

    #[test]
    fn rotation_pair_modulus() {
        // complex-conjugate dominant pair, modulus 2
        let mut dense = DMatrix::zeros(150, 150);
        dense[(0, 1)] = -2.0;
        dense[(1, 0)] = 2.0;
        for i in 2..150 {
            dense[(i, i)] = 1.0 + (i as f64) / 1000.0;
        }
        let w = SparseMatrix::from_dense(&dense);
        assert_relative_eq!(spectral_radius(&w), 2.0, max_relative = 1e-10);
    }

    #[test]
    fn arnoldi_agrees_with_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        use rand::Rng;
        let dense = DMatrix::from_fn(200, 200, |_, _| {
            if rng.random::<f64>() < 0.1 {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let exact = spectral_radius_dense(&dense);
        let est = spectral_radius(&SparseMatrix::from_dense(&dense));
        assert_relative_eq!(est, exact, max_relative = 1e-9);
    }
}
