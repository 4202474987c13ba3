//! Internal numerical helpers: Hermitian eigendecomposition, polynomial
//! roots via the companion matrix, complex least squares and NNLS.

use crate::{C64, CMatrix, CVector, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Eigendecomposition of a Hermitian matrix (symmetrized first).
/// Returns `(eigenvalues, eigenvectors)` with real eigenvalues, unordered.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    let h = (m + m.adjoint()).scale(0.5);
    let se = nalgebra::SymmetricEigen::try_new(h, 1e-14, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigendecomposition failed".into()))?;
    Ok((se.eigenvalues, se.eigenvectors))
}

/// Roots of the polynomial `c_0 + c_1 w + … + c_d w^d` via the companion
/// matrix and a complex Schur decomposition. Near-zero leading coefficients
/// are trimmed relative to the largest coefficient.
pub(crate) fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let max_mag = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max_mag == 0.0 {
        return Ok(Vec::new());
    }
    let mut d = coeffs.len() - 1;
    while d > 0 && coeffs[d].norm() < 1e-14 * max_mag {
        d -= 1;
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    let mut comp = CMatrix::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead;
    }
    let schur = comp
        .try_schur(1e-13, 100_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Minimum-norm least-squares solution of `A c = b` for complex `A` via SVD.
pub(crate) fn lstsq(a: &CMatrix, b: &CVector) -> Result<CVector> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12)
        .map_err(|e| Error::Conditioning(e.to_string()))
}

/// Condition number estimate from the singular values of `A`.
pub(crate) fn cond(a: &CMatrix) -> f64 {
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Lawson–Hanson nonnegative least squares: `min ‖A m − b‖₂, m ≥ 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut passive = vec![false; n];
    let mut x = DVector::<f64>::zeros(n);
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    for _ in 0..(8 * n + 16) {
        let resid = b - a * &x;
        let w = a.transpose() * &resid;
        let best = (0..n)
            .filter(|&i| !passive[i])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = best else { break };
        if w[t] <= tol {
            break;
        }
        passive[t] = true;
        // inner loop: solve on the passive set, back off along the segment if
        // any passive coordinate would go negative
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let ap = a.select_columns(idx.iter());
            let sp = ap
                .clone()
                .svd(true, true)
                .solve(b, 1e-13)
                .unwrap_or_else(|_| DVector::zeros(idx.len()));
            if sp.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = sp[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if sp[k] <= 0.0 {
                    let denom = x[i] - sp[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (sp[k] - x[i]);
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if (0..n).all(|i| !passive[i]) {
                break;
            }
        }
    }
    x
}
