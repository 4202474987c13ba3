//! Hermitian Toeplitz construction, PSD projection, and the
//! Carathéodory–Fejér–Pisarenko (Vandermonde) decomposition
//! `toep(u) = Σ |c'_k| a(τ'_k) a(τ'_k)^H` that turns solver outputs into
//! spike estimates.

use crate::numeric::{hermitian_eigen, nnls, poly_roots};
use crate::signal::atom;
use crate::{C64, CMatrix, CVector, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::TAU;

/// Hermitian Toeplitz matrix represented by its first column `u`
/// (entry `(i,j)` is `u_{i−j}` below the diagonal, conjugated above).
#[derive(Debug, Clone)]
pub struct HermToeplitz {
    u: CVector,
}

/// Builds `toep(u)` from a first column whose leading entry must be real
/// (its imaginary part is zeroed when below `1e-12`).
pub fn toep(u: &CVector) -> Result<HermToeplitz> {
    if u.is_empty() {
        return Err(Error::Domain("empty first column".into()));
    }
    if u[0].im.abs() > 1e-12 {
        return Err(Error::NotHermitian(u[0].im.abs()));
    }
    let mut u = u.clone();
    u[0] = C64::new(u[0].re, 0.0);
    Ok(HermToeplitz { u })
}

impl HermToeplitz {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn first_column(&self) -> &CVector {
        &self.u
    }

    pub fn trace(&self) -> f64 {
        self.u[0].re * self.u.len() as f64
    }

    /// Dense materialization.
    pub fn to_dense(&self) -> CMatrix {
        let n = self.u.len();
        CMatrix::from_fn(n, n, |i, j| {
            if i >= j {
                self.u[i - j]
            } else {
                self.u[j - i].conj()
            }
        })
    }

    /// Matrix-vector product `toep(u) · v` without materializing the matrix.
    pub fn matvec(&self, v: &CVector) -> CVector {
        let n = self.u.len();
        CVector::from_fn(n, |i, _| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                let t = if i >= j { self.u[i - j] } else { self.u[j - i].conj() };
                acc += t * v[j];
            }
            acc
        })
    }
}

/// Frobenius-nearest PSD matrix: eigendecompose (after symmetrizing) and
/// clamp negative eigenvalues to zero.
pub fn project_psd(m: &CMatrix) -> Result<CMatrix> {
    let asym = (m - m.adjoint()).norm() / 2.0;
    if asym > 1e-10 * m.norm().max(1.0) {
        return Err(Error::Domain(format!(
            "matrix not Hermitian: skew norm {asym:e}"
        )));
    }
    let (vals, vecs) = hermitian_eigen(m)?;
    let n = m.nrows();
    // Q diag(max(λ,0)) Q^H, built column-scaled to avoid a diagonal matmul
    let mut scaled = vecs.clone();
    for k in 0..n {
        let lam = vals[k].max(0.0);
        scaled.column_mut(k).scale_mut(lam);
    }
    Ok(&scaled * vecs.adjoint())
}

/// One component of a Vandermonde decomposition: location and positive mass.
#[derive(Debug, Clone, Copy)]
pub struct VandermondeSpike {
    pub tau: f64,
    pub magnitude: f64,
}

/// `toep(u) = Σ m_k a(τ_k) a(τ_k)^H` with `m_k > 0` and distinct `τ_k`.
#[derive(Debug, Clone)]
pub struct VandermondeDecomposition {
    pub spikes: Vec<VandermondeSpike>,
    /// Numerical rank of `toep(u)` used for the decomposition.
    pub rank: usize,
}

impl VandermondeDecomposition {
    /// Total mass `Σ m_k`. Equals `trace(toep(u))/n` and, for a solver
    /// output, the atomic norm of the decomposed signal.
    pub fn total_mass(&self) -> f64 {
        self.spikes.iter().map(|s| s.magnitude).sum()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.spikes.iter().map(|s| s.tau).collect()
    }
}

/// Carathéodory–Fejér–Pisarenko decomposition of a PSD, rank-deficient
/// `toep(u)`.
///
/// Procedure: eigendecompose; the eigenvector of the smallest eigenvalue is
/// an annihilating vector, so the locations are the unit-circle roots of its
/// polynomial (all roots projected radially onto the circle, with roots
/// within `1e-7` in `τ` merged); masses by nonnegative least squares of the
/// first column against the atom entries, zero-mass candidates dropped.
///
/// `rank_tol` is relative to the largest eigenvalue; eigenvalues at or below
/// `rank_tol·λ_max` count as zero.
pub fn vandermonde_decompose(u: &CVector, rank_tol: f64) -> Result<VandermondeDecomposition> {
    let t = toep(u)?;
    let n = t.dim();
    let dense = t.to_dense();
    let (vals, vecs) = hermitian_eigen(&dense)?;
    let lam_max = vals.iter().cloned().fold(0.0, f64::max);
    if lam_max <= 0.0 {
        // the zero matrix decomposes into nothing
        if vals.iter().all(|&v| v.abs() <= rank_tol.max(1e-14)) {
            return Ok(VandermondeDecomposition {
                spikes: Vec::new(),
                rank: 0,
            });
        }
        return Err(Error::NotPsd(vals.min()));
    }
    let thresh = rank_tol * lam_max;
    let lam_min = vals.min();
    if lam_min < -thresh.max(1e-14) {
        return Err(Error::NotPsd(lam_min));
    }
    let rank = vals.iter().filter(|&&v| v > thresh).count();
    if rank >= n {
        return Err(Error::FullRank(n));
    }

    // annihilating vector: eigenvector of the smallest eigenvalue
    let k_min = (0..n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    let v = vecs.column(k_min).clone_owned();
    // a(τ)^H v = Σ v_l e^{−j2πlτ} vanishes on the support, i.e. the
    // polynomial Σ v_l w^l has roots at w = e^{−j2πτ_k}
    let roots = poly_roots(v.as_slice())?;
    let mut located: Vec<(f64, f64)> = roots
        .iter()
        .map(|r| ((-r.arg() / TAU).rem_euclid(1.0), r.norm()))
        .collect();
    located.sort_by(|a, b| a.0.total_cmp(&b.0));
    let taus = merge_close(&located, 1e-7);

    // masses from the first column: u_l = Σ m_k e^{j2πlτ_k}, m ≥ 0,
    // stacked real/imaginary parts
    let k = taus.len();
    if k == 0 {
        return Err(Error::Numerical("no unit-circle roots found".into()));
    }
    let mut areal = DMatrix::<f64>::zeros(2 * n, k);
    for (c, &tau) in taus.iter().enumerate() {
        let a = atom(tau, n)?;
        for l in 0..n {
            areal[(l, c)] = a[l].re;
            areal[(n + l, c)] = a[l].im;
        }
    }
    let mut breal = DVector::<f64>::zeros(2 * n);
    for l in 0..n {
        breal[l] = u[l].re;
        breal[n + l] = u[l].im;
    }
    let masses = nnls(&areal, &breal);
    // one part in 10⁶ of the total mass separates genuine small spikes from
    // spurious root artifacts
    let mass_floor = 1e-6 * t.trace().abs().max(1e-300) / n as f64;
    let mut spikes: Vec<VandermondeSpike> = taus
        .iter()
        .zip(masses.iter())
        .filter(|(_, &m)| m > mass_floor)
        .map(|(&tau, &m)| VandermondeSpike { tau, magnitude: m })
        .collect();

    // refit on the surviving support for accuracy
    if spikes.len() < k {
        let idx: Vec<usize> = taus
            .iter()
            .enumerate()
            .filter(|(i, _)| masses[*i] > mass_floor)
            .map(|(i, _)| i)
            .collect();
        let asel = areal.select_columns(idx.iter());
        let refit = nnls(&asel, &breal);
        for (s, &m) in spikes.iter_mut().zip(refit.iter()) {
            s.magnitude = m;
        }
        spikes.retain(|s| s.magnitude > mass_floor);
    }

    // reconstruction check against the stated tolerance
    let mut rec = CMatrix::zeros(n, n);
    for s in &spikes {
        let a = atom(s.tau, n)?;
        rec += (&a * a.adjoint()).scale(s.magnitude);
    }
    let err = (&rec - &dense).norm();
    if err > 10.0 * rank_tol.max(1e-12) * dense.norm() {
        return Err(Error::Numerical(format!(
            "decomposition residual {err:e} exceeds tolerance"
        )));
    }

    Ok(VandermondeDecomposition { spikes, rank })
}

/// Merges sorted `(tau, weight)` torus locations closer than `radius` into
/// their weight-averaged mean, wrap-aware.
fn merge_close(sorted: &[(f64, f64)], radius: f64) -> Vec<f64> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let mut groups: Vec<Vec<(f64, f64)>> = vec![vec![sorted[0]]];
    for &p in &sorted[1..] {
        let last = groups.last().unwrap().last().unwrap().0;
        if p.0 - last < radius {
            groups.last_mut().unwrap().push(p);
        } else {
            groups.push(vec![p]);
        }
    }
    // wrap-around: first and last groups may straddle 0
    if groups.len() > 1 {
        let first = groups.first().unwrap().first().unwrap().0;
        let last = groups.last().unwrap().last().unwrap().0;
        if (first + 1.0) - last < radius {
            let tail = groups.pop().unwrap();
            for (t, w) in tail {
                groups[0].push((t - 1.0, w));
            }
        }
    }
    groups
        .iter()
        .map(|g| {
            let wsum: f64 = g.iter().map(|p| p.1).sum();
            let m = if wsum > 0.0 {
                g.iter().map(|p| p.0 * p.1).sum::<f64>() / wsum
            } else {
                g.iter().map(|p| p.0).sum::<f64>() / g.len() as f64
            };
            m.rem_euclid(1.0)
        })
        .collect()
}

/// Default relative rank tolerance for [`vandermonde_decompose`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
