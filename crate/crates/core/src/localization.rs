//! Dual-polynomial evaluation, support localization at the unit-modulus
//! peaks, dual-certificate checking, and amplitude recovery on an estimated
//! support.
//!
//! The dual polynomial of a vector `p ∈ ℂⁿ` is
//! `P(τ) = ⟨a(τ), p⟩ = Σ p_l e^{−j2πlτ}`, whose grid samples at `τ = q/G`
//! are exactly a zero-padded forward DFT of `p`.

use crate::numeric::{cond, lstsq};
use crate::signal::{atom, wrap_dist, NoisyObservation, Spike, SpikeSignal};
use crate::{C64, CMatrix, CVector, Error, Result};
use std::f64::consts::TAU;

/// Default sampling grid for peak finding.
pub const DEFAULT_GRID: usize = 1 << 14;
/// Default peak threshold `1 − ε`.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Coefficients of a dual trigonometric polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub p: CVector,
}

impl DualVector {
    pub fn new(p: CVector) -> Self {
        Self { p }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Grid samples of a dual polynomial.
#[derive(Debug, Clone)]
pub struct DualPolySamples {
    pub grid_size: usize,
    /// Complex samples `P(q/G)`.
    pub values: Vec<C64>,
    /// Modulus samples `|P(q/G)|`.
    pub magnitudes: Vec<f64>,
}

impl DualPolySamples {
    pub fn tau(&self, q: usize) -> f64 {
        q as f64 / self.grid_size as f64
    }
}

/// Samples `P` on the uniform grid `τ = q/G` via a zero-padded DFT.
pub fn eval_dual_poly(p: &DualVector, grid_size: usize) -> Result<DualPolySamples> {
    if grid_size < p.len() {
        return Err(Error::Domain(format!(
            "grid_size {} < n = {}",
            grid_size,
            p.len()
        )));
    }
    let mut buf: Vec<C64> = p.p.iter().copied().collect();
    buf.resize(grid_size, C64::new(0.0, 0.0));
    rustfft::FftPlanner::new()
        .plan_fft_forward(grid_size)
        .process(&mut buf);
    let magnitudes = buf.iter().map(|v| v.norm()).collect();
    Ok(DualPolySamples {
        grid_size,
        values: buf,
        magnitudes,
    })
}

/// Direct evaluation `P(τ) = Σ p_l e^{−j2πlτ}`.
pub fn eval_dual_at(p: &DualVector, tau: f64) -> C64 {
    poly_at(&p.p, tau, 0)
}

/// `d^k P / dτ^k` at `τ` (each derivative multiplies `p_l` by `−j2πl`).
fn poly_at(p: &CVector, tau: f64, order: u32) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (l, &c) in p.iter().enumerate() {
        let f = C64::new(0.0, -TAU * l as f64).powu(order);
        acc += c * f * C64::from_polar(1.0, -TAU * l as f64 * tau);
    }
    acc
}

/// Squared-norm polynomial `h(τ) = Σ_cols |P_c(τ)|²` and its first two
/// derivatives, for one or several dual columns (the MMV case).
fn sqnorm_and_derivs(cols: &[CVector], tau: f64) -> (f64, f64, f64) {
    let mut h = 0.0;
    let mut h1 = 0.0;
    let mut h2 = 0.0;
    for p in cols {
        let v = poly_at(p, tau, 0);
        let d1 = poly_at(p, tau, 1);
        let d2 = poly_at(p, tau, 2);
        h += v.norm_sqr();
        h1 += 2.0 * (v.conj() * d1).re;
        h2 += 2.0 * (d1.norm_sqr() + (v.conj() * d2).re);
    }
    (h, h1, h2)
}

/// Newton iterations on `h'(τ) = 0` (stationary point of the squared
/// modulus), clamped to stay near the starting cell.
fn refine_peak(cols: &[CVector], tau0: f64, cell: f64) -> f64 {
    let mut tau = tau0;
    for _ in 0..50 {
        let (_, h1, h2) = sqnorm_and_derivs(cols, tau);
        if h1.abs() < 1e-12 {
            break;
        }
        if h2 >= 0.0 {
            break; // not a local max, keep the grid point
        }
        let mut step = -h1 / h2;
        let limit = 2.0 * cell;
        if step.abs() > limit {
            step = step.signum() * limit;
        }
        tau = (tau + step).rem_euclid(1.0);
        if step.abs() < 1e-16 {
            break;
        }
    }
    tau
}

fn local_maxima(mags: &[f64], threshold: f64) -> Vec<usize> {
    let g = mags.len();
    (0..g)
        .filter(|&q| {
            let prev = mags[(q + g - 1) % g];
            let next = mags[(q + 1) % g];
            mags[q] >= threshold && mags[q] >= prev && mags[q] > next
        })
        .collect()
}

fn merge_taus(mut taus: Vec<f64>, radius: f64) -> Vec<f64> {
    taus.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for t in taus {
        if let Some(&last) = out.last() {
            if t - last < radius {
                continue;
            }
        }
        out.push(t);
    }
    // wrap-around duplicate between the last and first entries
    if out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        if (first + 1.0) - last < radius {
            out.pop();
        }
    }
    out
}

fn localize_cols(
    cols: &[CVector],
    scale: f64,
    epsilon: f64,
    refine: bool,
    grid_size: usize,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&epsilon) || epsilon <= 0.0 {
        return Err(Error::Domain(format!("epsilon {epsilon} outside (0,1)")));
    }
    let n = cols[0].len();
    let grid_size = grid_size.max(n);
    let mut mags = vec![0.0f64; grid_size];
    for p in cols {
        let s = eval_dual_poly(&DualVector::new(p.clone()), grid_size)?;
        for (m, v) in mags.iter_mut().zip(s.values.iter()) {
            *m += v.norm_sqr();
        }
    }
    for m in mags.iter_mut() {
        *m = m.sqrt() / scale;
    }
    let peaks = local_maxima(&mags, 1.0 - epsilon);
    let cell = 1.0 / grid_size as f64;
    let taus: Vec<f64> = peaks
        .iter()
        .map(|&q| {
            let t0 = q as f64 / grid_size as f64;
            if refine {
                refine_peak(cols, t0, cell)
            } else {
                t0
            }
        })
        .collect();
    Ok(merge_taus(taus, 0.1 / n as f64))
}

/// Support estimate: locations where `|P̂(τ)|` attains a local maximum above
/// `1 − ε`, optionally Newton-refined, merged within `0.1/n`.
pub fn localize_support(p: &DualVector, epsilon: f64, refine: bool) -> Result<Vec<f64>> {
    localize_support_with_grid(p, epsilon, refine, DEFAULT_GRID)
}

/// As [`localize_support`] with an explicit sampling grid.
pub fn localize_support_with_grid(
    p: &DualVector,
    epsilon: f64,
    refine: bool,
    grid_size: usize,
) -> Result<Vec<f64>> {
    localize_cols(&[p.p.clone()], 1.0, epsilon, refine, grid_size)
}

/// MMV support estimate from the joint polynomial `‖a(τ)^H P‖₂`, peaks
/// above `(1 − ε)·max` (the joint polynomial is normalized by its own
/// maximum since its natural scale depends on the snapshot count).
pub fn localize_support_mmv(p: &CMatrix, epsilon: f64, refine: bool) -> Result<Vec<f64>> {
    let cols: Vec<CVector> = p.column_iter().map(|c| c.clone_owned()).collect();
    // normalize by the grid maximum of the joint polynomial
    let n = p.nrows();
    let grid = DEFAULT_GRID.max(n);
    let mut mags = vec![0.0f64; grid];
    for c in &cols {
        let s = eval_dual_poly(&DualVector::new(c.clone()), grid)?;
        for (m, v) in mags.iter_mut().zip(s.values.iter()) {
            *m += v.norm_sqr();
        }
    }
    let maxv = mags.iter().cloned().fold(0.0, f64::max).sqrt();
    if maxv == 0.0 {
        return Ok(Vec::new());
    }
    localize_cols(&cols, maxv, epsilon, refine, grid)
}

/// Norm samples of the joint MMV polynomial on a grid.
pub fn eval_dual_norm_mmv(p: &CMatrix, grid_size: usize) -> Result<Vec<f64>> {
    let mut mags = vec![0.0f64; grid_size];
    for c in p.column_iter() {
        let s = eval_dual_poly(&DualVector::new(c.clone_owned()), grid_size)?;
        for (m, v) in mags.iter_mut().zip(s.values.iter()) {
            *m += v.norm_sqr();
        }
    }
    Ok(mags.iter().map(|m| m.sqrt()).collect())
}

/// Certificate diagnostics from [`certify`].
#[derive(Debug, Clone)]
pub struct CertifyDiagnostics {
    pub ok: bool,
    /// `max_k |P(τ_k) − sgn(c_k)|` over the support.
    pub max_interpolation_error: f64,
    /// Largest `|P|` found outside the `0.1/n` support neighborhood, after
    /// refining near-extremal grid points.
    pub max_off_support_modulus: f64,
}

/// Checks the dual-certificate conditions: `P` interpolates the sign
/// pattern on the support and `|P| ≤ 1 + tol` off a `0.1/n` neighborhood of
/// it (dense grid of 2¹⁴ plus refinement of near-extremal points).
pub fn certify(p: &DualVector, signal: &SpikeSignal, tol: f64) -> Result<CertifyDiagnostics> {
    if tol <= 0.0 {
        return Err(Error::Domain(format!("tol {tol} <= 0")));
    }
    let n = p.len();
    let exclusion = 0.1 / n as f64;

    let mut max_interp = 0.0f64;
    for s in signal.spikes() {
        let sign = if s.amp.norm() == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            s.amp / s.amp.norm()
        };
        let err = (eval_dual_at(p, s.tau) - sign).norm();
        max_interp = max_interp.max(err);
    }

    let grid = DEFAULT_GRID.max(n);
    let samples = eval_dual_poly(p, grid)?;
    let cols = [p.p.clone()];
    let cell = 1.0 / grid as f64;
    let mut max_off = 0.0f64;
    for q in 0..grid {
        let tau = samples.tau(q);
        if signal.spikes().iter().any(|s| wrap_dist(tau, s.tau) <= exclusion) {
            continue;
        }
        let mut m = samples.magnitudes[q];
        // near-extremal points get refined to the true local maximum
        if m > 1.0 - 10.0 * tol {
            let prev = samples.magnitudes[(q + grid - 1) % grid];
            let next = samples.magnitudes[(q + 1) % grid];
            if m >= prev && m > next {
                let t = refine_peak(&cols, tau, cell);
                if !signal.spikes().iter().any(|s| wrap_dist(t, s.tau) <= exclusion) {
                    m = m.max(eval_dual_at(p, t.rem_euclid(1.0)).norm());
                }
            }
        }
        max_off = max_off.max(m);
    }

    let ok = max_interp <= tol && max_off <= 1.0 + tol;
    Ok(CertifyDiagnostics {
        ok,
        max_interpolation_error: max_interp,
        max_off_support_modulus: max_off,
    })
}

/// Least-squares amplitude fit `argmin_c ‖Σ c_k a(τ_k) − z‖₂` on a given
/// support.
pub fn amplitudes_ls(z: &NoisyObservation, taus: &[f64]) -> Result<SpikeSignal> {
    let n = z.data.len();
    if taus.is_empty() {
        return Ok(SpikeSignal::empty());
    }
    if taus.len() > n {
        return Err(Error::Domain(format!(
            "{} atoms exceed dimension {}",
            taus.len(),
            n
        )));
    }
    for i in 0..taus.len() {
        for j in (i + 1)..taus.len() {
            if wrap_dist(taus[i], taus[j]) < 1e-10 {
                return Err(Error::Conditioning(format!(
                    "taus {} and {} closer than 1e-10",
                    taus[i], taus[j]
                )));
            }
        }
    }
    let mut a = CMatrix::zeros(n, taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        a.column_mut(k).copy_from(&atom(tau, n)?);
    }
    if cond(&a) > 1e12 {
        return Err(Error::Conditioning(format!(
            "Vandermonde system condition number {:.3e}",
            cond(&a)
        )));
    }
    let c = lstsq(&a, &z.data)?;
    SpikeSignal::new(
        taus.iter()
            .zip(c.iter())
            .map(|(&tau, &amp)| Spike { tau, amp })
            .collect(),
    )
}
