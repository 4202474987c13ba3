//! Alternating descent conditional gradient over the continuous sinusoid
//! dictionary.
//!
//! Solves the constrained form `min loss(x) s.t. ‖x‖_A ≤ η` by alternating
//! greedy atom selection (correlate the loss gradient against the
//! dictionary), coefficient updates by projected gradient on the ℓ1 ball,
//! support pruning, and continuous local descent on the locations. Works
//! with pluggable convex losses, sign constraints (nonnegative spikes), and
//! compressed measurements.

use crate::localization::DualVector;
use crate::numeric::hermitian_eigen;
use crate::signal::{atom, atom_derivative};
use crate::{C64, CMatrix, CVector, Error, Result};
use std::f64::consts::TAU;

/// Convex data-fit term; exposes value and gradient in the signal variable.
#[derive(Debug, Clone)]
pub enum LossModel {
    /// `½‖x − z‖²` — atomic norm denoising.
    Quadratic { z: CVector },
    /// `½‖Ax − y‖²` — compressed spectral sensing through `A ∈ ℂ^{m×n}`.
    Compressed { a: CMatrix, y: CVector },
}

impl LossModel {
    /// Ambient signal dimension `n`.
    pub fn dim(&self) -> usize {
        match self {
            LossModel::Quadratic { z } => z.len(),
            LossModel::Compressed { a, .. } => a.ncols(),
        }
    }

    pub fn value(&self, x: &CVector) -> f64 {
        match self {
            LossModel::Quadratic { z } => 0.5 * (x - z).norm_squared(),
            LossModel::Compressed { a, y } => 0.5 * (a * x - y).norm_squared(),
        }
    }

    /// Gradient with respect to `x` (Wirtinger convention: the direction
    /// whose real pairing gives the directional derivative).
    pub fn gradient(&self, x: &CVector) -> CVector {
        match self {
            LossModel::Quadratic { z } => x - z,
            LossModel::Compressed { a, y } => a.adjoint() * (a * x - y),
        }
    }
}

/// Whether coefficients range over ℂ (phased atoms) or over the
/// nonnegative reals (positive spikes, no separation needed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Complex,
    Nonnegative,
}

#[derive(Debug, Clone)]
pub struct AdcgConfig {
    /// ℓ1-ball radius on the coefficients.
    pub eta: f64,
    /// Selection grid; defaults to `16n`.
    pub coarse_grid: Option<usize>,
    /// Outer iteration cap; defaults to `2·|support| + 20`, evaluated
    /// dynamically.
    pub max_outer: Option<usize>,
    /// Alternations of (coefficients, prune, local descent) per outer
    /// iteration.
    pub refine_iters: usize,
    pub sign_mode: SignMode,
    /// Outer stopping: relative objective decrease below this ends the run.
    pub tol_obj: f64,
}

impl AdcgConfig {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            coarse_grid: None,
            max_outer: None,
            refine_iters: 20,
            sign_mode: SignMode::Complex,
            tol_obj: 1e-9,
        }
    }

    pub fn nonnegative(mut self) -> Self {
        self.sign_mode = SignMode::Nonnegative;
        self
    }
}

/// Solver output: support, coefficients, synthesized signal and the
/// objective value after each outer iteration.
#[derive(Debug, Clone)]
pub struct AdcgSolution {
    pub support: Vec<f64>,
    pub coefficients: Vec<C64>,
    pub x: CVector,
    pub objective_trace: Vec<f64>,
    /// False when some coefficient subproblem hit its iteration cap.
    pub coeffs_converged: bool,
}

impl AdcgSolution {
    pub fn objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}

fn synth(support: &[f64], coeffs: &[C64], n: usize) -> CVector {
    let mut x = CVector::zeros(n);
    for (&tau, &c) in support.iter().zip(coeffs.iter()) {
        x += atom(tau, n).expect("support stays in [0,1)") * c;
    }
    x
}

/// Greedy atom selection: the location maximizing `|⟨a(τ), g⟩|` (or
/// `−Re⟨a(τ), g⟩` in nonnegative mode) over a coarse grid, polished by
/// Newton steps. Returns `None` on a (numerically) zero gradient.
pub fn select_atom(gradient: &CVector, config: &AdcgConfig) -> Result<Option<f64>> {
    let n = gradient.len();
    if gradient.norm() <= 1e-14 {
        return Ok(None);
    }
    let grid = config.coarse_grid.unwrap_or(16 * n).max(n);
    // G(τ) = ⟨a(τ), g⟩ shares the dual-polynomial form, so grid values come
    // from one zero-padded DFT
    let samples =
        crate::localization::eval_dual_poly(&DualVector::new(gradient.clone()), grid)?;
    let score = |v: &C64| match config.sign_mode {
        SignMode::Complex => v.norm(),
        SignMode::Nonnegative => -v.re,
    };
    let q_best = (0..grid)
        .max_by(|&a, &b| score(&samples.values[a]).total_cmp(&score(&samples.values[b])))
        .unwrap();
    if config.sign_mode == SignMode::Nonnegative && score(&samples.values[q_best]) <= 0.0 {
        return Ok(None);
    }
    let tau0 = q_best as f64 / grid as f64;
    let cell = 1.0 / grid as f64;
    let tau = match config.sign_mode {
        SignMode::Complex => newton_max_modulus(gradient, tau0, cell),
        SignMode::Nonnegative => newton_max_negre(gradient, tau0, cell),
    };
    Ok(Some(tau.rem_euclid(1.0)))
}

fn poly_at(p: &CVector, tau: f64, order: u32) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (l, &c) in p.iter().enumerate() {
        let f = C64::new(0.0, -TAU * l as f64).powu(order);
        acc += c * f * C64::from_polar(1.0, -TAU * l as f64 * tau);
    }
    acc
}

/// Newton ascent on `|G(τ)|²`.
fn newton_max_modulus(g: &CVector, tau0: f64, cell: f64) -> f64 {
    let mut tau = tau0;
    for _ in 0..60 {
        let v = poly_at(g, tau, 0);
        let d1 = poly_at(g, tau, 1);
        let d2 = poly_at(g, tau, 2);
        let h1 = 2.0 * (v.conj() * d1).re;
        let h2 = 2.0 * (d1.norm_sqr() + (v.conj() * d2).re);
        if h1.abs() < 1e-14 || h2 >= 0.0 {
            break;
        }
        let mut step = -h1 / h2;
        if step.abs() > 2.0 * cell {
            step = step.signum() * 2.0 * cell;
        }
        tau = (tau + step).rem_euclid(1.0);
        if step.abs() < 1e-16 {
            break;
        }
    }
    tau
}

/// Newton ascent on `−Re G(τ)`.
fn newton_max_negre(g: &CVector, tau0: f64, cell: f64) -> f64 {
    let mut tau = tau0;
    for _ in 0..60 {
        let d1 = -poly_at(g, tau, 1).re;
        let d2 = -poly_at(g, tau, 2).re;
        if d1.abs() < 1e-14 || d2 >= 0.0 {
            break;
        }
        let mut step = -d1 / d2;
        if step.abs() > 2.0 * cell {
            step = step.signum() * 2.0 * cell;
        }
        tau = (tau + step).rem_euclid(1.0);
        if step.abs() < 1e-16 {
            break;
        }
    }
    tau
}

/// Effective design matrix and target for the coefficient subproblem
/// `min ½‖E c − b‖²` on a fixed support.
fn design(support: &[f64], loss: &LossModel) -> Result<(CMatrix, CVector)> {
    let n = loss.dim();
    let mut at = CMatrix::zeros(n, support.len());
    for (k, &tau) in support.iter().enumerate() {
        at.column_mut(k).copy_from(&atom(tau, n)?);
    }
    Ok(match loss {
        LossModel::Quadratic { z } => (at, z.clone()),
        LossModel::Compressed { a, y } => (a * at, y.clone()),
    })
}

/// Projection onto the complex ℓ1 ball of radius `eta`: simplex projection
/// of the magnitudes, phases untouched.
fn project_l1_complex(c: &mut Vec<C64>, eta: f64) {
    let mags: Vec<f64> = c.iter().map(|v| v.norm()).collect();
    let total: f64 = mags.iter().sum();
    if total <= eta {
        return;
    }
    let theta = simplex_threshold(&mags, eta);
    for (v, &m) in c.iter_mut().zip(mags.iter()) {
        let m_new = (m - theta).max(0.0);
        *v = if m > 0.0 {
            *v * (m_new / m)
        } else {
            C64::new(0.0, 0.0)
        };
    }
}

/// Projection onto `{c real, c ≥ 0, Σc ≤ eta}`.
fn project_simplex_nonneg(c: &mut Vec<C64>, eta: f64) {
    let clamped: Vec<f64> = c.iter().map(|v| v.re.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let vals = if total <= eta {
        clamped
    } else {
        let theta = simplex_threshold(&clamped, eta);
        clamped.iter().map(|&v| (v - theta).max(0.0)).collect()
    };
    for (v, m) in c.iter_mut().zip(vals) {
        *v = C64::new(m, 0.0);
    }
}

/// Threshold θ with `Σ max(v_i − θ, 0) = eta` (sort-based water filling).
fn simplex_threshold(v: &[f64], eta: f64) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &vi) in s.iter().enumerate() {
        cum += vi;
        let cand = (cum - eta) / (k + 1) as f64;
        if vi - cand > 0.0 {
            theta = cand;
        } else {
            break;
        }
    }
    theta
}

fn project(c: &mut Vec<C64>, eta: f64, mode: SignMode) {
    match mode {
        SignMode::Complex => project_l1_complex(c, eta),
        SignMode::Nonnegative => project_simplex_nonneg(c, eta),
    }
}

/// Coefficient update on a fixed support: monotone FISTA on
/// `min ½‖E c − b‖²` over the ℓ1 ball (or the nonnegative simplex).
/// Returns the coefficients and whether the KKT residual converged before
/// the iteration cap.
pub fn constrained_coeff_update(
    support: &[f64],
    loss: &LossModel,
    eta: f64,
    sign_mode: SignMode,
    warm: Option<&[C64]>,
) -> Result<(Vec<C64>, bool)> {
    if support.is_empty() {
        return Err(Error::Domain("empty support".into()));
    }
    let k = support.len();
    if eta <= 0.0 {
        return Ok((vec![C64::new(0.0, 0.0); k], true));
    }
    let (e, b) = design(support, loss)?;
    let gram = e.adjoint() * &e;
    let (gvals, _) = hermitian_eigen(&gram)?;
    let lip = gvals.max().max(1e-12);
    let step = 1.0 / lip;

    let mut c: Vec<C64> = warm
        .map(|w| w.to_vec())
        .unwrap_or_else(|| vec![C64::new(0.0, 0.0); k]);
    project(&mut c, eta, sign_mode);
    let obj = |c: &Vec<C64>| {
        let cv = CVector::from_column_slice(c);
        0.5 * (&e * cv - &b).norm_squared()
    };
    let grad = |c: &Vec<C64>| -> Vec<C64> {
        let cv = CVector::from_column_slice(c);
        let g = e.adjoint() * (&e * cv - &b);
        g.iter().copied().collect()
    };

    let mut best = c.clone();
    let mut best_obj = obj(&c);
    let mut y = c.clone();
    let mut t_acc: f64 = 1.0;
    let mut converged = false;
    for _ in 0..20_000 {
        let gy = grad(&y);
        let mut c_next: Vec<C64> = y
            .iter()
            .zip(gy.iter())
            .map(|(&yi, &gi)| yi - gi * step)
            .collect();
        project(&mut c_next, eta, sign_mode);
        let o = obj(&c_next);
        if o < best_obj {
            best_obj = o;
            best = c_next.clone();
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
        y = c_next
            .iter()
            .zip(c.iter())
            .map(|(&cn, &co)| cn + (cn - co) * ((t_acc - 1.0) / t_next))
            .collect();
        c = c_next;
        t_acc = t_next;

        // fixed-point (KKT) residual at the best iterate
        let gb = grad(&best);
        let mut fp: Vec<C64> = best
            .iter()
            .zip(gb.iter())
            .map(|(&ci, &gi)| ci - gi * step)
            .collect();
        project(&mut fp, eta, sign_mode);
        let res: f64 = best
            .iter()
            .zip(fp.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 + best.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if res <= 1e-10 * scale {
            converged = true;
            break;
        }
    }
    Ok((best, converged))
}

/// Local descent on the locations with coefficients held fixed: gradient
/// steps with backtracking, never accepting an increase.
pub fn local_refine(
    support: &[f64],
    coefficients: &[C64],
    loss: &LossModel,
    steps: usize,
) -> Vec<f64> {
    let n = loss.dim();
    let mut taus: Vec<f64> = support.to_vec();
    let mut current = loss.value(&synth(&taus, coefficients, n));
    for _ in 0..steps {
        let x = synth(&taus, coefficients, n);
        let g = loss.gradient(&x);
        // d loss / dτ_k = Re⟨∇loss, c_k a'(τ_k)⟩
        let grad_tau: Vec<f64> = taus
            .iter()
            .zip(coefficients.iter())
            .map(|(&tau, &c)| {
                let da = atom_derivative(tau, n).expect("tau in range") * c;
                (g.adjoint() * da)[(0, 0)].re
            })
            .collect();
        let gnorm = grad_tau.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-15 {
            break;
        }
        // initial step keeps the largest move within a tenth of 1/n
        let gmax = grad_tau.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut step = 0.1 / (n as f64 * gmax);
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = taus
                .iter()
                .zip(grad_tau.iter())
                .map(|(&t, &gt)| (t - step * gt).rem_euclid(1.0))
                .collect();
            let val = loss.value(&synth(&cand, coefficients, n));
            if val <= current {
                taus = cand;
                current = val;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    taus
}

/// Full ADCG loop: greedy selection, then alternations of coefficient
/// update, pruning and local descent; the outer objective never increases.
pub fn solve(loss: &LossModel, config: &AdcgConfig) -> Result<AdcgSolution> {
    if config.eta < 0.0 {
        return Err(Error::Domain(format!("eta {} < 0", config.eta)));
    }
    let n = loss.dim();
    let mut support: Vec<f64> = Vec::new();
    let mut coeffs: Vec<C64> = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut coeffs_converged = true;
    if config.eta == 0.0 {
        return Ok(AdcgSolution {
            support,
            coefficients: coeffs,
            x: CVector::zeros(n),
            objective_trace: vec![loss.value(&CVector::zeros(n))],
            coeffs_converged,
        });
    }
    let prune_tol = 1e-10 * config.eta;
    let mut prev_obj = loss.value(&CVector::zeros(n));
    let mut outer = 0usize;
    loop {
        let x = synth(&support, &coeffs, n);
        let g = loss.gradient(&x);
        let Some(tau_new) = select_atom(&g, config)? else {
            break;
        };
        support.push(tau_new);
        coeffs.push(C64::new(0.0, 0.0));

        // snapshot so a stalled alternation can never increase the objective
        let snap_support = support.clone();
        let snap_coeffs = coeffs.clone();
        let snap_obj = loss.value(&synth(&support, &coeffs, n));

        let mut inner_obj = snap_obj;
        for _ in 0..config.refine_iters {
            let (c_new, conv) =
                constrained_coeff_update(&support, loss, config.eta, config.sign_mode, Some(&coeffs))?;
            coeffs_converged &= conv;
            coeffs = c_new;
            // prune zero coefficients, support follows
            let keep: Vec<bool> = coeffs.iter().map(|c| c.norm() >= prune_tol).collect();
            support = support
                .iter()
                .zip(keep.iter())
                .filter(|(_, &k)| k)
                .map(|(&t, _)| t)
                .collect();
            coeffs = coeffs
                .iter()
                .zip(keep.iter())
                .filter(|(_, &k)| k)
                .map(|(&c, _)| c)
                .collect();
            if support.is_empty() {
                break;
            }
            support = local_refine(&support, &coeffs, loss, 50);
            let o = loss.value(&synth(&support, &coeffs, n));
            if inner_obj - o < 1e-10 {
                inner_obj = o;
                break;
            }
            inner_obj = o;
        }
        if inner_obj > snap_obj {
            support = snap_support;
            coeffs = snap_coeffs;
            inner_obj = snap_obj;
        }

        trace.push(inner_obj);
        outer += 1;
        let cap = config.max_outer.unwrap_or(2 * support.len() + 20);
        if prev_obj - inner_obj < config.tol_obj * (1.0 + inner_obj.abs()) || outer >= cap {
            break;
        }
        prev_obj = inner_obj;
    }
    let x = synth(&support, &coeffs, n);
    if trace.is_empty() {
        trace.push(loss.value(&x));
    }
    Ok(AdcgSolution {
        support,
        coefficients: coeffs,
        x,
        objective_trace: trace,
        coeffs_converged,
    })
}
