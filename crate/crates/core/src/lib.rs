//! Line-spectrum super resolution through atomic norm minimization.
//!
//! A spike signal `x(t) = Σ c_k δ(t − τ_k)` with locations `τ_k ∈ [0,1)` is
//! observed through its first `n` Fourier moments `x = Σ c_k a(τ_k)`, where
//! `a(τ)` is the complex sinusoid atom. This crate estimates `{τ_k, c_k}`
//! from noisy moment vectors at a resolution below the Rayleigh limit `1/n`:
//!
//! * [`admm`] — a tailored ADMM for atomic norm denoising and exact atomic
//!   norm evaluation via the semidefinite Toeplitz characterization, plus a
//!   multiple-snapshot (MMV) block variant,
//! * [`adcg`] — an alternating descent conditional gradient solver over the
//!   continuous dictionary, with sign constraints and compressed measurements,
//! * [`localization`] — dual-polynomial evaluation, peak localization and
//!   dual-certificate checking,
//! * [`toeplitz`] — PSD projection and the Vandermonde decomposition turning
//!   solver outputs into spike estimates,
//! * [`baselines`] — Prony, Cadzow denoising, root-MUSIC and the Cramér–Rao
//!   bound used as comparison anchors,
//! * [`harness`] — a seeded Monte Carlo benchmark harness with CSV/JSON
//!   output.
//!
//! Trials in the harness are data-parallel (rayon) by default; build with
//! `--no-default-features` for a sequential fallback.

pub mod adcg;
pub mod admm;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod localization;
mod numeric;
pub mod signal;
pub mod toeplitz;

pub use error::{Error, Result};

use nalgebra::{Complex, DMatrix, DVector};

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dense complex vector.
pub type CVector = DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;
