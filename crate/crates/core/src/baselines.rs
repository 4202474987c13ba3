//! Classical line-spectrum estimators — Prony's annihilating filter, Cadzow
//! structured denoising, root-MUSIC — and the Cramér–Rao bound, used as
//! comparison anchors in the benchmark harness.

use crate::localization::amplitudes_ls;
use crate::numeric::poly_roots;
use crate::signal::{NoisyObservation, SpikeSignal, atom, atom_derivative};
use crate::{C64, CMatrix, CVector, Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::TAU;

/// Pencil geometry for the data Hankel matrix `H ∈ ℂ^{L×(n−L+1)}`,
/// `H[i,j] = z_{i+j}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HankelConfig {
    /// Number of Hankel rows; `⌊n/2⌋` when unset.
    pub pencil: Option<usize>,
}

impl HankelConfig {
    /// Resolves the pencil and checks both subspace dimensions leave room
    /// for an `r`-dimensional signal subspace: `r ≤ min(L, n−L+1) − 1`.
    pub fn resolve(&self, n: usize, r: usize) -> Result<usize> {
        let l = self.pencil.unwrap_or(n / 2).max(1);
        if l > n {
            return Err(Error::Domain(format!("pencil {l} exceeds n = {n}")));
        }
        let cols = n - l + 1;
        if r + 1 > l.min(cols) {
            return Err(Error::Domain(format!(
                "rank {r} too large for pencil {l} with n = {n} (need r ≤ min(L, n−L+1) − 1)"
            )));
        }
        Ok(l)
    }
}

/// Hankel lift of `z` with `l` rows.
pub fn hankel(z: &CVector, l: usize) -> CMatrix {
    let cols = z.len() + 1 - l;
    CMatrix::from_fn(l, cols, |i, j| z[i + j])
}

/// Anti-diagonal averaging back onto Hankel structure; returns the
/// generating vector.
fn dehankel(h: &CMatrix) -> CVector {
    let (l, cols) = h.shape();
    let n = l + cols - 1;
    let mut sums = vec![C64::new(0.0, 0.0); n];
    let mut counts = vec![0usize; n];
    for i in 0..l {
        for j in 0..cols {
            sums[i + j] += h[(i, j)];
            counts[i + j] += 1;
        }
    }
    CVector::from_iterator(
        n,
        sums.iter().zip(counts.iter()).map(|(&s, &c)| s / c as f64),
    )
}

fn rank_truncate(h: &CMatrix, r: usize) -> CMatrix {
    let svd = h.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut out = CMatrix::zeros(h.nrows(), h.ncols());
    for k in 0..r.min(svd.singular_values.len()) {
        let uk = u.column(k);
        let vk = vt.row(k);
        out += (uk * vk).scale(svd.singular_values[k]);
    }
    out
}

/// Prony's method: the annihilating filter is the smallest right singular
/// vector of the `(n−r)×(r+1)` Hankel system; its polynomial roots,
/// projected radially to the unit circle, give the locations. Amplitudes by
/// least squares.
pub fn prony(z: &NoisyObservation, r: usize, cfg: &HankelConfig) -> Result<SpikeSignal> {
    if r == 0 {
        return Ok(SpikeSignal::empty());
    }
    let n = z.data.len();
    cfg.resolve(n, r)?;
    if n < 2 * r + 1 {
        return Err(Error::Domain(format!(
            "n = {n} too small for an order-{r} annihilating filter"
        )));
    }
    // rows n−r, columns r+1: each row annihilates the filter
    let h = hankel(&z.data, n - r);
    let svd = h.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let k_min = (0..svd.singular_values.len())
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap();
    let q: Vec<C64> = vt.row(k_min).iter().map(|c| c.conj()).collect();
    let roots = poly_roots(&q)?;
    let taus = dedupe_taus(
        roots
            .iter()
            .map(|w| (w.arg() / TAU).rem_euclid(1.0))
            .collect(),
    );
    amplitudes_ls(z, &taus)
}

/// Cadzow denoising: alternate truncated-SVD rank-`r` projection with
/// anti-diagonal averaging on the `L×(n−L+1)` Hankel lift. Stops after
/// `iters` rounds or when the restored vector moves less than `1e-10`.
pub fn cadzow(z: &NoisyObservation, r: usize, iters: usize, cfg: &HankelConfig) -> Result<CVector> {
    let n = z.data.len();
    let l = cfg.resolve(n, r)?;
    let mut v = z.data.clone();
    for _ in 0..iters {
        let truncated = rank_truncate(&hankel(&v, l), r);
        let restored = dehankel(&truncated);
        let change = (&restored - &v).norm();
        v = restored;
        if change < 1e-10 {
            break;
        }
    }
    Ok(v)
}

/// Root-MUSIC: SVD of the data Hankel matrix, noise-subspace polynomial
/// `Σ_d q_d w^d` with `q_d` the d-th diagonal sum of `E Eᴴ`, and among its
/// roots inside the closed unit disk the `r` of largest modulus (the
/// conjugate-reciprocal partner of each signal root lies outside).
pub fn root_music(z: &NoisyObservation, r: usize, cfg: &HankelConfig) -> Result<SpikeSignal> {
    if r == 0 {
        return Ok(SpikeSignal::empty());
    }
    let n = z.data.len();
    let l = cfg.resolve(n, r)?;
    if l <= r {
        return Err(Error::Domain(format!(
            "pencil {l} leaves no noise subspace for rank {r}"
        )));
    }
    let h = hankel(&z.data, l);
    let svd = h.svd(true, false);
    let u = svd.u.as_ref().expect("svd with u");
    // noise subspace: left singular vectors past the r largest values
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let noise_idx = &order[r..];
    if noise_idx.is_empty() {
        return Err(Error::Domain("empty noise subspace".into()));
    }
    let e = u.select_columns(noise_idx.iter());
    let c = &e * e.adjoint();
    // a(τ)ᴴ E Eᴴ a(τ) = Σ_d q_d w^d on |w| = 1, q_d = Σ_i C[i, i+d];
    // shift by w^{L−1} for an ordinary polynomial of degree 2L−2
    let mut coeffs = vec![C64::new(0.0, 0.0); 2 * l - 1];
    for i in 0..l {
        for j in 0..l {
            coeffs[(l - 1) + j - i] += c[(i, j)];
        }
    }
    let roots = poly_roots(&coeffs)?;
    let mut inside: Vec<C64> = roots.iter().copied().filter(|w| w.norm() <= 1.0).collect();
    if inside.len() < r {
        // numerical double roots can land just outside; fall back to the r
        // roots closest to the circle overall
        inside = roots.clone();
        inside.sort_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()));
        inside.truncate(r);
    } else {
        inside.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
        inside.truncate(r);
    }
    let taus = dedupe_taus(
        inside
            .iter()
            .map(|w| (w.arg() / TAU).rem_euclid(1.0))
            .collect(),
    );
    amplitudes_ls(z, &taus)
}

/// Collapses locations closer than 1e-9 (wrap-aware) so the amplitude
/// system stays well posed when roots coincide numerically.
fn dedupe_taus(mut taus: Vec<f64>) -> Vec<f64> {
    taus.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(taus.len());
    for t in taus {
        if out.iter().all(|&o| crate::signal::wrap_dist(o, t) > 1e-9) {
            out.push(t);
        }
    }
    out
}

/// Cramér–Rao lower bounds for the deterministic sinusoid model, one entry
/// per spike, ordered as in the input signal.
#[derive(Debug, Clone)]
pub struct CrbReport {
    /// Variance lower bound on each `τ_k`.
    pub tau: Vec<f64>,
    /// Variance lower bound on each `Re c_k`.
    pub amp_re: Vec<f64>,
    /// Variance lower bound on each `Im c_k`.
    pub amp_im: Vec<f64>,
}

/// CRB from the Fisher information of `z = Σ c_k a(τ_k) + ε̃` under circular
/// complex Gaussian noise with per-entry variance `σ²`: with `J` the
/// Jacobian of the moment vector in the parameters `{τ_k, Re c_k, Im c_k}`,
/// `F = (2/σ²)·Re(JᴴJ)` and the bounds are the diagonal of `F⁻¹`.
pub fn crb(signal: &SpikeSignal, sigma: f64, n: usize) -> Result<CrbReport> {
    if sigma <= 0.0 {
        return Err(Error::Domain(format!("sigma {sigma} must be positive")));
    }
    let r = signal.len();
    if r == 0 {
        return Err(Error::Domain("empty signal has no Fisher information".into()));
    }
    if 3 * r > n {
        return Err(Error::Conditioning(format!(
            "{} parameters exceed {n} complex observations",
            3 * r
        )));
    }
    let mut j = CMatrix::zeros(n, 3 * r);
    for (k, s) in signal.spikes().iter().enumerate() {
        let a = atom(s.tau, n)?;
        let da = atom_derivative(s.tau, n)?;
        j.column_mut(k).copy_from(&(&da * s.amp));
        j.column_mut(r + k).copy_from(&a);
        j.column_mut(2 * r + k).copy_from(&(&a * C64::new(0.0, 1.0)));
    }
    let jj = j.adjoint() * &j;
    let fisher =
        DMatrix::<f64>::from_fn(3 * r, 3 * r, |p, q| 2.0 / (sigma * sigma) * jj[(p, q)].re);
    let inv = fisher
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Conditioning("singular Fisher matrix".into()))?;
    let diag_ok = (0..3 * r).all(|p| inv[(p, p)].is_finite() && inv[(p, p)] > 0.0);
    if !diag_ok {
        return Err(Error::Conditioning(
            "Fisher inverse has non-positive diagonal".into(),
        ));
    }
    Ok(CrbReport {
        tau: (0..r).map(|k| inv[(k, k)]).collect(),
        amp_re: (0..r).map(|k| inv[(r + k, r + k)]).collect(),
        amp_im: (0..r).map(|k| inv[(2 * r + k, 2 * r + k)]).collect(),
    })
}

/// Closed-form single-tone location bound `6σ²/((2π)²|c|²·n(n²−1))`.
pub fn crb_single_tone(amp: C64, sigma: f64, n: usize) -> f64 {
    let nf = n as f64;
    6.0 * sigma * sigma / (TAU * TAU * amp.norm_sqr() * nf * (nf * nf - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{add_noise, synthesize, wrap_dist};
    use approx::assert_relative_eq;

    fn noiseless(sig: &SpikeSignal, n: usize) -> NoisyObservation {
        add_noise(&synthesize(sig, n), 0.0, 0).unwrap()
    }

    #[test]
    fn prony_single_spike_is_exact() {
        let sig = SpikeSignal::from_pairs(&[(0.37, C64::new(1.5, -0.5))]).unwrap();
        let z = noiseless(&sig, 16);
        let est = prony(&z, 1, &HankelConfig::default()).unwrap();
        assert_eq!(est.len(), 1);
        assert!(wrap_dist(est.spikes()[0].tau, 0.37) < 1e-10);
        assert!((est.spikes()[0].amp - C64::new(1.5, -0.5)).norm() < 1e-10);
    }

    #[test]
    fn prony_zero_rank_is_empty() {
        let z = noiseless(&SpikeSignal::empty(), 8);
        assert!(prony(&z, 0, &HankelConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn prony_recovers_four_separated_spikes() {
        let sig = SpikeSignal::from_pairs(&[
            (0.1, C64::new(1.0, 0.0)),
            (0.3, C64::new(0.0, 1.0)),
            (0.55, C64::new(-1.0, 0.5)),
            (0.85, C64::new(0.7, -0.7)),
        ])
        .unwrap();
        let z = noiseless(&sig, 33);
        let est = prony(&z, 4, &HankelConfig::default()).unwrap();
        assert_eq!(est.len(), 4);
        for s in sig.spikes() {
            let hit = est
                .spikes()
                .iter()
                .find(|e| wrap_dist(e.tau, s.tau) < 1e-8)
                .expect("tau recovered");
            assert!((hit.amp - s.amp).norm() < 1e-8);
        }
    }

    #[test]
    fn hankel_invariants_are_enforced() {
        // r too large for the pencil
        let z = noiseless(&SpikeSignal::empty(), 8);
        assert!(prony(&z, 4, &HankelConfig::default()).is_err());
        assert!(root_music(&z, 4, &HankelConfig { pencil: Some(4) }).is_err());
        // pencil L ≤ r leaves no noise subspace
        assert!(root_music(&z, 3, &HankelConfig { pencil: Some(3) }).is_err());
        assert!(HankelConfig { pencil: Some(9) }.resolve(8, 1).is_err());
    }

    #[test]
    fn cadzow_noiseless_input_is_a_fixed_point() {
        let sig = SpikeSignal::from_pairs(&[
            (0.2, C64::new(1.0, 0.0)),
            (0.7, C64::new(0.5, 0.5)),
        ])
        .unwrap();
        let z = noiseless(&sig, 21);
        let out = cadzow(&z, 2, 10, &HankelConfig::default()).unwrap();
        assert!((out - z.data).norm() < 1e-10);
    }

    #[test]
    fn cadzow_zero_iterations_is_identity() {
        let sig = SpikeSignal::from_pairs(&[(0.4, C64::new(1.0, 0.0))]).unwrap();
        let z = add_noise(&synthesize(&sig, 15), 0.5, 4).unwrap();
        let out = cadzow(&z, 1, 0, &HankelConfig::default()).unwrap();
        assert_eq!(out, z.data);
    }

    #[test]
    fn cadzow_improves_noisy_observations() {
        // σ=0.1, n=101, r=2: denoising should reduce the error in ≥ 90% of
        // seeded trials
        let n = 101;
        let sig = SpikeSignal::from_pairs(&[
            (0.23, C64::new(1.0, 0.0)),
            (0.61, C64::new(-1.0, 0.0)),
        ])
        .unwrap();
        let x = synthesize(&sig, n);
        let mut improved = 0;
        let trials = 200;
        for seed in 0..trials {
            let z = add_noise(&x, 0.1, seed).unwrap();
            let out = cadzow(&z, 2, 30, &HankelConfig::default()).unwrap();
            if (&out - &x).norm() < (&z.data - &x).norm() {
                improved += 1;
            }
        }
        assert!(improved >= trials * 9 / 10, "improved {improved}/{trials}");
    }

    #[test]
    fn cadzow_output_is_numerically_low_rank() {
        let n = 64;
        let sig = SpikeSignal::from_pairs(&[
            (0.2, C64::new(1.0, 0.0)),
            (0.5, C64::new(0.0, 1.0)),
        ])
        .unwrap();
        let x = synthesize(&sig, n);
        // SNR 10 dB: sigma² = ‖x‖²/(n·10)
        let sigma = (x.norm_squared() / (n as f64 * 10.0)).sqrt();
        let z = add_noise(&x, sigma, 8).unwrap();
        let out = cadzow(&z, 2, 25, &HankelConfig::default()).unwrap();
        let h = hankel(&out, n / 2);
        let sv = h.svd(false, false).singular_values;
        let smax = sv.max();
        let tail: f64 = sv.iter().skip(2).map(|s| s * s).sum::<f64>().sqrt();
        assert!(tail < 1e-8 * smax, "rank tail {:e} vs {:e}", tail, smax);
    }

    #[test]
    fn root_music_single_tone_is_exact() {
        // the spectrum |Eᴴa(τ)|² has a double root on the circle, so the
        // attainable location accuracy is O(√ε) even on clean data
        let sig = SpikeSignal::from_pairs(&[(0.289, C64::new(2.0, 1.0))]).unwrap();
        let z = noiseless(&sig, 16);
        let est = root_music(&z, 1, &HankelConfig::default()).unwrap();
        assert_eq!(est.len(), 1);
        assert!(wrap_dist(est.spikes()[0].tau, 0.289) < 1e-6);
    }

    #[test]
    fn root_music_recovers_four_separated_spikes() {
        let sig = SpikeSignal::from_pairs(&[
            (0.05, C64::new(1.0, 0.0)),
            (0.33, C64::new(0.0, -1.0)),
            (0.58, C64::new(0.5, 0.5)),
            (0.9, C64::new(-0.8, 0.0)),
        ])
        .unwrap();
        let z = noiseless(&sig, 33);
        let est = root_music(&z, 4, &HankelConfig::default()).unwrap();
        assert_eq!(est.len(), 4);
        for s in sig.spikes() {
            assert!(est.spikes().iter().any(|e| wrap_dist(e.tau, s.tau) < 1e-8));
        }
    }

    #[test]
    fn subspace_methods_are_global_phase_invariant() {
        let sig = SpikeSignal::from_pairs(&[
            (0.15, C64::new(1.0, 0.3)),
            (0.65, C64::new(-0.5, 1.0)),
        ])
        .unwrap();
        let z = add_noise(&synthesize(&sig, 25), 0.05, 77).unwrap();
        let phase = C64::from_polar(1.0, 1.234);
        let z_rot = NoisyObservation {
            data: z.data.map(|v| v * phase),
            sigma: z.sigma,
            seed: z.seed,
        };
        let cfg = HankelConfig::default();
        for (a, b) in [
            (prony(&z, 2, &cfg).unwrap(), prony(&z_rot, 2, &cfg).unwrap()),
            (root_music(&z, 2, &cfg).unwrap(), root_music(&z_rot, 2, &cfg).unwrap()),
        ] {
            assert_eq!(a.len(), b.len());
            let mut ta = a.taus();
            let mut tb = b.taus();
            ta.sort_by(f64::total_cmp);
            tb.sort_by(f64::total_cmp);
            for (x, y) in ta.iter().zip(tb.iter()) {
                assert!((x - y).abs() < 1e-9);
            }
            // amplitudes rotate with the global phase
            for sa in a.spikes() {
                let sb = b
                    .spikes()
                    .iter()
                    .find(|s| wrap_dist(s.tau, sa.tau) < 1e-6)
                    .unwrap();
                assert!((sb.amp - sa.amp * phase).norm() < 1e-6);
            }
        }
    }

    /// Numerical Fisher matrix by finite differences of the moment map.
    fn crb_tau_fd_oracle(signal: &SpikeSignal, sigma: f64, n: usize) -> Vec<f64> {
        use nalgebra::DMatrix;
        let r = signal.len();
        let h = 1e-6;
        let perturbed = |dk: usize, which: usize, delta: f64| {
            let spikes: Vec<crate::signal::Spike> = signal
                .spikes()
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let mut s = *s;
                    if k == dk {
                        match which {
                            0 => s.tau += delta,
                            1 => s.amp += C64::new(delta, 0.0),
                            _ => s.amp += C64::new(0.0, delta),
                        }
                    }
                    s
                })
                .collect();
            synthesize(&SpikeSignal::new(spikes).unwrap(), n)
        };
        let mut jac: Vec<crate::CVector> = Vec::new();
        for which in 0..3 {
            for k in 0..r {
                let fd = (perturbed(k, which, h) - perturbed(k, which, -h)).unscale(2.0 * h);
                jac.push(fd);
            }
        }
        let p = 3 * r;
        let mut fisher = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let dot: C64 = jac[i].dotc(&jac[j]);
                fisher[(i, j)] = 2.0 / (sigma * sigma) * dot.re;
            }
        }
        let inv = fisher.try_inverse().unwrap();
        (0..r).map(|k| inv[(k, k)]).collect()
    }

    #[test]
    fn crb_single_tone_matches_closed_form() {
        for n in [16usize, 101] {
            let amp = C64::new(1.3, -0.4);
            let sigma = 0.25;
            let sig = SpikeSignal::from_pairs(&[(0.42, amp)]).unwrap();
            let rep = crb(&sig, sigma, n).unwrap();
            let closed = crb_single_tone(amp, sigma, n);
            assert_relative_eq!(rep.tau[0], closed, max_relative = 1e-6);
            // and against the finite-difference Fisher oracle
            let fd = crb_tau_fd_oracle(&sig, sigma, n);
            assert_relative_eq!(rep.tau[0], fd[0], max_relative = 1e-4);
        }
    }

    #[test]
    fn crb_scales_quadratically_in_sigma() {
        let sig = SpikeSignal::from_pairs(&[
            (0.2, C64::new(1.0, 0.0)),
            (0.6, C64::new(0.5, 0.5)),
        ])
        .unwrap();
        let a = crb(&sig, 0.1, 21).unwrap();
        let b = crb(&sig, 0.2, 21).unwrap();
        for (x, y) in a.tau.iter().zip(b.tau.iter()) {
            assert_relative_eq!(y / x, 4.0, max_relative = 1e-10);
        }
        for (x, y) in a.amp_re.iter().zip(b.amp_re.iter()) {
            assert_relative_eq!(y / x, 4.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn crb_well_separated_spikes_decouple() {
        let n = 101;
        let sigma = 0.3;
        let amp = C64::new(1.0, 0.0);
        let pair = SpikeSignal::from_pairs(&[(0.1, amp), (0.6, amp)]).unwrap();
        let rep = crb(&pair, sigma, n).unwrap();
        let single = crb_single_tone(amp, sigma, n);
        for b in &rep.tau {
            assert!((b - single).abs() < 0.01 * single);
        }
    }

    #[test]
    fn crb_tightens_with_more_data() {
        let sig = SpikeSignal::from_pairs(&[(0.3, C64::new(1.0, 0.5))]).unwrap();
        let small = crb(&sig, 0.2, 16).unwrap();
        let large = crb(&sig, 0.2, 64).unwrap();
        assert!(large.tau[0] < small.tau[0]);
        assert!(large.amp_re[0] <= small.amp_re[0] + 1e-15);
    }

    #[test]
    fn crb_rejects_degenerate_inputs() {
        let sig = SpikeSignal::from_pairs(&[(0.3, C64::new(1.0, 0.0))]).unwrap();
        assert!(crb(&sig, 0.0, 16).is_err());
        assert!(crb(&SpikeSignal::empty(), 0.1, 16).is_err());
        // more parameters than samples: 3r > n
        let crowded = SpikeSignal::from_pairs(&[
            (0.1, C64::new(1.0, 0.0)),
            (0.4, C64::new(1.0, 0.0)),
            (0.7, C64::new(1.0, 0.0)),
        ])
        .unwrap();
        assert!(crb(&crowded, 0.1, 8).is_err());
    }
}
