//! Atoms, spike signals, observation synthesis, noise, PSF equalization and
//! spike-matching metrics.
//!
//! The atom is the complex sinusoid `a(τ) = [1, e^{j2πτ}, …, e^{j2π(n−1)τ}]`
//! and a spike signal `{(τ_k, c_k)}` synthesizes to the moment vector
//! `x = Σ c_k a(τ_k)`. All locations live on the torus `[0,1)` and distances
//! are wrap-around.

use crate::{C64, CVector, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One point mass: location in `[0,1)` and complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    pub tau: f64,
    pub amp: C64,
}

/// A spike signal: distinct locations `τ_k ∈ [0,1)` with complex amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SpikeRepr>", into = "Vec<SpikeRepr>")]
pub struct SpikeSignal {
    spikes: Vec<Spike>,
}

/// Flat serialization row for a spike: `{tau, re, im}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeRepr {
    pub tau: f64,
    pub re: f64,
    pub im: f64,
}

impl From<SpikeSignal> for Vec<SpikeRepr> {
    fn from(s: SpikeSignal) -> Self {
        s.spikes
            .iter()
            .map(|sp| SpikeRepr {
                tau: sp.tau,
                re: sp.amp.re,
                im: sp.amp.im,
            })
            .collect()
    }
}

impl TryFrom<Vec<SpikeRepr>> for SpikeSignal {
    type Error = Error;
    fn try_from(rows: Vec<SpikeRepr>) -> Result<Self> {
        SpikeSignal::new(
            rows.iter()
                .map(|r| Spike {
                    tau: r.tau,
                    amp: C64::new(r.re, r.im),
                })
                .collect(),
        )
    }
}

impl SpikeSignal {
    /// Builds a spike signal, validating that all `tau` are in `[0,1)` and
    /// pairwise distinct.
    pub fn new(spikes: Vec<Spike>) -> Result<Self> {
        for s in &spikes {
            if !(0.0..1.0).contains(&s.tau) {
                return Err(Error::Domain(format!("tau {} outside [0,1)", s.tau)));
            }
        }
        for i in 0..spikes.len() {
            for j in (i + 1)..spikes.len() {
                if spikes[i].tau == spikes[j].tau {
                    return Err(Error::Domain(format!("duplicate tau {}", spikes[i].tau)));
                }
            }
        }
        Ok(Self { spikes })
    }

    pub fn empty() -> Self {
        Self { spikes: Vec::new() }
    }

    /// Convenience constructor from `(tau, amplitude)` pairs.
    pub fn from_pairs(pairs: &[(f64, C64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(tau, amp)| Spike { tau, amp }).collect())
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn len(&self) -> usize {
        self.spikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.spikes.iter().map(|s| s.tau).collect()
    }

    /// Total amplitude mass `Σ |c_k|`, the atomic norm of the synthesis when
    /// the decomposition is the atomic one.
    pub fn total_mass(&self) -> f64 {
        self.spikes.iter().map(|s| s.amp.norm()).sum()
    }
}

/// Noisy moment observation `z = x + ε̃` together with the noise level and
/// the seed that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservationRepr", into = "ObservationRepr")]
pub struct NoisyObservation {
    pub data: CVector,
    pub sigma: f64,
    pub seed: u64,
}

/// Flat serialization of an observation: interleaved re/im array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationRepr {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub data: Vec<f64>,
}

impl From<NoisyObservation> for ObservationRepr {
    fn from(z: NoisyObservation) -> Self {
        let mut data = Vec::with_capacity(2 * z.data.len());
        for v in z.data.iter() {
            data.push(v.re);
            data.push(v.im);
        }
        ObservationRepr {
            n: z.data.len(),
            sigma: z.sigma,
            seed: z.seed,
            data,
        }
    }
}

impl TryFrom<ObservationRepr> for NoisyObservation {
    type Error = Error;
    fn try_from(r: ObservationRepr) -> Result<Self> {
        if r.data.len() != 2 * r.n {
            return Err(Error::Domain(format!(
                "interleaved array has {} entries, expected {}",
                r.data.len(),
                2 * r.n
            )));
        }
        let data = CVector::from_iterator(
            r.n,
            r.data.chunks_exact(2).map(|c| C64::new(c[0], c[1])),
        );
        Ok(NoisyObservation {
            data,
            sigma: r.sigma,
            seed: r.seed,
        })
    }
}

/// Frequency-domain PSF samples `G_l`.
#[derive(Debug, Clone)]
pub struct PsfSpectrum {
    pub g: CVector,
}

/// The spectral atom `a(τ)`: entry `l` is `e^{j2πlτ}`, `l = 0..n−1`.
pub fn atom(tau: f64, n: usize) -> Result<CVector> {
    check_tau(tau)?;
    Ok(CVector::from_fn(n, |l, _| C64::from_polar(1.0, TAU * l as f64 * tau)))
}

/// Entrywise derivative of the atom with respect to `τ`:
/// entry `l` is `j2πl · e^{j2πlτ}`.
pub fn atom_derivative(tau: f64, n: usize) -> Result<CVector> {
    check_tau(tau)?;
    Ok(CVector::from_fn(n, |l, _| {
        C64::new(0.0, TAU * l as f64) * C64::from_polar(1.0, TAU * l as f64 * tau)
    }))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau {tau} outside [0,1)")));
    }
    Ok(())
}

/// Moment vector `x = Σ c_k a(τ_k)` of length `n`. Empty signals synthesize
/// to the zero vector.
pub fn synthesize(signal: &SpikeSignal, n: usize) -> CVector {
    let mut x = CVector::zeros(n);
    for s in signal.spikes() {
        // tau is already validated by the SpikeSignal invariant
        let a = atom(s.tau, n).expect("validated tau");
        x += a * s.amp;
    }
    x
}

/// Adds i.i.d. circular complex Gaussian noise with per-entry variance `σ²`
/// (real and imaginary parts each `σ²/2`).
///
/// Noise is drawn from ChaCha8 keyed by `seed` — a counter-based stream
/// generator, so the same seed replays bit-identically on any platform.
pub fn add_noise(x: &CVector, sigma: f64, seed: u64) -> Result<NoisyObservation> {
    if sigma < 0.0 {
        return Err(Error::Domain(format!("sigma {sigma} < 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = sigma / 2f64.sqrt();
    let data = CVector::from_iterator(
        x.len(),
        x.iter().map(|&v| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            v + C64::new(re * scale, im * scale)
        }),
    );
    Ok(NoisyObservation {
        data,
        sigma,
        seed,
    })
}

/// Equalizes a PSF-shaped observation: `z_l = Y_l / G_l`.
pub fn equalize(y: &CVector, g: &PsfSpectrum) -> Result<NoisyObservation> {
    const TOL: f64 = 1e-12;
    if y.len() != g.g.len() {
        return Err(Error::Domain(format!(
            "length mismatch: y has {}, g has {}",
            y.len(),
            g.g.len()
        )));
    }
    if let Some(bad) = g.g.iter().map(|v| v.norm()).find(|&m| m < TOL) {
        return Err(Error::SingularPsf(bad));
    }
    let data = CVector::from_iterator(y.len(), y.iter().zip(g.g.iter()).map(|(&yv, &gv)| yv / gv));
    Ok(NoisyObservation {
        data,
        sigma: 0.0,
        seed: 0,
    })
}

/// Wrap-around (torus) distance `min_q |a − b + q|`.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Minimal separation `Δ_T = min over distinct pairs of wrap distance`.
/// Returns `+∞` for fewer than two spikes (the infimum over an empty set).
pub fn min_separation(signal: &SpikeSignal) -> f64 {
    let taus = signal.taus();
    let mut best = f64::INFINITY;
    for i in 0..taus.len() {
        for j in (i + 1)..taus.len() {
            best = best.min(wrap_dist(taus[i], taus[j]));
        }
    }
    best
}

/// Minimal separation of a raw location list.
pub fn min_separation_of(taus: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..taus.len() {
        for j in (i + 1)..taus.len() {
            best = best.min(wrap_dist(taus[i], taus[j]));
        }
    }
    best
}

/// One matched pair of a truth/estimate matching.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatchedPair {
    pub true_index: usize,
    pub est_index: usize,
    pub distance: f64,
}

/// Outcome of matching an estimated spike set against the truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    /// Indices of true spikes with no estimate within the radius.
    pub misses: Vec<usize>,
    /// Indices of estimated spikes not matched to any true spike.
    pub false_alarms: Vec<usize>,
    /// Mean squared wrap-around location error over matched pairs.
    pub location_mse: f64,
    /// Mean squared amplitude error `|c_k − ĉ_k|²` over matched pairs.
    pub amplitude_mse: f64,
}

impl MatchReport {
    pub fn detection_rate(&self, truth_count: usize) -> f64 {
        if truth_count == 0 {
            1.0
        } else {
            self.pairs.len() as f64 / truth_count as f64
        }
    }
}

/// Matches estimates to true spikes: maximum-cardinality matching under the
/// cutoff `radius`, minimal total wrap distance among those. Exact bitmask
/// DP over the candidate estimates.
pub fn match_spikes(truth: &SpikeSignal, est: &SpikeSignal, radius: f64) -> Result<MatchReport> {
    if radius <= 0.0 {
        return Err(Error::Domain(format!("radius {radius} <= 0")));
    }
    let ts = truth.spikes();
    let es = est.spikes();

    // Only estimates within the radius of some true spike can be matched.
    let candidates: Vec<usize> = (0..es.len())
        .filter(|&j| ts.iter().any(|t| wrap_dist(t.tau, es[j].tau) <= radius))
        .collect();

    let pairs = if candidates.len() <= 20 {
        match_exact(ts, es, &candidates, radius)
    } else {
        match_greedy(ts, es, radius)
    };

    let matched_true: Vec<usize> = pairs.iter().map(|p| p.true_index).collect();
    let matched_est: Vec<usize> = pairs.iter().map(|p| p.est_index).collect();
    let misses = (0..ts.len()).filter(|i| !matched_true.contains(i)).collect();
    let false_alarms = (0..es.len()).filter(|j| !matched_est.contains(j)).collect();

    let (location_mse, amplitude_mse) = if pairs.is_empty() {
        (0.0, 0.0)
    } else {
        let m = pairs.len() as f64;
        let loc = pairs.iter().map(|p| p.distance * p.distance).sum::<f64>() / m;
        let amp = pairs
            .iter()
            .map(|p| (ts[p.true_index].amp - es[p.est_index].amp).norm_sqr())
            .sum::<f64>()
            / m;
        (loc, amp)
    };

    Ok(MatchReport {
        pairs,
        misses,
        false_alarms,
        location_mse,
        amplitude_mse,
    })
}

fn match_exact(ts: &[Spike], es: &[Spike], cand: &[usize], radius: f64) -> Vec<MatchedPair> {
    // dp over (truth index, bitmask of used candidates) -> (matches, -cost)
    // lexicographically maximized; reconstruct by memoized recursion.
    use std::collections::HashMap;
    fn go(
        i: usize,
        mask: u32,
        ts: &[Spike],
        es: &[Spike],
        cand: &[usize],
        radius: f64,
        memo: &mut HashMap<(usize, u32), (usize, f64, Option<usize>)>,
    ) -> (usize, f64) {
        if i == ts.len() {
            return (0, 0.0);
        }
        if let Some(&(m, c, _)) = memo.get(&(i, mask)) {
            return (m, c);
        }
        // skip truth i
        let (mut best_m, mut best_c) = go(i + 1, mask, ts, es, cand, radius, memo);
        let mut best_choice: Option<usize> = None;
        for (b, &j) in cand.iter().enumerate() {
            if mask & (1 << b) != 0 {
                continue;
            }
            let d = wrap_dist(ts[i].tau, es[j].tau);
            if d > radius {
                continue;
            }
            let (m, c) = go(i + 1, mask | (1 << b), ts, es, cand, radius, memo);
            let (m, c) = (m + 1, c + d);
            if m > best_m || (m == best_m && c < best_c) {
                best_m = m;
                best_c = c;
                best_choice = Some(b);
            }
        }
        memo.insert((i, mask), (best_m, best_c, best_choice));
        (best_m, best_c)
    }

    let mut memo = HashMap::new();
    go(0, 0, ts, es, cand, radius, &mut memo);
    // reconstruct
    let mut pairs = Vec::new();
    let (mut i, mut mask) = (0usize, 0u32);
    while i < ts.len() {
        match memo.get(&(i, mask)).and_then(|&(_, _, ch)| ch) {
            Some(b) => {
                let j = cand[b];
                pairs.push(MatchedPair {
                    true_index: i,
                    est_index: j,
                    distance: wrap_dist(ts[i].tau, es[j].tau),
                });
                mask |= 1 << b;
            }
            None => {}
        }
        i += 1;
    }
    pairs
}

fn match_greedy(ts: &[Spike], es: &[Spike], radius: f64) -> Vec<MatchedPair> {
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..ts.len() {
        for j in 0..es.len() {
            let d = wrap_dist(ts[i].tau, es[j].tau);
            if d <= radius {
                edges.push((d, i, j));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used_t = vec![false; ts.len()];
    let mut used_e = vec![false; es.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in edges {
        if !used_t[i] && !used_e[j] {
            used_t[i] = true;
            used_e[j] = true;
            pairs.push(MatchedPair {
                true_index: i,
                est_index: j,
                distance: d,
            });
        }
    }
    pairs
}
