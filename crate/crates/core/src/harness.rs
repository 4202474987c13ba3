//! Seeded Monte Carlo benchmark harness: signal generation, method
//! dispatch, SNR sweeps with per-trial seeds, and CSV/JSON emission.
//!
//! Every trial is a pure function of `(config, trial index)`: the trial seed
//! is `base_seed + trial`, noise comes from a counter-based generator, and
//! aggregation is order-independent, so sweeps parallelize over trials
//! without affecting results.

use crate::admm::{self, AdmmOpts};
use crate::adcg::{self, AdcgConfig, LossModel};
use crate::baselines::{self, HankelConfig};
use crate::localization::{self, DualVector};
use crate::signal::{
    self, NoisyObservation, Spike, SpikeSignal, add_noise, match_spikes, synthesize,
};
use crate::{C64, CMatrix, CVector, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Amplitude sign pattern of the generated spikes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignPattern {
    /// Unit amplitudes with alternating signs.
    Opposite,
    /// Unit positive amplitudes.
    Positive,
    /// Unit magnitude, uniformly random phase.
    RandomPhase,
}

/// Spike layout: `count` spikes with minimal separation `Δ = α/n`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpikeSpec {
    pub count: usize,
    /// Separation parameter; the generated support has `Δ ≥ α/n`.
    pub alpha: f64,
    #[serde(default = "default_sign")]
    pub sign: SignPattern,
}

fn default_sign() -> SignPattern {
    SignPattern::RandomPhase
}

/// Estimation methods the harness can dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// ADMM atomic norm denoising plus dual-polynomial localization.
    AnmAdmm,
    /// Alias of `anm-admm` with any positivity handling disabled; present so
    /// sign-pattern sweeps can name both arms explicitly.
    AnmAdmmPositiveOff,
    /// ADCG over the continuous dictionary with complex coefficients.
    Adcg,
    /// ADCG restricted to nonnegative amplitudes.
    AdcgPositive,
    /// Cadzow structured denoising followed by Prony's method.
    PronyCadzow,
    RootMusic,
    /// Pseudo-method: rows carry the Cramér–Rao location bound instead of an
    /// estimate's error.
    Crb,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::AnmAdmm => "anm-admm",
            Method::AnmAdmmPositiveOff => "anm-admm-positive-off",
            Method::Adcg => "adcg",
            Method::AdcgPositive => "adcg-positive",
            Method::PronyCadzow => "prony-cadzow",
            Method::RootMusic => "root-music",
            Method::Crb => "crb",
        }
    }

    /// Whether the method produces a dual vector to plot.
    pub fn has_dual(&self) -> bool {
        matches!(self, Method::AnmAdmm | Method::AnmAdmmPositiveOff)
    }
}

/// Non-finite SNR values mean "noiseless" and serialize as JSON null so the
/// files stay valid JSON (f64 infinity has no JSON literal).
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Grid variant of [`snr_serde`].
mod snr_grid_serde {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&if x.is_finite() { Some(*x) } else { None })?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}

/// Full experiment description; every field has a resolved value before any
/// trial runs, so records are replayable from the serialized config alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub spikes: SpikeSpec,
    /// SNR grid in dB under the convention `SNR = ‖x‖² / (nσ²)`;
    /// non-finite entries mean noiseless.
    #[serde(with = "snr_grid_serde")]
    pub snr_db: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Constant in the regularization rule `λ = η·σ·√(n log n)`.
    #[serde(default = "default_eta_lambda")]
    pub eta_lambda: f64,
    /// Matching cutoff; defaults to half the nominal separation `α/(2n)`.
    #[serde(default)]
    pub matching_radius: Option<f64>,
    /// Snapshots sharing the support (1 = single measurement vector).
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub admm: AdmmOpts,
}

fn default_trials() -> usize {
    50
}
fn default_eta_lambda() -> f64 {
    1.2
}
fn default_snapshots() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!("n = {} too small", self.n)));
        }
        if self.trials < 1 {
            return Err(Error::Domain("trials must be ≥ 1".into()));
        }
        if self.spikes.alpha <= 0.0 {
            return Err(Error::Domain(format!(
                "alpha {} must be positive",
                self.spikes.alpha
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Domain("methods list is empty".into()));
        }
        if self.spikes.count == 0 {
            return Err(Error::Domain("spike count must be ≥ 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Domain("SNR grid is empty".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::Domain("snapshots must be ≥ 1".into()));
        }
        let delta = self.spikes.alpha / self.n as f64;
        if self.spikes.count as f64 * delta >= 1.0 {
            return Err(Error::Domain(format!(
                "{} spikes at separation {delta} do not fit on the torus",
                self.spikes.count
            )));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.matching_radius
            .unwrap_or(self.spikes.alpha / (2.0 * self.n as f64))
    }

    /// Stable content hash of the resolved config (FNV-1a over canonical
    /// JSON).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// `λ = η·σ·√(n log n)`.
pub fn lambda_rule(eta: f64, sigma: f64, n: usize) -> f64 {
    eta * sigma * ((n as f64) * (n as f64).ln()).sqrt()
}

/// Noise level realizing `SNR = ‖x‖²/(nσ²)` at the given level in dB;
/// zero for a non-finite (noiseless) entry.
pub fn sigma_for_snr(x: &CVector, snr_db: f64, n: usize) -> f64 {
    if !snr_db.is_finite() {
        return 0.0;
    }
    let snr = 10f64.powf(snr_db / 10.0);
    (x.norm_squared() / (n as f64 * snr)).sqrt()
}

/// Draws a support with exact minimal separation at least `α/n` by stick
/// breaking: gaps are `Δ` plus an exponential share of the slack, so no
/// rejection loop is needed and generation is deterministic in the seed.
pub fn generate_signal(spec: &SpikeSpec, n: usize, seed: u64) -> Result<SpikeSignal> {
    let delta = spec.alpha / n as f64;
    let slack = 1.0 - spec.count as f64 * delta;
    if spec.count == 0 || (spec.count > 1 && slack <= 0.0) {
        return Err(Error::Domain(format!(
            "{} spikes at separation {delta} do not fit",
            spec.count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taus: Vec<f64> = if spec.count == 1 {
        vec![rng.gen::<f64>()]
    } else {
        let sticks: Vec<f64> = (0..spec.count)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let total: f64 = sticks.iter().sum();
        let offset = rng.gen::<f64>();
        let mut pos = offset;
        let mut out = Vec::with_capacity(spec.count);
        for s in &sticks {
            out.push(pos.rem_euclid(1.0));
            pos += delta + slack * s / total;
        }
        out
    };
    let spikes = taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let amp = match spec.sign {
                SignPattern::Opposite => C64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0),
                SignPattern::Positive => C64::new(1.0, 0.0),
                SignPattern::RandomPhase => C64::from_polar(1.0, TAU * rng.gen::<f64>()),
            };
            Spike { tau, amp }
        })
        .collect();
    SpikeSignal::new(spikes)
}

/// One executed trial. `seed = base_seed + trial` by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config_hash: String,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub truth: SpikeSignal,
    pub estimate: SpikeSignal,
    pub matched: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub location_mse: f64,
    pub amplitude_mse: f64,
    pub solver_iterations: Option<usize>,
    pub solver_converged: Option<bool>,
    pub wall_time_s: f64,
}

fn spikes_from_parts(support: &[f64], coeffs: &[C64]) -> Result<SpikeSignal> {
    // merge numerically coincident locations so the invariant holds
    let mut merged: Vec<(f64, C64)> = Vec::new();
    for (&tau, &c) in support.iter().zip(coeffs.iter()) {
        match merged
            .iter_mut()
            .find(|(t, _)| signal::wrap_dist(*t, tau) < 1e-12)
        {
            Some((_, acc)) => *acc += c,
            None => merged.push((tau, c)),
        }
    }
    SpikeSignal::from_pairs(&merged)
}

/// Localization threshold used on noisy duals: grid maxima of `|P|` above
/// `1 − ε` count as detected.
const HARNESS_EPSILON: f64 = 1e-2;

fn estimate_anm(
    z: &NoisyObservation,
    lambda: f64,
    opts: &AdmmOpts,
) -> Result<(SpikeSignal, Option<usize>, Option<bool>)> {
    if z.sigma == 0.0 {
        let res = admm::atomic_norm_exact(&z.data, opts)?;
        let taus = localization::localize_support(&res.dual, HARNESS_EPSILON, true)?;
        let est = localization::amplitudes_ls(z, &taus)?;
        Ok((
            est,
            Some(res.report.iterations),
            Some(res.report.converged),
        ))
    } else {
        let res = admm::denoise(z, lambda, opts)?;
        let dual = admm::extract_dual(&z.data, &res.x_hat, lambda)?;
        let taus = localization::localize_support(&dual, HARNESS_EPSILON, true)?;
        let est = localization::amplitudes_ls(z, &taus)?;
        Ok((
            est,
            Some(res.report.iterations),
            Some(res.report.converged),
        ))
    }
}

fn estimate_adcg(
    z: &NoisyObservation,
    eta: f64,
    nonnegative: bool,
) -> Result<(SpikeSignal, Option<usize>, Option<bool>)> {
    let loss = LossModel::Quadratic { z: z.data.clone() };
    let mut cfg = AdcgConfig::new(eta);
    if nonnegative {
        cfg = cfg.nonnegative();
    }
    let sol = adcg::solve(&loss, &cfg)?;
    let est = spikes_from_parts(&sol.support, &sol.coefficients)?;
    Ok((
        est,
        Some(sol.objective_trace.len()),
        Some(sol.coeffs_converged),
    ))
}

/// Runs a single `(trial, method, SNR)` cell. Deterministic: the same
/// arguments reproduce the record bit-for-bit (wall time aside).
pub fn run_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    method: Method,
    snr_db: f64,
) -> Result<TrialRecord> {
    cfg.validate()?;
    let seed = cfg.base_seed + trial as u64;
    let truth = generate_signal(&cfg.spikes, cfg.n, seed)?;
    let x = synthesize(&truth, cfg.n);
    let sigma = sigma_for_snr(&x, snr_db, cfg.n);
    let z = add_noise(&x, sigma, seed)?;
    let lambda = lambda_rule(cfg.eta_lambda, sigma, cfg.n);
    let r = truth.len();

    let started = std::time::Instant::now();
    let (estimate, iterations, converged, crb_bound) = match method {
        Method::AnmAdmm | Method::AnmAdmmPositiveOff => {
            let (e, i, c) = estimate_anm(&z, lambda, &cfg.admm)?;
            (e, i, c, None)
        }
        Method::Adcg => {
            let (e, i, c) = estimate_adcg(&z, truth.total_mass(), false)?;
            (e, i, c, None)
        }
        Method::AdcgPositive => {
            let (e, i, c) = estimate_adcg(&z, truth.total_mass(), true)?;
            (e, i, c, None)
        }
        Method::PronyCadzow => {
            let hk = HankelConfig::default();
            let denoised = baselines::cadzow(&z, r, 30, &hk)?;
            let zd = NoisyObservation {
                data: denoised,
                sigma,
                seed,
            };
            (baselines::prony(&zd, r, &hk)?, None, None, None)
        }
        Method::RootMusic => (
            baselines::root_music(&z, r, &HankelConfig::default())?,
            None,
            None,
            None,
        ),
        Method::Crb => {
            let bound = if sigma > 0.0 {
                let rep = baselines::crb(&truth, sigma, cfg.n)?;
                rep.tau.iter().sum::<f64>() / rep.tau.len() as f64
            } else {
                0.0
            };
            (truth.clone(), None, None, Some(bound))
        }
    };
    let wall_time_s = started.elapsed().as_secs_f64();

    let report = match_spikes(&truth, &estimate, cfg.radius())?;
    let location_mse = crb_bound.unwrap_or(report.location_mse);
    Ok(TrialRecord {
        config_hash: cfg.hash(),
        trial,
        seed,
        method,
        snr_db,
        sigma,
        lambda,
        truth,
        estimate,
        matched: report.pairs.len(),
        misses: report.misses.len(),
        false_alarms: report.false_alarms.len(),
        location_mse,
        amplitude_mse: report.amplitude_mse,
        solver_iterations: iterations,
        solver_converged: converged,
        wall_time_s,
    })
}

/// One aggregated row per `(method, SNR)` cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub trials: usize,
    /// Mean matched-pair location MSE over trials with at least one match
    /// (the Cramér–Rao bound for `crb` rows).
    pub mean_location_mse: f64,
    pub median_location_mse: f64,
    pub detection_rate: f64,
    pub mean_misses: f64,
    pub mean_false_alarms: f64,
    pub mean_wall_time_s: f64,
}

/// Full sweep output: every trial record plus the aggregate table, with the
/// resolved config embedded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
}

fn median(sorted: &mut [f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

/// Runs the full grid `methods × SNRs × trials`. Trials fan out in parallel
/// when the `parallel` feature is on; aggregation is order-independent
/// either way.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let cells: Vec<(Method, f64, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| {
            cfg.snr_db
                .iter()
                .flat_map(move |&s| (0..cfg.trials).map(move |t| (m, s, t)))
        })
        .collect();

    #[cfg(feature = "parallel")]
    let records: Result<Vec<TrialRecord>> = cells
        .par_iter()
        .map(|&(m, s, t)| run_trial(cfg, t, m, s))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let records: Result<Vec<TrialRecord>> = cells
        .iter()
        .map(|&(m, s, t)| run_trial(cfg, t, m, s))
        .collect();
    let records = records?;

    let mut aggregates = Vec::with_capacity(cfg.methods.len() * cfg.snr_db.len());
    for &m in &cfg.methods {
        for &s in &cfg.snr_db {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.method == m && r.snr_db == s)
                .collect();
            let with_matches: Vec<f64> = cell
                .iter()
                .filter(|r| r.matched > 0 || r.method == Method::Crb)
                .map(|r| r.location_mse)
                .collect();
            let mean = if with_matches.is_empty() {
                f64::NAN
            } else {
                with_matches.iter().sum::<f64>() / with_matches.len() as f64
            };
            let mut sorted = with_matches.clone();
            let truth_total: usize = cell.iter().map(|r| r.truth.len()).sum();
            let matched_total: usize = cell.iter().map(|r| r.matched).sum();
            aggregates.push(AggregateRow {
                method: m,
                snr_db: s,
                trials: cell.len(),
                mean_location_mse: mean,
                median_location_mse: median(&mut sorted),
                detection_rate: if truth_total == 0 {
                    1.0
                } else {
                    matched_total as f64 / truth_total as f64
                },
                mean_misses: cell.iter().map(|r| r.misses as f64).sum::<f64>()
                    / cell.len().max(1) as f64,
                mean_false_alarms: cell.iter().map(|r| r.false_alarms as f64).sum::<f64>()
                    / cell.len().max(1) as f64,
                mean_wall_time_s: cell.iter().map(|r| r.wall_time_s).sum::<f64>()
                    / cell.len().max(1) as f64,
            });
        }
    }

    Ok(SweepResult {
        config: cfg.clone(),
        records,
        aggregates,
    })
}

const RECORDS_SCHEMA: &str = "linespec-records v1";
const AGGREGATES_SCHEMA: &str = "linespec-aggregates v1";
const DUALPOLY_SCHEMA: &str = "linespec-dualpoly v1";

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_csv_with_comment<W: Write>(
    mut w: W,
    schema: &str,
    config_json: &str,
    body: impl FnOnce(&mut csv::Writer<&mut W>) -> Result<()>,
) -> Result<()> {
    writeln!(w, "# {schema} config={config_json}")?;
    let mut cw = csv::WriterBuilder::new().from_writer(&mut w);
    body(&mut cw)?;
    cw.flush()?;
    Ok(())
}

impl SweepResult {
    /// Per-trial CSV: schema-versioned comment line carrying the resolved
    /// config, then one RFC-4180 row per record (spike sets as embedded
    /// JSON).
    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<()> {
        let config_json = serde_json::to_string(&self.config)?;
        write_csv_with_comment(w, RECORDS_SCHEMA, &config_json, |cw| {
            cw.write_record([
                "config_hash",
                "trial",
                "seed",
                "method",
                "snr_db",
                "sigma",
                "lambda",
                "truth",
                "estimate",
                "matched",
                "misses",
                "false_alarms",
                "location_mse",
                "amplitude_mse",
                "solver_iterations",
                "solver_converged",
                "wall_time_s",
            ])
            .map_err(csv_err)?;
            for r in &self.records {
                cw.write_record([
                    r.config_hash.clone(),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.method.name().to_string(),
                    r.snr_db.to_string(),
                    r.sigma.to_string(),
                    r.lambda.to_string(),
                    serde_json::to_string(&r.truth)?,
                    serde_json::to_string(&r.estimate)?,
                    r.matched.to_string(),
                    r.misses.to_string(),
                    r.false_alarms.to_string(),
                    r.location_mse.to_string(),
                    r.amplitude_mse.to_string(),
                    r.solver_iterations.map(|v| v.to_string()).unwrap_or_default(),
                    r.solver_converged.map(|v| v.to_string()).unwrap_or_default(),
                    r.wall_time_s.to_string(),
                ])
                .map_err(csv_err)?;
            }
            Ok(())
        })
    }

    /// Aggregate CSV: one row per `(method, SNR)`.
    pub fn write_aggregates_csv<W: Write>(&self, w: W) -> Result<()> {
        let config_json = serde_json::to_string(&self.config)?;
        write_csv_with_comment(w, AGGREGATES_SCHEMA, &config_json, |cw| {
            cw.write_record([
                "method",
                "snr_db",
                "trials",
                "mean_location_mse",
                "median_location_mse",
                "detection_rate",
                "mean_misses",
                "mean_false_alarms",
                "mean_wall_time_s",
            ])
            .map_err(csv_err)?;
            for a in &self.aggregates {
                cw.write_record([
                    a.method.name().to_string(),
                    a.snr_db.to_string(),
                    a.trials.to_string(),
                    a.mean_location_mse.to_string(),
                    a.median_location_mse.to_string(),
                    a.detection_rate.to_string(),
                    a.mean_misses.to_string(),
                    a.mean_false_alarms.to_string(),
                    a.mean_wall_time_s.to_string(),
                ])
                .map_err(csv_err)?;
            }
            Ok(())
        })
    }

    /// JSON mirror of the whole result.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(Error::Serde)
    }
}

/// Dual-polynomial plot data: grid samples of `|P(τ)|` (or the joint
/// `‖P(τ)‖₂` for multiple snapshots) plus spike markers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualPolyTable {
    pub method: Method,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub grid: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub true_taus: Vec<f64>,
    pub estimated_taus: Vec<f64>,
}

impl DualPolyTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let meta = serde_json::json!({
            "method": self.method.name(),
            "snr_db": self.snr_db,
            "true_taus": self.true_taus,
            "estimated_taus": self.estimated_taus,
        })
        .to_string();
        write_csv_with_comment(w, DUALPOLY_SCHEMA, &meta, |cw| {
            cw.write_record(["tau", "magnitude"]).map_err(csv_err)?;
            for (t, m) in self.grid.iter().zip(self.magnitude.iter()) {
                cw.write_record([t.to_string(), m.to_string()])
                    .map_err(csv_err)?;
            }
            Ok(())
        })
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(Error::Serde)
    }
}

/// Gaussian snapshot amplitudes sharing the support of `truth`, stacked as
/// the columns of an `n×T` moment matrix.
fn mmv_observation(truth: &SpikeSignal, n: usize, t: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6d76);
    let mut z = CMatrix::zeros(n, t);
    for col in 0..t {
        let spikes: Vec<Spike> = truth
            .spikes()
            .iter()
            .map(|s| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Spike {
                    tau: s.tau,
                    amp: C64::new(re, im) / 2f64.sqrt(),
                }
            })
            .collect();
        let sig = SpikeSignal::new(spikes).expect("support already valid");
        z.column_mut(col).copy_from(&synthesize(&sig, n));
    }
    z
}

/// Evaluates the dual polynomial of trial 0 at the first SNR of the grid for
/// external plotting. Errors with an unsupported-method error for methods
/// that do not produce a dual vector.
pub fn emit_dual_poly(cfg: &ExperimentConfig, method: Method) -> Result<DualPolyTable> {
    cfg.validate()?;
    if !method.has_dual() {
        return Err(Error::UnsupportedMethod(method.name().into()));
    }
    let snr_db = cfg.snr_db[0];
    let seed = cfg.base_seed;
    let truth = generate_signal(&cfg.spikes, cfg.n, seed)?;
    let x = synthesize(&truth, cfg.n);
    let sigma = sigma_for_snr(&x, snr_db, cfg.n);
    let lambda = lambda_rule(cfg.eta_lambda, sigma, cfg.n);
    let grid_size = localization::DEFAULT_GRID;

    let (magnitude, estimated_taus) = if cfg.snapshots > 1 {
        let z = mmv_observation(&truth, cfg.n, cfg.snapshots, seed);
        // noiseless: a small data-scaled λ keeps the dual (Z − X̂)/λ well
        // conditioned while the bias stays negligible
        let lam = if sigma == 0.0 {
            1e-3 * z.norm()
        } else {
            lambda
        };
        let res = admm::mmv_denoise(&z, lam, &cfg.admm)?;
        let dual = admm::extract_dual_mmv(&z, &res.x_hat, lam)?;
        let mags = localization::eval_dual_norm_mmv(&dual, grid_size)?;
        let taus = localization::localize_support_mmv(&dual, HARNESS_EPSILON, true)?;
        (mags, taus)
    } else {
        let z = add_noise(&x, sigma, seed)?;
        let dual: DualVector = if sigma == 0.0 {
            admm::atomic_norm_exact(&z.data, &cfg.admm)?.dual
        } else {
            let res = admm::denoise(&z, lambda, &cfg.admm)?;
            admm::extract_dual(&z.data, &res.x_hat, lambda)?
        };
        let samples = localization::eval_dual_poly(&dual, grid_size)?;
        let taus = localization::localize_support(&dual, HARNESS_EPSILON, true)?;
        (samples.magnitudes.clone(), taus)
    };

    Ok(DualPolyTable {
        method,
        snr_db,
        grid: (0..grid_size).map(|q| q as f64 / grid_size as f64).collect(),
        magnitude,
        true_taus: truth.taus(),
        estimated_taus,
    })
}

/// One generated trial on disk: the ground truth and its observation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedTrial {
    pub trial: usize,
    pub seed: u64,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub signal: SpikeSignal,
    pub observation: NoisyObservation,
}

/// Writes one JSON file per `(SNR, trial)` into `dir` for offline reuse;
/// re-reading reproduces the vectors bit-exactly. Returns the paths.
pub fn generate(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
        for trial in 0..cfg.trials {
            let seed = cfg.base_seed + trial as u64;
            let signal = generate_signal(&cfg.spikes, cfg.n, seed)?;
            let x = synthesize(&signal, cfg.n);
            let sigma = sigma_for_snr(&x, snr_db, cfg.n);
            let observation = add_noise(&x, sigma, seed)?;
            let gt = GeneratedTrial {
                trial,
                seed,
                snr_db,
                signal,
                observation,
            };
            let path = dir.join(format!("trial_{trial:04}_snr{si}.json"));
            let file = std::fs::File::create(&path)?;
            serde_json::to_writer_pretty(file, &gt)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::wrap_dist;

    fn base_config(methods: &str) -> ExperimentConfig {
        serde_json::from_value(serde_json::json!({
            "n": 33,
            "spikes": { "count": 3, "alpha": 2.0, "sign": "random-phase" },
            "snr_db": [10.0],
            "methods": serde_json::from_str::<serde_json::Value>(methods).unwrap(),
            "trials": 2,
        }))
        .unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = base_config(r#"["prony-cadzow"]"#);
        assert_eq!(cfg.trials, 2);
        assert_eq!(cfg.eta_lambda, 1.2);
        assert_eq!(cfg.snapshots, 1);
        assert!((cfg.radius() - 2.0 / 66.0).abs() < 1e-15);
        cfg.validate().unwrap();

        let mut bad = cfg.clone();
        bad.n = 1;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.methods.clear();
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.spikes.alpha = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.spikes.count = 40; // 40·(2/33) > 1: does not fit on the torus
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.snr_db.clear();
        assert!(bad.validate().is_err());

        // hash is stable and sensitive to content
        assert_eq!(cfg.hash(), base_config(r#"["prony-cadzow"]"#).hash());
        let mut other = cfg.clone();
        other.base_seed = 1;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn sigma_realizes_requested_snr() {
        let sig = SpikeSignal::from_pairs(&[(0.2, C64::new(1.0, 0.5))]).unwrap();
        let x = synthesize(&sig, 21);
        for snr_db in [0.0, 7.0, 20.0] {
            let sigma = sigma_for_snr(&x, snr_db, 21);
            let achieved = x.norm_squared() / (21.0 * sigma * sigma);
            assert!((10.0 * achieved.log10() - snr_db).abs() < 1e-10);
        }
        assert_eq!(sigma_for_snr(&x, f64::INFINITY, 21), 0.0);
        assert_eq!(sigma_for_snr(&x, f64::NAN, 21), 0.0);
    }

    #[test]
    fn generated_supports_respect_the_separation() {
        let spec = SpikeSpec {
            count: 5,
            alpha: 2.5,
            sign: SignPattern::RandomPhase,
        };
        let n = 41;
        for seed in 0..50 {
            let sig = generate_signal(&spec, n, seed).unwrap();
            assert_eq!(sig.len(), 5);
            let taus = sig.taus();
            for i in 0..taus.len() {
                for j in (i + 1)..taus.len() {
                    assert!(
                        wrap_dist(taus[i], taus[j]) >= spec.alpha / n as f64 - 1e-12,
                        "seed {seed}: gap too small"
                    );
                }
            }
            for s in sig.spikes() {
                assert!((s.amp.norm() - 1.0).abs() < 1e-12);
            }
        }
        // deterministic in the seed
        let a = generate_signal(&spec, n, 7).unwrap();
        let b = generate_signal(&spec, n, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

        // sign patterns
        let pos = generate_signal(
            &SpikeSpec { count: 3, alpha: 2.0, sign: SignPattern::Positive },
            33,
            0,
        )
        .unwrap();
        assert!(pos.spikes().iter().all(|s| s.amp == C64::new(1.0, 0.0)));
        let alt = generate_signal(
            &SpikeSpec { count: 3, alpha: 2.0, sign: SignPattern::Opposite },
            33,
            0,
        )
        .unwrap();
        let signs: Vec<f64> = alt.spikes().iter().map(|s| s.amp.re).collect();
        assert_eq!(signs, vec![1.0, -1.0, 1.0]);
    }

    fn strip_time(r: &TrialRecord) -> String {
        let mut r = r.clone();
        r.wall_time_s = 0.0;
        serde_json::to_string(&r).unwrap()
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = base_config(r#"["prony-cadzow", "root-music"]"#);
        for &m in &cfg.methods {
            let a = run_trial(&cfg, 1, m, 10.0).unwrap();
            let b = run_trial(&cfg, 1, m, 10.0).unwrap();
            assert_eq!(strip_time(&a), strip_time(&b));
            assert_eq!(a.seed, cfg.base_seed + 1);
            assert!((a.lambda - lambda_rule(cfg.eta_lambda, a.sigma, cfg.n)).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_convex_solver_is_near_exact() {
        let mut cfg = base_config(r#"["anm-admm"]"#);
        cfg.admm.tol_abs = 1e-9;
        cfg.admm.tol_rel = 1e-8;
        let rec = run_trial(&cfg, 0, Method::AnmAdmm, f64::INFINITY).unwrap();
        assert_eq!(rec.sigma, 0.0);
        assert_eq!(rec.matched, 3);
        assert_eq!(rec.misses, 0);
        assert!(rec.location_mse < 1e-8, "mse {:e}", rec.location_mse);
        assert_eq!(rec.solver_converged, Some(true));
    }

    #[test]
    fn sweep_builds_one_aggregate_row_per_cell() {
        let mut cfg = base_config(r#"["prony-cadzow", "root-music"]"#);
        cfg.snr_db = vec![0.0, 10.0, 20.0];
        cfg.trials = 3;
        let sweep = run_sweep(&cfg).unwrap();
        assert_eq!(sweep.records.len(), 2 * 3 * 3);
        assert_eq!(sweep.aggregates.len(), 6);
        for row in &sweep.aggregates {
            assert_eq!(row.trials, 3);
            assert!(row.detection_rate >= 0.0 && row.detection_rate <= 1.0);
        }
        // higher SNR should not hurt detection for root-MUSIC on this easy grid
        let rate = |snr: f64| {
            sweep
                .aggregates
                .iter()
                .find(|r| r.method == Method::RootMusic && r.snr_db == snr)
                .unwrap()
                .detection_rate
        };
        assert!(rate(20.0) >= rate(0.0));
    }

    #[test]
    fn crb_rows_carry_the_bound() {
        let mut cfg = base_config(r#"["crb"]"#);
        cfg.trials = 2;
        let sweep = run_sweep(&cfg).unwrap();
        assert_eq!(sweep.aggregates.len(), 1);
        let row = &sweep.aggregates[0];
        assert!(row.mean_location_mse > 0.0 && row.mean_location_mse.is_finite());
        for rec in &sweep.records {
            let rep = baselines::crb(&rec.truth, rec.sigma, cfg.n).unwrap();
            let mean_bound = rep.tau.iter().sum::<f64>() / rep.tau.len() as f64;
            assert!((rec.location_mse - mean_bound).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut cfg = base_config(r#"["root-music"]"#);
        cfg.trials = 2;
        let sweep = run_sweep(&cfg).unwrap();

        let mut buf = Vec::new();
        sweep.write_records_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let comment = lines.next().unwrap();
        assert!(comment.starts_with("# linespec-records v1 config="));
        let embedded: ExperimentConfig =
            serde_json::from_str(comment.split_once("config=").unwrap().1).unwrap();
        assert_eq!(embedded.hash(), cfg.hash());
        let body = lines.collect::<Vec<_>>().join("\n");
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), sweep.records.len());
        let truth: SpikeSignal = serde_json::from_str(&rows[0][7]).unwrap();
        assert_eq!(truth.len(), sweep.records[0].truth.len());

        let mut buf = Vec::new();
        sweep.write_aggregates_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# linespec-aggregates v1 config="));

        let mut buf = Vec::new();
        sweep.write_json(&mut buf).unwrap();
        let back: SweepResult = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back.records.len(), sweep.records.len());
        assert_eq!(back.config.hash(), cfg.hash());
    }

    #[test]
    fn generated_trials_round_trip_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base_config(r#"["root-music"]"#);
        cfg.snr_db = vec![10.0, f64::INFINITY];
        cfg.trials = 2;
        let paths = generate(&cfg, dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        for path in &paths {
            let gt: GeneratedTrial =
                serde_json::from_reader(std::fs::File::open(path).unwrap()).unwrap();
            let seed = cfg.base_seed + gt.trial as u64;
            let expect = generate_signal(&cfg.spikes, cfg.n, seed).unwrap();
            assert_eq!(
                serde_json::to_string(&gt.signal).unwrap(),
                serde_json::to_string(&expect).unwrap()
            );
            let x = synthesize(&expect, cfg.n);
            let sigma = sigma_for_snr(&x, gt.snr_db, cfg.n);
            let z = add_noise(&x, sigma, seed).unwrap();
            assert_eq!(gt.observation.data, z.data);
            assert_eq!(gt.observation.data.len(), cfg.n);
        }
    }

    #[test]
    fn dual_poly_emission_certifies_the_truth() {
        let mut cfg = base_config(r#"["anm-admm"]"#);
        cfg.snr_db = vec![f64::INFINITY];
        cfg.admm.tol_abs = 1e-9;
        cfg.admm.tol_rel = 1e-8;
        let table = emit_dual_poly(&cfg, Method::AnmAdmm).unwrap();
        assert_eq!(table.grid.len(), table.magnitude.len());
        let max = table.magnitude.iter().cloned().fold(0.0, f64::max);
        assert!(max <= 1.0 + 1e-3, "sup |P| = {max}");
        assert_eq!(table.estimated_taus.len(), table.true_taus.len());
        for t in &table.true_taus {
            assert!(table.estimated_taus.iter().any(|e| wrap_dist(*e, *t) < 1e-4));
        }
        // methods without a dual vector are rejected
        assert!(matches!(
            emit_dual_poly(&cfg, Method::RootMusic),
            Err(Error::UnsupportedMethod(_))
        ));
        // CSV carries the metadata comment
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("# linespec-dualpoly v1 config="));
    }

    #[test]
    fn mmv_dual_poly_peaks_on_the_shared_support() {
        let mut cfg = base_config(r#"["anm-admm"]"#);
        cfg.n = 21;
        cfg.spikes.count = 2;
        cfg.snr_db = vec![f64::INFINITY];
        cfg.snapshots = 3;
        cfg.admm.tol_abs = 1e-9;
        cfg.admm.tol_rel = 1e-8;
        let table = emit_dual_poly(&cfg, Method::AnmAdmm).unwrap();
        for t in &table.true_taus {
            assert!(
                table.estimated_taus.iter().any(|e| wrap_dist(*e, *t) < 1e-3),
                "true tau {t} not localized"
            );
        }
    }
}
