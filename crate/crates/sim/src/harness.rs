//! Paired Monte-Carlo trials (proposed vs benchmark) and parameter sweeps.
//!
//! Every trial draws its channel from stream `(master_seed, trial_index)`
//! and the benchmark's random amplitudes from `(master_seed, trial_index |
//! 1 << 63)`, so results depend only on the config and the trial index,
//! never on scheduling or on the other sweep points.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::time::Instant;

use holojcas_core::comms::{rayleigh_channel, Channel};
use holojcas_core::geometry::{build_geometry, ArrayGeometry, SteeringBundle, SystemConfig};
use holojcas_core::numerics::Rng;
use holojcas_core::optimizer::{evaluate_objective, matched_digital, optimize, BeamformerState};
use holojcas_core::sensing::crb;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable capping the worker-pool size.
pub const THREADS_ENV: &str = "HOLO_JCAS_THREADS";

const BENCHMARK_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Benchmark,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Benchmark => "benchmark",
        }
    }
}

/// Figures of merit of one scheme on one channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub rate: f64,
    pub crb_theta: f64,
    pub crb_phi: f64,
    pub crb_theta_full: f64,
    pub crb_phi_full: f64,
    pub weighted_objective: f64,
    /// Zero for the benchmark.
    pub outer_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial_index: u64,
    pub scheme: Scheme,
    pub channel_hash: u64,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
    pub metrics: Option<TrialMetrics>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub state: Option<BeamformerState>,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.metrics.is_some()
    }

    /// Copy with `wall_time` zeroed, for run-to-run comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

/// Hash of the bit patterns of the channel coefficients.
pub fn channel_hash(h: &Channel) -> u64 {
    let mut hasher = DefaultHasher::new();
    for z in h.gains().iter() {
        z.re.to_bits().hash(&mut hasher);
        z.im.to_bits().hash(&mut hasher);
    }
    hasher.finish()
}

pub fn trial_channel(config: &SystemConfig, trial_index: u64) -> Channel {
    rayleigh_channel(
        config.elements,
        &mut Rng::new(config.master_seed, trial_index),
    )
}

/// Random holographic amplitudes with a rate-matched digital beamformer.
pub fn benchmark_solution(
    config: &SystemConfig,
    h: &Channel,
    geometry: &ArrayGeometry,
    rng: &mut Rng,
) -> holojcas_core::Result<BeamformerState> {
    let weights = rng.unit_interval_vec(geometry.elements());
    let w = geometry.beamformer(&weights);
    let digital = matched_digital(h, &w, config.total_power)?;
    Ok(BeamformerState {
        weights,
        digital,
        beamformer: w,
    })
}

/// Rate and both CRB flavours of a finished state.
pub fn measure(
    state: &BeamformerState,
    h: &Channel,
    config: &SystemConfig,
) -> holojcas_core::Result<TrialMetrics> {
    let bundle = SteeringBundle::at_target(config);
    let breakdown = evaluate_objective(state, h, &bundle, config)?;
    let report = crb(
        &bundle,
        &state.beamformer,
        &state.digital,
        config.gamma,
        config.noise_var_radar,
    )?;
    Ok(TrialMetrics {
        rate: breakdown.rate,
        crb_theta: breakdown.crb_theta,
        crb_phi: breakdown.crb_phi,
        crb_theta_full: report.crb_theta_full,
        crb_phi_full: report.crb_phi_full,
        weighted_objective: breakdown.weighted_objective,
        outer_iterations: 0,
        converged: true,
    })
}

fn finish(
    trial_index: u64,
    scheme: Scheme,
    hash: u64,
    start: Instant,
    outcome: holojcas_core::Result<(BeamformerState, TrialMetrics)>,
) -> TrialResult {
    let (metrics, failure, state) = match outcome {
        Ok((state, metrics)) => (Some(metrics), None, Some(state)),
        Err(e) => (None, Some(e.to_string()), None),
    };
    TrialResult {
        trial_index,
        scheme,
        channel_hash: hash,
        wall_time: start.elapsed().as_secs_f64(),
        metrics,
        failure,
        state,
    }
}

/// Runs both schemes on the channel of `trial_index` with a prebuilt
/// geometry. Optimizer errors end up in `failure`, not in the return value.
pub fn run_trial_in(
    config: &SystemConfig,
    geometry: &ArrayGeometry,
    trial_index: u64,
) -> (TrialResult, TrialResult) {
    let h = trial_channel(config, trial_index);
    let hash = channel_hash(&h);

    let start = Instant::now();
    let outcome = optimize(config, &h, geometry).and_then(|(state, trace)| {
        let mut metrics = measure(&state, &h, config)?;
        metrics.outer_iterations = trace.iterations();
        metrics.converged = trace.converged();
        Ok((state, metrics))
    });
    let proposed = finish(trial_index, Scheme::Proposed, hash, start, outcome);

    let start = Instant::now();
    let mut rng = Rng::new(config.master_seed, trial_index | BENCHMARK_STREAM);
    let outcome = benchmark_solution(config, &h, geometry, &mut rng).and_then(|state| {
        let metrics = measure(&state, &h, config)?;
        Ok((state, metrics))
    });
    let benchmark = finish(trial_index, Scheme::Benchmark, hash, start, outcome);

    (proposed, benchmark)
}

pub fn run_trial(config: &SystemConfig, trial_index: u64) -> Result<(TrialResult, TrialResult)> {
    config.validate()?;
    let geometry = build_geometry(config)?;
    Ok(run_trial_in(config, &geometry, trial_index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    RfChains,
    /// Number of elements `M`.
    Aperture,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::RfChains => "rf_chains",
            SweepAxis::Aperture => "aperture",
        }
    }

    /// `base` with the axis field set to `value`, validated.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let bad = |reason| Error::AxisValue {
            axis: self.as_str(),
            value,
            reason,
        };
        let mut config = base.clone();
        match self {
            SweepAxis::SnrDb => {
                if !value.is_finite() {
                    return Err(bad("must be finite"));
                }
                config.set_snr_db(value);
            }
            SweepAxis::RfChains | SweepAxis::Aperture => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(bad("must be a positive integer"));
                }
                if self == SweepAxis::RfChains {
                    config.rf_chains = value as usize;
                } else {
                    config.elements = value as usize;
                }
            }
        }
        config.validate().map_err(|e| match e {
            holojcas_core::Error::InvalidConfig(reason) => bad(reason),
            other => other.into(),
        })?;
        Ok(config)
    }
}

/// Per-(axis value, scheme) aggregate over the successful trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub mean_crb_theta_lin: f64,
    pub mean_crb_phi_lin: f64,
    /// `10 log10` of the linear mean.
    pub mean_crb_theta_db: f64,
    pub mean_crb_phi_db: f64,
    /// Mean of the per-trial dB values.
    pub mean_crb_theta_db_alt: f64,
    pub mean_crb_phi_db_alt: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub n_trials: usize,
    pub points: Vec<SweepPoint>,
    /// Per point, `2 * n_trials` results ordered by trial index with the
    /// proposed result first.
    #[serde(skip)]
    pub trials: Vec<Vec<TrialResult>>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Aggregates the results of one scheme at one axis value.
pub fn aggregate(axis_value: f64, scheme: Scheme, results: &[TrialResult]) -> SweepPoint {
    let ok: Vec<&TrialMetrics> = results
        .iter()
        .filter(|r| r.scheme == scheme)
        .filter_map(|r| r.metrics.as_ref())
        .collect();
    let n_total = results.iter().filter(|r| r.scheme == scheme).count();
    let mean_rate = mean(ok.iter().map(|m| m.rate));
    let std_rate = if ok.len() > 1 {
        let ss: f64 = ok.iter().map(|m| (m.rate - mean_rate).powi(2)).sum();
        (ss / (ok.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mean_theta = mean(ok.iter().map(|m| m.crb_theta));
    let mean_phi = mean(ok.iter().map(|m| m.crb_phi));
    SweepPoint {
        axis_value,
        scheme,
        mean_rate,
        std_rate,
        mean_crb_theta_lin: mean_theta,
        mean_crb_phi_lin: mean_phi,
        mean_crb_theta_db: to_db(mean_theta),
        mean_crb_phi_db: to_db(mean_phi),
        mean_crb_theta_db_alt: mean(ok.iter().map(|m| to_db(m.crb_theta))),
        mean_crb_phi_db_alt: mean(ok.iter().map(|m| to_db(m.crb_phi))),
        n_ok: ok.len(),
        n_failed: n_total - ok.len(),
    }
}

/// Worker count from [`THREADS_ENV`]; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Threads(raw)),
        },
    }
}

/// Sweep with the worker count taken from the environment.
pub fn sweep(
    config: &SystemConfig,
    axis: SweepAxis,
    values: &[f64],
    n_trials: usize,
) -> Result<SweepResult> {
    sweep_with_threads(config, axis, values, n_trials, threads_from_env()?)
}

/// Runs `n_trials` paired trials at every axis value. All points are
/// validated before the first trial starts; `threads = None` uses rayon's
/// default pool size.
pub fn sweep_with_threads(
    config: &SystemConfig,
    axis: SweepAxis,
    values: &[f64],
    n_trials: usize,
    threads: Option<usize>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config("sweep values must not be empty".into()));
    }
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(config, v))
        .collect::<Result<Vec<_>>>()?;
    let geometries = configs
        .iter()
        .map(build_geometry)
        .collect::<holojcas_core::Result<Vec<_>>>()?;

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|p| (0..n_trials as u64).map(move |t| (p, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()?;
    let pairs: Vec<(TrialResult, TrialResult)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| run_trial_in(&configs[p], &geometries[p], t))
            .collect()
    });

    let mut trials = Vec::with_capacity(values.len());
    let mut points = Vec::with_capacity(2 * values.len());
    for (p, chunk) in pairs.chunks(n_trials).enumerate() {
        let results: Vec<TrialResult> = chunk
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        for scheme in [Scheme::Proposed, Scheme::Benchmark] {
            points.push(aggregate(values[p], scheme, &results));
        }
        trials.push(results);
    }
    Ok(SweepResult {
        axis,
        values: values.to_vec(),
        n_trials,
        points,
        trials,
    })
}
