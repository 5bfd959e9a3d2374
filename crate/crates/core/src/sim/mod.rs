//! Seeded experiment engines: one coflow on a noisy network (offline), and
//! a stream of coflows competing with noise over time (online).

mod metrics;
mod noise;
mod online;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{generate_candidates, mincct, BaselineError, Variant, DEFAULT_K};
use crate::coflow::{random_coflow, Coflow, CoflowError, Schedule, ScheduleError};
use crate::corba::{corba, corba_fast, CorbaError};
use crate::netgraph::{fat_tree, NetError, Network};

pub use metrics::{read_csv, summarize, write_csv, MetricsRecord, Summary, CSV_HEADER};
pub use noise::{draw_noise_flow, inject_static_noise, NoiseFlow, NoiseRates};
pub use online::{run_online, CoflowOutcome, OnlineReport};

/// Random streams drawn from one seed.
pub(crate) mod stream {
    pub const NOISE: u64 = 1;
    pub const COFLOW: u64 = 2;
    pub const ARRIVALS: u64 = 3;
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Corba,
    CorbaFast,
    MincctS,
    MincctM,
    MincctSm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Corba,
        Algorithm::CorbaFast,
        Algorithm::MincctS,
        Algorithm::MincctM,
        Algorithm::MincctSm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Corba => "corba",
            Algorithm::CorbaFast => "corba-fast",
            Algorithm::MincctS => "mincct-s",
            Algorithm::MincctM => "mincct-m",
            Algorithm::MincctSm => "mincct-sm",
        }
    }

    /// Schedules the unfinished flows of `coflow` on the network's current
    /// available bandwidth. `k_paths` only matters for the MinCCT variants.
    pub fn schedule(self, net: &Network, coflow: &Coflow, k_paths: usize) -> Result<Schedule, SchedulingError> {
        let variant = match self {
            Algorithm::Corba => return Ok(corba(net, coflow)?),
            Algorithm::CorbaFast => return Ok(corba_fast(net, coflow)?),
            Algorithm::MincctS => Variant::S,
            Algorithm::MincctM => Variant::M,
            Algorithm::MincctSm => Variant::SM,
        };
        let candidates = generate_candidates(net, coflow, variant, k_paths);
        Ok(mincct(net, coflow, &candidates)?)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let known: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm `{s}` (expected one of {})", known.join(", "))
            })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulingError {
    #[error(transparent)]
    Corba(#[from] CorbaError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

impl SchedulingError {
    /// True when the coflow failed only because bandwidth is short right now.
    pub fn is_capacity_shortage(&self) -> bool {
        match self {
            SchedulingError::Corba(e) => e.is_capacity_shortage(),
            SchedulingError::Baseline(e) => e.is_capacity_shortage(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Coflow(#[from] CoflowError),
    #[error("{algo} failed: {source}")]
    Scheduling {
        algo: Algorithm,
        #[source]
        source: SchedulingError,
    },
    #[error("{algo} produced an infeasible schedule: {source}")]
    Infeasible {
        algo: Algorithm,
        #[source]
        source: ScheduleError,
    },
    #[error("coflow {0} cannot be scheduled even on an idle network")]
    Unschedulable(usize),
    #[error("simulation made no progress after {0} events")]
    Stalled(usize),
}

fn default_k() -> usize {
    4
}
fn default_alpha() -> usize {
    2
}
fn default_capacity() -> f64 {
    10.0
}
fn default_beta() -> f64 {
    0.7
}
fn default_v_max() -> f64 {
    1000.0
}
fn default_k_paths() -> usize {
    DEFAULT_K
}

/// One coflow scheduled on a FatTree carrying static noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfflineConfig {
    pub k: usize,
    pub alpha_over: usize,
    /// Gb/s per link.
    pub link_capacity: f64,
    pub n_flows: usize,
    pub beta: f64,
    /// Gb.
    pub v_max: f64,
    /// Defaults to `alpha_over * k^3`.
    pub noise_count: Option<usize>,
    pub noise: NoiseRates,
    pub k_paths: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            alpha_over: default_alpha(),
            link_capacity: default_capacity(),
            n_flows: 10,
            beta: default_beta(),
            v_max: default_v_max(),
            noise_count: None,
            noise: NoiseRates::default(),
            k_paths: default_k_paths(),
            algorithm: Algorithm::Corba,
            seed: 1,
        }
    }
}

impl OfflineConfig {
    pub fn noise_count(&self) -> usize {
        self.noise_count
            .unwrap_or(self.alpha_over * self.k * self.k * self.k)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_flows == 0 {
            return Err(SimError::Config("n_flows must be at least 1".into()));
        }
        if self.k_paths == 0 {
            return Err(SimError::Config("k_paths must be at least 1".into()));
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(SimError::Config(format!("v_max must be positive, got {}", self.v_max)));
        }
        self.noise.validate()
    }
}

/// The network after noise and the coflow to schedule on it.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineInstance {
    pub net: Network,
    pub coflow: Coflow,
    pub noise: Vec<NoiseFlow>,
}

/// Builds the instance of an offline run. The coflow depends only on the
/// seed and the coflow parameters, not on the noise settings.
pub fn prepare_offline(cfg: &OfflineConfig) -> Result<OfflineInstance, SimError> {
    cfg.validate()?;
    let mut net = fat_tree(cfg.k, cfg.alpha_over, cfg.link_capacity)?;
    let mut noise_rng = rng_for(cfg.seed, stream::NOISE);
    let noise = inject_static_noise(&mut net, cfg.noise_count(), &cfg.noise, &mut noise_rng)?;
    let mut coflow_rng = rng_for(cfg.seed, stream::COFLOW);
    let coflow = random_coflow(&net, cfg.n_flows, cfg.beta, cfg.v_max, &mut coflow_rng)?;
    Ok(OfflineInstance { net, coflow, noise })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRun {
    pub record: MetricsRecord,
    pub schedule: Schedule,
}

/// Runs `algo` on a prepared instance and validates the result.
pub fn run_offline_on(
    instance: &OfflineInstance,
    cfg: &OfflineConfig,
    algo: Algorithm,
) -> Result<OfflineRun, SimError> {
    let start = Instant::now();
    let schedule = algo
        .schedule(&instance.net, &instance.coflow, cfg.k_paths)
        .map_err(|source| SimError::Scheduling { algo, source })?;
    let runtime = start.elapsed().as_secs_f64();
    schedule
        .validate(&instance.coflow, &instance.net)
        .map_err(|source| SimError::Infeasible { algo, source })?;
    Ok(OfflineRun {
        record: MetricsRecord {
            seed: cfg.seed,
            algo,
            k: cfg.k,
            n_flows: cfg.n_flows,
            cct_s: schedule.cct(),
            alloc_gbps: schedule.allocated_bandwidth(),
            avg_hops: schedule.avg_route_length(),
            runtime_s: Some(runtime),
        },
        schedule,
    })
}

pub fn run_offline(cfg: &OfflineConfig) -> Result<MetricsRecord, SimError> {
    let instance = prepare_offline(cfg)?;
    Ok(run_offline_on(&instance, cfg, cfg.algorithm)?.record)
}

/// Coflows arriving over time on a FatTree with Poisson noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineConfig {
    pub k: usize,
    pub alpha_over: usize,
    pub link_capacity: f64,
    /// Coflow arrivals per second.
    pub coflow_rate: f64,
    /// No coflow arrives after this time, s.
    pub cutoff: f64,
    pub flows_per_coflow: usize,
    pub beta: f64,
    pub v_max: f64,
    /// Noise arrivals per second; defaults to `40 (k/10)^3`.
    pub noise_rate: Option<f64>,
    pub noise: NoiseRates,
    /// Waiting time after which a coflow is scheduled ahead of the rest, s.
    pub wait_threshold: f64,
    pub k_paths: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Check link capacities after every event.
    pub debug_checks: bool,
    /// Upper bound on processed events before the run is declared stuck.
    pub max_events: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            k: 10,
            alpha_over: default_alpha(),
            link_capacity: default_capacity(),
            coflow_rate: 0.01,
            cutoff: 1800.0,
            flows_per_coflow: 30,
            beta: default_beta(),
            v_max: default_v_max(),
            noise_rate: None,
            noise: NoiseRates::default(),
            wait_threshold: 100.0,
            k_paths: default_k_paths(),
            algorithm: Algorithm::Corba,
            seed: 1,
            debug_checks: false,
            max_events: 10_000_000,
        }
    }
}

impl OnlineConfig {
    pub fn noise_rate(&self) -> f64 {
        self.noise_rate
            .unwrap_or_else(|| 40.0 * (self.k as f64 / 10.0).powi(3))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.flows_per_coflow == 0 {
            return Err(SimError::Config("flows_per_coflow must be at least 1".into()));
        }
        if !(self.coflow_rate.is_finite() && self.coflow_rate > 0.0) {
            return Err(SimError::Config("coflow_rate must be positive".into()));
        }
        let mu = self.noise_rate();
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(SimError::Config("noise_rate must be non-negative".into()));
        }
        if !(self.cutoff.is_finite() && self.cutoff >= 0.0) {
            return Err(SimError::Config("cutoff must be non-negative".into()));
        }
        if !(self.wait_threshold.is_finite() && self.wait_threshold >= 0.0) {
            return Err(SimError::Config("wait_threshold must be non-negative".into()));
        }
        if self.k_paths == 0 {
            return Err(SimError::Config("k_paths must be at least 1".into()));
        }
        self.noise.validate()
    }
}
