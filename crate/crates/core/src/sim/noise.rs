//! Background traffic: flows on random shortest paths holding a random
//! amount of bandwidth for a random duration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::netgraph::{random_shortest_path, NetError, Network, NodeId, Path};
use crate::tol;

/// Distribution parameters of noise flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseRates {
    /// Gb/s, before clamping to the route's free bandwidth.
    pub rate_min: f64,
    pub rate_max: f64,
    /// Seconds.
    pub duration_min: f64,
    pub duration_max: f64,
}

impl Default for NoiseRates {
    fn default() -> Self {
        Self {
            rate_min: 0.1,
            rate_max: 0.5,
            duration_min: 1.0,
            duration_max: 150.0,
        }
    }
}

impl NoiseRates {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
        if !ok(self.rate_min, self.rate_max) {
            return Err(SimError::Config("noise rate range is invalid".into()));
        }
        if !ok(self.duration_min, self.duration_max) || self.duration_max <= 0.0 {
            return Err(SimError::Config("noise duration range is invalid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFlow {
    pub src: NodeId,
    pub dst: NodeId,
    pub route: Path,
    /// Gb/s.
    pub rate: f64,
    /// Seconds.
    pub start: f64,
    pub duration: f64,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draws one noise flow starting at `start` and commits its bandwidth.
///
/// Returns `None` when the chosen route has no bandwidth left; the draws
/// are consumed either way so later flows do not depend on the outcome.
pub fn draw_noise_flow<R: Rng + ?Sized>(
    net: &mut Network,
    hosts: &[NodeId],
    rates: &NoiseRates,
    start: f64,
    rng: &mut R,
) -> Result<Option<NoiseFlow>, NetError> {
    let si = rng.random_range(0..hosts.len());
    let mut di = rng.random_range(0..hosts.len() - 1);
    if di >= si {
        di += 1;
    }
    let (src, dst) = (hosts[si], hosts[di]);
    let pick: f64 = rng.random();
    let wanted = uniform(rng, rates.rate_min, rates.rate_max);
    let duration = uniform(rng, rates.duration_min, rates.duration_max);
    let route = random_shortest_path(net, src, dst, pick).expect("FatTree hosts are connected");
    let rate = wanted.min(route.bottleneck(|l| net.available(l)));
    if rate <= tol::BANDWIDTH {
        return Ok(None);
    }
    net.allocate_along(&route, rate)?;
    Ok(Some(NoiseFlow {
        src,
        dst,
        route,
        rate,
        start,
        duration,
    }))
}

/// Commits `count` noise flows active at time zero.
pub fn inject_static_noise<R: Rng + ?Sized>(
    net: &mut Network,
    count: usize,
    rates: &NoiseRates,
    rng: &mut R,
) -> Result<Vec<NoiseFlow>, SimError> {
    let hosts = net.hosts();
    if count > 0 && hosts.len() < 2 {
        return Err(SimError::Config("noise needs at least two hosts".into()));
    }
    let mut flows = Vec::with_capacity(count);
    for _ in 0..count {
        if let Some(f) = draw_noise_flow(net, &hosts, rates, 0.0, rng)? {
            flows.push(f);
        }
    }
    Ok(flows)
}
