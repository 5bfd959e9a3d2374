//! Flows, coflows, random workload generation and schedule accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{LinkId, Network, NodeId, Path, Role};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoflowError {
    #[error("a coflow needs at least one flow")]
    Empty,
    #[error("flow id {0} appears twice")]
    DuplicateFlowId(usize),
    #[error("flow volume must be positive and finite, got {0}")]
    InvalidVolume(f64),
    #[error("flow {0} starts and ends at the same node")]
    SameEndpoints(usize),
    #[error("{0} is not a host")]
    NotAHost(NodeId),
    #[error("network has fewer than two hosts")]
    TooFewHosts,
    #[error("beta must lie in [0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("invalid coflow fixture: {0}")]
    Fixture(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("flow {0} has a non-positive or non-finite rate")]
    NonPositiveRate(usize),
    #[error("schedule names unknown flow {0}")]
    UnknownFlow(usize),
    #[error("flow {0} is scheduled twice")]
    Duplicate(usize),
    #[error("flow {0} has unsent data but no route")]
    Unscheduled(usize),
    #[error("route of flow {0} does not join its endpoints")]
    EndpointMismatch(usize),
    #[error("{link} carries {load} Gb/s but only {available} is available")]
    CapacityExceeded {
        link: LinkId,
        load: f64,
        available: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: usize,
    pub src: NodeId,
    pub dst: NodeId,
    /// Total data to move, Gb.
    pub volume: f64,
    /// Data still to move, Gb.
    pub residual: f64,
}

impl Flow {
    pub fn new(id: usize, src: NodeId, dst: NodeId, volume: f64) -> Result<Self, CoflowError> {
        if !(volume.is_finite() && volume > 0.0) {
            return Err(CoflowError::InvalidVolume(volume));
        }
        if src == dst {
            return Err(CoflowError::SameEndpoints(id));
        }
        Ok(Self {
            id,
            src,
            dst,
            volume,
            residual: volume,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.residual <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coflow {
    pub id: usize,
    flows: Vec<Flow>,
    /// Arrival time in seconds; zero for offline runs.
    pub arrival_time: f64,
}

impl Coflow {
    pub fn new(id: usize, flows: Vec<Flow>) -> Result<Self, CoflowError> {
        if flows.is_empty() {
            return Err(CoflowError::Empty);
        }
        let mut ids: Vec<usize> = flows.iter().map(|f| f.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CoflowError::DuplicateFlowId(w[0]));
        }
        Ok(Self {
            id,
            flows,
            arrival_time: 0.0,
        })
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn flows_mut(&mut self) -> &mut [Flow] {
        &mut self.flows
    }

    pub fn flow(&self, id: usize) -> Option<&Flow> {
        self.flows.iter().find(|f| f.id == id)
    }

    /// Flows with data left to send.
    pub fn pending(&self) -> impl Iterator<Item = &Flow> {
        self.flows.iter().filter(|f| !f.is_finished())
    }

    pub fn is_finished(&self) -> bool {
        self.flows.iter().all(Flow::is_finished)
    }

    /// Checks that every endpoint is a host of `net`.
    pub fn check_endpoints(&self, net: &Network) -> Result<(), CoflowError> {
        for f in &self.flows {
            for n in [f.src, f.dst] {
                if n.0 >= net.node_count() || net.role(n) != Role::Host {
                    return Err(CoflowError::NotAHost(n));
                }
            }
        }
        Ok(())
    }

    pub fn to_fixture(&self) -> CoflowFixture {
        CoflowFixture {
            flows: self
                .flows
                .iter()
                .map(|f| FlowFixture {
                    src: f.src.0,
                    dst: f.dst.0,
                    volume: f.volume,
                })
                .collect(),
        }
    }
}

/// Golden-test format: `{flows:[{src,dst,volume}]}`. Flow ids follow list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoflowFixture {
    pub flows: Vec<FlowFixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowFixture {
    pub src: usize,
    pub dst: usize,
    pub volume: f64,
}

impl CoflowFixture {
    pub fn from_json(text: &str) -> Result<Self, CoflowError> {
        serde_json::from_str(text).map_err(|e| CoflowError::Fixture(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixture serializes")
    }

    pub fn to_coflow(&self, id: usize) -> Result<Coflow, CoflowError> {
        let flows = self
            .flows
            .iter()
            .enumerate()
            .map(|(i, f)| Flow::new(i, NodeId(f.src), NodeId(f.dst), f.volume))
            .collect::<Result<Vec<_>, _>>()?;
        Coflow::new(id, flows)
    }
}

/// Draws a coflow of `n` flows between distinct random hosts with volumes
/// uniform in `[beta * v_max, v_max]`.
pub fn random_coflow<R: Rng + ?Sized>(
    net: &Network,
    n: usize,
    beta: f64,
    v_max: f64,
    rng: &mut R,
) -> Result<Coflow, CoflowError> {
    if n == 0 {
        return Err(CoflowError::Empty);
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(CoflowError::InvalidBeta(beta));
    }
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(CoflowError::InvalidVolume(v_max));
    }
    let hosts = net.hosts();
    if hosts.len() < 2 {
        return Err(CoflowError::TooFewHosts);
    }
    let lo = beta * v_max;
    let flows = (0..n)
        .map(|id| {
            let src = hosts[rng.random_range(0..hosts.len())];
            let dst = loop {
                let d = hosts[rng.random_range(0..hosts.len())];
                if d != src {
                    break d;
                }
            };
            let mut volume = rng.random_range(lo..=v_max);
            if volume <= 0.0 {
                volume = v_max;
            }
            Flow::new(id, src, dst, volume)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Coflow::new(0, flows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledFlow {
    pub flow_id: usize,
    /// Data the flow must move under this schedule, Gb.
    pub volume: f64,
    pub route: Path,
    /// Allocated rate, Gb/s.
    pub rate: f64,
}

impl ScheduledFlow {
    pub fn completion_time(&self) -> f64 {
        self.volume / self.rate
    }
}

/// A route and a rate for every unfinished flow of a coflow.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub flows: Vec<ScheduledFlow>,
}

impl Schedule {
    pub fn completion_times(&self) -> Vec<f64> {
        self.flows.iter().map(ScheduledFlow::completion_time).collect()
    }

    /// Coflow completion time: the latest flow completion, in seconds.
    pub fn cct(&self) -> f64 {
        self.flows
            .iter()
            .map(ScheduledFlow::completion_time)
            .fold(0.0, f64::max)
    }

    /// Total bandwidth allocated to the coflow, Gb/s.
    pub fn allocated_bandwidth(&self) -> f64 {
        self.flows.iter().map(|f| f.rate).sum()
    }

    /// Mean number of hops over the scheduled routes.
    pub fn avg_route_length(&self) -> f64 {
        if self.flows.is_empty() {
            return 0.0;
        }
        self.flows.iter().map(|f| f.route.hops() as f64).sum::<f64>() / self.flows.len() as f64
    }

    /// Aggregate rate carried by each link.
    pub fn link_loads(&self, link_count: usize) -> Vec<f64> {
        let mut loads = vec![0.0; link_count];
        for f in &self.flows {
            for l in f.route.links() {
                loads[l.0] += f.rate;
            }
        }
        loads
    }

    /// Checks the schedule against the coflow and the network's current
    /// available bandwidth.
    pub fn validate(&self, coflow: &Coflow, net: &Network) -> Result<(), ScheduleError> {
        self.validate_against(coflow, &net.availability())
    }

    /// Checks the schedule against an explicit per-link availability.
    pub fn validate_against(
        &self,
        coflow: &Coflow,
        available: &[f64],
    ) -> Result<(), ScheduleError> {
        let mut seen = Vec::new();
        for f in &self.flows {
            let flow = coflow
                .flow(f.flow_id)
                .ok_or(ScheduleError::UnknownFlow(f.flow_id))?;
            if seen.contains(&f.flow_id) {
                return Err(ScheduleError::Duplicate(f.flow_id));
            }
            seen.push(f.flow_id);
            if !(f.rate.is_finite() && f.rate > 0.0) {
                return Err(ScheduleError::NonPositiveRate(f.flow_id));
            }
            if f.route.src() != flow.src || f.route.dst() != flow.dst {
                return Err(ScheduleError::EndpointMismatch(f.flow_id));
            }
        }
        if let Some(missing) = coflow.pending().find(|fl| !seen.contains(&fl.id)) {
            return Err(ScheduleError::Unscheduled(missing.id));
        }
        for (i, load) in self.link_loads(available.len()).into_iter().enumerate() {
            if load > available[i] + tol::BANDWIDTH {
                return Err(ScheduleError::CapacityExceeded {
                    link: LinkId(i),
                    load,
                    available: available[i],
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::fat_tree;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_hop() -> (Network, Path) {
        let mut net = Network::new();
        let a = net.add_node(Role::Host);
        let s = net.add_node(Role::Tor);
        let b = net.add_node(Role::Host);
        net.add_link(a, s, 10.0).unwrap();
        net.add_link(s, b, 10.0).unwrap();
        let p = Path::from_nodes(&net, vec![a, s, b]).unwrap();
        (net, p)
    }

    fn sched(entries: &[(f64, f64)], route: &Path) -> Schedule {
        Schedule {
            flows: entries
                .iter()
                .enumerate()
                .map(|(i, &(volume, rate))| ScheduledFlow {
                    flow_id: i,
                    volume,
                    route: route.clone(),
                    rate,
                })
                .collect(),
        }
    }

    #[test]
    fn cct_of_single_flow() {
        let (_, p) = two_hop();
        assert_eq!(sched(&[(100.0, 10.0)], &p).cct(), 10.0);
    }

    #[test]
    fn cct_is_the_max() {
        let (_, p) = two_hop();
        let s = sched(&[(100.0, 10.0), (200.0, 5.0)], &p);
        assert_eq!(s.completion_times(), vec![10.0, 40.0]);
        assert_eq!(s.cct(), 40.0);
        assert_eq!(s.allocated_bandwidth(), 15.0);
        assert_eq!(s.avg_route_length(), 2.0);
    }

    #[test]
    fn validator_catches_overload_and_bad_rates() {
        let (net, p) = two_hop();
        let a = p.src();
        let b = p.dst();
        let coflow = Coflow::new(
            0,
            vec![
                Flow::new(0, a, b, 100.0).unwrap(),
                Flow::new(1, a, b, 100.0).unwrap(),
            ],
        )
        .unwrap();
        assert!(sched(&[(100.0, 5.0), (100.0, 5.0)], &p)
            .validate(&coflow, &net)
            .is_ok());
        assert!(matches!(
            sched(&[(100.0, 6.0), (100.0, 5.0)], &p).validate(&coflow, &net),
            Err(ScheduleError::CapacityExceeded { .. })
        ));
        assert_eq!(
            sched(&[(100.0, 0.0), (100.0, 5.0)], &p).validate(&coflow, &net),
            Err(ScheduleError::NonPositiveRate(0))
        );
        assert_eq!(
            sched(&[(100.0, 5.0)], &p).validate(&coflow, &net),
            Err(ScheduleError::Unscheduled(1))
        );
    }

    #[test]
    fn coflow_invariants() {
        assert_eq!(Coflow::new(0, vec![]), Err(CoflowError::Empty));
        let f = Flow::new(3, NodeId(0), NodeId(1), 1.0).unwrap();
        assert_eq!(
            Coflow::new(0, vec![f.clone(), f]),
            Err(CoflowError::DuplicateFlowId(3))
        );
        assert!(Flow::new(0, NodeId(0), NodeId(0), 1.0).is_err());
        assert!(Flow::new(0, NodeId(0), NodeId(1), 0.0).is_err());
    }

    #[test]
    fn random_coflow_volumes_and_endpoints() {
        let net = fat_tree(4, 2, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = random_coflow(&net, 10, 0.7, 1000.0, &mut rng).unwrap();
        assert_eq!(c.flows().len(), 10);
        assert!(c
            .flows()
            .iter()
            .all(|f| (700.0..=1000.0).contains(&f.volume) && f.src != f.dst));
        c.check_endpoints(&net).unwrap();

        let c = random_coflow(&net, 5, 1.0, 1000.0, &mut rng).unwrap();
        assert!(c.flows().iter().all(|f| f.volume == 1000.0));

        let again = |seed| {
            random_coflow(&net, 10, 0.7, 1000.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        };
        assert_eq!(again(3), again(3));
        assert!(random_coflow(&net, 3, 1.5, 1000.0, &mut rng).is_err());
    }

    #[test]
    fn fixture_round_trip() {
        let text = r#"{"flows":[{"src":0,"dst":2,"volume":100.0},{"src":2,"dst":0,"volume":50.5}]}"#;
        let fx = CoflowFixture::from_json(text).unwrap();
        let c = fx.to_coflow(4).unwrap();
        assert_eq!(c.id, 4);
        assert_eq!(c.flows()[1].volume, 50.5);
        assert_eq!(c.to_fixture(), fx);
        assert!(CoflowFixture::from_json(r#"{"flows":[{"src":0}]}"#).is_err());
    }

    proptest! {
        #[test]
        fn cct_is_permutation_invariant_and_scales(
            entries in proptest::collection::vec((1.0f64..1000.0, 0.1f64..10.0), 1..8),
            c in 0.1f64..10.0,
            rot in 0usize..8,
        ) {
            let (_, p) = two_hop();
            let s = sched(&entries, &p);
            let mut rotated = entries.clone();
            let len = rotated.len();
            rotated.rotate_left(rot % len);
            prop_assert_eq!(s.cct(), sched(&rotated, &p).cct());
            let scaled: Vec<_> = entries.iter().map(|&(v, r)| (v * c, r)).collect();
            let expected = s.cct() * c;
            prop_assert!((sched(&scaled, &p).cct() - expected).abs() <= 1e-12 * expected);
        }
    }
}
