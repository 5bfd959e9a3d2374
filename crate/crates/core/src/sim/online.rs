//! Event-driven online run.
//!
//! Coflows arrive as a Poisson process and compete with Poisson noise. On
//! every coflow arrival all running coflows are torn down and rescheduled
//! from their residual volumes: coflows that have waited past the threshold
//! go first in arrival order, the rest greedily by smallest CCT, each one
//! consuming bandwidth before the next is computed. Coflows that cannot be
//! scheduled wait. When a coflow finishes, each running coflow in turn may
//! take a new schedule on the freed bandwidth if that does not slow it down,
//! and waiting coflows are retried. Noise never yields bandwidth.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::{debug, warn};
use rand_distr::{Distribution, Exp};

use super::{draw_noise_flow, rng_for, stream, MetricsRecord, NoiseFlow, OnlineConfig, SchedulingError, SimError};
use crate::coflow::{random_coflow, Coflow, Schedule};
use crate::netgraph::{fat_tree, Network, NodeId};

/// What happened to one coflow.
#[derive(Debug, Clone, PartialEq)]
pub struct CoflowOutcome {
    pub id: usize,
    pub arrival: f64,
    pub completion: f64,
    /// `completion - arrival`, s.
    pub cct: f64,
    /// Rate and mean hops of the first schedule the coflow received.
    pub alloc_gbps: f64,
    pub avg_hops: f64,
    /// Total time spent in the waiting queue, s.
    pub waited: f64,
    /// Longest delay between reaching the wait threshold and being scheduled.
    pub privilege_delay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineReport {
    pub record: MetricsRecord,
    /// Coflows that arrived before the cutoff.
    pub arrived: usize,
    /// One entry per finished coflow, by id.
    pub coflows: Vec<CoflowOutcome>,
    pub events: usize,
    pub passes: usize,
    pub scheduling_calls: usize,
    pub runtime_max: f64,
    /// Events after which some link carried more than its capacity.
    /// Counted only with `debug_checks`.
    pub capacity_violations: usize,
    pub noise_flows: usize,
    /// Noise flows whose route had no bandwidth left.
    pub noise_dropped: usize,
    /// Redistribution steps that would have slowed a coflow and were undone.
    pub kept_schedules: usize,
}

impl OnlineReport {
    pub fn max_privilege_delay(&self) -> f64 {
        self.coflows
            .iter()
            .filter_map(|c| c.privilege_delay)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    CoflowArrival(usize),
    NoiseArrival,
    NoiseDeparture(usize),
    WaitTimeout { coflow: usize, epoch: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Active {
    coflow: Coflow,
    schedule: Option<Schedule>,
    waiting_since: Option<f64>,
    epoch: u64,
    privileged: bool,
    checked_alone: bool,
    first: Option<(f64, f64)>,
    waited: f64,
    privilege_delay: Option<f64>,
}

impl Active {
    fn remaining_cct(&self) -> f64 {
        self.schedule.as_ref().map_or(f64::INFINITY, |s| {
            s.flows
                .iter()
                .map(|sf| self.residual(sf.flow_id) / sf.rate)
                .fold(0.0, f64::max)
        })
    }

    fn residual(&self, flow: usize) -> f64 {
        self.coflow.flow(flow).map_or(0.0, |f| f.residual)
    }
}

struct Sim<'a> {
    cfg: &'a OnlineConfig,
    net: Network,
    hosts: Vec<NodeId>,
    now: f64,
    heap: BinaryHeap<Event>,
    seq: u64,
    pending: Vec<Option<Coflow>>,
    arrivals_left: usize,
    active: Vec<Active>,
    noise: Vec<Option<NoiseFlow>>,
    noise_rng: rand_chacha::ChaCha8Rng,
    noise_gap: Option<Exp<f64>>,
    outcomes: Vec<CoflowOutcome>,
    runtimes: Vec<f64>,
    report_passes: usize,
    violations: usize,
    noise_dropped: usize,
    kept_schedules: usize,
}

impl Sim<'_> {
    fn push(&mut self, time: f64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn next_flow_completion(&self) -> Option<f64> {
        self.active
            .iter()
            .filter_map(|a| a.schedule.as_ref().map(|s| (a, s)))
            .flat_map(|(a, s)| s.flows.iter().map(move |sf| self.now + a.residual(sf.flow_id) / sf.rate))
            .min_by(f64::total_cmp)
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        if dt > 0.0 {
            for a in &mut self.active {
                if let Some(s) = &a.schedule {
                    for sf in &s.flows {
                        let f = a.coflow.flows_mut().iter_mut().find(|f| f.id == sf.flow_id).expect("scheduled flow exists");
                        f.residual = (f.residual - sf.rate * dt).max(0.0);
                    }
                }
            }
        }
        self.now = t.max(self.now);
    }

    /// Releases finished flows and returns whether some coflow completed.
    fn finish_flows(&mut self) -> Result<bool, SimError> {
        let now = self.now;
        let mut completed = Vec::new();
        for (idx, a) in self.active.iter_mut().enumerate() {
            let Some(s) = &mut a.schedule else { continue };
            let mut keep = Vec::with_capacity(s.flows.len());
            for sf in s.flows.drain(..) {
                let f = a.coflow.flows_mut().iter_mut().find(|f| f.id == sf.flow_id).expect("scheduled flow exists");
                if f.residual <= 1e-9 * f.volume || now + f.residual / sf.rate <= now {
                    f.residual = 0.0;
                    self.net.release_along(&sf.route, sf.rate)?;
                } else {
                    keep.push(sf);
                }
            }
            s.flows = keep;
            if a.coflow.is_finished() {
                completed.push(idx);
            }
        }
        for &idx in completed.iter().rev() {
            let a = self.active.remove(idx);
            let (alloc_gbps, avg_hops) = a.first.unwrap_or((0.0, 0.0));
            debug!("coflow {} finished at {:.3}", a.coflow.id, now);
            self.outcomes.push(CoflowOutcome {
                id: a.coflow.id,
                arrival: a.coflow.arrival_time,
                completion: now,
                cct: now - a.coflow.arrival_time,
                alloc_gbps,
                avg_hops,
                waited: a.waited,
                privilege_delay: a.privilege_delay,
            });
        }
        Ok(!completed.is_empty())
    }

    fn try_schedule(&mut self, idx: usize) -> Result<Schedule, SchedulingError> {
        let start = Instant::now();
        let result = self
            .cfg
            .algorithm
            .schedule(&self.net, &self.active[idx].coflow, self.cfg.k_paths);
        self.runtimes.push(start.elapsed().as_secs_f64());
        result
    }

    fn commit(&mut self, idx: usize, schedule: Schedule) -> Result<(), SimError> {
        let algo = self.cfg.algorithm;
        schedule
            .validate(&self.active[idx].coflow, &self.net)
            .map_err(|source| SimError::Infeasible { algo, source })?;
        for sf in &schedule.flows {
            self.net.allocate_along(&sf.route, sf.rate)?;
        }
        let now = self.now;
        let threshold = self.cfg.wait_threshold;
        let a = &mut self.active[idx];
        if let Some(since) = a.waiting_since.take() {
            a.waited += now - since;
            a.epoch += 1;
            if a.privileged {
                let delay = (now - (since + threshold)).max(0.0);
                a.privilege_delay = Some(a.privilege_delay.map_or(delay, |d| d.max(delay)));
                a.privileged = false;
            }
        }
        a.first
            .get_or_insert((schedule.allocated_bandwidth(), schedule.avg_route_length()));
        a.schedule = Some(schedule);
        Ok(())
    }

    fn release(&mut self, idx: usize) -> Result<Option<Schedule>, SimError> {
        let Some(s) = self.active[idx].schedule.take() else {
            return Ok(None);
        };
        for sf in &s.flows {
            self.net.release_along(&sf.route, sf.rate)?;
        }
        Ok(Some(s))
    }

    /// Puts a coflow in the waiting queue after a failed attempt.
    fn fail(&mut self, idx: usize, err: SchedulingError) -> Result<(), SimError> {
        let algo = self.cfg.algorithm;
        if !err.is_capacity_shortage() {
            return Err(SimError::Scheduling { algo, source: err });
        }
        if !self.active[idx].checked_alone {
            let mut idle = self.net.clone();
            idle.clear_allocations();
            if algo
                .schedule(&idle, &self.active[idx].coflow, self.cfg.k_paths)
                .is_err()
            {
                return Err(SimError::Unschedulable(self.active[idx].coflow.id));
            }
            self.active[idx].checked_alone = true;
        }
        let now = self.now;
        let a = &mut self.active[idx];
        if a.waiting_since.is_none() {
            a.waiting_since = Some(now);
            a.epoch += 1;
            let (coflow, epoch) = (a.coflow.id, a.epoch);
            self.push(now + self.cfg.wait_threshold, Kind::WaitTimeout { coflow, epoch });
        }
        Ok(())
    }

    /// Schedules `candidates`: privileged ones first in arrival order, then
    /// repeatedly whichever achieves the smallest CCT on what is left.
    fn schedule_in_order(&mut self, candidates: Vec<usize>) -> Result<(), SimError> {
        self.report_passes += 1;
        let (first, mut rest): (Vec<usize>, Vec<usize>) =
            candidates.into_iter().partition(|&i| self.active[i].privileged);
        for idx in first {
            match self.try_schedule(idx) {
                Ok(s) => self.commit(idx, s)?,
                Err(e) => self.fail(idx, e)?,
            }
        }
        while !rest.is_empty() {
            let mut best: Option<(usize, Schedule)> = None;
            let mut failed = Vec::new();
            for &idx in &rest {
                match self.try_schedule(idx) {
                    Ok(s) => {
                        if best.as_ref().is_none_or(|(_, b)| s.cct() < b.cct()) {
                            best = Some((idx, s));
                        }
                    }
                    Err(e) => failed.push((idx, e)),
                }
            }
            for (idx, e) in failed {
                self.fail(idx, e)?;
                rest.retain(|&i| i != idx);
            }
            let Some((idx, s)) = best else { break };
            self.commit(idx, s)?;
            rest.retain(|&i| i != idx);
        }
        Ok(())
    }

    fn full_pass(&mut self) -> Result<(), SimError> {
        for idx in 0..self.active.len() {
            self.release(idx)?;
        }
        self.schedule_in_order((0..self.active.len()).collect())
    }

    fn waiting_pass(&mut self) -> Result<(), SimError> {
        let waiting: Vec<usize> = (0..self.active.len())
            .filter(|&i| self.active[i].schedule.is_none())
            .collect();
        if waiting.is_empty() {
            return Ok(());
        }
        self.schedule_in_order(waiting)
    }

    /// Offers freed bandwidth to running coflows, fastest-finishing first.
    fn redistribute(&mut self) -> Result<(), SimError> {
        let mut order: Vec<(f64, usize)> = (0..self.active.len())
            .filter(|&i| self.active[i].schedule.is_some())
            .map(|i| (self.active[i].remaining_cct(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (old_cct, idx) in order {
            let old = self.release(idx)?.expect("running coflow has a schedule");
            match self.try_schedule(idx) {
                Ok(s) if s.cct() <= old_cct => self.commit(idx, s)?,
                _ => {
                    self.kept_schedules += 1;
                    self.commit(idx, old)?;
                }
            }
        }
        Ok(())
    }

    fn work_remains(&self) -> bool {
        self.arrivals_left > 0 || !self.active.is_empty()
    }

    fn handle(&mut self, kind: Kind) -> Result<(), SimError> {
        match kind {
            Kind::CoflowArrival(id) => {
                let mut coflow = self.pending[id].take().expect("each coflow arrives once");
                coflow.arrival_time = self.now;
                self.arrivals_left -= 1;
                self.active.push(Active {
                    coflow,
                    schedule: None,
                    waiting_since: None,
                    epoch: 0,
                    privileged: false,
                    checked_alone: false,
                    first: None,
                    waited: 0.0,
                    privilege_delay: None,
                });
                self.full_pass()?;
            }
            Kind::NoiseArrival => {
                match draw_noise_flow(&mut self.net, &self.hosts, &self.cfg.noise, self.now, &mut self.noise_rng)? {
                    Some(f) => {
                        let end = self.now + f.duration;
                        self.noise.push(Some(f));
                        self.push(end, Kind::NoiseDeparture(self.noise.len() - 1));
                    }
                    None => self.noise_dropped += 1,
                }
                if self.work_remains() {
                    if let Some(gap) = self.noise_gap {
                        let t = self.now + gap.sample(&mut self.noise_rng);
                        self.push(t, Kind::NoiseArrival);
                    }
                }
            }
            Kind::NoiseDeparture(i) => {
                let f = self.noise[i].take().expect("noise departs once");
                self.net.release_along(&f.route, f.rate)?;
                self.waiting_pass()?;
            }
            Kind::WaitTimeout { coflow, epoch } => {
                let hit = self
                    .active
                    .iter_mut()
                    .find(|a| a.coflow.id == coflow && a.epoch == epoch && a.waiting_since.is_some());
                if let Some(a) = hit {
                    a.privileged = true;
                    self.full_pass()?;
                }
            }
        }
        Ok(())
    }
}

/// Runs the online simulation until every arriving coflow has finished.
pub fn run_online(cfg: &OnlineConfig) -> Result<OnlineReport, SimError> {
    cfg.validate()?;
    let net = fat_tree(cfg.k, cfg.alpha_over, cfg.link_capacity)?;

    let mut arrival_rng = rng_for(cfg.seed, stream::ARRIVALS);
    let gap = Exp::new(cfg.coflow_rate).map_err(|e| SimError::Config(e.to_string()))?;
    let mut times = Vec::new();
    let mut t = gap.sample(&mut arrival_rng);
    while t <= cfg.cutoff {
        times.push(t);
        t += gap.sample(&mut arrival_rng);
    }
    let mut coflow_rng = rng_for(cfg.seed, stream::COFLOW);
    let pending = (0..times.len())
        .map(|id| {
            let mut c = random_coflow(&net, cfg.flows_per_coflow, cfg.beta, cfg.v_max, &mut coflow_rng)?;
            c.id = id;
            Ok(Some(c))
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let mu = cfg.noise_rate();
    let noise_gap = (mu > 0.0)
        .then(|| Exp::new(mu).map_err(|e| SimError::Config(e.to_string())))
        .transpose()?;
    let mut sim = Sim {
        cfg,
        hosts: net.hosts(),
        net,
        now: 0.0,
        heap: BinaryHeap::new(),
        seq: 0,
        arrivals_left: pending.len(),
        pending,
        active: Vec::new(),
        noise: Vec::new(),
        noise_rng: rng_for(cfg.seed, stream::NOISE),
        noise_gap,
        outcomes: Vec::new(),
        runtimes: Vec::new(),
        report_passes: 0,
        violations: 0,
        noise_dropped: 0,
        kept_schedules: 0,
    };
    for (id, &t) in times.iter().enumerate() {
        sim.push(t, Kind::CoflowArrival(id));
    }
    if let Some(gap) = sim.noise_gap {
        let t = gap.sample(&mut sim.noise_rng);
        sim.push(t, Kind::NoiseArrival);
    }

    let mut events = 0usize;
    while sim.work_remains() {
        if events >= cfg.max_events {
            return Err(SimError::Stalled(events));
        }
        events += 1;
        let next_event = sim.heap.peek().map(|e| e.time);
        let next_flow = sim.next_flow_completion();
        let flow_first = match (next_flow, next_event) {
            (Some(f), Some(e)) => f <= e,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => return Err(SimError::Stalled(events)),
        };
        if flow_first {
            sim.advance(next_flow.expect("checked"));
            if sim.finish_flows()? {
                sim.redistribute()?;
                sim.waiting_pass()?;
            }
        } else {
            let ev = sim.heap.pop().expect("peeked");
            sim.advance(ev.time);
            sim.handle(ev.kind)?;
        }
        if cfg.debug_checks && !sim.net.capacity_violations().is_empty() {
            warn!("capacity exceeded at t={:.6}", sim.now);
            sim.violations += 1;
        }
    }

    sim.outcomes.sort_by_key(|o| o.id);
    let n = sim.outcomes.len().max(1) as f64;
    let mean = |f: fn(&CoflowOutcome) -> f64| sim.outcomes.iter().map(f).sum::<f64>() / n;
    let runtime_mean = (!sim.runtimes.is_empty())
        .then(|| sim.runtimes.iter().sum::<f64>() / sim.runtimes.len() as f64);
    let record = MetricsRecord {
        seed: cfg.seed,
        algo: cfg.algorithm,
        k: cfg.k,
        n_flows: cfg.flows_per_coflow,
        cct_s: mean(|o| o.cct),
        alloc_gbps: mean(|o| o.alloc_gbps),
        avg_hops: mean(|o| o.avg_hops),
        runtime_s: runtime_mean,
    };
    Ok(OnlineReport {
        record,
        arrived: times.len(),
        events,
        passes: sim.report_passes,
        scheduling_calls: sim.runtimes.len(),
        runtime_max: sim.runtimes.iter().copied().fold(0.0, f64::max),
        capacity_violations: sim.violations,
        noise_flows: sim.noise.len(),
        noise_dropped: sim.noise_dropped,
        kept_schedules: sim.kept_schedules,
        coflows: sim.outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{prepare_offline, run_offline_on, Algorithm, OfflineConfig};
    use crate::tol;

    fn small(algo: Algorithm, seed: u64) -> OnlineConfig {
        OnlineConfig {
            k: 4,
            coflow_rate: 0.05,
            cutoff: 200.0,
            flows_per_coflow: 10,
            algorithm: algo,
            seed,
            debug_checks: true,
            ..Default::default()
        }
    }

    #[test]
    fn single_coflow_without_noise_matches_offline() {
        // Arrivals are spaced far apart, so the first coflow runs alone.
        let mut cfg = small(Algorithm::Corba, 11);
        cfg.coflow_rate = 1e-6;
        cfg.cutoff = 1e7;
        cfg.noise_rate = Some(0.0);
        let report = run_online(&cfg).unwrap();
        let first = &report.coflows[0];
        assert!(report.coflows.get(1).is_none_or(|c| c.arrival > first.completion));

        let off = OfflineConfig {
            k: 4,
            n_flows: 10,
            noise_count: Some(0),
            seed: 11,
            ..Default::default()
        };
        let inst = prepare_offline(&off).unwrap();
        let run = run_offline_on(&inst, &off, Algorithm::Corba).unwrap();
        // Rescheduling after a flow finishes is accepted only if it is no
        // slower, so the offline CCT is an upper bound.
        assert!(first.cct <= run.record.cct_s * (1.0 + 1e-9));
        assert!(tol::rel_diff(first.alloc_gbps, run.record.alloc_gbps) <= 1e-12);
    }

    #[test]
    fn two_identical_coflows_finish_in_scheduling_order() {
        let cfg = OnlineConfig {
            noise_rate: Some(0.0),
            ..small(Algorithm::CorbaFast, 2)
        };
        let report = run_online(&cfg).unwrap();
        assert!(!report.coflows.is_empty());
        assert_eq!(report.capacity_violations, 0);
    }

    #[test]
    fn small_runs_complete_without_violations() {
        for algo in [Algorithm::CorbaFast, Algorithm::MincctSm] {
            let report = run_online(&small(algo, 4)).unwrap();
            assert!(!report.coflows.is_empty());
            assert_eq!(report.capacity_violations, 0);
            assert!(report.coflows.iter().all(|c| c.cct > 0.0));
            assert_eq!(report.max_privilege_delay(), 0.0);
            let again = run_online(&small(algo, 4)).unwrap();
            assert_eq!(again.coflows, report.coflows);
        }
    }
}
