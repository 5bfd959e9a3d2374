//! CoRBA: solve the relaxation, round each flow onto the widest path under
//! its fractional routing, allocate with OptBA, then improve the slowest
//! flows by local search. CoRBA-fast skips the relaxation and starts from
//! shortest widest paths on the available bandwidth.

use log::warn;
use thiserror::Error;

use crate::coflow::{Coflow, Schedule};
use crate::lpcore::{solve_relaxation, LpError, LpStatus, RelaxedSolution};
use crate::netgraph::{max_capacity_path, shortest_max_capacity_path, Network, Path};
use crate::optba::{optba_schedule, OptbaError, RoutingPlan};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorbaError {
    #[error("coflow has no unfinished flow")]
    Empty,
    #[error("no route with bandwidth left for flow {0}")]
    NoRoute(usize),
    #[error("relaxation routed nothing for flow {0}")]
    CorruptRelaxation(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Allocation(#[from] OptbaError),
}

impl CorbaError {
    /// Whether the error means the network cannot currently carry the
    /// coflow, as opposed to a malformed input.
    pub fn is_capacity_shortage(&self) -> bool {
        matches!(
            self,
            CorbaError::NoRoute(_)
                | CorbaError::Lp(LpError::NotOptimal(LpStatus::Infeasible))
                | CorbaError::Allocation(OptbaError::ZeroAvailable { .. })
        )
    }
}

/// Record of one local search run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    /// Scans of the slowest flows, including the final one that found nothing.
    pub iterations: usize,
    pub accepted: usize,
    /// CCT before the search and after every accepted move.
    pub cct: Vec<f64>,
    pub hit_cap: bool,
    /// Improving moves discarded because the schedule failed validation.
    pub invalid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorbaOutcome {
    /// Absent for CoRBA-fast.
    pub relaxed: Option<RelaxedSolution>,
    /// Schedule before local search.
    pub initial: Schedule,
    pub schedule: Schedule,
    pub trace: SearchTrace,
}

fn pending_volumes(coflow: &Coflow, plan: &RoutingPlan) -> Vec<f64> {
    plan.flow_ids
        .iter()
        .map(|&id| coflow.flow(id).map_or(0.0, |f| f.residual))
        .collect()
}

/// Routes each flow on the widest path when link widths are the absolute
/// fractions of that flow in the relaxed solution.
pub fn round_routes(relaxed: &RelaxedSolution, net: &Network, coflow: &Coflow) -> Result<RoutingPlan, CorbaError> {
    let routes = relaxed
        .flow_ids
        .iter()
        .enumerate()
        .map(|(k, &id)| {
            let f = coflow.flow(id).ok_or(CorbaError::CorruptRelaxation(id))?;
            max_capacity_path(net, f.src, f.dst, |l| relaxed.routing[k][l.0].abs())
                .ok_or(CorbaError::CorruptRelaxation(id))
        })
        .collect::<Result<Vec<Path>, _>>()?;
    Ok(RoutingPlan::new(relaxed.flow_ids.clone(), routes))
}

/// OptBA rates for `plan` on the network's available bandwidth.
pub fn initial_allocation(plan: &RoutingPlan, coflow: &Coflow, net: &Network) -> Result<Schedule, CorbaError> {
    Ok(optba_schedule(plan, &pending_volumes(coflow, plan), &net.availability())?)
}

/// Repeatedly tries to move one of the slowest flows off its congested
/// links. A move is kept when it speeds that flow up without raising the
/// CCT; the first such move restarts the scan.
///
/// `net` supplies the bandwidth available to the coflow; the schedule's own
/// usage is accounted for internally.
pub fn local_search(schedule: &Schedule, net: &Network, coflow: &Coflow) -> (Schedule, SearchTrace) {
    let available = net.availability();
    let ids: Vec<usize> = schedule.flows.iter().map(|f| f.flow_id).collect();
    let volumes: Vec<f64> = schedule.flows.iter().map(|f| f.volume).collect();
    let mut current = schedule.clone();
    let mut trace = SearchTrace {
        cct: vec![current.cct()],
        ..Default::default()
    };
    let cap = 50 * current.flows.len().max(1);

    'scan: loop {
        if trace.iterations >= cap {
            warn!(
                "local search stopped at its cap of {cap} scans (CCT {:.6} s)",
                current.cct()
            );
            trace.hit_cap = true;
            break;
        }
        trace.iterations += 1;
        let cct = current.cct();
        let loads = current.link_loads(available.len());
        let residual: Vec<f64> = available.iter().zip(&loads).map(|(a, l)| a - l).collect();
        let slowest: Vec<usize> = (0..current.flows.len())
            .filter(|&k| current.flows[k].completion_time() >= cct * (1.0 - tol::CT_REL))
            .collect();

        for k in slowest {
            let flow = &current.flows[k];
            let old_ct = flow.completion_time();
            let mut widths = residual.clone();
            for &l in flow.route.links() {
                widths[l.0] = if residual[l.0] <= tol::BANDWIDTH {
                    0.0
                } else {
                    residual[l.0] + flow.rate
                };
            }
            // Links saturated by other flows keep zero width but stay usable:
            // if every path crosses one, take the fewest-hop such path.
            let route = max_capacity_path(net, flow.route.src(), flow.route.dst(), |l| widths[l.0]).or_else(|| {
                max_capacity_path(net, flow.route.src(), flow.route.dst(), |l| {
                    let congested = flow.route.contains_link(l) && residual[l.0] <= tol::BANDWIDTH;
                    if congested || available[l.0] <= tol::BANDWIDTH {
                        0.0
                    } else {
                        1.0
                    }
                })
            });
            let Some(route) = route else {
                continue;
            };
            if route == flow.route {
                continue;
            }
            let mut routes: Vec<Path> = current.flows.iter().map(|f| f.route.clone()).collect();
            routes[k] = route;
            let plan = RoutingPlan::new(ids.clone(), routes);
            let Ok(candidate) = optba_schedule(&plan, &volumes, &available) else {
                continue;
            };
            let new_ct = candidate.flows[k].completion_time();
            if new_ct < old_ct * (1.0 - tol::CT_REL) && candidate.cct() <= cct {
                if candidate.validate_against(coflow, &available).is_err() {
                    trace.invalid += 1;
                    continue;
                }
                current = candidate;
                trace.accepted += 1;
                trace.cct.push(current.cct());
                continue 'scan;
            }
        }
        break;
    }
    (current, trace)
}

fn finish(relaxed: Option<RelaxedSolution>, initial: Schedule, net: &Network, coflow: &Coflow) -> CorbaOutcome {
    let (schedule, trace) = local_search(&initial, net, coflow);
    CorbaOutcome {
        relaxed,
        initial,
        schedule,
        trace,
    }
}

/// Full CoRBA run with intermediate results.
pub fn corba_detailed(net: &Network, coflow: &Coflow) -> Result<CorbaOutcome, CorbaError> {
    if coflow.pending().next().is_none() {
        return Err(CorbaError::Empty);
    }
    let relaxed = solve_relaxation(net, coflow)?;
    let plan = round_routes(&relaxed, net, coflow)?;
    let initial = initial_allocation(&plan, coflow, net)?;
    Ok(finish(Some(relaxed), initial, net, coflow))
}

pub fn corba(net: &Network, coflow: &Coflow) -> Result<Schedule, CorbaError> {
    corba_detailed(net, coflow).map(|o| o.schedule)
}

/// CoRBA-fast with intermediate results.
pub fn corba_fast_detailed(net: &Network, coflow: &Coflow) -> Result<CorbaOutcome, CorbaError> {
    let flows: Vec<_> = coflow.pending().collect();
    if flows.is_empty() {
        return Err(CorbaError::Empty);
    }
    let routes = flows
        .iter()
        .map(|f| shortest_max_capacity_path(net, f.src, f.dst).ok_or(CorbaError::NoRoute(f.id)))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = RoutingPlan::new(flows.iter().map(|f| f.id).collect(), routes);
    let initial = initial_allocation(&plan, coflow, net)?;
    Ok(finish(None, initial, net, coflow))
}

pub fn corba_fast(net: &Network, coflow: &Coflow) -> Result<Schedule, CorbaError> {
    corba_fast_detailed(net, coflow).map(|o| o.schedule)
}
