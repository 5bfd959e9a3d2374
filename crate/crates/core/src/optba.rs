//! Optimal bandwidth allocation for flows whose routes are fixed.
//!
//! Each link splits its available bandwidth among the flows crossing it in
//! proportion to their volumes, and a flow receives the smallest share it
//! is offered along its route. Every flow crossing the most loaded link
//! (largest `sum V / B`) then finishes at the same moment, which is the
//! least achievable completion time for these routes.

use thiserror::Error;

use crate::coflow::{Schedule, ScheduledFlow};
use crate::lpcore::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::netgraph::{LinkId, Path};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptbaError {
    #[error("flow {flow} is routed through {link}, which has no bandwidth left")]
    ZeroAvailable { flow: usize, link: LinkId },
    #[error("flow {0} has an invalid volume")]
    InvalidVolume(usize),
    #[error("{routes} routes but {volumes} volumes")]
    LengthMismatch { routes: usize, volumes: usize },
    #[error("route of flow {flow} uses {link}, outside the availability vector")]
    UnknownLink { flow: usize, link: LinkId },
}

/// One route per flow, in a fixed flow order.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingPlan {
    pub flow_ids: Vec<usize>,
    pub routes: Vec<Path>,
}

impl RoutingPlan {
    pub fn new(flow_ids: Vec<usize>, routes: Vec<Path>) -> Self {
        assert_eq!(flow_ids.len(), routes.len(), "one route per flow");
        Self { flow_ids, routes }
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Whether flow `k` (by position) is routed over `link`.
    pub fn uses(&self, k: usize, link: LinkId) -> bool {
        self.routes[k].contains_link(link)
    }
}

/// Sum of the volumes crossing each link. Flows with zero volume are ignored.
fn link_demand(plan: &RoutingPlan, volumes: &[f64], available: &[f64]) -> Result<Vec<f64>, OptbaError> {
    if plan.len() != volumes.len() {
        return Err(OptbaError::LengthMismatch {
            routes: plan.len(),
            volumes: volumes.len(),
        });
    }
    let mut demand = vec![0.0; available.len()];
    for (k, (route, &v)) in plan.routes.iter().zip(volumes).enumerate() {
        let flow = plan.flow_ids[k];
        if !(v.is_finite() && v >= 0.0) {
            return Err(OptbaError::InvalidVolume(flow));
        }
        if v == 0.0 {
            continue;
        }
        for &l in route.links() {
            if l.0 >= available.len() {
                return Err(OptbaError::UnknownLink { flow, link: l });
            }
            if available[l.0] <= tol::BANDWIDTH {
                return Err(OptbaError::ZeroAvailable { flow, link: l });
            }
            demand[l.0] += v;
        }
    }
    Ok(demand)
}

/// Share of every link offered to each flow on its route:
/// `V_i * B / (sum of volumes on the link)`.
pub fn proportional_share(
    plan: &RoutingPlan,
    volumes: &[f64],
    available: &[f64],
) -> Result<Vec<Vec<(LinkId, f64)>>, OptbaError> {
    let demand = link_demand(plan, volumes, available)?;
    Ok(plan
        .routes
        .iter()
        .zip(volumes)
        .map(|(route, &v)| {
            if v == 0.0 {
                return Vec::new();
            }
            route
                .links()
                .iter()
                .map(|&l| (l, v * available[l.0] / demand[l.0]))
                .collect()
        })
        .collect())
}

/// Optimal rate of each flow: the smallest proportional share along its
/// route. Zero-volume flows get rate zero.
pub fn optba_allocate(plan: &RoutingPlan, volumes: &[f64], available: &[f64]) -> Result<Vec<f64>, OptbaError> {
    Ok(proportional_share(plan, volumes, available)?
        .into_iter()
        .map(|shares| shares.into_iter().map(|(_, b)| b).fold(f64::INFINITY, f64::min))
        .map(|b| if b.is_finite() { b } else { 0.0 })
        .collect())
}

/// Allocates with [`optba_allocate`] and packages the result. Zero-volume
/// flows are left out since they have nothing to send.
pub fn optba_schedule(plan: &RoutingPlan, volumes: &[f64], available: &[f64]) -> Result<Schedule, OptbaError> {
    let rates = optba_allocate(plan, volumes, available)?;
    let flows = (0..plan.len())
        .filter(|&k| volumes[k] > 0.0)
        .map(|k| ScheduledFlow {
            flow_id: plan.flow_ids[k],
            volume: volumes[k],
            route: plan.routes[k].clone(),
            rate: rates[k],
        })
        .collect();
    Ok(Schedule { flows })
}

/// Least completion time for fixed routes, found by linear programming:
/// minimize `T` subject to `q_i >= V_i` and `sum q_i <= B T` on every link,
/// where `q_i = b_i T`.
pub fn lp_oracle(plan: &RoutingPlan, volumes: &[f64], available: &[f64]) -> Result<f64, LpError> {
    let mut lp = LinearProgram::new();
    let t = lp.add_var("T", 0.0, f64::INFINITY, 1.0);
    let q: Vec<usize> = volumes
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let q = lp.add_var(format!("q{k}"), 0.0, f64::INFINITY, 0.0);
            lp.add_constraint(vec![(q, 1.0)], Relation::Ge, v);
            q
        })
        .collect();
    for (l, &b) in available.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = (0..plan.len())
            .filter(|&k| volumes[k] > 0.0 && plan.uses(k, LinkId(l)))
            .map(|k| (q[k], 1.0))
            .collect();
        if !row.is_empty() {
            row.push((t, -b));
            lp.add_constraint(row, Relation::Le, 0.0);
        }
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.values[t]),
        s => Err(LpError::NotOptimal(s)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{random_shortest_path, Network, NodeId, Role};
    use proptest::prelude::*;

    fn chain(caps: &[f64]) -> Network {
        let mut net = Network::new();
        let nodes: Vec<_> = (0..=caps.len()).map(|_| net.add_node(Role::Host)).collect();
        for (i, &c) in caps.iter().enumerate() {
            net.add_link(nodes[i], nodes[i + 1], c).unwrap();
        }
        net
    }

    fn path(net: &Network, nodes: &[usize]) -> Path {
        Path::from_nodes(net, nodes.iter().map(|&n| NodeId(n)).collect()).unwrap()
    }

    #[test]
    fn shared_link_splits_by_volume() {
        let net = chain(&[10.0]);
        let plan = RoutingPlan::new(vec![0, 1], vec![path(&net, &[0, 1]), path(&net, &[0, 1])]);
        let vols = [100.0, 300.0];
        let shares = proportional_share(&plan, &vols, &net.availability()).unwrap();
        assert_eq!(shares[0], vec![(LinkId(0), 2.5)]);
        assert_eq!(shares[1], vec![(LinkId(0), 7.5)]);
        let sched = optba_schedule(&plan, &vols, &net.availability()).unwrap();
        assert_eq!(sched.completion_times(), vec![40.0, 40.0]);
        let oracle = lp_oracle(&plan, &vols, &net.availability()).unwrap();
        assert!((oracle - 40.0).abs() < 1e-9);
    }

    #[test]
    fn single_and_equal_flows() {
        let net = chain(&[10.0]);
        let p = path(&net, &[0, 1]);
        let plan = RoutingPlan::new(vec![7], vec![p.clone()]);
        assert_eq!(optba_allocate(&plan, &[5.0], &net.availability()).unwrap(), vec![10.0]);
        let plan = RoutingPlan::new(vec![0, 1, 2, 3], vec![p; 4]);
        let rates = optba_allocate(&plan, &[3.0; 4], &net.availability()).unwrap();
        assert_eq!(rates, vec![2.5; 4]);
    }

    #[test]
    fn disjoint_paths_and_bottlenecks() {
        // 0 - 1 - 2 and 0 - 3 - 2, all 10 Gb/s.
        let mut net = Network::new();
        let n: Vec<_> = (0..4).map(|_| net.add_node(Role::Host)).collect();
        for (a, b) in [(0, 1), (1, 2), (0, 3), (3, 2)] {
            net.add_link(n[a], n[b], 10.0).unwrap();
        }
        let plan = RoutingPlan::new(vec![0, 1], vec![path(&net, &[0, 1, 2]), path(&net, &[0, 3, 2])]);
        let sched = optba_schedule(&plan, &[100.0, 200.0], &net.availability()).unwrap();
        assert_eq!(sched.flows.iter().map(|f| f.rate).collect::<Vec<_>>(), vec![10.0, 10.0]);
        assert_eq!(sched.cct(), 20.0);

        let net = chain(&[10.0, 4.0]);
        let plan = RoutingPlan::new(vec![0], vec![path(&net, &[0, 1, 2])]);
        assert_eq!(optba_allocate(&plan, &[8.0], &net.availability()).unwrap(), vec![4.0]);
    }

    #[test]
    fn errors_name_the_problem() {
        let mut net = chain(&[10.0, 10.0]);
        net.set_available(LinkId(1), 0.0).unwrap();
        let plan = RoutingPlan::new(vec![3], vec![path(&net, &[0, 1, 2])]);
        assert_eq!(
            optba_allocate(&plan, &[1.0], &net.availability()),
            Err(OptbaError::ZeroAvailable { flow: 3, link: LinkId(1) })
        );
        // A flow with nothing to send does not need the link.
        assert_eq!(optba_allocate(&plan, &[0.0], &net.availability()), Ok(vec![0.0]));
        assert!(optba_schedule(&plan, &[0.0], &net.availability()).unwrap().flows.is_empty());
        assert!(matches!(
            optba_allocate(&plan, &[1.0, 2.0], &net.availability()),
            Err(OptbaError::LengthMismatch { .. })
        ));
        assert_eq!(
            optba_allocate(&plan, &[f64::NAN], &net.availability()),
            Err(OptbaError::InvalidVolume(3))
        );
    }

    /// Random connected graph (a ring plus chords) with random availability
    /// and flows on random shortest routes.
    fn arb_instance() -> impl Strategy<Value = (Network, RoutingPlan, Vec<f64>)> {
        (3usize..=10).prop_flat_map(|n| {
            let chords = proptest::collection::vec((0..n, 0..n), 0..n);
            let caps = proptest::collection::vec(1u32..=20, n + n);
            let flows = proptest::collection::vec((0..n, 0..n, 1u32..=500, 0.0f64..1.0), 1..=6);
            (Just(n), chords, caps, flows).prop_filter_map("flows need distinct endpoints", |(n, chords, caps, flows)| {
                let mut net = Network::new();
                let nodes: Vec<_> = (0..n).map(|_| net.add_node(Role::Host)).collect();
                let mut cap = caps.into_iter();
                for i in 0..n {
                    let j = (i + 1) % n;
                    if net.link_between(nodes[i], nodes[j]).is_none() && i != j {
                        net.add_link(nodes[i], nodes[j], cap.next().unwrap() as f64).unwrap();
                    }
                }
                for (a, b) in chords {
                    if a != b && net.link_between(nodes[a], nodes[b]).is_none() {
                        net.add_link(nodes[a], nodes[b], cap.next().unwrap() as f64).unwrap();
                    }
                }
                let mut ids = Vec::new();
                let mut routes = Vec::new();
                let mut vols = Vec::new();
                for (k, (s, d, v, u)) in flows.into_iter().enumerate() {
                    if s == d {
                        continue;
                    }
                    ids.push(k);
                    routes.push(random_shortest_path(&net, nodes[s], nodes[d], u)?);
                    vols.push(v as f64);
                }
                (!ids.is_empty()).then(|| (net, RoutingPlan::new(ids, routes), vols))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_lp_oracle((net, plan, vols) in arb_instance()) {
            let avail = net.availability();
            let sched = optba_schedule(&plan, &vols, &avail).unwrap();
            let oracle = lp_oracle(&plan, &vols, &avail).unwrap();
            prop_assert!((sched.cct() - oracle).abs() <= 1e-6 * oracle);
        }

        #[test]
        fn a_bottleneck_is_saturated((net, plan, vols) in arb_instance()) {
            let avail = net.availability();
            let sched = optba_schedule(&plan, &vols, &avail).unwrap();
            sched.validate_against(&crate::coflow::Coflow::new(
                0,
                plan.flow_ids.iter().zip(&plan.routes).zip(&vols).map(|((&id, r), &v)| {
                    crate::coflow::Flow::new(id, r.src(), r.dst(), v).unwrap()
                }).collect(),
            ).unwrap(), &avail).unwrap();
            let cct = sched.cct();
            let loads = sched.link_loads(avail.len());
            let saturated: Vec<usize> = (0..avail.len())
                .filter(|&l| loads[l] > 0.0 && (loads[l] - avail[l]).abs() <= 1e-9 * avail[l].max(1.0))
                .collect();
            prop_assert!(!saturated.is_empty());
            // The link with the largest volume-to-bandwidth ratio is saturated
            // and holds every flow crossing it back to the full CCT.
            let hot = saturated.iter().copied().find(|&l| {
                sched.flows.iter().filter(|f| f.route.contains_link(LinkId(l)))
                    .all(|f| tol::rel_diff(f.completion_time(), cct) <= 1e-9)
            });
            prop_assert!(hot.is_some());
        }

        #[test]
        fn more_bandwidth_never_hurts((net, plan, vols) in arb_instance(), pick in 0usize..64, extra in 0.1f64..10.0) {
            let mut avail = net.availability();
            let before = optba_schedule(&plan, &vols, &avail).unwrap().cct();
            let l = pick % avail.len();
            avail[l] += extra;
            let after = optba_schedule(&plan, &vols, &avail).unwrap().cct();
            prop_assert!(after <= before * (1.0 + 1e-12));
        }
    }
}
