//! Exhaustive oracles for small instances and the suites that compare the
//! algorithms against them.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::DEFAULT_K;
use crate::coflow::{random_coflow, Coflow, Schedule};
use crate::corba::{corba_detailed, corba_fast_detailed};
use crate::lpcore::solve_relaxation;
use crate::netgraph::{fat_tree, shortest_max_capacity_path, LinkId, Network, NodeId, Path, Role};
use crate::optba::{lp_oracle, optba_schedule, RoutingPlan};
use crate::sim::{inject_static_noise, Algorithm, NoiseRates};
use crate::tol;

/// Every simple path from `src` to `dst`, in depth-first order over
/// ascending neighbor ids.
pub fn all_simple_paths(net: &Network, src: NodeId, dst: NodeId) -> Vec<Path> {
    fn dfs(
        net: &Network,
        dst: NodeId,
        nodes: &mut Vec<NodeId>,
        links: &mut Vec<LinkId>,
        on_path: &mut [bool],
        out: &mut Vec<Path>,
    ) {
        let u = *nodes.last().expect("path starts at src");
        if u == dst {
            out.push(Path::from_parts(nodes.clone(), links.clone()));
            return;
        }
        for &(v, l) in net.neighbors(u) {
            if !on_path[v.0] {
                on_path[v.0] = true;
                nodes.push(v);
                links.push(l);
                dfs(net, dst, nodes, links, on_path, out);
                nodes.pop();
                links.pop();
                on_path[v.0] = false;
            }
        }
    }
    let mut out = Vec::new();
    if src == dst {
        return out;
    }
    let mut on_path = vec![false; net.node_count()];
    on_path[src.0] = true;
    dfs(net, dst, &mut vec![src], &mut Vec::new(), &mut on_path, &mut out);
    out
}

/// Best schedule over every combination of one route per flow, each
/// allocated optimally. `routes[k]` lists the choices for flow `k`.
///
/// Returns `None` when some flow has no choice or no combination can be
/// allocated. Ties keep the first combination in odometer order.
pub fn best_assignment(
    flow_ids: &[usize],
    volumes: &[f64],
    routes: &[Vec<Path>],
    available: &[f64],
) -> Option<Schedule> {
    if routes.iter().any(Vec::is_empty) {
        return None;
    }
    let mut pick = vec![0usize; routes.len()];
    let mut best: Option<Schedule> = None;
    loop {
        let plan = RoutingPlan::new(
            flow_ids.to_vec(),
            pick.iter().zip(routes).map(|(&i, r)| r[i].clone()).collect(),
        );
        if let Ok(s) = optba_schedule(&plan, volumes, available) {
            if best.as_ref().is_none_or(|b| s.cct() < b.cct()) {
                best = Some(s);
            }
        }
        let mut k = 0;
        loop {
            if k == pick.len() {
                return best;
            }
            pick[k] += 1;
            if pick[k] < routes[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

/// Optimal schedule of the unfinished flows of `coflow` over all simple
/// paths with bandwidth left. Only sensible on tiny networks.
pub fn brute_force_optimum(net: &Network, coflow: &Coflow) -> Option<Schedule> {
    let available = net.availability();
    let flows: Vec<_> = coflow.pending().collect();
    let routes: Vec<Vec<Path>> = flows
        .iter()
        .map(|f| {
            all_simple_paths(net, f.src, f.dst)
                .into_iter()
                .filter(|p| p.bottleneck(|l| available[l.0]) > tol::BANDWIDTH)
                .collect()
        })
        .collect();
    let ids: Vec<usize> = flows.iter().map(|f| f.id).collect();
    let volumes: Vec<f64> = flows.iter().map(|f| f.residual).collect();
    best_assignment(&ids, &volumes, &routes, &available)
}

/// Outcome of one oracle suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Largest deviation seen, in the suite's own measure.
    pub worst: f64,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: Vec::new(),
            worst: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn case(&mut self, deviation: f64, failure: Option<String>) {
        self.cases += 1;
        self.worst = self.worst.max(deviation);
        self.failures.extend(failure);
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict}  {:<24} {:>4} cases  worst {:.3e}",
            self.name, self.cases, self.worst
        )?;
        if let Some(first) = self.failures.first() {
            write!(f, "  ({} failed; first: {first})", self.failures.len())?;
        }
        Ok(())
    }
}

/// Random connected graph, some flows on random simple routes and partly
/// used links.
#[derive(Debug, Clone)]
pub struct FixedRouteInstance {
    pub net: Network,
    pub plan: RoutingPlan,
    pub volumes: Vec<f64>,
}

impl FixedRouteInstance {
    pub fn available(&self) -> Vec<f64> {
        self.net.availability()
    }
}

/// Ring over `3..=max_nodes` nodes plus random chords, integer capacities in
/// 1..=20 and about half the links partly used.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> Network {
    let n = rng.random_range(3..=max_nodes.max(3));
    let mut net = Network::new();
    let nodes: Vec<_> = (0..n).map(|_| net.add_node(Role::Host)).collect();
    let cap = |rng: &mut R| rng.random_range(1..=20) as f64;
    for i in 0..n {
        let c = cap(rng);
        net.add_link(nodes[i], nodes[(i + 1) % n], c).expect("ring links are new");
    }
    for _ in 0..n / 2 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let c = cap(rng);
        if a != b && net.link_between(nodes[a], nodes[b]).is_none() {
            net.add_link(nodes[a], nodes[b], c).expect("checked above");
        }
    }
    let ids: Vec<LinkId> = net.link_ids().collect();
    for l in ids {
        if rng.random_bool(0.5) {
            let b = net.link(l).capacity() * rng.random_range(0.2..1.0);
            net.set_available(l, b).expect("below capacity");
        }
    }
    net
}

/// Depth-first walk from `src` with neighbors visited in random order.
pub fn random_simple_path<R: Rng + ?Sized>(net: &Network, src: NodeId, dst: NodeId, rng: &mut R) -> Option<Path> {
    fn walk<R: Rng + ?Sized>(net: &Network, u: NodeId, dst: NodeId, seen: &mut [bool], nodes: &mut Vec<NodeId>, rng: &mut R) -> bool {
        if u == dst {
            return true;
        }
        let mut next: Vec<NodeId> = net.neighbors(u).iter().map(|&(v, _)| v).collect();
        next.shuffle(rng);
        for v in next {
            if !seen[v.0] {
                seen[v.0] = true;
                nodes.push(v);
                if walk(net, v, dst, seen, nodes, rng) {
                    return true;
                }
                nodes.pop();
            }
        }
        false
    }
    if src == dst {
        return None;
    }
    let mut seen = vec![false; net.node_count()];
    seen[src.0] = true;
    let mut nodes = vec![src];
    walk(net, src, dst, &mut seen, &mut nodes, rng).then(|| Path::from_nodes(net, nodes).expect("walk follows links"))
}

pub fn random_fixed_route_instance<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize, max_flows: usize) -> FixedRouteInstance {
    let net = random_graph(rng, max_nodes);
    let n = net.node_count();
    let count = rng.random_range(1..=max_flows.max(1));
    let mut routes = Vec::with_capacity(count);
    let mut volumes = Vec::with_capacity(count);
    for _ in 0..count {
        let s = rng.random_range(0..n);
        let d = (s + rng.random_range(1..n)) % n;
        routes.push(random_simple_path(&net, NodeId(s), NodeId(d), rng).expect("ring is connected"));
        volumes.push(rng.random_range(1.0..500.0));
    }
    FixedRouteInstance {
        net,
        plan: RoutingPlan::new((0..count).collect(), routes),
        volumes,
    }
}

fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    rng
}

/// Allocation on fixed routes against the linear-programming optimum.
pub fn optba_vs_lp(cases: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("optba-vs-lp");
    for i in 0..cases {
        let inst = random_fixed_route_instance(&mut case_rng(seed, i), 12, 8);
        let available = inst.available();
        let got = optba_schedule(&inst.plan, &inst.volumes, &available).map(|s| s.cct());
        let want = lp_oracle(&inst.plan, &inst.volumes, &available);
        match (got, want) {
            (Ok(got), Ok(want)) => {
                let gap = tol::rel_diff(got, want);
                report.case(gap, (gap > 1e-6).then(|| format!("case {i}: {got} vs {want}")));
            }
            (got, want) => report.case(0.0, Some(format!("case {i}: {got:?} vs {want:?}"))),
        }
    }
    report
}

/// Some saturated link is shared by flows that all finish together.
pub fn bottleneck_equalization(cases: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("bottleneck-equalization");
    for i in 0..cases {
        let inst = random_fixed_route_instance(&mut case_rng(seed, i), 12, 8);
        let available = inst.available();
        let Ok(s) = optba_schedule(&inst.plan, &inst.volumes, &available) else {
            report.case(0.0, Some(format!("case {i}: allocation failed")));
            continue;
        };
        let loads = s.link_loads(available.len());
        let spread = (0..available.len())
            .filter(|&l| (loads[l] - available[l]).abs() <= tol::BANDWIDTH * available[l].max(1.0))
            .filter_map(|l| {
                let cts: Vec<f64> = s
                    .flows
                    .iter()
                    .filter(|f| f.route.contains_link(LinkId(l)))
                    .map(|f| f.completion_time())
                    .collect();
                let lo = cts.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = cts.iter().copied().fold(0.0, f64::max);
                (!cts.is_empty()).then(|| tol::rel_diff(lo, hi))
            })
            .min_by(f64::total_cmp);
        match spread {
            Some(d) => report.case(d, (d > 1e-6).then(|| format!("case {i}: spread {d:e}"))),
            None => report.case(0.0, Some(format!("case {i}: no saturated link"))),
        }
    }
    report
}

/// Widest path search against enumeration of every simple path.
pub fn widest_vs_enumeration(cases: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("widest-vs-enumeration");
    for i in 0..cases {
        let mut rng = case_rng(seed, i);
        let mut net = random_graph(&mut rng, 9);
        let ids: Vec<LinkId> = net.link_ids().collect();
        for l in ids {
            if rng.random_bool(0.15) {
                net.set_available(l, 0.0).expect("zero is in range");
            }
        }
        let n = net.node_count();
        let s = rng.random_range(0..n);
        let d = (s + rng.random_range(1..n)) % n;
        let (s, d) = (NodeId(s), NodeId(d));
        let width = |p: &Path| p.bottleneck(|l| net.available(l));
        let paths: Vec<Path> = all_simple_paths(&net, s, d)
            .into_iter()
            .filter(|p| width(p) > tol::BANDWIDTH)
            .collect();
        let best = paths.iter().map(width).fold(0.0, f64::max);
        let fewest = paths
            .iter()
            .filter(|p| width(p) >= best - tol::BANDWIDTH)
            .map(Path::hops)
            .min();
        let got = shortest_max_capacity_path(&net, s, d);
        match (got, fewest) {
            (None, None) => report.case(0.0, None),
            (Some(p), Some(hops)) => {
                let gap = (best - width(&p)).abs();
                let bad = gap > tol::BANDWIDTH || p.hops() != hops;
                report.case(
                    gap,
                    bad.then(|| format!("case {i}: width {} hops {} vs {best} hops {hops}", width(&p), p.hops())),
                );
            }
            (got, want) => report.case(0.0, Some(format!("case {i}: {got:?} vs {want:?} hops"))),
        }
    }
    report
}

/// k=4 FatTree with default static noise and a coflow of 1..=10 flows.
pub fn fat_tree_instance(seed: u64, case: usize) -> (Network, Coflow) {
    let mut rng = case_rng(seed, case);
    let mut net = fat_tree(4, 2, 10.0).expect("valid parameters");
    let noise = 2 * 4usize.pow(3);
    inject_static_noise(&mut net, noise, &NoiseRates::default(), &mut rng).expect("FatTree has hosts");
    let n = rng.random_range(1..=10);
    let coflow = random_coflow(&net, n, 0.7, 1000.0, &mut rng).expect("FatTree has hosts");
    (net, coflow)
}

/// The relaxed optimum never exceeds the CCT of any algorithm.
pub fn relaxation_lower_bound(cases: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("relaxation-lower-bound");
    for i in 0..cases {
        let (net, coflow) = fat_tree_instance(seed, i);
        let t = match solve_relaxation(&net, &coflow) {
            Ok(r) => r.t,
            Err(e) => {
                report.case(0.0, Some(format!("case {i}: {e}")));
                continue;
            }
        };
        for algo in Algorithm::ALL {
            match algo.schedule(&net, &coflow, DEFAULT_K) {
                Ok(s) => {
                    let excess = (t - s.cct()) / s.cct();
                    report.case(
                        excess.max(0.0),
                        (excess > 1e-6).then(|| format!("case {i}: {algo} CCT {} below bound {t}", s.cct())),
                    );
                }
                Err(e) => report.case(0.0, Some(format!("case {i}: {algo}: {e}"))),
            }
        }
    }
    report
}

/// Local search never raises the CCT, keeps every accepted schedule
/// feasible and stops before its scan cap.
pub fn local_search_soundness(cases: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("local-search-soundness");
    for i in 0..cases {
        let (net, coflow) = fat_tree_instance(seed, i);
        for (name, out) in [("corba", corba_detailed(&net, &coflow)), ("corba-fast", corba_fast_detailed(&net, &coflow))] {
            let out = match out {
                Ok(o) => o,
                Err(e) => {
                    report.case(0.0, Some(format!("case {i}: {name}: {e}")));
                    continue;
                }
            };
            let rise = (out.schedule.cct() - out.initial.cct()).max(0.0) / out.initial.cct();
            let mut problems = Vec::new();
            if rise > 0.0 {
                problems.push(format!("CCT rose by {rise:e}"));
            }
            if out.trace.cct.windows(2).any(|w| w[1] > w[0]) {
                problems.push("an accepted move raised the CCT".to_string());
            }
            if out.trace.invalid > 0 || out.schedule.validate(&coflow, &net).is_err() {
                problems.push("infeasible schedule".to_string());
            }
            if out.trace.hit_cap || out.trace.iterations > 50 * coflow.flows().len() {
                problems.push(format!("{} scans", out.trace.iterations));
            }
            report.case(
                rise,
                (!problems.is_empty()).then(|| format!("case {i}: {name}: {}", problems.join(", "))),
            );
        }
    }
    report
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        optba_vs_lp(200, seed),
        bottleneck_equalization(200, seed),
        widest_vs_enumeration(200, seed),
        relaxation_lower_bound(100, seed),
        local_search_soundness(100, seed),
    ]
}
