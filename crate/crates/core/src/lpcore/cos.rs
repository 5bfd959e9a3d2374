//! The relaxed joint routing and allocation program.
//!
//! Variables are the completion time `T`, the per-flow rate-time products
//! `q_i = b_i T` and the per-link flow amounts `p = x q`, with `|p|` split
//! into `p+ - p-`. Positive `p` on link `(u, v)` travels from `u` to `v`.
//!
//! For each flow, nodes that can carry no through traffic (degree at most one
//! once other such nodes are gone, and not the flow's endpoint) are dropped
//! along with their links before variables are created. This leaves the
//! optimum unchanged and keeps FatTree programs small, since every host other
//! than the endpoints is such a node.

use super::{solve_lp, LinearProgram, LpError, LpSolution, LpStatus, Relation};
use crate::coflow::Coflow;
use crate::netgraph::{LinkId, Network, NodeId};
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
pub struct CosLayout {
    pub t: usize,
    /// Flow id per row of `q` and `p`.
    pub flow_ids: Vec<usize>,
    pub endpoints: Vec<(NodeId, NodeId)>,
    pub q: Vec<usize>,
    /// `(plus, minus)` variable indices per flow and link; `None` where pruned.
    pub p: Vec<Vec<Option<(usize, usize)>>>,
    pub volume_rows: usize,
    pub endpoint_rows: usize,
    pub conservation_rows: usize,
    pub capacity_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosProgram {
    pub lp: LinearProgram,
    pub layout: CosLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    /// Relaxed completion time, s. A lower bound on any feasible CCT.
    pub t: f64,
    pub flow_ids: Vec<usize>,
    pub q: Vec<f64>,
    /// Relaxed rates `q / T`, Gb/s.
    pub rates: Vec<f64>,
    /// Signed fraction of each flow on each link, indexed by link id.
    pub routing: Vec<Vec<f64>>,
}

impl RelaxedSolution {
    pub fn fraction(&self, flow: usize, link: LinkId) -> f64 {
        self.routing[flow][link.0]
    }
}

/// Links usable by a flow from `src` to `dst` after pruning dead ends and
/// parts of the graph not reachable from `src`.
fn usable_links(net: &Network, src: NodeId, dst: NodeId, open: &[bool]) -> Vec<bool> {
    let n = net.node_count();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = net
        .nodes()
        .map(|u| net.neighbors(u).iter().filter(|(_, l)| open[l.0]).count())
        .collect();
    let mut stack: Vec<NodeId> = net
        .nodes()
        .filter(|&u| u != src && u != dst && degree[u.0] <= 1)
        .collect();
    while let Some(u) = stack.pop() {
        if !alive[u.0] {
            continue;
        }
        alive[u.0] = false;
        for &(v, l) in net.neighbors(u) {
            if open[l.0] && alive[v.0] {
                degree[v.0] -= 1;
                if v != src && v != dst && degree[v.0] <= 1 {
                    stack.push(v);
                }
            }
        }
    }

    let mut reached = vec![false; n];
    reached[src.0] = true;
    let mut frontier = vec![src];
    while let Some(u) = frontier.pop() {
        for &(v, l) in net.neighbors(u) {
            if open[l.0] && alive[v.0] && !reached[v.0] {
                reached[v.0] = true;
                frontier.push(v);
            }
        }
    }
    net.links()
        .iter()
        .enumerate()
        .map(|(i, l)| open[i] && reached[l.u.0] && reached[l.v.0])
        .collect()
}

/// Builds the relaxation for the unfinished flows of `coflow` against the
/// network's current available bandwidth.
pub fn build_cos_relax_cvx(net: &Network, coflow: &Coflow) -> Result<CosProgram, LpError> {
    let flows: Vec<_> = coflow.pending().collect();
    if flows.is_empty() {
        return Err(LpError::EmptyCoflow);
    }
    for f in &flows {
        if f.src.0 >= net.node_count() || f.dst.0 >= net.node_count() {
            return Err(LpError::UnknownEndpoint(f.id));
        }
    }
    let open: Vec<bool> = net
        .links()
        .iter()
        .map(|l| l.available() > tol::BANDWIDTH)
        .collect();

    let mut lp = LinearProgram::new();
    let t = lp.add_var("T", 0.0, f64::INFINITY, 1.0);
    let mut q = Vec::with_capacity(flows.len());
    let mut p = Vec::with_capacity(flows.len());
    let mut layout_rows = (0, 0, 0, 0);

    for (k, f) in flows.iter().enumerate() {
        q.push(lp.add_var(format!("q{k}"), 0.0, f64::INFINITY, 0.0));
        let usable = usable_links(net, f.src, f.dst, &open);
        let vars: Vec<Option<(usize, usize)>> = usable
            .iter()
            .enumerate()
            .map(|(l, &ok)| {
                ok.then(|| {
                    (
                        lp.add_var(format!("p+{k}_{l}"), 0.0, f64::INFINITY, 0.0),
                        lp.add_var(format!("p-{k}_{l}"), 0.0, f64::INFINITY, 0.0),
                    )
                })
            })
            .collect();
        p.push(vars);
    }

    for (k, f) in flows.iter().enumerate() {
        lp.add_constraint(vec![(q[k], 1.0)], Relation::Ge, f.residual);
        layout_rows.0 += 1;
    }

    for (k, f) in flows.iter().enumerate() {
        // Net inflow per node over this flow's usable links.
        let mut inflow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.node_count()];
        let mut present = vec![false; net.node_count()];
        for (l, vars) in p[k].iter().enumerate() {
            if let Some((plus, minus)) = *vars {
                let link = &net.links()[l];
                inflow[link.v.0].extend([(plus, 1.0), (minus, -1.0)]);
                inflow[link.u.0].extend([(plus, -1.0), (minus, 1.0)]);
                present[link.u.0] = true;
                present[link.v.0] = true;
            }
        }
        let mut src_row = std::mem::take(&mut inflow[f.src.0]);
        src_row.push((q[k], 1.0));
        lp.add_constraint(src_row, Relation::Eq, 0.0);
        let mut dst_row = std::mem::take(&mut inflow[f.dst.0]);
        dst_row.push((q[k], -1.0));
        lp.add_constraint(dst_row, Relation::Eq, 0.0);
        layout_rows.1 += 2;
        for u in net.nodes() {
            if u != f.src && u != f.dst && present[u.0] {
                lp.add_constraint(std::mem::take(&mut inflow[u.0]), Relation::Eq, 0.0);
                layout_rows.2 += 1;
            }
        }
    }

    for (l, link) in net.links().iter().enumerate() {
        let mut row: Vec<(usize, f64)> = p
            .iter()
            .filter_map(|vars| vars[l])
            .flat_map(|(plus, minus)| [(plus, 1.0), (minus, 1.0)])
            .collect();
        row.push((t, -link.available()));
        lp.add_constraint(row, Relation::Le, 0.0);
        layout_rows.3 += 1;
    }

    Ok(CosProgram {
        lp,
        layout: CosLayout {
            t,
            flow_ids: flows.iter().map(|f| f.id).collect(),
            endpoints: flows.iter().map(|f| (f.src, f.dst)).collect(),
            q,
            p,
            volume_rows: layout_rows.0,
            endpoint_rows: layout_rows.1,
            conservation_rows: layout_rows.2,
            capacity_rows: layout_rows.3,
        },
    })
}

/// Rewrites the link variables of an optimal solution so that each flow's
/// link amounts form an acyclic flow from its source to its destination
/// with `p+ * p- = 0` on every link.
///
/// The optimum is not unique: slack capacity lets the solver leave both
/// halves of a split variable positive or push circulations around cycles.
/// Removing both only lowers link usage, so `T` and `q` stay optimal.
pub fn canonicalize(program: &CosProgram, solution: &mut LpSolution, net: &Network) {
    for (k, vars) in program.layout.p.iter().enumerate() {
        let (src, dst) = program.layout.endpoints[k];
        let x = &mut solution.values;
        let mut f: Vec<f64> = vars
            .iter()
            .map(|v| v.map_or(0.0, |(plus, minus)| x[plus] - x[minus]))
            .collect();
        let kept = decompose(net, src, dst, &mut f, x[program.layout.q[k]]);
        for (l, v) in vars.iter().enumerate() {
            if let Some((plus, minus)) = *v {
                x[plus] = kept[l].max(0.0);
                x[minus] = (-kept[l]).max(0.0);
            }
        }
    }
}

/// Peels `src`-`dst` paths off the signed link flow `f` and returns their
/// sum. Whatever is left in `f` afterwards is circulation.
fn decompose(net: &Network, src: NodeId, dst: NodeId, f: &mut [f64], q: f64) -> Vec<f64> {
    let eps = 1e-12 * q.max(1.0);
    let mut kept = vec![0.0; f.len()];
    let n = net.node_count();
    loop {
        // Breadth-first search along links in the direction of their flow.
        let mut prev: Vec<Option<(NodeId, LinkId)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[src.0] = true;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if u == dst {
                break;
            }
            for &(v, l) in net.neighbors(u) {
                let forward = if net.link(l).u == u { f[l.0] } else { -f[l.0] };
                if !seen[v.0] && forward > eps {
                    seen[v.0] = true;
                    prev[v.0] = Some((u, l));
                    queue.push_back(v);
                }
            }
        }
        if !seen[dst.0] {
            return kept;
        }
        let mut hops = Vec::new();
        let mut v = dst;
        while let Some((u, l)) = prev[v.0] {
            hops.push((u, l));
            v = u;
        }
        let (amount, tight) = hops
            .iter()
            .map(|&(_, l)| f[l.0].abs())
            .enumerate()
            .fold((f64::INFINITY, 0), |(m, i), (j, a)| if a < m { (a, j) } else { (m, i) });
        for (i, &(u, l)) in hops.iter().enumerate() {
            let sign = if net.link(l).u == u { 1.0 } else { -1.0 };
            kept[l.0] += sign * amount;
            f[l.0] = if i == tight { 0.0 } else { f[l.0] - sign * amount };
        }
    }
}

/// Turns an optimal solution of the relaxation into rates and fractional
/// routes.
pub fn recover_relaxed(program: &CosProgram, solution: &LpSolution) -> Result<RelaxedSolution, LpError> {
    if solution.status != LpStatus::Optimal {
        return Err(LpError::NotOptimal(solution.status));
    }
    let layout = &program.layout;
    let x = &solution.values;
    let t = x[layout.t];
    if t <= 0.0 {
        return Err(LpError::Degenerate);
    }
    let q: Vec<f64> = layout.q.iter().map(|&j| x[j]).collect();
    let rates = q.iter().map(|v| v / t).collect();
    let routing = layout
        .p
        .iter()
        .zip(&q)
        .map(|(vars, &qi)| {
            vars.iter()
                .map(|v| v.map_or(0.0, |(plus, minus)| (x[plus] - x[minus]) / qi))
                .collect()
        })
        .collect();
    Ok(RelaxedSolution {
        t,
        flow_ids: layout.flow_ids.clone(),
        q,
        rates,
        routing,
    })
}

/// Builds, solves and recovers the relaxation in one step.
pub fn solve_relaxation(net: &Network, coflow: &Coflow) -> Result<RelaxedSolution, LpError> {
    let program = build_cos_relax_cvx(net, coflow)?;
    let mut solution = solve_lp(&program.lp)?;
    if solution.status == LpStatus::Optimal {
        canonicalize(&program, &mut solution, net);
    }
    recover_relaxed(&program, &solution)
}
