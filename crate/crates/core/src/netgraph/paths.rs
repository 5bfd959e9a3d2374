//! Path search: widest (max-capacity) paths, breadth-first shortest paths and
//! Yen-style K-path enumeration over either objective.
//!
//! Every search is deterministic. Bottleneck widths within
//! [`tol::BANDWIDTH`] of the best are treated as equal; remaining ties are
//! broken by hop count (where the objective asks for it) and then by the
//! lexicographically smallest node sequence. Links whose width is at or below
//! the tolerance are unusable.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::{LinkId, Network, NodeId, Path};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    /// Fewest hops.
    Hops,
    /// Widest bottleneck; ties by node sequence only.
    Widest,
    /// Widest bottleneck; ties by hops, then node sequence.
    ShortestWidest,
}

struct Mask {
    nodes: Vec<bool>,
    links: Vec<bool>,
}

impl Mask {
    fn open(net: &Network) -> Self {
        Self {
            nodes: vec![false; net.node_count()],
            links: vec![false; net.link_count()],
        }
    }
}

struct Search<'a> {
    net: &'a Network,
    widths: &'a [f64],
    mask: &'a Mask,
    cap: f64,
    threshold: f64,
}

impl Search<'_> {
    fn allowed(&self, l: LinkId) -> bool {
        let w = self.widths[l.0].min(self.cap);
        !self.mask.links[l.0] && w > tol::BANDWIDTH && w >= self.threshold
    }

    fn open_node(&self, n: NodeId) -> bool {
        !self.mask.nodes[n.0]
    }

    /// Largest bottleneck from `src` to `dst`, or 0 when unreachable.
    fn max_bottleneck(&self, src: NodeId, dst: NodeId) -> f64 {
        #[derive(PartialEq)]
        struct Entry(f64, NodeId);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                self.0
                    .total_cmp(&other.0)
                    .then_with(|| other.1.cmp(&self.1))
            }
        }

        let mut best = vec![0.0f64; self.net.node_count()];
        best[src.0] = self.cap;
        let mut heap = BinaryHeap::from([Entry(self.cap, src)]);
        while let Some(Entry(w, u)) = heap.pop() {
            if w < best[u.0] {
                continue;
            }
            if u == dst {
                return w;
            }
            for &(v, l) in self.net.neighbors(u) {
                if !self.allowed(l) || !self.open_node(v) {
                    continue;
                }
                let nw = w.min(self.widths[l.0]);
                if nw > best[v.0] {
                    best[v.0] = nw;
                    heap.push(Entry(nw, v));
                }
            }
        }
        0.0
    }

    /// Hop distance of every node to `dst` through allowed links.
    fn distances_to(&self, dst: NodeId, blocked: &[bool]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.net.node_count()];
        dist[dst.0] = 0;
        let mut queue = VecDeque::from([dst]);
        while let Some(u) = queue.pop_front() {
            for &(v, l) in self.net.neighbors(u) {
                if dist[v.0] == usize::MAX
                    && self.allowed(l)
                    && self.open_node(v)
                    && !blocked[v.0]
                {
                    dist[v.0] = dist[u.0] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Lexicographically smallest among the fewest-hop paths.
    fn walk_shortest(&self, src: NodeId, dst: NodeId) -> Option<Path> {
        let dist = self.distances_to(dst, &vec![false; self.net.node_count()]);
        if dist[src.0] == usize::MAX {
            return None;
        }
        let mut nodes = vec![src];
        let mut links = Vec::new();
        let mut u = src;
        while u != dst {
            let &(v, l) = self
                .net
                .neighbors(u)
                .iter()
                .find(|&&(v, l)| dist[v.0] != usize::MAX && dist[v.0] + 1 == dist[u.0] && self.allowed(l))
                .expect("distance labels are consistent");
            nodes.push(v);
            links.push(l);
            u = v;
        }
        Some(Path::from_parts(nodes, links))
    }

    /// Lexicographically smallest simple path.
    fn walk_lex(&self, src: NodeId, dst: NodeId) -> Option<Path> {
        let mut on_path = vec![false; self.net.node_count()];
        if self.distances_to(dst, &on_path)[src.0] == usize::MAX {
            return None;
        }
        on_path[src.0] = true;
        let mut nodes = vec![src];
        let mut links = Vec::new();
        let mut u = src;
        while u != dst {
            let mut next = None;
            for &(v, l) in self.net.neighbors(u) {
                if on_path[v.0] || !self.allowed(l) || !self.open_node(v) {
                    continue;
                }
                if v == dst || self.distances_to(dst, &on_path)[v.0] != usize::MAX {
                    next = Some((v, l));
                    break;
                }
            }
            let (v, l) = next.expect("reachability was checked before stepping");
            on_path[v.0] = true;
            nodes.push(v);
            links.push(l);
            u = v;
        }
        Some(Path::from_parts(nodes, links))
    }
}

fn best_path(
    net: &Network,
    src: NodeId,
    dst: NodeId,
    widths: &[f64],
    cap: f64,
    objective: Objective,
    mask: &Mask,
) -> Option<Path> {
    if src == dst {
        return None;
    }
    let mut search = Search {
        net,
        widths,
        mask,
        cap,
        threshold: f64::NEG_INFINITY,
    };
    match objective {
        Objective::Hops => search.walk_shortest(src, dst),
        Objective::Widest | Objective::ShortestWidest => {
            let best = search.max_bottleneck(src, dst);
            if best <= tol::BANDWIDTH {
                return None;
            }
            search.threshold = best - tol::BANDWIDTH;
            if objective == Objective::Widest {
                search.walk_lex(src, dst)
            } else {
                search.walk_shortest(src, dst)
            }
        }
    }
}

fn compare_width(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= tol::BANDWIDTH {
        Ordering::Equal
    } else {
        b.total_cmp(&a)
    }
}

fn compare(a: &Path, b: &Path, widths: &[f64], objective: Objective) -> Ordering {
    let width = |p: &Path| p.bottleneck(|l| widths[l.0]);
    match objective {
        Objective::Hops => a.hops().cmp(&b.hops()),
        Objective::Widest => compare_width(width(a), width(b)),
        Objective::ShortestWidest => {
            compare_width(width(a), width(b)).then_with(|| a.hops().cmp(&b.hops()))
        }
    }
    .then_with(|| a.nodes().cmp(b.nodes()))
}

fn yen(
    net: &Network,
    src: NodeId,
    dst: NodeId,
    k: usize,
    widths: &[f64],
    objective: Objective,
) -> Vec<Path> {
    if k == 0 {
        return Vec::new();
    }
    let Some(first) = best_path(
        net,
        src,
        dst,
        widths,
        f64::INFINITY,
        objective,
        &Mask::open(net),
    ) else {
        return Vec::new();
    };
    let mut accepted = vec![first];
    let mut pool: Vec<Path> = Vec::new();
    while accepted.len() < k {
        let last = accepted.last().expect("nonempty").clone();
        for i in 0..last.hops() {
            let spur = last.nodes()[i];
            let root_nodes = &last.nodes()[..=i];
            let root_links = &last.links()[..i];
            let mut mask = Mask::open(net);
            for p in &accepted {
                if p.hops() > i && p.nodes()[..=i] == *root_nodes {
                    mask.links[p.links()[i].0] = true;
                }
            }
            for n in &root_nodes[..i] {
                mask.nodes[n.0] = true;
            }
            let cap = match objective {
                Objective::Hops => f64::INFINITY,
                _ => root_links
                    .iter()
                    .map(|l| widths[l.0])
                    .fold(f64::INFINITY, f64::min),
            };
            if let Some(tail) = best_path(net, spur, dst, widths, cap, objective, &mask) {
                let mut nodes = root_nodes.to_vec();
                nodes.extend_from_slice(&tail.nodes()[1..]);
                let mut links = root_links.to_vec();
                links.extend_from_slice(tail.links());
                let candidate = Path::from_parts(nodes, links);
                if !accepted.contains(&candidate) && !pool.contains(&candidate) {
                    pool.push(candidate);
                }
            }
        }
        let Some(best) = (0..pool.len())
            .min_by(|&a, &b| compare(&pool[a], &pool[b], widths, objective))
        else {
            break;
        };
        accepted.push(pool.remove(best));
    }
    accepted
}

/// Widest path under `width`, ties broken by hop count then node sequence.
pub fn max_capacity_path(
    net: &Network,
    src: NodeId,
    dst: NodeId,
    width: impl Fn(LinkId) -> f64,
) -> Option<Path> {
    let widths: Vec<f64> = net.link_ids().map(width).collect();
    best_path(
        net,
        src,
        dst,
        &widths,
        f64::INFINITY,
        Objective::ShortestWidest,
        &Mask::open(net),
    )
}

/// Fewest-hop path among the widest paths under current availability.
pub fn shortest_max_capacity_path(net: &Network, src: NodeId, dst: NodeId) -> Option<Path> {
    max_capacity_path(net, src, dst, |l| net.available(l))
}

/// Breadth-first shortest path over links with bandwidth left.
pub fn shortest_path(net: &Network, src: NodeId, dst: NodeId) -> Option<Path> {
    best_path(
        net,
        src,
        dst,
        &net.availability(),
        f64::INFINITY,
        Objective::Hops,
        &Mask::open(net),
    )
}

/// Up to `k` loopless paths in nondecreasing hop count.
pub fn k_shortest_paths(net: &Network, src: NodeId, dst: NodeId, k: usize) -> Vec<Path> {
    yen(net, src, dst, k, &net.availability(), Objective::Hops)
}

/// Up to `k` loopless paths in nonincreasing bottleneck of available
/// bandwidth. Hop count plays no part in the order.
pub fn k_max_capacity_paths(net: &Network, src: NodeId, dst: NodeId, k: usize) -> Vec<Path> {
    yen(net, src, dst, k, &net.availability(), Objective::Widest)
}

/// Up to `k` loopless paths ordered by (bottleneck desc, hops asc).
pub fn k_shortest_max_capacity_paths(
    net: &Network,
    src: NodeId,
    dst: NodeId,
    k: usize,
) -> Vec<Path> {
    yen(net, src, dst, k, &net.availability(), Objective::ShortestWidest)
}

/// Picks one of the topologically shortest paths uniformly, using `u` in
/// `[0, 1)` as the random draw. Availability is ignored.
pub fn random_shortest_path(net: &Network, src: NodeId, dst: NodeId, u: f64) -> Option<Path> {
    if src == dst {
        return None;
    }
    let n = net.node_count();
    let mut dist = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    dist[dst.0] = 0;
    let mut queue = VecDeque::from([dst]);
    while let Some(x) = queue.pop_front() {
        order.push(x);
        for &(v, _) in net.neighbors(x) {
            if dist[v.0] == usize::MAX {
                dist[v.0] = dist[x.0] + 1;
                queue.push_back(v);
            }
        }
    }
    if dist[src.0] == usize::MAX {
        return None;
    }
    // Number of shortest paths from each node to dst.
    let mut count = vec![0u128; n];
    count[dst.0] = 1;
    for &x in &order[1..] {
        count[x.0] = net
            .neighbors(x)
            .iter()
            .filter(|(v, _)| dist[v.0] + 1 == dist[x.0])
            .map(|(v, _)| count[v.0])
            .sum();
    }
    let total = count[src.0];
    let mut pick = ((u.clamp(0.0, 1.0) * total as f64) as u128).min(total - 1);
    let mut nodes = vec![src];
    let mut links = Vec::new();
    let mut x = src;
    while x != dst {
        for &(v, l) in net.neighbors(x) {
            if dist[v.0] + 1 != dist[x.0] {
                continue;
            }
            if pick < count[v.0] {
                nodes.push(v);
                links.push(l);
                x = v;
                break;
            }
            pick -= count[v.0];
        }
    }
    Some(Path::from_parts(nodes, links))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{fat_tree, Role};
    use crate::verify::all_simple_paths;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> Network {
        let mut net = Network::new();
        for _ in 0..n {
            net.add_node(Role::Host);
        }
        for &(u, v, w) in edges {
            let l = net.add_link(NodeId(u), NodeId(v), 10.0).unwrap();
            net.set_available(l, w).unwrap();
        }
        net
    }

    fn ids(p: &Path) -> Vec<usize> {
        p.nodes().iter().map(|n| n.0).collect()
    }

    #[test]
    fn line_graph_has_one_path() {
        let net = graph(3, &[(0, 1, 5.0), (1, 2, 3.0)]);
        let p = shortest_max_capacity_path(&net, NodeId(0), NodeId(2)).unwrap();
        assert_eq!(ids(&p), vec![0, 1, 2]);
        assert_eq!(p.bottleneck(|l| net.available(l)), 3.0);
    }

    #[test]
    fn triangle_prefers_the_wide_detour() {
        // a=0, b=1, c=2
        let net = graph(3, &[(0, 1, 1.0), (0, 2, 10.0), (2, 1, 10.0)]);
        let p = shortest_max_capacity_path(&net, NodeId(0), NodeId(1)).unwrap();
        assert_eq!(ids(&p), vec![0, 2, 1]);
    }

    #[test]
    fn diamond_equal_bottleneck_prefers_fewer_hops() {
        // 0-1-4 (two hops) and 0-2-3-4 (three hops), all width 4 except one
        // wide edge on the long route that does not change its bottleneck.
        let net = graph(
            5,
            &[(0, 2, 4.0), (2, 3, 9.0), (3, 4, 4.0), (0, 1, 4.0), (1, 4, 4.0)],
        );
        let p = shortest_max_capacity_path(&net, NodeId(0), NodeId(4)).unwrap();
        assert_eq!(ids(&p), vec![0, 1, 4]);
    }

    #[test]
    fn saturated_links_disconnect() {
        let net = graph(3, &[(0, 1, 5.0), (1, 2, 0.0)]);
        assert!(shortest_max_capacity_path(&net, NodeId(0), NodeId(2)).is_none());
        assert!(shortest_path(&net, NodeId(0), NodeId(2)).is_none());
        assert!(k_shortest_paths(&net, NodeId(0), NodeId(2), 3).is_empty());
        let same = max_capacity_path(&net, NodeId(1), NodeId(1), |_| 1.0);
        assert!(same.is_none());
    }

    #[test]
    fn k_shortest_first_is_bfs() {
        let net = fat_tree(4, 2, 10.0).unwrap();
        let (s, d) = (NodeId(0), NodeId(31));
        let first = &k_shortest_paths(&net, s, d, 1)[0];
        assert_eq!(first, &shortest_path(&net, s, d).unwrap());
    }

    #[test]
    fn k_shortest_cross_pod_fat_tree() {
        let net = fat_tree(4, 2, 10.0).unwrap();
        let (s, d) = (NodeId(0), NodeId(31));
        let paths = k_shortest_paths(&net, s, d, 5);
        // A k=4 cross-pod pair has only (k/2)^2 = 4 six-hop routes; the
        // fifth shortest detours through a second rack switch.
        let hops: Vec<usize> = paths.iter().map(Path::hops).collect();
        assert_eq!(hops, vec![6, 6, 6, 6, 8]);
        let mut all = all_simple_paths(&net, s, d);
        all.sort_by(|a, b| a.hops().cmp(&b.hops()).then_with(|| a.nodes().cmp(b.nodes())));
        assert_eq!(paths, all[..5].to_vec());
    }

    #[test]
    fn random_shortest_path_covers_all_routes() {
        let net = fat_tree(4, 1, 10.0).unwrap();
        let (s, d) = (NodeId(0), NodeId(15));
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..64 {
            let p = random_shortest_path(&net, s, d, i as f64 / 64.0).unwrap();
            assert_eq!(p.hops(), 6);
            seen.insert(ids(&p));
        }
        assert_eq!(seen.len(), 4);
    }

    fn arb_graph() -> impl Strategy<Value = Network> {
        (4usize..=8).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .collect();
            let m = pairs.len();
            (
                Just(n),
                Just(pairs),
                proptest::collection::vec(proptest::option::weighted(0.5, 0u8..6), m),
            )
                .prop_map(|(n, pairs, ws)| {
                    let edges: Vec<_> = pairs
                        .iter()
                        .zip(ws)
                        .filter_map(|(&(u, v), w)| w.map(|w| (u, v, w as f64)))
                        .collect();
                    graph(n, &edges)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn widest_matches_enumeration(net in arb_graph()) {
            let s = NodeId(0);
            let d = NodeId(net.node_count() - 1);
            let width = |p: &Path| p.bottleneck(|l| net.available(l));
            let usable: Vec<Path> = all_simple_paths(&net, s, d)
                .into_iter()
                .filter(|p| width(p) > tol::BANDWIDTH)
                .collect();
            let got = shortest_max_capacity_path(&net, s, d);
            match usable.iter().map(width).fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.max(w)))) {
                None => prop_assert!(got.is_none()),
                Some(best) => {
                    let got = got.unwrap();
                    prop_assert_eq!(width(&got), best);
                    let expected = usable
                        .iter()
                        .filter(|p| width(p) == best)
                        .min_by(|a, b| a.hops().cmp(&b.hops()).then_with(|| a.nodes().cmp(b.nodes())))
                        .unwrap();
                    prop_assert_eq!(&got, expected);
                }
            }
        }

        #[test]
        fn k_paths_follow_their_ordering(net in arb_graph(), k in 1usize..6) {
            let s = NodeId(0);
            let d = NodeId(net.node_count() - 1);
            let width = |p: &Path| p.bottleneck(|l| net.available(l));
            let mut usable: Vec<Path> = all_simple_paths(&net, s, d)
                .into_iter()
                .filter(|p| width(p) > tol::BANDWIDTH)
                .collect();

            let by_hops = k_shortest_paths(&net, s, d, k);
            usable.sort_by(|a, b| a.hops().cmp(&b.hops()).then_with(|| a.nodes().cmp(b.nodes())));
            prop_assert_eq!(&by_hops[..], &usable[..k.min(usable.len())]);

            let by_sm = k_shortest_max_capacity_paths(&net, s, d, k);
            usable.sort_by(|a, b| width(b).total_cmp(&width(a)).then_with(|| a.hops().cmp(&b.hops())).then_with(|| a.nodes().cmp(b.nodes())));
            prop_assert_eq!(&by_sm[..], &usable[..k.min(usable.len())]);

            let by_m = k_max_capacity_paths(&net, s, d, k);
            usable.sort_by(|a, b| width(b).total_cmp(&width(a)).then_with(|| a.nodes().cmp(b.nodes())));
            prop_assert_eq!(&by_m[..], &usable[..k.min(usable.len())]);
        }
    }
}
