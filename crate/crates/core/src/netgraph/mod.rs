//! Capacitated datacenter network graph.
//!
//! Every physical link is stored once with a canonical `(u, v)` orientation;
//! adjacency is symmetric. Available bandwidth is derived from a per-link
//! ledger of committed rates so that committing and then releasing a rate
//! restores the previous state bit-for-bit.

mod fattree;
mod paths;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tol;

pub use fattree::{fat_tree, fat_tree_node_count};
pub use paths::{
    k_max_capacity_paths, k_shortest_max_capacity_paths, k_shortest_paths, max_capacity_path,
    random_shortest_path, shortest_max_capacity_path, shortest_path,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Host,
    Tor,
    Aggregation,
    Core,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("fat-tree arity must be even and at least 2, got {0}")]
    InvalidArity(usize),
    #[error("oversubscription factor must be at least 1")]
    InvalidOversubscription,
    #[error("link capacity must be positive and finite, got {0}")]
    InvalidCapacity(f64),
    #[error("available bandwidth {available} outside [0, {capacity}]")]
    InvalidAvailable { available: f64, capacity: f64 },
    #[error("self-loop at {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link between {0} and {1}")]
    ParallelLink(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("{0} and {1} are not adjacent")]
    NotAdjacent(NodeId, NodeId),
    #[error("path revisits {0}")]
    NotSimple(NodeId),
    #[error("a path needs at least two nodes")]
    EmptyPath,
    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("{link} has {available} Gb/s available, cannot allocate {rate}")]
    OverAllocation {
        link: LinkId,
        available: f64,
        rate: f64,
    },
    #[error("{link} holds no allocation of {rate} Gb/s")]
    UnknownAllocation { link: LinkId, rate: f64 },
    #[error("cannot reset availability of {0} while it carries allocations")]
    LinkInUse(LinkId),
    #[error("invalid topology document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub u: NodeId,
    pub v: NodeId,
    capacity: f64,
    // Bandwidth free before any ledger entry; equals capacity unless the
    // topology was loaded with pre-occupied links.
    base: f64,
    committed: Vec<f64>,
    available: f64,
}

impl Link {
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn available(&self) -> f64 {
        self.available
    }

    /// Rates currently committed on this link, in commit order.
    pub fn committed(&self) -> &[f64] {
        &self.committed
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.u {
            self.v
        } else {
            self.u
        }
    }

    fn refresh(&mut self) {
        let used: f64 = self.committed.iter().sum();
        self.available = (self.base - used).max(0.0);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Network {
    roles: Vec<Role>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    index: HashMap<(NodeId, NodeId), LinkId>,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, role: Role) -> NodeId {
        self.roles.push(role);
        self.adjacency.push(Vec::new());
        NodeId(self.roles.len() - 1)
    }

    /// Adds an undirected link stored with orientation `(u, v)`.
    pub fn add_link(&mut self, u: NodeId, v: NodeId, capacity: f64) -> Result<LinkId, NetError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(NetError::SelfLoop(u));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(NetError::InvalidCapacity(capacity));
        }
        if self.index.contains_key(&key(u, v)) {
            return Err(NetError::ParallelLink(u, v));
        }
        let id = LinkId(self.links.len());
        self.links.push(Link {
            u,
            v,
            capacity,
            base: capacity,
            committed: Vec::new(),
            available: capacity,
        });
        self.index.insert(key(u, v), id);
        insert_sorted(&mut self.adjacency[u.0], (v, id));
        insert_sorted(&mut self.adjacency[v.0], (u, id));
        Ok(id)
    }

    fn check_node(&self, n: NodeId) -> Result<(), NetError> {
        if n.0 < self.roles.len() {
            Ok(())
        } else {
            Err(NetError::UnknownNode(n))
        }
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.roles.len()).map(NodeId)
    }

    pub fn role(&self, n: NodeId) -> Role {
        self.roles[n.0]
    }

    pub fn hosts(&self) -> Vec<NodeId> {
        self.nodes().filter(|&n| self.role(n) == Role::Host).collect()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.links.len()).map(LinkId)
    }

    /// Neighbors of `n` with the connecting link, sorted by neighbor id.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[n.0]
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adjacency[n.0].len()
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.index.get(&key(a, b)).copied()
    }

    pub fn available(&self, id: LinkId) -> f64 {
        self.links[id.0].available
    }

    /// Snapshot of available bandwidth indexed by link id.
    pub fn availability(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.available).collect()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.capacity).collect()
    }

    /// Overrides the free bandwidth of an idle link.
    pub fn set_available(&mut self, id: LinkId, available: f64) -> Result<(), NetError> {
        let link = self.links.get_mut(id.0).ok_or(NetError::UnknownLink(id))?;
        if !link.committed.is_empty() {
            return Err(NetError::LinkInUse(id));
        }
        if !(available.is_finite() && (0.0..=link.capacity).contains(&available)) {
            return Err(NetError::InvalidAvailable {
                available,
                capacity: link.capacity,
            });
        }
        link.base = available;
        link.refresh();
        Ok(())
    }

    /// Drops every ledger entry, returning all links to their base availability.
    pub fn clear_allocations(&mut self) {
        for link in &mut self.links {
            link.committed.clear();
            link.refresh();
        }
    }

    /// Commits `rate` on every link of `path`. Nothing changes on error.
    pub fn allocate_along(&mut self, path: &Path, rate: f64) -> Result<(), NetError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(NetError::InvalidRate(rate));
        }
        for &l in &path.links {
            let available = self.links[l.0].available;
            if rate > available + tol::BANDWIDTH {
                return Err(NetError::OverAllocation {
                    link: l,
                    available,
                    rate,
                });
            }
        }
        for &l in &path.links {
            let link = &mut self.links[l.0];
            link.committed.push(rate);
            link.refresh();
        }
        Ok(())
    }

    /// Removes one ledger entry of exactly `rate` from every link of `path`.
    pub fn release_along(&mut self, path: &Path, rate: f64) -> Result<(), NetError> {
        let mut slots = Vec::with_capacity(path.links.len());
        for &l in &path.links {
            let pos = self.links[l.0]
                .committed
                .iter()
                .rposition(|&r| r.to_bits() == rate.to_bits())
                .ok_or(NetError::UnknownAllocation { link: l, rate })?;
            slots.push(pos);
        }
        for (&l, pos) in path.links.iter().zip(slots) {
            let link = &mut self.links[l.0];
            link.committed.remove(pos);
            link.refresh();
        }
        Ok(())
    }

    /// Links whose committed rates exceed their base bandwidth by more than
    /// the bandwidth tolerance.
    pub fn capacity_violations(&self) -> Vec<LinkId> {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.committed.iter().sum::<f64>() > l.base + tol::BANDWIDTH)
            .map(|(i, _)| LinkId(i))
            .collect()
    }

    pub fn to_document(&self) -> TopologyDoc {
        TopologyDoc {
            nodes: self
                .roles
                .iter()
                .enumerate()
                .map(|(id, &role)| NodeDoc { id, role })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkDoc {
                    u: l.u.0,
                    v: l.v.0,
                    capacity: l.capacity,
                    available: l.available,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &TopologyDoc) -> Result<Self, NetError> {
        let mut net = Network::new();
        for (i, node) in doc.nodes.iter().enumerate() {
            if node.id != i {
                return Err(NetError::Document(format!(
                    "node ids must be dense and ordered, found {} at position {i}",
                    node.id
                )));
            }
            net.add_node(node.role);
        }
        for link in &doc.links {
            let id = net.add_link(NodeId(link.u), NodeId(link.v), link.capacity)?;
            net.set_available(id, link.available)?;
        }
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let doc: TopologyDoc =
            serde_json::from_str(text).map_err(|e| NetError::Document(e.to_string()))?;
        Self::from_document(&doc)
    }
}

fn insert_sorted(list: &mut Vec<(NodeId, LinkId)>, item: (NodeId, LinkId)) {
    let pos = list.partition_point(|&(n, _)| n < item.0);
    list.insert(pos, item);
}

/// Serialized topology: `{nodes:[{id,role}], links:[{u,v,capacity,available}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub u: usize,
    pub v: usize,
    pub capacity: f64,
    pub available: f64,
}

/// A simple path, kept as both its node sequence and its link sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
    links: Vec<LinkId>,
}

impl Path {
    pub fn from_nodes(net: &Network, nodes: Vec<NodeId>) -> Result<Self, NetError> {
        if nodes.len() < 2 {
            return Err(NetError::EmptyPath);
        }
        let mut seen = vec![false; net.node_count()];
        for &n in &nodes {
            net.check_node(n)?;
            if std::mem::replace(&mut seen[n.0], true) {
                return Err(NetError::NotSimple(n));
            }
        }
        let links = nodes
            .windows(2)
            .map(|w| net.link_between(w[0], w[1]).ok_or(NetError::NotAdjacent(w[0], w[1])))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { nodes, links })
    }

    // Callers guarantee adjacency and simplicity.
    pub(crate) fn from_parts(nodes: Vec<NodeId>, links: Vec<LinkId>) -> Self {
        debug_assert_eq!(nodes.len(), links.len() + 1);
        Self { nodes, links }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().expect("paths are nonempty")
    }

    pub fn contains_link(&self, l: LinkId) -> bool {
        self.links.contains(&l)
    }

    /// Minimum of `width` over the path's links.
    pub fn bottleneck(&self, width: impl Fn(LinkId) -> f64) -> f64 {
        self.links
            .iter()
            .map(|&l| width(l))
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}", n.0)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> (Network, Vec<NodeId>) {
        let mut net = Network::new();
        let n: Vec<_> = (0..3).map(|_| net.add_node(Role::Host)).collect();
        net.add_link(n[0], n[1], 5.0).unwrap();
        net.add_link(n[1], n[2], 3.0).unwrap();
        (net, n)
    }

    #[test]
    fn rejects_self_loops_and_parallel_links() {
        let (mut net, n) = line();
        assert_eq!(net.add_link(n[0], n[0], 1.0), Err(NetError::SelfLoop(n[0])));
        assert_eq!(
            net.add_link(n[1], n[0], 1.0),
            Err(NetError::ParallelLink(n[1], n[0]))
        );
        assert!(matches!(
            net.add_link(n[0], n[2], 0.0),
            Err(NetError::InvalidCapacity(_))
        ));
    }

    #[test]
    fn adjacency_is_symmetric_and_sorted() {
        let (net, n) = line();
        assert_eq!(net.neighbors(n[1]).iter().map(|x| x.0).collect::<Vec<_>>(), vec![n[0], n[2]]);
        assert_eq!(net.link_between(n[2], n[1]), net.link_between(n[1], n[2]));
    }

    #[test]
    fn path_validation() {
        let (net, n) = line();
        assert!(Path::from_nodes(&net, vec![n[0], n[2]]).is_err());
        assert_eq!(
            Path::from_nodes(&net, vec![n[0], n[1], n[0]]),
            Err(NetError::NotSimple(n[0]))
        );
        let p = Path::from_nodes(&net, vec![n[0], n[1], n[2]]).unwrap();
        assert_eq!(p.hops(), 2);
        assert_eq!(p.bottleneck(|l| net.available(l)), 3.0);
    }

    #[test]
    fn over_allocation_leaves_state_unchanged() {
        let (mut net, n) = line();
        let p = Path::from_nodes(&net, vec![n[0], n[1], n[2]]).unwrap();
        let before = net.clone();
        assert!(matches!(
            net.allocate_along(&p, 3.5),
            Err(NetError::OverAllocation { .. })
        ));
        assert_eq!(net, before);
        net.allocate_along(&p, 3.0).unwrap();
        assert_eq!(net.availability(), vec![2.0, 0.0]);
        assert!(net.release_along(&p, 1.0).is_err());
        assert!(net.capacity_violations().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let (mut net, n) = line();
        let l = net.link_between(n[0], n[1]).unwrap();
        net.set_available(l, 1.25).unwrap();
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back.availability(), net.availability());
        assert_eq!(back.to_document(), net.to_document());
        assert!(Network::from_json(r#"{"nodes":[],"links":[],"extra":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn allocate_then_release_is_bit_exact(
            pre in proptest::collection::vec(0.001f64..1.0, 0..6),
            rate in 0.001f64..2.0,
        ) {
            let mut net = Network::new();
            let a = net.add_node(Role::Host);
            let b = net.add_node(Role::Tor);
            let c = net.add_node(Role::Host);
            net.add_link(a, b, 10.0).unwrap();
            net.add_link(b, c, 10.0).unwrap();
            let p = Path::from_nodes(&net, vec![a, b, c]).unwrap();
            for r in &pre {
                net.allocate_along(&p, *r).unwrap();
            }
            let before: Vec<u64> = net.availability().iter().map(|x| x.to_bits()).collect();
            net.allocate_along(&p, rate).unwrap();
            net.release_along(&p, rate).unwrap();
            let after: Vec<u64> = net.availability().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(before, after);
        }
    }
}
