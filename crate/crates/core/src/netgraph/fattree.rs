use super::{NetError, Network, NodeId, Role};

/// Number of nodes in a `k`-ary FatTree whose racks hold `alpha_over`
/// times the usual `k/2` hosts.
pub fn fat_tree_node_count(k: usize, alpha_over: usize) -> usize {
    alpha_over * k * k * k / 4 + k * k + (k / 2) * (k / 2)
}

/// Builds a `k`-ary FatTree with oversubscribed racks.
///
/// Node ids are assigned hosts first (pod-major, then rack), then ToR,
/// aggregation and core switches. Core `c` attaches to aggregation switch
/// `c / (k/2)` of every pod. Links are oriented from the lower tier upwards.
pub fn fat_tree(k: usize, alpha_over: usize, link_capacity: f64) -> Result<Network, NetError> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(NetError::InvalidArity(k));
    }
    if alpha_over < 1 {
        return Err(NetError::InvalidOversubscription);
    }
    if !(link_capacity.is_finite() && link_capacity > 0.0) {
        return Err(NetError::InvalidCapacity(link_capacity));
    }
    let half = k / 2;
    let hosts_per_tor = alpha_over * half;
    let mut net = Network::new();

    let hosts: Vec<NodeId> = (0..k * half * hosts_per_tor)
        .map(|_| net.add_node(Role::Host))
        .collect();
    let tors: Vec<NodeId> = (0..k * half).map(|_| net.add_node(Role::Tor)).collect();
    let aggs: Vec<NodeId> = (0..k * half)
        .map(|_| net.add_node(Role::Aggregation))
        .collect();
    let cores: Vec<NodeId> = (0..half * half).map(|_| net.add_node(Role::Core)).collect();

    for (t, &tor) in tors.iter().enumerate() {
        for h in 0..hosts_per_tor {
            net.add_link(hosts[t * hosts_per_tor + h], tor, link_capacity)?;
        }
    }
    for pod in 0..k {
        for t in 0..half {
            for a in 0..half {
                net.add_link(tors[pod * half + t], aggs[pod * half + a], link_capacity)?;
            }
        }
    }
    for (c, &core) in cores.iter().enumerate() {
        let a = c / half;
        for pod in 0..k {
            net.add_link(aggs[pod * half + a], core, link_capacity)?;
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(net: &Network, role: Role) -> usize {
        net.nodes().filter(|&n| net.role(n) == role).count()
    }

    #[test]
    fn k4_layout() {
        let net = fat_tree(4, 2, 10.0).unwrap();
        assert_eq!(net.node_count(), 52);
        assert_eq!(count(&net, Role::Host), 32);
        assert_eq!(count(&net, Role::Tor), 8);
        assert_eq!(count(&net, Role::Aggregation), 8);
        assert_eq!(count(&net, Role::Core), 4);
        // 32 access + 4 pods * 4 + 4 cores * 4 pods
        assert_eq!(net.link_count(), 64);
        assert!(net.links().iter().all(|l| l.capacity() == 10.0 && l.available() == 10.0));
        for n in net.nodes() {
            let expected = match net.role(n) {
                Role::Host => 1,
                Role::Tor => 4 + 2,
                Role::Aggregation => 2 + 2,
                Role::Core => 4,
            };
            assert_eq!(net.degree(n), expected, "{n}");
        }
    }

    #[test]
    fn every_core_reaches_every_pod_once() {
        let k = 6;
        let net = fat_tree(k, 1, 1.0).unwrap();
        for core in net.nodes().filter(|&n| net.role(n) == Role::Core) {
            assert_eq!(net.degree(core), k);
        }
    }

    #[test]
    fn reported_network_sizes() {
        assert_eq!(fat_tree(10, 2, 10.0).unwrap().node_count(), 625);
        assert_eq!(fat_tree(20, 2, 10.0).unwrap().node_count(), 4500);
        assert_eq!(fat_tree_node_count(14, 2), 1617);
        assert_eq!(fat_tree_node_count(16, 2), 2368);
    }

    #[test]
    fn node_count_formula_matches_builder() {
        for k in [2, 4, 6, 8] {
            for alpha in 1..4 {
                let net = fat_tree(k, alpha, 10.0).unwrap();
                assert_eq!(net.node_count(), fat_tree_node_count(k, alpha));
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(fat_tree(3, 2, 10.0).unwrap_err(), NetError::InvalidArity(3));
        assert_eq!(fat_tree(0, 2, 10.0).unwrap_err(), NetError::InvalidArity(0));
        assert_eq!(
            fat_tree(4, 0, 10.0).unwrap_err(),
            NetError::InvalidOversubscription
        );
        assert!(fat_tree(4, 1, -1.0).is_err());
    }
}
