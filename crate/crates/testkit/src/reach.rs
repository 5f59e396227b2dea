//! Hop distances by repeated relaxation over the full edge list.

use std::collections::BTreeMap;

use askg_core::graphstore::{Direction, NodeId, PropertyGraph};

/// Shortest hop distance from `start` to every node reachable within `max`
/// hops. Each round scans every relationship once.
pub fn oracle_distances(
    g: &PropertyGraph,
    start: NodeId,
    rel_type: Option<&str>,
    direction: Direction,
    max: usize,
) -> BTreeMap<NodeId, usize> {
    let mut dist = BTreeMap::new();
    if g.node(start).is_none() {
        return dist;
    }
    dist.insert(start, 0);
    for round in 1..=max {
        let mut next = Vec::new();
        for r in g.relationships() {
            if rel_type.is_some_and(|t| t != r.rel_type) {
                continue;
            }
            let steps: &[(NodeId, NodeId)] = match direction {
                Direction::Outgoing => &[(r.source, r.target)],
                Direction::Incoming => &[(r.target, r.source)],
                Direction::Both => &[(r.source, r.target), (r.target, r.source)],
            };
            for &(from, to) in steps {
                if dist.get(&from) == Some(&(round - 1)) && !dist.contains_key(&to) {
                    next.push(to);
                }
            }
        }
        for n in next {
            dist.entry(n).or_insert(round);
        }
    }
    dist
}

/// Nodes whose shortest distance from `start` lies in `min..=max`.
pub fn oracle_expand(
    g: &PropertyGraph,
    start: NodeId,
    rel_type: Option<&str>,
    direction: Direction,
    min: usize,
    max: usize,
) -> Vec<NodeId> {
    oracle_distances(g, start, rel_type, direction, max)
        .into_iter()
        .filter(|(_, d)| *d >= min && *d <= max)
        .map(|(n, _)| n)
        .collect()
}
