use std::collections::{BTreeSet, HashMap};

use super::{entity_id, MergeCandidate, ResolveError, ResolvedEntity};

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// The entity a candidate side denotes: same kind, and every side alias
/// already belongs to it. Sides of an earlier merge therefore still
/// resolve, which makes re-application a no-op.
fn locate(entities: &[ResolvedEntity], side: &ResolvedEntity) -> Result<usize, ResolveError> {
    entities
        .iter()
        .position(|e| e.kind == side.kind && side.aliases.is_subset(&e.aliases))
        .ok_or_else(|| ResolveError::UnknownEntity {
            kind: side.kind,
            canonical: side.canonical.clone(),
        })
}

/// Union-find over accepted pairs. A cluster keeps the lexicographically
/// least canonical, the union of aliases and an id recomputed from the
/// surviving canonical; it takes the position of its first member.
pub fn apply_merges(
    entities: &[ResolvedEntity],
    accepted: &[MergeCandidate],
) -> Result<Vec<ResolvedEntity>, ResolveError> {
    let mut uf = UnionFind((0..entities.len()).collect());
    for m in accepted {
        let (a, b) = (locate(entities, &m.left)?, locate(entities, &m.right)?);
        uf.union(a, b);
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..entities.len() {
        let root = uf.find(i);
        let at = *slot.entry(root).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[at].push(i);
    }
    Ok(clusters
        .into_iter()
        .map(|members| {
            if members.len() == 1 {
                return entities[members[0]].clone();
            }
            let canonical = members
                .iter()
                .map(|&i| entities[i].canonical.as_str())
                .min()
                .expect("non-empty cluster")
                .to_string();
            let kind = entities[members[0]].kind;
            let aliases: BTreeSet<String> = members.iter().flat_map(|&i| entities[i].aliases.iter().cloned()).collect();
            ResolvedEntity {
                entity_id: entity_id(kind, &canonical),
                canonical,
                kind,
                aliases,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolve::{EntityKind, Resolver, Tier};

    fn pair(a: &ResolvedEntity, b: &ResolvedEntity) -> MergeCandidate {
        MergeCandidate {
            left: a.clone(),
            right: b.clone(),
            similarity: 1.0,
            tier: Tier::Rule,
        }
    }

    #[test]
    fn empty_accepted_is_identity() {
        let r = Resolver::default();
        let es: Vec<_> = ["x1", "y2"].iter().map(|s| r.entity(s, EntityKind::Model).unwrap()).collect();
        assert_eq!(apply_merges(&es, &[]).unwrap(), es);
    }

    #[test]
    fn chains_close_transitively() {
        let r = Resolver::default();
        let es: Vec<_> = ["c", "b", "a", "z"].iter().map(|s| r.entity(s, EntityKind::Location).unwrap()).collect();
        let out = apply_merges(&es, &[pair(&es[0], &es[1]), pair(&es[1], &es[2])]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].canonical, "a");
        assert_eq!(out[0].aliases.len(), 3);
        assert_eq!(out[0].entity_id, crate::resolve::entity_id(EntityKind::Location, "a"));
        assert_eq!(out[1], es[3]);
    }

    #[test]
    fn unknown_sides_fail() {
        let r = Resolver::default();
        let es = vec![r.entity("a", EntityKind::Model).unwrap()];
        let stranger = r.entity("q", EntityKind::Model).unwrap();
        assert!(matches!(apply_merges(&es, &[pair(&es[0], &stranger)]), Err(ResolveError::UnknownEntity { .. })));
    }
}
