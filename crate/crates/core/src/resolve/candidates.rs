use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{compact, family, cosine, EmbeddingProvider, EntityKind, MergeCandidate, ResolveError, ResolvedEntity, Rules, Tier};

struct Features {
    family: String,
    compact: String,
    group: Option<usize>,
    first_token: String,
}

/// Pairs within blocking buckets (shared first token, rule family, compact
/// form or alias group), each tagged with its highest-priority tier.
///
/// Output is sorted by the (left, right) entity order, with `left < right`
/// in every pair; equal entities never pair. Rule and lexical pairs do not
/// depend on `threshold`, so raising it only removes embedding pairs.
pub fn find_merge_candidates(
    entities: &[ResolvedEntity],
    threshold: f64,
    rules: &Rules,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<MergeCandidate>, ResolveError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ResolveError::InvalidThreshold(threshold));
    }
    let Some(kind) = entities.first().map(|e| e.kind) else {
        return Ok(Vec::new());
    };
    if let Some(other) = entities.iter().find(|e| e.kind != kind) {
        return Err(ResolveError::MixedKinds(kind, other.kind));
    }

    let features: Vec<Features> = entities
        .iter()
        .map(|e| {
            let family = family(&e.canonical, kind, rules);
            Features {
                group: rules.alias_group(kind, &family),
                compact: compact(&e.canonical),
                first_token: e.canonical.split(' ').next().unwrap_or_default().to_string(),
                family,
            }
        })
        .collect();

    let mut buckets: BTreeMap<(u8, String), Vec<usize>> = BTreeMap::new();
    for (i, f) in features.iter().enumerate() {
        buckets.entry((0, f.first_token.clone())).or_default().push(i);
        buckets.entry((1, f.family.clone())).or_default().push(i);
        buckets.entry((2, f.compact.clone())).or_default().push(i);
        if let Some(g) = f.group {
            buckets.entry((3, g.to_string())).or_default().push(i);
        }
    }
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for members in buckets.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if entities[i] != entities[j] {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }

    let mut vectors: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut out = Vec::new();
    for (i, j) in pairs {
        for e in [&entities[i], &entities[j]] {
            if !vectors.contains_key(e.canonical.as_str()) {
                vectors.insert(&e.canonical, provider.embed(&e.canonical)?);
            }
        }
        let similarity = cosine(&vectors[entities[i].canonical.as_str()], &vectors[entities[j].canonical.as_str()]);
        let (fi, fj) = (&features[i], &features[j]);
        let rule = (kind == EntityKind::Model && fi.family == fj.family)
            || (fi.group.is_some() && fi.group == fj.group);
        let lexical = entities[i].canonical == entities[j].canonical || fi.compact == fj.compact;
        let tier = if rule {
            Tier::Rule
        } else if lexical {
            Tier::Lexical
        } else if similarity >= threshold {
            Tier::Embedding
        } else {
            continue;
        };
        let (left, right) = if entities[i] <= entities[j] {
            (entities[i].clone(), entities[j].clone())
        } else {
            (entities[j].clone(), entities[i].clone())
        };
        out.push(MergeCandidate {
            left,
            right,
            similarity,
            tier,
        });
    }
    out.sort_by(|a, b| (&a.left, &a.right).cmp(&(&b.left, &b.right)));
    Ok(out)
}
