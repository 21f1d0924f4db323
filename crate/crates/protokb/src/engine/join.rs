//! Joining prototype definitions retrieved from multiple sources.
//!
//! When the same prototype is fetched from several providers, the client
//! merges the definitions under a policy reflecting how much it trusts each
//! source: union everything, prefer trusted sources per property, or
//! union-then-trim properties to a schema-imposed cardinality (a country
//! has one population count, so keep the most trusted value).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::model::{
    AddChangeSet, PropertyId, PrototypeDefinition, PrototypeId, RemoveChangeSet,
};

/// Identifies where a definition came from (typically the provider URL).
pub type SourceTag = String;

/// How definitions from several sources are merged.
#[derive(Debug, Clone)]
pub enum JoinStrategy {
    /// Union of all change sets. Bases must agree.
    UnionAll,
    /// Most trusted source wins per property; less trusted sources only
    /// contribute properties that no more trusted source mentions. The
    /// order lists sources from most to least trusted and must cover every
    /// supplied source.
    PreferSource(Vec<SourceTag>),
    /// Union, then trim each constrained property to at most its maximum
    /// cardinality, keeping values from the most trusted sources first.
    ConstrainedCardinality {
        max_cardinality: BTreeMap<PropertyId, usize>,
        trust_order: Vec<SourceTag>,
    },
}

/// Join failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JoinError {
    #[error("no source definitions supplied")]
    NoSources,
    #[error("sources disagree on the prototype ID: {first} vs {other}")]
    MixedIds { first: PrototypeId, other: PrototypeId },
    #[error("sources disagree on the base under UnionAll: {first} vs {other}")]
    BaseConflict { first: PrototypeId, other: PrototypeId },
    #[error("source {0:?} is not covered by the trust order")]
    UnknownSource(SourceTag),
}

impl JoinStrategy {
    fn rank_of(&self, sources: &[(SourceTag, PrototypeDefinition)]) -> Result<Ranks, JoinError> {
        let order = match self {
            JoinStrategy::UnionAll => return Ok(Ranks(HashMap::new())),
            JoinStrategy::PreferSource(order) => order,
            JoinStrategy::ConstrainedCardinality { trust_order, .. } => trust_order,
        };
        let ranks: HashMap<&str, usize> = order
            .iter()
            .enumerate()
            .map(|(i, tag)| (tag.as_str(), i))
            .collect();
        for (tag, _) in sources {
            if !ranks.contains_key(tag.as_str()) {
                return Err(JoinError::UnknownSource(tag.clone()));
            }
        }
        Ok(Ranks(
            ranks.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        ))
    }
}

struct Ranks(HashMap<String, usize>);

impl Ranks {
    fn get(&self, tag: &str) -> usize {
        self.0.get(tag).copied().unwrap_or(usize::MAX)
    }
}

impl fmt::Debug for Ranks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Merges definitions of one prototype gathered from multiple sources.
///
/// All definitions must share the same ID. The result depends only on the
/// source tags and the strategy, never on the order of the input list
/// (ties between equally trusted sources resolve by tag, then input
/// order for identical tags).
pub fn join_definitions(
    sources: &[(SourceTag, PrototypeDefinition)],
    strategy: &JoinStrategy,
) -> Result<PrototypeDefinition, JoinError> {
    let first = sources.first().ok_or(JoinError::NoSources)?;
    let id = &first.1.id;
    for (_, def) in sources {
        if def.id != *id {
            return Err(JoinError::MixedIds {
                first: id.clone(),
                other: def.id.clone(),
            });
        }
    }

    let ranks = strategy.rank_of(sources)?;

    // Process most trusted first; trust order dominates input order.
    let mut ordered: Vec<&(SourceTag, PrototypeDefinition)> = sources.iter().collect();
    ordered.sort_by(|(tag_a, _), (tag_b, _)| {
        ranks.get(tag_a).cmp(&ranks.get(tag_b)).then(tag_a.cmp(tag_b))
    });

    match strategy {
        JoinStrategy::UnionAll => {
            for (_, def) in sources {
                if def.base != first.1.base {
                    return Err(JoinError::BaseConflict {
                        first: first.1.base.clone(),
                        other: def.base.clone(),
                    });
                }
            }
            let mut add = AddChangeSet::new();
            let mut remove = RemoveChangeSet::new();
            for (_, def) in &ordered {
                for p in def.remove.remove_all() {
                    remove.insert_remove_all(p.clone());
                }
            }
            for (_, def) in &ordered {
                for (p, vs) in def.add.iter() {
                    for v in vs {
                        add.insert(p.clone(), v.clone());
                    }
                }
                for (p, vs) in def.remove.removals() {
                    for v in vs {
                        remove.insert_removal(p.clone(), v.clone());
                    }
                }
            }
            Ok(PrototypeDefinition::new(
                id.clone(),
                first.1.base.clone(),
                add,
                remove,
            ))
        }

        JoinStrategy::PreferSource(_) => {
            let base = ordered[0].1.base.clone();
            let mut add = AddChangeSet::new();
            let mut claimed_add: BTreeSet<PropertyId> = BTreeSet::new();
            let mut remove = RemoveChangeSet::new();
            let mut claimed_remove: BTreeSet<PropertyId> = BTreeSet::new();
            for (_, def) in &ordered {
                for (p, vs) in def.add.iter() {
                    if claimed_add.contains(p) {
                        continue;
                    }
                    for v in vs {
                        add.insert(p.clone(), v.clone());
                    }
                }
                for p in def.add.properties() {
                    claimed_add.insert(p.clone());
                }

                // Same claim rule for the remove side; within one
                // definition removals and remove-all are disjoint.
                for p in def.remove.remove_all() {
                    if claimed_remove.insert(p.clone()) {
                        remove.insert_remove_all(p.clone());
                    }
                }
                for (p, vs) in def.remove.removals() {
                    if claimed_remove.contains(p) {
                        continue;
                    }
                    for v in vs {
                        remove.insert_removal(p.clone(), v.clone());
                    }
                }
                for (p, _) in def.remove.removals() {
                    claimed_remove.insert(p.clone());
                }
            }
            Ok(PrototypeDefinition::new(id.clone(), base, add, remove))
        }

        JoinStrategy::ConstrainedCardinality {
            max_cardinality, ..
        } => {
            let base = ordered[0].1.base.clone();
            // Union adds with the best (lowest) contributing rank per value.
            let mut contributions: BTreeMap<PropertyId, BTreeMap<PrototypeId, usize>> =
                BTreeMap::new();
            for (position, (_, def)) in ordered.iter().enumerate() {
                for (p, vs) in def.add.iter() {
                    let entry = contributions.entry(p.clone()).or_default();
                    for v in vs {
                        entry.entry(v.clone()).or_insert(position);
                    }
                }
            }
            let mut add = AddChangeSet::new();
            for (p, values) in contributions {
                match max_cardinality.get(&p) {
                    None => {
                        for v in values.into_keys() {
                            add.insert(p.clone(), v);
                        }
                    }
                    Some(&limit) => {
                        let mut ranked: Vec<(usize, PrototypeId)> =
                            values.into_iter().map(|(v, r)| (r, v)).collect();
                        ranked.sort();
                        for (_, v) in ranked.into_iter().take(limit) {
                            add.insert(p.clone(), v);
                        }
                    }
                }
            }

            let mut remove = RemoveChangeSet::new();
            for (_, def) in &ordered {
                for p in def.remove.remove_all() {
                    remove.insert_remove_all(p.clone());
                }
            }
            for (_, def) in &ordered {
                for (p, vs) in def.remove.removals() {
                    for v in vs {
                        remove.insert_removal(p.clone(), v.clone());
                    }
                }
            }
            Ok(PrototypeDefinition::new(id.clone(), base, add, remove))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::literals;

    fn id(s: &str) -> PrototypeId {
        PrototypeId::new(s).unwrap()
    }

    fn prop(s: &str) -> PropertyId {
        PropertyId::new(s).unwrap()
    }

    fn tagged(tag: &str, def: PrototypeDefinition) -> (SourceTag, PrototypeDefinition) {
        (tag.to_owned(), def)
    }

    #[test]
    fn population_scenario_keeps_the_trusted_count() {
        let population = prop("ex:population");
        let mut from_a = PrototypeDefinition::bare(id("ex:Germany"), PrototypeId::empty());
        from_a
            .add
            .insert(population.clone(), literals::encode_integer(80_000_000));
        let mut from_b = PrototypeDefinition::bare(id("ex:Germany"), PrototypeId::empty());
        from_b
            .add
            .insert(population.clone(), literals::encode_integer(20_000_000));

        let strategy = JoinStrategy::ConstrainedCardinality {
            max_cardinality: [(population.clone(), 1)].into_iter().collect(),
            trust_order: vec!["A".into(), "B".into()],
        };
        let joined = join_definitions(
            &[tagged("A", from_a.clone()), tagged("B", from_b.clone())],
            &strategy,
        )
        .unwrap();
        let values = joined.add.get(&population).unwrap();
        assert_eq!(values.len(), 1);
        assert!(values.contains(&literals::encode_integer(80_000_000)));

        // Input order does not matter, only trust does.
        let joined_swapped =
            join_definitions(&[tagged("B", from_b), tagged("A", from_a)], &strategy).unwrap();
        assert_eq!(joined, joined_swapped);
    }

    #[test]
    fn single_source_is_identity_under_every_strategy() {
        let mut def = PrototypeDefinition::bare(id("ex:x"), PrototypeId::empty());
        def.add.insert(prop("ex:p"), id("ex:x"));
        def.remove.insert_remove_all(prop("ex:q"));

        for strategy in [
            JoinStrategy::UnionAll,
            JoinStrategy::PreferSource(vec!["A".into()]),
            JoinStrategy::ConstrainedCardinality {
                max_cardinality: BTreeMap::new(),
                trust_order: vec!["A".into()],
            },
        ] {
            let joined = join_definitions(&[tagged("A", def.clone())], &strategy).unwrap();
            assert_eq!(joined, def);
        }
    }

    #[test]
    fn union_all_merges_disjoint_properties() {
        let mut a = PrototypeDefinition::bare(id("ex:x"), PrototypeId::empty());
        a.add.insert(prop("ex:p"), id("ex:vx"));
        let mut b = PrototypeDefinition::bare(id("ex:x"), PrototypeId::empty());
        b.add.insert(prop("ex:q"), id("ex:vy"));

        let joined =
            join_definitions(&[tagged("A", a), tagged("B", b)], &JoinStrategy::UnionAll).unwrap();
        assert!(joined.add.get(&prop("ex:p")).is_some());
        assert!(joined.add.get(&prop("ex:q")).is_some());
        assert_eq!(joined.add.value_pair_count(), 2);
    }

    #[test]
    fn union_all_refuses_base_conflicts() {
        let a = PrototypeDefinition::bare(id("ex:x"), PrototypeId::empty());
        let b = PrototypeDefinition::bare(id("ex:x"), id("ex:other"));
        assert!(matches!(
            join_definitions(&[tagged("A", a), tagged("B", b)], &JoinStrategy::UnionAll),
            Err(JoinError::BaseConflict { .. })
        ));
    }

    #[test]
    fn mixed_ids_are_refused() {
        let a = PrototypeDefinition::bare(id("ex:x"), PrototypeId::empty());
        let b = PrototypeDefinition::bare(id("ex:y"), PrototypeId::empty());
        assert!(matches!(
            join_definitions(&[tagged("A", a), tagged("B", b)], &JoinStrategy::UnionAll),
            Err(JoinError::MixedIds { .. })
        ));
    }

    #[test]
    fn prefer_source_takes_trusted_properties_wholesale() {
        let p = prop("ex:p");
        let q = prop("ex:q");
        let mut a = PrototypeDefinition::bare(id("ex:x"), PrototypeId::empty());
        a.add.insert(p.clone(), id("ex:fromA"));
        let mut b = PrototypeDefinition::bare(id("ex:x"), id("ex:otherBase"));
        b.add.insert(p.clone(), id("ex:fromB"));
        b.add.insert(q.clone(), id("ex:onlyB"));

        let strategy = JoinStrategy::PreferSource(vec!["A".into(), "B".into()]);
        let joined = join_definitions(&[tagged("B", b), tagged("A", a)], &strategy).unwrap();

        // A owns ex:p, B contributes only the property A lacks. The base
        // comes from the most trusted source.
        assert_eq!(joined.base, PrototypeId::empty());
        let p_values = joined.add.get(&p).unwrap();
        assert_eq!(p_values.iter().collect::<Vec<_>>(), vec![&id("ex:fromA")]);
        assert!(joined.add.get(&q).is_some());
    }

    #[test]
    fn unknown_source_tags_are_refused() {
        let a = PrototypeDefinition::bare(id("ex:x"), PrototypeId::empty());
        assert!(matches!(
            join_definitions(
                &[tagged("mystery", a)],
                &JoinStrategy::PreferSource(vec!["A".into()])
            ),
            Err(JoinError::UnknownSource(_))
        ));
    }

    #[test]
    fn empty_source_list_is_refused() {
        assert!(matches!(
            join_definitions(&[], &JoinStrategy::UnionAll),
            Err(JoinError::NoSources)
        ));
    }
}
