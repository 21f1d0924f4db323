//! Fixpoint (interpretation) computation.
//!
//! The fixpoint of a prototype is its fully resolved form: every change set
//! along the base chain applied, expressed as a definition over the empty
//! prototype with additions only. The computation walks the base chain with
//! an explicit stack (no call recursion, so chains can be arbitrarily deep)
//! and memoizes through a [`FixpointCache`]: once a base's fixpoint is
//! known, every prototype deriving from it reuses that result.
//!
//! Only IDs that are actually used are materialized — the literal space of
//! a predefined KB is never enumerated.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use std::sync::LazyLock;

use super::index::DigestIndex;
use crate::model::{
    apply_changeset, AddChangeSet, KbError, KnowledgeBase, PropertyMap, PrototypeDefinition,
    PrototypeId, RemoveChangeSet, StoredBaseLink,
};

/// A prototype's fully resolved properties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixpointDefinition {
    pub id: PrototypeId,
    pub properties: PropertyMap,
}

impl FixpointDefinition {
    /// The equivalent ordinary definition: `(id, (PROTO:P_0, ADD, ∅))`
    /// with `ADD` carrying the properties.
    pub fn to_definition(&self) -> PrototypeDefinition {
        let add: AddChangeSet = self
            .properties
            .iter()
            .flat_map(|(p, vs)| vs.iter().map(move |v| (p.clone(), v.clone())))
            .collect();
        PrototypeDefinition::new(
            self.id.clone(),
            PrototypeId::empty(),
            add,
            RemoveChangeSet::new(),
        )
    }
}

/// Shared memoization store for fixpoints.
///
/// An explicit value passed into the computation, not hidden global state:
/// knowledge bases stay immutable and memoization is observable. Inserts
/// are idempotent (a recomputed fixpoint is identical by determinism), so
/// concurrent writers need no coordination beyond the lock.
#[derive(Debug, Default)]
pub struct FixpointCache {
    map: RwLock<HashMap<PrototypeId, Arc<PropertyMap>>>,
    applications: AtomicUsize,
}

impl FixpointCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &PrototypeId) -> Option<Arc<PropertyMap>> {
        self.map.read().expect("cache lock").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of single-step change-set applications performed through
    /// this cache. With memoization this never exceeds the number of
    /// definitions resolved.
    pub fn applications(&self) -> usize {
        self.applications.load(Ordering::Relaxed)
    }

    /// Pre-sizes the store for a known workload.
    pub fn reserve(&self, additional: usize) {
        self.map.write().expect("cache lock").reserve(additional);
    }

    fn insert(&self, id: PrototypeId, props: Arc<PropertyMap>) {
        self.map.write().expect("cache lock").entry(id).or_insert(props);
    }
}

/// Fixpoint computation failure.
#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown prototype {0}")]
    UnknownPrototype(PrototypeId),
    /// The base chain revisits a prototype — the KB was not checked.
    #[error("cyclic inheritance through {0}")]
    CyclicInheritance(PrototypeId),
    /// The KB cannot enumerate its definitions (remote or literal KB).
    #[error("knowledge base cannot be enumerated")]
    Unenumerable,
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Computes the fixpoint of `id` in `kb`, reusing and extending `cache`.
pub fn compute_fixpoint(
    kb: &dyn KnowledgeBase,
    id: &PrototypeId,
    cache: &FixpointCache,
) -> Result<FixpointDefinition, EngineError> {
    let properties = resolve(kb, id, cache)?;
    Ok(FixpointDefinition {
        id: id.clone(),
        properties: (*properties).clone(),
    })
}

static EMPTY_PROPS: LazyLock<Arc<PropertyMap>> = LazyLock::new(|| Arc::new(PropertyMap::new()));

/// Empty results share one allocation; property-free inheritance chains
/// are common (the whole baseline family) and need no per-node maps.
fn share_if_empty(map: PropertyMap) -> Arc<PropertyMap> {
    if map.is_empty() {
        EMPTY_PROPS.clone()
    } else {
        Arc::new(map)
    }
}

fn resolve(
    kb: &dyn KnowledgeBase,
    id: &PrototypeId,
    cache: &FixpointCache,
) -> Result<Arc<PropertyMap>, EngineError> {
    // Walk up the base chain until something already known.
    let mut pending: Vec<Arc<PrototypeDefinition>> = Vec::new();
    let mut on_chain: std::collections::HashSet<PrototypeId> = std::collections::HashSet::new();
    let mut cursor = id.clone();
    let mut props: Arc<PropertyMap> = loop {
        if cursor.is_empty_prototype() {
            break EMPTY_PROPS.clone();
        }
        if let Some(found) = cache.get(&cursor) {
            break found;
        }
        if !on_chain.insert(cursor.clone()) {
            return Err(EngineError::CyclicInheritance(cursor));
        }
        let def = kb
            .is_defined(&cursor)?
            .ok_or_else(|| EngineError::UnknownPrototype(cursor.clone()))?;
        cursor = def.base.clone();
        pending.push(def);
    };

    // Unwind, applying one change set per definition and caching each
    // intermediate fixpoint.
    while let Some(def) = pending.pop() {
        let next = share_if_empty(apply_changeset(&props, &def.remove, &def.add));
        cache.applications.fetch_add(1, Ordering::Relaxed);
        cache.insert(def.id.clone(), next.clone());
        props = next;
    }
    Ok(props)
}

/// Computes the interpretation of `kb`: one fixpoint per stored definition
/// (the implicit empty prototype and pattern-recognized literals excluded).
/// Shared bases are resolved once.
pub fn compute_interpretation(
    kb: &dyn KnowledgeBase,
) -> Result<HashMap<PrototypeId, FixpointDefinition>, EngineError> {
    dense_interpretation(kb, None)
}

/// Where a definition's base points within the dense interpretation
/// working set.
#[derive(Clone, Copy)]
enum BaseLink {
    Empty,
    /// Another stored definition, by dense index.
    Stored(u32),
    /// Outside the stored set (defined by a literal or remote basis);
    /// resolved through the generic cache-backed walk.
    External,
}

/// Generic path: collect the stored definitions, drop duplicates (chained
/// KBs may list an ID twice; the first occurrence wins, matching lookup
/// order), and resolve base edges against a digest table.
fn resolve_links(
    kb: &dyn KnowledgeBase,
) -> Result<(Vec<Arc<PrototypeDefinition>>, Vec<BaseLink>), EngineError> {
    let stored = kb.stored_definitions().ok_or(EngineError::Unenumerable)?;
    let all: Vec<Arc<PrototypeDefinition>> = stored
        .filter(|def| !def.id.is_empty_prototype())
        .collect();

    let mut table = DigestIndex::from_ids(all.iter().map(|d| &d.id));
    let duplicate_handles = table.duplicates();
    table.remove_handles(&duplicate_handles);

    // Handles in `table` refer to the pre-dedup numbering; `remap` bridges
    // to the dense one (identity in the common duplicate-free case).
    let (ordered, remap): (Vec<Arc<PrototypeDefinition>>, HashMap<u32, u32>) =
        if duplicate_handles.is_empty() {
            (all, HashMap::new())
        } else {
            let mut remap = HashMap::new();
            let mut kept = Vec::with_capacity(all.len() - duplicate_handles.len());
            for (old, def) in all.into_iter().enumerate() {
                if duplicate_handles.binary_search(&(old as u32)).is_err() {
                    remap.insert(old as u32, kept.len() as u32);
                    kept.push(def);
                }
            }
            (kept, remap)
        };
    let to_dense = |handle: u32| -> u32 {
        if remap.is_empty() {
            handle
        } else {
            remap[&handle]
        }
    };

    let links: Vec<BaseLink> = ordered
        .iter()
        .map(|def| {
            if def.base.is_empty_prototype() {
                BaseLink::Empty
            } else if let Some(j) = table.find(&def.base) {
                BaseLink::Stored(to_dense(j))
            } else {
                BaseLink::External
            }
        })
        .collect();
    Ok((ordered, links))
}

/// As [`compute_interpretation`], reusing fixpoints already in `cache`
/// and filling it with every newly computed one.
pub fn compute_interpretation_with(
    kb: &dyn KnowledgeBase,
    cache: &FixpointCache,
) -> Result<HashMap<PrototypeId, FixpointDefinition>, EngineError> {
    dense_interpretation(kb, Some(cache))
}

/// The stored definitions are resolved to dense indices first and the
/// whole pass then runs over flat arrays: per prototype there is exactly
/// one change-set application and no repeated lookups, which keeps the
/// pass linear even at millions of prototypes.
fn dense_interpretation(
    kb: &dyn KnowledgeBase,
    shared: Option<&FixpointCache>,
) -> Result<HashMap<PrototypeId, FixpointDefinition>, EngineError> {
    // Checked KBs hand out their already-resolved base edges; everything
    // else goes through ID resolution against a digest table.
    let (ordered, links): (Vec<Arc<PrototypeDefinition>>, Vec<BaseLink>) =
        if let Some(stored_links) = kb.stored_base_links() {
            let ordered: Vec<Arc<PrototypeDefinition>> = kb
                .stored_definitions()
                .ok_or(EngineError::Unenumerable)?
                .collect();
            debug_assert_eq!(ordered.len(), stored_links.len());
            let links = stored_links
                .iter()
                .map(|link| match link {
                    StoredBaseLink::Empty => BaseLink::Empty,
                    StoredBaseLink::Stored(j) => BaseLink::Stored(*j),
                    StoredBaseLink::External => BaseLink::External,
                })
                .collect();
            (ordered, links)
        } else {
            resolve_links(kb)?
        };
    let n = ordered.len();

    // Fixpoints by dense index; entries already in the shared cache are
    // honored up front so no work is repeated.
    let mut props: Vec<Option<Arc<PropertyMap>>> = vec![None; n];
    if let Some(cache) = shared {
        let map = cache.map.read().expect("cache lock");
        if !map.is_empty() && !ordered.is_empty() {
            let table = DigestIndex::from_ids(ordered.iter().map(|d| &d.id));
            for (id, cached) in map.iter() {
                if let Some(j) = table.find(id) {
                    props[j as usize] = Some(cached.clone());
                }
            }
        }
    }

    // External (basis-defined) bases go through the generic cache-backed
    // walk; a scratch cache serves when the caller brought none.
    let scratch = FixpointCache::new();
    let walk_cache = shared.unwrap_or(&scratch);
    let empty = EMPTY_PROPS.clone();
    let mut pending: Vec<u32> = Vec::new();
    for start in 0..n {
        if props[start].is_some() {
            continue;
        }
        pending.clear();
        let mut cursor = start as u32;
        let mut inherited: Arc<PropertyMap> = loop {
            let at = cursor as usize;
            if let Some(found) = &props[at] {
                break found.clone();
            }
            if pending.len() > n {
                return Err(EngineError::CyclicInheritance(ordered[at].id.clone()));
            }
            pending.push(cursor);
            match links[at] {
                BaseLink::Empty => break empty.clone(),
                BaseLink::External => break resolve(kb, &ordered[at].base, walk_cache)?,
                BaseLink::Stored(next) => cursor = next,
            }
        };
        while let Some(i) = pending.pop() {
            let def = &ordered[i as usize];
            let next = share_if_empty(apply_changeset(&inherited, &def.remove, &def.add));
            walk_cache.applications.fetch_add(1, Ordering::Relaxed);
            props[i as usize] = Some(next.clone());
            inherited = next;
        }
    }

    if let Some(cache) = shared {
        cache.reserve(n);
        for (i, def) in ordered.iter().enumerate() {
            let computed = props[i].as_ref().expect("every index resolved");
            cache.insert(def.id.clone(), computed.clone());
        }
    }

    let mut result: HashMap<PrototypeId, FixpointDefinition> = HashMap::with_capacity(n);
    for (i, def) in ordered.iter().enumerate() {
        let computed = props[i].take().expect("every index resolved");
        result.insert(
            def.id.clone(),
            FixpointDefinition {
                id: def.id.clone(),
                properties: Arc::try_unwrap(computed).unwrap_or_else(|arc| (*arc).clone()),
            },
        );
    }
    Ok(result)
}
