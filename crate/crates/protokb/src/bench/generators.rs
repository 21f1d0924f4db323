//! Seeded synthetic dataset generators.
//!
//! Three families, all deterministic in `(spec, seed)`:
//!
//! * `baseline(n)` — a complete binary inheritance tree of depth `n`
//!   (levels `0..=n`, level `k` holding `2^k` prototypes, `2^(n+1)-1`
//!   total) with no properties. Ideal for consistency and fixpoint
//!   scaling measurements.
//! * `blocks(B, S)` — `B` blocks of `S` prototypes. Each prototype derives
//!   from a random prototype in the block directly below and adds one
//!   value, under a single shared property, chosen randomly from that same
//!   block. The bottom block derives from the empty prototype and always
//!   adds one designated anchor prototype as the value. Fixpoints of block
//!   `i` carry exactly `i` values, so the interpretation-wide mean is
//!   `(B+1)/2` and the population st.dev. is `sqrt((B^2-1)/12)`.
//! * `incremental(M)` — `M` prototypes created one at a time; each derives
//!   from a uniformly random earlier prototype and receives `c ∈ {0..4}`
//!   property assignments (with replacement) over 10 fixed properties,
//!   each value uniformly random over all `M` prototypes (forward
//!   references are fine — the complete set is checked at build time).
//!
//! Randomness comes from ChaCha8 seeded with the 64-bit dataset seed; all
//! draws are 64-bit outputs reduced modulo the range, in the documented
//! order, so a dataset can be reproduced bit-exactly from `(spec, seed)`
//! by any implementation.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{PropertyId, PrototypeDefinition, PrototypeId};

/// Which synthetic dataset to generate, and at what size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum DatasetSpec {
    /// `2^(n+1) - 1` property-free prototypes in a binary tree.
    Baseline { n: u32 },
    /// `blocks * block_size` prototypes plus one anchor value prototype.
    Blocks { blocks: u32, block_size: u32 },
    /// `count` prototypes with 0–4 random property assignments each.
    Incremental { count: u64 },
}

impl DatasetSpec {
    /// Closed-form number of prototypes the generator will emit (the
    /// blocks anchor prototype included).
    pub fn prototype_count(&self) -> u64 {
        match *self {
            DatasetSpec::Baseline { n } => (1u64 << (n + 1)) - 1,
            DatasetSpec::Blocks { blocks, block_size } => {
                u64::from(blocks) * u64::from(block_size) + 1
            }
            DatasetSpec::Incremental { count } => count,
        }
    }

    pub fn generate(&self, seed: u64) -> Dataset {
        match *self {
            DatasetSpec::Baseline { n } => gen_baseline(n, seed),
            DatasetSpec::Blocks { blocks, block_size } => gen_blocks(blocks, block_size, seed),
            DatasetSpec::Incremental { count } => gen_incremental(count, seed),
        }
    }
}

impl std::fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            DatasetSpec::Baseline { n } => write!(f, "baseline({n})"),
            DatasetSpec::Blocks { blocks, block_size } => {
                write!(f, "blocks({blocks},{block_size})")
            }
            DatasetSpec::Incremental { count } => write!(f, "incremental({count})"),
        }
    }
}

/// A generated dataset: the definitions in creation order plus the IDs
/// that property statistics cover (everything except auxiliary scaffolding
/// like the blocks anchor).
pub struct Dataset {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub definitions: Vec<PrototypeDefinition>,
    /// Index into `definitions` from which the family's member prototypes
    /// start; entries before it are auxiliary.
    pub members_from: usize,
}

impl Dataset {
    /// The family's member definitions (auxiliary prototypes excluded).
    pub fn members(&self) -> &[PrototypeDefinition] {
        &self.definitions[self.members_from..]
    }

    pub fn member_ids(&self) -> impl Iterator<Item = &PrototypeId> {
        self.members().iter().map(|d| &d.id)
    }
}

fn bench_id(text: String) -> PrototypeId {
    PrototypeId::new(text).expect("generator IRIs are valid")
}

/// Uniform draw in `0..n` as one 64-bit output reduced modulo `n`.
fn draw(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    rng.next_u64() % n
}

/// Binary inheritance tree: level 0 is based on the empty prototype, each
/// level-`k` prototype is based on the level-(`k-1`) prototype with half
/// its index. No randomness, no properties. Base IDs share the parent's
/// allocation.
pub fn gen_baseline(n: u32, seed: u64) -> Dataset {
    let spec = DatasetSpec::Baseline { n };
    let mut definitions = Vec::with_capacity(spec.prototype_count() as usize);
    let mut parents = vec![bench_id("bench:baseline/0/0".into())];
    definitions.push(PrototypeDefinition::bare(
        parents[0].clone(),
        PrototypeId::empty(),
    ));
    for level in 1..=n {
        let mut current = Vec::with_capacity(1 << level);
        for index in 0u64..(1u64 << level) {
            let id = bench_id(format!("bench:baseline/{level}/{index}"));
            current.push(id.clone());
            definitions.push(PrototypeDefinition::bare(
                id,
                parents[(index / 2) as usize].clone(),
            ));
        }
        parents = current;
    }
    Dataset {
        spec,
        seed,
        definitions,
        members_from: 0,
    }
}

/// Property shared by every blocks prototype.
pub fn blocks_property() -> PropertyId {
    PropertyId::new("bench:prop/blocks").expect("valid IRI")
}

/// ID of the designated anchor prototype all bottom-block values point to.
pub fn blocks_anchor_id() -> PrototypeId {
    PrototypeId::new("bench:blocks/anchor").expect("valid IRI")
}

fn blocks_member_id(block: u32, index: u64) -> PrototypeId {
    bench_id(format!("bench:blocks/{block}/{index}"))
}

/// Stacked blocks. Draw order per prototype in block `i > 1`: base index,
/// then value index, both into block `i - 1`. Block 1 uses no randomness.
pub fn gen_blocks(blocks: u32, block_size: u32, seed: u64) -> Dataset {
    assert!(blocks >= 1 && block_size >= 1);
    let spec = DatasetSpec::Blocks { blocks, block_size };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let property = blocks_property();
    let size = u64::from(block_size);
    let anchor = blocks_anchor_id();

    let mut definitions = Vec::with_capacity(spec.prototype_count() as usize);
    definitions.push(PrototypeDefinition::bare(anchor.clone(), PrototypeId::empty()));

    let mut below: Vec<PrototypeId> = Vec::with_capacity(block_size as usize);
    for index in 0..size {
        let id = blocks_member_id(1, index);
        below.push(id.clone());
        let mut def = PrototypeDefinition::bare(id, PrototypeId::empty());
        def.add.insert(property.clone(), anchor.clone());
        definitions.push(def);
    }
    for block in 2..=blocks {
        let mut current = Vec::with_capacity(block_size as usize);
        for index in 0..size {
            let base = below[draw(&mut rng, size) as usize].clone();
            let value = below[draw(&mut rng, size) as usize].clone();
            let id = blocks_member_id(block, index);
            current.push(id.clone());
            let mut def = PrototypeDefinition::bare(id, base);
            def.add.insert(property.clone(), value);
            definitions.push(def);
        }
        below = current;
    }

    Dataset {
        spec,
        seed,
        definitions,
        members_from: 1,
    }
}

fn incremental_id(index: u64) -> PrototypeId {
    bench_id(format!("bench:inc/{index}"))
}

/// The 10 fixed properties of the incremental family.
pub fn incremental_properties() -> Vec<PropertyId> {
    (0..10)
        .map(|i| PropertyId::new(format!("bench:prop/p{i}")).expect("valid IRI"))
        .collect()
}

/// One-at-a-time growth. Draw order for prototype `k` (1-based): base
/// index among `1..k` (skipped for `k = 1`, which derives from the empty
/// prototype), property-assignment count `c = draw(5)`, then `c` times a
/// property index in `0..10` followed by a value index in `1..=count`.
pub fn gen_incremental(count: u64, seed: u64) -> Dataset {
    assert!(count >= 1);
    let spec = DatasetSpec::Incremental { count };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let properties = incremental_properties();
    let ids: Vec<PrototypeId> = (1..=count).map(incremental_id).collect();

    let mut definitions = Vec::with_capacity(count as usize);
    for k in 1..=count {
        let base = if k == 1 {
            PrototypeId::empty()
        } else {
            ids[draw(&mut rng, k - 1) as usize].clone()
        };
        let mut def = PrototypeDefinition::bare(ids[(k - 1) as usize].clone(), base);
        let assignments = draw(&mut rng, 5);
        for _ in 0..assignments {
            let property = properties[draw(&mut rng, 10) as usize].clone();
            let value = ids[draw(&mut rng, count) as usize].clone();
            def.add.insert(property, value);
        }
        definitions.push(def);
    }

    Dataset {
        spec,
        seed,
        definitions,
        members_from: 0,
    }
}
