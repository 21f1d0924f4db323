//! Shared helpers for the integration and acceptance suites: seeded random
//! knowledge bases, an independent fixpoint resolver, and planted-fault
//! mutators.

#![allow(dead_code)] // each test binary uses a subset

use std::collections::HashMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use protokb::model::{
    apply_changeset, AddChangeSet, PropertyId, PropertyMap, PrototypeDefinition, PrototypeId,
    RemoveChangeSet,
};

pub fn pid(s: &str) -> PrototypeId {
    PrototypeId::new(s).unwrap()
}

pub fn propid(s: &str) -> PropertyId {
    PropertyId::new(s).unwrap()
}

pub fn draw(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

/// A consistent random KB: bases always point at earlier prototypes (or
/// the empty prototype), values stay inside the generated ID set, change
/// sets mix additions, removals and remove-alls.
pub fn random_consistent_defs(seed: u64, n: usize) -> Vec<PrototypeDefinition> {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<PrototypeId> = (0..n).map(|i| pid(&format!("t:p{i}"))).collect();
    let props: Vec<PropertyId> = (0..8).map(|j| propid(&format!("t:prop{j}"))).collect();

    let mut defs = Vec::with_capacity(n);
    for i in 0..n {
        let base = if i == 0 {
            PrototypeId::empty()
        } else {
            match draw(&mut rng, i as u64 + 1) {
                0 => PrototypeId::empty(),
                b => ids[(b - 1) as usize].clone(),
            }
        };

        let mut add = AddChangeSet::new();
        for _ in 0..draw(&mut rng, 4) {
            let p = props[draw(&mut rng, 8) as usize].clone();
            let v = ids[draw(&mut rng, n as u64) as usize].clone();
            add.insert(p, v);
        }

        let mut remove = RemoveChangeSet::new();
        for _ in 0..draw(&mut rng, 3) {
            let p = props[draw(&mut rng, 8) as usize].clone();
            let v = ids[draw(&mut rng, n as u64) as usize].clone();
            remove.insert_removal(p, v);
        }
        if draw(&mut rng, 8) == 0 {
            remove.insert_remove_all(props[draw(&mut rng, 8) as usize].clone());
        }

        defs.push(PrototypeDefinition::new(ids[i].clone(), base, add, remove));
    }
    defs
}

pub fn by_id(defs: &[PrototypeDefinition]) -> HashMap<PrototypeId, PrototypeDefinition> {
    defs.iter().map(|d| (d.id.clone(), d.clone())).collect()
}

/// Independent oracle: plain unmemoized recursion straight off the
/// definition of a fixpoint. Kept separate from the engine on purpose.
pub fn naive_fixpoint(
    defs: &HashMap<PrototypeId, PrototypeDefinition>,
    id: &PrototypeId,
) -> PropertyMap {
    if id.is_empty_prototype() {
        return PropertyMap::new();
    }
    let def = defs.get(id).expect("oracle input must define the ID");
    let inherited = naive_fixpoint(defs, &def.base);
    apply_changeset(&inherited, &def.remove, &def.add)
}

/// The five fault kinds the consistency checker must detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    DanglingBase,
    DanglingValue,
    BaseCycle,
    DuplicateId,
    InvalidIriOnDecode,
}

pub const ALL_FAULTS: [FaultKind; 5] = [
    FaultKind::DanglingBase,
    FaultKind::DanglingValue,
    FaultKind::BaseCycle,
    FaultKind::DuplicateId,
    FaultKind::InvalidIriOnDecode,
];

/// What was planted, so the report can be checked for the exact violation.
#[derive(Debug)]
pub enum PlantedFault {
    DanglingBase { from: PrototypeId, missing: PrototypeId },
    DanglingValue { from: PrototypeId, missing: PrototypeId },
    BaseCycle { ring: Vec<PrototypeId> },
    DuplicateId { id: PrototypeId },
    /// The mutated definitions must be fed through the wire decoder.
    InvalidIriOnDecode { documents: Vec<Vec<u8>>, bad_iri: String },
}

/// Mutates a consistent KB so it carries exactly one planted fault.
pub fn plant_fault(
    defs: &mut Vec<PrototypeDefinition>,
    kind: FaultKind,
    seed: u64,
) -> PlantedFault {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(1));
    let n = defs.len();
    match kind {
        FaultKind::DanglingBase => {
            let k = draw(&mut rng, n as u64) as usize;
            let missing = pid(&format!("t:missing{}", draw(&mut rng, 1_000_000)));
            defs[k].base = missing.clone();
            PlantedFault::DanglingBase {
                from: defs[k].id.clone(),
                missing,
            }
        }
        FaultKind::DanglingValue => {
            let k = draw(&mut rng, n as u64) as usize;
            let missing = pid(&format!("t:missing{}", draw(&mut rng, 1_000_000)));
            defs[k].add.insert(propid("t:prop0"), missing.clone());
            PlantedFault::DanglingValue {
                from: defs[k].id.clone(),
                missing,
            }
        }
        FaultKind::BaseCycle => {
            let len = 1 + draw(&mut rng, 3) as usize;
            let mut picks: Vec<usize> = Vec::new();
            while picks.len() < len.min(n) {
                let c = draw(&mut rng, n as u64) as usize;
                if !picks.contains(&c) {
                    picks.push(c);
                }
            }
            picks.sort_unstable();
            let ring: Vec<PrototypeId> = picks.iter().map(|&i| defs[i].id.clone()).collect();
            for (pos, &i) in picks.iter().enumerate() {
                defs[i].base = ring[(pos + 1) % ring.len()].clone();
            }
            PlantedFault::BaseCycle { ring }
        }
        FaultKind::DuplicateId => {
            let k = draw(&mut rng, n as u64) as usize;
            let id = defs[k].id.clone();
            defs.push(PrototypeDefinition::bare(id.clone(), PrototypeId::empty()));
            PlantedFault::DuplicateId { id }
        }
        FaultKind::InvalidIriOnDecode => {
            let k = draw(&mut rng, n as u64) as usize;
            let bad_iri = "not an iri".to_owned();
            let documents: Vec<Vec<u8>> = defs
                .iter()
                .enumerate()
                .map(|(i, def)| {
                    let encoded = protokb::wire::encode_definition(def);
                    if i != k {
                        return encoded;
                    }
                    let mut value: serde_json::Value =
                        serde_json::from_slice(&encoded).unwrap();
                    // Rotate the corrupted slot across id, base and a value.
                    match draw(&mut rng, 3) {
                        0 => value["id"] = bad_iri.clone().into(),
                        1 => value["base"] = bad_iri.clone().into(),
                        _ => {
                            value["add"] = serde_json::json!({
                                "t:prop0": [bad_iri.clone()],
                            });
                        }
                    }
                    serde_json::to_vec(&value).unwrap()
                })
                .collect();
            PlantedFault::InvalidIriOnDecode { documents, bad_iri }
        }
    }
}

/// Least-squares fit of `y = a + b·x`, returning `R²`.
pub fn linear_fit_r_squared(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let ss_xy: f64 = points
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let ss_xx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let ss_yy: f64 = points.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
    if ss_xx == 0.0 || ss_yy == 0.0 {
        return 1.0;
    }
    (ss_xy * ss_xy) / (ss_xx * ss_yy)
}
