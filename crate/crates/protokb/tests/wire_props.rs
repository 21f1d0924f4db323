//! Wire-format properties: round-trip identity and canonical determinism.

mod common;

use proptest::prelude::*;

use common::{pid, propid};
use protokb::model::{AddChangeSet, PrototypeDefinition, PrototypeId, RemoveChangeSet};
use protokb::wire;

fn arb_iri() -> impl Strategy<Value = String> {
    // Schemes, percent-escapes, sub-delims and non-ASCII all exercised.
    proptest::string::string_regex("[a-z][a-z0-9+.-]{0,3}:[A-Za-z0-9._~/?#@!$&'()*+,;=%C3%A9-]{0,16}")
        .unwrap()
        .prop_filter("IRI must validate", |s| PrototypeId::new(s).is_ok())
}

fn arb_definition() -> impl Strategy<Value = PrototypeDefinition> {
    (
        arb_iri(),
        arb_iri(),
        proptest::collection::vec((arb_iri(), arb_iri()), 0..5),
        proptest::collection::vec((arb_iri(), arb_iri()), 0..4),
        proptest::collection::vec(arb_iri(), 0..3),
    )
        .prop_map(|(id, base, adds, rems, rem_all)| {
            let mut add = AddChangeSet::new();
            for (p, v) in adds {
                add.insert(propid(&p), pid(&v));
            }
            let mut remove = RemoveChangeSet::new();
            for p in rem_all {
                remove.insert_remove_all(propid(&p));
            }
            for (p, v) in rems {
                remove.insert_removal(propid(&p), pid(&v));
            }
            PrototypeDefinition::new(pid(&id), pid(&base), add, remove)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn decode_inverts_encode(def in arb_definition()) {
        let encoded = wire::encode_definition(&def);
        let decoded = wire::decode_definition(&encoded).unwrap();
        prop_assert_eq!(&decoded, &def);
    }

    #[test]
    fn encode_is_deterministic_and_canonical(def in arb_definition()) {
        let once = wire::encode_definition(&def);
        let twice = wire::encode_definition(&def);
        prop_assert_eq!(&once, &twice);
        // Canonical documents re-encode to themselves.
        let reencoded = wire::encode_definition(&wire::decode_definition(&once).unwrap());
        prop_assert_eq!(once, reencoded);
    }

    #[test]
    fn batch_round_trips(defs in proptest::collection::vec(arb_definition(), 0..6)) {
        let doc = wire::encode_batch(defs.iter());
        let decoded = wire::decode_batch(&doc).unwrap();
        prop_assert_eq!(decoded, defs);
    }
}

#[test]
fn canonical_key_order_is_fixed() {
    let def = PrototypeDefinition::bare(pid("ex:a"), PrototypeId::empty());
    let text = String::from_utf8(wire::encode_definition(&def)).unwrap();
    let positions: Vec<usize> = ["\"id\"", "\"base\"", "\"add\"", "\"rem\"", "\"remAll\""]
        .iter()
        .map(|key| text.find(key).unwrap())
        .collect();
    let mut sorted = positions.clone();
    sorted.sort_unstable();
    assert_eq!(positions, sorted, "keys must appear in the fixed order: {text}");
    assert!(!text.contains(' '), "no insignificant whitespace: {text}");
}

#[test]
fn property_keys_and_values_are_sorted() {
    let mut add = AddChangeSet::new();
    add.insert(propid("ex:zz"), pid("ex:v2"));
    add.insert(propid("ex:aa"), pid("ex:v9"));
    add.insert(propid("ex:aa"), pid("ex:v1"));
    let def = PrototypeDefinition::new(
        pid("ex:a"),
        PrototypeId::empty(),
        add,
        RemoveChangeSet::new(),
    );
    let text = String::from_utf8(wire::encode_definition(&def)).unwrap();
    assert!(
        text.contains(r#""add":{"ex:aa":["ex:v1","ex:v9"],"ex:zz":["ex:v2"]}"#),
        "{text}"
    );
}
