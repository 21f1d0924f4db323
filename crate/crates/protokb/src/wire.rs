//! Canonical JSON serialization of prototype definitions.
//!
//! A definition is one JSON object; a batch is a JSON array of them:
//!
//! ```json
//! {"id":"theID","base":"baseID","add":{"propA":["id1"]},"rem":{},"remAll":[]}
//! ```
//!
//! The canonical encoding is byte-deterministic: object keys in the fixed
//! order `id`, `base`, `add`, `rem`, `remAll`; property keys and value
//! arrays sorted lexicographically by IRI; no insignificant whitespace.
//! That determinism is what makes HTTP entity tags stable, so the encoder
//! writes bytes directly instead of going through a generic JSON value.
//!
//! Decoding accepts any well-formed document of the right shape: `add`,
//! `rem` and `remAll` default to empty when absent, duplicate array
//! elements are dropped, and removals subsumed by `remAll` are normalized
//! away. IRIs are re-validated.

use serde_json::Value;

use crate::iri::InvalidIri;
use crate::model::{
    AddChangeSet, PropertyId, PropertyMap, PrototypeDefinition, PrototypeId, RemoveChangeSet,
};

/// Decode failure.
#[derive(Debug, thiserror::Error)]
pub enum WireError {
    /// Not JSON, or JSON of the wrong shape.
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    /// A mandatory field (`id` or `base`) is absent.
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    /// A field failed IRI validation.
    #[error(transparent)]
    InvalidIri(#[from] InvalidIri),
}

fn malformed(what: impl Into<String>) -> WireError {
    WireError::MalformedDocument(what.into())
}

/// Encodes one definition in canonical form.
pub fn encode_definition(def: &PrototypeDefinition) -> Vec<u8> {
    let mut out = String::new();
    write_definition(&mut out, def);
    out.into_bytes()
}

/// Encodes a fixpoint. The output is wire-indistinguishable from an
/// ordinary definition: base `PROTO:P_0`, the properties as additions, and
/// empty removal sets.
pub fn encode_fixpoint(id: &PrototypeId, properties: &PropertyMap) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("{\"id\":");
    write_json_string(&mut out, id.as_str());
    out.push_str(",\"base\":");
    write_json_string(&mut out, crate::model::EMPTY_PROTOTYPE_IRI);
    out.push_str(",\"add\":");
    write_value_map(&mut out, properties.iter().map(|(p, vs)| (p, vs.iter())));
    out.push_str(",\"rem\":{},\"remAll\":[]}");
    out.into_bytes()
}

/// Encodes a batch as a JSON array, order-preserving. Elements are byte
/// identical to their single encodings.
pub fn encode_batch<'a>(defs: impl IntoIterator<Item = &'a PrototypeDefinition>) -> Vec<u8> {
    let mut out = String::new();
    out.push('[');
    for (i, def) in defs.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_definition(&mut out, def);
    }
    out.push(']');
    out.into_bytes()
}

/// Encodes a batch of fixpoints; elements are byte identical to their
/// [`encode_fixpoint`] encodings.
pub fn encode_fixpoint_batch<'a>(
    items: impl IntoIterator<Item = (&'a PrototypeId, &'a PropertyMap)>,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(b'[');
    for (i, (id, properties)) in items.into_iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        out.extend(encode_fixpoint(id, properties));
    }
    out.push(b']');
    out
}

/// Encodes a list of prototype IDs (the batch request payload).
pub fn encode_id_list<'a>(ids: impl IntoIterator<Item = &'a PrototypeId>) -> Vec<u8> {
    let mut out = String::new();
    out.push('[');
    for (i, id) in ids.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_json_string(&mut out, id.as_str());
    }
    out.push(']');
    out.into_bytes()
}

fn write_definition(out: &mut String, def: &PrototypeDefinition) {
    out.push_str("{\"id\":");
    write_json_string(out, def.id.as_str());
    out.push_str(",\"base\":");
    write_json_string(out, def.base.as_str());
    out.push_str(",\"add\":");
    write_value_map(out, def.add.iter().map(|(p, vs)| (p, vs.iter())));
    out.push_str(",\"rem\":");
    write_value_map(out, def.remove.removals().map(|(p, vs)| (p, vs.iter())));
    out.push_str(",\"remAll\":[");
    for (i, p) in def.remove.remove_all().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_json_string(out, p.as_str());
    }
    out.push_str("]}");
}

fn write_value_map<'a>(
    out: &mut String,
    entries: impl Iterator<Item = (&'a PropertyId, impl Iterator<Item = &'a PrototypeId>)>,
) {
    out.push('{');
    for (i, (property, values)) in entries.enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_json_string(out, property.as_str());
        out.push_str(":[");
        for (j, value) in values.enumerate() {
            if j > 0 {
                out.push(',');
            }
            write_json_string(out, value.as_str());
        }
        out.push_str("]");
    }
    out.push('}');
}

fn write_json_string(out: &mut String, s: &str) {
    // serde_json's escaping is the reference for string bytes.
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

/// Decodes one definition, validating IRIs and canonicalizing.
pub fn decode_definition(doc: &[u8]) -> Result<PrototypeDefinition, WireError> {
    let value: Value =
        serde_json::from_slice(doc).map_err(|e| malformed(format!("not JSON: {e}")))?;
    decode_definition_value(&value)
}

/// Decodes a JSON array of definitions. Any malformed element aborts the
/// whole decode.
pub fn decode_batch(doc: &[u8]) -> Result<Vec<PrototypeDefinition>, WireError> {
    let value: Value =
        serde_json::from_slice(doc).map_err(|e| malformed(format!("not JSON: {e}")))?;
    let Value::Array(items) = value else {
        return Err(malformed("expected a JSON array of definitions"));
    };
    items.iter().map(decode_definition_value).collect()
}

/// Decodes a JSON array of ID strings.
pub fn decode_id_list(doc: &[u8]) -> Result<Vec<PrototypeId>, WireError> {
    let value: Value =
        serde_json::from_slice(doc).map_err(|e| malformed(format!("not JSON: {e}")))?;
    let Value::Array(items) = value else {
        return Err(malformed("expected a JSON array of ID strings"));
    };
    items
        .iter()
        .map(|item| {
            let s = item
                .as_str()
                .ok_or_else(|| malformed("ID list elements must be strings"))?;
            Ok(PrototypeId::new(s)?)
        })
        .collect()
}

fn decode_definition_value(value: &Value) -> Result<PrototypeDefinition, WireError> {
    let Value::Object(obj) = value else {
        return Err(malformed("expected a JSON object"));
    };

    let id = required_iri(obj, "id")?;
    let base = required_iri(obj, "base")?;
    let id = PrototypeId::new(id)?;
    let base = PrototypeId::new(base)?;

    let mut add = AddChangeSet::new();
    for (property, values) in value_map_entries(obj, "add")? {
        for v in values {
            add.insert(property.clone(), v);
        }
    }

    let mut remove = RemoveChangeSet::new();
    // remAll first: removals it subsumes are then dropped on insertion.
    if let Some(rem_all) = obj.get("remAll") {
        let Value::Array(items) = rem_all else {
            return Err(malformed("\"remAll\" must be an array"));
        };
        for item in items {
            let s = item
                .as_str()
                .ok_or_else(|| malformed("\"remAll\" elements must be strings"))?;
            remove.insert_remove_all(PropertyId::new(s)?);
        }
    }
    for (property, values) in value_map_entries(obj, "rem")? {
        for v in values {
            remove.insert_removal(property.clone(), v);
        }
    }

    Ok(PrototypeDefinition::new(id, base, add, remove))
}

fn required_iri<'a>(
    obj: &'a serde_json::Map<String, Value>,
    field: &'static str,
) -> Result<&'a str, WireError> {
    match obj.get(field) {
        None => Err(WireError::MissingField(field)),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(malformed(format!("{field:?} must be a string"))),
    }
}

fn value_map_entries(
    obj: &serde_json::Map<String, Value>,
    field: &'static str,
) -> Result<Vec<(PropertyId, Vec<PrototypeId>)>, WireError> {
    let Some(raw) = obj.get(field) else {
        return Ok(Vec::new());
    };
    let Value::Object(map) = raw else {
        return Err(malformed(format!("{field:?} must be an object")));
    };
    let mut entries = Vec::with_capacity(map.len());
    for (property, values) in map {
        let Value::Array(items) = values else {
            return Err(malformed(format!(
                "{field:?} entries must map to arrays of ID strings"
            )));
        };
        let property = PropertyId::new(property)?;
        let mut ids = Vec::with_capacity(items.len());
        for item in items {
            let s = item
                .as_str()
                .ok_or_else(|| malformed(format!("{field:?} values must be strings")))?;
            ids.push(PrototypeId::new(s)?);
        }
        entries.push((property, ids));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> PrototypeId {
        PrototypeId::new(s).unwrap()
    }

    fn prop(s: &str) -> PropertyId {
        PropertyId::new(s).unwrap()
    }

    #[test]
    fn empty_change_sets_encode_to_the_fixed_shape() {
        let def = PrototypeDefinition::bare(id("ex:a"), PrototypeId::empty());
        assert_eq!(
            encode_definition(&def),
            br#"{"id":"ex:a","base":"PROTO:P_0","add":{},"rem":{},"remAll":[]}"#
        );
    }

    #[test]
    fn additions_encode_under_add() {
        let mut add = AddChangeSet::new();
        add.insert(prop("ex:propA"), id("ex:id1"));
        let def = PrototypeDefinition::new(
            id("ex:a"),
            PrototypeId::empty(),
            add,
            RemoveChangeSet::new(),
        );
        let text = String::from_utf8(encode_definition(&def)).unwrap();
        assert!(text.contains(r#""add":{"ex:propA":["ex:id1"]}"#), "{text}");
    }

    #[test]
    fn absent_change_set_fields_default_to_empty() {
        let decoded = decode_definition(br#"{"id":"ex:a","base":"PROTO:P_0"}"#).unwrap();
        let expected = PrototypeDefinition::bare(id("ex:a"), PrototypeId::empty());
        assert_eq!(decoded, expected);
        // Oracle: the canonical encoding of the expected value.
        assert_eq!(
            encode_definition(&decoded),
            encode_definition(&expected)
        );
    }

    #[test]
    fn missing_mandatory_fields_are_errors() {
        assert!(matches!(
            decode_definition(br#"{"id":"ex:a"}"#),
            Err(WireError::MissingField("base"))
        ));
        assert!(matches!(
            decode_definition(br#"{"base":"ex:a"}"#),
            Err(WireError::MissingField("id"))
        ));
    }

    #[test]
    fn invalid_iris_are_rejected_on_decode() {
        assert!(matches!(
            decode_definition(br#"{"id":"not an iri","base":"PROTO:P_0"}"#),
            Err(WireError::InvalidIri(_))
        ));
        assert!(matches!(
            decode_definition(
                br#"{"id":"ex:a","base":"PROTO:P_0","add":{"no-scheme":["ex:v"]}}"#
            ),
            Err(WireError::InvalidIri(_))
        ));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(matches!(
            decode_definition(b"not json at all"),
            Err(WireError::MalformedDocument(_))
        ));
        assert!(matches!(
            decode_definition(br#"["ex:a"]"#),
            Err(WireError::MalformedDocument(_))
        ));
        assert!(matches!(
            decode_definition(br#"{"id":"ex:a","base":"PROTO:P_0","add":[]}"#),
            Err(WireError::MalformedDocument(_))
        ));
    }

    #[test]
    fn decode_canonicalizes_duplicates_and_rem_all_overlap() {
        let decoded = decode_definition(
            br#"{"id":"ex:a","base":"PROTO:P_0","add":{"ex:p":["ex:v","ex:v"]},"rem":{"ex:q":["ex:w"]},"remAll":["ex:q"]}"#,
        )
        .unwrap();
        assert_eq!(decoded.add.get(&prop("ex:p")).unwrap().len(), 1);
        // The rem entry is subsumed by remAll and dropped.
        assert_eq!(decoded.remove.removals().count(), 0);
        assert!(decoded.remove.removes_all_of(&prop("ex:q")));
        assert_eq!(
            encode_definition(&decoded),
            br#"{"id":"ex:a","base":"PROTO:P_0","add":{"ex:p":["ex:v"]},"rem":{},"remAll":["ex:q"]}"#
        );
    }

    #[test]
    fn fixpoint_encoding_equals_its_definition_form() {
        let properties: PropertyMap = [(prop("ex:knows"), id("ex:B"))].into_iter().collect();
        let encoded = encode_fixpoint(&id("ex:p2"), &properties);

        let mut add = AddChangeSet::new();
        add.insert(prop("ex:knows"), id("ex:B"));
        let as_def = PrototypeDefinition::new(
            id("ex:p2"),
            PrototypeId::empty(),
            add,
            RemoveChangeSet::new(),
        );
        assert_eq!(encoded, encode_definition(&as_def));
    }

    #[test]
    fn empty_fixpoint_has_the_expected_bytes() {
        assert_eq!(
            encode_fixpoint(&PrototypeId::empty(), &PropertyMap::new()),
            br#"{"id":"PROTO:P_0","base":"PROTO:P_0","add":{},"rem":{},"remAll":[]}"#
        );
    }

    #[test]
    fn batch_is_order_preserving_and_all_or_nothing() {
        assert_eq!(encode_batch([]), b"[]");
        assert_eq!(decode_batch(b"[]").unwrap(), vec![]);

        let d1 = PrototypeDefinition::bare(id("ex:a"), PrototypeId::empty());
        let d2 = PrototypeDefinition::bare(id("ex:b"), id("ex:a"));
        let batch = encode_batch([&d1, &d2]);
        let mut expected = Vec::new();
        expected.push(b'[');
        expected.extend(encode_definition(&d1));
        expected.push(b',');
        expected.extend(encode_definition(&d2));
        expected.push(b']');
        assert_eq!(batch, expected);
        assert_eq!(decode_batch(&batch).unwrap(), vec![d1, d2]);

        assert!(matches!(
            decode_batch(br#"[{"id":"ex:a","base":"PROTO:P_0"},{"id":"ex:b"}]"#),
            Err(WireError::MissingField("base"))
        ));
    }

    #[test]
    fn id_list_round_trips() {
        let ids = vec![id("ex:a"), id("isbn:123-4-56-789012-3")];
        let doc = encode_id_list(&ids);
        assert_eq!(decode_id_list(&doc).unwrap(), ids);
        assert!(decode_id_list(br#"["not an iri"]"#).is_err());
        assert!(decode_id_list(br#"{"a":1}"#).is_err());
    }
}
