//! Literal values encoded as prototype IDs.
//!
//! The prototype model has no literal datatype: a literal is represented by
//! an agreed prototype. [`PredefinedKb`] acts like a KB implicitly
//! containing every string and integer literal — recognition is by IRI
//! pattern, never by enumeration. A recognized literal resolves to a
//! synthetic definition deriving from the empty prototype with empty change
//! sets.
//!
//! Literal IRI grammar (byte-exact):
//!
//! * `value:integer:` followed by an optional `-` and decimal digits with
//!   no leading zeros (`0` itself is legal, `-0` is not — the encoding is
//!   injective).
//! * `value:string:` followed by percent-encoded UTF-8 where every
//!   character outside RFC 3986 `unreserved` is encoded with uppercase hex.
//!
//! Additional literal types plug in through [`LiteralRecognizer`].

use std::sync::Arc;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use super::definition::PrototypeDefinition;
use super::id::PrototypeId;
use super::kb::{KbResult, KnowledgeBase};
use crate::iri::is_unreserved;

const INTEGER_PREFIX: &str = "value:integer:";
const STRING_PREFIX: &str = "value:string:";

/// Everything outside RFC 3986 `unreserved` gets percent-encoded.
const NON_UNRESERVED: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

/// Decides whether an IRI belongs to a literal space.
pub trait LiteralRecognizer: Send + Sync {
    fn recognizes(&self, id: &PrototypeId) -> bool;
}

/// Recognizes `value:integer:<decimal>`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegerLiterals;

impl LiteralRecognizer for IntegerLiterals {
    fn recognizes(&self, id: &PrototypeId) -> bool {
        decode_integer(id).is_some()
    }
}

/// Recognizes `value:string:<percent-encoded UTF-8>`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StringLiterals;

impl LiteralRecognizer for StringLiterals {
    fn recognizes(&self, id: &PrototypeId) -> bool {
        decode_string(id).is_some()
    }
}

/// Encodes an integer as a literal prototype ID.
pub fn encode_integer(value: i64) -> PrototypeId {
    PrototypeId::new(format!("{INTEGER_PREFIX}{value}")).expect("decimal integers form valid IRIs")
}

/// Encodes a string as a literal prototype ID (canonical minimal encoding:
/// unreserved characters stay raw, everything else uppercase-hex escaped).
pub fn encode_string(value: &str) -> PrototypeId {
    let payload = utf8_percent_encode(value, NON_UNRESERVED);
    PrototypeId::new(format!("{STRING_PREFIX}{payload}"))
        .expect("percent-encoded payloads form valid IRIs")
}

/// The digit payload of an integer-literal ID, or `None` when the ID is
/// outside the integer grammar.
pub fn decode_integer(id: &PrototypeId) -> Option<&str> {
    let payload = id.as_str().strip_prefix(INTEGER_PREFIX)?;
    let digits = payload.strip_prefix('-').unwrap_or(payload);
    let signed = digits.len() != payload.len();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // No leading zeros, and no "-0": every integer has exactly one spelling.
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    if signed && digits == "0" {
        return None;
    }
    Some(payload)
}

/// The decoded payload of a string-literal ID, or `None` when the ID is
/// outside the string grammar.
pub fn decode_string(id: &PrototypeId) -> Option<String> {
    let payload = id.as_str().strip_prefix(STRING_PREFIX)?;
    let mut bytes = payload.bytes();
    while let Some(b) = bytes.next() {
        match b {
            b'%' => {
                let (hi, lo) = (bytes.next()?, bytes.next()?);
                if !is_upper_hex(hi) || !is_upper_hex(lo) {
                    return None;
                }
            }
            _ if is_unreserved(b as char) => {}
            _ => return None,
        }
    }
    let decoded = percent_decode_str(payload).collect::<Vec<u8>>();
    String::from_utf8(decoded).ok()
}

fn is_upper_hex(b: u8) -> bool {
    b.is_ascii_digit() || (b'A'..=b'F').contains(&b)
}

/// A KB that implicitly contains all literals its recognizers accept.
///
/// Lookups synthesize `(id, PROTO:P_0, ∅, ∅)` on the fly; the literal space
/// is never enumerated, so [`KnowledgeBase::stored_ids`] is `None`.
pub struct PredefinedKb {
    recognizers: Vec<Arc<dyn LiteralRecognizer>>,
}

impl PredefinedKb {
    /// String and integer literals, the default build.
    pub fn standard() -> Self {
        Self {
            recognizers: vec![Arc::new(IntegerLiterals), Arc::new(StringLiterals)],
        }
    }

    pub fn with_recognizers(recognizers: Vec<Arc<dyn LiteralRecognizer>>) -> Self {
        Self { recognizers }
    }

    pub fn recognizes(&self, id: &PrototypeId) -> bool {
        self.recognizers.iter().any(|r| r.recognizes(id))
    }
}

impl Default for PredefinedKb {
    fn default() -> Self {
        Self::standard()
    }
}

impl KnowledgeBase for PredefinedKb {
    fn is_defined(&self, id: &PrototypeId) -> KbResult<Option<Arc<PrototypeDefinition>>> {
        if id.is_empty_prototype() {
            return Ok(Some(PrototypeDefinition::empty_prototype()));
        }
        Ok(self
            .recognizes(id)
            .then(|| Arc::new(PrototypeDefinition::bare(id.clone(), PrototypeId::empty()))))
    }

    // The literal space is implicit; nothing is explicitly stored.
    fn stored_ids(&self) -> Option<Box<dyn Iterator<Item = PrototypeId> + '_>> {
        Some(Box::new(std::iter::empty()))
    }

    fn stored_definitions(
        &self,
    ) -> Option<Box<dyn Iterator<Item = Arc<PrototypeDefinition>> + '_>> {
        Some(Box::new(std::iter::empty()))
    }
}
