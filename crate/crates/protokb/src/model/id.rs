//! Prototype and property identifiers.
//!
//! Both are validated absolute IRIs. Equality and ordering are exact byte
//! comparison of the IRI string; there is no scheme case folding. The
//! distinguished empty prototype is named by [`EMPTY_PROTOTYPE_IRI`].
//!
//! IDs cache a 64-bit digest of their IRI at construction. Hash maps keyed
//! by IDs then hash eight bytes instead of the string, equality checks
//! short-circuit on shared allocations and distinct digests, and million-
//! entry indexes stop being bound on string memory traffic.

use std::fmt;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::iri::{validate_absolute_iri, InvalidIri};

/// IRI of the empty prototype, the root of every inheritance chain.
pub const EMPTY_PROTOTYPE_IRI: &str = "PROTO:P_0";

/// FNV-1a over the IRI bytes; deterministic across runs.
fn digest(iri: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in iri.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

macro_rules! iri_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone)]
        pub struct $name {
            iri: Arc<str>,
            digest: u64,
        }

        impl $name {
            /// Validates `iri` as an absolute IRI and wraps it.
            pub fn new(iri: impl AsRef<str>) -> Result<Self, InvalidIri> {
                let iri = iri.as_ref();
                validate_absolute_iri(iri)?;
                Ok(Self {
                    iri: Arc::from(iri),
                    digest: digest(iri),
                })
            }

            pub fn as_str(&self) -> &str {
                &self.iri
            }

            /// The cached 64-bit digest of the IRI.
            pub(crate) fn digest(&self) -> u64 {
                self.digest
            }
        }

        impl PartialEq for $name {
            fn eq(&self, other: &Self) -> bool {
                // Clones share the allocation; different digests mean
                // different strings. Bytes are only compared on digest
                // collisions between distinct allocations.
                Arc::ptr_eq(&self.iri, &other.iri)
                    || (self.digest == other.digest && self.iri == other.iri)
            }
        }

        impl Eq for $name {}

        impl std::hash::Hash for $name {
            fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
                state.write_u64(self.digest);
            }
        }

        impl PartialOrd for $name {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        impl Ord for $name {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.iri.cmp(&other.iri)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({:?})"), &*self.iri)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.iri)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.iri
            }
        }

        impl std::str::FromStr for $name {
            type Err = InvalidIri;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.iri)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                Self::new(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

iri_newtype! {
    /// Names a prototype. Construction validates the IRI, so an invalid ID
    /// cannot exist.
    PrototypeId
}

iri_newtype! {
    /// Names a property. Same IRI validity rule as [`PrototypeId`].
    PropertyId
}

static EMPTY_ID: LazyLock<PrototypeId> =
    LazyLock::new(|| PrototypeId::new(EMPTY_PROTOTYPE_IRI).expect("empty-prototype IRI is valid"));

impl PrototypeId {
    /// The ID of the empty prototype.
    pub fn empty() -> PrototypeId {
        EMPTY_ID.clone()
    }

    /// Whether this is the empty prototype's ID (byte-exact comparison).
    pub fn is_empty_prototype(&self) -> bool {
        self == &*EMPTY_ID
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_id_spelling_is_exact() {
        assert_eq!(PrototypeId::empty().as_str(), "PROTO:P_0");
        assert!(PrototypeId::empty().is_empty_prototype());
        // No scheme case folding.
        let lower = PrototypeId::new("proto:P_0").unwrap();
        assert!(!lower.is_empty_prototype());
        assert_ne!(lower, PrototypeId::empty());
    }

    #[test]
    fn construction_rejects_invalid_iris() {
        assert!(PrototypeId::new("PROTO:P_0").is_ok());
        assert!(PrototypeId::new("isbn:123-4-56-789012-3").is_ok());
        assert!(PrototypeId::new("no-scheme-here").is_err());
        assert!(PropertyId::new("also relative").is_err());
    }

    #[test]
    fn equality_is_exact_string_equality() {
        let a = PrototypeId::new("ex:x").unwrap();
        let b = PrototypeId::new("ex:x").unwrap();
        let c = PrototypeId::new("ex:X").unwrap();
        assert_eq!(a, b, "independent allocations of the same IRI are equal");
        assert_ne!(a, c);
        assert_eq!(a, a.clone(), "clones share the allocation");
    }

    #[test]
    fn hashing_agrees_with_equality() {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};
        let hash_of = |id: &PrototypeId| {
            let mut h = DefaultHasher::new();
            id.hash(&mut h);
            h.finish()
        };
        let a = PrototypeId::new("ex:x").unwrap();
        let b = PrototypeId::new("ex:x").unwrap();
        assert_eq!(hash_of(&a), hash_of(&b));
    }

    #[test]
    fn ordering_is_byte_lexicographic() {
        let mut ids = vec![
            PrototypeId::new("ex:b").unwrap(),
            PrototypeId::new("ex:A").unwrap(),
            PrototypeId::new("ex:a").unwrap(),
        ];
        ids.sort();
        let strs: Vec<&str> = ids.iter().map(PrototypeId::as_str).collect();
        assert_eq!(strs, vec!["ex:A", "ex:a", "ex:b"]);
    }
}
