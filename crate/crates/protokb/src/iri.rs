//! Syntactic validation of absolute IRIs.
//!
//! Identifiers and property names are absolute IRIs per the RFC 3987
//! generic syntax: a scheme followed by a body of legal IRI characters.
//! Validation is purely syntactic; nothing is resolved, dereferenced or
//! normalized (no case folding, no punycode).

use std::fmt;

/// Why a string was rejected as an absolute IRI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IriViolation {
    /// The string is empty.
    Empty,
    /// No `:` separator, so there is no scheme (a relative reference).
    NoScheme,
    /// The scheme is empty or contains a character outside
    /// `ALPHA *( ALPHA / DIGIT / "+" / "-" / "." )`.
    BadScheme,
    /// A character that is not legal anywhere in an IRI.
    IllegalCharacter { ch: char, at: usize },
    /// A `%` that is not followed by two hex digits.
    BadPercentEscape { at: usize },
    /// More than one `#`.
    MultipleFragments,
}

impl fmt::Display for IriViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IriViolation::Empty => write!(f, "empty string"),
            IriViolation::NoScheme => write!(f, "no scheme (relative reference)"),
            IriViolation::BadScheme => write!(f, "malformed scheme"),
            IriViolation::IllegalCharacter { ch, at } => {
                write!(f, "illegal character {ch:?} at byte {at}")
            }
            IriViolation::BadPercentEscape { at } => {
                write!(f, "'%' not followed by two hex digits at byte {at}")
            }
            IriViolation::MultipleFragments => write!(f, "more than one '#'"),
        }
    }
}

/// An invalid absolute IRI, with the offending input attached.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid IRI {iri:?}: {violation}")]
pub struct InvalidIri {
    pub iri: String,
    pub violation: IriViolation,
}

/// Checks that `s` is an absolute IRI.
pub fn validate_absolute_iri(s: &str) -> Result<(), InvalidIri> {
    let fail = |violation| {
        Err(InvalidIri {
            iri: s.to_owned(),
            violation,
        })
    };

    if s.is_empty() {
        return fail(IriViolation::Empty);
    }
    let Some(colon) = s.find(':') else {
        return fail(IriViolation::NoScheme);
    };
    if !valid_scheme(&s[..colon]) {
        return fail(IriViolation::BadScheme);
    }

    let body = &s[colon + 1..];
    let body_start = colon + 1;
    let mut seen_query = false;
    let mut seen_fragment = false;
    let mut chars = body.char_indices().peekable();
    while let Some((off, ch)) = chars.next() {
        let at = body_start + off;
        match ch {
            '%' => {
                let hi = chars.next();
                let lo = chars.next();
                match (hi, lo) {
                    (Some((_, h)), Some((_, l)))
                        if h.is_ascii_hexdigit() && l.is_ascii_hexdigit() => {}
                    _ => return fail(IriViolation::BadPercentEscape { at }),
                }
            }
            '#' => {
                if seen_fragment {
                    return fail(IriViolation::MultipleFragments);
                }
                seen_fragment = true;
            }
            '?' => seen_query = true,
            _ if is_iri_char(ch, seen_query || seen_fragment) => {}
            _ => return fail(IriViolation::IllegalCharacter { ch, at }),
        }
    }
    Ok(())
}

/// `scheme = ALPHA *( ALPHA / DIGIT / "+" / "-" / "." )`
fn valid_scheme(scheme: &str) -> bool {
    let mut chars = scheme.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

/// RFC 3986 `unreserved`: ALPHA / DIGIT / "-" / "." / "_" / "~".
pub fn is_unreserved(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_' | '~')
}

/// `gen-delims` and `sub-delims`, legal in their respective positions.
/// Position tracking beyond the fragment/query split is not needed for a
/// validity check, so all delimiters are accepted anywhere in the body.
fn is_reserved(c: char) -> bool {
    matches!(
        c,
        ':' | '/' | '[' | ']' | '@' | '!' | '$' | '&' | '\'' | '(' | ')' | '*' | '+' | ',' | ';'
            | '='
    )
}

/// `ucschar` ranges from RFC 3987.
fn is_ucschar(c: char) -> bool {
    matches!(c,
        '\u{A0}'..='\u{D7FF}'
        | '\u{F900}'..='\u{FDCF}'
        | '\u{FDF0}'..='\u{FFEF}'
        | '\u{10000}'..='\u{1FFFD}'
        | '\u{20000}'..='\u{2FFFD}'
        | '\u{30000}'..='\u{3FFFD}'
        | '\u{40000}'..='\u{4FFFD}'
        | '\u{50000}'..='\u{5FFFD}'
        | '\u{60000}'..='\u{6FFFD}'
        | '\u{70000}'..='\u{7FFFD}'
        | '\u{80000}'..='\u{8FFFD}'
        | '\u{90000}'..='\u{9FFFD}'
        | '\u{A0000}'..='\u{AFFFD}'
        | '\u{B0000}'..='\u{BFFFD}'
        | '\u{C0000}'..='\u{CFFFD}'
        | '\u{D0000}'..='\u{DFFFD}'
        | '\u{E1000}'..='\u{EFFFD}')
}

/// `iprivate`, legal only in query and fragment position.
fn is_iprivate(c: char) -> bool {
    matches!(c, '\u{E000}'..='\u{F8FF}' | '\u{F0000}'..='\u{FFFFD}' | '\u{100000}'..='\u{10FFFD}')
}

fn is_iri_char(c: char, in_query_or_fragment: bool) -> bool {
    is_unreserved(c) || is_reserved(c) || is_ucschar(c) || (in_query_or_fragment && is_iprivate(c))
}
