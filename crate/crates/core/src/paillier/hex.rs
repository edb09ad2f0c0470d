//! Lowercase hexadecimal serde representation for big integers.

use num_bigint::BigUint;
use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(value: &BigUint, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&format!("{value:x}"))
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<BigUint, D::Error> {
    let s = String::deserialize(deserializer)?;
    parse(&s).ok_or_else(|| D::Error::custom(format!("invalid lowercase hex integer {s:?}")))
}

/// Parses a canonical lowercase hex string (no prefix, no leading zeros
/// except the single digit "0").
pub fn parse(s: &str) -> Option<BigUint> {
    let canonical = !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return None;
    }
    BigUint::parse_bytes(s.as_bytes(), 16)
}
