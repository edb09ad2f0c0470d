//! Signed fixed-point encoding into the plaintext ring.
//!
//! A rational `x` is scaled by `S` and floored to `⌊S·x⌋`. Non-negative
//! integers occupy `0..=(n-1)/2`; negative ones are shifted to the upper half
//! so that `-1` is stored as `n - 1`. Decoding reverses the shift for any raw
//! value above `n/2` and divides by `S`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::{PaillierError, PublicKey, Result};

/// Positive scaling factor `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Scale(u64);

impl Scale {
    pub fn new(s: u64) -> Result<Self> {
        if s == 0 {
            return Err(PaillierError::InvalidScale);
        }
        Ok(Scale(s))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn as_bigint(self) -> BigInt {
        BigInt::from(self.0)
    }

    /// `⌊S·x⌋`.
    pub fn floor_scaled(self, x: &BigRational) -> BigInt {
        (x * BigRational::from_integer(self.as_bigint())).floor().to_integer()
    }
}

impl TryFrom<u64> for Scale {
    type Error = PaillierError;

    fn try_from(s: u64) -> Result<Self> {
        Scale::new(s)
    }
}

impl From<Scale> for u64 {
    fn from(s: Scale) -> u64 {
        s.0
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedEncoding {
    pub raw: BigUint,
    pub scale: Scale,
}

impl SignedEncoding {
    pub fn decode(&self, pk: &PublicKey) -> BigRational {
        decode_signed(&self.raw, self.scale, pk)
    }
}

/// Encodes `⌊S·x⌋` into `Z_n`.
pub fn encode_signed(x: &BigRational, scale: Scale, pk: &PublicKey) -> Result<SignedEncoding> {
    let raw = encode_int(&scale.floor_scaled(x), pk)?;
    Ok(SignedEncoding { raw, scale })
}

/// Decodes a raw plaintext into the rational `y / S`, where `y` is `raw`
/// or `raw - n` for the upper half.
pub fn decode_signed(raw: &BigUint, scale: Scale, pk: &PublicKey) -> BigRational {
    BigRational::new(decode_int(raw, pk), scale.as_bigint())
}

/// Maps a signed integer in `(-n/2, (n-1)/2]` into `Z_n`.
pub fn encode_int(v: &BigInt, pk: &PublicKey) -> Result<BigUint> {
    if !fits_signed(v, pk.n()) {
        return Err(PaillierError::SignedOverflow(v.clone()));
    }
    let n = BigInt::from(pk.n().clone());
    let wrapped = if v.is_negative() { v + n } else { v.clone() };
    Ok(wrapped.to_biguint().expect("non-negative after wrapping"))
}

/// Inverse of [`encode_int`]: raw values above `n/2` are negative.
pub fn decode_int(raw: &BigUint, pk: &PublicKey) -> BigInt {
    let n = pk.n();
    let raw = BigInt::from(raw % n);
    if &raw * 2 > BigInt::from(n.clone()) {
        raw - BigInt::from(n.clone())
    } else {
        raw
    }
}

/// `true` when `|v|` stays strictly below `bound / 2` on the negative side
/// and at most `(bound - 1) / 2` on the positive side.
pub(crate) fn fits_signed(v: &BigInt, bound: &BigUint) -> bool {
    v.magnitude() * 2u32 < *bound
}

/// `true` when `|v| < n/4`, the margin kept for masked protocol values.
pub fn within_quarter(v: &BigInt, pk: &PublicKey) -> bool {
    v.magnitude() * 4u32 < *pk.n()
}
