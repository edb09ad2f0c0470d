//! `(N, t)`-threshold decryption.
//!
//! The dealer picks `d` with `d ≡ 0 (mod λ)` and `d ≡ 1 (mod n)` and shares
//! it with a random polynomial of degree `t - 1` over `Z_{n·λ}`. Party `i`
//! turns a ciphertext `c` into the partial decryption `c^{2Δ·s_i}` with
//! `Δ = N!`. Any `t` partials combine through integer Lagrange coefficients
//! `Δ·λ_{0,i}` into `c^{4Δ²d} = 1 + 4Δ²·m·n (mod n²)`, from which `m`
//! follows.
//!
//! Key generation uses safe primes, as in the Damgård–Jurik construction.
//! Share verification keys are omitted: all parties are semi-honest.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::{check_key_size, hex, prime, Ciphertext, PaillierError, PrivateKey, PublicKey, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyShare {
    index: u32,
    #[serde(with = "hex")]
    share: BigUint,
    threshold: u32,
    parties: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecryptionShare {
    index: u32,
    parties: u32,
    #[serde(with = "hex")]
    value: BigUint,
}

impl DecryptionShare {
    pub fn index(&self) -> u32 {
        self.index
    }
}

/// Validates `1 ≤ t ≤ N`, and `t = N` whenever `N ≤ 3`.
pub fn check_threshold(parties: u32, threshold: u32) -> Result<()> {
    let ok = parties >= 1
        && (1..=parties).contains(&threshold)
        && (parties > 3 || threshold == parties);
    if ok {
        Ok(())
    } else {
        Err(PaillierError::InvalidThreshold { parties, threshold })
    }
}

/// Key pair built from two distinct safe primes.
pub fn generate_safe_keypair<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    rng: &mut R,
) -> Result<(PublicKey, PrivateKey)> {
    check_key_size(bits)?;
    loop {
        let p = prime::random_safe_prime(bits / 2, rng);
        let q = prime::random_safe_prime(bits / 2, rng);
        if let Some(sk) = PrivateKey::from_primes(&p, &q) {
            return Ok((sk.public().clone(), sk));
        }
    }
}

/// Splits the decryption exponent of `sk` into `parties` shares.
pub fn share_private_key<R: RngCore + CryptoRng + ?Sized>(
    sk: &PrivateKey,
    parties: u32,
    threshold: u32,
    rng: &mut R,
) -> Result<Vec<KeyShare>> {
    check_threshold(parties, threshold)?;
    let n = sk.public().n();
    let lambda = sk.lambda();
    // Δ must be invertible mod n
    if !factorial(parties).gcd(n).is_one() {
        return Err(PaillierError::InvalidThreshold { parties, threshold });
    }
    let modulus = n * lambda;
    let d = lambda * (lambda % n).modinv(n).expect("gcd(λ, n) = 1 for valid keys");

    let mut coefficients = vec![d];
    coefficients.extend((1..threshold).map(|_| rng.gen_biguint_below(&modulus)));

    Ok((1..=parties)
        .map(|index| {
            let x = BigUint::from(index);
            // Horner evaluation of the sharing polynomial at x
            let share = coefficients
                .iter()
                .rev()
                .fold(BigUint::zero(), |acc, a| (acc * &x + a) % &modulus);
            KeyShare { index, share, threshold, parties }
        })
        .collect())
}

/// Generates a fresh key and deals its threshold shares.
pub fn threshold_keygen<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    parties: u32,
    threshold: u32,
    rng: &mut R,
) -> Result<(PublicKey, Vec<KeyShare>)> {
    check_threshold(parties, threshold)?;
    let (pk, sk) = generate_safe_keypair(bits, rng)?;
    let shares = share_private_key(&sk, parties, threshold, rng)?;
    Ok((pk, shares))
}

fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

impl KeyShare {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn parties(&self) -> u32 {
        self.parties
    }

    /// `c^{2Δ·s_i} mod n²`, tagged with this share's index.
    pub fn partial_decrypt(&self, pk: &PublicKey, c: &Ciphertext) -> DecryptionShare {
        let exponent = factorial(self.parties) * 2u32 * &self.share;
        DecryptionShare {
            index: self.index,
            parties: self.parties,
            value: c.value().modpow(&exponent, pk.n_squared()),
        }
    }
}

/// Combines at least `threshold` partial decryptions with distinct indices.
///
/// Combining fewer shares than the sharing polynomial needs yields either
/// [`PaillierError::CombinationFailed`] or an unrelated plaintext.
pub fn combine_shares(pk: &PublicKey, shares: &[DecryptionShare], threshold: u32) -> Result<BigUint> {
    if shares.len() < threshold as usize || shares.is_empty() {
        return Err(PaillierError::InsufficientShares { needed: threshold.max(1), got: shares.len() });
    }
    let parties = shares[0].parties;
    let mut seen = std::collections::BTreeSet::new();
    for s in shares {
        if s.parties != parties {
            return Err(PaillierError::InconsistentShares);
        }
        if s.index == 0 || s.index > parties {
            return Err(PaillierError::ShareIndexOutOfRange { index: s.index, parties });
        }
        if !seen.insert(s.index) {
            return Err(PaillierError::DuplicateShare(s.index));
        }
    }

    let n2 = pk.n_squared();
    let delta = BigInt::from(factorial(parties));
    let mut acc = BigUint::one();
    for s in shares {
        let i = BigInt::from(s.index);
        let (num, den) = shares.iter().filter(|o| o.index != s.index).fold(
            (delta.clone(), BigInt::one()),
            |(num, den), o| {
                let j = BigInt::from(o.index);
                (num * -&j, den * (&i - &j))
            },
        );
        let (coefficient, rem) = num.div_rem(&den);
        debug_assert!(rem.is_zero(), "Δ clears every Lagrange denominator");
        let exponent: BigInt = coefficient * 2;
        let base = if exponent.is_negative() {
            s.value.modinv(n2).ok_or(PaillierError::CombinationFailed)?
        } else {
            s.value.clone()
        };
        acc = acc * base.modpow(exponent.magnitude(), n2) % n2;
    }

    // a genuine combination is 1 + k·n
    let n = pk.n();
    if !(&acc % n).is_one() {
        return Err(PaillierError::CombinationFailed);
    }
    let l = (acc - 1u32) / n;
    let four_delta_sq = (delta.magnitude() * delta.magnitude() * 4u32) % n;
    let inv = four_delta_sq.modinv(n).ok_or(PaillierError::CombinationFailed)?;
    Ok(l * inv % n)
}
