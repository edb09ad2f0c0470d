//! Additively homomorphic Paillier encryption.
//!
//! Plaintexts live in `Z_n`, ciphertexts in `Z*_{n^2}`. Multiplying two
//! ciphertexts adds their plaintexts and raising a ciphertext to an integer
//! power scales its plaintext. The generator is fixed to `g = n + 1`, which
//! turns `g^m` into the cheap `1 + m·n mod n^2`.
//!
//! [`encoding`] maps signed fixed-point values into `Z_n` and [`threshold`]
//! splits the decryption exponent among `N` parties.

pub mod encoding;
pub(crate) mod hex;
pub mod prime;
pub mod threshold;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoding::{decode_signed, encode_signed, Scale, SignedEncoding};
pub use threshold::{
    check_threshold, combine_shares, generate_safe_keypair, share_private_key, threshold_keygen,
    DecryptionShare,
    KeyShare,
};

/// Smallest accepted modulus size. Anything this small is for tests only.
pub const MIN_KEY_BITS: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("invalid key size {0}: must be even and at least {MIN_KEY_BITS} bits")]
    InvalidKeySize(u64),
    #[error("plaintext is outside [0, n)")]
    PlaintextOutOfRange,
    #[error("encryption randomness must lie in [1, n) and be coprime to n")]
    InvalidRandomness,
    #[error("ciphertext is not a unit modulo n^2")]
    InvalidCiphertext,
    #[error("scale factor must be positive")]
    InvalidScale,
    #[error("value {0} overflows the signed plaintext range")]
    SignedOverflow(BigInt),
    #[error("invalid threshold parameters: {parties} parties with threshold {threshold}")]
    InvalidThreshold { parties: u32, threshold: u32 },
    #[error("need at least {needed} decryption shares, got {got}")]
    InsufficientShares { needed: u32, got: usize },
    #[error("duplicate decryption share index {0}")]
    DuplicateShare(u32),
    #[error("decryption share index {index} outside 1..={parties}")]
    ShareIndexOutOfRange { index: u32, parties: u32 },
    #[error("decryption shares disagree on the party count")]
    InconsistentShares,
    #[error("decryption shares did not combine to a valid plaintext")]
    CombinationFailed,
}

pub type Result<T> = std::result::Result<T, PaillierError>;

#[derive(Serialize, Deserialize)]
struct PublicKeyRepr {
    #[serde(with = "hex")]
    n: BigUint,
    #[serde(with = "hex")]
    g: BigUint,
    bits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PublicKeyRepr", into = "PublicKeyRepr")]
pub struct PublicKey {
    n: BigUint,
    g: BigUint,
    bits: u64,
    n_squared: BigUint,
}

impl TryFrom<PublicKeyRepr> for PublicKey {
    type Error = String;

    fn try_from(repr: PublicKeyRepr) -> std::result::Result<Self, String> {
        if repr.n.bits() != repr.bits {
            return Err(format!("modulus has {} bits, expected {}", repr.n.bits(), repr.bits));
        }
        if repr.g != &repr.n + 1u32 {
            return Err("only the generator g = n + 1 is supported".into());
        }
        Ok(PublicKey::from_modulus(repr.n))
    }
}

impl From<PublicKey> for PublicKeyRepr {
    fn from(pk: PublicKey) -> Self {
        PublicKeyRepr { n: pk.n, g: pk.g, bits: pk.bits }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateKey {
    #[serde(with = "hex")]
    lambda: BigUint,
    #[serde(with = "hex")]
    mu: BigUint,
    public: PublicKey,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ciphertext {
    #[serde(with = "hex")]
    value: BigUint,
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Wraps a raw group element. Use [`PublicKey::validate`] before
    /// trusting it.
    pub fn from_raw(value: BigUint) -> Self {
        Ciphertext { value }
    }
}

/// Generates a key pair whose modulus has exactly `bits` bits.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<(PublicKey, PrivateKey)> {
    check_key_size(bits)?;
    loop {
        let p = prime::random_prime(bits / 2, rng);
        let q = prime::random_prime(bits / 2, rng);
        if let Some(sk) = PrivateKey::from_primes(&p, &q) {
            return Ok((sk.public.clone(), sk));
        }
    }
}

pub(crate) fn check_key_size(bits: u64) -> Result<()> {
    if bits < MIN_KEY_BITS || !bits.is_multiple_of(2) {
        return Err(PaillierError::InvalidKeySize(bits));
    }
    Ok(())
}

impl PublicKey {
    fn from_modulus(n: BigUint) -> Self {
        let bits = n.bits();
        PublicKey { g: &n + 1u32, n_squared: &n * &n, n, bits }
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Encrypts `m` with caller-chosen randomness `r`: `g^m · r^n mod n^2`.
    pub fn encrypt_with_nonce(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        if *m >= self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        if r.is_zero() || *r >= self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidRandomness);
        }
        // g^m = (1 + n)^m = 1 + m·n  (mod n^2)
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext { value: gm * rn % &self.n_squared })
    }

    /// Encrypts `m` with fresh randomness drawn uniformly from `Z*_n`.
    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        let r = self.random_nonce(rng);
        self.encrypt_with_nonce(m, &r)
    }

    pub fn random_nonce<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    /// Checks `0 < c < n^2` and `gcd(c, n) = 1`.
    pub fn validate(&self, c: &Ciphertext) -> Result<()> {
        if c.value.is_zero() || c.value >= self.n_squared || !c.value.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidCiphertext);
        }
        Ok(())
    }

    /// Ciphertext of `m_a + m_b mod n`.
    pub fn hom_add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        Ciphertext { value: &a.value * &b.value % &self.n_squared }
    }

    /// Ciphertext of `m_a · k mod n`. Negative `k` inverts the ciphertext
    /// first, which is the same as raising to `n - |k|`.
    pub fn hom_scale(&self, a: &Ciphertext, k: &BigInt) -> Ciphertext {
        let (sign, magnitude) = (k.sign(), k.magnitude());
        let base = match sign {
            Sign::Minus => a
                .value
                .modinv(&self.n_squared)
                .expect("valid ciphertexts are invertible mod n^2"),
            _ => a.value.clone(),
        };
        Ciphertext { value: base.modpow(magnitude, &self.n_squared) }
    }

    /// Folds [`hom_add`](Self::hom_add) over a non-empty iterator.
    pub fn hom_sum<'a, I>(&self, cts: I) -> Option<Ciphertext>
    where
        I: IntoIterator<Item = &'a Ciphertext>,
    {
        cts.into_iter().fold(None, |acc, c| match acc {
            None => Some(c.clone()),
            Some(acc) => Some(self.hom_add(&acc, c)),
        })
    }

    /// `L(x) = (x - 1) / n`.
    fn l_function(&self, x: &BigUint) -> BigUint {
        (x - 1u32) / &self.n
    }
}

impl PrivateKey {
    /// Builds the private key for `n = p·q`. Returns `None` when the primes
    /// are equal or `gcd(n, (p-1)(q-1)) ≠ 1`.
    pub(crate) fn from_primes(p: &BigUint, q: &BigUint) -> Option<Self> {
        if p == q {
            return None;
        }
        let n = p * q;
        let p1 = p - 1u32;
        let q1 = q - 1u32;
        if !n.gcd(&(&p1 * &q1)).is_one() {
            return None;
        }
        let lambda = p1.lcm(&q1);
        // with g = n + 1, L(g^λ mod n^2) = λ mod n
        let mu = (&lambda % &n).modinv(&n)?;
        Some(PrivateKey { lambda, mu, public: PublicKey::from_modulus(n) })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub(crate) fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        let pk = &self.public;
        pk.validate(c)?;
        let x = c.value.modpow(&self.lambda, &pk.n_squared);
        Ok(pk.l_function(&x) * &self.mu % &pk.n)
    }
}

/// Decryption capability held by one user: either the common private key or
/// a threshold committee of key shares.
#[derive(Clone, Debug)]
pub enum Decryptor {
    Common(PrivateKey),
    /// `committee` holds the shares of the parties that cooperate on this
    /// user's decryptions (the user's own share first). In a deployment the
    /// peers would return partial decryptions over the network.
    Threshold { public: PublicKey, committee: Vec<KeyShare>, threshold: u32 },
}

impl Decryptor {
    pub fn public(&self) -> &PublicKey {
        match self {
            Decryptor::Common(sk) => sk.public(),
            Decryptor::Threshold { public, .. } => public,
        }
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        match self {
            Decryptor::Common(sk) => sk.decrypt(c),
            Decryptor::Threshold { public, committee, threshold } => {
                public.validate(c)?;
                let partials: Vec<_> =
                    committee.iter().map(|s| s.partial_decrypt(public, c)).collect();
                combine_shares(public, &partials, *threshold)
            }
        }
    }

    /// Decrypts and maps the upper half of `Z_n` to negative integers.
    pub fn decrypt_signed(&self, c: &Ciphertext) -> Result<BigInt> {
        let raw = self.decrypt(c)?;
        Ok(encoding::decode_int(&raw, self.public()))
    }
}
