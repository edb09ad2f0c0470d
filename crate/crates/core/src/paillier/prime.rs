//! Probabilistic prime generation for key material.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

/// Rounds used for the final Miller–Rabin confirmation of a candidate.
pub const MILLER_RABIN_ROUNDS: usize = 64;

const SMALL_PRIMES: [u32; 167] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419, 421,
    431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541, 547,
    557, 563, 569, 571, 577, 587, 593, 599, 601, 607, 613, 617, 619, 631, 641, 643, 647, 653, 659,
    661, 673, 677, 683, 691, 701, 709, 719, 727, 733, 739, 743, 751, 757, 761, 769, 773, 787, 797,
    809, 811, 821, 823, 827, 829, 839, 853, 857, 859, 863, 877, 881, 883, 887, 907, 911, 919, 929,
    937, 941, 947, 953, 967, 971, 977, 983, 991, 997,
];

/// Returns `Some(false)` if `n` has a small odd factor, `Some(true)` if `n`
/// is itself a small prime, `None` if trial division is inconclusive.
fn trial_division(n: &BigUint) -> Option<bool> {
    for &p in SMALL_PRIMES.iter() {
        let p = BigUint::from(p);
        if *n == p {
            return Some(true);
        }
        if (n % &p).is_zero() {
            return Some(false);
        }
    }
    None
}

/// Miller–Rabin test with `rounds` random bases.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    if *n == two {
        return true;
    }
    if n.is_even() {
        return false;
    }
    if let Some(verdict) = trial_division(n) {
        return verdict;
    }

    let one = BigUint::one();
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Random odd candidate of exactly `bits` bits with the two top bits set, so
/// the product of two such values has exactly `2 * bits` bits.
fn candidate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    let mut c = rng.gen_biguint(bits);
    c.set_bit(bits - 1, true);
    c.set_bit(bits - 2, true);
    c.set_bit(0, true);
    c
}

/// Generates a random prime of exactly `bits` bits (top two bits set).
pub fn random_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 8, "prime size too small");
    loop {
        let c = candidate(bits, rng);
        if trial_division(&c) == Some(false) {
            continue;
        }
        // cheap screen before the full confirmation
        if is_probable_prime(&c, 2, rng) && is_probable_prime(&c, MILLER_RABIN_ROUNDS, rng) {
            return c;
        }
    }
}

/// Generates a safe prime `p = 2p' + 1` of exactly `bits` bits with `p'`
/// prime. The top two bits of `p` are set.
pub fn random_safe_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 9, "safe prime size too small");
    loop {
        let half = candidate(bits - 1, rng);
        let p = (&half << 1usize) + 1u32;
        // p ≡ 0 mod r  ⇔  half ≡ (r-1)/2 mod r
        let sieved = SMALL_PRIMES.iter().any(|&r| {
            let rem = (&half % r).to_u32_digits().first().copied().unwrap_or(0);
            (rem == 0 && half != BigUint::from(r)) || rem == (r - 1) / 2
        });
        if sieved {
            continue;
        }
        if !is_probable_prime(&half, 2, rng) || !is_probable_prime(&p, 2, rng) {
            continue;
        }
        if is_probable_prime(&half, MILLER_RABIN_ROUNDS, rng)
            && is_probable_prime(&p, MILLER_RABIN_ROUNDS, rng)
        {
            return p;
        }
    }
}
