//! Key generation, encryption and the two homomorphic laws.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use ppshare::paillier::{decode_signed, encode_signed, keygen, Scale};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (pk, sk) = keygen(256, &mut rng).expect("key size is valid");
    println!("n has {} bits", pk.bits());

    let a = pk.encrypt(&BigUint::from(41u32), &mut rng).unwrap();
    let b = pk.encrypt(&BigUint::from(1u32), &mut rng).unwrap();
    println!("D(E[41]·E[1])  = {}", sk.decrypt(&pk.hom_add(&a, &b)).unwrap());
    println!("D(E[41]^3)     = {}", sk.decrypt(&pk.hom_scale(&a, &BigInt::from(3))).unwrap());

    // Negative values wrap to the top of Z_n and come back on decoding.
    let scale = Scale::new(100).unwrap();
    let x = BigRational::new(BigInt::from(-314), BigInt::from(100));
    let enc = encode_signed(&x, scale, &pk).unwrap();
    let c = pk.encrypt(&enc.raw, &mut rng).unwrap();
    let back = decode_signed(&sk.decrypt(&c).unwrap(), scale, &pk);
    println!("signed -3.14   = {back}");
}
