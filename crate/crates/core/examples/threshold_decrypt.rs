//! (5, 3)-threshold decryption: any three shares decrypt, two do not.

use num_bigint::BigUint;
use ppshare::paillier::{combine_shares, threshold_keygen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let (pk, shares) = threshold_keygen(128, 5, 3, &mut rng).expect("valid (N, t)");
    let c = pk.encrypt(&BigUint::from(2024u32), &mut rng).unwrap();

    let partial: Vec<_> = shares.iter().map(|s| s.partial_decrypt(&pk, &c)).collect();
    for subset in [[0, 1, 2], [1, 3, 4], [0, 2, 4]] {
        let picked: Vec<_> = subset.iter().map(|&i| partial[i].clone()).collect();
        let m = combine_shares(&pk, &picked, 3).unwrap();
        println!("shares {:?} -> {m}", subset.map(|i| i + 1));
    }
    match combine_shares(&pk, &partial[..2], 3) {
        Ok(m) => println!("two shares -> {m} (unexpected)"),
        Err(e) => println!("two shares -> {e}"),
    }
}
