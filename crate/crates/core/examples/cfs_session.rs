//! Capacitated facility sharing: the operator learns the smallest facility
//! tier that covers each slot, never the exact count.

use ppshare::eval::{oracle, random_usage};
use ppshare::paillier::Scale;
use ppshare::protocol::{Inputs, KeyMaterial, KeyMode, Protocol, SessionConfig};
use ppshare::transport::simulate;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let (users, slots) = (8, 6);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let schedules: Vec<_> = (1..=users).map(|i| random_usage(i, slots, 0.5, &mut rng)).collect();
    let keys = KeyMaterial::generate(KeyMode::Common, 256, users, &mut rng).unwrap();

    let mut config = SessionConfig::new(Protocol::Cfs, users, slots, Scale::new(100).unwrap(), 5);
    config.capacities = Some(vec![3, 6, 8]);
    let f = config.estimation_function().unwrap();

    let run = simulate(&config, &keys, &Inputs::Usage(schedules.clone())).unwrap();
    println!("true counts   {:?}", oracle::counts(&schedules));
    println!("true tiers    {:?}", oracle::tiers(&schedules, &f).unwrap());
    println!("operator sees {:?}", run.facility_operator().unwrap().coarse);
}
