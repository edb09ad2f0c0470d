//! Uncapacitated facility sharing with three users and four slots.
//!
//! The operator learns only whether each slot is occupied. Each user learns
//! the occupancy count of the slots they requested and an access key for
//! each of them.

use ppshare::paillier::Scale;
use ppshare::protocol::facility::SlotView;
use ppshare::protocol::{Inputs, KeyMaterial, KeyMode, Protocol, SessionConfig, UsageSchedule};
use ppshare::transport::simulate;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let bits = [[1, 0, 1, 0], [1, 1, 0, 0], [0, 0, 1, 0]];
    let schedules = bits
        .iter()
        .enumerate()
        .map(|(i, row)| UsageSchedule::new(i as u32 + 1, row.iter().map(|&b| b == 1).collect()).unwrap())
        .collect();
    let inputs = Inputs::Usage(schedules);

    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let keys = KeyMaterial::generate(KeyMode::Common, 256, 3, &mut rng).unwrap();
    let config = SessionConfig::new(Protocol::Ufs, 3, 4, Scale::new(100).unwrap(), 11);
    let run = simulate(&config, &keys, &inputs).expect("honest run completes");

    println!("operator occupancy c = {:?}", run.facility_operator().unwrap().coarse);
    for u in run.facility_users() {
        let seen: Vec<String> = u
            .entries
            .iter()
            .map(|e| match e {
                SlotView::KnownCount(n) => n.to_string(),
                SlotView::Masked(_) => "?".into(),
            })
            .collect();
        println!("user {} sees counts [{}], fee {}", u.user, seen.join(", "), u.fee);
    }
    println!("{} rounds, {} bytes", run.rounds, run.ledger.total().bytes);
}
