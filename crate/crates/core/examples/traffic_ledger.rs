//! Per-stage byte accounting of one UFS run, printed as CSV, plus the
//! per-user per-slot traffic of the first two stages.

use ppshare::eval::{estimated_bytes_per_slot, ExperimentConfig};
use ppshare::protocol::{PartyId, Protocol, Stage};
use ppshare::transport::simulate;

fn main() {
    let exp = ExperimentConfig { users: 4, slots: 3, key_bits: 1024, ..Default::default() };
    let run = simulate(&exp.session(0), &exp.keys(0).unwrap(), &exp.instance(0)).unwrap();
    print!("{}", run.ledger.to_csv_string());

    let user1 = run.ledger.total_where(|k| {
        k.stage != Stage::AccessKey && (k.sender == PartyId::User(1) || k.receiver == PartyId::User(1))
    });
    println!(
        "user 1, stages 1-2: {} messages, {:.0} bytes per slot (estimate {} bytes)",
        user1.messages,
        user1.bytes as f64 / f64::from(exp.slots),
        estimated_bytes_per_slot(Protocol::Ufs)
    );
}
