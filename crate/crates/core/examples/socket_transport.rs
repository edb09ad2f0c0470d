//! The same UFS session over loopback TCP, one thread per user, compared
//! with the in-process run.

use ppshare::eval::ExperimentConfig;
use ppshare::protocol::build_parties;
use ppshare::transport::{run_to_completion, socket::run_over_tcp};

fn main() {
    let exp = ExperimentConfig { users: 4, slots: 5, ..Default::default() };
    let (session, keys, inputs) = (exp.session(0), exp.keys(0).unwrap(), exp.instance(0));

    let local = run_to_completion(build_parties(&session, &keys, &inputs).unwrap()).unwrap();
    let tcp = run_over_tcp(build_parties(&session, &keys, &inputs).unwrap()).unwrap();

    let (a, b) = (local.facility_operator().unwrap(), tcp.facility_operator().unwrap());
    println!("in-process c = {:?}", a.coarse);
    println!("tcp        c = {:?}", b.coarse);
    println!("ledgers identical: {}", local.ledger == tcp.ledger);
}
