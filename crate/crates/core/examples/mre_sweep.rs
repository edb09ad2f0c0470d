//! Mean relative error against the scaling factor `S` for both protocol
//! families, on small keys and few repetitions.

use ppshare::eval::{run_mre_sweep, summary, ExperimentConfig, Sweep};
use ppshare::protocol::Protocol;

fn main() {
    for protocol in [Protocol::Ufs, Protocol::Css] {
        let base = ExperimentConfig { protocol, users: 12, slots: 12, repetitions: 4, ..Default::default() };
        let reports = run_mre_sweep(&base, &Sweep::Scale(vec![1, 10, 100])).unwrap();
        print!("{}", summary(&reports));
    }
}
