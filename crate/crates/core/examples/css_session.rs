//! Cost sharing of a service that fires once accumulated demand reaches
//! `C`. The operator learns only when to act; each user learns their share
//! of each action's cost.

use num_rational::BigRational;
use num_traits::Zero;
use ppshare::eval::{ExperimentConfig, to_f64};
use ppshare::paillier::Scale;
use ppshare::protocol::{KeyMode, Protocol};
use ppshare::transport::simulate;

fn main() {
    let exp = ExperimentConfig {
        protocol: Protocol::Css,
        users: 5,
        slots: 8,
        scale: Scale::new(10).unwrap(),
        key_bits: 256,
        key_mode: KeyMode::Common,
        ..Default::default()
    };
    let run = simulate(&exp.session(0), &exp.keys(0).unwrap(), &exp.instance(0)).unwrap();

    let schedule = &run.css_operator().unwrap().schedule;
    println!("service actions at slots {:?}", schedule.actions);
    let users = run.css_users();
    for k in 0..schedule.actions.len() {
        let shares: Vec<String> = users.iter().map(|u| format!("{:.3}", to_f64(&u.fractions[k]))).collect();
        let sum: BigRational = users.iter().fold(BigRational::zero(), |acc, u| acc + &u.fractions[k]);
        println!("action {}: q = [{}], sum {}", k + 1, shares.join(", "), sum);
    }
}
