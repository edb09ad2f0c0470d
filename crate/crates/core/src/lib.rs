//! Privacy-preserving facility and service sharing.
//!
//! [`paillier`] provides the cryptosystem, [`protocol`] the party state
//! machines, [`transport`] message delivery and byte accounting, [`eval`] the
//! accuracy and cost experiments, and [`cli`] the command-line front end.

pub mod paillier;
pub mod protocol;
pub mod transport;
pub mod eval;
pub mod cli;
