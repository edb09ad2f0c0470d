//! Operator and user state machines for the three sharing protocols.
//!
//! * UFS: the operator learns only whether each slot is occupied; each
//!   requesting user learns the head count of its slots.
//! * CFS: as UFS, but the operator learns the capacity tier `f(N^j)`.
//! * CSS: the operator learns when accumulated demand crosses a threshold;
//!   each user learns its share of every service action.
//!
//! Every party owns its state and its PRNG. A round hands a party the batch
//! of messages delivered to it and collects the messages it sends back; the
//! driver lives in [`crate::transport`].

pub mod css;
pub mod facility;
mod message;
mod schedule;
mod session;

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;
use thiserror::Error;

use crate::paillier::{PaillierError, PublicKey, Scale};

pub use message::{PartyId, Payload, Protocol, Stage, StageMessage};
pub use schedule::{
    parse_decimal, DemandSchedule, EstimationFunction, ServiceActionSchedule, UsageSchedule,
};
pub use session::{build_parties, party_rng, Inputs, KeyMaterial, KeyMode, SessionConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Crypto(#[from] PaillierError),
    #[error("{protocol} {stage} slot {slot}: protocol corruption: {detail}")]
    Corruption { protocol: Protocol, stage: Stage, slot: u32, detail: String },
    #[error("slot {slot}: {count} users exceed the largest capacity {capacity}")]
    CapacityExhausted { slot: u32, count: u32, capacity: u32 },
    #[error("slot {slot}: requesting user has no head count from stage 1")]
    MissingCount { slot: u32 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("window ({start}, {end}] outside 1..={slots}")]
    WindowOutOfRange { start: u32, end: u32, slots: u32 },
    #[error("multiplicative mask must be positive")]
    NonPositiveMask,
    #[error("{party} received an unexpected message: {detail}")]
    UnexpectedMessage { party: PartyId, detail: String },
    #[error("users disagree on the sign of probe {slot}")]
    Disagreement { slot: u32 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// A message addressed to one party.
#[derive(Clone, Debug, PartialEq)]
pub struct Outbound {
    pub to: PartyId,
    pub message: StageMessage,
}

/// One protocol participant.
pub trait Party: Send {
    fn id(&self) -> PartyId;

    /// Protocol stage (0..=3) the party is working on.
    fn stage(&self) -> u8;

    /// Fine-grained state label for diagnostics.
    fn phase(&self) -> &'static str;

    /// Consumes the messages delivered this round.
    fn on_round(&mut self, inbox: Vec<StageMessage>) -> Result<Vec<Outbound>>;

    fn is_finished(&self) -> bool;

    fn output(&self) -> Option<PartyOutput>;
}

#[derive(Clone, Debug, PartialEq)]
pub enum PartyOutput {
    FacilityOperator(facility::OperatorOutput),
    FacilityUser(facility::UserOutput),
    CssOperator(css::OperatorOutput),
    CssUser(css::UserOutput),
}

/// Ranges of the operator's random masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskConfig {
    /// `R^j`, `R_i^j` and `R^k` are uniform on `[1, 2^additive_bits)`.
    pub additive_bits: u32,
    /// `R^t` is uniform on `[1, 2^multiplicative_bits)`.
    pub multiplicative_bits: u32,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig { additive_bits: 64, multiplicative_bits: 32 }
    }
}

/// Headroom reserved for scaled CSS demand totals when sizing `R^t`.
const DEMAND_HEADROOM_BITS: u32 = 48;

impl MaskConfig {
    /// Checks that `N + 2` additive masks plus scaled payloads stay below
    /// `n/4`, and for CSS that `R^t` times a scaled demand total does too.
    pub fn check(&self, pk: &PublicKey, protocol: Protocol, users: u32, scale: Scale) -> Result<()> {
        if self.additive_bits == 0 || self.multiplicative_bits == 0 {
            return Err(ProtocolError::InvalidConfig("mask ranges must be non-empty".into()));
        }
        let quarter = pk.n() >> 2usize;
        let additive = (BigUint::from(users + 2) << self.additive_bits)
            + BigUint::from(scale.get()) * (users + 1);
        let multiplicative = BigUint::one() << (self.multiplicative_bits + DEMAND_HEADROOM_BITS);
        if additive >= quarter || (protocol == Protocol::Css && multiplicative >= quarter) {
            return Err(ProtocolError::InvalidConfig(format!(
                "masks of {}/{} bits do not fit a {}-bit modulus",
                self.additive_bits,
                self.multiplicative_bits,
                pk.bits()
            )));
        }
        Ok(())
    }

    pub fn draw_additive<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        draw_mask(self.additive_bits, rng)
    }

    pub fn draw_multiplicative<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        draw_mask(self.multiplicative_bits, rng)
    }
}

fn draw_mask<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> BigUint {
    use num_bigint::RandBigInt;
    let upper = BigUint::from(1u32) << bits;
    rng.gen_biguint_range(&BigUint::from(1u32), &upper)
}
