use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::paillier::{hex, Ciphertext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Ufs,
    Cfs,
    Css,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Ufs => "ufs",
            Protocol::Cfs => "cfs",
            Protocol::Css => "css",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ufs" => Ok(Protocol::Ufs),
            "cfs" => Ok(Protocol::Cfs),
            "css" => Ok(Protocol::Css),
            other => Err(format!("unknown protocol {other:?} (expected ufs, cfs or css)")),
        }
    }
}

/// One arrow of a protocol's message flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// UFS/CFS 1.1, user → operator: `E[b_i^j]`.
    Submit,
    /// UFS/CFS 1.2, operator → user: `E[Σb + R^j − R^j·b_i^j]`.
    MaskedCount,
    /// UFS/CFS 2.1, operator → user: plaintext `R_i^j`.
    Mask,
    /// UFS/CFS 2.2, user → operator: `E_i^j`.
    Contribution,
    /// UFS/CFS 2.3, operator → user: `Π_i E_i^j`.
    Aggregate,
    /// UFS/CFS 2.4, user → operator: decrypted `D^j`.
    Decrypted,
    /// UFS/CFS 3, operator → user: `E[b_i^j]^{κ^j}`.
    AccessKey,
    /// CSS 1.1, user → operator: `E[Σp − C/N]` for the current window.
    Probe,
    /// CSS 1.2, operator → user: `Π_i (E_i)^{R^t}`.
    ProbeAggregate,
    /// CSS 1.3, user → operator: `1(D^t ≥ 0)`.
    Indicator,
    /// CSS 2.1, user → operator: `E[P_i^k]`.
    Demand,
    /// CSS 2.2, operator → user: `Π E[P] · E[R^k]`.
    MaskedTotal,
    /// CSS 2.3, user → operator: `(ΠE[P]·E[R^k])^{P_i^k} · E[0]`.
    Weighted,
    /// CSS 2.4, operator → user: the above times `E[P_i^k]^{−R^k}`.
    Unmasked,
}

impl Stage {
    /// The protocol stage (1..=3) this step belongs to.
    pub fn number(self) -> u8 {
        match self {
            Stage::Submit | Stage::MaskedCount => 1,
            Stage::Mask | Stage::Contribution | Stage::Aggregate | Stage::Decrypted => 2,
            Stage::AccessKey => 3,
            Stage::Probe | Stage::ProbeAggregate | Stage::Indicator => 1,
            Stage::Demand | Stage::MaskedTotal | Stage::Weighted | Stage::Unmasked => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Submit => "submit",
            Stage::MaskedCount => "masked_count",
            Stage::Mask => "mask",
            Stage::Contribution => "contribution",
            Stage::Aggregate => "aggregate",
            Stage::Decrypted => "decrypted",
            Stage::AccessKey => "access_key",
            Stage::Probe => "probe",
            Stage::ProbeAggregate => "probe_aggregate",
            Stage::Indicator => "indicator",
            Stage::Demand => "demand",
            Stage::MaskedTotal => "masked_total",
            Stage::Weighted => "weighted",
            Stage::Unmasked => "unmasked",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartyId {
    Operator,
    /// Users are numbered from 1.
    User(u32),
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Operator => f.write_str("operator"),
            PartyId::User(i) => write!(f, "user:{i}"),
        }
    }
}

impl FromStr for PartyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "operator" {
            return Ok(PartyId::Operator);
        }
        s.strip_prefix("user:")
            .and_then(|i| i.parse().ok())
            .filter(|&i| i > 0)
            .map(PartyId::User)
            .ok_or_else(|| format!("invalid party id {s:?}"))
    }
}

impl Serialize for PartyId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartyId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Ciphertext(Ciphertext),
    /// An operator mask sent in the clear.
    Mask(#[serde(with = "hex")] BigUint),
    /// A jointly decrypted, still-masked value returned to the operator.
    Decrypted(#[serde(with = "hex")] BigUint),
    Indicator(bool),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Ciphertext(_) => "ciphertext",
            Payload::Mask(_) => "mask",
            Payload::Decrypted(_) => "decrypted",
            Payload::Indicator(_) => "indicator",
        }
    }
}

/// Envelope for every protocol message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMessage {
    pub protocol: Protocol,
    pub stage: Stage,
    /// Slot `j` (UFS/CFS), probe slot `t` (CSS stage 1) or action `k` (CSS
    /// stage 2), all 1-based.
    pub slot: u32,
    pub sender: PartyId,
    pub payload: Payload,
}

impl StageMessage {
    /// Canonical compact text. Field order and hex formatting are fixed, so
    /// equal messages always serialize to equal bytes.
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("message serialization is infallible")
    }

    pub fn from_text(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn party_ids_round_trip() {
        for id in [PartyId::Operator, PartyId::User(1), PartyId::User(20)] {
            assert_eq!(id.to_string().parse::<PartyId>().unwrap(), id);
        }
        assert!("user:0".parse::<PartyId>().is_err());
        assert!("user".parse::<PartyId>().is_err());
    }

    #[test]
    fn canonical_text() {
        let msg = StageMessage {
            protocol: Protocol::Ufs,
            stage: Stage::Mask,
            slot: 3,
            sender: PartyId::Operator,
            payload: Payload::Mask(BigUint::from(255u32)),
        };
        let text = msg.to_text();
        assert_eq!(
            text,
            r#"{"protocol":"ufs","stage":"mask","slot":3,"sender":"operator","payload":{"mask":"ff"}}"#
        );
        assert_eq!(StageMessage::from_text(&text).unwrap(), msg);

        let vote = StageMessage {
            protocol: Protocol::Css,
            stage: Stage::Indicator,
            slot: 1,
            sender: PartyId::User(2),
            payload: Payload::Indicator(true),
        };
        assert_eq!(
            vote.to_text(),
            r#"{"protocol":"css","stage":"indicator","slot":1,"sender":"user:2","payload":{"indicator":true}}"#
        );
    }

    #[test]
    fn stage_numbers() {
        assert_eq!(Stage::Submit.number(), 1);
        assert_eq!(Stage::Decrypted.number(), 2);
        assert_eq!(Stage::AccessKey.number(), 3);
        assert_eq!(Stage::Indicator.number(), 1);
        assert_eq!(Stage::Unmasked.number(), 2);
    }
}
