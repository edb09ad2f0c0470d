use num_rational::Rational64;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::css::{CssOperator, CssUser};
use super::facility::{FacilityOperator, FacilityUser, Variant};
use super::{
    DemandSchedule, EstimationFunction, MaskConfig, Party, PartyId, Protocol, ProtocolError, Result,
    UsageSchedule,
};
use crate::paillier::{
    check_threshold, keygen, share_private_key, threshold_keygen, Decryptor, KeyShare, PrivateKey, PublicKey, Scale,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyMode {
    /// Every user holds the common private key.
    Common,
    /// Any `threshold` of the `N` users decrypt jointly.
    Threshold { threshold: u32 },
}

#[derive(Clone, Debug)]
pub enum KeyMaterial {
    Common { public: PublicKey, private: PrivateKey },
    /// `shares[i]` belongs to user `i + 1`.
    Threshold { public: PublicKey, shares: Vec<KeyShare>, threshold: u32 },
}

impl KeyMaterial {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(
        mode: KeyMode,
        bits: u64,
        users: u32,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match mode {
            KeyMode::Common => {
                let (public, private) = keygen(bits, rng)?;
                KeyMaterial::Common { public, private }
            }
            KeyMode::Threshold { threshold } => {
                let (public, shares) = threshold_keygen(bits, users, threshold, rng)?;
                KeyMaterial::Threshold { public, shares, threshold }
            }
        })
    }

    /// Deals threshold shares of an existing key, so that common-key and
    /// threshold runs can be compared on the same modulus.
    pub fn threshold_from<R: RngCore + CryptoRng + ?Sized>(
        private: &PrivateKey,
        users: u32,
        threshold: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let shares = share_private_key(private, users, threshold, rng)?;
        Ok(KeyMaterial::Threshold { public: private.public().clone(), shares, threshold })
    }

    pub fn public(&self) -> &PublicKey {
        match self {
            KeyMaterial::Common { public, .. } | KeyMaterial::Threshold { public, .. } => public,
        }
    }

    pub fn mode(&self) -> KeyMode {
        match self {
            KeyMaterial::Common { .. } => KeyMode::Common,
            KeyMaterial::Threshold { threshold, .. } => KeyMode::Threshold { threshold: *threshold },
        }
    }

    /// Decryption capability of user `user`. In threshold mode the user
    /// cooperates with the next `t − 1` users, cyclically.
    pub fn decryptor(&self, user: u32) -> Decryptor {
        match self {
            KeyMaterial::Common { private, .. } => Decryptor::Common(private.clone()),
            KeyMaterial::Threshold { public, shares, threshold } => {
                let n = shares.len();
                let committee = (0..*threshold as usize)
                    .map(|k| shares[(user as usize - 1 + k) % n].clone())
                    .collect();
                Decryptor::Threshold { public: public.clone(), committee, threshold: *threshold }
            }
        }
    }
}

/// Private inputs, one schedule per user in user order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inputs {
    Usage(Vec<UsageSchedule>),
    Demand(Vec<DemandSchedule>),
}

impl Inputs {
    pub fn users(&self) -> u32 {
        match self {
            Inputs::Usage(s) => s.len() as u32,
            Inputs::Demand(s) => s.len() as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionConfig {
    pub protocol: Protocol,
    pub users: u32,
    pub slots: u32,
    pub scale: Scale,
    /// `C` for CSS.
    pub service_threshold: Rational64,
    /// Capacity ladder for CFS; `None` means `(N)`.
    pub capacities: Option<Vec<u32>>,
    pub seed: u64,
    pub masks: MaskConfig,
    /// Fee per unit share.
    pub fee_rate: Rational64,
    /// Payment flags per user; empty means everyone paid.
    pub paid: Vec<bool>,
}

impl SessionConfig {
    pub fn new(protocol: Protocol, users: u32, slots: u32, scale: Scale, seed: u64) -> Self {
        SessionConfig {
            protocol,
            users,
            slots,
            scale,
            service_threshold: Rational64::from(100),
            capacities: None,
            seed,
            masks: MaskConfig::default(),
            fee_rate: Rational64::from(1),
            paid: Vec::new(),
        }
    }

    pub fn paid(&self, user: u32) -> bool {
        self.paid.get((user - 1) as usize).copied().unwrap_or(true)
    }

    pub fn estimation_function(&self) -> Result<EstimationFunction> {
        match &self.capacities {
            Some(c) => EstimationFunction::new(c.clone()),
            None => Ok(EstimationFunction::uncapacitated(self.users)),
        }
    }

    fn validate(&self, keys: &KeyMaterial, inputs: &Inputs) -> Result<()> {
        let invalid = |s: String| Err(ProtocolError::InvalidConfig(s));
        if self.users == 0 || self.slots == 0 {
            return invalid("need at least one user and one slot".into());
        }
        if inputs.users() != self.users {
            return invalid(format!("{} schedules for {} users", inputs.users(), self.users));
        }
        if !self.paid.is_empty() && self.paid.len() != self.users as usize {
            return invalid(format!("{} payment flags for {} users", self.paid.len(), self.users));
        }
        let shape_ok = match inputs {
            Inputs::Usage(s) if self.protocol != Protocol::Css => s
                .iter()
                .enumerate()
                .all(|(i, s)| s.user() == i as u32 + 1 && s.slots() == self.slots),
            Inputs::Demand(s) if self.protocol == Protocol::Css => s
                .iter()
                .enumerate()
                .all(|(i, s)| s.user() == i as u32 + 1 && s.slots() == self.slots),
            _ => return invalid(format!("inputs do not match protocol {}", self.protocol)),
        };
        if !shape_ok {
            return invalid(format!("schedules must be for users 1..={} with {} slots", self.users, self.slots));
        }
        if self.protocol == Protocol::Css && self.service_threshold <= Rational64::from(0) {
            return invalid("service threshold must be positive".into());
        }
        if self.protocol == Protocol::Cfs {
            self.estimation_function()?;
        }
        if let KeyMaterial::Threshold { shares, threshold, .. } = keys {
            check_threshold(self.users, *threshold)?;
            if shares.len() != self.users as usize
                || shares.iter().enumerate().any(|(i, s)| s.index() != i as u32 + 1)
            {
                return invalid(format!("threshold mode needs shares 1..={} in order", self.users));
            }
        }
        self.masks.check(keys.public(), self.protocol, self.users, self.scale)
    }
}

/// Per-party PRNG: the session seed with a distinct stream per party.
pub fn party_rng(seed: u64, party: PartyId) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(match party {
        PartyId::Operator => 0,
        PartyId::User(i) => u64::from(i),
    });
    rng
}

/// Operator first, then users `1..=N`.
pub fn build_parties(config: &SessionConfig, keys: &KeyMaterial, inputs: &Inputs) -> Result<Vec<Box<dyn Party>>> {
    config.validate(keys, inputs)?;
    let pk = keys.public().clone();
    let rng = |id| party_rng(config.seed, id);
    let mut parties: Vec<Box<dyn Party>> = Vec::with_capacity(config.users as usize + 1);
    match inputs {
        Inputs::Usage(schedules) => {
            let variant = match config.protocol {
                Protocol::Ufs => Variant::Ufs,
                _ => Variant::Cfs(config.estimation_function()?),
            };
            let paid = (1..=config.users).map(|i| config.paid(i)).collect();
            parties.push(Box::new(FacilityOperator::new(
                variant.clone(),
                pk,
                config.users,
                config.slots,
                config.scale,
                config.masks,
                paid,
                rng(PartyId::Operator),
            )));
            for s in schedules {
                let id = PartyId::User(s.user());
                parties.push(Box::new(FacilityUser::new(
                    variant.clone(),
                    keys.decryptor(s.user()),
                    s.clone(),
                    config.scale,
                    config.users,
                    config.paid(s.user()),
                    config.fee_rate,
                    rng(id),
                )));
            }
        }
        Inputs::Demand(schedules) => {
            parties.push(Box::new(CssOperator::new(
                pk,
                config.users,
                config.slots,
                config.service_threshold,
                config.masks,
                rng(PartyId::Operator),
            )));
            for s in schedules {
                let id = PartyId::User(s.user());
                parties.push(Box::new(CssUser::new(
                    keys.decryptor(s.user()),
                    s.clone(),
                    config.scale,
                    config.users,
                    config.service_threshold,
                    config.fee_rate,
                    rng(id),
                )));
            }
        }
    }
    Ok(parties)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn party_streams_differ_and_repeat() {
        let a = party_rng(7, PartyId::Operator).next_u64();
        let b = party_rng(7, PartyId::User(1)).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, party_rng(7, PartyId::Operator).next_u64());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let keys = KeyMaterial::generate(KeyMode::Common, 128, 2, &mut rng).unwrap();
        let scale = Scale::new(100).unwrap();
        let inputs = Inputs::Usage(vec![UsageSchedule::new(1, vec![true, false]).unwrap()]);
        let config = SessionConfig::new(Protocol::Ufs, 2, 2, scale, 1);
        assert!(build_parties(&config, &keys, &inputs).is_err());
        let config = SessionConfig::new(Protocol::Css, 1, 2, scale, 1);
        assert!(build_parties(&config, &keys, &inputs).is_err());
        let config = SessionConfig::new(Protocol::Ufs, 1, 2, scale, 1);
        assert_eq!(build_parties(&config, &keys, &inputs).unwrap().len(), 2);
    }

    #[test]
    fn masks_must_fit_the_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let keys = KeyMaterial::generate(KeyMode::Common, 64, 1, &mut rng).unwrap();
        let inputs = Inputs::Usage(vec![UsageSchedule::new(1, vec![true]).unwrap()]);
        let config = SessionConfig::new(Protocol::Ufs, 1, 1, Scale::new(100).unwrap(), 1);
        assert!(matches!(build_parties(&config, &keys, &inputs), Err(ProtocolError::InvalidConfig(_))));
    }
}
