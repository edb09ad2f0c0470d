//! CSS: threshold-triggered service actions with private cost shares.
//!
//! Stage 1 sweeps the slots. At slot `t` every user probes the window
//! `(l, t]` since the last action with `E[Σ⌊S·p⌋ − ⌊S·C/N⌋]`; the operator
//! raises the product of the probes to a positive mask `R^t` and broadcasts
//! it; each user decrypts and votes `1(D^t ≥ 0)`. A unanimous yes fires an
//! action at `t`.
//!
//! Stage 2 runs per action `k` with `P_i^k` the user's scaled demand in the
//! action's window:
//!
//! 1. user → operator `E[P_i^k]`;
//! 2. operator → user `T = Π_i E[P_i^k] · E[R^k]`;
//! 3. user → operator `T^{P_i^k} · E[0]`;
//! 4. operator → user the above times `E[P_i^k]^{−R^k}`, i.e. `E[P_i^k·ΣP^k]`;
//! 5. the user divides out `P_i^k` and forms `q_i^k = P_i^k / ΣP^k`.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};
use rand::RngCore;
use rand_chacha::ChaCha20Rng;

use super::facility::{message, unexpected};
use super::{
    DemandSchedule, MaskConfig, Outbound, Party, PartyId, PartyOutput, Payload, Protocol,
    ProtocolError, Result, ServiceActionSchedule, Stage, StageMessage,
};
use crate::paillier::{encoding, Ciphertext, Decryptor, PublicKey, Scale};

fn to_big(r: Rational64) -> BigRational {
    BigRational::new((*r.numer()).into(), (*r.denom()).into())
}

/// `Σ_{t = start+1..=end} ⌊S·p^t⌋`.
pub fn scaled_window_sum(demands: &[Rational64], start: u32, end: u32, scale: Scale) -> Result<BigInt> {
    let slots = demands.len() as u32;
    if start >= end || end > slots {
        return Err(ProtocolError::WindowOutOfRange { start, end, slots });
    }
    Ok(demands[start as usize..end as usize]
        .iter()
        .map(|&p| scale.floor_scaled(&to_big(p)))
        .sum())
}

/// Each user's part of the threshold, `⌊S·C/N⌋`.
pub fn threshold_share(threshold: Rational64, users: u32, scale: Scale) -> BigInt {
    scale.floor_scaled(&(to_big(threshold) / BigInt::from(users)))
}

/// Signed plaintext of a probe: window demand minus the threshold share.
pub fn probe_value(
    demands: &[Rational64],
    window: (u32, u32),
    threshold: Rational64,
    users: u32,
    scale: Scale,
) -> Result<BigInt> {
    Ok(scaled_window_sum(demands, window.0, window.1, scale)? - threshold_share(threshold, users, scale))
}

/// `E[Σp − C/N]` over `window`, signed-encoded at scale `S`.
pub fn user_probe<R: RngCore + ?Sized>(
    pk: &PublicKey,
    demands: &[Rational64],
    window: (u32, u32),
    threshold: Rational64,
    users: u32,
    scale: Scale,
    rng: &mut R,
) -> Result<Ciphertext> {
    let v = probe_value(demands, window, threshold, users, scale)?;
    Ok(pk.encrypt(&encoding::encode_int(&v, pk)?, rng)?)
}

/// `Π_i (E_i)^{R^t}`.
pub fn operator_probe_aggregate(pk: &PublicKey, probes: &[Ciphertext], mask: &BigInt) -> Result<Ciphertext> {
    if !mask.is_positive() {
        return Err(ProtocolError::NonPositiveMask);
    }
    let total = pk.hom_sum(probes).expect("at least one user");
    Ok(pk.hom_scale(&total, mask))
}

/// `1(D^t ≥ 0)`.
pub fn sign_vote(decrypted: &BigInt) -> bool {
    !decrypted.is_negative()
}

/// Slot sweep state shared by the operator and every user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionTracker {
    slots: u32,
    last: u32,
    current: u32,
    actions: Vec<u32>,
}

impl ActionTracker {
    pub fn new(slots: u32) -> Self {
        ActionTracker { slots, last: 0, current: 1, actions: Vec::new() }
    }

    /// `(s^{k−1}, t]` for the pending probe.
    pub fn window(&self) -> (u32, u32) {
        (self.last, self.current)
    }

    pub fn current(&self) -> u32 {
        self.current
    }

    pub fn is_done(&self) -> bool {
        self.current > self.slots
    }

    /// Closes the pending probe; a firing probe starts a new window.
    pub fn record(&mut self, fire: bool) {
        debug_assert!(!self.is_done());
        if fire {
            self.actions.push(self.current);
            self.last = self.current;
        }
        self.current += 1;
    }

    pub fn actions(&self) -> &[u32] {
        &self.actions
    }
}

/// Runs the slot sweep with `fires` deciding each window.
pub fn css_operator_schedule<F>(slots: u32, threshold: Rational64, mut fires: F) -> Result<ServiceActionSchedule>
where
    F: FnMut((u32, u32)) -> Result<bool>,
{
    let mut tracker = ActionTracker::new(slots);
    while !tracker.is_done() {
        let fire = fires(tracker.window())?;
        tracker.record(fire);
    }
    Ok(ServiceActionSchedule { actions: tracker.actions, threshold })
}

/// `Π_i E[P_i^k] · E[R^k]`.
pub fn operator_masked_total(pk: &PublicKey, demands: &[Ciphertext], encrypted_mask: &Ciphertext) -> Ciphertext {
    pk.hom_add(&pk.hom_sum(demands).expect("at least one user"), encrypted_mask)
}

/// `T^{P_i^k} · E[0]`.
pub fn user_weighted<R: RngCore + ?Sized>(
    pk: &PublicKey,
    masked_total: &Ciphertext,
    own: &BigInt,
    rng: &mut R,
) -> Result<Ciphertext> {
    let zero = pk.encrypt(&BigUint::zero(), rng)?;
    Ok(pk.hom_add(&pk.hom_scale(masked_total, own), &zero))
}

/// `weighted · E[P_i^k]^{−R^k}`.
pub fn operator_unmask(pk: &PublicKey, weighted: &Ciphertext, own_demand: &Ciphertext, mask: &BigUint) -> Ciphertext {
    pk.hom_add(weighted, &pk.hom_scale(own_demand, &-BigInt::from(mask.clone())))
}

/// Recovers `ΣP^k` from `P_i^k · ΣP^k`; `None` for a user without demand.
pub fn user_recover_total(action: u32, product: &BigInt, own: &BigInt) -> Result<Option<BigInt>> {
    let corrupt = |detail: String| ProtocolError::Corruption {
        protocol: Protocol::Css,
        stage: Stage::Unmasked,
        slot: action,
        detail,
    };
    if own.is_zero() {
        return if product.is_zero() {
            Ok(None)
        } else {
            Err(corrupt(format!("user without demand decrypted {product}")))
        };
    }
    let (total, rem) = product.div_rem(own);
    if !rem.is_zero() || total < *own {
        return Err(corrupt(format!("{product} is not a multiple of own demand {own} covering it")));
    }
    Ok(Some(total))
}

/// `q_i^k = P_i^k / ΣP^k`, or 0 without demand.
pub fn fraction(own: &BigInt, total: Option<&BigInt>) -> BigRational {
    match total {
        Some(t) if !own.is_zero() => BigRational::new(own.clone(), t.clone()),
        _ => BigRational::zero(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorOutput {
    pub schedule: ServiceActionSchedule,
    /// `R^t`, one per probed slot.
    pub probe_masks: Vec<BigUint>,
    /// `R^k`, one per action.
    pub action_masks: Vec<BigUint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserOutput {
    pub user: u32,
    pub scale: Scale,
    /// Action slots as inferred from this user's own votes.
    pub actions: Vec<u32>,
    /// `P_i^k`, scaled.
    pub own: Vec<BigInt>,
    /// `ΣP^k`, scaled, as recovered by this user.
    pub totals: Vec<Option<BigInt>>,
    pub fractions: Vec<BigRational>,
    /// Scaled demand after the last action, which triggers no service.
    pub residual: BigInt,
    /// `rate · Σ_k q_i^k`.
    pub fee: BigRational,
}

/// Inbox buffer keyed by probe slot or action, one cell per user.
struct Buffer<T> {
    users: u32,
    rows: BTreeMap<u32, Vec<Option<T>>>,
}

impl<T> Buffer<T> {
    fn new(users: u32) -> Self {
        Buffer { users, rows: BTreeMap::new() }
    }

    fn insert(&mut self, key: u32, user: u32, value: T) -> bool {
        let row = self.rows.entry(key).or_insert_with(|| (0..self.users).map(|_| None).collect());
        let cell = &mut row[(user - 1) as usize];
        if cell.is_some() {
            return false;
        }
        *cell = Some(value);
        true
    }

    fn take(&mut self, key: u32) -> Option<Vec<T>> {
        if !self.rows.get(&key)?.iter().all(Option::is_some) {
            return None;
        }
        let row = self.rows.remove(&key)?;
        Some(row.into_iter().map(|c| c.expect("complete")).collect())
    }

    fn keys_beyond(&self, limit: u32) -> bool {
        self.rows.keys().any(|&k| k > limit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum OperatorPhase {
    AwaitProbes,
    AwaitVotes,
    AwaitDemands,
    AwaitWeighted,
    Done,
}

/// The service operator.
pub struct CssOperator {
    pk: PublicKey,
    users: u32,
    masks: MaskConfig,
    rng: ChaCha20Rng,
    phase: OperatorPhase,
    tracker: ActionTracker,
    probes: Buffer<Ciphertext>,
    votes: Buffer<bool>,
    demands: Buffer<Ciphertext>,
    weighted: Buffer<Ciphertext>,
    held_demands: Vec<Vec<Ciphertext>>,
    output: OperatorOutput,
}

impl CssOperator {
    pub fn new(
        pk: PublicKey,
        users: u32,
        slots: u32,
        threshold: Rational64,
        masks: MaskConfig,
        rng: ChaCha20Rng,
    ) -> Self {
        CssOperator {
            pk,
            users,
            masks,
            rng,
            phase: OperatorPhase::AwaitProbes,
            tracker: ActionTracker::new(slots),
            probes: Buffer::new(users),
            votes: Buffer::new(users),
            demands: Buffer::new(users),
            weighted: Buffer::new(users),
            held_demands: Vec::new(),
            output: OperatorOutput {
                schedule: ServiceActionSchedule { actions: Vec::new(), threshold },
                probe_masks: Vec::new(),
                action_masks: Vec::new(),
            },
        }
    }

    fn broadcast(&self, stage: Stage, slot: u32, payload: Payload, out: &mut Vec<Outbound>) {
        for i in 1..=self.users {
            out.push(self.send(i, stage, slot, payload.clone()));
        }
    }

    fn send(&self, to: u32, stage: Stage, slot: u32, payload: Payload) -> Outbound {
        Outbound {
            to: PartyId::User(to),
            message: message(Protocol::Css, stage, slot, PartyId::Operator, payload),
        }
    }

    fn accept(&mut self, msg: StageMessage) -> Result<()> {
        let phase = self.phase();
        let bad = |m: &StageMessage| unexpected(PartyId::Operator, m, phase);
        let user = match msg.sender {
            PartyId::User(i) if i <= self.users && msg.protocol == Protocol::Css => i,
            _ => return Err(bad(&msg)),
        };
        let slots = self.tracker.slots;
        let in_range = (1..=slots).contains(&msg.slot);
        let ok = match (&msg.stage, &msg.payload) {
            (Stage::Probe, Payload::Ciphertext(c)) if in_range && msg.slot >= self.tracker.current() => {
                self.pk.validate(c)?;
                self.probes.insert(msg.slot, user, c.clone())
            }
            (Stage::Indicator, Payload::Indicator(v)) if in_range && msg.slot >= self.tracker.current() => {
                self.votes.insert(msg.slot, user, *v)
            }
            (Stage::Demand, Payload::Ciphertext(c)) if in_range => {
                self.pk.validate(c)?;
                self.demands.insert(msg.slot, user, c.clone())
            }
            (Stage::Weighted, Payload::Ciphertext(c)) if self.phase == OperatorPhase::AwaitWeighted => {
                self.pk.validate(c)?;
                self.weighted.insert(msg.slot, user, c.clone())
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(bad(&msg))
        }
    }

    /// Advances as far as the buffered messages allow.
    fn step(&mut self, out: &mut Vec<Outbound>) -> Result<bool> {
        match self.phase {
            OperatorPhase::AwaitProbes => {
                let t = self.tracker.current();
                let Some(probes) = self.probes.take(t) else { return Ok(false) };
                let mask = self.masks.draw_multiplicative(&mut self.rng);
                let c = operator_probe_aggregate(&self.pk, &probes, &BigInt::from(mask.clone()))?;
                self.output.probe_masks.push(mask);
                self.broadcast(Stage::ProbeAggregate, t, Payload::Ciphertext(c), out);
                self.phase = OperatorPhase::AwaitVotes;
            }
            OperatorPhase::AwaitVotes => {
                let t = self.tracker.current();
                let Some(votes) = self.votes.take(t) else { return Ok(false) };
                if votes.iter().any(|&v| v != votes[0]) {
                    return Err(ProtocolError::Disagreement { slot: t });
                }
                self.tracker.record(votes[0]);
                self.phase = if !self.tracker.is_done() {
                    OperatorPhase::AwaitProbes
                } else if self.tracker.actions().is_empty() {
                    OperatorPhase::Done
                } else {
                    OperatorPhase::AwaitDemands
                };
                self.output.schedule.actions = self.tracker.actions().to_vec();
            }
            OperatorPhase::AwaitDemands => {
                let actions = self.tracker.actions().len() as u32;
                if self.demands.keys_beyond(actions) {
                    return Err(ProtocolError::Corruption {
                        protocol: Protocol::Css,
                        stage: Stage::Demand,
                        slot: actions + 1,
                        detail: "demand for an action that never fired".into(),
                    });
                }
                if !(1..=actions).all(|k| self.demands.rows.get(&k).is_some_and(|r| r.iter().all(Option::is_some))) {
                    return Ok(false);
                }
                for k in 1..=actions {
                    let demands = self.demands.take(k).expect("checked complete");
                    let mask = self.masks.draw_additive(&mut self.rng);
                    let em = self.pk.encrypt(&mask, &mut self.rng)?;
                    let total = operator_masked_total(&self.pk, &demands, &em);
                    self.broadcast(Stage::MaskedTotal, k, Payload::Ciphertext(total), out);
                    self.output.action_masks.push(mask);
                    self.held_demands.push(demands);
                }
                self.phase = OperatorPhase::AwaitWeighted;
            }
            OperatorPhase::AwaitWeighted => {
                let actions = self.held_demands.len() as u32;
                if self.weighted.keys_beyond(actions) {
                    return Err(ProtocolError::Corruption {
                        protocol: Protocol::Css,
                        stage: Stage::Weighted,
                        slot: actions + 1,
                        detail: "reply for an unknown action".into(),
                    });
                }
                if !(1..=actions).all(|k| self.weighted.rows.get(&k).is_some_and(|r| r.iter().all(Option::is_some))) {
                    return Ok(false);
                }
                for k in 1..=actions {
                    let replies = self.weighted.take(k).expect("checked complete");
                    let mask = &self.output.action_masks[(k - 1) as usize];
                    for (i, w) in replies.iter().enumerate() {
                        let own = &self.held_demands[(k - 1) as usize][i];
                        let c = operator_unmask(&self.pk, w, own, mask);
                        out.push(self.send(i as u32 + 1, Stage::Unmasked, k, Payload::Ciphertext(c)));
                    }
                }
                self.phase = OperatorPhase::Done;
            }
            OperatorPhase::Done => return Ok(false),
        }
        Ok(true)
    }
}

impl Party for CssOperator {
    fn id(&self) -> PartyId {
        PartyId::Operator
    }

    fn stage(&self) -> u8 {
        match self.phase {
            OperatorPhase::AwaitProbes | OperatorPhase::AwaitVotes => 1,
            _ => 2,
        }
    }

    fn phase(&self) -> &'static str {
        match self.phase {
            OperatorPhase::AwaitProbes => "await_probes",
            OperatorPhase::AwaitVotes => "await_votes",
            OperatorPhase::AwaitDemands => "await_demands",
            OperatorPhase::AwaitWeighted => "await_weighted",
            OperatorPhase::Done => "done",
        }
    }

    fn on_round(&mut self, inbox: Vec<StageMessage>) -> Result<Vec<Outbound>> {
        for msg in inbox {
            self.accept(msg)?;
        }
        let mut out = Vec::new();
        while self.step(&mut out)? {}
        Ok(out)
    }

    fn is_finished(&self) -> bool {
        self.phase == OperatorPhase::Done
    }

    fn output(&self) -> Option<PartyOutput> {
        self.is_finished().then(|| PartyOutput::CssOperator(self.output.clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UserPhase {
    Start,
    AwaitProbeAggregate,
    AwaitMaskedTotal,
    AwaitUnmasked,
    Done,
}

/// One service user.
pub struct CssUser {
    decryptor: Decryptor,
    schedule: DemandSchedule,
    scale: Scale,
    users: u32,
    threshold: Rational64,
    fee_rate: Rational64,
    rng: ChaCha20Rng,
    phase: UserPhase,
    tracker: ActionTracker,
    inbox: BTreeMap<(Stage, u32), Ciphertext>,
    output: UserOutput,
}

impl CssUser {
    pub fn new(
        decryptor: Decryptor,
        schedule: DemandSchedule,
        scale: Scale,
        users: u32,
        threshold: Rational64,
        fee_rate: Rational64,
        rng: ChaCha20Rng,
    ) -> Self {
        let slots = schedule.slots();
        let user = schedule.user();
        CssUser {
            decryptor,
            schedule,
            scale,
            users,
            threshold,
            fee_rate,
            rng,
            phase: UserPhase::Start,
            tracker: ActionTracker::new(slots),
            inbox: BTreeMap::new(),
            output: UserOutput {
                user,
                scale,
                actions: Vec::new(),
                own: Vec::new(),
                totals: Vec::new(),
                fractions: Vec::new(),
                residual: BigInt::zero(),
                fee: BigRational::zero(),
            },
        }
    }

    fn me(&self) -> PartyId {
        PartyId::User(self.schedule.user())
    }

    fn send(&self, stage: Stage, slot: u32, payload: Payload) -> Outbound {
        Outbound { to: PartyId::Operator, message: message(Protocol::Css, stage, slot, self.me(), payload) }
    }

    fn accept(&mut self, msg: StageMessage) -> Result<()> {
        let phase = self.phase();
        let me = self.me();
        let expected = match self.phase {
            UserPhase::AwaitProbeAggregate => Stage::ProbeAggregate,
            UserPhase::AwaitMaskedTotal => Stage::MaskedTotal,
            UserPhase::AwaitUnmasked => Stage::Unmasked,
            _ => return Err(unexpected(me, &msg, phase)),
        };
        match msg.payload {
            Payload::Ciphertext(ref c)
                if msg.sender == PartyId::Operator && msg.protocol == Protocol::Css && msg.stage == expected =>
            {
                self.decryptor.public().validate(c)?;
                if self.inbox.insert((msg.stage, msg.slot), c.clone()).is_some() {
                    return Err(unexpected(me, &msg, phase));
                }
                Ok(())
            }
            _ => Err(unexpected(me, &msg, phase)),
        }
    }

    fn probe(&mut self, out: &mut Vec<Outbound>) -> Result<()> {
        let t = self.tracker.current();
        let c = user_probe(
            self.decryptor.public(),
            self.schedule.demands(),
            self.tracker.window(),
            self.threshold,
            self.users,
            self.scale,
            &mut self.rng,
        )?;
        out.push(self.send(Stage::Probe, t, Payload::Ciphertext(c)));
        self.phase = UserPhase::AwaitProbeAggregate;
        Ok(())
    }

    fn vote(&mut self, c: Ciphertext, out: &mut Vec<Outbound>) -> Result<()> {
        let t = self.tracker.current();
        let fire = sign_vote(&self.decryptor.decrypt_signed(&c)?);
        out.push(self.send(Stage::Indicator, t, Payload::Indicator(fire)));
        self.tracker.record(fire);
        if !self.tracker.is_done() {
            return self.probe(out);
        }
        self.output.actions = self.tracker.actions().to_vec();
        let demands = self.schedule.demands();
        let mut start = 0;
        for &end in &self.output.actions {
            self.output.own.push(scaled_window_sum(demands, start, end, self.scale)?);
            start = end;
        }
        if start < self.schedule.slots() {
            self.output.residual = scaled_window_sum(demands, start, self.schedule.slots(), self.scale)?;
        }
        if self.output.actions.is_empty() {
            self.phase = UserPhase::Done;
            return Ok(());
        }
        let pk = self.decryptor.public().clone();
        for (k, p) in self.output.own.clone().iter().enumerate() {
            let raw = p.to_biguint().expect("demands are non-negative");
            let c = pk.encrypt(&raw, &mut self.rng)?;
            out.push(self.send(Stage::Demand, k as u32 + 1, Payload::Ciphertext(c)));
        }
        self.phase = UserPhase::AwaitMaskedTotal;
        Ok(())
    }

    fn take_all(&mut self, stage: Stage) -> Option<Vec<Ciphertext>> {
        let k = self.output.actions.len() as u32;
        if !(1..=k).all(|a| self.inbox.contains_key(&(stage, a))) {
            return None;
        }
        Some((1..=k).map(|a| self.inbox.remove(&(stage, a)).expect("present")).collect())
    }

    fn weigh(&mut self, totals: Vec<Ciphertext>, out: &mut Vec<Outbound>) -> Result<()> {
        let pk = self.decryptor.public().clone();
        for (k, t) in totals.iter().enumerate() {
            let w = user_weighted(&pk, t, &self.output.own[k], &mut self.rng)?;
            out.push(self.send(Stage::Weighted, k as u32 + 1, Payload::Ciphertext(w)));
        }
        self.phase = UserPhase::AwaitUnmasked;
        Ok(())
    }

    fn recover(&mut self, products: Vec<Ciphertext>) -> Result<()> {
        let mut fee_share = BigRational::zero();
        for (k, c) in products.iter().enumerate() {
            let product = self.decryptor.decrypt_signed(c)?;
            let own = &self.output.own[k];
            let total = user_recover_total(k as u32 + 1, &product, own)?;
            let q = fraction(own, total.as_ref());
            fee_share += &q;
            self.output.fractions.push(q);
            self.output.totals.push(total);
        }
        self.output.fee = fee_share * to_big(self.fee_rate);
        self.phase = UserPhase::Done;
        Ok(())
    }
}

impl Party for CssUser {
    fn id(&self) -> PartyId {
        self.me()
    }

    fn stage(&self) -> u8 {
        match self.phase {
            UserPhase::Start | UserPhase::AwaitProbeAggregate => 1,
            _ => 2,
        }
    }

    fn phase(&self) -> &'static str {
        match self.phase {
            UserPhase::Start => "start",
            UserPhase::AwaitProbeAggregate => "await_probe_aggregate",
            UserPhase::AwaitMaskedTotal => "await_masked_total",
            UserPhase::AwaitUnmasked => "await_unmasked",
            UserPhase::Done => "done",
        }
    }

    fn on_round(&mut self, inbox: Vec<StageMessage>) -> Result<Vec<Outbound>> {
        for msg in inbox {
            self.accept(msg)?;
        }
        let mut out = Vec::new();
        loop {
            match self.phase {
                UserPhase::Start => self.probe(&mut out)?,
                UserPhase::AwaitProbeAggregate => {
                    let key = (Stage::ProbeAggregate, self.tracker.current());
                    let Some(c) = self.inbox.remove(&key) else { break };
                    self.vote(c, &mut out)?;
                }
                UserPhase::AwaitMaskedTotal => {
                    let Some(totals) = self.take_all(Stage::MaskedTotal) else { break };
                    self.weigh(totals, &mut out)?;
                }
                UserPhase::AwaitUnmasked => {
                    let Some(products) = self.take_all(Stage::Unmasked) else { break };
                    self.recover(products)?;
                }
                UserPhase::Done => break,
            }
        }
        Ok(out)
    }

    fn is_finished(&self) -> bool {
        self.phase == UserPhase::Done
    }

    fn output(&self) -> Option<PartyOutput> {
        self.is_finished().then(|| PartyOutput::CssUser(self.output.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paillier::{keygen, PrivateKey};
    use rand::SeedableRng;

    fn setup(seed: u64) -> (PublicKey, PrivateKey, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (pk, sk) = keygen(128, &mut rng).unwrap();
        (pk, sk, rng)
    }

    fn r(v: i64) -> Rational64 {
        Rational64::from(v)
    }

    fn one() -> Scale {
        Scale::new(1).unwrap()
    }

    fn signed(sk: &PrivateKey, c: &Ciphertext) -> BigInt {
        encoding::decode_int(&sk.decrypt(c).unwrap(), sk.public())
    }

    #[test]
    fn probes_encode_signed_window_demand() {
        let (pk, sk, mut rng) = setup(1);
        let c = user_probe(&pk, &[r(30)], (0, 1), r(100), 2, one(), &mut rng).unwrap();
        assert_eq!(sk.decrypt(&c).unwrap(), pk.n() - 20u32);
        assert_eq!(signed(&sk, &c), BigInt::from(-20));
        let c = user_probe(&pk, &[r(60), r(60)], (0, 2), r(100), 2, one(), &mut rng).unwrap();
        assert_eq!(signed(&sk, &c), BigInt::from(70));
        assert_eq!(
            user_probe(&pk, &[r(1)], (1, 1), r(100), 2, one(), &mut rng).unwrap_err(),
            ProtocolError::WindowOutOfRange { start: 1, end: 1, slots: 1 }
        );
        assert!(user_probe(&pk, &[r(1)], (0, 2), r(100), 2, one(), &mut rng).is_err());
    }

    #[test]
    fn probe_aggregate_keeps_sign() {
        let (pk, sk, mut rng) = setup(2);
        let enc = |v: i64, rng: &mut ChaCha20Rng| {
            pk.encrypt(&encoding::encode_int(&BigInt::from(v), &pk).unwrap(), rng).unwrap()
        };
        let probes = [enc(70, &mut rng), enc(-50, &mut rng)];
        let c = operator_probe_aggregate(&pk, &probes, &BigInt::from(3)).unwrap();
        assert_eq!(signed(&sk, &c), BigInt::from(60));
        let probes = [enc(-10, &mut rng), enc(-10, &mut rng)];
        let c = operator_probe_aggregate(&pk, &probes, &BigInt::from(3)).unwrap();
        assert!(signed(&sk, &c).is_negative());
        let probes = [enc(10, &mut rng), enc(-10, &mut rng)];
        let c = operator_probe_aggregate(&pk, &probes, &BigInt::from(5)).unwrap();
        assert!(sign_vote(&signed(&sk, &c)));
        assert_eq!(
            operator_probe_aggregate(&pk, &probes, &BigInt::zero()).unwrap_err(),
            ProtocolError::NonPositiveMask
        );
    }

    #[test]
    fn votes() {
        assert!(sign_vote(&BigInt::from(60)));
        assert!(!sign_vote(&BigInt::from(-60)));
        assert!(sign_vote(&BigInt::zero()));
    }

    fn plain_sweep(demands: &[Vec<i64>], c: i64) -> Vec<u32> {
        let slots = demands[0].len() as u32;
        css_operator_schedule(slots, r(c), |(l, t)| {
            let total: i64 = demands.iter().map(|p| p[l as usize..t as usize].iter().sum::<i64>()).sum();
            Ok(total >= c)
        })
        .unwrap()
        .actions
    }

    #[test]
    fn schedule_sweep() {
        assert_eq!(plain_sweep(&[vec![30, 30, 30], vec![30, 30, 30]], 100), vec![2]);
        assert_eq!(plain_sweep(&[vec![0, 0, 0]], 100), Vec::<u32>::new());
        assert_eq!(plain_sweep(&[vec![5, 5, 5, 5]], 1), vec![1, 2, 3, 4]);
        assert_eq!(plain_sweep(&[vec![50, 50, 100, 10]], 100), vec![2, 3]);
    }

    #[test]
    fn share_exchange_recovers_fractions() {
        let (pk, sk, mut rng) = setup(3);
        let own = [BigInt::from(60), BigInt::from(60), BigInt::zero()];
        let cts: Vec<_> = own
            .iter()
            .map(|p| pk.encrypt(&p.to_biguint().unwrap(), &mut rng).unwrap())
            .collect();
        let mask = BigUint::from(987_654_321u64);
        let em = pk.encrypt(&mask, &mut rng).unwrap();
        let total = operator_masked_total(&pk, &cts, &em);
        let mut sum = BigRational::zero();
        for (p, c) in own.iter().zip(&cts) {
            let w = user_weighted(&pk, &total, p, &mut rng).unwrap();
            let back = operator_unmask(&pk, &w, c, &mask);
            let product = signed(&sk, &back);
            let recovered = user_recover_total(1, &product, p).unwrap();
            let q = fraction(p, recovered.as_ref());
            if p.is_zero() {
                assert!(recovered.is_none());
                assert!(q.is_zero());
            } else {
                assert_eq!(recovered, Some(BigInt::from(120)));
                assert_eq!(q, BigRational::new(1.into(), 2.into()));
            }
            sum += q;
        }
        assert_eq!(sum, BigRational::from_integer(1.into()));
    }

    #[test]
    fn recovery_flags_non_multiples() {
        assert!(user_recover_total(1, &BigInt::from(121), &BigInt::from(60)).is_err());
        assert!(user_recover_total(1, &BigInt::from(5), &BigInt::zero()).is_err());
        assert!(user_recover_total(1, &BigInt::from(60), &BigInt::from(60)).is_err());
        assert_eq!(user_recover_total(1, &BigInt::from(7200), &BigInt::from(60)).unwrap(), Some(BigInt::from(120)));
    }

    #[test]
    fn scaled_sums_floor_each_slot() {
        let p = [Rational64::new(143, 10), Rational64::new(157, 10)];
        let s = |v| Scale::new(v).unwrap();
        assert_eq!(scaled_window_sum(&p, 0, 2, s(1)).unwrap(), BigInt::from(29));
        assert_eq!(scaled_window_sum(&p, 0, 2, s(10)).unwrap(), BigInt::from(300));
        assert_eq!(threshold_share(r(100), 3, s(10)), BigInt::from(333));
    }
}
