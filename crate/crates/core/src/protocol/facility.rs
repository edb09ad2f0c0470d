//! UFS and CFS: operator and user state machines plus the pure stage
//! transitions they are built from.
//!
//! Per slot `j` the exchange is
//!
//! 1. user → operator `E[b_i^j]`; operator → user
//!    `Π_i' E[b_i'^j] · E[R^j] · E[b_i^j]^{−R^j}`, which decrypts to `N^j` for
//!    a requesting user and to `N^j + R^j` otherwise;
//! 2. operator → user the plaintext mask `R_i^j`; user → operator
//!    `E[⌊S·w⌋ + R_i^j]` with `w = 1/N^j` (UFS) or `f(N^j)/N^j` (CFS) for a
//!    requesting user and `w = 0` otherwise; operator → all `Π_i E_i^j`;
//!    user → operator the decryption `D^j`, from which the operator removes
//!    `Σ_i R_i^j` and rounds;
//! 3. operator → paid user `E[b_i^j]^{κ^j}`.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};
use rand::{CryptoRng, RngCore};
use rand_chacha::ChaCha20Rng;

use super::{
    EstimationFunction, MaskConfig, Outbound, Party, PartyId, PartyOutput, Payload, Protocol,
    ProtocolError, Result, Stage, StageMessage, UsageSchedule,
};
use crate::paillier::{Ciphertext, Decryptor, PublicKey, Scale};

/// What a facility run computes for the operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Variant {
    Ufs,
    Cfs(EstimationFunction),
}

impl Variant {
    pub fn protocol(&self) -> Protocol {
        match self {
            Variant::Ufs => Protocol::Ufs,
            Variant::Cfs(_) => Protocol::Cfs,
        }
    }

    /// Largest legal coarse value: 1 for UFS, `r` for CFS.
    pub fn max_coarse(&self) -> u32 {
        match self {
            Variant::Ufs => 1,
            Variant::Cfs(f) => f.tiers(),
        }
    }

    /// Per-user share `w` of a slot with `count` occupants, before scaling.
    pub fn weight(&self, slot: u32, count: u32) -> Result<BigRational> {
        let tier = match self {
            Variant::Ufs => 1,
            Variant::Cfs(f) => f.estimate(count).ok_or(ProtocolError::CapacityExhausted {
                slot,
                count,
                capacity: f.max_capacity(),
            })?,
        };
        Ok(BigRational::new(BigInt::from(tier), BigInt::from(count)))
    }
}

/// A user's view of one slot after stage 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotView {
    /// `N^j`, learned because the user requested the slot.
    KnownCount(u32),
    /// `N^j + R^j`, meaningless without the operator's mask.
    Masked(BigUint),
}

impl SlotView {
    pub fn count(&self) -> Option<u32> {
        match self {
            SlotView::KnownCount(c) => Some(*c),
            SlotView::Masked(_) => None,
        }
    }
}

/// Operator randomness, kept for auditing mask cancellation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MaskState {
    /// `R^j`, indexed by slot.
    pub slot_masks: Vec<BigUint>,
    /// `R_i^j`, indexed by user then slot.
    pub user_masks: Vec<Vec<BigUint>>,
}

impl MaskState {
    /// `Σ_i R_i^j` for a 1-based slot.
    pub fn user_mask_sum(&self, slot: u32) -> BigUint {
        self.user_masks.iter().map(|m| &m[(slot - 1) as usize]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorOutput {
    pub protocol: Protocol,
    pub scale: Scale,
    /// `c^j` (UFS) or `c̃^j` (CFS).
    pub coarse: Vec<u32>,
    /// `u^j = D^j − Σ_i R_i^j` before rounding.
    pub unmasked: Vec<BigInt>,
    /// `κ^j`, one per slot.
    pub access_keys: Vec<BigUint>,
    pub masks: MaskState,
}

impl OperatorOutput {
    /// `u^j / S`.
    pub fn raw_estimate(&self, slot: u32) -> BigRational {
        BigRational::new(self.unmasked[(slot - 1) as usize].clone(), self.scale.as_bigint())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserOutput {
    pub user: u32,
    pub entries: Vec<SlotView>,
    /// `D^j` as decrypted by this user.
    pub decrypted: Vec<BigUint>,
    /// Decrypted `E[b_i^j]^{κ^j}` per slot, present for paid users.
    pub access_keys: Option<Vec<BigUint>>,
    /// `rate · Σ_j w_i^j` over the requested slots.
    pub fee: BigRational,
}

/// `E[b_i^j]` for every slot.
pub fn user_submit<R: RngCore + ?Sized>(
    pk: &PublicKey,
    schedule: &UsageSchedule,
    rng: &mut R,
) -> Result<Vec<Ciphertext>> {
    schedule
        .bits()
        .iter()
        .map(|&b| Ok(pk.encrypt(&BigUint::from(b as u8), rng)?))
        .collect()
}

/// `Π_i' E[b_i'^j] · E[R^j] · own^{−R^j}`, the stage-1 reply to one user.
pub fn operator_masked_count(
    pk: &PublicKey,
    slot_total: &Ciphertext,
    encrypted_mask: &Ciphertext,
    own: &Ciphertext,
    mask: &BigUint,
) -> Ciphertext {
    let cancel = pk.hom_scale(own, &-BigInt::from(mask.clone()));
    pk.hom_add(&pk.hom_add(slot_total, encrypted_mask), &cancel)
}

/// Classifies the decrypted stage-1 value of one slot.
pub fn interpret_stage1(
    protocol: Protocol,
    slot: u32,
    requested: bool,
    value: BigUint,
    users: u32,
) -> Result<SlotView> {
    if !requested {
        return Ok(SlotView::Masked(value));
    }
    match u32::try_from(&value) {
        Ok(count) if (1..=users).contains(&count) => Ok(SlotView::KnownCount(count)),
        _ => Err(ProtocolError::Corruption {
            protocol,
            stage: Stage::MaskedCount,
            slot,
            detail: format!("requesting user decrypted count {value} outside 1..={users}"),
        }),
    }
}

/// Raw stage-2 plaintext `⌊S·w⌋ + R_i^j`, or `R_i^j` for a slot not requested.
pub fn contribution_value(
    variant: &Variant,
    slot: u32,
    view: &SlotView,
    requested: bool,
    mask: &BigUint,
    scale: Scale,
) -> Result<BigUint> {
    if !requested {
        return Ok(mask.clone());
    }
    let count = view.count().ok_or(ProtocolError::MissingCount { slot })?;
    let payload = scale.floor_scaled(&variant.weight(slot, count)?);
    Ok(payload.to_biguint().expect("weights are non-negative") + mask)
}

/// Encrypted stage-2 contribution `E_i^j`.
#[allow(clippy::too_many_arguments)]
pub fn user_contribution<R: RngCore + ?Sized>(
    pk: &PublicKey,
    variant: &Variant,
    slot: u32,
    view: &SlotView,
    requested: bool,
    mask: &BigUint,
    scale: Scale,
    rng: &mut R,
) -> Result<Ciphertext> {
    let value = contribution_value(variant, slot, view, requested, mask, scale)?;
    Ok(pk.encrypt(&value, rng)?)
}

/// `Π_i E_i^j`.
pub fn operator_aggregate(pk: &PublicKey, contributions: &[Ciphertext]) -> Ciphertext {
    pk.hom_sum(contributions).expect("at least one user")
}

/// Removes the stage-2 masks and rounds `u / S` half up.
///
/// Returns `(coarse, u)`.
pub fn operator_finalize(
    variant: &Variant,
    slot: u32,
    decrypted: &BigUint,
    mask_sum: &BigUint,
    scale: Scale,
    users: u32,
) -> Result<(u32, BigInt)> {
    let protocol = variant.protocol();
    let u = BigInt::from(decrypted.clone()) - BigInt::from(mask_sum.clone());
    let s = scale.as_bigint();
    let ceiling = &s * variant.max_coarse() + users;
    let corrupt = |detail: String| ProtocolError::Corruption {
        protocol,
        stage: Stage::Decrypted,
        slot,
        detail,
    };
    if u.is_negative() || u > ceiling {
        return Err(corrupt(format!("unmasked aggregate {u} outside 0..={ceiling}")));
    }
    let doubled: BigInt = &u * 2 + &s;
    let rounded = doubled.div_floor(&(&s * 2));
    let coarse = u32::try_from(&rounded).unwrap_or(u32::MAX);
    match variant {
        Variant::Ufs => Ok((coarse.min(1), u)),
        Variant::Cfs(_) if coarse > variant.max_coarse() => {
            Err(corrupt(format!("tier {coarse} exceeds {}", variant.max_coarse())))
        }
        Variant::Cfs(_) => Ok((coarse, u)),
    }
}

/// `E[b_i^j]^{κ^j}`.
pub fn operator_distribute_key(pk: &PublicKey, submission: &Ciphertext, key: &BigUint) -> Ciphertext {
    pk.hom_scale(submission, &BigInt::from(key.clone()))
}

/// Draws `κ^j` with `min(128, bits − 2)` bits.
pub fn draw_access_key<R: RngCore + CryptoRng + ?Sized>(pk: &PublicKey, rng: &mut R) -> BigUint {
    let bits = pk.bits().saturating_sub(2).min(128);
    rng.gen_biguint(bits)
}

pub(crate) fn message(
    protocol: Protocol,
    stage: Stage,
    slot: u32,
    sender: PartyId,
    payload: Payload,
) -> StageMessage {
    StageMessage { protocol, stage, slot, sender, payload }
}

pub(crate) fn unexpected(party: PartyId, msg: &StageMessage, phase: &str) -> ProtocolError {
    ProtocolError::UnexpectedMessage {
        party,
        detail: format!(
            "{} {} slot {} from {} ({}) during {phase}",
            msg.protocol,
            msg.stage,
            msg.slot,
            msg.sender,
            msg.payload.kind()
        ),
    }
}

/// Stores `value` at `grid[row][slot − 1]`, refusing duplicates.
pub(crate) fn place<T>(
    grid: &mut [Vec<Option<T>>],
    row: usize,
    slot: u32,
    value: T,
) -> std::result::Result<(), ()> {
    let cell = grid.get_mut(row).and_then(|r| r.get_mut((slot as usize).wrapping_sub(1))).ok_or(())?;
    if cell.is_some() {
        return Err(());
    }
    *cell = Some(value);
    Ok(())
}

pub(crate) fn complete<T>(grid: &[Vec<Option<T>>]) -> bool {
    grid.iter().all(|r| r.iter().all(Option::is_some))
}

pub(crate) fn take_grid<T>(grid: &mut Vec<Vec<Option<T>>>) -> Vec<Vec<T>> {
    std::mem::take(grid)
        .into_iter()
        .map(|r| r.into_iter().map(|c| c.expect("grid complete")).collect())
        .collect()
}

pub(crate) fn empty_grid<T>(rows: usize, cols: usize) -> Vec<Vec<Option<T>>> {
    (0..rows).map(|_| (0..cols).map(|_| None).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum OperatorPhase {
    AwaitSubmit,
    AwaitContribution,
    AwaitDecrypted,
    Distribute,
    Done,
}

/// The facility operator.
pub struct FacilityOperator {
    variant: Variant,
    pk: PublicKey,
    users: u32,
    slots: u32,
    scale: Scale,
    masks: MaskConfig,
    paid: Vec<bool>,
    rng: ChaCha20Rng,
    phase: OperatorPhase,
    submissions: Vec<Vec<Option<Ciphertext>>>,
    contributions: Vec<Vec<Option<Ciphertext>>>,
    decryptions: Vec<Vec<Option<BigUint>>>,
    submitted: Vec<Vec<Ciphertext>>,
    mask_state: MaskState,
    output: Option<OperatorOutput>,
}

impl FacilityOperator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: Variant,
        pk: PublicKey,
        users: u32,
        slots: u32,
        scale: Scale,
        masks: MaskConfig,
        paid: Vec<bool>,
        rng: ChaCha20Rng,
    ) -> Self {
        let (n, m) = (users as usize, slots as usize);
        FacilityOperator {
            variant,
            pk,
            users,
            slots,
            scale,
            masks,
            paid,
            rng,
            phase: OperatorPhase::AwaitSubmit,
            submissions: empty_grid(n, m),
            contributions: empty_grid(n, m),
            decryptions: empty_grid(n, m),
            submitted: Vec::new(),
            mask_state: MaskState::default(),
            output: None,
        }
    }

    fn protocol(&self) -> Protocol {
        self.variant.protocol()
    }

    fn send(&self, to: u32, stage: Stage, slot: u32, payload: Payload) -> Outbound {
        Outbound {
            to: PartyId::User(to),
            message: message(self.protocol(), stage, slot, PartyId::Operator, payload),
        }
    }

    fn accept(&mut self, msg: StageMessage) -> Result<()> {
        let phase = self.phase();
        let bad = |m: &StageMessage| unexpected(PartyId::Operator, m, phase);
        let user = match msg.sender {
            PartyId::User(i) if i <= self.users && msg.protocol == self.protocol() => i,
            _ => return Err(bad(&msg)),
        };
        let row = (user - 1) as usize;
        let placed = match (self.phase, msg.stage, &msg.payload) {
            (OperatorPhase::AwaitSubmit, Stage::Submit, Payload::Ciphertext(c)) => {
                self.pk.validate(c)?;
                place(&mut self.submissions, row, msg.slot, c.clone())
            }
            (OperatorPhase::AwaitContribution, Stage::Contribution, Payload::Ciphertext(c)) => {
                self.pk.validate(c)?;
                place(&mut self.contributions, row, msg.slot, c.clone())
            }
            (OperatorPhase::AwaitDecrypted, Stage::Decrypted, Payload::Decrypted(d)) => {
                place(&mut self.decryptions, row, msg.slot, d.clone())
            }
            _ => Err(()),
        };
        placed.map_err(|_| bad(&msg))
    }

    fn stage1(&mut self) -> Vec<Outbound> {
        self.submitted = take_grid(&mut self.submissions);
        let pk = &self.pk;
        let mut out = Vec::with_capacity((self.users * self.slots * 2) as usize);
        let mut slot_masks = Vec::with_capacity(self.slots as usize);
        let mut user_masks = vec![Vec::with_capacity(self.slots as usize); self.users as usize];
        for j in 0..self.slots as usize {
            let mask = self.masks.draw_additive(&mut self.rng);
            let encrypted_mask = pk.encrypt(&mask, &mut self.rng).expect("mask below n");
            let total = pk.hom_sum(self.submitted.iter().map(|row| &row[j])).expect("users ≥ 1");
            for (i, row) in self.submitted.iter().enumerate() {
                let reply = operator_masked_count(pk, &total, &encrypted_mask, &row[j], &mask);
                let user_mask = self.masks.draw_additive(&mut self.rng);
                let to = i as u32 + 1;
                let slot = j as u32 + 1;
                out.push(self.send(to, Stage::MaskedCount, slot, Payload::Ciphertext(reply)));
                out.push(self.send(to, Stage::Mask, slot, Payload::Mask(user_mask.clone())));
                user_masks[i].push(user_mask);
            }
            slot_masks.push(mask);
        }
        self.mask_state = MaskState { slot_masks, user_masks };
        out
    }

    fn aggregate(&mut self) -> Vec<Outbound> {
        let contributions = take_grid(&mut self.contributions);
        let mut out = Vec::with_capacity((self.users * self.slots) as usize);
        for j in 0..self.slots as usize {
            let column: Vec<_> = contributions.iter().map(|row| row[j].clone()).collect();
            let product = operator_aggregate(&self.pk, &column);
            for i in 1..=self.users {
                out.push(self.send(i, Stage::Aggregate, j as u32 + 1, Payload::Ciphertext(product.clone())));
            }
        }
        out
    }

    fn finalize(&mut self) -> Result<()> {
        let decryptions = take_grid(&mut self.decryptions);
        let mut coarse = Vec::with_capacity(self.slots as usize);
        let mut unmasked = Vec::with_capacity(self.slots as usize);
        for slot in 1..=self.slots {
            let j = (slot - 1) as usize;
            let d = &decryptions[0][j];
            if decryptions.iter().any(|row| &row[j] != d) {
                return Err(ProtocolError::Corruption {
                    protocol: self.protocol(),
                    stage: Stage::Decrypted,
                    slot,
                    detail: "users returned different decryptions".into(),
                });
            }
            let mask_sum = self.mask_state.user_mask_sum(slot);
            let (c, u) = operator_finalize(&self.variant, slot, d, &mask_sum, self.scale, self.users)?;
            coarse.push(c);
            unmasked.push(u);
        }
        self.output = Some(OperatorOutput {
            protocol: self.protocol(),
            scale: self.scale,
            coarse,
            unmasked,
            access_keys: Vec::new(),
            masks: self.mask_state.clone(),
        });
        Ok(())
    }

    fn distribute(&mut self) -> Vec<Outbound> {
        let keys: Vec<BigUint> =
            (0..self.slots).map(|_| draw_access_key(&self.pk, &mut self.rng)).collect();
        let mut out = Vec::new();
        for (i, row) in self.submitted.iter().enumerate() {
            if !self.paid[i] {
                continue;
            }
            for (j, key) in keys.iter().enumerate() {
                let c = operator_distribute_key(&self.pk, &row[j], key);
                out.push(self.send(i as u32 + 1, Stage::AccessKey, j as u32 + 1, Payload::Ciphertext(c)));
            }
        }
        self.output.as_mut().expect("finalized").access_keys = keys;
        out
    }
}

impl Party for FacilityOperator {
    fn id(&self) -> PartyId {
        PartyId::Operator
    }

    fn stage(&self) -> u8 {
        match self.phase {
            OperatorPhase::AwaitSubmit => 1,
            OperatorPhase::AwaitContribution | OperatorPhase::AwaitDecrypted => 2,
            OperatorPhase::Distribute | OperatorPhase::Done => 3,
        }
    }

    fn phase(&self) -> &'static str {
        match self.phase {
            OperatorPhase::AwaitSubmit => "await_submit",
            OperatorPhase::AwaitContribution => "await_contribution",
            OperatorPhase::AwaitDecrypted => "await_decrypted",
            OperatorPhase::Distribute => "distribute",
            OperatorPhase::Done => "done",
        }
    }

    fn on_round(&mut self, inbox: Vec<StageMessage>) -> Result<Vec<Outbound>> {
        for msg in inbox {
            self.accept(msg)?;
        }
        Ok(match self.phase {
            OperatorPhase::AwaitSubmit if complete(&self.submissions) => {
                self.phase = OperatorPhase::AwaitContribution;
                self.stage1()
            }
            OperatorPhase::AwaitContribution if complete(&self.contributions) => {
                self.phase = OperatorPhase::AwaitDecrypted;
                self.aggregate()
            }
            OperatorPhase::AwaitDecrypted if complete(&self.decryptions) => {
                self.finalize()?;
                self.phase = OperatorPhase::Distribute;
                Vec::new()
            }
            OperatorPhase::Distribute => {
                self.phase = OperatorPhase::Done;
                self.distribute()
            }
            _ => Vec::new(),
        })
    }

    fn is_finished(&self) -> bool {
        self.phase == OperatorPhase::Done
    }

    fn output(&self) -> Option<PartyOutput> {
        self.is_finished().then(|| PartyOutput::FacilityOperator(self.output.clone().expect("finalized")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UserPhase {
    Submit,
    AwaitStage1,
    AwaitAggregate,
    AwaitKey,
    Done,
}

/// One facility user.
pub struct FacilityUser {
    variant: Variant,
    decryptor: Decryptor,
    schedule: UsageSchedule,
    scale: Scale,
    users: u32,
    paid: bool,
    fee_rate: Rational64,
    rng: ChaCha20Rng,
    phase: UserPhase,
    masked_counts: Vec<Vec<Option<Ciphertext>>>,
    masks: Vec<Vec<Option<BigUint>>>,
    aggregates: Vec<Vec<Option<Ciphertext>>>,
    keys: Vec<Vec<Option<Ciphertext>>>,
    output: UserOutput,
}

impl FacilityUser {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: Variant,
        decryptor: Decryptor,
        schedule: UsageSchedule,
        scale: Scale,
        users: u32,
        paid: bool,
        fee_rate: Rational64,
        rng: ChaCha20Rng,
    ) -> Self {
        let m = schedule.slots() as usize;
        let user = schedule.user();
        FacilityUser {
            variant,
            decryptor,
            schedule,
            scale,
            users,
            paid,
            fee_rate,
            rng,
            phase: UserPhase::Submit,
            masked_counts: empty_grid(1, m),
            masks: empty_grid(1, m),
            aggregates: empty_grid(1, m),
            keys: empty_grid(1, m),
            output: UserOutput {
                user,
                entries: Vec::new(),
                decrypted: Vec::new(),
                access_keys: None,
                fee: BigRational::zero(),
            },
        }
    }

    fn me(&self) -> PartyId {
        PartyId::User(self.schedule.user())
    }

    fn send(&self, stage: Stage, slot: u32, payload: Payload) -> Outbound {
        Outbound {
            to: PartyId::Operator,
            message: message(self.variant.protocol(), stage, slot, self.me(), payload),
        }
    }

    fn accept(&mut self, msg: StageMessage) -> Result<()> {
        let pk = self.decryptor.public();
        let phase = self.phase();
        let me = self.me();
        if msg.sender != PartyId::Operator || msg.protocol != self.variant.protocol() {
            return Err(unexpected(me, &msg, phase));
        }
        let placed = match (self.phase, msg.stage, &msg.payload) {
            (UserPhase::AwaitStage1, Stage::MaskedCount, Payload::Ciphertext(c)) => {
                pk.validate(c)?;
                place(&mut self.masked_counts, 0, msg.slot, c.clone())
            }
            (UserPhase::AwaitStage1, Stage::Mask, Payload::Mask(r)) => {
                place(&mut self.masks, 0, msg.slot, r.clone())
            }
            (UserPhase::AwaitAggregate, Stage::Aggregate, Payload::Ciphertext(c)) => {
                pk.validate(c)?;
                place(&mut self.aggregates, 0, msg.slot, c.clone())
            }
            (UserPhase::AwaitKey, Stage::AccessKey, Payload::Ciphertext(c)) => {
                pk.validate(c)?;
                place(&mut self.keys, 0, msg.slot, c.clone())
            }
            _ => Err(()),
        };
        placed.map_err(|_| unexpected(me, &msg, phase))
    }

    fn submit(&mut self) -> Result<Vec<Outbound>> {
        let cts = user_submit(self.decryptor.public(), &self.schedule, &mut self.rng)?;
        Ok(cts
            .into_iter()
            .enumerate()
            .map(|(j, c)| self.send(Stage::Submit, j as u32 + 1, Payload::Ciphertext(c)))
            .collect())
    }

    fn contribute(&mut self) -> Result<Vec<Outbound>> {
        let counts = take_grid(&mut self.masked_counts).remove(0);
        let masks = take_grid(&mut self.masks).remove(0);
        let protocol = self.variant.protocol();
        let mut fee = BigRational::zero();
        let mut out = Vec::with_capacity(counts.len());
        for (j, (c, mask)) in counts.iter().zip(&masks).enumerate() {
            let slot = j as u32 + 1;
            let requested = self.schedule.requests(slot);
            let value = self.decryptor.decrypt(c)?;
            let view = interpret_stage1(protocol, slot, requested, value, self.users)?;
            if let Some(count) = view.count() {
                fee += self.variant.weight(slot, count)?;
            }
            let e = user_contribution(
                self.decryptor.public(),
                &self.variant,
                slot,
                &view,
                requested,
                mask,
                self.scale,
                &mut self.rng,
            )?;
            out.push(self.send(Stage::Contribution, slot, Payload::Ciphertext(e)));
            self.output.entries.push(view);
        }
        let rate = BigRational::new((*self.fee_rate.numer()).into(), (*self.fee_rate.denom()).into());
        self.output.fee = fee * rate;
        Ok(out)
    }

    fn return_decryptions(&mut self) -> Result<Vec<Outbound>> {
        let aggregates = take_grid(&mut self.aggregates).remove(0);
        let mut out = Vec::with_capacity(aggregates.len());
        for (j, c) in aggregates.iter().enumerate() {
            let d = self.decryptor.decrypt(c)?;
            out.push(self.send(Stage::Decrypted, j as u32 + 1, Payload::Decrypted(d.clone())));
            self.output.decrypted.push(d);
        }
        Ok(out)
    }

    fn open_keys(&mut self) -> Result<()> {
        let keys = take_grid(&mut self.keys).remove(0);
        let opened = keys.iter().map(|c| self.decryptor.decrypt(c)).collect::<std::result::Result<_, _>>()?;
        self.output.access_keys = Some(opened);
        Ok(())
    }
}

impl Party for FacilityUser {
    fn id(&self) -> PartyId {
        self.me()
    }

    fn stage(&self) -> u8 {
        match self.phase {
            UserPhase::Submit | UserPhase::AwaitStage1 => 1,
            UserPhase::AwaitAggregate => 2,
            UserPhase::AwaitKey | UserPhase::Done => 3,
        }
    }

    fn phase(&self) -> &'static str {
        match self.phase {
            UserPhase::Submit => "submit",
            UserPhase::AwaitStage1 => "await_stage1",
            UserPhase::AwaitAggregate => "await_aggregate",
            UserPhase::AwaitKey => "await_key",
            UserPhase::Done => "done",
        }
    }

    fn on_round(&mut self, inbox: Vec<StageMessage>) -> Result<Vec<Outbound>> {
        for msg in inbox {
            self.accept(msg)?;
        }
        match self.phase {
            UserPhase::Submit => {
                self.phase = UserPhase::AwaitStage1;
                self.submit()
            }
            UserPhase::AwaitStage1 if complete(&self.masked_counts) && complete(&self.masks) => {
                self.phase = UserPhase::AwaitAggregate;
                self.contribute()
            }
            UserPhase::AwaitAggregate if complete(&self.aggregates) => {
                self.phase = if self.paid { UserPhase::AwaitKey } else { UserPhase::Done };
                self.return_decryptions()
            }
            UserPhase::AwaitKey if complete(&self.keys) => {
                self.open_keys()?;
                self.phase = UserPhase::Done;
                Ok(Vec::new())
            }
            _ => Ok(Vec::new()),
        }
    }

    fn is_finished(&self) -> bool {
        self.phase == UserPhase::Done
    }

    fn output(&self) -> Option<PartyOutput> {
        self.is_finished().then(|| PartyOutput::FacilityUser(self.output.clone()))
    }
}
