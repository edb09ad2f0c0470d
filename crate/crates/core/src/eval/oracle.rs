//! Plaintext ground truth, evaluated directly on harness-held inputs.

use num_rational::{BigRational, Rational64};
use num_traits::Zero;

use crate::protocol::{DemandSchedule, EstimationFunction, ProtocolError, UsageSchedule};

fn to_big(r: Rational64) -> BigRational {
    BigRational::new((*r.numer()).into(), (*r.denom()).into())
}

/// `N^j = Σ_i b_i^j`.
pub fn counts(usage: &[UsageSchedule]) -> Vec<u32> {
    let slots = usage.first().map_or(0, |u| u.slots());
    (1..=slots).map(|j| usage.iter().filter(|u| u.requests(j)).count() as u32).collect()
}

/// `c^j = ∨_i b_i^j`.
pub fn occupancy(usage: &[UsageSchedule]) -> Vec<u32> {
    counts(usage).into_iter().map(|n| u32::from(n > 0)).collect()
}

/// `c̃^j = f(N^j)`.
pub fn tiers(usage: &[UsageSchedule], f: &EstimationFunction) -> Result<Vec<u32>, ProtocolError> {
    counts(usage)
        .into_iter()
        .enumerate()
        .map(|(j, n)| {
            f.estimate(n).ok_or(ProtocolError::CapacityExhausted {
                slot: j as u32 + 1,
                count: n,
                capacity: f.max_capacity(),
            })
        })
        .collect()
}

/// Total demand `Σ_i p_i^t` per slot.
pub fn slot_totals(demands: &[DemandSchedule]) -> Vec<BigRational> {
    let slots = demands.first().map_or(0, |d| d.slots()) as usize;
    (0..slots)
        .map(|t| demands.iter().map(|d| to_big(d.demands()[t])).sum())
        .collect()
}

/// Action slots: each `s^k` is the first slot after `s^{k−1}` whose
/// accumulated demand reaches `C`.
pub fn service_schedule(demands: &[DemandSchedule], threshold: Rational64) -> Vec<u32> {
    let c = to_big(threshold);
    let mut acc = BigRational::zero();
    let mut actions = Vec::new();
    for (t, total) in slot_totals(demands).into_iter().enumerate() {
        acc += total;
        if acc >= c {
            actions.push(t as u32 + 1);
            acc = BigRational::zero();
        }
    }
    actions
}

/// Exact `Σ_i P_i^k` over the windows ending at `actions`.
pub fn window_totals(demands: &[DemandSchedule], actions: &[u32]) -> Vec<BigRational> {
    let totals = slot_totals(demands);
    let mut start = 0usize;
    actions
        .iter()
        .map(|&end| {
            let sum = totals[start..end as usize].iter().sum();
            start = end as usize;
            sum
        })
        .collect()
}

/// `q_i^k`, indexed by action then user.
pub fn fractions(demands: &[DemandSchedule], actions: &[u32]) -> Vec<Vec<BigRational>> {
    let mut start = 0usize;
    actions
        .iter()
        .map(|&end| {
            let own: Vec<BigRational> = demands
                .iter()
                .map(|d| d.demands()[start..end as usize].iter().map(|&p| to_big(p)).sum())
                .collect();
            start = end as usize;
            let total: BigRational = own.iter().sum();
            own.into_iter()
                .map(|p| if total.is_zero() { BigRational::zero() } else { p / &total })
                .collect()
        })
        .collect()
}

/// Ground truth for one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Truth {
    Facility { counts: Vec<u32>, coarse: Vec<u32> },
    Service { actions: Vec<u32>, totals: Vec<BigRational>, fractions: Vec<Vec<BigRational>> },
}
