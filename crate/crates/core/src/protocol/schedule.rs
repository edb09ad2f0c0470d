use num_rational::Rational64;
use num_traits::{Signed, Zero};

use super::{ProtocolError, Result};

/// Binary usage requests `b_i = [b_i^1, ..., b_i^m]` of one user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageSchedule {
    user: u32,
    bits: Vec<bool>,
}

impl UsageSchedule {
    /// Every user must request at least one slot.
    pub fn new(user: u32, bits: Vec<bool>) -> Result<Self> {
        if user == 0 {
            return Err(ProtocolError::InvalidSchedule("user ids start at 1".into()));
        }
        if !bits.iter().any(|&b| b) {
            return Err(ProtocolError::InvalidSchedule(format!("user {user} requests no slot")));
        }
        Ok(UsageSchedule { user, bits })
    }

    pub fn user(&self) -> u32 {
        self.user
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn slots(&self) -> u32 {
        self.bits.len() as u32
    }

    /// `b_i^j` for a 1-based slot.
    pub fn requests(&self, slot: u32) -> bool {
        self.bits[(slot - 1) as usize]
    }
}

/// Non-negative demands `p_i = [p_i^1, ..., p_i^m]` of one user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandSchedule {
    user: u32,
    demands: Vec<Rational64>,
}

impl DemandSchedule {
    pub fn new(user: u32, demands: Vec<Rational64>) -> Result<Self> {
        if user == 0 {
            return Err(ProtocolError::InvalidSchedule("user ids start at 1".into()));
        }
        if demands.iter().any(|p| p.is_negative()) {
            return Err(ProtocolError::InvalidSchedule(format!("user {user} has a negative demand")));
        }
        if demands.iter().all(|p| p.is_zero()) {
            return Err(ProtocolError::InvalidSchedule(format!("user {user} has no demand")));
        }
        Ok(DemandSchedule { user, demands })
    }

    pub fn user(&self) -> u32 {
        self.user
    }

    pub fn demands(&self) -> &[Rational64] {
        &self.demands
    }

    pub fn slots(&self) -> u32 {
        self.demands.len() as u32
    }
}

/// Capacity ladder `C_1 < ... < C_r` with the implicit `C_0 = 0`.
///
/// `f(x) = r` for `C_{r-1} < x ≤ C_r`. An empty slot maps to 0, meaning no
/// facility is needed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EstimationFunction {
    capacities: Vec<u32>,
}

impl EstimationFunction {
    pub fn new(capacities: Vec<u32>) -> Result<Self> {
        if capacities.is_empty() {
            return Err(ProtocolError::InvalidConfig("capacity list is empty".into()));
        }
        if capacities[0] == 0 || capacities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProtocolError::InvalidConfig(format!(
                "capacities {capacities:?} must be positive and strictly increasing"
            )));
        }
        Ok(EstimationFunction { capacities })
    }

    /// The degenerate ladder `(N)`, which turns CFS into UFS.
    pub fn uncapacitated(users: u32) -> Self {
        EstimationFunction { capacities: vec![users] }
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    /// Number of tiers `r`.
    pub fn tiers(&self) -> u32 {
        self.capacities.len() as u32
    }

    pub fn max_capacity(&self) -> u32 {
        *self.capacities.last().expect("non-empty")
    }

    /// `f(x)`, or `None` once `x` exceeds the largest capacity.
    pub fn estimate(&self, x: u32) -> Option<u32> {
        if x == 0 {
            return Some(0);
        }
        self.capacities.iter().position(|&c| x <= c).map(|r| r as u32 + 1)
    }
}

/// Slots `s^1 < s^2 < ...` at which a service action fires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceActionSchedule {
    pub actions: Vec<u32>,
    pub threshold: Rational64,
}

impl ServiceActionSchedule {
    /// Window `(s^{k-1}, s^k]` of the 1-based action `k`.
    pub fn window(&self, k: usize) -> (u32, u32) {
        let start = if k <= 1 { 0 } else { self.actions[k - 2] };
        (start, self.actions[k - 1])
    }

    pub fn windows(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (1..=self.actions.len()).map(move |k| self.window(k))
    }
}

/// Parses a plain decimal such as `14.3`, `-2.5` or `100` exactly.
pub fn parse_decimal(s: &str) -> Option<Rational64> {
    let s = s.trim();
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 12 {
        return None;
    }
    let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let denom = 10i64.checked_pow(frac.len() as u32)?;
    let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let value = Rational64::new(whole.checked_mul(denom)?.checked_add(frac)?, denom);
    Some(if negative { -value } else { value })
}
