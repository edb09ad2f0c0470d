//! Accuracy, timing and traffic experiments.
//!
//! Every grid point runs `repetitions` independent sessions. Inputs are drawn
//! from an RNG stream that depends only on the seed and repetition, so
//! sweeping `S` or the key mode replays the same instances. Protocol outputs
//! always come from the live run; [`oracle`] sees only the harness copy of
//! the inputs.

pub mod oracle;
mod report;

use std::collections::BTreeMap;
use std::time::Duration;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::paillier::Scale;
use crate::protocol::{
    DemandSchedule, Inputs, KeyMaterial, KeyMode, Protocol, ProtocolError,
    SessionConfig, Stage, UsageSchedule,
};
use crate::transport::{simulate, RunOutcome, TransportError};

pub use oracle::Truth;
pub use report::{summary, write_reports_csv, ReportRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("no slot with a non-zero true aggregate")]
    NothingToMeasure,
    #[error("{recovered} recovered values for {truth} true values")]
    LengthMismatch { recovered: usize, truth: usize },
    #[error("run produced no {0} output")]
    MissingOutput(&'static str),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Per-user per-slot traffic of stages 1–2 as estimated from 1024-bit
/// ciphertexts and plaintexts: six items for UFS/CFS, seven for CSS.
pub fn estimated_bytes_per_slot(protocol: Protocol) -> u64 {
    match protocol {
        Protocol::Ufs | Protocol::Cfs => (1024 * 4 + 1024 + 1024) / 8,
        Protocol::Css => (1024 * 6 + 1024) / 8,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub users: u32,
    pub slots: u32,
    pub scale: Scale,
    pub service_threshold: Rational64,
    pub capacities: Option<Vec<u32>>,
    /// Inclusive demand range, sampled on a grid of `demand_step`.
    pub demand_range: (Rational64, Rational64),
    pub demand_step: Rational64,
    /// Probability that a user requests a slot.
    pub usage_probability: f64,
    pub seed: u64,
    pub repetitions: u32,
    pub key_bits: u64,
    pub key_mode: KeyMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: Protocol::Ufs,
            users: 20,
            slots: 48,
            scale: Scale::new(100).expect("non-zero"),
            service_threshold: Rational64::from(100),
            capacities: None,
            demand_range: (Rational64::from(10), Rational64::from(20)),
            demand_step: Rational64::new(1, 10),
            usage_probability: 0.5,
            seed: 0,
            repetitions: 20,
            key_bits: 128,
            key_mode: KeyMode::Common,
        }
    }
}

const INSTANCE_STREAM: u64 = 1 << 40;
const KEY_STREAM: u64 = 1 << 41;

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ExperimentConfig {
    pub fn session(&self, repetition: u32) -> SessionConfig {
        let mut s = SessionConfig::new(
            self.protocol,
            self.users,
            self.slots,
            self.scale,
            self.seed.wrapping_add(u64::from(repetition)),
        );
        s.service_threshold = self.service_threshold;
        s.capacities = self.capacities.clone();
        s
    }

    /// Private inputs of one repetition. Independent of `S` and key mode.
    pub fn instance(&self, repetition: u32) -> Inputs {
        let mut rng = stream_rng(self.seed, INSTANCE_STREAM + u64::from(repetition));
        match self.protocol {
            Protocol::Css => Inputs::Demand(
                (1..=self.users).map(|i| random_demands(i, self.slots, self, &mut rng)).collect(),
            ),
            _ => Inputs::Usage(
                (1..=self.users)
                    .map(|i| random_usage(i, self.slots, self.usage_probability, &mut rng))
                    .collect(),
            ),
        }
    }

    /// Key material of one repetition.
    pub fn keys(&self, repetition: u32) -> Result<KeyMaterial> {
        let mut rng = stream_rng(self.seed, KEY_STREAM + u64::from(repetition));
        Ok(KeyMaterial::generate(self.key_mode, self.key_bits, self.users, &mut rng)?)
    }
}

/// Bernoulli usage bits; an all-zero draw gets one random slot set.
pub fn random_usage<R: Rng + ?Sized>(user: u32, slots: u32, p: f64, rng: &mut R) -> UsageSchedule {
    let mut bits: Vec<bool> = (0..slots).map(|_| rng.gen_bool(p)).collect();
    if !bits.iter().any(|&b| b) {
        let j = rng.gen_range(0..slots as usize);
        bits[j] = true;
    }
    UsageSchedule::new(user, bits).expect("at least one request")
}

/// Demands uniform on the `demand_step` grid of `demand_range`.
pub fn random_demands<R: Rng + ?Sized>(
    user: u32,
    slots: u32,
    config: &ExperimentConfig,
    rng: &mut R,
) -> DemandSchedule {
    let (lo, hi) = config.demand_range;
    let step = config.demand_step;
    let steps = ((hi - lo) / step).to_integer();
    let demands = (0..slots).map(|_| lo + step * rng.gen_range(0..=steps)).collect();
    DemandSchedule::new(user, demands).expect("positive demand range")
}

/// Ground truth of `inputs` under `config`.
pub fn brute_force(config: &SessionConfig, inputs: &Inputs) -> Result<Truth> {
    Ok(match inputs {
        Inputs::Usage(u) => {
            let counts = oracle::counts(u);
            let coarse = match config.protocol {
                Protocol::Cfs => oracle::tiers(u, &config.estimation_function()?)?,
                _ => oracle::occupancy(u),
            };
            Truth::Facility { counts, coarse }
        }
        Inputs::Demand(d) => {
            let actions = oracle::service_schedule(d, config.service_threshold);
            Truth::Service {
                totals: oracle::window_totals(d, &actions),
                fractions: oracle::fractions(d, &actions),
                actions,
            }
        }
    })
}

/// Mean of `|recovered − truth| / truth` over entries with non-zero truth.
pub fn compute_mre(recovered: &[BigRational], truth: &[BigRational]) -> Result<BigRational> {
    if recovered.len() != truth.len() {
        return Err(EvalError::LengthMismatch { recovered: recovered.len(), truth: truth.len() });
    }
    let terms: Vec<BigRational> = recovered
        .iter()
        .zip(truth)
        .filter(|(_, t)| !t.is_zero())
        .map(|(r, t)| ((r - t) / t).abs())
        .collect();
    if terms.is_empty() {
        return Err(EvalError::NothingToMeasure);
    }
    let n = BigInt::from(terms.len());
    Ok(terms.into_iter().sum::<BigRational>() / n)
}

fn int(v: u32) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `(mre, mre_raw)` of one facility run.
///
/// `mre` compares the operator's schedule `c^j` (or `c̃^j`) with the true
/// schedule; `mre_raw` uses the unrounded `u^j / S` instead.
pub fn facility_mre(run: &RunOutcome, truth: &Truth) -> Result<(BigRational, BigRational)> {
    let op = run.facility_operator().ok_or(EvalError::MissingOutput("facility operator"))?;
    let Truth::Facility { coarse, .. } = truth else { return Err(EvalError::MissingOutput("facility truth")) };
    let t: Vec<_> = coarse.iter().map(|&c| int(c)).collect();
    let recovered: Vec<_> = op.coarse.iter().map(|&c| int(c)).collect();
    let raw: Vec<_> = (1..=op.coarse.len() as u32).map(|j| op.raw_estimate(j)).collect();
    Ok((compute_mre(&recovered, &t)?, compute_mre(&raw, &t)?))
}

/// MRE of the recovered per-action demand totals of one CSS run.
///
/// Windows come from the live schedule; truth is the exact demand inside
/// each window. An empty schedule measures nothing.
pub fn css_mre(run: &RunOutcome, inputs: &Inputs) -> Result<BigRational> {
    let Inputs::Demand(d) = inputs else { return Err(EvalError::MissingOutput("demand inputs")) };
    let op = run.css_operator().ok_or(EvalError::MissingOutput("css operator"))?;
    let actions = &op.schedule.actions;
    let truth = oracle::window_totals(d, actions);
    let users = run.css_users();
    let recovered = (0..actions.len())
        .map(|k| {
            users
                .iter()
                .find_map(|u| u.totals[k].as_ref())
                .map(|t| BigRational::new(t.clone(), users[0].scale.as_bigint()))
                .unwrap_or_else(BigRational::zero)
        })
        .collect::<Vec<_>>();
    compute_mre(&recovered, &truth)
}

/// Result of one repetition.
#[derive(Clone, Debug)]
pub struct Sample {
    pub mre: BigRational,
    pub mre_raw: BigRational,
    pub run: RunOutcome,
}

/// Runs repetition `rep` of `config`.
pub fn run_once(config: &ExperimentConfig, rep: u32) -> Result<Sample> {
    let inputs = config.instance(rep);
    let keys = config.keys(rep)?;
    let session = config.session(rep);
    let run = simulate(&session, &keys, &inputs)?;
    let (mre, mre_raw) = match config.protocol {
        Protocol::Css => {
            let m = css_mre(&run, &inputs)?;
            (m.clone(), m)
        }
        _ => facility_mre(&run, &brute_force(&session, &inputs)?)?,
    };
    Ok(Sample { mre, mre_raw, run })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Mean over repetitions.
    pub mre: BigRational,
    pub mre_raw: BigRational,
    pub mre_per_rep: Vec<BigRational>,
    /// Mean operator time per stage.
    pub operator_stage: BTreeMap<u8, Duration>,
    /// Mean time of an average user per stage.
    pub user_stage: BTreeMap<u8, Duration>,
    /// Mean operator time in stages 1–2 divided by `m`.
    pub operator_per_slot: Duration,
    pub total_bytes: f64,
    pub total_messages: f64,
    /// Mean stage 1–2 bytes between the operator and one user, per slot.
    pub user_slot_bytes: f64,
    pub estimated_user_slot_bytes: u64,
}

fn is_stage3(stage: Stage) -> bool {
    stage == Stage::AccessKey
}

fn aggregate(config: &ExperimentConfig, samples: &[Sample]) -> ExperimentReport {
    let reps = samples.len().max(1) as u32;
    let mean = |v: BigRational| v / BigInt::from(reps);
    let mut operator_stage = BTreeMap::new();
    let mut user_stage = BTreeMap::new();
    let mut total_bytes = 0f64;
    let mut total_messages = 0f64;
    let mut user_slot_bytes = 0f64;
    for s in samples {
        let t = &s.run.timing;
        for stage in t.stages() {
            *operator_stage.entry(stage).or_insert(Duration::ZERO) += t.operator_stage(stage);
            *user_stage.entry(stage).or_insert(Duration::ZERO) += t.user_mean(stage);
        }
        let total = s.run.ledger.total();
        total_bytes += total.bytes as f64;
        total_messages += total.messages as f64;
        let stage12 = s.run.ledger.total_where(|k| !is_stage3(k.stage)).bytes as f64;
        user_slot_bytes += stage12 / f64::from(config.users) / f64::from(config.slots);
    }
    for d in operator_stage.values_mut().chain(user_stage.values_mut()) {
        *d /= reps;
    }
    let op12: Duration = operator_stage.iter().filter(|(s, _)| **s <= 2).map(|(_, d)| *d).sum();
    ExperimentReport {
        config: config.clone(),
        mre: mean(samples.iter().map(|s| s.mre.clone()).sum()),
        mre_raw: mean(samples.iter().map(|s| s.mre_raw.clone()).sum()),
        mre_per_rep: samples.iter().map(|s| s.mre.clone()).collect(),
        operator_stage,
        user_stage,
        operator_per_slot: op12 / config.slots.max(1),
        total_bytes: total_bytes / f64::from(reps),
        total_messages: total_messages / f64::from(reps),
        user_slot_bytes: user_slot_bytes / f64::from(reps),
        estimated_user_slot_bytes: estimated_bytes_per_slot(config.protocol),
    }
}

/// One grid point, repetitions in parallel. Timings are recorded but share
/// the machine with the other repetitions; see [`bench_timing`].
pub fn run_point(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let samples = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_once(config, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, &samples))
}

/// Axis of a sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sweep {
    Scale(Vec<u64>),
    Users(Vec<u32>),
}

impl Sweep {
    fn configs(&self, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        match self {
            Sweep::Scale(values) => values
                .iter()
                .map(|&s| {
                    Ok(ExperimentConfig {
                        scale: Scale::new(s).map_err(ProtocolError::from)?,
                        ..base.clone()
                    })
                })
                .collect(),
            Sweep::Users(values) => {
                Ok(values.iter().map(|&n| ExperimentConfig { users: n, ..base.clone() }).collect())
            }
        }
    }
}

/// One report per grid point, in grid order. Points run in parallel.
pub fn run_mre_sweep(base: &ExperimentConfig, sweep: &Sweep) -> Result<Vec<ExperimentReport>> {
    sweep.configs(base)?.par_iter().map(run_point).collect()
}

/// Like [`run_mre_sweep`] but strictly sequential, so per-stage timings are
/// not distorted by concurrent runs.
pub fn bench_timing(base: &ExperimentConfig, sweep: &Sweep) -> Result<Vec<ExperimentReport>> {
    sweep
        .configs(base)?
        .iter()
        .map(|c| {
            let samples = (0..c.repetitions).map(|rep| run_once(c, rep)).collect::<Result<Vec<_>>>()?;
            Ok(aggregate(c, &samples))
        })
        .collect()
}

/// Lossy view of an exact rational for reports.
pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn mre_arithmetic() {
        assert!(compute_mre(&[q(3, 1)], &[q(3, 1)]).unwrap().is_zero());
        assert_eq!(compute_mre(&[q(99, 100)], &[q(1, 1)]).unwrap(), q(1, 100));
        // zero-truth slots are skipped
        assert_eq!(compute_mre(&[q(1, 2), q(5, 1)], &[q(1, 1), q(0, 1)]).unwrap(), q(1, 2));
        assert!(matches!(compute_mre(&[q(1, 1)], &[q(0, 1)]), Err(EvalError::NothingToMeasure)));
        assert!(compute_mre(&[], &[q(1, 1)]).is_err());
    }

    #[test]
    fn instances_ignore_scale() {
        let a = ExperimentConfig { users: 4, slots: 6, ..Default::default() };
        let b = ExperimentConfig { scale: Scale::new(1).unwrap(), ..a.clone() };
        assert_eq!(a.instance(3), b.instance(3));
        assert_ne!(a.instance(3), a.instance(4));
    }

    #[test]
    fn demands_on_grid() {
        let c = ExperimentConfig { protocol: Protocol::Css, users: 3, slots: 50, ..Default::default() };
        let Inputs::Demand(d) = c.instance(0) else { panic!("css inputs") };
        for p in d.iter().flat_map(|d| d.demands()) {
            assert!(*p >= Rational64::from(10) && *p <= Rational64::from(20));
            assert_eq!((p * 10).denom(), &1);
        }
    }

    #[test]
    fn published_estimates() {
        assert_eq!(estimated_bytes_per_slot(Protocol::Ufs), 768);
        assert_eq!(estimated_bytes_per_slot(Protocol::Css), 896);
    }

    #[test]
    fn small_point_runs() {
        let c = ExperimentConfig { users: 4, slots: 4, repetitions: 2, ..Default::default() };
        let r = run_point(&c).unwrap();
        assert!(r.mre.is_zero());
        assert_eq!(r.mre_per_rep.len(), 2);
        assert!(r.total_bytes > 0.0);
    }
}
