//! File formats read and written by the command-line tool.
//!
//! Keys are JSON objects in the canonical hex form of [`crate::paillier`].
//! Schedules are header-less CSV, one row per user and one column per slot.
//! Every output is a CSV file with a header row.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_rational::{BigRational, Rational64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::paillier::{KeyShare, PrivateKey, PublicKey};
use crate::protocol::facility::{self, SlotView};
use crate::protocol::{css, parse_decimal, DemandSchedule, Inputs, KeyMaterial, Protocol, UsageSchedule};
use crate::transport::RunOutcome;

pub const PUBLIC_KEY_FILE: &str = "public.json";
pub const PRIVATE_KEY_FILE: &str = "private.json";

pub fn share_file(index: u32) -> String {
    format!("share_{index}.json")
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn io_context(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| input(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| input(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_context(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_context(path))?;
    serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// Files written by `keygen`, in write order.
pub fn write_keys(dir: &Path, keys: &KeyMaterial) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_context(dir))?;
    let mut written = vec![dir.join(PUBLIC_KEY_FILE)];
    write_json(&written[0], keys.public())?;
    match keys {
        KeyMaterial::Common { private, .. } => {
            let path = dir.join(PRIVATE_KEY_FILE);
            write_json(&path, private)?;
            written.push(path);
        }
        KeyMaterial::Threshold { shares, .. } => {
            for s in shares {
                let path = dir.join(share_file(s.index()));
                write_json(&path, s)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Loads a key directory written by `keygen`. A private key takes
/// precedence over shares.
pub fn read_keys(dir: &Path, users: u32) -> Result<KeyMaterial, CliError> {
    let public: PublicKey = read_json(&dir.join(PUBLIC_KEY_FILE))?;
    let private_path = dir.join(PRIVATE_KEY_FILE);
    if private_path.exists() {
        let private: PrivateKey = read_json(&private_path)?;
        if private.public() != &public {
            return Err(input(format!("{} does not match {PUBLIC_KEY_FILE}", private_path.display())));
        }
        return Ok(KeyMaterial::Common { public, private });
    }
    let shares = (1..=users)
        .map(|i| read_json::<KeyShare>(&dir.join(share_file(i))))
        .collect::<Result<Vec<_>, _>>()?;
    let threshold = shares.first().map(KeyShare::threshold).unwrap_or(0);
    if shares.iter().any(|s| s.threshold() != threshold || s.parties() != users) {
        return Err(input(format!("shares in {} are not a ({users}, t) set", dir.display())));
    }
    Ok(KeyMaterial::Threshold { public, shares, threshold })
}

/// Reads a schedule CSV. Rows are users `1..`; cells are `0`/`1` for the
/// facility protocols and decimals for CSS.
pub fn read_inputs(path: &Path, protocol: Protocol) -> Result<Inputs, CliError> {
    let text = fs::read_to_string(path).map_err(io_context(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| input(format!("{}: {e}", path.display())))?;
        rows.push((i as u32 + 1, record.iter().map(str::to_owned).collect::<Vec<_>>()));
    }
    if rows.is_empty() {
        return Err(input(format!("{}: no schedules", path.display())));
    }
    let bad = |user: u32, detail: String| input(format!("{} row {user}: {detail}", path.display()));
    Ok(match protocol {
        Protocol::Css => Inputs::Demand(
            rows.into_iter()
                .map(|(user, cells)| {
                    let demands = cells
                        .iter()
                        .map(|c| parse_decimal(c).ok_or_else(|| bad(user, format!("{c:?} is not a decimal"))))
                        .collect::<Result<Vec<Rational64>, _>>()?;
                    DemandSchedule::new(user, demands).map_err(|e| bad(user, e.to_string()))
                })
                .collect::<Result<_, _>>()?,
        ),
        Protocol::Ufs | Protocol::Cfs => Inputs::Usage(
            rows.into_iter()
                .map(|(user, cells)| {
                    let bits = cells
                        .iter()
                        .map(|c| match c.as_str() {
                            "0" => Ok(false),
                            "1" => Ok(true),
                            other => Err(bad(user, format!("{other:?} is not 0 or 1"))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    UsageSchedule::new(user, bits).map_err(|e| bad(user, e.to_string()))
                })
                .collect::<Result<_, _>>()?,
        ),
    })
}

/// Number of users and slots in `inputs`; `None` for ragged rows.
pub fn dimensions(inputs: &Inputs) -> Option<(u32, u32)> {
    let slots: Vec<u32> = match inputs {
        Inputs::Usage(s) => s.iter().map(UsageSchedule::slots).collect(),
        Inputs::Demand(s) => s.iter().map(DemandSchedule::slots).collect(),
    };
    let first = *slots.first()?;
    slots.iter().all(|&m| m == first).then_some((slots.len() as u32, first))
}

fn approx(v: &BigRational) -> String {
    format!("{:.6}", crate::eval::to_f64(v))
}

fn write_csv<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_context(path))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(io_context(path))
}

#[derive(Serialize)]
struct FacilitySlotRow {
    slot: u32,
    coarse: u32,
}

#[derive(Serialize)]
struct AccessKeyRow {
    slot: u32,
    key: String,
}

#[derive(Serialize)]
struct FacilityUserRow {
    slot: u32,
    requested: u8,
    /// `N^j` when learned, `?` when masked.
    count: String,
    access_key: String,
}

#[derive(Serialize)]
struct ActionRow {
    action: usize,
    slot: u32,
}

#[derive(Serialize)]
struct CssUserRow {
    action: usize,
    slot: u32,
    own_scaled: String,
    total_scaled: String,
    fraction: String,
    fraction_approx: String,
}

#[derive(Serialize)]
struct FeeRow {
    user: u32,
    fee: String,
    fee_approx: String,
}

fn hex(v: &BigUint) -> String {
    format!("{v:x}")
}

fn facility_user_rows(u: &facility::UserOutput, schedule: &UsageSchedule) -> Vec<FacilityUserRow> {
    u.entries
        .iter()
        .enumerate()
        .map(|(j, e)| FacilityUserRow {
            slot: j as u32 + 1,
            requested: u8::from(schedule.requests(j as u32 + 1)),
            count: match e {
                SlotView::KnownCount(n) => n.to_string(),
                SlotView::Masked(_) => "?".into(),
            },
            access_key: match &u.access_keys {
                Some(keys) if schedule.requests(j as u32 + 1) => hex(&keys[j]),
                _ => String::new(),
            },
        })
        .collect()
}

fn css_user_rows(u: &css::UserOutput) -> Vec<CssUserRow> {
    (0..u.actions.len())
        .map(|k| CssUserRow {
            action: k + 1,
            slot: u.actions[k],
            own_scaled: u.own[k].to_string(),
            total_scaled: u.totals[k].as_ref().map(ToString::to_string).unwrap_or_default(),
            fraction: u.fractions[k].to_string(),
            fraction_approx: approx(&u.fractions[k]),
        })
        .collect()
}

/// Writes every result file of a run into `dir` and returns their paths.
///
/// `operator.csv` holds `c` / `c̃` per slot or the action slots `s`;
/// `user_<i>.csv` holds what user `i` learned; `fees.csv` the fee shares;
/// `access_keys.csv` the operator's `κ^j` (facility protocols only);
/// `traffic.csv` the ledger.
pub fn write_outcome(dir: &Path, run: &RunOutcome, inputs: &Inputs) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_context(dir))?;
    let mut written = Vec::new();
    let mut out = |name: String| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    let missing = || CliError::Abort("run finished without outputs".into());
    let mut fees = Vec::new();
    match inputs {
        Inputs::Usage(schedules) => {
            let op = run.facility_operator().ok_or_else(missing)?;
            write_csv(
                &out("operator.csv".into()),
                op.coarse.iter().enumerate().map(|(j, &c)| FacilitySlotRow { slot: j as u32 + 1, coarse: c }),
            )?;
            write_csv(
                &out("access_keys.csv".into()),
                op.access_keys.iter().enumerate().map(|(j, k)| AccessKeyRow { slot: j as u32 + 1, key: hex(k) }),
            )?;
            for (u, s) in run.facility_users().into_iter().zip(schedules) {
                write_csv(&out(format!("user_{}.csv", u.user)), facility_user_rows(u, s))?;
                fees.push(FeeRow { user: u.user, fee: u.fee.to_string(), fee_approx: approx(&u.fee) });
            }
        }
        Inputs::Demand(_) => {
            let op = run.css_operator().ok_or_else(missing)?;
            write_csv(
                &out("operator.csv".into()),
                op.schedule.actions.iter().enumerate().map(|(k, &slot)| ActionRow { action: k + 1, slot }),
            )?;
            for u in run.css_users() {
                write_csv(&out(format!("user_{}.csv", u.user)), css_user_rows(u))?;
                fees.push(FeeRow { user: u.user, fee: u.fee.to_string(), fee_approx: approx(&u.fee) });
            }
        }
    }
    write_csv(&out("fees.csv".into()), fees)?;
    let path = out("traffic.csv".into());
    let file = fs::File::create(&path).map_err(io_context(&path))?;
    let mut file = std::io::BufWriter::new(file);
    run.ledger.write_csv(&mut file).map_err(|e| input(format!("{}: {e}", path.display())))?;
    file.flush().map_err(io_context(&path))?;
    Ok(written)
}

/// Optional session settings in a TOML file. Command-line flags win.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub protocol: Option<Protocol>,
    pub users: Option<u32>,
    pub slots: Option<u32>,
    pub scale: Option<u64>,
    pub threshold_c: Option<Decimal>,
    pub capacities: Option<Vec<u32>>,
    /// `common` or `threshold:<t>`.
    pub key_mode: Option<String>,
    pub key_bits: Option<u64>,
    pub seed: Option<u64>,
    pub fee_rate: Option<Decimal>,
    /// Users who have not paid; they receive no access keys.
    pub unpaid: Option<Vec<u32>>,
}

/// A TOML number or a decimal string.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Decimal {
    Integer(i64),
    Float(f64),
    Text(String),
}

impl Decimal {
    pub fn to_rational(&self) -> Option<Rational64> {
        match self {
            Decimal::Integer(i) => Some(Rational64::from(*i)),
            Decimal::Float(f) => parse_decimal(&f.to_string()),
            Decimal::Text(s) => parse_decimal(s),
        }
    }
}

pub fn read_run_file(path: &Path) -> Result<RunFile, CliError> {
    let text = fs::read_to_string(path).map_err(io_context(path))?;
    toml::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}
