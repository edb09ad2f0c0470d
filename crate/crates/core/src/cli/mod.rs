//! The `ppshare` command line: `keygen`, `run` and `eval`.
//!
//! Exit codes: 0 on success, 2 for bad input (flags, files, configuration),
//! 3 when a protocol run aborts. Every flag can also be set through an
//! environment variable named `PPSHARE_<FLAG>`.

pub mod files;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::eval::{self, EvalError, ExperimentConfig, Sweep};
use crate::paillier::{check_threshold, Scale};
use crate::protocol::{build_parties, parse_decimal, KeyMaterial, KeyMode, Protocol, SessionConfig};
use crate::transport::{run_to_completion, TransportError};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_ABORT: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed files, invalid configuration.
    #[error("{0}")]
    Input(String),
    /// The protocol itself stopped; the message names the stage.
    #[error("protocol aborted: {0}")]
    Abort(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Abort(_) => EXIT_ABORT,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Transport(t) => abort(t),
            EvalError::Csv(_) => CliError::Input(e.to_string()),
            other => CliError::Abort(other.to_string()),
        }
    }
}

fn abort(e: TransportError) -> CliError {
    CliError::Abort(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "ppshare", version, about = "Privacy-preserving facility sharing and cost splitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a common key pair or threshold key shares.
    Keygen(KeygenArgs),
    /// Run one protocol session from schedule files.
    Run(RunArgs),
    /// Run accuracy, timing and traffic experiments.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// Modulus size in bits.
    #[arg(long, env = "PPSHARE_BITS", default_value_t = 1024)]
    pub bits: u64,
    /// `common` or `threshold:<t>`.
    #[arg(long, env = "PPSHARE_KEY_MODE", default_value = "common", value_parser = parse_key_mode)]
    pub key_mode: KeyMode,
    /// Number of share holders in threshold mode.
    #[arg(long, env = "PPSHARE_USERS")]
    pub users: Option<u32>,
    /// Seeds key generation; without it keys come from the OS generator.
    #[arg(long, env = "PPSHARE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "PPSHARE_OUT_DIR", default_value = "keys")]
    pub out_dir: PathBuf,
}

/// Session parameters shared by `run` and `eval`.
#[derive(Debug, Args, Default)]
pub struct SessionArgs {
    #[arg(long, env = "PPSHARE_PROTOCOL")]
    pub protocol: Option<Protocol>,
    /// `N`.
    #[arg(long, env = "PPSHARE_USERS")]
    pub users: Option<u32>,
    /// `m`.
    #[arg(long, env = "PPSHARE_SLOTS")]
    pub slots: Option<u32>,
    /// Scaling factor `S`.
    #[arg(long, env = "PPSHARE_SCALE")]
    pub scale: Option<u64>,
    /// Service threshold `C` for CSS, as a decimal.
    #[arg(long = "threshold-C", env = "PPSHARE_THRESHOLD_C", value_parser = parse_rational)]
    pub threshold_c: Option<Rational64>,
    /// Strictly increasing capacity ladder for CFS, e.g. `10,20`.
    #[arg(long, env = "PPSHARE_CAPACITIES", value_delimiter = ',')]
    pub capacities: Option<Vec<u32>>,
    /// `common` or `threshold:<t>`.
    #[arg(long, env = "PPSHARE_KEY_MODE", value_parser = parse_key_mode)]
    pub key_mode: Option<KeyMode>,
    #[arg(long, env = "PPSHARE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub session: SessionArgs,
    /// Schedule CSV: one row per user, one column per slot.
    #[arg(long, env = "PPSHARE_INPUTS")]
    pub inputs: PathBuf,
    /// TOML file with session settings; flags override it.
    #[arg(long, env = "PPSHARE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory written by `keygen`. Without it keys are derived from the seed.
    #[arg(long, env = "PPSHARE_KEYS")]
    pub keys: Option<PathBuf>,
    /// Modulus size when keys are derived from the seed.
    #[arg(long, env = "PPSHARE_BITS")]
    pub bits: Option<u64>,
    #[arg(long, env = "PPSHARE_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub session: SessionArgs,
    /// `S=1,10,100`, `N=4..20` or `N=4..20:4`. Without it one point runs.
    #[arg(long, env = "PPSHARE_SWEEP", value_parser = parse_sweep)]
    pub sweep: Option<Sweep>,
    #[arg(long, env = "PPSHARE_REPETITIONS", default_value_t = 20)]
    pub repetitions: u32,
    #[arg(long, env = "PPSHARE_BITS", default_value_t = 128)]
    pub bits: u64,
    /// Run grid points one at a time so stage timings are undisturbed.
    #[arg(long, env = "PPSHARE_BENCH")]
    pub bench: bool,
    #[arg(long, env = "PPSHARE_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
}

pub fn parse_key_mode(s: &str) -> Result<KeyMode, String> {
    match s.split_once(':') {
        None if s == "common" => Ok(KeyMode::Common),
        Some(("threshold", t)) => t
            .parse()
            .map(|threshold| KeyMode::Threshold { threshold })
            .map_err(|_| format!("bad threshold {t:?}")),
        _ => Err(format!("key mode {s:?} is neither `common` nor `threshold:<t>`")),
    }
}

fn parse_rational(s: &str) -> Result<Rational64, String> {
    parse_decimal(s).ok_or_else(|| format!("{s:?} is not a decimal"))
}

pub fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let (axis, values) = s.split_once('=').ok_or_else(|| format!("sweep {s:?} lacks `=`"))?;
    let values: Vec<u64> = if let Some((lo, rest)) = values.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let num = |v: &str| v.trim().parse::<u64>().map_err(|_| format!("bad number {v:?}"));
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if step == 0 || lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        (lo..=hi).step_by(step as usize).collect()
    } else {
        values
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| format!("bad number {v:?}")))
            .collect::<Result<_, _>>()?
    };
    match axis.trim() {
        "S" => Ok(Sweep::Scale(values)),
        "N" => values
            .into_iter()
            .map(|v| u32::try_from(v).map_err(|_| format!("{v} users")))
            .collect::<Result<_, _>>()
            .map(Sweep::Users),
        other => Err(format!("unknown sweep axis {other:?} (expected S or N)")),
    }
}

/// Uses `seed` or draws one from the OS and reports it on stderr.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = OsRng.next_u64();
        eprintln!("seed: {s}");
        s
    })
}

fn scale(s: u64) -> Result<Scale, CliError> {
    Scale::new(s).map_err(|e| CliError::Input(e.to_string()))
}

pub fn cmd_keygen(args: &KeygenArgs) -> Result<Vec<PathBuf>, CliError> {
    let users = match (args.key_mode, args.users) {
        (KeyMode::Common, u) => u.unwrap_or(1),
        (KeyMode::Threshold { threshold }, Some(n)) => {
            check_threshold(n, threshold).map_err(|e| CliError::Input(e.to_string()))?;
            n
        }
        (KeyMode::Threshold { .. }, None) => return Err(CliError::Input("threshold mode needs --users".into())),
    };
    let keys = match args.seed {
        Some(seed) => KeyMaterial::generate(args.key_mode, args.bits, users, &mut ChaCha20Rng::seed_from_u64(seed)),
        None => KeyMaterial::generate(args.key_mode, args.bits, users, &mut OsRng),
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    files::write_keys(&args.out_dir, &keys)
}

/// Seed stream reserved for keys derived inside `run`.
const RUN_KEY_STREAM: u64 = 1 << 42;

pub fn cmd_run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let file = match &args.config {
        Some(p) => files::read_run_file(p)?,
        None => files::RunFile::default(),
    };
    let a = &args.session;
    let protocol = a
        .protocol
        .or(file.protocol)
        .ok_or_else(|| CliError::Input("no protocol given (--protocol or config)".into()))?;
    let inputs = files::read_inputs(&args.inputs, protocol)?;
    let (rows, cols) = files::dimensions(&inputs)
        .ok_or_else(|| CliError::Input(format!("{}: rows differ in length", args.inputs.display())))?;
    let users = a.users.or(file.users).unwrap_or(rows);
    let slots = a.slots.or(file.slots).unwrap_or(cols);
    if (users, slots) != (rows, cols) {
        return Err(CliError::Input(format!(
            "{} holds {rows} users x {cols} slots, configured {users} x {slots}",
            args.inputs.display()
        )));
    }
    let seed = resolve_seed(a.seed.or(file.seed));
    let mut config = SessionConfig::new(protocol, users, slots, scale(a.scale.or(file.scale).unwrap_or(100))?, seed);
    let decimal = |d: &files::Decimal, what: &str| {
        d.to_rational().ok_or_else(|| CliError::Input(format!("{what} is not a decimal")))
    };
    if let Some(c) = a.threshold_c {
        config.service_threshold = c;
    } else if let Some(c) = &file.threshold_c {
        config.service_threshold = decimal(c, "threshold_c")?;
    }
    if let Some(r) = &file.fee_rate {
        config.fee_rate = decimal(r, "fee_rate")?;
    }
    config.capacities = a.capacities.clone().or(file.capacities.clone());
    if let Some(unpaid) = &file.unpaid {
        config.paid = (1..=users).map(|i| !unpaid.contains(&i)).collect();
    }
    let keys = match &args.keys {
        Some(dir) => files::read_keys(dir, users)?,
        None => {
            let mode = match (a.key_mode, &file.key_mode) {
                (Some(m), _) => m,
                (None, Some(s)) => parse_key_mode(s).map_err(CliError::Input)?,
                (None, None) => KeyMode::Common,
            };
            let bits = args.bits.or(file.key_bits).unwrap_or(1024);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(RUN_KEY_STREAM);
            KeyMaterial::generate(mode, bits, users, &mut rng).map_err(|e| CliError::Input(e.to_string()))?
        }
    };
    let parties = build_parties(&config, &keys, &inputs).map_err(|e| CliError::Input(e.to_string()))?;
    let outcome = run_to_completion(parties).map_err(abort)?;
    files::write_outcome(&args.out_dir, &outcome, &inputs)
}

/// Returns the report path and the text summary.
pub fn cmd_eval(args: &EvalArgs) -> Result<(PathBuf, String), CliError> {
    let a = &args.session;
    let defaults = ExperimentConfig::default();
    let base = ExperimentConfig {
        protocol: a.protocol.unwrap_or(defaults.protocol),
        users: a.users.unwrap_or(defaults.users),
        slots: a.slots.unwrap_or(defaults.slots),
        scale: a.scale.map(scale).transpose()?.unwrap_or(defaults.scale),
        service_threshold: a.threshold_c.unwrap_or(defaults.service_threshold),
        capacities: a.capacities.clone(),
        seed: resolve_seed(a.seed),
        repetitions: args.repetitions,
        key_bits: args.bits,
        key_mode: a.key_mode.unwrap_or(KeyMode::Common),
        ..defaults
    };
    let sweep = args.sweep.clone().unwrap_or_else(|| Sweep::Scale(vec![base.scale.get()]));
    let reports = if args.bench {
        eval::bench_timing(&base, &sweep)?
    } else {
        eval::run_mre_sweep(&base, &sweep)?
    };
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.out_dir.display())))?;
    let path = args.out_dir.join("report.csv");
    let file = std::fs::File::create(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    eval::write_reports_csv(&reports, file)?;
    Ok((path, eval::summary(&reports)))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let list = |out: &mut dyn Write, paths: Vec<PathBuf>| {
        for p in paths {
            let _ = writeln!(out, "{}", p.display());
        }
    };
    match &cli.command {
        Command::Keygen(a) => list(&mut out, cmd_keygen(a)?),
        Command::Run(a) => list(&mut out, cmd_run(a)?),
        Command::Eval(a) => {
            let (path, summary) = cmd_eval(a)?;
            let _ = write!(out, "{summary}");
            list(&mut out, vec![path]);
        }
    }
    Ok(())
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
