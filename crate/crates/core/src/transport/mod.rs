//! Message delivery between parties.
//!
//! The in-process [`Network`] keeps one FIFO queue per ordered pair of
//! parties and stores messages in their serialized form, so every byte that
//! is ledgered is a byte that was actually delivered. [`run_to_completion`]
//! drives synchronous rounds: everything sent in round `r` is delivered at the
//! start of round `r + 1`. [`socket`] carries the same messages over TCP.

pub mod socket;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::protocol::{
    build_parties, css, facility, Inputs, KeyMaterial, Party, PartyId, PartyOutput, Protocol,
    ProtocolError, SessionConfig, Stage, StageMessage,
};

/// Upper bound on rounds before a run is declared stuck.
pub const MAX_ROUNDS: u32 = 100_000;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(PartyId),
    #[error("undecodable message from {from} to {to}: {detail}")]
    Decode { from: PartyId, to: PartyId, detail: String },
    #[error("{party} aborted: {source}")]
    Protocol {
        party: PartyId,
        #[source]
        source: ProtocolError,
    },
    #[error("stalled after round {round}; waiting: {}", describe(.waiting))]
    Stalled { round: u32, waiting: Vec<(PartyId, &'static str)> },
    #[error("{party} finished but received {count} more messages")]
    AfterFinish { party: PartyId, count: usize },
    #[error("no completion within {0} rounds")]
    RoundLimit(u32),
    #[error("socket transport: {0}")]
    Io(#[from] io::Error),
}

fn describe(waiting: &[(PartyId, &'static str)]) -> String {
    waiting.iter().map(|(p, phase)| format!("{p} in {phase}")).collect::<Vec<_>>().join(", ")
}

impl TransportError {
    /// The protocol error behind an abort, if any.
    pub fn protocol_error(&self) -> Option<&ProtocolError> {
        match self {
            TransportError::Protocol { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, TransportError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LedgerKey {
    pub sender: PartyId,
    pub receiver: PartyId,
    pub protocol: Protocol,
    pub stage: Stage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LedgerEntry {
    pub messages: u64,
    pub bytes: u64,
}

/// Message and byte counts per `(sender, receiver, protocol, stage)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrafficLedger {
    entries: BTreeMap<LedgerKey, LedgerEntry>,
}

impl TrafficLedger {
    pub fn record(&mut self, msg: &StageMessage, receiver: PartyId, bytes: usize) {
        let key = LedgerKey { sender: msg.sender, receiver, protocol: msg.protocol, stage: msg.stage };
        let entry = self.entries.entry(key).or_default();
        entry.messages += 1;
        entry.bytes += bytes as u64;
    }

    pub fn entries(&self) -> impl Iterator<Item = (&LedgerKey, &LedgerEntry)> {
        self.entries.iter()
    }

    /// Sum over the entries accepted by `filter`.
    pub fn total_where(&self, filter: impl Fn(&LedgerKey) -> bool) -> LedgerEntry {
        self.entries.iter().filter(|(k, _)| filter(k)).fold(LedgerEntry::default(), |acc, (_, e)| {
            LedgerEntry { messages: acc.messages + e.messages, bytes: acc.bytes + e.bytes }
        })
    }

    pub fn total(&self) -> LedgerEntry {
        self.total_where(|_| true)
    }

    /// Traffic in both directions between the operator and `user`.
    pub fn user_traffic(&self, user: u32) -> LedgerEntry {
        let id = PartyId::User(user);
        self.total_where(|k| k.sender == id || k.receiver == id)
    }

    /// CSV with columns `sender,receiver,protocol,stage,messages,bytes`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sender", "receiver", "protocol", "stage", "messages", "bytes"])?;
        for (k, e) in &self.entries {
            w.write_record([
                k.sender.to_string(),
                k.receiver.to_string(),
                k.protocol.to_string(),
                k.stage.to_string(),
                e.messages.to_string(),
                e.bytes.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// One delivered message, in delivery order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub round: u32,
    pub from: PartyId,
    pub to: PartyId,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub bytes: usize,
}

/// In-process network with FIFO delivery per sender-receiver pair.
#[derive(Debug, Default)]
pub struct Network {
    endpoints: BTreeSet<PartyId>,
    queues: BTreeMap<(PartyId, PartyId), VecDeque<String>>,
    ledger: TrafficLedger,
    trace: Vec<TraceEntry>,
    round: u32,
    sent: u64,
    received: u64,
}

impl Network {
    pub fn new(endpoints: impl IntoIterator<Item = PartyId>) -> Self {
        Network { endpoints: endpoints.into_iter().collect(), ..Default::default() }
    }

    pub fn register(&mut self, id: PartyId) {
        self.endpoints.insert(id);
    }

    /// Serializes, ledgers and enqueues `msg`.
    pub fn send(&mut self, from: PartyId, to: PartyId, msg: &StageMessage) -> Result<Receipt> {
        for id in [from, to] {
            if !self.endpoints.contains(&id) {
                return Err(TransportError::UnknownEndpoint(id));
            }
        }
        let text = msg.to_text();
        let bytes = text.len();
        self.ledger.record(msg, to, bytes);
        self.queues.entry((from, to)).or_default().push_back(text);
        self.sent += 1;
        Ok(Receipt { bytes })
    }

    /// Drains everything queued for `to`, ordered by sender and then FIFO.
    pub fn receive_all(&mut self, to: PartyId) -> Result<Vec<StageMessage>> {
        if !self.endpoints.contains(&to) {
            return Err(TransportError::UnknownEndpoint(to));
        }
        let mut out = Vec::new();
        for (&(from, dest), queue) in self.queues.iter_mut() {
            if dest != to {
                continue;
            }
            for text in queue.drain(..) {
                let msg = StageMessage::from_text(&text)
                    .map_err(|e| TransportError::Decode { from, to, detail: e.to_string() })?;
                self.trace.push(TraceEntry { round: self.round, from, to, text });
                self.received += 1;
                out.push(msg);
            }
        }
        Ok(out)
    }

    pub fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn ledger(&self) -> &TrafficLedger {
        &self.ledger
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// `(sent, received)` message counts.
    pub fn counts(&self) -> (u64, u64) {
        (self.sent, self.received)
    }

    fn into_parts(self) -> (TrafficLedger, Vec<TraceEntry>) {
        (self.ledger, self.trace)
    }
}

/// Per-stage processing time, split by role.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimingReport {
    pub operator: BTreeMap<u8, Duration>,
    /// Summed over users; see [`TimingReport::user_mean`].
    pub users: BTreeMap<u8, Duration>,
    pub user_count: u32,
}

impl TimingReport {
    fn add(&mut self, party: PartyId, stage: u8, elapsed: Duration) {
        let map = match party {
            PartyId::Operator => &mut self.operator,
            PartyId::User(_) => &mut self.users,
        };
        *map.entry(stage).or_default() += elapsed;
    }

    pub fn operator_stage(&self, stage: u8) -> Duration {
        self.operator.get(&stage).copied().unwrap_or_default()
    }

    /// Time of an average user in `stage`.
    pub fn user_mean(&self, stage: u8) -> Duration {
        let total = self.users.get(&stage).copied().unwrap_or_default();
        total.checked_div(self.user_count.max(1)).unwrap_or_default()
    }

    pub fn operator_total(&self) -> Duration {
        self.operator.values().sum()
    }

    pub fn user_mean_total(&self) -> Duration {
        self.users.values().sum::<Duration>().checked_div(self.user_count.max(1)).unwrap_or_default()
    }

    pub fn stages(&self) -> BTreeSet<u8> {
        self.operator.keys().chain(self.users.keys()).copied().collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Operator first, then users in id order.
    pub outputs: Vec<(PartyId, PartyOutput)>,
    pub ledger: TrafficLedger,
    pub trace: Vec<TraceEntry>,
    pub timing: TimingReport,
    pub rounds: u32,
}

impl RunOutcome {
    pub fn facility_operator(&self) -> Option<&facility::OperatorOutput> {
        self.outputs.iter().find_map(|(_, o)| match o {
            PartyOutput::FacilityOperator(o) => Some(o),
            _ => None,
        })
    }

    pub fn facility_users(&self) -> Vec<&facility::UserOutput> {
        self.outputs
            .iter()
            .filter_map(|(_, o)| match o {
                PartyOutput::FacilityUser(u) => Some(u),
                _ => None,
            })
            .collect()
    }

    pub fn css_operator(&self) -> Option<&css::OperatorOutput> {
        self.outputs.iter().find_map(|(_, o)| match o {
            PartyOutput::CssOperator(o) => Some(o),
            _ => None,
        })
    }

    pub fn css_users(&self) -> Vec<&css::UserOutput> {
        self.outputs
            .iter()
            .filter_map(|(_, o)| match o {
                PartyOutput::CssUser(u) => Some(u),
                _ => None,
            })
            .collect()
    }

    /// The trace as one canonical text blob.
    pub fn trace_text(&self) -> String {
        let mut s = String::new();
        for e in &self.trace {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", e.round, e.from, e.to, e.text));
        }
        s
    }
}

/// Drives synchronous rounds until every party has finished.
pub fn run_to_completion(mut parties: Vec<Box<dyn Party>>) -> Result<RunOutcome> {
    let mut net = Network::new(parties.iter().map(|p| p.id()));
    let mut timing = TimingReport {
        user_count: parties.iter().filter(|p| matches!(p.id(), PartyId::User(_))).count() as u32,
        ..Default::default()
    };
    let mut round = 0;
    loop {
        if parties.iter().all(|p| p.is_finished()) && net.pending() == 0 {
            break;
        }
        if round >= MAX_ROUNDS {
            return Err(TransportError::RoundLimit(MAX_ROUNDS));
        }
        net.round = round;
        let mut progressed = false;
        let mut outgoing = Vec::new();
        for party in parties.iter_mut() {
            let id = party.id();
            let inbox = net.receive_all(id)?;
            if party.is_finished() {
                if !inbox.is_empty() {
                    return Err(TransportError::AfterFinish { party: id, count: inbox.len() });
                }
                continue;
            }
            let (stage, phase) = (party.stage(), party.phase());
            let start = Instant::now();
            let out = party
                .on_round(inbox)
                .map_err(|source| TransportError::Protocol { party: id, source })?;
            timing.add(id, stage, start.elapsed());
            progressed |= !out.is_empty() || party.phase() != phase;
            outgoing.extend(out.into_iter().map(|o| (id, o)));
        }
        for (from, o) in outgoing {
            net.send(from, o.to, &o.message)?;
        }
        if !progressed && net.pending() == 0 {
            let waiting = parties.iter().filter(|p| !p.is_finished()).map(|p| (p.id(), p.phase())).collect();
            return Err(TransportError::Stalled { round, waiting });
        }
        round += 1;
    }
    let outputs = parties
        .iter()
        .map(|p| (p.id(), p.output().expect("finished parties have output")))
        .collect();
    let (ledger, trace) = net.into_parts();
    Ok(RunOutcome { outputs, ledger, trace, timing, rounds: round })
}

/// Builds the parties for a session and runs it in-process.
pub fn simulate(config: &SessionConfig, keys: &KeyMaterial, inputs: &Inputs) -> Result<RunOutcome> {
    let parties = build_parties(config, keys, inputs)
        .map_err(|source| TransportError::Protocol { party: PartyId::Operator, source })?;
    run_to_completion(parties)
}
