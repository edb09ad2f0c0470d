//! Length-prefixed TCP framing and a threaded session runner.
//!
//! A frame is a 4-byte big-endian length followed by the canonical message
//! text. Each user runs on its own thread with its own connection; the
//! operator reads all connections through one channel and handles messages
//! one at a time. Only the ledger is shared, behind a mutex.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use super::{Result, RunOutcome, TimingReport, TrafficLedger, TransportError};
use crate::protocol::{Outbound, Party, PartyId, StageMessage};

/// Largest accepted frame body.
pub const MAX_FRAME: u32 = 16 << 20;

/// Writes one frame and returns the body length.
pub fn write_frame<W: Write>(w: &mut W, msg: &StageMessage) -> io::Result<usize> {
    let text = msg.to_text();
    let len = u32::try_from(text.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(text.as_bytes())?;
    Ok(text.len())
}

/// Reads one frame; `None` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<StageMessage>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    let text = String::from_utf8(body).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    StageMessage::from_text(&text).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Steps a party on `inbox`, then keeps stepping on empty input while it
/// changes phase without receiving anything.
fn drive(
    party: &mut dyn Party,
    mut inbox: Vec<StageMessage>,
    timing: &mut TimingReport,
) -> Result<Vec<Outbound>> {
    let mut out = Vec::new();
    loop {
        if party.is_finished() {
            return Ok(out);
        }
        let (stage, phase) = (party.stage(), party.phase());
        let start = Instant::now();
        let sent = party
            .on_round(std::mem::take(&mut inbox))
            .map_err(|source| TransportError::Protocol { party: party.id(), source })?;
        timing.add(party.id(), stage, start.elapsed());
        let idle = sent.is_empty();
        out.extend(sent);
        if idle && party.phase() == phase {
            return Ok(out);
        }
    }
}

fn send_all<W: Write>(w: &mut W, out: Vec<Outbound>, ledger: &Mutex<TrafficLedger>) -> Result<()> {
    for o in out {
        let bytes = write_frame(w, &o.message)?;
        ledger.lock().expect("ledger lock").record(&o.message, o.to, bytes);
    }
    w.flush()?;
    Ok(())
}

fn user_loop(
    mut party: Box<dyn Party>,
    addr: SocketAddr,
    ledger: Arc<Mutex<TrafficLedger>>,
) -> Result<(Box<dyn Party>, TimingReport)> {
    let id = party.id();
    let PartyId::User(index) = id else { unreachable!("users only") };
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    writer.write_all(&index.to_be_bytes())?;
    let mut timing = TimingReport::default();
    let out = drive(party.as_mut(), Vec::new(), &mut timing)?;
    send_all(&mut writer, out, &ledger)?;
    while !party.is_finished() {
        let Some(msg) = read_frame(&mut reader)? else {
            let waiting = vec![(id, party.phase())];
            return Err(TransportError::Stalled { round: 0, waiting });
        };
        let out = drive(party.as_mut(), vec![msg], &mut timing)?;
        send_all(&mut writer, out, &ledger)?;
    }
    Ok((party, timing))
}

/// Runs a session over loopback TCP. `parties[0]` must be the operator.
pub fn run_over_tcp(mut parties: Vec<Box<dyn Party>>) -> Result<RunOutcome> {
    let mut operator = parties.remove(0);
    assert_eq!(operator.id(), PartyId::Operator, "operator comes first");
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let ledger = Arc::new(Mutex::new(TrafficLedger::default()));
    let user_count = parties.len() as u32;

    let handles: Vec<_> = parties
        .into_iter()
        .map(|p| {
            let ledger = Arc::clone(&ledger);
            thread::spawn(move || user_loop(p, addr, ledger))
        })
        .collect();

    let (tx, rx) = mpsc::channel::<io::Result<StageMessage>>();
    let mut writers = BTreeMap::new();
    for _ in 0..user_count {
        let (stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut index = [0u8; 4];
        reader.read_exact(&mut index)?;
        writers.insert(PartyId::User(u32::from_be_bytes(index)), BufWriter::new(stream));
        let tx = tx.clone();
        thread::spawn(move || loop {
            match read_frame(&mut reader) {
                Ok(Some(msg)) => {
                    if tx.send(Ok(msg)).is_err() {
                        break;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        });
    }
    drop(tx);

    let mut timing = TimingReport { user_count, ..Default::default() };
    let route = |out: Vec<Outbound>, writers: &mut BTreeMap<PartyId, BufWriter<TcpStream>>| -> Result<()> {
        for o in out {
            let w = writers.get_mut(&o.to).ok_or(TransportError::UnknownEndpoint(o.to))?;
            send_all(w, vec![o], &ledger)?;
        }
        Ok(())
    };
    let out = drive(operator.as_mut(), Vec::new(), &mut timing)?;
    route(out, &mut writers)?;
    while !operator.is_finished() {
        let Ok(msg) = rx.recv() else {
            let waiting = vec![(PartyId::Operator, operator.phase())];
            return Err(TransportError::Stalled { round: 0, waiting });
        };
        let out = drive(operator.as_mut(), vec![msg?], &mut timing)?;
        route(out, &mut writers)?;
    }

    let mut outputs = vec![(PartyId::Operator, operator.output().expect("finished"))];
    let mut users = Vec::new();
    for h in handles {
        let (party, t) = h.join().expect("user thread panicked")?;
        for (stage, d) in t.users {
            *timing.users.entry(stage).or_default() += d;
        }
        users.push((party.id(), party.output().expect("finished")));
    }
    drop(writers);
    users.sort_by_key(|(id, _)| *id);
    outputs.extend(users);
    let ledger = Arc::try_unwrap(ledger).expect("threads joined").into_inner().expect("ledger lock");
    Ok(RunOutcome { outputs, ledger, trace: Vec::new(), timing, rounds: 0 })
}
