//! Prover/verifier message links with exact cost accounting.
//!
//! Wire frame: 1-byte tag, 4-byte little-endian payload length, then the
//! payload as 8-byte little-endian canonical residues. Prover tags are
//! below `0x80`, verifier tags at or above it, so a recorded transcript
//! (plain frame concatenation) can be split by direction on replay.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::field::{Fe, FieldError};

pub const FRAME_HEADER: usize = 5;
pub const VERIFIER_TAG: u8 = 0x80;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer closed the link")]
    Closed,
    #[error("framing violation: {0}")]
    Framing(String),
    #[error("bad element: {0}")]
    Element(#[from] FieldError),
    #[error("replayed transcript diverged at frame {0}")]
    Diverged(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub tag: u8,
    pub elems: Vec<Fe>,
}

pub fn encode_frame(tag: u8, elems: &[Fe]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER + 8 * elems.len());
    out.push(tag);
    out.extend_from_slice(&((8 * elems.len()) as u32).to_le_bytes());
    for e in elems {
        out.extend_from_slice(&e.to_bytes());
    }
    out
}

/// Decodes one frame from the front of `buf`, returning it and the
/// number of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Message, usize), TransportError> {
    if buf.len() < FRAME_HEADER {
        return Err(TransportError::Framing(format!("truncated header ({} bytes)", buf.len())));
    }
    let len = u32::from_le_bytes(buf[1..5].try_into().unwrap()) as usize;
    if len % 8 != 0 {
        return Err(TransportError::Framing(format!("payload length {len} not a multiple of 8")));
    }
    let end = FRAME_HEADER + len;
    if buf.len() < end {
        return Err(TransportError::Framing(format!(
            "truncated payload: need {len}, have {}",
            buf.len() - FRAME_HEADER
        )));
    }
    let elems = buf[FRAME_HEADER..end]
        .chunks_exact(8)
        .map(Fe::from_bytes)
        .collect::<Result<Vec<_>, _>>()?;
    Ok((Message { tag: buf[0], elems }, end))
}

/// Splits a recorded transcript into frames.
pub fn split_frames(mut buf: &[u8]) -> Result<Vec<Message>, TransportError> {
    let mut out = Vec::new();
    while !buf.is_empty() {
        let (m, used) = decode_frame(buf)?;
        out.push(m);
        buf = &buf[used..];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProc,
    Socket,
}

impl std::str::FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inproc" => Ok(TransportKind::InProc),
            "socket" => Ok(TransportKind::Socket),
            _ => Err(format!("unknown transport {s}")),
        }
    }
}

/// Adds `delta` to element `element` of the prover's `message`-th message
/// (both zero-based), after it leaves the honest prover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adversary {
    pub message: usize,
    pub element: usize,
    pub delta: Fe,
}

enum Pipe {
    Mem { tx: mpsc::Sender<Vec<u8>>, rx: mpsc::Receiver<Vec<u8>> },
    Tcp(TcpStream),
    Replay { incoming: VecDeque<Vec<u8>>, outgoing: VecDeque<Vec<u8>>, frame: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub bytes_sent: u64,
    pub bytes_recv: u64,
    pub elems_sent: u64,
    pub elems_recv: u64,
    pub msgs_sent: u64,
    pub msgs_recv: u64,
    /// Turns taken by the peer that talks first (the prover): increments
    /// whenever the prover's direction becomes active again.
    pub rounds: u64,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Last {
    None,
    Sent,
    Recv,
}

/// One endpoint of a session.
pub struct Link {
    pipe: Pipe,
    prover_side: bool,
    stats: LinkStats,
    last: Last,
    record: Option<Vec<u8>>,
    adversary: Option<Adversary>,
    busy: Duration,
    resumed: Instant,
}

impl Link {
    fn new(pipe: Pipe, prover_side: bool) -> Link {
        Link {
            pipe,
            prover_side,
            stats: LinkStats::default(),
            last: Last::None,
            record: None,
            adversary: None,
            busy: Duration::ZERO,
            resumed: Instant::now(),
        }
    }

    /// A connected in-process pair `(prover, verifier)`.
    pub fn mem_pair() -> (Link, Link) {
        let (t1, r1) = mpsc::channel();
        let (t2, r2) = mpsc::channel();
        (
            Link::new(Pipe::Mem { tx: t1, rx: r2 }, true),
            Link::new(Pipe::Mem { tx: t2, rx: r1 }, false),
        )
    }

    /// A connected loopback TCP pair `(prover, verifier)`.
    pub fn tcp_pair() -> io::Result<(Link, Link)> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let client = TcpStream::connect(addr)?;
        let (server, _) = listener.accept()?;
        client.set_nodelay(true)?;
        server.set_nodelay(true)?;
        Ok((Link::new(Pipe::Tcp(client), true), Link::new(Pipe::Tcp(server), false)))
    }

    /// A verifier endpoint fed from a recorded transcript. Verifier frames
    /// must match the recording byte for byte.
    pub fn replay(transcript: &[u8]) -> Result<Link, TransportError> {
        let mut incoming = VecDeque::new();
        let mut outgoing = VecDeque::new();
        let mut buf = transcript;
        while !buf.is_empty() {
            let (m, used) = decode_frame(buf)?;
            let frame = buf[..used].to_vec();
            if m.tag >= VERIFIER_TAG {
                outgoing.push_back(frame);
            } else {
                incoming.push_back(frame);
            }
            buf = &buf[used..];
        }
        Ok(Link::new(Pipe::Replay { incoming, outgoing, frame: 0 }, false))
    }

    pub fn set_recording(&mut self, on: bool) {
        self.record = on.then(Vec::new);
    }

    pub fn set_adversary(&mut self, adv: Option<Adversary>) {
        self.adversary = adv;
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn transcript(&self) -> Option<&[u8]> {
        self.record.as_deref()
    }

    pub fn take_transcript(&mut self) -> Option<Vec<u8>> {
        self.record.take()
    }

    fn pause(&mut self) {
        self.busy += self.resumed.elapsed();
    }

    fn resume(&mut self) {
        self.resumed = Instant::now();
    }

    /// Time spent outside blocking receives.
    pub fn busy(&self) -> Duration {
        self.busy + self.resumed.elapsed()
    }

    pub fn send(&mut self, tag: u8, elems: &[Fe]) -> Result<(), TransportError> {
        debug_assert_eq!(tag < VERIFIER_TAG, self.prover_side, "tag space mismatch");
        let mut owned;
        let mut elems = elems;
        if let Some(adv) = self.adversary {
            if self.prover_side && adv.message as u64 == self.stats.msgs_sent {
                owned = elems.to_vec();
                if let Some(e) = owned.get_mut(adv.element) {
                    *e += adv.delta;
                }
                elems = &owned[..];
            }
        }
        let frame = encode_frame(tag, elems);
        if self.prover_side && self.last != Last::Sent {
            self.stats.rounds += 1;
        }
        self.last = Last::Sent;
        self.stats.bytes_sent += frame.len() as u64;
        self.stats.elems_sent += elems.len() as u64;
        self.stats.msgs_sent += 1;
        if let Some(r) = self.record.as_mut() {
            r.extend_from_slice(&frame);
        }
        match &mut self.pipe {
            Pipe::Mem { tx, .. } => tx.send(frame).map_err(|_| TransportError::Closed),
            Pipe::Tcp(s) => s.write_all(&frame).map_err(TransportError::from),
            Pipe::Replay { outgoing, frame: idx, .. } => {
                *idx += 1;
                match outgoing.pop_front() {
                    Some(f) if f == frame => Ok(()),
                    _ => Err(TransportError::Diverged(*idx)),
                }
            }
        }
    }

    pub fn recv(&mut self) -> Result<Message, TransportError> {
        self.pause();
        let frame = match &mut self.pipe {
            Pipe::Mem { rx, .. } => rx.recv().map_err(|_| TransportError::Closed),
            Pipe::Tcp(s) => read_tcp_frame(s),
            Pipe::Replay { incoming, frame: idx, .. } => {
                *idx += 1;
                incoming.pop_front().ok_or(TransportError::Closed)
            }
        };
        self.resume();
        let frame = frame?;
        let (msg, used) = decode_frame(&frame)?;
        if used != frame.len() {
            return Err(TransportError::Framing("trailing bytes after frame".into()));
        }
        if !self.prover_side && self.last != Last::Recv {
            self.stats.rounds += 1;
        }
        self.last = Last::Recv;
        self.stats.bytes_recv += frame.len() as u64;
        self.stats.elems_recv += msg.elems.len() as u64;
        self.stats.msgs_recv += 1;
        if let Some(r) = self.record.as_mut() {
            r.extend_from_slice(&frame);
        }
        Ok(msg)
    }
}

fn read_tcp_frame(s: &mut TcpStream) -> Result<Vec<u8>, TransportError> {
    let mut head = [0u8; FRAME_HEADER];
    match s.read_exact(&mut head) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(TransportError::Closed),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(head[1..5].try_into().unwrap()) as usize;
    if len % 8 != 0 {
        return Err(TransportError::Framing(format!("payload length {len} not a multiple of 8")));
    }
    let mut frame = head.to_vec();
    frame.resize(FRAME_HEADER + len, 0);
    s.read_exact(&mut frame[FRAME_HEADER..])
        .map_err(|_| TransportError::Framing("truncated payload".into()))?;
    Ok(frame)
}

/// Peak live-word tracker for verifier space.
#[derive(Debug, Clone, Default)]
pub struct SpaceMeter {
    peak: usize,
}

impl SpaceMeter {
    pub fn observe(&mut self, words: usize) {
        self.peak = self.peak.max(words);
    }

    pub fn peak(&self) -> usize {
        self.peak
    }
}

/// Why a verifier refused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub round: usize,
    pub reason: String,
}

impl std::fmt::Display for Reject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "reject at round {}: {}", self.round, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept(Fe),
    Reject(Reject),
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accept(_))
    }

    pub fn answer(&self) -> Option<Fe> {
        match self {
            Verdict::Accept(a) => Some(*a),
            Verdict::Reject(_) => None,
        }
    }

    pub fn reject(round: usize, reason: impl Into<String>) -> Verdict {
        Verdict::Reject(Reject { round, reason: reason.into() })
    }
}

/// Receives a message and checks its tag and arity; a mismatch becomes a
/// protocol reject, not a transport error.
pub fn expect(link: &mut Link, tag: u8, len: usize, round: usize) -> Result<Result<Vec<Fe>, Verdict>, TransportError> {
    let m = link.recv()?;
    if m.tag != tag {
        return Ok(Err(Verdict::reject(round, format!("expected tag {tag}, got {}", m.tag))));
    }
    if m.elems.len() != len {
        return Ok(Err(Verdict::reject(
            round,
            format!("expected {len} elements, got {}", m.elems.len()),
        )));
    }
    Ok(Ok(m.elems))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostReport {
    /// prover turns
    pub rounds: u64,
    /// all frames in both directions, headers included
    pub comm_bytes: u64,
    /// prover-to-verifier field elements (proof size in words)
    pub proof_elems: u64,
    pub verifier_elems: u64,
    pub prover_ops: u64,
    pub prover_ms: f64,
    pub verifier_stream_ms: f64,
    pub verifier_check_ms: f64,
    pub vspace_words: u64,
}

impl CostReport {
    pub fn proof_bytes(&self) -> u64 {
        8 * self.proof_elems
    }
}

/// Outcome of a full session.
#[derive(Debug)]
pub struct Session<T> {
    pub result: T,
    pub stats: LinkStats,
    pub prover_time: Duration,
    pub verifier_time: Duration,
    pub transcript: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SessionOpts {
    pub record: bool,
    pub adversary: Option<Adversary>,
}

/// Runs the prover on a helper thread and the verifier on this one.
/// Counters come from the verifier's endpoint. Prover-side transport
/// errors after the verifier has finished are expected (early rejects
/// close the link) and are ignored.
pub fn run_session<T, PF, VF>(
    kind: TransportKind,
    opts: SessionOpts,
    prover: PF,
    verifier: VF,
) -> Result<Session<T>, TransportError>
where
    PF: FnOnce(&mut Link) -> Result<(), TransportError> + Send,
    VF: FnOnce(&mut Link) -> Result<T, TransportError>,
{
    let (mut pl, mut vl) = match kind {
        TransportKind::InProc => Link::mem_pair(),
        TransportKind::Socket => Link::tcp_pair()?,
    };
    pl.set_adversary(opts.adversary);
    vl.set_recording(opts.record);
    std::thread::scope(|scope| {
        let handle = scope.spawn(move || {
            pl.resume();
            let r = prover(&mut pl);
            (r, pl.busy())
        });
        vl.resume();
        let out = verifier(&mut vl);
        let verifier_time = vl.busy();
        let stats = vl.stats().clone();
        let transcript = vl.take_transcript();
        drop(vl);
        let (_prover_result, prover_time) = handle.join().expect("prover thread panicked");
        let result = out?;
        Ok(Session { result, stats, prover_time, verifier_time, transcript })
    })
}

/// Replays a recorded transcript through a verifier.
pub fn replay_session<T, VF>(transcript: &[u8], verifier: VF) -> Result<T, TransportError>
where
    VF: FnOnce(&mut Link) -> Result<T, TransportError>,
{
    let mut link = Link::replay(transcript)?;
    verifier(&mut link)
}
