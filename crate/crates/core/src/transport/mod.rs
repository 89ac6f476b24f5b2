//! Moving frames between two sessions: an in-memory duplex for tests and
//! simulations, a TCP adapter for live pairing, a fault-injecting wrapper,
//! and the driver that runs a [`Session`] over any of them.

pub mod wire;

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::protocol::{
    negotiate, AbortReason, Hello, Message, Outcome, Phase, ProtocolConfig, Role, SecretSize, Session,
    DEFAULT_CONFIRM_TIMEOUT, NONCE_BYTES, PROTOCOL_VERSION,
};
pub use wire::{decode_frame, encode_frame, FrameError, MAX_FRAME};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("framing: {0}")]
    Frame(#[from] FrameError),
    #[error("peer closed the connection")]
    Closed,
    #[error("{0}")]
    Setup(String),
}

/// A reliable, ordered pipe of whole frames.
pub trait Channel: Send {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError>;
    /// `Ok(None)` when nothing arrived within `timeout`.
    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError>;
}

/// One end of an in-memory duplex channel.
pub struct MemoryChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

pub fn memory_pair() -> (MemoryChannel, MemoryChannel) {
    let (ta, rb) = mpsc::channel();
    let (tb, ra) = mpsc::channel();
    (MemoryChannel { tx: ta, rx: ra }, MemoryChannel { tx: tb, rx: rb })
}

impl Channel for MemoryChannel {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        // A vanished peer is not an error for the sender; it will time out
        // or has already finished.
        let _ = self.tx.send(frame);
        Ok(())
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        match self.rx.recv_timeout(timeout) {
            Ok(f) => Ok(Some(f)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
        }
    }
}

/// Frames over a TCP stream.
pub struct TcpChannel {
    stream: TcpStream,
    buf: Vec<u8>,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self { stream, buf: Vec::new() })
    }

    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }

    /// Accepts one connection.
    pub fn accept(listener: &TcpListener) -> io::Result<Self> {
        let (s, _) = listener.accept()?;
        Self::new(s)
    }

    fn take_frame(&mut self) -> Result<Option<Vec<u8>>, TransportError> {
        match wire::frame_len(&self.buf)? {
            Some(n) => {
                let rest = self.buf.split_off(n);
                Ok(Some(std::mem::replace(&mut self.buf, rest)))
            }
            None => Ok(None),
        }
    }
}

impl Channel for TcpChannel {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        self.stream.write_all(&frame)?;
        Ok(())
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        let until = Instant::now() + timeout;
        let mut tmp = [0u8; 8192];
        loop {
            if let Some(f) = self.take_frame()? {
                return Ok(Some(f));
            }
            let left = until.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.stream.set_read_timeout(Some(left))?;
            match self.stream.read(&mut tmp) {
                Ok(0) => return Err(TransportError::Closed),
                Ok(k) => self.buf.extend_from_slice(&tmp[..k]),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return Ok(None),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
}

type FrameHook = Box<dyn FnMut(Vec<u8>) -> Option<Vec<u8>> + Send>;

/// Passes outgoing frames through a hook that may rewrite or drop them.
pub struct FaultyChannel<C> {
    inner: C,
    hook: FrameHook,
}

impl<C: Channel> FaultyChannel<C> {
    pub fn new(inner: C, hook: impl FnMut(Vec<u8>) -> Option<Vec<u8>> + Send + 'static) -> Self {
        Self {
            inner,
            hook: Box::new(hook),
        }
    }

    /// Silently drops every outgoing frame of the given type.
    pub fn dropping(inner: C, msg_type: u8) -> Self {
        Self::new(inner, move |f| (f.get(4) != Some(&msg_type)).then_some(f))
    }
}

impl<C: Channel> Channel for FaultyChannel<C> {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        match (self.hook)(frame) {
            Some(f) => self.inner.send_frame(f),
            None => Ok(()),
        }
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        self.inner.recv_frame(timeout)
    }
}

impl Channel for Box<dyn Channel> {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        (**self).send_frame(frame)
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        (**self).recv_frame(timeout)
    }
}

/// Monotonic time source for deadlines.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

/// A clock that only moves when told to; clones share the same time.
#[derive(Clone, Default)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn advance(&self, d: Duration) {
        self.0.fetch_add(d.as_nanos() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        Duration::from_nanos(self.0.load(Ordering::SeqCst))
    }
}

/// Wall-clock time per phase. Every interval of the run is attributed to
/// exactly one phase, so the phases sum to `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub negotiation: Duration,
    pub amplification: Duration,
    pub commitment: Duration,
    pub confirmation: Duration,
    pub total: Duration,
    /// Time spent computing (outside of receive calls).
    pub compute: Duration,
    /// Time spent blocked waiting for the peer.
    pub wait: Duration,
}

impl PhaseTimings {
    fn charge(&mut self, phase: Option<Phase>, d: Duration) {
        match phase {
            None | Some(Phase::Init) => self.negotiation += d,
            Some(Phase::Amplifying) => self.amplification += d,
            Some(Phase::Committing) => self.commitment += d,
            Some(Phase::Confirming | Phase::Done | Phase::Aborted) => self.confirmation += d,
        }
        self.total += d;
    }
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub outcome: Outcome,
    pub config: Option<ProtocolConfig>,
    pub timings: PhaseTimings,
}

/// What a device advertises and brings to a session.
#[derive(Debug, Clone)]
pub struct PairingParams {
    pub thr: Ratio<u64>,
    pub secret: SecretSize,
    pub sensors: u8,
    pub confirm_timeout: Duration,
    /// Bound on waiting for the peer's HELLO.
    pub hello_timeout: Duration,
}

impl PairingParams {
    pub fn new(thr: Ratio<u64>) -> Self {
        Self {
            thr,
            secret: SecretSize::Bits128,
            sensors: 0x0F,
            confirm_timeout: DEFAULT_CONFIRM_TIMEOUT,
            hello_timeout: Duration::from_secs(10),
        }
    }

    pub fn hello(&self, n: usize, nonce: [u8; NONCE_BYTES]) -> Hello {
        Hello {
            version: PROTOCOL_VERSION,
            nonce,
            n: n.min(u16::MAX as usize) as u16,
            thr_num: (*self.thr.numer()).min(u16::MAX as u64) as u16,
            thr_den: (*self.thr.denom()).min(u16::MAX as u64) as u16,
            secret_bits: self.secret.bits(),
            sensors: self.sensors,
        }
    }
}

/// Longest single blocking receive, so injected clocks are re-read often.
const POLL_TICK: Duration = Duration::from_millis(50);

struct Driver<'a, C: Channel, K: Clock> {
    chan: &'a mut C,
    clock: &'a K,
    timings: PhaseTimings,
    mark: Instant,
}

impl<C: Channel, K: Clock> Driver<'_, C, K> {
    fn checkpoint(&mut self, phase: Option<Phase>) {
        let now = Instant::now();
        self.timings.charge(phase, now - self.mark);
        self.mark = now;
    }

    fn send(&mut self, msgs: Vec<Message>) -> Result<(), TransportError> {
        for m in msgs {
            self.chan.send_frame(encode_frame(&m)?)?;
        }
        Ok(())
    }

    /// Receives one frame, waiting at most `max`.
    fn recv(&mut self, max: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        let t = Instant::now();
        let r = self.chan.recv_frame(max.min(POLL_TICK));
        self.timings.wait += t.elapsed();
        r
    }
}

/// Runs one side of a pairing: HELLO exchange, negotiation, then the
/// session until it finishes or aborts.
pub fn run_session<C: Channel, K: Clock>(
    role: Role,
    params: &PairingParams,
    fingerprint: &[bool],
    chan: &mut C,
    clock: &K,
    mut rng: ChaCha20Rng,
) -> Result<SessionReport, TransportError> {
    let start = Instant::now();
    let mut d = Driver {
        chan,
        clock,
        timings: PhaseTimings::default(),
        mark: start,
    };
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let hello = params.hello(fingerprint.len(), nonce);
    d.send(vec![Message::Hello(hello.clone())])?;

    let aborted = |reason, by_peer| Outcome::Aborted { reason, by_peer };
    let finish = |mut d: Driver<'_, C, K>, outcome, config| {
        d.checkpoint(None);
        d.timings.compute = d.timings.total.saturating_sub(d.timings.wait);
        Ok(SessionReport {
            outcome,
            config,
            timings: d.timings,
        })
    };

    let hello_deadline = d.clock.now() + params.hello_timeout;
    let remote = loop {
        let now = d.clock.now();
        if now > hello_deadline {
            d.send(vec![Message::Abort(AbortReason::Timeout)])?;
            return finish(d, aborted(AbortReason::Timeout, false), None);
        }
        if let Some(f) = d.recv(hello_deadline - now)? {
            match decode_frame(&f) {
                Ok(Message::Hello(h)) => break h,
                Ok(Message::Abort(r)) => return finish(d, aborted(r, true), None),
                _ => {
                    d.send(vec![Message::Abort(AbortReason::ProtocolViolation)])?;
                    return finish(d, aborted(AbortReason::ProtocolViolation, false), None);
                }
            }
        }
    };
    let cfg = match negotiate(&hello, &remote, role) {
        Ok(c) => c.with_timeout(params.confirm_timeout),
        Err(reason) => {
            d.send(vec![Message::Abort(reason)])?;
            return finish(d, aborted(reason, false), None);
        }
    };
    d.checkpoint(None);

    let session_rng = ChaCha20Rng::from_rng(&mut rng).expect("ChaCha seeding");
    let mut s = Session::new(role, cfg.clone(), fingerprint, session_rng)
        .map_err(|e| TransportError::Setup(e.to_string()))?;
    let out = s.start(d.clock.now());
    d.send(out)?;
    while !s.is_terminal() {
        let phase = s.phase();
        let out = s.poll(d.clock.now());
        d.send(out)?;
        d.checkpoint(Some(phase));
        if s.is_terminal() {
            break;
        }
        let phase = s.phase();
        let now = d.clock.now();
        let left = s.deadline().map_or(POLL_TICK, |dl| dl.saturating_sub(now));
        let frame = match d.recv(left) {
            Ok(f) => f,
            // The peer hung up mid-session; nothing more can arrive, so let
            // the deadline decide.
            Err(TransportError::Closed) => {
                thread::sleep(left.min(POLL_TICK));
                None
            }
            Err(e) => return Err(e),
        };
        d.checkpoint(Some(phase));
        let Some(frame) = frame else { continue };
        let phase = s.phase();
        let out = match decode_frame(&frame) {
            Ok(m) => s.handle(m, d.clock.now()),
            Err(_) => s.abort_locally(AbortReason::ProtocolViolation),
        };
        d.send(out)?;
        d.checkpoint(Some(phase));
    }
    let outcome = s.outcome().cloned().expect("terminal sessions have an outcome");
    finish(d, outcome, Some(cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopbackTransport {
    Memory,
    Tcp,
}

#[derive(Debug, Clone)]
pub struct LoopbackOptions {
    pub params: PairingParams,
    pub transport: LoopbackTransport,
    /// Responder never delivers CONFIRM_B.
    pub drop_confirm_b: bool,
    pub seed: Option<u64>,
}

impl LoopbackOptions {
    pub fn new(params: PairingParams) -> Self {
        Self {
            params,
            transport: LoopbackTransport::Memory,
            drop_confirm_b: false,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoopbackReport {
    pub initiator: SessionReport,
    pub responder: SessionReport,
    pub total: Duration,
}

impl LoopbackReport {
    /// Both sides finished with the same key.
    pub fn agreed(&self) -> bool {
        matches!((self.initiator.outcome.key(), self.responder.outcome.key()), (Some(a), Some(b)) if a == b)
    }
}

/// Pairs two fingerprints end to end over a local channel, the responder on
/// its own thread.
pub fn loopback_pair(fa: &[bool], fb: &[bool], opts: &LoopbackOptions) -> Result<LoopbackReport, TransportError> {
    let mut seeder = match opts.seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    let rng_a = ChaCha20Rng::from_rng(&mut seeder).expect("ChaCha seeding");
    let rng_b = ChaCha20Rng::from_rng(&mut seeder).expect("ChaCha seeding");
    let (chan_a, chan_b): (Box<dyn Channel>, Box<dyn Channel>) = match opts.transport {
        LoopbackTransport::Memory => {
            let (a, b) = memory_pair();
            (Box::new(a), Box::new(b))
        }
        LoopbackTransport::Tcp => {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let acceptor = thread::spawn(move || TcpChannel::accept(&listener));
            let a = TcpChannel::connect(addr)?;
            let b = acceptor
                .join()
                .map_err(|_| TransportError::Setup("accept thread panicked".into()))??;
            (Box::new(a), Box::new(b))
        }
    };
    let chan_b: Box<dyn Channel> = if opts.drop_confirm_b {
        Box::new(FaultyChannel::dropping(chan_b, wire::CONFIRM_B))
    } else {
        chan_b
    };
    let start = Instant::now();
    let params_b = opts.params.clone();
    let fb = fb.to_vec();
    let responder = thread::spawn(move || {
        let mut chan_b = chan_b;
        run_session(Role::Responder, &params_b, &fb, &mut chan_b, &SystemClock::new(), rng_b)
    });
    let mut chan_a = chan_a;
    let initiator = run_session(Role::Initiator, &opts.params, fa, &mut chan_a, &SystemClock::new(), rng_a);
    drop(chan_a);
    let responder = responder
        .join()
        .map_err(|_| TransportError::Setup("responder thread panicked".into()))?;
    Ok(LoopbackReport {
        initiator: initiator?,
        responder: responder?,
        total: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn params() -> PairingParams {
        PairingParams::new(Ratio::new(35, 48))
    }

    fn random_bits(n: usize, seed: u64) -> Vec<bool> {
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| r.gen()).collect()
    }

    #[test]
    fn identical_fingerprints_pair_over_memory_and_tcp() {
        let f = random_bits(48, 1);
        for transport in [LoopbackTransport::Memory, LoopbackTransport::Tcp] {
            let mut o = LoopbackOptions::new(params());
            o.transport = transport;
            o.seed = Some(2);
            let r = loopback_pair(&f, &f, &o).unwrap();
            assert!(r.agreed(), "{transport:?}: {:?} / {:?}", r.initiator.outcome, r.responder.outcome);
            for t in [r.initiator.timings, r.responder.timings] {
                let sum = t.negotiation + t.amplification + t.commitment + t.confirmation;
                assert!(sum.abs_diff(t.total) < Duration::from_millis(5));
                assert_eq!(t.compute + t.wait, t.total);
            }
        }
    }

    #[test]
    fn dropped_confirm_b_times_out() {
        let f = random_bits(24, 3);
        let mut p = PairingParams::new(Ratio::new(17, 24));
        p.confirm_timeout = Duration::from_millis(300);
        let mut o = LoopbackOptions::new(p);
        o.drop_confirm_b = true;
        o.seed = Some(4);
        let r = loopback_pair(&f, &f, &o).unwrap();
        assert_eq!(r.initiator.outcome.abort_reason(), Some(AbortReason::Timeout));
        // The deadline is armed while the COMMIT is still being handled, so
        // a sliver of the wait may be charged to the commitment phase.
        let t = &r.initiator.timings;
        assert!(t.commitment + t.confirmation >= Duration::from_millis(300));
        assert!(t.confirmation >= Duration::from_millis(200), "{t:?}");
        // The responder verified h and finished; only the initiator lacks
        // confirmation.
        assert!(r.responder.outcome.key().is_some());
    }

    #[test]
    fn parameter_mismatch_aborts_both() {
        let f = random_bits(16, 5);
        let (mut ca, mut cb) = memory_pair();
        let pa = PairingParams::new(Ratio::new(15, 16));
        let mut pb = pa.clone();
        pb.secret = SecretSize::Bits244;
        let h = thread::spawn(move || {
            run_session(Role::Responder, &pb, &f, &mut cb, &SystemClock::new(), ChaCha20Rng::seed_from_u64(6)).unwrap()
        });
        let f = random_bits(16, 5);
        let ra = run_session(Role::Initiator, &pa, &f, &mut ca, &SystemClock::new(), ChaCha20Rng::seed_from_u64(7)).unwrap();
        let rb = h.join().unwrap();
        assert_eq!(ra.outcome.abort_reason(), Some(AbortReason::ParamMismatch));
        assert_eq!(rb.outcome.abort_reason(), Some(AbortReason::ParamMismatch));
    }

    #[test]
    fn garbage_frame_is_a_violation() {
        let f = random_bits(8, 8);
        let (mut ca, mut cb) = memory_pair();
        let p = PairingParams::new(Ratio::new(7, 8));
        let pb = p.clone();
        let h = thread::spawn(move || {
            // Answer HELLO, then send an undecodable frame instead of PAKE_B.
            let first = cb.recv_frame(Duration::from_secs(5)).unwrap().unwrap();
            let Message::Hello(mut hello) = decode_frame(&first).unwrap() else { panic!() };
            hello.nonce = [3; 16];
            let _ = pb;
            cb.send_frame(encode_frame(&Message::Hello(hello)).unwrap()).unwrap();
            let _pake_a = cb.recv_frame(Duration::from_secs(5)).unwrap().unwrap();
            cb.send_frame(vec![0, 0, 0, 1, 0x33]).unwrap();
            cb.recv_frame(Duration::from_secs(5)).unwrap()
        });
        let r = run_session(Role::Initiator, &p, &f, &mut ca, &SystemClock::new(), ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(r.outcome.abort_reason(), Some(AbortReason::ProtocolViolation));
        let reply = h.join().unwrap().unwrap();
        assert_eq!(decode_frame(&reply).unwrap(), Message::Abort(AbortReason::ProtocolViolation));
    }

    #[test]
    fn manual_clock_moves_only_when_advanced() {
        let c = ManualClock::default();
        let c2 = c.clone();
        assert_eq!(c.now(), Duration::ZERO);
        c2.advance(Duration::from_millis(1500));
        assert_eq!(c.now(), Duration::from_millis(1500));
    }

    #[test]
    fn tcp_reassembles_split_frames() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let h = thread::spawn(move || {
            let mut s = TcpStream::connect(addr).unwrap();
            let f = encode_frame(&Message::ConfirmA([7; 32])).unwrap();
            for chunk in f.chunks(5) {
                s.write_all(chunk).unwrap();
                s.flush().unwrap();
                thread::sleep(Duration::from_millis(5));
            }
            s.write_all(&encode_frame(&Message::Abort(AbortReason::Timeout)).unwrap()).unwrap();
        });
        let mut c = TcpChannel::accept(&listener).unwrap();
        let a = c.recv_frame(Duration::from_secs(5)).unwrap().unwrap();
        let b = c.recv_frame(Duration::from_secs(5)).unwrap().unwrap();
        assert_eq!(decode_frame(&a).unwrap(), Message::ConfirmA([7; 32]));
        assert_eq!(decode_frame(&b).unwrap(), Message::Abort(AbortReason::Timeout));
        h.join().unwrap();
    }
}
