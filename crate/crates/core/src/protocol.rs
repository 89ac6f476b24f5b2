//! The pairing session as a sans-IO state machine.
//!
//! Flow after the HELLO exchange:
//!
//! ```text
//! A                               B
//! PAKE_A  ───────────────────────▶
//!         ◀─────────────────────── PAKE_B
//! COMMIT, CONFIRM_A(h) ──────────▶          decode s', check h = H(s'‖0)
//!         ◀─────────────────────── CONFIRM_B(h' = H(s'‖1))
//! ```
//!
//! A commits a fresh secret `s` masked by the per-bit PAKE keys; B can only
//! unmask the shares at positions where its bits agree and relies on the
//! error-correcting code for the rest. Each side outputs
//! `KDF("session-key", nonce, s)` only after the peer's hash verified.
//!
//! The machine never touches sockets or clocks: callers feed messages and
//! the current time, and send whatever comes back.

use std::time::Duration;

use num_bigint::BigUint;
use num_rational::Ratio;
use rand::{CryptoRng, RngCore};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;
use zeroize::{Zeroize, Zeroizing};

use crate::ecc::ReedSolomon;
use crate::field::Fp130;
use crate::pake::{self, Ephemeral, KeyVector};
use crate::security::decode_parts;

pub use crate::pake::Role;

pub const PROTOCOL_VERSION: u8 = 1;
pub const NONCE_BYTES: usize = 16;
pub const DEFAULT_CONFIRM_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    ParamMismatch,
    VersionMismatch,
    DecodeFailure,
    HashMismatch,
    ProtocolViolation,
    Timeout,
}

impl AbortReason {
    pub fn code(self) -> u8 {
        match self {
            Self::ParamMismatch => 0x01,
            Self::VersionMismatch => 0x02,
            Self::DecodeFailure => 0x03,
            Self::HashMismatch => 0x04,
            Self::ProtocolViolation => 0x05,
            Self::Timeout => 0x06,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0x01 => Self::ParamMismatch,
            0x02 => Self::VersionMismatch,
            0x03 => Self::DecodeFailure,
            0x04 => Self::HashMismatch,
            0x05 => Self::ProtocolViolation,
            0x06 => Self::Timeout,
            _ => return None,
        })
    }
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ParamMismatch => "parameter mismatch",
            Self::VersionMismatch => "version mismatch",
            Self::DecodeFailure => "decode failure",
            Self::HashMismatch => "hash mismatch",
            Self::ProtocolViolation => "protocol violation",
            Self::Timeout => "confirmation timeout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecretSize {
    Bits128,
    Bits244,
}

impl SecretSize {
    pub fn from_bits(b: u16) -> Option<Self> {
        match b {
            128 => Some(Self::Bits128),
            244 => Some(Self::Bits244),
            _ => None,
        }
    }

    pub fn bits(self) -> u16 {
        match self {
            Self::Bits128 => 128,
            Self::Bits244 => 244,
        }
    }

    /// Number of field elements (parallel codewords) carrying the secret.
    pub fn blocks(self) -> usize {
        match self {
            Self::Bits128 => 1,
            Self::Bits244 => 2,
        }
    }

    fn block_bits(self) -> u32 {
        match self {
            Self::Bits128 => 128,
            Self::Bits244 => 122,
        }
    }

    /// Serialized secret / output key width.
    pub fn bytes(self) -> usize {
        (self.bits() as usize).div_ceil(8)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("fingerprint length must be in 1..=65535")]
    BadLength,
    #[error("threshold must lie in (1/2, 1] with a 16-bit numerator and denominator")]
    BadThreshold,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub n: usize,
    pub thr: Ratio<u64>,
    pub secret: SecretSize,
    pub confirm_timeout: Duration,
    pub session_nonce: [u8; NONCE_BYTES],
}

impl ProtocolConfig {
    pub fn new(n: usize, thr: Ratio<u64>, secret: SecretSize, session_nonce: [u8; NONCE_BYTES]) -> Result<Self, ConfigError> {
        if n == 0 || n > u16::MAX as usize {
            return Err(ConfigError::BadLength);
        }
        if thr <= Ratio::new(1, 2) || thr > Ratio::from_integer(1) || *thr.denom() > u16::MAX as u64 {
            return Err(ConfigError::BadThreshold);
        }
        Ok(Self {
            n,
            thr,
            secret,
            confirm_timeout: DEFAULT_CONFIRM_TIMEOUT,
            session_nonce,
        })
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.confirm_timeout = t;
        self
    }

    /// Shares needed to decode, `⌈(2·thr − 1)·n⌉` (at least one).
    pub fn d(&self) -> usize {
        (decode_parts(self.n as u64, self.thr) as usize).clamp(1, self.n)
    }

    /// Correctable mismatches, `⌊(n − d)/2⌋`.
    pub fn e(&self) -> usize {
        (self.n - self.d()) / 2
    }

    pub fn code(&self) -> ReedSolomon {
        ReedSolomon::new(self.n, self.d()).expect("1 <= d <= n by construction")
    }
}

/// Protocol messages after framing has been stripped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello(Hello),
    PakeA(Vec<[u8; 32]>),
    PakeB(Vec<[u8; 32]>),
    /// Masked shares, block-major (`n` per secret block).
    Commit(Vec<Fp130>),
    ConfirmA([u8; 32]),
    ConfirmB([u8; 32]),
    Abort(AbortReason),
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Self::Hello(_) => 0x01,
            Self::PakeA(_) => 0x02,
            Self::PakeB(_) => 0x03,
            Self::Commit(_) => 0x04,
            Self::ConfirmA(_) => 0x05,
            Self::ConfirmB(_) => 0x06,
            Self::Abort(_) => 0x0F,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hello(_) => "HELLO",
            Self::PakeA(_) => "PAKE_A",
            Self::PakeB(_) => "PAKE_B",
            Self::Commit(_) => "COMMIT",
            Self::ConfirmA(_) => "CONFIRM_A",
            Self::ConfirmB(_) => "CONFIRM_B",
            Self::Abort(_) => "ABORT",
        }
    }
}

/// Session parameters advertised before pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub version: u8,
    pub nonce: [u8; NONCE_BYTES],
    pub n: u16,
    pub thr_num: u16,
    pub thr_den: u16,
    pub secret_bits: u16,
    /// Bit `k` set when modality `k` (Acv, Ach, Gyr, Bar) is fused.
    pub sensors: u8,
}

impl Hello {
    pub fn same_parameters(&self, other: &Self) -> bool {
        self.n == other.n
            && self.thr_num as u64 * other.thr_den as u64 == other.thr_num as u64 * self.thr_den as u64
            && self.secret_bits == other.secret_bits
            && self.sensors == other.sensors
    }
}

/// Checks the two HELLOs agree and derives the shared configuration. The
/// session nonce is `SHA-256(nonce_A ‖ nonce_B)` truncated to 16 bytes.
pub fn negotiate(local: &Hello, remote: &Hello, local_role: Role) -> Result<ProtocolConfig, AbortReason> {
    if local.version != remote.version {
        return Err(AbortReason::VersionMismatch);
    }
    if !local.same_parameters(remote) || local.thr_den == 0 {
        return Err(AbortReason::ParamMismatch);
    }
    let secret = SecretSize::from_bits(local.secret_bits).ok_or(AbortReason::ParamMismatch)?;
    let (a, b) = match local_role {
        Role::Initiator => (local, remote),
        Role::Responder => (remote, local),
    };
    let mut h = Sha256::new();
    h.update(a.nonce);
    h.update(b.nonce);
    let digest = h.finalize();
    let mut nonce = [0u8; NONCE_BYTES];
    nonce.copy_from_slice(&digest[..NONCE_BYTES]);
    ProtocolConfig::new(local.n as usize, Ratio::new(local.thr_num as u64, local.thr_den as u64), secret, nonce)
        .map_err(|_| AbortReason::ParamMismatch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Init,
    Amplifying,
    Committing,
    Confirming,
    Done,
    Aborted,
}

/// Output key material, wiped on drop.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey(Zeroizing<Vec<u8>>);

impl SessionKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn bits(&self) -> usize {
        self.0.len() * 8
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SessionKey({} bits)", self.bits())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Done(SessionKey),
    Aborted { reason: AbortReason, by_peer: bool },
}

impl Outcome {
    pub fn key(&self) -> Option<&SessionKey> {
        match self {
            Self::Done(k) => Some(k),
            Self::Aborted { .. } => None,
        }
    }

    pub fn abort_reason(&self) -> Option<AbortReason> {
        match self {
            Self::Done(_) => None,
            Self::Aborted { reason, .. } => Some(*reason),
        }
    }
}

fn hash_secret(s: &[u8], suffix: u8) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(s);
    h.update([suffix]);
    h.finalize().into()
}

fn ct_eq(a: &[u8; 32], b: &[u8; 32]) -> bool {
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Splits a serialized secret into field blocks (big-endian, most
/// significant block first).
fn secret_to_blocks(size: SecretSize, s: &[u8]) -> Vec<Fp130> {
    let v = BigUint::from_bytes_be(s);
    let bb = size.block_bits();
    let mask = (BigUint::from(1u8) << bb) - 1u8;
    (0..size.blocks())
        .rev()
        .map(|k| {
            let block: BigUint = (&v >> (bb as usize * k)) & &mask;
            let digits = block.to_u64_digits();
            let lo = digits.first().copied().unwrap_or(0) as u128;
            let hi = digits.get(1).copied().unwrap_or(0) as u128;
            Fp130::from_u128(lo | hi << 64)
        })
        .collect()
}

/// Inverse of [`secret_to_blocks`]; `None` if a block is out of range.
fn blocks_to_secret(size: SecretSize, blocks: &[Fp130]) -> Option<Zeroizing<Vec<u8>>> {
    let bb = size.block_bits();
    let mut v = BigUint::default();
    for b in blocks {
        let limbs = b.limbs();
        if limbs[2] != 0 || (bb < 128 && b.to_u128() >> bb != 0) {
            return None;
        }
        v = (v << bb as usize) | BigUint::from(b.to_u128());
    }
    let raw = v.to_bytes_be();
    let mut out = Zeroizing::new(vec![0u8; size.bytes()]);
    let off = out.len().checked_sub(raw.len())?;
    out[off..].copy_from_slice(&raw);
    Some(out)
}

fn random_secret<R: RngCore>(size: SecretSize, rng: &mut R) -> Zeroizing<Vec<u8>> {
    let mut s = Zeroizing::new(vec![0u8; size.bytes()]);
    rng.fill_bytes(&mut s);
    let spare = s.len() * 8 - size.bits() as usize;
    s[0] &= 0xFF >> spare;
    s
}

fn derive_session_key(cfg: &ProtocolConfig, s: &[u8]) -> SessionKey {
    let mut out = Zeroizing::new(vec![0u8; cfg.secret.bytes()]);
    pake::kdf("session-key", &cfg.session_nonce, &[s], &mut out);
    let spare = out.len() * 8 - cfg.secret.bits() as usize;
    out[0] &= 0xFF >> spare;
    SessionKey(out)
}

/// One side of a pairing session. Cloning snapshots the full state,
/// secrets included.
#[derive(Clone)]
pub struct Session {
    role: Role,
    cfg: ProtocolConfig,
    phase: Phase,
    fingerprint: Zeroizing<Vec<bool>>,
    rng: ChaCha20Rng,
    ephemeral: Option<Ephemeral>,
    keys: Option<KeyVector>,
    secret: Option<Zeroizing<Vec<u8>>>,
    deadline: Option<Duration>,
    outcome: Option<Outcome>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("role", &self.role)
            .field("phase", &self.phase)
            .field("n", &self.cfg.n)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("fingerprint has {got} bits, session expects {expected}")]
pub struct FingerprintLengthError {
    pub expected: usize,
    pub got: usize,
}

impl Session {
    pub fn new(role: Role, cfg: ProtocolConfig, fingerprint: &[bool], rng: ChaCha20Rng) -> Result<Self, FingerprintLengthError> {
        if fingerprint.len() != cfg.n {
            return Err(FingerprintLengthError {
                expected: cfg.n,
                got: fingerprint.len(),
            });
        }
        Ok(Self {
            role,
            cfg,
            phase: Phase::Init,
            fingerprint: Zeroizing::new(fingerprint.to_vec()),
            rng,
            ephemeral: None,
            keys: None,
            secret: None,
            deadline: None,
            outcome: None,
        })
    }

    /// Seeds the session RNG from the operating system.
    pub fn with_os_rng(role: Role, cfg: ProtocolConfig, fingerprint: &[bool]) -> Result<Self, FingerprintLengthError> {
        use rand::SeedableRng;
        Self::new(role, cfg, fingerprint, ChaCha20Rng::from_entropy())
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn deadline(&self) -> Option<Duration> {
        self.deadline
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.phase, Phase::Done | Phase::Aborted)
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    /// Whether any secret-bearing state (fingerprint, PAKE scalars or keys,
    /// commitment secret) is still held.
    pub fn holds_secrets(&self) -> bool {
        !self.fingerprint.is_empty() || self.ephemeral.is_some() || self.keys.is_some() || self.secret.is_some()
    }

    fn wipe(&mut self) {
        self.fingerprint.zeroize();
        self.fingerprint.clear();
        self.ephemeral = None;
        self.keys = None;
        self.secret = None;
        self.deadline = None;
    }

    fn abort(&mut self, reason: AbortReason, by_peer: bool) -> Vec<Message> {
        self.wipe();
        self.phase = Phase::Aborted;
        self.outcome = Some(Outcome::Aborted { reason, by_peer });
        if by_peer {
            Vec::new()
        } else {
            vec![Message::Abort(reason)]
        }
    }

    /// Aborts from the local side, e.g. on an undecodable frame. Returns the
    /// ABORT to send.
    pub fn abort_locally(&mut self, reason: AbortReason) -> Vec<Message> {
        if self.is_terminal() {
            return Vec::new();
        }
        self.abort(reason, false)
    }

    fn finish(&mut self, key: SessionKey) {
        self.wipe();
        self.phase = Phase::Done;
        self.outcome = Some(Outcome::Done(key));
    }

    fn wait_until(&mut self, now: Duration) {
        self.deadline = Some(now + self.cfg.confirm_timeout);
    }

    /// Begins the session. The initiator emits PAKE_A; the responder waits.
    pub fn start(&mut self, now: Duration) -> Vec<Message> {
        if self.phase != Phase::Init {
            return Vec::new();
        }
        self.phase = Phase::Amplifying;
        self.wait_until(now);
        match self.role {
            Role::Initiator => {
                let (eph, msgs) = pake::start(&self.fingerprint, &self.cfg.session_nonce, Role::Initiator, &mut self.rng);
                self.ephemeral = Some(eph);
                vec![Message::PakeA(msgs)]
            }
            Role::Responder => Vec::new(),
        }
    }

    /// Performs pending local work and enforces the deadline. Call after
    /// every `handle` and whenever a receive times out.
    pub fn poll(&mut self, now: Duration) -> Vec<Message> {
        if self.is_terminal() {
            return Vec::new();
        }
        if self.deadline.is_some_and(|d| now > d) {
            return self.abort(AbortReason::Timeout, false);
        }
        if self.role == Role::Initiator && self.phase == Phase::Committing {
            return self.commit(now);
        }
        Vec::new()
    }

    /// Consumes one inbound message.
    pub fn handle(&mut self, msg: Message, now: Duration) -> Vec<Message> {
        if self.is_terminal() {
            return Vec::new();
        }
        if let Message::Abort(reason) = msg {
            return self.abort(reason, true);
        }
        if self.deadline.is_some_and(|d| now > d) {
            return self.abort(AbortReason::Timeout, false);
        }
        match (self.role, self.phase, msg) {
            (Role::Responder, Phase::Amplifying, Message::PakeA(ma)) => {
                if ma.len() != self.cfg.n {
                    return self.abort(AbortReason::ProtocolViolation, false);
                }
                let (mb, keys) = pake::respond(&self.fingerprint, &self.cfg.session_nonce, &ma, &mut self.rng);
                self.keys = Some(keys);
                self.phase = Phase::Committing;
                self.wait_until(now);
                vec![Message::PakeB(mb)]
            }
            (Role::Initiator, Phase::Amplifying, Message::PakeB(mb)) => {
                if mb.len() != self.cfg.n {
                    return self.abort(AbortReason::ProtocolViolation, false);
                }
                let eph = self.ephemeral.take().expect("initiator holds ephemeral scalars while amplifying");
                self.keys = Some(pake::finish(&self.fingerprint, &self.cfg.session_nonce, Role::Initiator, &eph, &mb));
                self.phase = Phase::Committing;
                Vec::new()
            }
            (Role::Responder, Phase::Committing, Message::Commit(com)) => self.open_commitment(&com, now),
            (Role::Responder, Phase::Confirming, Message::ConfirmA(h)) => {
                let s = self.secret.as_ref().expect("responder holds s' while confirming");
                if !ct_eq(&h, &hash_secret(s, 0)) {
                    return self.abort(AbortReason::HashMismatch, false);
                }
                let reply = hash_secret(s, 1);
                let key = derive_session_key(&self.cfg, s);
                self.finish(key);
                vec![Message::ConfirmB(reply)]
            }
            (Role::Initiator, Phase::Confirming, Message::ConfirmB(h)) => {
                let s = self.secret.as_ref().expect("initiator holds s while confirming");
                if !ct_eq(&h, &hash_secret(s, 1)) {
                    return self.abort(AbortReason::HashMismatch, false);
                }
                let key = derive_session_key(&self.cfg, s);
                self.finish(key);
                Vec::new()
            }
            _ => self.abort(AbortReason::ProtocolViolation, false),
        }
    }

    fn commit(&mut self, now: Duration) -> Vec<Message> {
        let code = self.cfg.code();
        let s = random_secret(self.cfg.secret, &mut self.rng);
        let keys = self.keys.as_ref().expect("initiator holds PAKE keys when committing");
        let mut com = Vec::with_capacity(self.cfg.n * self.cfg.secret.blocks());
        for (b, block) in secret_to_blocks(self.cfg.secret, &s).into_iter().enumerate() {
            let shares = code.encode(block, &mut self.rng);
            com.extend(shares.iter().enumerate().map(|(i, &c)| c + keys.mask::<Fp130>(i, b as u8)));
        }
        let h = hash_secret(&s, 0);
        self.secret = Some(s);
        self.keys = None;
        self.phase = Phase::Confirming;
        // The confirmation deadline runs from sending the commitment.
        self.wait_until(now);
        vec![Message::Commit(com), Message::ConfirmA(h)]
    }

    fn open_commitment(&mut self, com: &[Fp130], now: Duration) -> Vec<Message> {
        let n = self.cfg.n;
        if com.len() != n * self.cfg.secret.blocks() {
            return self.abort(AbortReason::ProtocolViolation, false);
        }
        let code = self.cfg.code();
        let keys = self.keys.take().expect("responder holds PAKE keys when committing");
        let mut blocks = Vec::with_capacity(self.cfg.secret.blocks());
        for (b, chunk) in com.chunks(n).enumerate() {
            let shares: Vec<Fp130> = chunk
                .iter()
                .enumerate()
                .map(|(i, &c)| c - keys.mask::<Fp130>(i, b as u8))
                .collect();
            match code.decode(&shares) {
                Ok(v) => blocks.push(v),
                Err(_) => return self.abort(AbortReason::DecodeFailure, false),
            }
        }
        match blocks_to_secret(self.cfg.secret, &blocks) {
            Some(s) => {
                self.secret = Some(s);
                self.phase = Phase::Confirming;
                self.wait_until(now);
                Vec::new()
            }
            None => self.abort(AbortReason::DecodeFailure, false),
        }
    }
}

/// Runs both roles against each other in memory, passing messages directly.
/// Returns `(initiator, responder)` outcomes.
pub fn run_in_memory<R: RngCore + CryptoRng>(
    cfg: &ProtocolConfig,
    fa: &[bool],
    fb: &[bool],
    rng: &mut R,
) -> Result<(Outcome, Outcome), FingerprintLengthError> {
    use rand::SeedableRng;
    let mut a = Session::new(Role::Initiator, cfg.clone(), fa, ChaCha20Rng::from_rng(&mut *rng).expect("rng"))?;
    let mut b = Session::new(Role::Responder, cfg.clone(), fb, ChaCha20Rng::from_rng(&mut *rng).expect("rng"))?;
    let now = Duration::ZERO;
    let mut to_b = a.start(now);
    to_b.extend(a.poll(now));
    let mut to_a = b.start(now);
    while !(a.is_terminal() && b.is_terminal()) {
        if to_a.is_empty() && to_b.is_empty() {
            break;
        }
        for m in std::mem::take(&mut to_b) {
            to_a.extend(b.handle(m, now));
            to_a.extend(b.poll(now));
        }
        for m in std::mem::take(&mut to_a) {
            to_b.extend(a.handle(m, now));
            to_b.extend(a.poll(now));
        }
    }
    let oa = a.outcome().cloned().unwrap_or(Outcome::Aborted {
        reason: AbortReason::ProtocolViolation,
        by_peer: false,
    });
    let ob = b.outcome().cloned().unwrap_or(Outcome::Aborted {
        reason: AbortReason::ProtocolViolation,
        by_peer: false,
    });
    Ok((oa, ob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeField;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};

    fn cfg(n: usize, thr: Ratio<u64>, size: SecretSize) -> ProtocolConfig {
        ProtocolConfig::new(n, thr, size, [9; 16]).unwrap()
    }

    fn flip(f: &[bool], t: usize, rng: &mut ChaCha20Rng) -> Vec<bool> {
        let mut g = f.to_vec();
        for i in sample(rng, f.len(), t) {
            g[i] = !g[i];
        }
        g
    }

    #[test]
    fn config_derivation() {
        let c = cfg(48, Ratio::new(35, 48), SecretSize::Bits128);
        assert_eq!((c.d(), c.e()), (22, 13));
        let c = cfg(48, Ratio::new(729, 1000), SecretSize::Bits128);
        assert_eq!((c.d(), c.e()), (22, 13));
        assert!(ProtocolConfig::new(0, Ratio::new(3, 4), SecretSize::Bits128, [0; 16]).is_err());
        assert!(ProtocolConfig::new(8, Ratio::new(1, 2), SecretSize::Bits128, [0; 16]).is_err());
    }

    #[test]
    fn secret_block_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for size in [SecretSize::Bits128, SecretSize::Bits244] {
            for _ in 0..50 {
                let s = random_secret(size, &mut rng);
                let blocks = secret_to_blocks(size, &s);
                assert_eq!(blocks.len(), size.blocks());
                assert_eq!(blocks_to_secret(size, &blocks).unwrap(), s);
            }
        }
        assert!(blocks_to_secret(SecretSize::Bits244, &[-Fp130::one(), Fp130::zero()]).is_none());
    }

    #[test]
    fn identical_fingerprints_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for size in [SecretSize::Bits128, SecretSize::Bits244] {
            let c = cfg(24, Ratio::new(17, 24), size);
            let f: Vec<bool> = (0..24).map(|_| rng.gen()).collect();
            let (a, b) = run_in_memory(&c, &f, &f, &mut rng).unwrap();
            let (ka, kb) = (a.key().unwrap(), b.key().unwrap());
            assert_eq!(ka, kb);
            assert_eq!(ka.bits(), if size == SecretSize::Bits128 { 128 } else { 248 });
        }
    }

    #[test]
    fn errors_within_budget_agree_beyond_gap_abort() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let c = cfg(48, Ratio::new(35, 48), SecretSize::Bits128);
        let f: Vec<bool> = (0..48).map(|_| rng.gen()).collect();
        for t in [0, 1, 6, 13] {
            let g = flip(&f, t, &mut rng);
            let (a, b) = run_in_memory(&c, &f, &g, &mut rng).unwrap();
            assert_eq!(a.key(), b.key(), "t={t}");
            assert!(a.key().is_some(), "t={t}");
        }
        for t in [27, 30, 40, 48] {
            let g = flip(&f, t, &mut rng);
            let (a, b) = run_in_memory(&c, &f, &g, &mut rng).unwrap();
            assert!(a.key().is_none() && b.key().is_none(), "t={t}");
            assert!(matches!(
                b.abort_reason(),
                Some(AbortReason::DecodeFailure | AbortReason::HashMismatch)
            ));
        }
    }

    #[test]
    fn bits244_blocks_use_distinct_masks() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let c = cfg(16, Ratio::new(15, 16), SecretSize::Bits244);
        let f: Vec<bool> = (0..16).map(|_| rng.gen()).collect();
        let mut a = Session::new(Role::Initiator, c.clone(), &f, ChaCha20Rng::seed_from_u64(5)).unwrap();
        let mut b = Session::new(Role::Responder, c, &f, ChaCha20Rng::seed_from_u64(6)).unwrap();
        let pa = a.start(Duration::ZERO);
        b.start(Duration::ZERO);
        let pb = b.handle(pa[0].clone(), Duration::ZERO);
        assert!(a.handle(pb[0].clone(), Duration::ZERO).is_empty());
        let out = a.poll(Duration::ZERO);
        let Message::Commit(com) = &out[0] else { panic!("expected COMMIT") };
        assert_eq!(com.len(), 32);
        // d = 14 of 16 shares: with shared masks the difference of the two
        // blocks would be a low-degree codeword; with independent masks it
        // is not.
        let diff: Vec<Fp130> = (0..16).map(|i| com[i] - com[16 + i]).collect();
        let code = ReedSolomon::new(16, 14).unwrap();
        assert!(code.decode(&diff).is_err());
    }

    #[test]
    fn out_of_order_messages_violate() {
        let c = cfg(8, Ratio::new(7, 8), SecretSize::Bits128);
        let f = vec![true; 8];
        let mut b = Session::new(Role::Responder, c.clone(), &f, ChaCha20Rng::seed_from_u64(7)).unwrap();
        b.start(Duration::ZERO);
        let out = b.handle(Message::ConfirmA([0; 32]), Duration::ZERO);
        assert_eq!(out, vec![Message::Abort(AbortReason::ProtocolViolation)]);
        assert_eq!(b.phase(), Phase::Aborted);
        assert!(!b.holds_secrets());

        let mut a = Session::new(Role::Initiator, c, &f, ChaCha20Rng::seed_from_u64(8)).unwrap();
        a.start(Duration::ZERO);
        assert_eq!(
            a.handle(Message::PakeA(vec![[0; 32]; 8]), Duration::ZERO),
            vec![Message::Abort(AbortReason::ProtocolViolation)]
        );
    }

    #[test]
    fn wrong_pake_length_violates() {
        let c = cfg(8, Ratio::new(7, 8), SecretSize::Bits128);
        let mut b = Session::new(Role::Responder, c, &[false; 8], ChaCha20Rng::seed_from_u64(9)).unwrap();
        b.start(Duration::ZERO);
        let out = b.handle(Message::PakeA(vec![[0; 32]; 7]), Duration::ZERO);
        assert_eq!(out, vec![Message::Abort(AbortReason::ProtocolViolation)]);
    }

    #[test]
    fn confirmation_deadline() {
        let c = cfg(8, Ratio::new(7, 8), SecretSize::Bits128).with_timeout(Duration::from_secs(3));
        let f = vec![true; 8];
        let mut a = Session::new(Role::Initiator, c.clone(), &f, ChaCha20Rng::seed_from_u64(10)).unwrap();
        let mut b = Session::new(Role::Responder, c, &f, ChaCha20Rng::seed_from_u64(11)).unwrap();
        let t0 = Duration::from_secs(100);
        let pa = a.start(t0);
        b.start(t0);
        let pb = b.handle(pa[0].clone(), t0);
        a.handle(pb[0].clone(), t0);
        let out = a.poll(t0);
        assert_eq!(a.deadline(), Some(t0 + Duration::from_secs(3)));
        b.handle(out[0].clone(), t0);
        let cb = b.handle(out[1].clone(), t0);
        assert!(a.poll(t0 + Duration::from_secs(3)).is_empty());
        // CONFIRM_B arrives after the deadline.
        let late = t0 + Duration::from_millis(3001);
        assert_eq!(a.handle(cb[0].clone(), late), vec![Message::Abort(AbortReason::Timeout)]);
        assert_eq!(a.outcome().unwrap().abort_reason(), Some(AbortReason::Timeout));
        assert!(!a.holds_secrets());
    }

    #[test]
    fn peer_abort_is_not_echoed() {
        let c = cfg(8, Ratio::new(7, 8), SecretSize::Bits128);
        let mut a = Session::new(Role::Initiator, c, &[true; 8], ChaCha20Rng::seed_from_u64(12)).unwrap();
        a.start(Duration::ZERO);
        assert!(a.handle(Message::Abort(AbortReason::DecodeFailure), Duration::ZERO).is_empty());
        assert_eq!(
            a.outcome(),
            Some(&Outcome::Aborted {
                reason: AbortReason::DecodeFailure,
                by_peer: true
            })
        );
    }

    #[test]
    fn hashes_are_domain_separated() {
        assert_ne!(hash_secret(&[1, 2, 3], 0), hash_secret(&[1, 2, 3], 1));
    }

    #[test]
    fn negotiation() {
        let h = Hello {
            version: 1,
            nonce: [1; 16],
            n: 48,
            thr_num: 35,
            thr_den: 48,
            secret_bits: 128,
            sensors: 0b0011,
        };
        let mut r = h.clone();
        r.nonce = [2; 16];
        let ca = negotiate(&h, &r, Role::Initiator).unwrap();
        let cb = negotiate(&r, &h, Role::Responder).unwrap();
        assert_eq!(ca, cb);
        assert_ne!(&ca.session_nonce, &h.nonce);
        assert_ne!(&ca.session_nonce, &r.nonce);
        let mut bad = r.clone();
        bad.secret_bits = 244;
        assert_eq!(negotiate(&h, &bad, Role::Initiator), Err(AbortReason::ParamMismatch));
        let mut v2 = r.clone();
        v2.version = 2;
        assert_eq!(negotiate(&h, &v2, Role::Initiator), Err(AbortReason::VersionMismatch));
        // Equal fractions in different terms still match.
        let mut scaled = r;
        scaled.thr_num = 70;
        scaled.thr_den = 96;
        assert!(negotiate(&h, &scaled, Role::Initiator).is_ok());
    }
}
