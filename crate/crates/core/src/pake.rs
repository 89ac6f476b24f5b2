//! Per-bit entropy amplification: one EKE-style Diffie-Hellman exchange per
//! fingerprint bit, batched into a single round trip.
//!
//! For bit `i` each side samples an ephemeral scalar, encodes `x·G` in the
//! Ristretto group and masks the 32-byte encoding with a keystream derived
//! from its own bit. The receiver unmasks with *its* bit: equal bits recover
//! the peer's element, different bits yield an unrelated encoding that is
//! mapped into the group deterministically. Both sides then hash the shared
//! element into a 32-byte key, so keys agree exactly where the bits agree.
//!
//! This is a prototype instantiation: masking by a hash keystream stands in
//! for the ideal cipher that formal EKE proofs assume.

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256, Sha512};
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::field::PrimeField;

pub const ELEMENT_BYTES: usize = 32;
pub const KDF_PREFIX: &[u8] = b"fastzip/v1/";

/// Which side produced a PAKE message; part of the masking key so the two
/// directions never share a keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Initiator,
    Responder,
}

impl Role {
    pub fn byte(self) -> u8 {
        match self {
            Self::Initiator => 0x41,
            Self::Responder => 0x42,
        }
    }

    pub fn peer(self) -> Self {
        match self {
            Self::Initiator => Self::Responder,
            Self::Responder => Self::Initiator,
        }
    }
}

/// HKDF-SHA256 with the session nonce as salt. `parts` are length-prefixed
/// (u16 big-endian) and concatenated to form the input key material; the
/// label, prefixed with `fastzip/v1/`, is the info string.
pub fn kdf(label: &str, nonce: &[u8], parts: &[&[u8]], out: &mut [u8]) {
    let mut ikm = Vec::with_capacity(parts.iter().map(|p| p.len() + 2).sum());
    for p in parts {
        ikm.extend_from_slice(&(p.len() as u16).to_be_bytes());
        ikm.extend_from_slice(p);
    }
    let hk = Hkdf::<Sha256>::new(Some(nonce), &ikm);
    ikm.zeroize();
    let mut info = KDF_PREFIX.to_vec();
    info.extend_from_slice(label.as_bytes());
    hk.expand(&info, out).expect("output length within HKDF limits");
}

fn pad(nonce: &[u8], role: Role, index: u32, bit: bool) -> [u8; 32] {
    let mut out = [0u8; 32];
    kdf("pake-pw", nonce, &[&[role.byte()], &index.to_be_bytes(), &[bit as u8]], &mut out);
    out
}

fn xor32(a: &[u8; 32], b: &[u8; 32]) -> [u8; 32] {
    let mut o = [0u8; 32];
    for i in 0..32 {
        o[i] = a[i] ^ b[i];
    }
    o
}

/// Maps any 32 bytes to a group element: the canonical decoding when it
/// exists, otherwise a hash-to-group of the bytes. Never fails, so a wrong
/// bit is indistinguishable from a right one at this layer.
pub fn coerce_element(bytes: &[u8; 32]) -> RistrettoPoint {
    if let Some(p) = CompressedRistretto(*bytes).decompress() {
        return p;
    }
    let mut h = Sha512::new();
    h.update(KDF_PREFIX);
    h.update(b"coerce");
    h.update(bytes);
    let wide: [u8; 64] = h.finalize().into();
    RistrettoPoint::from_uniform_bytes(&wide)
}

/// Per-bit shared keys, 32 bytes each.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct KeyVector(Vec<[u8; 32]>);

impl std::fmt::Debug for KeyVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyVector(len={})", self.0.len())
    }
}

impl KeyVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn key(&self, i: usize) -> &[u8; 32] {
        &self.0[i]
    }

    /// Field mask for position `i` of commitment block `block`; distinct
    /// blocks get independent masks from the same PAKE key.
    pub fn mask<F: PrimeField>(&self, i: usize, block: u8) -> F {
        let hk = Hkdf::<Sha256>::from_prk(&self.0[i]).expect("32-byte PRK");
        let mut info = KDF_PREFIX.to_vec();
        info.extend_from_slice(b"mask");
        info.push(block);
        let mut out = [0u8; 32];
        hk.expand(&info, &mut out).expect("32-byte output");
        let f = F::from_uniform_bytes(&out);
        out.zeroize();
        f
    }
}

fn shared_key(nonce: &[u8], index: u32, shared: &RistrettoPoint) -> [u8; 32] {
    let mut out = [0u8; 32];
    kdf("pake-key", nonce, &[&index.to_be_bytes(), shared.compress().as_bytes()], &mut out);
    out
}

/// Ephemeral scalars of one batch, wiped on drop.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct Ephemeral(Vec<Scalar>);

/// Masked outgoing messages for `bits` from side `role`.
pub fn start<R: RngCore + CryptoRng>(bits: &[bool], nonce: &[u8], role: Role, rng: &mut R) -> (Ephemeral, Vec<[u8; 32]>) {
    let mut scalars = Vec::with_capacity(bits.len());
    let mut msgs = Vec::with_capacity(bits.len());
    for (i, &b) in bits.iter().enumerate() {
        let x = Scalar::random(rng);
        let enc = RistrettoPoint::mul_base(&x).compress().to_bytes();
        msgs.push(xor32(&enc, &pad(nonce, role, i as u32, b)));
        scalars.push(x);
    }
    (Ephemeral(scalars), msgs)
}

/// Unmasks the peer's messages with our own bits and derives the keys.
pub fn finish(bits: &[bool], nonce: &[u8], own_role: Role, eph: &Ephemeral, peer_msgs: &[[u8; 32]]) -> KeyVector {
    assert_eq!(bits.len(), peer_msgs.len());
    assert_eq!(bits.len(), eph.0.len());
    let peer = own_role.peer();
    let keys = bits
        .iter()
        .zip(peer_msgs)
        .zip(&eph.0)
        .enumerate()
        .map(|(i, ((&b, m), x))| {
            let elem = coerce_element(&xor32(m, &pad(nonce, peer, i as u32, b)));
            shared_key(nonce, i as u32, &(x * elem))
        })
        .collect();
    KeyVector(keys)
}

/// Responder side in one step: answer the initiator's batch and derive keys.
pub fn respond<R: RngCore + CryptoRng>(
    bits: &[bool],
    nonce: &[u8],
    peer_msgs: &[[u8; 32]],
    rng: &mut R,
) -> (Vec<[u8; 32]>, KeyVector) {
    let (eph, msgs) = start(bits, nonce, Role::Responder, rng);
    let keys = finish(bits, nonce, Role::Responder, &eph, peer_msgs);
    (msgs, keys)
}
