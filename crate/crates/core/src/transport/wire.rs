//! Frame codec. A frame is a 4-byte big-endian length (counting the type
//! byte and payload), one type byte, then the payload. See `WIRE.md`.

use thiserror::Error;

use crate::field::{Fp130, PrimeField};
use crate::pake::ELEMENT_BYTES;
use crate::protocol::{AbortReason, Hello, Message, NONCE_BYTES};

pub const MAX_FRAME: usize = 1 << 20;
pub const HELLO_LEN: usize = 1 + NONCE_BYTES + 2 + 2 + 2 + 2 + 1;

pub const HELLO: u8 = 0x01;
pub const PAKE_A: u8 = 0x02;
pub const PAKE_B: u8 = 0x03;
pub const COMMIT: u8 = 0x04;
pub const CONFIRM_A: u8 = 0x05;
pub const CONFIRM_B: u8 = 0x06;
pub const ABORT: u8 = 0x0F;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the 1 MiB limit")]
    FrameTooLarge(usize),
    #[error("truncated frame")]
    Truncated,
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("malformed {kind} payload: {why}")]
    Malformed { kind: &'static str, why: &'static str },
}

fn malformed(kind: &'static str, why: &'static str) -> FrameError {
    FrameError::Malformed { kind, why }
}

pub fn encode_payload(msg: &Message) -> Vec<u8> {
    match msg {
        Message::Hello(h) => {
            let mut p = Vec::with_capacity(HELLO_LEN);
            p.push(h.version);
            p.extend_from_slice(&h.nonce);
            p.extend_from_slice(&h.n.to_be_bytes());
            p.extend_from_slice(&h.thr_num.to_be_bytes());
            p.extend_from_slice(&h.thr_den.to_be_bytes());
            p.extend_from_slice(&h.secret_bits.to_be_bytes());
            p.push(h.sensors);
            p
        }
        Message::PakeA(v) | Message::PakeB(v) => v.concat(),
        Message::Commit(v) => v.iter().flat_map(|x| x.to_bytes_be()).collect(),
        Message::ConfirmA(h) | Message::ConfirmB(h) => h.to_vec(),
        Message::Abort(r) => vec![r.code()],
    }
}

pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, FrameError> {
    let payload = encode_payload(msg);
    let len = payload.len() + 1;
    if len > MAX_FRAME {
        return Err(FrameError::FrameTooLarge(len));
    }
    let mut out = Vec::with_capacity(4 + len);
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.push(msg.type_byte());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_payload(ty: u8, p: &[u8]) -> Result<Message, FrameError> {
    let fixed32 = |kind| -> Result<[u8; 32], FrameError> { p.try_into().map_err(|_| malformed(kind, "expected 32 bytes")) };
    let elements = |kind| -> Result<Vec<[u8; 32]>, FrameError> {
        if p.is_empty() || !p.len().is_multiple_of(ELEMENT_BYTES) {
            return Err(malformed(kind, "length is not a positive multiple of 32"));
        }
        Ok(p.chunks(ELEMENT_BYTES).map(|c| c.try_into().expect("exact chunk")).collect())
    };
    Ok(match ty {
        HELLO => {
            if p.len() != HELLO_LEN {
                return Err(malformed("HELLO", "expected 26 bytes"));
            }
            let u16_at = |i: usize| u16::from_be_bytes([p[i], p[i + 1]]);
            let o = 1 + NONCE_BYTES;
            Message::Hello(Hello {
                version: p[0],
                nonce: p[1..o].try_into().expect("16 bytes"),
                n: u16_at(o),
                thr_num: u16_at(o + 2),
                thr_den: u16_at(o + 4),
                secret_bits: u16_at(o + 6),
                sensors: p[o + 8],
            })
        }
        PAKE_A => Message::PakeA(elements("PAKE_A")?),
        PAKE_B => Message::PakeB(elements("PAKE_B")?),
        COMMIT => {
            if p.is_empty() || !p.len().is_multiple_of(Fp130::BYTES) {
                return Err(malformed("COMMIT", "length is not a positive multiple of 17"));
            }
            Message::Commit(p.chunks(Fp130::BYTES).map(Fp130::from_bytes_be_reduced).collect())
        }
        CONFIRM_A => Message::ConfirmA(fixed32("CONFIRM_A")?),
        CONFIRM_B => Message::ConfirmB(fixed32("CONFIRM_B")?),
        ABORT => {
            let [code] = p else {
                return Err(malformed("ABORT", "expected 1 byte"));
            };
            Message::Abort(AbortReason::from_code(*code).ok_or(malformed("ABORT", "unknown reason code"))?)
        }
        t => return Err(FrameError::UnknownType(t)),
    })
}

/// Length of the complete frame at the start of `buf`, if one is buffered.
pub fn frame_len(buf: &[u8]) -> Result<Option<usize>, FrameError> {
    if buf.len() < 4 {
        return Ok(None);
    }
    let len = u32::from_be_bytes(buf[..4].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::FrameTooLarge(len));
    }
    if len == 0 {
        return Err(FrameError::Truncated);
    }
    Ok((buf.len() >= 4 + len).then_some(4 + len))
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, FrameError> {
    match frame_len(bytes)? {
        Some(n) if n == bytes.len() => decode_payload(bytes[4], &bytes[5..]),
        Some(_) => Err(malformed("frame", "trailing bytes after the declared length")),
        None => Err(FrameError::Truncated),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn abort_bytes() {
        let f = encode_frame(&Message::Abort(AbortReason::ParamMismatch)).unwrap();
        assert_eq!(f, vec![0x00, 0x00, 0x00, 0x02, 0x0F, 0x01]);
        assert_eq!(decode_frame(&f).unwrap(), Message::Abort(AbortReason::ParamMismatch));
    }

    #[test]
    fn limits_and_errors() {
        let mut big = vec![0x00, 0x20, 0x00, 0x00, 0x02];
        big.extend([0; 8]);
        assert_eq!(decode_frame(&big), Err(FrameError::FrameTooLarge(2 << 20)));
        assert_eq!(decode_frame(&[0, 0, 0, 5, 0x0F]), Err(FrameError::Truncated));
        assert_eq!(decode_frame(&[0, 0]), Err(FrameError::Truncated));
        assert_eq!(decode_frame(&[0, 0, 0, 1, 0x07]), Err(FrameError::UnknownType(0x07)));
        assert!(matches!(decode_frame(&[0, 0, 0, 2, 0x0F, 0x99]), Err(FrameError::Malformed { .. })));
        assert!(matches!(decode_frame(&[0, 0, 0, 3, 0x02, 1, 2]), Err(FrameError::Malformed { .. })));
        let huge = Message::PakeA(vec![[0; 32]; MAX_FRAME / 32]);
        assert!(matches!(encode_frame(&huge), Err(FrameError::FrameTooLarge(_))));
    }

    #[test]
    fn hello_layout() {
        let h = Hello {
            version: 1,
            nonce: [0xAB; 16],
            n: 0x0102,
            thr_num: 35,
            thr_den: 48,
            secret_bits: 128,
            sensors: 0x0F,
        };
        let f = encode_frame(&Message::Hello(h.clone())).unwrap();
        assert_eq!(f.len(), 4 + 1 + 26);
        assert_eq!(&f[..5], &[0, 0, 0, 27, 0x01]);
        assert_eq!(&f[22..24], &[0x01, 0x02]);
        assert_eq!(decode_frame(&f).unwrap(), Message::Hello(h));
    }

    fn arb_message() -> impl Strategy<Value = Message> {
        let elems = proptest::collection::vec(any::<[u8; 32]>(), 1..40);
        prop_oneof![
            (any::<u8>(), any::<[u8; 16]>(), any::<u16>(), any::<u16>(), any::<u16>(), any::<u16>(), any::<u8>()).prop_map(
                |(version, nonce, n, thr_num, thr_den, secret_bits, sensors)| Message::Hello(Hello {
                    version,
                    nonce,
                    n,
                    thr_num,
                    thr_den,
                    secret_bits,
                    sensors
                })
            ),
            elems.clone().prop_map(Message::PakeA),
            elems.prop_map(Message::PakeB),
            proptest::collection::vec(any::<[u8; 32]>().prop_map(|b| Fp130::from_uniform_bytes(&b)), 1..60)
                .prop_map(Message::Commit),
            any::<[u8; 32]>().prop_map(Message::ConfirmA),
            any::<[u8; 32]>().prop_map(Message::ConfirmB),
            (1u8..=6).prop_map(|c| Message::Abort(AbortReason::from_code(c).unwrap())),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(m in arb_message()) {
            let f = encode_frame(&m).unwrap();
            prop_assert_eq!(f.len(), 4 + u32::from_be_bytes(f[..4].try_into().unwrap()) as usize);
            prop_assert_eq!(decode_frame(&f).unwrap(), m);
        }

        #[test]
        fn decoding_arbitrary_bytes_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = decode_frame(&bytes);
        }
    }
}
