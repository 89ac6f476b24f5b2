//! Prime fields for the error-correcting commitment.
//!
//! [`Fp130`] is the protocol field, `p = 2^130 − 5`, wide enough to hold a
//! 128-bit secret in one element. [`SmallField`] is a word-sized prime field
//! used for exhaustive oracle tests.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::RngCore;

pub trait PrimeField:
    Copy
    + Eq
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Width of the fixed big-endian encoding.
    const BYTES: usize;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(v: u64) -> Self;
    fn is_zero(&self) -> bool;
    fn inverse(&self) -> Option<Self>;
    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self;
    /// Reduces 32 uniform bytes into the field.
    fn from_uniform_bytes(bytes: &[u8; 32]) -> Self;
    fn to_bytes_be(&self) -> Vec<u8>;
    /// Interprets `BYTES` big-endian bytes, reducing modulo `p`.
    fn from_bytes_be_reduced(bytes: &[u8]) -> Self;

    fn pow(&self, mut e: u128) -> Self {
        let mut base = *self;
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }
}

const P130: [u64; 3] = [0xFFFF_FFFF_FFFF_FFFB, 0xFFFF_FFFF_FFFF_FFFF, 0x3];
const MASK2: u64 = 0x3;

/// `a − b` over three limbs, assuming `a ≥ b`.
fn sub_limbs(a: &[u64; 3], b: &[u64; 3]) -> [u64; 3] {
    let mut out = [0u64; 3];
    let mut borrow = false;
    for i in 0..3 {
        let (r, b1) = a[i].overflowing_sub(b[i]);
        let (r, b2) = r.overflowing_sub(borrow as u64);
        out[i] = r;
        borrow = b1 | b2;
    }
    out
}

/// Element of GF(2^130 − 5), three little-endian 64-bit limbs, always
/// canonical (< p).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp130([u64; 3]);

impl Fp130 {
    pub const MODULUS_HEX: &'static str = "3fffffffffffffffffffffffffffffffb";

    pub fn from_u128(v: u128) -> Self {
        Self([v as u64, (v >> 64) as u64, 0])
    }

    /// Low 128 bits; exact for values below 2^128.
    pub fn to_u128(&self) -> u128 {
        self.0[0] as u128 | (self.0[1] as u128) << 64
    }

    pub fn limbs(&self) -> [u64; 3] {
        self.0
    }

    fn geq_p(l: &[u64; 3]) -> bool {
        l[2] > P130[2] || (l[2] == P130[2] && l[1] == P130[1] && l[0] >= P130[0])
    }

    fn sub_p(l: &mut [u64; 3]) {
        *l = sub_limbs(l, &P130);
    }

    /// Reduces a value below 2^136 (at most 8 bits in the top limb).
    fn reduce_small(mut l: [u64; 3]) -> Self {
        let t = l[2] >> 2;
        l[2] &= MASK2;
        let (r0, c0) = l[0].overflowing_add(5 * t);
        let (r1, c1) = l[1].overflowing_add(c0 as u64);
        l = [r0, r1, l[2] + c1 as u64];
        if Self::geq_p(&l) {
            Self::sub_p(&mut l);
        }
        Self(l)
    }

    /// Reduces a 6-limb product (< 2^260).
    fn reduce_wide(w: [u64; 6]) -> Self {
        // lo = w mod 2^130, hi = w >> 130
        let lo = [w[0], w[1], w[2] & MASK2];
        let hi = [
            (w[2] >> 2) | (w[3] << 62),
            (w[3] >> 2) | (w[4] << 62),
            (w[4] >> 2) | (w[5] << 62),
            w[5] >> 2,
        ];
        // r = lo + 5·hi  (< 2^133)
        let mut r = [0u64; 4];
        let mut carry: u128 = 0;
        for i in 0..4 {
            let l = if i < 3 { lo[i] } else { 0 };
            let v = l as u128 + 5 * hi[i] as u128 + carry;
            r[i] = v as u64;
            carry = v >> 64;
        }
        debug_assert!(r[3] == 0 && carry == 0);
        Self::reduce_small([r[0], r[1], r[2]])
    }
}

impl fmt::Debug for Fp130 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp130(0x{:x}{:016x}{:016x})", self.0[2], self.0[1], self.0[0])
    }
}

impl Add for Fp130 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (r0, c0) = self.0[0].overflowing_add(rhs.0[0]);
        let (r1a, c1a) = self.0[1].overflowing_add(rhs.0[1]);
        let (r1, c1b) = r1a.overflowing_add(c0 as u64);
        let r2 = self.0[2] + rhs.0[2] + (c1a | c1b) as u64;
        let mut l = [r0, r1, r2];
        if Self::geq_p(&l) {
            Self::sub_p(&mut l);
        }
        Self(l)
    }
}

impl Neg for Fp130 {
    type Output = Self;
    fn neg(self) -> Self {
        if self.is_zero() {
            return self;
        }
        Self(sub_limbs(&P130, &self.0))
    }
}

impl Sub for Fp130 {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for Fp130 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let a = self.0;
        let b = rhs.0;
        let mut w = [0u64; 6];
        for i in 0..3 {
            let mut carry: u128 = 0;
            for j in 0..3 {
                let v = a[i] as u128 * b[j] as u128 + w[i + j] as u128 + carry;
                w[i + j] = v as u64;
                carry = v >> 64;
            }
            w[i + 3] = carry as u64;
        }
        Self::reduce_wide(w)
    }
}

macro_rules! assign_ops {
    ($t:ty) => {
        impl AddAssign for $t {
            fn add_assign(&mut self, rhs: Self) {
                *self = *self + rhs;
            }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, rhs: Self) {
                *self = *self - rhs;
            }
        }
        impl MulAssign for $t {
            fn mul_assign(&mut self, rhs: Self) {
                *self = *self * rhs;
            }
        }
    };
}

assign_ops!(Fp130);

impl PrimeField for Fp130 {
    const BYTES: usize = 17;

    fn zero() -> Self {
        Self([0; 3])
    }

    fn one() -> Self {
        Self([1, 0, 0])
    }

    fn from_u64(v: u64) -> Self {
        Self([v, 0, 0])
    }

    fn is_zero(&self) -> bool {
        self.0 == [0; 3]
    }

    fn inverse(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        // a^(p − 2), p − 2 = 2^130 − 7
        let mut acc = Self::one();
        let e_low: u128 = u128::MAX - 6; // low 128 bits of 2^130 − 7
        let mut base = *self;
        for i in 0..130 {
            let bit = if i < 128 { (e_low >> i) & 1 } else { 1 };
            if bit == 1 {
                acc *= base;
            }
            base *= base;
        }
        Some(acc)
    }

    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        loop {
            let l = [rng.next_u64(), rng.next_u64(), rng.next_u64() & MASK2];
            if !Self::geq_p(&l) {
                return Self(l);
            }
        }
    }

    fn from_uniform_bytes(bytes: &[u8; 32]) -> Self {
        let mut w = [0u64; 6];
        for (i, chunk) in bytes.chunks(8).enumerate() {
            w[3 - i] = u64::from_be_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Self::reduce_wide(w)
    }

    fn to_bytes_be(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17);
        out.push(self.0[2] as u8);
        out.extend_from_slice(&self.0[1].to_be_bytes());
        out.extend_from_slice(&self.0[0].to_be_bytes());
        out
    }

    fn from_bytes_be_reduced(bytes: &[u8]) -> Self {
        assert_eq!(bytes.len(), Self::BYTES, "Fp130 encodings are 17 bytes");
        let top = bytes[0] as u64;
        let hi = u64::from_be_bytes(bytes[1..9].try_into().expect("8 bytes"));
        let lo = u64::from_be_bytes(bytes[9..17].try_into().expect("8 bytes"));
        Self::reduce_small([lo, hi, top])
    }
}

/// GF(P) for a word-sized prime `P < 2^32`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SmallField<const P: u64>(u64);

impl<const P: u64> SmallField<P> {
    pub const fn new(v: u64) -> Self {
        Self(v % P)
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

impl<const P: u64> fmt::Debug for SmallField<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const P: u64> Add for SmallField<P> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self((self.0 + rhs.0) % P)
    }
}

impl<const P: u64> Sub for SmallField<P> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self((self.0 + P - rhs.0) % P)
    }
}

impl<const P: u64> Mul for SmallField<P> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0 % P)
    }
}

impl<const P: u64> Neg for SmallField<P> {
    type Output = Self;
    fn neg(self) -> Self {
        Self((P - self.0) % P)
    }
}

impl<const P: u64> AddAssign for SmallField<P> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const P: u64> SubAssign for SmallField<P> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const P: u64> MulAssign for SmallField<P> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const P: u64> PrimeField for SmallField<P> {
    const BYTES: usize = 8;

    fn zero() -> Self {
        Self(0)
    }

    fn one() -> Self {
        Self(1 % P)
    }

    fn from_u64(v: u64) -> Self {
        Self(v % P)
    }

    fn is_zero(&self) -> bool {
        self.0 == 0
    }

    fn inverse(&self) -> Option<Self> {
        if self.0 == 0 {
            None
        } else {
            Some(self.pow((P - 2) as u128))
        }
    }

    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        // Rejection sampling keeps the distribution exactly uniform.
        let zone = u64::MAX - u64::MAX % P;
        loop {
            let v = rng.next_u64();
            if v < zone {
                return Self(v % P);
            }
        }
    }

    fn from_uniform_bytes(bytes: &[u8; 32]) -> Self {
        let v = bytes.iter().fold(0u128, |acc, &b| ((acc << 8) | b as u128) % P as u128);
        Self(v as u64)
    }

    fn to_bytes_be(&self) -> Vec<u8> {
        self.0.to_be_bytes().to_vec()
    }

    fn from_bytes_be_reduced(bytes: &[u8]) -> Self {
        Self(u64::from_be_bytes(bytes.try_into().expect("8-byte encoding")) % P)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> BigUint {
        (BigUint::from(1u8) << 130u32) - 5u32
    }

    fn big(x: Fp130) -> BigUint {
        BigUint::from_bytes_be(&x.to_bytes_be())
    }

    fn from_big(x: &BigUint) -> Fp130 {
        let mut b = (x % p()).to_bytes_be();
        while b.len() < 17 {
            b.insert(0, 0);
        }
        Fp130::from_bytes_be_reduced(&b)
    }

    fn arb_fp() -> impl Strategy<Value = Fp130> {
        prop_oneof![
            any::<[u8; 32]>().prop_map(|b| Fp130::from_uniform_bytes(&b)),
            (0u64..16).prop_map(|k| -Fp130::from_u64(k)),
            (0u64..16).prop_map(Fp130::from_u64),
        ]
    }

    #[test]
    fn modulus_constant() {
        assert_eq!(format!("{:x}", p()), Fp130::MODULUS_HEX);
        assert_eq!(-Fp130::one() + Fp130::one(), Fp130::zero());
        let top = from_big(&(p() - 1u32));
        assert_eq!(big(top), p() - 1u32);
        assert_eq!(top * top, Fp130::one());
    }

    #[test]
    fn reduction_of_non_canonical_encodings() {
        let all_ones = [0xFFu8; 17];
        let expect = BigUint::from_bytes_be(&all_ones) % p();
        assert_eq!(big(Fp130::from_bytes_be_reduced(&all_ones)), expect);
        let wide = [0xFFu8; 32];
        assert_eq!(big(Fp130::from_uniform_bytes(&wide)), BigUint::from_bytes_be(&wide) % p());
    }

    #[test]
    fn random_is_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = Fp130::random(&mut rng);
            assert!(big(x) < p());
        }
    }

    #[test]
    fn small_field_inverse_table() {
        type F = SmallField<257>;
        for v in 1..257 {
            let x = F::from_u64(v);
            assert_eq!(x * x.inverse().unwrap(), F::one());
        }
        assert_eq!(F::zero().inverse(), None);
    }

    proptest! {
        #[test]
        fn fp130_matches_bigint(a in arb_fp(), b in arb_fp()) {
            let (ba, bb) = (big(a), big(b));
            prop_assert_eq!(big(a + b), (&ba + &bb) % p());
            prop_assert_eq!(big(a * b), (&ba * &bb) % p());
            prop_assert_eq!(big(a - b), (&ba + p() - &bb) % p());
            prop_assert_eq!(big(-a), (p() - &ba) % p());
        }

        #[test]
        fn fp130_inverse(a in arb_fp()) {
            prop_assume!(!a.is_zero());
            prop_assert_eq!(a * a.inverse().unwrap(), Fp130::one());
        }

        #[test]
        fn fp130_bytes_round_trip(a in arb_fp()) {
            prop_assert_eq!(Fp130::from_bytes_be_reduced(&a.to_bytes_be()), a);
        }

        #[test]
        fn u128_round_trip(v in any::<u128>()) {
            prop_assert_eq!(Fp130::from_u128(v).to_u128(), v);
        }
    }
}
