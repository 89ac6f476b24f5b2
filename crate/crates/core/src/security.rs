//! Security sizing: offline-guessing probability, fingerprint sizes,
//! brute-force complexity of the ambiguity gap, fuzzy-commitment sizing and
//! pairing-time arithmetic.
//!
//! Everything that could suffer from rounding is computed with big integers
//! and exact fractions; only the final `log2` values are floats.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::quantizer::fusion_name;
use crate::signal::Modality;

pub type Fraction = Ratio<u64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SecurityError {
    #[error("similarity threshold must exceed 1/2")]
    ThresholdTooLow,
    #[error("threshold must not exceed 1")]
    ThresholdTooHigh,
    #[error("no finite fingerprint size reaches the target at thresholds of 3/4 or below")]
    NoFiniteSize,
    #[error("fewer correct parts ({i_correct}) than needed to decode ({d})")]
    AttackImpossible { i_correct: u64, d: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// Which tail the offline-guessing sum starts at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// `Σ_{i=m}^{n}`
    Inclusive,
    /// `Σ_{i=m+1}^{n}`
    #[default]
    Exclusive,
}

impl FromStr for Convention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inclusive" => Ok(Self::Inclusive),
            "exclusive" => Ok(Self::Exclusive),
            _ => Err(format!("unknown convention {s:?} (inclusive|exclusive)")),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Inclusive => "inclusive",
            Self::Exclusive => "exclusive",
        })
    }
}

/// A probability of the form `numerator / 2^exp`, kept exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicProbability {
    pub numerator: BigUint,
    pub exp: u32,
}

impl DyadicProbability {
    pub fn log2(&self) -> f64 {
        if self.numerator.is_zero() {
            return f64::NEG_INFINITY;
        }
        log2_big(&self.numerator) - self.exp as f64
    }

    pub fn to_ratio(&self) -> Ratio<BigUint> {
        Ratio::new(self.numerator.clone(), BigUint::one() << self.exp)
    }

    /// `self < 2^e` for a (possibly fractional) exponent, decided exactly for
    /// integral `e` and via the float log otherwise.
    pub fn below_pow2(&self, e: f64) -> bool {
        if e.fract() == 0.0 {
            let shift = self.exp as i64 + e as i64;
            if shift < 0 {
                return false;
            }
            return self.numerator < (BigUint::one() << shift as u64);
        }
        self.log2() < e
    }
}

impl fmt::Display for DyadicProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.exp)
    }
}

/// `log2` of a big integer, accurate to double precision.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(0.0);
    top.log2() + shift as f64
}

/// Parses `0.95`, `95%`, `95.0%` or `17/24` into an exact fraction.
pub fn parse_fraction(s: &str) -> Result<Fraction, String> {
    let s = s.trim();
    let bad = || format!("not a fraction: {s:?}");
    if let Some((a, b)) = s.split_once('/') {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(a, b));
    }
    let (body, scale) = match s.strip_suffix('%') {
        Some(b) => (b.trim(), 100u64),
        None => (s, 1u64),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac.len() > 12 {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int_v: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    Ok(Ratio::new(int_v * den + frac_v, den * scale))
}

fn check_threshold(thr: Fraction) -> Result<(), SecurityError> {
    if thr <= Ratio::new(1, 2) {
        return Err(SecurityError::ThresholdTooLow);
    }
    if thr > Ratio::one() {
        return Err(SecurityError::ThresholdTooHigh);
    }
    Ok(())
}

/// `⌈(2·thr − 1)·n⌉`, the number of parts needed to decode.
pub fn decode_parts(n: u64, thr: Fraction) -> u64 {
    let (p, q) = (*thr.numer() as u128, *thr.denom() as u128);
    let num = (2 * p).saturating_sub(q) * n as u128;
    num.div_ceil(q) as u64
}

/// `⌈thr·n⌉`.
pub fn matching_parts(n: u64, thr: Fraction) -> u64 {
    ((*thr.numer() as u128 * n as u128).div_ceil(*thr.denom() as u128)) as u64
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// `Σ_{i=from}^{n} C(n, i)`.
pub fn binomial_tail(n: u64, from: u64) -> BigUint {
    if from > n {
        return BigUint::zero();
    }
    // Walk down from C(n, n) = 1 to C(n, from).
    let mut c = BigUint::one();
    let mut sum = BigUint::one();
    for i in (from..n).rev() {
        // C(n, i) = C(n, i + 1)·(i + 1)/(n − i)
        c = c * (i + 1) / (n - i);
        sum += &c;
    }
    sum
}

/// Probability that an offline guess of `n` uniform bits matches in at least
/// `m = ⌈(2·thr − 1)·n⌉` positions (inclusive) or more than `m` (exclusive).
pub fn offline_guess_probability(n: u64, thr: Fraction, convention: Convention) -> Result<DyadicProbability, SecurityError> {
    check_threshold(thr)?;
    if n == 0 {
        return Err(SecurityError::InvalidArgument("n must be positive"));
    }
    let m = decode_parts(n, thr);
    let from = match convention {
        Convention::Inclusive => m,
        Convention::Exclusive => m + 1,
    };
    Ok(DyadicProbability {
        numerator: binomial_tail(n, from),
        exp: n as u32,
    })
}

/// Float screen for `log2 Σ_{i≥from} C(n,i)/2^n`, used only to skip sizes
/// that are far from the target before the exact check.
fn approx_tail_log2(n: u64, from: u64) -> f64 {
    if from > n {
        return f64::NEG_INFINITY;
    }
    let mut ln_c = 0.0f64; // ln C(n, n)
    let mut terms = vec![0.0f64];
    for i in (from..n).rev() {
        ln_c += ((i + 1) as f64).ln() - ((n - i) as f64).ln();
        terms.push(ln_c);
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + s.ln()) / std::f64::consts::LN_2 - n as f64
}

/// Smallest `n` (a multiple of `granularity`) whose offline-guess probability
/// is below `2^target_log2`.
pub fn min_fingerprint_bits(
    thr: Fraction,
    target_log2: f64,
    granularity: u64,
    convention: Convention,
) -> Result<u64, SecurityError> {
    check_threshold(thr)?;
    if thr <= Ratio::new(3, 4) {
        return Err(SecurityError::NoFiniteSize);
    }
    if granularity == 0 {
        return Err(SecurityError::InvalidArgument("granularity must be positive"));
    }
    let mut n = granularity;
    loop {
        let m = decode_parts(n, thr);
        // Sizes where every bit must match tolerate no error at all; the
        // exclusive tail is trivially empty there.
        if m >= n {
            n += granularity;
            continue;
        }
        let from = match convention {
            Convention::Inclusive => m,
            Convention::Exclusive => m + 1,
        };
        if approx_tail_log2(n, from) < target_log2 + 1e-6 {
            let p = offline_guess_probability(n, thr, convention)?;
            if p.below_pow2(target_log2) {
                return Ok(n);
            }
        }
        n += granularity;
        if n > 1 << 22 {
            return Err(SecurityError::NoFiniteSize);
        }
    }
}

/// `x·(x−1)·…·(x−k+1)`
pub fn falling_factorial(x: u64, k: u64) -> BigUint {
    if k > x {
        return BigUint::zero();
    }
    (0..k).fold(BigUint::one(), |acc, j| acc * (x - j))
}

/// Expected decode attempts, in `log2`, when the attacker guesses which `d`
/// of `n` parts are correct while `i_correct` of them actually are.
pub fn brute_force_complexity(n: u64, d: u64, i_correct: u64) -> Result<f64, SecurityError> {
    if d > n || i_correct > n {
        return Err(SecurityError::InvalidArgument("need d, i_correct <= n"));
    }
    if i_correct < d {
        return Err(SecurityError::AttackImpossible { i_correct, d });
    }
    Ok(log2_big(&falling_factorial(n, d)) - log2_big(&falling_factorial(i_correct, d)))
}

/// The closed-form lower bound `n^{m̲}/(n−m)^{m̲}` in `log2`; `None` where
/// the denominator vanishes (`m > n − m`).
pub fn literal_complexity_bound(n: u64, m: u64) -> Option<f64> {
    if m > n || m > n - m {
        return None;
    }
    Some(log2_big(&falling_factorial(n, m)) - log2_big(&falling_factorial(n - m, m)))
}

/// Minimum brute-force complexity over the ambiguity interval
/// `i ∈ [d, ⌈thr·n⌉)`, with the `i` attaining it.
pub fn complexity_floor(n: u64, thr: Fraction) -> Result<Option<(u64, f64)>, SecurityError> {
    check_threshold(thr)?;
    let d = decode_parts(n, thr);
    let hi = matching_parts(n, thr);
    let mut best: Option<(u64, f64)> = None;
    for i in d..hi {
        let c = brute_force_complexity(n, d, i)?;
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((i, c));
        }
    }
    Ok(best)
}

/// Fuzzy-commitment fingerprint size accounting for entropy loss:
/// `⌈t + 2·(1 − thr)·t⌉`.
pub fn fuzzy_commitment_bits(thr: Fraction, target: u64) -> Result<u64, SecurityError> {
    check_threshold(thr)?;
    let loss = (Ratio::one() - thr) * Ratio::from_integer(2 * target);
    Ok(target + loss.ceil().to_integer())
}

/// `⌈required / bits_per_window⌉ · window_len`.
pub fn pairing_time(required_bits: u64, bits_per_window: u64, window_len: u64) -> Result<u64, SecurityError> {
    if required_bits == 0 || bits_per_window == 0 || window_len == 0 {
        return Err(SecurityError::InvalidArgument("pairing time inputs must be positive"));
    }
    Ok(required_bits.div_ceil(bits_per_window) * window_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityProfile {
    pub thr: Fraction,
    pub n: u64,
    pub m: u64,
    pub p_inclusive: DyadicProbability,
    pub p_exclusive: DyadicProbability,
    /// `(i, log2 C)` minimising the complexity over the ambiguity interval.
    pub complexity_floor: Option<(u64, f64)>,
    pub literal_bound: Option<f64>,
}

impl SecurityProfile {
    pub fn compute(n: u64, thr: Fraction) -> Result<Self, SecurityError> {
        let m = decode_parts(n, thr);
        Ok(Self {
            thr,
            n,
            m,
            p_inclusive: offline_guess_probability(n, thr, Convention::Inclusive)?,
            p_exclusive: offline_guess_probability(n, thr, Convention::Exclusive)?,
            complexity_floor: complexity_floor(n, thr)?,
            literal_bound: literal_complexity_bound(n, m),
        })
    }

    pub fn p(&self, c: Convention) -> &DyadicProbability {
        match c {
            Convention::Inclusive => &self.p_inclusive,
            Convention::Exclusive => &self.p_exclusive,
        }
    }
}

pub const TABLE1_ROWS: [(u64, u64); 6] = [(95, 40), (90, 60), (85, 80), (80, 100), (75, 120), (70, 140)];

pub fn table1() -> Vec<SecurityProfile> {
    TABLE1_ROWS
        .iter()
        .map(|&(pct, n)| SecurityProfile::compute(n, Ratio::new(pct, 100)).expect("table thresholds are valid"))
        .collect()
}

/// Rounds to 0.1 % with ties going down, the precision thresholds are
/// quoted at (15/16 → 93.7 %, 11/12 → 91.7 %).
pub fn display_threshold(thr: Fraction) -> Fraction {
    let scaled = thr * Ratio::from_integer(1000);
    let floor = scaled.floor();
    let r = if scaled - floor > Ratio::new(1, 2) { floor + Ratio::one() } else { floor };
    r / Ratio::from_integer(1000)
}

pub fn percent(thr: Fraction) -> f64 {
    *thr.numer() as f64 * 100.0 / *thr.denom() as f64
}

/// Offline-safe fPAKE fingerprint size for an arbitrary threshold:
/// piecewise-linear in the table-1 sizes, rounded up to 10 bits.
pub fn fpake_bits_for_threshold(thr: Fraction) -> u64 {
    let rows: Vec<(Fraction, u64)> = TABLE1_ROWS.iter().map(|&(p, n)| (Ratio::new(p, 100), n)).collect();
    if thr >= rows[0].0 {
        return rows[0].1;
    }
    for w in rows.windows(2) {
        let ((t_hi, n_hi), (t_lo, n_lo)) = (w[0], w[1]);
        if thr >= t_lo {
            // n = n_hi + (t_hi − thr)/(t_hi − t_lo)·(n_lo − n_hi)
            let frac = (t_hi - thr) / (t_hi - t_lo);
            let n = Ratio::from_integer(n_hi) + frac * Ratio::from_integer(n_lo - n_hi);
            return n.ceil().to_integer().div_ceil(10) * 10;
        }
    }
    rows[rows.len() - 1].1
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingBudget {
    pub name: String,
    pub modalities: Vec<Modality>,
    pub threshold: Fraction,
    pub fpake_bits: u64,
    pub fcom_bits: u64,
    pub bits_per_window: u64,
    pub window_len: u64,
    pub fpake_time: u64,
    pub fcom_time: u64,
}

/// Bits a modality contributes per window.
pub fn bits_per_window(m: Modality) -> u64 {
    match m {
        Modality::Acv | Modality::Ach => 24,
        Modality::Gyr => 16,
        Modality::Bar => 12,
    }
}

/// Threshold as quoted for a modality set: per-modality thresholds are
/// rounded to 0.1 % and the bit-weighted mean of those is rounded again.
pub fn quoted_threshold(mods: &[Modality], per_modality: &crate::quantizer::SimilarityThresholds) -> Fraction {
    let total: u64 = mods.iter().map(|&m| bits_per_window(m)).sum();
    let weighted = mods
        .iter()
        .map(|&m| display_threshold(per_modality.get(m)) * Ratio::from_integer(bits_per_window(m)))
        .fold(Ratio::zero(), |a, b| a + b);
    display_threshold(weighted / Ratio::from_integer(total))
}

pub fn pairing_budget(
    mods: &[Modality],
    per_modality: &crate::quantizer::SimilarityThresholds,
    target_bits: u64,
) -> Result<PairingBudget, SecurityError> {
    if mods.is_empty() {
        return Err(SecurityError::InvalidArgument("no modalities"));
    }
    let threshold = quoted_threshold(mods, per_modality);
    let bpw: u64 = mods.iter().map(|&m| bits_per_window(m)).sum();
    let wl = mods.iter().map(|m| m.window_secs() as u64).max().unwrap_or(10);
    let fpake_bits = fpake_bits_for_threshold(threshold);
    let fcom_bits = fuzzy_commitment_bits(threshold, target_bits)?;
    Ok(PairingBudget {
        name: fusion_name(mods),
        modalities: mods.to_vec(),
        threshold,
        fpake_bits,
        fcom_bits,
        bits_per_window: bpw,
        window_len: wl,
        fpake_time: pairing_time(fpake_bits, bpw, wl)?,
        fcom_time: pairing_time(fcom_bits, bpw, wl)?,
    })
}

/// All fifteen modality combinations, singles first.
pub fn modality_combinations() -> Vec<Vec<Modality>> {
    let mut out: Vec<Vec<Modality>> = (1u8..16)
        .map(|mask| Modality::ALL.iter().copied().filter(|m| mask & (1 << m.index()) != 0).collect())
        .collect();
    out.sort_by_key(|v: &Vec<Modality>| (v.len(), v.iter().map(|m| m.index()).collect::<Vec<_>>()));
    out
}

pub fn table2(per_modality: &crate::quantizer::SimilarityThresholds, target_bits: u64) -> Vec<PairingBudget> {
    modality_combinations()
        .iter()
        .map(|mods| pairing_budget(mods, per_modality, target_bits).expect("non-empty combination"))
        .collect()
}

/// Checks `Σ_{i=0}^{n} C(n, i) = 2^n`.
pub fn binomial_row_sums_to_power(n: u64) -> bool {
    binomial_tail(n, 0) == BigUint::one() << n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::SimilarityThresholds;
    use proptest::prelude::*;

    fn pct(p: u64) -> Fraction {
        Ratio::new(p, 100)
    }

    /// Direct Σ C(n,i) with independently computed binomials.
    fn oracle_tail(n: u64, from: u64) -> BigUint {
        (from..=n).map(|i| binomial(n, i)).sum()
    }

    #[test]
    fn offline_probability_examples() {
        let p = offline_guess_probability(40, pct(95), Convention::Inclusive).unwrap();
        assert_eq!(decode_parts(40, pct(95)), 36);
        assert_eq!(p.numerator, BigUint::from(102_091u32));
        assert_eq!(p.exp, 40);
        assert!(p.below_pow2(-23.0));
        assert!((p.log2() + 23.36).abs() < 0.01);

        let one = offline_guess_probability(17, Ratio::one(), Convention::Inclusive).unwrap();
        assert_eq!(one.numerator, BigUint::one());

        assert_eq!(decode_parts(60, pct(90)), 48);
        let inc = offline_guess_probability(60, pct(90), Convention::Inclusive).unwrap();
        let exc = offline_guess_probability(60, pct(90), Convention::Exclusive).unwrap();
        assert!((inc.log2() + 19.26).abs() < 0.01, "{}", inc.log2());
        assert!((exc.log2() + 21.33).abs() < 0.01, "{}", exc.log2());
        assert!(!inc.below_pow2(-20.0) && exc.below_pow2(-20.0));

        assert_eq!(
            offline_guess_probability(10, pct(50), Convention::Inclusive),
            Err(SecurityError::ThresholdTooLow)
        );
    }

    #[test]
    fn min_bits_examples() {
        assert_eq!(min_fingerprint_bits(pct(95), -20.0, 10, Convention::Inclusive), Ok(40));
        assert_eq!(min_fingerprint_bits(pct(90), -20.0, 10, Convention::Exclusive), Ok(60));
        // The exclusive tail is already small enough at 30 bits for 95 %.
        assert_eq!(min_fingerprint_bits(pct(95), -20.0, 10, Convention::Exclusive), Ok(30));
        assert_eq!(min_fingerprint_bits(pct(90), -20.0, 10, Convention::Inclusive), Ok(70));
        let n76 = min_fingerprint_bits(pct(76), -20.0, 10, Convention::Exclusive).unwrap();
        assert!(n76 > 60, "{n76}");
        assert_eq!(
            min_fingerprint_bits(pct(75), -20.0, 10, Convention::Exclusive),
            Err(SecurityError::NoFiniteSize)
        );
    }

    #[test]
    fn min_bits_is_smallest_at_unit_granularity() {
        for p in [80u64, 85, 90, 95] {
            let n = min_fingerprint_bits(pct(p), -20.0, 1, Convention::Exclusive).unwrap();
            let at = offline_guess_probability(n, pct(p), Convention::Exclusive).unwrap();
            assert!(at.log2() < -20.0);
            for k in (1..n).filter(|&k| decode_parts(k, pct(p)) < k) {
                let q = offline_guess_probability(k, pct(p), Convention::Exclusive).unwrap();
                assert!(q.log2() >= -20.0, "thr {p}: n={k} already passes");
            }
        }
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(brute_force_complexity(10, 4, 10), Ok(0.0));
        assert!((brute_force_complexity(4, 2, 3).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            brute_force_complexity(10, 5, 4),
            Err(SecurityError::AttackImpossible { i_correct: 4, d: 5 })
        );
        assert_eq!(decode_parts(140, pct(70)), 56);
        let (i, c) = complexity_floor(140, pct(70)).unwrap().unwrap();
        assert_eq!(i, 97);
        assert!(c > 0.0);
        // Literal bound is undefined once m exceeds n − m.
        assert_eq!(literal_complexity_bound(40, 36), None);
        assert!(literal_complexity_bound(140, 56).is_some());
    }

    #[test]
    fn complexity_matches_enumeration() {
        // n=6, d=3, i=4: C(6,3)/C(4,3) = 20/4 = 5 attempts.
        let c = brute_force_complexity(6, 3, 4).unwrap();
        assert!((c - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn fuzzy_commitment_examples() {
        assert_eq!(fuzzy_commitment_bits(pct(75), 128), Ok(192));
        assert_eq!(fuzzy_commitment_bits(Ratio::one(), 128), Ok(128));
        assert_eq!(fuzzy_commitment_bits(Ratio::new(708, 1000), 128), Ok(203));
        assert_eq!(fuzzy_commitment_bits(Ratio::new(937, 1000), 128), Ok(145));
        assert_eq!(fuzzy_commitment_bits(Ratio::new(917, 1000), 128), Ok(150));
    }

    #[test]
    fn pairing_time_examples() {
        assert_eq!(pairing_time(50, 16, 10), Ok(40));
        assert_eq!(pairing_time(147, 12, 20), Ok(260));
        assert_eq!(pairing_time(10, 24, 10), Ok(10));
        assert!(pairing_time(0, 24, 10).is_err());
    }

    #[test]
    fn table1_rows() {
        let t = table1();
        assert_eq!(t.iter().map(|r| r.n).collect::<Vec<_>>(), vec![40, 60, 80, 100, 120, 140]);
        assert!(t[0].p_inclusive.below_pow2(-23.0));
        assert!(t[1].p_exclusive.below_pow2(-20.0));
        assert!(t[2].p_exclusive.below_pow2(-12.0) && t[2].p_inclusive.below_pow2(-12.0));
        // The exact tail at 80 % / 100 bits is about 2^-5.8, not below 2^-7.
        assert!((t[3].p_exclusive.log2() + 5.83).abs() < 0.01);
        assert!(t[4].p_inclusive.log2() > -1.0);
        assert!(t[5].p_inclusive.log2() > -1.0);
        assert_eq!(t[5].m, 56);
    }

    #[test]
    fn table2_rows() {
        let thr = SimilarityThresholds::default();
        let t = table2(&thr, 128);
        assert_eq!(t.len(), 15);
        let row = |name: &str| t.iter().find(|r| r.name == name).unwrap().clone();
        let expect = [
            ("Acv", 708, 140, 203, 60, 90),
            ("Ach", 750, 120, 192, 50, 80),
            ("Gyr", 937, 50, 145, 40, 100),
            ("Bar", 917, 60, 150, 100, 260),
            ("V+H", 729, 130, 198, 30, 50),
            ("All", 802, 100, 179, 40, 60),
        ];
        for (name, permille, fp, fc, tp, tc) in expect {
            let r = row(name);
            assert_eq!(r.threshold, Ratio::new(permille, 1000), "{name}");
            assert_eq!((r.fpake_bits, r.fcom_bits, r.fpake_time, r.fcom_time), (fp, fc, tp, tc), "{name}");
        }
    }

    #[test]
    fn parse_fractions() {
        assert_eq!(parse_fraction("0.95"), Ok(pct(95)));
        assert_eq!(parse_fraction("95%"), Ok(pct(95)));
        assert_eq!(parse_fraction("72.9%"), Ok(Ratio::new(729, 1000)));
        assert_eq!(parse_fraction("17/24"), Ok(Ratio::new(17, 24)));
        assert_eq!(parse_fraction("1"), Ok(Ratio::one()));
        assert!(parse_fraction("abc").is_err());
        assert!(parse_fraction("1/0").is_err());
    }

    #[test]
    fn display_rounding() {
        assert_eq!(display_threshold(Ratio::new(15, 16)), Ratio::new(937, 1000));
        assert_eq!(display_threshold(Ratio::new(11, 12)), Ratio::new(917, 1000));
        assert_eq!(display_threshold(Ratio::new(17, 24)), Ratio::new(708, 1000));
    }

    #[test]
    fn row_sums() {
        for n in [0u64, 1, 2, 17, 64, 150, 300] {
            assert!(binomial_row_sums_to_power(n), "n={n}");
        }
    }

    proptest! {
        #[test]
        fn tail_matches_oracle(n in 1u64..120, k in 0u64..125) {
            prop_assert_eq!(binomial_tail(n, k), oracle_tail(n, k));
        }

        #[test]
        fn inclusive_minus_exclusive_is_one_term(n in 1u64..200, p in 51u64..=100) {
            let thr = pct(p);
            let inc = offline_guess_probability(n, thr, Convention::Inclusive).unwrap();
            let exc = offline_guess_probability(n, thr, Convention::Exclusive).unwrap();
            let m = decode_parts(n, thr);
            prop_assert!(inc.numerator >= exc.numerator);
            prop_assert_eq!(&inc.numerator - &exc.numerator, binomial(n, m));
        }

        #[test]
        fn probability_decreases_in_threshold(n in 1u64..200, p in 51u64..100) {
            let a = offline_guess_probability(n, pct(p), Convention::Exclusive).unwrap();
            let b = offline_guess_probability(n, pct(p + 1), Convention::Exclusive).unwrap();
            prop_assert!(b.numerator <= a.numerator);
        }

        #[test]
        fn exclusive_probability_decreases_in_n_at_fixed_m_fraction(k in 1u64..40, p in 76u64..=100) {
            // Compare sizes that are multiples of the threshold's denominator
            // so that (2·thr − 1)·n stays integral.
            let thr = pct(p);
            let step = *thr.denom();
            let (n1, n2) = (k * step, (k + 1) * step);
            let a = offline_guess_probability(n1, thr, Convention::Exclusive).unwrap().to_ratio();
            let b = offline_guess_probability(n2, thr, Convention::Exclusive).unwrap().to_ratio();
            prop_assert!(b < a || a.numer().is_zero());
        }

        #[test]
        fn complexity_non_increasing_in_i(n in 2u64..80, d_frac in 0.05f64..1.0) {
            let d = ((n as f64 * d_frac) as u64).max(1).min(n);
            let mut prev = f64::INFINITY;
            for i in d..=n {
                let c = brute_force_complexity(n, d, i).unwrap();
                prop_assert!(c <= prev + 1e-9);
                prev = c;
            }
        }

        #[test]
        fn fuzzy_commitment_at_least_target(p in 51u64..=1000, t in 1u64..1024) {
            let thr = Ratio::new(p.max(501), 1000);
            let bits = fuzzy_commitment_bits(thr, t).unwrap();
            prop_assert!(bits >= t);
            prop_assert_eq!(bits == t, thr == Ratio::one());
        }
    }
}
