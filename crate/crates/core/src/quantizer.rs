//! Median-threshold quantization and sensor fusion.
//!
//! A window of `N` samples yields `M` bits: bit `i` is set when the sample at
//! quantization point `p_i` lies strictly above `median + Δ`. Points are
//! spread evenly, `p_i = round((i - ½)·N/M)`, so they cover the window end to
//! end. Sub-fingerprints of several modalities taken in the same time frame
//! are concatenated in canonical order; the fused similarity threshold is the
//! bit-weighted mean of the per-modality thresholds.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::config::{ConfigError, KeyValueConfig};
use crate::scalar::{median, population_std, Scalar};
use crate::security::parse_fraction;
use crate::signal::{Modality, SensorWindow};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("no sub-fingerprints to fuse")]
    NoSensors,
    #[error("fingerprints have different lengths or layouts")]
    IncompatibleFingerprints,
    #[error("duplicate or out-of-order modality {0}")]
    BadOrder(Modality),
    #[error("malformed fingerprint record: {0}")]
    Parse(String),
}

/// Offset added to the median before thresholding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MedianDelta {
    Absolute(f64),
    /// Multiple of the window's population standard deviation.
    StdFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerParams {
    pub modality: Modality,
    pub input_len: usize,
    pub output_bits: usize,
    pub median_delta: MedianDelta,
    /// Optional fixed spacing override: points at `ε + k·(⌈N/M⌉ + ε)`.
    pub epsilon: Option<usize>,
}

impl QuantizerParams {
    pub fn for_modality(m: Modality) -> Self {
        let (bits, delta) = match m {
            Modality::Acv | Modality::Ach => (24, MedianDelta::StdFraction(0.05)),
            Modality::Gyr => (16, MedianDelta::Absolute(0.0)),
            Modality::Bar => (12, MedianDelta::Absolute(0.0)),
        };
        Self {
            modality: m,
            input_len: m.window_len(),
            output_bits: bits,
            median_delta: delta,
            epsilon: None,
        }
    }

    pub fn points(&self) -> Vec<usize> {
        match self.epsilon {
            None => quantization_points(self.input_len, self.output_bits),
            Some(eps) => {
                let spacing = self.input_len.div_ceil(self.output_bits) + eps;
                (0..self.output_bits)
                    .map(|k| (eps + k * spacing).min(self.input_len - 1))
                    .collect()
            }
        }
    }
}

/// Centered equidistant quantization points for `n` samples and `m` bits.
pub fn quantization_points(n: usize, m: usize) -> Vec<usize> {
    assert!(m >= 1 && n >= m, "need 1 <= M <= N");
    (1..=m)
        .map(|i| {
            // round((i - 0.5) * n / m) with ties rounded down, so M = N
            // samples every index exactly once.
            let p = ((2 * i - 1) * n + m - 1) / (2 * m);
            p.min(n - 1)
        })
        .collect()
}

/// Quantizes one window into `params.output_bits` bits.
pub fn quantize<T: Scalar>(w: &SensorWindow<T>, params: &QuantizerParams) -> Vec<bool> {
    let s = w.samples();
    let n = s.len();
    let med = median(s).unwrap_or_else(T::zero);
    let delta = match params.median_delta {
        MedianDelta::Absolute(d) => T::lit(d),
        MedianDelta::StdFraction(f) => T::lit(f) * population_std(s).unwrap_or_else(T::zero),
    };
    let thr = med + delta;
    let points = if n == params.input_len {
        params.points()
    } else {
        quantization_points(n, params.output_bits.min(n))
    };
    points.into_iter().map(|p| s[p] > thr).collect()
}

/// Per-modality similarity thresholds as exact fractions of matching bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityThresholds {
    pub per_modality: [Ratio<u64>; 4],
}

impl Default for SimilarityThresholds {
    fn default() -> Self {
        Self {
            per_modality: [
                Ratio::new(17, 24),
                Ratio::new(18, 24),
                Ratio::new(15, 16),
                Ratio::new(11, 12),
            ],
        }
    }
}

impl SimilarityThresholds {
    pub fn get(&self, m: Modality) -> Ratio<u64> {
        self.per_modality[m.index()]
    }

    /// Overrides from `threshold.<modality>` keys, e.g. `threshold.Gyr = 15/16`.
    pub fn apply(&mut self, cfg: &KeyValueConfig) -> Result<(), ConfigError> {
        for m in Modality::ALL {
            let key = format!("threshold.{m}");
            if let Some(v) = cfg.get::<String>(&key)? {
                let t = parse_fraction(&v)
                    .ok()
                    .filter(|t| *t > Ratio::new(1, 2) && *t <= Ratio::from_integer(1))
                    .ok_or(ConfigError::BadValue { key, value: v })?;
                self.per_modality[m.index()] = t;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub modality: Modality,
    pub offset: usize,
    pub len: usize,
    pub threshold: Ratio<u64>,
}

/// Bit string with its per-modality layout and fused threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    bits: Vec<bool>,
    segments: Vec<Segment>,
}

impl Fingerprint {
    /// A fingerprint with one anonymous segment, for raw bit strings.
    pub fn raw(bits: Vec<bool>, modality: Modality, threshold: Ratio<u64>) -> Self {
        let len = bits.len();
        Self {
            bits,
            segments: vec![Segment {
                modality,
                offset: 0,
                len,
                threshold,
            }],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn modalities(&self) -> Vec<Modality> {
        self.segments.iter().map(|s| s.modality).collect()
    }

    /// `Σ len_i · thr_i / Σ len_i`, exact.
    pub fn fused_threshold(&self) -> Ratio<u64> {
        let total: u64 = self.segments.iter().map(|s| s.len as u64).sum();
        if total == 0 {
            return Ratio::from_integer(1);
        }
        let weighted: Ratio<u64> = self
            .segments
            .iter()
            .map(|s| s.threshold * Ratio::from_integer(s.len as u64))
            .fold(Ratio::from_integer(0), |a, b| a + b);
        weighted / Ratio::from_integer(total)
    }

    /// Bits of the segment for `m`, if present.
    pub fn segment_bits(&self, m: Modality) -> Option<&[bool]> {
        self.segments
            .iter()
            .find(|s| s.modality == m)
            .map(|s| &self.bits[s.offset..s.offset + s.len])
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn with_bits(&self, bits: Vec<bool>) -> Result<Self, FingerprintError> {
        if bits.len() != self.bits.len() {
            return Err(FingerprintError::IncompatibleFingerprints);
        }
        Ok(Self {
            bits,
            segments: self.segments.clone(),
        })
    }
}

/// Concatenates sub-fingerprints in canonical modality order.
pub fn fuse(subs: &[(Modality, Vec<bool>)], thrs: &SimilarityThresholds) -> Result<Fingerprint, FingerprintError> {
    if subs.is_empty() {
        return Err(FingerprintError::NoSensors);
    }
    let mut ordered: Vec<&(Modality, Vec<bool>)> = subs.iter().collect();
    ordered.sort_by_key(|(m, _)| *m);
    if let Some(w) = ordered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(FingerprintError::BadOrder(w[0].0));
    }
    let mut bits = Vec::new();
    let mut segments = Vec::new();
    for (m, b) in ordered {
        segments.push(Segment {
            modality: *m,
            offset: bits.len(),
            len: b.len(),
            threshold: thrs.get(*m),
        });
        bits.extend_from_slice(b);
    }
    Ok(Fingerprint { bits, segments })
}

/// Fraction of agreeing bit positions.
pub fn hamming_similarity(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    let layout = |f: &Fingerprint| f.segments.iter().map(|s| (s.modality, s.len)).collect::<Vec<_>>();
    if a.len() != b.len() || layout(a) != layout(b) {
        return Err(FingerprintError::IncompatibleFingerprints);
    }
    Ok(bit_similarity(a.bits(), b.bits()))
}

/// Number of agreeing positions of two equal-length bit slices.
pub fn matching_bits(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x == y).count()
}

pub fn bit_similarity(a: &[bool], b: &[bool]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    matching_bits(a, b) as f64 / a.len() as f64
}

/// Accept predicate: `matches / n ≥ threshold`, evaluated exactly.
pub fn accepts(matches: usize, n: usize, threshold: Ratio<u64>) -> bool {
    (matches as u128) * (*threshold.denom() as u128) >= (*threshold.numer() as u128) * (n as u128)
}

/// Name of a modality set in `V+H+G+B` notation (`All` for all four).
pub fn fusion_name(mods: &[Modality]) -> String {
    if mods.len() == 4 {
        return "All".to_string();
    }
    if mods.len() == 1 {
        return mods[0].label().to_string();
    }
    mods.iter().map(|m| m.letter().to_string()).collect::<Vec<_>>().join("+")
}

pub fn parse_modalities(s: &str) -> Result<Vec<Modality>, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Modality::ALL.to_vec());
    }
    let mut mods = s
        .split(['+', ','])
        .map(str::parse)
        .collect::<Result<Vec<Modality>, _>>()?;
    mods.sort();
    mods.dedup();
    Ok(mods)
}

/// One record of the fingerprint dump format:
/// `<start_time> <modalities> <bits>`, e.g. `35.000 Acv+Gyr 0110…`.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub start_time: f64,
    pub fingerprint: Fingerprint,
}

impl fmt::Display for DumpRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mods: Vec<&str> = self.fingerprint.modalities().iter().map(|m| m.label()).collect();
        write!(f, "{:.3} {} {}", self.start_time, mods.join("+"), self.fingerprint.to_bit_string())
    }
}

impl DumpRecord {
    pub fn parse_with(line: &str, thrs: &SimilarityThresholds) -> Result<Self, FingerprintError> {
        let err = |m: &str| FingerprintError::Parse(format!("{m}: {line:?}"));
        let mut parts = line.split_whitespace();
        let (Some(t), Some(mods), Some(bits), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected three fields"));
        };
        let start_time: f64 = t.parse().map_err(|_| err("bad start time"))?;
        let mods: Vec<Modality> = mods
            .split('+')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e: String| err(&e))?;
        let bits = parse_bits(bits).ok_or_else(|| err("bits must be 0/1"))?;
        let lens: Vec<usize> = mods.iter().map(|&m| QuantizerParams::for_modality(m).output_bits).collect();
        let subs: Vec<(Modality, Vec<bool>)> = if mods.len() == 1 {
            vec![(mods[0], bits)]
        } else {
            if lens.iter().sum::<usize>() != bits.len() {
                return Err(err("bit count does not match the modality layout"));
            }
            let mut off = 0;
            mods.iter()
                .zip(&lens)
                .map(|(&m, &l)| {
                    let s = (m, bits[off..off + l].to_vec());
                    off += l;
                    s
                })
                .collect()
        };
        if mods.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FingerprintError::BadOrder(mods[0]));
        }
        Ok(Self {
            start_time,
            fingerprint: fuse(&subs, thrs)?,
        })
    }
}

impl FromStr for DumpRecord {
    type Err = FingerprintError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_with(s, &SimilarityThresholds::default())
    }
}

pub fn parse_bits(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

/// Parses a whole dump, skipping blank and `#` lines.
pub fn parse_dump(text: &str) -> Result<Vec<DumpRecord>, FingerprintError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(samples: Vec<f64>) -> SensorWindow<f64> {
        SensorWindow::with_len(Modality::Gyr, 0.0, samples).unwrap()
    }

    fn params(n: usize, m: usize) -> QuantizerParams {
        QuantizerParams {
            modality: Modality::Gyr,
            input_len: n,
            output_bits: m,
            median_delta: MedianDelta::Absolute(0.0),
            epsilon: None,
        }
    }

    #[test]
    fn quantize_examples() {
        let bits = quantize(&window(vec![1.0, 5.0, 2.0, 8.0]), &params(4, 4));
        assert_eq!(bits, vec![false, true, false, true]);
        let bits = quantize(&window(vec![3.0; 16]), &params(16, 8));
        assert!(bits.iter().all(|b| !b));
        let p = quantization_points(1000, 24);
        assert_eq!((p[0], p[23]), (21, 979));
        assert_eq!(quantization_points(4, 4), vec![0, 1, 2, 3]);
    }

    #[test]
    fn epsilon_override_spacing() {
        let mut p = params(100, 10);
        p.epsilon = Some(0);
        assert_eq!(p.points(), (0..10).map(|k| k * 10).collect::<Vec<_>>());
        p.epsilon = Some(1);
        assert_eq!(p.points()[..3], [1, 12, 23]);
        assert_eq!(*p.points().last().unwrap(), 99);
    }

    #[test]
    fn fuse_examples() {
        let thr = SimilarityThresholds::default();
        let v = (Modality::Acv, vec![true; 24]);
        let h = (Modality::Ach, vec![false; 24]);
        let f = fuse(&[h.clone(), v.clone()], &thr).unwrap();
        assert_eq!(f.len(), 48);
        assert_eq!(f.modalities(), vec![Modality::Acv, Modality::Ach]);
        assert_eq!(f.fused_threshold(), Ratio::new(35, 48));
        assert_eq!(format!("{:.1}", 100.0 * 35.0 / 48.0), "72.9");

        let single = fuse(&[(Modality::Gyr, vec![true; 16])], &thr).unwrap();
        assert_eq!(single.fused_threshold(), Ratio::new(15, 16));

        let all = fuse(
            &[
                v,
                h,
                (Modality::Gyr, vec![true; 16]),
                (Modality::Bar, vec![true; 12]),
            ],
            &thr,
        )
        .unwrap();
        assert_eq!(all.len(), 76);
        assert_eq!(all.fused_threshold(), Ratio::new(61, 76));
        let pct: f64 = 100.0 * 61.0 / 76.0;
        assert!((pct - 80.2).abs() <= 0.1 + 1e-9, "{pct}");

        assert_eq!(fuse(&[], &thr), Err(FingerprintError::NoSensors));
    }

    #[test]
    fn similarity_examples() {
        let thr = SimilarityThresholds::default();
        let a = fuse(&[(Modality::Acv, vec![true; 24]), (Modality::Ach, vec![false; 24])], &thr).unwrap();
        assert_eq!(hamming_similarity(&a, &a), Ok(1.0));
        let comp = a.with_bits(a.bits().iter().map(|b| !b).collect()).unwrap();
        assert_eq!(hamming_similarity(&a, &comp), Ok(0.0));
        let mut bits = a.bits().to_vec();
        for b in bits.iter_mut().take(12) {
            *b = !*b;
        }
        assert_eq!(hamming_similarity(&a, &a.with_bits(bits).unwrap()), Ok(0.75));
        let g = fuse(&[(Modality::Gyr, vec![true; 16])], &thr).unwrap();
        assert_eq!(hamming_similarity(&a, &g), Err(FingerprintError::IncompatibleFingerprints));
    }

    #[test]
    fn accept_predicate_is_exact() {
        assert!(accepts(35, 48, Ratio::new(35, 48)));
        assert!(!accepts(34, 48, Ratio::new(35, 48)));
        assert!(accepts(15, 16, Ratio::new(15, 16)));
    }

    #[test]
    fn dump_round_trip() {
        let thr = SimilarityThresholds::default();
        let fp = fuse(&[(Modality::Gyr, [true, false].repeat(8)), (Modality::Bar, vec![true; 12])], &thr).unwrap();
        let rec = DumpRecord {
            start_time: 35.0,
            fingerprint: fp,
        };
        let line = rec.to_string();
        assert!(line.starts_with("35.000 Gyr+Bar 1010"));
        assert_eq!(line.parse::<DumpRecord>().unwrap(), rec);
        assert!("1.0 Gyr 01x".parse::<DumpRecord>().is_err());
        assert!("1.0 Gyr+Bar 0101".parse::<DumpRecord>().is_err());
        assert!("1.0 Bar+Gyr 0101".parse::<DumpRecord>().is_err());
    }

    #[test]
    fn fusion_names() {
        assert_eq!(fusion_name(&[Modality::Acv, Modality::Ach]), "V+H");
        assert_eq!(fusion_name(&Modality::ALL), "All");
        assert_eq!(fusion_name(&[Modality::Gyr]), "Gyr");
        assert_eq!(parse_modalities("V+H+B").unwrap(), vec![Modality::Acv, Modality::Ach, Modality::Bar]);
        assert_eq!(parse_modalities("all").unwrap().len(), 4);
    }

    proptest! {
        #[test]
        fn full_sampling_balance(mut xs in proptest::collection::hash_set(-1_000_000i64..1_000_000, 2..200)) {
            let vals: Vec<f64> = xs.drain().map(|v| v as f64).collect();
            let n = vals.len();
            let bits = quantize(&window(vals), &params(n, n));
            prop_assert_eq!(bits.iter().filter(|&&b| b).count(), n / 2);
        }

        #[test]
        fn shift_invariance(xs in proptest::collection::vec(-100.0f64..100.0, 50..=50), c in -50.0f64..50.0) {
            let mut p = params(50, 10);
            p.median_delta = MedianDelta::StdFraction(0.05);
            let a = quantize(&window(xs.clone()), &p);
            // Shift by a dyadic amount so the addition is exact.
            let c = (c * 4.0).round() / 4.0;
            let b = quantize(&window(xs.iter().map(|v| v + c).collect()), &p);
            // The σ term may differ by an ulp; only compare away from the threshold.
            let med = median(&xs).unwrap() + 0.05 * population_std(&xs).unwrap();
            for (i, &pt) in p.points().iter().enumerate() {
                if (xs[pt] - med).abs() > 1e-9 {
                    prop_assert_eq!(a[i], b[i]);
                }
            }
        }

        #[test]
        fn points_monotone_in_bounds(n in 1usize..3000, m in 1usize..200) {
            prop_assume!(m <= n);
            let p = quantization_points(n, m);
            prop_assert_eq!(p.len(), m);
            prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(p.iter().all(|&x| x < n));
        }

        #[test]
        fn identical_thresholds_fuse_to_same(n1 in 1usize..40, n2 in 1usize..40) {
            let t = Ratio::new(3, 4);
            let thr = SimilarityThresholds { per_modality: [t; 4] };
            let f = fuse(&[(Modality::Acv, vec![true; n1]), (Modality::Bar, vec![false; n2])], &thr).unwrap();
            prop_assert_eq!(f.fused_threshold(), t);
        }
    }
}
