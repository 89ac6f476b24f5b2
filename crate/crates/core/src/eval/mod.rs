//! Evaluation machinery: per-window fingerprints over recordings, TAR/FAR,
//! attacks, pairing-time accumulation and entropy analysis.
//!
//! Pairing decisions here use the fused-threshold predicate instead of full
//! protocol runs; the protocol's success region equals it up to the error
//! budget rounding, and `transport::loopback_pair` covers spot checks.

pub mod attack;
pub mod entropy;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::activity::{passes, ActivityThresholds, WindowSchedule};
use crate::config::{ConfigError, KeyValueConfig};
use crate::quantizer::{accepts, fuse, matching_bits, quantize, Fingerprint, QuantizerParams, SimilarityThresholds};
use crate::security::{binomial_tail, matching_parts, pairing_time};
use crate::signal::csvio::{DeviceId, DeviceRecording};
use crate::signal::{condition_window, preprocess_device, ContextStreams, Modality, SignalError};

pub use attack::{
    injection_recordings, run_attack, similar_context_tables, Alignment, AttackKind, AttackReport, AttackSpec, NoiseProfile,
};
pub use entropy::{entropy_analysis, EntropyReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no overlapping accepted windows to compare")]
    NoData,
    #[error("context exhausted after {elapsed} s with {bits} bits")]
    InsufficientContext { elapsed: f64, bits: u64 },
    #[error("corpus of {got} fingerprints is too small (need {need})")]
    InsufficientCorpus { got: usize, need: usize },
    #[error("fingerprints in the corpus differ in length")]
    RaggedCorpus,
    #[error("{0}")]
    Signal(#[from] SignalError),
}

/// Tunables shared by the evaluation operations.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub activity: ActivityThresholds,
    pub thresholds: SimilarityThresholds,
    /// Spacing of the common window grid, s.
    pub step: f64,
    /// Half-width of the window in which the similar-context adversary picks
    /// its best match, s.
    pub similar_context_tolerance: f64,
    /// Half-width of the rough-timeline replay alignment, s.
    pub replay_jitter: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            activity: ActivityThresholds::default(),
            thresholds: SimilarityThresholds::default(),
            step: 10.0,
            similar_context_tolerance: 15.0,
            replay_jitter: 30.0,
        }
    }
}

impl EvalParams {
    /// Overrides from `activity.*`, `threshold.*` and `eval.*` keys.
    pub fn apply(&mut self, cfg: &KeyValueConfig) -> Result<(), ConfigError> {
        self.activity.apply(cfg)?;
        self.thresholds.apply(cfg)?;
        cfg.apply("eval.step", &mut self.step)?;
        cfg.apply("eval.similar_context_tolerance", &mut self.similar_context_tolerance)?;
        cfg.apply("eval.replay_jitter", &mut self.replay_jitter)?;
        for (key, v) in [
            ("eval.step", self.step),
            ("eval.similar_context_tolerance", self.similar_context_tolerance),
            ("eval.replay_jitter", self.replay_jitter),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::BadValue {
                    key: key.into(),
                    value: v.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// A device's preprocessed context.
#[derive(Debug, Clone)]
pub struct DeviceContext {
    pub id: DeviceId,
    pub streams: ContextStreams<f64>,
}

pub fn preprocess_recordings(recs: &[DeviceRecording<f64>]) -> Result<Vec<DeviceContext>, SignalError> {
    recs.par_iter()
        .map(|r| {
            Ok(DeviceContext {
                id: r.id.clone(),
                streams: preprocess_device(&r.accelerometer, &r.gyroscope, &r.barometer)?,
            })
        })
        .collect()
}

/// Sub-fingerprint of one modality window that passed the activity filter.
pub fn window_bits(ctx: &ContextStreams<f64>, m: Modality, start: f64, activity: &ActivityThresholds) -> Option<Vec<bool>> {
    let w = condition_window(&ctx.get(m).window(start)?).ok()?;
    passes(&w, activity).0.then(|| quantize(&w, &QuantizerParams::for_modality(m)))
}

/// Sub-fingerprints of one device on a grid of window start times; `None`
/// where the window was rejected or not covered.
#[derive(Debug, Clone)]
pub struct WindowTable {
    pub id: DeviceId,
    pub times: Vec<f64>,
    subs: [Vec<Option<Vec<bool>>>; 4],
}

impl WindowTable {
    pub fn build(ctx: &DeviceContext, times: &[f64], activity: &ActivityThresholds) -> Self {
        let subs = Modality::ALL.map(|m| times.iter().map(|&t| window_bits(&ctx.streams, m, t, activity)).collect());
        Self {
            id: ctx.id.clone(),
            times: times.to_vec(),
            subs,
        }
    }

    pub fn sub(&self, m: Modality, i: usize) -> Option<&[bool]> {
        self.subs[m.index()][i].as_deref()
    }

    /// Fused bits at grid index `i`, if every modality in `mods` passed.
    pub fn fused_bits(&self, mods: &[Modality], i: usize) -> Option<Vec<bool>> {
        let mut out = Vec::new();
        for &m in mods {
            out.extend_from_slice(self.sub(m, i)?);
        }
        Some(out)
    }

    pub fn fingerprint(&self, mods: &[Modality], i: usize, thrs: &SimilarityThresholds) -> Option<Fingerprint> {
        let subs: Vec<(Modality, Vec<bool>)> = mods.iter().map(|&m| Some((m, self.sub(m, i)?.to_vec()))).collect::<Option<_>>()?;
        fuse(&subs, thrs).ok()
    }

    /// Fraction of grid windows where every modality in `mods` passed.
    pub fn acceptance_rate(&self, mods: &[Modality]) -> f64 {
        if self.times.is_empty() {
            return 0.0;
        }
        (0..self.times.len()).filter(|&i| self.fused_bits(mods, i).is_some()).count() as f64 / self.times.len() as f64
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// The grid shared by all devices: every start time at which each device
/// covers a full window of every modality.
pub fn common_grid(devices: &[DeviceContext], step: f64) -> Vec<f64> {
    let from = devices.iter().map(|d| d.streams.start_time()).fold(f64::NEG_INFINITY, f64::max);
    let until = devices.iter().map(|d| d.streams.covered_until()).fold(f64::INFINITY, f64::min);
    if !(from.is_finite() && until.is_finite()) {
        return Vec::new();
    }
    let longest = Modality::ALL.iter().map(|m| m.window_secs()).fold(0.0, f64::max);
    WindowSchedule { step }.starts(from, until, longest)
}

/// Preprocesses `recs` and builds their tables on the common grid.
pub fn recordings_to_tables(recs: &[DeviceRecording<f64>], params: &EvalParams) -> Result<Vec<WindowTable>, EvalError> {
    let devs = preprocess_recordings(recs)?;
    let grid = common_grid(&devs, params.step);
    if grid.is_empty() {
        return Err(EvalError::NoData);
    }
    Ok(build_tables(&devs, &grid, &params.activity))
}

pub fn build_tables(devices: &[DeviceContext], times: &[f64], activity: &ActivityThresholds) -> Vec<WindowTable> {
    devices.par_iter().map(|d| WindowTable::build(d, times, activity)).collect()
}

pub fn fused_threshold(mods: &[Modality], thrs: &SimilarityThresholds) -> Ratio<u64> {
    let bits: u64 = mods.iter().map(|&m| QuantizerParams::for_modality(m).output_bits as u64).sum();
    let weighted = mods
        .iter()
        .map(|&m| thrs.get(m) * Ratio::from_integer(QuantizerParams::for_modality(m).output_bits as u64))
        .fold(Ratio::from_integer(0), |a, b| a + b);
    weighted / Ratio::from_integer(bits.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingTrialResult {
    pub a: DeviceId,
    pub b: DeviceId,
    pub colocated: bool,
    pub start_time: f64,
    pub similarity: f64,
    pub accepted: bool,
}

/// One trial per device pair and grid time where both fused fingerprints
/// exist.
pub fn pairing_trials(tables: &[WindowTable], mods: &[Modality], thrs: &SimilarityThresholds) -> Vec<PairingTrialResult> {
    let thr = fused_threshold(mods, thrs);
    let pairs: Vec<(usize, usize)> = (0..tables.len()).flat_map(|i| (i + 1..tables.len()).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            let (a, b) = (&tables[i], &tables[j]);
            let n = a.len().min(b.len());
            (0..n).filter_map(move |k| {
                let fa = a.fused_bits(mods, k)?;
                let fb = b.fused_bits(mods, k)?;
                let m = matching_bits(&fa, &fb);
                Some(PairingTrialResult {
                    a: a.id.clone(),
                    b: b.id.clone(),
                    colocated: a.id.car == b.id.car,
                    start_time: a.times[k],
                    similarity: m as f64 / fa.len() as f64,
                    accepted: accepts(m, fa.len(), thr),
                })
            })
        })
        .collect()
}

/// An acceptance rate with its trial count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub accepted: u64,
    pub trials: u64,
}

impl Rate {
    pub fn value(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.accepted as f64 / self.trials as f64
        }
    }

    /// Binomial standard error of the estimate at probability `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials.max(1) as f64).sqrt()
    }

    fn add(&mut self, accepted: bool) {
        self.trials += 1;
        self.accepted += accepted as u64;
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ({}/{})", self.value(), self.accepted, self.trials)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TarFar {
    pub tar: Rate,
    pub far: Rate,
}

pub fn summarize(trials: &[PairingTrialResult]) -> TarFar {
    let mut out = TarFar {
        tar: Rate { accepted: 0, trials: 0 },
        far: Rate { accepted: 0, trials: 0 },
    };
    for t in trials {
        if t.colocated {
            out.tar.add(t.accepted);
        } else {
            out.far.add(t.accepted);
        }
    }
    out
}

pub fn compute_tar_far(tables: &[WindowTable], mods: &[Modality], thrs: &SimilarityThresholds) -> Result<TarFar, EvalError> {
    let trials = pairing_trials(tables, mods, thrs);
    if trials.is_empty() {
        return Err(EvalError::NoData);
    }
    Ok(summarize(&trials))
}

/// Empirical FAR of independent uniform `n`-bit fingerprints at `thr`,
/// alongside the exact binomial tail.
pub fn uniform_far(n: usize, thr: Ratio<u64>, trials: u64, seed: u64) -> (Rate, f64) {
    let chunks = 64u64;
    let per = trials.div_ceil(chunks);
    let accepted: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ c.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let todo = per.min(trials.saturating_sub(c * per));
            (0..todo)
                .filter(|_| {
                    let a: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
                    let b: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
                    accepts(matching_bits(&a, &b), n, thr)
                })
                .count() as u64
        })
        .sum();
    let tail = binomial_tail(n as u64, matching_parts(n as u64, thr));
    let exact = crate::security::log2_big(&tail) - n as f64;
    (Rate { accepted, trials }, exact.exp2())
}

/// Walks windows in schedule order, adding `bits_per_window` for every
/// accepted one, until `required_bits` are collected. Returns the stream time
/// elapsed from the first window's start to the end of the last one used.
pub fn accumulate_pairing_time(
    windows: &[(f64, bool)],
    window_len: f64,
    bits_per_window: u64,
    required_bits: u64,
) -> Result<f64, EvalError> {
    let Some(&(t0, _)) = windows.first() else {
        return Err(EvalError::InsufficientContext { elapsed: 0.0, bits: 0 });
    };
    let mut bits = 0;
    for &(t, ok) in windows {
        if ok {
            bits += bits_per_window;
            if bits >= required_bits {
                return Ok(t + window_len - t0);
            }
        }
    }
    let (last, _) = windows[windows.len() - 1];
    Err(EvalError::InsufficientContext {
        elapsed: last + window_len - t0,
        bits,
    })
}

/// Pairing time for two devices on one modality: windows on `sched` count
/// when both devices accept them.
pub fn device_pair_time(
    a: &DeviceContext,
    b: &DeviceContext,
    m: Modality,
    sched: &WindowSchedule,
    activity: &ActivityThresholds,
    required_bits: u64,
) -> Result<f64, EvalError> {
    let from = a.streams.start_time().max(b.streams.start_time());
    let until = a.streams.covered_until().min(b.streams.covered_until());
    let windows: Vec<(f64, bool)> = sched
        .starts(from, until, m.window_secs())
        .into_iter()
        .map(|t| {
            let ok = window_bits(&a.streams, m, t, activity).is_some() && window_bits(&b.streams, m, t, activity).is_some();
            (t, ok)
        })
        .collect();
    accumulate_pairing_time(&windows, m.window_secs(), QuantizerParams::for_modality(m).output_bits as u64, required_bits)
}

/// The non-overlapping closed form, for cross-checking.
pub fn ideal_pairing_time(m: Modality, required_bits: u64) -> Option<u64> {
    pairing_time(required_bits, QuantizerParams::for_modality(m).output_bits as u64, m.window_secs() as u64).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fused_thresholds_are_bit_weighted() {
        let t = SimilarityThresholds::default();
        assert_eq!(fused_threshold(&[Modality::Acv, Modality::Ach], &t), Ratio::new(35, 48));
        assert_eq!(fused_threshold(&Modality::ALL, &t), Ratio::new(61, 76));
        assert_eq!(fused_threshold(&[Modality::Gyr], &t), Ratio::new(15, 16));
    }

    #[test]
    fn always_accepted_acv_takes_sixty_seconds() {
        let w: Vec<(f64, bool)> = (0..20).map(|k| (k as f64 * 10.0, true)).collect();
        assert_eq!(accumulate_pairing_time(&w, 10.0, 24, 140), Ok(60.0));
        assert_eq!(ideal_pairing_time(Modality::Acv, 140), Some(60));
        let overlapping: Vec<(f64, bool)> = (0..40).map(|k| (k as f64 * 5.0, true)).collect();
        assert!(accumulate_pairing_time(&overlapping, 10.0, 24, 140).unwrap() <= 60.0);
    }

    #[test]
    fn rejected_windows_exhaust_the_context() {
        let w: Vec<(f64, bool)> = (0..5).map(|k| (k as f64 * 10.0, k == 2)).collect();
        assert_eq!(
            accumulate_pairing_time(&w, 10.0, 24, 140),
            Err(EvalError::InsufficientContext { elapsed: 50.0, bits: 24 })
        );
    }

    #[test]
    fn uniform_far_matches_the_tail() {
        let (rate, exact) = uniform_far(16, Ratio::new(15, 16), 100_000, 1);
        assert!((exact - 17.0 / 65536.0).abs() < 1e-12);
        assert!((rate.value() - exact).abs() <= 3.0 * rate.sigma(exact));
    }

    proptest! {
        #[test]
        fn all_accepted_non_overlapping_matches_closed_form(req in 1u64..400, m in 0usize..4) {
            let m = Modality::ALL[m];
            let len = m.window_secs();
            let b = QuantizerParams::for_modality(m).output_bits as u64;
            let w: Vec<(f64, bool)> = (0..req).map(|k| (k as f64 * len, true)).collect();
            let t = accumulate_pairing_time(&w, len, b, req).unwrap();
            prop_assert_eq!(t as u64, ideal_pairing_time(m, req).unwrap());
        }

        #[test]
        fn rates_are_fractions(acc in proptest::collection::vec(any::<bool>(), 0..50)) {
            let mut r = Rate { accepted: 0, trials: 0 };
            for a in acc { r.add(a); }
            prop_assert!((0.0..=1.0).contains(&r.value()));
        }
    }
}
