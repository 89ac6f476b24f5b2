//! Adversaries that try to pair with a victim device using context they did
//! not share: injected sensor noise, a replay of another car's recording, or
//! a follower car in a similar context with a best-match guess on one sensor.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{build_tables, common_grid, fused_threshold, preprocess_recordings, EvalError, EvalParams, Rate, WindowTable};
use crate::quantizer::{accepts, matching_bits};
use crate::signal::csvio::{DeviceId, DeviceRecording};
use crate::signal::synth::{generate_stationary, generate_synthetic_context, GeneratorConfig, FOLLOWER_LAG};
use crate::signal::Modality;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    /// Adversary windows come from stationary-noise profiles.
    Injection,
    /// Adversary replays recorded windows of another car.
    Replay,
    /// Adversary is in a similar context, e.g. a follower car.
    SimilarContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alignment {
    /// Every adversary window is tried against every victim window.
    Unsynchronized,
    /// Adversary windows within the replay jitter of the victim's time
    /// (shifted by the spec's offset).
    RoughTimeline,
    /// One sensor's sub-fingerprint is the adversary's best match within the
    /// similar-context tolerance; the rest come from the closest window.
    BestMatchSingleSensor(Modality),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub alignment: Alignment,
    /// Victim's sensor set.
    pub mods: Vec<Modality>,
    /// Adversary clock minus victim clock for the same context, s.
    pub offset: f64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, alignment: Alignment, mods: &[Modality]) -> Result<Self, String> {
        if matches!(alignment, Alignment::BestMatchSingleSensor(_)) != (kind == AttackKind::SimilarContext) {
            return Err("best-match alignment is reserved for the similar-context attack".into());
        }
        if let Alignment::BestMatchSingleSensor(m) = alignment {
            if !mods.contains(&m) {
                return Err(format!("best-match sensor {m} is not in the attacked set"));
            }
        }
        Ok(Self {
            kind,
            alignment,
            mods: mods.to_vec(),
            offset: 0.0,
        })
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Injection => "injection",
            Self::Replay => "replay",
            Self::SimilarContext => "similar-context",
        })
    }
}

impl FromStr for AttackKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "injection" => Ok(Self::Injection),
            "replay" => Ok(Self::Replay),
            "similar-context" | "similar" => Ok(Self::SimilarContext),
            _ => Err(format!("unknown attack {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    /// Attempts where both sides produced a fingerprint.
    pub far: Rate,
    /// Attempts lost because the adversary's window failed the activity filter.
    pub filtered: u64,
}

/// FAR of `spec` against every victim window, with the adversary drawing on
/// the windows in `adversary`.
pub fn run_attack(spec: &AttackSpec, victims: &[WindowTable], adversary: &[WindowTable], params: &EvalParams) -> AttackReport {
    let thr = fused_threshold(&spec.mods, &params.thresholds);
    let jobs: Vec<(usize, usize, usize)> = victims
        .iter()
        .enumerate()
        .flat_map(|(v, t)| (0..t.len()).flat_map(move |k| (0..adversary.len()).map(move |a| (v, k, a))))
        .collect();
    let (accepted, trials, filtered) = jobs
        .par_iter()
        .map(|&(v, k, a)| {
            let victim = &victims[v];
            let Some(fv) = victim.fused_bits(&spec.mods, k) else {
                return (0u64, 0u64, 0u64);
            };
            let adv = &adversary[a];
            let t = victim.times[k] + spec.offset;
            let n = fv.len();
            let mut acc = (0, 0, 0);
            let mut attempt = |guess: Option<Vec<bool>>| match guess {
                Some(g) => {
                    acc.1 += 1;
                    acc.0 += accepts(matching_bits(&fv, &g), n, thr) as u64;
                }
                None => acc.2 += 1,
            };
            match spec.alignment {
                Alignment::Unsynchronized => (0..adv.len()).for_each(|j| attempt(adv.fused_bits(&spec.mods, j))),
                Alignment::RoughTimeline => (0..adv.len())
                    .filter(|&j| (adv.times[j] - t).abs() <= params.replay_jitter)
                    .for_each(|j| attempt(adv.fused_bits(&spec.mods, j))),
                Alignment::BestMatchSingleSensor(oracle) => {
                    attempt(best_match_guess(victim, k, adv, t, oracle, &spec.mods, params.similar_context_tolerance))
                }
            }
            acc
        })
        .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
    AttackReport {
        far: Rate { accepted, trials },
        filtered,
    }
}

/// The similar-context adversary's single guess: closest-in-time windows for
/// every sensor except `oracle`, for which it picks the sub-fingerprint that
/// best matches the victim among its windows within `tolerance` of `t`.
fn best_match_guess(
    victim: &WindowTable,
    k: usize,
    adv: &WindowTable,
    t: f64,
    oracle: Modality,
    mods: &[Modality],
    tolerance: f64,
) -> Option<Vec<bool>> {
    let near: Vec<usize> = (0..adv.len()).filter(|&j| (adv.times[j] - t).abs() <= tolerance).collect();
    let closest = *near.iter().min_by(|&&x, &&y| {
        (adv.times[x] - t).abs().total_cmp(&(adv.times[y] - t).abs())
    })?;
    let target = victim.sub(oracle, k)?;
    let best = near
        .iter()
        .filter_map(|&j| adv.sub(oracle, j))
        .max_by_key(|s| matching_bits(s, target))?;
    let mut out = Vec::new();
    for &m in mods {
        if m == oracle {
            out.extend_from_slice(best);
        } else {
            out.extend_from_slice(adv.sub(m, closest)?);
        }
    }
    Some(out)
}

/// Sensor noise the injection adversary plays into a resting device. The
/// default is loud enough to pass the activity filter on every sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    /// Accelerometer noise, m/s².
    pub acc: f64,
    /// Gyroscope noise, rad/s.
    pub gyro: f64,
    /// Barometer noise, hPa.
    pub baro: f64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self {
            acc: 1.0,
            gyro: 0.2,
            baro: 0.05,
        }
    }
}

/// `count` stationary devices driven by `profile` noise.
pub fn injection_recordings(
    seed: u64,
    base: &GeneratorConfig,
    profile: NoiseProfile,
    duration: f64,
    count: usize,
) -> Vec<DeviceRecording<f64>> {
    let mut cfg = base.clone();
    cfg.acc_noise = profile.acc;
    cfg.gyro_noise = profile.gyro;
    cfg.baro_noise = profile.baro;
    (0..count)
        .map(|i| {
            let id = DeviceId::new("noise", format!("n{i}"));
            generate_stationary(seed.wrapping_mul(1000).wrapping_add(i as u64), &cfg, duration, id)
        })
        .collect()
}

/// A victim in the lead car on the regular grid and a follower car on a 1 s
/// grid, from which the similar-context adversary picks its best match.
pub fn similar_context_tables(
    seed: u64,
    base: &GeneratorConfig,
    duration: f64,
    params: &EvalParams,
) -> Result<(Vec<WindowTable>, Vec<WindowTable>), EvalError> {
    let cfg = base.clone().follower(FOLLOWER_LAG);
    let devs = preprocess_recordings(&generate_synthetic_context(seed, &cfg, 1, 1, duration))?;
    let victim_grid = common_grid(&devs, params.step);
    let follower_grid = common_grid(&devs, 1.0);
    if victim_grid.is_empty() {
        return Err(EvalError::NoData);
    }
    Ok((
        build_tables(&devs[..1], &victim_grid, &params.activity),
        build_tables(&devs[1..], &follower_grid, &params.activity),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_match_is_reserved_for_similar_context() {
        let m = [Modality::Acv];
        assert!(AttackSpec::new(AttackKind::Replay, Alignment::BestMatchSingleSensor(Modality::Acv), &m).is_err());
        assert!(AttackSpec::new(AttackKind::SimilarContext, Alignment::Unsynchronized, &m).is_err());
        assert!(AttackSpec::new(AttackKind::SimilarContext, Alignment::BestMatchSingleSensor(Modality::Gyr), &m).is_err());
        assert!(AttackSpec::new(AttackKind::SimilarContext, Alignment::BestMatchSingleSensor(Modality::Acv), &m).is_ok());
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("similar_context".parse(), Ok(AttackKind::SimilarContext));
        assert_eq!("Replay".parse(), Ok(AttackKind::Replay));
        assert!("mitm".parse::<AttackKind>().is_err());
    }
}
