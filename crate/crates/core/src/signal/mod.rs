//! Sensor ingestion and conditioning.
//!
//! Raw accelerometer, gyroscope and barometer recordings are resampled onto a
//! uniform grid and converted into the four context channels: vertical
//! acceleration (`Acv`), horizontal acceleration (`Ach`), gyroscope sky axis
//! (`Gyr`) and barometric altitude (`Bar`).

pub mod csvio;
pub mod filter;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

pub use filter::{apply_filter_chain, FilterChainConfig, MeanSubtraction};

/// Length of the non-overlapping gravity estimation window, in seconds.
pub const GRAVITY_WINDOW_SECS: f64 = 5.0;

/// Gravity estimates weaker than this (m/s²) are treated as corrupt data.
pub const MIN_GRAVITY: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("recording needs at least two samples")]
    EmptyRecording,
    #[error("timestamps must be strictly increasing (row {0})")]
    NonMonotonicTime(usize),
    #[error("{kind} rows carry {expected} values, got {got}")]
    WrongArity {
        kind: SensorKind,
        expected: usize,
        got: usize,
    },
    #[error("channel lengths differ from timestamp count")]
    RaggedChannels,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("gravity estimate degenerate near t = {0:.2} s")]
    GravityEstimateDegenerate(f64),
    #[error("recording of {0:.2} s is shorter than one gravity window")]
    TooShortForGravity(f64),
    #[error("pressure must be positive")]
    InvalidPressure,
    #[error("window of {len} samples is shorter than the smoothing window ({sg_window})")]
    WindowTooShort { len: usize, sg_window: usize },
    #[error("invalid filter configuration: {0}")]
    InvalidFilter(&'static str),
    #[error("{modality} window needs {expected} samples, got {got}")]
    WrongWindowLength {
        modality: Modality,
        expected: usize,
        got: usize,
    },
    #[error("expected a {expected} recording, got {got}")]
    WrongSensor { expected: SensorKind, got: SensorKind },
}

/// Physical sensor a raw recording comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorKind {
    Accelerometer,
    Gyroscope,
    Barometer,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [Self::Accelerometer, Self::Gyroscope, Self::Barometer];

    pub fn arity(self) -> usize {
        match self {
            Self::Accelerometer | Self::Gyroscope => 3,
            Self::Barometer => 1,
        }
    }

    /// Sampling rate the pipeline resamples this sensor to.
    pub fn pipeline_rate(self) -> f64 {
        match self {
            Self::Accelerometer | Self::Gyroscope => 100.0,
            Self::Barometer => 10.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Accelerometer => "accelerometer",
            Self::Gyroscope => "gyroscope",
            Self::Barometer => "barometer",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown sensor kind {s:?}"))
    }
}

/// Context channel derived from the raw sensors. The declaration order is the
/// canonical fusion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Acv,
    Ach,
    Gyr,
    Bar,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Self::Acv, Self::Ach, Self::Gyr, Self::Bar];

    pub fn rate(self) -> f64 {
        match self {
            Self::Bar => 10.0,
            _ => 100.0,
        }
    }

    /// Window length in seconds.
    pub fn window_secs(self) -> f64 {
        match self {
            Self::Bar => 20.0,
            _ => 10.0,
        }
    }

    /// Window length in samples.
    pub fn window_len(self) -> usize {
        (self.rate() * self.window_secs()).round() as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Acv => "Acv",
            Self::Ach => "Ach",
            Self::Gyr => "Gyr",
            Self::Bar => "Bar",
        }
    }

    /// Single-letter tag used in fusion names (`V+H+G+B`).
    pub fn letter(self) -> char {
        match self {
            Self::Acv => 'V',
            Self::Ach => 'H',
            Self::Gyr => 'G',
            Self::Bar => 'B',
        }
    }

    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Modality {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|m| {
                m.label().eq_ignore_ascii_case(s) || (s.len() == 1 && s.eq_ignore_ascii_case(&m.letter().to_string()))
            })
            .ok_or_else(|| format!("unknown modality {s:?}"))
    }
}

/// Timestamped raw samples of one physical sensor, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording<T> {
    kind: SensorKind,
    times: Vec<f64>,
    channels: Vec<Vec<T>>,
    nominal_rate: f64,
}

impl<T: Scalar> RawRecording<T> {
    pub fn new(
        kind: SensorKind,
        times: Vec<f64>,
        channels: Vec<Vec<T>>,
        nominal_rate: f64,
    ) -> Result<Self, SignalError> {
        if channels.len() != kind.arity() {
            return Err(SignalError::WrongArity {
                kind,
                expected: kind.arity(),
                got: channels.len(),
            });
        }
        if channels.iter().any(|c| c.len() != times.len()) {
            return Err(SignalError::RaggedChannels);
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SignalError::NonMonotonicTime(i + 1));
        }
        Ok(Self {
            kind,
            times,
            channels,
            nominal_rate,
        })
    }

    /// Builds a recording from rows of `(t, values)`.
    pub fn from_rows(
        kind: SensorKind,
        rows: &[(f64, Vec<T>)],
        nominal_rate: f64,
    ) -> Result<Self, SignalError> {
        let mut channels = vec![Vec::with_capacity(rows.len()); kind.arity()];
        for (t, values) in rows {
            if values.len() != kind.arity() {
                return Err(SignalError::WrongArity {
                    kind,
                    expected: kind.arity(),
                    got: values.len(),
                });
            }
            let _ = t;
            for (c, v) in channels.iter_mut().zip(values) {
                c.push(*v);
            }
        }
        Self::new(kind, rows.iter().map(|r| r.0).collect(), channels, nominal_rate)
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn channel(&self, i: usize) -> &[T] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.channels
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// A uniformly sampled single-channel signal of arbitrary length.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream<T> {
    pub modality: Modality,
    pub rate: f64,
    pub start_time: f64,
    pub samples: Vec<T>,
}

impl<T: Scalar> Stream<T> {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    /// Cuts the fixed-length window for this modality starting at `start_time`,
    /// or `None` if the stream does not cover it.
    pub fn window(&self, start_time: f64) -> Option<SensorWindow<T>> {
        let offset = ((start_time - self.start_time) * self.rate).round();
        if offset < 0.0 {
            return None;
        }
        let from = offset as usize;
        let to = from + self.modality.window_len();
        if to > self.samples.len() {
            return None;
        }
        SensorWindow::new(self.modality, start_time, self.samples[from..to].to_vec()).ok()
    }

    pub fn map_samples(&self, f: impl FnMut(T) -> T) -> Self {
        Self {
            samples: self.samples.iter().copied().map(f).collect(),
            ..self.clone()
        }
    }
}

/// Fixed-length window of one context channel, the unit fed to the activity
/// filter and the quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorWindow<T> {
    modality: Modality,
    start_time: f64,
    samples: Vec<T>,
}

impl<T: Scalar> SensorWindow<T> {
    pub fn new(modality: Modality, start_time: f64, samples: Vec<T>) -> Result<Self, SignalError> {
        if samples.len() != modality.window_len() {
            return Err(SignalError::WrongWindowLength {
                modality,
                expected: modality.window_len(),
                got: samples.len(),
            });
        }
        Self::check_finite(&samples)?;
        Ok(Self {
            modality,
            start_time,
            samples,
        })
    }

    /// Window of arbitrary length, for metrics and tests that do not need the
    /// per-modality length contract.
    pub fn with_len(modality: Modality, start_time: f64, samples: Vec<T>) -> Result<Self, SignalError> {
        Self::check_finite(&samples)?;
        Ok(Self {
            modality,
            start_time,
            samples,
        })
    }

    fn check_finite(samples: &[T]) -> Result<(), SignalError> {
        match samples.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(SignalError::NonFinite(i)),
            None => Ok(()),
        }
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn rate(&self) -> f64 {
        self.modality.rate()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn replace_samples(&self, samples: Vec<T>) -> Self {
        Self {
            modality: self.modality,
            start_time: self.start_time,
            samples,
        }
    }
}

/// Linear-interpolation resampling onto `t0 + k / target_rate`.
pub fn resample<T: Scalar>(rec: &RawRecording<T>, target_rate: f64) -> Result<RawRecording<T>, SignalError> {
    if rec.len() < 2 {
        return Err(SignalError::EmptyRecording);
    }
    let times = rec.times();
    let t0 = times[0];
    let steps = (rec.duration() * target_rate + 1e-9).floor() as usize;
    let mut out_t = Vec::with_capacity(steps + 1);
    let mut out = vec![Vec::with_capacity(steps + 1); rec.channels.len()];
    let mut j = 0usize;
    for k in 0..=steps {
        let t = t0 + k as f64 / target_rate;
        while j + 2 < times.len() && times[j + 1] <= t {
            j += 1;
        }
        let (ta, tb) = (times[j], times[j + 1]);
        for (c, col) in rec.channels.iter().enumerate() {
            let v = if (t - ta).abs() < 1e-9 {
                col[j]
            } else if (t - tb).abs() < 1e-9 {
                col[j + 1]
            } else {
                let w = T::lit((t - ta) / (tb - ta));
                col[j] + (col[j + 1] - col[j]) * w
            };
            out[c].push(v);
        }
        out_t.push(t);
    }
    RawRecording::new(rec.kind, out_t, out, target_rate)
}

/// Splits 3-axis acceleration into vertical and horizontal components using a
/// per-window gravity estimate.
///
/// Gravity is the per-axis mean over non-overlapping 5 s windows; a trailing
/// partial window reuses the previous estimate. `Acv` is the signed
/// projection of the gravity-free acceleration on the gravity direction, `Ach`
/// the magnitude of the residual in the orthogonal plane.
pub fn decompose_acceleration<T: Scalar>(
    rec: &RawRecording<T>,
) -> Result<(Stream<T>, Stream<T>), SignalError> {
    if rec.kind() != SensorKind::Accelerometer {
        return Err(SignalError::WrongSensor {
            expected: SensorKind::Accelerometer,
            got: rec.kind(),
        });
    }
    let rate = rec.nominal_rate();
    let win = (GRAVITY_WINDOW_SECS * rate).round() as usize;
    let n = rec.len();
    if win == 0 || n < win {
        return Err(SignalError::TooShortForGravity(rec.duration()));
    }
    let (ax, ay, az) = (rec.channel(0), rec.channel(1), rec.channel(2));
    let mut acv = Vec::with_capacity(n);
    let mut ach = Vec::with_capacity(n);
    let mut gravity = [T::zero(); 3];
    let mut start = 0;
    while start < n {
        let end = (start + win).min(n);
        if end - start == win {
            let len = T::from_usize(win).unwrap();
            gravity = [
                ax[start..end].iter().copied().sum::<T>() / len,
                ay[start..end].iter().copied().sum::<T>() / len,
                az[start..end].iter().copied().sum::<T>() / len,
            ];
        }
        let norm = (gravity[0] * gravity[0] + gravity[1] * gravity[1] + gravity[2] * gravity[2]).sqrt();
        if norm < T::lit(MIN_GRAVITY) {
            return Err(SignalError::GravityEstimateDegenerate(rec.times()[start]));
        }
        let unit = [gravity[0] / norm, gravity[1] / norm, gravity[2] / norm];
        for i in start..end {
            let d = [ax[i] - gravity[0], ay[i] - gravity[1], az[i] - gravity[2]];
            let v = d[0] * unit[0] + d[1] * unit[1] + d[2] * unit[2];
            let r = [d[0] - v * unit[0], d[1] - v * unit[1], d[2] - v * unit[2]];
            acv.push(v);
            ach.push((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt());
        }
        start = end;
    }
    let start_time = rec.times()[0];
    Ok((
        Stream {
            modality: Modality::Acv,
            rate,
            start_time,
            samples: acv,
        },
        Stream {
            modality: Modality::Ach,
            rate,
            start_time,
            samples: ach,
        },
    ))
}

/// Selects the world-frame Z (sky) axis of a gyroscope recording.
pub fn gyro_sky_axis<T: Scalar>(rec: &RawRecording<T>) -> Result<Stream<T>, SignalError> {
    if rec.kind() != SensorKind::Gyroscope {
        return Err(SignalError::WrongSensor {
            expected: SensorKind::Gyroscope,
            got: rec.kind(),
        });
    }
    Ok(Stream {
        modality: Modality::Gyr,
        rate: rec.nominal_rate(),
        start_time: rec.times()[0],
        samples: rec.channel(2).to_vec(),
    })
}

/// Standard-atmosphere pressure to altitude conversion (hPa to metres).
pub fn pressure_to_altitude<T: Scalar>(p: T) -> Result<T, SignalError> {
    if p.is_nan() || p <= T::zero() {
        return Err(SignalError::InvalidPressure);
    }
    Ok(T::lit(44330.0) * (T::one() - (p / T::lit(1013.25)).powf(T::one() / T::lit(5.255))))
}

/// Inverse of [`pressure_to_altitude`].
pub fn altitude_to_pressure<T: Scalar>(h: T) -> T {
    T::lit(1013.25) * (T::one() - h / T::lit(44330.0)).powf(T::lit(5.255))
}

/// Converts a barometer recording to an altitude stream.
pub fn barometer_altitude<T: Scalar>(rec: &RawRecording<T>) -> Result<Stream<T>, SignalError> {
    if rec.kind() != SensorKind::Barometer {
        return Err(SignalError::WrongSensor {
            expected: SensorKind::Barometer,
            got: rec.kind(),
        });
    }
    let samples = rec
        .channel(0)
        .iter()
        .map(|&p| pressure_to_altitude(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Stream {
        modality: Modality::Bar,
        rate: rec.nominal_rate(),
        start_time: rec.times()[0],
        samples,
    })
}

/// The four context channels of one device, resampled and smoothed over the
/// whole recording.
#[derive(Debug, Clone)]
pub struct ContextStreams<T> {
    pub acv: Stream<T>,
    pub ach: Stream<T>,
    pub gyr: Stream<T>,
    pub bar: Stream<T>,
}

impl<T: Scalar> ContextStreams<T> {
    pub fn get(&self, m: Modality) -> &Stream<T> {
        match m {
            Modality::Acv => &self.acv,
            Modality::Ach => &self.ach,
            Modality::Gyr => &self.gyr,
            Modality::Bar => &self.bar,
        }
    }

    /// Latest time at which every channel still covers a full window.
    pub fn covered_until(&self) -> f64 {
        Modality::ALL
            .iter()
            .map(|&m| {
                let s = self.get(m);
                s.start_time + s.duration()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn start_time(&self) -> f64 {
        Modality::ALL
            .iter()
            .map(|&m| self.get(m).start_time)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs resampling, channel conversion and the whole-data smoothing pass.
pub fn preprocess_device<T: Scalar>(
    acc: &RawRecording<T>,
    gyro: &RawRecording<T>,
    baro: &RawRecording<T>,
) -> Result<ContextStreams<T>, SignalError> {
    let whole = FilterChainConfig::whole_data();
    let acc = resample(acc, SensorKind::Accelerometer.pipeline_rate())?;
    let gyro = resample(gyro, SensorKind::Gyroscope.pipeline_rate())?;
    let baro = resample(baro, SensorKind::Barometer.pipeline_rate())?;
    let (acv, ach) = decompose_acceleration(&acc)?;
    let gyr = gyro_sky_axis(&gyro)?;
    let bar = barometer_altitude(&baro)?;
    let smooth = |s: Stream<T>| -> Result<Stream<T>, SignalError> {
        let samples = apply_filter_chain(&s.samples, &whole)?;
        Ok(Stream { samples, ..s })
    };
    Ok(ContextStreams {
        acv: smooth(acv)?,
        ach: smooth(ach)?,
        gyr: smooth(gyr)?,
        bar: smooth(bar)?,
    })
}

/// Applies the per-window smoothing chain for the window's modality.
pub fn condition_window<T: Scalar>(w: &SensorWindow<T>) -> Result<SensorWindow<T>, SignalError> {
    let cfg = FilterChainConfig::window(w.modality());
    Ok(w.replace_samples(apply_filter_chain(w.samples(), &cfg)?))
}
