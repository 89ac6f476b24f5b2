//! Context-based zero-interaction pairing for cars.
//!
//! Devices in the same car record the same motion. Each device turns a few
//! seconds of accelerometer, gyroscope and barometer data into a short bit
//! string; two devices whose bit strings are similar enough derive a shared
//! key through a fuzzy password-authenticated key exchange.
//!
//! The crate is generic over the sample scalar (`f32` or `f64`); the aliases
//! at the bottom name the common `f64` instantiations.

pub mod activity;
pub mod config;
pub mod ecc;
pub mod eval;
pub mod field;
pub mod pake;
pub mod protocol;
pub mod quantizer;
pub mod scalar;
pub mod security;
pub mod signal;
pub mod transport;

pub use scalar::Scalar;

pub type SensorWindowF64 = signal::SensorWindow<f64>;
pub type SensorWindowF32 = signal::SensorWindow<f32>;
pub type StreamF64 = signal::Stream<f64>;
pub type RawRecordingF64 = signal::RawRecording<f64>;
pub type ContextStreamsF64 = signal::ContextStreams<f64>;
