//! Synthetic in-car context recordings.
//!
//! Stands in for a real multi-car driving dataset. Every car follows a
//! *route*: a set of road features (bumps, road texture, shared deceleration
//! points, turns, gentle curvature, terrain) laid out along route time. A car
//! traverses the route with its own speed fluctuations and adds car-specific
//! context on top (own bumps, traffic-driven acceleration, lane changes,
//! driver-specific steering, weather drift). Devices in the same car see the
//! same car context, scaled by a per-spot attenuation, plus independent
//! sensor noise.
//!
//! By default the two cars drive unrelated routes. With `independent_routes`
//! off, car 2 drives car 1's route `route_lag` seconds behind it: a small lag
//! models a follower car in a similar context, a large one the same road
//! minutes apart.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::csvio::{DeviceId, DeviceRecording};
use super::{altitude_to_pressure, RawRecording, SensorKind};
use crate::config::{ConfigError, KeyValueConfig};

const GRAVITY: f64 = 9.81;
const LATENT_RATE: f64 = 100.0;

/// Default distance of a follower car behind the leader, s.
pub const FOLLOWER_LAG: f64 = 4.0;

/// Mounting spots, in order of assignment to devices.
pub const SPOTS: [&str; 5] = ["dashboard", "console", "rearleft", "rearright", "trunk"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    City,
    Country,
    Highway,
    Parking,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Self::City, Self::Country, Self::Highway, Self::Parking];

    pub fn name(self) -> &'static str {
        match self {
            Self::City => "city",
            Self::Country => "country",
            Self::Highway => "highway",
            Self::Parking => "parking",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

/// Event rates (per route second) and amplitudes for one driving scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Mean speed, m/s.
    pub speed: f64,
    pub bump_rate: f64,
    /// Peak vertical acceleration of a bump, m/s².
    pub bump_amp: f64,
    /// Standard deviation of continuous road texture, m/s².
    pub texture_amp: f64,
    /// Fraction of vertical events that belong to the road rather than the car.
    pub shared_bump_fraction: f64,
    pub accel_rate: f64,
    /// Peak longitudinal acceleration of a traffic-driven event, m/s².
    pub accel_amp: f64,
    /// Rate of decelerations tied to the road (speed limits, crossings).
    pub shared_decel_rate: f64,
    pub turn_rate: f64,
    /// Mean absolute turn angle, rad.
    pub turn_angle: f64,
    /// Standard deviation of gentle road curvature, rad/s.
    pub curve_amp: f64,
    pub lane_change_rate: f64,
    /// Standard deviation of terrain slope, metres per route second.
    pub terrain_slope: f64,
    pub terrain_change_rate: f64,
    /// Standard deviation of short road undulations on top of the terrain, m.
    pub undulation_amp: f64,
    /// Standard deviation of road-induced horizontal vibration, m/s².
    pub horizontal_texture_amp: f64,
}

impl ScenarioParams {
    pub fn preset(s: Scenario) -> Self {
        match s {
            Scenario::City => Self {
                speed: 9.0,
                bump_rate: 0.35,
                bump_amp: 0.8,
                texture_amp: 0.12,
                shared_bump_fraction: 0.8,
                accel_rate: 0.08,
                accel_amp: 0.8,
                shared_decel_rate: 0.03,
                turn_rate: 0.03,
                turn_angle: 1.4,
                curve_amp: 0.02,
                lane_change_rate: 0.02,
                terrain_slope: 0.04,
                terrain_change_rate: 0.05,
                undulation_amp: 0.6,
                horizontal_texture_amp: 0.5,
            },
            Scenario::Country => Self {
                speed: 20.0,
                bump_rate: 0.5,
                bump_amp: 1.0,
                texture_amp: 0.25,
                shared_bump_fraction: 0.8,
                accel_rate: 0.03,
                accel_amp: 0.6,
                shared_decel_rate: 0.01,
                turn_rate: 0.01,
                turn_angle: 1.2,
                curve_amp: 0.06,
                lane_change_rate: 0.01,
                terrain_slope: 0.08,
                terrain_change_rate: 0.04,
                undulation_amp: 0.8,
                horizontal_texture_amp: 0.35,
            },
            Scenario::Highway => Self {
                speed: 30.0,
                bump_rate: 0.4,
                bump_amp: 1.2,
                texture_amp: 0.3,
                shared_bump_fraction: 0.8,
                accel_rate: 0.015,
                accel_amp: 0.5,
                shared_decel_rate: 0.005,
                turn_rate: 0.003,
                turn_angle: 0.8,
                curve_amp: 0.03,
                lane_change_rate: 0.03,
                terrain_slope: 0.08,
                terrain_change_rate: 0.02,
                undulation_amp: 0.8,
                horizontal_texture_amp: 0.35,
            },
            Scenario::Parking => Self {
                speed: 4.0,
                bump_rate: 0.2,
                bump_amp: 0.5,
                texture_amp: 0.06,
                shared_bump_fraction: 0.8,
                accel_rate: 0.15,
                accel_amp: 0.6,
                shared_decel_rate: 0.05,
                turn_rate: 0.12,
                turn_angle: 1.5,
                curve_amp: 0.0,
                lane_change_rate: 0.0,
                terrain_slope: 0.03,
                terrain_change_rate: 0.08,
                undulation_amp: 0.4,
                horizontal_texture_amp: 0.4,
            },
        }
    }
}

/// Generator knobs; loadable from `gen.*` keys of a key=value file.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub scenario: ScenarioParams,
    /// Accelerometer noise standard deviation, m/s².
    pub acc_noise: f64,
    /// Gyroscope noise standard deviation, rad/s.
    pub gyro_noise: f64,
    /// Barometer noise standard deviation, hPa.
    pub baro_noise: f64,
    /// Vertical attenuation per spot (same order as [`SPOTS`]).
    pub vertical_attenuation: [f64; 5],
    /// Horizontal attenuation per spot.
    pub horizontal_attenuation: [f64; 5],
    /// Time by which car 2 trails car 1 along the shared route, s.
    pub route_lag: f64,
    pub independent_routes: bool,
    /// Standard deviation of the per-car speed ratio around 1.
    pub speed_variation: f64,
    /// Timestamp jitter standard deviation, s.
    pub timestamp_jitter: f64,
    /// Altitude of the route origin, m.
    pub base_altitude: f64,
    /// Each car's recordings start at a uniform offset below this on the
    /// shared clock, s; devices in one car start together.
    pub start_offset_max: f64,
}

impl GeneratorConfig {
    pub fn for_scenario(s: Scenario) -> Self {
        Self {
            scenario: ScenarioParams::preset(s),
            acc_noise: 0.02,
            gyro_noise: 0.003,
            baro_noise: 0.004,
            vertical_attenuation: [1.0, 0.9, 0.8, 0.8, 0.7],
            horizontal_attenuation: [1.0, 0.95, 0.9, 0.9, 0.85],
            route_lag: FOLLOWER_LAG,
            independent_routes: true,
            speed_variation: 0.08,
            timestamp_jitter: 0.0005,
            base_altitude: 120.0,
            start_offset_max: 5.0,
        }
    }

    /// Overrides fields from `gen.*` keys.
    pub fn apply(&mut self, cfg: &KeyValueConfig) -> Result<(), ConfigError> {
        let s = &mut self.scenario;
        cfg.apply("gen.speed", &mut s.speed)?;
        cfg.apply("gen.bump_rate", &mut s.bump_rate)?;
        cfg.apply("gen.bump_amp", &mut s.bump_amp)?;
        cfg.apply("gen.texture_amp", &mut s.texture_amp)?;
        cfg.apply("gen.shared_bump_fraction", &mut s.shared_bump_fraction)?;
        cfg.apply("gen.accel_rate", &mut s.accel_rate)?;
        cfg.apply("gen.accel_amp", &mut s.accel_amp)?;
        cfg.apply("gen.shared_decel_rate", &mut s.shared_decel_rate)?;
        cfg.apply("gen.turn_rate", &mut s.turn_rate)?;
        cfg.apply("gen.turn_angle", &mut s.turn_angle)?;
        cfg.apply("gen.curve_amp", &mut s.curve_amp)?;
        cfg.apply("gen.lane_change_rate", &mut s.lane_change_rate)?;
        cfg.apply("gen.terrain_slope", &mut s.terrain_slope)?;
        cfg.apply("gen.terrain_change_rate", &mut s.terrain_change_rate)?;
        cfg.apply("gen.undulation_amp", &mut s.undulation_amp)?;
        cfg.apply("gen.horizontal_texture_amp", &mut s.horizontal_texture_amp)?;
        cfg.apply("gen.acc_noise", &mut self.acc_noise)?;
        cfg.apply("gen.gyro_noise", &mut self.gyro_noise)?;
        cfg.apply("gen.baro_noise", &mut self.baro_noise)?;
        cfg.apply("gen.route_lag", &mut self.route_lag)?;
        cfg.apply("gen.independent_routes", &mut self.independent_routes)?;
        cfg.apply("gen.speed_variation", &mut self.speed_variation)?;
        cfg.apply("gen.timestamp_jitter", &mut self.timestamp_jitter)?;
        cfg.apply("gen.base_altitude", &mut self.base_altitude)?;
        cfg.apply("gen.start_offset_max", &mut self.start_offset_max)?;
        for (i, spot) in SPOTS.iter().enumerate() {
            cfg.apply(&format!("gen.attenuation.vertical.{spot}"), &mut self.vertical_attenuation[i])?;
            cfg.apply(&format!("gen.attenuation.horizontal.{spot}"), &mut self.horizontal_attenuation[i])?;
        }
        Ok(())
    }

    /// Car 2 follows car 1 along the same route, `lag` seconds behind.
    pub fn follower(mut self, lag: f64) -> Self {
        self.independent_routes = false;
        self.route_lag = lag;
        self
    }

    /// Noise-free variant, for tests.
    pub fn noiseless(mut self) -> Self {
        self.acc_noise = 0.0;
        self.gyro_noise = 0.0;
        self.baro_noise = 0.0;
        self.timestamp_jitter = 0.0;
        self
    }
}

/// Deterministic child RNG for a named component.
fn child_rng(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for b in tag.bytes().chain(index.to_le_bytes()) {
        h = (h ^ b as u64).wrapping_mul(0x1000_0000_01B3);
        h ^= h >> 29;
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Poisson event times in `[from, to)`.
fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, from: f64, to: f64) -> Vec<f64> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut out = Vec::new();
    let mut t = from + exp.sample(rng);
    while t < to {
        out.push(t);
        t += exp.sample(rng);
    }
    out
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

/// Smooth zero-mean noise: white noise through a first-order low-pass with
/// the given correlation time, scaled to unit variance times `sd`.
fn smooth_noise(rng: &mut ChaCha8Rng, n: usize, rate: f64, corr_time: f64, sd: f64) -> Vec<f64> {
    let a = (-1.0 / (rate * corr_time)).exp();
    let drive = (1.0 - a * a).sqrt();
    let mut x = normal(rng, 1.0);
    (0..n)
        .map(|_| {
            x = a * x + drive * normal(rng, 1.0);
            x * sd
        })
        .collect()
}

/// Damped 1.6 Hz body bounce excited by a bump at `tau = 0`.
fn bump_response(tau: f64) -> f64 {
    if !(0.0..2.0).contains(&tau) {
        return 0.0;
    }
    (-tau / 0.35).exp() * (2.0 * PI * 1.6 * tau).sin()
}

/// Raised-cosine pulse on `[0, width)` with unit peak.
fn hann(tau: f64, width: f64) -> f64 {
    if tau < 0.0 || tau >= width {
        return 0.0;
    }
    0.5 * (1.0 - (2.0 * PI * tau / width).cos())
}

/// A signal sampled on a regular grid, read back by linear interpolation.
#[derive(Debug, Clone)]
struct Grid {
    origin: f64,
    rate: f64,
    values: Vec<f64>,
}

impl Grid {
    fn zeros(origin: f64, span: f64, rate: f64) -> Self {
        Self {
            origin,
            rate,
            values: vec![0.0; (span * rate).ceil() as usize + 2],
        }
    }

    fn at(&self, t: f64) -> f64 {
        let x = (t - self.origin) * self.rate;
        if x <= 0.0 {
            return self.values[0];
        }
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap_or(&0.0);
        }
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn time(&self, i: usize) -> f64 {
        self.origin + i as f64 / self.rate
    }

    fn add_events(&mut self, events: &[(f64, f64)], support: f64, shape: impl Fn(f64) -> f64) {
        for &(at, amp) in events {
            let from = (((at - self.origin) * self.rate).floor().max(0.0)) as usize;
            let to = (((at + support - self.origin) * self.rate).ceil() as usize).min(self.values.len());
            for i in from..to {
                let tau = self.time(i) - at;
                self.values[i] += amp * shape(tau);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Turn {
    at: f64,
    angle: f64,
    duration: f64,
}

/// Road features of one route, indexed by route time.
#[derive(Debug, Clone)]
struct Route {
    vertical: Grid,
    /// Road-induced horizontal vibration, longitudinal and lateral.
    shake: [Grid; 2],
    decel: Grid,
    curvature: Grid,
    terrain: Grid,
    turns: Vec<Turn>,
}

impl Route {
    fn generate(rng: &mut ChaCha8Rng, p: &ScenarioParams, from: f64, to: f64) -> Self {
        let span = to - from;
        let mut vertical = Grid::zeros(from, span, LATENT_RATE);
        let bumps: Vec<(f64, f64)> = poisson_times(rng, p.bump_rate * p.shared_bump_fraction, from, to)
            .into_iter()
            .map(|t| {
                let amp = p.bump_amp * (0.5 + rng.gen::<f64>()) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (t, amp)
            })
            .collect();
        vertical.add_events(&bumps, 2.0, bump_response);
        let texture = smooth_noise(rng, vertical.values.len(), LATENT_RATE, 0.05, p.texture_amp);
        vertical.values.iter_mut().zip(texture).for_each(|(v, t)| *v += t);

        let shake = [0, 1].map(|_| {
            let mut g = Grid::zeros(from, span, LATENT_RATE);
            g.values = smooth_noise(rng, g.values.len(), LATENT_RATE, 0.15, p.horizontal_texture_amp);
            g
        });

        let mut decel = Grid::zeros(from, span, LATENT_RATE);
        let events: Vec<(f64, f64)> = poisson_times(rng, p.shared_decel_rate, from, to)
            .into_iter()
            .map(|t| (t, -p.accel_amp * (0.6 + 0.8 * rng.gen::<f64>())))
            .collect();
        decel.add_events(&events, 4.0, |tau| hann(tau, 4.0));

        let mut curvature = Grid::zeros(from, span, 10.0);
        curvature.values = smooth_noise(rng, curvature.values.len(), 10.0, 4.0, p.curve_amp);

        let turns = poisson_times(rng, p.turn_rate, from, to)
            .into_iter()
            .map(|at| Turn {
                at,
                angle: p.turn_angle * (0.6 + 0.8 * rng.gen::<f64>()) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                duration: 3.0 + 3.0 * rng.gen::<f64>(),
            })
            .collect();

        let mut terrain = Grid::zeros(from, span, 10.0);
        let mut slope = normal(rng, p.terrain_slope);
        let switch = (p.terrain_change_rate / 10.0).clamp(0.0, 1.0);
        let mut h = 0.0;
        for v in terrain.values.iter_mut() {
            if rng.gen_bool(switch) {
                slope = normal(rng, p.terrain_slope);
            }
            h += slope / 10.0;
            *v = h;
        }
        // Soften slope discontinuities.
        let kernel = crate::signal::filter::gaussian_kernel::<f64>(10.0);
        terrain.values = crate::signal::filter::convolve_reflect(&terrain.values, &kernel);
        let undulation = smooth_noise(rng, terrain.values.len(), 10.0, 3.0, p.undulation_amp);
        terrain.values.iter_mut().zip(undulation).for_each(|(h, u)| *h += u);

        Self {
            vertical,
            shake,
            decel,
            curvature,
            terrain,
            turns,
        }
    }
}

/// Context of one car on the real-time grid.
#[derive(Debug, Clone)]
struct CarContext {
    vertical: Vec<f64>,
    longitudinal: Vec<f64>,
    lateral: Vec<f64>,
    heading: Vec<f64>,
    yaw: Vec<f64>,
    altitude: Vec<f64>,
}

fn car_context(rng: &mut ChaCha8Rng, route: &Route, p: &ScenarioParams, cfg: &GeneratorConfig, lag: f64, duration: f64) -> CarContext {
    let n = (duration * LATENT_RATE).round() as usize + 1;
    let speed_ratio: Vec<f64> = smooth_noise(rng, n, LATENT_RATE, 20.0, cfg.speed_variation)
        .into_iter()
        .map(|x| (1.0 + x).max(0.2))
        .collect();
    let mut route_pos = Vec::with_capacity(n);
    let mut pos = -lag;
    for r in &speed_ratio {
        route_pos.push(pos);
        pos += r / LATENT_RATE;
    }

    let suspension = 0.85 + 0.3 * rng.gen::<f64>();
    let driver_pace = 0.8 + 0.4 * rng.gen::<f64>();
    let mut own_vertical = Grid::zeros(0.0, duration, LATENT_RATE);
    let own_bumps: Vec<(f64, f64)> =
        poisson_times(rng, p.bump_rate * (1.0 - p.shared_bump_fraction), 0.0, duration)
            .into_iter()
            .map(|t| (t, p.bump_amp * (0.5 + rng.gen::<f64>()) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }))
            .collect();
    own_vertical.add_events(&own_bumps, 2.0, bump_response);

    let mut own_long = Grid::zeros(0.0, duration, LATENT_RATE);
    let accel: Vec<(f64, f64)> = poisson_times(rng, p.accel_rate, 0.0, duration)
        .into_iter()
        .map(|t| (t, p.accel_amp * (0.5 + rng.gen::<f64>()) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }))
        .collect();
    let accel_width = 2.0 + 4.0 * rng.gen::<f64>();
    own_long.add_events(&accel, accel_width, |tau| hann(tau, accel_width));

    let mut own_yaw = Grid::zeros(0.0, duration, LATENT_RATE);
    let lane: Vec<(f64, f64)> = poisson_times(rng, p.lane_change_rate, 0.0, duration)
        .into_iter()
        .map(|t| (t, 0.06 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }))
        .collect();
    own_yaw.add_events(&lane, 4.0, |tau| hann(tau, 2.0) - hann(tau - 2.0, 2.0));
    let steering = smooth_noise(rng, n, LATENT_RATE, 0.8, 0.3 * p.curve_amp + 0.008);

    // Engine and drivetrain vibration, present even at standstill.
    let idle = [0, 1].map(|_| smooth_noise(rng, n, LATENT_RATE, 0.15, 0.5 * p.horizontal_texture_amp));
    let weather_slope = normal(rng, 0.002);

    let mut ctx = CarContext {
        vertical: Vec::with_capacity(n),
        longitudinal: Vec::with_capacity(n),
        lateral: Vec::with_capacity(n),
        heading: Vec::with_capacity(n),
        yaw: Vec::with_capacity(n),
        altitude: Vec::with_capacity(n),
    };
    let mut heading = 0.0;
    for i in 0..n {
        let t = i as f64 / LATENT_RATE;
        let rp = route_pos[i];
        let sr = speed_ratio[i];
        let mut yaw = route.curvature.at(rp) * sr + own_yaw.at(t) + steering[i];
        for turn in &route.turns {
            let width = turn.duration * driver_pace;
            let tau = rp - turn.at + width / 2.0;
            if (0.0..width).contains(&tau) {
                // Unit-area raised cosine scaled to the turn angle.
                yaw += turn.angle * sr * 2.0 / width * hann(tau, width);
            }
        }
        let speed = p.speed * sr;
        ctx.vertical.push(suspension * route.vertical.at(rp) * sr.sqrt() + own_vertical.at(t));
        let shake = sr.sqrt();
        ctx.longitudinal.push(own_long.at(t) + route.decel.at(rp) + shake * route.shake[0].at(rp) + idle[0][i]);
        ctx.lateral.push(speed * yaw + shake * route.shake[1].at(rp) + idle[1][i]);
        ctx.heading.push(heading);
        ctx.yaw.push(yaw);
        ctx.altitude.push(route.terrain.at(rp) + weather_slope * t);
        heading += yaw / LATENT_RATE;
    }
    ctx
}

fn jittered_times(rng: &mut ChaCha8Rng, rate: f64, n: usize, jitter: f64) -> Vec<f64> {
    let bound = 0.25 / rate;
    (0..n)
        .map(|k| k as f64 / rate + normal(rng, jitter).clamp(-bound, bound))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn device_recording(
    rng: &mut ChaCha8Rng,
    id: DeviceId,
    start: f64,
    spot: usize,
    ctx: &CarContext,
    cfg: &GeneratorConfig,
    duration: f64,
) -> DeviceRecording<f64> {
    let n = (duration * LATENT_RATE).round() as usize + 1;
    let att_v = cfg.vertical_attenuation[spot % SPOTS.len()];
    let att_h = cfg.horizontal_attenuation[spot % SPOTS.len()];

    let shift = |t: Vec<f64>| -> Vec<f64> { t.into_iter().map(|x| x + start).collect() };
    let acc_t = shift(jittered_times(rng, LATENT_RATE, n, cfg.timestamp_jitter));
    let mut acc = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let (s, c) = ctx.heading[i].sin_cos();
        let (lon, lat) = (ctx.longitudinal[i], ctx.lateral[i]);
        acc[0].push(att_h * (lon * c - lat * s) + normal(rng, cfg.acc_noise));
        acc[1].push(att_h * (lon * s + lat * c) + normal(rng, cfg.acc_noise));
        acc[2].push(GRAVITY + att_v * ctx.vertical[i] + normal(rng, cfg.acc_noise));
    }

    let gyro_t = shift(jittered_times(rng, LATENT_RATE, n, cfg.timestamp_jitter));
    let mut gyro = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        gyro[0].push(normal(rng, cfg.gyro_noise));
        gyro[1].push(normal(rng, cfg.gyro_noise));
        gyro[2].push(ctx.yaw[i] + normal(rng, cfg.gyro_noise));
    }

    let baro_rate = SensorKind::Barometer.pipeline_rate();
    let nb = (duration * baro_rate).round() as usize + 1;
    let baro_t = shift(jittered_times(rng, baro_rate, nb, cfg.timestamp_jitter));
    let offset = normal(rng, 2.0);
    let step = (LATENT_RATE / baro_rate) as usize;
    let baro: Vec<f64> = (0..nb)
        .map(|k| {
            let h = cfg.base_altitude + ctx.altitude[(k * step).min(n - 1)] + offset;
            altitude_to_pressure(h) + normal(rng, cfg.baro_noise)
        })
        .collect();

    DeviceRecording {
        id,
        accelerometer: RawRecording::new(SensorKind::Accelerometer, acc_t, acc, LATENT_RATE).expect("valid"),
        gyroscope: RawRecording::new(SensorKind::Gyroscope, gyro_t, gyro, LATENT_RATE).expect("valid"),
        barometer: RawRecording::new(SensorKind::Barometer, baro_t, vec![baro], baro_rate).expect("valid"),
    }
}

/// Generates recordings for `n_car1` devices in car 1 and `n_car2` in car 2.
///
/// Output is fully determined by `seed` and `cfg`. Devices are named
/// `car1_<spot>` / `car2_<spot>`.
pub fn generate_synthetic_context(
    seed: u64,
    cfg: &GeneratorConfig,
    n_car1: usize,
    n_car2: usize,
    duration: f64,
) -> Vec<DeviceRecording<f64>> {
    let p = &cfg.scenario;
    let margin = 60.0 + 0.5 * duration;
    let lag = cfg.route_lag.max(0.0);
    let route1 = Route::generate(&mut child_rng(seed, "route", 0), p, -lag - margin, duration + margin);
    let route2 = if cfg.independent_routes {
        Route::generate(&mut child_rng(seed, "route", 1), p, -lag - margin, duration + margin)
    } else {
        route1.clone()
    };
    let cars = [(1usize, n_car1, &route1, 0.0), (2, n_car2, &route2, lag)];
    let mut out = Vec::with_capacity(n_car1 + n_car2);
    for (car, count, route, car_lag) in cars {
        if count == 0 {
            continue;
        }
        let mut car_rng = child_rng(seed, "car", car as u64);
        let start = if cfg.start_offset_max > 0.0 {
            (car_rng.gen::<f64>() * cfg.start_offset_max * LATENT_RATE).floor() / LATENT_RATE
        } else {
            0.0
        };
        let ctx = car_context(&mut car_rng, route, p, cfg, car_lag, duration);
        for spot in 0..count {
            let name = SPOTS.get(spot).map_or_else(|| format!("spot{spot}"), |s| s.to_string());
            let id = DeviceId::new(format!("car{car}"), name);
            let mut rng = child_rng(seed, "device", (car * 1000 + spot) as u64);
            out.push(device_recording(&mut rng, id, start, spot, &ctx, cfg, duration));
        }
    }
    out
}

/// A device lying in a parked car with the engine idling: gravity, a faint
/// engine vibration, constant pressure and sensor noise only.
pub fn generate_stationary(seed: u64, cfg: &GeneratorConfig, duration: f64, id: DeviceId) -> DeviceRecording<f64> {
    let mut rng = child_rng(seed, "stationary", 0);
    let n = (duration * LATENT_RATE).round() as usize + 1;
    let engine_phase = rng.gen::<f64>() * 2.0 * PI;
    let acc_t = jittered_times(&mut rng, LATENT_RATE, n, cfg.timestamp_jitter);
    let mut acc = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for t in &acc_t {
        let idle = 0.01 * (2.0 * PI * 27.0 * t + engine_phase).sin();
        acc[0].push(normal(&mut rng, cfg.acc_noise));
        acc[1].push(normal(&mut rng, cfg.acc_noise));
        acc[2].push(GRAVITY + idle + normal(&mut rng, cfg.acc_noise));
    }
    let gyro_t = jittered_times(&mut rng, LATENT_RATE, n, cfg.timestamp_jitter);
    let gyro = (0..3)
        .map(|_| (0..n).map(|_| normal(&mut rng, cfg.gyro_noise)).collect())
        .collect();
    let baro_rate = SensorKind::Barometer.pipeline_rate();
    let nb = (duration * baro_rate).round() as usize + 1;
    let baro_t = jittered_times(&mut rng, baro_rate, nb, cfg.timestamp_jitter);
    let p0 = altitude_to_pressure(cfg.base_altitude);
    let baro = (0..nb).map(|_| p0 + normal(&mut rng, cfg.baro_noise)).collect();
    DeviceRecording {
        id,
        accelerometer: RawRecording::new(SensorKind::Accelerometer, acc_t, acc, LATENT_RATE).expect("valid"),
        gyroscope: RawRecording::new(SensorKind::Gyroscope, gyro_t, gyro, LATENT_RATE).expect("valid"),
        barometer: RawRecording::new(SensorKind::Barometer, baro_t, vec![baro], baro_rate).expect("valid"),
    }
}
