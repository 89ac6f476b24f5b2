//! CSV recordings: header `t,<v1>[,v2,v3]`, one file per sensor per device,
//! named `<car>_<spot>_<sensor>.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{RawRecording, SensorKind, SignalError, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}: {source}")]
    Signal { path: String, source: SignalError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identity of one device in a recording set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId {
    pub car: String,
    pub spot: String,
}

impl DeviceId {
    pub fn new(car: impl Into<String>, spot: impl Into<String>) -> Self {
        Self {
            car: car.into(),
            spot: spot.into(),
        }
    }

    pub fn file_name(&self, kind: SensorKind) -> String {
        format!("{}_{}_{}.csv", self.car, self.spot, kind.name())
    }
}

impl std::fmt::Display for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}_{}", self.car, self.spot)
    }
}

/// Raw recordings of all three sensors of one device.
#[derive(Debug, Clone)]
pub struct DeviceRecording<T> {
    pub id: DeviceId,
    pub accelerometer: RawRecording<T>,
    pub gyroscope: RawRecording<T>,
    pub barometer: RawRecording<T>,
}

impl<T> DeviceRecording<T> {
    pub fn get(&self, kind: SensorKind) -> &RawRecording<T> {
        match kind {
            SensorKind::Accelerometer => &self.accelerometer,
            SensorKind::Gyroscope => &self.gyroscope,
            SensorKind::Barometer => &self.barometer,
        }
    }
}

pub fn read_recording<T: Scalar, R: Read>(
    reader: R,
    kind: SensorKind,
    label: &str,
) -> Result<RawRecording<T>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let wrap = |source| CsvError::Csv {
        path: label.to_string(),
        source,
    };
    let headers = rdr.headers().map_err(wrap)?.clone();
    if headers.len() != kind.arity() + 1 || &headers[0] != "t" {
        return Err(CsvError::Format {
            path: label.to_string(),
            msg: format!("expected header t + {} value column(s)", kind.arity()),
        });
    }
    let mut times = Vec::new();
    let mut channels = vec![Vec::new(); kind.arity()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(wrap)?;
        let parse = |i: usize| -> Result<f64, CsvError> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| CsvError::Format {
                    path: label.to_string(),
                    msg: format!("row {}: bad number in column {}", line + 2, i + 1),
                })
        };
        times.push(parse(0)?);
        for (c, col) in channels.iter_mut().enumerate() {
            col.push(T::lit(parse(c + 1)?));
        }
    }
    let rate = estimate_rate(&times).unwrap_or(kind.pipeline_rate());
    RawRecording::new(kind, times, channels, rate).map_err(|source| CsvError::Signal {
        path: label.to_string(),
        source,
    })
}

fn estimate_rate(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let span = times[times.len() - 1] - times[0];
    (span > 0.0).then(|| (times.len() - 1) as f64 / span)
}

pub fn write_recording<T: Scalar, W: Write>(rec: &RawRecording<T>, mut w: W) -> std::io::Result<()> {
    let header = match rec.kind().arity() {
        1 => "t,v1",
        _ => "t,v1,v2,v3",
    };
    writeln!(w, "{header}")?;
    for (i, t) in rec.times().iter().enumerate() {
        write!(w, "{t:.6}")?;
        for c in rec.channels() {
            write!(w, ",{:.9}", c[i].as_f64())?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_stream<T: Scalar, W: Write>(s: &Stream<T>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,{}", s.modality)?;
    for (i, v) in s.samples.iter().enumerate() {
        writeln!(w, "{:.6},{:.9}", s.start_time + i as f64 / s.rate, v.as_f64())?;
    }
    Ok(())
}

pub fn write_device_set<T: Scalar>(dir: &Path, devices: &[DeviceRecording<T>]) -> Result<Vec<PathBuf>, CsvError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for d in devices {
        for kind in SensorKind::ALL {
            let path = dir.join(d.id.file_name(kind));
            let f = std::io::BufWriter::new(fs::File::create(&path)?);
            write_recording(d.get(kind), f)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Loads every complete `<car>_<spot>_<sensor>.csv` triple in `dir`.
pub fn read_device_set<T: Scalar>(dir: &Path) -> Result<Vec<DeviceRecording<T>>, CsvError> {
    let mut found: BTreeMap<DeviceId, BTreeMap<SensorKind, PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let parts: Vec<&str> = stem.rsplitn(3, '_').collect();
        if parts.len() != 3 {
            continue;
        }
        let Ok(kind) = parts[0].parse::<SensorKind>() else { continue };
        found
            .entry(DeviceId::new(parts[2], parts[1]))
            .or_default()
            .insert(kind, path);
    }
    let mut devices = Vec::new();
    for (id, files) in found {
        if files.len() != 3 {
            return Err(CsvError::Format {
                path: dir.display().to_string(),
                msg: format!("device {id} is missing sensor files"),
            });
        }
        let load = |kind: SensorKind| -> Result<RawRecording<T>, CsvError> {
            let path = &files[&kind];
            read_recording(fs::File::open(path)?, kind, &path.display().to_string())
        };
        devices.push(DeviceRecording {
            accelerometer: load(SensorKind::Accelerometer)?,
            gyroscope: load(SensorKind::Gyroscope)?,
            barometer: load(SensorKind::Barometer)?,
            id,
        });
    }
    Ok(devices)
}
