use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args as ClapArgs;
use fastzip::eval::{build_tables, common_grid, preprocess_recordings, DeviceContext};
use fastzip::quantizer::{fusion_name, parse_modalities, DumpRecord};
use fastzip::signal::csvio::{read_device_set, write_device_set, write_stream, DeviceRecording};
use fastzip::signal::synth::{generate_synthetic_context, Scenario};
use fastzip::signal::Modality;

use crate::error::{data, usage, CliResult};
use crate::settings::Settings;

#[derive(ClapArgs)]
pub struct PreprocessArgs {
    /// Directory of `<car>_<spot>_<sensor>.csv` recordings.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    /// Where `<car>_<spot>_<modality>.csv` streams are written.
    #[arg(long, value_name = "DIR")]
    output: PathBuf,
}

#[derive(ClapArgs)]
pub struct QuantizeArgs {
    /// Directory of `<car>_<spot>_<sensor>.csv` recordings.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    /// Sensor set, e.g. `Acv+Gyr`, `V,H` or `all`.
    #[arg(long, value_name = "SET", default_value = "all")]
    modalities: String,
    /// Window grid spacing in seconds (default from config, else 10).
    #[arg(long, value_name = "SECS")]
    step: Option<f64>,
    /// Extra `activity.*` thresholds applied on top of the config file.
    #[arg(long, value_name = "PATH")]
    activity_config: Option<PathBuf>,
    /// Keep only windows in which every device of the set produced a
    /// fingerprint, so dumps line up window by window.
    #[arg(long)]
    common: bool,
    /// Write one `<car>_<spot>.bits` dump per device here instead of stdout.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
}

#[derive(ClapArgs)]
pub struct GenerateArgs {
    /// city, country, highway or parking.
    #[arg(long, default_value = "city")]
    scenario: Scenario,
    /// Recording length in seconds.
    #[arg(long, value_name = "SECS", default_value_t = 600.0)]
    duration: f64,
    /// Devices in car 1.
    #[arg(long, value_name = "N", default_value_t = 2)]
    car1: usize,
    /// Devices in car 2.
    #[arg(long, value_name = "N", default_value_t = 2)]
    car2: usize,
    /// Car 2 follows car 1 on the same route, this many seconds behind.
    #[arg(long, value_name = "SECS")]
    follower: Option<f64>,
    #[arg(long, value_name = "DIR")]
    output: PathBuf,
}

fn load_set(dir: &Path) -> CliResult<Vec<DeviceRecording<f64>>> {
    let set = read_device_set(dir).map_err(data)?;
    if set.is_empty() {
        return Err(data(format!("{}: no complete device recordings", dir.display())));
    }
    Ok(set)
}

fn contexts(recs: &[DeviceRecording<f64>]) -> CliResult<Vec<DeviceContext>> {
    preprocess_recordings(recs).map_err(data)
}

pub fn preprocess(s: &Settings, a: PreprocessArgs) -> CliResult {
    let devs = contexts(&load_set(&a.input)?)?;
    fs::create_dir_all(&a.output).map_err(data)?;
    for d in &devs {
        for m in Modality::ALL {
            let path = a.output.join(format!("{}_{m}.csv", d.id));
            let f = fs::File::create(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            write_stream(d.streams.get(m), BufWriter::new(f)).map_err(data)?;
        }
        s.note(format!("{}: {:.1} s of context", d.id, d.streams.covered_until() - d.streams.start_time()));
        println!("{}", d.id);
    }
    Ok(())
}

pub fn quantize(s: &Settings, a: QuantizeArgs) -> CliResult {
    let mods = parse_modalities(&a.modalities).map_err(usage)?;
    let mut params = s.eval_params(a.activity_config.as_deref())?;
    if let Some(step) = a.step {
        if !(step.is_finite() && step > 0.0) {
            return Err(usage("--step must be positive"));
        }
        params.step = step;
    }
    let devs = contexts(&load_set(&a.input)?)?;
    let grid = common_grid(&devs, params.step);
    if grid.is_empty() {
        return Err(data("the recordings share no complete window"));
    }
    let tables = build_tables(&devs, &grid, &params.activity);
    if let Some(dir) = &a.output {
        fs::create_dir_all(dir).map_err(data)?;
    }
    let keep: Vec<bool> = (0..grid.len())
        .map(|i| !a.common || tables.iter().all(|t| t.fused_bits(&mods, i).is_some()))
        .collect();
    for t in &tables {
        let mut out = String::new();
        let mut kept = 0;
        for (i, &start) in t.times.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            if let Some(fp) = t.fingerprint(&mods, i, &params.thresholds) {
                kept += 1;
                let _ = writeln!(out, "{}", DumpRecord { start_time: start, fingerprint: fp });
            }
        }
        s.note(format!("{}: {kept}/{} {} windows passed", t.id, t.len(), fusion_name(&mods)));
        match &a.output {
            Some(dir) => {
                let path = dir.join(format!("{}.bits", t.id));
                fs::write(&path, out).map_err(|e| data(format!("{}: {e}", path.display())))?;
                println!("{}", path.display());
            }
            None => print!("# {}\n{out}", t.id),
        }
    }
    Ok(())
}

pub fn generate(s: &Settings, a: GenerateArgs) -> CliResult {
    if !(a.duration.is_finite() && a.duration >= 30.0) {
        return Err(usage("--duration must be at least 30 s"));
    }
    if a.car1 + a.car2 == 0 {
        return Err(usage("no devices requested"));
    }
    let mut cfg = s.generator(a.scenario)?;
    if let Some(lag) = a.follower {
        if !(lag.is_finite() && lag >= 0.0) {
            return Err(usage("--follower must be a non-negative lag"));
        }
        cfg = cfg.follower(lag);
    }
    let seed = s.seed();
    let recs = generate_synthetic_context(seed, &cfg, a.car1, a.car2, a.duration);
    for p in write_device_set(&a.output, &recs).map_err(data)? {
        println!("{}", p.display());
    }
    Ok(())
}
