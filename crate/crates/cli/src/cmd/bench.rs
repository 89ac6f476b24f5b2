use std::fmt::Write as _;
use std::time::Duration;

use clap::{Args as ClapArgs, ValueEnum};
use fastzip::eval::fused_threshold;
use fastzip::quantizer::{fusion_name, parse_modalities, SimilarityThresholds};
use fastzip::security::{fpake_bits_for_threshold, percent, quoted_threshold, Fraction};
use fastzip::signal::Modality;
use fastzip::transport::{loopback_pair, LoopbackOptions, LoopbackTransport, PairingParams, PhaseTimings};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::mean_sd;
use crate::error::{data, usage, CliResult};
use crate::settings::Settings;

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Memory,
    Tcp,
}

#[derive(ClapArgs)]
pub struct Args {
    /// Sessions per sensor set (at least 10).
    #[arg(long, value_name = "N", default_value_t = 100)]
    iterations: usize,
    /// Sensor set to time (repeatable); the four single sensors and `all` by default.
    #[arg(long, value_name = "SET")]
    modalities: Vec<String>,
    /// Fingerprint length; default is the offline-safe size for the set's threshold.
    #[arg(long, value_name = "N")]
    bits: Option<usize>,
    /// Channel between the two loopback parties.
    #[arg(long, value_enum, default_value = "tcp")]
    transport: TransportArg,
    /// Print only the comma-separated form.
    #[arg(long)]
    csv: bool,
}

const PHASES: [&str; 7] = ["negotiation", "amplification", "commitment", "confirmation", "total", "compute", "wait"];

fn phase_values(t: &PhaseTimings) -> [Duration; 7] {
    [t.negotiation, t.amplification, t.commitment, t.confirmation, t.total, t.compute, t.wait]
}

pub struct BenchRow {
    pub name: String,
    pub n: usize,
    pub thr: Fraction,
    /// Per phase, seconds of each session.
    pub samples: [Vec<f64>; 7],
    pub failures: usize,
}

/// Times `iterations` sessions between fingerprints that differ in a few
/// bits, well inside the error budget.
pub fn bench_set(
    mods: &[Modality],
    thrs: &SimilarityThresholds,
    bits: Option<usize>,
    iterations: usize,
    transport: LoopbackTransport,
    seed: u64,
) -> CliResult<BenchRow> {
    let thr = fused_threshold(mods, thrs);
    let n = bits.unwrap_or_else(|| fpake_bits_for_threshold(quoted_threshold(mods, thrs)) as usize);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let budget = ((n as u64 * (*thr.denom() - *thr.numer())) / *thr.denom()) as usize;
    let mut samples: [Vec<f64>; 7] = Default::default();
    let mut failures = 0;
    for i in 0..iterations {
        let fa: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let mut fb = fa.clone();
        for j in sample(&mut rng, n, budget / 2) {
            fb[j] = !fb[j];
        }
        let mut opts = LoopbackOptions::new(PairingParams::new(thr));
        opts.transport = transport;
        opts.seed = Some(seed.wrapping_add(i as u64 + 1));
        let r = loopback_pair(&fa, &fb, &opts).map_err(data)?;
        if !r.agreed() {
            failures += 1;
        }
        for (k, d) in phase_values(&r.initiator.timings).into_iter().enumerate() {
            samples[k].push(d.as_secs_f64());
        }
    }
    Ok(BenchRow {
        name: fusion_name(mods),
        n,
        thr,
        samples,
        failures,
    })
}

pub fn run(s: &Settings, a: Args) -> CliResult {
    if a.iterations < 10 {
        return Err(usage("--iterations must be at least 10"));
    }
    if a.bits == Some(0) {
        return Err(usage("--bits must be positive"));
    }
    let sets: Vec<Vec<Modality>> = if a.modalities.is_empty() {
        Modality::ALL.iter().map(|&m| vec![m]).chain([Modality::ALL.to_vec()]).collect()
    } else {
        a.modalities.iter().map(|m| parse_modalities(m).map_err(usage)).collect::<CliResult<_>>()?
    };
    let thrs = s.eval_params(None)?.thresholds;
    let transport = match a.transport {
        TransportArg::Memory => LoopbackTransport::Memory,
        TransportArg::Tcp => LoopbackTransport::Tcp,
    };
    let seed = s.seed();
    let mut text = String::from("per-phase time per session, mean ± sd in ms (initiator side)\n");
    let _ = writeln!(
        text,
        "{:>8} {:>5} {:>6} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>6}",
        "sensors", "n", "thr", "negotiation", "amplification", "commitment", "confirmation", "total", "compute", "wait", "wait%"
    );
    let mut csv = String::from("sensors,n,thr,iterations,failures");
    for p in PHASES {
        let _ = write!(csv, ",{p}_mean_ms,{p}_sd_ms");
    }
    csv.push('\n');
    for mods in &sets {
        s.note(format!("timing {}", fusion_name(mods)));
        let row = bench_set(mods, &thrs, a.bits, a.iterations, transport, seed)?;
        let stats: Vec<(f64, f64)> = row.samples.iter().map(|v| {
            let (m, sd) = mean_sd(v);
            (m * 1e3, sd * 1e3)
        }).collect();
        let cell = |(m, sd): (f64, f64)| format!("{m:.1}±{sd:.1}");
        let _ = writeln!(
            text,
            "{:>8} {:>5} {:>5.1}% {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>5.0}%",
            row.name,
            row.n,
            percent(row.thr),
            cell(stats[0]),
            cell(stats[1]),
            cell(stats[2]),
            cell(stats[3]),
            cell(stats[4]),
            cell(stats[5]),
            cell(stats[6]),
            100.0 * stats[6].0 / stats[4].0.max(f64::MIN_POSITIVE)
        );
        let _ = write!(csv, "{},{},{},{},{}", row.name, row.n, row.thr, a.iterations, row.failures);
        for (m, sd) in &stats {
            let _ = write!(csv, ",{m:.3},{sd:.3}");
        }
        csv.push('\n');
        if row.failures > 0 {
            let _ = writeln!(text, "  warning: {} sessions did not agree on a key", row.failures);
        }
    }
    let _ = writeln!(text, "phases sum to total; compute = total - wait, where wait is time blocked on the channel");
    if a.csv {
        print!("{csv}");
    } else {
        print!("{text}\n{csv}");
    }
    Ok(())
}
