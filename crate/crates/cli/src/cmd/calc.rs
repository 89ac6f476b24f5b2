use std::fmt::Write as _;

use clap::Args as ClapArgs;
use fastzip::quantizer::SimilarityThresholds;
use fastzip::security::{
    decode_parts, fuzzy_commitment_bits, min_fingerprint_bits, offline_guess_probability, parse_fraction, percent, table1,
    table2, Convention, Fraction, SecurityProfile,
};

use crate::error::{data, usage, CliResult};
use crate::settings::Settings;

#[derive(ClapArgs)]
pub struct Args {
    /// Print the offline-protection table for the six reference thresholds.
    #[arg(long)]
    table1: bool,
    /// Print fingerprint sizes and pairing times for every sensor combination.
    #[arg(long)]
    table2: bool,
    /// Size a fingerprint for this similarity threshold (`0.9`, `90%` or `9/10`).
    #[arg(long, value_name = "FRACTION")]
    threshold: Option<String>,
    /// Offline-guessing protection: the probability must stay below 2^-BITS.
    #[arg(long, value_name = "BITS", default_value_t = 20)]
    security_bits: u32,
    /// Whether the guessing sum starts at m (inclusive) or m+1 (exclusive).
    #[arg(long, value_name = "inclusive|exclusive", default_value = "exclusive")]
    convention: Convention,
    /// Fingerprint sizes are searched in steps of this many bits.
    #[arg(long, value_name = "BITS", default_value_t = 1)]
    granularity: u64,
    /// Report the profile of this fingerprint size instead of searching.
    #[arg(long, value_name = "N")]
    bits: Option<u64>,
    /// Key length the fuzzy-commitment sizes are computed for.
    #[arg(long, value_name = "BITS", default_value_t = 128)]
    key_bits: u64,
    /// Print only the comma-separated form.
    #[arg(long)]
    csv: bool,
}

/// Offline-protection targets of the reference table, as log2 bounds;
/// `None` marks rows that offer no protection (probability near 1).
const TABLE1_TARGETS: [Option<i32>; 6] = [Some(-23), Some(-20), Some(-12), Some(-7), None, None];

pub fn run(s: &Settings, a: Args) -> CliResult {
    if !(a.table1 || a.table2 || a.threshold.is_some()) {
        return Err(usage("pick at least one of --table1, --table2, --threshold"));
    }
    let mut text = String::new();
    let mut csv = String::new();
    if a.table1 {
        table1_report(&a, &mut text, &mut csv);
    }
    if a.table2 {
        let thrs = s.eval_params(None)?.thresholds;
        table2_report(&a, &thrs, &mut text, &mut csv)?;
    }
    if let Some(t) = &a.threshold {
        let thr = parse_fraction(t).map_err(usage)?;
        threshold_report(&a, thr, &mut text, &mut csv)?;
    }
    if a.csv {
        print!("{csv}");
    } else {
        print!("{text}\n{csv}");
    }
    Ok(())
}

fn table1_report(a: &Args, text: &mut String, csv: &mut String) {
    let rows = table1();
    let _ = writeln!(text, "Offline protection (exact sums; probabilities as log2)");
    let _ = writeln!(text, "{:>5} {:>4} {:>4} {:>10} {:>10} {:>8} {:>14}", "thr", "n", "m", "inclusive", "exclusive", "target", "complexity");
    for (r, target) in rows.iter().zip(TABLE1_TARGETS) {
        let t = match target {
            Some(b) => format!("< {b}"),
            None => "~ 0".to_string(),
        };
        let cx = match r.complexity_floor {
            Some((i, c)) => format!("2^{c:.1} T @{i}"),
            None => "-".to_string(),
        };
        let mark = if footnote_row(r, target) { "*" } else { "" };
        let _ = writeln!(
            text,
            "{:>4.0}% {:>4} {:>4} {:>10.2} {:>10.2} {:>8} {:>14}{mark}",
            percent(r.thr),
            r.n,
            r.m,
            r.p_inclusive.log2(),
            r.p_exclusive.log2(),
            t,
            cx
        );
    }
    for (r, target) in rows.iter().zip(TABLE1_TARGETS) {
        if footnote_row(r, target) {
            let _ = writeln!(
                text,
                "* {:.0}% row: the bound 2^{} holds only under the {} convention (inclusive 2^{:.2}, exclusive 2^{:.2}).",
                percent(r.thr),
                target.unwrap_or(0),
                if r.p_exclusive.below_pow2(target.unwrap_or(0) as f64) { "exclusive" } else { "inclusive" },
                r.p_inclusive.log2(),
                r.p_exclusive.log2()
            );
        }
    }
    let _ = writeln!(text, "Complexity: fewest expected decode attempts over the ambiguous region, in units of one decode T.");
    let _ = writeln!(text, "Selected convention: {}.", a.convention);
    let _ = writeln!(csv, "table,thr,n,m,log2_p_inclusive,log2_p_exclusive,log2_p_selected,target_log2,complexity_i,complexity_log2");
    for (r, target) in rows.iter().zip(TABLE1_TARGETS) {
        let (ci, cl) = r
            .complexity_floor
            .map_or((String::new(), String::new()), |(i, c)| (i.to_string(), format!("{c:.4}")));
        let _ = writeln!(
            csv,
            "table1,{},{},{},{:.4},{:.4},{:.4},{},{ci},{cl}",
            r.thr,
            r.n,
            r.m,
            r.p_inclusive.log2(),
            r.p_exclusive.log2(),
            r.p(a.convention).log2(),
            target.map_or(String::new(), |b| b.to_string()),
        );
    }
}

/// A row whose bound holds under exactly one convention.
fn footnote_row(r: &SecurityProfile, target: Option<i32>) -> bool {
    target.is_some_and(|b| r.p_inclusive.below_pow2(b as f64) != r.p_exclusive.below_pow2(b as f64))
}

fn table2_report(a: &Args, thrs: &SimilarityThresholds, text: &mut String, csv: &mut String) -> CliResult {
    if a.key_bits == 0 {
        return Err(usage("--key-bits must be positive"));
    }
    let rows = table2(thrs, a.key_bits);
    let _ = writeln!(text, "Fingerprint bits and pairing time ({}-bit key)", a.key_bits);
    let _ = writeln!(
        text,
        "{:>8} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}",
        "sensors", "thr", "fPAKE", "F.com", "bits/w", "window", "t fPAKE", "t F.com"
    );
    let _ = writeln!(csv, "table,sensors,thr,fpake_bits,fcom_bits,bits_per_window,window_s,fpake_time_s,fcom_time_s");
    for r in &rows {
        let _ = writeln!(
            text,
            "{:>8} {:>5.1}% {:>6} {:>6} {:>6} {:>6}s {:>6}s {:>6}s",
            r.name,
            percent(r.threshold),
            r.fpake_bits,
            r.fcom_bits,
            r.bits_per_window,
            r.window_len,
            r.fpake_time,
            r.fcom_time
        );
        let _ = writeln!(
            csv,
            "table2,{},{:.1},{},{},{},{},{},{}",
            r.name,
            percent(r.threshold),
            r.fpake_bits,
            r.fcom_bits,
            r.bits_per_window,
            r.window_len,
            r.fpake_time,
            r.fcom_time
        );
    }
    if let Some(best) = rows
        .iter()
        .filter(|r| r.modalities.len() == 1)
        .max_by(|x, y| (x.fcom_time * y.fpake_time).cmp(&(y.fcom_time * x.fpake_time)))
    {
        let _ = writeln!(
            text,
            "Largest single-sensor speed-up of fPAKE over fuzzy commitment: {} ({:.2}x).",
            best.name,
            best.fcom_time as f64 / best.fpake_time as f64
        );
    }
    Ok(())
}

fn threshold_report(a: &Args, thr: Fraction, text: &mut String, csv: &mut String) -> CliResult {
    let target = -(a.security_bits as f64);
    let n = match a.bits {
        Some(n) => n,
        None => min_fingerprint_bits(thr, target, a.granularity, a.convention).map_err(data)?,
    };
    let p = offline_guess_probability(n, thr, a.convention).map_err(data)?;
    let fcom = fuzzy_commitment_bits(thr, a.key_bits).map_err(data)?;
    let m = decode_parts(n, thr);
    let _ = writeln!(text, "threshold {:.2}% ({thr}), {} convention", percent(thr), a.convention);
    match a.bits {
        Some(_) => {
            let _ = writeln!(text, "fingerprint bits n = {n}, decode parts m = {m}");
        }
        None => {
            let _ = writeln!(
                text,
                "smallest fingerprint with offline guessing below 2^-{} (step {}): n = {n}, m = {m}",
                a.security_bits, a.granularity
            );
        }
    }
    let _ = writeln!(text, "offline guessing probability 2^{:.3} ({p})", p.log2());
    let _ = writeln!(text, "fuzzy-commitment bits for a {}-bit key: {fcom}", a.key_bits);
    let _ = writeln!(csv, "threshold,convention,n,m,log2_p,fcom_bits,key_bits");
    let _ = writeln!(csv, "{thr},{},{n},{m},{:.4},{fcom},{}", a.convention, p.log2(), a.key_bits);
    Ok(())
}
