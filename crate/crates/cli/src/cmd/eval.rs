use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args as ClapArgs, ValueEnum};
use fastzip::eval::{
    build_tables, common_grid, device_pair_time, entropy_analysis, fused_threshold, injection_recordings, pairing_trials,
    preprocess_recordings, run_attack, summarize, Alignment, AttackKind, AttackSpec, DeviceContext, EvalParams,
    NoiseProfile, WindowTable,
};
use fastzip::activity::WindowSchedule;
use fastzip::quantizer::{fusion_name, parse_modalities};
use fastzip::security::{fpake_bits_for_threshold, modality_combinations, percent, quoted_threshold};
use fastzip::signal::csvio::{read_device_set, DeviceRecording};
use fastzip::signal::synth::{generate_synthetic_context, Scenario, FOLLOWER_LAG};
use fastzip::signal::Modality;
use fastzip::transport::{loopback_pair, LoopbackOptions, PairingParams};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{mean_sd, read_dump};
use crate::error::{data, usage, CliResult};
use crate::settings::{parse_scenarios, Settings};

/// Where recordings come from: a CSV directory or the synthetic generator.
#[derive(ClapArgs)]
pub struct Source {
    /// Directory of `<car>_<spot>_<sensor>.csv` recordings (overrides --scenario).
    #[arg(long, value_name = "DIR")]
    input: Option<PathBuf>,
    /// Synthetic scenarios: comma-separated list or `all`.
    #[arg(long, value_name = "LIST", default_value = "all")]
    scenario: String,
    /// Synthetic recording length in seconds.
    #[arg(long, value_name = "SECS", default_value_t = 1200.0)]
    duration: f64,
    /// Synthetic devices per car.
    #[arg(long, value_name = "N", default_value_t = 2)]
    devices: usize,
    /// Extra `activity.*` thresholds applied on top of the config file.
    #[arg(long, value_name = "PATH")]
    activity_config: Option<PathBuf>,
}

struct Corpus {
    name: String,
    recordings: Vec<DeviceRecording<f64>>,
}

impl Source {
    /// Loads or generates one corpus per scenario; `follower` makes car 2
    /// trail car 1 on the same route.
    fn corpora(&self, s: &Settings, seed: u64, follower: bool) -> CliResult<Vec<Corpus>> {
        if let Some(dir) = &self.input {
            let recordings = read_device_set(dir).map_err(data)?;
            if recordings.len() < 2 {
                return Err(data(format!("{}: need at least two complete devices", dir.display())));
            }
            return Ok(vec![Corpus {
                name: "input".into(),
                recordings,
            }]);
        }
        if !(self.duration.is_finite() && self.duration >= 60.0) {
            return Err(usage("--duration must be at least 60 s"));
        }
        if self.devices == 0 {
            return Err(usage("--devices must be at least 1"));
        }
        parse_scenarios(&self.scenario)?
            .into_iter()
            .map(|sc: Scenario| {
                let mut cfg = s.generator(sc)?;
                if follower {
                    cfg = cfg.follower(FOLLOWER_LAG);
                }
                s.note(format!("generating {sc}"));
                Ok(Corpus {
                    name: sc.to_string(),
                    recordings: generate_synthetic_context(seed, &cfg, self.devices, self.devices, self.duration),
                })
            })
            .collect()
    }

    fn params(&self, s: &Settings) -> CliResult<EvalParams> {
        s.eval_params(self.activity_config.as_deref())
    }
}

fn contexts(recs: &[DeviceRecording<f64>]) -> CliResult<Vec<DeviceContext>> {
    preprocess_recordings(recs).map_err(data)
}

fn grid(devs: &[DeviceContext], step: f64) -> CliResult<Vec<f64>> {
    let g = common_grid(devs, step);
    if g.is_empty() {
        return Err(data("the recordings share no complete window"));
    }
    Ok(g)
}

/// Sensor sets from repeated `--modalities` flags; every combination if none.
fn sensor_sets(flags: &[String]) -> CliResult<Vec<Vec<Modality>>> {
    if flags.is_empty() {
        return Ok(modality_combinations());
    }
    flags.iter().map(|f| parse_modalities(f).map_err(usage)).collect()
}

#[derive(ClapArgs)]
pub struct EvaluateArgs {
    #[command(flatten)]
    source: Source,
    /// Sensor set to evaluate (repeatable); all fifteen combinations by default.
    #[arg(long, value_name = "SET")]
    modalities: Vec<String>,
    /// Additionally run this many real pairing sessions per row and compare
    /// their outcome with the threshold predicate.
    #[arg(long, value_name = "N", default_value_t = 0)]
    full_protocol: usize,
    /// Print only the comma-separated form.
    #[arg(long)]
    csv: bool,
}

pub fn evaluate(s: &Settings, a: EvaluateArgs) -> CliResult {
    let params = a.source.params(s)?;
    let sets = sensor_sets(&a.modalities)?;
    let seed = s.seed();
    let mut csv = String::from("source,sensors,threshold,tar,tar_accepted,tar_trials,far,far_accepted,far_trials,pairing_time_s,protocol_agree,protocol_runs\n");
    let mut text = String::new();
    for corpus in a.source.corpora(s, seed, false)? {
        let devs = contexts(&corpus.recordings)?;
        let tables = build_tables(&devs, &grid(&devs, params.step)?, &params.activity);
        let _ = writeln!(text, "== {}: {} devices, {} windows", corpus.name, devs.len(), tables[0].len());
        for mods in &sets {
            let trials = pairing_trials(&tables, mods, &params.thresholds);
            let tf = summarize(&trials);
            let time = if mods.len() == 1 { mean_pair_time(&devs, mods[0], &params) } else { None };
            let (agree, runs) = if a.full_protocol > 0 {
                spot_check(&tables, mods, &params, a.full_protocol, seed)?
            } else {
                (0, 0)
            };
            let thr = fused_threshold(mods, &params.thresholds);
            let _ = writeln!(
                text,
                "{:>8}  thr {:>5.1}%  TAR {}  FAR {}{}{}",
                fusion_name(mods),
                percent(thr),
                tf.tar,
                tf.far,
                time.map_or(String::new(), |t| format!("  pairing {t:.0} s")),
                if runs > 0 { format!("  protocol agrees {agree}/{runs}") } else { String::new() }
            );
            let _ = writeln!(
                csv,
                "{},{},{:.4},{:.6},{},{},{:.6},{},{},{},{},{}",
                corpus.name,
                fusion_name(mods),
                percent(thr) / 100.0,
                tf.tar.value(),
                tf.tar.accepted,
                tf.tar.trials,
                tf.far.value(),
                tf.far.accepted,
                tf.far.trials,
                time.map_or(String::new(), |t| format!("{t:.1}")),
                agree,
                runs
            );
        }
    }
    if a.csv {
        print!("{csv}");
    } else {
        print!("{text}\n{csv}");
    }
    Ok(())
}

/// Mean time colocated device pairs need to collect the fPAKE bit budget.
fn mean_pair_time(devs: &[DeviceContext], m: Modality, params: &EvalParams) -> Option<f64> {
    let required = fpake_bits_for_threshold(quoted_threshold(&[m], &params.thresholds));
    let sched = WindowSchedule::non_overlapping(m.window_secs());
    let times: Vec<f64> = devs
        .iter()
        .enumerate()
        .flat_map(|(i, a)| devs[i + 1..].iter().map(move |b| (a, b)))
        .filter(|(a, b)| a.id.car == b.id.car)
        .filter_map(|(a, b)| device_pair_time(a, b, m, &sched, &params.activity, required).ok())
        .collect();
    (!times.is_empty()).then(|| mean_sd(&times).0)
}

/// Runs real loopback sessions on a sample of trials; counts those whose
/// outcome matches the threshold predicate.
fn spot_check(tables: &[WindowTable], mods: &[Modality], params: &EvalParams, runs: usize, seed: u64) -> CliResult<(usize, usize)> {
    let thr = fused_threshold(mods, &params.thresholds);
    let mut cases = Vec::new();
    for (i, a) in tables.iter().enumerate() {
        for b in &tables[i + 1..] {
            for k in 0..a.len().min(b.len()) {
                if let (Some(fa), Some(fb)) = (a.fused_bits(mods, k), b.fused_bits(mods, k)) {
                    cases.push((fa, fb));
                }
            }
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    cases.shuffle(&mut rng);
    let mut agree = 0;
    let mut done = 0;
    for (fa, fb) in cases.into_iter().take(runs) {
        let mut opts = LoopbackOptions::new(PairingParams::new(thr));
        opts.seed = Some(seed.wrapping_add(done as u64));
        let r = loopback_pair(&fa, &fb, &opts).map_err(data)?;
        let predicted = fastzip::quantizer::accepts(fastzip::quantizer::matching_bits(&fa, &fb), fa.len(), thr);
        agree += (r.agreed() == predicted) as usize;
        done += 1;
    }
    Ok((agree, done))
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignmentArg {
    Unsynchronized,
    Rough,
    BestMatch,
}

#[derive(ClapArgs)]
pub struct AttackArgs {
    #[command(flatten)]
    source: Source,
    /// injection, replay or similar-context.
    #[arg(long)]
    kind: AttackKind,
    /// How adversary windows line up with the victim's (best-match is the
    /// similar-context adversary's default).
    #[arg(long, value_enum)]
    alignment: Option<AlignmentArg>,
    /// The sensor the similar-context adversary matches best; every sensor of
    /// the set in turn if omitted.
    #[arg(long, value_name = "MODALITY")]
    sensor: Option<Modality>,
    /// Sensor set under attack (repeatable); all combinations by default.
    #[arg(long, value_name = "SET")]
    modalities: Vec<String>,
    /// Adversary clock minus victim clock, s, for rough-timeline replay.
    #[arg(long, value_name = "SECS", default_value_t = 0.0, allow_hyphen_values = true)]
    offset: f64,
    /// Noise devices played by the injection adversary.
    #[arg(long, value_name = "N", default_value_t = 2)]
    noise_devices: usize,
    /// Print only the comma-separated form.
    #[arg(long)]
    csv: bool,
}

pub fn attack(s: &Settings, a: AttackArgs) -> CliResult {
    let params = a.source.params(s)?;
    let sets = sensor_sets(&a.modalities)?;
    let alignment = match (a.kind, a.alignment) {
        (AttackKind::SimilarContext, None | Some(AlignmentArg::BestMatch)) => AlignmentArg::BestMatch,
        (AttackKind::SimilarContext, Some(_)) => return Err(usage("similar-context uses --alignment best-match")),
        (_, Some(AlignmentArg::BestMatch)) => return Err(usage("best-match alignment needs --kind similar-context")),
        (_, None) => AlignmentArg::Unsynchronized,
        (_, Some(x)) => x,
    };
    let seed = s.seed();
    let mut text = String::new();
    let mut csv = String::from("source,kind,alignment,sensors,best_match,far,accepted,trials,filtered\n");
    for corpus in a.source.corpora(s, seed, a.kind == AttackKind::SimilarContext)? {
        let devs = contexts(&corpus.recordings)?;
        let victim_car = devs[0].id.car.clone();
        let (victims, others): (Vec<_>, Vec<_>) = devs.into_iter().partition(|d| d.id.car == victim_car);
        let vgrid = grid(&victims, params.step)?;
        let victim_tables = build_tables(&victims, &vgrid, &params.activity);
        let adversary = match a.kind {
            AttackKind::Injection => {
                let span = vgrid[vgrid.len() - 1] + 30.0;
                let noise = injection_recordings(seed, &s.generator(Scenario::City)?, NoiseProfile::default(), span, a.noise_devices);
                build_tables(&contexts(&noise)?, &vgrid, &params.activity)
            }
            AttackKind::Replay | AttackKind::SimilarContext => {
                if others.is_empty() {
                    return Err(data(format!("{}: no second car to draw adversary windows from", corpus.name)));
                }
                let step = if a.kind == AttackKind::SimilarContext { 1.0 } else { params.step };
                build_tables(&others, &grid(&others, step)?, &params.activity)
            }
        };
        let _ = writeln!(text, "== {}: {} attack", corpus.name, a.kind);
        for mods in &sets {
            let oracles: Vec<Option<Modality>> = match alignment {
                AlignmentArg::BestMatch => match a.sensor {
                    Some(m) if mods.contains(&m) => vec![Some(m)],
                    Some(_) => continue,
                    None => mods.iter().copied().map(Some).collect(),
                },
                _ => vec![None],
            };
            for oracle in oracles {
                let al = match (alignment, oracle) {
                    (AlignmentArg::Unsynchronized, _) => Alignment::Unsynchronized,
                    (AlignmentArg::Rough, _) => Alignment::RoughTimeline,
                    (AlignmentArg::BestMatch, Some(m)) => Alignment::BestMatchSingleSensor(m),
                    (AlignmentArg::BestMatch, None) => unreachable!("best-match always names a sensor"),
                };
                let spec = AttackSpec::new(a.kind, al, mods).map_err(usage)?.with_offset(a.offset);
                let r = run_attack(&spec, &victim_tables, &adversary, &params);
                let al_name = match alignment {
                    AlignmentArg::Unsynchronized => "unsynchronized",
                    AlignmentArg::Rough => "rough-timeline",
                    AlignmentArg::BestMatch => "best-match",
                };
                let om = oracle.map_or(String::new(), |m| m.to_string());
                let _ = writeln!(
                    text,
                    "{:>8} {:>4}  FAR {}  filtered {}",
                    fusion_name(mods),
                    om,
                    r.far,
                    r.filtered
                );
                let _ = writeln!(
                    csv,
                    "{},{},{al_name},{},{om},{:.6},{},{},{}",
                    corpus.name,
                    a.kind,
                    fusion_name(mods),
                    r.far.value(),
                    r.far.accepted,
                    r.far.trials,
                    r.filtered
                );
            }
        }
    }
    if a.csv {
        print!("{csv}");
    } else {
        print!("{text}\n{csv}");
    }
    Ok(())
}

#[derive(ClapArgs)]
pub struct EntropyArgs {
    /// Fingerprint dumps making up the corpus; without them a synthetic
    /// corpus is built from --scenario.
    #[arg(long = "dump", value_name = "PATH")]
    dumps: Vec<PathBuf>,
    #[command(flatten)]
    source: Source,
    /// Sensor set of the synthetic corpus.
    #[arg(long, value_name = "SET", default_value = "all")]
    modalities: String,
    /// Print only the comma-separated form.
    #[arg(long)]
    csv: bool,
}

fn dump_corpus(paths: &[PathBuf]) -> CliResult<Vec<Vec<bool>>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_dump(Path::new(p))?.into_iter().map(|r| r.fingerprint.bits().to_vec()));
    }
    Ok(out)
}

pub fn entropy(s: &Settings, a: EntropyArgs) -> CliResult {
    let corpus = if a.dumps.is_empty() {
        let params = a.source.params(s)?;
        let mods = parse_modalities(&a.modalities).map_err(usage)?;
        let mut out = Vec::new();
        for c in a.source.corpora(s, s.seed(), false)? {
            let devs = contexts(&c.recordings)?;
            let tables = build_tables(&devs, &grid(&devs, params.step)?, &params.activity);
            out.extend(tables.iter().flat_map(|t| (0..t.len()).filter_map(|i| t.fused_bits(&mods, i))));
        }
        out
    } else {
        dump_corpus(&a.dumps)?
    };
    let r = entropy_analysis(&corpus).map_err(data)?;
    let opt = |p: Option<f64>| p.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    let mut text = String::new();
    let _ = writeln!(text, "corpus {} fingerprints of {} bits", r.corpus, r.bits);
    let _ = writeln!(text, "ones fraction {:.4}", r.ones_fraction);
    let _ = writeln!(text, "Markov P(1|0) {}  P(1|1) {}", opt(r.markov_p01), opt(r.markov_p11));
    let _ = writeln!(
        text,
        "random walk vs binomial: chi-square {:.2} on {} dof, p = {:.4}",
        r.chi_square, r.chi_square_dof, r.chi_square_p
    );
    let _ = writeln!(text, "min-entropy per bit: most common value {:.4}, Markov path {:.4}", r.mcv_min_entropy, r.markov_min_entropy);
    let _ = writeln!(text, "(both are conservative proxies; full assessment suites also tend to underestimate)");
    let mut csv = String::from("metric,value\n");
    for (k, v) in [
        ("corpus", r.corpus.to_string()),
        ("bits", r.bits.to_string()),
        ("ones_fraction", format!("{:.6}", r.ones_fraction)),
        ("markov_p01", r.markov_p01.map_or(String::new(), |v| format!("{v:.6}"))),
        ("markov_p11", r.markov_p11.map_or(String::new(), |v| format!("{v:.6}"))),
        ("chi_square", format!("{:.6}", r.chi_square)),
        ("chi_square_dof", r.chi_square_dof.to_string()),
        ("chi_square_p", format!("{:.6}", r.chi_square_p)),
        ("mcv_min_entropy", format!("{:.6}", r.mcv_min_entropy)),
        ("markov_min_entropy", format!("{:.6}", r.markov_min_entropy)),
    ] {
        let _ = writeln!(csv, "{k},{v}");
    }
    csv.push_str("\nwalk_position,observed,expected\n");
    for (k, (&o, &e)) in r.random_walk_positions.iter().zip(&r.expected_binomial).enumerate() {
        let _ = writeln!(csv, "{},{o},{e:.3}", r.position(k));
    }
    if a.csv {
        print!("{csv}");
    } else {
        print!("{text}\n{csv}");
    }
    Ok(())
}
