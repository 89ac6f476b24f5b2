//! Config-file resolution and the knobs derived from it.

use std::env;
use std::path::{Path, PathBuf};

use fastzip::config::KeyValueConfig;
use fastzip::eval::EvalParams;
use fastzip::signal::synth::{GeneratorConfig, Scenario};
use rand::RngCore;

use crate::error::{data, usage, CliResult};

pub const CONFIG_ENV: &str = "FASTZIP_CONFIG";
pub const DEFAULT_CONFIG: &str = "fastzip.conf";
const KNOWN_PREFIXES: [&str; 4] = ["gen.", "activity.", "threshold.", "eval."];

pub struct Settings {
    pub config: KeyValueConfig,
    pub source: Option<PathBuf>,
    pub seed: Option<u64>,
    pub verbose: bool,
}

/// The flag wins, then the environment, then `./fastzip.conf` if present.
pub fn resolve_config_path(flag: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = flag {
        return Some(p.to_path_buf());
    }
    if let Some(p) = env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()) {
        return Some(PathBuf::from(p));
    }
    let local = PathBuf::from(DEFAULT_CONFIG);
    local.is_file().then_some(local)
}

fn load(path: &Path) -> CliResult<KeyValueConfig> {
    let cfg = KeyValueConfig::load(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    cfg.check_prefixes(&KNOWN_PREFIXES)
        .map_err(|e| data(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

impl Settings {
    pub fn new(config_flag: Option<&Path>, seed: Option<u64>, verbose: bool) -> CliResult<Self> {
        let source = resolve_config_path(config_flag);
        let config = match &source {
            Some(p) => load(p)?,
            None => KeyValueConfig::default(),
        };
        Ok(Self {
            config,
            source,
            seed,
            verbose,
        })
    }

    pub fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// The `--seed` value, or a fresh one that is reported when verbose.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            let s = rand::thread_rng().next_u64();
            self.note(format!("seed {s}"));
            s
        })
    }

    /// Evaluation parameters, with an optional extra activity file on top.
    pub fn eval_params(&self, activity_config: Option<&Path>) -> CliResult<EvalParams> {
        let mut p = EvalParams::default();
        p.apply(&self.config).map_err(data)?;
        if let Some(path) = activity_config {
            let extra = load(path)?;
            extra.check_prefixes(&["activity."]).map_err(|e| data(format!("{}: {e}", path.display())))?;
            p.activity.apply(&extra).map_err(|e| data(format!("{}: {e}", path.display())))?;
        }
        Ok(p)
    }

    pub fn generator(&self, scenario: Scenario) -> CliResult<GeneratorConfig> {
        let mut g = GeneratorConfig::for_scenario(scenario);
        g.apply(&self.config).map_err(data)?;
        Ok(g)
    }
}

pub fn parse_scenarios(s: &str) -> CliResult<Vec<Scenario>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Scenario::ALL.to_vec());
    }
    s.split(',').map(|x| x.trim().parse().map_err(usage)).collect()
}
