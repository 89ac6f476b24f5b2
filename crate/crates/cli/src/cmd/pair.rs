use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use clap::{Args as ClapArgs, ValueEnum};
use fastzip::protocol::{Role, SecretSize};
use fastzip::security::parse_fraction;
use fastzip::transport::{run_session, PairingParams, SystemClock, TcpChannel};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::read_dump;
use crate::error::{data, usage, CliError, CliResult};
use crate::settings::Settings;

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Initiator,
    Responder,
}

#[derive(ClapArgs)]
#[command(group(clap::ArgGroup::new("endpoint").required(true).args(["listen", "connect"])))]
pub struct Args {
    #[arg(long, value_enum)]
    role: RoleArg,
    /// Wait for the peer on this address.
    #[arg(long, value_name = "HOST:PORT")]
    listen: Option<String>,
    /// Dial the peer at this address, retrying until the timeout.
    #[arg(long, value_name = "HOST:PORT")]
    connect: Option<String>,
    /// Fingerprint dump; the bits of all records are concatenated in order.
    #[arg(long, value_name = "PATH")]
    fingerprint: PathBuf,
    /// Use only the first N bits of the dump.
    #[arg(long, value_name = "N")]
    bits: Option<usize>,
    /// Similarity threshold (default: fused threshold of the dump's sensors).
    #[arg(long, value_name = "FRACTION")]
    threshold: Option<String>,
    /// Shared secret size, 128 or 244 bits.
    #[arg(long, value_name = "BITS", default_value_t = 128)]
    secret_bits: u16,
    /// Wall-clock start (Unix seconds) shared by both devices.
    #[arg(long, value_name = "UNIX_SECS")]
    start_at: Option<f64>,
    /// Seconds to wait for the peer to connect and say HELLO.
    #[arg(long, value_name = "SECS", default_value_t = 10.0)]
    timeout: f64,
    /// Seconds to wait for key confirmation.
    #[arg(long, value_name = "SECS", default_value_t = 3.0)]
    confirm_timeout: f64,
}

fn secs(v: f64, flag: &str) -> CliResult<Duration> {
    Duration::try_from_secs_f64(v)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| usage(format!("{flag} must be a positive number of seconds")))
}

fn open_channel(a: &Args, deadline: Instant) -> CliResult<TcpChannel> {
    let transport = |e: std::io::Error| CliError::Aborted(format!("transport: {e}"));
    if let Some(addr) = &a.listen {
        let listener = TcpListener::bind(addr).map_err(|e| usage(format!("--listen {addr}: {e}")))?;
        listener.set_nonblocking(true).map_err(transport)?;
        loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false).map_err(transport)?;
                    return TcpChannel::new(stream).map_err(transport);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() > deadline {
                        return Err(CliError::Aborted("no peer connected before the timeout".into()));
                    }
                    thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(transport(e)),
            }
        }
    }
    let addr = a.connect.as_deref().expect("clap enforces one endpoint");
    loop {
        match TcpStream::connect(addr) {
            Ok(stream) => return TcpChannel::new(stream).map_err(transport),
            Err(e) if Instant::now() > deadline => return Err(transport(e)),
            Err(_) => thread::sleep(Duration::from_millis(50)),
        }
    }
}

pub fn run(s: &Settings, a: Args) -> CliResult {
    let records = read_dump(&a.fingerprint)?;
    let first = records
        .first()
        .ok_or_else(|| data(format!("{}: no fingerprints", a.fingerprint.display())))?;
    let mods = first.fingerprint.modalities();
    if records.iter().any(|r| r.fingerprint.modalities() != mods) {
        return Err(data("all records of the dump must use the same sensors"));
    }
    let mut bits: Vec<bool> = records.iter().flat_map(|r| r.fingerprint.bits().iter().copied()).collect();
    if let Some(n) = a.bits {
        if n == 0 || n > bits.len() {
            return Err(usage(format!("--bits must lie in 1..={}", bits.len())));
        }
        bits.truncate(n);
    }
    let thr = match &a.threshold {
        Some(t) => parse_fraction(t).map_err(usage)?,
        None => first.fingerprint.fused_threshold(),
    };
    let mut params = PairingParams::new(thr);
    params.secret = SecretSize::from_bits(a.secret_bits).ok_or_else(|| usage("--secret-bits must be 128 or 244"))?;
    params.sensors = mods.iter().fold(0, |acc, m| acc | m.bit());
    params.hello_timeout = secs(a.timeout, "--timeout")?;
    params.confirm_timeout = secs(a.confirm_timeout, "--confirm-timeout")?;
    let role = match a.role {
        RoleArg::Initiator => Role::Initiator,
        RoleArg::Responder => Role::Responder,
    };

    if let Some(at) = a.start_at {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        if at > now {
            s.note(format!("waiting {:.1} s for the agreed start", at - now));
            thread::sleep(Duration::from_secs_f64(at - now));
        }
    }
    let deadline = Instant::now() + params.hello_timeout;
    let mut chan = open_channel(&a, deadline)?;
    let rng = match s.seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed ^ u64::from(role.byte())),
        None => ChaCha20Rng::from_entropy(),
    };
    s.note(format!("{} bits at threshold {thr}", bits.len()));
    let report = run_session(role, &params, &bits, &mut chan, &SystemClock::new(), rng)
        .map_err(|e| CliError::Aborted(format!("transport: {e}")))?;
    let t = &report.timings;
    s.note(format!(
        "negotiation {:?}, amplification {:?}, commitment {:?}, confirmation {:?}, total {:?}",
        t.negotiation, t.amplification, t.commitment, t.confirmation, t.total
    ));
    match report.outcome.key() {
        Some(k) => {
            let digest = Sha256::digest(k.as_bytes());
            let short: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
            println!("key {short} ({} bits)", k.bits());
            Ok(())
        }
        None => {
            let reason = report.outcome.abort_reason().expect("aborted outcomes carry a reason");
            let by_peer = matches!(report.outcome, fastzip::protocol::Outcome::Aborted { by_peer: true, .. });
            Err(CliError::Aborted(format!("{reason}{}", if by_peer { " (reported by peer)" } else { "" })))
        }
    }
}
