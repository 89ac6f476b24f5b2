use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::thread;

const SUBCOMMANDS: [&str; 9] = [
    "calc-params",
    "preprocess",
    "quantize",
    "pair",
    "evaluate",
    "attack",
    "entropy",
    "generate",
    "bench",
];

fn fastzip() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fastzip"));
    c.env_remove("FASTZIP_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    fastzip().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn every_subcommand_has_help() {
    for sub in SUBCOMMANDS {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["calc-params"])), 1);
    assert_eq!(code(&run(&["calc-params", "--threshold", "banana"])), 1);
    assert_eq!(code(&run(&["--jobs", "0", "calc-params", "--table1"])), 1);
    assert_eq!(code(&run(&["pair", "--role", "initiator", "--fingerprint", "x"])), 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["quantize", "--input", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let bad = dir.path().join("bad.bits");
    fs::write(&bad, "0.0 Gyr 01x1\n").unwrap();
    let o = run(&["entropy", "--dump", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn config_resolution_order() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "threshold.Acv = 2\n").unwrap();
    let good = dir.path().join("good.conf");
    fs::write(&good, "threshold.Acv = 0.8\n").unwrap();
    let args = ["calc-params", "--table2"];

    // The working-directory file is the last resort.
    fs::copy(&bad, dir.path().join("fastzip.conf")).unwrap();
    let o = fastzip().current_dir(dir.path()).args(args).output().unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    // The environment beats it.
    let o = fastzip().current_dir(dir.path()).env("FASTZIP_CONFIG", &good).args(args).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // The flag beats the environment.
    let o = fastzip()
        .current_dir(dir.path())
        .env("FASTZIP_CONFIG", &good)
        .arg("--config")
        .arg(&bad)
        .args(args)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = fastzip().current_dir(dir.path()).arg("--config").arg(&good).arg("-v").args(args).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("good.conf"), "{}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    fs::write(&conf, "bogus.key = 1\n").unwrap();
    let o = run(&["--config", conf.to_str().unwrap(), "calc-params", "--table1"]);
    assert_ne!(code(&o), 0);
}

#[test]
fn seeded_runs_are_deterministic() {
    let cases: [&[&str]; 3] = [
        &["--seed", "7", "attack", "--kind", "replay", "--scenario", "parking", "--duration", "120", "--csv"],
        &["--seed", "7", "evaluate", "--scenario", "highway", "--duration", "120", "--modalities", "Acv", "--csv"],
        &["--seed", "7", "entropy", "--scenario", "country", "--duration", "300", "--modalities", "Acv"],
    ];
    for args in cases {
        let a = run(args);
        let b = run(args);
        assert_eq!(code(&a), 0, "{args:?}: {}", stderr(&a));
        assert_eq!(stdout(&a), stdout(&b), "{args:?}");
    }
}

#[test]
fn generate_and_quantize_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut dumps = Vec::new();
    for run_id in ["a", "b"] {
        let raw = dir.path().join(format!("raw_{run_id}"));
        let o = run(&["--seed", "3", "generate", "--scenario", "city", "--duration", "60", "--output", raw.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(&["quantize", "--input", raw.to_str().unwrap(), "--modalities", "Acv+Bar"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        dumps.push(stdout(&o));
    }
    assert_eq!(dumps[0], dumps[1]);
    assert!(dumps[0].contains("Acv+Bar"));
}

fn pair(dir: &Path, fa: &Path, fb: &Path, extra: &[&str]) -> (Output, Output) {
    let addr = format!("127.0.0.1:{}", free_port());
    let responder = {
        let (addr, fb) = (addr.clone(), fb.to_owned());
        let extra: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        let dir = dir.to_owned();
        thread::spawn(move || {
            fastzip()
                .current_dir(dir)
                .args(["--seed", "5", "pair", "--role", "responder", "--listen", &addr, "--fingerprint"])
                .arg(fb)
                .args(extra)
                .output()
                .unwrap()
        })
    };
    let a = fastzip()
        .current_dir(dir)
        .args(["--seed", "5", "pair", "--role", "initiator", "--connect", &addr, "--fingerprint"])
        .arg(fa)
        .args(extra)
        .output()
        .unwrap();
    (a, responder.join().unwrap())
}

#[test]
fn colocated_dumps_pair_and_other_cars_abort() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let bits = dir.path().join("bits");
    let o = run(&["--seed", "2", "generate", "--scenario", "city", "--duration", "200", "--output", raw.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "quantize",
        "--input",
        raw.to_str().unwrap(),
        "--modalities",
        "all",
        "--common",
        "--output",
        bits.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut files: Vec<_> = fs::read_dir(&bits).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 4, "{files:?}");

    let (a, b) = pair(dir.path(), &files[0], &files[1], &["--bits", "100"]);
    assert_eq!((code(&a), code(&b)), (0, 0), "{}\n{}", stderr(&a), stderr(&b));
    assert!(stdout(&a).starts_with("key "));
    assert_eq!(stdout(&a), stdout(&b));

    let (a, b) = pair(dir.path(), &files[0], &files[2], &["--bits", "100"]);
    assert_eq!((code(&a), code(&b)), (3, 3), "{}\n{}", stderr(&a), stderr(&b));
    assert!(stderr(&b).contains("pairing aborted"));
}

#[test]
fn dissimilar_fingerprints_abort_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // 40% of the bits agree.
    let a: String = "0000000000".repeat(8);
    let b: String = "0000111111".repeat(8);
    let fa = dir.path().join("a.bits");
    let fb = dir.path().join("b.bits");
    fs::write(&fa, a.as_bytes().chunks(16).map(|c| format!("0.0 Gyr {}\n", std::str::from_utf8(c).unwrap())).collect::<String>()).unwrap();
    fs::write(&fb, b.as_bytes().chunks(16).map(|c| format!("0.0 Gyr {}\n", std::str::from_utf8(c).unwrap())).collect::<String>()).unwrap();
    let (a, b) = pair(dir.path(), &fa, &fb, &[]);
    assert_eq!((code(&a), code(&b)), (3, 3), "{}\n{}", stderr(&a), stderr(&b));
    assert!(stderr(&a).contains("pairing aborted"), "{}", stderr(&a));
}

#[test]
fn pairing_without_a_peer_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.bits");
    fs::write(&f, "0.0 Gyr 0101010101010101\n").unwrap();
    let addr = format!("127.0.0.1:{}", free_port());
    let o = run(&["pair", "--role", "responder", "--listen", &addr, "--fingerprint", f.to_str().unwrap(), "--timeout", "0.3"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn calc_params_prints_both_tables() {
    let o = run(&["calc-params", "--table1", "--table2", "--csv"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("table2,Acv,70.8,140,203,24,10,60,90"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("table1,19/20,40,36")));
}

#[test]
fn bench_reports_phases() {
    let o = run(&["--seed", "1", "bench", "--iterations", "10", "--modalities", "Acv", "--transport", "memory", "--csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().contains("total_mean_ms"), "{out}");
}
