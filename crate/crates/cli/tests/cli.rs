//! End-to-end runs of the `nash-sir` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nash_sir::io::{parse_trajectory_csv, trajectory_csv, HEADER};
use serde_json::Value;

const BETA0: &str = "
[model]
beta = 0.0
sigma = 0.2
gamma = 0.1
alpha = 0.8
delta_init = 0.01
T = 30.0
a0 = 10.0
a1 = 0.5
a2 = 0.5
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nash-sir"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs `equilibrium` on `config` into `out` and returns the manifest.
fn equilibrium(config: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["equilibrium", "--config", path_str(config), "--out", path_str(out)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn no_transmission_has_one_equilibrium() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "beta0.toml", BETA0);
    let out = tmp.path().join("out");
    let manifest = equilibrium(&cfg, &out, &[]);
    assert_eq!(manifest["count"], 1);
    assert_eq!(manifest["schema_version"], 1);
    let entry = &manifest["equilibria"][0];
    assert_eq!(entry["file"], "eq_1.csv");
    assert!((entry["attack_rate"].as_f64().unwrap() - 0.01).abs() < 1e-10);
    assert!(entry["fixed_point_verified"].as_bool().unwrap());
    let rows = parse_trajectory_csv(&fs::read(out.join("eq_1.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 5001);
    for r in &rows {
        assert!((r[1..6].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(r[6], 0.0);
    }
}

#[test]
fn verify_accepts_equilibria_and_rejects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "beta0.toml", BETA0);
    let out = tmp.path().join("out");
    equilibrium(&cfg, &out, &[]);
    let eq = out.join("eq_1.csv");
    let verify = |file: &Path| run(&["verify", "--config", path_str(&cfg), "--trajectory", path_str(file)]);

    let o = verify(&eq);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));

    // Distancing raised by 0.1 on the first half of the horizon.
    let mut rows = parse_trajectory_csv(&fs::read(&eq).unwrap()).unwrap();
    for r in &mut rows {
        if r[0] <= 15.0 {
            r[6] += 0.1;
        }
    }
    let tampered = tmp.path().join("tampered.csv");
    fs::write(&tampered, trajectory_csv(&rows).unwrap()).unwrap();
    let o = verify(&tampered);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));

    // A file cut off mid-row is a format error, not a failed verification.
    let bytes = fs::read(&eq).unwrap();
    let truncated = tmp.path().join("truncated.csv");
    let cut = bytes.len() / 2;
    let cut = cut + bytes[cut..].iter().position(|b| *b == b',').unwrap();
    fs::write(&truncated, &bytes[..cut]).unwrap();
    assert_eq!(code(&verify(&truncated)), 2);

    let headerless = tmp.path().join("headerless.csv");
    let text = String::from_utf8(bytes).unwrap();
    fs::write(&headerless, text.split_once('\n').unwrap().1).unwrap();
    assert_eq!(code(&verify(&headerless)), 2);
}

#[test]
fn configuration_errors_exit_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("syntax.toml", "[model\nbeta = 1".to_string()),
        ("unknown.toml", format!("{BETA0}\nbogus = 3\n")),
        ("range.toml", BETA0.replace("alpha = 0.8", "alpha = 1.5")),
        ("missing.toml", "[output]\nstride = 2\n".to_string()),
        ("stride.toml", format!("{BETA0}\n[output]\nstride = 0\n")),
    ];
    for (name, text) in cases {
        let cfg = write_config(tmp.path(), name, &text);
        for cmd in ["simulate", "equilibrium"] {
            let o = run(&[cmd, "--config", path_str(&cfg), "--out", path_str(&out)]);
            assert_eq!(code(&o), 2, "{name} {cmd}");
            assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
            assert!(!out.exists(), "{name} {cmd} wrote output");
        }
    }
    let o = run(&["equilibrium", "--config", path_str(&tmp.path().join("absent.toml"))]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["bogus-command"])), 2);
}

#[test]
fn stride_keeps_every_kth_row_and_the_last() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "beta0.toml", BETA0);
    let full_dir = tmp.path().join("full");
    let thin_dir = tmp.path().join("thin");
    let full_manifest = equilibrium(&cfg, &full_dir, &[]);
    let thin_manifest = equilibrium(&cfg, &thin_dir, &["--stride", "7"]);
    let full = parse_trajectory_csv(&fs::read(full_dir.join("eq_1.csv")).unwrap()).unwrap();
    let thin = parse_trajectory_csv(&fs::read(thin_dir.join("eq_1.csv")).unwrap()).unwrap();
    let mut expected: Vec<_> = full.iter().step_by(7).copied().collect();
    if (full.len() - 1) % 7 != 0 {
        expected.push(*full.last().unwrap());
    }
    assert_eq!(thin, expected);
    // Summaries come from the full trajectory, not the thinned file.
    assert_eq!(full_manifest["equilibria"][0]["attack_rate"], thin_manifest["equilibria"][0]["attack_rate"]);
}

#[test]
fn csv_round_trips_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "beta0.toml", &format!("{BETA0}\n[policy]\nsegments = [[0.0, 0.0], [10.0, 0.4]]\n"));
    let out = tmp.path().join("sim");
    let o = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let bytes = fs::read(out.join("trajectory.csv")).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
    let rows = parse_trajectory_csv(&bytes).unwrap();
    assert_eq!(trajectory_csv(&rows).unwrap(), bytes);
    assert!(rows.iter().all(|r| if r[0] < 10.0 { r[6] == 0.0 } else { r[6] == 0.4 }));

    let summary: Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!((summary["attack_rate"].as_f64().unwrap() - 0.01).abs() < 1e-10);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{BETA0}\n[sweep]\nparam = \"a2\"\nvalues = [0.25, 1.0]\n");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let out = tmp.path().join("sweep");
    let o = run(&["sweep", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "a2,count,min_attack_rate,max_attack_rate,min_total_gamma_E,max_total_gamma_E");
    assert_eq!(lines.len(), 3);
    for (line, value) in lines[1..].iter().zip(["0.25", "1.0"]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], value);
        assert_eq!(cells[1], "1");
    }
    for k in 1..=2 {
        assert!(out.join(format!("a2_{k}")).join("manifest.json").exists());
    }

    // A sweep without a [sweep] table is a configuration error.
    let plain = write_config(tmp.path(), "plain.toml", BETA0);
    let o = run(&["sweep", "--config", path_str(&plain), "--out", path_str(&tmp.path().join("none"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = nash_sir::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
            if path.file_stem().unwrap() == "a2-sweep" {
                assert!(cfg.sweep.is_some());
            }
        }
    }
    assert!(seen >= 6);
}
