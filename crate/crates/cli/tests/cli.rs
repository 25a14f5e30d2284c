use std::fs;
use std::path::PathBuf;
use std::process::Command;

const CONFIG: &str = r#"{
  "interleaver": {"size": 128, "seed": 3},
  "channel": {"kind": "awgn", "ebno_db": [2.0]},
  "decoder": {"max_iterations": 4},
  "rules": [{"kind": "fixed", "iterations": 4}, {"kind": "mia_ii"}],
  "sim": {"num_frames": 8, "master_seed": 1}
}"#;

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("turbostop-cli-{name}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("cfg.json"), CONFIG).unwrap();
    dir
}

fn run(dir: &PathBuf, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_turbostop"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = workdir("sweep");
    let out = run(
        &dir,
        &[
            "sweep", "--config", "cfg.json", "--out", "s.csv", "--seed", "9",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("s.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snr_db,channel,rule,frames,bit_errors,ber,fer,avg_iterations,seed"
    );
    assert_eq!(lines.count(), 2);
    assert!(csv.contains(",9\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("s.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"], 9);
    assert_eq!(manifest["command"], "sweep");
}

#[test]
fn trajectory_and_ratios() {
    let dir = workdir("curves");
    assert!(run(
        &dir,
        &[
            "trajectory",
            "--config",
            "cfg.json",
            "--out",
            "t.csv",
            "--frame",
            "2"
        ]
    )
    .status
    .success());
    let t = fs::read_to_string(dir.join("t.csv")).unwrap();
    assert!(t.starts_with("half_iteration,i_app_dec1,i_app_dec2\n"));
    assert_eq!(t.lines().count(), 9);

    assert!(run(
        &dir,
        &[
            "ratios",
            "--config",
            "cfg.json",
            "--out",
            "r.csv",
            "--packets",
            "3"
        ]
    )
    .status
    .success());
    let r = fs::read_to_string(dir.join("r.csv")).unwrap();
    assert!(r.starts_with("packet,iteration,ce_ratio,epsilon_ratio\n"));
    assert_eq!(r.lines().count(), 1 + 3 * 4);
}

#[test]
fn bad_config_fails_with_diagnostic() {
    let dir = workdir("bad");
    fs::write(
        dir.join("bad.json"),
        CONFIG.replace("\"size\": 128", "\"size\": 0"),
    )
    .unwrap();
    let out = run(&dir, &["sweep", "--config", "bad.json", "--out", "x.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let missing = run(&dir, &["sweep", "--config", "nope.json", "--out", "x.csv"]);
    assert!(!missing.status.success());
}
