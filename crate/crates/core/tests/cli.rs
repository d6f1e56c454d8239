use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = r#"
seed = 3

[dataset]
kind = "synth"
classes = 4
train_size = 400
test_size = 100
dim = 5

[partition]
regime = "iid"
peers = 10

[training]
rounds = 3
hidden = 8
lr = 0.05
local_epochs = 1
batch_size = 10

[attack]
ratio = 0.2
source = 2
target = 1
"#;

fn workspace(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("exp.toml"), config).unwrap();
    dir
}

fn lfshield(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfshield"))
        .current_dir(dir)
        .env_remove("LFSHIELD_SEED")
        .env_remove("RUST_LOG")
        .arg("run")
        .args(["--config", "exp.toml"])
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, out: &str, file: &str) -> String {
    fs::read_to_string(dir.join(out).join(file)).unwrap()
}

#[test]
fn repeated_runs_write_identical_outputs() {
    let dir = workspace(CONFIG);
    for out in ["a", "b"] {
        let o = lfshield(dir.path(), &["--defense", "fedavg,ours", "--out-dir", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["rounds.jsonl", "summary.csv", "curves.csv"] {
        assert_eq!(read(dir.path(), "a", file), read(dir.path(), "b", file), "{file}");
    }
}

#[test]
fn full_sweep_has_a_row_per_cell() {
    let dir = workspace(CONFIG);
    let o = lfshield(dir.path(), &["--defense", "all", "--ratios", "0,0.1,0.2,0.3,0.4,0.5", "--out-dir", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read(dir.path(), "out", "summary.csv");
    let rows: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 42);
    let jsonl = read(dir.path(), "out", "rounds.jsonl");
    assert_eq!(jsonl.lines().count(), 1 + 42 * 3);
    let header: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(header["defenses"].as_array().unwrap().len(), 7);
}

#[test]
fn bound_violation_warns_and_still_runs() {
    let dir = workspace(CONFIG);
    let o = lfshield(dir.path(), &["--defense", "ours", "--ratios", "0.6", "--out-dir", "out"]);
    assert!(o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("threat-model bound"), "{stderr}");
    assert!(dir.path().join("out/summary.csv").exists());
}

#[test]
fn bad_arguments_fail_without_outputs() {
    let dir = workspace(CONFIG);
    let cases: [&[&str]; 3] = [
        &["--defense", "bogus"],
        &["--ratios", "1.5"],
        &["--ratios", "-0.1"],
    ];
    for args in cases {
        let mut full = args.to_vec();
        full.extend(["--out-dir", "out"]);
        let o = lfshield(dir.path(), &full);
        assert!(!o.status.success(), "{args:?}");
        assert!(!dir.path().join("out").exists(), "{args:?}");
    }

    let missing = workspace(
        r#"
        [dataset]
        kind = "idx"
        train_images = "nope-images"
        train_labels = "nope-labels"
        test_images = "nope-images"
        test_labels = "nope-labels"
        [partition]
        regime = "iid"
        peers = 4
        [training]
        rounds = 1
        lr = 0.1
        local_epochs = 1
        batch_size = 4
        "#,
    );
    let o = lfshield(missing.path(), &["--out-dir", "out"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!missing.path().join("out").exists());
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = workspace(CONFIG);
    let run = |out: &str, env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lfshield"));
        cmd.current_dir(dir.path()).env_remove("LFSHIELD_SEED");
        if let Some(seed) = env {
            cmd.env("LFSHIELD_SEED", seed);
        }
        let o = cmd
            .args(["run", "--config", "exp.toml", "--defense", "fedavg", "--out-dir", out])
            .args(extra)
            .output()
            .unwrap();
        assert!(o.status.success());
        read(dir.path(), out, "curves.csv")
    };
    let from_env = run("env", Some("99"), &[]);
    let from_flag = run("flag", None, &["--seed", "99"]);
    let from_file = run("file", None, &[]);
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, from_file);
}

#[test]
fn feature_dumps_are_written() {
    let dir = workspace(CONFIG);
    let o = lfshield(dir.path(), &["--defense", "ours", "--dump-features", "--out-dir", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("out/features"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["ours_r0.2_t1.csv", "ours_r0.2_t2.csv", "ours_r0.2_t3.csv"]);
    let body = read(dir.path(), "out/features", &names[0]);
    let mut lines = body.lines();
    assert!(lines.next().unwrap().starts_with("# config:"));
    assert!(lines.next().unwrap().starts_with("# neurons:"));
    assert!(lines.next().unwrap().starts_with("peer,attacker,cluster,flagged,pc1,pc2,f0"));
    assert_eq!(lines.count(), 10);
}
