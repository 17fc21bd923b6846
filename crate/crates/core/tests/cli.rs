use std::process::Command;

fn xlmimo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xlmimo"))
}

fn tiny_config(dir: &std::path::Path) -> std::path::PathBuf {
    let text = r#"
[scenario]
users = 8
active_users = 2
subarrays = 4

[channel]
subcarriers = 256
antennas_per_subarray = 4

[frontend]
g_symbols = 16

[sweep]
trials = 2
"#;
    let path = dir.join("tiny.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    let status = xlmimo()
        .args([
            "sweep",
            "--axis",
            "ptx",
            "--values",
            "10,30",
            "--trials",
            "2",
            "--solvers",
            "strbomp,bomp",
        ])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in [
        "config.lock.json",
        "records.jsonl",
        "results.csv",
        "pe.svg",
        "nmse.svg",
        "pe.dat",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("ptx,30,bomp,nmse_db,")));
    assert_eq!(
        std::fs::read_to_string(out.join("records.jsonl"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn simulate_dumps_and_locate_demo_prints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("sim");
    let run = xlmimo()
        .args(["simulate", "--seed", "3", "--pilot-mode", "mmv", "--solvers", "strbomp"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for f in [
        "scenario.json",
        "channel.bin",
        "y.bin",
        "measurements.json",
        "recovery_strbomp.json",
        "h_hat_strbomp.bin",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let demo = xlmimo()
        .args(["locate-demo"])
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(demo.status.success(), "{}", String::from_utf8_lossy(&demo.stderr));
    let text = String::from_utf8_lossy(&demo.stdout);
    assert!(text.contains("theta") && text.contains("tau"), "{text}");
}

#[test]
fn unknown_solver_is_rejected() {
    let run = xlmimo().args(["simulate", "--solvers", "lasso"]).output().unwrap();
    assert!(!run.status.success());
}
