use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_driftlearn"));
    cmd.env("DRIFTLEARN_THREADS", "2");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn write_hand_stream(dir: &Path) -> String {
    let p = path(dir, "hand.csv");
    fs::write(&p, "t,x_1,y,u_1\n1,1,1,0\n2,1,0.5,0\n").unwrap();
    p
}

#[test]
fn gen_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    for out in [&a, &b] {
        let o = run(&["gen", "--kind", "A", "--T", "10", "--d", "10", "--seed", "1", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,x_1,") && header.ends_with(",u_10"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn run_reproduces_hand_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_hand_stream(dir.path());
    let o = run(&["run", "--algo", "laser", "--b", "1", "--c", "2", "--data", &data]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let yhats: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(yhats.len(), 2);
    assert!(yhats[0].abs() < 1e-12);
    assert!((yhats[1] - 0.25).abs() < 1e-12);
}

#[test]
fn verify_oracle_passes() {
    let o = run(&["verify", "--suite", "oracle", "--trials", "100", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("PASS") && text.contains("worst_gap="), "{text}");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["run", "--nope"][..],
        &["frobnicate"],
        &["run", "--algo", "arcor"],
        &["verify", "--suite", "lemma9"],
        &["run", "--algo", "aar", "--c", "3"],
        &["gen", "--d", "1"],
        &["sweep", "--grid", "b"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn missing_input_exits_1() {
    let o = run(&["run", "--data", "/nonexistent/stream.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["report", "/nonexistent/report.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_output_is_a_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let best = path(dir.path(), "best.json");
    let o = run(&[
        "sweep", "--algo", "crrls", "--T", "50", "--seed", "3", "--grid", "period=10,inf", "--out", &best,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&best).unwrap()).unwrap();
    assert_eq!(doc["algo"], "crrls");
    assert_eq!(doc["T"], 50);

    let o = run(&["run", "--config", &best, "--seeds", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let cum: f64 = last.split(',').nth(6).unwrap().parse().unwrap();
    let best_loss = match &doc["cum_loss"] {
        serde_json::Value::Number(n) => n.as_f64().unwrap(),
        v => panic!("{v}"),
    };
    assert_eq!(text.lines().count(), 51);
    assert_eq!(cum, best_loss);
}

#[test]
fn explicit_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    fs::write(&cfg, r#"{"algo": "laser", "params": {"b": 1, "c": 5}, "T": 7, "d": 3}"#).unwrap();
    let o = run(&["run", "--config", &cfg, "--c", "50", "--T", "9", "--seeds", "1"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("b=1,c=50"));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 10);
}

#[test]
fn report_ignores_row_order() {
    let dir = tempfile::tempdir().unwrap();
    let rep = path(dir.path(), "r.csv");
    let o = run(&["run", "--algo", "laser,nlms", "--T", "30", "--seeds", "3", "--out", &rep]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(&rep).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.reverse();
    let shuffled = path(dir.path(), "s.csv");
    fs::write(&shuffled, format!("{header}\n{}\n", lines.join("\n"))).unwrap();

    let (s1, s2, plot) = (
        path(dir.path(), "s1.csv"),
        path(dir.path(), "s2.csv"),
        path(dir.path(), "p.gp"),
    );
    assert!(run(&["report", &rep, "--out", &s1, "--plot", &plot]).status.success());
    assert!(run(&["report", &shuffled, "--out", &s2]).status.success());
    assert_eq!(fs::read(&s1).unwrap(), fs::read(&s2).unwrap());
    let summary = fs::read_to_string(&s1).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 30);
    assert!(fs::read_to_string(&plot).unwrap().contains("'laser'"));
}

#[test]
fn strict_run_fails_on_violation() {
    // The filtering bound breaks on this desk stream.
    let o = run(&["run", "--algo", "hinf", "--seeds", "20", "--strict"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL hinf_theorem"));
    let o = run(&["run", "--algo", "laser", "--seeds", "3", "--strict"]);
    assert_eq!(o.status.code(), Some(0));
}
