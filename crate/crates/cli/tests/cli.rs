use std::path::Path;
use std::process::{Command, Output};

fn lopec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lopec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 10] = [
    "--set",
    "world.count=60",
    "--set",
    "world.bounds={ width = 200.0, height = 200.0 }",
    "--set",
    "collection.sessions=2",
    "--set",
    "success.scale_prefixes=[1, 2]",
    "--set",
    "distribution.requests=300",
];

#[test]
fn verify_reports_every_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = lopec(dir.path(), &["verify", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn exp_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = lopec(dir.path(), &["exp", "distribution"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = lopec(dir.path(), &["exp", "nonsense", "--seed", "1"]);
    assert!(!out.status.success());
}

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend_from_slice(&SMALL);
    v
}

#[test]
fn world_collect_coeffs_and_experiment_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = lopec(d, &with_small(&["gen-world", "--seed", "5"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("world.json").exists());

    let out = lopec(d, &with_small(&["collect", "--seed", "5", "--out", "g.json"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = lopec(d, &["coeffs", "--graph", "g.json", "--out", "g2.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(d.join("cfg.toml"), "[distribution]\nwindow = 100\n").unwrap();
    let run = |outdir: &str| {
        let mut args = with_small(&["exp", "distribution", "--seed", "5", "--graph", "g2.json", "--config", "cfg.toml"]);
        args.extend_from_slice(&["--output-dir", outdir]);
        let out = lopec(d, &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(d.join(outdir).join("distribution.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a.lines().count(), 1 + 3);
    assert_eq!(a, run("b"));
    assert!(d.join("a/distribution-summary.txt").exists());
}
