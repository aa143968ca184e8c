use std::fs;
use std::process::{Command, Output};

fn vgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vgd")).args(args).output().unwrap()
}

#[test]
fn run_writes_every_artifact_and_report_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deviation");
    let o = vgd(&["run", "--scenario", "builtin:deviation_approach", "--mode", "gps", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["events.ndjson", "announcements.ndjson", "deviation.txt", "deviation.csv", "metrics.json", "plot.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("deviation.csv")).unwrap();
    assert!(csv.contains("start,GPS_ONLY,-14.8000,"), "{csv}");

    let again = dir.path().join("again");
    let o = vgd(&["report", "--log", out.join("events.ndjson").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["deviation.txt", "deviation.csv", "metrics.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn validate_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\ncorpus = \"builtin:field_site\"\nplan = \"builtin:desk_plan\"\nroute = [{ lat = 40.7423, lon = -74.1792 }]\n").unwrap();
    let ok = vgd(&["validate", "--scenario", "builtin:demo_crossing", "--scenario", "builtin:approach_600m"]);
    assert!(ok.status.success());
    let o = vgd(&["validate", "--scenario", "builtin:demo_crossing", "--scenario", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("ok    scenario builtin:demo_crossing"), "{text}");
    assert!(text.contains("error scenario"), "{text}");
    assert!(!vgd(&["validate"]).status.success());
}

#[test]
fn seed_override_changes_the_noisy_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = |seed: &str| {
        let out = dir.path().join(seed);
        let o = vgd(&["run", "--scenario", "builtin:demo_crossing", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        fs::read(out.join("events.ndjson")).unwrap()
    };
    assert_ne!(log("1"), log("2"));
}
