use std::path::Path;
use std::process::{Command, Output};

const ONE_AP: &str = r#"
[train]
epochs = 1

[[aps]]
id = 1
position = [2.15, 0.0]
boresight_deg = 90.0
"#;

const WALKER: &str = r#"
duration_s = 2.5
noise_std = 2e-3
cfo_range_hz = 20.0

[[aps]]
id = 1
position = [2.15, 0.0]
boresight_deg = 90.0

[[subjects]]
id = 3
waypoints = [{ position = [2.15, 2.0], t = 0.1 }, { position = [2.15, 4.0], t = 2.5 }]
schedule = [{ start_s = 0.0, activity = "walking" }]
"#;

fn aysense(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aysense"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn failure(out: &Output) -> String {
    assert!(!out.status.success(), "expected a failure exit");
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), ONE_AP).unwrap();
    std::fs::write(dir.path().join("walker.toml"), WALKER).unwrap();
    dir
}

#[test]
fn simulate_track_mud_chain() {
    let dir = setup();
    let d = dir.path();
    let c = ["--config", "cfg.toml"];
    let out = ok(&aysense(&[&["simulate", "walker.toml", "--seed", "4", "--out", "sim"], &c[..]].concat(), d));
    assert!(out.contains("ap1.cir"), "{out}");
    let out = ok(&aysense(
        &[&["track", "sim/ap1.cir", "--truth", "sim/scene.toml", "--out", "trk"], &c[..]].concat(),
        d,
    ));
    assert!(out.contains("ap1: 1 confirmed tracks"), "{out}");
    let rate: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("detection rate ap1: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rate > 0.9, "{out}");
    assert!(d.join("trk/tracks_ap1.csv").exists());
    let out = ok(&aysense(&[&["mud", "sim/ap1.cir", "--tracks", "trk", "--out", "md"], &c[..]].concat(), d));
    assert!(out.contains("ap1: 1 spectrograms"), "{out}");
    let pgms = std::fs::read_dir(d.join("md"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm"))
        .count();
    assert_eq!(pgms, 1);
}

#[test]
fn dataset_train_eval_e2e_chain() {
    let dir = setup();
    let d = dir.path();
    let c = ["--config", "cfg.toml"];
    let args = ["dataset", "--activities", "walking,sitting", "--scenes-per-class", "1", "--windows-per-scene", "2"];
    let out = ok(&aysense(&[&args[..], &["--out", "data"], &c[..]].concat(), d));
    assert!(out.trim_end().ends_with("manifest.csv"), "{out}");
    let out = ok(&aysense(&[&["train", "data/manifest.csv", "--out", "model/net.bin"], &c[..]].concat(), d));
    assert!(out.contains("train accuracy"), "{out}");
    assert!(d.join("model/train_log.csv").exists());
    let out = ok(&aysense(&["eval", "data/manifest.csv", "--checkpoint", "model/net.bin", "--out", "ev"], d));
    assert!(out.starts_with("accuracy "), "{out}");
    assert!(d.join("ev/confusion.csv").exists());
    let out = ok(&aysense(
        &[&["e2e", "walker.toml", "--checkpoint", "model/net.bin", "--out", "run"], &c[..]].concat(),
        d,
    ));
    assert!(out.starts_with("ap1 track "), "{out}");
    assert!(d.join("run/decisions.csv").exists());
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = setup();
    let d = dir.path();
    let err = failure(&aysense(&["simulate", "missing.toml", "--out", "x"], d));
    assert!(err.contains("missing.toml"), "{err}");

    std::fs::write(d.join("junk.cir"), b"not a capture at all").unwrap();
    let err = failure(&aysense(&["track", "junk.cir", "--out", "x"], d));
    assert!(err.contains("junk.cir"), "{err}");

    let err = failure(&aysense(&["dataset", "--activities", "flying", "--out", "x"], d));
    assert!(err.contains("flying"), "{err}");

    let err = failure(&aysense(&["simulate", "walker.toml"], d));
    assert!(err.contains("--out"), "{err}");

    std::fs::write(d.join("bad.toml"), "[radio]\ntaps = -3\n").unwrap();
    let err = failure(&aysense(&["simulate", "walker.toml", "--config", "bad.toml", "--out", "x"], d));
    assert!(err.contains("bad.toml"), "{err}");
}
