use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aad_core::motion_stats::StatsGrid;

fn aad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aad"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SCENE: &str = "width = 64\nheight = 48\nframes = 40\nwalkers = 6\nseed = 4\n\n[intruder]\nentry = 33\nexit = 37\nspeed = 4.0\n";

fn synth(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("scene.toml");
    fs::write(&spec, SCENE).unwrap();
    let scene = dir.join("scene");
    ok(&aad(&["synth", "--spec", p(&spec), "--out", p(&scene)]));
    scene
}

#[test]
fn synth_run_eval_render() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    assert_eq!(fs::read_dir(scene.join("frames")).unwrap().count(), 40);
    let truth = fs::read_to_string(scene.join("truth.txt")).unwrap();
    assert_eq!(truth.lines().filter(|l| *l == "1").count(), 5);

    let stdout = ok(&aad(&["run", "--config", p(&scene.join("config.toml"))]));
    assert!(stdout.contains("40 frames"), "{stdout}");
    let out = scene.join("out");
    let csv = fs::read_to_string(out.join("anomalies.csv")).unwrap();
    assert!(csv.starts_with("frame,score,flag,max_zscore\n"));
    // frames 0 and 1 have no pair
    assert_eq!(csv.lines().count(), 1 + 38);
    assert!(out.join("stats.aads").is_file());

    let roc = ok(&aad(&["eval", "--run", p(&out), "--truth", p(&scene.join("truth.txt")), "--k", "1,2,3,4,5,6"]));
    let rows: Vec<&str> = roc.lines().collect();
    assert_eq!(rows[0], "k,tp,fp,tn,fn,tpr,fpr");
    assert_eq!(rows.len(), 1 + 6 + 1);
    assert!(rows[7].starts_with("# auc="));
    assert_eq!(fs::read_to_string(out.join("roc.csv")).unwrap(), roc);

    let img = dir.path().join("img");
    ok(&aad(&["render", "--stats", p(&out.join("stats.aads")), "--out", p(&img)]));
    let ppm = fs::read(img.join("motion.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n64 48\n255\n"));
}

#[test]
fn singleton_eval_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let cfg = scene.join("config.toml");
    let truth = scene.join("truth.txt");
    for (adapt, extra) in [("false", None), ("true", Some("--live"))] {
        let out = dir.path().join(format!("run_{adapt}"));
        let stdout = ok(&aad(&["run", "--config", p(&cfg), "--adapt", adapt, "--k", "2", "--out", p(&out)]));
        let counts = stdout.lines().find(|l| l.starts_with("tpr")).unwrap();
        let mut args = vec!["eval", "--run", p(&out), "--truth", p(&truth), "--k", "2"];
        args.extend(extra);
        let roc = ok(&aad(&args));
        let row: Vec<&str> = roc.lines().nth(1).unwrap().split(',').collect();
        let expect = format!("(tp {} fp {} tn {} fn {})", row[1], row[2], row[3], row[4]);
        assert!(counts.ends_with(&expect), "{counts} vs {expect}");
        assert_eq!(roc.lines().count(), 2, "no auc for one point");
    }
}

#[test]
fn runs_are_deterministic_and_cache_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let cfg = scene.join("config.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&aad(&["run", "--config", p(&cfg), "--out", p(&a)]));
    ok(&aad(&["run", "--config", p(&cfg), "--out", p(&a)])); // from cache
    ok(&aad(&["run", "--config", p(&cfg), "--out", p(&b), "--no-cache"]));
    assert!(!b.join("cache").exists());
    for f in ["anomalies.csv", "stats.aads"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flow_cache_reuse_and_repair() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    // keep five frames
    let frames = dir.path().join("five");
    fs::create_dir(&frames).unwrap();
    for i in 0..5 {
        let name = format!("frame_{i:04}.pgm");
        fs::copy(scene.join("frames").join(&name), frames.join(&name)).unwrap();
    }
    let cache = dir.path().join("cache");
    let first = ok(&aad(&["flow", "--frames", p(&frames), "--out", p(&cache), "--stride", "2"]));
    assert!(first.starts_with("3 pairs: 3 computed"), "{first}");
    for name in ["flow_0_2.aadf", "flow_1_3.aadf", "flow_2_4.aadf"] {
        assert!(cache.join(name).is_file(), "{name}");
    }
    let again = ok(&aad(&["flow", "--frames", p(&frames), "--out", p(&cache)]));
    assert!(again.starts_with("3 pairs: 0 computed, 3 cached"), "{again}");

    fs::write(cache.join("flow_1_3.aadf"), b"AADF").unwrap();
    let out = aad(&["flow", "--frames", p(&frames), "--out", p(&cache)]);
    let stdout = ok(&out);
    assert!(stdout.contains("1 computed, 2 cached, 1 rejected"), "{stdout}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("recomputing"));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let out = scene.join("out");
    ok(&aad(&["run", "--config", p(&scene.join("config.toml"))]));

    let missing = aad(&["eval", "--run", p(&out), "--truth", p(&dir.path().join("nope.txt"))]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.txt"));

    let cfg = dir.path().join("objects.toml");
    fs::write(&cfg, "[input]\nframes = \"scene/frames\"\n[detector]\nuse_objects = true\n").unwrap();
    let r = aad(&["run", "--config", p(&cfg)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("use_objects"));

    assert_eq!(aad(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(aad(&["eval", "--run", p(&out), "--truth", p(&scene.join("truth.txt")), "--k", "0"]).status.code(), Some(1));
}

#[test]
fn render_blank_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("zero.aads");
    let mut bytes = Vec::new();
    StatsGrid::new(3, 2).write_snapshot(&mut bytes).unwrap();
    fs::write(&stats, &bytes).unwrap();
    ok(&aad(&["render", "--stats", p(&stats), "--out", p(&dir.path().join("img")), "--scale", "1"]));
    let ppm = fs::read(dir.path().join("img/motion.ppm")).unwrap();
    let header = b"P6\n3 2\n255\n";
    assert!(ppm.starts_with(header));
    assert!(ppm[header.len()..].iter().all(|&v| v == 0));

    let empty = dir.path().join("empty.aads");
    let mut bytes = Vec::new();
    StatsGrid::new(0, 0).write_snapshot(&mut bytes).unwrap();
    fs::write(&empty, &bytes).unwrap();
    let r = aad(&["render", "--stats", p(&empty), "--out", p(&dir.path().join("img2"))]);
    assert_eq!(r.status.code(), Some(1));
}
