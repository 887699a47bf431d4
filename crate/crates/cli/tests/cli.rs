mod common;

use std::fs;

use common::*;
use exposlam_cli::dataset::Manifest;

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_the_dataset_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &out, SMALL);
    run_ok(&["-c", s(&cfg), "simulate"]);
    for seq in ["a", "b"] {
        let root = out.join("dataset").join(seq);
        assert_eq!(fs::read_dir(root.join("rgb")).unwrap().count(), 12);
        assert_eq!(fs::read_dir(root.join("depth")).unwrap().count(), 12);
        assert!(root.join("rgb/000011.png").is_file());
        assert!(root.join("depth/000000.pfm").is_file());
        let gt = fs::read_to_string(root.join("groundtruth.txt")).unwrap();
        assert_eq!(gt.lines().filter(|l| !l.starts_with('#')).count(), 12);
        assert!(root.join("meta.json").is_file());
    }
    let manifest = Manifest::read(&out.join("dataset/manifest.json")).unwrap();
    assert_eq!(manifest.stage, "simulate");
    assert_eq!(manifest.files.len(), 2 * (12 + 12 + 2));
    assert!(manifest.config.contains("frames = 12"));
}

#[test]
fn same_seed_gives_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &out, SMALL);
    run_ok(&["-c", s(&cfg), "simulate"]);
    let first = fs::read(out.join("dataset/manifest.json")).unwrap();
    run_ok(&["-c", s(&cfg), "simulate"]);
    assert_eq!(first, fs::read(out.join("dataset/manifest.json")).unwrap());

    run_ok(&["-c", s(&cfg), "--seed", "8", "simulate"]);
    let other = Manifest::read(&out.join("dataset/manifest.json")).unwrap();
    let first: Manifest = serde_json::from_slice(&first).unwrap();
    assert_ne!(first.files["a/rgb/000005.png"], other.files["a/rgb/000005.png"]);
    assert_eq!(first.files["a/depth/000005.pfm"], other.files["a/depth/000005.pfm"]);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &out, "[simulation]\nframes = 0\n");
    let res = exposlam(&["-c", s(&cfg), "simulate"]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(stderr(&res).contains("frames"));

    let cfg = config(dir.path(), &out, "bogus = 1\n");
    assert_eq!(code(&exposlam(&["-c", s(&cfg), "simulate"])), 2);
    let cfg = config(dir.path(), &out, "methods = [\"external\"]\n");
    assert_eq!(code(&exposlam(&["-c", s(&cfg), "simulate"])), 2);
}

#[test]
fn missing_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &out, SMALL);
    let res = exposlam(&["-c", s(&cfg), "enhance", "--method", "none"]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    let res = exposlam(&["-c", s(&cfg), "eval", "--gt", "/nonexistent/gt.txt", "--est", "/nonexistent/est.txt"]);
    assert_eq!(code(&res), 3);
}

#[test]
fn enhance_none_is_bitwise_and_gamma_moves_mean_to_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // Period 4: frame 1 gets gamma 1.8 (dark), frame 3 gets 0.2 (washed out).
    let body = format!("{SMALL}\n[degrade]\ngamma_amplitude = 0.8\ngamma_period = 4.0\ngamma_bias_sigma = 0.0\n");
    let cfg = config(dir.path(), &out, &body);
    run_ok(&["-c", s(&cfg), "simulate"]);
    run_ok(&["-c", s(&cfg), "enhance", "-m", "none", "-m", "global_gamma"]);
    let raw = out.join("dataset/a/rgb");
    assert_eq!(tree(&raw), tree(&out.join("enhanced/none/a/rgb")));

    let mean = |p: std::path::PathBuf| {
        let img = image::open(p).unwrap().to_luma8();
        img.pixels().map(|p| p.0[0] as f64 / 255.0).sum::<f64>() / img.len() as f64
    };
    for i in [1, 3, 5, 7] {
        let name = format!("{i:06}.png");
        let before = mean(raw.join(&name));
        let after = mean(out.join("enhanced/global_gamma/a/rgb").join(&name));
        assert!((after - 0.5).abs() < (before - 0.5).abs(), "frame {i}: {before} -> {after}");
    }
    let manifest = Manifest::read(&out.join("enhanced/global_gamma/manifest.json")).unwrap();
    assert_eq!(manifest.stage, "enhance:global_gamma");
    assert_eq!(manifest.parameters.unwrap()["method"], "global_gamma");
}

#[test]
fn stages_match_run_all() {
    let dir = tempfile::tempdir().unwrap();
    let (staged, whole) = (dir.path().join("staged"), dir.path().join("whole"));
    let cfg_a = config(dir.path(), &staged, SMALL);
    for cmd in [&["simulate"][..], &["enhance"], &["track"], &["eval"]] {
        let mut args = vec!["-c", s(&cfg_a)];
        args.extend_from_slice(cmd);
        run_ok(&args);
    }
    let cfg_b = config(dir.path(), &whole, SMALL);
    let res = run_ok(&["-c", s(&cfg_b), "run-all"]);
    assert!(String::from_utf8_lossy(&res.stdout).contains("global_gamma"));
    for sub in ["tracks", "reports"] {
        assert_eq!(tree(&staged.join(sub)), tree(&whole.join(sub)), "{sub} differ");
    }
    for f in ["reports/none.json", "reports/table.txt", "reports/summary.csv", "reports/ape/none/a.csv", "reports/overlay/global_gamma/b.csv"] {
        assert!(whole.join(f).is_file(), "{f}");
    }
    let track = fs::read_to_string(whole.join("tracks/none/a.txt")).unwrap();
    assert_eq!(track.lines().filter(|l| !l.starts_with('#')).count(), 12);
}

fn tum(rows: &[(f64, [f64; 3])]) -> String {
    rows.iter()
        .map(|(t, p)| format!("{t} {} {} {} 0 0 0 1\n", p[0], p[1], p[2]))
        .collect()
}

#[test]
fn eval_pair_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let gt = dir.path().join("gt.txt");
    let est = dir.path().join("est.txt");
    let rows: Vec<(f64, [f64; 3])> = (0..10).map(|i| (i as f64 * 0.1, [0.0, 0.0, i as f64 * 0.05])).collect();
    fs::write(&gt, tum(&rows)).unwrap();
    fs::write(&est, tum(&rows)).unwrap();
    let o = s(&out);
    run_ok(&["-o", o, "eval", "--gt", s(&gt), "--est", s(&est), "--label", "same"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("reports/same.json")).unwrap()).unwrap();
    assert_eq!(report["pooled"]["rmse"], 0.0);
    assert_eq!(report["cross"]["mean"], 0.0);

    let shifted: Vec<_> = rows.iter().map(|(t, p)| (*t, [p[0] + 3.0, p[1] + 4.0, p[2]])).collect();
    fs::write(&est, tum(&shifted)).unwrap();
    run_ok(&["-o", o, "eval", "--gt", s(&gt), "--est", s(&est), "--label", "off", "--alignment", "none"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("reports/off.json")).unwrap()).unwrap();
    assert_eq!(report["pooled"]["rmse"], 5.0);
    assert_eq!(report["pooled"]["ape_mean"], 5.0);
    // Anchoring removes a constant offset entirely.
    run_ok(&["-o", o, "eval", "--gt", s(&gt), "--est", s(&est), "--label", "anchored"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("reports/anchored.json")).unwrap()).unwrap();
    assert!(report["pooled"]["rmse"].as_f64().unwrap() < 1e-12);
}

fn external_config(dir: &std::path::Path, out: &std::path::Path, command: &str) -> std::path::PathBuf {
    config(dir, out, &format!("{SMALL}\n[enhance]\nexternal_command = {command:?}\n"))
}

#[test]
fn external_identity_copier_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let copier = write_script(dir.path(), "copy.sh", r#"cp "$1"/*.png "$2"/"#);
    let cfg = external_config(dir.path(), &out, &copier);
    run_ok(&["-c", s(&cfg), "simulate"]);
    run_ok(&["-c", s(&cfg), "enhance", "-m", "external"]);
    for seq in ["a", "b"] {
        assert_eq!(tree(&out.join("dataset").join(seq).join("rgb")), tree(&out.join("enhanced/external").join(seq).join("rgb")));
    }
}

#[test]
fn external_failures_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = external_config(dir.path(), &out, "false");
    run_ok(&["-c", s(&cfg), "simulate"]);
    let res = exposlam(&["-c", s(&cfg), "enhance", "-m", "external"]);
    assert_eq!(code(&res), 5, "{}", stderr(&res));
    assert!(stderr(&res).contains("exited with code 1"));

    let dropper = write_script(dir.path(), "drop.sh", r#"cp "$1"/*.png "$2"/; rm "$2"/000003.png"#);
    let cfg = external_config(dir.path(), &out, &dropper);
    let res = exposlam(&["-c", s(&cfg), "enhance", "-m", "external"]);
    assert_eq!(code(&res), 5);
    assert!(stderr(&res).contains("missing frames 000003"), "{}", stderr(&res));
}

#[test]
fn tracking_lost_exits_4_with_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &out, &format!("{SMALL}\n[odometry]\nmin_points = 1000000\n"));
    let res = exposlam(&["-c", s(&cfg), "run-all"]);
    assert_eq!(code(&res), 4, "{}", stderr(&res));
    assert!(stderr(&res).contains("none/a"));
    let track = fs::read_to_string(out.join("tracks/none/a.txt")).unwrap();
    assert_eq!(track.lines().filter(|l| !l.starts_with('#')).count(), 1);
    let diag: serde_json::Value = serde_json::from_slice(&fs::read(out.join("tracks/none/a.diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["status"], "lost");
    assert_eq!(diag["lost_frame"], 1);
    assert!(out.join("reports/table.txt").is_file());
}
