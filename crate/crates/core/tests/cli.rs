use std::path::Path;
use std::process::{Command, Output};

use mfa_core::config::RunConfig;
use mfa_core::formats::{self, GridMeta};

fn mfa(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mfa"));
    cmd.args(args).env_remove("MFA_FAULT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn lines(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn simulate_writes_expected_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = mfa(&["simulate", "--config", &config("case1.json"), "--seed", "7", "--out", out.to_str().unwrap()], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    // Header plus duration × rate samples (±1 for the t = 0 sample).
    assert_eq!(lines(&a.join("gyro.csv")) - 1, 501);
    assert_eq!(lines(&a.join("truth.csv")) - 1, 501);
    assert_eq!(lines(&a.join("attitude.csv")) - 1, 100);
    for f in ["truth.csv", "gyro.csv", "attitude.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // The manifests differ only in the recorded output directory.
    let strip = |dir: &Path| {
        let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
        text.replace(dir.to_str().unwrap(), "")
    };
    assert_eq!(strip(&a), strip(&b));
    let m: formats::Manifest = formats::read_json(&a.join("manifest.json")).unwrap();
    assert_eq!(m.seed, 7);
    assert_eq!(m.config.seed, 7);
}

#[test]
fn different_seeds_give_different_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = dir.path().join(seed);
        assert!(mfa(&["simulate", "--preset", "case2", "--seed", seed, "--out", out.to_str().unwrap()], &[])
            .status
            .success());
        std::fs::read(out.join("gyro.csv")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn sigma_at_one_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config("case1.json")).unwrap()).unwrap();
    v["sigma"] = 1.0.into();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, v.to_string()).unwrap();
    let o = mfa(&["simulate", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(mfa(&["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(mfa(&["gridexport", "--resolution", "100"], &[]).status.code(), Some(2));
    assert_eq!(mfa(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn filter_without_measurements_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfa(
        &["filter", "--measurements", dir.path().join("missing").to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn filter_rejects_unknown_manifest_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(mfa(&["simulate", "--preset", "case2", "--out", out], &[]).status.success());
    let p = dir.path().join("manifest.json");
    let text = std::fs::read_to_string(&p).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
    std::fs::write(&p, text).unwrap();
    let o = mfa(&["filter", "--preset", "case2", "--out", out], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));
}

#[test]
fn simulate_then_filter_case2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(mfa(&["simulate", "--config", &config("case2.json"), "--out", out], &[]).status.success());
    let o = mfa(&["filter", "--config", &config("case2.json"), "--out", out], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h = formats::read_history(&dir.path().join("history.csv")).unwrap();
    assert_eq!(h.records.len(), 501);
    assert!(h.at(1.0).unwrap().error_deg.unwrap() <= 15.0);
    let s: formats::Summary = formats::read_json(&dir.path().join("summary.json")).unwrap();
    assert_eq!(s.updates, 100);
    assert!(s.steady_state_error_deg.unwrap() <= 10.0);

    // Grids of the estimate at selected times.
    let grids = dir.path().join("grids");
    let o = mfa(
        &[
            "gridexport",
            "--preset",
            "case2",
            "--history",
            dir.path().join("history.csv").to_str().unwrap(),
            "--times",
            "0.1,1",
            "--resolution",
            "20x40",
            "--out",
            grids.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: GridMeta = formats::read_json(&grids.join("grid_t1.000.json")).unwrap();
    assert_eq!(meta.t, Some(1.0));
    assert_eq!(lines(&grids.join("grid_t0.100_axis3.csv")), 1 + 20 * 40);
}

fn export(f: &str, res: &str, out: &Path) -> GridMeta {
    let o = mfa(&["gridexport", "--f", f, "--resolution", res, "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    formats::read_json(&out.join("grid.json")).unwrap()
}

#[test]
fn isotropic_grids_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let meta = export("5,0,0,0,5,0,0,0,5", "100x200", dir.path());
    let grids: Vec<_> = (0..3)
        .map(|a| formats::read_grid(&dir.path().join(&meta.files[a]), a, 100, 200).unwrap())
        .collect();
    // Axis k peaks at e_k, so compare each against its own peak value instead of cellwise.
    for g in &grids {
        assert!((g.max() - grids[0].max()).abs() < 0.02 * grids[0].max());
        assert!((g.weighted_sum() - 1.0).abs() < 1e-3);
    }
    assert!(meta.sigma_points_file.is_some());
}

#[test]
fn anisotropic_grid_peaks_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let meta = export("25,0,0,0,5,0,0,0,1", "100x200", dir.path());
    assert!(meta.peaks[0] > meta.peaks[1] && meta.peaks[1] > meta.peaks[2], "{:?}", meta.peaks);
    for s in meta.weighted_sums {
        assert!((s - 1.0).abs() < 1e-3, "{s}");
    }
    let text = std::fs::read_to_string(dir.path().join("grid_axis1.csv")).unwrap();
    assert!(text.starts_with("lat,lon,density\n"));
}

#[test]
fn gridexport_rejects_reflections() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfa(&["gridexport", "--f", "1,0,0,0,1,0,0,0,-1", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sample_writes_rotations() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfa(&["sample", "--f", "40,0,0,0,50,0,0,0,35", "--n", "500", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(o.status.success());
    let r = formats::read_samples(&dir.path().join("samples.csv")).unwrap();
    assert_eq!(r.len(), 500);
}

#[test]
fn selftest_passes_and_detects_injected_fault() {
    let o = mfa(&["selftest"], &[]);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(o.status.code(), Some(0), "{text}");
    let suites = text.lines().filter(|l| l.contains("PASS") || l.contains("FAIL")).count();
    assert!(suites >= 6, "{text}");

    let o = mfa(&["selftest"], &[("MFA_FAULT", "logc")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));

    assert_eq!(mfa(&["selftest"], &[("MFA_FAULT", "bogus")]).status.code(), Some(2));
}

#[test]
fn shipped_configs_match_presets() {
    for (file, preset) in [("case1.json", RunConfig::case1()), ("case2.json", RunConfig::case2())] {
        let cfg = RunConfig::load(Path::new(&config(file))).unwrap();
        assert!((cfg.initial_f() - preset.initial_f()).amax() < 1e-12, "{file}");
        assert!((cfg.gyro_model().unwrap().covariance - preset.gyro_model().unwrap().covariance).amax() < 1e-12);
        assert_eq!(cfg.attitude, preset.attitude);
        assert_eq!(cfg.pendulum, preset.pendulum);
        assert_eq!((cfg.sigma, cfg.duration, cfg.process_noise), (preset.sigma, preset.duration, preset.process_noise));
    }
}
