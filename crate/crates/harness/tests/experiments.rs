use std::path::{Path, PathBuf};
use std::process::Command;

use cgpt_harness::config::{ExperimentConfig, ExperimentId};
use cgpt_harness::experiments::run_experiment;

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .collect()
}

fn check_provenance(text: &str, cfg: &ExperimentConfig) {
    assert!(!text.starts_with('#'), "missing header row");
    assert!(!text.contains('\r'));
    let footer: Vec<&str> = text.lines().filter(|l| l.starts_with('#')).collect();
    assert!(footer[0].starts_with("# seed="), "{}", footer[0]);
    assert!(footer[0].contains(&format!("config_sha256={}", cfg.digest())));
    assert_eq!(footer[1], format!("# config={}", cfg.to_json()));
}

fn short_tracking(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(ExperimentId::TrackFullview);
    cfg.output_dir = dir.to_path_buf();
    cfg.seeds = vec![3];
    cfg.scales = vec![10.0];
    cfg.noise_levels = vec![0.1];
    cfg
}

#[test]
fn fullview_tracking_emits_a_thousand_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_tracking(dir.path());
    let report = run_experiment(&cfg).unwrap();
    assert!(report.failures.is_empty());
    let track = report
        .artifacts
        .iter()
        .find(|p| p.to_string_lossy().contains("track_scale-10"))
        .unwrap();
    let text = read(track);
    assert_eq!(
        text.lines().next().unwrap(),
        "t,x_est,y_est,theta_est,x_true,y_true,theta_true,var_vx,var_vy,var_x,var_y,var_theta,clamped"
    );
    assert_eq!(data_lines(&text).len(), 1000);
    check_provenance(&text, &cfg);
    let summary = read(&dir.path().join("track_summary.csv"));
    assert_eq!(data_lines(&summary).len(), 1);
    check_provenance(&summary, &cfg);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short_tracking(dir.path());
    cfg.motion.steps = 60;
    cfg.noise_levels = vec![0.1, 0.2];
    let first: Vec<(PathBuf, Vec<u8>)> = run_experiment(&cfg)
        .unwrap()
        .artifacts
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    let second = run_experiment(&cfg).unwrap().artifacts;
    assert_eq!(first.len(), second.len());
    for ((p, bytes), q) in first.iter().zip(&second) {
        assert_eq!(p, q);
        assert_eq!(bytes, &std::fs::read(q).unwrap(), "{}", p.display());
    }
}

#[test]
fn spectrum_full_view_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::defaults(ExperimentId::Spectrum);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.apertures = vec![std::f64::consts::TAU, std::f64::consts::PI];
    run_experiment(&cfg).unwrap();
    let eig = read(&dir.path().join("eigenvalues.csv"));
    check_provenance(&eig, &cfg);
    let mut compared = 0;
    for line in data_lines(&eig) {
        let f: Vec<&str> = line.split(',').collect();
        if f[4].is_empty() {
            continue;
        }
        let (num, exact): (f64, f64) = (f[3].parse().unwrap(), f[4].parse().unwrap());
        assert!((num - exact).abs() <= 1e-8 * exact, "{line}");
        compared += 1;
    }
    assert_eq!(compared, 100);
    let cond = read(&dir.path().join("condition.csv"));
    let rows = data_lines(&cond);
    assert_eq!(rows.len(), 100);
    for line in &rows[..50] {
        let f: Vec<&str> = line.split(',').collect();
        let (num, exact): (f64, f64) = (f[2].parse().unwrap(), f[5].parse().unwrap());
        assert!((num - exact).abs() <= 1e-8 * exact.max(1.0), "{line}");
    }
}

#[test]
fn recon_sweep_records_every_task() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::defaults(ExperimentId::ReconVsAperture);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.seeds = vec![0, 1];
    let report = run_experiment(&cfg).unwrap();
    let per_seed = read(&dir.path().join("recon_per_seed.csv"));
    let rows = data_lines(&per_seed);
    assert_eq!(rows.len(), 8 * 3 * 2);
    let ok = rows.iter().filter(|l| l.ends_with(",ok")).count();
    assert_eq!(ok + report.failures.len(), rows.len());
    let summary = read(&dir.path().join("recon_summary.csv"));
    assert_eq!(data_lines(&summary).len(), 8 * 3);
    check_provenance(&summary, &cfg);
    // noise-free full view is recovered almost exactly
    let full: Vec<&str> = data_lines(&per_seed)
        .into_iter()
        .filter(|l| l.starts_with("6.283185307179586e0,0.000000000000000e0"))
        .collect();
    assert_eq!(full.len(), 2);
    for l in full {
        let ls: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!(ls < 1e-8, "{l}");
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cgpt-track"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let status = cli()
        .args(["--quiet", "--config"])
        .arg(dir.path().join("missing.json"))
        .args(["experiment", "spectrum"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"experiment":"track-fullview","geometry":{"n":10},"orders":{"k_track":6,"k_data":6}}"#,
    )
    .unwrap();
    let status = cli()
        .arg("--config")
        .arg(&bad)
        .arg("track")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, r#"{"experiment":"spectrum"}"#).unwrap();
    let status = cli()
        .arg("--config")
        .arg(&wrong)
        .arg("track")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // a motion model that always leaves the ring
    let wild = dir.path().join("wild.json");
    std::fs::write(
        &wild,
        r#"{"experiment":"track-fullview","motion":{"sigma_a":1e4,"steps":50}}"#,
    )
    .unwrap();
    let status = cli()
        .arg("--config")
        .arg(&wild)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "1", "simulate"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let short = dir.path().join("short.json");
    std::fs::write(&short, r#"{"experiment":"track-fullview","motion":{"steps":20},"scales":[10],"noise_levels":[0.1]}"#).unwrap();
    let output = cli()
        .arg("--config")
        .arg(&short)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "2", "simulate"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let traj = read(&out.join("trajectory_seed-2.csv"));
    assert_eq!(traj.lines().next().unwrap(), "t,vx,vy,x,y,theta");
    assert_eq!(data_lines(&traj).len(), 21);
    assert!(traj.contains("# seed=2 "));
    let msr = read(&out.join("msr_scale-10_noise-0.1_seed-2.csv"));
    assert_eq!(data_lines(&msr).len(), 20 * 20 * 20);
}

#[test]
fn cli_reads_user_targets() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("target.json");
    std::fs::write(
        &target,
        r#"{"K": 2, "entries": [[6.0, 0.0, 1.0, 0.0], [0.0, 4.0, 0.0, 3.0], [1.0, 0.0, 2.0, 0.0], [0.0, 3.0, 0.0, 2.0]]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment":"track-fullview","motion":{"steps":30},"scales":[10],"noise_levels":[0.05],"orders":{"k_data":2}}"#).unwrap();
    let out = dir.path().join("out");
    let status = cli()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--quiet", "--seed", "0", "track", "--target"])
        .arg(&target)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let track = read(&out.join("track_scale-10_noise-0.05_seed-0.csv"));
    assert_eq!(data_lines(&track).len(), 30);

    std::fs::write(&target, r#"{"K": 2, "entries": [[1.0]]}"#).unwrap();
    let status = cli()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--quiet", "track", "--target"])
        .arg(&target)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
