use std::path::Path;

use cgpt_harness::config::{load_config, ExperimentConfig, ExperimentId};
use cgpt_harness::error::ConfigError;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn minimal_spectrum_file_gets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write(dir.path(), "c.json", r#"{"experiment":"spectrum"}"#)).unwrap();
    assert_eq!(cfg.geometry.n, 101);
    assert_eq!(cfg.orders.k, 50);
    assert!((cfg.geometry.radius / cfg.geometry.delta - 1.2).abs() < 1e-15);
}

#[test]
fn tracking_defaults_follow_the_ten_second_protocol() {
    let cfg = ExperimentConfig::defaults(ExperimentId::TrackFullview);
    assert_eq!(cfg.motion.dtau, 0.01);
    assert_eq!(cfg.motion.steps, 1000);
    assert_eq!((cfg.motion.sigma_a, cfg.motion.sigma_theta), (2.0, 0.5));
    assert_eq!(cfg.orders.k_data, 5);
    assert_eq!(cfg.orders.k_track, 2);
    let x0 = cfg.initial_state;
    assert_eq!(&x0[..4], &[-1.0, 1.0, 5.0, -5.0]);
    assert!((x0[4] - 1.5 * std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn missing_file_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_config(&dir.path().join("absent.json")).unwrap_err();
    assert!(matches!(err, ConfigError::NotFound(_)));
}

#[test]
fn too_few_elements_for_tracking_order() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.json",
        r#"{"experiment":"track-fullview","geometry":{"n":10},"orders":{"k_track":6,"k_data":6}}"#,
    );
    match load_config(&p).unwrap_err() {
        ConfigError::Invalid { field, message } => {
            assert_eq!(field, "orders.k_track");
            assert!(message.contains("N >= 2K"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_json_reports_a_schema_error() {
    let err = ExperimentConfig::from_json_str("{not json").unwrap_err();
    assert!(matches!(err, ConfigError::Schema { .. }));
    let err =
        ExperimentConfig::from_json_str(r#"{"experiment":"spectrum","seeds":[-1]}"#).unwrap_err();
    match err {
        ConfigError::Schema { path, .. } => assert_eq!(path, "seeds[0]"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_values_are_rejected() {
    for (text, field) in [
        (
            r#"{"experiment":"track-fullview","material":{"kappa":1.0}}"#,
            "material.kappa",
        ),
        (
            r#"{"experiment":"track-fullview","noise_levels":[-0.1]}"#,
            "noise_levels[0]",
        ),
        (r#"{"experiment":"track-fullview","seeds":[]}"#, "seeds"),
        (
            r#"{"experiment":"track-fullview","orders":{"k_data":1}}"#,
            "orders.k_data",
        ),
        (
            r#"{"experiment":"track-fullview","initial_state":[0,0,28,0,0]}"#,
            "initial_state",
        ),
        (
            r#"{"experiment":"spectrum","apertures":[7.0]}"#,
            "apertures[0]",
        ),
    ] {
        match ExperimentConfig::from_json_str(text).unwrap_err() {
            ConfigError::Invalid { field: f, .. } => assert_eq!(f, field, "{text}"),
            other => panic!("{text}: unexpected {other:?}"),
        }
    }
}

#[test]
fn configs_round_trip_losslessly() {
    for id in ExperimentId::ALL {
        let cfg = ExperimentConfig::defaults(id);
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.digest(), cfg.digest());
    }
}
