use std::f64::consts::PI;

use cgpt_core::algebra::transform_cgpt;
use cgpt_core::dynamics::{
    disk_cgpt, generate_msr_stream, simulate_trajectory, simulate_trajectory_with,
};
use cgpt_core::reconstruct::noiseless_inversion;
use cgpt_core::rng::{stream, Stream};
use cgpt_core::{
    AcquisitionGeometry, CgptMatrix, Error, MaterialParams, MotionModel, NoiseSpec, TargetState,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn sample_std(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn velocity_and_orientation_increments() {
    let model = MotionModel::new(2.0, 0.5, 0.01).unwrap();
    let traj = simulate_trajectory(&model, &TargetState::default(), 100_000, 11);
    let dv = sample_std(traj.windows(2).map(|w| w[1].vx - w[0].vx));
    let dvy = sample_std(traj.windows(2).map(|w| w[1].vy - w[0].vy));
    let dt = sample_std(traj.windows(2).map(|w| w[1].theta - w[0].theta));
    let expected_v = 2.0 * 0.01f64.sqrt();
    let expected_t = 0.5 * 0.01f64.sqrt();
    assert!((dv / expected_v - 1.0).abs() < 0.05, "{dv}");
    assert!((dvy / expected_v - 1.0).abs() < 0.05, "{dvy}");
    assert!((dt / expected_t - 1.0).abs() < 0.05, "{dt}");
}

fn asymmetric_target(k: usize) -> CgptMatrix {
    let mut rng = stream(1, Stream::Target);
    let a = DMatrix::from_fn(2 * k, 2 * k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = CgptMatrix::from_entries((&a + a.transpose()) * 0.1).unwrap();
    &disk_cgpt(1.0, &MaterialParams::new(3.0).unwrap(), k).unwrap() + &noise
}

#[test]
fn noiseless_stream_inverts_to_moved_target() {
    let (k, delta) = (3, 2.0);
    let geom = AcquisitionGeometry::full_view(21, 40.0, delta).unwrap();
    let m = asymmetric_target(k);
    let model = MotionModel::new(2.0, 0.5, 0.01).unwrap();
    let states = simulate_trajectory(&model, &TargetState::new(1.0, -1.0, 3.0, 2.0, 0.4), 50, 4);
    let frames =
        generate_msr_stream(&m, &states, &geom, k, &NoiseSpec::new(0.0, 4).unwrap()).unwrap();
    for (s, f) in states.iter().zip(&frames) {
        assert_eq!(f.noise_std, 0.0);
        let truth = transform_cgpt(&m, &s.motion(delta)).unwrap();
        let rec = noiseless_inversion(&f.data, &geom, k).unwrap();
        let err = (rec.entries() - truth.entries()).amax() / truth.entries().amax();
        assert!(err < 1e-8, "{err:e}");
    }
}

#[test]
fn stream_refuses_frames_outside_the_ring() {
    let geom = AcquisitionGeometry::full_view(12, 10.0, 1.0).unwrap();
    let m = asymmetric_target(2);
    let states = vec![
        TargetState::new(0.0, 0.0, 1.0, 0.0, 0.0),
        TargetState::new(0.0, 0.0, 8.0, 0.0, 0.0),
        TargetState::new(0.0, 0.0, 9.5, 0.0, 0.0),
    ];
    let err =
        generate_msr_stream(&m, &states, &geom, 2, &NoiseSpec::new(0.1, 0).unwrap()).unwrap_err();
    assert!(matches!(err, Error::ContainmentViolation { frame: 2, .. }));
}

#[test]
fn noise_level_matches_convention() {
    let geom = AcquisitionGeometry::full_view(30, 20.0, 1.0).unwrap();
    let m = asymmetric_target(3);
    let states = vec![TargetState::new(0.0, 0.0, 1.0, 1.0, 0.3); 200];
    let frames =
        generate_msr_stream(&m, &states, &geom, 3, &NoiseSpec::new(0.1, 9).unwrap()).unwrap();
    let expected = 0.1 * frames[0].clean.frobenius_norm() / 30.0;
    let resid = sample_std(frames.iter().flat_map(|f| {
        (f.data.values() - f.clean.values())
            .iter()
            .copied()
            .collect::<Vec<_>>()
    }));
    assert!((frames[0].noise_std - expected).abs() < 1e-15 * expected);
    assert!((resid / expected - 1.0).abs() < 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noiseless_motion_is_ballistic(
        vx in -3.0f64..3.0, vy in -3.0f64..3.0,
        x in -5.0f64..5.0, y in -5.0f64..5.0, theta in -PI..PI,
        seed in 0u64..1000,
    ) {
        let model = MotionModel::new(0.0, 0.0, 0.01).unwrap();
        let x0 = TargetState::new(vx, vy, x, y, theta);
        let mut rng = stream(seed, Stream::Trajectory);
        let traj = simulate_trajectory_with(&model, &x0, 100, &mut rng);
        for (t, s) in traj.iter().enumerate() {
            let tau = t as f64 * 0.01;
            prop_assert!((s.x - (x + vx * tau)).abs() < 1e-12);
            prop_assert!((s.y - (y + vy * tau)).abs() < 1e-12);
            prop_assert_eq!(s.theta, theta);
            prop_assert_eq!((s.vx, s.vy), (vx, vy));
        }
    }
}
