//! Seeded experiment drivers.
//!
//! Each driver fans out over independent `(seed, aperture, noise, …)` tasks
//! with rayon, collects the results in input order and writes every CSV
//! artifact from a single thread, so reruns are byte-identical.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use cgpt_core::acquisition::fullview_singular_values;
use cgpt_core::dynamics::{
    check_containment, generate_msr_stream, simulate_trajectory_with, MsrFrame,
};
use cgpt_core::reconstruct::{select_mu_with, RegularizationGrid, SCORED_ORDERS};
use cgpt_core::rng::{stream, Stream};
use cgpt_core::tracker::{run_tracker_with_noise, TrackResult};
use cgpt_core::{
    AcquisitionGeometry, CgptMatrix, GaussianBelief, MotionModel, MsrMatrix, MsrOperator,
    NoiseSpec, ObservationModel, TargetState,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentId, LayoutConfig};
use crate::csv::{CsvTable, Field};
use crate::error::HarnessError;
use crate::targets::{ellipse_like, tracking_target, ELLIPSE_AXES};

/// Redraws allowed before a trajectory that leaves the ring is an error.
pub const MAX_TRAJECTORY_ATTEMPTS: usize = 1000;

/// Fraction of final frames over which tracking errors are averaged.
pub const TAIL_FRACTION: f64 = 0.25;

/// Files written by an experiment and the tasks that failed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub artifacts: Vec<PathBuf>,
    pub failures: Vec<String>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::Spectrum => run_spectrum(cfg),
        ExperimentId::ReconVsAperture => run_recon(cfg, None),
        ExperimentId::TrackFullview | ExperimentId::TrackLimited => run_tracking(cfg, None),
    }
}

/// `θ` wrapped to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn gamma_label(gamma: f64) -> String {
    format!("{:.4}pi", gamma / PI)
}

// ---------------------------------------------------------------- spectrum

/// Eigenvalues of `CᵀC` and `D CᵀC D` for one aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCurves {
    pub gamma: f64,
    pub gram: Vec<f64>,
    pub scaled: Vec<f64>,
    /// Closed-form `D CᵀC D` eigenvalues, full view with `N > 2K` only.
    pub closed_form: Option<Vec<f64>>,
}

/// Conditioning of `L` at one `(γ, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionPoint {
    pub gamma: f64,
    pub k: usize,
    pub log10_condition: f64,
    pub numerically_singular: bool,
    pub log10_bound: Option<f64>,
    pub closed_form: Option<f64>,
}

fn closed_form_applies(geom: &AcquisitionGeometry, k: usize) -> bool {
    geom.is_full_view() && geom.n() > 2 * k
}

pub fn eigen_curves(cfg: &ExperimentConfig, gamma: f64) -> Result<EigenCurves, HarnessError> {
    let g = &cfg.geometry;
    let geom = g.build_with(&LayoutConfig::Uniform { gamma }, g.delta)?;
    let k = cfg.orders.k;
    let op = MsrOperator::new(&geom, k)?;
    let (gram, scaled) = op.raw_eigenvalues();
    let closed_form = if closed_form_applies(&geom, k) {
        Some(fullview_singular_values(geom.n(), geom.rho(), k)?.eigenvalues)
    } else {
        None
    };
    Ok(EigenCurves {
        gamma,
        gram,
        scaled,
        closed_form,
    })
}

pub fn condition_curve(
    cfg: &ExperimentConfig,
    gamma: f64,
) -> Result<Vec<ConditionPoint>, HarnessError> {
    let g = &cfg.geometry;
    let geom = g.build_with(&LayoutConfig::Uniform { gamma }, g.delta)?;
    let k_max = cfg.orders.k.min(geom.n() / 2);
    (1..=k_max)
        .map(|k| {
            let rep = MsrOperator::new(&geom, k)?.spectrum();
            let closed_form = if closed_form_applies(&geom, k) {
                Some(fullview_singular_values(geom.n(), geom.rho(), k)?.log10_condition)
            } else {
                None
            };
            Ok(ConditionPoint {
                gamma,
                k,
                log10_condition: rep.log10_condition,
                numerically_singular: rep.numerically_singular,
                log10_bound: rep.log10_bound,
                closed_form,
            })
        })
        .collect()
}

fn run_spectrum(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    type Task = Result<(EigenCurves, Vec<ConditionPoint>), HarnessError>;
    let results: Vec<Task> = cfg
        .apertures
        .par_iter()
        .map(|&gamma| Ok((eigen_curves(cfg, gamma)?, condition_curve(cfg, gamma)?)))
        .collect();
    let mut eig = CsvTable::new(&[
        "gamma",
        "index",
        "eig_gram",
        "eig_scaled",
        "eig_scaled_closed_form",
    ]);
    let mut cond = CsvTable::new(&[
        "gamma",
        "k",
        "log10_cond",
        "numerically_singular",
        "log10_bound",
        "log10_cond_closed_form",
    ]);
    for r in results {
        let (curves, points) = r?;
        for (i, (a, b)) in curves.gram.iter().zip(&curves.scaled).enumerate() {
            let cf = curves.closed_form.as_ref().map(|v| v[i]);
            eig.row(vec![
                curves.gamma.into(),
                (i + 1).into(),
                (*a).into(),
                (*b).into(),
                cf.into(),
            ]);
        }
        for p in points {
            cond.row(vec![
                p.gamma.into(),
                p.k.into(),
                p.log10_condition.into(),
                p.numerically_singular.into(),
                p.log10_bound.into(),
                p.closed_form.into(),
            ]);
        }
    }
    let out = &cfg.output_dir;
    let seeds = &cfg.seeds[..1];
    let eig_path = out.join("eigenvalues.csv");
    let cond_path = out.join("condition.csv");
    eig.write(&eig_path, cfg, seeds)?;
    cond.write(&cond_path, cfg, seeds)?;
    Ok(RunReport {
        artifacts: vec![eig_path, cond_path],
        failures: Vec::new(),
    })
}

// ---------------------------------------------------------- reconstruction

/// First-two-order errors of one noisy reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconOutcome {
    pub gamma: f64,
    pub noise: f64,
    pub seed: u64,
    pub ls_error: f64,
    pub tikhonov_error: f64,
    pub best_mu: f64,
}

/// Adds white noise of standard deviation `p ‖V‖_F / N` from the seed's
/// measurement stream.
pub fn add_noise(clean: &MsrMatrix, noise: &NoiseSpec) -> Result<MsrMatrix, HarnessError> {
    let n = clean.n();
    let sd = noise.std_for(clean);
    let mut rng = stream(noise.seed, Stream::MeasurementNoise);
    let w = DMatrix::from_fn(n, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    Ok(MsrMatrix::new(clean.values() + w)?)
}

pub fn reconstruction_target(cfg: &ExperimentConfig) -> Result<CgptMatrix, HarnessError> {
    let (a, b) = ELLIPSE_AXES;
    Ok(ellipse_like(
        a,
        b,
        &cfg.material(),
        cfg.orders.k_data.max(cfg.orders.k),
    )?)
}

/// LS and best-grid Tikhonov reconstruction from one noisy MSR matrix.
pub fn recon_trial(
    cfg: &ExperimentConfig,
    truth: &CgptMatrix,
    gamma: f64,
    noise: f64,
    seed: u64,
) -> Result<ReconOutcome, HarnessError> {
    let g = &cfg.geometry;
    let geom = g.build_with(&LayoutConfig::Uniform { gamma }, g.delta)?;
    let data_order = cfg.orders.k_data.min(truth.order());
    let clean = MsrOperator::new(&geom, data_order)?.forward(&truth.truncate(data_order)?)?;
    let v = add_noise(&clean, &NoiseSpec::new(noise, seed)?)?;
    let op = MsrOperator::new(&geom, cfg.orders.k)?;
    let ls_error = op
        .pseudo_inverse(&v)?
        .relative_error(truth, SCORED_ORDERS)?;
    let grid = RegularizationGrid::logspace(cfg.mu_grid.lo, cfg.mu_grid.hi, cfg.mu_grid.count)?;
    let (best_mu, tikhonov_error) = select_mu_with(&op, &v, truth, &grid)?;
    Ok(ReconOutcome {
        gamma,
        noise,
        seed,
        ls_error,
        tikhonov_error,
        best_mu,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs the aperture sweep; `target` overrides the ellipse-like reference.
pub fn run_recon(
    cfg: &ExperimentConfig,
    target: Option<&CgptMatrix>,
) -> Result<RunReport, HarnessError> {
    let truth = match target {
        Some(t) => t.clone(),
        None => reconstruction_target(cfg)?,
    };
    let tasks: Vec<(f64, f64, u64)> = cfg
        .apertures
        .iter()
        .flat_map(|&g| {
            cfg.noise_levels
                .iter()
                .flat_map(move |&p| cfg.seeds.iter().map(move |&s| (g, p, s)))
        })
        .collect();
    let results: Vec<_> = tasks
        .par_iter()
        .map(|&(g, p, s)| recon_trial(cfg, &truth, g, p, s))
        .collect();

    let mut per_seed = CsvTable::new(&[
        "gamma",
        "noise",
        "seed",
        "ls_error",
        "tikhonov_error",
        "best_mu",
        "status",
    ]);
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (&(g, p, s), r) in tasks.iter().zip(results) {
        match r {
            Ok(o) => {
                per_seed.row(vec![
                    g.into(),
                    p.into(),
                    s.into(),
                    o.ls_error.into(),
                    o.tikhonov_error.into(),
                    o.best_mu.into(),
                    "ok".into(),
                ]);
                ok.push(o);
            }
            Err(e) => {
                let msg = format!("gamma={} noise={p} seed={s}: {e}", gamma_label(g));
                per_seed.row(vec![
                    g.into(),
                    p.into(),
                    s.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    format!("error: {e}").into(),
                ]);
                failures.push(msg);
            }
        }
    }

    let mut summary = CsvTable::new(&[
        "gamma",
        "noise",
        "runs",
        "ls_mean",
        "ls_std",
        "tikhonov_mean",
        "tikhonov_std",
    ]);
    for &g in &cfg.apertures {
        for &p in &cfg.noise_levels {
            let sel: Vec<&ReconOutcome> =
                ok.iter().filter(|o| o.gamma == g && o.noise == p).collect();
            let ls: Vec<f64> = sel.iter().map(|o| o.ls_error).collect();
            let tk: Vec<f64> = sel.iter().map(|o| o.tikhonov_error).collect();
            let (lm, lsd) = mean_std(&ls);
            let (tm, tsd) = mean_std(&tk);
            summary.row(vec![
                g.into(),
                p.into(),
                sel.len().into(),
                lm.into(),
                lsd.into(),
                tm.into(),
                tsd.into(),
            ]);
        }
    }
    let out = &cfg.output_dir;
    let a = out.join("recon_per_seed.csv");
    let b = out.join("recon_summary.csv");
    per_seed.write(&a, cfg, &cfg.seeds)?;
    summary.write(&b, cfg, &cfg.seeds)?;
    Ok(RunReport {
        artifacts: vec![a, b],
        failures,
    })
}

// ---------------------------------------------------------------- tracking

/// Everything one tracking run needs.
#[derive(Debug, Clone)]
pub struct TrackingSpec {
    pub geometry: AcquisitionGeometry,
    pub target: CgptMatrix,
    pub k_data: usize,
    pub k_track: usize,
    pub motion: MotionModel,
    pub steps: usize,
    pub initial_state: TargetState,
    pub initial_guess: TargetState,
    pub noise: f64,
}

impl TrackingSpec {
    pub fn from_config(
        cfg: &ExperimentConfig,
        layout: &LayoutConfig,
        delta: f64,
        noise: f64,
        target: Option<&CgptMatrix>,
    ) -> Result<Self, HarnessError> {
        let target = match target {
            Some(t) => t.clone(),
            None => tracking_target(&cfg.material(), cfg.orders.k_data)?,
        };
        Ok(Self {
            geometry: cfg.geometry.build_with(layout, delta)?,
            k_data: cfg.orders.k_data.min(target.order()),
            target,
            k_track: cfg.orders.k_track,
            motion: cfg.motion.model()?,
            steps: cfg.motion.steps,
            initial_state: cfg.initial_state(),
            initial_guess: cfg.initial_guess(),
            noise,
        })
    }
}

/// Ground truth (`steps + 1` states) and synthesised frames `1..=steps`.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: Vec<TargetState>,
    pub frames: Vec<MsrFrame>,
    /// Trajectories discarded because the target left the ring.
    pub redraws: usize,
}

/// Draws a trajectory that stays inside the ring. Rejected draws are
/// followed by fresh draws from the same stream.
pub fn contained_trajectory(
    spec: &TrackingSpec,
    seed: u64,
) -> Result<(Vec<TargetState>, usize), HarnessError> {
    let mut rng = stream(seed, Stream::Trajectory);
    let mut last = None;
    for attempt in 0..MAX_TRAJECTORY_ATTEMPTS {
        let traj =
            simulate_trajectory_with(&spec.motion, &spec.initial_state, spec.steps, &mut rng);
        match check_containment(&traj, &spec.geometry) {
            Ok(()) => return Ok((traj, attempt)),
            Err(e) => last = Some(e),
        }
    }
    Err(HarnessError::Runtime(format!(
        "no contained trajectory in {MAX_TRAJECTORY_ATTEMPTS} draws (last: {})",
        last.map_or_else(String::new, |e| e.to_string())
    )))
}

pub fn simulate(spec: &TrackingSpec, seed: u64) -> Result<Simulation, HarnessError> {
    let (truth, redraws) = contained_trajectory(spec, seed)?;
    let frames = generate_msr_stream(
        &spec.target,
        &truth[1..],
        &spec.geometry,
        spec.k_data,
        &NoiseSpec::new(spec.noise, seed)?,
    )?;
    Ok(Simulation {
        truth,
        frames,
        redraws,
    })
}

/// Outcome of one simulated tracking run.
#[derive(Debug, Clone)]
pub struct TrackingOutcome {
    pub seed: u64,
    pub simulation: Simulation,
    pub result: TrackResult,
    /// Position RMSE over the final quarter of frames.
    pub position_rmse: f64,
    /// Wrapped orientation RMSE over the final quarter of frames.
    pub orientation_rmse: f64,
    /// Distance between the initial guess and the true initial position.
    pub initial_error: f64,
}

impl TrackingOutcome {
    pub fn position_ratio(&self) -> f64 {
        self.position_rmse / self.initial_error
    }

    pub fn clamp_count(&self) -> usize {
        self.result.clamped.iter().filter(|c| **c).count()
    }

    /// Position RMSE below 10% of the initial error and orientation RMSE
    /// below 0.2 rad.
    pub fn converged(&self) -> bool {
        self.position_ratio() < 0.1 && self.orientation_rmse < 0.2
    }
}

pub fn tail_errors(estimates: &[TargetState], truth: &[TargetState]) -> (f64, f64) {
    let n = estimates.len().min(truth.len());
    let start = n - ((n as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, n.max(1));
    let (mut pe, mut oe) = (0.0, 0.0);
    for (e, t) in estimates[start..n].iter().zip(&truth[start..n]) {
        pe += (e.x - t.x).powi(2) + (e.y - t.y).powi(2);
        oe += wrap_angle(e.theta - t.theta).powi(2);
    }
    let c = (n - start) as f64;
    ((pe / c).sqrt(), (oe / c).sqrt())
}

pub fn tracking_run(spec: &TrackingSpec, seed: u64) -> Result<TrackingOutcome, HarnessError> {
    let simulation = simulate(spec, seed)?;
    let obs = ObservationModel::new(&spec.target, &spec.geometry, spec.k_track, 0.0)?;
    let data: Vec<MsrMatrix> = simulation.frames.iter().map(|f| f.data.clone()).collect();
    let sds: Vec<f64> = simulation.frames.iter().map(|f| f.noise_std).collect();
    let init = GaussianBelief::prior(&spec.initial_guess);
    let result = run_tracker_with_noise(&data, &sds, &obs, &spec.motion, &init)?;
    let (position_rmse, orientation_rmse) = tail_errors(&result.states(), &simulation.truth[1..]);
    let x0 = &simulation.truth[0];
    let initial_error = (spec.initial_guess.x - x0.x).hypot(spec.initial_guess.y - x0.y);
    Ok(TrackingOutcome {
        seed,
        simulation,
        result,
        position_rmse,
        orientation_rmse,
        initial_error,
    })
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "vx", "vy", "x", "y", "theta"];

pub fn trajectory_table(truth: &[TargetState], dtau: f64) -> CsvTable {
    let mut t = CsvTable::new(&TRAJECTORY_HEADER);
    for (i, s) in truth.iter().enumerate() {
        t.row(vec![
            (i as f64 * dtau).into(),
            s.vx.into(),
            s.vy.into(),
            s.x.into(),
            s.y.into(),
            s.theta.into(),
        ]);
    }
    t
}

/// Long-format MSR frames: one row per `(frame, source, receiver)`.
pub fn msr_table(frames: &[MsrFrame], dtau: f64) -> CsvTable {
    let mut t = CsvTable::new(&["t", "source", "receiver", "value", "clean", "noise_std"]);
    for (i, f) in frames.iter().enumerate() {
        let n = f.data.n();
        for s in 0..n {
            for r in 0..n {
                t.row(vec![
                    ((i + 1) as f64 * dtau).into(),
                    (s + 1).into(),
                    (r + 1).into(),
                    f.data.values()[(s, r)].into(),
                    f.clean.values()[(s, r)].into(),
                    f.noise_std.into(),
                ]);
            }
        }
    }
    t
}

pub const TRACK_HEADER: [&str; 13] = [
    "t",
    "x_est",
    "y_est",
    "theta_est",
    "x_true",
    "y_true",
    "theta_true",
    "var_vx",
    "var_vy",
    "var_x",
    "var_y",
    "var_theta",
    "clamped",
];

pub fn track_table(outcome: &TrackingOutcome, dtau: f64) -> CsvTable {
    let mut t = CsvTable::new(&TRACK_HEADER);
    for (i, (b, clamped)) in outcome
        .result
        .beliefs
        .iter()
        .zip(&outcome.result.clamped)
        .enumerate()
    {
        let e = b.state();
        let tr = &outcome.simulation.truth[i + 1];
        let mut row: Vec<Field> = vec![
            ((i + 1) as f64 * dtau).into(),
            e.x.into(),
            e.y.into(),
            e.theta.into(),
            tr.x.into(),
            tr.y.into(),
            tr.theta.into(),
        ];
        row.extend((0..5).map(|j| Field::Float(b.cov[(j, j)])));
        row.push((*clamped).into());
        t.row(row);
    }
    t
}

/// One tracking configuration within an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingCase {
    pub label: String,
    pub layout: LayoutConfig,
    pub delta: f64,
    pub noise: f64,
}

pub fn tracking_cases(cfg: &ExperimentConfig) -> Vec<TrackingCase> {
    let g = &cfg.geometry;
    let variants: Vec<(String, LayoutConfig, f64)> = match cfg.experiment {
        ExperimentId::TrackLimited => cfg
            .layouts
            .iter()
            .map(|l| (l.label(), l.clone(), g.delta))
            .collect(),
        _ => cfg
            .scales
            .iter()
            .map(|&s| (format!("scale-{s}"), g.layout.clone(), s / 2.0))
            .collect(),
    };
    variants
        .into_iter()
        .flat_map(|(label, layout, delta)| {
            cfg.noise_levels.iter().map(move |&noise| TrackingCase {
                label: format!("{label}_noise-{noise}"),
                layout: layout.clone(),
                delta,
                noise,
            })
        })
        .collect()
}

pub fn run_case(
    cfg: &ExperimentConfig,
    case: &TrackingCase,
    seed: u64,
    target: Option<&CgptMatrix>,
) -> Result<TrackingOutcome, HarnessError> {
    let spec = TrackingSpec::from_config(cfg, &case.layout, case.delta, case.noise, target)?;
    tracking_run(&spec, seed)
}

fn track_file(dir: &Path, case: &TrackingCase, seed: u64) -> PathBuf {
    dir.join(format!("track_{}_seed-{seed}.csv", case.label))
}

/// Runs every case for every seed and writes one track file per run plus a
/// summary; failed runs are listed in the summary and the report.
pub fn run_tracking(
    cfg: &ExperimentConfig,
    target: Option<&CgptMatrix>,
) -> Result<RunReport, HarnessError> {
    let cases = tracking_cases(cfg);
    let tasks: Vec<(&TrackingCase, u64)> = cases
        .iter()
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<_> = tasks
        .par_iter()
        .map(|&(case, seed)| run_case(cfg, case, seed, target))
        .collect();

    let mut summary = CsvTable::new(&[
        "case",
        "delta",
        "noise",
        "seed",
        "position_rmse",
        "position_ratio",
        "orientation_rmse",
        "converged",
        "clamped_frames",
        "redraws",
        "status",
    ]);
    let mut report = RunReport::default();
    for (&(case, seed), r) in tasks.iter().zip(results) {
        let lead: Vec<Field> = vec![
            case.label.as_str().into(),
            case.delta.into(),
            case.noise.into(),
            seed.into(),
        ];
        match r {
            Ok(o) => {
                let path = track_file(&cfg.output_dir, case, seed);
                track_table(&o, cfg.motion.dtau).write(&path, cfg, &[seed])?;
                report.artifacts.push(path);
                let mut row = lead;
                row.extend([
                    o.position_rmse.into(),
                    o.position_ratio().into(),
                    o.orientation_rmse.into(),
                    o.converged().into(),
                    o.clamp_count().into(),
                    o.simulation.redraws.into(),
                    "ok".into(),
                ]);
                summary.row(row);
            }
            Err(e) => {
                report
                    .failures
                    .push(format!("{} seed={seed}: {e}", case.label));
                let mut row = lead;
                row.extend([
                    Field::Float(f64::NAN),
                    Field::Float(f64::NAN),
                    Field::Float(f64::NAN),
                    Field::Empty,
                    Field::Empty,
                    Field::Empty,
                    format!("error: {e}").into(),
                ]);
                summary.row(row);
            }
        }
    }
    let path = cfg.output_dir.join("track_summary.csv");
    summary.write(&path, cfg, &cfg.seeds)?;
    report.artifacts.push(path);
    Ok(report)
}
