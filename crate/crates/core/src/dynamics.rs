//! Ground truth for simulations: material, disk CGPTs, the
//! white-noise-acceleration motion model and MSR stream synthesis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix5, Vector5};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::acquisition::MsrOperator;
use crate::algebra::{transform_cgpt, RigidMotion};
use crate::cgpt::{CgptMatrix, MsrMatrix};
use crate::error::{Error, Result};
use crate::geometry::AcquisitionGeometry;
use crate::rng::{stream, Stream};

/// Conductivity `κ` of the inclusion (background is 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    kappa: f64,
}

impl MaterialParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() || kappa == 1.0 {
            return Err(Error::InvalidParameter(format!(
                "conductivity must be positive, finite and != 1, got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Contrast `λ = (κ + 1) / (2κ − 2)`.
    pub fn lambda(&self) -> f64 {
        (self.kappa + 1.0) / (2.0 * self.kappa - 2.0)
    }
}

/// CGPT of a centred disk of radius `r`: `cc_mm = ss_mm = 2πm r^{2m}(κ−1)/(κ+1)`,
/// every other entry zero.
pub fn disk_cgpt(r: f64, material: &MaterialParams, k: usize) -> Result<CgptMatrix> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "disk radius must be positive, got {r}"
        )));
    }
    let kappa = material.kappa();
    let ratio = (kappa - 1.0) / (kappa + 1.0);
    let mut m = CgptMatrix::zeros(k)?;
    for order in 1..=k {
        let v = 2.0 * PI * order as f64 * r.powi(2 * order as i32) * ratio;
        m.set_block(order, order, [[v, 0.0], [0.0, v]]);
    }
    Ok(m)
}

/// Random-walk velocity, integrated position and random-walk orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub sigma_a: f64,
    pub sigma_theta: f64,
    pub dtau: f64,
}

impl MotionModel {
    /// Noise scales and time step must be finite and non-negative; zero
    /// noise gives deterministic straight-line motion.
    pub fn new(sigma_a: f64, sigma_theta: f64, dtau: f64) -> Result<Self> {
        for (name, v) in [
            ("sigma_a", sigma_a),
            ("sigma_theta", sigma_theta),
            ("dtau", dtau),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            sigma_a,
            sigma_theta,
            dtau,
        })
    }
}

/// State `(vₓ, v_y, x, y, θ)`; `θ` is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetState {
    pub vx: f64,
    pub vy: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl TargetState {
    pub fn new(vx: f64, vy: f64, x: f64, y: f64, theta: f64) -> Self {
        Self {
            vx,
            vy,
            x,
            y,
            theta,
        }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.vx, self.vy, self.x, self.y, self.theta)
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.to_vector().as_slice())
    }

    /// Rigid motion of the reference target, with the displacement in
    /// units of `delta`.
    pub fn motion(&self, delta: f64) -> RigidMotion {
        RigidMotion::new(self.x / delta, self.y / delta, self.theta)
    }

    /// `|z| + δ`, the outer extent of the target.
    pub fn extent(&self, delta: f64) -> f64 {
        self.x.hypot(self.y) + delta
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Relative measurement noise level and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0) || !level.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise level must be non-negative, got {level}"
            )));
        }
        Ok(Self { level, seed })
    }

    /// Entry-wise standard deviation for a clean frame: `p ‖V‖_F / N`.
    pub fn std_for(&self, clean: &MsrMatrix) -> f64 {
        self.level * clean.frobenius_norm() / clean.n() as f64
    }
}

/// Covariance of one step's increment `(a, b, c)`:
/// `Δτ [[σ_a² I, σ_a²Δτ/2 I, 0], [σ_a²Δτ/2 I, σ_a²Δτ²/3 I, 0], [0, 0, σ_θ²]]`.
pub fn process_covariance(model: &MotionModel) -> Matrix5<f64> {
    let dt = model.dtau;
    let qa = model.sigma_a * model.sigma_a;
    let mut s = Matrix5::zeros();
    for i in 0..2 {
        s[(i, i)] = qa * dt;
        s[(i, i + 2)] = qa * dt * dt / 2.0;
        s[(i + 2, i)] = qa * dt * dt / 2.0;
        s[(i + 2, i + 2)] = qa * dt * dt * dt / 3.0;
    }
    s[(4, 4)] = model.sigma_theta * model.sigma_theta * dt;
    s
}

/// Lower-triangular `L` with `L Lᵀ = Σ`, in closed form so that zero noise
/// scales are allowed.
pub fn process_noise_factor(model: &MotionModel) -> Matrix5<f64> {
    let dt = model.dtau;
    let sa = model.sigma_a;
    let mut l = Matrix5::zeros();
    for i in 0..2 {
        l[(i, i)] = sa * dt.sqrt();
        l[(i + 2, i)] = sa * dt.powf(1.5) / 2.0;
        l[(i + 2, i + 2)] = sa * dt.powf(1.5) / 12f64.sqrt();
    }
    l[(4, 4)] = model.sigma_theta * dt.sqrt();
    l
}

/// `F = [[I, 0, 0], [Δτ I, I, 0], [0, 0, 1]]`.
pub fn transition_matrix(model: &MotionModel) -> Matrix5<f64> {
    let mut f = Matrix5::identity();
    f[(2, 0)] = model.dtau;
    f[(3, 1)] = model.dtau;
    f
}

/// `steps + 1` states starting with `x0`, `X_t = F X_{t−1} + U_t`.
pub fn simulate_trajectory(
    model: &MotionModel,
    x0: &TargetState,
    steps: usize,
    seed: u64,
) -> Vec<TargetState> {
    let mut rng = stream(seed, Stream::Trajectory);
    simulate_trajectory_with(model, x0, steps, &mut rng)
}

pub fn simulate_trajectory_with<R: Rng>(
    model: &MotionModel,
    x0: &TargetState,
    steps: usize,
    rng: &mut R,
) -> Vec<TargetState> {
    let f = transition_matrix(model);
    let l = process_noise_factor(model);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vector();
    states.push(*x0);
    for _ in 0..steps {
        let xi = Vector5::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        x = f * x + l * xi;
        states.push(TargetState::from_slice(x.as_slice()));
    }
    states
}

/// One synthesised MSR frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrFrame {
    pub data: MsrMatrix,
    pub clean: MsrMatrix,
    pub noise_std: f64,
}

/// Checks `|z_t| + δ < R` for every state.
pub fn check_containment(states: &[TargetState], geom: &AcquisitionGeometry) -> Result<()> {
    for (frame, s) in states.iter().enumerate() {
        let extent = s.extent(geom.delta());
        if !(extent < geom.radius()) {
            return Err(Error::ContainmentViolation {
                frame,
                extent,
                radius: geom.radius(),
            });
        }
    }
    Ok(())
}

/// `V_t = L(T_t(M_D)) + W_t` with white noise of standard deviation
/// `p ‖V_t^clean‖_F / N`, using CGPTs up to order `k_data`.
pub fn generate_msr_stream(
    m_d: &CgptMatrix,
    states: &[TargetState],
    geom: &AcquisitionGeometry,
    k_data: usize,
    noise: &NoiseSpec,
) -> Result<Vec<MsrFrame>> {
    check_containment(states, geom)?;
    let m = m_d.truncate(k_data)?;
    let op = MsrOperator::new(geom, k_data)?;
    let mut rng = stream(noise.seed, Stream::MeasurementNoise);
    let n = geom.n();
    states
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let moved = transform_cgpt(&m, &s.motion(geom.delta())).map_err(|e| e.at_frame(t))?;
            let clean = op.forward(&moved).map_err(|e| e.at_frame(t))?;
            let sd = noise.std_for(&clean);
            let w = DMatrix::from_fn(n, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
            let data = MsrMatrix::new(clean.values() + w)?;
            Ok(MsrFrame {
                data,
                clean,
                noise_std: sd,
            })
        })
        .collect()
}
