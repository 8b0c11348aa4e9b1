//! Kalman and extended Kalman filtering of MSR streams.
//!
//! The state is `(vₓ, v_y, x, y, θ)` and the observation is the row-major
//! vectorised MSR matrix `h(X) = vec L(T_{z,θ}(M_D))`, which does not depend
//! on the velocity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::acquisition::MsrOperator;
use crate::algebra::{to_complex, transform_complex_with_partials, ComplexCgpt};
use crate::cgpt::{CgptMatrix, MsrMatrix};
use crate::dynamics::{process_covariance, transition_matrix, MotionModel, TargetState};
use crate::error::{Error, Result};
use crate::geometry::AcquisitionGeometry;

/// Mean and covariance of a Gaussian state estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.shape() != (n, n) {
            return Err(Error::mismatch(
                format!("{n} x {n} covariance"),
                format!("{} x {}", cov.nrows(), cov.ncols()),
            ));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("belief"));
        }
        Ok(Self { mean, cov })
    }

    /// Loose prior `diag(1, 1, 25, 25, π²)` around `mean`.
    pub fn prior(mean: &TargetState) -> Self {
        let cov = DMatrix::from_diagonal(&DVector::from_column_slice(&[
            1.0,
            1.0,
            25.0,
            25.0,
            PI * PI,
        ]));
        Self {
            mean: mean.to_dvector(),
            cov,
        }
    }

    pub fn state(&self) -> TargetState {
        TargetState::from_slice(self.mean.as_slice())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Observation with additive isotropic noise `σ² I`.
pub trait Observation {
    /// `h(x)` and its Jacobian at `x`.
    fn linearize(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)>;

    fn noise_std(&self) -> f64;

    /// Moves `x` into the domain of `h`; returns whether anything changed.
    fn constrain(&self, _x: &mut DVector<f64>) -> bool {
        false
    }
}

/// `h(x) = offset + H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineObservation {
    pub offset: DVector<f64>,
    pub matrix: DMatrix<f64>,
    pub noise_std: f64,
}

impl Observation for AffineObservation {
    fn linearize(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if x.len() != self.matrix.ncols() {
            return Err(Error::mismatch(self.matrix.ncols(), x.len()));
        }
        Ok((&self.offset + &self.matrix * x, self.matrix.clone()))
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

/// The nonlinear CGPT observation for a known reference target.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    m_d: CgptMatrix,
    complex: ComplexCgpt,
    op: MsrOperator,
    delta: f64,
    radius: f64,
    noise_std: f64,
}

impl ObservationModel {
    pub fn new(
        m_d: &CgptMatrix,
        geom: &AcquisitionGeometry,
        k_track: usize,
        noise_std: f64,
    ) -> Result<Self> {
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise standard deviation must be non-negative, got {noise_std}"
            )));
        }
        if geom.n() < 2 * k_track {
            return Err(Error::Underdetermined {
                n: geom.n(),
                k: k_track,
            });
        }
        let m_d = m_d.truncate(k_track)?;
        Ok(Self {
            complex: to_complex(&m_d),
            op: MsrOperator::new(geom, k_track)?,
            m_d,
            delta: geom.delta(),
            radius: geom.radius(),
            noise_std,
        })
    }

    pub fn with_noise_std(&self, noise_std: f64) -> Self {
        Self {
            noise_std,
            ..self.clone()
        }
    }

    pub fn reference(&self) -> &CgptMatrix {
        &self.m_d
    }

    pub fn order(&self) -> usize {
        self.m_d.order()
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    fn check(&self, x: &TargetState) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        let extent = x.extent(self.delta);
        if extent >= self.radius {
            return Err(Error::ContainmentViolation {
                frame: 0,
                extent,
                radius: self.radius,
            });
        }
        Ok(())
    }

    /// `vec L(T(M_D))`, length `N²`.
    pub fn observe(&self, x: &TargetState) -> Result<DVector<f64>> {
        Ok(self.observe_with_jacobian(x)?.0)
    }

    /// `N² × 5` Jacobian; the velocity columns are zero.
    pub fn observe_jacobian(&self, x: &TargetState) -> Result<DMatrix<f64>> {
        Ok(self.observe_with_jacobian(x)?.1)
    }

    pub fn observe_with_jacobian(&self, x: &TargetState) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check(x)?;
        let (value, partials) =
            transform_complex_with_partials(&self.complex, &x.motion(self.delta))?;
        let n2 = self.n() * self.n();
        let h = vectorise(&self.op.forward_raw(value.entries()));
        let mut jac = DMatrix::zeros(n2, 5);
        // positions enter the transform divided by δ
        let cols = [
            (2, &partials.dx, 1.0 / self.delta),
            (3, &partials.dy, 1.0 / self.delta),
            (4, &partials.dtheta, 1.0),
        ];
        for (c, d, scale) in cols {
            let col = vectorise(&self.op.forward_raw(d.entries())) * scale;
            jac.set_column(c, &col);
        }
        Ok((h, jac))
    }
}

fn vectorise(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.transpose().as_slice())
}

impl Observation for ObservationModel {
    fn linearize(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if x.len() != 5 {
            return Err(Error::mismatch(5, x.len()));
        }
        self.observe_with_jacobian(&TargetState::from_slice(x.as_slice()))
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Pulls the position back to radius `R − δ − ε` when the target would
    /// touch the array.
    fn constrain(&self, x: &mut DVector<f64>) -> bool {
        let r = x[2].hypot(x[3]);
        let limit = self.radius - self.delta;
        if r + self.delta < self.radius {
            return false;
        }
        let target = limit - 1e-9 * self.radius;
        if r > 0.0 {
            x[2] *= target / r;
            x[3] *= target / r;
        }
        true
    }
}

fn check_square(name: &'static str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::mismatch(
            format!("{n} x {n} {name}"),
            format!("{} x {}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn predict(belief: &GaussianBelief, f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<GaussianBelief> {
    let n = belief.dim();
    check_square("transition", f, n)?;
    check_square("process covariance", q, n)?;
    Ok(GaussianBelief {
        mean: f * &belief.mean,
        cov: f * &belief.cov * f.transpose() + q,
    })
}

fn symmetrise(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Linear Kalman filter step: predict with `(F, Q)` then condition on `y`
/// observed through `H` with noise covariance `R`.
pub fn kf_step(
    belief: &GaussianBelief,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<GaussianBelief> {
    let pred = predict(belief, f, q)?;
    let n = pred.dim();
    let m = y.len();
    if h.shape() != (m, n) {
        return Err(Error::mismatch(
            format!("{m} x {n} observation matrix"),
            format!("{} x {}", h.nrows(), h.ncols()),
        ));
    }
    check_square("measurement covariance", r, m)?;
    let ph = &pred.cov * h.transpose();
    let s = h * &ph + r;
    let chol = s.clone().cholesky().ok_or_else(|| {
        Error::SingularInnovation(format!(
            "innovation covariance of size {m} is not positive definite (max |S| = {:e})",
            s.amax()
        ))
    })?;
    // K = P Hᵀ S⁻¹
    let gain = chol.solve(&ph.transpose()).transpose();
    let innovation = y - h * &pred.mean;
    let mean = &pred.mean + &gain * innovation;
    let mut cov = (DMatrix::identity(n, n) - &gain * h) * &pred.cov;
    symmetrise(&mut cov);
    Ok(GaussianBelief { mean, cov })
}

/// Result of one EKF step.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfStep {
    pub belief: GaussianBelief,
    /// The predicted mean had to be pulled back inside the array.
    pub clamped: bool,
}

/// Extended Kalman step with linear dynamics `(F, Q)` and observation
/// `y = h(x) + w`, `w ~ N(0, σ² I)`.
///
/// The gain is formed in state space through the push-through identity
/// `P Hᵀ (H P Hᵀ + σ² I)⁻¹ = L (B + σ² I)⁻¹ Lᵀ Hᵀ` with `P = L Lᵀ` and
/// `B = Lᵀ Hᵀ H L`, so no `N² × N²` system is ever assembled. The posterior
/// covariance is `σ² L (B + σ² I)⁻¹ Lᵀ`; at `σ = 0` the inverse is taken
/// on the range of `B`.
pub fn ekf_step<O: Observation>(
    belief: &GaussianBelief,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
    obs: &O,
    y: &DVector<f64>,
) -> Result<EkfStep> {
    let mut pred = predict(belief, f, q)?;
    let clamped = obs.constrain(&mut pred.mean);
    let (h, jac) = obs.linearize(&pred.mean)?;
    if y.len() != h.len() {
        return Err(Error::mismatch(h.len(), y.len()));
    }
    let sigma2 = obs.noise_std().powi(2);
    let n = pred.dim();

    symmetrise(&mut pred.cov);
    let p_eig = pred.cov.clone().symmetric_eigen();
    let mut l = p_eig.eigenvectors.clone();
    for (j, mut col) in l.column_iter_mut().enumerate() {
        col *= p_eig.eigenvalues[j].max(0.0).sqrt();
    }
    let hl = &jac * &l;
    let mut b = hl.transpose() * &hl;
    symmetrise(&mut b);
    let b_eig = b.symmetric_eigen();
    let lmax = b_eig.eigenvalues.amax();
    let cutoff = lmax * (n as f64) * f64::EPSILON;
    let mut inv = DVector::zeros(n);
    let mut post = DVector::zeros(n);
    for i in 0..n {
        let lam = b_eig.eigenvalues[i].max(0.0);
        let d = lam + sigma2;
        if d > cutoff && d > 0.0 {
            inv[i] = 1.0 / d;
            post[i] = sigma2 / d;
        } else {
            post[i] = 1.0;
        }
    }
    if inv.iter().chain(post.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularInnovation(
            "state-space innovation system is not finite".into(),
        ));
    }
    let qv = &b_eig.eigenvectors;
    let lq = &l * qv;
    let innovation = y - h;
    let proj = lq.transpose() * (jac.transpose() * innovation);
    let mean = &pred.mean + &lq * proj.component_mul(&inv);
    let mut cov = &lq * DMatrix::from_diagonal(&post) * lq.transpose();
    symmetrise(&mut cov);
    if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("EKF update"));
    }
    Ok(EkfStep {
        belief: GaussianBelief { mean, cov },
        clamped,
    })
}

/// Filter output, one entry per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub beliefs: Vec<GaussianBelief>,
    pub clamped: Vec<bool>,
}

impl TrackResult {
    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn states(&self) -> Vec<TargetState> {
        self.beliefs.iter().map(GaussianBelief::state).collect()
    }
}

/// Runs the EKF over `stream`, with `init` the belief one step before the
/// first frame and `R = σ² I` taken from `obs`.
pub fn run_tracker(
    stream: &[MsrMatrix],
    obs: &ObservationModel,
    motion: &MotionModel,
    init: &GaussianBelief,
) -> Result<TrackResult> {
    let noise = vec![obs.noise_std(); stream.len()];
    run_tracker_with_noise(stream, &noise, obs, motion, init)
}

/// As [`run_tracker`] with a per-frame noise standard deviation.
pub fn run_tracker_with_noise(
    stream: &[MsrMatrix],
    noise_std: &[f64],
    obs: &ObservationModel,
    motion: &MotionModel,
    init: &GaussianBelief,
) -> Result<TrackResult> {
    if stream.is_empty() {
        return Err(Error::InvalidParameter("empty MSR stream".into()));
    }
    if noise_std.len() != stream.len() {
        return Err(Error::mismatch(stream.len(), noise_std.len()));
    }
    if init.dim() != 5 {
        return Err(Error::mismatch(5, init.dim()));
    }
    let f = DMatrix::from_iterator(5, 5, transition_matrix(motion).iter().copied());
    let q = DMatrix::from_iterator(5, 5, process_covariance(motion).iter().copied());
    let mut belief = init.clone();
    let mut out = TrackResult {
        beliefs: Vec::with_capacity(stream.len()),
        clamped: Vec::with_capacity(stream.len()),
    };
    for (t, (v, &sd)) in stream.iter().zip(noise_std).enumerate() {
        if v.n() != obs.n() {
            return Err(Error::mismatch(obs.n(), v.n()).at_frame(t));
        }
        let step = ekf_step(&belief, &f, &q, &obs.with_noise_std(sd), &v.to_vector())
            .map_err(|e| e.at_frame(t))?;
        belief = step.belief;
        out.beliefs.push(belief.clone());
        out.clamped.push(step.clamped);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{disk_cgpt, MaterialParams};

    fn belief2() -> GaussianBelief {
        GaussianBelief::new(
            DVector::from_column_slice(&[0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn kf_without_information_only_predicts() {
        let b = belief2();
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let q = DMatrix::identity(2, 2) * 0.01;
        let h = DMatrix::zeros(3, 2);
        let r = DMatrix::identity(3, 3);
        let post = kf_step(&b, &f, &q, &h, &r, &DVector::from_element(3, 7.0)).unwrap();
        assert!((&post.mean - &f * &b.mean).amax() < 1e-15);
        assert!((&post.cov - (&f * &b.cov * f.transpose() + &q)).amax() < 1e-15);
    }

    #[test]
    fn kf_huge_noise_has_no_gain() {
        let b = belief2();
        let i = DMatrix::identity(2, 2);
        let post = kf_step(
            &b,
            &i,
            &(&i * 0.0),
            &i,
            &(&i * 1e12),
            &DVector::from_element(2, 1e3),
        )
        .unwrap();
        assert!((&post.mean - &b.mean).amax() < 1e-8);
    }

    #[test]
    fn kf_rejects_singular_innovation() {
        let b = belief2();
        let i = DMatrix::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        let err = kf_step(&b, &i, &z, &z, &z, &DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::SingularInnovation(_)));
    }

    #[test]
    fn ekf_matches_kf_on_affine_observation() {
        let b = belief2();
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let q = DMatrix::from_row_slice(2, 2, &[0.02, 0.001, 0.001, 0.01]);
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 2.0, -1.0, 0.3]);
        let offset = DVector::from_column_slice(&[0.1, -0.2, 0.3]);
        let y = DVector::from_column_slice(&[1.0, 0.0, -0.5]);
        let obs = AffineObservation {
            offset: offset.clone(),
            matrix: h.clone(),
            noise_std: 0.4,
        };
        let e = ekf_step(&b, &f, &q, &obs, &y).unwrap();
        let r = DMatrix::identity(3, 3) * 0.16;
        let k = kf_step(&b, &f, &q, &h, &r, &(&y - &offset)).unwrap();
        assert!((&e.belief.mean - &k.mean).amax() < 1e-12);
        assert!((&e.belief.cov - &k.cov).amax() < 1e-12);
        assert!(!e.clamped);
    }

    fn disk_model(k: usize) -> (ObservationModel, AcquisitionGeometry) {
        let geom = AcquisitionGeometry::full_view(12, 5.0, 1.0).unwrap();
        let m = disk_cgpt(1.0, &MaterialParams::new(3.0).unwrap(), k).unwrap();
        (ObservationModel::new(&m, &geom, k, 0.0).unwrap(), geom)
    }

    #[test]
    fn velocity_does_not_enter_observation() {
        let (obs, _) = disk_model(2);
        let a = obs
            .observe(&TargetState::new(0.0, 0.0, 0.3, -0.2, 0.4))
            .unwrap();
        let b = obs
            .observe(&TargetState::new(5.0, -3.0, 0.3, -0.2, 0.4))
            .unwrap();
        assert_eq!(a, b);
        let jac = obs
            .observe_jacobian(&TargetState::new(1.0, 1.0, 0.3, -0.2, 0.4))
            .unwrap();
        assert!(jac.column(0).iter().all(|v| *v == 0.0));
        assert!(jac.column(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn order_one_disk_has_no_orientation_sensitivity() {
        let (obs, _) = disk_model(1);
        let (h, jac) = obs
            .observe_with_jacobian(&TargetState::new(0.0, 0.0, 0.7, 0.2, 1.1))
            .unwrap();
        assert!(jac.column(4).amax() <= 1e-12 * h.amax());
    }

    #[test]
    fn observation_requires_containment() {
        let (obs, _) = disk_model(1);
        let err = obs
            .observe(&TargetState::new(0.0, 0.0, 4.5, 0.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::ContainmentViolation { .. }));
    }

    #[test]
    fn constrain_pulls_mean_inside() {
        let (obs, _) = disk_model(1);
        let mut x = DVector::from_column_slice(&[0.0, 0.0, 3.0, 4.0, 0.0]);
        assert!(obs.constrain(&mut x));
        assert!(x[2].hypot(x[3]) + 1.0 < 5.0);
        assert!((x[3] / x[2] - 4.0 / 3.0).abs() < 1e-12);
        let mut inside = DVector::from_column_slice(&[0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(!obs.constrain(&mut inside));
    }

    #[test]
    fn empty_stream_is_rejected() {
        let (obs, _) = disk_model(1);
        let motion = MotionModel::new(1.0, 1.0, 0.01).unwrap();
        let init = GaussianBelief::prior(&TargetState::default());
        assert!(run_tracker(&[], &obs, &motion, &init).is_err());
    }
}
