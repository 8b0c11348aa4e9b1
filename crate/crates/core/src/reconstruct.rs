//! CGPT recovery from MSR data.
//!
//! Besides least squares and Tikhonov regularisation this module builds an
//! explicit left inverse `C̃` of the coefficient matrix from trigonometric
//! interpolation kernels on arbitrary distinct angles, which gives the
//! noiseless reconstruction `M = D⁻¹ C̃ V C̃ᵀ D⁻¹` for any aperture.

use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::acquisition::{scaling_diagonal, MsrOperator};
use crate::cgpt::{CgptMatrix, MsrMatrix};
use crate::error::{Error, Result};
use crate::geometry::{check_distinct, AcquisitionGeometry};

/// Candidate regularisation weights, strictly positive and increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationGrid {
    mu_values: Vec<f64>,
}

impl RegularizationGrid {
    pub fn new(mu_values: Vec<f64>) -> Result<Self> {
        if mu_values.is_empty() {
            return Err(Error::InvalidParameter("empty regularisation grid".into()));
        }
        if mu_values.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParameter(
                "regularisation weights must be positive and finite".into(),
            ));
        }
        if mu_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "regularisation grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { mu_values })
    }

    /// `count` log-spaced points on `[lo, hi]`.
    pub fn logspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(vec![lo]);
        }
        let (a, b) = (lo.log10(), hi.log10());
        Self::new(
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.mu_values
    }
}

impl Default for RegularizationGrid {
    /// 26 log-spaced weights on `[1e-6, 1e-1]`.
    fn default() -> Self {
        Self::logspace(1e-6, 1e-1, 26).expect("valid default grid")
    }
}

pub fn solve_least_squares(
    v: &MsrMatrix,
    geom: &AcquisitionGeometry,
    k: usize,
) -> Result<CgptMatrix> {
    MsrOperator::new(geom, k)?.pseudo_inverse(v)
}

pub fn solve_tikhonov(
    v: &MsrMatrix,
    geom: &AcquisitionGeometry,
    k: usize,
    mu: f64,
) -> Result<CgptMatrix> {
    MsrOperator::new(geom, k)?.tikhonov(v, mu)
}

/// Orders compared when scoring a reconstruction.
pub const SCORED_ORDERS: usize = 2;

/// Grid weight minimising the relative error of the first two orders
/// against a known ground truth. Ties go to the smaller weight.
pub fn select_mu(
    v: &MsrMatrix,
    geom: &AcquisitionGeometry,
    k: usize,
    m_true: &CgptMatrix,
    grid: &RegularizationGrid,
) -> Result<(f64, f64)> {
    let op = MsrOperator::new(geom, k)?;
    select_mu_with(&op, v, m_true, grid)
}

pub fn select_mu_with(
    op: &MsrOperator,
    v: &MsrMatrix,
    m_true: &CgptMatrix,
    grid: &RegularizationGrid,
) -> Result<(f64, f64)> {
    let orders = SCORED_ORDERS.min(op.order()).min(m_true.order());
    let mut best = (f64::NAN, f64::INFINITY);
    for &mu in grid.values() {
        let err = op.tikhonov(v, mu)?.relative_error(m_true, orders)?;
        if err < best.1 {
            best = (mu, err);
        }
    }
    Ok(best)
}

/// `D_K(θ) = Σ_{k=−K}^{K} e^{ikθ} = sin((K+½)θ) / sin(θ/2)`, with the limit
/// `2K+1` at multiples of `2π`.
pub fn dirichlet_kernel(k: usize, theta: f64) -> f64 {
    let half = (0.5 * theta).sin();
    if half.abs() < 1e-6 {
        // Closed form loses relative accuracy here; sum the cosines.
        return 1.0 + 2.0 * (1..=k).map(|j| (j as f64 * theta).cos()).sum::<f64>();
    }
    ((k as f64 + 0.5) * theta).sin() / half
}

/// Trigonometric interpolation kernels `h_s` on distinct angles, with
/// `h_s(θ_t) = δ_st`. Odd `N` uses the plain product of half-angle sines,
/// even `N` an extra `cos((θ − θ_s)/2)` factor.
#[derive(Debug, Clone)]
pub struct InterpolationKernels {
    angles: Vec<f64>,
    // ln |Π_{t≠s} sin((θ_s − θ_t)/2)| and its sign
    log_denominator: Vec<f64>,
    sign_denominator: Vec<f64>,
}

impl InterpolationKernels {
    pub fn new(angles: &[f64]) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidGeometry("no interpolation nodes".into()));
        }
        let mut order: Vec<usize> = (0..angles.len()).collect();
        order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| angles[i]).collect();
        check_distinct(&sorted).map_err(|e| match e {
            Error::CoincidentAngles(a, b) => Error::CoincidentAngles(order[a], order[b]),
            other => other,
        })?;
        let mut log_denominator = Vec::with_capacity(angles.len());
        let mut sign_denominator = Vec::with_capacity(angles.len());
        for (s, &ts) in angles.iter().enumerate() {
            let (lg, sg) = log_product(angles, s, ts);
            log_denominator.push(lg);
            sign_denominator.push(sg);
        }
        Ok(Self {
            angles: angles.to_vec(),
            log_denominator,
            sign_denominator,
        })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn eval(&self, s: usize, theta: f64) -> f64 {
        let (lg, sg) = log_product(&self.angles, s, theta);
        if sg == 0.0 {
            return 0.0;
        }
        let mut value = sg * self.sign_denominator[s] * (lg - self.log_denominator[s]).exp();
        if self.angles.len().is_multiple_of(2) {
            value *= (0.5 * (theta - self.angles[s])).cos();
        }
        value
    }
}

// ln |Π_{t≠s} sin((θ − θ_t)/2)| and the sign of the product (0 if a factor
// vanishes).
fn log_product(angles: &[f64], s: usize, theta: f64) -> (f64, f64) {
    let mut lg = 0.0;
    let mut sign = 1.0;
    for (t, &tt) in angles.iter().enumerate() {
        if t == s {
            continue;
        }
        let f = (0.5 * (theta - tt)).sin();
        if f == 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        lg += f.abs().ln();
        if f < 0.0 {
            sign = -sign;
        }
    }
    (lg, sign)
}

pub fn interpolation_kernel(angles: &[f64], s: usize, theta: f64) -> Result<f64> {
    if s >= angles.len() {
        return Err(Error::InvalidParameter(format!(
            "kernel index {s} out of range for {} nodes",
            angles.len()
        )));
    }
    Ok(InterpolationKernels::new(angles)?.eval(s, theta))
}

/// Number of uniform quadrature nodes used for the left-inverse integrals.
pub fn quadrature_nodes(n: usize, k: usize) -> usize {
    2 * (n + 2 * k) + 1
}

/// `2K × N` left inverse of `C`:
/// `C̃_{2k−1,s} = (1/π)∫ h_s cos kθ`, `C̃_{2k,s} = (1/π)∫ h_s sin kθ`,
/// integrated exactly by the uniform trapezoidal rule.
pub fn left_inverse(angles: &[f64], k: usize) -> Result<DMatrix<f64>> {
    let n = angles.len();
    if k == 0 {
        return Err(Error::InvalidOrder(k));
    }
    if n <= 2 * k {
        return Err(Error::LeftInverseOrder { n, k });
    }
    let kernels = InterpolationKernels::new(angles)?;
    let nodes = quadrature_nodes(n, k);
    let phis: Vec<f64> = (0..nodes).map(|j| TAU * j as f64 / nodes as f64).collect();
    Ok(project_kernels(&kernels, k, &phis, 2.0 / nodes as f64))
}

/// Left inverse from the discrete sum over the `N` uniform points
/// `2πn/N`; only exact for odd `N`.
pub fn left_inverse_sum(angles: &[f64], k: usize) -> Result<DMatrix<f64>> {
    let n = angles.len();
    if k == 0 {
        return Err(Error::InvalidOrder(k));
    }
    if n <= 2 * k {
        return Err(Error::LeftInverseOrder { n, k });
    }
    if n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(
            "the discrete-sum left inverse requires an odd number of angles".into(),
        ));
    }
    let kernels = InterpolationKernels::new(angles)?;
    let phis: Vec<f64> = (1..=n).map(|j| TAU * j as f64 / n as f64).collect();
    Ok(project_kernels(&kernels, k, &phis, 2.0 / n as f64))
}

fn project_kernels(
    kernels: &InterpolationKernels,
    k: usize,
    phis: &[f64],
    weight: f64,
) -> DMatrix<f64> {
    let n = kernels.len();
    let mut out = DMatrix::zeros(2 * k, n);
    for &phi in phis {
        let trig: Vec<(f64, f64)> = (1..=k)
            .map(|m| {
                let a = m as f64 * phi;
                (a.cos(), a.sin())
            })
            .collect();
        for s in 0..n {
            let h = kernels.eval(s, phi) * weight;
            if h == 0.0 {
                continue;
            }
            for (m, (c, sn)) in trig.iter().enumerate() {
                out[(2 * m, s)] += h * c;
                out[(2 * m + 1, s)] += h * sn;
            }
        }
    }
    out
}

/// `M = D⁻¹ C̃ V C̃ᵀ D⁻¹`; exact for noise-free data on any aperture.
pub fn noiseless_inversion(
    v: &MsrMatrix,
    geom: &AcquisitionGeometry,
    k: usize,
) -> Result<CgptMatrix> {
    if v.n() != geom.n() {
        return Err(Error::mismatch(geom.n(), v.n()));
    }
    let ct = left_inverse(geom.angles(), k)?;
    let d = scaling_diagonal(geom.rho(), k)?;
    let mut m = &ct * v.values() * ct.transpose();
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            m[(a, b)] /= d[a] * d[b];
        }
    }
    CgptMatrix::from_entries(m)
}
