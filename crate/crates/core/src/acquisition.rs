//! The `C` and `D` matrices, the forward operator `L(M) = C D M D Cᵀ`, its
//! pseudo-inverse and its spectrum.
//!
//! `L` is separable: with `A = C D` it acts as `M ↦ A M Aᵀ`. If
//! `A = U Σ Vᵀ` then `L` has singular triplets `(u_a u_bᵀ, σ_a σ_b, v_a v_bᵀ)`,
//! so everything spectral is derived from the thin SVD of the `N × 2K`
//! matrix `A` and never from the `N² × 4K²` assembled operator.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::cgpt::{CgptMatrix, MsrMatrix};
use crate::error::{Error, Result};
use crate::geometry::AcquisitionGeometry;

/// `C`: row `r`, block `m` is `(cos mθ_r, sin mθ_r)`.
pub fn coefficient_matrix(geom: &AcquisitionGeometry, k: usize) -> Result<DMatrix<f64>> {
    check_order(geom.n(), k)?;
    Ok(coefficient_matrix_from_angles(geom.angles(), k))
}

pub(crate) fn coefficient_matrix_from_angles(angles: &[f64], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(angles.len(), 2 * k, |r, col| {
        let m = (col / 2 + 1) as f64;
        if col % 2 == 0 {
            (m * angles[r]).cos()
        } else {
            (m * angles[r]).sin()
        }
    })
}

/// Diagonal of `D`: entries `2k-1, 2k` equal `1 / (2π k ρᵏ)`.
pub fn scaling_diagonal(rho: f64, k: usize) -> Result<DVector<f64>> {
    if k == 0 {
        return Err(Error::InvalidOrder(k));
    }
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(Error::TargetNotEnclosed(rho));
    }
    Ok(DVector::from_fn(2 * k, |i, _| {
        let m = (i / 2 + 1) as f64;
        1.0 / (2.0 * PI * m * rho.powf(m))
    }))
}

pub fn scaling_matrix(rho: f64, k: usize) -> Result<DMatrix<f64>> {
    Ok(DMatrix::from_diagonal(&scaling_diagonal(rho, k)?))
}

fn check_order(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidOrder(k));
    }
    if n < 2 * k {
        return Err(Error::Underdetermined { n, k });
    }
    Ok(())
}

fn check_full_view(geom: &AcquisitionGeometry, k: usize) -> Result<()> {
    check_order(geom.n(), k)?;
    if !geom.is_full_view() {
        return Err(Error::NotFullView);
    }
    full_view_alias_check(geom.n(), k)
}

// At N = 2K the highest sine column of C vanishes on a uniform full-view
// array: C loses rank and C^T C is no longer (N/2) I.
fn full_view_alias_check(n: usize, k: usize) -> Result<()> {
    if n == 2 * k {
        return Err(Error::DegenerateGeometry {
            rank: 2 * k - 1,
            expected: 2 * k,
        });
    }
    Ok(())
}

/// Relative rank cut-off for singular values of `C D`.
pub fn rank_tolerance(n: usize, k: usize) -> f64 {
    n.max(2 * k) as f64 * f64::EPSILON
}

/// Thin SVD with singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let s = svd.singular_values;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    SortedSvd {
        u: DMatrix::from_fn(u.nrows(), idx.len(), |r, c| u[(r, idx[c])]),
        sigma: DVector::from_fn(idx.len(), |i, _| s[idx[i]]),
        v: DMatrix::from_fn(v_t.ncols(), idx.len(), |r, c| v_t[(idx[c], r)]),
    }
}

/// The forward operator `L` for one geometry and order, with the SVD of
/// `A = C D` cached.
#[derive(Debug, Clone)]
pub struct MsrOperator {
    n: usize,
    order: usize,
    rho: f64,
    c: DMatrix<f64>,
    d: DVector<f64>,
    a: DMatrix<f64>,
    svd: SortedSvd,
}

impl MsrOperator {
    pub fn new(geom: &AcquisitionGeometry, k: usize) -> Result<Self> {
        let c = coefficient_matrix(geom, k)?;
        let d = scaling_diagonal(geom.rho(), k)?;
        let mut a = c.clone();
        for (j, mut col) in a.column_iter_mut().enumerate() {
            col *= d[j];
        }
        let svd = sorted_svd(&a);
        Ok(Self {
            n: geom.n(),
            order: k,
            rho: geom.rho(),
            c,
            d,
            a,
            svd,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficient(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn scaling(&self) -> &DVector<f64> {
        &self.d
    }

    /// `A = C D`.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Singular values of `A = C D`, decreasing.
    pub fn design_singular_values(&self) -> &DVector<f64> {
        &self.svd.sigma
    }

    pub fn numerical_rank(&self) -> usize {
        let smax = self.svd.sigma[0];
        let tol = smax * rank_tolerance(self.n, self.order);
        self.svd.sigma.iter().filter(|&&s| s > tol).count()
    }

    fn check_cgpt(&self, m: &CgptMatrix) -> Result<()> {
        if m.order() != self.order {
            return Err(Error::mismatch(
                format!("CGPT of order {}", self.order),
                format!("order {}", m.order()),
            ));
        }
        Ok(())
    }

    fn check_msr(&self, v: &MsrMatrix) -> Result<()> {
        if v.n() != self.n {
            return Err(Error::mismatch(
                format!("{0} x {0} MSR matrix", self.n),
                format!("{0} x {0}", v.n()),
            ));
        }
        Ok(())
    }

    /// `L(M) = A M Aᵀ`.
    pub fn forward(&self, m: &CgptMatrix) -> Result<MsrMatrix> {
        self.check_cgpt(m)?;
        MsrMatrix::new(&self.a * m.entries() * self.a.transpose())
    }

    /// Forward map on a raw `2K × 2K` matrix (no finiteness checks).
    pub(crate) fn forward_raw(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * m * self.a.transpose()
    }

    /// Minimal-norm least-squares solution `A† V (A†)ᵀ`.
    pub fn pseudo_inverse(&self, v: &MsrMatrix) -> Result<CgptMatrix> {
        self.check_msr(v)?;
        let rank = self.numerical_rank();
        if rank < 2 * self.order {
            return Err(Error::DegenerateGeometry {
                rank,
                expected: 2 * self.order,
            });
        }
        // A† = V Σ⁻¹ Uᵀ
        let mut a_pinv = self.svd.u.transpose();
        for (i, mut row) in a_pinv.row_iter_mut().enumerate() {
            row /= self.svd.sigma[i];
        }
        let a_pinv = &self.svd.v * a_pinv;
        CgptMatrix::from_entries(&a_pinv * v.values() * a_pinv.transpose())
    }

    /// Minimiser of `‖L(M) − V‖²_F + μ‖M‖²_F`, filtering each singular
    /// component of `L` by `σ / (σ² + μ)`.
    pub fn tikhonov(&self, v: &MsrMatrix, mu: f64) -> Result<CgptMatrix> {
        self.check_msr(v)?;
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularisation weight must be positive, got {mu}"
            )));
        }
        let u = &self.svd.u;
        let s = &self.svd.sigma;
        let mut coeff = u.transpose() * v.values() * u;
        for a in 0..coeff.nrows() {
            for b in 0..coeff.ncols() {
                let sab = s[a] * s[b];
                coeff[(a, b)] *= sab / (sab * sab + mu);
            }
        }
        CgptMatrix::from_entries(&self.svd.v * coeff * self.svd.v.transpose())
    }

    /// `(4/N²) D⁻¹ Cᵀ V C D⁻¹`, the closed-form pseudo-inverse of a uniform
    /// full-view array.
    pub fn fullview_pinv(&self, geom: &AcquisitionGeometry, v: &MsrMatrix) -> Result<CgptMatrix> {
        check_full_view(geom, self.order)?;
        self.check_msr(v)?;
        let mut x = self.c.transpose() * v.values() * &self.c;
        let scale = 4.0 / (self.n as f64).powi(2);
        for a in 0..x.nrows() {
            for b in 0..x.ncols() {
                x[(a, b)] *= scale / (self.d[a] * self.d[b]);
            }
        }
        CgptMatrix::from_entries(x)
    }

    /// Spectrum of `L` from the eigenvalues `μ = σ_A²` of `D Cᵀ C D`.
    pub fn spectrum(&self) -> SpectrumReport {
        let k = self.order;
        let sigma = &self.svd.sigma;
        let smax = sigma[0];
        let tol = smax * rank_tolerance(self.n, k);
        let singular = sigma.iter().any(|&s| s <= tol);
        let kept: Vec<f64> = sigma
            .iter()
            .map(|&s| if s > tol { s } else { 0.0 })
            .collect();
        let mut products: Vec<f64> = kept
            .iter()
            .flat_map(|&a| kept.iter().map(move |&b| a * b))
            .collect();
        products.sort_by(|a, b| b.total_cmp(a));
        let eigenvalues: Vec<f64> = kept.iter().map(|s| s * s).collect();

        let smin = sigma[sigma.len() - 1];
        let log10_condition = 2.0 * (smax.log10() - smin.log10());
        let c_svd = self.c.clone().singular_values();
        let c_max = c_svd.max();
        let c_min = c_svd.min();
        let log10_bound = 2.0 * (c_max.log10() - c_min.log10())
            + 2.0 * (k as f64).log10()
            + 2.0 * (k as f64 - 1.0) * self.rho.log10();
        SpectrumReport {
            singular_values: products,
            eigenvalues,
            condition_number: if singular {
                f64::INFINITY
            } else {
                10f64.powf(log10_condition)
            },
            log10_condition,
            numerically_singular: singular,
            log10_bound: Some(log10_bound),
        }
    }

    /// Eigenvalues of `Cᵀ C` (decreasing) with the same precision flag as
    /// [`MsrOperator::spectrum`].
    pub fn gram_spectrum(&self) -> SpectrumReport {
        let svd = sorted_svd(&self.c);
        let s = &svd.sigma;
        let tol = s[0] * rank_tolerance(self.n, self.order);
        let singular = s.iter().any(|&x| x <= tol);
        let eig: Vec<f64> = s
            .iter()
            .map(|&x| if x > tol { x * x } else { 0.0 })
            .collect();
        let log10_condition = 2.0 * (s[0].log10() - s[s.len() - 1].log10());
        SpectrumReport {
            singular_values: eig.clone(),
            eigenvalues: eig,
            condition_number: if singular {
                f64::INFINITY
            } else {
                10f64.powf(log10_condition)
            },
            log10_condition,
            numerically_singular: singular,
            log10_bound: None,
        }
    }

    /// Raw (unthresholded) squared singular values of `C` and of `C D`;
    /// entries below the rank tolerance are floating-point noise.
    pub fn raw_eigenvalues(&self) -> (Vec<f64>, Vec<f64>) {
        let c = sorted_svd(&self.c).sigma.iter().map(|s| s * s).collect();
        let dcd = self.svd.sigma.iter().map(|s| s * s).collect();
        (c, dcd)
    }
}

/// Singular values and conditioning of an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Decreasing, all `≥ 0`.
    pub singular_values: Vec<f64>,
    /// Eigenvalues of the underlying Gram matrix (`D Cᵀ C D` or `Cᵀ C`),
    /// decreasing; values below working precision are reported as 0.
    pub eigenvalues: Vec<f64>,
    /// `σ_max / σ_min`; infinite when numerically singular.
    pub condition_number: f64,
    /// `log10` of the condition number, computed in the log domain from the
    /// raw values even when the operator is flagged singular.
    pub log10_condition: f64,
    pub numerically_singular: bool,
    /// `log10(cond(C)² K² ρ^{2(K−1)})` for the operator `L`.
    pub log10_bound: Option<f64>,
}

impl SpectrumReport {
    pub fn bound_holds(&self) -> Option<bool> {
        self.log10_bound
            .map(|b| self.log10_condition <= b + 1e-9 * b.abs().max(1.0))
    }
}

pub fn apply_forward(m: &CgptMatrix, geom: &AcquisitionGeometry) -> Result<MsrMatrix> {
    MsrOperator::new(geom, m.order())?.forward(m)
}

pub fn pinv_apply(v: &MsrMatrix, geom: &AcquisitionGeometry, k: usize) -> Result<CgptMatrix> {
    MsrOperator::new(geom, k)?.pseudo_inverse(v)
}

pub fn fullview_pinv(v: &MsrMatrix, geom: &AcquisitionGeometry, k: usize) -> Result<CgptMatrix> {
    check_full_view(geom, k)?;
    MsrOperator::new(geom, k)?.fullview_pinv(geom, v)
}

/// Closed-form singular values of `L` for a uniform full-view array:
/// `λ_ab = N / (8π² ⌈a/2⌉⌈b/2⌉ ρ^{⌈a/2⌉+⌈b/2⌉})`, evaluated in the log
/// domain.
pub fn fullview_singular_values(n: usize, rho: f64, k: usize) -> Result<SpectrumReport> {
    check_order(n, k)?;
    full_view_alias_check(n, k)?;
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(Error::TargetNotEnclosed(rho));
    }
    let ln_rho = rho.ln();
    let base = (n as f64).ln() - (8.0 * PI * PI).ln();
    let mut values: Vec<f64> = (1..=2 * k)
        .flat_map(|a| (1..=2 * k).map(move |b| (a.div_ceil(2), b.div_ceil(2))))
        .map(|(ca, cb)| {
            let (ca, cb) = (ca as f64, cb as f64);
            (base - ca.ln() - cb.ln() - (ca + cb) * ln_rho).exp()
        })
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let kf = k as f64;
    let log10_condition = 2.0 * kf.log10() + 2.0 * (kf - 1.0) * rho.log10();
    let eigenvalues = (1..=2 * k)
        .map(|a| {
            let m = a.div_ceil(2) as f64;
            (n as f64 / 2.0) / (2.0 * PI * m * rho.powf(m)).powi(2)
        })
        .collect();
    Ok(SpectrumReport {
        singular_values: values,
        eigenvalues,
        condition_number: 10f64.powf(log10_condition),
        log10_condition,
        numerically_singular: false,
        log10_bound: Some(log10_condition),
    })
}

pub fn limitedview_spectrum(geom: &AcquisitionGeometry, k: usize) -> Result<SpectrumReport> {
    Ok(MsrOperator::new(geom, k)?.spectrum())
}
