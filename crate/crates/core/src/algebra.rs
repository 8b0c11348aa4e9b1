//! Complex CGPTs and the action of rigid motions on them.
//!
//! For `u = (1, i)ᵀ` the complex CGPTs are `N1_mn = uᵀ M_mn u` and
//! `N2_mn = uᴴ M_mn u`. A target moved by `D' = z + R_θ D` satisfies
//! `N1(D') = Fᵀ N1(D) F` and `N2(D') = Fᴴ N2(D) F` with the upper triangular
//! `F_mn = C(n, m) z^{n−m} e^{imθ}`, `z = x + iy`.

use nalgebra::{Complex, DMatrix};

use crate::cgpt::CgptMatrix;
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Pair of complex `K × K` CGPT matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCgpt {
    pub n1: DMatrix<C64>,
    pub n2: DMatrix<C64>,
}

impl ComplexCgpt {
    pub fn order(&self) -> usize {
        self.n1.nrows()
    }
}

/// Translation `(x, y)` followed by nothing; rotation `theta` about the
/// origin applied first: `D' = z + R_θ D`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidMotion {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RigidMotion {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn z(&self) -> C64 {
        C64::new(self.x, self.y)
    }

    /// Motion equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &RigidMotion) -> RigidMotion {
        let z = next.z() + C64::from_polar(1.0, next.theta) * self.z();
        RigidMotion::new(z.re, z.im, self.theta + next.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

pub fn to_complex(m: &CgptMatrix) -> ComplexCgpt {
    let k = m.order();
    let mut n1 = DMatrix::zeros(k, k);
    let mut n2 = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let [[cc, cs], [sc, ss]] = m.block(a + 1, b + 1);
            n1[(a, b)] = C64::new(cc - ss, cs + sc);
            n2[(a, b)] = C64::new(cc + ss, cs - sc);
        }
    }
    ComplexCgpt { n1, n2 }
}

pub fn from_complex(nc: &ComplexCgpt) -> Result<CgptMatrix> {
    let k = nc.n1.nrows();
    if nc.n1.shape() != (k, k) || nc.n2.shape() != (k, k) {
        return Err(Error::mismatch(
            format!("two {k} x {k} complex matrices"),
            format!("{:?} and {:?}", nc.n1.shape(), nc.n2.shape()),
        ));
    }
    let mut m = CgptMatrix::zeros(k)?;
    for a in 0..k {
        for b in 0..k {
            let p = nc.n1[(a, b)];
            let q = nc.n2[(a, b)];
            let sum = p + q;
            let diff = p - q;
            m.set_block(
                a + 1,
                b + 1,
                [
                    [0.5 * sum.re, 0.5 * sum.im],
                    [0.5 * diff.im, -0.5 * diff.re],
                ],
            );
        }
    }
    if m.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("complex CGPT"));
    }
    Ok(m)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `F_mn = C(n, m) z^{n−m} e^{imθ}` for `m ≤ n`, zero below the diagonal.
/// `z⁰ = 1` also at `z = 0`.
pub fn motion_matrix(motion: &RigidMotion, k: usize) -> DMatrix<C64> {
    let z = motion.z();
    DMatrix::from_fn(k, k, |i, j| {
        let (m, n) = (i + 1, j + 1);
        if m > n {
            return C64::new(0.0, 0.0);
        }
        z.powu((n - m) as u32) * C64::from_polar(binomial(n, m), m as f64 * motion.theta)
    })
}

/// Partial derivatives of `F` with respect to `x`, `y` and `θ`.
pub fn motion_matrix_partials(motion: &RigidMotion, k: usize) -> [DMatrix<C64>; 3] {
    let z = motion.z();
    let dx = DMatrix::from_fn(k, k, |i, j| {
        let (m, n) = (i + 1, j + 1);
        if m >= n {
            return C64::new(0.0, 0.0);
        }
        let p = n - m;
        z.powu((p - 1) as u32) * C64::from_polar(binomial(n, m) * p as f64, m as f64 * motion.theta)
    });
    let dy = dx.map(|v| v * C64::i());
    let f = motion_matrix(motion, k);
    let dtheta = DMatrix::from_fn(k, k, |i, j| f[(i, j)] * C64::new(0.0, (i + 1) as f64));
    [dx, dy, dtheta]
}

fn congruence(n: &ComplexCgpt, f: &DMatrix<C64>) -> ComplexCgpt {
    ComplexCgpt {
        n1: f.transpose() * &n.n1 * f,
        n2: f.adjoint() * &n.n2 * f,
    }
}

/// CGPT of `z + R_θ D` from the CGPT of `D`.
pub fn transform_cgpt(m_d: &CgptMatrix, motion: &RigidMotion) -> Result<CgptMatrix> {
    let nc = to_complex(m_d);
    from_complex(&congruence(&nc, &motion_matrix(motion, m_d.order())))
}

/// `∂T/∂x`, `∂T/∂y`, `∂T/∂θ` applied to a CGPT.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPartials {
    pub dx: CgptMatrix,
    pub dy: CgptMatrix,
    pub dtheta: CgptMatrix,
}

/// The transformed CGPT together with its partial derivatives, sharing
/// one complex conversion.
pub fn transform_with_partials(
    m_d: &CgptMatrix,
    motion: &RigidMotion,
) -> Result<(CgptMatrix, TransformPartials)> {
    let nc = to_complex(m_d);
    transform_complex_with_partials(&nc, motion)
}

pub(crate) fn transform_complex_with_partials(
    nc: &ComplexCgpt,
    motion: &RigidMotion,
) -> Result<(CgptMatrix, TransformPartials)> {
    let k = nc.order();
    let f = motion_matrix(motion, k);
    let value = from_complex(&congruence(nc, &f))?;
    let n1f = &nc.n1 * &f;
    let n2f = &nc.n2 * &f;
    let ft = f.transpose();
    let fh = f.adjoint();
    let derive = |df: &DMatrix<C64>| -> Result<CgptMatrix> {
        let d = ComplexCgpt {
            n1: df.transpose() * &n1f + &ft * &nc.n1 * df,
            n2: df.adjoint() * &n2f + &fh * &nc.n2 * df,
        };
        from_complex(&d)
    };
    let [dx, dy, dth] = motion_matrix_partials(motion, k);
    Ok((
        value,
        TransformPartials {
            dx: derive(&dx)?,
            dy: derive(&dy)?,
            dtheta: derive(&dth)?,
        },
    ))
}

pub fn transform_partials(m_d: &CgptMatrix, motion: &RigidMotion) -> Result<TransformPartials> {
    Ok(transform_with_partials(m_d, motion)?.1)
}

/// Relative rigid motion between two complex CGPTs of the same target from
/// the order-1/order-2 ratio relations
/// `N_12/N_11 (cur) = 2w + e^{iφ} N_12/N_11 (prev)` for both `N1` and `N2`.
///
/// Returns `(Re w, Im w, φ)` with `φ ∈ (−π, π]`, where `w` is the
/// translation of the motion mapping the previous target onto the current
/// one.
pub fn first_order_estimate(prev: &ComplexCgpt, cur: &ComplexCgpt) -> Result<RigidMotion> {
    if prev.order() < 2 || cur.order() < 2 {
        return Err(Error::DegenerateRatios("needs CGPTs of order >= 2"));
    }
    let (r1p, r2p) = ratios(prev)?;
    let (r1c, r2c) = ratios(cur)?;
    let dp = r1p - r2p;
    let dc = r1c - r2c;
    let scale = dp
        .norm()
        .max(dc.norm())
        .max(r1p.norm())
        .max(f64::MIN_POSITIVE);
    if dp.norm() <= 1e-12 * scale.max(1.0) || dc.norm() <= 1e-12 * scale.max(1.0) {
        return Err(Error::DegenerateRatios(
            "N1 and N2 ratios coincide; rotation is not identifiable",
        ));
    }
    let phi = (dc / dp).arg();
    let w = (r1c - C64::from_polar(1.0, phi) * r1p) * 0.5;
    Ok(RigidMotion::new(w.re, w.im, phi))
}

fn ratios(n: &ComplexCgpt) -> Result<(C64, C64)> {
    let scale =
        n.n1.iter()
            .chain(n.n2.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max);
    let tiny = 1e-12 * scale;
    if scale == 0.0 || n.n1[(0, 0)].norm() <= tiny {
        return Err(Error::DegenerateRatios("N1_11 vanishes"));
    }
    if n.n2[(0, 0)].norm() <= tiny {
        return Err(Error::DegenerateRatios("N2_11 vanishes"));
    }
    Ok((n.n1[(0, 1)] / n.n1[(0, 0)], n.n2[(0, 1)] / n.n2[(0, 0)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_cgpt(k: usize, rng: &mut ChaCha8Rng, symmetric: bool) -> CgptMatrix {
        let d = 2 * k;
        let e = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let e = if symmetric { &e + e.transpose() } else { e };
        CgptMatrix::from_entries(e).unwrap()
    }

    #[test]
    fn complex_of_simple_blocks() {
        let zero = to_complex(&CgptMatrix::zeros(2).unwrap());
        assert!(zero
            .n1
            .iter()
            .chain(zero.n2.iter())
            .all(|v| v.norm() == 0.0));

        let mut m = CgptMatrix::zeros(1).unwrap();
        m.set_block(1, 1, [[1.0, 0.0], [0.0, 1.0]]);
        let nc = to_complex(&m);
        assert_eq!(nc.n1[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(nc.n2[(0, 0)], C64::new(2.0, 0.0));
    }

    #[test]
    fn from_complex_examples() {
        let nc = ComplexCgpt {
            n1: DMatrix::zeros(2, 2),
            n2: DMatrix::from_diagonal_element(2, 2, C64::new(3.0, 0.0)),
        };
        let m = from_complex(&nc).unwrap();
        assert_eq!(m.block(2, 2), [[1.5, 0.0], [0.0, 1.5]]);
        assert_eq!(m.block(1, 2), [[0.0, 0.0], [0.0, 0.0]]);

        let i = C64::i();
        let nc = ComplexCgpt {
            n1: DMatrix::from_element(1, 1, i),
            n2: DMatrix::from_element(1, 1, i),
        };
        assert_eq!(
            from_complex(&nc).unwrap().block(1, 1),
            [[0.0, 1.0], [0.0, 0.0]]
        );
    }

    #[test]
    fn complex_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_cgpt(4, &mut rng, false);
            let back = from_complex(&to_complex(&m)).unwrap();
            assert!((back.entries() - m.entries()).amax() < 1e-13);
        }
    }

    #[test]
    fn motion_matrix_examples() {
        let id = motion_matrix(&RigidMotion::identity(), 4);
        assert_eq!(id, DMatrix::identity(4, 4));

        let rot = motion_matrix(&RigidMotion::new(0.0, 0.0, 0.7), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j {
                    C64::from_polar(1.0, (i + 1) as f64 * 0.7)
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((rot[(i, j)] - expected).norm() < 1e-15);
            }
        }

        let shift = motion_matrix(&RigidMotion::new(1.0, 0.0, 0.0), 2);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]).map(C64::from);
        assert_eq!(shift, expected);
    }

    #[test]
    fn identity_motion_leaves_cgpt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_cgpt(3, &mut rng, false);
        let t = transform_cgpt(&m, &RigidMotion::identity()).unwrap();
        assert!((t.entries() - m.entries()).amax() < 1e-14);
    }

    /// The real-arithmetic form with `J = U F`:
    /// `cc = Re Jᵀ M Re J`, `cs = Re Jᵀ M Im J`, `sc = Im Jᵀ M Re J`,
    /// `ss = Im Jᵀ M Im J`.
    fn transform_via_j(m: &CgptMatrix, motion: &RigidMotion) -> CgptMatrix {
        let k = m.order();
        let mut u = DMatrix::<C64>::zeros(2 * k, k);
        for j in 0..k {
            u[(2 * j, j)] = C64::new(1.0, 0.0);
            u[(2 * j + 1, j)] = C64::i();
        }
        let jm = u * motion_matrix(motion, k);
        let re = jm.map(|v| v.re);
        let im = jm.map(|v| v.im);
        let e = m.entries();
        let cc = re.transpose() * e * &re;
        let cs = re.transpose() * e * &im;
        let sc = im.transpose() * e * &re;
        let ss = im.transpose() * e * &im;
        let mut out = CgptMatrix::zeros(k).unwrap();
        for a in 0..k {
            for b in 0..k {
                out.set_block(
                    a + 1,
                    b + 1,
                    [[cc[(a, b)], cs[(a, b)]], [sc[(a, b)], ss[(a, b)]]],
                );
            }
        }
        out
    }

    #[test]
    fn complex_route_matches_real_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_cgpt(4, &mut rng, false);
            let motion = RigidMotion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-PI..PI),
            );
            let a = transform_cgpt(&m, &motion).unwrap();
            let b = transform_via_j(&m, &motion);
            assert!((a.entries() - b.entries()).amax() < 1e-11 * b.entries().amax().max(1.0));
        }
    }

    #[test]
    fn translations_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_cgpt(3, &mut rng, true);
        let z1 = RigidMotion::new(0.3, -0.4, 0.0);
        let z2 = RigidMotion::new(-0.2, 0.9, 0.0);
        let two = transform_cgpt(&transform_cgpt(&m, &z1).unwrap(), &z2).unwrap();
        let one = transform_cgpt(&m, &RigidMotion::new(0.1, 0.5, 0.0)).unwrap();
        assert!((two.entries() - one.entries()).amax() < 1e-10);
    }

    #[test]
    fn rotation_of_disk_like_order_one_block() {
        // N1 = 0 and N2 diagonal: the order-1 block commutes with rotations.
        let mut m = CgptMatrix::zeros(3).unwrap();
        for k in 1..=3 {
            let v = 2.0 * PI * k as f64;
            m.set_block(k, k, [[v, 0.0], [0.0, v]]);
        }
        let shifted = transform_cgpt(&m, &RigidMotion::new(0.4, -0.2, 0.0)).unwrap();
        let rotated = transform_cgpt(&shifted, &RigidMotion::new(0.0, 0.0, 1.1)).unwrap();
        let a = shifted.block(1, 1);
        let b = rotated.block(1, 1);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partials_at_origin_only_first_superdiagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_cgpt(2, &mut rng, true);
        let [dx, _, _] = motion_matrix_partials(&RigidMotion::identity(), 2);
        assert_eq!(dx[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(dx[(1, 1)], C64::new(0.0, 0.0));
        assert_eq!(dx[(1, 0)], C64::new(0.0, 0.0));
        assert_eq!(dx[(0, 1)], C64::new(2.0, 0.0));
        let p = transform_partials(&m, &RigidMotion::identity()).unwrap();
        assert!(p.dx.frobenius_norm() > 0.0);
    }

    #[test]
    fn first_order_estimate_identity_and_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_cgpt(2, &mut rng, true);
        let nc = to_complex(&m);
        let est = first_order_estimate(&nc, &nc).unwrap();
        assert!(est.x.abs() < 1e-12 && est.y.abs() < 1e-12 && est.theta.abs() < 1e-12);

        let mut disk = CgptMatrix::zeros(2).unwrap();
        disk.set_block(1, 1, [[1.0, 0.0], [0.0, 1.0]]);
        disk.set_block(2, 2, [[2.0, 0.0], [0.0, 2.0]]);
        let d = to_complex(&disk);
        assert!(matches!(
            first_order_estimate(&d, &d),
            Err(Error::DegenerateRatios(_))
        ));
    }
}
