//! Real CGPT matrices and MSR data matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Real `2K × 2K` matrix of contracted GPTs.
///
/// Block `(m, n)` (1-based orders) occupies rows `2m-2..2m`, columns
/// `2n-2..2n` and is laid out as `[[cc, cs], [sc, ss]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgptMatrix {
    order: usize,
    entries: DMatrix<f64>,
}

impl CgptMatrix {
    pub fn zeros(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder(order));
        }
        Ok(Self {
            order,
            entries: DMatrix::zeros(2 * order, 2 * order),
        })
    }

    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        let (r, c) = entries.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::mismatch(
                "square 2K x 2K matrix",
                format!("{r} x {c}"),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("CGPT matrix"));
        }
        Ok(Self {
            order: r / 2,
            entries,
        })
    }

    /// Builds from a row-major list of `(2K)²` values.
    pub fn from_row_major(order: usize, values: &[f64]) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder(order));
        }
        let dim = 2 * order;
        if values.len() != dim * dim {
            return Err(Error::mismatch(dim * dim, values.len()));
        }
        Self::from_entries(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.entries.transpose().as_slice().to_vec()
    }

    /// The `2×2` block `[[cc, cs], [sc, ss]]` for orders `m, n` (1-based).
    pub fn block(&self, m: usize, n: usize) -> [[f64; 2]; 2] {
        let (r, c) = (2 * (m - 1), 2 * (n - 1));
        let e = &self.entries;
        [
            [e[(r, c)], e[(r, c + 1)]],
            [e[(r + 1, c)], e[(r + 1, c + 1)]],
        ]
    }

    pub fn set_block(&mut self, m: usize, n: usize, block: [[f64; 2]; 2]) {
        let (r, c) = (2 * (m - 1), 2 * (n - 1));
        for (i, row) in block.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                self.entries[(r + i, c + j)] = *v;
            }
        }
    }

    /// Leading sub-matrix holding orders `1..=order`.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder(order));
        }
        if order > self.order {
            return Err(Error::mismatch(format!("order <= {}", self.order), order));
        }
        let d = 2 * order;
        Ok(Self {
            order,
            entries: self.entries.view((0, 0), (d, d)).into_owned(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Symmetric within `rel_tol` relative to the largest entry.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.entries.amax().max(f64::MIN_POSITIVE);
        (&self.entries - self.entries.transpose()).amax() <= rel_tol * scale
    }

    /// Relative Frobenius error of the orders `1..=orders` sub-block against
    /// `truth`.
    pub fn relative_error(&self, truth: &CgptMatrix, orders: usize) -> Result<f64> {
        let a = self.truncate(orders)?;
        let b = truth.truncate(orders)?;
        let denom = b.frobenius_norm();
        let diff = (a.entries - &b.entries).norm();
        Ok(if denom > 0.0 { diff / denom } else { diff })
    }
}

impl std::ops::Add<&CgptMatrix> for &CgptMatrix {
    type Output = CgptMatrix;

    fn add(self, rhs: &CgptMatrix) -> CgptMatrix {
        assert_eq!(self.order, rhs.order, "CGPT orders differ");
        CgptMatrix {
            order: self.order,
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl std::ops::Mul<f64> for &CgptMatrix {
    type Output = CgptMatrix;

    fn mul(self, rhs: f64) -> CgptMatrix {
        CgptMatrix {
            order: self.order,
            entries: &self.entries * rhs,
        }
    }
}

/// `N × N` multistatic response matrix, entry `(s, r)` = `V_sr`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrMatrix {
    values: DMatrix<f64>,
}

impl MsrMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(Error::mismatch(
                "square N x N matrix",
                format!("{} x {}", values.nrows(), values.ncols()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("MSR matrix"));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Row-major vectorisation (rows `s = 1..N` concatenated).
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.values.transpose().as_slice())
    }

    pub fn from_vector(n: usize, v: &DVector<f64>) -> Result<Self> {
        if v.len() != n * n {
            return Err(Error::mismatch(n * n, v.len()));
        }
        Self::new(DMatrix::from_row_slice(n, n, v.as_slice()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_layout() {
        let m = CgptMatrix::from_row_major(2, &(0..16).map(f64::from).collect::<Vec<_>>()).unwrap();
        assert_eq!(m.block(1, 2), [[2.0, 3.0], [6.0, 7.0]]);
        assert_eq!(m.block(2, 1), [[8.0, 9.0], [12.0, 13.0]]);
        assert_eq!(
            m.truncate(1).unwrap().to_row_major(),
            vec![0.0, 1.0, 4.0, 5.0]
        );
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(CgptMatrix::from_entries(DMatrix::zeros(3, 3)).is_err());
        assert!(CgptMatrix::zeros(0).is_err());
        assert!(MsrMatrix::new(DMatrix::zeros(2, 3)).is_err());
        let mut e = DMatrix::zeros(2, 2);
        e[(0, 1)] = f64::NAN;
        assert_eq!(
            CgptMatrix::from_entries(e).unwrap_err(),
            Error::NonFinite("CGPT matrix")
        );
    }

    #[test]
    fn vectorisation_is_row_major() {
        let v = MsrMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(v.to_vector().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(MsrMatrix::from_vector(2, &v.to_vector()).unwrap(), v);
    }
}
