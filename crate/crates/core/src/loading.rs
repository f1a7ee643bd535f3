use std::fmt;

use crate::tensor::{EigenDecomposition, Matrix};

/// Which estimator produced a [`LoadingEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PreAveraged,
    MaxEigenRatio,
    Projected,
    Hosvd,
    Hooi,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::PreAveraged => "pre",
            Method::MaxEigenRatio => "max-er",
            Method::Projected => "proj",
            Method::Hosvd => "hosvd",
            Method::Hooi => "hooi",
        })
    }
}

/// Orthonormal basis estimate for one mode's loading space.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingEstimate {
    pub mode: usize,
    /// `d_k × z` matrix with orthonormal columns.
    pub columns: Matrix,
    /// Leading eigenvalues of the matrix the columns were taken from.
    pub eigenvalues: Vec<f64>,
    pub method: Method,
}

impl LoadingEstimate {
    pub(crate) fn from_eigen(mode: usize, eig: &EigenDecomposition, z: usize, method: Method) -> Self {
        Self {
            mode,
            columns: eig.leading_vectors(z),
            eigenvalues: eig.leading_values(z).into_iter().map(|v| v.max(0.0)).collect(),
            method,
        }
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    /// `max |Q^T Q − I|`, the orthonormality defect.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.columns.transpose() * &self.columns;
        let n = g.nrows();
        (&g - Matrix::identity(n, n)).amax()
    }
}
