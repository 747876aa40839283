use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::GaussianDensity;

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

/// Derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Unconstrained coordinates of a Gaussian variational density.
///
/// The effective Cholesky factor has `softplus(raw_factor[i,i])` on the
/// diagonal and copies the strictly-lower entries unchanged. The same shape
/// is used for gradients with respect to these coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub mean: DVector<f64>,
    pub raw_factor: DMatrix<f64>,
}

impl VariationalState {
    pub fn zeros(d: usize) -> Self {
        Self { mean: DVector::zeros(d), raw_factor: DMatrix::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of free coordinates: `d + d(d+1)/2`.
    pub fn num_params(&self) -> usize {
        let d = self.dim();
        d + d * (d + 1) / 2
    }

    pub fn effective_factor(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                softplus(self.raw_factor[(i, i)])
            } else if i > j {
                self.raw_factor[(i, j)]
            } else {
                0.0
            }
        })
    }

    pub fn to_gaussian(&self) -> Result<GaussianDensity> {
        GaussianDensity::new(self.mean.clone(), self.effective_factor())
    }

    /// Inverse of [`to_gaussian`](Self::to_gaussian).
    pub fn from_gaussian(g: &GaussianDensity) -> Self {
        let d = g.dim();
        let l = g.chol();
        let raw = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                softplus_inv(l[(i, i)])
            } else if i > j {
                l[(i, j)]
            } else {
                0.0
            }
        });
        Self { mean: g.mean().clone(), raw_factor: raw }
    }

    /// Mean first, then the lower triangle row by row.
    pub fn to_flat(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(self.mean.iter());
        for i in 0..d {
            for j in 0..=i {
                out.push(self.raw_factor[(i, j)]);
            }
        }
        out
    }

    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        let mut s = Self::zeros(d);
        if flat.len() != s.num_params() {
            return Err(Error::DimensionMismatch {
                what: "flat variational state",
                expected: s.num_params(),
                got: flat.len(),
            });
        }
        s.mean.copy_from_slice(&flat[..d]);
        let mut k = d;
        for i in 0..d {
            for j in 0..=i {
                s.raw_factor[(i, j)] = flat[k];
                k += 1;
            }
        }
        Ok(s)
    }
}

/// `N(0, I)` on the unconstrained coordinates.
pub fn init_state(d: usize) -> Result<VariationalState> {
    if d < 1 {
        return Err(Error::invalid("variational dimension must be at least 1"));
    }
    let mut s = VariationalState::zeros(d);
    let diag = softplus_inv(1.0);
    for i in 0..d {
        s.raw_factor[(i, i)] = diag;
    }
    Ok(s)
}
