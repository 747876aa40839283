//! The forward-model contract and the observation container shared by every
//! inference problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A parameter-to-observable map with an exact Jacobian.
///
/// `theta` is always in physical coordinates. Implementations must be pure.
pub trait ForwardModel: Send + Sync {
    fn dim_params(&self) -> usize;

    fn dim_obs(&self) -> usize;

    fn evaluate(&self, theta: &[f64]) -> Result<DVector<f64>>;

    /// `dim_obs × dim_params` matrix of partial derivatives.
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>>;

    fn evaluate_with_jacobian(&self, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.evaluate(theta)?, self.jacobian(theta)?))
    }
}

/// Compares the model Jacobian at `theta` against central differences with
/// step `rel_step · max(|θₖ|, 1e-3)`. Returns the worst relative error, or an
/// error if it exceeds `tol`.
pub fn check_jacobian(model: &dyn ForwardModel, theta: &[f64], rel_step: f64, tol: f64) -> Result<f64> {
    check_dim("jacobian check parameters", model.dim_params(), theta.len())?;
    let jac = model.jacobian(theta)?;
    check_dim("jacobian rows", model.dim_obs(), jac.nrows())?;
    check_dim("jacobian cols", model.dim_params(), jac.ncols())?;
    let scale = jac.amax().max(1e-12);
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let h = rel_step * theta[k].abs().max(1e-3);
        let mut up = theta.to_vec();
        let mut dn = theta.to_vec();
        up[k] += h;
        dn[k] -= h;
        let fd = (model.evaluate(&up)? - model.evaluate(&dn)?) / (2.0 * h);
        let col_scale = jac.column(k).amax().max(scale * 1e-6);
        let err = (fd - jac.column(k)).amax() / col_scale;
        worst = worst.max(err);
    }
    if worst > tol {
        return Err(Error::invalid(format!(
            "model jacobian disagrees with finite differences (relative error {worst:.3e})"
        )));
    }
    Ok(worst)
}

/// One realization of observed data on a grid of locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    grid: Vec<f64>,
    data: Vec<f64>,
    noise_std: f64,
}

impl ObservationSet {
    pub fn new(grid: Vec<f64>, data: Vec<f64>, noise_std: f64) -> Result<Self> {
        check_dim("observation data", grid.len(), data.len())?;
        if grid.is_empty() {
            return Err(Error::Empty("observation grid"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("observation grid must be strictly increasing"));
        }
        if !(noise_std > 0.0) || !noise_std.is_finite() {
            return Err(Error::invalid(format!("noise std must be positive, got {noise_std}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation data"));
        }
        Ok(Self { grid, data, noise_std })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl ForwardModel for Quadratic {
        fn dim_params(&self) -> usize {
            2
        }
        fn dim_obs(&self) -> usize {
            3
        }
        fn evaluate(&self, t: &[f64]) -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![t[0] * t[0], t[0] * t[1], t[1].sin()]))
        }
        fn jacobian(&self, t: &[f64]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(3, 2, &[2.0 * t[0], 0.0, t[1], t[0], 0.0, t[1].cos()]))
        }
    }

    struct Wrong;

    impl ForwardModel for Wrong {
        fn dim_params(&self) -> usize {
            1
        }
        fn dim_obs(&self) -> usize {
            1
        }
        fn evaluate(&self, t: &[f64]) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, t[0] * t[0]))
        }
        fn jacobian(&self, t: &[f64]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_element(1, 1, t[0]))
        }
    }

    #[test]
    fn jacobian_check_accepts_and_rejects() {
        assert!(check_jacobian(&Quadratic, &[0.7, -1.3], 1e-6, 1e-6).unwrap() < 1e-6);
        assert!(check_jacobian(&Wrong, &[0.7], 1e-6, 1e-6).is_err());
    }

    #[test]
    fn observation_validation() {
        assert!(ObservationSet::new(vec![0.0, 1.0], vec![1.0, 2.0], 0.1).is_ok());
        assert!(ObservationSet::new(vec![1.0, 0.0], vec![1.0, 2.0], 0.1).is_err());
        assert!(ObservationSet::new(vec![0.0, 1.0], vec![1.0], 0.1).is_err());
        assert!(ObservationSet::new(vec![0.0, 1.0], vec![1.0, 2.0], 0.0).is_err());
    }
}
