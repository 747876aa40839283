//! Scalar bijections between unconstrained and physical coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::GaussianDensity;
use crate::special::{std_normal_cdf, std_normal_invcdf, std_normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarTransform {
    Identity,
    /// `θ = exp(z)`, range `(0, ∞)`.
    LogExp,
    /// `θ = shift + Φ(z)`, range `(shift, shift + 1)`.
    ProbitShift {
        shift: f64,
    },
}

impl ScalarTransform {
    pub fn forward(&self, z: f64) -> f64 {
        match *self {
            ScalarTransform::Identity => z,
            ScalarTransform::LogExp => z.exp(),
            ScalarTransform::ProbitShift { shift } => shift + std_normal_cdf(z),
        }
    }

    /// Physical value and `dθ/dz` at `z`.
    pub fn apply(&self, z: f64) -> (f64, f64) {
        match *self {
            ScalarTransform::Identity => (z, 1.0),
            ScalarTransform::LogExp => {
                let e = z.exp();
                (e, e)
            }
            ScalarTransform::ProbitShift { shift } => (shift + std_normal_cdf(z), std_normal_pdf(z)),
        }
    }

    pub fn inverse(&self, theta: f64) -> Result<f64> {
        match *self {
            ScalarTransform::Identity => Ok(theta),
            ScalarTransform::LogExp => {
                if theta > 0.0 {
                    Ok(theta.ln())
                } else {
                    Err(Error::invalid(format!("log transform needs θ > 0, got {theta}")))
                }
            }
            ScalarTransform::ProbitShift { shift } => std_normal_invcdf(theta - shift),
        }
    }

    /// `E[T(z)]` for `z ~ N(mean, sd²)`.
    pub fn mean_under_normal(&self, mean: f64, sd: f64) -> f64 {
        match *self {
            ScalarTransform::Identity => mean,
            ScalarTransform::LogExp => (mean + 0.5 * sd * sd).exp(),
            ScalarTransform::ProbitShift { shift } => shift + std_normal_cdf(mean / (1.0 + sd * sd).sqrt()),
        }
    }

    /// Density in physical coordinates of `θ = T(z)` with `z ~ N(mean, sd²)`,
    /// evaluated at the point given by its unconstrained preimage `z`.
    pub fn pushforward_density(&self, z: f64, mean: f64, sd: f64) -> f64 {
        let u = (z - mean) / sd;
        let (_, jac) = self.apply(z);
        std_normal_pdf(u) / sd / jac
    }
}

/// Gaussian prior on unconstrained coordinates together with the map to
/// physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPrior {
    transforms: Vec<ScalarTransform>,
    gaussian: GaussianDensity,
}

impl TransformedPrior {
    pub fn new(transforms: Vec<ScalarTransform>, gaussian: GaussianDensity) -> Result<Self> {
        check_dim("prior transforms", gaussian.dim(), transforms.len())?;
        Ok(Self { transforms, gaussian })
    }

    pub fn identity(gaussian: GaussianDensity) -> Self {
        Self { transforms: vec![ScalarTransform::Identity; gaussian.dim()], gaussian }
    }

    pub fn dim(&self) -> usize {
        self.transforms.len()
    }

    pub fn transforms(&self) -> &[ScalarTransform] {
        &self.transforms
    }

    pub fn gaussian(&self) -> &GaussianDensity {
        &self.gaussian
    }

    /// Maps an unconstrained point to physical coordinates, writing the
    /// per-coordinate derivatives into `jac`.
    pub fn to_physical(&self, z: &[f64], theta: &mut [f64], jac: &mut [f64]) {
        for (k, t) in self.transforms.iter().enumerate() {
            let (v, d) = t.apply(z[k]);
            theta[k] = v;
            jac[k] = d;
        }
    }
}
