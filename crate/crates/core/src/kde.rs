//! One-dimensional Gaussian KDE and its component-wise product form.
//!
//! The likelihood-free loss treats each observed component independently:
//! the log predictive density of a data vector is the sum of per-component
//! 1-D KDE log-densities, each with its own Scott bandwidth.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::special::HALF_LN_2PI;

/// Scott's rule for a single component: `σ̂ · n^(-1/5)`.
pub fn scott_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("bandwidth estimation needs at least 2 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Degenerate("zero sample variance, predictive has collapsed".into()));
    }
    Ok(var.sqrt() * nf.powf(-0.2))
}

/// Log-density of the KDE at `z`. When `grad_samples` is provided it receives
/// `∂/∂sᵢ` for every sample; the return also carries `∂/∂z`.
fn log_density_with_grads(samples: &[f64], bandwidth: f64, z: f64, grad_samples: Option<&mut [f64]>) -> (f64, f64) {
    let inv_h = 1.0 / bandwidth;
    let mut max = f64::NEG_INFINITY;
    for &s in samples {
        let u = (z - s) * inv_h;
        max = max.max(-0.5 * u * u);
    }
    let mut total = 0.0;
    for &s in samples {
        let u = (z - s) * inv_h;
        total += (-0.5 * u * u - max).exp();
    }
    let n = samples.len() as f64;
    let value = max + total.ln() - n.ln() - bandwidth.ln() - HALF_LN_2PI;

    // softmax weights wᵢ; ∂/∂sᵢ = wᵢ uᵢ / h and ∂/∂z = -Σ of those.
    let mut grad_z = 0.0;
    match grad_samples {
        Some(out) => {
            for (g, &s) in out.iter_mut().zip(samples) {
                let u = (z - s) * inv_h;
                let w = (-0.5 * u * u - max).exp() / total;
                *g = w * u * inv_h;
                grad_z -= *g;
            }
        }
        None => {
            for &s in samples {
                let u = (z - s) * inv_h;
                let w = (-0.5 * u * u - max).exp() / total;
                grad_z -= w * u * inv_h;
            }
        }
    }
    (value, grad_z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel1D {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl KdeModel1D {
    /// KDE with Scott's-rule bandwidth.
    pub fn scott(samples: Vec<f64>) -> Result<Self> {
        let bandwidth = scott_bandwidth(&samples)?;
        Ok(Self { samples, bandwidth })
    }

    /// KDE with an explicit bandwidth. A single sample is allowed here.
    pub fn with_bandwidth(samples: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("kde samples"));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("kde samples"));
        }
        Ok(Self { samples, bandwidth })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn logpdf(&self, z: f64) -> f64 {
        kde_logpdf_1d(self, z)
    }
}

pub fn kde_logpdf_1d(m: &KdeModel1D, z: f64) -> f64 {
    log_density_with_grads(&m.samples, m.bandwidth, z, None).0
}

pub fn kde_logpdf_grad_z(m: &KdeModel1D, z: f64) -> f64 {
    log_density_with_grads(&m.samples, m.bandwidth, z, None).1
}

pub fn kde_logpdf_grad_samples(m: &KdeModel1D, z: f64) -> Vec<f64> {
    let mut g = vec![0.0; m.samples.len()];
    log_density_with_grads(&m.samples, m.bandwidth, z, Some(&mut g));
    g
}

/// Per-component Scott bandwidths of the columns of an `n × d` sample matrix.
pub fn componentwise_bandwidths(sample_matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..sample_matrix.ncols())
        .map(|j| {
            scott_bandwidth(sample_matrix.column(j).as_slice()).map_err(|e| match e {
                Error::Degenerate(msg) => Error::Degenerate(format!("component {j}: {msg}")),
                other => other,
            })
        })
        .collect()
}

fn check_componentwise(sample_matrix: &DMatrix<f64>, z: &[f64], bandwidths: &[f64]) -> Result<()> {
    if sample_matrix.nrows() < 2 {
        return Err(Error::Degenerate("component-wise kde needs n >= 2".into()));
    }
    check_dim("kde evaluation point", sample_matrix.ncols(), z.len())?;
    check_dim("kde bandwidths", sample_matrix.ncols(), bandwidths.len())?;
    if bandwidths.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::invalid("bandwidths must be positive"));
    }
    Ok(())
}

/// `Σⱼ log KDEⱼ(zⱼ)`: the factorized product-kernel approximation.
pub fn componentwise_kde_logpdf(sample_matrix: &DMatrix<f64>, z: &[f64], bandwidths: &[f64]) -> Result<f64> {
    check_componentwise(sample_matrix, z, bandwidths)?;
    Ok((0..z.len())
        .map(|j| log_density_with_grads(sample_matrix.column(j).as_slice(), bandwidths[j], z[j], None).0)
        .sum())
}

/// Component-wise log-density together with its gradient with respect to
/// every entry of the sample matrix (bandwidths held constant).
pub fn componentwise_kde_logpdf_with_grad(
    sample_matrix: &DMatrix<f64>,
    z: &[f64],
    bandwidths: &[f64],
) -> Result<(f64, DMatrix<f64>)> {
    check_componentwise(sample_matrix, z, bandwidths)?;
    let mut grad = DMatrix::zeros(sample_matrix.nrows(), sample_matrix.ncols());
    let mut total = 0.0;
    for j in 0..z.len() {
        let col = sample_matrix.column(j);
        let mut gcol = grad.column_mut(j);
        let (v, _) = log_density_with_grads(col.as_slice(), bandwidths[j], z[j], Some(gcol.as_mut_slice()));
        total += v;
    }
    Ok((total, grad))
}
