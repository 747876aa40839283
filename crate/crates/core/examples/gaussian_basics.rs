//! Sampling, log-densities, KL and the prior transforms.

use nalgebra::{DMatrix, DVector};
use pvi::gaussian::{kl_gaussians, mvn_sample};
use pvi::rng::{standard_normal_matrix, stream};
use pvi::{GaussianDensity, ScalarTransform};

fn main() -> pvi::Result<()> {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
    let q = GaussianDensity::from_covariance(DVector::from_vec(vec![0.5, -1.0]), &cov)?;
    let p = GaussianDensity::standard(2)?;

    println!("log q(0, 0)   = {:.6}", q.logpdf(&[0.0, 0.0])?);
    println!("KL(q || N(0,I)) = {:.6}", kl_gaussians(&q, &p)?);

    let eps = standard_normal_matrix(&mut stream(0, 0), 20_000, 2);
    let draws = mvn_sample(&q, &eps)?;
    let mean = draws.row_mean();
    println!("sample mean   = [{:.3}, {:.3}]", mean[0], mean[1]);

    for t in [ScalarTransform::Identity, ScalarTransform::LogExp, ScalarTransform::ProbitShift { shift: 1.0 }] {
        println!("{t:?}: z = 0.3 -> theta = {:.6}", t.forward(0.3));
    }
    Ok(())
}
