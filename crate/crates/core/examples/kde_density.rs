//! Scott bandwidths and the component-wise product-kernel density.

use pvi::kde::{componentwise_bandwidths, componentwise_kde_logpdf, KdeModel1D};
use pvi::rng::{standard_normal_matrix, standard_normal_vec, stream};

fn main() -> pvi::Result<()> {
    let samples = standard_normal_vec(&mut stream(1, 0), 500);
    let kde = KdeModel1D::scott(samples)?;
    println!("Scott bandwidth: {:.5}", kde.bandwidth());
    for z in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let exact = -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln();
        println!("z = {z:+.1}: kde {:.4}  exact {:.4}", kde.logpdf(z), exact);
    }

    let draws = standard_normal_matrix(&mut stream(1, 1), 100, 2);
    let h = componentwise_bandwidths(&draws)?;
    let v = componentwise_kde_logpdf(&draws, &[0.0, 0.0], &h)?;
    println!("component-wise log-density at the origin: {v:.4} (exact {:.4})", -(2.0 * std::f64::consts::PI).ln());
    Ok(())
}
