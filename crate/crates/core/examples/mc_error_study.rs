//! Percent error of the sampled VI and PVI data terms as the sample size grows.

use nalgebra::DVector;
use pvi::polynomial::{design_matrix, generate_poly_data, mc_convergence_study, PolyDataGenSpec};
use pvi::GaussianDensity;

fn main() -> pvi::Result<()> {
    let obs = generate_poly_data(&PolyDataGenSpec::default(), 0)?;
    let a = design_matrix(obs.grid());
    let q = GaussianDensity::diagonal(DVector::zeros(2), &[1.0, 1.0])?;
    let n_list = [100, 1_000, 10_000, 100_000];
    let table = mc_convergence_study(&q, &a, obs.noise_std(), obs.data(), &n_list, 100, 0)?;
    println!("{:>8} {:>14} {:>14}", "n", "max |VI| %", "max |PVI| %");
    for n in n_list {
        println!("{n:>8} {:>14.4} {:>14.4}", table.max_vi_error(n), table.max_pvi_error(n));
    }
    Ok(())
}
