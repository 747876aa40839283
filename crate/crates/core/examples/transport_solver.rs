//! Spectral solutions of the advection-diffusion and fractional models.

use pvi::transport::{ade_solution, datagen_solution, frade_solution, DispersionSpectrum, PowerLaw, SpectralSetup};

fn main() -> pvi::Result<()> {
    let setup = SpectralSetup::default();
    let spectrum = DispersionSpectrum::power_law(&setup, &PowerLaw::default())?;
    let t = 0.5;
    let truth = datagen_solution(1.0, 0.01, spectrum.lambda(), t, &setup)?;
    let ade = ade_solution(1.0, 0.01, t, &setup)?;
    let frade = frade_solution(1.0, 0.01, 0.05, 1.6, t, &setup)?;
    let peak =
        |v: &[f64]| v.iter().cloned().enumerate().fold((0, f64::MIN), |b, (i, x)| if x > b.1 { (i, x) } else { b });
    let x = setup.grid();
    for (name, v) in [("generator", &truth), ("ADE", &ade), ("FRADE", &frade)] {
        let (i, h) = peak(v);
        println!("{name:<10} peak {h:.4} at x = {:.4}, mass {:.6}", x[i], v.iter().sum::<f64>() * setup.dx());
    }
    Ok(())
}
