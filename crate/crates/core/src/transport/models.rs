//! Transport forward models, priors and synthetic data.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::GaussianDensity;
use crate::model::{ForwardModel, ObservationSet};
use crate::rng::{self, DATA_STREAM};
use crate::transform::{ScalarTransform, TransformedPrior};
use crate::transport::spectral::{
    compute_ic_coeffs, fractional_symbol, propagate, ModeRate, SpectralSetup, Synthesizer,
};
use crate::transport::spectrum::DispersionSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    /// Parameters `(u, ν_p)`.
    Ade,
    /// Parameters `(u, ν_p, ν, α)`.
    Frade,
}

impl TransportKind {
    pub fn dim(self) -> usize {
        match self {
            TransportKind::Ade => 2,
            TransportKind::Frade => 4,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            TransportKind::Ade => &["u", "nu_p"],
            TransportKind::Frade => &["u", "nu_p", "nu", "alpha"],
        }
    }
}

/// Concentration at `t` sampled at `n_obs` equally spaced points of the
/// periodic domain, with the exact Jacobian in physical parameters.
#[derive(Debug, Clone)]
pub struct TransportModel {
    kind: TransportKind,
    t: f64,
    ic: Vec<Complex64>,
    kx: Vec<f64>,
    ln_kx: Vec<f64>,
    synth: Synthesizer,
    grid: Vec<f64>,
}

impl TransportModel {
    pub fn new(kind: TransportKind, setup: &SpectralSetup, t: f64, n_obs: usize) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("time must be finite and non-negative, got {t}")));
        }
        let synth = Synthesizer::new(setup, n_obs)?;
        let ic = compute_ic_coeffs(setup)?.coeffs;
        let kx: Vec<f64> = (0..setup.n_modes).map(|k| setup.wavenumber(k)).collect();
        let ln_kx = kx.iter().map(|k| k.ln()).collect();
        let spacing = setup.domain_length / n_obs as f64;
        Ok(Self { kind, t, ic, kx, ln_kx, synth, grid: (0..n_obs).map(|j| j as f64 * spacing).collect() })
    }

    pub fn kind(&self) -> TransportKind {
        self.kind
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        check_dim("transport parameters", self.kind.dim(), theta.len())?;
        let bad = theta.iter().any(|v| !v.is_finite())
            || theta[1] < 0.0
            || (self.kind == TransportKind::Frade && (theta[2] < 0.0 || !(1.0..=2.0).contains(&theta[3])));
        if bad {
            return Err(Error::ModelOutput { theta: theta.to_vec() });
        }
        Ok(())
    }

    /// Propagated coefficients and, for each parameter, `t·∂E_k/∂θ`.
    fn modes(&self, theta: &[f64], with_derivs: bool) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
        let n = self.ic.len();
        let d = self.kind.dim();
        let t = self.t;
        let mut amp = vec![Complex64::new(0.0, 0.0); n];
        let mut derivs = if with_derivs { vec![vec![Complex64::new(0.0, 0.0); n]; d] } else { Vec::new() };
        amp[0] = self.ic[0];
        let (u, nu_p) = (theta[0], theta[1]);
        for k in 1..n {
            let kx = self.kx[k];
            let mut rate = Complex64::new(-nu_p * kx * kx, -u * kx);
            let mut frac = Complex64::new(0.0, 0.0);
            if self.kind == TransportKind::Frade {
                frac = fractional_symbol(kx, theta[3]);
                rate += theta[2] * frac;
            }
            let a = self.ic[k] * (rate * t).exp();
            amp[k] = a;
            if with_derivs {
                derivs[0][k] = a * Complex64::new(0.0, -t * kx);
                derivs[1][k] = a * (-t * kx * kx);
                if self.kind == TransportKind::Frade {
                    derivs[2][k] = a * t * frac;
                    derivs[3][k] = a * t * theta[2] * frac * Complex64::new(self.ln_kx[k], FRAC_PI_2);
                }
            }
        }
        (amp, derivs)
    }
}

impl ForwardModel for TransportModel {
    fn dim_params(&self) -> usize {
        self.kind.dim()
    }

    fn dim_obs(&self) -> usize {
        self.synth.n_out()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.check(theta)?;
        let (amp, _) = self.modes(theta, false);
        Ok(DVector::from_vec(self.synth.synthesize(&amp)))
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.evaluate_with_jacobian(theta)?.1)
    }

    fn evaluate_with_jacobian(&self, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check(theta)?;
        let (amp, derivs) = self.modes(theta, true);
        let value = DVector::from_vec(self.synth.synthesize(&amp));
        let n_obs = self.synth.n_out();
        let mut jac = DMatrix::zeros(n_obs, derivs.len());
        for (j, col) in derivs.iter().enumerate() {
            jac.set_column(j, &DVector::from_vec(self.synth.synthesize(col)));
        }
        Ok((value, jac))
    }
}

/// Exact Jacobian of the transport observable at `theta`.
pub fn transport_jacobian(
    kind: TransportKind,
    theta: &[f64],
    t: f64,
    setup: &SpectralSetup,
    n_obs: usize,
) -> Result<DMatrix<f64>> {
    TransportModel::new(kind, setup, t, n_obs)?.jacobian(theta)
}

/// Log-normal priors on `u`, `ν_p` and `ν`, a probit-shifted normal on `α`.
/// Spreads are standard deviations in the transformed coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportPriorSpec {
    pub u_median: f64,
    pub u_log_sd: f64,
    pub nu_p_median: f64,
    pub nu_p_log_sd: f64,
    pub nu_median: f64,
    pub nu_log_sd: f64,
    pub alpha_median: f64,
    pub alpha_probit_sd: f64,
}

impl Default for TransportPriorSpec {
    fn default() -> Self {
        Self {
            u_median: 1.0,
            u_log_sd: 0.5,
            nu_p_median: 0.05,
            nu_p_log_sd: 0.5,
            nu_median: 0.1,
            nu_log_sd: 0.5,
            alpha_median: 1.5,
            alpha_probit_sd: 0.8,
        }
    }
}

pub fn build_transport_prior(kind: TransportKind, spec: &TransportPriorSpec) -> Result<TransformedPrior> {
    let positive = [
        ("u_median", spec.u_median),
        ("nu_p_median", spec.nu_p_median),
        ("nu_median", spec.nu_median),
        ("u_log_sd", spec.u_log_sd),
        ("nu_p_log_sd", spec.nu_p_log_sd),
        ("nu_log_sd", spec.nu_log_sd),
        ("alpha_probit_sd", spec.alpha_probit_sd),
    ];
    for (key, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(format!("transport.prior.{key}"), "must be positive and finite"));
        }
    }
    if !(spec.alpha_median > 1.0 && spec.alpha_median < 2.0) {
        return Err(Error::config("transport.prior.alpha_median", "must lie in (1, 2)"));
    }
    let probit = ScalarTransform::ProbitShift { shift: 1.0 };
    let mut transforms = vec![ScalarTransform::LogExp, ScalarTransform::LogExp];
    let mut mean = vec![spec.u_median.ln(), spec.nu_p_median.ln()];
    let mut sd = vec![spec.u_log_sd, spec.nu_p_log_sd];
    if kind == TransportKind::Frade {
        transforms.extend([ScalarTransform::LogExp, probit]);
        mean.extend([spec.nu_median.ln(), probit.inverse(spec.alpha_median)?]);
        sd.extend([spec.nu_log_sd, spec.alpha_probit_sd]);
    }
    TransformedPrior::new(
        transforms,
        GaussianDensity::diagonal(DVector::from_vec(mean), &sd.iter().map(|s| s * s).collect::<Vec<_>>())?,
    )
}

/// Parameters of the data-generating transport model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportDataSpec {
    pub u: f64,
    pub nu_p: f64,
    pub t: f64,
    pub noise_std: f64,
    pub n_obs: usize,
}

impl Default for TransportDataSpec {
    fn default() -> Self {
        Self { u: 1.0, nu_p: 0.01, t: 0.5, noise_std: 0.005, n_obs: 64 }
    }
}

#[derive(Debug, Clone)]
pub struct TransportData {
    pub observations: ObservationSet,
    /// Noise-free data-generating concentration at the observation points.
    pub clean: Vec<f64>,
}

/// Observations of the data-generating solution at `n_obs` equally spaced
/// points (every `N/n_obs`-th grid node), with Gaussian noise from the data
/// stream of `seed`.
pub fn generate_transport_data(
    setup: &SpectralSetup,
    spectrum: &DispersionSpectrum,
    spec: &TransportDataSpec,
    seed: u64,
) -> Result<TransportData> {
    if !(spec.noise_std > 0.0) {
        return Err(Error::invalid("noise standard deviation must be positive"));
    }
    let synth = Synthesizer::new(setup, spec.n_obs)?;
    let ic = compute_ic_coeffs(setup)?;
    let rate = ModeRate::Spectrum { u: spec.u, nu_p: spec.nu_p, lambda: spectrum.lambda() };
    let coeffs = propagate(setup, &ic.coeffs, &rate, spec.t)?;
    let clean = synth.synthesize(&coeffs);
    let noise = rng::standard_normal_vec(&mut rng::stream(seed, DATA_STREAM), spec.n_obs);
    let data = clean.iter().zip(&noise).map(|(c, e)| c + spec.noise_std * e).collect();
    let spacing = setup.domain_length / spec.n_obs as f64;
    let grid = (0..spec.n_obs).map(|j| j as f64 * spacing).collect();
    Ok(TransportData { observations: ObservationSet::new(grid, data, spec.noise_std)?, clean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_jacobian;
    use crate::transport::spectral::{ade_solution, frade_solution};
    use crate::transport::spectrum::PowerLaw;

    #[test]
    fn model_matches_grid_solution() {
        let s = SpectralSetup::default();
        let ade = TransportModel::new(TransportKind::Ade, &s, 0.5, 64).unwrap();
        let full = ade_solution(1.2, 0.02, 0.5, &s).unwrap();
        let v = ade.evaluate(&[1.2, 0.02]).unwrap();
        for j in 0..64 {
            assert!((v[j] - full[8 * j]).abs() < 1e-14);
        }
        let fr = TransportModel::new(TransportKind::Frade, &s, 0.5, 64).unwrap();
        let full = frade_solution(1.2, 0.02, 0.1, 1.6, 0.5, &s).unwrap();
        let v = fr.evaluate(&[1.2, 0.02, 0.1, 1.6]).unwrap();
        for j in 0..64 {
            assert!((v[j] - full[8 * j]).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let s = SpectralSetup::default();
        let ade = TransportModel::new(TransportKind::Ade, &s, 0.5, 64).unwrap();
        check_jacobian(&ade, &[1.0, 0.01], 1e-6, 1e-5).unwrap();
        let fr = TransportModel::new(TransportKind::Frade, &s, 0.5, 64).unwrap();
        for theta in [[1.0, 0.01, 0.1, 1.5], [0.7, 0.05, 0.02, 1.1], [1.4, 0.003, 0.3, 1.9]] {
            check_jacobian(&fr, &theta, 1e-6, 1e-5).unwrap();
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let s = SpectralSetup::default();
        let fr = TransportModel::new(TransportKind::Frade, &s, 0.5, 64).unwrap();
        assert!(fr.evaluate(&[1.0, 0.01, 0.1, 2.5]).is_err());
        assert!(fr.evaluate(&[1.0, -0.01, 0.1, 1.5]).is_err());
        assert!(fr.evaluate(&[1.0, 0.01, 0.1]).is_err());
    }

    #[test]
    fn prior_medians() {
        let p = build_transport_prior(TransportKind::Frade, &TransportPriorSpec::default()).unwrap();
        let mut theta = [0.0; 4];
        let mut jac = [0.0; 4];
        p.to_physical(p.gaussian().mean().as_slice(), &mut theta, &mut jac);
        let expect = [1.0, 0.05, 0.1, 1.5];
        for (a, b) in theta.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(build_transport_prior(TransportKind::Ade, &TransportPriorSpec::default()).unwrap().dim(), 2);
        let bad = TransportPriorSpec { alpha_median: 2.0, ..Default::default() };
        assert!(build_transport_prior(TransportKind::Frade, &bad).unwrap_err().is_config_error());
    }

    #[test]
    fn data_generation_is_seeded() {
        let s = SpectralSetup::default();
        let sp = DispersionSpectrum::power_law(&s, &PowerLaw::default()).unwrap();
        let spec = TransportDataSpec::default();
        let a = generate_transport_data(&s, &sp, &spec, 3).unwrap();
        let b = generate_transport_data(&s, &sp, &spec, 3).unwrap();
        let c = generate_transport_data(&s, &sp, &spec, 4).unwrap();
        assert_eq!(a.observations.data(), b.observations.data());
        assert_ne!(a.observations.data(), c.observations.data());
        assert_eq!(a.clean, c.clean);
        assert_eq!(a.observations.len(), 64);
        assert!((a.observations.grid()[1] - 0.0625).abs() < 1e-15);
        let bad = TransportDataSpec { n_obs: 48, ..spec };
        assert!(generate_transport_data(&s, &sp, &bad, 0).is_err());
    }
}
