//! Exact Fourier-mode propagation on a periodic domain.
//!
//! A solution is represented by one-sided coefficients `ĉ_k`, `k = 0..K-1`,
//! and reconstructed as `ĉ_0 + 2·Re Σ_{k≥1} ĉ_k e^{i k_x x}` with
//! `k_x = 2πk/L`. Every model here is linear with constant coefficients, so
//! each mode evolves independently as `ĉ_k(t) = ĉ_k(0)·exp(t·E_k)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSetup {
    pub domain_length: f64,
    pub grid_size: usize,
    pub n_modes: usize,
    pub ic_center: f64,
    pub ic_width: f64,
}

impl Default for SpectralSetup {
    fn default() -> Self {
        Self { domain_length: 4.0, grid_size: 512, n_modes: 257, ic_center: 0.85, ic_width: 0.02 }
    }
}

impl SpectralSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.domain_length > 0.0) {
            return Err(Error::invalid("domain length must be positive"));
        }
        if self.grid_size < 2 || !self.grid_size.is_multiple_of(2) {
            return Err(Error::invalid("grid size must be even and at least 2"));
        }
        if self.n_modes == 0 || self.n_modes > self.grid_size / 2 + 1 {
            return Err(Error::invalid(format!("n_modes must lie in 1..={}", self.grid_size / 2 + 1)));
        }
        if !(self.ic_width > 0.0) {
            return Err(Error::invalid("initial-condition width must be positive"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.domain_length / self.grid_size as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_size).map(|m| m as f64 * self.dx()).collect()
    }

    /// `k_x = 2πk/L`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.domain_length
    }

    pub fn initial_condition(&self, x: f64) -> f64 {
        let u = (x - self.ic_center) / self.ic_width;
        (-0.5 * u * u).exp()
    }
}

/// One-sided Fourier coefficients of the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralIC {
    pub coeffs: Vec<Complex64>,
}

/// DFT coefficients `(1/N) Σ_m c_m e^{-2πikm/N}` of grid samples, truncated to
/// `n_modes`. When the Nyquist mode is retained it is halved, so that the
/// doubled one-sided reconstruction reproduces the grid values exactly.
pub fn ic_coeffs_from_samples(setup: &SpectralSetup, values: &[f64]) -> Result<SpectralIC> {
    setup.validate()?;
    let n = setup.grid_size;
    check_dim("initial-condition samples", n, values.len())?;
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let mut coeffs: Vec<Complex64> = buf[..setup.n_modes].iter().map(|c| c * scale).collect();
    coeffs[0].im = 0.0;
    if setup.n_modes == n / 2 + 1 {
        coeffs[n / 2] *= 0.5;
    }
    Ok(SpectralIC { coeffs })
}

pub fn compute_ic_coeffs(setup: &SpectralSetup) -> Result<SpectralIC> {
    let values: Vec<f64> = setup.grid().iter().map(|&x| setup.initial_condition(x)).collect();
    ic_coeffs_from_samples(setup, &values)
}

/// Per-mode evolution rate `E_k` (so that `ĉ_k(t) = ĉ_k(0)·e^{t E_k}`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeRate<'a> {
    /// `-ν_p k_x² - i u k_x`
    Ade { u: f64, nu_p: f64 },
    /// ADE plus `ν (i k_x)^α`
    Frade { u: f64, nu_p: f64, nu: f64, alpha: f64 },
    /// ADE plus a tabulated eigenvalue `λ_k`
    Spectrum { u: f64, nu_p: f64, lambda: &'a [Complex64] },
}

/// `(i k_x)^α` on the principal branch, `|k_x|^α e^{iαπ/2}` for `k_x > 0`.
pub fn fractional_symbol(kx: f64, alpha: f64) -> Complex64 {
    if kx == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(kx.powf(alpha), alpha * PI / 2.0)
}

impl ModeRate<'_> {
    pub fn validate(&self, n_modes: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            ModeRate::Ade { u, nu_p } => {
                if !finite(&[u, nu_p]) || nu_p < 0.0 {
                    return Err(Error::invalid(format!("invalid ADE parameters u={u}, nu_p={nu_p}")));
                }
            }
            ModeRate::Frade { u, nu_p, nu, alpha } => {
                if !finite(&[u, nu_p, nu, alpha]) || nu_p < 0.0 || nu < 0.0 {
                    return Err(Error::invalid(format!("invalid FRADE parameters u={u}, nu_p={nu_p}, nu={nu}")));
                }
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(Error::invalid(format!("fractional power must lie in (1, 2), got {alpha}")));
                }
            }
            ModeRate::Spectrum { u, nu_p, lambda } => {
                if !finite(&[u, nu_p]) || nu_p < 0.0 {
                    return Err(Error::invalid(format!("invalid parameters u={u}, nu_p={nu_p}")));
                }
                check_dim("dispersion spectrum", n_modes, lambda.len())?;
                if let Some(k) = lambda.iter().position(|l| l.re > 0.0) {
                    return Err(Error::invalid(format!("unstable spectrum: Re(lambda_{k}) > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn rate(&self, k: usize, kx: f64) -> Complex64 {
        let base = |u: f64, nu_p: f64| Complex64::new(-nu_p * kx * kx, -u * kx);
        match *self {
            ModeRate::Ade { u, nu_p } => base(u, nu_p),
            ModeRate::Frade { u, nu_p, nu, alpha } => base(u, nu_p) + nu * fractional_symbol(kx, alpha),
            ModeRate::Spectrum { u, nu_p, lambda } => base(u, nu_p) + lambda[k],
        }
    }
}

/// `ĉ_k(t) = ĉ_k·exp(t·E_k)` for every retained mode.
pub fn propagate(setup: &SpectralSetup, coeffs: &[Complex64], rate: &ModeRate, t: f64) -> Result<Vec<Complex64>> {
    check_dim("coefficients", setup.n_modes, coeffs.len())?;
    rate.validate(setup.n_modes)?;
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be non-negative, got {t}")));
    }
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| if k == 0 { *c } else { c * (rate.rate(k, setup.wavenumber(k)) * t).exp() })
        .collect())
}

/// Evaluates one-sided series at `n_out` equally spaced points
/// `x_j = j·L/n_out` (a stride of `N/n_out` on the solver grid).
///
/// Because `e^{i k_x x_j}` only depends on `k mod n_out`, the modes are folded
/// onto `n_out` bins and summed with a single inverse FFT.
#[derive(Clone)]
pub struct Synthesizer {
    n_out: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Synthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synthesizer").field("n_out", &self.n_out).finish()
    }
}

impl Synthesizer {
    pub fn new(setup: &SpectralSetup, n_out: usize) -> Result<Self> {
        setup.validate()?;
        if n_out == 0 || !setup.grid_size.is_multiple_of(n_out) {
            return Err(Error::invalid(format!("output count {n_out} must divide the grid size {}", setup.grid_size)));
        }
        Ok(Self { n_out, fft: FftPlanner::new().plan_fft_inverse(n_out) })
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// `Re[c_0 + 2 Σ_{k≥1} c_k e^{2πi k j / n_out}]` for `j = 0..n_out`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut bins = vec![Complex64::new(0.0, 0.0); self.n_out];
        bins[0] = Complex64::new(coeffs[0].re, 0.0);
        for (k, c) in coeffs.iter().enumerate().skip(1) {
            bins[k % self.n_out] += 2.0 * c;
        }
        self.fft.process(&mut bins);
        bins.iter().map(|b| b.re).collect()
    }
}

/// Reconstructs coefficients on the full solver grid.
pub fn reconstruct(setup: &SpectralSetup, coeffs: &[Complex64]) -> Result<Vec<f64>> {
    check_dim("coefficients", setup.n_modes, coeffs.len())?;
    Ok(Synthesizer::new(setup, setup.grid_size)?.synthesize(coeffs))
}

fn solve(setup: &SpectralSetup, rate: ModeRate, t: f64) -> Result<Vec<f64>> {
    let ic = compute_ic_coeffs(setup)?;
    let coeffs = propagate(setup, &ic.coeffs, &rate, t)?;
    reconstruct(setup, &coeffs)
}

/// Advection-diffusion solution on the full grid at time `t`.
pub fn ade_solution(u: f64, nu_p: f64, t: f64, setup: &SpectralSetup) -> Result<Vec<f64>> {
    solve(setup, ModeRate::Ade { u, nu_p }, t)
}

/// Fractional advection-diffusion solution on the full grid at time `t`.
pub fn frade_solution(u: f64, nu_p: f64, nu: f64, alpha: f64, t: f64, setup: &SpectralSetup) -> Result<Vec<f64>> {
    solve(setup, ModeRate::Frade { u, nu_p, nu, alpha }, t)
}

/// Solution of the data-generating model with eigenvalues `λ_k`.
pub fn datagen_solution(u: f64, nu_p: f64, lambda: &[Complex64], t: f64, setup: &SpectralSetup) -> Result<Vec<f64>> {
    solve(setup, ModeRate::Spectrum { u, nu_p, lambda }, t)
}
