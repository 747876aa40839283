//! Data-generating dispersion spectra `λ_k`.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::transport::spectral::SpectralSetup;

/// Synthetic power law `λ_k = -c |k_x|^β (cos(φk) - i sin(φk))` with the real
/// part clipped at zero.
///
/// The phase winds with the mode index, so the imaginary part changes sign
/// along the spectrum and no FRADE parameter reproduces it. With `φ = 0` and
/// `β = α` the spectrum matches the real part of `ν (i k_x)^α` for
/// `c = ν |cos(απ/2)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLaw {
    pub scale: f64,
    pub exponent: f64,
    pub phase: f64,
}

impl Default for PowerLaw {
    fn default() -> Self {
        Self { scale: 0.05, exponent: 1.6, phase: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSpectrum {
    lambda: Vec<Complex64>,
}

impl DispersionSpectrum {
    /// Validates `λ_0 = 0` and `Re λ_k ≤ 0`.
    pub fn new(lambda: Vec<Complex64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Empty("dispersion spectrum"));
        }
        if lambda.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
            return Err(Error::NonFinite("dispersion spectrum"));
        }
        if lambda[0] != Complex64::new(0.0, 0.0) {
            return Err(Error::invalid("lambda_0 must be zero"));
        }
        if let Some(k) = lambda.iter().position(|l| l.re > 0.0) {
            return Err(Error::invalid(format!("Re(lambda_{k}) must be non-positive")));
        }
        Ok(Self { lambda })
    }

    pub fn power_law(setup: &SpectralSetup, law: &PowerLaw) -> Result<Self> {
        setup.validate()?;
        if !(law.scale > 0.0) || !law.scale.is_finite() {
            return Err(Error::invalid("power-law scale must be positive"));
        }
        if !(law.exponent > 1.0 && law.exponent < 2.0) {
            return Err(Error::invalid("power-law exponent must lie in (1, 2)"));
        }
        if !(law.phase >= 0.0 && law.phase < FRAC_PI_2) {
            return Err(Error::invalid("power-law phase must lie in [0, pi/2)"));
        }
        let lambda = (0..setup.n_modes)
            .map(|k| {
                if k == 0 {
                    return Complex64::new(0.0, 0.0);
                }
                let mag = law.scale * setup.wavenumber(k).powf(law.exponent);
                let arg = law.phase * k as f64;
                Complex64::new((-mag * arg.cos()).min(0.0), mag * arg.sin())
            })
            .collect();
        Self::new(lambda)
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Two whitespace-separated columns, real and imaginary part, one line per
    /// mode. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, n_modes: usize) -> Result<Self> {
        let mut lambda = Vec::with_capacity(n_modes);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::invalid(format!("line {}: expected 2 columns, found {}", lineno + 1, fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 1)));
            lambda.push(Complex64::new(num(fields[0])?, num(fields[1])?));
        }
        check_dim("dispersion spectrum rows", n_modes, lambda.len())?;
        Self::new(lambda)
    }

    pub fn load(path: &Path, n_modes: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, n_modes).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Shortest round-trip formatting, so `parse(format())` is bit-exact.
    pub fn format(&self) -> String {
        let mut out = String::from("# re im\n");
        for l in &self.lambda {
            out.push_str(&format!("{:e} {:e}\n", l.re, l.im));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }
}
