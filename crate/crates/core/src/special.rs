//! Standard-normal distribution functions.
//!
//! `Φ` is evaluated through `erf`/`erfc`: a positive-term series below
//! `|x|/√2 = 2.5` and a Lentz continued fraction above it. Both branches are
//! accurate to roughly machine precision (relative) over the whole real line.
//! The inverse uses Acklam's rational approximation followed by one Newton
//! step on `Φ`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 2.5;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
/// `ln(2π) / 2`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `erf(x)` for `0 <= x < SERIES_LIMIT`.
fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    2.0 * FRAC_1_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x)` for `x >= SERIES_LIMIT` by modified Lentz on
/// `x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))`.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI * (-x * x).exp() / f
}

pub fn erf(x: f64) -> f64 {
    let a = x.abs();
    let v = if a < SERIES_LIMIT { erf_series(a) } else { 1.0 - erfc_continued_fraction(a) };
    v.copysign(x)
}

pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_LIMIT {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Standard-normal density `φ(x)`.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - HALF_LN_2PI).exp()
}

/// Standard-normal CDF `Φ(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let a = x.abs() * FRAC_1_SQRT_2;
    if a < SERIES_LIMIT {
        let e = erf_series(a);
        if x >= 0.0 {
            0.5 * (1.0 + e)
        } else {
            0.5 * (1.0 - e)
        }
    } else {
        let c = erfc_continued_fraction(a);
        if x >= 0.0 {
            1.0 - 0.5 * c
        } else {
            0.5 * c
        }
    }
}

// Acklam's coefficients.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
const P_LOW: f64 = 0.024_25;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Standard-normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn std_normal_invcdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("normal quantile requires p in (0, 1), got {p}")));
    }
    let x = acklam(p);
    let density = std_normal_pdf(x);
    if density == 0.0 {
        return Ok(x);
    }
    Ok(x - (std_normal_cdf(x) - p) / density)
}
