//! Gamma-family special functions and the power-exponential integral
//! `∫_{ℝⁿ} exp(-M|x|^q) dx = Γ(n/q + 1) ω_n M^{-n/q}`.
//!
//! Gamma and log-Gamma use a Lanczos approximation (g = 7, nine terms).
//! Digamma and Trigamma shift the argument above [`ASYMPTOTIC_CUTOFF`] with
//! the unit recurrence and then sum the Bernoulli asymptotic series.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest argument for which `Γ(x)` is finite in `f64`.
pub const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

const ASYMPTOTIC_CUTOFF: f64 = 12.0;

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("{name} requires x > 0, got {x}")));
    }
    Ok(())
}

/// Lanczos series for `ln Γ(x)`, valid for `x >= 0.5`.
fn lanczos_ln_gamma(x: f64) -> f64 {
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive("ln_gamma", x)?;
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x
        Ok(lanczos_ln_gamma(x + 1.0) - x.ln())
    } else {
        Ok(lanczos_ln_gamma(x))
    }
}

pub fn gamma(x: f64) -> Result<f64> {
    check_positive("gamma", x)?;
    if x > GAMMA_MAX_ARG {
        return Err(Error::Overflow(format!("gamma({x})")));
    }
    // exact on the positive integers up to 20!
    if x.fract() == 0.0 && x <= 21.0 {
        let mut f = 1.0;
        for k in 2..(x as u64) {
            f *= k as f64;
        }
        return Ok(f);
    }
    if x < 0.5 {
        return Ok(lanczos_ln_gamma(x + 1.0).exp() / x);
    }
    Ok(lanczos_ln_gamma(x).exp())
}

/// Digamma `Ψ(x) = d/dx ln Γ(x)`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    let mut shift = 0.0;
    let mut y = x;
    while y < ASYMPTOTIC_CUTOFF {
        shift += 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    let series = inv2
        * (-1.0 / 12.0
            + inv2
                * (1.0 / 120.0
                    + inv2 * (-1.0 / 252.0 + inv2 * (1.0 / 240.0 + inv2 * (-1.0 / 132.0)))));
    Ok(y.ln() - 0.5 / y + series - shift)
}

/// Trigamma `Ψ'(x) = Σ_{k≥0} (k + x)^{-2}`.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive("trigamma", x)?;
    let mut shift = 0.0;
    let mut y = x;
    while y < ASYMPTOTIC_CUTOFF {
        shift += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv2
            * inv
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))));
    Ok(series + shift)
}

/// `h(x, q) = x² + x − q − x²(x − q)Ψ'(x)`, strictly positive for `x, q > 0`.
pub fn trigamma_h(x: f64, q: f64) -> Result<f64> {
    check_positive("trigamma_h", x)?;
    check_positive("trigamma_h", q)?;
    Ok(x * x + x - q - x * x * (x - q) * trigamma(x)?)
}

/// Volume of the unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    (half * PI.ln() - lanczos_ln_gamma(half + 1.0)).exp()
}

/// Dimension together with the derived ball and sphere measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricContext {
    pub n: usize,
    pub omega_n: f64,
}

impl GeometricContext {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self {
            n,
            omega_n: unit_ball_volume(n),
        })
    }

    /// Surface area of the unit sphere, `n ω_n`.
    pub fn sphere_area(&self) -> f64 {
        self.n as f64 * self.omega_n
    }
}

/// `ln ∫_{ℝⁿ} exp(-M|x|^q) dx`.
pub fn ln_power_exponential_integral(n: usize, q: f64, m: f64) -> Result<f64> {
    if q.is_nan() || q <= 1.0 {
        return Err(Error::Domain(format!("exponent q must exceed 1, got {q}")));
    }
    if m.is_nan() || m <= 0.0 {
        return Err(Error::Domain(format!("coefficient M must be positive, got {m}")));
    }
    let ctx = GeometricContext::new(n)?;
    let s = n as f64 / q;
    Ok(ln_gamma(s + 1.0)? + ctx.omega_n.ln() - s * m.ln())
}

pub fn power_exponential_integral(n: usize, q: f64, m: f64) -> Result<f64> {
    Ok(ln_power_exponential_integral(n, q, m)?.exp())
}
