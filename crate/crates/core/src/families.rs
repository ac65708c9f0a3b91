//! Closed-form test families.
//!
//! | kind              | exponent                                   |
//! |-------------------|--------------------------------------------|
//! | `ExtremizerHc`    | `C - k |x-x0|^{p'}/p'`, `k = ((β-α)/(βt))^{p'-1}` |
//! | `PowerHc`         | `-((p')^{-p'} + ε) |x|^{p'}`                |
//! | `StretchLsi`      | `log f_ε = -|x|^{p'-ε}/p`                  |
//! | `GaussQuadratic`  | `-ε |x|²`                                  |
//! | `GaussLinear`     | `<x, x0> + C0`                             |
//!
//! `StretchLsi` samples `log f` (the LSI input); the others sample the HC
//! exponent `g`.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::{hybrid_grid, ClosureField, ClosureRadial, Func, GridFunction, RadialProfile, Tail};
use crate::quad::GaussLegendre;
use crate::specfun::{digamma, gamma, ln_gamma, trigamma_h, unit_ball_volume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    ExtremizerHc {
        n: usize,
        p: f64,
        alpha: f64,
        beta: f64,
        t: f64,
        #[serde(default)]
        c: f64,
        #[serde(default)]
        x0: [f64; 2],
    },
    PowerHc {
        n: usize,
        p: f64,
        eps: f64,
    },
    StretchLsi {
        n: usize,
        p: f64,
        eps: f64,
    },
    GaussQuadratic {
        n: usize,
        eps: f64,
    },
    GaussLinear {
        n: usize,
        #[serde(default)]
        x0: [f64; 2],
        #[serde(default)]
        c0: f64,
    },
}

/// Where a family gets sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "snake_case")]
pub enum GridSpec {
    /// Hybrid radial grid; `r_max = 0` picks a family-specific radius.
    Radial { r_max: f64, nodes: usize },
    /// Uniform Cartesian grid on `[-half_width, half_width]^n`.
    Cartesian { half_width: f64, nodes: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Radial {
            r_max: 0.0,
            nodes: 4096,
        }
    }
}

impl GridSpec {
    /// Radial default for radial families; otherwise a Cartesian box with
    /// spacing 0.025 in 1D and 0.2 in 2D, wide enough that truncation stays
    /// below 1e-12 for the built-in families.
    pub fn for_family(f: &Family) -> Self {
        if f.is_radial() {
            GridSpec::default()
        } else if f.n() == 1 {
            GridSpec::Cartesian { half_width: 12.0, nodes: 961 }
        } else {
            GridSpec::Cartesian { half_width: 12.0, nodes: 121 }
        }
    }
}

fn conj(p: f64) -> f64 {
    p / (p - 1.0)
}

fn invalid(msg: String) -> Error {
    Error::InvalidParams(msg)
}

/// `Γ(n/p'+1) ω_n`, the recurring normalisation.
fn gamma_omega(n: usize, pc: f64) -> f64 {
    gamma(n as f64 / pc + 1.0).unwrap_or(f64::INFINITY) * unit_ball_volume(n)
}

impl Family {
    pub fn n(&self) -> usize {
        match *self {
            Family::ExtremizerHc { n, .. }
            | Family::PowerHc { n, .. }
            | Family::StretchLsi { n, .. }
            | Family::GaussQuadratic { n, .. }
            | Family::GaussLinear { n, .. } => n,
        }
    }

    /// Exponent `p` of the cost; Gaussian families use `p = 2`.
    pub fn p(&self) -> f64 {
        match *self {
            Family::ExtremizerHc { p, .. } | Family::PowerHc { p, .. } | Family::StretchLsi { p, .. } => p,
            Family::GaussQuadratic { .. } | Family::GaussLinear { .. } => 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(invalid("dimension must be at least 1".into()));
        }
        let p = self.p();
        if !(p > 1.0) {
            return Err(invalid(format!("p must exceed 1, got {p}")));
        }
        let pc = conj(p);
        match *self {
            Family::ExtremizerHc {
                alpha, beta, t, x0, ..
            } => {
                if !(alpha > 0.0 && beta > alpha && t > 0.0) {
                    return Err(invalid(format!(
                        "need 0 < alpha < beta and t > 0, got ({alpha}, {beta}, {t})"
                    )));
                }
                if n > 2 && x0 != [0.0, 0.0] {
                    return Err(invalid("translated members need n <= 2".into()));
                }
            }
            Family::PowerHc { eps, .. } => {
                let hi = 1.0 / pc - pc.powf(-pc);
                if !(eps >= 0.0 && eps < hi) {
                    return Err(invalid(format!("PowerHc needs 0 <= eps < {hi}, got {eps}")));
                }
            }
            Family::StretchLsi { eps, .. } => {
                if !(eps >= 0.0 && eps < pc - 1.0) {
                    return Err(invalid(format!("StretchLsi needs 0 <= eps < {}, got {eps}", pc - 1.0)));
                }
            }
            Family::GaussQuadratic { eps, .. } => {
                if !(eps >= 0.0 && eps < 0.25) {
                    return Err(invalid(format!("GaussQuadratic needs 0 <= eps < 1/4, got {eps}")));
                }
            }
            Family::GaussLinear { x0, .. } => {
                if n > 2 && x0 != [0.0, 0.0] {
                    return Err(invalid("tilted members need n <= 2".into()));
                }
            }
        }
        Ok(())
    }

    /// Radially symmetric about the origin.
    pub fn is_radial(&self) -> bool {
        match *self {
            Family::ExtremizerHc { x0, .. } | Family::GaussLinear { x0, .. } => x0 == [0.0, 0.0],
            _ => true,
        }
    }

    /// `(coefficient, power, centre, constant)` for power-type exponents
    /// `constant - coefficient |x - centre|^power`; `None` for the linear family.
    fn power_form(&self) -> Option<(f64, f64, [f64; 2], f64)> {
        let pc = conj(self.p());
        match *self {
            Family::ExtremizerHc {
                p,
                alpha,
                beta,
                t,
                c,
                x0,
                ..
            } => {
                let k = ((beta - alpha) / (beta * t)).powf(conj(p) - 1.0);
                Some((k / conj(p), conj(p), x0, c))
            }
            Family::PowerHc { eps, .. } => Some((pc.powf(-pc) + eps, pc, [0.0; 2], 0.0)),
            Family::StretchLsi { p, eps, .. } => Some((1.0 / p, pc - eps, [0.0; 2], 0.0)),
            Family::GaussQuadratic { eps, .. } => Some((eps, 2.0, [0.0; 2], 0.0)),
            Family::GaussLinear { .. } => None,
        }
    }

    pub fn tail(&self) -> Option<Tail> {
        let (c2, q, _, c1) = self.power_form()?;
        Some(Tail { c1, c2, q })
    }

    /// Exponent at a point of `ℝⁿ` (first two coordinates).
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match self.power_form() {
            Some((c2, q, x0, c1)) => c1 - c2 * (x[0] - x0[0]).hypot(x[1] - x0[1]).powf(q),
            None => {
                let Family::GaussLinear { x0, c0, .. } = *self else {
                    unreachable!()
                };
                x[0] * x0[0] + x[1] * x0[1] + c0
            }
        }
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match self.power_form() {
            Some((c2, q, x0, _)) => {
                let d = [x[0] - x0[0], x[1] - x0[1]];
                let r = d[0].hypot(d[1]);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let s = -c2 * q * r.powf(q - 2.0);
                [s * d[0], s * d[1]]
            }
            None => {
                let Family::GaussLinear { x0, .. } = *self else {
                    unreachable!()
                };
                x0
            }
        }
    }

    fn default_radius(&self) -> f64 {
        match *self {
            Family::GaussQuadratic { .. } | Family::GaussLinear { .. } => 16.0,
            _ => {
                let (c2, q, _, _) = self.power_form().unwrap();
                (48.0 / c2).powf(1.0 / q).clamp(4.0, 400.0)
            }
        }
    }

    /// Log-domain samples with the exact evaluator attached.
    pub fn sample(&self, spec: GridSpec) -> Result<Func> {
        self.validate()?;
        let fam = *self;
        match spec {
            GridSpec::Radial { r_max, nodes } => {
                if !self.is_radial() {
                    return Err(invalid("translated members need a Cartesian grid".into()));
                }
                let r_max = if r_max > 0.0 { r_max } else { self.default_radius() };
                let exact = ClosureRadial {
                    value: move |r: f64| fam.value([r, 0.0]),
                    slope: move |r: f64| fam.gradient([r, 0.0])[0],
                };
                let tail = self.tail().or(Some(Tail {
                    c1: self.value([0.0; 2]),
                    c2: 0.0,
                    q: 2.0,
                }));
                Ok(Func::Radial(RadialProfile::from_exact(
                    self.n(),
                    hybrid_grid(r_max, nodes),
                    tail,
                    Arc::new(exact),
                )?))
            }
            GridSpec::Cartesian { half_width, nodes } => {
                let n = self.n();
                if n > 2 {
                    return Err(invalid("Cartesian grids are 1D or 2D".into()));
                }
                let (o, h, s) = GridFunction::centered(n, half_width, nodes);
                let exact = ClosureField {
                    value: move |x: [f64; 2]| fam.value(x),
                    gradient: move |x: [f64; 2]| fam.gradient(x),
                };
                Ok(Func::Grid(GridFunction::from_exact(
                    n,
                    &o,
                    h,
                    &s,
                    self.tail(),
                    Arc::new(exact),
                )?))
            }
        }
    }

    /// `(α, t, β)` of the closed-form computations; Gaussian families report
    /// `β = α + t`.
    pub fn hc_triple(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Family::ExtremizerHc { alpha, beta, t, .. } => Some((alpha, t, beta)),
            Family::PowerHc { p, .. } => Some((1.0, 1.0, p)),
            Family::GaussQuadratic { .. } | Family::GaussLinear { .. } => Some((1.0, 1.0, 2.0)),
            Family::StretchLsi { .. } => None,
        }
    }

    /// `b_ε = p'((p')^{-p'} + ε)` for `PowerHc`.
    pub fn b(&self) -> Option<f64> {
        match *self {
            Family::PowerHc { p, eps, .. } => {
                let pc = conj(p);
                Some(pc * (pc.powf(-pc) + eps))
            }
            _ => None,
        }
    }

    /// `z = p' b_ε^{p-1}`, equal to 1 at `ε = 0`.
    pub fn z(&self) -> Option<f64> {
        let b = self.b()?;
        let p = self.p();
        Some(conj(p) * b.powf(p - 1.0))
    }

    /// `dz/dε = (p')² (p-1) b_ε^{p-2}`.
    pub fn dz_deps(&self) -> Option<f64> {
        let b = self.b()?;
        let p = self.p();
        Some(conj(p).powi(2) * (p - 1.0) * b.powf(p - 2.0))
    }

    /// Every closed form stated for the family.
    pub fn analytic_values(&self) -> Result<BTreeMap<&'static str, f64>> {
        self.validate()?;
        let n = self.n();
        let nf = n as f64;
        let p = self.p();
        let pc = conj(p);
        let mut m = BTreeMap::new();
        match *self {
            Family::ExtremizerHc {
                alpha, beta, t, c, ..
            } => {
                let k = ((beta - alpha) / (beta * t)).powf(pc - 1.0);
                m.insert("theta", alpha * k);
                m.insert("theta0", beta * ((beta - alpha) / (alpha * t)).powf(pc - 1.0));
                m.insert("a", (beta * c).exp());
                m.insert("hc_deficit", 0.0);
                m.insert(
                    "ln_norm_alpha_pow_alpha",
                    alpha * c + (gamma_omega(n, pc) * (alpha * k / pc).powf(-nf / pc)).ln(),
                );
            }
            Family::PowerHc { eps, .. } => {
                let b = self.b().unwrap();
                let bp = b.powf(p - 1.0);
                let go = gamma_omega(n, pc);
                m.insert("b", b);
                m.insert("z", self.z().unwrap());
                m.insert("dz_deps", self.dz_deps().unwrap());
                m.insert("norm_1", go * (b / pc).powf(-nf / pc));
                m.insert("q1_coefficient", b / (pc * (1.0 - bp).powf(pc - 1.0)));
                m.insert(
                    "norm_q1_p_pow_p",
                    go * (p * b / (pc * (1.0 - bp).powf(pc - 1.0))).powf(-nf / pc),
                );
                m.insert("hc_deficit", Self::power_hc_deficit(n, p, eps));
                m.insert("quad_constant", Self::power_hc_quad_constant(n, p));
                m.insert("theta", pc.powf(1.0 - pc));
                m.insert(
                    "a",
                    (b / ((p - 1.0).powf(pc - 1.0) * (1.0 - bp).powf(pc - 1.0))).powf(-nf / pc),
                );
                m.insert("sharp_constant", Self::power_hc_sharp_constant(n, p)?);
            }
            Family::StretchLsi { eps, .. } => {
                let s = StretchClosedForms::new(n, p, eps)?;
                m.insert("norm_p_pow_p", s.norm_p_pow_p);
                m.insert("grad_p", s.grad_p);
                m.insert("entropy", s.entropy);
                m.insert("lsi_deficit", s.deficit());
                m.insert("c1", s.c1_formula());
                m.insert("c2", s.c2());
                m.insert("quad_constant", Self::k_constant(n, p)?);
                m.insert("sharp_constant", Self::lsi_sharp_constant_stated(n, p)?);
                m.insert("sharp_constant_corrected", Self::lsi_sharp_constant(n, p)?);
            }
            Family::GaussQuadratic { eps, .. } => {
                m.insert("q1_coefficient", eps / (1.0 - 2.0 * eps));
                m.insert("norm_q1_2_mu", ((1.0 - 2.0 * eps) / (1.0 + 2.0 * eps)).powf(nf / 4.0));
                m.insert("norm_f_2_mu", (1.0 + 2.0 * eps).powf(-nf / 4.0));
                m.insert("grad_2_mu", nf * eps * eps * (1.0 + 2.0 * eps).powf(-nf / 2.0 - 1.0));
                m.insert("ghc_deficit", (1.0 - 4.0 * eps * eps).powf(-nf / 4.0) - 1.0);
                m.insert("glsi_deficit", nf * eps - nf / 2.0 * (2.0 * eps).ln_1p());
                m.insert("quad_constant", nf);
                m.insert("a", ((1.0 + 2.0 * eps) / (1.0 - 2.0 * eps)).powf(-nf / 2.0));
                m.insert("k", 1.0);
                m.insert("sharp_constant", Self::gauss_sharp_constant(n));
            }
            Family::GaussLinear { x0, c0, .. } => {
                let s = x0[0] * x0[0] + x0[1] * x0[1];
                m.insert("ghc_deficit", 0.0);
                m.insert("glsi_deficit", 0.0);
                m.insert("k", (-0.5 * s).exp());
                // α = t = 1: a = ∫ e^{2 Q_1 g} dμ
                m.insert("a", (2.0 * (c0 - 0.5 * s) + 2.0 * s).exp());
            }
        }
        Ok(m)
    }

    /// `δ^HC_{p,1,1,p}(g_ε)` in closed form.
    pub fn power_hc_deficit(n: usize, p: f64, eps: f64) -> f64 {
        let pc = conj(p);
        let nf = n as f64;
        let b = pc * (pc.powf(-pc) + eps);
        let ln = -nf / p * p.ln() + nf / (pc * p) * (p - 1.0).ln() - nf / (pc * pc) * b.ln()
            - nf / (p * p) * (1.0 - b.powf(p - 1.0)).ln();
        ln.exp_m1()
    }

    /// `(n/2) p^{(p+1)/(p-1)} (p-1)^{(p-3)/(p-1)}`.
    pub fn power_hc_quad_constant(n: usize, p: f64) -> f64 {
        n as f64 / 2.0 * p.powf((p + 1.0) / (p - 1.0)) * (p - 1.0).powf((p - 3.0) / (p - 1.0))
    }

    /// `K(n,p) = (2/(np')) h(n/p', p-1)`.
    pub fn k_constant(n: usize, p: f64) -> Result<f64> {
        let pc = conj(p);
        Ok(2.0 / (n as f64 * pc) * trigamma_h(n as f64 / pc, p - 1.0)?)
    }

    /// First variation of the normalised `g_ε` model gap in `ε`, per radius:
    /// `(p')^{p'-1} (n - (p')^{1-p'} r^{p'}) e^{-(p')^{-p'} r^{p'}}`.
    pub fn power_hc_first_variation(n: usize, p: f64, r: f64) -> f64 {
        let pc = conj(p);
        pc.powf(pc - 1.0) * (n as f64 - pc.powf(1.0 - pc) * r.powf(pc)) * (-pc.powf(-pc) * r.powf(pc)).exp()
    }

    /// `C̃0 = (1/p) ∫_0^∞ |n - (p')^{1-p'} r^{p'}| e^{-(p')^{-p'} r^{p'}} r^{n-1} dr`.
    pub fn power_hc_c0_tilde(n: usize, p: f64) -> f64 {
        let pc = conj(p);
        let nf = n as f64;
        let f = |r: f64| (nf - pc.powf(1.0 - pc) * r.powf(pc)) * (-pc.powf(-pc) * r.powf(pc)).exp();
        let root = (nf * pc.powf(pc - 1.0)).powf(1.0 / pc);
        abs_radial_integral(n, f, &[root], false) / (nf * unit_ball_volume(n)) / p
    }

    /// Limit of `distance / ε` for `PowerHc`: `n ω_n C̃0 · dz/dε|_0`.
    pub fn power_hc_sharp_constant(n: usize, p: f64) -> Result<f64> {
        let pc = conj(p);
        let b0 = pc.powf(1.0 - pc);
        let dz = pc * pc * (p - 1.0) * b0.powf(p - 2.0);
        Ok(n as f64 * unit_ball_volume(n) * Self::power_hc_c0_tilde(n, p) * dz)
    }

    /// The digamma integrand as stated:
    /// `(1/n) |n²/p'² - (nΨ(n/p')/p' + n/p' + 1 - n log r) r^{p'}| e^{-r^{p'}}`.
    pub fn lsi_first_variation_stated(n: usize, p: f64, r: f64) -> Result<f64> {
        let pc = conj(p);
        let nf = n as f64;
        let kc = nf * digamma(nf / pc)? / pc + nf / pc + 1.0;
        Ok((nf * nf / (pc * pc) - (kc - nf * r.ln()) * r.powf(pc)) * (-r.powf(pc)).exp() / nf)
    }

    /// First variation of the modified LSI gap, from `∂_ε` of both terms:
    /// `(1/n) (K_c (r^{p'} - n/p') - n r^{p'} log r) e^{-r^{p'}}`.
    pub fn lsi_first_variation(n: usize, p: f64, r: f64) -> Result<f64> {
        let pc = conj(p);
        let nf = n as f64;
        let kc = nf * digamma(nf / pc)? / pc + nf / pc + 1.0;
        let rp = r.powf(pc);
        let log_term = if r == 0.0 { 0.0 } else { nf * rp * r.ln() };
        Ok((kc * (rp - nf / pc) - log_term) * (-rp).exp() / nf)
    }

    /// `∫_{ℝⁿ}` of the stated integrand.
    pub fn lsi_sharp_constant_stated(n: usize, p: f64) -> Result<f64> {
        Self::lsi_first_variation_stated(n, p, 1.0)?;
        let f = |r: f64| Self::lsi_first_variation_stated(n, p, r).unwrap_or(f64::NAN);
        Ok(abs_radial_integral(n, f, &[], false))
    }

    /// `∫_{ℝⁿ}` of the corrected integrand.
    pub fn lsi_sharp_constant(n: usize, p: f64) -> Result<f64> {
        Self::lsi_first_variation(n, p, 1.0)?;
        let f = |r: f64| Self::lsi_first_variation(n, p, r).unwrap_or(f64::NAN);
        Ok(abs_radial_integral(n, f, &[], false))
    }

    /// `∫ |n - |x|²| dμ`.
    pub fn gauss_sharp_constant(n: usize) -> f64 {
        let nf = n as f64;
        abs_radial_integral(n, |r| nf - r * r, &[nf.sqrt()], true)
    }
}

/// Closed forms for `f_ε = e^{-|x|^{p'-ε}/p}`.
#[derive(Debug, Clone, Copy)]
pub struct StretchClosedForms {
    pub n: usize,
    pub p: f64,
    pub eps: f64,
    pub norm_p_pow_p: f64,
    pub grad_p: f64,
    pub entropy: f64,
}

impl StretchClosedForms {
    pub fn new(n: usize, p: f64, eps: f64) -> Result<Self> {
        let pc = conj(p);
        let q = pc - eps;
        let nf = n as f64;
        let s = nf * unit_ball_volume(n) / q;
        let norm = s * gamma(nf / q)?;
        let grad = nf * unit_ball_volume(n) * q.powf(p - 1.0) / p.powf(p)
            * gamma((p * (q - 1.0) + nf) / q)?;
        let ent = -s * gamma(1.0 + nf / q)? - norm * norm.ln();
        Ok(Self {
            n,
            p,
            eps,
            norm_p_pow_p: norm,
            grad_p: grad,
            entropy: ent,
        })
    }

    /// `(n/p) log(L ∫|∇f|^p / ‖f‖_p^p) - Ent/‖f‖_p^p` with the stated closed
    /// form of each piece.
    pub fn deficit(&self) -> f64 {
        let (n, p) = (self.n, self.p);
        let pc = conj(p);
        let nf = n as f64;
        let q = pc - self.eps;
        // (n/p) log(L ((p'-ε)/p)^p Γ((p(q-1)+n)/q) / Γ(n/q)) + n/q + log((nω_n/q) Γ(n/q))
        let ln_l = lsi_constant_ln(n, p);
        let ratio = ln_gamma((p * (q - 1.0) + nf) / q).unwrap() - ln_gamma(nf / q).unwrap();
        nf / p * (ln_l + p * (q / p).ln() + ratio)
            + nf / q
            + (nf * unit_ball_volume(n) / q * gamma(nf / q).unwrap()).ln()
    }

    /// `C(n,p,f_ε) = p' n^{p'-1} p / q^{p'} [Γ(n/q)/Γ((p(q-1)+n)/q)]^{p'-1}`.
    pub fn c1_formula(&self) -> f64 {
        let (n, p) = (self.n, self.p);
        let pc = conj(p);
        let nf = n as f64;
        let q = pc - self.eps;
        let ratio = (ln_gamma(nf / q).unwrap() - ln_gamma((p * (q - 1.0) + nf) / q).unwrap()).exp();
        pc * nf.powf(pc - 1.0) * p / q.powf(pc) * ratio.powf(pc - 1.0)
    }

    /// `C1` from the norms, `p'(n/p)^{p'-1} ‖f‖_p^{p'} (∫|∇f|^p)^{1-p'}`.
    pub fn c1(&self) -> f64 {
        let pc = conj(self.p);
        pc * (self.n as f64 / self.p).powf(pc - 1.0)
            * self.norm_p_pow_p.powf(pc / self.p)
            * self.grad_p.powf(1.0 - pc)
    }

    pub fn c2(&self) -> f64 {
        let pc = conj(self.p);
        1.0 / ((self.c1() / self.p).powf(self.n as f64 / pc) * gamma_omega(self.n, pc))
    }
}

/// `ln L_{n,p}`.
fn lsi_constant_ln(n: usize, p: f64) -> f64 {
    let pc = conj(p);
    let nf = n as f64;
    (p / nf).ln() + (p - 1.0) * ((p - 1.0) / std::f64::consts::E).ln()
        - p / nf * gamma_omega(n, pc).ln()
}

/// `∫_{ℝⁿ} |f(|x|)| dx` (or `dμ`) by Gauss-Legendre panels split at the
/// given roots and at sign changes found on a fine scan.
fn abs_radial_integral<F: Fn(f64) -> f64>(n: usize, f: F, roots: &[f64], gaussian: bool) -> f64 {
    let nf = n as f64;
    let weight = |r: f64| {
        let w = nf * unit_ball_volume(n) * r.powf(nf - 1.0);
        if gaussian {
            w * (-0.5 * r * r).exp() / (2.0 * std::f64::consts::PI).powf(nf / 2.0)
        } else {
            w
        }
    };
    let upper = 40.0;
    let scan = 4000;
    let mut breaks: Vec<f64> = (0..=scan).map(|i| upper * i as f64 / scan as f64).collect();
    // bisect every sign change of the scan
    let mut extra = roots.to_vec();
    for w in breaks.windows(2) {
        let (a, b) = (w[0].max(1e-300), w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa * fb < 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if f(mid) * fa < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            extra.push(0.5 * (lo + hi));
        }
    }
    breaks.extend(extra);
    // grade toward the origin for the r^{p'} log r singularities
    for k in 1..=30 {
        breaks.push(upper / scan as f64 * 0.5f64.powi(k));
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let rule = GaussLegendre::standard();
    breaks
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], |r| f(r).abs() * weight(r)))
        .sum()
}

impl FromStr for Family {
    type Err = Error;

    /// `kind:key=value,...`, e.g. `power_hc:n=1,p=2,eps=0.01`; vectors use
    /// `x0=0.5;-1`, and a bare `x0=0.5` means `(0.5, 0)`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut doc = format!("kind = \"{}\"\n", kind.trim());
        for kv in rest.split(',').filter(|x| !x.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {kv}")))?;
            let v = v.trim();
            let v = if v.contains(';') {
                format!("[{}]", v.replace(';', ","))
            } else if k.trim() == "x0" {
                format!("[{v}, 0.0]")
            } else {
                v.to_string()
            };
            doc.push_str(&format!("{} = {}\n", k.trim(), v));
        }
        let fam: Family = toml::from_str(&doc).map_err(|e| Error::Parse(e.to_string()))?;
        fam.validate()?;
        Ok(fam)
    }
}
