//! The four deficits and their optimal constants.
//!
//! Inputs are log-domain: the HC deficits take the exponent `g`, the LSI
//! deficits take `φ = log f`. Every ratio is assembled as a difference of
//! logarithms and exponentiated once at the end.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::{entropy_parts, ln_grad_norm_p, ln_integral_exp, Func, Integrand, Measure};
use crate::hopflax::{hopf_lax, HopfLaxParams, Method};
use crate::specfun::{ln_gamma, unit_ball_volume};

/// Deficits in `[-CLAMP_TOL, 0)` are quadrature noise and read as 0.
pub const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HCParams {
    pub p: f64,
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl HCParams {
    pub fn new(p: f64, t: f64, alpha: f64, beta: f64) -> Result<Self> {
        let hp = Self { p, t, alpha, beta };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.t > 0.0 && self.alpha > 0.0 && self.beta > self.alpha) {
            return Err(Error::InvalidParams(format!(
                "need p > 1, t > 0, 0 < alpha < beta; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn lambda(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn tau(&self) -> f64 {
        let l = self.lambda();
        l.min(1.0 - l)
    }

    pub fn hopf_lax(&self) -> Result<HopfLaxParams> {
        HopfLaxParams::new(self.p, self.t)
    }
}

/// Which inequality a report belongs to, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "inequality", rename_all = "snake_case")]
pub enum ReportParams {
    Hc { n: usize, params: HCParams },
    Lsi { n: usize, p: f64 },
    Ghc { n: usize, alpha: f64, t: f64 },
    Glsi { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeficitReport {
    pub deficit: f64,
    /// `C_{p,t,α,β}` for HC, `L_{n,p}` for LSI, 1 for the Gaussian deficits.
    pub constant_used: f64,
    /// Intermediate integrals, log-domain unless the key says otherwise.
    pub norms: BTreeMap<String, f64>,
    pub params: ReportParams,
}

impl DeficitReport {
    pub fn record(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        match self.params {
            ReportParams::Hc { n, params } => {
                out.push(("inequality".into(), "hc".into()));
                out.push(("n".into(), n.to_string()));
                out.push(("p".into(), params.p.to_string()));
                out.push(("t".into(), params.t.to_string()));
                out.push(("alpha".into(), params.alpha.to_string()));
                out.push(("beta".into(), params.beta.to_string()));
                out.push(("lambda".into(), params.lambda().to_string()));
                out.push(("tau".into(), params.tau().to_string()));
            }
            ReportParams::Lsi { n, p } => {
                out.push(("inequality".into(), "lsi".into()));
                out.push(("n".into(), n.to_string()));
                out.push(("p".into(), p.to_string()));
            }
            ReportParams::Ghc { n, alpha, t } => {
                out.push(("inequality".into(), "ghc".into()));
                out.push(("n".into(), n.to_string()));
                out.push(("alpha".into(), alpha.to_string()));
                out.push(("t".into(), t.to_string()));
            }
            ReportParams::Glsi { n } => {
                out.push(("inequality".into(), "glsi".into()));
                out.push(("n".into(), n.to_string()));
            }
        }
        out.push(("deficit".into(), format!("{:.17e}", self.deficit)));
        out.push(("constant".into(), format!("{:.17e}", self.constant_used)));
        for (k, v) in &self.norms {
            out.push((k.clone(), format!("{v:.17e}")));
        }
        out
    }
}

impl fmt::Display for DeficitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.record() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// `exp(ln1p) - 1` with the nonnegativity clamp.
fn finish(ln1p: f64) -> Result<f64> {
    let d = ln1p.exp_m1();
    if d.is_nan() {
        return Err(Error::Degenerate("deficit is NaN".into()));
    }
    if d < -CLAMP_TOL {
        return Err(Error::NegativeDeficit(d));
    }
    if d < 0.0 {
        log::warn!("clamping deficit {d:e} to 0");
        return Ok(0.0);
    }
    Ok(d)
}

fn finish_linear(d: f64) -> Result<f64> {
    finish(d.ln_1p())
}

/// `ln C_{p,t,α,β}`; `α = β` gives 0.
pub fn hc_optimal_constant_ln(n: usize, params: &HCParams) -> f64 {
    let HCParams { p, t, alpha: a, beta: b } = *params;
    if a == b {
        return 0.0;
    }
    let pc = p / (p - 1.0);
    let nf = n as f64;
    let ln_g = nf / pc * pc.ln() + ln_gamma(nf / pc + 1.0).unwrap_or(f64::INFINITY) + unit_ball_volume(n).ln();
    nf / p * (b - a) / (a * b) * ((b - a) / t).ln() + nf / (a * b) * (a / p + b / pc) * a.ln()
        - nf / (a * b) * (b / p + a / pc) * b.ln()
        + (a - b) / (a * b) * ln_g
}

pub fn hc_optimal_constant(n: usize, params: &HCParams) -> f64 {
    hc_optimal_constant_ln(n, params).exp()
}

/// Solver matching the representation.
pub fn default_method(g: &Func) -> Method {
    match g {
        Func::Radial(_) => Method::Radial,
        Func::Grid(gf) if gf.dim() == 1 => Method::Fast,
        Func::Grid(_) => Method::Brute,
    }
}

/// `C^α ‖e^g‖_α^α / ‖e^{Q_t g}‖_β^α - 1`.
pub fn hc_deficit(g: &Func, params: &HCParams) -> Result<DeficitReport> {
    params.validate()?;
    let n = g.n();
    let q = hopf_lax(g, params.hopf_lax()?, default_method(g))?;
    let ln_in = ln_integral_exp(g, params.alpha, Measure::Lebesgue)?;
    let ln_out = ln_integral_exp(&q, params.beta, Measure::Lebesgue)?;
    let ln_c = hc_optimal_constant_ln(n, params);
    let a = params.alpha;
    let ln1p = a * ln_c + ln_in - a / params.beta * ln_out;
    let mut norms = BTreeMap::new();
    norms.insert("ln_int_exp_alpha_g".into(), ln_in);
    norms.insert("ln_int_exp_beta_qtg".into(), ln_out);
    norms.insert("ln_constant".into(), ln_c);
    Ok(DeficitReport {
        deficit: finish(ln1p)?,
        constant_used: ln_c.exp(),
        norms,
        params: ReportParams::Hc { n, params: *params },
    })
}

/// `ln L_{n,p}`.
pub fn lsi_optimal_constant_ln(n: usize, p: f64) -> f64 {
    let pc = p / (p - 1.0);
    let nf = n as f64;
    let ln_g = ln_gamma(nf / pc + 1.0).unwrap_or(f64::INFINITY) + unit_ball_volume(n).ln();
    (p / nf).ln() + (p - 1.0) * ((p - 1.0).ln() - 1.0) - p / nf * ln_g
}

pub fn lsi_optimal_constant(n: usize, p: f64) -> f64 {
    lsi_optimal_constant_ln(n, p).exp()
}

/// Pieces shared by the LSI deficit and the extremizer fit:
/// `(ln ‖f‖_p^p, Ent(|f|^p)/‖f‖_p^p, ln ∫|∇f|^p)`.
pub(crate) fn lsi_pieces(phi: &Func, p: f64, measure: Measure) -> Result<(f64, f64, f64)> {
    let (ln_z, ent_ratio) = entropy_parts(&phi.scaled(p), measure)?;
    let ln_grad = ln_grad_norm_p(phi, p, measure)?;
    Ok((ln_z, ent_ratio, ln_grad))
}

/// `(n/p) log(L ∫|∇f|^p / ‖f‖_p^p) - Ent(|f|^p)/‖f‖_p^p` for `f = e^φ`.
pub fn lsi_deficit(phi: &Func, p: f64) -> Result<DeficitReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidParams(format!("p must exceed 1, got {p}")));
    }
    let n = phi.n();
    let (ln_z, ent_ratio, ln_grad) = lsi_pieces(phi, p, Measure::Lebesgue)?;
    if ln_grad == f64::NEG_INFINITY {
        return Err(Error::Degenerate("zero gradient".into()));
    }
    let ln_l = lsi_optimal_constant_ln(n, p);
    let d = n as f64 / p * (ln_l + ln_grad - ln_z) - ent_ratio;
    let mut norms = BTreeMap::new();
    norms.insert("ln_norm_p_pow_p".into(), ln_z);
    norms.insert("entropy_ratio".into(), ent_ratio);
    norms.insert("ln_grad_p".into(), ln_grad);
    Ok(DeficitReport {
        deficit: finish_linear(d)?,
        constant_used: ln_l.exp(),
        norms,
        params: ReportParams::Lsi { n, p },
    })
}

/// `y = (1/n) ∫ e^g |∇g|^p / ∫ e^g`, integrated directly.
pub fn y_value(g: &Func, p: f64) -> Result<f64> {
    let n = g.n() as f64;
    let extra = g.tail().map_or(0.0, |t| p * (t.q - 1.0).max(0.0));
    let spec = Integrand {
        alpha: 1.0,
        extra_pow: extra,
        dense: false,
    };
    let ln_num = g.certified(Measure::Lebesgue, spec, |q| {
        let v = g.eval(&q.points)?;
        let d = g.grad_norms(&q.points)?;
        let h: Vec<f64> = v
            .iter()
            .zip(&d)
            .map(|(&x, &s)| if s == 0.0 { f64::NEG_INFINITY } else { x + p * s.ln() })
            .collect();
        Ok(q.ln_integral(&h))
    })?;
    let ln_den = ln_integral_exp(g, 1.0, Measure::Lebesgue)?;
    Ok((ln_num - ln_den).exp() / n)
}

/// `y = (p^p/n) ∫|∇f|^p / ‖f‖_p^p` with `f = e^{g/p}`.
pub fn y_value_via_f(g: &Func, p: f64) -> Result<f64> {
    let phi = g.scaled(1.0 / p);
    let ln_grad = ln_grad_norm_p(&phi, p, Measure::Lebesgue)?;
    let ln_z = ln_integral_exp(&phi, p, Measure::Lebesgue)?;
    Ok(p.powf(p) / g.n() as f64 * (ln_grad - ln_z).exp())
}

/// Ladder of `deficit(t)/t` and its extrapolation to `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCheck {
    pub ladder: Vec<f64>,
    pub deficits: Vec<f64>,
    pub ratios: Vec<f64>,
    /// First-order extrapolation from the two smallest `t`.
    pub limit: f64,
    pub target: f64,
    /// `y` for the HC limit, 1 for the Gaussian one.
    pub y: f64,
}

impl LimitCheck {
    pub fn relative_error(&self) -> f64 {
        if self.target == 0.0 {
            self.limit.abs()
        } else {
            ((self.limit - self.target) / self.target).abs()
        }
    }
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 2 || ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParams("t ladder must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn extrapolate(ladder: &[f64], ratios: &[f64]) -> f64 {
    let k = ladder.len();
    let (t1, t2) = (ladder[k - 2], ladder[k - 1]);
    let (d1, d2) = (ratios[k - 2], ratios[k - 1]);
    (t1 * d2 - t2 * d1) / (t1 - t2)
}

/// `δ^HC_{p,t,1,1+yt}(g)/t` along the ladder against `y δ^LSI(e^{g/p})`.
pub fn hc_lsi_limit(g: &Func, p: f64, ladder: &[f64]) -> Result<LimitCheck> {
    check_ladder(ladder)?;
    let n = g.n();
    let y = y_value(g, p)?;
    let target = y * lsi_deficit(&g.scaled(1.0 / p), p)?.deficit;
    let deficits = ladder
        .par_iter()
        .map(|&t| Ok(hc_deficit(g, &HCParams::new(p, t, 1.0, 1.0 + y * t)?)?.deficit))
        .collect::<Result<Vec<f64>>>()?;
    let ratios: Vec<f64> = deficits.iter().zip(ladder).map(|(d, t)| d / t).collect();
    let _ = n;
    Ok(LimitCheck {
        limit: extrapolate(ladder, &ratios),
        ladder: ladder.to_vec(),
        deficits,
        ratios,
        target,
        y,
    })
}

/// `‖e^g‖_{α,μ}^α / ‖e^{Q_t g}‖_{α+t,μ}^α - 1` with the quadratic cost.
pub fn ghc_deficit(g: &Func, alpha: f64, t: f64) -> Result<DeficitReport> {
    if !(alpha > 0.0 && t > 0.0) {
        return Err(Error::InvalidParams(format!("need alpha, t > 0; got ({alpha}, {t})")));
    }
    let n = g.n();
    let q = hopf_lax(g, HopfLaxParams::new(2.0, t)?, default_method(g))?;
    let ln_in = ln_integral_exp(g, alpha, Measure::Gaussian)?;
    let ln_out = ln_integral_exp(&q, alpha + t, Measure::Gaussian)?;
    let ln1p = ln_in - alpha / (alpha + t) * ln_out;
    let mut norms = BTreeMap::new();
    norms.insert("ln_int_exp_alpha_g_mu".into(), ln_in);
    norms.insert("ln_int_exp_beta_qtg_mu".into(), ln_out);
    Ok(DeficitReport {
        deficit: finish(ln1p)?,
        constant_used: 1.0,
        norms,
        params: ReportParams::Ghc { n, alpha, t },
    })
}

/// `(2∫|∇f|² dμ - Ent_μ(f²)) / ∫f² dμ` for `f = e^φ`.
pub fn glsi_deficit(phi: &Func) -> Result<DeficitReport> {
    let n = phi.n();
    let (ln_z, ent_ratio, ln_grad) = lsi_pieces(phi, 2.0, Measure::Gaussian)?;
    let d = 2.0 * (ln_grad - ln_z).exp() - ent_ratio;
    let mut norms = BTreeMap::new();
    norms.insert("ln_int_f2_mu".into(), ln_z);
    norms.insert("entropy_ratio".into(), ent_ratio);
    norms.insert("ln_grad_2_mu".into(), ln_grad);
    Ok(DeficitReport {
        deficit: finish_linear(d)?,
        constant_used: 1.0,
        norms,
        params: ReportParams::Glsi { n },
    })
}

/// `δ^GHC_{1,t}(g)/t` along the ladder against `δ^GLSI(e^{g/2})`.
pub fn ghc_glsi_limit(g: &Func, ladder: &[f64]) -> Result<LimitCheck> {
    check_ladder(ladder)?;
    let target = glsi_deficit(&g.scaled(0.5))?.deficit;
    let deficits = ladder
        .par_iter()
        .map(|&t| Ok(ghc_deficit(g, 1.0, t)?.deficit))
        .collect::<Result<Vec<f64>>>()?;
    let ratios: Vec<f64> = deficits.iter().zip(ladder).map(|(d, t)| d / t).collect();
    Ok(LimitCheck {
        limit: extrapolate(ladder, &ratios),
        ladder: ladder.to_vec(),
        deficits,
        ratios,
        target,
        y: 1.0,
    })
}
