//! Matching extremizer parameters and the L¹ distances to the model.

use serde::{Deserialize, Serialize};

use crate::deficits::{default_method, lsi_pieces, HCParams};
use crate::error::{Error, Result};
use crate::funcrep::{ln_integral_exp, Func, Integrand, Measure, Quadrature};
use crate::hopflax::{hopf_lax, HopfLaxParams};
use crate::specfun::{ln_gamma, unit_ball_volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremizerKind {
    /// `e^{-θ|x-x0|^{p'}/p'}` against `a^{-α/β} e^{αg}`.
    Hc,
    /// `C2 e^{-p|x-x0|^{p'}/C1}` against `f^p / ‖f‖_p^p`.
    Lsi,
    /// `(C1/p)^{-n/p'} e^{-p|x|^{p'}/C1}` against `f^p`, unnormalised.
    LsiModified,
    /// `k e^{<x,x0>}` against `a^{-α/(α+t)} e^{αg}` in `L¹(dμ)`.
    GaussianHc,
    /// `k e^{<x,x0>}` against `f² / ∫f² dμ` in `L¹(dμ)`.
    GaussianLsi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremizerParams {
    pub kind: ExtremizerKind,
    pub n: usize,
    pub p: f64,
    /// Exponent multiplier on the input (`α`, `p`, or 2).
    pub alpha: f64,
    /// `β` for HC, `α + t` for the Gaussian HC.
    pub beta: f64,
    pub theta: f64,
    pub a: f64,
    pub x0: [f64; 2],
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    /// Log normaliser subtracted from `alpha · input`.
    pub ln_norm: f64,
}

impl ExtremizerParams {
    fn blank(kind: ExtremizerKind, n: usize, p: f64) -> Self {
        Self {
            kind,
            n,
            p,
            alpha: 1.0,
            beta: 1.0,
            theta: f64::NAN,
            a: f64::NAN,
            x0: [0.0; 2],
            c1: f64::NAN,
            c2: f64::NAN,
            k: f64::NAN,
            ln_norm: 0.0,
        }
    }

    fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn measure(&self) -> Measure {
        match self.kind {
            ExtremizerKind::GaussianHc | ExtremizerKind::GaussianLsi => Measure::Gaussian,
            _ => Measure::Lebesgue,
        }
    }

    /// Same parameters re-centred at `x0`.
    pub fn at(&self, x0: [f64; 2]) -> Self {
        let mut out = *self;
        out.x0 = x0;
        if matches!(self.kind, ExtremizerKind::GaussianHc | ExtremizerKind::GaussianLsi) {
            out.k = (-0.5 * (x0[0] * x0[0] + x0[1] * x0[1])).exp();
        }
        out
    }

    /// Log of the model at `x`.
    fn model_ln(&self, r0: f64, x: [f64; 2]) -> f64 {
        let pc = self.p_conj();
        let d = if self.x0 == [0.0, 0.0] {
            r0
        } else {
            (x[0] - self.x0[0]).hypot(x[1] - self.x0[1])
        };
        match self.kind {
            ExtremizerKind::Hc => -self.theta * d.powf(pc) / pc,
            ExtremizerKind::Lsi => self.c2.ln() - self.p * d.powf(pc) / self.c1,
            ExtremizerKind::LsiModified => {
                -(self.n as f64) / pc * (self.c1 / self.p).ln() - self.p * d.powf(pc) / self.c1
            }
            ExtremizerKind::GaussianHc | ExtremizerKind::GaussianLsi => {
                self.k.ln() + x[0] * self.x0[0] + x[1] * self.x0[1]
            }
        }
    }

    pub fn record(&self) -> Vec<(String, String)> {
        let kind = match self.kind {
            ExtremizerKind::Hc => "hc",
            ExtremizerKind::Lsi => "lsi",
            ExtremizerKind::LsiModified => "lsi_modified",
            ExtremizerKind::GaussianHc => "ghc",
            ExtremizerKind::GaussianLsi => "glsi",
        };
        let mut out = vec![
            ("kind".to_string(), kind.to_string()),
            ("n".into(), self.n.to_string()),
            ("p".into(), self.p.to_string()),
            ("x0".into(), format!("{:.12e},{:.12e}", self.x0[0], self.x0[1])),
        ];
        for (k, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("theta", self.theta),
            ("a", self.a),
            ("c1", self.c1),
            ("c2", self.c2),
            ("k", self.k),
        ] {
            if v.is_finite() {
                out.push((k.into(), format!("{v:.17e}")));
            }
        }
        out
    }
}

/// `θ = α((β-α)/(βt))^{p'-1}`, `a = ∫e^{βQ_t g} / ∫e^{-θ(β/α)^{p'}|x|^{p'}/p'}`.
pub fn hc_params(g: &Func, params: &HCParams) -> Result<ExtremizerParams> {
    params.validate()?;
    let n = g.n();
    let HCParams { p, t, alpha, beta } = *params;
    let pc = params.p_conj();
    let theta = alpha * ((beta - alpha) / (beta * t)).powf(pc - 1.0);
    let q = hopf_lax(g, params.hopf_lax()?, default_method(g))?;
    let ln_num = ln_integral_exp(&q, beta, Measure::Lebesgue)?;
    let nf = n as f64;
    let ln_den = ln_gamma(nf / pc + 1.0)? + unit_ball_volume(n).ln()
        - nf / pc * (theta * (beta / alpha).powf(pc) / pc).ln();
    let ln_a = ln_num - ln_den;
    Ok(ExtremizerParams {
        alpha,
        beta,
        theta,
        a: ln_a.exp(),
        ln_norm: alpha / beta * ln_a,
        ..ExtremizerParams::blank(ExtremizerKind::Hc, n, p)
    })
}

/// `C1 = p'(n/p)^{p'-1} ‖f‖_p^{p'} (∫|∇f|^p)^{1-p'}` and `C2` from `C1`,
/// for `f = e^φ`.
pub fn lsi_params(phi: &Func, p: f64) -> Result<ExtremizerParams> {
    if !(p > 1.0) {
        return Err(Error::InvalidParams(format!("p must exceed 1, got {p}")));
    }
    let n = phi.n();
    let nf = n as f64;
    let pc = p / (p - 1.0);
    let (ln_z, _, ln_grad) = lsi_pieces(phi, p, Measure::Lebesgue)?;
    if ln_grad == f64::NEG_INFINITY {
        return Err(Error::Degenerate("zero gradient: C1 is infinite".into()));
    }
    let ln_c1 = pc.ln() + (pc - 1.0) * (nf / p).ln() + pc / p * ln_z + (1.0 - pc) * ln_grad;
    let c1 = ln_c1.exp();
    let ln_c2 = -(nf / pc * (c1 / p).ln() + ln_gamma(nf / pc + 1.0)? + unit_ball_volume(n).ln());
    Ok(ExtremizerParams {
        alpha: p,
        c1,
        c2: ln_c2.exp(),
        ln_norm: ln_z,
        ..ExtremizerParams::blank(ExtremizerKind::Lsi, n, p)
    })
}

/// The unnormalised comparison `∫|(C1/p)^{-n/p'} e^{-p|x|^{p'}/C1} - f^p|`.
pub fn lsi_modified_params(phi: &Func, p: f64) -> Result<ExtremizerParams> {
    Ok(ExtremizerParams {
        kind: ExtremizerKind::LsiModified,
        ln_norm: 0.0,
        ..lsi_params(phi, p)?
    })
}

/// `a = ∫e^{(α+t)Q_t g} dμ`; `k` follows `x0`.
pub fn gaussian_hc_params(g: &Func, alpha: f64, t: f64) -> Result<ExtremizerParams> {
    if !(alpha > 0.0 && t > 0.0) {
        return Err(Error::InvalidParams(format!("need alpha, t > 0; got ({alpha}, {t})")));
    }
    let q = hopf_lax(g, HopfLaxParams::new(2.0, t)?, default_method(g))?;
    let ln_a = ln_integral_exp(&q, alpha + t, Measure::Gaussian)?;
    Ok(ExtremizerParams {
        alpha,
        beta: alpha + t,
        a: ln_a.exp(),
        k: 1.0,
        ln_norm: alpha / (alpha + t) * ln_a,
        ..ExtremizerParams::blank(ExtremizerKind::GaussianHc, g.n(), 2.0)
    })
}

/// Gaussian LSI model for `f = e^φ`: `f²` normalised in `L¹(dμ)`.
pub fn gaussian_lsi_params(phi: &Func) -> Result<ExtremizerParams> {
    let ln_z = ln_integral_exp(phi, 2.0, Measure::Gaussian)?;
    Ok(ExtremizerParams {
        alpha: 2.0,
        k: 1.0,
        ln_norm: ln_z,
        ..ExtremizerParams::blank(ExtremizerKind::GaussianLsi, phi.n(), 2.0)
    })
}

fn distance_on(q: &Quadrature, input: &[f64], params: &ExtremizerParams) -> f64 {
    let m = q.map_points(|r, x| params.model_ln(r, x));
    let diff: Vec<f64> = m
        .iter()
        .zip(input)
        .map(|(&a, &b)| {
            let u = params.alpha * b - params.ln_norm;
            // |e^a - e^u| = e^{max}(1 - e^{-|a-u|})
            let hi = a.max(u);
            if hi == f64::NEG_INFINITY {
                0.0
            } else {
                hi.exp() * (-(a - u).abs()).exp_m1().abs()
            }
        })
        .collect();
    q.integral_linear(&diff)
}

/// L¹ distance between the model centred at `x0` and the normalised input.
pub fn l1_model_distance(input: &Func, params: &ExtremizerParams, x0: [f64; 2]) -> Result<f64> {
    if input.n() != params.n {
        return Err(Error::InvalidParams("dimension mismatch".into()));
    }
    let pr = params.at(x0);
    if let Func::Radial(_) = input {
        if x0 != [0.0, 0.0] {
            return Err(Error::InvalidParams("radial inputs are compared at x0 = 0".into()));
        }
    }
    let spec = Integrand {
        alpha: params.alpha,
        extra_pow: 0.0,
        dense: true,
    };
    let ln = input.certified(params.measure(), spec, |q| {
        let v = input.eval(&q.points)?;
        Ok(distance_on(q, &v, &pr).ln())
    })?;
    Ok(ln.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranslationFit {
    pub x0: [f64; 2],
    pub distance: f64,
    /// Two separated coarse candidates came within 1% of each other.
    pub multimodal: bool,
}

/// Minimise the model distance over `x0`: coarse scan, then pattern search
/// down to 1e-9 of the spacing. Radial inputs return `x0 = 0`.
pub fn fit_translation(input: &Func, params: &ExtremizerParams) -> Result<TranslationFit> {
    let grid = match input {
        Func::Radial(_) => {
            return Ok(TranslationFit {
                x0: [0.0; 2],
                distance: l1_model_distance(input, params, [0.0; 2])?,
                multimodal: false,
            })
        }
        Func::Grid(g) => g,
    };
    let q = grid.quadrature(params.measure());
    let vals = input.eval(&q.points)?;
    let dist = |x0: [f64; 2]| distance_on(&q, &vals, &params.at(x0));
    let dim = grid.dim();
    let shape = grid.shape();
    let h = grid.spacing();
    let origin = grid.origin();

    // coarse candidates, at most ~64 per axis in 1D and ~32 in 2D
    let stride = (shape[0] / if dim == 1 { 64 } else { 32 }).max(1);
    let axis = |a: usize| -> Vec<f64> {
        (0..shape[a])
            .step_by(stride)
            .map(|i| origin[a] + i as f64 * h)
            .collect()
    };
    let xs = axis(0);
    let ys = if dim == 2 { axis(1) } else { vec![0.0] };
    let cands: Vec<[f64; 2]> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| [x, y]))
        .chain(std::iter::once([0.0, 0.0]))
        .collect();
    let scored: Vec<([f64; 2], f64)> = cands.iter().map(|&c| (c, dist(c))).collect();
    let norm = |c: [f64; 2]| c[0].hypot(c[1]);
    let better = |a: &([f64; 2], f64), b: &([f64; 2], f64)| {
        a.1 < b.1 * (1.0 - 1e-12) || (a.1 <= b.1 * (1.0 + 1e-12) && norm(a.0) < norm(b.0))
    };
    let mut best = scored[0];
    for s in &scored[1..] {
        if better(s, &best) {
            best = *s;
        }
    }
    let sep = 1.5 * stride as f64 * h;
    let runner = scored
        .iter()
        .filter(|s| (s.0[0] - best.0[0]).hypot(s.0[1] - best.0[1]) > sep)
        .map(|s| s.1)
        .fold(f64::INFINITY, f64::min);
    let multimodal = runner <= best.1 * 1.01 + 1e-300;

    // pattern search
    let mut step = stride as f64 * h;
    let (mut x, mut d) = best;
    while step >= h * 1e-9 {
        let mut moved = false;
        for a in 0..dim {
            for s in [-1.0, 1.0] {
                let mut y = x;
                y[a] += s * step;
                let dy = dist(y);
                if dy < d {
                    x = y;
                    d = dy;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(TranslationFit {
        x0: x,
        distance: d,
        multimodal,
    })
}
