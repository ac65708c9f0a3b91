//! Prékopa-Leindler triples built from a Hopf-Lax input.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::deficits::{default_method, HCParams};
use crate::error::{Error, Result};
use crate::funcrep::{
    hybrid_grid, ln_integral_exp, ClosureField, ClosureRadial, Func, GridFunction, Integrand, Measure,
    RadialProfile, Tail,
};
use crate::hopflax::{hopf_lax, HopfLaxParams};

/// `u, v, w` as log-domain functions with the PL exponent `λ`.
#[derive(Clone)]
pub struct PLTriple {
    pub u: Func,
    pub v: Func,
    pub w: Func,
    pub lambda: f64,
    /// `∫u / ∫v`.
    pub a: f64,
    pub theta0: Option<f64>,
    /// Built with `u` and `v` exchanged and `λ = 1 - α/β`.
    pub complementary: bool,
}

impl std::fmt::Debug for PLTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PLTriple")
            .field("lambda", &self.lambda)
            .field("a", &self.a)
            .field("theta0", &self.theta0)
            .field("complementary", &self.complementary)
            .finish()
    }
}

/// `x ↦ mul·f(s·x) + quad·|x|² + shift` on the rescaled layout of `f`.
fn affine(f: &Func, s: f64, mul: f64, quad: f64, shift: f64) -> Result<Func> {
    let tail = match f.tail() {
        Some(t) if quad != 0.0 && (t.q - 2.0).abs() > 1e-12 => {
            return Err(Error::InvalidParams("a quadratic weight needs a quadratic tail".into()))
        }
        Some(t) => Some(Tail {
            c1: mul * t.c1 + shift,
            c2: mul * t.c2 * s.powf(t.q) - quad,
            q: t.q,
        }),
        None => None,
    };
    match f {
        Func::Radial(p) => {
            let src = p.clone();
            let src2 = p.clone();
            let r: Vec<f64> = p.radii().iter().map(|x| x / s).collect();
            let exact = ClosureRadial {
                value: move |r: f64| mul * src.value(s * r) + quad * r * r + shift,
                slope: move |r: f64| mul * s * src2.slope(s * r) + 2.0 * quad * r,
            };
            Ok(Func::Radial(RadialProfile::from_exact(p.n(), r, tail, Arc::new(exact))?))
        }
        Func::Grid(g) => {
            let src = g.clone();
            let src2 = g.clone();
            let o = g.origin();
            let exact = ClosureField {
                value: move |x: [f64; 2]| {
                    mul * src.value([s * x[0], s * x[1]]) + quad * (x[0] * x[0] + x[1] * x[1]) + shift
                },
                gradient: move |x: [f64; 2]| {
                    let d = src2.gradient([s * x[0], s * x[1]]);
                    [mul * s * d[0] + 2.0 * quad * x[0], mul * s * d[1] + 2.0 * quad * x[1]]
                },
            };
            let dim = g.dim();
            Ok(Func::Grid(GridFunction::from_exact(
                dim,
                &[o[0] / s, o[1] / s][..dim],
                g.spacing() / s,
                &g.shape()[..dim],
                tail,
                Arc::new(exact),
            )?))
        }
    }
}

/// A radial `c - k|x|^q` on the layout of `like`.
fn power_profile(like: &Func, c: f64, k: f64, q: f64) -> Result<Func> {
    let tail = Some(Tail { c1: c, c2: k, q });
    match like {
        Func::Radial(p) => {
            let r_max = (60.0 / k).powf(1.0 / q).max(p.r_max());
            let exact = ClosureRadial {
                value: move |r: f64| c - k * r.powf(q),
                slope: move |r: f64| -k * q * r.powf(q - 1.0),
            };
            Ok(Func::Radial(RadialProfile::from_exact(
                p.n(),
                hybrid_grid(r_max, p.radii().len().max(1024)),
                tail,
                Arc::new(exact),
            )?))
        }
        Func::Grid(g) => {
            let exact = ClosureField {
                value: move |x: [f64; 2]| c - k * x[0].hypot(x[1]).powf(q),
                gradient: move |x: [f64; 2]| {
                    let r = x[0].hypot(x[1]);
                    if r == 0.0 {
                        return [0.0, 0.0];
                    }
                    let s = -k * q * r.powf(q - 2.0);
                    [s * x[0], s * x[1]]
                },
            };
            let dim = g.dim();
            Ok(Func::Grid(GridFunction::from_exact(
                dim,
                &g.origin()[..dim],
                g.spacing(),
                &g.shape()[..dim],
                tail,
                Arc::new(exact),
            )?))
        }
    }
}

fn ln_int(f: &Func) -> Result<f64> {
    ln_integral_exp(f, 1.0, Measure::Lebesgue)
}

/// `u = e^{βQ_t g}`, `v = e^{-θ0|x|^{p'}/p'}`, `w = e^{αg(βx/α)}` with
/// `λ = α/β`; `complementary` exchanges `u` and `v` and uses `λ = 1 - α/β`.
pub fn build_hc_triple(g: &Func, params: &HCParams, complementary: bool) -> Result<PLTriple> {
    params.validate()?;
    let HCParams { t, alpha, beta, .. } = *params;
    let pc = params.p_conj();
    let theta0 = beta * ((beta - alpha) / (alpha * t)).powf(pc - 1.0);
    let q = hopf_lax(g, params.hopf_lax()?, default_method(g))?;
    let u = q.scaled(beta);
    let v = power_profile(g, 0.0, theta0 / pc, pc)?;
    let w = affine(g, beta / alpha, alpha, 0.0, 0.0)?;
    let (u, v, lambda) = if complementary {
        (v, u, 1.0 - alpha / beta)
    } else {
        (u, v, alpha / beta)
    };
    let a = (ln_int(&u)? - ln_int(&v)?).exp();
    Ok(PLTriple {
        u,
        v,
        w,
        lambda,
        a,
        theta0: Some(theta0),
        complementary,
    })
}

/// `u = (2π)^{-n/2} e^{(α+t)Q_t g - |x|²/2}`, `v` the Gaussian density,
/// `w = (2π)^{-n/2} e^{αg - |x|²/2}`, `λ = α/(α+t)`.
pub fn build_gaussian_triple(g: &Func, alpha: f64, t: f64) -> Result<PLTriple> {
    if !(alpha > 0.0 && t > 0.0) {
        return Err(Error::InvalidParams(format!("need alpha, t > 0; got ({alpha}, {t})")));
    }
    let c = -0.5 * g.n() as f64 * (2.0 * std::f64::consts::PI).ln();
    let q = hopf_lax(g, HopfLaxParams::new(2.0, t)?, default_method(g))?;
    let u = affine(&q, 1.0, alpha + t, -0.5, c)?;
    let v = power_profile(g, c, 0.5, 2.0)?;
    let w = affine(g, 1.0, alpha, -0.5, c)?;
    let a = (ln_int(&u)? - ln_int(&v)?).exp();
    Ok(PLTriple {
        u,
        v,
        w,
        lambda: alpha / (alpha + t),
        a,
        theta0: None,
        complementary: false,
    })
}

/// Point of `ℝⁿ` for evaluation; grids use the first `dim` coordinates.
fn eval_at(f: &Func, x: &[f64]) -> f64 {
    match f {
        Func::Radial(p) => p.value(x.iter().map(|c| c * c).sum::<f64>().sqrt()),
        Func::Grid(g) => g.value([x[0], x.get(1).copied().unwrap_or(0.0)]),
    }
}

fn sampling_radius(f: &Func) -> f64 {
    match f {
        Func::Radial(p) => p.r_max(),
        Func::Grid(g) => {
            let (o, e) = (g.origin(), g.extent());
            (0..g.dim())
                .map(|a| o[a].abs().min(e[a].abs()))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Largest `λ log u(x) + (1-λ) log v(y) - log w(λx + (1-λ)y)` over random
/// pairs, the diagonal, and the first axis. `radius = 0` picks the common
/// sampled range.
pub fn check_pl_hypothesis(triple: &PLTriple, samples: usize, radius: f64, seed: u64) -> f64 {
    let n = triple.u.n();
    let dim = match &triple.u {
        Func::Grid(g) => g.dim(),
        Func::Radial(_) => n,
    };
    let r = if radius > 0.0 {
        radius
    } else {
        [&triple.u, &triple.v, &triple.w]
            .iter()
            .map(|f| sampling_radius(f))
            .fold(f64::INFINITY, f64::min)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let x = (0..dim).map(|_| rng.random_range(-r..r)).collect();
            let y = (0..dim).map(|_| rng.random_range(-r..r)).collect();
            (x, y)
        })
        .collect();
    let slice = 100;
    for i in 0..=slice {
        let s = -r + 2.0 * r * i as f64 / slice as f64;
        let mut x = vec![0.0; dim];
        x[0] = s;
        pairs.push((x.clone(), x.clone()));
        for j in (0..=slice).step_by(10) {
            let mut y = vec![0.0; dim];
            y[0] = -r + 2.0 * r * j as f64 / slice as f64;
            pairs.push((x.clone(), y));
        }
    }
    let l = triple.lambda;
    pairs
        .par_iter()
        .map(|(x, y)| {
            let lu = eval_at(&triple.u, x);
            let lv = eval_at(&triple.v, y);
            if lu == f64::NEG_INFINITY || lv == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| l * a + (1.0 - l) * b).collect();
            l * lu + (1.0 - l) * lv - eval_at(&triple.w, &z)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// `∫w / ((∫u)^λ (∫v)^{1-λ}) - 1`, assembled from logs.
pub fn pl_epsilon(triple: &PLTriple) -> Result<f64> {
    let l = triple.lambda;
    let ln = ln_int(&triple.w)? - l * ln_int(&triple.u)? - (1.0 - l) * ln_int(&triple.v)?;
    Ok(ln.exp_m1())
}

/// `∫|e^a - e^b|` of two log-domain functions on the quadrature of `base`.
fn l1_between<A, B>(base: &Func, la: A, lb: B) -> Result<f64>
where
    A: Fn(&[f64]) -> f64,
    B: Fn(&[f64]) -> f64,
{
    let spec = Integrand {
        alpha: 1.0,
        extra_pow: 0.0,
        dense: true,
    };
    let n = base.n();
    let ln = base.certified(Measure::Lebesgue, spec, |q| {
        let vals = q.map_points(|r, x| {
            let pt: Vec<f64> = match base {
                Func::Radial(_) => {
                    let mut v = vec![0.0; n];
                    v[0] = r;
                    v
                }
                Func::Grid(g) => x[..g.dim()].to_vec(),
            };
            let (a, b) = (la(&pt), lb(&pt));
            let hi = a.max(b);
            if hi == f64::NEG_INFINITY {
                0.0
            } else {
                hi.exp() * (-(a - b).abs()).exp_m1().abs()
            }
        });
        Ok(q.integral_linear(&vals).ln())
    })?;
    Ok(ln.exp())
}

/// `(∫|u(x) - a v(x - x0)|, a ∫|a^{-λ} w(x) - v(x - y0)|)`.
pub fn pl_conclusion_distances(triple: &PLTriple, x0: [f64; 2], y0: [f64; 2]) -> Result<(f64, f64)> {
    let radial = matches!(triple.u, Func::Radial(_));
    if radial && (x0 != [0.0; 2] || y0 != [0.0; 2]) {
        return Err(Error::InvalidParams("radial triples are compared without translation".into()));
    }
    let shift = |x: &[f64], s: [f64; 2]| -> Vec<f64> {
        x.iter().enumerate().map(|(i, c)| c - s.get(i).copied().unwrap_or(0.0)).collect()
    };
    let ln_a = triple.a.ln();
    let t1 = l1_between(
        &triple.u,
        |x| eval_at(&triple.u, x),
        |x| ln_a + eval_at(&triple.v, &shift(x, x0)),
    )?;
    let l = triple.lambda;
    let t2 = l1_between(
        &triple.w,
        |x| -l * ln_a + eval_at(&triple.w, x),
        |x| eval_at(&triple.v, &shift(x, y0)),
    )?;
    Ok((t1, triple.a * t2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlSummary {
    pub lambda: f64,
    pub a: f64,
    pub epsilon: f64,
    pub violation: f64,
}
