//! The Hopf-Lax semigroup
//! `Q_t g(x) = inf_y { g(y) + |x-y|^{p'} / (p' t^{p'-1}) }`.
//!
//! Every solver runs a discrete scan over the source nodes followed by a
//! golden-section refinement on the neighbouring cells. The fast solver
//! replaces the scan with divide and conquer on the monotone argmin, which
//! the convex cost guarantees. Images keep the source and answer off-grid
//! queries by the same minimization.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::{FieldExact, Func, GridFunction, RadialExact, RadialProfile, Tail};

/// Safety factor applied to the finiteness threshold.
pub const T_MARGIN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfLaxParams {
    pub p: f64,
    pub p_conj: f64,
    pub t: f64,
}

impl HopfLaxParams {
    pub fn new(p: f64, t: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParams(format!("p must exceed 1, got {p}")));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParams(format!("t must be nonnegative, got {t}")));
        }
        Ok(Self {
            p,
            p_conj: p / (p - 1.0),
            t,
        })
    }

    /// `d^{p'} / (p' t^{p'-1})` for a distance `d >= 0`.
    pub fn cost(&self, d: f64) -> f64 {
        let q = self.p_conj;
        d.powf(q) / (q * self.t.powf(q - 1.0))
    }

    /// Derivative of the cost in `d`.
    fn cost_slope(&self, d: f64) -> f64 {
        (d / self.t).powf(self.p_conj - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Brute,
    Fast,
    Radial,
}

/// Largest `t` for which the infimum is finite given `g >= c1 - c2 r^q`.
///
/// With `q = p'` the infimum over the ray is finite exactly when
/// `c2 < 1/(p' t^{p'-1})`; slower tails never blow up and faster ones
/// always do.
pub fn finiteness_threshold(tail: Option<Tail>, p_conj: f64) -> f64 {
    let Some(t) = tail else {
        return f64::INFINITY;
    };
    if t.c2 <= 0.0 || t.q < p_conj - 1e-12 {
        f64::INFINITY
    } else if t.q > p_conj + 1e-12 {
        0.0
    } else {
        (p_conj * t.c2).powf(1.0 / (1.0 - p_conj))
    }
}

fn check_time(tail: Option<Tail>, params: &HopfLaxParams) -> Result<()> {
    let bound = finiteness_threshold(tail, params.p_conj);
    if params.t > T_MARGIN * bound {
        return Err(Error::InfimumUnbounded {
            t: params.t,
            bound,
        });
    }
    Ok(())
}

/// Tail of `Q_t g` when `g` has tail `c1 - c2 r^q`.
pub fn image_tail(tail: Option<Tail>, params: &HopfLaxParams) -> Option<Tail> {
    let t = tail?;
    let q = params.p_conj;
    if t.c2 > 0.0 && (t.q - q).abs() < 1e-12 {
        let b = q * t.c2 * params.t.powf(q - 1.0);
        let c2 = t.c2 / (1.0 - b.powf(params.p - 1.0)).powf(q - 1.0);
        Some(Tail { c2, ..t })
    } else {
        Some(t)
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (fa, fb) = (f(a), f(b));
    let mut best = if fa <= fb { (a, fa) } else { (b, fb) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// One-dimensional minimization engine over sorted source nodes.
struct Line<'a> {
    nodes: &'a [f64],
    vals: &'a [f64],
    eval: &'a (dyn Fn(f64) -> f64 + Sync),
    /// The source is piecewise linear between nodes.
    piecewise_linear: bool,
    /// Tail continuation past the first/last node.
    tail_left: bool,
    tail_right: bool,
    params: HopfLaxParams,
}

impl Line<'_> {
    fn objective(&self, x: f64, y: f64) -> f64 {
        (self.eval)(y) + self.params.cost((x - y).abs())
    }

    fn node_objective(&self, x: f64, j: usize) -> f64 {
        let v = self.vals[j];
        if v == f64::NEG_INFINITY {
            // outside the support: never a minimizer
            return f64::INFINITY;
        }
        v + self.params.cost((x - self.nodes[j]).abs())
    }

    fn argmin_range(&self, x: f64, lo: usize, hi: usize) -> usize {
        let mut best = lo;
        let mut bv = self.node_objective(x, lo);
        for j in lo + 1..=hi {
            let v = self.node_objective(x, j);
            if v < bv {
                bv = v;
                best = j;
            }
        }
        best
    }

    fn argmin_brute(&self, x: f64) -> usize {
        self.argmin_range(x, 0, self.nodes.len() - 1)
    }

    /// Leftmost argmins for sorted queries by divide and conquer.
    fn argmin_monotone(&self, xs: &[f64]) -> Vec<usize> {
        let mut out = vec![0; xs.len()];
        self.dc(xs, &mut out, 0, xs.len(), 0, self.nodes.len() - 1);
        out
    }

    fn dc(&self, xs: &[f64], out: &mut [usize], qlo: usize, qhi: usize, lo: usize, hi: usize) {
        if qlo >= qhi {
            return;
        }
        let mid = (qlo + qhi) / 2;
        let j = self.argmin_range(xs[mid], lo, hi);
        out[mid] = j;
        self.dc(xs, out, qlo, mid, lo, j);
        self.dc(xs, out, mid + 1, qhi, j, hi);
    }

    /// Continuous refinement around node `j`: `(value, argmin)`.
    fn refine(&self, x: f64, j: usize) -> (f64, f64) {
        let m = self.nodes.len();
        let f = |y: f64| self.objective(x, y);
        let mut best = (self.nodes[j], self.node_objective(x, j));
        let mut consider = |a: f64, b: f64| {
            let (y, v) = golden_min(&f, a, b);
            if v < best.1 {
                best = (y, v);
            }
        };
        if self.piecewise_linear {
            if j > 0 {
                consider(self.nodes[j - 1], self.nodes[j]);
            }
            if j + 1 < m {
                consider(self.nodes[j], self.nodes[j + 1]);
            }
        } else {
            let a = self.nodes[j.saturating_sub(1)];
            let b = self.nodes[(j + 1).min(m - 1)];
            consider(a, b);
        }
        if j == m - 1 && self.tail_right {
            let hi = self.expand(x, self.nodes[m - 1], 1.0);
            consider(self.nodes[m - 2], hi);
        }
        if j == 0 && self.tail_left {
            let lo = self.expand(x, self.nodes[0], -1.0);
            consider(lo, self.nodes[1]);
        }
        (best.1, best.0)
    }

    /// Step outward from `y0` until the objective increases.
    fn expand(&self, x: f64, y0: f64, dir: f64) -> f64 {
        let base = self.objective(x, y0);
        let mut step = (self.nodes[1] - self.nodes[0]).abs().max(1e-3);
        let mut prev = base;
        for _ in 0..200 {
            let y = y0 + dir * step;
            let v = self.objective(x, y);
            if v > prev || !v.is_finite() {
                return y;
            }
            prev = v;
            step *= 2.0;
        }
        y0 + dir * step
    }
}

fn radial_line<'a>(
    src: &'a RadialProfile,
    eval: &'a (dyn Fn(f64) -> f64 + Sync),
    params: HopfLaxParams,
) -> Line<'a> {
    Line {
        nodes: src.radii(),
        vals: src.logvals(),
        eval,
        piecewise_linear: !src.has_exact(),
        tail_left: false,
        tail_right: src.tail().is_some(),
        params,
    }
}

/// Exact evaluator for a radial image.
struct RadialImage {
    src: RadialProfile,
    params: HopfLaxParams,
}

impl RadialImage {
    fn solve(&self, rs: &[f64], fast: bool) -> Vec<(f64, f64)> {
        let eval = |y: f64| self.src.value(y);
        let line = radial_line(&self.src, &eval, self.params);
        let sorted = rs.windows(2).all(|w| w[0] <= w[1]);
        let js = if fast && sorted {
            line.argmin_monotone(rs)
        } else {
            rs.par_iter().map(|&r| line.argmin_brute(r)).collect()
        };
        rs.par_iter()
            .zip(js.par_iter())
            .map(|(&r, &j)| line.refine(r, j))
            .collect()
    }
}

impl RadialExact for RadialImage {
    fn value(&self, r: f64) -> f64 {
        self.solve(&[r], false)[0].0
    }

    fn slope(&self, r: f64) -> f64 {
        self.slopes(&[r])[0]
    }

    fn values(&self, rs: &[f64]) -> Vec<f64> {
        self.solve(rs, true).into_iter().map(|v| v.0).collect()
    }

    /// Envelope theorem: `d/dr Q = sign(r - s*) |r - s*|^{p'-1} / t^{p'-1}`.
    fn slopes(&self, rs: &[f64]) -> Vec<f64> {
        self.solve(rs, true)
            .into_iter()
            .zip(rs)
            .map(|((_, s), &r)| (r - s).signum() * self.params.cost_slope((r - s).abs()))
            .collect()
    }
}

fn radial_image(g: &RadialProfile, params: HopfLaxParams, fast: bool) -> Result<RadialProfile> {
    check_time(g.tail(), &params)?;
    if params.t == 0.0 {
        return Ok(g.clone());
    }
    let image = RadialImage {
        src: g.clone(),
        params,
    };
    let vals: Vec<f64> = image
        .solve(g.radii(), fast)
        .into_iter()
        .map(|v| v.0)
        .collect();
    Ok(RadialProfile::from_parts(
        g.n(),
        g.radii_arc(),
        vals,
        image_tail(g.tail(), &params),
        Some(Arc::new(image)),
    ))
}

/// Radial profile of `Q_t g` via `inf_{s>=0} g(s) + cost(|r - s|)`.
pub fn radial_inf_convolve(g: &RadialProfile, params: HopfLaxParams) -> Result<RadialProfile> {
    radial_image(g, params, true)
}

/// Exact evaluator for a Cartesian image.
struct GridImage {
    src: GridFunction,
    params: HopfLaxParams,
}

impl GridImage {
    fn line_nodes(&self) -> Vec<f64> {
        (0..self.src.shape()[0]).map(|i| self.src.node(i)[0]).collect()
    }

    fn solve_1d(&self, xs: &[f64], fast: bool) -> Vec<(f64, f64)> {
        let nodes = self.line_nodes();
        let eval = |y: f64| self.src.value([y, 0.0]);
        let tail = self.src.tail().is_some();
        let line = Line {
            nodes: &nodes,
            vals: self.src.logvals(),
            eval: &eval,
            piecewise_linear: !self.src.has_exact(),
            tail_left: tail,
            tail_right: tail,
            params: self.params,
        };
        let sorted = xs.windows(2).all(|w| w[0] <= w[1]);
        let js = if fast && sorted {
            line.argmin_monotone(xs)
        } else {
            xs.par_iter().map(|&x| line.argmin_brute(x)).collect()
        };
        xs.par_iter()
            .zip(js.par_iter())
            .map(|(&x, &j)| line.refine(x, j))
            .collect()
    }

    /// 2D: exhaustive node scan, then coordinate golden passes.
    fn solve_2d(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let src = &self.src;
        let obj = |y: [f64; 2]| {
            src.value(y) + self.params.cost((x[0] - y[0]).hypot(x[1] - y[1]))
        };
        let mut best = 0;
        let mut bv = f64::INFINITY;
        // quadratic cost needs no root or power in the scan
        let quad = (self.params.p_conj == 2.0).then(|| 0.5 / self.params.t);
        for (k, &v) in src.logvals().iter().enumerate() {
            if v == f64::NEG_INFINITY {
                continue;
            }
            let y = src.node(k);
            let (dx, dy) = (x[0] - y[0], x[1] - y[1]);
            let c = match quad {
                Some(s) => s * (dx * dx + dy * dy),
                None => self.params.cost(dx.hypot(dy)),
            };
            let o = v + c;
            if o < bv {
                bv = o;
                best = k;
            }
        }
        let h = src.spacing();
        let mut y = src.node(best);
        let (lo, hi) = (src.origin(), src.extent());
        let centre = y;
        for _ in 0..4 {
            for a in 0..2 {
                let l = (centre[a] - h).max(lo[a]);
                let u = (centre[a] + h).min(hi[a]);
                let f = |s: f64| {
                    let mut z = y;
                    z[a] = s;
                    obj(z)
                };
                let (s, v) = golden_min(&f, l, u);
                if v < bv {
                    bv = v;
                    y[a] = s;
                }
            }
        }
        (bv, y)
    }
}

impl FieldExact for GridImage {
    fn value(&self, x: [f64; 2]) -> f64 {
        if self.src.dim() == 1 {
            self.solve_1d(&[x[0]], false)[0].0
        } else {
            self.solve_2d(x).0
        }
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let y = if self.src.dim() == 1 {
            [self.solve_1d(&[x[0]], false)[0].1, 0.0]
        } else {
            self.solve_2d(x).1
        };
        let d = [x[0] - y[0], x[1] - y[1]];
        let r = d[0].hypot(d[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let s = self.params.cost_slope(r) / r;
        [s * d[0], s * d[1]]
    }

    fn values(&self, xs: &[[f64; 2]]) -> Vec<f64> {
        if self.src.dim() == 1 {
            let line: Vec<f64> = xs.iter().map(|x| x[0]).collect();
            self.solve_1d(&line, true).into_iter().map(|v| v.0).collect()
        } else {
            xs.par_iter().map(|&x| self.solve_2d(x).0).collect()
        }
    }
}

fn grid_image(g: &GridFunction, params: HopfLaxParams, fast: bool) -> Result<GridFunction> {
    check_time(g.tail(), &params)?;
    if params.t == 0.0 {
        return Ok(g.clone());
    }
    let image = GridImage {
        src: g.clone(),
        params,
    };
    let vals = if g.dim() == 1 {
        let xs = image.line_nodes();
        image.solve_1d(&xs, fast).into_iter().map(|v| v.0).collect()
    } else {
        let nodes = g.nodes();
        nodes.par_iter().map(|&x| image.solve_2d(x).0).collect()
    };
    let mut out = g.with_values(vals, Some(Arc::new(image)));
    out.set_tail(image_tail(g.tail(), &params));
    Ok(out)
}

/// `Q_t g` by exhaustive minimization over the source nodes (plus the tail).
pub fn inf_convolve_bruteforce(g: &Func, params: HopfLaxParams) -> Result<Func> {
    match g {
        Func::Radial(p) => Ok(Func::Radial(radial_image(p, params, false)?)),
        Func::Grid(gf) => Ok(Func::Grid(grid_image(gf, params, false)?)),
    }
}

/// `Q_t g` with the monotone-argmin scan; one-dimensional inputs only.
pub fn inf_convolve_fast(g: &Func, params: HopfLaxParams) -> Result<Func> {
    match g {
        Func::Radial(p) => Ok(Func::Radial(radial_image(p, params, true)?)),
        Func::Grid(gf) if gf.dim() == 1 => Ok(Func::Grid(grid_image(gf, params, true)?)),
        Func::Grid(_) => Err(Error::InvalidParams(
            "the fast solver is one-dimensional; use brute force or the radial reduction".into(),
        )),
    }
}

/// Dispatch on a solver choice.
pub fn hopf_lax(g: &Func, params: HopfLaxParams, method: Method) -> Result<Func> {
    match method {
        Method::Brute => inf_convolve_bruteforce(g, params),
        Method::Fast => inf_convolve_fast(g, params),
        Method::Radial => match g {
            Func::Radial(p) => Ok(Func::Radial(radial_inf_convolve(p, params)?)),
            Func::Grid(_) => Err(Error::InvalidParams("radial method needs a radial profile".into())),
        },
    }
}

/// `Q_t g(x)` at a single point.
pub fn hopf_lax_at(g: &Func, x: [f64; 2], params: HopfLaxParams) -> Result<f64> {
    check_time(g.tail(), &params)?;
    if params.t == 0.0 {
        return Ok(g.value_at(x));
    }
    Ok(match g {
        Func::Radial(p) => RadialImage {
            src: p.clone(),
            params,
        }
        .value(x[0].hypot(x[1])),
        Func::Grid(gf) => GridImage {
            src: gf.clone(),
            params,
        }
        .value(x),
    })
}

/// Result of the small-time derivative check.
#[derive(Debug, Clone, Serialize)]
pub struct HjCheck {
    /// Extrapolated `lim (Q_t g(x) - g(x)) / t`.
    pub limit: f64,
    /// `-|∇g(x)|^p / p`.
    pub analytic: f64,
    /// Raw difference quotients along the ladder.
    pub quotients: Vec<f64>,
}

/// Difference quotients `(Q_t g(x) - g(x)) / t` on a decreasing ladder,
/// extrapolated to `t = 0` assuming a first-order error.
pub fn hj_derivative_check(g: &Func, x: [f64; 2], ladder: &[f64], p: f64) -> Result<HjCheck> {
    if ladder.len() < 2 || ladder.windows(2).any(|w| !(w[1] < w[0]) || w[1] <= 0.0) {
        return Err(Error::InvalidParams("ladder must be decreasing and positive".into()));
    }
    let g0 = g.value_at(x);
    let quotients = ladder
        .iter()
        .map(|&t| Ok((hopf_lax_at(g, x, HopfLaxParams::new(p, t)?)? - g0) / t))
        .collect::<Result<Vec<f64>>>()?;
    let k = ladder.len();
    let (t1, t2) = (ladder[k - 2], ladder[k - 1]);
    let (d1, d2) = (quotients[k - 2], quotients[k - 1]);
    let limit = (t1 * d2 - t2 * d1) / (t1 - t2);
    let grad = match g {
        Func::Radial(prof) => prof.slope(x[0].hypot(x[1])).abs(),
        Func::Grid(gf) => {
            let d = gf.gradient(x);
            d[0].hypot(d[1])
        }
    };
    Ok(HjCheck {
        limit,
        analytic: -grad.powf(p) / p,
        quotients,
    })
}
