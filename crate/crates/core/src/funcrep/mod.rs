//! Function representations and the integrals built on them.
//!
//! Every function is stored by its exponent: a `Func` holding `φ` stands for
//! the nonnegative function `e^φ`. Integrals are assembled in the log domain
//! with a max shift so Gaussian-type densities never underflow.

mod grid;
mod io;
mod radial;
mod rearrange;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use grid::{ClosureField, FieldExact, GridFunction};
pub use io::{format_function, parse_function, read_function, write_function, FileHeader};
pub use radial::{hybrid_grid, uniform_grid, ClosureRadial, RadialExact, RadialProfile, MIN_NODES};
pub use rearrange::schwarz_rearrange;

use crate::error::{Error, Result};
use crate::quad::{composite_nodes, graded_breakpoints, log_sum_exp, GaussLegendre};
use crate::specfun::unit_ball_volume;

/// Integration measure on `ℝⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Measure {
    #[default]
    Lebesgue,
    /// Standard Gaussian `(2π)^{-n/2} e^{-|x|²/2} dx`.
    Gaussian,
}

impl Measure {
    /// Log density of the measure at squared radius `r2`.
    pub fn log_density(&self, n: usize, r2: f64) -> f64 {
        match self {
            Measure::Lebesgue => 0.0,
            Measure::Gaussian => -0.5 * r2 - 0.5 * n as f64 * (2.0 * PI).ln(),
        }
    }
}

/// Growth descriptor `g(r) ≈ c1 - c2 r^q` past the sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub c1: f64,
    pub c2: f64,
    pub q: f64,
}

impl Tail {
    pub fn value(&self, r: f64) -> f64 {
        self.c1 - self.c2 * r.powf(self.q)
    }
}

/// An exponent on `ℝⁿ`, radial or on a Cartesian grid.
#[derive(Debug, Clone)]
pub enum Func {
    Radial(RadialProfile),
    Grid(GridFunction),
}

impl From<RadialProfile> for Func {
    fn from(p: RadialProfile) -> Self {
        Func::Radial(p)
    }
}

impl From<GridFunction> for Func {
    fn from(g: GridFunction) -> Self {
        Func::Grid(g)
    }
}

/// Quadrature nodes.
#[derive(Debug, Clone)]
pub enum Points {
    /// Radii; weights carry the `nω_n r^{n-1}` factor.
    Radial(Vec<f64>),
    /// Cartesian nodes (1D uses the first coordinate).
    Cartesian { dim: usize, coords: Vec<[f64; 2]> },
}

impl Points {
    pub fn len(&self) -> usize {
        match self {
            Points::Radial(r) => r.len(),
            Points::Cartesian { coords, .. } => coords.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|x|` at node `i`.
    pub fn radius(&self, i: usize) -> f64 {
        match self {
            Points::Radial(r) => r[i],
            Points::Cartesian { coords, .. } => coords[i][0].hypot(coords[i][1]),
        }
    }
}

/// Nodes plus log weights (measure density included).
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub n: usize,
    pub measure: Measure,
    pub points: Points,
    pub log_weights: Vec<f64>,
}

impl Quadrature {
    /// `ln ∫ e^{h}` for log-integrand samples `h` on the nodes.
    pub fn ln_integral(&self, h: &[f64]) -> f64 {
        log_sum_exp(self.log_weights.iter().zip(h).map(|(w, v)| w + v))
    }

    /// `∫ s` for a signed integrand given directly (not in log form).
    pub fn integral_linear(&self, s: &[f64]) -> f64 {
        self.log_weights
            .iter()
            .zip(s)
            .filter(|(_, v)| **v != 0.0)
            .map(|(w, v)| w.exp() * v)
            .sum()
    }

    /// Evaluate an analytic model given as a function of the node position.
    pub fn map_points<F: Fn(f64, [f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        match &self.points {
            Points::Radial(r) => r.iter().map(|&x| f(x, [x, 0.0])).collect(),
            Points::Cartesian { coords, .. } => coords
                .iter()
                .map(|c| f(c[0].hypot(c[1]), *c))
                .collect(),
        }
    }
}

/// How an integrand grows relative to `e^{αφ}`, used for certified truncation.
#[derive(Debug, Clone, Copy)]
pub struct Integrand {
    /// Multiplier of the exponent.
    pub alpha: f64,
    /// Extra polynomial power `r^k` carried by the integrand.
    pub extra_pow: f64,
    /// Use dense panels (integrands with kinks, e.g. absolute values).
    pub dense: bool,
}

impl Integrand {
    pub fn exp(alpha: f64) -> Self {
        Self {
            alpha,
            extra_pow: 0.0,
            dense: false,
        }
    }
}

/// Relative size the certified tail bound may reach.
const TAIL_TOL: f64 = 1e-13;
const PANELS: usize = 128;
const DENSE_PANELS: usize = 640;

impl Func {
    pub fn n(&self) -> usize {
        match self {
            Func::Radial(p) => p.n(),
            Func::Grid(g) => g.dim(),
        }
    }

    pub fn tail(&self) -> Option<Tail> {
        match self {
            Func::Radial(p) => p.tail(),
            Func::Grid(g) => g.tail(),
        }
    }

    pub fn as_radial(&self) -> Option<&RadialProfile> {
        match self {
            Func::Radial(p) => Some(p),
            Func::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridFunction> {
        match self {
            Func::Grid(g) => Some(g),
            Func::Radial(_) => None,
        }
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Func {
        match self {
            Func::Radial(p) => Func::Radial(p.shifted(c)),
            Func::Grid(g) => Func::Grid(g.shifted(c)),
        }
    }

    /// `k φ`.
    pub fn scaled(&self, k: f64) -> Func {
        match self {
            Func::Radial(p) => Func::Radial(p.scaled(k)),
            Func::Grid(g) => Func::Grid(g.scaled(k)),
        }
    }

    /// Exponent at a point; radial profiles take `x = [r, 0]` or any vector
    /// whose norm is the radius.
    pub fn value_at(&self, x: [f64; 2]) -> f64 {
        match self {
            Func::Radial(p) => p.value(x[0].hypot(x[1])),
            Func::Grid(g) => g.value(x),
        }
    }

    /// Exponent at quadrature nodes.
    pub fn eval(&self, pts: &Points) -> Result<Vec<f64>> {
        match (self, pts) {
            (Func::Radial(p), Points::Radial(r)) => Ok(p.values(r)),
            (Func::Grid(g), Points::Cartesian { dim, coords }) if *dim == g.dim() => {
                Ok(g.values(coords))
            }
            _ => Err(Error::InvalidParams(
                "function and quadrature representations differ".into(),
            )),
        }
    }

    /// `|∇φ|` at quadrature nodes.
    pub fn grad_norms(&self, pts: &Points) -> Result<Vec<f64>> {
        match (self, pts) {
            (Func::Radial(p), Points::Radial(r)) => {
                Ok(p.slopes(r).into_iter().map(f64::abs).collect())
            }
            (Func::Grid(g), Points::Cartesian { dim, coords }) if *dim == g.dim() => Ok(coords
                .iter()
                .map(|&x| {
                    let d = g.gradient(x);
                    d[0].hypot(d[1])
                })
                .collect()),
            _ => Err(Error::InvalidParams(
                "function and quadrature representations differ".into(),
            )),
        }
    }

    /// A quadrature rule for `∫ e^{αφ} r^k dm` truncated at radius `r_trunc`.
    pub fn quadrature_to(&self, measure: Measure, r_trunc: f64, dense: bool) -> Quadrature {
        match self {
            Func::Radial(p) => radial_quadrature(p, measure, r_trunc, dense),
            Func::Grid(g) => g.quadrature(measure),
        }
    }

    /// Integrate a log-integrand assembled by `build` from the quadrature,
    /// enlarging the truncation radius until the certified tail bound is
    /// below `TAIL_TOL` of the integral. Returns `build`'s log integral.
    pub fn certified<F>(&self, measure: Measure, spec: Integrand, build: F) -> Result<f64>
    where
        F: Fn(&Quadrature) -> Result<f64>,
    {
        match self {
            Func::Grid(g) => build(&g.quadrature(measure)),
            Func::Radial(p) => {
                let Some(bound) = TailBound::new(p, measure, spec)? else {
                    let q = radial_quadrature(p, measure, p.r_max(), spec.dense);
                    return build(&q);
                };
                let mut r = bound.initial_radius();
                for _ in 0..40 {
                    let q = radial_quadrature(p, measure, r, spec.dense);
                    let ln_i = build(&q)?;
                    let ln_tail = bound.ln_tail(r);
                    if !ln_i.is_finite() || ln_tail - ln_i < TAIL_TOL.ln() {
                        return Ok(ln_i);
                    }
                    r *= 1.4;
                }
                Err(Error::Divergence(
                    "tail bound did not fall below tolerance".into(),
                ))
            }
        }
    }
}

/// Concave upper bound `φ(r) = A - B r^q - G r² + k ln r` for the log integrand
/// (times `nω_n`), valid past the sampled range.
struct TailBound {
    ln_const: f64,
    b: f64,
    q: f64,
    gauss: f64,
    k: f64,
    peak: f64,
}

impl TailBound {
    fn new(p: &RadialProfile, measure: Measure, spec: Integrand) -> Result<Option<Self>> {
        let Some(tail) = p.tail() else {
            return Ok(None);
        };
        let gauss = if measure == Measure::Gaussian { 0.5 } else { 0.0 };
        if tail.c2 < 0.0 || (tail.c2 == 0.0 && gauss == 0.0) {
            return Err(Error::Divergence(format!(
                "tail c2 = {} gives no decay under {:?}",
                tail.c2, measure
            )));
        }
        // smallest c1 making the bound hold on every sample
        let c1 = p
            .radii()
            .iter()
            .zip(p.logvals())
            .map(|(&r, &g)| g + tail.c2 * r.powf(tail.q))
            .fold(tail.c1, f64::max);
        let n = p.n() as f64;
        let ln_const = spec.alpha * c1
            + (n * unit_ball_volume(p.n())).ln()
            + measure.log_density(p.n(), 0.0);
        let peak = spec.alpha * p.logvals().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Some(Self {
            ln_const,
            b: spec.alpha * tail.c2,
            q: tail.q,
            gauss,
            k: n - 1.0 + spec.extra_pow,
            peak,
        }))
    }

    fn phi(&self, r: f64) -> f64 {
        self.ln_const - self.b * r.powf(self.q) - self.gauss * r * r + self.k * r.ln()
    }

    fn dphi(&self, r: f64) -> f64 {
        -self.b * self.q * r.powf(self.q - 1.0) - 2.0 * self.gauss * r + self.k / r
    }

    /// `ln ∫_R^∞ e^φ ≤ φ(R) - ln(-φ'(R))` once `φ` is decreasing; `+∞` before.
    fn ln_tail(&self, r: f64) -> f64 {
        let d = self.dphi(r);
        if d >= 0.0 {
            return f64::INFINITY;
        }
        self.phi(r) - (-d).ln()
    }

    fn initial_radius(&self) -> f64 {
        let mut r = 1.0;
        while (self.phi(r) > self.peak - 40.0 || self.dphi(r) >= 0.0) && r < 1e8 {
            r *= 1.25;
        }
        r
    }
}

fn radial_quadrature(p: &RadialProfile, measure: Measure, r_trunc: f64, dense: bool) -> Quadrature {
    let n = p.n();
    let ln_area = (n as f64 * unit_ball_volume(n)).ln();
    let gl = GaussLegendre::standard();
    let (xs, ws) = if p.has_exact() {
        let panels = if dense { DENSE_PANELS } else { PANELS };
        composite_nodes(&graded_breakpoints(r_trunc, panels), gl)
    } else {
        // sampled profiles are piecewise linear: integrate cell by cell
        let cell_rule = cell_rule();
        let mut breaks: Vec<f64> = p.radii().iter().cloned().filter(|&r| r < r_trunc).collect();
        breaks.push(r_trunc.min(p.r_max()));
        if r_trunc > p.r_max() {
            let span = r_trunc - p.r_max();
            let m = if dense { DENSE_PANELS } else { PANELS };
            for i in 1..=m {
                breaks.push(p.r_max() + span * i as f64 / m as f64);
            }
        }
        breaks.dedup();
        composite_nodes(&breaks, cell_rule)
    };
    let log_weights = xs
        .iter()
        .zip(&ws)
        .map(|(&r, &w)| {
            w.ln() + ln_area + (n as f64 - 1.0) * r.ln() + measure.log_density(n, r * r)
        })
        .collect();
    Quadrature {
        n,
        measure,
        points: Points::Radial(xs),
        log_weights,
    }
}

fn cell_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// `ln ∫ e^{αφ} dm`.
pub fn ln_integral_exp(phi: &Func, alpha: f64, measure: Measure) -> Result<f64> {
    phi.certified(measure, Integrand::exp(alpha), |q| {
        let v = phi.eval(&q.points)?;
        let h: Vec<f64> = v.iter().map(|x| alpha * x).collect();
        Ok(q.ln_integral(&h))
    })
}

/// `∫ e^{h} dm` for a radial log-integrand `h`.
pub fn radial_integral(h: &RadialProfile, measure: Measure) -> Result<f64> {
    Ok(ln_integral_exp(&Func::Radial(h.clone()), 1.0, measure)?.exp())
}

/// `ln ‖e^g‖_α = (1/α) ln ∫ e^{αg} dm`.
pub fn log_norm_alpha(g: &Func, alpha: f64, measure: Measure) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(ln_integral_exp(g, alpha, measure)? / alpha)
}

/// `(ln ∫ρ, Ent(ρ)/∫ρ)` for `ρ = e^φ`; the ratio form never overflows.
pub fn entropy_parts(rho: &Func, measure: Measure) -> Result<(f64, f64)> {
    let tail_pow = rho.tail().map_or(0.0, |t| t.q);
    let ln_z = ln_integral_exp(rho, 1.0, measure)?;
    if !ln_z.is_finite() {
        return Err(Error::Degenerate("density integrates to zero".into()));
    }
    // E/Z with E = ∫ e^φ φ; split φ into positive and negative parts
    let spec = Integrand {
        alpha: 1.0,
        extra_pow: tail_pow,
        dense: false,
    };
    let mean = std::cell::Cell::new(0.0);
    rho.certified(measure, spec, |q| {
        let v = rho.eval(&q.points)?;
        let mut acc = 0.0;
        let mut abs_acc = f64::NEG_INFINITY;
        for (w, &phi) in q.log_weights.iter().zip(&v) {
            if phi == f64::NEG_INFINITY {
                continue;
            }
            let lw = w + phi - ln_z;
            acc += lw.exp() * phi;
            if phi != 0.0 {
                abs_acc = log_sum_exp([abs_acc, lw + phi.abs().ln()]);
            }
        }
        // the last pass is the certified one
        mean.set(acc);
        Ok(abs_acc + ln_z)
    })?;
    Ok((ln_z, mean.get() - ln_z))
}

/// `Ent(ρ) = ∫ρ ln ρ - ∫ρ ln ∫ρ` for `ρ = e^φ`.
pub fn entropy(rho: &Func, measure: Measure) -> Result<f64> {
    let (ln_z, ratio) = entropy_parts(rho, measure)?;
    Ok(ln_z.exp() * ratio)
}

/// `ln ∫ |∇f|^p dm` for `f = e^φ`, i.e. `ln ∫ e^{pφ} |∇φ|^p`.
pub fn ln_grad_norm_p(f: &Func, p: f64, measure: Measure) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("p must exceed 1, got {p}")));
    }
    let extra = f.tail().map_or(0.0, |t| p * (t.q - 1.0).max(0.0));
    let spec = Integrand {
        alpha: p,
        extra_pow: extra,
        dense: false,
    };
    f.certified(measure, spec, |q| {
        let v = f.eval(&q.points)?;
        let d = f.grad_norms(&q.points)?;
        let h: Vec<f64> = v
            .iter()
            .zip(&d)
            .map(|(&phi, &s)| {
                if s == 0.0 || phi == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    p * phi + p * s.ln()
                }
            })
            .collect();
        Ok(q.ln_integral(&h))
    })
}

/// `∫ |∇f|^p dm` for `f = e^φ`.
pub fn grad_norm_p(f: &Func, p: f64, measure: Measure) -> Result<f64> {
    Ok(ln_grad_norm_p(f, p, measure)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{gamma, power_exponential_integral};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn power_profile(n: usize, m: f64, q: f64) -> RadialProfile {
        let exact = ClosureRadial {
            value: move |r: f64| -m * r.powf(q),
            slope: move |r: f64| -m * q * r.powf(q - 1.0),
        };
        RadialProfile::from_exact(
            n,
            hybrid_grid(12.0, 512),
            Some(Tail { c1: 0.0, c2: m, q }),
            Arc::new(exact),
        )
        .unwrap()
    }

    #[test]
    fn gaussian_integral_in_one_dimension() {
        let v = radial_integral(&power_profile(1, 1.0, 2.0), Measure::Lebesgue).unwrap();
        assert_relative_eq!(v, PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn indicator_of_unit_disk() {
        let r = uniform_grid(2.0, 201);
        let g = r.iter().map(|&x| if x <= 1.0 { 0.0 } else { f64::NEG_INFINITY }).collect();
        let h = RadialProfile::new(2, r, g, None).unwrap();
        assert_relative_eq!(radial_integral(&h, Measure::Lebesgue).unwrap(), PI, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_measure_is_normalized() {
        for n in 1..=3 {
            let r = uniform_grid(4.0, 64);
            let h = RadialProfile::new(n, r, vec![0.0; 64], Some(Tail { c1: 0.0, c2: 0.0, q: 2.0 }))
                .unwrap();
            let v = radial_integral(&h, Measure::Gaussian).unwrap();
            assert_relative_eq!(v, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn matches_power_exponential_formula() {
        for n in 1..=3 {
            for &q in &[1.5, 2.0, 3.0] {
                for &m in &[0.5, 1.0, 2.0] {
                    let v = radial_integral(&power_profile(n, m, q), Measure::Lebesgue).unwrap();
                    let want = power_exponential_integral(n, q, m).unwrap();
                    assert_relative_eq!(v, want, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn norm_of_gaussian_exponent() {
        let g = Func::Radial(power_profile(1, 1.0, 2.0));
        let v = log_norm_alpha(&g, 1.0, Measure::Lebesgue).unwrap();
        assert_relative_eq!(v, PI.sqrt().ln(), max_relative = 1e-12);
        assert!(log_norm_alpha(&g, 0.0, Measure::Lebesgue).is_err());
    }

    #[test]
    fn no_decay_is_divergence() {
        let r = uniform_grid(4.0, 64);
        let h = RadialProfile::new(1, r, vec![0.0; 64], Some(Tail { c1: 0.0, c2: 0.0, q: 2.0 }))
            .unwrap();
        assert!(matches!(
            radial_integral(&h, Measure::Lebesgue),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn entropy_of_extremizer_power() {
        // ρ = e^{-|x|^{p'}}
        for &(n, p) in &[(1usize, 2.0f64), (2, 2.0), (1, 3.0), (3, 1.5)] {
            let pc = p / (p - 1.0);
            let rho = Func::Radial(power_profile(n, 1.0, pc));
            let s = n as f64 * unit_ball_volume(n) / pc;
            let want = -s * gamma(1.0 + n as f64 / pc).unwrap()
                - s * gamma(n as f64 / pc).unwrap() * (s * gamma(n as f64 / pc).unwrap()).ln();
            let got = entropy(&rho, Measure::Lebesgue).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn entropy_of_indicator_is_zero() {
        let r = uniform_grid(1.0, 101);
        let rr = (1.0 / PI).sqrt();
        // grid node exactly at the cut
        let mut grid = r;
        grid.push(rr);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let g2: Vec<f64> = grid.iter().map(|&x| if x <= rr { 0.0 } else { f64::NEG_INFINITY }).collect();
        let h = RadialProfile::new(2, grid, g2, None).unwrap();
        let e = entropy(&Func::Radial(h), Measure::Lebesgue).unwrap();
        assert!(e.abs() < 1e-12, "{e}");
    }

    #[test]
    fn grad_norm_of_stretched_family() {
        // f_ε = e^{-|x|^{q}/p}, q = p' - ε
        for &(n, p, eps) in &[(1usize, 2.0f64, 0.1f64), (2, 2.0, 0.0), (1, 3.0, 0.2)] {
            let pc = p / (p - 1.0);
            let q = pc - eps;
            let f = Func::Radial(power_profile(n, 1.0 / p, q));
            let got = grad_norm_p(&f, p, Measure::Lebesgue).unwrap();
            let nf = n as f64;
            let want = nf * unit_ball_volume(n) * q.powf(p - 1.0) / p.powf(p)
                * gamma((p * (q - 1.0) + nf) / q).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-9);
        }
    }

    #[test]
    fn grad_norm_gaussian_measure() {
        let eps: f64 = 0.3;
        let f = Func::Radial(power_profile(1, eps / 2.0, 2.0));
        let got = grad_norm_p(&f, 2.0, Measure::Gaussian).unwrap();
        assert_relative_eq!(got, eps * eps * (1.0 + 2.0 * eps).powf(-1.5), max_relative = 1e-10);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let r = uniform_grid(4.0, 64);
        let h = RadialProfile::new(1, r, vec![0.3; 64], Some(Tail { c1: 0.3, c2: 0.0, q: 2.0 }))
            .unwrap();
        assert!(grad_norm_p(&Func::Radial(h), 2.0, Measure::Gaussian).unwrap() < 1e-20);
    }

    proptest! {
        #[test]
        fn shift_law(c in -50.0f64..50.0, alpha in 0.2f64..4.0) {
            let g = Func::Radial(power_profile(2, 1.0, 2.0));
            let a = log_norm_alpha(&g, alpha, Measure::Lebesgue).unwrap();
            let b = log_norm_alpha(&g.shifted(c), alpha, Measure::Lebesgue).unwrap();
            prop_assert!((b - a - c).abs() < 1e-12 * (1.0 + c.abs()));
        }

        #[test]
        fn entropy_homogeneity(c in 0.01f64..10.0) {
            let rho = Func::Radial(power_profile(2, 0.7, 1.8));
            let e = entropy(&rho, Measure::Lebesgue).unwrap();
            let ec = entropy(&rho.shifted(c.ln()), Measure::Lebesgue).unwrap();
            prop_assert!((ec - c * e).abs() < 1e-10 * (1.0 + (c * e).abs()));
        }
    }
}
