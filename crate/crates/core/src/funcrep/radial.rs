use std::fmt;
use std::sync::Arc;

use super::Tail;
use crate::error::{Error, Result};

/// Minimum number of radial nodes.
pub const MIN_NODES: usize = 16;

/// An exact evaluator for a radial exponent `g(r)`.
pub trait RadialExact: Send + Sync {
    fn value(&self, r: f64) -> f64;

    /// `g'(r)`.
    fn slope(&self, r: f64) -> f64;

    /// Batched evaluation; `rs` is sorted ascending.
    fn values(&self, rs: &[f64]) -> Vec<f64> {
        rs.iter().map(|&r| self.value(r)).collect()
    }

    fn slopes(&self, rs: &[f64]) -> Vec<f64> {
        rs.iter().map(|&r| self.slope(r)).collect()
    }
}

/// Closure-backed exact evaluator.
pub struct ClosureRadial<F, D> {
    pub value: F,
    pub slope: D,
}

impl<F, D> RadialExact for ClosureRadial<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }
    fn slope(&self, r: f64) -> f64 {
        (self.slope)(r)
    }
}

/// A radially symmetric exponent `g(|x|)` on `ℝⁿ` (density `e^g`), sampled
/// on a radial grid starting at 0.
///
/// Between nodes the exponent is interpolated linearly. Past the last node
/// the tail shape `c1 - c2 r^q` is glued on continuously. When an exact
/// evaluator is attached it takes precedence for off-grid queries.
#[derive(Clone)]
pub struct RadialProfile {
    n: usize,
    r: Arc<Vec<f64>>,
    logvals: Vec<f64>,
    tail: Option<Tail>,
    exact: Option<Arc<dyn RadialExact>>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("n", &self.n)
            .field("nodes", &self.r.len())
            .field("r_max", &self.r_max())
            .field("tail", &self.tail)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

fn validate_grid(r: &[f64]) -> Result<()> {
    if r.len() < MIN_NODES {
        return Err(Error::InvalidParams(format!(
            "radial grid needs at least {MIN_NODES} nodes, got {}",
            r.len()
        )));
    }
    if r[0] != 0.0 {
        return Err(Error::InvalidParams("radial grid must start at r = 0".into()));
    }
    if r.windows(2).any(|w| w[1] <= w[0] || !w[1].is_finite()) {
        return Err(Error::InvalidParams("radial grid must be strictly increasing".into()));
    }
    Ok(())
}

fn validate_tail(tail: &Option<Tail>) -> Result<()> {
    if let Some(t) = tail {
        if !(t.q > 1.0) {
            return Err(Error::InvalidParams(format!("tail exponent must exceed 1, got {}", t.q)));
        }
    }
    Ok(())
}

impl RadialProfile {
    /// Sampled profile without an exact evaluator.
    pub fn new(n: usize, r: Vec<f64>, logvals: Vec<f64>, tail: Option<Tail>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        validate_grid(&r)?;
        validate_tail(&tail)?;
        if logvals.len() != r.len() {
            return Err(Error::InvalidParams("logvals and grid lengths differ".into()));
        }
        if logvals.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::InvalidParams("logvals must be finite or -inf".into()));
        }
        if let Some(t) = &tail {
            let last = *r.last().unwrap();
            let bound = t.value(last);
            let tol = 1e-6 * (1.0 + bound.abs());
            if *logvals.last().unwrap() < bound - tol {
                return Err(Error::InvalidParams(format!(
                    "last sample {} violates the tail bound {bound} at r = {last}",
                    logvals.last().unwrap()
                )));
            }
        }
        Ok(Self {
            n,
            r: Arc::new(r),
            logvals,
            tail,
            exact: None,
        })
    }

    /// Profile sampled from an exact evaluator, which is kept for off-grid queries.
    pub fn from_exact(
        n: usize,
        r: Vec<f64>,
        tail: Option<Tail>,
        exact: Arc<dyn RadialExact>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        validate_grid(&r)?;
        validate_tail(&tail)?;
        let logvals = exact.values(&r);
        Ok(Self {
            n,
            r: Arc::new(r),
            logvals,
            tail,
            exact: Some(exact),
        })
    }

    pub(crate) fn from_parts(
        n: usize,
        r: Arc<Vec<f64>>,
        logvals: Vec<f64>,
        tail: Option<Tail>,
        exact: Option<Arc<dyn RadialExact>>,
    ) -> Self {
        Self {
            n,
            r,
            logvals,
            tail,
            exact,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub(crate) fn radii_arc(&self) -> Arc<Vec<f64>> {
        Arc::clone(&self.r)
    }

    pub fn logvals(&self) -> &[f64] {
        &self.logvals
    }

    pub fn tail(&self) -> Option<Tail> {
        self.tail
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self) -> Option<&Arc<dyn RadialExact>> {
        self.exact.as_ref()
    }

    /// Same samples, exact evaluator dropped.
    pub fn sampled_only(&self) -> Self {
        Self {
            exact: None,
            ..self.clone()
        }
    }

    /// Same profile in another ambient dimension.
    pub fn with_dim(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// `g + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let exact = self.exact.as_ref().map(|e| {
            let e = Arc::clone(e);
            Arc::new(Shifted { inner: e, c }) as Arc<dyn RadialExact>
        });
        Self {
            n: self.n,
            r: Arc::clone(&self.r),
            logvals: self.logvals.iter().map(|v| v + c).collect(),
            tail: self.tail.map(|t| Tail { c1: t.c1 + c, ..t }),
            exact,
        }
    }

    /// `k · g`.
    pub fn scaled(&self, k: f64) -> Self {
        let exact = self.exact.as_ref().map(|e| {
            let e = Arc::clone(e);
            Arc::new(Scaled { inner: e, k }) as Arc<dyn RadialExact>
        });
        Self {
            n: self.n,
            r: Arc::clone(&self.r),
            logvals: self.logvals.iter().map(|v| v * k).collect(),
            tail: self.tail.map(|t| Tail {
                c1: t.c1 * k,
                c2: t.c2 * k,
                q: t.q,
            }),
            exact,
        }
    }

    /// Cell index `i` with `r[i] <= r < r[i+1]`; `None` past the grid.
    fn cell(&self, r: f64) -> Option<usize> {
        let grid = &self.r;
        if r > *grid.last().unwrap() {
            return None;
        }
        let idx = grid.partition_point(|&x| x <= r);
        Some(idx.saturating_sub(1).min(grid.len() - 2))
    }

    /// Interpolated/extended value ignoring the exact evaluator.
    pub fn sampled_value(&self, r: f64) -> f64 {
        let r = r.abs();
        match self.cell(r) {
            Some(i) => {
                let (a, b) = (self.r[i], self.r[i + 1]);
                let (ga, gb) = (self.logvals[i], self.logvals[i + 1]);
                if ga == f64::NEG_INFINITY || gb == f64::NEG_INFINITY {
                    return if r == a {
                        ga
                    } else if r == b {
                        gb
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                let s = (r - a) / (b - a);
                ga + s * (gb - ga)
            }
            None => match &self.tail {
                Some(t) => {
                    let last = self.r_max();
                    *self.logvals.last().unwrap() + t.value(r) - t.value(last)
                }
                None => f64::NEG_INFINITY,
            },
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.exact {
            Some(e) => e.value(r.abs()),
            None => self.sampled_value(r),
        }
    }

    pub fn values(&self, rs: &[f64]) -> Vec<f64> {
        match &self.exact {
            Some(e) => e.values(rs),
            None => rs.iter().map(|&r| self.sampled_value(r)).collect(),
        }
    }

    /// Nodal derivatives by central differences (one-sided at the ends).
    pub fn nodal_slopes(&self) -> Vec<f64> {
        let r = &self.r;
        let g = &self.logvals;
        let m = r.len();
        let mut d = vec![0.0; m];
        for i in 1..m - 1 {
            let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
            // second-order accurate on nonuniform grids
            d[i] = (h0 * h0 * g[i + 1] - h1 * h1 * g[i - 1] + (h1 * h1 - h0 * h0) * g[i])
                / (h0 * h1 * (h0 + h1));
        }
        d[0] = (g[1] - g[0]) / (r[1] - r[0]);
        d[m - 1] = (g[m - 1] - g[m - 2]) / (r[m - 1] - r[m - 2]);
        d
    }

    /// `g'(r)`: exact when available, otherwise interpolated nodal differences.
    pub fn slopes(&self, rs: &[f64]) -> Vec<f64> {
        if let Some(e) = &self.exact {
            return e.slopes(rs);
        }
        let nodal = self.nodal_slopes();
        rs.iter()
            .map(|&r| match self.cell(r) {
                Some(i) => {
                    let (a, b) = (self.r[i], self.r[i + 1]);
                    let s = (r - a) / (b - a);
                    nodal[i] + s * (nodal[i + 1] - nodal[i])
                }
                None => self.tail.map_or(0.0, |t| -t.c2 * t.q * r.powf(t.q - 1.0)),
            })
            .collect()
    }

    pub fn slope(&self, r: f64) -> f64 {
        self.slopes(&[r])[0]
    }

    /// `max_i |Δ²g_i| / 8`, the leading linear-interpolation error.
    pub fn interpolation_error(&self) -> f64 {
        let r = &self.r;
        let g = &self.logvals;
        let mut worst: f64 = 0.0;
        for i in 1..r.len() - 1 {
            let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
            let second = 2.0 * (h0 * g[i + 1] - (h0 + h1) * g[i] + h1 * g[i - 1])
                / (h0 * h1 * (h0 + h1));
            let h = h0.max(h1);
            if second.is_finite() {
                worst = worst.max(second.abs() * h * h / 8.0);
            }
        }
        worst
    }
}

struct Shifted {
    inner: Arc<dyn RadialExact>,
    c: f64,
}

impl RadialExact for Shifted {
    fn value(&self, r: f64) -> f64 {
        self.inner.value(r) + self.c
    }
    fn slope(&self, r: f64) -> f64 {
        self.inner.slope(r)
    }
    fn values(&self, rs: &[f64]) -> Vec<f64> {
        self.inner.values(rs).into_iter().map(|v| v + self.c).collect()
    }
    fn slopes(&self, rs: &[f64]) -> Vec<f64> {
        self.inner.slopes(rs)
    }
}

struct Scaled {
    inner: Arc<dyn RadialExact>,
    k: f64,
}

impl RadialExact for Scaled {
    fn value(&self, r: f64) -> f64 {
        self.inner.value(r) * self.k
    }
    fn slope(&self, r: f64) -> f64 {
        self.inner.slope(r) * self.k
    }
    fn values(&self, rs: &[f64]) -> Vec<f64> {
        self.inner.values(rs).into_iter().map(|v| v * self.k).collect()
    }
    fn slopes(&self, rs: &[f64]) -> Vec<f64> {
        self.inner.slopes(rs).into_iter().map(|v| v * self.k).collect()
    }
}

/// Default radial grid: geometric nodes near the origin followed by uniform
/// spacing out to `r_max`, `nodes` points in total.
pub fn hybrid_grid(r_max: f64, nodes: usize) -> Vec<f64> {
    let nodes = nodes.max(MIN_NODES);
    let geometric = nodes / 8;
    let uniform = nodes - geometric - 1;
    let h = r_max / uniform as f64;
    let mut r = Vec::with_capacity(nodes);
    r.push(0.0);
    for k in (1..=geometric).rev() {
        r.push(h * 0.5f64.powi(k as i32 / 2 + 1) * if k % 2 == 0 { 1.0 } else { 0.75 });
    }
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r.dedup();
    for i in 1..=uniform {
        r.push(h * i as f64);
    }
    r
}

/// Uniform radial grid on `[0, r_max]`.
pub fn uniform_grid(r_max: f64, nodes: usize) -> Vec<f64> {
    let h = r_max / (nodes - 1) as f64;
    (0..nodes).map(|i| i as f64 * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quad_profile() -> RadialProfile {
        let r = uniform_grid(4.0, 401);
        let g = r.iter().map(|x| -x * x).collect();
        RadialProfile::new(1, r, g, Some(Tail { c1: 0.0, c2: 1.0, q: 2.0 })).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(RadialProfile::new(1, vec![0.0, 1.0], vec![0.0, 0.0], None).is_err());
        let mut r = uniform_grid(1.0, 20);
        r[3] = r[2];
        assert!(RadialProfile::new(1, r, vec![0.0; 20], None).is_err());
        let r = uniform_grid(1.0, 20);
        let bad_tail = Some(Tail { c1: 0.0, c2: 1.0, q: 1.0 });
        assert!(RadialProfile::new(1, r.clone(), vec![0.0; 20], bad_tail).is_err());
        // last sample far below the tail bound
        let tail = Some(Tail { c1: 0.0, c2: 1.0, q: 2.0 });
        let mut g = vec![0.0; 20];
        g[19] = -10.0;
        assert!(RadialProfile::new(1, r, g, tail).is_err());
    }

    #[test]
    fn interpolation_and_tail_extension() {
        let p = quad_profile();
        assert_relative_eq!(p.value(1.0), -1.0, epsilon = 1e-12);
        // linear interpolation between 1.0 and 1.01
        assert_relative_eq!(p.value(1.005), -(1.0 + 1.0201) / 2.0, epsilon = 1e-12);
        // continuous tail
        assert_relative_eq!(p.value(5.0), -25.0, epsilon = 1e-9);
        assert!(p.interpolation_error() > 0.0 && p.interpolation_error() < 1e-4);
    }

    #[test]
    fn slopes_from_differences() {
        let p = quad_profile();
        let s = p.slopes(&[0.5, 2.0, 3.3]);
        assert_relative_eq!(s[0], -1.0, epsilon = 1e-8);
        assert_relative_eq!(s[1], -4.0, epsilon = 1e-8);
        assert_relative_eq!(s[2], -6.6, epsilon = 1e-8);
    }

    #[test]
    fn hybrid_grid_shape() {
        let r = hybrid_grid(10.0, 4096);
        assert_eq!(r[0], 0.0);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert_relative_eq!(*r.last().unwrap(), 10.0, max_relative = 1e-12);
        assert!(r[1] < 1e-10);
    }
}
