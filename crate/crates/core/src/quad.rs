//! Composite Gauss-Legendre quadrature and log-domain accumulation helpers.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_m` from the Chebyshev initial guess.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 20-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    /// Integrate `f` over `[a, b]` with this rule.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Panel breakpoints on `[0, upper]`: geometric grading toward the origin
/// followed by `uniform` equal panels.
pub fn graded_breakpoints(upper: f64, uniform: usize) -> Vec<f64> {
    let uniform = uniform.max(1);
    let first = upper / uniform as f64;
    let mut breaks = vec![0.0];
    // grade [0, first] geometrically down to first * 2^-40
    for k in (1..=40).rev() {
        breaks.push(first * 0.5f64.powi(k));
    }
    for i in 1..=uniform {
        breaks.push(first * i as f64);
    }
    breaks
}

/// Expand breakpoints into (node, weight) pairs.
pub fn composite_nodes(breaks: &[f64], rule: &GaussLegendre) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(breaks.len() * rule.nodes.len());
    let mut ws = Vec::with_capacity(xs.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(mid + half * x);
            ws.push(w * half);
        }
    }
    (xs, ws)
}

/// `ln Σ exp(v_i)` with a max shift; `-inf` for an empty or all-zero sum.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(20);
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
        // degree 39 is the exactness limit
        let v = rule.integrate(0.0, 1.0, |x| x.powi(38));
        assert_relative_eq!(v, 1.0 / 39.0, max_relative = 1e-13);
    }

    #[test]
    fn composite_gaussian() {
        let breaks = graded_breakpoints(10.0, 64);
        let (xs, ws) = composite_nodes(&breaks, GaussLegendre::standard());
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (-x * x).exp()).sum();
        assert_relative_eq!(s, 0.5 * PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn lse_matches_direct() {
        let v = [-1.0, 0.5, 2.0];
        let direct: f64 = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(v), direct, max_relative = 1e-15);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp([1000.0, 1000.0]), 1000.0 + 2f64.ln());
    }
}
