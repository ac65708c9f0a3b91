use std::sync::Arc;

use super::{Func, RadialProfile, Tail, MIN_NODES};
use crate::error::{Error, Result};
use crate::specfun::unit_ball_volume;

/// One interpolation cell of the input: exponent linear in `x` on `[a, b]`.
struct Cell {
    a: f64,
    b: f64,
    ga: f64,
    gb: f64,
}

/// Symmetric-decreasing rearrangement of `e^φ` by the layer-cake method.
///
/// For every sampled level `s` the measure of `{φ > s}` is computed exactly
/// on the log-linear interpolant, then inverted to the radius of the ball
/// with that measure. Levels below the largest boundary sample are covered
/// by the input's tail descriptor, which the output inherits.
pub fn schwarz_rearrange(f: &Func) -> Result<RadialProfile> {
    let (n, cells, boundary, tail, radial) = match f {
        Func::Radial(p) => {
            let r = p.radii();
            let g = p.logvals();
            let cells = (0..r.len() - 1)
                .map(|i| Cell {
                    a: r[i],
                    b: r[i + 1],
                    ga: g[i],
                    gb: g[i + 1],
                })
                .collect::<Vec<_>>();
            (p.n(), cells, *g.last().unwrap(), p.tail(), true)
        }
        Func::Grid(gf) if gf.dim() == 1 => {
            let x: Vec<f64> = gf.nodes().iter().map(|c| c[0]).collect();
            let g = gf.logvals();
            let cells = (0..x.len() - 1)
                .map(|i| Cell {
                    a: x[i],
                    b: x[i + 1],
                    ga: g[i],
                    gb: g[i + 1],
                })
                .collect::<Vec<_>>();
            let boundary = g[0].max(*g.last().unwrap());
            (1, cells, boundary, gf.tail(), false)
        }
        Func::Grid(_) => {
            return Err(Error::InvalidParams(
                "rearrangement takes radial or 1D grid input".into(),
            ))
        }
    };

    let gmax = cells
        .iter()
        .flat_map(|c| [c.ga, c.gb])
        .fold(f64::NEG_INFINITY, f64::max);
    if !gmax.is_finite() {
        return Err(Error::Degenerate("function vanishes identically".into()));
    }
    match tail {
        Some(t) if t.c2 <= 0.0 => {
            return Err(Error::Degenerate("tail does not decay".into()));
        }
        None if boundary > gmax - 10.0 => {
            return Err(Error::Degenerate(format!(
                "no decay: boundary exponent {boundary} vs peak {gmax}"
            )));
        }
        _ => {}
    }

    let omega = unit_ball_volume(n);
    let nf = n as f64;
    let measure = |c: f64, d: f64| -> f64 {
        if radial {
            omega * (d.powf(nf) - c.powf(nf))
        } else {
            d - c
        }
    };
    let superlevel = |s: f64| -> f64 {
        cells
            .iter()
            .map(|c| {
                if !c.ga.is_finite() || !c.gb.is_finite() {
                    return 0.0;
                }
                match (c.ga > s, c.gb > s) {
                    (true, true) => measure(c.a, c.b),
                    (false, false) => 0.0,
                    (true, false) => {
                        let x = c.a + (s - c.ga) / (c.gb - c.ga) * (c.b - c.a);
                        measure(c.a, x)
                    }
                    (false, true) => {
                        let x = c.a + (s - c.ga) / (c.gb - c.ga) * (c.b - c.a);
                        measure(x, c.b)
                    }
                }
            })
            .sum()
    };

    let mut levels: Vec<f64> = cells
        .iter()
        .flat_map(|c| [c.ga, c.gb])
        .filter(|v| v.is_finite() && *v >= boundary)
        .collect();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
    levels.dedup();

    let mut r = vec![0.0];
    let mut g = vec![gmax];
    for &s in &levels[1..] {
        let rho = (superlevel(s) / omega).powf(1.0 / nf);
        if rho > r.last().unwrap() * (1.0 + 1e-13) + 1e-300 {
            r.push(rho);
            g.push(s);
        }
    }
    if r.len() < MIN_NODES {
        return Err(Error::Degenerate(format!(
            "rearrangement produced only {} distinct levels",
            r.len()
        )));
    }
    let tail = tail.map(|t| Tail { ..t });
    Ok(RadialProfile::from_parts(n, Arc::new(r), g, tail, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcrep::{grad_norm_p, log_norm_alpha, uniform_grid, GridFunction, Measure};
    use approx::assert_relative_eq;

    fn bump(m: usize) -> GridFunction {
        // asymmetric exponent with its peak away from the origin
        let (o, h, s) = GridFunction::centered(1, 10.0, m);
        let vals = (0..m)
            .map(|i| {
                let x = o[0] + i as f64 * h - 1.3;
                if x < 0.0 {
                    -0.5 * x * x
                } else {
                    -2.0 * x * x - 0.3 * x.powi(3)
                }
            })
            .collect();
        GridFunction::new(1, &o, h, &s, vals, None).unwrap()
    }

    #[test]
    fn radial_decreasing_is_fixed() {
        let r = uniform_grid(6.0, 601);
        let g: Vec<f64> = r.iter().map(|x| -x * x).collect();
        let p = RadialProfile::new(2, r.clone(), g.clone(), None).unwrap();
        let s = schwarz_rearrange(&Func::Radial(p)).unwrap();
        assert_eq!(s.radii().len(), r.len());
        for (a, b) in s.radii().iter().zip(&r) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn norms_preserved_and_idempotent() {
        let f = Func::Grid(bump(4001));
        let s = schwarz_rearrange(&f).unwrap();
        let fs = Func::Radial(s.clone());
        for &q in &[1.0, 2.0, 4.0] {
            let a = log_norm_alpha(&f, q, Measure::Lebesgue).unwrap();
            let b = log_norm_alpha(&fs, q, Measure::Lebesgue).unwrap();
            assert!((a - b).abs() < 1e-6, "q={q}: {a} vs {b}");
        }
        let twice = schwarz_rearrange(&fs).unwrap();
        for (a, b) in twice.logvals().iter().zip(s.logvals()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        assert!(s.logvals().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn polya_szego_direction() {
        let f = Func::Grid(bump(4001));
        let s = Func::Radial(schwarz_rearrange(&f).unwrap());
        for &p in &[1.5, 2.0, 3.0] {
            let a = grad_norm_p(&f, p, Measure::Lebesgue).unwrap();
            let b = grad_norm_p(&s, p, Measure::Lebesgue).unwrap();
            assert!(b <= a * (1.0 + 1e-9), "p={p}: {b} > {a}");
        }
    }

    #[test]
    fn rejects_flat_input() {
        let (o, h, s) = GridFunction::centered(1, 1.0, 64);
        let g = GridFunction::new(1, &o, h, &s, vec![0.0; 64], None).unwrap();
        assert!(schwarz_rearrange(&Func::Grid(g)).is_err());
    }
}
