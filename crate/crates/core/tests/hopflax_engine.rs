use std::sync::Arc;

use proptest::prelude::*;

use infconv_core::families::{Family, GridSpec};
use infconv_core::funcrep::{hybrid_grid, ClosureRadial, Func, GridFunction, RadialProfile, Tail};
use infconv_core::hopflax::{hopf_lax, inf_convolve_bruteforce, inf_convolve_fast, HopfLaxParams, Method};

fn wavy(a: f64, b: f64, c: f64, q: f64, m: usize) -> Func {
    let (o, h, s) = GridFunction::centered(1, 6.0, m);
    let vals = (0..m)
        .map(|i| {
            let x = o[0] + i as f64 * h;
            -a * x.abs().powf(q) + b * (c * x).sin()
        })
        .collect();
    let tail = Tail { c1: -b.abs(), c2: a, q };
    Func::Grid(GridFunction::new(1, &o[..1], h, &s[..1], vals, Some(tail)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fast_matches_brute(p in 1.3f64..4.0, a in 0.05f64..0.5, b in -1.0f64..1.0, c in 0.5f64..4.0, frac in 0.05f64..0.85) {
        let pc = p / (p - 1.0);
        let t = frac * (pc * a).powf(1.0 / (1.0 - pc)).min(2.0);
        let g = wavy(a, b, c, pc, 257);
        let hp = HopfLaxParams::new(p, t).unwrap();
        let f = inf_convolve_fast(&g, hp).unwrap();
        let s = inf_convolve_bruteforce(&g, hp).unwrap();
        for (x, y) in f.as_grid().unwrap().logvals().iter().zip(s.as_grid().unwrap().logvals()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn image_lies_below_input(p in 1.5f64..3.0, frac in 0.05f64..0.85) {
        let pc = p / (p - 1.0);
        let g = wavy(0.3, 0.4, 2.0, pc, 201);
        let t = frac * (pc * 0.3f64).powf(1.0 / (1.0 - pc)).min(2.0);
        let q = inf_convolve_fast(&g, HopfLaxParams::new(p, t).unwrap()).unwrap();
        let gv = g.as_grid().unwrap().logvals();
        for (a, b) in q.as_grid().unwrap().logvals().iter().zip(gv) {
            prop_assert!(*a <= b + 1e-14);
        }
    }
}

#[test]
fn semigroup_on_sampled_line() {
    let g = wavy(0.5, 0.3, 2.0, 2.0, 801);
    let hp = |t: f64| HopfLaxParams::new(2.0, t).unwrap();
    let whole = hopf_lax(&g, hp(0.3), Method::Fast).unwrap();
    let half = hopf_lax(&g, hp(0.1), Method::Fast).unwrap();
    let grid = half.as_grid().unwrap();
    let sampled = Func::Grid(
        GridFunction::new(1, &grid.origin()[..1], grid.spacing(), &grid.shape()[..1], grid.logvals().to_vec(), grid.tail())
            .unwrap(),
    );
    let twice = hopf_lax(&sampled, hp(0.2), Method::Fast).unwrap();
    let bound = 5.0 * g.as_grid().unwrap().interpolation_error().max(grid.interpolation_error());
    for i in 0..=60 {
        let x = [-3.0 + 0.1 * i as f64, 0.0];
        assert!((whole.value_at(x) - twice.value_at(x)).abs() <= bound);
    }
}

#[test]
fn radial_matches_planar_brute_force() {
    let (a, b) = (0.3, 0.2);
    let tail = Tail { c1: -b, c2: a, q: 2.0 };
    let prof = RadialProfile::from_exact(
        2,
        hybrid_grid(14.0, 1024),
        Some(tail),
        Arc::new(ClosureRadial {
            value: move |r: f64| -a * r * r + b * r.cos(),
            slope: move |r: f64| -2.0 * a * r - b * r.sin(),
        }),
    )
    .unwrap();
    let (o, h, s) = GridFunction::centered(2, 6.0, 41);
    let vals = (0..41 * 41)
        .map(|k| {
            let (x, y) = (o[0] + (k % 41) as f64 * h, o[1] + (k / 41) as f64 * h);
            let r = x.hypot(y);
            -a * r * r + b * r.cos()
        })
        .collect();
    let planar = Func::Grid(GridFunction::new(2, &o, h, &s, vals, Some(tail)).unwrap());
    let hp = HopfLaxParams::new(2.0, 0.5).unwrap();
    let qr = hopf_lax(&Func::Radial(prof), hp, Method::Radial).unwrap();
    let qp = hopf_lax(&planar, hp, Method::Brute).unwrap();
    let grid = qp.as_grid().unwrap();
    // the planar input is piecewise interpolated, so allow its interpolation error
    let tol = 4.0 * grid.interpolation_error().max(1e-6);
    for (x, v) in grid.nodes().iter().zip(grid.logvals()) {
        if x[0].hypot(x[1]) <= 3.0 {
            assert!((qr.value_at(*x) - v).abs() <= tol, "at {x:?}: {} vs {v}", qr.value_at(*x));
        }
    }
}

#[test]
fn power_family_image_is_a_power() {
    let (n, p, eps) = (2, 3.0f64, 0.05);
    let pc = p / (p - 1.0);
    let b = pc * (pc.powf(-pc) + eps);
    let coef = b / (pc * (1.0 - b.powf(p - 1.0)).powf(pc - 1.0));
    let g = Family::PowerHc { n, p, eps }.sample(GridSpec::default()).unwrap();
    let q = hopf_lax(&g, HopfLaxParams::new(p, 1.0).unwrap(), Method::Radial).unwrap();
    for r in [0.25, 1.0, 2.5] {
        assert!((q.value_at([r, 0.0]) + coef * r.powf(pc)).abs() < 1e-8 * r.powf(pc).max(1.0));
    }
}
