//! Plain-text function files.
//!
//! ```text
//! # kind=radial n=2 p=2 tail=0,1,2
//! 0.0 0.0
//! 0.1 -0.01
//! ```
//!
//! Radial files hold `r g(r)` rows; grid files (`kind=grid`) hold `x g` or
//! `x y g` rows with `x` varying fastest.

use std::fmt::Write as _;
use std::path::Path;

use super::{Func, GridFunction, RadialProfile, Tail};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileHeader {
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub tail: Option<Tail>,
    pub grid: bool,
}

fn parse_header_line(line: &str, h: &mut FileHeader) -> Result<()> {
    for tok in line.trim_start_matches('#').split_whitespace() {
        let Some((k, v)) = tok.split_once('=') else {
            continue;
        };
        let bad = |what: &str| Error::Parse(format!("bad {what} in header: {tok}"));
        match k {
            "n" | "dim" => h.n = Some(v.parse().map_err(|_| bad("dimension"))?),
            "p" => h.p = Some(v.parse().map_err(|_| bad("p"))?),
            "kind" => h.grid = v == "grid",
            "tail" => {
                let c: Vec<f64> = v
                    .split(',')
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("tail"))?;
                if c.len() != 3 {
                    return Err(bad("tail"));
                }
                h.tail = Some(Tail {
                    c1: c[0],
                    c2: c[1],
                    q: c[2],
                });
            }
            _ => {}
        }
    }
    Ok(())
}

/// Parse a function from file contents.
pub fn parse_function(text: &str) -> Result<(Func, FileHeader)> {
    let mut header = FileHeader::default();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            parse_header_line(line, &mut header)?;
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!("line {}: column count changed", lineno + 1)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let cols = rows[0].len();
    if !(2..=3).contains(&cols) {
        return Err(Error::Parse(format!("expected 2 or 3 columns, got {cols}")));
    }
    if cols == 3 {
        header.grid = true;
    }
    let func = if !header.grid {
        let n = header.n.unwrap_or(1);
        let r = rows.iter().map(|r| r[0]).collect();
        let g = rows.iter().map(|r| r[1]).collect();
        Func::Radial(RadialProfile::new(n, r, g, header.tail)?)
    } else if cols == 2 {
        let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let h = uniform_step(&x)?;
        let g = rows.iter().map(|r| r[1]).collect();
        Func::Grid(GridFunction::new(1, &[x[0]], h, &[x.len()], g, header.tail)?)
    } else {
        let x0 = rows[0][0];
        let y0 = rows[0][1];
        let nx = rows.iter().take_while(|r| r[1] == y0).count();
        if nx < 2 || rows.len() % nx != 0 {
            return Err(Error::Parse("2D rows do not form a rectangle".into()));
        }
        let ny = rows.len() / nx;
        let xs: Vec<f64> = rows[..nx].iter().map(|r| r[0]).collect();
        let ys: Vec<f64> = (0..ny).map(|j| rows[j * nx][1]).collect();
        let hx = uniform_step(&xs)?;
        let hy = uniform_step(&ys)?;
        if ((hx - hy) / hx).abs() > 1e-9 {
            return Err(Error::Parse("grid spacing differs between axes".into()));
        }
        let g = rows.iter().map(|r| r[2]).collect();
        header.n = Some(2);
        Func::Grid(GridFunction::new(2, &[x0, y0], hx, &[nx, ny], g, header.tail)?)
    };
    Ok((func, header))
}

fn uniform_step(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Parse("need at least two grid nodes per axis".into()));
    }
    let h = x[1] - x[0];
    let ok = x
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    if !ok || h <= 0.0 {
        return Err(Error::Parse("grid nodes are not uniformly spaced".into()));
    }
    Ok(h)
}

/// Render a function in the file format.
pub fn format_function(f: &Func, p: Option<f64>) -> String {
    let mut out = String::new();
    let tail = f.tail();
    let mut head = match f {
        Func::Radial(r) => format!("# kind=radial n={}", r.n()),
        Func::Grid(g) => format!("# kind=grid n={}", g.dim()),
    };
    if let Some(p) = p {
        let _ = write!(head, " p={p}");
    }
    if let Some(t) = tail {
        let _ = write!(head, " tail={},{},{}", t.c1, t.c2, t.q);
    }
    out.push_str(&head);
    out.push('\n');
    match f {
        Func::Radial(r) => {
            for (x, g) in r.radii().iter().zip(r.logvals()) {
                let _ = writeln!(out, "{x:.17e} {g:.17e}");
            }
        }
        Func::Grid(grid) => {
            for (k, g) in grid.logvals().iter().enumerate() {
                let x = grid.node(k);
                if grid.dim() == 1 {
                    let _ = writeln!(out, "{:.17e} {g:.17e}", x[0]);
                } else {
                    let _ = writeln!(out, "{:.17e} {:.17e} {g:.17e}", x[0], x[1]);
                }
            }
        }
    }
    out
}

pub fn read_function(path: &Path) -> Result<(Func, FileHeader)> {
    parse_function(&std::fs::read_to_string(path)?)
}

pub fn write_function(path: &Path, f: &Func, p: Option<f64>) -> Result<()> {
    std::fs::write(path, format_function(f, p))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcrep::uniform_grid;

    #[test]
    fn radial_round_trip() {
        let r = uniform_grid(3.0, 32);
        let g: Vec<f64> = r.iter().map(|x| -x * x).collect();
        let tail = Some(Tail { c1: 0.0, c2: 1.0, q: 2.0 });
        let f = Func::Radial(RadialProfile::new(3, r, g.clone(), tail).unwrap());
        let text = format_function(&f, Some(2.0));
        let (back, h) = parse_function(&text).unwrap();
        assert_eq!(h.n, Some(3));
        assert_eq!(h.p, Some(2.0));
        assert_eq!(h.tail, tail);
        assert_eq!(back.as_radial().unwrap().logvals(), &g[..]);
    }

    #[test]
    fn grid_round_trip_with_neg_inf() {
        let mut vals: Vec<f64> = (0..20).map(|k| -(k as f64)).collect();
        vals[5] = f64::NEG_INFINITY;
        let g = GridFunction::new(2, &[-1.0, -2.0], 0.5, &[5, 4], vals.clone(), None).unwrap();
        let text = format_function(&Func::Grid(g), None);
        let (back, _) = parse_function(&text).unwrap();
        let bg = back.as_grid().unwrap();
        assert_eq!(bg.shape(), [5, 4]);
        assert_eq!(bg.origin(), [-1.0, -2.0]);
        assert_eq!(bg.logvals(), &vals[..]);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_function("# n=1\n").is_err());
        assert!(parse_function("0 1\n1 2 3\n").is_err());
        assert!(parse_function("# kind=grid\n0 1\n1 1\n3 1\n").is_err());
        assert!(parse_function("# tail=1,2\n0 0\n").is_err());
    }
}
