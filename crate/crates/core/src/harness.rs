//! Experiment drivers: ε-ladders, rate fits, limit checks, equality audits.
//!
//! Ladder points run on a rayon pool capped by `INFCONV_THREADS`; results are
//! collected in ladder order, so output is deterministic.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deficits::{
    ghc_deficit, ghc_glsi_limit, glsi_deficit, hc_deficit, hc_lsi_limit, lsi_deficit, HCParams, LimitCheck,
};
use crate::error::{Error, Result};
use crate::extremizer::{
    fit_translation, gaussian_hc_params, gaussian_lsi_params, hc_params, lsi_modified_params,
};
use crate::families::{Family, GridSpec};
use crate::funcrep::Func;

/// Quadrature noise floor for deficits.
pub const NOISE: f64 = 1e-12;
/// Goodness of fit below which a rate fit is flagged.
pub const MIN_R2: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Quadratic,
    Sharpness,
    Limit,
    Equality,
}

/// Which deficit a Gaussian family is measured with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianDeficit {
    #[default]
    Ghc,
    Glsi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
}

impl Ladder {
    pub fn geometric(start: f64, ratio: f64, points: usize) -> Self {
        Self {
            values: Vec::new(),
            start: Some(start),
            ratio: Some(ratio),
            points: Some(points),
        }
    }

    pub fn resolve(&self) -> Result<Vec<f64>> {
        let v: Vec<f64> = if !self.values.is_empty() {
            self.values.clone()
        } else {
            match (self.start, self.ratio, self.points) {
                (Some(s), Some(r), Some(k)) => (0..k).map(|i| s * r.powi(i as i32)).collect(),
                _ => return Err(Error::InvalidParams("ladder needs values or start/ratio/points".into())),
            }
        };
        if v.len() < 6 || v.windows(2).any(|w| !(w[1] < w[0])) || v.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidParams(
                "ladder must be positive, strictly decreasing, with at least 6 points".into(),
            ));
        }
        Ok(v)
    }
}

/// Default ε ladder for rate fits: `2^-4, ..., 2^-12`.
pub fn default_eps_ladder() -> Ladder {
    Ladder::geometric(0.0625, 0.5, 9)
}

/// Default t ladder for limit checks: `2^-3, ..., 2^-10`.
pub fn default_t_ladder() -> Ladder {
    Ladder::geometric(0.125, 0.5, 8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Family specs, `kind:key=value,...`; rate experiments append `eps`.
    #[serde(default)]
    pub families: Vec<String>,
    #[serde(default)]
    pub ladder: Option<Ladder>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub gaussian_deficit: GaussianDeficit,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub strict: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn ladder(&self) -> Result<Vec<f64>> {
        match (&self.ladder, self.experiment) {
            (Some(l), _) => l.resolve(),
            (None, ExperimentKind::Limit) => default_t_ladder().resolve(),
            (None, _) => default_eps_ladder().resolve(),
        }
    }

    fn grid(&self) -> GridSpec {
        self.grid.unwrap_or_default()
    }
}

/// `spec` with `eps` appended.
pub fn family_at(spec: &str, eps: f64) -> Result<Family> {
    let sep = if spec.contains(':') { "," } else { ":" };
    format!("{spec}{sep}eps={eps:e}").parse()
}

/// Work pool honouring `INFCONV_THREADS`.
pub fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var("INFCONV_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        b = b.num_threads(k.max(1));
    }
    b.build().map_err(|e| Error::InvalidParams(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub eps: f64,
    pub deficit: f64,
    /// NaN for quadratic-rate runs.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub family: String,
    pub points: Vec<LadderPoint>,
    /// `d log(distance) / d log(deficit)` over the window.
    pub slope: f64,
    pub r_squared: f64,
    /// `deficit/ε²` at the smallest ε.
    pub quad_constant: f64,
    pub quad_target: f64,
    /// `distance/ε` at the smallest ε.
    pub distance_constant: f64,
    pub distance_target: f64,
    /// Index range `[lo, hi)` of the fit window.
    pub window: (usize, usize),
    pub flagged: bool,
}

impl RateFit {
    pub fn quad_relative_error(&self) -> f64 {
        ((self.quad_constant - self.quad_target) / self.quad_target).abs()
    }

    pub fn distance_relative_error(&self) -> f64 {
        ((self.distance_constant - self.distance_target) / self.distance_target).abs()
    }
}

/// Least squares `y = a + b x`; returns `(b, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (b, r2)
}

/// Drop the two largest ε and anything within 100× of the noise floor.
pub fn fit_window(points: &[LadderPoint]) -> Result<(usize, usize)> {
    let lo = 2.min(points.len());
    let hi = points[lo..]
        .iter()
        .position(|p| !(p.deficit > 100.0 * NOISE))
        .map_or(points.len(), |k| lo + k);
    if hi - lo < 4 {
        return Err(Error::Degenerate(format!(
            "only {} ladder points usable for the fit",
            hi - lo
        )));
    }
    Ok((lo, hi))
}

fn deficit_of(fam: &Family, f: &Func, gd: GaussianDeficit) -> Result<f64> {
    Ok(match *fam {
        Family::PowerHc { p, .. } => hc_deficit(f, &HCParams::new(p, 1.0, 1.0, p)?)?.deficit,
        Family::StretchLsi { p, .. } => lsi_deficit(f, p)?.deficit,
        Family::GaussQuadratic { .. } => match gd {
            GaussianDeficit::Ghc => ghc_deficit(f, 1.0, 1.0)?.deficit,
            GaussianDeficit::Glsi => glsi_deficit(&f.scaled(0.5))?.deficit,
        },
        _ => return Err(Error::InvalidParams("rate experiments use power_hc, stretch_lsi or gauss_quadratic".into())),
    })
}

fn distance_of(fam: &Family, f: &Func, gd: GaussianDeficit) -> Result<f64> {
    let params = match *fam {
        Family::PowerHc { p, .. } => hc_params(f, &HCParams::new(p, 1.0, 1.0, p)?)?,
        Family::StretchLsi { p, .. } => lsi_modified_params(f, p)?,
        Family::GaussQuadratic { .. } => match gd {
            GaussianDeficit::Ghc => gaussian_hc_params(f, 1.0, 1.0)?,
            GaussianDeficit::Glsi => gaussian_lsi_params(&f.scaled(0.5))?,
        },
        _ => return Err(Error::InvalidParams("unsupported family".into())),
    };
    let input = match (fam, gd) {
        (Family::GaussQuadratic { .. }, GaussianDeficit::Glsi) => f.scaled(0.5),
        _ => f.clone(),
    };
    Ok(fit_translation(&input, &params)?.distance)
}

fn targets(fam: &Family) -> Result<(f64, f64)> {
    let av = fam.analytic_values()?;
    Ok((av["quad_constant"], av.get("sharp_constant").copied().unwrap_or(f64::NAN)))
}

fn run_ladder(config: &ExperimentConfig, with_distance: bool) -> Result<Vec<RateFit>> {
    let ladder = config.ladder()?;
    let grid = config.grid();
    let gd = config.gaussian_deficit;
    let pool = pool()?;
    let mut fits = Vec::new();
    for spec in &config.families {
        let fams: Vec<Family> = ladder.iter().map(|&e| family_at(spec, e)).collect::<Result<_>>()?;
        let points: Vec<LadderPoint> = pool.install(|| {
            fams.par_iter()
                .zip(ladder.par_iter())
                .map(|(fam, &eps)| {
                    let f = fam.sample(grid)?;
                    let deficit = deficit_of(fam, &f, gd)?;
                    let distance = if with_distance { distance_of(fam, &f, gd)? } else { f64::NAN };
                    Ok(LadderPoint { eps, deficit, distance })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let (quad_target, distance_target) = targets(&fams[0])?;
        let last = points.last().unwrap();
        let (slope, r_squared, window) = if with_distance {
            let w = fit_window(&points)?;
            let x: Vec<f64> = points[w.0..w.1].iter().map(|p| p.deficit.ln()).collect();
            let y: Vec<f64> = points[w.0..w.1].iter().map(|p| p.distance.ln()).collect();
            let (b, r2) = linear_fit(&x, &y);
            (b, r2, w)
        } else {
            (f64::NAN, f64::NAN, (0, points.len()))
        };
        let flagged = with_distance && !(r_squared >= MIN_R2);
        if flagged {
            log::warn!("{spec}: r² = {r_squared} below {MIN_R2}");
        }
        fits.push(RateFit {
            family: spec.clone(),
            quad_constant: last.deficit / (last.eps * last.eps),
            quad_target,
            distance_constant: last.distance / last.eps,
            distance_target,
            points,
            slope,
            r_squared,
            window,
            flagged,
        });
    }
    Ok(fits)
}

/// `deficit/ε²` along the ladder against the family's quadratic constant.
pub fn run_quadratic_rate(config: &ExperimentConfig) -> Result<Vec<RateFit>> {
    run_ladder(config, false)
}

/// Deficit and fitted distance along the ladder; log-log slope and
/// `distance/ε` against the first-variation integral.
pub fn run_sharpness(config: &ExperimentConfig) -> Result<Vec<RateFit>> {
    run_ladder(config, true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRecord {
    pub family: String,
    pub check: LimitCheck,
    pub relative_error: f64,
    /// Largest gap between `δ/τ` and `δ/t·(yt+1)/y` along the ladder.
    pub tau_gap: f64,
}

/// Ladder limit of `δ^HC/t` (or `δ^GHC/t`) against the LSI-side target.
pub fn run_limit_check(config: &ExperimentConfig) -> Result<Vec<LimitRecord>> {
    let ladder = config.ladder()?;
    let grid = config.grid();
    let pool = pool()?;
    config
        .families
        .iter()
        .map(|spec| {
            let fam: Family = spec.parse()?;
            let f = fam.sample(grid)?;
            let check = pool.install(|| match fam {
                Family::StretchLsi { p, .. } => hc_lsi_limit(&f.scaled(p), p, &ladder),
                Family::GaussQuadratic { .. } | Family::GaussLinear { .. } => ghc_glsi_limit(&f, &ladder),
                Family::PowerHc { p, .. } | Family::ExtremizerHc { p, .. } => hc_lsi_limit(&f, p, &ladder),
            })?;
            let tau_gap = check
                .ladder
                .iter()
                .zip(&check.deficits)
                .map(|(&t, &d)| {
                    let beta = 1.0 + check.y * t;
                    let tau = (1.0 / beta).min(1.0 - 1.0 / beta);
                    let a = d / tau;
                    let b = d / t * (check.y * t + 1.0) / check.y;
                    ((a - b) / a.abs().max(b.abs()).max(1e-300)).abs()
                })
                .fold(0.0, f64::max);
            Ok(LimitRecord {
                family: spec.clone(),
                relative_error: check.relative_error(),
                check,
                tau_gap,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub family: String,
    pub deficit: f64,
    pub distance: f64,
    pub x0: [f64; 2],
    /// Whether the member is meant to be an extremizer.
    pub extremal: bool,
    pub pass: bool,
}

/// Default audit matrix: radial extremizers over `(n, p, α, β, t)`, tilted
/// Gaussian linears and planted translations on Cartesian grids, and
/// perturbed members.
pub fn default_audit_families() -> Vec<String> {
    let mut v = Vec::new();
    for n in [1, 2, 3] {
        for p in [1.5, 2.0, 3.0] {
            for (a, b, t) in [(1.0, 2.0, 1.0), (0.5, 1.5, 0.3), (2.0, 2.5, 2.0)] {
                v.push(format!("extremizer_hc:n={n},p={p},alpha={a},beta={b},t={t},c=0.25"));
            }
        }
    }
    v.push("extremizer_hc:n=2,p=2,alpha=1,beta=2,t=1,x0=0.825;-0.415625".into());
    v.push("extremizer_hc:n=1,p=3,alpha=1,beta=3,t=0.5,x0=-0.6".into());
    v.push("gauss_linear:n=1,x0=0.7,c0=0.2".into());
    v.push("gauss_linear:n=2,x0=0.5;-0.25,c0=-0.1".into());
    for (n, p) in [(1, 2.0), (2, 3.0)] {
        v.push(format!("power_hc:n={n},p={p},eps=0.05"));
    }
    v.push("gauss_quadratic:n=2,eps=0.05".into());
    v
}

fn audit_one(spec: &str) -> Result<AuditRow> {
    let fam: Family = spec.parse()?;
    let extremal = matches!(fam, Family::ExtremizerHc { .. } | Family::GaussLinear { .. });
    let f = fam.sample(GridSpec::for_family(&fam))?;
    let (deficit, fit) = match fam {
        Family::ExtremizerHc { p, alpha, beta, t, .. } => {
            let hp = HCParams::new(p, t, alpha, beta)?;
            (hc_deficit(&f, &hp)?.deficit, fit_translation(&f, &hc_params(&f, &hp)?)?)
        }
        Family::PowerHc { p, .. } => {
            let hp = HCParams::new(p, 1.0, 1.0, p)?;
            (hc_deficit(&f, &hp)?.deficit, fit_translation(&f, &hc_params(&f, &hp)?)?)
        }
        Family::GaussLinear { .. } | Family::GaussQuadratic { .. } => {
            (ghc_deficit(&f, 1.0, 1.0)?.deficit, fit_translation(&f, &gaussian_hc_params(&f, 1.0, 1.0)?)?)
        }
        Family::StretchLsi { p, .. } => {
            let e = lsi_modified_params(&f, p)?;
            (lsi_deficit(&f, p)?.deficit, fit_translation(&f, &e)?)
        }
    };
    let pass = if extremal {
        deficit < 1e-9 && fit.distance < 1e-5
    } else {
        deficit > 1e-4 && fit.distance > 1e-5
    };
    Ok(AuditRow {
        family: spec.to_string(),
        deficit,
        distance: fit.distance,
        x0: fit.x0,
        extremal,
        pass,
    })
}

/// Extremizers must give deficit and distance ≈ 0; perturbed members must not.
pub fn run_equality_audit(config: &ExperimentConfig) -> Result<Vec<AuditRow>> {
    let fams = if config.families.is_empty() {
        default_audit_families()
    } else {
        config.families.clone()
    };
    let pool = pool()?;
    pool.install(|| fams.par_iter().map(|s| audit_one(s)).collect())
}

#[derive(Debug, Serialize)]
struct RateRow<'a> {
    family: &'a str,
    index: usize,
    eps: f64,
    deficit: f64,
    distance: f64,
    deficit_over_eps2: f64,
    distance_over_eps: f64,
    in_window: bool,
}

/// One row per ladder point: `family,index,eps,deficit,distance,
/// deficit_over_eps2,distance_over_eps,in_window`.
pub fn write_rate_csv<W: std::io::Write>(out: W, fits: &[RateFit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for f in fits {
        for (i, p) in f.points.iter().enumerate() {
            w.serialize(RateRow {
                family: &f.family,
                index: i,
                eps: p.eps,
                deficit: p.deficit,
                distance: p.distance,
                deficit_over_eps2: p.deficit / (p.eps * p.eps),
                distance_over_eps: p.distance / p.eps,
                in_window: i >= f.window.0 && i < f.window.1,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct LimitRow<'a> {
    family: &'a str,
    index: usize,
    t: f64,
    deficit: f64,
    deficit_over_t: f64,
    target: f64,
}

/// `family,index,t,deficit,deficit_over_t,target`.
pub fn write_limit_csv<W: std::io::Write>(out: W, recs: &[LimitRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in recs {
        for (i, (&t, &d)) in r.check.ladder.iter().zip(&r.check.deficits).enumerate() {
            w.serialize(LimitRow {
                family: &r.family,
                index: i,
                t,
                deficit: d,
                deficit_over_t: d / t,
                target: r.check.target,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct AuditCsvRow<'a> {
    family: &'a str,
    deficit: f64,
    distance: f64,
    x0_1: f64,
    x0_2: f64,
    extremal: bool,
    pass: bool,
}

/// `family,deficit,distance,x0_1,x0_2,extremal,pass`.
pub fn write_audit_csv<W: std::io::Write>(out: W, rows: &[AuditRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(AuditCsvRow {
            family: &r.family,
            deficit: r.deficit,
            distance: r.distance,
            x0_1: r.x0[0],
            x0_2: r.x0[1],
            extremal: r.extremal,
            pass: r.pass,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ladder_rules() {
        let l = default_eps_ladder().resolve().unwrap();
        assert_eq!(l.len(), 9);
        assert_eq!(l[0], 0.0625);
        assert_eq!(*l.last().unwrap(), 0.5f64.powi(12));
        assert!(Ladder::geometric(1.0, 0.5, 5).resolve().is_err());
        assert!(Ladder::geometric(1.0, 2.0, 8).resolve().is_err());
    }

    #[test]
    fn fit_of_exact_power() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + 3.0).collect();
        let (b, r2) = linear_fit(&x, &y);
        assert_relative_eq!(b, 0.5, epsilon = 1e-14);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn window_drops_noise() {
        let pts: Vec<LadderPoint> = (0..9)
            .map(|i| LadderPoint {
                eps: 0.5f64.powi(i),
                deficit: if i < 7 { 1e-3 } else { 1e-11 },
                distance: 1.0,
            })
            .collect();
        assert_eq!(fit_window(&pts).unwrap(), (2, 7));
        assert!(fit_window(&pts[..5]).is_err());
    }

    #[test]
    fn config_parses() {
        let c = ExperimentConfig::from_toml(
            r#"
experiment = "sharpness"
families = ["power_hc:n=1,p=2"]
strict = true
[ladder]
start = 0.0625
ratio = 0.5
points = 7
[grid]
grid = "radial"
r_max = 0.0
nodes = 2048
"#,
        )
        .unwrap();
        assert_eq!(c.experiment, ExperimentKind::Sharpness);
        assert_eq!(c.ladder().unwrap().len(), 7);
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"").is_err());
        assert_eq!(
            family_at("gauss_quadratic:n=2", 0.01).unwrap(),
            Family::GaussQuadratic { n: 2, eps: 0.01 }
        );
    }

    #[test]
    fn quadratic_rate_power_family() {
        let c = ExperimentConfig {
            experiment: ExperimentKind::Quadratic,
            families: vec!["power_hc:n=1,p=2".into(), "gauss_quadratic:n=2".into()],
            ladder: Some(Ladder::geometric(0.0625, 0.5, 7)),
            grid: None,
            gaussian_deficit: GaussianDeficit::Ghc,
            output: None,
            strict: false,
        };
        let fits = run_quadratic_rate(&c).unwrap();
        assert_relative_eq!(fits[0].quad_target, 4.0, epsilon = 1e-12);
        assert!(fits[0].quad_relative_error() < 0.02);
        assert_relative_eq!(fits[1].quad_target, 2.0);
        assert!(fits[1].quad_relative_error() < 0.02);
        let mut buf = Vec::new();
        write_rate_csv(&mut buf, &fits).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("family,index,eps,deficit,distance,"));
        assert_eq!(text.lines().count(), 1 + 14);
        let again = run_quadratic_rate(&c).unwrap();
        let mut buf2 = Vec::new();
        write_rate_csv(&mut buf2, &again).unwrap();
        assert_eq!(text.as_bytes(), &buf2[..]);
    }
}
