use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use infconv_core::deficits::{ghc_deficit, glsi_deficit, hc_deficit, lsi_deficit, HCParams};
use infconv_core::extremizer::{
    fit_translation, gaussian_hc_params, gaussian_lsi_params, hc_params, lsi_modified_params, lsi_params,
};
use infconv_core::families::{Family, GridSpec};
use infconv_core::funcrep::{read_function, write_function, Func};
use infconv_core::harness::{self, ExperimentConfig, ExperimentKind};
use infconv_core::hopflax::{hopf_lax, HopfLaxParams, Method};
use infconv_core::pl::{build_gaussian_triple, build_hc_triple, check_pl_hypothesis, pl_conclusion_distances, pl_epsilon};

#[derive(Parser)]
#[command(name = "infconv", about = "Hopf-Lax semigroup and functional-inequality deficits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a deficit and print its record.
    Deficit {
        which: Inequality,
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        hc: HcArgs,
    },
    /// Write Q_t g in the function file format.
    Evolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Fit the extremal model and report its parameters and distance.
    FitExtremizer {
        #[arg(long, value_enum)]
        kind: FitKind,
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        hc: HcArgs,
    },
    /// Run an experiment from a TOML config.
    Rate {
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Prékopa-Leindler triples.
    Pl {
        action: PlAction,
        #[arg(long = "input-g")]
        input_g: Option<PathBuf>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        radius_cap: f64,
        #[command(flatten)]
        hc: HcArgs,
        /// Gaussian triple instead of the HC one.
        #[arg(long)]
        gaussian: bool,
        #[arg(long)]
        complementary: bool,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "0,0")]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0")]
        y0: Vec<f64>,
    },
}

#[derive(Args)]
struct Source {
    /// Family spec `kind:key=value,...`.
    #[arg(long, conflicts_with = "input")]
    family: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct HcArgs {
    /// Dimension check for file inputs.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Defaults to the family's value, else 1.
    #[arg(long)]
    alpha: Option<f64>,
    /// Defaults to the family's value, else `p`.
    #[arg(long)]
    beta: Option<f64>,
    /// Defaults to the family's value, else 1.
    #[arg(long)]
    t: Option<f64>,
}

/// Parameters carried by the input: `p`, and `(α, β, t)` for extremizer families.
#[derive(Clone, Copy, Default)]
struct Carried {
    p: Option<f64>,
    hc: Option<(f64, f64, f64)>,
}

impl HcArgs {
    fn alpha(&self, c: Carried) -> f64 {
        self.alpha.or(c.hc.map(|h| h.0)).unwrap_or(1.0)
    }

    fn t(&self, c: Carried) -> f64 {
        self.t.or(c.hc.map(|h| h.2)).unwrap_or(1.0)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Inequality {
    Hc,
    Lsi,
    Ghc,
    Glsi,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    Hc,
    Lsi,
    LsiModified,
    Ghc,
    Glsi,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlAction {
    Check,
    Epsilon,
    Distances,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Brute,
    Fast,
    Radial,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Quadratic,
    Sharpness,
    Limit,
    Equality,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Brute => Method::Brute,
            MethodArg::Fast => Method::Fast,
            MethodArg::Radial => Method::Radial,
        }
    }
}

impl From<ExperimentArg> for ExperimentKind {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Quadratic => ExperimentKind::Quadratic,
            ExperimentArg::Sharpness => ExperimentKind::Sharpness,
            ExperimentArg::Limit => ExperimentKind::Limit,
            ExperimentArg::Equality => ExperimentKind::Equality,
        }
    }
}

/// Loaded function, with `p` from the family or file header if present.
fn load(family: Option<&str>, input: Option<&PathBuf>, n: Option<usize>) -> Result<(Func, Carried)> {
    let (f, c) = match (family, input) {
        (Some(spec), None) => {
            let fam: Family = spec.parse()?;
            let grid = GridSpec::for_family(&fam);
            let p = matches!(fam, Family::ExtremizerHc { .. } | Family::PowerHc { .. } | Family::StretchLsi { .. })
                .then(|| fam.p());
            let hc = match fam {
                Family::ExtremizerHc { alpha, beta, t, .. } => Some((alpha, beta, t)),
                _ => None,
            };
            (fam.sample(grid)?, Carried { p, hc })
        }
        (None, Some(path)) => {
            let (f, h) = read_function(path).with_context(|| format!("reading {}", path.display()))?;
            (f, Carried { p: h.p, hc: None })
        }
        _ => bail!("give exactly one of --family or --input"),
    };
    if let Some(n) = n {
        if n != f.n() {
            bail!("--n {n} does not match the input dimension {}", f.n());
        }
    }
    Ok((f, c))
}

/// Gaussian families sample `g`; the GLSI functional takes `log f = g/2`.
fn glsi_input(f: &Func, from_family: bool) -> Func {
    if from_family {
        f.scaled(0.5)
    } else {
        f.clone()
    }
}

fn hc_params_from(args: &HcArgs, c: Carried) -> Result<HCParams> {
    let p = args.p.or(c.p).context("--p is required")?;
    let beta = args.beta.or(c.hc.map(|h| h.1)).unwrap_or(p);
    Ok(HCParams::new(p, args.t(c), args.alpha(c), beta)?)
}

fn print_record(rec: &[(String, String)]) {
    for (k, v) in rec {
        println!("{k} = {v}");
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Deficit { which, src, hc } => {
            let (f, c) = load(src.family.as_deref(), src.input.as_ref(), hc.n)?;
            let rep = match which {
                Inequality::Hc => hc_deficit(&f, &hc_params_from(&hc, c)?)?,
                Inequality::Lsi => lsi_deficit(&f, hc.p.or(c.p).context("--p is required")?)?,
                Inequality::Ghc => ghc_deficit(&f, hc.alpha(c), hc.t(c))?,
                Inequality::Glsi => glsi_deficit(&glsi_input(&f, src.family.is_some()))?,
            };
            print_record(&rep.record());
        }
        Command::Evolve { input, p, t, method, output } => {
            let (g, _) = read_function(&input)?;
            let method = method.map(Method::from).unwrap_or_else(|| infconv_core::deficits::default_method(&g));
            let q = hopf_lax(&g, HopfLaxParams::new(p, t)?, method)?;
            match output {
                Some(path) => write_function(&path, &q, Some(p))?,
                None => print!("{}", infconv_core::funcrep::format_function(&q, Some(p))),
            }
        }
        Command::FitExtremizer { kind, src, hc } => {
            let (f, c) = load(src.family.as_deref(), src.input.as_ref(), hc.n)?;
            let p = || hc.p.or(c.p).context("--p is required");
            let params = match kind {
                FitKind::Hc => hc_params(&f, &hc_params_from(&hc, c)?)?,
                FitKind::Lsi => lsi_params(&f, p()?)?,
                FitKind::LsiModified => lsi_modified_params(&f, p()?)?,
                FitKind::Ghc => gaussian_hc_params(&f, hc.alpha(c), hc.t(c))?,
                FitKind::Glsi => gaussian_lsi_params(&glsi_input(&f, src.family.is_some()))?,
            };
            let input = match kind {
                FitKind::Glsi => glsi_input(&f, src.family.is_some()),
                _ => f.clone(),
            };
            let fit = fit_translation(&input, &params)?;
            print_record(&params.at(fit.x0).record());
            println!("distance = {}", fit.distance);
            println!("multimodal = {}", fit.multimodal);
        }
        Command::Rate { experiment, config, strict } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.experiment = experiment.into();
            cfg.strict |= strict;
            return rate(&cfg);
        }
        Command::Pl {
            action,
            input_g,
            family,
            radius_cap,
            hc,
            gaussian,
            complementary,
            samples,
            seed,
            x0,
            y0,
        } => {
            let (g, c) = load(family.as_deref(), input_g.as_ref(), hc.n)?;
            let triple = if gaussian {
                build_gaussian_triple(&g, hc.alpha(c), hc.t(c))?
            } else {
                build_hc_triple(&g, &hc_params_from(&hc, c)?, complementary)?
            };
            println!("lambda = {}", triple.lambda);
            println!("a = {}", triple.a);
            match action {
                PlAction::Check => {
                    let v = check_pl_hypothesis(&triple, samples, radius_cap, seed);
                    println!("max_violation = {v}");
                    println!("holds = {}", v <= 1e-8);
                }
                PlAction::Epsilon => println!("epsilon = {}", pl_epsilon(&triple)?),
                PlAction::Distances => {
                    let pt = |v: &[f64]| [v.first().copied().unwrap_or(0.0), v.get(1).copied().unwrap_or(0.0)];
                    let (d1, d2) = pl_conclusion_distances(&triple, pt(&x0), pt(&y0))?;
                    println!("distance_u_v = {d1}");
                    println!("distance_w_v = {d2}");
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn rate(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let sink: Box<dyn std::io::Write> = match &cfg.output {
        Some(path) => Box::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let summary = |line: String| {
        if cfg.output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    let mut failed = false;
    match cfg.experiment {
        ExperimentKind::Quadratic | ExperimentKind::Sharpness => {
            let fits = if cfg.experiment == ExperimentKind::Quadratic {
                harness::run_quadratic_rate(cfg)?
            } else {
                harness::run_sharpness(cfg)?
            };
            harness::write_rate_csv(sink, &fits)?;
            for f in &fits {
                summary(format!(
                    "family = {} quad_constant = {} quad_target = {} slope = {} r_squared = {} distance_constant = {} distance_target = {} flagged = {}",
                    f.family, f.quad_constant, f.quad_target, f.slope, f.r_squared, f.distance_constant, f.distance_target, f.flagged
                ));
                failed |= f.flagged;
            }
        }
        ExperimentKind::Limit => {
            let recs = harness::run_limit_check(cfg)?;
            harness::write_limit_csv(sink, &recs)?;
            for r in &recs {
                summary(format!(
                    "family = {} limit = {} target = {} relative_error = {} tau_gap = {}",
                    r.family, r.check.limit, r.check.target, r.relative_error, r.tau_gap
                ));
                failed |= r.relative_error > 0.01;
            }
        }
        ExperimentKind::Equality => {
            let rows = harness::run_equality_audit(cfg)?;
            harness::write_audit_csv(sink, &rows)?;
            let bad = rows.iter().filter(|r| !r.pass).count();
            summary(format!("members = {} failures = {bad}", rows.len()));
            failed |= bad > 0;
        }
    }
    Ok(if cfg.strict && failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
