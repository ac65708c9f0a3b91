use infconv_core::harness::{
    run_limit_check, run_quadratic_rate, write_rate_csv, ExperimentConfig, ExperimentKind, GaussianDeficit, Ladder,
};

fn config(kind: ExperimentKind, fams: &[&str], ladder: Ladder) -> ExperimentConfig {
    ExperimentConfig {
        experiment: kind,
        families: fams.iter().map(|s| s.to_string()).collect(),
        ladder: Some(ladder),
        grid: None,
        gaussian_deficit: GaussianDeficit::Ghc,
        output: None,
        strict: false,
    }
}

#[test]
fn gaussian_quadratic_rate_is_n() {
    // δ^GHC(εx²) ≈ n ε² for small ε
    let cfg = config(ExperimentKind::Quadratic, &["gauss_quadratic:n=2"], Ladder::geometric(0.0625, 0.5, 7));
    let fit = &run_quadratic_rate(&cfg).unwrap()[0];
    assert!((fit.quad_constant - 2.0).abs() < 0.02, "{}", fit.quad_constant);
    assert!(!fit.flagged);
}

#[test]
fn rate_csv_has_one_row_per_rung() {
    let cfg = config(ExperimentKind::Quadratic, &["power_hc:n=1,p=2"], Ladder::geometric(0.0625, 0.5, 6));
    let fits = run_quadratic_rate(&cfg).unwrap();
    let mut out = Vec::new();
    write_rate_csv(&mut out, &fits).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("family,index,eps,deficit"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn limit_check_on_gaussian() {
    let cfg = config(ExperimentKind::Limit, &["gauss_quadratic:n=1,eps=0.1"], Ladder::geometric(0.125, 0.5, 8));
    let rec = &run_limit_check(&cfg).unwrap()[0];
    assert!(rec.relative_error < 0.01, "{}", rec.relative_error);
}

#[test]
fn short_ladder_rejected() {
    let cfg = config(ExperimentKind::Quadratic, &["power_hc:n=1,p=2"], Ladder::geometric(0.0625, 0.5, 3));
    assert!(run_quadratic_rate(&cfg).is_err());
}
