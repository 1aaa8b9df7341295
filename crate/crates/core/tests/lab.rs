mod common;

use std::path::{Path, PathBuf};

use common::config;
use lindeberg_lab::lab::{
    check_acceptance, emit_plot_data, outputs::load_series, resolve_seed, run_to_dir, Criteria, ExperimentConfig, PlotKind, SEED_ENV,
};
use lindeberg_lab::LabError;

const ROWS: &str = r#"rows = [
  { l = 1, t = 7.0, delta = 0.09, c = 8 },
  { l = 2, t = 8.0, delta = 0.07, c = 12 },
  { l = 3, t = 9.0, delta = 0.05, c = 18 },
]"#;

fn short_config(extra: &str) -> String {
    let inst = config("two_shift.toml");
    format!("name = \"short\"\ninstance = {:?}\neta = 0.15\nmode = \"mme\"\nseed = 4\n{extra}\n[schedule]\n{ROWS}\n", inst.display().to_string())
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn short_run(dir: &Path) -> PathBuf {
    let cfg = ExperimentConfig::load(&write_config(dir, &short_config(""))).unwrap();
    let out = dir.join("out");
    run_to_dir(&cfg, 4, &out).unwrap();
    out
}

#[test]
fn config_errors_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = short_config("bogus = 1");
    let err = ExperimentConfig::from_toml(&unknown, dir.path()).unwrap_err();
    assert!(matches!(err, LabError::Config(_)) && err.is_validation());
    let missing = ExperimentConfig::load(&dir.path().join("nope.toml")).unwrap_err();
    assert!(matches!(missing, LabError::Io { .. }) && !missing.is_validation());
    let text = short_config("").replace("eta = 0.15", "eta = 1.5");
    let cfg = ExperimentConfig::from_toml(&text, dir.path()).unwrap();
    let inst = cfg.load_instance().unwrap();
    let err = cfg.validate(&inst).unwrap_err();
    assert!(matches!(err, LabError::EtaTooLarge { .. }) && err.is_validation());
    let eq = short_config("").replace("mode = \"mme\"", "mode = \"equilibrium\"");
    let cfg = ExperimentConfig::from_toml(&eq, dir.path()).unwrap();
    assert!(matches!(cfg.validate(&inst), Err(LabError::Config(_))));
    let arr = short_config("").replace("mode = \"mme\"", "mode = \"array\"");
    let cfg = ExperimentConfig::from_toml(&arr, dir.path()).unwrap();
    assert!(matches!(cfg.validate(&inst), Err(LabError::Config(_))));
}

#[test]
fn seed_precedence() {
    // The only test in this binary that touches the environment.
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml(&short_config(""), dir.path()).unwrap();
    std::env::remove_var(SEED_ENV);
    assert_eq!(resolve_seed(Some(9), &cfg).unwrap(), 9);
    assert_eq!(resolve_seed(None, &cfg).unwrap(), 4);
    std::env::set_var(SEED_ENV, "17");
    assert_eq!(resolve_seed(None, &cfg).unwrap(), 17);
    assert_eq!(resolve_seed(Some(9), &cfg).unwrap(), 9);
    std::env::set_var(SEED_ENV, "x");
    assert!(matches!(resolve_seed(None, &cfg), Err(LabError::Config(_))));
    std::env::remove_var(SEED_ENV);
    cfg.seed = None;
    assert_eq!(resolve_seed(None, &cfg).unwrap(), 0);
}

#[test]
fn run_directory_plots_and_acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_run(dir.path());
    for f in ["manifest.json", "series.csv", "schedule.csv", "statistics.json", "timings.json", "level_l3.json", "cdf_l3.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let headers = [
        (PlotKind::Ks, "l,normalizer,KS"),
        (PlotKind::Ratios, "l,quantity,value"),
        (PlotKind::Cdf, ""),
        (PlotKind::Lindeberg, "l,side,gamma,value"),
        (PlotKind::Deviation, "l,observable,deviation,stderr"),
    ];
    for (kind, header) in headers {
        let p = emit_plot_data(&out, kind).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let first = text.lines().next().unwrap();
        if !header.is_empty() {
            assert_eq!(first, header);
        }
        let cols = first.split(',').count();
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == cols), "{}", p.display());
        assert!(text.lines().count() > 3);
    }

    let rows = load_series(&out).unwrap();
    assert_eq!(rows.iter().filter(|r| r.quantity == "k").map(|r| r.value).collect::<Vec<_>>(), vec![15.0, 23.0, 40.0]);

    let lax = Criteria::from_toml("[clt]\nfinal_max = 0.5\n[mu_clt]\n[mme]\nfinal_max = 0.5\n").unwrap();
    let r = check_acceptance(&out, &lax).unwrap();
    assert!(r.passed, "{:#?}", r.verdicts);
    assert_eq!(r.verdicts.len(), 1 + 1 + 3);
    let impossible = Criteria::from_toml("[clt]\nfinal_max = 0.0\n[mme]\nfinal_max = 0.0\n").unwrap();
    let r = check_acceptance(&out, &impossible).unwrap();
    assert!(!r.passed);
    assert!(r.verdicts.iter().all(|v| !v.passed));
    let r = check_acceptance(&out, &Criteria::from_toml("").unwrap()).unwrap();
    assert!(r.passed && r.verdicts.is_empty());
    assert_eq!(r.warnings.len(), 1);
    assert!(matches!(Criteria::from_toml("[clt]\nfinal_max = 1\nextra = 2\n"), Err(LabError::Config(_))));
}

#[test]
fn missing_series_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_run(dir.path());
    let series = out.join("series.csv");
    let text = std::fs::read_to_string(&series).unwrap();
    let kept: String = text.lines().filter(|l| !l.contains(",ks_") && !l.contains("l,ks_")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&series, kept).unwrap();
    let err = emit_plot_data(&out, PlotKind::Ks).unwrap_err();
    assert!(matches!(err, LabError::MissingSeries(_)) && !err.is_validation());
    assert!(emit_plot_data(&dir.path().join("absent"), PlotKind::Ks).is_err());
}

#[test]
fn array_mode_runs_with_per_level_observables() {
    let obs = (1..=3)
        .map(|l| {
            format!(
                "[[array_observables]]\nname = \"f{l}\"\ndepth = 1\ndefault = [0.0]\ncoefficients = {{ \"1\" = [{}.0] }}\nholder_l = 1.0\n",
                l
            )
        })
        .collect::<String>();
    let text = short_config("").replace("mode = \"mme\"", "mode = \"array\"").replace("[schedule]", &format!("{obs}\n[schedule]"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&write_config(dir.path(), &text)).unwrap();
    let inst = cfg.load_instance().unwrap();
    let prep = lindeberg_lab::lab::prepare(&cfg, &inst).unwrap();
    assert_eq!(prep.report.mode, "array");
    assert!(prep.report.checks.iter().any(|c| c.item == "item 4"));
    assert_eq!(prep.array.len(), 3);
    // Growing sup norms break items 3 and 4 on this schedule.
    assert!(matches!(lindeberg_lab::lab::run_experiment(&cfg, &inst, 4), Err(LabError::ScheduleRejected(_))));
    let mut cfg = cfg;
    cfg.allow_invalid_schedule = true;
    let res = lindeberg_lab::lab::run_experiment(&cfg, &inst, 4).unwrap();
    assert!(res.levels.iter().all(|l| l.error.is_none() && l.stats.is_some()));
    // f_l = l·1[1] while the MME run uses 1[1]: σ² scales by l².
    let mme = ExperimentConfig::load(&write_config(dir.path(), &short_config(""))).unwrap();
    let plain = lindeberg_lab::lab::prepare(&mme, &inst).unwrap();
    for (l, (a, b)) in prep.sigmas.iter().zip(&plain.sigmas).enumerate() {
        let scale = ((l + 1) * (l + 1)) as f64;
        assert!((a - scale * b).abs() < 1e-9 * a, "l = {}: {a} vs {b}", l + 1);
    }
}
