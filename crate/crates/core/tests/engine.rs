//! Engine backends on a non-unit roof with fiber-varying observables.

mod common;

use lindeberg_lab::lab::{run_experiment, ExperimentConfig};
use lindeberg_lab::stats::engine::{Backend, LevelStats};

const INSTANCE: &str = r#"
name = "two-level-roof"
alphabet = 2
transitions = ["11", "11"]

[roof]
depth = 1
values = { "0" = 1.0, "1" = 2.0 }

[lambda]
depth = 1
values = { "0" = 0.0, "1" = 1.0 }

[observable]
name = "ramp"
depth = 2
default = [0.0]
coefficients = { "01" = [0.0, 2.0], "11" = [1.0], "10" = [-0.5, 0.0, 1.5] }
holder_l = 1.0

[[tests]]
name = "1"
depth = 1
default = [0.0]
coefficients = { "1" = [1.0] }
holder_l = 1.0

[[tests]]
name = "01"
depth = 2
default = [0.0]
coefficients = { "01" = [1.0] }
holder_l = 1.0
"#;

fn config(k: u64, backend: Backend) -> (tempfile::TempDir, ExperimentConfig) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("instance.toml"), INSTANCE).unwrap();
    let run = format!(
        r#"
name = "engine-check"
instance = "instance.toml"
epsilon = 0.25
eta = 0.3
m = 1.0
mode = "mme"

[schedule]
rows = [{{ l = 1, t = 8.0, k = {k}, delta = 0.25, c = 4 }}]

[engine]
backend = "{}"
"#,
        serde_json::to_value(backend).unwrap().as_str().unwrap()
    );
    let path = dir.path().join("run.toml");
    std::fs::write(&path, run).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    (dir, cfg)
}

fn stats(k: u64, backend: Backend) -> LevelStats {
    let (_dir, cfg) = config(k, backend);
    let inst = cfg.load_instance().unwrap();
    let res = run_experiment(&cfg, &inst, 3).unwrap();
    let lv = &res.levels[0];
    assert!(lv.error.is_none(), "{:?}", lv.error);
    lv.stats.clone().unwrap()
}

#[test]
fn factorized_matches_enumeration_on_a_two_level_roof() {
    for k in [2, 3] {
        let e = stats(k, Backend::Enumerate);
        let f = stats(k, Backend::Factorized);
        assert_eq!(e.backend, Backend::Enumerate);
        assert_eq!(f.backend, Backend::Factorized);
        assert_eq!(e.cycles, 4);
        assert_eq!(e.atoms, 4usize.pow(k as u32));
        assert_eq!(e.max_residual, 0.0);
        assert!(e.variance.s_doubleprime_sq.value > 0.0);
        let mut diffs = Vec::new();
        common::json_diff(
            &serde_json::to_value(&e).unwrap(),
            &serde_json::to_value(&f).unwrap(),
            "stats",
            1e-10,
            &["backend", "atoms", "method"],
            &mut diffs,
        );
        assert!(diffs.is_empty(), "k = {k}: {diffs:#?}");
    }
}

#[test]
fn sampled_backend_brackets_the_exact_values() {
    let e = stats(3, Backend::Factorized);
    let (_dir, mut cfg) = config(3, Backend::Sample);
    cfg.engine.samples = 4000;
    let inst = cfg.load_instance().unwrap();
    let s = run_experiment(&cfg, &inst, 3).unwrap().levels[0].stats.clone().unwrap();
    assert_eq!(s.atoms, 4000);
    for (exact, est) in [(e.variance.s_l_sq, s.variance.s_l_sq), (e.main_integral, s.main_integral)] {
        let se = est.stderr.expect("sampled stderr");
        assert!((exact.value - est.value).abs() < 5.0 * se, "{} vs {} ± {se}", exact.value, est.value);
    }
    // Same seed, same draws.
    let again = run_experiment(&cfg, &inst, 3).unwrap().levels[0].stats.clone().unwrap();
    assert_eq!(serde_json::to_string(&s).unwrap(), serde_json::to_string(&again).unwrap());
}
