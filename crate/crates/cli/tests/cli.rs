use std::path::{Path, PathBuf};
use std::process::Command;

use sgl_panel::simulate::{run_experiment, simulate_panel, DgpConfig, ResultRecord};
use sgl_panel_cli::artifacts::{CvArtifact, FitArtifact, TestArtifact};
use sgl_panel_cli::config::{load, RunConfig};
use sgl_panel_cli::experiment_config;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgl-panel"))
}

/// Long-format CSV of a simulated panel: `y` and the covariate lag blocks.
fn fixture(dir: &Path, name: &str, dgp: &DgpConfig) -> PathBuf {
    let data = simulate_panel(dgp).unwrap();
    let mut s = String::from("entity,period,subperiod,variable,value\n");
    let y = data.response();
    for i in 0..data.n_entities() {
        for t in 0..data.n_periods() {
            s.push_str(&format!("e{i},{},1,y,{}\n", t + 1, y[(i, t)]));
            for c in data.covariates() {
                for j in 0..c.lags() {
                    s.push_str(&format!("e{i},{},{},{},{}\n", t + 1, j + 1, c.name, c.values[i][(t, j)]));
                }
            }
        }
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path
}

fn small_dgp(seed: u64, a: f64) -> DgpConfig {
    DgpConfig { n_entities: 4, n_periods: 30, n_covariates: 3, lags: 3, hf_per_period: 3, weight_scale: a, seed, ..Default::default() }
}

fn run_ok(cmd: &mut Command) -> std::process::Output {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn fit_writes_a_round_tripping_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &small_dgp(1, 1.0));
    let output = dir.path().join("fit.json");
    run_ok(bin().args(["fit", "--input"]).arg(&input).arg("--output").arg(&output));
    let bytes = std::fs::read(&output).unwrap();
    let art: FitArtifact = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(art.schema_version, 1);
    assert!(art.diagnostics.converged);
    // Three covariates with three Legendre functions each, plus y_lag1.
    assert_eq!(art.coefficients.len(), 10);
    assert_eq!(art.intercepts.len(), 1);
    assert!(art.cross_validation.is_some());
    let mut again = serde_json::to_vec_pretty(&art).unwrap();
    again.push(b'\n');
    assert_eq!(again, bytes);
}

#[test]
fn huge_lambda_gives_zero_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &small_dgp(2, 1.0));
    let out = run_ok(bin().args(["fit", "--lambda", "1e9", "--gamma", "0.5", "--input"]).arg(&input));
    let art: FitArtifact = serde_json::from_slice(&out.stdout).unwrap();
    assert!(art.coefficients.iter().all(|c| c.value == 0.0));
    assert!(art.cross_validation.is_none());
}

#[test]
fn fixed_effects_fit_reports_one_intercept_per_entity() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &DgpConfig { common_intercept: false, ..small_dgp(3, 1.0) });
    let out = run_ok(bin().args(["fit", "--estimator", "fe-sgl", "--gamma", "0.5", "--input"]).arg(&input));
    let art: FitArtifact = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(art.intercepts.len(), 4);
    assert_eq!(art.entities, vec!["e0", "e1", "e2", "e3"]);
}

#[test]
fn malformed_row_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &small_dgp(4, 0.0));
    let text = std::fs::read_to_string(&input).unwrap();
    let broken: String = text.lines().enumerate().map(|(k, l)| if k == 5 { "e0,2,1,y,abc\n".to_string() } else { format!("{l}\n") }).collect();
    std::fs::write(&input, broken).unwrap();
    let out = bin().args(["fit", "--input"]).arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
}

#[test]
fn inconsistent_flags_and_unknown_keys_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &small_dgp(5, 0.0));
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--set", "simulate.replications=1"],
        vec!["fit", "--kernel", "qs"],
        vec!["fit", "--set", "fit.lamda=1"],
        vec!["cv", "--lambda", "0.1"],
        vec!["test", "--estimator", "fe-sgl"],
        vec!["fit", "--no-such-flag"],
    ];
    for args in cases {
        let mut cmd = bin();
        cmd.args(&args);
        if args[0] != "simulate" {
            cmd.arg("--input").arg(&input);
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn cv_reports_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &small_dgp(6, 1.0));
    let out = run_ok(bin().args(["cv", "--set", "cv.n_folds=5", "--set", "cv.n_lambda=8", "--input"]).arg(&input));
    let art: CvArtifact = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(art.table.len(), 8 * 5);
    assert!(art.table.iter().all(|r| r.fold_mse.len() == 5));
    assert!(art.table.iter().any(|r| r.lambda == art.best_lambda && r.gamma == art.best_gamma));
}

#[test]
fn test_reports_every_kernel_and_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &small_dgp(7, 1.0));
    let output = dir.path().join("test.json");
    let out = run_ok(bin().args(["test", "--set", "test.bandwidths=[2, 4, 6]", "--input"]).arg(&input).arg("--output").arg(&output));
    let bytes = std::fs::read(&output).unwrap();
    let art: TestArtifact = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(art.tests.len(), 3 * 6);
    for cov in ["x1", "x2", "x3"] {
        assert_eq!(art.tests.iter().filter(|c| c.covariate == cov).count(), 6);
    }
    assert!(art.tests.iter().all(|c| c.p_value.is_some_and(|p| (0.0..=1.0).contains(&p)) && c.df == 3));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("parzen/2") && table.contains("qs/6"));
    let mut again = serde_json::to_vec_pretty(&art).unwrap();
    again.push(b'\n');
    assert_eq!(again, bytes);
}

#[test]
fn scalar_group_reports_t_ratio_p_value() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), "panel.csv", &DgpConfig { lags: 1, hf_per_period: 1, ..small_dgp(8, 1.0) });
    let out = run_ok(bin().args(["test", "--kernel", "parzen", "--bandwidth", "3", "--set", "test.covariates=[\"x1\"]", "--input"]).arg(&input));
    let art: TestArtifact = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(art.tests.len(), 1);
    let c = &art.tests[0];
    assert_eq!(c.df, 1);
    let t = c.debiased[0] / c.standard_errors[0];
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let two_sided = 2.0 * (1.0 - statrs::distribution::ContinuousCDF::cdf(&normal, t.abs()));
    assert!((c.p_value.unwrap() - two_sided).abs() < 1e-10);
}

#[test]
fn null_p_values_are_roughly_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Vec::new();
    for seed in 0..100 {
        let input = fixture(dir.path(), "noise.csv", &DgpConfig { n_entities: 5, n_periods: 40, ..small_dgp(10_000 + seed, 0.0) });
        let out = run_ok(bin().args(["test", "--kernel", "parzen", "--bandwidth", "5", "--set", "test.covariates=[\"x1\"]", "--input"]).arg(&input));
        let art: TestArtifact = serde_json::from_slice(&out.stdout).unwrap();
        p.push(art.tests[0].p_value.unwrap());
    }
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    let ks = p.iter().enumerate().map(|(k, &v)| ((k + 1) as f64 / n - v).max(v - k as f64 / n)).fold(0.0, f64::max);
    assert!(ks < 0.15, "KS distance {ks}");
}

fn tiny_simulation() -> Vec<&'static str> {
    vec![
        "simulate",
        "--seed",
        "11",
        "--set",
        "simulate.replications=2",
        "--set",
        "simulate.dgp.n_entities=3",
        "--set",
        "simulate.dgp.n_periods=20",
        "--set",
        "simulate.dgp.n_covariates=2",
        "--set",
        "simulate.weight_scales=[0.0, 0.5]",
        "--set",
        "simulate.poolings=[\"pooled\"]",
        "--bandwidth",
        "5",
    ]
}

#[test]
fn simulate_csv_round_trips_to_the_experiment_records() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("sim.csv");
    let out = run_ok(bin().args(tiny_simulation()).arg("--output").arg(&output));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Rejection frequencies"));
    let mut rdr = csv::Reader::from_path(&output).unwrap();
    let read: Vec<ResultRecord> = rdr.deserialize().collect::<Result<_, _>>().unwrap();

    let sets: Vec<String> = tiny_simulation().windows(2).filter(|w| w[0] == "--set").map(|w| w[1].to_string()).collect();
    let mut cfg: RunConfig = load(None, &sets).unwrap();
    cfg.simulate.bandwidths = vec![5.0];
    let expected = run_experiment(&experiment_config(&cfg, 11)).unwrap();
    assert_eq!(read, expected.records());
    // 2 estimators x 2 kernels x 2 scales, six statistics each.
    assert_eq!(read.len(), 8 * 6);
}

#[test]
fn simulate_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let path = dir.path().join(format!("sim{threads}.csv"));
        run_ok(bin().args(tiny_simulation()).args(["--threads", threads, "--output"]).arg(&path));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
