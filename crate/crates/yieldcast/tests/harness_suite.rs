//! End-to-end suite runner checks: determinism of the report artifact,
//! isolation of failing models, and loader round-trips of emitted CSVs.

use std::path::{Path, PathBuf};

use yieldcast::data::{load_fred_csv, MissingPolicy, Panel};
use yieldcast::harness::config::ExperimentConfig;
use yieldcast::harness::run_suite;
use yieldcast::synth::{generate_snapshot, WorldParams};

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("yieldcast-harness-{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, models: &str, extras: &str) -> PathBuf {
    let config = format!(
        r#"version = 1
seed = 7
models = [{models}]
extra_stages = [{extras}]

[data]
dir = "snapshot"
missing_policy = "drop"
yieldsp = "yieldsp.csv"
treasuries = [
  "tres_3mo.csv", "tres_6mo.csv", "tres_1yr.csv", "tres_2yr.csv", "tres_3yr.csv",
  "tres_5yr.csv", "tres_7yr.csv", "tres_10yr.csv", "tres_20yr.csv", "tres_30yr.csv",
]

[data.covariates]
ted = "ted.csv"
vix = "vix.csv"
rec_ind = "rec_ind.csv"
termpr = "termpr.csv"
forward1yr = "forward1yr.csv"
ffr1yr = "ffr1yr.csv"
infexp = "infexp.csv"
sahm = "sahm.csv"

[univariate]
start = "2015-01-02"
end = "2020-08-21"
test_start = "2020-04-04"
arima_level = [1, 0, 1]
arima_diff = [1, 1, 1]
refit = "fixed_params"
garch = [1, 1]

[pca]
start = "2010-01-04"
end = "2020-08-21"
components = 5
spread_long = "tres_10yr.csv"
spread_short = "tres_3mo.csv"

[multivariate]
start = "2012-01-03"
end = "2020-06-01"
split_fraction = 0.8
sarimax = [1, 1, 1]
sarimax_exog = ["ted", "vix", "d_termpr"]
granger_max_lag = 10
var_max_lag = 8
var_ordering = ["d_yieldsp", "d_termpr", "d_forward1yr", "ffr1yr", "rec_ind", "ted", "vix"]
irf_horizon = 10
fevd_horizon = 50

[neural]
mlp_neurons = [1, 3]
mlp_epochs = 4
mlp_batch = 8
mlp_repeats = 2
lstm_units = 4
lstm_epochs = 5
lstm_batch = 50
"#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn report_csv_is_deterministic() {
    let dir = workdir("determinism");
    generate_snapshot(&dir.join("snapshot"), &WorldParams::default()).unwrap();
    let cfg_path = write_config(&dir, r#""naive", "arima_level", "garch""#, r#""pca""#);
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();

    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    let r1 = run_suite(&cfg, &out1).unwrap();
    let r2 = run_suite(&cfg, &out2).unwrap();
    assert!(r1.all_completed(), "{:?}", r1.rows);
    assert!(r2.all_completed());
    let csv1 = std::fs::read(out1.join("report.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("report.csv")).unwrap();
    assert_eq!(csv1, csv2, "report CSVs differ between identical runs");
}

#[test]
fn failing_model_is_isolated() {
    let dir = workdir("isolation");
    generate_snapshot(&dir.join("snapshot"), &WorldParams::default()).unwrap();

    // lstm_stateless without its [neural.stateless] block fails at runtime.
    let ok_cfg = ExperimentConfig::load(&write_config(
        &dir,
        r#""naive", "arima_level""#,
        "",
    ))
    .unwrap();
    let with_bad = ExperimentConfig::load(&write_config(
        &dir,
        r#""naive", "lstm_stateless", "arima_level""#,
        "",
    ))
    .unwrap();

    let out_ok = dir.join("ok");
    let out_bad = dir.join("bad");
    let r_ok = run_suite(&ok_cfg, &out_ok).unwrap();
    let r_bad = run_suite(&with_bad, &out_bad).unwrap();

    assert!(r_ok.all_completed());
    assert!(!r_bad.all_completed());
    let failing = r_bad.row("lstm_stateless").unwrap();
    assert!(failing.error.is_some());
    // Other rows keep their results bit for bit.
    for name in ["naive", "arima_level"] {
        let a = r_ok.row(name).unwrap().rmse.unwrap();
        let b = r_bad.row(name).unwrap().rmse.unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "{name} shifted");
    }
}

#[test]
fn emitted_csvs_round_trip_through_loaders() {
    let dir = workdir("roundtrip");
    generate_snapshot(&dir.join("snapshot"), &WorldParams::default()).unwrap();
    let cfg = ExperimentConfig::load(&write_config(
        &dir,
        r#""naive", "arima_level""#,
        r#""pca", "vasicek""#,
    ))
    .unwrap();
    let out = dir.join("run");
    let report = run_suite(&cfg, &out).unwrap();
    assert!(report.all_completed());

    // Forecast artifacts parse as panels (date plus numeric columns).
    for f in ["naive_predictions.csv", "arima_level_predictions.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        let panel = Panel::from_csv(&text, f).unwrap();
        assert!(panel.n_rows() > 0);
        assert!(panel.names().contains(&"predicted".to_string()));
    }
    // PCA scores parse as a panel.
    let scores = Panel::from_csv(
        &std::fs::read_to_string(out.join("pca_scores.csv")).unwrap(),
        "pca_scores.csv",
    )
    .unwrap();
    assert_eq!(scores.names()[0], "PC1");

    // The snapshot files themselves load through the FRED reader.
    let series = load_fred_csv(dir.join("snapshot/yieldsp.csv"), MissingPolicy::Drop).unwrap();
    assert!(series.len() > 9000);
    assert!(series.cleaning().dropped > 0);
}
