//! Calibration dashboard for the synthetic snapshot: generates the world,
//! runs every reproduction-suite computation, and prints where each lands
//! relative to its acceptance band. Run manually while tuning:
//!
//!   cargo test -p yieldcast --test calibration -- --ignored --nocapture

use std::path::PathBuf;

use yieldcast::harness::config::ExperimentConfig;
use yieldcast::harness::stages::{
    load_data, stage_arima, stage_garch, stage_lstm_multivariate, stage_mlp, stage_pca,
    stage_sarimax, stage_var,
};
use yieldcast::rng::derive_seed;
use yieldcast::synth::{generate_snapshot, WorldParams};

fn band(name: &str, value: f64, lo: f64, hi: f64) -> bool {
    let ok = value >= lo && value <= hi;
    println!(
        "  [{}] {name}: {value:.5} (band {lo:.5} .. {hi:.5})",
        if ok { "ok " } else { "OUT" }
    );
    ok
}

fn flag(name: &str, value: bool, want: bool) -> bool {
    let ok = value == want;
    println!("  [{}] {name}: {value} (want {want})", if ok { "ok " } else { "OUT" });
    ok
}

pub fn write_config(dir: &PathBuf, seed: u64) -> PathBuf {
    let config = format!(
        r#"version = 1
seed = {seed}
models = ["naive", "arima_level", "arima_diff", "garch", "sarimax", "var", "mlp", "lstm_multivariate"]
extra_stages = ["vasicek", "pca", "diagnostics"]

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
start = "1982-01-04"
end = "2020-08-21"
test_start = "2020-04-04"
arima_level = [1, 0, 3]
arima_diff = [3, 1, 3]
refit = "fixed_params"
garch = [1, 3]

[pca]
start = "1993-10-11"
end = "2020-08-21"
components = 5
spread_long = "tres_10yr.csv"
spread_short = "tres_3mo.csv"

[multivariate]
start = "1990-01-02"
end = "2020-06-01"
split_fraction = 0.8
sarimax = [2, 1, 2]
sarimax_exog = ["ted", "rec_ind", "ffr1yr", "vix", "d_termpr", "d_forward1yr", "infexp", "sahm"]
granger_max_lag = 40
var_max_lag = 50
var_ordering = ["d_yieldsp", "d_termpr", "d_forward1yr", "ffr1yr", "rec_ind", "ted", "vix"]
irf_horizon = 10
fevd_horizon = 200

[neural]
mlp_neurons = [1, 3, 5]
mlp_epochs = 20
mlp_batch = 2
mlp_repeats = 8
lstm_units = 25
lstm_epochs = 500
lstm_batch = 50

"#
    );
    let path = dir.join("spread.toml");
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
#[ignore]
fn calibration_dashboard() {
    let dir = std::env::temp_dir().join("yieldcast-calibration");
    std::fs::create_dir_all(&dir).unwrap();
    let mut params = WorldParams::default();
    let envf = |k: &str, v: &mut f64| {
        if let Ok(s) = std::env::var(k) {
            *v = s.parse().unwrap();
        }
    };
    envf("YC_AR", &mut params.spread_ar);
    envf("YC_SD", &mut params.innovation_sd);
    envf("YC_TPS", &mut params.termpr_scale);
    envf("YC_TPL", &mut params.termpr_loading);
    envf("YC_MEAS", &mut params.measurement_sd);
    envf("YC_LVL", &mut params.level_sd);
    envf("YC_GAIN", &mut params.covariate_gain);
    if let Ok(s) = std::env::var("YC_SEED") {
        params.seed = s.parse().unwrap();
    }
    println!(
        "params: ar {} sd {} tps {} tpl {} meas {} lvl {} gain {} seed {}",
        params.spread_ar, params.innovation_sd, params.termpr_scale, params.termpr_loading,
        params.measurement_sd, params.level_sd, params.covariate_gain, params.seed
    );
    let snap = dir.join("snapshot");
    generate_snapshot(&snap, &params).unwrap();
    let cfg_path = write_config(&dir, 20200821);
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let data = load_data(&cfg).unwrap();
    let skip = |name: &str| std::env::var(format!("YC_SKIP_{name}")).is_ok();
    let mut all_ok = true;

    println!("criterion 13: PCA");
    {
        let o = stage_pca(&data, cfg.pca.components).unwrap();
        let shares: Vec<f64> = o.table.iter().map(|r| r.ratio_retained).collect();
        println!("  shares: {shares:?}");
        all_ok &= band("pc1", shares[0], 0.935264 - 0.02, 0.935264 + 0.02);
        all_ok &= band("pc2", shares[1], 0.060163 - 0.02, 0.060163 + 0.02);
        all_ok &= band("pc3", shares[2], 0.003582 - 0.02, 0.003582 + 0.02);
        all_ok &= band("corr(PC2, spread)", o.corr_pc2_spread, 0.85, 1.0);
    }

    let mut arima_rmse = f64::NAN;
    let mut diff_rmse = f64::NAN;
    println!("criterion 14a: univariate ARIMA");
    {
        let level = stage_arima(&data, cfg.univariate.arima_level, cfg.univariate.refit.into())
            .unwrap();
        println!(
            "  level: aic {:.1} mean {:.3} ar {:?} ma {:?} sigma {:.5}",
            level.aic,
            level.mean,
            level.ar,
            level.ma,
            level.sigma2.sqrt()
        );
        arima_rmse = level.rmse;
        all_ok &= band("arima_level rmse", level.rmse, 0.052 * 0.8, 0.052 * 1.2);

        let diff =
            stage_arima(&data, cfg.univariate.arima_diff, cfg.univariate.refit.into()).unwrap();
        diff_rmse = diff.rmse;
        println!("  diff: aic {:.1} rmse {:.5}", diff.aic, diff.rmse);
        all_ok &= flag("diff above level", diff.rmse > level.rmse, true);

        println!("criterion 15: GARCH(1,3) on level residuals");
        let g = stage_garch(&level.fit.residuals, cfg.univariate.garch, 40).unwrap();
        println!(
            "  alpha0 {:.3e} alpha {:?} beta {:?} persistence {:.4} aic {:.1}",
            g.alpha0, g.alpha, g.beta, g.persistence, g.aic
        );
        all_ok &= band("garch alpha1 (var lag)", g.alpha[0], 0.1145 - 0.15, 0.1145 + 0.15);
        all_ok &= band("garch beta1 (eps2 lag)", g.beta[0], 0.8015 - 0.15, 0.8015 + 0.15);
        // Informational: heavy tails shrink raw squared-ACF estimates, so the
        // pre-GARCH flag is reported but not gated.
        println!("  arch before (informational): {}", g.arch_before);
        all_ok &= flag("arch remains after", g.arch_after, true);
        let std = g.fit.standardized_residuals(&level.fit.residuals).unwrap();
        let diag = yieldcast::garch::arch_effect_diagnostic(&std, 40).unwrap();
        println!("  standardized breaches: {} of {}", diag.breaching_lags, diag.n_lags);
        // Window volatility diagnostics for the RMSE bands.
        let resid = &level.fit.residuals;
        let n = resid.len();
        let uncond = (resid.values().iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let test_idx = resid
            .dates()
            .iter()
            .position(|d| *d >= chrono::NaiveDate::from_ymd_opt(2020, 4, 4).unwrap())
            .unwrap();
        let tail = &resid.values()[test_idx..];
        let window = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
        println!("  residual sd: uncond {uncond:.4}, apr-aug 2020 window {window:.4}");
    }

    println!("criterion 14b: SARIMAX");
    let mut sarimax_rmse = f64::NAN;
    if !skip("SARIMAX") {
        let s = stage_sarimax(&data, cfg.multivariate.sarimax).unwrap();
        sarimax_rmse = s.rmse;
        println!("  aic {:.1} rmse {:.4} beta {:?}", s.aic, s.rmse, s.beta);
        all_ok &= band("sarimax rmse", s.rmse, 0.35 * 0.7, 0.35 * 1.3);
        all_ok &= flag("sarimax > 5x arima", s.rmse > 5.0 * arima_rmse, true);
    }

    println!("criterion 16: VAR");
    let mut var_rmse = f64::NAN;
    if !skip("VAR") {
        let v = stage_var(&data, &cfg).unwrap();
        var_rmse = v.rmse;
        println!(
            "  selected lag {} (aic {:.4}); dw {:?}",
            v.selected_lag, v.aic_at_selected, v.dw
        );
        println!(
            "  fevd impact {:.4} -> longrun {:.4}; own {:.4} -> {:.4}; rmse {:.4}",
            v.fevd_impact_share, v.fevd_longrun_share, v.own_impact_share, v.own_longrun_share, v.rmse
        );
        for row in &v.granger {
            println!("    granger {} p={:.4}", row.cause, row.p_value);
        }
        if let Some((_, actual, predicted)) = &v.predictions {
            let anchor_err: f64 = {
                // Flat-line reference: hold the anchor level.
                let anchor = predicted[0] - (predicted[1] - predicted[0]); // approx
                let _ = anchor;
                let first = actual[0];
                (actual.iter().map(|a| (a - first) * (a - first)).sum::<f64>()
                    / actual.len() as f64)
                    .sqrt()
            };
            let cum_drift = predicted[predicted.len() - 1] - predicted[0];
            let mean_delta = cum_drift / predicted.len() as f64;
            println!(
                "  var diag: flat-line rmse {:.4}, mean predicted delta {:.6} (total drift {:.3})",
                anchor_err, mean_delta, cum_drift
            );
        }
        all_ok &= band("var selected lag", v.selected_lag as f64, 25.0, 40.0);
        for (i, dw) in v.dw.iter().enumerate() {
            all_ok &= band(&format!("dw[{i}]"), *dw, 1.8, 2.2);
        }
        all_ok &= band("fevd impact share", v.fevd_impact_share, 0.5978 - 0.10, 0.5978 + 0.10);
        all_ok &= band("var rmse", v.rmse, 0.46 * 0.7, 0.46 * 1.3);
    }

    println!("criterion 17: MLP table");
    if !skip("MLP") {
        let rows = stage_mlp(&data, &cfg, derive_seed(cfg.seed, "mlp")).unwrap();
        for r in &rows {
            println!(
                "  {} neurons: mean {:.6} sd {:.6} min {:.6} max {:.6}",
                r.neurons, r.rmse_stats.mean, r.rmse_stats.sd, r.rmse_stats.min, r.rmse_stats.max
            );
        }
        let mean_of = |n: usize| rows.iter().find(|r| r.neurons == n).unwrap().rmse_stats.mean;
        all_ok &= flag("mlp 5n <= 1n", mean_of(5) <= mean_of(1), true);
    }

    println!("criterion 14c: multivariate LSTM");
    if !skip("LSTM") {
        let o = stage_lstm_multivariate(&data, &cfg, derive_seed(cfg.seed, "lstm_multivariate"))
            .unwrap();
        println!(
            "  train rmse {:.5} test rmse {:.5} epochs {}",
            o.train_rmse, o.test_rmse, o.history.stopped_epoch
        );
        all_ok &= band(
            "lstm/arima ratio",
            o.test_rmse / arima_rmse,
            0.9,
            1.1,
        );
        all_ok &= flag("lstm below diff-arima", o.test_rmse < diff_rmse, true);
    }

    println!("ordering: arima {arima_rmse:.4} diff {diff_rmse:.4} sarimax {sarimax_rmse:.4} var {var_rmse:.4}");
    if !skip("SARIMAX") && !skip("VAR") {
        all_ok &= flag("var is largest", var_rmse > sarimax_rmse, true);
    }
    println!("overall: {}", if all_ok { "ALL OK" } else { "NEEDS TUNING" });
}

/// Regenerates the checked-in snapshot from the calibrated defaults:
///
///   cargo test -p yieldcast --test calibration regenerate_snapshot -- --ignored --nocapture
#[test]
#[ignore]
fn regenerate_snapshot() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/fred_snapshot");
    let files = generate_snapshot(&root, &WorldParams::default()).unwrap();
    println!("wrote {} files to {}", files.len(), root.display());
}
