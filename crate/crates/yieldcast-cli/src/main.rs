//! `yieldcast` — forecasting experiments on the Treasury yield spread.
//!
//! Top-level: `yieldcast run <config>` executes a full experiment suite;
//! per-module subcommands expose each estimator on its own. Output lands in
//! the current directory unless `--out-dir` or YIELDCAST_OUT_DIR says
//! otherwise.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use yieldcast::arima::{self, ArimaSpec, RefitMode, Split};
use yieldcast::data::{
    align_panel, load_fred_csv, MissingPolicy, Panel, TimeSeries,
};
use yieldcast::diagnostics::{
    adf_test, correlogram, dagostino_k2, descriptive_stats, durbin_watson, AdfRegression,
};
use yieldcast::error::Result;
use yieldcast::garch::{arch_effect_diagnostic, fit_garch, forecast_variance, GarchSpec};
use yieldcast::harness::config::ExperimentConfig;
use yieldcast::harness::stages::{emit_plot_data, PlotData};
use yieldcast::harness::run_suite;
use yieldcast::neural::{
    prepare_scaled_supervised, run_lstm_regime, run_mlp_experiment, train_mlp, LstmRegime, Loss,
    Mlp, TrainConfig,
};
use yieldcast::pca::pca;
use yieldcast::rng::derive_seed;
use yieldcast::synth::{generate_snapshot, WorldParams};
use yieldcast::var::{fevd, fit_var, forecast_iterative, forecast_rolling, irf, select_lag_order};
use yieldcast::vasicek::{calibrate_mle, simulate_paths, SimulationSpec, VasicekParams};

#[derive(Parser)]
#[command(name = "yieldcast", version, about = "Yield-spread forecasting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Drop,
    ForwardFill,
}

impl From<MissingArg> for MissingPolicy {
    fn from(m: MissingArg) -> Self {
        match m {
            MissingArg::Drop => MissingPolicy::Drop,
            MissingArg::ForwardFill => MissingPolicy::ForwardFill,
        }
    }
}

#[derive(Args)]
struct OutDir {
    /// Output directory (falls back to YIELDCAST_OUT_DIR, then ".").
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("YIELDCAST_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment suite from a TOML config.
    Run {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Stationarity, normality, and autocorrelation diagnostics per series.
    Diagnose {
        /// Two-column FRED-style CSV files.
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        max_lags: usize,
        #[arg(long, default_value_t = 40)]
        acf_lags: usize,
        #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
        missing: MissingArg,
        #[command(flatten)]
        out: OutDir,
    },
    /// Principal components of a panel CSV (date column plus named columns).
    Pca {
        panel: PathBuf,
        #[arg(long, default_value_t = 5)]
        components: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Mean-reversion model: exact-transition simulation and MLE calibration.
    Vasicek {
        #[command(subcommand)]
        command: VasicekCommand,
    },
    /// ARIMA estimation, forecasting, and walk-forward evaluation.
    Arima {
        #[command(subcommand)]
        command: ArimaCommand,
    },
    /// Conditional-variance model on zero-mean residuals.
    Garch {
        /// Residual series CSV.
        residuals: PathBuf,
        /// Order as p,q (variance lags, squared-shock lags).
        #[arg(long, value_parser = parse_pair)]
        order: (usize, usize),
        #[arg(long, default_value_t = 10)]
        forecast: usize,
        #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
        missing: MissingArg,
        #[command(flatten)]
        out: OutDir,
    },
    /// Vector autoregression: estimation, forecasts, IRF, FEVD.
    Var {
        #[command(subcommand)]
        command: VarCommand,
    },
    /// Neural networks: the MLP width experiment and LSTM regimes.
    Nn {
        #[command(subcommand)]
        command: NnCommand,
    },
    /// Data utilities: alignment/export and synthetic snapshot generation.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
}

#[derive(Subcommand)]
enum VasicekCommand {
    /// Simulate paths under the exact Gaussian transition.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        k: f64,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, allow_negative_numbers = true)]
        r0: f64,
        #[arg(long, default_value_t = 1.0 / 252.0)]
        dt: f64,
        #[arg(long, default_value_t = 252)]
        steps: usize,
        #[arg(long, default_value_t = 10)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Closed-form maximum-likelihood calibration from a series CSV.
    Calibrate {
        series: PathBuf,
        #[arg(long, default_value_t = 1.0 / 252.0)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
        missing: MissingArg,
    },
}

#[derive(Args)]
struct ArimaInput {
    /// Target series CSV.
    series: PathBuf,
    /// Order as p,d,q.
    #[arg(long, value_parser = parse_triple)]
    order: (usize, usize, usize),
    /// Exogenous panel CSV (date column plus named columns).
    #[arg(long)]
    exog: Option<PathBuf>,
    /// Subset of exogenous columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    exog_cols: Vec<String>,
    /// Drop the mean/drift term.
    #[arg(long)]
    no_mean: bool,
    #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
    missing: MissingArg,
}

#[derive(Subcommand)]
enum ArimaCommand {
    /// Fit and print the coefficient report as JSON.
    Fit {
        #[command(flatten)]
        input: ArimaInput,
    },
    /// Fit, then forecast `horizon` steps with interval bands.
    Forecast {
        #[command(flatten)]
        input: ArimaInput,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Future exogenous rows (required when --exog was used).
        #[arg(long)]
        exog_future: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// One-step walk-forward evaluation over a test split.
    Walkforward {
        #[command(flatten)]
        input: ArimaInput,
        /// Fraction in (0,1) or an ISO date marking the first test day.
        #[arg(long)]
        split: String,
        #[arg(long, value_enum, default_value_t = RefitArg::EveryStep)]
        refit: RefitArg,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RefitArg {
    EveryStep,
    FixedParams,
}

impl From<RefitArg> for RefitMode {
    fn from(r: RefitArg) -> Self {
        match r {
            RefitArg::EveryStep => RefitMode::EveryStep,
            RefitArg::FixedParams => RefitMode::FixedParams,
        }
    }
}

#[derive(Subcommand)]
enum VarCommand {
    /// Estimate VAR(l), optionally selecting l by AIC up to --max-lags.
    Fit {
        panel: PathBuf,
        #[arg(long)]
        lags: Option<usize>,
        #[arg(long, default_value_t = 12)]
        max_lags: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Forecast h steps (iterative) or one-step over a held-out tail.
    Forecast {
        panel: PathBuf,
        #[arg(long)]
        lags: usize,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// Rolling one-step mode: fraction of rows used for training.
        #[arg(long)]
        rolling_split: Option<f64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Orthogonalized impulse responses.
    Irf {
        panel: PathBuf,
        #[arg(long)]
        lags: usize,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// Cholesky ordering, comma separated (defaults to panel order).
        #[arg(long, value_delimiter = ',')]
        ordering: Vec<String>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Forecast-error variance decomposition.
    Fevd {
        panel: PathBuf,
        #[arg(long)]
        lags: usize,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, value_delimiter = ',')]
        ordering: Vec<String>,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NnModel {
    Mlp,
    Lstm,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Stateless,
    StatefulStacked,
    Multivariate,
}

impl From<RegimeArg> for LstmRegime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Stateless => LstmRegime::Stateless,
            RegimeArg::StatefulStacked => LstmRegime::StatefulStacked,
            RegimeArg::Multivariate => LstmRegime::Multivariate,
        }
    }
}

#[derive(Subcommand)]
enum NnCommand {
    /// Train a network on a series and report train/test RMSE.
    Train {
        series: PathBuf,
        #[arg(long, value_enum)]
        model: NnModel,
        /// LSTM training regime (ignored for MLP).
        #[arg(long, value_enum, default_value_t = RegimeArg::Stateless)]
        regime: RegimeArg,
        /// Covariate panel CSV for the multivariate regime.
        #[arg(long)]
        covariates: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        lags: usize,
        /// Hidden width (MLP) or LSTM units.
        #[arg(long, default_value_t = 25)]
        neurons: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 50)]
        batch: usize,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Fraction in (0,1) or an ISO date marking the first test day.
        #[arg(long, default_value = "0.8")]
        split: String,
        #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
        missing: MissingArg,
        #[command(flatten)]
        out: OutDir,
    },
    /// The width experiment: neuron grid with repeated runs.
    MlpExperiment {
        series: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5])]
        neurons: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 2)]
        batch: usize,
        #[arg(long, default_value_t = 8)]
        repeats: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "0.8")]
        split: String,
        #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
        missing: MissingArg,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Inner-join series files onto a shared calendar and export a panel CSV.
    Align {
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
        missing: MissingArg,
        #[arg(long, default_value = "panel.csv")]
        out: PathBuf,
    },
    /// Generate a synthetic FRED-style snapshot.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected p,q".to_string());
    }
    Ok((
        parts[0].trim().parse().map_err(|e| format!("{e}"))?,
        parts[1].trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn parse_triple(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected p,d,q".to_string());
    }
    Ok((
        parts[0].trim().parse().map_err(|e| format!("{e}"))?,
        parts[1].trim().parse().map_err(|e| format!("{e}"))?,
        parts[2].trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn parse_split(s: &str) -> Result<Split> {
    if let Ok(f) = s.parse::<f64>() {
        return Ok(Split::Fraction(f));
    }
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| {
        yieldcast::Error::InvalidParameter(format!("split `{s}` is neither fraction nor date: {e}"))
    })?;
    Ok(Split::Date(date))
}

fn load_panel(path: &Path) -> Result<Panel> {
    let text = std::fs::read_to_string(path).map_err(|source| yieldcast::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Panel::from_csv(&text, &path.display().to_string())
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| yieldcast::Error::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, content).map_err(|source| yieldcast::Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out_dir = out
                .out_dir
                .clone()
                .or_else(|| std::env::var_os("YIELDCAST_OUT_DIR").map(PathBuf::from))
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("yieldcast-out"));
            let report = run_suite(&cfg, &out_dir)?;
            println!("model,test_rmse");
            for row in report.sorted_rows() {
                match (&row.rmse, &row.error) {
                    (Some(r), _) => println!("{},{r:.6}", row.name),
                    (None, Some(e)) => println!("{},failed: {e}", row.name),
                    (None, None) => println!("{},(no point forecast)", row.name),
                }
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("artifacts in {}", out_dir.display());
            if report.all_completed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Diagnose {
            files,
            max_lags,
            acf_lags,
            missing,
            out,
        } => {
            let out_dir = out.resolve();
            let mut rows = Vec::new();
            println!(
                "{:<16} {:>10} {:>9} {:>6} {:>10} {:>9} {:>8}",
                "series", "adf_stat", "adf_p", "lags", "k2", "k2_p", "dw"
            );
            for file in &files {
                let series = load_fred_csv(file, missing.into())?;
                let adf = adf_test(&series, max_lags, AdfRegression::Constant)?;
                let k2 = dagostino_k2(&series)?;
                let dw = durbin_watson(&series)?;
                let stats = descriptive_stats(&series)?;
                let gram = correlogram(&series, acf_lags.min(series.len() / 2 - 1))?;
                let gram_path = out_dir.join(format!("{}_correlogram.csv", series.name()));
                emit_plot_data(
                    "correlogram",
                    &PlotData::Correlogram {
                        name: series.name(),
                        gram: &gram,
                    },
                    &gram_path,
                )?;
                println!(
                    "{:<16} {:>10.4} {:>9.4} {:>6} {:>10.3} {:>9.4} {:>8.4}",
                    series.name(),
                    adf.statistic,
                    adf.p_value,
                    adf.lags_used,
                    k2.k2_statistic,
                    k2.p_value,
                    dw
                );
                rows.push(serde_json::json!({
                    "series": series.name(),
                    "adf": {"statistic": adf.statistic, "p_value": adf.p_value, "lags_used": adf.lags_used, "n_obs": adf.n_obs},
                    "dagostino_k2": {"statistic": k2.k2_statistic, "p_value": k2.p_value, "skewness": k2.skewness, "excess_kurtosis": k2.kurtosis},
                    "durbin_watson": dw,
                    "descriptive": {"mean": stats.mean, "sd": stats.sd, "min": stats.min, "q25": stats.q25, "median": stats.median, "q75": stats.q75, "max": stats.max},
                    "correlogram_csv": gram_path.display().to_string(),
                }));
            }
            write(
                &out_dir.join("diagnostics.json"),
                &serde_json::to_string_pretty(&rows).unwrap(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Pca {
            panel,
            components,
            out,
        } => {
            let out_dir = out.resolve();
            let p = load_panel(&panel)?;
            let result = pca(&p, components)?;
            println!("component,eigenvalue,ratio_retained,ratio_total");
            let mut csv = String::from("component,eigenvalue,ratio_retained,ratio_total\n");
            for row in result.explained_table() {
                let line = format!(
                    "{},{},{},{}",
                    row.component, row.eigenvalue, row.ratio_retained, row.ratio_total
                );
                println!("{line}");
                csv.push_str(&line);
                csv.push('\n');
            }
            write(&out_dir.join("pca_explained.csv"), &csv)?;
            emit_plot_data(
                "pca_scores",
                &PlotData::Scores(&result.scores),
                &out_dir.join("pca_scores.csv"),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Vasicek { command } => vasicek_cmd(command),
        Command::Arima { command } => arima_cmd(command),
        Command::Garch {
            residuals,
            order,
            forecast,
            missing,
            out,
        } => {
            let out_dir = out.resolve();
            let series = load_fred_csv(&residuals, missing.into())?;
            let fit = fit_garch(&series, GarchSpec::new(order.0, order.1)?)?;
            let diag = arch_effect_diagnostic(&series, 40)?;
            let report = serde_json::json!({
                "order": {"p_variance_lags": order.0, "q_squared_shock_lags": order.1},
                "alpha0": fit.alpha0,
                "alpha_on_lagged_variance": fit.alpha,
                "beta_on_lagged_squared_shocks": fit.beta,
                "persistence": fit.persistence(),
                "unconditional_variance": fit.unconditional_variance(),
                "log_likelihood": fit.log_likelihood,
                "aic": fit.aic,
                "std_errors": fit.std_errors,
                "boundary": fit.boundary,
                "arch_effect_flagged_on_input": diag.flagged,
                "variance_forecast": forecast_variance(&fit, forecast),
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            write(&out_dir.join("garch_fit.json"), &report.to_string())?;
            let mut csv = String::from("date,cond_variance\n");
            for (d, v) in fit.cond_variance.dates().iter().zip(fit.cond_variance.values()) {
                csv.push_str(&format!("{d},{v}\n"));
            }
            write(&out_dir.join("garch_cond_variance.csv"), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Var { command } => var_cmd(command),
        Command::Nn { command } => nn_cmd(command),
        Command::Data { command } => match command {
            DataCommand::Align { files, missing, out } => {
                let mut series = Vec::new();
                for f in &files {
                    series.push(load_fred_csv(f, missing.into())?);
                }
                let panel = align_panel(&series)?;
                write(&out, &panel.to_csv())?;
                eprintln!(
                    "aligned {} series on {} shared dates -> {}",
                    panel.n_cols(),
                    panel.n_rows(),
                    out.display()
                );
                Ok(ExitCode::SUCCESS)
            }
            DataCommand::Synth { out_dir, seed } => {
                let mut params = WorldParams::default();
                if let Some(s) = seed {
                    params.seed = s;
                }
                let files = generate_snapshot(&out_dir, &params)?;
                eprintln!("wrote {} files to {}", files.len(), out_dir.display());
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

fn vasicek_cmd(command: VasicekCommand) -> Result<ExitCode> {
    match command {
        VasicekCommand::Simulate {
            k,
            theta,
            sigma,
            r0,
            dt,
            steps,
            paths,
            seed,
            out,
        } => {
            let params = VasicekParams::new(k, theta, sigma)?;
            let spec = SimulationSpec {
                r0,
                dt,
                n_steps: steps,
                n_paths: paths,
                seed,
            };
            let ensemble = simulate_paths(&params, &spec)?;
            let out_path = out.resolve().join("vasicek_paths.csv");
            write(&out_path, &ensemble.to_csv())?;
            eprintln!(
                "{} paths x {} steps -> {} (terminal mean {:.4})",
                paths,
                steps,
                out_path.display(),
                ensemble.mean_at(steps)
            );
            Ok(ExitCode::SUCCESS)
        }
        VasicekCommand::Calibrate { series, dt, missing } => {
            let s = load_fred_csv(&series, missing.into())?;
            let cal = calibrate_mle(&s, dt)?;
            let report = serde_json::json!({
                "k": cal.params.k,
                "theta": cal.params.theta,
                "sigma": cal.params.sigma,
                "std_errors": {"k": cal.std_errors.k, "theta": cal.std_errors.theta, "sigma": cal.std_errors.sigma},
                "log_likelihood": cal.log_likelihood,
                "n_obs": cal.n_obs,
                "dt": cal.dt,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn arima_load(input: &ArimaInput) -> Result<(TimeSeries, Option<Panel>, ArimaSpec)> {
    let series = load_fred_csv(&input.series, input.missing.into())?;
    let exog = match &input.exog {
        Some(path) => {
            let panel = load_panel(path)?;
            let panel = if input.exog_cols.is_empty() {
                panel
            } else {
                let names: Vec<&str> = input.exog_cols.iter().map(|s| s.as_str()).collect();
                panel.select(&names)?
            };
            // Align the panel rows to the series calendar.
            let keep: Vec<usize> = (0..panel.n_rows())
                .filter(|&i| series.dates().contains(&panel.calendar()[i]))
                .collect();
            if keep.len() != series.len() {
                return Err(yieldcast::Error::DimensionMismatch(format!(
                    "exog panel covers {} of {} series dates",
                    keep.len(),
                    series.len()
                )));
            }
            Some(panel)
        }
        None => None,
    };
    let (p, d, q) = input.order;
    let mut spec = ArimaSpec::new(p, d, q);
    if input.no_mean {
        spec = spec.without_mean();
    }
    Ok((series, exog, spec))
}

fn fit_report(fit: &arima::ArimaFit) -> serde_json::Value {
    let coefficients: Vec<serde_json::Value> = fit
        .param_names
        .iter()
        .zip(
            std::iter::empty()
                .chain(if fit.spec.include_mean {
                    vec![fit.mean]
                } else {
                    vec![]
                })
                .chain(fit.exog_beta.iter().copied())
                .chain(fit.ar.iter().copied())
                .chain(fit.ma.iter().copied())
                .chain(std::iter::once(fit.sigma2)),
        )
        .zip(fit.std_errors.iter())
        .map(|((name, value), se)| {
            serde_json::json!({"name": name, "estimate": value, "std_error": se})
        })
        .collect();
    serde_json::json!({
        "model": fit.spec.label(),
        "coefficients": coefficients,
        "sigma2": fit.sigma2,
        "log_likelihood": fit.log_likelihood,
        "aic": fit.aic,
        "n_obs": fit.n_obs,
        "n_params": fit.n_params,
    })
}

fn arima_cmd(command: ArimaCommand) -> Result<ExitCode> {
    match command {
        ArimaCommand::Fit { input } => {
            let (series, exog, spec) = arima_load(&input)?;
            let fit = arima::fit(&series, &spec, exog.as_ref())?;
            println!("{}", serde_json::to_string_pretty(&fit_report(&fit)).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        ArimaCommand::Forecast {
            input,
            horizon,
            level,
            exog_future,
            out,
        } => {
            let (series, exog, spec) = arima_load(&input)?;
            let fit = arima::fit(&series, &spec, exog.as_ref())?;
            let future = exog_future.as_deref().map(load_panel).transpose()?;
            let fc = arima::forecast(&fit, horizon, future.as_ref(), level)?;
            let mut csv = String::from("step,mean,lower,upper\n");
            for j in 0..horizon {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    j + 1,
                    fc.mean[j],
                    fc.lower[j],
                    fc.upper[j]
                ));
            }
            let path = out.resolve().join("arima_forecast.csv");
            write(&path, &csv)?;
            println!("{}", serde_json::to_string_pretty(&fit_report(&fit)).unwrap());
            eprintln!("forecast from {} -> {}", fit.last_date(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        ArimaCommand::Walkforward {
            input,
            split,
            refit,
            level,
            out,
        } => {
            let (series, exog, spec) = arima_load(&input)?;
            let split = parse_split(&split)?;
            let report =
                arima::walk_forward(&series, &spec, split, exog.as_ref(), refit.into(), level)?;
            let path = out.resolve().join("arima_walkforward.csv");
            emit_plot_data(
                "forecast",
                &PlotData::Forecast {
                    dates: &report.dates,
                    actual: &report.actual,
                    mean: &report.predicted,
                    lower: &report.lower,
                    upper: &report.upper,
                },
                &path,
            )?;
            println!(
                "{}",
                serde_json::json!({
                    "model": spec.label(),
                    "refit": format!("{:?}", report.refit),
                    "test_points": report.actual.len(),
                    "rmse": report.rmse,
                    "predictions_csv": path.display().to_string(),
                })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn var_cmd(command: VarCommand) -> Result<ExitCode> {
    match command {
        VarCommand::Fit {
            panel,
            lags,
            max_lags,
            out,
        } => {
            let p = load_panel(&panel)?;
            let (used, trace) = match lags {
                Some(l) => (l, Vec::new()),
                None => {
                    let sel = select_lag_order(&p, max_lags)?;
                    (sel.selected, sel.trace)
                }
            };
            let fit = fit_var(&p, used)?;
            let report = serde_json::json!({
                "lag_order": fit.lag_order,
                "variables": fit.variable_names,
                "aic": fit.aic,
                "durbin_watson": fit.dw,
                "params_per_equation": fit.params_per_equation(),
                "companion_radius": fit.companion_radius(),
                "aic_trace": trace,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            write(&out.resolve().join("var_fit.json"), &report.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        VarCommand::Forecast {
            panel,
            lags,
            horizon,
            rolling_split,
            out,
        } => {
            let p = load_panel(&panel)?;
            let out_dir = out.resolve();
            match rolling_split {
                Some(frac) => {
                    let test_start = ((p.n_rows() as f64) * frac).round() as usize;
                    let train = p.slice_rows(0, test_start);
                    let fit = fit_var(&train, lags)?;
                    let preds = forecast_rolling(&fit, &p, test_start)?;
                    write(&out_dir.join("var_rolling.csv"), &preds.to_csv())?;
                    eprintln!("one-step predictions for {} rows", preds.n_rows());
                }
                None => {
                    let fit = fit_var(&p, lags)?;
                    let rows = forecast_iterative(&fit, &p, horizon)?;
                    let mut csv = String::from("step");
                    for n in fit.variable_names.iter() {
                        csv.push_str(&format!(",{n}"));
                    }
                    csv.push('\n');
                    for (i, row) in rows.iter().enumerate() {
                        csv.push_str(&(i + 1).to_string());
                        for v in row {
                            csv.push_str(&format!(",{v}"));
                        }
                        csv.push('\n');
                    }
                    write(&out_dir.join("var_forecast.csv"), &csv)?;
                    eprintln!("iterative forecast of {horizon} steps written");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        VarCommand::Irf {
            panel,
            lags,
            horizon,
            ordering,
            out,
        } => {
            let p = load_panel(&panel)?;
            let fit = fit_var(&p, lags)?;
            let names: Vec<&str> = ordering.iter().map(|s| s.as_str()).collect();
            let ord = if names.is_empty() { None } else { Some(names.as_slice()) };
            let result = irf(&fit, horizon, ord, false)?;
            let path = out.resolve().join("var_irf.csv");
            emit_plot_data("irf", &PlotData::Irf(&result), &path)?;
            eprintln!("impulse responses -> {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        VarCommand::Fevd {
            panel,
            lags,
            horizon,
            ordering,
            out,
        } => {
            let p = load_panel(&panel)?;
            let fit = fit_var(&p, lags)?;
            let names: Vec<&str> = ordering.iter().map(|s| s.as_str()).collect();
            let ord = if names.is_empty() { None } else { Some(names.as_slice()) };
            let result = fevd(&fit, horizon, ord)?;
            let path = out.resolve().join("var_fevd.csv");
            emit_plot_data("fevd", &PlotData::Fevd(&result), &path)?;
            eprintln!("variance decomposition -> {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Shape-tagged weight manifest for reload: every tensor appears with its
/// dimensions and row-major values.
fn mlp_weights_manifest(net: &Mlp) -> serde_json::Value {
    let layers: Vec<serde_json::Value> = net
        .layers
        .iter()
        .map(|l| {
            serde_json::json!({
                "kind": "dense",
                "activation": format!("{:?}", l.activation),
                "weights": {"rows": l.weights.rows(), "cols": l.weights.cols(), "values": l.weights.data()},
                "bias": l.bias,
            })
        })
        .collect();
    serde_json::json!({"model": "mlp", "layers": layers})
}

fn lstm_weights_manifest(net: &yieldcast::neural::LstmNetwork) -> serde_json::Value {
    let gate_names = ["forget", "input", "candidate", "output"];
    let cells: Vec<serde_json::Value> = net
        .cells
        .iter()
        .map(|c| {
            let gates: Vec<serde_json::Value> = (0..4)
                .map(|g| {
                    serde_json::json!({
                        "gate": gate_names[g],
                        "w_x": {"rows": c.w_x[g].rows(), "cols": c.w_x[g].cols(), "values": c.w_x[g].data()},
                        "w_h": {"rows": c.w_h[g].rows(), "cols": c.w_h[g].cols(), "values": c.w_h[g].data()},
                        "bias": c.b[g],
                    })
                })
                .collect();
            serde_json::json!({"kind": "lstm", "units": c.units, "features": c.features, "gates": gates})
        })
        .collect();
    serde_json::json!({
        "model": "lstm",
        "cells": cells,
        "head": {"weights": net.head_w, "bias": net.head_b},
    })
}

fn nn_cmd(command: NnCommand) -> Result<ExitCode> {
    match command {
        NnCommand::Train {
            series,
            model,
            regime,
            covariates,
            lags,
            neurons,
            epochs,
            batch,
            dropout,
            patience,
            seed,
            split,
            missing,
            out,
        } => {
            let out_dir = out.resolve();
            let s = load_fred_csv(&series, missing.into())?;
            let split = parse_split(&split)?;
            match model {
                NnModel::Mlp => {
                    let test_start = split.test_start(s.dates())?;
                    let prep = prepare_scaled_supervised(&s, None, lags, test_start, (-1.0, 1.0))?;
                    let mut net = Mlp::new(prep.train.n_features(), &[neurons], seed);
                    let mut cfg = TrainConfig::new(epochs, batch, seed);
                    cfg.dropout = dropout;
                    cfg.patience = patience;
                    let history = train_mlp(&mut net, &prep.train, &prep.test, &cfg)?;
                    let preds_scaled = net.predict(&prep.test.inputs);
                    let test_rmse = prep.rmse_original_units(&preds_scaled)?;
                    emit_plot_data(
                        "loss_history",
                        &PlotData::LossHistory(&history),
                        &out_dir.join("nn_history.csv"),
                    )?;
                    let preds = prep.invert_predictions(&preds_scaled)?;
                    let mut csv = String::from("date,predicted\n");
                    for (d, v) in prep.test.dates.iter().zip(preds.iter()) {
                        csv.push_str(&format!("{d},{v}\n"));
                    }
                    write(&out_dir.join("nn_predictions.csv"), &csv)?;
                    write(
                        &out_dir.join("nn_weights.json"),
                        &mlp_weights_manifest(&net).to_string(),
                    )?;
                    println!(
                        "{}",
                        serde_json::json!({
                            "model": "mlp",
                            "neurons": neurons,
                            "lags": lags,
                            "epochs_ran": history.stopped_epoch,
                            "test_rmse": test_rmse,
                        })
                    );
                }
                NnModel::Lstm => {
                    let cov_panel = covariates.as_deref().map(load_panel).transpose()?;
                    let mut cfg = TrainConfig::new(epochs, batch, seed);
                    cfg.dropout = dropout;
                    cfg.patience = patience;
                    if matches!(regime, RegimeArg::Multivariate) {
                        cfg.loss = Loss::Mae;
                    }
                    let result =
                        run_lstm_regime(regime.into(), &s, cov_panel.as_ref(), split, neurons, &cfg)?;
                    emit_plot_data(
                        "loss_history",
                        &PlotData::LossHistory(&result.history),
                        &out_dir.join("nn_history.csv"),
                    )?;
                    let mut csv = String::from("date,predicted\n");
                    for (d, v) in result.predictions.dates().iter().zip(result.predictions.values())
                    {
                        csv.push_str(&format!("{d},{v}\n"));
                    }
                    write(&out_dir.join("nn_predictions.csv"), &csv)?;
                    write(
                        &out_dir.join("nn_weights.json"),
                        &lstm_weights_manifest(&result.network).to_string(),
                    )?;
                    println!(
                        "{}",
                        serde_json::json!({
                            "model": "lstm",
                            "regime": format!("{:?}", result.regime),
                            "units": neurons,
                            "lags": lags,
                            "epochs_ran": result.history.stopped_epoch,
                            "train_rmse": result.train_rmse,
                            "test_rmse": result.test_rmse,
                        })
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        NnCommand::MlpExperiment {
            series,
            neurons,
            epochs,
            batch,
            repeats,
            seed,
            split,
            missing,
            out,
        } => {
            let s = load_fred_csv(&series, missing.into())?;
            let split = parse_split(&split)?;
            let rows = run_mlp_experiment(
                &s,
                &neurons,
                split,
                epochs,
                batch,
                repeats,
                derive_seed(seed, "mlp"),
            )?;
            let mut csv = String::from("neurons,count,mean,sd,min,q25,median,q75,max\n");
            println!("neurons,count,mean,sd,min,q25,median,q75,max");
            for r in &rows {
                let st = &r.rmse_stats;
                let line = format!(
                    "{},{},{},{},{},{},{},{},{}",
                    r.neurons, r.repeats, st.mean, st.sd, st.min, st.q25, st.median, st.q75, st.max
                );
                println!("{line}");
                csv.push_str(&line);
                csv.push('\n');
            }
            write(&out.resolve().join("mlp_experiment.csv"), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
