//! ARIMA(p, d, q) estimation by exact Gaussian maximum likelihood, with
//! optional exogenous regressors (regression with ARIMA errors), interval
//! forecasts, and walk-forward evaluation.
//!
//! The likelihood is evaluated by a state-space innovations recursion on the
//! differenced, regression-adjusted series; the optimizer works on an
//! unconstrained reparameterization so every visited point is stationary and
//! invertible. Conditional (Hannan-Rissanen) estimates only seed the
//! optimizer.

mod filter;
mod transform;

pub use filter::psi_weights;

use chrono::NaiveDate;
use serde::Serialize;

use crate::data::{difference, Panel, TimeSeries};
use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Mat};
use crate::optimize::{minimize, numerical_hessian};
use filter::{concentrated_loglik, kalman_filter, ArmaStateSpace};
use transform::{coef_to_unconstrained, companion_spectral_radius, unconstrained_to_coef};

/// Model order. `include_mean` adds a long-run mean (drift after
/// differencing).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub include_mean: bool,
}

impl ArimaSpec {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaSpec {
            p,
            d,
            q,
            include_mean: true,
        }
    }

    pub fn without_mean(mut self) -> Self {
        self.include_mean = false;
        self
    }

    pub fn label(&self) -> String {
        format!("ARIMA({},{},{})", self.p, self.d, self.q)
    }
}

/// Fitted model. Coefficients follow the mean form: the reported `mean` is
/// the long-run level of the (differenced) series, not the regression
/// intercept.
#[derive(Debug, Clone)]
pub struct ArimaFit {
    pub spec: ArimaSpec,
    pub mean: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub exog_names: Vec<String>,
    pub exog_beta: Vec<f64>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n_params: usize,
    pub n_obs: usize,
    /// Standard errors aligned with `param_names`.
    pub std_errors: Vec<f64>,
    pub param_names: Vec<String>,
    /// One-step-ahead innovations on the differenced scale, trailing dates.
    pub residuals: TimeSeries,
    // Forecasting state.
    terminal_state: Vec<f64>,
    /// Last d levels of the undifferenced series, oldest first.
    tail_levels: Vec<f64>,
    /// Last d exogenous level rows, oldest first.
    tail_exog: Vec<Vec<f64>>,
    last_date: NaiveDate,
}

/// Interval forecast. Bands widen (weakly) with horizon.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastResult {
    pub horizon: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub confidence: f64,
}

/// Walk-forward refit policy. `EveryStep` re-estimates all parameters at each
/// test date; `FixedParams` keeps the training-set parameters and only
/// re-filters the state forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitMode {
    EveryStep,
    FixedParams,
}

/// Train/test boundary: a fraction of the sample or the first test date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    Fraction(f64),
    Date(NaiveDate),
}

impl Split {
    /// Index of the first test observation.
    pub fn test_start(&self, dates: &[NaiveDate]) -> Result<usize> {
        let idx = match self {
            Split::Fraction(f) => {
                if !(*f > 0.0 && *f < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "split fraction {f} outside (0, 1)"
                    )));
                }
                ((dates.len() as f64) * f).round() as usize
            }
            Split::Date(d) => dates.partition_point(|x| x < d),
        };
        if idx == 0 || idx >= dates.len() {
            return Err(Error::InvalidParameter(
                "split leaves an empty train or test segment".to_string(),
            ));
        }
        Ok(idx)
    }
}

/// One-step walk-forward record over the test segment.
#[derive(Debug, Clone, Serialize)]
pub struct WalkForwardReport {
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rmse: f64,
    pub refit: RefitMode,
}

struct PreparedData {
    /// Differenced target.
    w: Vec<f64>,
    /// Differenced exogenous matrix rows (may be empty).
    x: Vec<Vec<f64>>,
    dates: Vec<NaiveDate>,
}

fn prepare(series: &TimeSeries, spec: &ArimaSpec, exog: Option<&Panel>) -> Result<PreparedData> {
    if let Some(x) = exog {
        if x.calendar() != series.dates() {
            return Err(Error::DimensionMismatch(
                "exogenous panel must share the series calendar".to_string(),
            ));
        }
    }
    let wd = difference(series, spec.d)?;
    let x = match exog {
        Some(panel) => {
            let mut cols: Vec<Vec<f64>> = Vec::with_capacity(panel.n_cols());
            for c in 0..panel.n_cols() {
                let s = TimeSeries::new("x", series.dates().to_vec(), panel.column_at(c).to_vec())?;
                cols.push(difference(&s, spec.d)?.values().to_vec());
            }
            (0..wd.len())
                .map(|r| cols.iter().map(|c| c[r]).collect())
                .collect()
        }
        None => Vec::new(),
    };
    Ok(PreparedData {
        w: wd.values().to_vec(),
        x,
        dates: wd.dates().to_vec(),
    })
}

/// Parameter vector layout in natural space: [mean?, beta.., ar.., ma..].
struct ParamLayout {
    include_mean: bool,
    n_exog: usize,
    p: usize,
    q: usize,
}

impl ParamLayout {
    fn len(&self) -> usize {
        self.include_mean as usize + self.n_exog + self.p + self.q
    }

    fn split<'a>(&self, v: &'a [f64]) -> (f64, &'a [f64], &'a [f64], &'a [f64]) {
        let mut at = 0;
        let mean = if self.include_mean {
            at += 1;
            v[0]
        } else {
            0.0
        };
        let beta = &v[at..at + self.n_exog];
        at += self.n_exog;
        let ar = &v[at..at + self.p];
        at += self.p;
        let ma = &v[at..at + self.q];
        (mean, beta, ar, ma)
    }
}

fn adjusted_series(w: &[f64], x: &[Vec<f64>], mean: f64, beta: &[f64]) -> Vec<f64> {
    w.iter()
        .enumerate()
        .map(|(t, &v)| {
            let xb: f64 = if beta.is_empty() {
                0.0
            } else {
                x[t].iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
            };
            v - mean - xb
        })
        .collect()
}

/// Hannan-Rissanen style starting values: long-AR residuals, then one OLS
/// pass for provisional AR/MA coefficients.
fn initial_arma(w: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    if p + q == 0 || n < 20 {
        return (vec![0.0; p], vec![0.0; q]);
    }
    let long = (2 * (p + q) + 8).min(n / 5).max(1);
    // Yule-Walker AR(long) via Levinson on sample autocorrelations.
    let mean = w.iter().sum::<f64>() / n as f64;
    let c0 = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return (vec![0.0; p], vec![0.0; q]);
    }
    let acf: Vec<f64> = (0..=long)
        .map(|k| {
            (0..n - k)
                .map(|t| (w[t] - mean) * (w[t + k] - mean))
                .sum::<f64>()
                / (n as f64 * c0)
        })
        .collect();
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..=long {
        let phikk = if k == 1 {
            acf[1]
        } else {
            let num = acf[k]
                - phi.iter().enumerate().map(|(j, v)| v * acf[k - 1 - j]).sum::<f64>();
            let den =
                1.0 - phi.iter().enumerate().map(|(j, v)| v * acf[j + 1]).sum::<f64>();
            if den.abs() < 1e-12 {
                return (vec![0.0; p], vec![0.0; q]);
            }
            num / den
        };
        let mut next = Vec::with_capacity(k);
        for j in 0..k - 1 {
            next.push(phi[j] - phikk * phi[k - 2 - j]);
        }
        next.push(phikk);
        phi = next;
    }
    // Long-AR residuals.
    let mut eps = vec![0.0; n];
    for t in long..n {
        let mut pred = 0.0;
        for (j, v) in phi.iter().enumerate() {
            pred += v * (w[t - 1 - j] - mean);
        }
        eps[t] = (w[t] - mean) - pred;
    }
    // OLS of w on its own lags and lagged residuals.
    let start = long + q.max(1);
    if start + 10 >= n {
        return (vec![0.0; p], vec![0.0; q]);
    }
    let rows = n - start;
    let mut xm = Mat::zeros(rows, p + q);
    let mut y = Vec::with_capacity(rows);
    for (row, t) in (start..n).enumerate() {
        y.push(w[t] - mean);
        for i in 0..p {
            xm.set(row, i, w[t - 1 - i] - mean);
        }
        for j in 0..q {
            xm.set(row, p + j, eps[t - 1 - j]);
        }
    }
    match least_squares(&xm, &y) {
        Ok(ols) => {
            let ar = ols.coefficients[..p].to_vec();
            let ma = ols.coefficients[p..].to_vec();
            (ar, ma)
        }
        Err(_) => (vec![0.0; p], vec![0.0; q]),
    }
}

/// Shrinks coefficients toward zero until the unconstrained inverse accepts
/// them.
fn to_unconstrained_shrinking(coef: &[f64]) -> Vec<f64> {
    let mut c = coef.to_vec();
    for _ in 0..12 {
        if let Some(z) = coef_to_unconstrained(&c) {
            if z.iter().all(|v| v.is_finite()) {
                return z;
            }
        }
        for v in c.iter_mut() {
            *v *= 0.8;
        }
    }
    vec![0.0; coef.len()]
}

/// Exact maximum-likelihood fit of an ARIMA(p, d, q) model, optionally with
/// exogenous regressors sharing the series calendar.
pub fn fit(series: &TimeSeries, spec: &ArimaSpec, exog: Option<&Panel>) -> Result<ArimaFit> {
    let n_exog = exog.map_or(0, |x| x.n_cols());
    if spec.p + spec.q == 0 && !spec.include_mean && n_exog == 0 {
        return Err(Error::InvalidParameter(
            "model has no parameters: need p + q >= 1, a mean, or exogenous terms".to_string(),
        ));
    }
    let data = prepare(series, spec, exog)?;
    let n = data.w.len();
    let n_params_linear = spec.include_mean as usize + n_exog;
    let n_params_total = n_params_linear + spec.p + spec.q + 1; // +1 for sigma2
    if n < n_params_total + 10 {
        return Err(Error::SeriesTooShort {
            name: series.name().to_string(),
            len: n,
            need: n_params_total + 10,
        });
    }
    let layout = ParamLayout {
        include_mean: spec.include_mean,
        n_exog,
        p: spec.p,
        q: spec.q,
    };

    // Linear-only models have a closed form.
    let (natural, sigma2, log_likelihood, innovations, terminal_state) = if spec.p + spec.q == 0 {
        fit_linear_only(&data, &layout)?
    } else {
        fit_arma(&data, &layout)?
    };

    let (mean, beta, ar, ma) = layout.split(&natural);
    let ar = ar.to_vec();
    let ma = ma.to_vec();

    // Stationarity / invertibility margins at the optimum.
    let margin = 1.0 / (1.0 + 1e-6);
    if companion_spectral_radius(&ar) > margin {
        return Err(Error::InvariantViolation("AR stationarity".to_string()));
    }
    if companion_spectral_radius(&ma) > margin {
        return Err(Error::InvariantViolation("MA invertibility".to_string()));
    }

    let aic = 2.0 * n_params_total as f64 - 2.0 * log_likelihood;

    // Standard errors: observed information of the concentrated likelihood in
    // natural space, plus the analytic sigma2 variance.
    let mut param_names: Vec<String> = Vec::new();
    if spec.include_mean {
        param_names.push("mean".to_string());
    }
    let exog_names: Vec<String> = exog
        .map(|x| x.names().to_vec())
        .unwrap_or_default();
    for name in &exog_names {
        param_names.push(format!("beta.{name}"));
    }
    for i in 1..=spec.p {
        param_names.push(format!("ar{i}"));
    }
    for j in 1..=spec.q {
        param_names.push(format!("ma{j}"));
    }
    param_names.push("sigma2".to_string());

    let mut std_errors = vec![f64::NAN; layout.len()];
    {
        let mut neg_ll = |v: &[f64]| -> f64 {
            let (mean, beta, ar, ma) = layout.split(v);
            let adj = adjusted_series(&data.w, &data.x, mean, beta);
            let ss = ArmaStateSpace::new(ar, ma);
            match concentrated_loglik(&ss, &adj) {
                Some((ll, _)) => -ll,
                None => f64::INFINITY,
            }
        };
        if layout.len() > 0 {
            let hess = numerical_hessian(&mut neg_ll, &natural, 1e-4);
            if let Ok(cov) = crate::linalg::inverse(&hess) {
                for i in 0..layout.len() {
                    let v = cov.get(i, i);
                    std_errors[i] = if v > 0.0 { v.sqrt() } else { f64::NAN };
                }
            }
        }
    }
    std_errors.push((2.0 * sigma2 * sigma2 / n as f64).sqrt());

    let residuals = TimeSeries::new(
        format!("{}_residuals", series.name()),
        data.dates.clone(),
        innovations,
    )?;

    let d = spec.d;
    let tail_levels = series.values()[series.len() - d..].to_vec();
    let tail_exog = exog
        .map(|x| {
            (series.len() - d..series.len())
                .map(|r| x.row(r))
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();

    Ok(ArimaFit {
        spec: spec.clone(),
        mean,
        ar,
        ma,
        exog_names,
        exog_beta: beta.to_vec(),
        sigma2,
        log_likelihood,
        aic,
        n_params: n_params_total,
        n_obs: n,
        std_errors,
        param_names,
        residuals,
        terminal_state,
        tail_levels,
        tail_exog,
        last_date: *series.dates().last().unwrap(),
    })
}

type FitInternals = (Vec<f64>, f64, f64, Vec<f64>, Vec<f64>);

fn fit_linear_only(data: &PreparedData, layout: &ParamLayout) -> Result<FitInternals> {
    let n = data.w.len();
    let k = layout.len();
    let mut xm = Mat::zeros(n, k);
    for t in 0..n {
        let mut at = 0;
        if layout.include_mean {
            xm.set(t, 0, 1.0);
            at = 1;
        }
        for j in 0..layout.n_exog {
            xm.set(t, at + j, data.x[t][j]);
        }
    }
    let ols = least_squares(&xm, &data.w)?;
    let sigma2 = (ols.ssr / n as f64).max(f64::MIN_POSITIVE);
    let ll = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0);
    Ok((
        ols.coefficients.clone(),
        sigma2,
        ll,
        ols.residuals.clone(),
        vec![0.0],
    ))
}

fn fit_arma(data: &PreparedData, layout: &ParamLayout) -> Result<FitInternals> {
    let n = data.w.len();
    // Linear starting values.
    let mut start_linear: Vec<f64> = Vec::new();
    let mut w0 = data.w.clone();
    if layout.include_mean || layout.n_exog > 0 {
        let k = layout.include_mean as usize + layout.n_exog;
        let mut xm = Mat::zeros(n, k);
        for t in 0..n {
            let mut at = 0;
            if layout.include_mean {
                xm.set(t, 0, 1.0);
                at = 1;
            }
            for j in 0..layout.n_exog {
                xm.set(t, at + j, data.x[t][j]);
            }
        }
        let ols = least_squares(&xm, &data.w)?;
        start_linear = ols.coefficients.clone();
        w0 = ols.residuals.clone();
    }
    let (ar0, ma0) = initial_arma(&w0, layout.p, layout.q);
    let z_ar0 = to_unconstrained_shrinking(&ar0);
    let z_ma0 = to_unconstrained_shrinking(&ma0);

    // Optimizer space: [linear.., z_ar.., z_ma..].
    let mut x0 = start_linear.clone();
    x0.extend_from_slice(&z_ar0);
    x0.extend_from_slice(&z_ma0);

    let n_linear = start_linear.len();
    let p = layout.p;
    let q = layout.q;
    let mut objective = |v: &[f64]| -> f64 {
        let mean = if layout.include_mean { v[0] } else { 0.0 };
        let beta = &v[layout.include_mean as usize..n_linear];
        let ar = unconstrained_to_coef(&v[n_linear..n_linear + p]);
        let ma = unconstrained_to_coef(&v[n_linear + p..n_linear + p + q]);
        let adj = adjusted_series(&data.w, &data.x, mean, beta);
        let ss = ArmaStateSpace::new(&ar, &ma);
        match concentrated_loglik(&ss, &adj) {
            Some((ll, _)) => -ll,
            None => f64::INFINITY,
        }
    };
    let result = minimize(&mut objective, &x0, 2000)?;
    if !result.converged {
        return Err(Error::NoConvergence {
            iterations: result.iterations,
            objective: result.value,
        });
    }

    // Natural-space parameters and final filter pass.
    let mean = if layout.include_mean { result.x[0] } else { 0.0 };
    let beta = result.x[layout.include_mean as usize..n_linear].to_vec();
    let ar = unconstrained_to_coef(&result.x[n_linear..n_linear + p]);
    let ma = unconstrained_to_coef(&result.x[n_linear + p..n_linear + p + q]);
    let adj = adjusted_series(&data.w, &data.x, mean, &beta);
    let ss = ArmaStateSpace::new(&ar, &ma);
    let out = kalman_filter(&ss, &adj).ok_or(Error::NoConvergence {
        iterations: result.iterations,
        objective: result.value,
    })?;
    let sigma2 = out.sum_v2_over_f / n as f64;
    let ll = -result.value;

    let mut natural = Vec::with_capacity(n_linear + p + q);
    if layout.include_mean {
        natural.push(mean);
    }
    natural.extend_from_slice(&beta);
    natural.extend_from_slice(&ar);
    natural.extend_from_slice(&ma);
    Ok((natural, sigma2, ll, out.innovations, out.terminal_state))
}

impl ArimaFit {
    /// Date of the last observation the model saw; forecast steps follow it.
    pub fn last_date(&self) -> NaiveDate {
        self.last_date
    }

    /// Applies the fitted transition to roll the ARMA state forward without
    /// shocks; used for multi-step mean paths.
    fn arma_mean_path(&self, h: usize) -> Vec<f64> {
        let ss = ArmaStateSpace::new(&self.ar, &self.ma);
        let r = ss.dim();
        let mut s = self.terminal_state.clone();
        s.resize(r, 0.0);
        let mut path = Vec::with_capacity(h);
        for _ in 0..h {
            path.push(s[0]);
            // s <- T s for the companion shell.
            let mut next = vec![0.0; r];
            for i in 0..r {
                let carry = if i + 1 < r { s[i + 1] } else { 0.0 };
                let phi = if i < self.ar.len() { self.ar[i] } else { 0.0 };
                next[i] = phi * s[0] + carry;
            }
            s = next;
        }
        path
    }
}

/// Exact Gaussian log-likelihood of a zero-mean ARMA at fixed parameters,
/// evaluated through the state-space filter. Exposed so independent density
/// computations can cross-check the innovations recursion.
pub fn exact_ar_loglik(y: &[f64], ar: &[f64], sigma2: f64) -> f64 {
    let ss = ArmaStateSpace::new(ar, &[]);
    let out = kalman_filter(&ss, y).expect("filter on fixed parameters");
    let n = y.len() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() - 0.5 * out.sum_ln_f
        - out.sum_v2_over_f / (2.0 * sigma2)
}

/// Mean and interval forecast `h` steps ahead. Models fitted with exogenous
/// regressors require `exog_future` with exactly `h` rows in fit order.
pub fn forecast(
    fit: &ArimaFit,
    h: usize,
    exog_future: Option<&Panel>,
    confidence: f64,
) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".to_string()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let n_exog = fit.exog_beta.len();
    let future_rows: Vec<Vec<f64>> = match (n_exog, exog_future) {
        (0, _) => vec![Vec::new(); h],
        (_, None) => return Err(Error::MissingExogFuture),
        (_, Some(panel)) => {
            if panel.n_rows() < h {
                return Err(Error::MissingExogFuture);
            }
            let mut names: Vec<&str> = Vec::new();
            for n in &fit.exog_names {
                names.push(n);
            }
            let panel = panel.select(&names)?;
            (0..h).map(|r| panel.row(r)).collect()
        }
    };

    // Differenced-scale exogenous terms across the sample boundary.
    let d = fit.spec.d;
    let mut xb = Vec::with_capacity(h);
    if n_exog > 0 {
        let mut level_rows: Vec<Vec<f64>> = fit.tail_exog.clone();
        level_rows.extend(future_rows.iter().cloned());
        // d-fold differencing of the stacked rows; forecasts sit at the tail.
        let mut diffed = level_rows;
        for _ in 0..d {
            diffed = diffed
                .windows(2)
                .map(|w| w[1].iter().zip(w[0].iter()).map(|(a, b)| a - b).collect())
                .collect();
        }
        for row in diffed.iter().take(h) {
            xb.push(
                row.iter()
                    .zip(fit.exog_beta.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>(),
            );
        }
    } else {
        xb = vec![0.0; h];
    }

    // Mean path on the differenced scale.
    let arma_path = fit.arma_mean_path(h);
    let diff_mean: Vec<f64> = (0..h).map(|j| fit.mean + xb[j] + arma_path[j]).collect();

    // Undo differencing: d-fold integration anchored on the stored tail
    // levels, mirroring data::invert_difference.
    let mut mean = diff_mean.clone();
    if d > 0 {
        let mut heads: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut cur = fit.tail_levels.clone();
        heads.push(cur.clone());
        for _ in 1..d {
            cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
            heads.push(cur.clone());
        }
        let mut values = diff_mean.clone();
        for level in (0..d).rev() {
            let head = heads[level][d - level - 1];
            let mut acc = head;
            let mut rebuilt = Vec::with_capacity(values.len());
            for v in &values {
                acc += v;
                rebuilt.push(acc);
            }
            values = rebuilt;
        }
        mean = values;
    }

    // Interval widths from d-fold integrated psi weights.
    let mut psi = psi_weights(&fit.ar, &fit.ma, h);
    for _ in 0..d {
        let mut acc = 0.0;
        psi = psi
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
    }
    let z = normal_quantile(0.5 + confidence / 2.0);
    let mut var_acc = 0.0;
    let mut lower = Vec::with_capacity(h);
    let mut upper = Vec::with_capacity(h);
    for j in 0..h {
        var_acc += psi[j] * psi[j];
        let width = z * (fit.sigma2 * var_acc).sqrt();
        lower.push(mean[j] - width);
        upper.push(mean[j] + width);
    }
    Ok(ForecastResult {
        horizon: h,
        mean,
        lower,
        upper,
        confidence,
    })
}

/// Walk-forward one-step evaluation over the test segment defined by `split`.
///
/// At each test date the model sees every actual observation before it and
/// predicts one step. `EveryStep` refits the parameters each time;
/// `FixedParams` estimates once on the training segment and re-filters only
/// the state.
pub fn walk_forward(
    series: &TimeSeries,
    spec: &ArimaSpec,
    split: Split,
    exog: Option<&Panel>,
    refit: RefitMode,
    confidence: f64,
) -> Result<WalkForwardReport> {
    let test_start = split.test_start(series.dates())?;
    let n = series.len();
    let dates: Vec<NaiveDate> = series.dates()[test_start..].to_vec();
    let actual: Vec<f64> = series.values()[test_start..].to_vec();
    let mut predicted = Vec::with_capacity(n - test_start);
    let mut lower = Vec::with_capacity(n - test_start);
    let mut upper = Vec::with_capacity(n - test_start);

    match refit {
        RefitMode::EveryStep => {
            for t in test_start..n {
                let step = t - test_start;
                let sub = TimeSeries::new(
                    series.name().to_string(),
                    series.dates()[..t].to_vec(),
                    series.values()[..t].to_vec(),
                )?;
                let sub_exog = exog.map(|x| x.slice_rows(0, t));
                let fitted = fit(&sub, spec, sub_exog.as_ref()).map_err(|e| {
                    Error::WalkForwardStep {
                        step,
                        source: Box::new(e),
                    }
                })?;
                let future = exog.map(|x| x.slice_rows(t, t + 1));
                let fc = forecast(&fitted, 1, future.as_ref(), confidence).map_err(|e| {
                    Error::WalkForwardStep {
                        step,
                        source: Box::new(e),
                    }
                })?;
                predicted.push(fc.mean[0]);
                lower.push(fc.lower[0]);
                upper.push(fc.upper[0]);
            }
        }
        RefitMode::FixedParams => {
            let train = TimeSeries::new(
                series.name().to_string(),
                series.dates()[..test_start].to_vec(),
                series.values()[..test_start].to_vec(),
            )?;
            let train_exog = exog.map(|x| x.slice_rows(0, test_start));
            let fitted = fit(&train, spec, train_exog.as_ref())?;

            // One filter pass over the full sample with fixed parameters
            // yields every one-step prediction.
            let data = prepare(series, spec, exog)?;
            let adj = adjusted_series(&data.w, &data.x, fitted.mean, &fitted.exog_beta);
            let ss = ArmaStateSpace::new(&fitted.ar, &fitted.ma);
            let out = kalman_filter(&ss, &adj).ok_or(Error::NoConvergence {
                iterations: 0,
                objective: f64::NAN,
            })?;
            let d = spec.d;
            let z = normal_quantile(0.5 + confidence / 2.0);
            for t in test_start..n {
                // Index into the differenced arrays.
                let ti = t - d;
                let xb: f64 = if fitted.exog_beta.is_empty() {
                    0.0
                } else {
                    data.x[ti]
                        .iter()
                        .zip(fitted.exog_beta.iter())
                        .map(|(a, b)| a * b)
                        .sum()
                };
                let w_pred = fitted.mean + xb + out.predictions[ti];
                // Rebuild the level from actual lagged levels.
                let mut level = w_pred;
                // y_t = dy_t + sum_{i=1..d} C(d,i) (-1)^{i+1} y_{t-i}
                let mut binom = 1.0f64;
                for i in 1..=d {
                    binom = binom * (d as f64 - i as f64 + 1.0) / i as f64;
                    let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                    level += sign * binom * series.values()[t - i];
                }
                let width = z * (fitted.sigma2 * out.gains[ti]).sqrt();
                predicted.push(level);
                lower.push(level - width);
                upper.push(level + width);
            }
        }
    }

    let rmse = crate::harness::rmse(&actual, &predicted)?;
    Ok(WalkForwardReport {
        dates,
        actual,
        predicted,
        lower,
        upper,
        rmse,
        refit,
    })
}
