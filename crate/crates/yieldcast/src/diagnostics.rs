//! Statistical tests and correlograms: ADF stationarity, D'Agostino K²
//! normality, ACF/PACF, Durbin-Watson, Granger causality, and descriptive
//! statistics.

use serde::Serialize;

use crate::data::TimeSeries;
use crate::dist::{chi2_sf, f_sf, normal_cdf};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Mat};

/// Augmented Dickey-Fuller test outcome.
#[derive(Debug, Clone, Serialize)]
pub struct AdfResult {
    /// t-ratio on the lagged level in the ADF regression.
    pub statistic: f64,
    /// MacKinnon response-surface p-value.
    pub p_value: f64,
    /// Augmentation lags chosen by AIC.
    pub lags_used: usize,
    /// Observations entering the final regression.
    pub n_obs: usize,
}

/// Deterministic terms in the ADF regression. Only the constant-only form is
/// used by the models here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdfRegression {
    Constant,
}

/// ADF unit-root test with AIC lag selection up to `max_lags`.
///
/// The regression is dy_t = c + rho*y_{t-1} + sum gamma_i dy_{t-i} + e_t;
/// the null of a unit root is rho = 0, tested with the t-ratio on rho and
/// MacKinnon's response-surface p-values for the constant-only case. Lag
/// choice compares AIC across a common sample trimmed at `max_lags`, then the
/// chosen lag is refit on its maximal sample.
pub fn adf_test(
    series: &TimeSeries,
    max_lags: usize,
    _regression: AdfRegression,
) -> Result<AdfResult> {
    let y = series.values();
    let n = y.len();
    if n < max_lags + 10 {
        return Err(Error::SeriesTooShort {
            name: series.name().to_string(),
            len: n,
            need: max_lags + 10,
        });
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();

    // AIC comparison on the common sample.
    let mut best_lag = 0usize;
    let mut best_aic = f64::INFINITY;
    for k in 0..=max_lags {
        let fit = adf_regression(y, &dy, k, max_lags)?;
        let n_eff = fit.n as f64;
        let aic = n_eff * (fit.ssr / n_eff).ln() + 2.0 * (k as f64 + 2.0);
        if aic < best_aic {
            best_aic = aic;
            best_lag = k;
        }
    }
    // Refit at the chosen lag on its own maximal sample.
    let fit = adf_regression(y, &dy, best_lag, best_lag)?;
    let statistic = fit.coefficients[1] / fit.std_errors[1];
    Ok(AdfResult {
        statistic,
        p_value: mackinnon_p(statistic),
        lags_used: best_lag,
        n_obs: fit.n,
    })
}

/// Builds and solves the ADF regression with `k` augmentation lags, losing
/// `trim` presample differences (trim >= k keeps samples comparable).
fn adf_regression(y: &[f64], dy: &[f64], k: usize, trim: usize) -> Result<crate::linalg::Ols> {
    // dy[i] = y[i+1] - y[i]; regress dy[t] on [1, y[t], dy[t-1..t-k]]
    let start = trim; // first usable index into dy
    let n_eff = dy.len() - start;
    let mut x = Mat::zeros(n_eff, 2 + k);
    let mut target = Vec::with_capacity(n_eff);
    for (row, t) in (start..dy.len()).enumerate() {
        target.push(dy[t]);
        x.set(row, 0, 1.0);
        x.set(row, 1, y[t]);
        for lag in 1..=k {
            x.set(row, 1 + lag, dy[t - lag]);
        }
    }
    least_squares(&x, &target)
}

/// MacKinnon (1994/2010) response-surface p-value for the constant-only ADF
/// statistic, single series.
fn mackinnon_p(stat: f64) -> f64 {
    const TAU_MAX: f64 = 2.74;
    const TAU_MIN: f64 = -18.83;
    const TAU_STAR: f64 = -1.61;
    const SMALL: [f64; 3] = [2.1659, 1.4412, 0.038269];
    const LARGE: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];
    if stat > TAU_MAX {
        return 1.0;
    }
    if stat < TAU_MIN {
        return 0.0;
    }
    let z = if stat <= TAU_STAR {
        SMALL[0] + SMALL[1] * stat + SMALL[2] * stat * stat
    } else {
        LARGE[0] + stat * (LARGE[1] + stat * (LARGE[2] + stat * LARGE[3]))
    };
    normal_cdf(z)
}

/// D'Agostino K² normality test outcome.
#[derive(Debug, Clone, Serialize)]
pub struct NormalityResult {
    pub k2_statistic: f64,
    pub p_value: f64,
    pub skewness: f64,
    /// Excess kurtosis (normal = 0).
    pub kurtosis: f64,
}

/// D'Agostino-Pearson K² test: transformed sample skewness and kurtosis,
/// summed as z² + z² against chi-square(2).
pub fn dagostino_k2(series: &TimeSeries) -> Result<NormalityResult> {
    let x = series.values();
    let n = x.len();
    if n < 20 {
        return Err(Error::SeriesTooShort {
            name: series.name().to_string(),
            len: n,
            need: 20,
        });
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(Error::ZeroVariance(series.name().to_string()));
    }
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let g1 = m3 / m2.powf(1.5);
    let b2 = m4 / (m2 * m2);

    // Skewness transform (D'Agostino 1970).
    let y = g1 * (((nf + 1.0) * (nf + 3.0)) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let y = if y == 0.0 { 1e-12 } else { y };
    let z1 = delta * ((y / alpha) + ((y / alpha).powi(2) + 1.0).sqrt()).ln();

    // Kurtosis transform (Anscombe-Glynn 1983).
    let e = 3.0 * (nf - 1.0) / (nf + 1.0);
    let var_b2 = 24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0));
    let xs = (b2 - e) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * ((6.0 * (nf + 3.0) * (nf + 5.0)) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + xs * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    let z2 = (term1 - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z1 * z1 + z2 * z2;
    Ok(NormalityResult {
        k2_statistic: k2,
        p_value: chi2_sf(k2, 2.0),
        skewness: g1,
        kurtosis: b2 - 3.0,
    })
}

/// Sample autocorrelations, partial autocorrelations, and the white-noise
/// confidence band.
#[derive(Debug, Clone, Serialize)]
pub struct Correlogram {
    /// acf[k] for k = 0..=n_lags; acf[0] is 1 by construction.
    pub acf: Vec<f64>,
    /// pacf[k] for k = 1..=n_lags (index 0 corresponds to lag 1).
    pub pacf: Vec<f64>,
    /// +/- band, 1.96/sqrt(n).
    pub conf_band: f64,
}

/// Correlogram out to `n_lags`; PACF by Durbin-Levinson on the ACF.
pub fn correlogram(series: &TimeSeries, n_lags: usize) -> Result<Correlogram> {
    let x = series.values();
    let n = x.len();
    if n_lags >= n / 2 {
        return Err(Error::InvalidParameter(format!(
            "n_lags {n_lags} too large for series of length {n}"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return Err(Error::ZeroVariance(series.name().to_string()));
    }
    let mut acf = Vec::with_capacity(n_lags + 1);
    for k in 0..=n_lags {
        let ck = (0..n - k)
            .map(|t| (x[t] - mean) * (x[t + k] - mean))
            .sum::<f64>()
            / n as f64;
        acf.push(ck / c0);
    }
    // Durbin-Levinson recursion.
    let mut pacf = Vec::with_capacity(n_lags);
    let mut phi_prev: Vec<f64> = Vec::new();
    for k in 1..=n_lags {
        let phikk = if k == 1 {
            acf[1]
        } else {
            let num = acf[k]
                - phi_prev
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * acf[k - 1 - j])
                    .sum::<f64>();
            let den = 1.0
                - phi_prev
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * acf[j + 1])
                    .sum::<f64>();
            num / den
        };
        let mut phi = Vec::with_capacity(k);
        for j in 0..k - 1 {
            phi.push(phi_prev[j] - phikk * phi_prev[k - 2 - j]);
        }
        phi.push(phikk);
        pacf.push(phikk);
        phi_prev = phi;
    }
    Ok(Correlogram {
        acf,
        pacf,
        conf_band: 1.96 / (n as f64).sqrt(),
    })
}

/// Durbin-Watson statistic: sum of squared residual changes over sum of
/// squared residuals. Near 2 for uncorrelated residuals, in [0, 4].
pub fn durbin_watson(residuals: &TimeSeries) -> Result<f64> {
    let e = residuals.values();
    if e.len() < 2 {
        return Err(Error::SeriesTooShort {
            name: residuals.name().to_string(),
            len: e.len(),
            need: 2,
        });
    }
    let denom: f64 = e.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return Err(Error::ZeroVariance(residuals.name().to_string()));
    }
    let num: f64 = e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / denom)
}

/// Granger-causality F-test outcome.
#[derive(Debug, Clone, Serialize)]
pub struct GrangerResult {
    pub cause: String,
    pub effect: String,
    pub max_lag: usize,
    pub f_statistic: f64,
    pub p_value: f64,
}

/// Tests whether lags of `cause` jointly improve the prediction of `effect`
/// beyond the effect's own lags, at exactly `max_lag` lags.
///
/// Both series must already be stationary (the caller's responsibility) and
/// share a calendar. The statistic is the restricted-vs-unrestricted OLS
/// F-test of joint nullity of the cause's lag coefficients.
pub fn granger_causality(
    effect: &TimeSeries,
    cause: &TimeSeries,
    max_lag: usize,
) -> Result<GrangerResult> {
    if effect.dates() != cause.dates() {
        return Err(Error::DimensionMismatch(
            "granger_causality requires aligned calendars".to_string(),
        ));
    }
    let y = effect.values();
    let x = cause.values();
    let n = y.len();
    if max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be >= 1".to_string()));
    }
    if n < 2 * max_lag + 10 {
        return Err(Error::SeriesTooShort {
            name: effect.name().to_string(),
            len: n,
            need: 2 * max_lag + 10,
        });
    }
    let rows = n - max_lag;

    // Restricted: own lags only.
    let mut xr = Mat::zeros(rows, 1 + max_lag);
    // Unrestricted: own lags plus cause lags.
    let mut xu = Mat::zeros(rows, 1 + 2 * max_lag);
    let mut target = Vec::with_capacity(rows);
    for (row, t) in (max_lag..n).enumerate() {
        target.push(y[t]);
        xr.set(row, 0, 1.0);
        xu.set(row, 0, 1.0);
        for lag in 1..=max_lag {
            xr.set(row, lag, y[t - lag]);
            xu.set(row, lag, y[t - lag]);
            xu.set(row, max_lag + lag, x[t - lag]);
        }
    }
    let restricted = least_squares(&xr, &target)?;
    let unrestricted = least_squares(&xu, &target)?;
    let df_num = max_lag as f64;
    let df_den = (rows - (1 + 2 * max_lag)) as f64;
    if df_den <= 0.0 {
        return Err(Error::SeriesTooShort {
            name: effect.name().to_string(),
            len: n,
            need: 3 * max_lag + 2,
        });
    }
    let f = ((restricted.ssr - unrestricted.ssr) / df_num) / (unrestricted.ssr / df_den);
    let f = f.max(0.0);
    Ok(GrangerResult {
        cause: cause.name().to_string(),
        effect: effect.name().to_string(),
        max_lag,
        f_statistic: f,
        p_value: f_sf(f, df_num, df_den),
    })
}

/// p-values of the Granger test at every lag 1..=max_lag; the harness reports
/// this trace alongside the headline lag-`max_lag` test.
pub fn granger_trace(
    effect: &TimeSeries,
    cause: &TimeSeries,
    max_lag: usize,
) -> Result<Vec<(usize, f64)>> {
    (1..=max_lag)
        .map(|l| granger_causality(effect, cause, l).map(|r| (l, r.p_value)))
        .collect()
}

/// Seven-number summary. Quantiles use linear interpolation between order
/// statistics; the standard deviation is the sample (n-1) form.
#[derive(Debug, Clone, Serialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

pub fn descriptive_stats(series: &TimeSeries) -> Result<DescriptiveStats> {
    let x = series.values();
    if x.is_empty() {
        return Err(Error::EmptySeries(series.name().to_string()));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = if x.len() > 1 {
        (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok(DescriptiveStats {
        mean,
        sd,
        min: sorted[0],
        q25: quantile(0.25),
        median: quantile(0.5),
        q75: quantile(0.75),
        max: *sorted.last().unwrap(),
    })
}
