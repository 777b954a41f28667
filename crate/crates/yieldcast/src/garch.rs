//! GARCH(p, q) conditional-variance models fitted to zero-mean residuals by
//! Gaussian maximum likelihood.
//!
//! Index convention follows the variance equation as used throughout this
//! project: `alpha` multiplies lagged conditional variances and `beta`
//! multiplies lagged squared residuals,
//!
//! sigma²_t = alpha0 + sum_i alpha_i sigma²_{t-i} + sum_j beta_j eps²_{t-j}.
//!
//! Much of the literature swaps the two letters, so report output labels the
//! coefficients by their role as well as their symbol.

use serde::Serialize;

use crate::data::TimeSeries;
use crate::diagnostics::{correlogram, Correlogram};
use crate::error::{Error, Result};
use crate::optimize::{minimize, numerical_hessian};

/// Model order: `p` lagged-variance terms, `q` lagged squared-residual terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GarchSpec {
    pub p: usize,
    pub q: usize,
}

impl GarchSpec {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p + q == 0 {
            return Err(Error::InvalidParameter(
                "GARCH needs p + q >= 1".to_string(),
            ));
        }
        Ok(GarchSpec { p, q })
    }

    pub fn label(&self) -> String {
        format!("GARCH({},{})", self.p, self.q)
    }
}

/// Fitted conditional-variance model.
#[derive(Debug, Clone)]
pub struct GarchFit {
    pub spec: GarchSpec,
    pub alpha0: f64,
    /// Coefficients on lagged conditional variance, length p.
    pub alpha: Vec<f64>,
    /// Coefficients on lagged squared residuals, length q.
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    /// Conditional variance series sigma²_t on the residual calendar.
    pub cond_variance: TimeSeries,
    /// Standard errors for [alpha0, alpha.., beta..]; NaN at boundary points
    /// where the observed information is singular.
    pub std_errors: Vec<f64>,
    /// Set when the optimum sits effectively on the constraint boundary
    /// (a coefficient at zero or persistence at one).
    pub boundary: bool,
    pub n_obs: usize,
    /// Last q squared residuals, oldest first; feeds the forecast recursion.
    pub tail_eps2: Vec<f64>,
}

impl GarchFit {
    /// Total persistence sum(alpha) + sum(beta).
    pub fn persistence(&self) -> f64 {
        self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>()
    }

    /// Long-run variance alpha0 / (1 - persistence).
    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.persistence())
    }

    /// Residuals standardized by the fitted conditional volatility.
    pub fn standardized_residuals(&self, residuals: &TimeSeries) -> Result<TimeSeries> {
        if residuals.len() != self.cond_variance.len() {
            return Err(Error::DimensionMismatch(
                "residuals do not match the fitted sample".to_string(),
            ));
        }
        let values: Vec<f64> = residuals
            .values()
            .iter()
            .zip(self.cond_variance.values())
            .map(|(e, v)| e / v.sqrt())
            .collect();
        TimeSeries::new(
            format!("{}_std", residuals.name()),
            residuals.dates().to_vec(),
            values,
        )
    }
}

/// Variance recursion at given parameters. Presample variance and squared
/// residuals are pinned to the sample variance of the residuals.
fn variance_recursion(
    eps2: &[f64],
    presample: f64,
    alpha0: f64,
    alpha: &[f64],
    beta: &[f64],
) -> Vec<f64> {
    let n = eps2.len();
    let mut sigma2 = vec![0.0; n];
    for t in 0..n {
        let mut v = alpha0;
        for (i, a) in alpha.iter().enumerate() {
            let lag = t as isize - 1 - i as isize;
            v += a * if lag >= 0 { sigma2[lag as usize] } else { presample };
        }
        for (j, b) in beta.iter().enumerate() {
            let lag = t as isize - 1 - j as isize;
            v += b * if lag >= 0 { eps2[lag as usize] } else { presample };
        }
        sigma2[t] = v;
    }
    sigma2
}

fn neg_loglik(eps2: &[f64], presample: f64, alpha0: f64, alpha: &[f64], beta: &[f64]) -> f64 {
    if alpha0 <= 0.0 || alpha.iter().chain(beta.iter()).any(|&c| c < 0.0) {
        return f64::INFINITY;
    }
    let sigma2 = variance_recursion(eps2, presample, alpha0, alpha, beta);
    let mut ll = 0.0;
    for (s2, e2) in sigma2.iter().zip(eps2.iter()) {
        if s2.is_nan() || *s2 <= 0.0 {
            return f64::INFINITY;
        }
        ll += -0.5 * ((2.0 * std::f64::consts::PI).ln() + s2.ln() + e2 / s2);
    }
    -ll
}

/// Unconstrained -> (alpha0, alpha, beta): log for alpha0, logistic total
/// persistence, softmax split across the p + q coefficients.
fn decode(u: &[f64], p: usize, q: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let m = p + q;
    let alpha0 = u[0].exp();
    let persistence = (1.0 - 1e-7) / (1.0 + (-u[1]).exp());
    let mut weights = Vec::with_capacity(m);
    let mut denom = 1.0; // implicit last logit of 0
    for i in 0..m - 1 {
        denom += u[2 + i].exp();
    }
    for i in 0..m {
        let num = if i < m - 1 { u[2 + i].exp() } else { 1.0 };
        weights.push(num / denom);
    }
    let coefs: Vec<f64> = weights.iter().map(|w| w * persistence).collect();
    (alpha0, coefs[..p].to_vec(), coefs[p..].to_vec())
}

fn encode(alpha0: f64, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let coefs: Vec<f64> = alpha.iter().chain(beta.iter()).copied().collect();
    let s: f64 = coefs.iter().sum::<f64>().clamp(1e-6, 1.0 - 1e-6);
    let mut u = vec![alpha0.max(1e-12).ln(), (s / (1.0 - s)).ln()];
    let m = coefs.len();
    let last = coefs[m - 1].max(1e-8);
    for c in coefs.iter().take(m - 1) {
        u.push((c.max(1e-8) / last).ln());
    }
    u
}

/// Fits the variance model to zero-mean residuals. The mean must already be
/// negligible: |mean| < 0.01 * sd is enforced as a precondition.
pub fn fit_garch(residuals: &TimeSeries, spec: GarchSpec) -> Result<GarchFit> {
    let e = residuals.values();
    let n = e.len();
    let need = 20 * (spec.p + spec.q + 1);
    if n < need {
        return Err(Error::SeriesTooShort {
            name: residuals.name().to_string(),
            len: n,
            need,
        });
    }
    let mean = e.iter().sum::<f64>() / n as f64;
    let var = e.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return Err(Error::ZeroVariance(residuals.name().to_string()));
    }
    let sd = var.sqrt();
    if mean.abs() >= 0.01 * sd {
        return Err(Error::ResidualMeanNotZero { mean, sd });
    }

    let eps2: Vec<f64> = e.iter().map(|v| v * v).collect();
    let presample = eps2.iter().sum::<f64>() / n as f64;

    // Start at moderate persistence dominated by the variance lags.
    let mut alpha_init = vec![0.75 / spec.p.max(1) as f64; spec.p];
    let beta_init = vec![0.15 / spec.q.max(1) as f64; spec.q];
    if spec.p == 0 {
        alpha_init.clear();
    }
    let init_persistence: f64 =
        alpha_init.iter().sum::<f64>() + beta_init.iter().sum::<f64>();
    let alpha0_init = presample * (1.0 - init_persistence);
    let u0 = encode(alpha0_init, &alpha_init, &beta_init);

    let mut objective = |u: &[f64]| -> f64 {
        let (a0, alpha, beta) = decode(u, spec.p, spec.q);
        neg_loglik(&eps2, presample, a0, &alpha, &beta)
    };
    let result = minimize(&mut objective, &u0, 3000)?;
    if !result.converged || !result.value.is_finite() {
        return Err(Error::NoConvergence {
            iterations: result.iterations,
            objective: result.value,
        });
    }
    let (alpha0, alpha, beta) = decode(&result.x, spec.p, spec.q);
    let log_likelihood = -result.value;
    let n_params = 1 + spec.p + spec.q;
    let aic = 2.0 * n_params as f64 - 2.0 * log_likelihood;

    let sigma2 = variance_recursion(&eps2, presample, alpha0, &alpha, &beta);
    debug_assert!(sigma2.iter().all(|v| *v > 0.0));
    let cond_variance = TimeSeries::new(
        format!("{}_cond_var", residuals.name()),
        residuals.dates().to_vec(),
        sigma2,
    )?;

    let persistence: f64 = alpha.iter().sum::<f64>() + beta.iter().sum::<f64>();
    let boundary = alpha
        .iter()
        .chain(beta.iter())
        .any(|&c| c < 1e-7)
        || persistence > 1.0 - 1e-4;

    // Observed-information standard errors in natural space; boundary optima
    // leave NaNs behind.
    let mut natural = vec![alpha0];
    natural.extend_from_slice(&alpha);
    natural.extend_from_slice(&beta);
    let mut nat_obj = |v: &[f64]| -> f64 {
        neg_loglik(&eps2, presample, v[0], &v[1..1 + spec.p], &v[1 + spec.p..])
    };
    let hess = numerical_hessian(&mut nat_obj, &natural, 1e-5);
    let std_errors = match crate::linalg::inverse(&hess) {
        Ok(cov) => (0..n_params)
            .map(|i| {
                let v = cov.get(i, i);
                if v > 0.0 {
                    v.sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect(),
        Err(_) => vec![f64::NAN; n_params],
    };

    let tail_eps2 = eps2[n - spec.q.min(n)..].to_vec();
    Ok(GarchFit {
        spec,
        alpha0,
        alpha,
        beta,
        log_likelihood,
        aic,
        cond_variance,
        std_errors,
        boundary,
        n_obs: n,
        tail_eps2,
    })
}

/// Evaluates the fit's Gaussian log-likelihood at arbitrary admissible
/// parameters; lets tests confirm the optimizer's point dominates random
/// draws.
pub fn garch_loglik(
    residuals: &TimeSeries,
    alpha0: f64,
    alpha: &[f64],
    beta: &[f64],
) -> f64 {
    let eps2: Vec<f64> = residuals.values().iter().map(|v| v * v).collect();
    let presample = eps2.iter().sum::<f64>() / eps2.len() as f64;
    -neg_loglik(&eps2, presample, alpha0, alpha, beta)
}

/// Squared-residual correlogram with an ARCH-effect flag: raised when more
/// than a quarter of the lags breach the white-noise band.
#[derive(Debug, Clone, Serialize)]
pub struct ArchDiagnostic {
    pub correlogram: Correlogram,
    pub flagged: bool,
    pub breaching_lags: usize,
    pub n_lags: usize,
}

pub fn arch_effect_diagnostic(residuals: &TimeSeries, n_lags: usize) -> Result<ArchDiagnostic> {
    let squared: Vec<f64> = residuals.values().iter().map(|v| v * v).collect();
    let sq = TimeSeries::new(
        format!("{}_sq", residuals.name()),
        residuals.dates().to_vec(),
        squared,
    )?;
    let gram = correlogram(&sq, n_lags)?;
    let breaching = (1..=n_lags)
        .filter(|&k| gram.acf[k].abs() > gram.conf_band)
        .count();
    Ok(ArchDiagnostic {
        flagged: 4 * breaching > n_lags,
        breaching_lags: breaching,
        correlogram: gram,
        n_lags,
    })
}

/// Variance forecast sigma²_{t+1..t+h}. Future squared residuals are replaced
/// by their expectation, the forecast variance itself, so the path converges
/// monotonically toward alpha0 / (1 - persistence).
pub fn forecast_variance(fit: &GarchFit, h: usize) -> Vec<f64> {
    let sigma2 = fit.cond_variance.values();
    let n = sigma2.len();
    let n_tail = fit.tail_eps2.len();
    let mut out: Vec<f64> = Vec::with_capacity(h);
    for step in 1..=h {
        let mut v = fit.alpha0;
        for (i, a) in fit.alpha.iter().enumerate() {
            // Lagged conditional variance at offset step - 1 - i from the end.
            let idx = step as isize - 1 - i as isize;
            let past = if idx >= 1 {
                out[(idx - 1) as usize]
            } else {
                sigma2[(n as isize + idx - 1) as usize]
            };
            v += a * past;
        }
        for (j, b) in fit.beta.iter().enumerate() {
            let idx = step as isize - 1 - j as isize;
            let past = if idx >= 1 {
                out[(idx - 1) as usize]
            } else {
                fit.tail_eps2[(n_tail as isize + idx - 1) as usize]
            };
            v += b * past;
        }
        out.push(v);
    }
    out
}
