//! Reduced-form vector autoregression: per-equation OLS estimation (equal to
//! SUR here because every equation shares the same regressor set), AIC lag
//! selection on a common sample, rolling and iterative forecasting,
//! Cholesky-orthogonalized impulse responses, and forecast-error variance
//! decomposition.

use serde::Serialize;

pub use crate::linalg::cholesky;

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, ln_det_spd, spectral_radius, Mat};

/// Estimated VAR(l).
#[derive(Debug, Clone)]
pub struct VarFit {
    pub variable_names: Vec<String>,
    pub lag_order: usize,
    pub intercepts: Vec<f64>,
    /// coefficients[m] is the k×k matrix B_{m+1}; row i, column j is the
    /// loading of variable i on variable j lagged m+1 steps.
    pub coefficients: Vec<Mat>,
    /// Residual covariance with the maximum-likelihood 1/n scaling (used in
    /// AIC) and with the degrees-of-freedom correction (used for inference).
    pub residual_cov_mle: Mat,
    pub residual_cov_df: Mat,
    pub aic: f64,
    pub residuals: Panel,
    /// Durbin-Watson statistic per equation.
    pub dw: Vec<f64>,
    /// Per-equation standard errors aligned with [intercept, lag-1 block,
    /// lag-2 block, ...].
    pub std_errors: Vec<Vec<f64>>,
    pub n_obs: usize,
}

impl VarFit {
    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    /// Parameters per equation: k·l + 1.
    pub fn params_per_equation(&self) -> usize {
        self.n_vars() * self.lag_order + 1
    }

    /// Spectral radius of the companion matrix; < 1 means stationary.
    pub fn companion_radius(&self) -> f64 {
        let k = self.n_vars();
        let l = self.lag_order;
        let dim = k * l;
        let mut companion = Mat::zeros(dim, dim);
        for (m, b) in self.coefficients.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    companion.set(i, m * k + j, b.get(i, j));
                }
            }
        }
        for i in k..dim {
            companion.set(i, i - k, 1.0);
        }
        spectral_radius(&companion, 800)
    }

    /// One-step prediction from the last `lag_order` rows of `recent`
    /// (chronological order).
    fn predict_next(&self, recent: &[Vec<f64>]) -> Vec<f64> {
        let k = self.n_vars();
        let l = self.lag_order;
        debug_assert!(recent.len() >= l);
        let mut out = self.intercepts.clone();
        for m in 0..l {
            let row = &recent[recent.len() - 1 - m];
            let b = &self.coefficients[m];
            for i in 0..k {
                for j in 0..k {
                    out[i] += b.get(i, j) * row[j];
                }
            }
        }
        out
    }
}

struct Gram {
    /// X'X over the common sample.
    gxx: Mat,
    /// X'Y.
    gxy: Mat,
    /// Y'Y.
    gyy: Mat,
    n_eff: usize,
}

/// Builds Gram matrices for a VAR design with `max_lag` lag blocks, trimming
/// the first `trim` rows (trim >= max_lag keeps the sample common across
/// lag candidates).
fn build_gram(panel: &Panel, max_lag: usize, trim: usize) -> Result<Gram> {
    let k = panel.n_cols();
    let n = panel.n_rows();
    if n <= trim || trim < max_lag {
        return Err(Error::SeriesTooShort {
            name: "panel".to_string(),
            len: n,
            need: trim + 1,
        });
    }
    let m = 1 + k * max_lag;
    let n_eff = n - trim;
    let mut gxx = Mat::zeros(m, m);
    let mut gxy = Mat::zeros(m, k);
    let mut gyy = Mat::zeros(k, k);
    let mut xrow = vec![0.0; m];
    for t in trim..n {
        xrow[0] = 1.0;
        for lag in 1..=max_lag {
            for j in 0..k {
                xrow[1 + (lag - 1) * k + j] = panel.column_at(j)[t - lag];
            }
        }
        let yrow: Vec<f64> = (0..k).map(|j| panel.column_at(j)[t]).collect();
        for a in 0..m {
            let xa = xrow[a];
            if xa == 0.0 {
                continue;
            }
            for b in a..m {
                gxx.add_to(a, b, xa * xrow[b]);
            }
            for j in 0..k {
                gxy.add_to(a, j, xa * yrow[j]);
            }
        }
        for i in 0..k {
            for j in i..k {
                gyy.add_to(i, j, yrow[i] * yrow[j]);
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            let v = gxx.get(b, a);
            gxx.set(a, b, v);
        }
    }
    for i in 0..k {
        for j in 0..i {
            let v = gyy.get(j, i);
            gyy.set(i, j, v);
        }
    }
    Ok(Gram {
        gxx,
        gxy,
        gyy,
        n_eff,
    })
}

/// Solves the leading (1 + k·l)-sized system of the Gram matrices, returning
/// the coefficient matrix (m×k) and residual cross-product E'E (k×k).
fn solve_lag(gram: &Gram, k: usize, l: usize) -> Result<(Mat, Mat)> {
    let m = 1 + k * l;
    let gxx = gram.gxx.leading(m);
    let chol = cholesky(&gxx).map_err(|_| {
        Error::SingularMatrix("VAR regressor Gram matrix is not positive definite".to_string())
    })?;
    let mut coef = Mat::zeros(m, k);
    for j in 0..k {
        let rhs: Vec<f64> = (0..m).map(|a| gram.gxy.get(a, j)).collect();
        let b = chol_solve(&chol, &rhs);
        for a in 0..m {
            coef.set(a, j, b[a]);
        }
    }
    // E'E = Y'Y - C' B with C = X'Y restricted to the first m rows.
    let mut ee = gram.gyy.clone();
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for a in 0..m {
                acc += gram.gxy.get(a, i) * coef.get(a, j);
            }
            ee.add_to(i, j, -acc);
        }
    }
    // Symmetrize against accumulation noise.
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (ee.get(i, j) + ee.get(j, i));
            ee.set(i, j, v);
            ee.set(j, i, v);
        }
    }
    Ok((coef, ee))
}

fn var_aic(ee: &Mat, k: usize, l: usize, n_eff: usize) -> Result<f64> {
    let sigma = ee.scaled(1.0 / n_eff as f64);
    let ln_det = ln_det_spd(&sigma)?;
    Ok(ln_det + 2.0 * ((k * k * l + k) as f64) / n_eff as f64)
}

/// AIC lag-order search outcome.
#[derive(Debug, Clone, Serialize)]
pub struct LagSelection {
    pub selected: usize,
    /// (lag, AIC) for every candidate 1..=max_lag on the common sample.
    pub trace: Vec<(usize, f64)>,
    /// AIC of the intercept-only reference model.
    pub aic_lag0: f64,
    /// Raised when no candidate improves meaningfully on the no-dynamics
    /// reference; the trace is then too flat to trust.
    pub weak_evidence: bool,
}

/// Chooses the AIC-minimizing lag in 1..=max_lag over a common estimation
/// sample (all candidates lose the same `max_lag` presample rows). Ties break
/// toward the smaller lag.
pub fn select_lag_order(panel: &Panel, max_lag: usize) -> Result<LagSelection> {
    let k = panel.n_cols();
    if max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be >= 1".to_string()));
    }
    if panel.n_rows() < k * max_lag + 10 {
        return Err(Error::SeriesTooShort {
            name: "panel".to_string(),
            len: panel.n_rows(),
            need: k * max_lag + 10,
        });
    }
    let gram = build_gram(panel, max_lag, max_lag)?;
    let mut trace = Vec::with_capacity(max_lag);
    let mut best = (1usize, f64::INFINITY);
    for l in 1..=max_lag {
        let (_, ee) = solve_lag(&gram, k, l)?;
        let aic = var_aic(&ee, k, l, gram.n_eff)?;
        trace.push((l, aic));
        if aic < best.1 - 1e-12 {
            best = (l, aic);
        }
    }
    let (_, ee0) = solve_lag(&gram, k, 0)?;
    let aic_lag0 = var_aic(&ee0, k, 0, gram.n_eff)?;
    // Weak evidence: the best dynamic model beats the static reference by
    // less than one average parameter-block penalty.
    let weak_evidence = (aic_lag0 - best.1) < (k * k) as f64 / gram.n_eff as f64;
    Ok(LagSelection {
        selected: best.0,
        trace,
        aic_lag0,
        weak_evidence,
    })
}

/// Fits VAR(l) by per-equation OLS on the maximal sample for that lag.
pub fn fit_var(panel: &Panel, l: usize) -> Result<VarFit> {
    let k = panel.n_cols();
    let n = panel.n_rows();
    if l == 0 {
        return Err(Error::InvalidParameter("lag order must be >= 1".to_string()));
    }
    if n <= k * l + 1 {
        return Err(Error::SeriesTooShort {
            name: "panel".to_string(),
            len: n,
            need: k * l + 2,
        });
    }
    let gram = build_gram(panel, l, l)?;
    let (coef, ee) = solve_lag(&gram, k, l)?;
    let n_eff = gram.n_eff;
    let m = 1 + k * l;
    let dof = n_eff.saturating_sub(m).max(1);

    let residual_cov_mle = ee.scaled(1.0 / n_eff as f64);
    let residual_cov_df = ee.scaled(1.0 / dof as f64);
    let aic = var_aic(&ee, k, l, n_eff)?;

    let intercepts: Vec<f64> = (0..k).map(|j| coef.get(0, j)).collect();
    let mut coefficients = Vec::with_capacity(l);
    for lag in 0..l {
        let mut b = Mat::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                b.set(i, j, coef.get(1 + lag * k + j, i));
            }
        }
        coefficients.push(b);
    }

    // Residual panel and per-equation statistics.
    let mut resid_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n_eff); k];
    for t in l..n {
        let recent: Vec<Vec<f64>> = (t - l..t).map(|r| panel.row(r)).collect();
        let mut pred = intercepts.clone();
        for mlag in 0..l {
            let row = &recent[l - 1 - mlag];
            for i in 0..k {
                for j in 0..k {
                    pred[i] += coefficients[mlag].get(i, j) * row[j];
                }
            }
        }
        for i in 0..k {
            resid_cols[i].push(panel.column_at(i)[t] - pred[i]);
        }
    }
    let residuals = Panel::new(
        panel.calendar()[l..].to_vec(),
        panel
            .names()
            .iter()
            .map(|nm| format!("{nm}_resid"))
            .collect(),
        resid_cols.clone(),
    )?;
    let dw: Vec<f64> = resid_cols
        .iter()
        .map(|e| {
            let denom: f64 = e.iter().map(|v| v * v).sum();
            let num: f64 = e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            num / denom
        })
        .collect();

    // Standard errors: sqrt(sigma_j² * diag(G⁻¹)).
    let gxx_inv = crate::linalg::inverse(&gram.gxx.leading(m))?;
    let std_errors: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let s2 = residual_cov_df.get(j, j);
            (0..m).map(|a| (s2 * gxx_inv.get(a, a)).max(0.0).sqrt()).collect()
        })
        .collect();

    Ok(VarFit {
        variable_names: panel.names().to_vec(),
        lag_order: l,
        intercepts,
        coefficients,
        residual_cov_mle,
        residual_cov_df,
        aic,
        residuals,
        dw,
        std_errors,
        n_obs: n_eff,
    })
}

/// Chains the fitted recursion on its own forecasts for `h` steps beyond the
/// end of `history`. Returns h rows in variable order.
pub fn forecast_iterative(fit: &VarFit, history: &Panel, h: usize) -> Result<Vec<Vec<f64>>> {
    let l = fit.lag_order;
    if history.n_rows() < l {
        return Err(Error::SeriesTooShort {
            name: "history".to_string(),
            len: history.n_rows(),
            need: l,
        });
    }
    if history.names() != fit.variable_names.as_slice() {
        return Err(Error::DimensionMismatch(
            "history columns do not match the fitted variables".to_string(),
        ));
    }
    let mut recent: Vec<Vec<f64>> = (history.n_rows() - l..history.n_rows())
        .map(|r| history.row(r))
        .collect();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let next = fit.predict_next(&recent);
        recent.push(next.clone());
        if recent.len() > l {
            recent.remove(0);
        }
        out.push(next);
    }
    Ok(out)
}

/// One-step predictions for every row from `test_start` on, feeding realized
/// values back after each step (walk-forward in the stationary space).
pub fn forecast_rolling(fit: &VarFit, panel: &Panel, test_start: usize) -> Result<Panel> {
    let l = fit.lag_order;
    if test_start < l || test_start >= panel.n_rows() {
        return Err(Error::InvalidParameter(format!(
            "test_start {test_start} outside [{l}, {})",
            panel.n_rows()
        )));
    }
    if panel.names() != fit.variable_names.as_slice() {
        return Err(Error::DimensionMismatch(
            "panel columns do not match the fitted variables".to_string(),
        ));
    }
    let k = fit.n_vars();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); k];
    for t in test_start..panel.n_rows() {
        let recent: Vec<Vec<f64>> = (t - l..t).map(|r| panel.row(r)).collect();
        let pred = fit.predict_next(&recent);
        for i in 0..k {
            cols[i].push(pred[i]);
        }
    }
    Panel::new(
        panel.calendar()[test_start..].to_vec(),
        panel
            .names()
            .iter()
            .map(|nm| format!("{nm}_pred"))
            .collect(),
        cols,
    )
}

/// Orthogonalized impulse responses.
#[derive(Debug, Clone)]
pub struct IrfResult {
    /// Variable order used for the Cholesky factor.
    pub ordering: Vec<String>,
    /// responses[h].get(i, j): response of variable i at horizon h to a
    /// one-standard-deviation orthogonalized shock in variable j, both
    /// indexed in `ordering`.
    pub responses: Vec<Mat>,
}

/// Forecast-error variance decomposition.
#[derive(Debug, Clone)]
pub struct FevdResult {
    pub ordering: Vec<String>,
    /// shares[h].get(i, j): fraction of variable i's h-step forecast-error
    /// variance attributed to shock j.
    pub shares: Vec<Mat>,
}

fn ordering_permutation(fit: &VarFit, ordering: Option<&[&str]>) -> Result<Vec<usize>> {
    match ordering {
        None => Ok((0..fit.n_vars()).collect()),
        Some(names) => {
            if names.len() != fit.n_vars() {
                return Err(Error::DimensionMismatch(format!(
                    "ordering has {} names, fit has {}",
                    names.len(),
                    fit.n_vars()
                )));
            }
            names
                .iter()
                .map(|n| {
                    fit.variable_names
                        .iter()
                        .position(|v| v == n)
                        .ok_or_else(|| Error::ColumnNotFound(n.to_string()))
                })
                .collect()
        }
    }
}

/// MA coefficient matrices Psi_0..Psi_h of the (permuted) VAR.
fn ma_matrices(coeffs: &[Mat], k: usize, horizon: usize) -> Vec<Mat> {
    let mut psi: Vec<Mat> = Vec::with_capacity(horizon + 1);
    psi.push(Mat::identity(k));
    for h in 1..=horizon {
        let mut m = Mat::zeros(k, k);
        for (i, b) in coeffs.iter().enumerate() {
            if h <= i {
                break;
            }
            let prev = &psi[h - 1 - i];
            let prod = b.matmul(prev);
            m = m.add(&prod);
        }
        psi.push(m);
    }
    psi
}

fn permuted_system(fit: &VarFit, perm: &[usize]) -> (Vec<Mat>, Mat) {
    let k = fit.n_vars();
    let coeffs: Vec<Mat> = fit
        .coefficients
        .iter()
        .map(|b| {
            let mut pb = Mat::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    pb.set(i, j, b.get(perm[i], perm[j]));
                }
            }
            pb
        })
        .collect();
    let mut sigma = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            sigma.set(i, j, fit.residual_cov_mle.get(perm[i], perm[j]));
        }
    }
    (coeffs, sigma)
}

/// Impulse responses out to `horizon` under the given Cholesky ordering
/// (defaults to the fit's variable order). Errors on explosive fits unless
/// `force` is set.
pub fn irf(fit: &VarFit, horizon: usize, ordering: Option<&[&str]>, force: bool) -> Result<IrfResult> {
    let radius = fit.companion_radius();
    if radius >= 1.0 && !force {
        return Err(Error::ExplosiveFit(radius));
    }
    let perm = ordering_permutation(fit, ordering)?;
    let (coeffs, sigma) = permuted_system(fit, &perm);
    let p = cholesky(&sigma)?;
    let psi = ma_matrices(&coeffs, fit.n_vars(), horizon);
    let responses: Vec<Mat> = psi.iter().map(|m| m.matmul(&p)).collect();
    Ok(IrfResult {
        ordering: perm
            .iter()
            .map(|&i| fit.variable_names[i].clone())
            .collect(),
        responses,
    })
}

/// Variance decomposition out to `horizon` under the given ordering.
pub fn fevd(fit: &VarFit, horizon: usize, ordering: Option<&[&str]>) -> Result<FevdResult> {
    let irf_result = irf(fit, horizon, ordering, false)?;
    let k = fit.n_vars();
    let mut shares = Vec::with_capacity(horizon + 1);
    let mut cum = Mat::zeros(k, k);
    for theta in &irf_result.responses {
        for i in 0..k {
            for j in 0..k {
                cum.add_to(i, j, theta.get(i, j) * theta.get(i, j));
            }
        }
        let mut share = Mat::zeros(k, k);
        for i in 0..k {
            let total: f64 = (0..k).map(|j| cum.get(i, j)).sum();
            for j in 0..k {
                share.set(i, j, cum.get(i, j) / total);
            }
        }
        shares.push(share);
    }
    Ok(FevdResult {
        ordering: irf_result.ordering,
        shares,
    })
}

/// Total h-step forecast-error covariance sum Psi_s Sigma Psi_s'; invariant
/// to the Cholesky ordering and used as a cross-check on the decomposition.
pub fn forecast_error_covariance(fit: &VarFit, horizon: usize) -> Mat {
    let k = fit.n_vars();
    let psi = ma_matrices(&fit.coefficients, k, horizon);
    let mut total = Mat::zeros(k, k);
    for m in &psi {
        let t = m.matmul(&fit.residual_cov_mle).matmul(&m.transpose());
        total = total.add(&t);
    }
    total
}

#[cfg(test)]
mod tests;
