//! Synthetic FRED-style data snapshot.
//!
//! Generates a self-consistent daily macro world — the yield spread with
//! GARCH innovations, a ten-maturity Treasury curve driven by level, slope,
//! and curvature factors, and the eight covariates — and writes it as
//! two-column CSV files in the snapshot layout the experiment configs expect.
//! Everything is deterministic in the seed, so the checked-in snapshot can be
//! regenerated bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};

use crate::error::{Error, Result};
use crate::rng::Rng64;

/// Tunable world parameters. The defaults are calibrated so the standard
/// experiment pipeline lands near the reference results the tests pin.
#[derive(Debug, Clone)]
pub struct WorldParams {
    pub seed: u64,
    /// Mean of the yield spread.
    pub spread_mean: f64,
    /// AR(1) root of the persistent spread component.
    pub spread_ar: f64,
    /// MA terms of the spread innovations.
    pub spread_ma: [f64; 3],
    /// Unconditional innovation standard deviation.
    pub innovation_sd: f64,
    /// GARCH recursion (variance-lag coefficient, eps²-lag coefficients).
    pub garch_alpha: f64,
    pub garch_beta: [f64; 3],
    /// Observation noise standard deviation on the spread.
    pub measurement_sd: f64,
    /// Loadings of lagged covariates in the spread equation, as multiples of
    /// the innovation sd.
    pub covariate_gain: f64,
    /// Innovation correlation between the spread and the term premium.
    pub termpr_corr: f64,
    /// Own lag-28 echo in the stationary covariates.
    pub echo: f64,
    /// Per-step innovation scale of the term premium.
    pub termpr_scale: f64,
    /// How strongly the term premium level passes into the spread.
    pub termpr_loading: f64,
    /// Mon..Fri volatility multipliers; a weekly seasonal the GARCH family
    /// cannot represent.
    pub weekday_vol: [f64; 5],
    /// Standard deviation of the slow log-volatility factor layered on the
    /// GARCH recursion (another feature outside the fitted family).
    pub slow_vol_amplitude: f64,
    /// Phase offset (years) of the slow cycle.
    pub slow_vol_phase_years: f64,
    /// Level-factor scale for the Treasury curve.
    pub level_sd: f64,
    /// Curvature-factor scale.
    pub curvature_sd: f64,
    /// Per-maturity observation noise on the curve.
    pub curve_noise_sd: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            seed: 13,
            spread_mean: 1.75,
            spread_ar: 0.978,
            spread_ma: [0.044, -0.0215, -0.0696],
            innovation_sd: 0.072,
            garch_alpha: 0.06,
            garch_beta: [0.88, 0.0, 0.04],
            measurement_sd: 0.012,
            covariate_gain: 0.13,
            termpr_corr: 0.82,
            echo: 0.30,
            termpr_scale: 0.009,
            termpr_loading: 0.42,
            weekday_vol: [1.55, 1.00, 0.90, 1.00, 0.72],
            slow_vol_amplitude: 0.24,
            slow_vol_phase_years: 1.55,
            level_sd: 1.38,
            curvature_sd: 0.5,
            curve_noise_sd: 0.015,
        }
    }
}

/// The simulated world on the business-day calendar.
#[derive(Debug, Clone)]
pub struct World {
    pub dates: Vec<NaiveDate>,
    pub yieldsp: Vec<f64>,
    pub ted: Vec<f64>,
    pub vix: Vec<f64>,
    pub rec_ind: Vec<f64>,
    pub termpr: Vec<f64>,
    pub forward1yr: Vec<f64>,
    pub ffr1yr: Vec<f64>,
    pub infexp: Vec<f64>,
    pub sahm: Vec<f64>,
    /// Treasury yields per maturity, same calendar.
    pub tres: Vec<Vec<f64>>,
    pub maturities: Vec<(String, f64)>,
}

/// Business days (Mon-Fri) from `start` to `end` inclusive.
pub fn business_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = start;
    while d <= end {
        match d.weekday() {
            Weekday::Sat | Weekday::Sun => {}
            _ => out.push(d),
        }
        d += chrono::Duration::days(1);
    }
    out
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn simulate_world(params: &WorldParams) -> World {
    let dates = business_days(date(1982, 1, 4), date(2020, 8, 21));
    let n = dates.len();
    let mut rng = Rng64::substream(params.seed, 0);
    let mut rng_cov = Rng64::substream(params.seed, 1);
    let mut rng_curve = Rng64::substream(params.seed, 2);

    // Recession regime pinned to a historical-style episode calendar; the
    // final episode covers the early-2020 test window.
    let episodes = [
        (date(1982, 1, 4), date(1982, 11, 30)),
        (date(1986, 2, 3), date(1986, 7, 31)),
        (date(1990, 7, 2), date(1991, 3, 29)),
        (date(1994, 5, 2), date(1994, 11, 30)),
        (date(1998, 8, 3), date(1999, 1, 29)),
        (date(2001, 3, 1), date(2001, 11, 30)),
        (date(2007, 12, 3), date(2009, 6, 30)),
        (date(2011, 7, 1), date(2012, 1, 31)),
        (date(2015, 11, 2), date(2016, 8, 31)),
        (date(2020, 2, 24), date(2020, 8, 21)),
    ];
    let rec_ind: Vec<f64> = dates
        .iter()
        .map(|d| {
            if episodes.iter().any(|(a, b)| d >= a && d <= b) {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    // Stationary covariates with a lag-28 own echo so joint dynamics carry
    // genuine dependence around the monthly horizon.
    let echo = params.echo;
    let mut ted = vec![0.0; n];
    let mut vix = vec![0.0; n];
    let mut ffr1yr = vec![0.0; n];
    let mut infexp = vec![0.0; n];
    let mut sahm = vec![0.0; n];
    for t in 0..n {
        let lag = |v: &Vec<f64>, k: usize, fallback: f64| -> f64 {
            if t >= k {
                v[t - k]
            } else {
                fallback
            }
        };
        let rec = rec_ind[t];
        // TED spread: short-memory around 0.5; recessions raise its noise.
        let ted_mu = 0.5;
        ted[t] = ted_mu
            + (0.62 - echo) * (lag(&ted, 1, ted_mu) - ted_mu)
            + echo * (lag(&ted, 28, ted_mu) - ted_mu)
            + (0.035 + 0.07 * rec) * rng_cov.normal();
        ted[t] = ted[t].max(0.05);
        // VIX: level around 19; recessions widen the swings.
        let vix_mu = 19.0;
        vix[t] = vix_mu
            + (0.655 - echo) * (lag(&vix, 1, vix_mu) - vix_mu)
            + echo * (lag(&vix, 28, vix_mu) - vix_mu)
            + (1.3 + 2.2 * rec) * rng_cov.normal();
        vix[t] = vix[t].max(9.0);
        // One-year rate minus fed funds: small stationary spread.
        ffr1yr[t] = 0.11
            + (0.66 - echo) * (lag(&ffr1yr, 1, 0.11) - 0.11)
            + echo * (lag(&ffr1yr, 28, 0.11) - 0.11)
            + 0.03 * rng_cov.normal();
        // Inflation expectations: independent of the spread system.
        infexp[t] = 2.8 + 0.988 * (lag(&infexp, 1, 2.8) - 2.8) + 0.012 * rng_cov.normal();
        // Sahm indicator: builds during recessions, decays after.
        sahm[t] = 0.985 * lag(&sahm, 1, 0.0) + 0.024 * rec + 0.004 * rng_cov.normal();
        sahm[t] = sahm[t].max(-0.2);
    }

    // Spread innovations with GARCH volatility; term-premium innovations
    // correlated with them.
    let uncond_var = params.innovation_sd * params.innovation_sd;
    let persistence = params.garch_alpha + params.garch_beta.iter().sum::<f64>();
    let alpha0 = uncond_var * (1.0 - persistence);
    let mut sigma2 = vec![uncond_var; n];
    let mut eps_core = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let mut z_shared = vec![0.0; n];
    // Conditional volatility relative to the unconditional scale; every
    // shock in the system (spread, term premium, measurement) shares it.
    let mut vol_factor = vec![1.0; n];
    // Slow log-volatility cycle: a multi-year swing no short-lag GARCH
    // recursion reproduces, deterministic so every seed shares the same
    // regime profile.
    let slow_vol: Vec<f64> = (0..n)
        .map(|t| {
            let years = t as f64 / 261.0 - params.slow_vol_phase_years;
            params.slow_vol_amplitude * (2.0 * std::f64::consts::PI * years / 7.0).sin()
        })
        .collect();
    for t in 0..n {
        let mut v = alpha0 + params.garch_alpha * if t >= 1 { sigma2[t - 1] } else { uncond_var };
        for (j, b) in params.garch_beta.iter().enumerate() {
            let e2 = if t > j {
                eps_core[t - 1 - j] * eps_core[t - 1 - j]
            } else {
                uncond_var
            };
            v += b * e2;
        }
        // Clamp the variance path: the heavy-tailed recursion occasionally
        // spikes, and the world should stay within percent-scale moves.
        sigma2[t] = v.min(uncond_var * 60.0);
        let z = rng.normal();
        z_shared[t] = z;
        let weekday = dates[t].weekday().num_days_from_monday() as usize;
        eps_core[t] = sigma2[t].sqrt() * z;
        // Seasonal and slow-cycle factors scale the observed shock without
        // feeding back into the variance recursion.
        let conditional_sd = sigma2[t].sqrt() * params.weekday_vol[weekday] * slow_vol[t].exp();
        vol_factor[t] = (conditional_sd / params.innovation_sd).clamp(0.25, 8.0);
        eps[t] = conditional_sd * z;
    }

    // Term premium: very slow mean reversion, increments correlated with the
    // spread innovations (this drives the variance-decomposition share).
    let rho = params.termpr_corr;
    let mut termpr = vec![0.0; n];
    let mut d_termpr = vec![0.0; n];
    {
        let mut level: f64 = 1.6;
        let scale = params.termpr_scale;
        for t in 0..n {
            let own = rng.normal();
            let shock = rho * z_shared[t] + (1.0 - rho * rho).sqrt() * own;
            // Shared conditional volatility keeps the residual correlation
            // at rho even through the fat-tailed regimes.
            let echo_term = if t >= 28 { 0.25 * d_termpr[t - 28] } else { 0.0 };
            let pull = -0.0005 * (level - 1.3);
            let d = pull + echo_term + scale * vol_factor[t] * shock;
            d_termpr[t] = d;
            level += d;
            termpr[t] = level;
        }
    }

    // Forward rate: another near-random-walk level; its changes push the
    // spread with a lag.
    let mut forward1yr = vec![0.0; n];
    let mut d_forward = vec![0.0; n];
    {
        let mut level: f64 = 5.0;
        for t in 0..n {
            let echo_term = if t >= 28 { 0.25 * d_forward[t - 28] } else { 0.0 };
            let d = -0.00008 + echo_term + 0.022 * rng.normal();
            d_forward[t] = d;
            level += d;
            forward1yr[t] = level.max(-0.5);
        }
    }

    // The spread itself: persistent core plus lagged covariate pushes, MA
    // innovations, and observation noise.
    let g = params.covariate_gain * params.innovation_sd;
    let mut core = vec![0.0; n];
    for t in 0..n {
        let prev = if t >= 1 { core[t - 1] } else { 0.0 };
        let mut v = params.spread_ar * prev + eps[t];
        for (j, theta) in params.spread_ma.iter().enumerate() {
            if t > j {
                v += theta * eps[t - 1 - j];
            }
        }
        if t >= 2 {
            // Transient (differenced) covariate pushes: they move the spread
            // without shifting its long-run level, so the stationary system
            // carries real cross-lag signal but no slow drift.
            let d_ted = (ted[t - 1] - ted[t - 2]) / 0.045;
            let d_vix = (vix[t - 1] - vix[t - 2]) / 1.6;
            let d_ffr = (ffr1yr[t - 1] - ffr1yr[t - 2]) / 0.035;
            let d_rec = rec_ind[t - 1] - rec_ind[t - 2];
            let dtp = d_termpr[t - 1] / 0.022;
            let dfw = d_forward[t - 1] / 0.025;
            v += g * vol_factor[t] * (0.9 * d_ted + 0.8 * d_vix - 0.8 * d_ffr - 1.2 * d_rec
                + 0.9 * dtp - 0.9 * dfw);
        }
        core[t] = v;
    }
    let mut yieldsp = vec![0.0; n];
    for t in 0..n {
        // Slow explained component: the term premium passes straight into
        // the spread level, so exogenous information anchors its path.
        yieldsp[t] = params.spread_mean + core[t]
            + params.termpr_loading * (termpr[t] - 1.3)
            + params.measurement_sd * vol_factor[t] * rng.normal();
    }

    // Treasury curve: level/slope/curvature factors; slope is pinned to the
    // generated spread so the curve and the spread agree.
    let maturities: Vec<(String, f64)> = vec![
        ("tres_3mo".into(), 0.25),
        ("tres_6mo".into(), 0.5),
        ("tres_1yr".into(), 1.0),
        ("tres_2yr".into(), 2.0),
        ("tres_3yr".into(), 3.0),
        ("tres_5yr".into(), 5.0),
        ("tres_7yr".into(), 7.0),
        ("tres_10yr".into(), 10.0),
        ("tres_20yr".into(), 20.0),
        ("tres_30yr".into(), 30.0),
    ];
    let w_slope = |tau: f64| (-tau / 4.0).exp();
    let w_curve = |tau: f64| (-((tau - 3.0) * (tau - 3.0)) / 8.0).exp();
    let slope_span = w_slope(0.25) - w_slope(10.0);
    let mut level = vec![0.0; n];
    let mut curv = vec![0.0; n];
    {
        let mut l: f64 = 3.2;
        let mut c: f64 = 0.0;
        for t in 0..n {
            // Slow declining level with long swings.
            l = 3.2 + 0.9997 * (l - 3.2) - 0.00006 * params.level_sd
                + 0.016 * params.level_sd * rng_curve.normal();
            c = 0.995 * c + 0.012 * params.curvature_sd * rng_curve.normal();
            level[t] = l;
            curv[t] = c;
        }
    }
    let mut tres: Vec<Vec<f64>> = vec![vec![0.0; n]; maturities.len()];
    let base: Vec<f64> = vec![0.0, 0.08, 0.18, 0.35, 0.5, 0.75, 0.95, 1.15, 1.5, 1.6];
    for t in 0..n {
        // Slope factor chosen so tres_3mo - tres_10yr terms reproduce the
        // spread deviation exactly.
        let s = -(yieldsp[t] - params.spread_mean) / slope_span;
        for (i, (_, tau)) in maturities.iter().enumerate() {
            let mut y = base[i] + level[t] + w_slope(*tau) * s + w_curve(*tau) * curv[t];
            if i != 0 && i != 7 {
                y += params.curve_noise_sd * rng_curve.normal();
            }
            tres[i][t] = y;
        }
        // Pin the 10y-3m difference to the spread exactly.
        tres[7][t] = tres[0][t] + yieldsp[t];
    }

    World {
        dates,
        yieldsp,
        ted,
        vix,
        rec_ind,
        termpr,
        forward1yr,
        ffr1yr,
        infexp,
        sahm,
        tres,
        maturities,
    }
}

fn write_series_csv(
    path: &Path,
    header_id: &str,
    dates: &[NaiveDate],
    values: &[f64],
    missing: &[usize],
) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 18);
    let _ = writeln!(out, "observation_date,{header_id}");
    for (i, (d, v)) in dates.iter().zip(values.iter()).enumerate() {
        if missing.binary_search(&i).is_ok() {
            let _ = writeln!(out, "{d},.");
        } else {
            let _ = writeln!(out, "{d},{v:.6}");
        }
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn window_indices(dates: &[NaiveDate], start: NaiveDate, end: NaiveDate) -> (usize, usize) {
    let lo = dates.partition_point(|d| *d < start);
    let hi = dates.partition_point(|d| *d <= end);
    (lo, hi)
}

/// Writes the full snapshot into `dir`: the spread, the eight covariates over
/// the multivariate window, and the ten Treasury maturities over the curve
/// window. Returns the written file names.
pub fn generate_snapshot(dir: &Path, params: &WorldParams) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let world = simulate_world(params);
    let mut written = Vec::new();
    let mut rng = Rng64::substream(params.seed, 9);

    // A sprinkling of missing markers in the spread file exercises the
    // cleaning policies.
    let mut missing: Vec<usize> = (0..world.dates.len())
        .filter(|_| rng.uniform() < 0.004)
        .collect();
    missing.sort_unstable();

    write_series_csv(
        &dir.join("yieldsp.csv"),
        "YIELDSP",
        &world.dates,
        &world.yieldsp,
        &missing,
    )?;
    written.push("yieldsp.csv".to_string());

    let (mlo, mhi) = window_indices(&world.dates, date(1990, 1, 2), date(2020, 6, 1));
    let mdates = &world.dates[mlo..mhi];
    let covs: Vec<(&str, &str, &Vec<f64>)> = vec![
        ("ted.csv", "TEDRATE", &world.ted),
        ("vix.csv", "VIXCLS", &world.vix),
        ("rec_ind.csv", "USREC", &world.rec_ind),
        ("termpr.csv", "THREEFYTP10", &world.termpr),
        ("forward1yr.csv", "THREEFF1", &world.forward1yr),
        ("ffr1yr.csv", "T1YFF", &world.ffr1yr),
        ("infexp.csv", "MICH", &world.infexp),
        ("sahm.csv", "SAHMREALTIME", &world.sahm),
    ];
    for (file, id, values) in covs {
        write_series_csv(&dir.join(file), id, mdates, &values[mlo..mhi], &[])?;
        written.push(file.to_string());
    }

    let (plo, phi) = window_indices(&world.dates, date(1993, 10, 11), date(2020, 8, 21));
    let pdates = &world.dates[plo..phi];
    for (i, (name, _)) in world.maturities.iter().enumerate() {
        let file = format!("{name}.csv");
        write_series_csv(
            &dir.join(&file),
            &name.to_uppercase(),
            pdates,
            &world.tres[i][plo..phi],
            &[],
        )?;
        written.push(file);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_is_deterministic() {
        let p = WorldParams::default();
        let a = simulate_world(&p);
        let b = simulate_world(&p);
        assert_eq!(a.yieldsp, b.yieldsp);
        assert_eq!(a.tres[3], b.tres[3]);
    }

    #[test]
    fn spread_agrees_with_curve_endpoints() {
        let world = simulate_world(&WorldParams::default());
        for t in (0..world.dates.len()).step_by(997) {
            let implied = world.tres[7][t] - world.tres[0][t];
            assert!((implied - world.yieldsp[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn recession_indicator_is_binary_with_episodes() {
        let world = simulate_world(&WorldParams::default());
        assert!(world.rec_ind.iter().all(|v| *v == 0.0 || *v == 1.0));
        let frac: f64 =
            world.rec_ind.iter().sum::<f64>() / world.rec_ind.len() as f64;
        assert!(frac > 0.02 && frac < 0.30, "recession share {frac}");
    }
}
