//! Vasicek mean-reversion model: dr = k(theta - r)dt + sigma dW.
//!
//! Simulation uses the exact Gaussian transition over each step, so there is
//! no discretization error at any step size:
//!
//! r_t = r_{t-1} e^{-k dt} + theta (1 - e^{-k dt}) + Z sqrt(sigma^2 (1 - e^{-2 k dt}) / (2k))
//!
//! Calibration exploits the same fact in reverse: sampled at a fixed step the
//! process is a Gaussian AR(1), whose conditional MLE has a closed form that
//! maps back to (k, theta, sigma).

use serde::Serialize;

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::{inverse, Mat};
use crate::rng::Rng64;

/// Model parameters. `k` is the mean-reversion speed per unit time, `theta`
/// the long-run level, `sigma` the volatility per square-root unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VasicekParams {
    pub k: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl VasicekParams {
    pub fn new(k: f64, theta: f64, sigma: f64) -> Result<Self> {
        if k.is_nan() || k <= 0.0 {
            return Err(Error::InvalidParameter(format!("k must be > 0, got {k}")));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        Ok(VasicekParams { k, theta, sigma })
    }

    /// E[r_{t+dt} | r_t].
    pub fn conditional_mean(&self, r: f64, dt: f64) -> f64 {
        let decay = (-self.k * dt).exp();
        r * decay + self.theta * (1.0 - decay)
    }

    /// Var[r_{t+dt} | r_t].
    pub fn conditional_variance(&self, dt: f64) -> f64 {
        self.sigma * self.sigma * (1.0 - (-2.0 * self.k * dt).exp()) / (2.0 * self.k)
    }

    /// Long-horizon variance sigma^2 / (2k).
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.k)
    }
}

/// Simulation request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSpec {
    pub r0: f64,
    /// Step size in years.
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimulationSpec {
    fn validate(&self) -> Result<()> {
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if self.n_steps == 0 || self.n_paths == 0 {
            return Err(Error::InvalidParameter(
                "n_steps and n_paths must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Simulated paths; each row has n_steps + 1 levels starting at r0.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub paths: Vec<Vec<f64>>,
    pub spec: SimulationSpec,
    pub params: VasicekParams,
}

impl PathEnsemble {
    /// Cross-path mean at a step index.
    pub fn mean_at(&self, step: usize) -> f64 {
        self.paths.iter().map(|p| p[step]).sum::<f64>() / self.paths.len() as f64
    }

    /// Cross-path variance at a step index (population form).
    pub fn variance_at(&self, step: usize) -> f64 {
        let m = self.mean_at(step);
        self.paths.iter().map(|p| (p[step] - m).powi(2)).sum::<f64>() / self.paths.len() as f64
    }

    /// CSV with one column per path, one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for i in 0..self.paths.len() {
            out.push_str(&format!(",path_{i}"));
        }
        out.push('\n');
        for s in 0..=self.spec.n_steps {
            out.push_str(&s.to_string());
            for p in &self.paths {
                out.push_str(&format!(",{}", p[s]));
            }
            out.push('\n');
        }
        out
    }

    /// Long-format rows (step, path_id, value) for plot emission.
    pub fn long_rows(&self) -> Vec<(usize, usize, f64)> {
        let mut rows = Vec::with_capacity(self.paths.len() * (self.spec.n_steps + 1));
        for (id, p) in self.paths.iter().enumerate() {
            for (step, v) in p.iter().enumerate() {
                rows.push((step, id, *v));
            }
        }
        rows
    }
}

/// Draws the ensemble with the exact transition law. Path `i` consumes its
/// own RNG substream, so its values are identical no matter how many paths
/// are requested.
pub fn simulate_paths(params: &VasicekParams, spec: &SimulationSpec) -> Result<PathEnsemble> {
    VasicekParams::new(params.k, params.theta, params.sigma)?;
    spec.validate()?;
    let decay = (-params.k * spec.dt).exp();
    let step_sd = params.conditional_variance(spec.dt).sqrt();
    let mut paths = Vec::with_capacity(spec.n_paths);
    for path_idx in 0..spec.n_paths {
        let mut rng = Rng64::substream(spec.seed, path_idx as u64);
        let mut path = Vec::with_capacity(spec.n_steps + 1);
        let mut r = spec.r0;
        path.push(r);
        for _ in 0..spec.n_steps {
            r = r * decay + params.theta * (1.0 - decay) + step_sd * rng.normal();
            path.push(r);
        }
        paths.push(path);
    }
    Ok(PathEnsemble {
        paths,
        spec: *spec,
        params: *params,
    })
}

/// Calibration output: parameters, delta-method standard errors, and the
/// exact conditional Gaussian log-likelihood.
#[derive(Debug, Clone, Serialize)]
pub struct CalibratedVasicek {
    pub params: VasicekParams,
    pub std_errors: VasicekParams,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub dt: f64,
}

/// Maximum-likelihood calibration from a sampled series.
///
/// The exact transition makes the sampled process an AR(1):
/// r_t = a r_{t-1} + b + e, e ~ N(0, s²), with a = e^{-k dt},
/// b = theta (1 - a), s² = sigma² (1 - a²) / (2k). The conditional MLE for
/// (a, b, s²) is ordinary least squares with the MLE variance, mapped back
/// through those identities. Standard errors come from the observed
/// information of the AR(1) likelihood, delta-method mapped to (k, theta,
/// sigma).
pub fn calibrate_mle(series: &TimeSeries, dt: f64) -> Result<CalibratedVasicek> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let r = series.values();
    if r.len() < 50 {
        return Err(Error::SeriesTooShort {
            name: series.name().to_string(),
            len: r.len(),
            need: 50,
        });
    }
    let n = r.len() - 1;
    let nf = n as f64;
    let x = &r[..n];
    let y = &r[1..];
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let denom = nf * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::ZeroVariance(series.name().to_string()));
    }
    let a = (nf * sxy - sx * sy) / denom;
    let b = (sy - a * sx) / nf;
    let ssr: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(xi, yi)| {
            let e = yi - a * xi - b;
            e * e
        })
        .sum();
    let s2 = ssr / nf;
    if a >= 1.0 {
        return Err(Error::NonStationarySample(a));
    }
    if a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "AR(1) coefficient {a} <= 0; sampling interval too coarse for a Vasicek fit"
        )));
    }
    if s2 < 1e-16 {
        return Err(Error::DegenerateVariance(s2));
    }

    let k = -a.ln() / dt;
    let theta = b / (1.0 - a);
    let sigma2 = s2 * 2.0 * k / (1.0 - (-2.0 * k * dt).exp());
    let params = VasicekParams {
        k,
        theta,
        sigma: sigma2.sqrt(),
    };

    // Exact conditional Gaussian log-likelihood at the optimum.
    let log_likelihood =
        -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + s2.ln()) - ssr / (2.0 * s2);

    // Observed information for (a, b): X'X / s2; for s2: n / (2 s2²).
    let mut info = Mat::zeros(2, 2);
    info.set(0, 0, sxx / s2);
    info.set(0, 1, sx / s2);
    info.set(1, 0, sx / s2);
    info.set(1, 1, nf / s2);
    let cov_ab = inverse(&info)?;
    let var_s2 = 2.0 * s2 * s2 / nf;

    // Delta method: numeric Jacobian of (k, theta, sigma) in (a, b, s2).
    let map = |a: f64, b: f64, s2: f64| -> [f64; 3] {
        let k = -a.ln() / dt;
        let theta = b / (1.0 - a);
        let sigma = (s2 * 2.0 * k / (1.0 - (-2.0 * k * dt).exp())).sqrt();
        [k, theta, sigma]
    };
    let base = map(a, b, s2);
    let h = [a.abs().max(1e-4) * 1e-6, b.abs().max(1e-4) * 1e-6, s2 * 1e-6];
    let mut jac = [[0.0f64; 3]; 3]; // rows: outputs, cols: inputs (a, b, s2)
    for (col, &hi) in h.iter().enumerate() {
        let mut up = [a, b, s2];
        up[col] += hi;
        let fu = map(up[0], up[1], up[2]);
        let mut dn = [a, b, s2];
        dn[col] -= hi;
        let fd = map(dn[0], dn[1], dn[2]);
        for row in 0..3 {
            jac[row][col] = (fu[row] - fd[row]) / (2.0 * hi);
        }
    }
    let var_out = |row: usize| -> f64 {
        let j = jac[row];
        j[0] * j[0] * cov_ab.get(0, 0)
            + 2.0 * j[0] * j[1] * cov_ab.get(0, 1)
            + j[1] * j[1] * cov_ab.get(1, 1)
            + j[2] * j[2] * var_s2
    };
    let std_errors = VasicekParams {
        k: var_out(0).max(0.0).sqrt(),
        theta: var_out(1).max(0.0).sqrt(),
        sigma: var_out(2).max(0.0).sqrt(),
    };
    let _ = base;

    Ok(CalibratedVasicek {
        params,
        std_errors,
        log_likelihood,
        n_obs: n,
        dt,
    })
}

/// Direct evaluation of the conditional Gaussian log-likelihood at arbitrary
/// parameters; used to confirm the closed form sits at a local optimum.
pub fn log_likelihood(series: &TimeSeries, params: &VasicekParams, dt: f64) -> f64 {
    let r = series.values();
    let a = (-params.k * dt).exp();
    let b = params.theta * (1.0 - a);
    let s2 = params.conditional_variance(dt);
    let n = r.len() - 1;
    let mut ll = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI).ln() + s2.ln());
    for t in 1..r.len() {
        let e = r[t] - a * r[t - 1] - b;
        ll -= e * e / (2.0 * s2);
    }
    ll
}

/// The four scenario sweeps reported for the model: baseline calibration,
/// start displaced to -1%, mean reversion scaled 10x, volatility scaled 5x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Baseline,
    DisplacedStart,
    FastReversion,
    HighVolatility,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Baseline,
        Scenario::DisplacedStart,
        Scenario::FastReversion,
        Scenario::HighVolatility,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::DisplacedStart => "r0_minus_1pct",
            Scenario::FastReversion => "kappa_x10",
            Scenario::HighVolatility => "sigma_x5",
        }
    }

    /// Applies the sweep to baseline parameters and start level.
    pub fn apply(&self, params: &VasicekParams, r0: f64) -> (VasicekParams, f64) {
        match self {
            Scenario::Baseline => (*params, r0),
            Scenario::DisplacedStart => (*params, -1.0),
            Scenario::FastReversion => (
                VasicekParams {
                    k: params.k * 10.0,
                    ..*params
                },
                r0,
            ),
            Scenario::HighVolatility => (
                VasicekParams {
                    sigma: params.sigma * 5.0,
                    ..*params
                },
                r0,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VasicekParams {
        VasicekParams::new(0.5, 1.75, 0.2).unwrap()
    }

    #[test]
    fn sigma_zero_limit_is_deterministic_decay() {
        let p = VasicekParams::new(0.8, 1.5, 1e-12).unwrap();
        let spec = SimulationSpec {
            r0: -1.0,
            dt: 1.0 / 52.0,
            n_steps: 208,
            n_paths: 1,
            seed: 1,
        };
        let e = simulate_paths(&p, &spec).unwrap();
        for (i, v) in e.paths[0].iter().enumerate() {
            let t = i as f64 * spec.dt;
            let want = spec.r0 * (-p.k * t).exp() + p.theta * (1.0 - (-p.k * t).exp());
            assert!((v - want).abs() < 1e-6, "step {i}: {v} vs {want}");
        }
    }

    #[test]
    fn ensemble_matches_conditional_moments() {
        let p = params();
        let spec = SimulationSpec {
            r0: -1.0,
            dt: 1.0 / 52.0,
            n_steps: 104, // two years
            n_paths: 10_000,
            seed: 42,
        };
        let e = simulate_paths(&p, &spec).unwrap();
        let t = 2.0;
        let mean_want = p.conditional_mean(spec.r0, t);
        let var_want = p.conditional_variance(t);
        let mean_got = e.mean_at(spec.n_steps);
        let var_got = e.variance_at(spec.n_steps);
        let se = (var_want / spec.n_paths as f64).sqrt();
        assert!(
            (mean_got - mean_want).abs() < 3.0 * se,
            "mean {mean_got} vs {mean_want} (se {se})"
        );
        assert!(
            (var_got - var_want).abs() < 0.05 * var_want,
            "var {var_got} vs {var_want}"
        );
    }

    #[test]
    fn monte_carlo_error_shrinks_with_path_count() {
        let p = params();
        let t = 1.0;
        let mean_want = p.conditional_mean(0.0, t);
        let mut errs = Vec::new();
        for &n_paths in &[1_000usize, 10_000] {
            // RMS of the ensemble-mean error over seeds estimates the Monte
            // Carlo standard error.
            let mut acc = 0.0;
            let seeds = 20;
            for seed in 0..seeds {
                let spec = SimulationSpec {
                    r0: 0.0,
                    dt: 1.0 / 52.0,
                    n_steps: 52,
                    n_paths,
                    seed: 100 + seed,
                };
                let e = simulate_paths(&p, &spec).unwrap();
                acc += (e.mean_at(spec.n_steps) - mean_want).powi(2);
            }
            errs.push((acc / seeds as f64).sqrt());
        }
        // Ten times the paths should shrink the error about sqrt(10) = 3.16x;
        // leave slack for the chi-squared noise of a 20-seed estimate.
        assert!(
            errs[1] < errs[0] / 1.8,
            "errors did not shrink at the Monte Carlo rate: {errs:?}"
        );
    }

    #[test]
    fn pull_direction_follows_theta() {
        let p = params();
        for &(r0, positive) in &[(3.0, false), (0.5, true)] {
            let spec = SimulationSpec {
                r0,
                dt: 1.0 / 252.0,
                n_steps: 1,
                n_paths: 4000,
                seed: 7,
            };
            let e = simulate_paths(&p, &spec).unwrap();
            let mean_inc = (0..spec.n_paths)
                .map(|i| e.paths[i][1] - e.paths[i][0])
                .sum::<f64>()
                / spec.n_paths as f64;
            assert_eq!(mean_inc > 0.0, positive, "r0 {r0} increment {mean_inc}");
        }
    }

    #[test]
    fn long_horizon_variance_reaches_stationary_level() {
        let p = params();
        let spec = SimulationSpec {
            r0: 1.75,
            dt: 0.25,
            n_steps: 80, // 20 years >> 1/k
            n_paths: 20_000,
            seed: 11,
        };
        let e = simulate_paths(&p, &spec).unwrap();
        let want = p.stationary_variance();
        let got = e.variance_at(spec.n_steps);
        assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    }

    #[test]
    fn seed_determinism_and_path_invariance() {
        let p = params();
        let spec = SimulationSpec {
            r0: 0.0,
            dt: 1.0 / 252.0,
            n_steps: 30,
            n_paths: 4,
            seed: 99,
        };
        let a = simulate_paths(&p, &spec).unwrap();
        let b = simulate_paths(&p, &spec).unwrap();
        assert_eq!(a.paths, b.paths);
        // Path i unchanged when more paths are requested.
        let wider = simulate_paths(
            &p,
            &SimulationSpec {
                n_paths: 9,
                ..spec
            },
        )
        .unwrap();
        for i in 0..4 {
            assert_eq!(a.paths[i], wider.paths[i], "path {i} shifted");
        }
    }

    #[test]
    fn calibration_recovers_simulated_parameters() {
        let truth = VasicekParams::new(1.2, 1.5, 0.4).unwrap();
        let spec = SimulationSpec {
            r0: 1.5,
            dt: 1.0 / 252.0,
            n_steps: 20_000,
            n_paths: 1,
            seed: 33,
        };
        let e = simulate_paths(&truth, &spec).unwrap();
        let series = TimeSeries::from_values("sim", e.paths[0].clone()).unwrap();
        let cal = calibrate_mle(&series, spec.dt).unwrap();
        assert!(
            (cal.params.theta - truth.theta).abs() < 0.05,
            "theta {}",
            cal.params.theta
        );
        assert!(
            (cal.params.sigma - truth.sigma).abs() < 0.02,
            "sigma {}",
            cal.params.sigma
        );
        assert!(
            (cal.params.k - truth.k).abs() < 0.25 * truth.k,
            "k {}",
            cal.params.k
        );
        assert!(cal.std_errors.theta > 0.0 && cal.std_errors.k > 0.0);
    }

    #[test]
    fn calibration_rejects_deterministic_input() {
        let values: Vec<f64> = (0..200).map(|t| (-(t as f64) / 50.0).exp()).collect();
        let s = TimeSeries::from_values("decay", values).unwrap();
        assert!(matches!(
            calibrate_mle(&s, 1.0 / 252.0),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn calibration_sits_at_likelihood_maximum() {
        let truth = VasicekParams::new(0.8, 1.0, 0.3).unwrap();
        let spec = SimulationSpec {
            r0: 1.0,
            dt: 1.0 / 252.0,
            n_steps: 5_000,
            n_paths: 1,
            seed: 29,
        };
        let e = simulate_paths(&truth, &spec).unwrap();
        let series = TimeSeries::from_values("sim", e.paths[0].clone()).unwrap();
        let cal = calibrate_mle(&series, spec.dt).unwrap();
        let at_opt = log_likelihood(&series, &cal.params, spec.dt);
        assert!((at_opt - cal.log_likelihood).abs() < 1e-6);
        for scale in [0.99, 1.01] {
            for dim in 0..3 {
                let mut p = cal.params;
                match dim {
                    0 => p.k *= scale,
                    1 => p.theta *= scale,
                    _ => p.sigma *= scale,
                }
                let ll = log_likelihood(&series, &p, spec.dt);
                assert!(
                    ll <= at_opt + 1e-9,
                    "perturbed ({dim}, {scale}) loglik {ll} exceeds optimum {at_opt}"
                );
            }
        }
    }

    #[test]
    fn fast_reversion_scenario_reaches_theta_sooner() {
        let base = params();
        let spec = SimulationSpec {
            r0: -1.0,
            dt: 1.0 / 252.0,
            n_steps: 2520,
            n_paths: 10,
            seed: 55,
        };
        let (fast, r0) = Scenario::FastReversion.apply(&base, spec.r0);
        let base_e = simulate_paths(&base, &spec).unwrap();
        let fast_e = simulate_paths(&fast, &SimulationSpec { r0, ..spec }).unwrap();
        let steps_to_band = |e: &PathEnsemble| -> usize {
            for s in 0..=e.spec.n_steps {
                if (e.mean_at(s) - e.params.theta).abs() < 0.1 {
                    return s;
                }
            }
            e.spec.n_steps + 1
        };
        let base_steps = steps_to_band(&base_e);
        let fast_steps = steps_to_band(&fast_e);
        assert!(
            fast_steps < base_steps,
            "fast {fast_steps} vs base {base_steps}"
        );
    }
}
