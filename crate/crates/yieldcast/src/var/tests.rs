use super::*;
use crate::data::{Panel, TimeSeries};
use crate::rng::Rng64;
use chrono::NaiveDate;

fn panel_from(cols: Vec<(&str, Vec<f64>)>) -> Panel {
    let n = cols[0].1.len();
    let start = NaiveDate::from_ymd_opt(2011, 1, 1).unwrap();
    Panel::new(
        (0..n as i64).map(|i| start + chrono::Duration::days(i)).collect(),
        cols.iter().map(|(nm, _)| nm.to_string()).collect(),
        cols.into_iter().map(|(_, v)| v).collect(),
    )
    .unwrap()
}

/// Simulates a bivariate VAR(1) with intercept `a`, matrix `b`, and shock
/// covariance given by its Cholesky factor `chol`.
pub(crate) fn simulate_var1(
    a: [f64; 2],
    b: [[f64; 2]; 2],
    chol: [[f64; 2]; 2],
    n: usize,
    seed: u64,
) -> Panel {
    let mut rng = Rng64::new(seed);
    let burn = 200;
    let mut y = [0.0f64, 0.0];
    let mut c0 = Vec::with_capacity(n);
    let mut c1 = Vec::with_capacity(n);
    for t in 0..n + burn {
        let z0 = rng.normal();
        let z1 = rng.normal();
        let u0 = chol[0][0] * z0;
        let u1 = chol[1][0] * z0 + chol[1][1] * z1;
        let next = [
            a[0] + b[0][0] * y[0] + b[0][1] * y[1] + u0,
            a[1] + b[1][0] * y[0] + b[1][1] * y[1] + u1,
        ];
        y = next;
        if t >= burn {
            c0.push(y[0]);
            c1.push(y[1]);
        }
    }
    panel_from(vec![("y1", c0), ("y2", c1)])
}

#[test]
fn var1_coefficients_recovered() {
    let b = [[0.5, 0.2], [-0.1, 0.4]];
    let panel = simulate_var1([0.3, -0.2], b, [[1.0, 0.0], [0.3, 0.9]], 5000, 7);
    let fit = fit_var(&panel, 1).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!(
                (fit.coefficients[0].get(i, j) - b[i][j]).abs() < 0.05,
                "B[{i}][{j}] = {}",
                fit.coefficients[0].get(i, j)
            );
        }
    }
    assert!((fit.intercepts[0] - 0.3).abs() < 0.08);
    assert_eq!(fit.params_per_equation(), 3);
    // Residual covariance should be near chol·chol'.
    let want = [[1.0, 0.3], [0.3, 0.09 + 0.81]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((fit.residual_cov_mle.get(i, j) - want[i][j]).abs() < 0.08);
        }
    }
}

#[test]
fn white_noise_panel_has_null_coefficients() {
    let mut rng = Rng64::new(17);
    let n = 4000;
    let panel = panel_from(vec![
        ("a", (0..n).map(|_| rng.normal()).collect()),
        ("b", (0..n).map(|_| rng.normal()).collect()),
        ("c", (0..n).map(|_| rng.normal()).collect()),
    ]);
    let fit = fit_var(&panel, 2).unwrap();
    let k = 3;
    let mut within = 0;
    let mut total = 0;
    for eq in 0..k {
        for lag in 0..2 {
            for j in 0..k {
                let coef = fit.coefficients[lag].get(eq, j);
                let se = fit.std_errors[eq][1 + lag * k + j];
                total += 1;
                if coef.abs() <= 3.0 * se {
                    within += 1;
                }
            }
        }
    }
    assert!(
        within * 100 >= total * 95,
        "only {within}/{total} coefficients within 3 standard errors"
    );
}

#[test]
fn residual_covariance_matches_brute_force() {
    let panel = simulate_var1([0.1, 0.0], [[0.6, 0.1], [0.2, 0.3]], [[0.8, 0.0], [0.2, 0.5]], 800, 23);
    let fit = fit_var(&panel, 1).unwrap();
    let k = 2;
    let n_eff = fit.residuals.n_rows();
    for i in 0..k {
        for j in 0..k {
            let ei = fit.residuals.column_at(i);
            let ej = fit.residuals.column_at(j);
            let want: f64 =
                ei.iter().zip(ej.iter()).map(|(a, b)| a * b).sum::<f64>() / n_eff as f64;
            assert!(
                (fit.residual_cov_mle.get(i, j) - want).abs() < 1e-10,
                "cov[{i}][{j}]"
            );
        }
    }
}

#[test]
fn lag_selection_recovers_var1_order() {
    let mut hits = 0;
    for seed in 0..10 {
        let panel = simulate_var1(
            [0.0, 0.0],
            [[0.5, 0.2], [-0.2, 0.4]],
            [[1.0, 0.0], [0.0, 1.0]],
            3000,
            100 + seed,
        );
        let sel = select_lag_order(&panel, 6).unwrap();
        if sel.selected == 1 {
            hits += 1;
        }
        assert!(!sel.weak_evidence, "real dynamics flagged weak");
    }
    assert!(hits >= 8, "lag 1 selected {hits}/10");
}

#[test]
fn white_noise_selects_lag_one_with_weak_evidence() {
    let mut rng = Rng64::new(31);
    let n = 3000;
    let panel = panel_from(vec![
        ("a", (0..n).map(|_| rng.normal()).collect()),
        ("b", (0..n).map(|_| rng.normal()).collect()),
    ]);
    let sel = select_lag_order(&panel, 6).unwrap();
    assert_eq!(sel.selected, 1, "trace {:?}", sel.trace);
    assert!(sel.weak_evidence);
    // The trace is near-flat: spread well under one penalty unit per lag.
    let aics: Vec<f64> = sel.trace.iter().map(|(_, a)| *a).collect();
    let spread = aics.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - aics.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 0.05, "spread {spread}");
}

#[test]
fn zero_dynamics_forecast_is_the_intercept() {
    let mut rng = Rng64::new(37);
    let n = 1000;
    let panel = panel_from(vec![
        ("a", (0..n).map(|_| 2.0 + 0.01 * rng.normal()).collect()),
        ("b", (0..n).map(|_| -1.0 + 0.01 * rng.normal()).collect()),
    ]);
    let mut fit = fit_var(&panel, 1).unwrap();
    // Zero out the (tiny) estimated dynamics to isolate the intercept path.
    fit.coefficients[0] = Mat::zeros(2, 2);
    fit.intercepts = vec![2.0, -1.0];
    let fc = forecast_iterative(&fit, &panel, 5).unwrap();
    for row in fc {
        assert!((row[0] - 2.0).abs() < 1e-12);
        assert!((row[1] + 1.0).abs() < 1e-12);
    }
}

#[test]
fn iterative_forecast_matches_matrix_power_oracle() {
    let b = [[0.5, 0.2], [-0.1, 0.4]];
    let a = [0.3, -0.2];
    let panel = simulate_var1(a, b, [[1.0, 0.0], [0.3, 0.9]], 600, 41);
    let fit = fit_var(&panel, 1).unwrap();
    let h = 12;
    let fc = forecast_iterative(&fit, &panel, h).unwrap();
    // Oracle: y_{t+h} = alpha + B y_{t+h-1} applied recursively with the
    // fitted quantities.
    let bm = &fit.coefficients[0];
    let last = panel.row(panel.n_rows() - 1);
    let mut y = vec![last[0], last[1]];
    for step in 0..h {
        let y_next = vec![
            fit.intercepts[0] + bm.get(0, 0) * y[0] + bm.get(0, 1) * y[1],
            fit.intercepts[1] + bm.get(1, 0) * y[0] + bm.get(1, 1) * y[1],
        ];
        assert!((fc[step][0] - y_next[0]).abs() < 1e-12);
        assert!((fc[step][1] - y_next[1]).abs() < 1e-12);
        y = y_next;
    }
}

#[test]
fn rolling_forecast_feeds_actuals() {
    let panel = simulate_var1([0.0, 0.0], [[0.7, 0.0], [0.0, 0.5]], [[1.0, 0.0], [0.0, 1.0]], 300, 43);
    let fit = fit_var(&panel, 1).unwrap();
    let preds = forecast_rolling(&fit, &panel, 250).unwrap();
    assert_eq!(preds.n_rows(), 50);
    // Each prediction uses the actual previous row.
    let b = &fit.coefficients[0];
    for (row, t) in (250..panel.n_rows()).enumerate() {
        let prev = panel.row(t - 1);
        let want0 = fit.intercepts[0] + b.get(0, 0) * prev[0] + b.get(0, 1) * prev[1];
        assert!((preds.column_at(0)[row] - want0).abs() < 1e-12);
    }
}

#[test]
fn irf_impact_equals_cholesky_factor() {
    let panel = simulate_var1([0.0, 0.0], [[0.5, 0.1], [0.2, 0.3]], [[1.0, 0.0], [0.5, 0.8]], 2000, 47);
    let fit = fit_var(&panel, 1).unwrap();
    let r = irf(&fit, 10, None, false).unwrap();
    let p = cholesky(&fit.residual_cov_mle).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((r.responses[0].get(i, j) - p.get(i, j)).abs() < 1e-14);
        }
    }
}

#[test]
fn irf_matches_bh_p_closed_form() {
    let panel = simulate_var1([0.0, 0.0], [[0.5, 0.2], [-0.1, 0.4]], [[1.0, 0.0], [0.0, 1.0]], 3000, 53);
    let fit = fit_var(&panel, 1).unwrap();
    let h = 10;
    let r = irf(&fit, h, None, false).unwrap();
    let p = cholesky(&fit.residual_cov_mle).unwrap();
    // Closed form for VAR(1): responses[h] = B^h P.
    let mut bh = Mat::identity(2);
    for step in 0..=h {
        let want = bh.matmul(&p);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (r.responses[step].get(i, j) - want.get(i, j)).abs() < 1e-12,
                    "h={step}"
                );
            }
        }
        bh = fit.coefficients[0].matmul(&bh);
    }
    // Stationary fit: responses decay markedly by horizon 10.
    let max_abs = |m: &Mat| {
        m.data()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    };
    assert!(max_abs(&r.responses[10]) < 0.05 * max_abs(&r.responses[0]));
}

#[test]
fn fevd_identity_for_decoupled_system() {
    let mut rng = Rng64::new(59);
    let n = 1500;
    let panel = panel_from(vec![
        ("a", (0..n).map(|_| rng.normal()).collect()),
        ("b", (0..n).map(|_| rng.normal()).collect()),
    ]);
    let mut fit = fit_var(&panel, 1).unwrap();
    fit.coefficients[0] = Mat::zeros(2, 2);
    fit.residual_cov_mle = Mat::identity(2);
    let d = fevd(&fit, 6, None).unwrap();
    for h in 0..=6 {
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d.shares[h].get(i, j) - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn fevd_rows_sum_to_one_and_converge() {
    let panel = simulate_var1([0.0, 0.0], [[0.5, 0.2], [-0.1, 0.4]], [[1.0, 0.0], [0.4, 0.8]], 4000, 61);
    let fit = fit_var(&panel, 1).unwrap();
    let d = fevd(&fit, 201, None).unwrap();
    for h in [0usize, 5, 50, 201] {
        for i in 0..2 {
            let sum: f64 = (0..2).map(|j| d.shares[h].get(i, j)).sum();
            assert!((sum - 1.0).abs() < 1e-8, "h={h} row {i} sums to {sum}");
            for j in 0..2 {
                assert!(d.shares[h].get(i, j) >= 0.0);
            }
        }
    }
    // Long-horizon convergence.
    for i in 0..2 {
        for j in 0..2 {
            assert!((d.shares[201].get(i, j) - d.shares[200].get(i, j)).abs() < 1e-6);
        }
    }
}

#[test]
fn fevd_matches_monte_carlo_decomposition() {
    let panel = simulate_var1([0.0, 0.0], [[0.5, 0.2], [-0.1, 0.4]], [[1.0, 0.0], [0.4, 0.8]], 4000, 67);
    let fit = fit_var(&panel, 1).unwrap();
    let horizon = 4;
    let d = fevd(&fit, horizon, None).unwrap();
    let p = cholesky(&fit.residual_cov_mle).unwrap();
    let b = &fit.coefficients[0];
    // Empirical decomposition: accumulate h-step forecast errors driven by
    // each orthogonalized shock independently.
    let draws = 200_000;
    let mut rng = Rng64::new(68);
    let mut var_by_shock = [[[0.0f64; 2]; 2]; 5]; // [h][variable][shock]
    for _ in 0..draws {
        let mut state = [[0.0f64; 2]; 2]; // per-shock error path
        for h in 0..=horizon {
            for shock in 0..2 {
                // Propagate previous error and add this period's shock.
                let prev = state[shock];
                let z = rng.normal();
                let mut next = [
                    b.get(0, 0) * prev[0] + b.get(0, 1) * prev[1],
                    b.get(1, 0) * prev[0] + b.get(1, 1) * prev[1],
                ];
                next[0] += p.get(0, shock) * z;
                next[1] += p.get(1, shock) * z;
                state[shock] = next;
                var_by_shock[h][0][shock] += next[0] * next[0];
                var_by_shock[h][1][shock] += next[1] * next[1];
            }
        }
    }
    for h in 0..=horizon {
        for i in 0..2 {
            let total: f64 = var_by_shock[h][i][0] + var_by_shock[h][i][1];
            for j in 0..2 {
                let share = var_by_shock[h][i][j] / total;
                assert!(
                    (share - d.shares[h].get(i, j)).abs() < 0.01,
                    "h={h} var={i} shock={j}: mc {share} vs fevd {}",
                    d.shares[h].get(i, j)
                );
            }
        }
    }
}

#[test]
fn forecast_error_covariance_is_ordering_invariant() {
    let panel = simulate_var1([0.0, 0.0], [[0.5, 0.2], [-0.1, 0.4]], [[1.0, 0.0], [0.4, 0.8]], 2500, 71);
    let fit = fit_var(&panel, 1).unwrap();
    // Total forecast-error covariance from responses in each ordering.
    let total_from = |ordering: Option<&[&str]>| -> Mat {
        let r = irf(&fit, 8, ordering, false).unwrap();
        let perm: Vec<usize> = r
            .ordering
            .iter()
            .map(|n| fit.variable_names.iter().position(|v| v == n).unwrap())
            .collect();
        let k = 2;
        let mut acc = Mat::zeros(k, k);
        for theta in &r.responses {
            // Undo the permutation so both orderings live in fit space.
            for i in 0..k {
                for j in 0..k {
                    for s in 0..k {
                        acc.add_to(
                            perm[i],
                            perm[j],
                            theta.get(i, s) * theta.get(j, s),
                        );
                    }
                }
            }
        }
        acc
    };
    let a = total_from(None);
    let b = total_from(Some(&["y2", "y1"]));
    let direct = forecast_error_covariance(&fit, 8);
    for i in 0..2 {
        for j in 0..2 {
            assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-10);
            assert!((a.get(i, j) - direct.get(i, j)).abs() < 1e-10);
        }
    }
}

#[test]
fn explosive_fit_is_rejected_unless_forced() {
    let panel = simulate_var1([0.0, 0.0], [[0.5, 0.0], [0.0, 0.5]], [[1.0, 0.0], [0.0, 1.0]], 500, 73);
    let mut fit = fit_var(&panel, 1).unwrap();
    let mut explosive = Mat::zeros(2, 2);
    explosive.set(0, 0, 1.05);
    explosive.set(1, 1, 0.9);
    fit.coefficients[0] = explosive;
    assert!(matches!(
        irf(&fit, 5, None, false),
        Err(Error::ExplosiveFit(_))
    ));
    assert!(irf(&fit, 5, None, true).is_ok());
}

#[test]
fn durbin_watson_near_two_for_well_specified_fit() {
    let panel = simulate_var1([0.1, -0.1], [[0.5, 0.2], [-0.1, 0.4]], [[1.0, 0.0], [0.3, 0.9]], 6000, 79);
    let fit = fit_var(&panel, 1).unwrap();
    for (i, dw) in fit.dw.iter().enumerate() {
        assert!((dw - 2.0).abs() < 0.1, "equation {i}: dw {dw}");
    }
}

#[test]
fn cholesky_reconstructs_random_pd_7x7() {
    let mut rng = Rng64::new(83);
    for _ in 0..5 {
        let mut a = Mat::zeros(7, 7);
        for r in 0..7 {
            for c in 0..7 {
                a.set(r, c, rng.normal());
            }
        }
        let spd = a.matmul(&a.transpose());
        // Lift the diagonal to keep it comfortably positive definite.
        let mut spd = spd;
        for i in 0..7 {
            spd.add_to(i, i, 0.5);
        }
        let l = cholesky(&spd).unwrap();
        let back = l.matmul(&l.transpose());
        for r in 0..7 {
            for c in 0..7 {
                assert!((back.get(r, c) - spd.get(r, c)).abs() < 1e-10);
            }
        }
        for i in 0..7 {
            assert!(l.get(i, i) > 0.0);
        }
    }
}
