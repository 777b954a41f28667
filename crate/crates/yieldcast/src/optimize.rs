//! Unconstrained minimization: Nelder-Mead simplex for a robust start,
//! refined by BFGS with central-difference gradients. Model code maps
//! constrained parameters onto the unconstrained space first, so both
//! stages can roam freely.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead with standard reflection/expansion/contraction coefficients.
/// Stops when the relative spread of simplex values falls below `tol`.
pub fn nelder_mead<F>(
    f: &mut F,
    x0: &[f64],
    initial_step: f64,
    tol: f64,
    max_iter: usize,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if v[i].abs() > 1e-8 {
            initial_step * v[i].abs()
        } else {
            initial_step * 0.1
        };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = (values[worst] - values[best]).abs();
        let scale = values[best].abs().max(1.0);
        if spread / scale < tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst.
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for d in 0..n {
                centroid[d] += simplex[i][d] / n as f64;
            }
        }

        let reflect: Vec<f64> = (0..n)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[best] {
            let expand: Vec<f64> = (0..n)
                .map(|d| centroid[d] + gamma * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|d| centroid[d] + rho * (simplex[worst][d] - centroid[d]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                // Shrink toward the best vertex.
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for d in 0..n {
                        simplex[i][d] = best_point[d] + sigma * (simplex[i][d] - best_point[d]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    OptimResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Central-difference gradient.
pub fn numerical_gradient<F>(f: &mut F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let step = h * (1.0 + x[i].abs());
        xp[i] = x[i] + step;
        let up = f(&xp);
        xp[i] = x[i] - step;
        let down = f(&xp);
        xp[i] = x[i];
        g[i] = (up - down) / (2.0 * step);
    }
    g
}

/// Central-difference Hessian, for observed-information standard errors.
pub fn numerical_hessian<F>(f: &mut F, x: &[f64], h: f64) -> crate::linalg::Mat
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let mut hess = crate::linalg::Mat::zeros(n, n);
    let f0 = f(x);
    let steps: Vec<f64> = x.iter().map(|v| h * (1.0 + v.abs())).collect();
    let mut xp = x.to_vec();
    for i in 0..n {
        // Diagonal.
        xp[i] = x[i] + steps[i];
        let up = f(&xp);
        xp[i] = x[i] - steps[i];
        let down = f(&xp);
        xp[i] = x[i];
        hess.set(i, i, (up - 2.0 * f0 + down) / (steps[i] * steps[i]));
        for j in (i + 1)..n {
            xp[i] = x[i] + steps[i];
            xp[j] = x[j] + steps[j];
            let pp = f(&xp);
            xp[j] = x[j] - steps[j];
            let pm = f(&xp);
            xp[i] = x[i] - steps[i];
            let mm = f(&xp);
            xp[j] = x[j] + steps[j];
            let mp = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (pp - pm - mp + mm) / (4.0 * steps[i] * steps[j]);
            hess.set(i, j, v);
            hess.set(j, i, v);
        }
    }
    hess
}

/// BFGS with backtracking Armijo line search and numerical gradients.
/// Converges when the relative objective change drops below `tol`.
pub fn bfgs<F>(f: &mut F, x0: &[f64], tol: f64, max_iter: usize) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let grad_h = 1e-7;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = numerical_gradient(f, &x, grad_h);
    // Inverse Hessian approximation.
    let mut h_inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        // Direction d = -H_inv * g.
        let mut d = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                d[i] -= h_inv[i][j] * g[j];
            }
        }
        let slope: f64 = d.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // Reset to steepest descent if the approximation went bad.
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] = if i == j { 1.0 } else { 0.0 };
                }
                d[i] = -g[i];
            }
        }
        let slope: f64 = d.iter().zip(g.iter()).map(|(a, b)| a * b).sum();

        // Backtracking line search.
        let mut step = 1.0;
        let mut fx_new = fx;
        let mut x_new = x.clone();
        let mut improved = false;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            fx_new = f(&x_new);
            if fx_new.is_finite() && fx_new <= fx + 1e-4 * step * slope {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            converged = (fx - fx_new).abs() <= tol * fx.abs().max(1.0);
            break;
        }
        let g_new = numerical_gradient(f, &x_new, grad_h);

        // BFGS update.
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let yv: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(yv.iter()).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            // H = (I - rho s y') H (I - rho y s') + rho s s'
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += h_inv[i][j] * yv[j];
                }
            }
            let yhy: f64 = yv.iter().zip(hy.iter()).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }

        let rel_change = (fx - fx_new).abs() / fx.abs().max(1.0);
        x = x_new.clone();
        fx = fx_new;
        g = g_new;
        if rel_change < tol {
            converged = true;
            break;
        }
    }
    OptimResult {
        x,
        value: fx,
        iterations,
        converged,
    }
}

/// Simplex start followed by BFGS polish; the standard pipeline for the
/// likelihood fits in this crate.
pub fn minimize<F>(f: &mut F, x0: &[f64], max_iter: usize) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let stage1 = nelder_mead(f, x0, 0.1, 1e-8, max_iter);
    let stage2 = bfgs(f, &stage1.x, 1e-12, max_iter);
    let result = if stage2.value <= stage1.value {
        OptimResult {
            iterations: stage1.iterations + stage2.iterations,
            converged: stage1.converged || stage2.converged,
            ..stage2
        }
    } else {
        stage1
    };
    if !result.value.is_finite() {
        return Err(Error::NoConvergence {
            iterations: result.iterations,
            objective: result.value,
        });
    }
    Ok(result)
}
