//! Monahan-style reparameterization between unconstrained optimizer space and
//! stationary AR / invertible MA coefficients.
//!
//! Unconstrained values map through tanh to partial autocorrelations in
//! (-1, 1), then a Levinson-style recursion produces polynomial coefficients
//! whose roots are guaranteed outside the unit circle. The inverse runs the
//! recursion backwards so fits can be warm-started from provisional
//! coefficient estimates.

/// Cap on partial-correlation magnitude; keeps the implied roots a resolvable
/// distance from the unit circle.
const PACF_CAP: f64 = 0.9999;

/// Unconstrained -> coefficients with roots outside the unit circle.
pub fn unconstrained_to_coef(z: &[f64]) -> Vec<f64> {
    let p = z.len();
    if p == 0 {
        return Vec::new();
    }
    let r: Vec<f64> = z.iter().map(|v| PACF_CAP * v.tanh()).collect();
    let mut a = vec![0.0; p];
    for k in 0..p {
        let mut next = a.clone();
        next[k] = r[k];
        for i in 0..k {
            next[i] = a[i] - r[k] * a[k - 1 - i];
        }
        a = next;
    }
    a
}

/// Coefficients -> unconstrained, failing when the polynomial is not strictly
/// stationary/invertible (a partial correlation outside (-1, 1)).
pub fn coef_to_unconstrained(coef: &[f64]) -> Option<Vec<f64>> {
    let p = coef.len();
    if p == 0 {
        return Some(Vec::new());
    }
    let mut a = coef.to_vec();
    let mut r = vec![0.0; p];
    for k in (0..p).rev() {
        let rk = a[k];
        if rk.abs() >= PACF_CAP {
            return None;
        }
        r[k] = rk;
        if k > 0 {
            let denom = 1.0 - rk * rk;
            let prev: Vec<f64> = (0..k).map(|i| (a[i] + rk * a[k - 1 - i]) / denom).collect();
            a = prev;
        }
    }
    Some(
        r.iter()
            .map(|v| {
                let u = v / PACF_CAP;
                0.5 * ((1.0 + u) / (1.0 - u)).ln()
            })
            .collect(),
    )
}

/// Largest root modulus of the companion matrix of 1 - c1 L - ... - cp L^p;
/// stationarity/invertibility means this stays below one.
pub fn companion_spectral_radius(coef: &[f64]) -> f64 {
    let p = coef.len();
    if p == 0 {
        return 0.0;
    }
    let mut companion = crate::linalg::Mat::zeros(p, p);
    for (j, &c) in coef.iter().enumerate() {
        companion.set(0, j, c);
    }
    for i in 1..p {
        companion.set(i, i - 1, 1.0);
    }
    crate::linalg::spectral_radius(&companion, 600)
}
