//! Dense linear algebra kernels.
//!
//! Row-major `Mat` plus the factorizations the estimators need: Cholesky for
//! SPD solves, Gauss-Jordan with partial pivoting for general small systems,
//! and a cyclic Jacobi eigendecomposition for symmetric matrices. Dimensions
//! in this crate stay modest (the largest Gram matrix is a few hundred square)
//! so simple O(n³) kernels are the right tool.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let urow = out.row_mut(i);
                for (j, &b) in orow.iter().enumerate() {
                    urow[j] += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Copy of rows [from, to).
    pub fn slice_rows(&self, from: usize, to: usize) -> Mat {
        assert!(from <= to && to <= self.rows);
        Mat {
            rows: to - from,
            cols: self.cols,
            data: self.data[from * self.cols..to * self.cols].to_vec(),
        }
    }

    /// Leading principal submatrix of size n.
    pub fn leading(&self, n: usize) -> Mat {
        assert!(n <= self.rows && n <= self.cols);
        let mut out = Mat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(r, c));
            }
        }
        out
    }
}

/// Cholesky factor L of an SPD matrix, lower triangular with positive diagonal,
/// such that L·Lᵀ reproduces the input.
pub fn cholesky(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky requires square input, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let asym = a.max_abs_asymmetry();
    if asym > 1e-8 {
        return Err(Error::NotSymmetric(asym));
    }
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: sum });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves A·x = b for SPD A via Cholesky.
pub fn solve_spd(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a)?;
    Ok(chol_solve(&l, b))
}

/// Solves L·Lᵀ·x = b given the Cholesky factor.
pub fn chol_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// ln det A for SPD A, via the Cholesky diagonal.
pub fn ln_det_spd(a: &Mat) -> Result<f64> {
    let l = cholesky(a)?;
    Ok((0..a.rows()).map(|i| l.get(i, i).ln()).sum::<f64>() * 2.0)
}

/// Solves A·x = b by Gauss-Jordan elimination with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m.get(r, col).abs() > m.get(piv, col).abs() {
                piv = r;
            }
        }
        if m.get(piv, col).abs() < 1e-300 {
            return Err(Error::SingularMatrix(format!("zero pivot in column {col}")));
        }
        if piv != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(piv, c));
                m.set(piv, c, tmp);
            }
            x.swap(col, piv);
        }
        let d = m.get(col, col);
        for c in 0..n {
            m.set(col, c, m.get(col, c) / d);
        }
        x[col] /= d;
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m.get(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m.set(r, c, m.get(r, c) - f * m.get(col, c));
            }
            x[r] -= f * x[col];
        }
    }
    Ok(x)
}

/// Matrix inverse by Gauss-Jordan; intended for small matrices (standard
/// errors, delta method).
pub fn inverse(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    let mut m = a.clone();
    let mut inv = Mat::identity(n);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m.get(r, col).abs() > m.get(piv, col).abs() {
                piv = r;
            }
        }
        if m.get(piv, col).abs() < 1e-300 {
            return Err(Error::SingularMatrix(format!("zero pivot in column {col}")));
        }
        if piv != col {
            for c in 0..n {
                let t = m.get(col, c);
                m.set(col, c, m.get(piv, c));
                m.set(piv, c, t);
                let t = inv.get(col, c);
                inv.set(col, c, inv.get(piv, c));
                inv.set(piv, c, t);
            }
        }
        let d = m.get(col, col);
        for c in 0..n {
            m.set(col, c, m.get(col, c) / d);
            inv.set(col, c, inv.get(col, c) / d);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m.get(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m.set(r, c, m.get(r, c) - f * m.get(col, c));
                inv.set(r, c, inv.get(r, c) - f * inv.get(col, c));
            }
        }
    }
    Ok(inv)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending with orthonormal eigenvectors as the
/// columns of the returned matrix, in matching order.
pub fn eigen_symmetric(a: &Mat, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, Mat)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigen_symmetric requires square input, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let asym = a.max_abs_asymmetry();
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let mut converged = false;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for r in 0..n {
            for c in (r + 1)..n {
                off = off.max(m.get(r, c).abs());
            }
        }
        if off < tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < tol * 1e-3 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        let mut off = 0.0f64;
        for r in 0..n {
            for c in (r + 1)..n {
                off = off.max(m.get(r, c).abs());
            }
        }
        if off >= tol {
            return Err(Error::EigenNoConvergence(max_sweeps));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_c, v.get(r, old_c));
        }
    }
    Ok((values, vectors))
}

/// Ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct Ols {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    /// Standard errors under homoskedastic errors, using SSR/(n - k).
    pub std_errors: Vec<f64>,
    pub n: usize,
}

/// Solves min ||y - X b||² through the normal equations. `x` is n×k with
/// n >= k; collinear columns surface as a singularity error.
pub fn least_squares(x: &Mat, y: &[f64]) -> Result<Ols> {
    let n = x.rows();
    let k = x.cols();
    assert_eq!(n, y.len());
    if n < k {
        return Err(Error::DimensionMismatch(format!(
            "least_squares with {n} rows and {k} regressors"
        )));
    }
    let mut xtx = Mat::zeros(k, k);
    let mut xty = vec![0.0; k];
    for r in 0..n {
        let row = x.row(r);
        for i in 0..k {
            xty[i] += row[i] * y[r];
            for j in i..k {
                xtx.add_to(i, j, row[i] * row[j]);
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            let v = xtx.get(j, i);
            xtx.set(i, j, v);
        }
    }
    let coefficients = solve_spd(&xtx, &xty).map_err(|_| {
        Error::SingularMatrix("collinear regressors in least squares".to_string())
    })?;
    let mut residuals = Vec::with_capacity(n);
    let mut ssr = 0.0;
    for r in 0..n {
        let fitted: f64 = x
            .row(r)
            .iter()
            .zip(coefficients.iter())
            .map(|(a, b)| a * b)
            .sum();
        let e = y[r] - fitted;
        ssr += e * e;
        residuals.push(e);
    }
    let dof = (n - k).max(1) as f64;
    let sigma2 = ssr / dof;
    let xtx_inv = inverse(&xtx)?;
    let std_errors = (0..k).map(|i| (sigma2 * xtx_inv.get(i, i)).sqrt()).collect();
    Ok(Ols {
        coefficients,
        residuals,
        ssr,
        std_errors,
        n,
    })
}

/// Spectral radius estimate by power iteration with geometric-mean growth
/// tracking; robust to complex dominant pairs.
pub fn spectral_radius(a: &Mat, iterations: usize) -> f64 {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    if n == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.3 * ((i * 2654435761) % 97) as f64 / 97.0)
        .collect();
    let norm0 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in x.iter_mut() {
        *v /= norm0;
    }
    let mut log_growth = 0.0;
    let burn = iterations / 4;
    let mut counted = 0usize;
    for it in 0..iterations {
        let y = a.matvec(&x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        if it >= burn {
            log_growth += norm.ln();
            counted += 1;
        }
        x = y.into_iter().map(|v| v / norm).collect();
    }
    if counted == 0 {
        return 0.0;
    }
    (log_growth / counted as f64).exp()
}
