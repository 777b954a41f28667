//! Principal component analysis of the yield-curve panel.
//!
//! Standardizes the panel, builds the covariance (correlation) matrix,
//! eigendecomposes it with cyclic Jacobi rotations, and reports explained
//! variance shares plus the component score series. The explained-variance
//! denominator sums over the retained components, so the shares always total
//! one; the share against all components is also reported since the two
//! conventions differ.

use serde::Serialize;

use crate::data::{fit_scaler, apply_scaler, Panel, ScalerKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Eigenvalues (descending) with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column i is the eigenvector for eigenvalues[i].
    pub eigenvectors: Mat,
}

/// PCA output: decomposition, explained-variance shares, and score series.
#[derive(Debug, Clone)]
pub struct PcaResult {
    pub decomposition: EigenDecomposition,
    /// lambda_i / sum(lambda over the retained components); sums to 1.
    pub explained_ratio: Vec<f64>,
    /// lambda_i / sum(lambda over all components).
    pub explained_ratio_total: Vec<f64>,
    /// PC1..PCk score series on the input calendar.
    pub scores: Panel,
}

/// Table row for the explained-variance report.
#[derive(Debug, Clone, Serialize)]
pub struct ExplainedRow {
    pub component: usize,
    pub eigenvalue: f64,
    pub ratio_retained: f64,
    pub ratio_total: f64,
}

/// Covariance matrix of the panel columns with population (1/n)
/// normalization. With `standardize` the columns are scaled to unit variance
/// first, which makes the result the correlation matrix.
pub fn covariance_matrix(panel: &Panel, standardize: bool) -> Result<Mat> {
    if panel.n_rows() < 2 {
        return Err(Error::SeriesTooShort {
            name: "panel".to_string(),
            len: panel.n_rows(),
            need: 2,
        });
    }
    let input = if standardize {
        let scaler = fit_scaler(panel, ScalerKind::Standardize, None)?;
        apply_scaler(panel, &scaler)?
    } else {
        panel.clone()
    };
    let k = input.n_cols();
    let n = input.n_rows() as f64;
    let means: Vec<f64> = (0..k)
        .map(|c| input.column_at(c).iter().sum::<f64>() / n)
        .collect();
    let mut cov = Mat::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let ci = input.column_at(i);
            let cj = input.column_at(j);
            let s = ci
                .iter()
                .zip(cj.iter())
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>()
                / n;
            cov.set(i, j, s);
            cov.set(j, i, s);
        }
    }
    Ok(cov)
}

/// Symmetric eigendecomposition with a deterministic sign convention: each
/// eigenvector's largest-magnitude loading is positive.
pub fn eigen_symmetric(matrix: &Mat) -> Result<EigenDecomposition> {
    let (eigenvalues, mut vectors) = linalg::eigen_symmetric(matrix, 1e-12, 100)?;
    let n = matrix.rows();
    for c in 0..n {
        let col = vectors.col(c);
        let mut dominant = 0usize;
        for r in 1..n {
            if col[r].abs() > col[dominant].abs() {
                dominant = r;
            }
        }
        if col[dominant] < 0.0 {
            for r in 0..n {
                vectors.set(r, c, -vectors.get(r, c));
            }
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// Full PCA of the standardized panel, retaining `n_components` components.
pub fn pca(panel: &Panel, n_components: usize) -> Result<PcaResult> {
    let k = panel.n_cols();
    if n_components == 0 || n_components > k {
        return Err(Error::InvalidParameter(format!(
            "n_components {n_components} out of range for {k} columns"
        )));
    }
    let corr = covariance_matrix(panel, true)?;
    let full = eigen_symmetric(&corr)?;
    let total_all: f64 = full.eigenvalues.iter().sum();
    let retained: Vec<f64> = full.eigenvalues[..n_components].to_vec();
    let total_retained: f64 = retained.iter().sum();
    let explained_ratio: Vec<f64> = retained.iter().map(|l| l / total_retained).collect();
    let explained_ratio_total: Vec<f64> = retained.iter().map(|l| l / total_all).collect();

    // Scores: standardized rows projected on each retained eigenvector.
    let scaler = fit_scaler(panel, ScalerKind::Standardize, None)?;
    let standardized = apply_scaler(panel, &scaler)?;
    let mut score_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(panel.n_rows()); n_components];
    for r in 0..standardized.n_rows() {
        let row = standardized.row(r);
        for (c, scores) in score_cols.iter_mut().enumerate() {
            let v: f64 = row
                .iter()
                .enumerate()
                .map(|(i, x)| x * full.eigenvectors.get(i, c))
                .sum();
            scores.push(v);
        }
    }
    let names: Vec<String> = (1..=n_components).map(|i| format!("PC{i}")).collect();
    let scores = Panel::new(panel.calendar().to_vec(), names, score_cols)?;

    let mut vectors = Mat::zeros(k, n_components);
    for c in 0..n_components {
        for r in 0..k {
            vectors.set(r, c, full.eigenvectors.get(r, c));
        }
    }
    Ok(PcaResult {
        decomposition: EigenDecomposition {
            eigenvalues: retained,
            eigenvectors: vectors,
        },
        explained_ratio,
        explained_ratio_total,
        scores,
    })
}

impl PcaResult {
    pub fn explained_table(&self) -> Vec<ExplainedRow> {
        self.decomposition
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &l)| ExplainedRow {
                component: i + 1,
                eigenvalue: l,
                ratio_retained: self.explained_ratio[i],
                ratio_total: self.explained_ratio_total[i],
            })
            .collect()
    }
}

/// Pearson correlation of two equally long slices.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}
