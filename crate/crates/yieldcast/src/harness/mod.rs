//! Experiment orchestration: RMSE scoring, declarative suite configuration,
//! per-model pipelines, and plot-data emission.

pub mod config;
pub mod report;
pub mod stages;

pub use config::ExperimentConfig;
pub use report::{ExperimentReport, ModelOutcome};
pub use stages::{emit_plot_data, load_data, run_suite, PlotData};

use crate::error::{Error, Result};

/// Root mean squared error between equally long actual and predicted slices.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "rmse: {} actuals vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InvalidParameter("rmse of empty vectors".to_string()));
    }
    let mse = actual
        .iter()
        .zip(predicted.iter())
        .map(|(a, p)| (a - p) * (a - p))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(mse.sqrt())
}
