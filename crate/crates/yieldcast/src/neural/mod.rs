//! From-scratch neural forecasters: supervised reshaping of series, a ReLU
//! multilayer perceptron, and LSTM networks trained by BPTT with RMSprop,
//! dropout, and early stopping. Three LSTM training regimes mirror the
//! experiment grid: stateless, stateful stacked, and multivariate.

pub mod lstm;
pub mod mlp;

pub use lstm::{lstm_step, DropoutMasks, LstmCell, LstmNetwork, LstmState, StepCache};
pub use mlp::{Activation, DenseLayer, Mlp};

use chrono::NaiveDate;
use serde::Serialize;

use crate::data::{apply_scaler, fit_scaler, Panel, ScalerKind, TimeSeries};
use crate::diagnostics::{descriptive_stats, DescriptiveStats};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng64;

/// Training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    Mae,
}

impl Loss {
    #[inline]
    pub fn value(&self, yhat: f64, y: f64) -> f64 {
        match self {
            Loss::Mse => (yhat - y) * (yhat - y),
            Loss::Mae => (yhat - y).abs(),
        }
    }

    #[inline]
    pub fn grad(&self, yhat: f64, y: f64) -> f64 {
        match self {
            Loss::Mse => 2.0 * (yhat - y),
            Loss::Mae => (yhat - y).signum(),
        }
    }
}

/// Glorot-style uniform initialization in ±sqrt(6 / (fan_in + fan_out)).
pub(crate) fn glorot_uniform(rows: usize, cols: usize, rng: &mut Rng64) -> Mat {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Mat::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.uniform_in(-bound, bound);
    }
    m
}

/// RMSprop: cache <- rho*cache + (1-rho)*g²; w <- w - lr*g/(sqrt(cache)+eps).
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    caches: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(learning_rate: f64, rho: f64, epsilon: f64, n_slots: usize) -> Self {
        RmsProp {
            learning_rate,
            rho,
            epsilon,
            caches: vec![Vec::new(); n_slots],
        }
    }

    pub fn step(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        let cache = &mut self.caches[slot];
        if cache.len() != params.len() {
            cache.resize(params.len(), 0.0);
        }
        for ((w, g), c) in params.iter_mut().zip(grads.iter()).zip(cache.iter_mut()) {
            *c = self.rho * *c + (1.0 - self.rho) * g * g;
            *w -= self.learning_rate * g / (c.sqrt() + self.epsilon);
        }
    }
}

/// Training controls. Defaults mirror the experiment settings: RMSprop at
/// learning rate 1e-3, rho 0.9, epsilon 1e-8.
#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub dropout: f64,
    pub patience: Option<usize>,
    pub loss: Loss,
    pub stateful: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            batch_size,
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
            dropout: 0.0,
            patience: None,
            loss: Loss::Mse,
            stateful: false,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidParameter("patience must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch losses and where training stopped.
#[derive(Debug, Clone, Serialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Number of completed epochs (equals `epochs` unless stopped early).
    pub stopped_epoch: usize,
}

/// Early stopping on validation loss: stop after `patience` epochs without
/// a strict improvement over the best seen.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    wait: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    /// Feeds one epoch's validation loss; returns true when training should
    /// stop after this epoch.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.wait = 0;
            false
        } else {
            self.wait += 1;
            self.wait >= self.patience
        }
    }
}

/// A series reshaped for supervised learning: lag features (newest first)
/// plus optional covariates observed at t-1.
#[derive(Debug, Clone)]
pub struct SupervisedSet {
    pub inputs: Mat,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Date of each target observation.
    pub dates: Vec<NaiveDate>,
}

impl SupervisedSet {
    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.inputs.cols()
    }

    /// Rows [from, to) as a new set.
    pub fn slice(&self, from: usize, to: usize) -> SupervisedSet {
        SupervisedSet {
            inputs: self.inputs.slice_rows(from, to),
            targets: self.targets[from..to].to_vec(),
            feature_names: self.feature_names.clone(),
            dates: self.dates[from..to].to_vec(),
        }
    }
}

/// Reshapes a series into (lags, target) rows. Row t carries the target at
/// time t, lag features y_{t-1}..y_{t-n_lags} newest first, then each
/// covariate at t-1 so no future information leaks.
pub fn to_supervised(
    series: &TimeSeries,
    n_lags: usize,
    covariates: Option<&Panel>,
) -> Result<SupervisedSet> {
    if n_lags == 0 {
        return Err(Error::InvalidParameter("n_lags must be >= 1".into()));
    }
    let n = series.len();
    if n <= n_lags {
        return Err(Error::SeriesTooShort {
            name: series.name().to_string(),
            len: n,
            need: n_lags + 1,
        });
    }
    if let Some(c) = covariates {
        if c.calendar() != series.dates() {
            return Err(Error::DimensionMismatch(
                "covariates must share the series calendar".into(),
            ));
        }
    }
    let n_cov = covariates.map_or(0, |c| c.n_cols());
    let n_samples = n - n_lags;
    let mut inputs = Mat::zeros(n_samples, n_lags + n_cov);
    let mut targets = Vec::with_capacity(n_samples);
    let values = series.values();
    for (row, t) in (n_lags..n).enumerate() {
        targets.push(values[t]);
        for lag in 1..=n_lags {
            inputs.set(row, lag - 1, values[t - lag]);
        }
        if let Some(c) = covariates {
            for j in 0..n_cov {
                inputs.set(row, n_lags + j, c.column_at(j)[t - 1]);
            }
        }
    }
    let mut feature_names: Vec<String> = (1..=n_lags).map(|l| format!("lag{l}")).collect();
    if let Some(c) = covariates {
        for name in c.names() {
            feature_names.push(format!("{name}@t-1"));
        }
    }
    Ok(SupervisedSet {
        inputs,
        targets,
        feature_names,
        dates: series.dates()[n_lags..].to_vec(),
    })
}

/// Trains an MLP with per-epoch validation tracking and optional early
/// stopping. Deterministic for a given config and seed.
pub fn train_mlp(
    model: &mut Mlp,
    train: &SupervisedSet,
    validation: &SupervisedSet,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if train.n_samples() == 0 || validation.n_samples() == 0 {
        return Err(Error::InvalidParameter("empty train or validation set".into()));
    }
    let mut opt = RmsProp::new(
        config.learning_rate,
        config.rho,
        config.epsilon,
        model.n_param_slots(),
    );
    let mut stopper = config.patience.map(EarlyStopper::new);
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_epoch: 0,
    };
    for epoch in 1..=config.epochs {
        let train_loss = model.train_epoch(
            &train.inputs,
            &train.targets,
            config.batch_size,
            config.loss,
            &mut opt,
        );
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        let val_loss = model.evaluate(&validation.inputs, &validation.targets, config.loss);
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;
        if let Some(s) = stopper.as_mut() {
            if s.observe(val_loss) {
                break;
            }
        }
    }
    Ok(history)
}

/// Trains an LSTM over chronologically ordered samples. The validation set
/// must be the continuation of the training rows (time-series split); the
/// validation loss is computed with state warmed by a full forward pass.
pub fn train_lstm(
    model: &mut LstmNetwork,
    train: &SupervisedSet,
    validation: &SupervisedSet,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if train.n_samples() == 0 || validation.n_samples() == 0 {
        return Err(Error::InvalidParameter("empty train or validation set".into()));
    }
    let mut opt = RmsProp::new(
        config.learning_rate,
        config.rho,
        config.epsilon,
        model.n_param_slots(),
    );
    let mut rng = Rng64::substream(config.seed, 7);
    let mut stopper = config.patience.map(EarlyStopper::new);
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_epoch: 0,
    };
    for epoch in 1..=config.epochs {
        let mut state = LstmState::zeros(model);
        let train_loss = model.train_epoch(
            &train.inputs,
            &train.targets,
            config.batch_size,
            config.loss,
            config.dropout,
            config.stateful,
            &mut state,
            &mut opt,
            &mut rng,
        );
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        // Warm-state validation: run the training rows, then score the
        // validation continuation.
        let mut eval_state = LstmState::zeros(model);
        let _ = model.predict_sequence(&train.inputs, &mut eval_state);
        let val_preds = model.predict_sequence(&validation.inputs, &mut eval_state);
        let val_loss = val_preds
            .iter()
            .zip(validation.targets.iter())
            .map(|(p, t)| config.loss.value(*p, *t))
            .sum::<f64>()
            / validation.targets.len() as f64;
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;
        if let Some(s) = stopper.as_mut() {
            if s.observe(val_loss) {
                break;
            }
        }
    }
    Ok(history)
}

/// One row of the MLP width experiment: RMSE statistics over the repeats.
#[derive(Debug, Clone, Serialize)]
pub struct MlpExperimentRow {
    pub neurons: usize,
    pub n_lags: usize,
    pub repeats: usize,
    pub rmse_stats: DescriptiveStats,
    pub rmse_runs: Vec<f64>,
}

/// Width experiment: for each configuration the lag count matches the neuron
/// count, the series is scaled to (-1, 1), and each run's test RMSE is
/// reported in original units.
pub fn run_mlp_experiment(
    series: &TimeSeries,
    neuron_grid: &[usize],
    split: crate::arima::Split,
    epochs: usize,
    batch_size: usize,
    repeats: usize,
    master_seed: u64,
) -> Result<Vec<MlpExperimentRow>> {
    let test_start = split.test_start(series.dates())?;
    let mut rows = Vec::with_capacity(neuron_grid.len());
    for &neurons in neuron_grid {
        let n_lags = neurons;
        let prep = prepare_scaled_supervised(series, None, n_lags, test_start, (-1.0, 1.0))?;
        let mut rmses = Vec::with_capacity(repeats);
        for rep in 0..repeats {
            let seed = crate::rng::derive_seed(master_seed, &format!("mlp/{neurons}/{rep}"));
            let mut model = Mlp::new(prep.train.n_features(), &[neurons], seed);
            let config = TrainConfig::new(epochs, batch_size, seed);
            train_mlp(&mut model, &prep.train, &prep.test, &config)?;
            let preds_scaled = model.predict(&prep.test.inputs);
            let rmse = prep.rmse_original_units(&preds_scaled)?;
            rmses.push(rmse);
        }
        let stats_series = TimeSeries::from_values("rmse", rmses.clone())?;
        rows.push(MlpExperimentRow {
            neurons,
            n_lags,
            repeats,
            rmse_stats: descriptive_stats(&stats_series)?,
            rmse_runs: rmses,
        });
    }
    Ok(rows)
}

/// LSTM training regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LstmRegime {
    /// Hidden and cell state reset to zero at every batch boundary.
    Stateless,
    /// Two stacked layers; state carries across batches, reset per epoch.
    StatefulStacked,
    /// Single layer fed with lagged target plus covariates; MAE loss.
    Multivariate,
}

/// Outcome of one LSTM regime run. RMSEs are in the original data units.
#[derive(Debug, Clone)]
pub struct RegimeResult {
    pub regime: LstmRegime,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub history: TrainHistory,
    /// Test-segment predictions in original units.
    pub predictions: TimeSeries,
    /// The trained network, for serialization or further prediction.
    pub network: LstmNetwork,
}

/// Runs one LSTM regime end to end: scale to (0, 1), reshape, train with the
/// regime's state policy, invert the scaling, and score both segments.
pub fn run_lstm_regime(
    regime: LstmRegime,
    series: &TimeSeries,
    covariates: Option<&Panel>,
    split: crate::arima::Split,
    units: usize,
    config: &TrainConfig,
) -> Result<RegimeResult> {
    if regime == LstmRegime::Multivariate && covariates.is_none() {
        return Err(Error::InvalidParameter(
            "multivariate regime requires a covariate panel".into(),
        ));
    }
    let test_start = split.test_start(series.dates())?;
    let n_lags = 1;
    let covs = if regime == LstmRegime::Multivariate {
        covariates
    } else {
        None
    };
    let prep = prepare_scaled_supervised(series, covs, n_lags, test_start, (0.0, 1.0))?;

    let layers: Vec<usize> = match regime {
        LstmRegime::StatefulStacked => vec![units, units],
        _ => vec![units],
    };
    let mut cfg = config.clone();
    cfg.stateful = regime == LstmRegime::StatefulStacked;
    let mut model = LstmNetwork::new(prep.train.n_features(), &layers, cfg.seed);
    let history = train_lstm(&mut model, &prep.train, &prep.test, &cfg)?;

    // Single warm pass over the full sample for train and test predictions.
    let mut state = LstmState::zeros(&model);
    let train_preds = model.predict_sequence(&prep.train.inputs, &mut state);
    let test_preds = model.predict_sequence(&prep.test.inputs, &mut state);
    let train_rmse = prep.rmse_original_units_on(&train_preds, &prep.train)?;
    let test_rmse = prep.rmse_original_units(&test_preds)?;
    let predictions = TimeSeries::new(
        format!("{}_lstm_pred", series.name()),
        prep.test.dates.clone(),
        test_preds
            .iter()
            .map(|p| prep.scaler.invert_value(series.name(), *p))
            .collect::<Result<Vec<f64>>>()?,
    )?;
    Ok(RegimeResult {
        regime,
        train_rmse,
        test_rmse,
        history,
        predictions,
        network: model,
    })
}

/// Scaled supervised train/test split with the scaler kept for inversion.
pub struct ScaledSupervised {
    pub train: SupervisedSet,
    pub test: SupervisedSet,
    pub scaler: crate::data::ScalerParams,
    target_name: String,
}

impl ScaledSupervised {
    /// RMSE of scaled test predictions against original-unit test targets.
    pub fn rmse_original_units(&self, preds_scaled: &[f64]) -> Result<f64> {
        self.rmse_original_units_on(preds_scaled, &self.test)
    }

    /// Inverts the target scaling on a prediction vector.
    pub fn invert_predictions(&self, preds_scaled: &[f64]) -> Result<Vec<f64>> {
        preds_scaled
            .iter()
            .map(|p| self.scaler.invert_value(&self.target_name, *p))
            .collect()
    }

    pub fn rmse_original_units_on(&self, preds_scaled: &[f64], set: &SupervisedSet) -> Result<f64> {
        let preds: Vec<f64> = preds_scaled
            .iter()
            .map(|p| self.scaler.invert_value(&self.target_name, *p))
            .collect::<Result<Vec<f64>>>()?;
        let actuals: Vec<f64> = set
            .targets
            .iter()
            .map(|t| self.scaler.invert_value(&self.target_name, *t))
            .collect::<Result<Vec<f64>>>()?;
        crate::harness::rmse(&actuals, &preds)
    }
}

/// Scales the series (and covariates) with parameters fitted on the training
/// window only, then reshapes to supervised rows and splits so that every
/// training target predates `test_start`.
pub fn prepare_scaled_supervised(
    series: &TimeSeries,
    covariates: Option<&Panel>,
    n_lags: usize,
    test_start: usize,
    range: (f64, f64),
) -> Result<ScaledSupervised> {
    // Assemble a panel of target plus covariates for joint scaling.
    let mut names = vec![series.name().to_string()];
    let mut cols = vec![series.values().to_vec()];
    if let Some(c) = covariates {
        for (i, n) in c.names().iter().enumerate() {
            names.push(n.clone());
            cols.push(c.column_at(i).to_vec());
        }
    }
    let full = Panel::new(series.dates().to_vec(), names.clone(), cols)?;
    let train_panel = full.slice_rows(0, test_start);
    let scaler = fit_scaler(&train_panel, ScalerKind::MinMax, Some(range))?;
    let scaled = apply_scaler(&full, &scaler)?;

    let scaled_series = scaled.series(series.name())?;
    let scaled_covs = covariates
        .map(|c| {
            let names: Vec<&str> = c.names().iter().map(|s| s.as_str()).collect();
            scaled.select(&names)
        })
        .transpose()?;
    let supervised = to_supervised(&scaled_series, n_lags, scaled_covs.as_ref())?;

    // Row i targets series index n_lags + i.
    if test_start <= n_lags {
        return Err(Error::InvalidParameter(
            "test split begins before any supervised row exists".into(),
        ));
    }
    let split_row = test_start - n_lags;
    if split_row >= supervised.n_samples() {
        return Err(Error::InvalidParameter(
            "test split leaves no test rows".into(),
        ));
    }
    Ok(ScaledSupervised {
        train: supervised.slice(0, split_row),
        test: supervised.slice(split_row, supervised.n_samples()),
        scaler,
        target_name: series.name().to_string(),
    })
}

#[cfg(test)]
mod tests;
