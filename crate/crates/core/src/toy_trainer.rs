//! Linear-logistic trainer with the cluster-aware penalty.
//!
//! The loss is mean binary cross-entropy plus `gamma * (0.5 - T_soft)^2`,
//! where `T_soft` is the weighted soft statistic over the batch with event
//! masses `w_i = |p_i - y_i|^q` (`q = mass_exponent`). Sharpness follows the
//! spacing of the current errors, and a step whose soft distances degenerate
//! is trained on cross-entropy alone. Gradients are propagated by hand
//! through the masses and the logistic scores.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_stream::{EvalStream, PredictionRecord, DEFAULT_THRESHOLD};
use crate::instance_metrics::{auroc, average_precision};
use crate::pattern_gen::FeatureStream;
use crate::rng::{substream, unit_f64};
use crate::soft_vca::{median_positive_gap, vca_penalty, weighted_soft_t, SoftConfig};
use crate::vcs::{vcs_for_stream, VcsConfig, VcsResult};
use crate::event_stream::disagreement_set;

/// Scores are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logarithms.
pub const PROB_CLAMP: f64 = 1e-7;
/// Events with mass at or below this do not count towards the penalty's
/// two-event minimum.
pub const MIN_PENALTY_MASS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Seed for the per-step reference times.
    pub seed: u64,
    /// Sharpness and penalty weight (`soft.gamma`).
    pub soft: SoftConfig,
    pub vcs_eval: VcsConfig,
    /// Number of uniform reference times drawn per step.
    pub reference_count: usize,
    /// Event masses are `|p - y|` raised to this power. Values above 1 keep
    /// confidently correct events from crowding the soft statistic.
    pub mass_exponent: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            seed: 0,
            soft: SoftConfig::default(),
            vcs_eval: VcsConfig::default(),
            reference_count: 128,
            mass_exponent: 3.0,
        }
    }
}

impl TrainConfig {
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.soft.gamma = gamma;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.soft.gamma
    }

    pub fn validate(&self) -> Result<()> {
        self.soft.validate()?;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be non-negative", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.mass_exponent.is_finite() && self.mass_exponent >= 1.0) {
            return Err(Error::InvalidConfig(format!("mass exponent {} must be at least 1", self.mass_exponent)));
        }
        if self.reference_count == 0 {
            return Err(Error::InvalidConfig("reference count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Logistic model over `feature_dim` features plus a trailing bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub weights: Vec<f64>,
}

impl ToyModel {
    pub fn zeros(feature_dim: usize) -> Self {
        Self { weights: vec![0.0; feature_dim + 1] }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let d = self.feature_dim();
        let mut z = self.weights[d];
        for (w, xi) in self.weights[..d].iter().zip(x) {
            z += w * xi;
        }
        z
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cross_entropy: f64,
    pub penalty: f64,
    pub total: f64,
    /// Gradient of `total` over the model parameters (weights, then bias).
    pub gradient: Vec<f64>,
    pub t_soft: Option<f64>,
    /// Set when gamma > 0 but fewer than two events carry mass.
    pub penalty_skipped: bool,
    /// Set when any score hit the probability clamp.
    pub clamped: bool,
}

/// Sharpness for the penalty, scaled to the spacing of the events the model
/// currently gets wrong. Falls back to the spacing of all batch events when
/// fewer than two distinct error times exist.
fn penalty_beta(soft: &SoftConfig, times: &[f64], probs: &[f64], batch: &FeatureStream) -> f64 {
    let error_times: Vec<f64> = times
        .iter()
        .zip(probs)
        .zip(&batch.events)
        .filter(|((_, p), e)| (**p >= DEFAULT_THRESHOLD) != (e.y == 1))
        .map(|((t, _), _)| *t)
        .collect();
    match median_positive_gap(&error_times) {
        Some(_) => soft.effective_beta(&error_times),
        None => soft.effective_beta(times),
    }
}

/// Reference times for training step `step`: uniform over the batch period,
/// drawn from substream `(seed, step)`.
pub fn reference_times(period: (f64, f64), count: usize, seed: u64, step: u64) -> Vec<f64> {
    let mut rng = substream(seed, step);
    let (a, b) = period;
    (0..count).map(|_| a + unit_f64(&mut rng) * (b - a)).collect()
}

pub fn combined_loss(model: &ToyModel, batch: &FeatureStream, config: &TrainConfig, step: usize) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let dim = model.feature_dim();
    if batch.events.iter().any(|e| e.x.len() != dim) {
        return Err(Error::LengthMismatch(dim, batch.feature_dim()));
    }
    let n = batch.len();
    let mut probs = Vec::with_capacity(n);
    // d loss / d logit, per event
    let mut dz = vec![0.0; n];
    let mut ce = 0.0;
    let mut clamped = false;
    for (i, e) in batch.events.iter().enumerate() {
        let p = model.score(&e.x);
        let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        if pc != p {
            clamped = true;
        } else {
            dz[i] = (p - e.y as f64) / n as f64;
        }
        ce -= if e.y == 1 { pc.ln() } else { (1.0 - pc).ln() };
        probs.push(p);
    }
    ce /= n as f64;

    let gamma = config.gamma();
    let mut penalty = 0.0;
    let mut t_soft = None;
    let mut penalty_skipped = false;
    if gamma > 0.0 {
        let q = config.mass_exponent;
        let masses: Vec<f64> = probs.iter().zip(&batch.events).map(|(p, e)| (p - e.y as f64).abs().powf(q)).collect();
        let times = batch.timestamps();
        let trial = if masses.iter().filter(|w| **w > MIN_PENALTY_MASS).count() < 2 {
            None
        } else {
            let beta = penalty_beta(&config.soft, &times, &probs, batch);
            let refs = reference_times(batch.period(), config.reference_count, config.seed, step as u64);
            match weighted_soft_t(&times, &masses, &refs, beta) {
                Ok(trial) => Some(trial),
                // the soft distances collapsed; no usable statistic this step
                Err(Error::DegenerateDistances) => None,
                Err(e) => return Err(e),
            }
        };
        match trial {
            None => penalty_skipped = true,
            Some(trial) => {
                let (value, d_value) = vca_penalty(trial.t_soft, gamma);
                penalty = value;
                t_soft = Some(trial.t_soft);
                for (i, e) in batch.events.iter().enumerate() {
                    let p = probs[i];
                    // w = |p - y|^q, and d|p - y|/dp is -1 for positives, +1 for negatives
                    let sign = if e.y == 1 { -1.0 } else { 1.0 };
                    let dw_dp = sign * q * (p - e.y as f64).abs().powf(q - 1.0);
                    dz[i] += d_value * trial.weight_gradient[i] * dw_dp * p * (1.0 - p);
                }
            }
        }
    }

    let mut gradient = vec![0.0; dim + 1];
    for (e, g) in batch.events.iter().zip(&dz) {
        for (gj, xj) in gradient[..dim].iter_mut().zip(&e.x) {
            *gj += g * xj;
        }
        gradient[dim] += g;
    }
    let total = ce + penalty;
    if !total.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss { epoch: step });
    }
    Ok(LossBreakdown { cross_entropy: ce, penalty, total, gradient, t_soft, penalty_skipped, clamped })
}

/// Full-batch gradient descent from zero weights. History entry `e` is the
/// loss evaluated before update `e`.
pub fn train(dataset: &FeatureStream, config: &TrainConfig) -> Result<(ToyModel, Vec<LossBreakdown>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let mut model = ToyModel::zeros(dataset.feature_dim());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let loss = combined_loss(&model, dataset, config, epoch).map_err(|e| match e {
            Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { epoch },
            other => other,
        })?;
        for (w, g) in model.weights.iter_mut().zip(&loss.gradient) {
            *w -= config.learning_rate * g;
        }
        if model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
    }
    Ok((model, history))
}

/// Scores every event into a prediction stream.
pub fn score_stream(model: &ToyModel, data: &FeatureStream) -> Result<EvalStream> {
    EvalStream::new(
        data.events
            .iter()
            .map(|e| PredictionRecord::new(e.t, e.y, model.score(&e.x)))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub ap: Option<f64>,
    pub auroc: Option<f64>,
    pub n_errors: usize,
    pub vcs: Result<VcsResult>,
}

impl ModelEvaluation {
    /// VCS value, if defined.
    pub fn vcs_value(&self) -> Option<f64> {
        self.vcs.as_ref().ok().map(|r| r.vcs)
    }
}

pub fn evaluate_model(model: &ToyModel, test: &FeatureStream, vcs_config: &VcsConfig, threshold: f64) -> Result<ModelEvaluation> {
    let stream = score_stream(model, test)?;
    let n_errors = disagreement_set(&stream, threshold)?.len();
    Ok(ModelEvaluation {
        ap: average_precision(&stream).ok(),
        auroc: auroc(&stream).ok(),
        n_errors,
        vcs: vcs_for_stream(&stream, threshold, vcs_config),
    })
}

/// [`evaluate_model`] at the default threshold.
pub fn evaluate_default(model: &ToyModel, test: &FeatureStream, vcs_config: &VcsConfig) -> Result<ModelEvaluation> {
    evaluate_model(model, test, vcs_config, DEFAULT_THRESHOLD)
}

/// Writes `epoch,cross_entropy,penalty,total` rows.
pub fn write_history_csv<W: Write>(history: &[LossBreakdown], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["epoch", "cross_entropy", "penalty", "total"]).map_err(io)?;
    for (epoch, h) in history.iter().enumerate() {
        w.write_record([
            epoch.to_string(),
            h.cross_entropy.to_string(),
            h.penalty.to_string(),
            h.total.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
