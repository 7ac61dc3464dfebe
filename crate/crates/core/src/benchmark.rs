//! Paired baseline vs penalised training on the drift dataset.
//!
//! For every seed, a training stream and an independent, larger test stream
//! are drawn from the same drift process (the test stream uses a derived
//! seed). One model is trained with cross-entropy only, one with the
//! penalty, and both are scored on the test stream with the same VCS
//! configuration.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::event_stream::DEFAULT_THRESHOLD;
use crate::pattern_gen::{generate_drift_dataset, DriftSpec, FeatureStream};
use crate::toy_trainer::{evaluate_model, train, LossBreakdown, ToyModel, TrainConfig};
use crate::vcs::VcsConfig;

/// Offset between a seed's training stream and its test stream.
const TEST_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    /// Drift process; its seed is replaced per run.
    pub drift: DriftSpec,
    /// Size of each test stream.
    pub test_events: usize,
    /// Training settings; gamma is replaced per run.
    pub train: TrainConfig,
    pub eval_vcs: VcsConfig,
    pub threshold: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            drift: DriftSpec::default(),
            test_events: 50_000,
            train: TrainConfig::default(),
            eval_vcs: VcsConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Training and test streams for `seed`.
pub fn datasets(config: &BenchmarkConfig, seed: u64) -> Result<(FeatureStream, FeatureStream)> {
    let drift = &config.drift;
    let train = generate_drift_dataset(&DriftSpec { seed, ..*drift })?;
    let test = generate_drift_dataset(&DriftSpec {
        seed: seed.wrapping_add(TEST_SEED_OFFSET),
        n_events: config.test_events,
        ..*drift
    })?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub gamma: f64,
    pub ap: Option<f64>,
    pub auroc: Option<f64>,
    pub n_errors: usize,
    pub vcs: Option<f64>,
    pub model: ToyModel,
    #[serde(skip)]
    pub history: Vec<LossBreakdown>,
}

pub fn run_once(config: &BenchmarkConfig, seed: u64, gamma: f64) -> Result<RunResult> {
    let (train_set, test_set) = datasets(config, seed)?;
    let train_cfg = TrainConfig { seed, ..config.train }.with_gamma(gamma);
    let (model, history) = train(&train_set, &train_cfg)?;
    let eval = evaluate_model(&model, &test_set, &config.eval_vcs, config.threshold)?;
    Ok(RunResult {
        seed,
        gamma,
        ap: eval.ap,
        auroc: eval.auroc,
        n_errors: eval.n_errors,
        vcs: eval.vcs_value(),
        model,
        history,
    })
}

/// Mean and sample standard deviation; `None` when any value is missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[Option<f64>]) -> Option<MeanStd> {
    let xs: Vec<f64> = values.iter().copied().collect::<Option<Vec<_>>>()?;
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSummary {
    pub label: String,
    pub gamma: f64,
    pub ap: Option<MeanStd>,
    pub vcs: Option<MeanStd>,
}

pub fn summarize(label: &str, gamma: f64, runs: &[RunResult]) -> RowSummary {
    RowSummary {
        label: label.to_string(),
        gamma,
        ap: mean_std(&runs.iter().map(|r| r.ap).collect::<Vec<_>>()),
        vcs: mean_std(&runs.iter().map(|r| r.vcs).collect::<Vec<_>>()),
    }
}

fn cell(v: Option<MeanStd>, scale: f64, mean_digits: usize, std_digits: usize) -> String {
    match v {
        Some(m) => format!("{:.*}±{:.*}", mean_digits, m.mean * scale, std_digits, m.std * scale),
        None => "undefined".to_string(),
    }
}

fn value(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{:.4}", x * scale))
}

/// Two-row table: `VCS` as `0.18±0.02`, `AP(%)` as `98.5±0.04`.
pub fn format_table(rows: &[RowSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>7} {:>14} {:>14}", "model", "gamma", "VCS", "AP(%)");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>14} {:>14}",
            r.label,
            r.gamma,
            cell(r.vcs, 1.0, 2, 2),
            cell(r.ap, 100.0, 1, 2)
        );
    }
    s
}

/// Per-seed comparison of paired runs at four decimals.
pub fn format_seed_table(baseline: &[RunResult], penalised: &[RunResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6} {:>12} {:>12} {:>12} {:>12}", "seed", "VCS base", "VCS vca", "AP(%) base", "AP(%) vca");
    for (b, v) in baseline.iter().zip(penalised) {
        let _ = writeln!(
            s,
            "{:>6} {:>12} {:>12} {:>12} {:>12}",
            b.seed,
            value(b.vcs, 1.0),
            value(v.vcs, 1.0),
            value(b.ap, 100.0),
            value(v.ap, 100.0)
        );
    }
    s
}
