//! Synthetic prediction streams with planted error patterns, and a
//! drifting-feature dataset for the toy trainer.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_stream::{EvalStream, PredictionRecord};
use crate::rng::{standard_normal, substream, unit_f64};
use crate::vcs::subsample_positions;

/// Score given to events marked as errors (label 1, predicted negative).
pub const ERROR_SCORE: f64 = 0.1;
/// Scores of correctly predicted events, 0.4 either side of 0.5.
pub const CORRECT_POSITIVE_SCORE: f64 = 0.9;
pub const CORRECT_NEGATIVE_SCORE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Random,
    Clustered,
    Regular,
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "clustered" => Ok(Self::Clustered),
            "regular" => Ok(Self::Regular),
            other => Err(Error::SpecViolation(format!("unknown pattern `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub n_events: usize,
    pub n_errors: usize,
    pub period: (f64, f64),
    /// Cluster midpoint as a fraction of the period.
    pub cluster_center: f64,
    /// Cluster width as a fraction of the period.
    pub cluster_width: f64,
    pub seed: u64,
}

impl PatternSpec {
    pub fn new(kind: PatternKind, n_events: usize, n_errors: usize, period: (f64, f64), seed: u64) -> Self {
        Self { kind, n_events, n_errors, period, cluster_center: 0.9, cluster_width: 0.02, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecViolation(m));
        if self.n_errors < 2 || self.n_errors > self.n_events {
            return bad(format!("need 2 <= errors <= events, got {} and {}", self.n_errors, self.n_events));
        }
        let (a, b) = self.period;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && a < b) {
            return bad(format!("period ({a}, {b}) must satisfy 0 <= start < end"));
        }
        if !(0.0..=1.0).contains(&self.cluster_center) {
            return bad(format!("cluster center {} outside [0, 1]", self.cluster_center));
        }
        if !(self.cluster_width > 0.0 && self.cluster_width <= 1.0) {
            return bad(format!("cluster width {} outside (0, 1]", self.cluster_width));
        }
        Ok(())
    }

    /// Window `[lo, hi]` holding clustered errors, clipped to the period.
    pub fn cluster_window(&self) -> (f64, f64) {
        let (a, b) = self.period;
        let span = b - a;
        let lo = (self.cluster_center - self.cluster_width / 2.0).max(0.0);
        let hi = (self.cluster_center + self.cluster_width / 2.0).min(1.0);
        (a + lo * span, a + hi * span)
    }
}

fn correct_record(t: f64, rng: &mut crate::rng::Substream) -> PredictionRecord {
    let y = u8::from(unit_f64(rng) < 0.5);
    let p = if y == 1 { CORRECT_POSITIVE_SCORE } else { CORRECT_NEGATIVE_SCORE };
    PredictionRecord::new(t, y, p)
}

fn error_record(t: f64) -> PredictionRecord {
    PredictionRecord::new(t, 1, ERROR_SCORE)
}

/// Stream of `n_events` events, exactly `n_errors` of which are errors at
/// threshold 0.5, with error times laid out according to the pattern kind.
pub fn generate_pattern(spec: &PatternSpec) -> Result<EvalStream> {
    spec.validate()?;
    let (a, b) = spec.period;
    let span = b - a;
    let m = spec.n_events;
    let k = spec.n_errors;
    let mut times_rng = substream(spec.seed, 0);
    let mut label_rng = substream(spec.seed, 1);
    let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| a + unit_f64(&mut times_rng) * span).collect() };

    let mut records = Vec::with_capacity(m);
    match spec.kind {
        PatternKind::Random => {
            let mut times = uniform(m);
            times.sort_by(f64::total_cmp);
            let mut pick_rng = substream(spec.seed, 2);
            let mut is_error = vec![false; m];
            for i in subsample_positions(m, k, &mut pick_rng) {
                is_error[i] = true;
            }
            for (t, err) in times.into_iter().zip(is_error) {
                records.push(if err { error_record(t) } else { correct_record(t, &mut label_rng) });
            }
        }
        PatternKind::Clustered | PatternKind::Regular => {
            for t in uniform(m - k) {
                records.push(correct_record(t, &mut label_rng));
            }
            if spec.kind == PatternKind::Clustered {
                let (lo, hi) = spec.cluster_window();
                let mut cluster_rng = substream(spec.seed, 2);
                for _ in 0..k {
                    records.push(error_record(lo + unit_f64(&mut cluster_rng) * (hi - lo)));
                }
            } else {
                for i in 0..k {
                    records.push(error_record(regular_time(a, span, i, k)));
                }
            }
            records.sort_by(|x, y| x.t.total_cmp(&y.t));
        }
    }
    EvalStream::new(records)
}

fn regular_time(start: f64, span: f64, i: usize, k: usize) -> f64 {
    start + (i as f64 + 0.5) * span / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub n_events: usize,
    pub period: (f64, f64),
    pub seed: u64,
    /// Fraction of the period after which the class-1 mean moves.
    pub drift_onset: f64,
    pub feature_dim: usize,
    /// Length of the class-1 mean shift after onset.
    pub drift_shift: f64,
    /// Distance of each class mean from the origin along the first feature.
    pub class_offset: f64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            n_events: 600,
            period: (0.0, 1000.0),
            seed: 0,
            drift_onset: 0.8,
            feature_dim: 4,
            drift_shift: 3.0,
            class_offset: 2.0,
        }
    }
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecViolation(m));
        if self.n_events < 2 {
            return bad("drift dataset needs at least 2 events".into());
        }
        let (a, b) = self.period;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && a < b) {
            return bad(format!("period ({a}, {b}) must satisfy 0 <= start < end"));
        }
        if !(self.drift_onset > 0.0 && self.drift_onset < 1.0) {
            return bad(format!("drift onset {} outside (0, 1)", self.drift_onset));
        }
        if self.feature_dim == 0 {
            return bad("feature dimension must be at least 1".into());
        }
        if !(self.drift_shift.is_finite() && self.class_offset.is_finite() && self.class_offset > 0.0) {
            return bad("drift shift and class offset must be finite, offset positive".into());
        }
        Ok(())
    }

    /// Time at which drift starts.
    pub fn onset_time(&self) -> f64 {
        self.period.0 + self.drift_onset * (self.period.1 - self.period.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEvent {
    pub t: f64,
    pub y: u8,
    pub x: Vec<f64>,
}

/// Labelled feature vectors in chronological order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStream {
    pub events: Vec<FeatureEvent>,
}

impl FeatureStream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.events.first().map_or(0, |e| e.x.len())
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.events.iter().map(|e| e.y).collect()
    }

    pub fn period(&self) -> (f64, f64) {
        let first = self.events.first().map_or(0.0, |e| e.t);
        let last = self.events.last().map_or(0.0, |e| e.t);
        (first, last)
    }

    /// Events with index in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FeatureStream {
        FeatureStream { events: self.events[range].to_vec() }
    }
}

/// Two Gaussian classes with unit covariance and means `±class_offset` on the
/// first feature. From the onset on, the class-1 mean moves by `drift_shift`
/// along `(-1, 1, 0, ...)/sqrt(2)` (or `-1` in one dimension), i.e. partly
/// into class-0 territory and partly along a feature that is pure noise
/// before the onset. A linear model fit on early data then concentrates its
/// errors after the onset.
pub fn generate_drift_dataset(spec: &DriftSpec) -> Result<FeatureStream> {
    spec.validate()?;
    let (a, b) = spec.period;
    let span = b - a;
    let mut time_rng = substream(spec.seed, 0);
    let mut times: Vec<f64> = (0..spec.n_events).map(|_| a + unit_f64(&mut time_rng) * span).collect();
    times.sort_by(f64::total_cmp);

    let dim = spec.feature_dim;
    let mut shift = vec![0.0; dim];
    if dim == 1 {
        shift[0] = -spec.drift_shift;
    } else {
        let c = spec.drift_shift / std::f64::consts::SQRT_2;
        shift[0] = -c;
        shift[1] = c;
    }
    let onset = spec.onset_time();
    let mut rng = substream(spec.seed, 1);
    let events = times
        .into_iter()
        .map(|t| {
            let y = u8::from(unit_f64(&mut rng) < 0.5);
            let mut x: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
            x[0] += if y == 1 { spec.class_offset } else { -spec.class_offset };
            if y == 1 && t >= onset {
                for (xi, s) in x.iter_mut().zip(&shift) {
                    *xi += s;
                }
            }
            FeatureEvent { t, y, x }
        })
        .collect();
    Ok(FeatureStream { events })
}
