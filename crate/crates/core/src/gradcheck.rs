//! Central finite-difference verification of the analytic gradients.

use serde::Serialize;

use crate::pattern_gen::{generate_drift_dataset, DriftSpec};
use crate::rng::{standard_normal, substream, uniform_index, unit_f64};
use crate::soft_vca::{soft_nn_distance, soft_nn_gradient, vca_penalty, weighted_soft_t};
use crate::toy_trainer::{combined_loss, ToyModel, TrainConfig};

/// Tolerance for the soft distance and soft statistic checks.
pub const SOFT_TOLERANCE: f64 = 1e-5;
/// Tolerance for the full training loss.
pub const LOSS_TOLERANCE: f64 = 1e-4;

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_coordinate: Option<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub checked: usize,
    pub skipped: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`, with NaN mapped to infinity.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    let err = if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale };
    if err.is_nan() {
        f64::INFINITY
    } else {
        err
    }
}

pub fn finite_difference_check<F>(f: F, point: &[f64], step: f64) -> GradCheck
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    finite_difference_check_masked(f, point, step, &vec![false; point.len()])
}

/// Like [`finite_difference_check`], leaving out coordinates flagged in
/// `skip`.
///
/// Errors are relative to the larger of the two derivatives, floored at
/// `1e-3` times the largest derivative magnitude so that near-zero
/// coordinates are judged against the gradient's overall scale.
pub fn finite_difference_check_masked<F>(f: F, point: &[f64], step: f64, skip: &[bool]) -> GradCheck
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(point);
    let mut numeric = vec![0.0; point.len()];
    let mut x = point.to_vec();
    for i in 0..point.len() {
        if skip[i] {
            continue;
        }
        x[i] = point[i] + step;
        let up = f(&x).0;
        x[i] = point[i] - step;
        let down = f(&x).0;
        x[i] = point[i];
        numeric[i] = (up - down) / (2.0 * step);
    }
    let scale = analytic
        .iter()
        .chain(&numeric)
        .zip(skip.iter().chain(skip))
        .filter(|(_, s)| !**s)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
    let mut max_rel_error = 0.0;
    let mut worst_coordinate = None;
    let mut checked = 0;
    for i in 0..point.len() {
        if skip[i] {
            continue;
        }
        checked += 1;
        let err = relative_error(analytic[i], numeric[i], floor);
        if worst_coordinate.is_none() || err > max_rel_error {
            max_rel_error = err;
            worst_coordinate = Some(i);
        }
    }
    GradCheck { max_rel_error, worst_coordinate, analytic, numeric, checked, skipped: point.len() - checked }
}

/// Options for the randomized gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    pub beta: f64,
    pub trials: usize,
    pub step: f64,
    pub seed: u64,
    /// Place timestamps on a coarse integer grid so that duplicates occur.
    pub tie_heavy: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self { beta: 5.0, trials: 100, step: 1e-6, seed: 0, tie_heavy: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub tolerance: f64,
    pub max_rel_error: f64,
    /// `(trial, coordinate)` of the largest error.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub skipped: usize,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, max_rel_error: 0.0, worst: None, checked: 0, skipped: 0, passed: true }
    }

    fn absorb(&mut self, trial: usize, check: &GradCheck) {
        self.checked += check.checked;
        self.skipped += check.skipped;
        if let Some(c) = check.worst_coordinate {
            if self.worst.is_none() || check.max_rel_error > self.max_rel_error {
                self.max_rel_error = check.max_rel_error;
                self.worst = Some((trial, c));
            }
        }
        // NaN-safe: anything not provably within tolerance fails
        if !(check.max_rel_error <= self.tolerance) {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckSummary {
    pub checks: Vec<CheckOutcome>,
}

impl GradcheckSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A timestamp coordinate is tie-adjacent when the stencil `t ± step` reaches
/// another timestamp it is compared with, where `|t - t'|` has its kink.
fn tie_adjacent(a: f64, b: f64, step: f64) -> bool {
    (a - b).abs() <= 2.0 * step
}

fn trial_times(rng: &mut crate::rng::Substream, n: usize, tie_heavy: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if tie_heavy {
                uniform_index(rng, n / 2 + 1) as f64
            } else {
                unit_f64(rng) * n as f64
            }
        })
        .collect()
}

/// Runs the four randomized checks: soft distance wrt timestamps, soft
/// statistic wrt weights, penalty composed with the soft statistic, and the
/// full training loss wrt model parameters.
pub fn run_gradcheck(opts: &GradcheckOptions) -> GradcheckSummary {
    let mut soft_nn = CheckOutcome::new("soft_nn_distance", SOFT_TOLERANCE);
    let mut soft_t = CheckOutcome::new("weighted_soft_t", SOFT_TOLERANCE);
    let mut penalty = CheckOutcome::new("vca_penalty_o_weighted_soft_t", SOFT_TOLERANCE);
    let mut loss = CheckOutcome::new("combined_loss", LOSS_TOLERANCE);
    let beta = opts.beta;
    let h = opts.step;
    let gamma = TrainConfig::default().gamma();

    for trial in 0..opts.trials {
        let mut rng = substream(opts.seed, trial as u64);
        let n = 4 + uniform_index(&mut rng, 12);
        let times = trial_times(&mut rng, n, opts.tie_heavy);

        let e = uniform_index(&mut rng, n);
        let skip: Vec<bool> = (0..n)
            .map(|j| {
                if j == e {
                    (0..n).any(|m| m != e && tie_adjacent(times[e], times[m], h))
                } else {
                    tie_adjacent(times[e], times[j], h)
                }
            })
            .collect();
        let check = finite_difference_check_masked(
            |t| {
                let v = soft_nn_distance(e, t, beta).unwrap_or(f64::NAN);
                let g = soft_nn_gradient(e, t, beta).unwrap_or_else(|_| vec![f64::NAN; t.len()]);
                (v, g)
            },
            &times,
            h,
            &skip,
        );
        soft_nn.absorb(trial, &check);

        let weights: Vec<f64> = (0..n).map(|_| 0.1 + 0.9 * unit_f64(&mut rng)).collect();
        let (lo, hi) = times.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &t| (l.min(t), u.max(t)));
        let n_ref = 1 + uniform_index(&mut rng, 8);
        let refs: Vec<f64> = (0..n_ref).map(|_| lo + unit_f64(&mut rng) * (hi - lo)).collect();
        let soft = |w: &[f64]| weighted_soft_t(&times, w, &refs, beta);
        let check = finite_difference_check(
            |w| match soft(w) {
                Ok(s) => (s.t_soft, s.weight_gradient),
                Err(_) => (f64::NAN, vec![f64::NAN; w.len()]),
            },
            &weights,
            h,
        );
        soft_t.absorb(trial, &check);
        let check = finite_difference_check(
            |w| match soft(w) {
                Ok(s) => {
                    let (v, dv) = vca_penalty(s.t_soft, gamma);
                    (v, s.weight_gradient.iter().map(|g| dv * g).collect())
                }
                Err(_) => (f64::NAN, vec![f64::NAN; w.len()]),
            },
            &weights,
            h,
        );
        penalty.absorb(trial, &check);

        let data = generate_drift_dataset(&DriftSpec { n_events: 40, seed: opts.seed ^ trial as u64, ..DriftSpec::default() })
            .expect("valid drift spec");
        let params: Vec<f64> = (0..=data.feature_dim()).map(|_| 0.5 * standard_normal(&mut rng)).collect();
        let config = TrainConfig { seed: opts.seed, ..TrainConfig::default() };
        let check = finite_difference_check(
            |p| match combined_loss(&ToyModel { weights: p.to_vec() }, &data, &config, trial) {
                Ok(l) => (l.total, l.gradient),
                Err(_) => (f64::NAN, vec![f64::NAN; p.len()]),
            },
            &params,
            h,
        );
        loss.absorb(trial, &check);
    }
    GradcheckSummary { checks: vec![soft_nn, soft_t, penalty, loss] }
}
