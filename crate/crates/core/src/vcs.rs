//! Volatility-cluster statistic.
//!
//! For each of `tau` repeats, a subsample of `k` disagreement events is drawn
//! without replacement and `k` reference times are drawn uniformly over the
//! test period. `D_disg` sums each sampled event's distance to its nearest
//! other disagreement, `D_r` sums each reference time's distance to its
//! nearest disagreement, and the repeat's statistic is `D_r / (D_r + D_disg)`.
//! The reported value is `|0.5 - mean T|`: near 0 for uniformly scattered
//! errors, near 0.5 for tightly clustered (T -> 1) or regularly spaced
//! (T -> 0) errors.
//!
//! Repeat `i` draws both its subsample and its reference times from
//! substream `(seed, i)`, so results do not depend on execution order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_stream::{disagreement_set, DisagreementSet, EvalStream};
use crate::rng::{substream, uniform_index, unit_f64, Substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcsConfig {
    pub tau: usize,
    pub subsample_fraction: f64,
    pub seed: u64,
}

impl Default for VcsConfig {
    fn default() -> Self {
        Self { tau: 5, subsample_fraction: 0.5, seed: 42 }
    }
}

impl VcsConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::InvalidConfig("tau must be at least 1".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "subsample fraction {} must lie in (0, 1)",
                self.subsample_fraction
            )));
        }
        Ok(())
    }

    /// `k = max(1, floor(fraction * K))`, capped at `K - 1`.
    pub fn subsample_size(&self, n_disagreements: usize) -> Result<usize> {
        if n_disagreements < 2 {
            return Err(Error::TooFewDisagreements(n_disagreements));
        }
        let k = ((self.subsample_fraction * n_disagreements as f64).floor() as usize).max(1);
        Ok(k.min(n_disagreements - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcsTrial {
    pub repeat_index: usize,
    pub subsample_ids: Vec<String>,
    pub random_times: Vec<f64>,
    pub d_disg: f64,
    pub d_r: f64,
    pub t_stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcsResult {
    pub trials: Vec<VcsTrial>,
    pub t_mean: f64,
    pub vcs: f64,
    pub config: VcsConfig,
    /// Number of disagreements K.
    pub n_disagreements: usize,
    /// Subsample size k used in every repeat.
    pub k: usize,
}

impl VcsResult {
    /// `t_mean - 0.5`: positive for clustered errors, negative for regular ones.
    pub fn signed_deviation(&self) -> f64 {
        self.t_mean - 0.5
    }

    pub fn t_stats(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.t_stat).collect()
    }
}

/// Distance from entry `position` to the nearest other entry of the set.
pub fn nn_distance(set: &DisagreementSet, position: usize) -> Result<f64> {
    let entries = set.entries();
    if position >= entries.len() || entries.len() < 2 {
        return Err(Error::InsufficientSet);
    }
    // entries are sorted, so the nearest other entry is adjacent
    let t = entries[position].t;
    let left = position.checked_sub(1).map(|j| t - entries[j].t);
    let right = entries.get(position + 1).map(|e| e.t - t);
    Ok(match (left, right) {
        (Some(l), Some(r)) => l.min(r),
        (Some(d), None) | (None, Some(d)) => d,
        (None, None) => unreachable!(),
    })
}

/// Sum of [`nn_distance`] over the given positions, in the given order.
pub fn disg_distance_sum(positions: &[usize], set: &DisagreementSet) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::InsufficientSet);
    }
    let mut sum = 0.0;
    for &p in positions {
        sum += nn_distance(set, p)?;
    }
    Ok(sum)
}

/// Distance from an arbitrary time to the nearest set entry.
pub fn distance_to_set(t: f64, set: &DisagreementSet) -> Result<f64> {
    let entries = set.entries();
    if entries.is_empty() {
        return Err(Error::EmptySet);
    }
    let i = entries.partition_point(|e| e.t < t);
    let mut best = f64::INFINITY;
    if i < entries.len() {
        best = best.min((entries[i].t - t).abs());
    }
    if i > 0 {
        best = best.min((t - entries[i - 1].t).abs());
    }
    Ok(best)
}

/// Draws `k` times `t_start + u * (t_end - t_start)`, `u ~ U[0,1)`, and sums
/// their distances to the nearest set entry.
pub fn random_reference_sum(
    k: usize,
    period: (f64, f64),
    set: &DisagreementSet,
    rng: &mut Substream,
) -> Result<(f64, Vec<f64>)> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    check_period(period)?;
    let (start, end) = period;
    let span = end - start;
    let mut times = Vec::with_capacity(k);
    let mut sum = 0.0;
    for _ in 0..k {
        let t = start + unit_f64(rng) * span;
        sum += distance_to_set(t, set)?;
        times.push(t);
    }
    Ok((sum, times))
}

fn check_period((start, end): (f64, f64)) -> Result<()> {
    if start.is_finite() && end.is_finite() && start <= end {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("invalid period ({start}, {end})")))
    }
}

/// `d_r / (d_r + d_disg)`.
pub fn t_statistic(d_r: f64, d_disg: f64) -> Result<f64> {
    if !(d_r >= 0.0 && d_disg >= 0.0) {
        return Err(Error::InvalidConfig(format!("distances must be non-negative ({d_r}, {d_disg})")));
    }
    let denom = d_r + d_disg;
    if denom == 0.0 {
        return Err(Error::DegenerateDistances);
    }
    Ok(d_r / denom)
}

/// Draws `k` distinct positions out of `0..n` (partial Fisher-Yates).
pub fn subsample_positions(n: usize, k: usize, rng: &mut Substream) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for j in 0..k.min(n) {
        let r = j + uniform_index(rng, n - j);
        pool.swap(j, r);
    }
    pool.truncate(k.min(n));
    pool
}

fn run_trial(set: &DisagreementSet, period: (f64, f64), k: usize, seed: u64, repeat: usize) -> Result<VcsTrial> {
    let mut rng = substream(seed, repeat as u64);
    let positions = subsample_positions(set.len(), k, &mut rng);
    let d_disg = disg_distance_sum(&positions, set)?;
    let (d_r, random_times) = random_reference_sum(k, period, set, &mut rng)?;
    let t_stat = t_statistic(d_r, d_disg)?;
    Ok(VcsTrial {
        repeat_index: repeat,
        subsample_ids: positions.iter().map(|&p| set.entries()[p].label()).collect(),
        random_times,
        d_disg,
        d_r,
        t_stat,
    })
}

/// Volatility-cluster statistic of a disagreement set over a test period.
pub fn vcs(set: &DisagreementSet, period: (f64, f64), config: &VcsConfig) -> Result<VcsResult> {
    config.validate()?;
    check_period(period)?;
    let k = config.subsample_size(set.len())?;
    let trials = (0..config.tau)
        .into_par_iter()
        .map(|i| run_trial(set, period, k, config.seed, i))
        .collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    for t in &trials {
        sum += t.t_stat;
    }
    let t_mean = sum / config.tau as f64;
    Ok(VcsResult {
        trials,
        t_mean,
        vcs: (0.5 - t_mean).abs(),
        config: *config,
        n_disagreements: set.len(),
        k,
    })
}

/// Thresholds the stream, collects its disagreements and runs [`vcs`] over
/// the stream's own period.
pub fn vcs_for_stream(stream: &EvalStream, threshold: f64, config: &VcsConfig) -> Result<VcsResult> {
    let set = disagreement_set(stream, threshold)?;
    vcs(&set, stream.period(), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nn_distance_cases() {
        let set = DisagreementSet::from_times(&[0.0, 1.0, 3.0]);
        assert_eq!(nn_distance(&set, 2).unwrap(), 2.0);
        assert_eq!(nn_distance(&set, 1).unwrap(), 1.0);
        let dup = DisagreementSet::from_times(&[2.0, 2.0]);
        assert_eq!(nn_distance(&dup, 0).unwrap(), 0.0);
        let single = DisagreementSet::from_times(&[2.0]);
        assert_eq!(nn_distance(&single, 0), Err(Error::InsufficientSet));
    }

    #[test]
    fn disg_sum_cases() {
        let set = DisagreementSet::from_times(&[0.0, 1.0, 3.0]);
        assert_eq!(disg_distance_sum(&[0, 1, 2], &set).unwrap(), 4.0);
        assert_eq!(disg_distance_sum(&[2], &set).unwrap(), 2.0);
        let flat = DisagreementSet::from_times(&[5.0; 6]);
        assert_eq!(disg_distance_sum(&[0, 1, 2, 3, 4, 5], &flat).unwrap(), 0.0);
    }

    #[test]
    fn reference_sum_degenerate_period() {
        let set = DisagreementSet::from_times(&[2.0, 7.0]);
        let mut rng = substream(3, 0);
        let (sum, times) = random_reference_sum(4, (5.0, 5.0), &set, &mut rng).unwrap();
        assert_eq!(times, vec![5.0; 4]);
        assert_eq!(sum, 8.0);
        let empty = DisagreementSet::default();
        assert_eq!(random_reference_sum(1, (0.0, 1.0), &empty, &mut rng), Err(Error::EmptySet));
    }

    #[test]
    fn reference_point_on_entry_contributes_zero() {
        let set = DisagreementSet::from_times(&[4.0]);
        assert_eq!(distance_to_set(4.0, &set).unwrap(), 0.0);
    }

    #[test]
    fn t_statistic_cases() {
        assert_eq!(t_statistic(5.0, 0.0).unwrap(), 1.0);
        assert_eq!(t_statistic(7.0, 7.0).unwrap(), 0.5);
        assert_eq!(t_statistic(0.0, 0.0), Err(Error::DegenerateDistances));
    }

    #[test]
    fn subsample_size_rule() {
        let c = VcsConfig::default();
        assert_eq!(c.subsample_size(2).unwrap(), 1);
        assert_eq!(c.subsample_size(3).unwrap(), 1);
        assert_eq!(c.subsample_size(200).unwrap(), 100);
        let c = VcsConfig { subsample_fraction: 0.99, ..c };
        assert_eq!(c.subsample_size(10).unwrap(), 9);
        assert_eq!(c.subsample_size(1), Err(Error::TooFewDisagreements(1)));
    }

    #[test]
    fn subsample_is_without_replacement() {
        let mut rng = substream(11, 0);
        let mut s = subsample_positions(50, 49, &mut rng);
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 49);
    }

    #[test]
    fn single_timestamp_cluster() {
        let set = DisagreementSet::from_times(&[10.0; 8]);
        let r = vcs(&set, (0.0, 100.0), &VcsConfig::default()).unwrap();
        assert!(r.trials.iter().all(|t| t.d_disg == 0.0 && t.t_stat == 1.0));
        assert_eq!(r.vcs, 0.5);
    }

    #[test]
    fn deterministic() {
        let set = DisagreementSet::from_times(&[1.0, 4.0, 9.0, 16.0, 25.0, 36.0]);
        let c = VcsConfig::with_seed(99);
        assert_eq!(vcs(&set, (0.0, 40.0), &c).unwrap(), vcs(&set, (0.0, 40.0), &c).unwrap());
    }

    #[test]
    fn too_few() {
        let set = DisagreementSet::from_times(&[1.0]);
        assert_eq!(vcs(&set, (0.0, 2.0), &VcsConfig::default()), Err(Error::TooFewDisagreements(1)));
    }
}
