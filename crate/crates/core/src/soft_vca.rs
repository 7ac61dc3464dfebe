//! Differentiable relaxation of the cluster statistic.
//!
//! The hard nearest-neighbour distance is replaced by a log-sum-exp soft
//! minimum with sharpness `beta`,
//!
//! ```text
//! d_soft(e, E) = -ln( sum_{e' != e} exp(-beta |t_e - t_e'|) ) / beta
//! ```
//!
//! which lies in `[d_min - ln(n-1)/beta, d_min]` and converges to the hard
//! minimum as `beta` grows. All log-sum-exp evaluations are shifted by their
//! largest exponent.
//!
//! To let the penalty reach model outputs, [`weighted_soft_t`] attaches a
//! non-negative mass to every event (in training, `|p - y|`). Zero masses drop
//! their terms, so binary masses reproduce the unweighted statistic on the
//! selected events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftConfig {
    /// Sharpness used when scale adaptation is off or undefined.
    pub beta: f64,
    /// Penalty weight.
    pub gamma: f64,
    pub scale_adaptive_beta: bool,
    /// Target sharpness in units of the median inter-event gap.
    pub target_sharpness: f64,
}

impl Default for SoftConfig {
    fn default() -> Self {
        Self { beta: 1.0, gamma: 0.1, scale_adaptive_beta: true, target_sharpness: 5.0 }
    }
}

impl SoftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta {} must be positive", self.beta)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma {} must be non-negative", self.gamma)));
        }
        if !(self.target_sharpness.is_finite() && self.target_sharpness > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target sharpness {} must be positive",
                self.target_sharpness
            )));
        }
        Ok(())
    }

    /// `target_sharpness / median gap` when adaptive and the median gap is
    /// positive, otherwise the fixed `beta`.
    pub fn effective_beta(&self, reference_times: &[f64]) -> f64 {
        if !self.scale_adaptive_beta {
            return self.beta;
        }
        match median_positive_gap(reference_times) {
            Some(g) if g > 0.0 => self.target_sharpness / g,
            _ => self.beta,
        }
    }
}

/// Median of the strictly positive gaps between consecutive sorted times.
pub fn median_positive_gap(times: &[f64]) -> Option<f64> {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    Some(if n % 2 == 1 { gaps[n / 2] } else { 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]) })
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("beta {beta} must be positive")))
    }
}

/// Soft nearest-neighbour distance of entry `position` to the other entries.
///
/// May be negative when several neighbours sit at nearly the same distance.
pub fn soft_nn_distance(position: usize, times: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if position >= times.len() || times.len() < 2 {
        return Err(Error::InsufficientSet);
    }
    let te = times[position];
    let others = || times.iter().enumerate().filter(move |(j, _)| *j != position).map(|(_, t)| (te - t).abs());
    let d_min = others().fold(f64::INFINITY, f64::min);
    let s: f64 = others().map(|d| (-beta * (d - d_min)).exp()).sum();
    Ok(d_min - s.ln() / beta)
}

/// Soft distance from a time that is not a member of the set (no exclusion).
pub fn soft_distance_to_set(t: f64, times: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if times.is_empty() {
        return Err(Error::EmptySet);
    }
    let d_min = times.iter().map(|s| (t - s).abs()).fold(f64::INFINITY, f64::min);
    let s: f64 = times.iter().map(|s| (-beta * ((t - s).abs() - d_min)).exp()).sum();
    Ok(d_min - s.ln() / beta)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of [`soft_nn_distance`] with respect to every timestamp.
///
/// Entry `position` holds the derivative with respect to `t_e`; the others
/// hold `-w_j * sign(t_e - t_j)` with softmax weights `w_j`. Ties use
/// `sign(0) = 0`.
pub fn soft_nn_gradient(position: usize, times: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if position >= times.len() || times.len() < 2 {
        return Err(Error::InsufficientSet);
    }
    let te = times[position];
    let d_min = times
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != position)
        .map(|(_, t)| (te - t).abs())
        .fold(f64::INFINITY, f64::min);
    let mut grad = vec![0.0; times.len()];
    let mut total = 0.0;
    for (j, t) in times.iter().enumerate() {
        if j != position {
            let e = (-beta * ((te - t).abs() - d_min)).exp();
            grad[j] = e;
            total += e;
        }
    }
    let mut self_grad = 0.0;
    for (j, t) in times.iter().enumerate() {
        if j != position {
            let w = grad[j] / total;
            let s = sign(te - t);
            self_grad += w * s;
            grad[j] = -w * s;
        }
    }
    grad[position] = self_grad;
    Ok(grad)
}

/// Soft statistic on one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTrial {
    pub d_r_soft: f64,
    pub d_disg_soft: f64,
    pub t_soft: f64,
    /// `d t_soft / d w_j` for every event weight.
    pub weight_gradient: Vec<f64>,
}

/// Unweighted soft statistic: mean soft distance of the reference times over
/// the mean soft leave-one-out distance of the members.
pub fn soft_t(times: &[f64], random_times: &[f64], beta: f64) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InsufficientSet);
    }
    if random_times.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut d_disg = 0.0;
    for i in 0..times.len() {
        d_disg += soft_nn_distance(i, times, beta)?;
    }
    d_disg /= times.len() as f64;
    let mut d_r = 0.0;
    for &r in random_times {
        d_r += soft_distance_to_set(r, times, beta)?;
    }
    d_r /= random_times.len() as f64;
    soft_ratio(d_r, d_disg)
}

fn soft_ratio(d_r: f64, d_disg: f64) -> Result<f64> {
    let denom = d_r + d_disg;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateDistances);
    }
    Ok(d_r / denom)
}

/// One row of a weighted log-sum-exp: `d = -ln(sum_j w_j exp(-beta |t - t_j|)) / beta`
/// over `j != exclude`, plus the normalised kernel `exp(-beta |t - t_j|) / S`
/// for every `j` (zero at `exclude`).
fn weighted_row(
    t: f64,
    times: &[f64],
    weights: &[f64],
    exclude: Option<usize>,
    beta: f64,
    kernel: &mut [f64],
) -> f64 {
    let mut shift = f64::NEG_INFINITY;
    for (j, (&tj, &wj)) in times.iter().zip(weights).enumerate() {
        if Some(j) != exclude && wj > 0.0 {
            shift = shift.max(wj.ln() - beta * (t - tj).abs());
        }
    }
    let mut s = 0.0;
    for (j, (&tj, &wj)) in times.iter().zip(weights).enumerate() {
        if Some(j) == exclude {
            kernel[j] = 0.0;
            continue;
        }
        let e = (-beta * (t - tj).abs() - shift).exp();
        kernel[j] = e;
        if wj > 0.0 {
            s += wj * e;
        }
    }
    for k in kernel.iter_mut() {
        *k /= s;
    }
    -(shift + s.ln()) / beta
}

/// Weighted soft statistic and its gradient with respect to the weights.
///
/// `d_w(e) = -ln( sum_{e' != e} w_e' exp(-beta |t_e - t_e'|) ) / beta`;
/// the member term is the weight-averaged `d_w` over events, the reference
/// term the plain mean of `d_w` over `random_times` (no exclusion).
pub fn weighted_soft_t(times: &[f64], weights: &[f64], random_times: &[f64], beta: f64) -> Result<SoftTrial> {
    check_beta(beta)?;
    if times.len() != weights.len() {
        return Err(Error::LengthMismatch(times.len(), weights.len()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidConfig("weights must be finite and non-negative".into()));
    }
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    if positive == 0 {
        return Err(Error::AllZeroWeights);
    }
    if positive < 2 {
        return Err(Error::InsufficientSet);
    }
    if random_times.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = times.len();
    let mut total_w = 0.0;
    for &w in weights {
        total_w += w;
    }

    let mut kernel = vec![0.0; n];
    let mut member_d = vec![0.0; n];
    // sum_i w_i * kernel_ij, accumulated row by row
    let mut member_pull = vec![0.0; n];
    let mut weighted_sum = 0.0;
    for i in 0..n {
        let d = weighted_row(times[i], times, weights, Some(i), beta, &mut kernel);
        member_d[i] = d;
        weighted_sum += weights[i] * d;
        let wi = weights[i];
        for (acc, k) in member_pull.iter_mut().zip(&kernel) {
            *acc += wi * k;
        }
    }
    let d_disg = weighted_sum / total_w;

    let mut ref_pull = vec![0.0; n];
    let mut ref_sum = 0.0;
    for &r in random_times {
        ref_sum += weighted_row(r, times, weights, None, beta, &mut kernel);
        for (acc, k) in ref_pull.iter_mut().zip(&kernel) {
            *acc += k;
        }
    }
    let n_ref = random_times.len() as f64;
    let d_r = ref_sum / n_ref;
    let t_soft = soft_ratio(d_r, d_disg)?;

    let denom = d_r + d_disg;
    let denom2 = denom * denom;
    let weight_gradient = (0..n)
        .map(|j| {
            let d_disg_dw = (member_d[j] - member_pull[j] / beta - d_disg) / total_w;
            let d_r_dw = -ref_pull[j] / (beta * n_ref);
            (d_disg * d_r_dw - d_r * d_disg_dw) / denom2
        })
        .collect();
    Ok(SoftTrial { d_r_soft: d_r, d_disg_soft: d_disg, t_soft, weight_gradient })
}

/// `gamma * (0.5 - t)^2` and its derivative in `t`.
pub fn vca_penalty(t_soft: f64, gamma: f64) -> (f64, f64) {
    let dev = 0.5 - t_soft;
    (gamma * dev * dev, -2.0 * gamma * dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_neighbour_is_exact() {
        assert_eq!(soft_nn_distance(0, &[0.0, 2.0], 1.0).unwrap(), 2.0);
    }

    #[test]
    fn two_equal_neighbours() {
        let d = soft_nn_distance(1, &[0.0, 1.0, 2.0], 1.0).unwrap();
        // 1 - ln 2, evaluated in extended precision
        assert!((d - 0.306_852_819_440_054_7).abs() < 1e-15, "{d}");
    }

    #[test]
    fn sharp_beta_close_to_min() {
        let d = soft_nn_distance(0, &[0.0, 1.0, 100.0], 50.0).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn insufficient() {
        assert_eq!(soft_nn_distance(0, &[1.0], 1.0), Err(Error::InsufficientSet));
        assert_eq!(soft_nn_gradient(0, &[1.0], 1.0), Err(Error::InsufficientSet));
    }

    #[test]
    fn gradient_single_neighbour() {
        let g = soft_nn_gradient(1, &[0.0, 3.0], 2.0).unwrap();
        assert_eq!(g, vec![-1.0, 1.0]);
    }

    #[test]
    fn gradient_symmetric_neighbours() {
        let g = soft_nn_gradient(1, &[1.0, 2.5, 4.0], 3.0).unwrap();
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn gradient_tie_uses_zero_sign() {
        let g = soft_nn_gradient(0, &[2.0, 2.0], 3.0).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn penalty_values() {
        assert_eq!(vca_penalty(0.5, 0.1), (0.0, 0.0));
        let (v, d) = vca_penalty(1.0, 0.1);
        assert!((v - 0.025).abs() < 1e-15 && (d - 0.1).abs() < 1e-15);
        assert_eq!(vca_penalty(0.9, 0.0), (0.0, 0.0));
    }

    #[test]
    fn adaptive_beta() {
        let c = SoftConfig::default();
        assert_eq!(c.effective_beta(&[0.0, 1.0, 3.0, 4.0]), 5.0);
        assert_eq!(c.effective_beta(&[2.0, 2.0]), c.beta);
        let fixed = SoftConfig { scale_adaptive_beta: false, beta: 3.0, ..c };
        assert_eq!(fixed.effective_beta(&[0.0, 10.0]), 3.0);
        assert_eq!(median_positive_gap(&[0.0, 1.0, 1.0, 4.0]), Some(2.0));
    }

    #[test]
    fn weighted_errors() {
        assert_eq!(weighted_soft_t(&[0.0, 1.0], &[0.0, 0.0], &[0.5], 1.0), Err(Error::AllZeroWeights));
        assert_eq!(weighted_soft_t(&[0.0, 1.0], &[1.0, 0.0], &[0.5], 1.0), Err(Error::InsufficientSet));
        assert_eq!(weighted_soft_t(&[0.0, 1.0], &[1.0], &[0.5], 1.0), Err(Error::LengthMismatch(2, 1)));
        assert_eq!(weighted_soft_t(&[0.0, 1.0], &[1.0, 1.0], &[], 1.0), Err(Error::EmptySet));
    }

    #[test]
    fn weighted_pair_matches_hard_distance() {
        let trial = weighted_soft_t(&[3.0, 5.0], &[1.0, 1.0], &[4.0], 200.0).unwrap();
        assert!((trial.d_disg_soft - 2.0).abs() < 1e-12);
    }
}
