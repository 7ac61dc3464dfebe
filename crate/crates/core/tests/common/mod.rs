//! Reference implementations used as oracles by the integration tests.
//!
//! Each oracle is written from the definition, with its own loops and its own
//! random generator, and shares no code path with the library beyond plain
//! data types.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};

/// Smallest `|t_i - t_j|` over `j != i`, by exhaustive scan.
pub fn brute_nn(times: &[f64], i: usize) -> f64 {
    times
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, &t)| (times[i] - t).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `|t - t_j|` over all `j`, by exhaustive scan.
pub fn brute_distance(t: f64, times: &[f64]) -> f64 {
    times.iter().map(|&u| (t - u).abs()).fold(f64::INFINITY, f64::min)
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half, over all pairs.
pub fn brute_auroc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

/// Mean precision at each positive, ranking by descending score with ties
/// kept in input order.
pub fn brute_ap(labels: &[u8], scores: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    // insertion sort keeps equal scores in input order
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && scores[order[j - 1]] < scores[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let positives = labels.iter().filter(|&&y| y == 1).count() as f64;
    let mut hits = 0.0;
    let mut total = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if labels[idx] == 1 {
            hits += 1.0;
            total += hits / (rank + 1) as f64;
        }
    }
    total / positives
}

/// VCS of one error set computed directly from the definition with an
/// independent generator: `tau` repeats, each comparing `k` sampled members'
/// nearest-neighbour distances with `k` uniform reference points.
pub fn oracle_vcs(times: &[f64], period: (f64, f64), tau: usize, rng: &mut StdRng) -> f64 {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = (n / 2).clamp(1, n - 1);
    let nearest = |t: f64, skip: Option<usize>| -> f64 {
        let pos = sorted.partition_point(|&u| u < t);
        let mut best = f64::INFINITY;
        for j in pos.saturating_sub(2)..(pos + 2).min(n) {
            if Some(j) != skip {
                best = best.min((sorted[j] - t).abs());
            }
        }
        best
    };
    let mut t_sum = 0.0;
    for _ in 0..tau {
        let mut d_disg = 0.0;
        for i in sample(rng, n, k).into_iter() {
            d_disg += nearest(sorted[i], Some(i));
        }
        let mut d_r = 0.0;
        for _ in 0..k {
            d_r += nearest(rng.gen_range(period.0..period.1), None);
        }
        t_sum += d_r / (d_r + d_disg);
    }
    (0.5 - t_sum / tau as f64).abs()
}

/// Upper `quantile` of VCS over `runs` uniform error sets of size `k_errors`.
pub fn uniform_vcs_quantile(runs: usize, k_errors: usize, period: (f64, f64), tau: usize, quantile: f64, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..runs)
        .map(|_| {
            let times: Vec<f64> = (0..k_errors).map(|_| rng.gen_range(period.0..period.1)).collect();
            oracle_vcs(&times, period, tau, &mut rng)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let idx = ((quantile * runs as f64).ceil() as usize).clamp(1, runs) - 1;
    values[idx]
}

/// Plain logistic regression by full-batch gradient descent from zero, with
/// the same probability clamp as the trainer: clamped events contribute to
/// the loss but not to the gradient.
pub fn logistic_regression(xs: &[Vec<f64>], ys: &[u8], learning_rate: f64, epochs: usize) -> (Vec<f64>, Vec<f64>) {
    let dim = xs[0].len();
    let n = xs.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut losses = Vec::new();
    for _ in 0..epochs {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let mut z = b;
            for j in 0..dim {
                z += w[j] * x[j];
            }
            let p = 1.0 / (1.0 + (-z).exp());
            let pc = p.clamp(1e-7, 1.0 - 1e-7);
            loss -= if y == 1 { pc.ln() } else { (1.0 - pc).ln() };
            if pc == p {
                let r = (p - y as f64) / n;
                for j in 0..dim {
                    gw[j] += r * x[j];
                }
                gb += r;
            }
        }
        losses.push(loss / n);
        for j in 0..dim {
            w[j] -= learning_rate * gw[j];
        }
        b -= learning_rate * gb;
    }
    w.push(b);
    (w, losses)
}
