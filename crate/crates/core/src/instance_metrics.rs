//! Instance-based metrics: functions of the per-event mismatch multiset, plus
//! score-based AP and AU-ROC.
//!
//! Every [`InstanceMetricSpec`] reduces a prediction to `g({c * 1[y != yhat]})`,
//! so two predictions with the same Hamming disagreement always score the
//! same, whatever the timing of their errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_stream::EvalStream;

/// Symmetric set function applied to the per-event mismatch values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Sum,
    Mean,
    /// `1 - mean`; with unit weight this is accuracy.
    OneMinusMean,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Sum, Aggregator::Mean, Aggregator::OneMinusMean];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetricSpec {
    mismatch_weight: f64,
    aggregator: Aggregator,
}

impl InstanceMetricSpec {
    pub fn new(mismatch_weight: f64, aggregator: Aggregator) -> Result<Self> {
        if !(mismatch_weight.is_finite() && mismatch_weight > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "mismatch weight {mismatch_weight} must be positive and finite"
            )));
        }
        Ok(Self { mismatch_weight, aggregator })
    }

    pub fn mismatch_weight(&self) -> f64 {
        self.mismatch_weight
    }

    pub fn aggregator(&self) -> Aggregator {
        self.aggregator
    }
}

fn check_labels(y: &[u8], yhat: &[u8]) -> Result<()> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if let Some(&bad) = y.iter().chain(yhat).find(|&&l| l > 1) {
        return Err(Error::InvalidLabel(bad));
    }
    Ok(())
}

/// Number of positions where the two label lists differ.
pub fn hamming_disagreement(y: &[u8], yhat: &[u8]) -> Result<usize> {
    check_labels(y, yhat)?;
    Ok(y.iter().zip(yhat).filter(|(a, b)| a != b).count())
}

pub fn instance_metric(spec: &InstanceMetricSpec, y: &[u8], yhat: &[u8]) -> Result<f64> {
    check_labels(y, yhat)?;
    let c = spec.mismatch_weight;
    let sum: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| if a != b { c } else { 0.0 })
        .sum();
    let m = y.len() as f64;
    Ok(match spec.aggregator {
        Aggregator::Sum => sum,
        Aggregator::Mean => sum / m,
        Aggregator::OneMinusMean => 1.0 - sum / m,
    })
}

/// Average precision over the ranking by descending score; ties keep stream
/// order.
pub fn average_precision(stream: &EvalStream) -> Result<f64> {
    let recs = stream.records();
    let positives = recs.iter().filter(|r| r.y == 1).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..recs.len()).collect();
    // stable: equal scores stay in input order
    order.sort_by(|&a, &b| recs[b].p.total_cmp(&recs[a].p));
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if recs[i].y == 1 {
            hits += 1;
            acc += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(acc / positives as f64)
}

/// Mann-Whitney AU-ROC with half credit for tied scores, via midranks.
pub fn auroc(stream: &EvalStream) -> Result<f64> {
    let recs = stream.records();
    let n_pos = recs.iter().filter(|r| r.y == 1).count();
    let n_neg = recs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..recs.len()).collect();
    order.sort_by(|&a, &b| recs[a].p.total_cmp(&recs[b].p));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && recs[order[j + 1]].p == recs[order[i]].p {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the average rank
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| recs[k].y == 1).count();
        rank_sum_pos += midrank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_stream::PredictionRecord;

    fn stream(ys: &[u8], ps: &[f64]) -> EvalStream {
        EvalStream::new(
            ys.iter()
                .zip(ps)
                .enumerate()
                .map(|(i, (&y, &p))| PredictionRecord::new(i as f64, y, p))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hamming_cases() {
        let y = [1, 0, 1, 1];
        assert_eq!(hamming_disagreement(&y, &y).unwrap(), 0);
        assert_eq!(hamming_disagreement(&y, &[0, 1, 0, 0]).unwrap(), 4);
        assert_eq!(hamming_disagreement(&y, &[1, 1, 1, 0]).unwrap(), 2);
        assert_eq!(hamming_disagreement(&y, &[1, 1]), Err(Error::LengthMismatch(4, 2)));
        assert_eq!(hamming_disagreement(&[2], &[1]), Err(Error::InvalidLabel(2)));
    }

    #[test]
    fn metric_cases() {
        let y = [1, 0, 1, 1];
        let yhat = [1, 1, 1, 0];
        let sum = InstanceMetricSpec::new(1.0, Aggregator::Sum).unwrap();
        assert_eq!(instance_metric(&sum, &y, &yhat).unwrap(), 2.0);
        let acc = InstanceMetricSpec::new(1.0, Aggregator::OneMinusMean).unwrap();
        assert_eq!(instance_metric(&acc, &y, &y).unwrap(), 1.0);
        let mean = InstanceMetricSpec::new(3.0, Aggregator::Mean).unwrap();
        assert_eq!(instance_metric(&mean, &y, &yhat).unwrap(), 1.5);
        assert!(InstanceMetricSpec::new(0.0, Aggregator::Sum).is_err());
        assert!(InstanceMetricSpec::new(f64::NAN, Aggregator::Sum).is_err());
    }

    #[test]
    fn ap_cases() {
        assert_eq!(average_precision(&stream(&[1, 1, 0, 0], &[0.9, 0.8, 0.3, 0.1])).unwrap(), 1.0);
        assert_eq!(average_precision(&stream(&[1, 1, 1], &[0.1, 0.5, 0.3])).unwrap(), 1.0);
        let ap = average_precision(&stream(&[1, 0, 1], &[0.9, 0.8, 0.7])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&stream(&[0, 0], &[0.9, 0.8])), Err(Error::NoPositives));
    }

    #[test]
    fn ap_ties_follow_input_order() {
        // negative listed first among equal scores ranks first
        let ap = average_precision(&stream(&[0, 1], &[0.5, 0.5])).unwrap();
        assert_eq!(ap, 0.5);
        let ap = average_precision(&stream(&[1, 0], &[0.5, 0.5])).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn auroc_cases() {
        assert_eq!(auroc(&stream(&[1, 0, 1, 0], &[0.9, 0.2, 0.8, 0.3])).unwrap(), 1.0);
        assert_eq!(auroc(&stream(&[1, 0, 1, 0], &[0.4; 4])).unwrap(), 0.5);
        assert_eq!(auroc(&stream(&[1, 0, 1], &[0.9, 0.8, 0.7])).unwrap(), 0.5);
        assert_eq!(auroc(&stream(&[1, 1], &[0.9, 0.8])), Err(Error::OneClassOnly));
    }
}
