//! Evaluation reports: JSON summary, error-density bins, density CSV and an
//! SVG density strip.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_stream::{disagreement_set, EvalStream};
use crate::instance_metrics::{auroc, average_precision};
use crate::vcs::{vcs, VcsConfig};

pub const DEFAULT_DENSITY_BINS: usize = 100;

pub const MARKER_TOO_FEW: &str = "too_few_disagreements";
pub const MARKER_DEGENERATE: &str = "degenerate_distances";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcsSummary {
    pub value: f64,
    pub t_mean: f64,
    pub signed_deviation: f64,
    pub tau: usize,
    pub k: usize,
    pub seed: u64,
    pub per_trial_t_stat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcsUndefined {
    /// Machine-readable marker, e.g. `too_few_disagreements`.
    pub undefined: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VcsBlock {
    Defined(VcsSummary),
    Undefined(VcsUndefined),
}

impl VcsBlock {
    pub fn value(&self) -> Option<f64> {
        match self {
            VcsBlock::Defined(s) => Some(s.value),
            VcsBlock::Undefined(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBlock {
    pub bins: usize,
    pub bin_edges: Vec<f64>,
    pub error_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_events: usize,
    pub n_errors: usize,
    pub threshold: f64,
    pub ap: Option<f64>,
    pub auroc: Option<f64>,
    pub vcs: VcsBlock,
    pub density: DensityBlock,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))
    }
}

/// `bins` equal-width bins over `[t_start, t_end]` with error counts.
pub fn density(times: &[f64], period: (f64, f64), bins: usize) -> Result<DensityBlock> {
    if bins == 0 {
        return Err(Error::InvalidConfig("density needs at least one bin".into()));
    }
    let (a, b) = period;
    let span = b - a;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| a + span * i as f64 / bins as f64).collect();
    bin_edges.push(b);
    let mut error_counts = vec![0usize; bins];
    for &t in times {
        let idx = if span > 0.0 { ((t - a) / span * bins as f64).floor() as isize } else { 0 };
        error_counts[idx.clamp(0, bins as isize - 1) as usize] += 1;
    }
    Ok(DensityBlock { bins, bin_edges, error_counts })
}

/// Evaluates a stream: AP, AU-ROC, VCS over the disagreement set, and the
/// error density.
pub fn build_report(stream: &EvalStream, threshold: f64, config: &VcsConfig, bins: usize) -> Result<EvalReport> {
    config.validate()?;
    let set = disagreement_set(stream, threshold)?;
    let vcs_block = match vcs(&set, stream.period(), config) {
        Ok(r) => VcsBlock::Defined(VcsSummary {
            value: r.vcs,
            t_mean: r.t_mean,
            signed_deviation: r.signed_deviation(),
            tau: config.tau,
            k: r.k,
            seed: config.seed,
            per_trial_t_stat: r.t_stats(),
        }),
        Err(e @ Error::TooFewDisagreements(_)) => {
            VcsBlock::Undefined(VcsUndefined { undefined: MARKER_TOO_FEW.into(), reason: e.to_string() })
        }
        Err(e @ Error::DegenerateDistances) => {
            VcsBlock::Undefined(VcsUndefined { undefined: MARKER_DEGENERATE.into(), reason: e.to_string() })
        }
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        n_events: stream.len(),
        n_errors: set.len(),
        threshold,
        ap: average_precision(stream).ok(),
        auroc: auroc(stream).ok(),
        vcs: vcs_block,
        density: density(&set.times(), stream.period(), bins)?,
    })
}

/// Writes `bin_start,bin_end,error_count` rows.
pub fn write_density_csv<W: Write>(density: &DensityBlock, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["bin_start", "bin_end", "error_count"]).map_err(io)?;
    for i in 0..density.bins {
        w.write_record([
            density.bin_edges[i].to_string(),
            density.bin_edges[i + 1].to_string(),
            density.error_counts[i].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

const STRIP_WIDTH: f64 = 800.0;
const STRIP_HEIGHT: f64 = 40.0;
const MARGIN: f64 = 10.0;

/// Horizontal strip of one rectangle per bin; fill opacity is the bin count
/// over the largest count.
pub fn density_svg(report: &EvalReport) -> String {
    let d = &report.density;
    let max = d.error_counts.iter().copied().max().unwrap_or(0);
    let width = STRIP_WIDTH + 2.0 * MARGIN;
    let height = STRIP_HEIGHT + 2.0 * MARGIN + 16.0;
    let bin_w = STRIP_WIDTH / d.bins as f64;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(
        s,
        "  <title>error density: {} errors in {} events</title>",
        report.n_errors, report.n_events
    );
    for (i, &c) in d.error_counts.iter().enumerate() {
        let opacity = if max == 0 { 0.0 } else { c as f64 / max as f64 };
        let _ = writeln!(
            s,
            "  <rect x=\"{:.4}\" y=\"{MARGIN}\" width=\"{:.4}\" height=\"{STRIP_HEIGHT}\" fill=\"#c0392b\" fill-opacity=\"{:.6}\"/>",
            MARGIN + i as f64 * bin_w,
            bin_w,
            opacity
        );
    }
    let _ = writeln!(
        s,
        "  <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{STRIP_WIDTH}\" height=\"{STRIP_HEIGHT}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>"
    );
    let label_y = MARGIN + STRIP_HEIGHT + 14.0;
    let (start, end) = (d.bin_edges[0], d.bin_edges[d.bins]);
    let _ = writeln!(
        s,
        "  <text x=\"{MARGIN}\" y=\"{label_y}\" font-family=\"sans-serif\" font-size=\"11\">{start}</text>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"{}\" y=\"{label_y}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{end}</text>",
        MARGIN + STRIP_WIDTH
    );
    s.push_str("</svg>\n");
    s
}

pub fn emit_density_svg(report: &EvalReport, path: &Path) -> Result<()> {
    std::fs::write(path, density_svg(report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_stream::PredictionRecord;

    fn report_with_counts(counts: Vec<usize>) -> EvalReport {
        let bins = counts.len();
        EvalReport {
            n_events: 10,
            n_errors: counts.iter().sum(),
            threshold: 0.5,
            ap: None,
            auroc: None,
            vcs: VcsBlock::Undefined(VcsUndefined { undefined: MARKER_TOO_FEW.into(), reason: String::new() }),
            density: DensityBlock { bins, bin_edges: (0..=bins).map(|i| i as f64).collect(), error_counts: counts },
        }
    }

    fn opacities(svg: &str) -> Vec<f64> {
        svg.split("fill-opacity=\"")
            .skip(1)
            .map(|s| s.split('"').next().unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn density_edges_and_counts() {
        let d = density(&[0.0, 2.5, 9.99, 10.0], (0.0, 10.0), 4).unwrap();
        assert_eq!(d.bin_edges, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert_eq!(d.error_counts, vec![1, 1, 0, 2]);
        let d = density(&[3.0, 3.0], (3.0, 3.0), 5).unwrap();
        assert_eq!(d.error_counts.iter().sum::<usize>(), 2);
    }

    #[test]
    fn svg_zero_errors_transparent() {
        let svg = density_svg(&report_with_counts(vec![0; 5]));
        assert!(opacities(&svg).iter().all(|&o| o == 0.0));
        assert!(svg.contains("version=\"1.1\""));
    }

    #[test]
    fn svg_single_full_bin() {
        let svg = density_svg(&report_with_counts(vec![0, 0, 7, 0]));
        assert_eq!(opacities(&svg), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn perfect_predictions_marker() {
        let s = EvalStream::new(vec![
            PredictionRecord::new(0.0, 1, 0.9),
            PredictionRecord::new(1.0, 0, 0.1),
            PredictionRecord::new(2.0, 1, 0.8),
        ])
        .unwrap();
        let r = build_report(&s, 0.5, &VcsConfig::default(), 10).unwrap();
        assert_eq!(r.ap, Some(1.0));
        assert!(matches!(&r.vcs, VcsBlock::Undefined(u) if u.undefined == MARKER_TOO_FEW));
        assert_eq!(EvalReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn density_csv_rows() {
        let d = density(&[0.5], (0.0, 2.0), 2).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&d, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bin_start,bin_end,error_count\n0,1,1\n1,2,0\n");
    }
}
