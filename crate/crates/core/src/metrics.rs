//! Absolute pose error, RMSE and multi-sequence aggregation.
//!
//! Conventions fixed here and written into every report:
//! - standard deviations use the population (1/N) normalization;
//! - the cross-sequence `std` is taken over per-sequence means;
//! - the cross-sequence `median` is the mean of per-sequence medians.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::Pose;
use crate::trajectory::MatchedPair;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    EmptySeries { label: String },
    NoSeries,
    InvalidValue { label: String, index: usize, value: f64 },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptySeries { label } => write!(f, "APE series {label:?} is empty"),
            Self::NoSeries => f.write_str("no APE series to aggregate"),
            Self::InvalidValue { label, index, value } => {
                write!(f, "APE series {label:?}: value {index} = {value} is negative or non-finite")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// `E = gt⁻¹ · est`.
pub fn relative_pose_error(gt: &Pose, est: &Pose) -> Pose {
    gt.inverse().compose(est)
}

/// Euclidean norm of the translational part of [`relative_pose_error`].
/// Rotation errors do not contribute.
pub fn ape(gt: &Pose, est: &Pose) -> f64 {
    relative_pose_error(gt, est).trans().norm()
}

/// Per-frame APE values of one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApeSeries {
    pub label: String,
    values: Vec<f64>,
}

impl ApeSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, MetricsError> {
        let label = label.into();
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(MetricsError::InvalidValue { label, index, value });
        }
        Ok(Self { label, values })
    }

    pub fn from_pairs(label: impl Into<String>, pairs: &[MatchedPair]) -> Self {
        Self {
            label: label.into(),
            values: pairs.iter().map(|p| ape(&p.gt.pose, &p.est.pose)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn rmse(series: &ApeSeries) -> Result<f64, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries {
            label: series.label.clone(),
        });
    }
    Ok(rms(series.values()))
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceStats {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledStats {
    pub ape_mean: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossStats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub std_normalization: String,
    pub cross_mean_over: String,
    pub cross_median_over: String,
    pub cross_std_over: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            std_normalization: "population (1/N)".into(),
            cross_mean_over: "mean of per-sequence means".into(),
            cross_median_over: "mean of per-sequence medians".into(),
            cross_std_over: "population std of per-sequence means".into(),
        }
    }
}

/// Per-sequence, pooled and cross-sequence APE statistics for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub sequences: Vec<SequenceStats>,
    pub pooled: PooledStats,
    pub cross: CrossStats,
    pub conventions: Conventions,
}

/// Pooled statistics use every APE value of every sequence at once;
/// cross-sequence statistics use the per-sequence means and medians.
pub fn aggregate(method: impl Into<String>, series_list: &[ApeSeries]) -> Result<EvalReport, MetricsError> {
    if series_list.is_empty() {
        return Err(MetricsError::NoSeries);
    }
    let mut sequences = Vec::with_capacity(series_list.len());
    let mut pooled = Vec::new();
    for s in series_list {
        if s.is_empty() {
            return Err(MetricsError::EmptySeries { label: s.label.clone() });
        }
        pooled.extend_from_slice(s.values());
        sequences.push(SequenceStats {
            label: s.label.clone(),
            n: s.len(),
            mean: mean(s.values()),
            median: median(s.values()),
            std: std_dev(s.values()),
        });
    }
    let means: Vec<f64> = sequences.iter().map(|s| s.mean).collect();
    let medians: Vec<f64> = sequences.iter().map(|s| s.median).collect();
    Ok(EvalReport {
        method: method.into(),
        pooled: PooledStats {
            ape_mean: mean(&pooled),
            rmse: rms(&pooled),
        },
        cross: CrossStats {
            mean: mean(&means),
            median: mean(&medians),
            std: std_dev(&means),
        },
        sequences,
        conventions: Conventions::default(),
    })
}

pub const TABLE_COLUMNS: [&str; 5] = ["APE mean", "RMSE", "std", "median", "mean"];

impl EvalReport {
    /// Values in [`TABLE_COLUMNS`] order.
    pub fn table_row(&self) -> [f64; 5] {
        [
            self.pooled.ape_mean,
            self.pooled.rmse,
            self.cross.std,
            self.cross.median,
            self.cross.mean,
        ]
    }
}

/// For each column, which rows hold the minimum (ties all marked).
pub fn best_per_column(rows: &[[f64; 5]]) -> Vec<[bool; 5]> {
    let mut mins = [f64::INFINITY; 5];
    for r in rows {
        for (m, v) in mins.iter_mut().zip(r) {
            *m = m.min(*v);
        }
    }
    rows.iter()
        .map(|r| core::array::from_fn(|c| r[c] == mins[c]))
        .collect()
}

/// Aligned plain-text comparison table; the best (lowest) value of each
/// column is marked with `*`.
pub fn render_table(reports: &[EvalReport]) -> String {
    let rows: Vec<[f64; 5]> = reports.iter().map(EvalReport::table_row).collect();
    let best = best_per_column(&rows);
    let name_w = reports.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let conv = Conventions::default();
    let _ = writeln!(
        out,
        "# std: {}; cross std over {}; cross median = {}; * = best in column",
        conv.std_normalization, conv.cross_std_over, conv.cross_median_over
    );
    let _ = write!(out, "{:<name_w$}", "method");
    for c in TABLE_COLUMNS {
        let _ = write!(out, "  {c:>10}");
    }
    out.push('\n');
    for (r, (vals, marks)) in reports.iter().zip(rows.iter().zip(&best)) {
        let _ = write!(out, "{:<name_w$}", r.method);
        for (v, m) in vals.iter().zip(marks) {
            let cell = if *m {
                alloc::format!("*{v:.4}")
            } else {
                alloc::format!("{v:.4}")
            };
            let _ = write!(out, "  {cell:>10}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn series(v: &[f64]) -> ApeSeries {
        ApeSeries::new("s", v.to_vec()).unwrap()
    }

    #[test]
    fn ape_examples() {
        let p = Pose::rot_x(0.2) * Pose::translate(1.0, 2.0, 3.0);
        assert_eq!(ape(&p, &p), 0.0);
        assert_eq!(ape(&Pose::identity(), &Pose::translate(3.0, 4.0, 0.0)), 5.0);
        assert_eq!(ape(&Pose::identity(), &Pose::rot_z(core::f64::consts::FRAC_PI_2)), 0.0);
    }

    #[test]
    fn relative_error_of_rotated_estimate() {
        let gt = Pose::translate(1.0, 0.0, 0.0);
        let est = gt * Pose::rot_z(10f64.to_radians());
        let e = relative_pose_error(&gt, &est);
        assert!(e.max_abs_diff(&Pose::rot_z(10f64.to_radians())) < 1e-15);
        assert_eq!(relative_pose_error(&gt, &gt), Pose::identity());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&series(&[1.0, 1.0, 1.0])).unwrap(), 1.0);
        assert!((rmse(&series(&[0.0, 2.0])).unwrap() - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(rmse(&series(&[])).is_err());
        assert!(ApeSeries::new("bad", vec![1.0, -0.5]).is_err());
        assert!(ApeSeries::new("bad", vec![f64::NAN]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let r = aggregate("m", &[series(&[1.0, 1.0])]).unwrap();
        assert_eq!(r.pooled.ape_mean, 1.0);
        assert_eq!(r.pooled.rmse, 1.0);
        assert_eq!(r.cross.std, 0.0);
        assert_eq!(r.pooled.ape_mean, r.sequences[0].mean);

        let r = aggregate("m", &[series(&[0.0, 0.0]), series(&[2.0, 2.0])]).unwrap();
        assert_eq!(r.pooled.ape_mean, 1.0);
        assert!((r.pooled.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.cross.mean, 1.0);
        assert_eq!(r.cross.median, 1.0);
        assert_eq!(r.cross.std, 1.0);

        assert_eq!(aggregate("m", &[]), Err(MetricsError::NoSeries));
        assert!(aggregate("m", &[series(&[1.0]), series(&[])]).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    fn report_with(method: &str, ape_mean: f64) -> EvalReport {
        let mut r = aggregate(method, &[series(&[1.0])]).unwrap();
        r.pooled.ape_mean = ape_mean;
        r
    }

    #[test]
    fn table_marks_column_minimum() {
        let reports = [
            report_with("none", 1.28),
            report_with("global_gamma", 1.04),
            report_with("local_pyramid", 0.97),
        ];
        let best = best_per_column(&reports.iter().map(EvalReport::table_row).collect::<Vec<_>>());
        assert!(!best[0][0]);
        assert!(!best[1][0]);
        assert!(best[2][0]);
        let text = render_table(&reports);
        assert!(text.contains("*0.9700"));
        assert!(!text.contains("*1.2800"));
    }
}
