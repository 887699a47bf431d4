//! Timestamped pose sequences, the TUM text format, timestamp association
//! and frame anchoring / similarity alignment.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use nalgebra::{Matrix3, Vector3, SVD};
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{nearest_rotation, GeometryError, Pose};

/// Half a frame interval at 25 fps.
pub const DEFAULT_ASSOCIATION_TOLERANCE: f64 = 0.02;

/// Max deviation of a quaternion norm from 1 that is silently normalized.
const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryError {
    /// A line could not be read as `t tx ty tz qx qy qz qw`.
    Parse { line: usize, reason: String },
    /// Quaternion norm too far from one.
    QuaternionNorm { line: usize, norm: f64 },
    /// Timestamps must be finite, non-negative and strictly increasing.
    Timestamp { index: usize, timestamp: f64 },
    Empty,
    NoOverlap,
    /// Point sets too degenerate to fix a rigid/similarity transform.
    RankDeficient { pairs: usize },
    Geometry(GeometryError),
}

impl fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse { line, reason } => write!(f, "line {line}: {reason}"),
            Self::QuaternionNorm { line, norm } => {
                write!(f, "line {line}: quaternion norm {norm} deviates from 1 by more than {QUATERNION_NORM_TOLERANCE}")
            }
            Self::Timestamp { index, timestamp } => write!(
                f,
                "point {index}: timestamp {timestamp} is not finite, non-negative and strictly increasing"
            ),
            Self::Empty => f.write_str("trajectory is empty"),
            Self::NoOverlap => f.write_str("no overlap: no timestamps could be associated"),
            Self::RankDeficient { pairs } => {
                write!(f, "degenerate point sets ({pairs} pairs): collinear or coincident positions")
            }
            Self::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrajectoryError {}

impl From<GeometryError> for TrajectoryError {
    fn from(e: GeometryError) -> Self {
        Self::Geometry(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub timestamp: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub gt: TrajectoryPoint,
    pub est: TrajectoryPoint,
}

impl Trajectory {
    /// Validates timestamps. An empty point list is allowed here; parsing
    /// rejects empty input.
    pub fn new(label: impl Into<String>, points: Vec<TrajectoryPoint>) -> Result<Self, TrajectoryError> {
        let mut prev = f64::NEG_INFINITY;
        for (index, p) in points.iter().enumerate() {
            let t = p.timestamp;
            if !t.is_finite() || t < 0.0 || t <= prev {
                return Err(TrajectoryError::Timestamp { index, timestamp: t });
            }
            prev = t;
        }
        Ok(Self {
            points,
            label: label.into(),
        })
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> + '_ {
        self.points.iter().map(|p| &p.pose)
    }

    /// Sum of distances between consecutive positions.
    pub fn path_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].pose.trans() - w[0].pose.trans()).norm())
            .sum()
    }

    /// Applies `f` to every pose, keeping timestamps.
    pub fn map_poses(&self, mut f: impl FnMut(&Pose) -> Pose) -> Trajectory {
        Trajectory {
            points: self
                .points
                .iter()
                .map(|p| TrajectoryPoint {
                    timestamp: p.timestamp,
                    pose: f(&p.pose),
                })
                .collect(),
            label: self.label.clone(),
        }
    }
}

/// Splits on any ASCII whitespace; `#` starts a comment line.
pub fn parse_tum(text: &str) -> Result<Trajectory, TrajectoryError> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = [0.0f64; 8];
        let mut count = 0;
        for tok in line.split_ascii_whitespace() {
            if count == 8 {
                count += 1;
                break;
            }
            fields[count] = tok.parse::<f64>().map_err(|_| TrajectoryError::Parse {
                line: line_no,
                reason: alloc::format!("field {} ({tok:?}) is not a number", count + 1),
            })?;
            count += 1;
        }
        if count != 8 {
            return Err(TrajectoryError::Parse {
                line: line_no,
                reason: String::from("expected 8 fields: timestamp tx ty tz qx qy qz qw"),
            });
        }
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(TrajectoryError::Parse {
                line: line_no,
                reason: String::from("non-finite value"),
            });
        }
        let q = [fields[4], fields[5], fields[6], fields[7]];
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(TrajectoryError::QuaternionNorm { line: line_no, norm });
        }
        let pose = Pose::from_quaternion(q, Vector3::new(fields[1], fields[2], fields[3]))?;
        points.push(TrajectoryPoint {
            timestamp: fields[0],
            pose,
        });
    }
    if points.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    Trajectory::new(String::new(), points)
}

/// Timestamps with 9 decimals; pose components in shortest round-trip form.
pub fn serialize_tum(traj: &Trajectory) -> String {
    let mut out = String::new();
    for p in traj.points() {
        let t = p.pose.trans();
        let q = p.pose.quaternion();
        let _ = write!(out, "{:.9}", p.timestamp);
        for v in t.iter().chain(q.iter()) {
            // -0 would print as "-0"
            let v = if *v == 0.0 { 0.0 } else { *v };
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

/// Greedy nearest-timestamp matching: candidate pairs within `tolerance` are
/// taken in order of increasing time gap, each point used at most once.
/// The result is ordered by ground-truth timestamp.
pub fn associate(gt: &Trajectory, est: &Trajectory, tolerance: f64) -> Result<Vec<MatchedPair>, TrajectoryError> {
    let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
    let est_pts = est.points();
    let mut lo = 0;
    for (i, g) in gt.points().iter().enumerate() {
        while lo < est_pts.len() && est_pts[lo].timestamp < g.timestamp - tolerance {
            lo += 1;
        }
        let mut j = lo;
        while j < est_pts.len() && est_pts[j].timestamp <= g.timestamp + tolerance {
            let dt = (est_pts[j].timestamp - g.timestamp).abs();
            if dt <= tolerance {
                candidates.push((dt, g.timestamp + est_pts[j].timestamp, i, j));
            }
            j += 1;
        }
    }
    // the key is symmetric in (gt, est) so swapping the inputs mirrors the selection
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut gt_used = alloc::vec![false; gt.len()];
    let mut est_used = alloc::vec![false; est.len()];
    let mut chosen = Vec::new();
    for (_, _, i, j) in candidates {
        if !gt_used[i] && !est_used[j] {
            gt_used[i] = true;
            est_used[j] = true;
            chosen.push((i, j));
        }
    }
    if chosen.is_empty() {
        return Err(TrajectoryError::NoOverlap);
    }
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|(i, j)| MatchedPair {
            gt: gt.points()[i],
            est: est.points()[j],
        })
        .collect())
}

/// Expresses every pose relative to the first one.
pub fn anchor_to_first(traj: &Trajectory) -> Trajectory {
    match traj.points().first() {
        Some(first) => {
            let inv = first.pose.inverse();
            traj.map_poses(|p| inv.compose(p))
        }
        None => traj.clone(),
    }
}

/// Anchors both sides of every pair to the first pair's poses.
pub fn anchor_pairs(pairs: &[MatchedPair]) -> Vec<MatchedPair> {
    let Some(first) = pairs.first() else {
        return Vec::new();
    };
    let gt0 = first.gt.pose.inverse();
    let est0 = first.est.pose.inverse();
    pairs
        .iter()
        .map(|p| MatchedPair {
            gt: TrajectoryPoint {
                timestamp: p.gt.timestamp,
                pose: gt0.compose(&p.gt.pose),
            },
            est: TrajectoryPoint {
                timestamp: p.est.timestamp,
                pose: est0.compose(&p.est.pose),
            },
        })
        .collect()
}

/// Similarity `x ↦ s·R·x + t` mapping estimated positions onto ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub pose: Pose,
    pub scale: f64,
}

impl Similarity {
    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose.rotation() * p * self.scale + self.pose.trans()
    }

    pub fn apply_pose(&self, p: &Pose) -> Pose {
        Pose::from_parts_unchecked(self.pose.rotation() * p.rotation(), self.apply_point(&p.trans()))
    }
}

/// Closed-form least-squares alignment (Umeyama) of estimated positions to
/// ground-truth positions. With `with_scale = false` the scale is fixed at 1.
pub fn align_umeyama(pairs: &[MatchedPair], with_scale: bool) -> Result<Similarity, TrajectoryError> {
    let n = pairs.len();
    if n < 3 {
        return Err(TrajectoryError::RankDeficient { pairs: n });
    }
    let nf = n as f64;
    let src: Vec<Vector3<f64>> = pairs.iter().map(|p| p.est.pose.trans()).collect();
    let dst: Vec<Vector3<f64>> = pairs.iter().map(|p| p.gt.pose.trans()).collect();
    let mu_s = src.iter().fold(Vector3::zeros(), |a, v| a + v) / nf;
    let mu_d = dst.iter().fold(Vector3::zeros(), |a, v| a + v) / nf;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(&dst) {
        let sc = s - mu_s;
        cov += (d - mu_d) * sc.transpose();
        var_s += sc.norm_squared();
    }
    cov /= nf;
    var_s /= nf;

    let svd = SVD::new(cov, true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(TrajectoryError::RankDeficient { pairs: n });
    };
    let sv = svd.singular_values;
    let smax = sv.max();
    // rank < 2 means the points are collinear or coincident
    let rank = sv.iter().filter(|&&v| v > smax * 1e-10 && v > 1e-15).count();
    if rank < 2 || var_s <= 1e-15 {
        return Err(TrajectoryError::RankDeficient { pairs: n });
    }
    let mut d = Matrix3::identity();
    if u.determinant() * vt.determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = nearest_rotation(&(u * d * vt));
    let scale = if with_scale {
        let mut tr = 0.0;
        for i in 0..3 {
            tr += sv[i] * d[(i, i)];
        }
        tr / var_s
    } else {
        1.0
    };
    let t = mu_d - r * mu_s * scale;
    Ok(Similarity {
        pose: Pose::from_parts_unchecked(r, t),
        scale,
    })
}

/// Sum of squared position residuals `|gt − f(est)|²` over the pairs.
pub fn alignment_residual(pairs: &[MatchedPair], sim: &Similarity) -> f64 {
    pairs
        .iter()
        .map(|p| (p.gt.pose.trans() - sim.apply_point(&p.est.pose.trans())).norm_squared())
        .sum()
}
