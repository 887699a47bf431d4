//! Direct photometric keyframe-to-frame tracking.
//!
//! A keyframe stores a grayscale image, per-pixel depth along the optical
//! axis and a sparse set of high-gradient pixels on each of four pyramid
//! levels. A frame is tracked by Gauss–Newton on the Huber-weighted
//! photometric residual `I_frame(π(T·X)) − I_kf(p)`, coarse to fine, with the
//! pose updated on the left: `T ← exp(δ)·T`, `δ = [translation, rotation]`.
//!
//! The residual assumes brightness constancy up to the geometry of a point
//! light at the camera center: by default the keyframe intensity is scaled
//! by the predicted change of `cos(incidence) / distance²`, with surface
//! normals taken from the keyframe depth. Exposure changes are not modelled.
//! An optional mode estimates a per-frame affine brightness change
//! `e^a·I + b` as two extra parameters.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{SMatrix, SVector, Vector3, Vector6};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::geometry::{skew, Pose, Twist};
use crate::image::{DepthMap, Image};
use crate::pyramid::{gaussian_levels, reduce, LEVELS};
use crate::trajectory::{Trajectory, TrajectoryError, TrajectoryPoint};

type Mat8 = SMatrix<f64, 8, 8>;
type Vec8 = SVector<f64, 8>;

/// Minimum distance of a selected pixel to the image border.
const BORDER: usize = 2;

/// How keyframe intensities are predicted in the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Illumination {
    /// Plain brightness constancy.
    None,
    /// Point light at the camera center.
    CoLocated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryConfig {
    pub huber_threshold: f64,
    pub max_iterations: usize,
    /// Stop a level once the update norm falls below this.
    pub convergence_threshold: f64,
    pub max_step_halvings: usize,
    pub gradient_percentile: f64,
    pub max_points: usize,
    /// Points are stratified over a `grid × grid` partition of the image.
    pub grid: usize,
    pub min_points: usize,
    /// Promote a new keyframe once the camera moved this far from the current one.
    pub keyframe_distance: f64,
    pub keyframe_min_inliers: f64,
    pub affine_brightness: bool,
    pub illumination: Illumination,
    /// Keyframe pixels at or above this intensity are not selected
    /// (clipped pixels do not follow the light model).
    pub max_intensity: f64,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            huber_threshold: 0.03,
            max_iterations: 20,
            convergence_threshold: 1e-6,
            max_step_halvings: 10,
            gradient_percentile: 0.75,
            max_points: 4000,
            grid: 8,
            min_points: 50,
            keyframe_distance: 0.1,
            keyframe_min_inliers: 0.6,
            affine_brightness: false,
            illumination: Illumination::CoLocated,
            max_intensity: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdometryError {
    /// Too few usable points at the coarsest pyramid level.
    TrackingLost { usable: usize, required: usize },
    /// The photometric cost became NaN or infinite.
    Diverged,
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    InvalidConfig(&'static str),
    /// The first frame has no valid depth.
    NoDepth,
    NotEnoughFrames,
    Trajectory(TrajectoryError),
}

impl fmt::Display for OdometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TrackingLost { usable, required } => write!(
                f,
                "tracking lost: {usable} usable points at the coarsest level, {required} required"
            ),
            Self::Diverged => f.write_str("photometric cost diverged"),
            Self::DimensionMismatch { expected, actual } => write!(
                f,
                "frame is {}x{}, keyframe is {}x{}",
                actual.0, actual.1, expected.0, expected.1
            ),
            Self::InvalidConfig(m) => write!(f, "invalid odometry config: {m}"),
            Self::NoDepth => f.write_str("keyframe has no valid depth"),
            Self::NotEnoughFrames => f.write_str("need at least 2 frames"),
            Self::Trajectory(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for OdometryError {}

impl OdometryConfig {
    pub fn validate(&self) -> Result<(), OdometryError> {
        let bad = |m| Err(OdometryError::InvalidConfig(m));
        if !(self.huber_threshold > 0.0) {
            return bad("huber threshold must be positive");
        }
        if self.max_iterations == 0 || self.max_points == 0 || self.grid == 0 {
            return bad("iteration and point budgets must be non-zero");
        }
        if !(0.0..1.0).contains(&self.gradient_percentile) {
            return bad("gradient percentile must be in [0, 1)");
        }
        if !(self.max_intensity > 0.0) {
            return bad("max intensity must be positive");
        }
        if !(0.0..=1.0).contains(&self.keyframe_min_inliers) || !(self.keyframe_distance > 0.0) {
            return bad("keyframe thresholds out of range");
        }
        Ok(())
    }
}

/// Unprojects `(u, v)` at depth `z` (along the optical axis), moves it by
/// `rel_pose` and reprojects. Returns the new pixel and its depth, or `None`
/// when the point lands behind the camera or outside the image.
pub fn warp_point(u: f64, v: f64, z: f64, rel_pose: &Pose, cam: &CameraModel) -> Option<(f64, f64, f64)> {
    let p = rel_pose.transform_point(&cam.unproject(u, v, z));
    let (u2, v2) = cam.project(&p)?;
    cam.contains(u2, v2).then_some((u2, v2, p.z))
}

pub fn warp(u: f64, v: f64, z: f64, rel_pose: &Pose, cam: &CameraModel) -> Option<(f64, f64)> {
    warp_point(u, v, z, rel_pose, cam).map(|(u, v, _)| (u, v))
}

/// Ray-length depth to depth along the optical axis.
pub fn ray_depth_to_z(depth: &DepthMap, cam: &CameraModel) -> Image {
    Image::from_fn(depth.width(), depth.height(), |x, y| {
        let d = depth.get(x, y);
        if d > 0.0 && d.is_finite() {
            d / cam.ray(x as f64, y as f64).norm()
        } else {
            0.0
        }
    })
}

/// Gaussian reduction that ignores invalid (zero) depth samples; a coarse
/// sample is valid only if its whole footprint is.
fn reduce_depth(z: &Image) -> Image {
    let valid = z.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let num = reduce(z);
    let den = reduce(&valid);
    num.zip_with(&den, |n, d| if d > 1.0 - 1e-9 { n / d } else { 0.0 })
        .expect("same shapes")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedPoint {
    pub u: f64,
    pub v: f64,
    /// Depth along the optical axis.
    pub z: f64,
    pub intensity: f64,
    /// Unit surface normal in the keyframe camera, facing the camera.
    pub normal: Vector3<f64>,
    /// `|X|³ / (−n·X)`, so that the light factor is 1 at the keyframe.
    pub light_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeLevel {
    pub cam: CameraModel,
    pub image: Image,
    pub depth: Image,
    pub points: Vec<SelectedPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    /// Camera-to-world.
    pub pose: Pose,
    /// Finest first.
    pub levels: Vec<KeyframeLevel>,
}

fn gradient_magnitude(img: &Image, x: usize, y: usize) -> f64 {
    let gx = 0.5 * (img.get(x + 1, y, 0) - img.get(x - 1, y, 0));
    let gy = 0.5 * (img.get(x, y + 1, 0) - img.get(x, y - 1, 0));
    (gx * gx + gy * gy).sqrt()
}

/// Pixels with gradient magnitude above the configured percentile, capped
/// by round-robin over grid cells in decreasing gradient order.
fn select_points(image: &Image, depth: &Image, cam: &CameraModel, cfg: &OdometryConfig) -> Vec<SelectedPoint> {
    let (w, h, _) = image.dims();
    if w <= 2 * BORDER || h <= 2 * BORDER {
        return Vec::new();
    }
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for y in BORDER..h - BORDER {
        for x in BORDER..w - BORDER {
            let ok = depth.get(x, y, 0) > 0.0
                && depth.get(x - 1, y, 0) > 0.0
                && depth.get(x + 1, y, 0) > 0.0
                && depth.get(x, y - 1, 0) > 0.0
                && depth.get(x, y + 1, 0) > 0.0
                && image.get(x, y, 0) < cfg.max_intensity;
            if ok && surface_normal(depth, cam, x, y).is_some() {
                cands.push((gradient_magnitude(image, x, y), x, y));
            }
        }
    }
    if cands.is_empty() {
        return Vec::new();
    }
    let mut mags: Vec<f64> = cands.iter().map(|c| c.0).collect();
    mags.sort_by(f64::total_cmp);
    let idx = ((mags.len() as f64 * cfg.gradient_percentile) as usize).min(mags.len() - 1);
    let threshold = mags[idx].max(1e-6);
    cands.retain(|c| c.0 > threshold);

    let g = cfg.grid;
    let mut cells: Vec<Vec<(f64, usize, usize)>> = vec![Vec::new(); g * g];
    for c in cands {
        let cell = (c.2 * g / h) * g + c.1 * g / w;
        cells[cell].push(c);
    }
    for cell in &mut cells {
        cell.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    }
    let total: usize = cells.iter().map(Vec::len).sum();
    let mut picked = Vec::with_capacity(total.min(cfg.max_points));
    let mut round = 0;
    while picked.len() < cfg.max_points && picked.len() < total {
        for cell in &cells {
            if let Some(c) = cell.get(round) {
                picked.push(*c);
                if picked.len() == cfg.max_points {
                    break;
                }
            }
        }
        round += 1;
    }
    picked.sort_by_key(|p| (p.2, p.1));
    picked
        .into_iter()
        .map(|(_, x, y)| {
            let (normal, light_scale) = surface_normal(depth, cam, x, y).expect("checked above");
            SelectedPoint {
                u: x as f64,
                v: y as f64,
                z: depth.get(x, y, 0),
                intensity: image.get(x, y, 0),
                normal,
                light_scale,
            }
        })
        .collect()
}

/// Normal from central differences of the back-projected depth map and the
/// matching light scale. `None` for grazing or degenerate geometry.
fn surface_normal(depth: &Image, cam: &CameraModel, x: usize, y: usize) -> Option<(Vector3<f64>, f64)> {
    let at = |x: usize, y: usize| cam.unproject(x as f64, y as f64, depth.get(x, y, 0));
    let p = at(x, y);
    let n = (at(x + 1, y) - at(x - 1, y)).cross(&(at(x, y + 1) - at(x, y - 1)));
    let len = n.norm();
    if !(len > 0.0) {
        return None;
    }
    let mut n = n / len;
    if n.dot(&p) > 0.0 {
        n = -n;
    }
    let r = p.norm();
    let cos = -n.dot(&p) / r;
    (cos > 0.05).then(|| (n, r * r * r / (-n.dot(&p))))
}

impl Keyframe {
    /// `depth` holds ray lengths as produced by the simulator.
    pub fn new(image: &Image, depth: &DepthMap, pose: Pose, cam: &CameraModel, cfg: &OdometryConfig) -> Result<Self, OdometryError> {
        if (image.width(), image.height()) != (cam.width, cam.height) || (depth.width(), depth.height()) != (cam.width, cam.height) {
            return Err(OdometryError::DimensionMismatch {
                expected: (cam.width, cam.height),
                actual: (image.width(), image.height()),
            });
        }
        let gray = image.luminance();
        let images = gaussian_levels(&gray, LEVELS);
        let mut depths = vec![ray_depth_to_z(depth, cam)];
        for _ in 1..LEVELS {
            let next = reduce_depth(depths.last().expect("non-empty"));
            depths.push(next);
        }
        let levels: Vec<KeyframeLevel> = images
            .into_iter()
            .zip(depths)
            .enumerate()
            .map(|(l, (image, depth))| {
                let lcam = cam.at_level(l);
                let points = select_points(&image, &depth, &lcam, cfg);
                KeyframeLevel {
                    cam: lcam,
                    image,
                    depth,
                    points,
                }
            })
            .collect();
        if levels[0].points.is_empty() {
            return Err(OdometryError::NoDepth);
        }
        Ok(Self { pose, levels })
    }
}

/// Residual and its Jacobian with respect to `[δt, δω, a, b]` for one
/// keyframe point, at `pose` (keyframe to frame) and affine parameters
/// `(a, b)`. `None` when the point leaves the frame.
#[inline]
pub fn residual_and_jacobian(
    pt: &SelectedPoint,
    frame: &Image,
    cam: &CameraModel,
    pose: &Pose,
    affine: (f64, f64),
    illumination: Illumination,
) -> Option<(f64, [f64; 8])> {
    let p = pose.transform_point(&cam.unproject(pt.u, pt.v, pt.z));
    if !(p.z > 1e-9) {
        return None;
    }
    let iz = 1.0 / p.z;
    let u = cam.fx * p.x * iz + cam.cx;
    let v = cam.fy * p.y * iz + cam.cy;
    let (val, gx, gy) = frame.sample_bilinear(u, v)?;
    let gain = affine.0.exp();
    // light factor c = k·(−n'·X')/|X'|³; rotations about the light leave it unchanged
    let (light, dlight) = match illumination {
        Illumination::None => (1.0, Vector3::zeros()),
        Illumination::CoLocated => {
            let n = pose.rotation() * pt.normal;
            let r2 = p.norm_squared();
            let r = r2.sqrt();
            let r3 = r2 * r;
            let nd = n.dot(&p);
            let c = -pt.light_scale * nd / r3;
            if !(c > 0.0) {
                return None;
            }
            (c, (-n / r3 + p * (3.0 * nd / (r3 * r2))) * pt.light_scale)
        }
    };
    let predicted = light * pt.intensity;
    let r = val - (gain * predicted + affine.1);
    // d(u,v)/dp
    let du = Vector3::new(cam.fx * iz, 0.0, -cam.fx * p.x * iz * iz);
    let dv = Vector3::new(0.0, cam.fy * iz, -cam.fy * p.y * iz * iz);
    let dp = du * gx + dv * gy;
    // dp/dδ = [I | -[p]×]
    let drot = -(skew(&p).transpose() * dp);
    let dt = dp - dlight * (gain * pt.intensity);
    let j = [dt.x, dt.y, dt.z, drot.x, drot.y, drot.z, -gain * predicted, -1.0];
    Some((r, j))
}

#[inline]
fn huber(r: f64, k: f64) -> (f64, f64) {
    let a = r.abs();
    if a <= k {
        (0.5 * r * r, 1.0)
    } else {
        (k * (a - 0.5 * k), k / a)
    }
}

struct Evaluation {
    cost_sum: f64,
    valid: usize,
    inliers: usize,
    h: Mat8,
    g: Vec8,
}

impl Evaluation {
    fn mean_cost(&self) -> f64 {
        if self.valid == 0 {
            f64::INFINITY
        } else {
            self.cost_sum / self.valid as f64
        }
    }
}

fn evaluate(level: &KeyframeLevel, frame: &Image, pose: &Pose, affine: (f64, f64), cfg: &OdometryConfig, normal_eq: bool) -> Evaluation {
    let k = cfg.huber_threshold;
    let mut e = Evaluation {
        cost_sum: 0.0,
        valid: 0,
        inliers: 0,
        h: Mat8::zeros(),
        g: Vec8::zeros(),
    };
    for pt in &level.points {
        let Some((r, j)) = residual_and_jacobian(pt, frame, &level.cam, pose, affine, cfg.illumination) else {
            continue;
        };
        let (rho, w) = huber(r, k);
        e.cost_sum += rho;
        e.valid += 1;
        if r.abs() <= k {
            e.inliers += 1;
        }
        if normal_eq {
            let jv = Vec8::from_column_slice(&j);
            e.h += jv * jv.transpose() * w;
            e.g += jv * (w * r);
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    /// Keyframe camera to current camera (maps keyframe-frame points into the current frame).
    #[serde(skip)]
    pub relative_pose: Pose,
    /// Mean Huber cost over in-view points at the finest level.
    pub cost: f64,
    pub inlier_fraction: f64,
    pub converged: bool,
    /// Coarsest level first.
    pub iterations: [usize; LEVELS],
    /// Estimated brightness gain exponent and bias (zero unless enabled).
    pub affine: (f64, f64),
}

/// Aligns `frame` to `kf`, starting from `init` (keyframe-to-frame).
pub fn track(kf: &Keyframe, frame: &Image, cam: &CameraModel, init: &Pose, cfg: &OdometryConfig) -> Result<TrackResult, OdometryError> {
    if (frame.width(), frame.height()) != (cam.width, cam.height) || kf.levels[0].cam != *cam {
        return Err(OdometryError::DimensionMismatch {
            expected: (kf.levels[0].cam.width, kf.levels[0].cam.height),
            actual: (frame.width(), frame.height()),
        });
    }
    let frames = gaussian_levels(&frame.luminance(), LEVELS);
    let n_params = if cfg.affine_brightness { 8 } else { 6 };
    let mut pose = *init;
    let mut affine = (0.0, 0.0);
    let mut iterations = [0usize; LEVELS];
    let mut converged = false;
    let mut final_eval = None;

    for (slot, level) in (0..LEVELS).rev().enumerate() {
        let kl = &kf.levels[level];
        let img = &frames[level];
        let mut cur = evaluate(kl, img, &pose, affine, cfg, true);
        if slot == 0 && cur.valid < cfg.min_points {
            return Err(OdometryError::TrackingLost {
                usable: cur.valid,
                required: cfg.min_points,
            });
        }
        if cur.valid == 0 {
            continue;
        }
        converged = false;
        for _ in 0..cfg.max_iterations {
            iterations[slot] += 1;
            let mut h = cur.h;
            let mut g = cur.g;
            for i in n_params..8 {
                h.row_mut(i).fill(0.0);
                h.column_mut(i).fill(0.0);
                h[(i, i)] = 1.0;
                g[i] = 0.0;
            }
            let Some(step) = solve(&h, &g) else {
                converged = true;
                break;
            };
            let step = -step;
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=cfg.max_step_halvings {
                let d = step * scale;
                let cand_pose = Pose::exp(&Twist::from_vector(&Vector6::new(d[0], d[1], d[2], d[3], d[4], d[5]))) * pose;
                let cand_aff = (affine.0 + d[6], affine.1 + d[7]);
                let e = evaluate(kl, img, &cand_pose, cand_aff, cfg, false);
                if e.valid > 0 && e.mean_cost() <= cur.mean_cost() {
                    accepted = Some((cand_pose, cand_aff, d.norm()));
                    break;
                }
                scale *= 0.5;
            }
            let Some((p, a, norm)) = accepted else {
                // no descent direction left
                converged = true;
                break;
            };
            pose = p;
            affine = a;
            cur = evaluate(kl, img, &pose, affine, cfg, true);
            if !cur.mean_cost().is_finite() {
                return Err(OdometryError::Diverged);
            }
            if norm < cfg.convergence_threshold {
                converged = true;
                break;
            }
        }
        if level == 0 {
            final_eval = Some(cur);
        }
    }
    let fe = final_eval.ok_or(OdometryError::TrackingLost {
        usable: 0,
        required: cfg.min_points,
    })?;
    let cost = fe.mean_cost();
    if !cost.is_finite() {
        return Err(OdometryError::Diverged);
    }
    Ok(TrackResult {
        relative_pose: pose,
        cost,
        inlier_fraction: fe.inliers as f64 / kf.levels[0].points.len() as f64,
        converged,
        iterations,
        affine,
    })
}

fn solve(h: &Mat8, g: &Vec8) -> Option<Vec8> {
    if let Some(ch) = h.cholesky() {
        let x = ch.solve(g);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    // near-singular systems get a small diagonal load
    let mut hd = *h;
    let load = 1e-9 * (h.trace() / 8.0).max(1e-12);
    for i in 0..8 {
        hd[(i, i)] += load;
    }
    hd.cholesky().map(|ch| ch.solve(g)).filter(|x| x.iter().all(|v| v.is_finite()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyframeThresholds {
    pub distance: f64,
    pub min_inliers: f64,
}

impl From<&OdometryConfig> for KeyframeThresholds {
    fn from(c: &OdometryConfig) -> Self {
        Self {
            distance: c.keyframe_distance,
            min_inliers: c.keyframe_min_inliers,
        }
    }
}

pub fn needs_keyframe(result: &TrackResult, thresholds: &KeyframeThresholds) -> bool {
    result.relative_pose.trans().norm() > thresholds.distance
        || result.inlier_fraction < thresholds.min_inliers
        || !result.converged
}

/// One input frame: image, ray-length depth and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFrame {
    pub image: Image,
    pub depth: DepthMap,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub index: usize,
    pub timestamp: f64,
    pub cost: f64,
    pub inlier_fraction: f64,
    pub converged: bool,
    pub iterations: [usize; LEVELS],
    /// This frame became the new keyframe.
    pub keyframe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun {
    /// Camera-to-world, first frame at identity.
    pub trajectory: Trajectory,
    pub diagnostics: Vec<FrameDiagnostics>,
}

/// Tracking stopped at `frame`; `partial` holds everything before it.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLost {
    pub frame: usize,
    pub error: OdometryError,
    pub partial: SequenceRun,
}

impl fmt::Display for SequenceLost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame {}: {}", self.frame, self.error)
    }
}

impl core::error::Error for SequenceLost {}

/// Tracks a whole sequence against a moving keyframe with a constant-velocity
/// motion prior.
pub fn run_sequence(frames: &[SequenceFrame], cam: &CameraModel, cfg: &OdometryConfig) -> Result<SequenceRun, SequenceLost> {
    let mut run = SequenceRun {
        trajectory: Trajectory::new("estimate", Vec::new()).expect("empty is valid"),
        diagnostics: Vec::new(),
    };
    let mut points: Vec<TrajectoryPoint> = Vec::with_capacity(frames.len());
    let lost = |frame, error, points: &Vec<TrajectoryPoint>, diagnostics: &Vec<FrameDiagnostics>| SequenceLost {
        frame,
        error,
        partial: SequenceRun {
            trajectory: Trajectory::new("estimate", points.clone()).unwrap_or_else(|_| Trajectory::new("estimate", Vec::new()).expect("empty")),
            diagnostics: diagnostics.clone(),
        },
    };
    if let Err(e) = cfg.validate() {
        return Err(lost(0, e, &points, &run.diagnostics));
    }
    if frames.len() < 2 {
        return Err(lost(0, OdometryError::NotEnoughFrames, &points, &run.diagnostics));
    }
    let thresholds = KeyframeThresholds::from(cfg);
    let first = &frames[0];
    let mut kf = match Keyframe::new(&first.image, &first.depth, Pose::identity(), cam, cfg) {
        Ok(kf) => kf,
        Err(e) => return Err(lost(0, e, &points, &run.diagnostics)),
    };
    points.push(TrajectoryPoint {
        timestamp: first.timestamp,
        pose: Pose::identity(),
    });
    run.diagnostics.push(FrameDiagnostics {
        index: 0,
        timestamp: first.timestamp,
        cost: 0.0,
        inlier_fraction: 1.0,
        converged: true,
        iterations: [0; LEVELS],
        keyframe: true,
    });
    let mut rel_prev = Pose::identity();
    let mut velocity = Pose::identity();
    for (i, f) in frames.iter().enumerate().skip(1) {
        let init = velocity * rel_prev;
        let res = match track(&kf, &f.image, cam, &init, cfg) {
            Ok(r) => r,
            Err(e) => return Err(lost(i, e, &points, &run.diagnostics)),
        };
        let rel = res.relative_pose;
        let pose = kf.pose * rel.inverse();
        let promote = needs_keyframe(&res, &thresholds);
        // a failed track would poison the motion prior
        velocity = if res.converged && res.inlier_fraction >= thresholds.min_inliers {
            rel * rel_prev.inverse()
        } else {
            Pose::identity()
        };
        points.push(TrajectoryPoint {
            timestamp: f.timestamp,
            pose,
        });
        run.diagnostics.push(FrameDiagnostics {
            index: i,
            timestamp: f.timestamp,
            cost: res.cost,
            inlier_fraction: res.inlier_fraction,
            converged: res.converged,
            iterations: res.iterations,
            keyframe: promote,
        });
        if promote {
            match Keyframe::new(&f.image, &f.depth, pose, cam, cfg) {
                Ok(k) => {
                    kf = k;
                    rel_prev = Pose::identity();
                }
                Err(e) => return Err(lost(i, e, &points, &run.diagnostics)),
            }
        } else {
            rel_prev = rel;
        }
    }
    run.trajectory = match Trajectory::new("estimate", points) {
        Ok(t) => t,
        Err(e) => {
            return Err(SequenceLost {
                frame: frames.len() - 1,
                error: OdometryError::Trajectory(e),
                partial: run,
            })
        }
    };
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraModel {
        CameraModel {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            width: 101,
            height: 101,
        }
    }

    #[test]
    fn warp_examples() {
        let c = cam();
        assert_eq!(warp(60.0, 50.0, 1.0, &Pose::identity(), &c), Some((60.0, 50.0)));
        let (u, v) = warp(60.0, 50.0, 1.0, &Pose::translate(0.1, 0.0, 0.0), &c).unwrap();
        assert!((u - 70.0).abs() < 1e-12 && (v - 50.0).abs() < 1e-12);
        // moving toward the scene pushes pixels away from the principal point
        let (u, v) = warp(70.0, 30.0, 2.0, &Pose::translate(0.0, 0.0, -0.2), &c).unwrap();
        assert!(u > 70.0 && v < 30.0);
        assert!(warp(60.0, 50.0, 1.0, &Pose::translate(0.0, 0.0, -2.0), &c).is_none());
        assert!(warp(99.0, 50.0, 1.0, &Pose::translate(0.5, 0.0, 0.0), &c).is_none());
    }

    #[test]
    fn warp_there_and_back() {
        let c = cam();
        let rel = Pose::exp(&Twist::new(Vector3::new(0.01, -0.02, 0.03), Vector3::new(0.05, 0.02, -0.1)));
        let (u, v, z) = warp_point(40.0, 61.0, 1.7, &rel, &c).unwrap();
        let (u0, v0, z0) = warp_point(u, v, z, &rel.inverse(), &c).unwrap();
        assert!((u0 - 40.0).abs() < 1e-9 && (v0 - 61.0).abs() < 1e-9 && (z0 - 1.7).abs() < 1e-12);
    }

    fn result(t: f64, inliers: f64, converged: bool) -> TrackResult {
        TrackResult {
            relative_pose: Pose::translate(t, 0.0, 0.0),
            cost: 0.0,
            inlier_fraction: inliers,
            converged,
            iterations: [1; LEVELS],
            affine: (0.0, 0.0),
        }
    }

    #[test]
    fn keyframe_criteria() {
        let th = KeyframeThresholds {
            distance: 0.1,
            min_inliers: 0.6,
        };
        assert!(!needs_keyframe(&result(0.0, 1.0, true), &th));
        assert!(needs_keyframe(&result(0.2, 1.0, true), &th));
        assert!(needs_keyframe(&result(0.0, 0.3, true), &th));
        assert!(needs_keyframe(&result(0.0, 1.0, false), &th));
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.01, 0.03), (0.5 * 0.01 * 0.01, 1.0));
        let (rho, w) = huber(-0.06, 0.03);
        assert!((rho - 0.03 * (0.06 - 0.015)).abs() < 1e-15);
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn selection_respects_border_cap_and_depth() {
        let img = Image::from_fn(64, 48, |x, y| (((x * 13 + y * 7) % 17) as f64) / 17.0);
        let depth = Image::from_fn(64, 48, |x, _| if x < 32 { 1.0 } else { 0.0 });
        let cfg = OdometryConfig {
            max_points: 100,
            ..OdometryConfig::default()
        };
        let pts = select_points(&img, &depth, &CameraModel::default(), &cfg);
        assert_eq!(pts.len(), 100);
        for p in &pts {
            assert!(p.u >= 2.0 && p.v >= 2.0 && p.u <= 61.0 && p.v <= 45.0);
            assert!(p.z > 0.0 && p.u < 32.0);
        }
    }

    #[test]
    fn depth_reduction_drops_mixed_footprints() {
        let z = Image::from_fn(16, 16, |x, _| if x < 8 { 2.0 } else { 0.0 });
        let r = reduce_depth(&z);
        assert!((r.get(1, 3, 0) - 2.0).abs() < 1e-12);
        assert_eq!(r.get(4, 3, 0), 0.0);
    }
}
