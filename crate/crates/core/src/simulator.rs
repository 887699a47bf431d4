//! Procedural endoscopy-like scenes: a textured tube lit by a point light at
//! the camera center, ground-truth trajectories along its axis, and
//! synthetic exposure degradations.
//!
//! The tube axis starts at the origin heading along `+z`. With non-zero
//! curvature it bends toward `+x` on a circle of radius `1 / curvature`.
//! Texture coordinates are (angle around the axis, arc length / radius), so a
//! scene scaled as a whole renders the same texture.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraError, CameraModel};
use crate::geometry::Pose;
use crate::image::{DepthMap, Image};
use crate::trajectory::{Trajectory, TrajectoryError, TrajectoryPoint};

/// Exposure constant giving the straight-tube reference frame a mean
/// luminance of about 0.45 with the default scene and camera.
pub const REFERENCE_EXPOSURE: f64 = 9.6;

/// Frame rate used for synthetic timestamps.
pub const FRAME_RATE: f64 = 25.0;

/// Hits further than this many radii are reported as invalid depth.
const MAX_DEPTH_RADII: f64 = 50.0;

const MARCH_STEPS: usize = 512;
const MARCH_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum SimulatorError {
    InvalidScene(&'static str),
    InvalidDegrade(&'static str),
    InvalidTrajectory(&'static str),
    Camera(CameraError),
    /// Camera center too close to (or outside) the tube wall.
    OutsideTube { distance_to_axis: f64, radius: f64 },
    Trajectory(TrajectoryError),
}

impl fmt::Display for SimulatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidScene(m) => write!(f, "invalid scene: {m}"),
            Self::InvalidDegrade(m) => write!(f, "invalid degradation: {m}"),
            Self::InvalidTrajectory(m) => write!(f, "invalid trajectory request: {m}"),
            Self::Camera(e) => write!(f, "{e}"),
            Self::OutsideTube {
                distance_to_axis,
                radius,
            } => write!(
                f,
                "camera is {distance_to_axis} from the axis of a tube of radius {radius}: outside or touching the wall"
            ),
            Self::Trajectory(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SimulatorError {}

impl From<CameraError> for SimulatorError {
    fn from(e: CameraError) -> Self {
        Self::Camera(e)
    }
}

impl From<TrajectoryError> for SimulatorError {
    fn from(e: TrajectoryError) -> Self {
        Self::Trajectory(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub radius: f64,
    /// Inverse radius of the axis bend; 0 for a straight tube.
    pub curvature: f64,
    pub texture_seed: u64,
    pub texture_octaves: u32,
    pub albedo_min: f64,
    pub albedo_max: f64,
    /// Per-channel reflectance multiplier (reddish mucosa by default).
    pub tint: [f64; 3],
    pub exposure: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            curvature: 0.0,
            texture_seed: 1,
            texture_octaves: 5,
            albedo_min: 0.25,
            albedo_max: 1.0,
            tint: [1.0, 0.62, 0.52],
            exposure: REFERENCE_EXPOSURE,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SimulatorError::InvalidScene("radius must be positive"));
        }
        if !(self.curvature >= 0.0 && self.curvature * self.radius < 0.5) {
            return Err(SimulatorError::InvalidScene("curvature must be in [0, 0.5 / radius)"));
        }
        if !(1..=8).contains(&self.texture_octaves) {
            return Err(SimulatorError::InvalidScene("texture octaves must be in [1, 8]"));
        }
        let ok = |v: f64| (0.05..=1.0).contains(&v);
        if !(ok(self.albedo_min) && ok(self.albedo_max) && self.albedo_min <= self.albedo_max) {
            return Err(SimulatorError::InvalidScene("albedo range must lie within [0.05, 1]"));
        }
        if !self.tint.iter().all(|t| (0.0..=1.0).contains(t)) || !(self.exposure > 0.0) {
            return Err(SimulatorError::InvalidScene("tint must be in [0, 1] and exposure positive"));
        }
        Ok(())
    }

    /// Pose of the axis frame at arc length `s` (local `z` = tangent,
    /// local `x` = toward the bend center).
    pub fn axis_frame(&self, s: f64) -> Pose {
        if self.curvature == 0.0 {
            return Pose::translate(0.0, 0.0, s);
        }
        let rm = 1.0 / self.curvature;
        let th = s * self.curvature;
        Pose::rot_y(th).with_translation(Vector3::new(rm * (1.0 - th.cos()), 0.0, rm * th.sin()))
    }

    /// Local cylindrical coordinates of a world point:
    /// (distance to axis, angle around axis, arc length).
    fn tube_coords(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        if self.curvature == 0.0 {
            let d = (p.x * p.x + p.y * p.y).sqrt();
            (d, p.y.atan2(p.x), p.z)
        } else {
            let rm = 1.0 / self.curvature;
            let qx = p.x - rm;
            let rho = (qx * qx + p.z * p.z).sqrt();
            let lx = rm - rho;
            let th = p.z.atan2(-qx);
            ((lx * lx + p.y * p.y).sqrt(), p.y.atan2(lx), th * rm)
        }
    }

    /// Closest point on the axis curve.
    fn axis_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        if self.curvature == 0.0 {
            Vector3::new(0.0, 0.0, p.z)
        } else {
            let rm = 1.0 / self.curvature;
            let qx = p.x - rm;
            let rho = (qx * qx + p.z * p.z).sqrt();
            Vector3::new(rm + qx * rm / rho, 0.0, p.z * rm / rho)
        }
    }

    pub fn distance_to_axis(&self, p: &Vector3<f64>) -> f64 {
        self.tube_coords(p).0
    }

    /// First wall hit along `origin + t·dir` (unit `dir`), if any.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let r = self.radius;
        if self.curvature == 0.0 {
            let a = dir.x * dir.x + dir.y * dir.y;
            if a < 1e-18 {
                return None;
            }
            let b = 2.0 * (origin.x * dir.x + origin.y * dir.y);
            let c = origin.x * origin.x + origin.y * origin.y - r * r;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return None;
            }
            let t = (-b + disc.sqrt()) / (2.0 * a);
            return (t > 0.0).then_some(t);
        }
        // the tube interior has an exact distance field r - dist_to_axis
        let max_t = MAX_DEPTH_RADII * r * 2.0;
        let inside = |t: f64| r - self.distance_to_axis(&(origin + dir * t));
        let mut t = 0.0;
        for _ in 0..MARCH_STEPS {
            let d = inside(t);
            if d < MARCH_EPS {
                return Some(t);
            }
            t += d;
            if t > max_t {
                return None;
            }
        }
        // grazing rays converge slowly: bracket the crossing, then bisect
        let h = 1e-3 * r;
        let mut lo = t;
        let mut hi = t + h;
        while inside(hi) > 0.0 {
            lo = hi;
            hi += h.max(inside(hi));
            if hi > max_t {
                return None;
            }
        }
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Seeded multi-octave value noise in `[0, 1]` on tube surface coordinates.
    pub fn albedo(&self, angle: f64, arc: f64) -> f64 {
        let u = (angle / TAU).rem_euclid(1.0);
        let w = arc / self.radius;
        let mut total = 0.0;
        let mut norm = 0.0;
        let mut amp = 1.0;
        for o in 0..self.texture_octaves {
            let cells = 12u64 << o;
            let x = u * cells as f64;
            let y = w * cells as f64 / TAU;
            total += amp * lattice_noise(self.texture_seed, o, cells, x, y);
            norm += amp;
            amp *= 0.55;
        }
        let n = (0.5 + 1.6 * (total / norm - 0.5)).clamp(0.0, 1.0);
        self.albedo_min + (self.albedo_max - self.albedo_min) * n
    }
}

fn hash3(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice_value(seed: u64, octave: u32, i: u64, j: i64) -> f64 {
    let h = hash3(seed.wrapping_add(octave as u64 * 0x1000_0001), i, j as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn quintic(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Value noise periodic in `x` with period `cells`.
fn lattice_noise(seed: u64, octave: u32, cells: u64, x: f64, y: f64) -> f64 {
    let xf = x.floor();
    let yf = y.floor();
    let tx = quintic(x - xf);
    let ty = quintic(y - yf);
    let i0 = (xf as i64).rem_euclid(cells as i64) as u64;
    let i1 = (i0 + 1) % cells;
    let j0 = yf as i64;
    let v00 = lattice_value(seed, octave, i0, j0);
    let v10 = lattice_value(seed, octave, i1, j0);
    let v01 = lattice_value(seed, octave, i0, j0 + 1);
    let v11 = lattice_value(seed, octave, i1, j0 + 1);
    let a = v00 + tx * (v10 - v00);
    let b = v01 + tx * (v11 - v01);
    a + ty * (b - a)
}

/// One rendered view with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub image: Image,
    /// Ray length to the wall; 0 where invalid.
    pub depth: DepthMap,
    /// Camera-to-world.
    pub pose: Pose,
    pub timestamp: f64,
}

/// Pre-tone-map irradiance (single channel, untinted) and ray-length depth.
pub fn render_irradiance(scene: &SceneConfig, cam: &CameraModel, pose: &Pose) -> Result<(Image, DepthMap), SimulatorError> {
    scene.validate()?;
    cam.validate()?;
    let origin = pose.trans();
    let distance_to_axis = scene.distance_to_axis(&origin);
    if distance_to_axis >= 0.99 * scene.radius {
        return Err(SimulatorError::OutsideTube {
            distance_to_axis,
            radius: scene.radius,
        });
    }
    let (w, h) = (cam.width, cam.height);
    let max_depth = MAX_DEPTH_RADII * scene.radius;
    let mut irr = vec![0.0; w * h];
    let mut depth = vec![0.0; w * h];
    let rot = pose.rotation();
    for v in 0..h {
        for u in 0..w {
            let ray = cam.ray(u as f64, v as f64);
            let dir = rot * ray.normalize();
            let Some(t) = scene.intersect(&origin, &dir) else {
                continue;
            };
            let p = origin + dir * t;
            let normal = (scene.axis_point(&p) - p).normalize();
            let cos_in = normal.dot(&-dir).max(0.0);
            let (_, angle, arc) = scene.tube_coords(&p);
            let i = v * w + u;
            irr[i] = scene.albedo(angle, arc) * cos_in / (t * t);
            if t <= max_depth {
                depth[i] = t;
            }
        }
    }
    Ok((
        Image::new(w, h, 1, irr).expect("sized buffer"),
        DepthMap::new(w, h, depth).expect("sized buffer"),
    ))
}

/// Ray-casts the tube from `pose` (camera-to-world). The timestamp is 0.
pub fn render(scene: &SceneConfig, cam: &CameraModel, pose: &Pose) -> Result<RenderedFrame, SimulatorError> {
    let (irr, depth) = render_irradiance(scene, cam, pose)?;
    let mut data = Vec::with_capacity(irr.data().len() * 3);
    for &e in irr.data() {
        for t in scene.tint {
            data.push((scene.exposure * e * t).clamp(0.0, 1.0));
        }
    }
    Ok(RenderedFrame {
        image: Image::new(cam.width, cam.height, 3, data).expect("sized buffer"),
        depth,
        pose: *pose,
        timestamp: 0.0,
    })
}

/// Renders every pose of a trajectory, keeping its timestamps.
pub fn render_trajectory(scene: &SceneConfig, cam: &CameraModel, traj: &Trajectory) -> Result<Vec<RenderedFrame>, SimulatorError> {
    traj.points()
        .iter()
        .map(|p| {
            let mut f = render(scene, cam, &p.pose)?;
            f.timestamp = p.timestamp;
            Ok(f)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Straight,
    Curved,
    Spiral,
}

/// Camera path in the straight-axis frame (camera looks along `+z`).
/// Consecutive positions are exactly `step` apart. Timestamps are
/// `i / FRAME_RATE`.
pub fn generate_trajectory(kind: TrajectoryKind, n_frames: usize, step: f64) -> Result<Trajectory, SimulatorError> {
    if n_frames < 2 {
        return Err(SimulatorError::InvalidTrajectory("need at least 2 frames"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(SimulatorError::InvalidTrajectory("step must be positive"));
    }
    let mut points = Vec::with_capacity(n_frames);
    let ts = |i: usize| i as f64 / FRAME_RATE;
    match kind {
        TrajectoryKind::Straight => {
            for i in 0..n_frames {
                points.push(TrajectoryPoint {
                    timestamp: ts(i),
                    pose: Pose::translate(0.0, 0.0, i as f64 * step),
                });
            }
        }
        TrajectoryKind::Curved => {
            // slow yaw / pitch oscillation; the camera moves along its heading
            let heading = |i: usize| {
                let f = i as f64;
                Pose::rot_y(0.2 * (TAU * f / 100.0).sin()) * Pose::rot_x(0.1 * (TAU * f / 70.0).sin())
            };
            let mut pos = Vector3::zeros();
            for i in 0..n_frames {
                let r = heading(i);
                points.push(TrajectoryPoint {
                    timestamp: ts(i),
                    pose: r.with_translation(pos),
                });
                pos += r.rotation() * Vector3::new(0.0, 0.0, step);
            }
        }
        TrajectoryKind::Spiral => {
            let omega = 0.02;
            let chord = 0.4 * step;
            let rho = chord / (2.0 * (omega / 2.0).sin());
            let dz = (step * step - chord * chord).sqrt();
            for i in 0..n_frames {
                let a = omega * i as f64;
                let pose = Pose::rot_z(a).with_translation(Vector3::new(rho * a.cos(), rho * a.sin(), dz * i as f64));
                points.push(TrajectoryPoint { timestamp: ts(i), pose });
            }
        }
    }
    Ok(Trajectory::new("groundtruth", points)?)
}

/// Maps a straight-axis trajectory onto the (possibly bent) tube axis.
pub fn place_on_axis(scene: &SceneConfig, traj: &Trajectory) -> Trajectory {
    traj.map_poses(|p| {
        let t = p.trans();
        scene.axis_frame(t.z) * p.with_translation(Vector3::new(t.x, t.y, 0.0))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeConfig {
    pub gamma_amplitude: f64,
    /// Frames per drift cycle; 0 disables the drift.
    pub gamma_period: f64,
    /// Standard deviation of the seeded per-frame gamma bias.
    pub gamma_bias_sigma: f64,
    pub vignette_strength: f64,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self {
            gamma_amplitude: 0.5,
            gamma_period: 40.0,
            gamma_bias_sigma: 0.05,
            vignette_strength: 0.5,
            seed: 7,
            noise_sigma: 0.01,
        }
    }
}

impl DegradeConfig {
    pub fn identity() -> Self {
        Self {
            gamma_amplitude: 0.0,
            gamma_period: 0.0,
            gamma_bias_sigma: 0.0,
            vignette_strength: 0.0,
            seed: 0,
            noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimulatorError> {
        let nonneg = [
            self.gamma_amplitude,
            self.gamma_period,
            self.gamma_bias_sigma,
            self.vignette_strength,
            self.noise_sigma,
        ];
        if !nonneg.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(SimulatorError::InvalidDegrade("all parameters must be finite and non-negative"));
        }
        if self.vignette_strength > 1.0 {
            return Err(SimulatorError::InvalidDegrade("vignette strength must be at most 1"));
        }
        Ok(())
    }

    /// `1 + amplitude · sin(2π · frame / period)`, without the random bias.
    pub fn drift_gamma(&self, frame: usize) -> f64 {
        if self.gamma_period == 0.0 || self.gamma_amplitude == 0.0 {
            return 1.0;
        }
        1.0 + self.gamma_amplitude * (TAU * frame as f64 / self.gamma_period).sin()
    }

    fn rng(&self, frame: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(hash3(self.seed, frame as u64, 0x5EED))
    }

    /// Drift plus seeded bias, floored at 0.05.
    pub fn frame_gamma(&self, frame: usize) -> f64 {
        let mut g = self.drift_gamma(frame);
        if self.gamma_bias_sigma > 0.0 {
            let normal = Normal::new(0.0, self.gamma_bias_sigma).expect("sigma is finite and positive");
            g += normal.sample(&mut self.rng(frame));
        }
        g.max(0.05)
    }
}

/// Degrades one frame: gamma, radial vignette `1 − strength·r²` (r = 1 at
/// the corners), additive Gaussian noise, clip to `[0, 1]`.
pub fn degrade_frame(img: &Image, frame: usize, cfg: &DegradeConfig) -> Image {
    let gamma = cfg.frame_gamma(frame);
    let (w, h, c) = img.dims();
    let mut out = img.clone();
    if gamma != 1.0 {
        out = out.map(|v| v.clamp(0.0, 1.0).powf(gamma));
    }
    if cfg.vignette_strength > 0.0 {
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let r2max = cx * cx + cy * cy;
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let r2 = if r2max > 0.0 { (dx * dx + dy * dy) / r2max } else { 0.0 };
                let m = (1.0 - cfg.vignette_strength * r2).max(0.0);
                for ch in 0..c {
                    out.set(x, y, ch, out.get(x, y, ch) * m);
                }
            }
        }
    }
    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma is finite and positive");
        let mut rng = cfg.rng(frame);
        // skip the draw used by the gamma bias
        let _: f64 = normal.sample(&mut rng);
        for v in out.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    out.clamp01()
}

pub fn degrade(frames: &[RenderedFrame], cfg: &DegradeConfig) -> Vec<Image> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| degrade_frame(&f.image, i, cfg))
        .collect()
}

/// Angle of the relative rotation between consecutive poses, radians.
pub fn step_angles(traj: &Trajectory) -> Vec<f64> {
    traj.points()
        .windows(2)
        .map(|w| (w[0].pose.inverse() * w[1].pose).angle())
        .collect()
}
