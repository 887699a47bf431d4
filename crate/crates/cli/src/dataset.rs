//! Dataset layout:
//!
//! ```text
//! <dataset>/manifest.json
//! <dataset>/<seq>/rgb/%06d.png
//! <dataset>/<seq>/depth/%06d.pfm
//! <dataset>/<seq>/groundtruth.txt
//! <dataset>/<seq>/meta.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use exposlam_core::odometry::SequenceFrame;
use exposlam_core::simulator::{DegradeConfig, SceneConfig, TrajectoryKind};
use exposlam_core::trajectory::parse_tum;
use exposlam_core::{CameraModel, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::{frame_name, read_pfm, read_png, sha256_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub name: String,
    pub kind: TrajectoryKind,
    pub frames: usize,
    pub step: f64,
    pub camera: CameraModel,
    pub scene: SceneConfig,
    pub degrade: DegradeConfig,
    pub timestamps: Vec<f64>,
}

/// Provenance record: the full config text, its hash and a digest of every file written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub config: String,
    /// Free-form stage description (`simulate`, `enhance:<method>`).
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<serde_json::Value>,
    /// Relative path → SHA-256.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

/// Hashes every regular file below `root`, keyed by `/`-separated relative path.
pub fn hash_tree(root: &Path, skip: &[&str]) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, skip: &[&str], out: &mut BTreeMap<String, String>) -> Result<()> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(CliError::io(dir))?
            .map(|e| e.map(|e| e.path()).map_err(CliError::io(dir)))
            .collect::<Result<_>>()?;
        entries.sort();
        for p in entries {
            let rel: Vec<String> = p
                .strip_prefix(root)
                .expect("below root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            let rel = rel.join("/");
            if skip.contains(&rel.as_str()) {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, skip, out)?;
            } else {
                out.insert(rel, sha256_file(&p)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, skip, &mut out)?;
    Ok(out)
}

pub struct SequencePaths {
    pub root: PathBuf,
}

impl SequencePaths {
    pub fn new(dataset: &Path, name: &str) -> Self {
        Self { root: dataset.join(name) }
    }

    pub fn rgb_dir(&self) -> PathBuf {
        self.root.join("rgb")
    }

    pub fn depth_dir(&self) -> PathBuf {
        self.root.join("depth")
    }

    pub fn depth(&self, index: usize) -> PathBuf {
        self.depth_dir().join(format!("{index:06}.pfm"))
    }

    pub fn groundtruth(&self) -> PathBuf {
        self.root.join("groundtruth.txt")
    }

    pub fn meta(&self) -> PathBuf {
        self.root.join("meta.json")
    }
}

pub fn read_meta(paths: &SequencePaths) -> Result<SequenceMeta> {
    let meta: SequenceMeta = read_json(&paths.meta())?;
    if meta.timestamps.len() != meta.frames {
        return Err(CliError::data(paths.meta(), "timestamp count does not match frame count"));
    }
    Ok(meta)
}

pub fn read_groundtruth(paths: &SequencePaths) -> Result<Trajectory> {
    read_tum(&paths.groundtruth())
}

pub fn read_tum(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_tum(&text).map_err(|e| CliError::data(path, e))
}

/// Loads frames from `rgb_dir` (raw or enhanced) with depth and timestamps from the dataset.
pub fn load_frames(paths: &SequencePaths, rgb_dir: &Path) -> Result<(SequenceMeta, Vec<SequenceFrame>)> {
    let meta = read_meta(paths)?;
    let mut frames = Vec::with_capacity(meta.frames);
    for (i, &timestamp) in meta.timestamps.iter().enumerate() {
        let image_path = rgb_dir.join(frame_name(i));
        if !image_path.exists() {
            return Err(CliError::data(&image_path, "missing frame"));
        }
        let image = read_png(&image_path)?;
        let depth = read_pfm(&paths.depth(i))?;
        let dims = (meta.camera.width, meta.camera.height);
        if (image.width(), image.height()) != dims || (depth.width(), depth.height()) != dims {
            return Err(CliError::data(&image_path, format!("expected {}x{} frame and depth", dims.0, dims.1)));
        }
        frames.push(SequenceFrame { image, depth, timestamp });
    }
    Ok((meta, frames))
}
