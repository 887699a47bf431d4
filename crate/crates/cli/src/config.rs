//! Experiment configuration, read from TOML.
//!
//! Every section has defaults, so an empty file is the default experiment:
//! three 200-frame sequences (straight, curved, spiral) at 320×240, degraded,
//! then enhanced with each method, tracked and evaluated.

use std::fs;
use std::path::{Path, PathBuf};

use exposlam_core::enhance::{EnhanceMethod, EnhanceParams};
use exposlam_core::odometry::OdometryConfig;
use exposlam_core::simulator::{DegradeConfig, SceneConfig, TrajectoryKind};
use exposlam_core::trajectory::DEFAULT_ASSOCIATION_TOLERANCE;
use exposlam_core::CameraModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub name: String,
    pub kind: TrajectoryKind,
    /// Bend of the tube axis; overrides the scene value for this sequence.
    #[serde(default)]
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentMode {
    /// Express both trajectories relative to their first pose.
    Anchor,
    Umeyama,
    UmeyamaScale,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub alignment: AlignmentMode,
    /// Seconds.
    pub association_tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alignment: AlignmentMode::Anchor,
            association_tolerance: DEFAULT_ASSOCIATION_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub frames: usize,
    /// Camera travel per frame, scene units.
    pub step: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { frames: 200, step: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Drives the degradation noise and gamma bias of every sequence.
    pub seed: u64,
    /// Dataset directory; `<output>/dataset` when unset.
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
    pub methods: Vec<EnhanceMethod>,
    pub sequences: Vec<SequenceSpec>,
    pub simulation: SimulationConfig,
    pub camera: CameraModel,
    pub scene: SceneConfig,
    pub degrade: DegradeConfig,
    pub enhance: EnhanceParams,
    pub odometry: OdometryConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            dataset: None,
            output: PathBuf::from("exposlam-out"),
            methods: vec![EnhanceMethod::None, EnhanceMethod::GlobalGamma, EnhanceMethod::LocalPyramid],
            sequences: vec![
                SequenceSpec {
                    name: "straight".into(),
                    kind: TrajectoryKind::Straight,
                    curvature: 0.0,
                },
                SequenceSpec {
                    name: "curved".into(),
                    kind: TrajectoryKind::Curved,
                    curvature: 0.1,
                },
                SequenceSpec {
                    name: "spiral".into(),
                    kind: TrajectoryKind::Spiral,
                    curvature: 0.0,
                },
            ],
            simulation: SimulationConfig::default(),
            camera: CameraModel::default(),
            scene: SceneConfig::default(),
            degrade: DegradeConfig::default(),
            enhance: EnhanceParams::default(),
            odometry: OdometryConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.output.join("dataset"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.simulation.frames < 2 {
            return bad(format!("simulation.frames must be at least 2, got {}", self.simulation.frames));
        }
        if !(self.simulation.step > 0.0 && self.simulation.step.is_finite()) {
            return bad("simulation.step must be positive".into());
        }
        if self.sequences.is_empty() {
            return bad("at least one sequence is required".into());
        }
        let mut names: Vec<&str> = self.sequences.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("sequence names must be unique".into());
        }
        for s in &self.sequences {
            let ok = !s.name.is_empty() && s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return bad(format!("sequence name {:?} must be non-empty [A-Za-z0-9_-]", s.name));
            }
            self.scene_for(s).validate().map_err(|e| CliError::Config(format!("sequence {}: {e}", s.name)))?;
        }
        if self.methods.is_empty() {
            return bad("at least one enhancement method is required".into());
        }
        self.camera.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.degrade.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.enhance.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.odometry.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.methods.contains(&EnhanceMethod::External) && self.enhance.external_command.trim().is_empty() {
            return bad("method external needs enhance.external_command".into());
        }
        if !(self.eval.association_tolerance >= 0.0) {
            return bad("eval.association_tolerance must be non-negative".into());
        }
        Ok(())
    }

    pub fn scene_for(&self, seq: &SequenceSpec) -> SceneConfig {
        SceneConfig {
            curvature: seq.curvature,
            ..self.scene.clone()
        }
    }

    /// Degradation of sequence `index`: the experiment seed is mixed with the index.
    pub fn degrade_for(&self, index: usize) -> DegradeConfig {
        DegradeConfig {
            seed: self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64),
            ..self.degrade.clone()
        }
    }

    pub fn sequence(&self, name: &str) -> Result<&SequenceSpec> {
        self.sequences
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CliError::Config(format!("unknown sequence {name:?}")))
    }
}
