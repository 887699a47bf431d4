//! The five pipeline stages. Each reads what the previous stage wrote, so
//! running them one by one is equivalent to `run-all`.
//!
//! ```text
//! <output>/dataset/...                       simulate (unless `dataset` is set)
//! <output>/enhanced/<method>/<seq>/rgb/      enhance
//! <output>/enhanced/<method>/manifest.json
//! <output>/tracks/<method>/<seq>.txt         track (TUM)
//! <output>/tracks/<method>/<seq>.diagnostics.json
//! <output>/reports/<method>.json             eval
//! <output>/reports/table.txt, summary.csv
//! <output>/reports/ape/<method>/<seq>.csv
//! <output>/reports/overlay/<method>/<seq>.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use exposlam_core::enhance::{enhance, EnhanceMethod, EnhanceParams};
use exposlam_core::metrics::{aggregate, render_table, ApeSeries, EvalReport, TABLE_COLUMNS};
use exposlam_core::odometry::{run_sequence, FrameDiagnostics};
use exposlam_core::simulator::{degrade_frame, generate_trajectory, place_on_axis, render};
use exposlam_core::trajectory::{align_umeyama, anchor_pairs, associate, serialize_tum, MatchedPair, TrajectoryError};
use exposlam_core::{Trajectory, TrajectoryPoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlignmentMode, EvalConfig, ExperimentConfig};
use crate::dataset::{
    create_dir, hash_tree, load_frames, read_json, read_tum, write_json, Manifest, SequenceMeta,
    SequencePaths,
};
use crate::error::{CliError, Result};
use crate::external::enhance_external;
use crate::formats::{frame_name, list_frames, read_png, write_pfm, write_png};

pub struct Layout {
    pub output: PathBuf,
    pub dataset: PathBuf,
}

impl Layout {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            output: cfg.output.clone(),
            dataset: cfg.dataset_dir(),
        }
    }

    pub fn sequence(&self, name: &str) -> SequencePaths {
        SequencePaths::new(&self.dataset, name)
    }

    pub fn enhanced(&self, method: EnhanceMethod) -> PathBuf {
        self.output.join("enhanced").join(method.as_str())
    }

    pub fn enhanced_rgb(&self, method: EnhanceMethod, seq: &str) -> PathBuf {
        self.enhanced(method).join(seq).join("rgb")
    }

    pub fn tracks(&self, method: EnhanceMethod) -> PathBuf {
        self.output.join("tracks").join(method.as_str())
    }

    pub fn track_file(&self, method: EnhanceMethod, seq: &str) -> PathBuf {
        self.tracks(method).join(format!("{seq}.txt"))
    }

    pub fn diagnostics_file(&self, method: EnhanceMethod, seq: &str) -> PathBuf {
        self.tracks(method).join(format!("{seq}.diagnostics.json"))
    }

    pub fn reports(&self) -> PathBuf {
        self.output.join("reports")
    }
}

fn clear_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(CliError::io(path))?;
    }
    create_dir(path)
}

/// Renders, degrades and writes every sequence, then the dataset manifest.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    create_dir(&layout.dataset)?;
    cfg.sequences.par_iter().enumerate().try_for_each(|(index, seq)| -> Result<()> {
        let paths = layout.sequence(&seq.name);
        clear_dir(&paths.root)?;
        create_dir(&paths.rgb_dir())?;
        create_dir(&paths.depth_dir())?;
        let scene = cfg.scene_for(seq);
        let degrade = cfg.degrade_for(index);
        let straight = generate_trajectory(seq.kind, cfg.simulation.frames, cfg.simulation.step)
            .map_err(|e| CliError::Config(format!("sequence {}: {e}", seq.name)))?;
        let gt = place_on_axis(&scene, &straight);
        gt.points().par_iter().enumerate().try_for_each(|(i, p)| -> Result<()> {
            let frame = render(&scene, &cfg.camera, &p.pose).map_err(|e| CliError::Config(format!("sequence {} frame {i}: {e}", seq.name)))?;
            write_png(&paths.rgb_dir().join(frame_name(i)), &degrade_frame(&frame.image, i, &degrade))?;
            write_pfm(&paths.depth(i), &frame.depth)
        })?;
        let gt_path = paths.groundtruth();
        fs::write(&gt_path, serialize_tum(&gt)).map_err(CliError::io(&gt_path))?;
        let meta = SequenceMeta {
            name: seq.name.clone(),
            kind: seq.kind,
            frames: gt.len(),
            step: cfg.simulation.step,
            camera: cfg.camera,
            scene,
            degrade,
            timestamps: gt.points().iter().map(|p| p.timestamp).collect(),
        };
        write_json(&paths.meta(), &meta)
    })?;
    let mut files = std::collections::BTreeMap::new();
    for seq in &cfg.sequences {
        for (k, v) in hash_tree(&layout.sequence(&seq.name).root, &[])? {
            files.insert(format!("{}/{k}", seq.name), v);
        }
    }
    let manifest = Manifest {
        config_sha256: cfg.hash(),
        config: cfg.to_toml(),
        stage: "simulate".into(),
        parameters: None,
        files,
    };
    manifest.write(&layout.dataset.join("manifest.json"))?;
    Ok(manifest)
}

/// Enhances the raw frames of every sequence with `method`.
pub fn enhance_method(cfg: &ExperimentConfig, method: EnhanceMethod) -> Result<Manifest> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let params = EnhanceParams {
        method,
        ..cfg.enhance.clone()
    };
    let root = layout.enhanced(method);
    create_dir(&root)?;
    cfg.sequences.par_iter().try_for_each(|seq| -> Result<()> {
        let input = layout.sequence(&seq.name).rgb_dir();
        if !input.is_dir() {
            return Err(CliError::data(&input, "no frames; run `simulate` first"));
        }
        let out = layout.enhanced_rgb(method, &seq.name);
        clear_dir(&out)?;
        if method == EnhanceMethod::External {
            enhance_external(&input, &out, &params.external_command)?;
            return Ok(());
        }
        list_frames(&input)?.par_iter().try_for_each(|&i| -> Result<()> {
            let (src, dst) = (input.join(frame_name(i)), out.join(frame_name(i)));
            if method == EnhanceMethod::None {
                fs::copy(&src, &dst).map_err(CliError::io(&dst))?;
                return Ok(());
            }
            let img = read_png(&src)?;
            let enhanced = enhance(&img, &params).map_err(|e| CliError::data(&src, e))?;
            write_png(&dst, &enhanced)
        })
    })?;
    let manifest = Manifest {
        config_sha256: cfg.hash(),
        config: cfg.to_toml(),
        stage: format!("enhance:{method}"),
        parameters: Some(serde_json::to_value(&params).expect("params serialize")),
        files: hash_tree(&root, &["manifest.json"])?,
    };
    manifest.write(&root.join("manifest.json"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDiagnostics {
    pub sequence: String,
    pub method: EnhanceMethod,
    /// `ok` or `lost`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lost_frame: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub keyframes: usize,
    pub frames: Vec<FrameDiagnostics>,
}

/// Tracks the `method`-enhanced frames of every sequence. Lost sequences
/// still get their partial trajectory and diagnostics written; the error
/// names them after all sequences ran.
pub fn track_method(cfg: &ExperimentConfig, method: EnhanceMethod) -> Result<Vec<TrackDiagnostics>> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    create_dir(&layout.tracks(method))?;
    let results: Vec<TrackDiagnostics> = cfg
        .sequences
        .par_iter()
        .map(|seq| -> Result<TrackDiagnostics> {
            let rgb = layout.enhanced_rgb(method, &seq.name);
            if !rgb.is_dir() {
                return Err(CliError::data(&rgb, format!("no frames; run `enhance --method {method}` first")));
            }
            let (meta, frames) = load_frames(&layout.sequence(&seq.name), &rgb)?;
            let (run, lost) = match run_sequence(&frames, &meta.camera, &cfg.odometry) {
                Ok(run) => (run, None),
                Err(lost) => (lost.partial.clone(), Some(lost)),
            };
            let path = layout.track_file(method, &seq.name);
            let trajectory = Trajectory::new(seq.name.clone(), run.trajectory.points().to_vec()).expect("timestamps already valid");
            fs::write(&path, serialize_tum(&trajectory)).map_err(CliError::io(&path))?;
            let diag = TrackDiagnostics {
                sequence: seq.name.clone(),
                method,
                status: if lost.is_some() { "lost" } else { "ok" }.into(),
                lost_frame: lost.as_ref().map(|l| l.frame),
                error: lost.as_ref().map(|l| l.error.to_string()),
                keyframes: run.diagnostics.iter().filter(|d| d.keyframe).count(),
                frames: run.diagnostics,
            };
            write_json(&layout.diagnostics_file(method, &seq.name), &diag)?;
            Ok(diag)
        })
        .collect::<Result<_>>()?;
    let lost: Vec<String> = results.iter().filter(|d| d.status != "ok").map(|d| format!("{method}/{}", d.sequence)).collect();
    if lost.is_empty() {
        Ok(results)
    } else {
        Err(CliError::TrackingLost(lost))
    }
}

/// Associates and aligns one ground-truth / estimate pair.
pub fn evaluate_pair(gt: &Trajectory, est: &Trajectory, eval: &EvalConfig) -> std::result::Result<Vec<MatchedPair>, TrajectoryError> {
    let pairs = associate(gt, est, eval.association_tolerance)?;
    Ok(match eval.alignment {
        AlignmentMode::Anchor => anchor_pairs(&pairs),
        AlignmentMode::None => pairs,
        AlignmentMode::Umeyama | AlignmentMode::UmeyamaScale => {
            let sim = align_umeyama(&pairs, eval.alignment == AlignmentMode::UmeyamaScale)?;
            pairs
                .into_iter()
                .map(|p| MatchedPair {
                    gt: p.gt,
                    est: TrajectoryPoint {
                        timestamp: p.est.timestamp,
                        pose: sim.apply_pose(&p.est.pose),
                    },
                })
                .collect()
        }
    })
}

/// One evaluated sequence: its label, source files and aligned pairs.
pub struct EvaluatedSequence {
    pub label: String,
    pub gt_path: PathBuf,
    pub est_path: PathBuf,
    pub pairs: Vec<MatchedPair>,
}

pub fn evaluate_files(label: &str, gt_path: &Path, est_path: &Path, eval: &EvalConfig) -> Result<EvaluatedSequence> {
    let gt = read_tum(gt_path)?;
    let est = read_tum(est_path)?;
    let pairs = evaluate_pair(&gt, &est, eval)
        .map_err(|e| CliError::Data(format!("{} vs {}: {e}", gt_path.display(), est_path.display())))?;
    Ok(EvaluatedSequence {
        label: label.into(),
        gt_path: gt_path.into(),
        est_path: est_path.into(),
        pairs,
    })
}

/// Writes `<method>.json`, per-frame APE and overlay CSVs for one method.
pub fn write_method_report(reports: &Path, method: &str, sequences: &[EvaluatedSequence]) -> Result<EvalReport> {
    let series: Vec<ApeSeries> = sequences.iter().map(|s| ApeSeries::from_pairs(s.label.clone(), &s.pairs)).collect();
    let report = aggregate(method, &series).map_err(|e| CliError::Data(format!("{method}: {e}")))?;
    create_dir(reports)?;
    write_json(&reports.join(format!("{method}.json")), &report)?;
    let ape_dir = reports.join("ape").join(method);
    let overlay_dir = reports.join("overlay").join(method);
    create_dir(&ape_dir)?;
    create_dir(&overlay_dir)?;
    for (s, values) in sequences.iter().zip(&series) {
        let path = ape_dir.join(format!("{}.csv", s.label));
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::data(&path, e))?;
        w.write_record(["timestamp", "ape"]).map_err(|e| CliError::data(&path, e))?;
        for (p, v) in s.pairs.iter().zip(values.values()) {
            w.write_record([format!("{:.9}", p.gt.timestamp), v.to_string()]).map_err(|e| CliError::data(&path, e))?;
        }
        w.flush().map_err(CliError::io(&path))?;

        let path = overlay_dir.join(format!("{}.csv", s.label));
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::data(&path, e))?;
        w.write_record(["timestamp", "gt_x", "gt_y", "gt_z", "est_x", "est_y", "est_z"]).map_err(|e| CliError::data(&path, e))?;
        for p in &s.pairs {
            let (g, e) = (p.gt.pose.trans(), p.est.pose.trans());
            let mut row = vec![format!("{:.9}", p.gt.timestamp)];
            row.extend([g.x, g.y, g.z, e.x, e.y, e.z].iter().map(f64::to_string));
            w.write_record(&row).map_err(|e| CliError::data(&path, e))?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }
    Ok(report)
}

/// `table.txt` and `summary.csv` across methods.
pub fn write_summary(reports_dir: &Path, reports: &[EvalReport]) -> Result<()> {
    create_dir(reports_dir)?;
    let table = reports_dir.join("table.txt");
    fs::write(&table, render_table(reports)).map_err(CliError::io(&table))?;
    let path = reports_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::data(&path, e))?;
    let mut header = vec!["method".to_string()];
    header.extend(TABLE_COLUMNS.iter().map(|c| c.to_string()));
    w.write_record(&header).map_err(|e| CliError::data(&path, e))?;
    for r in reports {
        let mut row = vec![r.method.clone()];
        row.extend(r.table_row().iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| CliError::data(&path, e))?;
    }
    w.flush().map_err(CliError::io(&path))
}

/// Scores the tracked trajectories of each method against the dataset ground truth.
pub fn eval_methods(cfg: &ExperimentConfig, methods: &[EnhanceMethod]) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let mut reports = Vec::new();
    for &method in methods {
        let sequences: Vec<EvaluatedSequence> = cfg
            .sequences
            .par_iter()
            .map(|seq| {
                let gt = layout.sequence(&seq.name).groundtruth();
                evaluate_files(&seq.name, &gt, &layout.track_file(method, &seq.name), &cfg.eval)
            })
            .collect::<Result<_>>()?;
        reports.push(write_method_report(&layout.reports(), method.as_str(), &sequences)?);
    }
    write_summary(&layout.reports(), &reports)?;
    Ok(reports)
}

/// simulate → enhance → track → eval for every configured method.
/// Tracking losses do not stop the run; they are reported at the end.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<EvalReport>> {
    simulate(cfg)?;
    let mut lost = Vec::new();
    for &method in &cfg.methods {
        enhance_method(cfg, method)?;
        match track_method(cfg, method) {
            Ok(_) => {}
            Err(CliError::TrackingLost(names)) => lost.extend(names),
            Err(e) => return Err(e),
        }
    }
    let reports = eval_methods(cfg, &cfg.methods)?;
    if lost.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::TrackingLost(lost))
    }
}

/// Loads a report written by [`eval_methods`].
pub fn read_report(cfg: &ExperimentConfig, method: EnhanceMethod) -> Result<EvalReport> {
    read_json(&Layout::new(cfg).reports().join(format!("{method}.json")))
}
