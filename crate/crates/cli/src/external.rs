//! External enhancer hook: `<command> <in_dir> <out_dir>`, one process per
//! sequence, 8-bit `%06d.png` frames in and out.

use std::fs;
use std::path::Path;
use std::process::Command;

use crate::error::{CliError, Result};
use crate::formats::{frame_name, list_frames, png_dimensions};

/// Runs the command through `sh -c` so that it may carry its own arguments,
/// then checks that every input frame came back with the same dimensions
/// and nothing else was added. Returns the frame count.
pub fn enhance_external(frames_dir: &Path, out_dir: &Path, command: &str) -> Result<usize> {
    let inputs = list_frames(frames_dir)?;
    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let status = Command::new("sh")
        .arg("-c")
        .arg(format!("{command} \"$1\" \"$2\""))
        .arg("exposlam-external")
        .arg(frames_dir)
        .arg(out_dir)
        .status()
        .map_err(|e| CliError::External(format!("cannot start {command:?}: {e}")))?;
    if !status.success() {
        let code = status.code().map_or_else(|| "a signal".to_string(), |c| format!("code {c}"));
        return Err(CliError::External(format!("{command:?} exited with {code}")));
    }
    let outputs = list_frames(out_dir)?;
    let missing: Vec<usize> = inputs.iter().filter(|i| outputs.binary_search(i).is_err()).copied().collect();
    let extra: Vec<usize> = outputs.iter().filter(|i| inputs.binary_search(i).is_err()).copied().collect();
    let mut problems = Vec::new();
    if !missing.is_empty() {
        problems.push(format!("missing frames {}", join(&missing)));
    }
    if !extra.is_empty() {
        problems.push(format!("unexpected frames {}", join(&extra)));
    }
    let mut resized = Vec::new();
    for &i in &inputs {
        if missing.contains(&i) {
            continue;
        }
        let a = png_dimensions(&frames_dir.join(frame_name(i)))?;
        let b = png_dimensions(&out_dir.join(frame_name(i))).map_err(|e| CliError::External(e.to_string()))?;
        if a != b {
            resized.push(format!("{i:06} ({}x{} → {}x{})", a.0, a.1, b.0, b.1));
        }
    }
    if !resized.is_empty() {
        problems.push(format!("wrong size {}", resized.join(", ")));
    }
    if problems.is_empty() {
        Ok(inputs.len())
    } else {
        Err(CliError::External(format!("{}: {}", out_dir.display(), problems.join("; "))))
    }
}

fn join(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i:06}")).collect::<Vec<_>>().join(", ")
}
