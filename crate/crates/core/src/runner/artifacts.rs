use std::io;
use std::path::{Path, PathBuf};

use super::exec::ScenarioRun;

/// Environment variable that redirects trace files to another directory.
pub const TRACE_DIR_ENV: &str = "VNETSIM_TRACE_DIR";

/// Where each cell's trace goes. `requested` is the user's trace path, if
/// any; `dir_override` replaces its directory. With neither, nothing is
/// written. A run with several cells gets one file per cell, named after
/// the requested file's stem and the cell.
pub fn trace_paths(
    run: &ScenarioRun,
    requested: Option<&Path>,
    dir_override: Option<&Path>,
) -> Vec<PathBuf> {
    if requested.is_none() && dir_override.is_none() {
        return Vec::new();
    }
    let default_name = format!("{}.jsonl", run.name);
    let file_name = requested
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or(default_name);
    let dir = dir_override
        .map(Path::to_path_buf)
        .or_else(|| requested.and_then(Path::parent).map(Path::to_path_buf))
        .unwrap_or_default();
    if run.cells.len() == 1 {
        return vec![dir.join(file_name)];
    }
    let path = Path::new(&file_name);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| run.name.clone());
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "jsonl".into());
    run.cells
        .iter()
        .map(|c| dir.join(format!("{stem}.{}.{ext}", c.label())))
        .collect()
}

/// Write every cell's trace as JSON lines. Returns the files written.
pub fn write_traces(
    run: &ScenarioRun,
    requested: Option<&Path>,
    dir_override: Option<&Path>,
) -> io::Result<Vec<PathBuf>> {
    let paths = trace_paths(run, requested, dir_override);
    for (path, cell) in paths.iter().zip(&run.cells) {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, cell.trace_jsonl())?;
    }
    Ok(paths)
}
