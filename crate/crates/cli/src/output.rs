use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::run::ResultBundle;
use crate::CliError;

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Writes `manifest.toml`, `summary.txt` and every table under `dir`,
/// replacing earlier versions. Each file is written to a temporary name and
/// renamed into place. On failure the files written so far are removed.
/// Returns the written paths.
pub fn emit_outputs(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<(PathBuf, &str)> =
        vec![(PathBuf::from("manifest.toml"), bundle.manifest.as_str())];
    let summary = bundle.summary_text();
    files.push((PathBuf::from("summary.txt"), summary.as_str()));
    files.extend(
        bundle
            .tables
            .iter()
            .map(|f| (f.path.clone(), f.contents.as_str())),
    );

    let mut written = Vec::new();
    for (rel, contents) in files {
        let path = dir.join(rel);
        if let Err(e) = write_atomic(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_error(path, e)
    })
}
