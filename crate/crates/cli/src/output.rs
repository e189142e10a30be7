//! Output destinations.

use crate::error::CliError;
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the directory for relative output paths.
pub const OUTPUT_DIR_VAR: &str = "SUPERRES_OUTPUT_DIR";

pub fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_VAR) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes `bytes` to the resolved path, or to standard output.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let p = resolve(p);
            std::fs::write(&p, bytes).map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn emit_json(path: Option<&Path>, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    emit(path, text.as_bytes())
}

/// Fails early when the destination cannot be created.
pub fn check_writable(path: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = path {
        let p = resolve(p);
        let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !dir.is_dir() {
            return Err(CliError::usage(format!("output directory {} does not exist", dir.display())));
        }
    }
    Ok(())
}
