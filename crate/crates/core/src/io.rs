//! Shared text-output helpers.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{FineError, Result};

/// Formats a float with 17 significant digits, enough to round-trip every
/// `f64` bit pattern through text.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `path`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| FineError::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| FineError::io(path, e))?;
    f.write_all(contents).map_err(|e| FineError::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| FineError::io(path, e))
}

/// Parses one numeric CSV field, reporting the 1-based data row on failure.
pub(crate) fn parse_f64(field: &str, row: usize, column: &str) -> Result<f64> {
    let x: f64 = field.trim().parse().map_err(|_| FineError::Parse {
        row,
        message: format!("column `{column}`: `{field}` is not a number"),
    })?;
    if !x.is_finite() {
        return Err(FineError::Parse {
            row,
            message: format!("column `{column}`: `{field}` is not finite"),
        });
    }
    Ok(x)
}

pub(crate) fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

pub(crate) fn csv_error(e: csv::Error) -> FineError {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    FineError::Parse {
        row,
        message: e.to_string(),
    }
}
