//! Errors, exit codes and file emitters.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use pmdlab::io::fmt_float;

pub enum CliError {
    /// Bad flags, unreadable or malformed input.
    Usage(String),
    Io(PathBuf, std::io::Error),
    Lib(pmdlab::Error),
    /// The property suite ran and reported failures.
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_assumption_failure() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} check(s) failed, see the report"),
        }
    }
}

impl From<pmdlab::Error> for CliError {
    fn from(e: pmdlab::Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads `path` as JSON; unknown or mistyped fields are reported by path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            CliError::Usage(format!("{}: {inner}", path.display()))
        } else {
            CliError::Usage(format!("{}: field `{field}`: {inner}", path.display()))
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    write_file(path, &text)
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Fixed-width float cells joined by commas.
pub fn csv_line(cells: &[Cell]) -> String {
    let mut out = cells
        .iter()
        .map(|c| match c {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_float(*x),
            Cell::Text(s) => s.clone(),
        })
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    out
}

pub enum Cell {
    Int(u128),
    Float(f64),
    Text(String),
}
