use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use cohort_bias_core::{Error, ParseReport};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{0}")]
    Invalid(String),

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Io(_)) | CliError::Write { .. } => 2,
            _ => 1,
        }
    }
}

/// Where CSV outputs go. Without a directory nothing is written.
pub struct OutDir(Option<PathBuf>);

impl OutDir {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self(dir)
    }

    pub fn is_set(&self) -> bool {
        self.0.is_some()
    }

    /// Creates `name` in the output directory and hands a writer to `write`.
    /// Returns the path written, or `None` when no directory is configured.
    pub fn write(
        &self,
        name: &str,
        write: impl FnOnce(BufWriter<File>) -> cohort_bias_core::Result<()>,
    ) -> Result<Option<PathBuf>, CliError> {
        let Some(dir) = &self.0 else { return Ok(None) };
        let path = dir.join(name);
        let wrap = |source| CliError::Write { path: path.clone(), source };
        fs::create_dir_all(dir).map_err(|e| CliError::Write { path: dir.clone(), source: e })?;
        let file = File::create(&path).map_err(wrap)?;
        write(BufWriter::new(file)).map_err(|e| match e {
            Error::Io(source) => wrap(source),
            other => CliError::Core(other),
        })?;
        Ok(Some(path))
    }
}

/// Parse warnings go to stderr so reports stay reproducible.
pub fn warn(source: &Path, report: &ParseReport) {
    for w in &report.warnings {
        eprintln!("warning: {}: {w}", source.display());
    }
}

pub fn stamp_line() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("\n_generated at unix time {secs}_\n")
}
