//! Command-line plumbing for the SQG toolkit: run configuration,
//! bit-exact file formats, and the subcommand implementations.
//!
//! Everything the binary does lives here so the whole pipeline can be
//! driven in-process by tests (determinism of artifacts is part of the
//! contract, and byte comparisons need both runs in one process).

pub mod commands;
pub mod config;
pub mod snapshot;
pub mod timeseries;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sqg_core::CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("environment: {0}")]
    Env(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Validate SQGLAB_THREADS and return the effective cap. The numerics
/// are single-threaded, so any cap >= 1 is already respected; the check
/// exists to reject typos loudly instead of silently ignoring them.
pub fn thread_cap() -> Result<usize> {
    match std::env::var("SQGLAB_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(std::env::VarError::NotUnicode(_)) => Err(CliError::Env(
            "SQGLAB_THREADS is not valid unicode".into(),
        )),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(CliError::Env(format!(
                "SQGLAB_THREADS must be a positive integer, got {s:?}"
            ))),
        },
    }
}

/// Write a file atomically: temp file in the destination directory,
/// flushed, then renamed over the target.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_env_is_validated() {
        // unset in the test environment unless the harness exports it
        std::env::remove_var("SQGLAB_THREADS");
        assert_eq!(thread_cap().unwrap(), 1);
        std::env::set_var("SQGLAB_THREADS", "4");
        assert_eq!(thread_cap().unwrap(), 4);
        std::env::set_var("SQGLAB_THREADS", "0");
        assert!(thread_cap().is_err());
        std::env::set_var("SQGLAB_THREADS", "two");
        assert!(thread_cap().is_err());
        std::env::remove_var("SQGLAB_THREADS");
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
    }
}
