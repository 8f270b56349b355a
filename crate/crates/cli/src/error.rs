use std::path::PathBuf;

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] spikefield::error::Error),
    #[error("invalid setting: {0}")]
    Setting(String),
}

/// Process exit codes.
pub mod code {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const GUARD: u8 = 2;
    pub const PARTIAL: u8 = 3;
}

impl CliError {
    /// Regime guards exit with [`code::GUARD`], everything else with
    /// [`code::OTHER`].
    pub fn exit_code(&self) -> u8 {
        use spikefield::error::Error as E;
        match self {
            CliError::Model(E::Precondition(_) | E::UnsupportedRate(_) | E::NoEquilibrium { .. } | E::Domain(_)) => {
                code::GUARD
            }
            _ => code::OTHER,
        }
    }
}
