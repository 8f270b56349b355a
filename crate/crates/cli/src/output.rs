//! Output directory, CSV files and the `summary.json` envelope.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Version of the `summary.json` layout, see `docs/summary.schema.json`.
pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Serialize)]
pub struct Envelope {
    pub schema_version: &'static str,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub wall_clock_seconds: f64,
    pub experiment: &'static str,
    pub payload: serde_json::Value,
    /// Unit of every numeric payload field.
    pub units: BTreeMap<String, String>,
}

/// Result of an experiment, written by [`OutputDir::finish`].
pub struct Report {
    pub payload: serde_json::Value,
    pub units: Vec<(&'static str, &'static str)>,
    /// Some run hit its event cap.
    pub partial: bool,
}

pub const TIME: &str = "model time";
pub const RATE: &str = "events per model time";
pub const POTENTIAL: &str = "potential";
pub const COUNT: &str = "count";
pub const ONE: &str = "dimensionless";

/// Every file of a run goes through this one writer.
pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.into(),
            source,
        })?;
        Ok(OutputDir { dir: dir.into() })
    }

    pub fn write<F>(&self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.dir.join(name);
        let run = || -> io::Result<()> {
            let mut w = BufWriter::new(File::create(&path)?);
            body(&mut w)?;
            w.flush()
        };
        run().map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })
    }

    pub fn summary(&self, envelope: &Envelope) -> Result<(), CliError> {
        self.write("summary.json", |w| {
            serde_json::to_writer_pretty(&mut *w, envelope)?;
            writeln!(w)
        })
    }
}
