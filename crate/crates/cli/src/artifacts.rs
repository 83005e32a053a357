//! Output-directory layout and (de)serialization of stage artifacts.
//!
//! ```text
//! <outdir>/system.json, validation.json, bounds.json
//! <outdir>/{min,max}/lp.txt, solution.json, report.json, certificate.json,
//!                    primal_infeasibility.csv, dual_infeasibility.csv,
//!                    progress.log, verification.json
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use vmot::payoff::Direction;

use crate::RunError;

pub const SYSTEM: &str = "system.json";
pub const VALIDATION: &str = "validation.json";
pub const BOUNDS: &str = "bounds.json";
pub const LP: &str = "lp.txt";
pub const SOLUTION: &str = "solution.json";
pub const REPORT: &str = "report.json";
pub const CERTIFICATE: &str = "certificate.json";
pub const PRIMAL_CSV: &str = "primal_infeasibility.csv";
pub const DUAL_CSV: &str = "dual_infeasibility.csv";
pub const PROGRESS: &str = "progress.log";
pub const VERIFICATION: &str = "verification.json";

#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn dir(&self, direction: Direction) -> PathBuf {
        self.root.join(direction.as_str())
    }

    pub fn in_dir(&self, direction: Direction, name: &str) -> PathBuf {
        self.dir(direction).join(name)
    }

    pub fn create(&self) -> Result<()> {
        for d in [Direction::Min, Direction::Max] {
            fs::create_dir_all(self.dir(d)).with_context(|| format!("creating {}", self.dir(d).display()))?;
        }
        Ok(())
    }
}

pub fn require(path: &Path) -> Result<(), RunError> {
    if path.exists() {
        Ok(())
    } else {
        Err(RunError::MissingArtifact { path: path.to_path_buf() })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, RunError> {
    require(path)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let value = serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}
