//! Artifact writing and the run manifest.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST: &str = "manifest.json";

/// A CSV cell. Floats are written with 17 significant digits.
#[derive(Clone, Debug)]
pub enum Cell {
    F(f64),
    I(u64),
    S(String),
    B(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Partial,
    Complete,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub completed_paths: usize,
    pub total_paths: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: Map<String, Value>,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress: Option<Progress>,
    pub artifacts: Vec<Artifact>,
    /// Seconds since the Unix epoch when the manifest was last written. The
    /// only time-dependent value of a run.
    pub updated_unix: u64,
}

impl Manifest {
    pub fn load(dir: &Path) -> CliResult<Manifest> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::validation("resume", format!("cannot read `{}`: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation("resume", format!("`{}`: {e}", path.display())))
    }
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("lie-anneal".to_string(), lie_anneal::VERSION.to_string()),
        ("lie-anneal-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("scheme".to_string(), lie_anneal::dynamics::SCHEME_ID.to_string()),
    ])
}

fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let bytes = std::fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Output directory of one run. Files are written from this thread only.
pub struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    /// Creates the output directory and writes a `running` manifest, so an
    /// unwritable directory is reported before any computation.
    pub fn start(command: &str, dir: &Path, config: Map<String, Value>, hash: String, seed: u64) -> CliResult<Run> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io("output", dir, e))?;
        let run = Run {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                command: command.to_string(),
                config,
                config_hash: hash,
                seed,
                versions: versions(),
                status: RunStatus::Running,
                progress: None,
                artifacts: Vec::new(),
                updated_unix: 0,
            },
        };
        run.write_manifest()?;
        Ok(run)
    }

    /// Continues a run whose manifest is already on disk.
    pub fn reopen(dir: &Path, manifest: Manifest) -> Run {
        Run {
            dir: dir.to_path_buf(),
            manifest,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn seed(&self) -> u64 {
        self.manifest.seed
    }

    fn write_manifest(&self) -> CliResult<()> {
        let mut m = self.manifest.clone();
        m.updated_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let path = self.path(MANIFEST);
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io("manifest", &path, e))
    }

    /// Records a file that was written into the run directory.
    pub fn adopt(&mut self, name: &str) -> CliResult<()> {
        let path = self.path(name);
        let (sha256, bytes) = sha256_file(&path).map_err(|e| CliError::io("manifest", &path, e))?;
        let entry = Artifact {
            file: name.to_string(),
            sha256,
            bytes,
        };
        match self.manifest.artifacts.iter_mut().find(|a| a.file == name) {
            Some(a) => *a = entry,
            None => self.manifest.artifacts.push(entry),
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io("emit", &path, e))? + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io("emit", &path, e))?;
        self.adopt(name)
    }

    /// Writes a table; an empty `rows` gives a header-only file.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> CliResult<()> {
        let path = self.path(name);
        write_csv(&path, header, rows).map_err(|e| CliError::io("emit", &path, e))?;
        self.adopt(name)
    }

    pub fn checkpoint(&mut self, progress: Progress) -> CliResult<()> {
        self.manifest.status = RunStatus::Partial;
        self.manifest.progress = Some(progress);
        self.write_manifest()
    }

    pub fn finish(mut self, status: RunStatus) -> CliResult<()> {
        self.manifest.status = status;
        if status == RunStatus::Complete {
            if let Some(p) = &mut self.manifest.progress {
                p.completed_paths = p.total_paths;
            }
        }
        self.write_manifest()
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["t", "value"], &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "t,value\n");
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let x = 0.1 + 0.2;
        write_csv(&p, &["x"], &[vec![x.into()]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let back: f64 = text.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::start("test", dir.path(), Map::new(), "h".into(), 0).unwrap();
        let vals = vec![1.0 / 3.0, std::f64::consts::PI, 1e-300, 6.02214076e23, -0.0];
        run.json("v.json", &vals).unwrap();
        let back: Vec<f64> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        run.finish(RunStatus::Complete).unwrap();
        let m = Manifest::load(dir.path()).unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_eq!(m.status, RunStatus::Complete);
    }
}
