//! Per-run output directories, plot-data files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mvtorus::io::{write_columns, write_json};
use mvtorus::TorusDensity;
use serde::Serialize;
use serde_json::Value;

use crate::config::Settings;
use crate::error::{CliError, CliResult};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MVTORUS_OUT";
pub const DEFAULT_ROOT: &str = "mvtorus-out";

pub struct OutDir {
    path: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    /// An explicit directory must be new or empty unless `force` is set.
    /// Without one, a fresh `<root>/<label>-<stamp>` directory is created.
    pub fn create(explicit: Option<&Path>, label: &str, force: bool) -> CliResult<Self> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_ROOT), PathBuf::from);
                let stamp = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_millis())
                    .unwrap_or(0);
                root.join(format!("{label}-{stamp}-{}", std::process::id()))
            }
        };
        if path.exists() && !force && fs::read_dir(&path)?.next().is_some() {
            return Err(CliError::Config(format!(
                "output directory {} is not empty (use --force to overwrite)",
                path.display()
            )));
        }
        fs::create_dir_all(&path)?;
        Ok(OutDir { path, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Path for a file written by the caller, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.track(name)
    }

    fn track(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_owned());
        self.path.join(name)
    }

    pub fn columns(&mut self, name: &str, headers: &[&str], cols: &[&[f64]]) -> CliResult<()> {
        let p = self.track(name);
        Ok(write_columns(p, headers, cols)?)
    }

    /// Like [`columns`](Self::columns) with owned header names.
    pub fn table(&mut self, name: &str, headers: &[String], cols: &[Vec<f64>]) -> CliResult<()> {
        let h: Vec<&str> = headers.iter().map(String::as_str).collect();
        let c: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        self.columns(name, &h, &c)
    }

    pub fn density(&mut self, name: &str, rho: &TorusDensity) -> CliResult<()> {
        let p = self.track(name);
        Ok(rho.write_csv(p)?)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let p = self.track(name);
        Ok(write_json(p, value)?)
    }

    pub fn finish(self, manifest: Manifest) -> CliResult<PathBuf> {
        let manifest = Manifest { outputs: self.files, ..manifest };
        write_json(self.path.join("manifest.json"), &manifest)?;
        Ok(self.path)
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub config: Settings,
    pub seeds: Vec<u64>,
    pub wall_time: f64,
    pub outputs: Vec<String>,
    pub summary: Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: Settings) -> Self {
        Manifest {
            tool: "mvtorus",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            target: None,
            config,
            seeds: Vec::new(),
            wall_time: 0.0,
            outputs: Vec::new(),
            summary: Value::Null,
            notes: Vec::new(),
        }
    }
}
