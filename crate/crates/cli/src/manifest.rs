//! Run manifests and the output directory they describe.
//!
//! A run writes its result files into one directory together with a
//! `manifest.json` that records the fully resolved command, the seeds, the
//! SHA-256 of every input file and the wall-clock timings. Every JSON result
//! carries a `"manifest"` field naming that file; CSV results are listed in
//! the manifest's `outputs`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub version: String,
    pub subcommand: String,
    /// The command with every default filled in and every path absolute.
    pub config: Command,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    /// Informational; results do not depend on it.
    pub threads: usize,
    pub timings_s: BTreeMap<String, f64>,
    /// Manifest this run was replayed from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_of: Option<PathBuf>,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: not a run manifest: {e}", path.display())))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(CliError::Data(format!(
                "{}: manifest schema {} (this build reads {SCHEMA_VERSION})",
                path.display(),
                m.schema_version
            )));
        }
        Ok(m)
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Output directory of one run plus everything its manifest will record.
pub struct Run {
    dir: PathBuf,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

impl Run {
    pub fn new(dir: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Run {
            dir,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records the hash of an input file. Reading it here also surfaces a
    /// missing path before any work is done.
    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn time<R>(&mut self, key: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(key.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    fn record(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.path(name)
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.record(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }

    /// Writes `value` as pretty JSON with a `"manifest"` field added.
    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> CliResult<()> {
        let mut v = serde_json::to_value(value)?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("manifest".into(), MANIFEST_FILE.into());
            }
            None => {
                return Err(CliError::Internal(format!("{name}: result is not a JSON object")));
            }
        }
        let text = serde_json::to_string_pretty(&v)? + "\n";
        self.bytes(name, text.as_bytes())
    }

    /// Writes a numeric table. Values are printed in shortest round-trip form.
    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> CliResult<()> {
        let path = self.record(name);
        let fail = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(fail)?;
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row.iter().map(f64::to_string)).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    pub fn finish(self, config: Command, threads: usize, replay_of: Option<PathBuf>) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: config.name().to_string(),
            config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            threads,
            timings_s: self.timings,
            replay_of,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
