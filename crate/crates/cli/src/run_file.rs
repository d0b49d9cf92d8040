//! `run.json`: the fully resolved invocation of a command, enough to re-run it.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rflab_core::dsp::{CaptureDescriptor, DecimationMode, FeatureKind};
use rflab_core::sim::{ChannelPlan, EmitterProfile, HopConfig, Scenario};
use rflab_core::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Simulate {
    pub profiles: Vec<EmitterProfile>,
    pub hops: HopConfig,
    pub channels: ChannelPlan,
    pub n: usize,
    pub m: usize,
    pub mode: DecimationMode,
    pub kind: FeatureKind,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Features {
    pub capture: PathBuf,
    pub capture_sha256: String,
    pub descriptor: CaptureDescriptor,
    pub m: usize,
    pub mode: DecimationMode,
    pub kind: FeatureKind,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Train {
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub model: String,
    pub scale: Option<f64>,
    pub config: TrainConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eval {
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub checkpoint: PathBuf,
    pub scenario: Scenario,
    pub report: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Complexity {
    pub model: String,
    pub m: usize,
    pub scale: f64,
    pub batch: usize,
    pub classes: usize,
    pub bytes_per_scalar: u64,
    pub json: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Export {
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    Simulate(Simulate),
    Features(Features),
    Train(Train),
    Eval(Eval),
    Complexity(Complexity),
    ExportFeatures(Export),
}

impl Invocation {
    /// Points the command at a different output location.
    pub fn redirect(&mut self, out: PathBuf) {
        match self {
            Invocation::Simulate(c) => c.out = out,
            Invocation::Features(c) => c.out = out,
            Invocation::Train(c) => c.out = out,
            Invocation::Eval(c) => c.report = out,
            Invocation::Complexity(c) => c.out = Some(out),
            Invocation::ExportFeatures(c) => c.out = out,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFile {
    pub tool: String,
    pub version: String,
    pub threads: usize,
    pub invocation: Invocation,
    /// Earlier run whose outputs this one builds on (stage two after stage one).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resumes: Option<Box<RunFile>>,
}

impl RunFile {
    pub fn new(invocation: Invocation) -> Self {
        RunFile {
            tool: "rflab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            threads: rayon::current_num_threads(),
            invocation,
            resumes: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path, "--run")
    }
}

/// Where a file-producing command records its run: `<out>` with the
/// extension replaced by `run.json`.
pub fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("run.json")
}

pub fn require_file(path: &Path, flag: &'static str) -> Result<PathBuf> {
    if !path.is_file() {
        return Err(CliError::Missing { flag, path: path.to_path_buf() }.into());
    }
    Ok(fs::canonicalize(path)?)
}

pub fn require_dir(path: &Path, flag: &'static str) -> Result<PathBuf> {
    if !path.is_dir() {
        return Err(CliError::Missing { flag, path: path.to_path_buf() }.into());
    }
    Ok(fs::canonicalize(path)?)
}

pub fn absolute(path: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(path)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, flag: &'static str) -> Result<T> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(CliError::Missing { flag, path: path.to_path_buf() }.into())
        }
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Schema { path: path.to_path_buf(), detail: e.to_string() }.into())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn check_digest(path: &Path, expected: &str) -> Result<()> {
    let found = sha256_file(path)?;
    if found != expected {
        return Err(CliError::Input(format!(
            "{} changed since the run was recorded (sha256 {found}, expected {expected})",
            path.display()
        ))
        .into());
    }
    Ok(())
}
