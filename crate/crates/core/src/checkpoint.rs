//! Checkpoint directories: `graph.json`, `params.mbat` and `checkpoint.json`.
//!
//! Parameter values are stored as 32-bit floats (the parameter file format),
//! so a 64-bit network reloads rounded to single precision.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::{DecimationMode, FeatureKind};
use crate::engine::{params, Scalar};
use crate::model::{MbedAtn, ModelGraph};
use crate::train::{Precision, Stage};
use crate::{Error, Result};

pub const GRAPH_FILE: &str = "graph.json";
pub const PARAMS_FILE: &str = "params.mbat";
pub const META_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    /// `one` after stage one only, `both` once the ATN is trained as well.
    pub trained: Stage,
    pub precision: Precision,
    pub scale: f64,
    pub m: usize,
    pub kind: FeatureKind,
    pub mode: DecimationMode,
    pub num_classes: usize,
    pub seed: u64,
}

pub fn save<T: Scalar>(dir: &Path, net: &MbedAtn<T>, meta: &CheckpointMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = dir.join(GRAPH_FILE);
    fs::write(&g, net.graph.to_json()?).map_err(|e| Error::io(&g, e))?;
    params::save(&dir.join(PARAMS_FILE), &net.records())?;
    let m = dir.join(META_FILE);
    fs::write(&m, serde_json::to_string_pretty(meta)?).map_err(|e| Error::io(&m, e))
}

pub fn load_meta(dir: &Path) -> Result<CheckpointMeta> {
    let p = dir.join(META_FILE);
    let s = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Format(format!("{}: {e}", p.display())))
}

/// Rebuilds the network from the stored graph and loads every parameter.
pub fn load<T: Scalar>(dir: &Path) -> Result<(MbedAtn<T>, CheckpointMeta)> {
    let meta = load_meta(dir)?;
    let p = dir.join(GRAPH_FILE);
    let graph = ModelGraph::from_json(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?;
    let mut net = MbedAtn::<T>::zeros(graph)?;
    let records = params::load(&dir.join(PARAMS_FILE))?;
    let expected = net.named_tensors().len();
    let loaded = net.load_records(&records)?;
    if loaded != expected {
        return Err(Error::Format(format!(
            "{} holds {loaded} tensors, model has {expected}",
            dir.join(PARAMS_FILE).display()
        )));
    }
    Ok((net, meta))
}
