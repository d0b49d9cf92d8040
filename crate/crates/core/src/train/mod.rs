//! Two-stage training: Mbed with a temporary softmax head, then the ATN on
//! top of the frozen Mbed, with patience-based early stopping.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{adam_step, softmax_xent, AdamConfig, AdamState, Mode, Scalar, Tensor};
use crate::model::{LayerParams, MbedAtn, Stack};
use crate::seed;
use crate::sim::Example;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    One,
    Two,
    Both,
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(Stage::One),
            "two" | "2" => Ok(Stage::Two),
            "both" => Ok(Stage::Both),
            other => Err(Error::Argument(format!("unknown stage `{other}` (one|two|both)"))),
        }
    }
}

/// Float width used for parameters and arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "TrainConfig::default_lr")]
    pub lr: f64,
    #[serde(default = "TrainConfig::default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "TrainConfig::default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "TrainConfig::default_patience")]
    pub patience: usize,
    #[serde(default = "TrainConfig::default_stage")]
    pub stage: Stage,
    #[serde(default = "TrainConfig::default_min_delta")]
    pub min_delta: f64,
    #[serde(default)]
    pub precision: Precision,
    /// Steps of the GRU branch input (`embedding width / chunk`).
    #[serde(default = "TrainConfig::default_chunk")]
    pub gru_chunk: usize,
}

impl TrainConfig {
    fn default_lr() -> f64 {
        1e-4
    }
    fn default_max_epochs() -> usize {
        2000
    }
    fn default_batch() -> usize {
        16
    }
    fn default_patience() -> usize {
        25
    }
    fn default_stage() -> Stage {
        Stage::Both
    }
    fn default_min_delta() -> f64 {
        1e-6
    }
    fn default_chunk() -> usize {
        1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be finite and non-negative, got {}", self.lr)));
        }
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Config("max_epochs, patience and batch_size must be at least 1".into()));
        }
        if self.gru_chunk == 0 {
            return Err(Error::Config("gru_chunk must be at least 1".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: Self::default_lr(),
            max_epochs: Self::default_max_epochs(),
            batch_size: Self::default_batch(),
            seed: 0,
            patience: Self::default_patience(),
            stage: Self::default_stage(),
            min_delta: Self::default_min_delta(),
            precision: Precision::default(),
            gru_chunk: Self::default_chunk(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop(StopReason),
}

/// Stops once the last loss is non-finite, or the best loss has not improved
/// by at least `min_delta` for `patience` consecutive epochs.
pub fn stop_monitor(history: &[f64], patience: usize, min_delta: f64) -> Decision {
    let Some(&last) = history.last() else {
        return Decision::Continue;
    };
    if !last.is_finite() {
        return Decision::Stop(StopReason::Diverged);
    }
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    for &v in history {
        if v < best - min_delta {
            best = v;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    if stale >= patience {
        Decision::Stop(StopReason::Patience)
    } else {
        Decision::Continue
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub stage: Stage,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_acc: f64,
    /// SHA-256 of parameter groups, e.g. `mbed_before` / `mbed_after`.
    pub checksums: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:e},{:e},{:e}", e.epoch, e.train_loss, e.val_loss, e.val_acc);
        }
        s
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&json, e))
    }
}

/// SHA-256 over names, shapes and the little-endian bytes of every value.
pub fn checksum<T: Scalar>(named: &[(String, &Tensor<T>)]) -> String {
    let mut h = Sha256::new();
    for (name, t) in named {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        for &d in t.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for v in t.data() {
            h.update(v.as_f64().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn flatten_grads<T: Scalar>(groups: &[&[LayerParams<T>]]) -> Vec<Vec<T>> {
    groups
        .iter()
        .flat_map(|g| g.iter())
        .flat_map(|p| p.named().into_iter().map(|(_, t)| t.data().to_vec()))
        .collect()
}

fn check_data(train: &[&Example], val: &[&Example], classes: usize) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Argument("training and validation sets must be nonempty".into()));
    }
    if classes < 2 {
        return Err(Error::Argument("need at least 2 classes".into()));
    }
    if let Some(e) = train.iter().chain(val).find(|e| e.label >= classes) {
        return Err(Error::Argument(format!("example {} has label {} >= {classes}", e.id, e.label)));
    }
    Ok(())
}

/// Cross-entropy loss and its gradient with respect to the logits.
fn label_loss<T: Scalar>(logits: &Tensor<T>, label: usize) -> Result<(f64, Tensor<T>)> {
    let z = logits.clone().reshape(&[logits.len()])?;
    let (loss, probs) = softmax_xent(&z, label)?;
    let mut g = probs.data().to_vec();
    g[label] -= T::one();
    Ok((loss.as_f64(), Tensor::new(&[1, g.len()], g)?))
}

fn argmax_correct<T: Scalar>(logits: &Tensor<T>, label: usize) -> bool {
    let d = logits.data();
    let mut best = 0;
    for i in 1..d.len() {
        if d[i] > d[best] {
            best = i;
        }
    }
    best == label
}

/// One optimisation pass; `example_grads(i, example_rng)` returns the loss
/// and flat gradients of training item `i`.
fn run_epoch<T, F>(
    n: usize,
    cfg: &TrainConfig,
    stage_tag: u64,
    epoch: usize,
    params: &mut [&mut Tensor<T>],
    states: &mut [AdamState<T>],
    example_grads: F,
) -> Result<f64>
where
    T: Scalar,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Result<(f64, Vec<Vec<T>>)> + Sync,
{
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(&[cfg.seed, stage_tag, seed::tag("shuffle"), epoch as u64]));
    let adam = cfg.adam();
    let mut total = 0.0;
    for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
        let results = batch
            .par_iter()
            .map(|&i| {
                let mut rng = seed::rng(&[cfg.seed, stage_tag, epoch as u64, i as u64]);
                example_grads(i, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = T::lit(1.0 / batch.len() as f64);
        let mut sum: Vec<Vec<T>> = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        for (loss, grads) in &results {
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            total += loss;
            for (acc, g) in sum.iter_mut().zip(grads) {
                for (a, &v) in acc.iter_mut().zip(g) {
                    *a += v;
                }
            }
        }
        for ((p, g), st) in params.iter_mut().zip(&mut sum).zip(states.iter_mut()) {
            g.iter_mut().for_each(|v| *v *= scale);
            adam_step(p, g, st, &adam)?;
        }
    }
    Ok(total / n as f64)
}

struct Tracker {
    epochs: Vec<EpochRecord>,
    best: Option<(usize, f64, f64)>,
}

impl Tracker {
    fn new() -> Self {
        Tracker { epochs: Vec::new(), best: None }
    }

    /// Records an epoch; returns true when it is the new best.
    fn push(&mut self, rec: EpochRecord, min_delta: f64) -> bool {
        let better = rec.val_loss.is_finite() && self.best.is_none_or(|(_, b, _)| rec.val_loss < b - min_delta);
        if better {
            self.best = Some((rec.epoch, rec.val_loss, rec.val_acc));
        }
        self.epochs.push(rec);
        better
    }

    fn history(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_loss).collect()
    }
}

/// Eval-mode `(mean loss, accuracy)` of the stage-one head.
pub fn stage1_metrics<T: Scalar>(net: &MbedAtn<T>, examples: &[&Example]) -> Result<(f64, f64)> {
    let per = examples
        .par_iter()
        .map(|e| {
            let mut r = seed::rng(&[0]);
            let f = net.embed(&net.input(&e.features)?, Mode::Eval, &mut r)?;
            let (z, _) = net.temp_logits_traced(&f, Mode::Eval, &mut r)?;
            let (loss, _) = label_loss(&z, e.label)?;
            Ok((loss, argmax_correct(&z, e.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_metrics(&per))
}

fn mean_metrics(per: &[(f64, bool)]) -> (f64, f64) {
    let n = per.len() as f64;
    let loss = per.iter().map(|p| p.0).sum::<f64>() / n;
    let acc = per.iter().filter(|p| p.1).count() as f64 / n;
    (loss, acc)
}

/// Trains Mbed and the stage-one head; leaves the best-validation weights in `net`.
pub fn train_stage1<T: Scalar>(
    net: &mut MbedAtn<T>,
    train: &[&Example],
    val: &[&Example],
    cfg: &TrainConfig,
) -> Result<RunRecord> {
    cfg.validate()?;
    check_data(train, val, net.graph.num_classes())?;
    let tag = seed::tag("stage1");
    let mut states: Vec<AdamState<T>> = net
        .mbed_named()
        .iter()
        .chain(net.temp_head.named("").iter())
        .map(|(_, t)| AdamState::for_len(t.len()))
        .collect();
    let mut tracker = Tracker::new();
    let mut best: Option<(Stack<T>, Stack<T>)> = None;
    let mut reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let snapshot = net.clone();
        let grads_of = |i: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let e = train[i];
            let x = snapshot.input(&e.features)?;
            let (f, mtrace) = snapshot.embed_traced(&x, Mode::Train, rng)?;
            let (z, hcache) = snapshot.temp_logits_traced(&f, Mode::Train, rng)?;
            let (loss, gz) = label_loss(&z, e.label)?;
            let (gf, hgrads) = snapshot.temp_head_backward(&hcache, &gz)?;
            let (_, mgrads) = snapshot.mbed_backward(&mtrace, &gf)?;
            Ok((loss, flatten_grads(&[&mgrads, &hgrads])))
        };
        let mut params = net.mbed.tensors_mut();
        params.extend(net.temp_head.tensors_mut());
        let train_loss = run_epoch(train.len(), cfg, tag, epoch, &mut params, &mut states, grads_of)?;
        let (val_loss, val_acc) = stage1_metrics(net, val)?;
        if tracker.push(EpochRecord { epoch, train_loss, val_loss, val_acc }, cfg.min_delta) {
            best = Some((net.mbed.clone(), net.temp_head.clone()));
        }
        if let Decision::Stop(r) = stop_monitor(&tracker.history(), cfg.patience, cfg.min_delta) {
            reason = r;
            break;
        }
    }
    if let Some((m, h)) = best {
        net.mbed = m;
        net.temp_head = h;
    }
    finish(Stage::One, cfg, tracker, reason, BTreeMap::new())
}

fn finish(
    stage: Stage,
    cfg: &TrainConfig,
    tracker: Tracker,
    reason: StopReason,
    checksums: BTreeMap<String, String>,
) -> Result<RunRecord> {
    let (best_epoch, best_val_loss, best_val_acc) = tracker.best.unwrap_or((0, f64::NAN, 0.0));
    Ok(RunRecord {
        stage,
        config: cfg.clone(),
        epochs: tracker.epochs,
        stop_reason: reason,
        best_epoch,
        best_val_loss,
        best_val_acc,
        checksums,
    })
}

/// Eval-mode embeddings of every example.
pub fn embed_all<T: Scalar>(net: &MbedAtn<T>, examples: &[&Example]) -> Result<Vec<Tensor<T>>> {
    examples
        .par_iter()
        .map(|e| net.embed(&net.input(&e.features)?, Mode::Eval, &mut seed::rng(&[0])))
        .collect()
}

/// Eval-mode `(mean loss, accuracy)` of the ATN on precomputed embeddings.
pub fn stage2_metrics<T: Scalar>(net: &MbedAtn<T>, feats: &[Tensor<T>], labels: &[usize]) -> Result<(f64, f64)> {
    let per = feats
        .par_iter()
        .zip(labels.par_iter())
        .map(|(f, &label)| {
            let z = net.atn_logits(f, Mode::Eval, &mut seed::rng(&[0]))?;
            let (loss, _) = label_loss(&z, label)?;
            Ok((loss, argmax_correct(&z, label)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_metrics(&per))
}

/// Trains the ATN on top of the frozen Mbed. The Mbed runs in evaluation mode
/// and its parameters are verified unchanged after every epoch.
pub fn train_stage2<T: Scalar>(
    net: &mut MbedAtn<T>,
    train: &[&Example],
    val: &[&Example],
    cfg: &TrainConfig,
) -> Result<RunRecord> {
    cfg.validate()?;
    check_data(train, val, net.graph.num_classes())?;
    let tag = seed::tag("stage2");
    let frozen = checksum(&net.mbed_named());
    let train_f = embed_all(net, train)?;
    let val_f = embed_all(net, val)?;
    let train_y: Vec<usize> = train.iter().map(|e| e.label).collect();
    let val_y: Vec<usize> = val.iter().map(|e| e.label).collect();

    let mut states: Vec<AdamState<T>> = net.atn_named().iter().map(|(_, t)| AdamState::for_len(t.len())).collect();
    let mut tracker = Tracker::new();
    let mut best: Option<(Vec<Stack<T>>, Stack<T>)> = None;
    let mut reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let snapshot = net.clone();
        let grads_of = |i: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let (z, trace) = snapshot.atn_logits_traced(&train_f[i], Mode::Train, rng)?;
            let (loss, gz) = label_loss(&z, train_y[i])?;
            let (_, bgrads, hgrads) = snapshot.atn_backward(&trace, &gz)?;
            let mut groups: Vec<&[LayerParams<T>]> = bgrads.iter().map(|g| g.as_slice()).collect();
            groups.push(&hgrads);
            Ok((loss, flatten_grads(&groups)))
        };
        let mut params = net.atn_tensors_mut();
        let train_loss = run_epoch(train.len(), cfg, tag, epoch, &mut params, &mut states, grads_of)?;
        if checksum(&net.mbed_named()) != frozen {
            return Err(Error::Config(format!("Mbed parameters changed during stage-two epoch {epoch}")));
        }
        let (val_loss, val_acc) = stage2_metrics(net, &val_f, &val_y)?;
        if tracker.push(EpochRecord { epoch, train_loss, val_loss, val_acc }, cfg.min_delta) {
            best = Some((net.branches.clone(), net.head.clone()));
        }
        if let Decision::Stop(r) = stop_monitor(&tracker.history(), cfg.patience, cfg.min_delta) {
            reason = r;
            break;
        }
    }
    if let Some((b, h)) = best {
        net.branches = b;
        net.head = h;
    }
    let mut sums = BTreeMap::new();
    sums.insert("mbed_before".to_string(), frozen);
    sums.insert("mbed_after".to_string(), checksum(&net.mbed_named()));
    sums.insert("atn".to_string(), checksum(&net.atn_named()));
    finish(Stage::Two, cfg, tracker, reason, sums)
}
