use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::channel::apply_channel;
use super::emission::gen_emission;
use super::profile::{ChannelModel, EmitterProfile, HopConfig};
use crate::dsp::{decimate_to, rows_of, standardize, DecimationMode, FeatureKind, FeatureTensor};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Tts,
    Ttd,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Tts => "tts",
            Scenario::Ttd => "ttd",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tts" => Ok(Scenario::Tts),
            "ttd" => Ok(Scenario::Ttd),
            other => Err(Error::Argument(format!("unknown scenario `{other}` (tts|ttd)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// 80/10/10 assignment from a hash of the example id.
pub fn split_for(id: &str) -> Split {
    let digest = Sha256::digest(id.as_bytes());
    let bucket = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) % 10;
    match bucket {
        0..=7 => Split::Train,
        8 => Split::Val,
        _ => Split::Test,
    }
}

/// Channels seen by the training/validation examples and by the test examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub train: ChannelModel,
    pub test: ChannelModel,
}

impl ChannelPlan {
    pub fn same(ch: ChannelModel) -> Self {
        ChannelPlan { train: ch.clone(), test: ch }
    }

    /// TTS when test examples share the training channel, TTD otherwise.
    pub fn scenario(&self) -> Scenario {
        if self.train == self.test {
            Scenario::Tts
        } else {
            Scenario::Ttd
        }
    }
}

/// One feature representation to extract from every simulated series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub mode: DecimationMode,
    #[serde(default)]
    pub kind: FeatureKind,
}

impl Variant {
    pub fn new(mode: DecimationMode, kind: FeatureKind) -> Self {
        Variant { mode, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_per_class: usize,
    pub m: usize,
    /// Ratio between the simulated rate and the feature length.
    #[serde(default = "DatasetConfig::default_decimation")]
    pub decimation: usize,
    #[serde(default = "DatasetConfig::default_fs")]
    pub sample_rate_hz: f64,
    pub seed: u64,
    /// Splits to synthesise; the others are skipped entirely.
    #[serde(default = "DatasetConfig::all_splits")]
    pub splits: Vec<Split>,
}

impl DatasetConfig {
    fn default_decimation() -> usize {
        40
    }
    fn default_fs() -> f64 {
        2e6
    }
    fn all_splits() -> Vec<Split> {
        vec![Split::Train, Split::Val, Split::Test]
    }

    pub fn new(n_per_class: usize, m: usize, seed: u64) -> Self {
        DatasetConfig {
            n_per_class,
            m,
            decimation: Self::default_decimation(),
            sample_rate_hz: Self::default_fs(),
            seed,
            splits: Self::all_splits(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        (self.m * self.decimation) as f64 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub label: usize,
    pub split: Split,
    pub hop_seed: u64,
    pub noise_seed: u64,
    pub features: FeatureTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenario: Scenario,
    pub variant: Variant,
    pub config: DatasetConfig,
    pub profiles: Vec<EmitterProfile>,
    pub hops: HopConfig,
    pub channels: ChannelPlan,
    pub examples: Vec<Example>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestExample {
    pub id: String,
    pub path: String,
    pub label: usize,
    pub split: Split,
    pub master_seed: u64,
    pub hop_seed: u64,
    pub noise_seed: u64,
    pub profile: EmitterProfile,
    pub channel: ChannelModel,
}

/// JSON description of a dataset written next to its tensor files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub scenario: Scenario,
    pub variant: Variant,
    pub num_classes: usize,
    pub config: DatasetConfig,
    pub hops: HopConfig,
    pub channels: ChannelPlan,
    pub profiles: Vec<EmitterProfile>,
    pub examples: Vec<ManifestExample>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.profiles.len()
    }

    pub fn split(&self, split: Split) -> Vec<&Example> {
        self.examples.iter().filter(|e| e.split == split).collect()
    }

    fn channel_for(&self, split: Split) -> &ChannelModel {
        if split == Split::Test {
            &self.channels.test
        } else {
            &self.channels.train
        }
    }

    fn tensor_ext(&self) -> &'static str {
        match self.variant.kind {
            FeatureKind::MagPhasePsd => "ft3m",
            FeatureKind::RawIq => "ft2m",
        }
    }

    pub fn manifest(&self) -> Manifest {
        let examples = self
            .examples
            .iter()
            .map(|e| ManifestExample {
                id: e.id.clone(),
                path: format!("tensors/{}.{}", e.id, self.tensor_ext()),
                label: e.label,
                split: e.split,
                master_seed: self.config.seed,
                hop_seed: e.hop_seed,
                noise_seed: e.noise_seed,
                profile: self.profiles[e.label].clone(),
                channel: self.channel_for(e.split).clone(),
            })
            .collect();
        Manifest {
            version: 1,
            scenario: self.scenario,
            variant: self.variant,
            num_classes: self.num_classes(),
            config: self.config.clone(),
            hops: self.hops.clone(),
            channels: self.channels.clone(),
            profiles: self.profiles.clone(),
            examples,
        }
    }

    /// Writes `manifest.json` and one tensor file per example under `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let tensors = dir.join("tensors");
        fs::create_dir_all(&tensors).map_err(|e| Error::io(&tensors, e))?;
        let manifest = self.manifest();
        for (e, m) in self.examples.iter().zip(&manifest.examples) {
            e.features.save(&dir.join(&m.path))?;
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(manifest_path: &Path) -> Result<Dataset> {
        let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let examples = manifest
            .examples
            .iter()
            .map(|m| {
                let features = FeatureTensor::load(&base.join(&m.path))?;
                if features.m != manifest.config.m || features.kind != manifest.variant.kind {
                    return Err(Error::Format(format!(
                        "{}: tensor does not match manifest (M {} kind {:?})",
                        m.path, manifest.config.m, manifest.variant.kind
                    )));
                }
                if m.label >= manifest.num_classes {
                    return Err(Error::Format(format!("{}: label {} out of range", m.id, m.label)));
                }
                Ok(Example {
                    id: m.id.clone(),
                    label: m.label,
                    split: m.split,
                    hop_seed: m.hop_seed,
                    noise_seed: m.noise_seed,
                    features,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            scenario: manifest.scenario,
            variant: manifest.variant,
            config: manifest.config,
            profiles: manifest.profiles,
            hops: manifest.hops,
            channels: manifest.channels,
            examples,
        })
    }
}

fn example_id(class: usize, index: usize) -> String {
    format!("c{class:02}-{index:05}")
}

/// Synthesises a labeled dataset for a single feature variant.
pub fn make_dataset(
    profiles: &[EmitterProfile],
    hops: &HopConfig,
    channels: &ChannelPlan,
    cfg: &DatasetConfig,
    variant: Variant,
) -> Result<Dataset> {
    Ok(make_datasets(profiles, hops, channels, cfg, &[variant])?.remove(0))
}

/// Like [`make_dataset`], but simulates each example once and extracts every
/// requested variant from the same series.
pub fn make_datasets(
    profiles: &[EmitterProfile],
    hops: &HopConfig,
    channels: &ChannelPlan,
    cfg: &DatasetConfig,
    variants: &[Variant],
) -> Result<Vec<Dataset>> {
    if profiles.len() < 2 {
        return Err(Error::Config(format!("need at least 2 emitter profiles, got {}", profiles.len())));
    }
    if cfg.n_per_class == 0 || cfg.m == 0 || cfg.decimation == 0 {
        return Err(Error::Config("n_per_class, m and decimation must all be positive".into()));
    }
    if variants.is_empty() {
        return Err(Error::Config("no feature variants requested".into()));
    }
    hops.validate()?;
    channels.train.validate()?;
    channels.test.validate()?;
    for p in profiles {
        p.validate()?;
    }

    let scenario = channels.scenario();
    let jobs: Vec<(usize, usize, String, Split)> = (0..profiles.len())
        .flat_map(|c| (0..cfg.n_per_class).map(move |i| (c, i)))
        .map(|(c, i)| {
            let id = example_id(c, i);
            let split = split_for(&id);
            (c, i, id, split)
        })
        .filter(|(.., s)| cfg.splits.contains(s))
        .collect();

    let per_example: Vec<Vec<Example>> = jobs
        .par_iter()
        .map(|(class, index, id, split)| {
            let regime = if *split == Split::Test && scenario == Scenario::Ttd { "ttd" } else { "tts" };
            let key = [cfg.seed, *class as u64, *index as u64, seed::tag(regime)];
            let hop_seed = seed::derive(&[hops.hop_seed, seed::derive(&key), seed::tag("hop")]);
            let noise_seed = seed::derive(&[seed::derive(&key), seed::tag("noise")]);
            let channel = if *split == Split::Test { &channels.test } else { &channels.train };

            let mut ex_hops = hops.clone();
            ex_hops.hop_seed = hop_seed;
            let clean = gen_emission(&profiles[*class], &ex_hops, cfg.duration_s(), cfg.sample_rate_hz)?;
            let rx = apply_channel(&clean, channel, &mut seed::rng(&[noise_seed]))?;

            let mut decimated: Vec<(DecimationMode, crate::dsp::ComplexSeries)> = Vec::new();
            variants
                .iter()
                .map(|v| {
                    if !decimated.iter().any(|(m, _)| *m == v.mode) {
                        decimated.push((v.mode, decimate_to(&rx, cfg.m, v.mode)?));
                    }
                    let y = &decimated.iter().find(|(m, _)| *m == v.mode).expect("decimated above").1;
                    Ok(Example {
                        id: id.clone(),
                        label: *class,
                        split: *split,
                        hop_seed,
                        noise_seed,
                        features: standardize(&rows_of(y, v.kind)?, v.kind),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(variants
        .iter()
        .enumerate()
        .map(|(vi, v)| Dataset {
            scenario,
            variant: *v,
            config: cfg.clone(),
            profiles: profiles.to_vec(),
            hops: hops.clone(),
            channels: channels.clone(),
            examples: per_example.iter().map(|exs| exs[vi].clone()).collect(),
        })
        .collect())
}
