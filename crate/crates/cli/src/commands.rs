use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rflab_core::checkpoint::{self, CheckpointMeta};
use rflab_core::complexity;
use rflab_core::dsp::{build_features, read_capture};
use rflab_core::engine::Scalar;
use rflab_core::eval::{evaluate, export_features};
use rflab_core::model::{build_mbed_atn, MbedAtn};
use rflab_core::sim::{make_dataset, Dataset, DatasetConfig, Split, Variant};
use rflab_core::train::{train_stage1, train_stage2, Precision, RunRecord, Stage, TrainConfig};

use crate::args::{Command, ModelArg};
use crate::error::CliError;
use crate::run_file::{self, *};

const MODEL_NAME: &str = "mbed-atn";

/// Reads every referenced config and pins the command down completely.
pub fn resolve(cmd: Command) -> Result<Invocation> {
    Ok(match cmd {
        Command::Simulate(a) => {
            let profiles: Vec<rflab_core::sim::EmitterProfile> = read_json(&a.profiles, "--profiles")?;
            for (i, p) in profiles.iter().enumerate() {
                p.validate().with_context(|| format!("{} entry {i}", a.profiles.display()))?;
            }
            let hops: rflab_core::sim::HopConfig = read_json(&a.hops, "--hops")?;
            hops.validate().with_context(|| a.hops.display().to_string())?;
            let channels: rflab_core::sim::ChannelPlan = read_json(&a.channels, "--channels")?;
            channels.train.validate().with_context(|| format!("{} field `train`", a.channels.display()))?;
            channels.test.validate().with_context(|| format!("{} field `test`", a.channels.display()))?;
            Invocation::Simulate(Simulate {
                profiles,
                hops,
                channels,
                n: a.n,
                m: a.m,
                mode: a.mode.into(),
                kind: a.features.into(),
                seed: a.seed,
                out: absolute(&a.out)?,
            })
        }
        Command::Features(a) => {
            let capture = require_file(&a.capture, "--capture")?;
            Invocation::Features(Features {
                capture_sha256: sha256_file(&capture)?,
                capture,
                descriptor: read_json(&a.descriptor, "--descriptor")?,
                m: a.m,
                mode: a.mode.into(),
                kind: a.features.into(),
                out: absolute(&a.out)?,
            })
        }
        Command::Train(a) => {
            let dataset = require_file(&a.dataset, "--dataset")?;
            let mut config: TrainConfig = match &a.config {
                Some(p) => read_json(p, "--config")?,
                None => TrainConfig::default(),
            };
            if let Some(s) = a.stage {
                config.stage = s.into();
            }
            config.validate().context("--config")?;
            Invocation::Train(Train {
                dataset_sha256: sha256_file(&dataset)?,
                dataset,
                model: model_name(a.model).into(),
                scale: a.scale,
                config,
                out: absolute(&a.out)?,
            })
        }
        Command::Eval(a) => {
            let dataset = require_file(&a.dataset, "--dataset")?;
            Invocation::Eval(Eval {
                dataset_sha256: sha256_file(&dataset)?,
                dataset,
                checkpoint: require_dir(&a.checkpoint, "--checkpoint")?,
                scenario: a.scenario.into(),
                report: absolute(&a.report)?,
            })
        }
        Command::Complexity(a) => Invocation::Complexity(Complexity {
            model: model_name(a.model).into(),
            m: a.m,
            scale: a.scale,
            batch: a.batch,
            classes: a.classes,
            bytes_per_scalar: a.bytes_per_scalar,
            json: a.json,
            out: a.out.as_deref().map(absolute).transpose()?,
        }),
        Command::ExportFeatures(a) => {
            let dataset = require_file(&a.dataset, "--dataset")?;
            Invocation::ExportFeatures(Export {
                dataset_sha256: sha256_file(&dataset)?,
                dataset,
                checkpoint: require_dir(&a.checkpoint, "--checkpoint")?,
                out: absolute(&a.out)?,
            })
        }
        Command::Rerun(_) => unreachable!("rerun is dispatched before resolve"),
    })
}

fn model_name(m: ModelArg) -> &'static str {
    match m {
        ModelArg::MbedAtn => MODEL_NAME,
    }
}

/// Replays a recorded run, including the runs it builds on.
pub fn rerun(path: &Path, out: Option<&Path>) -> Result<()> {
    let run = RunFile::read(path)?;
    replay(run, out)
}

fn replay(run: RunFile, out: Option<&Path>) -> Result<()> {
    if let Some(prev) = run.resumes {
        replay(*prev, out)?;
    }
    let mut inv = run.invocation;
    if let Some(o) = out {
        inv.redirect(absolute(o)?);
    }
    match &inv {
        Invocation::Features(c) => check_digest(&c.capture, &c.capture_sha256)?,
        Invocation::Train(c) => check_digest(&c.dataset, &c.dataset_sha256)?,
        Invocation::Eval(c) => check_digest(&c.dataset, &c.dataset_sha256)?,
        Invocation::ExportFeatures(c) => check_digest(&c.dataset, &c.dataset_sha256)?,
        Invocation::Simulate(_) | Invocation::Complexity(_) => {}
    }
    execute(inv)
}

pub fn execute(inv: Invocation) -> Result<()> {
    match &inv {
        Invocation::Simulate(c) => simulate(c, &inv),
        Invocation::Features(c) => features(c, &inv),
        Invocation::Train(c) => match c.config.precision {
            Precision::F32 => train::<f32>(c, &inv),
            Precision::F64 => train::<f64>(c, &inv),
        },
        Invocation::Eval(c) => match checkpoint::load_meta(&c.checkpoint)?.precision {
            Precision::F32 => eval::<f32>(c, &inv),
            Precision::F64 => eval::<f64>(c, &inv),
        },
        Invocation::Complexity(c) => complexity_report(c, &inv),
        Invocation::ExportFeatures(c) => match checkpoint::load_meta(&c.checkpoint)?.precision {
            Precision::F32 => export::<f32>(c, &inv),
            Precision::F64 => export::<f64>(c, &inv),
        },
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn simulate(c: &Simulate, inv: &Invocation) -> Result<()> {
    let cfg = DatasetConfig::new(c.n, c.m, c.seed);
    let ds = make_dataset(&c.profiles, &c.hops, &c.channels, &cfg, Variant::new(c.mode, c.kind))?;
    let manifest = ds.save(&c.out)?;
    RunFile::new(inv.clone()).write(&c.out.join("run.json"))?;
    println!(
        "simulated {} examples ({} classes, scenario {}, train/val/test {}/{}/{}) -> {}",
        ds.examples.len(),
        ds.num_classes(),
        ds.scenario.as_str(),
        ds.split(Split::Train).len(),
        ds.split(Split::Val).len(),
        ds.split(Split::Test).len(),
        manifest.display()
    );
    Ok(())
}

fn features(c: &Features, inv: &Invocation) -> Result<()> {
    let series = read_capture(&c.capture, &c.descriptor)?;
    let t = build_features(&series, c.m, c.mode, c.kind)?;
    create_parent(&c.out)?;
    t.save(&c.out)?;
    RunFile::new(inv.clone()).write(&run_file::sidecar(&c.out))?;
    println!("{} samples -> {}x{} tensor {}", series.len(), t.rows(), t.m, c.out.display());
    Ok(())
}

fn summary(rec: &RunRecord) -> String {
    let name = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
    format!(
        "stage {}: {} epochs, stop {}, best epoch {} (val loss {:.4}, val acc {:.3})",
        name(serde_json::json!(rec.stage)),
        rec.epochs.len(),
        name(serde_json::json!(rec.stop_reason)),
        rec.best_epoch,
        rec.best_val_loss,
        rec.best_val_acc
    )
}

fn check_compatible(meta: &CheckpointMeta, ds: &Dataset) -> Result<()> {
    if meta.m != ds.config.m || meta.kind != ds.variant.kind || meta.num_classes != ds.num_classes() {
        return Err(CliError::Input(format!(
            "checkpoint expects M={} {:?} with {} classes, dataset has M={} {:?} with {} classes",
            meta.m,
            meta.kind,
            meta.num_classes,
            ds.config.m,
            ds.variant.kind,
            ds.num_classes()
        ))
        .into());
    }
    Ok(())
}

fn train<T: Scalar>(c: &Train, inv: &Invocation) -> Result<()> {
    if c.model != MODEL_NAME {
        return Err(CliError::Usage(format!("unknown model `{}`", c.model)).into());
    }
    let ds = Dataset::load(&c.dataset)?;
    let train = ds.split(Split::Train);
    let val = ds.split(Split::Val);
    let cfg = &c.config;
    let mut run = RunFile::new(inv.clone());

    let (mut net, mut meta) = if cfg.stage == Stage::Two {
        if !c.out.join(checkpoint::META_FILE).is_file() {
            return Err(CliError::Missing { flag: "--out", path: c.out.join(checkpoint::META_FILE) })
                .context("stage two needs the stage-one checkpoint in --out");
        }
        let (net, meta) = checkpoint::load::<T>(&c.out)?;
        if meta.precision != cfg.precision {
            bail!(CliError::Input(format!("checkpoint precision {:?} differs from config {:?}", meta.precision, cfg.precision)));
        }
        if let Some(s) = c.scale {
            if s != meta.scale {
                bail!(CliError::Input(format!("--scale {s} differs from checkpoint scale {}", meta.scale)));
            }
        }
        check_compatible(&meta, &ds)?;
        let prev = c.out.join("run.json");
        if prev.is_file() {
            run.resumes = Some(Box::new(RunFile::read(&prev)?));
        }
        (net, meta)
    } else {
        let scale = c.scale.unwrap_or(1.0);
        let kind = ds.variant.kind;
        let graph = build_mbed_atn(kind.rows(), ds.config.m, scale, ds.num_classes(), cfg.gru_chunk)?;
        let net = MbedAtn::<T>::new(graph, cfg.seed)?;
        let meta = CheckpointMeta {
            version: 1,
            trained: Stage::One,
            precision: cfg.precision,
            scale,
            m: ds.config.m,
            kind,
            mode: ds.variant.mode,
            num_classes: ds.num_classes(),
            seed: cfg.seed,
        };
        (net, meta)
    };

    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    if matches!(cfg.stage, Stage::One | Stage::Both) {
        let rec = train_stage1(&mut net, &train, &val, cfg)?;
        rec.save(&c.out, "stage1")?;
        meta.trained = Stage::One;
        checkpoint::save(&c.out, &net, &meta)?;
        println!("{}", summary(&rec));
    }
    if matches!(cfg.stage, Stage::Two | Stage::Both) {
        let rec = train_stage2(&mut net, &train, &val, cfg)?;
        rec.save(&c.out, "stage2")?;
        meta.trained = Stage::Both;
        checkpoint::save(&c.out, &net, &meta)?;
        println!("{}", summary(&rec));
        println!("mbed checksum {} (unchanged by stage two)", rec.checksums["mbed_after"]);
    }
    run.write(&c.out.join("run.json"))?;
    Ok(())
}

fn eval<T: Scalar>(c: &Eval, inv: &Invocation) -> Result<()> {
    let ds = Dataset::load(&c.dataset)?;
    if ds.scenario != c.scenario {
        bail!(CliError::Input(format!(
            "dataset {} was simulated as {} but --scenario is {}",
            c.dataset.display(),
            ds.scenario.as_str(),
            c.scenario.as_str()
        )));
    }
    let (net, meta) = checkpoint::load::<T>(&c.checkpoint)?;
    if meta.trained != Stage::Both {
        bail!(CliError::Input(format!("{}: the ATN has not been trained (run stage two)", c.checkpoint.display())));
    }
    check_compatible(&meta, &ds)?;
    let test = ds.split(Split::Test);
    let report = evaluate(&net, &test, c.scenario, ds.variant.mode)?;
    create_parent(&c.report)?;
    report.save(&c.report)?;
    RunFile::new(inv.clone()).write(&run_file::sidecar(&c.report))?;
    println!("{}", report.line());
    Ok(())
}

fn export<T: Scalar>(c: &Export, inv: &Invocation) -> Result<()> {
    let ds = Dataset::load(&c.dataset)?;
    let (net, meta) = checkpoint::load::<T>(&c.checkpoint)?;
    check_compatible(&meta, &ds)?;
    let all: Vec<_> = ds.examples.iter().collect();
    let table = export_features(&net, &all)?;
    create_parent(&c.out)?;
    fs::write(&c.out, table.to_csv()).with_context(|| format!("writing {}", c.out.display()))?;
    RunFile::new(inv.clone()).write(&run_file::sidecar(&c.out))?;
    println!("{} rows x {} features -> {}", table.ids.len(), table.width(), c.out.display());
    Ok(())
}

fn complexity_report(c: &Complexity, inv: &Invocation) -> Result<()> {
    if c.model != MODEL_NAME {
        return Err(CliError::Usage(format!("unknown model `{}`", c.model)).into());
    }
    if c.batch == 0 {
        bail!(CliError::Usage("--batch must be at least 1".into()));
    }
    let graph = build_mbed_atn(3, c.m, c.scale, c.classes, 1)?;
    let report = complexity::report(&graph, c.batch, c.bytes_per_scalar)?;
    let table = report.table();
    let json = report.to_json()?;
    if c.json {
        println!("{json}");
    } else {
        print!("{table}");
    }
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("report.json"), &json)?;
        fs::write(dir.join("report.txt"), &table)?;
        RunFile::new(inv.clone()).write(&dir.join("run.json"))?;
    }
    Ok(())
}
