//! Analytic parameter, FLOP and training-memory accounting for layer graphs.
//!
//! Conventions: a multiply-accumulate is 2 FLOPs; elementwise costs per
//! element are relu 1, prelu 2, silu 4, softmax 3, dropout 1, and pooling 1
//! per input element. Only the forward pass is counted.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{LayerSpec, ModelGraph, Shape};
use crate::{Error, Result};

/// Parameter count of the large reference configuration used for the ratio check.
pub const REFERENCE_PARAMS: u64 = 256_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub stage: String,
    pub index: usize,
    pub layer: String,
    pub kind: String,
    pub output: Shape,
    pub params: u64,
    pub flops: u64,
    /// Elements retained from the forward pass for backpropagation.
    pub activations: u64,
}

/// Byte estimates of the five training-memory stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStages {
    pub model_loading: u64,
    pub forward_pass: u64,
    pub backward_pass: u64,
    pub optimizer: u64,
    pub training_iteration: u64,
}

impl MemoryStages {
    pub fn as_array(&self) -> [u64; 5] {
        [
            self.model_loading,
            self.forward_pass,
            self.backward_pass,
            self.optimizer,
            self.training_iteration,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub model: String,
    pub m: usize,
    pub scale: f64,
    pub batch: usize,
    pub bytes_per_scalar: u64,
    /// Deployed parameters (Mbed + ATN).
    pub params: u64,
    pub flops: u64,
    pub activations_per_example: u64,
    pub stage1_head_params: u64,
    pub stage1_head_flops: u64,
    pub reference_params: u64,
    pub reference_ratio: f64,
    pub memory: MemoryStages,
    pub breakdown: Vec<LayerCost>,
}

fn u(n: usize) -> u64 {
    n as u64
}

/// `(params, flops, activations, output shape)` of one layer.
pub fn layer_cost(spec: &LayerSpec, input: Shape) -> Result<(u64, u64, u64, Shape)> {
    let out = spec
        .output_shape(input)
        .map_err(|e| Error::Config(format!("{}: {e}", spec.describe())))?;
    let n_in = u(input.numel());
    let n_out = u(out.numel());
    let (params, flops, acts) = match spec {
        LayerSpec::Conv1d { in_channels, out_channels, kernel, .. } => {
            let w = u(out_channels * in_channels * kernel);
            (w + u(*out_channels), 2 * w * u(out.length), n_out)
        }
        LayerSpec::Dense { in_features, out_features } => {
            let w = u(out_features * in_features);
            (w + u(*out_features), 2 * w, n_out)
        }
        LayerSpec::Gru { input_size, hidden, layers, .. } => {
            let (h, steps) = (u(*hidden), u(input.length / input_size));
            let mut p = 0;
            let mut f = 0;
            for l in 0..*layers {
                let feat = if l == 0 { u(*input_size) } else { h };
                p += 3 * (h * feat + h * h + h);
                f += steps * (2 * 3 * (h * feat + h * h) + 9 * h);
            }
            // hidden state plus update, reset and candidate gates per step and layer
            (p, f, 4 * steps * h * u(*layers))
        }
        LayerSpec::Prelu => (1, 2 * n_in, n_out),
        LayerSpec::Relu => (0, n_in, n_out),
        LayerSpec::Silu => (0, 4 * n_in, n_out),
        LayerSpec::Softmax => (0, 3 * n_in, n_out),
        LayerSpec::Dropout { .. } => (0, n_in, n_out),
        LayerSpec::Maxpool { .. } => (0, n_in, n_out),
        LayerSpec::Flatten | LayerSpec::Concat { .. } => (0, 0, 0),
    };
    Ok((params, flops, acts, out))
}

/// Per-layer costs of a sequential stack.
pub fn analyze_stack(stage: &str, layers: &[LayerSpec], input: Shape) -> Result<Vec<LayerCost>> {
    let mut s = input;
    let mut out = Vec::with_capacity(layers.len());
    for (i, spec) in layers.iter().enumerate() {
        let (params, flops, activations, next) = layer_cost(spec, s)
            .map_err(|e| Error::Config(format!("{stage} layer {i}: {e}")))?;
        out.push(LayerCost {
            stage: stage.to_string(),
            index: i,
            layer: spec.describe(),
            kind: spec.name().to_string(),
            output: next,
            params,
            flops,
            activations,
        });
        s = next;
    }
    Ok(out)
}

/// Costs of every deployed layer (Mbed, ATN branches, ATN head) followed by the stage-one head.
pub fn breakdown(graph: &ModelGraph) -> Result<Vec<LayerCost>> {
    graph.validate()?;
    let f = Shape::vector(graph.atn.in_width);
    let mut out = analyze_stack("mbed", &graph.mbed.layers, graph.mbed.input_shape())?;
    for (b, layers) in graph.atn.branches.iter().enumerate() {
        out.extend(analyze_stack(&format!("atn.branch{}", b + 1), layers, f)?);
    }
    out.extend(analyze_stack("atn.head", &graph.atn.head, Shape::vector(graph.atn.concat_width()))?);
    out.extend(analyze_stack("stage1_head", &graph.temp_head, f)?);
    Ok(out)
}

fn deployed(c: &&LayerCost) -> bool {
    c.stage != "stage1_head"
}

/// Deployed trainable parameters with the per-layer breakdown.
pub fn count_params(graph: &ModelGraph) -> Result<(u64, Vec<LayerCost>)> {
    let b = breakdown(graph)?;
    Ok((b.iter().filter(deployed).map(|c| c.params).sum(), b))
}

/// Forward FLOPs of the deployed network at the graph's input length.
pub fn count_flops(graph: &ModelGraph) -> Result<(u64, Vec<LayerCost>)> {
    let b = breakdown(graph)?;
    Ok((b.iter().filter(deployed).map(|c| c.flops).sum(), b))
}

/// Five-stage memory model for `params` parameters and `activations`
/// retained elements per example.
pub fn memory_stages(params: u64, activations: u64, batch: usize, bytes_per_scalar: u64) -> Result<MemoryStages> {
    if batch == 0 {
        return Err(Error::Argument("batch must be at least 1".into()));
    }
    let p = params * bytes_per_scalar;
    let a = activations * u(batch) * bytes_per_scalar;
    Ok(MemoryStages {
        model_loading: p,
        forward_pass: p + a,
        backward_pass: 2 * p,
        optimizer: 4 * p,
        training_iteration: 4 * p + a,
    })
}

/// Memory stages of an arbitrary stack.
pub fn stack_memory(layers: &[LayerSpec], input: Shape, batch: usize, bytes_per_scalar: u64) -> Result<MemoryStages> {
    let costs = analyze_stack("stack", layers, input)?;
    memory_stages(
        costs.iter().map(|c| c.params).sum(),
        costs.iter().map(|c| c.activations).sum(),
        batch,
        bytes_per_scalar,
    )
}

pub fn report(graph: &ModelGraph, batch: usize, bytes_per_scalar: u64) -> Result<ComplexityReport> {
    let b = breakdown(graph)?;
    let params: u64 = b.iter().filter(deployed).map(|c| c.params).sum();
    let flops: u64 = b.iter().filter(deployed).map(|c| c.flops).sum();
    let acts: u64 = b.iter().filter(deployed).map(|c| c.activations).sum();
    let head = b.iter().filter(|c| c.stage == "stage1_head");
    let (hp, hf) = head.fold((0, 0), |(p, f), c| (p + c.params, f + c.flops));
    Ok(ComplexityReport {
        model: "Mbed-ATN".into(),
        m: graph.mbed.m,
        scale: graph.mbed.scale,
        batch,
        bytes_per_scalar,
        params,
        flops,
        activations_per_example: acts,
        stage1_head_params: hp,
        stage1_head_flops: hf,
        reference_params: REFERENCE_PARAMS,
        reference_ratio: REFERENCE_PARAMS as f64 / params as f64,
        memory: memory_stages(params, acts, batch, bytes_per_scalar)?,
        breakdown: b,
    })
}

fn si(v: u64) -> String {
    let v = v as f64;
    if v >= 1e9 {
        format!("{:.3}G", v / 1e9)
    } else if v >= 1e6 {
        format!("{:.3}M", v / 1e6)
    } else if v >= 1e3 {
        format!("{:.3}K", v / 1e3)
    } else {
        format!("{v}")
    }
}

fn bytes(v: u64) -> String {
    let v = v as f64;
    if v >= 1024.0 * 1024.0 * 1024.0 {
        format!("{:.2} GiB", v / (1024.0 * 1024.0 * 1024.0))
    } else if v >= 1024.0 * 1024.0 {
        format!("{:.2} MiB", v / (1024.0 * 1024.0))
    } else if v >= 1024.0 {
        format!("{:.2} KiB", v / 1024.0)
    } else {
        format!("{v} B")
    }
}

impl ComplexityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text rendering: summary row, per-layer breakdown and memory stages.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>10} {:>13} {:>24}", "Model", "FLOPs", "#Parameters", "Supported Sample length");
        let _ = writeln!(s, "{:<10} {:>10} {:>13} {:>24}", self.model, si(self.flops), si(self.params), self.m);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<12} {:>3}  {:<34} {:>12} {:>14} {:>12}",
            "stage", "#", "layer", "output", "params", "flops"
        );
        for c in &self.breakdown {
            let _ = writeln!(
                s,
                "{:<12} {:>3}  {:<34} {:>12} {:>14} {:>12}",
                c.stage,
                c.index,
                c.layer,
                format!("{}x{}", c.output.channels, c.output.length),
                c.params,
                c.flops
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "stage-one head (discarded after training): {} params, {} FLOPs",
            self.stage1_head_params, self.stage1_head_flops
        );
        let _ = writeln!(
            s,
            "reference {} params / {} = {:.2}x",
            si(self.reference_params),
            si(self.params),
            self.reference_ratio
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "memory (batch {}, {} B/scalar):", self.batch, self.bytes_per_scalar);
        let names = ["1 model loading", "2 forward pass", "3 backward pass", "4 optimizer", "5 training iteration"];
        for (n, v) in names.iter().zip(self.memory.as_array()) {
            let _ = writeln!(s, "  {n:<22} {:>14}", bytes(v));
        }
        s
    }
}
