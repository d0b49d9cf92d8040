use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One layer of a graph, with its kind-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Maxpool {
        window: usize,
    },
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Prelu,
    Relu,
    Silu,
    Dropout {
        rate: f64,
    },
    /// Multi-layer GRU over a flat vector read as `length / input_size`
    /// steps of `input_size` features; emits the last hidden state of the top layer.
    Gru {
        input_size: usize,
        hidden: usize,
        layers: usize,
        dropout: f64,
    },
    Flatten,
    /// Marks the joint of parallel branches; the input is already the
    /// concatenation of vectors with these widths.
    Concat {
        widths: Vec<usize>,
    },
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Maxpool { .. } => "maxpool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Prelu => "prelu",
            LayerSpec::Relu => "relu",
            LayerSpec::Silu => "silu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Gru { .. } => "gru",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Concat { .. } => "concat",
            LayerSpec::Softmax => "softmax",
        }
    }

    /// Short human-readable description such as `conv1d(100, k=10, s=10)`.
    pub fn describe(&self) -> String {
        match self {
            LayerSpec::Conv1d { out_channels, kernel, stride, padding, .. } => {
                if *padding > 0 {
                    format!("conv1d({out_channels}, k={kernel}, s={stride}, p={padding})")
                } else {
                    format!("conv1d({out_channels}, k={kernel}, s={stride})")
                }
            }
            LayerSpec::Maxpool { window } => format!("maxpool({window})"),
            LayerSpec::Dense { in_features, out_features } => format!("dense({in_features}->{out_features})"),
            LayerSpec::Dropout { rate } => format!("dropout({rate})"),
            LayerSpec::Gru { input_size, hidden, layers, .. } => {
                format!("gru(hidden={hidden}, layers={layers}, F={input_size})")
            }
            LayerSpec::Concat { widths } => format!(
                "concat({})",
                widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("+")
            ),
            other => other.name().to_string(),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        let ok = match self {
            LayerSpec::Conv1d { in_channels, out_channels, kernel, stride, .. } => {
                *in_channels > 0 && *out_channels > 0 && *kernel > 0 && *stride > 0
            }
            LayerSpec::Maxpool { window } => *window > 0,
            LayerSpec::Dense { in_features, out_features } => *in_features > 0 && *out_features > 0,
            LayerSpec::Dropout { rate } => (0.0..1.0).contains(rate),
            LayerSpec::Gru { input_size, hidden, layers, dropout } => {
                *input_size > 0 && *hidden > 0 && *layers > 0 && (0.0..1.0).contains(dropout)
            }
            LayerSpec::Concat { widths } => !widths.is_empty() && widths.iter().all(|&w| w > 0),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err("invalid hyperparameters".into())
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, s: Shape) -> std::result::Result<Shape, String> {
        self.check()?;
        let vector = |s: Shape| {
            if s.channels == 1 {
                Ok(())
            } else {
                Err(format!("expects a flat vector, got {} channels", s.channels))
            }
        };
        Ok(match self {
            LayerSpec::Conv1d { in_channels, out_channels, kernel, stride, padding } => {
                if s.channels != *in_channels {
                    return Err(format!("expects {in_channels} input channels, got {}", s.channels));
                }
                let padded = s.length + 2 * padding;
                if padded < *kernel {
                    return Err(format!("input length {padded} is shorter than kernel {kernel}"));
                }
                Shape::new(*out_channels, (padded - kernel) / stride + 1)
            }
            LayerSpec::Maxpool { window } => {
                if s.length < *window {
                    return Err(format!("input length {} is shorter than window {window}", s.length));
                }
                Shape::new(s.channels, s.length / window)
            }
            LayerSpec::Dense { in_features, out_features } => {
                vector(s)?;
                if s.length != *in_features {
                    return Err(format!("expects {in_features} features, got {}", s.length));
                }
                Shape::vector(*out_features)
            }
            LayerSpec::Gru { input_size, hidden, .. } => {
                vector(s)?;
                if !s.length.is_multiple_of(*input_size) {
                    return Err(format!("length {} is not a multiple of input size {input_size}", s.length));
                }
                Shape::vector(*hidden)
            }
            LayerSpec::Flatten => Shape::vector(s.channels * s.length),
            LayerSpec::Concat { widths } => {
                vector(s)?;
                let total: usize = widths.iter().sum();
                if s.length != total {
                    return Err(format!("expects concatenated width {total}, got {}", s.length));
                }
                s
            }
            LayerSpec::Softmax => {
                vector(s)?;
                s
            }
            LayerSpec::Prelu | LayerSpec::Relu | LayerSpec::Silu | LayerSpec::Dropout { .. } => s,
        })
    }
}

/// Activation shape `channels x length`; vectors have one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub length: usize,
}

impl Shape {
    pub fn new(channels: usize, length: usize) -> Self {
        Shape { channels, length }
    }

    pub fn vector(n: usize) -> Self {
        Shape::new(1, n)
    }

    pub fn numel(&self) -> usize {
        self.channels * self.length
    }
}

/// Output shape of every layer, or a configuration error naming the failing layer.
pub fn infer_shapes(stage: &str, layers: &[LayerSpec], input: Shape) -> Result<Vec<Shape>> {
    let mut s = input;
    let mut out = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        s = layer
            .output_shape(s)
            .map_err(|e| Error::Config(format!("{stage} layer {i} ({}): {e}", layer.describe())))?;
        out.push(s);
    }
    Ok(out)
}

/// `round(c * scale)`, never below 1.
pub fn scaled(c: usize, scale: f64) -> usize {
    ((c as f64 * scale).round() as usize).max(1)
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("width scale must be in (0, 1], got {scale}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbedGraph {
    pub m: usize,
    pub input_rows: usize,
    pub scale: f64,
    pub layers: Vec<LayerSpec>,
}

impl MbedGraph {
    pub fn input_shape(&self) -> Shape {
        Shape::new(self.input_rows, self.m)
    }

    pub fn shapes(&self) -> Result<Vec<Shape>> {
        infer_shapes("mbed", &self.layers, self.input_shape())
    }

    pub fn output_width(&self) -> usize {
        self.shapes().map(|s| s.last().map_or(0, |s| s.length)).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtnGraph {
    pub in_width: usize,
    pub scale: f64,
    pub num_classes: usize,
    pub branches: Vec<Vec<LayerSpec>>,
    /// Starts with a `concat` layer recording the branch widths.
    pub head: Vec<LayerSpec>,
}

impl AtnGraph {
    pub fn input_shape(&self) -> Shape {
        Shape::vector(self.in_width)
    }

    pub fn branch_shapes(&self) -> Result<Vec<Vec<Shape>>> {
        self.branches
            .iter()
            .enumerate()
            .map(|(b, layers)| infer_shapes(&format!("atn branch {}", b + 1), layers, self.input_shape()))
            .collect()
    }

    pub fn concat_width(&self) -> usize {
        match self.head.first() {
            Some(LayerSpec::Concat { widths }) => widths.iter().sum(),
            _ => 0,
        }
    }

    pub fn head_shapes(&self) -> Result<Vec<Shape>> {
        infer_shapes("atn head", &self.head, Shape::vector(self.concat_width()))
    }
}

/// The complete two-module network plus the temporary stage-one head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGraph {
    pub mbed: MbedGraph,
    pub temp_head: Vec<LayerSpec>,
    pub atn: AtnGraph,
}

impl ModelGraph {
    pub fn num_classes(&self) -> usize {
        self.atn.num_classes
    }

    pub fn embed_width(&self) -> usize {
        self.atn.in_width
    }

    pub fn temp_head_shapes(&self) -> Result<Vec<Shape>> {
        infer_shapes("stage-one head", &self.temp_head, Shape::vector(self.embed_width()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: ModelGraph = serde_json::from_str(s).map_err(|e| Error::Format(format!("model graph: {e}")))?;
        g.validate()?;
        Ok(g)
    }

    /// Runs shape inference over every stack and checks the joints between them.
    pub fn validate(&self) -> Result<()> {
        let mbed = self.mbed.shapes()?;
        let f = mbed.last().copied().unwrap_or(self.mbed.input_shape());
        if f != Shape::vector(self.atn.in_width) {
            return Err(Error::Config(format!(
                "Mbed output {}x{} does not match ATN input width {}",
                f.channels, f.length, self.atn.in_width
            )));
        }
        let ends: Vec<usize> = self
            .atn
            .branch_shapes()?
            .iter()
            .map(|s| s.last().map_or(self.atn.in_width, |s| s.numel()))
            .collect();
        match self.atn.head.first() {
            Some(LayerSpec::Concat { widths }) if *widths == ends => {}
            _ => return Err(Error::Config(format!("ATN head must start with concat of branch widths {ends:?}"))),
        }
        self.atn.head_shapes()?;
        self.temp_head_shapes()?;
        Ok(())
    }
}

/// Mbed stack for a `3 x M` input.
pub fn build_mbed(m: usize, scale: f64) -> Result<MbedGraph> {
    build_mbed_rows(3, m, scale)
}

/// Mbed stack for an input with `rows` feature rows.
pub fn build_mbed_rows(rows: usize, m: usize, scale: f64) -> Result<MbedGraph> {
    check_scale(scale)?;
    if rows == 0 || m == 0 {
        return Err(Error::Config("Mbed input must have positive rows and length".into()));
    }
    let long = m >= 1_000_000;
    let (s1, s2, s3) = if long { (20, 6, 5) } else { (10, 3, 10) };
    let c1 = scaled(100, scale);
    let c2 = scaled(50, scale);
    let c3 = scaled(40, scale);
    let conv = |i, o, k, s| LayerSpec::Conv1d { in_channels: i, out_channels: o, kernel: k, stride: s, padding: 0 };
    let mut layers = vec![
        conv(rows, c1, 10, s1),
        LayerSpec::Prelu,
        conv(c1, c2, 6, s2),
        LayerSpec::Prelu,
        LayerSpec::Maxpool { window: 8 },
        LayerSpec::Dropout { rate: 0.5 },
        conv(c2, c3, 10, s3),
        LayerSpec::Prelu,
    ];
    if long {
        layers.push(LayerSpec::Maxpool { window: 5 });
    }
    layers.push(LayerSpec::Dropout { rate: 0.5 });
    layers.push(LayerSpec::Flatten);

    // the dense input width is whatever the cascade leaves after flatten
    let flat = infer_shapes("mbed", &layers, Shape::new(rows, m))?
        .last()
        .expect("nonempty")
        .length;
    layers.push(LayerSpec::Dense { in_features: flat, out_features: scaled(1024, scale) });
    layers.push(LayerSpec::Relu);
    Ok(MbedGraph { m, input_rows: rows, scale, layers })
}

/// ATN with one-wide GRU steps.
pub fn build_atn(in_width: usize, scale: f64, num_classes: usize) -> Result<AtnGraph> {
    build_atn_with(in_width, scale, num_classes, 1)
}

/// ATN whose GRU branch reads the input as `in_width / gru_chunk` steps of `gru_chunk` features.
pub fn build_atn_with(in_width: usize, scale: f64, num_classes: usize, gru_chunk: usize) -> Result<AtnGraph> {
    check_scale(scale)?;
    if in_width < 8 {
        return Err(Error::Config(format!("ATN input width must be at least 8, got {in_width}")));
    }
    if num_classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
    }
    if gru_chunk == 0 || !in_width.is_multiple_of(gru_chunk) {
        return Err(Error::Config(format!("GRU chunk {gru_chunk} must divide the input width {in_width}")));
    }
    let c1 = scaled(15, scale);
    let c2 = scaled(32, scale);
    let conv_branch = |k: usize| {
        vec![
            LayerSpec::Conv1d { in_channels: 1, out_channels: c1, kernel: k, stride: 1, padding: 1 },
            LayerSpec::Prelu,
            LayerSpec::Dropout { rate: 0.1 },
            LayerSpec::Conv1d { in_channels: c1, out_channels: c2, kernel: k, stride: 1, padding: 0 },
            LayerSpec::Prelu,
            LayerSpec::Maxpool { window: 2 },
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Flatten,
        ]
    };
    let hidden = scaled(80, scale);
    let branches = vec![
        conv_branch(7),
        conv_branch(3),
        vec![
            LayerSpec::Gru { input_size: gru_chunk, hidden, layers: 3, dropout: 0.5 },
            LayerSpec::Silu,
        ],
    ];
    let widths = branches
        .iter()
        .enumerate()
        .map(|(b, layers)| {
            infer_shapes(&format!("atn branch {}", b + 1), layers, Shape::vector(in_width))
                .map(|s| s.last().expect("nonempty").numel())
        })
        .collect::<Result<Vec<_>>>()?;
    let concat: usize = widths.iter().sum();
    let d1 = scaled(1024, scale);
    let d2 = scaled(64, scale);
    let head = vec![
        LayerSpec::Concat { widths },
        LayerSpec::Dense { in_features: concat, out_features: d1 },
        LayerSpec::Prelu,
        LayerSpec::Dropout { rate: 0.2 },
        LayerSpec::Dense { in_features: d1, out_features: d2 },
        LayerSpec::Prelu,
        LayerSpec::Dropout { rate: 0.2 },
        LayerSpec::Dense { in_features: d2, out_features: num_classes },
        LayerSpec::Softmax,
    ];
    Ok(AtnGraph { in_width, scale, num_classes, branches, head })
}

/// Mbed and ATN composed, with the stage-one `Dense(num_classes)` + softmax head.
pub fn build_mbed_atn(rows: usize, m: usize, scale: f64, num_classes: usize, gru_chunk: usize) -> Result<ModelGraph> {
    let mbed = build_mbed_rows(rows, m, scale)?;
    let width = mbed.output_width();
    let atn = build_atn_with(width, scale, num_classes, gru_chunk)?;
    let temp_head = vec![
        LayerSpec::Dense { in_features: width, out_features: num_classes },
        LayerSpec::Softmax,
    ];
    let g = ModelGraph { mbed, temp_head, atn };
    g.validate()?;
    Ok(g)
}
