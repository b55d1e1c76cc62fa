//! Analytic parameter and MAC counts for layer graphs.
//!
//! Conventions: a MAC is one multiply-accumulate; biases, activations,
//! normalization and pooling contribute parameters but no MACs. Recurrent
//! layers follow the PyTorch parameterization (separate input and hidden
//! biases). A `linear` or recurrent layer applied to a feature map treats
//! the height axis as time and flattens channels x width per step.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SeldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TensorShape {
    /// `C x H x W`; H is time, W is frequency.
    Map { channels: usize, height: usize, width: usize },
    Sequence { length: usize, features: usize },
}

impl TensorShape {
    fn as_sequence(self) -> (usize, usize) {
        match self {
            TensorShape::Map { channels, height, width } => (height, channels * width),
            TensorShape::Sequence { length, features } => (length, features),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentCell {
    Gru,
    Lstm,
}

impl RecurrentCell {
    fn gates(self) -> usize {
        match self {
            RecurrentCell::Gru => 3,
            RecurrentCell::Lstm => 4,
        }
    }
}

fn one() -> [usize; 2] {
    [1, 1]
}

fn zero() -> [usize; 2] {
    [0, 0]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Layer {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        #[serde(default = "one")]
        stride: [usize; 2],
        #[serde(default = "zero")]
        padding: [usize; 2],
        #[serde(default = "yes")]
        bias: bool,
    },
    /// Depthwise `kernel` convolution followed by a 1x1 pointwise one.
    DepthwiseSeparable {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        #[serde(default = "one")]
        stride: [usize; 2],
        #[serde(default = "zero")]
        padding: [usize; 2],
        #[serde(default = "yes")]
        bias: bool,
    },
    BatchNorm {
        channels: usize,
    },
    Pool {
        kernel: [usize; 2],
        stride: Option<[usize; 2]>,
    },
    Recurrent {
        cell: RecurrentCell,
        input_size: usize,
        hidden_size: usize,
        #[serde(default)]
        bidirectional: bool,
        #[serde(default = "yes")]
        bias: bool,
    },
    Linear {
        in_features: usize,
        out_features: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGraph {
    #[serde(default)]
    pub input: Option<TensorShape>,
    pub layers: Vec<Layer>,
}

impl LayerGraph {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { input: None, layers }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// `self` followed by `other`.
    pub fn then(mut self, other: LayerGraph) -> Self {
        self.layers.extend(other.layers);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub params: u64,
    pub macs: u64,
    pub output: TensorShape,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: u64,
    pub macs: u64,
    pub output: TensorShape,
    pub layers: Vec<LayerCost>,
}

fn spatial_out(size: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || size + 2 * pad < kernel {
        return None;
    }
    Some((size + 2 * pad - kernel) / stride + 1)
}

fn n(v: usize) -> u64 {
    v as u64
}

fn layer_cost(index: usize, layer: &Layer, shape: TensorShape) -> Result<LayerCost> {
    let inconsistent = |reason: String| SeldError::ShapeInconsistent { index, reason };
    let map = |what: &str| match shape {
        TensorShape::Map { channels, height, width } => Ok((channels, height, width)),
        TensorShape::Sequence { .. } => Err(inconsistent(format!("{what} needs a feature map, got {shape:?}"))),
    };
    let conv_out = |cin: usize, k: [usize; 2], s: [usize; 2], p: [usize; 2]| {
        let (c, h, w) = map("convolution")?;
        if c != cin {
            return Err(inconsistent(format!("expects {cin} input channels, got {c}")));
        }
        match (spatial_out(h, k[0], s[0], p[0]), spatial_out(w, k[1], s[1], p[1])) {
            (Some(ho), Some(wo)) => Ok((ho, wo)),
            _ => Err(inconsistent(format!("kernel {k:?} stride {s:?} does not fit {h}x{w}"))),
        }
    };
    let cost = match *layer {
        Layer::Conv2d { in_channels, out_channels, kernel, stride, padding, bias } => {
            let (ho, wo) = conv_out(in_channels, kernel, stride, padding)?;
            let taps = n(in_channels) * n(out_channels) * n(kernel[0]) * n(kernel[1]);
            LayerCost {
                params: taps + if bias { n(out_channels) } else { 0 },
                macs: taps * n(ho) * n(wo),
                output: TensorShape::Map { channels: out_channels, height: ho, width: wo },
            }
        }
        Layer::DepthwiseSeparable { in_channels, out_channels, kernel, stride, padding, bias } => {
            let (ho, wo) = conv_out(in_channels, kernel, stride, padding)?;
            let depthwise = n(in_channels) * n(kernel[0]) * n(kernel[1]);
            let pointwise = n(in_channels) * n(out_channels);
            let biases = if bias { n(in_channels) + n(out_channels) } else { 0 };
            LayerCost {
                params: depthwise + pointwise + biases,
                macs: (depthwise + pointwise) * n(ho) * n(wo),
                output: TensorShape::Map { channels: out_channels, height: ho, width: wo },
            }
        }
        Layer::BatchNorm { channels } => {
            let (c, _, _) = map("batch norm")?;
            if c != channels {
                return Err(inconsistent(format!("expects {channels} channels, got {c}")));
            }
            LayerCost { params: 2 * n(channels), macs: 0, output: shape }
        }
        Layer::Pool { kernel, stride } => {
            let (c, h, w) = map("pooling")?;
            let s = stride.unwrap_or(kernel);
            match (spatial_out(h, kernel[0], s[0], 0), spatial_out(w, kernel[1], s[1], 0)) {
                (Some(ho), Some(wo)) => LayerCost {
                    params: 0,
                    macs: 0,
                    output: TensorShape::Map { channels: c, height: ho, width: wo },
                },
                _ => return Err(inconsistent(format!("pool {kernel:?} does not fit {h}x{w}"))),
            }
        }
        Layer::Recurrent { cell, input_size, hidden_size, bidirectional, bias } => {
            let (len, features) = shape.as_sequence();
            if features != input_size {
                return Err(inconsistent(format!("expects {input_size} input features, got {features}")));
            }
            let dirs = if bidirectional { 2 } else { 1 };
            let g = n(cell.gates());
            let (i, h) = (n(input_size), n(hidden_size));
            let per_dir_weights = g * (h * i + h * h);
            let per_dir_bias = if bias { 2 * g * h } else { 0 };
            LayerCost {
                params: dirs * (per_dir_weights + per_dir_bias),
                macs: dirs * per_dir_weights * n(len),
                output: TensorShape::Sequence { length: len, features: dirs as usize * hidden_size },
            }
        }
        Layer::Linear { in_features, out_features, bias } => {
            let (len, features) = shape.as_sequence();
            if features != in_features {
                return Err(inconsistent(format!("expects {in_features} input features, got {features}")));
            }
            let w = n(in_features) * n(out_features);
            LayerCost {
                params: w + if bias { n(out_features) } else { 0 },
                macs: w * n(len),
                output: TensorShape::Sequence { length: len, features: out_features },
            }
        }
    };
    Ok(cost)
}

/// Walks the graph from `input`, checking that consecutive shapes chain.
pub fn count_cost(graph: &LayerGraph, input: TensorShape) -> Result<CostReport> {
    let mut shape = input;
    let mut layers = Vec::with_capacity(graph.layers.len());
    let (mut params, mut macs) = (0u64, 0u64);
    for (index, layer) in graph.layers.iter().enumerate() {
        let cost = layer_cost(index, layer, shape)?;
        params += cost.params;
        macs += cost.macs;
        shape = cost.output;
        layers.push(cost);
    }
    Ok(CostReport { params, macs, output: shape, layers })
}
