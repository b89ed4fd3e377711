//! Feed-forward controller networks and their weight-file format.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::interval::{interval_activation, interval_affine, sigmoid, IntervalBox};
use crate::{Error, Result};

pub const WEIGHTS_FORMAT: &str = "isar-mlp";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }
}

/// Layer widths (input first) and one activation per non-input layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Architecture {
    pub fn new(widths: &[usize], activations: &[Activation]) -> Result<Self> {
        if widths.len() < 2 || activations.len() + 1 != widths.len() {
            return Err(Error::invalid(
                "architecture",
                "need one activation per layer after the input",
            ));
        }
        if widths.contains(&0) {
            return Err(Error::invalid("architecture", "layer widths must be positive"));
        }
        Ok(Self {
            widths: widths.to_vec(),
            activations: activations.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub outputs: usize,
    pub inputs: usize,
    pub activation: Activation,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(r, &b)| {
            let row = &self.weights[r * self.inputs..(r + 1) * self.inputs];
            let z = row.iter().zip(input).fold(b, |acc, (w, x)| acc + w * x);
            self.activation.apply(z)
        }));
    }
}

/// Controller parameters θ: an immutable stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    format: String,
    version: u32,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layers", "controller needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.outputs * layer.inputs {
                return Err(Error::DimensionMismatch {
                    context: "layer weights",
                    expected: layer.outputs * layer.inputs,
                    got: layer.weights.len(),
                });
            }
            if layer.bias.len() != layer.outputs {
                return Err(Error::DimensionMismatch {
                    context: "layer bias",
                    expected: layer.outputs,
                    got: layer.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].outputs != layer.inputs {
                return Err(Error::DimensionMismatch {
                    context: "layer chaining",
                    expected: layers[i - 1].outputs,
                    got: layer.inputs,
                });
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i}")));
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let layers = arch
            .widths
            .windows(2)
            .zip(&arch.activations)
            .map(|(w, &activation)| Layer {
                outputs: w[1],
                inputs: w[0],
                activation,
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Self { layers }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        let mut params = Self::zeros(arch);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        params
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    /// Same architecture with parameters replaced from a flat vector.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut out = self.clone();
        let mut offset = 0;
        for layer in &mut out.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flat parameter vector".into()));
        }
        Ok(out)
    }

    /// Adds i.i.d. `N(0, sigma^2)` noise to every parameter.
    pub fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Self {
        let mut out = self.clone();
        if sigma == 0.0 {
            return out;
        }
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
        for layer in &mut out.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v += normal.sample(rng);
            }
        }
        out
    }

    /// Forward pass; `controller_eval` without plant-side action scaling.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "controller input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Vector-Jacobian product of the forward pass: accumulates the gradient
    /// of `upstream . forward(input)` with respect to the parameters into
    /// `grad` (laid out like [`MlpParams::to_flat`]) and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if grad.len() != self.num_params() || upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "controller backward pass",
                expected: self.num_params(),
                got: grad.len(),
            });
        }
        let mut acts = vec![input.to_vec()];
        for layer in &self.layers {
            let mut next = Vec::new();
            layer.forward(acts.last().expect("input"), &mut next);
            acts.push(next);
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            offsets.push(offset);
            offset += layer.weights.len() + layer.bias.len();
        }
        let mut up = upstream.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let (x, y) = (&acts[li], &acts[li + 1]);
            let delta: Vec<f64> = up
                .iter()
                .zip(y)
                .map(|(u, &y)| {
                    u * match layer.activation {
                        Activation::Tanh => 1.0 - y * y,
                        Activation::Sigmoid => y * (1.0 - y),
                        Activation::Identity => 1.0,
                    }
                })
                .collect();
            let base = offsets[li];
            let mut down = vec![0.0; layer.inputs];
            for (r, d) in delta.iter().enumerate() {
                let row = r * layer.inputs;
                for c in 0..layer.inputs {
                    grad[base + row + c] += d * x[c];
                    down[c] += layer.weights[row + c] * d;
                }
                grad[base + layer.weights.len() + r] += d;
            }
            up = down;
        }
        Ok(up)
    }

    /// Interval forward pass through every layer.
    pub fn forward_box(&self, input: &IntervalBox) -> Result<IntervalBox> {
        if input.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "controller input box",
                expected: self.input_dim(),
                got: input.dim(),
            });
        }
        let mut current = input.clone();
        for layer in &self.layers {
            let pre = interval_affine(&current, &layer.weights, &layer.bias)?;
            current = interval_activation(&pre, layer.activation);
        }
        Ok(current)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = WeightFile {
            format: WEIGHTS_FORMAT.into(),
            version: WEIGHTS_VERSION,
            input_dim: self.input_dim(),
            output_dim: self.output_dim(),
            layers: self.layers.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightFile = serde_json::from_str(text)?;
        if file.format != WEIGHTS_FORMAT || file.version != WEIGHTS_VERSION {
            return Err(Error::invalid(
                "weights",
                format!("unsupported format {} v{}", file.format, file.version),
            ));
        }
        let params = Self::new(file.layers)?;
        if params.input_dim() != file.input_dim || params.output_dim() != file.output_dim {
            return Err(Error::invalid("weights", "declared dimensions disagree with layers"));
        }
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}
