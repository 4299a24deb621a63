use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, v: &mut [f64]) {
        match self {
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative expressed through the activation output `y`.
    fn backprop(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => grad.iter_mut().zip(y).for_each(|(g, &y)| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.iter_mut().zip(y).for_each(|(g, &y)| *g *= 1.0 - y * y),
            Activation::Identity => {}
        }
    }
}

/// Fully connected layer. `weights[i * outputs + o]` connects input `i` to output `o`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect(),
            bias: vec![0.0; outputs],
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.outputs);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let or = out.row_mut(r);
            or.copy_from_slice(&self.bias);
            for (i, &xi) in xr.iter().enumerate() {
                let w = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                for (o, &wio) in or.iter_mut().zip(w) {
                    *o += wio * xi;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub hidden: Activation,
    pub output: Activation,
}

/// Per-layer outputs saved by [`Mlp::forward_cached`]; `acts[0]` is the input.
pub struct ForwardCache {
    acts: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.acts.last().unwrap()
    }
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
    }
}

impl Mlp {
    /// Network with layer widths `sizes` (input first, output last).
    pub fn new(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "invalid layer sizes {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Layer::glorot(w[0], w[1], rng))
            .collect();
        Ok(Self {
            layers,
            hidden,
            output,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.cols(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.affine(acts.last().unwrap());
            self.activation(l).apply(y.as_mut_slice());
            acts.push(y);
        }
        Ok(ForwardCache { acts })
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.cols(),
            });
        }
        let mut cur = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            cur = layer.affine(&cur);
            self.activation(l).apply(cur.as_mut_slice());
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec());
        Ok(self.forward_batch(&m)?.as_slice().to_vec())
    }

    /// Accumulates parameter gradients into `grads` given `d loss / d output`,
    /// and returns `d loss / d input`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &Matrix,
        grads: &mut MlpGrads,
    ) -> Matrix {
        let mut g = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let y = &cache.acts[l + 1];
            let x = &cache.acts[l];
            self.activation(l).backprop(y.as_slice(), g.as_mut_slice());
            let gl = &mut grads.layers[l];
            let mut gx = Matrix::zeros(x.rows(), layer.inputs);
            for r in 0..x.rows() {
                let gr = g.row(r);
                let xr = x.row(r);
                for (b, &v) in gl.bias.iter_mut().zip(gr) {
                    *b += v;
                }
                let gxr = gx.row_mut(r);
                for (i, &xi) in xr.iter().enumerate() {
                    let w = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    let gw = &mut gl.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    let mut acc = 0.0;
                    for ((gwo, &wo), &go) in gw.iter_mut().zip(w).zip(gr) {
                        *gwo += xi * go;
                        acc += wo * go;
                    }
                    gxr[i] = acc;
                }
            }
            g = gx;
        }
        g
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }
}
