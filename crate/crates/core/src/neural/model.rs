use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::{Activation, Mlp, MlpGrads};
use crate::error::{Error, Result};

/// Per-axis standardization `(x - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation of `points`; axes with
    /// (near) zero spread keep scale 1.
    pub fn fit<'a>(points: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for p in points {
            n += 1;
            for i in 0..dim {
                sum[i] += p[i];
                sq[i] += p[i] * p[i];
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / n as f64 - m * m).max(0.0);
                let sd = var.sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    /// Per-axis means with one common scale, the root mean square of the
    /// per-axis standard deviations, so relative spreads survive.
    pub fn fit_shared<'a>(points: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let per_axis = Self::fit(points, dim);
        let ms = per_axis.scale.iter().map(|s| s * s).sum::<f64>() / dim.max(1) as f64;
        let s = if ms.sqrt() > 1e-12 { ms.sqrt() } else { 1.0 };
        Self {
            mean: per_axis.mean,
            scale: vec![s; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn apply_rows<R: AsRef<[f64]>>(&self, rows: &[R]) -> Matrix {
        let dim = self.mean.len();
        let mut m = Matrix::zeros(rows.len(), dim);
        for (r, x) in rows.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&self.apply(x.as_ref()));
        }
        m
    }
}

/// Encoder, decoder and latent dynamics networks.
///
/// The encoder and dynamics networks end in `tanh`, so latent points always
/// lie in `[-1, 1]^D`. All networks operate on normalized inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub dynamics: Mlp,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub normalization: Normalization,
    pub seed: u64,
}

/// Gradients for all three networks.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub encoder: MlpGrads,
    pub decoder: MlpGrads,
    pub dynamics: MlpGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &AutoencoderModel) -> Self {
        Self {
            encoder: MlpGrads::zeros_like(&model.encoder),
            decoder: MlpGrads::zeros_like(&model.decoder),
            dynamics: MlpGrads::zeros_like(&model.dynamics),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.encoder
            .tensors()
            .chain(self.decoder.tensors())
            .chain(self.dynamics.tensors())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().flat_map(|t| t.iter().copied()).collect()
    }
}

impl AutoencoderModel {
    /// Fresh model with Glorot-initialized weights drawn from `seed`.
    pub fn new(
        input_dim: usize,
        latent_dim: usize,
        hidden: &[usize],
        normalization: Normalization,
        seed: u64,
    ) -> Result<Self> {
        if latent_dim == 0 || latent_dim >= input_dim {
            return Err(Error::InvalidInput(format!(
                "latent dimension {latent_dim} must satisfy 0 < D < N = {input_dim}"
            )));
        }
        if normalization.mean.len() != input_dim || normalization.scale.len() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                found: normalization.mean.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = |a: usize, b: usize| -> Vec<usize> {
            std::iter::once(a)
                .chain(hidden.iter().copied())
                .chain(std::iter::once(b))
                .collect()
        };
        let encoder = Mlp::new(
            &sizes(input_dim, latent_dim),
            Activation::Relu,
            Activation::Tanh,
            &mut rng,
        )?;
        let decoder = Mlp::new(
            &sizes(latent_dim, input_dim),
            Activation::Relu,
            Activation::Identity,
            &mut rng,
        )?;
        let dynamics = Mlp::new(
            &sizes(latent_dim, latent_dim),
            Activation::Relu,
            Activation::Tanh,
            &mut rng,
        )?;
        Ok(Self {
            encoder,
            decoder,
            dynamics,
            input_dim,
            latent_dim,
            normalization,
            seed,
        })
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.encoder
            .tensors()
            .chain(self.decoder.tensors())
            .chain(self.dynamics.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.encoder
            .tensors_mut()
            .chain(self.decoder.tensors_mut())
            .chain(self.dynamics.tensors_mut())
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count() + self.dynamics.param_count()
    }

    /// `h_enc` applied to a raw (unnormalized) state.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        self.encoder.forward(&self.normalization.apply(x))
    }

    /// `h_enc` applied to many raw states.
    pub fn encode_many<R: AsRef<[f64]>>(&self, xs: &[R]) -> Result<Matrix> {
        if let Some(bad) = xs.iter().find(|x| x.as_ref().len() != self.input_dim) {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: bad.as_ref().len(),
            });
        }
        self.encoder
            .forward_batch(&self.normalization.apply_rows(xs))
    }

    /// `h_dec` mapped back to raw state coordinates.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.normalization.invert(&self.decoder.forward(z)?))
    }

    /// One application of `h_dyn`.
    pub fn latent_step(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.dynamics.forward(z)
    }

    /// `h_dyn` composed `m` times over a batch of latent points.
    pub fn latent_map_batch(&self, z: &Matrix, m: usize) -> Result<Matrix> {
        let mut cur = z.clone();
        for _ in 0..m {
            cur = self.dynamics.forward_batch(&cur)?;
        }
        Ok(cur)
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite() && self.decoder.is_finite() && self.dynamics.is_finite()
    }
}
