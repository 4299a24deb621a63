//! Training objectives and their exact gradients.
//!
//! All inputs here are already normalized (see [`Normalization`](super::Normalization)).

use super::matrix::Matrix;
use super::model::{AutoencoderModel, ModelGrads};
use crate::error::{Error, Result};

/// Loss weights and the separation scale `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub image_reconstruction: f64,
    pub dynamics: f64,
    pub separation: f64,
    pub sigmoid_scale: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            reconstruction: 1.0,
            image_reconstruction: 1.0,
            dynamics: 1.0,
            separation: 0.3,
            sigmoid_scale: 10.0,
        }
    }
}

/// Per-term losses of one batch. `total` is the weighted sum of the first three
/// terms; the separation term is optimized in its own phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Losses {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: Option<f64>,
    pub total: f64,
}

pub fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn mean_sq_dist(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.rows();
    a.iter_rows()
        .zip(b.iter_rows())
        .map(|(u, v)| sq_dist(u, v))
        .sum::<f64>()
        / n as f64
}

fn check_batch(model: &AutoencoderModel, x: &Matrix, im: &Matrix) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if x.rows() != im.rows() {
        return Err(Error::InvalidInput(format!(
            "batch has {} states but {} images",
            x.rows(),
            im.rows()
        )));
    }
    for m in [x, im] {
        if m.cols() != model.input_dim {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim,
                found: m.cols(),
            });
        }
    }
    Ok(())
}

fn finite(l: Losses) -> Result<Losses> {
    let all = [l.l1, l.l2, l.l3, l.l4.unwrap_or(0.0), l.total];
    if all.iter().all(|v| v.is_finite()) {
        Ok(l)
    } else {
        Err(Error::NonFiniteLoss(format!(
            "L1={} L2={} L3={} L4={:?} total={}",
            l.l1, l.l2, l.l3, l.l4, l.total
        )))
    }
}

/// `L4 = mean_j sigmoid(-c * |h_enc(x_s^j) - h_enc(x_f^j)|)` over row-paired finals.
pub fn separation_loss(model: &AutoencoderModel, xs: &Matrix, xf: &Matrix, c: f64) -> Result<f64> {
    check_batch(model, xs, xf)?;
    let es = model.encoder.forward_batch(xs)?;
    let ef = model.encoder.forward_batch(xf)?;
    let n = xs.rows() as f64;
    Ok(es
        .iter_rows()
        .zip(ef.iter_rows())
        .map(|(a, b)| sigmoid(-c * sq_dist(a, b).sqrt()))
        .sum::<f64>()
        / n)
}

/// All four loss terms on one batch. The separation term is evaluated only
/// when `separation` pairs are supplied.
pub fn loss_batch(
    model: &AutoencoderModel,
    x: &Matrix,
    im: &Matrix,
    separation: Option<(&Matrix, &Matrix)>,
    w: &LossWeights,
) -> Result<Losses> {
    check_batch(model, x, im)?;
    let z = model.encoder.forward_batch(x)?;
    let zi = model.encoder.forward_batch(im)?;
    let l1 = mean_sq_dist(x, &model.decoder.forward_batch(&z)?);
    let l2 = mean_sq_dist(im, &model.decoder.forward_batch(&zi)?);
    let l3 = mean_sq_dist(&model.dynamics.forward_batch(&z)?, &zi);
    let l4 = match separation {
        Some((xs, xf)) => Some(separation_loss(model, xs, xf, w.sigmoid_scale)?),
        None => None,
    };
    finite(Losses {
        l1,
        l2,
        l3,
        l4,
        total: w.reconstruction * l1 + w.image_reconstruction * l2 + w.dynamics * l3,
    })
}

/// `d/d out` of `weight * mean ||out - target||^2`.
fn sq_grad(out: &Matrix, target: &Matrix, weight: f64) -> Matrix {
    let k = 2.0 * weight / out.rows() as f64;
    let data = out
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(o, t)| k * (o - t))
        .collect();
    Matrix::from_vec(out.rows(), out.cols(), data)
}

fn add_into(acc: &mut Matrix, other: &Matrix) {
    acc.as_mut_slice()
        .iter_mut()
        .zip(other.as_slice())
        .for_each(|(a, b)| *a += b);
}

/// Losses and exact gradients of `l1 L1 + l2 L2 + l3 L3`.
pub fn reconstruction_gradients(
    model: &AutoencoderModel,
    x: &Matrix,
    im: &Matrix,
    w: &LossWeights,
) -> Result<(Losses, ModelGrads)> {
    check_batch(model, x, im)?;
    let mut grads = ModelGrads::zeros_like(model);

    let enc_x = model.encoder.forward_cached(x)?;
    let enc_im = model.encoder.forward_cached(im)?;
    let z = enc_x.output();
    let zi = enc_im.output();
    let dec_x = model.decoder.forward_cached(z)?;
    let dec_im = model.decoder.forward_cached(zi)?;
    let dyn_z = model.dynamics.forward_cached(z)?;

    let l1 = mean_sq_dist(x, dec_x.output());
    let l2 = mean_sq_dist(im, dec_im.output());
    let l3 = mean_sq_dist(dyn_z.output(), zi);
    let losses = finite(Losses {
        l1,
        l2,
        l3,
        l4: None,
        total: w.reconstruction * l1 + w.image_reconstruction * l2 + w.dynamics * l3,
    })?;

    let g_xr = sq_grad(dec_x.output(), x, w.reconstruction);
    let mut g_z = model.decoder.backward(&dec_x, &g_xr, &mut grads.decoder);

    let g_imr = sq_grad(dec_im.output(), im, w.image_reconstruction);
    let mut g_zi = model.decoder.backward(&dec_im, &g_imr, &mut grads.decoder);

    let g_dyn = sq_grad(dyn_z.output(), zi, w.dynamics);
    add_into(
        &mut g_z,
        &model.dynamics.backward(&dyn_z, &g_dyn, &mut grads.dynamics),
    );
    g_zi.as_mut_slice()
        .iter_mut()
        .zip(g_dyn.as_slice())
        .for_each(|(a, b)| *a -= b);

    model.encoder.backward(&enc_x, &g_z, &mut grads.encoder);
    model.encoder.backward(&enc_im, &g_zi, &mut grads.encoder);
    Ok((losses, grads))
}

/// Loss and exact gradients of `l4 L4`; only encoder gradients are nonzero.
pub fn separation_gradients(
    model: &AutoencoderModel,
    xs: &Matrix,
    xf: &Matrix,
    w: &LossWeights,
) -> Result<(f64, ModelGrads)> {
    check_batch(model, xs, xf)?;
    let mut grads = ModelGrads::zeros_like(model);
    let enc_s = model.encoder.forward_cached(xs)?;
    let enc_f = model.encoder.forward_cached(xf)?;
    let es = enc_s.output();
    let ef = enc_f.output();
    let n = xs.rows() as f64;
    let c = w.sigmoid_scale;
    let mut g_s = Matrix::zeros(es.rows(), es.cols());
    let mut g_f = Matrix::zeros(ef.rows(), ef.cols());
    let mut loss = 0.0;
    for r in 0..es.rows() {
        let (a, b) = (es.row(r), ef.row(r));
        let dist = sq_dist(a, b).sqrt();
        let s = sigmoid(-c * dist);
        loss += s;
        // Subgradient 0 at coincident encodings.
        if dist > 0.0 {
            let k = w.separation * (-c) * s * (1.0 - s) / (n * dist);
            for (j, (u, v)) in a.iter().zip(b).enumerate() {
                g_s.row_mut(r)[j] = k * (u - v);
                g_f.row_mut(r)[j] = -k * (u - v);
            }
        }
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(format!("L4={loss}")));
    }
    model.encoder.backward(&enc_s, &g_s, &mut grads.encoder);
    model.encoder.backward(&enc_f, &g_f, &mut grads.encoder);
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::{Activation, Layer, Mlp};
    use crate::neural::model::Normalization;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64) -> AutoencoderModel {
        let mut m = AutoencoderModel::new(4, 2, &[8, 8], Normalization::identity(4), seed).unwrap();
        // Nonzero biases so every code path carries signal.
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for t in m.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.gen_range(-0.1..0.1);
            }
        }
        m
    }

    fn random_batch(rows: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(
            rows,
            4,
            (0..rows * 4).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        )
    }

    // Per-sample scalar evaluation written independently of Matrix/Layer code paths.
    fn scalar_net(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let nl = net.layers.len();
        for (l, layer) in net.layers.iter().enumerate() {
            let act = if l + 1 == nl { net.output } else { net.hidden };
            cur = (0..layer.outputs)
                .map(|o| {
                    let s: f64 = layer.bias[o]
                        + (0..layer.inputs)
                            .map(|i| layer.weights[i * layer.outputs + o] * cur[i])
                            .sum::<f64>();
                    match act {
                        Activation::Relu => {
                            if s > 0.0 {
                                s
                            } else {
                                0.0
                            }
                        }
                        Activation::Tanh => s.tanh(),
                        Activation::Identity => s,
                    }
                })
                .collect();
        }
        cur
    }

    fn scalar_losses(
        m: &AutoencoderModel,
        x: &Matrix,
        im: &Matrix,
        xs: &Matrix,
        xf: &Matrix,
        c: f64,
    ) -> [f64; 4] {
        let n = x.rows() as f64;
        let (mut l1, mut l2, mut l3, mut l4) = (0.0, 0.0, 0.0, 0.0);
        for r in 0..x.rows() {
            let z = scalar_net(&m.encoder, x.row(r));
            let zi = scalar_net(&m.encoder, im.row(r));
            let xr = scalar_net(&m.decoder, &z);
            let ir = scalar_net(&m.decoder, &zi);
            let zd = scalar_net(&m.dynamics, &z);
            for k in 0..4 {
                l1 += (x.row(r)[k] - xr[k]).powi(2);
                l2 += (im.row(r)[k] - ir[k]).powi(2);
            }
            for k in 0..2 {
                l3 += (zd[k] - zi[k]).powi(2);
            }
        }
        for r in 0..xs.rows() {
            let a = scalar_net(&m.encoder, xs.row(r));
            let b = scalar_net(&m.encoder, xf.row(r));
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            l4 += 1.0 / (1.0 + (c * d).exp());
        }
        [l1 / n, l2 / n, l3 / n, l4 / xs.rows() as f64]
    }

    #[test]
    fn losses_match_scalar_oracle() {
        let m = random_model(3);
        let (x, im) = (random_batch(17, 1), random_batch(17, 2));
        let (xs, xf) = (random_batch(9, 3), random_batch(9, 4));
        let w = LossWeights::default();
        let got = loss_batch(&m, &x, &im, Some((&xs, &xf)), &w).unwrap();
        let want = scalar_losses(&m, &x, &im, &xs, &xf, w.sigmoid_scale);
        for (g, e) in [got.l1, got.l2, got.l3, got.l4.unwrap()].iter().zip(want) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
        assert!((got.total - (want[0] + want[1] + want[2])).abs() < 1e-12);
    }

    #[test]
    fn identity_autoencoder_has_zero_reconstruction() {
        // Conceptual D = N model: identity encoder/decoder with identity outputs.
        let eye = |n: usize| {
            let mut l = Layer::zeros(n, n);
            for i in 0..n {
                l.weights[i * n + i] = 1.0;
            }
            Mlp {
                layers: vec![l],
                hidden: Activation::Relu,
                output: Activation::Identity,
            }
        };
        let m = AutoencoderModel {
            encoder: eye(4),
            decoder: eye(4),
            dynamics: eye(4),
            input_dim: 4,
            latent_dim: 4,
            normalization: Normalization::identity(4),
            seed: 0,
        };
        let (x, im) = (random_batch(5, 8), random_batch(5, 9));
        let l = loss_batch(&m, &x, &im, None, &LossWeights::default()).unwrap();
        assert_eq!((l.l1, l.l2), (0.0, 0.0));
        let (_, g) = reconstruction_gradients(
            &m,
            &x,
            &im,
            &LossWeights {
                image_reconstruction: 0.0,
                dynamics: 0.0,
                ..LossWeights::default()
            },
        )
        .unwrap();
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coincident_encodings_give_half() {
        let m = random_model(5);
        let xs = random_batch(3, 7);
        let l4 = separation_loss(&m, &xs, &xs, 10.0).unwrap();
        assert!((l4 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_rejected() {
        let m = random_model(1);
        let e = Matrix::zeros(0, 4);
        assert!(loss_batch(&m, &e, &e, None, &LossWeights::default()).is_err());
    }

    #[test]
    fn total_gradient_is_weighted_sum() {
        let m = random_model(6);
        let (x, im) = (random_batch(11, 1), random_batch(11, 2));
        let w = LossWeights {
            reconstruction: 0.7,
            image_reconstruction: 1.3,
            dynamics: 2.1,
            ..LossWeights::default()
        };
        let only = |a: f64, b: f64, c: f64| LossWeights {
            reconstruction: a,
            image_reconstruction: b,
            dynamics: c,
            ..w
        };
        let (_, total) = reconstruction_gradients(&m, &x, &im, &w).unwrap();
        let parts: Vec<Vec<f64>> = [
            only(1.0, 0.0, 0.0),
            only(0.0, 1.0, 0.0),
            only(0.0, 0.0, 1.0),
        ]
        .iter()
        .map(|ww| {
            reconstruction_gradients(&m, &x, &im, ww)
                .unwrap()
                .1
                .flatten()
        })
        .collect();
        for (i, t) in total.flatten().iter().enumerate() {
            let s = 0.7 * parts[0][i] + 1.3 * parts[1][i] + 2.1 * parts[2][i];
            assert!((t - s).abs() < 1e-12 * (1.0 + t.abs()));
        }
    }

    #[test]
    fn no_dynamics_gradient_without_dynamics_weight() {
        let m = random_model(2);
        let (x, im) = (random_batch(8, 1), random_batch(8, 2));
        let w = LossWeights {
            dynamics: 0.0,
            ..LossWeights::default()
        };
        let (_, g) = reconstruction_gradients(&m, &x, &im, &w).unwrap();
        assert!(g.dynamics.tensors().all(|t| t.iter().all(|v| *v == 0.0)));
    }
}
