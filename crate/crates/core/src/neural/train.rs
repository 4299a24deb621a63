use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{reconstruction_gradients, separation_gradients, LossWeights};
use super::matrix::Matrix;
use super::model::{AutoencoderModel, ModelGrads, Normalization};
use crate::dataset::{Label, TrajectoryDataset};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub weights: LossWeights,
    pub learning_rate: f64,
    /// Learning rate in the last epoch as a fraction of `learning_rate`,
    /// reached by cosine annealing. 1 keeps the rate constant.
    pub final_lr_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub use_separation: bool,
    /// One common input scale for all axes instead of one per axis.
    pub shared_scale: bool,
    /// Retrain budget when downstream analysis rejects a model.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden: vec![32, 32],
            weights: LossWeights::default(),
            learning_rate: 1e-3,
            final_lr_fraction: 1.0,
            batch_size: 256,
            epochs: 500,
            seed: 0,
            use_separation: true,
            shared_scale: false,
            restarts: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let lambdas = [
            w.reconstruction,
            w.image_reconstruction,
            w.dynamics,
            w.separation,
        ];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "loss weights must be >= 0: {lambdas:?}"
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning rate must be > 0".into()));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::InvalidInput(
                "final learning-rate fraction must be in (0, 1]".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be >= 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidInput(
                "hidden layer widths must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Mean losses over one epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpochLosses {
    pub epoch: usize,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: Option<f64>,
    pub total: f64,
}

/// `epoch,l1,l2,l3,l4,total`, with an empty `l4` when separation is off.
pub fn loss_history_csv(history: &[EpochLosses]) -> String {
    let mut s = String::from("epoch,l1,l2,l3,l4,total\n");
    for e in history {
        let l4 = e.l4.map_or(String::new(), |v| v.to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.epoch, e.l1, e.l2, e.l3, l4, e.total
        ));
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: AutoencoderModel,
    pub history: Vec<EpochLosses>,
}

/// Adam with bias correction, one moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(model: &AutoencoderModel, lr: f64) -> Self {
        let shapes: Vec<usize> = model.tensors().map(<[f64]>::len).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Updates only the tensors whose index satisfies `active`.
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(
        &mut self,
        model: &mut AutoencoderModel,
        grads: &ModelGrads,
        active: impl Fn(usize) -> bool,
    ) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in model.tensors_mut().zip(grads.tensors()).enumerate() {
            if !active(k) {
                continue;
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Normalized `(x, Im(x))` pairs and labeled finals ready for training.
pub struct PreparedData {
    pub normalization: Normalization,
    pub states: Matrix,
    pub images: Matrix,
    pub success_finals: Matrix,
    pub failure_finals: Matrix,
}

impl PreparedData {
    pub fn new(train: &TrajectoryDataset, shared_scale: bool) -> Result<Self> {
        if train.num_pairs() == 0 {
            return Err(Error::InvalidInput("training set has no pairs".into()));
        }
        let normalization = if shared_scale {
            Normalization::fit_shared(train.all_states(), train.dim)
        } else {
            Normalization::fit(train.all_states(), train.dim)
        };
        let pairs = train.pairs();
        let xs: Vec<&[f64]> = pairs.iter().map(|p| p.0).collect();
        let ims: Vec<&[f64]> = pairs.iter().map(|p| p.1).collect();
        Ok(Self {
            states: normalization.apply_rows(&xs),
            images: normalization.apply_rows(&ims),
            success_finals: normalization.apply_rows(&train.finals(Label::Success)),
            failure_finals: normalization.apply_rows(&train.finals(Label::Failure)),
            normalization,
        })
    }
}

/// Trains encoder, decoder and latent dynamics jointly with Adam.
///
/// With the separation term enabled (and both final sets nonempty) each epoch
/// runs one pass over the pairs on the reconstruction/dynamics objective and
/// then one pass over the finals on the weighted separation loss, each phase
/// with its own optimizer state.
pub fn train(train_set: &TrajectoryDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = PreparedData::new(train_set, cfg.shared_scale)?;
    let model = AutoencoderModel::new(
        train_set.dim,
        cfg.latent_dim,
        &cfg.hidden,
        data.normalization.clone(),
        cfg.seed,
    )?;
    train_prepared(model, &data, cfg)
}

/// Cosine schedule from `learning_rate` at epoch 1 to
/// `learning_rate * final_lr_fraction` at the last epoch.
pub fn annealed_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    if cfg.epochs <= 1 || cfg.final_lr_fraction == 1.0 {
        return cfg.learning_rate;
    }
    let progress = (epoch - 1) as f64 / (cfg.epochs - 1) as f64;
    let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
    cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * cos)
}

pub fn train_prepared(
    mut model: AutoencoderModel,
    data: &PreparedData,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let w = cfg.weights;
    // Separate stream from weight initialization.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut recon_opt = Adam::new(&model, cfg.learning_rate);
    let mut sep_opt = Adam::new(&model, cfg.learning_rate);
    let encoder_tensors = model.encoder.layers.len() * 2;
    let separation = cfg.use_separation
        && w.separation > 0.0
        && data.success_finals.rows() > 0
        && data.failure_finals.rows() > 0;

    let n = data.states.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let lr = annealed_rate(cfg, epoch);
        recon_opt.set_learning_rate(lr);
        sep_opt.set_learning_rate(lr);
        order.shuffle(&mut rng);
        let mut acc = EpochLosses {
            epoch,
            ..Default::default()
        };
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.states.gather(chunk);
            let im = data.images.gather(chunk);
            let (l, g) =
                reconstruction_gradients(&model, &x, &im, &w).map_err(|e| Error::Diverged {
                    epoch,
                    reason: e.to_string(),
                })?;
            let k = chunk.len() as f64;
            acc.l1 += l.l1 * k;
            acc.l2 += l.l2 * k;
            acc.l3 += l.l3 * k;
            acc.total += l.total * k;
            recon_opt.step(&mut model, &g, |_| true);
        }
        acc.l1 /= n as f64;
        acc.l2 /= n as f64;
        acc.l3 /= n as f64;
        acc.total /= n as f64;

        if separation {
            let (ns, nf) = (data.success_finals.rows(), data.failure_finals.rows());
            let batches = (ns + nf).div_ceil(cfg.batch_size);
            let mut l4 = 0.0;
            for _ in 0..batches {
                let si: Vec<usize> = (0..cfg.batch_size).map(|_| rng.gen_range(0..ns)).collect();
                let fi: Vec<usize> = (0..cfg.batch_size).map(|_| rng.gen_range(0..nf)).collect();
                let xs = data.success_finals.gather(&si);
                let xf = data.failure_finals.gather(&fi);
                let (l, g) =
                    separation_gradients(&model, &xs, &xf, &w).map_err(|e| Error::Diverged {
                        epoch,
                        reason: e.to_string(),
                    })?;
                l4 += l;
                sep_opt.step(&mut model, &g, |k| k < encoder_tensors);
            }
            acc.l4 = Some(l4 / batches as f64);
        }

        if !acc.total.is_finite() || acc.total > DIVERGENCE_LIMIT || !model.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("total loss {}", acc.total),
            });
        }
        history.push(acc);
    }
    Ok(TrainOutcome { model, history })
}
