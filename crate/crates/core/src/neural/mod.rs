//! From-scratch multilayer perceptrons and the latent dynamics autoencoder.

mod checkpoint;
mod loss;
mod matrix;
mod mlp;
mod model;
mod train;

pub use checkpoint::{
    from_json, load_checkpoint, load_checkpoint_expecting, save_checkpoint, to_json,
};
pub use loss::{
    loss_batch, reconstruction_gradients, separation_gradients, separation_loss, sigmoid,
    LossWeights, Losses,
};
pub use matrix::Matrix;
pub use mlp::{Activation, ForwardCache, Layer, Mlp, MlpGrads};
pub use model::{AutoencoderModel, ModelGrads, Normalization};
pub use train::{
    loss_history_csv, train, train_prepared, Adam, EpochLosses, PreparedData, TrainConfig,
    TrainOutcome,
};
