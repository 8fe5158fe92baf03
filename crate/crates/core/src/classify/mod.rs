//! Residual CNN classifier for µD spectrograms, with hand-written
//! backpropagation and Adam.

mod checkpoint;
mod dataset;
mod layers;
mod network;
mod real;
mod tensor;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use dataset::{LabeledDataset, Sample};
pub use layers::{
    bn_backward, bn_forward, col2im, conv_backward, conv_forward, cross_entropy, dense_backward,
    dense_forward, elu, elu_backward, im2col, softmax, BnCache, ConvGeom,
};
pub use network::{
    argmax, BnStats, Grads, Mode, Network, NetworkSpec, BN_EPS, BN_MOMENTUM, STANDARD_FILTERS,
};
pub use real::Real;
pub use tensor::Tensor;
pub use train::{
    batch, evaluate, predict_all, train, Adam, EpochStats, TrainConfig, ADAM_BETA1, ADAM_BETA2,
    ADAM_EPS,
};
