//! Convolutional phone classifier whose narrow hidden layer provides
//! frame-level bottleneck features.
//!
//! Inputs are seven normalized frames stacked as channels (see
//! [`crate::corpus::window_samples`]). The network is two valid
//! convolutions with ReLU and max pooling, a batch-normalized flatten, and a
//! stack of fully connected ReLU layers ending in a softmax classifier.

mod checkpoint;
mod config;
mod data;
mod gradcheck;
mod net;
mod params;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::FeatNetConfig;
pub use data::{extract_bottleneck, prepare_frames, SampleSet};
pub use gradcheck::{gradient_check, numerical_check, GradCheckReport};
pub use net::{forward, forward_batch, loss_and_gradient, softmax, BnMode, Forward};
pub use params::{init_params, BatchNorm, ConvLayer, Dense, FeatNetParams};
pub use train::{accuracy, train_sgd, EpochMetrics, TrainHistory};
