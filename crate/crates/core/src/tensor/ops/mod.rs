//! Forward operations with their backward rules.

mod activation;
mod conv;
mod dense;
mod dropout;
mod elementwise;
mod loss;
mod norm;
mod pool;

pub use activation::{activation, relu, sigmoid, sigmoid_scalar, Activation};
pub use conv::{conv1d, conv_out_len, Conv1dSpec};
pub use dense::dense;
pub use dropout::spatial_dropout;
pub use elementwise::{mean, reshape, residual_add, scale_channels, sum};
pub use loss::{bce_loss, BCE_CLAMP};
pub use norm::{batch_norm1d, BatchNormSpec, Mode, RunningStats, BN_EPSILON, BN_MOMENTUM};
pub use pool::{pool1d, Pool};
