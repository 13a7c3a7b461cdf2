//! The SE-PSA network: convolutional stem, five stages of grouped
//! pre-activation residual blocks with squeeze-and-excitation, and a
//! global-max-pool sigmoid head.

mod block;
mod checkpoint;
mod config;
mod flops;
mod layers;
mod network;

pub use block::{PsaBlock, SeBlock};
pub use checkpoint::{Checkpoint, RngState, StatsBlob, TensorBlob, FORMAT_VERSION};
pub use config::{BlockPlan, ModelConfig, Variant, DEPTHS, MAX_POOL};
pub use flops::{conv_flops, conv_params, count_flops, count_params, dense_flops, dense_params};
pub use layers::{BnLayer, ConvLayer, Ctx, DenseLayer, Param, ParamKind, PreActConv, Visitor};
pub use network::{batch_from_clips, predict, Network, Prediction, Stem, DECISION_THRESHOLD};
